//! Estimators and fits applied to simulated or measured data.

mod fit;
mod lsq;
mod otdr;
mod phase;
mod psd;
mod timing;
mod visibility;

pub use fit::{fit_power_law, FitResult, PowerLawPoint};
pub use lsq::{levenberg_marquardt, LmOptions, LmOutcome};
pub use otdr::{fit_otdr, otdr_model_counts, OtdrData, OtdrFit, OtdrSetup};
pub use phase::{extract_phase, qber_from_variance, subset_variance, subtract_floor, visibility_from_variance, VarianceEstimate};
pub use psd::{psd, Psd};
pub use timing::{recover_burst_timing, recover_pulse_comb, BurstTiming, TimingOptions};
pub use visibility::{windowed_visibility, VisibilityResult, WindowSpec};
