use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::{covariance, FitResult};
use super::lsq::{levenberg_marquardt, LmOptions};
use crate::detection::{DetectorParams, Histogram};
use crate::error::{Error, Result};
use crate::units::{photon_energy, GroupVelocity};

const DB_TO_NATURAL: f64 = std::f64::consts::LN_10 / 10.0;

/// Acquisition settings of a photon-counting OTDR trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtdrSetup {
    /// Energy launched into the fiber per pulse, J.
    pub pulse_energy_j: f64,
    pub rep_period_s: f64,
    pub group: GroupVelocity,
    pub wavelength_nm: f64,
    /// Fitted delay range (seconds after pulse launch).
    pub fit_start_s: f64,
    pub fit_end_s: f64,
}

/// Folded detection counts; counts may be fractional for analytic inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtdrData {
    pub bin_s: f64,
    pub counts: Vec<f64>,
    pub n_periods: f64,
}

impl From<&Histogram> for OtdrData {
    fn from(h: &Histogram) -> Self {
        Self {
            bin_s: h.bin_s,
            counts: h.counts.iter().map(|&c| c as f64).collect(),
            n_periods: h.n_periods as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtdrFit {
    /// Parameters `alpha_db_per_km` and `eta_per_s`.
    pub fit: FitResult,
    pub bin_start_s: Vec<f64>,
    /// Corrected photon arrival rate per launched pulse, 1/s.
    pub corrected_rate: Vec<f64>,
    /// Fitted rate on the same bins.
    pub model_rate: Vec<f64>,
    /// Fraction of time the detector is live, per bin.
    pub live_fraction: Vec<f64>,
    pub fit_bins: (usize, usize),
}

fn bin_integral(k: f64, t0: f64, width: f64) -> f64 {
    // mean of exp(-k t) over [t0, t0 + width]
    if k * width < 1e-8 {
        return (-k * (t0 + 0.5 * width)).exp();
    }
    (-k * t0).exp() * (-(-k * width).exp_m1()) / (k * width)
}

/// Expected detections per bin before dark counts and dead time: photons
/// returned by the backscatter model integrated over each bin, times efficiency.
pub fn otdr_model_counts(alpha_db_per_km: f64, eta_per_s: f64, setup: &OtdrSetup, bin_s: f64, n_bins: usize, n_periods: f64, efficiency: f64) -> Vec<f64> {
    let photons = setup.pulse_energy_j / photon_energy(setup.wavelength_nm);
    let k = alpha_db_per_km * DB_TO_NATURAL * setup.group.km_per_s();
    (0..n_bins)
        .map(|i| n_periods * efficiency * photons * eta_per_s * bin_s * bin_integral(k, i as f64 * bin_s, bin_s))
        .collect()
}

/// Probability that the detector is dead at the centre of each bin: the
/// expected number of (accepted) events in the preceding dead time, which
/// for a non-paralyzable detector is exactly the dead probability. For a
/// constant rate this reduces to the familiar `r / (1 - r t_d)` correction.
fn dead_fraction(data: &OtdrData, dead_time: f64) -> Vec<f64> {
    let n = data.counts.len();
    if dead_time <= 0.0 {
        return vec![0.0; n];
    }
    let per_pulse: Vec<f64> = data.counts.iter().map(|c| c / data.n_periods).collect();
    let total: f64 = per_pulse.iter().sum();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + per_pulse[i];
    }
    // cumulative count from period start up to position x (in bins), any x
    let cum = |x: f64| -> f64 {
        let wraps = (x / n as f64).floor();
        let r = x - wraps * n as f64;
        let i = (r.floor() as usize).min(n - 1);
        wraps * total + prefix[i] + (r - i as f64) * per_pulse[i]
    };
    let width = dead_time / data.bin_s;
    (0..n)
        .map(|i| {
            let centre = i as f64 + 0.5;
            cum(centre) - cum(centre - width)
        })
        .collect()
}

/// Corrects a folded OTDR histogram for dead time, dark counts and detector
/// efficiency and fits the bin-integrated exponential return for `alpha` and `eta`.
pub fn fit_otdr(data: &OtdrData, detector: &DetectorParams, setup: &OtdrSetup) -> Result<OtdrFit> {
    let bin = data.bin_s;
    let n = data.counts.len();
    if !(bin > 0.0) || n < 4 || !(data.n_periods > 0.0) {
        return Err(Error::InsufficientData("histogram needs >= 4 bins and > 0 periods".into()));
    }
    if !(setup.fit_end_s > setup.fit_start_s && setup.fit_start_s >= 0.0) {
        return Err(Error::param("fit_end_s", "fit range is empty"));
    }
    if setup.fit_end_s > n as f64 * bin * (1.0 + 1e-9) {
        return Err(Error::param("fit_end_s", "fit range extends beyond the histogram"));
    }
    let first = (setup.fit_start_s / bin).ceil() as usize;
    let last = ((setup.fit_end_s / bin).floor() as usize).min(n);
    if last < first + 3 {
        return Err(Error::InsufficientData("fewer than 3 bins inside the fit range".into()));
    }
    let dead = dead_fraction(data, detector.dead_time_s);
    let live: Vec<f64> = dead.iter().map(|d| 1.0 - d).collect();
    if let Some(i) = live[first..last].iter().position(|l| *l <= 0.0) {
        return Err(Error::InvalidCorrection {
            fraction: 100.0 * (first + i) as f64 / n as f64,
        });
    }
    let dark_per_bin = detector.dark_rate_per_s * bin;
    let scale = detector.efficiency * bin;
    let corrected: Vec<f64> = (0..n)
        .map(|i| {
            let l = live[i].max(1e-12);
            (data.counts[i] / data.n_periods / l - dark_per_bin) / scale
        })
        .collect();
    let negative = corrected[first..last].iter().filter(|r| **r < 0.0).count();
    let fraction = negative as f64 / (last - first) as f64;
    if fraction > 0.05 {
        return Err(Error::InvalidCorrection { fraction: 100.0 * fraction });
    }

    let photons = setup.pulse_energy_j / photon_energy(setup.wavelength_nm);
    let vg = setup.group.km_per_s();
    let starts: Vec<f64> = (0..n).map(|i| i as f64 * bin).collect();
    let idx: Vec<usize> = (first..last).collect();
    let m = idx.len();
    let rate_sigma = |expected_counts: f64, i: usize| expected_counts.max(1.0).sqrt() / (data.n_periods * live[i] * scale);

    // initial guess from a log-linear fit on the positive bins
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &idx {
        if corrected[i] > 0.0 {
            let t = starts[i] + 0.5 * bin;
            let y = corrected[i].ln();
            sx += t;
            sy += y;
            sxx += t * t;
            sxy += t * y;
            cnt += 1.0;
        }
    }
    let slope = if cnt >= 2.0 { (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) } else { 0.0 };
    let k0 = (-slope).max(1e-6);
    let intercept = if cnt >= 1.0 { (sy - slope * sx) / cnt } else { 0.0 };
    let eta0 = (intercept.exp() / photons).max(1e-30);
    let alpha0 = k0 / (vg * DB_TO_NATURAL);

    let mut sigmas: Vec<f64> = idx.iter().map(|&i| rate_sigma(data.counts[i], i)).collect();
    let mut params = DVector::from_vec(vec![eta0.ln(), alpha0]);
    let mut outcome = None;
    for _pass in 0..2 {
        let model = |p: &DVector<f64>| {
            let eta = p[0].exp();
            let dk = DB_TO_NATURAL * vg;
            let k = p[1] * dk;
            let mut r = DVector::zeros(m);
            let mut j = DMatrix::zeros(m, 2);
            for (row, &i) in idx.iter().enumerate() {
                let t0 = starts[i];
                let g = bin_integral(k, t0, bin);
                // derivative of the bin mean of exp(-k t) with respect to k
                let h = 1e-7 * k.max(1e-3);
                let dg = (bin_integral(k + h, t0, bin) - bin_integral(k - h, t0, bin)) / (2.0 * h);
                let f = photons * eta * g;
                let w = 1.0 / sigmas[row];
                r[row] = w * (f - corrected[i]);
                j[(row, 0)] = w * f;
                j[(row, 1)] = w * photons * eta * dg * dk;
            }
            (r, j)
        };
        let out = levenberg_marquardt(model, params.clone(), LmOptions::default())?;
        params = out.params.clone();
        // reweight with the model-predicted counts to avoid low-count bias
        let eta = params[0].exp();
        let k = params[1] * DB_TO_NATURAL * vg;
        sigmas = idx
            .iter()
            .map(|&i| {
                let expected = (photons * eta * bin_integral(k, starts[i], bin) * scale + dark_per_bin) * live[i] * data.n_periods;
                rate_sigma(expected, i)
            })
            .collect();
        outcome = Some(out);
    }
    let out = outcome.expect("two passes ran");
    let cov = covariance(&out.normal_matrix, out.cost, m, true)?;
    let eta = params[0].exp();
    let alpha = params[1];
    let k = alpha * DB_TO_NATURAL * vg;
    let model_rate = starts.iter().map(|&t| photons * eta * bin_integral(k, t, bin)).collect();
    Ok(OtdrFit {
        fit: FitResult {
            names: vec!["alpha_db_per_km".into(), "eta_per_s".into()],
            params: vec![alpha, eta],
            uncertainties: vec![cov[(1, 1)].max(0.0).sqrt(), eta * cov[(0, 0)].max(0.0).sqrt()],
            residual_norm: out.cost.sqrt(),
            reduced_chi2: out.cost / (m.saturating_sub(2).max(1)) as f64,
            iterations: out.iterations,
            converged: true,
        },
        bin_start_s: starts,
        corrected_rate: corrected,
        model_rate,
        live_fraction: live,
        fit_bins: (first, last),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectorMode;

    fn setup() -> OtdrSetup {
        OtdrSetup {
            pulse_energy_j: 1.26e-14,
            rep_period_s: 200e-6,
            group: GroupVelocity::default(),
            wavelength_nm: 1545.3,
            fit_start_s: 2e-6,
            fit_end_s: 190e-6,
        }
    }

    #[test]
    fn analytic_histogram_inverts_exactly() {
        let s = setup();
        let det = DetectorParams::new(0.1, 0.0, 0.0, DetectorMode::PhotonCounting).unwrap();
        let counts = otdr_model_counts(0.202, 8.0, &s, 1e-6, 200, 1e4, det.efficiency);
        let data = OtdrData {
            bin_s: 1e-6,
            counts,
            n_periods: 1e4,
        };
        let f = fit_otdr(&data, &det, &s).unwrap();
        assert!((f.fit.value("alpha_db_per_km") / 0.202 - 1.0).abs() < 1e-9);
        assert!((f.fit.value("eta_per_s") / 8.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dead_time_and_dark_are_undone() {
        // constant true rate r: observed r/(1 + r t_d), plus dark
        let det = DetectorParams::new(0.5, 1000.0, 1e-6, DetectorMode::PhotonCounting).unwrap();
        let true_rate = 2e5; // detections/s
        let observed = (true_rate + det.dark_rate_per_s) / (1.0 + (true_rate + det.dark_rate_per_s) * det.dead_time_s);
        let n_periods = 1e6;
        let bin = 1e-7;
        let n = 100; // 10 us period
        let data = OtdrData {
            bin_s: bin,
            counts: vec![observed * bin * n_periods; n],
            n_periods,
        };
        let live: Vec<f64> = dead_fraction(&data, det.dead_time_s).iter().map(|d| 1.0 - d).collect();
        for l in &live {
            assert!((l - (1.0 - observed * det.dead_time_s)).abs() < 1e-12);
        }
        let corrected = data.counts[0] / n_periods / live[0] - det.dark_rate_per_s * bin;
        assert!((corrected / (true_rate * bin) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dark_dominated_trace_is_rejected() {
        let s = setup();
        let det = DetectorParams::new(0.1, 1e6, 0.0, DetectorMode::PhotonCounting).unwrap();
        let data = OtdrData {
            bin_s: 1e-6,
            counts: vec![0.0; 200],
            n_periods: 1e4,
        };
        assert!(matches!(fit_otdr(&data, &det, &s), Err(Error::InvalidCorrection { .. })));
    }
}
