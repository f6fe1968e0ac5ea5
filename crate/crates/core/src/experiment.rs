//! End-to-end pipelines built from the lower-level modules: the
//! photon-counting visibility run, synthetic OTDR acquisition, classical
//! phase-noise sweeps and intensity PSDs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    extract_phase, fit_power_law, psd, recover_burst_timing, recover_pulse_comb, subset_variance, subtract_floor, windowed_visibility, BurstTiming,
    FitResult, OtdrSetup, PowerLawPoint, Psd, TimingOptions, VisibilityResult, WindowSpec,
};
use crate::detection::{
    classical_trace, fold_histogram, interference_flux, spad_detect, spad_detect_thinned, watts_to_probability, DetectorId, DetectorParams, Histogram,
    InterferenceParams, PhotonFlux, TimestampSeries,
};
use crate::error::{Error, Result};
use crate::fiber::{Direction, LoopLayout};
use crate::noise::{synthesize_phase, BackscatterKernel, PhaseNoiseModel, PhaseStream};
use crate::signal::{apply_burst, make_pulse_train, SignalPattern};
use crate::units::{photon_energy, TimeGrid, TimeSeries};

/// Derives an independent seed for a sub-task.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalMode {
    Cw,
    Pulsed,
    Burst { on_time_s: f64, off_time_s: f64 },
}

impl SignalMode {
    pub fn label(&self) -> &'static str {
        match self {
            SignalMode::Cw => "cw",
            SignalMode::Pulsed => "pulsed",
            SignalMode::Burst { .. } => "burst",
        }
    }
}

/// Settings of one photon-counting visibility measurement (a pair of runs
/// with phi = 0 and phi = pi).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonRunConfig {
    pub layout: LoopLayout,
    pub pulse_rate_hz: f64,
    pub pulse_width_s: f64,
    pub dt_s: f64,
    pub wavelength_nm: f64,
    pub mode: SignalMode,
    /// Fringe maximum, detections per pulse.
    pub i_max: f64,
    /// Fringe minimum (imperfect interference), detections per pulse.
    pub i_min: f64,
    pub phase_variance: f64,
    pub phase_bandwidth_hz: f64,
    pub detector: DetectorParams,
    pub span_s: f64,
    pub include_backscatter: bool,
    /// Full detection window; `None` means pulse width plus two samples.
    pub window_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonRun {
    /// (D0, D1) recorded with phi = 0.
    pub constructive: (TimestampSeries, TimestampSeries),
    /// (D0, D1) recorded with phi = pi.
    pub destructive: (TimestampSeries, TimestampSeries),
    pub timing: Option<BurstTiming>,
    pub window: WindowSpec,
    pub visibility: VisibilityResult,
    /// Mean backscatter detections per pulse slot inside the windows, per detector.
    pub window_backscatter_per_pulse: f64,
    /// Launched pulse energy, J.
    pub launch_energy_j: f64,
}

/// Prepared periodic fluxes shared by both phase settings.
pub struct PhotonSetup {
    pub pattern: SignalPattern,
    /// Signal arrival envelope at the detectors, summing to 1 per pulse.
    pub arrival: Vec<f64>,
    /// Backscatter detections per sample, per detector.
    pub backscatter: Vec<f64>,
    pub transit_samples: usize,
    pub launch_energy_j: f64,
    pub window: WindowSpec,
}

impl PhotonRunConfig {
    fn pulse_period_samples(&self) -> usize {
        (1.0 / (self.pulse_rate_hz * self.dt_s)).round() as usize
    }

    pub fn window_s(&self) -> f64 {
        self.window_s.unwrap_or_else(|| {
            let samples = (self.pulse_width_s / self.dt_s).round().max(1.0);
            (samples + 2.0) * self.dt_s
        })
    }

    /// Builds pattern, arrival envelope and backscatter flux.
    pub fn prepare(&self) -> Result<PhotonSetup> {
        let dt = self.dt_s;
        let unit = TimeGrid::new(0.0, dt, self.pulse_period_samples())?;
        let train = make_pulse_train(self.pulse_rate_hz, self.pulse_width_s, 1.0, &unit)?;
        let unit_energy = self.pulse_width_s; // peak 1 W
        let pattern = match self.mode {
            SignalMode::Cw => {
                let p = unit_energy / train.period();
                crate::signal::make_cw(p, train.period_samples(), &unit)?
            }
            SignalMode::Pulsed => train.clone(),
            SignalMode::Burst { on_time_s, off_time_s } => apply_burst(&train, on_time_s, off_time_s)?,
        };
        let t_loop = self.layout.transmittance();
        let hv = photon_energy(self.wavelength_nm);
        let launch_energy = (self.i_max + self.i_min) * hv / (self.detector.efficiency * t_loop);
        let scale = launch_energy / unit_energy;
        let pattern = pattern.scaled(scale)?;
        let n = pattern.period_samples();
        let transit_samples = (self.layout.transit_time() / dt).round() as usize;
        let mut arrival = vec![0.0; n];
        for (k, p) in pattern.one_period().iter().enumerate() {
            arrival[(k + transit_samples) % n] = p * dt / launch_energy;
        }
        let backscatter = if self.include_backscatter {
            let kernel = BackscatterKernel::new(&self.layout, dt, n)?;
            let wave = kernel.response(&pattern)?;
            wave.power
                .iter()
                .map(|w| 0.5 * watts_to_probability(*w, dt, self.detector.efficiency, self.wavelength_nm))
                .collect()
        } else {
            vec![0.0; n]
        };
        // known windows: centre of the arrival sample of each pulse
        let pulse_samples = self.pulse_period_samples();
        let first = pattern.pulse_starts().first().copied().unwrap_or(0);
        let width = pattern.meta.pulse_samples.unwrap_or(1);
        let centre = ((first + transit_samples) % n) as f64 * dt + 0.5 * width as f64 * dt;
        let pulse_period = pulse_samples as f64 * dt;
        let burst = match self.mode {
            SignalMode::Burst { .. } => {
                let on = pattern.meta.burst_on_s.unwrap_or(0.0);
                Some((pattern.period(), centre, (on / pulse_period).round() as usize))
            }
            _ => None,
        };
        let window = WindowSpec {
            pulse_period_s: pulse_period,
            comb_center_s: centre.rem_euclid(pulse_period),
            window_s: self.window_s(),
            burst,
        };
        Ok(PhotonSetup {
            pattern,
            arrival,
            backscatter,
            transit_samples,
            launch_energy_j: launch_energy,
            window,
        })
    }
}

fn detect_pair(config: &PhotonRunConfig, setup: &PhotonSetup, phi: f64, seed: u64) -> Result<(TimestampSeries, TimestampSeries)> {
    let params = InterferenceParams::new(config.i_max, config.i_min, phi)?;
    let dt = config.dt_s;
    let run = |id: DetectorId| -> Result<TimestampSeries> {
        let det_seed = derive_seed(seed, 100 + id.index() as u64);
        if config.phase_variance == 0.0 {
            let level = params.intensity(0.0, id);
            let prob = setup.arrival.iter().zip(&setup.backscatter).map(|(a, b)| a * level + b).collect();
            return spad_detect(&PhotonFlux::new(dt, prob)?, &config.detector, id, config.span_s, det_seed);
        }
        let upper: Vec<f64> = setup.arrival.iter().zip(&setup.backscatter).map(|(a, b)| a * config.i_max + b).collect();
        let flux = PhotonFlux::new(dt, upper)?;
        // both ports of one run see the same phase realization
        let mut stream = PhaseStream::new(config.phase_variance, config.phase_bandwidth_hz, derive_seed(seed, 7))?;
        let mut accept = |t: f64, k: usize| -> f64 {
            let a = setup.arrival[k];
            if a == 0.0 {
                return 1.0;
            }
            let bs = setup.backscatter[k];
            let actual = a * params.intensity(stream.value(t), id) + bs;
            actual / (a * config.i_max + bs)
        };
        spad_detect_thinned(&flux, &config.detector, id, config.span_s, det_seed, &mut accept)
    };
    Ok((run(DetectorId::D0)?, run(DetectorId::D1)?))
}

/// Simulates the phi = 0 and phi = pi acquisitions and evaluates the
/// windowed visibility. Burst runs recover their timing from the bright
/// detector; pulsed runs recover the pulse comb; CW runs use the known
/// arrival comb.
pub fn run_photon(config: &PhotonRunConfig, seed: u64) -> Result<PhotonRun> {
    let setup = config.prepare()?;
    run_photon_prepared(config, &setup, seed)
}

pub fn run_photon_prepared(config: &PhotonRunConfig, setup: &PhotonSetup, seed: u64) -> Result<PhotonRun> {
    let constructive = detect_pair(config, setup, 0.0, derive_seed(seed, 1))?;
    let destructive = detect_pair(config, setup, std::f64::consts::PI, derive_seed(seed, 2))?;
    let window_s = config.window_s();
    let pulse_period = setup.window.pulse_period_s;
    let (timing, window) = match config.mode {
        SignalMode::Burst { .. } => {
            let opts = TimingOptions {
                pulse_period_s: Some(pulse_period),
                comb_tolerance_s: 0.5 * window_s,
                ..Default::default()
            };
            let t = recover_burst_timing(&constructive.0, setup.pattern.period(), &opts).map_err(|e| e.context("burst timing recovery"))?;
            let w = WindowSpec::from_timing(&t, window_s)?;
            (Some(t), w)
        }
        SignalMode::Pulsed => {
            let c = recover_pulse_comb(&constructive.0, pulse_period).map_err(|e| e.context("pulse comb recovery"))?;
            (
                None,
                WindowSpec {
                    comb_center_s: c,
                    ..setup.window
                },
            )
        }
        SignalMode::Cw => (None, setup.window),
    };
    let visibility = windowed_visibility((&constructive.0, &constructive.1), (&destructive.0, &destructive.1), &window)?;
    let window_backscatter_per_pulse = window_mean(&setup.backscatter, &setup.window, config.dt_s);
    Ok(PhotonRun {
        constructive,
        destructive,
        timing,
        window,
        visibility,
        window_backscatter_per_pulse,
        launch_energy_j: setup.launch_energy_j,
    })
}

/// Mean per-window sum of a periodic per-sample flux over the known windows.
fn window_mean(flux: &[f64], window: &WindowSpec, dt: f64) -> f64 {
    let n = flux.len();
    let mut total = 0.0;
    let mut windows = 0usize;
    let p = window.pulse_period_s;
    let per_period = ((n as f64 * dt) / p).round() as usize;
    for j in 0..per_period {
        let centre = window.comb_center_s + j as f64 * p;
        if !window.contains(centre) {
            continue;
        }
        let lo = ((centre - 0.5 * window.window_s) / dt).round() as i64;
        let hi = ((centre + 0.5 * window.window_s) / dt).round() as i64;
        total += (lo..hi).map(|k| flux[k.rem_euclid(n as i64) as usize]).sum::<f64>();
        windows += 1;
    }
    if windows == 0 {
        0.0
    } else {
        total / windows as f64
    }
}

/// Photon-counting OTDR acquisition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtdrConfig {
    pub average_power_dbm: f64,
    pub rep_rate_hz: f64,
    pub pulse_width_s: f64,
    pub dt_s: f64,
    pub wavelength_nm: f64,
    pub span_s: f64,
    pub bin_s: f64,
    pub fit_start_s: f64,
    /// Fraction of the round-trip horizon included in the fit.
    pub fit_horizon_fraction: f64,
}

impl Default for OtdrConfig {
    fn default() -> Self {
        Self {
            average_power_dbm: -72.0,
            rep_rate_hz: 5e3,
            pulse_width_s: 450e-12,
            dt_s: 0.5e-9,
            wavelength_nm: crate::units::DEFAULT_WAVELENGTH_NM,
            span_s: 2.0,
            bin_s: 1e-6,
            fit_start_s: 1e-6,
            fit_horizon_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtdrAcquisition {
    pub series: TimestampSeries,
    pub histogram: Histogram,
    pub setup: OtdrSetup,
}

/// Simulates a photon-counting OTDR trace of `layout` (launched clockwise).
pub fn simulate_otdr(layout: &LoopLayout, config: &OtdrConfig, detector: &DetectorParams, seed: u64) -> Result<OtdrAcquisition> {
    let period_samples = (1.0 / (config.rep_rate_hz * config.dt_s)).round() as usize;
    let grid = TimeGrid::new(0.0, config.dt_s, period_samples)?;
    let average = crate::units::dbm_to_watts(config.average_power_dbm)?;
    let energy = average / config.rep_rate_hz;
    let train = make_pulse_train(config.rep_rate_hz, config.pulse_width_s, energy / config.pulse_width_s, &grid)?;
    let horizon = layout.round_trip_horizon();
    if horizon >= train.period() {
        return Err(Error::param(
            "rep_rate_hz",
            format!("round trip {horizon:e} s exceeds the repetition period {:e} s", train.period()),
        ));
    }
    let kernel = BackscatterKernel::single(layout, Direction::Clockwise, config.dt_s, period_samples)?;
    let wave = kernel.response(&train)?;
    let prob = wave
        .power
        .iter()
        .map(|w| watts_to_probability(*w, config.dt_s, detector.efficiency, config.wavelength_nm))
        .collect();
    let series = spad_detect(&PhotonFlux::new(config.dt_s, prob)?, detector, DetectorId::D0, config.span_s, seed)?;
    let histogram = fold_histogram(&series, train.period(), config.bin_s)?;
    let setup = OtdrSetup {
        pulse_energy_j: energy,
        rep_period_s: train.period(),
        group: layout.group(),
        wavelength_nm: config.wavelength_nm,
        fit_start_s: config.fit_start_s,
        fit_end_s: config.fit_horizon_fraction * horizon,
    };
    Ok(OtdrAcquisition { series, histogram, setup })
}

/// Classical phase-noise measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweepConfig {
    pub lengths_km: Vec<f64>,
    pub trials: usize,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Subset size n; the default gives ~10 subsets.
    pub subset_size: usize,
    /// Static phase of the classical measurement.
    pub phi: f64,
}

impl Default for PhaseSweepConfig {
    fn default() -> Self {
        Self {
            lengths_km: vec![5.0, 25.0, 50.0, 75.0, 100.0, 125.0],
            trials: 10,
            sample_rate_hz: 100e6,
            duration_s: 1e-3,
            subset_size: 10_000,
            phi: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub length_km: f64,
    pub model_variance: f64,
    /// Mean over trials of the floor-subtracted subset variance.
    pub variance: f64,
    pub raw_variance: f64,
    /// Standard error of `variance` from the subset spread.
    pub sigma: f64,
    pub visibility: f64,
    pub qber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub points: Vec<SweepPoint>,
    pub fit: FitResult,
}

/// One classical trial: synthesize, form the fringe, add equipment noise,
/// extract the phase and estimate its subset variance.
fn phase_trial(model: &PhaseNoiseModel, length_km: f64, config: &PhaseSweepConfig, seed: u64) -> Result<crate::analysis::VarianceEstimate> {
    let grid = TimeGrid::covering(1.0 / config.sample_rate_hz, config.duration_s)?;
    let phase = synthesize_phase(model, length_km, &grid, derive_seed(seed, 1))?;
    let params = InterferenceParams::new(1.0, 0.0, config.phi)?;
    let envelope = crate::signal::make_cw(1.0, 1, &grid)?;
    let flux = interference_flux(&envelope, &phase, &params)?;
    let clean = TimeSeries::new(grid, flux.d0)?;
    let noisy = classical_trace(&clean, &params, model.floor, derive_seed(seed, 2))?;
    let extracted = extract_phase(&noisy, &params)?;
    subset_variance(&extracted.values, config.subset_size)
}

/// Variance-versus-length sweep with floor subtraction and a power-law fit
/// (`a L^b + c` when the model has a floor).
pub fn phase_sweep(model: &PhaseNoiseModel, config: &PhaseSweepConfig, seed: u64) -> Result<PhaseSweep> {
    if config.trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    let points: Vec<SweepPoint> = config
        .lengths_km
        .par_iter()
        .enumerate()
        .map(|(i, &l)| -> Result<SweepPoint> {
            let mut sum = 0.0;
            let mut raw = 0.0;
            let mut var_of_mean = 0.0;
            for trial in 0..config.trials {
                let est = phase_trial(model, l, config, derive_seed(seed, (i * 1000 + trial) as u64))?;
                sum += subtract_floor(&est, model.floor, model.floor_uncertainty);
                raw += est.sigma2;
                var_of_mean += est.std_across_subsets.powi(2) / est.n_subsets as f64;
            }
            let t = config.trials as f64;
            let variance = sum / t;
            Ok(SweepPoint {
                length_km: l,
                model_variance: model.variance(l),
                variance,
                raw_variance: raw / t,
                sigma: var_of_mean.sqrt() / t,
                visibility: crate::analysis::visibility_from_variance(variance),
                qber: crate::analysis::qber_from_variance(variance),
            })
        })
        .collect::<Result<_>>()?;
    let fit_points: Vec<PowerLawPoint> = points
        .iter()
        .map(|p| PowerLawPoint {
            length_km: p.length_km,
            variance: p.variance,
            sigma: Some(p.sigma.max(1e-12)),
        })
        .collect();
    // the lower-bound floor rule leaves a small constant behind
    let fit = fit_power_law(&fit_points, model.floor > 0.0)?;
    Ok(PhaseSweep { points, fit })
}

/// PSD of a classical intensity trace of a loop with the given phase model.
pub fn intensity_psd(model: &PhaseNoiseModel, length_km: f64, sample_rate_hz: f64, duration_s: f64, rbw_hz: f64, band: (f64, f64), seed: u64) -> Result<Psd> {
    let grid = TimeGrid::covering(1.0 / sample_rate_hz, duration_s)?;
    let phase = synthesize_phase(model, length_km, &grid, derive_seed(seed, 1))?;
    let params = InterferenceParams::new(1.0, 0.0, std::f64::consts::FRAC_PI_2)?;
    let envelope = crate::signal::make_cw(1.0, 1, &grid)?;
    let flux = interference_flux(&envelope, &phase, &params)?;
    let trace = classical_trace(&TimeSeries::new(grid, flux.d0)?, &params, model.floor, derive_seed(seed, 2))?;
    psd(&trace, rbw_hz, band.0, band.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FiberSegment;

    #[test]
    fn seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }

    #[test]
    fn arrival_envelope_sums_to_one_per_pulse() {
        let layout = LoopLayout::uniform(FiberSegment::smf28_ull(2.0).unwrap()).unwrap();
        let cfg = PhotonRunConfig {
            layout,
            pulse_rate_hz: 10e6,
            pulse_width_s: 900e-12,
            dt_s: 1e-9,
            wavelength_nm: 1545.3,
            mode: SignalMode::Burst {
                on_time_s: 2e-6,
                off_time_s: 13e-6,
            },
            i_max: 3.5e-3,
            i_min: 7e-7,
            phase_variance: 0.0,
            phase_bandwidth_hz: 1e6,
            detector: DetectorParams::default(),
            span_s: 1e-3,
            include_backscatter: true,
            window_s: None,
        };
        let s = cfg.prepare().unwrap();
        let total: f64 = s.arrival.iter().sum();
        assert!((total - 20.0).abs() < 1e-9);
        assert!((cfg.window_s() - 3e-9).abs() < 1e-18);
        // every pulse arrival lies inside a known window
        for (k, a) in s.arrival.iter().enumerate() {
            if *a > 0.0 {
                assert!(s.window.contains((k as f64 + 0.5) * 1e-9));
            }
        }
    }
}
