//! Optical signal patterns (CW, pulse trains, bursts) and burst-schedule
//! design.

use serde::{Deserialize, Serialize};

use crate::detection::DetectorParams;
use crate::error::{Error, Result};
use crate::fiber::LoopLayout;
use crate::noise::{BackscatterKernel, BackscatterWaveform};
use crate::units::{photon_energy, TimeGrid};

/// Descriptive metadata attached to a pattern.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternMeta {
    pub pulse_rate_hz: Option<f64>,
    pub pulse_width_s: Option<f64>,
    /// Samples occupied by one pulse.
    pub pulse_samples: Option<usize>,
    pub burst_on_s: Option<f64>,
    pub burst_off_s: Option<f64>,
    /// Burst duty cycle; 1 without bursts.
    pub duty: f64,
    /// Requested burst timing before quantization to whole pulse periods.
    pub requested_burst: Option<(f64, f64)>,
}

/// Sampled optical power x(t), exactly periodic with `period_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPattern {
    grid: TimeGrid,
    power: Vec<f64>,
    period_samples: usize,
    pub meta: PatternMeta,
}

impl SignalPattern {
    /// Builds a pattern from raw samples; the grid must hold whole periods.
    pub fn from_samples(grid: TimeGrid, power: Vec<f64>, period_samples: usize, meta: PatternMeta) -> Result<Self> {
        if power.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} power samples on a {}-sample grid",
                power.len(),
                grid.len()
            )));
        }
        if period_samples == 0 || grid.len() % period_samples != 0 {
            return Err(Error::NonPeriodic(format!(
                "grid of {} samples is not a whole number of {period_samples}-sample periods",
                grid.len()
            )));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("power", "samples must be finite and >= 0"));
        }
        let pattern = Self {
            grid,
            power,
            period_samples,
            meta,
        };
        if !pattern.is_periodic() {
            return Err(Error::NonPeriodic("samples differ between periods".into()));
        }
        Ok(pattern)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn period_samples(&self) -> usize {
        self.period_samples
    }

    pub fn period(&self) -> f64 {
        self.period_samples as f64 * self.grid.dt()
    }

    /// The first period of samples.
    pub fn one_period(&self) -> &[f64] {
        &self.power[..self.period_samples]
    }

    /// Power at an arbitrary sample index, extended periodically.
    pub fn power_at(&self, k: usize) -> f64 {
        self.power[k % self.period_samples]
    }

    pub fn energy(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.grid.dt()
    }

    pub fn average_power(&self) -> f64 {
        self.power.iter().sum::<f64>() / self.power.len() as f64
    }

    pub fn duty(&self) -> f64 {
        self.meta.duty
    }

    fn is_periodic(&self) -> bool {
        let p = self.period_samples;
        self.power.chunks(p).all(|chunk| chunk == &self.power[..p])
    }

    /// Multiplies all samples by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let power = self.power.iter().map(|p| p * factor).collect();
        Self::from_samples(self.grid, power, self.period_samples, self.meta.clone())
    }

    /// Sample indices (within one period) at which pulses start.
    pub fn pulse_starts(&self) -> Vec<usize> {
        let p = &self.power[..self.period_samples];
        (0..p.len())
            .filter(|&k| p[k] > 0.0 && (k == 0 && p[p.len() - 1] == 0.0 || k > 0 && p[k - 1] == 0.0))
            .collect()
    }
}

fn samples_per(duration: f64, dt: f64, what: &'static str) -> Result<usize> {
    let exact = duration / dt;
    let n = exact.round();
    if !(n >= 1.0) {
        return Err(Error::param(what, format!("{duration:e} s is shorter than one sample")));
    }
    Ok(n as usize)
}

/// Rectangular pulses at `rate_hz`; every pulse carries `peak_power_w * width_s`.
///
/// The pulse occupies `round(width / dt)` samples; the per-sample power is
/// adjusted so the pulse energy stays exactly `peak_power * width`.
pub fn make_pulse_train(rate_hz: f64, width_s: f64, peak_power_w: f64, grid: &TimeGrid) -> Result<SignalPattern> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::param("rate_hz", format!("{rate_hz} must be > 0")));
    }
    if !(width_s > 0.0 && width_s < 1.0 / rate_hz) {
        return Err(Error::param("width_s", format!("{width_s:e} must lie in (0, 1/rate)")));
    }
    if !(peak_power_w.is_finite() && peak_power_w >= 0.0) {
        return Err(Error::param("peak_power_w", format!("{peak_power_w} must be >= 0")));
    }
    let dt = grid.dt();
    let pulse_samples = (width_s / dt).round() as usize;
    if pulse_samples == 0 {
        return Err(Error::UnresolvableWidth { width_s, dt_s: dt });
    }
    let period_samples = samples_per(1.0 / rate_hz, dt, "rate_hz")?;
    if pulse_samples >= period_samples {
        return Err(Error::UnresolvableWidth { width_s, dt_s: dt });
    }
    let level = peak_power_w * width_s / (pulse_samples as f64 * dt);
    let power: Vec<f64> = (0..grid.len())
        .map(|k| if k % period_samples < pulse_samples { level } else { 0.0 })
        .collect();
    SignalPattern::from_samples(
        *grid,
        power,
        period_samples,
        PatternMeta {
            pulse_rate_hz: Some(1.0 / (period_samples as f64 * dt)),
            pulse_width_s: Some(width_s),
            pulse_samples: Some(pulse_samples),
            duty: 1.0,
            ..Default::default()
        },
    )
}

/// Continuous-wave light. `period_samples` sets the slot length used when the
/// pattern is compared with a pulse train of the same average power.
pub fn make_cw(power_w: f64, period_samples: usize, grid: &TimeGrid) -> Result<SignalPattern> {
    if !(power_w.is_finite() && power_w >= 0.0) {
        return Err(Error::param("power_w", format!("{power_w} must be >= 0")));
    }
    SignalPattern::from_samples(
        *grid,
        vec![power_w; grid.len()],
        period_samples,
        PatternMeta {
            duty: 1.0,
            ..Default::default()
        },
    )
}

/// Gates `pattern` into bursts: on for `on_time`, off for `off_time`.
///
/// Both times are rounded to whole periods of the input pattern so the result
/// stays exactly periodic; the requested values are kept in the metadata. The
/// returned grid holds exactly one burst period.
pub fn apply_burst(pattern: &SignalPattern, on_time: f64, off_time: f64) -> Result<SignalPattern> {
    if !(off_time.is_finite() && off_time >= 0.0) {
        return Err(Error::param("off_time", format!("{off_time:e} must be >= 0")));
    }
    if off_time == 0.0 {
        return Ok(pattern.clone());
    }
    let unit = pattern.period();
    let dt = pattern.grid.dt();
    if !(on_time >= 0.5 * unit) {
        return Err(Error::param("on_time", format!("{on_time:e} s is shorter than one pulse period")));
    }
    let on_units = (on_time / unit).round() as usize;
    let off_units = ((off_time / unit).round() as usize).max(1);
    let p = pattern.period_samples;
    let on_samples = on_units * p;
    let period_samples = (on_units + off_units) * p;
    let base = pattern.one_period();
    let power: Vec<f64> = (0..period_samples)
        .map(|k| if k < on_samples { base[k % p] } else { 0.0 })
        .collect();
    let on = on_samples as f64 * dt;
    let off = (period_samples - on_samples) as f64 * dt;
    let meta = PatternMeta {
        burst_on_s: Some(on),
        burst_off_s: Some(off),
        duty: on / (on + off),
        requested_burst: Some((on_time, off_time)),
        ..pattern.meta.clone()
    };
    SignalPattern::from_samples(TimeGrid::new(pattern.grid.t0(), dt, period_samples)?, power, period_samples, meta)
}

/// Burst duty cycle for two users a half-loop apart: on-time L/(2 v_g),
/// off-time L/v_g. The loop length cancels.
pub fn optimal_duty_two_user() -> f64 {
    let on = 0.5; // in units of L / v_g
    let off = 1.0;
    on / (on + off)
}

/// Pulse-train settings used when designing a burst schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub rate_hz: f64,
    pub width_s: f64,
    pub dt_s: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstPlan {
    pub on_time_s: f64,
    pub off_time_s: f64,
    pub period_s: f64,
    pub pulses_per_burst: usize,
    pub duty: f64,
    /// Signal over backscatter-plus-dark counts in the worst detection window.
    pub predicted_snr: f64,
    /// Worst-case backscatter detection probability inside one window, per detector.
    pub window_backscatter_probability: f64,
    /// Worst-case backscatter detection rate inside a window, per detector, 1/s.
    pub window_backscatter_rate_per_s: f64,
    pub dark_rate_per_s: f64,
    pub margin: f64,
    pub window_s: f64,
}

/// Detection windows (start sample, length) within one pattern period for the
/// pulses launched during the burst, shifted by the loop transit time.
pub(crate) fn arrival_windows(pattern: &SignalPattern, transit_samples: usize) -> Vec<(usize, usize)> {
    let n = pattern.period_samples();
    let width = pattern.meta.pulse_samples.unwrap_or(1);
    pattern
        .pulse_starts()
        .into_iter()
        .map(|s| ((s + transit_samples + n - 1) % n, width + 2))
        .collect()
}

/// Largest backscatter detection probability (per detector) over the given
/// windows, for a total backscatter waveform in watts.
pub(crate) fn worst_window_probability(bs_watts: &[f64], windows: &[(usize, usize)], dt: f64, efficiency: f64, wavelength_nm: f64) -> f64 {
    let n = bs_watts.len();
    let scale = 0.5 * dt * efficiency / photon_energy(wavelength_nm);
    windows
        .iter()
        .map(|&(start, len)| (0..len).map(|j| bs_watts[(start + j) % n]).sum::<f64>() * scale)
        .fold(0.0, f64::max)
}

/// Chooses the longest burst on-time (whole pulse periods) whose backscatter
/// inside every detection window stays below `dark_rate / margin`, with the
/// burst period fixed to 3L/(2 v_g).
pub fn design_burst(layout: &LoopLayout, pulses: &PulseSpec, source_power_w: f64, detector: &DetectorParams, margin: f64) -> Result<BurstPlan> {
    if !(margin >= 1.0) {
        return Err(Error::param("margin", format!("{margin} must be >= 1")));
    }
    if !(source_power_w.is_finite() && source_power_w >= 0.0) {
        return Err(Error::param("source_power_w", format!("{source_power_w} must be >= 0")));
    }
    let dt = pulses.dt_s;
    let unit_grid = TimeGrid::new(0.0, dt, samples_per(1.0 / pulses.rate_hz, dt, "rate_hz")?)?;
    let train = make_pulse_train(pulses.rate_hz, pulses.width_s, source_power_w, &unit_grid)?;
    let unit = train.period();
    let target_period = 1.5 * layout.transit_time();
    let total_units = ((target_period / unit).round() as usize).max(2);
    let period_samples = total_units * train.period_samples();
    let kernel = BackscatterKernel::new(layout, dt, period_samples)?;
    let transit_samples = (layout.transit_time() / dt).round() as usize;
    let window_samples = train.meta.pulse_samples.unwrap_or(1) + 2;
    let window_s = window_samples as f64 * dt;
    let limit_rate = detector.dark_rate_per_s / margin;

    let evaluate = |on_units: usize| -> Result<(f64, f64)> {
        let pattern = if on_units == total_units {
            let grid = TimeGrid::new(0.0, dt, period_samples)?;
            let full = make_pulse_train(pulses.rate_hz, pulses.width_s, source_power_w, &grid)?;
            SignalPattern::from_samples(grid, full.power, period_samples, full.meta)?
        } else {
            apply_burst(&train, on_units as f64 * unit, (total_units - on_units) as f64 * unit)?
        };
        let wave = kernel.response(&pattern)?;
        let windows = arrival_windows(&pattern, transit_samples);
        let prob = worst_window_probability(&wave.power, &windows, dt, detector.efficiency, pulses.wavelength_nm);
        let worst_bs_watts = windows
            .iter()
            .flat_map(|&(s, len)| (0..len).map(move |j| (s + j) % period_samples))
            .map(|k| wave.power[k])
            .fold(0.0, f64::max);
        Ok((prob, worst_bs_watts))
    };
    let satisfied = |prob: f64| prob / window_s <= limit_rate;

    let (mut lo, mut lo_eval) = (1usize, evaluate(1)?);
    if !satisfied(lo_eval.0) {
        return Err(Error::InfeasibleBurst(format!(
            "a single-pulse burst already gives {:.3e} backscatter detections/s per window (limit {:.3e}/s); lower the source power",
            lo_eval.0 / window_s,
            limit_rate
        )));
    }
    let full_eval = evaluate(total_units)?;
    if satisfied(full_eval.0) {
        lo = total_units;
        lo_eval = full_eval;
    } else {
        let mut hi = total_units; // violates
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let e = evaluate(mid)?;
            if satisfied(e.0) {
                lo = mid;
                lo_eval = e;
            } else {
                hi = mid;
            }
        }
    }
    let on = lo as f64 * unit;
    let period = total_units as f64 * unit;
    let snr = if lo_eval.1 > 0.0 {
        layout.transmittance() / lo_eval.1
    } else {
        f64::INFINITY
    };
    Ok(BurstPlan {
        on_time_s: on,
        off_time_s: period - on,
        period_s: period,
        pulses_per_burst: lo,
        duty: on / period,
        predicted_snr: snr,
        window_backscatter_probability: lo_eval.0,
        window_backscatter_rate_per_s: lo_eval.0 / window_s,
        dark_rate_per_s: detector.dark_rate_per_s,
        margin,
        window_s,
    })
}

/// Signal-to-backscatter ratio `10^(-beta/10) / (P_s * x)(t)`, dark counts
/// neglected. Returns `f64::INFINITY` where the backscatter vanishes.
pub fn snr(layout: &LoopLayout, pattern: &SignalPattern, t: f64) -> Result<f64> {
    let kernel = BackscatterKernel::new(layout, pattern.grid().dt(), pattern.period_samples())?;
    let wave = kernel.response(pattern)?;
    Ok(snr_from_backscatter(layout.total_loss_db(), &wave, t))
}

/// Same ratio for an already computed backscatter waveform and loop loss.
pub fn snr_from_backscatter(total_loss_db: f64, wave: &BackscatterWaveform, t: f64) -> f64 {
    let bs = wave.power_at_time(t);
    if bs > 0.0 {
        10f64.powf(-total_loss_db / 10.0) / bs
    } else {
        f64::INFINITY
    }
}
