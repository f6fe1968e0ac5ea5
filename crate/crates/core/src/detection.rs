//! Detector observables: two-port interference fluxes, backscatter addition,
//! single-photon detection with dark counts and dead time, and classical
//! intensity traces.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{BackscatterWaveform, PhaseTrace};
use crate::signal::SignalPattern;
use crate::units::{photon_energy, TimeGrid, TimeSeries};

/// Fringe extremes and static phase of the interferometer output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceParams {
    pub i_max: f64,
    pub i_min: f64,
    /// Static phase set by the in-loop modulator, rad.
    pub phi: f64,
}

impl InterferenceParams {
    pub fn new(i_max: f64, i_min: f64, phi: f64) -> Result<Self> {
        if !(i_min.is_finite() && i_min >= 0.0) {
            return Err(Error::param("i_min", format!("{i_min} must be >= 0")));
        }
        if !(i_max.is_finite() && i_max >= i_min) {
            return Err(Error::param("i_max", format!("{i_max} must be >= i_min ({i_min})")));
        }
        if !phi.is_finite() {
            return Err(Error::param("phi", "must be finite"));
        }
        Ok(Self { i_max, i_min, phi })
    }

    /// `I_min + (I_max - I_min)(1 + cos(phi + dphi)) / 2` for D0; D1 is the complement.
    pub fn intensity(&self, dphi: f64, detector: DetectorId) -> f64 {
        let c = (self.phi + dphi).cos();
        let c = match detector {
            DetectorId::D0 => c,
            DetectorId::D1 => -c,
        };
        0.5 * (self.i_max - self.i_min) * (1.0 + c) + self.i_min
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self { phi, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    Classical,
    PhotonCounting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate_per_s: f64,
    pub dead_time_s: f64,
    pub mode: DetectorMode,
}

/// Dead time assumed for free-running InGaAs SPADs when none is given.
pub const DEFAULT_DEAD_TIME_S: f64 = 10e-6;

impl DetectorParams {
    pub fn new(efficiency: f64, dark_rate_per_s: f64, dead_time_s: f64, mode: DetectorMode) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::param("efficiency", format!("{efficiency} outside (0, 1]")));
        }
        if !(dark_rate_per_s >= 0.0) {
            return Err(Error::param("dark_rate", format!("{dark_rate_per_s} must be >= 0")));
        }
        if !(dead_time_s.is_finite() && dead_time_s >= 0.0) {
            return Err(Error::param("dead_time", format!("{dead_time_s} must be >= 0")));
        }
        Ok(Self {
            efficiency,
            dark_rate_per_s,
            dead_time_s,
            mode,
        })
    }

    /// Photon-counting detector with the dark rate quoted per pulse slot.
    pub fn per_pulse(efficiency: f64, dark_per_pulse: f64, pulse_rate_hz: f64, dead_time_s: f64) -> Result<Self> {
        if !(pulse_rate_hz.is_finite() && pulse_rate_hz > 0.0) {
            return Err(Error::param("pulse_rate_hz", format!("{pulse_rate_hz} must be > 0")));
        }
        if !(dark_per_pulse.is_finite() && dark_per_pulse >= 0.0) {
            return Err(Error::param("dark_rate", format!("{dark_per_pulse} must be >= 0")));
        }
        Self::new(efficiency, dark_per_pulse * pulse_rate_hz, dead_time_s, DetectorMode::PhotonCounting)
    }

    pub fn dark_per_pulse(&self, pulse_rate_hz: f64) -> f64 {
        self.dark_rate_per_s / pulse_rate_hz
    }
}

impl Default for DetectorParams {
    /// 10 % efficiency, 7e-7 dark counts per 100 ns slot, 10 us dead time.
    fn default() -> Self {
        Self {
            efficiency: 0.1,
            dark_rate_per_s: 7.0,
            dead_time_s: DEFAULT_DEAD_TIME_S,
            mode: DetectorMode::PhotonCounting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorId {
    D0,
    D1,
}

impl DetectorId {
    pub const BOTH: [DetectorId; 2] = [DetectorId::D0, DetectorId::D1];

    pub fn index(self) -> usize {
        match self {
            DetectorId::D0 => 0,
            DetectorId::D1 => 1,
        }
    }
}

impl std::fmt::Display for DetectorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorId::D0 => "D0",
            DetectorId::D1 => "D1",
        })
    }
}

impl std::str::FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "D0" | "0" => Ok(DetectorId::D0),
            "D1" | "1" => Ok(DetectorId::D1),
            other => Err(Error::param("detector", format!("unknown detector id `{other}`"))),
        }
    }
}

/// Detection times from one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampSeries {
    times: Vec<f64>,
    pub detector: DetectorId,
    pub span_s: f64,
    pub dead_time_s: f64,
}

impl TimestampSeries {
    pub fn new(times: Vec<f64>, detector: DetectorId, span_s: f64, dead_time_s: f64) -> Result<Self> {
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::param("times", format!("not strictly increasing at index {}", i + 1)));
            }
            if w[1] - w[0] < dead_time_s * (1.0 - 1e-9) {
                return Err(Error::param("times", format!("gap below the dead time at index {}", i + 1)));
            }
        }
        Ok(Self {
            times,
            detector,
            span_s,
            dead_time_s,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Events shifted by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t + dt).collect(),
            ..self.clone()
        }
    }

    /// Two-column text: `time_seconds detector`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.times.len() * 24);
        for t in &self.times {
            let _ = writeln!(s, "{t:e} {}", self.detector);
        }
        s
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

/// Parses two-column timestamp text into one series per detector. Lines
/// starting with `#` are ignored.
pub fn read_timestamps<R: BufRead>(reader: R, span_s: f64, dead_time_s: f64) -> Result<[TimestampSeries; 2]> {
    let mut times: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(|c: char| c.is_whitespace() || c == ',').filter(|c| !c.is_empty());
        let (Some(t), Some(d)) = (cols.next(), cols.next()) else {
            return Err(Error::param("timestamps", format!("line {} needs two columns", lineno + 1)));
        };
        let t: f64 = t
            .parse()
            .map_err(|_| Error::param("timestamps", format!("line {}: bad time `{t}`", lineno + 1)))?;
        let d: DetectorId = d.parse()?;
        times[d.index()].push(t);
    }
    let [t0, t1] = times;
    Ok([
        TimestampSeries::new(t0, DetectorId::D0, span_s, dead_time_s)?,
        TimestampSeries::new(t1, DetectorId::D1, span_s, dead_time_s)?,
    ])
}

/// Optical power (W) or detection probability per sample at both output ports.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluxes {
    pub grid: TimeGrid,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
}

impl Fluxes {
    pub fn port(&self, id: DetectorId) -> &[f64] {
        match id {
            DetectorId::D0 => &self.d0,
            DetectorId::D1 => &self.d1,
        }
    }
}

/// Applies the fringe law sample by sample. The signal envelope is normalized to its
/// peak, so at a pulse maximum D0 reads `I_max` for constructive interference.
pub fn interference_flux(signal: &SignalPattern, phase: &PhaseTrace, params: &InterferenceParams) -> Result<Fluxes> {
    let grid = *signal.grid();
    if !grid.same_sampling(&phase.grid) || phase.values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "signal has {} samples, phase trace {}",
            grid.len(),
            phase.values.len()
        )));
    }
    let peak = signal.power().iter().cloned().fold(0.0, f64::max);
    let norm = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let mut d0 = Vec::with_capacity(grid.len());
    let mut d1 = Vec::with_capacity(grid.len());
    for (p, dphi) in signal.power().iter().zip(&phase.values) {
        let env = p * norm;
        d0.push(env * params.intensity(*dphi, DetectorId::D0));
        d1.push(env * params.intensity(*dphi, DetectorId::D1));
    }
    Ok(Fluxes { grid, d0, d1 })
}

/// Adds half of the backscatter power to each port. The waveform covers one
/// period and is repeated over the flux grid.
pub fn add_backscatter(fluxes: &Fluxes, backscatter: &BackscatterWaveform) -> Result<Fluxes> {
    let p = backscatter.power.len();
    if !fluxes.grid.same_sampling(&backscatter.grid) || fluxes.grid.len() % p != 0 {
        return Err(Error::GridMismatch(format!(
            "backscatter period of {p} samples does not tile a flux grid of {} samples",
            fluxes.grid.len()
        )));
    }
    let add = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(k, x)| x + 0.5 * backscatter.power[k % p]).collect() };
    Ok(Fluxes {
        grid: fluxes.grid,
        d0: add(&fluxes.d0),
        d1: add(&fluxes.d1),
    })
}

/// Expected detections per sample for optical power `watts`.
pub fn watts_to_probability(watts: f64, dt: f64, efficiency: f64, wavelength_nm: f64) -> f64 {
    watts * dt * efficiency / photon_energy(wavelength_nm)
}

/// Periodic expected-detection profile of one detector: `probability[k]` is
/// the mean number of photon detections in sample `k` of each period,
/// efficiency already applied, dark counts excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonFlux {
    pub dt: f64,
    pub probability: Vec<f64>,
}

impl PhotonFlux {
    pub fn new(dt: f64, probability: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("{dt} must be > 0")));
        }
        if probability.is_empty() {
            return Err(Error::param("probability", "needs at least one sample"));
        }
        if probability.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("probability", "samples must be finite and >= 0"));
        }
        Ok(Self { dt, probability })
    }

    pub fn period(&self) -> f64 {
        self.probability.len() as f64 * self.dt
    }

    /// Expected detections per period.
    pub fn per_period(&self) -> f64 {
        self.probability.iter().sum()
    }
}

/// Decides whether a candidate photon at `(time, sample index within period)`
/// survives; returns an acceptance probability in [0, 1].
pub type Thinning<'a> = dyn FnMut(f64, usize) -> f64 + 'a;

/// Inhomogeneous Poisson detections for a periodic flux, plus dark counts,
/// followed by a non-paralyzable dead-time filter. Deterministic in `seed`.
pub fn spad_detect(flux: &PhotonFlux, detector: &DetectorParams, id: DetectorId, span_s: f64, seed: u64) -> Result<TimestampSeries> {
    spad_detect_thinned(flux, detector, id, span_s, seed, &mut |_, _| 1.0)
}

/// As [`spad_detect`], but each signal photon is kept with probability
/// `accept(t, k)`; `flux` must then be an upper bound of the true flux.
pub fn spad_detect_thinned(
    flux: &PhotonFlux,
    detector: &DetectorParams,
    id: DetectorId,
    span_s: f64,
    seed: u64,
    accept: &mut Thinning<'_>,
) -> Result<TimestampSeries> {
    if detector.mode != DetectorMode::PhotonCounting {
        return Err(Error::param("mode", "spad_detect needs a photon-counting detector"));
    }
    if !(span_s.is_finite() && span_s > 0.0) {
        return Err(Error::param("span_s", format!("{span_s} must be > 0")));
    }
    let max_p = flux.probability.iter().cloned().fold(0.0, f64::max) + detector.dark_rate_per_s * flux.dt;
    if max_p > 0.1 {
        return Err(Error::GridTooCoarse { max_probability: max_p });
    }
    let stream = |purpose: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(4 * purpose + id.index() as u64);
        rng
    };
    let mut events = photon_events(flux, span_s, &mut stream(0), &mut stream(1), accept);
    let mut dark = stream(2);
    if detector.dark_rate_per_s > 0.0 {
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(&mut dark);
            t += e / detector.dark_rate_per_s;
            if t >= span_s {
                break;
            }
            events.push(t);
        }
    }
    events.sort_by(f64::total_cmp);
    events.dedup();
    let times = apply_dead_time(&events, detector.dead_time_s);
    TimestampSeries::new(times, id, span_s, detector.dead_time_s)
}

/// Event times by time rescaling: unit-rate exponential gaps mapped through
/// the inverse cumulative intensity.
fn photon_events(flux: &PhotonFlux, span_s: f64, arrivals: &mut ChaCha8Rng, thinning: &mut ChaCha8Rng, accept: &mut Thinning<'_>) -> Vec<f64> {
    let n = flux.probability.len();
    let mut cumulative = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for p in &flux.probability {
        acc += p;
        cumulative.push(acc);
    }
    let per_period = acc;
    let mut out = Vec::new();
    if per_period <= 0.0 {
        return out;
    }
    let period = flux.period();
    let mut u = 0.0f64; // cumulative intensity within the current period
    let mut period_index = 0u64;
    loop {
        let e: f64 = Exp1.sample(arrivals);
        u += e;
        if u >= per_period {
            let whole = (u / per_period).floor();
            period_index += whole as u64;
            u -= whole * per_period;
        }
        // first sample whose cumulative end exceeds u
        let k = cumulative.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
        let p = flux.probability[k];
        let frac = if p > 0.0 { ((u - cumulative[k]) / p).clamp(0.0, 1.0) } else { 0.5 };
        let t = period_index as f64 * period + (k as f64 + frac) * flux.dt;
        if t >= span_s {
            break;
        }
        let keep = accept(t, k);
        if keep >= 1.0 || thinning.random::<f64>() < keep {
            out.push(t);
        }
    }
    out
}

/// Non-paralyzable dead time: events within `dead_time` of the last accepted
/// event are dropped.
pub fn apply_dead_time(sorted: &[f64], dead_time: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut last = f64::NEG_INFINITY;
    for &t in sorted {
        if t - last >= dead_time || out.is_empty() {
            out.push(t);
            last = t;
        }
    }
    out
}

/// Standard deviation of additive noise on the normalized fringe
/// `y = 2(I - I_min)/(I_max - I_min) - 1` that makes the principal-branch
/// phase estimate `acos(clamp(cos(phi) + n)) - phi` have variance `floor_c`.
pub fn fringe_noise_for_floor(floor_c: f64, phi: f64) -> f64 {
    if floor_c <= 0.0 {
        return 0.0;
    }
    let variance_at = |s: f64| -> f64 {
        // trapezoidal quadrature against the normal density on +-8 s
        let steps = 4000;
        let h = 16.0 * s / steps as f64;
        let (mut m1, mut m2, mut w) = (0.0, 0.0, 0.0);
        let y0 = phi.cos();
        for i in 0..=steps {
            let n = -8.0 * s + i as f64 * h;
            let weight = (-0.5 * (n / s).powi(2)).exp() * if i == 0 || i == steps { 0.5 } else { 1.0 };
            let g = (y0 + n).clamp(-1.0, 1.0).acos();
            m1 += weight * g;
            m2 += weight * g * g;
            w += weight;
        }
        let (m1, m2) = (m1 / w, m2 / w);
        m2 - m1 * m1
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while variance_at(hi) < floor_c && hi < 1e3 {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if variance_at(mid) < floor_c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Intensity trace with additive Gaussian noise calibrated so that phase
/// extraction on a noise-free phase input yields variance `floor_c`.
pub fn classical_trace(flux: &TimeSeries, params: &InterferenceParams, floor_c: f64, seed: u64) -> Result<TimeSeries> {
    if !(floor_c.is_finite() && floor_c >= 0.0) {
        return Err(Error::param("floor_c", format!("{floor_c} must be >= 0")));
    }
    if floor_c == 0.0 {
        return Ok(flux.clone());
    }
    let half_span = 0.5 * (params.i_max - params.i_min);
    if half_span <= 0.0 {
        return Err(Error::ZeroFringe);
    }
    let sigma = fringe_noise_for_floor(floor_c, params.phi) * half_span;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = flux
        .values
        .iter()
        .map(|v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v + sigma * n
        })
        .collect();
    TimeSeries::new(flux.grid, values)
}

/// Event counts folded modulo a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub period_s: f64,
    pub bin_s: f64,
    /// Time subtracted from every event before folding.
    pub offset_s: f64,
    pub counts: Vec<u64>,
    /// Number of periods folded together.
    pub n_periods: u64,
}

impl Histogram {
    pub fn bin_start(&self, i: usize) -> f64 {
        i as f64 * self.bin_s
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_start,count` rows with a header.
    pub fn to_csv_rows(&self) -> String {
        let mut s = String::from("bin_start_s,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{:.12e},{c}", self.bin_start(i));
        }
        s
    }
}

pub fn fold_histogram(series: &TimestampSeries, period_s: f64, bin_s: f64) -> Result<Histogram> {
    fold_histogram_with_offset(series, period_s, bin_s, 0.0)
}

pub fn fold_histogram_with_offset(series: &TimestampSeries, period_s: f64, bin_s: f64, offset_s: f64) -> Result<Histogram> {
    if !(bin_s > 0.0 && period_s > bin_s) {
        return Err(Error::param("bin_s", format!("need period ({period_s:e}) > bin ({bin_s:e}) > 0")));
    }
    let bins = (period_s / bin_s - 1e-9).ceil() as usize;
    let mut counts = vec![0u64; bins];
    for &t in series.times() {
        let phase = (t - offset_s).rem_euclid(period_s);
        let i = ((phase / bin_s) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        period_s,
        bin_s,
        offset_s,
        counts,
        n_periods: (series.span_s / period_s).round().max(1.0) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::make_pulse_train;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params(phi: f64) -> InterferenceParams {
        InterferenceParams::new(3.5e-3, 7e-7, phi).unwrap()
    }

    #[test]
    fn eq1_extremes() {
        let p = params(0.0);
        assert_relative_eq!(p.intensity(0.0, DetectorId::D0), 3.5e-3, max_relative = 1e-15);
        assert_relative_eq!(p.intensity(0.0, DetectorId::D1), 7e-7, max_relative = 1e-9);
        let q = params(PI);
        assert_relative_eq!(q.intensity(0.0, DetectorId::D0), 7e-7, max_relative = 1e-9);
        assert_relative_eq!(q.intensity(0.0, DetectorId::D1), 3.5e-3, max_relative = 1e-15);
        assert!(InterferenceParams::new(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn small_phase_dip_is_second_order() {
        let p = InterferenceParams::new(1.0, 0.0, 0.0).unwrap();
        for d in [1e-3, 1e-2] {
            let dip = p.intensity(0.0, DetectorId::D0) - p.intensity(d, DetectorId::D0);
            assert_relative_eq!(dip, d * d / 4.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn ports_are_complementary() {
        let g = TimeGrid::new(0.0, 1e-9, 400).unwrap();
        let s = make_pulse_train(10e6, 5e-9, 2.0, &g).unwrap();
        let phase = PhaseTrace {
            grid: g,
            values: (0..400).map(|k| (k as f64 * 0.37).sin()).collect(),
            target_variance: 0.5,
        };
        let p = params(0.3);
        let f = interference_flux(&s, &phase, &p).unwrap();
        for k in 0..400 {
            let env = s.power()[k] / 2.0;
            let total = env * (p.i_max + p.i_min);
            assert!((f.d0[k] + f.d1[k] - total).abs() <= 1e-12 * total.max(1e-300));
        }
        let wrong = PhaseTrace::zeros(TimeGrid::new(0.0, 1e-9, 200).unwrap());
        assert!(interference_flux(&s, &wrong, &p).is_err());
    }

    #[test]
    fn backscatter_splits_evenly() {
        let g = TimeGrid::new(0.0, 1e-9, 20).unwrap();
        let f = Fluxes {
            grid: g,
            d0: vec![0.0; 20],
            d1: vec![0.0; 20],
        };
        let bs = BackscatterWaveform {
            grid: g.with_len(10).unwrap(),
            power: (0..10).map(|k| k as f64).collect(),
            clockwise: vec![0.0; 10],
            counterclockwise: vec![0.0; 10],
        };
        let out = add_backscatter(&f, &bs).unwrap();
        assert_eq!(out.d0, out.d1);
        assert_eq!(out.d0[13], 1.5);
        let zero = BackscatterWaveform {
            power: vec![0.0; 10],
            ..bs.clone()
        };
        let f2 = Fluxes {
            d0: vec![1.0; 20],
            ..f.clone()
        };
        assert_eq!(add_backscatter(&f2, &zero).unwrap(), f2);
        let bad = BackscatterWaveform {
            grid: g.with_len(7).unwrap(),
            power: vec![0.0; 7],
            clockwise: vec![0.0; 7],
            counterclockwise: vec![0.0; 7],
        };
        assert!(add_backscatter(&f, &bad).is_err());
    }

    #[test]
    fn dark_counts_only() {
        // 3e8 pulse slots of 100 ns at 7e-7 per slot: 210 +- 14.5
        let det = DetectorParams::per_pulse(0.1, 7e-7, 10e6, 0.0).unwrap();
        let flux = PhotonFlux::new(100e-9, vec![0.0]).unwrap();
        let mut total = 0usize;
        let seeds = 40;
        for seed in 0..seeds {
            let s = spad_detect(&flux, &det, DetectorId::D0, 30.0, seed).unwrap();
            total += s.len();
        }
        let mean = total as f64 / seeds as f64;
        assert!((mean - 210.0).abs() < 3.0 * 14.5 / (seeds as f64).sqrt(), "{mean}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let det = DetectorParams::per_pulse(0.1, 0.0, 10e6, 0.0).unwrap();
        let flux = PhotonFlux::new(1e-9, vec![0.2, 0.0]).unwrap();
        assert!(matches!(
            spad_detect(&flux, &det, DetectorId::D0, 1e-6, 1),
            Err(Error::GridTooCoarse { .. })
        ));
        let classical = DetectorParams {
            mode: DetectorMode::Classical,
            ..det
        };
        let ok = PhotonFlux::new(1e-9, vec![0.01]).unwrap();
        assert!(spad_detect(&ok, &classical, DetectorId::D0, 1e-6, 1).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let det = DetectorParams::per_pulse(0.1, 1e-4, 10e6, 1e-6).unwrap();
        let flux = PhotonFlux::new(1e-9, (0..100).map(|k| if k < 2 { 0.01 } else { 0.0 }).collect()).unwrap();
        let a = spad_detect(&flux, &det, DetectorId::D0, 1e-2, 5).unwrap();
        let b = spad_detect(&flux, &det, DetectorId::D0, 1e-2, 5).unwrap();
        let c = spad_detect(&flux, &det, DetectorId::D1, 1e-2, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times(), c.times());
    }

    #[test]
    fn window_counts_match_flux() {
        // pulses occupy samples 10..12 of a 100-sample period
        let mut prob = vec![0.0; 100];
        prob[10] = 0.02;
        prob[11] = 0.01;
        let flux = PhotonFlux::new(1e-9, prob).unwrap();
        let det = DetectorParams::new(0.1, 0.0, 0.0, DetectorMode::PhotonCounting).unwrap();
        let span = 1e-3; // 1e4 periods -> 300 expected
        let mut counts = Vec::new();
        for seed in 0..60 {
            let s = spad_detect(&flux, &det, DetectorId::D0, span, seed).unwrap();
            let h = fold_histogram(&s, 100e-9, 1e-9).unwrap();
            assert_eq!(h.total() as usize, s.len());
            assert_eq!(h.counts[10] + h.counts[11], h.total());
            counts.push(s.len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        assert!((mean - 300.0).abs() < 3.0 * (300.0f64 / 60.0).sqrt(), "{mean}");
    }

    #[test]
    fn thinning_halves_counts() {
        let flux = PhotonFlux::new(1e-9, vec![0.01; 10]).unwrap();
        let det = DetectorParams::new(0.1, 0.0, 0.0, DetectorMode::PhotonCounting).unwrap();
        let full = spad_detect(&flux, &det, DetectorId::D0, 1e-3, 2).unwrap().len() as f64;
        let half = spad_detect_thinned(&flux, &det, DetectorId::D0, 1e-3, 2, &mut |_, _| 0.5).unwrap().len() as f64;
        assert!((half / full - 0.5).abs() < 0.05, "{half} {full}");
    }

    #[test]
    fn fold_examples() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 1e-6 + 0.25e-6).collect();
        let s = TimestampSeries::new(times, DetectorId::D0, 50e-6, 0.0).unwrap();
        let h = fold_histogram(&s, 1e-6, 0.1e-6).unwrap();
        assert_eq!(h.counts.len(), 10);
        assert_eq!(h.counts[2], 50);
        assert_eq!(h.total(), 50);
        assert!(fold_histogram(&s, 1e-6, 2e-6).is_err());
    }

    #[test]
    fn timestamp_text_round_trip() {
        let a = TimestampSeries::new(vec![1e-6, 2.5e-3], DetectorId::D0, 1.0, 0.0).unwrap();
        let b = TimestampSeries::new(vec![3e-6], DetectorId::D1, 1.0, 0.0).unwrap();
        let text = format!("# comment\n{}{}", a.to_text(), b.to_text());
        let [ra, rb] = read_timestamps(text.as_bytes(), 1.0, 0.0).unwrap();
        assert_eq!(ra, a);
        assert_eq!(rb, b);
        assert!(read_timestamps("1.0\n".as_bytes(), 1.0, 0.0).is_err());
        assert!(TimestampSeries::new(vec![2.0, 1.0], DetectorId::D0, 3.0, 0.0).is_err());
    }

    #[test]
    fn fringe_noise_calibration_monotone() {
        let a = fringe_noise_for_floor(0.0072, PI / 2.0);
        let b = fringe_noise_for_floor(0.0144, PI / 2.0);
        assert!(b > a);
        // near quadrature the map is almost linear: sd ~ sqrt(c)
        assert!((a - 0.0072f64.sqrt()).abs() < 0.01 * a, "{a}");
        assert_eq!(fringe_noise_for_floor(0.0, 0.0), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dead_time_gaps_respected(seed in 0u64..1000, dead in 1e-8f64..1e-6) {
            let flux = PhotonFlux::new(1e-9, vec![0.05, 0.01, 0.0, 0.03]).unwrap();
            let det = DetectorParams::new(0.1, 1e5, dead, DetectorMode::PhotonCounting).unwrap();
            let s = spad_detect(&flux, &det, DetectorId::D1, 2e-4, seed).unwrap();
            for w in s.times().windows(2) {
                prop_assert!(w[1] - w[0] >= dead);
            }
        }
    }
}
