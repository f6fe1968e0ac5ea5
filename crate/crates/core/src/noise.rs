//! Backscatter power waveforms (periodic LTI convolution of a pattern with
//! the directional impulse responses) and band-limited phase-noise synthesis.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{impulse_response, Direction, LoopLayout};
use crate::signal::SignalPattern;
use crate::units::TimeGrid;

/// Fraction of the launched pattern entering each direction at the 50/50 splitter.
pub const SAGNAC_SPLIT: f64 = 0.5;

/// Steady-state backscatter power over one pattern period.
#[derive(Debug, Clone, PartialEq)]
pub struct BackscatterWaveform {
    pub grid: TimeGrid,
    /// Total backscatter power, W.
    pub power: Vec<f64>,
    pub clockwise: Vec<f64>,
    pub counterclockwise: Vec<f64>,
}

impl BackscatterWaveform {
    /// Power at time `t`, extended periodically (sample containing `t`).
    pub fn power_at_time(&self, t: f64) -> f64 {
        let n = self.power.len() as i64;
        let k = ((t - self.grid.t0()) / self.grid.dt() + 1e-9).floor() as i64;
        self.power[k.rem_euclid(n) as usize]
    }

    pub fn mean_power(&self) -> f64 {
        self.power.iter().sum::<f64>() / self.power.len() as f64
    }
}

struct DirectionalKernel {
    direction: Direction,
    launch_fraction: f64,
    spectrum: Vec<Complex64>,
}

/// Pre-transformed, period-folded impulse responses for repeated convolutions
/// with patterns sharing one period and sample spacing.
pub struct BackscatterKernel {
    dt: f64,
    period_samples: usize,
    kernels: Vec<DirectionalKernel>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for BackscatterKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackscatterKernel")
            .field("dt", &self.dt)
            .field("period_samples", &self.period_samples)
            .field("directions", &self.kernels.len())
            .finish()
    }
}

impl BackscatterKernel {
    /// Both directions, each fed half of the launched pattern.
    pub fn new(layout: &LoopLayout, dt: f64, period_samples: usize) -> Result<Self> {
        Self::with_launch(
            layout,
            dt,
            period_samples,
            &[(Direction::Clockwise, SAGNAC_SPLIT), (Direction::Counterclockwise, SAGNAC_SPLIT)],
        )
    }

    /// Single direction with the whole pattern launched into it (plain OTDR).
    pub fn single(layout: &LoopLayout, direction: Direction, dt: f64, period_samples: usize) -> Result<Self> {
        Self::with_launch(layout, dt, period_samples, &[(direction, 1.0)])
    }

    fn with_launch(layout: &LoopLayout, dt: f64, period_samples: usize, launch: &[(Direction, f64)]) -> Result<Self> {
        if period_samples == 0 {
            return Err(Error::param("period_samples", "must be >= 1"));
        }
        let horizon = layout.round_trip_horizon();
        let grid = TimeGrid::new(0.0, dt, (horizon / dt).floor() as usize + 1)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(period_samples);
        let inverse = planner.plan_fft_inverse(period_samples);
        let mut kernels = Vec::with_capacity(launch.len());
        for &(direction, launch_fraction) in launch {
            let h = impulse_response(layout, direction, &grid)?;
            // every earlier period contributes through the folded tail
            let mut folded = vec![Complex64::new(0.0, 0.0); period_samples];
            for (j, v) in h.values.iter().enumerate() {
                folded[j % period_samples].re += v;
            }
            forward.process(&mut folded);
            kernels.push(DirectionalKernel {
                direction,
                launch_fraction,
                spectrum: folded,
            });
        }
        Ok(Self {
            dt,
            period_samples,
            kernels,
            forward,
            inverse,
        })
    }

    pub fn period_samples(&self) -> usize {
        self.period_samples
    }

    /// Periodic steady-state backscatter for `pattern`.
    pub fn response(&self, pattern: &SignalPattern) -> Result<BackscatterWaveform> {
        let g = pattern.grid();
        let tol = 1e-9 * self.dt;
        if (g.dt() - self.dt).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "pattern dt {:e} s differs from kernel dt {:e} s",
                g.dt(),
                self.dt
            )));
        }
        if pattern.period_samples() != self.period_samples {
            return Err(Error::GridMismatch(format!(
                "pattern period of {} samples differs from kernel period of {} samples",
                pattern.period_samples(),
                self.period_samples
            )));
        }
        let n = self.period_samples;
        let mut x: Vec<Complex64> = pattern.one_period().iter().map(|&p| Complex64::new(p, 0.0)).collect();
        self.forward.process(&mut x);
        let mut clockwise = vec![0.0; n];
        let mut counterclockwise = vec![0.0; n];
        let scale = self.dt / n as f64;
        for k in &self.kernels {
            let mut y: Vec<Complex64> = x.iter().zip(&k.spectrum).map(|(a, b)| a * b).collect();
            self.inverse.process(&mut y);
            let out = match k.direction {
                Direction::Clockwise => &mut clockwise,
                Direction::Counterclockwise => &mut counterclockwise,
            };
            for (o, v) in out.iter_mut().zip(&y) {
                // round-off can leave tiny negative values where the true result is 0
                *o += (v.re * scale * k.launch_fraction).max(0.0);
            }
        }
        let power = clockwise.iter().zip(&counterclockwise).map(|(a, b)| a + b).collect();
        Ok(BackscatterWaveform {
            grid: TimeGrid::new(g.t0(), self.dt, n)?,
            power,
            clockwise,
            counterclockwise,
        })
    }
}

/// Backscatter waveform for a Sagnac loop fed with `pattern` through a 50/50 splitter.
pub fn backscatter_response(layout: &LoopLayout, pattern: &SignalPattern) -> Result<BackscatterWaveform> {
    BackscatterKernel::new(layout, pattern.grid().dt(), pattern.period_samples())?.response(pattern)
}

/// Power-law phase-noise model `sigma^2(L) = a L^b`, plus equipment floor `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseModel {
    pub fiber_label: String,
    /// rad^2 / km^b
    pub amplitude: f64,
    pub exponent: f64,
    /// Equipment floor, rad^2.
    pub floor: f64,
    pub floor_uncertainty: f64,
    /// Upper edge of the flat phase-noise spectrum, Hz.
    pub bandwidth_hz: f64,
}

pub const DEFAULT_PHASE_BANDWIDTH_HZ: f64 = 1e6;

impl PhaseNoiseModel {
    pub fn new(fiber_label: impl Into<String>, amplitude: f64, exponent: f64, floor: f64, bandwidth_hz: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::param("amplitude", format!("{amplitude} must be >= 0")));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::param("exponent", format!("{exponent} must be > 0")));
        }
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(Error::param("floor", format!("{floor} must be >= 0")));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::param("bandwidth_hz", format!("{bandwidth_hz} must be > 0")));
        }
        Ok(Self {
            fiber_label: fiber_label.into(),
            amplitude,
            exponent,
            floor,
            floor_uncertainty: 0.0,
            bandwidth_hz,
        })
    }

    /// Ultra-low-loss fiber, calibrated to 0.06 rad^2 at 200 km with b = 2.6.
    pub fn ull() -> Self {
        Self {
            fiber_label: "SMF-28-ULL".into(),
            amplitude: 0.06 / 200f64.powf(2.6),
            exponent: 2.6,
            floor: 0.0073,
            floor_uncertainty: 0.0006,
            bandwidth_hz: DEFAULT_PHASE_BANDWIDTH_HZ,
        }
    }

    /// Standard SMF-28 with b = 3.1. No amplitude is known for this fiber, so
    /// the caller must supply one.
    pub fn smf28(amplitude: f64) -> Result<Self> {
        let mut m = Self::new("SMF-28", amplitude, 3.1, 0.0072, DEFAULT_PHASE_BANDWIDTH_HZ)?;
        m.floor_uncertainty = 0.0003;
        Ok(m)
    }

    pub fn variance(&self, length_km: f64) -> f64 {
        variance_model(length_km, self)
    }
}

/// `a L^b`.
pub fn variance_model(length_km: f64, model: &PhaseNoiseModel) -> f64 {
    if length_km <= 0.0 {
        return 0.0;
    }
    model.amplitude * length_km.powf(model.exponent)
}

/// Sampled differential phase fluctuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub target_variance: f64,
}

impl PhaseTrace {
    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            target_variance: 0.0,
        }
    }

    pub fn sample_variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let m = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
    }
}

/// Zero-mean Gaussian noise with a flat spectrum on `(0, bandwidth]` and
/// ensemble variance `variance`, synthesized in the frequency domain.
pub fn band_limited_noise(variance: f64, bandwidth_hz: f64, grid: &TimeGrid, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let nyquist = grid.nyquist();
    if bandwidth_hz > nyquist * (1.0 + 1e-12) {
        return Err(Error::BandwidthAboveNyquist {
            bandwidth_hz,
            nyquist_hz: nyquist,
        });
    }
    let span = grid.span();
    let correlation_time = 0.5 / bandwidth_hz;
    if span < 10.0 * correlation_time * (1.0 - 1e-12) {
        return Err(Error::param(
            "grid",
            format!("span {span:e} s is shorter than 10 correlation times ({correlation_time:e} s each)"),
        ));
    }
    let n = grid.len();
    // bins 1..=k_max, excluding DC and (for even n) the Nyquist bin
    let k_limit = (bandwidth_hz * span).floor() as usize;
    let k_max = k_limit.min((n - 1) / 2);
    if k_max == 0 {
        return Err(Error::param("bandwidth_hz", "no frequency bin falls inside the band"));
    }
    let per_bin = variance / k_max as f64;
    let sd = per_bin.sqrt();
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=k_max {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let z = Complex64::new(0.5 * sd * a, -0.5 * sd * b);
        spec[k] = z;
        spec[n - k] = z.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    Ok(spec.into_iter().map(|c| c.re).collect())
}

/// Phase-noise realization of `model` for a loop of `length_km` on `grid`.
pub fn synthesize_phase(model: &PhaseNoiseModel, length_km: f64, grid: &TimeGrid, seed: u64) -> Result<PhaseTrace> {
    if !(length_km.is_finite() && length_km > 0.0) {
        return Err(Error::param("length_km", format!("{length_km} must be > 0")));
    }
    let target = model.variance(length_km);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = band_limited_noise(target, model.bandwidth_hz, grid, &mut rng)?;
    Ok(PhaseTrace {
        grid: *grid,
        values,
        target_variance: target,
    })
}

/// Unbounded phase process evaluated lazily in independent blocks sampled at
/// twice the bandwidth and held between samples. Used by long photon-counting
/// runs where a full-resolution trace would not fit in memory.
#[derive(Debug, Clone)]
pub struct PhaseStream {
    variance: f64,
    bandwidth_hz: f64,
    seed: u64,
    block: Option<(u64, Vec<f64>)>,
}

const STREAM_BLOCK: usize = 4096;

impl PhaseStream {
    pub fn new(variance: f64, bandwidth_hz: f64, seed: u64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::param("variance", format!("{variance} must be >= 0")));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::param("bandwidth_hz", format!("{bandwidth_hz} must be > 0")));
        }
        Ok(Self {
            variance,
            bandwidth_hz,
            seed,
            block: None,
        })
    }

    pub fn sample_spacing(&self) -> f64 {
        0.5 / self.bandwidth_hz
    }

    /// Phase at time `t >= 0`.
    pub fn value(&mut self, t: f64) -> f64 {
        if self.variance == 0.0 {
            return 0.0;
        }
        let k = (t.max(0.0) / self.sample_spacing()).floor() as u64;
        let index = k / STREAM_BLOCK as u64;
        let stale = !matches!(&self.block, Some((i, _)) if *i == index);
        if stale {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(index);
            let grid = TimeGrid::new(0.0, self.sample_spacing(), STREAM_BLOCK).expect("valid block grid");
            let values = band_limited_noise(self.variance, self.bandwidth_hz, &grid, &mut rng).expect("block covers the band");
            self.block = Some((index, values));
        }
        let (_, values) = self.block.as_ref().expect("block filled above");
        values[(k % STREAM_BLOCK as u64) as usize]
    }
}
