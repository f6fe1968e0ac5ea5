use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::detection::InterferenceParams;
use crate::error::{Error, Result};
use crate::noise::PhaseTrace;
use crate::units::TimeSeries;

/// Inverts the D0 fringe. The two arccos branches are resolved by
/// continuity: each sample takes the candidate closest to a straight line
/// fitted through the previous `PREDICTOR_SPAN` samples and extrapolated one
/// step. That carries the trace through zero crossings at `phi = 0`, and the
/// fit keeps white detector noise from flipping branches near the fringe
/// extremes. The first sample takes the candidate of smallest magnitude.
const PREDICTOR_SPAN: usize = 8;

/// One-step least-squares line extrapolation over the tail of `x`.
fn predict(x: &[f64]) -> f64 {
    let k = x.len().min(PREDICTOR_SPAN);
    match k {
        0 => 0.0,
        1 => x[0],
        _ => {
            let tail = &x[x.len() - k..];
            let kf = k as f64;
            let tm = 0.5 * (kf - 1.0);
            let ym = tail.iter().sum::<f64>() / kf;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (t, y) in tail.iter().enumerate() {
                let d = t as f64 - tm;
                sxy += d * (y - ym);
                sxx += d * d;
            }
            ym + sxy / sxx * (kf - tm)
        }
    }
}

pub fn extract_phase(trace: &TimeSeries, params: &InterferenceParams) -> Result<PhaseTrace> {
    let span = params.i_max - params.i_min;
    if !(span > 0.0) {
        return Err(Error::ZeroFringe);
    }
    let mut out: Vec<f64> = Vec::with_capacity(trace.values.len());
    for (i, &intensity) in trace.values.iter().enumerate() {
        let y = (2.0 * (intensity - params.i_min) / span - 1.0).clamp(-1.0, 1.0);
        let a = y.acos();
        let predicted = predict(&out);
        let nearest = |c: f64| c + TAU * ((predicted - c) / TAU).round();
        let plus = nearest(a - params.phi);
        let minus = nearest(-a - params.phi);
        let value = if (plus - predicted).abs() <= (minus - predicted).abs() { plus } else { minus };
        if let Some(&prev) = out.last() {
            let jump = value - prev;
            if jump.abs() > 0.5 * PI {
                return Err(Error::PhaseJump { index: i, jump_rad: jump });
            }
        }
        out.push(value);
    }
    let mut phase = PhaseTrace {
        grid: trace.grid,
        values: out,
        target_variance: 0.0,
    };
    phase.target_variance = phase.sample_variance();
    Ok(phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Mean of the per-subset sample variances, rad^2.
    pub sigma2: f64,
    pub n_subsets: usize,
    pub subset_size: usize,
    /// Standard deviation of the per-subset variances.
    pub std_across_subsets: f64,
}

/// Splits `phase` into `floor(N/n)` consecutive subsets of `n` samples and
/// averages their (unbiased) sample variances.
pub fn subset_variance(phase: &[f64], n: usize) -> Result<VarianceEstimate> {
    if n < 2 {
        return Err(Error::param("n", format!("subset size {n} must be >= 2")));
    }
    let subsets = phase.len() / n;
    if subsets < 2 {
        return Err(Error::InsufficientData(format!(
            "{} samples give fewer than two subsets of {n}",
            phase.len()
        )));
    }
    let variances: Vec<f64> = phase
        .chunks_exact(n)
        .map(|chunk| {
            let m = chunk.iter().sum::<f64>() / n as f64;
            chunk.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
        })
        .collect();
    let mean = variances.iter().sum::<f64>() / subsets as f64;
    let var = variances.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (subsets - 1) as f64;
    Ok(VarianceEstimate {
        sigma2: mean,
        n_subsets: subsets,
        subset_size: n,
        std_across_subsets: var.sqrt(),
    })
}

/// Removes the lower bound `c - c_uncertainty` of the equipment floor,
/// clamping at zero.
pub fn subtract_floor(estimate: &VarianceEstimate, c: f64, c_uncertainty: f64) -> f64 {
    (estimate.sigma2 - (c - c_uncertainty)).max(0.0)
}

/// `V = exp(-sigma^2 / 2)`.
pub fn visibility_from_variance(sigma2: f64) -> f64 {
    (-0.5 * sigma2).exp()
}

/// `e = sigma^2 / 4`.
pub fn qber_from_variance(sigma2: f64) -> f64 {
    0.25 * sigma2
}
