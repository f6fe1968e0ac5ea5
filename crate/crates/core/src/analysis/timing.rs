use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::TimestampSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingOptions {
    /// Relative half-width of the period search around the nominal value.
    pub period_search: f64,
    /// Nominal pulse period. When given, the pulse comb inside the bursts is
    /// located as well and the burst edges snap to whole pulses.
    pub pulse_period_s: Option<f64>,
    /// Events farther than this from the nearest comb tooth are ignored
    /// when locating burst edges.
    pub comb_tolerance_s: f64,
    /// Minimum `|sum|^2 / N` accepted as a periodicity peak.
    pub min_significance: f64,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            period_search: 0.01,
            pulse_period_s: None,
            comb_tolerance_s: 1.5e-9,
            min_significance: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstTiming {
    pub period_s: f64,
    /// Arrival time of the first pulse of a burst, modulo the period.
    pub offset_s: f64,
    /// Recovered burst length (whole pulses when a comb is used).
    pub on_time_s: f64,
    pub pulse_period_s: Option<f64>,
    /// Centre of the pulse arrivals modulo the pulse period.
    pub comb_center_s: Option<f64>,
    /// `|sum|^2 / N` at the burst fundamental.
    pub significance: f64,
}

fn phasor(times: &[f64], f: f64) -> (f64, f64) {
    times.iter().fold((0.0, 0.0), |(re, im), &t| {
        let phase = TAU * (f * t).fract();
        let (s, c) = phase.sin_cos();
        (re + c, im + s)
    })
}

fn power(times: &[f64], f: f64) -> f64 {
    let (re, im) = phasor(times, f);
    re * re + im * im
}

fn subsample(times: &[f64], max: usize) -> Vec<f64> {
    let stride = times.len().div_ceil(max).max(1);
    times.iter().step_by(stride).copied().collect()
}

/// `|sum exp(2 pi i (lo + k step) t)|^2` for `k = 0..=steps`, using a per-event
/// phase rotation instead of a sin/cos per grid point.
fn scan_power(times: &[f64], lo: f64, step: f64, steps: usize) -> Vec<f64> {
    const CHUNK: usize = 2048;
    let partial = times
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut z: Vec<(f64, f64)> = chunk.iter().map(|&t| unit(TAU * (lo * t).fract())).collect();
            let w: Vec<(f64, f64)> = chunk.iter().map(|&t| unit(TAU * (step * t).fract())).collect();
            let mut acc = vec![(0.0, 0.0); steps + 1];
            for slot in acc.iter_mut() {
                let (mut re, mut im) = (0.0, 0.0);
                for (zi, wi) in z.iter_mut().zip(&w) {
                    re += zi.0;
                    im += zi.1;
                    *zi = (zi.0 * wi.0 - zi.1 * wi.1, zi.0 * wi.1 + zi.1 * wi.0);
                }
                *slot = (re, im);
            }
            acc
        })
        .collect::<Vec<_>>();
    // summed in chunk order so the result does not depend on scheduling
    let mut total = vec![(0.0, 0.0); steps + 1];
    for part in partial {
        for (x, y) in total.iter_mut().zip(part) {
            x.0 += y.0;
            x.1 += y.1;
        }
    }
    total.into_iter().map(|(re, im)| re * re + im * im).collect()
}

fn unit(phase: f64) -> (f64, f64) {
    let (s, c) = phase.sin_cos();
    (c, s)
}

/// Frequency maximizing `|sum exp(2 pi i f t)|` on `[lo, hi]`: grid scan on
/// a subsample, then golden-section refinement on all events.
fn peak_frequency(times: &[f64], lo: f64, hi: f64, span: f64) -> f64 {
    let scan = subsample(times, 20_000);
    let df = 0.2 / span;
    let steps = (((hi - lo) / df).ceil() as usize).clamp(8, 400_000);
    let step = (hi - lo) / steps as f64;
    let powers = scan_power(&scan, lo, step, steps);
    let best = powers
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &p)| if p > a.1 { (i, p) } else { a })
        .0;
    let centre = lo + best as f64 * step;
    let (mut a, mut b) = (centre - step, centre + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = power(times, x1);
    let mut f2 = power(times, x2);
    for _ in 0..200 {
        if (b - a) <= 1e-15 * centre.abs() {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = power(times, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = power(times, x1);
        }
    }
    0.5 * (a + b)
}

/// Best circular segment for a two-level Poisson profile. Returns
/// `(start, length)` in bins.
fn burst_segment(counts: &[f64]) -> (usize, usize) {
    let n = counts.len();
    let total: f64 = counts.iter().sum();
    let kadane = |threshold: f64| -> (usize, usize) {
        // maximum circular subarray of counts - threshold by doubling the array
        let mut best = (f64::NEG_INFINITY, 0, 1);
        let mut cur = 0.0;
        let mut start = 0;
        for i in 0..2 * n {
            if i - start >= n {
                // keep segments shorter than the full circle
                cur -= counts[start % n] - threshold;
                start += 1;
            }
            if cur <= 0.0 {
                cur = 0.0;
                start = i;
            }
            cur += counts[i % n] - threshold;
            if cur > best.0 {
                best = (cur, start, i + 1 - start);
            }
        }
        (best.1 % n, best.2)
    };
    let (s0, l0) = kadane(total / n as f64);
    let inside: f64 = (0..l0).map(|j| counts[(s0 + j) % n]).sum();
    let on = inside / l0 as f64;
    let off = if l0 < n { ((total - inside) / (n - l0) as f64).max(1e-3 * on) } else { 1e-3 * on };
    if !(on > off) {
        return (s0, l0);
    }
    kadane((on - off) / (on / off).ln())
}

/// Recovers the burst period and phase from one detector's events.
pub fn recover_burst_timing(series: &TimestampSeries, nominal_period_s: f64, options: &TimingOptions) -> Result<BurstTiming> {
    let times = series.times();
    if times.len() < 100 {
        return Err(Error::InsufficientData(format!("{} events, need at least 100", times.len())));
    }
    if !(nominal_period_s > 0.0) {
        return Err(Error::param("nominal_period_s", "must be > 0"));
    }
    let span = (times[times.len() - 1] - times[0]).max(nominal_period_s);
    let f_lo = 1.0 / (nominal_period_s * (1.0 + options.period_search));
    let f_hi = 1.0 / (nominal_period_s * (1.0 - options.period_search));
    let f1 = peak_frequency(times, f_lo, f_hi, span);
    let n = times.len() as f64;
    let (re, im) = phasor(times, f1);
    let significance = (re * re + im * im) / n;
    if significance < options.min_significance {
        return Err(Error::NoPeak {
            peak: significance,
            threshold: options.min_significance,
        });
    }
    let rho = (significance / n).sqrt();
    let sigma_f1 = 12f64.sqrt() / (TAU * span * n.sqrt() * rho);

    if let Some(p_nom) = options.pulse_period_s {
        let m = (1.0 / (f1 * p_nom)).round().max(1.0);
        // neighbouring harmonics of the burst rate are nearly as strong as the
        // comb itself, so the search must stay between them. When f1 is too
        // loose to name the harmonic, the nominal pulse clock names it.
        let spread = 8.0 * m * sigma_f1;
        let centre = if spread > 0.4 * f1 { 1.0 / p_nom } else { m * f1 };
        let half = spread.max(2.0 / span).min(0.4 * f1);
        let fc = peak_frequency(times, centre - half, centre + half, span);
        let (cre, cim) = phasor(times, fc);
        let comb_sig = (cre * cre + cim * cim) / n;
        if comb_sig >= options.min_significance {
            let p = 1.0 / fc;
            let period = m * p;
            let comb_center = (cim.atan2(cre) / TAU).rem_euclid(1.0) * p;
            let slots = m as usize;
            let mut counts = vec![0.0; slots];
            for &t in times {
                let x = (t - comb_center) / p;
                let j = x.round();
                if ((x - j) * p).abs() <= options.comb_tolerance_s {
                    counts[(j as i64).rem_euclid(slots as i64) as usize] += 1.0;
                }
            }
            let (start, len) = burst_segment(&counts);
            return Ok(BurstTiming {
                period_s: period,
                offset_s: (comb_center + start as f64 * p).rem_euclid(period),
                on_time_s: len as f64 * p,
                pulse_period_s: Some(p),
                comb_center_s: Some(comb_center),
                significance,
            });
        }
    }

    let period = 1.0 / f1;
    let bins = ((n / 4.0) as usize).clamp(16, 4096);
    let width = period / bins as f64;
    let mut counts = vec![0.0; bins];
    for &t in times {
        let ph = t.rem_euclid(period);
        counts[((ph / width) as usize).min(bins - 1)] += 1.0;
    }
    let (start, len) = burst_segment(&counts);
    let seg_start = start as f64 * width;
    let seg_len = len as f64 * width;
    let earliest = times
        .iter()
        .map(|t| (t - seg_start).rem_euclid(period))
        .filter(|d| *d < seg_len)
        .fold(f64::INFINITY, f64::min);
    let mut offset = (seg_start + earliest).rem_euclid(period);
    if period - offset < 1e-9 * period {
        offset = 0.0;
    }
    Ok(BurstTiming {
        period_s: period,
        offset_s: offset,
        on_time_s: seg_len,
        pulse_period_s: None,
        comb_center_s: None,
        significance,
    })
}

/// Centre of pulse arrivals modulo a known pulse period.
pub fn recover_pulse_comb(series: &TimestampSeries, pulse_period_s: f64) -> Result<f64> {
    let times = series.times();
    if times.is_empty() {
        return Err(Error::EmptyWindows);
    }
    let (re, im) = phasor(times, 1.0 / pulse_period_s);
    let sig = (re * re + im * im) / times.len() as f64;
    if sig < 10.0 {
        return Err(Error::NoPeak { peak: sig, threshold: 10.0 });
    }
    Ok((im.atan2(re) / TAU).rem_euclid(1.0) * pulse_period_s)
}
