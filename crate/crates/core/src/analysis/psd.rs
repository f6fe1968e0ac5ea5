use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::TimeSeries;

/// One-sided power spectral density (units^2 / Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequency: Vec<f64>,
    pub power: Vec<f64>,
    /// Frequency spacing of the returned bins.
    pub df: f64,
    /// Effective noise bandwidth actually achieved.
    pub rbw_hz: f64,
    pub segment_len: usize,
    pub n_segments: usize,
}

impl Psd {
    /// Integral of the density over the returned band.
    pub fn integrated(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df
    }
}

/// Welch estimate: Hann windows, 50 % overlap, segment length chosen so the
/// window's equivalent noise bandwidth equals `rbw_hz`. Each segment has its
/// mean removed. Returns bins with `f_lo <= f <= f_hi`.
pub fn psd(trace: &TimeSeries, rbw_hz: f64, f_lo: f64, f_hi: f64) -> Result<Psd> {
    let dt = trace.grid.dt();
    let fs = 1.0 / dt;
    if !(rbw_hz > 0.0 && rbw_hz.is_finite()) {
        return Err(Error::param("rbw_hz", format!("{rbw_hz} must be > 0")));
    }
    if !(f_lo >= 0.0 && f_hi > f_lo) {
        return Err(Error::param("f_hi", format!("band [{f_lo}, {f_hi}] is empty")));
    }
    if f_hi > 0.5 * fs * (1.0 + 1e-12) {
        return Err(Error::BandwidthAboveNyquist {
            bandwidth_hz: f_hi,
            nyquist_hz: 0.5 * fs,
        });
    }
    // Hann ENBW is 1.5 bins
    let seg = (1.5 * fs / rbw_hz).round() as usize;
    let n = trace.values.len();
    if seg < 4 || n < seg {
        return Err(Error::SpanTooShort {
            span_s: trace.grid.span(),
            rbw_hz,
        });
    }
    let hop = seg / 2;
    let n_segments = (n - seg) / hop + 1;
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / seg as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let half = seg / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    for s in 0..n_segments {
        let chunk = &trace.values[s * hop..s * hop + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (fs * w2 * n_segments as f64);
    let df = fs / seg as f64;
    let mut frequency = Vec::new();
    let mut power = Vec::new();
    for (k, a) in acc.iter().enumerate() {
        let f = k as f64 * df;
        if f < f_lo - 1e-9 * df || f > f_hi + 1e-9 * df {
            continue;
        }
        let one_sided = if k == 0 || (seg % 2 == 0 && k == half) { 1.0 } else { 2.0 };
        frequency.push(f);
        power.push(a * scale * one_sided);
    }
    Ok(Psd {
        frequency,
        power,
        df,
        rbw_hz: 1.5 * df,
        segment_len: seg,
        n_segments,
    })
}
