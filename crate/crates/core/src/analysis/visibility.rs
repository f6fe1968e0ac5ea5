use serde::{Deserialize, Serialize};

use super::timing::BurstTiming;
use crate::detection::TimestampSeries;
use crate::error::{Error, Result};

/// Post-selection windows around pulse arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub pulse_period_s: f64,
    /// Centre of the pulse arrivals modulo the pulse period.
    pub comb_center_s: f64,
    /// Full window width.
    pub window_s: f64,
    /// `(burst period, centre of the first pulse in a burst, pulses per burst)`.
    pub burst: Option<(f64, f64, usize)>,
}

impl WindowSpec {
    /// Windows taken from a recovered burst timing.
    pub fn from_timing(timing: &BurstTiming, window_s: f64) -> Result<Self> {
        let (Some(p), Some(c)) = (timing.pulse_period_s, timing.comb_center_s) else {
            return Err(Error::param("timing", "pulse comb was not recovered"));
        };
        Ok(Self {
            pulse_period_s: p,
            comb_center_s: c,
            window_s,
            burst: Some((timing.period_s, timing.offset_s, (timing.on_time_s / p).round() as usize)),
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        let p = self.pulse_period_s;
        let x = (t - self.comb_center_s) / p;
        if ((x - x.round()) * p).abs() > 0.5 * self.window_s {
            return false;
        }
        match self.burst {
            None => true,
            Some((period, first, n)) => {
                let m = (period / p).round() as i64;
                let j = ((t - first) / p).round() as i64;
                (j.rem_euclid(m) as usize) < n
            }
        }
    }

    pub fn count(&self, series: &TimestampSeries) -> u64 {
        series.times().iter().filter(|t| self.contains(**t)).count() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub v_d0: f64,
    pub v_d1: f64,
    pub v_mean: f64,
    /// Windowed counts `(I_max, I_min)` per detector.
    pub counts_d0: (u64, u64),
    pub counts_d1: (u64, u64),
    pub window: WindowSpec,
}

fn contrast(hi: u64, lo: u64) -> f64 {
    let (h, l) = (hi as f64, lo as f64);
    if h + l == 0.0 {
        0.0
    } else {
        (h - l) / (h + l)
    }
}

/// `(N_max - N_min) / (N_max + N_min)` from windowed counts. `constructive` holds the (D0, D1) series
/// recorded with phi = 0 and `destructive` those with phi = pi; D0 takes its
/// maximum under phi = 0 and D1 under phi = pi.
pub fn windowed_visibility(
    constructive: (&TimestampSeries, &TimestampSeries),
    destructive: (&TimestampSeries, &TimestampSeries),
    window: &WindowSpec,
) -> Result<VisibilityResult> {
    let d0 = (window.count(constructive.0), window.count(destructive.0));
    let d1 = (window.count(destructive.1), window.count(constructive.1));
    if d0.0 + d0.1 + d1.0 + d1.1 == 0 {
        return Err(Error::EmptyWindows);
    }
    let v_d0 = contrast(d0.0, d0.1);
    let v_d1 = contrast(d1.0, d1.1);
    Ok(VisibilityResult {
        v_d0,
        v_d1,
        v_mean: 0.5 * (v_d0 + v_d1),
        counts_d0: d0,
        counts_d1: d1,
        window: *window,
    })
}
