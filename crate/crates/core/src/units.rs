//! Shared physical quantities and unit conversions.
//!
//! Internally everything is seconds, watts, kilometres and natural (1/km)
//! attenuation. Decibel quantities are converted at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

/// Default fiber group index.
pub const DEFAULT_GROUP_INDEX: f64 = 1.468;

/// Laser wavelength used for photon-number conversions, nm.
pub const DEFAULT_WAVELENGTH_NM: f64 = 1545.3;

const PLANCK_J_S: f64 = 6.626_070_15e-34;
const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> Result<f64> {
    if !db.is_finite() {
        return Err(Error::param("db", format!("{db} is not finite")));
    }
    Ok(10f64.powf(db / 10.0))
}

pub fn linear_to_db(ratio: f64) -> Result<f64> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::param("ratio", format!("{ratio} must be finite and > 0")));
    }
    Ok(10.0 * ratio.log10())
}

pub fn dbm_to_watts(dbm: f64) -> Result<f64> {
    Ok(db_to_linear(dbm)? * 1e-3)
}

pub fn watts_to_dbm(watts: f64) -> Result<f64> {
    linear_to_db(watts * 1e3)
}

/// Converts an attenuation in dB/km to the natural coefficient in 1/km.
pub fn attenuation_natural(alpha_db_per_km: f64) -> Result<f64> {
    if !(alpha_db_per_km.is_finite() && alpha_db_per_km >= 0.0) {
        return Err(Error::param(
            "alpha_db_per_km",
            format!("{alpha_db_per_km} must be finite and >= 0"),
        ));
    }
    Ok(alpha_db_per_km * std::f64::consts::LN_10 / 10.0)
}

/// Group velocity in km/s for a group index in (1, 2).
pub fn group_velocity(group_index: f64) -> Result<f64> {
    if !(group_index > 1.0 && group_index < 2.0) {
        return Err(Error::param(
            "group_index",
            format!("{group_index} outside the open interval (1, 2)"),
        ));
    }
    Ok(SPEED_OF_LIGHT_KM_S / group_index)
}

/// Energy of one photon at the given wavelength, J.
pub fn photon_energy(wavelength_nm: f64) -> f64 {
    PLANCK_J_S * SPEED_OF_LIGHT_M_S / (wavelength_nm * 1e-9)
}

/// Uniform sampling grid `t_k = t0 + k dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("{dt} must be finite and > 0")));
        }
        if n == 0 {
            return Err(Error::param("n", "grid needs at least one sample"));
        }
        if !t0.is_finite() {
            return Err(Error::param("t0", "must be finite"));
        }
        Ok(Self { t0, dt, n })
    }

    /// Grid starting at zero with enough samples to cover `span` seconds.
    pub fn covering(dt: f64, span: f64) -> Result<Self> {
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::param("span", format!("{span} must be finite and > 0")));
        }
        let n = (span / dt).ceil() as usize;
        Self::new(0.0, dt, n.max(1))
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Total span `n dt`.
    pub fn span(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.time(k))
    }

    pub fn with_len(&self, n: usize) -> Result<Self> {
        Self::new(self.t0, self.dt, n)
    }

    /// True if both grids share `t0` and `dt` (lengths may differ).
    pub fn same_sampling(&self, other: &TimeGrid) -> bool {
        let tol = 1e-12 * self.dt.abs().max(other.dt.abs());
        (self.dt - other.dt).abs() <= tol && (self.t0 - other.t0).abs() <= tol.max(1e-18)
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }
}

/// Real-valued samples on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance of the samples.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}

/// Non-negative optical power in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OpticalPower(f64);

impl OpticalPower {
    pub fn from_watts(watts: f64) -> Result<Self> {
        if !(watts.is_finite() && watts >= 0.0) {
            return Err(Error::param("power", format!("{watts} W must be finite and >= 0")));
        }
        Ok(Self(watts))
    }

    pub fn from_dbm(dbm: f64) -> Result<Self> {
        Self::from_watts(dbm_to_watts(dbm)?)
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn dbm(self) -> Result<f64> {
        watts_to_dbm(self.0)
    }
}

/// Fiber attenuation, stored in dB/km with the natural coefficient derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attenuation {
    per_length_db: f64,
}

impl Attenuation {
    pub fn from_db_per_km(db_per_km: f64) -> Result<Self> {
        attenuation_natural(db_per_km)?;
        Ok(Self {
            per_length_db: db_per_km,
        })
    }

    pub fn db_per_km(self) -> f64 {
        self.per_length_db
    }

    /// Natural attenuation coefficient, 1/km.
    pub fn per_km(self) -> f64 {
        self.per_length_db * std::f64::consts::LN_10 / 10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupVelocity {
    group_index: f64,
}

impl GroupVelocity {
    pub fn from_index(group_index: f64) -> Result<Self> {
        group_velocity(group_index)?;
        Ok(Self { group_index })
    }

    pub fn group_index(self) -> f64 {
        self.group_index
    }

    /// km/s
    pub fn km_per_s(self) -> f64 {
        SPEED_OF_LIGHT_KM_S / self.group_index
    }

    /// One-way propagation time over `length_km`.
    pub fn delay(self, length_km: f64) -> f64 {
        length_km / self.km_per_s()
    }
}

impl Default for GroupVelocity {
    fn default() -> Self {
        Self {
            group_index: DEFAULT_GROUP_INDEX,
        }
    }
}
