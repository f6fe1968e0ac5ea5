//! Sagnac ring geometry and the directional Rayleigh backscatter impulse
//! response.
//!
//! Positions are clockwise arc lengths (km) measured from the beam-splitter
//! port. Light entering counterclockwise sees the ring in reverse order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Attenuation, GroupVelocity, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSegment {
    pub length_km: f64,
    pub alpha: Attenuation,
    /// Backscatter power at zero delay per unit launched pulse energy, 1/s.
    pub eta_per_s: f64,
    pub label: String,
}

impl FiberSegment {
    pub fn new(length_km: f64, alpha_db_per_km: f64, eta_per_s: f64, label: impl Into<String>) -> Result<Self> {
        if !(length_km.is_finite() && length_km > 0.0) {
            return Err(Error::param("length_km", format!("{length_km} must be > 0")));
        }
        if !(eta_per_s.is_finite() && eta_per_s >= 0.0) {
            return Err(Error::param("eta_per_s", format!("{eta_per_s} must be >= 0")));
        }
        Ok(Self {
            length_km,
            alpha: Attenuation::from_db_per_km(alpha_db_per_km)?,
            eta_per_s,
            label: label.into(),
        })
    }

    /// Standard single-mode fiber, alpha = 0.202 dB/km, eta = 8.0 /s.
    pub fn smf28(length_km: f64) -> Result<Self> {
        Self::new(length_km, 0.202, 8.0, "SMF-28")
    }

    /// Ultra-low-loss fiber, alpha = 0.159 dB/km, eta = 6.54 /s.
    pub fn smf28_ull(length_km: f64) -> Result<Self> {
        Self::new(length_km, 0.159, 6.54, "SMF-28-ULL")
    }

    pub fn loss_db(&self) -> f64 {
        self.length_km * self.alpha.db_per_km()
    }
}

/// A discrete lossy component inserted in the ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub position_km: f64,
    pub loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Clockwise,
    Counterclockwise,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Clockwise, Direction::Counterclockwise];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopLayout {
    segments: Vec<FiberSegment>,
    loss_points: Vec<LossPoint>,
    group: GroupVelocity,
    length_km: f64,
    total_loss_db: f64,
}

/// Validates a ring description and derives its length and total loss.
pub fn build_layout(segments: Vec<FiberSegment>, loss_points: Vec<LossPoint>, group: GroupVelocity) -> Result<LoopLayout> {
    LoopLayout::new(segments, loss_points, group)
}

impl LoopLayout {
    pub fn new(segments: Vec<FiberSegment>, mut loss_points: Vec<LossPoint>, group: GroupVelocity) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyLayout);
        }
        let length_km: f64 = segments.iter().map(|s| s.length_km).sum();
        for lp in &loss_points {
            if !(lp.position_km >= 0.0 && lp.position_km <= length_km) {
                return Err(Error::LossPointOutOfRange {
                    position_km: lp.position_km,
                    length_km,
                });
            }
            if !(lp.loss_db.is_finite() && lp.loss_db >= 0.0) {
                return Err(Error::param("loss_db", format!("{} must be >= 0", lp.loss_db)));
            }
        }
        loss_points.sort_by(|a, b| a.position_km.total_cmp(&b.position_km));
        let total_loss_db = segments.iter().map(FiberSegment::loss_db).sum::<f64>()
            + loss_points.iter().map(|lp| lp.loss_db).sum::<f64>();
        Ok(Self {
            segments,
            loss_points,
            group,
            length_km,
            total_loss_db,
        })
    }

    /// Uniform ring made of a single fiber type.
    pub fn uniform(segment: FiberSegment) -> Result<Self> {
        Self::new(vec![segment], Vec::new(), GroupVelocity::default())
    }

    pub fn segments(&self) -> &[FiberSegment] {
        &self.segments
    }

    pub fn loss_points(&self) -> &[LossPoint] {
        &self.loss_points
    }

    pub fn group(&self) -> GroupVelocity {
        self.group
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    /// Total loop loss in dB (fiber plus discrete components).
    pub fn total_loss_db(&self) -> f64 {
        self.total_loss_db
    }

    /// One-way power transmittance around the full ring.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.total_loss_db / 10.0)
    }

    /// One-way transit time L / v_g.
    pub fn transit_time(&self) -> f64 {
        self.group.delay(self.length_km)
    }

    /// Latest delay at which single-pass backscatter returns, 2L / v_g.
    pub fn round_trip_horizon(&self) -> f64 {
        2.0 * self.transit_time()
    }

    pub fn with_loss_point(&self, lp: LossPoint) -> Result<Self> {
        let mut points = self.loss_points.clone();
        points.push(lp);
        Self::new(self.segments.clone(), points, self.group)
    }

    /// Segments `(start_km, end_km, alpha_nat, eta)` and loss points `(z_km, loss_db)`
    /// in the coordinates of light entering in `direction`.
    fn directional_view(&self, direction: Direction) -> (Vec<(f64, f64, f64, f64)>, Vec<(f64, f64)>) {
        let ordered: Vec<&FiberSegment> = match direction {
            Direction::Clockwise => self.segments.iter().collect(),
            Direction::Counterclockwise => self.segments.iter().rev().collect(),
        };
        let mut start = 0.0;
        let mut pieces = Vec::with_capacity(ordered.len());
        for seg in ordered {
            pieces.push((start, start + seg.length_km, seg.alpha.per_km(), seg.eta_per_s));
            start += seg.length_km;
        }
        let mut losses: Vec<(f64, f64)> = self
            .loss_points
            .iter()
            .map(|lp| {
                let z = match direction {
                    Direction::Clockwise => lp.position_km,
                    Direction::Counterclockwise => self.length_km - lp.position_km,
                };
                (z, lp.loss_db)
            })
            .collect();
        losses.sort_by(|a, b| a.0.total_cmp(&b.0));
        (pieces, losses)
    }
}

/// Sampled directional backscatter response per unit launched pulse energy, 1/s.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub direction: Direction,
}

impl ImpulseResponse {
    /// Time integral of the response (Riemann sum on the grid).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dt()
    }
}

/// Builds the backscatter density `eta(z) A(z)^2` at delay `t = 2z / v_g`
/// for light entering the ring in `direction`, truncated at the round-trip
/// horizon.
pub fn impulse_response(layout: &LoopLayout, direction: Direction, grid: &TimeGrid) -> Result<ImpulseResponse> {
    let horizon = layout.round_trip_horizon();
    let end = grid.t0() + grid.span();
    if grid.t0() > 0.0 || end < horizon {
        return Err(Error::GridTooShort {
            covered_s: end - grid.t0().max(0.0),
            required_s: horizon,
        });
    }
    let (pieces, losses) = layout.directional_view(direction);
    let half_vg = 0.5 * layout.group().km_per_s();
    let length = layout.length_km();
    let mut values = vec![0.0; grid.len()];
    // segment pointer: start <= z < end (the last segment includes its end)
    let mut si = 0;
    let mut fiber_log_t = 0.0; // fiber attenuation accumulated before segment si
    // loss pointer: a loss point at z0 attenuates scatter from z > z0
    let mut li = 0;
    let mut loss_log_t = 0.0;
    for (k, value) in values.iter_mut().enumerate() {
        let t = grid.time(k);
        if t < 0.0 {
            continue;
        }
        let z = t * half_vg;
        if z > length {
            break;
        }
        while si + 1 < pieces.len() && z >= pieces[si].1 {
            fiber_log_t -= pieces[si].2 * (pieces[si].1 - pieces[si].0);
            si += 1;
        }
        while li < losses.len() && z > losses[li].0 {
            loss_log_t -= losses[li].1 * std::f64::consts::LN_10 / 10.0;
            li += 1;
        }
        let (start, _, alpha, eta) = pieces[si];
        let log_t = fiber_log_t - alpha * (z - start) + loss_log_t;
        *value = eta * (2.0 * log_t).exp();
    }
    Ok(ImpulseResponse {
        grid: *grid,
        values,
        direction,
    })
}

/// Total loop loss in dB.
pub fn total_loss(layout: &LoopLayout) -> f64 {
    layout.total_loss_db()
}

/// One-way transit time in seconds.
pub fn transit_time(layout: &LoopLayout) -> f64 {
    layout.transit_time()
}
