//! Scenario documents: the JSON description of one experiment.
//!
//! Every optional field has a default; [`load_scenario`] returns the filled
//! structure so reports can echo exactly what was run.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{DetectorMode, DetectorParams, DEFAULT_DEAD_TIME_S};
use crate::error::{Error, Result};
use crate::experiment::{OtdrConfig, PhaseSweepConfig, PhotonRunConfig, SignalMode};
use crate::fiber::{FiberSegment, LoopLayout, LossPoint};
use crate::noise::{PhaseNoiseModel, DEFAULT_PHASE_BANDWIDTH_HZ};
use crate::signal::{design_burst, BurstPlan, PulseSpec};
use crate::units::{photon_energy, GroupVelocity, DEFAULT_GROUP_INDEX, DEFAULT_WAVELENGTH_NM};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    /// Free-form label; not part of the scenario hash.
    #[serde(default)]
    pub name: String,
    pub layout: LayoutSpec,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default)]
    pub phase_noise: PhaseNoiseSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub otdr: OtdrSpec,
    #[serde(default)]
    pub phase_sweep: PhaseSweepSpec,
    #[serde(default)]
    pub psd: PsdSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    Smf28,
    Smf28Ull,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub length_km: f64,
    #[serde(default = "default_fiber")]
    pub fiber: FiberKind,
    /// Overrides the fiber's attenuation (required for `custom`).
    #[serde(default)]
    pub alpha_db_per_km: Option<f64>,
    /// Overrides the fiber's backscatter coefficient (required for `custom`).
    #[serde(default)]
    pub eta_per_s: Option<f64>,
}

fn default_fiber() -> FiberKind {
    FiberKind::Smf28Ull
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub loss_points: Vec<LossPoint>,
    #[serde(default = "default_group_index")]
    pub group_index: f64,
}

fn default_group_index() -> f64 {
    DEFAULT_GROUP_INDEX
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Cw,
    Pulsed,
    Burst,
}

/// Burst timing: explicit on/off times or `"design"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BurstSpec {
    Fixed { on_time_s: f64, off_time_s: f64 },
    Keyword(BurstKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurstKeyword {
    Design,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalSpec {
    pub mode: ModeSpec,
    pub rate_hz: f64,
    pub width_s: f64,
    pub wavelength_nm: f64,
    /// Constructive-fringe detections per pulse (sum over both detectors is
    /// this plus the fringe floor).
    pub detection_per_pulse: f64,
    /// Residual destructive-fringe detections per pulse.
    pub fringe_floor_per_pulse: f64,
    pub burst: BurstSpec,
    /// Backscatter may reach `dark_rate / design_margin` inside the windows.
    pub design_margin: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            mode: ModeSpec::Burst,
            rate_hz: 10e6,
            width_s: 900e-12,
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            detection_per_pulse: 3.5e-3,
            fringe_floor_per_pulse: 7e-7,
            burst: BurstSpec::Keyword(BurstKeyword::Design),
            design_margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModelKind {
    Ull,
    Smf28,
    Custom,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseNoiseSpec {
    pub model: PhaseModelKind,
    /// `a` in `a L^b`; required for `smf28` and `custom`.
    pub amplitude: Option<f64>,
    pub exponent: Option<f64>,
    pub floor: Option<f64>,
    pub floor_uncertainty: Option<f64>,
    pub bandwidth_hz: f64,
    /// Length the variance is evaluated at; defaults to the loop length.
    pub length_km: Option<f64>,
}

impl Default for PhaseNoiseSpec {
    fn default() -> Self {
        Self {
            model: PhaseModelKind::Ull,
            amplitude: None,
            exponent: None,
            floor: None,
            floor_uncertainty: None,
            bandwidth_hz: DEFAULT_PHASE_BANDWIDTH_HZ,
            length_km: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    pub dead_time_s: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            efficiency: 0.1,
            dark_rate: 7.0,
            dead_time_s: DEFAULT_DEAD_TIME_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub span_s: f64,
    pub dt_s: f64,
    pub include_backscatter: bool,
    /// Full detection window; defaults to pulse width plus two samples.
    pub window_s: Option<f64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            span_s: 10.0,
            dt_s: 1e-9,
            include_backscatter: true,
            window_s: None,
        }
    }
}

/// Photon-counting OTDR settings; the fiber under test is the first segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtdrSpec {
    /// Length of the fiber under test; defaults to the first segment's.
    pub length_km: Option<f64>,
    pub average_power_dbm: f64,
    pub rep_rate_hz: f64,
    pub pulse_width_s: f64,
    pub dt_s: f64,
    pub span_s: f64,
    pub bin_s: f64,
    pub fit_start_s: f64,
    pub fit_horizon_fraction: f64,
}

impl Default for OtdrSpec {
    fn default() -> Self {
        let c = OtdrConfig::default();
        Self {
            length_km: None,
            average_power_dbm: c.average_power_dbm,
            rep_rate_hz: c.rep_rate_hz,
            pulse_width_s: c.pulse_width_s,
            dt_s: c.dt_s,
            span_s: c.span_s,
            bin_s: c.bin_s,
            fit_start_s: c.fit_start_s,
            fit_horizon_fraction: c.fit_horizon_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseSweepSpec {
    pub lengths_km: Vec<f64>,
    pub trials: usize,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub subset_size: usize,
    /// Static phase of the classical measurement, rad.
    pub phi: f64,
}

impl Default for PhaseSweepSpec {
    fn default() -> Self {
        let c = PhaseSweepConfig::default();
        Self {
            lengths_km: c.lengths_km,
            trials: c.trials,
            sample_rate_hz: c.sample_rate_hz,
            duration_s: c.duration_s,
            subset_size: c.subset_size,
            phi: FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdSpec {
    pub length_km: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub rbw_hz: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl Default for PsdSpec {
    fn default() -> Self {
        Self {
            length_km: 100.0,
            sample_rate_hz: 10e6,
            duration_s: 0.03,
            rbw_hz: 100.0,
            f_min_hz: 9e3,
            f_max_hz: 1e6,
        }
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::ScenarioInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be a finite value > 0")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be a finite value >= 0")))
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::ScenarioParse {
            path: field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Checks every field; errors name the offending field path.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.layout.segments.is_empty() {
            return Err(invalid("layout.segments", "at least one segment is required"));
        }
        for (i, s) in self.layout.segments.iter().enumerate() {
            positive(&format!("layout.segments[{i}].length_km"), s.length_km)?;
            if s.fiber == FiberKind::Custom && (s.alpha_db_per_km.is_none() || s.eta_per_s.is_none()) {
                return Err(invalid(
                    format!("layout.segments[{i}]"),
                    "custom fiber needs alpha_db_per_km and eta_per_s",
                ));
            }
            if let Some(a) = s.alpha_db_per_km {
                non_negative(&format!("layout.segments[{i}].alpha_db_per_km"), a)?;
            }
            if let Some(e) = s.eta_per_s {
                non_negative(&format!("layout.segments[{i}].eta_per_s"), e)?;
            }
        }
        positive("layout.group_index", self.layout.group_index)?;
        for (i, p) in self.layout.loss_points.iter().enumerate() {
            non_negative(&format!("layout.loss_points[{i}].loss_db"), p.loss_db)?;
        }
        self.layout().map_err(|e| invalid("layout", e.to_string()))?;

        let s = &self.signal;
        positive("signal.rate_hz", s.rate_hz)?;
        positive("signal.width_s", s.width_s)?;
        if s.width_s >= 1.0 / s.rate_hz {
            return Err(invalid("signal.width_s", "pulse width must be shorter than the pulse period"));
        }
        positive("signal.wavelength_nm", s.wavelength_nm)?;
        positive("signal.detection_per_pulse", s.detection_per_pulse)?;
        non_negative("signal.fringe_floor_per_pulse", s.fringe_floor_per_pulse)?;
        if s.detection_per_pulse + s.fringe_floor_per_pulse > 1.0 {
            return Err(invalid("signal.detection_per_pulse", "detections per pulse must not exceed 1"));
        }
        if !(s.design_margin >= 1.0) {
            return Err(invalid("signal.design_margin", format!("{} must be >= 1", s.design_margin)));
        }
        if let BurstSpec::Fixed { on_time_s, off_time_s } = s.burst {
            positive("signal.burst.on_time_s", on_time_s)?;
            non_negative("signal.burst.off_time_s", off_time_s)?;
            if on_time_s < 1.0 / s.rate_hz {
                return Err(invalid("signal.burst.on_time_s", "shorter than one pulse period"));
            }
        }

        let p = &self.phase_noise;
        positive("phase_noise.bandwidth_hz", p.bandwidth_hz)?;
        match p.model {
            PhaseModelKind::Smf28 if p.amplitude.is_none() => {
                return Err(invalid("phase_noise.amplitude", "required for the smf28 model"));
            }
            PhaseModelKind::Custom if p.amplitude.is_none() || p.exponent.is_none() => {
                return Err(invalid("phase_noise", "custom model needs amplitude and exponent"));
            }
            _ => {}
        }
        for (name, v) in [
            ("phase_noise.amplitude", p.amplitude),
            ("phase_noise.floor", p.floor),
            ("phase_noise.floor_uncertainty", p.floor_uncertainty),
            ("phase_noise.length_km", p.length_km),
        ] {
            if let Some(v) = v {
                non_negative(name, v)?;
            }
        }
        if let Some(b) = p.exponent {
            positive("phase_noise.exponent", b)?;
        }

        let d = &self.detector;
        if !(d.efficiency > 0.0 && d.efficiency <= 1.0) {
            return Err(invalid("detector.efficiency", format!("{} must lie in (0, 1]", d.efficiency)));
        }
        non_negative("detector.dark_rate", d.dark_rate)?;
        non_negative("detector.dead_time_s", d.dead_time_s)?;

        let r = &self.run;
        positive("run.span_s", r.span_s)?;
        positive("run.dt_s", r.dt_s)?;
        if (s.width_s / r.dt_s).round() < 1.0 {
            return Err(invalid("run.dt_s", "grid cannot resolve the pulse width"));
        }
        if let Some(w) = r.window_s {
            positive("run.window_s", w)?;
            if w >= 1.0 / s.rate_hz {
                return Err(invalid("run.window_s", "window must be shorter than the pulse period"));
            }
        }

        let o = &self.otdr;
        if let Some(l) = o.length_km {
            positive("otdr.length_km", l)?;
        }
        positive("otdr.rep_rate_hz", o.rep_rate_hz)?;
        positive("otdr.pulse_width_s", o.pulse_width_s)?;
        positive("otdr.dt_s", o.dt_s)?;
        positive("otdr.span_s", o.span_s)?;
        positive("otdr.bin_s", o.bin_s)?;
        non_negative("otdr.fit_start_s", o.fit_start_s)?;
        if !(o.fit_horizon_fraction > 0.0 && o.fit_horizon_fraction <= 1.0) {
            return Err(invalid("otdr.fit_horizon_fraction", "must lie in (0, 1]"));
        }
        if !o.average_power_dbm.is_finite() {
            return Err(invalid("otdr.average_power_dbm", "must be finite"));
        }

        let w = &self.phase_sweep;
        if w.lengths_km.len() < 3 {
            return Err(invalid("phase_sweep.lengths_km", "at least three lengths are needed for a fit"));
        }
        for (i, l) in w.lengths_km.iter().enumerate() {
            positive(&format!("phase_sweep.lengths_km[{i}]"), *l)?;
        }
        if w.trials == 0 {
            return Err(invalid("phase_sweep.trials", "must be >= 1"));
        }
        positive("phase_sweep.sample_rate_hz", w.sample_rate_hz)?;
        positive("phase_sweep.duration_s", w.duration_s)?;
        let samples = (w.duration_s * w.sample_rate_hz).round() as usize;
        if w.subset_size < 2 || w.subset_size > samples {
            return Err(invalid("phase_sweep.subset_size", format!("must lie in [2, {samples}]")));
        }

        let q = &self.psd;
        positive("psd.length_km", q.length_km)?;
        positive("psd.sample_rate_hz", q.sample_rate_hz)?;
        positive("psd.duration_s", q.duration_s)?;
        positive("psd.rbw_hz", q.rbw_hz)?;
        non_negative("psd.f_min_hz", q.f_min_hz)?;
        if !(q.f_max_hz > q.f_min_hz) {
            return Err(invalid("psd.f_max_hz", "must exceed f_min_hz"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical serialization (the name is excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.name.clear();
        let bytes = serde_json::to_vec(&canonical).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn layout(&self) -> Result<LoopLayout> {
        let segments = self
            .layout
            .segments
            .iter()
            .map(|s| {
                let (alpha, eta, label) = match s.fiber {
                    FiberKind::Smf28 => (0.202, 8.0, "SMF-28"),
                    FiberKind::Smf28Ull => (0.159, 6.54, "SMF-28-ULL"),
                    FiberKind::Custom => (0.0, 0.0, "custom"),
                };
                FiberSegment::new(s.length_km, s.alpha_db_per_km.unwrap_or(alpha), s.eta_per_s.unwrap_or(eta), label)
            })
            .collect::<Result<Vec<_>>>()?;
        LoopLayout::new(segments, self.layout.loss_points.clone(), GroupVelocity::from_index(self.layout.group_index)?)
    }

    pub fn detector(&self) -> Result<DetectorParams> {
        DetectorParams::new(
            self.detector.efficiency,
            self.detector.dark_rate,
            self.detector.dead_time_s,
            DetectorMode::PhotonCounting,
        )
    }

    pub fn phase_model(&self) -> Result<Option<PhaseNoiseModel>> {
        let p = &self.phase_noise;
        let mut m = match p.model {
            PhaseModelKind::None => return Ok(None),
            PhaseModelKind::Ull => PhaseNoiseModel::ull(),
            PhaseModelKind::Smf28 => PhaseNoiseModel::smf28(p.amplitude.unwrap_or(0.0))?,
            PhaseModelKind::Custom => PhaseNoiseModel::new(
                "custom",
                p.amplitude.unwrap_or(0.0),
                p.exponent.unwrap_or(1.0),
                p.floor.unwrap_or(0.0),
                p.bandwidth_hz,
            )?,
        };
        if let Some(a) = p.amplitude {
            m.amplitude = a;
        }
        if let Some(b) = p.exponent {
            m.exponent = b;
        }
        if let Some(c) = p.floor {
            m.floor = c;
        }
        if let Some(u) = p.floor_uncertainty {
            m.floor_uncertainty = u;
        }
        m.bandwidth_hz = p.bandwidth_hz;
        Ok(Some(m))
    }

    /// Phase variance of the loop under test, rad^2.
    pub fn phase_variance(&self) -> Result<f64> {
        let layout = self.layout()?;
        Ok(match self.phase_model()? {
            Some(m) => m.variance(self.phase_noise.length_km.unwrap_or(layout.length_km())),
            None => 0.0,
        })
    }

    /// Peak power of the launched pulses implied by the detection rate.
    pub fn source_peak_power_w(&self) -> Result<f64> {
        let layout = self.layout()?;
        let s = &self.signal;
        let energy = (s.detection_per_pulse + s.fringe_floor_per_pulse) * photon_energy(s.wavelength_nm) / (self.detector.efficiency * layout.transmittance());
        Ok(energy / s.width_s)
    }

    pub fn pulse_spec(&self) -> PulseSpec {
        PulseSpec {
            rate_hz: self.signal.rate_hz,
            width_s: self.signal.width_s,
            dt_s: self.run.dt_s,
            wavelength_nm: self.signal.wavelength_nm,
        }
    }

    pub fn design(&self) -> Result<BurstPlan> {
        design_burst(
            &self.layout()?,
            &self.pulse_spec(),
            self.source_peak_power_w()?,
            &self.detector()?,
            self.signal.design_margin,
        )
    }

    /// Photon-run settings; a `"design"` burst is resolved first.
    pub fn photon_config(&self) -> Result<(PhotonRunConfig, Option<BurstPlan>)> {
        let (mode, plan) = match self.signal.mode {
            ModeSpec::Cw => (SignalMode::Cw, None),
            ModeSpec::Pulsed => (SignalMode::Pulsed, None),
            ModeSpec::Burst => match self.signal.burst {
                BurstSpec::Fixed { on_time_s, off_time_s } => (SignalMode::Burst { on_time_s, off_time_s }, None),
                BurstSpec::Keyword(BurstKeyword::Design) => {
                    let plan = self.design()?;
                    (
                        SignalMode::Burst {
                            on_time_s: plan.on_time_s,
                            off_time_s: plan.off_time_s,
                        },
                        Some(plan),
                    )
                }
            },
        };
        let config = PhotonRunConfig {
            layout: self.layout()?,
            pulse_rate_hz: self.signal.rate_hz,
            pulse_width_s: self.signal.width_s,
            dt_s: self.run.dt_s,
            wavelength_nm: self.signal.wavelength_nm,
            mode,
            i_max: self.signal.detection_per_pulse,
            i_min: self.signal.fringe_floor_per_pulse,
            phase_variance: self.phase_variance()?,
            phase_bandwidth_hz: self.phase_noise.bandwidth_hz,
            detector: self.detector()?,
            span_s: self.run.span_s,
            include_backscatter: self.run.include_backscatter,
            window_s: self.run.window_s,
        };
        Ok((config, plan))
    }

    /// OTDR acquisition settings and the single-segment layout under test.
    pub fn otdr_config(&self) -> Result<(LoopLayout, OtdrConfig)> {
        let full = self.layout()?;
        let mut first = full.segments()[0].clone();
        if let Some(l) = self.otdr.length_km {
            first.length_km = l;
        }
        let layout = LoopLayout::new(vec![first], vec![], full.group())?;
        let o = &self.otdr;
        Ok((
            layout,
            OtdrConfig {
                average_power_dbm: o.average_power_dbm,
                rep_rate_hz: o.rep_rate_hz,
                pulse_width_s: o.pulse_width_s,
                dt_s: o.dt_s,
                wavelength_nm: self.signal.wavelength_nm,
                span_s: o.span_s,
                bin_s: o.bin_s,
                fit_start_s: o.fit_start_s,
                fit_horizon_fraction: o.fit_horizon_fraction,
            },
        ))
    }

    pub fn sweep_config(&self) -> PhaseSweepConfig {
        let w = &self.phase_sweep;
        PhaseSweepConfig {
            lengths_km: w.lengths_km.clone(),
            trials: w.trials,
            sample_rate_hz: w.sample_rate_hz,
            duration_s: w.duration_s,
            subset_size: w.subset_size,
            phi: w.phi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20}]}}"#;

    #[test]
    fn minimal_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.signal, SignalSpec::default());
        assert_eq!(s.detector, DetectorSpec::default());
        assert_eq!(s.layout.group_index, DEFAULT_GROUP_INDEX);
        assert_eq!(s.layout.segments[0].fiber, FiberKind::Smf28Ull);
        let layout = s.layout().unwrap();
        assert!((layout.length_km() - 20.0).abs() < 1e-12);
        // the echo parses back to the same scenario
        let echo = serde_json::to_string(&s).unwrap();
        assert_eq!(parse_scenario(&echo).unwrap(), s);
    }

    #[test]
    fn negative_dark_rate_names_field() {
        let text = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20}]}, "detector": {"dark_rate": -1}}"#;
        match parse_scenario(text) {
            Err(Error::ScenarioInvalid { field, .. }) => assert_eq!(field, "detector.dark_rate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_location() {
        let text = "{\"schema_version\": 1,\n \"layout\": {\"segments\": [{\"length_km\": \"x\"}]}}";
        match parse_scenario(text) {
            Err(Error::ScenarioParse { path, line, .. }) => {
                assert_eq!(path, "layout.segments[0].length_km");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20}]}, "detector": {"darkrate": 1}}"#;
        assert!(matches!(parse_scenario(unknown), Err(Error::ScenarioParse { .. })));
    }

    #[test]
    fn wrong_schema_version() {
        let text = r#"{"schema_version": 7, "layout": {"segments": [{"length_km": 20}]}}"#;
        assert!(matches!(parse_scenario(text), Err(Error::ScenarioInvalid { field, .. }) if field == "schema_version"));
    }

    #[test]
    fn hash_tracks_meaningful_fields() {
        let a = parse_scenario(MINIMAL).unwrap();
        let mut b = a.clone();
        b.name = "renamed".into();
        assert_eq!(a.hash(), b.hash());
        b.detector.dark_rate = 8.0;
        assert_ne!(a.hash(), b.hash());
        // defaults written out explicitly do not change the hash
        let explicit = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20, "fiber": "smf28_ull"}], "group_index": 1.468}}"#;
        assert_eq!(parse_scenario(explicit).unwrap().hash(), a.hash());
    }

    #[test]
    fn burst_spec_forms() {
        let fixed = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20}]},
            "signal": {"burst": {"on_time_s": 75e-6, "off_time_s": 1400e-6}}}"#;
        let s = parse_scenario(fixed).unwrap();
        assert_eq!(
            s.signal.burst,
            BurstSpec::Fixed {
                on_time_s: 75e-6,
                off_time_s: 1400e-6
            }
        );
        let bad = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20}]}, "signal": {"burst": "later"}}"#;
        assert!(parse_scenario(bad).is_err());
    }

    #[test]
    fn custom_fiber_requires_parameters() {
        let text = r#"{"schema_version": 1, "layout": {"segments": [{"length_km": 20, "fiber": "custom"}]}}"#;
        assert!(matches!(parse_scenario(text), Err(Error::ScenarioInvalid { field, .. }) if field == "layout.segments[0]"));
    }
}
