//! Subcommand drivers shared by the CLI and the FFI layer.

use std::path::Path;

use serde_json::json;

use crate::analysis::{fit_otdr, qber_from_variance, visibility_from_variance, OtdrData};
use crate::detection::fold_histogram;
use crate::error::{Error, Result};
use crate::experiment::{intensity_psd, phase_sweep, run_photon_prepared, simulate_otdr, SignalMode};
use crate::noise::BackscatterKernel;
use crate::report::{num, OutputDir, Provenance, Report, Table};
use crate::scenario::Scenario;
use crate::signal::{apply_burst, make_pulse_train, optimal_duty_two_user, snr_from_backscatter, SignalPattern};
use crate::units::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    AnalyzePhase,
    FitOtdr,
    OptimizeBurst,
    Psd,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::AnalyzePhase => "analyze-phase",
            Command::FitOtdr => "fit-otdr",
            Command::OptimizeBurst => "optimize-burst",
            Command::Psd => "psd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub seeds: usize,
    /// Write raw timestamp streams (simulate, fit-otdr).
    pub timestamps: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: 1,
            timestamps: true,
        }
    }
}

impl RunOptions {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds.max(1) as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

/// Runs one subcommand and writes its outputs into `out`.
pub fn run(scenario: &Scenario, command: Command, out: impl AsRef<Path>, options: &RunOptions) -> Result<Report> {
    let result = match command {
        Command::Simulate => simulate(scenario, out.as_ref(), options),
        Command::AnalyzePhase => analyze_phase(scenario, out.as_ref(), options),
        Command::FitOtdr => otdr(scenario, out.as_ref(), options),
        Command::OptimizeBurst => optimize_burst(scenario, out.as_ref(), options),
        Command::Psd => psd_run(scenario, out.as_ref(), options),
    };
    let label = if scenario.name.is_empty() { "scenario".to_string() } else { format!("scenario `{}`", scenario.name) };
    result.map_err(|e| e.context(format!("{} on {label}", command.name())))
}

fn simulate(scenario: &Scenario, out: &Path, options: &RunOptions) -> Result<Report> {
    let seeds = options.seed_list();
    let prov = Provenance::new(Command::Simulate.name(), scenario, &seeds);
    let mut dir = OutputDir::create(out)?;
    let (config, plan) = scenario.photon_config()?;
    let setup = config.prepare()?;
    let mut table = Table::new(
        "visibility",
        &[
            "seed",
            "mode",
            "length_km",
            "phase_variance",
            "v_d0",
            "v_d1",
            "v_mean",
            "d0_constructive",
            "d0_destructive",
            "d1_constructive",
            "d1_destructive",
            "window_backscatter_per_pulse",
            "burst_offset_s",
        ],
    );
    let mut runs = Vec::new();
    let mut counts_table = None;
    for &seed in &seeds {
        let r = run_photon_prepared(&config, &setup, seed)?;
        let v = &r.visibility;
        table.push(vec![
            seed.to_string(),
            config.mode.label().into(),
            num(config.layout.length_km()),
            num(config.phase_variance),
            num(v.v_d0),
            num(v.v_d1),
            num(v.v_mean),
            v.counts_d0.0.to_string(),
            v.counts_d0.1.to_string(),
            v.counts_d1.0.to_string(),
            v.counts_d1.1.to_string(),
            num(r.window_backscatter_per_pulse),
            r.timing.map(|t| num(t.offset_s)).unwrap_or_default(),
        ]);
        if counts_table.is_none() {
            counts_table = Some(counts_vs_time(&r, setup.pattern.period(), config.dt_s)?);
        }
        if options.timestamps {
            dir.timestamps(&format!("timestamps_seed{seed}_phi0.txt"), &r.constructive.0, &r.constructive.1, &prov)?;
            dir.timestamps(&format!("timestamps_seed{seed}_phipi.txt"), &r.destructive.0, &r.destructive.1, &prov)?;
        }
        runs.push(json!({
            "seed": seed,
            "visibility": r.visibility,
            "timing": r.timing,
            "window": r.window,
            "window_backscatter_per_pulse": r.window_backscatter_per_pulse,
            "events": {
                "constructive": [r.constructive.0.len(), r.constructive.1.len()],
                "destructive": [r.destructive.0.len(), r.destructive.1.len()],
            },
        }));
    }
    let vs: Vec<f64> = table.rows.iter().map(|row| row[6].parse().unwrap_or(f64::NAN)).collect();
    let mean = vs.iter().sum::<f64>() / vs.len() as f64;
    let std = if vs.len() > 1 {
        (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    dir.table(&table, &prov)?;
    if let Some(t) = counts_table {
        dir.table(&t, &prov)?;
    }
    let results = json!({
        "mode": config.mode.label(),
        "length_km": config.layout.length_km(),
        "total_loss_db": config.layout.total_loss_db(),
        "transit_time_s": config.layout.transit_time(),
        "phase_variance": config.phase_variance,
        "expected_phase_visibility": visibility_from_variance(config.phase_variance),
        "qber_from_variance": qber_from_variance(config.phase_variance),
        "launch_energy_j": setup.launch_energy_j,
        "burst_plan": plan,
        "burst": match config.mode { SignalMode::Burst { .. } => json!({
            "on_time_s": setup.pattern.meta.burst_on_s,
            "off_time_s": setup.pattern.meta.burst_off_s,
            "duty": setup.pattern.meta.duty,
        }), _ => serde_json::Value::Null },
        "visibility_mean": mean,
        "visibility_std": std,
        "runs": runs,
    });
    dir.finish(prov, scenario, results)
}

/// Folded counts of the four streams of one run over the pattern period.
fn counts_vs_time(r: &crate::experiment::PhotonRun, period: f64, dt: f64) -> Result<Table> {
    let bin = (period / 2000.0).max(dt);
    let streams = [&r.constructive.0, &r.constructive.1, &r.destructive.0, &r.destructive.1];
    let hists = streams.iter().map(|s| fold_histogram(s, period, bin)).collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "counts_vs_time",
        &["bin_start_s", "d0_constructive", "d1_constructive", "d0_destructive", "d1_destructive"],
    );
    for i in 0..hists[0].counts.len() {
        let mut row = vec![num(hists[0].bin_start(i))];
        row.extend(hists.iter().map(|h| h.counts[i].to_string()));
        t.push(row);
    }
    Ok(t)
}

fn analyze_phase(scenario: &Scenario, out: &Path, options: &RunOptions) -> Result<Report> {
    let seeds = options.seed_list();
    let prov = Provenance::new(Command::AnalyzePhase.name(), scenario, &seeds);
    let model = scenario.phase_model()?.ok_or_else(|| Error::ScenarioInvalid {
        field: "phase_noise.model".into(),
        reason: "analyze-phase needs a phase-noise model".into(),
    })?;
    let mut dir = OutputDir::create(out)?;
    let config = scenario.sweep_config();
    let mut points = Table::new(
        "variance_vs_length",
        &["seed", "length_km", "model_variance", "raw_variance", "variance", "sigma", "visibility", "qber"],
    );
    let mut fits = Table::new("power_law_fit", &["seed", "a", "sigma_a", "b", "sigma_b", "reduced_chi2"]);
    let mut sweeps = Vec::new();
    for &seed in &seeds {
        let sweep = phase_sweep(&model, &config, seed)?;
        for p in &sweep.points {
            points.push(vec![
                seed.to_string(),
                num(p.length_km),
                num(p.model_variance),
                num(p.raw_variance),
                num(p.variance),
                num(p.sigma),
                num(p.visibility),
                num(p.qber),
            ]);
        }
        let f = &sweep.fit;
        fits.push(vec![
            seed.to_string(),
            num(f.value("a")),
            num(f.sigma("a")),
            num(f.value("b")),
            num(f.sigma("b")),
            num(f.reduced_chi2),
        ]);
        sweeps.push(json!({ "seed": seed, "sweep": sweep }));
    }
    dir.table(&points, &prov)?;
    dir.table(&fits, &prov)?;
    let results = json!({ "model": model, "sweeps": sweeps });
    dir.finish(prov, scenario, results)
}

fn otdr(scenario: &Scenario, out: &Path, options: &RunOptions) -> Result<Report> {
    let seeds = options.seed_list();
    let prov = Provenance::new(Command::FitOtdr.name(), scenario, &seeds);
    let (layout, config) = scenario.otdr_config()?;
    let detector = scenario.detector()?;
    let mut dir = OutputDir::create(out)?;
    let mut fits = Table::new("otdr_fit", &["seed", "events", "alpha_db_per_km", "sigma_alpha", "eta_per_s", "sigma_eta", "reduced_chi2"]);
    let mut runs = Vec::new();
    let mut trace = None;
    for &seed in &seeds {
        let acq = simulate_otdr(&layout, &config, &detector, seed)?;
        let fit = fit_otdr(&OtdrData::from(&acq.histogram), &detector, &acq.setup)?;
        fits.push(vec![
            seed.to_string(),
            acq.series.len().to_string(),
            num(fit.fit.value("alpha_db_per_km")),
            num(fit.fit.sigma("alpha_db_per_km")),
            num(fit.fit.value("eta_per_s")),
            num(fit.fit.sigma("eta_per_s")),
            num(fit.fit.reduced_chi2),
        ]);
        if trace.is_none() {
            let mut t = Table::new("otdr_trace", &["bin_start_s", "counts", "live_fraction", "corrected_rate", "model_rate"]);
            for i in 0..acq.histogram.counts.len() {
                t.push(vec![
                    num(fit.bin_start_s[i]),
                    acq.histogram.counts[i].to_string(),
                    num(fit.live_fraction[i]),
                    num(fit.corrected_rate[i]),
                    num(fit.model_rate[i]),
                ]);
            }
            trace = Some(t);
        }
        if options.timestamps {
            let empty = crate::detection::TimestampSeries::new(vec![], crate::detection::DetectorId::D1, acq.series.span_s, acq.series.dead_time_s)?;
            dir.timestamps(&format!("otdr_timestamps_seed{seed}.txt"), &acq.series, &empty, &prov)?;
        }
        runs.push(json!({ "seed": seed, "events": acq.series.len(), "setup": acq.setup, "fit": fit.fit, "fit_bins": fit.fit_bins }));
    }
    dir.table(&fits, &prov)?;
    if let Some(t) = trace {
        dir.table(&t, &prov)?;
    }
    let seg = &layout.segments()[0];
    let results = json!({
        "fiber": { "label": seg.label, "length_km": seg.length_km, "alpha_db_per_km": seg.alpha.db_per_km(), "eta_per_s": seg.eta_per_s },
        "runs": runs,
    });
    dir.finish(prov, scenario, results)
}

fn optimize_burst(scenario: &Scenario, out: &Path, options: &RunOptions) -> Result<Report> {
    let seeds = options.seed_list();
    let prov = Provenance::new(Command::OptimizeBurst.name(), scenario, &seeds);
    let mut dir = OutputDir::create(out)?;
    let plan = scenario.design()?;
    let layout = scenario.layout()?;
    let s = &scenario.signal;
    let dt = scenario.run.dt_s;
    let peak = scenario.source_peak_power_w()?;
    let unit = TimeGrid::new(0.0, dt, (1.0 / (s.rate_hz * dt)).round() as usize)?;
    let train = make_pulse_train(s.rate_hz, s.width_s, peak, &unit)?;
    let burst = apply_burst(&train, plan.on_time_s, plan.off_time_s)?;
    let n = burst.period_samples();
    let grid = TimeGrid::new(0.0, dt, n)?;
    let full = make_pulse_train(s.rate_hz, s.width_s, peak, &grid)?;
    let full = SignalPattern::from_samples(grid, full.power().to_vec(), n, full.meta.clone())?;
    let kernel = BackscatterKernel::new(&layout, dt, n)?;
    let wave_burst = kernel.response(&burst)?;
    let wave_full = kernel.response(&full)?;
    let loss = layout.total_loss_db();
    let mut curve = Table::new("snr_vs_time", &["time_s", "backscatter_burst_w", "backscatter_pulsed_w", "snr_burst", "snr_pulsed"]);
    let step = (n / 2000).max(1);
    for k in (0..n).step_by(step) {
        let t = k as f64 * dt;
        curve.push(vec![
            num(t),
            num(wave_burst.power[k]),
            num(wave_full.power[k]),
            num(snr_from_backscatter(loss, &wave_burst, t)),
            num(snr_from_backscatter(loss, &wave_full, t)),
        ]);
    }
    dir.table(&curve, &prov)?;
    let results = json!({
        "plan": plan,
        "source_peak_power_w": peak,
        "optimal_duty_two_user": optimal_duty_two_user(),
        "burst_period_target_s": 1.5 * layout.transit_time(),
    });
    dir.finish(prov, scenario, results)
}

fn psd_run(scenario: &Scenario, out: &Path, options: &RunOptions) -> Result<Report> {
    let seeds = options.seed_list();
    let prov = Provenance::new(Command::Psd.name(), scenario, &seeds);
    let model = scenario.phase_model()?.ok_or_else(|| Error::ScenarioInvalid {
        field: "phase_noise.model".into(),
        reason: "psd needs a phase-noise model".into(),
    })?;
    let q = &scenario.psd;
    let mut dir = OutputDir::create(out)?;
    let mut table = Table::new("psd", &["seed", "frequency_hz", "psd_per_hz"]);
    let mut runs = Vec::new();
    for &seed in &seeds {
        let p = intensity_psd(&model, q.length_km, q.sample_rate_hz, q.duration_s, q.rbw_hz, (q.f_min_hz, q.f_max_hz), seed)?;
        for (f, v) in p.frequency.iter().zip(&p.power) {
            table.push(vec![seed.to_string(), num(*f), num(*v)]);
        }
        runs.push(json!({
            "seed": seed,
            "rbw_hz": p.rbw_hz,
            "df": p.df,
            "segment_len": p.segment_len,
            "n_segments": p.n_segments,
            "band_power": p.integrated(),
        }));
    }
    dir.table(&table, &prov)?;
    let results = json!({ "length_km": q.length_km, "phase_variance": model.variance(q.length_km), "runs": runs });
    dir.finish(prov, scenario, results)
}
