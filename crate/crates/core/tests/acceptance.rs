//! Acceptance criteria. Every test prints one line
//! `[acceptance] <n> <name>: PASS|FAIL <details>` and then asserts.
//! Lines go straight to stdout so they show up in captured test output.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use sagnac_core::analysis::{
    extract_phase, fit_otdr, psd, recover_burst_timing, subset_variance, subtract_floor, OtdrData, TimingOptions,
};
use sagnac_core::detection::{interference_flux, spad_detect, DetectorId, DetectorMode, DetectorParams, InterferenceParams, PhotonFlux};
use sagnac_core::experiment::{derive_seed, phase_sweep, run_photon, run_photon_prepared, simulate_otdr, OtdrConfig, PhaseSweepConfig, PhotonRunConfig, SignalMode};
use sagnac_core::fiber::{impulse_response, Direction, FiberSegment, LoopLayout};
use sagnac_core::noise::{backscatter_response, band_limited_noise, synthesize_phase, PhaseNoiseModel};
use sagnac_core::runner::{run, Command, RunOptions};
use sagnac_core::scenario::parse_scenario;
use sagnac_core::signal::{design_burst, make_cw, make_pulse_train, optimal_duty_two_user, PulseSpec, SignalPattern};
use sagnac_core::units::{photon_energy, TimeGrid, TimeSeries};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn line(n: u32, name: &str, pass: bool, details: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[acceptance] {n:>2} {name}: {verdict} {details}");
    let _ = out.flush();
}

fn ull200() -> LoopLayout {
    LoopLayout::uniform(FiberSegment::smf28_ull(200.0).unwrap()).unwrap()
}

/// The 200 km operating point: 10 MHz, 900 ps pulses, 3.5e-3 detections per
/// pulse, 7e-7 fringe floor, 10 % efficiency, 7 dark counts/s, 1 us dead time.
fn photon_200km(mode: SignalMode, span_s: f64) -> PhotonRunConfig {
    PhotonRunConfig {
        layout: ull200(),
        pulse_rate_hz: 10e6,
        pulse_width_s: 900e-12,
        dt_s: 1e-9,
        wavelength_nm: 1545.3,
        mode,
        i_max: 3.5e-3,
        i_min: 7e-7,
        phase_variance: 0.06,
        phase_bandwidth_hz: 1e6,
        detector: DetectorParams::new(0.1, 7.0, 1e-6, DetectorMode::PhotonCounting).unwrap(),
        span_s,
        include_backscatter: true,
        window_s: None,
    }
}

#[test]
fn c01_backscatter_oracle() {
    // 20 km loop, 10 pulses in a 1e4-sample periodic grid; the round trip
    // (196 us) is longer than the 100 us period, so earlier periods fold in.
    let layout = LoopLayout::uniform(FiberSegment::smf28(20.0).unwrap()).unwrap();
    let dt = 1e-8;
    let grid = TimeGrid::new(0.0, dt, 10_000).unwrap();
    let train = make_pulse_train(1e5, 5e-8, 1e-3, &grid).unwrap();
    let pattern = SignalPattern::from_samples(grid, train.power().to_vec(), 10_000, train.meta.clone()).unwrap();
    let fast = backscatter_response(&layout, &pattern).unwrap();

    // oracle: closed-form exponential kernel, explicit sum over all launches
    let seg = &layout.segments()[0];
    let k = seg.alpha.per_km() * layout.group().km_per_s();
    let horizon = (layout.round_trip_horizon() / dt).floor() as i64;
    let x = pattern.power();
    let n = x.len() as i64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut y = 0.0;
        for j in 0..n {
            if x[j as usize] == 0.0 {
                continue;
            }
            let mut lag = (i - j).rem_euclid(n);
            while lag <= horizon {
                // half of the pulse goes each way; a uniform ring looks the
                // same in both directions
                y += x[j as usize] * seg.eta_per_s * (-k * lag as f64 * dt).exp() * dt;
                lag += n;
            }
        }
        let rel = ((fast.power[i as usize] - y) / y).abs();
        worst = worst.max(rel);
    }
    let pass = worst < 1e-9;
    line(1, "backscatter FFT vs brute force", pass, format!("max relative error {worst:.2e} (tol 1e-9)"));
    assert!(pass);
}

#[test]
fn c02_single_pulse_anchor() {
    let layout = LoopLayout::uniform(FiberSegment::smf28(20.0).unwrap()).unwrap();
    let dt = 1e-8;
    let grid = TimeGrid::covering(dt, layout.round_trip_horizon() + dt).unwrap();
    let h = impulse_response(&layout, Direction::Clockwise, &grid).unwrap();
    let at0 = h.values[0];
    let k = 10_000;
    let t = grid.time(k);
    let alpha_nat = 0.202 * std::f64::consts::LN_10 / 10.0;
    let vg = 299_792.458 / 1.468;
    let expected = 8.0 * (-alpha_nat * vg * t).exp();
    let rel = ((h.values[k] - expected) / expected).abs();
    let pass = at0 == 8.0 && rel < 1e-12 && (t - 100e-6).abs() < 1e-15;
    line(
        2,
        "single-pulse response anchor",
        pass,
        format!("h(0) = {at0} (exact 8.0); h(100 us) relative error {rel:.1e} (tol 1e-12)"),
    );
    assert!(pass);
}

#[test]
fn c03_otdr_round_trip() {
    let detector = DetectorParams::new(0.1, 7.0, 10e-6, DetectorMode::PhotonCounting).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (seg, alpha, eta) in [
        (FiberSegment::smf28(20.0).unwrap(), 0.202, 8.0),
        (FiberSegment::smf28_ull(20.0).unwrap(), 0.159, 6.54),
    ] {
        let layout = LoopLayout::uniform(seg.clone()).unwrap();
        let mut scaled = Vec::new();
        for (span, base) in [(2.0, 11u64), (8.0, 12u64)] {
            let config = OtdrConfig {
                span_s: span,
                ..OtdrConfig::default()
            };
            // a single 2-sigma check misses 5 % of the time by construction,
            // so each setting gets three seeds and needs two of them inside
            let mut inside = 0;
            let mut first = None;
            for rep in 0..3 {
                let acq = simulate_otdr(&layout, &config, &detector, derive_seed(base, rep)).unwrap();
                let fit = fit_otdr(&OtdrData::from(&acq.histogram), &detector, &acq.setup).unwrap();
                let (a, sa) = fit.fit.get("alpha_db_per_km").unwrap();
                let (e, se) = fit.fit.get("eta_per_s").unwrap();
                if (a - alpha).abs() <= 2.0 * sa && (e - eta).abs() <= 2.0 * se {
                    inside += 1;
                }
                let events = acq.series.len() as f64;
                if first.is_none() {
                    first = Some((sa * events.sqrt(), se * events.sqrt()));
                    details.push(format!(
                        "{} {span}s: alpha {a:.4}+-{sa:.4} eta {e:.3}+-{se:.3} ({} events)",
                        seg.label,
                        acq.series.len()
                    ));
                }
            }
            pass &= inside >= 2;
            details.push(format!("{inside}/3 seeds inside"));
            scaled.push(first.unwrap());
        }
        // sigma * sqrt(N) must stay constant to 15 %
        let ra = scaled[0].0 / scaled[1].0;
        let re = scaled[0].1 / scaled[1].1;
        let shrink = (ra - 1.0).abs() < 0.15 && (re - 1.0).abs() < 0.15;
        pass &= shrink;
        details.push(format!("{} sigma*sqrt(N) ratio alpha {ra:.3} eta {re:.3} (tol 1 +- 0.15)", seg.label));
    }
    line(3, "OTDR round trip", pass, format!("{} (2 sigma, 2 of 3 seeds)", details.join("; ")));
    assert!(pass);
}

#[test]
fn c04_visibility_law() {
    let seeds = 50;
    let mut pass = true;
    let mut details = Vec::new();
    for sigma2 in [0.01, 0.06, 0.2] {
        let config = PhotonRunConfig {
            mode: SignalMode::Pulsed,
            i_min: 0.0,
            phase_variance: sigma2,
            include_backscatter: false,
            detector: DetectorParams::new(0.1, 7.0, 0.0, DetectorMode::PhotonCounting).unwrap(),
            ..photon_200km(SignalMode::Pulsed, 0.05)
        };
        let setup = config.prepare().unwrap();
        let mean = (0..seeds)
            .map(|s| run_photon_prepared(&config, &setup, derive_seed(400, s)).unwrap().visibility.v_mean)
            .sum::<f64>()
            / seeds as f64;
        let expected = (-sigma2 / 2.0f64).exp();
        let ok = (mean - expected).abs() <= 0.005;
        pass &= ok;
        details.push(format!("sigma2 {sigma2}: V {:.3}% vs {:.3}%", 100.0 * mean, 100.0 * expected));
    }
    line(4, "visibility law", pass, format!("{} over {seeds} seeds (tol +-0.5 pp)", details.join("; ")));
    assert!(pass);
}

#[test]
fn c05_ideal_visibility() {
    let config = PhotonRunConfig {
        mode: SignalMode::Pulsed,
        phase_variance: 0.0,
        include_backscatter: false,
        detector: DetectorParams::new(0.1, 7.0, 0.0, DetectorMode::PhotonCounting).unwrap(),
        ..photon_200km(SignalMode::Pulsed, 20.0)
    };
    let r = run_photon(&config, 5).unwrap();
    let v = r.visibility.v_mean;
    let pass = (v - 0.9996).abs() <= 1e-4;
    line(
        5,
        "ideal visibility anchor",
        pass,
        format!(
            "V = {:.4}% (target 99.96 +- 0.01), counts D0 {:?} D1 {:?}",
            100.0 * v,
            r.visibility.counts_d0,
            r.visibility.counts_d1
        ),
    );
    assert!(pass);
}

#[test]
fn c06_power_law_recovery() {
    // SMF-28-like equipment floor; injected a L^3
    let mut model = PhaseNoiseModel::smf28(0.1 / 125f64.powi(3)).unwrap();
    model.exponent = 3.0;
    let config = PhaseSweepConfig::default();
    let reps = 20;
    let mut hits = 0;
    let mut bs = Vec::new();
    for rep in 0..reps {
        let sweep = phase_sweep(&model, &config, derive_seed(600, rep)).unwrap();
        let (b, sb) = sweep.fit.get("b").unwrap();
        if (b - 3.0).abs() <= 0.2 {
            hits += 1;
        }
        bs.push((b, sb));
    }
    let rate = hits as f64 / reps as f64;
    let mean_b = bs.iter().map(|x| x.0).sum::<f64>() / reps as f64;
    let mean_sb = bs.iter().map(|x| x.1).sum::<f64>() / reps as f64;
    let pass = rate >= 0.9;
    line(
        6,
        "power-law recovery",
        pass,
        format!(
            "{hits}/{reps} fits with |b - 3| <= 0.2 (need 90%); mean b {mean_b:.3}, mean sigma_b {mean_sb:.3}; lengths {:?} km, {} trials/point",
            config.lengths_km, config.trials
        ),
    );
    assert!(pass);
}

#[test]
fn c07_burst_ordering() {
    let span = 10.0;
    let burst = SignalMode::Burst {
        on_time_s: 75e-6,
        off_time_s: 1400e-6,
    };
    let v = |mode| run_photon(&photon_200km(mode, span), 7).unwrap().visibility.v_mean;
    let (cw, pulsed, b) = (v(SignalMode::Cw), v(SignalMode::Pulsed), v(burst));
    let pass = cw < pulsed && pulsed < b && b >= 0.96 && cw < 0.5;
    line(
        7,
        "burst ordering at 200 km",
        pass,
        format!(
            "V(CW) {:.1}% < V(pulsed) {:.1}% < V(burst) {:.2}%; need V(burst) >= 96%, V(CW) < 50% ({span} s per setting)",
            100.0 * cw,
            100.0 * pulsed,
            100.0 * b
        ),
    );
    assert!(pass);
}

#[test]
fn c08_burst_designer() {
    let layout = ull200();
    let detector = DetectorParams::new(0.1, 7.0, 1e-6, DetectorMode::PhotonCounting).unwrap();
    let spec = PulseSpec {
        rate_hz: 10e6,
        width_s: 900e-12,
        dt_s: 1e-9,
        wavelength_nm: 1545.3,
    };
    let energy = (3.5e-3 + 7e-7) * photon_energy(1545.3) / (0.1 * layout.transmittance());
    let plan = design_burst(&layout, &spec, energy / 900e-12, &detector, 1.0).unwrap();
    let period_ok = (plan.period_s / 1.475e-3 - 1.0).abs() < 0.01;
    let on_ok = plan.on_time_s >= 50e-6 && plan.on_time_s <= 100e-6;

    // independent check through the photon pipeline: backscatter flux in
    // every window of the designed burst
    let config = PhotonRunConfig {
        detector,
        ..photon_200km(
            SignalMode::Burst {
                on_time_s: plan.on_time_s,
                off_time_s: plan.off_time_s,
            },
            1.0,
        )
    };
    let setup = config.prepare().unwrap();
    let w = setup.window;
    let (period, first, n) = w.burst.unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let centre = first + j as f64 * w.pulse_period_s;
        let lo = ((centre - 0.5 * w.window_s) / config.dt_s).round() as i64;
        let hi = ((centre + 0.5 * w.window_s) / config.dt_s).round() as i64;
        let len = setup.backscatter.len() as i64;
        let p: f64 = (lo..hi).map(|k| setup.backscatter[k.rem_euclid(len) as usize]).sum();
        worst = worst.max(p);
    }
    let worst_rate = worst / w.window_s;

    // Monte Carlo with the backscatter amplified 1e4 times, counted in the
    // windows; scaled back it must stay below the dark rate
    let gain = 1e4;
    let flux = PhotonFlux::new(config.dt_s, setup.backscatter.iter().map(|p| p * gain).collect()).unwrap();
    let quiet = DetectorParams::new(0.1, 0.0, 0.0, DetectorMode::PhotonCounting).unwrap();
    let mc_span = 20.0;
    let events = spad_detect(&flux, &quiet, DetectorId::D0, mc_span, 81).unwrap();
    let in_windows = w.count(&events) as f64;
    let windows = n as f64 * (mc_span / period).floor();
    let mc_rate = in_windows / gain / (windows * w.window_s);
    let mc_ok = mc_rate < 7.0;
    let duty = optimal_duty_two_user();

    let pass = period_ok && on_ok && worst_rate <= 7.0 * (1.0 + 1e-9) && mc_ok && duty == 1.0 / 3.0;
    line(
        8,
        "burst designer",
        pass,
        format!(
            "period {:.4} ms (1.475 +- 1%), on-time {:.1} us (in [50, 100]), worst window backscatter {worst_rate:.2}/s and Monte Carlo {mc_rate:.2}/s ({in_windows} amplified counts) vs dark 7/s, optimal duty {duty}",
            plan.period_s * 1e3,
            plan.on_time_s * 1e6
        ),
    );
    assert!(pass);
}

#[test]
fn c09_timing_recovery() {
    let mut pass = true;
    let mut details = Vec::new();
    for (rate, span) in [(1e-4, 60.0), (3.5e-3, 2.0)] {
        let config = PhotonRunConfig {
            i_max: rate,
            i_min: 0.0,
            phase_variance: 0.0,
            ..photon_200km(
                SignalMode::Burst {
                    on_time_s: 75e-6,
                    off_time_s: 1400e-6,
                },
                span,
            )
        };
        let setup = config.prepare().unwrap();
        let (period, truth, _) = setup.window.burst.unwrap();
        let prob: Vec<f64> = setup.arrival.iter().zip(&setup.backscatter).map(|(a, b)| a * rate + b).collect();
        let flux = PhotonFlux::new(config.dt_s, prob).unwrap();
        let opts = TimingOptions {
            pulse_period_s: Some(1e-7),
            ..Default::default()
        };
        let seeds = 50;
        let ok = (0..seeds)
            .filter(|&s| {
                let series = spad_detect(&flux, &config.detector, DetectorId::D0, span, derive_seed(900, s)).unwrap();
                match recover_burst_timing(&series, setup.pattern.period(), &opts) {
                    Ok(t) => {
                        let d = (t.offset_s - truth + 0.5 * period).rem_euclid(period) - 0.5 * period;
                        d.abs() < 1e-7
                    }
                    Err(_) => false,
                }
            })
            .count();
        let frac = ok as f64 / seeds as f64;
        pass &= frac >= 0.95;
        details.push(format!("{rate:e}/pulse ({span} s): {ok}/{seeds}"));
    }
    line(9, "burst timing recovery", pass, format!("{} within 100 ns (need 95%)", details.join("; ")));
    assert!(pass);
}

#[test]
fn c10_estimator_suite() {
    // phase extraction round trip on a noise-free fringe; the operating
    // variance keeps the total phase clear of the fringe extremes
    let grid = TimeGrid::new(0.0, 1e-8, 100_000).unwrap();
    let model = PhaseNoiseModel::new("test", 0.06, 1.0, 0.0, 1e6).unwrap();
    let phase = synthesize_phase(&model, 1.0, &grid, 3).unwrap();
    let params = InterferenceParams::new(1.0, 0.0, FRAC_PI_2).unwrap();
    let env = make_cw(1.0, 1, &grid).unwrap();
    let flux = interference_flux(&env, &phase, &params).unwrap();
    let back = extract_phase(&TimeSeries::new(grid, flux.d0).unwrap(), &params).unwrap();
    let rms = (phase.values.iter().zip(&back.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / phase.values.len() as f64).sqrt();
    let extract_ok = rms < 1e-6;

    // subset variance on white noise: chi-square bound at about 3.3 sigma
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let s2: f64 = 0.04;
    let white: Vec<f64> = (0..200_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); s2.sqrt() * z }).collect();
    let est = subset_variance(&white, 10_000).unwrap();
    let dof = (white.len() - est.n_subsets) as f64;
    let bound = 3.3 * (2.0f64 / dof).sqrt();
    let ratio = est.sigma2 / s2;
    let subset_ok = (ratio - 1.0).abs() < bound;

    // Parseval: one-sided density integrated over [0, fs/2]
    let fs = 1e6;
    let tg = TimeGrid::new(0.0, 1.0 / fs, 1 << 18).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = band_limited_noise(1.0, 0.5 * fs, &tg, &mut rng).unwrap();
    let var = {
        let m = noise.iter().sum::<f64>() / noise.len() as f64;
        noise.iter().map(|x| (x - m).powi(2)).sum::<f64>() / noise.len() as f64
    };
    let p = psd(&TimeSeries::new(tg, noise).unwrap(), 500.0, 0.0, 0.5 * fs).unwrap();
    let parseval = p.integrated() / var;
    let parseval_ok = (parseval - 1.0).abs() < 0.05;

    // lower-bound floor rule on the (0.0072, 0.0003) example
    let e = sagnac_core::analysis::VarianceEstimate {
        sigma2: 0.0100,
        n_subsets: 10,
        subset_size: 10_000,
        std_across_subsets: 0.0,
    };
    let floor = subtract_floor(&e, 0.0072, 0.0003);
    let floor_ok = (floor - (0.0100 - 0.0069)).abs() < 1e-15;

    let pass = extract_ok && subset_ok && parseval_ok && floor_ok;
    line(
        10,
        "estimator suite",
        pass,
        format!(
            "extract_phase rms {rms:.1e} rad (tol 1e-6); subset variance ratio {ratio:.4} (tol 1 +- {bound:.4}); Parseval ratio {parseval:.4} (tol 1 +- 0.05); floor rule 0.0100 -> {floor:.4} (expected 0.0031)"
        ),
    );
    assert!(pass);
}

#[test]
fn c11_determinism() {
    let text = r#"{
        "schema_version": 1,
        "name": "determinism",
        "layout": {"segments": [{"length_km": 200.0}]},
        "signal": {"burst": {"on_time_s": 75e-6, "off_time_s": 1400e-6}},
        "detector": {"dead_time_s": 1e-6},
        "run": {"span_s": 0.3},
        "otdr": {"length_km": 20.0, "span_s": 0.3},
        "phase_sweep": {"lengths_km": [25, 50, 75, 125], "trials": 2, "duration_s": 2e-4, "subset_size": 2000},
        "psd": {"duration_s": 0.005, "rbw_hz": 1000}
    }"#;
    let scenario = parse_scenario(text).unwrap();
    let options = RunOptions {
        seed: 3,
        seeds: 2,
        timestamps: true,
    };
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for command in [Command::Simulate, Command::AnalyzePhase, Command::FitOtdr, Command::OptimizeBurst, Command::Psd] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run(&scenario, command, a.path(), &options).unwrap();
        run(&scenario, command, b.path(), &options).unwrap();
        for f in ra.files.iter().chain(std::iter::once(&"report.json".to_string())) {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            compared += 1;
            if x != y {
                mismatched.push(format!("{}/{f}", command.name()));
            }
        }
    }
    let pass = mismatched.is_empty() && compared >= 10;
    line(
        11,
        "determinism",
        pass,
        format!("{compared} output files compared across repeated runs, {} differ {:?}", mismatched.len(), mismatched),
    );
    assert!(pass);
}

#[test]
fn phase_constants_are_exact() {
    // guards the fringe convention used by every criterion above
    let p = InterferenceParams::new(1.0, 0.0, 0.0).unwrap();
    assert_eq!(p.intensity(0.0, DetectorId::D0), 1.0);
    assert!(p.intensity(PI, DetectorId::D0).abs() < 1e-15);
}
