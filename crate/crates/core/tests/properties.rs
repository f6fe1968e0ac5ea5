use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use sagnac_core::analysis::extract_phase;
use sagnac_core::detection::{interference_flux, InterferenceParams};
use sagnac_core::fiber::{FiberSegment, LoopLayout, LossPoint};
use sagnac_core::noise::{synthesize_phase, PhaseNoiseModel};
use sagnac_core::scenario::parse_scenario;
use sagnac_core::signal::make_cw;
use sagnac_core::units::{GroupVelocity, TimeGrid, TimeSeries};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extraction_inverts_the_fringe(variance in 0.001f64..0.1, seed in 0u64..1000) {
        let grid = TimeGrid::new(0.0, 1e-8, 20_000).unwrap();
        let model = PhaseNoiseModel::new("p", variance, 1.0, 0.0, 1e6).unwrap();
        let phase = synthesize_phase(&model, 1.0, &grid, seed).unwrap();
        let params = InterferenceParams::new(1.0, 0.0, FRAC_PI_2).unwrap();
        let flux = interference_flux(&make_cw(1.0, 1, &grid).unwrap(), &phase, &params).unwrap();
        let back = extract_phase(&TimeSeries::new(grid, flux.d0).unwrap(), &params).unwrap();
        let worst = phase.values.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn loss_is_additive_over_segments(a in 1.0f64..100.0, b in 1.0f64..100.0, lp in 0.0f64..3.0, at in 0.0f64..1.0) {
        let segs = vec![FiberSegment::smf28(a).unwrap(), FiberSegment::smf28_ull(b).unwrap()];
        let layout = LoopLayout::new(segs, vec![LossPoint { position_km: at * (a + b), loss_db: lp }], GroupVelocity::default()).unwrap();
        let expected = 0.202 * a + 0.159 * b + lp;
        prop_assert!((layout.total_loss_db() - expected).abs() < 1e-9);
        prop_assert!((layout.transmittance() - 10f64.powf(-expected / 10.0)).abs() < 1e-12);
    }

    #[test]
    fn scenario_hash_ignores_name_and_formatting(name in "[a-z]{1,12}", span in 0.01f64..100.0) {
        let a = format!(r#"{{"schema_version": 1, "name": "{name}", "layout": {{"segments": [{{"length_km": 10}}]}}, "run": {{"span_s": {span}}}}}"#);
        let b = format!("{{\n  \"run\": {{ \"span_s\": {span} }},\n  \"name\": \"other\",\n  \"schema_version\": 1,\n  \"layout\": {{\"segments\": [{{\"length_km\": 10.0}}]}}\n}}");
        let (sa, sb) = (parse_scenario(&a).unwrap(), parse_scenario(&b).unwrap());
        prop_assert_eq!(sa.hash(), sb.hash());
    }
}
