use std::collections::BTreeSet;

use proptest::prelude::*;

use hierdetect::bilevel::{train_with, BilevelConfig, Strategy};
use hierdetect::eval::{auc, primary_predictions};
use hierdetect::model::Architecture;
use hierdetect::synthdata::{
    default_ffsc_scenario, generate, make_split, Protocol, Scenario, ScenarioSpec, SyntheticSample, DEFAULT_SCENARIO_CONFIG,
};
use hierdetect::hierarchy::LabelGraph;

fn with_noise(sigma: f64) -> Scenario {
    let text = DEFAULT_SCENARIO_CONFIG
        .replace("noise_sigma = 1.0", &format!("noise_sigma = {sigma:?}"));
    ScenarioSpec::parse(&text).unwrap().build(LabelGraph::default_ffsc()).unwrap()
}

fn training_auc(scenario: &Scenario, seed: u64) -> f64 {
    let data = generate(scenario, 300, 25, seed).unwrap();
    let cfg = BilevelConfig { seed, ..BilevelConfig::default() };
    let out = train_with(Strategy::Independent, &scenario.graph, Architecture::Linear, &data, &cfg).unwrap();
    let refs: Vec<&SyntheticSample> = data.iter().collect();
    let preds = primary_predictions(Strategy::Independent.head(), &scenario.graph, &out.params, &refs).unwrap();
    let labels: Vec<bool> = data.iter().map(SyntheticSample::is_fake).collect();
    auc(&preds, &labels).unwrap()
}

#[test]
fn more_noise_never_helps() {
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    for seed in 0..3 {
        let aucs: Vec<f64> = grid.iter().map(|&s| training_auc(&with_noise(s), seed)).collect();
        for w in aucs.windows(2) {
            assert!(w[1] <= w[0] + 0.5, "seed {seed}: {aucs:?}");
        }
        assert!(aucs[0] > aucs[4] + 5.0, "seed {seed}: {aucs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splits_are_identity_disjoint(seed in 0u64..1000, protocol in 0usize..3, held in 0usize..5) {
        let scenario = default_ffsc_scenario();
        let graph = &scenario.graph;
        let data = generate(&scenario, 120, 6, seed).unwrap();
        let protocol = match protocol {
            0 => Protocol::Intra,
            1 => Protocol::P1 { methods: vec![(held as u32) * 2 + 1] },
            _ => Protocol::P2 { attribute: held + 1 },
        };
        let plan = make_split(graph, &data, protocol.clone(), [7.8, 1.1, 1.1], seed).unwrap();
        let ids = |idx: &[usize]| idx.iter().map(|&i| data[i].identity_id).collect::<BTreeSet<_>>();
        let (tr, va, te) = (ids(&plan.train), ids(&plan.val), ids(&plan.test));
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        for &i in &plan.train {
            let s = &data[i];
            match &protocol {
                Protocol::P1 { methods } => prop_assert!(!methods.contains(&s.method_id)),
                Protocol::P2 { attribute } => prop_assert!(!s.state.get(*attribute)),
                Protocol::Intra => {}
            }
        }
        for s in &data {
            prop_assert!(graph.is_legal_mask(s.state.mask()));
            prop_assert!(s.observed.matches(s.state.mask()));
            prop_assert_eq!(s.is_fake(), s.state.get(0));
        }
    }
}
