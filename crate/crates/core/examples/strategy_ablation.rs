//! Loss-weighting ablation on the intra-dataset split: every strategy
//! trains on the same data and minibatch schedule, and is scored by its
//! final validation root-task loss and test AUC.
//!
//! cargo run --release --example strategy_ablation -- [seeds]

use hierdetect::bilevel::{mean_primary_loss, train_with, BilevelConfig, Strategy};
use hierdetect::eval::{evaluate, protocol_cells};
use hierdetect::model::Architecture;
use hierdetect::synthdata::{default_ffsc_scenario, generate, make_split, Protocol, SplitPlan, DEFAULT_RATIOS};

fn main() -> hierdetect::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let scenario = default_ffsc_scenario();
    let graph = &scenario.graph;
    let strategies = [
        Strategy::Bilevel,
        Strategy::JointLikelihood,
        Strategy::FixedEqual,
        Strategy::Dwa { temperature: 2.0 },
        Strategy::Independent,
    ];
    let mut val_loss = vec![0.0; strategies.len()];
    let mut test_auc = vec![0.0; strategies.len()];
    for seed in 0..seeds {
        let data = generate(&scenario, 600, 60, seed)?;
        let plan = make_split(graph, &data, Protocol::Intra, DEFAULT_RATIOS, seed)?;
        let train: Vec<_> = SplitPlan::select(&data, &plan.train).into_iter().cloned().collect();
        let val: Vec<_> = SplitPlan::select(&data, &plan.val).into_iter().cloned().collect();
        let test = SplitPlan::select(&data, &plan.test);
        let cells = protocol_cells(graph, &Protocol::Intra);
        let cfg = BilevelConfig { seed, ..BilevelConfig::default() };
        for (k, strategy) in strategies.iter().enumerate() {
            let head = strategy.head();
            let out = train_with(strategy.clone(), graph, Architecture::Linear, &train, &cfg)?;
            val_loss[k] += mean_primary_loss(head, graph, &out.params, &val)? / seeds as f64;
            let report = evaluate(head, &out.params, &scenario, "intra", &test, &cells)?;
            test_auc[k] += report.overall.auc.unwrap_or(f64::NAN) / seeds as f64;
        }
    }
    println!("{:<12} {:>14} {:>10}", "strategy", "val_root_nll", "test_auc");
    for (k, s) in strategies.iter().enumerate() {
        println!("{:<12} {:>14.4} {:>10.2}", s.name(), val_loss[k], test_auc[k]);
    }
    Ok(())
}
