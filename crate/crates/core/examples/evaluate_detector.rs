//! Train a hierarchical detector with one manipulation method held out
//! and report accuracy and AUC per cell, next to a threshold sweep.
//!
//! cargo run --release --example evaluate_detector

use hierdetect::bilevel::{train, BilevelConfig};
use hierdetect::eval::{accuracy, auc, evaluate, primary_predictions, protocol_cells};
use hierdetect::inference::Head;
use hierdetect::model::Architecture;
use hierdetect::synthdata::{default_ffsc_scenario, generate, make_split, Protocol, SplitPlan, DEFAULT_RATIOS};

fn main() -> hierdetect::Result<()> {
    let scenario = default_ffsc_scenario();
    let graph = &scenario.graph;
    let data = generate(&scenario, 600, 60, 11)?;
    let protocol = Protocol::parse("p1", Some("identity_swap_b"), &scenario)?;
    let plan = make_split(graph, &data, protocol, DEFAULT_RATIOS, 11)?;
    let train_set: Vec<_> = SplitPlan::select(&data, &plan.train).into_iter().cloned().collect();
    let test = SplitPlan::select(&data, &plan.test);

    let out = train(graph, Architecture::Linear, &train_set, &BilevelConfig { seed: 11, ..Default::default() })?;
    let cells = protocol_cells(graph, &plan.protocol);
    let report = evaluate(Head::Hierarchical, &out.params, &scenario, "p1", &test, &cells)?;
    print!("{}", report.to_text());

    let preds = primary_predictions(Head::Hierarchical, graph, &out.params, &test)?;
    let labels: Vec<bool> = test.iter().map(|s| s.is_fake()).collect();
    println!("\noverall AUC {:.2}", auc(&preds, &labels)?);
    for t in [0.3, 0.5, 0.7, 0.9] {
        println!("accuracy at threshold {t:.1}: {:.2}", accuracy(&preds, &labels, t)?);
    }
    Ok(())
}
