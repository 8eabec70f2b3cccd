//! Bi-level training on the default synthetic scenario: watch the root
//! weight pull away from the auxiliary weights while the validation root
//! loss falls.
//!
//! cargo run --release --example bilevel_training -- [seed]

use hierdetect::bilevel::{mean_primary_loss, train, BilevelConfig};
use hierdetect::inference::Head;
use hierdetect::model::Architecture;
use hierdetect::synthdata::{default_ffsc_scenario, generate, make_split, Protocol, SplitPlan, DEFAULT_RATIOS};

fn main() -> hierdetect::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let scenario = default_ffsc_scenario();
    let graph = &scenario.graph;
    let data = generate(&scenario, 600, 60, seed)?;
    let plan = make_split(graph, &data, Protocol::Intra, DEFAULT_RATIOS, seed)?;
    let train_set: Vec<_> = SplitPlan::select(&data, &plan.train).into_iter().cloned().collect();
    let val = SplitPlan::select(&data, &plan.val);

    let config = BilevelConfig {
        seed,
        ..BilevelConfig::default()
    };
    let out = train(graph, Architecture::Linear, &train_set, &config)?;

    println!("{:>5} {:>10} {:>10} {:>8} {:>8} {:>8}", "step", "train", "val_root", "λ_face", "λ_attr", "λ_reg");
    let every = (out.trace.records.len() / 10).max(1);
    for r in out.trace.records.iter().step_by(every) {
        let attr = r.lambda[1..6].iter().sum::<f64>() / 5.0;
        let reg = r.lambda[6..].iter().sum::<f64>() / 6.0;
        println!(
            "{:>5} {:>10.4} {:>10.4} {:>8.3} {:>8.3} {:>8.3}",
            r.step, r.train_loss, r.val_primary_loss, r.lambda[0], attr, reg
        );
    }
    let val_loss = mean_primary_loss(Head::Hierarchical, graph, &out.params, &val)?;
    println!("\nheld-out validation root loss {val_loss:.4}");
    for (node, l) in graph.nodes().iter().zip(out.weights.as_slice()) {
        println!("  λ[{:<10}] = {l:.3}", node.name);
    }
    Ok(())
}
