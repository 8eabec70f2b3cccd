//! Exact inference: the joint over legal states, per-node marginals, and
//! marginals conditioned on partial evidence.
//!
//! cargo run --release --example inference_marginals

use hierdetect::hierarchy::{LabelGraph, ObservedLabels};
use hierdetect::inference::{joint, predict, ScoreVector};

fn main() -> hierdetect::Result<()> {
    let graph = LabelGraph::default_ffsc();
    let names: Vec<&str> = graph.nodes().iter().map(|n| n.name.as_str()).collect();

    // Zero scores: every legal state is equally likely, so the root is
    // active in all but the all-real state.
    let zero = predict(&graph, &ScoreVector::zeros(graph.len()))?;
    println!("zero scores: p(face) = {:.6} (1953/1954 = {:.6})", zero[0], 1953.0 / 1954.0);

    // A detector that sees strong mouth and lip artifacts but little else.
    let mut s = vec![-2.0; graph.len()];
    s[0] = -1.0;
    s[graph.node_id("expression").unwrap()] = 0.5;
    s[graph.node_id("mouth").unwrap()] = 3.0;
    s[graph.node_id("lip").unwrap()] = 2.0;
    let scores = ScoreVector::new(s)?;
    let dist = joint(&graph, &scores)?;
    println!("log Z = {:.6}, {} states", dist.log_z(), dist.states().len());

    let marginals = dist.marginals();
    let evidence = ObservedLabels::new(graph.len(), [(graph.node_id("expression").unwrap(), false)])?;
    let cond = dist.conditional_marginals(&evidence)?;
    println!("\n{:<12} {:>10} {:>16}", "node", "p(y=1)", "p(y=1 | expr=0)");
    for (i, name) in names.iter().enumerate() {
        println!("{name:<12} {:>10.4} {:>16.4}", marginals[i], cond[i]);
    }
    Ok(())
}
