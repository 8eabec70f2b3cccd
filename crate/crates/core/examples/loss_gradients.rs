//! The two training losses on a three-node chain, and a finite-difference
//! check of their gradients through a linear scorer on the default graph.
//!
//! cargo run --release --example loss_gradients

use hierdetect::hierarchy::{parse_graph, LabelGraph, LabelState, ObservedLabels};
use hierdetect::inference::ScoreVector;
use hierdetect::losses::{joint_likelihood_loss, marginal_likelihood_loss, TaskWeights};
use hierdetect::model::{backward, forward, Architecture, ScorerParams};
use hierdetect::rng::stream;

fn main() -> hierdetect::Result<()> {
    let chain = parse_graph("nodes:\n0 root root\n1 a attribute\n2 l region\nedges:\nroot -> a\na -> l\n")?;
    let root_only = ObservedLabels::new(3, [(0, true)])?;
    let r = joint_likelihood_loss(&chain, &ScoreVector::new(vec![1.0, 0.0, 0.0])?, &root_only)?;
    println!("joint loss, root observed, s = (1, 0, 0): {:.9}", r.value);
    let full = ObservedLabels::full(&LabelState::from_bits(&[1, 1, 1])?);
    let unit = TaskWeights::uniform(3, 1.0)?;
    let r = marginal_likelihood_loss(&chain, &ScoreVector::zeros(3), &full, &unit)?;
    println!("marginal loss, all observed, zero scores:  {:.9} (3 ln 2 = {:.9})", r.value, 3.0 * 2f64.ln());

    let graph = LabelGraph::default_ffsc();
    let n = graph.len();
    let dim = 6;
    let mut rng = stream(1, "example");
    let params = ScorerParams::init(Architecture::Linear, dim, n, &mut rng);
    let x: Vec<f64> = (0..dim).map(|j| (j as f64 * 0.7).sin()).collect();
    // Fake sample, expression manipulation on mouth and lip; age unannotated.
    let state = LabelState::from_active(n, [0, 2, 8, 9]);
    let known = ObservedLabels::full(&state);
    let observed = ObservedLabels::new(n, known.iter().filter(|&(i, _)| i != 1))?;
    let weights = TaskWeights::new((0..n).map(|i| 0.2 + 0.1 * i as f64).collect())?;

    let loss_at = |p: &ScorerParams| -> hierdetect::Result<f64> {
        Ok(marginal_likelihood_loss(&graph, &forward(p, &x)?, &observed, &weights)?.value)
    };
    let r = marginal_likelihood_loss(&graph, &forward(&params, &x)?, &observed, &weights)?;
    let analytic = backward(&params, &x, &r.grad_scores)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let mut plus = params.clone();
        plus.values_mut()[k] += h;
        let mut minus = params.clone();
        minus.values_mut()[k] -= h;
        let fd = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
        worst = worst.max((fd - analytic[k]).abs() / (1e-8 + fd.abs().max(analytic[k].abs())));
    }
    println!("\nmarginal loss {:.6} over {} parameters; worst relative FD error {worst:.2e}", r.value, params.len());
    Ok(())
}
