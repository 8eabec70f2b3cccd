//! Training objectives and their exact score gradients.
//!
//! Both hierarchical losses are log-partition differences, so their
//! gradients are differences of (conditioned) expectations of the state bits:
//! `∂/∂f_i [log Z − log Z_evidence] = E[y_i] − E[y_i | evidence]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::{LabelGraph, ObservedLabels};
use crate::inference::{
    bit_sums, joint, log_sum_exp, sigmoid, state_log_weights, JointDistribution, ScoreVector, PROB_DOMAIN_FLOOR,
};

/// Strictly positive per-node loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights(Vec<f64>);

impl TaskWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Input(format!(
                "task weight {i} must be positive and finite, got {}",
                lambda[i]
            )));
        }
        Ok(Self(lambda))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// ∂loss/∂score_i.
    pub grad_scores: Vec<f64>,
}

impl LossResult {
    fn zero(n: usize) -> Self {
        Self {
            value: 0.0,
            grad_scores: vec![0.0; n],
        }
    }
}

fn check_inputs(graph: &LabelGraph, observed: &ObservedLabels) -> Result<()> {
    if observed.len() != graph.len() {
        return Err(Error::Dimension {
            what: "observed labels",
            expected: graph.len(),
            got: observed.len(),
        });
    }
    Ok(())
}

/// Negative log-likelihood of the observed labels with every unobserved
/// label marginalized out: `−log Σ_{y: y_I = observed} p(y | x)`.
pub fn joint_likelihood_loss(
    graph: &LabelGraph,
    scores: &ScoreVector,
    observed: &ObservedLabels,
) -> Result<LossResult> {
    check_inputs(graph, observed)?;
    let dist = joint(graph, scores)?;
    if observed.is_empty() {
        return Ok(LossResult::zero(graph.len()));
    }
    let value = -dist.log_evidence(observed)?;
    let cond = dist.conditional_marginals(observed)?;
    let grad_scores = dist.marginals().iter().zip(cond).map(|(m, c)| m - c).collect();
    Ok(LossResult {
        value: value.max(0.0),
        grad_scores,
    })
}

/// `(log mass, normalized mass when representable)` for one observed node.
type NodeMass = Option<(f64, Option<f64>)>;

/// Per observed node: `log Σ_{y: y_i = v_i} exp(w(y))` and, when it is not
/// vanishingly small, the normalized mass `p(y_i = v_i | x)`.
fn single_node_log_masses(
    dist: &JointDistribution<'_>,
    observed: &ObservedLabels,
) -> Result<Vec<NodeMass>> {
    let n = dist.graph().len();
    let states = dist.states();
    let (ones, zeros) = bit_sums(states, dist.probs(), n);
    let mut out = vec![None; n];
    for (i, v) in observed.iter() {
        let p = if v { ones[i] } else { zeros[i] };
        if p >= PROB_DOMAIN_FLOOR {
            out[i] = Some((dist.log_z() + p.ln(), Some(p)));
            continue;
        }
        let bit = 1u64 << i;
        let want = if v { bit } else { 0 };
        let lse = log_sum_exp(
            states
                .iter()
                .zip(dist.log_weights())
                .filter(|(&m, _)| m & bit == want)
                .map(|(_, &w)| w),
        );
        if lse == f64::NEG_INFINITY {
            return Err(Error::InfeasibleEvidence);
        }
        out[i] = Some((lse, None));
    }
    Ok(out)
}

/// Unweighted per-node negative log marginal likelihoods
/// `−log p(y_i = observed_i | x)`; zero for unobserved nodes.
pub fn task_nlls(
    graph: &LabelGraph,
    scores: &ScoreVector,
    observed: &ObservedLabels,
) -> Result<Vec<f64>> {
    check_inputs(graph, observed)?;
    let dist = joint(graph, scores)?;
    let masses = single_node_log_masses(&dist, observed)?;
    Ok(masses
        .iter()
        .map(|m| m.map_or(0.0, |(lse, _)| (dist.log_z() - lse).max(0.0)))
        .collect())
}

/// Weighted sum of per-node negative log marginal likelihoods over the
/// observed nodes.
pub fn marginal_likelihood_loss(
    graph: &LabelGraph,
    scores: &ScoreVector,
    observed: &ObservedLabels,
    weights: &TaskWeights,
) -> Result<LossResult> {
    check_inputs(graph, observed)?;
    if weights.len() != graph.len() {
        return Err(Error::Dimension {
            what: "task weights",
            expected: graph.len(),
            got: weights.len(),
        });
    }
    let dist = joint(graph, scores)?;
    let n = graph.len();
    if observed.is_empty() {
        return Ok(LossResult::zero(n));
    }
    let lambda = weights.as_slice();
    let masses = single_node_log_masses(&dist, observed)?;
    let log_z = dist.log_z();

    let mut value = 0.0;
    let mut total_weight = 0.0;
    let mut obs_terms = Vec::with_capacity(observed.count());
    for (i, v) in observed.iter() {
        let (lse, mass) = masses[i].unwrap();
        value += lambda[i] * (log_z - lse).max(0.0);
        total_weight += lambda[i];
        let bit = 1u64 << i;
        obs_terms.push((bit, if v { bit } else { 0 }, lambda[i], lse, mass.map(|p| lambda[i] / p)));
    }

    // grad_j = Σ_s y_j(s) coef_s with
    // coef_s = p(s) Σλ − Σ_{i: s_i = v_i} λ_i p(s | y_i = v_i).
    let states = dist.states();
    let coef: Vec<f64> = if obs_terms.iter().all(|t| t.4.is_some()) {
        // With r_i = λ_i / p(y_i = v_i), the matched sum is affine in the
        // state bits: C0 + Σ_i a_i s_i, a_i = ±r_i.
        let mut c0 = 0.0;
        let mut a = vec![0.0; n];
        for &(bit, want, _, _, r) in &obs_terms {
            let r = r.unwrap();
            let i = bit.trailing_zeros() as usize;
            if want == 0 {
                c0 += r;
                a[i] = -r;
            } else {
                a[i] = r;
            }
        }
        let matched = state_log_weights(states, &a);
        dist.probs()
            .iter()
            .zip(matched)
            .map(|(&p, m)| p * (total_weight - c0 - m))
            .collect()
    } else {
        states
            .iter()
            .zip(dist.log_weights())
            .zip(dist.probs())
            .map(|((&m, &w), &p)| {
                let mut coef = p * total_weight;
                for &(bit, want, l, lse, scaled) in &obs_terms {
                    if m & bit == want {
                        coef -= match scaled {
                            Some(r) => p * r,
                            None => l * (w - lse).exp(),
                        };
                    }
                }
                coef
            })
            .collect()
    };
    let grad = bit_sums(states, &coef, n).0;
    Ok(LossResult {
        value,
        grad_scores: grad,
    })
}

/// Weighted per-node logistic losses that ignore the hierarchy entirely.
pub fn independent_logistic_loss(
    scores: &ScoreVector,
    observed: &ObservedLabels,
    weights: &TaskWeights,
) -> Result<LossResult> {
    let n = scores.len();
    if observed.len() != n || weights.len() != n {
        return Err(Error::Dimension {
            what: "independent loss inputs",
            expected: n,
            got: if observed.len() != n { observed.len() } else { weights.len() },
        });
    }
    let lambda = weights.as_slice();
    let mut out = LossResult::zero(n);
    for (i, v) in observed.iter() {
        let f = scores[i];
        let (target, margin) = if v { (1.0, -f) } else { (0.0, f) };
        out.value += lambda[i] * softplus(margin);
        out.grad_scores[i] = lambda[i] * (sigmoid(f) - target);
    }
    Ok(out)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Which per-sample objective a batch averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Marginalized joint likelihood; weights are ignored.
    Joint,
    /// Weighted marginal likelihood.
    Marginal,
    /// Weighted independent per-node logistic losses.
    Independent,
    /// Root-node negative log marginal likelihood only; weights are ignored.
    Primary,
}

pub fn sample_loss(
    kind: LossKind,
    graph: &LabelGraph,
    scores: &ScoreVector,
    observed: &ObservedLabels,
    weights: &TaskWeights,
) -> Result<LossResult> {
    match kind {
        LossKind::Joint => joint_likelihood_loss(graph, scores, observed),
        LossKind::Marginal => marginal_likelihood_loss(graph, scores, observed, weights),
        LossKind::Independent => independent_logistic_loss(scores, observed, weights),
        LossKind::Primary => {
            let unit = TaskWeights::uniform(graph.len(), 1.0)?;
            marginal_likelihood_loss(graph, scores, &observed.restrict_to(0), &unit)
        }
    }
}

/// Mean loss over a batch together with per-sample score gradients, each
/// already scaled by `1/K` so they can be back-propagated and summed.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub grad_scores: Vec<Vec<f64>>,
}

impl BatchLoss {
    /// Gradient of the batch loss w.r.t. a shared score vector.
    pub fn mean_grad(&self) -> Vec<f64> {
        let n = self.grad_scores.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for g in &self.grad_scores {
            for (o, v) in out.iter_mut().zip(g) {
                *o += v;
            }
        }
        out
    }
}

/// `(1/K) Σ_k loss_k`. Samples are evaluated in parallel and reduced in
/// batch order, so the result is bitwise independent of thread count.
pub fn batch_loss(
    kind: LossKind,
    graph: &LabelGraph,
    batch: &[(ScoreVector, ObservedLabels)],
    weights: &TaskWeights,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::Input("batch is empty".into()));
    }
    let per_sample: Vec<LossResult> = batch
        .par_iter()
        .map(|(s, o)| sample_loss(kind, graph, s, o, weights))
        .collect::<Result<_>>()?;
    let k = batch.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(per_sample.len());
    for r in per_sample {
        value += r.value;
        grads.push(r.grad_scores.into_iter().map(|g| g / k).collect());
    }
    Ok(BatchLoss {
        value: value / k,
        grad_scores: grads,
    })
}

/// Batch-mean per-node negative log marginal likelihoods (`1/K` over all
/// samples, unobserved entries contributing zero).
pub fn batch_task_nlls(
    graph: &LabelGraph,
    batch: &[(ScoreVector, ObservedLabels)],
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Input("batch is empty".into()));
    }
    let per_sample: Vec<Vec<f64>> = batch
        .par_iter()
        .map(|(s, o)| task_nlls(graph, s, o))
        .collect::<Result<_>>()?;
    let k = batch.len() as f64;
    let mut out = vec![0.0; graph.len()];
    for row in per_sample {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Ok(out.into_iter().map(|v| v / k).collect())
}
