//! Exact inference over the legal state space.
//!
//! The unnormalized mass of a legal state is `exp(Σ_{i: y_i = 1} score_i)`;
//! illegal states carry no mass. Normalization runs in the log domain, so
//! scores up to several hundred in magnitude are safe.

use crate::error::{Error, Result};
use crate::hierarchy::{LabelGraph, ObservedLabels};

/// Raw per-node confidences (log-potentials), one per graph node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("score {i} is not finite ({})", scores[i])));
        }
        Ok(Self(scores))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
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

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ScoreVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Below this normalized mass, sums are redone in the log domain.
pub(crate) const PROB_DOMAIN_FLOOR: f64 = 1e-200;

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `Σ_{i active} scores[i]` for every state, via per-byte partial-sum tables.
pub(crate) fn state_log_weights(states: &[u64], scores: &[f64]) -> Vec<f64> {
    let chunks = scores.len().div_ceil(8);
    let mut tables = vec![0.0f64; chunks * 256];
    for c in 0..chunks {
        let t = &mut tables[c * 256..(c + 1) * 256];
        for b in 1..256usize {
            let low = b.trailing_zeros() as usize;
            let i = c * 8 + low;
            t[b] = t[b & (b - 1)] + scores.get(i).copied().unwrap_or(0.0);
        }
    }
    states
        .iter()
        .map(|&m| {
            let mut acc = 0.0;
            for c in 0..chunks {
                acc += tables[c * 256 + ((m >> (8 * c)) & 0xff) as usize];
            }
            acc
        })
        .collect()
}

/// For each node i: `(Σ_{s: s_i = 1} v_s, Σ_{s: s_i = 0} v_s)`, accumulated
/// through per-byte histograms of the state masks.
pub(crate) fn bit_sums(states: &[u64], values: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let chunks = n.div_ceil(8);
    let mut hist = vec![0.0f64; chunks * 256];
    for (&m, &v) in states.iter().zip(values) {
        for c in 0..chunks {
            hist[c * 256 + ((m >> (8 * c)) & 0xff) as usize] += v;
        }
    }
    let mut ones = vec![0.0; n];
    let mut zeros = vec![0.0; n];
    for c in 0..chunks {
        let h = &hist[c * 256..(c + 1) * 256];
        for k in 0..8.min(n - 8 * c) {
            let (mut on, mut off) = (0.0, 0.0);
            for (b, &x) in h.iter().enumerate() {
                if b >> k & 1 == 1 {
                    on += x;
                } else {
                    off += x;
                }
            }
            ones[8 * c + k] = on;
            zeros[8 * c + k] = off;
        }
    }
    (ones, zeros)
}

/// `p(y | x)` over the legal states of a graph.
#[derive(Debug, Clone)]
pub struct JointDistribution<'g> {
    graph: &'g LabelGraph,
    states: &'g [u64],
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    log_z: f64,
}

impl<'g> JointDistribution<'g> {
    pub fn graph(&self) -> &'g LabelGraph {
        self.graph
    }

    /// Legal states (bitmasks) aligned with [`JointDistribution::probs`].
    pub fn states(&self) -> &'g [u64] {
        self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Unnormalized log-mass of each legal state.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    fn check_node(&self, node_id: usize) -> Result<()> {
        if node_id >= self.graph.len() {
            return Err(Error::Input(format!(
                "node {node_id} out of range (N = {})",
                self.graph.len()
            )));
        }
        Ok(())
    }

    fn check_observed(&self, observed: &ObservedLabels) -> Result<()> {
        if observed.len() != self.graph.len() {
            return Err(Error::Dimension {
                what: "observed labels",
                expected: self.graph.len(),
                got: observed.len(),
            });
        }
        Ok(())
    }

    /// `p(y_i = 1 | x)`.
    pub fn marginal(&self, node_id: usize) -> Result<f64> {
        self.check_node(node_id)?;
        let bit = 1u64 << node_id;
        Ok(self
            .states
            .iter()
            .zip(&self.probs)
            .filter(|(&m, _)| m & bit != 0)
            .map(|(_, &p)| p)
            .sum())
    }

    /// All N marginals in one pass.
    pub fn marginals(&self) -> Vec<f64> {
        bit_sums(self.states, &self.probs, self.graph.len()).0
    }

    /// `log Σ_{y legal, y_I = observed} p(y | x)`. Zero for empty evidence.
    pub fn log_evidence(&self, observed: &ObservedLabels) -> Result<f64> {
        self.check_observed(observed)?;
        let lse = self.evidence_log_mass(observed)?;
        Ok(lse - self.log_z)
    }

    /// Log-mass of the states matching `observed` and, when that mass is
    /// not vanishingly small relative to Z, its normalized value.
    fn evidence_mass(&self, observed: &ObservedLabels) -> Result<(f64, Option<f64>)> {
        let p: f64 = self
            .states
            .iter()
            .zip(&self.probs)
            .filter(|(&m, _)| observed.matches(m))
            .map(|(_, &p)| p)
            .sum();
        if p >= PROB_DOMAIN_FLOOR {
            return Ok((self.log_z + p.ln(), Some(p)));
        }
        let matching = self
            .states
            .iter()
            .zip(&self.log_weights)
            .filter(|(&m, _)| observed.matches(m))
            .map(|(_, &w)| w);
        let lse = log_sum_exp(matching);
        if lse == f64::NEG_INFINITY {
            return Err(Error::InfeasibleEvidence);
        }
        Ok((lse, None))
    }

    fn evidence_log_mass(&self, observed: &ObservedLabels) -> Result<f64> {
        Ok(self.evidence_mass(observed)?.0)
    }

    /// `E[y | y_I = observed, x]` for every node.
    pub fn conditional_marginals(&self, observed: &ObservedLabels) -> Result<Vec<f64>> {
        self.check_observed(observed)?;
        let (lse, mass) = self.evidence_mass(observed)?;
        let mut out = vec![0.0; self.graph.len()];
        for ((&m, &w), &p) in self.states.iter().zip(&self.log_weights).zip(&self.probs) {
            if !observed.matches(m) {
                continue;
            }
            let q = match mass {
                Some(z) => p / z,
                None => (w - lse).exp(),
            };
            let mut rest = m;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                out[i] += q;
            }
        }
        Ok(out)
    }

    /// `p(y_i = 1 | y_I = observed, x)`.
    pub fn conditional_marginal(&self, observed: &ObservedLabels, node_id: usize) -> Result<f64> {
        self.check_node(node_id)?;
        Ok(self.conditional_marginals(observed)?[node_id])
    }
}

/// Normalized joint over the legal states for one score vector.
pub fn joint<'g>(graph: &'g LabelGraph, scores: &ScoreVector) -> Result<JointDistribution<'g>> {
    if scores.len() != graph.len() {
        return Err(Error::Dimension {
            what: "score vector",
            expected: graph.len(),
            got: scores.len(),
        });
    }
    let states = graph.legal_states()?;
    let s = scores.as_slice();
    let log_weights = state_log_weights(states, s);
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    let log_z = max + total.ln();
    for p in &mut probs {
        *p /= total;
    }
    Ok(JointDistribution {
        graph,
        states,
        log_weights,
        probs,
        log_z,
    })
}

pub fn marginal(dist: &JointDistribution<'_>, node_id: usize) -> Result<f64> {
    dist.marginal(node_id)
}

pub fn conditional_marginal(
    dist: &JointDistribution<'_>,
    observed: &ObservedLabels,
    node_id: usize,
) -> Result<f64> {
    dist.conditional_marginal(observed, node_id)
}

/// All node marginals, indexed by node id. The primary verdict is
/// `marginals[0] >= 0.5`.
pub fn predict(graph: &LabelGraph, scores: &ScoreVector) -> Result<Vec<f64>> {
    Ok(joint(graph, scores)?.marginals())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How scores are decoded into per-node probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Exact marginals of the hierarchical joint.
    Hierarchical,
    /// Per-node sigmoids, ignoring the hierarchy.
    Independent,
}

impl Head {
    pub fn code(self) -> u8 {
        match self {
            Head::Hierarchical => 0,
            Head::Independent => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Head::Hierarchical),
            1 => Some(Head::Independent),
            _ => None,
        }
    }

    pub fn node_probabilities(self, graph: &LabelGraph, scores: &ScoreVector) -> Result<Vec<f64>> {
        match self {
            Head::Hierarchical => predict(graph, scores),
            Head::Independent => {
                if scores.len() != graph.len() {
                    return Err(Error::Dimension {
                        what: "score vector",
                        expected: graph.len(),
                        got: scores.len(),
                    });
                }
                Ok(scores.as_slice().iter().map(|&s| sigmoid(s)).collect())
            }
        }
    }

    pub fn primary_probability(self, graph: &LabelGraph, scores: &ScoreVector) -> Result<f64> {
        match self {
            Head::Hierarchical => joint(graph, scores)?.marginal(0),
            Head::Independent => Ok(sigmoid(scores[0])),
        }
    }
}
