//! Detection metrics (accuracy, ROC AUC) and per-cell protocol reports.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hierarchy::{LabelGraph, Tier};
use crate::inference::Head;
use crate::model::{forward, ScorerParams};
use crate::synthdata::{Protocol, Scenario, SyntheticSample};

fn check_inputs(predictions: &[f64], labels: &[bool]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            what: "labels",
            expected: predictions.len(),
            got: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Input("metric over an empty set".into()));
    }
    if predictions.iter().any(|p| p.is_nan()) {
        return Err(Error::Input("NaN prediction".into()));
    }
    Ok(())
}

/// Percentage of samples with `(prediction >= threshold) == label`.
pub fn accuracy(predictions: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_inputs(predictions, labels)?;
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| (**p >= threshold) == **l)
        .count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// Mann-Whitney AUC × 100 from average ranks; tied pairs count ½.
pub fn auc(predictions: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(predictions, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Input("AUC is undefined with a single class".into()));
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    // Twice the rank sum keeps tied average ranks integral.
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && predictions[order[j + 1]] == predictions[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share the average (i + j + 2) / 2.
        let avg2 = (i + j + 2) as u128;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank2_pos += avg2 * pos_in_tie;
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    // U = R_pos − p(p+1)/2, so 2U = rank2_pos − p(p+1).
    let u2 = rank2_pos - p * (p + 1);
    Ok(100.0 * u2 as f64 / (2 * p * q) as f64)
}

/// Which fakes a report cell covers. Real samples are in every cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellSpec {
    All,
    Attribute(usize),
    Method(u32),
}

impl CellSpec {
    fn includes(&self, s: &SyntheticSample) -> bool {
        match self {
            _ if !s.is_fake() => true,
            CellSpec::All => true,
            CellSpec::Attribute(a) => s.state.get(*a),
            CellSpec::Method(m) => s.method_id == *m,
        }
    }

    pub fn label(&self, scenario: &Scenario) -> String {
        match self {
            CellSpec::All => "overall".into(),
            CellSpec::Attribute(a) => scenario.graph.node(*a).name.clone(),
            CellSpec::Method(m) => scenario
                .method(*m)
                .map(|s| s.name.clone())
                .unwrap_or_else(|| format!("method_{m}")),
        }
    }
}

/// The cells a protocol reports on: the held-out material, or every
/// attribute for the intra-dataset protocol. `overall` is added by
/// [`evaluate`].
pub fn protocol_cells(graph: &LabelGraph, protocol: &Protocol) -> Vec<CellSpec> {
    match protocol {
        Protocol::Intra => graph.ids_with_tier(Tier::Attribute).map(CellSpec::Attribute).collect(),
        Protocol::P1 { methods } => methods.iter().map(|&m| CellSpec::Method(m)).collect(),
        Protocol::P2 { attribute } => vec![CellSpec::Attribute(*attribute)],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub name: String,
    /// `None` when the cell is empty.
    pub acc: Option<f64>,
    /// `None` when the cell lacks either class.
    pub auc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl CellResult {
    pub fn from_predictions(name: impl Into<String>, predictions: &[f64], labels: &[bool]) -> Self {
        let n_pos = labels.iter().filter(|&&l| l).count();
        Self {
            name: name.into(),
            acc: accuracy(predictions, labels, 0.5).ok(),
            auc: auc(predictions, labels).ok(),
            n_pos,
            n_neg: labels.len() - n_pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub protocol: String,
    pub cells: Vec<CellResult>,
    pub overall: CellResult,
}

/// Root-task probability for every sample.
pub fn primary_predictions(
    head: Head,
    graph: &LabelGraph,
    params: &ScorerParams,
    samples: &[&SyntheticSample],
) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let scores = forward(params, &s.features)?;
            head.primary_probability(graph, &scores)
        })
        .collect()
}

/// Scores `samples` and reports Acc/AUC on each cell plus the overall set.
pub fn evaluate(
    head: Head,
    params: &ScorerParams,
    scenario: &Scenario,
    protocol_name: &str,
    samples: &[&SyntheticSample],
    cells: &[CellSpec],
) -> Result<EvalReport> {
    let preds = primary_predictions(head, &scenario.graph, params, samples)?;
    let cell = |spec: &CellSpec| {
        let (p, l): (Vec<f64>, Vec<bool>) = samples
            .iter()
            .zip(&preds)
            .filter(|(s, _)| spec.includes(s))
            .map(|(s, &p)| (p, s.is_fake()))
            .unzip();
        CellResult::from_predictions(spec.label(scenario), &p, &l)
    };
    Ok(EvalReport {
        protocol: protocol_name.to_string(),
        cells: cells.iter().map(cell).collect(),
        overall: cell(&CellSpec::All),
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

impl EvalReport {
    fn rows(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().chain(std::iter::once(&self.overall))
    }

    /// Aligned plain-text table. Cells that cannot be scored show `n/a`.
    pub fn to_text(&self) -> String {
        let width = self.rows().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("protocol: {}\n", self.protocol);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>6}  {:>6}", "cell", "acc", "auc", "n_pos", "n_neg");
        for c in self.rows() {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>8}  {:>6}  {:>6}",
                c.name,
                fmt_metric(c.acc),
                fmt_metric(c.auc),
                c.n_pos,
                c.n_neg
            );
        }
        out
    }

    /// `protocol,cell,acc,auc,n_pos,n_neg` rows; unscorable metrics are
    /// written as `not_evaluable`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("protocol,cell,acc,auc,n_pos,n_neg\n");
        let m = |v: Option<f64>| v.map_or_else(|| "not_evaluable".to_string(), |x| format!("{x:?}"));
        for c in self.rows() {
            let _ = writeln!(out, "{},{},{},{},{},{}", self.protocol, c.name, m(c.acc), m(c.auc), c.n_pos, c.n_neg);
        }
        out
    }
}
