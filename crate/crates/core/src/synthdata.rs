//! Synthetic labeled datasets with the structure of a semantics-annotated
//! forgery corpus: identities with real samples, manipulation methods that
//! alter a legal subset of attributes and regions, per-method partial
//! annotation, and identity-disjoint protocol splits.
//!
//! A fake feature vector is its identity's base vector plus the signature of
//! every active node, plus a method-specific signature, plus Gaussian noise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::bilevel::LabeledExample;
use crate::error::{Error, Result};
use crate::hierarchy::{LabelGraph, LabelState, ObservedLabels, Tier};
use crate::io::{read_file, write_atomic, ByteReader, ByteWriter};
use crate::rng::stream;

pub const DEFAULT_SCENARIO_CONFIG: &str = include_str!("../configs/ffsc_scenario.toml");

/// Paper-style train:val:test ratio.
pub const DEFAULT_RATIOS: [f64; 3] = [7.8, 1.1, 1.1];

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    /// 1-based; 0 is reserved for real samples.
    pub method_id: u32,
    pub name: String,
    /// Nodes set to 1, the root excluded (it is implied).
    pub target_nodes: Vec<usize>,
    pub unobserved_nodes: Vec<usize>,
    pub signature: Vec<f64>,
    pub noise_sigma: f64,
}

impl MethodSpec {
    pub fn state(&self, graph: &LabelGraph) -> LabelState {
        LabelState::from_active(
            graph.len(),
            std::iter::once(0).chain(self.target_nodes.iter().copied()),
        )
    }

    pub fn observed(&self, graph: &LabelGraph) -> ObservedLabels {
        let n = graph.len();
        let full = (if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
            & !self.unobserved_nodes.iter().fold(0u64, |m, &i| m | 1 << i);
        ObservedLabels::from_masks(n, full, self.state(graph).mask() & full)
    }

    /// Attribute-tier nodes this method manipulates.
    pub fn target_attributes<'a>(&'a self, graph: &'a LabelGraph) -> impl Iterator<Item = usize> + 'a {
        self.target_nodes
            .iter()
            .copied()
            .filter(|&i| graph.node(i).tier == Tier::Attribute)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: LabelGraph,
    pub methods: Vec<MethodSpec>,
    pub dim: usize,
    pub n_identities: usize,
    pub identity_scale: f64,
    pub real_noise_sigma: f64,
    /// One length-`dim` displacement per node.
    pub node_signatures: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn new(
        graph: LabelGraph,
        methods: Vec<MethodSpec>,
        dim: usize,
        n_identities: usize,
        identity_scale: f64,
        real_noise_sigma: f64,
        node_signatures: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = graph.len();
        if dim == 0 || n_identities == 0 {
            return Err(Error::Config("scenario needs dim >= 1 and at least one identity".into()));
        }
        if !(identity_scale >= 0.0) || !(real_noise_sigma >= 0.0) {
            return Err(Error::Config("identity_scale and real_noise_sigma must be non-negative".into()));
        }
        if node_signatures.len() != n || node_signatures.iter().any(|s| s.len() != dim) {
            return Err(Error::Config(format!("node signatures must be {n} vectors of length {dim}")));
        }
        let mut ids = BTreeSet::new();
        for m in &methods {
            let bad = |msg: String| Error::Config(format!("method `{}`: {msg}", m.name));
            if m.method_id == 0 || !ids.insert(m.method_id) {
                return Err(bad(format!("method id {} is reserved or duplicated", m.method_id)));
            }
            if let Some(&i) = m.target_nodes.iter().chain(&m.unobserved_nodes).find(|&&i| i >= n) {
                return Err(bad(format!("node id {i} out of range")));
            }
            if !graph.is_legal_mask(m.state(&graph).mask()) {
                return Err(bad("targeted nodes do not form a legal state".into()));
            }
            if let Some(&i) = m.unobserved_nodes.iter().find(|&&i| i == 0 || m.target_nodes.contains(&i)) {
                return Err(bad(format!("targeted node `{}` cannot be unobserved", graph.node(i).name)));
            }
            if m.signature.len() != dim {
                return Err(bad(format!("signature has length {}, expected {dim}", m.signature.len())));
            }
            if !(m.noise_sigma >= 0.0 && m.noise_sigma.is_finite()) {
                return Err(bad("noise_sigma must be non-negative".into()));
            }
        }
        Ok(Self {
            graph,
            methods,
            dim,
            n_identities,
            identity_scale,
            real_noise_sigma,
            node_signatures,
        })
    }

    pub fn method(&self, method_id: u32) -> Option<&MethodSpec> {
        self.methods.iter().find(|m| m.method_id == method_id)
    }
}

/// Scenario description as read from TOML. Signatures are drawn from
/// `signature_seed` so the file stays small.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// `"default"` or a path to a hierarchy config.
    pub graph: String,
    pub dim: usize,
    pub n_identities: usize,
    pub identity_scale: f64,
    pub real_noise_sigma: f64,
    pub signature_seed: u64,
    pub signature_norm: TierNorms,
    #[serde(rename = "method")]
    pub methods: Vec<MethodEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierNorms {
    pub root: f64,
    pub attribute: f64,
    pub region: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub name: String,
    pub targets: Vec<String>,
    #[serde(default)]
    pub unobserved: Vec<String>,
    pub signature_norm: f64,
    pub noise_sigma: f64,
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn noisy(base: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    base.iter().map(|b| b + sigma * gauss(rng)).collect()
}

fn random_direction(dim: usize, norm: f64, seed: u64, purpose: &str) -> Vec<f64> {
    let mut rng = stream(seed, purpose);
    let v: Vec<f64> = (0..dim).map(|_| gauss(&mut rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| norm * x / len).collect()
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn build(&self, graph: LabelGraph) -> Result<Scenario> {
        let lookup = |method: &str, name: &str| {
            graph
                .node_id(name)
                .ok_or_else(|| Error::Config(format!("method `{method}`: unknown node `{name}`")))
        };
        let mut methods = Vec::with_capacity(self.methods.len());
        for (k, m) in self.methods.iter().enumerate() {
            let mut target_nodes = Vec::new();
            for t in &m.targets {
                let id = lookup(&m.name, t)?;
                if id != 0 && !target_nodes.contains(&id) {
                    target_nodes.push(id);
                }
            }
            target_nodes.sort_unstable();
            let mut unobserved_nodes = m
                .unobserved
                .iter()
                .map(|u| lookup(&m.name, u))
                .collect::<Result<Vec<_>>>()?;
            unobserved_nodes.sort_unstable();
            unobserved_nodes.dedup();
            methods.push(MethodSpec {
                method_id: k as u32 + 1,
                name: m.name.clone(),
                target_nodes,
                unobserved_nodes,
                signature: random_direction(
                    self.dim,
                    m.signature_norm,
                    self.signature_seed,
                    &format!("method:{}", m.name),
                ),
                noise_sigma: m.noise_sigma,
            });
        }
        let node_signatures = graph
            .nodes()
            .iter()
            .map(|node| {
                let norm = match node.tier {
                    Tier::Root => self.signature_norm.root,
                    Tier::Attribute => self.signature_norm.attribute,
                    Tier::Region => self.signature_norm.region,
                };
                random_direction(self.dim, norm, self.signature_seed, &format!("node:{}", node.name))
            })
            .collect();
        Scenario::new(
            graph,
            methods,
            self.dim,
            self.n_identities,
            self.identity_scale,
            self.real_noise_sigma,
            node_signatures,
        )
    }
}

/// The default hierarchy with twelve methods over five attributes.
pub fn default_ffsc_scenario() -> Scenario {
    ScenarioSpec::parse(DEFAULT_SCENARIO_CONFIG)
        .and_then(|s| s.build(LabelGraph::default_ffsc()))
        .expect("bundled scenario is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    pub state: LabelState,
    pub observed: ObservedLabels,
    /// 0 for real samples.
    pub method_id: u32,
    pub identity_id: u32,
}

impl SyntheticSample {
    pub fn is_fake(&self) -> bool {
        self.method_id != 0
    }
}

impl LabeledExample for SyntheticSample {
    fn features(&self) -> &[f64] {
        &self.features
    }
    fn observed(&self) -> ObservedLabels {
        self.observed
    }
}

/// Draws `n_real` real samples (identities assigned round-robin) and
/// `n_fake_per_method` fakes per method on uniformly drawn identities.
pub fn generate(
    scenario: &Scenario,
    n_real: usize,
    n_fake_per_method: usize,
    seed: u64,
) -> Result<Vec<SyntheticSample>> {
    let graph = &scenario.graph;
    let n = graph.len();
    let dim = scenario.dim;
    let mut id_rng = stream(seed, "identities");
    let bases: Vec<Vec<f64>> = (0..scenario.n_identities)
        .map(|_| {
            (0..dim)
                .map(|_| scenario.identity_scale * gauss(&mut id_rng))
                .collect()
        })
        .collect();
    let mut rng = stream(seed, "samples");
    let mut out = Vec::with_capacity(n_real + n_fake_per_method * scenario.methods.len());
    for k in 0..n_real {
        let identity = k % scenario.n_identities;
        let state = LabelState::zeros(n);
        out.push(SyntheticSample {
            features: noisy(&bases[identity], scenario.real_noise_sigma, &mut rng),
            state,
            observed: ObservedLabels::full(&state),
            method_id: 0,
            identity_id: identity as u32,
        });
    }
    for m in &scenario.methods {
        let state = m.state(graph);
        let observed = m.observed(graph);
        let mut shift = m.signature.clone();
        for i in (0..n).filter(|&i| state.get(i)) {
            for (s, v) in shift.iter_mut().zip(&scenario.node_signatures[i]) {
                *s += v;
            }
        }
        for _ in 0..n_fake_per_method {
            let identity = rng.random_range(0..scenario.n_identities);
            let mut features = noisy(&bases[identity], m.noise_sigma, &mut rng);
            for (f, s) in features.iter_mut().zip(&shift) {
                *f += s;
            }
            out.push(SyntheticSample {
                features,
                state,
                observed,
                method_id: m.method_id,
                identity_id: identity as u32,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// No held-out material.
    Intra,
    /// Held-out methods; each shares its target attribute with a training method.
    P1 { methods: Vec<u32> },
    /// Held-out attribute: every method touching it is excluded from training.
    P2 { attribute: usize },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Intra => "intra",
            Protocol::P1 { .. } => "p1",
            Protocol::P2 { .. } => "p2",
        }
    }

    /// Builds a protocol from its tag and a held-out spec: comma-separated
    /// method names or ids for `p1`, an attribute name for `p2`.
    pub fn parse(tag: &str, held_out: Option<&str>, scenario: &Scenario) -> Result<Self> {
        let graph = &scenario.graph;
        match (tag, held_out) {
            ("intra", None) => Ok(Protocol::Intra),
            ("intra", Some(_)) => Err(Error::Config("protocol intra takes no held-out set".into())),
            ("p1", Some(list)) => {
                let mut methods = Vec::new();
                for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let m = scenario
                        .methods
                        .iter()
                        .find(|m| m.name == item || m.method_id.to_string() == item)
                        .ok_or_else(|| Error::Config(format!("unknown method `{item}`")))?;
                    methods.push(m.method_id);
                }
                Ok(Protocol::P1 { methods })
            }
            ("p2", Some(name)) => {
                let attribute = graph
                    .node_id(name.trim())
                    .ok_or_else(|| Error::Config(format!("unknown attribute `{name}`")))?;
                Ok(Protocol::P2 { attribute })
            }
            ("p1" | "p2", None) => Err(Error::Config(format!("protocol {tag} needs --held-out"))),
            _ => Err(Error::Config(format!("unknown protocol `{tag}` (intra, p1, p2)"))),
        }
    }

    fn keeps_in_train(&self, s: &SyntheticSample) -> bool {
        match self {
            Protocol::Intra => true,
            Protocol::P1 { methods } => !methods.contains(&s.method_id),
            Protocol::P2 { attribute } => !s.state.get(*attribute),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    pub fn select<'a, T>(items: &'a [T], idx: &[usize]) -> Vec<&'a T> {
        idx.iter().map(|&i| &items[i]).collect()
    }
}

fn check_protocol(graph: &LabelGraph, samples: &[SyntheticSample], protocol: &Protocol) -> Result<()> {
    match protocol {
        Protocol::Intra => Ok(()),
        Protocol::P2 { attribute } => {
            if *attribute >= graph.len() || graph.node(*attribute).tier != Tier::Attribute {
                return Err(Error::Config(format!("held-out node {attribute} is not an attribute")));
            }
            Ok(())
        }
        Protocol::P1 { methods } => {
            if methods.is_empty() {
                return Err(Error::Config("p1 needs at least one held-out method".into()));
            }
            let attrs_of = |keep: &dyn Fn(u32) -> bool| -> BTreeSet<usize> {
                samples
                    .iter()
                    .filter(|s| s.is_fake() && keep(s.method_id))
                    .flat_map(|s| graph.ids_with_tier(Tier::Attribute).filter(|&a| s.state.get(a)).collect::<Vec<_>>())
                    .collect()
            };
            let trained = attrs_of(&|m| !methods.contains(&m));
            for &m in methods {
                let held = attrs_of(&|x| x == m);
                if held.is_empty() {
                    return Err(Error::Config(format!("held-out method {m} has no samples")));
                }
                if !held.is_subset(&trained) {
                    return Err(Error::Config(format!(
                        "held-out method {m} targets an attribute no training method covers; use p2"
                    )));
                }
            }
            Ok(())
        }
    }
}

/// Identity-disjoint train/val/test partition with the protocol filter
/// applied to the training part only.
pub fn make_split(
    graph: &LabelGraph,
    samples: &[SyntheticSample],
    protocol: Protocol,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitPlan> {
    if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    check_protocol(graph, samples, &protocol)?;
    let total: f64 = ratios.iter().sum();
    let frac = ratios.map(|r| r / total);
    let mut identities: Vec<u32> = samples
        .iter()
        .map(|s| s.identity_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let count = identities.len();
    if count < 3 {
        return Err(Error::Capacity {
            what: "identities for a disjoint three-way split",
            requested: 3,
            limit: count,
        });
    }
    identities.shuffle(&mut stream(seed, "split"));
    let mut n_val = ((frac[1] * count as f64).round() as usize).max(1);
    let mut n_test = ((frac[2] * count as f64).round() as usize).max(1);
    while n_val + n_test >= count {
        if n_val >= n_test {
            n_val -= 1;
        } else {
            n_test -= 1;
        }
    }
    let part: BTreeMap<u32, usize> = identities
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            let p = if k < n_val {
                1
            } else if k < n_val + n_test {
                2
            } else {
                0
            };
            (id, p)
        })
        .collect();
    let mut plan = SplitPlan {
        protocol,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (i, s) in samples.iter().enumerate() {
        match part[&s.identity_id] {
            0 if plan.protocol.keeps_in_train(s) => plan.train.push(i),
            0 => {}
            1 => plan.val.push(i),
            _ => plan.test.push(i),
        }
    }
    Ok(plan)
}

const DATASET_MAGIC: &[u8; 4] = b"HDDS";
const DATASET_VERSION: u32 = 1;

/// A generated dataset with the provenance needed to match it to a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph_hash: u64,
    pub seed: u64,
    pub node_count: usize,
    pub dim: usize,
    pub samples: Vec<SyntheticSample>,
}

impl Dataset {
    pub fn new(graph: &LabelGraph, dim: usize, seed: u64, samples: Vec<SyntheticSample>) -> Result<Self> {
        for (k, s) in samples.iter().enumerate() {
            if s.features.len() != dim || s.state.len() != graph.len() || s.observed.len() != graph.len() {
                return Err(Error::Dimension {
                    what: "dataset sample",
                    expected: dim,
                    got: s.features.len(),
                });
            }
            if !graph.is_legal_mask(s.state.mask()) {
                return Err(Error::Data(format!("sample {k} has an illegal state")));
            }
        }
        Ok(Self {
            graph_hash: graph.hash(),
            seed,
            node_count: graph.len(),
            dim,
            samples,
        })
    }

    /// Layout (little endian): magic `HDDS`, version u32, N u32, D u32,
    /// count u64, graph hash u64, seed u64, then per sample identity u32,
    /// method u32, state mask u64, observed mask u64, D × f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(DATASET_MAGIC);
        w.u32(DATASET_VERSION);
        w.u32(self.node_count as u32);
        w.u32(self.dim as u32);
        w.u64(self.samples.len() as u64);
        w.u64(self.graph_hash);
        w.u64(self.seed);
        for s in &self.samples {
            w.u32(s.identity_id);
            w.u32(s.method_id);
            w.u64(s.state.mask());
            w.u64(s.observed.known_mask());
            w.f64s(&s.features);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "dataset");
        if r.take(4)? != DATASET_MAGIC {
            return Err(Error::Data("not a dataset file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != DATASET_VERSION {
            return Err(Error::Data(format!("unsupported dataset version {version}")));
        }
        let n = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        let graph_hash = r.u64()?;
        let seed = r.u64()?;
        if n == 0 || n > 64 {
            return Err(Error::Data(format!("dataset node count {n} out of range")));
        }
        let valid = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut samples = Vec::with_capacity(count.min(bytes.len() / 24));
        for k in 0..count {
            let identity_id = r.u32()?;
            let method_id = r.u32()?;
            let state = r.u64()?;
            let known = r.u64()?;
            if state & !valid != 0 || known & !valid != 0 {
                return Err(Error::Data(format!("record {k}: label bits beyond node count")));
            }
            let features = r.f64s(dim)?;
            samples.push(SyntheticSample {
                features,
                state: LabelState::from_mask(state, n),
                observed: ObservedLabels::from_masks(n, known, state & known),
                method_id,
                identity_id,
            });
        }
        r.finish()?;
        Ok(Self {
            graph_hash,
            seed,
            node_count: n,
            dim,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    /// Delimited text: one row per sample, labels as `0`/`1`/`?` strings
    /// in node order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# graph_hash={:016x} seed={}", self.graph_hash, self.seed);
        out.push_str("identity,method,state,observed");
        for j in 0..self.dim {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for s in &self.samples {
            let state: String = (0..self.node_count).map(|i| if s.state.get(i) { '1' } else { '0' }).collect();
            let obs: String = (0..self.node_count)
                .map(|i| match s.observed.get(i) {
                    Some(true) => '1',
                    Some(false) => '0',
                    None => '?',
                })
                .collect();
            let _ = write!(out, "{},{},{state},{obs}", s.identity_id, s.method_id);
            for x in &s.features {
                let _ = write!(out, ",{x:?}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        let mut sc = default_ffsc_scenario();
        sc.n_identities = 30;
        sc
    }

    #[test]
    fn default_scenario_shape() {
        let sc = default_ffsc_scenario();
        let g = &sc.graph;
        assert_eq!(sc.methods.len(), 12);
        let mut per_attr = BTreeMap::new();
        for m in &sc.methods {
            let attrs: Vec<usize> = m.target_attributes(g).collect();
            assert_eq!(attrs.len(), 1, "{}", m.name);
            *per_attr.entry(attrs[0]).or_insert(0) += 1;
            assert!(g.is_legal_mask(m.state(g).mask()));
        }
        assert_eq!(per_attr.len(), 5);
        assert!(per_attr.values().all(|&c| c >= 2));
        let age = g.node_id("age").unwrap();
        for m in &sc.methods {
            let a = m.target_attributes(g).next().unwrap();
            let name = &g.node(a).name;
            let masks_age = m.observed(g).get(age).is_none();
            assert_eq!(masks_age, name == "gender" || name == "identity", "{}", m.name);
        }
    }

    #[test]
    fn samples_are_legal_and_consistent() {
        let sc = small();
        let data = generate(&sc, 50, 10, 3).unwrap();
        assert_eq!(data.len(), 50 + 120);
        for s in &data {
            assert!(sc.graph.is_legal_mask(s.state.mask()));
            assert!(s.observed.matches(s.state.mask()));
            if !s.is_fake() {
                assert_eq!(s.state.mask(), 0);
                assert_eq!(s.observed.count(), 12);
            } else {
                assert_eq!(s.state, sc.method(s.method_id).unwrap().state(&sc.graph));
            }
        }
    }

    #[test]
    fn no_fakes_gives_all_real() {
        let data = generate(&small(), 20, 0, 1).unwrap();
        assert!(data.iter().all(|s| !s.is_fake() && s.state.mask() == 0));
    }

    #[test]
    fn single_method_bits() {
        let sc = small();
        let g = sc.graph.clone();
        let ids: Vec<usize> = ["expression", "mouth", "lip"].iter().map(|n| g.node_id(n).unwrap()).collect();
        let method = MethodSpec {
            method_id: 1,
            name: "smile".into(),
            target_nodes: ids.clone(),
            unobserved_nodes: vec![],
            signature: vec![0.0; sc.dim],
            noise_sigma: 1.0,
        };
        let sc = Scenario::new(g.clone(), vec![method], sc.dim, 5, 1.0, 1.0, sc.node_signatures).unwrap();
        let want = LabelState::from_active(12, [0].into_iter().chain(ids)).mask();
        for s in generate(&sc, 0, 7, 2).unwrap() {
            assert_eq!(s.state.mask(), want);
        }
    }

    #[test]
    fn illegal_method_rejected_by_name() {
        let sc = small();
        let age = sc.graph.node_id("age").unwrap();
        let bad = MethodSpec {
            method_id: 1,
            name: "attr_only".into(),
            target_nodes: vec![age],
            unobserved_nodes: vec![],
            signature: vec![0.0; sc.dim],
            noise_sigma: 1.0,
        };
        let err = Scenario::new(sc.graph.clone(), vec![bad], sc.dim, 5, 1.0, 1.0, sc.node_signatures.clone())
            .unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("attr_only")), "{err}");

        let text = DEFAULT_SCENARIO_CONFIG.replace("\"age\", \"skin\", \"mouth\"]", "\"age\"]");
        let err = ScenarioSpec::parse(&text).unwrap().build(LabelGraph::default_ffsc()).unwrap_err();
        assert!(err.to_string().contains("age_regression"), "{err}");
    }

    #[test]
    fn generation_is_deterministic() {
        let sc = small();
        let a = Dataset::new(&sc.graph, sc.dim, 9, generate(&sc, 40, 5, 9).unwrap()).unwrap();
        let b = Dataset::new(&sc.graph, sc.dim, 9, generate(&sc, 40, 5, 9).unwrap()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = generate(&sc, 40, 5, 10).unwrap();
        assert_ne!(a.samples, c);
    }

    #[test]
    fn dataset_round_trip() {
        let sc = small();
        let ds = Dataset::new(&sc.graph, sc.dim, 4, generate(&sc, 10, 3, 4).unwrap()).unwrap();
        let bytes = ds.to_bytes();
        assert_eq!(Dataset::from_bytes(&bytes).unwrap(), ds);
        assert!(Dataset::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Dataset::from_bytes(&extra).is_err());
        let csv = ds.to_csv();
        assert_eq!(csv.lines().count(), 2 + ds.samples.len());
        assert!(csv.lines().skip(2).any(|l| l.split(',').nth(3).unwrap().contains('?')));
    }

    #[test]
    fn split_is_identity_disjoint_with_default_ratios() {
        let sc = default_ffsc_scenario();
        let data = generate(&sc, 480, 20, 1).unwrap();
        let plan = make_split(&sc.graph, &data, Protocol::Intra, DEFAULT_RATIOS, 1).unwrap();
        let ids = |idx: &[usize]| idx.iter().map(|&i| data[i].identity_id).collect::<BTreeSet<_>>();
        let (tr, va, te) = (ids(&plan.train), ids(&plan.val), ids(&plan.test));
        assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        assert_eq!(plan.train.len() + plan.val.len() + plan.test.len(), data.len());
        let frac = tr.len() as f64 / (tr.len() + va.len() + te.len()) as f64;
        assert!((frac - 0.78).abs() < 0.01, "{frac}");
        let total: f64 = DEFAULT_RATIOS.iter().sum();
        assert!((DEFAULT_RATIOS[0] / total - 0.78).abs() < 1e-12);
    }

    #[test]
    fn p2_filters_train_only() {
        let sc = small();
        let data = generate(&sc, 120, 20, 2).unwrap();
        let expr = sc.graph.node_id("expression").unwrap();
        let plan = make_split(&sc.graph, &data, Protocol::P2 { attribute: expr }, DEFAULT_RATIOS, 2).unwrap();
        assert!(plan.train.iter().all(|&i| !data[i].state.get(expr)));
        assert!(plan.test.iter().any(|&i| data[i].state.get(expr)));
        let pix = sc.graph.node_id("eye").unwrap();
        assert!(make_split(&sc.graph, &data, Protocol::P2 { attribute: pix }, DEFAULT_RATIOS, 2).is_err());
    }

    #[test]
    fn p1_keeps_sibling_methods() {
        let sc = small();
        let data = generate(&sc, 120, 20, 2).unwrap();
        let m = sc.methods.iter().find(|m| m.name == "age_progression").unwrap().method_id;
        let sib = sc.methods.iter().find(|m| m.name == "age_regression").unwrap().method_id;
        let plan = make_split(&sc.graph, &data, Protocol::P1 { methods: vec![m] }, DEFAULT_RATIOS, 2).unwrap();
        assert!(plan.train.iter().all(|&i| data[i].method_id != m));
        assert!(plan.train.iter().any(|&i| data[i].method_id == sib));
        assert!(plan.test.iter().any(|&i| data[i].method_id == m));
        let both = Protocol::P1 { methods: vec![m, sib] };
        assert!(make_split(&sc.graph, &data, both, DEFAULT_RATIOS, 2).is_err());
    }

    #[test]
    fn too_few_identities() {
        let mut sc = small();
        sc.n_identities = 2;
        let data = generate(&sc, 10, 1, 0).unwrap();
        assert!(matches!(
            make_split(&sc.graph, &data, Protocol::Intra, DEFAULT_RATIOS, 0),
            Err(Error::Capacity { .. })
        ));
        sc.n_identities = 3;
        let data = generate(&sc, 10, 1, 0).unwrap();
        let plan = make_split(&sc.graph, &data, Protocol::Intra, DEFAULT_RATIOS, 0).unwrap();
        assert!(!plan.train.is_empty() && !plan.val.is_empty() && !plan.test.is_empty());
    }

    #[test]
    fn protocol_parsing() {
        let sc = default_ffsc_scenario();
        assert_eq!(Protocol::parse("intra", None, &sc).unwrap(), Protocol::Intra);
        assert_eq!(
            Protocol::parse("p2", Some("pose"), &sc).unwrap(),
            Protocol::P2 { attribute: sc.graph.node_id("pose").unwrap() }
        );
        assert_eq!(
            Protocol::parse("p1", Some("age_progression,3"), &sc).unwrap(),
            Protocol::P1 { methods: vec![1, 3] }
        );
        assert!(Protocol::parse("p2", None, &sc).is_err());
        assert!(Protocol::parse("p3", Some("x"), &sc).is_err());
        assert!(Protocol::parse("p1", Some("nope"), &sc).is_err());
    }
}
