//! Command-line front end.
//!
//! Every artifact is written atomically into the output directory
//! (`--out`, else `HIERDETECT_OUT_DIR`, else `./hierdetect-out`) and starts
//! with provenance: crate version, seed and graph hash.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or usage error
//! (including invalid hierarchies and graph-hash mismatches), 3 bad input
//! data, 4 numeric failure.
//!
//! `infer` writes `marginals.csv`: one row per input feature row with the
//! sample index, one marginal per node (node order, full precision) and a
//! `verdict` column, `fake` when the root marginal is at least 0.5.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bilevel::{mean_primary_loss, train_with, BilevelConfig, Strategy};
use crate::error::{Error, Result};
use crate::eval::{evaluate, protocol_cells};
use crate::hierarchy::{parse_graph, LabelGraph, DEFAULT_GRAPH_CONFIG};
use crate::inference::ScoreVector;
use crate::io::{read_text, write_atomic};
use crate::losses::TaskWeights;
use crate::model::{forward, Architecture, Checkpoint};
use crate::psychometrics::{fit_psychometric, parse_trials};
use crate::synthdata::{generate, make_split, Dataset, Protocol, Scenario, ScenarioSpec, SplitPlan, DEFAULT_RATIOS, DEFAULT_SCENARIO_CONFIG};

pub const OUT_DIR_ENV: &str = "HIERDETECT_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "hierdetect-out";

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Config(_) | Error::Graph(_) | Error::Capacity { .. } => EXIT_CONFIG,
        Error::Dimension { .. } | Error::Input(_) | Error::InfeasibleEvidence | Error::Data(_) => EXIT_DATA,
        Error::Numeric(_) => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "hierdetect", version, about = "Hierarchical fake-face detection toolkit")]
pub struct Cli {
    /// Worker threads for batch evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SplitArgs {
    /// intra | p1 | p2
    #[arg(long)]
    pub protocol: Option<String>,
    /// Method names/ids (p1) or an attribute name (p2).
    #[arg(long)]
    pub held_out: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a hierarchy config and count its legal states.
    Validate {
        /// Hierarchy config path, or `default`.
        graph: String,
    },
    /// Write every legal state of a hierarchy.
    Enumerate {
        graph: String,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic dataset.
    SynthGen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_real: Option<usize>,
        #[arg(long)]
        n_fake_per_method: Option<usize>,
        /// Also write the dataset as delimited text.
        #[arg(long)]
        csv: bool,
    },
    /// Train a detector.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        split: SplitArgs,
        /// so | joint | fixed_equal | fixed_given | dwa | independent
        #[arg(long)]
        strategy: Option<String>,
        /// Dataset file; generated from the scenario when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split of a dataset.
    Eval {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Per-node marginals for rows of a feature file.
    Infer {
        checkpoint: PathBuf,
        features: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a psychometric function to `degree,response` trials.
    ThresholdFit {
        trials: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// `[train]` section; omitted keys take the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr_theta: Option<f64>,
    pub momentum: Option<f64>,
    pub lr_lambda: Option<f64>,
    pub lambda_init: Option<f64>,
    pub epsilon_scale: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lambda_floor: Option<f64>,
}

fn default_tag() -> String {
    "default".into()
}

/// Experiment description. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Hierarchy config path or `default`. Must match the scenario's graph.
    #[serde(default = "default_tag")]
    pub graph: String,
    /// Scenario path or `default`.
    #[serde(default = "default_tag")]
    pub scenario: String,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "ExperimentConfig::default_n_real")]
    pub n_real: usize,
    #[serde(default = "ExperimentConfig::default_n_fake")]
    pub n_fake_per_method: usize,
    #[serde(default = "ExperimentConfig::default_arch")]
    pub arch: String,
    #[serde(default)]
    pub hidden: usize,
    #[serde(default = "ExperimentConfig::default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub fixed_weights: Option<Vec<f64>>,
    #[serde(default = "ExperimentConfig::default_temperature")]
    pub dwa_temperature: f64,
    #[serde(default = "ExperimentConfig::default_protocol")]
    pub protocol: String,
    #[serde(default)]
    pub held_out: Option<String>,
    #[serde(default = "ExperimentConfig::default_ratios")]
    pub split_ratios: [f64; 3],
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    fn default_n_real() -> usize {
        600
    }
    fn default_n_fake() -> usize {
        60
    }
    fn default_arch() -> String {
        "linear".into()
    }
    fn default_strategy() -> String {
        "so".into()
    }
    fn default_temperature() -> f64 {
        2.0
    }
    fn default_protocol() -> String {
        "intra".into()
    }
    fn default_ratios() -> [f64; 3] {
        DEFAULT_RATIOS
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("experiment: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(&read_text(path)?, &base)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Tags from the closed sets and referenced files present.
    fn check(&self) -> Result<()> {
        parse_strategy_tag(&self.strategy)?;
        if !matches!(self.protocol.as_str(), "intra" | "p1" | "p2") {
            return Err(Error::Config(format!("unknown protocol `{}` (intra, p1, p2)", self.protocol)));
        }
        Architecture::parse(&self.arch, self.hidden)?;
        for (key, v) in [("graph", &self.graph), ("scenario", &self.scenario)] {
            if v != "default" && !self.resolve(Path::new(v)).exists() {
                return Err(Error::Config(format!("{key}: {} does not exist", self.resolve(Path::new(v)).display())));
            }
        }
        if let Some(d) = &self.dataset {
            if !self.resolve(d).exists() {
                return Err(Error::Config(format!("dataset: {} does not exist", self.resolve(d).display())));
            }
        }
        Ok(())
    }

    pub fn bilevel(&self, seed: u64) -> BilevelConfig {
        let d = BilevelConfig::default();
        let t = &self.train;
        BilevelConfig {
            lr_theta: t.lr_theta.unwrap_or(d.lr_theta),
            momentum: t.momentum.unwrap_or(d.momentum),
            lr_lambda: t.lr_lambda.unwrap_or(d.lr_lambda),
            lambda_init: t.lambda_init.unwrap_or(d.lambda_init),
            epsilon_scale: t.epsilon_scale.unwrap_or(d.epsilon_scale),
            epochs: t.epochs.unwrap_or(d.epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            lambda_floor: t.lambda_floor.unwrap_or(d.lambda_floor),
            seed,
        }
    }

    pub fn strategy(&self, tag: &str) -> Result<Strategy> {
        match parse_strategy_tag(tag)? {
            Strategy::FixedGiven(_) => {
                let w = self
                    .fixed_weights
                    .clone()
                    .ok_or_else(|| Error::Config("strategy fixed_given needs `fixed_weights`".into()))?;
                Ok(Strategy::FixedGiven(TaskWeights::new(w)?))
            }
            Strategy::Dwa { .. } => Ok(Strategy::Dwa {
                temperature: self.dwa_temperature,
            }),
            s => Ok(s),
        }
    }

    /// The scenario, with its graph checked against `graph`.
    pub fn scenario(&self) -> Result<Scenario> {
        let scenario = if self.scenario == "default" {
            load_scenario_text(DEFAULT_SCENARIO_CONFIG, Path::new(""))?
        } else {
            let path = self.resolve(Path::new(&self.scenario));
            load_scenario_text(&read_text(&path)?, path.parent().unwrap_or(Path::new("")))?
        };
        let graph = self.graph()?;
        if graph.hash() != scenario.graph.hash() {
            return Err(Error::Config(format!(
                "graph hash {:016x} differs from the scenario's {:016x}",
                graph.hash(),
                scenario.graph.hash()
            )));
        }
        Ok(scenario)
    }

    pub fn graph(&self) -> Result<LabelGraph> {
        if self.graph == "default" {
            Ok(LabelGraph::default_ffsc())
        } else {
            load_graph(&self.resolve(Path::new(&self.graph)).to_string_lossy())
        }
    }
}

fn parse_strategy_tag(tag: &str) -> Result<Strategy> {
    Ok(match tag {
        "so" => Strategy::Bilevel,
        "joint" => Strategy::JointLikelihood,
        "fixed_equal" => Strategy::FixedEqual,
        "fixed_given" => Strategy::FixedGiven(TaskWeights::uniform(1, 1.0)?),
        "dwa" => Strategy::Dwa { temperature: 2.0 },
        "independent" => Strategy::Independent,
        other => {
            return Err(Error::Config(format!(
                "unknown strategy `{other}` (so, joint, fixed_equal, fixed_given, dwa, independent)"
            )))
        }
    })
}

fn load_scenario_text(text: &str, base: &Path) -> Result<Scenario> {
    let spec = ScenarioSpec::parse(text)?;
    let graph = if spec.graph == "default" {
        LabelGraph::default_ffsc()
    } else {
        load_graph(&base.join(&spec.graph).to_string_lossy())?
    };
    spec.build(graph)
}

/// A hierarchy from a path, or the bundled default for `default`.
pub fn load_graph(path: &str) -> Result<LabelGraph> {
    let text = if path == "default" {
        DEFAULT_GRAPH_CONFIG.to_string()
    } else {
        read_text(Path::new(path))?
    };
    let graph = parse_graph(&text)?;
    graph.legal_states()?;
    Ok(graph)
}

fn provenance(seed: Option<u64>, graph_hash: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "-".to_string(), |s| s.to_string());
    let hash = graph_hash.map_or_else(|| "-".to_string(), |h| format!("{h:016x}"));
    format!("# hierdetect v{} seed={seed} graph_hash={hash}\n", env!("CARGO_PKG_VERSION"))
}

struct Context {
    config: ExperimentConfig,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let config = match &common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let seed = common.seed.unwrap_or(config.seed);
        let out = common
            .out
            .clone()
            .or_else(|| config.out_dir.as_ref().map(|d| config.resolve(d)))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        Ok(Self { config, seed, out })
    }

    fn protocol(&self, split: &SplitArgs, scenario: &Scenario) -> Result<Protocol> {
        let tag = split.protocol.as_deref().unwrap_or(&self.config.protocol);
        let held_out = split.held_out.as_deref().or(self.config.held_out.as_deref());
        Protocol::parse(tag, if tag == "intra" { None } else { held_out }, scenario)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        Ok(path)
    }
}

pub fn cmd_validate(graph_path: &str) -> Result<String> {
    let graph = load_graph(graph_path)?;
    let states = graph.legal_states()?.len();
    let (r, a, g) = graph.tier_counts();
    Ok(format!(
        "N={}, legal states={states}\ntiers: root={r} attribute={a} region={g}\ngraph_hash={:016x}\n",
        graph.len(),
        graph.hash()
    ))
}

pub fn cmd_enumerate(graph_path: &str, common: &Common) -> Result<String> {
    let ctx = Context::new(common)?;
    let graph = load_graph(graph_path)?;
    let mut text = provenance(None, Some(graph.hash()));
    let names: Vec<&str> = graph.nodes().iter().map(|n| n.name.as_str()).collect();
    let _ = writeln!(text, "# {}", names.join(","));
    let states = graph.legal_states()?;
    for &m in states {
        text.extend((0..graph.len()).map(|i| if m >> i & 1 == 1 { '1' } else { '0' }));
        text.push('\n');
    }
    let path = ctx.write("legal_states.txt", text.as_bytes())?;
    Ok(format!("{} legal states -> {}\n", states.len(), path.display()))
}

pub fn cmd_synth(common: &Common, n_real: Option<usize>, n_fake: Option<usize>, csv: bool) -> Result<String> {
    let ctx = Context::new(common)?;
    let scenario = ctx.config.scenario()?;
    let n_real = n_real.unwrap_or(ctx.config.n_real);
    let n_fake = n_fake.unwrap_or(ctx.config.n_fake_per_method);
    let samples = generate(&scenario, n_real, n_fake, ctx.seed)?;
    let fakes = samples.iter().filter(|s| s.is_fake()).count();
    let dataset = Dataset::new(&scenario.graph, scenario.dim, ctx.seed, samples)?;
    let path = ctx.write("dataset.hdds", &dataset.to_bytes())?;
    let mut msg = format!(
        "real={} fake={fakes} methods={} dim={} seed={} -> {}\n",
        dataset.samples.len() - fakes,
        scenario.methods.len(),
        scenario.dim,
        ctx.seed,
        path.display()
    );
    if csv {
        let p = ctx.write("dataset.csv", dataset.to_csv().as_bytes())?;
        let _ = writeln!(msg, "csv -> {}", p.display());
    }
    Ok(msg)
}

fn load_dataset_for(scenario: &Scenario, path: &Path) -> Result<Dataset> {
    let ds = Dataset::load(path)?;
    if ds.graph_hash != scenario.graph.hash() {
        return Err(Error::Config(format!(
            "{}: dataset graph hash {:016x} does not match {:016x}",
            path.display(),
            ds.graph_hash,
            scenario.graph.hash()
        )));
    }
    if ds.dim != scenario.dim {
        return Err(Error::Dimension {
            what: "dataset features",
            expected: scenario.dim,
            got: ds.dim,
        });
    }
    Ok(ds)
}

pub fn cmd_train(
    common: &Common,
    split: &SplitArgs,
    strategy: Option<&str>,
    dataset: Option<&Path>,
) -> Result<String> {
    let ctx = Context::new(common)?;
    let cfg = &ctx.config;
    let scenario = cfg.scenario()?;
    let graph = &scenario.graph;
    let strategy = cfg.strategy(strategy.unwrap_or(&cfg.strategy))?;
    let arch = Architecture::parse(&cfg.arch, cfg.hidden)?;
    let samples = match dataset.map(Path::to_path_buf).or_else(|| cfg.dataset.as_ref().map(|d| cfg.resolve(d))) {
        Some(p) => load_dataset_for(&scenario, &p)?.samples,
        None => generate(&scenario, cfg.n_real, cfg.n_fake_per_method, ctx.seed)?,
    };
    let protocol = ctx.protocol(split, &scenario)?;
    let plan = make_split(graph, &samples, protocol, cfg.split_ratios, ctx.seed)?;
    let train: Vec<_> = SplitPlan::select(&samples, &plan.train).into_iter().cloned().collect();
    let val = SplitPlan::select(&samples, &plan.val);
    let bilevel = cfg.bilevel(ctx.seed);
    let head = strategy.head();
    let name = strategy.name();
    let outcome = train_with(strategy, graph, arch, &train, &bilevel)?;
    let val_loss = mean_primary_loss(head, graph, &outcome.params, &val)?;

    let hash = graph.hash();
    let checkpoint = Checkpoint {
        params: outcome.params,
        head,
        graph_hash: hash,
        seed: ctx.seed,
        weights: outcome.weights,
        optimizer: outcome.optimizer,
    };
    let ck = ctx.write("checkpoint.bin", &checkpoint.to_bytes())?;
    let mut weights = provenance(Some(ctx.seed), Some(hash));
    weights.push_str("node,lambda\n");
    for (node, l) in graph.nodes().iter().zip(checkpoint.weights.as_slice()) {
        let _ = writeln!(weights, "{},{l:?}", node.name);
    }
    ctx.write("weights.csv", weights.as_bytes())?;
    ctx.write(
        "trace.csv",
        outcome.trace.to_delimited(ctx.seed, hash, graph.len()).as_bytes(),
    )?;

    let last = outcome.trace.records.last();
    Ok(format!(
        "strategy={name} protocol={} steps={} train={} val={}\nfinal train loss {:.6}\nfinal val primary loss {:.6}\ncheckpoint -> {}\n",
        plan.protocol.name(),
        outcome.trace.records.len(),
        plan.train.len(),
        plan.val.len(),
        last.map_or(f64::NAN, |r| r.train_loss),
        val_loss,
        ck.display()
    ))
}

pub fn cmd_eval(checkpoint: &Path, dataset: &Path, common: &Common, split: &SplitArgs) -> Result<String> {
    let ctx = Context::new(common)?;
    let ck = Checkpoint::load(checkpoint)?;
    let ds = Dataset::load(dataset)?;
    if ck.graph_hash != ds.graph_hash {
        return Err(Error::Config(format!(
            "refusing to evaluate: checkpoint graph hash {:016x} differs from dataset graph hash {:016x}",
            ck.graph_hash, ds.graph_hash
        )));
    }
    let scenario = ctx.config.scenario()?;
    let graph = &scenario.graph;
    if graph.hash() != ds.graph_hash {
        return Err(Error::Config(format!(
            "dataset graph hash {:016x} differs from the configured graph {:016x}",
            ds.graph_hash,
            graph.hash()
        )));
    }
    if ck.params.input_dim() != ds.dim {
        return Err(Error::Dimension {
            what: "checkpoint input",
            expected: ds.dim,
            got: ck.params.input_dim(),
        });
    }
    // Split with the training seed unless overridden.
    let seed = common.seed.unwrap_or(ck.seed);
    let protocol = ctx.protocol(split, &scenario)?;
    let plan = make_split(graph, &ds.samples, protocol, ctx.config.split_ratios, seed)?;
    let test = SplitPlan::select(&ds.samples, &plan.test);
    let cells = protocol_cells(graph, &plan.protocol);
    let report = evaluate(ck.head, &ck.params, &scenario, plan.protocol.name(), &test, &cells)?;
    let header = provenance(Some(seed), Some(ds.graph_hash));
    let text = report.to_text();
    ctx.write("report.txt", format!("{header}{text}").as_bytes())?;
    ctx.write("report.csv", format!("{header}{}", report.to_csv()).as_bytes())?;
    Ok(text)
}

/// Rows of comma-separated features; blank lines and `#` lines skipped.
pub fn parse_features(text: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Input(format!("line {}: malformed feature row", k + 1)))?;
        if row.len() != dim {
            return Err(Error::Input(format!(
                "line {}: expected {dim} features, got {}",
                k + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("feature file has no rows".into()));
    }
    Ok(rows)
}

pub fn cmd_infer(checkpoint: &Path, features: &Path, common: &Common) -> Result<String> {
    let ctx = Context::new(common)?;
    let ck = Checkpoint::load(checkpoint)?;
    let graph = ctx.config.graph()?;
    if graph.hash() != ck.graph_hash {
        return Err(Error::Config(format!(
            "checkpoint graph hash {:016x} differs from the configured graph {:016x}",
            ck.graph_hash,
            graph.hash()
        )));
    }
    let rows = parse_features(&read_text(features)?, ck.params.input_dim())?;
    let mut text = provenance(Some(ck.seed), Some(ck.graph_hash));
    text.push_str("sample");
    for node in graph.nodes() {
        let _ = write!(text, ",{}", node.name);
    }
    text.push_str(",verdict\n");
    let mut fakes = 0;
    for (k, x) in rows.iter().enumerate() {
        let scores: ScoreVector = forward(&ck.params, x)?;
        let probs = ck.head.node_probabilities(&graph, &scores)?;
        let _ = write!(text, "{k}");
        for p in &probs {
            let _ = write!(text, ",{p:?}");
        }
        let fake = probs[0] >= 0.5;
        fakes += usize::from(fake);
        let _ = writeln!(text, ",{}", if fake { "fake" } else { "real" });
    }
    let path = ctx.write("marginals.csv", text.as_bytes())?;
    Ok(format!("{} samples, {fakes} flagged fake -> {}\n", rows.len(), path.display()))
}

pub fn cmd_threshold_fit(trials: &Path, common: &Common) -> Result<String> {
    let ctx = Context::new(common)?;
    let trials = parse_trials(&read_text(trials)?)?;
    let fit = fit_psychometric(&trials)?;
    let text = format!("{}{fit}", provenance(None, None));
    ctx.write("fit.txt", text.as_bytes())?;
    Ok(fit.to_string())
}

pub fn run(cli: Cli) -> Result<String> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Validate { graph } => cmd_validate(&graph),
        Command::Enumerate { graph, common } => cmd_enumerate(&graph, &common),
        Command::SynthGen {
            common,
            n_real,
            n_fake_per_method,
            csv,
        } => cmd_synth(&common, n_real, n_fake_per_method, csv),
        Command::Train {
            common,
            split,
            strategy,
            dataset,
        } => cmd_train(&common, &split, strategy.as_deref(), dataset.as_deref()),
        Command::Eval {
            checkpoint,
            dataset,
            common,
            split,
        } => cmd_eval(&checkpoint, &dataset, &common, &split),
        Command::Infer {
            checkpoint,
            features,
            common,
        } => cmd_infer(&checkpoint, &features, &common),
        Command::ThresholdFit { trials, common } => cmd_threshold_fit(&trials, &common),
    }
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(dir: &Path) -> Common {
        Common {
            out: Some(dir.to_path_buf()),
            ..Common::default()
        }
    }

    #[test]
    fn validate_default() {
        let msg = cmd_validate("default").unwrap();
        assert!(msg.starts_with("N=12, legal states=1954\n"), "{msg}");
        assert!(msg.contains("root=1 attribute=5 region=6"));
    }

    #[test]
    fn validate_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.graph");
        let e = cmd_validate(missing.to_str().unwrap()).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_IO);
        assert!(e.to_string().contains("nope.graph"));
        let cyclic = dir.path().join("cyc.graph");
        std::fs::write(&cyclic, "nodes:\n0 r root\n1 a attribute\n2 b region\nedges:\nr -> a\na -> b\nb -> a\n").unwrap();
        let e = cmd_validate(cyclic.to_str().unwrap()).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
    }

    #[test]
    fn config_defaults_and_closed_tags() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.strategy, "so");
        assert_eq!(cfg.bilevel(7), BilevelConfig { seed: 7, ..BilevelConfig::default() });
        let e = ExperimentConfig::parse("strategy = \"magic\"", Path::new("")).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let e = ExperimentConfig::parse("protocol = \"p9\"", Path::new("")).unwrap_err();
        assert!(e.to_string().contains("p9"));
        let e = ExperimentConfig::parse("scenario = \"missing.toml\"", Path::new("/nonexistent")).unwrap_err();
        assert!(e.to_string().contains("missing.toml"));
        let e = ExperimentConfig::parse("typo_key = 1", Path::new("")).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let cfg = ExperimentConfig::parse("[train]\nepochs = 3\nlr_lambda = 0.0\n", Path::new("")).unwrap();
        assert_eq!(cfg.bilevel(0).epochs, 3);
        assert_eq!(cfg.bilevel(0).lr_lambda, 0.0);
    }

    #[test]
    fn fixed_given_needs_weights() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.strategy("fixed_given").is_err());
        let cfg = ExperimentConfig::parse("fixed_weights = [1.0, 2.0]", Path::new("")).unwrap();
        assert!(matches!(cfg.strategy("fixed_given").unwrap(), Strategy::FixedGiven(_)));
    }

    #[test]
    fn feature_rows_report_line_numbers() {
        let rows = parse_features("# header\n1,2\n\n3, 4\n", 2).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let e = parse_features("1,2\n# c\n1,x\n", 2).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = parse_features("1,2\n1,2,3\n", 2).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_features("# only comments\n", 2).is_err());
    }

    #[test]
    fn synth_counts() {
        let dir = tempfile::tempdir().unwrap();
        let msg = cmd_synth(&common(dir.path()), Some(1000), Some(50), false).unwrap();
        assert!(msg.starts_with("real=1000 fake=600 methods=12"), "{msg}");
        let ds = Dataset::load(&dir.path().join("dataset.hdds")).unwrap();
        assert_eq!(ds.samples.len(), 1600);
        assert!(ds.samples.iter().filter(|s| !s.is_fake()).all(|s| s.state.mask() == 0));
    }

    #[test]
    fn threshold_fit_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(cmd_threshold_fit(&empty, &common(dir.path())).is_err());
        let ones = dir.path().join("ones.csv");
        let text: String = (0..40).map(|k| format!("{},1\n", k as f64 * 0.01)).collect();
        std::fs::write(&ones, text).unwrap();
        let e = cmd_threshold_fit(&ones, &common(dir.path())).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_DATA);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["hierdetect", "train", "--strategy"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["hierdetect", "frobnicate"]), EXIT_CONFIG);
    }
}
