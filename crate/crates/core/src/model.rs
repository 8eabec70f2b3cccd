//! Small differentiable scorers mapping feature vectors to per-node scores,
//! with exact reverse-mode gradients, momentum SGD and a binary checkpoint
//! format.
//!
//! Parameters live in one flat vector. Layout (all blocks row-major):
//!
//! | arch   | blocks                                   |
//! |--------|------------------------------------------|
//! | linear | `W` (N×D), `b` (N)                       |
//! | mlp1   | `W1` (H×D), `b1` (H), `W2` (N×H), `b2` (N) |
//!
//! Gradients use the same layout.

use std::path::Path;

use rand::Rng;
use rand_distr::Uniform;

use crate::error::{Error, Result};
use crate::inference::{Head, ScoreVector};
use crate::io::{read_file, write_atomic, ByteReader, ByteWriter};
use crate::losses::TaskWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Linear,
    /// One tanh hidden layer of the given width.
    Mlp1 { hidden: usize },
}

impl Architecture {
    pub fn tag(self) -> u8 {
        match self {
            Architecture::Linear => 0,
            Architecture::Mlp1 { .. } => 1,
        }
    }

    pub fn hidden(self) -> usize {
        match self {
            Architecture::Linear => 0,
            Architecture::Mlp1 { hidden } => hidden,
        }
    }

    pub fn parse(name: &str, hidden: usize) -> Result<Self> {
        match name {
            "linear" => Ok(Architecture::Linear),
            "mlp1" if hidden > 0 => Ok(Architecture::Mlp1 { hidden }),
            "mlp1" => Err(Error::Config("mlp1 needs a positive hidden width".into())),
            other => Err(Error::Config(format!("unknown architecture `{other}` (linear | mlp1)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp1 { .. } => "mlp1",
        }
    }
}

/// A feature vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("feature {i} is not finite")));
        }
        Ok(Self(x))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for FeatureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    arch: Architecture,
    input_dim: usize,
    outputs: usize,
    values: Vec<f64>,
}

fn param_count(arch: Architecture, d: usize, n: usize) -> usize {
    match arch {
        Architecture::Linear => n * d + n,
        Architecture::Mlp1 { hidden: h } => h * d + h + n * h + n,
    }
}

impl ScorerParams {
    pub fn zeros(arch: Architecture, input_dim: usize, outputs: usize) -> Self {
        Self {
            arch,
            input_dim,
            outputs,
            values: vec![0.0; param_count(arch, input_dim, outputs)],
        }
    }

    /// Wraps a flat parameter vector in the documented layout.
    pub fn from_values(
        arch: Architecture,
        input_dim: usize,
        outputs: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let want = param_count(arch, input_dim, outputs);
        if values.len() != want {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: want,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("parameters must be finite".into()));
        }
        Ok(Self {
            arch,
            input_dim,
            outputs,
            values,
        })
    }

    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn init(arch: Architecture, input_dim: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(arch, input_dim, outputs);
        let mut fill = |block: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for v in block {
                *v = rng.sample(dist);
            }
        };
        let (d, n) = (input_dim, outputs);
        match arch {
            Architecture::Linear => fill(&mut p.values[..n * d], d),
            Architecture::Mlp1 { hidden: h } => {
                fill(&mut p.values[..h * d], d);
                let w2 = h * d + h;
                fill(&mut p.values[w2..w2 + n * h], h);
            }
        }
        p
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                what: "feature vector",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64], h: usize) -> Vec<f64> {
        let d = self.input_dim;
        let (w1, rest) = self.values.split_at(h * d);
        let b1 = &rest[..h];
        (0..h)
            .map(|r| (dot(&w1[r * d..(r + 1) * d], x) + b1[r]).tanh())
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `W x + b` (linear) or `W2 tanh(W1 x + b1) + b2` (mlp1).
pub fn forward(params: &ScorerParams, x: &[f64]) -> Result<ScoreVector> {
    params.check_x(x)?;
    let (d, n) = (params.input_dim, params.outputs);
    let v = &params.values;
    let scores = match params.arch {
        Architecture::Linear => {
            let (w, b) = v.split_at(n * d);
            (0..n).map(|r| dot(&w[r * d..(r + 1) * d], x) + b[r]).collect()
        }
        Architecture::Mlp1 { hidden: h } => {
            let hid = params.hidden_activations(x, h);
            let off = h * d + h;
            let (w2, b2) = v[off..].split_at(n * h);
            (0..n).map(|r| dot(&w2[r * h..(r + 1) * h], &hid) + b2[r]).collect()
        }
    };
    ScoreVector::new(scores).map_err(|e| Error::Numeric(format!("forward pass: {e}")))
}

/// Gradient of `scores(x)ᵀ · grad_scores` with respect to every parameter,
/// accumulated into `out` (same layout as the parameters).
pub fn backward_into(
    params: &ScorerParams,
    x: &[f64],
    grad_scores: &[f64],
    out: &mut [f64],
) -> Result<()> {
    params.check_x(x)?;
    let (d, n) = (params.input_dim, params.outputs);
    if grad_scores.len() != n {
        return Err(Error::Dimension {
            what: "score gradient",
            expected: n,
            got: grad_scores.len(),
        });
    }
    if out.len() != params.values.len() {
        return Err(Error::Dimension {
            what: "gradient buffer",
            expected: params.values.len(),
            got: out.len(),
        });
    }
    if grad_scores.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("score gradient is not finite".into()));
    }
    match params.arch {
        Architecture::Linear => {
            let (gw, gb) = out.split_at_mut(n * d);
            for r in 0..n {
                let g = grad_scores[r];
                for (o, xi) in gw[r * d..(r + 1) * d].iter_mut().zip(x) {
                    *o += g * xi;
                }
                gb[r] += g;
            }
        }
        Architecture::Mlp1 { hidden: h } => {
            let hid = params.hidden_activations(x, h);
            let off = h * d + h;
            let w2 = &params.values[off..off + n * h];
            let (first, second) = out.split_at_mut(off);
            let (gw2, gb2) = second.split_at_mut(n * h);
            let mut g_hidden = vec![0.0; h];
            for r in 0..n {
                let g = grad_scores[r];
                for c in 0..h {
                    gw2[r * h + c] += g * hid[c];
                    g_hidden[c] += g * w2[r * h + c];
                }
                gb2[r] += g;
            }
            let (gw1, gb1) = first.split_at_mut(h * d);
            for c in 0..h {
                let ga = g_hidden[c] * (1.0 - hid[c] * hid[c]);
                for (o, xi) in gw1[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *o += ga * xi;
                }
                gb1[c] += ga;
            }
        }
    }
    Ok(())
}

pub fn backward(params: &ScorerParams, x: &[f64], grad_scores: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.len()];
    backward_into(params, x, grad_scores, &mut out)?;
    Ok(out)
}

/// Sums per-sample backward passes in sample order.
pub fn batch_backward<'a>(
    params: &ScorerParams,
    samples: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.len()];
    for (x, g) in samples {
        backward_into(params, x, g, &mut out)?;
    }
    Ok(out)
}

/// Momentum buffer for [`sgd_step`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SgdState {
    pub velocity: Vec<f64>,
}

/// Classical momentum: `v ← μ v + g; θ ← θ − lr v`.
pub fn sgd_step(
    params: &mut ScorerParams,
    grads: &[f64],
    lr: f64,
    momentum: f64,
    state: &mut SgdState,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Input(format!("learning rate must be positive, got {lr}")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Input(format!("momentum must be in [0, 1), got {momentum}")));
    }
    if grads.len() != params.len() {
        return Err(Error::Dimension {
            what: "parameter gradient",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "gradient entry {i} is {}; update refused",
            grads[i]
        )));
    }
    if state.velocity.len() != grads.len() {
        state.velocity = vec![0.0; grads.len()];
    }
    for ((p, v), g) in params.values.iter_mut().zip(&mut state.velocity).zip(grads) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"HDCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training or run inference.
///
/// Binary layout, little endian:
///
/// ```text
/// magic "HDCK" | version u32 | arch u8 | head u8 | reserved u16
/// D u32 | H u32 | N u32 | graph_hash u64 | seed u64
/// param_count u64 | params f64 × param_count
/// lambda f64 × N
/// velocity_count u64 | velocity f64 × velocity_count
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ScorerParams,
    pub head: Head,
    pub graph_hash: u64,
    pub seed: u64,
    pub weights: TaskWeights,
    pub optimizer: SgdState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut w = ByteWriter::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u8(p.arch.tag());
        w.u8(self.head.code());
        w.u16(0);
        w.u32(p.input_dim as u32);
        w.u32(p.arch.hidden() as u32);
        w.u32(p.outputs as u32);
        w.u64(self.graph_hash);
        w.u64(self.seed);
        w.u64(p.values.len() as u64);
        w.f64s(&p.values);
        w.f64s(self.weights.as_slice());
        w.u64(self.optimizer.velocity.len() as u64);
        w.f64s(&self.optimizer.velocity);
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(buf, "checkpoint");
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Data("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let tag = r.u8()?;
        let head = Head::from_code(r.u8()?)
            .ok_or_else(|| Error::Data("checkpoint: unknown head code".into()))?;
        r.u16()?;
        let d = r.u32()? as usize;
        let h = r.u32()? as usize;
        let n = r.u32()? as usize;
        let arch = match tag {
            0 => Architecture::Linear,
            1 => Architecture::Mlp1 { hidden: h },
            t => return Err(Error::Data(format!("checkpoint: unknown architecture tag {t}"))),
        };
        let graph_hash = r.u64()?;
        let seed = r.u64()?;
        let count = r.u64()? as usize;
        let params = ScorerParams::from_values(arch, d, n, r.f64s(count)?)
            .map_err(|e| Error::Data(format!("checkpoint parameters: {e}")))?;
        let weights = TaskWeights::new(r.f64s(n)?)
            .map_err(|e| Error::Data(format!("checkpoint weights: {e}")))?;
        let vcount = r.u64()? as usize;
        let velocity = r.f64s(vcount)?;
        r.finish()?;
        Ok(Self {
            params,
            head,
            graph_hash,
            seed,
            weights,
            optimizer: SgdState { velocity },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::{prop_assert_eq, proptest};

    #[test]
    fn linear_forward_basics() {
        let p = ScorerParams::zeros(Architecture::Linear, 4, 3);
        assert_eq!(forward(&p, &[1.0, 2.0, 3.0, 4.0]).unwrap().as_slice(), &[0.0; 3]);
        let p = ScorerParams::from_values(Architecture::Linear, 1, 1, vec![1.0, 0.0]).unwrap();
        assert_eq!(forward(&p, &[2.5]).unwrap()[0], 2.5);
        assert!(matches!(forward(&p, &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mlp_forward_matches_hand_arithmetic() {
        // D = 2, H = 2, N = 1
        let w1 = [0.5, -0.25, 0.1, 0.2];
        let b1 = [0.05, -0.1];
        let w2 = [1.5, -2.0];
        let b2 = [0.3];
        let values: Vec<f64> = w1.iter().chain(&b1).chain(&w2).chain(&b2).copied().collect();
        let p = ScorerParams::from_values(Architecture::Mlp1 { hidden: 2 }, 2, 1, values).unwrap();
        let x = [0.8, -1.2];
        let h0 = (0.5 * 0.8 + -0.25 * -1.2 + 0.05f64).tanh(); // tanh(0.75)
        let h1 = (0.1 * 0.8 + 0.2 * -1.2 - 0.1f64).tanh(); // tanh(-0.26)
        let want = 1.5 * h0 - 2.0 * h1 + 0.3;
        assert!((forward(&p, &x).unwrap()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn linear_backward_closed_form() {
        let mut rng = stream(1, "test");
        let p = ScorerParams::init(Architecture::Linear, 3, 2, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let g = [0.25, -3.0];
        let grad = backward(&p, &x, &g).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(grad[r * 3 + c], g[r] * x[c]);
            }
        }
        assert_eq!(&grad[6..], &g);
    }

    fn fd_check(arch: Architecture, seed: u64) {
        let mut rng = stream(seed, "fd");
        let (d, n) = (3, 4);
        let p = ScorerParams::init(arch, d, n, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = backward(&p, &x, &g).unwrap();
        let obj = |q: &ScorerParams| dot(forward(q, &x).unwrap().as_slice(), &g);
        let h = 1e-5;
        for k in 0..p.len() {
            let mut plus = p.clone();
            plus.values_mut()[k] += h;
            let mut minus = p.clone();
            minus.values_mut()[k] -= h;
            let fd = (obj(&plus) - obj(&minus)) / (2.0 * h);
            let err = (fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1e-3);
            assert!(err < 1e-5, "param {k}: analytic {} vs fd {fd}", grad[k]);
        }
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        for seed in 0..10 {
            fd_check(Architecture::Mlp1 { hidden: 5 }, seed);
            fd_check(Architecture::Linear, seed);
        }
    }

    #[test]
    fn sgd_plain_and_momentum() {
        let mut p = ScorerParams::from_values(Architecture::Linear, 1, 1, vec![1.0, -1.0]).unwrap();
        let mut st = SgdState::default();
        sgd_step(&mut p, &[0.5, -2.0], 0.1, 0.0, &mut st).unwrap();
        assert!((p.values()[0] - 0.95).abs() < 1e-15);
        assert!((p.values()[1] - -0.8).abs() < 1e-15);
        let before = p.clone();
        sgd_step(&mut p, &[0.0, 0.0], 0.1, 0.0, &mut SgdState::default()).unwrap();
        assert_eq!(p, before);

        // v1 = g, v2 = 0.9 g + g = 1.9 g: total displacement 2.9 lr g.
        let mut p = ScorerParams::from_values(Architecture::Linear, 1, 1, vec![0.0, 0.0]).unwrap();
        let mut st = SgdState::default();
        for _ in 0..2 {
            sgd_step(&mut p, &[1.0, 2.0], 0.1, 0.9, &mut st).unwrap();
        }
        assert!((p.values()[0] + 0.29).abs() < 1e-15);
        assert!((p.values()[1] + 0.58).abs() < 1e-15);
        assert!((st.velocity[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn sgd_refuses_bad_inputs() {
        let mut p = ScorerParams::zeros(Architecture::Linear, 1, 1);
        let mut st = SgdState::default();
        assert!(matches!(
            sgd_step(&mut p, &[f64::NAN, 0.0], 0.1, 0.0, &mut st),
            Err(Error::Numeric(_))
        ));
        assert!(sgd_step(&mut p, &[0.0, 0.0], 0.0, 0.0, &mut st).is_err());
        assert!(sgd_step(&mut p, &[0.0, 0.0], 0.1, 1.0, &mut st).is_err());
        assert_eq!(p, ScorerParams::zeros(Architecture::Linear, 1, 1));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = Architecture::Mlp1 { hidden: 8 };
        let a = ScorerParams::init(arch, 16, 12, &mut stream(5, "init"));
        let b = ScorerParams::init(arch, 16, 12, &mut stream(5, "init"));
        assert_eq!(a, b);
        let v = a.values();
        assert!(v[..128].iter().all(|w| w.abs() <= 0.25));
        assert!(v[128..136].iter().all(|&b| b == 0.0));
        assert!(v[136..136 + 96].iter().all(|w| w.abs() <= 1.0 / 8f64.sqrt()));
        assert!(v[136 + 96..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"nope").is_err());
        let ck = Checkpoint {
            params: ScorerParams::zeros(Architecture::Linear, 2, 1),
            head: Head::Hierarchical,
            graph_hash: 1,
            seed: 2,
            weights: TaskWeights::uniform(1, 1.0).unwrap(),
            optimizer: SgdState::default(),
        };
        let mut bytes = ck.to_bytes();
        bytes.push(0);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        bytes.pop();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_bit_exact(
            vals in proptest::collection::vec(-1e6f64..1e6, 3 * 2 + 3 + 4 * 3 + 4),
            lam in proptest::collection::vec(1e-3f64..10.0, 4),
            vel in proptest::collection::vec(-1.0f64..1.0, 0..24),
            hash: u64,
            seed: u64,
            independent: bool,
        ) {
            let arch = Architecture::Mlp1 { hidden: 3 };
            let ck = Checkpoint {
                params: ScorerParams::from_values(arch, 2, 4, vals).unwrap(),
                head: if independent { Head::Independent } else { Head::Hierarchical },
                graph_hash: hash,
                seed,
                weights: TaskWeights::new(lam).unwrap(),
                optimizer: SgdState { velocity: vel },
            };
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            prop_assert_eq!(back, ck);
        }
    }
}
