//! Psychophysical threshold estimation: staircase-ordered trials against a
//! simulated observer, maximum-likelihood Gaussian-CDF (probit) fitting, and
//! the 75% discrimination threshold read off the fitted curve.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

/// Standard-normal 0.75 quantile.
pub const Z75: f64 = 0.674_489_750_196_081_7;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// log Φ(z), accurate deep into the lower tail.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        normal_cdf(z).ln()
    } else {
        // Asymptotic series: Φ(z) ≈ φ(z)/(-z) · (1 − 1/z² + 3/z⁴ − 15/z⁶)
        let z2 = z * z;
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln()
    }
}

/// φ(z) / Φ(z) (inverse Mills ratio), stable for very negative z.
fn mills(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI - log_normal_cdf(z)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsychTrial {
    pub degree: f64,
    /// `true` = "perceptually different".
    pub response: bool,
}

/// Which way discriminability grows along the degree axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Increasing,
    Decreasing,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Increasing => 1.0,
            Orientation::Decreasing => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::Increasing => "increasing",
            Orientation::Decreasing => "decreasing",
        }
    }
}

/// Fitted `P(different | d) = Φ(s (d − mu) / sigma)` with `s = ±1` from the
/// orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct PsychometricFit {
    pub mu: f64,
    pub sigma: f64,
    pub orientation: Orientation,
    pub threshold_75: f64,
    pub log_likelihood: f64,
    pub trial_count: usize,
    pub iterations: usize,
}

impl fmt::Display for PsychometricFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mu = {:.17e}", self.mu)?;
        writeln!(f, "sigma = {:.17e}", self.sigma)?;
        writeln!(f, "orientation = {}", self.orientation.name())?;
        writeln!(f, "threshold_75 = {:.17e}", self.threshold_75)?;
        writeln!(f, "log_likelihood = {:.17e}", self.log_likelihood)?;
        write!(f, "n = {}", self.trial_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedObserver {
    pub true_mu: f64,
    pub true_sigma: f64,
    pub lapse_rate: f64,
    pub seed: u64,
}

impl SimulatedObserver {
    pub fn new(true_mu: f64, true_sigma: f64, lapse_rate: f64, seed: u64) -> Result<Self> {
        if !(true_sigma > 0.0) {
            return Err(Error::Input(format!("observer sigma must be positive, got {true_sigma}")));
        }
        if !(0.0..=0.1).contains(&lapse_rate) {
            return Err(Error::Input(format!("lapse rate must be in [0, 0.1], got {lapse_rate}")));
        }
        Ok(Self {
            true_mu,
            true_sigma,
            lapse_rate,
            seed,
        })
    }

    /// Probability of a "different" response at `degree`.
    pub fn p_different(&self, degree: f64) -> f64 {
        (1.0 - self.lapse_rate) * normal_cdf((degree - self.true_mu) / self.true_sigma)
            + self.lapse_rate / 2.0
    }

    fn respond(&self, degree: f64, rng: &mut impl Rng) -> bool {
        rng.random::<f64>() < self.p_different(degree)
    }
}

/// 1-up/1-down staircase: a "different" response moves the next degree one
/// step toward less discriminable (down), a "same" response one step up.
pub fn staircase_run(
    observer: &SimulatedObserver,
    start_degree: f64,
    step: f64,
    n_trials: usize,
) -> Result<Vec<PsychTrial>> {
    if !(step > 0.0) || n_trials == 0 {
        return Err(Error::Input("staircase needs step > 0 and at least one trial".into()));
    }
    let mut rng = stream(observer.seed, "staircase");
    let mut trials = Vec::with_capacity(n_trials);
    // Degrees are kept on the integer lattice start + k·step so that revisits
    // land on exactly the same value.
    let mut k: i64 = 0;
    for _ in 0..n_trials {
        let degree = start_degree + k as f64 * step;
        let response = observer.respond(degree, &mut rng);
        trials.push(PsychTrial { degree, response });
        k += if response { -1 } else { 1 };
    }
    Ok(trials)
}

/// Runs a staircase to find the visited degree grid, then collects
/// `per_degree` responses at every visited degree (in staircase visiting
/// order).
pub fn staircase_session(
    observer: &SimulatedObserver,
    start_degree: f64,
    step: f64,
    staircase_trials: usize,
    per_degree: usize,
) -> Result<Vec<PsychTrial>> {
    let run = staircase_run(observer, start_degree, step, staircase_trials)?;
    let mut grid: Vec<f64> = Vec::new();
    for t in &run {
        if !grid.contains(&t.degree) {
            grid.push(t.degree);
        }
    }
    let mut rng = stream(observer.seed, "session");
    let mut trials = Vec::with_capacity(grid.len() * per_degree);
    for &degree in &grid {
        for _ in 0..per_degree {
            trials.push(PsychTrial {
                degree,
                response: observer.respond(degree, &mut rng),
            });
        }
    }
    Ok(trials)
}

/// Log-likelihood of `Φ(s (d − mu) / sigma)` over the trials.
pub fn log_likelihood(trials: &[PsychTrial], mu: f64, sigma: f64, orientation: Orientation) -> f64 {
    let s = orientation.sign();
    trials
        .iter()
        .map(|t| {
            let z = s * (t.degree - mu) / sigma;
            if t.response {
                log_normal_cdf(z)
            } else {
                log_normal_cdf(-z)
            }
        })
        .sum()
}

struct Derivs {
    ll: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

/// Value, gradient and Hessian in (mu, log sigma).
fn derivs(trials: &[PsychTrial], mu: f64, log_sigma: f64, s: f64) -> Derivs {
    let sigma = log_sigma.exp();
    let mut d = Derivs {
        ll: 0.0,
        grad: [0.0; 2],
        hess: [[0.0; 2]; 2],
    };
    for t in trials {
        let z = s * (t.degree - mu) / sigma;
        // dℓ/dz and d²ℓ/dz² for the Bernoulli probit log-likelihood.
        let (l, l1, l2) = if t.response {
            let m = mills(z);
            (log_normal_cdf(z), m, -m * (z + m))
        } else {
            let m = mills(-z);
            (log_normal_cdf(-z), -m, -m * (m - z))
        };
        d.ll += l;
        // z = s (d − mu) e^{−log σ}: ∂z/∂mu = −s/σ, ∂z/∂logσ = −z,
        // ∂²z/∂mu∂logσ = s/σ, ∂²z/∂logσ² = z, ∂²z/∂mu² = 0.
        let zm = -s / sigma;
        let zs = -z;
        d.grad[0] += l1 * zm;
        d.grad[1] += l1 * zs;
        d.hess[0][0] += l2 * zm * zm;
        d.hess[0][1] += l2 * zm * zs + l1 * s / sigma;
        d.hess[1][1] += l2 * zs * zs + l1 * z;
    }
    d.hess[1][0] = d.hess[0][1];
    d
}

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200;

fn fit_oriented(trials: &[PsychTrial], orientation: Orientation) -> Result<PsychometricFit> {
    let s = orientation.sign();
    let n = trials.len() as f64;
    let mean_of = |want: bool| {
        let sel: Vec<f64> = trials.iter().filter(|t| t.response == want).map(|t| t.degree).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let mean = trials.iter().map(|t| t.degree).sum::<f64>() / n;
    let spread = (trials.iter().map(|t| (t.degree - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if spread > 0.0 { spread } else { 1.0 };
    let mut mu = 0.5 * (mean_of(true) + mean_of(false));
    let mut log_sigma = scale.ln();
    let mut cur = derivs(trials, mu, log_sigma, s);
    // Per-trial gradient with mu measured in units of the degree spread, so
    // the tolerance is independent of sample size and axis scaling.
    let gnorm = |d: &Derivs| ((d.grad[0] * scale).powi(2) + d.grad[1].powi(2)).sqrt() / n;
    let done = |mu: f64, log_sigma: f64, ll: f64, iterations: usize| {
        let sigma = log_sigma.exp();
        PsychometricFit {
            mu,
            sigma,
            orientation,
            threshold_75: mu + s * Z75 * sigma,
            log_likelihood: ll,
            trial_count: trials.len(),
            iterations,
        }
    };

    for iter in 0..MAX_ITER {
        if gnorm(&cur) < GRAD_TOL {
            return Ok(done(mu, log_sigma, cur.ll, iter));
        }
        // Newton step when the Hessian is negative definite, otherwise a
        // short gradient step.
        let [[a, b], [_, c]] = cur.hess;
        let det = a * c - b * b;
        let dir = if a < 0.0 && det > 0.0 {
            [-(c * cur.grad[0] - b * cur.grad[1]) / det, -(a * cur.grad[1] - b * cur.grad[0]) / det]
        } else {
            let gn = ((cur.grad[0] * scale).powi(2) + cur.grad[1].powi(2)).sqrt();
            [cur.grad[0] * scale * scale / gn * 0.1, cur.grad[1] / gn * 0.1]
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (m2, ls2) = (mu + t * dir[0], log_sigma + t * dir[1]);
            let next = derivs(trials, m2, ls2, s);
            if next.ll.is_finite() && next.ll >= cur.ll {
                accepted = Some((m2, ls2, next));
                break;
            }
            t *= 0.5;
        }
        let Some((m2, ls2, next)) = accepted else {
            // No ascent left at floating-point resolution.
            break;
        };
        mu = m2;
        log_sigma = ls2;
        cur = next;
    }
    let g = gnorm(&cur);
    if g < 1e-6 {
        // Stalled at the rounding floor of the likelihood sum.
        return Ok(done(mu, log_sigma, cur.ll, MAX_ITER));
    }
    Err(Error::Numeric(format!(
        "psychometric fit did not converge: mu = {mu}, sigma = {}, |grad| = {g:e}",
        log_sigma.exp()
    )))
}

/// True when some cut point puts every "different" response on one side and
/// every "same" response on the other, so no finite maximum exists.
fn separated(trials: &[PsychTrial], orientation: Orientation) -> bool {
    let s = orientation.sign();
    let max_same = trials.iter().filter(|t| !t.response).map(|t| s * t.degree).fold(f64::NEG_INFINITY, f64::max);
    let min_diff = trials.iter().filter(|t| t.response).map(|t| s * t.degree).fold(f64::INFINITY, f64::min);
    max_same <= min_diff
}

/// Maximum-likelihood probit fit by damped Newton iterations on
/// `(mu, log sigma)`. Both orientations are fitted and the likelier one kept.
pub fn fit_psychometric(trials: &[PsychTrial]) -> Result<PsychometricFit> {
    if trials.len() < 10 {
        return Err(Error::Data(format!(
            "psychometric fit needs at least 10 trials, got {}",
            trials.len()
        )));
    }
    if let Some(t) = trials.iter().find(|t| !t.degree.is_finite()) {
        return Err(Error::Data(format!("non-finite degree {}", t.degree)));
    }
    let ones = trials.iter().filter(|t| t.response).count();
    if ones == 0 || ones == trials.len() {
        return Err(Error::Data(
            "degenerate responses: all trials have the same response".into(),
        ));
    }
    for o in [Orientation::Increasing, Orientation::Decreasing] {
        if separated(trials, o) {
            return Err(Error::Numeric(format!(
                "responses are perfectly separated ({}): no finite maximum-likelihood fit",
                o.name()
            )));
        }
    }
    let inc = fit_oriented(trials, Orientation::Increasing);
    let dec = fit_oriented(trials, Orientation::Decreasing);
    match (inc, dec) {
        (Ok(a), Ok(b)) => Ok(if b.log_likelihood > a.log_likelihood { b } else { a }),
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(_)) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeLabel {
    Fake,
    Real,
}

/// Fake iff the degree lies on the discriminable side of the threshold
/// (boundary included).
pub fn degree_to_label(fit: &PsychometricFit, degree: f64) -> DegreeLabel {
    let fake = match fit.orientation {
        Orientation::Increasing => degree >= fit.threshold_75,
        Orientation::Decreasing => degree <= fit.threshold_75,
    };
    if fake {
        DegreeLabel::Fake
    } else {
        DegreeLabel::Real
    }
}

/// Reads `degree,response` lines (`#` comments and an optional header allowed).
pub fn parse_trials(text: &str) -> Result<Vec<PsychTrial>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (out.is_empty() && line.starts_with("degree")) {
            continue;
        }
        let mut parts = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty());
        let (Some(d), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Data(format!("line {}: expected `degree,response`", idx + 1)));
        };
        let degree: f64 = d
            .parse()
            .map_err(|_| Error::Data(format!("line {}: bad degree `{d}`", idx + 1)))?;
        let response = match r {
            "1" => true,
            "0" => false,
            _ => return Err(Error::Data(format!("line {}: response must be 0 or 1", idx + 1))),
        };
        out.push(PsychTrial { degree, response });
    }
    Ok(out)
}

pub fn trials_to_text(trials: &[PsychTrial]) -> String {
    let mut out = String::from("degree,response\n");
    for t in trials {
        out.push_str(&format!("{:?},{}\n", t.degree, t.response as u8));
    }
    out
}
