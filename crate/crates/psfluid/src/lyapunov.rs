//! Numerical probes of Lyapunov candidates for the routed fluid model.
//!
//! The routed generalisation lets every class receive external arrivals,
//! route completed work through a substochastic matrix `P`, and abandon at a
//! class-specific rate:
//!
//! ```text
//! z_i' = lambda_i + sum_j P_{j,i} mu_j z_j / |z| - mu_i z_i / |z| - nu_i z_i,
//! ```
//!
//! with the usual empty-state ratio convention. The tandem special case
//! (`P_{i,i+1} = 1`, arrivals only into class 1, equal `nu`) reproduces the
//! plain multistage model exactly, which the tests pin down.
//!
//! Whether a Lyapunov function exists for routing and impatience together is
//! open; this module evaluates candidate functions and their flow derivatives
//! and scans boxes of states for sign violations, producing evidence rather
//! than proofs. Candidates:
//!
//! * entropy: `L(z) = sum_i z_i ln((z_i/|z|) / (z_i*/|z*|))`,
//! * quadratic: `L(z) = sum_i (z_i - z_i*)^2 / (mu_i z_i*/|z*|)`,
//! * two-class weighted quadratic with coefficients
//!   `alpha_i = 1 / ([(1 - P_{i,i}) mu_i + P_{j,i} mu_j] q_i)` for supplied
//!   positive weights `q_1, q_2` (the weights are part of the configuration;
//!   there is no canonical default).

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ModelParams, StateVector};

/// A flow derivative above this is reported as a sign violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-12;

const INVARIANT_TOL: f64 = 1e-12;
const INVARIANT_MAX_ITER: usize = 100_000;
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error("invalid routed model: {0}")]
    InvalidParams(String),
    #[error("coordinate {index} must be strictly positive, got {value}")]
    NonpositiveCoordinate { index: usize, value: f64 },
    #[error("the two-class candidate needs the weights q1, q2")]
    MissingWeights,
    #[error("the two-class candidate needs exactly 2 classes, got {got}")]
    WrongDimension { got: usize },
    #[error("no invariant point found within {iterations} damped iterations")]
    NoInvariantPoint { iterations: usize },
}

/// Multiclass processor-sharing fluid model with Markovian routing and
/// per-class impatience.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedModelParams {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    routing: Vec<Vec<f64>>,
}

impl RoutedModelParams {
    pub fn new(
        lambda: Vec<f64>,
        mu: Vec<f64>,
        nu: Vec<f64>,
        routing: Vec<Vec<f64>>,
    ) -> Result<Self, LyapunovError> {
        let classes = mu.len();
        if classes == 0 {
            return Err(LyapunovError::InvalidParams("no classes".into()));
        }
        if lambda.len() != classes || nu.len() != classes || routing.len() != classes {
            return Err(LyapunovError::InvalidParams(
                "lambda, mu, nu and routing must all have one entry per class".into(),
            ));
        }
        if lambda.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return Err(LyapunovError::InvalidParams(
                "arrival rates must be non-negative".into(),
            ));
        }
        if lambda.iter().all(|&l| l == 0.0) {
            return Err(LyapunovError::InvalidParams(
                "at least one arrival rate must be positive".into(),
            ));
        }
        if mu.iter().any(|&m| !(m.is_finite() && m > 0.0))
            || nu.iter().any(|&n| !(n.is_finite() && n > 0.0))
        {
            return Err(LyapunovError::InvalidParams(
                "service and impatience rates must be positive".into(),
            ));
        }
        for row in &routing {
            if row.len() != classes {
                return Err(LyapunovError::InvalidParams(
                    "routing matrix must be square".into(),
                ));
            }
            if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                return Err(LyapunovError::InvalidParams(
                    "routing probabilities must be non-negative".into(),
                ));
            }
            if row.iter().sum::<f64>() > 1.0 {
                return Err(LyapunovError::InvalidParams(
                    "routing rows must sum to at most 1".into(),
                ));
            }
        }
        Ok(Self {
            lambda,
            mu,
            nu,
            routing,
        })
    }

    /// Embeds the tandem multistage model: arrivals into class 1 only,
    /// routing `i -> i+1` with probability one, equal impatience rates.
    pub fn tandem(params: &ModelParams) -> Self {
        let classes = params.stages();
        let mut lambda = vec![0.0; classes];
        lambda[0] = params.lambda();
        let mut routing = vec![vec![0.0; classes]; classes];
        for i in 0..classes.saturating_sub(1) {
            routing[i][i + 1] = 1.0;
        }
        Self {
            lambda,
            mu: params.mu().to_vec(),
            nu: vec![params.nu(); classes],
            routing,
        }
    }

    pub fn classes(&self) -> usize {
        self.mu.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn routing(&self) -> &[Vec<f64>] {
        &self.routing
    }
}

/// Configuration for candidates that need extra inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LyapunovConfig {
    /// Positive weights `(q1, q2)` of the two-class quadratic candidate.
    pub q: Option<(f64, f64)>,
}

/// Drift of the routed fluid model at `z`.
pub fn routed_fluid_rhs(params: &RoutedModelParams, z: &StateVector) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    routed_rhs_into(params, z.as_slice(), &mut out);
    out
}

fn routed_rhs_into(params: &RoutedModelParams, z: &[f64], out: &mut [f64]) {
    let classes = params.classes();
    let norm: f64 = z.iter().sum();
    let inv_norm = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    for i in 0..classes {
        let mut value = params.lambda[i] - params.mu[i] * z[i] * inv_norm - params.nu[i] * z[i];
        for j in 0..classes {
            value += params.routing[j][i] * params.mu[j] * z[j] * inv_norm;
        }
        out[i] = value;
    }
}

/// Invariant point of the routed model by damped fixed-point iteration on the
/// stationarity system `z_i = (lambda_i + sum_j P_{j,i} mu_j z_j/|z|) /
/// (mu_i/|z| + nu_i)`. Existence is not guaranteed a priori; failure to
/// converge is reported, not papered over.
pub fn routed_invariant_point(params: &RoutedModelParams) -> Result<StateVector, LyapunovError> {
    let classes = params.classes();
    let total_lambda: f64 = params.lambda.iter().sum();
    let mut z: Vec<f64> = params
        .nu
        .iter()
        .map(|nu| total_lambda / (classes as f64 * nu))
        .collect();
    let mut target = vec![0.0; classes];

    for _ in 0..INVARIANT_MAX_ITER {
        let norm: f64 = z.iter().sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(LyapunovError::NoInvariantPoint {
                iterations: INVARIANT_MAX_ITER,
            });
        }
        for i in 0..classes {
            let mut inflow = params.lambda[i];
            for j in 0..classes {
                inflow += params.routing[j][i] * params.mu[j] * z[j] / norm;
            }
            target[i] = inflow / (params.mu[i] / norm + params.nu[i]);
        }
        let gap = z
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        for i in 0..classes {
            z[i] += DAMPING * (target[i] - z[i]);
        }
        if gap <= INVARIANT_TOL {
            return StateVector::new(z).map_err(|_| LyapunovError::NoInvariantPoint {
                iterations: INVARIANT_MAX_ITER,
            });
        }
    }
    Err(LyapunovError::NoInvariantPoint {
        iterations: INVARIANT_MAX_ITER,
    })
}

fn require_positive(z: &StateVector) -> Result<(), LyapunovError> {
    for (index, &value) in z.as_slice().iter().enumerate() {
        if value <= 0.0 {
            return Err(LyapunovError::NonpositiveCoordinate { index, value });
        }
    }
    Ok(())
}

/// Relative entropy of the proportion vector of `z` against that of `z_star`.
/// Zero whenever `z` is proportional to `z_star`; not sign-definite in
/// general.
pub fn entropy_value(z: &StateVector, z_star: &StateVector) -> Result<f64, LyapunovError> {
    require_positive(z)?;
    require_positive(z_star)?;
    let norm = z.l1_norm();
    let norm_star = z_star.l1_norm();
    Ok(z.as_slice()
        .iter()
        .zip(z_star.as_slice())
        .map(|(&zi, &zsi)| zi * ((zi / norm) / (zsi / norm_star)).ln())
        .sum())
}

/// Weighted squared distance to `z_star` with weights `mu_i z_i*/|z*|`;
/// zero exactly at `z = z_star`.
pub fn quadratic_value(
    z: &StateVector,
    z_star: &StateVector,
    mu: &[f64],
) -> Result<f64, LyapunovError> {
    require_positive(z_star)?;
    let norm_star = z_star.l1_norm();
    Ok(z.as_slice()
        .iter()
        .zip(z_star.as_slice())
        .zip(mu)
        .map(|((&zi, &zsi), &mi)| {
            let d = zi - zsi;
            d * d / (mi * zsi / norm_star)
        })
        .sum())
}

fn two_class_alphas(
    params: &RoutedModelParams,
    config: &LyapunovConfig,
) -> Result<(f64, f64), LyapunovError> {
    if params.classes() != 2 {
        return Err(LyapunovError::WrongDimension {
            got: params.classes(),
        });
    }
    let (q1, q2) = config.q.ok_or(LyapunovError::MissingWeights)?;
    if q1 <= 0.0 || q2 <= 0.0 {
        return Err(LyapunovError::InvalidParams(
            "two-class weights must be positive".into(),
        ));
    }
    let p = &params.routing;
    let mu = &params.mu;
    let alpha1 = 1.0 / (((1.0 - p[0][0]) * mu[0] + p[1][0] * mu[1]) * q1);
    let alpha2 = 1.0 / (((1.0 - p[1][1]) * mu[1] + p[0][1] * mu[0]) * q2);
    Ok((alpha1, alpha2))
}

/// The two-class weighted quadratic `alpha_1 (z_1-z_1*)^2 + alpha_2
/// (z_2-z_2*)^2`; the invariant point is found internally.
pub fn two_class_quadratic(
    params: &RoutedModelParams,
    config: &LyapunovConfig,
    z: &StateVector,
) -> Result<f64, LyapunovError> {
    let (alpha1, alpha2) = two_class_alphas(params, config)?;
    let z_star = routed_invariant_point(params)?;
    let d1 = z[0] - z_star[0];
    let d2 = z[1] - z_star[1];
    Ok(alpha1 * d1 * d1 + alpha2 * d2 * d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Entropy,
    Quadratic,
    TwoClass,
}

impl CandidateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateKind::Entropy => "entropy",
            CandidateKind::Quadratic => "quadratic",
            CandidateKind::TwoClass => "two-class",
        }
    }
}

/// A candidate Lyapunov function bound to a model and its invariant point,
/// ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Probe<'p> {
    params: &'p RoutedModelParams,
    kind: CandidateKind,
    z_star: StateVector,
    alphas: Option<(f64, f64)>,
}

impl<'p> Probe<'p> {
    pub fn new(
        kind: CandidateKind,
        params: &'p RoutedModelParams,
        config: &LyapunovConfig,
    ) -> Result<Self, LyapunovError> {
        let z_star = routed_invariant_point(params)?;
        Self::with_invariant_point(kind, params, z_star, config)
    }

    /// Builds the probe around an externally computed invariant point, e.g.
    /// the exact tandem one.
    pub fn with_invariant_point(
        kind: CandidateKind,
        params: &'p RoutedModelParams,
        z_star: StateVector,
        config: &LyapunovConfig,
    ) -> Result<Self, LyapunovError> {
        require_positive(&z_star)?;
        let alphas = match kind {
            CandidateKind::TwoClass => Some(two_class_alphas(params, config)?),
            _ => None,
        };
        Ok(Self {
            params,
            kind,
            z_star,
            alphas,
        })
    }

    pub fn z_star(&self) -> &StateVector {
        &self.z_star
    }

    pub fn kind(&self) -> CandidateKind {
        self.kind
    }

    pub fn value(&self, z: &StateVector) -> Result<f64, LyapunovError> {
        match self.kind {
            CandidateKind::Entropy => entropy_value(z, &self.z_star),
            CandidateKind::Quadratic => quadratic_value(z, &self.z_star, &self.params.mu),
            CandidateKind::TwoClass => {
                let (a1, a2) = self.alphas.expect("checked at construction");
                let d1 = z[0] - self.z_star[0];
                let d2 = z[1] - self.z_star[1];
                Ok(a1 * d1 * d1 + a2 * d2 * d2)
            }
        }
    }

    /// Analytic gradient of the candidate. For the entropy the `|z|` coupling
    /// terms cancel because the proportions sum to one, leaving just the log
    /// ratios.
    pub fn gradient(&self, z: &StateVector) -> Result<Vec<f64>, LyapunovError> {
        match self.kind {
            CandidateKind::Entropy => {
                require_positive(z)?;
                let norm = z.l1_norm();
                let norm_star = self.z_star.l1_norm();
                Ok(z.as_slice()
                    .iter()
                    .zip(self.z_star.as_slice())
                    .map(|(&zi, &zsi)| ((zi / norm) / (zsi / norm_star)).ln())
                    .collect())
            }
            CandidateKind::Quadratic => {
                let norm_star = self.z_star.l1_norm();
                Ok(z.as_slice()
                    .iter()
                    .zip(self.z_star.as_slice())
                    .zip(&self.params.mu)
                    .map(|((&zi, &zsi), &mi)| 2.0 * (zi - zsi) / (mi * zsi / norm_star))
                    .collect())
            }
            CandidateKind::TwoClass => {
                let (a1, a2) = self.alphas.expect("checked at construction");
                Ok(vec![
                    2.0 * a1 * (z[0] - self.z_star[0]),
                    2.0 * a2 * (z[1] - self.z_star[1]),
                ])
            }
        }
    }

    /// Derivative of the candidate along the fluid flow: `grad L . z'`.
    pub fn flow_derivative(&self, z: &StateVector) -> Result<f64, LyapunovError> {
        let gradient = self.gradient(z)?;
        let rhs = routed_fluid_rhs(self.params, z);
        Ok(gradient.iter().zip(&rhs).map(|(g, d)| g * d).sum())
    }
}

/// Convenience wrapper: builds a probe for the candidate and evaluates the
/// flow derivative at one state.
pub fn flow_derivative(
    kind: CandidateKind,
    params: &RoutedModelParams,
    config: &LyapunovConfig,
    z: &StateVector,
) -> Result<f64, LyapunovError> {
    Probe::new(kind, params, config)?.flow_derivative(z)
}

/// An axis-aligned box in `(0, inf)^I`; lower bounds are exclusive when zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, LyapunovError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(LyapunovError::InvalidParams(
                "region bounds must be non-empty and of equal length".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && *l >= 0.0 && h > l) {
                return Err(LyapunovError::InvalidParams(
                    "region bounds must satisfy 0 <= lo < hi".into(),
                ));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The box `(0, hi)^dim`.
    pub fn cube(hi: f64, dim: usize) -> Result<Self, LyapunovError> {
        Self::new(vec![0.0; dim], vec![hi; dim])
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub index: usize,
    pub state: Vec<f64>,
    pub value: f64,
    pub derivative: f64,
    pub violation: bool,
}

/// Outcome of a sign scan: every sample, the worst derivative seen, and the
/// number of positive-derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub samples: Vec<ScanSample>,
    pub max_derivative: Option<f64>,
    pub violations: usize,
}

impl ScanReport {
    /// `sample_idx,z1,...,zI,L,dLdt,violation_flag` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, classes: usize) -> io::Result<()> {
        write!(w, "sample_idx")?;
        for i in 1..=classes {
            write!(w, ",z{i}")?;
        }
        writeln!(w, ",L,dLdt,violation_flag")?;
        for sample in &self.samples {
            write!(w, "{}", sample.index)?;
            for v in &sample.state {
                write!(w, ",{v}")?;
            }
            writeln!(
                w,
                ",{},{},{}",
                sample.value,
                sample.derivative,
                u8::from(sample.violation)
            )?;
        }
        Ok(())
    }
}

/// Samples seeded pseudo-random states in the region and records the
/// candidate value and flow derivative at each; derivatives above
/// [`VIOLATION_TOLERANCE`] are flagged. Zero samples give an empty report.
pub fn sign_scan(
    probe: &Probe<'_>,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<ScanReport, LyapunovError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = region.lo.len();
    let mut report = ScanReport {
        samples: Vec::with_capacity(samples),
        max_derivative: None,
        violations: 0,
    };
    for index in 0..samples {
        let state: Vec<f64> = (0..dim)
            .map(|d| {
                let u = loop {
                    let u: f64 = rng.gen();
                    if u > 0.0 {
                        break u;
                    }
                };
                region.lo[d] + u * (region.hi[d] - region.lo[d])
            })
            .collect();
        let z = StateVector::new(state.clone()).expect("sampled state is positive");
        let value = probe.value(&z)?;
        let derivative = probe.flow_derivative(&z)?;
        let violation = derivative > VIOLATION_TOLERANCE;
        if violation {
            report.violations += 1;
        }
        report.max_derivative = Some(match report.max_derivative {
            Some(m) => m.max(derivative),
            None => derivative,
        });
        report.samples.push(ScanSample {
            index,
            state,
            value,
            derivative,
            violation,
        });
    }
    Ok(report)
}
