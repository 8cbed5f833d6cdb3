//! Hypoexponential (series phase-type) distribution kernels.
//!
//! A [`HypoExp`] is the law of a sum of independent exponentials with the
//! given ordered rates; the empty rate list is the point mass at zero. All
//! evaluations go through the occupancy vector of the associated sequential
//! phase chain, computed by uniformization of the upper-bidiagonal generator
//! (diagonal `-mu_l`, superdiagonal `+mu_l`). That route is valid for
//! repeated rates, where the textbook partial-fraction formula cancels
//! catastrophically; the distinct-rate closed form is kept in the test suite
//! as an oracle only.

use thiserror::Error;

/// Uniformization series are truncated once the Poisson tail drops below this.
const TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseTypeError {
    #[error("rate {value} must be positive and finite")]
    NonpositiveRate { value: f64 },
    #[error("the empty phase list has no density")]
    EmptyPhaseList,
    #[error("upper rate list must extend the lower one by exactly one rate")]
    RateListMismatch,
}

/// Sum of independent exponentials in series, `B = B_1 + ... + B_k` with
/// `B_l ~ Exp(rates[l])`. `k = 0` encodes the degenerate point mass at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HypoExp {
    rates: Vec<f64>,
}

impl HypoExp {
    pub fn new(rates: Vec<f64>) -> Result<Self, PhaseTypeError> {
        for &rate in &rates {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(PhaseTypeError::NonpositiveRate { value: rate });
            }
        }
        Ok(Self { rates })
    }

    /// The degenerate distribution concentrated at zero.
    pub fn point_mass() -> Self {
        Self { rates: Vec::new() }
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// `P{B > x}`. Returns 1 for `x < 0`; the point mass gives 0 for `x >= 0`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self.rates.len() {
            0 => 0.0,
            1 => (-self.rates[0] * x).exp(),
            _ => occupancy(&self.rates, x).iter().sum::<f64>().min(1.0),
        }
    }

    /// Density of `B` at `x`; zero for `x < 0`.
    pub fn pdf(&self, x: f64) -> Result<f64, PhaseTypeError> {
        let k = self.rates.len();
        if k == 0 {
            return Err(PhaseTypeError::EmptyPhaseList);
        }
        if x < 0.0 {
            return Ok(0.0);
        }
        if k == 1 {
            return Ok(self.rates[0] * (-self.rates[0] * x).exp());
        }
        // Probability flux out of the last phase.
        let occ = occupancy(&self.rates, x);
        Ok(self.rates[k - 1] * occ[k - 1])
    }

    /// Mean `sum(1/rates)`.
    pub fn mean(&self) -> f64 {
        self.rates.iter().map(|r| 1.0 / r).sum()
    }
}

/// Exponential patience clock `D` with rate `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpatienceClock {
    nu: f64,
}

impl ImpatienceClock {
    pub fn new(nu: f64) -> Result<Self, PhaseTypeError> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(PhaseTypeError::NonpositiveRate { value: nu });
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `P{D > t}`; 1 for negative `t`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            1.0
        } else {
            (-self.nu * t).exp()
        }
    }
}

/// Occupancy probabilities of the sequential phase chain at time `x >= 0`,
/// started in phase 1: entry `l` is `P{B_1 + .. + B_l <= x < B_1 + .. + B_{l+1}}`.
///
/// Uniformization: with `q = max(rates)` and `P = I + Q/q`, the occupancy is
/// `sum_n pois(n; qx) * e_1 P^n`, truncated when the accumulated Poisson mass
/// exceeds `1 - TAIL_TOL` (the iterate has L1 norm at most one, so the
/// discarded tail bounds the error). Weights switch to log-space updates when
/// `e^{-qx}` would underflow.
fn occupancy(rates: &[f64], x: f64) -> Vec<f64> {
    let k = rates.len();
    debug_assert!(k > 0 && x >= 0.0);
    if x == 0.0 {
        let mut occ = vec![0.0; k];
        occ[0] = 1.0;
        return occ;
    }
    let q = rates.iter().cloned().fold(0.0, f64::max);
    let a = q * x;
    let log_space = a > 700.0;

    let mut v = vec![0.0; k];
    v[0] = 1.0;
    let mut occ = vec![0.0; k];
    let mut next = vec![0.0; k];

    let mut weight = if log_space { 0.0 } else { (-a).exp() };
    let mut log_weight = -a;
    let ln_a = a.ln();
    let mut cumulative = 0.0;
    let n_max = (a + 12.0 * a.sqrt() + 80.0).ceil() as usize;

    for n in 0..=n_max {
        if log_space {
            weight = log_weight.exp();
        }
        if weight > 0.0 {
            for l in 0..k {
                occ[l] += weight * v[l];
            }
            cumulative += weight;
            if 1.0 - cumulative < TAIL_TOL {
                break;
            }
        }
        // v <- v P with the bidiagonal uniformized kernel.
        for l in 0..k {
            let stay = v[l] * (1.0 - rates[l] / q);
            let from_prev = if l > 0 { v[l - 1] * rates[l - 1] / q } else { 0.0 };
            next[l] = stay + from_prev;
        }
        std::mem::swap(&mut v, &mut next);
        let m = (n + 1) as f64;
        if log_space {
            log_weight += ln_a - m.ln();
        } else {
            weight *= a / m;
        }
    }
    occ
}

/// `P{B_lo <= tau < B_hi, D > t}` for adjacent phase sums, where `hi` extends
/// `lo` by exactly one rate. Equals
/// `(survival(hi, tau) - survival(lo, tau)) * P{D > t}`; computed as the
/// occupancy of the last phase of `hi`, which is the same quantity without
/// the subtraction.
pub fn band_probability(
    lo: &HypoExp,
    hi: &HypoExp,
    tau: f64,
    clock: &ImpatienceClock,
    t: f64,
) -> Result<f64, PhaseTypeError> {
    if hi.len() != lo.len() + 1 || hi.rates[..lo.len()] != lo.rates[..] {
        return Err(PhaseTypeError::RateListMismatch);
    }
    if tau < 0.0 {
        return Ok(0.0);
    }
    let band = match hi.len() {
        1 => (-hi.rates[0] * tau).exp(),
        k => occupancy(&hi.rates, tau)[k - 1],
    };
    Ok(band * clock.survival(t))
}

/// Residual of the survival identity
/// `P{B_1^i > x} = sum_{j<=i} (1/mu_j) f_{B_1^j}(x)`; mathematically zero.
/// Both sides are evaluated through their own phase chains, so the value is a
/// genuine consistency probe rather than an algebraic tautology.
pub fn identity_residual(rates: &[f64], x: f64) -> Result<f64, PhaseTypeError> {
    if rates.is_empty() {
        return Err(PhaseTypeError::EmptyPhaseList);
    }
    let full = HypoExp::new(rates.to_vec())?;
    let mut sum = 0.0;
    for j in 1..=rates.len() {
        let prefix = HypoExp::new(rates[..j].to_vec())?;
        sum += prefix.pdf(x)? / rates[j - 1];
    }
    Ok(full.survival(x) - sum)
}

/// `E min{x B, D}` for the scaled phase sum against the patience clock:
/// `(1 - prod_l mu_l / (mu_l + nu x)) / nu`. The empty phase list gives zero.
pub fn expected_min_scaled(h: &HypoExp, x: f64, clock: &ImpatienceClock) -> f64 {
    debug_assert!(x >= 0.0);
    let nu = clock.nu();
    let product: f64 = h.rates.iter().map(|&m| m / (m + nu * x)).product();
    (1.0 - product) / nu
}
