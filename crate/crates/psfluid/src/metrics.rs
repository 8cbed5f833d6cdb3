//! Closed-form job-board analytics.
//!
//! With job arrivals at rate `lambda`, freelancer arrivals at rate `mu`,
//! patience rate `nu` and an application limit `I`, the invariant fluid state
//! of the board becomes geometric under the substitution
//! `u = mu / (mu + nu |z*|)`:
//!
//! ```text
//! z_i* = (lambda/nu) u^i (1-u),   i = 0..I-1,
//! ```
//!
//! where `u` in `(0,1)` is the unique root of `(lambda/mu) sum_{i=1..I} u^i = 1`
//! (requires the equal-rate overload `lambda I / mu > 1`). Balancing the exit
//! fluxes gives the chance for an applicant to win a job,
//!
//! ```text
//! P_I = sum_{i=1..I-1} (1/i) (nu z_i*/lambda) + (1/I) mu z_{I-1}*/(lambda |z*|)
//!     = sum_{i=1..I-1} (1/i) u^i (1-u) + (1/I) u^I,
//! ```
//!
//! computed from both expressions and cross-checked. Neither `P_I` nor its
//! large-limit approximation `P_inf = -(lambda/(lambda+mu)) ln(lambda/(lambda+mu))`
//! depends on the patience rate, because the equation for `u` does not.

use thiserror::Error;

use crate::model::StateVector;

const U_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("rate `{name}` must be positive and finite, got {value}")]
    NonpositiveRate { name: &'static str, value: f64 },
    #[error("application limit must be at least 1")]
    ZeroLimit,
    #[error("job board is not overloaded: lambda I / mu = {load} <= 1")]
    NotOverloaded { load: f64 },
}

/// Job-board parameters. Construction validates positivity and records
/// whether the board is overloaded; the limit analytics require overload,
/// while the large-limit approximation works regardless.
#[derive(Debug, Clone, PartialEq)]
pub struct FreelanceParams {
    lambda: f64,
    mu: f64,
    nu: f64,
    limit: usize,
    overloaded: bool,
}

impl FreelanceParams {
    pub fn new(lambda: f64, mu: f64, nu: f64, limit: usize) -> Result<Self, MetricsError> {
        for (name, value) in [("lambda", lambda), ("mu", mu), ("nu", nu)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(MetricsError::NonpositiveRate { name, value });
            }
        }
        if limit == 0 {
            return Err(MetricsError::ZeroLimit);
        }
        let load = lambda * limit as f64 / mu;
        Ok(Self {
            lambda,
            mu,
            nu,
            limit,
            overloaded: load > 1.0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn is_overloaded(&self) -> bool {
        self.overloaded
    }

    fn require_overloaded(&self) -> Result<(), MetricsError> {
        if self.overloaded {
            Ok(())
        } else {
            Err(MetricsError::NotOverloaded {
                load: self.lambda * self.limit as f64 / self.mu,
            })
        }
    }
}

/// The unique `u` in `(0,1)` with `(lambda/mu) sum_{i=1..I} u^i = 1`,
/// found by bisection; the left side is strictly increasing from 0 to
/// `lambda I / mu > 1`.
pub fn solve_u(params: &FreelanceParams) -> Result<f64, MetricsError> {
    params.require_overloaded()?;
    let ratio = params.lambda / params.mu;
    let g = |u: f64| {
        let mut power = 1.0;
        let mut sum = 0.0;
        for _ in 0..params.limit {
            power *= u;
            sum += power;
        }
        ratio * sum - 1.0
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while hi - lo > U_TOL {
        let mid = 0.5 * (lo + hi);
        let value = g(mid);
        if value == 0.0 {
            return Ok(mid);
        }
        if value < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Invariant board state in application-count coordinates,
/// `z_i* = (lambda/nu) u^i (1-u)` for `i = 0..I-1`. Coincides with the
/// equal-rate multistage invariant point under the shift from stage `i+1`
/// to `i` applications.
pub fn geometric_invariant(params: &FreelanceParams) -> Result<StateVector, MetricsError> {
    let u = solve_u(params)?;
    let scale = params.lambda / params.nu;
    let mut values = Vec::with_capacity(params.limit);
    let mut power = 1.0;
    for _ in 0..params.limit {
        values.push(scale * power * (1.0 - u));
        power *= u;
    }
    Ok(StateVector::new(values).expect("geometric coordinates are positive"))
}

/// Chance for an applicant to win a job under the application limit,
/// computed from the exit-flux expression over the invariant state and
/// cross-checked against the simplified `u`-only form; the two agree to
/// within 1e-12 by construction.
pub fn p_limit(params: &FreelanceParams) -> Result<f64, MetricsError> {
    let u = solve_u(params)?;
    let z_star = geometric_invariant(params)?;
    let norm = z_star.l1_norm();
    let limit = params.limit;

    // Flux balance: jobs leaving with i applications out of impatience, plus
    // jobs that collect the full set.
    let mut mechanistic = 0.0;
    for i in 1..limit {
        mechanistic += (params.nu * z_star[i] / params.lambda) / i as f64;
    }
    mechanistic +=
        params.mu * z_star[limit - 1] / (params.lambda * norm) / limit as f64;

    // Simplified form in u alone.
    let mut simplified = 0.0;
    let mut power = 1.0;
    for i in 1..limit {
        power *= u;
        simplified += power * (1.0 - u) / i as f64;
    }
    simplified += power * u / limit as f64;

    debug_assert!(
        (mechanistic - simplified).abs() < 1e-12,
        "flux form {mechanistic} vs u-form {simplified}"
    );
    Ok(mechanistic)
}

/// Large-limit approximation `-(1-u_inf) ln(1-u_inf)` with
/// `u_inf = mu/(lambda+mu)`; needs no overload assumption.
pub fn p_infinity(params: &FreelanceParams) -> f64 {
    let share = params.lambda / (params.lambda + params.mu);
    -share * share.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid;
    use crate::model::ModelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    fn params(lambda: f64, mu: f64, nu: f64, limit: usize) -> FreelanceParams {
        FreelanceParams::new(lambda, mu, nu, limit).unwrap()
    }

    #[test]
    fn solve_u_linear_case() {
        // lambda=2, mu=1, I=1: 2u = 1.
        let u = solve_u(&params(2.0, 1.0, 1.0, 1)).unwrap();
        assert!((u - 0.5).abs() < 1e-13);
    }

    #[test]
    fn solve_u_quadratic_case() {
        // lambda=mu, I=2: u + u^2 = 1 has the golden-ratio root.
        let u = solve_u(&params(1.0, 1.0, 1.0, 2)).unwrap();
        assert!((u - GOLDEN).abs() < 1e-13);
    }

    #[test]
    fn solve_u_large_limit_tends_to_half() {
        // lambda=mu: u -> mu/(lambda+mu) = 1/2 as the limit grows.
        let u = solve_u(&params(1.0, 1.0, 1.0, 200)).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
    }

    #[test]
    fn underload_is_rejected() {
        // lambda = mu, I = 1 sits exactly at load 1.
        let p = params(1.0, 1.0, 1.0, 1);
        assert!(!p.is_overloaded());
        assert!(matches!(
            solve_u(&p),
            Err(MetricsError::NotOverloaded { .. })
        ));
    }

    #[test]
    fn geometric_invariant_single_class() {
        // lambda=2, mu=1, nu=1, I=1: z_0* = (lambda/nu) u^0 (1-u) = 1.
        let z = geometric_invariant(&params(2.0, 1.0, 1.0, 1)).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_norm_identities() {
        let p = params(1.3, 0.9, 0.6, 4);
        let u = solve_u(&p).unwrap();
        let z = geometric_invariant(&p).unwrap();
        // Geometric sum: |z*| = (lambda/nu)(1 - u^I).
        let expected = p.lambda() / p.nu() * (1.0 - u.powi(4));
        assert!((z.l1_norm() - expected).abs() < 1e-12);
        // Second expression from the u-equation: mu(1-u)/(nu u).
        let alt = p.mu() * (1.0 - u) / (p.nu() * u);
        assert!((z.l1_norm() - alt).abs() < 1e-10);
    }

    #[test]
    fn geometric_invariant_matches_multistage_point() {
        // Application count i corresponds to service stage i+1.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let mu = 0.3 + rng.gen::<f64>() * 2.0;
            let limit = 1 + rng.gen_range(0..5usize);
            // Force overload with margin.
            let lambda = mu / limit as f64 * (1.2 + rng.gen::<f64>() * 2.0);
            let nu = 0.2 + rng.gen::<f64>() * 2.0;
            let fl = params(lambda, mu, nu, limit);
            let ps = ModelParams::new(lambda, vec![mu; limit], nu).unwrap();
            let a = geometric_invariant(&fl).unwrap();
            let b = fluid::invariant_point(&ps).unwrap().z_star;
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn p_limit_single_application() {
        // I=1: only the full-applications term survives, P_1 = u.
        let p = params(2.0, 1.0, 1.0, 1);
        assert!((p_limit(&p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p_limit_two_applications() {
        // lambda=mu, I=2: u(1-u) + u^2/2 at the golden-ratio u.
        let p = params(1.0, 1.0, 1.0, 2);
        let expected = GOLDEN * (1.0 - GOLDEN) + GOLDEN * GOLDEN / 2.0;
        let value = p_limit(&p).unwrap();
        assert!((value - expected).abs() < 1e-12);
        assert!((value - 0.427_050_983_124_842_27).abs() < 1e-12);
    }

    #[test]
    fn p_limit_ignores_patience_rate() {
        for limit in [2usize, 3, 7] {
            let reference = p_limit(&params(1.0, 1.0, 1.0, limit)).unwrap();
            for nu in [0.1, 10.0] {
                let value = p_limit(&params(1.0, 1.0, nu, limit)).unwrap();
                assert!((value - reference).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn p_limit_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mu = 0.2 + rng.gen::<f64>() * 3.0;
            let limit = 1 + rng.gen_range(0..8usize);
            let lambda = mu / limit as f64 * (1.1 + rng.gen::<f64>() * 4.0);
            let p = params(lambda, mu, 0.5 + rng.gen::<f64>(), limit);
            let value = p_limit(&p).unwrap();
            assert!(value > 0.0 && value < 1.0, "P = {value}");
        }
    }

    #[test]
    fn p_infinity_balanced_rates() {
        // lambda = mu: -(1/2) ln(1/2) = (ln 2)/2.
        let p = params(1.0, 1.0, 1.0, 2);
        let expected = 2.0f64.ln() / 2.0;
        assert!((p_infinity(&p) - expected).abs() < 1e-15);
        assert!((expected - 0.346_573_590_279_972_64).abs() < 1e-15);
    }

    #[test]
    fn p_infinity_vanishes_at_extremes() {
        let scarce = params(1e-9, 1.0, 1.0, 2);
        assert!(p_infinity(&scarce) < 1e-7);
        let flooded = params(1e9, 1.0, 1.0, 2);
        assert!(p_infinity(&flooded) < 1e-7);
    }

    #[test]
    fn p_limit_converges_to_p_infinity() {
        let p60 = params(1.0, 1.0, 1.0, 60);
        let gap = (p_limit(&p60).unwrap() - p_infinity(&p60)).abs();
        assert!(gap <= 1e-6, "gap {gap}");
    }
}
