//! The deterministic fluid model: drift, fixed-step integration, and the
//! unique invariant state under overload.
//!
//! The drift of stage masses `z` is
//!
//! ```text
//! z_1' = lambda - mu_1 z_1 / |z| - nu z_1
//! z_i' = mu_{i-1} z_{i-1} / |z| - mu_i z_i / |z| - nu z_i,   i >= 2
//! ```
//!
//! with `|z|` the L1 norm and every ratio `z_i/|z|` read as zero when the
//! system is empty. The invariant state has norm `x` solving `f(x) = 1` for
//! the strictly decreasing
//!
//! ```text
//! f(x) = lambda * sum_i  prod_{j<i} mu_j / prod_{j<=i} (mu_j + nu x),
//! ```
//!
//! and coordinates given by the one-step recursion in [`invariant_point`].
//! The same norm also solves `x = lambda E min{x(B_1+..+B_I), D}`, which
//! [`fixed_point_norm`] exploits as an algebraically independent route.

use thiserror::Error;

use crate::model::{ModelParams, StateVector, Trajectory};
use crate::phasetype::{expected_min_scaled, HypoExp, ImpatienceClock};

/// Bisection brackets are narrowed below this width.
const ROOT_TOL: f64 = 1e-13;

/// Internal Runge-Kutta substeps per output interval.
const SUBSTEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("parameters are not overloaded: offered load {load} <= 1")]
    NotOverloaded { load: f64 },
    #[error("integration step too large: {0}")]
    StepTooLarge(String),
}

/// The invariant fluid state: coordinates, norm, and the residual of the
/// norm equation `f(norm) - 1` at the computed solution.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantPoint {
    pub z_star: StateVector,
    pub norm: f64,
    pub residual: f64,
}

/// Result of a fluid integration: the trajectory plus the largest negative
/// excursion that was clamped to zero (zero on well-resolved runs).
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub trajectory: Trajectory,
    pub max_clamp: f64,
}

/// Drift of the fluid model at `z`, with the empty-state ratio convention.
pub fn fluid_rhs(params: &ModelParams, z: &StateVector) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    rhs_into(params, z.as_slice(), &mut out);
    out
}

fn rhs_into(params: &ModelParams, z: &[f64], out: &mut [f64]) {
    let mu = params.mu();
    let norm: f64 = z.iter().sum();
    let inv_norm = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    let mut inflow = params.lambda();
    for i in 0..z.len() {
        let service = mu[i] * z[i] * inv_norm;
        out[i] = inflow - service - params.nu() * z[i];
        inflow = service;
    }
}

/// Integrates the fluid ODE on the grid `{0, h, 2h, ..., horizon}` with
/// classical fourth-order Runge-Kutta, ten internal substeps per output
/// interval. The step is adjusted to divide the horizon evenly. Coordinates
/// are clamped at zero from below and the largest clamp is reported.
pub fn integrate(
    params: &ModelParams,
    z0: &StateVector,
    horizon: f64,
    step: f64,
) -> Result<FluidSolution, FluidError> {
    require_overloaded(params)?;
    assert!(horizon > 0.0 && step > 0.0, "horizon and step must be positive");
    assert_eq!(z0.len(), params.stages(), "initial state dimension mismatch");

    let n_out = ((horizon / step).round() as usize).max(1);
    let h_out = horizon / n_out as f64;
    let dt = h_out / SUBSTEPS as f64;
    let stages = params.stages();

    let mut state: Vec<f64> = z0.as_slice().to_vec();
    let mut times = Vec::with_capacity(n_out + 1);
    let mut states = Vec::with_capacity(n_out + 1);
    times.push(0.0);
    states.push(z0.clone());

    let mut k1 = vec![0.0; stages];
    let mut k2 = vec![0.0; stages];
    let mut k3 = vec![0.0; stages];
    let mut k4 = vec![0.0; stages];
    let mut tmp = vec![0.0; stages];
    let mut max_clamp: f64 = 0.0;

    for out_idx in 1..=n_out {
        for _ in 0..SUBSTEPS {
            rhs_into(params, &state, &mut k1);
            for i in 0..stages {
                tmp[i] = state[i] + 0.5 * dt * k1[i];
            }
            rhs_into(params, &tmp, &mut k2);
            for i in 0..stages {
                tmp[i] = state[i] + 0.5 * dt * k2[i];
            }
            rhs_into(params, &tmp, &mut k3);
            for i in 0..stages {
                tmp[i] = state[i] + dt * k3[i];
            }
            rhs_into(params, &tmp, &mut k4);
            for i in 0..stages {
                state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            for (i, v) in state.iter_mut().enumerate() {
                if v.is_nan() {
                    return Err(FluidError::StepTooLarge(format!(
                        "coordinate {} became NaN",
                        i + 1
                    )));
                }
                if *v < 0.0 {
                    if *v < -1e-9 {
                        return Err(FluidError::StepTooLarge(format!(
                            "coordinate {} dropped to {v}",
                            i + 1
                        )));
                    }
                    max_clamp = max_clamp.max(-*v);
                    *v = 0.0;
                }
            }
        }
        let t = if out_idx == n_out {
            horizon
        } else {
            out_idx as f64 * h_out
        };
        times.push(t);
        states.push(StateVector::new(state.clone()).expect("clamped state is non-negative"));
    }

    let trajectory = Trajectory::new(times, states).expect("grid is strictly increasing");
    Ok(FluidSolution {
        trajectory,
        max_clamp,
    })
}

/// The norm equation `f(x)` from the module docs.
pub fn norm_equation(params: &ModelParams, x: f64) -> f64 {
    let mu = params.mu();
    let nu = params.nu();
    let mut term = params.lambda() / (mu[0] + nu * x);
    let mut sum = term;
    for i in 1..mu.len() {
        term *= mu[i - 1] / (mu[i] + nu * x);
        sum += term;
    }
    sum
}

/// The unique `x > 0` with `f(x) = 1`, found by doubling/halving bracketing
/// from `x = 1` followed by bisection; `f` is strictly decreasing, so the
/// bracket is guaranteed once the endpoint signs differ.
pub fn invariant_norm(params: &ModelParams) -> Result<f64, FluidError> {
    require_overloaded(params)?;
    let g = |x: f64| norm_equation(params, x) - 1.0;
    bisect_decreasing(g)
}

/// Coordinates of the invariant state from its norm: `z_1* = lambda x /
/// (mu_1 + nu x)` and `z_i* = mu_{i-1} z_{i-1}* / (mu_i + nu x)`.
pub fn invariant_point(params: &ModelParams) -> Result<InvariantPoint, FluidError> {
    let x = invariant_norm(params)?;
    let mu = params.mu();
    let nu = params.nu();
    let mut z = Vec::with_capacity(mu.len());
    let mut value = params.lambda() * x / (mu[0] + nu * x);
    z.push(value);
    for i in 1..mu.len() {
        value *= mu[i - 1] / (mu[i] + nu * x);
        z.push(value);
    }
    let z_star = StateVector::new(z).expect("invariant coordinates are positive");
    debug_assert!((z_star.l1_norm() - x).abs() <= 1e-10 * x.max(1.0));
    debug_assert!(fluid_rhs(params, &z_star)
        .iter()
        .all(|d| d.abs() <= 1e-9));
    Ok(InvariantPoint {
        z_star,
        norm: x,
        residual: norm_equation(params, x) - 1.0,
    })
}

/// Solves `x = lambda E min{x(B_1+..+B_I), D}` by bisection. Agrees with
/// [`invariant_norm`] through a telescoping identity, but is computed from
/// the Laplace-transform product rather than the rational sum, so the two
/// routes check each other.
pub fn fixed_point_norm(params: &ModelParams) -> Result<f64, FluidError> {
    require_overloaded(params)?;
    let stages = HypoExp::new(params.mu().to_vec()).expect("validated rates");
    let clock = ImpatienceClock::new(params.nu()).expect("validated rate");
    // g is positive left of the root and negative right of it, like f - 1.
    let g = |x: f64| params.lambda() * expected_min_scaled(&stages, x, &clock) - x;
    bisect_decreasing(g)
}

fn require_overloaded(params: &ModelParams) -> Result<(), FluidError> {
    if params.is_overloaded() {
        Ok(())
    } else {
        Err(FluidError::NotOverloaded {
            load: params.offered_load(),
        })
    }
}

/// Root of a function that is positive below its unique positive root and
/// negative above it.
fn bisect_decreasing<F: Fn(f64) -> f64>(g: F) -> Result<f64, FluidError> {
    let mut lo = 1.0;
    let mut hi = 1.0;
    let g1 = g(1.0);
    if g1 == 0.0 {
        return Ok(1.0);
    }
    if g1 > 0.0 {
        while g(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(FluidError::StepTooLarge(
                    "root bracketing diverged".into(),
                ));
            }
        }
    } else {
        while g(lo) < 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(FluidError::StepTooLarge(
                    "root bracketing collapsed".into(),
                ));
            }
        }
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // exhausted float resolution
        }
        let value = g(mid);
        if value == 0.0 {
            return Ok(mid);
        }
        if value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, mu: &[f64], nu: f64) -> ModelParams {
        ModelParams::new(lambda, mu.to_vec(), nu).unwrap()
    }

    const GOLDEN: f64 = 0.618_033_988_749_894_9; // (sqrt 5 - 1) / 2

    #[test]
    fn rhs_at_zero_state_is_arrivals_only() {
        let p = params(2.0, &[1.0, 1.0], 1.0);
        let rhs = fluid_rhs(&p, &StateVector::zeros(2));
        assert_eq!(rhs, vec![2.0, 0.0]);
    }

    #[test]
    fn rhs_single_stage_invariant_state() {
        // lambda=2, mu=1, nu=1: z=(1) gives 2 - 1 - 1 = 0.
        let p = params(2.0, &[1.0], 1.0);
        let rhs = fluid_rhs(&p, &StateVector::new(vec![1.0]).unwrap());
        assert!(rhs[0].abs() < 1e-15);
    }

    #[test]
    fn invariant_norm_closed_forms() {
        // I=1: (lambda - mu) / nu.
        assert!((invariant_norm(&params(2.0, &[1.0], 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((invariant_norm(&params(2.0, &[1.0], 2.0)).unwrap() - 0.5).abs() < 1e-12);
        // I=2 equal rates at lambda=mu=nu=1: the golden ratio root.
        assert!(
            (invariant_norm(&params(1.0, &[1.0, 1.0], 1.0)).unwrap() - GOLDEN).abs() < 1e-12
        );
    }

    #[test]
    fn invariant_norm_rejects_underload() {
        let p = params(0.1, &[1.0, 1.0], 1.0);
        assert!(matches!(
            invariant_norm(&p),
            Err(FluidError::NotOverloaded { .. })
        ));
    }

    #[test]
    fn invariant_point_golden_ratio_case() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let point = invariant_point(&p).unwrap();
        let x = GOLDEN;
        // z1* = x/(1+x) = x^2 = 1-x, z2* = z1*/(1+x), and they sum to x.
        assert!((point.z_star[0] - (1.0 - x)).abs() < 1e-12);
        assert!((point.z_star[1] - (1.0 - x) * x).abs() < 1e-12);
        assert!((point.z_star.l1_norm() - x).abs() < 1e-12);
        assert!(point.residual.abs() < 1e-10);
    }

    #[test]
    fn invariant_point_equal_rates_is_geometric() {
        let p = params(1.0, &[2.0, 2.0, 2.0], 1.0);
        let point = invariant_point(&p).unwrap();
        let x = point.norm;
        let ratio = 2.0 / (2.0 + x);
        assert!((point.z_star[1] / point.z_star[0] - ratio).abs() < 1e-12);
        assert!((point.z_star[2] / point.z_star[1] - ratio).abs() < 1e-12);
    }

    #[test]
    fn rhs_vanishes_at_invariant_point() {
        for (lambda, mu, nu) in [
            (2.0, vec![1.0], 1.0),
            (1.0, vec![1.0, 1.0], 1.0),
            (1.5, vec![0.5, 2.0, 1.0], 0.7),
        ] {
            let p = ModelParams::new(lambda, mu, nu).unwrap();
            let point = invariant_point(&p).unwrap();
            let rhs = fluid_rhs(&p, &point.z_star);
            for d in rhs {
                assert!(d.abs() < 1e-9, "drift {d}");
            }
        }
    }

    #[test]
    fn fixed_point_norm_matches_invariant_norm() {
        for (lambda, mu, nu) in [
            (2.0, vec![1.0], 1.0),
            (1.0, vec![1.0, 1.0], 1.0),
            (3.0, vec![0.4, 1.2, 2.0, 0.9], 0.3),
        ] {
            let p = ModelParams::new(lambda, mu, nu).unwrap();
            let a = invariant_norm(&p).unwrap();
            let b = fixed_point_norm(&p).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!((fixed_point_norm(&params(2.0, &[1.0], 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            (fixed_point_norm(&params(1.0, &[1.0, 1.0], 1.0)).unwrap() - GOLDEN).abs() < 1e-12
        );
    }

    #[test]
    fn norm_equation_is_strictly_decreasing() {
        let p = params(1.5, &[0.5, 2.0, 1.0], 0.7);
        let mut prev = norm_equation(&p, 0.01);
        for n in 1..100 {
            let x = 0.01 + 0.25 * n as f64;
            let value = norm_equation(&p, x);
            assert!(value < prev, "f not decreasing at x={x}");
            prev = value;
        }
    }

    #[test]
    fn integrate_stays_at_invariant_point() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let point = invariant_point(&p).unwrap();
        let sol = integrate(&p, &point.z_star, 5.0, 0.01).unwrap();
        for state in sol.trajectory.states() {
            let dist: f64 = state
                .as_slice()
                .iter()
                .zip(point.z_star.as_slice())
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(dist < 1e-8, "drifted {dist}");
        }
    }

    #[test]
    fn integrate_zero_start_leaves_origin_and_converges() {
        let p = params(2.0, &[1.0], 1.0);
        let sol = integrate(&p, &StateVector::zeros(1), 40.0, 0.01).unwrap();
        let states = sol.trajectory.states();
        assert!(states[1].l1_norm() > 0.0);
        assert!((sol.trajectory.last_state().l1_norm() - 1.0).abs() < 1e-6);
        assert!(sol.max_clamp <= 1e-12);
    }

    #[test]
    fn norm_growth_is_bounded_by_arrivals() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let z0 = StateVector::new(vec![0.4, 0.1]).unwrap();
        let sol = integrate(&p, &z0, 5.0, 0.05).unwrap();
        for (t, state) in sol
            .trajectory
            .times()
            .iter()
            .zip(sol.trajectory.states())
        {
            assert!(state.l1_norm() <= z0.l1_norm() + p.lambda() * t + 1e-9);
        }
    }

    #[test]
    fn richardson_step_halving() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let z0 = StateVector::new(vec![2.0, 0.5]).unwrap();
        let coarse = integrate(&p, &z0, 10.0, 0.02).unwrap();
        let fine = integrate(&p, &z0, 10.0, 0.01).unwrap();
        let a = coarse.trajectory.last_state();
        let b = fine.trajectory.last_state();
        let dist: f64 = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(dist <= 1e-8, "step halving moved z(T) by {dist}");
    }

    #[test]
    fn norm_derivative_consistency() {
        // Interior service terms telescope, so the norm drifts at
        // lambda - mu_I z_I/|z| - nu |z|.
        let p = params(1.5, &[0.5, 2.0, 1.0], 0.7);
        let z = StateVector::new(vec![0.3, 0.9, 0.2]).unwrap();
        let rhs = fluid_rhs(&p, &z);
        let total: f64 = rhs.iter().sum();
        let norm = z.l1_norm();
        let direct = p.lambda() - p.mu()[2] * z[2] / norm - p.nu() * norm;
        assert!((total - direct).abs() < 1e-12);
    }

    #[test]
    fn integrate_requires_overload() {
        let p = params(0.1, &[1.0], 1.0);
        assert!(matches!(
            integrate(&p, &StateVector::zeros(1), 1.0, 0.1),
            Err(FluidError::NotOverloaded { .. })
        ));
    }
}
