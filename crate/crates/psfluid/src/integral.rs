//! The renewal-type integral description of the fluid model, used as an
//! independent cross-check of the ODE solution.
//!
//! Along a trajectory `z(.)` define the service clock
//! `S(t) = int_0^t du / |z(u)|`. The stage masses then satisfy
//!
//! ```text
//! z_i(t) = sum_{j<=i} z_j(0) P{B_j^{i-1} <= S(t) < B_j^i, D > t}
//!        + lambda int_0^t P{B_1^{i-1} <= S(t)-S(s) < B_1^i, D > t-s} ds,
//! ```
//!
//! where `B_j^i` is the sum of stage requirements `j..=i` and `D` the
//! patience clock. [`representation_residual`] measures how far an
//! ODE-produced trajectory is from satisfying this system; the discrepancy
//! is pure quadrature error and shrinks at second order in the grid step.
//!
//! All time integrals reuse the trajectory grid (composite trapezoid), so the
//! discretization error is attributable to the single parameter `h`. For
//! trajectories starting from the empty state the first clock panel uses the
//! right endpoint only; the exact clock diverges logarithmically there and
//! the band probabilities absorb the regularization error at one panel.

use thiserror::Error;

use crate::fluid;
use crate::model::{ModelParams, StateVector, Trajectory};
use crate::phasetype::{band_probability, HypoExp, ImpatienceClock};

/// Picard iteration stops once successive iterates are this close in sup norm.
const PICARD_TOL: f64 = 1e-8;
const PICARD_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegralError {
    #[error("trajectory norm vanishes at interior grid time {t}")]
    ZeroNormInterior { t: f64 },
    #[error("norm fixed-point iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Fluid(#[from] fluid::FluidError),
}

/// Cumulative service clock `S(t)` evaluated on a trajectory grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockTransform {
    times: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ClockTransform {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }
}

/// Trapezoid cumulative integral of `1 / |z(u)|` over the trajectory grid.
/// The norm may vanish only at `t = 0`, in which case the first panel uses
/// the right endpoint value alone.
pub fn clock_transform(traj: &Trajectory) -> Result<ClockTransform, IntegralError> {
    let times = traj.times();
    let norms: Vec<f64> = traj.states().iter().map(StateVector::l1_norm).collect();
    for (idx, &n) in norms.iter().enumerate().skip(1) {
        if n == 0.0 {
            return Err(IntegralError::ZeroNormInterior { t: times[idx] });
        }
    }
    let mut cumulative = Vec::with_capacity(times.len());
    cumulative.push(0.0);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let panel = if k == 1 && norms[0] == 0.0 {
            dt / norms[1]
        } else {
            0.5 * dt * (1.0 / norms[k - 1] + 1.0 / norms[k])
        };
        cumulative.push(cumulative[k - 1] + panel);
    }
    Ok(ClockTransform {
        times: times.to_vec(),
        cumulative,
    })
}

/// Right-hand side of the integral description for the given stage (0-based)
/// at the grid time with index `t_idx`.
pub fn integral_rhs(
    params: &ModelParams,
    traj: &Trajectory,
    stage: usize,
    t_idx: usize,
) -> Result<f64, IntegralError> {
    let clock = clock_transform(traj)?;
    Ok(rhs_with_clock(params, traj, &clock, stage, t_idx))
}

fn rhs_with_clock(
    params: &ModelParams,
    traj: &Trajectory,
    clock: &ClockTransform,
    stage: usize,
    t_idx: usize,
) -> f64 {
    let mu = params.mu();
    let patience = ImpatienceClock::new(params.nu()).expect("validated rate");
    let t = traj.times()[t_idx];
    let s_t = clock.cumulative[t_idx];
    let z0 = traj.states()[0].as_slice();

    // Customers present at time zero: started at stage j, now in `stage`.
    let mut value = 0.0;
    for j in 0..=stage {
        if z0[j] == 0.0 {
            continue;
        }
        let lo = HypoExp::new(mu[j..stage].to_vec()).expect("validated rates");
        let hi = HypoExp::new(mu[j..=stage].to_vec()).expect("validated rates");
        let band = band_probability(&lo, &hi, s_t, &patience, t).expect("lists are adjacent");
        value += z0[j] * band;
    }

    // Arrivals in (0, t], trapezoid over the grid points s <= t.
    if t_idx > 0 {
        let lo = HypoExp::new(mu[0..stage].to_vec()).expect("validated rates");
        let hi = HypoExp::new(mu[0..=stage].to_vec()).expect("validated rates");
        let times = traj.times();
        let band_at = |k: usize| {
            let tau = s_t - clock.cumulative[k];
            band_probability(&lo, &hi, tau, &patience, t - times[k]).expect("lists are adjacent")
        };
        let mut integral = 0.0;
        let mut prev = band_at(0);
        for k in 1..=t_idx {
            let current = band_at(k);
            integral += 0.5 * (times[k] - times[k - 1]) * (prev + current);
            prev = current;
        }
        value += params.lambda() * integral;
    }
    value
}

/// Maximum over grid times and stages of the gap between the trajectory and
/// the integral description; the numerical witness that the two fluid-model
/// descriptions coincide.
pub fn representation_residual(
    params: &ModelParams,
    traj: &Trajectory,
) -> Result<f64, IntegralError> {
    let clock = clock_transform(traj)?;
    let mut worst: f64 = 0.0;
    for stage in 0..params.stages() {
        for t_idx in 0..traj.len() {
            let lhs = traj.states()[t_idx][stage];
            let rhs = rhs_with_clock(params, traj, &clock, stage, t_idx);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Converged scalar-norm trajectory together with the iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// Successive sup-norm distances, one per completed iteration.
    pub sup_diffs: Vec<f64>,
}

/// Picard iteration for the zero-start norm equation
/// `x(t) = lambda int_0^t P{B_1^I > int_s^t du/x(u), D > t-s} ds`,
/// starting from the arrival bound `x^0(t) = lambda t`.
pub fn norm_fixed_point_iteration(
    params: &ModelParams,
    horizon: f64,
    step: f64,
) -> Result<PicardSolution, IntegralError> {
    picard_with_cap(params, horizon, step, PICARD_MAX_ITER)
}

fn picard_with_cap(
    params: &ModelParams,
    horizon: f64,
    step: f64,
    max_iter: usize,
) -> Result<PicardSolution, IntegralError> {
    if !params.is_overloaded() {
        return Err(fluid::FluidError::NotOverloaded {
            load: params.offered_load(),
        }
        .into());
    }
    assert!(horizon > 0.0 && step > 0.0, "horizon and step must be positive");

    let n = ((horizon / step).round() as usize).max(1);
    let h = horizon / n as f64;
    let times: Vec<f64> = (0..=n)
        .map(|k| if k == n { horizon } else { k as f64 * h })
        .collect();

    let full = HypoExp::new(params.mu().to_vec()).expect("validated rates");
    let nu = params.nu();
    let lambda = params.lambda();

    let mut x: Vec<f64> = times.iter().map(|t| lambda * t).collect();
    let mut sup_diffs = Vec::new();

    for iteration in 1..=max_iter {
        // Clock of the current iterate; x(0) = 0, right-endpoint first panel.
        let mut m = vec![0.0; n + 1];
        for k in 1..=n {
            let dt = times[k] - times[k - 1];
            let panel = if k == 1 {
                dt / x[1]
            } else {
                0.5 * dt * (1.0 / x[k - 1] + 1.0 / x[k])
            };
            m[k] = m[k - 1] + panel;
        }

        let mut next = vec![0.0; n + 1];
        for t_idx in 1..=n {
            let integrand = |k: usize| {
                full.survival(m[t_idx] - m[k]) * (-nu * (times[t_idx] - times[k])).exp()
            };
            let mut integral = 0.0;
            let mut prev = integrand(0);
            for k in 1..=t_idx {
                let current = integrand(k);
                integral += 0.5 * (times[k] - times[k - 1]) * (prev + current);
                prev = current;
            }
            next[t_idx] = lambda * integral;
        }

        let sup: f64 = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        sup_diffs.push(sup);
        x = next;
        if sup < PICARD_TOL {
            let states = x
                .iter()
                .map(|&v| StateVector::new(vec![v]).expect("norms are non-negative"))
                .collect();
            let trajectory =
                Trajectory::new(times, states).expect("grid is strictly increasing");
            return Ok(PicardSolution {
                trajectory,
                iterations: iteration,
                sup_diffs,
            });
        }
    }
    Err(IntegralError::NoConvergence {
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{integrate, invariant_norm, invariant_point};

    fn params(lambda: f64, mu: &[f64], nu: f64) -> ModelParams {
        ModelParams::new(lambda, mu.to_vec(), nu).unwrap()
    }

    fn constant_trajectory(state: &StateVector, horizon: f64, step: f64) -> Trajectory {
        let n = (horizon / step).round() as usize;
        let times = (0..=n)
            .map(|k| if k == n { horizon } else { k as f64 * step })
            .collect();
        let states = vec![state.clone(); n + 1];
        Trajectory::new(times, states).unwrap()
    }

    #[test]
    fn clock_of_constant_norm_is_linear() {
        let state = StateVector::new(vec![1.5, 0.5]).unwrap();
        let traj = constant_trajectory(&state, 1.0, 0.25);
        let clock = clock_transform(&traj).unwrap();
        // |z| = 2 throughout, so S(1) = 0.5.
        assert!((clock.cumulative().last().unwrap() - 0.5).abs() < 1e-15);
        for (t, s) in clock.times().iter().zip(clock.cumulative()) {
            assert!((s - t / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn clock_rejects_interior_zero_norm() {
        let traj = Trajectory::new(
            vec![0.0, 1.0, 2.0],
            vec![
                StateVector::new(vec![1.0]).unwrap(),
                StateVector::zeros(1),
                StateVector::new(vec![1.0]).unwrap(),
            ],
        )
        .unwrap();
        assert!(matches!(
            clock_transform(&traj),
            Err(IntegralError::ZeroNormInterior { t }) if t == 1.0
        ));
    }

    #[test]
    fn clock_refinement_is_second_order() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let z0 = StateVector::new(vec![1.0, 1.0]).unwrap();
        let coarse = integrate(&p, &z0, 2.0, 0.02).unwrap().trajectory;
        let fine = integrate(&p, &z0, 2.0, 0.01).unwrap().trajectory;
        let very_fine = integrate(&p, &z0, 2.0, 0.005).unwrap().trajectory;
        let s = |traj: &Trajectory| *clock_transform(traj).unwrap().cumulative().last().unwrap();
        let d1 = (s(&coarse) - s(&very_fine)).abs();
        let d2 = (s(&fine) - s(&very_fine)).abs();
        assert!(d2 < d1, "refinement did not reduce clock error");
        assert!(d1 / d2 > 2.5, "ratio {} not near 4", d1 / d2);
    }

    #[test]
    fn integral_rhs_at_time_zero_recovers_initial_state() {
        let p = params(1.0, &[1.0, 2.0], 1.0);
        let z0 = StateVector::new(vec![0.7, 0.4]).unwrap();
        let traj = constant_trajectory(&z0, 1.0, 0.5);
        for stage in 0..2 {
            let value = integral_rhs(&p, &traj, stage, 0).unwrap();
            assert!((value - z0[stage]).abs() < 1e-14, "stage {stage}");
        }
    }

    #[test]
    fn constant_invariant_trajectory_has_small_residual() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let point = invariant_point(&p).unwrap();
        let traj = constant_trajectory(&point.z_star, 4.0, 0.005);
        let residual = representation_residual(&p, &traj).unwrap();
        assert!(residual < 1e-5, "residual {residual}");
    }

    #[test]
    fn perturbed_constant_trajectory_is_detected() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let point = invariant_point(&p).unwrap();
        let doubled =
            StateVector::new(point.z_star.as_slice().iter().map(|v| 2.0 * v).collect())
                .unwrap();
        let traj = constant_trajectory(&doubled, 4.0, 0.01);
        let residual = representation_residual(&p, &traj).unwrap();
        assert!(residual > 0.01, "residual {residual} too small");
    }

    #[test]
    fn residual_shrinks_at_second_order() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let z0 = StateVector::new(vec![1.2, 0.3]).unwrap();
        let run = |h: f64| {
            let traj = integrate(&p, &z0, 3.0, h).unwrap().trajectory;
            representation_residual(&p, &traj).unwrap()
        };
        let coarse = run(0.04);
        let fine = run(0.02);
        let order = (coarse / fine).log2();
        assert!(
            (1.7..=2.3).contains(&order),
            "order {order} (residuals {coarse} / {fine})"
        );
    }

    #[test]
    fn single_stage_zero_start_matches_ode() {
        // I=1 integral description against the ODE from the empty state.
        let p = params(2.0, &[1.0], 1.0);
        let traj = integrate(&p, &StateVector::zeros(1), 6.0, 0.01)
            .unwrap()
            .trajectory;
        let clock = clock_transform(&traj).unwrap();
        let mut worst: f64 = 0.0;
        for t_idx in (0..traj.len()).step_by(25) {
            let value = rhs_with_clock(&p, &traj, &clock, 0, t_idx);
            worst = worst.max((value - traj.states()[t_idx][0]).abs());
        }
        assert!(worst < 5e-3, "worst gap {worst}");
    }

    #[test]
    fn picard_iteration_converges_to_invariant_norm() {
        let p = params(2.0, &[1.0], 1.0);
        let solution = norm_fixed_point_iteration(&p, 12.0, 0.005).unwrap();
        let tail = solution.trajectory.last_state().l1_norm();
        let target = invariant_norm(&p).unwrap();
        assert!(
            (tail - target).abs() < 1e-4,
            "tail {tail} vs invariant {target}"
        );
        assert_eq!(solution.trajectory.states()[0].l1_norm(), 0.0);
    }

    #[test]
    fn picard_matches_ode_norm() {
        let p = params(2.0, &[1.0], 1.0);
        let h = 0.005;
        let horizon = 12.0;
        let solution = norm_fixed_point_iteration(&p, horizon, h).unwrap();
        let ode = integrate(&p, &StateVector::zeros(1), horizon, h)
            .unwrap()
            .trajectory;
        let tol = (10.0 * h * h).max(1e-4);
        let mut worst: f64 = 0.0;
        for (a, b) in solution.trajectory.states().iter().zip(ode.states()) {
            worst = worst.max((a.l1_norm() - b.l1_norm()).abs());
        }
        assert!(worst <= tol, "sup gap {worst} exceeds {tol}");
    }

    #[test]
    fn picard_sup_distances_shrink_monotonically() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        let solution = norm_fixed_point_iteration(&p, 8.0, 0.02).unwrap();
        for pair in solution.sup_diffs.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "sup diffs not monotone");
        }
        assert!(solution.iterations <= 500);
    }

    #[test]
    fn picard_reports_no_convergence_when_capped() {
        let p = params(1.0, &[1.0, 1.0], 1.0);
        assert!(matches!(
            picard_with_cap(&p, 8.0, 0.05, 1),
            Err(IntegralError::NoConvergence { iterations: 1 })
        ));
    }

    #[test]
    fn picard_requires_overload() {
        let p = params(0.2, &[1.0], 1.0);
        assert!(matches!(
            norm_fixed_point_iteration(&p, 5.0, 0.05),
            Err(IntegralError::Fluid(fluid::FluidError::NotOverloaded { .. }))
        ));
    }

    #[test]
    fn stage_sums_match_norm_form() {
        // Summing the per-stage integral RHS over all stages equals the norm
        // equation evaluated with the full phase sum.
        let p = params(1.0, &[1.0, 2.0], 0.8);
        let z0 = StateVector::new(vec![0.6, 0.2]).unwrap();
        let traj = integrate(&p, &z0, 2.0, 0.02).unwrap().trajectory;
        let clock = clock_transform(&traj).unwrap();
        let patience = ImpatienceClock::new(p.nu()).unwrap();
        let t_idx = traj.len() - 1;
        let t = traj.times()[t_idx];
        let s_t = clock.cumulative()[t_idx];

        let by_stage: f64 = (0..2)
            .map(|stage| rhs_with_clock(&p, &traj, &clock, stage, t_idx))
            .sum();

        // Norm form: initial customers that are still present plus arrivals.
        let mut direct = 0.0;
        for j in 0..2 {
            let remaining = HypoExp::new(p.mu()[j..].to_vec()).unwrap();
            direct += z0[j] * remaining.survival(s_t) * patience.survival(t);
        }
        let full = HypoExp::new(p.mu().to_vec()).unwrap();
        let times = traj.times();
        let integrand = |k: usize| {
            full.survival(s_t - clock.cumulative()[k]) * patience.survival(t - times[k])
        };
        let mut integral = 0.0;
        let mut prev = integrand(0);
        for k in 1..=t_idx {
            let current = integrand(k);
            integral += 0.5 * (times[k] - times[k - 1]) * (prev + current);
            prev = current;
        }
        direct += p.lambda() * integral;

        assert!((by_stage - direct).abs() < 1e-12, "{by_stage} vs {direct}");
    }
}
