//! Exact event-by-event simulation of the stochastic models.
//!
//! Both simulators use the direct method: draw the next event time from the
//! total instantaneous rate, then pick the event category proportionally.
//! Rates change at every event, so this is exact for the underlying Markov
//! chains. Runs are deterministic given the seed; replica `k` of a scenario
//! uses `seed ^ k`.
//!
//! [`simulate_ps`] runs the stage-indexed queue: arrivals at rate `lambda`
//! enter stage 1, stage `i` completes at rate `mu_i Q_i / |Q|` (processor
//! sharing), and every customer abandons at rate `nu`. [`simulate_freelance`]
//! runs the job-board formulation with jobs indexed by how many applications
//! they have collected; with equal service rates the two state processes are
//! identically distributed, which the test suite checks. [`scaled_run`]
//! applies the fluid scaling `Q(rt)/r` with impatience `nu/r`.
//!
//! Trajectories sample the state immediately before each grid time, matching
//! the right-continuous path convention.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ModelParams, StateVector, Trajectory};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("initial state coordinate {index} is not an integer count: {value}")]
    NonIntegerInitialState { index: usize, value: f64 },
    #[error("the job-board simulator requires equal service rates")]
    UnequalServiceRates,
    #[error("job statistics require a job-board simulation result")]
    WrongMode,
}

/// Why a job left the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCause {
    Impatience,
    FullApplications,
}

impl ExitCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitCause::Impatience => "impatience",
            ExitCause::FullApplications => "full_applications",
        }
    }
}

/// Outcome of a single job in the job-board simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub arrival_time: f64,
    /// Applications collected by exit time; equals the limit exactly when the
    /// exit cause is [`ExitCause::FullApplications`].
    pub applications: usize,
    pub exit_cause: ExitCause,
    /// Uniformly chosen among the applicants when there is at least one.
    pub winner_applicant: Option<usize>,
}

/// Event totals accumulated over a run, indexed per stage where relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCounts {
    pub arrivals: u64,
    pub stage_completions: Vec<u64>,
    pub abandonments: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    ProcessorSharing,
    Freelance,
}

/// A completed simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trajectory: Trajectory,
    /// Jobs that exited during the run (job-board mode only).
    pub jobs: Vec<JobRecord>,
    pub event_counts: EventCounts,
    pub seed: u64,
    pub mode: SimMode,
    /// Exact per-stage time-average occupancy over the horizon.
    pub time_average: Vec<f64>,
    /// Total time the system was non-empty.
    pub busy_time: f64,
}

impl SimResult {
    /// Per-stage `inflow - outflow - (Q_i(T) - Q_i(0))`; an exact counting
    /// identity, so every entry is zero on every sample path.
    pub fn flow_imbalance(&self) -> Vec<f64> {
        let first = self.trajectory.states().first().unwrap();
        let last = self.trajectory.last_state();
        let counts = &self.event_counts;
        (0..self.trajectory.stages())
            .map(|i| {
                let inflow = if i == 0 {
                    counts.arrivals as f64
                } else {
                    counts.stage_completions[i - 1] as f64
                };
                let outflow =
                    counts.stage_completions[i] as f64 + counts.abandonments[i] as f64;
                inflow - outflow - (last[i] - first[i])
            })
            .collect()
    }
}

/// Seed for replica `k` of a scenario.
pub fn replica_seed(base: u64, replica: u64) -> u64 {
    base ^ replica
}

/// Output grid `{0, h, ..., T}` with the step adjusted to divide the horizon.
fn output_grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = ((horizon / step).round() as usize).max(1);
    let h = horizon / n as f64;
    (0..=n)
        .map(|k| if k == n { horizon } else { k as f64 * h })
        .collect()
}

fn integer_state(state: &StateVector) -> Result<Vec<f64>, SimError> {
    state
        .as_slice()
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if (value - value.round()).abs() > 1e-9 {
                Err(SimError::NonIntegerInitialState { index, value })
            } else {
                Ok(value.round())
            }
        })
        .collect()
}

/// Records the state immediately before each grid time.
struct GridSampler {
    times: Vec<f64>,
    next: usize,
    states: Vec<StateVector>,
}

impl GridSampler {
    fn new(times: Vec<f64>) -> Self {
        let capacity = times.len();
        Self {
            times,
            next: 0,
            states: Vec::with_capacity(capacity),
        }
    }

    /// Emits every grid point with time `<= up_to` using the current state.
    fn advance(&mut self, up_to: f64, state: &[f64]) {
        while self.next < self.times.len() && self.times[self.next] <= up_to {
            self.states
                .push(StateVector::new(state.to_vec()).expect("counts are non-negative"));
            self.next += 1;
        }
    }

    fn finish(mut self, state: &[f64]) -> Trajectory {
        let remaining = self.times.len() - self.next;
        for _ in 0..remaining {
            self.states
                .push(StateVector::new(state.to_vec()).expect("counts are non-negative"));
        }
        Trajectory::new(self.times, self.states).expect("grid is strictly increasing")
    }
}

/// Exponential waiting time with the given total rate.
fn sample_exp(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Simulates the multistage processor-sharing queue with impatience.
pub fn simulate_ps(config: &ScenarioConfig) -> Result<SimResult, SimError> {
    let params = &config.params;
    let stages = params.stages();
    let mu = params.mu();
    let lambda = params.lambda();
    let nu = params.nu();

    let mut state = integer_state(&config.initial_state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = GridSampler::new(output_grid(config.horizon, config.grid_step));
    let mut counts = EventCounts {
        arrivals: 0,
        stage_completions: vec![0; stages],
        abandonments: vec![0; stages],
    };
    let mut time_acc = vec![0.0; stages];
    let mut busy_time = 0.0;
    let mut t = 0.0;
    let horizon = config.horizon;

    loop {
        let norm: f64 = state.iter().sum();
        let service_total: f64 = if norm > 0.0 {
            (0..stages).map(|i| mu[i] * state[i] / norm).sum()
        } else {
            0.0
        };
        let total_rate = lambda + service_total + nu * norm;
        let t_next = t + sample_exp(&mut rng, total_rate);

        let segment_end = t_next.min(horizon);
        for i in 0..stages {
            time_acc[i] += state[i] * (segment_end - t);
        }
        if norm > 0.0 {
            busy_time += segment_end - t;
        }

        if t_next >= horizon {
            let trajectory = sampler.finish(&state);
            return Ok(SimResult {
                trajectory,
                jobs: Vec::new(),
                event_counts: counts,
                seed: config.seed,
                mode: SimMode::ProcessorSharing,
                time_average: time_acc.iter().map(|a| a / horizon).collect(),
                busy_time,
            });
        }

        sampler.advance(t_next, &state);

        let mut v = rng.gen::<f64>() * total_rate;
        let mut applied = false;
        if v < lambda {
            state[0] += 1.0;
            counts.arrivals += 1;
            applied = true;
        } else {
            v -= lambda;
            if norm > 0.0 {
                for i in 0..stages {
                    let rate = mu[i] * state[i] / norm;
                    if v < rate {
                        complete_stage(&mut state, &mut counts, i);
                        applied = true;
                        break;
                    }
                    v -= rate;
                }
            }
            if !applied {
                for i in 0..stages {
                    let rate = nu * state[i];
                    if v < rate {
                        state[i] -= 1.0;
                        counts.abandonments[i] += 1;
                        applied = true;
                        break;
                    }
                    v -= rate;
                }
            }
        }
        if !applied {
            // Roundoff pushed v past every category; take the last one with
            // positive rate.
            if let Some(i) = (0..stages).rev().find(|&i| state[i] > 0.0) {
                state[i] -= 1.0;
                counts.abandonments[i] += 1;
            } else {
                state[0] += 1.0;
                counts.arrivals += 1;
            }
        }
        debug_assert!(state.iter().all(|q| *q >= 0.0 && q.fract() == 0.0));
        t = t_next;
    }
}

fn complete_stage(state: &mut [f64], counts: &mut EventCounts, i: usize) {
    state[i] -= 1.0;
    if i + 1 < state.len() {
        state[i + 1] += 1.0;
    }
    counts.stage_completions[i] += 1;
}

/// Simulates the job board: jobs arrive at rate `lambda` and collect up to
/// `I` applications from freelancers arriving at rate `mu`; each job leaves
/// on its `I`-th application or when its patience expires. Requires equal
/// service rates, which play the role of the freelancer arrival rate.
pub fn simulate_freelance(config: &ScenarioConfig) -> Result<SimResult, SimError> {
    let params = &config.params;
    if !params.has_equal_rates() {
        return Err(SimError::UnequalServiceRates);
    }
    let limit = params.stages();
    let lambda = params.lambda();
    let mu = params.mu()[0];
    let nu = params.nu();

    let initial = integer_state(&config.initial_state)?;
    let mut arrival_times: Vec<f64> = Vec::new();
    // classes[i] holds the ids of jobs with i applications so far.
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); limit];
    for (class, &count) in initial.iter().enumerate() {
        for _ in 0..count as usize {
            classes[class].push(arrival_times.len());
            arrival_times.push(0.0);
        }
    }
    let mut state = initial;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = GridSampler::new(output_grid(config.horizon, config.grid_step));
    let mut counts = EventCounts {
        arrivals: 0,
        stage_completions: vec![0; limit],
        abandonments: vec![0; limit],
    };
    let mut jobs: Vec<JobRecord> = Vec::new();
    let mut time_acc = vec![0.0; limit];
    let mut busy_time = 0.0;
    let mut t = 0.0;
    let horizon = config.horizon;

    loop {
        let norm: f64 = state.iter().sum();
        let total_rate = lambda + mu + nu * norm;
        let t_next = t + sample_exp(&mut rng, total_rate);

        let segment_end = t_next.min(horizon);
        for i in 0..limit {
            time_acc[i] += state[i] * (segment_end - t);
        }
        if norm > 0.0 {
            busy_time += segment_end - t;
        }

        if t_next >= horizon {
            let trajectory = sampler.finish(&state);
            return Ok(SimResult {
                trajectory,
                jobs,
                event_counts: counts,
                seed: config.seed,
                mode: SimMode::Freelance,
                time_average: time_acc.iter().map(|a| a / horizon).collect(),
                busy_time,
            });
        }

        sampler.advance(t_next, &state);

        let v = rng.gen::<f64>() * total_rate;
        if v < lambda {
            // New job with zero applications.
            classes[0].push(arrival_times.len());
            arrival_times.push(t_next);
            state[0] += 1.0;
            counts.arrivals += 1;
        } else if v < lambda + mu {
            // A freelancer arrives; with no jobs on the board they leave.
            if norm > 0.0 {
                let class = pick_class(&mut rng, &state, norm);
                let id = remove_random_member(&mut rng, &mut classes[class]);
                state[class] -= 1.0;
                counts.stage_completions[class] += 1;
                let applications = class + 1;
                if applications == limit {
                    jobs.push(JobRecord {
                        arrival_time: arrival_times[id],
                        applications,
                        exit_cause: ExitCause::FullApplications,
                        winner_applicant: Some(rng.gen_range(0..applications)),
                    });
                } else {
                    classes[class + 1].push(id);
                    state[class + 1] += 1.0;
                }
            }
        } else {
            // Patience expiry of a uniformly random job.
            let class = pick_class(&mut rng, &state, norm);
            let id = remove_random_member(&mut rng, &mut classes[class]);
            state[class] -= 1.0;
            counts.abandonments[class] += 1;
            jobs.push(JobRecord {
                arrival_time: arrival_times[id],
                applications: class,
                exit_cause: ExitCause::Impatience,
                winner_applicant: if class > 0 {
                    Some(rng.gen_range(0..class))
                } else {
                    None
                },
            });
        }
        debug_assert!(state
            .iter()
            .zip(&classes)
            .all(|(q, c)| *q as usize == c.len()));
        t = t_next;
    }
}

/// Class index drawn with probability proportional to its occupancy;
/// together with a uniform member this picks a uniformly random job.
fn pick_class(rng: &mut ChaCha8Rng, state: &[f64], norm: f64) -> usize {
    let mut v = rng.gen::<f64>() * norm;
    for (i, &q) in state.iter().enumerate() {
        if v < q {
            return i;
        }
        v -= q;
    }
    state
        .iter()
        .rposition(|&q| q > 0.0)
        .expect("norm > 0 implies a non-empty class")
}

fn remove_random_member(rng: &mut ChaCha8Rng, class: &mut Vec<usize>) -> usize {
    let idx = rng.gen_range(0..class.len());
    class.swap_remove(idx)
}

/// Runs the processor-sharing simulator under fluid scaling: the initial
/// count is `round(r z(0))`, impatience is `nu/r`, and the path is observed
/// at times `r t` and divided by `r`. With `r = 1` this is the plain run.
pub fn scaled_run(config: &ScenarioConfig, r: f64) -> Result<Trajectory, SimError> {
    assert!(r > 0.0 && r.is_finite(), "scale parameter must be positive");
    let params = &config.params;
    let scaled_params = ModelParams::new(params.lambda(), params.mu().to_vec(), params.nu() / r)
        .expect("scaled rates stay positive");
    let scaled_initial = StateVector::new(
        config
            .initial_state
            .as_slice()
            .iter()
            .map(|z| (z * r).round())
            .collect(),
    )
    .expect("rounded counts are non-negative");
    let scaled_config = ScenarioConfig::new(
        scaled_params,
        scaled_initial,
        config.horizon * r,
        config.grid_step * r,
        config.seed,
        1,
        1.0,
    )
    .expect("scaled scenario stays valid");

    let result = simulate_ps(&scaled_config)?;
    if r == 1.0 {
        return Ok(result.trajectory);
    }
    let times = result
        .trajectory
        .times()
        .iter()
        .map(|t| t / r)
        .collect::<Vec<_>>();
    let states = result
        .trajectory
        .states()
        .iter()
        .map(|s| {
            StateVector::new(s.as_slice().iter().map(|q| q / r).collect())
                .expect("scaled counts are non-negative")
        })
        .collect();
    Ok(Trajectory::new(times, states).expect("scaling preserves the grid"))
}

/// Summary statistics over the completed jobs of a job-board run.
#[derive(Debug, Clone, PartialEq)]
pub struct JobStats {
    pub total_jobs: usize,
    /// Fraction of jobs that exited with `i` applications, `i = 0..=limit`.
    pub exit_fractions: Vec<f64>,
    /// Mean over jobs of `1/applications` (zero-application jobs contribute
    /// zero): the chance a random applicant of a random job wins it.
    pub per_job_estimate: f64,
    /// Standard error of the per-job estimate.
    pub per_job_se: f64,
    /// Jobs won per application made: wins divided by total applications.
    pub per_freelancer_estimate: f64,
}

/// Aggregates job outcomes; the result must come from the job-board mode.
pub fn job_outcome_stats(result: &SimResult, limit: usize) -> Result<JobStats, SimError> {
    if result.mode != SimMode::Freelance {
        return Err(SimError::WrongMode);
    }
    let n = result.jobs.len();
    let mut exit_counts = vec![0usize; limit + 1];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut applications_total = 0usize;
    let mut jobs_with_applicants = 0usize;
    for job in &result.jobs {
        exit_counts[job.applications] += 1;
        applications_total += job.applications;
        let value = if job.applications > 0 {
            jobs_with_applicants += 1;
            1.0 / job.applications as f64
        } else {
            0.0
        };
        sum += value;
        sum_sq += value * value;
    }
    let mean = if n > 0 { sum / n as f64 } else { 0.0 };
    let variance = if n > 1 {
        (sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)
    } else {
        0.0
    };
    Ok(JobStats {
        total_jobs: n,
        exit_fractions: exit_counts
            .iter()
            .map(|&c| if n > 0 { c as f64 / n as f64 } else { 0.0 })
            .collect(),
        per_job_estimate: mean,
        per_job_se: if n > 0 {
            (variance.max(0.0) / n as f64).sqrt()
        } else {
            0.0
        },
        per_freelancer_estimate: if applications_total > 0 {
            jobs_with_applicants as f64 / applications_total as f64
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(
        lambda: f64,
        mu: &[f64],
        nu: f64,
        initial: &[f64],
        horizon: f64,
        step: f64,
        seed: u64,
    ) -> ScenarioConfig {
        ScenarioConfig::new(
            ModelParams::new(lambda, mu.to_vec(), nu).unwrap(),
            StateVector::new(initial.to_vec()).unwrap(),
            horizon,
            step,
            seed,
            1,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn flow_conservation_holds_exactly() {
        let cfg = config(2.0, &[1.0, 1.5], 1.0, &[3.0, 0.0], 50.0, 0.5, 11);
        let result = simulate_ps(&cfg).unwrap();
        for gap in result.flow_imbalance() {
            assert_eq!(gap, 0.0);
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let cfg = config(2.0, &[1.0, 1.0], 1.0, &[0.0, 0.0], 20.0, 0.25, 42);
        let a = simulate_ps(&cfg).unwrap();
        let b = simulate_ps(&cfg).unwrap();
        assert_eq!(a, b);
        let fcfg = config(1.0, &[1.0, 1.0, 1.0], 0.5, &[0.0; 3], 20.0, 0.25, 42);
        let a = simulate_freelance(&fcfg).unwrap();
        let b = simulate_freelance(&fcfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = simulate_ps(&config(2.0, &[1.0], 1.0, &[0.0], 20.0, 0.25, 1)).unwrap();
        let b = simulate_ps(&config(2.0, &[1.0], 1.0, &[0.0], 20.0, 0.25, 2)).unwrap();
        assert_ne!(a.trajectory, b.trajectory);
    }

    #[test]
    fn non_integer_initial_state_rejected() {
        let cfg = config(1.0, &[1.0], 1.0, &[0.5], 1.0, 0.1, 0);
        assert!(matches!(
            simulate_ps(&cfg),
            Err(SimError::NonIntegerInitialState { index: 0, .. })
        ));
    }

    #[test]
    fn huge_impatience_empties_the_system() {
        // With nu = 1e6 every customer abandons almost immediately.
        let cfg = config(1.0, &[1.0], 1e6, &[0.0], 100.0, 1.0, 3);
        let result = simulate_ps(&cfg).unwrap();
        let mean_occupancy: f64 =
            result.time_average.iter().sum::<f64>();
        assert!(mean_occupancy < 0.01, "mean occupancy {mean_occupancy}");
    }

    #[test]
    fn arrival_counts_near_poisson_mean() {
        let cfg = config(2.0, &[1.0], 1.0, &[0.0], 500.0, 5.0, 0);
        let result = simulate_ps(&cfg).unwrap();
        let expected = 2.0_f64 * 500.0;
        let slack = 4.0 * expected.sqrt();
        let observed = result.event_counts.arrivals as f64;
        assert!(
            (observed - expected).abs() <= slack,
            "arrivals {observed} vs {expected}"
        );
    }

    #[test]
    fn equal_rate_service_rate_is_mu_when_busy() {
        let cfg = config(2.0, &[1.0, 1.0], 0.5, &[5.0, 5.0], 400.0, 4.0, 9);
        let result = simulate_ps(&cfg).unwrap();
        let completions: u64 = result.event_counts.stage_completions.iter().sum();
        let rate = completions as f64 / result.busy_time;
        let slack = 3.0 * (completions as f64).sqrt() / result.busy_time;
        assert!((rate - 1.0).abs() <= slack, "rate {rate} +- {slack}");
    }

    #[test]
    fn freelance_requires_equal_rates() {
        let cfg = config(1.0, &[1.0, 2.0], 1.0, &[0.0, 0.0], 1.0, 0.1, 0);
        assert!(matches!(
            simulate_freelance(&cfg),
            Err(SimError::UnequalServiceRates)
        ));
    }

    #[test]
    fn freelance_without_job_arrivals_only_decays() {
        // Tiny lambda stands in for "no jobs ever arrive".
        let cfg = config(1e-12, &[1.0, 1.0], 1.0, &[4.0, 3.0], 60.0, 1.0, 5);
        let result = simulate_freelance(&cfg).unwrap();
        assert_eq!(result.event_counts.arrivals, 0);
        assert_eq!(result.trajectory.last_state().l1_norm(), 0.0);
        // Every initial job eventually exited.
        assert_eq!(result.jobs.len(), 7);
    }

    #[test]
    fn full_application_records_carry_the_limit() {
        let cfg = config(1.0, &[1.0, 1.0, 1.0], 0.2, &[0.0; 3], 200.0, 2.0, 8);
        let result = simulate_freelance(&cfg).unwrap();
        assert!(!result.jobs.is_empty());
        for job in &result.jobs {
            assert_eq!(
                job.exit_cause == ExitCause::FullApplications,
                job.applications == 3
            );
            match job.winner_applicant {
                Some(w) => assert!(job.applications > 0 && w < job.applications),
                None => assert_eq!(job.applications, 0),
            }
        }
        for gap in result.flow_imbalance() {
            assert_eq!(gap, 0.0);
        }
    }

    #[test]
    fn scaled_run_with_r_one_is_identity() {
        let cfg = config(2.0, &[1.0, 1.0], 1.0, &[0.0, 0.0], 10.0, 0.1, 21);
        let plain = simulate_ps(&cfg).unwrap().trajectory;
        let scaled = scaled_run(&cfg, 1.0).unwrap();
        assert_eq!(plain, scaled);
    }

    #[test]
    fn scaled_run_rounds_fluid_initial_state() {
        let cfg = config(2.0, &[1.0], 1.0, &[0.4], 1.0, 0.5, 21);
        // r = 10 turns the fluid mass 0.4 into 4 customers.
        let traj = scaled_run(&cfg, 10.0).unwrap();
        assert_eq!(traj.states()[0].as_slice(), &[0.4]);
    }

    #[test]
    fn job_stats_tiny_mu_gives_zero_estimate() {
        // Freelancers essentially never arrive, so no job collects applications.
        let cfg = config(1.0, &[1e-9, 1e-9], 1.0, &[0.0, 0.0], 100.0, 1.0, 13);
        let result = simulate_freelance(&cfg).unwrap();
        let stats = job_outcome_stats(&result, 2).unwrap();
        assert!(stats.total_jobs > 0);
        assert_eq!(stats.per_job_estimate, 0.0);
        assert_eq!(stats.exit_fractions[0], 1.0);
    }

    #[test]
    fn job_stats_tiny_nu_forces_full_applications() {
        let cfg = config(1.0, &[1.0, 1.0, 1.0, 1.0], 1e-9, &[0.0; 4], 300.0, 3.0, 17);
        let result = simulate_freelance(&cfg).unwrap();
        let stats = job_outcome_stats(&result, 4).unwrap();
        assert!(stats.total_jobs > 0);
        assert!((stats.per_job_estimate - 0.25).abs() < 1e-12);
        assert!((stats.exit_fractions[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn job_stats_reject_ps_results() {
        let cfg = config(2.0, &[1.0], 1.0, &[0.0], 1.0, 0.1, 0);
        let result = simulate_ps(&cfg).unwrap();
        assert_eq!(job_outcome_stats(&result, 1), Err(SimError::WrongMode));
    }

    #[test]
    fn trajectory_grid_spans_horizon() {
        let cfg = config(2.0, &[1.0], 1.0, &[0.0], 7.0, 0.4, 2);
        let result = simulate_ps(&cfg).unwrap();
        assert_eq!(result.trajectory.times()[0], 0.0);
        assert_eq!(result.trajectory.horizon(), 7.0);
        assert_eq!(result.trajectory.states()[0].as_slice(), &[0.0]);
    }
}
