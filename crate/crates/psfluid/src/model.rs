//! Shared domain types: queue parameters, state vectors, and trajectories.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("rate `{name}` must be positive and finite, got {value}")]
    NonpositiveRate { name: &'static str, value: f64 },
    #[error("the service-stage rate list must not be empty")]
    EmptyStageList,
    #[error("state coordinate {index} must be non-negative and finite, got {value}")]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(&'static str),
}

/// Parameters of the multistage processor-sharing queue with impatience:
/// arrival rate, per-stage service rates, and the abandonment rate.
///
/// Construction validates positivity and records whether the parameters are
/// overloaded (offered load above one); operations that only make sense in
/// overload check [`ModelParams::is_overloaded`] and reject otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    lambda: f64,
    mu: Vec<f64>,
    nu: f64,
    overloaded: bool,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: Vec<f64>, nu: f64) -> Result<Self, ModelError> {
        if mu.is_empty() {
            return Err(ModelError::EmptyStageList);
        }
        check_rate("lambda", lambda)?;
        check_rate("nu", nu)?;
        for &rate in &mu {
            check_rate("mu", rate)?;
        }
        let load: f64 = mu.iter().map(|m| lambda / m).sum();
        Ok(Self {
            lambda,
            mu,
            nu,
            overloaded: load > 1.0,
        })
    }

    /// Arrival rate of new customers (jobs per unit time).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-stage service rates, one per stage.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Impatience (abandonment) rate.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Number of service stages.
    pub fn stages(&self) -> usize {
        self.mu.len()
    }

    /// Offered load `lambda * sum(1/mu_i)`.
    pub fn offered_load(&self) -> f64 {
        self.mu.iter().map(|m| self.lambda / m).sum()
    }

    /// Whether total work arrives faster than the unit server can process it.
    pub fn is_overloaded(&self) -> bool {
        self.overloaded
    }

    /// True when every stage has the same service rate, which is required by
    /// the job-board formulation.
    pub fn has_equal_rates(&self) -> bool {
        self.mu.iter().all(|&m| m == self.mu[0])
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonpositiveRate { name, value })
    }
}

/// Validates the given parameters, recomputing the overload annotation.
///
/// Idempotent: validating already-validated parameters returns them unchanged.
pub fn validate_params(params: ModelParams) -> Result<ModelParams, ModelError> {
    ModelParams::new(params.lambda, params.mu, params.nu)
}

/// A non-negative vector over stages: stochastic counts or fluid masses.
///
/// Counts are stored as reals so the same type serves both regimes; the
/// simulators keep them integral and assert so in debug builds.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::NegativeCoordinate { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of coordinates; they are non-negative, so this is the L1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// L1 norm of a state vector.
pub fn l1_norm(s: &StateVector) -> f64 {
    s.l1_norm()
}

/// A time grid starting at zero with one state per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self, ModelError> {
        if times.len() != states.len() {
            return Err(ModelError::InvalidTrajectory(
                "times and states have different lengths",
            ));
        }
        if times.is_empty() {
            return Err(ModelError::InvalidTrajectory("empty time grid"));
        }
        if times[0] != 0.0 {
            return Err(ModelError::InvalidTrajectory("time grid must start at 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidTrajectory(
                "time grid must be strictly increasing",
            ));
        }
        let stages = states[0].len();
        if states.iter().any(|s| s.len() != stages) {
            return Err(ModelError::InvalidTrajectory(
                "states have inconsistent dimensions",
            ));
        }
        Ok(Self { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty grids
    }

    pub fn stages(&self) -> usize {
        self.states[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &StateVector {
        self.states.last().unwrap()
    }

    /// Writes `t,z1,...,zI` rows; floats use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.stages() {
            write!(w, ",z{i}")?;
        }
        writeln!(w)?;
        for (t, state) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in state.as_slice() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}
