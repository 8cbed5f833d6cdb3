//! Multistage processor-sharing queue with impatience.
//!
//! A single unit-rate server is shared equally among all present customers.
//! Each customer passes through `I` exponential service stages in series and
//! abandons when an independent exponential patience clock expires. The same
//! dynamics describe a freelance job board where jobs collect up to `I`
//! applications from freelancers arriving over time.
//!
//! The crate provides:
//!
//! * exact event-by-event simulators for both the stage-indexed queue and the
//!   job-board formulation, plus a fluid-scaling harness ([`sim`]);
//! * the deterministic fluid model: ODE right-hand side, fixed-step
//!   integration, and the unique invariant state under overload ([`fluid`]);
//! * the equivalent renewal-type integral description, used as an independent
//!   cross-check of the ODE solution ([`integral`]);
//! * hypoexponential (sum-of-exponentials) distribution kernels backing the
//!   integral description ([`phasetype`]);
//! * numerical probes of entropy and quadratic Lyapunov candidates for the
//!   routed generalisation ([`lyapunov`]);
//! * closed-form job-board analytics: the chance for an applicant to win a
//!   job under an application limit ([`metrics`]).
//!
//! The `psfluid` binary wires these together into reproducible scenario runs
//! with CSV and JSON outputs.

pub mod fluid;
pub mod integral;
pub mod lyapunov;
pub mod metrics;
pub mod model;
pub mod phasetype;
pub mod report;
pub mod scenario;
pub mod sim;

pub use model::{ModelError, ModelParams, StateVector, Trajectory};
pub use scenario::{ConfigError, ScenarioConfig};
