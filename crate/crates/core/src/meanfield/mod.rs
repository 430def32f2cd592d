//! Mean-field models: per-site flip rates that depend on the configuration
//! only through its empirical color frequencies.
//!
//! Three views of the same model live here: the exact finite-`n` particle
//! system ([`simulate_finite`]), its deterministic fluid limit
//! ([`solve_ode`]), and the infinite-exchangeable limit process sampled as
//! i.i.d. time-inhomogeneous coordinates driven by the fluid path
//! ([`simulate_limit`]).

mod field;
mod ode;
mod sim;

pub use field::{glauber_field, reed_frost_field, IsingParams, RateField, ReedFrostParams};
pub use ode::{solve_ode, solve_ode_at, FluidTrack};
pub use sim::{simulate_finite, simulate_finite_replicates, simulate_limit, InitialState};
