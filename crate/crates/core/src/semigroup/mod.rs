//! Compatible semigroups of stochastic matrices.
//!
//! Given a cadlag path `Y` of bounded variation, [`build_minimal_semigroup`]
//! constructs per-step matrices `Q_{tᵢ,tᵢ₊₁}` with `Y_s · Q_{s,t} = Y_t` that
//! move no more mass than the path's total variation. Products of
//! consecutive factors give `Q_{s,t}` for any grid pair, so the cocycle
//! relation holds by construction. [`sample_inhomogeneous_chain`] turns a
//! table into i.i.d. time-inhomogeneous coordinate chains.

mod build;
mod check;
mod feller;
mod sample;
mod table;
mod transport;

pub use build::{build_minimal_semigroup, build_minimal_semigroup_with, BuildOptions};
pub use check::{check_semigroup, empirical_cocycle_residual, SemigroupReport, Triple};
pub use feller::{feller_flow_check, FellerReport, CONTINUITY_GAPS};
pub use sample::sample_inhomogeneous_chain;
pub use table::{Origin, SemigroupTable};
pub use transport::{
    integrate_opened_segment, jump_transport_matrix, rate_matrix, rate_matrix_with_floor,
    OCCUPANCY_FLOOR,
};
