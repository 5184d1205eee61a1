//! Temporal bumps, probe batteries and single-measurement packet trains.

mod bump;
mod plan;
mod split;

pub use bump::{make_bump, Bump};
pub use plan::{
    build_probe, indicator_basis, mode_profiles, nodal_basis, ProbeBattery, ProbePlan, ProbeTrain,
};
pub use split::{split_measurement, split_measurement_with, PacketResponse};
