//! Laplace transforms, exponent and pole extraction, and assembly of
//! spectral data from measured responses.

mod assemble;
mod data;
mod eigen;
mod laplace;
mod model;
mod pencil;
mod rational;
mod refine;

pub use assemble::{
    assemble_boundary_spectral_data, assemble_source_spectral_data, GroupDiagnostic, Recovery,
    RecoveryOptions, RecoveryPath, Responses,
};
pub use data::{BoundarySpectralData, SpectralData, SpectralGroup};
pub use eigen::{exponent_to_eigenvalue, EigenEstimate, ExponentInput, PAIR_CONSISTENCY_TOL};
pub use laplace::{laplace_transform, log_points, LaplaceNormalization, LaplaceSamples, TAIL_BOUND};
pub use model::{ExpComponent, ExponentialModel};
pub use pencil::{matrix_pencil, matrix_pencil_with, PencilOptions};
pub use rational::{rational_pole_fit, rational_pole_fit_with, Pole, PoleFit, RationalOptions};

pub(crate) use pencil::window_indices;
