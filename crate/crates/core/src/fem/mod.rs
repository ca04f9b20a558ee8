//! Mixed finite element solution of the 1D micro-pillar compression problem.

mod assembly;
mod band;
mod mesh;
mod solver;

pub use assembly::{constrained_dofs, MixedField};
pub use band::BandMatrix;
pub use mesh::{GaussRule, Mesh1D, MeshConfig};
pub use solver::{
    assemble_residual, assemble_tangent, boundary_conditions_hold, newton_step_solve,
    run_compression, LoadProgram, NewtonReport, PlasticProfile, SolveTrace, SolverOptions,
    StepRecord,
};
