//! Dense numerical kernels shared by the analysis and solver modules.

pub mod fd;
pub mod linalg;
pub mod newton;
pub mod ode;

pub use fd::{default_fd_step, fd_jacobian};
pub use linalg::{
    kernel_basis, kernel_matrix, numeric_rank, row_compress, Matrix, RankDecision, RowCompression, Vector,
    DEFAULT_RANK_TOL,
};
pub use newton::{newton_solve, NewtonOptions, NewtonOutcome};
pub use ode::{
    integrate_ode, integrate_ode_partial, IntegratorConfig, IntegratorMode, StepperKind, TimeGrid, Trajectory,
};
