//! Relative-frame position estimation.
//!
//! Node 0 and node 1 are placed by convention. Nodes 2 and 3 are each fitted
//! against those two by minimizing
//! `(|p - p0| - d_n0)^2 + (|p - p1| - d_n1)^2` with a damped Gauss-Newton
//! iteration. A closed-form circle intersection serves as seed and as test
//! oracle.

mod lm;
mod oracle;
mod poses;
mod system;

pub use lm::{solve_node, SolveDiagnostics, SolverConfig, StopReason};
pub use oracle::circle_intersection_oracle;
pub use poses::{
    estimate_poses, read_poses_csv, write_poses_csv, NodeEstimate, PoseEstimate,
    FALLBACK_SEED_HEIGHT, MIN_BASELINE,
};
pub use system::{jacobian, residuals, Jacobian, ResidualSystem};
