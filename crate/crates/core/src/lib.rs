//! Exact Max-Cut by branch and bound over ADMM-solved semidefinite
//! relaxations tightened with hypermetric cutting planes.

pub mod admm;
pub mod bnb;
pub mod bounding;
pub mod cuts;
pub mod error;
pub mod heuristic;
pub mod instance;
pub mod linalg;
pub mod parallel;

pub use bnb::{solve_serial, Branching, Solution, SolverConfig};
pub use error::{Error, Result};
pub use heuristic::CutSolution;
pub use instance::{parse_instance, read_instance, Graph};
pub use parallel::solve_parallel;
