//! Summation-by-parts discretizations on curvilinear hexahedral meshes with
//! metric terms that satisfy the discrete geometric conservation law.

pub mod discretization;
pub mod error;
pub mod mesh;
pub mod metrics;
pub mod physics;
pub mod sbp;
pub mod time;
pub mod verification;

pub use error::{Error, Result};
