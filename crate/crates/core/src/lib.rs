//! Kernel Stein goodness-of-fit testing for densities known up to a
//! normalizing constant.
//!
//! The main entry point is the linear-time finite set Stein discrepancy (FSSD)
//! test in [`testing::fssd_test`], with test locations tuned by
//! [`optimize::optimize_locations`]. The quadratic-time KSD test and its
//! linear-time variant (LKS) are provided as baselines, and [`bahadur`] holds
//! closed-form efficiency results for the Gaussian mean-shift problem.

pub mod bahadur;
pub mod error;
pub mod kernel;
pub mod models;
pub mod optimize;
pub mod rng;
pub mod sample;
pub mod stein;
pub mod testing;

pub use error::{Error, Result};
pub use nalgebra;
pub use kernel::GaussKernel;
pub use models::ScoredModel;
pub use sample::Sample;
pub use stein::{SteinFeatures, TestLocations};
pub use testing::{TestMethod, TestResult};
