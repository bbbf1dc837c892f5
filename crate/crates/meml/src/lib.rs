//! Multi-environment meta-learning for stochastic linear bandits.
//!
//! The crate provides the building blocks of optimism-based linear bandit
//! learning (online regularized least squares, confidence ellipsoids, the
//! OFUL action rule and its biased variant), a family of per-task policies
//! (ITL, Oracle, AVG-OFUL, RR-OFUL) together with the MEML-OFUL meta-policy
//! that classifies which environment a fresh task came from before picking a
//! bias vector, and a fully seeded simulation harness that estimates transfer
//! regret across mixtures of task environments and evaluates the matching
//! theoretical bound formulas.
//!
//! Entry points:
//!
//! - [`estimation`]: online ridge state, radii, and the closed-form
//!   ellipsoid maximizer.
//! - [`environments`]: task/action/noise generators and distribution
//!   diagnostics.
//! - [`policies`]: per-task policies and the meta-policy.
//! - [`sim`]: training phase, coupled transfer-regret evaluation, and the
//!   misclassification study.
//! - [`bounds`]: exploration-length resolution and bound-curve evaluators.
//! - [`config`], [`report`], [`svg`], [`cli`]: scenario files, CSV/JSON/SVG
//!   artifacts, and the command-line front end.
//!
//! A narrative guide lives in `book/`; its code snippets are compiled as doc
//! tests by the `guide` crate in this workspace.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod environments;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod policies;
pub mod report;
pub mod rng;
pub mod sim;
pub mod svg;

pub use error::{MemlError, Result};

// Matrix types used throughout the public API.
pub use nalgebra::{DMatrix, DVector};
