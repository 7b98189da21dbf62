//! Information as a view-dependent expectation over changes of belief.
//!
//! Information gained by moving from belief `q0` to belief `q1` is the
//! expectation of `ln(q1/q0)` taken in the *view* of a third distribution,
//! usually the best-justified (rational) belief available. It is additive
//! over belief sequences, antisymmetric, and may be negative when a later view
//! finds an intermediate belief farther from the truth than the prior.
//!
//! Modules:
//!
//! - [`measures`]: discrete information functionals (entropy, cross entropy,
//!   KL, mutual information, pseudometrics, variance).
//! - [`gaussian`]: conjugate Gaussian location model and its closed forms.
//! - [`critical`]: minimal-information / maximum-entropy solvers and
//!   information-annealed inference.
//! - [`fisher`]: generalized Fisher score and matrix.
//! - [`experiments`]: seeded Monte-Carlo harness for negative information in
//!   sequential Gaussian inference.
//! - [`labelinfo`]: predictive and residual label information for classifier
//!   prediction logs.

pub mod critical;
pub mod error;
pub mod experiments;
pub mod fisher;
pub mod gaussian;
pub mod labelinfo;
pub mod measures;
pub mod stats;

pub use error::{Error, Result};
pub use gaussian::{Gaussian, LocationModel, SpdMatrix};
pub use measures::{BeliefWeights, Categorical, InfoValue, JointCategorical, Units};
