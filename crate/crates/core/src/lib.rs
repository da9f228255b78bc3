//! Fixed-point iterations of compositions of averaged quasinonexpansive
//! operators, evaluated at points of the affine hull of the orbit.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! - [`space`]: points of a finite-dimensional Euclidean space and affine
//!   combinations of orbit segments.
//! - [`operators`]: a catalog of averaged (quasi)nonexpansive operators,
//!   layer stacks and their composite averaging constant.
//! - [`schedules`]: weight arrays (memoryless, windowed means, Cesàro,
//!   inertial), the summability weights `χ_n`, and relaxation policies.
//! - [`engine`]: the iteration driver and its per-iteration trace.
//! - [`certificates`]: executable forms of the Fejér-type inequalities,
//!   a Grönwall envelope, summability monitors and the inertial parameter
//!   validator.
//! - [`solvers`]: presets for mean-value Peaceman–Rachford, the
//!   forward–backward family, Polyak's subgradient projection and
//!   Krasnosel'skiĭ–Mann iterations.
//! - [`problems`]: small test problems with reference solutions and
//!   brute-force oracles.
//!
//! ```
//! use orbitfix_core::prelude::*;
//!
//! // Mean-value iteration rescues x -> -x, which the plain iteration cannot.
//! let stack = LayerStack::single(AveragedOperator::linear(
//!     Matrix::scaled_identity(2, -1.0),
//!     OperatorClass::Nonexpansive,
//!     1.0,
//! ).unwrap());
//! let config = IterationConfig::new(stack, Point::new(vec![1.0, 0.0]).unwrap())
//!     .with_weights(WeightSchedule::window(2))
//!     .with_relaxation(RelaxationPolicy::Constant(1.0))
//!     .with_max_iters(60)
//!     .with_stop_residual(0.0);
//! let trace = run(&config).unwrap();
//! assert!(trace.final_point().norm() <= 1e-7);
//! ```

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod certificates;
pub mod engine;
mod error;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod schedules;
pub mod solvers;
pub mod space;

pub use error::{Error, Result};

/// Commonly used items.
pub mod prelude {
    pub use crate::certificates::{
        case_d_validate, gronwall_envelope, summability_monitor, theorem1_certificates,
        CaseDParams, CertificateKind, CertificateOptions, CertificateReport,
    };
    pub use crate::engine::{
        error_budget_check, run, Engine, ErrorModel, ErrorSequence, IterationConfig, RunTrace,
        StackProvider, StopReason,
    };
    pub use crate::linalg::Matrix;
    pub use crate::operators::{
        averagedness_certificate, compose, make_operator, AveragedOperator, ConvexFunction,
        ConvexSet, LayerStack, MonotoneOperator, OperatorClass, OperatorSpec, ProblemCase,
        SampleSpec, VectorField,
    };
    pub use crate::schedules::{
        chi, chi_table, relaxation_at, validate_weights, EtaSchedule, RelaxationPolicy,
        ScalarSequence, WeightFamily, WeightSchedule,
    };
    pub use crate::space::{affine_combine, norm_dist, Orbit, Point, SparseRow};
    pub use crate::{Error, Result};
}
