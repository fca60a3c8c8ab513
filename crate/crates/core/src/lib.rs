//! Noncommutative Orlicz spaces on finite traced matrix algebras, with
//! Dunford–Schwartz operators, their ergodic averages, and constructive
//! witnesses for the associated maximal inequalities.

pub mod algebra;
pub mod check;
pub mod dsops;
pub mod error;
pub mod maximal;
pub mod orlicz;
pub mod symfunc;

pub use algebra::{AlgElement, ElementKind, Interval, Projection, TracedAlgebra, C64};
pub use check::Check;
pub use dsops::{DsCertificate, DsOperator};
pub use error::{Error, Result};
pub use maximal::{WitnessParams, WitnessReport};
pub use orlicz::{OrliczFunction, OrliczKind};
pub use symfunc::StepFunction;
