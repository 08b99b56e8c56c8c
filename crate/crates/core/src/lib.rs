//! Verification engine for contact, Jacobi, Poisson and bi-Hamiltonian
//! structures given by coordinate expressions.
//!
//! Layering, bottom to top: [`expr`] and [`autodiff`] evaluate coordinate
//! formulas with exact derivatives; [`chart`] and [`tensor`] give the
//! antisymmetric calculus; [`structures`], [`bihamiltonian`] and
//! [`symplectization`] implement the geometric checks; [`flows`] integrates
//! vector fields; [`report`] and [`sampling`] support the scenario runner.

pub mod autodiff;
pub mod bihamiltonian;
pub mod chart;
pub mod error;
pub mod expr;
pub mod flows;
pub mod generators;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod structures;
pub mod symplectization;
pub mod tensor;

pub use autodiff::{Dual, Jet2, Scalar};
pub use chart::{Chart, ChartMap, FdFunction, ScalarField, ScalarFn};
pub use error::{Error, Result};
pub use expr::{parse, Expr, ParseError};
pub use flows::Trajectory;
pub use report::{CheckRecord, Metric, Policy, Report, Status, TaskReport, Verdict};
pub use structures::{ContactForm, ExactSymplectic, JacobiStructure, VectorSource};
pub use tensor::{AltTensor, FormField, MixedTensorPointValue, MultivectorField};
