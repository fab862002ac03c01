//! Inexact golden-ratio primal-dual solvers with linesearch for
//! `min_x max_y f(x) + <Ax, y> - g(y)`.

pub mod algorithms;
pub mod error;
pub mod function;
pub mod metric;
pub mod norm;
pub mod operator;
pub mod problem;
pub mod problems;
pub mod prox;

pub use error::{Error, Result};
pub use function::{ConvexFunction, ExtValue, FunctionKind};
pub use metric::Metric;
pub use norm::operator_norm_in_metric;
pub use operator::LinearOperator;
pub use problem::{ErgodicAverage, GapReport, SaddleProblem};
