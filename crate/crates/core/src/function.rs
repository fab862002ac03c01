//! Prox-describable convex functions and their conjugates.

use std::fmt;

use ndarray::{s, Array1, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::operator::LinearOperator;

/// An extended real value; `+inf` is explicit rather than a float sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtValue {
    Finite(f64),
    Infinite,
}

impl ExtValue {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtValue::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtValue::Finite(v) => Some(v),
            ExtValue::Infinite => None,
        }
    }

    pub fn add(self, other: ExtValue) -> ExtValue {
        match (self, other) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => ExtValue::Finite(a + b),
            _ => ExtValue::Infinite,
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Finite(v) => write!(f, "{v}"),
            ExtValue::Infinite => write!(f, "+inf"),
        }
    }
}

/// Relative tolerance used when a rounded subgradient lands just outside
/// the unit-scaled dual ball of an l1 term.
pub(crate) const DUAL_BALL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `weight * ||x||_1`.
    ScaledL1 { weight: f64 },
    /// `weight * ||x||_1 + (curvature / 2) ||x||^2`.
    ElasticL1 { weight: f64, curvature: f64 },
    /// `(curvature / 2) ||x||^2 + <linear, x>`.
    QuadraticLinear { curvature: f64, linear: Array1<f64> },
    /// Indicator of `{||u||_inf <= radius}` plus `<linear, u>`.
    BoxIndicator {
        radius: f64,
        linear: Option<Array1<f64>>,
    },
    /// `weight * ||op x||_1`; no closed-form prox.
    AnalysisL1 { weight: f64, op: LinearOperator },
    /// Sum of functions acting on consecutive coordinate blocks.
    Separable(Vec<ConvexFunction>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFunction {
    kind: FunctionKind,
    dim: usize,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

impl ConvexFunction {
    pub fn scaled_l1(dim: usize, weight: f64) -> Result<Self> {
        positive("l1 weight", weight)?;
        Self::with_dim(FunctionKind::ScaledL1 { weight }, dim)
    }

    pub fn elastic_l1(dim: usize, weight: f64, curvature: f64) -> Result<Self> {
        positive("l1 weight", weight)?;
        positive("curvature", curvature)?;
        Self::with_dim(FunctionKind::ElasticL1 { weight, curvature }, dim)
    }

    pub fn quadratic(curvature: f64, linear: Array1<f64>) -> Result<Self> {
        positive("curvature", curvature)?;
        let dim = linear.len();
        Self::with_dim(FunctionKind::QuadraticLinear { curvature, linear }, dim)
    }

    pub fn box_indicator(dim: usize, radius: f64, linear: Option<Array1<f64>>) -> Result<Self> {
        positive("box radius", radius)?;
        if let Some(l) = &linear {
            check_dim("box linear term", dim, l.len())?;
        }
        Self::with_dim(FunctionKind::BoxIndicator { radius, linear }, dim)
    }

    pub fn analysis_l1(weight: f64, op: LinearOperator) -> Result<Self> {
        positive("analysis weight", weight)?;
        let dim = op.input_dim();
        Self::with_dim(FunctionKind::AnalysisL1 { weight, op }, dim)
    }

    pub fn separable(blocks: Vec<ConvexFunction>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("separable function needs blocks".into()));
        }
        let dim = blocks.iter().map(|b| b.dim).sum();
        Self::with_dim(FunctionKind::Separable(blocks), dim)
    }

    fn with_dim(kind: FunctionKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("function dimension must be positive".into()));
        }
        Ok(ConvexFunction { kind, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    /// Modulus `gamma` with `h - (gamma/2)||.||^2` convex.
    pub fn strong_convexity(&self) -> f64 {
        match &self.kind {
            FunctionKind::ScaledL1 { .. }
            | FunctionKind::BoxIndicator { .. }
            | FunctionKind::AnalysisL1 { .. } => 0.0,
            FunctionKind::ElasticL1 { curvature, .. }
            | FunctionKind::QuadraticLinear { curvature, .. } => *curvature,
            FunctionKind::Separable(blocks) => blocks
                .iter()
                .map(|b| b.strong_convexity())
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn has_closed_form_prox(&self) -> bool {
        match &self.kind {
            FunctionKind::AnalysisL1 { .. } => false,
            FunctionKind::Separable(blocks) => blocks.iter().all(|b| b.has_closed_form_prox()),
            _ => true,
        }
    }

    /// Human-readable domain constraint, used in error messages.
    pub fn domain_description(&self) -> String {
        match &self.kind {
            FunctionKind::BoxIndicator { radius, .. } => format!("|u|_inf <= {radius}"),
            FunctionKind::Separable(blocks) => blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.domain_description() != "everywhere finite")
                .map(|(i, b)| format!("block {i}: {}", b.domain_description()))
                .collect::<Vec<_>>()
                .join(", "),
            _ => "everywhere finite".into(),
        }
    }

    pub fn value(&self, x: ArrayView1<f64>) -> Result<ExtValue> {
        check_dim("function value", self.dim, x.len())?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: ArrayView1<f64>) -> ExtValue {
        match &self.kind {
            FunctionKind::ScaledL1 { weight } => ExtValue::Finite(weight * l1(x)),
            FunctionKind::ElasticL1 { weight, curvature } => {
                ExtValue::Finite(weight * l1(x) + 0.5 * curvature * x.dot(&x))
            }
            FunctionKind::QuadraticLinear { curvature, linear } => {
                ExtValue::Finite(0.5 * curvature * x.dot(&x) + linear.dot(&x))
            }
            FunctionKind::BoxIndicator { radius, linear } => {
                if x.iter().any(|v| v.abs() > *radius) {
                    ExtValue::Infinite
                } else {
                    ExtValue::Finite(linear.as_ref().map_or(0.0, |l| l.dot(&x)))
                }
            }
            FunctionKind::AnalysisL1 { weight, op } => {
                let mut dx = Array1::zeros(op.output_dim());
                op.apply_into(x, dx.view_mut());
                ExtValue::Finite(weight * l1(dx.view()))
            }
            FunctionKind::Separable(blocks) => {
                let mut total = ExtValue::Finite(0.0);
                let mut offset = 0;
                for b in blocks {
                    total = total.add(b.value_unchecked(x.slice(s![offset..offset + b.dim])));
                    offset += b.dim;
                }
                total
            }
        }
    }

    /// Convex conjugate `h*(p)`. Not available in closed form for
    /// analysis-l1 terms; see the certificate machinery in `prox`.
    pub fn conjugate(&self, p: ArrayView1<f64>) -> Result<ExtValue> {
        check_dim("conjugate", self.dim, p.len())?;
        self.conjugate_unchecked(p)
    }

    fn conjugate_unchecked(&self, p: ArrayView1<f64>) -> Result<ExtValue> {
        Ok(match &self.kind {
            FunctionKind::ScaledL1 { weight } => {
                if p.iter().all(|v| v.abs() <= *weight) {
                    ExtValue::Finite(0.0)
                } else {
                    ExtValue::Infinite
                }
            }
            FunctionKind::ElasticL1 { weight, curvature } => ExtValue::Finite(
                p.iter()
                    .map(|v| (v.abs() - weight).max(0.0).powi(2))
                    .sum::<f64>()
                    / (2.0 * curvature),
            ),
            FunctionKind::QuadraticLinear { curvature, linear } => {
                let d = &p - linear;
                ExtValue::Finite(d.dot(&d) / (2.0 * curvature))
            }
            FunctionKind::BoxIndicator { radius, linear } => {
                let shifted = match linear {
                    Some(l) => l1((&p - l).view()),
                    None => l1(p),
                };
                ExtValue::Finite(radius * shifted)
            }
            FunctionKind::AnalysisL1 { .. } => {
                return Err(Error::UnsupportedFunction(
                    "conjugate of an analysis-l1 term has no closed form".into(),
                ))
            }
            FunctionKind::Separable(blocks) => {
                let mut total = ExtValue::Finite(0.0);
                let mut offset = 0;
                for b in blocks {
                    total = total.add(b.conjugate_unchecked(p.slice(s![offset..offset + b.dim]))?);
                    offset += b.dim;
                }
                total
            }
        })
    }
}

pub(crate) fn l1(x: ArrayView1<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}
