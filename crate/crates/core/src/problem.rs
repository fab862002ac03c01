//! Saddle problems `min_x max_y f(x) + <Ax, y> - g(y)`, gap functions and
//! ergodic averaging.

use ndarray::{Array1, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::function::{ConvexFunction, ExtValue};
use crate::operator::LinearOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleProblem {
    pub f: ConvexFunction,
    pub g: ConvexFunction,
    pub a: LinearOperator,
    reference: Option<Reference>,
}

#[derive(Debug, Clone, PartialEq)]
struct Reference {
    x: Array1<f64>,
    y: Array1<f64>,
    fx: f64,
    gy: f64,
    ax: Array1<f64>,
    aty: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub primal: f64,
    pub dual: f64,
    pub total: f64,
}

impl SaddleProblem {
    pub fn new(f: ConvexFunction, g: ConvexFunction, a: LinearOperator) -> Result<Self> {
        check_dim("primal function vs operator input", a.input_dim(), f.dim())?;
        check_dim("dual function vs operator output", a.output_dim(), g.dim())?;
        Ok(SaddleProblem {
            f,
            g,
            a,
            reference: None,
        })
    }

    pub fn primal_dim(&self) -> usize {
        self.a.input_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.a.output_dim()
    }

    /// Installs `(x_bar, y_bar)` as the saddle point used by the gap functions.
    pub fn set_reference(&mut self, x: Array1<f64>, y: Array1<f64>) -> Result<()> {
        check_dim("reference primal point", self.primal_dim(), x.len())?;
        check_dim("reference dual point", self.dual_dim(), y.len())?;
        let fx = finite_value("f", &self.f, x.view())?;
        let gy = finite_value("g", &self.g, y.view())?;
        let ax = self.a.apply(x.view())?;
        let aty = self.a.adjoint_apply(y.view())?;
        self.reference = Some(Reference { x, y, fx, gy, ax, aty });
        Ok(())
    }

    pub fn with_reference(mut self, x: Array1<f64>, y: Array1<f64>) -> Result<Self> {
        self.set_reference(x, y)?;
        Ok(self)
    }

    pub fn reference(&self) -> Option<(&Array1<f64>, &Array1<f64>)> {
        self.reference.as_ref().map(|r| (&r.x, &r.y))
    }

    /// `L(x, y) = f(x) + <Ax, y> - g(y)`.
    pub fn lagrangian(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        let fx = finite_value("f", &self.f, x)?;
        let gy = finite_value("g", &self.g, y)?;
        Ok(fx + self.a.apply(x)?.dot(&y) - gy)
    }

    /// Primal objective `max_y L(x, y) = f(x) + g*(Ax)`.
    pub fn primal_objective(&self, x: ArrayView1<f64>) -> Result<f64> {
        let fx = finite_value("f", &self.f, x)?;
        let ax = self.a.apply(x)?;
        match self.g.conjugate(ax.view())? {
            ExtValue::Finite(v) => Ok(fx + v),
            ExtValue::Infinite => Err(Error::DomainViolation {
                function: "g*".into(),
                constraint: "Ax outside the conjugate domain".into(),
            }),
        }
    }

    /// `P(x) = f(x) - f(x_bar) + <x - x_bar, A* y_bar>`,
    /// `D(y) = g(y) - g(y_bar) - <y - y_bar, A x_bar>`.
    pub fn gap(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<GapReport> {
        let r = self.reference.as_ref().ok_or_else(|| {
            Error::PreconditionViolation("gap needs an installed reference saddle point".into())
        })?;
        check_dim("gap primal point", self.primal_dim(), x.len())?;
        check_dim("gap dual point", self.dual_dim(), y.len())?;
        let fx = finite_value("f", &self.f, x)?;
        let gy = finite_value("g", &self.g, y)?;
        let primal = fx - r.fx + (&x - &r.x).dot(&r.aty);
        let dual = gy - r.gy - (&y - &r.y).dot(&r.ax);
        Ok(GapReport {
            primal,
            dual,
            total: primal + dual,
        })
    }
}

fn finite_value(name: &str, h: &ConvexFunction, x: ArrayView1<f64>) -> Result<f64> {
    match h.value(x)? {
        ExtValue::Finite(v) => Ok(v),
        ExtValue::Infinite => Err(Error::DomainViolation {
            function: name.into(),
            constraint: h.domain_description(),
        }),
    }
}

/// Weighted running averages of primal and dual iterates.
///
/// Weights may be supplied in log form; sums are kept relative to a moving
/// scale so geometric weights like `rho^{-k}` do not overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAverage {
    sum_x: Array1<f64>,
    sum_y: Array1<f64>,
    total: f64,
    log_scale: f64,
    count: usize,
}

impl ErgodicAverage {
    pub fn new(primal_dim: usize, dual_dim: usize) -> Self {
        ErgodicAverage {
            sum_x: Array1::zeros(primal_dim),
            sum_y: Array1::zeros(dual_dim),
            total: 0.0,
            log_scale: 0.0,
            count: 0,
        }
    }

    pub fn update(&mut self, weight: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ergodic weight must be positive, got {weight}"
            )));
        }
        let relative = if self.log_scale == 0.0 {
            weight
        } else {
            weight * (-self.log_scale).exp()
        };
        self.accumulate(relative, x, y)
    }

    /// Adds `exp(log_weight) * (x, y)`.
    pub fn update_log(&mut self, log_weight: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<()> {
        if !log_weight.is_finite() {
            return Err(Error::InvalidArgument("non-finite ergodic log-weight".into()));
        }
        if log_weight - self.log_scale > 300.0 {
            self.rescale(log_weight);
        }
        self.accumulate((log_weight - self.log_scale).exp(), x, y)
    }

    fn rescale(&mut self, new_log_scale: f64) {
        let shrink = (self.log_scale - new_log_scale).exp();
        self.sum_x *= shrink;
        self.sum_y *= shrink;
        self.total *= shrink;
        self.log_scale = new_log_scale;
    }

    fn accumulate(&mut self, w: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<()> {
        check_dim("ergodic primal", self.sum_x.len(), x.len())?;
        check_dim("ergodic dual", self.sum_y.len(), y.len())?;
        if !w.is_finite() {
            return Err(Error::InvalidArgument("ergodic weight overflow".into()));
        }
        self.sum_x.scaled_add(w, &x);
        self.sum_y.scaled_add(w, &y);
        self.total += w;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Natural log of the accumulated weight.
    pub fn log_total_weight(&self) -> f64 {
        self.total.ln() + self.log_scale
    }

    pub fn point(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        if self.count == 0 {
            return Err(Error::PreconditionViolation("empty ergodic accumulator".into()));
        }
        Ok((&self.sum_x / self.total, &self.sum_y / self.total))
    }
}
