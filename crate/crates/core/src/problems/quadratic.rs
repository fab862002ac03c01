use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::function::ConvexFunction;
use crate::operator::LinearOperator;
use crate::problem::SaddleProblem;

/// `f = (gf/2)||x||^2 + <c, x>`, `g = (gg/2)||y||^2 + <d, y>` coupled by a
/// Gaussian `A`, with the saddle point solved directly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSaddleInstance {
    pub a: Array2<f64>,
    pub c: Array1<f64>,
    pub d: Array1<f64>,
    pub gamma_f: f64,
    pub gamma_g: f64,
    pub x_star: Array1<f64>,
    pub y_star: Array1<f64>,
}

/// `A = randn(m, n) / sqrt(m)`, `c, d ~ N(0, I)`.
pub fn gen_strongly_convex_quadratic(
    n: usize,
    m: usize,
    gamma_f: f64,
    gamma_g: f64,
    seed: u64,
) -> Result<QuadraticSaddleInstance> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    if !(gamma_f > 0.0 && gamma_g > 0.0) {
        return Err(Error::InvalidArgument("moduli must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let scale = 1.0 / (m as f64).sqrt();
    let a = Array2::from_shape_fn((m, n), |_| scale * normal());
    let c = Array1::from_shape_fn(n, |_| normal());
    let d = Array1::from_shape_fn(m, |_| normal());
    // gf x + c + A^T y = 0 and A x - gg y - d = 0
    let mut h = a.t().dot(&a) / gamma_g;
    for i in 0..n {
        h[[i, i]] += gamma_f;
    }
    let rhs = a.t().dot(&d) / gamma_g - &c;
    let x_star = cholesky_solve(&h, rhs.view())?;
    let y_star = (a.dot(&x_star) - &d) / gamma_g;
    Ok(QuadraticSaddleInstance {
        a,
        c,
        d,
        gamma_f,
        gamma_g,
        x_star,
        y_star,
    })
}

/// Saddle problem with the solved point installed as reference.
pub fn quadratic_saddle(inst: &QuadraticSaddleInstance) -> Result<SaddleProblem> {
    SaddleProblem::new(
        ConvexFunction::quadratic(inst.gamma_f, inst.c.clone())?,
        ConvexFunction::quadratic(inst.gamma_g, inst.d.clone())?,
        LinearOperator::dense(inst.a.clone())?,
    )?
    .with_reference(inst.x_star.clone(), inst.y_star.clone())
}

/// Solves `M v = rhs` for symmetric positive definite `M`.
pub fn cholesky_solve(m: &Array2<f64>, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = m.nrows();
    check_dim("cholesky matrix columns", n, m.ncols())?;
    check_dim("cholesky right-hand side", n, rhs.len())?;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = m[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not positive definite (pivot {j} = {diag})"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    let mut w = rhs.to_owned();
    for i in 0..n {
        for k in 0..i {
            w[i] -= l[[i, k]] * w[k];
        }
        w[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            w[i] -= l[[k, i]] * w[k];
        }
        w[i] /= l[[i, i]];
    }
    Ok(w)
}
