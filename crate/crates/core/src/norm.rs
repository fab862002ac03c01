//! Power-iteration estimate of `L = sup ||A* y|| / ||y||_T`.

use ndarray::{Array1, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::metric::Metric;
use crate::operator::LinearOperator;

pub const DEFAULT_POWER_ITERS: usize = 200;

/// Largest singular value of `A* T^{-1/2}`. The returned value is the
/// running maximum of the Rayleigh estimates, so it never decreases as
/// `iters` grows.
pub fn operator_norm_in_metric(
    a: &LinearOperator,
    t: &Metric,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    if iters == 0 {
        return Err(Error::InvalidArgument("power iteration needs iters >= 1".into()));
    }
    check_dim("operator norm metric", a.output_dim(), t.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_sqrt = t.diag().mapv(|d| 1.0 / d.sqrt());
    let mut u: Array1<f64> =
        Array1::from_shape_fn(a.output_dim(), |_| StandardNormal.sample(&mut rng));
    let mut v = Array1::zeros(a.input_dim());
    let mut w = Array1::zeros(a.output_dim());
    let mut best = 0.0f64;
    for _ in 0..iters {
        let nu = u.dot(&u).sqrt();
        if nu == 0.0 {
            break;
        }
        u /= nu;
        w.assign(&(&u * &inv_sqrt));
        a.adjoint_into(w.view(), v.view_mut());
        let nv = v.dot(&v).sqrt();
        best = best.max(nv);
        if nv == 0.0 {
            break;
        }
        a.apply_into(v.view(), w.view_mut());
        Zip::from(&mut u)
            .and(&w)
            .and(&inv_sqrt)
            .for_each(|u, w, s| *u = w * s);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    /// One-sided Jacobi SVD; returns singular values.
    fn jacobi_singular_values(mut m: Array2<f64>) -> Vec<f64> {
        let n = m.ncols();
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha = m.column(p).dot(&m.column(p));
                    let beta = m.column(q).dot(&m.column(q));
                    let gamma = m.column(p).dot(&m.column(q));
                    off = off.max(gamma.abs() / (alpha * beta).sqrt().max(1e-300));
                    if gamma.abs() < 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m.nrows() {
                        let (x, y) = (m[[i, p]], m[[i, q]]);
                        m[[i, p]] = c * x - s * y;
                        m[[i, q]] = s * x + c * y;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
        }
        (0..n).map(|j| m.column(j).dot(&m.column(j)).sqrt()).collect()
    }

    #[test]
    fn identity_and_diagonal() {
        let l = operator_norm_in_metric(&LinearOperator::identity(4), &Metric::identity(4), 200, 0).unwrap();
        assert!((l - 1.0).abs() < 1e-6);
        let d = LinearOperator::dense(array![[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let l = operator_norm_in_metric(&d, &Metric::identity(2), 200, 0).unwrap();
        assert!((l - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_operator() {
        let l = operator_norm_in_metric(&LinearOperator::zeros(3, 2), &Metric::identity(3), 5, 1).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn matches_jacobi_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = Array2::from_shape_fn((20, 30), |_| rng.random_range(-1.0..1.0));
        let sigma = jacobi_singular_values(m.clone())
            .into_iter()
            .fold(0.0, f64::max);
        let op = LinearOperator::dense(m).unwrap();
        let l = operator_norm_in_metric(&op, &Metric::identity(20), 200, 7).unwrap();
        assert!((l - sigma).abs() / sigma < 1e-4, "{l} vs {sigma}");
    }

    #[test]
    fn weighted_metric_scales_rows() {
        // T = 4 I halves the norm
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let op = LinearOperator::dense(m).unwrap();
        let plain = operator_norm_in_metric(&op, &Metric::identity(6), 300, 1).unwrap();
        let scaled = operator_norm_in_metric(&op, &Metric::scaled_identity(6, 4.0), 300, 1).unwrap();
        assert!((scaled - plain / 2.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_iterations() {
        let op = LinearOperator::gradient(8, 8).unwrap();
        let t = Metric::identity(128);
        let mut prev = 0.0;
        for it in [1, 2, 5, 10, 50, 200] {
            let l = operator_norm_in_metric(&op, &t, it, 3).unwrap();
            assert!(l >= prev);
            prev = l;
        }
        assert!(prev <= 8f64.sqrt());
    }
}
