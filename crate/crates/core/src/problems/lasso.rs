use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::function::{l1, ConvexFunction};
use crate::operator::LinearOperator;
use crate::problem::SaddleProblem;

/// Noise standard deviation of the observations.
const NOISE_STD: f64 = 0.1;

/// `min_x 0.5 ||Ax - b||^2 + zeta ||x||_1` with planted sparse `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRecoveryInstance {
    pub a: Array2<f64>,
    pub omega: Array1<f64>,
    pub b: Array1<f64>,
    pub zeta: f64,
    pub seed: u64,
}

impl SparseRecoveryInstance {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }
}

/// `A = randn(n, p) / sqrt(n)`, `s` planted entries uniform in `[-10, 10]`,
/// `b = A omega + N(0, 0.1^2)`.
pub fn gen_sparse_recovery(n: usize, p: usize, s: usize, zeta: f64, seed: u64) -> Result<SparseRecoveryInstance> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("n and p must be positive".into()));
    }
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!("need 0 < s <= p, got s = {s}, p = {p}")));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidArgument(format!("zeta must be positive, got {zeta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let a = Array2::from_shape_fn((n, p), |_| {
        let e: f64 = StandardNormal.sample(&mut rng);
        scale * e
    });
    let mut omega = Array1::zeros(p);
    for i in rand::seq::index::sample(&mut rng, p, s) {
        // resample the (measure-zero) exact zero so the support has size s
        let mut v = 0.0;
        while v == 0.0 {
            v = rng.random_range(-10.0..=10.0);
        }
        omega[i] = v;
    }
    let noise = Normal::new(0.0, NOISE_STD).expect("valid normal");
    let b = a.dot(&omega) + Array1::from_shape_fn(n, |_| noise.sample(&mut rng));
    Ok(SparseRecoveryInstance {
        a,
        omega,
        b,
        zeta,
        seed,
    })
}

/// `f = zeta ||.||_1`, `g = 0.5 ||.||^2 + <b, .>`.
pub fn lasso_saddle(inst: &SparseRecoveryInstance) -> Result<SaddleProblem> {
    SaddleProblem::new(
        ConvexFunction::scaled_l1(inst.p(), inst.zeta)?,
        ConvexFunction::quadratic(1.0, inst.b.clone())?,
        LinearOperator::dense(inst.a.clone())?,
    )
}

/// As [`lasso_saddle`] with `f = zeta ||.||_1 + (gamma/2) ||.||^2`.
pub fn lasso_saddle_augmented(inst: &SparseRecoveryInstance, gamma: f64) -> Result<SaddleProblem> {
    SaddleProblem::new(
        ConvexFunction::elastic_l1(inst.p(), inst.zeta, gamma)?,
        ConvexFunction::quadratic(1.0, inst.b.clone())?,
        LinearOperator::dense(inst.a.clone())?,
    )
}

pub fn lasso_objective(inst: &SparseRecoveryInstance, x: ArrayView1<f64>) -> Result<f64> {
    check_dim("lasso objective", inst.p(), x.len())?;
    let r = inst.a.dot(&x) - &inst.b;
    Ok(0.5 * r.dot(&r) + inst.zeta * l1(x))
}
