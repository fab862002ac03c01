use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::function::{l1, ConvexFunction};
use crate::operator::LinearOperator;
use crate::problem::SaddleProblem;

/// Radius of the (inactive) box on `x` in [`tv_l1_saddle_exact`].
pub const TV_BOX_RADIUS: f64 = 1e3;

/// `min_x ||Kx - f||_1 + nu ||Dx||_1` on an `h x w` image.
#[derive(Debug, Clone, PartialEq)]
pub struct TVDeblurInstance {
    pub clean: Array2<f64>,
    pub observed: Array2<f64>,
    pub window: usize,
    pub density: f64,
    pub nu: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub seed: u64,
}

impl TVDeblurInstance {
    pub fn height(&self) -> usize {
        self.clean.nrows()
    }

    pub fn width(&self) -> usize {
        self.clean.ncols()
    }

    pub fn pixels(&self) -> usize {
        self.clean.len()
    }

    pub fn blur(&self) -> LinearOperator {
        make_blur_operator(self.height(), self.width(), self.window).expect("validated at construction")
    }

    pub fn gradient(&self) -> LinearOperator {
        make_gradient_operator(self.height(), self.width()).expect("validated at construction")
    }
}

pub fn make_gradient_operator(height: usize, width: usize) -> Result<LinearOperator> {
    LinearOperator::gradient(height, width)
}

pub fn make_blur_operator(height: usize, width: usize, window: usize) -> Result<LinearOperator> {
    LinearOperator::blur(height, width, window)
}

pub fn flatten_image(image: &Array2<f64>) -> Array1<f64> {
    image.iter().copied().collect()
}

pub fn unflatten_image(v: ArrayView1<f64>, height: usize, width: usize) -> Result<Array2<f64>> {
    check_dim("image vector", height * width, v.len())?;
    Ok(Array2::from_shape_fn((height, width), |(i, j)| v[i * width + j]))
}

/// Piecewise-constant test image with values in `[0, 1]`: an ellipse, a
/// bright rectangle, a dark disk and a thin bar on a dim background.
pub fn phantom(height: usize, width: usize) -> Array2<f64> {
    let (h, w) = (height as f64, width as f64);
    Array2::from_shape_fn((height, width), |(i, j)| {
        let (y, x) = ((i as f64 + 0.5) / h, (j as f64 + 0.5) / w);
        let mut v = 0.1;
        if ((x - 0.5) / 0.4).powi(2) + ((y - 0.5) / 0.45).powi(2) <= 1.0 {
            v = 0.5;
        }
        if (0.3..0.55).contains(&x) && (0.25..0.45).contains(&y) {
            v = 0.9;
        }
        if (x - 0.65).powi(2) + (y - 0.65).powi(2) <= 0.12f64.powi(2) {
            v = 0.25;
        }
        if (0.2..0.8).contains(&x) && (0.8..0.85).contains(&y) {
            v = 1.0;
        }
        v
    })
}

/// Each pixel is replaced with probability `density`, by 0 or 1 with equal odds.
pub fn salt_pepper(image: &Array2<f64>, density: f64, seed: u64) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density must lie in [0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for v in out.iter_mut() {
        let u: f64 = rng.random();
        if u < density {
            *v = if rng.random::<bool>() { 1.0 } else { 0.0 };
        }
    }
    Ok(out)
}

/// Blurs `clean` with a `window x window` mean filter and adds salt-and-pepper
/// noise. `kappa2 = nu - kappa1`.
pub fn gen_tv_deblur(
    clean: Array2<f64>,
    window: usize,
    density: f64,
    nu: f64,
    kappa1: f64,
    seed: u64,
) -> Result<TVDeblurInstance> {
    let (h, w) = clean.dim();
    if h < 2 || w < 2 {
        return Err(Error::InvalidArgument(format!("image must be at least 2x2, got {h}x{w}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    let kappa2 = nu - kappa1;
    if !(kappa1 > 0.0 && kappa2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "split needs 0 < kappa1 < nu, got kappa1 = {kappa1}, nu = {nu}"
        )));
    }
    let k = make_blur_operator(h, w, window)?;
    let blurred = k.apply(flatten_image(&clean).view())?;
    let observed = salt_pepper(&unflatten_image(blurred.view(), h, w)?, density, seed)?;
    Ok(TVDeblurInstance {
        clean,
        observed,
        window,
        density,
        nu,
        kappa1,
        kappa2,
        seed,
    })
}

fn dual_function(inst: &TVDeblurInstance) -> Result<ConvexFunction> {
    let n = inst.pixels();
    ConvexFunction::separable(vec![
        ConvexFunction::box_indicator(n, 1.0, Some(flatten_image(&inst.observed)))?,
        ConvexFunction::box_indicator(2 * n, 1.0, None)?,
    ])
}

/// `f = kappa1 ||D.||_1`, `A = [K; kappa2 D]`, `g(u, v) = <f, u>` on
/// `|u|_inf <= 1, |v|_inf <= 1`.
pub fn tv_l1_saddle(inst: &TVDeblurInstance) -> Result<SaddleProblem> {
    SaddleProblem::new(
        ConvexFunction::analysis_l1(inst.kappa1, inst.gradient())?,
        dual_function(inst)?,
        LinearOperator::stack(vec![(1.0, inst.blur()), (inst.kappa2, inst.gradient())])?,
    )
}

/// The same objective with the whole TV term in the coupling, `A = [K; nu D]`,
/// and `f` a box of radius [`TV_BOX_RADIUS`]. Every prox is closed form.
pub fn tv_l1_saddle_exact(inst: &TVDeblurInstance) -> Result<SaddleProblem> {
    SaddleProblem::new(
        ConvexFunction::box_indicator(inst.pixels(), TV_BOX_RADIUS, None)?,
        dual_function(inst)?,
        LinearOperator::stack(vec![(1.0, inst.blur()), (inst.nu, inst.gradient())])?,
    )
}

/// `F(x) = ||Kx - f||_1 + nu ||Dx||_1`.
pub fn tv_objective(inst: &TVDeblurInstance, x: ArrayView1<f64>) -> Result<f64> {
    check_dim("tv objective", inst.pixels(), x.len())?;
    let fit = inst.blur().apply(x)? - flatten_image(&inst.observed);
    let dx = inst.gradient().apply(x)?;
    Ok(l1(fit.view()) + inst.nu * l1(dx.view()))
}

/// `(F(x) - F*) / F*`.
pub fn relative_residual(inst: &TVDeblurInstance, x: ArrayView1<f64>, f_star: f64) -> Result<f64> {
    if !(f_star > 0.0) {
        return Err(Error::InvalidArgument(format!("F* must be positive, got {f_star}")));
    }
    Ok((tv_objective(inst, x)? - f_star) / f_star)
}
