//! Benchmark problem generators: sparse recovery, TV-L1 deblurring, and a
//! strongly convex quadratic saddle with a known solution.

mod lasso;
mod quadratic;
mod reference;
mod tv;

pub use lasso::{gen_sparse_recovery, lasso_objective, lasso_saddle, lasso_saddle_augmented, SparseRecoveryInstance};
pub use quadratic::{cholesky_solve, gen_strongly_convex_quadratic, quadratic_saddle, QuadraticSaddleInstance};
pub use reference::{kkt_residual, solve_reference, ReferenceOptions, ReferenceSolution};
pub use tv::{
    flatten_image, gen_tv_deblur, make_blur_operator, make_gradient_operator, phantom, relative_residual, salt_pepper,
    tv_l1_saddle, tv_l1_saddle_exact, tv_objective, unflatten_image, TVDeblurInstance, TV_BOX_RADIUS,
};
