//! Linear coupling operators with exact adjoints.
//!
//! Images are stored row-major: pixel `(i, j)` of an `h x w` image lives at
//! index `i * w + j`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewMut1};

use crate::error::{check_dim, Error, Result};

/// Mean filter over a `(2r+1) x (2r+1)` window with replicate padding.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBlur {
    pub height: usize,
    pub width: usize,
    pub half_width: usize,
}

/// Forward differences stacked as `[horizontal; vertical]`; the difference
/// across the last column (resp. row) is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardGradient {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearOperator {
    Dense(Array2<f64>),
    Blur(BoxBlur),
    Gradient(ForwardGradient),
    /// Vertical stack `[c_1 A_1; c_2 A_2; ...]` of operators sharing an input space.
    Stack(Vec<(f64, LinearOperator)>),
}

impl LinearOperator {
    pub fn dense(matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidArgument("dense operator must be non-empty".into()));
        }
        Ok(LinearOperator::Dense(matrix))
    }

    pub fn identity(n: usize) -> Self {
        LinearOperator::Dense(Array2::eye(n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearOperator::Dense(Array2::zeros((rows, cols)))
    }

    pub fn blur(height: usize, width: usize, window: usize) -> Result<Self> {
        if window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "blur window must be odd, got {window}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("blur image must be non-empty".into()));
        }
        Ok(LinearOperator::Blur(BoxBlur {
            height,
            width,
            half_width: window / 2,
        }))
    }

    pub fn gradient(height: usize, width: usize) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidArgument(format!(
                "gradient needs an image of at least 2x2, got {height}x{width}"
            )));
        }
        Ok(LinearOperator::Gradient(ForwardGradient { height, width }))
    }

    pub fn stack(parts: Vec<(f64, LinearOperator)>) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidArgument("empty operator stack".into()));
        };
        let n = first.input_dim();
        for (scale, op) in &parts {
            check_dim("stacked operator input", n, op.input_dim())?;
            if !scale.is_finite() {
                return Err(Error::InvalidArgument("non-finite stack scale".into()));
            }
        }
        Ok(LinearOperator::Stack(parts))
    }

    pub fn input_dim(&self) -> usize {
        match self {
            LinearOperator::Dense(m) => m.ncols(),
            LinearOperator::Blur(b) => b.height * b.width,
            LinearOperator::Gradient(g) => g.height * g.width,
            LinearOperator::Stack(parts) => parts[0].1.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            LinearOperator::Dense(m) => m.nrows(),
            LinearOperator::Blur(b) => b.height * b.width,
            LinearOperator::Gradient(g) => 2 * g.height * g.width,
            LinearOperator::Stack(parts) => parts.iter().map(|(_, op)| op.output_dim()).sum(),
        }
    }

    /// `A x`.
    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("operator apply", self.input_dim(), x.len())?;
        let mut out = Array1::zeros(self.output_dim());
        self.apply_into(x, out.view_mut());
        Ok(out)
    }

    /// `A* y`.
    pub fn adjoint_apply(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("operator adjoint", self.output_dim(), y.len())?;
        let mut out = Array1::zeros(self.input_dim());
        self.adjoint_into(y, out.view_mut());
        Ok(out)
    }

    /// Unchecked forward application; `out` is overwritten.
    pub(crate) fn apply_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        match self {
            LinearOperator::Dense(m) => out.assign(&m.dot(&x)),
            LinearOperator::Blur(b) => b.forward(x, out),
            LinearOperator::Gradient(g) => g.forward(x, out),
            LinearOperator::Stack(parts) => {
                let mut offset = 0;
                for (scale, op) in parts {
                    let len = op.output_dim();
                    let mut block = out.slice_mut(s![offset..offset + len]);
                    op.apply_into(x, block.view_mut());
                    if *scale != 1.0 {
                        block.mapv_inplace(|v| v * scale);
                    }
                    offset += len;
                }
            }
        }
    }

    /// Unchecked adjoint application; `out` is overwritten.
    pub(crate) fn adjoint_into(&self, y: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        match self {
            LinearOperator::Dense(m) => out.assign(&m.t().dot(&y)),
            LinearOperator::Blur(b) => b.adjoint(y, out),
            LinearOperator::Gradient(g) => g.adjoint(y, out),
            LinearOperator::Stack(parts) => {
                out.fill(0.0);
                let mut scratch = Array1::zeros(out.len());
                let mut offset = 0;
                for (scale, op) in parts {
                    let len = op.output_dim();
                    op.adjoint_into(y.slice(s![offset..offset + len]), scratch.view_mut());
                    out.scaled_add(*scale, &scratch);
                    offset += len;
                }
            }
        }
    }

    /// Cheap upper bound on `||A||^2`.
    pub fn norm_sq_upper_bound(&self) -> f64 {
        match self {
            LinearOperator::Dense(m) => m.iter().map(|v| v * v).sum(),
            LinearOperator::Blur(_) => 1.0,
            LinearOperator::Gradient(_) => 8.0,
            LinearOperator::Stack(parts) => parts
                .iter()
                .map(|(c, op)| c * c * op.norm_sq_upper_bound())
                .sum(),
        }
    }

    /// Materializes the operator column by column.
    pub fn to_dense(&self) -> Array2<f64> {
        let (m, n) = (self.output_dim(), self.input_dim());
        let mut dense = Array2::zeros((m, n));
        let mut e = Array1::zeros(n);
        let mut col = Array1::zeros(m);
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(e.view(), col.view_mut());
            dense.column_mut(j).assign(&col);
            e[j] = 0.0;
        }
        dense
    }
}

impl BoxBlur {
    fn window(&self) -> usize {
        2 * self.half_width + 1
    }

    fn forward(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let mut tmp = Array1::zeros(x.len());
        self.pass(x, tmp.view_mut(), Axis::Rows, false);
        self.pass(tmp.view(), out.view_mut(), Axis::Cols, false);
    }

    fn adjoint(&self, y: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let mut tmp = Array1::zeros(y.len());
        self.pass(y, tmp.view_mut(), Axis::Cols, true);
        self.pass(tmp.view(), out.view_mut(), Axis::Rows, true);
    }

    /// One separable 1-D averaging pass. `Rows` averages along `j` within
    /// each row, `Cols` along `i` within each column.
    fn pass(&self, src: ArrayView1<f64>, mut dst: ArrayViewMut1<f64>, axis: Axis, adjoint: bool) {
        let (h, w) = (self.height, self.width);
        let r = self.half_width as isize;
        let weight = 1.0 / self.window() as f64;
        dst.fill(0.0);
        let (lines, len) = match axis {
            Axis::Rows => (h, w),
            Axis::Cols => (w, h),
        };
        let index = |line: usize, pos: usize| match axis {
            Axis::Rows => line * w + pos,
            Axis::Cols => pos * w + line,
        };
        let last = len as isize - 1;
        for line in 0..lines {
            for pos in 0..len {
                let center = pos as isize;
                for d in -r..=r {
                    let q = (center + d).clamp(0, last) as usize;
                    if adjoint {
                        dst[index(line, q)] += weight * src[index(line, pos)];
                    } else {
                        dst[index(line, pos)] += weight * src[index(line, q)];
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Cols,
}

impl ForwardGradient {
    fn forward(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        for i in 0..h {
            for j in 0..w {
                let k = i * w + j;
                out[k] = if j + 1 < w { x[k + 1] - x[k] } else { 0.0 };
                out[n + k] = if i + 1 < h { x[k + w] - x[k] } else { 0.0 };
            }
        }
    }

    fn adjoint(&self, y: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        for i in 0..h {
            for j in 0..w {
                let k = i * w + j;
                let mut v = 0.0;
                if j >= 1 {
                    v += y[k - 1];
                }
                if j + 1 < w {
                    v -= y[k];
                }
                if i >= 1 {
                    v += y[n + k - w];
                }
                if i + 1 < h {
                    v -= y[n + k];
                }
                out[k] = v;
            }
        }
    }
}
