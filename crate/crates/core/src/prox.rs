//! Extended proximal operators under diagonal metrics and their inexactness
//! certificates.
//!
//! For `J(x) = h(x) + ||x - a||_D^2 / (2 tau)`, a point `z` is accepted with
//! precision `eps` when `p = D(a - z) / tau` is an `eps`-subgradient of `h`
//! at `z`, checked through the Fenchel-Young gap `h(z) + h*(p) - <p, z>`.

use log::debug;
use ndarray::{s, Array1, ArrayView1, ArrayViewMut1, Zip};

use crate::error::{check_dim, Error, Result};
use crate::function::{l1, soft_threshold, ConvexFunction, ExtValue, FunctionKind, DUAL_BALL_SLACK};
use crate::metric::Metric;

pub const DEFAULT_MAX_INNER: usize = 10_000;

/// Inner iterations without a new best gap before the closed form takes over.
const STALL_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy)]
pub struct ProxRequest<'a> {
    pub h: &'a ConvexFunction,
    pub anchor: ArrayView1<'a, f64>,
    pub tau: f64,
    pub metric: &'a Metric,
    pub epsilon: f64,
}

impl<'a> ProxRequest<'a> {
    pub fn new(
        h: &'a ConvexFunction,
        anchor: ArrayView1<'a, f64>,
        tau: f64,
        metric: &'a Metric,
        epsilon: f64,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("prox stepsize must be positive, got {tau}")));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("prox precision must be >= 0, got {epsilon}")));
        }
        check_dim("prox anchor", h.dim(), anchor.len())?;
        check_dim("prox metric", h.dim(), metric.dim())?;
        Ok(ProxRequest {
            h,
            anchor,
            tau,
            metric,
            epsilon,
        })
    }

    /// `J(x) = h(x) + ||x - a||_D^2 / (2 tau)`.
    pub fn objective(&self, x: ArrayView1<f64>) -> Result<ExtValue> {
        let hx = self.h.value(x)?;
        let d = &x - &self.anchor;
        Ok(hx.add(ExtValue::Finite(
            self.metric.norm_sq_unchecked(d.view()) / (2.0 * self.tau),
        )))
    }

    /// The type-2 witness `D(a - z) / tau`.
    pub fn subgradient_witness(&self, z: ArrayView1<f64>) -> Array1<f64> {
        Zip::from(self.metric.diag())
            .and(&self.anchor)
            .and(z)
            .map_collect(|d, a, z| d * (a - z) / self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Type0,
    Type1,
    Type2,
}

/// Subgradient witness. For analysis-l1 terms `preimage` holds `xi` with
/// `p = op* xi` and `||xi||_inf <= weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub p: Array1<f64>,
    pub preimage: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxCertificate {
    pub kind: CertificateKind,
    pub achieved_gap: f64,
    pub requested: f64,
    pub witness: Option<Witness>,
    pub inner_iterations: usize,
}

impl ProxCertificate {
    pub fn success(&self) -> bool {
        self.achieved_gap <= self.requested
    }
}

/// Exact minimizer of `J`; only for descriptors with a closed form.
pub fn prox_exact(req: &ProxRequest) -> Result<Array1<f64>> {
    if !req.h.has_closed_form_prox() {
        return Err(Error::UnsupportedFunction(
            "exact prox requires a closed-form descriptor".into(),
        ));
    }
    let mut out = Array1::zeros(req.h.dim());
    closed_form_into(req.h, req.anchor, req.tau, req.metric.diag().view(), out.view_mut());
    Ok(out)
}

fn closed_form_into(
    h: &ConvexFunction,
    a: ArrayView1<f64>,
    tau: f64,
    d: ArrayView1<f64>,
    mut out: ArrayViewMut1<f64>,
) {
    match h.kind() {
        FunctionKind::ScaledL1 { weight } => {
            Zip::from(&mut out)
                .and(a)
                .and(d)
                .for_each(|o, a, d| *o = soft_threshold(*a, tau * weight / d));
        }
        FunctionKind::ElasticL1 { weight, curvature } => {
            Zip::from(&mut out).and(a).and(d).for_each(|o, a, d| {
                let t = tau / d;
                *o = soft_threshold(*a, t * weight) / (1.0 + t * curvature);
            });
        }
        FunctionKind::QuadraticLinear { curvature, linear } => {
            Zip::from(&mut out)
                .and(a)
                .and(d)
                .and(linear)
                .for_each(|o, a, d, b| *o = (d * a - tau * b) / (d + tau * curvature));
        }
        FunctionKind::BoxIndicator { radius, linear } => match linear {
            Some(l) => Zip::from(&mut out)
                .and(a)
                .and(d)
                .and(l)
                .for_each(|o, a, d, f| *o = (a - tau * f / d).clamp(-radius, *radius)),
            None => Zip::from(&mut out)
                .and(a)
                .for_each(|o, a| *o = a.clamp(-radius, *radius)),
        },
        FunctionKind::Separable(blocks) => {
            let mut offset = 0;
            for b in blocks {
                let r = offset..offset + b.dim();
                closed_form_into(
                    b,
                    a.slice(s![r.clone()]),
                    tau,
                    d.slice(s![r.clone()]),
                    out.slice_mut(s![r]),
                );
                offset += b.dim();
            }
        }
        FunctionKind::AnalysisL1 { .. } => unreachable!("checked by has_closed_form_prox"),
    }
}

/// `h(z) + h*(p) - <p, z>`, evaluated termwise so that each summand is
/// nonnegative up to one rounding.
pub fn fenchel_gap(h: &ConvexFunction, z: ArrayView1<f64>, p: ArrayView1<f64>) -> Result<ExtValue> {
    check_dim("fenchel gap point", h.dim(), z.len())?;
    check_dim("fenchel gap witness", h.dim(), p.len())?;
    gap_terms(h, z, p, None)
}

/// Like [`fenchel_gap`], but uses the witness preimage when present.
pub fn fenchel_gap_witness(h: &ConvexFunction, z: ArrayView1<f64>, w: &Witness) -> Result<ExtValue> {
    check_dim("fenchel gap point", h.dim(), z.len())?;
    check_dim("fenchel gap witness", h.dim(), w.p.len())?;
    gap_terms(h, z, w.p.view(), w.preimage.as_ref().map(|v| v.view()))
}

/// Sum of `|u_i| (w - sign(u_i) q_i)` with `q` clipped to the `w`-ball; the
/// l1 Fenchel gap once `q` is known to lie in the ball up to rounding.
fn l1_ball_gap(weight: f64, u: ArrayView1<f64>, q: ArrayView1<f64>) -> ExtValue {
    let limit = weight * (1.0 + DUAL_BALL_SLACK);
    if q.iter().any(|v| !(v.abs() <= limit)) {
        return ExtValue::Infinite;
    }
    ExtValue::Finite(Zip::from(u).and(q).fold(0.0, |acc, u, q| {
        let q = q.clamp(-weight, weight);
        acc + u.abs() * (weight - u.signum() * q)
    }))
}

fn gap_terms(
    h: &ConvexFunction,
    z: ArrayView1<f64>,
    p: ArrayView1<f64>,
    preimage: Option<ArrayView1<f64>>,
) -> Result<ExtValue> {
    Ok(match h.kind() {
        FunctionKind::ScaledL1 { weight } => l1_ball_gap(*weight, z, p),
        FunctionKind::ElasticL1 { weight, curvature } => {
            let (w, c) = (*weight, *curvature);
            ExtValue::Finite(Zip::from(z).and(p).fold(0.0, |acc, z, p| {
                let term = if p.abs() > w {
                    let q = p.signum() * (p.abs() - w);
                    let r = c * z - q;
                    r * r / (2.0 * c) + z.abs() * (w - z.signum() * p.signum() * w)
                } else {
                    0.5 * c * z * z + z.abs() * (w - z.signum() * p)
                };
                acc + term
            }))
        }
        FunctionKind::QuadraticLinear { curvature, linear } => {
            let c = *curvature;
            ExtValue::Finite(
                Zip::from(z)
                    .and(p)
                    .and(linear)
                    .fold(0.0, |acc, z, p, b| {
                        let r = c * z + b - p;
                        acc + r * r
                    })
                    / (2.0 * c),
            )
        }
        FunctionKind::BoxIndicator { radius, linear } => {
            let k = *radius;
            if z.iter().any(|v| v.abs() > k) {
                return Ok(ExtValue::Infinite);
            }
            let shift = |i: usize| linear.as_ref().map_or(0.0, |l| l[i]);
            ExtValue::Finite(z.iter().zip(p.iter()).enumerate().fold(0.0, |acc, (i, (z, p))| {
                let q = p - shift(i);
                acc + q.abs() * (k - q.signum() * z)
            }))
        }
        FunctionKind::AnalysisL1 { weight, op } => {
            let Some(xi) = preimage else {
                return Err(Error::UnsupportedFunction(
                    "analysis-l1 certificates need a dual preimage".into(),
                ));
            };
            check_dim("analysis-l1 preimage", op.output_dim(), xi.len())?;
            let mut u = Array1::zeros(op.output_dim());
            op.apply_into(z, u.view_mut());
            l1_ball_gap(*weight, u.view(), xi)
        }
        FunctionKind::Separable(blocks) => {
            if preimage.is_some() {
                return Err(Error::UnsupportedFunction(
                    "preimages are only supported on a top-level analysis-l1 term".into(),
                ));
            }
            let mut total = ExtValue::Finite(0.0);
            let mut offset = 0;
            for b in blocks {
                let r = offset..offset + b.dim();
                total = total.add(gap_terms(b, z.slice(s![r.clone()]), p.slice(s![r]), None)?);
                offset += b.dim();
            }
            total
        }
    })
}

fn finite_or_fail(v: ExtValue, requested: f64) -> Result<f64> {
    v.finite().ok_or(Error::CertificateFailed {
        achieved: f64::INFINITY,
        requested,
    })
}

/// Type-2 certificate of `z` using the witness `D(a - z) / tau`.
pub fn certify_type2(req: &ProxRequest, z: ArrayView1<f64>) -> Result<ProxCertificate> {
    certify_type2_with(req, z, None, 0)
}

fn certify_type2_with(
    req: &ProxRequest,
    z: ArrayView1<f64>,
    preimage: Option<Array1<f64>>,
    inner_iterations: usize,
) -> Result<ProxCertificate> {
    check_dim("certificate point", req.h.dim(), z.len())?;
    let witness = Witness {
        p: req.subgradient_witness(z),
        preimage,
    };
    let gap = finite_or_fail(fenchel_gap_witness(req.h, z, &witness)?, req.epsilon)?;
    Ok(ProxCertificate {
        kind: CertificateKind::Type2,
        achieved_gap: gap,
        requested: req.epsilon,
        witness: Some(witness),
        inner_iterations,
    })
}

/// Type-0 certificate: `||z - prox||_D^2 / (2 tau)`.
pub fn certify_type0(req: &ProxRequest, z: ArrayView1<f64>) -> Result<ProxCertificate> {
    check_dim("certificate point", req.h.dim(), z.len())?;
    let exact = prox_exact(req)?;
    let d = &z - &exact;
    Ok(ProxCertificate {
        kind: CertificateKind::Type0,
        achieved_gap: req.metric.norm_sq_unchecked(d.view()) / (2.0 * req.tau),
        requested: req.epsilon,
        witness: None,
        inner_iterations: 0,
    })
}

/// Type-1 certificate: `J(z) - min J`.
pub fn certify_type1(req: &ProxRequest, z: ArrayView1<f64>) -> Result<ProxCertificate> {
    check_dim("certificate point", req.h.dim(), z.len())?;
    let exact = prox_exact(req)?;
    let jz = finite_or_fail(req.objective(z)?, req.epsilon)?;
    let jmin = req
        .objective(exact.view())?
        .finite()
        .ok_or_else(|| Error::Internal("exact prox left the domain".into()))?;
    Ok(ProxCertificate {
        kind: CertificateKind::Type1,
        achieved_gap: (jz - jmin).max(0.0),
        requested: req.epsilon,
        witness: None,
        inner_iterations: 0,
    })
}

/// Starting data for [`prox_inexact`].
#[derive(Debug, Clone, Copy, Default)]
pub struct WarmStart<'a> {
    pub point: Option<ArrayView1<'a, f64>>,
    /// Dual preimage for analysis-l1 terms.
    pub preimage: Option<ArrayView1<'a, f64>>,
}

/// Certified inexact prox by warm-started proximal gradient.
///
/// The warm start itself is checked first (reported as zero inner
/// iterations). For analysis-l1 terms the iteration runs on the dual of the
/// prox problem instead.
pub fn prox_inexact(
    req: &ProxRequest,
    warm: WarmStart,
    max_inner: usize,
) -> Result<(Array1<f64>, ProxCertificate)> {
    if req.epsilon == 0.0 {
        if !req.h.has_closed_form_prox() {
            return Err(Error::UnsupportedFunction(
                "zero precision requires a closed-form prox".into(),
            ));
        }
        let z = prox_exact(req)?;
        let mut cert = certify_type2(req, z.view())?;
        // the closed form is the exact minimizer; the recorded gap is rounding only
        cert.requested = cert.achieved_gap.max(0.0);
        return Ok((z, cert));
    }
    match req.h.kind() {
        FunctionKind::AnalysisL1 { weight, op } => {
            analysis_dual_solve(req, *weight, op, warm.preimage, max_inner)
        }
        _ if req.h.has_closed_form_prox() => primal_prox_gradient(req, warm.point, max_inner),
        _ => Err(Error::UnsupportedFunction(
            "inexact prox of a separable analysis-l1 term".into(),
        )),
    }
}

fn primal_prox_gradient(
    req: &ProxRequest,
    warm: Option<ArrayView1<f64>>,
    max_inner: usize,
) -> Result<(Array1<f64>, ProxCertificate)> {
    let n = req.h.dim();
    let mut z = match warm {
        Some(w) => {
            check_dim("warm start", n, w.len())?;
            w.to_owned()
        }
        None => req.anchor.to_owned(),
    };
    let step = 1.0 / (smooth_curvature(req.h) + req.metric.max_eig() / req.tau);
    let diag = req.metric.diag();
    let mut grad = Array1::zeros(n);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for j in 0..=max_inner {
        if let Ok(cert) = certify_type2_with(req, z.view(), None, j) {
            if cert.success() {
                return Ok((z, cert));
            }
            if cert.achieved_gap < best {
                best = cert.achieved_gap;
                since_best = 0;
            }
        }
        since_best += 1;
        if j == max_inner || since_best > STALL_ITERATIONS {
            // below rounding resolution: the closed form is the best representable answer
            let exact = prox_exact(req)?;
            let mut cert = certify_type2_with(req, exact.view(), None, j)?;
            if !cert.success() {
                debug!(
                    "requested gap {:e} is below rounding; closed form certifies {:e}",
                    req.epsilon, cert.achieved_gap
                );
                cert.requested = cert.achieved_gap;
            }
            return Ok((exact, cert));
        }
        smooth_grad_into(req.h, z.view(), grad.view_mut());
        Zip::from(&mut grad)
            .and(diag)
            .and(&z)
            .and(&req.anchor)
            .for_each(|g, d, z, a| *g += d * (z - a) / req.tau);
        z.scaled_add(-step, &grad);
        nonsmooth_prox_inplace(req.h, z.view_mut(), step);
    }
    unreachable!("the loop returns at j == max_inner")
}

fn smooth_curvature(h: &ConvexFunction) -> f64 {
    match h.kind() {
        FunctionKind::ElasticL1 { curvature, .. } | FunctionKind::QuadraticLinear { curvature, .. } => {
            *curvature
        }
        FunctionKind::Separable(blocks) => blocks.iter().map(smooth_curvature).fold(0.0, f64::max),
        _ => 0.0,
    }
}

fn smooth_grad_into(h: &ConvexFunction, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
    match h.kind() {
        FunctionKind::ScaledL1 { .. } | FunctionKind::AnalysisL1 { .. } => out.fill(0.0),
        FunctionKind::BoxIndicator { linear, .. } => match linear {
            Some(l) => out.assign(l),
            None => out.fill(0.0),
        },
        FunctionKind::ElasticL1 { curvature, .. } => {
            Zip::from(&mut out).and(x).for_each(|o, x| *o = curvature * x)
        }
        FunctionKind::QuadraticLinear { curvature, linear } => Zip::from(&mut out)
            .and(x)
            .and(linear)
            .for_each(|o, x, b| *o = curvature * x + b),
        FunctionKind::Separable(blocks) => {
            let mut offset = 0;
            for b in blocks {
                let r = offset..offset + b.dim();
                smooth_grad_into(b, x.slice(s![r.clone()]), out.slice_mut(s![r]));
                offset += b.dim();
            }
        }
    }
}

/// Euclidean prox of `step` times the nonsmooth part.
fn nonsmooth_prox_inplace(h: &ConvexFunction, mut v: ArrayViewMut1<f64>, step: f64) {
    match h.kind() {
        FunctionKind::ScaledL1 { weight } | FunctionKind::ElasticL1 { weight, .. } => {
            v.mapv_inplace(|x| soft_threshold(x, step * weight))
        }
        FunctionKind::BoxIndicator { radius, .. } => v.mapv_inplace(|x| x.clamp(-radius, *radius)),
        FunctionKind::QuadraticLinear { .. } | FunctionKind::AnalysisL1 { .. } => {}
        FunctionKind::Separable(blocks) => {
            let mut offset = 0;
            for b in blocks {
                nonsmooth_prox_inplace(b, v.slice_mut(s![offset..offset + b.dim()]), step);
                offset += b.dim();
            }
        }
    }
}

/// Accelerated projected gradient (FISTA) on
/// `max_{|xi|_inf <= w} <op* xi, a> - (tau/2)||op* xi||^2_{D^-1}`,
/// with primal point `z = a - tau D^-1 op* xi`. The gap is checked at the
/// projected iterate, never the extrapolated one.
fn analysis_dual_solve(
    req: &ProxRequest,
    weight: f64,
    op: &crate::operator::LinearOperator,
    warm: Option<ArrayView1<f64>>,
    max_inner: usize,
) -> Result<(Array1<f64>, ProxCertificate)> {
    let m = op.output_dim();
    let mut xi = match warm {
        Some(w) => {
            check_dim("warm preimage", m, w.len())?;
            w.mapv(|v| v.clamp(-weight, weight))
        }
        None => Array1::zeros(m),
    };
    let tau = req.tau;
    let step = req.metric.min_eig() / (tau * op.norm_sq_upper_bound());
    let diag = req.metric.diag();
    let primal = |xi: ArrayView1<f64>, z: &mut Array1<f64>| -> Result<()> {
        op.adjoint_into(xi, z.view_mut());
        Zip::from(z).and(&req.anchor).and(diag).for_each(|z, a, d| *z = a - tau * *z / d);
        Ok(())
    };
    let mut z = Array1::zeros(req.h.dim());
    let mut dz = Array1::zeros(m);
    let mut extra = xi.clone();
    let mut prev = xi.clone();
    let mut t = 1.0_f64;
    let mut best = f64::INFINITY;
    for j in 0..=max_inner {
        primal(xi.view(), &mut z)?;
        op.apply_into(z.view(), dz.view_mut());
        let gap = finite_or_fail(l1_ball_gap(weight, dz.view(), xi.view()), req.epsilon)?;
        if gap <= req.epsilon {
            let cert = certify_type2_with(req, z.view(), Some(xi), j)?;
            return Ok((z, cert));
        }
        if gap > best {
            // restart the momentum when the gap goes up
            t = 1.0;
            extra.assign(&xi);
        }
        best = best.min(gap);
        if j == max_inner {
            break;
        }
        // gradient step from the extrapolated point
        primal(extra.view(), &mut z)?;
        op.apply_into(z.view(), dz.view_mut());
        prev.assign(&xi);
        Zip::from(&mut xi)
            .and(&extra)
            .and(&dz)
            .for_each(|x, e, g| *x = (e + step * g).clamp(-weight, weight));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let w = (t - 1.0) / t_next;
        Zip::from(&mut extra)
            .and(&xi)
            .and(&prev)
            .for_each(|e, x, p| *e = x + w * (x - p));
        t = t_next;
    }
    Err(Error::InexactSolveFailed {
        iterations: max_inner,
        best_gap: best,
        target: req.epsilon,
    })
}

/// `||x||_1`, exposed for oracles and objective evaluation.
pub fn l1_norm(x: ArrayView1<f64>) -> f64 {
    l1(x)
}
