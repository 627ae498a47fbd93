//! Gauss parametrization of rank-two hypersurfaces.
//!
//! Given a surface `g: L^2 -> S^n` with an orthonormal frame `xi_c` of its
//! normal bundle `Lambda` inside the sphere, and a support function `gamma`,
//!
//! ```text
//! Psi(x, w) = gamma(x) h(x) + h_* grad gamma(x) + sum_c w_c xi_c(x)
//! ```
//!
//! parametrizes a rank-two hypersurface of `R^(n+1)` with Gauss map `g`.
//! Conversely a rank-two hypersurface yields `g = N` and `gamma = <f, N>`
//! on a slice transversal to its relative nullity.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{AffineImage, Chart, ChartRef, CoordBox, CylinderChart, FnChart, Jet2};
use crate::error::{Error, Result};
use crate::geometry::{
    default_step, generalized_cross, laplace_beltrami, point_frame, rank_and_nullity, ScalarField, RANK_TOL,
};
use crate::par::{map_points, try_map_points};
use crate::report::ResidualReport;
use crate::surfaces;

/// `Psi` is regular when `sigma_min > REGULAR_RATIO * sigma_max`.
pub const REGULAR_RATIO: f64 = 1e-8;
pub const GAUSS_IDENTITY_TOL: f64 = 1e-8;
/// Tolerance for the unit-norm and frame checks on a [`SphereSurface`].
pub const FRAME_TOL: f64 = 1e-10;
/// Greedy clustering tolerance on normals.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Allowed variation of `N` along the relative nullity, relative to `|A|`.
pub const NULLITY_CONSTANCY_TOL: f64 = 1e-7;
pub const ROUND_TRIP_TOL: f64 = 1e-6;

/// Orthonormal frame of `Lambda` at a point, with its first partials:
/// `derivs[c][i] = d_i xi_c`.
#[derive(Debug, Clone)]
pub struct FrameJet {
    pub vectors: Vec<DVector<f64>>,
    pub derivs: Vec<Vec<DVector<f64>>>,
}

type FrameFn = dyn Fn(&[f64]) -> Result<FrameJet> + Send + Sync;

/// A surface in the unit sphere together with a frame of its normal bundle there.
#[derive(Clone)]
pub struct SphereSurface {
    chart: ChartRef,
    frame: Arc<FrameFn>,
}

impl std::fmt::Debug for SphereSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SphereSurface(ambient={})", self.chart.ambient_dim())
    }
}

impl SphereSurface {
    pub fn new(chart: ChartRef, frame: impl Fn(&[f64]) -> Result<FrameJet> + Send + Sync + 'static) -> Result<Self> {
        if chart.dim() != 2 {
            return Err(Error::Dimension { expected: 2, found: chart.dim() });
        }
        Ok(Self { chart, frame: Arc::new(frame) })
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    /// `n + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.chart.ambient_dim()
    }

    /// Rank of `Lambda`, `n - 2`.
    pub fn fiber_dim(&self) -> usize {
        self.ambient_dim() - 3
    }

    pub fn frame(&self, x: &[f64]) -> Result<FrameJet> {
        (self.frame)(x)
    }

    /// Checks `|g| = 1` and that the frame is orthonormal and orthogonal to `g` and `g_*`.
    pub fn validate_at(&self, x: &[f64]) -> Result<(Jet2, FrameJet)> {
        let jet = self.chart.jet(x)?;
        let fr = self.frame(x)?;
        let unit = (jet.value.norm() - 1.0).abs();
        if unit > FRAME_TOL {
            return Err(Error::Validation(format!("|g| - 1 = {unit:e} at {x:?}")));
        }
        if fr.vectors.len() != self.fiber_dim() || fr.derivs.len() != fr.vectors.len() {
            return Err(Error::Validation(format!(
                "frame has {} vectors, Lambda has rank {}",
                fr.vectors.len(),
                self.fiber_dim()
            )));
        }
        for (a, xa) in fr.vectors.iter().enumerate() {
            for (b, xb) in fr.vectors.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                if (xa.dot(xb) - target).abs() > FRAME_TOL {
                    return Err(Error::Validation(format!("frame not orthonormal at {x:?}")));
                }
            }
            let mut worst = (xa.dot(&jet.value)).abs();
            for t in &jet.d1 {
                worst = worst.max(xa.dot(t).abs() / t.norm());
            }
            if worst > FRAME_TOL {
                return Err(Error::Validation(format!("frame vector {a} not normal to g at {x:?}: {worst:e}")));
            }
        }
        Ok((jet, fr))
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type HessFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A scalar field on `L^2`, with optional analytic derivatives.
///
/// Missing derivatives come from central differences. Without a gradient the
/// Hessian nests two difference quotients and uses a step of at least
/// `eps^(1/4)`.
#[derive(Clone)]
pub struct SupportFunction {
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    hessian: Option<Arc<HessFn>>,
}

impl std::fmt::Debug for SupportFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SupportFunction(gradient={}, hessian={})", self.gradient.is_some(), self.hessian.is_some())
    }
}

impl SupportFunction {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(value), gradient: None, hessian: None }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn scaled(&self, a: f64) -> Self {
        let v = self.value.clone();
        let mut out = Self::new(move |x| a * v(x));
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |x| g(x).into_iter().map(|c| a * c).collect());
        }
        if let Some(h) = self.hessian.clone() {
            out = out.with_hessian(move |x| h(x) * a);
        }
        out
    }

    fn fd_gradient(&self, p: &[f64], h: f64) -> Vec<f64> {
        (0..p.len())
            .map(|l| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[l] += h;
                b[l] -= h;
                ((self.value)(&a) - (self.value)(&b)) / (2.0 * h)
            })
            .collect()
    }
}

impl ScalarField for SupportFunction {
    fn value(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    fn gradient(&self, p: &[f64], h: f64) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(p),
            None => self.fd_gradient(p, h),
        }
    }

    fn hessian(&self, p: &[f64], h: f64) -> DMatrix<f64> {
        if let Some(hess) = &self.hessian {
            return hess(p);
        }
        let step = if self.gradient.is_some() { h } else { h.max(f64::EPSILON.powf(0.25)) };
        let d = p.len();
        let mut out = DMatrix::zeros(d, d);
        for l in 0..d {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[l] += step;
            b[l] -= step;
            let (ga, gb) = (self.gradient(&a, step), self.gradient(&b, step));
            for i in 0..d {
                out[(i, l)] = (ga[i] - gb[i]) / (2.0 * step);
            }
        }
        (&out + out.transpose()) * 0.5
    }
}

/// Value and first partials of `Psi` at `(x, w)`, with the data needed for
/// its shape operator relative to `N = g(x)`.
#[derive(Debug, Clone)]
pub struct PsiJet {
    pub coords: Vec<f64>,
    pub value: DVector<f64>,
    /// Partials in `x_1, x_2, w_1, ..`; the `w`-partials are the frame vectors.
    pub d1: Vec<DVector<f64>>,
    /// `g(x)`.
    pub gauss: DVector<f64>,
    /// Partials of `g` in `x_1, x_2`.
    pub gauss_d1: Vec<DVector<f64>>,
    pub sigma_ratio: f64,
    pub regular: bool,
}

impl PsiJet {
    /// Unit normal of `Psi` from the generalized cross product of its partials.
    pub fn normal(&self) -> DVector<f64> {
        let c = generalized_cross(&self.d1);
        &c / c.norm()
    }

    /// Shape operator of `Psi` with respect to `N = g`, from the Weingarten
    /// relation `H_ab = -<Psi_a, d_b N>`; `N` is constant along the fibers.
    pub fn shape_operator(&self) -> Result<DMatrix<f64>> {
        let d = self.d1.len();
        let jac = DMatrix::from_columns(&self.d1);
        let g = jac.transpose() * jac;
        let g_inv = g.try_inverse().ok_or_else(|| Error::NonImmersion {
            coords: self.coords.clone(),
            sigma_min: 0.0,
        })?;
        let dn = |b: usize| if b < 2 { Some(&self.gauss_d1[b]) } else { None };
        let mut h = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                if let Some(nb) = dn(b) {
                    h[(a, b)] = -self.d1[a].dot(nb);
                }
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        Ok(g_inv * h)
    }
}

/// Evaluates `Psi(x, w)` and its first partials.
pub fn gauss_param(g: &SphereSurface, gamma: &SupportFunction, x: &[f64], w: &[f64], h: f64) -> Result<PsiJet> {
    if x.len() != 2 {
        return Err(Error::Dimension { expected: 2, found: x.len() });
    }
    if w.len() != g.fiber_dim() {
        return Err(Error::Dimension { expected: g.fiber_dim(), found: w.len() });
    }
    let (jet, frame) = g.validate_at(x)?;
    let m = g.ambient_dim();
    let gm = DMatrix::from_fn(2, 2, |a, b| jet.d1[a].dot(&jet.d1[b]));
    let gi = gm.clone().try_inverse().ok_or_else(|| Error::NonImmersion { coords: x.to_vec(), sigma_min: 0.0 })?;
    let val = gamma.value(x);
    let grad = gamma.gradient(x, h);
    let hess = gamma.hessian(x, h);

    // h_* grad gamma = G^{ab} gamma_b g_a
    let up: Vec<f64> = (0..2).map(|a| (0..2).map(|b| gi[(a, b)] * grad[b]).sum()).collect();
    let mut value = &jet.value * val;
    for a in 0..2 {
        value += &jet.d1[a] * up[a];
    }
    for (c, xi) in frame.vectors.iter().enumerate() {
        value += xi * w[c];
    }

    let mut d1 = Vec::with_capacity(2 + w.len());
    for i in 0..2 {
        let dg = DMatrix::from_fn(2, 2, |a, b| jet.second(a, i).dot(&jet.d1[b]) + jet.d1[a].dot(jet.second(b, i)));
        let dgi = -(&gi * dg * &gi);
        let mut v = &jet.value * grad[i] + &jet.d1[i] * val;
        for a in 0..2 {
            let mut coef = 0.0;
            for b in 0..2 {
                coef += dgi[(a, b)] * grad[b] + gi[(a, b)] * hess[(b, i)];
            }
            v += &jet.d1[a] * coef + jet.second(a, i) * up[a];
        }
        for (c, dxi) in frame.derivs.iter().enumerate() {
            v += &dxi[i] * w[c];
        }
        d1.push(v);
    }
    d1.extend(frame.vectors.iter().cloned());

    let jac = DMatrix::from_columns(&d1);
    let sv = jac.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let sigma_ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    debug_assert_eq!(value.len(), m);
    let mut coords = x.to_vec();
    coords.extend_from_slice(w);
    Ok(PsiJet {
        coords,
        value,
        d1,
        gauss: jet.value.clone(),
        gauss_d1: jet.d1.clone(),
        sigma_ratio,
        regular: sigma_ratio > REGULAR_RATIO,
    })
}

fn split(g: &SphereSurface, s: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = 2 + g.fiber_dim();
    if s.len() != n {
        return Err(Error::Dimension { expected: n, found: s.len() });
    }
    Ok((s[..2].to_vec(), s[2..].to_vec()))
}

/// Angle between the lines spanned by `u` and `v` (unit vectors).
fn line_angle(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let perp = u - v * v.dot(u);
    perp.norm().min(1.0).asin()
}

/// Angle between the normal of `Psi` and `g(x)` at each regular sample
/// `(x_1, x_2, w_1, ..)`; non-regular samples are skipped and counted.
pub fn gauss_map_identity_residual(
    g: &SphereSurface,
    gamma: &SupportFunction,
    samples: &[Vec<f64>],
    h: f64,
) -> Result<ResidualReport> {
    let res = try_map_points(samples, |s| -> Result<Option<f64>> {
        let (x, w) = split(g, s)?;
        let psi = gauss_param(g, gamma, &x, &w, h)?;
        Ok(psi.regular.then(|| line_angle(&psi.gauss, &psi.normal())))
    })?;
    let vals: Vec<f64> = res.iter().flatten().copied().collect();
    let skipped = res.len() - vals.len();
    Ok(ResidualReport::new("gauss_map_identity", &vals, GAUSS_IDENTITY_TOL).with_skipped(skipped).require_points())
}

/// Negative control: the same angle measured against a unit tangent of `g`.
pub fn gauss_map_control_residual(
    g: &SphereSurface,
    gamma: &SupportFunction,
    samples: &[Vec<f64>],
    h: f64,
) -> Result<ResidualReport> {
    let res = try_map_points(samples, |s| -> Result<Option<f64>> {
        let (x, w) = split(g, s)?;
        let psi = gauss_param(g, gamma, &x, &w, h)?;
        let t = &psi.gauss_d1[0] / psi.gauss_d1[0].norm();
        Ok(psi.regular.then(|| line_angle(&t, &psi.normal())))
    })?;
    let vals: Vec<f64> = res.iter().flatten().copied().collect();
    let skipped = res.len() - vals.len();
    Ok(ResidualReport::control("control/gauss_map_tangent", &vals, 1e-2).with_skipped(skipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimalityVerdict {
    /// Both quantities below tolerance at every sample.
    Minimal,
    /// Both quantities above ten times the tolerance at every sample.
    NonMinimal,
    /// Some sample has one small and one large quantity, or sits in between.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct MinimalityOutcome {
    /// `|Delta gamma + 2 gamma|` per regular sample, relative to
    /// `|Delta gamma| + 2 |gamma| + |grad gamma| + |Hess gamma|`.
    pub laplacian: Vec<f64>,
    /// `|trace A| / |A|` of `Psi` per regular sample.
    pub trace: Vec<f64>,
    pub skipped: usize,
    pub tolerance: f64,
    pub verdict: MinimalityVerdict,
}

impl MinimalityOutcome {
    /// Report on the joint residual `max(laplacian, trace)`. With
    /// `expect_minimal = false` the report is a negative control.
    pub fn report(&self, identity: &str, expect_minimal: bool) -> ResidualReport {
        let joint: Vec<f64> = self.laplacian.iter().zip(&self.trace).map(|(a, b)| a.max(*b)).collect();
        let mut r = if expect_minimal {
            ResidualReport::new(identity, &joint, self.tolerance)
        } else {
            let low: Vec<f64> = self.laplacian.iter().zip(&self.trace).map(|(a, b)| a.min(*b)).collect();
            let mut r = ResidualReport::control(identity, &joint, 10.0 * self.tolerance);
            r.pass = !low.is_empty() && low.iter().all(|v| *v > 10.0 * self.tolerance);
            r
        };
        r = r.with_skipped(self.skipped).require_points();
        if self.verdict == MinimalityVerdict::Mixed {
            r.pass = false;
        }
        r
    }
}

/// `|grad gamma| + |Hess gamma|` in the metric of `g`.
fn support_scale(g: &SphereSurface, gamma: &SupportFunction, x: &[f64], h: f64) -> Result<f64> {
    let jet = g.chart().jet(x)?;
    let gm = DMatrix::from_fn(2, 2, |a, b| jet.d1[a].dot(&jet.d1[b]));
    let gi = gm.try_inverse().ok_or_else(|| Error::NonImmersion { coords: x.to_vec(), sigma_min: 0.0 })?;
    let grad = DVector::from_vec(gamma.gradient(x, h));
    let hess = gamma.hessian(x, h);
    let raised = &gi * hess;
    Ok(grad.dot(&(&gi * &grad)).max(0.0).sqrt() + (&raised * &raised).trace().abs().sqrt())
}

/// Evaluates `(|Delta gamma + 2 gamma|, |trace A|)` on regular samples.
pub fn minimality_criterion(
    g: &SphereSurface,
    gamma: &SupportFunction,
    samples: &[Vec<f64>],
    h: f64,
    tol: f64,
) -> Result<MinimalityOutcome> {
    let res = try_map_points(samples, |s| -> Result<Option<(f64, f64)>> {
        let (x, w) = split(g, s)?;
        let psi = gauss_param(g, gamma, &x, &w, h)?;
        if !psi.regular {
            return Ok(None);
        }
        let lap = laplace_beltrami(g.chart().as_ref(), gamma, &x, h)?;
        let val = gamma.value(&x);
        let scale = support_scale(g, gamma, &x, h)? + lap.abs() + 2.0 * val.abs();
        let crit = if scale == 0.0 { 0.0 } else { (lap + 2.0 * val).abs() / scale };
        let a = psi.shape_operator()?;
        let sv = a.singular_values().max();
        let tr = if sv == 0.0 { 0.0 } else { a.trace().abs() / sv };
        Ok(Some((crit, tr)))
    })?;
    let pairs: Vec<(f64, f64)> = res.iter().flatten().copied().collect();
    let skipped = res.len() - pairs.len();
    let small = |v: f64| v < tol;
    let large = |v: f64| v > 10.0 * tol;
    let verdict = if !pairs.is_empty() && pairs.iter().all(|(a, b)| small(*a) && small(*b)) {
        MinimalityVerdict::Minimal
    } else if !pairs.is_empty() && pairs.iter().all(|(a, b)| large(*a) && large(*b)) {
        MinimalityVerdict::NonMinimal
    } else {
        MinimalityVerdict::Mixed
    };
    Ok(MinimalityOutcome {
        laplacian: pairs.iter().map(|p| p.0).collect(),
        trace: pairs.iter().map(|p| p.1).collect(),
        skipped,
        tolerance: tol,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Extraction from a rank-two hypersurface

/// Samples whose normals agree within [`CLUSTER_TOL`].
#[derive(Debug, Clone)]
pub struct Leaf {
    pub normal: DVector<f64>,
    pub gamma: f64,
    pub members: Vec<usize>,
    /// Largest spread of `gamma` within the leaf.
    pub gamma_spread: f64,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub normals: Vec<DVector<f64>>,
    pub gammas: Vec<f64>,
    pub leaves: Vec<Leaf>,
    /// Largest `|dN(v)| / |A|` along the nullity, by central differences.
    pub nullity_constancy: f64,
}

/// Reads off `g = N` and `gamma = <f, N>` at the samples and groups them by leaf.
pub fn extract_from_hypersurface(f: &dyn Chart, samples: &[Vec<f64>], h: f64) -> Result<Extraction> {
    let per_point = try_map_points(samples, |p| -> Result<(DVector<f64>, f64, f64)> {
        let jet = f.jet(p)?;
        let frame = point_frame(&jet)?;
        let rank = rank_and_nullity(&frame, RANK_TOL);
        if rank.rank != 2 || f.dim() == 2 {
            return Err(Error::Precondition(format!(
                "rank {} of {} at {p:?}; the Gauss parametrization needs rank 2 with nonzero nullity",
                rank.rank,
                f.dim()
            )));
        }
        let na = frame.operator_norm(&frame.a);
        let mut worst: f64 = 0.0;
        for v in &rank.nullity_basis {
            let shift = |s: f64| -> Vec<f64> { p.iter().zip(v.iter()).map(|(a, b)| a + s * h * b).collect() };
            let (qp, qm) = (shift(1.0), shift(-1.0));
            if !f.domain().contains(&qp) || !f.domain().contains(&qm) {
                return Err(Error::StencilOutOfDomain(qp));
            }
            let np = point_frame(&f.jet(&qp)?)?.normal;
            let nm = point_frame(&f.jet(&qm)?)?.normal;
            worst = worst.max((np - nm).norm() / (2.0 * h) / na);
        }
        if worst > NULLITY_CONSTANCY_TOL {
            return Err(Error::RankTwoStructure(format!(
                "normal varies along the relative nullity at {p:?}: {worst:e}"
            )));
        }
        let gamma = jet.value.dot(&frame.normal);
        Ok((frame.normal, gamma, worst))
    })?;
    let mut leaves: Vec<Leaf> = Vec::new();
    for (k, (n, gamma, _)) in per_point.iter().enumerate() {
        match leaves.iter_mut().find(|l| (&l.normal - n).norm() < CLUSTER_TOL) {
            Some(l) => {
                l.gamma_spread = l.gamma_spread.max((l.gamma - gamma).abs());
                l.members.push(k);
            }
            None => leaves.push(Leaf { normal: n.clone(), gamma: *gamma, members: vec![k], gamma_spread: 0.0 }),
        }
    }
    Ok(Extraction {
        normals: per_point.iter().map(|x| x.0.clone()).collect(),
        gammas: per_point.iter().map(|x| x.1).collect(),
        nullity_constancy: per_point.iter().map(|x| x.2).fold(0.0, f64::max),
        leaves,
    })
}

/// Gauss data `(g, gamma)` on a two-dimensional coordinate slice of a rank-two chart.
#[derive(Debug, Clone)]
pub struct QuotientSlice {
    pub sphere: SphereSurface,
    pub gamma: SupportFunction,
    pub axes: [usize; 2],
    pub base: Vec<f64>,
}

impl QuotientSlice {
    /// Chart coordinates of a slice point.
    pub fn lift(&self, s: &[f64]) -> Vec<f64> {
        lift(&self.base, self.axes, s)
    }
}

fn lift(base: &[f64], axes: [usize; 2], s: &[f64]) -> Vec<f64> {
    let mut p = base.to_vec();
    p[axes[0]] = s[0];
    p[axes[1]] = s[1];
    p
}

/// `N` and its exact first partials `dN(e_a) = -f_*(A e_a)` along the slice axes.
fn normal_1jet(f: &dyn Chart, p: &[f64], axes: [usize; 2]) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let frame = point_frame(&f.jet(p)?)?;
    let d1 = axes.iter().map(|&a| -frame.push_forward(&frame.a.column(a).into_owned())).collect();
    Ok((frame.normal, d1))
}

/// Orthonormal frame of `Lambda` obtained by projecting the fixed vectors
/// `anchors` onto the complement of `span(g, g_*)` and applying Gram-Schmidt.
fn projected_frame(g: &DVector<f64>, gd1: &[DVector<f64>], anchors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut basis = vec![g.clone()];
    let mut out = Vec::with_capacity(anchors.len());
    for t in gd1 {
        let mut v = t.clone();
        for b in &basis {
            v -= b * b.dot(&v);
        }
        basis.push(&v / v.norm());
    }
    for c in anchors {
        let mut v = c.clone();
        for b in basis.iter().chain(&out) {
            v -= b * b.dot(&v);
        }
        let n = v.norm();
        if n < 1e-6 * c.norm() {
            return Err(Error::Validation("anchor vectors degenerate on Lambda".into()));
        }
        out.push(v / n);
    }
    Ok(out)
}

/// Builds `(g, gamma)` on the slice of `f` through `base` spanned by `axes`.
///
/// The slice must be transversal to the relative nullity. First partials of
/// `g` and of `gamma` are exact (Weingarten); second partials of both and the
/// frame derivatives use central differences with step `h`.
pub fn quotient_slice(f: ChartRef, axes: [usize; 2], base: Vec<f64>, h: f64) -> Result<QuotientSlice> {
    let d = f.dim();
    if axes[0] >= d || axes[1] >= d || axes[0] == axes[1] {
        return Err(Error::Validation(format!("bad slice axes {axes:?} for a {d}-dimensional chart")));
    }
    if base.len() != d {
        return Err(Error::Dimension { expected: d, found: base.len() });
    }
    let frame0 = point_frame(&f.jet(&base)?)?;
    let rank = rank_and_nullity(&frame0, RANK_TOL);
    if rank.rank != 2 || d == 2 {
        return Err(Error::Precondition(format!("rank {} of {d} at the slice base; needs rank 2 with nonzero nullity", rank.rank)));
    }
    let (n0, nd0) = normal_1jet(f.as_ref(), &base, axes)?;
    let sv = DMatrix::from_columns(&nd0).singular_values();
    if !(sv.min() > 1e-6 * sv.max()) {
        return Err(Error::RankTwoStructure("slice axes are not transversal to the relative nullity".into()));
    }
    let anchors: Vec<DVector<f64>> = rank.nullity_basis.iter().map(|v| frame0.push_forward(v)).collect();
    let _ = n0;

    let lo = vec![f.domain().lo[axes[0]], f.domain().lo[axes[1]]];
    let hi = vec![f.domain().hi[axes[0]], f.domain().hi[axes[1]]];
    let domain = CoordBox::new(lo, hi);

    let g_chart = {
        let f = f.clone();
        let base = base.clone();
        Arc::new(FnChart::new(2, f.ambient_dim(), domain, move |s| {
            let eval = |q: &[f64]| normal_1jet(f.as_ref(), &lift(&base, axes, q), axes);
            let (value, d1) = eval(s).unwrap_or_else(|_| (DVector::from_element(f.ambient_dim(), f64::NAN), vec![]));
            let m = value.len();
            if d1.is_empty() {
                let nan = DVector::from_element(m, f64::NAN);
                return Jet2::new(s.to_vec(), value, vec![nan.clone(); 2], vec![nan; 4]);
            }
            let mut d2 = vec![DVector::zeros(m); 4];
            let mut cols: Vec<Vec<DVector<f64>>> = Vec::with_capacity(2);
            for b in 0..2 {
                let mut sp = s.to_vec();
                let mut sm = s.to_vec();
                sp[b] += h;
                sm[b] -= h;
                let nan = || (DVector::from_element(m, f64::NAN), vec![DVector::from_element(m, f64::NAN); 2]);
                let (_, dp) = eval(&sp).unwrap_or_else(|_| nan());
                let (_, dm) = eval(&sm).unwrap_or_else(|_| nan());
                cols.push((0..2).map(|a| (&dp[a] - &dm[a]) / (2.0 * h)).collect());
            }
            for a in 0..2 {
                for b in 0..2 {
                    d2[a * 2 + b] = (&cols[b][a] + &cols[a][b]) * 0.5;
                }
            }
            Jet2::new(s.to_vec(), value, d1, d2)
        })) as ChartRef
    };

    let frame_fn = {
        let g_chart = g_chart.clone();
        let anchors = anchors.clone();
        move |s: &[f64]| -> Result<FrameJet> {
            let at = |q: &[f64]| -> Result<Vec<DVector<f64>>> {
                let (value, d1) = normal_1jet_of(&g_chart, q)?;
                projected_frame(&value, &d1, &anchors)
            };
            let vectors = at(s)?;
            let mut derivs = vec![Vec::with_capacity(2); vectors.len()];
            for i in 0..2 {
                let mut sp = s.to_vec();
                let mut sm = s.to_vec();
                sp[i] += h;
                sm[i] -= h;
                let (vp, vm) = (at(&sp)?, at(&sm)?);
                for c in 0..vectors.len() {
                    derivs[c].push((&vp[c] - &vm[c]) / (2.0 * h));
                }
            }
            Ok(FrameJet { vectors, derivs })
        }
    };
    let sphere = SphereSurface::new(g_chart, frame_fn)?;

    let gamma = {
        let fv = f.clone();
        let fg = f.clone();
        let (bv, bg) = (base.clone(), base.clone());
        SupportFunction::new(move |s| {
            let p = lift(&bv, axes, s);
            match (fv.value(&p), normal_1jet(fv.as_ref(), &p, axes)) {
                (Ok(x), Ok((n, _))) => x.dot(&n),
                _ => f64::NAN,
            }
        })
        .with_gradient(move |s| {
            // d_a <f, N> = <f, d_a N> since f_a is tangent.
            let p = lift(&bg, axes, s);
            match (fg.value(&p), normal_1jet(fg.as_ref(), &p, axes)) {
                (Ok(x), Ok((_, nd))) => nd.iter().map(|v| x.dot(v)).collect(),
                _ => vec![f64::NAN; 2],
            }
        })
    };
    Ok(QuotientSlice { sphere, gamma, axes, base })
}

fn normal_1jet_of(g: &ChartRef, s: &[f64]) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let jet = g.jet(s)?;
    if jet.value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("slice point {s:?} not evaluable")));
    }
    Ok((jet.value, jet.d1))
}

/// Round trip: for each chart sample `p`, locate its slice point, rebuild
/// `Psi(x, w')` with `w'` the `Lambda`-coordinates of `f(p) - Psi(x, 0)`, and
/// return `|Psi(x, w') - f(p)| / |f_*|` together with the normal mismatch
/// `|N(p) - g(x)|`.
pub fn round_trip_residuals(
    f: &dyn Chart,
    slice: &QuotientSlice,
    samples: &[Vec<f64>],
    h: f64,
) -> Result<Vec<(f64, f64)>> {
    let [a0, a1] = slice.axes;
    try_map_points(samples, |p| -> Result<(f64, f64)> {
        let x = [p[a0], p[a1]];
        let jet = f.jet(p)?;
        let frame = point_frame(&jet)?;
        let zero = vec![0.0; slice.sphere.fiber_dim()];
        let psi0 = gauss_param(&slice.sphere, &slice.gamma, &x, &zero, h)?;
        let fr = slice.sphere.frame(&x)?;
        let diff = &jet.value - &psi0.value;
        let w: Vec<f64> = fr.vectors.iter().map(|xi| xi.dot(&diff)).collect();
        let psi = gauss_param(&slice.sphere, &slice.gamma, &x, &w, h)?;
        let scale = jet.d1.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let dist = (&psi.value - &jet.value).norm() / scale;
        let nmatch = (&frame.normal - &psi.gauss).norm();
        Ok((dist, nmatch))
    })
}

// ---------------------------------------------------------------------------
// Built-in instances

/// The totally geodesic `S^2 x {0}` in `S^3`, with `Lambda` spanned by `e_4`.
pub fn great_sphere_surface() -> SphereSurface {
    let e4 = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
    SphereSurface::new(surfaces::great_sphere_in_s3(), move |_| {
        Ok(FrameJet { vectors: vec![e4.clone()], derivs: vec![vec![DVector::zeros(4), DVector::zeros(4)]] })
    })
    .expect("two-dimensional chart")
}

/// The Clifford torus in `S^3` with its unit normal inside the sphere.
pub fn clifford_surface() -> SphereSurface {
    SphereSurface::new(surfaces::clifford_torus(), |x| {
        let (sx, cx) = x[0].sin_cos();
        let (sy, cy) = x[1].sin_cos();
        let k = 1.0 / SQRT_2;
        Ok(FrameJet {
            vectors: vec![surfaces::clifford_torus_normal(x)],
            derivs: vec![vec![
                DVector::from_vec(vec![-sx, cx, 0.0, 0.0]) * k,
                DVector::from_vec(vec![0.0, 0.0, sy, -cy]) * k,
            ]],
        })
    })
    .expect("two-dimensional chart")
}

/// Support functions shipped for the great sphere, in coordinates `(phi, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereGamma {
    /// `gamma = 1`: the cylinder `S^2 x R`, not minimal.
    One,
    /// `gamma = Q_1(cos theta)`, the second-kind Legendre function of degree one;
    /// solves `Delta gamma + 2 gamma = 0`.
    Legendre,
    /// `gamma = <c, h>`: solves the equation but `Psi` degenerates to a point.
    Linear,
}

impl SphereGamma {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "one" => Some(Self::One),
            "legendre" => Some(Self::Legendre),
            "linear" => Some(Self::Linear),
            _ => None,
        }
    }

    pub fn support(self) -> SupportFunction {
        match self {
            Self::One => SupportFunction::new(|_| 1.0)
                .with_gradient(|_| vec![0.0, 0.0])
                .with_hessian(|_| DMatrix::zeros(2, 2)),
            Self::Legendre => legendre_q1(),
            Self::Linear => {
                let c = [0.3, -0.2, 0.5, 0.0];
                let chart = surfaces::great_sphere_in_s3();
                let dot = move |v: &DVector<f64>| v.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                let (c1, c2, c3) = (chart.clone(), chart.clone(), chart);
                SupportFunction::new(move |x| dot(&c1.jet(x).expect("in chart").value))
                    .with_gradient(move |x| c2.jet(x).expect("in chart").d1.iter().map(dot).collect())
                    .with_hessian(move |x| {
                        let j = c3.jet(x).expect("in chart");
                        DMatrix::from_fn(2, 2, |a, b| dot(j.second(a, b)))
                    })
            }
        }
    }
}

fn legendre_q1() -> SupportFunction {
    // Q(t) = t atanh(t) - 1, Q' = atanh(t) + t/(1 - t^2), Q'' = 2/(1 - t^2)^2.
    let q = |t: f64| t * t.atanh() - 1.0;
    let dq = |t: f64| t.atanh() + t / (1.0 - t * t);
    let ddq = |t: f64| 2.0 / ((1.0 - t * t) * (1.0 - t * t));
    SupportFunction::new(move |x| q(x[1].cos()))
        .with_gradient(move |x| vec![0.0, -dq(x[1].cos()) * x[1].sin()])
        .with_hessian(move |x| {
            let (s, c) = x[1].sin_cos();
            let mut hm = DMatrix::zeros(2, 2);
            hm[(1, 1)] = ddq(c) * s * s - dq(c) * c;
            hm
        })
}

/// Trigonometric support function `sum a_k cos(j x + l y) + b_k sin(j x + l y)`
/// with terms `(j, l, a, b)`.
pub fn trig_support(terms: Vec<(f64, f64, f64, f64)>) -> SupportFunction {
    let terms = Arc::new(terms);
    let (t1, t2, t3) = (terms.clone(), terms.clone(), terms);
    SupportFunction::new(move |x| {
        t1.iter().map(|&(j, l, a, b)| {
            let ph = j * x[0] + l * x[1];
            a * ph.cos() + b * ph.sin()
        })
        .sum()
    })
    .with_gradient(move |x| {
        let mut g = vec![0.0, 0.0];
        for &(j, l, a, b) in t2.iter() {
            let ph = j * x[0] + l * x[1];
            let d = -a * ph.sin() + b * ph.cos();
            g[0] += j * d;
            g[1] += l * d;
        }
        g
    })
    .with_hessian(move |x| {
        let mut hm = DMatrix::zeros(2, 2);
        for &(j, l, a, b) in t3.iter() {
            let ph = j * x[0] + l * x[1];
            let dd = -(a * ph.cos() + b * ph.sin());
            let k = [j, l];
            for r in 0..2 {
                for c in 0..2 {
                    hm[(r, c)] += k[r] * k[c] * dd;
                }
            }
        }
        hm
    })
}

/// The fixed support function used by the Clifford-torus instance.
pub fn clifford_default_support() -> SupportFunction {
    trig_support(vec![(0.0, 0.0, 2.0, 0.0), (1.0, 0.0, 0.3, 0.1), (0.0, 1.0, -0.2, 0.25), (1.0, 1.0, 0.05, -0.1)])
}

/// `S^2(radius) + center` times a line, in `R^4`; coordinates `(phi, theta, s)`.
pub fn sphere_cylinder(radius: f64, center: [f64; 3], half_length: f64) -> ChartRef {
    let profile = AffineImage::new(
        surfaces::unit_sphere_inward(),
        DMatrix::identity(3, 3) * radius,
        DVector::from_column_slice(&center),
    )
    .expect("ambient dimension three");
    Arc::new(CylinderChart::new(Arc::new(profile), &CoordBox::symmetric(&[half_length])))
}

/// Regular-grid samples `(x_1, x_2, w_1, ..)` for a sphere surface.
pub fn sample_grid(g: &SphereSurface, counts: [usize; 2], w_half_width: f64, w_count: usize, margin: f64) -> Result<Vec<Vec<f64>>> {
    let base = g.chart().domain().shrunk(margin);
    let mut lo = base.lo.clone();
    let mut hi = base.hi.clone();
    let mut c = counts.to_vec();
    for _ in 0..g.fiber_dim() {
        lo.push(-w_half_width);
        hi.push(w_half_width);
        c.push(w_count);
    }
    CoordBox::new(lo, hi).grid(&c)
}

/// Default step for Gauss-parametrization stencils.
pub fn default_gauss_step() -> f64 {
    default_step(1.0)
}

/// Fraction of samples at which `Psi` is regular.
pub fn regular_fraction(g: &SphereSurface, gamma: &SupportFunction, samples: &[Vec<f64>], h: f64) -> f64 {
    let ok = map_points(samples, |s| {
        split(g, s)
            .and_then(|(x, w)| gauss_param(g, gamma, &x, &w, h))
            .map(|p| p.regular)
            .unwrap_or(false)
    });
    ok.iter().filter(|b| **b).count() as f64 / ok.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weierstrass::{m4r5_seed, WeierstrassSurface};

    fn h() -> f64 {
        default_gauss_step()
    }

    #[test]
    fn constant_gamma_gives_base_slice() {
        let g = great_sphere_surface();
        let one = SphereGamma::One.support();
        let x = [0.4, 1.1];
        let psi = gauss_param(&g, &one, &x, &[0.0], h()).unwrap();
        let base = g.chart().value(&x).unwrap();
        assert!((&psi.value - &base).norm() < 1e-15);
        let psi = gauss_param(&g, &one, &x, &[0.7], h()).unwrap();
        assert_eq!(psi.d1[2], DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]));
        assert!(line_angle(&psi.gauss, &psi.normal()) < 1e-12);
    }

    #[test]
    fn frame_validation() {
        let bad = SphereSurface::new(surfaces::great_sphere_in_s3(), |_| {
            let v = DVector::from_vec(vec![0.0, 0.0, 0.0, 2.0]);
            Ok(FrameJet { vectors: vec![v], derivs: vec![vec![DVector::zeros(4); 2]] })
        })
        .unwrap();
        let one = SphereGamma::One.support();
        assert!(matches!(gauss_param(&bad, &one, &[0.0, 1.0], &[0.0], h()), Err(Error::Validation(_))));
    }

    #[test]
    fn clifford_gauss_identity() {
        let g = clifford_surface();
        let gamma = clifford_default_support();
        let samples = sample_grid(&g, [5, 5], 0.5, 3, 0.1).unwrap();
        let r = gauss_map_identity_residual(&g, &gamma, &samples, h()).unwrap();
        assert!(r.pass, "{r:?}");
        let c = gauss_map_control_residual(&g, &gamma, &samples, h()).unwrap();
        assert!(c.pass && (c.max_residual - std::f64::consts::FRAC_PI_2).abs() < 1e-6, "{c:?}");
    }

    #[test]
    fn cylinder_is_not_minimal() {
        let g = great_sphere_surface();
        let samples = sample_grid(&g, [4, 4], 0.5, 2, 0.05).unwrap();
        let out = minimality_criterion(&g, &SphereGamma::One.support(), &samples, h(), 10.0 * h() * h()).unwrap();
        assert_eq!(out.verdict, MinimalityVerdict::NonMinimal);
        for (a, t) in out.laplacian.iter().zip(&out.trace) {
            assert!((a - 1.0).abs() < 1e-6);
            // A of S^2 x R is diag(1, 1, 0) up to sign.
            assert!((t - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn legendre_support_is_minimal() {
        let g = great_sphere_surface();
        let samples = sample_grid(&g, [4, 4], 0.5, 2, 0.05).unwrap();
        let gamma = SphereGamma::Legendre.support();
        let out = minimality_criterion(&g, &gamma, &samples, h(), 10.0 * h() * h()).unwrap();
        assert_eq!(out.verdict, MinimalityVerdict::Minimal, "{out:?}");
        let scaled = minimality_criterion(&g, &gamma.scaled(3.0), &samples, h(), 10.0 * h() * h()).unwrap();
        assert_eq!(scaled.verdict, MinimalityVerdict::Minimal);
    }

    #[test]
    fn linear_support_degenerates() {
        let g = great_sphere_surface();
        let samples = sample_grid(&g, [3, 3], 0.5, 2, 0.05).unwrap();
        assert_eq!(regular_fraction(&g, &SphereGamma::Linear.support(), &samples, h()), 0.0);
    }

    #[test]
    fn extraction_from_m4r5() {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let f = s.f();
        let pts = f.domain().shrunk(0.02).grid(&[3, 3, 2, 2]).unwrap();
        let ex = extract_from_hypersurface(f.as_ref(), &pts, h()).unwrap();
        assert!(ex.nullity_constancy < NULLITY_CONSTANCY_TOL);
        // leaves are the fibers {z} x W
        assert_eq!(ex.leaves.len(), 9);
        assert!(ex.leaves.iter().all(|l| l.members.len() == 4 && l.gamma_spread < 1e-10));
    }

    #[test]
    fn sphere_cylinder_support_matches_closed_form() {
        let (r, c) = (1.5, [0.2, -0.1, 0.3]);
        let cyl = sphere_cylinder(r, c, 1.0);
        let pts = cyl.domain().shrunk(0.05).grid(&[4, 4, 3]).unwrap();
        let ex = extract_from_hypersurface(cyl.as_ref(), &pts, h()).unwrap();
        assert_eq!(ex.leaves.len(), 16);
        let sphere = surfaces::unit_sphere_inward();
        for (p, (n, gamma)) in pts.iter().zip(ex.normals.iter().zip(&ex.gammas)) {
            let u = sphere.value(&p[..2]).unwrap();
            let sign = n.rows(0, 3).dot(&u);
            assert!((sign.abs() - 1.0).abs() < 1e-12);
            let closed = sign * (r + u.iter().zip(c).map(|(a, b)| a * b).sum::<f64>());
            assert!((gamma - closed).abs() < 1e-12);
        }
        let sl = quotient_slice(cyl.clone(), [0, 1], cyl.domain().center(), h()).unwrap();
        let rt = round_trip_residuals(cyl.as_ref(), &sl, &pts, h()).unwrap();
        assert!(rt.iter().all(|(d, n)| *d < ROUND_TRIP_TOL && *n < ROUND_TRIP_TOL));
    }

    #[test]
    fn m4r5_round_trip_and_minimality() {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let f = s.f();
        let slice = quotient_slice(f.clone(), [0, 1], f.domain().center(), h()).unwrap();
        let pts = f.domain().shrunk(0.02).grid(&[3, 3, 2, 2]).unwrap();
        let rt = round_trip_residuals(f.as_ref(), &slice, &pts, h()).unwrap();
        assert!(rt.iter().all(|(d, n)| *d < ROUND_TRIP_TOL && *n < ROUND_TRIP_TOL));
        let samples: Vec<Vec<f64>> = slice
            .sphere
            .chart()
            .domain()
            .shrunk(0.02)
            .grid(&[3, 3])
            .unwrap()
            .into_iter()
            .map(|x| vec![x[0], x[1], 0.1, -0.2])
            .collect();
        let out = minimality_criterion(&slice.sphere, &slice.gamma, &samples, h(), 10.0 * h() * h()).unwrap();
        assert_eq!(out.verdict, MinimalityVerdict::Minimal, "{out:?}");
        assert!(out.report("minimality", true).pass);
    }

    #[test]
    fn extraction_rejects_full_rank() {
        let torus = surfaces::torus(2.0, 0.5);
        match extract_from_hypersurface(torus.as_ref(), &[vec![0.1, 0.2]], h()) {
            Err(Error::Precondition(_)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
