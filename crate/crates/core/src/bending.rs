//! Infinitesimal bendings of hypersurface charts.
//!
//! A bending `T` of `f` satisfies `<T_i, f_j> + <f_i, T_j> = 0`. The tensor
//! `B = d/dt A(t)` of the variation `f + t T` is computed three ways:
//!
//! * [`b_by_fd`]: central difference of the shape operators of `f +- eps T`;
//! * [`b_by_formula`]: `B_ij = <T_ij - Gamma^k_ij T_k, N>`;
//! * [`b_by_bat`]: `B = A T_*` for Gauss-preserving bendings.
//!
//! All three return the bilinear form `G . dA/dt` in chart coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};

use crate::chart::{block_jet, AffineImage, Chart, ChartRef, CoordBox, CylinderChart, Jet2, LinearCombination};
use crate::error::{Error, Result};
use crate::geometry::{
    christoffel, christoffel_from_jet, covariant_derivative_endo, default_step, point_frame, rank_and_nullity, stencil,
    PointFrame, RANK_TOL,
};
use crate::par::try_map_points;
use crate::report::ResidualReport;

/// Tolerance for identities evaluated from exact jets.
pub const ANALYTIC_TOL: f64 = 1e-7;
/// Tolerance for the defining bending condition.
pub const BENDING_TOL: f64 = 1e-10;
/// Negative controls must exceed this.
pub const CONTROL_THRESHOLD: f64 = 1e-2;
pub const TRIVIALITY_TOL: f64 = 1e-6;
/// Relative size of the variation parameter `eps` (see [`variation_step`]).
pub const EPS_REL: f64 = 1e-4;
/// Largest `|<N, T_i>| / |T_i|` accepted by [`b_by_bat`].
pub const GAUSS_PRECONDITION_TOL: f64 = 1e-7;
/// Parameter used for the exact identity `g_t = g_0 + t^2 g_T`.
pub const EXACT_IDENTITY_T: f64 = 0.1;

/// Default finite-difference step for unit-scale charts.
pub fn default_fd_step() -> f64 {
    default_step(1.0)
}

/// `10 h^2`, the tolerance of finite-difference routes.
pub fn fd_tolerance(h: f64) -> f64 {
    10.0 * h * h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Conjugate,
    Trivial,
    Cylinder,
    Custom,
}

/// A vector field along a chart, with 2-jets in the chart's coordinates.
#[derive(Clone, Debug)]
pub struct BendingField {
    field: ChartRef,
    provenance: Provenance,
}

impl BendingField {
    pub fn new(field: ChartRef, provenance: Provenance) -> Self {
        Self { field, provenance }
    }

    /// The conjugate bending `fbar` of a Weierstrass surface.
    pub fn conjugate(surface: &crate::weierstrass::WeierstrassSurface) -> Self {
        Self::new(surface.fbar(), Provenance::Conjugate)
    }

    pub fn jet(&self, p: &[f64]) -> Result<Jet2> {
        self.field.jet(p)
    }

    pub fn field(&self) -> &ChartRef {
        &self.field
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(LinearCombination::new(vec![(a, self.field.clone())])?), self.provenance))
    }

    /// `a self + b other`. The sum of different kinds is tagged custom.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        let provenance = if self.provenance == other.provenance { self.provenance } else { Provenance::Custom };
        let lc = LinearCombination::new(vec![(a, self.field.clone()), (b, other.field.clone())])?;
        Ok(Self::new(Arc::new(lc), provenance))
    }
}

/// A Killing field `x -> D x + w` of Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrivialData {
    pub d: DMatrix<f64>,
    pub w: DVector<f64>,
}

impl TrivialData {
    pub fn new(d: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        if d.nrows() != d.ncols() || d.nrows() != w.len() {
            return Err(Error::Dimension { expected: w.len(), found: d.nrows() });
        }
        let defect = (&d + d.transpose()).amax();
        if defect > 1e-14 * d.amax().max(1.0) {
            return Err(Error::Validation(format!("D is not skew-symmetric: |D + D^T| = {defect:e}")));
        }
        Ok(Self { d, w })
    }

    pub fn translation(w: DVector<f64>) -> Self {
        let m = w.len();
        Self { d: DMatrix::zeros(m, m), w }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

/// `T = D f + w`.
pub fn make_trivial(data: &TrivialData, f: &ChartRef) -> Result<BendingField> {
    let data = TrivialData::new(data.d.clone(), data.w.clone())?;
    let field = AffineImage::new(f.clone(), data.d, data.w)?;
    Ok(BendingField::new(Arc::new(field), Provenance::Trivial))
}

struct CylinderBending {
    t1: BendingField,
    killing: TrivialData,
    profile_dim: usize,
    domain: CoordBox,
    ambient: usize,
}

impl Chart for CylinderBending {
    fn dim(&self) -> usize {
        self.profile_dim + self.killing.dim()
    }
    fn ambient_dim(&self) -> usize {
        self.ambient
    }
    fn domain(&self) -> &CoordBox {
        &self.domain
    }
    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        if p.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: p.len() });
        }
        let t1 = self.t1.jet(&p[..self.profile_dim])?;
        let z = DVector::from_column_slice(&p[self.profile_dim..]);
        let value2 = &self.killing.d * z + &self.killing.w;
        let cols: Vec<DVector<f64>> = self.killing.d.column_iter().map(|c| c.into_owned()).collect();
        let mut jet = block_jet(p, &t1, value2, &cols);
        jet.in_domain = self.domain.contains(p);
        Ok(jet)
    }
}

/// The block field `(T_1(y), D_2 z + w_2)` on the cylinder `(g(y), z)`.
pub fn make_cylinder_bending(t1: &BendingField, killing: &TrivialData, cylinder: &CylinderChart) -> Result<BendingField> {
    let profile = cylinder.profile();
    if t1.field().dim() != profile.dim() {
        return Err(Error::Dimension { expected: profile.dim(), found: t1.field().dim() });
    }
    if t1.field().ambient_dim() != profile.ambient_dim() {
        return Err(Error::Dimension { expected: profile.ambient_dim(), found: t1.field().ambient_dim() });
    }
    if killing.dim() != cylinder.factor_dim() {
        return Err(Error::Dimension { expected: cylinder.factor_dim(), found: killing.dim() });
    }
    let killing = TrivialData::new(killing.d.clone(), killing.w.clone())?;
    let field = CylinderBending {
        t1: t1.clone(),
        killing,
        profile_dim: profile.dim(),
        domain: cylinder.domain().clone(),
        ambient: cylinder.ambient_dim(),
    };
    Ok(BendingField::new(Arc::new(field), Provenance::Cylinder))
}

// ---------------------------------------------------------------------------
// Pointwise helpers

fn metric(jet: &Jet2) -> DMatrix<f64> {
    let j = jet.jacobian();
    j.transpose() * j
}

/// `max_i |T_i| / |f_i|`, the relative size of a field along `f`.
fn relative_size(fj: &Jet2, tj: &Jet2) -> f64 {
    fj.d1.iter().zip(&tj.d1).map(|(f, t)| t.norm() / f.norm()).fold(0.0, f64::max)
}

/// Variation parameter `eps = eps_rel / tau` so that `f +- eps T`
/// moves tangent vectors by a relative amount `eps_rel`.
pub fn variation_step(fj: &Jet2, tj: &Jet2, eps_rel: f64) -> f64 {
    let tau = relative_size(fj, tj);
    if tau == 0.0 {
        eps_rel
    } else {
        eps_rel / tau
    }
}

fn bending_defect(fj: &Jet2, tj: &Jet2) -> f64 {
    let d = fj.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let num = (tj.d1[i].dot(&fj.d1[j]) + fj.d1[i].dot(&tj.d1[j])).abs();
            let den = fj.d1[i].norm() * tj.d1[j].norm() + fj.d1[j].norm() * tj.d1[i].norm();
            if den > 0.0 {
                worst = worst.max(num / den);
            }
        }
    }
    worst
}

fn tangency_defect(frame: &PointFrame, tj: &Jet2) -> f64 {
    tj.d1
        .iter()
        .map(|t| {
            let n = t.norm();
            if n == 0.0 {
                0.0
            } else {
                frame.normal.dot(t).abs() / n
            }
        })
        .fold(0.0, f64::max)
}

fn jets(f: &dyn Chart, t: &BendingField, p: &[f64]) -> Result<(Jet2, Jet2)> {
    let fj = f.jet(p)?;
    let tj = t.jet(p)?;
    if tj.dim() != fj.dim() || tj.ambient_dim() != fj.ambient_dim() {
        return Err(Error::Dimension { expected: fj.ambient_dim(), found: tj.ambient_dim() });
    }
    Ok((fj, tj))
}

// ---------------------------------------------------------------------------
// Residual reports

/// `max |<T_i, f_j> + <f_i, T_j>| / (|f_i||T_j| + |f_j||T_i|)`.
pub fn bending_residual(f: &dyn Chart, t: &BendingField, points: &[Vec<f64>]) -> Result<ResidualReport> {
    let res = try_map_points(points, |p| jets(f, t, p).map(|(fj, tj)| bending_defect(&fj, &tj)))?;
    Ok(ResidualReport::new("bending", &res, BENDING_TOL).require_points())
}

#[derive(Debug, Clone)]
pub struct VariationReports {
    /// Central difference in `t` of the metric of `f + t T`, relative to `|G|`.
    pub first_order: ResidualReport,
    /// `|g_t - g_0 - t^2 g_T| / |G|` at `t = +-0.1` (relative).
    pub exact_identity: ResidualReport,
}

pub fn variation_first_order_residual(
    f: &dyn Chart,
    t: &BendingField,
    points: &[Vec<f64>],
    eps_rel: f64,
    h: f64,
) -> Result<VariationReports> {
    let pairs = try_map_points(points, |p| -> Result<(f64, f64)> {
        let (fj, tj) = jets(f, t, p)?;
        let g0 = metric(&fj);
        let scale = g0.amax();
        let eps = variation_step(&fj, &tj, eps_rel);
        let gp = metric(&fj.lin_comb(1.0, &tj, eps));
        let gm = metric(&fj.lin_comb(1.0, &tj, -eps));
        let first = ((gp - gm) / (2.0 * eps)).amax() / scale;
        let gt = metric(&tj);
        let s = variation_step(&fj, &tj, EXACT_IDENTITY_T);
        let mut exact: f64 = 0.0;
        for ts in [s, -s] {
            let g = metric(&fj.lin_comb(1.0, &tj, ts));
            exact = exact.max((g - &g0 - &gt * (ts * ts)).amax() / scale);
        }
        Ok((first, exact))
    })?;
    let first: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    let exact: Vec<f64> = pairs.iter().map(|x| x.1).collect();
    Ok(VariationReports {
        first_order: ResidualReport::new("variation/first_order", &first, fd_tolerance(h)).require_points(),
        exact_identity: ResidualReport::new("variation/exact_identity", &exact, BENDING_TOL).require_points(),
    })
}

#[derive(Debug, Clone)]
pub struct GaussPreservationReports {
    /// `max_i |<N, T_i>| / |T_i|`.
    pub tangency: ResidualReport,
    /// `|dN_t/dt| / tau` by central differences, `tau = max_i |T_i|/|f_i|`.
    pub normal_variation: ResidualReport,
}

pub fn gauss_preservation_residual(
    f: &dyn Chart,
    t: &BendingField,
    points: &[Vec<f64>],
    eps_rel: f64,
    h: f64,
) -> Result<GaussPreservationReports> {
    let pairs = try_map_points(points, |p| -> Result<(f64, f64)> {
        let (fj, tj) = jets(f, t, p)?;
        let frame = point_frame(&fj)?;
        let tangency = tangency_defect(&frame, &tj);
        let tau = relative_size(&fj, &tj);
        if tau == 0.0 {
            return Ok((tangency, 0.0));
        }
        let eps = variation_step(&fj, &tj, eps_rel);
        let np = point_frame(&fj.lin_comb(1.0, &tj, eps))?.normal;
        let nm = point_frame(&fj.lin_comb(1.0, &tj, -eps))?.normal;
        Ok((tangency, (np - nm).norm() / (2.0 * eps) / tau))
    })?;
    let a: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    let b: Vec<f64> = pairs.iter().map(|x| x.1).collect();
    Ok(GaussPreservationReports {
        tangency: ResidualReport::new("gauss_preservation/tangency", &a, ANALYTIC_TOL).require_points(),
        normal_variation: ResidualReport::new("gauss_preservation/normal_variation", &b, fd_tolerance(h))
            .require_points(),
    })
}

// ---------------------------------------------------------------------------
// The tensor B

/// `B` as a bilinear form in chart coordinates, with the metric at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BTensor {
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl BTensor {
    /// The endomorphism `G^{-1} B`.
    pub fn endomorphism(&self) -> DMatrix<f64> {
        self.g.clone().try_inverse().expect("metric is invertible") * &self.b
    }

    /// `|B - B^T| / |B|` (zero for `B = 0`).
    pub fn asymmetry(&self) -> f64 {
        let n = self.b.amax();
        if n == 0.0 {
            0.0
        } else {
            (&self.b - self.b.transpose()).amax() / n
        }
    }

    /// Largest entry of `B - other`, relative to `scale`.
    pub fn deviation(&self, other: &BTensor, scale: f64) -> f64 {
        (&self.b - &other.b).amax() / scale
    }
}

fn b_fd_from_jets(fj: &Jet2, tj: &Jet2, eps_rel: f64) -> Result<BTensor> {
    let g = metric(fj);
    if relative_size(fj, tj) == 0.0 {
        let d = fj.dim();
        return Ok(BTensor { b: DMatrix::zeros(d, d), g });
    }
    let eps = variation_step(fj, tj, eps_rel);
    let ap = point_frame(&fj.lin_comb(1.0, tj, eps))?.a;
    let am = point_frame(&fj.lin_comb(1.0, tj, -eps))?.a;
    let b = &g * (ap - am) / (2.0 * eps);
    Ok(BTensor { b, g })
}

fn b_formula_from_jets(fj: &Jet2, tj: &Jet2) -> Result<BTensor> {
    let frame = point_frame(fj)?;
    let gamma = christoffel_from_jet(fj);
    let d = fj.dim();
    let b = DMatrix::from_fn(d, d, |i, j| {
        let mut v = tj.second(i, j).clone();
        for k in 0..d {
            v -= &tj.d1[k] * gamma.get(k, i, j);
        }
        v.dot(&frame.normal)
    });
    Ok(BTensor { b, g: frame.g })
}

/// Tangential endomorphism `T_* = G^{-1} M`, `M_li = <f_l, T_i>`.
pub fn tangential_part(frame: &PointFrame, tj: &Jet2) -> DMatrix<f64> {
    frame.tangential_endomorphism(&tj.d1)
}

/// `B` from the shape operators of `f +- eps T`.
pub fn b_by_fd(f: &dyn Chart, t: &BendingField, p: &[f64], eps_rel: f64) -> Result<BTensor> {
    let (fj, tj) = jets(f, t, p)?;
    b_fd_from_jets(&fj, &tj, eps_rel)
}

/// `B_ij = <T_ij - Gamma^k_ij T_k, N>`, with the Christoffel symbols read off
/// the exact 2-jet of `f`.
pub fn b_by_formula(f: &dyn Chart, t: &BendingField, p: &[f64]) -> Result<BTensor> {
    let (fj, tj) = jets(f, t, p)?;
    b_formula_from_jets(&fj, &tj)
}

/// `B = G A T_*` together with `|A T_* + T_* A| / (|A| |T_*|)`.
pub fn b_by_bat(f: &dyn Chart, t: &BendingField, p: &[f64]) -> Result<(BTensor, f64)> {
    let (fj, tj) = jets(f, t, p)?;
    let frame = point_frame(&fj)?;
    let defect = tangency_defect(&frame, &tj);
    if defect > GAUSS_PRECONDITION_TOL {
        return Err(Error::Precondition(format!(
            "bending does not preserve the Gauss map at {p:?}: |<N, T_i>|/|T_i| = {defect:e}"
        )));
    }
    let ts = tangential_part(&frame, &tj);
    let at = &frame.a * &ts;
    let scale = frame.operator_norm(&frame.a) * frame.operator_norm(&ts);
    let anti = if scale == 0.0 { 0.0 } else { frame.operator_norm(&(&at + &ts * &frame.a)) / scale };
    Ok((BTensor { b: &frame.g * at, g: frame.g.clone() }, anti))
}

/// Largest pairwise deviation among the three routes, relative to the
/// largest entry of the formula route (or to `|A| tau |G|` when `B = 0`).
#[derive(Debug, Clone, Copy)]
pub struct RouteAgreement {
    pub fd_formula: f64,
    pub fd_bat: f64,
    pub formula_bat: f64,
}

impl RouteAgreement {
    pub fn max(&self) -> f64 {
        self.fd_formula.max(self.fd_bat).max(self.formula_bat)
    }
}

pub fn three_route_agreement(f: &dyn Chart, t: &BendingField, p: &[f64], eps_rel: f64) -> Result<RouteAgreement> {
    let (fj, tj) = jets(f, t, p)?;
    let frame = point_frame(&fj)?;
    let fd = b_fd_from_jets(&fj, &tj, eps_rel)?;
    let formula = b_formula_from_jets(&fj, &tj)?;
    let (bat, _) = b_by_bat(f, t, p)?;
    let scale = {
        let s = formula.b.amax();
        if s > 0.0 {
            s
        } else {
            (frame.operator_norm(&frame.a) * relative_size(&fj, &tj) * frame.g.amax()).max(f64::MIN_POSITIVE)
        }
    };
    Ok(RouteAgreement {
        fd_formula: fd.deviation(&formula, scale),
        fd_bat: fd.deviation(&bat, scale),
        formula_bat: formula.deviation(&bat, scale),
    })
}

// ---------------------------------------------------------------------------
// Identities

fn wedge(frame: &PointFrame, u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let lt = frame.chol_l.transpose();
    let (u, v) = (&lt * u, &lt * v);
    &u * v.transpose() - &v * u.transpose()
}

/// `max_ij |B e_i ^ A e_j - B e_j ^ A e_i| / (|A| |B|)` with `A`, `B`
/// endomorphisms and the wedge taken in a G-orthonormal frame.
pub fn fundamental_equation_residual(frame: &PointFrame, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = frame.operator_norm(a) * frame.operator_norm(b);
    if scale == 0.0 {
        return 0.0;
    }
    let d = frame.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let w = wedge(frame, &b.column(i).into_owned(), &a.column(j).into_owned())
                - wedge(frame, &b.column(j).into_owned(), &a.column(i).into_owned());
            let ei = frame.vector_norm(&unit(d, i));
            let ej = frame.vector_norm(&unit(d, j));
            worst = worst.max(w.norm() / (scale * ei * ej));
        }
    }
    worst
}

fn unit(d: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(d, |r, _| (r == i) as u8 as f64)
}

/// An endomorphism field on chart coordinates.
pub type EndoField<'a> = &'a (dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Sync);

/// `max_ij |(nabla_i S) e_j - (nabla_j S) e_i| / (|S| |f_i| |f_j|)` with
/// finite-difference Christoffel symbols and derivatives of `S`.
pub fn codazzi_residual(f: &dyn Chart, s: EndoField<'_>, p: &[f64], h: f64) -> Result<f64> {
    let frame = point_frame(&f.jet(p)?)?;
    let s0 = s(p)?;
    let norm = frame.operator_norm(&s0);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let gamma = christoffel(f, p, h)?;
    let ds = stencil(f, p, h, s)?;
    let nabla: Vec<DMatrix<f64>> = ds
        .iter()
        .enumerate()
        .map(|(l, (sp, sm))| covariant_derivative_endo(&gamma, l, &((sp - sm) / (2.0 * h)), &s0))
        .collect();
    let d = f.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let v = nabla[i].column(j) - nabla[j].column(i);
            let r = frame.vector_norm(&v.into_owned())
                / (norm * frame.tangents[i].norm() * frame.tangents[j].norm());
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// `max_l |nabla_l T_*| / (|f_l| |T_*|)` with finite-difference Christoffel
/// symbols; zero when `T_* = 0`.
pub fn parallel_tstar_residual(f: &dyn Chart, t: &BendingField, p: &[f64], h: f64) -> Result<f64> {
    let field = |q: &[f64]| -> Result<DMatrix<f64>> {
        let (fj, tj) = jets(f, t, q)?;
        Ok(tangential_part(&point_frame(&fj)?, &tj))
    };
    let frame = point_frame(&f.jet(p)?)?;
    let t0 = field(p)?;
    let norm = frame.frobenius_norm(&t0);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let gamma = christoffel(f, p, h)?;
    let ds = stencil(f, p, h, field)?;
    let mut worst: f64 = 0.0;
    for (l, (tp, tm)) in ds.iter().enumerate() {
        let nabla = covariant_derivative_endo(&gamma, l, &((tp - tm) / (2.0 * h)), &t0);
        worst = worst.max(frame.frobenius_norm(&nabla) / (frame.tangents[l].norm() * norm));
    }
    Ok(worst)
}

/// Endomorphism `B` of a bending at `p` by the formula route.
pub fn b_endomorphism(f: &dyn Chart, t: &BendingField, p: &[f64]) -> Result<DMatrix<f64>> {
    Ok(b_by_formula(f, t, p)?.endomorphism())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationFit {
    pub c: f64,
    pub residual: f64,
}

/// Best fit of `T_*` on the plane `Delta^perp` by `c R_{pi/2}`.
///
/// The plane is spanned by a unit principal direction `e_1` and `e_2 = J e_1`
/// when the chart carries a complex structure (otherwise the second principal
/// direction). The residual is `|M - c R|` relative to `max(|c|, 1)`.
pub fn rotation_coefficient(f: &dyn Chart, t: &BendingField, p: &[f64]) -> Result<RotationFit> {
    let (fj, tj) = jets(f, t, p)?;
    let frame = point_frame(&fj)?;
    let rank = rank_and_nullity(&frame, RANK_TOL);
    if rank.rank != 2 {
        return Err(Error::Precondition(format!("rank {} at {p:?}; rotation form needs rank 2", rank.rank)));
    }
    let e1 = frame.eigenvectors[0].clone();
    let e2 = match f.complex_structure() {
        Some(j) => &j * &e1,
        None => frame.eigenvectors[1].clone(),
    };
    let ts = tangential_part(&frame, &tj);
    let ip = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &frame.g * v)[(0, 0)];
    let basis = [&e1, &e2];
    let m = DMatrix::from_fn(2, 2, |a, b| ip(basis[a], &(&ts * basis[b])));
    let c = 0.5 * (m[(1, 0)] - m[(0, 1)]);
    let r = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    Ok(RotationFit { c, residual: (m - r * c).norm() / c.abs().max(1.0) })
}

// ---------------------------------------------------------------------------
// Triviality

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrivialityVerdict {
    pub trivial: bool,
    /// `max |B_fd|_G / (|A|_G tau)` over the points.
    pub residual: f64,
    pub tolerance: f64,
}

/// Trivial iff the relative size of `B` stays below `tol` at every point.
pub fn classify_triviality(f: &dyn Chart, t: &BendingField, points: &[Vec<f64>], tol: f64) -> Result<TrivialityVerdict> {
    let res = try_map_points(points, |p| -> Result<f64> {
        let (fj, tj) = jets(f, t, p)?;
        let tau = relative_size(&fj, &tj);
        if tau == 0.0 {
            return Ok(0.0);
        }
        let frame = point_frame(&fj)?;
        let b = b_fd_from_jets(&fj, &tj, EPS_REL)?;
        let na = frame.frobenius_norm(&frame.a);
        if na == 0.0 {
            return Err(Error::Precondition(format!("flat point at {p:?}")));
        }
        Ok(frame.frobenius_norm(&b.endomorphism()) / (na * tau))
    })?;
    let residual = res.iter().copied().fold(0.0, f64::max);
    Ok(TrivialityVerdict { trivial: residual < tol, residual, tolerance: tol })
}

/// `T = c fbar + D f + w` recovered by least squares.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub c: f64,
    pub trivial: TrivialData,
    /// `max |T - c fbar - D f - w| / max |T|` over the points.
    pub residual: f64,
}

/// Projects the tensor `B` of `t` onto that of `fbar` to get `c`, then fits a
/// Killing field `D f + w` to the remainder `T - c fbar`.
pub fn decompose_against_conjugate(
    f: &dyn Chart,
    fbar: &BendingField,
    t: &BendingField,
    points: &[Vec<f64>],
) -> Result<Decomposition> {
    let pairs = try_map_points(points, |p| -> Result<(f64, f64)> {
        let bt = b_by_formula(f, t, p)?.b;
        let bc = b_by_formula(f, fbar, p)?.b;
        Ok((bt.dot(&bc), bc.dot(&bc)))
    })?;
    let (num, den) = pairs.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    if den == 0.0 {
        return Err(Error::Precondition("the conjugate bending has B = 0 at every point".into()));
    }
    let c = num / den;

    let samples = try_map_points(points, |p| -> Result<(DVector<f64>, DVector<f64>)> {
        let r = t.jet(p)?.value - fbar.jet(p)?.value * c;
        Ok((f.value(p)?, r))
    })?;
    let m = f.ambient_dim();
    let skew_pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let unknowns = skew_pairs.len() + m;
    let rows = samples.len() * m;
    if rows < unknowns {
        return Err(Error::Precondition(format!("{} points cannot determine a Killing field in R^{m}", samples.len())));
    }
    let mut lhs = DMatrix::zeros(rows, unknowns);
    let mut rhs = DVector::zeros(rows);
    for (s, (x, r)) in samples.iter().enumerate() {
        for row in 0..m {
            let k = s * m + row;
            rhs[k] = r[row];
            for (u, &(a, b)) in skew_pairs.iter().enumerate() {
                // D = sum d_ab (E_ab - E_ba)
                if row == a {
                    lhs[(k, u)] = x[b];
                } else if row == b {
                    lhs[(k, u)] = -x[a];
                }
            }
            lhs[(k, skew_pairs.len() + row)] = 1.0;
        }
    }
    let svd = SVD::new(lhs.clone(), true, true);
    let cutoff = 1e-10 * svd.singular_values.max();
    let sol = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Validation(format!("least squares failed: {e}")))?;
    let mut d = DMatrix::zeros(m, m);
    for (u, &(a, b)) in skew_pairs.iter().enumerate() {
        d[(a, b)] = sol[u];
        d[(b, a)] = -sol[u];
    }
    let w = sol.rows(skew_pairs.len(), m).into_owned();
    let tmax = try_map_points(points, |p| t.jet(p).map(|j| j.value.amax()))?.into_iter().fold(0.0, f64::max);
    let residual = (lhs * &sol - rhs).amax() / tmax.max(f64::MIN_POSITIVE);
    Ok(Decomposition { c, trivial: TrivialData { d, w }, residual })
}

/// `max |B v|_G / |B|` over the nullity basis of `A` at `p`.
pub fn nullity_in_kernel_of_b(f: &dyn Chart, t: &BendingField, p: &[f64]) -> Result<f64> {
    let frame = point_frame(&f.jet(p)?)?;
    let rank = rank_and_nullity(&frame, RANK_TOL);
    let b = b_endomorphism(f, t, p)?;
    let nb = frame.operator_norm(&b);
    if nb == 0.0 {
        return Ok(0.0);
    }
    Ok(rank.nullity_basis.iter().map(|v| frame.vector_norm(&(&b * v)) / nb).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces;
    use crate::weierstrass::{m4r5_seed, WeierstrassSurface};

    fn rot_xz(m: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(m, m);
        d[(0, 2)] = 1.0;
        d[(2, 0)] = -1.0;
        d
    }

    fn m4r5() -> (ChartRef, BendingField, Vec<Vec<f64>>) {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let pts = vec![vec![0.1, -0.2, 0.05, 0.1], vec![-0.15, 0.1, -0.2, 0.0], vec![0.0, 0.0, 0.0, 0.0]];
        (s.f(), BendingField::conjugate(&s), pts)
    }

    #[test]
    fn killing_fields_are_bendings() {
        let f = surfaces::torus(2.0, 0.7);
        let pts = vec![vec![0.3, 0.4], vec![-1.0, 2.0]];
        let t = make_trivial(&TrivialData::translation(DVector::from_vec(vec![1.0, 2.0, 3.0])), &f).unwrap();
        assert_eq!(bending_residual(f.as_ref(), &t, &pts).unwrap().max_residual, 0.0);
        let t = make_trivial(&TrivialData::new(rot_xz(3), DVector::zeros(3)).unwrap(), &f).unwrap();
        assert!(bending_residual(f.as_ref(), &t, &pts).unwrap().max_residual < 1e-13);
    }

    #[test]
    fn non_skew_rejected() {
        let f = surfaces::plane();
        let d = DMatrix::identity(3, 3);
        assert!(matches!(make_trivial(&TrivialData { d, w: DVector::zeros(3) }, &f), Err(Error::Validation(_))));
    }

    #[test]
    fn conjugate_is_bending_and_gauss_preserving() {
        let (f, t, pts) = m4r5();
        let h = default_fd_step();
        assert!(bending_residual(f.as_ref(), &t, &pts).unwrap().max_residual < 1e-10);
        let v = variation_first_order_residual(f.as_ref(), &t, &pts, EPS_REL, h).unwrap();
        assert!(v.first_order.pass && v.exact_identity.pass, "{v:?}");
        let g = gauss_preservation_residual(f.as_ref(), &t, &pts, EPS_REL, h).unwrap();
        assert!(g.tangency.max_residual < 1e-8 && g.normal_variation.max_residual < 1e-8, "{g:?}");
    }

    #[test]
    fn stretching_is_not_a_bending() {
        let (f, _, pts) = m4r5();
        let t = BendingField::new(f.clone(), Provenance::Custom);
        let v = variation_first_order_residual(f.as_ref(), &t, &pts, EPS_REL, default_fd_step()).unwrap();
        assert!((v.first_order.max_residual - 2.0).abs() < 1e-6);
    }

    #[test]
    fn translation_leaves_normal_fixed() {
        let f = surfaces::unit_sphere_inward();
        let t = make_trivial(&TrivialData::translation(DVector::from_vec(vec![0.0, 1.0, 0.0])), &f).unwrap();
        let g = gauss_preservation_residual(f.as_ref(), &t, &[vec![0.2, 1.0]], EPS_REL, default_fd_step()).unwrap();
        assert_eq!(g.normal_variation.max_residual, 0.0);
        let r = make_trivial(&TrivialData::new(rot_xz(3), DVector::zeros(3)).unwrap(), &f).unwrap();
        let g = gauss_preservation_residual(f.as_ref(), &r, &[vec![0.2, 1.0]], EPS_REL, default_fd_step()).unwrap();
        assert!(g.tangency.max_residual > CONTROL_THRESHOLD);
    }

    #[test]
    fn b_routes_on_conjugate() {
        let (f, t, pts) = m4r5();
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let j = crate::weierstrass::coordinate_complex_structure(2);
        for p in &pts {
            let formula = b_by_formula(f.as_ref(), &t, p).unwrap();
            let frame = point_frame(&s.f().jet(p).unwrap()).unwrap();
            let expected = &frame.g * &frame.a * &j;
            assert!((&formula.b - &expected).amax() / expected.amax() < 1e-10);
            assert!(formula.asymmetry() < 1e-10);
            let (bat, anti) = b_by_bat(f.as_ref(), &t, p).unwrap();
            assert!(anti < 1e-8);
            assert!((&bat.b - &formula.b).amax() / expected.amax() < 1e-10);
            let agree = three_route_agreement(f.as_ref(), &t, p, EPS_REL).unwrap();
            assert!(agree.max() < 1e-6, "{agree:?}");
        }
    }

    #[test]
    fn b_vanishes_for_trivial_and_zero() {
        let (f, _, pts) = m4r5();
        let zero = make_trivial(&TrivialData::translation(DVector::zeros(5)), &f).unwrap();
        assert_eq!(b_by_fd(f.as_ref(), &zero, &pts[0], EPS_REL).unwrap().b.amax(), 0.0);
        let w = make_trivial(&TrivialData::translation(DVector::from_element(5, 1.0)), &f).unwrap();
        assert_eq!(b_by_formula(f.as_ref(), &w, &pts[0]).unwrap().b.amax(), 0.0);
        let (bat, _) = b_by_bat(f.as_ref(), &w, &pts[0]).unwrap();
        assert_eq!(bat.b.amax(), 0.0);
        let rot = make_trivial(&TrivialData::new(rot_xz(5), DVector::zeros(5)).unwrap(), &f).unwrap();
        let v = classify_triviality(f.as_ref(), &rot, &pts, TRIVIALITY_TOL).unwrap();
        assert!(v.trivial, "{v:?}");
    }

    #[test]
    fn bat_requires_gauss_preservation() {
        let f = surfaces::unit_sphere_inward();
        let r = make_trivial(&TrivialData::new(rot_xz(3), DVector::zeros(3)).unwrap(), &f).unwrap();
        assert!(matches!(b_by_bat(f.as_ref(), &r, &[0.2, 1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn fundamental_equation_examples() {
        let (f, t, pts) = m4r5();
        let frame = point_frame(&f.jet(&pts[0]).unwrap()).unwrap();
        let b = b_endomorphism(f.as_ref(), &t, &pts[0]).unwrap();
        assert!(fundamental_equation_residual(&frame, &frame.a, &b) < 1e-10);
        assert_eq!(fundamental_equation_residual(&frame, &frame.a, &DMatrix::zeros(4, 4)), 0.0);
        // B = A violates the linearized Gauss equation on rank two.
        assert!(fundamental_equation_residual(&frame, &frame.a, &frame.a) > CONTROL_THRESHOLD);
    }

    #[test]
    fn rotation_form() {
        let (f, t, pts) = m4r5();
        for p in &pts {
            let fit = rotation_coefficient(f.as_ref(), &t, p).unwrap();
            assert!((fit.c - 1.0).abs() < 1e-10 && fit.residual < 1e-10, "{fit:?}");
            let fit3 = rotation_coefficient(f.as_ref(), &t.scaled(3.0).unwrap(), p).unwrap();
            assert!((fit3.c - 3.0).abs() < 1e-10);
        }
        let w = make_trivial(&TrivialData::translation(DVector::from_element(5, 1.0)), &f).unwrap();
        assert_eq!(rotation_coefficient(f.as_ref(), &w, &pts[0]).unwrap().c, 0.0);
        let plane = surfaces::plane();
        let wp = make_trivial(&TrivialData::translation(DVector::from_element(3, 1.0)), &plane).unwrap();
        assert!(matches!(rotation_coefficient(plane.as_ref(), &wp, &[0.0, 1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn nullity_is_killed_by_b() {
        let (f, t, pts) = m4r5();
        for p in &pts {
            assert!(nullity_in_kernel_of_b(f.as_ref(), &t, p).unwrap() < 1e-8);
        }
    }
}
