//! Pointwise extrinsic geometry of hypersurface charts, plus the
//! finite-difference machinery (Christoffel symbols, covariant derivatives,
//! Laplace-Beltrami) that the identity checks are phrased in.
//!
//! Conventions: the unit normal is the normalized [`generalized_cross`] of the
//! coordinate partials taken in index order, `H_ij = <f_ij, N>`, and the
//! shape operator is `A = G^{-1} H`, so that `dN(e_i) = -f_*(A e_i)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

pub use crate::chart::Jet2;

use crate::chart::Chart;
use crate::error::{Error, Result};

/// Relative threshold on the smallest singular value of the Jacobian.
pub const REGULARITY_TOL: f64 = 1e-10;
/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-7;

/// Central-difference step balancing truncation and round-off for first derivatives.
pub fn default_step(scale: f64) -> f64 {
    f64::EPSILON.cbrt() * scale
}

/// The vector `n` with `<n, u> = det(u, v_1, ..., v_d)` for every `u`.
///
/// Returns the zero vector when the inputs are dependent.
pub fn generalized_cross(vs: &[DVector<f64>]) -> DVector<f64> {
    let d = vs.len();
    let m = d + 1;
    assert!(vs.iter().all(|v| v.len() == m), "generalized_cross needs d vectors in R^(d+1)");
    let v = DMatrix::from_columns(vs);
    DVector::from_fn(m, |k, _| {
        let minor = v.clone().remove_row(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Metric, normal, second fundamental form and shape operator at one point.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub coords: Vec<f64>,
    pub tangents: Vec<DVector<f64>>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// Lower Cholesky factor of `g`.
    pub chol_l: DMatrix<f64>,
    pub normal: DVector<f64>,
    pub h: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Principal curvatures sorted by decreasing absolute value.
    pub eigenvalues: Vec<f64>,
    /// G-orthonormal principal directions, matching `eigenvalues`.
    pub eigenvectors: Vec<DVector<f64>>,
}

impl PointFrame {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Pushes a coordinate vector forward to the ambient space.
    pub fn push_forward(&self, x: &DVector<f64>) -> DVector<f64> {
        self.tangents.iter().zip(x.iter()).fold(DVector::zeros(self.normal.len()), |acc, (t, c)| acc + t * *c)
    }

    /// Endomorphism expressed in a G-orthonormal basis: `L^T X L^{-T}`.
    fn orthonormal_form(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let lt = self.chol_l.transpose();
        let lt_inv = lt.clone().try_inverse().expect("Cholesky factor is invertible");
        lt * x * lt_inv
    }

    /// Operator norm of an endomorphism with respect to the induced metric.
    pub fn operator_norm(&self, x: &DMatrix<f64>) -> f64 {
        self.orthonormal_form(x).singular_values().max()
    }

    /// Frobenius norm of an endomorphism with respect to the induced metric.
    pub fn frobenius_norm(&self, x: &DMatrix<f64>) -> f64 {
        self.orthonormal_form(x).norm()
    }

    /// Length of a coordinate vector in the induced metric.
    pub fn vector_norm(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.g * x)[(0, 0)].max(0.0).sqrt()
    }

    /// Tangential endomorphism `X -> (V_* X)^T` determined by the ambient
    /// vectors `V_i` attached to the coordinate directions.
    pub fn tangential_endomorphism(&self, cols: &[DVector<f64>]) -> DMatrix<f64> {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |l, i| self.tangents[l].dot(&cols[i]));
        &self.g_inv * m
    }

    /// Converts a bilinear form to the endomorphism it represents through `g`.
    pub fn raise(&self, bilinear: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g_inv * bilinear
    }

    pub fn lower(&self, endo: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g * endo
    }

    /// `|| G X - (G X)^T ||`, the self-adjointness defect of `X`.
    pub fn self_adjoint_defect(&self, x: &DMatrix<f64>) -> f64 {
        let gx = &self.g * x;
        (&gx - gx.transpose()).amax()
    }
}

/// Builds the [`PointFrame`] of a jet.
pub fn point_frame(jet: &Jet2) -> Result<PointFrame> {
    let d = jet.dim();
    if jet.ambient_dim() != d + 1 {
        return Err(Error::Dimension { expected: d + 1, found: jet.ambient_dim() });
    }
    let jac = jet.jacobian();
    let sv = jac.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > REGULARITY_TOL * smax) {
        return Err(Error::NonImmersion { coords: jet.coords.clone(), sigma_min: smin });
    }
    let g = jac.transpose() * &jac;
    let chol = Cholesky::new(g.clone())
        .ok_or_else(|| Error::NonImmersion { coords: jet.coords.clone(), sigma_min: smin })?;
    let g_inv = chol.inverse();
    let chol_l = chol.l();
    let cross = generalized_cross(&jet.d1);
    let normal = &cross / cross.norm();
    let h = DMatrix::from_fn(d, d, |i, j| 0.5 * (jet.second(i, j).dot(&normal) + jet.second(j, i).dot(&normal)));
    let a = &g_inv * &h;

    let l_inv = chol_l.clone().try_inverse().expect("Cholesky factor is invertible");
    let m = &l_inv * &h * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::<f64, Dyn>::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
    let lt_inv = l_inv.transpose();
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = order.iter().map(|&i| &lt_inv * eig.eigenvectors.column(i)).collect();

    Ok(PointFrame {
        coords: jet.coords.clone(),
        tangents: jet.d1.clone(),
        g,
        g_inv,
        chol_l,
        normal,
        h,
        a,
        eigenvalues,
        eigenvectors,
    })
}

/// Rank of the shape operator and an orthonormal basis of its kernel.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    pub nullity_basis: Vec<DVector<f64>>,
    /// Some eigenvalue sits within a decade of the cutoff.
    pub indeterminate: bool,
    pub max_abs_eigenvalue: f64,
}

pub fn rank_and_nullity(frame: &PointFrame, tol: f64) -> RankInfo {
    let max = frame.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if max == 0.0 {
        return RankInfo {
            rank: 0,
            nullity_basis: frame.eigenvectors.clone(),
            indeterminate: false,
            max_abs_eigenvalue: 0.0,
        };
    }
    let cut = tol * max;
    let mut rank = 0;
    let mut nullity_basis = Vec::new();
    let mut indeterminate = false;
    for (l, v) in frame.eigenvalues.iter().zip(&frame.eigenvectors) {
        let a = l.abs();
        if a >= cut / 10.0 && a <= cut * 10.0 {
            indeterminate = true;
        }
        if a > cut {
            rank += 1;
        } else {
            nullity_basis.push(v.clone());
        }
    }
    if indeterminate {
        log::warn!("indeterminate rank at {:?}: spectrum {:?}", frame.coords, frame.eigenvalues);
    }
    RankInfo { rank, nullity_basis, indeterminate, max_abs_eigenvalue: max }
}

/// Christoffel symbols `gamma[k][i][j]` of the second kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    d: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(d: usize) -> Self {
        Self { d, data: vec![0.0; d * d * d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.d + i) * self.d + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let d = self.d;
        self.data[(k * d + i) * d + j] = v;
    }

    /// Matrix `(Gamma_l)^k_m = Gamma^k_{l m}`, the connection along direction `l`.
    pub fn along(&self, l: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |k, m| self.get(k, l, m))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest `|Gamma^k_ij - Gamma^k_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.d {
            for i in 0..self.d {
                for j in 0..self.d {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }
}

fn metric(jet: &Jet2) -> DMatrix<f64> {
    let j = jet.jacobian();
    j.transpose() * j
}

/// Evaluates a chart on the central stencil `p ± h e_l` for every axis.
pub(crate) fn stencil<T>(
    chart: &dyn Chart,
    p: &[f64],
    h: f64,
    mut eval: impl FnMut(&[f64]) -> Result<T>,
) -> Result<Vec<(T, T)>> {
    let d = chart.dim();
    let mut out = Vec::with_capacity(d);
    for l in 0..d {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[l] += h;
        minus[l] -= h;
        for q in [&plus, &minus] {
            if !chart.domain().contains(q) {
                return Err(Error::StencilOutOfDomain(q.clone()));
            }
        }
        out.push((eval(&plus)?, eval(&minus)?));
    }
    Ok(out)
}

/// Christoffel symbols from central differences of the induced metric.
pub fn christoffel(chart: &dyn Chart, p: &[f64], h: f64) -> Result<Christoffel> {
    let d = chart.dim();
    let g = metric(&chart.jet(p)?);
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NonImmersion { coords: p.to_vec(), sigma_min: 0.0 })?;
    let dg: Vec<DMatrix<f64>> = stencil(chart, p, h, |q| Ok(metric(&chart.jet(q)?)))?
        .into_iter()
        .map(|(gp, gm)| (gp - gm) / (2.0 * h))
        .collect();
    let mut gamma = Christoffel::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..d)
                    .map(|l| g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                    .sum::<f64>()
                    * 0.5;
                gamma.set(k, i, j, v);
                gamma.set(k, j, i, v);
            }
        }
    }
    Ok(gamma)
}

/// Christoffel symbols read off the tangential part of the second partials:
/// `Gamma^k_ij = G^{kl} <f_ij, f_l>`.
pub fn christoffel_from_jet(jet: &Jet2) -> Christoffel {
    let d = jet.dim();
    let g_inv = metric(jet).try_inverse().unwrap_or_else(|| DMatrix::zeros(d, d));
    let mut gamma = Christoffel::zeros(d);
    for i in 0..d {
        for j in i..d {
            let proj: Vec<f64> = (0..d).map(|l| jet.second(i, j).dot(&jet.d1[l])).collect();
            for k in 0..d {
                let v: f64 = (0..d).map(|l| g_inv[(k, l)] * proj[l]).sum();
                gamma.set(k, i, j, v);
                gamma.set(k, j, i, v);
            }
        }
    }
    gamma
}

/// `(nabla_l S) = d_l S + [Gamma_l, S]` for an endomorphism field `S`.
pub fn covariant_derivative_endo(gamma: &Christoffel, l: usize, ds_l: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let gl = gamma.along(l);
    ds_l + &gl * s - s * &gl
}

/// A scalar field on chart coordinates.
pub trait ScalarField: Send + Sync {
    fn value(&self, p: &[f64]) -> f64;

    fn gradient(&self, p: &[f64], h: f64) -> Vec<f64> {
        (0..p.len())
            .map(|l| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[l] += h;
                b[l] -= h;
                (self.value(&a) - self.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    /// Central differences of [`gradient`](Self::gradient), symmetrized.
    /// Without an analytic gradient this nests two difference quotients, so
    /// callers should pass `h` of order `eps^(1/4)`.
    fn hessian(&self, p: &[f64], h: f64) -> DMatrix<f64> {
        let d = p.len();
        let mut hess = DMatrix::zeros(d, d);
        for l in 0..d {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[l] += h;
            b[l] -= h;
            let ga = self.gradient(&a, h);
            let gb = self.gradient(&b, h);
            for i in 0..d {
                hess[(i, l)] = (ga[i] - gb[i]) / (2.0 * h);
            }
        }
        (&hess + hess.transpose()) * 0.5
    }
}

/// Scalar field from a closure, with an optional analytic gradient.
pub struct FnScalar<F, G = fn(&[f64]) -> Vec<f64>> {
    value: F,
    gradient: Option<G>,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnScalar<F> {
    pub fn new(value: F) -> Self {
        Self { value, gradient: None }
    }
}

impl<F, G> FnScalar<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn with_gradient(value: F, gradient: G) -> Self {
        Self { value, gradient: Some(gradient) }
    }
}

impl<F, G> ScalarField for FnScalar<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn value(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    fn gradient(&self, p: &[f64], h: f64) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(p),
            None => (0..p.len())
                .map(|l| {
                    let mut a = p.to_vec();
                    let mut b = p.to_vec();
                    a[l] += h;
                    b[l] -= h;
                    ((self.value)(&a) - (self.value)(&b)) / (2.0 * h)
                })
                .collect(),
        }
    }
}

/// `Delta gamma = G^{ij} (d_i d_j gamma - Gamma^k_ij d_k gamma)` on a chart.
pub fn laplace_beltrami(chart: &dyn Chart, gamma: &dyn ScalarField, p: &[f64], h: f64) -> Result<f64> {
    let d = chart.dim();
    let jet = chart.jet(p)?;
    let g_inv = metric(&jet)
        .try_inverse()
        .ok_or_else(|| Error::NonImmersion { coords: p.to_vec(), sigma_min: 0.0 })?;
    let chr = christoffel(chart, p, h)?;
    let grad = gamma.gradient(p, h);
    let hess = gamma.hessian(p, h);
    let mut lap = 0.0;
    for i in 0..d {
        for j in 0..d {
            let conn: f64 = (0..d).map(|k| chr.get(k, i, j) * grad[k]).sum();
            lap += g_inv[(i, j)] * (hess[(i, j)] - conn);
        }
    }
    Ok(lap)
}

/// `||A J + J A|| / ||A||` in the metric operator norm; zero when `A = 0`.
pub fn anticommutation_residual(frame: &PointFrame, j: &DMatrix<f64>) -> f64 {
    let na = frame.operator_norm(&frame.a);
    if na == 0.0 {
        return 0.0;
    }
    frame.operator_norm(&(&frame.a * j + j * &frame.a)) / na
}

/// `max_l ||(nabla_l J)|| / (||f_l|| sqrt(d))` with finite-difference
/// Christoffel symbols and finite differences of the field `J`.
pub fn parallel_j_residual(
    chart: &dyn Chart,
    j_field: &(dyn Fn(&[f64]) -> DMatrix<f64> + Sync),
    p: &[f64],
    h: f64,
) -> Result<f64> {
    let frame = point_frame(&chart.jet(p)?)?;
    let chr = christoffel(chart, p, h)?;
    let j0 = j_field(p);
    let dj = stencil(chart, p, h, |q| Ok(j_field(q)))?;
    let d = chart.dim();
    let mut worst: f64 = 0.0;
    for (l, (jp, jm)) in dj.iter().enumerate() {
        let dj_l = (jp - jm) / (2.0 * h);
        let nabla = covariant_derivative_endo(&chr, l, &dj_l, &j0);
        worst = worst.max(frame.frobenius_norm(&nabla) / (frame.tangents[l].norm() * (d as f64).sqrt()));
    }
    Ok(worst)
}
