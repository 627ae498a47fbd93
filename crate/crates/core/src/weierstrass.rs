//! Weierstrass-type representation of minimal Kaehler hypersurfaces.
//!
//! From holomorphic seed data on a disc `U` the recursion
//!
//! ```text
//! phi_0     = int alpha_0 dz
//! alpha_r+1 = mu_r+1 * ((1 - phi_r.phi_r)/2, i(1 + phi_r.phi_r)/2, phi_r)
//! phi_r+1   = int alpha_r+1 dz
//! ```
//!
//! produces the isotropic curve `delta = alpha_n` in `C^(2n+1)`. The map
//!
//! ```text
//! F(z, w) = int sum_j b_j delta^(j) dz + sum_j w_j delta^(j-1)
//! ```
//!
//! is holomorphic on `U x W`, and `f = sqrt(2) Re F`, `fbar = sqrt(2) Im F`
//! are conjugate minimal immersions `M^(2n) -> R^(2n+1)`. All derivatives
//! come from exact series calculus.
//!
//! Real coordinates are `(x, y, u_1, v_1, ..)` with `z = z_0 + x + i y` and
//! `w_j = u_j + i v_j`. The complex structure carried by the charts is the
//! one for which `fbar_* = f_* o J`, namely `J d_x = -d_y`, `J d_y = d_x`
//! (and likewise on each `(u_j, v_j)` pair).

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, ChartRef, CoordBox, Jet2};
use crate::error::{Error, Result};
use crate::holo::{SeriesVector, TruncatedSeries, DEFAULT_TRUNC_ORDER};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative threshold under which a seed function counts as vanishing.
const NONZERO_TOL: f64 = 1e-12;

/// Integration constants. Missing entries default to zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConstants {
    /// `phi[r][k]`: value of component `k` of `phi_r` at the basepoint.
    #[serde(default)]
    pub phi: Vec<Vec<Complex64>>,
    /// Value of `int sum_j b_j delta^(j)` at the basepoint, per component.
    #[serde(default)]
    pub rep: Vec<Complex64>,
}

impl IntegrationConstants {
    fn phi_constants(&self, r: usize, dim: usize) -> Result<Vec<Complex64>> {
        match self.phi.get(r) {
            None => Ok(vec![ZERO; dim]),
            Some(c) if c.is_empty() => Ok(vec![ZERO; dim]),
            Some(c) if c.len() == dim => Ok(c.clone()),
            Some(c) => Err(Error::SeedValidation {
                invariant: format!("constants for phi_{r} have dimension 2r+1"),
                detail: format!("expected {dim}, found {}", c.len()),
            }),
        }
    }

    fn rep_constants(&self, dim: usize) -> Result<Vec<Complex64>> {
        match self.rep.len() {
            0 => Ok(vec![ZERO; dim]),
            l if l == dim => Ok(self.rep.clone()),
            l => Err(Error::SeedValidation {
                invariant: "representation constants have dimension 2n+1".into(),
                detail: format!("expected {dim}, found {l}"),
            }),
        }
    }
}

/// Generator data for one construction run.
#[derive(Debug, Clone, PartialEq)]
pub struct WeierstrassSeed {
    pub n: usize,
    pub alpha0: TruncatedSeries,
    pub mu: Vec<TruncatedSeries>,
    pub b: Vec<TruncatedSeries>,
    pub constants: IntegrationConstants,
    /// Radius of the disc `U` about the common basepoint.
    pub u_radius: f64,
    /// Half-widths of the box `W` in `(u_1, v_1, ..)`; `2(n-1)` entries.
    pub w_half_widths: Vec<f64>,
    pub trunc_order: usize,
}

impl WeierstrassSeed {
    pub fn basepoint(&self) -> Complex64 {
        self.alpha0.basepoint()
    }

    /// Sample points used to check the "nowhere zero" conditions: the
    /// center plus three rings of 16 points.
    pub fn validation_grid(&self) -> Vec<Complex64> {
        let c = self.basepoint();
        let mut pts = vec![c];
        for ring in 1..=3 {
            let r = self.u_radius * ring as f64 / 3.0;
            for k in 0..16 {
                pts.push(c + Complex64::from_polar(r, 2.0 * PI * k as f64 / 16.0));
            }
        }
        pts
    }

    fn check_nonvanishing(&self, s: &TruncatedSeries, invariant: &str) -> Result<()> {
        let grid = self.validation_grid();
        let vals: Vec<f64> = grid.iter().map(|&z| s.eval(z).norm()).collect();
        let scale = s.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let (k, min) = vals
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        if scale == 0.0 || min <= NONZERO_TOL * scale {
            return Err(Error::SeedValidation {
                invariant: invariant.to_string(),
                detail: format!("|value| = {min:e} at z = {}", grid[k]),
            });
        }
        Ok(())
    }

    /// Checks the seed invariants: counts, shared basepoint, domain shape and
    /// the nonvanishing of `alpha_0`, every `mu_r` and `b_{n-1}` on the disc.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::SeedValidation { invariant: "n >= 1".into(), detail: "n = 0".into() });
        }
        if self.mu.len() != n {
            return Err(Error::SeedValidation {
                invariant: "one mu_r for each r = 1..n".into(),
                detail: format!("expected {n}, found {}", self.mu.len()),
            });
        }
        if self.b.len() != n {
            return Err(Error::SeedValidation {
                invariant: "one b_j for each j = 0..n-1".into(),
                detail: format!("expected {n}, found {}", self.b.len()),
            });
        }
        if self.w_half_widths.len() != 2 * (n - 1) {
            return Err(Error::SeedValidation {
                invariant: "W is a box in C^(n-1)".into(),
                detail: format!("expected {} half-widths, found {}", 2 * (n - 1), self.w_half_widths.len()),
            });
        }
        if self.w_half_widths.iter().any(|&h| !(h > 0.0)) || !(self.u_radius > 0.0) {
            return Err(Error::SeedValidation {
                invariant: "U and W are open sets containing the basepoint and the origin".into(),
                detail: "nonpositive radius or half-width".into(),
            });
        }
        if self.trunc_order < n + 1 {
            return Err(Error::SeedValidation {
                invariant: "truncation order exceeds n".into(),
                detail: format!("order {} for n = {n}", self.trunc_order),
            });
        }
        let base = self.basepoint();
        for s in self.mu.iter().chain(&self.b) {
            if s.basepoint() != base {
                return Err(Error::Domain(format!(
                    "seed series expanded about {} and {}; recentering is not supported",
                    base,
                    s.basepoint()
                )));
            }
        }
        self.check_nonvanishing(&self.alpha0, "alpha_0 is a nonzero holomorphic function")?;
        for (r, mu) in self.mu.iter().enumerate() {
            self.check_nonvanishing(mu, &format!("mu_{} is a nonzero holomorphic function", r + 1))?;
        }
        self.check_nonvanishing(&self.b[n - 1], "b_{n-1} is never zero")?;
        Ok(())
    }

    fn truncated(&self, s: &TruncatedSeries) -> TruncatedSeries {
        s.with_order(self.trunc_order)
    }
}

/// The recursion data `alpha_r`, `phi_r` and the derivatives of `delta = alpha_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassChain {
    pub alphas: Vec<SeriesVector>,
    pub phis: Vec<SeriesVector>,
    /// `delta^(0) ..= delta^(n)`; the last one is needed for second derivatives.
    pub delta_derivs: Vec<SeriesVector>,
}

impl WeierstrassChain {
    pub fn delta(&self) -> &SeriesVector {
        &self.delta_derivs[0]
    }
}

/// Runs the recursion on a validated seed.
pub fn build_chain(seed: &WeierstrassSeed) -> Result<WeierstrassChain> {
    seed.validate()?;
    let base = seed.basepoint();
    let alpha0 = SeriesVector::new(vec![seed.truncated(&seed.alpha0)])?;
    let phi0 = alpha0.integrate(&seed.constants.phi_constants(0, 1)?)?;
    let mut alphas = vec![alpha0];
    let mut phis = vec![phi0];
    for r in 0..seed.n {
        let phi = &phis[r];
        let sq = phi.vdot(phi)?;
        let one = TruncatedSeries::constant(base, ONE, sq.order());
        let first = one.checked_sub(&sq)?.scale(Complex64::new(0.5, 0.0));
        let second = one.checked_add(&sq)?.scale(I * 0.5);
        let mut comps = vec![first, second];
        comps.extend(phi.components().iter().cloned());
        let v = SeriesVector::new(comps)?;
        let alpha = v.scale_by(&seed.truncated(&seed.mu[r]))?;
        let phi_next = alpha.integrate(&seed.constants.phi_constants(r + 1, alpha.dim())?)?;
        alphas.push(alpha);
        phis.push(phi_next);
    }
    let mut delta_derivs = vec![alphas[seed.n].clone()];
    for j in 0..seed.n {
        let next = delta_derivs[j].diff();
        delta_derivs.push(next);
    }
    Ok(WeierstrassChain { alphas, phis, delta_derivs })
}

/// Complex 2-jet of the holomorphic representative in the variables `(z, w_1, ..)`.
#[derive(Debug, Clone)]
pub struct HoloJet {
    pub value: Vec<Complex64>,
    /// `first[a]`: derivative in complex variable `a` (0 is `z`).
    pub first: Vec<Vec<Complex64>>,
    /// `second[a][b]`.
    pub second: Vec<Vec<Vec<Complex64>>>,
    pub in_domain: bool,
}

/// Evaluator for `F(z, w) = int sum_j b_j delta^(j) dz + sum_j w_j delta^(j-1)`.
#[derive(Debug, Clone)]
pub struct HolomorphicRep {
    n: usize,
    basepoint: Complex64,
    u_radius: f64,
    w_box: CoordBox,
    deltas: Vec<SeriesVector>,
    /// `S = sum_j b_j delta^(j)`, its derivative and its primitive.
    s: SeriesVector,
    s_prime: SeriesVector,
    integral: SeriesVector,
}

/// Builds the holomorphic representative from a seed and its chain.
pub fn holomorphic_rep(seed: &WeierstrassSeed, chain: &WeierstrassChain) -> Result<HolomorphicRep> {
    let n = seed.n;
    let mut s: Option<SeriesVector> = None;
    for j in 0..n {
        let term = chain.delta_derivs[j].scale_by(&seed.truncated(&seed.b[j]))?;
        s = Some(match s {
            None => term,
            Some(acc) => SeriesVector::truncating(
                acc.components()
                    .iter()
                    .zip(term.components())
                    .map(|(a, b)| a.checked_add(b))
                    .collect::<Result<_>>()?,
            )?,
        });
    }
    let s = s.expect("n >= 1");
    let dim = s.dim();
    let integral = s.integrate(&seed.constants.rep_constants(dim)?)?;
    Ok(HolomorphicRep {
        n,
        basepoint: seed.basepoint(),
        u_radius: seed.u_radius,
        w_box: CoordBox::symmetric(&seed.w_half_widths),
        deltas: chain.delta_derivs.clone(),
        s_prime: s.diff(),
        s,
        integral,
    })
}

impl HolomorphicRep {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Target dimension `2n + 1`.
    pub fn target_dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn basepoint(&self) -> Complex64 {
        self.basepoint
    }

    pub fn u_radius(&self) -> f64 {
        self.u_radius
    }

    /// Evaluates `F` and its complex first and second derivatives.
    pub fn eval(&self, z: Complex64, w: &[Complex64]) -> Result<HoloJet> {
        let n = self.n;
        if w.len() != n - 1 {
            return Err(Error::Dimension { expected: n - 1, found: w.len() });
        }
        let dim = self.target_dim();
        let deltas: Vec<Vec<Complex64>> = self.deltas.iter().map(|d| d.eval(z)).collect();
        let axpy = |acc: &mut Vec<Complex64>, c: Complex64, x: &[Complex64]| {
            for (a, b) in acc.iter_mut().zip(x) {
                *a += c * b;
            }
        };

        let mut value = self.integral.eval(z);
        let mut fz = self.s.eval(z);
        let mut fzz = self.s_prime.eval(z);
        for (j, &wj) in w.iter().enumerate() {
            // w_{j+1} multiplies delta^(j)
            axpy(&mut value, wj, &deltas[j]);
            axpy(&mut fz, wj, &deltas[j + 1]);
            axpy(&mut fzz, wj, &deltas[j + 2]);
        }
        let mut first = vec![fz];
        first.extend((0..n - 1).map(|j| deltas[j].clone()));

        let zero = vec![ZERO; dim];
        let mut second = vec![vec![zero.clone(); n]; n];
        second[0][0] = fzz;
        for j in 0..n - 1 {
            second[0][j + 1] = deltas[j + 1].clone();
            second[j + 1][0] = deltas[j + 1].clone();
        }

        let in_u = (z - self.basepoint).norm() <= self.u_radius;
        let wr: Vec<f64> = w.iter().flat_map(|c| [c.re, c.im]).collect();
        Ok(HoloJet { value, first, second, in_domain: in_u && self.w_box.contains(&wr) })
    }

    /// Complex point of `U x W` for real chart coordinates.
    pub fn complex_point(&self, p: &[f64]) -> (Complex64, Vec<Complex64>) {
        let z = self.basepoint + Complex64::new(p[0], p[1]);
        let w = p[2..].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        (z, w)
    }
}

/// Which real combination of `F` a chart exposes: `sqrt(2)(c Re F + s Im F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Part {
    Real,
    Imag,
    Angle(f64),
}

impl Part {
    fn weights(self) -> (f64, f64) {
        match self {
            Part::Real => (1.0, 0.0),
            Part::Imag => (0.0, 1.0),
            Part::Angle(t) => (t.cos(), t.sin()),
        }
    }
}

/// Real chart `sqrt(2) (cos t Re F + sin t Im F)` on `U x W`.
#[derive(Debug, Clone)]
pub struct WeierstrassChart {
    rep: Arc<HolomorphicRep>,
    part: Part,
    domain: CoordBox,
}

impl WeierstrassChart {
    pub fn new(rep: Arc<HolomorphicRep>, part: Part) -> Self {
        let r = rep.u_radius / SQRT_2;
        let mut half = vec![r, r];
        half.extend(rep.w_box.hi.iter().copied());
        Self { domain: CoordBox::symmetric(&half), rep, part }
    }

    pub fn rep(&self) -> &Arc<HolomorphicRep> {
        &self.rep
    }

    pub fn part(&self) -> Part {
        self.part
    }
}

/// Block matrix with `J d_x = -d_y`, `J d_y = d_x` on every coordinate pair.
pub fn coordinate_complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        j[(2 * a, 2 * a + 1)] = 1.0;
        j[(2 * a + 1, 2 * a)] = -1.0;
    }
    j
}

/// `J_theta = cos(theta) I + sin(theta) J`.
pub fn rotated_complex_structure(n: usize, theta: f64) -> DMatrix<f64> {
    DMatrix::identity(2 * n, 2 * n) * theta.cos() + coordinate_complex_structure(n) * theta.sin()
}

impl Chart for WeierstrassChart {
    fn dim(&self) -> usize {
        2 * self.rep.n
    }

    fn ambient_dim(&self) -> usize {
        self.rep.target_dim()
    }

    fn domain(&self) -> &CoordBox {
        &self.domain
    }

    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        let d = self.dim();
        if p.len() != d {
            return Err(Error::Dimension { expected: d, found: p.len() });
        }
        let (z, w) = self.rep.complex_point(p);
        let hj = self.rep.eval(z, &w)?;
        let (c, s) = self.part.weights();
        let real = |x: &[Complex64], phase: Complex64| {
            DVector::from_iterator(
                x.len(),
                x.iter().map(|v| {
                    let v = phase * v;
                    SQRT_2 * (c * v.re + s * v.im)
                }),
            )
        };
        // d/dx_a = F_a, d/dy_a = i F_a.
        let phase = |k: usize| if k % 2 == 0 { ONE } else { I };
        let d1 = (0..d).map(|k| real(&hj.first[k / 2], phase(k))).collect();
        let mut d2 = Vec::with_capacity(d * d);
        for k in 0..d {
            for l in 0..d {
                d2.push(real(&hj.second[k / 2][l / 2], phase(k) * phase(l)));
            }
        }
        let mut jet = Jet2::new(p.to_vec(), real(&hj.value, ONE), d1, d2);
        jet.in_domain = hj.in_domain;
        Ok(jet)
    }

    fn coord_names(&self) -> Vec<String> {
        let mut names = vec!["x".to_string(), "y".to_string()];
        for j in 1..self.rep.n {
            names.push(format!("u{j}"));
            names.push(format!("v{j}"));
        }
        names
    }

    fn complex_structure(&self) -> Option<DMatrix<f64>> {
        Some(coordinate_complex_structure(self.rep.n))
    }
}

/// A seed together with its chain and holomorphic representative.
#[derive(Debug, Clone)]
pub struct WeierstrassSurface {
    pub seed: WeierstrassSeed,
    pub chain: WeierstrassChain,
    rep: Arc<HolomorphicRep>,
}

impl WeierstrassSurface {
    pub fn new(seed: WeierstrassSeed) -> Result<Self> {
        let chain = build_chain(&seed)?;
        let rep = Arc::new(holomorphic_rep(&seed, &chain)?);
        Ok(Self { seed, chain, rep })
    }

    pub fn rep(&self) -> &Arc<HolomorphicRep> {
        &self.rep
    }

    /// `f = sqrt(2) Re F`.
    pub fn f(&self) -> ChartRef {
        Arc::new(WeierstrassChart::new(self.rep.clone(), Part::Real))
    }

    /// `fbar = sqrt(2) Im F`.
    pub fn fbar(&self) -> ChartRef {
        Arc::new(WeierstrassChart::new(self.rep.clone(), Part::Imag))
    }

    /// `f_theta = cos(theta) f + sin(theta) fbar` for `theta` in `[0, pi)`.
    pub fn associated(&self, theta: f64) -> Result<ChartRef> {
        if !(0.0..PI).contains(&theta) {
            return Err(Error::Domain(format!("theta = {theta} outside [0, pi)")));
        }
        let part = if theta == 0.0 {
            Part::Real
        } else if theta == FRAC_PI_2 {
            Part::Imag
        } else {
            Part::Angle(theta)
        };
        Ok(Arc::new(WeierstrassChart::new(self.rep.clone(), part)))
    }
}

pub fn immersion_f(seed: &WeierstrassSeed) -> Result<ChartRef> {
    Ok(WeierstrassSurface::new(seed.clone())?.f())
}

pub fn conjugate_fbar(seed: &WeierstrassSeed) -> Result<ChartRef> {
    Ok(WeierstrassSurface::new(seed.clone())?.fbar())
}

pub fn associated(seed: &WeierstrassSeed, theta: f64) -> Result<ChartRef> {
    WeierstrassSurface::new(seed.clone())?.associated(theta)
}

// ---------------------------------------------------------------------------
// JSON seed format

/// Complex numbers travel as `[re, im]`.
pub type ComplexPair = [f64; 2];

fn to_c(p: &ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn from_c(c: &Complex64) -> ComplexPair {
    [c.re, c.im]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    #[serde(default)]
    pub basepoint: ComplexPair,
    pub coeffs: Vec<ComplexPair>,
}

impl SeriesSpec {
    pub fn to_series(&self) -> Result<TruncatedSeries> {
        TruncatedSeries::new(to_c(&self.basepoint), self.coeffs.iter().map(to_c).collect())
    }

    pub fn from_series(s: &TruncatedSeries) -> Self {
        Self { basepoint: from_c(&s.basepoint()), coeffs: s.coeffs().iter().map(from_c).collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSpec {
    #[serde(default)]
    pub phi: Vec<Vec<ComplexPair>>,
    #[serde(default)]
    pub rep: Vec<ComplexPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub u_radius: f64,
    #[serde(default)]
    pub w_half_widths: Vec<f64>,
}

/// JSON form of a [`WeierstrassSeed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub n: usize,
    pub alpha0: SeriesSpec,
    pub mu: Vec<SeriesSpec>,
    pub b: Vec<SeriesSpec>,
    #[serde(default)]
    pub constants: ConstantsSpec,
    pub domain: DomainSpec,
    #[serde(default = "default_trunc_order")]
    pub trunc_order: usize,
}

fn default_trunc_order() -> usize {
    DEFAULT_TRUNC_ORDER
}

impl SeedSpec {
    pub fn to_seed(&self) -> Result<WeierstrassSeed> {
        let series = |v: &[SeriesSpec]| v.iter().map(SeriesSpec::to_series).collect::<Result<Vec<_>>>();
        Ok(WeierstrassSeed {
            n: self.n,
            alpha0: self.alpha0.to_series()?,
            mu: series(&self.mu)?,
            b: series(&self.b)?,
            constants: IntegrationConstants {
                phi: self.constants.phi.iter().map(|c| c.iter().map(to_c).collect()).collect(),
                rep: self.constants.rep.iter().map(to_c).collect(),
            },
            u_radius: self.domain.u_radius,
            w_half_widths: self.domain.w_half_widths.clone(),
            trunc_order: self.trunc_order,
        })
    }

    pub fn from_seed(seed: &WeierstrassSeed) -> Self {
        let series = |v: &[TruncatedSeries]| v.iter().map(SeriesSpec::from_series).collect();
        Self {
            n: seed.n,
            alpha0: SeriesSpec::from_series(&seed.alpha0),
            mu: series(&seed.mu),
            b: series(&seed.b),
            constants: ConstantsSpec {
                phi: seed.constants.phi.iter().map(|c| c.iter().map(from_c).collect()).collect(),
                rep: seed.constants.rep.iter().map(from_c).collect(),
            },
            domain: DomainSpec { u_radius: seed.u_radius, w_half_widths: seed.w_half_widths.clone() },
            trunc_order: seed.trunc_order,
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in seeds

pub const BUILTIN_SEEDS: &[&str] = &["enneper", "catenoid", "m4r5"];

fn constant_series(base: Complex64, c: f64) -> TruncatedSeries {
    TruncatedSeries::constant(base, Complex64::new(c, 0.0), 0)
}

/// Enneper data: `n = 1`, `alpha_0 = mu_1 = b_0 = 1` at the origin.
pub fn enneper_seed() -> WeierstrassSeed {
    let o = ZERO;
    WeierstrassSeed {
        n: 1,
        alpha0: constant_series(o, 1.0),
        mu: vec![constant_series(o, 1.0)],
        b: vec![constant_series(o, 1.0)],
        constants: IntegrationConstants::default(),
        u_radius: 1.0,
        w_half_widths: vec![],
        trunc_order: DEFAULT_TRUNC_ORDER,
    }
}

/// Catenoid data: `phi_0 = z`, `b_0 mu_1 = z^-2`, expanded about `z = 2`.
pub fn catenoid_seed() -> WeierstrassSeed {
    let base = Complex64::new(2.0, 0.0);
    let k_max = DEFAULT_TRUNC_ORDER;
    // z^-2 = sum_k (-1)^k (k+1) (z-2)^k / 2^(k+2)
    let coeffs: Vec<f64> = (0..=k_max)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * (k as f64 + 1.0) / 2f64.powi(k as i32 + 2)
        })
        .collect();
    WeierstrassSeed {
        n: 1,
        alpha0: constant_series(base, 1.0),
        mu: vec![constant_series(base, 1.0)],
        b: vec![TruncatedSeries::from_real(base, &coeffs).expect("nonempty")],
        constants: IntegrationConstants { phi: vec![vec![base]], rep: vec![] },
        u_radius: 0.5,
        w_half_widths: vec![],
        trunc_order: DEFAULT_TRUNC_ORDER,
    }
}

/// Four-dimensional example in `R^5`: `n = 2`, `alpha_0 = mu_1 = mu_2 = 1`,
/// `b_0 = 0`, `b_1 = 1`.
pub fn m4r5_seed() -> WeierstrassSeed {
    let o = ZERO;
    WeierstrassSeed {
        n: 2,
        alpha0: constant_series(o, 1.0),
        mu: vec![constant_series(o, 1.0), constant_series(o, 1.0)],
        b: vec![constant_series(o, 0.0), constant_series(o, 1.0)],
        constants: IntegrationConstants::default(),
        u_radius: 0.5,
        w_half_widths: vec![0.3, 0.3],
        trunc_order: DEFAULT_TRUNC_ORDER,
    }
}

pub fn builtin_seed(name: &str) -> Option<WeierstrassSeed> {
    match name {
        "enneper" => Some(enneper_seed()),
        "catenoid" => Some(catenoid_seed()),
        "m4r5" => Some(m4r5_seed()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_frame;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-14
    }

    fn coeffs_match(s: &TruncatedSeries, expected: &[Complex64]) -> bool {
        s.coeffs().iter().enumerate().all(|(k, x)| close(*x, expected.get(k).copied().unwrap_or(ZERO)))
    }

    #[test]
    fn chain_n1_direct_substitution() {
        let chain = build_chain(&enneper_seed()).unwrap();
        assert!(coeffs_match(&chain.phis[0].components()[0], &[ZERO, ONE]));
        let a1 = &chain.alphas[1];
        assert_eq!(a1.dim(), 3);
        assert!(coeffs_match(&a1.components()[0], &[c(0.5, 0.0), ZERO, c(-0.5, 0.0)]));
        assert!(coeffs_match(&a1.components()[1], &[c(0.0, 0.5), ZERO, c(0.0, 0.5)]));
        assert!(coeffs_match(&a1.components()[2], &[ZERO, ONE]));
        let sq = a1.vdot(a1).unwrap();
        assert!(sq.coeffs().iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn chain_dimensions_and_primitives() {
        let seed = m4r5_seed();
        let chain = build_chain(&seed).unwrap();
        for (r, a) in chain.alphas.iter().enumerate() {
            assert_eq!(a.dim(), 2 * r + 1);
        }
        assert_eq!(chain.alphas[2].dim(), 5);
        for (a, p) in chain.alphas.iter().zip(&chain.phis) {
            let back = p.diff();
            for (x, y) in back.components().iter().zip(a.components()) {
                assert!(x.coeffs().iter().zip(y.coeffs()).all(|(u, v)| close(*u, *v)));
            }
        }
        assert_eq!(chain.delta_derivs.len(), 3);
    }

    #[test]
    fn higher_isotropy_of_delta() {
        // delta^(j) . delta^(k) = 0 for j + k <= 2n - 2 makes F_a . F_b = 0.
        let chain = build_chain(&m4r5_seed()).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let s = chain.delta_derivs[j].vdot(&chain.delta_derivs[k]).unwrap();
                assert!(s.coeffs().iter().all(|x| x.norm() < 1e-14), "j={j} k={k}");
            }
        }
    }

    #[test]
    fn enneper_representative_closed_form() {
        let surf = WeierstrassSurface::new(enneper_seed()).unwrap();
        for z in [c(0.3, -0.2), c(-0.5, 0.4), c(0.0, 0.9)] {
            let hj = surf.rep().eval(z, &[]).unwrap();
            let z3 = z * z * z;
            let expected = [(z - z3 / 3.0) / 2.0, I * (z + z3 / 3.0) / 2.0, z * z / 2.0];
            for (a, b) in hj.value.iter().zip(expected) {
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn w_derivatives_are_delta() {
        let surf = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let z = c(0.1, 0.2);
        let hj = surf.rep().eval(z, &[c(0.05, -0.1)]).unwrap();
        assert_eq!(hj.first[1], surf.chain.delta().eval(z));
        assert!(hj.second[1][1].iter().all(|x| *x == ZERO));
    }

    #[test]
    fn enneper_metric_at_origin() {
        let f = immersion_f(&enneper_seed()).unwrap();
        let frame = point_frame(&f.jet(&[0.0, 0.0]).unwrap()).unwrap();
        assert!((&frame.g - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);
        assert!(frame.a.trace().abs() < 1e-12);
        assert!((frame.eigenvalues[0] + frame.eigenvalues[1]).abs() < 1e-12);
        assert!(frame.eigenvalues[0].abs() > 0.1);
    }

    #[test]
    fn second_partials_symmetric() {
        let surf = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let jet = surf.f().jet(&[0.1, -0.2, 0.05, 0.1]).unwrap();
        assert_eq!(jet.hessian_asymmetry(), 0.0);
    }

    #[test]
    fn f_and_fbar_reassemble_f() {
        let surf = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let p = [0.1, -0.2, 0.05, 0.1];
        let (z, w) = surf.rep().complex_point(&p);
        let hj = surf.rep().eval(z, &w).unwrap();
        let f = surf.f().value(&p).unwrap();
        let g = surf.fbar().value(&p).unwrap();
        for k in 0..5 {
            let rebuilt = c(f[k], g[k]) / SQRT_2;
            assert!((rebuilt - hj.value[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn associated_endpoints_exact() {
        let surf = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let p = [0.1, -0.2, 0.05, 0.1];
        assert_eq!(surf.associated(0.0).unwrap().jet(&p).unwrap(), surf.f().jet(&p).unwrap());
        assert_eq!(surf.associated(FRAC_PI_2).unwrap().jet(&p).unwrap(), surf.fbar().jet(&p).unwrap());
        assert!(surf.associated(PI).is_err());
    }

    #[test]
    fn fbar_differential_is_f_composed_with_j() {
        let surf = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let p = [0.2, 0.1, -0.1, 0.2];
        let jf = surf.f().jet(&p).unwrap().jacobian();
        let jg = surf.fbar().jet(&p).unwrap().jacobian();
        let j = coordinate_complex_structure(2);
        assert!((jg - jf * j).amax() < 1e-14);
    }

    #[test]
    fn invalid_seeds_rejected() {
        let mut seed = m4r5_seed();
        seed.b[1] = constant_series(ZERO, 0.0);
        match build_chain(&seed) {
            Err(Error::SeedValidation { invariant, .. }) => assert_eq!(invariant, "b_{n-1} is never zero"),
            other => panic!("unexpected {other:?}"),
        }
        let mut seed = enneper_seed();
        // alpha_0 = z vanishes at the basepoint
        seed.alpha0 = TruncatedSeries::from_real(ZERO, &[0.0, 1.0]).unwrap();
        assert!(matches!(build_chain(&seed), Err(Error::SeedValidation { .. })));
        let mut seed = enneper_seed();
        seed.mu = vec![];
        assert!(build_chain(&seed).is_err());
        let mut seed = enneper_seed();
        seed.b[0] = TruncatedSeries::from_real(c(1.0, 0.0), &[1.0]).unwrap();
        assert!(matches!(build_chain(&seed), Err(Error::Domain(_))));
    }

    #[test]
    fn seed_json_round_trip() {
        let seed = catenoid_seed();
        let json = serde_json::to_string(&SeedSpec::from_seed(&seed)).unwrap();
        let back: SeedSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_seed().unwrap(), seed);
    }

    #[test]
    fn minimal_json_seed_uses_defaults() {
        let json = r#"{"n":1,"alpha0":{"coeffs":[[1,0]]},"mu":[{"coeffs":[[1,0]]}],
            "b":[{"coeffs":[[1,0]]}],"domain":{"u_radius":1.0}}"#;
        let spec: SeedSpec = serde_json::from_str(json).unwrap();
        let seed = spec.to_seed().unwrap();
        assert_eq!(seed.trunc_order, DEFAULT_TRUNC_ORDER);
        assert_eq!(seed, enneper_seed());
    }
}
