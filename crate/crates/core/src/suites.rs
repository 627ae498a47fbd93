//! Named identity suites over a Weierstrass surface, and the negative
//! controls that must fail them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bending::{
    b_by_bat, b_by_formula, b_endomorphism, bending_residual, classify_triviality, codazzi_residual,
    decompose_against_conjugate, default_fd_step, fd_tolerance, fundamental_equation_residual,
    gauss_preservation_residual, make_trivial, nullity_in_kernel_of_b, parallel_tstar_residual, rotation_coefficient,
    three_route_agreement, variation_first_order_residual, BendingField, Provenance, TrivialData, ANALYTIC_TOL,
    CONTROL_THRESHOLD, EPS_REL, TRIVIALITY_TOL,
};
use crate::chart::{AffineImage, ChartRef};
use crate::error::{Error, Result};
use crate::gausspar::{
    clifford_default_support, clifford_surface, gauss_map_control_residual, great_sphere_surface, minimality_criterion,
    quotient_slice, round_trip_residuals, sample_grid, SphereGamma, ROUND_TRIP_TOL,
};
use crate::geometry::{anticommutation_residual, parallel_j_residual, point_frame, rank_and_nullity, RANK_TOL};
use crate::par::try_map_points;
use crate::report::ResidualReport;
use crate::weierstrass::WeierstrassSurface;

/// Identity suites in run order.
pub const SUITES: &[&str] = &[
    "mean_curvature",
    "rank",
    "kaehler",
    "associated_family",
    "bending",
    "variation",
    "gauss_preservation",
    "tstar_parallel",
    "bat",
    "fundamental_equation",
    "codazzi",
    "b_routes",
    "nullity",
    "rotation",
    "triviality",
    "gauss_param",
];

/// Negative controls; each must exceed its threshold.
pub const CONTROLS: &[&str] = &[
    "control/stretching",
    "control/fundamental_b_eq_a",
    "control/codazzi_scaled_a",
    "control/conjugate_triviality",
    "control/gauss_map_tangent",
    "control/minimality_constant_support",
];

/// Minimal trace relative to `|A|`.
pub const MEAN_CURVATURE_TOL: f64 = 1e-8;
pub const ASSOCIATED_TOL: f64 = 1e-10;
pub const ROTATION_TOL: f64 = 1e-6;

pub fn is_control(name: &str) -> bool {
    name.starts_with("control/")
}

/// Expands `all` and `controls`, rejects unknown names, removes duplicates.
pub fn expand_suites(names: &[String]) -> Result<Vec<&'static str>> {
    let mut out: Vec<&'static str> = Vec::new();
    let mut push = |s: &'static str| {
        if !out.contains(&s) {
            out.push(s);
        }
    };
    for n in names {
        match n.as_str() {
            "all" => SUITES.iter().chain(CONTROLS).for_each(|s| push(s)),
            "controls" => CONTROLS.iter().for_each(|s| push(s)),
            other => match SUITES.iter().chain(CONTROLS).find(|s| **s == other) {
                Some(s) => push(s),
                None => return Err(Error::Validation(format!("unknown suite {other:?}"))),
            },
        }
    }
    Ok(out)
}

/// Inputs shared by every suite.
pub struct SuiteContext {
    pub surface: WeierstrassSurface,
    pub f: ChartRef,
    pub conjugate: BendingField,
    pub points: Vec<Vec<f64>>,
    pub h: f64,
    pub eps_rel: f64,
    /// Per-identity tolerance overrides, keyed by report identity.
    pub tolerances: BTreeMap<String, f64>,
}

impl SuiteContext {
    pub fn new(surface: WeierstrassSurface, points: Vec<Vec<f64>>) -> Self {
        let f = surface.f();
        let conjugate = BendingField::conjugate(&surface);
        Self { surface, f, conjugate, points, h: default_fd_step(), eps_rel: EPS_REL, tolerances: BTreeMap::new() }
    }

    fn n(&self) -> usize {
        self.surface.rep().n()
    }

    fn per_point(&self, g: impl Fn(&[f64]) -> Result<f64> + Sync + Send) -> Result<Vec<f64>> {
        try_map_points(&self.points, g)
    }

    fn finish(&self, r: ResidualReport) -> ResidualReport {
        match self.tolerances.get(&r.identity) {
            Some(t) => r.with_tolerance(*t),
            None => r,
        }
    }
}

fn not_applicable(identity: &str, skipped: usize) -> ResidualReport {
    let mut r = ResidualReport::new(identity, &[], f64::NAN).with_skipped(skipped);
    r.pass = true;
    r
}

/// Runs one named suite and returns its reports.
pub fn run_suite(ctx: &SuiteContext, name: &str) -> Result<Vec<ResidualReport>> {
    let f = ctx.f.as_ref();
    let t = &ctx.conjugate;
    let pts = &ctx.points;
    let h = ctx.h;
    let fd_tol = fd_tolerance(h);
    let reports = match name {
        "mean_curvature" => {
            let r = ctx.per_point(|p| {
                let fr = point_frame(&f.jet(p)?)?;
                let na = fr.operator_norm(&fr.a);
                Ok(if na == 0.0 { 0.0 } else { fr.a.trace().abs() / na })
            })?;
            vec![ResidualReport::new("mean_curvature", &r, MEAN_CURVATURE_TOL)]
        }
        "rank" => {
            let r = ctx.per_point(|p| {
                let info = rank_and_nullity(&point_frame(&f.jet(p)?)?, RANK_TOL);
                Ok(if info.rank == 2 && !info.indeterminate { 0.0 } else { 1.0 })
            })?;
            vec![ResidualReport::new("rank/exactly_two", &r, 0.5)]
        }
        "kaehler" => {
            let j = f.complex_structure().ok_or_else(|| Error::Precondition("chart has no complex structure".into()))?;
            let anti = ctx.per_point(|p| Ok(anticommutation_residual(&point_frame(&f.jet(p)?)?, &j)))?;
            let jf = |_: &[f64]| j.clone();
            let par = ctx.per_point(|p| parallel_j_residual(f, &jf, p, h))?;
            vec![
                ResidualReport::new("kaehler/anticommutation", &anti, ANALYTIC_TOL),
                ResidualReport::new("kaehler/parallel_j", &par, fd_tol),
            ]
        }
        "associated_family" => {
            let mut metric = Vec::new();
            let mut normal = Vec::new();
            for k in 1..6 {
                let ft = ctx.surface.associated(k as f64 * PI / 6.0)?;
                let pairs = try_map_points(pts, |p| -> Result<(f64, f64)> {
                    let (a, b) = (point_frame(&f.jet(p)?)?, point_frame(&ft.jet(p)?)?);
                    Ok(((&a.g - &b.g).amax() / a.g.amax(), (&a.normal - &b.normal).norm()))
                })?;
                metric.extend(pairs.iter().map(|x| x.0));
                normal.extend(pairs.iter().map(|x| x.1));
            }
            vec![
                ResidualReport::new("associated_family/metric", &metric, ASSOCIATED_TOL),
                ResidualReport::new("associated_family/normal", &normal, ASSOCIATED_TOL),
            ]
        }
        "bending" => vec![bending_residual(f, t, pts)?],
        "variation" => {
            let v = variation_first_order_residual(f, t, pts, ctx.eps_rel, h)?;
            vec![v.first_order, v.exact_identity]
        }
        "gauss_preservation" => {
            let g = gauss_preservation_residual(f, t, pts, ctx.eps_rel, h)?;
            vec![g.tangency, g.normal_variation]
        }
        "tstar_parallel" => {
            let r = ctx.per_point(|p| parallel_tstar_residual(f, t, p, h))?;
            vec![ResidualReport::new("tstar_parallel", &r, fd_tol)]
        }
        "bat" => {
            let r = ctx.per_point(|p| {
                let formula = b_by_formula(f, t, p)?;
                let (bat, _) = b_by_bat(f, t, p)?;
                Ok(bat.deviation(&formula, formula.b.amax()))
            })?;
            vec![ResidualReport::new("bat", &r, ANALYTIC_TOL)]
        }
        "fundamental_equation" => {
            let r = ctx.per_point(|p| {
                let fr = point_frame(&f.jet(p)?)?;
                Ok(fundamental_equation_residual(&fr, &fr.a, &b_endomorphism(f, t, p)?))
            })?;
            vec![ResidualReport::new("fundamental_equation", &r, ANALYTIC_TOL)]
        }
        "codazzi" => {
            let a_field = |q: &[f64]| Ok(point_frame(&f.jet(q)?)?.a);
            let b_field = |q: &[f64]| b_endomorphism(f, t, q);
            let ra = ctx.per_point(|p| codazzi_residual(f, &a_field, p, h))?;
            let rb = ctx.per_point(|p| codazzi_residual(f, &b_field, p, h))?;
            vec![ResidualReport::new("codazzi/a", &ra, fd_tol), ResidualReport::new("codazzi/b", &rb, fd_tol)]
        }
        "b_routes" => {
            let r = ctx.per_point(|p| Ok(three_route_agreement(f, t, p, ctx.eps_rel)?.max()))?;
            let tol = 100.0 * (ctx.eps_rel * ctx.eps_rel).max(h * h);
            vec![ResidualReport::new("b_routes", &r, tol)]
        }
        "nullity" => {
            let r = ctx.per_point(|p| nullity_in_kernel_of_b(f, t, p))?;
            vec![ResidualReport::new("nullity/kernel_of_b", &r, ANALYTIC_TOL)]
        }
        "rotation" => {
            let fits = try_map_points(pts, |p| rotation_coefficient(f, t, p))?;
            let cs: Vec<f64> = fits.iter().map(|x| x.c).collect();
            let dev: Vec<f64> = fits.iter().map(|x| (x.c - 1.0).abs().max(x.residual)).collect();
            let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            vec![
                ResidualReport::new("rotation/c_equals_one", &dev, ROTATION_TOL),
                ResidualReport::new("rotation/spread", &[hi - lo], ROTATION_TOL),
            ]
        }
        "triviality" => {
            let m = f.ambient_dim();
            let mut d = DMatrix::zeros(m, m);
            d[(0, m - 1)] = 0.7;
            d[(m - 1, 0)] = -0.7;
            d[(1, 2)] = -0.4;
            d[(2, 1)] = 0.4;
            let killing = make_trivial(&TrivialData::new(d, DVector::from_element(m, 0.3))?, &ctx.f)?;
            let v = classify_triviality(f, &killing, pts, TRIVIALITY_TOL)?;
            let combo = t.scaled(2.0)?.combine(1.0, &killing, 1.0)?;
            let dec = decompose_against_conjugate(f, t, &combo, pts)?;
            vec![
                ResidualReport::new("triviality/killing_field", &[v.residual], TRIVIALITY_TOL),
                ResidualReport::new("triviality/recovered_c", &[(dec.c - 2.0).abs()], TRIVIALITY_TOL),
            ]
        }
        "gauss_param" => {
            if ctx.n() < 2 {
                vec![not_applicable("gauss_param/round_trip", pts.len()), not_applicable("gauss_param/minimality", pts.len())]
            } else {
                let slice = quotient_slice(ctx.f.clone(), [0, 1], f.domain().center(), h)?;
                let rt = round_trip_residuals(f, &slice, pts, h)?;
                let rt: Vec<f64> = rt.iter().map(|(a, b)| a.max(*b)).collect();
                let fiber = vec![0.1; slice.sphere.fiber_dim()];
                let samples: Vec<Vec<f64>> = pts
                    .iter()
                    .map(|p| {
                        let mut s = vec![p[0], p[1]];
                        s.extend_from_slice(&fiber);
                        s
                    })
                    .collect();
                let out = minimality_criterion(&slice.sphere, &slice.gamma, &samples, h, fd_tol)?;
                vec![
                    ResidualReport::new("gauss_param/round_trip", &rt, ROUND_TRIP_TOL),
                    out.report("gauss_param/minimality", true),
                ]
            }
        }
        "control/stretching" => {
            let m = f.ambient_dim();
            let d = DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| 1.0 + i as f64));
            let stretch = BendingField::new(Arc::new(AffineImage::new(ctx.f.clone(), d, DVector::zeros(m))?), Provenance::Custom);
            let r = bending_residual(f, &stretch, pts)?;
            vec![control_from("control/stretching", &r)]
        }
        "control/fundamental_b_eq_a" => {
            let r = ctx.per_point(|p| {
                let fr = point_frame(&f.jet(p)?)?;
                Ok(fundamental_equation_residual(&fr, &fr.a, &fr.a))
            })?;
            vec![ResidualReport::control("control/fundamental_b_eq_a", &r, CONTROL_THRESHOLD)]
        }
        "control/codazzi_scaled_a" => {
            let s = |q: &[f64]| Ok(point_frame(&f.jet(q)?)?.a * q[0].exp());
            let r = ctx.per_point(|p| codazzi_residual(f, &s, p, h))?;
            vec![ResidualReport::control("control/codazzi_scaled_a", &r, CONTROL_THRESHOLD)]
        }
        "control/conjugate_triviality" => {
            let v = classify_triviality(f, t, pts, TRIVIALITY_TOL)?;
            vec![ResidualReport::control("control/conjugate_triviality", &[v.residual], CONTROL_THRESHOLD)]
        }
        "control/gauss_map_tangent" => {
            let g = clifford_surface();
            let samples = sample_grid(&g, [4, 4], 0.5, 2, 0.1)?;
            vec![gauss_map_control_residual(&g, &clifford_default_support(), &samples, h)?]
        }
        "control/minimality_constant_support" => {
            let g = great_sphere_surface();
            let samples = sample_grid(&g, [4, 4], 0.5, 2, 0.05)?;
            let out = minimality_criterion(&g, &SphereGamma::One.support(), &samples, h, fd_tol)?;
            let mut r = out.report("control/minimality_constant_support", false);
            r.tolerance = CONTROL_THRESHOLD;
            r.pass = r.pass && out.laplacian.iter().chain(&out.trace).all(|v| *v > CONTROL_THRESHOLD);
            vec![r]
        }
        other => return Err(Error::Validation(format!("unknown suite {other:?}"))),
    };
    Ok(reports.into_iter().map(|r| ctx.finish(r)).collect())
}

fn control_from(identity: &str, r: &ResidualReport) -> ResidualReport {
    let mut c = ResidualReport::control(identity, &[], CONTROL_THRESHOLD);
    c.points = r.points;
    c.max_residual = r.max_residual;
    c.mean_residual = r.mean_residual;
    c.with_tolerance(CONTROL_THRESHOLD)
}
