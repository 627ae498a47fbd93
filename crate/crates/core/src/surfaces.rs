//! Closed-form charts: flat and round model surfaces, the classical
//! catenoid/helicoid pair, and spherical surfaces for the Gauss
//! parametrization. These are written out by hand, independent of the series
//! machinery, so they can serve as oracles.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::chart::{ChartRef, CoordBox, FnChart, Jet2};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// The plane `z = 0` in `R^3`.
pub fn plane() -> ChartRef {
    Arc::new(FnChart::new(2, 3, CoordBox::symmetric(&[2.0, 2.0]), |p| {
        Jet2::new(p.to_vec(), v(&[p[0], p[1], 0.0]), vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])], vec![
            DVector::zeros(3);
            4
        ])
    }))
}

/// The plane in polar coordinates `(r, t)`.
pub fn polar_plane() -> ChartRef {
    Arc::new(FnChart::new(2, 3, CoordBox::new(vec![0.2, -PI], vec![3.0, PI]), |p| {
        let (r, t) = (p[0], p[1]);
        let (s, c) = t.sin_cos();
        Jet2::new(
            p.to_vec(),
            v(&[r * c, r * s, 0.0]),
            vec![v(&[c, s, 0.0]), v(&[-r * s, r * c, 0.0])],
            vec![v(&[0.0, 0.0, 0.0]), v(&[-s, c, 0.0]), v(&[-s, c, 0.0]), v(&[-r * c, -r * s, 0.0])],
        )
    }))
}

/// Unit sphere in coordinates `(phi, theta)`; the index-order normal points inward.
pub fn unit_sphere_inward() -> ChartRef {
    Arc::new(FnChart::new(2, 3, CoordBox::new(vec![-PI, 0.1], vec![PI, PI - 0.1]), |p| {
        let (sp, cp) = p[0].sin_cos();
        let (st, ct) = p[1].sin_cos();
        Jet2::new(
            p.to_vec(),
            v(&[st * cp, st * sp, ct]),
            vec![v(&[-st * sp, st * cp, 0.0]), v(&[ct * cp, ct * sp, -st])],
            vec![
                v(&[-st * cp, -st * sp, 0.0]),
                v(&[-ct * sp, ct * cp, 0.0]),
                v(&[-ct * sp, ct * cp, 0.0]),
                v(&[-st * cp, -st * sp, -ct]),
            ],
        )
    }))
}

/// Torus of revolution with radii `big > small`.
pub fn torus(big: f64, small: f64) -> ChartRef {
    Arc::new(FnChart::new(2, 3, CoordBox::symmetric(&[PI, PI]), move |p| {
        let (su, cu) = p[0].sin_cos();
        let (sv, cv) = p[1].sin_cos();
        let rho = big + small * cv;
        Jet2::new(
            p.to_vec(),
            v(&[rho * cu, rho * su, small * sv]),
            vec![v(&[-rho * su, rho * cu, 0.0]), v(&[-small * sv * cu, -small * sv * su, small * cv])],
            vec![
                v(&[-rho * cu, -rho * su, 0.0]),
                v(&[small * sv * su, -small * sv * cu, 0.0]),
                v(&[small * sv * su, -small * sv * cu, 0.0]),
                v(&[-small * cv * cu, -small * cv * su, -small * sv]),
            ],
        )
    }))
}

/// Jet of `sqrt(2) Re(e^{-i theta} G(z))` with `z = base + x + i y`, given
/// `G`, `G'`, `G''` evaluated at `z`.
fn planar_holomorphic_jet(p: &[f64], theta: f64, g: [[Complex64; 3]; 3]) -> Jet2 {
    let rot = Complex64::from_polar(SQRT_2, -theta);
    let i = Complex64::new(0.0, 1.0);
    let re = |w: [Complex64; 3]| v(&[(rot * w[0]).re, (rot * w[1]).re, (rot * w[2]).re]);
    let times = |c: Complex64, w: [Complex64; 3]| [c * w[0], c * w[1], c * w[2]];
    let [val, d, dd] = g;
    Jet2::new(
        p.to_vec(),
        re(val),
        vec![re(d), re(times(i, d))],
        vec![re(dd), re(times(i, dd)), re(times(i, dd)), re(times(-Complex64::new(1.0, 0.0), dd))],
    )
}

/// Classical catenoid data `G(z) = (-(1/z + z)/2, i(z - 1/z)/2, log z)` and its derivatives.
fn catenoid_primitive(z: Complex64) -> [[Complex64; 3]; 3] {
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let zi = one / z;
    [
        [-(zi + z) * 0.5, i * (z - zi) * 0.5, z.ln()],
        [(zi * zi - one) * 0.5, i * (one + zi * zi) * 0.5, zi],
        [-zi * zi * zi, -i * zi * zi * zi, -zi * zi],
    ]
}

/// Member `theta` of the closed-form catenoid family in coordinates
/// `z = base + x + i y`: `theta = 0` is the catenoid of radius `sqrt(2) cosh`
/// and `theta = pi/2` the conjugate helicoid.
pub fn classical_catenoid_family(base: Complex64, half_width: f64, theta: f64) -> ChartRef {
    Arc::new(FnChart::new(2, 3, CoordBox::symmetric(&[half_width, half_width]), move |p| {
        let z = base + Complex64::new(p[0], p[1]);
        planar_holomorphic_jet(p, theta, catenoid_primitive(z))
    }))
}

pub fn classical_catenoid(base: Complex64, half_width: f64) -> ChartRef {
    classical_catenoid_family(base, half_width, 0.0)
}

pub fn classical_helicoid(base: Complex64, half_width: f64) -> ChartRef {
    classical_catenoid_family(base, half_width, FRAC_PI_2)
}

/// Catenoid point `sqrt(2) (-cosh s cos t, -cosh s sin t, s)` with `z = e^{s + i t}`.
pub fn catenoid_point(z: Complex64) -> DVector<f64> {
    let w = z.ln();
    let (s, t) = (w.re, w.im);
    v(&[-s.cosh() * t.cos(), -s.cosh() * t.sin(), s]) * SQRT_2
}

/// Helicoid point `sqrt(2) (-sinh s sin t, sinh s cos t, t)` with `z = e^{s + i t}`.
pub fn helicoid_point(z: Complex64) -> DVector<f64> {
    let w = z.ln();
    let (s, t) = (w.re, w.im);
    v(&[-s.sinh() * t.sin(), s.sinh() * t.cos(), t]) * SQRT_2
}

/// Totally geodesic great 2-sphere `S^2 x {0}` inside `S^3`, coordinates `(phi, theta)`.
pub fn great_sphere_in_s3() -> ChartRef {
    Arc::new(FnChart::new(2, 4, CoordBox::new(vec![-PI, 0.2], vec![PI, PI - 0.2]), |p| {
        let (sp, cp) = p[0].sin_cos();
        let (st, ct) = p[1].sin_cos();
        Jet2::new(
            p.to_vec(),
            v(&[st * cp, st * sp, ct, 0.0]),
            vec![v(&[-st * sp, st * cp, 0.0, 0.0]), v(&[ct * cp, ct * sp, -st, 0.0])],
            vec![
                v(&[-st * cp, -st * sp, 0.0, 0.0]),
                v(&[-ct * sp, ct * cp, 0.0, 0.0]),
                v(&[-ct * sp, ct * cp, 0.0, 0.0]),
                v(&[-st * cp, -st * sp, -ct, 0.0]),
            ],
        )
    }))
}

/// Clifford torus `(cos x, sin x, cos y, sin y) / sqrt(2)` in `S^3`.
pub fn clifford_torus() -> ChartRef {
    Arc::new(FnChart::new(2, 4, CoordBox::symmetric(&[PI, PI]), |p| {
        let (sx, cx) = p[0].sin_cos();
        let (sy, cy) = p[1].sin_cos();
        let k = 1.0 / SQRT_2;
        Jet2::new(
            p.to_vec(),
            v(&[cx, sx, cy, sy]) * k,
            vec![v(&[-sx, cx, 0.0, 0.0]) * k, v(&[0.0, 0.0, -sy, cy]) * k],
            vec![
                v(&[-cx, -sx, 0.0, 0.0]) * k,
                DVector::zeros(4),
                DVector::zeros(4),
                v(&[0.0, 0.0, -cy, -sy]) * k,
            ],
        )
    }))
}

/// Unit normal of the Clifford torus inside `S^3`.
pub fn clifford_torus_normal(p: &[f64]) -> DVector<f64> {
    let (sx, cx) = p[0].sin_cos();
    let (sy, cy) = p[1].sin_cos();
    v(&[cx, sx, -cy, -sy]) / SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catenoid_chart_matches_closed_form_points() {
        let base = Complex64::new(2.0, 0.0);
        let cat = classical_catenoid(base, 0.3);
        let hel = classical_helicoid(base, 0.3);
        let p0 = [0.0, 0.0];
        let p1 = [0.2, -0.1];
        let z1 = base + Complex64::new(p1[0], p1[1]);
        let d_chart = cat.value(&p1).unwrap() - cat.value(&p0).unwrap();
        let d_closed = catenoid_point(z1) - catenoid_point(base);
        assert!((d_chart - d_closed).norm() < 1e-12);
        let d_chart = hel.value(&p1).unwrap() - hel.value(&p0).unwrap();
        let d_closed = helicoid_point(z1) - helicoid_point(base);
        assert!((d_chart - d_closed).norm() < 1e-12);
    }

    #[test]
    fn catenoid_radius_is_cosh_of_height() {
        let z = Complex64::new(1.7, 0.4);
        let p = catenoid_point(z) / SQRT_2;
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - p[2].cosh()).abs() < 1e-12);
    }

    #[test]
    fn spherical_charts_are_unit() {
        for c in [great_sphere_in_s3(), clifford_torus()] {
            let val = c.value(&[0.3, 1.0]).unwrap();
            assert!((val.norm() - 1.0).abs() < 1e-14);
        }
        let n = clifford_torus_normal(&[0.3, 1.0]);
        let t = clifford_torus().jet(&[0.3, 1.0]).unwrap();
        assert!(n.dot(&t.value).abs() < 1e-15);
        assert!(t.d1.iter().all(|d| n.dot(d).abs() < 1e-15));
    }
}
