//! Truncated holomorphic power series.
//!
//! A [`TruncatedSeries`] stores the Taylor coefficients of a holomorphic germ
//! about a fixed basepoint. All arithmetic is exact on the stored
//! coefficients: products truncate to the smaller operand order, derivatives
//! drop one order and antiderivatives gain one. Series about different
//! basepoints never mix; there is no recentering.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation order for a construction run.
pub const DEFAULT_TRUNC_ORDER: usize = 32;

/// Coefficients `c_k` of `sum_k c_k (z - basepoint)^k`, `k = 0..=order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    basepoint: Complex64,
    coeffs: Vec<Complex64>,
}

/// Result of evaluating a series, flagged when the point lies outside the
/// radius the caller declared for its chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub outside_radius: bool,
}

impl TruncatedSeries {
    pub fn new(basepoint: Complex64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("a series needs at least one coefficient".into()));
        }
        Ok(Self { basepoint, coeffs })
    }

    /// Builds a series from real coefficients; handy for tests and built-ins.
    pub fn from_real(basepoint: Complex64, coeffs: &[f64]) -> Result<Self> {
        Self::new(basepoint, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero(basepoint: Complex64, order: usize) -> Self {
        Self { basepoint, coeffs: vec![Complex64::new(0.0, 0.0); order + 1] }
    }

    pub fn constant(basepoint: Complex64, value: Complex64, order: usize) -> Self {
        let mut s = Self::zero(basepoint, order);
        s.coeffs[0] = value;
        s
    }

    /// The identity germ `z` expanded about `basepoint`.
    pub fn variable(basepoint: Complex64, order: usize) -> Self {
        let mut s = Self::constant(basepoint, basepoint, order);
        if order >= 1 {
            s.coeffs[1] = Complex64::new(1.0, 0.0);
        }
        s
    }

    pub fn basepoint(&self) -> Complex64 {
        self.basepoint
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Pads with zeros or drops trailing coefficients so that the order is `order`.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, Complex64::new(0.0, 0.0));
        Self { basepoint: self.basepoint, coeffs }
    }

    fn check_basepoint(&self, other: &Self) -> Result<()> {
        if self.basepoint != other.basepoint {
            return Err(Error::Domain(format!(
                "basepoint mismatch: {} vs {}",
                self.basepoint, other.basepoint
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_basepoint(other)?;
        let order = self.order().min(other.order());
        let coeffs = (0..=order).map(|k| self.coeffs[k] + other.coeffs[k]).collect();
        Ok(Self { basepoint: self.basepoint, coeffs })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Cauchy product truncated to the smaller operand order.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_basepoint(other)?;
        let order = self.order().min(other.order());
        let coeffs = (0..=order)
            .map(|k| (0..=k).map(|i| self.coeffs[i] * other.coeffs[k - i]).sum())
            .collect();
        Ok(Self { basepoint: self.basepoint, coeffs })
    }

    /// Sum of `|a_i| |b_j| r^(i+j)` over the cross terms dropped by
    /// [`checked_mul`](Self::checked_mul); bounds the product error on the
    /// disc `|z - basepoint| <= r`.
    pub fn mul_truncation_bound(&self, other: &Self, r: f64) -> Result<f64> {
        self.check_basepoint(other)?;
        let order = self.order().min(other.order());
        let mut bound = 0.0;
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j > order {
                    bound += a.norm() * b.norm() * r.powi((i + j) as i32);
                }
            }
        }
        Ok(bound)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { basepoint: self.basepoint, coeffs: self.coeffs.iter().map(|&a| a * c).collect() }
    }

    /// Term-wise derivative. An order-0 series differentiates to the zero
    /// series of order 0.
    pub fn diff(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(self.basepoint, 0);
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(k, &c)| c * (k as f64 + 1.0))
            .collect();
        Self { basepoint: self.basepoint, coeffs }
    }

    /// Term-wise antiderivative whose value at the basepoint is `c`.
    pub fn integrate(&self, c: Complex64) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(c);
        coeffs.extend(self.coeffs.iter().enumerate().map(|(k, &a)| a / (k as f64 + 1.0)));
        Self { basepoint: self.basepoint, coeffs }
    }

    /// Horner evaluation of the stored polynomial.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let t = z - self.basepoint;
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * t + c)
    }

    pub fn eval_checked(&self, z: Complex64, radius: f64) -> Evaluation {
        Evaluation { value: self.eval(z), outside_radius: (z - self.basepoint).norm() > radius }
    }
}

/// A vector of series sharing basepoint and order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVector {
    components: Vec<TruncatedSeries>,
}

impl SeriesVector {
    pub fn new(components: Vec<TruncatedSeries>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Domain("a series vector needs at least one component".into()))?;
        for c in &components[1..] {
            if c.basepoint != first.basepoint {
                return Err(Error::Domain("series vector components disagree on basepoint".into()));
            }
            if c.order() != first.order() {
                return Err(Error::Domain(format!(
                    "series vector components disagree on order: {} vs {}",
                    c.order(),
                    first.order()
                )));
            }
        }
        Ok(Self { components })
    }

    /// Like [`new`](Self::new) but truncates every component to the minimum order first.
    pub fn truncating(components: Vec<TruncatedSeries>) -> Result<Self> {
        let order = components.iter().map(TruncatedSeries::order).min().unwrap_or(0);
        Self::new(components.into_iter().map(|c| c.with_order(order)).collect())
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn basepoint(&self) -> Complex64 {
        self.components[0].basepoint
    }

    pub fn components(&self) -> &[TruncatedSeries] {
        &self.components
    }

    pub fn scale_by(&self, s: &TruncatedSeries) -> Result<Self> {
        Self::new(self.components.iter().map(|c| s.checked_mul(c)).collect::<Result<_>>()?)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.checked_add(b))
                .collect::<Result<_>>()?,
        )
    }

    pub fn diff(&self) -> Self {
        Self { components: self.components.iter().map(TruncatedSeries::diff).collect() }
    }

    /// Component-wise antiderivative with per-component constants.
    pub fn integrate(&self, constants: &[Complex64]) -> Result<Self> {
        if constants.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: constants.len() });
        }
        Ok(Self {
            components: self.components.iter().zip(constants).map(|(s, &c)| s.integrate(c)).collect(),
        })
    }

    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        self.components.iter().map(|c| c.eval(z)).collect()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Symmetric bilinear product `sum_k a_k b_k`; no conjugation.
    pub fn vdot(&self, other: &Self) -> Result<TruncatedSeries> {
        self.check_dim(other)?;
        let mut acc = self.components[0].checked_mul(&other.components[0])?;
        for (a, b) in self.components.iter().zip(&other.components).skip(1) {
            acc = acc.checked_add(&a.checked_mul(b)?)?;
        }
        Ok(acc)
    }
}

pub fn series_add(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.checked_add(b)
}

pub fn series_mul(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.checked_mul(b)
}

pub fn series_diff(a: &TruncatedSeries) -> TruncatedSeries {
    a.diff()
}

pub fn series_int(a: &TruncatedSeries, c: Complex64) -> TruncatedSeries {
    a.integrate(c)
}

pub fn series_eval(a: &TruncatedSeries, z: Complex64) -> Complex64 {
    a.eval(z)
}

pub fn vdot(a: &SeriesVector, b: &SeriesVector) -> Result<TruncatedSeries> {
    a.vdot(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const O: Complex64 = Complex64::new(0.0, 0.0);
    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real(coeffs: &[f64]) -> TruncatedSeries {
        TruncatedSeries::from_real(O, coeffs).unwrap()
    }

    fn same_coeffs(a: &TruncatedSeries, b: &[Complex64]) -> bool {
        let n = a.coeffs().len().max(b.len());
        (0..n).all(|k| {
            let x = a.coeffs().get(k).copied().unwrap_or(O);
            let y = b.get(k).copied().unwrap_or(O);
            (x - y).norm() < 1e-15
        })
    }

    #[test]
    fn add_examples() {
        let s = real(&[1.0, 1.0]).checked_add(&real(&[1.0, -1.0])).unwrap();
        assert!(same_coeffs(&s, &[c(2.0, 0.0)]));
        let z = real(&[0.0, 1.0]);
        let s = z.checked_add(&TruncatedSeries::zero(O, 1)).unwrap();
        assert_eq!(s, z);
        assert!(same_coeffs(&z.checked_add(&z).unwrap(), &[O, c(2.0, 0.0)]));
    }

    #[test]
    fn add_truncates_to_min_order() {
        let s = real(&[1.0, 2.0, 3.0]).checked_add(&real(&[1.0])).unwrap();
        assert_eq!(s.order(), 0);
    }

    #[test]
    fn basepoint_mismatch_is_domain_error() {
        let a = real(&[1.0]);
        let b = TruncatedSeries::from_real(c(1.0, 0.0), &[1.0]).unwrap();
        assert!(matches!(a.checked_add(&b), Err(Error::Domain(_))));
        assert!(matches!(a.checked_mul(&b), Err(Error::Domain(_))));
    }

    #[test]
    fn mul_examples() {
        let p = real(&[1.0, 1.0, 0.0]).checked_mul(&real(&[1.0, -1.0, 0.0])).unwrap();
        assert!(same_coeffs(&p, &[c(1.0, 0.0), O, c(-1.0, 0.0)]));
        let s = real(&[0.3, -2.0, 5.0]);
        assert_eq!(s.checked_mul(&TruncatedSeries::constant(O, c(1.0, 0.0), 2)).unwrap(), s);
        let z = real(&[0.0, 1.0, 0.0]);
        assert!(same_coeffs(&z.checked_mul(&z).unwrap(), &[O, O, c(1.0, 0.0)]));
    }

    #[test]
    fn diff_examples() {
        assert!(same_coeffs(&real(&[0.0, 0.0, 1.0]).diff(), &[O, c(2.0, 0.0)]));
        let d = real(&[7.0]).diff();
        assert_eq!(d.order(), 0);
        assert!(d.is_zero());
        let a = real(&[1.0, -3.0, 0.5, 2.0]);
        assert!(same_coeffs(&a.integrate(c(9.0, 1.0)).diff(), a.coeffs()));
    }

    #[test]
    fn int_examples() {
        assert!(same_coeffs(&real(&[1.0]).integrate(O), &[O, c(1.0, 0.0)]));
        assert!(same_coeffs(&real(&[0.0, 1.0]).integrate(O), &[O, O, c(0.5, 0.0)]));
        assert!(same_coeffs(&real(&[0.0]).integrate(c(5.0, 0.0)), &[c(5.0, 0.0)]));
        assert_eq!(real(&[1.0, 2.0]).integrate(O).order(), 2);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(real(&[1.0, 0.0, -1.0]).eval(O), c(1.0, 0.0));
        assert_eq!(real(&[0.0, 1.0]).eval(I), I);
        let v = real(&[0.0, 1.0, 0.0, -1.0 / 3.0]).eval(c(1.0, 0.0));
        assert!((v - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        let e = real(&[1.0, 1.0]).eval_checked(c(2.0, 0.0), 1.0);
        assert!(e.outside_radius);
        assert!(!real(&[1.0, 1.0]).eval_checked(c(0.5, 0.0), 1.0).outside_radius);
    }

    #[test]
    fn vdot_examples() {
        let e1 = SeriesVector::new(vec![real(&[1.0]), real(&[0.0]), real(&[0.0])]).unwrap();
        let e2 = SeriesVector::new(vec![real(&[0.0]), real(&[1.0]), real(&[0.0])]).unwrap();
        assert!(e1.vdot(&e2).unwrap().is_zero());

        let a = SeriesVector::new(vec![
            real(&[0.5, 0.0, -0.5]),
            TruncatedSeries::new(O, vec![c(0.0, 0.5), O, c(0.0, 0.5)]).unwrap(),
            real(&[0.0, 1.0, 0.0]),
        ])
        .unwrap();
        assert!(a.vdot(&a).unwrap().coeffs().iter().all(|c| c.norm() < 1e-15));

        let zv = SeriesVector::new(vec![real(&[0.0, 1.0, 0.0]), real(&[0.0, 0.0, 0.0]), real(&[0.0, 0.0, 0.0])])
            .unwrap();
        assert!(same_coeffs(&zv.vdot(&zv).unwrap(), &[O, O, c(1.0, 0.0)]));

        let short = SeriesVector::new(vec![real(&[1.0])]).unwrap();
        assert!(matches!(e1.vdot(&short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn series_vector_rejects_mixed_orders() {
        assert!(SeriesVector::new(vec![real(&[1.0]), real(&[1.0, 2.0])]).is_err());
        assert_eq!(SeriesVector::truncating(vec![real(&[1.0]), real(&[1.0, 2.0])]).unwrap().order(), 0);
    }

    fn arb_series(order: usize) -> impl Strategy<Value = TruncatedSeries> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), order + 1)
            .prop_map(|v| TruncatedSeries::new(O, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn diff_inverts_integrate(a in arb_series(12), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let back = a.integrate(c(re, im)).diff();
            prop_assert_eq!(back.order(), a.order());
            for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
                prop_assert!((x - y).norm() <= 4.0 * f64::EPSILON * y.norm().max(1.0));
            }
        }

        #[test]
        fn product_eval_within_truncation_bound(
            a in arb_series(8), b in arb_series(8), r in 0.0f64..0.9, t in 0.0f64..6.3
        ) {
            let z = Complex64::from_polar(r, t);
            let p = a.checked_mul(&b).unwrap();
            let bound = a.mul_truncation_bound(&b, r).unwrap();
            let err = (p.eval(z) - a.eval(z) * b.eval(z)).norm();
            prop_assert!(err <= bound + 1e-12, "err {} bound {}", err, bound);
        }

        #[test]
        fn vdot_symmetric(a0 in arb_series(5), a1 in arb_series(5), b0 in arb_series(5), b1 in arb_series(5)) {
            let a = SeriesVector::new(vec![a0, a1]).unwrap();
            let b = SeriesVector::new(vec![b0, b1]).unwrap();
            let ab = a.vdot(&b).unwrap();
            let ba = b.vdot(&a).unwrap();
            for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
                prop_assert!((x - y).norm() <= 1e-14);
            }
        }
    }
}
