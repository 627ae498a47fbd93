//! Evaluable immersion charts and their 2-jets.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Value, first partials and second partials of a map `R^d -> R^(m+1)` at a point.
///
/// `d2` is stored row-major: entry `(i, j)` lives at `i * d + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub coords: Vec<f64>,
    pub value: DVector<f64>,
    pub d1: Vec<DVector<f64>>,
    pub d2: Vec<DVector<f64>>,
    /// False when the point lies outside the chart's declared domain.
    pub in_domain: bool,
}

impl Jet2 {
    pub fn new(coords: Vec<f64>, value: DVector<f64>, d1: Vec<DVector<f64>>, d2: Vec<DVector<f64>>) -> Self {
        debug_assert_eq!(d2.len(), d1.len() * d1.len());
        Self { coords, value, d1, d2, in_domain: true }
    }

    pub fn dim(&self) -> usize {
        self.d1.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.value.len()
    }

    pub fn second(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.d2[i * self.dim() + j]
    }

    /// Jacobian with the first partials as columns.
    pub fn jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.d1)
    }

    /// `a * self + b * other`, assuming both jets sit at the same coordinates.
    pub fn lin_comb(&self, a: f64, other: &Jet2, b: f64) -> Jet2 {
        let mix = |x: &DVector<f64>, y: &DVector<f64>| x * a + y * b;
        Jet2 {
            coords: self.coords.clone(),
            value: mix(&self.value, &other.value),
            d1: self.d1.iter().zip(&other.d1).map(|(x, y)| mix(x, y)).collect(),
            d2: self.d2.iter().zip(&other.d2).map(|(x, y)| mix(x, y)).collect(),
            in_domain: self.in_domain && other.in_domain,
        }
    }

    pub fn scaled(&self, a: f64) -> Jet2 {
        Jet2 {
            coords: self.coords.clone(),
            value: &self.value * a,
            d1: self.d1.iter().map(|v| v * a).collect(),
            d2: self.d2.iter().map(|v| v * a).collect(),
            in_domain: self.in_domain,
        }
    }

    /// Jet of `x -> D x + w` composed with this map.
    pub fn affine_image(&self, d: &DMatrix<f64>, w: &DVector<f64>) -> Jet2 {
        Jet2 {
            coords: self.coords.clone(),
            value: d * &self.value + w,
            d1: self.d1.iter().map(|v| d * v).collect(),
            d2: self.d2.iter().map(|v| d * v).collect(),
            in_domain: self.in_domain,
        }
    }

    /// Largest deviation `|f_ij - f_ji|`.
    pub fn hessian_asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                worst = worst.max((self.second(i, j) - self.second(j, i)).amax());
            }
        }
        worst
    }
}

/// Axis-aligned coordinate box.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoordBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn symmetric(half_widths: &[f64]) -> Self {
        Self::new(half_widths.iter().map(|h| -h).collect(), half_widths.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Largest half-width; the coordinate scale used for step sizes.
    pub fn scale(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max)
    }

    /// Shrinks every side by `margin` toward the center.
    pub fn shrunk(&self, margin: f64) -> Self {
        Self::new(self.lo.iter().map(|a| a + margin).collect(), self.hi.iter().map(|b| b - margin).collect())
    }

    /// Regular grid with `counts[i]` samples along axis `i` (endpoints included).
    pub fn grid(&self, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
        if counts.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: counts.len() });
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::Domain("empty sampling grid".into()));
        }
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if c == 1 {
                    vec![0.5 * (self.lo[i] + self.hi[i])]
                } else {
                    (0..c).map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (c - 1) as f64).collect()
                }
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

/// An evaluable map from real coordinates to 2-jets in `R^(m+1)`.
pub trait Chart: Send + Sync {
    /// Number of coordinates `d`.
    fn dim(&self) -> usize;
    /// Ambient dimension `m + 1`.
    fn ambient_dim(&self) -> usize;
    /// Region where evaluation is trusted.
    fn domain(&self) -> &CoordBox;
    fn jet(&self, p: &[f64]) -> Result<Jet2>;

    fn coord_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    /// Constant almost complex structure in chart coordinates, if the chart carries one.
    fn complex_structure(&self) -> Option<DMatrix<f64>> {
        None
    }

    fn value(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(self.jet(p)?.value)
    }
}

pub type ChartRef = Arc<dyn Chart>;

impl fmt::Debug for dyn Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chart(d={}, ambient={})", self.dim(), self.ambient_dim())
    }
}

type JetFn = dyn Fn(&[f64]) -> Jet2 + Send + Sync;

/// Chart backed by a closure returning exact jets.
pub struct FnChart {
    dim: usize,
    ambient: usize,
    domain: CoordBox,
    eval: Box<JetFn>,
    complex_structure: Option<DMatrix<f64>>,
}

impl FnChart {
    pub fn new(
        dim: usize,
        ambient: usize,
        domain: CoordBox,
        eval: impl Fn(&[f64]) -> Jet2 + Send + Sync + 'static,
    ) -> Self {
        Self { dim, ambient, domain, eval: Box::new(eval), complex_structure: None }
    }

    pub fn with_complex_structure(mut self, j: DMatrix<f64>) -> Self {
        self.complex_structure = Some(j);
        self
    }
}

impl Chart for FnChart {
    fn dim(&self) -> usize {
        self.dim
    }
    fn ambient_dim(&self) -> usize {
        self.ambient
    }
    fn domain(&self) -> &CoordBox {
        &self.domain
    }
    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        if p.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: p.len() });
        }
        let mut jet = (self.eval)(p);
        jet.in_domain = self.domain.contains(p);
        Ok(jet)
    }
    fn complex_structure(&self) -> Option<DMatrix<f64>> {
        self.complex_structure.clone()
    }
}

/// `sum_k c_k chart_k`, with jets combined linearly. All terms share coordinates.
pub struct LinearCombination {
    terms: Vec<(f64, ChartRef)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, ChartRef)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Validation("empty linear combination".into()))?;
        let (d, m) = (first.1.dim(), first.1.ambient_dim());
        for (_, c) in &terms {
            if c.dim() != d {
                return Err(Error::Dimension { expected: d, found: c.dim() });
            }
            if c.ambient_dim() != m {
                return Err(Error::Dimension { expected: m, found: c.ambient_dim() });
            }
        }
        Ok(Self { terms })
    }
}

impl Chart for LinearCombination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn ambient_dim(&self) -> usize {
        self.terms[0].1.ambient_dim()
    }
    fn domain(&self) -> &CoordBox {
        self.terms[0].1.domain()
    }
    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        let (c0, first) = &self.terms[0];
        let mut acc = first.jet(p)?.scaled(*c0);
        for (c, chart) in &self.terms[1..] {
            acc = acc.lin_comb(1.0, &chart.jet(p)?, *c);
        }
        Ok(acc)
    }
    fn complex_structure(&self) -> Option<DMatrix<f64>> {
        self.terms[0].1.complex_structure()
    }
}

/// `D f + w` for a base chart `f`.
pub struct AffineImage {
    base: ChartRef,
    d: DMatrix<f64>,
    w: DVector<f64>,
}

impl AffineImage {
    pub fn new(base: ChartRef, d: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        let m = base.ambient_dim();
        if d.nrows() != m || d.ncols() != m {
            return Err(Error::Dimension { expected: m, found: d.nrows() });
        }
        if w.len() != m {
            return Err(Error::Dimension { expected: m, found: w.len() });
        }
        Ok(Self { base, d, w })
    }
}

impl Chart for AffineImage {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }
    fn domain(&self) -> &CoordBox {
        self.base.domain()
    }
    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        Ok(self.base.jet(p)?.affine_image(&self.d, &self.w))
    }
}

/// The cylinder `f(y, z) = (g(y), z)` over a profile `g`, with a Euclidean
/// factor of dimension `k`.
pub struct CylinderChart {
    profile: ChartRef,
    k: usize,
    domain: CoordBox,
}

impl CylinderChart {
    pub fn new(profile: ChartRef, factor_box: &CoordBox) -> Self {
        let mut lo = profile.domain().lo.clone();
        let mut hi = profile.domain().hi.clone();
        lo.extend_from_slice(&factor_box.lo);
        hi.extend_from_slice(&factor_box.hi);
        Self { k: factor_box.dim(), profile, domain: CoordBox::new(lo, hi) }
    }

    pub fn factor_dim(&self) -> usize {
        self.k
    }

    pub fn profile(&self) -> &ChartRef {
        &self.profile
    }
}

/// Embeds a profile jet in the first block and a Euclidean-factor jet in the second.
pub(crate) fn block_jet(coords: &[f64], profile: &Jet2, value2: DVector<f64>, d1_2: &[DVector<f64>]) -> Jet2 {
    let dp = profile.dim();
    let k = d1_2.len();
    let d = dp + k;
    let mp = profile.ambient_dim();
    let m = mp + value2.len();
    let embed = |a: &DVector<f64>, b: Option<&DVector<f64>>| {
        let mut v = DVector::zeros(m);
        v.rows_mut(0, mp).copy_from(a);
        if let Some(b) = b {
            v.rows_mut(mp, b.len()).copy_from(b);
        }
        v
    };
    let zero_p = DVector::zeros(mp);
    let value = embed(&profile.value, Some(&value2));
    let mut d1 = Vec::with_capacity(d);
    for i in 0..dp {
        d1.push(embed(&profile.d1[i], None));
    }
    for v in d1_2 {
        d1.push(embed(&zero_p, Some(v)));
    }
    let mut d2 = vec![DVector::zeros(m); d * d];
    for i in 0..dp {
        for j in 0..dp {
            d2[i * d + j] = embed(profile.second(i, j), None);
        }
    }
    Jet2 { coords: coords.to_vec(), value, d1, d2, in_domain: profile.in_domain }
}

impl Chart for CylinderChart {
    fn dim(&self) -> usize {
        self.profile.dim() + self.k
    }
    fn ambient_dim(&self) -> usize {
        self.profile.ambient_dim() + self.k
    }
    fn domain(&self) -> &CoordBox {
        &self.domain
    }
    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        if p.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: p.len() });
        }
        let dp = self.profile.dim();
        let profile = self.profile.jet(&p[..dp])?;
        let z = DVector::from_column_slice(&p[dp..]);
        let units: Vec<DVector<f64>> = (0..self.k).map(|i| DVector::from_fn(self.k, |r, _| (r == i) as u8 as f64)).collect();
        let mut jet = block_jet(p, &profile, z, &units);
        jet.in_domain = self.domain.contains(p);
        Ok(jet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> ChartRef {
        Arc::new(FnChart::new(2, 3, CoordBox::symmetric(&[1.0, 1.0]), |p| {
            Jet2::new(
                p.to_vec(),
                DVector::from_vec(vec![p[0], p[1], 0.0]),
                vec![DVector::from_vec(vec![1.0, 0.0, 0.0]), DVector::from_vec(vec![0.0, 1.0, 0.0])],
                vec![DVector::zeros(3); 4],
            )
        }))
    }

    #[test]
    fn grid_counts_and_empty() {
        let b = CoordBox::symmetric(&[1.0, 2.0]);
        let g = b.grid(&[3, 2]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![-1.0, -2.0]);
        assert_eq!(g[5], vec![1.0, 2.0]);
        assert!(b.grid(&[0, 2]).is_err());
        assert!(b.grid(&[2]).is_err());
    }

    #[test]
    fn combination_and_affine() {
        let f = plane();
        let combo = LinearCombination::new(vec![(2.0, f.clone()), (-1.0, f.clone())]).unwrap();
        let j = combo.jet(&[0.3, 0.4]).unwrap();
        assert_eq!(j.value, f.jet(&[0.3, 0.4]).unwrap().value);

        let d = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let w = DVector::from_vec(vec![0.0, 0.0, 5.0]);
        let rot = AffineImage::new(f, d, w).unwrap();
        let j = rot.jet(&[1.0, 0.0]).unwrap();
        assert_eq!(j.value, DVector::from_vec(vec![0.0, 1.0, 5.0]));
    }

    #[test]
    fn cylinder_blocks() {
        let cyl = CylinderChart::new(plane(), &CoordBox::symmetric(&[1.0]));
        assert_eq!(cyl.dim(), 3);
        assert_eq!(cyl.ambient_dim(), 4);
        let j = cyl.jet(&[0.1, 0.2, 0.7]).unwrap();
        assert_eq!(j.value.as_slice(), &[0.1, 0.2, 0.0, 0.7]);
        assert_eq!(j.d1[2].as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(j.hessian_asymmetry(), 0.0);
    }
}
