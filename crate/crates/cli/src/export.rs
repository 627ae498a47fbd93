//! Two-dimensional slices of a chart as Wavefront OBJ and CSV.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kaehler_core::bending::{bending_residual, BendingField};
use kaehler_core::chart::{Chart, ChartRef};
use kaehler_core::geometry::{point_frame, rank_and_nullity, RANK_TOL};
use kaehler_core::par::try_map_points;
use kaehler_core::weierstrass::WeierstrassSurface;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    /// Comma-separated coordinate names: two free axes, the rest as `name=value`.
    /// Unlisted coordinates sit at the domain center.
    #[serde(default = "default_slice")]
    pub slice: String,
    #[serde(default = "default_counts")]
    pub counts: [usize; 2],
    /// `f`, `fbar`, or `theta:<angle>`.
    #[serde(default = "default_chart")]
    pub chart: String,
    /// Number of frames `theta = k pi / sweep`; replaces `chart` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<usize>,
    /// Range of the two free axes; defaults to the chart domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 2]>,
    #[serde(default = "default_name")]
    pub name: String,
}

fn default_slice() -> String {
    "x,y".into()
}
fn default_counts() -> [usize; 2] {
    [21, 21]
}
fn default_chart() -> String {
    "f".into()
}
fn default_name() -> String {
    "slice".into()
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            slice: default_slice(),
            counts: default_counts(),
            chart: default_chart(),
            sweep: None,
            lo: None,
            hi: None,
            name: default_name(),
        }
    }
}

/// Parsed slice: free axes and the full coordinate vector at the slice origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub axes: [usize; 2],
    pub base: Vec<f64>,
}

pub fn parse_slice(spec: &str, chart: &dyn Chart) -> Result<SliceSpec> {
    let names = chart.coord_names();
    let domain = chart.domain();
    let mut base = domain.center();
    let mut free = Vec::new();
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (name, value) = match token.split_once('=') {
            Some((n, v)) => (n.trim(), Some(v.trim())),
            None => (token, None),
        };
        let Some(i) = names.iter().position(|n| n == name) else {
            bail!("unknown coordinate {name:?} in slice; chart coordinates are {}", names.join(", "));
        };
        match value {
            None => free.push(i),
            Some(v) => {
                let x: f64 = v.parse().with_context(|| format!("bad value for {name}: {v:?}"))?;
                if x < domain.lo[i] || x > domain.hi[i] {
                    bail!("slice leaves the domain: {name} = {x} outside [{}, {}]", domain.lo[i], domain.hi[i]);
                }
                base[i] = x;
            }
        }
    }
    if free.len() != 2 || free[0] == free[1] {
        bail!("a slice needs exactly two distinct free coordinates, got {spec:?}");
    }
    Ok(SliceSpec { axes: [free[0], free[1]], base })
}

/// Grid of chart points on the slice, row-major in the first free axis.
pub fn slice_points(
    slice: &SliceSpec,
    chart: &dyn Chart,
    counts: [usize; 2],
    lo: Option<[f64; 2]>,
    hi: Option<[f64; 2]>,
) -> Result<Vec<Vec<f64>>> {
    if counts.iter().any(|&c| c < 2) {
        bail!("empty export grid: counts {counts:?} (need at least 2 per axis)");
    }
    let d = chart.domain();
    let [a, b] = slice.axes;
    let lo = lo.unwrap_or([d.lo[a], d.lo[b]]);
    let hi = hi.unwrap_or([d.hi[a], d.hi[b]]);
    for k in 0..2 {
        let axis = slice.axes[k];
        if lo[k] < d.lo[axis] || hi[k] > d.hi[axis] || !(lo[k] < hi[k]) {
            bail!("slice leaves the domain: range [{}, {}] on axis {axis}", lo[k], hi[k]);
        }
    }
    let mut pts = Vec::with_capacity(counts[0] * counts[1]);
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            let mut p = slice.base.clone();
            p[a] = lo[0] + (hi[0] - lo[0]) * i as f64 / (counts[0] - 1) as f64;
            p[b] = lo[1] + (hi[1] - lo[1]) * j as f64 / (counts[1] - 1) as f64;
            pts.push(p);
        }
    }
    Ok(pts)
}

fn chart_for(surface: &WeierstrassSurface, which: &str) -> Result<ChartRef> {
    match which {
        "f" => Ok(surface.f()),
        "fbar" => Ok(surface.fbar()),
        other => match other.strip_prefix("theta:") {
            Some(t) => Ok(surface.associated(t.trim().parse().with_context(|| format!("bad angle in {other:?}"))?)?),
            None => bail!("unknown export chart {other:?}; use f, fbar or theta:<angle>"),
        },
    }
}

pub fn obj_text(values: &[DVector<f64>], counts: [usize; 2], comment: &str) -> String {
    let mut s = format!("# {comment}\n");
    if values.first().is_some_and(|v| v.len() > 3) {
        s.push_str("# vertices are the first three ambient coordinates; the CSV has all of them\n");
    }
    for v in values {
        writeln!(s, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v.get(2).copied().unwrap_or(0.0)).unwrap();
    }
    let idx = |i: usize, j: usize| i * counts[1] + j + 1;
    for i in 0..counts[0] - 1 {
        for j in 0..counts[1] - 1 {
            writeln!(s, "f {} {} {} {}", idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)).unwrap();
        }
    }
    s
}

fn csv_text(chart: &dyn Chart, pts: &[Vec<f64>], values: &[DVector<f64>], residuals: &[[f64; 3]]) -> String {
    let mut cols = chart.coord_names();
    cols.extend((1..=chart.ambient_dim()).map(|k| format!("X{k}")));
    cols.extend(["trace_rel", "rank", "bending"].map(String::from));
    let mut s = cols.join(",") + "\n";
    for ((p, v), r) in pts.iter().zip(values).zip(residuals) {
        let row: Vec<String> = p.iter().chain(v.iter()).chain(r.iter()).map(|x| format!("{x:.16e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn write_slice(
    dir: &Path,
    stem: &str,
    chart: &dyn Chart,
    f: &dyn Chart,
    conj: &BendingField,
    pts: &[Vec<f64>],
    counts: [usize; 2],
    comment: &str,
) -> Result<Vec<PathBuf>> {
    let rows = try_map_points(pts, |p| -> kaehler_core::Result<(DVector<f64>, [f64; 3])> {
        let jet = chart.jet(p)?;
        let frame = point_frame(&jet)?;
        let na = frame.operator_norm(&frame.a);
        let trace = if na == 0.0 { 0.0 } else { frame.a.trace().abs() / na };
        let rank = rank_and_nullity(&frame, RANK_TOL).rank as f64;
        let bend = bending_residual(f, conj, &[p.to_vec()])?.max_residual;
        Ok((jet.value, [trace, rank, bend]))
    })?;
    let values: Vec<DVector<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let residuals: Vec<[f64; 3]> = rows.iter().map(|r| r.1).collect();
    let obj = dir.join(format!("{stem}.obj"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&obj, obj_text(&values, counts, comment))?;
    fs::write(&csv, csv_text(chart, pts, &values, &residuals))?;
    Ok(vec![obj, csv])
}

/// Writes the slice (or a theta sweep of it) and returns the files written.
pub fn cmd_export(cfg: &RunConfig, slice_override: Option<&str>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ex = cfg.export.clone().unwrap_or_default();
    let (label, surface) = cfg.surface()?;
    let f = surface.f();
    let slice = parse_slice(slice_override.unwrap_or(&ex.slice), f.as_ref())?;
    let pts = slice_points(&slice, f.as_ref(), ex.counts, ex.lo, ex.hi)?;
    let conj = BendingField::conjugate(&surface);
    fs::create_dir_all(out_dir)?;
    let names = f.coord_names();
    let axes = format!("{},{}", names[slice.axes[0]], names[slice.axes[1]]);
    let mut written = Vec::new();
    match ex.sweep {
        Some(0) => bail!("a theta sweep needs at least one frame"),
        Some(frames) => {
            for k in 0..frames {
                let theta = k as f64 * PI / frames as f64;
                let chart = surface.associated(theta)?;
                let comment = format!("seed {label} chart theta={theta:.16e} axes {axes}");
                let stem = format!("{}_theta{k:02}", ex.name);
                written.extend(write_slice(out_dir, &stem, chart.as_ref(), f.as_ref(), &conj, &pts, ex.counts, &comment)?);
            }
        }
        None => {
            let chart = chart_for(&surface, &ex.chart)?;
            let comment = format!("seed {label} chart {} axes {axes}", ex.chart);
            written.extend(write_slice(out_dir, &ex.name, chart.as_ref(), f.as_ref(), &conj, &pts, ex.counts, &comment)?);
        }
    }
    Ok(written)
}

/// Vertices of an OBJ file.
pub fn read_obj_vertices(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter_map(|l| l.strip_prefix("v "))
        .map(|l| {
            let xs: Vec<f64> = l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>()?;
            Ok(DVector::from_vec(xs))
        })
        .collect()
}

/// Largest distance between matched points after the best rigid motion
/// taking `a` onto `b` (Kabsch).
pub fn rigid_alignment_residual(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        bail!("point sets differ in size");
    }
    let m = a[0].len();
    let mean = |s: &[DVector<f64>]| s.iter().fold(DVector::zeros(m), |acc, v| acc + v) / s.len() as f64;
    let (ca, cb) = (mean(a), mean(b));
    let mut cov = DMatrix::zeros(m, m);
    for (x, y) in a.iter().zip(b) {
        cov += (x - &ca) * (y - &cb).transpose();
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.context("svd u")?, svd.v_t.context("svd v")?);
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = DMatrix::identity(m, m);
        fix[(m - 1, m - 1)] = -1.0;
        r = vt.transpose() * fix * u.transpose();
    }
    Ok(a.iter().zip(b).map(|(x, y)| (&r * (x - &ca) - (y - &cb)).norm()).fold(0.0, f64::max))
}
