//! Batch front end: chart bundles, identity suites and slice exports.

pub mod export;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kaehler_core::chart::{Chart, CoordBox};
use kaehler_core::report::ResidualReport;
use kaehler_core::suites::{expand_suites, is_control, run_suite, SuiteContext};
use kaehler_core::weierstrass::{builtin_seed, SeedSpec, SeriesSpec, WeierstrassSeed, WeierstrassSurface, BUILTIN_SEEDS};
use kaehler_core::SeriesVector;
use serde::{Deserialize, Serialize};

pub use export::{cmd_export, ExportConfig};

/// A built-in seed name, a bundle written by `generate`, or an inline seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedRef {
    Builtin(String),
    Bundle { bundle: PathBuf },
    Inline(Box<SeedSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    /// Samples per chart coordinate; defaults to 10 per axis for surfaces and 3 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    /// Distance kept from the chart boundary, for difference stencils.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Sub-box of the chart domain; defaults to the whole (shrunk) domain.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "box")]
    pub sample_box: Option<BoxSpec>,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { counts: None, margin: default_margin(), sample_box: None }
    }
}

fn default_margin() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: SeedRef,
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default)]
    pub sampling: Sampling,
    /// Tolerance overrides keyed by report identity.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<ExportConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_suites() -> Vec<String> {
    vec!["all".into()]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("kaehler-out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: SeedRef::Builtin("m4r5".into()),
            suites: default_suites(),
            sampling: Sampling::default(),
            tolerances: BTreeMap::new(),
            export: Some(ExportConfig::default()),
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing run configuration")?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a configuration; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_json(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if let SeedRef::Bundle { bundle } = &mut cfg.seed {
            if bundle.is_relative() {
                *bundle = dir.join(&*bundle);
            }
        }
        Ok(cfg)
    }

    pub fn defaults_json() -> String {
        serde_json::to_string_pretty(&Self::default()).expect("default config serializes")
    }

    fn check(&self) -> Result<()> {
        expand_suites(&self.suites)?;
        if let Some(c) = &self.sampling.counts {
            if c.iter().any(|&k| k < 2) {
                bail!("grid counts must be at least 2 per axis, got {c:?}");
            }
        }
        if !(self.sampling.margin >= 0.0) {
            bail!("sampling margin must be nonnegative");
        }
        Ok(())
    }

    /// Resolves the seed and a label for it.
    pub fn seed(&self) -> Result<(String, WeierstrassSeed)> {
        match &self.seed {
            SeedRef::Builtin(name) => match builtin_seed(name) {
                Some(s) => Ok((name.clone(), s)),
                None => bail!("unknown built-in seed {name:?}; available: {}", BUILTIN_SEEDS.join(", ")),
            },
            SeedRef::Bundle { bundle } => {
                let text = fs::read_to_string(bundle).with_context(|| format!("reading bundle {}", bundle.display()))?;
                let b: Bundle = serde_json::from_str(&text).context("parsing bundle")?;
                Ok((b.label, b.seed.to_seed()?))
            }
            SeedRef::Inline(spec) => Ok(("inline".into(), spec.to_seed()?)),
        }
    }

    pub fn surface(&self) -> Result<(String, WeierstrassSurface)> {
        let (label, seed) = self.seed()?;
        Ok((label, WeierstrassSurface::new(seed)?))
    }

    /// Sample points inside the chart domain.
    pub fn sample_points(&self, chart: &dyn Chart) -> Result<Vec<Vec<f64>>> {
        let d = chart.dim();
        let domain = chart.domain().shrunk(self.sampling.margin);
        let region = match &self.sampling.sample_box {
            Some(b) => {
                let r = CoordBox::new(b.lo.clone(), b.hi.clone());
                if r.dim() != d || !domain.contains(&r.lo) || !domain.contains(&r.hi) {
                    bail!("sampling box {b:?} is not inside the chart domain {domain:?}");
                }
                r
            }
            None => domain,
        };
        let counts = self.sampling.counts.clone().unwrap_or_else(|| vec![if d <= 2 { 10 } else { 3 }; d]);
        if counts.len() != d {
            bail!("sampling counts have {} entries for a {d}-dimensional chart", counts.len());
        }
        Ok(region.grid(&counts)?)
    }
}

// ---------------------------------------------------------------------------
// generate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpec {
    pub alphas: Vec<Vec<SeriesSpec>>,
    pub phis: Vec<Vec<SeriesSpec>>,
    /// `delta, delta', .., delta^(n)`.
    pub delta_derivs: Vec<Vec<SeriesSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartMeta {
    pub coord_names: Vec<String>,
    pub ambient_dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Everything `generate` writes: the seed, its chain and chart metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub label: String,
    pub n: usize,
    /// Length of `delta`, `2n + 1`.
    pub delta_dim: usize,
    pub seed: SeedSpec,
    pub chain: ChainSpec,
    pub chart: ChartMeta,
}

fn vector_spec(v: &SeriesVector) -> Vec<SeriesSpec> {
    v.components().iter().map(SeriesSpec::from_series).collect()
}

pub fn build_bundle(cfg: &RunConfig) -> Result<Bundle> {
    let (label, surface) = cfg.surface()?;
    let chain = &surface.chain;
    let f = surface.f();
    Ok(Bundle {
        label,
        n: surface.seed.n,
        delta_dim: chain.delta().dim(),
        seed: SeedSpec::from_seed(&surface.seed),
        chain: ChainSpec {
            alphas: chain.alphas.iter().map(vector_spec).collect(),
            phis: chain.phis.iter().map(vector_spec).collect(),
            delta_derivs: chain.delta_derivs.iter().map(vector_spec).collect(),
        },
        chart: ChartMeta {
            coord_names: f.coord_names(),
            ambient_dim: f.ambient_dim(),
            lo: f.domain().lo.clone(),
            hi: f.domain().hi.clone(),
        },
    })
}

/// Writes `bundle.json` into the output directory and returns its path.
pub fn cmd_generate(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    let bundle = build_bundle(cfg)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("bundle.json");
    fs::write(&path, serde_json::to_string_pretty(&bundle)? + "\n")?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub control: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub reports: Vec<ResidualReport>,
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.reports.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: String,
    pub points: usize,
    pub pass: bool,
    pub suites: Vec<SuiteOutcome>,
}

impl VerifyReport {
    /// 0 iff every non-control suite passes.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!("seed {}  points {}\n{}\n", self.seed, self.points, ResidualReport::table_header());
        for s in &self.suites {
            match &s.error {
                Some(e) => out.push_str(&format!("{:<44} ERROR  {e}\n", s.suite)),
                None => s.reports.iter().for_each(|r| {
                    out.push_str(&r.table_row());
                    out.push('\n');
                }),
            }
        }
        out.push_str(if self.pass { "overall: pass\n" } else { "overall: FAIL\n" });
        out
    }
}

/// Runs the configured suites (or `only`, when nonempty).
pub fn run_verify(cfg: &RunConfig, only: &[String]) -> Result<VerifyReport> {
    let names = expand_suites(if only.is_empty() { &cfg.suites } else { only })?;
    let (label, surface) = cfg.surface()?;
    let points = cfg.sample_points(surface.f().as_ref())?;
    let n_points = points.len();
    let mut ctx = SuiteContext::new(surface, points);
    ctx.tolerances = cfg.tolerances.clone();
    let suites: Vec<SuiteOutcome> = names
        .iter()
        .map(|name| {
            log::info!("suite {name}");
            match run_suite(&ctx, name) {
                Ok(reports) => SuiteOutcome { suite: name.to_string(), control: is_control(name), error: None, reports },
                Err(e) => SuiteOutcome {
                    suite: name.to_string(),
                    control: is_control(name),
                    error: Some(e.to_string()),
                    reports: vec![],
                },
            }
        })
        .collect();
    let pass = suites.iter().filter(|s| !s.control).all(SuiteOutcome::pass) && suites.iter().all(|s| s.error.is_none());
    Ok(VerifyReport { seed: label, points: n_points, pass, suites })
}

/// Runs the suites and writes `report.json` and `report.txt`.
pub fn cmd_verify(cfg: &RunConfig, only: &[String], out_dir: &Path) -> Result<VerifyReport> {
    let report = run_verify(cfg, only)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(out_dir.join("report.txt"), report.table())?;
    Ok(report)
}

/// Expected verdict of every report for a built-in seed under the default
/// configuration: `pass`, `expected-fail` or `not-applicable`.
pub fn expected_manifest(name: &str) -> Option<BTreeMap<String, String>> {
    let text = match name {
        "enneper" => include_str!("../manifests/enneper.json"),
        "catenoid" => include_str!("../manifests/catenoid.json"),
        "m4r5" => include_str!("../manifests/m4r5.json"),
        _ => return None,
    };
    Some(serde_json::from_str(text).expect("manifest is valid JSON"))
}

/// Verdicts of a report in manifest form.
pub fn manifest_of(report: &VerifyReport) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    for s in &report.suites {
        for r in &s.reports {
            let v = match (r.control, r.pass, r.points) {
                (_, true, 0) => "not-applicable",
                (false, true, _) => "pass",
                (true, true, _) => "expected-fail",
                (false, false, _) => "FAIL",
                (true, false, _) => "CONTROL-MISSED",
            };
            m.insert(r.identity.clone(), v.to_string());
        }
    }
    m
}
