use std::fs;
use std::path::Path;
use std::process::Command;

use kaehler_cli::export::{read_obj_vertices, rigid_alignment_residual};
use kaehler_cli::*;
use kaehler_core::surfaces::catenoid_point;
use kaehler_core::weierstrass::{m4r5_seed, SeedSpec};
use num_complex::Complex64;

fn config(seed: &str) -> RunConfig {
    RunConfig { seed: SeedRef::Builtin(seed.into()), ..RunConfig::default() }
}

fn write_config(dir: &Path, cfg: &RunConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn kaehler(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kaehler")).args(args).output().unwrap()
}

#[test]
fn defaults_round_trip() {
    let cfg = RunConfig::from_json(&RunConfig::defaults_json()).unwrap();
    assert_eq!(cfg, RunConfig::default());
    let out = kaehler(&["--print-defaults"]);
    assert!(out.status.success());
    assert_eq!(RunConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap(), RunConfig::default());
}

#[test]
fn config_rejects_unknown_suites_and_short_grids() {
    assert!(RunConfig::from_json(r#"{"seed": "m4r5", "suites": ["nope"]}"#).is_err());
    assert!(RunConfig::from_json(r#"{"seed": "m4r5", "sampling": {"counts": [1, 3, 3, 3]}}"#).is_err());
    assert!(config("nope").seed().is_err());
}

#[test]
fn enneper_bundle_has_closed_form_delta() {
    let b = build_bundle(&config("enneper")).unwrap();
    assert_eq!((b.n, b.delta_dim), (1, 3));
    let delta = &b.chain.delta_derivs[0];
    let c = |k: usize, j: usize| delta[k].coeffs.get(j).copied().unwrap_or([0.0, 0.0]);
    // ((1 - z^2)/2, i (1 + z^2)/2, z)
    assert_eq!([c(0, 0), c(0, 1), c(0, 2)], [[0.5, 0.0], [0.0, 0.0], [-0.5, 0.0]]);
    assert_eq!([c(1, 0), c(1, 1), c(1, 2)], [[0.0, 0.5], [0.0, 0.0], [0.0, 0.5]]);
    assert_eq!([c(2, 0), c(2, 1), c(2, 2)], [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]);
}

#[test]
fn m4r5_bundle_and_bundle_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = cmd_generate(&config("m4r5"), dir.path()).unwrap();
    let b: Bundle = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((b.n, b.delta_dim, b.chart.ambient_dim), (2, 5, 5));
    assert_eq!(b.chart.coord_names, ["x", "y", "u1", "v1"]);
    let again = cmd_generate(&config("m4r5"), &dir.path().join("again")).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(again).unwrap());
    let from_bundle = RunConfig { seed: SeedRef::Bundle { bundle: path }, ..RunConfig::default() };
    assert_eq!(from_bundle.seed().unwrap().1.n, 2);
}

#[test]
fn vanishing_b_is_rejected_with_the_invariant_named() {
    let mut spec = SeedSpec::from_seed(&m4r5_seed());
    spec.b[1].coeffs = vec![[0.0, 0.0]];
    let cfg = RunConfig { seed: SeedRef::Inline(Box::new(spec)), ..RunConfig::default() };
    let err = build_bundle(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("b_{n-1} is never zero"), "{err:#}");
    let dir = tempfile::tempdir().unwrap();
    let out = kaehler(&["generate", "--config", write_config(dir.path(), &cfg).to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b_{n-1} is never zero"));
}

#[test]
fn builtin_seeds_match_their_manifests() {
    for seed in ["enneper", "catenoid", "m4r5"] {
        let report = run_verify(&config(seed), &[]).unwrap();
        assert!(report.pass, "{}", report.table());
        assert_eq!(manifest_of(&report), expected_manifest(seed).unwrap(), "{seed}");
    }
}

#[test]
fn m4r5_rank_is_two_everywhere() {
    let report = run_verify(&config("m4r5"), &["rank".into()]).unwrap();
    let r = &report.suites[0].reports[0];
    assert!(r.pass && r.points == 81 && r.max_residual == 0.0);
}

#[test]
fn controls_are_expected_failures_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &config("enneper"));
    let out_dir = dir.path().join("out");
    let out = kaehler(&["verify", "--config", path.to_str().unwrap(), "--suite", "controls", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert_eq!(text.matches("expected-fail").count(), 6, "{text}");
}

#[test]
fn failing_suite_gives_exit_one_and_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("enneper");
    cfg.suites = vec!["mean_curvature".into(), "bending".into()];
    cfg.tolerances.insert("bending".into(), 0.0);
    let path = write_config(dir.path(), &cfg);
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = kaehler(&["verify", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        (out.status.code(), fs::read(out_dir.join("report.json")).unwrap())
    };
    let (code_a, json_a) = run("a");
    let (code_b, json_b) = run("b");
    assert_eq!((code_a, code_b), (Some(1), Some(1)));
    assert_eq!(json_a, json_b);
}

#[test]
fn bad_config_gives_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"seed\": 3}").unwrap();
    assert_eq!(kaehler(&["verify", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn catenoid_slice_matches_closed_form_after_rigid_alignment() {
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_export(&config("catenoid"), None, dir.path()).unwrap();
    let verts = read_obj_vertices(&files[0]).unwrap();
    assert_eq!(verts.len(), 21 * 21);
    let half = 0.5 / 2f64.sqrt();
    let mut closed = Vec::new();
    for i in 0..21 {
        for j in 0..21 {
            let x = -half + 2.0 * half * i as f64 / 20.0;
            let y = -half + 2.0 * half * j as f64 / 20.0;
            closed.push(catenoid_point(Complex64::new(2.0 + x, y)));
        }
    }
    assert!(rigid_alignment_residual(&verts, &closed).unwrap() < 1e-6);
    let csv = fs::read_to_string(&files[1]).unwrap();
    assert!(csv.starts_with("x,y,X1,X2,X3,trace_rel,rank,bending\n"));
    assert_eq!(csv.lines().count(), 1 + 21 * 21);
}

#[test]
fn theta_sweep_preserves_edge_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("enneper");
    cfg.export = Some(ExportConfig {
        sweep: Some(8),
        counts: [6, 6],
        lo: Some([0.1, 0.2]),
        hi: Some([0.101, 0.201]),
        ..ExportConfig::default()
    });
    let files = cmd_export(&cfg, None, dir.path()).unwrap();
    let objs: Vec<_> = files.iter().filter(|p| p.extension().unwrap() == "obj").collect();
    assert_eq!(objs.len(), 8);
    let edges = |path: &Path| -> Vec<f64> {
        let v = read_obj_vertices(path).unwrap();
        let idx = |i: usize, j: usize| i * 6 + j;
        let mut out = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                if i + 1 < 6 {
                    out.push((&v[idx(i + 1, j)] - &v[idx(i, j)]).norm());
                }
                if j + 1 < 6 {
                    out.push((&v[idx(i, j + 1)] - &v[idx(i, j)]).norm());
                }
            }
        }
        out
    };
    let base = edges(objs[0]);
    for p in &objs[1..] {
        let worst = edges(p).iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst:e}");
    }
}

#[test]
fn export_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("m4r5");
    cfg.export = Some(ExportConfig { counts: [0, 5], ..ExportConfig::default() });
    assert!(format!("{:#}", cmd_export(&cfg, None, dir.path()).unwrap_err()).contains("empty export grid"));
    let cfg = config("m4r5");
    assert!(format!("{:#}", cmd_export(&cfg, Some("x,y,u1=2.0"), dir.path()).unwrap_err()).contains("leaves the domain"));
    assert!(cmd_export(&cfg, Some("x"), dir.path()).is_err());
    assert!(cmd_export(&cfg, Some("x,q"), dir.path()).is_err());
    let files = cmd_export(&cfg, Some("u1,v1,x=0.1,y=-0.1"), dir.path()).unwrap();
    assert_eq!(files.len(), 2);
}
