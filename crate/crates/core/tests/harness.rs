use std::fs;
use std::path::Path;

use glvortex::harness::compare::{compare, ode_as_record};
use glvortex::harness::{execute, run_experiment, ExperimentKind, RunConfig};
use glvortex::ode::integrate;
use glvortex::Error;

fn base(kind: &str, eps: f64, t_final: f64, vortices: &str) -> RunConfig {
    RunConfig::from_toml_str(&format!(
        r#"
kind = "{kind}"
eps = {eps}
lambda0 = 1.0

[domain]
extent = [1.0, 1.0]

[time]
t_final = {t_final}
track_interval = 0.005

{vortices}

[profile]
r_max = 20.0
density = 1000
"#
    ))
    .unwrap()
}

const CENTERED: &str = "[[vortices]]\nposition = [0.5, 0.5]\ndegree = 1\n";

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn ode_run_of_a_stationary_vortex_has_constant_positions() {
    let dir = tempfile::tempdir().unwrap();
    let rc = base("ode", 0.05, 1.0, CENTERED);
    run_experiment(&rc, dir.path(), 1).unwrap();
    let x = column(&dir.path().join("ode.csv"), "x0");
    let y = column(&dir.path().join("ode.csv"), "y0");
    assert!(x.len() > 2);
    assert!(x.iter().chain(&y).all(|v| (v - 0.5).abs() < 1e-6));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn zero_horizon_simulation_writes_initial_diagnostics_only() {
    let dir = tempfile::tempdir().unwrap();
    let rc = base("simulate", 0.05, 0.0, CENTERED);
    let out = run_experiment(&rc, dir.path(), 1).unwrap();
    assert_eq!(out.record.unwrap().frames.len(), 1);
    assert_eq!(column(&dir.path().join("trajectory.csv"), "t"), vec![0.0]);
}

#[test]
fn outputs_are_reproducible_and_rerunnable_from_the_manifest() {
    let rc = base("simulate", 0.05, 0.02, CENTERED);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&rc, a.path(), 1).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let again = RunConfig::from_toml_str(manifest["config_toml"].as_str().unwrap()).unwrap();
    assert_eq!(again, rc);
    run_experiment(&again, b.path(), 1).unwrap();
    for f in ["trajectory.csv", "long.csv", "record.json", "manifest.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn sweep_writes_one_directory_per_member_and_a_summary() {
    let mut rc = base("sweep", 0.05, 0.02, CENTERED);
    rc.sweep.eps = vec![0.06, 0.05, 0.04];
    rc.sweep.member = ExperimentKind::Compare;
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&rc, dir.path(), 2).unwrap();
    let summary = out.sweep.unwrap();
    assert_eq!(summary.rows.len(), 3);
    for row in &summary.rows {
        assert!(row.error.is_none(), "{row:?}");
        assert!(dir.path().join(&row.dir).join("comparison.csv").exists());
        assert!(row.sup_eta.unwrap() <= 2.0 * row.h);
    }
    assert_eq!(column(&dir.path().join("summary.csv"), "eps"), vec![0.06, 0.05, 0.04]);
}

#[test]
fn self_comparison_of_the_ode_record_vanishes() {
    let rc = base(
        "compare",
        0.05,
        0.3,
        "[[vortices]]\nposition = [0.3, 0.45]\ndegree = 1\n[[vortices]]\nposition = [0.7, 0.55]\ndegree = 1\n",
    );
    let params = rc.ode_params().unwrap();
    let tr = integrate(&rc.vortex_config().unwrap(), &params, 0.3).unwrap();
    let rec = ode_as_record(&tr, &params, rc.scaling().unwrap());
    let c = compare(&rec, &tr, &params, false).unwrap();
    assert!(c.sup_eta < 1e-12);
    let r_max = c.r_norm.iter().copied().fold(0.0, f64::max);
    let scale = c.xi_dot.iter().flatten().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    assert!(r_max < 1e-2 * scale, "{r_max} vs {scale}");
    assert!(c.identity_defect < 1e-2 * scale);
}

#[test]
fn compare_rejects_mismatched_records() {
    let rc = base("compare", 0.05, 0.2, CENTERED);
    let params = rc.ode_params().unwrap();
    let tr = integrate(&rc.vortex_config().unwrap(), &params, 0.2).unwrap();
    let short = integrate(&rc.vortex_config().unwrap(), &params, 0.1).unwrap();
    let rec = ode_as_record(&tr, &params, rc.scaling().unwrap());
    assert!(matches!(compare(&rec, &short, &params, false), Err(Error::HorizonMismatch(_))));
}

#[test]
fn stationary_compare_and_diagnostics() {
    let rc = base("compare", 0.04, 0.1, CENTERED);
    let out = execute(&rc).unwrap();
    let h = rc.grid().unwrap().h();
    let c = out.comparison.unwrap();
    assert!(c.sup_eta <= 2.0 * h);
    let d = out.diagnostics.unwrap();
    let first = &d.energy[0];
    let last = d.energy.last().unwrap();
    assert!((first.offset - last.offset).abs() <= 1.0);
    assert!(d.kinetic >= 0.0 && d.kinetic.is_finite());
}

#[test]
fn vortex_free_diagnostics_vanish() {
    let rc = base("diagnose", 0.1, 0.02, "");
    let d = execute(&rc).unwrap().diagnostics.unwrap();
    assert!(d.energy.iter().all(|e| e.energy.abs() < 1e-20));
    assert!(d.kinetic.abs() < 1e-20);
    assert!(d.max_abs_div_j() < 1e-12);
    for s in &d.snapshots {
        assert!(s.equipartition.is_empty());
        assert!(s.energy_concentration.iter().all(|(a, b)| a.abs() < 1e-20 && *b == 0.0));
    }
}

fn single_off_center(kind: &str, t_final: f64, forcing: &str) -> RunConfig {
    RunConfig::from_toml_str(&format!(
        r#"
kind = "{kind}"
eps = 0.08
lambda0 = 1.0

[domain]
extent = [2.0, 2.0]

[time]
t_final = {t_final}

[[vortices]]
position = [0.85, 1.1]
degree = 1

{forcing}
"#
    ))
    .unwrap()
}

#[test]
fn energy_and_stress_concentrate_at_the_core() {
    let base = single_off_center("diagnose", 0.0, "");
    let mut energy_gaps = Vec::new();
    let mut stress_gaps = Vec::new();
    for eps in [0.08, 0.06, 0.04, 0.03] {
        let d = execute(&base.with_eps(eps)).unwrap().diagnostics.unwrap();
        let s = &d.snapshots[0];
        energy_gaps.push(s.energy_concentration.iter().map(|(v, t)| (v - t).abs()).collect::<Vec<_>>());
        stress_gaps.push(
            s.stress_concentration
                .iter()
                .map(|(m, t)| ((m[0][0] - t).powi(2) + 2.0 * m[0][1].powi(2) + (m[1][1] - t).powi(2)).sqrt())
                .collect::<Vec<_>>(),
        );
    }
    for gaps in [&energy_gaps, &stress_gaps] {
        for m in 0..gaps[0].len() {
            assert!(gaps.windows(2).all(|w| w[1][m] < w[0][m]), "{gaps:?}");
        }
    }
}

#[test]
fn forced_runs_keep_energy_and_kinetic_bounded() {
    let base = single_off_center(
        "diagnose",
        0.2,
        "[fields.f]\nfamily = \"constant\"\nvalue = [1.0, 0.5]\ncutoff = { inner = 0.2, outer = 0.5 }\n\n[fields.g]\nfamily = \"rotation\"\nomega = 0.5\ncenter = [1.0, 1.0]\ncutoff = { inner = 0.2, outer = 0.5 }\n",
    );
    let mut kinetic = Vec::new();
    for eps in [0.08, 0.06, 0.04] {
        let d = execute(&base.with_eps(eps)).unwrap().diagnostics.unwrap();
        let excess = d.energy.iter().filter(|e| e.excess.is_finite()).map(|e| e.excess.abs()).fold(0.0, f64::max);
        assert!(excess <= base.tracking.excess_threshold, "{excess}");
        kinetic.push(d.kinetic);
    }
    let (lo, hi) = (kinetic.iter().cloned().fold(f64::INFINITY, f64::min), kinetic.iter().cloned().fold(0.0, f64::max));
    assert!(hi <= 2.0 * lo, "{kinetic:?}");
}
