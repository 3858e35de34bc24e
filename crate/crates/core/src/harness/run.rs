//! Experiment orchestration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::compare::{compare, ComparisonReport};
use crate::harness::config::{ExperimentKind, RunConfig};
use crate::harness::diagnose::{diagnose, Diagnostics};
use crate::harness::output::{self, LongFormat, Manifest};
use crate::ode::{integrate, OdeStatus, OdeTrajectory};
use crate::pde::simulate::{simulate, TrajectoryRecord};

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub record: Option<TrajectoryRecord>,
    pub ode: Option<OdeTrajectory>,
    pub comparison: Option<ComparisonReport>,
    pub diagnostics: Option<Diagnostics>,
    pub sweep: Option<SweepSummary>,
}

/// Runs one non-sweep experiment in memory.
pub fn execute(rc: &RunConfig) -> Result<RunOutcome> {
    rc.validate()?;
    let mut out = RunOutcome::default();
    match rc.kind {
        ExperimentKind::Simulate => {
            out.record = Some(simulate(rc)?);
        }
        ExperimentKind::Ode => {
            out.ode = Some(integrate(&rc.vortex_config()?, &rc.ode_params()?, rc.time.t_final)?);
        }
        ExperimentKind::Diagnose => {
            let r = simulate(rc)?;
            out.diagnostics = Some(diagnose(&r)?);
            out.record = Some(r);
        }
        ExperimentKind::Compare => {
            let r = simulate(rc)?;
            let params = rc.ode_params()?;
            // The last PDE step may overshoot t_final by less than one step.
            let t_end = r.t_end().max(rc.time.t_final);
            let ode = integrate(&rc.vortex_config()?, &params, t_end)?;
            out.comparison = Some(compare(&r, &ode, &params, rc.compare.median_filter)?);
            out.diagnostics = Some(diagnose(&r)?);
            out.record = Some(r);
            out.ode = Some(ode);
        }
        ExperimentKind::Sweep => {
            return Err(Error::config("kind", "use run_experiment for sweeps"));
        }
    }
    Ok(out)
}

fn status_name(s: OdeStatus) -> &'static str {
    match s {
        OdeStatus::Running => "running",
        OdeStatus::Collision => "collision",
        OdeStatus::BoundaryExit => "boundary_exit",
    }
}

fn summary_json(out: &RunOutcome) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    if let Some(r) = &out.record {
        m.insert("pde_status".into(), status_name(r.status).into());
        m.insert("pde_t_star".into(), serde_json::json!(r.t_star));
        m.insert("n1".into(), r.grid.n1().into());
        m.insert("n2".into(), r.grid.n2().into());
        m.insert("h".into(), r.grid.h().into());
        m.insert("dt".into(), r.dt.into());
        m.insert("gamma".into(), r.gamma.into());
        m.insert("steps".into(), (r.step_energies.len() - 1).into());
    }
    if let Some(o) = &out.ode {
        m.insert("ode_status".into(), status_name(o.status).into());
        m.insert("ode_t_star".into(), serde_json::json!(o.t_star));
    }
    if let Some(c) = &out.comparison {
        m.insert("sup_eta".into(), c.sup_eta.into());
        m.insert("int_eta".into(), c.int_eta.into());
        m.insert("mobility_slack".into(), c.mobility.slack.into());
    }
    serde_json::Value::Object(m)
}

/// Writes the outcome of [`execute`] into `dir` with its manifest.
pub fn write_outcome(rc: &RunConfig, out: &RunOutcome, dir: &Path, snapshots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut long = LongFormat::default();
    if let Some(r) = &out.record {
        output::write_trajectory_csv(&dir.join("trajectory.csv"), r)?;
        files.push("trajectory.csv".to_string());
        output::write_json(&dir.join("record.json"), r)?;
        files.push("record.json".into());
        if !r.residuals.is_empty() {
            output::write_residuals_csv(&dir.join("residuals.csv"), r)?;
            files.push("residuals.csv".into());
        }
        if snapshots {
            for p in output::write_snapshots(dir, r)? {
                files.push(p.to_string_lossy().into_owned());
            }
        }
        long.add_record(r);
    }
    if let Some(o) = &out.ode {
        output::write_ode_csv(&dir.join("ode.csv"), o)?;
        files.push("ode.csv".into());
        long.add_ode(o);
    }
    if let Some(c) = &out.comparison {
        output::write_comparison_csv(&dir.join("comparison.csv"), c)?;
        output::write_json(&dir.join("comparison.json"), c)?;
        files.extend(["comparison.csv".into(), "comparison.json".into()]);
        long.add_comparison(c);
    }
    if let Some(d) = &out.diagnostics {
        output::write_json(&dir.join("diagnostics.json"), d)?;
        files.push("diagnostics.json".into());
        long.add_diagnostics(d);
    }
    long.write(&dir.join("long.csv"))?;
    files.push("long.csv".into());
    files.push("config.toml".into());
    Manifest::new(rc, files, summary_json(out)).write(dir)
}

/// One row of the sweep convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub n1: usize,
    pub h: f64,
    pub dir: String,
    pub pde_status: String,
    pub t_star_pde: Option<f64>,
    pub t_star_ode: Option<f64>,
    pub sup_eta: Option<f64>,
    pub int_eta: Option<f64>,
    pub mobility_vortex: Option<f64>,
    pub kinetic: Option<f64>,
    pub excess_initial: Option<f64>,
    pub excess_max_abs: Option<f64>,
    /// Mean equipartition defect over the vortices at `t = 0`.
    pub equipartition_initial: Option<f64>,
    pub div_j_max: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

fn member_dir(eps: f64) -> String {
    format!("eps_{eps}")
}

fn sweep_row(rc: &RunConfig, dir: &str, res: &Result<RunOutcome>) -> SweepRow {
    let grid = rc.grid().ok();
    let mut row = SweepRow {
        eps: rc.eps,
        n1: grid.map_or(0, |g| g.n1()),
        h: grid.map_or(f64::NAN, |g| g.h()),
        dir: dir.to_string(),
        pde_status: String::new(),
        t_star_pde: None,
        t_star_ode: None,
        sup_eta: None,
        int_eta: None,
        mobility_vortex: None,
        kinetic: None,
        excess_initial: None,
        excess_max_abs: None,
        equipartition_initial: None,
        div_j_max: None,
        error: None,
    };
    let out = match res {
        Ok(o) => o,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    if let Some(r) = &out.record {
        row.pde_status = status_name(r.status).into();
        row.t_star_pde = r.t_star;
        row.kinetic = r.frames.last().map(|f| f.kinetic);
        row.excess_initial = r.frames.first().map(|f| f.excess);
        let horizon = out.comparison.as_ref().map_or(f64::INFINITY, |c| c.horizon);
        row.excess_max_abs = Some(
            r.frames
                .iter()
                .filter(|f| f.t <= horizon && f.excess.is_finite())
                .map(|f| f.excess.abs())
                .fold(0.0, f64::max),
        );
    }
    if let Some(o) = &out.ode {
        row.t_star_ode = o.t_star;
    }
    if let Some(c) = &out.comparison {
        row.sup_eta = Some(c.sup_eta);
        row.int_eta = Some(c.int_eta);
        row.mobility_vortex = Some(c.mobility.vortex);
        row.kinetic = Some(c.mobility.kinetic);
    }
    if let Some(d) = &out.diagnostics {
        row.div_j_max = Some(d.max_abs_div_j());
        row.equipartition_initial = d.snapshots.first().and_then(|s| {
            (!s.equipartition.is_empty()).then(|| s.equipartition.iter().sum::<f64>() / s.equipartition.len() as f64)
        });
    }
    row
}

/// Runs every sweep member (up to `workers` at a time), each in its own
/// subdirectory of `dir` when given.
pub fn sweep(rc: &RunConfig, dir: Option<&Path>, workers: usize) -> Result<(SweepSummary, Vec<Result<RunOutcome>>)> {
    rc.validate()?;
    let members: Vec<RunConfig> = rc
        .sweep
        .eps
        .iter()
        .map(|&e| {
            let mut m = rc.with_eps(e);
            m.kind = rc.sweep.member;
            m
        })
        .collect();
    let results: Vec<Mutex<Option<Result<RunOutcome>>>> = members.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, members.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(m) = members.get(i) else { break };
                log::info!("sweep member eps = {}", m.eps);
                let res = execute(m).and_then(|o| {
                    if let Some(d) = dir {
                        write_outcome(m, &o, &d.join(member_dir(m.eps)), m.output.snapshots)?;
                    }
                    Ok(o)
                });
                *results[i].lock().unwrap() = Some(res);
            });
        }
    });
    let results: Vec<Result<RunOutcome>> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every member ran"))
        .collect();
    let rows = members
        .iter()
        .zip(&results)
        .map(|(m, r)| sweep_row(m, &member_dir(m.eps), r))
        .collect();
    let summary = SweepSummary { rows };
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        write_sweep_summary(&d.join("summary.csv"), &summary)?;
        let files = summary
            .rows
            .iter()
            .map(|r| r.dir.clone())
            .chain(["summary.csv".to_string(), "config.toml".to_string()])
            .collect();
        Manifest::new(rc, files, serde_json::to_value(&summary)?).write(d)?;
    }
    Ok((summary, results))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), output::num)
}

pub fn write_sweep_summary(path: &Path, s: &SweepSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "eps",
        "n1",
        "h",
        "dir",
        "pde_status",
        "t_star_pde",
        "t_star_ode",
        "sup_eta",
        "int_eta",
        "mobility_vortex",
        "kinetic",
        "excess_initial",
        "excess_max_abs",
        "equipartition_initial",
        "div_j_max",
        "error",
    ])?;
    for r in &s.rows {
        w.write_record([
            output::num(r.eps),
            r.n1.to_string(),
            output::num(r.h),
            r.dir.clone(),
            r.pde_status.clone(),
            opt(r.t_star_pde),
            opt(r.t_star_ode),
            opt(r.sup_eta),
            opt(r.int_eta),
            opt(r.mobility_vortex),
            opt(r.kinetic),
            opt(r.excess_initial),
            opt(r.excess_max_abs),
            opt(r.equipartition_initial),
            opt(r.div_j_max),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the configured experiment and writes its artifacts under `dir`.
/// A sweep reports the first member error after writing the summary.
pub fn run_experiment(rc: &RunConfig, dir: &Path, workers: usize) -> Result<RunOutcome> {
    if rc.kind == ExperimentKind::Sweep {
        let (summary, results) = sweep(rc, Some(dir), workers)?;
        if let Some(e) = results.into_iter().find_map(|r| r.err()) {
            return Err(e);
        }
        return Ok(RunOutcome {
            sweep: Some(summary),
            ..Default::default()
        });
    }
    let out = execute(rc)?;
    write_outcome(rc, &out, dir, rc.output.snapshots)?;
    Ok(out)
}

/// Output directory: the explicit one, else the config's, else `./glv-out`.
pub fn output_dir(explicit: Option<PathBuf>, rc: &RunConfig) -> PathBuf {
    explicit
        .or_else(|| rc.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("glv-out"))
}
