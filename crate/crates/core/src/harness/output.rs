//! CSV, JSON and snapshot writers.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::harness::compare::ComparisonReport;
use crate::harness::config::RunConfig;
use crate::harness::diagnose::Diagnostics;
use crate::ode::OdeTrajectory;
use crate::pde::simulate::TrajectoryRecord;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// `t, step, x_k, y_k, d_k…, energy, w, excess, kinetic, min_modulus`.
pub fn write_trajectory_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string(), "step".into()];
    for k in 0..record.degrees.len() {
        header.extend([format!("x{k}"), format!("y{k}"), format!("d{k}")]);
    }
    header.extend(["energy", "w", "excess", "kinetic", "min_modulus"].map(String::from));
    w.write_record(&header)?;
    for f in &record.frames {
        let mut row = vec![num(f.t), f.step.to_string()];
        for (p, d) in f.positions.iter().zip(&record.degrees) {
            row.extend([num(p[0]), num(p[1]), d.to_string()]);
        }
        row.extend([f.energy, f.w, f.excess, f.kinetic, f.min_modulus].map(num));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "law", "term", "norm"])?;
    for r in &record.residuals {
        for (law, res) in [("energy", &r.energy), ("jacobian", &r.jacobian), ("mass", &r.mass)] {
            for (name, v) in &res.terms {
                w.write_record([num(r.t), law.into(), name.clone(), num(*v)])?;
            }
            w.write_record([num(r.t), law.into(), "residual".into(), num(res.residual)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t, x_k, y_k`, then the W, F and G terms of the right-hand side per vortex.
pub fn write_ode_csv(path: &Path, tr: &OdeTrajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    for k in 0..tr.degrees.len() {
        header.extend(
            ["x", "y", "vx", "vy", "w_term_x", "w_term_y", "f_term_x", "f_term_y", "g_term_x", "g_term_y"]
                .map(|s| format!("{s}{k}")),
        );
    }
    w.write_record(&header)?;
    for s in &tr.samples {
        let mut row = vec![num(s.t)];
        for k in 0..tr.degrees.len() {
            let t = &s.terms;
            row.extend(
                [
                    s.positions[k][0],
                    s.positions[k][1],
                    t.velocity[k][0],
                    t.velocity[k][1],
                    t.w_term[k][0],
                    t.w_term[k][1],
                    t.f_term[k][0],
                    t.f_term[k][1],
                    t.g_term[k][0],
                    t.g_term[k][1],
                ]
                .map(num),
            );
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv(path: &Path, c: &ComparisonReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    for k in 0..c.degrees.len() {
        header.extend(["xi_x", "xi_y", "a_x", "a_y", "eta_x", "eta_y", "r_x", "r_y"].map(|s| format!("{s}{k}")));
    }
    header.extend(["eta_norm", "r_norm", "r_identity"].map(String::from));
    w.write_record(&header)?;
    for i in 0..c.times.len() {
        let mut row = vec![num(c.times[i])];
        for k in 0..c.degrees.len() {
            row.extend(
                [
                    c.xi[i][k][0],
                    c.xi[i][k][1],
                    c.a[i][k][0],
                    c.a[i][k][1],
                    c.eta[i][k][0],
                    c.eta[i][k][1],
                    c.r[i][k][0],
                    c.r[i][k][1],
                ]
                .map(num),
            );
        }
        row.extend([c.eta_norm[i], c.r_norm[i], c.r_identity[i]].map(num));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready long format: `series, t, key, value`.
#[derive(Default)]
pub struct LongFormat {
    rows: Vec<(String, f64, String, f64)>,
}

impl LongFormat {
    pub fn push(&mut self, series: &str, t: f64, key: impl Into<String>, value: f64) {
        self.rows.push((series.to_string(), t, key.into(), value));
    }

    pub fn add_record(&mut self, r: &TrajectoryRecord) {
        for f in &r.frames {
            for (k, p) in f.positions.iter().enumerate() {
                self.push("pde", f.t, format!("x{k}"), p[0]);
                self.push("pde", f.t, format!("y{k}"), p[1]);
            }
            self.push("pde", f.t, "energy", f.energy);
            self.push("pde", f.t, "excess", f.excess);
            self.push("pde", f.t, "kinetic", f.kinetic);
        }
    }

    pub fn add_ode(&mut self, tr: &OdeTrajectory) {
        for s in &tr.samples {
            for (k, p) in s.positions.iter().enumerate() {
                self.push("ode", s.t, format!("x{k}"), p[0]);
                self.push("ode", s.t, format!("y{k}"), p[1]);
            }
        }
    }

    pub fn add_comparison(&mut self, c: &ComparisonReport) {
        for i in 0..c.times.len() {
            self.push("compare", c.times[i], "eta_norm", c.eta_norm[i]);
            self.push("compare", c.times[i], "r_norm", c.r_norm[i]);
        }
    }

    pub fn add_diagnostics(&mut self, d: &Diagnostics) {
        for e in &d.energy {
            self.push("diagnose", e.t, "energy_ratio", e.ratio);
            self.push("diagnose", e.t, "energy_offset", e.offset);
        }
        for s in &d.snapshots {
            for (k, v) in s.equipartition.iter().enumerate() {
                self.push("diagnose", s.t, format!("equipartition{k}"), *v);
            }
            for (m, v) in s.div_j.iter().enumerate() {
                self.push("diagnose", s.t, format!("div_j{m}"), *v);
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["series", "t", "key", "value"])?;
        for (s, t, k, v) in &self.rows {
            w.write_record([s.clone(), num(*t), k.clone(), num(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes kept snapshots as `snapshots/snap_NNNNN.glv`.
pub fn write_snapshots(dir: &Path, record: &TrajectoryRecord) -> Result<Vec<PathBuf>> {
    let sub = dir.join("snapshots");
    fs::create_dir_all(&sub)?;
    let mut out = Vec::new();
    for (i, u) in record.snapshots.iter().enumerate() {
        let name = format!("snap_{i:05}.glv");
        let mut w = BufWriter::new(File::create(sub.join(&name))?);
        u.write_snapshot(&mut w, record.scaling.eps)?;
        w.flush()?;
        out.push(PathBuf::from("snapshots").join(name));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    /// SHA-256 of `config_toml`.
    pub config_sha256: String,
    /// The full configuration; `glv <kind> --config` on this text reruns the experiment.
    pub config_toml: String,
    /// No stochastic components; recorded for completeness.
    pub seed: Option<u64>,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(rc: &RunConfig, files: Vec<String>, summary: serde_json::Value) -> Self {
        let config_toml = rc.to_toml_string();
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: serde_json::to_value(rc.kind)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config_toml,
            seed: None,
            files,
            summary,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("config.toml"), &self.config_toml)?;
        write_json(&dir.join("manifest.json"), self)
    }
}
