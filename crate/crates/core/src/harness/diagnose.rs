//! Energy-bound ratios, kinetic integral, `div j` pairings, conservation
//! residuals, equipartition defects and concentration pairings of a PDE
//! record.
//!
//! `div j` is paired weakly, `∫ div j φ = −∫ j · ∇φ`, against
//! `φ_m(x, t) = (1 + t) φ̂_m(x)` with `φ̂_m` the scalar test bank (all
//! vanishing on `∂D`), and integrated in time over the kept snapshots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::ComplexField;
use crate::grid::Point;
use crate::ops::{self, dist, Region};
use crate::pde::residuals::{aggregate, ResidualReport};
use crate::pde::simulate::{bank_collar, TrajectoryRecord};
use crate::testfn::{fd_gradient, TestBank, BANK};
use crate::track::{energy_concentration, equipartition_defect, stress_concentration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBounds {
    pub t: f64,
    pub energy: f64,
    /// `E_ε / log(1/ε)`.
    pub ratio: f64,
    /// `E_ε − πN log(1/ε)`.
    pub offset: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    /// Vortex positions interpolated from the tracked frames.
    pub positions: Vec<Point>,
    /// Radius of the equipartition balls.
    pub sigma: f64,
    pub equipartition: Vec<f64>,
    /// `∫ k_ε e_ε φ̂_m` against `π Σ φ̂_m(ξ_k)`.
    pub energy_concentration: Vec<(f64, f64)>,
    /// `∫ φ̂_m k_ε ∇u⊗∇u` against `π Σ φ̂_m(ξ_k) Id`.
    pub stress_concentration: Vec<([[f64; 2]; 2], f64)>,
    /// `∫ div j φ̂_m` at this instant.
    pub div_j: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eps: f64,
    pub energy: Vec<EnergyBounds>,
    pub kinetic: f64,
    /// `∫∫ div j φ_m` over the snapshot times, per bank member.
    pub div_j: [f64; 3],
    pub residuals: Option<ResidualReport>,
    pub snapshots: Vec<SnapshotDiagnostics>,
}

impl Diagnostics {
    pub fn max_abs_div_j(&self) -> f64 {
        self.div_j.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn positions_at(record: &TrajectoryRecord, t: f64) -> Vec<Point> {
    let f = &record.frames;
    let k = f.partition_point(|x| x.t <= t);
    if k == 0 {
        return f[0].positions.clone();
    }
    if k == f.len() {
        return f[k - 1].positions.clone();
    }
    let (a, b) = (&f[k - 1], &f[k]);
    let th = (t - a.t) / (b.t - a.t);
    a.positions
        .iter()
        .zip(&b.positions)
        .map(|(p, q)| [p[0] + th * (q[0] - p[0]), p[1] + th * (q[1] - p[1])])
        .collect()
}

/// Equipartition radius: half the distance to the nearest other vortex or
/// the boundary, at most 0.5.
pub fn equipartition_radius(record: &TrajectoryRecord, pos: &[Point]) -> f64 {
    let mut r: f64 = 0.5;
    for (k, a) in pos.iter().enumerate() {
        r = r.min(0.5 * record.grid.dist_to_boundary(*a));
        for b in &pos[k + 1..] {
            r = r.min(0.5 * dist(*a, *b));
        }
    }
    r
}

fn snapshot_diagnostics(record: &TrajectoryRecord, u: &ComplexField, bank: &TestBank) -> SnapshotDiagnostics {
    let scaling = &record.scaling;
    let positions = positions_at(record, u.time);
    let sigma = equipartition_radius(record, &positions);
    let equipartition = positions
        .iter()
        .map(|p| equipartition_defect(u, *p, sigma, scaling))
        .collect();
    let j = ops::current(u);
    let mut div_j = [0.0; 3];
    let mut energy_conc = Vec::new();
    let mut stress_conc = Vec::new();
    for (m, member) in BANK.iter().enumerate() {
        let phi = |x: Point| bank.scalar(*member, x);
        let at_vortices: f64 = PI * positions.iter().map(|p| phi(*p)).sum::<f64>();
        energy_conc.push((energy_concentration(u, scaling, phi), at_vortices));
        stress_conc.push((stress_concentration(u, scaling, phi), at_vortices));
        let eta = 0.25 * u.grid.h();
        div_j[m] = -ops::pair_vector(&j, |x| fd_gradient(&phi, x, eta), &Region::Whole);
    }
    SnapshotDiagnostics {
        t: u.time,
        positions,
        sigma,
        equipartition,
        energy_concentration: energy_conc,
        stress_concentration: stress_conc,
        div_j,
    }
}

pub fn diagnose(record: &TrajectoryRecord) -> Result<Diagnostics> {
    let scaling = &record.scaling;
    let n = record.degrees.len() as f64;
    let log = scaling.log_inv_eps();
    let energy = record
        .frames
        .iter()
        .map(|f| EnergyBounds {
            t: f.t,
            energy: f.energy,
            ratio: f.energy / log,
            offset: f.energy - PI * n * log,
            excess: f.excess,
        })
        .collect();
    let kinetic = record.frames.last().map_or(0.0, |f| f.kinetic);
    let bank = TestBank::new(&record.grid, bank_collar(&record.grid));
    let snapshots: Vec<SnapshotDiagnostics> = record
        .snapshots
        .iter()
        .map(|u| snapshot_diagnostics(record, u, &bank))
        .collect();
    let mut div_j = [0.0; 3];
    for w in snapshots.windows(2) {
        let dt = w[1].t - w[0].t;
        for m in 0..3 {
            div_j[m] += 0.5 * dt * ((1.0 + w[0].t) * w[0].div_j[m] + (1.0 + w[1].t) * w[1].div_j[m]);
        }
    }
    let residuals = (!record.residuals.is_empty()).then(|| {
        let r = &record.residuals;
        aggregate(r, r[0].t, r[r.len() - 1].t)
    });
    Ok(Diagnostics {
        eps: scaling.eps,
        energy,
        kinetic,
        div_j,
        residuals,
        snapshots,
    })
}
