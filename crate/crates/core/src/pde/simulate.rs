//! Full PDE runs: stepping, tracking, per-frame diagnostics and collision stop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use ndarray::Zip;

use crate::field::{ComplexField, ScalarField, VectorField};
use crate::grid::{EpsilonScaling, Grid, Point};
use crate::harness::config::RunConfig;
use crate::initial::{gamma_constant, well_prepared};
use crate::ode::{collision_radius, OdeStatus};
use crate::ops::{self, dist};
use crate::pde::bc::BoundaryCondition;
use crate::pde::fields::ExternalFields;
use crate::pde::residuals::{step_residuals, StepResiduals};
use crate::pde::step::{default_dt, PdeState, Stepper};
use crate::testfn::{TestBank, BANK};
use crate::track::{detect_vortices, energy_excess, match_tracks, mobility_cap, DetectOptions, VortexConfiguration};

/// One tracked frame. Integrated quantities run from `t = 0` to `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub step: usize,
    /// Ordered as the initial configuration.
    pub positions: Vec<Point>,
    pub energy: f64,
    pub w: f64,
    /// `D_ε = E_ε − W_ε`.
    pub excess: f64,
    /// `k_ε ∫₀ᵗ ∫ |∂_t u|²`.
    pub kinetic: f64,
    /// `k_ε ∫₀ᵗ ∫ (p(u), w_m)` for the vector fields of the test bank.
    pub momentum: [f64; 3],
    pub min_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub scaling: EpsilonScaling,
    pub grid: Grid,
    pub dt: f64,
    pub gamma: f64,
    pub degrees: Vec<i32>,
    pub collision_radius: f64,
    pub status: OdeStatus,
    /// Collision or boundary-exit time, interpolated between frames.
    pub t_star: Option<f64>,
    pub frames: Vec<Frame>,
    /// `E_ε` after every step (index = step number).
    pub step_energies: Vec<f64>,
    pub residuals: Vec<StepResiduals>,
    #[serde(skip)]
    pub snapshots: Vec<ComplexField>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    /// Largest per-step relative energy increase.
    pub fn max_energy_increase(&self) -> f64 {
        self.step_energies
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Boundary collar of the test bank used for the momentum pairings.
pub fn bank_collar(grid: &Grid) -> f64 {
    0.1 * grid.extent()[0].min(grid.extent()[1])
}

/// Solver pieces assembled from a [`RunConfig`].
pub struct Setup {
    pub grid: Grid,
    pub scaling: EpsilonScaling,
    pub bc: BoundaryCondition,
    pub fields: ExternalFields,
    pub config: VortexConfiguration,
    pub u0: ComplexField,
    pub gamma: f64,
    pub dt: f64,
}

impl Setup {
    pub fn new(rc: &RunConfig) -> Result<Self> {
        let grid = rc.grid()?;
        let scaling = rc.scaling()?;
        let bc = rc.boundary(&grid)?;
        let fields = rc.external_fields(&grid);
        fields.check_admissible(&grid, bc.is_neumann(), rc.time.t_final)?;
        let config = rc.vortex_config()?;
        let profile = rc.profile()?;
        let gamma = gamma_constant(&profile)?.gamma;
        let u0 = well_prepared(&config, &scaling, &grid, &bc, &profile)?;
        let dt = match rc.time.dt {
            Some(dt) => dt,
            None => {
                let speed = (0..=4)
                    .map(|k| fields.max_speed(&grid, scaling.k_eps, rc.time.t_final * k as f64 / 4.0))
                    .fold(0.0, f64::max);
                default_dt(&scaling, &grid, speed)
            }
        };
        Ok(Setup {
            grid,
            scaling,
            bc,
            fields,
            config,
            u0,
            gamma,
            dt,
        })
    }
}

struct Accumulators {
    kinetic: f64,
    momentum: [f64; 3],
}

fn frame(
    state: &PdeState,
    positions: Vec<Point>,
    setup: &Setup,
    degrees: &[i32],
    acc: &Accumulators,
    excess_threshold: f64,
) -> Result<Frame> {
    let conf = VortexConfiguration {
        positions: positions.clone(),
        degrees: degrees.to_vec(),
        time: state.t,
    };
    let ex = energy_excess(&state.u, &conf, &setup.scaling, setup.gamma, &setup.bc, excess_threshold);
    // Close to a collision W is not resolvable on the grid; the frame keeps E_ε only.
    let (energy, w, excess) = match ex {
        Ok(r) => (r.energy, r.w, r.excess),
        Err(Error::ConfigTooClose { .. }) => (ops::total_energy(&state.u, &setup.scaling), f64::NAN, f64::NAN),
        Err(e) => return Err(e),
    };
    Ok(Frame {
        t: state.t,
        step: state.step,
        positions,
        energy,
        w,
        excess,
        kinetic: acc.kinetic,
        momentum: acc.momentum,
        min_modulus: state.u.values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min),
    })
}

enum Tracked {
    Ok(Vec<Point>),
    /// Event with the detected positions when detection still succeeded.
    Event(OdeStatus, Option<Vec<Point>>),
    Failed(Error),
}

/// Runs the PDE from well-prepared data to `t_final` or the first collision
/// or boundary exit.
pub fn simulate(rc: &RunConfig) -> Result<TrajectoryRecord> {
    let setup = Setup::new(rc)?;
    simulate_from(rc, &setup)
}

pub fn simulate_from(rc: &RunConfig, setup: &Setup) -> Result<TrajectoryRecord> {
    let grid = setup.grid;
    let scaling = setup.scaling;
    let mut stepper = Stepper::new(grid, scaling, setup.dt, setup.bc.clone(), setup.fields.clone())?;
    stepper.energy_guard = Some(rc.time.energy_guard);
    let r_c = collision_radius(scaling.eps, grid.h());
    let opts = DetectOptions {
        amplitude_threshold: rc.tracking.amplitude_threshold,
        eps: scaling.eps,
        collar: rc.tracking.collar,
    };
    let degrees = setup.config.degrees.clone();
    let bank = TestBank::new(&grid, bank_collar(&grid));
    // Bank vector fields with the trapezoid weights folded in.
    let bank_fields: Vec<VectorField> = BANK
        .iter()
        .map(|m| {
            let mut w = VectorField::from_fn(grid, |x| bank.vector(*m, x));
            for ((i, j), v) in w.x.indexed_iter_mut() {
                *v *= grid.trapezoid_weight(i, j);
            }
            for ((i, j), v) in w.y.indexed_iter_mut() {
                *v *= grid.trapezoid_weight(i, j);
            }
            w
        })
        .collect();
    let field_speed = (0..=4)
        .map(|k| setup.fields.max_speed(&grid, scaling.k_eps, rc.time.t_final * k as f64 / 4.0))
        .fold(0.0, f64::max);
    let v_max = field_speed + 2.0 / r_c;

    let mut state = PdeState::new(setup.u0.clone(), setup.config.time);
    let e0 = ops::total_energy(&state.u, &scaling);
    state.energy = Some(e0);
    let mut acc = Accumulators {
        kinetic: 0.0,
        momentum: [0.0; 3],
    };
    let mut record = TrajectoryRecord {
        scaling,
        grid,
        dt: setup.dt,
        gamma: setup.gamma,
        degrees: degrees.clone(),
        collision_radius: r_c,
        status: OdeStatus::Running,
        t_star: None,
        frames: Vec::new(),
        step_energies: vec![e0],
        residuals: Vec::new(),
        snapshots: vec![state.u.clone()],
    };

    let detected = detect_vortices(&state.u, &opts)?;
    let start = if degrees.is_empty() {
        Vec::new()
    } else {
        let a = match_tracks(&setup.config, &detected, mobility_cap(grid.h(), 0.0, 0.0))?;
        a.assignment.iter().map(|&l| detected.positions[l]).collect()
    };
    record.frames.push(frame(&state, start, setup, &degrees, &acc, rc.tracking.excess_threshold)?);
    if let Some(s) = event_status(&record.frames[0].positions, &grid, r_c) {
        record.status = s;
        record.t_star = Some(state.t);
        return Ok(record);
    }

    let t_end = setup.config.time + rc.time.t_final;
    let track_stride = ((rc.time.track_interval / setup.dt).round() as usize).max(1);
    let mut failures = 0;
    let mut last_track_step = 0;
    while state.t < t_end - 1e-9 * setup.dt {
        let next = stepper.step(&state)?;
        let u_t = next.u_t.as_ref().expect("stepper caches u_t");
        let e = next.energy.unwrap_or_else(|| ops::total_energy(&next.u, &scaling));
        record.step_energies.push(e);
        let dt = next.t - state.t;
        let ut2 = ScalarField::nodes(grid, u_t.values.mapv(|z| z.norm_sqr()));
        acc.kinetic += scaling.k_eps * ut2.integral() * dt;
        let p = ops::momentum(&next.u, u_t)?;
        for (m, w) in bank_fields.iter().enumerate() {
            let s = Zip::from(&p.x).and(&p.y).and(&w.x).and(&w.y).fold(0.0, |s, a, b, c, d| s + a * c + b * d);
            acc.momentum[m] += scaling.k_eps * s * dt;
        }
        if rc.time.residual_stride > 0 && next.step % rc.time.residual_stride == 0 {
            record
                .residuals
                .push(step_residuals(&state.u, &next.u, &scaling, &setup.fields, rc.tracking.collar)?);
        }
        if rc.time.snapshot_stride > 0 && next.step % rc.time.snapshot_stride == 0 {
            record.snapshots.push(next.u.clone());
        }
        state = PdeState { energy: Some(e), ..next };

        if degrees.is_empty() {
            if state.step % track_stride == 0 || state.t >= t_end - 1e-9 * setup.dt {
                record.frames.push(frame(&state, Vec::new(), setup, &degrees, &acc, rc.tracking.excess_threshold)?);
            }
            continue;
        }
        let prev = record.frames.last().unwrap().positions.clone();
        // Track every step once the vortices are within a few collision radii
        // of each other or of the boundary.
        let near = event_margin(&prev, &grid, r_c) < 2.0 * r_c;
        let due = near || state.step - last_track_step >= track_stride || state.t >= t_end - 1e-9 * setup.dt;
        if !due {
            continue;
        }
        let elapsed = state.t - record.frames.last().unwrap().t;
        let cap = mobility_cap(grid.h(), elapsed, v_max);
        match track(&state.u, &prev, &degrees, &opts, cap, &grid, r_c, near) {
            Tracked::Ok(pos) => {
                failures = 0;
                last_track_step = state.step;
                record.frames.push(frame(&state, pos, setup, &degrees, &acc, rc.tracking.excess_threshold)?);
            }
            Tracked::Event(status, pos) => {
                let t_star = match &pos {
                    Some(p) => event_time(record.frames.last().unwrap(), p, state.t, status, &grid, r_c),
                    None => state.t,
                };
                if let Some(p) = pos {
                    record.frames.push(frame(&state, p, setup, &degrees, &acc, rc.tracking.excess_threshold)?);
                }
                record.status = status;
                record.t_star = Some(t_star);
                record.snapshots.push(state.u.clone());
                return Ok(record);
            }
            Tracked::Failed(err) => {
                failures += 1;
                log::debug!("detection failed at t = {:.5}: {err}", state.t);
                if failures > rc.tracking.max_failures {
                    return Err(Error::TrackingLost(format!(
                        "{failures} consecutive failed detections, last at t = {:.5}: {err}",
                        state.t
                    )));
                }
            }
        }
    }
    if record.snapshots.last().map(|s| s.time) != Some(state.u.time) {
        record.snapshots.push(state.u.clone());
    }
    Ok(record)
}

/// Smallest of `separation − r_c` and `dist(∂D) − r_c/2` (signed margin to an event).
fn event_margin(pos: &[Point], grid: &Grid, r_c: f64) -> f64 {
    let mut m = f64::INFINITY;
    for (k, a) in pos.iter().enumerate() {
        m = m.min(grid.dist_to_boundary(*a) - 0.5 * r_c);
        for b in &pos[k + 1..] {
            m = m.min(dist(*a, *b) - r_c);
        }
    }
    m
}

fn event_status(pos: &[Point], grid: &Grid, r_c: f64) -> Option<OdeStatus> {
    let sep = VortexConfiguration {
        positions: pos.to_vec(),
        degrees: vec![1; pos.len()],
        time: 0.0,
    }
    .min_separation();
    if sep <= r_c {
        return Some(OdeStatus::Collision);
    }
    if pos.iter().any(|p| grid.dist_to_boundary(*p) <= 0.5 * r_c) {
        return Some(OdeStatus::BoundaryExit);
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn track(
    u: &ComplexField,
    prev: &[Point],
    degrees: &[i32],
    opts: &DetectOptions,
    cap: f64,
    grid: &Grid,
    r_c: f64,
    near: bool,
) -> Tracked {
    let prev_conf = VortexConfiguration {
        positions: prev.to_vec(),
        degrees: degrees.to_vec(),
        time: 0.0,
    };
    let found = detect_vortices(u, opts).and_then(|d| {
        let a = match_tracks(&prev_conf, &d, cap)?;
        Ok(a.assignment.iter().map(|&l| d.positions[l]).collect::<Vec<Point>>())
    });
    match found {
        Ok(pos) => match event_status(&pos, grid, r_c) {
            Some(s) => Tracked::Event(s, Some(pos)),
            None => Tracked::Ok(pos),
        },
        // Cores merging or leaving through the boundary just before the event
        // radius is reached count as the event itself.
        Err(e) if near => {
            let sep = prev_conf.min_separation() - r_c;
            let bnd = prev
                .iter()
                .map(|p| grid.dist_to_boundary(*p) - 0.5 * r_c)
                .fold(f64::INFINITY, f64::min);
            match e {
                Error::BoundaryContamination { .. } if bnd < sep => Tracked::Event(OdeStatus::BoundaryExit, None),
                _ if sep <= bnd => Tracked::Event(OdeStatus::Collision, None),
                _ => Tracked::Event(OdeStatus::BoundaryExit, None),
            }
        }
        Err(e) => Tracked::Failed(e),
    }
}

/// Linear interpolation of the event margin between the last frame and the
/// positions at which the event was seen.
fn event_time(last: &Frame, pos: &[Point], t: f64, status: OdeStatus, grid: &Grid, r_c: f64) -> f64 {
    let margin = |pos: &[Point]| match status {
        OdeStatus::Collision => {
            VortexConfiguration {
                positions: pos.to_vec(),
                degrees: vec![1; pos.len()],
                time: 0.0,
            }
            .min_separation()
                - r_c
        }
        _ => pos
            .iter()
            .map(|p| grid.dist_to_boundary(*p) - 0.5 * r_c)
            .fold(f64::INFINITY, f64::min),
    };
    let m0 = margin(&last.positions);
    let m1 = margin(pos);
    if m0 <= 0.0 || m1 >= m0 {
        return t;
    }
    last.t + (t - last.t) * m0 / (m0 - m1)
}
