//! The effective vortex law and its adaptive integration up to the first
//! collision or boundary exit.
//!
//! `(λ₀ + c_k i) ȧ_k = −(1/π) ∂_{a_k}W + F(a_k, t) + d_k i G(a_k, t)` where
//! `i` rotates a planar vector by a quarter turn and `c_k` is `d_k`
//! ([`HamiltonianCoupling::DegreeWeighted`]) or 1
//! ([`HamiltonianCoupling::Uniform`]).

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Point};
use crate::ops::{dist, rot90};
use crate::pde::bc::BoundaryCondition;
use crate::pde::fields::VectorFn;
use crate::renergy::{grad_w, grad_w_regular, stream_function};
use crate::track::VortexConfiguration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianCoupling {
    #[default]
    DegreeWeighted,
    Uniform,
}

/// How `∂W` is evaluated inside the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientRoute {
    /// `−2π d_k ∇H_k(a_k)` from one stream-function solve.
    #[default]
    Regular,
    /// Fourth-order differences of `W` (`4N` solves per evaluation).
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeStatus {
    Running,
    Collision,
    BoundaryExit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub positions: Vec<Point>,
    pub degrees: Vec<i32>,
    pub t: f64,
    pub status: OdeStatus,
}

impl OdeState {
    pub fn from_config(c: &VortexConfiguration) -> Self {
        OdeState {
            positions: c.positions.clone(),
            degrees: c.degrees.clone(),
            t: c.time,
            status: OdeStatus::Running,
        }
    }

    pub fn config(&self) -> VortexConfiguration {
        VortexConfiguration {
            positions: self.positions.clone(),
            degrees: self.degrees.clone(),
            time: self.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-11,
            h_init: 1e-4,
            h_min: 1e-14,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeParams {
    pub lambda0: f64,
    pub f: VectorFn,
    pub g: VectorFn,
    /// Boundary condition of `W`, sampled on `grid`.
    pub bc: BoundaryCondition,
    pub grid: Grid,
    pub coupling: HamiltonianCoupling,
    pub gradient: GradientRoute,
    pub tol: Tolerances,
    /// Collision when the minimum separation reaches this radius; boundary
    /// exit when a vortex comes within half of it of `∂D`.
    pub collision_radius: f64,
    /// Reuse `∂W` while no vortex has moved more than this since the last
    /// exact evaluation. Off when `None`.
    pub delta_cache: Option<f64>,
}

impl OdeParams {
    pub fn new(lambda0: f64, grid: Grid, bc: BoundaryCondition, collision_radius: f64) -> Result<Self> {
        if !(lambda0 > 0.0) {
            return Err(Error::config("lambda0", "need lambda0 > 0"));
        }
        Ok(OdeParams {
            lambda0,
            f: VectorFn::zero(),
            g: VectorFn::zero(),
            bc,
            grid,
            coupling: HamiltonianCoupling::default(),
            gradient: GradientRoute::default(),
            tol: Tolerances::default(),
            collision_radius,
            delta_cache: None,
        })
    }

    fn validate(&self) -> Result<()> {
        let t = &self.tol;
        if !(self.lambda0 > 0.0) {
            return Err(Error::config("lambda0", "need lambda0 > 0"));
        }
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.h_init > 0.0 && t.h_min > 0.0) {
            return Err(Error::config("ode.tolerances", "tolerances must be positive"));
        }
        Ok(())
    }
}

/// Collision radius shared by the PDE and ODE, `4 max(ε, 2h)`.
pub fn collision_radius(eps: f64, h: f64) -> f64 {
    4.0 * eps.max(2.0 * h)
}

/// Right-hand side with its audit breakdown. `w_term = −∂W/π`, and
/// `velocity` solves `(λ₀ + c_k i) ȧ = w_term + f_term + g_term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsTerms {
    pub velocity: Vec<[f64; 2]>,
    pub grad_w: Vec<[f64; 2]>,
    pub w_term: Vec<[f64; 2]>,
    pub f_term: Vec<[f64; 2]>,
    pub g_term: Vec<[f64; 2]>,
}

/// `(λ₀ + c i)^{-1} v = (λ₀ − c i) v / (λ₀² + c²)`.
pub fn solve_mobility(lambda0: f64, c: f64, v: [f64; 2]) -> [f64; 2] {
    let iv = rot90(v);
    let s = lambda0 * lambda0 + c * c;
    [(lambda0 * v[0] - c * iv[0]) / s, (lambda0 * v[1] - c * iv[1]) / s]
}

/// Right-hand side given `∂W` (e.g. from a cache or a closed form).
pub fn ode_rhs_with_grad(state: &OdeState, params: &OdeParams, grad: Vec<[f64; 2]>) -> RhsTerms {
    let n = state.positions.len();
    let mut out = RhsTerms {
        velocity: Vec::with_capacity(n),
        grad_w: grad,
        w_term: Vec::with_capacity(n),
        f_term: Vec::with_capacity(n),
        g_term: Vec::with_capacity(n),
    };
    for k in 0..n {
        let a = state.positions[k];
        let d = state.degrees[k] as f64;
        let w = [-out.grad_w[k][0] / PI, -out.grad_w[k][1] / PI];
        let f = params.f.eval(a, state.t);
        let gi = rot90(params.g.eval(a, state.t));
        let g = [d * gi[0], d * gi[1]];
        let c = match params.coupling {
            HamiltonianCoupling::DegreeWeighted => d,
            HamiltonianCoupling::Uniform => 1.0,
        };
        let rhs = [w[0] + f[0] + g[0], w[1] + f[1] + g[1]];
        out.velocity.push(solve_mobility(params.lambda0, c, rhs));
        out.w_term.push(w);
        out.f_term.push(f);
        out.g_term.push(g);
    }
    out
}

pub fn grad_w_for(state: &OdeState, params: &OdeParams) -> Result<Vec<[f64; 2]>> {
    if state.positions.is_empty() {
        return Ok(Vec::new());
    }
    let c = state.config();
    match params.gradient {
        GradientRoute::Regular => Ok(grad_w_regular(&stream_function(&c, &params.bc, &params.grid)?)),
        GradientRoute::FiniteDifference => grad_w(&c, &params.bc, &params.grid, None),
    }
}

pub fn ode_rhs(state: &OdeState, params: &OdeParams) -> Result<RhsTerms> {
    if state.status != OdeStatus::Running {
        return Err(Error::SolverFailure("right-hand side of a stopped state".into()));
    }
    Ok(ode_rhs_with_grad(state, params, grad_w_for(state, params)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSample {
    pub t: f64,
    pub positions: Vec<Point>,
    pub terms: RhsTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub degrees: Vec<i32>,
    pub samples: Vec<OdeSample>,
    pub status: OdeStatus,
    /// Time of the collision or boundary exit.
    pub t_star: Option<f64>,
    pub rejected_steps: usize,
}

impl OdeTrajectory {
    pub fn last(&self) -> &OdeSample {
        self.samples.last().expect("trajectory has the initial sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Positions at time `t` by cubic Hermite interpolation between samples.
    pub fn position_at(&self, t: f64) -> Vec<Point> {
        let s = &self.samples;
        let k = s.partition_point(|x| x.t <= t).clamp(1, s.len().max(2) - 1);
        if s.len() == 1 {
            return s[0].positions.clone();
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let h = b.t - a.t;
        let th = ((t - a.t) / h).clamp(0.0, 1.0);
        (0..a.positions.len())
            .map(|v| {
                let mut p = [0.0; 2];
                for c in 0..2 {
                    p[c] = hermite(
                        a.positions[v][c],
                        b.positions[v][c],
                        a.terms.velocity[v][c],
                        b.terms.velocity[v][c],
                        h,
                        th,
                    );
                }
                p
            })
            .collect()
    }
}

#[inline]
fn hermite(y0: f64, y1: f64, f0: f64, f1: f64, h: f64, th: f64) -> f64 {
    let t2 = th * th;
    let t3 = t2 * th;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + th) * h * f0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * f1
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive integrator; the trajectory so far stays available when
/// [`run`](Self::run) fails.
pub struct OdeIntegrator<'a> {
    params: &'a OdeParams,
    pub trajectory: OdeTrajectory,
    cache: RefCell<Option<(Vec<Point>, Vec<[f64; 2]>)>>,
}

impl<'a> OdeIntegrator<'a> {
    pub fn new(config: &VortexConfiguration, params: &'a OdeParams) -> Result<Self> {
        params.validate()?;
        let state = OdeState::from_config(config);
        let it = OdeIntegrator {
            params,
            trajectory: OdeTrajectory {
                degrees: config.degrees.clone(),
                samples: Vec::new(),
                status: OdeStatus::Running,
                t_star: None,
                rejected_steps: 0,
            },
            cache: RefCell::new(None),
        };
        let status = it.event_status(&state.positions);
        let terms = if status == OdeStatus::Running {
            it.rhs(&state)?
        } else {
            ode_rhs_with_grad(&state, params, vec![[0.0; 2]; state.positions.len()])
        };
        let mut it = it;
        it.trajectory.samples.push(OdeSample {
            t: state.t,
            positions: state.positions,
            terms,
        });
        if status != OdeStatus::Running {
            it.trajectory.status = status;
            it.trajectory.t_star = Some(config.time);
        }
        Ok(it)
    }

    fn rhs(&self, state: &OdeState) -> Result<RhsTerms> {
        let grad = match self.params.delta_cache {
            None => grad_w_for(state, self.params)?,
            Some(delta) => {
                let mut cache = self.cache.borrow_mut();
                let fresh = match cache.as_ref() {
                    Some((pos, _)) => pos
                        .iter()
                        .zip(&state.positions)
                        .any(|(a, b)| dist(*a, *b) > delta),
                    None => true,
                };
                if fresh {
                    *cache = Some((state.positions.clone(), grad_w_for(state, self.params)?));
                }
                cache.as_ref().unwrap().1.clone()
            }
        };
        Ok(ode_rhs_with_grad(state, self.params, grad))
    }

    /// Event functions: `min separation − r_c` and `min dist(a, ∂D) − r_c/2`.
    fn events(&self, pos: &[Point]) -> [f64; 2] {
        let rc = self.params.collision_radius;
        let mut sep = f64::INFINITY;
        let mut bnd = f64::INFINITY;
        for (k, a) in pos.iter().enumerate() {
            bnd = bnd.min(self.params.grid.dist_to_boundary(*a));
            for b in &pos[k + 1..] {
                sep = sep.min(dist(*a, *b));
            }
        }
        [sep - rc, bnd - 0.5 * rc]
    }

    fn event_status(&self, pos: &[Point]) -> OdeStatus {
        let [s, b] = self.events(pos);
        if s <= 0.0 {
            OdeStatus::Collision
        } else if b <= 0.0 {
            OdeStatus::BoundaryExit
        } else {
            OdeStatus::Running
        }
    }

    /// One Dormand–Prince attempt from the last sample. Returns the new
    /// positions, the error estimate (scaled norm) and the stage derivative at
    /// the end point.
    fn attempt(&self, h: f64) -> Result<(Vec<Point>, f64)> {
        let last = self.trajectory.last();
        let n = last.positions.len();
        let y0: Vec<f64> = last.positions.iter().flat_map(|p| [p[0], p[1]]).collect();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(last.terms.velocity.iter().flat_map(|v| [v[0], v[1]]).collect());
        let mut y = y0.clone();
        for s in 1..7 {
            for (m, ym) in y.iter_mut().enumerate() {
                let mut acc = y0[m];
                for (j, kj) in k.iter().enumerate() {
                    acc += h * A[s][j] * kj[m];
                }
                *ym = acc;
            }
            let state = OdeState {
                positions: (0..n).map(|v| [y[2 * v], y[2 * v + 1]]).collect(),
                degrees: self.trajectory.degrees.clone(),
                t: last.t + C[s] * h,
                status: OdeStatus::Running,
            };
            let r = self.rhs(&state)?;
            k.push(r.velocity.iter().flat_map(|v| [v[0], v[1]]).collect());
        }
        let tol = &self.params.tol;
        let mut err: f64 = 0.0;
        for m in 0..y0.len() {
            let mut e = 0.0;
            for s in 0..7 {
                e += h * (B5[s] - B4[s]) * k[s][m];
            }
            let scale = tol.atol + tol.rtol * y0[m].abs().max(y[m].abs());
            err = err.max((e / scale).abs());
        }
        let pos = (0..n).map(|v| [y[2 * v], y[2 * v + 1]]).collect();
        Ok((pos, err))
    }

    /// Integrates to `t_end` or to the first event.
    pub fn run(&mut self, t_end: f64) -> Result<()> {
        if self.trajectory.status != OdeStatus::Running || self.trajectory.degrees.is_empty() {
            if self.trajectory.degrees.is_empty() && self.trajectory.last().t < t_end {
                let mut s = self.trajectory.last().clone();
                s.t = t_end;
                self.trajectory.samples.push(s);
            }
            return Ok(());
        }
        let tol = self.params.tol;
        let mut h = tol.h_init;
        let mut steps = 0;
        while self.trajectory.last().t < t_end {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::NoConvergence(format!(
                    "ODE exceeded {} steps",
                    tol.max_steps
                )));
            }
            let t0 = self.trajectory.last().t;
            let h_try = h.min(t_end - t0);
            if h_try < tol.h_min {
                return Err(Error::StepUnderflow { t: t0 });
            }
            let (pos, err) = match self.attempt(h_try) {
                Ok(v) => v,
                // A stage left the admissible region: the event lies inside
                // this step, so retry with a shorter one.
                Err(Error::ConfigTooClose { .. }) => {
                    self.trajectory.rejected_steps += 1;
                    h = 0.5 * h_try;
                    if h < tol.h_min {
                        return self.stop_at_current();
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err > 1.0 {
                self.trajectory.rejected_steps += 1;
                h = h_try * factor;
                continue;
            }
            let t1 = t0 + h_try;
            let status = self.event_status(&pos);
            if status != OdeStatus::Running {
                return self.locate_event(pos, h_try);
            }
            let state = OdeState {
                positions: pos,
                degrees: self.trajectory.degrees.clone(),
                t: t1,
                status: OdeStatus::Running,
            };
            let terms = match self.rhs(&state) {
                Ok(t) => t,
                Err(Error::ConfigTooClose { .. }) => {
                    h = 0.5 * h_try;
                    continue;
                }
                Err(e) => return Err(e),
            };
            self.trajectory.samples.push(OdeSample {
                t: t1,
                positions: state.positions,
                terms,
            });
            h = h_try * factor;
        }
        Ok(())
    }

    /// Bisection on the Hermite interpolant between the last sample and a
    /// step end point where an event function has become non-positive.
    fn locate_event(&mut self, end: Vec<Point>, h: f64) -> Result<()> {
        let last = self.trajectory.last().clone();
        let status = self.event_status(&end);
        // Velocity at the end point is unavailable past the event; use the
        // secant slope in the interpolant's end derivative.
        let slope: Vec<[f64; 2]> = end
            .iter()
            .zip(&last.positions)
            .map(|(b, a)| [(b[0] - a[0]) / h, (b[1] - a[1]) / h])
            .collect();
        let interp = |th: f64| -> Vec<Point> {
            (0..end.len())
                .map(|v| {
                    let mut p = [0.0; 2];
                    for c in 0..2 {
                        p[c] = hermite(
                            last.positions[v][c],
                            end[v][c],
                            last.terms.velocity[v][c],
                            slope[v][c],
                            h,
                            th,
                        );
                    }
                    p
                })
                .collect()
        };
        let which = |p: &[Point]| {
            let e = self.events(p);
            if status == OdeStatus::Collision {
                e[0]
            } else {
                e[1]
            }
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if which(&interp(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) * h < 1e-14 * (1.0 + last.t.abs()) {
                break;
            }
        }
        let t_star = last.t + hi * h;
        let positions = interp(hi);
        let zero = vec![[0.0; 2]; positions.len()];
        let state = OdeState {
            positions: positions.clone(),
            degrees: self.trajectory.degrees.clone(),
            t: t_star,
            status,
        };
        let terms = ode_rhs_with_grad(&state, self.params, zero);
        self.trajectory.samples.push(OdeSample {
            t: t_star,
            positions,
            terms,
        });
        self.trajectory.status = status;
        self.trajectory.t_star = Some(t_star);
        Ok(())
    }

    /// The step size collapsed against the admissibility limit of `W`; the
    /// event is within `h_min` of the last sample.
    fn stop_at_current(&mut self) -> Result<()> {
        let last = self.trajectory.last();
        let e = self.events(&last.positions);
        let status = if e[0] <= e[1] {
            OdeStatus::Collision
        } else {
            OdeStatus::BoundaryExit
        };
        self.trajectory.t_star = Some(last.t);
        self.trajectory.status = status;
        Ok(())
    }
}

/// Integrates from `config` (at `config.time`) to `t_end` or the first event.
pub fn integrate(config: &VortexConfiguration, params: &OdeParams, t_end: f64) -> Result<OdeTrajectory> {
    let mut it = OdeIntegrator::new(config, params)?;
    it.run(t_end)?;
    Ok(it.trajectory)
}
