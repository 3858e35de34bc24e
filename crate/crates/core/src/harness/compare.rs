//! PDE-versus-ODE comparison: position error `η = ξ − a`, the ODE residual
//! `R_k = (λ₀ + d_k i) ξ̇_k − RHS_k(a)`, the mobility bound and the momentum
//! pairings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::ode::{ode_rhs, OdeParams, OdeState, OdeStatus, OdeTrajectory};
use crate::ops::{dist, rot90};
use crate::grid::EpsilonScaling;
use crate::pde::simulate::{bank_collar, Frame, TrajectoryRecord};
use crate::testfn::{TestBank, BANK};
use crate::track::{match_tracks, VortexConfiguration};

/// Time derivative of samples `y(t_i)` by three-point differences on a
/// non-uniform grid, one-sided at the ends.
pub fn differentiate(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert_eq!(n, y.len());
    match n {
        0 => return Vec::new(),
        1 => return vec![0.0],
        2 => {
            let d = (y[1] - y[0]) / (t[1] - t[0]);
            return vec![d, d];
        }
        _ => {}
    }
    let three = |i0: usize, at: usize| {
        let (t0, t1, t2) = (t[i0], t[i0 + 1], t[i0 + 2]);
        let x = t[at];
        let l0 = (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2));
        let l1 = (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2));
        let l2 = (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1));
        l0 * y[i0] + l1 * y[i0 + 1] + l2 * y[i0 + 2]
    };
    (0..n)
        .map(|i| match i {
            0 => three(0, 0),
            i if i == n - 1 => three(n - 3, n - 1),
            i => three(i - 1, i),
        })
        .collect()
}

/// Three-point running median; the end samples are kept.
pub fn median3(y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    for i in 1..y.len().saturating_sub(1) {
        let mut w = [y[i - 1], y[i], y[i + 1]];
        w.sort_by(f64::total_cmp);
        out[i] = w[1];
    }
    out
}

/// Per-vortex velocities of a position series.
pub fn velocities(t: &[f64], pos: &[Vec<Point>], median: bool) -> Vec<Vec<[f64; 2]>> {
    let nv = pos.first().map_or(0, |p| p.len());
    let mut v = vec![vec![[0.0; 2]; nv]; t.len()];
    for k in 0..nv {
        for c in 0..2 {
            let mut y: Vec<f64> = pos.iter().map(|p| p[k][c]).collect();
            if median {
                y = median3(&y);
            }
            for (i, d) in differentiate(t, &y).into_iter().enumerate() {
                v[i][k][c] = d;
            }
        }
    }
    v
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Linear interpolation of a cumulative frame quantity at `t`.
fn interp_at(t: &[f64], y: &[f64], at: f64) -> f64 {
    let k = t.partition_point(|&s| s <= at);
    if k == 0 {
        return y[0];
    }
    if k == t.len() {
        return y[t.len() - 1];
    }
    let th = (at - t[k - 1]) / (t[k] - t[k - 1]);
    y[k - 1] + th * (y[k] - y[k - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumPairing {
    pub name: String,
    /// `∫∫ k_ε (p(u), w)`.
    pub field: f64,
    /// `−π Σ_k ∫ (ξ̇_k, w(ξ_k))`.
    pub vortex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityBound {
    /// `π Σ_k ∫ |ξ̇_k|²`.
    pub vortex: f64,
    /// `k_ε ∫∫ |∂_t u|²`.
    pub kinetic: f64,
    /// `kinetic − vortex`.
    pub slack: f64,
}

impl MobilityBound {
    /// The bound with a relative allowance on the kinetic side.
    pub fn holds(&self, allowance: f64) -> bool {
        self.vortex <= self.kinetic * (1.0 + allowance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub lambda0: f64,
    pub degrees: Vec<i32>,
    /// End of the window on which both trajectories are running.
    pub horizon: f64,
    pub t_star_pde: Option<f64>,
    pub t_star_ode: Option<f64>,
    pub times: Vec<f64>,
    pub xi: Vec<Vec<Point>>,
    pub a: Vec<Vec<Point>>,
    pub eta: Vec<Vec<[f64; 2]>>,
    /// `max_k |η_k(t)|`.
    pub eta_norm: Vec<f64>,
    pub sup_eta: f64,
    /// `∫ max_k |η_k| dt`.
    pub int_eta: f64,
    pub xi_dot: Vec<Vec<[f64; 2]>>,
    pub eta_dot: Vec<Vec<[f64; 2]>>,
    pub r: Vec<Vec<[f64; 2]>>,
    /// `max_k |R_k(t)|` and `√(λ₀² + 1) max_k |η̇_k(t)|`.
    pub r_norm: Vec<f64>,
    pub r_identity: Vec<f64>,
    /// `max_t max_k ||R_k| − √(λ₀² + 1)|η̇_k||`.
    pub identity_defect: f64,
    pub mobility: MobilityBound,
    pub momentum: Vec<MomentumPairing>,
    /// `(t, D_ε(t))` over the horizon.
    pub excess: Vec<(f64, f64)>,
}

/// Compares a PDE record with an ODE trajectory from the same configuration.
pub fn compare(
    pde: &TrajectoryRecord,
    ode: &OdeTrajectory,
    params: &OdeParams,
    median_filter: bool,
) -> Result<ComparisonReport> {
    if pde.frames.len() < 2 || ode.samples.len() < 2 {
        return Err(Error::HorizonMismatch("both records need at least two samples".into()));
    }
    let (p0, o0) = (&pde.frames[0], &ode.samples[0]);
    if (p0.t - o0.t).abs() > 1e-12 {
        return Err(Error::HorizonMismatch(format!("start times {} and {}", p0.t, o0.t)));
    }
    let mut dp = pde.degrees.clone();
    let mut dq = ode.degrees.clone();
    dp.sort_unstable();
    dq.sort_unstable();
    if dp != dq {
        return Err(Error::HorizonMismatch("degree lists differ".into()));
    }
    let pde_end = pde.t_star.unwrap_or(pde.t_end());
    let ode_end = ode.t_star.unwrap_or(ode.last().t);
    let horizon = pde_end.min(ode_end);
    if ode.status == OdeStatus::Running && ode_end < pde_end - 1e-9 {
        return Err(Error::HorizonMismatch(format!(
            "ODE record ends at {ode_end} before the PDE horizon {pde_end}"
        )));
    }
    if pde.status == OdeStatus::Running && ode.status == OdeStatus::Running && (ode_end - pde_end).abs() > 1e-6 * (1.0 + pde_end) {
        return Err(Error::HorizonMismatch(format!("horizons {pde_end} and {ode_end}")));
    }

    // Degree-respecting assignment at t = 0: ode index perm[k] tracks PDE vortex k.
    let pde_conf = VortexConfiguration {
        positions: p0.positions.clone(),
        degrees: pde.degrees.clone(),
        time: p0.t,
    };
    let ode_conf = VortexConfiguration {
        positions: o0.positions.clone(),
        degrees: ode.degrees.clone(),
        time: o0.t,
    };
    let perm = match_tracks(&pde_conf, &ode_conf, f64::INFINITY)?.assignment;

    let frames: Vec<_> = pde.frames.iter().filter(|f| f.t <= horizon + 1e-12).collect();
    if frames.len() < 2 {
        return Err(Error::HorizonMismatch("fewer than two PDE frames before the horizon".into()));
    }
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let xi: Vec<Vec<Point>> = frames.iter().map(|f| f.positions.clone()).collect();
    let a: Vec<Vec<Point>> = times
        .iter()
        .map(|&t| {
            let p = ode.position_at(t);
            perm.iter().map(|&l| p[l]).collect()
        })
        .collect();
    let nv = pde.degrees.len();
    let eta: Vec<Vec<[f64; 2]>> = xi
        .iter()
        .zip(&a)
        .map(|(x, y)| (0..nv).map(|k| [x[k][0] - y[k][0], x[k][1] - y[k][1]]).collect())
        .collect();
    let eta_norm: Vec<f64> = eta.iter().map(|e| e.iter().map(|v| norm(*v)).fold(0.0, f64::max)).collect();
    let sup_eta = eta_norm.iter().copied().fold(0.0, f64::max);
    let int_eta = trapezoid(&times, &eta_norm);

    let xi_dot = velocities(&times, &xi, median_filter);
    let a_dot = velocities(&times, &a, false);
    let eta_dot: Vec<Vec<[f64; 2]>> = xi_dot
        .iter()
        .zip(&a_dot)
        .map(|(x, y)| (0..nv).map(|k| [x[k][0] - y[k][0], x[k][1] - y[k][1]]).collect())
        .collect();

    let lam = params.lambda0;
    let scale = (lam * lam + 1.0).sqrt();
    let mut r = Vec::with_capacity(times.len());
    let mut r_norm = Vec::with_capacity(times.len());
    let mut r_identity = Vec::with_capacity(times.len());
    let mut identity_defect: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let state = OdeState {
            positions: a[i].clone(),
            degrees: pde.degrees.clone(),
            t,
            status: OdeStatus::Running,
        };
        // RHS along the ODE path. Inside the event radius, where W is not
        // resolvable on the grid, it falls back to (λ₀ + c_k i) ȧ_k.
        let rhs: Vec<[f64; 2]> = match ode_rhs(&state, params) {
            Ok(terms) => (0..nv)
                .map(|k| {
                    let (w, f, g) = (terms.w_term[k], terms.f_term[k], terms.g_term[k]);
                    [w[0] + f[0] + g[0], w[1] + f[1] + g[1]]
                })
                .collect(),
            Err(Error::ConfigTooClose { .. }) => (0..nv)
                .map(|k| mobility_apply(lam, coupling_coef(params, pde.degrees[k]), a_dot[i][k]))
                .collect(),
            Err(e) => return Err(e),
        };
        let rk: Vec<[f64; 2]> = (0..nv)
            .map(|k| {
                let m = mobility_apply(lam, coupling_coef(params, pde.degrees[k]), xi_dot[i][k]);
                [m[0] - rhs[k][0], m[1] - rhs[k][1]]
            })
            .collect();
        for k in 0..nv {
            identity_defect = identity_defect.max((norm(rk[k]) - scale * norm(eta_dot[i][k])).abs());
        }
        r_norm.push(rk.iter().map(|v| norm(*v)).fold(0.0, f64::max));
        r_identity.push(scale * eta_dot[i].iter().map(|v| norm(*v)).fold(0.0, f64::max));
        r.push(rk);
    }

    let speed2: Vec<f64> = xi_dot.iter().map(|v| v.iter().map(|w| w[0] * w[0] + w[1] * w[1]).sum()).collect();
    let vortex = PI * trapezoid(&times, &speed2);
    let all_t: Vec<f64> = pde.frames.iter().map(|f| f.t).collect();
    let kin: Vec<f64> = pde.frames.iter().map(|f| f.kinetic).collect();
    let kinetic = interp_at(&all_t, &kin, horizon);
    let mobility = MobilityBound {
        vortex,
        kinetic,
        slack: kinetic - vortex,
    };

    let bank = TestBank::new(&pde.grid, bank_collar(&pde.grid));
    let momentum = BANK
        .iter()
        .enumerate()
        .map(|(m, member)| {
            let series: Vec<f64> = pde.frames.iter().map(|f| f.momentum[m]).collect();
            let field = interp_at(&all_t, &series, horizon);
            let integrand: Vec<f64> = (0..times.len())
                .map(|i| {
                    (0..nv)
                        .map(|k| {
                            let w = bank.vector(*member, xi[i][k]);
                            xi_dot[i][k][0] * w[0] + xi_dot[i][k][1] * w[1]
                        })
                        .sum()
                })
                .collect();
            MomentumPairing {
                name: member.name().to_string(),
                field,
                vortex: -PI * trapezoid(&times, &integrand),
            }
        })
        .collect();

    let excess = frames.iter().map(|f| (f.t, f.excess)).collect();
    Ok(ComparisonReport {
        lambda0: lam,
        degrees: pde.degrees.clone(),
        horizon,
        t_star_pde: pde.t_star,
        t_star_ode: ode.t_star,
        times,
        xi,
        a,
        eta,
        eta_norm,
        sup_eta,
        int_eta,
        xi_dot,
        eta_dot,
        r,
        r_norm,
        r_identity,
        identity_defect,
        mobility,
        momentum,
        excess,
    })
}

fn coupling_coef(params: &OdeParams, d: i32) -> f64 {
    match params.coupling {
        crate::ode::HamiltonianCoupling::DegreeWeighted => d as f64,
        crate::ode::HamiltonianCoupling::Uniform => 1.0,
    }
}

/// `(λ₀ + c i) v`.
fn mobility_apply(lambda0: f64, c: f64, v: [f64; 2]) -> [f64; 2] {
    let iv = rot90(v);
    [lambda0 * v[0] + c * iv[0], lambda0 * v[1] + c * iv[1]]
}

/// An ODE trajectory dressed as a PDE record (field quantities zero), for
/// self-comparison.
pub fn ode_as_record(tr: &OdeTrajectory, params: &OdeParams, scaling: EpsilonScaling) -> TrajectoryRecord {
    TrajectoryRecord {
        scaling,
        grid: params.grid,
        dt: 0.0,
        gamma: 0.0,
        degrees: tr.degrees.clone(),
        collision_radius: params.collision_radius,
        status: tr.status,
        t_star: tr.t_star,
        frames: tr
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| Frame {
                t: s.t,
                step: i,
                positions: s.positions.clone(),
                energy: 0.0,
                w: 0.0,
                excess: 0.0,
                kinetic: 0.0,
                momentum: [0.0; 3],
                min_modulus: 0.0,
            })
            .collect(),
        step_energies: Vec::new(),
        residuals: Vec::new(),
        snapshots: Vec::new(),
    }
}

/// Largest distance between the vortices of two frames with equal ordering.
pub fn max_offset(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(p, q)| dist(*p, *q)).fold(0.0, f64::max)
}
