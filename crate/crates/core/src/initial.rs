//! Radial vortex core, the core constant γ, and well-prepared initial fields.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use log::debug;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::grid::{EpsilonScaling, Grid};
use crate::pde::bc::BoundaryCondition;
use crate::poisson::{BoundaryFlux, SpectralSolver, SolverKind};
use crate::track::VortexConfiguration;

pub const DEFAULT_R_MAX: f64 = 40.0;
/// Default 1D nodes per core length unit.
pub const DEFAULT_DENSITY: usize = 2000;
pub const CACHE_ENV: &str = "GLV_CACHE_DIR";

/// Degree-one core profile `f` on `[0, R_max]` with uniform spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub r_max: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

/// Far-field asymptote `1 − 1/(2ρ²)` used beyond `R_max` and as boundary value.
#[inline]
pub fn tail(rho: f64) -> f64 {
    1.0 - 0.5 / (rho * rho)
}

fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

impl RadialProfile {
    /// Solves `f'' + f'/ρ − f/ρ² + (1 − f²) f = 0`, `f(0) = 0`,
    /// `f(R) = 1 − 1/(2R²)` by damped Newton on the centered three-point
    /// discretization with `nodes` intervals.
    pub fn solve(r_max: f64, nodes: usize) -> Result<Self> {
        if nodes < 1000 {
            return Err(Error::config("profile.nodes", "need at least 1000 nodes"));
        }
        if !(r_max >= 4.0) {
            return Err(Error::config("profile.r_max", "need R_max >= 4"));
        }
        let h = r_max / nodes as f64;
        let rho: Vec<f64> = (0..=nodes).map(|i| i as f64 * h).collect();
        let mut f: Vec<f64> = rho.iter().map(|r| r / (r * r + 2.0).sqrt()).collect();
        f[0] = 0.0;
        f[nodes] = tail(r_max);
        let m = nodes - 1;
        let residual = |f: &[f64], out: &mut [f64]| -> f64 {
            let mut norm: f64 = 0.0;
            for i in 1..nodes {
                let r = rho[i];
                let v = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h)
                    + (f[i + 1] - f[i - 1]) / (2.0 * h * r)
                    - f[i] / (r * r)
                    + (1.0 - f[i] * f[i]) * f[i];
                out[i - 1] = v;
                norm = norm.max(v.abs());
            }
            norm
        };
        let mut res = vec![0.0; m];
        let mut norm = residual(&f, &mut res);
        let mut trial = f.clone();
        let mut trial_res = vec![0.0; m];
        // Round-off floor of the residual: a few ulps of f divided by h².
        let floor = 64.0 * f64::EPSILON / (h * h);
        let mut last_update = f64::INFINITY;
        for iter in 0..100 {
            if norm < floor || last_update < 1e-14 {
                debug!("radial profile converged after {iter} Newton steps");
                return Ok(RadialProfile {
                    r_max,
                    step: h,
                    values: f,
                });
            }
            let mut sub = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut sup = vec![0.0; m];
            for k in 0..m {
                let i = k + 1;
                let r = rho[i];
                sub[k] = 1.0 / (h * h) - 1.0 / (2.0 * h * r);
                sup[k] = 1.0 / (h * h) + 1.0 / (2.0 * h * r);
                diag[k] = -2.0 / (h * h) - 1.0 / (r * r) + 1.0 - 3.0 * f[i] * f[i];
            }
            let mut delta: Vec<f64> = res.iter().map(|v| -v).collect();
            thomas(&sub, &mut diag, &sup, &mut delta);
            last_update = delta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut damping = 1.0;
            loop {
                for k in 0..m {
                    trial[k + 1] = f[k + 1] + damping * delta[k];
                }
                let tn = residual(&trial, &mut trial_res);
                if tn < norm || damping < 1e-4 {
                    std::mem::swap(&mut f, &mut trial);
                    std::mem::swap(&mut res, &mut trial_res);
                    norm = tn;
                    break;
                }
                damping *= 0.5;
            }
        }
        Err(Error::NoConvergence(format!(
            "radial profile residual {norm:.3e} after 100 Newton steps"
        )))
    }

    pub fn default_resolution() -> Result<Self> {
        Self::cached(DEFAULT_R_MAX, (DEFAULT_R_MAX as usize) * DEFAULT_DENSITY)
    }

    /// Like [`solve`](Self::solve) but reads and writes a plain-text cache in
    /// `$GLV_CACHE_DIR` when that variable is set.
    pub fn cached(r_max: f64, nodes: usize) -> Result<Self> {
        let Some(dir) = std::env::var_os(CACHE_ENV).map(PathBuf::from) else {
            return Self::solve(r_max, nodes);
        };
        let path = dir.join(format!("radial_profile_R{r_max}_N{nodes}.txt"));
        if let Ok(p) = Self::read_cache(&path, r_max, nodes) {
            return Ok(p);
        }
        let p = Self::solve(r_max, nodes)?;
        fs::create_dir_all(&dir)?;
        let tmp = path.with_extension("tmp");
        {
            let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
            writeln!(w, "# radial profile R_max={r_max} nodes={nodes}")?;
            writeln!(w, "# rho f")?;
            for (i, v) in p.values.iter().enumerate() {
                writeln!(w, "{:e} {:e}", i as f64 * p.step, v)?;
            }
        }
        fs::rename(&tmp, &path)?;
        Ok(p)
    }

    fn read_cache(path: &PathBuf, r_max: f64, nodes: usize) -> Result<Self> {
        let r = BufReader::new(fs::File::open(path)?);
        let mut values = Vec::with_capacity(nodes + 1);
        for line in r.lines() {
            let line = line?;
            if line.starts_with('#') {
                continue;
            }
            let f = line
                .split_whitespace()
                .nth(1)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::NoConvergence(format!("bad cache line `{line}`")))?;
            values.push(f);
        }
        if values.len() != nodes + 1 {
            return Err(Error::NoConvergence("cache length mismatch".into()));
        }
        Ok(RadialProfile {
            r_max,
            step: r_max / nodes as f64,
            values,
        })
    }

    pub fn nodes(&self) -> usize {
        self.values.len() - 1
    }

    /// `f(ρ)`, linear between nodes and the far-field asymptote beyond `R_max`.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho >= self.r_max {
            return tail(rho);
        }
        let x = rho / self.step;
        let i = x.floor() as usize;
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// `π ∫₀^R (f'² + f²/ρ² + (1 − f²)²/2) ρ dρ − π log R − π/(4R²)` by the
/// midpoint rule on `nodes` intervals, for any trial profile.
pub fn core_energy_excess(f: &dyn Fn(f64) -> f64, r_max: f64, nodes: usize) -> f64 {
    let h = r_max / nodes as f64;
    let mut s = 0.0;
    let mut f0 = f(0.0);
    for i in 0..nodes {
        let f1 = f((i + 1) as f64 * h);
        let rm = (i as f64 + 0.5) * h;
        let fm = 0.5 * (f0 + f1);
        let d = (f1 - f0) / h;
        let m = 1.0 - fm * fm;
        s += (d * d + fm * fm / (rm * rm) + 0.5 * m * m) * rm;
        f0 = f1;
    }
    let pi = std::f64::consts::PI;
    pi * s * h - pi * r_max.ln() - pi / (4.0 * r_max * r_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub r_max: f64,
    pub nodes: usize,
    /// |γ(nodes) − γ(nodes/2)|.
    pub residual: f64,
}

/// γ from the profile's own nodes, with the residual against a profile solved
/// at half the resolution.
pub fn gamma_constant(profile: &RadialProfile) -> Result<GammaEstimate> {
    let gamma = gamma_on_nodes(profile);
    let coarse = RadialProfile::solve(profile.r_max, profile.nodes() / 2)?;
    let residual = (gamma - gamma_on_nodes(&coarse)).abs();
    if residual > 1e-3 * gamma.abs() {
        return Err(Error::NoConvergence(format!(
            "gamma residual {residual:.3e} too large for |gamma| = {:.4}",
            gamma.abs()
        )));
    }
    Ok(GammaEstimate {
        gamma,
        r_max: profile.r_max,
        nodes: profile.nodes(),
        residual,
    })
}

fn gamma_on_nodes(p: &RadialProfile) -> f64 {
    core_energy_excess(
        &|r| p.values[(r / p.step).round() as usize],
        p.r_max,
        p.nodes(),
    )
}

/// Well-prepared initial field `u⁰ = e^{iΦ} Π_k f(|x − a_k|/ε)`.
///
/// `Φ = Σ_k d_k θ_k + Φ_reg` is the phase of the canonical harmonic map:
/// `Φ_reg` is discrete-harmonic with `∂_ν Φ = 0` (Neumann) or
/// `e^{iΦ} = g` (Dirichlet) on the boundary. Dirichlet boundary nodes are
/// pinned to `g`.
pub fn well_prepared(
    config: &VortexConfiguration,
    scaling: &EpsilonScaling,
    grid: &Grid,
    bc: &BoundaryCondition,
    profile: &RadialProfile,
) -> Result<ComplexField> {
    let rho = config.rho(grid);
    let limit = 8.0 * scaling.eps.max(grid.h());
    if !(rho > limit) {
        return Err(Error::ConfigTooTight { rho, limit });
    }
    let charges = config.charges();
    let winding = |p: [f64; 2]| crate::pde::bc::charge_phase(&charges, 0.0, p);
    let phi_reg = match bc {
        BoundaryCondition::Neumann => {
            let q = BoundaryFlux::from_fn(grid, |p, n| {
                let mut s = 0.0;
                for c in &charges {
                    let (x, y) = (p[0] - c.position[0], p[1] - c.position[1]);
                    let r2 = x * x + y * y;
                    s -= c.degree as f64 * (-y * n[0] + x * n[1]) / r2;
                }
                s
            });
            let solver = SpectralSolver::new(*grid, SolverKind::Neumann);
            solver.neumann_poisson(&Array2::zeros(grid.shape()), &q)?.0
        }
        BoundaryCondition::Dirichlet { g } => {
            let lp = grid.boundary_loop();
            let z: Vec<C64> = lp
                .iter()
                .map(|&(i, j)| g[[i, j]] * winding(grid.node(i, j)).conj())
                .collect();
            let phase = crate::pde::bc::unwrap(&z);
            let closing = phase[phase.len() - 1] + (z[0] * z[z.len() - 1].conj()).arg() - phase[0];
            if closing.abs() > 1e-6 {
                return Err(Error::config(
                    "bc",
                    format!("boundary winding differs from total degree {}", config.total_degree()),
                ));
            }
            let mut b = Array2::zeros(grid.shape());
            for (&(i, j), v) in lp.iter().zip(&phase) {
                b[[i, j]] = *v;
            }
            let solver = SpectralSolver::new(*grid, SolverKind::Dirichlet);
            solver.dirichlet_poisson(&Array2::zeros(grid.shape()), &b)?
        }
    };
    let eps = scaling.eps;
    let values = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let p = grid.node(i, j);
        let mut amp = 1.0;
        for c in &charges {
            let r = (p[0] - c.position[0]).hypot(p[1] - c.position[1]);
            amp *= if r > 0.0 { profile.eval(r / eps) } else { 0.0 };
        }
        if amp == 0.0 {
            return C64::new(0.0, 0.0);
        }
        winding(p) * C64::from_polar(amp, phi_reg[[i, j]])
    });
    let mut u = ComplexField::new(*grid, values, config.time)?;
    bc.pin(&mut u);
    Ok(u)
}
