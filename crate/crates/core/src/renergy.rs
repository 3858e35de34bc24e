//! Canonical harmonic map via its stream function, the renormalized energy
//! `W`, its gradient, and the stress identity for `W`'s gradient.
//!
//! The stream function is `ψ = Σ_k d_k log|x − a_k| + ψ_reg` with `ψ_reg`
//! discrete-harmonic, and the current of the harmonic map is `j* = ∇⊥ψ =
//! (−∂₂ψ, ∂₁ψ)`. For Neumann runs `ψ = 0` on `∂D`; for Dirichlet runs
//! `∂_ν ψ = ∂_τ arg g`. With `H_k = ψ − d_k log|x − a_k|`,
//!
//! `W = −π Σ_{k≠l} d_k d_l log|a_k − a_l| − π Σ_k d_k ψ_reg(a_k) + ½ ∮ ψ ∂_ν ψ`,
//!
//! which is `½ ∫_{D∖∪B_s} |j*|² − πN log(1/s)` in the limit `s → 0`.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid, Point};
use crate::interp::{sample, sample_grad};
use crate::pde::bc::BoundaryCondition;
use crate::poisson::{BoundaryFlux, SpectralSolver, SolverKind};
use crate::testfn::{fd_gradient, fd_hessian};
use crate::track::VortexConfiguration;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunction {
    pub grid: Grid,
    pub positions: Vec<Point>,
    pub degrees: Vec<i32>,
    pub psi_reg: Array2<f64>,
    /// `∂_ν ψ` on the boundary (Dirichlet runs only).
    pub boundary_flux: Option<BoundaryFlux>,
}

impl StreamFunction {
    pub fn singular(&self, p: Point) -> f64 {
        self.positions
            .iter()
            .zip(&self.degrees)
            .map(|(a, d)| *d as f64 * (p[0] - a[0]).hypot(p[1] - a[1]).ln())
            .sum()
    }

    fn singular_grad(&self, p: Point, skip: Option<usize>) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for (l, (a, d)) in self.positions.iter().zip(&self.degrees).enumerate() {
            if Some(l) == skip {
                continue;
            }
            let (x, y) = (p[0] - a[0], p[1] - a[1]);
            let r2 = x * x + y * y;
            g[0] += *d as f64 * x / r2;
            g[1] += *d as f64 * y / r2;
        }
        g
    }

    pub fn regular(&self, p: Point) -> f64 {
        sample(&self.psi_reg, &self.grid, p)
    }

    pub fn value(&self, p: Point) -> f64 {
        self.singular(p) + self.regular(p)
    }

    pub fn grad(&self, p: Point) -> [f64; 2] {
        let s = self.singular_grad(p, None);
        let r = sample_grad(&self.psi_reg, &self.grid, p);
        [s[0] + r[0], s[1] + r[1]]
    }

    /// `j(u*)(p) = ∇⊥ψ(p)`.
    pub fn current(&self, p: Point) -> [f64; 2] {
        let g = self.grad(p);
        [-g[1], g[0]]
    }

    /// `∇H_k(a_k)`: the gradient at `a_k` of everything except vortex `k`'s own log.
    pub fn regular_grad_at(&self, k: usize) -> [f64; 2] {
        let a = self.positions[k];
        let s = self.singular_grad(a, Some(k));
        let r = sample_grad(&self.psi_reg, &self.grid, a);
        [s[0] + r[0], s[1] + r[1]]
    }

    /// Nodal `ψ` with the logarithms evaluated at distance at least `h/4`.
    pub fn psi(&self) -> ScalarField {
        let floor = 0.25 * self.grid.h();
        let mut f = ScalarField::from_fn(self.grid, |p| {
            self.positions
                .iter()
                .zip(&self.degrees)
                .map(|(a, d)| *d as f64 * (p[0] - a[0]).hypot(p[1] - a[1]).max(floor).ln())
                .sum()
        });
        f.values += &self.psi_reg;
        f
    }
}

fn check_spacing(config: &VortexConfiguration, grid: &Grid) -> Result<f64> {
    let rho = config.rho(grid);
    let limit = 4.0 * grid.h();
    if !(rho > limit) {
        return Err(Error::ConfigTooClose { rho, limit });
    }
    Ok(rho)
}

/// Solves for `ψ_reg` on `grid`.
pub fn stream_function(config: &VortexConfiguration, bc: &BoundaryCondition, grid: &Grid) -> Result<StreamFunction> {
    check_spacing(config, grid)?;
    let mut sf = StreamFunction {
        grid: *grid,
        positions: config.positions.clone(),
        degrees: config.degrees.clone(),
        psi_reg: Array2::zeros(grid.shape()),
        boundary_flux: None,
    };
    match bc {
        BoundaryCondition::Neumann => {
            let solver = SpectralSolver::new(*grid, SolverKind::Dirichlet);
            let mut b = Array2::zeros(grid.shape());
            for (i, j) in grid.boundary_loop() {
                b[[i, j]] = -sf.singular(grid.node(i, j));
            }
            sf.psi_reg = solver.dirichlet_poisson(&Array2::zeros(grid.shape()), &b)?;
        }
        BoundaryCondition::Dirichlet { .. } => {
            let winding = bc.winding(grid)?;
            if winding != config.total_degree() {
                return Err(Error::config(
                    "bc",
                    format!(
                        "boundary winding {winding} differs from total degree {}",
                        config.total_degree()
                    ),
                ));
            }
            let tau = bc
                .tangential_phase_derivative(grid)
                .expect("Dirichlet data has a tangential derivative");
            let normal = BoundaryFlux::from_fn(grid, |p, n| {
                let g = sf.singular_grad(p, None);
                g[0] * n[0] + g[1] * n[1]
            });
            let q = BoundaryFlux {
                left: sub(&tau.left, &normal.left),
                right: sub(&tau.right, &normal.right),
                bottom: sub(&tau.bottom, &normal.bottom),
                top: sub(&tau.top, &normal.top),
            };
            let solver = SpectralSolver::new(*grid, SolverKind::Neumann);
            let (psi_reg, _) = solver.neumann_poisson(&Array2::zeros(grid.shape()), &q)?;
            sf.psi_reg = psi_reg;
            sf.boundary_flux = Some(tau);
        }
    }
    Ok(sf)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenEnergyValue {
    pub w: f64,
    /// `−π Σ_{k≠l} d_k d_l log|a_k − a_l|`.
    pub pair: f64,
    /// `−π Σ_k d_k ψ_reg(a_k)`.
    pub regular: f64,
    /// `½ ∮ ψ ∂_ν ψ`, zero for Neumann runs.
    pub boundary: f64,
}

pub fn renormalized_energy_of(sf: &StreamFunction) -> RenEnergyValue {
    let n = sf.positions.len();
    let mut pair = 0.0;
    for k in 0..n {
        for l in 0..n {
            if k != l {
                let r = (sf.positions[k][0] - sf.positions[l][0])
                    .hypot(sf.positions[k][1] - sf.positions[l][1]);
                pair -= PI * (sf.degrees[k] * sf.degrees[l]) as f64 * r.ln();
            }
        }
    }
    let regular = -PI
        * (0..n)
            .map(|k| sf.degrees[k] as f64 * sf.regular(sf.positions[k]))
            .sum::<f64>();
    let boundary = match &sf.boundary_flux {
        None => 0.0,
        Some(q) => {
            let g = sf.grid;
            let (n1, n2) = g.shape();
            let psi = |i: usize, j: usize| sf.singular(g.node(i, j)) + sf.psi_reg[[i, j]];
            let side = |vals: Vec<f64>, flux: &[f64]| -> f64 {
                let m = vals.len();
                let s: f64 = vals.iter().zip(flux).map(|(a, b)| a * b).sum();
                g.h() * (s - 0.5 * (vals[0] * flux[0] + vals[m - 1] * flux[m - 1]))
            };
            0.5 * (side((0..n2).map(|j| psi(0, j)).collect(), &q.left)
                + side((0..n2).map(|j| psi(n1 - 1, j)).collect(), &q.right)
                + side((0..n1).map(|i| psi(i, 0)).collect(), &q.bottom)
                + side((0..n1).map(|i| psi(i, n2 - 1)).collect(), &q.top))
        }
    };
    RenEnergyValue {
        w: pair + regular + boundary,
        pair,
        regular,
        boundary,
    }
}

pub fn renormalized_energy(config: &VortexConfiguration, bc: &BoundaryCondition, grid: &Grid) -> Result<RenEnergyValue> {
    if config.is_empty() && bc.is_neumann() {
        return Ok(RenEnergyValue {
            w: 0.0,
            pair: 0.0,
            regular: 0.0,
            boundary: 0.0,
        });
    }
    Ok(renormalized_energy_of(&stream_function(config, bc, grid)?))
}

/// Admissible finite-difference step: the geometric mean of `4h` and `ρ/8`.
pub fn default_fd_step(config: &VortexConfiguration, grid: &Grid) -> Result<f64> {
    let rho = config.rho(grid);
    let (lo, hi) = (4.0 * grid.h(), rho / 8.0);
    if !(hi > lo) {
        return Err(Error::ConfigTooClose {
            rho,
            limit: 32.0 * grid.h(),
        });
    }
    Ok((lo * hi).sqrt())
}

/// `∂_{a_k} W` by fourth-order central differences of `W` with step `delta`
/// (default [`default_fd_step`]).
pub fn grad_w(
    config: &VortexConfiguration,
    bc: &BoundaryCondition,
    grid: &Grid,
    delta: Option<f64>,
) -> Result<Vec<[f64; 2]>> {
    let delta = match delta {
        Some(d) => d,
        None => default_fd_step(config, grid)?,
    };
    let mut out = vec![[0.0; 2]; config.len()];
    for k in 0..config.len() {
        for axis in 0..2 {
            let w_at = |s: f64| -> Result<f64> {
                let mut pos = config.positions.clone();
                pos[k][axis] += s;
                Ok(renormalized_energy(&config.with_positions(pos), bc, grid)?.w)
            };
            let d = -w_at(2.0 * delta)? + 8.0 * w_at(delta)? - 8.0 * w_at(-delta)? + w_at(-2.0 * delta)?;
            out[k][axis] = d / (12.0 * delta);
        }
    }
    Ok(out)
}

/// `∂_{a_k} W = −2π d_k ∇H_k(a_k)` from one stream-function solve.
pub fn grad_w_regular(sf: &StreamFunction) -> Vec<[f64; 2]> {
    (0..sf.positions.len())
        .map(|k| {
            let g = sf.regular_grad_at(k);
            let c = -2.0 * PI * sf.degrees[k] as f64;
            [c * g[0], c * g[1]]
        })
        .collect()
}

/// Whole-plane interaction `−2π d_k Σ_{l≠k} d_l (a_k − a_l)/|a_k − a_l|²`.
pub fn grad_w_far_field(config: &VortexConfiguration) -> Vec<[f64; 2]> {
    let n = config.len();
    (0..n)
        .map(|k| {
            let mut g = [0.0, 0.0];
            for l in 0..n {
                if l == k {
                    continue;
                }
                let x = config.positions[k][0] - config.positions[l][0];
                let y = config.positions[k][1] - config.positions[l][1];
                let r2 = x * x + y * y;
                let c = -2.0 * PI * (config.degrees[k] * config.degrees[l]) as f64 / r2;
                g[0] += c * x;
                g[1] += c * y;
            }
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop21Check {
    pub lhs: f64,
    pub rhs: f64,
    pub grad_w: [f64; 2],
}

/// `lhs = ∫ (grad curl φ):(j* ⊗ j*)` and `rhs = −curl φ(a_k)·∂_{a_k}W`, where
/// `curl φ = (−∂₂φ, ∂₁φ)`. `φ` must be affine on `B_s(a_k)` and vanish near
/// the other vortices and the boundary.
pub fn prop21_check(
    config: &VortexConfiguration,
    bc: &BoundaryCondition,
    grid: &Grid,
    k: usize,
    phi: &dyn Fn(Point) -> f64,
    s: f64,
) -> Result<Prop21Check> {
    if k >= config.len() {
        return Err(Error::TestFunctionInvalid(format!("no vortex {k}")));
    }
    let h = grid.h();
    let eta = 0.25 * h;
    let hess = |p: Point| fd_hessian(phi, p, eta);
    let hmax = |m: [[f64; 2]; 2]| m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut scale: f64 = 0.0;
    let nodes: Vec<(Point, f64)> = (0..grid.n1())
        .flat_map(|i| (0..grid.n2()).map(move |j| (i, j)))
        .map(|(i, j)| (grid.node(i, j), grid.trapezoid_weight(i, j)))
        .collect();
    let hessians: Vec<[[f64; 2]; 2]> = nodes.iter().map(|(p, _)| hess(*p)).collect();
    for m in &hessians {
        scale = scale.max(hmax(*m));
    }
    let tol = 1e-6 * scale.max(1.0);
    let a = config.positions[k];
    for r in [0.0, 0.5 * s, 0.9 * s] {
        for q in 0..8 {
            let t = q as f64 * PI / 4.0;
            let p = [a[0] + r * t.cos(), a[1] + r * t.sin()];
            if hmax(hess(p)) > tol {
                return Err(Error::TestFunctionInvalid(format!(
                    "test function is not affine on B_s(a_{k}) at {p:?}"
                )));
            }
        }
    }
    for (l, b) in config.positions.iter().enumerate() {
        if l == k {
            continue;
        }
        for q in 0..8 {
            let t = q as f64 * PI / 4.0;
            let p = [b[0] + 0.5 * s * t.cos(), b[1] + 0.5 * s * t.sin()];
            if phi(p).abs() > 1e-12 || phi(*b).abs() > 1e-12 {
                return Err(Error::TestFunctionInvalid(format!(
                    "test function does not vanish near vortex {l}"
                )));
            }
        }
    }
    for (i, j) in grid.boundary_loop() {
        if phi(grid.node(i, j)).abs() > 1e-12 {
            return Err(Error::TestFunctionInvalid(
                "test function does not vanish on the boundary".into(),
            ));
        }
    }

    let sf = stream_function(config, bc, grid)?;
    let mut lhs = 0.0;
    for ((p, w), m) in nodes.iter().zip(&hessians) {
        if hmax(*m) <= tol || crate::ops::dist(*p, a) < s {
            continue;
        }
        let gc = [[-m[0][1], -m[1][1]], [m[0][0], m[0][1]]];
        let jv = sf.current(*p);
        let mut c = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                c += gc[x][y] * jv[x] * jv[y];
            }
        }
        lhs += w * c;
    }
    let grad = grad_w(config, bc, grid, None)?[k];
    let g1 = fd_gradient(phi, a, eta);
    let curl = [-g1[1], g1[0]];
    let rhs = -(curl[0] * grad[0] + curl[1] * grad[1]);
    Ok(Prop21Check {
        lhs,
        rhs,
        grad_w: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::bc::{BoundarySpec, PointCharge};

    fn single(p: Point) -> VortexConfiguration {
        VortexConfiguration::new(vec![p], vec![1]).unwrap()
    }

    #[test]
    fn centered_vortex_is_symmetric_and_critical() {
        let g = Grid::unit_square(129).unwrap();
        let c = single([0.5, 0.5]);
        let sf = stream_function(&c, &BoundaryCondition::Neumann, &g).unwrap();
        let n = g.n1() - 1;
        let mut asym: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let v = sf.psi_reg[[i, j]];
                asym = asym
                    .max((v - sf.psi_reg[[n - i, j]]).abs())
                    .max((v - sf.psi_reg[[j, i]]).abs())
                    .max((v - sf.psi_reg[[i, n - j]]).abs());
            }
        }
        assert!(asym < 1e-10, "{asym}");
        let gw = grad_w(&c, &BoundaryCondition::Neumann, &g, None).unwrap();
        assert!(gw[0][0].hypot(gw[0][1]) < 1e-6, "{gw:?}");
    }

    #[test]
    fn circulation_of_current_is_two_pi() {
        let g = Grid::unit_square(65).unwrap();
        let sf = stream_function(&single([0.5, 0.5]), &BoundaryCondition::Neumann, &g).unwrap();
        // Square loop of half-width 0.25 traversed counter-clockwise, Simpson per side.
        let m = 400;
        let mut circ = 0.0;
        let corners = [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]];
        for s in 0..4 {
            let (p, q) = (corners[s], corners[(s + 1) % 4]);
            let d = [(q[0] - p[0]) / m as f64, (q[1] - p[1]) / m as f64];
            for t in 0..=m {
                let w = if t == 0 || t == m { 1.0 } else if t % 2 == 1 { 4.0 } else { 2.0 };
                let x = [p[0] + t as f64 * d[0], p[1] + t as f64 * d[1]];
                let j = sf.current(x);
                circ += w / 3.0 * (j[0] * d[0] + j[1] * d[1]);
            }
        }
        assert!((circ / (2.0 * PI) - 1.0).abs() < 0.01, "{circ}");
    }

    #[test]
    fn pair_energy_difference_and_gradients() {
        let g = Grid::square([0.0, 0.0], 2.0, 401).unwrap();
        let pair = |s: f64, d: i32| {
            VortexConfiguration::new(vec![[1.0 - s, 1.0], [1.0 + s, 1.0]], vec![1, d]).unwrap()
        };
        let bc = BoundaryCondition::Neumann;
        let w1 = renormalized_energy(&pair(0.1, 1), &bc, &g).unwrap().w;
        let w2 = renormalized_energy(&pair(0.2, 1), &bc, &g).unwrap().w;
        let expect = -2.0 * PI * (0.5f64).ln();
        assert!(((w1 - w2) / expect - 1.0).abs() < 0.05, "{} vs {expect}", w1 - w2);

        let gw = grad_w(&pair(0.2, 1), &bc, &g, None).unwrap();
        assert!(gw[0][0] > 0.0 && gw[1][0] < 0.0, "{gw:?}");
        assert!((gw[0][0] + gw[1][0]).abs() < 1e-6 * gw[0][0].abs());
        assert!((gw[0][0].abs() / (PI / 0.2) - 1.0).abs() < 0.1, "{gw:?}");
        let gd = grad_w(&pair(0.2, -1), &bc, &g, None).unwrap();
        assert!(gd[0][0] < 0.0 && gd[1][0] > 0.0, "{gd:?}");
    }

    #[test]
    fn gradient_routes_agree() {
        let g = Grid::unit_square(301).unwrap();
        let c = VortexConfiguration::new(vec![[0.37, 0.45], [0.62, 0.58]], vec![1, -1]).unwrap();
        let spec = BoundarySpec::Dirichlet {
            phase_offset: 0.3,
            charges: Some(vec![
                PointCharge { position: [0.4, 0.5], degree: 1 },
                PointCharge { position: [0.6, 0.55], degree: -1 },
            ]),
        };
        for bc in [
            BoundaryCondition::Neumann,
            BoundaryCondition::from_spec(&spec, &g, &[]).unwrap(),
        ] {
            let fd = grad_w(&c, &bc, &g, None).unwrap();
            let sf = stream_function(&c, &bc, &g).unwrap();
            let an = grad_w_regular(&sf);
            for k in 0..2 {
                let e = (fd[k][0] - an[k][0]).hypot(fd[k][1] - an[k][1]);
                assert!(e < 0.01 * fd[k][0].hypot(fd[k][1]), "{fd:?} vs {an:?}");
            }
        }
    }

    #[test]
    fn degree_flip_and_reflection_invariance() {
        let g = Grid::unit_square(97).unwrap();
        let bc = BoundaryCondition::Neumann;
        let c = VortexConfiguration::new(vec![[0.3, 0.4], [0.65, 0.55]], vec![1, -1]).unwrap();
        let w = renormalized_energy(&c, &bc, &g).unwrap().w;
        let wf = renormalized_energy(&c.flipped(), &bc, &g).unwrap().w;
        assert!((w - wf).abs() < 1e-12 * w.abs().max(1.0));
        let r = c.with_positions(c.positions.iter().map(|p| [1.0 - p[0], p[1]]).collect());
        let wr = renormalized_energy(&r, &bc, &g).unwrap().w;
        assert!((w - wr).abs() < 1e-8 * w.abs().max(1.0));
    }

    #[test]
    fn rejects_close_configurations() {
        let g = Grid::unit_square(33).unwrap();
        let c = VortexConfiguration::new(vec![[0.5, 0.5], [0.55, 0.5]], vec![1, -1]).unwrap();
        assert!(matches!(
            stream_function(&c, &BoundaryCondition::Neumann, &g),
            Err(Error::ConfigTooClose { .. })
        ));
    }

    #[test]
    fn grad_w_has_a_symmetric_jacobian() {
        let g = Grid::unit_square(129).unwrap();
        let bc = BoundaryCondition::Neumann;
        let base = [[0.33, 0.42], [0.64, 0.58]];
        let grad_at = |p: Vec<Point>| {
            let c = VortexConfiguration::new(p, vec![1, -1]).unwrap();
            grad_w_regular(&stream_function(&c, &bc, &g).unwrap())
        };
        let delta = 1e-3;
        let mut jac = [[0.0; 4]; 4];
        for col in 0..4 {
            let shifted = |s: f64| {
                let mut p = base.to_vec();
                p[col / 2][col % 2] += s;
                grad_at(p)
            };
            let (gp, gm) = (shifted(delta), shifted(-delta));
            for row in 0..4 {
                jac[row][col] = (gp[row / 2][row % 2] - gm[row / 2][row % 2]) / (2.0 * delta);
            }
        }
        let scale = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in 0..4 {
            for c in 0..r {
                assert!((jac[r][c] - jac[c][r]).abs() <= 0.05 * scale, "{jac:?}");
            }
        }
    }

    #[test]
    fn dipole_energy_diverges_at_collision() {
        let g = Grid::unit_square(257).unwrap();
        let bc = BoundaryCondition::Neumann;
        let w: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|r| {
                let c = VortexConfiguration::new(vec![[0.5 - r / 2.0, 0.5], [0.5 + r / 2.0, 0.5]], vec![1, -1]).unwrap();
                renormalized_energy(&c, &bc, &g).unwrap().w
            })
            .collect();
        // W ≈ 2π log r once the pair is close: |W| grows without bound.
        assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
        assert!(((w[1] - w[2]) / (2.0 * PI * 2.0f64.ln()) - 1.0).abs() < 0.05, "{w:?}");
    }
}
