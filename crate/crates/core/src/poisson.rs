//! Fast solvers for the five-point Laplacian on a rectangle.
//!
//! Neumann problems use DCT-I on all nodes, which diagonalizes the Laplacian
//! with ghost-node reflection `u₋₁ = u₁`. Dirichlet problems use DST-I on the
//! interior nodes. In both cases the 1D eigenvalues are
//! `−(2 − 2 cos(π k/(n−1)))/h²`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayViewMut1, Axis};
use rustdct::{Dct1, DctPlanner, Dst1};

use crate::error::{Error, Result};
use crate::field::C64;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Neumann,
    Dirichlet,
}

#[derive(Clone)]
enum Plan {
    Dct(Arc<dyn Dct1<f64>>),
    Dst(Arc<dyn Dst1<f64>>),
}

impl Plan {
    fn new(kind: SolverKind, len: usize) -> Self {
        let mut planner = DctPlanner::new();
        match kind {
            SolverKind::Neumann => Plan::Dct(planner.plan_dct1(len)),
            SolverKind::Dirichlet => Plan::Dst(planner.plan_dst1(len)),
        }
    }

    fn scratch_len(&self) -> usize {
        match self {
            Plan::Dct(p) => p.get_scratch_len(),
            Plan::Dst(p) => p.get_scratch_len(),
        }
    }

    fn apply(&self, buf: &mut [f64], scratch: &mut [f64]) {
        match self {
            Plan::Dct(p) => p.process_dct1_with_scratch(buf, scratch),
            Plan::Dst(p) => p.process_dst1_with_scratch(buf, scratch),
        }
    }
}

/// Boundary data `∂_ν u` (outward normal derivative) along the four sides.
/// `left`/`right` have `n2` entries indexed by `j`, `bottom`/`top` have `n1`
/// entries indexed by `i`; corner nodes appear on two sides.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl BoundaryFlux {
    pub fn zeros(grid: &Grid) -> Self {
        BoundaryFlux {
            left: vec![0.0; grid.n2()],
            right: vec![0.0; grid.n2()],
            bottom: vec![0.0; grid.n1()],
            top: vec![0.0; grid.n1()],
        }
    }

    /// Samples `q(point, outward normal)` on every side.
    pub fn from_fn(grid: &Grid, q: impl Fn([f64; 2], [f64; 2]) -> f64) -> Self {
        let (n1, n2) = grid.shape();
        BoundaryFlux {
            left: (0..n2).map(|j| q(grid.node(0, j), [-1.0, 0.0])).collect(),
            right: (0..n2).map(|j| q(grid.node(n1 - 1, j), [1.0, 0.0])).collect(),
            bottom: (0..n1).map(|i| q(grid.node(i, 0), [0.0, -1.0])).collect(),
            top: (0..n1).map(|i| q(grid.node(i, n2 - 1), [0.0, 1.0])).collect(),
        }
    }

    /// Trapezoidal `∮ q ds`.
    pub fn total(&self, h: f64) -> f64 {
        [&self.left, &self.right, &self.bottom, &self.top]
            .iter()
            .map(|s| {
                let n = s.len();
                h * (s.iter().sum::<f64>() - 0.5 * (s[0] + s[n - 1]))
            })
            .sum()
    }
}

/// Precomputed transforms and eigenvalues for one grid and one boundary kind.
#[derive(Clone)]
pub struct SpectralSolver {
    kind: SolverKind,
    grid: Grid,
    m1: usize,
    m2: usize,
    plan1: Plan,
    plan2: Plan,
    eig1: Vec<f64>,
    eig2: Vec<f64>,
    /// Product of the per-axis inverse scalings.
    norm: f64,
}

impl fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSolver")
            .field("kind", &self.kind)
            .field("m1", &self.m1)
            .field("m2", &self.m2)
            .finish()
    }
}

fn eigenvalues(kind: SolverKind, n: usize, h: f64) -> Vec<f64> {
    let m = (n - 1) as f64;
    let s = 1.0 / (h * h);
    match kind {
        SolverKind::Neumann => (0..n)
            .map(|k| -(2.0 - 2.0 * (std::f64::consts::PI * k as f64 / m).cos()) * s)
            .collect(),
        SolverKind::Dirichlet => (1..n - 1)
            .map(|k| -(2.0 - 2.0 * (std::f64::consts::PI * k as f64 / m).cos()) * s)
            .collect(),
    }
}

impl SpectralSolver {
    pub fn new(grid: Grid, kind: SolverKind) -> Self {
        let (n1, n2) = grid.shape();
        let (m1, m2) = match kind {
            SolverKind::Neumann => (n1, n2),
            SolverKind::Dirichlet => (n1 - 2, n2 - 2),
        };
        let h = grid.h();
        SpectralSolver {
            kind,
            grid,
            m1,
            m2,
            plan1: Plan::new(kind, m1),
            plan2: Plan::new(kind, m2),
            eig1: eigenvalues(kind, n1, h),
            eig2: eigenvalues(kind, n2, h),
            norm: 4.0 / (((n1 - 1) * (n2 - 1)) as f64),
        }
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Shape of the unknown array: all nodes (Neumann) or interior nodes (Dirichlet).
    pub fn unknown_shape(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    /// Eigenvalue of the discrete Laplacian for mode `(k1, k2)`.
    #[inline]
    pub fn eigenvalue(&self, k1: usize, k2: usize) -> f64 {
        self.eig1[k1] + self.eig2[k2]
    }

    fn transform_axis(&self, a: &mut Array2<f64>, axis: usize) {
        let plan = if axis == 0 { &self.plan1 } else { &self.plan2 };
        let len = if axis == 0 { self.m1 } else { self.m2 };
        let mut buf = vec![0.0; len];
        let mut scratch = vec![0.0; plan.scratch_len()];
        for mut lane in a.lanes_mut(Axis(axis)) {
            // rustdct's FFT-backed DST-I reads stale scratch as padding.
            scratch.iter_mut().for_each(|v| *v = 0.0);
            if let Some(s) = lane.as_slice_mut() {
                plan.apply(s, &mut scratch);
            } else {
                copy_in(&lane, &mut buf);
                plan.apply(&mut buf, &mut scratch);
                copy_out(&mut lane, &buf);
            }
        }
    }

    /// Unnormalized forward transform on both axes; applying it twice and
    /// multiplying by [`Self::inverse_scale`] is the identity.
    pub fn transform(&self, a: &mut Array2<f64>) {
        debug_assert_eq!(a.dim(), (self.m1, self.m2));
        self.transform_axis(a, 0);
        self.transform_axis(a, 1);
    }

    pub fn inverse_scale(&self) -> f64 {
        self.norm
    }

    /// Solves `(I − α Δ_h) u = r` for complex `α` in place, with `r` split into
    /// real and imaginary arrays of [`Self::unknown_shape`].
    pub fn solve_shifted(&self, re: &mut Array2<f64>, im: &mut Array2<f64>, alpha: C64) {
        self.transform(re);
        self.transform(im);
        for k1 in 0..self.m1 {
            for k2 in 0..self.m2 {
                let d = C64::new(1.0, 0.0) - alpha * self.eigenvalue(k1, k2);
                let z = C64::new(re[[k1, k2]], im[[k1, k2]]) * (self.norm / d);
                re[[k1, k2]] = z.re;
                im[[k1, k2]] = z.im;
            }
        }
        self.transform(re);
        self.transform(im);
    }

    /// Solves `Δ_h u = f` in place. For Neumann the constant mode of `f` is
    /// removed first (its trapezoidal mean) and the result has zero trapezoidal mean.
    pub fn solve_poisson(&self, f: &mut Array2<f64>) {
        self.transform(f);
        for k1 in 0..self.m1 {
            for k2 in 0..self.m2 {
                let lam = self.eigenvalue(k1, k2);
                f[[k1, k2]] = if lam == 0.0 {
                    0.0
                } else {
                    f[[k1, k2]] * self.norm / lam
                };
            }
        }
        self.transform(f);
    }

    /// `Δ_h ψ = f` in the interior with `ψ = b` on the boundary (full-grid arrays).
    pub fn dirichlet_poisson(&self, f: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
        if self.kind != SolverKind::Dirichlet {
            return Err(Error::SolverFailure("dirichlet_poisson on a Neumann solver".into()));
        }
        let (n1, n2) = self.grid.shape();
        let s = 1.0 / (self.grid.h() * self.grid.h());
        let mut rhs = Array2::from_shape_fn((n1 - 2, n2 - 2), |(i, j)| f[[i + 1, j + 1]]);
        lift_boundary(&mut rhs, b, s);
        self.solve_poisson(&mut rhs);
        let mut out = b.clone();
        for i in 0..n1 - 2 {
            for j in 0..n2 - 2 {
                out[[i + 1, j + 1]] = rhs[[i, j]];
            }
        }
        check_finite(&out)?;
        Ok(out)
    }

    /// `Δ_h ψ = f` with `∂_ν ψ = q` via ghost nodes `ψ₋₁ = ψ₁ + 2h q`.
    /// The incompatible part of the data is projected out; the result has zero
    /// trapezoidal mean. Returns the solution and the removed mean of the
    /// effective right-hand side.
    pub fn neumann_poisson(&self, f: &Array2<f64>, q: &BoundaryFlux) -> Result<(Array2<f64>, f64)> {
        if self.kind != SolverKind::Neumann {
            return Err(Error::SolverFailure("neumann_poisson on a Dirichlet solver".into()));
        }
        let (n1, n2) = self.grid.shape();
        let c = 2.0 / self.grid.h();
        let mut rhs = f.clone();
        for j in 0..n2 {
            rhs[[0, j]] -= c * q.left[j];
            rhs[[n1 - 1, j]] -= c * q.right[j];
        }
        for i in 0..n1 {
            rhs[[i, 0]] -= c * q.bottom[i];
            rhs[[i, n2 - 1]] -= c * q.top[i];
        }
        let mean = trapezoid_mean(&self.grid, &rhs);
        self.solve_poisson(&mut rhs);
        let m = trapezoid_mean(&self.grid, &rhs);
        rhs.mapv_inplace(|v| v - m);
        check_finite(&rhs)?;
        Ok((rhs, mean))
    }
}

/// Moves known boundary values of a Dirichlet problem to the right-hand side
/// of the interior system: `rhs −= s · (boundary neighbours)`.
pub fn lift_boundary<T>(rhs: &mut Array2<T>, b: &Array2<T>, s: f64)
where
    T: Copy + std::ops::SubAssign + std::ops::Mul<f64, Output = T>,
{
    let (n1, n2) = b.dim();
    for j in 1..n2 - 1 {
        rhs[[0, j - 1]] -= b[[0, j]] * s;
        rhs[[n1 - 3, j - 1]] -= b[[n1 - 1, j]] * s;
    }
    for i in 1..n1 - 1 {
        rhs[[i - 1, 0]] -= b[[i, 0]] * s;
        rhs[[i - 1, n2 - 3]] -= b[[i, n2 - 1]] * s;
    }
}

pub fn trapezoid_mean(grid: &Grid, a: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for ((i, j), v) in a.indexed_iter() {
        s += grid.trapezoid_weight(i, j) * v;
    }
    s / grid.area()
}

fn check_finite(a: &Array2<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::SolverFailure("non-finite Poisson solution".into()))
    }
}

fn copy_in(lane: &ArrayViewMut1<f64>, buf: &mut [f64]) {
    for (b, v) in buf.iter_mut().zip(lane.iter()) {
        *b = *v;
    }
}

fn copy_out(lane: &mut ArrayViewMut1<f64>, buf: &[f64]) {
    for (v, b) in lane.iter_mut().zip(buf.iter()) {
        *v = *b;
    }
}

/// Reflected five-point Laplacian on all nodes (Neumann ghost nodes with zero flux).
pub fn neumann_laplacian<T>(a: &Array2<T>, h: f64) -> Array2<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (n1, n2) = a.dim();
    let s = 1.0 / (h * h);
    let r = |k: isize, n: usize| -> usize {
        if k < 0 {
            (-k) as usize
        } else if k as usize >= n {
            2 * (n - 1) - k as usize
        } else {
            k as usize
        }
    };
    Array2::from_shape_fn((n1, n2), |(i, j)| {
        let (ii, jj) = (i as isize, j as isize);
        let c = a[[i, j]];
        (a[[r(ii + 1, n1), j]] + a[[r(ii - 1, n1), j]] + a[[i, r(jj + 1, n2)]] + a[[i, r(jj - 1, n2)]]
            - c * 4.0)
            * s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::laplacian;

    #[test]
    fn transform_is_involutive_up_to_scale() {
        for kind in [SolverKind::Neumann, SolverKind::Dirichlet] {
            let g = Grid::new([0.0, 0.0], [1.0, 1.5], 21, 31).unwrap();
            let s = SpectralSolver::new(g, kind);
            let (m1, m2) = s.unknown_shape();
            let a = Array2::from_shape_fn((m1, m2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
            let mut b = a.clone();
            s.transform(&mut b);
            s.transform(&mut b);
            b.mapv_inplace(|v| v * s.inverse_scale());
            let err = (&a - &b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-12, "{kind:?}: {err}");
        }
    }

    #[test]
    fn dirichlet_residual_is_round_off() {
        let g = Grid::unit_square(33).unwrap();
        let s = SpectralSolver::new(g, SolverKind::Dirichlet);
        let f = Array2::from_shape_fn(g.shape(), |(i, j)| (g.x(i) * 3.0).sin() + g.y(j));
        let b = Array2::from_shape_fn(g.shape(), |(i, j)| g.x(i) * g.x(i) - g.y(j));
        let u = s.dirichlet_poisson(&f, &b).unwrap();
        let lap = laplacian(&u, g.h());
        for i in 1..32 {
            for j in 1..32 {
                assert!((lap[[i, j]] - f[[i, j]]).abs() < 1e-9);
            }
        }
        assert_eq!(u[[0, 5]], b[[0, 5]]);
    }

    #[test]
    fn neumann_flux_residual_is_round_off() {
        let g = Grid::unit_square(25).unwrap();
        let s = SpectralSolver::new(g, SolverKind::Neumann);
        // ψ = x² − y² + x y: harmonic, flux computed exactly at the nodes.
        let psi = |p: [f64; 2]| p[0] * p[0] - p[1] * p[1] + p[0] * p[1];
        let grad = |p: [f64; 2]| [2.0 * p[0] + p[1], -2.0 * p[1] + p[0]];
        let q = BoundaryFlux::from_fn(&g, |p, n| {
            let d = grad(p);
            d[0] * n[0] + d[1] * n[1]
        });
        let f = Array2::zeros(g.shape());
        let (u, mean) = s.neumann_poisson(&f, &q).unwrap();
        assert!(mean.abs() < 1e-10, "{mean}");
        let exact = Array2::from_shape_fn(g.shape(), |(i, j)| psi(g.node(i, j)));
        let shift = trapezoid_mean(&g, &exact);
        let err = u
            .indexed_iter()
            .map(|((i, j), v)| (v - (exact[[i, j]] - shift)).abs())
            .fold(0.0, f64::max);
        // Quadratics are reproduced exactly by the ghost-node stencil.
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn shifted_solve_inverts_reflected_laplacian() {
        let g = Grid::unit_square(19).unwrap();
        let s = SpectralSolver::new(g, SolverKind::Neumann);
        let alpha = C64::new(0.003, -0.01);
        let u = Array2::from_shape_fn(g.shape(), |(i, j)| {
            C64::new((g.x(i) * 5.0).cos() + g.y(j), g.x(i) * g.y(j))
        });
        let lu = neumann_laplacian(&u, g.h());
        let r = &u - &lu.mapv(|z| z * alpha);
        let mut re = r.mapv(|z| z.re);
        let mut im = r.mapv(|z| z.im);
        s.solve_shifted(&mut re, &mut im, alpha);
        for ((i, j), z) in u.indexed_iter() {
            assert!((re[[i, j]] - z.re).abs() < 1e-11);
            assert!((im[[i, j]] - z.im).abs() < 1e-11);
        }
    }
}
