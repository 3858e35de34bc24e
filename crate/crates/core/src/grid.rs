//! Uniform rectangular grids and the ε-dependent scaling factors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Node-centered uniform grid on an axis-aligned rectangle.
///
/// Node `(i, j)` sits at `origin + (i h, j h)`; `i` runs along x (`0..n1`),
/// `j` along y (`0..n2`). Both axes share the spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Point,
    extent: [f64; 2],
    n1: usize,
    n2: usize,
    h: f64,
}

pub const MIN_NODES: usize = 16;

impl Grid {
    pub fn new(origin: Point, extent: [f64; 2], n1: usize, n2: usize) -> Result<Self> {
        if n1 < MIN_NODES || n2 < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes per axis, got {n1}x{n2}"
            )));
        }
        if !(extent[0] > 0.0 && extent[1] > 0.0) || !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad extent {extent:?}")));
        }
        let h1 = extent[0] / (n1 - 1) as f64;
        let h2 = extent[1] / (n2 - 1) as f64;
        if ((h1 - h2) / h1).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "spacing differs between axes: {h1:.6e} vs {h2:.6e}"
            )));
        }
        Ok(Grid {
            origin,
            extent,
            n1,
            n2,
            h: h1,
        })
    }

    /// Square `[x0, x0 + side]²` with `n` nodes per axis.
    pub fn square(origin: Point, side: f64, n: usize) -> Result<Self> {
        Self::new(origin, [side, side], n, n)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::square([0.0, 0.0], 1.0, n)
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.n2
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area(&self) -> f64 {
        self.extent[0] * self.extent[1]
    }

    pub fn center(&self) -> Point {
        [
            self.origin[0] + 0.5 * self.extent[0],
            self.origin[1] + 0.5 * self.extent[1],
        ]
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.h
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.x(i), self.y(j)]
    }

    /// Center of cell `(i, j)`, the square spanned by nodes `(i..=i+1, j..=j+1)`.
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        [self.x(i) + 0.5 * self.h, self.y(j) + 0.5 * self.h]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n1 || j + 1 == self.n2
    }

    /// True when the node lies within `width` nodes of the boundary.
    #[inline]
    pub fn in_collar(&self, i: usize, j: usize, width: usize) -> bool {
        i < width || j < width || i + width >= self.n1 || j + width >= self.n2
    }

    /// Trapezoidal quadrature weight of node `(i, j)`.
    #[inline]
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.n1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j + 1 == self.n2 { 0.5 } else { 1.0 };
        wx * wy * self.h * self.h
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.origin[0]
            && p[1] >= self.origin[1]
            && p[0] <= self.origin[0] + self.extent[0]
            && p[1] <= self.origin[1] + self.extent[1]
    }

    /// Euclidean distance to the rectangle boundary (negative outside).
    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        let dx = (p[0] - self.origin[0]).min(self.origin[0] + self.extent[0] - p[0]);
        let dy = (p[1] - self.origin[1]).min(self.origin[1] + self.extent[1] - p[1]);
        dx.min(dy)
    }

    /// Fractional node coordinates of a point.
    #[inline]
    pub fn to_index_space(&self, p: Point) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.h,
            (p[1] - self.origin[1]) / self.h,
        ]
    }

    /// Nearest node, clamped to the grid.
    pub fn nearest_node(&self, p: Point) -> (usize, usize) {
        let [fi, fj] = self.to_index_space(p);
        let i = fi.round().clamp(0.0, (self.n1 - 1) as f64) as usize;
        let j = fj.round().clamp(0.0, (self.n2 - 1) as f64) as usize;
        (i, j)
    }

    /// Boundary nodes in counter-clockwise order starting at the origin corner.
    /// Each node appears once.
    pub fn boundary_loop(&self) -> Vec<(usize, usize)> {
        let (n1, n2) = (self.n1, self.n2);
        let mut out = Vec::with_capacity(2 * (n1 + n2) - 4);
        out.extend((0..n1 - 1).map(|i| (i, 0)));
        out.extend((0..n2 - 1).map(|j| (n1 - 1, j)));
        out.extend((1..n1).rev().map(|i| (i, n2 - 1)));
        out.extend((1..n2).rev().map(|j| (0, j)));
        out
    }

    /// Outward unit normal at a boundary node; corners get the normalized sum.
    pub fn outward_normal(&self, i: usize, j: usize) -> [f64; 2] {
        let mut n = [0.0f64, 0.0];
        if i == 0 {
            n[0] -= 1.0;
        }
        if i + 1 == self.n1 {
            n[0] += 1.0;
        }
        if j == 0 {
            n[1] -= 1.0;
        }
        if j + 1 == self.n2 {
            n[1] += 1.0;
        }
        let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
        if len > 0.0 {
            [n[0] / len, n[1] / len]
        } else {
            n
        }
    }

    /// Same geometry with a different resolution `n1' = k (n1 - 1) + 1`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.origin,
            self.extent,
            factor * (self.n1 - 1) + 1,
            factor * (self.n2 - 1) + 1,
        )
    }
}

/// ε together with k_ε = 1/log(1/ε) and λ_ε = λ₀ k_ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonScaling {
    pub eps: f64,
    pub k_eps: f64,
    pub lambda0: f64,
    pub lambda_eps: f64,
}

impl EpsilonScaling {
    pub fn new(eps: f64, lambda0: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config("eps", format!("need 0 < eps < 1, got {eps}")));
        }
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(Error::config(
                "lambda0",
                format!("need lambda0 > 0, got {lambda0}"),
            ));
        }
        let k_eps = 1.0 / (1.0 / eps).ln();
        Ok(EpsilonScaling {
            eps,
            k_eps,
            lambda0,
            lambda_eps: lambda0 * k_eps,
        })
    }

    pub fn log_inv_eps(&self) -> f64 {
        (1.0 / self.eps).ln()
    }
}

/// Smallest integer `m >= target` of the form 2^a 3^b 5^c (fast transform sizes).
pub fn smooth_size_at_least(target: usize) -> usize {
    let mut m = target.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_anisotropic_grids() {
        assert!(Grid::unit_square(8).is_err());
        assert!(Grid::new([0.0, 0.0], [1.0, 2.0], 32, 32).is_err());
        let g = Grid::new([0.0, 0.0], [1.0, 2.0], 32, 63).unwrap();
        assert!((g.h() - 1.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_classification_is_total_and_disjoint() {
        let g = Grid::unit_square(17).unwrap();
        let mut boundary = 0;
        let mut interior = 0;
        for i in 0..g.n1() {
            for j in 0..g.n2() {
                if g.is_boundary(i, j) {
                    boundary += 1;
                } else {
                    interior += 1;
                }
            }
        }
        assert_eq!(boundary + interior, g.len());
        assert_eq!(interior, 15 * 15);
        assert_eq!(g.boundary_loop().len(), boundary);
    }

    #[test]
    fn trapezoid_weights_sum_to_area() {
        let g = Grid::new([0.5, -1.0], [2.0, 1.0], 41, 21).unwrap();
        let mut s = 0.0;
        for i in 0..g.n1() {
            for j in 0..g.n2() {
                s += g.trapezoid_weight(i, j);
            }
        }
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_is_exact() {
        let s = EpsilonScaling::new(0.04, 1.5).unwrap();
        assert_eq!(s.k_eps, 1.0 / (1.0f64 / 0.04).ln());
        assert_eq!(s.lambda_eps, 1.5 * s.k_eps);
        assert!(EpsilonScaling::new(1.0, 1.0).is_err());
        assert!(EpsilonScaling::new(0.1, 0.0).is_err());
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size_at_least(267), 270);
        assert_eq!(smooth_size_at_least(200), 200);
        assert_eq!(smooth_size_at_least(131), 135);
    }
}
