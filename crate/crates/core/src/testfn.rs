//! Smooth cutoffs, the fixed test-function banks used by the pairings, and
//! finite-difference derivatives of closures.
//!
//! Bank (with `χ` the boundary cutoff of the domain and `c` its center):
//!
//! | name | scalar φ | vector w |
//! |------|----------|----------|
//! | `affine`    | `(x₁ − c₁) χ`  | `e₁ χ` |
//! | `quadratic` | `|x − c|² χ`   | `e₂ χ` |
//! | `rotation`  | `(x₁ − c₁)(x₂ − c₂) χ` | `i(x − c) χ` |

use crate::grid::{Grid, Point};

/// C^∞ step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Equal to 1 on `B_{r0}(center)`, 0 outside `B_{r1}(center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCutoff {
    pub center: Point,
    pub r0: f64,
    pub r1: f64,
}

impl RadialCutoff {
    pub fn value(&self, p: Point) -> f64 {
        let r = (p[0] - self.center[0]).hypot(p[1] - self.center[1]);
        1.0 - smooth_step((r - self.r0) / (self.r1 - self.r0))
    }
}

/// Vanishes within `d0` of the rectangle boundary and equals 1 beyond `d1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCutoff {
    pub origin: Point,
    pub extent: [f64; 2],
    pub d0: f64,
    pub d1: f64,
}

impl BoundaryCutoff {
    pub fn for_grid(grid: &Grid, d0: f64, d1: f64) -> Self {
        BoundaryCutoff {
            origin: grid.origin(),
            extent: grid.extent(),
            d0,
            d1,
        }
    }

    pub fn value(&self, p: Point) -> f64 {
        let mut v = 1.0;
        for k in 0..2 {
            let lo = p[k] - self.origin[k];
            let hi = self.origin[k] + self.extent[k] - p[k];
            for d in [lo, hi] {
                v *= smooth_step((d - self.d0) / (self.d1 - self.d0));
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankMember {
    Affine,
    Quadratic,
    Rotation,
}

pub const BANK: [BankMember; 3] = [BankMember::Affine, BankMember::Quadratic, BankMember::Rotation];

impl BankMember {
    pub fn name(&self) -> &'static str {
        match self {
            BankMember::Affine => "affine",
            BankMember::Quadratic => "quadratic",
            BankMember::Rotation => "rotation",
        }
    }
}

/// The test-function bank of one domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestBank {
    pub center: Point,
    pub cutoff: BoundaryCutoff,
}

impl TestBank {
    /// Cutoff ramps between `collar` and `2 collar` from the boundary.
    pub fn new(grid: &Grid, collar: f64) -> Self {
        TestBank {
            center: grid.center(),
            cutoff: BoundaryCutoff::for_grid(grid, collar, 2.0 * collar),
        }
    }

    pub fn scalar(&self, m: BankMember, p: Point) -> f64 {
        let x = p[0] - self.center[0];
        let y = p[1] - self.center[1];
        let chi = self.cutoff.value(p);
        chi * match m {
            BankMember::Affine => x,
            BankMember::Quadratic => x * x + y * y,
            BankMember::Rotation => x * y,
        }
    }

    pub fn vector(&self, m: BankMember, p: Point) -> [f64; 2] {
        let chi = self.cutoff.value(p);
        match m {
            BankMember::Affine => [chi, 0.0],
            BankMember::Quadratic => [0.0, chi],
            BankMember::Rotation => [
                -(p[1] - self.center[1]) * chi,
                (p[0] - self.center[0]) * chi,
            ],
        }
    }
}

const D1: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
const D2: [f64; 7] = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0];

/// Sixth-order central gradient of `f` at `p` with step `eta`.
pub fn fd_gradient(f: &dyn Fn(Point) -> f64, p: Point, eta: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (m, c) in D1.iter().enumerate() {
        let s = (m as f64 - 3.0) * eta;
        g[0] += c * f([p[0] + s, p[1]]);
        g[1] += c * f([p[0], p[1] + s]);
    }
    [g[0] / (60.0 * eta), g[1] / (60.0 * eta)]
}

/// Sixth-order central Hessian `[[f₁₁, f₁₂], [f₂₁, f₂₂]]`.
pub fn fd_hessian(f: &dyn Fn(Point) -> f64, p: Point, eta: f64) -> [[f64; 2]; 2] {
    let mut hxx = 0.0;
    let mut hyy = 0.0;
    let mut hxy = 0.0;
    for (m, c) in D2.iter().enumerate() {
        let s = (m as f64 - 3.0) * eta;
        hxx += c * f([p[0] + s, p[1]]);
        hyy += c * f([p[0], p[1] + s]);
    }
    for (m, cm) in D1.iter().enumerate() {
        if *cm == 0.0 {
            continue;
        }
        for (l, cl) in D1.iter().enumerate() {
            if *cl == 0.0 {
                continue;
            }
            let sx = (m as f64 - 3.0) * eta;
            let sy = (l as f64 - 3.0) * eta;
            hxy += cm * cl * f([p[0] + sx, p[1] + sy]);
        }
    }
    let d2 = 180.0 * eta * eta;
    let dxy = 3600.0 * eta * eta;
    [[hxx / d2, hxy / dxy], [hxy / dxy, hyy / d2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_cutoffs() {
        assert_eq!(smooth_step(-0.5), 0.0);
        assert_eq!(smooth_step(1.5), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let c = RadialCutoff {
            center: [0.5, 0.5],
            r0: 0.1,
            r1: 0.2,
        };
        assert_eq!(c.value([0.55, 0.5]), 1.0);
        assert_eq!(c.value([0.75, 0.5]), 0.0);
        let g = Grid::unit_square(17).unwrap();
        let b = BoundaryCutoff::for_grid(&g, 0.05, 0.1);
        assert_eq!(b.value([0.02, 0.5]), 0.0);
        assert_eq!(b.value([0.5, 0.5]), 1.0);
    }

    #[test]
    fn fd_derivatives_of_polynomials_are_exact() {
        let f = |p: Point| p[0].powi(3) - 2.0 * p[0] * p[1] * p[1] + p[1];
        let p = [0.3, -0.7];
        let h = fd_hessian(&f, p, 1e-2);
        assert!((h[0][0] - 6.0 * p[0]).abs() < 1e-8);
        assert!((h[0][1] + 4.0 * p[1]).abs() < 1e-8);
        assert!((h[1][1] + 4.0 * p[0]).abs() < 1e-8);
        let g = fd_gradient(&f, p, 1e-2);
        assert!((g[0] - (3.0 * p[0] * p[0] - 2.0 * p[1] * p[1])).abs() < 1e-10);
    }
}
