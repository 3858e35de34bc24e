//! Boundary conditions: homogeneous Neumann or Dirichlet data `u = g` with `|g| = 1`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::grid::{Grid, Point};
use crate::poisson::BoundaryFlux;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCharge {
    pub position: [f64; 2],
    pub degree: i32,
}

/// Configured boundary condition.
///
/// Dirichlet data are `g(x) = e^{iα} Π_k ((x − b_k)/|x − b_k|)^{d_k}`; when
/// `charges` is omitted the initial vortex configuration is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySpec {
    Neumann,
    Dirichlet {
        #[serde(default)]
        phase_offset: f64,
        #[serde(default)]
        charges: Option<Vec<PointCharge>>,
    },
}

/// Boundary condition sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Neumann,
    /// `g` on a full-size array; only boundary entries are meaningful.
    Dirichlet { g: Array2<C64> },
}

pub fn charge_phase(charges: &[PointCharge], offset: f64, p: Point) -> C64 {
    let mut z = C64::from_polar(1.0, offset);
    for c in charges {
        let w = C64::new(p[0] - c.position[0], p[1] - c.position[1]);
        let w = w / w.norm();
        z *= if c.degree >= 0 {
            w.powi(c.degree)
        } else {
            w.conj().powi(-c.degree)
        };
    }
    z
}

impl BoundaryCondition {
    pub fn from_spec(spec: &BoundarySpec, grid: &Grid, default_charges: &[PointCharge]) -> Result<Self> {
        match spec {
            BoundarySpec::Neumann => Ok(BoundaryCondition::Neumann),
            BoundarySpec::Dirichlet {
                phase_offset,
                charges,
            } => {
                let charges = charges.as_deref().unwrap_or(default_charges);
                let mut g = Array2::zeros(grid.shape());
                for (i, j) in grid.boundary_loop() {
                    let p = grid.node(i, j);
                    if charges.iter().any(|c| {
                        (c.position[0] - p[0]).hypot(c.position[1] - p[1]) < 1e-12
                    }) {
                        return Err(Error::config("bc.charges", "charge on a boundary node"));
                    }
                    g[[i, j]] = charge_phase(charges, *phase_offset, p);
                }
                Ok(BoundaryCondition::Dirichlet { g })
            }
        }
    }

    pub fn is_neumann(&self) -> bool {
        matches!(self, BoundaryCondition::Neumann)
    }

    /// Winding number of `g` along the counter-clockwise boundary loop, or 0 for Neumann.
    pub fn winding(&self, grid: &Grid) -> Result<i32> {
        let BoundaryCondition::Dirichlet { g } = self else {
            return Ok(0);
        };
        let lp = grid.boundary_loop();
        let mut total = 0.0;
        for k in 0..lp.len() {
            let a = g[lp[k]];
            let b = g[lp[(k + 1) % lp.len()]];
            total += (b * a.conj()).arg();
        }
        let w = total / (2.0 * std::f64::consts::PI);
        if (w - w.round()).abs() > 1e-6 {
            return Err(Error::config("bc", format!("non-integer boundary winding {w}")));
        }
        Ok(w.round() as i32)
    }

    /// Checks `|g| = 1` on the boundary.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if let BoundaryCondition::Dirichlet { g } = self {
            for (i, j) in grid.boundary_loop() {
                if (g[[i, j]].norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::config("bc", "|g| != 1 on the boundary"));
                }
            }
        }
        Ok(())
    }

    /// Overwrites boundary nodes with `g` (no-op for Neumann).
    pub fn pin(&self, u: &mut ComplexField) {
        if let BoundaryCondition::Dirichlet { g } = self {
            for (i, j) in u.grid.boundary_loop() {
                u.values[[i, j]] = g[[i, j]];
            }
        }
    }

    /// Tangential derivative `∂_τ arg g` along each side (counter-clockwise
    /// tangent), by second-order differences of the unwrapped phase.
    pub fn tangential_phase_derivative(&self, grid: &Grid) -> Option<BoundaryFlux> {
        let BoundaryCondition::Dirichlet { g } = self else {
            return None;
        };
        let (n1, n2) = grid.shape();
        let h = grid.h();
        let side = |vals: Vec<C64>, sign: f64| -> Vec<f64> {
            let phase = unwrap(&vals);
            diff1(&phase, h).into_iter().map(|v| sign * v).collect()
        };
        Some(BoundaryFlux {
            left: side((0..n2).map(|j| g[[0, j]]).collect(), -1.0),
            right: side((0..n2).map(|j| g[[n1 - 1, j]]).collect(), 1.0),
            bottom: side((0..n1).map(|i| g[[i, 0]]).collect(), 1.0),
            top: side((0..n1).map(|i| g[[i, n2 - 1]]).collect(), -1.0),
        })
    }
}

/// Continuous phase along a sequence of unit complex numbers.
pub fn unwrap(z: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut acc = z[0].arg();
    out.push(acc);
    for w in z.windows(2) {
        acc += (w[1] * w[0].conj()).arg();
        out.push(acc);
    }
    out
}

/// Second-order derivative of 1D samples (one-sided at the ends).
pub fn diff1(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (4.0 * (a[1] - a[0]) - (a[2] - a[0])) / (2.0 * h)
            } else if k + 1 == n {
                (4.0 * (a[n - 1] - a[n - 2]) - (a[n - 1] - a[n - 3])) / (2.0 * h)
            } else {
                (a[k + 1] - a[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}
