//! External vector fields `F`, `G` and the optional manufactured source.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::C64;
use crate::grid::{Grid, Point};
use crate::testfn::{smooth_step, BoundaryCutoff};

/// Built-in field families. Every family is multiplied by an optional
/// boundary cutoff and an optional time ramp `smooth_step(t / ramp)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldSpec {
    Zero,
    Constant {
        value: [f64; 2],
        #[serde(default)]
        cutoff: Option<CutoffSpec>,
        #[serde(default)]
        ramp: Option<f64>,
    },
    /// `ω · i(x − x₀)`.
    Rotation {
        omega: f64,
        center: [f64; 2],
        #[serde(default)]
        cutoff: Option<CutoffSpec>,
        #[serde(default)]
        ramp: Option<f64>,
    },
    /// `(rate · (x₂ − c₂), 0)`.
    Shear {
        rate: f64,
        center: [f64; 2],
        #[serde(default)]
        cutoff: Option<CutoffSpec>,
        #[serde(default)]
        ramp: Option<f64>,
    },
    /// Quadratic polynomial per component, coefficients of `1, x, y, x², xy, y²`.
    Polynomial {
        x: [f64; 6],
        y: [f64; 6],
        #[serde(default)]
        cutoff: Option<CutoffSpec>,
        #[serde(default)]
        ramp: Option<f64>,
    },
}

/// Boundary cutoff: zero within `inner` of ∂D, one beyond `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub inner: f64,
    pub outer: f64,
}

pub type CustomField = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(Point, f64) -> C64 + Send + Sync>;

/// A vector field of `(x, t)`.
#[derive(Clone)]
pub enum VectorFn {
    Spec {
        spec: FieldSpec,
        cutoff: Option<BoundaryCutoff>,
    },
    Custom(CustomField),
}

impl fmt::Debug for VectorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorFn::Spec { spec, .. } => write!(f, "{spec:?}"),
            VectorFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl VectorFn {
    pub fn zero() -> Self {
        VectorFn::Spec {
            spec: FieldSpec::Zero,
            cutoff: None,
        }
    }

    pub fn from_spec(spec: &FieldSpec, grid: &Grid) -> Self {
        let c = match spec {
            FieldSpec::Zero => None,
            FieldSpec::Constant { cutoff, .. }
            | FieldSpec::Rotation { cutoff, .. }
            | FieldSpec::Shear { cutoff, .. }
            | FieldSpec::Polynomial { cutoff, .. } => *cutoff,
        };
        VectorFn::Spec {
            spec: spec.clone(),
            cutoff: c.map(|c| BoundaryCutoff::for_grid(grid, c.inner, c.outer)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(
            self,
            VectorFn::Spec {
                spec: FieldSpec::Zero,
                ..
            }
        )
    }

    /// False when the field can be sampled once per run.
    pub fn is_time_dependent(&self) -> bool {
        match self {
            VectorFn::Custom(_) => true,
            VectorFn::Spec { spec, .. } => match spec {
                FieldSpec::Zero => false,
                FieldSpec::Constant { ramp, .. }
                | FieldSpec::Rotation { ramp, .. }
                | FieldSpec::Shear { ramp, .. }
                | FieldSpec::Polynomial { ramp, .. } => ramp.is_some(),
            },
        }
    }

    pub fn eval(&self, p: Point, t: f64) -> [f64; 2] {
        let (spec, cutoff) = match self {
            VectorFn::Custom(f) => return f(p, t),
            VectorFn::Spec { spec, cutoff } => (spec, cutoff),
        };
        let (v, ramp) = match spec {
            FieldSpec::Zero => return [0.0, 0.0],
            FieldSpec::Constant { value, ramp, .. } => (*value, ramp),
            FieldSpec::Rotation {
                omega,
                center,
                ramp,
                ..
            } => (
                [-omega * (p[1] - center[1]), omega * (p[0] - center[0])],
                ramp,
            ),
            FieldSpec::Shear {
                rate, center, ramp, ..
            } => ([rate * (p[1] - center[1]), 0.0], ramp),
            FieldSpec::Polynomial { x, y, ramp, .. } => {
                let m = [1.0, p[0], p[1], p[0] * p[0], p[0] * p[1], p[1] * p[1]];
                let dot = |c: &[f64; 6]| c.iter().zip(m.iter()).map(|(a, b)| a * b).sum();
                ([dot(x), dot(y)], ramp)
            }
        };
        let mut s = cutoff.map_or(1.0, |c| c.value(p));
        if let Some(r) = ramp {
            s *= smooth_step(t / r);
        }
        [s * v[0], s * v[1]]
    }
}

/// The pair `(F, G)` plus an optional complex source added to the right-hand
/// side (used for manufactured solutions).
#[derive(Clone, Debug)]
pub struct ExternalFields {
    pub f: VectorFn,
    pub g: VectorFn,
    pub source: Option<Source>,
}

#[derive(Clone)]
pub struct Source(pub SourceFn);

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Source")
    }
}

impl Default for ExternalFields {
    fn default() -> Self {
        Self::none()
    }
}

impl ExternalFields {
    pub fn none() -> Self {
        ExternalFields {
            f: VectorFn::zero(),
            g: VectorFn::zero(),
            source: None,
        }
    }

    pub fn from_specs(f: &FieldSpec, g: &FieldSpec, grid: &Grid) -> Self {
        ExternalFields {
            f: VectorFn::from_spec(f, grid),
            g: VectorFn::from_spec(g, grid),
            source: None,
        }
    }

    /// True when the flow is unforced (no `F`, `G` or source).
    pub fn is_unforced(&self) -> bool {
        self.f.is_zero() && self.g.is_zero() && self.source.is_none()
    }

    /// Checks `F(x, 0) = G(x, 0) = 0` on ∂D, and for Neumann runs that
    /// `(G, ν) = 0` on ∂D at the sampled times.
    pub fn check_admissible(&self, grid: &Grid, neumann: bool, horizon: f64) -> Result<()> {
        let tol = 1e-12;
        for (i, j) in grid.boundary_loop() {
            let p = grid.node(i, j);
            for (name, v) in [("F", self.f.eval(p, 0.0)), ("G", self.g.eval(p, 0.0))] {
                if v[0].hypot(v[1]) > tol {
                    return Err(Error::Inadmissible(format!(
                        "{name}(x, 0) = {v:?} at boundary point {p:?}"
                    )));
                }
            }
            if neumann {
                let nu = grid.outward_normal(i, j);
                for k in 0..=4 {
                    let t = horizon * k as f64 / 4.0;
                    let g = self.g.eval(p, t);
                    if (g[0] * nu[0] + g[1] * nu[1]).abs() > tol {
                        return Err(Error::Inadmissible(format!(
                            "(G, nu) != 0 at boundary point {p:?}, t = {t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest `k_ε|F| + |G|` over the grid at time `t`.
    pub fn max_speed(&self, grid: &Grid, k_eps: f64, t: f64) -> f64 {
        if self.f.is_zero() && self.g.is_zero() {
            return 0.0;
        }
        let mut m: f64 = 0.0;
        for i in 0..grid.n1() {
            for j in 0..grid.n2() {
                let p = grid.node(i, j);
                let f = self.f.eval(p, t);
                let g = self.g.eval(p, t);
                m = m.max(k_eps * f[0].hypot(f[1]) + g[0].hypot(g[1]));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_evaluate() {
        let g = Grid::unit_square(33).unwrap();
        let rot = VectorFn::from_spec(
            &FieldSpec::Rotation {
                omega: 2.0,
                center: [0.5, 0.5],
                cutoff: None,
                ramp: None,
            },
            &g,
        );
        assert_eq!(rot.eval([1.0, 0.5], 0.0), [0.0, 1.0]);
        let ramped = VectorFn::from_spec(
            &FieldSpec::Constant {
                value: [1.0, 0.0],
                cutoff: None,
                ramp: Some(0.1),
            },
            &g,
        );
        assert_eq!(ramped.eval([0.5, 0.5], 0.0), [0.0, 0.0]);
        assert_eq!(ramped.eval([0.5, 0.5], 0.2), [1.0, 0.0]);
    }

    #[test]
    fn admissibility() {
        let g = Grid::unit_square(33).unwrap();
        let cutoff = Some(CutoffSpec {
            inner: 0.1,
            outer: 0.2,
        });
        let ok = ExternalFields::from_specs(
            &FieldSpec::Constant {
                value: [1.0, 0.0],
                cutoff,
                ramp: None,
            },
            &FieldSpec::Zero,
            &g,
        );
        assert!(ok.check_admissible(&g, true, 1.0).is_ok());
        let bad = ExternalFields::from_specs(
            &FieldSpec::Zero,
            &FieldSpec::Constant {
                value: [1.0, 0.0],
                cutoff: None,
                ramp: Some(0.5),
            },
            &g,
        );
        // Vanishes at t = 0 but is not tangential later.
        assert!(matches!(
            bad.check_admissible(&g, true, 1.0),
            Err(Error::Inadmissible(_))
        ));
        assert!(bad.check_admissible(&g, false, 1.0).is_ok());
    }
}
