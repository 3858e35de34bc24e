//! Manufactured solutions: a prescribed smooth `u(x, t)` compatible with
//! homogeneous Neumann data, and the source that makes it exact.

use std::sync::Arc;

use crate::field::{ComplexField, C64};
use crate::grid::{EpsilonScaling, Grid, Point};
use crate::pde::fields::{ExternalFields, Source, VectorFn};

/// `c(t) cos(pπx₁) cos(qπx₂)` with `c(t) = a + b sin(ωt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub p: f64,
    pub q: f64,
    pub a: C64,
    pub b: C64,
    pub omega: f64,
}

/// Sum of cosine modes on `[x₀, x₀ + L₁] × [y₀, y₀ + L₂]`, scaled to the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub origin: Point,
    pub extent: [f64; 2],
    pub modes: Vec<Mode>,
}

pub struct Jet {
    pub u: C64,
    pub u_t: C64,
    pub u_x: C64,
    pub u_y: C64,
    pub lap: C64,
}

impl Manufactured {
    /// A fixed four-mode solution with `|u|` around 1.
    pub fn standard(grid: &Grid) -> Self {
        let m = |p, q, a: (f64, f64), b: (f64, f64), omega| Mode {
            p,
            q,
            a: C64::new(a.0, a.1),
            b: C64::new(b.0, b.1),
            omega,
        };
        Manufactured {
            origin: grid.origin(),
            extent: grid.extent(),
            modes: vec![
                m(0.0, 0.0, (0.8, 0.3), (0.0, 0.1), 2.0),
                m(1.0, 0.0, (0.2, -0.1), (0.1, 0.05), 3.0),
                m(1.0, 1.0, (0.1, 0.25), (-0.1, 0.0), 1.5),
                m(0.0, 2.0, (-0.05, 0.1), (0.05, 0.05), 4.0),
            ],
        }
    }

    pub fn jet(&self, p: Point, t: f64) -> Jet {
        let pi = std::f64::consts::PI;
        let x = (p[0] - self.origin[0]) / self.extent[0];
        let y = (p[1] - self.origin[1]) / self.extent[1];
        let mut j = Jet {
            u: C64::new(0.0, 0.0),
            u_t: C64::new(0.0, 0.0),
            u_x: C64::new(0.0, 0.0),
            u_y: C64::new(0.0, 0.0),
            lap: C64::new(0.0, 0.0),
        };
        for m in &self.modes {
            let kx = m.p * pi / self.extent[0];
            let ky = m.q * pi / self.extent[1];
            let (sx, cx) = (m.p * pi * x).sin_cos();
            let (sy, cy) = (m.q * pi * y).sin_cos();
            let c = m.a + m.b * (m.omega * t).sin();
            let ct = m.b * (m.omega * (m.omega * t).cos());
            let phi = cx * cy;
            j.u += c * phi;
            j.u_t += ct * phi;
            j.u_x += c * (-kx * sx * cy);
            j.u_y += c * (-ky * cx * sy);
            j.lap += c * (-(kx * kx + ky * ky) * phi);
        }
        j
    }

    pub fn field(&self, grid: &Grid, t: f64) -> ComplexField {
        let mut f = ComplexField::from_fn(*grid, |p| self.jet(p, t).u);
        f.time = t;
        f
    }

    /// Smooth forcing fields with `G` tangential on the box boundary.
    pub fn forcing(&self) -> (VectorFn, VectorFn) {
        let (o, e) = (self.origin, self.extent);
        let pi = std::f64::consts::PI;
        let f: VectorFn = VectorFn::Custom(Arc::new(move |p: Point, t: f64| {
            let x = (p[0] - o[0]) / e[0];
            let y = (p[1] - o[1]) / e[1];
            [0.5 * (pi * y).cos() * (1.0 + 0.2 * t), 0.3 * (pi * x).sin()]
        }));
        let g: VectorFn = VectorFn::Custom(Arc::new(move |p: Point, _t: f64| {
            let x = (p[0] - o[0]) / e[0];
            let y = (p[1] - o[1]) / e[1];
            [0.4 * (pi * x).sin() * (pi * y).cos(), -0.3 * (pi * y).sin()]
        }));
        (f, g)
    }

    /// External fields with the source that makes `self` an exact solution.
    pub fn fields(&self, scaling: &EpsilonScaling, forced: bool) -> ExternalFields {
        let (f, g) = if forced {
            self.forcing()
        } else {
            (VectorFn::zero(), VectorFn::zero())
        };
        let me = self.clone();
        let s = *scaling;
        let (ff, gg) = (f.clone(), g.clone());
        let source = Source(Arc::new(move |p: Point, t: f64| {
            let j = me.jet(p, t);
            let fv = ff.eval(p, t);
            let gv = gg.eval(p, t);
            let i = C64::new(0.0, 1.0);
            let conv = (j.u_x * fv[0] + j.u_y * fv[1]) * s.k_eps;
            let rot = i * (j.u_x * gv[0] + j.u_y * gv[1]);
            let react = j.u * ((1.0 - j.u.norm_sqr()) / (s.eps * s.eps));
            C64::new(s.lambda_eps, 1.0) * j.u_t + conv + rot - j.lap - react
        }));
        ExternalFields {
            f,
            g,
            source: Some(source),
        }
    }
}
