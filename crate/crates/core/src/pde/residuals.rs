//! Pointwise residuals of the energy, Jacobian and mass conservation laws.
//!
//! For consecutive states `uⁿ`, `uⁿ⁺¹` the time derivatives of `e_ε`, `J` and
//! `(1 − |u|²)/2` are forward differences, `∂_t u = (uⁿ⁺¹ − uⁿ)/Δt`, and every
//! spatial term is evaluated at the midpoint state and time. With a source `S`
//! the laws read
//!
//! ```text
//! ∂_t e = −λ|u_t|² − k(F, p) + (G, V) + div p + (S, u_t)
//! ∂_t J + λ curl p = curl div(∇u⊗∇u) − k curl(F·∇u⊗∇u) − curl((iG) J) + curl((S, ∇u))
//! −∂_t((1 − |u|²)/2) + λ u×u_t + k(F, j) − (G, ∇(1 − |u|²)/2) = div j + (S, iu)
//! ```

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::grid::{EpsilonScaling, Grid};
use crate::ops::{cross, diff, dot, potential};
use crate::pde::fields::ExternalFields;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawResidual {
    /// L2 norm of each named term over the interior.
    pub terms: Vec<(String, f64)>,
    /// L2 norm of the signed sum of all terms (zero for an exact solution).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResiduals {
    pub t: f64,
    pub energy: LawResidual,
    pub jacobian: LawResidual,
    pub mass: LawResidual,
}

/// Root-mean-square of the per-step residuals over a window of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub steps: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub energy: LawResidual,
    pub jacobian: LawResidual,
    pub mass: LawResidual,
}

struct Interior {
    grid: Grid,
    collar: usize,
}

impl Interior {
    fn norm(&self, a: &Array2<f64>) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        let mut s = 0.0;
        for ((i, j), v) in a.indexed_iter() {
            if !self.grid.in_collar(i, j, self.collar) {
                s += v * v * h2;
            }
        }
        s.sqrt()
    }

    /// `terms` with signs; residual = Σ sign·term.
    fn law(&self, terms: Vec<(&str, f64, Array2<f64>)>) -> LawResidual {
        let mut total = Array2::zeros(self.grid.shape());
        let mut out = Vec::with_capacity(terms.len());
        for (name, sign, a) in &terms {
            total.scaled_add(*sign, a);
            out.push((name.to_string(), self.norm(a)));
        }
        LawResidual {
            terms: out,
            residual: self.norm(&total),
        }
    }
}

fn sample2(grid: &Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> (Array2<f64>, Array2<f64>) {
    let mut a = Array2::zeros(grid.shape());
    let mut b = Array2::zeros(grid.shape());
    for i in 0..grid.n1() {
        for j in 0..grid.n2() {
            let v = f(grid.node(i, j));
            a[[i, j]] = v[0];
            b[[i, j]] = v[1];
        }
    }
    (a, b)
}

fn nodal_energy(u: &ComplexField, eps: f64) -> Array2<f64> {
    let h = u.grid.h();
    let u1 = diff(&u.values, 0, h);
    let u2 = diff(&u.values, 1, h);
    Zip::from(&u.values)
        .and(&u1)
        .and(&u2)
        .map_collect(|&z, &a, &b| 0.5 * (a.norm_sqr() + b.norm_sqr()) + potential(z, eps))
}

fn nodal_jacobian(u: &ComplexField) -> Array2<f64> {
    let h = u.grid.h();
    let u1 = diff(&u.values, 0, h);
    let u2 = diff(&u.values, 1, h);
    Zip::from(&u1).and(&u2).map_collect(|&a, &b| cross(a, b))
}

/// Residuals of one step `prev → next`, excluding `collar` boundary rows.
pub fn step_residuals(
    prev: &ComplexField,
    next: &ComplexField,
    scaling: &EpsilonScaling,
    fields: &ExternalFields,
    collar: usize,
) -> Result<StepResiduals> {
    prev.same_grid(next)?;
    let dt = next.time - prev.time;
    if !(dt > 0.0) {
        return Err(Error::SolverFailure("residuals need increasing times".into()));
    }
    let grid = prev.grid;
    let h = grid.h();
    let eps = scaling.eps;
    let lam = scaling.lambda_eps;
    let k = scaling.k_eps;
    let tm = 0.5 * (prev.time + next.time);
    let ut = Zip::from(&next.values)
        .and(&prev.values)
        .map_collect(|&a, &b| (a - b) / dt);
    let um = Zip::from(&next.values)
        .and(&prev.values)
        .map_collect(|&a, &b| 0.5 * (a + b));
    let u1 = diff(&um, 0, h);
    let u2 = diff(&um, 1, h);

    let (fx, fy) = sample2(&grid, |p| fields.f.eval(p, tm));
    let (gx, gy) = sample2(&grid, |p| fields.g.eval(p, tm));
    let src: Array2<C64> = match &fields.source {
        Some(s) => Array2::from_shape_fn(grid.shape(), |(i, j)| (s.0)(grid.node(i, j), tm)),
        None => Array2::zeros(grid.shape()),
    };

    let map2 = |f: &dyn Fn(C64, C64) -> f64, a: &Array2<C64>, b: &Array2<C64>| {
        Zip::from(a).and(b).map_collect(|&x, &y| f(x, y))
    };
    let px = map2(&dot, &ut, &u1);
    let py = map2(&dot, &ut, &u2);
    let vx = map2(&cross, &ut, &u1);
    let vy = map2(&cross, &ut, &u2);
    let jx = map2(&cross, &um, &u1);
    let jy = map2(&cross, &um, &u2);
    let txx = u1.mapv(|a| a.norm_sqr());
    let tyy = u2.mapv(|a| a.norm_sqr());
    let txy = map2(&dot, &u1, &u2);
    let jac = map2(&cross, &u1, &u2);
    let div = |ax: &Array2<f64>, ay: &Array2<f64>| diff(ax, 0, h) + diff(ay, 1, h);
    let curl = |ax: &Array2<f64>, ay: &Array2<f64>| diff(ay, 0, h) - diff(ax, 1, h);
    let inner = Interior { grid, collar };

    // Energy.
    let de = (nodal_energy(next, eps) - nodal_energy(prev, eps)) / dt;
    let ut2 = ut.mapv(|z| lam * z.norm_sqr());
    let fp = k * (&fx * &px + &fy * &py);
    let gv = &gx * &vx + &gy * &vy;
    let divp = div(&px, &py);
    let sut = map2(&dot, &src, &ut);
    let energy = inner.law(vec![
        ("dt_e", 1.0, de),
        ("lambda_ut2", 1.0, ut2),
        ("k_F_p", 1.0, fp),
        ("G_V", -1.0, gv),
        ("div_p", -1.0, divp),
        ("S_ut", -1.0, sut),
    ]);

    // Jacobian.
    let dj = (nodal_jacobian(next) - nodal_jacobian(prev)) / dt;
    let lcp = curl(&px, &py) * lam;
    // (div T)_k = ∂_j T_jk.
    let dtx = diff(&txx, 0, h) + diff(&txy, 1, h);
    let dty = diff(&txy, 0, h) + diff(&tyy, 1, h);
    let cdt = curl(&dtx, &dty);
    let ftx = &fx * &txx + &fy * &txy;
    let fty = &fx * &txy + &fy * &tyy;
    let cft = curl(&ftx, &fty) * k;
    let igx = -&gy * &jac;
    let igy = &gx * &jac;
    let cig = curl(&igx, &igy);
    let sgx = map2(&dot, &src, &u1);
    let sgy = map2(&dot, &src, &u2);
    let csg = curl(&sgx, &sgy);
    let jacobian = inner.law(vec![
        ("dt_J", 1.0, dj),
        ("lambda_curl_p", 1.0, lcp),
        ("curl_div_T", -1.0, cdt),
        ("k_curl_FT", 1.0, cft),
        ("curl_iGJ", 1.0, cig),
        ("curl_S_grad", -1.0, csg),
    ]);

    // Mass.
    let dm = Zip::from(&next.values)
        .and(&prev.values)
        .map_collect(|&a, &b| -0.5 * (b.norm_sqr() - a.norm_sqr()) / dt);
    let lux = map2(&cross, &um, &ut) * lam;
    let fj = k * (&fx * &jx + &fy * &jy);
    let m = um.mapv(|z| 0.5 * (1.0 - z.norm_sqr()));
    let gm = &gx * &diff(&m, 0, h) + &gy * &diff(&m, 1, h);
    let divj = div(&jx, &jy);
    let siu = Zip::from(&src)
        .and(&um)
        .map_collect(|&s, &z| dot(s, C64::new(0.0, 1.0) * z));
    // −∂_t m with m = (1 − |u|²)/2 equals ∂_t|u|²/2, stored in `dm`.
    let mass = inner.law(vec![
        ("dt_mass", 1.0, dm),
        ("lambda_u_x_ut", 1.0, lux),
        ("k_F_j", 1.0, fj),
        ("G_grad_mass", -1.0, gm),
        ("div_j", -1.0, divj),
        ("S_iu", -1.0, siu),
    ]);

    Ok(StepResiduals {
        t: tm,
        energy,
        jacobian,
        mass,
    })
}

fn rms(laws: &[&LawResidual]) -> LawResidual {
    let n = laws.len() as f64;
    let terms = laws[0]
        .terms
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let s: f64 = laws.iter().map(|l| l.terms[k].1.powi(2)).sum();
            (name.clone(), (s / n).sqrt())
        })
        .collect();
    let s: f64 = laws.iter().map(|l| l.residual.powi(2)).sum();
    LawResidual {
        terms,
        residual: (s / n).sqrt(),
    }
}

/// Aggregates [`step_residuals`] over consecutive states.
pub fn conservation_residuals(
    window: &[ComplexField],
    scaling: &EpsilonScaling,
    fields: &ExternalFields,
    collar: usize,
) -> Result<ResidualReport> {
    if window.len() < 2 {
        return Err(Error::SolverFailure("need at least two states".into()));
    }
    let steps: Vec<StepResiduals> = window
        .windows(2)
        .map(|w| step_residuals(&w[0], &w[1], scaling, fields, collar))
        .collect::<Result<_>>()?;
    Ok(aggregate(&steps, window[0].time, window[window.len() - 1].time))
}

pub fn aggregate(steps: &[StepResiduals], t_start: f64, t_end: f64) -> ResidualReport {
    let e: Vec<_> = steps.iter().map(|s| &s.energy).collect();
    let j: Vec<_> = steps.iter().map(|s| &s.jacobian).collect();
    let m: Vec<_> = steps.iter().map(|s| &s.mass).collect();
    ResidualReport {
        steps: steps.len(),
        t_start,
        t_end,
        energy: rms(&e),
        jacobian: rms(&j),
        mass: rms(&m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_unit_state_has_zero_residuals() {
        let g = Grid::unit_square(20).unwrap();
        let s = EpsilonScaling::new(0.1, 1.0).unwrap();
        let a = ComplexField::constant(g, C64::new(1.0, 0.0));
        let mut b = a.clone();
        b.time = 0.01;
        let r = conservation_residuals(&[a, b], &s, &ExternalFields::none(), 2).unwrap();
        assert_eq!(r.energy.residual, 0.0);
        assert_eq!(r.jacobian.residual, 0.0);
        assert_eq!(r.mass.residual, 0.0);
        assert_eq!(r.energy.terms.len(), 6);
    }
}
