//! First-order IMEX step: implicit Laplacian, explicit reaction and convection.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::grid::{EpsilonScaling, Grid};
use crate::ops::total_energy;
use crate::pde::bc::BoundaryCondition;
use crate::pde::fields::{ExternalFields, VectorFn};
use crate::poisson::{SolverKind, SpectralSolver};

#[derive(Debug, Clone)]
pub struct PdeState {
    pub u: ComplexField,
    pub t: f64,
    pub step: usize,
    /// `(uⁿ⁺¹ − uⁿ)/Δt` from the step that produced this state.
    pub u_t: Option<ComplexField>,
    /// Discrete energy of `u`, cached by energy-checked steppers.
    pub energy: Option<f64>,
}

impl PdeState {
    pub fn new(mut u: ComplexField, t: f64) -> Self {
        u.time = t;
        PdeState {
            u,
            t,
            step: 0,
            u_t: None,
            energy: None,
        }
    }
}

/// Default step: `min(ε²/4, 0.8 λ_ε ε²)`, further limited by `0.25 h / v` for
/// the convective speed `v = max(k_ε|F| + |G|)`.
///
/// `λ_ε ε²` is the energy-stability bound `2λ_ε ε²/(3M² − 1)` of the explicit
/// reaction at `M = max|u| = 1`; the implicit Laplacian imposes no `h` limit.
pub fn default_dt(scaling: &EpsilonScaling, grid: &Grid, speed: f64) -> f64 {
    let e2 = scaling.eps * scaling.eps;
    let mut dt = (0.25 * e2).min(0.8 * scaling.lambda_eps * e2);
    if speed > 0.0 {
        dt = dt.min(0.25 * grid.h() / speed);
    }
    dt
}

/// Largest stable step from the energy argument for a given `max|u|`.
pub fn energy_stable_dt(scaling: &EpsilonScaling, max_modulus: f64) -> f64 {
    let m2 = max_modulus * max_modulus;
    let denom = (3.0 * m2 - 1.0).max(1e-12);
    2.0 * scaling.lambda_eps * scaling.eps * scaling.eps / denom
}

/// Reusable stepper for one run.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub grid: Grid,
    pub scaling: EpsilonScaling,
    pub dt: f64,
    pub bc: BoundaryCondition,
    pub fields: ExternalFields,
    /// Relative energy increase tolerated per step when unforced; `None` disables the check.
    pub energy_guard: Option<f64>,
    solver: SpectralSolver,
    /// `1/(λ_ε + i)`.
    coef: C64,
    static_f: Option<[Array2<f64>; 2]>,
    static_g: Option<[Array2<f64>; 2]>,
}

pub const DEFAULT_ENERGY_GUARD: f64 = 1e-8;

fn sample(v: &VectorFn, grid: &Grid, t: f64) -> Option<[Array2<f64>; 2]> {
    if v.is_zero() {
        return None;
    }
    let mut a = Array2::zeros(grid.shape());
    let mut b = Array2::zeros(grid.shape());
    for i in 0..grid.n1() {
        for j in 0..grid.n2() {
            let w = v.eval(grid.node(i, j), t);
            a[[i, j]] = w[0];
            b[[i, j]] = w[1];
        }
    }
    Some([a, b])
}

/// Central differences with mirror ghost nodes, so the normal derivative is
/// zero on the boundary rows (consistent with the Neumann condition).
fn reflected_gradient(u: &Array2<C64>, h: f64) -> (Array2<C64>, Array2<C64>) {
    let (n1, n2) = u.dim();
    let s = 0.5 / h;
    let dx = Array2::from_shape_fn((n1, n2), |(i, j)| {
        if i == 0 || i + 1 == n1 {
            C64::new(0.0, 0.0)
        } else {
            (u[[i + 1, j]] - u[[i - 1, j]]) * s
        }
    });
    let dy = Array2::from_shape_fn((n1, n2), |(i, j)| {
        if j == 0 || j + 1 == n2 {
            C64::new(0.0, 0.0)
        } else {
            (u[[i, j + 1]] - u[[i, j - 1]]) * s
        }
    });
    (dx, dy)
}

impl Stepper {
    pub fn new(
        grid: Grid,
        scaling: EpsilonScaling,
        dt: f64,
        bc: BoundaryCondition,
        fields: ExternalFields,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config("dt", format!("need dt > 0, got {dt}")));
        }
        bc.validate(&grid)?;
        let kind = if bc.is_neumann() {
            SolverKind::Neumann
        } else {
            SolverKind::Dirichlet
        };
        let lam = scaling.lambda_eps;
        let coef = C64::new(lam, -1.0) / (1.0 + lam * lam);
        let static_f = (!fields.f.is_time_dependent())
            .then(|| sample(&fields.f, &grid, 0.0))
            .flatten();
        let static_g = (!fields.g.is_time_dependent())
            .then(|| sample(&fields.g, &grid, 0.0))
            .flatten();
        Ok(Stepper {
            grid,
            scaling,
            dt,
            bc,
            fields,
            energy_guard: Some(DEFAULT_ENERGY_GUARD),
            solver: SpectralSolver::new(grid, kind),
            coef,
            static_f,
            static_g,
        })
    }

    /// Explicit part `ε⁻²(1 − |u|²)u − k_ε(F·∇)u − (G·∇)(iu) + S` at time `t`.
    pub fn explicit_terms(&self, u: &Array2<C64>, t: f64) -> Array2<C64> {
        let e2 = 1.0 / (self.scaling.eps * self.scaling.eps);
        let mut n = u.mapv(|z| z * ((1.0 - z.norm_sqr()) * e2));
        let needs_grad = !self.fields.f.is_zero() || !self.fields.g.is_zero();
        if needs_grad {
            let (u1, u2) = reflected_gradient(u, self.grid.h());
            let tf;
            let f = match &self.static_f {
                Some(f) => Some(f),
                None => {
                    tf = sample(&self.fields.f, &self.grid, t);
                    tf.as_ref()
                }
            };
            let tg;
            let g = match &self.static_g {
                Some(g) => Some(g),
                None => {
                    tg = sample(&self.fields.g, &self.grid, t);
                    tg.as_ref()
                }
            };
            let k = self.scaling.k_eps;
            if let Some([fx, fy]) = f {
                Zip::from(&mut n)
                    .and(&u1)
                    .and(&u2)
                    .and(fx)
                    .and(fy)
                    .for_each(|o, &a, &b, &x, &y| *o -= (a * x + b * y) * k);
            }
            if let Some([gx, gy]) = g {
                let i = C64::new(0.0, 1.0);
                Zip::from(&mut n)
                    .and(&u1)
                    .and(&u2)
                    .and(gx)
                    .and(gy)
                    .for_each(|o, &a, &b, &x, &y| *o -= i * (a * x + b * y));
            }
        }
        if let Some(src) = &self.fields.source {
            for ((i, j), o) in n.indexed_iter_mut() {
                *o += (src.0)(self.grid.node(i, j), t);
            }
        }
        n
    }

    pub fn step(&self, state: &PdeState) -> Result<PdeState> {
        let dt = self.dt;
        let alpha = self.coef * dt;
        let u = &state.u.values;
        let n = self.explicit_terms(u, state.t);
        let mut rhs = u.clone();
        Zip::from(&mut rhs).and(&n).for_each(|r, &v| *r += alpha * v);
        let new_values = match &self.bc {
            BoundaryCondition::Neumann => {
                let mut re = rhs.mapv(|z| z.re);
                let mut im = rhs.mapv(|z| z.im);
                self.solver.solve_shifted(&mut re, &mut im, alpha);
                Zip::from(&re).and(&im).map_collect(|&a, &b| C64::new(a, b))
            }
            BoundaryCondition::Dirichlet { g } => {
                let (n1, n2) = self.grid.shape();
                let s = alpha / (self.grid.h() * self.grid.h());
                let mut inner = Array2::from_shape_fn((n1 - 2, n2 - 2), |(i, j)| rhs[[i + 1, j + 1]]);
                for j in 1..n2 - 1 {
                    inner[[0, j - 1]] += s * g[[0, j]];
                    inner[[n1 - 3, j - 1]] += s * g[[n1 - 1, j]];
                }
                for i in 1..n1 - 1 {
                    inner[[i - 1, 0]] += s * g[[i, 0]];
                    inner[[i - 1, n2 - 3]] += s * g[[i, n2 - 1]];
                }
                let mut re = inner.mapv(|z| z.re);
                let mut im = inner.mapv(|z| z.im);
                self.solver.solve_shifted(&mut re, &mut im, alpha);
                let mut out = g.clone();
                for i in 0..n1 - 2 {
                    for j in 0..n2 - 2 {
                        out[[i + 1, j + 1]] = C64::new(re[[i, j]], im[[i, j]]);
                    }
                }
                out
            }
        };
        let t = state.t + dt;
        let mut next = ComplexField {
            grid: self.grid,
            values: new_values,
            time: t,
        };
        self.bc.pin(&mut next);
        next.check_finite("state after step")?;
        let mut energy = None;
        if let (Some(guard), true) = (self.energy_guard, self.fields.is_unforced()) {
            let e0 = state
                .energy
                .unwrap_or_else(|| total_energy(&state.u, &self.scaling));
            let e1 = total_energy(&next, &self.scaling);
            let rel = (e1 - e0) / e0.abs().max(1.0);
            if rel > guard {
                return Err(Error::StabilityViolation {
                    step: state.step + 1,
                    rel_jump: rel,
                });
            }
            energy = Some(e1);
        }
        let u_t = next.backward_difference(&state.u)?;
        Ok(PdeState {
            u: next,
            t,
            step: state.step + 1,
            u_t: Some(u_t),
            energy,
        })
    }
}

/// One step with a freshly built [`Stepper`]; prefer reusing a stepper in loops.
pub fn step(
    state: &PdeState,
    dt: f64,
    scaling: &EpsilonScaling,
    bc: &BoundaryCondition,
    fields: &ExternalFields,
) -> Result<PdeState> {
    Stepper::new(state.u.grid, *scaling, dt, bc.clone(), fields.clone())?.step(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, eps: f64) -> (Grid, EpsilonScaling) {
        (Grid::unit_square(n).unwrap(), EpsilonScaling::new(eps, 1.0).unwrap())
    }

    #[test]
    fn constant_states_are_fixed_points() {
        let (g, s) = setup(24, 0.1);
        let dt = default_dt(&s, &g, 0.0);
        for c in [C64::new(1.0, 0.0), C64::from_polar(1.0, 1.234)] {
            let st = Stepper::new(g, s, dt, BoundaryCondition::Neumann, ExternalFields::none()).unwrap();
            let mut state = PdeState::new(ComplexField::constant(g, c), 0.0);
            for _ in 0..20 {
                state = st.step(&state).unwrap();
            }
            let err = state.u.values.iter().fold(0.0f64, |m, z| m.max((z - c).norm()));
            assert!(err < 1e-13, "{err}");
        }
    }

    #[test]
    fn spatially_constant_modulus_relaxes_like_the_scalar_ode() {
        // λ_ε ρ' = (1 − ρ²)ρ/ε² would hold if u stayed real; the i-part of the
        // mixed flow rotates the phase, so compare moduli: for u = ρ e^{iφ},
        // (λ + i)(ρ' + iρφ') e^{iφ} = ε⁻²(1 − ρ²)ρ e^{iφ} gives
        // ρ' = λ ε⁻²(1 − ρ²)ρ/(1 + λ²).
        let (g, s) = setup(20, 0.2);
        let dt = 1e-4;
        let st = Stepper::new(g, s, dt, BoundaryCondition::Neumann, ExternalFields::none()).unwrap();
        let rho0 = 0.9;
        let mut state = PdeState::new(ComplexField::constant(g, C64::new(rho0, 0.0)), 0.0);
        let steps = 200;
        for _ in 0..steps {
            state = st.step(&state).unwrap();
        }
        let lam = s.lambda_eps;
        let rate = lam / (s.eps * s.eps * (1.0 + lam * lam));
        // Logistic-type closed form of ρ' = rate (1 − ρ²) ρ.
        let t = dt * steps as f64;
        let r2 = rho0 * rho0;
        let exact = (r2 / (r2 + (1.0 - r2) * (-2.0 * rate * t).exp())).sqrt();
        let got = state.u.values[[5, 5]].norm();
        assert!(((got - rho0) / (exact - rho0) - 1.0).abs() < 0.01, "{got} vs {exact}");
        let spread = state.u.values.iter().fold(0.0f64, |m, z| m.max((z - state.u.values[[0, 0]]).norm()));
        assert!(spread < 1e-12, "{spread}");
    }

    #[test]
    fn dirichlet_boundary_stays_pinned() {
        use crate::pde::bc::{BoundarySpec, PointCharge};
        let (g, s) = setup(33, 0.1);
        let charges = [PointCharge {
            position: [0.5, 0.5],
            degree: 1,
        }];
        let bc = BoundaryCondition::from_spec(
            &BoundarySpec::Dirichlet {
                phase_offset: 0.0,
                charges: None,
            },
            &g,
            &charges,
        )
        .unwrap();
        let st = Stepper::new(g, s, 1e-3, bc.clone(), ExternalFields::none()).unwrap();
        let mut state = PdeState::new(ComplexField::constant(g, C64::new(0.5, 0.0)), 0.0);
        bc.pin(&mut state.u);
        for _ in 0..5 {
            state = st.step(&state).unwrap();
        }
        let BoundaryCondition::Dirichlet { g: gv } = &bc else {
            unreachable!()
        };
        for (i, j) in g.boundary_loop() {
            assert_eq!(state.u.values[[i, j]], gv[[i, j]]);
        }
    }

    #[test]
    fn dirichlet_runs_conserve_the_degree() {
        use crate::initial::{well_prepared, RadialProfile};
        use crate::pde::bc::BoundarySpec;
        use crate::track::VortexConfiguration;
        let (g, s) = setup(65, 0.05);
        let c = VortexConfiguration::new(vec![[0.5, 0.52]], vec![1]).unwrap();
        let spec = BoundarySpec::Dirichlet { phase_offset: 0.0, charges: None };
        let bc = BoundaryCondition::from_spec(&spec, &g, &c.charges()).unwrap();
        let profile = RadialProfile::solve(20.0, 20_000).unwrap();
        let u = well_prepared(&c, &s, &g, &bc, &profile).unwrap();
        let st = Stepper::new(g, s, default_dt(&s, &g, 0.0), bc, ExternalFields::none()).unwrap();
        let mass = |u: &ComplexField| crate::ops::jacobian(u).integral();
        let m0 = mass(&u);
        assert!((m0 / std::f64::consts::PI - 1.0).abs() < 0.05, "{m0}");
        let mut state = PdeState::new(u, 0.0);
        for _ in 0..50 {
            state = st.step(&state).unwrap();
            assert!((mass(&state.u) - m0).abs() < 1e-8);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn unforced_steps_never_raise_the_energy(
            eps in 0.08f64..0.3,
            lambda0 in 0.2f64..3.0,
            coeffs in proptest::collection::vec(-0.3f64..0.3, 8),
        ) {
            let g = Grid::unit_square(24).unwrap();
            let s = EpsilonScaling::new(eps, lambda0).unwrap();
            let u = ComplexField::from_fn(g, |p| {
                let (x, y) = (p[0] * std::f64::consts::PI, p[1] * std::f64::consts::PI);
                let modes = [x.cos(), y.cos(), (2.0 * x).cos() * y.cos(), (x + 2.0 * y).sin()];
                let mut z = C64::new(1.0, 0.0);
                for (k, m) in modes.iter().enumerate() {
                    z += C64::new(coeffs[2 * k], coeffs[2 * k + 1]) * m;
                }
                z
            });
            let st = Stepper::new(g, s, default_dt(&s, &g, 0.0), BoundaryCondition::Neumann, ExternalFields::none()).unwrap();
            let mut state = PdeState::new(u, 0.0);
            let mut e = total_energy(&state.u, &s);
            for _ in 0..20 {
                state = st.step(&state).unwrap();
                let e1 = total_energy(&state.u, &s);
                proptest::prop_assert!(e1 <= e + 1e-10, "{} > {}", e1, e);
                e = e1;
            }
        }
    }
}
