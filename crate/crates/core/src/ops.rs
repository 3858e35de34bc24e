//! Discrete differential quantities of a complex field.
//!
//! Complex numbers double as planar vectors: `cross(a, b) = a¹b² − a²b¹` and
//! `dot(a, b) = a¹b¹ + a²b²`. Nodal derivatives are central in the interior
//! and one-sided second order on the boundary rows.

use std::ops::{Add, Mul, Sub};

use ndarray::{Array2, Zip};

use crate::error::Result;
use crate::field::{ComplexField, Location, ScalarField, TensorField, VectorField, C64};
use crate::grid::{EpsilonScaling, Grid, Point};

#[inline]
pub fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

#[inline]
pub fn dot(a: C64, b: C64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Multiplication by `i`, i.e. rotation of a planar vector by a quarter turn.
#[inline]
pub fn rot90(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Second-order first derivative along `axis` (0 = x, 1 = y).
pub fn diff<T>(a: &Array2<T>, axis: usize, h: f64) -> Array2<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let (n1, n2) = a.dim();
    let n = if axis == 0 { n1 } else { n2 };
    let inv2h = 0.5 / h;
    let at = |i: usize, j: usize, k: usize| -> T {
        if axis == 0 {
            a[[k, j]]
        } else {
            a[[i, k]]
        }
    };
    Array2::from_shape_fn((n1, n2), |(i, j)| {
        let k = if axis == 0 { i } else { j };
        if k == 0 {
            ((at(i, j, 1) - at(i, j, 0)) * 4.0 - (at(i, j, 2) - at(i, j, 0))) * inv2h
        } else if k + 1 == n {
            ((at(i, j, n - 1) - at(i, j, n - 2)) * 4.0 - (at(i, j, n - 1) - at(i, j, n - 3))) * inv2h
        } else {
            (at(i, j, k + 1) - at(i, j, k - 1)) * inv2h
        }
    })
}

/// `(∂₁u, ∂₂u)`.
pub fn gradient(u: &ComplexField) -> (Array2<C64>, Array2<C64>) {
    let h = u.grid.h();
    (diff(&u.values, 0, h), diff(&u.values, 1, h))
}

/// Five-point Laplacian at interior nodes; boundary entries are zero.
pub fn laplacian<T>(a: &Array2<T>, h: f64) -> Array2<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let (n1, n2) = a.dim();
    let s = 1.0 / (h * h);
    Array2::from_shape_fn((n1, n2), |(i, j)| {
        if i == 0 || j == 0 || i + 1 == n1 || j + 1 == n2 {
            T::default()
        } else {
            (a[[i + 1, j]] + a[[i - 1, j]] + a[[i, j + 1]] + a[[i, j - 1]] - a[[i, j]] * 4.0) * s
        }
    })
}

/// `j = (u × ∂₁u, u × ∂₂u)`.
pub fn current(u: &ComplexField) -> VectorField {
    let (u1, u2) = gradient(u);
    VectorField {
        grid: u.grid,
        x: Zip::from(&u.values).and(&u1).map_collect(|&a, &b| cross(a, b)),
        y: Zip::from(&u.values).and(&u2).map_collect(|&a, &b| cross(a, b)),
    }
}

/// Cell-centered Jacobian: half the circulation of the nodal current around
/// each cell (trapezoidal edges) divided by the cell area. Summing over all
/// cells telescopes to half the boundary circulation.
pub fn jacobian(u: &ComplexField) -> ScalarField {
    jacobian_from_current(&current(u))
}

pub fn jacobian_from_current(j: &VectorField) -> ScalarField {
    let g = j.grid;
    let (n1, n2) = g.shape();
    let s = 0.25 / g.h();
    let jx = &j.x;
    let jy = &j.y;
    let values = Array2::from_shape_fn((n1 - 1, n2 - 1), |(i, k)| {
        let bottom = jx[[i, k]] + jx[[i + 1, k]];
        let right = jy[[i + 1, k]] + jy[[i + 1, k + 1]];
        let top = jx[[i, k + 1]] + jx[[i + 1, k + 1]];
        let left = jy[[i, k]] + jy[[i, k + 1]];
        s * (bottom + right - top - left)
    });
    ScalarField::cells(g, values)
}

/// Counter-clockwise circulation of a nodal vector field along the grid
/// boundary, trapezoidal on each edge.
pub fn boundary_circulation(v: &VectorField) -> f64 {
    let g = v.grid;
    let (n1, n2) = g.shape();
    let h = g.h();
    let mut c = 0.0;
    for i in 0..n1 - 1 {
        c += 0.5 * h * (v.x[[i, 0]] + v.x[[i + 1, 0]]);
        c -= 0.5 * h * (v.x[[i, n2 - 1]] + v.x[[i + 1, n2 - 1]]);
    }
    for k in 0..n2 - 1 {
        c += 0.5 * h * (v.y[[n1 - 1, k]] + v.y[[n1 - 1, k + 1]]);
        c -= 0.5 * h * (v.y[[0, k]] + v.y[[0, k + 1]]);
    }
    c
}

/// Counter-clockwise circulation along the rectangle of nodes
/// `[i0, i1] × [k0, k1]`.
pub fn loop_circulation(v: &VectorField, i0: usize, i1: usize, k0: usize, k1: usize) -> f64 {
    let h = v.grid.h();
    let mut c = 0.0;
    for i in i0..i1 {
        c += 0.5 * h * (v.x[[i, k0]] + v.x[[i + 1, k0]]);
        c -= 0.5 * h * (v.x[[i, k1]] + v.x[[i + 1, k1]]);
    }
    for k in k0..k1 {
        c += 0.5 * h * (v.y[[i1, k]] + v.y[[i1, k + 1]]);
        c -= 0.5 * h * (v.y[[i0, k]] + v.y[[i0, k + 1]]);
    }
    c
}

/// Nodal Jacobian `∂₁u × ∂₂u`.
pub fn jacobian_nodal(u: &ComplexField) -> ScalarField {
    let (u1, u2) = gradient(u);
    ScalarField::nodes(
        u.grid,
        Zip::from(&u1).and(&u2).map_collect(|&a, &b| cross(a, b)),
    )
}

/// Velocity of the Jacobian, `V = ∂_t u × ∇u`, so that `∂_t J = curl V`.
pub fn jacobian_velocity(u: &ComplexField, u_t: &ComplexField) -> Result<VectorField> {
    u.same_grid(u_t)?;
    let (u1, u2) = gradient(u);
    Ok(VectorField {
        grid: u.grid,
        x: Zip::from(&u_t.values).and(&u1).map_collect(|&a, &b| cross(a, b)),
        y: Zip::from(&u_t.values).and(&u2).map_collect(|&a, &b| cross(a, b)),
    })
}

/// `p = (∂_t u · ∂₁u, ∂_t u · ∂₂u)`.
pub fn momentum(u: &ComplexField, u_t: &ComplexField) -> Result<VectorField> {
    u.same_grid(u_t)?;
    let (u1, u2) = gradient(u);
    Ok(VectorField {
        grid: u.grid,
        x: Zip::from(&u_t.values).and(&u1).map_collect(|&a, &b| dot(a, b)),
        y: Zip::from(&u_t.values).and(&u2).map_collect(|&a, &b| dot(a, b)),
    })
}

/// `(∇u ⊗ ∇u)_{jk} = ∂_j u · ∂_k u`; the off-diagonal entries share storage
/// content so the tensor is exactly symmetric.
pub fn stress(u: &ComplexField) -> TensorField {
    let (u1, u2) = gradient(u);
    let off = Zip::from(&u1).and(&u2).map_collect(|&a, &b| dot(a, b));
    TensorField {
        grid: u.grid,
        xx: u1.mapv(|a| a.norm_sqr()),
        xy: off.clone(),
        yx: off,
        yy: u2.mapv(|a| a.norm_sqr()),
    }
}

#[inline]
pub fn potential(z: C64, eps: f64) -> f64 {
    let m = 1.0 - z.norm_sqr();
    m * m / (4.0 * eps * eps)
}

/// Nodal `e_ε = ½|∇u|² + (1 − |u|²)²/(4ε²)`.
pub fn energy_density(u: &ComplexField, scaling: &EpsilonScaling) -> ScalarField {
    let (u1, u2) = gradient(u);
    let eps = scaling.eps;
    let values = Zip::from(&u.values)
        .and(&u1)
        .and(&u2)
        .map_collect(|&z, &a, &b| 0.5 * (a.norm_sqr() + b.norm_sqr()) + potential(z, eps));
    ScalarField::nodes(u.grid, values)
}

/// Discrete Ginzburg-Landau energy.
///
/// The gradient part uses edge differences weighted by the trapezoidal weight
/// across the edge, which is exactly the quadratic form of the reflected
/// five-point Laplacian used by the time stepper; the potential part is
/// trapezoidal. Both are second-order approximations of `∫ e_ε`.
pub fn total_energy(u: &ComplexField, scaling: &EpsilonScaling) -> f64 {
    let g = u.grid;
    let (n1, n2) = g.shape();
    let w = |k: usize, n: usize| if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
    let v = &u.values;
    let mut grad = 0.0;
    for i in 0..n1 {
        for k in 0..n2 {
            if i + 1 < n1 {
                grad += w(k, n2) * (v[[i + 1, k]] - v[[i, k]]).norm_sqr();
            }
            if k + 1 < n2 {
                grad += w(i, n1) * (v[[i, k + 1]] - v[[i, k]]).norm_sqr();
            }
        }
    }
    let mut pot = 0.0;
    for ((i, k), z) in v.indexed_iter() {
        pot += g.trapezoid_weight(i, k) * potential(*z, scaling.eps);
    }
    0.5 * grad + pot
}

/// Nodal divergence of a vector field.
pub fn divergence(v: &VectorField) -> ScalarField {
    let h = v.grid.h();
    let a = diff(&v.x, 0, h);
    let b = diff(&v.y, 1, h);
    ScalarField::nodes(v.grid, a + b)
}

/// Nodal scalar curl `−∂₂v¹ + ∂₁v²`.
pub fn curl(v: &VectorField) -> ScalarField {
    let h = v.grid.h();
    let a = diff(&v.y, 0, h);
    let b = diff(&v.x, 1, h);
    ScalarField::nodes(v.grid, a - b)
}

/// Integration region for pairings.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Whole,
    /// Drop nodes (or cells) within `width` grid lines of the boundary.
    Interior { width: usize },
    Ball { center: Point, radius: f64 },
    /// Everything outside the union of balls of a common radius.
    OutsideBalls { centers: Vec<Point>, radius: f64 },
}

impl Region {
    fn weight(&self, f: &ScalarFieldGeometry, i: usize, j: usize) -> f64 {
        let p = f.point(i, j);
        let inside = match self {
            Region::Whole => true,
            Region::Interior { width } => match f.location {
                Location::Node => !f.grid.in_collar(i, j, *width),
                Location::Cell => {
                    let (n1, n2) = f.grid.shape();
                    i >= *width && j >= *width && i + 1 + width < n1 && j + 1 + width < n2
                }
            },
            Region::Ball { center, radius } => dist(p, *center) <= *radius,
            Region::OutsideBalls { centers, radius } => {
                centers.iter().all(|c| dist(p, *c) > *radius)
            }
        };
        if !inside {
            return 0.0;
        }
        match f.location {
            Location::Node => f.grid.trapezoid_weight(i, j),
            Location::Cell => f.grid.h() * f.grid.h(),
        }
    }
}

struct ScalarFieldGeometry {
    grid: Grid,
    location: Location,
}

impl ScalarFieldGeometry {
    fn point(&self, i: usize, j: usize) -> Point {
        match self.location {
            Location::Node => self.grid.node(i, j),
            Location::Cell => self.grid.cell_center(i, j),
        }
    }
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// A quantity that can be paired with a test function.
pub enum Quantity<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a VectorField),
}

/// Test functions matching [`Quantity`]: scalar for scalar fields,
/// vector-valued (dotted in) for vector fields.
pub enum TestFn<'a> {
    Scalar(&'a dyn Fn(Point) -> f64),
    Vector(&'a dyn Fn(Point) -> [f64; 2]),
}

/// Trapezoidal `∫_region q·φ`. Mismatched kinds pair to zero.
pub fn pair_with_test(q: Quantity<'_>, phi: TestFn<'_>, region: &Region) -> f64 {
    match (q, phi) {
        (Quantity::Scalar(s), TestFn::Scalar(f)) => pair_scalar(s, f, region),
        (Quantity::Vector(v), TestFn::Vector(w)) => pair_vector(v, w, region),
        _ => 0.0,
    }
}

pub fn pair_scalar(q: &ScalarField, phi: impl Fn(Point) -> f64, region: &Region) -> f64 {
    let geo = ScalarFieldGeometry {
        grid: q.grid,
        location: q.location,
    };
    let mut s = 0.0;
    for ((i, j), v) in q.values.indexed_iter() {
        let w = region.weight(&geo, i, j);
        if w != 0.0 {
            s += w * v * phi(geo.point(i, j));
        }
    }
    s
}

pub fn pair_vector(q: &VectorField, phi: impl Fn(Point) -> [f64; 2], region: &Region) -> f64 {
    let geo = ScalarFieldGeometry {
        grid: q.grid,
        location: Location::Node,
    };
    let mut s = 0.0;
    for i in 0..q.grid.n1() {
        for j in 0..q.grid.n2() {
            let w = region.weight(&geo, i, j);
            if w != 0.0 {
                let f = phi(q.grid.node(i, j));
                s += w * (q.x[[i, j]] * f[0] + q.y[[i, j]] * f[1]);
            }
        }
    }
    s
}

/// `∫_region φ T` for a tensor field and scalar test function, as a 2×2 matrix.
pub fn pair_tensor(q: &TensorField, phi: impl Fn(Point) -> f64, region: &Region) -> [[f64; 2]; 2] {
    let geo = ScalarFieldGeometry {
        grid: q.grid,
        location: Location::Node,
    };
    let mut s = [[0.0; 2]; 2];
    for i in 0..q.grid.n1() {
        for j in 0..q.grid.n2() {
            let w = region.weight(&geo, i, j);
            if w != 0.0 {
                let f = w * phi(q.grid.node(i, j));
                let t = q.at(i, j);
                for a in 0..2 {
                    for b in 0..2 {
                        s[a][b] += f * t[a][b];
                    }
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::unit_square(n).unwrap()
    }

    #[test]
    fn constant_field_has_no_current_or_jacobian() {
        let u = ComplexField::constant(grid(20), C64::new(0.3, -0.8));
        assert_eq!(current(&u).max_norm(), 0.0);
        assert_eq!(jacobian(&u).max_abs(), 0.0);
        let s = EpsilonScaling::new(0.1, 1.0).unwrap();
        let one = ComplexField::constant(grid(20), C64::new(1.0, 0.0));
        assert_eq!(total_energy(&one, &s), 0.0);
        assert_eq!(energy_density(&one, &s).max_abs(), 0.0);
    }

    #[test]
    fn plane_wave_current_and_stress() {
        let q = [1.3, -0.4];
        let u = ComplexField::from_fn(grid(129), |p| {
            C64::from_polar(1.0, q[0] * p[0] + q[1] * p[1])
        });
        let j = current(&u);
        let h2 = u.grid.h().powi(2);
        for i in 0..u.grid.n1() {
            for k in 0..u.grid.n2() {
                assert!((j.x[[i, k]] - q[0]).abs() < 2.0 * h2);
                assert!((j.y[[i, k]] - q[1]).abs() < 2.0 * h2);
            }
        }
        let t = stress(&u);
        let s = EpsilonScaling::new(0.1, 1.0).unwrap();
        let e = energy_density(&u, &s);
        let c = u.grid.n1() / 2;
        assert!((t.xy[[c, c]] - q[0] * q[1]).abs() < 1e-3);
        assert!((t.xx[[c, c]] - q[0] * q[0]).abs() < 1e-3);
        assert!((e.values[[c, c]] - 0.5 * (q[0] * q[0] + q[1] * q[1])).abs() < 1e-3);
    }

    #[test]
    fn identity_map_has_unit_jacobian() {
        let u = ComplexField::from_fn(grid(17), |p| C64::new(p[0], p[1]));
        for v in jacobian(&u).values.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for v in jacobian_nodal(&u).values.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vortex_circulation_is_two_pi() {
        let a = [0.43, 0.51];
        let u = ComplexField::from_fn(grid(97), |p| {
            let z = C64::new(p[0] - a[0], p[1] - a[1]);
            z / z.norm().max(1e-3)
        });
        let j = current(&u);
        let c = loop_circulation(&j, 20, 70, 15, 80);
        assert!((c - 2.0 * std::f64::consts::PI).abs() < 0.02 * 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn rigid_rotation_velocity() {
        let omega = 0.7;
        let g = grid(33);
        let u0 = ComplexField::from_fn(g, |p| C64::new(1.0 + p[0] * p[1], 0.5 * p[0]));
        let mut u_t = u0.clone();
        u_t.values.mapv_inplace(|z| C64::new(0.0, omega) * z);
        let v = jacobian_velocity(&u0, &u_t).unwrap();
        // |u₀|² = (1 + xy)² + x²/4, so −ω∇|u₀|²/2 has closed form.
        for (i, k) in [(5, 7), (16, 16), (30, 2)] {
            let [x, y] = g.node(i, k);
            let gx = (1.0 + x * y) * y + 0.25 * x;
            let gy = (1.0 + x * y) * x;
            assert!((v.x[[i, k]] + omega * gx).abs() < 1e-10);
            assert!((v.y[[i, k]] + omega * gy).abs() < 1e-10);
        }
    }

    #[test]
    fn pairing_area_and_zero() {
        let g = grid(21);
        let one = ScalarField::from_fn(g, |_| 1.0);
        let area = pair_with_test(Quantity::Scalar(&one), TestFn::Scalar(&|_| 1.0), &Region::Whole);
        assert!((area - 1.0).abs() < 1e-12);
        let z = pair_scalar(&one, |_| 0.0, &Region::Whole);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn g_with_nabla_u_identity_holds_on_discrete_gradients() {
        // ((G·∇)iu, ∇u) = iG J(u) is algebraic in ∇u, so with the same stencil
        // on both sides it holds to round-off; the O(h²) part is J itself.
        let gfield = |p: Point| [p[1].sin(), (2.0 * p[0]).cos()];
        let g = grid(65);
        let u = ComplexField::from_fn(g, |p| {
            C64::new((p[0] + 0.3 * p[1]).cos(), (1.1 * p[0] * p[1]).sin() + 0.2)
        });
        let (u1, u2) = gradient(&u);
        let jn = jacobian_nodal(&u);
        for i in 0..g.n1() {
            for k in 0..g.n2() {
                let gv = gfield(g.node(i, k));
                let giu = C64::new(0.0, 1.0) * (u1[[i, k]] * gv[0] + u2[[i, k]] * gv[1]);
                let lhs = [dot(giu, u1[[i, k]]), dot(giu, u2[[i, k]])];
                let ig = rot90(gv);
                assert!((lhs[0] - ig[0] * jn.values[[i, k]]).abs() < 1e-12);
                assert!((lhs[1] - ig[1] * jn.values[[i, k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nodal_jacobian_converges_at_second_order() {
        let ufn = |p: Point| C64::new((p[0] + 0.3 * p[1]).cos(), (1.1 * p[0] * p[1]).sin());
        // J = (−sin s)(1.1 x cos c) − (−0.3 sin s)(1.1 y cos c), s = x + 0.3y, c = 1.1xy
        let exact = |p: Point| {
            let s = (p[0] + 0.3 * p[1]).sin();
            let c = (1.1 * p[0] * p[1]).cos();
            -s * 1.1 * p[0] * c + 0.3 * s * 1.1 * p[1] * c
        };
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let jn = jacobian_nodal(&ComplexField::from_fn(g, ufn));
                jn.values
                    .indexed_iter()
                    .map(|((i, k), v)| (v - exact(g.node(i, k))).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    proptest! {
        #[test]
        fn jacobian_sum_equals_half_boundary_circulation(
            a in 0.1f64..0.9, b in 0.1f64..0.9, c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, n in 16usize..40,
        ) {
            let g = grid(n);
            let u = ComplexField::from_fn(g, |p| {
                let z = C64::new(p[0] - a, p[1] - b);
                z * C64::new(1.0 + c0 * p[0], c1 * p[1]) + C64::new(0.1 * c1, 0.0)
            });
            let j = current(&u);
            let total = jacobian(&u).integral();
            let bc = 0.5 * boundary_circulation(&j);
            prop_assert!((total - bc).abs() <= 1e-12 * (1.0 + bc.abs()));
        }

        #[test]
        fn conjugation_flips_current_and_jacobian(
            a in 0.1f64..0.9, b in 0.1f64..0.9, s in 0.5f64..3.0,
        ) {
            let g = grid(24);
            let u = ComplexField::from_fn(g, |p| {
                C64::new(p[0] - a, s * (p[1] - b)) * C64::from_polar(1.0, p[0] * p[1])
            });
            let ub = u.conj();
            let (j, jb) = (current(&u), current(&ub));
            let (q, qb) = (jacobian(&u), jacobian(&ub));
            prop_assert!(j.x.iter().zip(jb.x.iter()).all(|(x, y)| x == &-y));
            prop_assert!(j.y.iter().zip(jb.y.iter()).all(|(x, y)| x == &-y));
            prop_assert!(q.values.iter().zip(qb.values.iter()).all(|(x, y)| (x + y).abs() < 1e-12));
            let t = stress(&u);
            prop_assert!(t.xy == t.yx);
        }
    }
}
