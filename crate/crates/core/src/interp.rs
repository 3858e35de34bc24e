//! Keys cubic convolution (a = −½) on nodal arrays.

use ndarray::Array2;

use crate::grid::{Grid, Point};

const A: f64 = -0.5;

#[inline]
fn kernel(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

#[inline]
fn kernel_deriv(t: f64) -> f64 {
    let s = t.signum();
    let t = t.abs();
    s * if t <= 1.0 {
        (3.0 * (A + 2.0) * t - 2.0 * (A + 3.0)) * t
    } else if t < 2.0 {
        (3.0 * A * t - 10.0 * A) * t + 8.0 * A
    } else {
        0.0
    }
}

/// Cubic Lagrange basis on nodes 0..4 at `t`, and its derivative.
fn lagrange(t: f64, m: usize, deriv: bool) -> f64 {
    let others = (0..4).filter(|&q| q != m);
    let denom: f64 = others.clone().map(|q| m as f64 - q as f64).product();
    if !deriv {
        return others.map(|q| t - q as f64).product::<f64>() / denom;
    }
    let mut d = 0.0;
    for skip in others.clone() {
        d += others.clone().filter(|&q| q != skip).map(|q| t - q as f64).product::<f64>();
    }
    d / denom
}

/// Stencil base index and weights along one axis. Interior cells use the
/// Keys kernel; the first and last cells, where the centered stencil would
/// leave the grid, use one-sided cubic Lagrange weights.
fn stencil(f: f64, n: usize, deriv: bool) -> (usize, [f64; 4]) {
    let centered = f.floor() as isize - 1;
    let i0 = centered.clamp(0, n as isize - 4) as usize;
    let mut w = [0.0; 4];
    for (m, wm) in w.iter_mut().enumerate() {
        *wm = if centered == i0 as isize {
            let k = if deriv { kernel_deriv } else { kernel };
            k(f - (i0 + m) as f64)
        } else {
            lagrange(f - i0 as f64, m, deriv)
        };
    }
    (i0, w)
}

fn apply(a: &Array2<f64>, i0: usize, wx: &[f64; 4], j0: usize, wy: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for (m, x) in wx.iter().enumerate() {
        let mut r = 0.0;
        for (l, y) in wy.iter().enumerate() {
            r += y * a[[i0 + m, j0 + l]];
        }
        s += x * r;
    }
    s
}

/// Interpolated value at `p`.
pub fn sample(a: &Array2<f64>, grid: &Grid, p: Point) -> f64 {
    let [fi, fj] = grid.to_index_space(p);
    let (i0, wx) = stencil(fi, grid.n1(), false);
    let (j0, wy) = stencil(fj, grid.n2(), false);
    apply(a, i0, &wx, j0, &wy)
}

/// Gradient of the interpolant at `p`.
pub fn sample_grad(a: &Array2<f64>, grid: &Grid, p: Point) -> [f64; 2] {
    let [fi, fj] = grid.to_index_space(p);
    let (i0, wx) = stencil(fi, grid.n1(), false);
    let (j0, wy) = stencil(fj, grid.n2(), false);
    let (_, dx) = stencil(fi, grid.n1(), true);
    let (_, dy) = stencil(fj, grid.n2(), true);
    let h = grid.h();
    [apply(a, i0, &dx, j0, &wy) / h, apply(a, i0, &wx, j0, &dy) / h]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_quadratics() {
        let g = Grid::unit_square(21).unwrap();
        let f = |p: Point| 1.0 + 2.0 * p[0] - p[1] + p[0] * p[1] + 0.5 * p[0] * p[0];
        let a = Array2::from_shape_fn(g.shape(), |(i, j)| f(g.node(i, j)));
        assert!((sample(&a, &g, g.node(7, 9)) - a[[7, 9]]).abs() < 1e-14);
        let p = [0.4321, 0.6789];
        assert!((sample(&a, &g, p) - f(p)).abs() < 1e-12);
        let d = sample_grad(&a, &g, p);
        assert!((d[0] - (2.0 + p[1] + p[0])).abs() < 1e-10);
        assert!((d[1] - (-1.0 + p[0])).abs() < 1e-10);
    }

    #[test]
    fn boundary_cells_reproduce_cubics() {
        // Cubic along the axis whose boundary cell is sampled; Keys is exact
        // only for quadratics in interior cells.
        let g = Grid::unit_square(21).unwrap();
        let h = g.h();
        let corners = [[0.3 * h, 0.01], [1.0 - 0.2 * h, 0.999]];
        for axis in 0..2 {
            let f = |p: Point| p[axis].powi(3) + p[0] * p[1] + p[1 - axis].powi(2);
            let df = |p: Point, k: usize| {
                if k == axis {
                    3.0 * p[k] * p[k] + p[1 - k]
                } else {
                    2.0 * p[k] + p[1 - k]
                }
            };
            let a = Array2::from_shape_fn(g.shape(), |(i, j)| f(g.node(i, j)));
            let mut edge = [0.5, 0.5];
            edge[axis] = 0.4 * h;
            for p in corners.into_iter().chain([edge]) {
                assert!((sample(&a, &g, p) - f(p)).abs() < 1e-12, "{p:?}");
                let d = sample_grad(&a, &g, p);
                assert!((d[0] - df(p, 0)).abs() < 1e-10 && (d[1] - df(p, 1)).abs() < 1e-10, "{p:?} {d:?}");
            }
        }
    }

    #[test]
    fn third_order_on_smooth_data() {
        let f = |p: Point| (3.0 * p[0]).sin() * (2.0 * p[1]).cos();
        let p = [0.3711, 0.5173];
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let g = Grid::unit_square(n).unwrap();
                let a = Array2::from_shape_fn(g.shape(), |(i, j)| f(g.node(i, j)));
                (sample(&a, &g, p) - f(p)).abs()
            })
            .collect();
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
        assert!(errs[0] / errs[2] > 16.0, "{errs:?}");
    }
}
