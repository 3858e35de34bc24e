//! Sampled fields on a [`Grid`] and the binary snapshot format.

use std::io::{Read, Write};

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point};

pub type C64 = Complex64;

/// Where the samples of a scalar field live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// One value per node, shape `(n1, n2)`.
    Node,
    /// One value per cell, shape `(n1 - 1, n2 - 1)`.
    Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Array2<C64>,
    pub time: f64,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Array2<C64>, time: f64) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch);
        }
        let f = ComplexField { grid, values, time };
        f.check_finite("complex field")?;
        Ok(f)
    }

    pub fn constant(grid: Grid, c: C64) -> Self {
        ComplexField {
            grid,
            values: Array2::from_elem(grid.shape(), c),
            time: 0.0,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> C64) -> Self {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.node(i, j)));
        ComplexField {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn conj(&self) -> Self {
        ComplexField {
            grid: self.grid,
            values: self.values.mapv(|z| z.conj()),
            time: self.time,
        }
    }

    /// Multiply by a constant unit phase.
    pub fn rotate(&self, alpha: f64) -> Self {
        let w = C64::from_polar(1.0, alpha);
        ComplexField {
            grid: self.grid,
            values: self.values.mapv(|z| z * w),
            time: self.time,
        }
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField::nodes(self.grid, self.values.mapv(|z| z.norm()))
    }

    /// `(self - prev) / dt`, the backward time difference.
    pub fn backward_difference(&self, prev: &ComplexField) -> Result<ComplexField> {
        self.same_grid(prev)?;
        let dt = self.time - prev.time;
        if !(dt > 0.0) {
            return Err(Error::SolverFailure(format!(
                "backward difference needs increasing times, got dt = {dt}"
            )));
        }
        let mut values = Array2::zeros(self.grid.shape());
        Zip::from(&mut values)
            .and(&self.values)
            .and(&prev.values)
            .for_each(|o, &a, &b| *o = (a - b) / dt);
        Ok(ComplexField {
            grid: self.grid,
            values,
            time: self.time,
        })
    }

    /// Writes the `GLV1` snapshot: magic, n1, n2 (u64), origin, extent, time, ε
    /// (f64), then row-major `(Re, Im)` pairs with index `i * n2 + j`. All
    /// numbers little-endian.
    pub fn write_snapshot<W: Write>(&self, mut w: W, eps: f64) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&(self.grid.n1() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n2() as u64).to_le_bytes())?;
        let o = self.grid.origin();
        let e = self.grid.extent();
        for v in [o[0], o[1], e[0], e[1], self.time, eps] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(16 * self.grid.len());
        for i in 0..self.grid.n1() {
            for j in 0..self.grid.n2() {
                let z = self.values[[i, j]];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Inverse of [`write_snapshot`](Self::write_snapshot); returns the field and ε.
    pub fn read_snapshot<R: Read>(mut r: R) -> Result<(ComplexField, f64)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot(format!("bad magic {magic:?}")));
        }
        let n1 = read_u64(&mut r)? as usize;
        let n2 = read_u64(&mut r)? as usize;
        let mut hdr = [0.0; 6];
        for v in hdr.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let grid = Grid::new([hdr[0], hdr[1]], [hdr[2], hdr[3]], n1, n2)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        let mut body = vec![0u8; 16 * n1 * n2];
        r.read_exact(&mut body)
            .map_err(|e| Error::Snapshot(format!("truncated body: {e}")))?;
        let values = Array2::from_shape_fn((n1, n2), |(i, j)| {
            let k = 16 * (i * n2 + j);
            let re = f64::from_le_bytes(body[k..k + 8].try_into().unwrap());
            let im = f64::from_le_bytes(body[k + 8..k + 16].try_into().unwrap());
            C64::new(re, im)
        });
        let field = ComplexField::new(grid, values, hdr[4])?;
        Ok((field, hdr[5]))
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"GLV1";

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub location: Location,
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn nodes(grid: Grid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        ScalarField {
            grid,
            location: Location::Node,
            values,
        }
    }

    pub fn cells(grid: Grid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (grid.n1() - 1, grid.n2() - 1));
        ScalarField {
            grid,
            location: Location::Cell,
            values,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::nodes(grid, Array2::zeros(grid.shape()))
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        Self::nodes(
            grid,
            Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.node(i, j))),
        )
    }

    /// Sample position of entry `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> Point {
        match self.location {
            Location::Node => self.grid.node(i, j),
            Location::Cell => self.grid.cell_center(i, j),
        }
    }

    /// Plain sum times `h²` (cells) or trapezoidal rule (nodes).
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        match self.location {
            Location::Cell => self.values.sum() * g.h() * g.h(),
            Location::Node => self
                .values
                .indexed_iter()
                .map(|((i, j), v)| v * g.trapezoid_weight(i, j))
                .sum(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            x: Array2::zeros(grid.shape()),
            y: Array2::zeros(grid.shape()),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut v = Self::zeros(grid);
        for i in 0..grid.n1() {
            for j in 0..grid.n2() {
                let [a, b] = f(grid.node(i, j));
                v.x[[i, j]] = a;
                v.y[[i, j]] = b;
            }
        }
        v
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x[[i, j]], self.y[[i, j]]]
    }

    pub fn max_norm(&self) -> f64 {
        Zip::from(&self.x)
            .and(&self.y)
            .fold(0.0f64, |m, a, b| m.max(a.hypot(*b)))
    }
}

/// 2×2 matrix per node, stored by component.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub grid: Grid,
    pub xx: Array2<f64>,
    pub xy: Array2<f64>,
    pub yx: Array2<f64>,
    pub yy: Array2<f64>,
}

impl TensorField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [[f64; 2]; 2] {
        [
            [self.xx[[i, j]], self.xy[[i, j]]],
            [self.yx[[i, j]], self.yy[[i, j]]],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let g = Grid::new([0.25, -1.0], [1.5, 1.0], 31, 21).unwrap();
        let mut u = ComplexField::from_fn(g, |p| C64::new(p[0].sin(), p[0] * p[1]));
        u.time = 0.375;
        let mut buf = Vec::new();
        u.write_snapshot(&mut buf, 0.04).unwrap();
        assert_eq!(buf.len(), 4 + 16 + 48 + 16 * 31 * 21);
        let (v, eps) = ComplexField::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(eps, 0.04);
        assert_eq!(v, u);
    }

    #[test]
    fn snapshot_layout_is_row_major_in_x() {
        let g = Grid::unit_square(16).unwrap();
        let mut u = ComplexField::constant(g, C64::new(0.0, 0.0));
        u.values[[1, 0]] = C64::new(7.0, -7.0);
        let mut buf = Vec::new();
        u.write_snapshot(&mut buf, 0.1).unwrap();
        let k = 68 + 16 * 16;
        assert_eq!(f64::from_le_bytes(buf[k..k + 8].try_into().unwrap()), 7.0);
    }

    #[test]
    fn rejects_bad_magic_and_nonfinite() {
        assert!(ComplexField::read_snapshot(&b"GLV2xxxxxxxx"[..]).is_err());
        let g = Grid::unit_square(16).unwrap();
        let mut v = Array2::from_elem(g.shape(), C64::new(1.0, 0.0));
        v[[3, 3]] = C64::new(f64::NAN, 0.0);
        assert!(matches!(
            ComplexField::new(g, v, 0.0),
            Err(Error::NonFinite(_))
        ));
    }
}
