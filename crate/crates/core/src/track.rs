//! Vortex detection from plaquette windings, track matching, and the
//! energy-excess and concentration diagnostics of a snapshot.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{EpsilonScaling, Grid, Point};
use crate::ops::{self, dist, Region};
use crate::pde::bc::{BoundaryCondition, PointCharge};
use crate::renergy::renormalized_energy;

/// Vortex positions with degrees `±1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VortexConfiguration {
    pub positions: Vec<Point>,
    pub degrees: Vec<i32>,
    #[serde(default)]
    pub time: f64,
}

impl VortexConfiguration {
    pub fn new(positions: Vec<Point>, degrees: Vec<i32>) -> Result<Self> {
        if positions.len() != degrees.len() {
            return Err(Error::config(
                "initial.degrees",
                format!("{} positions but {} degrees", positions.len(), degrees.len()),
            ));
        }
        if let Some(&d) = degrees.iter().find(|d| d.abs() != 1) {
            return Err(Error::DegreeOutOfRange { winding: d });
        }
        Ok(VortexConfiguration {
            positions,
            degrees,
            time: 0.0,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_degree(&self) -> i32 {
        self.degrees.iter().sum()
    }

    /// `ρ_a = min(½ min_{k≠l} |a_k − a_l|, min_k dist(a_k, ∂D))`; infinite
    /// for the empty configuration.
    pub fn rho(&self, grid: &Grid) -> f64 {
        let mut r = f64::INFINITY;
        for (k, a) in self.positions.iter().enumerate() {
            r = r.min(grid.dist_to_boundary(*a));
            for b in &self.positions[k + 1..] {
                r = r.min(0.5 * dist(*a, *b));
            }
        }
        r
    }

    pub fn min_separation(&self) -> f64 {
        let mut r = f64::INFINITY;
        for (k, a) in self.positions.iter().enumerate() {
            for b in &self.positions[k + 1..] {
                r = r.min(dist(*a, *b));
            }
        }
        r
    }

    pub fn charges(&self) -> Vec<PointCharge> {
        self.positions
            .iter()
            .zip(&self.degrees)
            .map(|(p, d)| PointCharge {
                position: *p,
                degree: *d,
            })
            .collect()
    }

    pub fn with_positions(&self, positions: Vec<Point>) -> Self {
        VortexConfiguration {
            positions,
            degrees: self.degrees.clone(),
            time: self.time,
        }
    }

    pub fn flipped(&self) -> Self {
        VortexConfiguration {
            positions: self.positions.clone(),
            degrees: self.degrees.iter().map(|d| -d).collect(),
            time: self.time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub amplitude_threshold: f64,
    /// Core size used for the centroid ball `3ε`.
    pub eps: f64,
    /// Width of the boundary collar in nodes.
    pub collar: usize,
}

impl DetectOptions {
    pub fn new(eps: f64) -> Self {
        DetectOptions {
            amplitude_threshold: 0.5,
            eps,
            collar: 2,
        }
    }
}

/// One detected vortex with its cluster metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedVortex {
    pub position: Point,
    pub degree: i32,
    pub cluster_size: usize,
    pub min_modulus: f64,
}

/// Winding of the phase around cell `(i, j)`, counter-clockwise. An exact
/// zero at a corner has phase 0, so a zero sitting on a node is counted in
/// exactly one adjacent cell.
fn plaquette_winding(u: &ComplexField, i: usize, j: usize) -> i32 {
    let v = &u.values;
    let c = [v[[i, j]], v[[i + 1, j]], v[[i + 1, j + 1]], v[[i, j + 1]]];
    let mut s = 0.0;
    for k in 0..4 {
        let d = c[(k + 1) % 4].arg() - c[k].arg();
        s += d - 2.0 * PI * (d / (2.0 * PI)).round();
    }
    (s / (2.0 * PI)).round() as i32
}

/// Detects vortices with their cluster metadata, sorted by position
/// (x, then y) so the output order is deterministic.
pub fn detect_vortices_detailed(u: &ComplexField, opts: &DetectOptions) -> Result<Vec<DetectedVortex>> {
    let g = u.grid;
    let (c1, c2) = (g.n1() - 1, g.n2() - 1);
    let modulus = |i: usize, j: usize| u.values[[i, j]].norm();
    let cell_min = |i: usize, j: usize| {
        modulus(i, j)
            .min(modulus(i + 1, j))
            .min(modulus(i, j + 1))
            .min(modulus(i + 1, j + 1))
    };
    let mut wind = vec![0i32; c1 * c2];
    for i in 0..c1 {
        for j in 0..c2 {
            if cell_min(i, j) < opts.amplitude_threshold {
                wind[i * c2 + j] = plaquette_winding(u, i, j);
            }
        }
    }

    let mut label = vec![usize::MAX; c1 * c2];
    let mut clusters: Vec<Vec<(usize, usize)>> = Vec::new();
    for start in 0..c1 * c2 {
        if wind[start] == 0 || label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        label[start] = id;
        while let Some(c) = stack.pop() {
            let (i, j) = (c / c2, c % c2);
            members.push((i, j));
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= c1 as isize || nj >= c2 as isize {
                        continue;
                    }
                    let n = ni as usize * c2 + nj as usize;
                    if wind[n] != 0 && label[n] == usize::MAX {
                        label[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        clusters.push(members);
    }

    let mut seeds = Vec::with_capacity(clusters.len());
    for members in &clusters {
        let degree: i32 = members.iter().map(|&(i, j)| wind[i * c2 + j]).sum();
        let touches = members.iter().any(|&(i, j)| {
            i < opts.collar || j < opts.collar || i + 1 + opts.collar > c1 || j + 1 + opts.collar > c2
        });
        let mut center = [0.0, 0.0];
        for &(i, j) in members {
            let p = g.cell_center(i, j);
            center[0] += p[0];
            center[1] += p[1];
        }
        center[0] /= members.len() as f64;
        center[1] /= members.len() as f64;
        if touches {
            return Err(Error::BoundaryContamination {
                x: center[0],
                y: center[1],
            });
        }
        if degree.abs() != 1 {
            return Err(Error::DegreeOutOfRange { winding: degree });
        }
        let min_modulus = members
            .iter()
            .map(|&(i, j)| cell_min(i, j))
            .fold(f64::INFINITY, f64::min);
        seeds.push((center, degree, members.len(), min_modulus));
    }

    let jac = ops::jacobian(u);
    let radius = (3.0 * opts.eps).max(2.0 * g.h());
    let r_cells = (radius / g.h()).ceil() as isize + 1;
    // Fixed point of the tapered centroids, iterated for all vortices at once;
    // each cell counts toward the nearest current estimate only.
    let mut positions: Vec<Point> = seeds.iter().map(|s| s.0).collect();
    for _ in 0..100 {
        let mut moved: f64 = 0.0;
        let prev = positions.clone();
        for (k, &(_, degree, _, _)) in seeds.iter().enumerate() {
            let position = prev[k];
            let [fi, fj] = g.to_index_space(position);
            let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
            for i in (fi as isize - r_cells).max(0)..=(fi as isize + r_cells).min(c1 as isize - 1) {
                for j in (fj as isize - r_cells).max(0)..=(fj as isize + r_cells).min(c2 as isize - 1) {
                    let p = g.cell_center(i as usize, j as usize);
                    let r = dist(p, position);
                    if r >= radius {
                        continue;
                    }
                    if prev.iter().enumerate().any(|(l, q)| l != k && dist(p, *q) < r) {
                        continue;
                    }
                    let s = 1.0 - (r / radius).powi(2);
                    let v = degree as f64 * jac.values[[i as usize, j as usize]] * s * s;
                    w += v;
                    sx += v * p[0];
                    sy += v * p[1];
                }
            }
            if w > 0.0 {
                let next = [sx / w, sy / w];
                moved = moved.max(dist(next, position));
                positions[k] = next;
            }
        }
        if moved < 1e-10 * g.h() {
            break;
        }
    }
    let mut out: Vec<DetectedVortex> = seeds
        .iter()
        .zip(positions)
        .map(|(&(_, degree, size, min_modulus), position)| DetectedVortex {
            position,
            degree,
            cluster_size: size,
            min_modulus,
        })
        .collect();
    out.sort_by(|a, b| {
        a.position[0]
            .total_cmp(&b.position[0])
            .then(a.position[1].total_cmp(&b.position[1]))
    });
    Ok(out)
}

/// Vortex configuration of a snapshot; see [`detect_vortices_detailed`].
pub fn detect_vortices(u: &ComplexField, opts: &DetectOptions) -> Result<VortexConfiguration> {
    let found = detect_vortices_detailed(u, opts)?;
    Ok(VortexConfiguration {
        positions: found.iter().map(|v| v.position).collect(),
        degrees: found.iter().map(|v| v.degree).collect(),
        time: u.time,
    })
}

/// `assignment[k]` is the index in the current frame of previous vortex `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub assignment: Vec<usize>,
    pub cost: f64,
    pub max_displacement: f64,
}

/// Per-step mobility cap `10 max(h, Δt V_max)`.
pub fn mobility_cap(h: f64, dt: f64, v_max: f64) -> f64 {
    10.0 * h.max(dt * v_max)
}

/// Minimum-total-distance matching among same-degree vortices.
pub fn match_tracks(prev: &VortexConfiguration, cur: &VortexConfiguration, cap: f64) -> Result<Assignment> {
    if prev.len() != cur.len() {
        return Err(Error::TrackingLost(format!(
            "vortex count changed from {} to {}",
            prev.len(),
            cur.len()
        )));
    }
    let mut a = prev.degrees.clone();
    let mut b = cur.degrees.clone();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::TrackingLost("degree multiset changed".into()));
    }
    let n = prev.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    search(prev, cur, &mut perm, &mut used, 0.0, &mut best);
    let (cost, assignment) = best.unwrap_or((0.0, Vec::new()));
    let max_displacement = assignment
        .iter()
        .enumerate()
        .map(|(k, &l)| dist(prev.positions[k], cur.positions[l]))
        .fold(0.0, f64::max);
    if max_displacement > cap {
        return Err(Error::TrackingLost(format!(
            "best match moves a vortex by {max_displacement:.4e} > cap {cap:.4e}"
        )));
    }
    Ok(Assignment {
        assignment,
        cost,
        max_displacement,
    })
}

fn search(
    prev: &VortexConfiguration,
    cur: &VortexConfiguration,
    perm: &mut Vec<usize>,
    used: &mut [bool],
    cost: f64,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if best.as_ref().is_some_and(|(c, _)| cost >= *c) {
        return;
    }
    let k = perm.len();
    if k == prev.len() {
        *best = Some((cost, perm.clone()));
        return;
    }
    for l in 0..cur.len() {
        if used[l] || cur.degrees[l] != prev.degrees[k] {
            continue;
        }
        used[l] = true;
        perm.push(l);
        let c = cost + dist(prev.positions[k], cur.positions[l]);
        search(prev, cur, perm, used, c, best);
        perm.pop();
        used[l] = false;
    }
}

/// `E_ε`, `W`, `γ`, `W_ε = πN log(1/ε) + Nγ + W` and `D_ε = E_ε − W_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub energy: f64,
    pub w: f64,
    pub gamma: f64,
    pub w_eps: f64,
    pub excess: f64,
    pub well_prepared: bool,
}

pub const DEFAULT_EXCESS_THRESHOLD: f64 = 0.5;

pub fn energy_excess(
    u: &ComplexField,
    config: &VortexConfiguration,
    scaling: &EpsilonScaling,
    gamma: f64,
    bc: &BoundaryCondition,
    threshold: f64,
) -> Result<ExcessReport> {
    let energy = ops::total_energy(u, scaling);
    let w = renormalized_energy(config, bc, &u.grid)?.w;
    let n = config.len() as f64;
    let w_eps = PI * n * scaling.log_inv_eps() + n * gamma + w;
    let excess = energy - w_eps;
    Ok(ExcessReport {
        energy,
        w,
        gamma,
        w_eps,
        excess,
        well_prepared: excess.abs() < threshold,
    })
}

/// Frobenius norm of `∫_{B_σ(center)} k_ε (∇u ⊗ ∇u) − π Id`.
pub fn equipartition_defect(u: &ComplexField, center: Point, sigma: f64, scaling: &EpsilonScaling) -> f64 {
    let t = ops::stress(u);
    let m = ops::pair_tensor(&t, |_| scaling.k_eps, &Region::Ball { center, radius: sigma });
    let d = [[m[0][0] - PI, m[0][1]], [m[1][0], m[1][1] - PI]];
    (d[0][0].powi(2) + d[0][1].powi(2) + d[1][0].powi(2) + d[1][1].powi(2)).sqrt()
}

/// `∫ k_ε e_ε(u) φ` over the grid.
pub fn energy_concentration(u: &ComplexField, scaling: &EpsilonScaling, phi: impl Fn(Point) -> f64) -> f64 {
    let e = ops::energy_density(u, scaling);
    scaling.k_eps * ops::pair_scalar(&e, phi, &Region::Whole)
}

/// `∫ v k_ε (∇u ⊗ ∇u)`, whose limit is `π Σ_k v(ξ_k) Id`.
pub fn stress_concentration(u: &ComplexField, scaling: &EpsilonScaling, v: impl Fn(Point) -> f64) -> [[f64; 2]; 2] {
    let t = ops::stress(u);
    let m = ops::pair_tensor(&t, v, &Region::Whole);
    [
        [scaling.k_eps * m[0][0], scaling.k_eps * m[0][1]],
        [scaling.k_eps * m[1][0], scaling.k_eps * m[1][1]],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::C64;

    fn vortex_field(grid: Grid, centers: &[(Point, i32)], eps: f64) -> ComplexField {
        ComplexField::from_fn(grid, |p| {
            let mut z = C64::new(1.0, 0.0);
            for &(c, d) in centers {
                let w = C64::new(p[0] - c[0], p[1] - c[1]);
                let r = w.norm();
                let f = r / (r * r + 2.0 * eps * eps).sqrt();
                let w = if d > 0 { w } else { w.conj() };
                z *= if r > 0.0 { w / r * f } else { C64::new(0.0, 0.0) };
            }
            z
        })
    }

    #[test]
    fn uniform_field_has_no_vortices() {
        let g = Grid::unit_square(33).unwrap();
        let u = ComplexField::constant(g, C64::new(1.0, 0.0));
        let c = detect_vortices(&u, &DetectOptions::new(0.05)).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn detects_dipole_to_subgrid_accuracy() {
        let g = Grid::unit_square(101).unwrap();
        let a = [0.3512, 0.5203];
        let b = [0.6677, 0.4891];
        let u = vortex_field(g, &[(a, 1), (b, -1)], 0.04);
        let c = detect_vortices(&u, &DetectOptions::new(0.04)).unwrap();
        assert_eq!(c.degrees, vec![1, -1]);
        assert!(dist(c.positions[0], a) < g.h(), "{:?}", c.positions);
        assert!(dist(c.positions[1], b) < g.h(), "{:?}", c.positions);
    }

    #[test]
    fn rejects_double_vortex_and_boundary_clusters() {
        let g = Grid::unit_square(65).unwrap();
        let c = [0.503, 0.497];
        let u = ComplexField::from_fn(g, |p| {
            let w = C64::new(p[0] - c[0], p[1] - c[1]);
            w * w / (w.norm_sqr() + 0.01)
        });
        assert!(matches!(
            detect_vortices(&u, &DetectOptions::new(0.05)),
            Err(Error::DegreeOutOfRange { winding: 2 })
        ));
        let v = vortex_field(g, &[([0.01, 0.5], 1)], 0.05);
        assert!(matches!(
            detect_vortices(&v, &DetectOptions::new(0.05)),
            Err(Error::BoundaryContamination { .. })
        ));
    }

    #[test]
    fn zero_on_a_node_is_found_once() {
        let g = Grid::unit_square(65).unwrap();
        let u = vortex_field(g, &[([0.5, 0.5], -1)], 0.05);
        let c = detect_vortices(&u, &DetectOptions::new(0.05)).unwrap();
        assert_eq!(c.degrees, vec![-1]);
        let e = dist(c.positions[0], [0.5, 0.5]);
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn detection_is_translation_equivariant() {
        let g = Grid::unit_square(81).unwrap();
        let a = [0.4137, 0.5521];
        let shift = 3.0 * g.h();
        let u = vortex_field(g, &[(a, 1)], 0.05);
        let v = vortex_field(g, &[([a[0] + shift, a[1]], 1)], 0.05);
        let opts = DetectOptions::new(0.05);
        let pa = detect_vortices(&u, &opts).unwrap().positions[0];
        let pb = detect_vortices(&v, &opts).unwrap().positions[0];
        assert!((pb[0] - pa[0] - shift).abs() < 1e-9);
        assert!((pb[1] - pa[1]).abs() < 1e-9);
    }

    #[test]
    fn matching_cases() {
        let p = VortexConfiguration::new(vec![[0.3, 0.5], [0.7, 0.5]], vec![1, 1]).unwrap();
        let m = match_tracks(&p, &p, 0.1).unwrap();
        assert_eq!(m.assignment, vec![0, 1]);
        assert_eq!(m.cost, 0.0);

        let q = p.with_positions(vec![[0.71, 0.5], [0.3, 0.5]]);
        let m = match_tracks(&p, &q, 0.1).unwrap();
        assert_eq!(m.assignment, vec![1, 0]);
        assert!((m.cost - 0.01).abs() < 1e-12);

        let far = p.with_positions(vec![[0.3, 0.9], [0.7, 0.1]]);
        assert!(matches!(match_tracks(&p, &far, 0.1), Err(Error::TrackingLost(_))));
        assert!(matches!(
            match_tracks(&p, &p.flipped(), 0.1),
            Err(Error::TrackingLost(_))
        ));
    }

    #[test]
    fn equipartition_of_uniform_state() {
        let g = Grid::unit_square(33).unwrap();
        let u = ComplexField::constant(g, C64::new(1.0, 0.0));
        let s = EpsilonScaling::new(0.05, 1.0).unwrap();
        let d = equipartition_defect(&u, [0.5, 0.5], 0.3, &s);
        assert!((d - PI * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rho_of_configuration() {
        let g = Grid::unit_square(33).unwrap();
        let c = VortexConfiguration::new(vec![[0.3, 0.5], [0.5, 0.5]], vec![1, -1]).unwrap();
        assert!((c.rho(&g) - 0.1).abs() < 1e-15);
        assert!(VortexConfiguration::new(vec![[0.5, 0.5]], vec![2]).is_err());
    }
}
