//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EpsilonScaling, Grid, Point};
use crate::initial::{RadialProfile, DEFAULT_DENSITY, DEFAULT_R_MAX};
use crate::ode::{collision_radius, GradientRoute, HamiltonianCoupling, OdeParams, Tolerances};
use crate::pde::bc::{BoundaryCondition, BoundarySpec, PointCharge};
use crate::pde::fields::{ExternalFields, FieldSpec, VectorFn};
use crate::track::{VortexConfiguration, DEFAULT_EXCESS_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Ode,
    Compare,
    Sweep,
    Diagnose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub origin: Point,
    pub extent: [f64; 2],
    /// Node counts; when absent they follow from `h ≤ ε / h_ratio`.
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default)]
    pub n2: Option<usize>,
    #[serde(default = "default_h_ratio")]
    pub h_ratio: f64,
}

fn default_h_ratio() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Fixed step; the stability policy picks one when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Time between tracked frames.
    #[serde(default = "default_track_interval")]
    pub track_interval: f64,
    /// Steps between conservation-residual evaluations (0 disables).
    #[serde(default)]
    pub residual_stride: usize,
    /// Steps between kept snapshots (0 keeps the initial and final states only).
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Relative energy jump tolerated per unforced step.
    #[serde(default = "default_energy_guard")]
    pub energy_guard: f64,
}

fn default_track_interval() -> f64 {
    0.01
}

fn default_energy_guard() -> f64 {
    crate::pde::step::DEFAULT_ENERGY_GUARD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(default = "zero_field")]
    pub f: FieldSpec,
    #[serde(default = "zero_field")]
    pub g: FieldSpec,
}

fn zero_field() -> FieldSpec {
    FieldSpec::Zero
}

impl Default for FieldsConfig {
    fn default() -> Self {
        FieldsConfig {
            f: FieldSpec::Zero,
            g: FieldSpec::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub position: Point,
    pub degree: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    #[serde(default)]
    pub coupling: HamiltonianCoupling,
    #[serde(default)]
    pub gradient: GradientRoute,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub delta_cache: Option<f64>,
}

fn default_rtol() -> f64 {
    Tolerances::default().rtol
}

fn default_atol() -> f64 {
    Tolerances::default().atol
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            coupling: HamiltonianCoupling::default(),
            gradient: GradientRoute::default(),
            rtol: default_rtol(),
            atol: default_atol(),
            delta_cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    #[serde(default = "default_amplitude")]
    pub amplitude_threshold: f64,
    #[serde(default = "default_collar")]
    pub collar: usize,
    /// Consecutive failed detections tolerated before giving up.
    #[serde(default = "default_max_failures")]
    pub max_failures: usize,
    #[serde(default = "default_excess_threshold")]
    pub excess_threshold: f64,
}

fn default_amplitude() -> f64 {
    0.5
}

fn default_collar() -> usize {
    2
}

fn default_max_failures() -> usize {
    3
}

fn default_excess_threshold() -> f64 {
    DEFAULT_EXCESS_THRESHOLD
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            amplitude_threshold: default_amplitude(),
            collar: default_collar(),
            max_failures: default_max_failures(),
            excess_threshold: default_excess_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_density")]
    pub density: usize,
}

fn default_r_max() -> f64 {
    DEFAULT_R_MAX
}

fn default_density() -> usize {
    DEFAULT_DENSITY
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            r_max: default_r_max(),
            density: default_density(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_sweep_eps")]
    pub eps: Vec<f64>,
    /// What each member runs.
    #[serde(default = "default_member_kind")]
    pub member: ExperimentKind,
}

fn default_sweep_eps() -> Vec<f64> {
    vec![0.08, 0.06, 0.04, 0.03]
}

fn default_member_kind() -> ExperimentKind {
    ExperimentKind::Compare
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: default_sweep_eps(),
            member: default_member_kind(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// 3-point median filter on tracked positions before differencing.
    #[serde(default)]
    pub median_filter: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write kept snapshots as binary files.
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub eps: f64,
    pub lambda0: f64,
    pub domain: DomainConfig,
    pub time: TimeConfig,
    #[serde(default = "default_bc")]
    pub bc: BoundarySpec,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub vortices: Vec<VortexSpec>,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default)]
    pub tracking: TrackingConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_bc() -> BoundarySpec {
    BoundarySpec::Neumann
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(s).map_err(|e| {
            let key = e
                .span()
                .map(|r| s[r].chars().take(40).collect::<String>())
                .unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Same experiment at another ε; explicit node counts are dropped so the
    /// grid follows `h ≤ ε / h_ratio`.
    pub fn with_eps(&self, eps: f64) -> Self {
        let mut c = self.clone();
        c.eps = eps;
        c.domain.n1 = None;
        c.domain.n2 = None;
        c
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = &self.domain;
        let nodes = |given: Option<usize>, len: f64| {
            given.unwrap_or_else(|| (len * d.h_ratio / self.eps).ceil() as usize + 1)
        };
        let n1 = nodes(d.n1, d.extent[0]);
        let n2 = match (d.n1, d.n2) {
            (Some(_), None) if d.extent[0] == d.extent[1] => n1,
            _ => nodes(d.n2, d.extent[1]),
        };
        Grid::new(d.origin, d.extent, n1, n2).map_err(|e| Error::config("domain", e.to_string()))
    }

    pub fn scaling(&self) -> Result<EpsilonScaling> {
        EpsilonScaling::new(self.eps, self.lambda0)
    }

    pub fn vortex_config(&self) -> Result<VortexConfiguration> {
        VortexConfiguration::new(
            self.vortices.iter().map(|v| v.position).collect(),
            self.vortices.iter().map(|v| v.degree).collect(),
        )
        .map_err(|e| Error::config("vortices", e.to_string()))
    }

    fn charges(&self) -> Vec<PointCharge> {
        self.vortices
            .iter()
            .map(|v| PointCharge {
                position: v.position,
                degree: v.degree,
            })
            .collect()
    }

    pub fn boundary(&self, grid: &Grid) -> Result<BoundaryCondition> {
        BoundaryCondition::from_spec(&self.bc, grid, &self.charges())
    }

    pub fn external_fields(&self, grid: &Grid) -> ExternalFields {
        ExternalFields::from_specs(&self.fields.f, &self.fields.g, grid)
    }

    pub fn profile(&self) -> Result<RadialProfile> {
        let p = &self.profile;
        RadialProfile::cached(p.r_max, (p.r_max * p.density as f64).round() as usize)
    }

    /// ODE parameters sharing the PDE grid and collision radius.
    pub fn ode_params(&self) -> Result<OdeParams> {
        let grid = self.grid()?;
        let bc = self.boundary(&grid)?;
        let mut p = OdeParams::new(self.lambda0, grid, bc, collision_radius(self.eps, grid.h()))?;
        p.f = VectorFn::from_spec(&self.fields.f, &grid);
        p.g = VectorFn::from_spec(&self.fields.g, &grid);
        p.coupling = self.ode.coupling;
        p.gradient = self.ode.gradient;
        p.tol.rtol = self.ode.rtol;
        p.tol.atol = self.ode.atol;
        p.delta_cache = self.ode.delta_cache;
        Ok(p)
    }

    /// Per-field and cross-field admissibility.
    pub fn validate(&self) -> Result<()> {
        self.scaling()?;
        positive("time.track_interval", self.time.track_interval)?;
        if !(self.time.t_final >= 0.0 && self.time.t_final.is_finite()) {
            return Err(Error::config("time.t_final", "must be finite and non-negative"));
        }
        if let Some(dt) = self.time.dt {
            positive("time.dt", dt)?;
        }
        positive("domain.h_ratio", self.domain.h_ratio)?;
        positive("ode.rtol", self.ode.rtol)?;
        positive("ode.atol", self.ode.atol)?;
        if let Some(d) = self.ode.delta_cache {
            positive("ode.delta_cache", d)?;
        }
        if !(self.tracking.amplitude_threshold > 0.0 && self.tracking.amplitude_threshold < 1.0) {
            return Err(Error::config("tracking.amplitude_threshold", "must lie in (0, 1)"));
        }
        if self.kind == ExperimentKind::Sweep {
            if self.sweep.eps.is_empty() {
                return Err(Error::config("sweep.eps", "empty sweep"));
            }
            if self.sweep.member == ExperimentKind::Sweep {
                return Err(Error::config("sweep.member", "sweeps do not nest"));
            }
            for &e in &self.sweep.eps {
                EpsilonScaling::new(e, self.lambda0).map_err(|_| {
                    Error::config("sweep.eps", format!("need 0 < eps < 1, got {e}"))
                })?;
            }
        }
        let grid = self.grid()?;
        let config = self.vortex_config()?;
        for (k, p) in config.positions.iter().enumerate() {
            if !(grid.dist_to_boundary(*p) > 0.0) {
                return Err(Error::config(format!("vortices[{k}].position"), "must be interior"));
            }
        }
        let bc = self.boundary(&grid)?;
        if !bc.is_neumann() {
            let w = bc.winding(&grid)?;
            if w != config.total_degree() {
                return Err(Error::config(
                    "bc",
                    format!("boundary degree {w} differs from total vortex degree {}", config.total_degree()),
                ));
            }
        }
        self.external_fields(&grid)
            .check_admissible(&grid, bc.is_neumann(), self.time.t_final)
            .map_err(|e| Error::config("fields", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const DIPOLE: &str = r#"
kind = "compare"
eps = 0.08
lambda0 = 1.0

[domain]
extent = [4.0, 4.0]

[time]
t_final = 0.5

[[vortices]]
position = [1.3, 2.0]
degree = 1

[[vortices]]
position = [2.7, 2.0]
degree = -1
"#;

    #[test]
    fn parses_defaults_and_derives_grid() {
        let c = RunConfig::from_toml_str(DIPOLE).unwrap();
        assert_eq!(c.bc, BoundarySpec::Neumann);
        assert_eq!(c.fields.f, FieldSpec::Zero);
        let g = c.grid().unwrap();
        assert_eq!(g.n1(), 151);
        assert!(g.h() <= c.eps / 3.0 + 1e-15);
        assert_eq!(c.with_eps(0.04).grid().unwrap().n1(), 301);
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_key() {
        let bad = DIPOLE.replace("lambda0 = 1.0", "lambda0 = -1.0");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "lambda0"),
            other => panic!("{other:?}"),
        }
        let bad = DIPOLE.replace("t_final = 0.5", "t_final = 0.5\nbogus = 1");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Config { .. })));
        let bad = DIPOLE.replace("[time]", "[bc]\nkind = \"dirichlet\"\ncharges = [{ position = [2.0, 2.0], degree = 1 }]\n\n[time]");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "bc"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_normal_g_under_neumann() {
        let bad = format!(
            "{DIPOLE}\n[fields.g]\nfamily = \"constant\"\nvalue = [1.0, 0.0]\ncutoff = {{ inner = 0.0, outer = 0.5 }}\n"
        );
        assert!(RunConfig::from_toml_str(&bad).is_ok());
        let bad = format!(
            "{DIPOLE}\n[fields.g]\nfamily = \"shear\"\nrate = 1.0\ncenter = [2.0, 2.0]\n"
        );
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "fields"),
            other => panic!("{other:?}"),
        }
    }
}
