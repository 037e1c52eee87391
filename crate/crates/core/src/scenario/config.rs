//! Scenario files (TOML) and their translation into a model and an initial state.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::elliptic::{solve_poisson, PbProblem, PbSpecies, PoissonProblem};
use crate::error::{NpnsError, Result};
use crate::fields::{
    BoundarySegment, BoundarySpec, Edge, EdgeData, Grid2D, IonSpecies, PhysicalParams, ScalarField,
    VectorField,
};
use crate::flow::project_velocity;
use crate::state::{FlowState, NpnsModel, SimulationState};
use crate::transport::CFL_SAFETY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub eps: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub kbt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeKind {
    Blocking,
    Selective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub edge: Edge,
    pub start: f64,
    pub end: f64,
}

/// A number or an expression in `x`, `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expression(String),
}

impl Scalar {
    pub fn compile(&self) -> Result<Expr> {
        match self {
            Scalar::Number(v) => Ok(Expr::Num(*v)),
            Scalar::Expression(s) => Expr::parse(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub z: f64,
    pub d: f64,
    pub regime: RegimeKind,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
    pub initial: Scalar,
    /// Relative amplitude of seeded multiplicative noise on the initial data.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseValue {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Boundary potential on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeValue {
    Constant(f64),
    Expression(String),
    /// Piecewise constant in the edge's own coordinate (x on bottom/top, y on left/right).
    Piecewise(Vec<PiecewiseValue>),
}

impl Default for EdgeValue {
    fn default() -> Self {
        EdgeValue::Constant(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub bottom: EdgeValue,
    #[serde(default)]
    pub top: EdgeValue,
    #[serde(default)]
    pub left: EdgeValue,
    #[serde(default)]
    pub right: EdgeValue,
}

/// Initial velocity, either from a stream function or from components.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityConfig {
    #[serde(default)]
    pub stream: Option<Scalar>,
    #[serde(default)]
    pub u: Option<Scalar>,
    #[serde(default)]
    pub v: Option<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt_max: f64,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// Rows are written every this many accepted steps.
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    /// Snapshots are written every this many accepted steps (0: final state only).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_safety() -> f64 {
    CFL_SAFETY
}

fn default_output_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferencePolicy {
    Auto,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub policy: ReferencePolicy,
    #[serde(default)]
    pub z_const: Vec<f64>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            policy: ReferencePolicy::Auto,
            z_const: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRegime {
    Blocking,
    UniformSelective,
    GeneralSelective,
}

impl BoundaryRegime {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryRegime::Blocking => "blocking",
            BoundaryRegime::UniformSelective => "uniform-selective",
            BoundaryRegime::GeneralSelective => "general-selective",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub boundary_regime: BoundaryRegime,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub params: ParamsConfig,
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub velocity: VelocityConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| NpnsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| NpnsError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    pub fn params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(self.params.eps, self.params.nu, self.params.kbt)
    }

    fn species_name(&self, k: usize) -> String {
        self.species[k]
            .name
            .clone()
            .unwrap_or_else(|| format!("species_{}", k + 1))
    }

    pub fn ion_species(&self) -> Result<Vec<IonSpecies>> {
        let grid = self.grid()?;
        self.species
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let name = self.species_name(k);
                match s.regime {
                    RegimeKind::Blocking => {
                        if s.gamma.is_some() || !s.segments.is_empty() {
                            return Err(NpnsError::Config(format!(
                                "species {name}: blocking species take no gamma or segments"
                            )));
                        }
                        Ok(IonSpecies::blocking(name, s.z, s.d))
                    }
                    RegimeKind::Selective => {
                        let gamma = s.gamma.ok_or_else(|| {
                            NpnsError::Config(format!("species {name}: selective species need gamma"))
                        })?;
                        if s.segments.is_empty() {
                            return Err(NpnsError::Config(format!(
                                "species {name}: selective species need at least one segment"
                            )));
                        }
                        let segs = s
                            .segments
                            .iter()
                            .map(|sg| BoundarySegment::new(sg.edge, sg.start, sg.end))
                            .collect();
                        let sp = IonSpecies::selective(name, s.z, s.d, gamma, segs);
                        sp.dirichlet_mask(&grid)?;
                        Ok(sp)
                    }
                }
            })
            .collect()
    }

    pub fn boundary_spec(&self) -> Result<BoundarySpec> {
        let grid = self.grid()?;
        let mut w = EdgeData::filled(&grid, 0.0);
        for edge in Edge::ALL {
            let spec = match edge {
                Edge::Bottom => &self.boundary.bottom,
                Edge::Top => &self.boundary.top,
                Edge::Left => &self.boundary.left,
                Edge::Right => &self.boundary.right,
            };
            let values = w.edge_mut(edge);
            match spec {
                EdgeValue::Constant(v) => values.iter_mut().for_each(|x| *x = *v),
                EdgeValue::Expression(s) => {
                    let e = Expr::parse(s)?;
                    for (k, x) in values.iter_mut().enumerate() {
                        let (px, py) = edge.face_point(&grid, k);
                        *x = e.eval(px, py);
                    }
                }
                EdgeValue::Piecewise(pieces) => {
                    for (k, x) in values.iter_mut().enumerate() {
                        let (px, py) = edge.face_point(&grid, k);
                        let s = match edge {
                            Edge::Bottom | Edge::Top => px,
                            Edge::Left | Edge::Right => py,
                        };
                        let piece = pieces.iter().find(|p| p.start <= s && s <= p.end).ok_or_else(|| {
                            NpnsError::Config(format!(
                                "boundary {}: no piece covers coordinate {s}",
                                edge.name()
                            ))
                        })?;
                        *x = piece.value;
                    }
                }
            }
        }
        BoundarySpec::from_samples(grid, w)
    }

    /// Checks everything that can be checked without solving anything.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.params()?;
        if self.species.is_empty() {
            return Err(NpnsError::Config("at least one species is required".into()));
        }
        let species = self.ion_species()?;
        for s in &species {
            s.validate()?;
        }
        let boundary = self.boundary_spec()?;
        for (k, s) in self.species.iter().enumerate() {
            s.initial.compile()?;
            if !(0.0..1.0).contains(&s.noise) {
                return Err(NpnsError::Config(format!(
                    "species {}: noise must lie in [0, 1)",
                    self.species_name(k)
                )));
            }
        }
        let r = &self.run;
        if !(r.t_end > 0.0 && r.t_end.is_finite()) {
            return Err(NpnsError::Config("run.t_end must be positive".into()));
        }
        if !(r.dt_max > 0.0 && r.dt_max.is_finite()) {
            return Err(NpnsError::Config("run.dt_max must be positive".into()));
        }
        if !(r.cfl_safety > 0.0 && r.cfl_safety <= CFL_SAFETY) {
            return Err(NpnsError::Config(format!(
                "run.cfl_safety must lie in (0, {CFL_SAFETY}]"
            )));
        }
        if r.output_every == 0 {
            return Err(NpnsError::Config("run.output_every must be at least 1".into()));
        }
        let v = &self.velocity;
        if v.stream.is_some() && (v.u.is_some() || v.v.is_some()) {
            return Err(NpnsError::Config(
                "velocity: give either a stream function or components, not both".into(),
            ));
        }
        if self.reference.policy == ReferencePolicy::Explicit {
            if self.reference.z_const.len() != self.species.len() {
                return Err(NpnsError::Config(format!(
                    "reference.z_const needs {} entries",
                    self.species.len()
                )));
            }
            if self.reference.z_const.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
                return Err(NpnsError::Config("reference.z_const entries must be positive".into()));
            }
        }
        self.validate_regime(&grid, &species, &boundary)
    }

    fn validate_regime(&self, grid: &Grid2D, species: &[IonSpecies], w: &BoundarySpec) -> Result<()> {
        let any_selective = species.iter().any(|s| !s.is_blocking());
        match self.boundary_regime {
            BoundaryRegime::Blocking => {
                if any_selective {
                    return Err(NpnsError::Config(
                        "boundary_regime = blocking but some species are selective".into(),
                    ));
                }
            }
            BoundaryRegime::UniformSelective => {
                if !any_selective {
                    return Err(NpnsError::Config(
                        "boundary_regime = uniform-selective needs a selective species".into(),
                    ));
                }
                for (k, s) in species.iter().enumerate() {
                    let crate::fields::Regime::Selective { segments, .. } = &s.regime else {
                        continue;
                    };
                    let mask = s.dirichlet_mask(grid)?;
                    if w.constant_on(&mask).is_none() {
                        // Name the first offending segment.
                        for seg in segments {
                            let m = crate::fields::segment_mask(grid, std::slice::from_ref(seg))?;
                            if w.constant_on(&m).is_none() {
                                return Err(NpnsError::Config(format!(
                                    "species {}: W is not constant on segment {}[{}, {}] \
                                     (uniform-selective requires it)",
                                    self.species_name(k),
                                    seg.edge.name(),
                                    seg.start,
                                    seg.end
                                )));
                            }
                        }
                        return Err(NpnsError::Config(format!(
                            "species {}: W takes different values on its selective segments",
                            self.species_name(k)
                        )));
                    }
                }
            }
            BoundaryRegime::GeneralSelective => {
                if !any_selective {
                    return Err(NpnsError::Config(
                        "boundary_regime = general-selective needs a selective species".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<NpnsModel> {
        NpnsModel::new(self.grid()?, self.params()?, self.ion_species()?, self.boundary_spec()?)
    }

    /// Initial concentrations, velocity and the matching potential, at `t = 0`.
    pub fn initial_state(&self, model: &NpnsModel) -> Result<SimulationState> {
        let grid = model.grid;
        let mut c = Vec::with_capacity(self.species.len());
        for (k, s) in self.species.iter().enumerate() {
            let e = s.initial.compile()?;
            let mut field = ScalarField::from_fn(grid, |x, y| e.eval(x, y));
            if s.noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(k as u64));
                for v in field.values.iter_mut() {
                    *v *= 1.0 + s.noise * rng.gen_range(-1.0..1.0);
                }
            }
            if !field.is_finite() || field.min() <= 0.0 {
                return Err(NpnsError::Config(format!(
                    "species {}: initial concentration must be finite and positive (min {})",
                    self.species_name(k),
                    field.min()
                )));
            }
            c.push(field);
        }
        let velocity = self.initial_velocity(&grid)?;
        let rho = model.charge_density(&c)?;
        let phi = solve_poisson(&PoissonProblem::new(model.params.eps, rho, model.boundary.clone())?)?;
        Ok(SimulationState {
            c,
            phi,
            flow: FlowState {
                velocity,
                pressure: ScalarField::zeros(grid),
            },
            t: 0.0,
        })
    }

    fn initial_velocity(&self, grid: &Grid2D) -> Result<VectorField> {
        let g = *grid;
        let v = &self.velocity;
        if let Some(stream) = &v.stream {
            let psi = stream.compile()?;
            let (hx, hy) = (g.hx(), g.hy());
            // Discrete curl of nodal stream-function values: exactly divergence free.
            let node = |i: usize, j: usize| psi.eval(i as f64 * hx, j as f64 * hy);
            let mut vel = VectorField::zeros(g);
            for j in 0..g.ny {
                for i in 0..=g.nx {
                    vel.u[g.u_idx(i, j)] = (node(i, j + 1) - node(i, j)) / hy;
                }
            }
            for j in 0..=g.ny {
                for i in 0..g.nx {
                    vel.v[g.v_idx(i, j)] = -(node(i + 1, j) - node(i, j)) / hx;
                }
            }
            vel.zero_boundary_faces();
            return project_velocity(vel);
        }
        let fu = v.u.as_ref().map(Scalar::compile).transpose()?;
        let fv = v.v.as_ref().map(Scalar::compile).transpose()?;
        if fu.is_none() && fv.is_none() {
            return Ok(VectorField::zeros(g));
        }
        let mut vel = VectorField::from_fns(
            g,
            |x, y| fu.as_ref().map_or(0.0, |e| e.eval(x, y)),
            |x, y| fv.as_ref().map_or(0.0, |e| e.eval(x, y)),
        );
        vel.zero_boundary_faces();
        project_velocity(vel)
    }

    /// Poisson–Boltzmann problem of the long-time limit: blocking species keep their
    /// initial mass; pinned species use `Z = (γ e^{z w})⁻¹` when `W = w` is constant
    /// on their segments and `Z = 1/γ` otherwise.
    pub fn target_pb_problem(&self, model: &NpnsModel, initial: &SimulationState) -> Result<PbProblem> {
        let masses = initial.masses();
        let species = model
            .species
            .iter()
            .zip(&model.pinned)
            .zip(masses)
            .map(|((s, mask), mass)| match s.gamma() {
                None => PbSpecies::fixed_mass(s.z, mass),
                Some(gamma) => match (self.boundary_regime, model.boundary.constant_on(mask)) {
                    (BoundaryRegime::UniformSelective, Some(w)) => {
                        PbSpecies::fixed_z(s.z, 1.0 / (gamma * (s.z * w).exp()))
                    }
                    _ => PbSpecies::fixed_z(s.z, 1.0 / gamma),
                },
            })
            .collect();
        PbProblem::new(model.params.eps, model.boundary.clone(), species)
    }

    /// Problem defining the energy reference: the target, or explicit `Z_i` for all species.
    pub fn reference_pb_problem(&self, model: &NpnsModel, initial: &SimulationState) -> Result<PbProblem> {
        match self.reference.policy {
            ReferencePolicy::Auto => self.target_pb_problem(model, initial),
            ReferencePolicy::Explicit => PbProblem::new(
                model.params.eps,
                model.boundary.clone(),
                model
                    .species
                    .iter()
                    .zip(&self.reference.z_const)
                    .map(|(s, z)| PbSpecies::fixed_z(s.z, *z))
                    .collect(),
            ),
        }
    }
}
