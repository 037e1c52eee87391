use crate::error::{NpnsError, Result};
use crate::fields::{
    compute_charge_density, BoundarySpec, EdgeMask, Grid2D, IonSpecies, PhysicalParams,
    ScalarField, VectorField,
};

/// Velocity on MAC faces plus cell-centered pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub velocity: VectorField,
    pub pressure: ScalarField,
}

impl FlowState {
    pub fn at_rest(grid: Grid2D) -> Self {
        Self {
            velocity: VectorField::zeros(grid),
            pressure: ScalarField::zeros(grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub c: Vec<ScalarField>,
    pub phi: ScalarField,
    pub flow: FlowState,
    pub t: f64,
}

impl SimulationState {
    pub fn grid(&self) -> Grid2D {
        self.phi.grid
    }

    pub fn masses(&self) -> Vec<f64> {
        self.c.iter().map(ScalarField::integral).collect()
    }

    pub fn min_concentration(&self) -> f64 {
        self.c.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min)
    }
}

/// Everything that stays fixed during a run: geometry, species, parameters and `W`.
#[derive(Debug, Clone)]
pub struct NpnsModel {
    pub grid: Grid2D,
    pub params: PhysicalParams,
    pub species: Vec<IonSpecies>,
    pub boundary: BoundarySpec,
    /// Faces where each species is pinned to its `gamma`.
    pub pinned: Vec<EdgeMask>,
}

impl NpnsModel {
    pub fn new(
        grid: Grid2D,
        params: PhysicalParams,
        species: Vec<IonSpecies>,
        boundary: BoundarySpec,
    ) -> Result<Self> {
        params.validate()?;
        grid.check_same(&boundary.grid, "model boundary")?;
        if species.is_empty() {
            return Err(NpnsError::InvalidParameter("at least one species is required".into()));
        }
        let mut pinned = Vec::with_capacity(species.len());
        for s in &species {
            s.validate()?;
            pinned.push(s.dirichlet_mask(&grid)?);
        }
        Ok(Self {
            grid,
            params,
            species,
            boundary,
            pinned,
        })
    }

    pub fn charge_density(&self, c: &[ScalarField]) -> Result<ScalarField> {
        compute_charge_density(c, &self.species)
    }

    pub(crate) fn check_state(&self, state: &SimulationState) -> Result<()> {
        if state.c.len() != self.species.len() {
            return Err(NpnsError::Shape(format!(
                "state has {} concentration fields, model has {} species",
                state.c.len(),
                self.species.len()
            )));
        }
        self.grid.check_same(&state.phi.grid, "state potential")?;
        self.grid.check_same(&state.flow.velocity.grid, "state velocity")?;
        for c in &state.c {
            self.grid.check_same(&c.grid, "state concentration")?;
        }
        Ok(())
    }
}
