use super::boundary::{segment_mask, BoundarySegment, EdgeMask};
use super::grid::Grid2D;
use crate::error::{NpnsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    /// Zero normal flux on the whole boundary.
    Blocking,
    /// Concentration pinned to `gamma` on `segments`, zero flux elsewhere.
    Selective {
        gamma: f64,
        segments: Vec<BoundarySegment>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub name: String,
    /// Valence; any real value.
    pub z: f64,
    /// Diffusivity, strictly positive.
    pub d: f64,
    pub regime: Regime,
}

impl IonSpecies {
    pub fn blocking(name: impl Into<String>, z: f64, d: f64) -> Self {
        Self {
            name: name.into(),
            z,
            d,
            regime: Regime::Blocking,
        }
    }

    pub fn selective(
        name: impl Into<String>,
        z: f64,
        d: f64,
        gamma: f64,
        segments: Vec<BoundarySegment>,
    ) -> Self {
        Self {
            name: name.into(),
            z,
            d,
            regime: Regime::Selective { gamma, segments },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.z.is_finite() {
            return Err(NpnsError::InvalidParameter(format!(
                "species {}: valence must be finite",
                self.name
            )));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(NpnsError::InvalidParameter(format!(
                "species {}: diffusivity must be positive, got {}",
                self.name, self.d
            )));
        }
        if let Regime::Selective { gamma, segments } = &self.regime {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(NpnsError::InvalidParameter(format!(
                    "species {}: selective gamma must be positive, got {gamma}",
                    self.name
                )));
            }
            if segments.is_empty() {
                return Err(NpnsError::InvalidParameter(format!(
                    "species {}: selective regime needs at least one segment",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn is_blocking(&self) -> bool {
        matches!(self.regime, Regime::Blocking)
    }

    pub fn gamma(&self) -> Option<f64> {
        match &self.regime {
            Regime::Blocking => None,
            Regime::Selective { gamma, .. } => Some(*gamma),
        }
    }

    /// Faces where the concentration is pinned (all false for blocking species).
    pub fn dirichlet_mask(&self, grid: &Grid2D) -> Result<EdgeMask> {
        match &self.regime {
            Regime::Blocking => Ok(EdgeMask::filled(grid, false)),
            Regime::Selective { segments, .. } => segment_mask(grid, segments),
        }
    }
}

/// Dielectric coefficient, kinematic viscosity and thermal energy factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub eps: f64,
    pub nu: f64,
    pub kbt: f64,
}

impl PhysicalParams {
    pub fn new(eps: f64, nu: f64, kbt: f64) -> Result<Self> {
        let p = Self { eps, nu, kbt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps", self.eps), ("nu", self.nu), ("kbt", self.kbt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(NpnsError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Debye length for a reference bulk concentration `c0`.
    pub fn debye_length(&self, c0: f64, valences: &[f64]) -> f64 {
        let zsq: f64 = valences.iter().map(|z| z * z).sum();
        (self.eps / (c0 * zsq)).sqrt()
    }
}
