use crate::error::{NpnsError, Result};

/// Uniform cell-centered grid on the rectangle `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(NpnsError::InvalidParameter(format!(
                "grid needs at least 4 cells per direction, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(NpnsError::InvalidParameter(format!(
                "domain lengths must be positive, got lx={lx}, ly={ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Row-major cell index (x fastest).
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }

    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy()
    }

    /// Number of u-faces (vertical faces), `(nx + 1) * ny`.
    #[inline]
    pub fn n_u_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    /// Number of v-faces (horizontal faces), `nx * (ny + 1)`.
    #[inline]
    pub fn n_v_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn u_idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn v_idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub(crate) fn check_same(&self, other: &Grid2D, what: &str) -> Result<()> {
        if self != other {
            return Err(NpnsError::Shape(format!(
                "{what}: grid {}x{} does not match {}x{}",
                other.nx, other.ny, self.nx, self.ny
            )));
        }
        Ok(())
    }
}

/// One value per cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(NpnsError::Shape(format!(
                "expected {} cell values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            let y = grid.y_center(j);
            for i in 0..grid.nx {
                values.push(f(grid.x_center(i), y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cell-measure quadrature of the field.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete L2 norm with cell-measure weights.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(&other.grid, "field subtraction")?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Staggered (MAC) face field: `u` on vertical faces, `v` on horizontal faces.
///
/// `u[j * (nx + 1) + i]` lives at `(i * hx, (j + 1/2) * hy)`,
/// `v[j * nx + i]` at `((i + 1/2) * hx, j * hy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid2D,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            u: vec![0.0; grid.n_u_faces()],
            v: vec![0.0; grid.n_v_faces()],
        }
    }

    pub fn from_components(grid: Grid2D, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != grid.n_u_faces() || v.len() != grid.n_v_faces() {
            return Err(NpnsError::Shape(format!(
                "face field needs {} u and {} v entries, got {} and {}",
                grid.n_u_faces(),
                grid.n_v_faces(),
                u.len(),
                v.len()
            )));
        }
        Ok(Self { grid, u, v })
    }

    /// Samples component functions at the face centers.
    pub fn from_fns(grid: Grid2D, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                out.u[grid.u_idx(i, j)] = fu(i as f64 * hx, (j as f64 + 0.5) * hy);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                out.v[grid.v_idx(i, j)] = fv((i as f64 + 0.5) * hx, j as f64 * hy);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Discrete divergence per cell.
    pub fn divergence(&self) -> ScalarField {
        let g = self.grid;
        let (hx, hy) = (g.hx(), g.hy());
        let mut out = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.values[g.idx(i, j)] = (self.u[g.u_idx(i + 1, j)] - self.u[g.u_idx(i, j)]) / hx
                    + (self.v[g.v_idx(i, j + 1)] - self.v[g.v_idx(i, j)]) / hy;
            }
        }
        out
    }

    /// Zeroes every face on the domain boundary.
    pub fn zero_boundary_faces(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.u[g.u_idx(0, j)] = 0.0;
            self.u[g.u_idx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.v[g.v_idx(i, 0)] = 0.0;
            self.v[g.v_idx(i, g.ny)] = 0.0;
        }
    }

    /// Discrete gradient of a cell field on interior faces; boundary faces are zero.
    pub fn gradient_of(field: &ScalarField) -> Self {
        let g = field.grid;
        let (hx, hy) = (g.hx(), g.hy());
        let mut out = Self::zeros(g);
        for j in 0..g.ny {
            for i in 1..g.nx {
                out.u[g.u_idx(i, j)] = (field.at(i, j) - field.at(i - 1, j)) / hx;
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                out.v[g.v_idx(i, j)] = (field.at(i, j) - field.at(i, j - 1)) / hy;
            }
        }
        out
    }
}
