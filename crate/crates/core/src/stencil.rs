//! Five-point cell-centered stencils shared by the elliptic, transport and flow solvers.
//!
//! Boundary faces are either Dirichlet (ghost value `2g - x_adjacent`, so the face
//! value is exactly `g`) or homogeneous Neumann (no face contribution).

use crate::fields::{Edge, EdgeData, EdgeMask, Grid2D};
use crate::linalg::LinearOperator;

/// `y = -Δ_h x` with homogeneous ghosts on the Dirichlet faces of `dirichlet`.
pub fn neg_laplacian(grid: &Grid2D, dirichlet: &EdgeMask, x: &[f64], y: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let ax = 1.0 / (grid.hx() * grid.hx());
    let ay = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = x[k];
            let mut s = 0.0;
            if i > 0 {
                s += ax * (c - x[k - 1]);
            } else if dirichlet.left[j] {
                s += 2.0 * ax * c;
            }
            if i + 1 < nx {
                s += ax * (c - x[k + 1]);
            } else if dirichlet.right[j] {
                s += 2.0 * ax * c;
            }
            if j > 0 {
                s += ay * (c - x[k - nx]);
            } else if dirichlet.bottom[i] {
                s += 2.0 * ay * c;
            }
            if j + 1 < ny {
                s += ay * (c - x[k + nx]);
            } else if dirichlet.top[i] {
                s += 2.0 * ay * c;
            }
            y[k] = s;
        }
    }
}

/// Diagonal of the `neg_laplacian` matrix.
pub fn neg_laplacian_diagonal(grid: &Grid2D, dirichlet: &EdgeMask) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let ax = 1.0 / (grid.hx() * grid.hx());
    let ay = 1.0 / (grid.hy() * grid.hy());
    let mut d = vec![0.0; grid.n_cells()];
    for j in 0..ny {
        for i in 0..nx {
            let mut s = 0.0;
            s += if i > 0 { ax } else if dirichlet.left[j] { 2.0 * ax } else { 0.0 };
            s += if i + 1 < nx { ax } else if dirichlet.right[j] { 2.0 * ax } else { 0.0 };
            s += if j > 0 { ay } else if dirichlet.bottom[i] { 2.0 * ay } else { 0.0 };
            s += if j + 1 < ny { ay } else if dirichlet.top[i] { 2.0 * ay } else { 0.0 };
            d[j * nx + i] = s;
        }
    }
    d
}

/// Right-hand-side contribution of inhomogeneous Dirichlet data: with it,
/// `-Δ_h x = neg_laplacian(x) - dirichlet_lift(g)`.
pub fn dirichlet_lift(grid: &Grid2D, dirichlet: &EdgeMask, values: &EdgeData<f64>) -> Vec<f64> {
    let ax = 1.0 / (grid.hx() * grid.hx());
    let ay = 1.0 / (grid.hy() * grid.hy());
    let mut b = vec![0.0; grid.n_cells()];
    for (edge, k, &on) in dirichlet.iter() {
        if !on {
            continue;
        }
        let coef = match edge {
            Edge::Bottom | Edge::Top => 2.0 * ay,
            Edge::Left | Edge::Right => 2.0 * ax,
        };
        b[edge.adjacent_cell(grid, k)] += coef * values.edge(edge)[k];
    }
    b
}

/// `coef * (-Δ_h) + diag(shift)` with homogeneous Dirichlet/Neumann faces.
pub struct ShiftedLaplacian<'a> {
    pub grid: Grid2D,
    pub dirichlet: &'a EdgeMask,
    pub coef: f64,
    pub shift: Shift<'a>,
}

pub enum Shift<'a> {
    None,
    Uniform(f64),
    Field(&'a [f64]),
}

impl ShiftedLaplacian<'_> {
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let mut d = neg_laplacian_diagonal(&self.grid, self.dirichlet);
        for (k, dk) in d.iter_mut().enumerate() {
            *dk *= self.coef;
            *dk += match self.shift {
                Shift::None => 0.0,
                Shift::Uniform(s) => s,
                Shift::Field(f) => f[k],
            };
            *dk = if *dk > 0.0 { 1.0 / *dk } else { 1.0 };
        }
        d
    }
}

impl LinearOperator for ShiftedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.grid.n_cells()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        neg_laplacian(&self.grid, self.dirichlet, x, y);
        match self.shift {
            Shift::None => y.iter_mut().for_each(|v| *v *= self.coef),
            Shift::Uniform(s) => y
                .iter_mut()
                .zip(x)
                .for_each(|(v, xi)| *v = self.coef * *v + s * xi),
            Shift::Field(f) => y
                .iter_mut()
                .zip(x)
                .zip(f)
                .for_each(|((v, xi), fi)| *v = self.coef * *v + fi * xi),
        }
    }
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`; zero if either argument is nonpositive.
///
/// Face concentrations built from it make `c_face * δ(log c) = δc` hold exactly.
#[inline]
pub fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let s = a + b;
    let x = (a - b) / s;
    if x.abs() < 1e-2 {
        let x2 = x * x;
        0.5 * s / (1.0 + x2 * (1.0 / 3.0 + x2 * (1.0 / 5.0 + x2 / 7.0)))
    } else {
        (a - b) / (a / b).ln()
    }
}
