//! Matrix-free conjugate gradients for the symmetric positive (semi)definite
//! systems that appear in every solver of the crate.

use crate::error::{NpnsError, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct CgSettings {
    /// Stop once `||r||_2 <= rel_tol * ||b||_2` ...
    pub rel_tol: f64,
    /// ... or `||r||_2 <= abs_tol`.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Keep iterates orthogonal to constants (singular Neumann problems).
    pub project_constants: bool,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_iter: 20_000,
            project_constants: false,
        }
    }
}

impl CgSettings {
    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn with_abs_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn singular(mut self) -> Self {
        self.project_constants = true;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Preconditioned CG. `x` holds the initial guess on entry and the solution on exit.
/// `inv_diag`, when given, is the Jacobi preconditioner `1 / diag(A)`.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    inv_diag: Option<&[f64]>,
    settings: &CgSettings,
) -> Result<CgOutcome> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let mut rhs = b.to_vec();
    if settings.project_constants {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let b_norm = dot(&rhs, &rhs).sqrt();
    let target = (settings.rel_tol * b_norm).max(settings.abs_tol);

    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri = bi - *ri;
    }
    if settings.project_constants {
        remove_mean(&mut r);
    }
    let mut r_norm = dot(&r, &r).sqrt();
    if r_norm <= target || b_norm == 0.0 && r_norm == 0.0 {
        return Ok(CgOutcome {
            iterations: 0,
            residual_norm: r_norm,
        });
    }

    let precondition = |r: &[f64], z: &mut [f64]| match inv_diag {
        Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((zi, ri), di)| *zi = ri * di),
        None => z.copy_from_slice(r),
    };

    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    if settings.project_constants {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for it in 1..=settings.max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // Exhausted the Krylov space or lost definiteness to rounding.
            if r_norm <= target * 10.0 {
                return Ok(CgOutcome {
                    iterations: it,
                    residual_norm: r_norm,
                });
            }
            return Err(NpnsError::SolverDivergence {
                solver: "conjugate gradient",
                iterations: it,
                residual: r_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if settings.project_constants {
            remove_mean(&mut r);
        }
        r_norm = dot(&r, &r).sqrt();
        if r_norm <= target {
            if settings.project_constants {
                remove_mean(x);
            }
            return Ok(CgOutcome {
                iterations: it,
                residual_norm: r_norm,
            });
        }
        precondition(&r, &mut z);
        if settings.project_constants {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(NpnsError::SolverDivergence {
        solver: "conjugate gradient",
        iterations: settings.max_iter,
        residual: r_norm,
    })
}
