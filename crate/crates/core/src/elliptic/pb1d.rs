//! Semi-analytic 1D Poisson–Boltzmann profile on `[0, H]` with `Φ(0) = 0`, `Φ(H) = W`.
//!
//! With `G(Φ) = Σ Z_i⁻¹ e^{-z_iΦ}` and neutrality `Σ z_i/Z_i = 0`, the first
//! integral gives `ε Φ'² = 2(G(Φ) - G(0) + α²)`. `α` is fixed by
//! `∫_0^W dΦ / sqrt(G(Φ) - G(0) + α²) = sqrt(2/ε) H` and the profile is
//! `Φ(y) = P⁻¹(sqrt(2/ε) y)` with `P` the same integral up to `Φ`.

use crate::error::{NpnsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pb1dProblem {
    pub eps: f64,
    pub h_len: f64,
    pub w_val: f64,
    /// `(z_i, Z_i)` pairs.
    pub species: Vec<(f64, f64)>,
}

impl Pb1dProblem {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NpnsError::InvalidParameter(m));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.h_len > 0.0 && self.h_len.is_finite()) {
            return bad(format!("interval length must be positive, got {}", self.h_len));
        }
        if !(self.w_val > 0.0 && self.w_val.is_finite()) {
            return bad(format!("boundary value W must be positive, got {}", self.w_val));
        }
        if self.species.iter().any(|&(z, zc)| !(zc > 0.0) || !z.is_finite()) {
            return bad("every Z_i must be positive".into());
        }
        let neutrality: f64 = self.species.iter().map(|(z, zc)| z / zc).sum();
        if neutrality.abs() > 1e-12 {
            return bad(format!("neutrality sum z_i/Z_i = {neutrality:e} is not zero"));
        }
        if self.curvature() <= 0.0 {
            return bad("G''(0) must be positive (need at least one charged species)".into());
        }
        Ok(())
    }

    /// `G''(0) = Σ z_i² / Z_i`.
    fn curvature(&self) -> f64 {
        self.species.iter().map(|(z, zc)| z * z / zc).sum()
    }

    /// `G(Φ) - G(0)` with the linear term (zero by neutrality) removed exactly.
    fn delta_g(&self, phi: f64) -> f64 {
        let mut s = 0.0;
        for &(z, zc) in &self.species {
            let x = -z * phi;
            // e^x - 1 - x
            let q = if x.abs() < 1e-3 {
                x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
            } else {
                x.exp_m1() - x
            };
            s += q / zc;
        }
        s.max(0.0)
    }

    /// `G'(Φ) = -Σ z_i/Z_i e^{-z_iΦ}`.
    pub fn g_prime(&self, phi: f64) -> f64 {
        -self.species.iter().map(|(z, zc)| z / zc * (-z * phi).exp()).sum::<f64>()
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> f64,
    (a, fa): (f64, f64),
    (b, fb): (f64, f64),
    (m, fm): (f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson_rec(f, (a, fa), (m, fm), (lm, flm), left, 0.5 * tol, depth - 1)
        + adaptive_simpson_rec(f, (m, fm), (b, fb), (rm, frm), right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    adaptive_simpson_rec(&f, (a, fa), (b, fb), (m, fm), whole, tol, 40)
}

const QUAD_TOL: f64 = 1e-10;
const N_SAMPLES: usize = 4000;

/// The constructed profile; evaluate anywhere on `[0, H]` with [`Pb1dProfile::eval`].
#[derive(Debug, Clone)]
pub struct Pb1dProfile {
    pub alpha: f64,
    scale: f64,
    h_len: f64,
    w_val: f64,
    p: Vec<f64>,
    phi: Vec<f64>,
    slope: Vec<f64>,
}

/// Substitution `Φ = (α/k) sinh s`, `k = sqrt(G''(0)/2)`, which removes the
/// near-singularity of the integrand at `Φ = 0` when `α` is small.
struct Substitution<'a> {
    prob: &'a Pb1dProblem,
    alpha: f64,
    k: f64,
}

impl Substitution<'_> {
    fn phi(&self, s: f64) -> f64 {
        self.alpha / self.k * s.sinh()
    }

    fn s_of(&self, phi: f64) -> f64 {
        (phi * self.k / self.alpha).asinh()
    }

    fn integrand(&self, s: f64) -> f64 {
        let phi = self.phi(s);
        self.alpha / self.k * s.cosh() / (self.prob.delta_g(phi) + self.alpha * self.alpha).sqrt()
    }

    fn integral(&self, upper_phi: f64) -> f64 {
        adaptive_simpson(|s| self.integrand(s), 0.0, self.s_of(upper_phi), QUAD_TOL)
    }
}

impl Pb1dProfile {
    pub fn build(prob: &Pb1dProblem) -> Result<Self> {
        prob.validate()?;
        let k = (0.5 * prob.curvature()).sqrt();
        let target = (2.0 / prob.eps).sqrt() * prob.h_len;
        let integral_at = |log_alpha: f64| {
            Substitution {
                prob,
                alpha: 10f64.powf(log_alpha),
                k,
            }
            .integral(prob.w_val)
        };
        let (mut lo, mut hi) = (-12.0_f64, 6.0_f64);
        let (i_lo, i_hi) = (integral_at(lo), integral_at(hi));
        if !(i_lo >= target && i_hi <= target) {
            return Err(NpnsError::Bracket {
                at_low: i_lo,
                at_high: i_hi,
                target,
            });
        }
        // The integral decreases in alpha.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if integral_at(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let alpha = 10f64.powf(0.5 * (lo + hi));
        let sub = Substitution { prob, alpha, k };
        let s_max = sub.s_of(prob.w_val);

        let mut p = Vec::with_capacity(N_SAMPLES + 1);
        let mut phi = Vec::with_capacity(N_SAMPLES + 1);
        let mut slope = Vec::with_capacity(N_SAMPLES + 1);
        let mut acc = 0.0;
        let ds = s_max / N_SAMPLES as f64;
        for n in 0..=N_SAMPLES {
            let s = n as f64 * ds;
            if n > 0 {
                acc += adaptive_simpson(|t| sub.integrand(t), s - ds, s, QUAD_TOL / N_SAMPLES as f64);
            }
            let ph = if n == N_SAMPLES { prob.w_val } else { sub.phi(s) };
            p.push(acc);
            phi.push(ph);
            slope.push((prob.delta_g(ph) + alpha * alpha).sqrt());
        }
        Ok(Self {
            alpha,
            scale: (2.0 / prob.eps).sqrt(),
            h_len: prob.h_len,
            w_val: prob.w_val,
            p,
            phi,
            slope,
        })
    }

    /// `Φ*(y)`, by monotone cubic Hermite interpolation of `P⁻¹`.
    pub fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= self.h_len {
            return self.w_val;
        }
        let target = self.scale * y;
        let n = self.p.len();
        if target >= self.p[n - 1] {
            return self.w_val;
        }
        let k = self.p.partition_point(|&v| v <= target).clamp(1, n - 1) - 1;
        let (p0, p1) = (self.p[k], self.p[k + 1]);
        let (f0, f1) = (self.phi[k], self.phi[k + 1]);
        let h = p1 - p0;
        if h <= 0.0 {
            return f0;
        }
        let secant = (f1 - f0) / h;
        let (mut m0, mut m1) = (self.slope[k], self.slope[k + 1]);
        // Fritsch–Carlson limiter.
        let (a, b) = (m0 / secant, m1 / secant);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m0 *= tau;
            m1 *= tau;
        }
        let t = (target - p0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * h * m1
    }
}

/// Samples the profile at `n_out` equispaced points of `[0, H]` (both ends included).
pub fn solve_pb_1d(prob: &Pb1dProblem, n_out: usize) -> Result<Vec<(f64, f64)>> {
    if n_out < 2 {
        return Err(NpnsError::InvalidParameter("n_out must be at least 2".into()));
    }
    let profile = Pb1dProfile::build(prob)?;
    Ok((0..n_out)
        .map(|k| {
            let y = prob.h_len * k as f64 / (n_out - 1) as f64;
            (y, profile.eval(y))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric(w: f64) -> Pb1dProblem {
        Pb1dProblem {
            eps: 1.0,
            h_len: 1.0,
            w_val: w,
            species: vec![(1.0, 1.0), (-1.0, 1.0)],
        }
    }

    #[test]
    fn endpoints_match_boundary_values() {
        let prof = solve_pb_1d(&symmetric(1.0), 11).unwrap();
        assert_eq!(prof[0], (0.0, 0.0));
        assert!((prof[10].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_boundary_value_gives_vanishing_profile() {
        let prof = solve_pb_1d(&symmetric(1e-8), 21).unwrap();
        assert!(prof.iter().all(|(_, p)| p.abs() <= 1e-7));
    }

    #[test]
    fn small_boundary_value_is_nearly_linear_debye_profile() {
        // Linearized: Φ'' = 2Φ, Φ = W sinh(√2 y)/sinh(√2).
        let w = 1e-4;
        let profile = Pb1dProfile::build(&symmetric(w)).unwrap();
        for k in 0..=10 {
            let y = k as f64 / 10.0;
            let lin = w * (2f64.sqrt() * y).sinh() / 2f64.sqrt().sinh();
            assert!((profile.eval(y) - lin).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn rejects_non_neutral_species() {
        let mut p = symmetric(1.0);
        p.species = vec![(1.0, 1.0), (-1.0, 2.0)];
        assert!(Pb1dProfile::build(&p).is_err());
        let mut p = symmetric(1.0);
        p.w_val = -1.0;
        assert!(Pb1dProfile::build(&p).is_err());
    }

    #[test]
    fn bracket_failure_is_reported() {
        // A target this large needs alpha below 1e-12.
        let p = Pb1dProblem {
            eps: 1e-6,
            h_len: 50.0,
            w_val: 1.0,
            species: vec![(1.0, 1.0), (-1.0, 1.0)],
        };
        assert!(matches!(Pb1dProfile::build(&p), Err(NpnsError::Bracket { .. })));
    }

    #[test]
    fn adaptive_simpson_integrates_polynomials_and_exponentials() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-11);
    }
}
