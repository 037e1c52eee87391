//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//!
//! Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use npns::diagnostics::{check_decay, gronwall_check, l2_distance, reference_invariance_check};
use npns::elliptic::{
    solve_pb, solve_pb_detailed, solve_poisson, InitialGuess, NewtonConfig, Pb1dProblem, Pb1dProfile, PbProblem,
    PbSpecies, PoissonProblem,
};
use npns::flow::ns_step;
use npns::scenario::run::mass_drift;
use npns::scenario::{preset, run_simulation, RunOptions, RunOutcome};
use npns::{BoundarySpec, FlowState, Grid2D, PhysicalParams, ScalarField, VectorField};

const RUNTIME_LIMIT: Duration = Duration::from_secs(300);

struct Line {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn line(id: usize, name: &'static str, passed: bool, detail: String) -> Line {
    Line { id, name, passed, detail }
}

fn failed(id: usize, name: &'static str, err: impl std::fmt::Display) -> Line {
    line(id, name, false, format!("error: {err}"))
}

fn run_preset(name: &str, keep_states: bool) -> npns::Result<RunOutcome> {
    let cfg = preset(name)?;
    run_simulation(
        &cfg,
        &RunOptions {
            out_dir: None,
            keep_states,
        },
    )
}

/// Boltzmann state from the initial masses and the closed-form `W`, solved from a zero guess.
fn independent_target(out: &RunOutcome, w: impl Fn(f64, f64) -> f64, pinned_z: &[Option<f64>]) -> npns::Result<Vec<ScalarField>> {
    let grid = out.model.grid;
    let masses = out.initial_state.masses();
    let species = out
        .model
        .species
        .iter()
        .zip(masses)
        .zip(pinned_z)
        .map(|((s, m), pz)| match pz {
            Some(zc) => PbSpecies::fixed_z(s.z, *zc),
            None => PbSpecies::fixed_mass(s.z, m),
        })
        .collect();
    let prob = PbProblem::new(out.model.params.eps, BoundarySpec::from_fn(grid, w), species)?;
    let cfg = NewtonConfig {
        residual_tol: 1e-11,
        ..NewtonConfig::default()
    }
    .with_guess(InitialGuess::Zero);
    Ok(solve_pb(&prob, &cfg)?.c_star)
}

fn decay_line(id: usize, name: &'static str, out: &RunOutcome) -> Line {
    let d = check_decay(&out.reports);
    let in_time = out.wall_time <= RUNTIME_LIMIT;
    line(
        id,
        name,
        d.passed && in_time,
        format!(
            "{} steps, {} increases beyond 1e-8(1+|E|), largest increase {:.2e}, wall time {:.1?}",
            out.steps.len(),
            d.violations.len(),
            d.max_increase,
            out.wall_time
        ),
    )
}

fn convergence_parts(out: &RunOutcome, c_star: &[ScalarField]) -> (bool, String) {
    let dist: Vec<f64> = out
        .final_state
        .c
        .iter()
        .zip(c_star)
        .map(|(c, cs)| l2_distance(c, cs) / l2_distance(cs, &ScalarField::zeros(cs.grid)))
        .collect();
    let agree = out
        .target
        .c_star
        .iter()
        .zip(c_star)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0_f64, f64::max);
    let worst = dist.iter().cloned().fold(0.0_f64, f64::max);
    let ke = out.final_kinetic_energy();
    (
        worst <= 1e-4 && ke <= 1e-10,
        format!("relative L2 distance {worst:.2e}, kinetic energy {ke:.2e}, PB paths differ by {agree:.1e}"),
    )
}

fn min_concentration(out: &RunOutcome) -> f64 {
    out.steps
        .iter()
        .map(|s| s.min_concentration)
        .fold(out.initial_state.min_concentration(), f64::min)
}

fn blocking_lines(out: npns::Result<RunOutcome>) -> (Vec<Line>, Option<f64>) {
    let out = match out {
        Ok(o) => o,
        Err(e) => {
            return (
                vec![
                    failed(1, "energy decay (blocking)", &e),
                    failed(2, "mass conservation", &e),
                    failed(3, "convergence to Boltzmann state", &e),
                    failed(9, "reference invariance", &e),
                ],
                None,
            )
        }
    };
    let mut lines = vec![decay_line(1, "energy decay (blocking)", &out)];
    let (per_step, whole) = mass_drift(&out);
    lines.push(line(
        2,
        "mass conservation",
        per_step <= 1e-12 && whole <= 1e-9,
        format!("per step {per_step:.2e} (tol 1e-12), whole run {whole:.2e} (tol 1e-9)"),
    ));
    lines.push(match independent_target(&out, |_, y| if y <= 0.0 { 0.0 } else { 0.5 * y }, &[None, None]) {
        Ok(cs) => {
            let (ok, detail) = convergence_parts(&out, &cs);
            line(3, "convergence to Boltzmann state", ok, detail)
        }
        Err(e) => failed(3, "convergence to Boltzmann state", e),
    });
    lines.push(invariance_line(&out));
    (lines, Some(min_concentration(&out)))
}

fn invariance_line(out: &RunOutcome) -> Line {
    let name = "reference invariance";
    let ref_a = &out.reference;
    let species = out
        .model
        .species
        .iter()
        .zip(&ref_a.z_const)
        .map(|(s, z)| PbSpecies::fixed_z(s.z, 2.0 * z))
        .collect();
    let ref_b = match PbProblem::new(out.model.params.eps, out.model.boundary.clone(), species)
        .and_then(|p| solve_pb(&p, &NewtonConfig::default()))
    {
        Ok(r) => r,
        Err(e) => return failed(9, name, e),
    };
    match reference_invariance_check(&out.states, ref_a, &ref_b, &out.model, 1e-8) {
        Ok(r) => line(
            9,
            name,
            r.passed,
            format!(
                "{} snapshots, relative drift of E_A - E_B {:.2e} (tol 1e-8), gap {:.6e} vs closed form {:.6e}",
                r.differences.len(),
                r.relative_drift,
                r.differences[0],
                r.predicted
            ),
        ),
        Err(e) => failed(9, name, e),
    }
}

fn uniform_lines(out: npns::Result<RunOutcome>) -> (Vec<Line>, Option<f64>) {
    let name = "uniform-selective decay and convergence";
    let out = match out {
        Ok(o) => o,
        Err(e) => return (vec![failed(4, name, e)], None),
    };
    let decay = decay_line(4, name, &out);
    // Cation pinned at γ = 1 where W = 0, so Z = 1.
    let conv = independent_target(&out, |_, y| if y <= 0.0 { 0.0 } else { y }, &[Some(1.0), None]);
    let l = match conv {
        Ok(cs) => {
            let (ok, detail) = convergence_parts(&out, &cs);
            line(4, name, decay.passed && ok, format!("{}; {detail}", decay.detail))
        }
        Err(e) => failed(4, name, e),
    };
    (vec![l], Some(min_concentration(&out)))
}

fn general_lines(out: npns::Result<RunOutcome>) -> (Vec<Line>, Option<f64>) {
    let name = "general-selective boundedness";
    let out = match out {
        Ok(o) => o,
        Err(e) => return (vec![failed(12, name, e)], None),
    };
    let times: Vec<f64> = out.reports.iter().map(|r| r.time).collect();
    let values: Vec<f64> = out.reports.iter().map(|r| r.modified_energy.unwrap_or(f64::NAN)).collect();
    let reached = (out.final_state.t - 1.0).abs() < 1e-12;
    let cascade = out.steps.iter().any(|s| s.rejections > 2) || out.rejected_steps * 10 > out.steps.len();
    let l = match gronwall_check(&times, &values, 0.1) {
        Ok(g) => line(
            12,
            name,
            g.passed && reached && !cascade,
            format!(
                "t = {}, {} rejected steps, fitted C = {:.4e}, smallest envelope margin {:.2e}",
                out.final_state.t, out.rejected_steps, g.c, g.min_margin
            ),
        ),
        Err(e) => failed(12, name, e),
    };
    (vec![l], Some(min_concentration(&out)))
}

fn two_species(z1: f64, zc1: f64, z2: f64, zc2: f64) -> Vec<PbSpecies> {
    vec![PbSpecies::fixed_z(z1, zc1), PbSpecies::fixed_z(z2, zc2)]
}

fn pb_uniqueness() -> Line {
    let name = "PB uniqueness";
    let run = || -> npns::Result<(f64, Vec<usize>)> {
        let grid = Grid2D::unit_square(64)?;
        let w = BoundarySpec::from_fn(grid, |x, _| if x < 0.5 { 0.0 } else { 1.5 });
        let prob = PbProblem::new(0.05, w, two_species(1.0, 1.0, -1.0, 3.0))?;
        let base = NewtonConfig {
            residual_tol: 1e-11,
            ..NewtonConfig::default()
        };
        let guesses = [
            InitialGuess::Zero,
            InitialGuess::HarmonicExtension,
            InitialGuess::SmoothPerturbation { seed: 11, amplitude: 4.0 },
        ];
        let mut sols = Vec::new();
        let mut iters = Vec::new();
        for g in guesses {
            let s = solve_pb_detailed(&prob, &base.clone().with_guess(g))?;
            iters.push(s.newton_iterations);
            sols.push(s.state.phi_star);
        }
        let mut worst: f64 = 0.0;
        for a in 0..sols.len() {
            for b in a + 1..sols.len() {
                worst = worst.max(sols[a].max_abs_diff(&sols[b]));
            }
        }
        Ok((worst, iters))
    };
    match run() {
        Ok((d, iters)) => line(
            5,
            name,
            d <= 1e-7,
            format!("3 guesses, pairwise sup difference {d:.2e} (tol 1e-7), Newton iterations {iters:?}"),
        ),
        Err(e) => failed(5, name, e),
    }
}

fn maximum_principle() -> Line {
    let name = "maximum principle";
    let run = || -> npns::Result<(f64, f64, f64)> {
        let grid = Grid2D::unit_square(64)?;
        let w = BoundarySpec::from_fn(grid, |x, y| 3.0 * (2.0 * std::f64::consts::PI * (x + 0.5 * y)).cos());
        // Σ z_i / Z_i = 2/2 - 1/1 = 0.
        let prob = PbProblem::new(0.02, w.clone(), two_species(2.0, 2.0, -1.0, 1.0))?;
        let s = solve_pb(&prob, &NewtonConfig::default())?;
        let h = grid.h_min();
        Ok((s.phi_star.max_abs(), w.max_abs(), 3.0 + 10.0 * h * h))
    };
    match run() {
        Ok((m, wmax, bound)) => line(
            6,
            name,
            m <= bound && wmax <= 3.0,
            format!("max|W| = {wmax:.6}, max|phi*| = {m:.6} <= {bound:.6}"),
        ),
        Err(e) => failed(6, name, e),
    }
}

/// `ε Φ'' = G'(Φ)` integrated by RK4 from `Φ(0) = 0, Φ'(0) = s`.
fn rk4_shoot(prob: &Pb1dProblem, s: f64, n: usize) -> Vec<f64> {
    let g1 = |phi: f64| prob.g_prime(phi) / prob.eps;
    let h = prob.h_len / n as f64;
    let (mut p, mut q) = (0.0_f64, s);
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    for _ in 0..n {
        let (k1p, k1q) = (q, g1(p));
        let (k2p, k2q) = (q + 0.5 * h * k1q, g1(p + 0.5 * h * k1p));
        let (k3p, k3q) = (q + 0.5 * h * k2q, g1(p + 0.5 * h * k2p));
        let (k4p, k4q) = (q + h * k3q, g1(p + h * k3p));
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        out.push(if p.is_finite() { p } else { f64::INFINITY });
        if !p.is_finite() {
            p = f64::INFINITY;
            q = 0.0;
        }
    }
    out
}

fn shooting_oracle(prob: &Pb1dProblem, n: usize) -> Vec<f64> {
    let end = |s: f64| *rk4_shoot(prob, s, n).last().unwrap();
    let (mut lo, mut hi) = (0.0, 1.0);
    while end(hi) < prob.w_val {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if end(mid) < prob.w_val {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rk4_shoot(prob, 0.5 * (lo + hi), n)
}

fn strip_error(profile: &Pb1dProfile, prob: &Pb1dProblem, ny: usize) -> npns::Result<f64> {
    let grid = Grid2D::new(ny / 4, ny, prob.h_len / 4.0, prob.h_len)?;
    let w = BoundarySpec::from_fn(grid, |_, y| profile.eval(y));
    let species = prob.species.iter().map(|&(z, zc)| PbSpecies::fixed_z(z, zc)).collect();
    let pb = PbProblem::new(prob.eps, w, species)?;
    let cfg = NewtonConfig {
        residual_tol: 1e-12,
        ..NewtonConfig::default()
    };
    let s = solve_pb(&pb, &cfg)?;
    let exact = ScalarField::from_fn(grid, |_, y| profile.eval(y));
    Ok(s.phi_star.max_abs_diff(&exact))
}

fn one_d_cross_check() -> Line {
    let name = "1D profile cross-check";
    let run = || -> npns::Result<(f64, Vec<f64>, Vec<f64>)> {
        let problems = [
            Pb1dProblem {
                eps: 0.05,
                h_len: 1.0,
                w_val: 2.0,
                species: vec![(1.0, 1.0), (-1.0, 1.0)],
            },
            Pb1dProblem {
                eps: 0.05,
                h_len: 1.0,
                w_val: 1.0,
                species: vec![(2.0, 2.0), (-1.0, 1.0)],
            },
        ];
        let n = 20_000;
        let mut oracle_err: f64 = 0.0;
        for p in &problems {
            let profile = Pb1dProfile::build(p)?;
            let shot = shooting_oracle(p, n);
            for (k, v) in shot.iter().enumerate() {
                let y = p.h_len * k as f64 / n as f64;
                oracle_err = oracle_err.max((profile.eval(y) - v).abs());
            }
        }
        let strip = Pb1dProblem {
            eps: 0.1,
            h_len: 1.0,
            w_val: 1.0,
            species: vec![(1.0, 1.0), (-1.0, 1.0)],
        };
        let profile = Pb1dProfile::build(&strip)?;
        // The cell-centred Dirichlet closure leaves an O(h³) term that is still visible at ny = 32.
        let errs = [64, 128, 256]
            .iter()
            .map(|&ny| strip_error(&profile, &strip, ny))
            .collect::<npns::Result<Vec<f64>>>()?;
        let ratios = vec![errs[0] / errs[1], errs[1] / errs[2]];
        Ok((oracle_err, errs, ratios))
    };
    match run() {
        Ok((oracle, errs, ratios)) => line(
            7,
            name,
            oracle <= 1e-6 && ratios.iter().all(|r| (3.5..=4.5).contains(r)),
            format!(
                "vs RK4 shooting {oracle:.2e} (tol 1e-6); strip errors {:.2e}/{:.2e}/{:.2e}, ratios {:.3}, {:.3}",
                errs[0], errs[1], errs[2], ratios[0], ratios[1]
            ),
        ),
        Err(e) => failed(7, name, e),
    }
}

fn gradient_annihilation() -> Line {
    let name = "gradient-force annihilation";
    let run = || -> npns::Result<f64> {
        let grid = Grid2D::unit_square(64)?;
        let psi = ScalarField::from_fn(grid, |x, y| 40.0 * (3.0 * x).sin() * (2.0 * y).cos() + 25.0 * x * x * y);
        let mut force = VectorField::gradient_of(&psi);
        force.zero_boundary_faces();
        let params = PhysicalParams::new(0.01, 1.0, 1.0)?;
        let mut flow = FlowState::at_rest(grid);
        for _ in 0..5 {
            flow = ns_step(&flow, &force, &params, 1e-3)?;
        }
        Ok(flow.velocity.max_abs())
    };
    match run() {
        Ok(u) => line(8, name, u <= 1e-12, format!("max|u| after 5 steps {u:.2e} (tol 1e-12)")),
        Err(e) => failed(8, name, e),
    }
}

fn poisson_convergence() -> Line {
    let name = "Poisson manufactured solution";
    let pi = std::f64::consts::PI;
    let eps = 0.3;
    let exact = move |x: f64, y: f64| (x + 0.3).exp() * (pi * y).sin() + x * y * y;
    // -ε Δ of the exact solution.
    let rhs = move |x: f64, y: f64| -eps * ((x + 0.3).exp() * (pi * y).sin() * (1.0 - pi * pi) + 2.0 * x);
    let run = || -> npns::Result<Vec<f64>> {
        [32, 64, 128]
            .iter()
            .map(|&n| {
                let grid = Grid2D::unit_square(n)?;
                let prob = PoissonProblem::new(eps, ScalarField::from_fn(grid, rhs), BoundarySpec::from_fn(grid, exact))?;
                let phi = solve_poisson(&prob)?;
                Ok(phi.max_abs_diff(&ScalarField::from_fn(grid, exact)))
            })
            .collect()
    };
    match run() {
        Ok(e) => {
            let r = [e[0] / e[1], e[1] / e[2]];
            line(
                10,
                name,
                r.iter().all(|v| (3.6..=4.4).contains(v)),
                format!("errors {:.2e}/{:.2e}/{:.2e}, ratios {:.3}, {:.3}", e[0], e[1], e[2], r[0], r[1]),
            )
        }
        Err(e) => failed(10, name, e),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let (blocking, uniform, general, mut lines) = std::thread::scope(|s| {
        let b = s.spawn(|| blocking_lines(run_preset("blocking-relax", true)));
        let u = s.spawn(|| uniform_lines(run_preset("uniform-selective-channel", false)));
        let g = s.spawn(|| general_lines(run_preset("general-selective-patterned", false)));
        let local = vec![
            pb_uniqueness(),
            maximum_principle(),
            one_d_cross_check(),
            gradient_annihilation(),
            poisson_convergence(),
        ];
        (b.join().unwrap(), u.join().unwrap(), g.join().unwrap(), local)
    });
    let mins = [blocking.1, uniform.1, general.1];
    lines.extend(blocking.0);
    lines.extend(uniform.0);
    lines.extend(general.0);
    let positivity = match mins {
        [Some(a), Some(b), Some(c)] => line(
            11,
            "positivity",
            a.min(b).min(c) >= -1e-12,
            format!("min c over accepted steps: blocking {a:.4e}, uniform {b:.4e}, general {c:.4e}"),
        ),
        _ => line(11, "positivity", false, "a preset run failed".into()),
    };
    lines.push(positivity);
    lines.sort_by_key(|l| l.id);

    let mut all = true;
    for l in &lines {
        all &= l.passed;
        println!(
            "criterion {:>2} [{}] {}: {}",
            l.id,
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    println!(
        "{} of {} criteria passed in {:.1?}",
        lines.iter().filter(|l| l.passed).count(),
        lines.len(),
        started.elapsed()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
