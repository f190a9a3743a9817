//! Acceptance suite for the two-state example. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use lipstab::certificate::{max_level, verify_certificate, StabilityCertificate};
use lipstab::conic::{logdet_maximize, solve, sym_matrix_var, Affine, LinearConstraint, Objective, SdpProblem, SdpStatus};
use lipstab::model::{linearize, SafePolytope, VanDerPol};
use lipstab::policy::{lipschitz_upper_bound, train, Mlp, PerturbedFeedback, TrainConfig, TrainOutput, TrainSetup};
use lipstab::sector::{npv_jacobians, uncertainty_vertices, ControlBox, SectorBound};
use lipstab::sim::{
    integrate_held, lqr_gain, max_lyapunov_increase, monte_carlo_eval, rk4_rollout, run_rng, Ellipsoid, LinearFeedback,
    ParamSampler, Policy, RolloutSpec,
};
use lipstab::synthesis::{synthesize, SynthesisConfig, SynthesisResult};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Fixture {
    synthesis: SynthesisResult,
    certificate: StabilityCertificate,
    sector: SectorBound,
    training: TrainOutput,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let safe = VanDerPol::safe_polytope();
        let params = VanDerPol::param_box();
        let synthesis = synthesize(&VanDerPol, &params, &safe, &SynthesisConfig::default()).expect("synthesis runs");
        let certificate = synthesis.certificate().expect("at least one feasible iteration");
        let sector = synthesis.sector.clone().expect("sector of the final iterate");
        let setup = TrainSetup {
            model: &VanDerPol,
            certificate: &certificate,
            sector: &sector,
            safe: &safe,
            params: &params,
            reward: &VanDerPol::reward,
        };
        let training = train(&setup, &TrainConfig::example(certificate.lipschitz)).expect("training runs");
        Fixture { synthesis, certificate, sector, training }
    })
}

type Outcome = (bool, String);

fn check(ok: bool, what: String, failures: &mut Vec<String>) {
    if !ok {
        failures.push(what);
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        (true, summary)
    } else {
        (false, format!("{summary}; {}", failures.join("; ")))
    }
}

fn linearization() -> Outcome {
    let lin = linearize(&VanDerPol, &[0.0, 0.0]).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, -1.0]);
    let err = (&lin.a - a).amax().max((&lin.b - DMatrix::<f64>::identity(2, 2)).amax());
    (err <= 1e-12, format!("max deviation {err:e}"))
}

fn uncertainty_vertex_pairs() -> Outcome {
    let v = uncertainty_vertices(&VanDerPol, &VanDerPol::param_box(), 1e-3).unwrap();
    let mut failures = Vec::new();
    check(v.len() == 4, format!("{} vertices", v.len()), &mut failures);
    // A_θ = [[0, −(1+θ₁)], [1, (1+θ₂)(x₁²−1)]] at x = 0: entries (0,1) and (1,1) vary
    let mut seen = Vec::new();
    for vert in &v.vertices {
        let a01 = vert.a[(0, 1)];
        let a11 = vert.a[(1, 1)];
        let near = |x: f64, a: f64, b: f64| (x - a).abs() <= 0.002 || (x - b).abs() <= 0.002;
        check(near(a01, -1.05, -0.95), format!("a01 = {a01}"), &mut failures);
        check(near(a11, -1.1, -0.9), format!("a11 = {a11}"), &mut failures);
        check(vert.a[(0, 0)] == 0.0 && vert.a[(1, 0)] == 1.0, "fixed entries changed".into(), &mut failures);
        check((&vert.b - DMatrix::<f64>::identity(2, 2)).amax() == 0.0, "B differs from I".into(), &mut failures);
        seen.push(((a01 + 1.0).signum(), (a11 + 1.0).signum()));
    }
    seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seen.dedup();
    check(seen.len() == 4, "vertices do not cover all four sign patterns".into(), &mut failures);
    verdict(failures, format!("{} vertex pairs", v.len()))
}

fn sample_in_polytope<R: Rng>(safe: &SafePolytope, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = safe.bounding_box();
    loop {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| rng.random_range(l..=h)).collect();
        if safe.contains(&x, 0.0) {
            return x;
        }
    }
}

fn sector_soundness() -> Outcome {
    let f = fixture();
    let cert = &f.certificate;
    let safe = VanDerPol::safe_polytope().scaled(cert.scale).unwrap();
    let params = VanDerPol::param_box();
    let ubox = ControlBox::new(cert.lipschitz, &safe, 2).unwrap();
    let lin0 = linearize(&VanDerPol, &[0.0, 0.0]).unwrap();
    let a0k = lin0.closed_loop(&cert.gain).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let x = sample_in_polytope(&safe, &mut rng);
        let u: Vec<f64> = ubox.bounds().iter().map(|&m| rng.random_range(-m..=m)).collect();
        let th: Vec<f64> = params.lower().iter().zip(params.upper()).map(|(&l, &h)| rng.random_range(l..=h)).collect();
        let (jx, ju) = npv_jacobians(&VanDerPol, &cert.gain, &a0k, &x, &u, &th).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                let v = if j < 2 { jx[(i, j)] } else { ju[(i, j - 2)] };
                let e = f.sector.entry(i, j);
                worst = worst.max(e.lo() - v).max(v - e.hi());
            }
        }
    }
    let e01 = f.sector.entry(0, 1);
    let closed_form = (e01.lo() + 0.05).abs() <= 0.002 && (e01.hi() - 0.05).abs() <= 0.002;
    (
        worst <= 1e-3 && closed_form,
        format!("worst excursion {worst:.3e}, x-block (1,2) = [{:.5}, {:.5}]", e01.lo(), e01.hi()),
    )
}

fn synthesis_on_example() -> Outcome {
    let f = fixture();
    let s = &f.synthesis;
    let safe = VanDerPol::safe_polytope();
    let mut failures = Vec::new();
    check(s.successful_steps == 20, format!("{} feasible iterations", s.successful_steps), &mut failures);
    check(s.lipschitz == 1.1, format!("L* = {}", s.lipschitz), &mut failures);
    let valid = verify_certificate(&VanDerPol, &f.certificate, &f.sector, &safe).unwrap().is_valid();
    check(valid, "certificate rejected".into(), &mut failures);
    let domain = safe.scaled(s.scale).unwrap();
    let inside = s.level <= max_level(&s.p, &domain).unwrap() * (1.0 + 1e-12);
    check(inside, "ellipsoid leaves the domain".into(), &mut failures);
    check((0.2..=0.45).contains(&s.level), format!("sigma* = {} outside [0.2, 0.45]", s.level), &mut failures);
    verdict(failures, format!("L* = {}, sigma* = {:.4} (reference 0.3272), certificate valid = {valid}", s.lipschitz, s.level))
}

fn eigenvalue_migration() -> Outcome {
    let log = &fixture().synthesis.log;
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let first = sorted(&log[0].eig_real);
    let last = sorted(&log.iter().rev().find(|r| r.feasible).unwrap().eig_real);
    let ok = first.iter().zip(&last).all(|(a, b)| *b <= a - 0.1);
    (ok, format!("real parts {first:.4?} at k=1 -> {last:.4?} at k_final"))
}

fn lqr_baseline() -> Outcome {
    let lin = linearize(&VanDerPol, &[0.0, 0.0]).unwrap();
    let eye = DMatrix::<f64>::identity(2, 2);
    let (k, p) = lqr_gain(&lin.a, &lin.b, &eye, &eye).unwrap();
    let reference = DMatrix::from_row_slice(2, 2, &[-0.8350, 0.1414, 0.1414, -0.5043]);
    let dev = (&k - reference).amax();
    let residual = (lin.a.transpose() * &p + &p * &lin.a - &p * &lin.b * lin.b.transpose() * &p + &eye).amax();
    (dev <= 1e-2 && residual <= 1e-8, format!("max deviation {dev:.2e}, CARE residual {residual:.2e}"))
}

fn closed_loop_consequences() -> Outcome {
    let f = fixture();
    let cert = &f.certificate;
    let safe = VanDerPol::safe_polytope();
    let init = Ellipsoid::new(cert.p.clone(), cert.level).unwrap();
    let sampler = ParamSampler::UniformIid(VanDerPol::param_box());
    let spec = RolloutSpec { steps: 200, tau: 0.1, substeps: 10 };
    let nominal = PerturbedFeedback { gain: cert.gain.clone(), actor: None };
    let trained = PerturbedFeedback { gain: cert.gain.clone(), actor: Some(f.training.actor.clone()) };
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for (name, policy) in [("zero perturbation", &nominal), ("trained", &trained)] {
        let (mut exits, mut increases, mut far) = (0, 0, 0);
        let mut worst_final: f64 = 0.0;
        for run in 0..100 {
            let mut rng = run_rng(99, run);
            let x0 = init.sample(&mut rng);
            let t = rk4_rollout(&VanDerPol, policy, &x0, &sampler, &mut rng, spec, &VanDerPol::reward).unwrap();
            exits += t.states.iter().filter(|x| !safe.contains(x.as_slice(), 1e-12)).count();
            if t.diverged || max_lyapunov_increase(&t, &cert.p) > 1e-12 {
                increases += 1;
            }
            let fin = t.final_state().amax();
            worst_final = worst_final.max(fin);
            if t.diverged || t.len() != 200 || fin > 1e-2 {
                far += 1;
            }
        }
        check(exits == 0 && increases == 0 && far == 0, format!("{name}: {exits} exits, {increases} increases, {far} not converged"), &mut failures);
        detail.push(format!("{name}: max |x(20s)|inf = {worst_final:.2e}"));
    }
    verdict(failures, detail.join(", "))
}

fn training_constraint() -> Outcome {
    let log = &fixture().training.log;
    let worst = log.iter().map(|r| r.lipschitz).fold(f64::NEG_INFINITY, f64::max);
    let last = lipschitz_upper_bound(&fixture().training.actor);
    (
        log.len() == 600 && worst <= 1.1,
        format!("{} updates, max bound {worst} (final {last:.4}, reference 0.8218)", log.len()),
    )
}

fn utility_comparison() -> Outcome {
    let f = fixture();
    let cert = &f.certificate;
    let lin = linearize(&VanDerPol, &[0.0, 0.0]).unwrap();
    let eye = DMatrix::<f64>::identity(2, 2);
    let lqr = LinearFeedback(lqr_gain(&lin.a, &lin.b, &eye, &eye).unwrap().0);
    let trained = PerturbedFeedback { gain: cert.gain.clone(), actor: Some(f.training.actor.clone()) };
    let policies: [(&str, &dyn Policy); 2] = [("trained", &trained), ("lqr", &lqr)];
    let init = Ellipsoid::new(cert.p.clone(), cert.level).unwrap();
    let sampler = ParamSampler::UniformIid(VanDerPol::param_box());
    let spec = RolloutSpec { steps: 200, tau: 0.1, substeps: 10 };
    let ev = monte_carlo_eval(&VanDerPol, &policies, 40, &init, &sampler, spec, 7, &VanDerPol::reward).unwrap();
    let t = ev[0].stats.unwrap().median;
    let l = ev[1].stats.unwrap().median;
    // utilities are negative: "at least 95% as good" means within 5% of |J_lqr| below it
    let intent = t >= l - 0.05 * l.abs();
    let literal = t >= 0.95 * l;
    (
        intent,
        format!(
            "median trained {t:.5}, LQR {l:.5}, improvement {:.2}%; literal 0.95 x LQR check {}",
            (t - l) / l.abs() * 100.0,
            if literal { "holds" } else { "fails" }
        ),
    )
}

fn random_net(seed: u64) -> Mlp {
    Mlp::random(&[2, 5, 2], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn max_fd_error(net: &Mlp, f: impl Fn(&Mlp) -> f64, grad: &[f64]) -> f64 {
    let p0 = net.params();
    let mut worst: f64 = 0.0;
    for i in 0..p0.len() {
        let h = 1e-6;
        let eval = |d: f64| {
            let mut p = p0.clone();
            p[i] += d;
            let mut n = net.clone();
            n.set_params(&p).unwrap();
            f(&n)
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1e-3));
    }
    worst
}

fn numerical_kernels() -> Outcome {
    let mut failures = Vec::new();
    let mut detail = Vec::new();

    // RK4 order
    let decay = lipstab::model::LinearPlant::fixed(DMatrix::from_element(1, 1, -1.0), DMatrix::zeros(1, 1)).unwrap();
    let err = |tau: f64| {
        let mut x = DVector::from_element(1, 1.0);
        for _ in 0..(1.0 / tau).round() as usize {
            x = integrate_held(&decay, &x, &[0.0], &[0.0], tau, 1);
        }
        (x[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    check((14.0..=18.0).contains(&ratio), format!("RK4 ratio {ratio}"), &mut failures);
    detail.push(format!("RK4 ratio {ratio:.2}"));

    // MLP gradients: actor log-density and critic value
    let mut worst_grad: f64 = 0.0;
    for seed in 0..5 {
        let actor = random_net(seed);
        let (x, u, var) = ([0.21, -0.13], [0.3, -0.2], [0.0225, 0.0225]);
        let mean = actor.forward(&x).unwrap();
        let score: Vec<f64> = (0..2).map(|i| (u[i] - mean[i]) / var[i]).collect();
        let g = actor.param_gradient(&x, &score).unwrap();
        let logp = |n: &Mlp| {
            let y = n.forward(&x).unwrap();
            -(0..2).map(|i| (u[i] - y[i]).powi(2) / (2.0 * var[i])).sum::<f64>()
        };
        worst_grad = worst_grad.max(max_fd_error(&actor, logp, &g));
        let critic = Mlp::random(&[2, 5, 1], &mut ChaCha8Rng::seed_from_u64(seed + 100)).unwrap();
        let g = critic.param_gradient(&x, &[1.0]).unwrap();
        worst_grad = worst_grad.max(max_fd_error(&critic, |n| n.forward(&x).unwrap()[0], &g));
    }
    check(worst_grad <= 1e-4, format!("gradient error {worst_grad:e}"), &mut failures);
    detail.push(format!("gradient rel. error {worst_grad:.1e}"));

    // independent eigenvalue re-check of random Lyapunov LMIs
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_margin = f64::INFINITY;
    for _ in 0..20 {
        let mut a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let shift = a.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        a -= DMatrix::identity(3, 3) * (shift + 0.2);
        let q = sym_matrix_var(0, 3);
        let lyap = Affine::from_fn(6, |y| {
            let p = q.eval(y);
            Ok(-(a.transpose() * &p + &p * &a))
        })
        .unwrap();
        let mut prob = SdpProblem::new(6);
        prob.add_matrix("P", q.clone().plus(&Affine::constant(-DMatrix::identity(3, 3))), 0.0);
        prob.add_matrix("decrease", lyap, 1e-3);
        let sol = solve(&prob).unwrap();
        check(sol.is_feasible(), "stable A reported infeasible".into(), &mut failures);
        for c in &prob.matrix_constraints {
            let m = c.expr.eval(&sol.y);
            let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues.min();
            worst_margin = worst_margin.min(eig - c.margin);
        }
    }
    check(worst_margin >= -1e-7, format!("re-check margin {worst_margin:e}"), &mut failures);
    detail.push(format!("re-check margin {worst_margin:.1e}"));

    // log-det iterates: maximal ellipsoid {xᵀQ⁻¹x ≤ 1} inside the safe pentagon
    let safe = VanDerPol::safe_polytope();
    let q = sym_matrix_var(0, 2);
    let mut prob = SdpProblem::new(3);
    for i in 0..safe.num_faces() {
        let a = safe.normals().row(i);
        let b = safe.offsets()[i];
        // aᵀQa ≤ b²
        let coeffs = vec![(0, -a[0] * a[0]), (1, -2.0 * a[0] * a[1]), (2, -a[1] * a[1])];
        prob.add_linear(LinearConstraint { name: format!("face {i}"), coeffs, constant: b * b, margin: 0.0 });
    }
    prob.objective = Objective::MaximizeLogDet(q);
    let sol = logdet_maximize(&prob).unwrap();
    let monotone = sol.history.windows(2).all(|w| w[1] >= w[0]);
    check(sol.status == SdpStatus::Optimal && monotone, format!("log-det history {:?}", sol.history), &mut failures);
    detail.push(format!("log-det iterates monotone over {} steps", sol.history.len()));

    // max_level against a boundary-sampling oracle
    let p = &fixture().certificate.p;
    let exact = max_level(p, &safe).unwrap();
    let verts = &VanDerPol::SAFE_VERTICES;
    let mut oracle = f64::INFINITY;
    for i in 0..verts.len() {
        let (a, b) = (verts[i], verts[(i + 1) % verts.len()]);
        for s in 0..=10_000 {
            let t = s as f64 / 10_000.0;
            let x = DVector::from_vec(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            oracle = oracle.min((x.transpose() * p * &x)[(0, 0)]);
        }
    }
    let rel = (exact - oracle).abs() / oracle;
    check(rel <= 1e-3, format!("max_level {exact} vs oracle {oracle}"), &mut failures);
    detail.push(format!("max_level rel. gap {rel:.1e}"));

    verdict(failures, detail.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("linearization", linearization),
        ("uncertainty vertices", uncertainty_vertex_pairs),
        ("sector soundness", sector_soundness),
        ("synthesis on the example", synthesis_on_example),
        ("eigenvalue migration", eigenvalue_migration),
        ("LQR baseline", lqr_baseline),
        ("closed-loop consequences", closed_loop_consequences),
        ("training constraint", training_constraint),
        ("utility comparison", utility_comparison),
        ("numerical kernels", numerical_kernels),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} ({:.1}s) {detail}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
