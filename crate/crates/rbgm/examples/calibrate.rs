//! Scratch harness for picking default gamma values; not part of the API.

use rbgm::bregman::ReferenceFunction;
use rbgm::numerics::Rng;
use rbgm::problems::{NepvProblem, ProblemOracle, SensingProblem};
use rbgm::solvers::{run, Method, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("nepv");
    match mode {
        "nepv" => {
            let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
            let p: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
            let gammas: Vec<f64> = args[4..]
                .iter()
                .map(|s| s.parse().expect("gamma"))
                .collect();
            nepv(m, p, &gammas);
        }
        "nepv-rsd" => {
            let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
            let p: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
            nepv_rsd(m, p);
        }
        "sensing" => {
            let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);
            let r: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
            let gammas: Vec<f64> = args[4..]
                .iter()
                .map(|s| s.parse().expect("gamma"))
                .collect();
            sensing(m, r, &gammas);
        }
        "probe" => {
            let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);
            let p: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
            probe(m, p);
        }
        other => eprintln!("unknown mode {other}"),
    }
}

/// Runs RSD to its stall point, then prints the decrease profile along the
/// steepest-descent direction to expose the local curvature and the f64
/// noise floor of the objective.
fn probe(m: usize, p: usize) {
    let problem = NepvProblem::new(m, p, 10.0).unwrap();
    let manifold = problem.manifold();
    let mut rng = Rng::new(1);
    let x0 = manifold.random_point(&mut rng).unwrap();
    let mut config = SolverConfig::new(Method::Rsd, 1.0);
    config.alpha0 = 0.5;
    config.rho = 0.5;
    config.grad_tol = 1e-4;
    let rep = run(&problem, None, &config, &x0).unwrap();
    let x = rep.final_point;
    let f = problem.value(x.ambient()).unwrap();
    let grad = problem.euclid_grad(x.ambient()).unwrap();
    let rg = manifold.project_tangent(&x, &grad).unwrap();
    let g2 = rg.norm() * rg.norm();
    println!(
        "status={:?} iters={} F={f:.12e} grad={:.6e} ulp(F)={:.3e}",
        rep.status,
        rep.iterations,
        rg.norm(),
        f64::from_bits(f.to_bits() + 1) - f
    );
    for rec in rep.records.iter().rev().take(12).collect::<Vec<_>>().iter().rev() {
        println!(
            "t={} F={:.12e} grad={:?} alpha={:.6e} trials={}",
            rec.t, rec.f_value, rec.grad_norm, rec.alpha, rec.linesearch_trials
        );
    }
    let d = rg.scale(-1.0);
    for k in 0..30 {
        let alpha = 2.0f64.powi(-(k as i32));
        let y = manifold.retract(&x, &d.scale(alpha)).unwrap();
        let fy = problem.value(y.ambient()).unwrap();
        let naive = fy - f;
        let diff = problem.value_difference(x.ambient(), y.ambient()).unwrap();
        println!(
            "alpha=2^-{k:<2} naive={naive:+.6e} diff={diff:+.6e} linear_term={:-.6e} armijo_req={:-.6e}",
            -alpha * g2,
            -1e-4 * alpha * g2
        );
    }
    // Replay the exact internal trial sequence of the failing iteration:
    // initial stepsize = 2 * last accepted, shrink by rho, direction
    // re-projected the way the solver does it.
    let warm = rep.records.last().unwrap().alpha;
    let step_v = manifold
        .project_tangent(&x, &grad)
        .unwrap()
        .into_ambient()
        .neg();
    let tangent = manifold.project_tangent(&x, &step_v).unwrap();
    let kappa = 1e-4 * rg.norm() * rg.norm();
    // Feasibility compensation: <grad f(z), displacement(z)> removes the
    // objective jitter caused by the normal-direction rounding of each
    // retracted point.
    let comp = |z: &rbgm::manifolds::ManifoldPoint| -> f64 {
        let n = manifold.feasibility_displacement(z.ambient()).unwrap();
        problem.euclid_grad(z.ambient()).unwrap().dot(&n)
    };
    let comp_x = comp(&x);
    println!("comp_x={comp_x:+.6e}");
    let mut alpha = 2.0 * warm;
    for k in 0..12 {
        let next = manifold.retract(&x, &tangent.scale(alpha)).unwrap();
        let delta = problem.value_difference(x.ambient(), next.ambient()).unwrap();
        let corrected = delta - comp(&next) + comp_x;
        println!(
            "replay k={k} alpha={alpha:.9e} delta={delta:+.9e} corrected={corrected:+.9e} bound={:-.3e} pass={}",
            -kappa * alpha,
            corrected <= -kappa * alpha
        );
        alpha *= 0.5;
    }
}

fn nepv_rsd(m: usize, p: usize) {
    let problem = NepvProblem::new(m, p, 10.0).unwrap();
    let manifold = problem.manifold();
    let mut rng = Rng::new(1);
    let x0 = manifold.random_point(&mut rng).unwrap();
    for method in [Method::Rsd, Method::RsdAda] {
        let mut config = SolverConfig::new(method, 1.0);
        config.alpha0 = 0.5;
        config.rho = 0.5;
        config.grad_tol = 1e-4;
        let t = std::time::Instant::now();
        let rep = run(&problem, None, &config, &x0).unwrap();
        println!(
            "{:9} m={m} p={p} iters={:6} status={:?} F={:.6e} grad={:.3e} wall={:.2?}",
            method.name(),
            rep.iterations,
            rep.status,
            rep.final_f,
            rep.final_grad_norm.unwrap_or(f64::NAN),
            t.elapsed()
        );
    }
}

fn nepv(m: usize, p: usize, gammas: &[f64]) {
    let problem = NepvProblem::new(m, p, 10.0).unwrap();
    let manifold = problem.manifold();
    let h = ReferenceFunction::quartic();
    let mut rng = Rng::new(1);
    let x0 = manifold.random_point(&mut rng).unwrap();
    for &gamma in gammas {
        for method in [Method::RRbgd, Method::PRbgd, Method::PRbgdC] {
            let mut config = SolverConfig::new(method, gamma);
            config.alpha0 = 0.5;
            config.rho = 0.5;
            config.grad_tol = 1e-4;
            let t = std::time::Instant::now();
            let rep = run(&problem, Some(&h), &config, &x0).unwrap();
            println!(
                "{:9} m={m} p={p} gamma={gamma:10.4} iters={:6} status={:?} F={:.6e} grad={:.3e} ls_mean={:.2} wall={:.2?}",
                method.name(),
                rep.iterations,
                rep.status,
                rep.final_f,
                rep.final_grad_norm.unwrap_or(f64::NAN),
                rep.records.iter().map(|r| r.linesearch_trials as f64).sum::<f64>()
                    / rep.records.len().max(1) as f64,
                t.elapsed()
            );
        }
    }
}

fn dump_tail(records: &[rbgm::solvers::IterationRecord], n: usize) {
    for rec in records.iter().rev().take(n).rev() {
        eprintln!(
            "    t={:5} F={:.9e} grad={:.3e} vnorm={:.3e} alpha={:.3e} trials={}",
            rec.t,
            rec.objective(),
            rec.grad_norm.unwrap_or(f64::NAN),
            rec.direction_norm,
            rec.alpha,
            rec.linesearch_trials
        );
    }
}

fn sensing(m: usize, r: usize, gammas: &[f64]) {
    let maxit: usize = std::env::var("MAXIT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(50_000);
    let h = ReferenceFunction::quartic();
    for seed in 1..=10u64 {
        let mut rng = Rng::new(seed);
        let problem = SensingProblem::generate(m, r, 100, &mut rng).unwrap();
        let manifold = problem.manifold();
        let x0 = manifold.random_point(&mut rng).unwrap();
        let f0 = problem.value(x0.ambient()).unwrap();
        let mut line = format!("seed={seed:2} f0={f0:.2e}");
        for method in [Method::Rsd, Method::RsdAda] {
            let mut config = SolverConfig::new(method, 1.0);
            config.alpha0 = 0.1;
            config.rho = 0.5;
            config.grad_tol = 1e-4;
            config.max_iters = maxit;
            let rep = run(&problem, None, &config, &x0).unwrap();
            line.push_str(&format!(
                "  {}={:5}{}",
                method.name(),
                rep.iterations,
                if rep.status == rbgm::solvers::RunStatus::Converged { " " } else { "!" },
            ));
        }
        for &gamma in gammas {
            let mut config = SolverConfig::new(Method::PRbgd, gamma);
            config.alpha0 = 0.1;
            config.rho = 0.5;
            config.grad_tol = 1e-4;
            config.max_iters = maxit;
            let rep = run(&problem, Some(&h), &config, &x0).unwrap();
            line.push_str(&format!(
                "  p[{gamma:.1e}]={:5}{} fr={:.1e}",
                rep.iterations,
                if rep.status == rbgm::solvers::RunStatus::Converged { " " } else { "!" },
                rep.final_f / f0,
            ));
        }
        eprintln!("{line}");
    }
}
