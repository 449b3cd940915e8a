use std::sync::Arc;

use double_phase::exponents::{build_exponent_set, validate_hypotheses};
use double_phase::solvers::{
    bump_function, find_endpoint, lambda_star_search, minimize_energy, mountain_pass,
    multi_solution_search, shaped_bump, uniform_lambda_grid, SolverOptions, SubBox,
};
use double_phase::verification::certify_weak_solution;
use double_phase::{DomainGrid, Energy, Error, ExponentSet, FieldExpr, Functional, Theorem};

fn set(dim: usize, res: usize, p1: &str, p2: &str, q: &str) -> ExponentSet {
    let grid = Arc::new(DomainGrid::unit(dim, res).unwrap());
    let p = |e: &str| FieldExpr::parse(e).unwrap();
    build_exponent_set(&p(p1), &p(p2), &p(q), grid).unwrap()
}

fn planar() -> ExponentSet {
    set(2, 17, "1.5", "1.6 + 0.2*x2", "3")
}

#[test]
fn planar_set_supports_only_the_coercive_problem() {
    let s = planar();
    // the mountain-pass setting needs p >= 2, which the planar set violates
    let mp = validate_hypotheses(&s, Theorem::T1);
    assert!(!mp.pass);
    assert!(mp.failures().any(|c| c.name == "p1^- >= 2"));
    assert!(validate_hypotheses(&s, Theorem::T2).pass);
}

#[test]
fn planar_minimizer_above_threshold() {
    let s = planar();
    let g = s.grid().clone();
    let region = SubBox::centered(&[0.5, 0.5], 0.5);
    let u0 = bump_function(g, 2.0, &region).unwrap();
    let star = lambda_star_search(
        &s,
        &u0,
        2.0,
        &region,
        &uniform_lambda_grid(0.25, 0.25, 40_000),
    )
    .unwrap();
    assert!(star.lambda_hat <= star.analytic_bound);
    let lambda = 2.0 * star.lambda_hat;
    let opts = SolverOptions::default();
    let r = minimize_energy(lambda, &s, &u0, &opts).unwrap();
    assert!(r.converged(), "{:?} residual {}", r.termination, r.residual);
    assert!(r.energy.total < 0.0);
    let cert = certify_weak_solution(&r, &Energy::new(&s, lambda, Functional::I), opts.tol, 20, 4);
    assert!(cert.pass);
    // energy history never increases
    assert!(r.history.windows(2).all(|w| w[1].energy <= w[0].energy));
}

#[test]
fn minimum_decreases_with_lambda() {
    let s = set(3, 8, "2", "2 + 0.5*sin(pi*x1)", "4");
    let u0 = bump_function(s.grid().clone(), 2.0, &SubBox::centered(&[0.5; 3], 0.5)).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [200.0, 300.0, 450.0] {
        let r = minimize_energy(lambda, &s, &u0, &SolverOptions::default()).unwrap();
        assert!(r.converged());
        assert!(r.energy.total < last, "{} !< {last}", r.energy.total);
        last = r.energy.total;
    }
}

#[test]
fn planar_mountain_pass_under_override() {
    let s = planar();
    let g = s.grid().clone();
    let opts = SolverOptions {
        override_hypotheses: true,
        ..SolverOptions::default()
    };
    let dir = shaped_bump(g.clone(), 1.0, &SubBox::centered(&[0.5, 0.5], 0.5)).unwrap();
    let (e, _) = find_endpoint(1.0, &s, &dir, opts.doubling_limit).unwrap();
    let energy = Energy::new(&s, 1.0, Functional::J);
    assert!(energy.value(&e) <= 0.0);
    let r = mountain_pass(1.0, &s, &e, &opts).unwrap();
    assert!(r.converged());
    assert!(r.energy.total > 0.0);
    let mirror = r.negated();
    assert_eq!(energy.value(&mirror.u), r.energy.total);
    let cert = certify_weak_solution(&r, &energy, opts.tol, 20, 9);
    assert!(cert.pass);
}

#[test]
fn variable_q_search_is_deterministic() {
    let s = set(3, 8, "2", "2.2 + 0.3*x2*x3", "3.5 + x1");
    let g = s.grid().clone();
    let seeds = vec![
        shaped_bump(
            g.clone(),
            2.0,
            &SubBox::new(vec![0.15, 0.3, 0.3], vec![0.45, 0.7, 0.7]),
        )
        .unwrap(),
        shaped_bump(
            g,
            2.0,
            &SubBox::new(vec![0.55, 0.3, 0.3], vec![0.85, 0.7, 0.7]),
        )
        .unwrap(),
    ];
    let opts = SolverOptions::default();
    let a = multi_solution_search(1.0, &s, &seeds, None, &opts).unwrap();
    let b = multi_solution_search(1.0, &s, &seeds, None, &opts).unwrap();
    assert!(a.solutions.len() >= 2);
    assert_eq!(a.distances, b.distances);
    for (x, y) in a.solutions.iter().zip(&b.solutions) {
        assert_eq!(x.u.values(), y.u.values());
    }
}

#[test]
fn solvers_refuse_failed_hypotheses_unless_overridden() {
    let s = set(3, 8, "2", "2 + 0.5*sin(pi*x1)", "7");
    let u0 = bump_function(s.grid().clone(), 2.0, &SubBox::centered(&[0.5; 3], 0.5)).unwrap();
    let err = minimize_energy(300.0, &s, &u0, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::HypothesesFailed(_)));
    let opts = SolverOptions {
        override_hypotheses: true,
        max_iter: 5,
        ..SolverOptions::default()
    };
    assert!(minimize_energy(300.0, &s, &u0, &opts).is_ok());
}

#[test]
fn critical_level_is_stable_in_path_resolution() {
    let s = set(3, 8, "2", "2 + 0.5*sin(pi*x1)", "4");
    let dir = shaped_bump(s.grid().clone(), 1.0, &SubBox::centered(&[0.5; 3], 0.5)).unwrap();
    let (e, _) = find_endpoint(1.0, &s, &dir, 60).unwrap();
    let level = |k: usize| {
        let r = mountain_pass(
            1.0,
            &s,
            &e,
            &SolverOptions {
                path_points: k,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        assert!(r.converged());
        r.energy.total
    };
    let (coarse, fine) = (level(10), level(40));
    assert!((coarse - fine).abs() <= 0.05 * fine, "{coarse} vs {fine}");
}
