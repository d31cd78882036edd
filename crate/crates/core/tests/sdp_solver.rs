mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use polyfilt::sdp::{check_solution, solve, LinearFunctional, SdpOptions, SdpProblem, SdpStatus};

fn scalar_bound() -> SdpProblem {
    let mut p = SdpProblem::new();
    let y = p.add_free();
    let x = p.add_block(1).unwrap();
    let mut f = LinearFunctional::new().scalar(y, 1.0);
    f.push_block(x, 0, 0, -1.0);
    p.add_equality(f, 3.0).unwrap();
    p.set_objective(LinearFunctional::new().scalar(y, 1.0))
        .unwrap();
    p
}

/// minimize y s.t. [[y, 1], [1, y]] ⪰ 0
fn two_by_two(scale: f64) -> SdpProblem {
    let mut p = SdpProblem::new();
    let y = p.add_free();
    let x = p.add_block(2).unwrap();
    let mut f = LinearFunctional::new().scalar(y, 1.0);
    f.push_block(x, 0, 0, -1.0);
    p.add_equality(f, 0.0).unwrap();
    let mut f = LinearFunctional::new().scalar(y, 1.0);
    f.push_block(x, 1, 1, -1.0);
    p.add_equality(f, 0.0).unwrap();
    let mut f = LinearFunctional::new();
    f.push_block(x, 0, 1, 1.0);
    p.add_equality(f, 1.0).unwrap();
    p.set_objective(LinearFunctional::new().scalar(y, scale))
        .unwrap();
    p
}

#[test]
fn scalar_lower_bound() {
    let sol = solve(&scalar_bound(), &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert_relative_eq!(sol.free_values[0], 3.0, epsilon = 1e-6);
    let report = check_solution(&scalar_bound(), &sol).unwrap();
    assert!(report.passes(1e-7, 1e-8), "{report:?}");
}

#[test]
fn two_by_two_eigenvalue_bound() {
    let sol = solve(&two_by_two(1.0), &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert_relative_eq!(sol.free_values[0], 1.0, epsilon = 1e-6);
}

#[test]
fn perturbed_solution_is_flagged() {
    let p = two_by_two(1.0);
    let mut sol = solve(&p, &SdpOptions::default()).unwrap();
    sol.block_values[0][(0, 0)] += 1e-2;
    let report = check_solution(&p, &sol).unwrap();
    assert!(report.equality_residual >= 1e-3);
    assert!(!report.passes(1e-7, 1e-8));
}

#[test]
fn planted_instances_match_known_optimum() {
    for seed in 0..8 {
        let planted = common::planted_sdp(seed, &[3, 2, 4], 7, 1, 2);
        let sol = solve(&planted.problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal, "seed {seed}");
        let rel = (sol.objective_value - planted.optimum).abs() / (1.0 + planted.optimum.abs());
        assert!(
            rel < 1e-6,
            "seed {seed}: {} vs {}",
            sol.objective_value,
            planted.optimum
        );
        let report = check_solution(&planted.problem, &sol).unwrap();
        assert!(report.passes(1e-6, 1e-8), "seed {seed}: {report:?}");
    }
}

#[test]
fn weak_duality_holds() {
    for seed in 10..16 {
        let planted = common::planted_sdp(seed, &[2, 3], 5, 0, 1);
        let opts = SdpOptions::default();
        let sol = solve(&planted.problem, &opts).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let scale = 1.0 + sol.objective_value.abs() + sol.dual_objective.abs();
        assert!(sol.dual_objective <= sol.objective_value + opts.tol_gap * scale);
    }
}

#[test]
fn objective_scaling_leaves_argmin_unchanged() {
    let base = solve(&two_by_two(1.0), &SdpOptions::default()).unwrap();
    let scaled = solve(&two_by_two(7.5), &SdpOptions::default()).unwrap();
    assert_relative_eq!(base.free_values[0], scaled.free_values[0], epsilon = 1e-6);
    for (a, b) in base.block_values.iter().zip(&scaled.block_values) {
        assert!((a - b).amax() < 1e-6);
    }
    for seed in 20..23 {
        let planted = common::planted_sdp(seed, &[3, 3], 6, 1, 0);
        let mut p2 = planted.problem.clone();
        let mut obj = p2.objective().clone();
        obj.scalars.iter_mut().for_each(|t| t.1 *= 3.0);
        obj.blocks.iter_mut().for_each(|t| t.coef *= 3.0);
        p2.set_objective(obj).unwrap();
        let s1 = solve(&planted.problem, &SdpOptions::default()).unwrap();
        let s2 = solve(&p2, &SdpOptions::default()).unwrap();
        for (a, b) in s1.block_values.iter().zip(&s2.block_values) {
            assert!((a - b).amax() < 1e-6);
        }
    }
}

#[test]
fn deterministic_across_runs() {
    let planted = common::planted_sdp(99, &[4, 2], 6, 1, 1);
    let a = solve(&planted.problem, &SdpOptions::default()).unwrap();
    let b = solve(&planted.problem, &SdpOptions::default()).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.free_values, b.free_values);
    assert_eq!(a.block_values, b.block_values);
}

#[test]
fn infeasible_problem_is_reported() {
    // X ⪰ 0 (1x1) with X = -1
    let mut p = SdpProblem::new();
    let x = p.add_block(1).unwrap();
    let mut f = LinearFunctional::new();
    f.push_block(x, 0, 0, 1.0);
    p.add_equality(f, -1.0).unwrap();
    let sol = solve(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
}

#[test]
fn unbounded_problem_is_reported() {
    // minimize y s.t. y = X_00 - X_11, X ⪰ 0
    let mut p = SdpProblem::new();
    let y = p.add_free();
    let x = p.add_block(2).unwrap();
    let mut f = LinearFunctional::new().scalar(y, 1.0);
    f.push_block(x, 0, 0, -1.0);
    f.push_block(x, 1, 1, 1.0);
    p.add_equality(f, 0.0).unwrap();
    p.set_objective(LinearFunctional::new().scalar(y, 1.0))
        .unwrap();
    let sol = solve(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Unbounded);
}

#[test]
fn oversized_problem_is_refused() {
    let mut p = SdpProblem::new();
    p.add_block(400).unwrap();
    let opts = SdpOptions::default();
    assert!(matches!(
        solve(&p, &opts),
        Err(polyfilt::Error::ProblemTooLarge { .. })
    ));
}

#[test]
fn zero_point_reports_psd_violation() {
    let p = scalar_bound();
    let r = polyfilt::sdp::check_point(&p, &[0.0], &[DMatrix::from_element(1, 1, -3.0)]).unwrap();
    assert!(r.min_eigenvalue() < -1.0);
}
