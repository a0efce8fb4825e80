use proptest::prelude::*;

use polydich::admissibility::{GreenSolver, GridFunction};
use polydich::dichotomy::{fit_dichotomy, ProjectionFamily};
use polydich::evolution::{check_cocycle, scenario, EvolutionFamily, ScenarioSpec};
use polydich::grid::{SampleConfig, SamplePairs, TimeGrid};
use polydich::linalg::Vector;
use polydich::norms::{constant_norm, lyapunov_norm, LyapunovConfig, NormFamily};

fn built(spec: ScenarioSpec) -> (EvolutionFamily, ProjectionFamily) {
    let s = scenario(&spec).unwrap();
    (s.family, s.projection.unwrap())
}

fn closed_form_spec() -> impl Strategy<Value = ScenarioSpec> {
    (0usize..5, 0.2f64..3.0).prop_map(|(k, lambda)| {
        let name =
            ["scalar_contraction", "scalar_expansion", "diag_dichotomy", "oblique_dichotomy", "nonuniform_contraction"]
                [k];
        ScenarioSpec::new(name).with("lambda", lambda)
    })
}

/// `1 <= tau <= s <= t <= 1e3`, drawn on a log scale.
fn ordered_triple() -> impl Strategy<Value = (f64, f64, f64)> {
    prop::array::uniform3(0.0f64..3.0).prop_map(|mut e| {
        e.sort_by(f64::total_cmp);
        (10f64.powf(e[0]), 10f64.powf(e[1]), 10f64.powf(e[2]))
    })
}

fn unit_vector(d: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.0f64..1.0, d)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| {
            let v = Vector::from_vec(v);
            let n = v.norm();
            v / n
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cocycle_holds_on_random_triples(spec in closed_form_spec(), (tau, s, t) in ordered_triple()) {
        let (family, _) = built(spec);
        let rep = check_cocycle(&family, &[tau, s, t], 1e-9).unwrap();
        prop_assert!(rep.pass, "residual {} at {:?}", rep.max_residual, rep.worst_triple);
    }

    #[test]
    fn generator_matches_closed_form(lambda in 0.2f64..2.0, (tau, _, t) in ordered_triple()) {
        let closed = scenario(&ScenarioSpec::new("diag_dichotomy").with("lambda", lambda)).unwrap().family;
        let generated = scenario(&ScenarioSpec::new("diag_dichotomy").with("lambda", lambda).with("generator", 1.0))
            .unwrap()
            .family;
        let a = closed.evaluate(t, tau).unwrap();
        let b = generated.evaluate(t, tau).unwrap();
        for i in 0..2 {
            prop_assert!((a[(i, i)] - b[(i, i)]).abs() <= 1e-8 * a[(i, i)].abs());
        }
    }

    #[test]
    fn green_operator_is_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        w1 in 0.1f64..3.0,
        w2 in 0.1f64..3.0,
        k in 0usize..3,
    ) {
        let name = ["diag_dichotomy", "oblique_dichotomy", "rotated_dichotomy"][k];
        let (family, proj) = built(ScenarioSpec::new(name));
        let grid = TimeGrid::new(100.0, 32).unwrap();
        let solver = GreenSolver::new(&family, &proj, grid.nodes()).unwrap();
        let y1 = GridFunction::from_fn(&grid, |t| Vector::from_vec(vec![(w1 * t.ln()).sin(), 1.0 / t])).unwrap();
        let y2 = GridFunction::from_fn(&grid, |t| Vector::from_vec(vec![1.0, (w2 * t.ln()).cos()])).unwrap();
        let lhs = solver.solve(&y1.combine(a, &y2, b).unwrap()).unwrap();
        let rhs = solver.solve(&y1).unwrap().combine(a, &solver.solve(&y2).unwrap(), b).unwrap();
        prop_assert!(lhs.max_difference(&rhs).unwrap() <= 1e-9);
    }

    #[test]
    fn green_solution_starts_in_kernel_of_p1(w in 0.1f64..3.0, k in 0usize..3) {
        let name = ["diag_dichotomy", "oblique_dichotomy", "rotated_dichotomy"][k];
        let (family, proj) = built(ScenarioSpec::new(name));
        let grid = TimeGrid::new(100.0, 32).unwrap();
        let solver = GreenSolver::new(&family, &proj, grid.nodes()).unwrap();
        let y = GridFunction::from_fn(&grid, |t| Vector::from_vec(vec![(w * t.ln()).sin(), 1.0])).unwrap();
        let x = solver.solve(&y).unwrap();
        let p1 = proj.at(1.0).unwrap();
        prop_assert!((p1 * &x.values()[0]).norm() <= 1e-8);
    }

    #[test]
    fn fitted_exponent_is_scale_invariant(lambda in 0.3f64..2.0, seed in 0u64..1000) {
        let (family, proj) = built(ScenarioSpec::new("scalar_contraction").with("lambda", lambda));
        let norms = constant_norm(1);
        let samples = SamplePairs::new(&SampleConfig { seed, ..SampleConfig::with_t_max(1000.0) }, 1, &[]);
        let base = fit_dichotomy(&family, &norms, &proj, &samples).unwrap();
        for c in [0.5, 2.0] {
            let scaled = fit_dichotomy(&family.scaled(c), &norms, &proj, &samples).unwrap();
            prop_assert!((scaled.lambda().unwrap() - base.lambda().unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn enlarging_samples_never_turns_fail_into_pass(seed in 0u64..1000, ratio in 10.0f64..200.0) {
        let (family, proj) = built(ScenarioSpec::new("counterexample"));
        let norms = constant_norm(1);
        let breaks = family.breakpoints(1000.0);
        let base = SamplePairs::new(&SampleConfig { seed, ..SampleConfig::with_t_max(1000.0) }, 1, &breaks);
        let cert = fit_dichotomy(&family, &norms, &proj, &base).unwrap();
        prop_assert!(!cert.verdict.pass);
        let more = SamplePairs::new(
            &SampleConfig { seed: seed + 1, max_ratio: ratio, ..SampleConfig::with_t_max(1000.0) },
            1,
            &breaks,
        );
        let larger = fit_dichotomy(&family, &norms, &proj, &base.extended(&more)).unwrap();
        prop_assert!(!larger.verdict.pass);
    }

    #[test]
    fn lyapunov_norm_contracts_with_constant_one(x in unit_vector(2), (tau, _, t) in ordered_triple()) {
        let (family, proj) = built(ScenarioSpec::new("oblique_dichotomy"));
        let norms: NormFamily = lyapunov_norm(&family, &proj, &LyapunovConfig::new(1.0, 1000.0)).unwrap();
        let px = proj.at(tau).unwrap() * &x;
        let lhs = norms.norm(t, &family.apply(t, tau, &px).unwrap()).unwrap();
        let rhs = (t / tau).powf(-1.0) * norms.norm(tau, &x).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-6) + 1e-12, "{lhs} > {rhs}");
        prop_assert!(x.norm() <= norms.norm(tau, &x).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn lyapunov_norm_is_homogeneous(x in unit_vector(2), a in -50.0f64..50.0, e in 0.0f64..3.0) {
        let (family, proj) = built(ScenarioSpec::new("diag_dichotomy"));
        let norms = lyapunov_norm(&family, &proj, &LyapunovConfig::new(0.9, 1000.0)).unwrap();
        let t = 10f64.powf(e);
        let n = norms.norm(t, &x).unwrap();
        let na = norms.norm(t, &(&x * a)).unwrap();
        prop_assert!((na - a.abs() * n).abs() <= 1e-12 * (1.0 + a.abs() * n));
    }
}
