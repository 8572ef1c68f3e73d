use nehari::experiments::audit_inequalities;
use nehari::graph::random_connected_graph;
use nehari::io::{graph_to_json, parse_graph};
use nehari::solver::{check_critical_value_bounds, energy, Problem, Status};
use nehari::spectral::{project, spectral_window, Part};
use nehari::*;
use proptest::prelude::*;

fn full_spec(g: &WeightedGraph) -> SpectralData {
    let fm = assemble(g).unwrap();
    eigensolve(&fm, g.len(), &EigenOptions::default()).unwrap()
}

/// λ strictly inside the gap `(λ_j, λ_{j+1})` at relative position `pos`.
fn in_gap(spec: &SpectralData, j: usize, pos: f64) -> Option<f64> {
    let (a, b) = (spec.eigenvalues[j], spec.eigenvalues[j + 1]);
    (b - a > 1e-6).then_some(a + pos * (b - a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectrum_is_bounded_below_by_one(seed in 0u64..10_000, n in 1usize..30) {
        let g = random_connected_graph(n, 0.2, seed);
        let spec = full_spec(&g);
        prop_assert!(spec.eigenvalues[0] >= 1.0 - 1e-12);
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let fm = assemble(&g).unwrap();
        prop_assert!(spec.orthonormality_defect(&fm) < 1e-10);
    }

    #[test]
    fn rayleigh_quotient_within_spectrum(seed in 0u64..10_000, vals in prop::collection::vec(-3.0f64..3.0, 10)) {
        prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
        let g = random_connected_graph(10, 0.3, seed);
        let spec = full_spec(&g);
        let u = GraphFunction::new(vals);
        let rq = u.energy_form(&g) / u.inner_m(&g, &u);
        prop_assert!(rq >= spec.eigenvalues[0] * (1.0 - 1e-12));
        prop_assert!(rq <= spec.eigenvalues[9] * (1.0 + 1e-12));
    }

    #[test]
    fn projectors_partition_identity(seed in 0u64..10_000, pos in 0.05f64..0.95, vals in prop::collection::vec(-3.0f64..3.0, 8)) {
        let g = random_connected_graph(8, 0.3, seed);
        let spec = full_spec(&g);
        let Some(lambda) = in_gap(&spec, 2, pos) else { return Ok(()) };
        let spl = split(&spec, lambda, None).unwrap();
        let u = GraphFunction::new(vals);
        let lo = project(&spl, &spec, g.mass(), Part::Minus, &u);
        let hi = project(&spl, &spec, g.mass(), Part::Plus, &u);
        let sum = lo.axpy(1.0, &hi);
        for (a, b) in sum.values().iter().zip(u.values()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        // E-orthogonality of the two parts
        prop_assert!(lo.inner_energy(&g, &hi).abs() <= 1e-9 * (1.0 + u.energy_form(&g)));
    }

    #[test]
    fn window_extends_past_lambda(seed in 0u64..10_000, frac in 0.0f64..1.0) {
        let g = random_connected_graph(40, 0.1, seed);
        let fm = assemble(&g).unwrap();
        let full = full_spec(&g);
        let lambda = full.eigenvalues[0] + frac * (full.eigenvalues[39] - full.eigenvalues[0]) * 0.9;
        let w = spectral_window(&fm, lambda, &EigenOptions::default()).unwrap();
        prop_assert!(w.is_complete() || *w.eigenvalues.last().unwrap() > lambda);
        prop_assert!(split(&w, lambda, None).is_ok());
    }

    #[test]
    fn graph_json_round_trip(seed in 0u64..10_000, n in 1usize..25, p in 0.0f64..0.5) {
        let g = random_connected_graph(n, p, seed);
        prop_assert_eq!(parse_graph(graph_to_json(&g).as_bytes(), "rt").unwrap(), g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Nehari membership, positivity of κJ, the explicit ℓ^p bound and the
    /// minimax upper bound at every returned ground state.
    #[test]
    fn ground_state_invariants(seed in 0u64..10_000, focusing in any::<bool>(), gap in 0usize..4, pos in 0.1f64..0.9) {
        let n = 8;
        let g = random_connected_graph(n, 0.3, seed);
        let spec = full_spec(&g);
        let kappa = if focusing { Kappa::Focusing } else { Kappa::Defocusing };
        let Some(lambda) = in_gap(&spec, gap, pos) else { return Ok(()) };
        let nl = power_nonlinearity(3.0 + (seed % 3) as f64, vec![1.0; n]).unwrap();
        let mut cfg = SolverConfig::new(kappa, lambda);
        cfg.n_starts = 4;
        cfg.seed = seed;
        let prob = Problem::new(&g, &nl, &cfg, &spec).unwrap();
        let res = prob.ground_state(None).unwrap();
        prop_assert_eq!(res.status, Status::Converged);
        prop_assert!(res.level > 0.0);
        prop_assert!(res.residual_grad <= cfg.tol_grad);
        prop_assert!(res.nehari_residuals.0 <= 1e-9 && res.nehari_residuals.1 <= 1e-9);
        let b = check_critical_value_bounds(&g, &res, &nl, prob.splitting()).unwrap();
        prop_assert!(b.lp_bound_ok);
        // J(−u) = J(u) for odd f
        let flipped = energy(&g, &nl, kappa, lambda, &res.u.scaled(-1.0));
        prop_assert!((flipped - res.energy).abs() <= 1e-12 * res.energy.abs().max(1.0));
        // c is an infimum of inner maxima
        let mut rng_dirs = seed;
        for _ in 0..5 {
            rng_dirs = rng_dirs.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let w: Vec<f64> = (0..n).map(|i| (((rng_dirs >> (i * 7)) & 0xff) as f64) / 128.0 - 1.0).collect();
            if let Ok(inner) = prob.inner_maximize(&GraphFunction::new(w)) {
                prop_assert!(res.level <= inner.value + 1e-9 * (1.0 + inner.value.abs()));
            }
        }
    }
}

#[test]
fn audit_never_fails_on_random_graphs() {
    for seed in 0..5 {
        let g = random_connected_graph(12, 0.25, seed);
        let spec = full_spec(&g);
        let lambdas: Vec<f64> = [0, 4, 8].iter().filter_map(|&j| in_gap(&spec, j, 0.5)).collect();
        let report = audit_inequalities(&g, &spec, &lambdas, None, 4.0, 50, seed).unwrap();
        assert!(report.passed());
    }
}

#[test]
fn ground_state_is_deterministic() {
    let g = random_connected_graph(10, 0.3, 42);
    let spec = full_spec(&g);
    let nl = power_nonlinearity(4.0, vec![1.0; 10]).unwrap();
    let lambda = in_gap(&spec, 2, 0.5).unwrap();
    let cfg = SolverConfig::new(Kappa::Focusing, lambda);
    let a = ground_state(&g, &nl, &cfg, &spec, None).unwrap();
    let b = ground_state(&g, &nl, &cfg, &spec, None).unwrap();
    assert_eq!(a, b);
}
