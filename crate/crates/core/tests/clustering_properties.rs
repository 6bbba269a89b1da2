use adaclust_core::data::{generate_heterogeneous, GeneratorSpec};
use adaclust_core::hard::{cugmom_objective, fit_kmeans, initial_lambda, weight_matrix, KMeansConfig, MomentForm};
use adaclust_core::soft::{fit, fit_from, initial_params, Priors};
use adaclust_core::{AttributeKind, FamilySpec, Mode, SoftConfig};
use proptest::prelude::*;

fn small_spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        n: 120,
        j: 3,
        k: 2,
        seed,
        ..GeneratorSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn em_trace_is_monotone_and_rows_normalized(seed in 0u64..10_000, ml in any::<bool>()) {
        let g = generate_heterogeneous(&small_spec(seed)).unwrap();
        let (x, fams) = g.dataset.prepare().unwrap();
        let cfg = SoftConfig {
            mode: if ml { Mode::Ml } else { Mode::Map },
            seed,
            max_iter: 40,
            stop_on_stable_assignments: false,
            ..SoftConfig::default()
        };
        let f = fit(x.view(), &fams, 2, &cfg).unwrap();
        for (t, w) in f.trace.windows(2).enumerate() {
            if f.reseeds.contains(&t) {
                continue;
            }
            prop_assert!(w[1] >= w[0] - 1e-8, "step {t}: {} -> {}", w[0], w[1]);
        }
        for row in f.responsibilities.outer_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn relabeled_init_permutes_assignments(seed in 0u64..10_000) {
        let g = generate_heterogeneous(&small_spec(seed)).unwrap();
        let (x, fams) = g.dataset.prepare().unwrap();
        let init = initial_params(x.view(), &fams, &[0, 1], false);
        let mut swapped = init.clone();
        swapped.pi.reverse();
        for j in 0..fams.len() {
            swapped.mu.swap([0, j], [1, j]);
        }
        let cfg = SoftConfig { mode: Mode::Ml, max_iter: 30, ..SoftConfig::default() };
        let a = fit_from(x.view(), init, Priors::none(2, 3), &cfg).unwrap().assignments();
        let b = fit_from(x.view(), swapped, Priors::none(2, 3), &cfg).unwrap().assignments();
        prop_assert!(a.iter().zip(&b).all(|(p, q)| *p == 1 - *q));
    }

    #[test]
    fn cugmom_objective_is_non_negative(seed in 0u64..10_000, split in 2usize..100) {
        let g = generate_heterogeneous(&small_spec(seed)).unwrap();
        let (x, fams) = g.dataset.prepare().unwrap();
        let assign: Vec<usize> = (0..x.nrows()).map(|i| usize::from(i % 100 >= split)).collect();
        let lambda = initial_lambda(x.view(), &assign, &fams, 2, None);
        let obj = cugmom_objective(x.view(), &assign, &lambda, MomentForm::Centered).unwrap();
        prop_assert!(obj >= 0.0);
    }

    #[test]
    fn kmeans_inertia_never_increases(seed in 0u64..10_000, k in 1usize..5) {
        let g = generate_heterogeneous(&small_spec(seed)).unwrap();
        let r = fit_kmeans(g.dataset.values.view(), k, &KMeansConfig { max_iter: 100, seed }).unwrap();
        for w in r.trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #[test]
    fn weight_matrices_are_symmetric_positive_definite(
        points in prop::collection::vec(0.01f64..30.0, 2..40),
        mu in 0.1f64..20.0,
        kappa in 0.01f64..10.0,
        alpha in -3.0f64..2.0,
        raw in any::<bool>(),
    ) {
        prop_assume!(points.iter().any(|p| (p - points[0]).abs() > 1e-6));
        let fam = FamilySpec::for_kind(AttributeKind::PositiveContinuous).unwrap();
        let form = if raw { MomentForm::Raw } else { MomentForm::Centered };
        let w = weight_matrix(&points, mu, kappa, alpha, &fam, form).unwrap();
        prop_assert_eq!(w[0][1], w[1][0]);
        prop_assert!(w[0][0] > 0.0 && w[1][1] > 0.0);
        prop_assert!(w[0][0] * w[1][1] - w[0][1] * w[1][0] > 0.0);
    }

    #[test]
    fn generated_columns_respect_declared_kinds(seed in 0u64..10_000) {
        let g = generate_heterogeneous(&GeneratorSpec { n: 200, j: 5, k: 3, seed, ..GeneratorSpec::default() }).unwrap();
        let detected = adaclust_core::data::detect_kinds(&g.dataset.values);
        for (d, declared) in detected.iter().zip(&g.dataset.kinds) {
            prop_assert!(d.is_subset_of(*declared), "{:?} vs {:?}", d, declared);
        }
        let again = generate_heterogeneous(&GeneratorSpec { n: 200, j: 5, k: 3, seed, ..GeneratorSpec::default() }).unwrap();
        prop_assert_eq!(g.dataset.values, again.dataset.values);
    }
}

