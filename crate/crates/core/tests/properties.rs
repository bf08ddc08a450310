//! Structural invariants on randomly generated models.

use maplab::chain::{l2_operator_norm_real, spectral_gap_report, stationary_residual};
use maplab::fourier::{branch_at, check_semigroup, evaluate_expansion};
use maplab::io;
use maplab::model::{variance_scalar, IncrementLaw, MapSpec};
use maplab::StochasticKernel;
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = StochasticKernel> {
    (2usize..5).prop_flat_map(|s| {
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, s), s).prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let t: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / t).collect()
                })
                .collect();
            StochasticKernel::from_rows(&rows).unwrap()
        })
    })
}

fn law_strategy() -> impl Strategy<Value = IncrementLaw> {
    prop_oneof![
        (-2.0f64..2.0).prop_map(IncrementLaw::deterministic),
        (-2.0f64..2.0, 0.01f64..1.0).prop_map(|(m, v)| IncrementLaw::gaussian(m, v)),
        (0.1f64..0.9, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(p, a, b)| IncrementLaw::mixture(&[(p, a), (1.0 - p, b)])),
    ]
}

fn spec_strategy() -> impl Strategy<Value = MapSpec> {
    kernel_strategy().prop_flat_map(|k| {
        let s = k.size();
        prop::collection::vec(law_strategy(), s * s).prop_map(move |laws| {
            let incs = laws.into_iter().enumerate().map(|(i, l)| (i / s, i % s, l)).collect();
            MapSpec::new(k.clone(), 1, incs, true).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_a_fixed_point(k in kernel_strategy()) {
        let pi = k.pi();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.iter().all(|&p| p > 0.0));
        prop_assert!(stationary_residual(k.matrix(), pi) < 1e-12);
    }

    #[test]
    fn mixing_bounds_are_non_increasing(k in kernel_strategy()) {
        let t = spectral_gap_report(&k, 12).unwrap();
        prop_assert!((t.bound(1).unwrap() - 1.0).abs() < 1e-9);
        for w in t.bounds.windows(2) {
            prop_assert!(w[1].bound <= w[0].bound + 1e-12);
        }
        prop_assert!(t.gap_present);
        // P is a contraction of L²(π).
        prop_assert!(l2_operator_norm_real(k.matrix(), k.pi()).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn semigroup_holds(spec in spec_strategy(), z in -4.0f64..4.0, s in 0u32..12, t in 0u32..12) {
        prop_assert!(check_semigroup(&spec, &[z], s as f64, t as f64).unwrap() < 1e-10);
    }

    #[test]
    fn branch_is_dominated_by_one(spec in spec_strategy(), z in -0.3f64..0.3) {
        let p = branch_at(&spec, &[z]).unwrap();
        prop_assert!(p.lambda.norm() <= 1.0 + 1e-12);
        prop_assert!(p.kappa < p.lambda.norm());
    }

    #[test]
    fn expansion_identity(spec in spec_strategy(), z in -0.3f64..0.3, n in 1usize..40) {
        let ones = vec![1.0; spec.size()];
        let e = evaluate_expansion(&spec, &[z], n, &ones).unwrap();
        prop_assert!((e.lhs - e.rhs_main - e.rhs_rem).norm() < 1e-10);
    }

    #[test]
    fn variance_is_shift_invariant(spec in spec_strategy(), c in -3.0f64..3.0) {
        let file = io::map_spec_file(&spec).unwrap();
        let mut shifted = file.clone();
        for e in &mut shifted.increments {
            e.law = e.law.shifted(&[-c]);
        }
        let a = variance_scalar(&spec, 1e-13).unwrap();
        let b = variance_scalar(&shifted.build().unwrap(), 1e-13).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn files_round_trip(spec in spec_strategy()) {
        let file = io::map_spec_file(&spec).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let io::ModelSpec::Discrete(back) = io::parse_model(&text).unwrap() else { panic!("discrete") };
        prop_assert_eq!(io::hash_map_spec(&back), io::hash_map_spec(&spec));
        prop_assert_eq!(back.fourier_matrix(&[0.7]), spec.fourier_matrix(&[0.7]));
    }
}
