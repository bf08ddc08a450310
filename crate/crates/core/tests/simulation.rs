//! Simulation against exact quantities, and reproducibility.

use maplab::fixtures::{ct_fixture, map_fixture};
use maplab::model::{exact_moments, exact_moments_from};
use maplab::montecarlo::{increment_panel, simulate_checkpoints, simulate_ct, simulate_discrete, with_threads};
use maplab::stats::{chi_square_test, ks_two_sample, mean, variance};

#[test]
fn moments_match_exact_values() {
    for name in ["two_state", "skewed_mixture", "birth_death_5"] {
        let spec = map_fixture(name).unwrap();
        let n = 50;
        let y = simulate_discrete(&spec, n, 40_000, 17, None).unwrap().y();
        let var = exact_moments(&spec, n, 2).unwrap();
        let se = (var / y.len() as f64).sqrt();
        assert!(mean(&y).abs() < 5.0 * se, "{name} mean");
        let v = variance(&y);
        assert!((v - var).abs() < 0.05 * var, "{name} variance {v} vs {var}");
    }
}

#[test]
fn non_stationary_start_matches_exact_mean() {
    let spec = map_fixture("two_state").unwrap();
    let mu = [1.0, 0.0];
    let n = 5;
    let exact = exact_moments_from(&spec, &mu, n, 2).unwrap();
    let y = simulate_discrete(&spec, n, 40_000, 3, Some(&mu)).unwrap().y();
    let se = ((exact[2] - exact[1] * exact[1]) / y.len() as f64).sqrt();
    assert!((mean(&y) - exact[1]).abs() < 5.0 * se);
}

#[test]
fn terminal_states_follow_the_stationary_law() {
    let spec = map_fixture("birth_death_5").unwrap();
    let batch = simulate_discrete(&spec, 30, 50_000, 5, None).unwrap();
    let mut counts = vec![0u64; 5];
    for &x in &batch.terminal_x {
        counts[x] += 1;
    }
    assert!(chi_square_test(&counts, spec.kernel().pi()).p_value > 1e-4);
}

#[test]
fn continuous_time_mean_and_law() {
    let ct = ct_fixture("ct_two_state").unwrap();
    let t = 7.5;
    let y = simulate_ct(&ct, t, 40_000, 8, None).unwrap().y();
    let se = (variance(&y) / y.len() as f64).sqrt();
    assert!((mean(&y) - ct.mean_rate() * t).abs() < 5.0 * se);
    let m = ct.centered().moment_matrices(t, 2);
    let pi = ct.pi();
    let var: f64 = (0..2).map(|i| pi[i] * m[2].row(i).sum()).sum();
    assert!((variance(&y) - var).abs() < 0.05 * var);
}

#[test]
fn checkpoints_agree_with_single_horizon_runs_in_law() {
    let spec = map_fixture("two_state").unwrap();
    let both = simulate_checkpoints(&spec, &[10, 40], 20_000, 1, None).unwrap();
    let single = simulate_discrete(&spec, 40, 20_000, 2, None).unwrap();
    assert!(ks_two_sample(&both[1].y(), &single.y()).p_value > 1e-4);
}

#[test]
fn thread_count_does_not_change_output() {
    let spec = map_fixture("skewed_mixture").unwrap();
    let ct = ct_fixture("ct_two_state").unwrap();
    let run = || {
        (
            simulate_discrete(&spec, 64, 3000, 9, None).unwrap(),
            simulate_ct(&ct, 12.25, 3000, 9, None).unwrap(),
            increment_panel(&spec, 12, 3000, 9).unwrap().row(7).to_vec(),
        )
    };
    let a = with_threads(1, run);
    let b = with_threads(4, run);
    assert_eq!(a, b);
}

#[test]
fn seeds_give_different_streams() {
    let spec = map_fixture("iid_gaussian").unwrap();
    let a = simulate_discrete(&spec, 4, 100, 1, None).unwrap().y();
    let b = simulate_discrete(&spec, 4, 100, 2, None).unwrap().y();
    assert!(a.iter().zip(&b).all(|(x, y)| x != y));
}
