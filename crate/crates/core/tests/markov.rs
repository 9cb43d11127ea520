use markov_cocycle::markov::{check_aperiodic, stationary_distribution};
use markov_cocycle::{StochasticMatrix, Word};
use proptest::prelude::*;

fn stochastic_rows(q: usize, sparse: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let cell = if sparse {
        prop_oneof![Just(0.0), 0.05f64..1.0].boxed()
    } else {
        (0.05f64..1.0).boxed()
    };
    prop::collection::vec(prop::collection::vec(cell, q), q).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                // Keep every row and column alive: i → i+1 is always allowed.
                let next = (i + 1) % row.len();
                row[next] = row[next].max(0.1);
                let s: f64 = row.iter().sum();
                row.iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = a.len();
    (0..q)
        .map(|i| (0..q).map(|j| (0..q).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Smallest `k ≤ limit` with `P^k > 0`, by repeated multiplication.
fn positive_power(rows: &[Vec<f64>], limit: usize) -> Option<usize> {
    let mut power = rows.to_vec();
    for k in 1..=limit {
        if power.iter().flatten().all(|&x| x > 0.0) {
            return Some(k);
        }
        power = mat_mul(&power, rows);
    }
    None
}

proptest! {
    #[test]
    fn stationary_vector_invariants(rows in (2usize..=4).prop_flat_map(|q| stochastic_rows(q, false))) {
        let p = StochasticMatrix::new(rows.clone()).unwrap();
        let pi = p.stationary();
        prop_assert!(pi.iter().all(|&x| x > 0.0));
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for j in 0..p.q() {
            let pj: f64 = (0..p.q()).map(|i| pi[i] * rows[i][j]).sum();
            prop_assert!((pj - pi[j]).abs() <= 1e-10);
        }
        prop_assert!(p.stationarity_residual() <= 1e-10);
    }

    #[test]
    fn aperiodicity_exponent_matches_matrix_powers(rows in (2usize..=4).prop_flat_map(|q| stochastic_rows(q, true))) {
        let q = rows.len();
        let limit = (q - 1) * (q - 1) + 1;
        prop_assert_eq!(check_aperiodic(&rows).unwrap(), positive_power(&rows, limit));
    }

    #[test]
    fn cylinder_masses_sum_to_one(rows in (2usize..=3).prop_flat_map(|q| stochastic_rows(q, true)), l in 1usize..=10) {
        let p = StochasticMatrix::new(rows).unwrap();
        let total: f64 = p.enumerate_cylinders(l).unwrap().iter().map(|(_, m)| m).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cylinder_measure_is_the_product_formula(
        rows in stochastic_rows(3, false),
        word in prop::collection::vec(0usize..3, 1..8),
    ) {
        let p = StochasticMatrix::new(rows.clone()).unwrap();
        let mut want = p.stationary()[word[0]];
        for pair in word.windows(2) {
            want *= rows[pair[0]][pair[1]];
        }
        let got = p.cylinder_measure(&Word::new(word)).unwrap();
        prop_assert!((got - want).abs() <= 1e-15);
    }
}

#[test]
fn periodic_matrix_gets_uniform_vector() {
    let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    assert_eq!(check_aperiodic(&rows).unwrap(), None);
    assert_eq!(stationary_distribution(&rows).unwrap(), vec![0.5, 0.5]);
    assert!(StochasticMatrix::new(rows).unwrap().is_periodic());
}

#[test]
fn pair_frequencies_converge() {
    let rows = vec![vec![0.5, 0.5], vec![0.25, 0.75]];
    let p = StochasticMatrix::new(rows.clone()).unwrap();
    let n = 100_000;
    let chain = p.sample_chain(n, 17);
    let mut counts = [[0usize; 2]; 2];
    for pair in chain.0.windows(2) {
        counts[pair[0]][pair[1]] += 1;
    }
    // Second eigenvalue of P inflates the variance of the indicator sums.
    let lambda2: f64 = rows[0][0] + rows[1][1] - 1.0;
    let c_mix = 2.0 * (1.0 + lambda2.abs()) / (1.0 - lambda2.abs());
    for i in 0..2 {
        for j in 0..2 {
            let f = p.stationary()[i] * rows[i][j];
            let observed = counts[i][j] as f64 / (n - 1) as f64;
            let band = 3.0 * (f * (1.0 - f) * c_mix / n as f64).sqrt();
            assert!(
                (observed - f).abs() <= band,
                "pair ({i},{j}): {observed} vs {f} ± {band}"
            );
        }
    }
}

#[test]
fn symbol_frequency_within_clt_band() {
    let rows = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
    let p = StochasticMatrix::new(rows).unwrap();
    let n = 100_000;
    let chain = p.sample_chain(n, 3);
    let p0 = p.stationary()[0];
    let freq = chain.0.iter().filter(|&&s| s == 0).count() as f64 / n as f64;
    // Exact asymptotic variance factor for a two-state chain.
    let lambda2: f64 = 0.9 + 0.8 - 1.0;
    let c_mix = (1.0 + lambda2) / (1.0 - lambda2);
    assert!((freq - p0).abs() <= 3.0 * (p0 * (1.0 - p0) * c_mix / n as f64).sqrt());
}

#[test]
fn zero_transitions_never_sampled() {
    let p = StochasticMatrix::new(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.3, 0.7], vec![0.6, 0.2, 0.2]]).unwrap();
    let chain = p.sample_chain(50_000, 99);
    assert!(chain.0.windows(2).all(|w| p.entry(w[0], w[1]) > 0.0));
    assert_eq!(chain, p.sample_chain(50_000, 99));
}
