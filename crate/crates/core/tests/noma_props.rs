mod common;

use common::{oracle_grid, oracle_partitions, oracle_sic};
use noma_qoe::noma::{
    count_plans, enumerate_partitions, enumerate_plans, power_grid, realized_layer_rates, sic_decode_outcome,
    sic_rates, sum_rate_bound, Cluster, NomaConfig, PowerAllocation,
};
use proptest::prelude::*;

#[test]
fn partitions_match_restricted_growth_enumeration() {
    for n in 1..=6 {
        for max_block in 1..=3 {
            let ids: Vec<usize> = (0..n).collect();
            assert_eq!(
                enumerate_partitions(&ids, max_block).unwrap(),
                oracle_partitions(n, max_block),
                "n={n} max_block={max_block}"
            );
        }
    }
}

#[test]
fn partition_counts() {
    // Involution numbers for pairs; Bell numbers when blocks are unbounded.
    let pairs = [1, 2, 4, 10, 26, 76];
    let bell = [1, 2, 5, 15, 52, 203];
    for n in 1..=6 {
        let ids: Vec<usize> = (0..n).collect();
        assert_eq!(enumerate_partitions(&ids, 2).unwrap().len(), pairs[n - 1]);
        assert_eq!(enumerate_partitions(&ids, n).unwrap().len(), bell[n - 1]);
    }
    assert!(enumerate_partitions(&(0..7).collect::<Vec<_>>(), 2).is_err());
}

#[test]
fn power_grid_matches_oracle() {
    for step in [0.05, 0.1, 0.125, 0.2, 0.25] {
        for size in 1..=3 {
            let got: Vec<Vec<f64>> = power_grid(size, step).into_iter().map(|a| a.fractions).collect();
            let want = oracle_grid(size, step);
            assert_eq!(got.len(), want.len(), "size {size} step {step}");
            for (g, w) in got.iter().zip(&want) {
                for (a, b) in g.iter().zip(w) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
    assert_eq!(power_grid(2, 0.05).len(), 9);
}

#[test]
fn plan_counts_agree() {
    let cfg = NomaConfig::default();
    for n in 1..=5 {
        let ids: Vec<usize> = (0..n).collect();
        let gains: Vec<f64> = (0..n).map(|u| 1e-10 / (u + 1) as f64).collect();
        let plans = enumerate_plans(&ids, &gains, &cfg, 1e6).unwrap();
        assert_eq!(plans.len() as u128, count_plans(&ids, &cfg).unwrap());
    }
    let ids: Vec<usize> = (0..4).collect();
    assert_eq!(count_plans(&ids, &cfg).unwrap(), 298);
}

fn arb_cluster() -> impl Strategy<Value = (Vec<f64>, usize, f64, f64, f64)> {
    (
        prop::collection::vec(-14.0f64..-8.0, 1..=3),
        0usize..64,
        -2.0f64..1.0,
        5.0f64..7.5,
        -14.0f64..-10.0,
    )
        .prop_map(|(g, pick, p, bw, n)| {
            (
                g.into_iter().map(|x| 10f64.powf(x)).collect(),
                pick,
                10f64.powf(p),
                10f64.powf(bw),
                10f64.powf(n),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn sic_sum_never_exceeds_bound((gains, pick, power, bw, noise) in arb_cluster()) {
        let ids: Vec<usize> = (0..gains.len()).collect();
        let cluster = Cluster::ordered(&ids, &gains);
        let grid = power_grid(gains.len(), 0.05);
        let alloc = &grid[pick % grid.len()];
        let sum: f64 = sic_rates(&cluster, alloc, power, bw, noise, &gains).iter().sum();
        let bound = sum_rate_bound(&cluster, power, bw, noise, &gains);
        prop_assert!(sum <= bound * (1.0 + 1e-9), "sum {} bound {}", sum, bound);
    }

    #[test]
    fn sic_rates_match_textbook_formula((gains, pick, power, bw, noise) in arb_cluster()) {
        let ids: Vec<usize> = (0..gains.len()).collect();
        let cluster = Cluster::ordered(&ids, &gains);
        let grid = power_grid(gains.len(), 0.05);
        let alloc = &grid[pick % grid.len()];
        let ordered: Vec<f64> = cluster.members().iter().map(|&u| gains[u]).collect();
        let want = oracle_sic(&ordered, &alloc.fractions, power, bw, noise);
        let got = sic_rates(&cluster, alloc, power, bw, noise, &gains);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn weak_rate_grows_with_its_share(g1 in -12.0f64..-9.0, ratio in 0.0f64..3.0) {
        let gains = vec![10f64.powf(g1), 10f64.powf(g1 - ratio)];
        let cluster = Cluster::ordered(&[0, 1], &gains);
        let weak = cluster.members()[1];
        let rates: Vec<f64> = power_grid(2, 0.05)
            .iter()
            .map(|a| sic_rates(&cluster, a, 0.05, 1e6, 1e-14, &gains)[1])
            .collect();
        prop_assert!(weak == 1 || gains[0] == gains[1]);
        prop_assert!(rates.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn decode_cascade((gains, pick, power, bw, noise) in arb_cluster(), fail in 0usize..3) {
        let ids: Vec<usize> = (0..gains.len()).collect();
        let cluster = Cluster::ordered(&ids, &gains);
        let grid = power_grid(gains.len(), 0.05);
        let alloc = &grid[pick % grid.len()];
        let realized = realized_layer_rates(&cluster, alloc, power, bw, noise, &gains);
        let planned = sic_rates(&cluster, alloc, power, bw, noise, &gains);
        // Asking for exactly the planned rates always decodes.
        prop_assert!(sic_decode_outcome(&cluster, &planned, &realized).iter().all(|&ok| ok));
        // Over-asking on one layer breaks that layer's owner and every
        // stronger receiver, which must decode it first.
        let n = gains.len();
        let bad = fail % n;
        let mut asked = planned.clone();
        asked[bad] = f64::INFINITY;
        let out = sic_decode_outcome(&cluster, &asked, &realized);
        for (rx, ok) in out.iter().enumerate() {
            prop_assert_eq!(*ok, rx > bad);
        }
    }
}

#[test]
fn single_user_gets_full_capacity() {
    let gains = [3e-11];
    let cluster = Cluster::ordered(&[0], &gains);
    let r = sic_rates(&cluster, &PowerAllocation::full(), 0.1, 5e6, 1e-13, &gains)[0];
    assert!((r - sum_rate_bound(&cluster, 0.1, 5e6, 1e-13, &gains)).abs() < 1e-6);
}
