mod common;

use common::*;
use ddsbm::identify::{recover, sup_norm, theta_from, NodeProbMatrix};
use ddsbm::inference::{ari_labels, hellinger, kl_product_bernoulli, mode_partition, PartitionKey};
use ddsbm::model::{block_stats, log_posterior};
use ddsbm::sampler::{Chain, ChainState, Target};
use ddsbm::{AdjacencyMatrix, Assignment, ConnectivityMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn co_membership(labels: &[usize]) -> Vec<bool> {
    let n = labels.len();
    (0..n * n).map(|idx| labels[idx / n] == labels[idx % n]).collect()
}

fn random_perm(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

fn relabel_p(p: &ConnectivityMatrix, perm: &[usize]) -> ConnectivityMatrix {
    let k = p.k();
    let mut rows = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            rows[perm[a]][perm[b]] = p.get(a, b);
        }
    }
    ConnectivityMatrix::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_is_invariant_to_node_and_label_permutations(seed in any::<u64>()) {
        let case = small_case(seed);
        let base = log_posterior(&case.a, &case.z, &case.p, &case.hp).unwrap();

        let n = case.a.n();
        let perm = random_perm(n, seed);
        let edges: Vec<(usize, usize)> = case.a.edges().map(|(i, j)| (perm[i], perm[j])).collect();
        let a2 = AdjacencyMatrix::from_edges(n, &edges).unwrap();
        let mut labels = vec![0; n];
        for i in 0..n {
            labels[perm[i]] = case.z.label(i);
        }
        let z2 = Assignment::new(labels, case.z.k()).unwrap();
        let moved = log_posterior(&a2, &z2, &case.p, &case.hp).unwrap();
        prop_assert!((moved - base).abs() < 1e-9 * base.abs().max(1.0));

        let lperm = random_perm(case.z.k(), seed ^ 1);
        let z3 = Assignment::new(case.z.labels().iter().map(|&l| lperm[l]).collect(), case.z.k()).unwrap();
        let p3 = relabel_p(&case.p, &lperm);
        let relabelled = log_posterior(&case.a, &z3, &p3, &case.hp).unwrap();
        prop_assert!((relabelled - base).abs() < 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn incremental_state_stays_coherent(seed in any::<u64>()) {
        let case = small_case(seed);
        let mut chain = Chain::new(&case.a, case.hp, seed).unwrap();
        for _ in 0..300 {
            chain.step();
            prop_assert!(chain.state.audit(&chain.target, 1e-9).is_ok());
            prop_assert_eq!(&chain.state.stats, &block_stats(&case.a, &chain.state.z).unwrap());
        }
    }

    #[test]
    fn ari_is_symmetric_and_label_invariant(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let left = random_assignment(n, 4, &mut rng);
        let right = random_assignment(n, 3, &mut rng);
        let ab = ari_labels(left.labels(), right.labels()).unwrap();
        prop_assert_eq!(ab, ari_labels(right.labels(), left.labels()).unwrap());
        let perm = random_perm(4, seed);
        let renamed: Vec<usize> = left.labels().iter().map(|&l| perm[l]).collect();
        prop_assert!((ari_labels(&renamed, right.labels()).unwrap() - ab).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert!((ari_labels(left.labels(), &renamed).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_keys_identify_co_membership(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_assignment(n, 3, &mut rng);
        let b = random_assignment(n, 3, &mut rng);
        let same_key = PartitionKey::new(&a) == PartitionKey::new(&b);
        prop_assert_eq!(same_key, co_membership(a.labels()) == co_membership(b.labels()));
    }

    #[test]
    fn modal_partition_ignores_relabelling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<Assignment> = (0..15).map(|_| random_assignment(5, 2, &mut rng)).collect();
        let relabelled: Vec<Assignment> = draws
            .iter()
            .map(|z| Assignment::new(z.labels().iter().map(|&l| 1 - l).collect(), 2).unwrap())
            .collect();
        prop_assert_eq!(mode_partition(&draws).unwrap(), mode_partition(&relabelled).unwrap());
    }

    #[test]
    fn hellinger_dominates_sup_norm(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let t0 = NodeProbMatrix::from_upper(n, |_, _| rng.random()).unwrap();
        let t1 = NodeProbMatrix::from_upper(n, |_, _| rng.random()).unwrap();
        prop_assert!(sup_norm(&t0, &t1).unwrap() <= 2.0 * hellinger(&t0, &t1).unwrap() + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_on_equality(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let t0 = NodeProbMatrix::from_upper(n, |_, _| rng.random_range(0.01..0.99)).unwrap();
        let t1 = NodeProbMatrix::from_upper(n, |_, _| rng.random_range(0.01..0.99)).unwrap();
        let kl = kl_product_bernoulli(&t0, &t1).unwrap();
        prop_assert!(kl > 0.0);
        prop_assert_eq!(kl_product_bernoulli(&t0, &t0).unwrap(), 0.0);
    }

    #[test]
    fn recover_round_trips_and_follows_node_permutations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let k = rng.random_range(1..=5);
        let n = 2 * k + rng.random_range(0..8);
        let mut labels: Vec<usize> = (0..n).map(|i| if i < 2 * k { i / 2 } else { rng.random_range(0..k) }).collect();
        labels.shuffle(&mut rng);
        let z = Assignment::new(labels, k).unwrap();
        let p = random_dominant_p(k, 0.1, &mut rng);
        let theta = theta_from(&z, &p).unwrap();
        let rec = recover(&theta, 0.0).unwrap();
        prop_assert_eq!(rec.k, k);
        prop_assert_eq!(co_membership(rec.z.labels()), co_membership(z.labels()));
        prop_assert_eq!(theta_from(&rec.z, &rec.p).unwrap(), theta.clone());

        let perm = random_perm(n, seed ^ 7);
        let moved = recover(&theta.permuted(&perm).unwrap(), 0.0).unwrap();
        let mut expected = vec![0; n];
        for i in 0..n {
            expected[perm[i]] = rec.z.label(i);
        }
        prop_assert_eq!(co_membership(moved.z.labels()), co_membership(&expected));
    }

    #[test]
    fn different_k_never_recover_to_the_same_count(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let k1 = rng.random_range(1..=4);
        let k2 = k1 + rng.random_range(1..=2);
        let n = 2 * k2 + 2;
        let build = |k: usize, rng: &mut ChaCha8Rng| {
            let z = Assignment::new((0..n).map(|i| i % k).collect(), k).unwrap();
            recover(&theta_from(&z, &random_dominant_p(k, 0.1, rng)).unwrap(), 0.0).unwrap().k
        };
        prop_assert_ne!(build(k1, &mut rng), build(k2, &mut rng));
    }
}

#[test]
fn chain_state_rejects_incoherent_construction() {
    let case = small_case(1);
    let target = Target::new(&case.a, case.hp);
    let bad_p = ConnectivityMatrix::constant(case.z.k() + 1, 0.7, 0.1).unwrap();
    assert!(ChainState::new(&target, case.z.clone(), bad_p).is_err());
}
