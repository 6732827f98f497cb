mod common;

use jss_core::agents::{brute_force_optimal, env_tree_best, env_tree_best_with, OracleLimits};
use jss_core::env::{EnvConfig, EnvState};
use jss_core::Instance;

#[test]
fn enumeration_oracle_sanity() {
    let serial = Instance::from_rows("s", 1, &[&[(0, 3)], &[(0, 4)]]).unwrap();
    assert_eq!(common::enumerate_optimal(&serial), 7);
    let two = Instance::from_rows("2x2", 2, &[&[(0, 2), (1, 2)], &[(1, 3), (0, 1)]]).unwrap();
    assert_eq!(common::enumerate_optimal(&two), 5);
    assert_eq!(common::permutations(4).len(), 24);
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let limits = OracleLimits::default();
    let shapes = [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (2, 4), (4, 3)];
    for (j, m) in shapes {
        for seed in 0..12 {
            let inst = Instance::generate_random(j, m, (1, 20), seed).unwrap();
            let expected = common::enumerate_optimal(&inst);
            assert_eq!(
                brute_force_optimal(&inst, &limits),
                Ok(expected),
                "{}",
                inst.name
            );
        }
    }
}

#[test]
fn env_tree_never_beats_the_optimum() {
    let limits = OracleLimits::default();
    for seed in 0..20 {
        let inst = Instance::generate_random(3, 3, (1, 30), 1000 + seed).unwrap();
        let opt = brute_force_optimal(&inst, &limits).unwrap();
        assert!(env_tree_best(&inst, &limits).unwrap() >= opt);
    }
}

#[test]
fn unrestricted_tree_reaches_the_optimum() {
    // with every reduction rule off, only the caps-free env remains; its tree
    // must still contain an optimal schedule
    let limits = OracleLimits::default();
    let cfg = EnvConfig {
        non_final_prioritization: false,
        noop_future_work: false,
        noop_caps: false,
        ..EnvConfig::default()
    };
    for seed in 0..10 {
        let inst = Instance::generate_random(3, 3, (1, 15), 500 + seed).unwrap();
        let opt = common::enumerate_optimal(&inst);
        let root = EnvState::with_config(&inst, cfg).unwrap();
        assert_eq!(env_tree_best_with(&root, &limits), Ok(opt), "{}", inst.name);
    }
}
