mod common;

use common::{random_case, MODES};
use graphdisc::oracle::{condition, expand, max_discrepancy};
use graphdisc::state::{compute_state, compute_state_parallel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn engine_matches_operator_expansion(seed in any::<u64>(), mode in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, rule, m) = random_case(&mut rng, MODES[mode]);
        let engine = compute_state(&g, &rule);
        let oracle = condition(&expand(&g, m).unwrap(), &g, &rule);
        let (diff, ket) = max_discrepancy(&engine, &oracle);
        prop_assert!(diff <= 1e-10, "diff {diff:e} at {ket:?} on {}", g.to_json());
    }

    #[test]
    fn chunking_does_not_change_the_state(seed in any::<u64>(), mode in 0usize..3, workers in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, rule, _) = random_case(&mut rng, MODES[mode]);
        prop_assert_eq!(compute_state_parallel(&g, &rule, workers).unwrap(), compute_state(&g, &rule));
    }
}
