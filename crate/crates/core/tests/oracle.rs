mod common;

use common::{case_from_seed, compare, reference};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn engine_matches_straight_line_replay(seed in any::<u64>()) {
        let case = case_from_seed(seed, 10);
        match (case.run(), reference(&case)) {
            (Ok(result), Ok(r)) => {
                if let Err(msg) = compare(&result, &r, 1e-9) {
                    prop_assert!(false, "seed {seed}: {msg}");
                }
            }
            (Err(e), Err(p)) => prop_assert_eq!(e.to_string(), p.to_string()),
            (a, b) => prop_assert!(false, "seed {seed}: engine {:?} vs reference {:?}", a.map(|_| ()), b.map(|_| ())),
        }
    }
}
