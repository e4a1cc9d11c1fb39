use std::collections::BTreeSet;

use boundary_walk::verify::bundle::oracle_rule;
use boundary_walk::verify::oracle::enumerate_rule;
use boundary_walk::{exact_transform, ExactMeasure, GroupElement, GroupSpec, Rational, StoppingRule, Weight};
use proptest::prelude::*;

fn z() -> GroupSpec {
    GroupSpec::integers(1).unwrap()
}

fn walk() -> impl Strategy<Value = ExactMeasure> {
    prop::collection::btree_map(-2i64..=2, 1i64..=4, 1..=3).prop_map(|w| {
        let total: i64 = w.values().sum();
        ExactMeasure::from_weights(z(), w.into_iter().map(|(k, n)| (GroupElement::int(k), Rational::ratio(n, total)))).unwrap()
    })
}

fn targets() -> impl Strategy<Value = BTreeSet<GroupElement>> {
    prop::collection::btree_set((-3i64..=3).prop_map(GroupElement::int), 1..=3)
}

fn rule() -> impl Strategy<Value = StoppingRule> {
    let leaf = prop_oneof![
        (1usize..=3).prop_map(|n| StoppingRule::constant(n).unwrap()),
        targets().prop_map(|s| StoppingRule::first_visit(s).unwrap()),
        targets().prop_map(|s| StoppingRule::first_increment(s).unwrap()),
    ];
    leaf.prop_recursive(1, 2, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| StoppingRule::sequential(a, b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_matches_enumeration(mu in walk(), rule in rule(), depth in 1usize..=6) {
        let report = oracle_rule("random walk on Z", &mu, &rule, depth).unwrap();
        prop_assert_eq!(report.max_residual, 0.0, "{}", report);
    }

    #[test]
    fn stopped_and_unstopped_mass_sum_to_one(mu in walk(), rule in rule(), depth in 1usize..=6) {
        let o = enumerate_rule(&mu, &rule, depth).unwrap();
        prop_assert_eq!(o.measure.mass().clone() + o.unstopped.clone(), Rational::ratio(1, 1));
        let r = exact_transform(&mu, &rule, &Rational::ratio(1, i64::MAX), depth).unwrap();
        prop_assert_eq!(r.mass_deficit, o.unstopped);
    }
}
