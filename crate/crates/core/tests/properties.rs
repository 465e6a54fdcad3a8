mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use twinflow_core::circuit::{emit_netlist, normalize, parse_netlist};
use twinflow_core::logic::{BoolExpr, Step};
use twinflow_core::synthesize;

use common::{graph, random_netlist};

fn by_target(text: &str) -> BTreeMap<(u8, String), BoolExpr> {
    let g = graph(text);
    let eqs = synthesize(&g);
    [Step::One, Step::Two, Step::Three, Step::Four]
        .into_iter()
        .flat_map(|s| eqs.step(s).to_vec())
        .map(|e| ((e.step.number(), e.target), e.expr))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let once = graph(&random_netlist(seed, None));
        let twice = normalize(once.clone()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn emitted_netlist_parses_back(seed in any::<u64>()) {
        let g = graph(&random_netlist(seed, None));
        let text = emit_netlist(&g);
        let back = normalize(parse_netlist(&text).unwrap()).unwrap();
        prop_assert_eq!(g, back, "{}", text);
    }

    #[test]
    fn connection_order_does_not_change_equations(seed in any::<u64>(), order in any::<u64>()) {
        let plain = by_target(&random_netlist(seed, None));
        let shuffled = by_target(&random_netlist(seed, Some(order)));
        prop_assert_eq!(plain, shuffled);
    }
}
