use proptest::prelude::*;

use delta_core::covergraph::{min_weight_cover, FlowState, InteractionGraph};
use delta_core::model::{QueryId, UpdateId};

#[derive(Clone, Debug)]
struct Spec {
    queries: Vec<u64>,
    updates: Vec<u64>,
    edges: Vec<(usize, usize)>,
}

fn spec() -> impl Strategy<Value = Spec> {
    (
        prop::collection::vec(0u64..50, 0..7),
        prop::collection::vec(0u64..50, 0..7),
    )
        .prop_flat_map(|(queries, updates)| {
            let (nq, nu) = (queries.len(), updates.len());
            let edges = if nq == 0 || nu == 0 {
                Just(Vec::new()).boxed()
            } else {
                prop::collection::vec((0..nu, 0..nq), 0..20).boxed()
            };
            (Just(queries), Just(updates), edges)
        })
        .prop_map(|(queries, updates, mut edges)| {
            edges.sort_unstable();
            edges.dedup();
            Spec { queries, updates, edges }
        })
}

fn build(s: &Spec) -> InteractionGraph {
    let mut g = InteractionGraph::new();
    for (i, w) in s.queries.iter().enumerate() {
        g.add_query(QueryId(i as u64), *w).unwrap();
    }
    for (i, w) in s.updates.iter().enumerate() {
        g.add_update(UpdateId(i as u64), *w).unwrap();
    }
    for &(u, q) in &s.edges {
        g.add_edge(UpdateId(u as u64), QueryId(q as u64)).unwrap();
    }
    g
}

fn brute(s: &Spec) -> u64 {
    let (nq, nu) = (s.queries.len(), s.updates.len());
    (0u32..1 << (nq + nu))
        .filter(|m| s.edges.iter().all(|&(u, q)| m & (1 << u) != 0 || m & (1 << (nu + q)) != 0))
        .map(|m| {
            (0..nu).filter(|u| m & (1 << u) != 0).map(|u| s.updates[u]).sum::<u64>()
                + (0..nq).filter(|q| m & (1 << (nu + q)) != 0).map(|q| s.queries[q]).sum::<u64>()
        })
        .min()
        .unwrap()
}

proptest! {
    #[test]
    fn cover_is_minimal_and_valid(s in spec()) {
        let g = build(&s);
        let (cover, flow) = min_weight_cover(&g, FlowState::new());
        prop_assert!(cover.covers(&g));
        prop_assert_eq!(cover.weight, brute(&s));
        prop_assert_eq!(flow.value(), cover.weight);
        prop_assert!(flow.is_valid_for(&g));
    }

    #[test]
    fn warm_start_after_growth_matches_cold(s in spec(), extra in 0u64..50) {
        let mut g = build(&s);
        let (_, flow) = min_weight_cover(&g, FlowState::new());
        let q = QueryId(s.queries.len() as u64);
        g.add_query(q, extra).unwrap();
        for u in 0..s.updates.len() as u64 {
            if u % 2 == 0 {
                g.add_edge(UpdateId(u), q).unwrap();
            }
        }
        let (warm, _) = min_weight_cover(&g, flow);
        let (cold, _) = min_weight_cover(&g, FlowState::new());
        prop_assert_eq!(warm.weight, cold.weight);
    }

    #[test]
    fn pruning_keeps_a_valid_flow(s in spec()) {
        let mut g = build(&s);
        let (cover, mut flow) = min_weight_cover(&g, FlowState::new());
        g.prune_remainder(&cover, &mut flow);
        prop_assert!(flow.is_valid_for(&g));
        let (after, _) = min_weight_cover(&g, flow);
        let (cold, _) = min_weight_cover(&g, FlowState::new());
        prop_assert_eq!(after.weight, cold.weight);
    }
}
