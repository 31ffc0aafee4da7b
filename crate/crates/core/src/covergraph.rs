//! Weighted bipartite interaction graph between outstanding updates and the
//! queries that depend on them, with minimum-weight vertex cover computed by
//! an incremental max-flow.
//!
//! The flow network adds a source with an arc to every update node (capacity
//! = update weight), an uncapacitated arc for every update-query edge, and an
//! arc from every query node to the sink (capacity = query weight). The flow
//! is kept between calls; adding nodes and edges leaves it valid, so each
//! cover computation only searches for the augmenting paths created since the
//! previous one.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::model::{Bytes, QueryId, UpdateId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("query node {0} already present")]
    DuplicateQuery(QueryId),
    #[error("update node {0} already present")]
    DuplicateUpdate(UpdateId),
    #[error("edge ({0}, {1}) references a missing node")]
    DanglingEdge(UpdateId, QueryId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct QueryNode {
    weight: Bytes,
    updates: BTreeSet<UpdateId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct UpdateNode {
    weight: Bytes,
    queries: BTreeSet<QueryId>,
}

/// Bipartite graph: edges only ever join an update node to a query node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionGraph {
    queries: BTreeMap<QueryId, QueryNode>,
    updates: BTreeMap<UpdateId, UpdateNode>,
    edges: usize,
}

impl InteractionGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_query(&mut self, qid: QueryId, weight: Bytes) -> Result<(), GraphError> {
        if self.queries.contains_key(&qid) {
            return Err(GraphError::DuplicateQuery(qid));
        }
        self.queries.insert(
            qid,
            QueryNode {
                weight,
                updates: BTreeSet::new(),
            },
        );
        Ok(())
    }

    pub fn add_update(&mut self, uid: UpdateId, weight: Bytes) -> Result<(), GraphError> {
        if self.updates.contains_key(&uid) {
            return Err(GraphError::DuplicateUpdate(uid));
        }
        self.updates.insert(
            uid,
            UpdateNode {
                weight,
                queries: BTreeSet::new(),
            },
        );
        Ok(())
    }

    /// Adds the edge `(uid, qid)`. Adding an existing edge is a no-op.
    pub fn add_edge(&mut self, uid: UpdateId, qid: QueryId) -> Result<(), GraphError> {
        let (Some(u), Some(q)) = (self.updates.get_mut(&uid), self.queries.get_mut(&qid)) else {
            return Err(GraphError::DanglingEdge(uid, qid));
        };
        if u.queries.insert(qid) {
            q.updates.insert(uid);
            self.edges += 1;
        }
        Ok(())
    }

    /// Removes an update node and its edges, repairing `flow` so it stays
    /// valid. Returns false if the node was absent.
    pub fn remove_update(&mut self, uid: UpdateId, flow: &mut FlowState) -> bool {
        let Some(node) = self.updates.remove(&uid) else {
            return false;
        };
        for qid in &node.queries {
            if let Some(q) = self.queries.get_mut(qid) {
                q.updates.remove(&uid);
            }
        }
        self.edges -= node.queries.len();
        flow.conform(self);
        true
    }

    /// Removes a query node and its edges, repairing `flow`.
    pub fn remove_query(&mut self, qid: QueryId, flow: &mut FlowState) -> bool {
        let Some(node) = self.queries.remove(&qid) else {
            return false;
        };
        for uid in &node.updates {
            if let Some(u) = self.updates.get_mut(uid) {
                u.queries.remove(&qid);
            }
        }
        self.edges -= node.updates.len();
        flow.conform(self);
        true
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn update_count(&self) -> usize {
        self.updates.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty() && self.updates.is_empty()
    }

    pub fn contains_query(&self, qid: QueryId) -> bool {
        self.queries.contains_key(&qid)
    }

    pub fn contains_update(&self, uid: UpdateId) -> bool {
        self.updates.contains_key(&uid)
    }

    pub fn query_weight(&self, qid: QueryId) -> Option<Bytes> {
        self.queries.get(&qid).map(|q| q.weight)
    }

    pub fn update_weight(&self, uid: UpdateId) -> Option<Bytes> {
        self.updates.get(&uid).map(|u| u.weight)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.queries.keys().copied()
    }

    pub fn update_ids(&self) -> impl Iterator<Item = UpdateId> + '_ {
        self.updates.keys().copied()
    }

    /// All edges, ordered by update id then query id.
    pub fn edges(&self) -> impl Iterator<Item = (UpdateId, QueryId)> + '_ {
        self.updates
            .iter()
            .flat_map(|(u, node)| node.queries.iter().map(move |q| (*u, *q)))
    }

    pub fn neighbors_of_query(&self, qid: QueryId) -> impl Iterator<Item = UpdateId> + '_ {
        self.queries
            .get(&qid)
            .into_iter()
            .flat_map(|q| q.updates.iter().copied())
    }

    /// Keeps only the updates outside `cover` and the queries inside it,
    /// together with the edges among them.
    pub fn prune_remainder(&mut self, cover: &CoverResult, flow: &mut FlowState) {
        self.updates.retain(|u, _| !cover.updates.contains(u));
        self.queries.retain(|q, _| cover.queries.contains(q));
        let queries = &self.queries;
        let mut edges = 0;
        for node in self.updates.values_mut() {
            node.queries.retain(|q| queries.contains_key(q));
            edges += node.queries.len();
        }
        let updates = &self.updates;
        for node in self.queries.values_mut() {
            node.updates.retain(|u| updates.contains_key(u));
        }
        self.edges = edges;
        flow.conform(self);
    }

    /// Deterministic text dump of the graph and a flow over it.
    pub fn dump(&self, flow: &FlowState) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "flow {}", flow.value);
        for (uid, node) in &self.updates {
            let _ = writeln!(out, "update {} w={} f={}", uid.0, node.weight, flow.source_flow(*uid));
        }
        for (qid, node) in &self.queries {
            let _ = writeln!(out, "query {} w={} f={}", qid.0, node.weight, flow.sink_flow(*qid));
        }
        for (uid, qid) in self.edges() {
            let _ = writeln!(out, "edge {} {} f={}", uid.0, qid.0, flow.arc_flow(uid, qid));
        }
        out
    }
}

/// Flow on the network derived from an [`InteractionGraph`]. Zero flows are
/// not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowState {
    source: BTreeMap<UpdateId, Bytes>,
    sink: BTreeMap<QueryId, Bytes>,
    arcs: BTreeMap<(UpdateId, QueryId), Bytes>,
    // reverse index: query -> updates with positive flow into it
    into_query: BTreeMap<QueryId, BTreeSet<UpdateId>>,
    value: Bytes,
    augmentations: u64,
}

impl FlowState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> Bytes {
        self.value
    }

    /// Augmenting paths found over the lifetime of this flow.
    pub fn augmentations(&self) -> u64 {
        self.augmentations
    }

    pub fn source_flow(&self, uid: UpdateId) -> Bytes {
        self.source.get(&uid).copied().unwrap_or(0)
    }

    pub fn sink_flow(&self, qid: QueryId) -> Bytes {
        self.sink.get(&qid).copied().unwrap_or(0)
    }

    pub fn arc_flow(&self, uid: UpdateId, qid: QueryId) -> Bytes {
        self.arcs.get(&(uid, qid)).copied().unwrap_or(0)
    }

    fn add_arc(&mut self, uid: UpdateId, qid: QueryId, delta: Bytes) {
        *self.arcs.entry((uid, qid)).or_insert(0) += delta;
        self.into_query.entry(qid).or_default().insert(uid);
    }

    fn sub_arc(&mut self, uid: UpdateId, qid: QueryId, delta: Bytes) {
        let f = self.arcs.get_mut(&(uid, qid)).expect("reverse arc without flow");
        *f -= delta;
        if *f == 0 {
            self.arcs.remove(&(uid, qid));
            if let Some(set) = self.into_query.get_mut(&qid) {
                set.remove(&uid);
                if set.is_empty() {
                    self.into_query.remove(&qid);
                }
            }
        }
    }

    /// Drops flow on arcs whose endpoints are gone from `graph`, reducing the
    /// surviving endpoint's source or sink flow so conservation still holds.
    pub fn conform(&mut self, graph: &InteractionGraph) {
        let stale: Vec<((UpdateId, QueryId), Bytes)> = self
            .arcs
            .iter()
            .filter(|((u, q), _)| {
                !graph
                    .updates
                    .get(u)
                    .is_some_and(|node| node.queries.contains(q))
            })
            .map(|(k, f)| (*k, *f))
            .collect();
        for ((u, q), f) in stale {
            self.sub_arc(u, q, f);
            if let Some(s) = self.source.get_mut(&u) {
                *s -= f;
            }
            if let Some(t) = self.sink.get_mut(&q) {
                *t -= f;
            }
        }
        self.source
            .retain(|u, f| *f > 0 && graph.updates.contains_key(u));
        self.sink.retain(|q, f| *f > 0 && graph.queries.contains_key(q));
        self.value = self.source.values().sum();
    }

    /// Checks capacities and conservation against `graph`.
    pub fn is_valid_for(&self, graph: &InteractionGraph) -> bool {
        let mut out_of = BTreeMap::<UpdateId, Bytes>::new();
        let mut into = BTreeMap::<QueryId, Bytes>::new();
        for (&(u, q), &f) in &self.arcs {
            match graph.updates.get(&u) {
                Some(node) if node.queries.contains(&q) => {}
                _ => return false,
            }
            *out_of.entry(u).or_insert(0) += f;
            *into.entry(q).or_insert(0) += f;
        }
        let sources_ok = graph.updates.iter().all(|(u, node)| {
            let s = self.source_flow(*u);
            s <= node.weight && s == out_of.get(u).copied().unwrap_or(0)
        });
        let sinks_ok = graph.queries.iter().all(|(q, node)| {
            let t = self.sink_flow(*q);
            t <= node.weight && t == into.get(q).copied().unwrap_or(0)
        });
        let no_strays = self.source.keys().all(|u| graph.updates.contains_key(u))
            && self.sink.keys().all(|q| graph.queries.contains_key(q));
        sources_ok
            && sinks_ok
            && no_strays
            && self.value == self.source.values().sum::<Bytes>()
            && self.value == self.sink.values().sum::<Bytes>()
    }
}

/// Minimum-weight vertex cover of an interaction graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoverResult {
    pub queries: BTreeSet<QueryId>,
    pub updates: BTreeSet<UpdateId>,
    pub weight: Bytes,
}

impl CoverResult {
    /// True if every edge of `graph` has an endpoint in the cover.
    pub fn covers(&self, graph: &InteractionGraph) -> bool {
        graph
            .edges()
            .all(|(u, q)| self.updates.contains(&u) || self.queries.contains(&q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Vertex {
    Source,
    Update(UpdateId),
    Query(QueryId),
    Sink,
}

/// Residual-graph breadth-first search from the source. Returns the parent
/// of every reached vertex.
fn residual_bfs(
    graph: &InteractionGraph,
    flow: &FlowState,
    stop_at_sink: bool,
) -> BTreeMap<Vertex, Vertex> {
    let mut parent = BTreeMap::new();
    let mut queue = VecDeque::new();
    parent.insert(Vertex::Source, Vertex::Source);
    queue.push_back(Vertex::Source);
    while let Some(v) = queue.pop_front() {
        let mut visit = |w: Vertex, parent: &mut BTreeMap<Vertex, Vertex>| {
            if parent.contains_key(&w) {
                return false;
            }
            parent.insert(w, v);
            if w == Vertex::Sink {
                return stop_at_sink;
            }
            queue.push_back(w);
            false
        };
        match v {
            Vertex::Source => {
                for (u, node) in &graph.updates {
                    if flow.source_flow(*u) < node.weight && visit(Vertex::Update(*u), &mut parent)
                    {
                        return parent;
                    }
                }
            }
            Vertex::Update(u) => {
                for q in &graph.updates[&u].queries {
                    if visit(Vertex::Query(*q), &mut parent) {
                        return parent;
                    }
                }
            }
            Vertex::Query(q) => {
                if flow.sink_flow(q) < graph.queries[&q].weight && visit(Vertex::Sink, &mut parent) {
                    return parent;
                }
                if let Some(back) = flow.into_query.get(&q) {
                    for u in back {
                        if visit(Vertex::Update(*u), &mut parent) {
                            return parent;
                        }
                    }
                }
            }
            Vertex::Sink => {}
        }
    }
    parent
}

/// Pushes one shortest augmenting path, if any. Returns the amount pushed.
fn augment_once(graph: &InteractionGraph, flow: &mut FlowState) -> Option<Bytes> {
    let parent = residual_bfs(graph, flow, true);
    if !parent.contains_key(&Vertex::Sink) {
        return None;
    }
    let mut path = vec![Vertex::Sink];
    let mut v = Vertex::Sink;
    while v != Vertex::Source {
        v = parent[&v];
        path.push(v);
    }
    path.reverse();

    let mut bottleneck = Bytes::MAX;
    for hop in path.windows(2) {
        let residual = match (hop[0], hop[1]) {
            (Vertex::Source, Vertex::Update(u)) => graph.updates[&u].weight - flow.source_flow(u),
            (Vertex::Update(_), Vertex::Query(_)) => Bytes::MAX,
            (Vertex::Query(q), Vertex::Update(u)) => flow.arc_flow(u, q),
            (Vertex::Query(q), Vertex::Sink) => graph.queries[&q].weight - flow.sink_flow(q),
            other => unreachable!("impossible residual hop {other:?}"),
        };
        bottleneck = bottleneck.min(residual);
    }
    debug_assert!(bottleneck > 0 && bottleneck < Bytes::MAX);

    for hop in path.windows(2) {
        match (hop[0], hop[1]) {
            (Vertex::Source, Vertex::Update(u)) => *flow.source.entry(u).or_insert(0) += bottleneck,
            (Vertex::Update(u), Vertex::Query(q)) => flow.add_arc(u, q, bottleneck),
            (Vertex::Query(q), Vertex::Update(u)) => flow.sub_arc(u, q, bottleneck),
            (Vertex::Query(q), Vertex::Sink) => *flow.sink.entry(q).or_insert(0) += bottleneck,
            _ => unreachable!(),
        }
    }
    flow.value += bottleneck;
    flow.augmentations += 1;
    Some(bottleneck)
}

/// Computes a minimum-weight vertex cover of `graph`, starting the max-flow
/// search from `prior` (any valid flow for the graph's network).
///
/// After the flow is maximum, the cover is read off the residual network:
/// update nodes the source cannot reach plus query nodes it can. The
/// source-reachable set found this way is the smallest min-cut side, so among
/// equal-weight covers the one shipping updates is preferred.
pub fn min_weight_cover(graph: &InteractionGraph, mut prior: FlowState) -> (CoverResult, FlowState) {
    debug_assert!(prior.is_valid_for(graph), "prior flow invalid for graph");
    while augment_once(graph, &mut prior).is_some() {}

    let reached = residual_bfs(graph, &prior, false);
    let mut cover = CoverResult::default();
    for (u, node) in &graph.updates {
        if !reached.contains_key(&Vertex::Update(*u)) {
            cover.updates.insert(*u);
            cover.weight += node.weight;
        }
    }
    for (q, node) in &graph.queries {
        if reached.contains_key(&Vertex::Query(*q)) {
            cover.queries.insert(*q);
            cover.weight += node.weight;
        }
    }
    debug_assert_eq!(cover.weight, prior.value);
    (cover, prior)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(i: u64) -> QueryId {
        QueryId(i)
    }
    fn u(i: u64) -> UpdateId {
        UpdateId(i)
    }

    fn build(updates: &[(u64, Bytes)], queries: &[(u64, Bytes)], edges: &[(u64, u64)]) -> InteractionGraph {
        let mut g = InteractionGraph::new();
        for &(id, w) in updates {
            g.add_update(u(id), w).unwrap();
        }
        for &(id, w) in queries {
            g.add_query(q(id), w).unwrap();
        }
        for &(a, b) in edges {
            g.add_edge(u(a), q(b)).unwrap();
        }
        g
    }

    /// Exhaustive minimum over all vertex subsets.
    fn brute_force(g: &InteractionGraph) -> Bytes {
        let us: Vec<_> = g.update_ids().collect();
        let qs: Vec<_> = g.query_ids().collect();
        let n = us.len() + qs.len();
        let edges: Vec<_> = g.edges().collect();
        let mut best = Bytes::MAX;
        for mask in 0u32..(1 << n) {
            let in_u = |x: UpdateId| us.iter().position(|y| *y == x).is_some_and(|i| mask >> i & 1 == 1);
            let in_q = |x: QueryId| {
                qs.iter()
                    .position(|y| *y == x)
                    .is_some_and(|i| mask >> (us.len() + i) & 1 == 1)
            };
            if edges.iter().all(|(a, b)| in_u(*a) || in_q(*b)) {
                let w: Bytes = us.iter().filter(|x| in_u(**x)).map(|x| g.update_weight(*x).unwrap()).sum::<Bytes>()
                    + qs.iter().filter(|x| in_q(**x)).map(|x| g.query_weight(*x).unwrap()).sum::<Bytes>();
                best = best.min(w);
            }
        }
        best
    }

    #[test]
    fn add_query_to_empty_graph() {
        let mut g = InteractionGraph::new();
        g.add_query(q(1), 5).unwrap();
        assert_eq!((g.query_count(), g.update_count(), g.edge_count()), (1, 0, 0));
    }

    #[test]
    fn duplicate_and_dangling_are_errors() {
        let mut g = build(&[(1, 1)], &[(7, 3)], &[]);
        assert_eq!(g.add_query(q(7), 1), Err(GraphError::DuplicateQuery(q(7))));
        assert_eq!(g.add_update(u(1), 1), Err(GraphError::DuplicateUpdate(u(1))));
        assert_eq!(g.add_edge(u(2), q(7)), Err(GraphError::DanglingEdge(u(2), q(7))));
        assert_eq!(g.add_edge(u(1), q(8)), Err(GraphError::DanglingEdge(u(1), q(8))));
    }

    #[test]
    fn empty_graph_has_empty_cover() {
        let (cover, flow) = min_weight_cover(&InteractionGraph::new(), FlowState::new());
        assert_eq!(cover, CoverResult::default());
        assert_eq!(flow.value(), 0);
    }

    #[test]
    fn internal_subgraph_of_cached_objects() {
        // u1 and u6 both affect q7. Shipping q7 beats shipping both updates
        // when it is cheaper, and loses otherwise.
        let g = build(&[(1, 1), (6, 11)], &[(7, 10)], &[(1, 7), (6, 7)]);
        assert_eq!(g.edge_count(), 2);
        let (cover, _) = min_weight_cover(&g, FlowState::new());
        assert_eq!(cover.queries, BTreeSet::from([q(7)]));
        assert!(cover.updates.is_empty());
        assert_eq!(cover.weight, 10);

        let g = build(&[(1, 1), (6, 2)], &[(7, 10)], &[(1, 7), (6, 7)]);
        let (cover, _) = min_weight_cover(&g, FlowState::new());
        assert_eq!(cover.updates, BTreeSet::from([u(1), u(6)]));
        assert_eq!(cover.weight, 3);
    }

    #[test]
    fn ties_prefer_updates() {
        let g = build(&[(1, 5)], &[(2, 5)], &[(1, 2)]);
        let (cover, _) = min_weight_cover(&g, FlowState::new());
        assert_eq!(cover.updates, BTreeSet::from([u(1)]));
        assert!(cover.queries.is_empty());
    }

    #[test]
    fn singleton_cover_picks_lighter_side() {
        let g = build(&[(1, 9)], &[(2, 4)], &[(1, 2)]);
        let (cover, _) = min_weight_cover(&g, FlowState::new());
        assert_eq!(cover.queries, BTreeSet::from([q(2)]));
    }

    #[test]
    fn small_graphs_match_brute_force() {
        let g = build(
            &[(1, 3), (2, 4), (3, 2)],
            &[(10, 5), (11, 1), (12, 6)],
            &[(1, 10), (2, 10), (2, 11), (3, 12), (1, 12)],
        );
        let (cover, flow) = min_weight_cover(&g, FlowState::new());
        assert!(cover.covers(&g));
        assert_eq!(cover.weight, brute_force(&g));
        assert_eq!(flow.value(), cover.weight);
        assert!(flow.is_valid_for(&g));
    }

    #[test]
    fn incremental_matches_from_scratch() {
        let mut g = build(&[(1, 3)], &[(10, 5)], &[(1, 10)]);
        let (_, flow) = min_weight_cover(&g, FlowState::new());
        g.add_update(u(2), 4).unwrap();
        g.add_query(q(11), 2).unwrap();
        g.add_edge(u(2), q(11)).unwrap();
        g.add_edge(u(1), q(11)).unwrap();
        assert!(flow.is_valid_for(&g));
        let (inc, _) = min_weight_cover(&g, flow);
        let (scratch, _) = min_weight_cover(&g, FlowState::new());
        assert_eq!(inc.weight, scratch.weight);
        assert_eq!(inc.weight, brute_force(&g));
    }

    #[test]
    fn prune_with_all_updates_covered() {
        let mut g = build(&[(1, 1), (2, 1)], &[(10, 5), (11, 6)], &[(1, 10), (2, 11)]);
        let cover = CoverResult {
            updates: BTreeSet::from([u(1), u(2)]),
            queries: BTreeSet::from([q(10), q(11)]),
            weight: 13,
        };
        let (_, mut flow) = min_weight_cover(&g, FlowState::new());
        g.prune_remainder(&cover, &mut flow);
        assert_eq!(g.update_count(), 0);
        assert_eq!(g.query_weight(q(10)), Some(5));
        assert_eq!(g.query_weight(q(11)), Some(6));
        assert!(flow.is_valid_for(&g));
        assert_eq!(flow.value(), 0);
    }

    #[test]
    fn prune_with_only_query_covered() {
        let mut g = build(&[(1, 4), (2, 4)], &[(10, 3)], &[(1, 10), (2, 10)]);
        let (cover, mut flow) = min_weight_cover(&g, FlowState::new());
        assert_eq!(cover.queries, BTreeSet::from([q(10)]));
        g.prune_remainder(&cover, &mut flow);
        assert_eq!((g.query_count(), g.update_count(), g.edge_count()), (1, 2, 2));
        assert!(flow.is_valid_for(&g));
        assert_eq!(flow.value(), 3);
    }

    #[test]
    fn removing_nodes_keeps_flow_valid() {
        let mut g = build(&[(1, 4), (2, 4)], &[(10, 3), (11, 5)], &[(1, 10), (2, 10), (2, 11)]);
        let (_, mut flow) = min_weight_cover(&g, FlowState::new());
        assert!(g.remove_update(u(2), &mut flow));
        assert!(flow.is_valid_for(&g));
        assert!(!g.remove_update(u(2), &mut flow));
        assert!(g.remove_query(q(10), &mut flow));
        assert!(flow.is_valid_for(&g));
        assert_eq!(g.edge_count(), 0);
        let (cover, _) = min_weight_cover(&g, flow);
        assert_eq!(cover.weight, 0);
    }

    #[test]
    fn dump_is_sorted_and_stable() {
        let g = build(&[(6, 11), (1, 1)], &[(7, 10)], &[(6, 7), (1, 7)]);
        let (_, flow) = min_weight_cover(&g, FlowState::new());
        let expected = "flow 10\n\
                        update 1 w=1 f=1\n\
                        update 6 w=11 f=9\n\
                        query 7 w=10 f=10\n\
                        edge 1 7 f=1\n\
                        edge 6 7 f=9\n";
        assert_eq!(g.dump(&flow), expected);
    }
}
