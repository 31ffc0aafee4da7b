//! The VCover policy.
//!
//! Queries whose objects are all cached go to the update manager, which
//! keeps an interaction graph of outstanding updates and the queries that
//! needed them and decides, through a minimum-weight vertex cover, whether to
//! ship the query or its updates. Queries that miss the cache are shipped and
//! handed to the [`LoadManager`].

use crate::covergraph::{min_weight_cover, FlowState, InteractionGraph};
use crate::loadmgr::LoadManager;
use crate::model::{CacheState, Decision, Micros, ObjectCatalog, Query, Update};
use crate::policy::Policy;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub cover_computations: u64,
    pub peak_queries: usize,
    pub peak_updates: usize,
}

#[derive(Clone, Debug)]
pub struct VCoverPolicy {
    catalog: ObjectCatalog,
    cache: CacheState,
    graph: InteractionGraph,
    flow: FlowState,
    loads: LoadManager,
    stats: GraphStats,
}

impl VCoverPolicy {
    pub fn new(catalog: ObjectCatalog, capacity: u64, seed: u64) -> Self {
        Self::with_cache(catalog, CacheState::new(capacity), seed)
    }

    /// Starts from an already populated cache.
    pub fn with_cache(catalog: ObjectCatalog, cache: CacheState, seed: u64) -> Self {
        Self {
            catalog,
            cache,
            graph: InteractionGraph::new(),
            flow: FlowState::new(),
            loads: LoadManager::new(seed),
            stats: GraphStats::default(),
        }
    }

    pub fn cache(&self) -> &CacheState {
        &self.cache
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    pub fn flow(&self) -> &FlowState {
        &self.flow
    }

    pub fn stats(&self) -> &GraphStats {
        &self.stats
    }

    /// Decides between shipping `query` and shipping the outstanding
    /// updates it depends on. All of the query's objects must be cached.
    pub fn update_manager(&mut self, query: &Query, now: Micros) -> Vec<Decision> {
        let interacting = self
            .cache
            .interacting_updates(query, now)
            .expect("update manager called with a non-resident object");
        if interacting.is_empty() {
            // Without edges the query node could never enter a cover of
            // positive weight, so it would be pruned straight away.
            return vec![Decision::AnswerFromCache(query.qid)];
        }

        self.graph
            .add_query(query.qid, query.ship_cost)
            .expect("query ids are unique within a trace");
        for u in &interacting {
            if !self.graph.contains_update(u.uid) {
                self.graph
                    .add_update(u.uid, u.ship_cost)
                    .expect("checked absent");
            }
            self.graph
                .add_edge(u.uid, query.qid)
                .expect("both endpoints just added");
        }
        self.stats.peak_queries = self.stats.peak_queries.max(self.graph.query_count());
        self.stats.peak_updates = self.stats.peak_updates.max(self.graph.update_count());

        let (cover, flow) = min_weight_cover(&self.graph, std::mem::take(&mut self.flow));
        self.flow = flow;
        self.stats.cover_computations += 1;

        let decisions = if cover.queries.contains(&query.qid) {
            vec![Decision::ShipQuery(query.qid)]
        } else {
            let shipped: Vec<_> = interacting.iter().map(|u| u.uid).collect();
            debug_assert!(shipped.iter().all(|u| cover.updates.contains(u)));
            vec![
                Decision::ShipUpdates(shipped),
                Decision::AnswerFromCache(query.qid),
            ]
        };
        self.graph.prune_remainder(&cover, &mut self.flow);
        for d in &decisions {
            self.cache
                .apply(d, &self.catalog)
                .expect("update manager decisions are consistent with its cache");
        }
        decisions
    }

    fn apply_loads(&mut self, decisions: &[Decision]) {
        for d in decisions {
            if let Decision::Evict(object) = d {
                let dropped: Vec<_> = self.cache.outstanding(*object).iter().map(|u| u.uid).collect();
                for uid in dropped {
                    self.graph.remove_update(uid, &mut self.flow);
                }
            }
            self.cache
                .apply(d, &self.catalog)
                .expect("load manager decisions fit the cache");
        }
    }
}

impl Policy for VCoverPolicy {
    fn name(&self) -> &str {
        "vcover"
    }

    fn initial_cache(&self) -> CacheState {
        self.cache.clone()
    }

    fn on_query(&mut self, query: &Query, now: Micros) -> Vec<Decision> {
        if self.cache.all_resident(&query.objects) {
            return self.update_manager(query, now);
        }
        let mut decisions = vec![Decision::ShipQuery(query.qid)];
        let loads = self.loads.handle(query, &self.cache, &self.catalog);
        self.apply_loads(&loads);
        decisions.extend(loads);
        decisions
    }

    fn on_update(&mut self, update: &Update) -> Vec<Decision> {
        self.cache.receive_update(update);
        Vec::new()
    }
}
