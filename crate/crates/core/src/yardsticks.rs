//! Reference policies: ship every query, replicate everything, or cache the
//! best static set chosen with hindsight.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::benefit::{greedy_fill, Forecast, WindowStats};
use crate::model::{
    Bytes, CacheState, Decision, Micros, ObjectCatalog, ObjectId, Query, Trace, TrafficLedger,
    Update,
};
use crate::policy::Policy;
use crate::simharness::{run_policy, RunError};

/// Never caches anything.
#[derive(Clone, Debug, Default)]
pub struct NoCachePolicy;

impl Policy for NoCachePolicy {
    fn name(&self) -> &str {
        "nocache"
    }

    fn initial_cache(&self) -> CacheState {
        CacheState::new(0)
    }

    fn on_query(&mut self, query: &Query, _now: Micros) -> Vec<Decision> {
        vec![Decision::ShipQuery(query.qid)]
    }

    fn on_update(&mut self, _update: &Update) -> Vec<Decision> {
        Vec::new()
    }
}

/// A cache as large as the server holding all of its data from the start,
/// kept current by shipping every update as it arrives. Loads are free.
#[derive(Clone, Debug)]
pub struct ReplicaPolicy {
    catalog: ObjectCatalog,
}

impl ReplicaPolicy {
    pub fn new(catalog: ObjectCatalog) -> Self {
        Self { catalog }
    }
}

impl Policy for ReplicaPolicy {
    fn name(&self) -> &str {
        "replica"
    }

    fn initial_cache(&self) -> CacheState {
        CacheState::full_replica(&self.catalog)
    }

    fn on_query(&mut self, query: &Query, _now: Micros) -> Vec<Decision> {
        vec![Decision::AnswerFromCache(query.qid)]
    }

    fn on_update(&mut self, update: &Update) -> Vec<Decision> {
        vec![Decision::ShipUpdates(vec![update.uid])]
    }
}

/// When SOptimal ships updates for the objects it holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateShipping {
    /// As soon as they arrive at the server.
    #[default]
    Eager,
    /// Only when a query needs them.
    Lazy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SOptimalPlan {
    pub static_set: BTreeSet<ObjectId>,
}

impl SOptimalPlan {
    /// Whole-trace benefit of each object as if it were loaded at the start,
    /// ranked and greedily packed into `capacity`.
    pub fn choose(trace: &Trace, catalog: &ObjectCatalog, capacity: Bytes) -> Self {
        let mut stats = WindowStats::new();
        for event in &trace.events {
            stats.accrue(event, catalog);
        }
        let mut forecast = Forecast::new(1.0);
        for object in catalog.ids() {
            forecast.set(object, stats.benefit(object, false, catalog) as f64);
        }
        Self {
            static_set: greedy_fill(&forecast.ranking(), catalog, capacity),
        }
    }

    pub fn initial_loads(&self) -> Vec<Decision> {
        self.static_set.iter().map(|o| Decision::Load(*o)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SOptimalPolicy {
    catalog: ObjectCatalog,
    plan: SOptimalPlan,
    shipping: UpdateShipping,
    cache: CacheState,
}

impl SOptimalPolicy {
    pub fn new(
        catalog: ObjectCatalog,
        capacity: Bytes,
        plan: SOptimalPlan,
        shipping: UpdateShipping,
    ) -> Self {
        Self {
            catalog,
            plan,
            shipping,
            cache: CacheState::new(capacity),
        }
    }

    pub fn plan(&self) -> &SOptimalPlan {
        &self.plan
    }
}

impl Policy for SOptimalPolicy {
    fn name(&self) -> &str {
        "soptimal"
    }

    fn initial_cache(&self) -> CacheState {
        CacheState::new(self.cache.capacity())
    }

    fn start(&mut self) -> Vec<Decision> {
        let loads = self.plan.initial_loads();
        for d in &loads {
            self.cache.apply(d, &self.catalog).expect("static set fits");
        }
        loads
    }

    fn on_query(&mut self, query: &Query, now: Micros) -> Vec<Decision> {
        if !self.cache.all_resident(&query.objects) {
            return vec![Decision::ShipQuery(query.qid)];
        }
        let needed = self.cache.interacting_updates(query, now).expect("resident");
        let mut out = Vec::with_capacity(2);
        if !needed.is_empty() {
            let ship = Decision::ShipUpdates(needed.iter().map(|u| u.uid).collect());
            self.cache.apply(&ship, &self.catalog).expect("outstanding");
            out.push(ship);
        }
        out.push(Decision::AnswerFromCache(query.qid));
        out
    }

    fn on_update(&mut self, update: &Update) -> Vec<Decision> {
        if !self.cache.receive_update(update) {
            return Vec::new();
        }
        match self.shipping {
            UpdateShipping::Lazy => Vec::new(),
            UpdateShipping::Eager => {
                let ship = Decision::ShipUpdates(vec![update.uid]);
                self.cache.apply(&ship, &self.catalog).expect("just queued");
                vec![ship]
            }
        }
    }
}

/// Ledger of shipping every query.
pub fn nocache(trace: &Trace, catalog: &ObjectCatalog) -> Result<TrafficLedger, RunError> {
    Ok(run_policy(trace, catalog, &mut NoCachePolicy, 0, 1)?.ledger)
}

/// Ledger of a full replica kept current by eager update shipping.
pub fn replica(trace: &Trace, catalog: &ObjectCatalog) -> Result<TrafficLedger, RunError> {
    Ok(run_policy(trace, catalog, &mut ReplicaPolicy::new(catalog.clone()), 0, 1)?.ledger)
}

/// Chooses the static set for `trace` and replays the trace with it.
pub fn soptimal(
    trace: &Trace,
    catalog: &ObjectCatalog,
    capacity: Bytes,
    shipping: UpdateShipping,
) -> Result<(SOptimalPlan, TrafficLedger), RunError> {
    let plan = SOptimalPlan::choose(trace, catalog, capacity);
    let mut policy = SOptimalPolicy::new(catalog.clone(), capacity, plan.clone(), shipping);
    let report = run_policy(trace, catalog, &mut policy, 0, 1)?;
    Ok((plan, report.ledger))
}
