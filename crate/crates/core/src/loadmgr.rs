//! Load decisions for queries that miss the cache.
//!
//! A shipped query's cost is attributed to its missing objects in random
//! order. An object whose load cost is fully covered becomes a load
//! candidate outright; the first object it cannot cover becomes one with
//! probability `remaining / load_cost`, after which attribution stops. In
//! expectation an object becomes a candidate once queries have spent its
//! load cost on it, without any per-object counters.
//!
//! Candidates go through Greedy-Dual-Size, applied lazily per batch: the
//! batch is simulated in full and only the net residency change is
//! committed, so an object is never loaded just to be evicted by a later
//! candidate of the same query.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{CacheState, Decision, ObjectCatalog, ObjectId, Query};

/// Objects that became load candidates while handling one query, in the
/// order they were drawn.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidacyBatch {
    candidates: Vec<ObjectId>,
}

impl CandidacyBatch {
    pub fn new(candidates: Vec<ObjectId>) -> Self {
        let mut seen = BTreeSet::new();
        let candidates = candidates.into_iter().filter(|o| seen.insert(*o)).collect();
        Self { candidates }
    }

    pub fn candidates(&self) -> &[ObjectId] {
        &self.candidates
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }
}

/// Randomly attributes `query`'s shipping cost to its non-resident objects
/// and returns the resulting candidacies.
pub fn offer(
    query: &Query,
    cache: &CacheState,
    catalog: &ObjectCatalog,
    rng: &mut impl Rng,
) -> CandidacyBatch {
    let mut missing: Vec<ObjectId> = query
        .objects
        .iter()
        .copied()
        .filter(|o| !cache.is_resident(*o) && catalog.contains(*o))
        .collect();
    missing.shuffle(rng);

    let mut budget = query.ship_cost;
    let mut candidates = Vec::new();
    for object in missing {
        if budget == 0 {
            break;
        }
        let load_cost = catalog.load_cost(object).expect("filtered to catalog objects");
        if budget >= load_cost {
            candidates.push(object);
            budget -= load_cost;
        } else {
            if rng.random_range(0..load_cost) < budget {
                candidates.push(object);
            }
            budget = 0;
        }
    }
    CandidacyBatch { candidates }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Credit {
    value: f64,
    // touch order, breaks credit ties oldest-first
    stamp: u64,
}

/// Greedy-Dual-Size state: the inflation value and a credit per resident
/// object.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GdsState {
    inflation: f64,
    credits: BTreeMap<ObjectId, Credit>,
    clock: u64,
}

impl GdsState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn credit(&self, object: ObjectId) -> Option<f64> {
        self.credits.get(&object).map(|c| c.value)
    }

    /// Sets `object`'s credit to `inflation + load_cost / size`.
    pub fn touch(&mut self, object: ObjectId, catalog: &ObjectCatalog) {
        let entry = catalog.get(object).expect("touched object must be in catalog");
        let value = self.inflation + entry.load_cost as f64 / entry.size as f64;
        self.clock += 1;
        self.credits.insert(
            object,
            Credit {
                value,
                stamp: self.clock,
            },
        );
    }

    /// Evicts `object`, raising the inflation to its credit.
    pub fn evict(&mut self, object: ObjectId) {
        if let Some(c) = self.credits.remove(&object) {
            self.inflation = self.inflation.max(c.value);
        }
    }

    /// Drops an object's credit without touching the inflation.
    pub fn forget(&mut self, object: ObjectId) {
        self.credits.remove(&object);
    }

    fn key(&self, object: ObjectId) -> (f64, u64) {
        self.credits
            .get(&object)
            .map_or((0.0, 0), |c| (c.value, c.stamp))
    }
}

/// One step of plain (eager) Greedy-Dual-Size over a batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GdsStep {
    Admit(ObjectId),
    Evict(ObjectId),
    Reject(ObjectId),
}

/// Runs Greedy-Dual-Size eagerly over `batch`, starting from the cache's
/// residency, and returns every admission and eviction in order.
///
/// A candidate is admitted by evicting minimum-credit objects, oldest first,
/// among those whose credit does not exceed the candidate's. If that cannot
/// free enough space the candidate is rejected.
pub fn gds_eager_trace(
    state: &mut GdsState,
    cache: &CacheState,
    catalog: &ObjectCatalog,
    batch: &CandidacyBatch,
) -> Vec<GdsStep> {
    let mut resident: BTreeSet<ObjectId> = cache.resident().collect();
    let mut free = cache.free();
    let mut steps = Vec::new();
    for &candidate in &batch.candidates {
        if resident.contains(&candidate) {
            state.touch(candidate, catalog);
            continue;
        }
        let Some(entry) = catalog.get(candidate) else {
            steps.push(GdsStep::Reject(candidate));
            continue;
        };
        if entry.size > cache.capacity() {
            steps.push(GdsStep::Reject(candidate));
            continue;
        }
        let offered = state.inflation + entry.load_cost as f64 / entry.size as f64;
        let mut victims: Vec<ObjectId> = resident
            .iter()
            .copied()
            .filter(|o| state.key(*o).0 <= offered)
            .collect();
        victims.sort_by(|a, b| {
            state
                .key(*a)
                .partial_cmp(&state.key(*b))
                .expect("credits are finite")
                .then(a.cmp(b))
        });
        let reclaimable: u64 = victims.iter().map(|o| catalog.size(*o).unwrap_or(0)).sum();
        if free + reclaimable < entry.size {
            steps.push(GdsStep::Reject(candidate));
            continue;
        }
        for victim in victims {
            if free >= entry.size {
                break;
            }
            state.evict(victim);
            resident.remove(&victim);
            free += catalog.size(victim).unwrap_or(0);
            steps.push(GdsStep::Evict(victim));
        }
        state.touch(candidate, catalog);
        resident.insert(candidate);
        free -= entry.size;
        steps.push(GdsStep::Admit(candidate));
    }
    steps
}

/// Lazy Greedy-Dual-Size: simulates the batch eagerly, then emits only the
/// net change against the starting residency (evictions first).
pub fn gds_lazy_apply(
    state: &mut GdsState,
    cache: &CacheState,
    catalog: &ObjectCatalog,
    batch: &CandidacyBatch,
) -> Vec<Decision> {
    let before: BTreeSet<ObjectId> = cache.resident().collect();
    let mut after = before.clone();
    let mut admitted = Vec::new();
    for step in gds_eager_trace(state, cache, catalog, batch) {
        match step {
            GdsStep::Admit(o) => {
                after.insert(o);
                admitted.push(o);
            }
            GdsStep::Evict(o) => {
                after.remove(&o);
            }
            GdsStep::Reject(_) => {}
        }
    }
    let mut decisions: Vec<Decision> = before
        .difference(&after)
        .map(|o| Decision::Evict(*o))
        .collect();
    decisions.extend(
        admitted
            .into_iter()
            .filter(|o| after.contains(o) && !before.contains(o))
            .map(Decision::Load),
    );
    decisions
}

/// Randomized attribution plus lazy Greedy-Dual-Size, with its own seeded
/// random stream.
#[derive(Clone, Debug)]
pub struct LoadManager {
    gds: GdsState,
    rng: ChaCha8Rng,
}

impl LoadManager {
    pub fn new(seed: u64) -> Self {
        Self {
            gds: GdsState::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gds(&self) -> &GdsState {
        &self.gds
    }

    /// Load and eviction decisions for a query that was shipped because
    /// some of its objects are missing.
    pub fn handle(
        &mut self,
        query: &Query,
        cache: &CacheState,
        catalog: &ObjectCatalog,
    ) -> Vec<Decision> {
        let batch = offer(query, cache, catalog, &mut self.rng);
        if batch.is_empty() {
            return Vec::new();
        }
        gds_lazy_apply(&mut self.gds, cache, catalog, &batch)
    }

    /// Tells the manager an object left the cache for a reason of its own.
    pub fn forget(&mut self, object: ObjectId) {
        self.gds.forget(object);
    }
}
