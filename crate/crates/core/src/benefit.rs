//! The Benefit heuristic.
//!
//! The event sequence is cut into windows of `delta` events. For each object
//! we total the query cost it would save at the cache (each query's cost is
//! split across its objects by size) minus the update traffic it causes; an
//! object outside the cache is also charged its load cost. An exponentially
//! smoothed forecast of that benefit ranks objects, and the cache is refilled
//! greedily at every window boundary.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{
    Bytes, CacheState, Decision, Event, Micros, ObjectCatalog, ObjectId, Query, Update,
};
use crate::policy::Policy;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenefitConfig {
    pub alpha: f64,
    /// Window length in events.
    pub delta: u64,
}

impl Default for BenefitConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            delta: 1000,
        }
    }
}

/// Splits `query`'s shipping cost over its objects in proportion to their
/// sizes. Shares are whole bytes and sum to the query cost exactly: floors
/// first, then leftover bytes go to the largest remainders (lowest id on
/// ties).
pub fn query_shares(query: &Query, catalog: &ObjectCatalog) -> Vec<(ObjectId, Bytes)> {
    let sizes: Vec<(ObjectId, u128)> = query
        .objects
        .iter()
        .map(|o| (*o, u128::from(catalog.size(*o).unwrap_or(0))))
        .collect();
    let total: u128 = sizes.iter().map(|(_, s)| s).sum();
    if total == 0 {
        return sizes.into_iter().map(|(o, _)| (o, 0)).collect();
    }
    let cost = u128::from(query.ship_cost);
    let mut shares: Vec<(ObjectId, u128, u128)> = sizes
        .iter()
        .map(|(o, s)| (*o, cost * s / total, cost * s % total))
        .collect();
    let assigned: u128 = shares.iter().map(|(_, f, _)| f).sum();
    let mut leftover = cost - assigned;
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|a, b| shares[*b].2.cmp(&shares[*a].2).then(shares[*a].0.cmp(&shares[*b].0)));
    for i in order {
        if leftover == 0 {
            break;
        }
        shares[i].1 += 1;
        leftover -= 1;
    }
    shares
        .into_iter()
        .map(|(o, s, _)| (o, s as Bytes))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ObjectWindow {
    /// Query cost attributable to the object.
    pub saved: Bytes,
    /// Update traffic actually shipped for the object.
    pub shipped: Bytes,
    /// Cost of every update the object received.
    pub updates: Bytes,
}

/// Per-object accounting for the current window.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WindowStats {
    objects: BTreeMap<ObjectId, ObjectWindow>,
}

impl WindowStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accrue(&mut self, event: &Event, catalog: &ObjectCatalog) {
        match event {
            Event::Query(q) => {
                for (object, share) in query_shares(q, catalog) {
                    self.objects.entry(object).or_default().saved += share;
                }
            }
            Event::Update(u) => {
                self.objects.entry(u.object).or_default().updates += u.ship_cost;
            }
        }
    }

    pub fn record_shipped(&mut self, update: &Update) {
        self.objects.entry(update.object).or_default().shipped += update.ship_cost;
    }

    pub fn get(&self, object: ObjectId) -> ObjectWindow {
        self.objects.get(&object).copied().unwrap_or_default()
    }

    /// The window's benefit for `object`: saved query cost less the update
    /// traffic it caused, or would have caused, and less its load cost if it
    /// was not cached.
    pub fn benefit(&self, object: ObjectId, resident: bool, catalog: &ObjectCatalog) -> i128 {
        let w = self.get(object);
        let saved = i128::from(w.saved);
        if resident {
            saved - i128::from(w.shipped)
        } else {
            let load = i128::from(catalog.load_cost(object).unwrap_or(0));
            saved - i128::from(w.updates) - load
        }
    }
}

/// Smoothed benefit forecasts.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    mu: BTreeMap<ObjectId, f64>,
    alpha: f64,
}

impl Forecast {
    pub fn new(alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
        Self {
            mu: BTreeMap::new(),
            alpha,
        }
    }

    pub fn mu(&self, object: ObjectId) -> f64 {
        self.mu.get(&object).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, object: ObjectId, value: f64) {
        self.mu.insert(object, value);
    }

    /// `mu <- (1 - alpha) * mu + alpha * b`
    pub fn smooth(&mut self, object: ObjectId, benefit: f64) -> f64 {
        let next = (1.0 - self.alpha) * self.mu(object) + self.alpha * benefit;
        self.mu.insert(object, next);
        next
    }

    /// Objects with positive forecast, best first, ties by id.
    pub fn ranking(&self) -> Vec<ObjectId> {
        let mut ranked: Vec<(ObjectId, f64)> =
            self.mu.iter().filter(|(_, m)| **m > 0.0).map(|(o, m)| (*o, *m)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.into_iter().map(|(o, _)| o).collect()
    }
}

/// Walks `ranking` and takes every object that still fits in `capacity`.
pub fn greedy_fill(
    ranking: &[ObjectId],
    catalog: &ObjectCatalog,
    capacity: Bytes,
) -> BTreeSet<ObjectId> {
    let mut chosen = BTreeSet::new();
    let mut used = 0;
    for &object in ranking {
        let Ok(size) = catalog.size(object) else {
            continue;
        };
        if used + size <= capacity {
            used += size;
            chosen.insert(object);
        }
    }
    chosen
}

/// Closes a window: updates every forecast and recomposes the cache.
/// Returns evictions for dropped residents, then loads for new selections.
pub fn roll_window(
    forecast: &mut Forecast,
    stats: &WindowStats,
    cache: &CacheState,
    catalog: &ObjectCatalog,
) -> Vec<Decision> {
    for object in catalog.ids() {
        let b = stats.benefit(object, cache.is_resident(object), catalog);
        forecast.smooth(object, b as f64);
    }
    let chosen = greedy_fill(&forecast.ranking(), catalog, cache.capacity());
    let mut decisions: Vec<Decision> = cache
        .resident()
        .filter(|o| !chosen.contains(o))
        .map(Decision::Evict)
        .collect();
    decisions.extend(
        chosen
            .iter()
            .filter(|o| !cache.is_resident(**o))
            .map(|o| Decision::Load(*o)),
    );
    decisions
}

#[derive(Clone, Debug)]
pub struct BenefitPolicy {
    catalog: ObjectCatalog,
    cache: CacheState,
    config: BenefitConfig,
    forecast: Forecast,
    window: WindowStats,
    events: u64,
}

impl BenefitPolicy {
    pub fn new(catalog: ObjectCatalog, capacity: Bytes, config: BenefitConfig) -> Self {
        assert!(config.delta >= 1, "window length must be at least one event");
        Self {
            catalog,
            cache: CacheState::new(capacity),
            forecast: Forecast::new(config.alpha),
            config,
            window: WindowStats::new(),
            events: 0,
        }
    }

    pub fn cache(&self) -> &CacheState {
        &self.cache
    }

    pub fn forecast(&self) -> &Forecast {
        &self.forecast
    }

    fn apply(&mut self, decisions: &[Decision]) {
        for d in decisions {
            self.cache
                .apply(d, &self.catalog)
                .expect("benefit decisions fit the cache");
        }
    }

    fn end_event(&mut self, event: &Event, mut decisions: Vec<Decision>) -> Vec<Decision> {
        self.window.accrue(event, &self.catalog);
        self.events += 1;
        if self.events.is_multiple_of(self.config.delta) {
            let rolled = roll_window(&mut self.forecast, &self.window, &self.cache, &self.catalog);
            self.apply(&rolled);
            decisions.extend(rolled);
            self.window = WindowStats::new();
        }
        decisions
    }
}

impl Policy for BenefitPolicy {
    fn name(&self) -> &str {
        "benefit"
    }

    fn initial_cache(&self) -> CacheState {
        self.cache.clone()
    }

    fn on_query(&mut self, query: &Query, now: Micros) -> Vec<Decision> {
        let decisions = if self.cache.all_resident(&query.objects) {
            let needed = self
                .cache
                .interacting_updates(query, now)
                .expect("all objects resident");
            let mut out = Vec::with_capacity(2);
            if !needed.is_empty() {
                for u in &needed {
                    self.window.record_shipped(u);
                }
                out.push(Decision::ShipUpdates(needed.iter().map(|u| u.uid).collect()));
            }
            out.push(Decision::AnswerFromCache(query.qid));
            out
        } else {
            vec![Decision::ShipQuery(query.qid)]
        };
        self.apply(&decisions);
        self.end_event(&Event::Query(query.clone()), decisions)
    }

    fn on_update(&mut self, update: &Update) -> Vec<Decision> {
        self.cache.receive_update(update);
        self.end_event(&Event::Update(update.clone()), Vec::new())
    }
}
