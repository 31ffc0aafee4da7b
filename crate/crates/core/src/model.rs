//! Domain model shared by every policy: objects, queries, updates, the cache
//! state transition function and the traffic ledger.
//!
//! All quantities are integers. Sizes and network costs are bytes (`u64`),
//! timestamps are microseconds since the start of the trace.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Byte count.
pub type Bytes = u64;

/// Microseconds since the start of the trace.
pub type Micros = u64;

/// One gigabyte as used in traces and fixtures (10^9 bytes).
pub const GB: Bytes = 1_000_000_000;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Identifier of a data object at the server.
    ObjectId,
    "o"
);
id_type!(
    /// Identifier of a query.
    QueryId,
    "q"
);
id_type!(
    /// Identifier of an update.
    UpdateId,
    "u"
);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("unknown query {0}")]
    UnknownQuery(QueryId),
    #[error("unknown update {0}")]
    UnknownUpdate(UpdateId),
    #[error("object {0} is not resident in the cache")]
    NotResident(ObjectId),
    #[error("object {0} is already resident in the cache")]
    AlreadyResident(ObjectId),
    #[error("loading {object} needs {needed} bytes but only {free} are free")]
    CapacityExceeded {
        object: ObjectId,
        needed: Bytes,
        free: Bytes,
    },
    #[error("update {0} is not outstanding at the cache")]
    NotOutstanding(UpdateId),
    #[error("object {0} must have a positive size and load cost")]
    ZeroSize(ObjectId),
    #[error("duplicate object {0} in catalog")]
    DuplicateObject(ObjectId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub size: Bytes,
    /// Network cost of loading the object into the cache.
    pub load_cost: Bytes,
}

/// The server's object set with per-object sizes and load costs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObjectCatalog {
    entries: BTreeMap<ObjectId, ObjectEntry>,
}

impl ObjectCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an object whose load cost equals its size.
    pub fn insert(&mut self, id: ObjectId, size: Bytes) -> Result<(), ModelError> {
        self.insert_with_cost(id, size, size)
    }

    pub fn insert_with_cost(
        &mut self,
        id: ObjectId,
        size: Bytes,
        load_cost: Bytes,
    ) -> Result<(), ModelError> {
        if size == 0 || load_cost == 0 {
            return Err(ModelError::ZeroSize(id));
        }
        if self.entries.contains_key(&id) {
            return Err(ModelError::DuplicateObject(id));
        }
        self.entries.insert(id, ObjectEntry { size, load_cost });
        Ok(())
    }

    pub fn get(&self, id: ObjectId) -> Option<&ObjectEntry> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn size(&self, id: ObjectId) -> Result<Bytes, ModelError> {
        self.get(id).map(|e| e.size).ok_or(ModelError::UnknownObject(id))
    }

    pub fn load_cost(&self, id: ObjectId) -> Result<Bytes, ModelError> {
        self.get(id)
            .map(|e| e.load_cost)
            .ok_or(ModelError::UnknownObject(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_size(&self) -> Bytes {
        self.entries.values().map(|e| e.size).sum()
    }

    /// Objects in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (ObjectId, &ObjectEntry)> + '_ {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.entries.keys().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Update {
    pub uid: UpdateId,
    pub time: Micros,
    pub object: ObjectId,
    pub ship_cost: Bytes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub qid: QueryId,
    pub time: Micros,
    /// Objects accessed by the query, sorted and free of duplicates.
    pub objects: Vec<ObjectId>,
    pub ship_cost: Bytes,
    /// Tolerance for staleness: updates younger than this may be ignored.
    pub tolerance: Micros,
}

impl Query {
    pub fn new(
        qid: QueryId,
        time: Micros,
        objects: impl IntoIterator<Item = ObjectId>,
        ship_cost: Bytes,
        tolerance: Micros,
    ) -> Self {
        let mut objects: Vec<ObjectId> = objects.into_iter().collect();
        objects.sort_unstable();
        objects.dedup();
        Self {
            qid,
            time,
            objects,
            ship_cost,
            tolerance,
        }
    }

    /// True if an update that arrived at `arrival` must be reflected in an
    /// answer produced at `now`.
    pub fn requires(&self, arrival: Micros, now: Micros) -> bool {
        arrival.saturating_add(self.tolerance) <= now
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Query(Query),
    Update(Update),
}

impl Event {
    pub fn time(&self) -> Micros {
        match self {
            Event::Query(q) => q.time,
            Event::Update(u) => u.time,
        }
    }
}

/// Events in trace order. The position of an event is its sequence number,
/// which breaks timestamp ties.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(events: Vec<Event>) -> Self {
        Self { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn queries(&self) -> impl Iterator<Item = &Query> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Query(q) => Some(q),
            Event::Update(_) => None,
        })
    }

    pub fn updates(&self) -> impl Iterator<Item = &Update> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Update(u) => Some(u),
            Event::Query(_) => None,
        })
    }
}

/// A cache or traffic action emitted by a policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    ShipQuery(QueryId),
    ShipUpdates(Vec<UpdateId>),
    AnswerFromCache(QueryId),
    Load(ObjectId),
    Evict(ObjectId),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::ShipQuery(q) => write!(f, "ship {q}"),
            Decision::ShipUpdates(us) => {
                write!(f, "ship")?;
                for u in us {
                    write!(f, " {u}")?;
                }
                Ok(())
            }
            Decision::AnswerFromCache(q) => write!(f, "answer {q}"),
            Decision::Load(o) => write!(f, "load {o}"),
            Decision::Evict(o) => write!(f, "evict {o}"),
        }
    }
}

/// Cost lookups needed to charge a decision to the ledger.
pub trait CostModel {
    fn query_cost(&self, qid: QueryId) -> Option<Bytes>;
    fn update_cost(&self, uid: UpdateId) -> Option<Bytes>;
    fn load_cost(&self, object: ObjectId) -> Option<Bytes>;
}

/// Id-indexed view over a catalog and trace.
#[derive(Clone, Debug, Default)]
pub struct TraceIndex {
    queries: HashMap<QueryId, Query>,
    updates: HashMap<UpdateId, Update>,
    load_costs: HashMap<ObjectId, Bytes>,
}

impl TraceIndex {
    pub fn new(catalog: &ObjectCatalog, trace: &Trace) -> Self {
        let mut index = Self {
            load_costs: catalog.iter().map(|(id, e)| (id, e.load_cost)).collect(),
            ..Self::default()
        };
        for event in &trace.events {
            match event {
                Event::Query(q) => {
                    index.queries.insert(q.qid, q.clone());
                }
                Event::Update(u) => {
                    index.updates.insert(u.uid, u.clone());
                }
            }
        }
        index
    }

    pub fn query(&self, qid: QueryId) -> Option<&Query> {
        self.queries.get(&qid)
    }

    pub fn update(&self, uid: UpdateId) -> Option<&Update> {
        self.updates.get(&uid)
    }
}

impl CostModel for TraceIndex {
    fn query_cost(&self, qid: QueryId) -> Option<Bytes> {
        self.queries.get(&qid).map(|q| q.ship_cost)
    }

    fn update_cost(&self, uid: UpdateId) -> Option<Bytes> {
        self.updates.get(&uid).map(|u| u.ship_cost)
    }

    fn load_cost(&self, object: ObjectId) -> Option<Bytes> {
        self.load_costs.get(&object).copied()
    }
}

/// Which objects are cached, and the updates each one is still missing.
///
/// An object is stale exactly when its outstanding list is non-empty, so
/// freshness is derived rather than stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheState {
    capacity: Bytes,
    used: Bytes,
    resident: BTreeMap<ObjectId, Vec<Update>>,
    home: HashMap<UpdateId, ObjectId>,
}

impl CacheState {
    pub fn new(capacity: Bytes) -> Self {
        Self {
            capacity,
            used: 0,
            resident: BTreeMap::new(),
            home: HashMap::new(),
        }
    }

    /// A cache holding every catalog object, sized to fit them exactly.
    pub fn full_replica(catalog: &ObjectCatalog) -> Self {
        let mut cache = Self::new(catalog.total_size());
        for (id, entry) in catalog.iter() {
            cache.resident.insert(id, Vec::new());
            cache.used += entry.size;
        }
        cache
    }

    pub fn capacity(&self) -> Bytes {
        self.capacity
    }

    pub fn used(&self) -> Bytes {
        self.used
    }

    pub fn free(&self) -> Bytes {
        self.capacity - self.used
    }

    pub fn is_resident(&self, object: ObjectId) -> bool {
        self.resident.contains_key(&object)
    }

    pub fn all_resident(&self, objects: &[ObjectId]) -> bool {
        objects.iter().all(|o| self.is_resident(*o))
    }

    pub fn resident(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.resident.keys().copied()
    }

    pub fn resident_count(&self) -> usize {
        self.resident.len()
    }

    pub fn is_stale(&self, object: ObjectId) -> bool {
        self.resident.get(&object).is_some_and(|o| !o.is_empty())
    }

    /// Outstanding updates of a resident object in arrival order.
    pub fn outstanding(&self, object: ObjectId) -> &[Update] {
        self.resident.get(&object).map_or(&[], Vec::as_slice)
    }

    pub fn is_outstanding(&self, uid: UpdateId) -> bool {
        self.home.contains_key(&uid)
    }

    /// Records an update arriving at the server. Only updates on resident
    /// objects are queued; returns whether the update was queued.
    pub fn receive_update(&mut self, update: &Update) -> bool {
        match self.resident.get_mut(&update.object) {
            Some(list) => {
                list.push(update.clone());
                self.home.insert(update.uid, update.object);
                true
            }
            None => false,
        }
    }

    /// Outstanding updates on `B(q)` that an answer produced at `now` must
    /// incorporate.
    pub fn interacting_updates(&self, q: &Query, now: Micros) -> Result<Vec<Update>, ModelError> {
        let mut out = Vec::new();
        for &object in &q.objects {
            let list = self
                .resident
                .get(&object)
                .ok_or(ModelError::NotResident(object))?;
            out.extend(list.iter().filter(|u| q.requires(u.time, now)).cloned());
        }
        Ok(out)
    }

    /// Applies a decision to the cache.
    ///
    /// Loads and evictions change residency; shipping updates drains
    /// outstanding lists. Query decisions leave the cache unchanged.
    pub fn apply(&mut self, decision: &Decision, catalog: &ObjectCatalog) -> Result<(), ModelError> {
        match decision {
            Decision::ShipQuery(_) | Decision::AnswerFromCache(_) => Ok(()),
            Decision::Load(object) => {
                let size = catalog.size(*object)?;
                if self.is_resident(*object) {
                    return Err(ModelError::AlreadyResident(*object));
                }
                if size > self.free() {
                    return Err(ModelError::CapacityExceeded {
                        object: *object,
                        needed: size,
                        free: self.free(),
                    });
                }
                // The loaded copy already contains every update received so
                // far, so the object starts fresh.
                self.resident.insert(*object, Vec::new());
                self.used += size;
                Ok(())
            }
            Decision::Evict(object) => {
                let size = catalog.size(*object)?;
                let dropped = self
                    .resident
                    .remove(object)
                    .ok_or(ModelError::NotResident(*object))?;
                for u in dropped {
                    self.home.remove(&u.uid);
                }
                self.used -= size;
                Ok(())
            }
            Decision::ShipUpdates(uids) => {
                let mut seen = std::collections::HashSet::with_capacity(uids.len());
                if let Some(bad) = uids
                    .iter()
                    .find(|u| !self.home.contains_key(u) || !seen.insert(**u))
                {
                    return Err(ModelError::NotOutstanding(*bad));
                }
                for uid in uids {
                    let object = self
                        .home
                        .remove(uid)
                        .ok_or(ModelError::NotOutstanding(*uid))?;
                    if let Some(list) = self.resident.get_mut(&object) {
                        list.retain(|u| u.uid != *uid);
                    }
                }
                Ok(())
            }
        }
    }
}

/// Ledger bucket a decision is charged to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    QueryShip,
    UpdateShip,
    Load,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSample {
    pub seq: u64,
    pub total: Bytes,
}

/// Cumulative network traffic by mechanism.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficLedger {
    pub query_ship: Bytes,
    pub update_ship: Bytes,
    pub load: Bytes,
    pub samples: Vec<LedgerSample>,
}

impl TrafficLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> Bytes {
        self.query_ship + self.update_ship + self.load
    }

    /// Charges `decision` at event `seq`, returning the bytes charged.
    ///
    /// Cache answers and evictions are free but still sampled.
    pub fn record(
        &mut self,
        seq: u64,
        decision: &Decision,
        costs: &impl CostModel,
    ) -> Result<Bytes, ModelError> {
        let charged = match decision {
            Decision::ShipQuery(q) => {
                let c = costs.query_cost(*q).ok_or(ModelError::UnknownQuery(*q))?;
                self.query_ship += c;
                c
            }
            Decision::ShipUpdates(us) => {
                let mut c = 0;
                for u in us {
                    c += costs.update_cost(*u).ok_or(ModelError::UnknownUpdate(*u))?;
                }
                self.update_ship += c;
                c
            }
            Decision::Load(o) => {
                let c = costs.load_cost(*o).ok_or(ModelError::UnknownObject(*o))?;
                self.load += c;
                c
            }
            Decision::AnswerFromCache(_) | Decision::Evict(_) => 0,
        };
        self.samples.push(LedgerSample {
            seq,
            total: self.total(),
        });
        Ok(charged)
    }

    pub fn bucket(&self, mechanism: Mechanism) -> Bytes {
        match mechanism {
            Mechanism::QueryShip => self.query_ship,
            Mechanism::UpdateShip => self.update_ship,
            Mechanism::Load => self.load,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(sizes: &[(u64, Bytes)]) -> ObjectCatalog {
        let mut c = ObjectCatalog::new();
        for &(id, size) in sizes {
            c.insert(ObjectId(id), size).unwrap();
        }
        c
    }

    fn update(uid: u64, time: Micros, object: u64, cost: Bytes) -> Update {
        Update {
            uid: UpdateId(uid),
            time,
            object: ObjectId(object),
            ship_cost: cost,
        }
    }

    fn loaded(cat: &ObjectCatalog, capacity: Bytes, objects: &[u64]) -> CacheState {
        let mut cache = CacheState::new(capacity);
        for &o in objects {
            cache.apply(&Decision::Load(ObjectId(o)), cat).unwrap();
        }
        cache
    }

    #[test]
    fn zero_tolerance_includes_all_outstanding() {
        let cat = catalog(&[(1, 10)]);
        let mut cache = loaded(&cat, 10, &[1]);
        cache.receive_update(&update(1, 3, 1, 1));
        let q = Query::new(QueryId(1), 5, [ObjectId(1)], 4, 0);
        let got = cache.interacting_updates(&q, 5).unwrap();
        assert_eq!(got, vec![update(1, 3, 1, 1)]);
    }

    #[test]
    fn tolerance_excludes_recent_updates() {
        let cat = catalog(&[(1, 10)]);
        let mut cache = loaded(&cat, 10, &[1]);
        let all: Vec<Update> = (0..=100).map(|t| update(t, t, 1, 1)).collect();
        for u in &all {
            cache.receive_update(u);
        }
        let q = Query::new(QueryId(1), 100, [ObjectId(1)], 4, 10);
        let got = cache.interacting_updates(&q, 100).unwrap();
        // brute-force filter straight from the definition
        let expected: Vec<Update> = all.iter().filter(|u| u.time <= 100 - 10).cloned().collect();
        assert_eq!(got, expected);
        assert!(got.iter().all(|u| u.uid != UpdateId(96)));
    }

    #[test]
    fn tolerance_larger_than_now_needs_nothing() {
        let cat = catalog(&[(1, 10)]);
        let mut cache = loaded(&cat, 10, &[1]);
        cache.receive_update(&update(1, 0, 1, 1));
        let q = Query::new(QueryId(1), 5, [ObjectId(1)], 4, 50);
        assert!(cache.interacting_updates(&q, 5).unwrap().is_empty());
    }

    #[test]
    fn interacting_updates_requires_residency() {
        let cat = catalog(&[(1, 10), (2, 10)]);
        let cache = loaded(&cat, 20, &[1]);
        let q = Query::new(QueryId(1), 5, [ObjectId(1), ObjectId(2)], 4, 0);
        assert_eq!(
            cache.interacting_updates(&q, 5),
            Err(ModelError::NotResident(ObjectId(2)))
        );
    }

    #[test]
    fn updates_to_non_resident_objects_are_not_queued() {
        let cat = catalog(&[(1, 10), (4, 10)]);
        let mut cache = loaded(&cat, 20, &[1]);
        assert!(!cache.receive_update(&update(4, 1, 4, 1)));
        assert!(!cache.is_outstanding(UpdateId(4)));
        assert!(cache.receive_update(&update(5, 1, 1, 1)));
        assert!(cache.is_stale(ObjectId(1)));
    }

    #[test]
    fn evict_then_load_swaps_on_full_cache() {
        let cat = catalog(&[(1, 10), (3, 12), (4, 10)]);
        let mut cache = loaded(&cat, 22, &[1, 3]);
        assert!(matches!(
            cache.apply(&Decision::Load(ObjectId(4)), &cat),
            Err(ModelError::CapacityExceeded { .. })
        ));
        cache.apply(&Decision::Evict(ObjectId(3)), &cat).unwrap();
        cache.apply(&Decision::Load(ObjectId(4)), &cat).unwrap();
        let resident: Vec<_> = cache.resident().collect();
        assert_eq!(resident, vec![ObjectId(1), ObjectId(4)]);
        assert_eq!(cache.used(), 20);
    }

    #[test]
    fn shipping_every_outstanding_update_makes_object_fresh() {
        let cat = catalog(&[(1, 10)]);
        let mut cache = loaded(&cat, 10, &[1]);
        cache.receive_update(&update(1, 1, 1, 1));
        cache.receive_update(&update(2, 2, 1, 1));
        cache
            .apply(&Decision::ShipUpdates(vec![UpdateId(1)]), &cat)
            .unwrap();
        assert!(cache.is_stale(ObjectId(1)));
        cache
            .apply(&Decision::ShipUpdates(vec![UpdateId(2)]), &cat)
            .unwrap();
        assert!(!cache.is_stale(ObjectId(1)));
    }

    #[test]
    fn shipping_unknown_update_fails_without_side_effects() {
        let cat = catalog(&[(1, 10)]);
        let mut cache = loaded(&cat, 10, &[1]);
        cache.receive_update(&update(1, 1, 1, 1));
        let err = cache
            .apply(&Decision::ShipUpdates(vec![UpdateId(1), UpdateId(9)]), &cat)
            .unwrap_err();
        assert_eq!(err, ModelError::NotOutstanding(UpdateId(9)));
        assert!(cache.is_outstanding(UpdateId(1)));
    }

    #[test]
    fn load_after_updates_leaves_object_fresh() {
        // Every arrival order of two updates and one load, where updates
        // before the load are not queued and updates after it are: evicting
        // and reloading must always end fresh.
        let cat = catalog(&[(1, 10)]);
        let events = ["u1", "u2", "load"];
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in orders {
            let mut cache = CacheState::new(10);
            for &i in &order {
                match events[i] {
                    "load" => cache.apply(&Decision::Load(ObjectId(1)), &cat).unwrap(),
                    _ => {
                        cache.receive_update(&update(i as u64, i as u64, 1, 1));
                    }
                }
            }
            // force a reload: evict and load again
            cache.apply(&Decision::Evict(ObjectId(1)), &cat).unwrap();
            cache.apply(&Decision::Load(ObjectId(1)), &cat).unwrap();
            assert!(cache.outstanding(ObjectId(1)).is_empty(), "{order:?}");
            assert!(!cache.is_stale(ObjectId(1)));
        }
    }

    #[test]
    fn evicting_drops_outstanding_list() {
        let cat = catalog(&[(1, 10)]);
        let mut cache = loaded(&cat, 10, &[1]);
        cache.receive_update(&update(1, 1, 1, 1));
        cache.apply(&Decision::Evict(ObjectId(1)), &cat).unwrap();
        assert!(!cache.is_outstanding(UpdateId(1)));
        assert_eq!(cache.used(), 0);
        assert_eq!(
            cache.apply(&Decision::Evict(ObjectId(1)), &cat),
            Err(ModelError::NotResident(ObjectId(1)))
        );
    }

    struct ExampleCosts;
    impl CostModel for ExampleCosts {
        fn query_cost(&self, _: QueryId) -> Option<Bytes> {
            Some(15 * GB)
        }
        fn update_cost(&self, _: UpdateId) -> Option<Bytes> {
            Some(GB)
        }
        fn load_cost(&self, _: ObjectId) -> Option<Bytes> {
            Some(10 * GB)
        }
    }

    #[test]
    fn record_charges_one_bucket() {
        let mut ledger = TrafficLedger::new();
        ledger
            .record(0, &Decision::ShipQuery(QueryId(3)), &ExampleCosts)
            .unwrap();
        assert_eq!((ledger.query_ship, ledger.update_ship, ledger.load), (15 * GB, 0, 0));
        ledger
            .record(1, &Decision::ShipUpdates(vec![UpdateId(1)]), &ExampleCosts)
            .unwrap();
        assert_eq!(ledger.update_ship, GB);
        ledger
            .record(2, &Decision::Load(ObjectId(1)), &ExampleCosts)
            .unwrap();
        assert_eq!(ledger.load, 10 * GB);
        ledger
            .record(3, &Decision::AnswerFromCache(QueryId(4)), &ExampleCosts)
            .unwrap();
        assert_eq!(ledger.total(), 26 * GB);
        assert_eq!(ledger.samples.len(), 4);
        assert!(ledger.samples.windows(2).all(|w| w[0].total <= w[1].total));
    }

    #[test]
    fn catalog_rejects_zero_sizes_and_duplicates() {
        let mut c = ObjectCatalog::new();
        assert_eq!(c.insert(ObjectId(1), 0), Err(ModelError::ZeroSize(ObjectId(1))));
        c.insert(ObjectId(1), 5).unwrap();
        assert_eq!(
            c.insert(ObjectId(1), 5),
            Err(ModelError::DuplicateObject(ObjectId(1)))
        );
        assert_eq!(c.load_cost(ObjectId(1)), Ok(5));
    }
}
