use crate::model::{CacheState, Decision, Micros, Query, Update};

/// A caching policy driven one event at a time.
///
/// Decisions returned for an event take effect at that event's time, in the
/// order returned.
pub trait Policy {
    fn name(&self) -> &str;

    /// Cache contents when the run starts. Not charged to the ledger.
    fn initial_cache(&self) -> CacheState;

    /// Decisions issued before the first event.
    fn start(&mut self) -> Vec<Decision> {
        Vec::new()
    }

    fn on_query(&mut self, query: &Query, now: Micros) -> Vec<Decision>;

    fn on_update(&mut self, update: &Update) -> Vec<Decision>;

    /// Decisions issued after the last event.
    fn finalize(&mut self) -> Vec<Decision> {
        Vec::new()
    }
}
