//! Deterministic trace replay.
//!
//! The harness keeps its own copy of the cache, independent of the policy's,
//! and applies every decision to it through [`CacheState::apply`]. Every cache
//! answer is audited against the query's staleness tolerance at the moment
//! it is given, and every query must be served exactly once.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benefit::{BenefitConfig, BenefitPolicy};
use crate::model::{
    Bytes, CacheState, Decision, Event, ModelError, ObjectCatalog, QueryId, Trace, TraceIndex,
    TrafficLedger, UpdateId,
};
use crate::policy::Policy;
use crate::vcover::VCoverPolicy;
use crate::yardsticks::{
    NoCachePolicy, ReplicaPolicy, SOptimalPlan, SOptimalPolicy, UpdateShipping,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum PolicySpec {
    VCover,
    Benefit(BenefitConfig),
    NoCache,
    Replica,
    SOptimal { shipping: UpdateShipping },
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::VCover => "vcover",
            PolicySpec::Benefit(_) => "benefit",
            PolicySpec::NoCache => "nocache",
            PolicySpec::Replica => "replica",
            PolicySpec::SOptimal { .. } => "soptimal",
        }
    }

    /// Parses a policy name with default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "vcover" => PolicySpec::VCover,
            "benefit" => PolicySpec::Benefit(BenefitConfig::default()),
            "nocache" => PolicySpec::NoCache,
            "replica" => PolicySpec::Replica,
            "soptimal" => PolicySpec::SOptimal {
                shipping: UpdateShipping::default(),
            },
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheSize {
    Bytes(Bytes),
    /// Fraction of the catalog's total size, in (0, 1].
    Fraction(f64),
}

impl CacheSize {
    pub fn resolve(&self, catalog: &ObjectCatalog) -> Bytes {
        match *self {
            CacheSize::Bytes(b) => b,
            CacheSize::Fraction(f) => (catalog.total_size() as f64 * f).floor() as Bytes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub policy: PolicySpec,
    pub capacity: CacheSize,
    pub seed: u64,
    pub warmup_events: u64,
    pub sample_stride: u64,
}

impl RunConfig {
    pub fn new(policy: PolicySpec, capacity: CacheSize, seed: u64) -> Self {
        Self {
            policy,
            capacity,
            seed,
            warmup_events: 0,
            sample_stride: 100,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if let CacheSize::Fraction(f) = self.capacity {
            if !(f > 0.0 && f <= 1.0) {
                return Err(RunError::Config(format!("cache fraction {f} outside (0, 1]")));
            }
        }
        if self.sample_stride == 0 {
            return Err(RunError::Config("sample stride must be at least 1".into()));
        }
        if let PolicySpec::Benefit(b) = self.policy {
            if !(0.0..=1.0).contains(&b.alpha) || b.delta == 0 {
                return Err(RunError::Config(format!(
                    "benefit needs alpha in [0, 1] and delta >= 1, got {} / {}",
                    b.alpha, b.delta
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AuditFailure {
    #[error("{qid} answered from cache while {pending:?} were still required")]
    StaleAnswer { qid: QueryId, pending: Vec<UpdateId> },
    #[error("{0} answered from cache without all of its objects resident")]
    AnswerWithoutObjects(QueryId),
    #[error("{0} was not served")]
    Unserved(QueryId),
    #[error("{0} was served more than once")]
    ServedTwice(QueryId),
    #[error("decision {0} refers to a query other than the current event")]
    ForeignQuery(Decision),
    #[error("invalid decision: {0}")]
    Invalid(#[from] ModelError),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RunError {
    #[error("audit failed at event {seq}: {failure}")]
    Audit { seq: u64, failure: AuditFailure },
    #[error("event {seq} is earlier than its predecessor")]
    Unsorted { seq: u64 },
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// When a logged decision was issued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Start,
    Event(u64),
    Finish,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedDecision {
    pub stage: Stage,
    pub decision: Decision,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub query_ship: Bytes,
    pub update_ship: Bytes,
    pub load: Bytes,
    pub total: Bytes,
}

impl LedgerTotals {
    fn of(ledger: &TrafficLedger) -> Self {
        Self {
            query_ship: ledger.query_ship,
            update_ship: ledger.update_ship,
            load: ledger.load,
            total: ledger.total(),
        }
    }

    fn minus(&self, earlier: &Self) -> Self {
        Self {
            query_ship: self.query_ship - earlier.query_ship,
            update_ship: self.update_ship - earlier.update_ship,
            load: self.load - earlier.load,
            total: self.total - earlier.total,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub queries_shipped: u64,
    pub queries_answered: u64,
    pub updates_shipped: u64,
    pub loads: u64,
    pub evictions: u64,
}

/// One row of the sampled series, taken after event `seq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub seq: u64,
    pub query_ship: Bytes,
    pub update_ship: Bytes,
    pub load: Bytes,
    pub total: Bytes,
    pub occupancy: Bytes,
    pub resident: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub answers_checked: u64,
    pub queries_served: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub events: u64,
    pub capacity: Bytes,
    pub seed: u64,
    pub warmup_events: u64,
    pub totals: LedgerTotals,
    pub post_warmup: LedgerTotals,
    pub decisions: DecisionCounts,
    pub audit: AuditSummary,
    pub final_resident: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub ledger: TrafficLedger,
    pub series: Vec<SeriesPoint>,
    pub log: Vec<LoggedDecision>,
    pub initial_cache: CacheState,
    pub final_cache: CacheState,
}

impl RunReport {
    pub fn write_summary_json(&self, out: impl Write) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, &self.summary)
    }

    /// Columns: seq, query_ship, update_ship, load, total, occupancy, resident.
    pub fn write_series_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.series {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per line: `{"stage":..,"decision":..}`.
    pub fn write_decision_log(&self, mut out: impl Write) -> std::io::Result<()> {
        for entry in &self.log {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Instantiates the policy described by `config` for this trace.
pub fn build_policy(
    spec: &PolicySpec,
    trace: &Trace,
    catalog: &ObjectCatalog,
    capacity: Bytes,
    seed: u64,
) -> Box<dyn Policy> {
    match *spec {
        PolicySpec::VCover => Box::new(VCoverPolicy::new(catalog.clone(), capacity, seed)),
        PolicySpec::Benefit(cfg) => Box::new(BenefitPolicy::new(catalog.clone(), capacity, cfg)),
        PolicySpec::NoCache => Box::new(NoCachePolicy),
        PolicySpec::Replica => Box::new(ReplicaPolicy::new(catalog.clone())),
        PolicySpec::SOptimal { shipping } => {
            let plan = SOptimalPlan::choose(trace, catalog, capacity);
            Box::new(SOptimalPolicy::new(catalog.clone(), capacity, plan, shipping))
        }
    }
}

pub fn run(trace: &Trace, catalog: &ObjectCatalog, config: &RunConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    let capacity = config.capacity.resolve(catalog);
    let mut policy = build_policy(&config.policy, trace, catalog, capacity, config.seed);
    let mut report = run_policy(
        trace,
        catalog,
        policy.as_mut(),
        config.warmup_events,
        config.sample_stride,
    )?;
    report.summary.seed = config.seed;
    Ok(report)
}

struct Harness<'a> {
    catalog: &'a ObjectCatalog,
    index: TraceIndex,
    cache: CacheState,
    ledger: TrafficLedger,
    log: Vec<LoggedDecision>,
    counts: DecisionCounts,
    audit: AuditSummary,
    served_current: bool,
}

impl Harness<'_> {
    fn apply(
        &mut self,
        stage: Stage,
        seq: u64,
        decision: Decision,
        current: Option<&Event>,
    ) -> Result<(), AuditFailure> {
        match &decision {
            Decision::ShipQuery(qid) | Decision::AnswerFromCache(qid) => {
                let Some(Event::Query(q)) = current else {
                    return Err(AuditFailure::ForeignQuery(decision));
                };
                if q.qid != *qid {
                    return Err(AuditFailure::ForeignQuery(decision));
                }
                if self.served_current {
                    return Err(AuditFailure::ServedTwice(*qid));
                }
                if let Decision::AnswerFromCache(_) = decision {
                    let pending = self
                        .cache
                        .interacting_updates(q, q.time)
                        .map_err(|_| AuditFailure::AnswerWithoutObjects(*qid))?;
                    if !pending.is_empty() {
                        return Err(AuditFailure::StaleAnswer {
                            qid: *qid,
                            pending: pending.iter().map(|u| u.uid).collect(),
                        });
                    }
                    self.audit.answers_checked += 1;
                    self.counts.queries_answered += 1;
                } else {
                    self.counts.queries_shipped += 1;
                }
                self.served_current = true;
                self.audit.queries_served += 1;
            }
            Decision::ShipUpdates(us) => self.counts.updates_shipped += us.len() as u64,
            Decision::Load(_) => self.counts.loads += 1,
            Decision::Evict(_) => self.counts.evictions += 1,
        }
        self.cache.apply(&decision, self.catalog)?;
        self.ledger.record(seq, &decision, &self.index)?;
        self.log.push(LoggedDecision { stage, decision });
        Ok(())
    }
}

/// Replays `trace` through `policy`, auditing and accounting every decision.
pub fn run_policy(
    trace: &Trace,
    catalog: &ObjectCatalog,
    policy: &mut dyn Policy,
    warmup_events: u64,
    sample_stride: u64,
) -> Result<RunReport, RunError> {
    let stride = sample_stride.max(1);
    let initial_cache = policy.initial_cache();
    let mut h = Harness {
        catalog,
        index: TraceIndex::new(catalog, trace),
        cache: initial_cache.clone(),
        ledger: TrafficLedger::new(),
        log: Vec::new(),
        counts: DecisionCounts::default(),
        audit: AuditSummary::default(),
        served_current: false,
    };
    let fail = |seq: u64| move |failure: AuditFailure| RunError::Audit { seq, failure };

    for d in policy.start() {
        h.apply(Stage::Start, 0, d, None).map_err(fail(0))?;
    }

    let mut series = Vec::new();
    let mut warm = LedgerTotals::default();
    let mut last_time = 0;
    for (i, event) in trace.events.iter().enumerate() {
        let seq = i as u64;
        if event.time() < last_time {
            return Err(RunError::Unsorted { seq });
        }
        last_time = event.time();
        h.served_current = false;
        let decisions = match event {
            Event::Update(u) => {
                h.cache.receive_update(u);
                policy.on_update(u)
            }
            Event::Query(q) => policy.on_query(q, q.time),
        };
        for d in decisions {
            h.apply(Stage::Event(seq), seq, d, Some(event)).map_err(fail(seq))?;
        }
        if let Event::Query(q) = event {
            if !h.served_current {
                return Err(RunError::Audit {
                    seq,
                    failure: AuditFailure::Unserved(q.qid),
                });
            }
        }
        if seq + 1 == warmup_events {
            warm = LedgerTotals::of(&h.ledger);
        }
        if (seq + 1).is_multiple_of(stride) || seq + 1 == trace.len() as u64 {
            series.push(SeriesPoint {
                seq,
                query_ship: h.ledger.query_ship,
                update_ship: h.ledger.update_ship,
                load: h.ledger.load,
                total: h.ledger.total(),
                occupancy: h.cache.used(),
                resident: h.cache.resident_count() as u64,
            });
        }
    }
    let end = trace.len() as u64;
    for d in policy.finalize() {
        h.apply(Stage::Finish, end, d, None).map_err(fail(end))?;
    }

    h.audit.passed = true;
    let totals = LedgerTotals::of(&h.ledger);
    let post_warmup = if warmup_events >= end {
        LedgerTotals::default()
    } else {
        totals.minus(&warm)
    };
    let summary = RunSummary {
        policy: policy.name().to_string(),
        events: end,
        capacity: h.cache.capacity(),
        seed: 0,
        warmup_events,
        totals,
        post_warmup,
        decisions: h.counts,
        audit: h.audit,
        final_resident: h.cache.resident().map(|o| o.0).collect(),
    };
    Ok(RunReport {
        summary,
        ledger: h.ledger,
        series,
        log: h.log,
        initial_cache,
        final_cache: h.cache,
    })
}

/// Re-applies a decision log to `initial`, interleaved with the trace's
/// update arrivals, and returns the resulting cache and ledger.
pub fn replay(
    trace: &Trace,
    catalog: &ObjectCatalog,
    initial: CacheState,
    log: &[LoggedDecision],
) -> Result<(CacheState, TrafficLedger), ModelError> {
    let index = TraceIndex::new(catalog, trace);
    let mut cache = initial;
    let mut ledger = TrafficLedger::new();
    let mut entries = log.iter().peekable();
    let mut apply_stage = |stage: Stage,
                           seq: u64,
                           cache: &mut CacheState,
                           ledger: &mut TrafficLedger|
     -> Result<(), ModelError> {
        while let Some(entry) = entries.next_if(|e| e.stage == stage) {
            cache.apply(&entry.decision, catalog)?;
            ledger.record(seq, &entry.decision, &index)?;
        }
        Ok(())
    };
    apply_stage(Stage::Start, 0, &mut cache, &mut ledger)?;
    for (i, event) in trace.events.iter().enumerate() {
        if let Event::Update(u) = event {
            cache.receive_update(u);
        }
        apply_stage(Stage::Event(i as u64), i as u64, &mut cache, &mut ledger)?;
    }
    let end = trace.len() as u64;
    apply_stage(Stage::Finish, end, &mut cache, &mut ledger)?;
    Ok((cache, ledger))
}

/// Final-cost row of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub totals: LedgerTotals,
    pub post_warmup: LedgerTotals,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub reports: Vec<RunReport>,
}

impl ComparisonReport {
    pub fn rows(&self) -> Vec<ComparisonRow> {
        self.reports
            .iter()
            .map(|r| ComparisonRow {
                policy: r.summary.policy.clone(),
                totals: r.summary.totals,
                post_warmup: r.summary.post_warmup,
            })
            .collect()
    }

    /// Columns: policy, query_ship, update_ship, load, total, post_warmup_total.
    pub fn write_table_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["policy", "query_ship", "update_ship", "load", "total", "post_warmup_total"])?;
        for row in self.rows() {
            w.write_record([
                row.policy,
                row.totals.query_ship.to_string(),
                row.totals.update_ship.to_string(),
                row.totals.load.to_string(),
                row.totals.total.to_string(),
                row.post_warmup.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Cumulative totals side by side: `seq` then one column per run.
    pub fn write_aligned_series_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut by_seq: BTreeMap<u64, Vec<String>> = BTreeMap::new();
        for (i, r) in self.reports.iter().enumerate() {
            for p in &r.series {
                let row = by_seq
                    .entry(p.seq)
                    .or_insert_with(|| vec![String::new(); self.reports.len()]);
                row[i] = p.total.to_string();
            }
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["seq".to_string()];
        header.extend(self.reports.iter().map(|r| r.summary.policy.clone()));
        w.write_record(&header)?;
        for (seq, cols) in by_seq {
            let mut rec = vec![seq.to_string()];
            rec.extend(cols);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every configuration on the same trace. Runs execute in parallel and
/// come back in the order given.
pub fn compare(
    trace: &Trace,
    catalog: &ObjectCatalog,
    configs: &[RunConfig],
) -> Result<ComparisonReport, RunError> {
    let reports = configs
        .par_iter()
        .map(|c| run(trace, catalog, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport { reports })
}
