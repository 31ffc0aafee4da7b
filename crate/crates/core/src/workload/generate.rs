use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{TraceHeader, WorkloadError};
use crate::model::{Bytes, Event, Micros, ObjectCatalog, ObjectId, Query, QueryId, Trace, Update, UpdateId};

/// Shape of a synthetic workload. Objects are numbered `0..n_objects`, and
/// neighbouring ids stand for neighbouring regions of the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub n_objects: u64,
    /// Object sizes are log-uniform in `[size_min, size_max]`.
    pub size_min: Bytes,
    pub size_max: Bytes,
    pub n_queries: u64,
    pub n_updates: u64,
    /// Centres of query clusters, taken in groups of `hotspot_group`.
    pub query_hotspots: Vec<u64>,
    pub hotspot_group: usize,
    /// Share of queries centred on a query hotspot.
    pub query_hotspot_weight: f64,
    /// The query sequence is cut into this many phases, and each phase
    /// favours the next hotspot group.
    pub query_phases: u64,
    /// Share of hotspot queries that go to the current phase's group.
    pub phase_focus: f64,
    pub update_hotspots: Vec<u64>,
    /// Share of update scans starting at an update hotspot.
    pub update_hotspot_weight: f64,
    /// Updates per scan.
    pub scan_length: u64,
    /// Number of adjacent objects a scan sweeps over.
    pub scan_width: u64,
    /// |B(q)| is uniform in `1..=max_objects_per_query`.
    pub max_objects_per_query: u64,
    /// Query cost as a fraction of the total size of the objects it reads.
    pub selectivity: f64,
    /// Update cost as a fraction of the updated object's size.
    pub update_fraction: f64,
    pub mean_interarrival: Micros,
    /// Probabilities of tolerance 0, `tolerance_small` and `tolerance_large`.
    pub tolerance_mix: [f64; 3],
    pub tolerance_small: Micros,
    pub tolerance_large: Micros,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_objects: 68,
            size_min: 50_000_000,
            size_max: 90_000_000_000,
            n_queries: 10_000,
            n_updates: 10_000,
            query_hotspots: vec![22, 23, 24, 62, 63, 64],
            hotspot_group: 3,
            query_hotspot_weight: 0.9,
            query_phases: 4,
            phase_focus: 0.8,
            update_hotspots: vec![11, 12, 13, 30, 31, 32],
            update_hotspot_weight: 0.7,
            scan_length: 12,
            scan_width: 3,
            max_objects_per_query: 3,
            selectivity: 0.004,
            update_fraction: 0.001,
            mean_interarrival: 1_000_000,
            tolerance_mix: [0.6, 0.25, 0.15],
            tolerance_small: 10_000_000,
            tolerance_large: 600_000_000,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::Params(m));
        if self.n_objects == 0 {
            return bad("n_objects must be positive".into());
        }
        if self.size_min == 0 || self.size_min > self.size_max {
            return bad(format!("size bounds {}..{} are invalid", self.size_min, self.size_max));
        }
        for (name, set) in [("query", &self.query_hotspots), ("update", &self.update_hotspots)] {
            if let Some(h) = set.iter().find(|h| **h >= self.n_objects) {
                return bad(format!("{name} hotspot {h} is outside the catalog"));
            }
        }
        for (name, p) in [
            ("query_hotspot_weight", self.query_hotspot_weight),
            ("phase_focus", self.phase_focus),
            ("update_hotspot_weight", self.update_hotspot_weight),
            ("selectivity", self.selectivity),
            ("update_fraction", self.update_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.tolerance_mix.iter().any(|p| !(0.0..=1.0).contains(p))
            || (self.tolerance_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("tolerance_mix must be probabilities summing to 1".into());
        }
        if self.hotspot_group == 0 || self.query_phases == 0 {
            return bad("hotspot_group and query_phases must be positive".into());
        }
        if self.scan_length == 0 || self.scan_width == 0 || self.scan_width > self.n_objects {
            return bad("scan_length and scan_width must be in 1..=n_objects".into());
        }
        if self.max_objects_per_query == 0 || self.max_objects_per_query > self.n_objects {
            return bad("max_objects_per_query must be in 1..=n_objects".into());
        }
        if self.mean_interarrival == 0 {
            return bad("mean_interarrival must be positive".into());
        }
        Ok(())
    }

    /// Start of a `width`-object window containing `centre`, shifted by
    /// `offset` to the left and clamped to the catalog.
    pub fn window_start(&self, centre: u64, width: u64, offset: u64) -> u64 {
        centre.saturating_sub(offset).min(self.n_objects - width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Workload {
    pub catalog: ObjectCatalog,
    pub trace: Trace,
    pub header: TraceHeader,
}

fn log_uniform(rng: &mut impl Rng, lo: Bytes, hi: Bytes) -> Bytes {
    if lo == hi {
        return lo;
    }
    let x = rng.random_range((lo as f64).ln()..=(hi as f64).ln());
    (x.exp().round() as Bytes).clamp(lo, hi)
}

fn scaled(size: Bytes, fraction: f64) -> Bytes {
    ((size as f64 * fraction).round() as Bytes).max(1)
}

/// Query object sets and costs, in sequence order. Times are filled in later.
fn draw_queries(p: &GeneratorParams, sizes: &[Bytes], rng: &mut impl Rng) -> Vec<(Vec<ObjectId>, Bytes, Micros)> {
    let groups: Vec<&[u64]> = p.query_hotspots.chunks(p.hotspot_group).collect();
    let tolerances = [0, p.tolerance_small, p.tolerance_large];
    (0..p.n_queries)
        .map(|i| {
            let phase = (i * p.query_phases / p.n_queries) as usize;
            let centre = if !groups.is_empty() && rng.random_bool(p.query_hotspot_weight) {
                let g = if groups.len() == 1 || rng.random_bool(p.phase_focus) {
                    phase % groups.len()
                } else {
                    // one of the other groups
                    let k = rng.random_range(1..groups.len());
                    (phase + k) % groups.len()
                };
                groups[g][rng.random_range(0..groups[g].len())]
            } else {
                rng.random_range(0..p.n_objects)
            };
            let width = rng.random_range(1..=p.max_objects_per_query);
            let start = p.window_start(centre, width, rng.random_range(0..width));
            let objects: Vec<ObjectId> = (start..start + width).map(ObjectId).collect();
            let bytes: Bytes = (start..start + width).map(|o| sizes[o as usize]).sum();
            let r: f64 = rng.random();
            let tol = if r < p.tolerance_mix[0] {
                tolerances[0]
            } else if r < p.tolerance_mix[0] + p.tolerance_mix[1] {
                tolerances[1]
            } else {
                tolerances[2]
            };
            (objects, scaled(bytes, p.selectivity), tol)
        })
        .collect()
}

/// Updated objects in sequence order. Each scan sweeps its window in
/// ascending order, wrapping around, `scan_length` times.
fn draw_updates(p: &GeneratorParams, rng: &mut impl Rng) -> Vec<ObjectId> {
    let mut out = Vec::with_capacity(p.n_updates as usize);
    while (out.len() as u64) < p.n_updates {
        let w = p.scan_width;
        let centre = if !p.update_hotspots.is_empty() && rng.random_bool(p.update_hotspot_weight) {
            p.update_hotspots[rng.random_range(0..p.update_hotspots.len())]
        } else {
            rng.random_range(0..p.n_objects)
        };
        let start = p.window_start(centre, w, rng.random_range(0..w));
        let len = p.scan_length.min(p.n_updates - out.len() as u64);
        out.extend((0..len).map(|j| ObjectId(start + j % w)));
    }
    out
}

/// Builds a catalog and trace from `params`. The same seed always gives
/// the same workload.
pub fn generate(params: &GeneratorParams, seed: u64) -> Result<Workload, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<Bytes> = (0..params.n_objects)
        .map(|_| log_uniform(&mut rng, params.size_min, params.size_max))
        .collect();
    let mut catalog = ObjectCatalog::new();
    for (i, s) in sizes.iter().enumerate() {
        catalog.insert(ObjectId(i as u64), *s).expect("sizes are positive");
    }

    let queries = draw_queries(params, &sizes, &mut rng);
    let updates = draw_updates(params, &mut rng);

    let mut kinds: Vec<bool> = std::iter::repeat_n(true, queries.len())
        .chain(std::iter::repeat_n(false, updates.len()))
        .collect();
    kinds.shuffle(&mut rng);

    let gap = Exp::new(1.0 / params.mean_interarrival as f64).expect("positive rate");
    let mut time: Micros = 0;
    let mut qs = queries.into_iter().enumerate();
    let mut us = updates.into_iter().enumerate();
    let mut events = Vec::with_capacity(kinds.len());
    for is_query in kinds {
        time += gap.sample(&mut rng).round() as Micros;
        events.push(if is_query {
            let (i, (objects, cost, tol)) = qs.next().expect("counted");
            Event::Query(Query::new(QueryId(i as u64 + 1), time, objects, cost, tol))
        } else {
            let (i, object) = us.next().expect("counted");
            Event::Update(Update {
                uid: UpdateId(i as u64 + 1),
                time,
                object,
                ship_cost: scaled(sizes[object.0 as usize], params.update_fraction),
            })
        });
    }

    let header = TraceHeader {
        seed: Some(seed),
        params: Some(params.clone()),
        ..TraceHeader::new(Some("catalog.json".into()))
    };
    Ok(Workload {
        catalog,
        trace: Trace::new(events),
        header,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let w = generate(&GeneratorParams::default(), 1).unwrap();
        assert_eq!(w.catalog.len(), 68);
        assert_eq!(w.trace.queries().count(), 10_000);
        assert_eq!(w.trace.updates().count(), 10_000);
        assert!(w.trace.events.windows(2).all(|e| e[0].time() <= e[1].time()));
        for (_, e) in w.catalog.iter() {
            assert!((50_000_000..=90_000_000_000).contains(&e.size));
        }
    }

    #[test]
    fn same_seed_same_workload() {
        let p = GeneratorParams {
            n_queries: 500,
            n_updates: 500,
            ..Default::default()
        };
        assert_eq!(generate(&p, 9).unwrap(), generate(&p, 9).unwrap());
        assert_ne!(generate(&p, 9).unwrap().trace, generate(&p, 10).unwrap().trace);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = [
            GeneratorParams { n_objects: 10, ..Default::default() },
            GeneratorParams { query_hotspot_weight: 1.5, ..Default::default() },
            GeneratorParams { tolerance_mix: [0.5, 0.5, 0.5], ..Default::default() },
            GeneratorParams { size_min: 10, size_max: 5, ..Default::default() },
            GeneratorParams { scan_width: 0, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(generate(&p, 0), Err(WorkloadError::Params(_))));
        }
    }

    #[test]
    fn tiny_catalog_windows_stay_inside() {
        let p = GeneratorParams {
            n_objects: 2,
            query_hotspots: vec![1],
            update_hotspots: vec![0],
            scan_width: 2,
            max_objects_per_query: 2,
            n_queries: 200,
            n_updates: 200,
            ..Default::default()
        };
        let w = generate(&p, 3).unwrap();
        for q in w.trace.queries() {
            assert!(q.objects.iter().all(|o| o.0 < 2));
        }
    }
}
