use std::collections::BTreeSet;

use super::WorkloadError;
use crate::model::{Bytes, Event, ObjectCatalog, ObjectId, Query, Trace, Update, UpdateId};

fn mix(mut x: u64) -> u64 {
    // splitmix64 finaliser
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Re-cuts the catalog into `segments` objects of equal extent.
///
/// Objects are laid end to end in id order, each one unit long, and the
/// line is cut into `segments` equal pieces. A segment's size is the sum of
/// the overlapping parts of the objects it covers. Queries read every
/// segment overlapping one of their objects. An update lands in a single
/// segment at a pseudo-random point inside its object, fixed by its id.
/// Shipping costs are unchanged.
pub fn repartition(
    catalog: &ObjectCatalog,
    trace: &Trace,
    segments: u64,
) -> Result<(ObjectCatalog, Trace), WorkloadError> {
    let n = catalog.len() as u64;
    if segments == 0 || n == 0 {
        return Err(WorkloadError::Params(
            "repartition needs a non-empty catalog and at least one segment".into(),
        ));
    }
    let ids: Vec<ObjectId> = catalog.ids().collect();
    let position = |o: ObjectId| ids.binary_search(&o).map(|k| k as u64);

    // In scaled units object k spans [k*segments, (k+1)*segments) and
    // segment j spans [j*n, (j+1)*n).
    let mut sizes = vec![0u128; segments as usize];
    for (k, (_, entry)) in catalog.iter().enumerate() {
        let (lo, hi) = (k as u64 * segments, (k as u64 + 1) * segments);
        for j in lo / n..=(hi - 1) / n {
            let overlap = hi.min((j + 1) * n) - lo.max(j * n);
            sizes[j as usize] += entry.size as u128 * overlap as u128;
        }
    }
    let mut out = ObjectCatalog::new();
    for (j, s) in sizes.iter().enumerate() {
        let size = ((s / segments as u128) as Bytes).max(1);
        out.insert(ObjectId(j as u64), size).expect("fresh ids");
    }

    let unknown = |o: ObjectId| WorkloadError::Catalog(format!("trace refers to unknown object {o}"));
    let mut events = Vec::with_capacity(trace.len());
    for event in &trace.events {
        events.push(match event {
            Event::Query(q) => {
                let mut segs = BTreeSet::new();
                for &o in &q.objects {
                    let k = position(o).map_err(|_| unknown(o))?;
                    let (lo, hi) = (k * segments, (k + 1) * segments);
                    segs.extend((lo / n..=(hi - 1) / n).map(ObjectId));
                }
                Event::Query(Query::new(q.qid, q.time, segs, q.ship_cost, q.tolerance))
            }
            Event::Update(u) => {
                let k = position(u.object).map_err(|_| unknown(u.object))?;
                let point = k * segments + mix(u.uid.0) % segments;
                Event::Update(Update {
                    object: ObjectId(point / n),
                    ..u.clone()
                })
            }
        });
    }
    Ok((out, Trace::new(events)))
}

/// Repeats every update `factor` times at the same instant. Copy `i` of
/// update `u` gets id `u * factor + i`, so ids stay unique.
pub fn scale_updates(trace: &Trace, factor: u64) -> Trace {
    let mut events = Vec::new();
    for event in &trace.events {
        match event {
            Event::Query(_) => events.push(event.clone()),
            Event::Update(u) => events.extend((0..factor).map(|i| {
                Event::Update(Update {
                    uid: UpdateId(u.uid.0 * factor + i),
                    ..u.clone()
                })
            })),
        }
    }
    Trace::new(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QueryId;

    fn setup() -> (ObjectCatalog, Trace) {
        let mut cat = ObjectCatalog::new();
        for (i, s) in [30, 60, 90].into_iter().enumerate() {
            cat.insert(ObjectId(i as u64 * 10), s).unwrap();
        }
        let trace = Trace::new(vec![
            Event::Query(Query::new(QueryId(1), 0, [ObjectId(10)], 5, 0)),
            Event::Update(Update {
                uid: UpdateId(1),
                time: 1,
                object: ObjectId(20),
                ship_cost: 2,
            }),
        ]);
        (cat, trace)
    }

    #[test]
    fn same_count_is_identity_up_to_renaming() {
        let (cat, trace) = setup();
        let (c, t) = repartition(&cat, &trace, 3).unwrap();
        assert_eq!(c.iter().map(|(_, e)| e.size).collect::<Vec<_>>(), vec![30, 60, 90]);
        assert!(matches!(&t.events[0], Event::Query(q) if q.objects == vec![ObjectId(1)]));
        assert!(matches!(&t.events[1], Event::Update(u) if u.object == ObjectId(2)));
    }

    #[test]
    fn merging_and_splitting_preserve_total_size() {
        let (cat, trace) = setup();
        let (one, t) = repartition(&cat, &trace, 1).unwrap();
        assert_eq!(one.total_size(), 180);
        assert!(matches!(&t.events[0], Event::Query(q) if q.objects == vec![ObjectId(0)]));
        let (six, t) = repartition(&cat, &trace, 6).unwrap();
        assert_eq!(six.total_size(), 180);
        assert_eq!(six.size(ObjectId(2)).unwrap(), 30);
        assert!(matches!(&t.events[0], Event::Query(q) if q.objects == vec![ObjectId(2), ObjectId(3)]));
        assert!(matches!(&t.events[1], Event::Update(u) if u.object.0 >= 4));
        // two segments: object 10 straddles the cut
        let (two, t) = repartition(&cat, &trace, 2).unwrap();
        assert_eq!(two.size(ObjectId(0)).unwrap(), 60);
        assert_eq!(two.size(ObjectId(1)).unwrap(), 120);
        assert!(matches!(&t.events[0], Event::Query(q) if q.objects.len() == 2));
    }

    #[test]
    fn scaling_triples_updates_only() {
        let (_, trace) = setup();
        let t = scale_updates(&trace, 3);
        assert_eq!(t.queries().count(), 1);
        let uids: BTreeSet<_> = t.updates().map(|u| u.uid).collect();
        assert_eq!(uids.len(), 3);
        assert_eq!(t.updates().map(|u| u.ship_cost).sum::<u64>(), 6);
    }
}
