use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use super::{GeneratorParams, WorkloadError};
use crate::model::{Bytes, Event, Micros, ObjectCatalog, ObjectId, Query, QueryId, Trace, Update, UpdateId};

pub const CATALOG_SCHEMA: &str = "delta-catalog/1";
pub const TRACE_SCHEMA: &str = "delta-trace/1";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    schema: String,
    objects: Vec<CatalogEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogEntry {
    id: ObjectId,
    size: Bytes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load_cost: Option<Bytes>,
}

/// First line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub schema: String,
    /// Catalog path, relative to the trace file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<GeneratorParams>,
}

impl TraceHeader {
    pub fn new(catalog: Option<String>) -> Self {
        Self {
            schema: TRACE_SCHEMA.to_string(),
            catalog,
            seed: None,
            params: None,
        }
    }
}

/// One event line of a trace file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Record {
    Query {
        qid: QueryId,
        time: Micros,
        objects: Vec<ObjectId>,
        ship_cost: Bytes,
        #[serde(default)]
        tolerance: Micros,
    },
    Update {
        uid: UpdateId,
        time: Micros,
        object: ObjectId,
        ship_cost: Bytes,
    },
}

impl From<&Event> for Record {
    fn from(event: &Event) -> Self {
        match event {
            Event::Query(q) => Record::Query {
                qid: q.qid,
                time: q.time,
                objects: q.objects.clone(),
                ship_cost: q.ship_cost,
                tolerance: q.tolerance,
            },
            Event::Update(u) => Record::Update {
                uid: u.uid,
                time: u.time,
                object: u.object,
                ship_cost: u.ship_cost,
            },
        }
    }
}

impl From<Record> for Event {
    fn from(record: Record) -> Self {
        match record {
            Record::Query {
                qid,
                time,
                objects,
                ship_cost,
                tolerance,
            } => Event::Query(Query {
                qid,
                time,
                objects,
                ship_cost,
                tolerance,
            }),
            Record::Update {
                uid,
                time,
                object,
                ship_cost,
            } => Event::Update(Update {
                uid,
                time,
                object,
                ship_cost,
            }),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkloadError + '_ {
    move |source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Opens a file for buffered reading, decompressing it if it starts with the
/// gzip magic bytes.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, WorkloadError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(io_err(path))?;
    if head.starts_with(&GZIP_MAGIC) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Parses the contents of a catalog file.
pub fn parse_catalog(bytes: &[u8]) -> Result<ObjectCatalog, WorkloadError> {
    let file: CatalogFile = serde_json::from_slice(bytes).map_err(|source| WorkloadError::Json {
        line: source.line() as u64,
        source,
    })?;
    if file.schema != CATALOG_SCHEMA {
        return Err(WorkloadError::Catalog(format!(
            "unsupported schema {:?}, expected {CATALOG_SCHEMA:?}",
            file.schema
        )));
    }
    let mut catalog = ObjectCatalog::new();
    for e in file.objects {
        catalog
            .insert_with_cost(e.id, e.size, e.load_cost.unwrap_or(e.size))
            .map_err(|err| WorkloadError::Catalog(err.to_string()))?;
    }
    Ok(catalog)
}

pub fn load_catalog(path: &Path) -> Result<ObjectCatalog, WorkloadError> {
    let mut bytes = Vec::new();
    open_input(path)?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    parse_catalog(&bytes)
}

pub fn write_catalog(catalog: &ObjectCatalog, mut out: impl Write) -> std::io::Result<()> {
    let file = CatalogFile {
        schema: CATALOG_SCHEMA.to_string(),
        objects: catalog
            .iter()
            .map(|(id, e)| CatalogEntry {
                id,
                size: e.size,
                load_cost: Some(e.load_cost),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")
}

pub fn parse_header(text: &str) -> Result<TraceHeader, WorkloadError> {
    let header: TraceHeader =
        serde_json::from_str(text).map_err(|source| WorkloadError::Json { line: 1, source })?;
    if header.schema != TRACE_SCHEMA {
        return Err(WorkloadError::Schema {
            line: 1,
            message: format!("unsupported schema {:?}, expected {TRACE_SCHEMA:?}", header.schema),
        });
    }
    Ok(header)
}

/// Parses one event line. `line` is only used for error messages.
pub fn parse_record(text: &str, line: u64) -> Result<Record, WorkloadError> {
    let record: Record =
        serde_json::from_str(text).map_err(|source| WorkloadError::Json { line, source })?;
    if let Record::Query { objects, .. } = &record {
        if objects.is_empty() {
            return Err(WorkloadError::Schema {
                line,
                message: "query accesses no objects".into(),
            });
        }
        if objects.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WorkloadError::Schema {
                line,
                message: "query objects must be strictly increasing".into(),
            });
        }
    }
    Ok(record)
}

/// Streaming trace parser. Yields events in file order and checks ordering,
/// id uniqueness and, when given a catalog, that every object exists.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line: u64,
    header: TraceHeader,
    catalog: Option<ObjectCatalog>,
    last_time: Micros,
    queries: HashSet<QueryId>,
    updates: HashSet<UpdateId>,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    /// Reads and checks the header line.
    pub fn new(reader: R) -> Result<Self, WorkloadError> {
        let mut lines = reader.lines();
        let first = match lines.next() {
            Some(l) => l.map_err(|e| WorkloadError::Schema {
                line: 1,
                message: e.to_string(),
            })?,
            None => {
                return Err(WorkloadError::Schema {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        Ok(Self {
            lines,
            line: 1,
            header: parse_header(&first)?,
            catalog: None,
            last_time: 0,
            queries: HashSet::new(),
            updates: HashSet::new(),
            failed: false,
        })
    }

    /// Enables referential checks against `catalog`.
    pub fn with_catalog(mut self, catalog: ObjectCatalog) -> Self {
        self.catalog = Some(catalog);
        self
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn check(&mut self, record: Record) -> Result<Event, WorkloadError> {
        let line = self.line;
        let event = Event::from(record);
        if event.time() < self.last_time {
            return Err(WorkloadError::Unsorted {
                line,
                time: event.time(),
                previous: self.last_time,
            });
        }
        self.last_time = event.time();
        let (fresh, objects): (bool, &[ObjectId]) = match &event {
            Event::Query(q) => (self.queries.insert(q.qid), &q.objects),
            Event::Update(u) => (self.updates.insert(u.uid), std::slice::from_ref(&u.object)),
        };
        if !fresh {
            let id = match &event {
                Event::Query(q) => q.qid.to_string(),
                Event::Update(u) => u.uid.to_string(),
            };
            return Err(WorkloadError::DuplicateId { line, id });
        }
        if let Some(catalog) = &self.catalog {
            if let Some(&object) = objects.iter().find(|o| !catalog.contains(**o)) {
                return Err(WorkloadError::UnknownObject { line, object });
            }
        }
        Ok(event)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<Event, WorkloadError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = self.lines.next()?;
            self.line += 1;
            let result = text
                .map_err(|e| WorkloadError::Schema {
                    line: self.line,
                    message: e.to_string(),
                })
                .and_then(|t| {
                    if t.trim().is_empty() {
                        return Ok(None);
                    }
                    let record = parse_record(&t, self.line)?;
                    self.check(record).map(Some)
                });
            match result {
                Ok(None) => continue,
                Ok(Some(event)) => return Some(Ok(event)),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

pub fn open_trace(path: &Path) -> Result<TraceReader<Box<dyn BufRead>>, WorkloadError> {
    TraceReader::new(open_input(path)?)
}

fn catalog_path(trace_path: &Path, header: &TraceHeader) -> Result<PathBuf, WorkloadError> {
    let name = header.catalog.as_ref().ok_or_else(|| WorkloadError::Schema {
        line: 1,
        message: "header names no catalog and none was given".into(),
    })?;
    Ok(trace_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(name))
}

/// Loads a trace and its catalog. Without an explicit `catalog` path the one
/// named in the header is used, resolved against the trace's directory.
pub fn load_trace(
    path: &Path,
    catalog: Option<&Path>,
) -> Result<(TraceHeader, ObjectCatalog, Trace), WorkloadError> {
    let reader = open_trace(path)?;
    let header = reader.header().clone();
    let catalog_file = match catalog {
        Some(p) => p.to_path_buf(),
        None => catalog_path(path, &header)?,
    };
    let catalog = load_catalog(&catalog_file)?;
    let events = reader
        .with_catalog(catalog.clone())
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, catalog, Trace::new(events)))
}

pub fn write_trace(header: &TraceHeader, trace: &Trace, out: impl Write) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for event in &trace.events {
        serde_json::to_writer(&mut out, &Record::from(event))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub objects: usize,
    pub catalog_bytes: Bytes,
    pub events: u64,
    pub queries: u64,
    pub updates: u64,
    pub first_time: Micros,
    pub last_time: Micros,
}

/// Streams through a trace, checking schema, order and referential
/// integrity without keeping the events.
pub fn validate(path: &Path, catalog: Option<&Path>) -> Result<ValidationReport, WorkloadError> {
    let reader = open_trace(path)?;
    let catalog_file = match catalog {
        Some(p) => p.to_path_buf(),
        None => catalog_path(path, reader.header())?,
    };
    let catalog = load_catalog(&catalog_file)?;
    let mut report = ValidationReport {
        objects: catalog.len(),
        catalog_bytes: catalog.total_size(),
        ..Default::default()
    };
    for event in reader.with_catalog(catalog) {
        let event = event?;
        if report.events == 0 {
            report.first_time = event.time();
        }
        report.last_time = event.time();
        report.events += 1;
        match event {
            Event::Query(_) => report.queries += 1,
            Event::Update(_) => report.updates += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"schema":"delta-trace/1","catalog":"catalog.json"}"#;

    fn read(text: &str) -> Result<Vec<Event>, WorkloadError> {
        let mut cat = ObjectCatalog::new();
        cat.insert(ObjectId(1), 10).unwrap();
        cat.insert(ObjectId(2), 10).unwrap();
        TraceReader::new(text.as_bytes())?
            .with_catalog(cat)
            .collect()
    }

    #[test]
    fn parses_both_record_kinds() {
        let text = format!(
            "{HEADER}\n{}\n\n{}\n",
            r#"{"type":"update","uid":1,"time":5,"object":2,"ship_cost":3}"#,
            r#"{"type":"query","qid":1,"time":5,"objects":[1,2],"ship_cost":9}"#
        );
        let events = read(&text).unwrap();
        assert_eq!(events.len(), 2);
        assert!(matches!(&events[1], Event::Query(q) if q.tolerance == 0 && q.objects.len() == 2));
    }

    #[test]
    fn errors_name_the_line() {
        let bad_order = format!(
            "{HEADER}\n{}\n{}\n",
            r#"{"type":"update","uid":1,"time":5,"object":2,"ship_cost":3}"#,
            r#"{"type":"update","uid":2,"time":4,"object":2,"ship_cost":3}"#
        );
        let err = read(&bad_order).unwrap_err();
        assert!(matches!(err, WorkloadError::Unsorted { line: 3, .. }), "{err}");

        let unknown = format!("{HEADER}\n{}\n", r#"{"type":"update","uid":1,"time":5,"object":9,"ship_cost":3}"#);
        assert_eq!(read(&unknown).unwrap_err().line(), Some(2));

        let dup = format!(
            "{HEADER}\n{}\n{}\n",
            r#"{"type":"query","qid":1,"time":5,"objects":[1],"ship_cost":9}"#,
            r#"{"type":"query","qid":1,"time":6,"objects":[1],"ship_cost":9}"#
        );
        assert!(matches!(read(&dup).unwrap_err(), WorkloadError::DuplicateId { line: 3, .. }));

        let extra = format!("{HEADER}\n{}\n", r#"{"type":"update","uid":1,"time":5,"object":1,"ship_cost":3,"x":1}"#);
        assert_eq!(read(&extra).unwrap_err().line(), Some(2));

        let unsorted_set = format!("{HEADER}\n{}\n", r#"{"type":"query","qid":1,"time":5,"objects":[2,1],"ship_cost":9}"#);
        assert!(matches!(read(&unsorted_set).unwrap_err(), WorkloadError::Schema { line: 2, .. }));
    }

    #[test]
    fn header_schema_is_checked() {
        assert!(read(r#"{"schema":"other/1"}"#).is_err());
        assert!(read("").is_err());
    }

    #[test]
    fn catalog_defaults_load_cost_to_size() {
        let cat = parse_catalog(br#"{"schema":"delta-catalog/1","objects":[{"id":3,"size":7}]}"#).unwrap();
        assert_eq!(cat.load_cost(ObjectId(3)).unwrap(), 7);
        assert!(parse_catalog(br#"{"schema":"delta-catalog/1","objects":[{"id":3,"size":0}]}"#).is_err());
        assert!(parse_catalog(br#"{"schema":"delta-catalog/1","objects":[{"id":3,"size":1},{"id":3,"size":1}]}"#).is_err());
    }

    #[test]
    fn catalog_round_trip() {
        let mut cat = ObjectCatalog::new();
        cat.insert_with_cost(ObjectId(4), 100, 120).unwrap();
        cat.insert(ObjectId(9), 5).unwrap();
        let mut buf = Vec::new();
        write_catalog(&cat, &mut buf).unwrap();
        assert_eq!(parse_catalog(&buf).unwrap(), cat);
    }
}
