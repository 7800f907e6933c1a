//! Event files.
//!
//! JSON-lines: each stream is a header line `{"meta": {...}}` followed by one
//! `{"a":0,"b":1}` line per event; several streams may share a file.
//!
//! CSV: columns `x,y,variant,a,b`, one event per row; lines starting with
//! `#` are comments. CSV carries no metadata.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairstats::SettingPair;
use crate::simulate::{BasisVariant, Event, EventStream, StreamMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Jsonl,
    Csv,
}

impl EventFormat {
    /// `.csv` is CSV; anything else is read as JSON-lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Jsonl,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: HeaderMeta,
}

#[derive(Serialize, Deserialize)]
struct HeaderMeta {
    setting: SettingPair,
    variant: u8,
    #[serde(flatten)]
    meta: StreamMeta,
}

pub fn write_jsonl<W: Write>(streams: &[EventStream], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for stream in streams {
        let header = Header {
            meta: HeaderMeta {
                setting: stream.setting,
                variant: stream.variant.index(),
                meta: stream.meta,
            },
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for e in &stream.events {
            writeln!(w, "{{\"a\":{},\"b\":{}}}", e.a, e.b)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads JSON-lines streams; `source` only labels errors.
pub fn read_jsonl<R: Read>(reader: R, source: &Path) -> Result<Vec<EventStream>> {
    let err = |line: usize, message: String| Error::Ingestion {
        file: source.to_path_buf(),
        line: Some(line),
        message,
    };
    let mut streams: Vec<EventStream> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(event) = fast_event(text) {
            match streams.last_mut() {
                Some(s) => s.events.push(event),
                None => return Err(err(lineno, "event before any stream header".into())),
            }
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| err(lineno, format!("malformed record: {e}")))?;
        if value.get("meta").is_some() {
            let header: Header = serde_json::from_value(value)
                .map_err(|e| err(lineno, format!("malformed header: {e}")))?;
            let variant = BasisVariant::new(header.meta.variant).map_err(|_| {
                err(
                    lineno,
                    format!("variant {} outside 0..3", header.meta.variant),
                )
            })?;
            streams.push(EventStream {
                setting: header.meta.setting,
                variant,
                events: Vec::new(),
                meta: header.meta.meta,
            });
        } else {
            let event: Event = serde_json::from_value(value)
                .map_err(|e| err(lineno, format!("malformed event: {e}")))?;
            check_bits(event).map_err(|m| err(lineno, m))?;
            match streams.last_mut() {
                Some(s) => s.events.push(event),
                None => return Err(err(lineno, "event before any stream header".into())),
            }
        }
    }
    Ok(streams)
}

fn fast_event(text: &str) -> Option<Event> {
    let bytes = text.as_bytes();
    if bytes.len() == 13
        && text.starts_with("{\"a\":")
        && &bytes[6..11] == b",\"b\":"
        && bytes[12] == b'}'
    {
        let bit = |c: u8| match c {
            b'0' => Some(0),
            b'1' => Some(1),
            _ => None,
        };
        return Some(Event::new(bit(bytes[5])?, bit(bytes[11])?));
    }
    None
}

fn check_bits(e: Event) -> std::result::Result<(), String> {
    if e.a > 1 || e.b > 1 {
        Err(format!("outcome ({}, {}) is not a bit pair", e.a, e.b))
    } else {
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    x: u8,
    y: u8,
    variant: u8,
    a: u8,
    b: u8,
}

pub fn write_csv<W: Write>(streams: &[EventStream], writer: W) -> Result<()> {
    write_csv_with_comments(streams, &[], writer)
}

/// CSV preceded by `# ` comment lines (provenance, configuration).
pub fn write_csv_with_comments<W: Write>(
    streams: &[EventStream],
    comments: &[String],
    writer: W,
) -> Result<()> {
    let mut out = BufWriter::new(writer);
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    for stream in streams {
        for e in &stream.events {
            w.serialize(CsvRow {
                x: stream.setting.x(),
                y: stream.setting.y(),
                variant: stream.variant.index(),
                a: e.a,
                b: e.b,
            })
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Reads CSV events. Consecutive rows with the same `(x, y, variant)` form
/// one stream.
pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Vec<EventStream>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let err = |line: Option<u64>, message: String| Error::Ingestion {
        file: source.to_path_buf(),
        line: line.map(|l| l as usize),
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| {
            err(
                e.position().map(|p| p.line()),
                format!("malformed header: {e}"),
            )
        })?
        .clone();
    let mut streams: Vec<EventStream> = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                return Err(err(
                    e.position().map(|p| p.line()),
                    format!("malformed record: {e}"),
                ))
            }
        }
        let line = row.position().map(|p| p.line());
        let record: CsvRow = row
            .deserialize(Some(&headers))
            .map_err(|e| err(line, format!("malformed record: {e}")))?;
        let line_err = |message: String| err(line, message);
        let setting = SettingPair::new(record.x, record.y).map_err(|_| {
            line_err(format!(
                "setting ({}, {}) outside {{1,2}}²",
                record.x, record.y
            ))
        })?;
        let variant = BasisVariant::new(record.variant)
            .map_err(|_| line_err(format!("variant {} outside 0..3", record.variant)))?;
        let event = Event::new(record.a, record.b);
        check_bits(event).map_err(line_err)?;
        match streams.last_mut() {
            Some(s) if s.setting == setting && s.variant == variant => s.events.push(event),
            _ => streams.push(EventStream {
                setting,
                variant,
                events: vec![event],
                meta: StreamMeta::default(),
            }),
        }
    }
    Ok(streams)
}

/// Writes streams to `path`, picking the format from the extension.
pub fn write_streams(path: &Path, streams: &[EventStream]) -> Result<()> {
    let file = File::create(path)?;
    match EventFormat::from_path(path) {
        EventFormat::Jsonl => write_jsonl(streams, file),
        EventFormat::Csv => write_csv(streams, file),
    }
}

pub fn read_streams(path: &Path) -> Result<Vec<EventStream>> {
    let file = File::open(path).map_err(|e| Error::Ingestion {
        file: path.to_path_buf(),
        line: None,
        message: e.to_string(),
    })?;
    match EventFormat::from_path(path) {
        EventFormat::Jsonl => read_jsonl(file, path),
        EventFormat::Csv => read_csv(file, path),
    }
}

/// Streams from several files, each tagged with its source.
pub fn read_many(paths: &[PathBuf]) -> Result<Vec<(PathBuf, EventStream)>> {
    let mut out = Vec::new();
    for path in paths {
        for stream in read_streams(path)? {
            out.push((path.clone(), stream));
        }
    }
    Ok(out)
}
