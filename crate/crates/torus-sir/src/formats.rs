//! Output files. Every CSV starts with a `#` comment naming its schema and
//! version; numbers are written in shortest round-trip form so reruns are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use torus_sir_core::simulator::{EventKind, EventRecord, Snapshot};
use torus_sir_core::spectral::{DiagnosticRow, SpectralField};
use torus_sir_core::GridField;

use crate::error::{io_err, HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A directory receiving the outputs of one run; remembers what was written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn claim(&mut self, name: &str) -> PathBuf {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn csv(&mut self, name: &str, schema: &str, header: &[&str]) -> Result<CsvOut> {
        let path = self.claim(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut sink = BufWriter::new(file);
        writeln!(sink, "# torus-sir {schema} v{SCHEMA_VERSION}").map_err(io_err(&path))?;
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header).map_err(|e| csv_err(&path, e))?;
        Ok(CsvOut { writer, path })
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.claim(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn json_lines<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let path = self.claim(name);
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).map_err(|e| HarnessError::Runtime(e.to_string()))?);
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    /// Raw little-endian `f64` values, first-coordinate major, plus a JSON sidecar.
    pub fn field(&mut self, stem: &str, quantity: &str, time: f64, field: &GridField) -> Result<()> {
        let bin = format!("{stem}.bin");
        let path = self.claim(&bin);
        let mut bytes = Vec::with_capacity(8 * field.values().len());
        for v in field.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        let sidecar = FieldSidecar {
            schema: format!("torus-sir field v{SCHEMA_VERSION}"),
            quantity: quantity.to_string(),
            n_grid: field.n(),
            time,
            layout: "f64 little-endian, index i1 * n_grid + i2, node (i1, i2) at (i1, i2) / n_grid".into(),
            data: bin,
        };
        self.json(&format!("{stem}.json"), &sidecar)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    path: PathBuf,
}

impl CsvOut {
    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(io_err(&self.path))
    }
}

/// Shortest decimal that round-trips.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub schema: String,
    pub quantity: String,
    pub n_grid: usize,
    pub time: f64,
    pub layout: String,
    pub data: String,
}

/// Reads a field back through its sidecar.
pub fn read_field(sidecar: &Path) -> Result<(FieldSidecar, GridField)> {
    let meta: FieldSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar).map_err(io_err(sidecar))?)
        .map_err(|e| HarnessError::Runtime(format!("{}: {e}", sidecar.display())))?;
    let bin = sidecar.with_file_name(&meta.data);
    let mut bytes = Vec::new();
    File::open(&bin).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(&bin))?;
    if bytes.len() != 8 * meta.n_grid * meta.n_grid {
        return Err(HarnessError::Runtime(format!("{}: expected {} values", bin.display(), meta.n_grid * meta.n_grid)));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let field = GridField::new(meta.n_grid, values)?;
    Ok((meta, field))
}

pub fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::Infection => "infection",
        EventKind::Recovery => "recovery",
    }
}

pub fn write_events(out: &mut OutputDir, name: &str, events: &[EventRecord]) -> Result<()> {
    let mut csv = out.csv(name, "events", &["time", "kind", "agent_id"])?;
    for e in events {
        csv.row([num(e.time), kind_name(e.kind).to_string(), e.agent.to_string()])?;
    }
    csv.finish()
}

pub fn write_snapshots(out: &mut OutputDir, name: &str, snapshots: &[Snapshot], positions: bool) -> Result<()> {
    let header: &[&str] =
        if positions { &["time", "agent_id", "x1", "x2", "state"] } else { &["time", "agent_id", "state"] };
    let mut csv = out.csv(name, "snapshots", header)?;
    for snap in snapshots {
        for (id, (p, s)) in snap.positions.iter().zip(&snap.states).enumerate() {
            let state = s.letter().to_string();
            if positions {
                csv.row([num(snap.time), id.to_string(), num(p.x1()), num(p.x2()), state])?;
            } else {
                csv.row([num(snap.time), id.to_string(), state])?;
            }
        }
    }
    csv.finish()
}


pub fn write_spectral(out: &mut OutputDir, name: &str, field: &SpectralField) -> Result<()> {
    let mut csv = out.csv(name, "spectral-field", &["family", "n1", "n2", "coeff"])?;
    for (idx, c) in field.iter() {
        csv.row([idx.family().to_string(), idx.n1().to_string(), idx.n2().to_string(), num(c)])?;
    }
    csv.finish()
}

pub fn write_diagnostic(out: &mut OutputDir, name: &str, rows: &[(f64, DiagnosticRow)]) -> Result<()> {
    let mut csv = out.csv(name, "basis-sum-diagnostic", &["s", "cutoff", "rho_sq", "grad_sq"])?;
    for (s, r) in rows {
        csv.row([num(*s), r.cutoff.to_string(), num(r.rho_sq), num(r.grad_sq)])?;
    }
    csv.finish()
}

/// Grid field as CSV rows `i1,i2,x1,x2,value`.
pub fn write_field_csv(out: &mut OutputDir, name: &str, field: &GridField) -> Result<()> {
    let mut csv = out.csv(name, "grid-field", &["i1", "i2", "x1", "x2", "value"])?;
    let n = field.n();
    for i1 in 0..n {
        for i2 in 0..n {
            let p = field.node(i1, i2);
            csv.row([i1.to_string(), i2.to_string(), num(p.x1()), num(p.x2()), num(field.at(i1, i2))])?;
        }
    }
    csv.finish()
}

/// Parses a schema-tagged CSV: returns the schema comment, header and rows.
pub fn read_csv(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let schema = first
        .strip_prefix("# ")
        .ok_or_else(|| HarnessError::Runtime(format!("{}: missing schema comment", path.display())))?
        .to_string();
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok((schema, header, rows))
}
