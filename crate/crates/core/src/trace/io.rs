//! Line-delimited trace files and trace bundle directories.
//!
//! One JSON object per line with fields `proc`, `seq`, `kind`, `class`,
//! `method`, and optionally `ts`, `msg_id`, `peer`, `branch_id`, `stmt_id`.
//! Unknown fields are ignored. A bundle is a directory holding one trace file
//! per process and `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EventKind, EventRecord, MethodId, ProcId, ProcessTrace, StmtId};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Line {
    proc: ProcId,
    seq: u64,
    kind: EventKind,
    class: String,
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    msg_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    peer: Option<ProcId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branch_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stmt_id: Option<u32>,
}

impl From<&EventRecord> for Line {
    fn from(e: &EventRecord) -> Self {
        Line {
            proc: e.method.process,
            seq: e.seq,
            kind: e.kind,
            class: e.method.class_name.clone(),
            method: e.method.method_name.clone(),
            ts: e.is_stamped().then_some(e.ts),
            msg_id: e.msg_id,
            peer: e.peer,
            branch_id: e.branch.map(|b| b.to_string()),
            stmt_id: e.stmt.map(|s| s.0),
        }
    }
}

pub fn write_trace_file(path: &Path, trace: &ProcessTrace) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in &trace.events {
        let line = serde_json::to_string(&Line::from(e)).expect("trace lines serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_file(path: &Path) -> Result<ProcessTrace> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut process = None;
    let mut events = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        if *process.get_or_insert(rec.proc) != rec.proc {
            return Err(Error::parse(path, n + 1, "events from more than one process"));
        }
        let branch = rec
            .branch_id
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(|e: String| Error::parse(path, n + 1, e))?;
        events.push(EventRecord {
            kind: rec.kind,
            method: MethodId::new(rec.proc, rec.class, rec.method),
            ts: rec.ts.unwrap_or(0),
            seq: rec.seq,
            msg_id: rec.msg_id,
            peer: rec.peer,
            branch,
            stmt: rec.stmt_id.map(StmtId),
        });
    }
    let process = process.ok_or_else(|| Error::parse(path, 0, "empty trace file"))?;
    Ok(ProcessTrace { process, events })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    /// Free-form description of the scenario that produced the traces.
    #[serde(default)]
    pub scenario: serde_json::Value,
    pub processes: Vec<ProcId>,
    /// Trace file name per process, relative to the bundle directory.
    pub files: BTreeMap<ProcId, String>,
}

pub fn write_bundle(dir: &Path, traces: &[ProcessTrace], scenario: serde_json::Value) -> Result<BundleManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    for t in traces {
        let name = format!("proc-{}.trace", t.process);
        write_trace_file(&dir.join(&name), t)?;
        files.insert(t.process, name);
    }
    let manifest = BundleManifest {
        scenario,
        processes: traces.iter().map(|t| t.process).collect(),
        files,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_bundle(dir: &Path) -> Result<(Vec<ProcessTrace>, BundleManifest)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?;
    let mut traces = Vec::new();
    for p in &manifest.processes {
        let name = manifest
            .files
            .get(p)
            .ok_or_else(|| Error::parse(&path, 0, format!("no trace file for process {p}")))?;
        let trace = read_trace_file(&dir.join(name))?;
        if trace.process != *p {
            return Err(Error::parse(dir.join(name), 1, format!("expected process {p}")));
        }
        traces.push(trace);
    }
    Ok((traces, manifest))
}
