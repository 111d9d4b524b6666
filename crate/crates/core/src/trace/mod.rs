//! Event and trace data model, Lamport stamping and global ordering.

mod io;
mod lamport;
mod order;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{read_bundle, read_trace_file, write_bundle, write_trace_file, BundleManifest};
pub use lamport::stamp_lamport;
pub use order::{happens_before, merge_global, CausalIndex, EventRef, GlobalOrder};

pub type ProcId = u32;

/// A method executed by one process. Identical code running in two processes
/// yields two distinct ids that share a [`MethodName`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodId {
    pub process: ProcId,
    pub class_name: String,
    pub method_name: String,
}

impl MethodId {
    pub fn new(process: ProcId, class_name: impl Into<String>, method_name: impl Into<String>) -> Self {
        MethodId {
            process,
            class_name: class_name.into(),
            method_name: method_name.into(),
        }
    }

    pub fn name(&self) -> MethodName {
        MethodName {
            class_name: self.class_name.clone(),
            method_name: self.method_name.clone(),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}.{}.{}", self.process, self.class_name, self.method_name)
    }
}

/// Process-independent method identity, used for queries and reuse metrics.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodName {
    pub class_name: String,
    pub method_name: String,
}

impl MethodName {
    pub fn new(class_name: impl Into<String>, method_name: impl Into<String>) -> Self {
        MethodName {
            class_name: class_name.into(),
            method_name: method_name.into(),
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class_name, self.method_name)
    }
}

impl FromStr for MethodName {
    type Err = String;

    /// Accepts `Class: method` (signature may contain spaces) or `Class.method`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((c, m)) = s.split_once(':') {
            let (c, m) = (c.trim(), m.trim());
            if !c.is_empty() && !m.is_empty() {
                return Ok(MethodName::new(c, m));
            }
        } else if let Some((c, m)) = s.rsplit_once('.') {
            if !c.is_empty() && !m.is_empty() {
                return Ok(MethodName::new(c, m));
            }
        }
        Err(format!("expected `Class: method` or `Class.method`, got `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StmtId(pub u32);

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One outcome edge of a branch statement. Method entries are treated as a
/// synthetic always-taken branch and are represented by `entry` events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId {
    pub stmt: StmtId,
    pub taken: bool,
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.stmt, if self.taken { 'T' } else { 'F' })
    }
}

impl FromStr for BranchId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (stmt, edge) = s
            .split_once(':')
            .ok_or_else(|| format!("branch id `{s}` lacks `:T`/`:F`"))?;
        let stmt = stmt
            .parse::<u32>()
            .map_err(|e| format!("branch id `{s}`: {e}"))?;
        let taken = match edge {
            "T" => true,
            "F" => false,
            _ => return Err(format!("branch id `{s}`: edge must be T or F")),
        };
        Ok(BranchId {
            stmt: StmtId(stmt),
            taken,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Entry,
    ReturnedInto,
    Send,
    Recv,
    Branch,
    StmtCover,
}

impl EventKind {
    pub fn is_method_event(self) -> bool {
        matches!(self, EventKind::Entry | EventKind::ReturnedInto)
    }

    pub fn is_message(self) -> bool {
        matches!(self, EventKind::Send | EventKind::Recv)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub kind: EventKind,
    pub method: MethodId,
    /// Lamport timestamp; 0 until stamped.
    pub ts: u64,
    pub seq: u64,
    pub msg_id: Option<u64>,
    pub peer: Option<ProcId>,
    pub branch: Option<BranchId>,
    pub stmt: Option<StmtId>,
}

impl EventRecord {
    pub fn new(kind: EventKind, method: MethodId, seq: u64) -> Self {
        EventRecord {
            kind,
            method,
            ts: 0,
            seq,
            msg_id: None,
            peer: None,
            branch: None,
            stmt: None,
        }
    }

    pub fn process(&self) -> ProcId {
        self.method.process
    }

    pub fn is_stamped(&self) -> bool {
        self.ts >= 1
    }

    pub fn with_msg(mut self, msg_id: u64, peer: ProcId) -> Self {
        self.msg_id = Some(msg_id);
        self.peer = Some(peer);
        self
    }

    pub fn with_stmt(mut self, stmt: StmtId) -> Self {
        self.stmt = Some(stmt);
        self
    }

    pub fn with_branch(mut self, branch: BranchId) -> Self {
        self.stmt = Some(branch.stmt);
        self.branch = Some(branch);
        self
    }
}

/// Timestamp span of a method: its first entry and its last method event.
///
/// `last` is the last returned-into event, or the latest entry when the
/// method never had control returned into it (leaf methods).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MethodSpan {
    pub first: u64,
    pub last: u64,
    /// Sequence number of the first entry event.
    pub first_seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessTrace {
    pub process: ProcId,
    pub events: Vec<EventRecord>,
}

impl ProcessTrace {
    pub fn new(process: ProcId, events: Vec<EventRecord>) -> Self {
        ProcessTrace { process, events }
    }

    pub fn method_events(&self) -> impl Iterator<Item = &EventRecord> + '_ {
        self.events.iter().filter(|e| e.kind.is_method_event())
    }

    /// First-entry / last-event span of every method that entered.
    pub fn spans(&self) -> BTreeMap<MethodId, MethodSpan> {
        let mut spans: BTreeMap<MethodId, MethodSpan> = BTreeMap::new();
        for e in self.method_events() {
            match spans.get_mut(&e.method) {
                Some(span) => span.last = span.last.max(e.ts),
                None if e.kind == EventKind::Entry => {
                    spans.insert(
                        e.method.clone(),
                        MethodSpan {
                            first: e.ts,
                            last: e.ts,
                            first_seq: e.seq,
                        },
                    );
                }
                // returned-into before any entry: the trace started mid-call
                None => {}
            }
        }
        spans
    }

    /// Statements with a `stmt_cover` event.
    pub fn covered_stmts(&self) -> std::collections::BTreeSet<StmtId> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::StmtCover)
            .filter_map(|e| e.stmt)
            .collect()
    }

    /// Keeps message events plus only those other events whose method passes `keep`.
    pub fn filtered(&self, keep: impl Fn(&MethodId) -> bool) -> ProcessTrace {
        ProcessTrace {
            process: self.process,
            events: self
                .events
                .iter()
                .filter(|e| e.kind.is_message() || keep(&e.method))
                .cloned()
                .collect(),
        }
    }

    /// Keeps message events and, per method, only its first entry and its
    /// last method event.
    pub fn first_last_only(&self) -> ProcessTrace {
        let mut last_idx: BTreeMap<&MethodId, usize> = BTreeMap::new();
        let mut first_idx: BTreeMap<&MethodId, usize> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            if e.kind.is_method_event() {
                if e.kind == EventKind::Entry {
                    first_idx.entry(&e.method).or_insert(i);
                }
                last_idx.insert(&e.method, i);
            }
        }
        let keep: std::collections::BTreeSet<usize> =
            first_idx.values().chain(last_idx.values()).copied().collect();
        ProcessTrace {
            process: self.process,
            events: self
                .events
                .iter()
                .enumerate()
                .filter(|(i, e)| e.kind.is_message() || keep.contains(i))
                .map(|(_, e)| e.clone())
                .collect(),
        }
    }
}

/// Spans of all methods across a set of traces.
pub fn all_spans(traces: &[ProcessTrace]) -> BTreeMap<MethodId, MethodSpan> {
    traces.iter().flat_map(|t| t.spans()).collect()
}

pub fn find_trace(traces: &[ProcessTrace], process: ProcId) -> Option<&ProcessTrace> {
    traces.iter().find(|t| t.process == process)
}

/// Lamport timestamp of the first message each process received from each
/// other process, keyed by `(receiver, sender)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FirstMsgMap {
    entries: BTreeMap<(ProcId, ProcId), u64>,
}

impl FirstMsgMap {
    pub fn get(&self, receiver: ProcId, sender: ProcId) -> Option<u64> {
        self.entries.get(&(receiver, sender)).copied()
    }

    pub fn receives_any(&self, receiver: ProcId) -> bool {
        self.entries.keys().any(|(r, _)| *r == receiver)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((ProcId, ProcId), u64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn record(&mut self, receiver: ProcId, sender: ProcId, ts: u64) {
        let slot = self.entries.entry((receiver, sender)).or_insert(ts);
        *slot = (*slot).min(ts);
    }

    /// Rebuilds the map from already stamped traces.
    pub fn from_traces(traces: &[ProcessTrace]) -> Self {
        let mut senders = BTreeMap::new();
        for t in traces {
            for e in &t.events {
                if e.kind == EventKind::Send {
                    if let Some(id) = e.msg_id {
                        senders.insert(id, t.process);
                    }
                }
            }
        }
        let mut map = FirstMsgMap::default();
        for t in traces {
            for e in t.events.iter().filter(|e| e.kind == EventKind::Recv) {
                if let Some(sender) = e.msg_id.and_then(|id| senders.get(&id)) {
                    map.record(t.process, *sender, e.ts);
                }
            }
        }
        map
    }
}
