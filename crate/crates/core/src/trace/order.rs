use std::collections::{BTreeMap, HashMap};

use super::{EventKind, EventRecord, ProcId, ProcessTrace};
use crate::{Error, Result};

/// Position-independent handle on one event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRef {
    pub process: ProcId,
    pub seq: u64,
}

impl From<&EventRecord> for EventRef {
    fn from(e: &EventRecord) -> Self {
        EventRef {
            process: e.process(),
            seq: e.seq,
        }
    }
}

/// All events of an execution in one sequence ordered by `(ts, process, seq)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GlobalOrder {
    pub merged: Vec<EventRecord>,
    index: HashMap<EventRef, usize>,
}

impl GlobalOrder {
    pub fn position(&self, e: EventRef) -> Option<usize> {
        self.index.get(&e).copied()
    }

    pub fn len(&self) -> usize {
        self.merged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    /// Events of one process, in order.
    pub fn of_process(&self, process: ProcId) -> impl Iterator<Item = &EventRecord> + '_ {
        self.merged.iter().filter(move |e| e.process() == process)
    }
}

/// Linearizes stamped traces. Concurrent events are ordered by process id, then
/// sequence number, which extends the happens-before order deterministically.
pub fn merge_global(traces: &[ProcessTrace]) -> Result<GlobalOrder> {
    let mut merged = Vec::with_capacity(traces.iter().map(|t| t.events.len()).sum());
    for t in traces {
        for e in &t.events {
            if !e.is_stamped() {
                return Err(Error::Unstamped {
                    process: t.process,
                    seq: e.seq,
                });
            }
            merged.push(e.clone());
        }
    }
    merged.sort_by_key(|e| (e.ts, e.process(), e.seq));
    let index = merged
        .iter()
        .enumerate()
        .map(|(i, e)| (EventRef::from(e), i))
        .collect();
    Ok(GlobalOrder { merged, index })
}

/// Answers happens-before queries over a fixed set of traces.
///
/// For a starting event it computes the causal frontier: for every process,
/// the earliest event reachable through program order and send→recv edges.
#[derive(Clone, Debug)]
pub struct CausalIndex {
    procs: Vec<ProcId>,
    slot: HashMap<ProcId, usize>,
    seq_pos: Vec<HashMap<u64, usize>>,
    /// Per process: (send index, receiving process slot, recv index), by send index.
    edges: Vec<Vec<(usize, usize, usize)>>,
}

impl CausalIndex {
    pub fn new(traces: &[ProcessTrace]) -> Self {
        let procs: Vec<ProcId> = traces.iter().map(|t| t.process).collect();
        let slot: HashMap<ProcId, usize> = procs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let seq_pos = traces
            .iter()
            .map(|t| t.events.iter().enumerate().map(|(i, e)| (e.seq, i)).collect())
            .collect();
        let mut recv_at: HashMap<u64, (usize, usize)> = HashMap::new();
        for (s, t) in traces.iter().enumerate() {
            for (i, e) in t.events.iter().enumerate() {
                if e.kind == EventKind::Recv {
                    if let Some(id) = e.msg_id {
                        recv_at.insert(id, (s, i));
                    }
                }
            }
        }
        let edges = traces
            .iter()
            .map(|t| {
                t.events
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.kind == EventKind::Send)
                    .filter_map(|(i, e)| {
                        let &(rs, ri) = recv_at.get(&e.msg_id?)?;
                        Some((i, rs, ri))
                    })
                    .collect()
            })
            .collect();
        CausalIndex {
            procs,
            slot,
            seq_pos,
            edges,
        }
    }

    fn locate(&self, e: EventRef) -> Option<(usize, usize)> {
        let s = *self.slot.get(&e.process)?;
        let i = *self.seq_pos[s].get(&e.seq)?;
        Some((s, i))
    }

    /// For each process, the index of the earliest event that `from` happens
    /// before (strictly), or `None` if no event of that process is reachable.
    pub fn frontier(&self, from: EventRef) -> BTreeMap<ProcId, Option<usize>> {
        let mut reach = vec![usize::MAX; self.procs.len()];
        if let Some((s, i)) = self.locate(from) {
            // sends at `from` itself count; its own successors start at i + 1
            let mut threshold = vec![usize::MAX; self.procs.len()];
            threshold[s] = i;
            reach[s] = i + 1;
            let mut work = vec![s];
            while let Some(p) = work.pop() {
                let start = threshold[p].min(reach[p]);
                for &(si, rs, ri) in &self.edges[p] {
                    if si >= start && ri < reach[rs] {
                        reach[rs] = ri;
                        threshold[rs] = threshold[rs].min(ri);
                        work.push(rs);
                    }
                }
            }
        }
        self.procs
            .iter()
            .zip(reach)
            .map(|(p, r)| (*p, (r != usize::MAX).then_some(r)))
            .collect()
    }

    pub fn happens_before(&self, a: EventRef, b: EventRef) -> bool {
        let Some((bs, bi)) = self.locate(b) else { return false };
        if self.locate(a).is_none() {
            return false;
        }
        self.frontier(a)
            .get(&self.procs[bs])
            .copied()
            .flatten()
            .is_some_and(|r| r <= bi)
    }
}

/// True iff `e1` precedes `e2` in the transitive closure of program order and
/// send→recv edges.
pub fn happens_before(e1: &EventRecord, e2: &EventRecord, traces: &[ProcessTrace]) -> bool {
    CausalIndex::new(traces).happens_before(e1.into(), e2.into())
}
