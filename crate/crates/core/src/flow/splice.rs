//! Joining per-process path segments at message send/receive callsites.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use crate::graph::{SourceSinkConfig, StaticDepGraph};
use crate::trace::{EventKind, EventRecord, GlobalOrder, ProcId, StmtId};

/// Which events may sit between an outlet's send and an inlet's receive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SpliceRule {
    /// Only sends at the outlet toward the inlet's process and receives at
    /// the inlet from the outlet's process are considered.
    #[default]
    Peer,
    /// The receive must immediately follow the send in the full sequence.
    Strict,
}

/// Message callsites of a graph with the timestamps of their events.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InletOutletIndex {
    pub inlets: BTreeMap<StmtId, Vec<u64>>,
    pub outlets: BTreeMap<StmtId, Vec<u64>>,
}

impl InletOutletIndex {
    pub fn new(graph: &StaticDepGraph, cfg: &SourceSinkConfig, es: &GlobalOrder) -> Self {
        let mut idx = InletOutletIndex::default();
        for s in cfg.recv_sites(graph) {
            idx.inlets.insert(s, Vec::new());
        }
        for s in cfg.send_sites(graph) {
            idx.outlets.insert(s, Vec::new());
        }
        for e in &es.merged {
            let (Some(stmt), true) = (e.stmt, e.kind.is_message()) else { continue };
            let side = if e.kind == EventKind::Recv { &mut idx.inlets } else { &mut idx.outlets };
            if let Some(ts) = side.get_mut(&stmt) {
                ts.push(e.ts);
            }
        }
        idx
    }

    pub fn inlets_of(&self, graph: &StaticDepGraph, p: ProcId) -> BTreeSet<StmtId> {
        self.inlets.keys().copied().filter(|s| graph.process_of(*s) == Some(p)).collect()
    }

    pub fn outlets_of(&self, graph: &StaticDepGraph, p: ProcId) -> BTreeSet<StmtId> {
        self.outlets.keys().copied().filter(|s| graph.process_of(*s) == Some(p)).collect()
    }

    pub fn all_inlets(&self) -> BTreeSet<StmtId> {
        self.inlets.keys().copied().collect()
    }

    pub fn all_outlets(&self) -> BTreeSet<StmtId> {
        self.outlets.keys().copied().collect()
    }
}

/// Whether a send at outlet `o` (in `po`) is directly followed by a receive
/// at inlet `i` (in `pi`) with no other event in between under `rule`.
pub fn junction_holds(es: &GlobalOrder, o: StmtId, po: ProcId, i: StmtId, pi: ProcId, rule: SpliceRule) -> bool {
    let is_send = |e: &EventRecord| e.kind == EventKind::Send && e.stmt == Some(o) && e.process() == po;
    let is_recv = |e: &EventRecord| e.kind == EventKind::Recv && e.stmt == Some(i) && e.process() == pi;
    match rule {
        SpliceRule::Strict => es.merged.windows(2).any(|w| is_send(&w[0]) && is_recv(&w[1])),
        SpliceRule::Peer => {
            let mut prev_send = false;
            for e in &es.merged {
                if is_send(e) && e.peer == Some(pi) {
                    prev_send = true;
                } else if is_recv(e) && e.peer == Some(po) {
                    if prev_send {
                        return true;
                    }
                    prev_send = false;
                }
            }
            false
        }
    }
}

pub(crate) struct Junctions<'a> {
    es: &'a GlobalOrder,
    rule: SpliceRule,
    cache: Mutex<BTreeMap<(StmtId, StmtId), bool>>,
}

impl<'a> Junctions<'a> {
    pub(crate) fn new(es: &'a GlobalOrder, rule: SpliceRule) -> Self {
        Junctions { es, rule, cache: Mutex::new(BTreeMap::new()) }
    }

    pub(crate) fn holds(&self, g: &StaticDepGraph, o: StmtId, i: StmtId) -> bool {
        if let Some(v) = self.cache.lock().expect("junction cache").get(&(o, i)) {
            return *v;
        }
        let v = match (g.process_of(o), g.process_of(i)) {
            (Some(po), Some(pi)) => junction_holds(self.es, o, po, i, pi, self.rule),
            _ => false,
        };
        self.cache.lock().expect("junction cache").insert((o, i), v);
        v
    }
}

/// Concatenations `SOFPS · REFPS* · SIFPS` whose junctions hold. Remote
/// segments come from distinct processes other than the source's and the
/// sink's. Returns the spliced paths and whether `max_paths` cut them short.
pub fn splice_segments(
    g: &StaticDepGraph,
    sofps: &[Vec<StmtId>],
    refps: &BTreeMap<ProcId, Vec<Vec<StmtId>>>,
    sifps: &[Vec<StmtId>],
    junction: &dyn Fn(StmtId, StmtId) -> bool,
    max_paths: usize,
) -> (Vec<Vec<StmtId>>, bool) {
    struct Search<'a> {
        g: &'a StaticDepGraph,
        refps: &'a BTreeMap<ProcId, Vec<Vec<StmtId>>>,
        sifps: &'a [Vec<StmtId>],
        junction: &'a dyn Fn(StmtId, StmtId) -> bool,
        max_paths: usize,
        used: BTreeSet<ProcId>,
        out: Vec<Vec<StmtId>>,
        truncated: bool,
    }
    impl Search<'_> {
        fn extend(&mut self, prefix: &mut Vec<StmtId>) {
            let o = *prefix.last().expect("segments are non-empty");
            for tail in self.sifps {
                if (self.junction)(o, tail[0]) {
                    if self.out.len() >= self.max_paths {
                        self.truncated = true;
                        return;
                    }
                    let mut p = prefix.clone();
                    p.extend(tail);
                    self.out.push(p);
                }
            }
            for (p, segs) in self.refps {
                if self.used.contains(p) {
                    continue;
                }
                for seg in segs {
                    if !(self.junction)(o, seg[0]) || self.g.process_of(seg[0]) != Some(*p) {
                        continue;
                    }
                    self.used.insert(*p);
                    let len = prefix.len();
                    prefix.extend(seg);
                    self.extend(prefix);
                    prefix.truncate(len);
                    self.used.remove(p);
                    if self.truncated {
                        return;
                    }
                }
            }
        }
    }
    let mut search = Search {
        g,
        refps,
        sifps,
        junction,
        max_paths,
        used: BTreeSet::new(),
        out: Vec::new(),
        truncated: false,
    };
    for head in sofps {
        let mut prefix = head.clone();
        search.extend(&mut prefix);
        if search.truncated {
            break;
        }
    }
    (search.out, search.truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::StmtNode;
    use crate::trace::{merge_global, stamp_lamport, EventRecord, MethodId, ProcessTrace};

    fn graph(nodes: &[(u32, u32)]) -> StaticDepGraph {
        let mut g = StaticDepGraph::default();
        for (s, p) in nodes {
            g.add_node(StmtId(*s), StmtNode { method: MethodId::new(*p, "C", "m"), api: None, guard: None });
        }
        g
    }

    fn msg(p: ProcId, seq: u64, kind: EventKind, stmt: u32, id: u64, peer: ProcId) -> EventRecord {
        let mut e = EventRecord::new(kind, MethodId::new(p, "C", "m"), seq).with_msg(id, peer);
        e.stmt = Some(StmtId(stmt));
        e
    }

    fn es(traces: Vec<ProcessTrace>) -> GlobalOrder {
        merge_global(&stamp_lamport(&traces).unwrap().0).unwrap()
    }

    #[test]
    fn peer_rule_ignores_unrelated_traffic() {
        // p0 sends at 2 to p1 (msg 1) and at 3 to p2 (msg 2); p1 receives at 10
        let order = es(vec![
            ProcessTrace::new(0, vec![msg(0, 1, EventKind::Send, 2, 1, 1), msg(0, 2, EventKind::Send, 3, 2, 2)]),
            ProcessTrace::new(1, vec![msg(1, 1, EventKind::Recv, 10, 1, 0)]),
            ProcessTrace::new(2, vec![msg(2, 1, EventKind::Recv, 20, 2, 0)]),
        ]);
        assert!(junction_holds(&order, StmtId(2), 0, StmtId(10), 1, SpliceRule::Peer));
        assert!(!junction_holds(&order, StmtId(2), 0, StmtId(10), 1, SpliceRule::Strict));
        assert!(junction_holds(&order, StmtId(3), 0, StmtId(20), 2, SpliceRule::Peer));
        assert!(!junction_holds(&order, StmtId(3), 0, StmtId(20), 2, SpliceRule::Strict));
        // adjacent in the full order, but the message went elsewhere
        assert!(junction_holds(&order, StmtId(3), 0, StmtId(10), 1, SpliceRule::Strict));
        assert!(!junction_holds(&order, StmtId(3), 0, StmtId(10), 1, SpliceRule::Peer));
    }

    #[test]
    fn two_process_fixture_splices_once() {
        let g = graph(&[(1, 0), (2, 0), (10, 1), (11, 1)]);
        let sofps = vec![vec![StmtId(1), StmtId(2)]];
        let sifps = vec![vec![StmtId(10), StmtId(11)]];
        let j = |o: StmtId, i: StmtId| o == StmtId(2) && i == StmtId(10);
        let (paths, truncated) = splice_segments(&g, &sofps, &BTreeMap::new(), &sifps, &j, 100);
        assert_eq!(paths, vec![vec![StmtId(1), StmtId(2), StmtId(10), StmtId(11)]]);
        assert!(!truncated);
    }

    #[test]
    fn relay_uses_middle_process_once() {
        let g = graph(&[(1, 0), (10, 1), (11, 1), (20, 2), (21, 2)]);
        let sofps = vec![vec![StmtId(1)]];
        let refps = BTreeMap::from([(1, vec![vec![StmtId(10), StmtId(11)]])]);
        let sifps = vec![vec![StmtId(20), StmtId(21)]];
        let j = |o: StmtId, i: StmtId| matches!((o.0, i.0), (1, 10) | (11, 20));
        let (paths, _) = splice_segments(&g, &sofps, &refps, &sifps, &j, 100);
        let ids: Vec<Vec<u32>> = paths.iter().map(|p| p.iter().map(|s| s.0).collect()).collect();
        assert_eq!(ids, [vec![1, 10, 11, 20, 21]]);
    }
}
