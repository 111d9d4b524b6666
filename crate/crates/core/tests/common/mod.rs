//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use distflow::netsim::{generate_program, simulate, ProgramModel, Scenario, Simulation, Topology};
use distflow::trace::{EventKind, MethodId, ProcessTrace, StmtId};

pub struct Run {
    pub scenario: Scenario,
    pub model: ProgramModel,
    pub sim: Simulation,
}

pub fn run(topology: Topology, seed: u64, length: u64) -> Run {
    let scenario = Scenario { topology, seed, length };
    let model = generate_program(&scenario);
    let sim = simulate(&model, &scenario);
    Run { scenario, model, sim }
}

/// Topologies cycled by seed, all with at most five processes.
pub fn topology_for(seed: u64) -> Topology {
    match seed % 4 {
        0 => Topology::ClientServer,
        1 => Topology::PeerToPeer,
        2 => Topology::NTier(3),
        _ => Topology::NTier(5),
    }
}

/// `(first entry ts, last entry/returned-into ts)` per executed method.
pub fn spans(traces: &[ProcessTrace]) -> BTreeMap<MethodId, (u64, u64)> {
    let mut out: BTreeMap<MethodId, (u64, u64)> = BTreeMap::new();
    for e in traces.iter().flat_map(|t| &t.events) {
        match e.kind {
            EventKind::Entry => {
                let s = out.entry(e.method.clone()).or_insert((e.ts, e.ts));
                s.1 = s.1.max(e.ts);
            }
            EventKind::ReturnedInto => {
                if let Some(s) = out.get_mut(&e.method) {
                    s.1 = s.1.max(e.ts);
                }
            }
            _ => {}
        }
    }
    out
}

/// Events reachable from `(process index, event index)` through program
/// order and message edges, found by breadth-first search.
pub fn reachable_from(traces: &[ProcessTrace], start: (usize, usize)) -> BTreeSet<(usize, usize)> {
    let mut recv_of = BTreeMap::new();
    for (p, t) in traces.iter().enumerate() {
        for (i, e) in t.events.iter().enumerate() {
            if e.kind == EventKind::Recv {
                recv_of.insert(e.msg_id.unwrap(), (p, i));
            }
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((p, i)) = queue.pop_front() {
        let e = &traces[p].events[i];
        let mut next = Vec::new();
        if i + 1 < traces[p].events.len() {
            next.push((p, i + 1));
        }
        if e.kind == EventKind::Send {
            next.extend(recv_of.get(&e.msg_id.unwrap()).copied());
        }
        for n in next {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Dependence set straight from the definition: local methods whose last
/// event is not before `fe(q)`, and remote methods of a process that
/// receives, no later than their last event, a message causally after `q`'s
/// first entry.
pub fn brute_force_ds(q: &MethodId, traces: &[ProcessTrace]) -> BTreeSet<MethodId> {
    let sp = spans(traces);
    let Some(&(fe_q, _)) = sp.get(q) else { return BTreeSet::new() };
    let pi = traces.iter().position(|t| t.process == q.process).unwrap();
    let fi = traces[pi]
        .events
        .iter()
        .position(|e| e.kind == EventKind::Entry && e.method == *q)
        .unwrap();
    let reach = reachable_from(traces, (pi, fi));
    sp.iter()
        .filter(|(m, (_, lr))| {
            if m.process == q.process {
                return fe_q <= *lr;
            }
            let pj = traces.iter().position(|t| t.process == m.process).unwrap();
            traces[pj]
                .events
                .iter()
                .enumerate()
                .any(|(i, e)| e.kind == EventKind::Recv && e.ts <= *lr && reach.contains(&(pj, i)))
        })
        .map(|(m, _)| m.clone())
        .collect()
}

pub fn stmt_methods(model: &ProgramModel) -> BTreeMap<StmtId, MethodId> {
    model.stmts().map(|(m, s, _)| (s, m.id.clone())).collect()
}

/// Method sequence of a statement path with repeats collapsed.
pub fn method_chain(path: &[StmtId], owners: &BTreeMap<StmtId, MethodId>) -> Vec<MethodId> {
    let mut out: Vec<MethodId> = Vec::new();
    for s in path {
        let m = &owners[s];
        if out.last() != Some(m) {
            out.push(m.clone());
        }
    }
    out
}

pub fn is_subsequence<T: PartialEq>(needle: &[T], hay: &[T]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}
