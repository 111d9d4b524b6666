//! Seeded discrete-event execution of a [`ProgramModel`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::program::{ProgramModel, Stmt, Var};
use super::{GroundTruth, Scenario};
use crate::trace::{stamp_lamport, BranchId, EventKind, EventRecord, FirstMsgMap, MethodId, ProcId, ProcessTrace, StmtId};

const MAX_PATHS: usize = 4;
const MAX_ROUNDS: u32 = 64;

/// Output of one simulated run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simulation {
    pub traces: Vec<ProcessTrace>,
    pub first_msgs: FirstMsgMap,
    pub truth: GroundTruth,
}

#[derive(Clone, Debug, Default)]
struct Value {
    /// Methods whose computation contributed, across processes.
    labels: BTreeSet<usize>,
    /// Same, but only since the value last arrived in this process.
    local: BTreeSet<usize>,
    /// Statement paths from sources.
    paths: Vec<Vec<StmtId>>,
}

struct Frame {
    method: usize,
    pc: usize,
    locals: Vec<Value>,
    params: Vec<Value>,
}

struct Proc {
    stack: Vec<Frame>,
    globals: Vec<Value>,
    events: Vec<EventRecord>,
    rounds: u32,
    done: bool,
}

struct Msg {
    id: u64,
    value: Value,
}

struct Run<'a> {
    model: &'a ProgramModel,
    /// Flat method index of `(process, method)`.
    offsets: Vec<usize>,
    ids: Vec<MethodId>,
    stmt_proc: BTreeMap<StmtId, ProcId>,
    procs: Vec<Proc>,
    channels: BTreeMap<(ProcId, ProcId), VecDeque<Msg>>,
    next_msg: u64,
    total: u64,
    truth: GroundTruth,
    rng: ChaCha8Rng,
}

fn extend_path(p: &[StmtId], s: StmtId) -> Vec<StmtId> {
    match p.iter().position(|x| *x == s) {
        Some(i) => p[..=i].to_vec(),
        None => p.iter().copied().chain([s]).collect(),
    }
}

impl Run<'_> {
    fn flat(&self, p: ProcId, m: usize) -> usize {
        self.offsets[p as usize] + m
    }

    fn emit(&mut self, p: ProcId, kind: EventKind, method: usize) -> &mut EventRecord {
        let id = self.ids[self.flat(p, method)].clone();
        let events = &mut self.procs[p as usize].events;
        let seq = events.len() as u64 + 1;
        events.push(EventRecord::new(kind, id, seq));
        self.total += 1;
        events.last_mut().expect("just pushed")
    }

    fn read(&self, p: ProcId, v: Var) -> Value {
        let proc = &self.procs[p as usize];
        let frame = proc.stack.last().expect("active frame");
        match v {
            Var::Local(i) => frame.locals[i as usize].clone(),
            Var::Param(i) => frame.params.get(i as usize).cloned().unwrap_or_default(),
            Var::Global(i) => proc.globals[i as usize].clone(),
        }
    }

    fn write(&mut self, p: ProcId, v: Var, value: Value) {
        let proc = &mut self.procs[p as usize];
        match v {
            Var::Local(i) => proc.stack.last_mut().expect("active frame").locals[i as usize] = value,
            Var::Global(i) => proc.globals[i as usize] = value,
            Var::Param(_) => unreachable!("parameters are never redefined"),
        }
    }

    /// Records the uses of `inputs` by `method` at `stmt` and returns the derived value.
    fn derive(&mut self, inputs: &[Value], method: usize, stmt: StmtId) -> Value {
        let mut out = Value::default();
        for v in inputs {
            out.labels.extend(&v.labels);
            out.local.extend(&v.local);
            out.paths.extend(v.paths.iter().map(|p| extend_path(p, stmt)));
        }
        for l in out.labels.iter().filter(|l| **l != method) {
            self.truth.dyn_dep.insert((self.ids[*l].clone(), self.ids[method].clone()));
        }
        for l in out.local.iter().filter(|l| **l != method) {
            self.truth.local_dep.insert((self.ids[*l].clone(), self.ids[method].clone()));
        }
        out.labels.insert(method);
        out.local.insert(method);
        out.paths.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out.paths.dedup();
        out.paths.truncate(MAX_PATHS);
        out
    }

    fn derive_uses(&mut self, p: ProcId, uses: &[Var], method: usize, stmt: StmtId) -> Value {
        let inputs: Vec<Value> = uses.iter().map(|v| self.read(p, *v)).collect();
        self.derive(&inputs, method, stmt)
    }

    /// Source→sink paths are kept when every intermediate process is visited
    /// once and differs from both endpoint processes.
    fn representable(&self, path: &[StmtId]) -> bool {
        let mut procs: Vec<ProcId> = path.iter().map(|s| self.stmt_proc[s]).collect();
        procs.dedup();
        if procs.len() <= 2 {
            return true;
        }
        let (first, last) = (procs[0], procs[procs.len() - 1]);
        let middle = &procs[1..procs.len() - 1];
        let distinct: BTreeSet<_> = middle.iter().collect();
        distinct.len() == middle.len() && !middle.contains(&first) && !middle.contains(&last)
    }

    fn at_blocking_recv(&self, p: ProcId) -> Option<ProcId> {
        let proc = &self.procs[p as usize];
        let frame = proc.stack.last()?;
        let m = &self.model.process(p).methods[frame.method];
        match m.stmts[frame.pc] {
            Stmt::Recv { from, .. } if self.channels.get(&(from, p)).is_none_or(|q| q.is_empty()) => Some(from),
            _ => None,
        }
    }

    fn start_round(&mut self, p: ProcId, length: u64) {
        let proc = &mut self.procs[p as usize];
        if proc.rounds > 0 && (self.total >= length || proc.rounds >= MAX_ROUNDS) {
            proc.done = true;
            return;
        }
        proc.rounds += 1;
        proc.stack.push(Frame {
            method: 0,
            pc: 0,
            locals: vec![Value::default(); 3],
            params: Vec::new(),
        });
        self.emit(p, EventKind::Entry, 0);
    }

    fn step(&mut self, p: ProcId, timeout: bool) {
        let model = self.model;
        let (mi, pc) = {
            let f = self.procs[p as usize].stack.last().expect("active frame");
            (f.method, f.pc)
        };
        let method = &model.process(p).methods[mi];
        let sid = method.stmt_id(pc);
        let flat = self.flat(p, mi);
        let stmt = &method.stmts[pc];
        self.emit(p, EventKind::StmtCover, mi).stmt = Some(sid);
        let mut next = pc + 1;
        match stmt {
            Stmt::Assign { def, uses } => {
                let v = self.derive_uses(p, uses, flat, sid);
                self.write(p, *def, v);
            }
            Stmt::Source { def } => {
                let v = Value {
                    labels: [flat].into(),
                    local: [flat].into(),
                    paths: vec![vec![sid]],
                };
                self.write(p, *def, v);
            }
            Stmt::Sink { uses } => {
                let v = self.derive_uses(p, uses, flat, sid);
                for path in v.paths {
                    if self.representable(&path) {
                        self.truth.dyn_paths.insert(path);
                    }
                }
            }
            Stmt::Branch { uses, skip } => {
                self.derive_uses(p, uses, flat, sid);
                let taken = self.rng.gen_bool(0.6);
                self.emit(p, EventKind::Branch, mi).branch = Some(BranchId { stmt: sid, taken });
                if !taken {
                    next += *skip as usize;
                }
            }
            Stmt::Call { callee, args, .. } => {
                let params = args.iter().map(|a| self.derive_uses(p, &[*a], flat, sid)).collect();
                self.procs[p as usize].stack.push(Frame {
                    method: *callee,
                    pc: 0,
                    locals: vec![Value::default(); 3],
                    params,
                });
                self.emit(p, EventKind::Entry, *callee);
                return;
            }
            Stmt::Return { uses } => {
                let v = self.derive_uses(p, uses, flat, sid);
                let proc = &mut self.procs[p as usize];
                proc.stack.pop();
                let Some(caller) = proc.stack.last() else { return };
                let (ci, cpc) = (caller.method, caller.pc);
                let cm = &model.process(p).methods[ci];
                if let Stmt::Call { ret: Some(ret), .. } = cm.stmts[cpc] {
                    let back = self.derive(&[v], self.flat(p, ci), cm.stmt_id(cpc));
                    self.write(p, ret, back);
                }
                self.emit(p, EventKind::ReturnedInto, ci);
                self.procs[p as usize].stack.last_mut().expect("caller").pc += 1;
                return;
            }
            Stmt::Send { uses, to } => {
                let value = self.derive_uses(p, uses, flat, sid);
                let id = self.next_msg;
                self.next_msg += 1;
                self.channels.entry((p, *to)).or_default().push_back(Msg { id, value });
                let e = self.emit(p, EventKind::Send, mi);
                (e.msg_id, e.peer, e.stmt) = (Some(id), Some(*to), Some(sid));
                self.emit(p, EventKind::ReturnedInto, mi);
            }
            Stmt::Recv { def, from } => {
                let msg = if timeout { None } else { self.channels.get_mut(&(*from, p)).and_then(|q| q.pop_front()) };
                let v = match msg {
                    Some(mut msg) => {
                        let e = self.emit(p, EventKind::Recv, mi);
                        (e.msg_id, e.peer, e.stmt) = (Some(msg.id), Some(*from), Some(sid));
                        msg.value.local.clear();
                        self.derive(&[msg.value], flat, sid)
                    }
                    None => Value::default(),
                };
                self.write(p, *def, v);
                self.emit(p, EventKind::ReturnedInto, mi);
            }
        }
        self.procs[p as usize].stack.last_mut().expect("active frame").pc = next;
    }
}

/// Runs `model` to completion under the scenario's seeded scheduler.
///
/// Receives block; when every unfinished process is blocked, the lowest
/// numbered one times out and continues with an empty value.
pub fn simulate(model: &ProgramModel, scenario: &Scenario) -> Simulation {
    let mut offsets = Vec::new();
    let mut ids = Vec::new();
    let mut stmt_proc = BTreeMap::new();
    for p in &model.processes {
        offsets.push(ids.len());
        for m in &p.methods {
            ids.push(m.id.clone());
            for (s, _) in m.stmt_ids() {
                stmt_proc.insert(s, p.process);
            }
        }
    }
    let mut run = Run {
        model,
        offsets,
        ids,
        stmt_proc,
        procs: model
            .processes
            .iter()
            .map(|p| Proc {
                stack: Vec::new(),
                globals: vec![Value::default(); p.globals as usize],
                events: Vec::new(),
                rounds: 0,
                done: false,
            })
            .collect(),
        channels: BTreeMap::new(),
        next_msg: 1,
        total: 0,
        truth: GroundTruth::default(),
        rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x5EED_0F_5C4E_D01E),
    };
    let n = model.processes.len() as ProcId;
    loop {
        for p in 0..n {
            if !run.procs[p as usize].done && run.procs[p as usize].stack.is_empty() {
                run.start_round(p, scenario.length);
            }
        }
        let live: Vec<ProcId> = (0..n).filter(|p| !run.procs[*p as usize].done).collect();
        if live.is_empty() {
            break;
        }
        let ready: Vec<ProcId> = live.iter().copied().filter(|p| run.at_blocking_recv(*p).is_none()).collect();
        if ready.is_empty() {
            run.step(live[0], true);
        } else {
            let p = ready[run.rng.gen_range(0..ready.len())];
            run.step(p, false);
        }
    }
    let raw: Vec<ProcessTrace> = run
        .procs
        .into_iter()
        .enumerate()
        .map(|(p, s)| ProcessTrace::new(p as ProcId, s.events))
        .collect();
    let (traces, first_msgs) = stamp_lamport(&raw).expect("simulated traces are well formed");
    Simulation { traces, first_msgs, truth: run.truth }
}

#[cfg(test)]
mod tests {
    use super::super::{generate_program, Topology};
    use super::*;
    use crate::trace::{all_spans, CausalIndex, EventRef};

    fn scenarios() -> Vec<Scenario> {
        let mut v = Vec::new();
        for seed in 0..40 {
            for topology in [Topology::ClientServer, Topology::PeerToPeer, Topology::NTier(3)] {
                v.push(Scenario { topology, seed, length: 150 });
            }
        }
        v
    }

    fn strip_messages(model: &mut ProgramModel) {
        for m in model.processes.iter_mut().flat_map(|p| &mut p.methods) {
            for s in &mut m.stmts {
                *s = match s.clone() {
                    Stmt::Send { uses, .. } => Stmt::Sink { uses },
                    Stmt::Recv { def, .. } => Stmt::Assign { def, uses: vec![] },
                    other => other,
                };
            }
        }
    }

    #[test]
    fn replay_is_identical() {
        let s = Scenario { topology: Topology::ClientServer, seed: 3, length: 200 };
        let m = generate_program(&s);
        assert_eq!(simulate(&m, &s), simulate(&m, &s));
    }

    #[test]
    fn isolated_processes_have_only_local_pairs() {
        let s = Scenario { topology: Topology::ClientServer, seed: 11, length: 200 };
        let mut m = generate_program(&s);
        strip_messages(&mut m);
        let sim = simulate(&m, &s);
        assert!(sim.first_msgs.is_empty());
        assert!(sim.truth.dyn_dep.iter().all(|(a, b)| a.process == b.process));
        assert_eq!(sim.truth.dyn_dep, sim.truth.local_dep);
        m.processes.truncate(1);
        let sim = simulate(&m, &s);
        assert_eq!(sim.traces.len(), 1);
        assert!(sim.truth.dyn_dep.iter().all(|(a, b)| a.process == 0 && b.process == 0));
    }

    #[test]
    fn events_respect_the_length_target() {
        for s in scenarios().into_iter().take(30) {
            let sim = simulate(&generate_program(&s), &s);
            let total: usize = sim.traces.iter().map(|t| t.events.len()).sum();
            assert!(total as u64 >= s.length.min(20), "{s:?} produced {total} events");
            for t in &sim.traces {
                assert!(t.events.windows(2).all(|w| w[0].seq < w[1].seq && w[0].ts < w[1].ts));
            }
        }
    }

    #[test]
    fn dependencies_follow_happens_before() {
        for s in scenarios() {
            let sim = simulate(&generate_program(&s), &s);
            let index = CausalIndex::new(&sim.traces);
            let spans = all_spans(&sim.traces);
            let last_event = |m: &MethodId| {
                let t = &sim.traces[m.process as usize];
                let e = t.method_events().filter(|e| &e.method == m).last().unwrap();
                EventRef::from(e)
            };
            for (a, b) in &sim.truth.dyn_dep {
                let first = EventRef { process: a.process, seq: spans[a].first_seq };
                let last = last_event(b);
                assert!(first == last || index.happens_before(first, last), "{s:?}: {a} -> {b}");
            }
            assert!(sim.truth.local_dep.is_subset(&sim.truth.dyn_dep));
        }
    }

    #[test]
    fn truth_paths_are_covered_and_well_formed() {
        let mut paths = 0;
        let mut remote = 0;
        for s in scenarios() {
            let m = generate_program(&s);
            let sim = simulate(&m, &s);
            let covered: BTreeSet<StmtId> = sim.traces.iter().flat_map(|t| t.covered_stmts()).collect();
            let sources = m.sources();
            let sinks = m.sinks();
            for p in &sim.truth.dyn_paths {
                paths += 1;
                assert!(p.iter().all(|s| covered.contains(s)));
                assert!(sources.contains(&p[0]) && sinks.contains(p.last().unwrap()));
                let distinct: BTreeSet<_> = p.iter().collect();
                assert_eq!(distinct.len(), p.len());
                let procs: BTreeSet<_> = p.iter().map(|s| m.stmts().find(|x| x.1 == *s).unwrap().0.id.process).collect();
                remote += (procs.len() > 1) as usize;
            }
        }
        assert!(paths > 100 && remote > 20, "only {paths} paths, {remote} interprocess");
    }
}
