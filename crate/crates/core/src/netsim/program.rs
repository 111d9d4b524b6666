//! Synthetic program models and their seeded generator.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Scenario, Topology};
use crate::trace::{MethodId, ProcId, StmtId};

pub const SEND_API: &str = "SocketChannel.write";
pub const RECV_API: &str = "SocketChannel.read";

const MAX_LOCALS: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Local(u8),
    /// Read-only formal parameter.
    Param(u8),
    /// Process-wide shared state.
    Global(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Assign { def: Var, uses: Vec<Var> },
    Source { def: Var },
    Sink { uses: Vec<Var> },
    /// Runs the next `skip` statements only when taken.
    Branch { uses: Vec<Var>, skip: u32 },
    Call { callee: usize, args: Vec<Var>, ret: Option<Var> },
    Return { uses: Vec<Var> },
    Send { uses: Vec<Var>, to: ProcId },
    Recv { def: Var, from: ProcId },
}

impl Stmt {
    pub fn def(&self) -> Option<Var> {
        match self {
            Stmt::Assign { def, .. } | Stmt::Source { def } | Stmt::Recv { def, .. } => Some(*def),
            Stmt::Call { ret, .. } => *ret,
            _ => None,
        }
    }

    pub fn uses(&self) -> &[Var] {
        match self {
            Stmt::Assign { uses, .. }
            | Stmt::Sink { uses }
            | Stmt::Branch { uses, .. }
            | Stmt::Return { uses }
            | Stmt::Send { uses, .. } => uses,
            Stmt::Call { args, .. } => args,
            Stmt::Source { .. } | Stmt::Recv { .. } => &[],
        }
    }

    pub fn api(&self) -> Option<&'static str> {
        match self {
            Stmt::Send { .. } => Some(SEND_API),
            Stmt::Recv { .. } => Some(RECV_API),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodModel {
    pub id: MethodId,
    pub params: u8,
    pub first_stmt: StmtId,
    /// The last statement is always a `Return`.
    pub stmts: Vec<Stmt>,
}

impl MethodModel {
    pub fn stmt_id(&self, idx: usize) -> StmtId {
        StmtId(self.first_stmt.0 + idx as u32)
    }

    pub fn stmt_ids(&self) -> impl Iterator<Item = (StmtId, &Stmt)> + '_ {
        self.stmts.iter().enumerate().map(|(i, s)| (self.stmt_id(i), s))
    }

    /// Index of the innermost branch whose region contains `idx`.
    pub fn guard_of(&self, idx: usize) -> Option<usize> {
        (0..idx).rev().find(|&b| match self.stmts[b] {
            Stmt::Branch { skip, .. } => idx <= b + skip as usize,
            _ => false,
        })
    }

    pub fn returns_value(&self) -> bool {
        matches!(self.stmts.last(), Some(Stmt::Return { uses }) if !uses.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcModel {
    pub process: ProcId,
    pub globals: u8,
    /// `methods[0]` is the process entry point; calls only go to higher indices.
    pub methods: Vec<MethodModel>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramModel {
    pub processes: Vec<ProcModel>,
}

impl ProgramModel {
    pub fn process(&self, p: ProcId) -> &ProcModel {
        &self.processes[p as usize]
    }

    pub fn classes(&self, p: ProcId) -> BTreeSet<&str> {
        self.process(p).methods.iter().map(|m| m.id.class_name.as_str()).collect()
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodModel> + '_ {
        self.processes.iter().flat_map(|p| &p.methods)
    }

    pub fn stmts(&self) -> impl Iterator<Item = (&MethodModel, StmtId, &Stmt)> + '_ {
        self.methods().flat_map(|m| m.stmt_ids().map(move |(id, s)| (m, id, s)))
    }

    pub fn call_edges(&self) -> BTreeSet<(MethodId, MethodId)> {
        let mut out = BTreeSet::new();
        for p in &self.processes {
            for m in &p.methods {
                for s in &m.stmts {
                    if let Stmt::Call { callee, .. } = s {
                        out.insert((m.id.clone(), p.methods[*callee].id.clone()));
                    }
                }
            }
        }
        out
    }

    pub fn sources(&self) -> BTreeSet<StmtId> {
        self.stmts()
            .filter(|(_, _, s)| matches!(s, Stmt::Source { .. }))
            .map(|(_, id, _)| id)
            .collect()
    }

    pub fn sinks(&self) -> BTreeSet<StmtId> {
        self.stmts()
            .filter(|(_, _, s)| matches!(s, Stmt::Sink { .. }))
            .map(|(_, id, _)| id)
            .collect()
    }

    pub fn msg_sites(&self) -> BTreeSet<StmtId> {
        self.stmts().filter(|(_, _, s)| s.api().is_some()).map(|(_, id, _)| id).collect()
    }
}

struct Role {
    class: String,
    /// Message operations `main` performs each round, in order.
    ops: Vec<Stmt>,
    source: bool,
    sink: bool,
}

fn roles(topology: &Topology, rng: &mut ChaCha8Rng) -> Vec<Role> {
    let recv = |from| Stmt::Recv { def: Var::Local(0), from };
    let send = |to| Stmt::Send { uses: vec![], to };
    match *topology {
        Topology::ClientServer => vec![
            Role { class: "app.Client".into(), ops: vec![send(1), recv(1)], source: true, sink: false },
            Role { class: "app.Server".into(), ops: vec![recv(0), send(0)], source: false, sink: true },
        ],
        Topology::PeerToPeer => {
            let n: u32 = rng.gen_range(3..=4);
            (0..n)
                .map(|p| {
                    let (next, prev) = ((p + 1) % n, (p + n - 1) % n);
                    let ops = if p == 0 { vec![send(next), recv(prev)] } else { vec![recv(prev), send(next)] };
                    Role { class: "net.Peer".into(), ops, source: p == 0, sink: p == n - 1 }
                })
                .collect()
        }
        Topology::NTier(n) => (0..n)
            .map(|p| {
                let mut ops = Vec::new();
                if p > 0 {
                    ops.push(recv(p - 1));
                }
                if p + 1 < n {
                    ops.push(send(p + 1));
                    ops.push(recv(p + 1));
                }
                if p > 0 {
                    ops.push(send(p - 1));
                }
                Role { class: format!("tier{p}.Service"), ops, source: p == 0, sink: p == n - 1 }
            })
            .collect(),
    }
}

struct BodyGen<'a> {
    rng: &'a mut ChaCha8Rng,
    defined: Vec<Var>,
    locals: u8,
    globals: u8,
}

impl BodyGen<'_> {
    fn pick_use(&mut self) -> Var {
        if self.rng.gen_bool(0.15) || self.defined.is_empty() {
            return Var::Global(self.rng.gen_range(0..self.globals));
        }
        let n = self.defined.len();
        if self.rng.gen_bool(0.7) {
            self.defined[n - 1 - self.rng.gen_range(0..n.min(2))]
        } else {
            *self.defined.choose(self.rng).expect("non-empty")
        }
    }

    fn uses(&mut self, max: usize) -> Vec<Var> {
        let n = self.rng.gen_range(1..=max);
        let mut v: Vec<Var> = (0..n).map(|_| self.pick_use()).collect();
        v.dedup();
        v
    }

    fn new_def(&mut self, allow_global: bool) -> Var {
        let v = if allow_global && self.rng.gen_bool(0.2) {
            Var::Global(self.rng.gen_range(0..self.globals))
        } else if self.locals < MAX_LOCALS && (self.locals == 0 || self.rng.gen_bool(0.5)) {
            self.locals += 1;
            Var::Local(self.locals - 1)
        } else {
            Var::Local(self.rng.gen_range(0..self.locals))
        };
        self.defined.retain(|d| *d != v);
        self.defined.push(v);
        v
    }

    /// Fills in the def/use operands of a required statement.
    fn instantiate(&mut self, s: &Stmt, methods: &[(u8, bool)]) -> Stmt {
        match s {
            Stmt::Send { to, .. } => Stmt::Send { uses: self.uses(2), to: *to },
            Stmt::Recv { from, .. } => Stmt::Recv { def: self.new_def(false), from: *from },
            Stmt::Source { .. } => Stmt::Source { def: self.new_def(false) },
            Stmt::Sink { .. } => Stmt::Sink { uses: self.uses(2) },
            Stmt::Call { callee, .. } => {
                let (params, returns) = methods[*callee];
                let args = (0..params).map(|_| self.pick_use()).collect();
                let ret = (returns && self.rng.gen_bool(0.8)).then(|| self.new_def(false));
                Stmt::Call { callee: *callee, args, ret }
            }
            other => other.clone(),
        }
    }

    fn random_stmt(&mut self, peers: &[ProcId]) -> Stmt {
        match self.rng.gen_range(0..100) {
            0..=54 => {
                let uses = self.uses(2);
                Stmt::Assign { def: self.new_def(true), uses }
            }
            55..=79 => Stmt::Branch { uses: self.uses(1), skip: 0 },
            80..=89 => Stmt::Sink { uses: self.uses(2) },
            90..=94 if !peers.is_empty() => Stmt::Send { uses: self.uses(1), to: *peers.choose(self.rng).expect("peers") },
            _ => Stmt::Source { def: self.new_def(false) },
        }
    }
}

/// Assigns branch regions so that they nest and never cover the final statement.
fn assign_skips(stmts: &mut [Stmt], rng: &mut ChaCha8Rng) {
    let body = stmts.len() - 1;
    let mut open: Vec<usize> = Vec::new();
    for i in 0..body {
        while open.last().is_some_and(|&end| end < i) {
            open.pop();
        }
        if let Stmt::Branch { skip, .. } = &mut stmts[i] {
            let limit = open.last().copied().unwrap_or(body - 1);
            let room = limit.saturating_sub(i).min(3) as u32;
            *skip = if room == 0 { 0 } else { rng.gen_range(1..=room) };
            open.push(i + *skip as usize);
        }
    }
}

fn method_name(idx: usize, params: u8, returns: bool) -> String {
    if idx == 0 {
        return "void main()".into();
    }
    let ps = vec!["int"; params as usize].join(", ");
    format!("{} f{idx}({ps})", if returns { "int" } else { "void" })
}

/// Deterministic program for a scenario.
pub fn generate_program(scenario: &Scenario) -> ProgramModel {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let roles = roles(&scenario.topology, &mut rng);
    let nprocs = roles.len() as u32;
    let mut next_stmt = 1u32;
    let mut processes = Vec::new();
    for (p, role) in roles.into_iter().enumerate() {
        let p = p as ProcId;
        let peers: Vec<ProcId> = scenario.topology.peers(p, nprocs);
        let globals = rng.gen_range(1..=2u8);
        let nmethods = rng.gen_range(2..=4usize);
        let sig: Vec<(u8, bool)> = (0..nmethods)
            .map(|i| if i == 0 { (0, false) } else { (rng.gen_range(0..=2), rng.gen_bool(0.7)) })
            .collect();
        // required statements per method, in order
        let mut required: Vec<Vec<Stmt>> = vec![Vec::new(); nmethods];
        for callee in 1..nmethods {
            let caller = rng.gen_range(0..callee);
            required[caller].push(Stmt::Call { callee, args: vec![], ret: None });
        }
        for r in required.iter_mut() {
            r.shuffle(&mut rng);
        }
        let mut main_ops = role.ops;
        if role.source {
            let at = rng.gen_range(0..=main_ops.iter().position(|s| matches!(s, Stmt::Send { .. })).unwrap_or(main_ops.len()));
            main_ops.insert(at, Stmt::Source { def: Var::Local(0) });
        }
        if role.sink {
            main_ops.push(Stmt::Sink { uses: vec![] });
        }
        let calls = std::mem::take(&mut required[0]);
        let mut merged = Vec::new();
        let (mut a, mut b) = (calls.into_iter().peekable(), main_ops.into_iter().peekable());
        while a.peek().is_some() || b.peek().is_some() {
            let take_a = b.peek().is_none() || (a.peek().is_some() && rng.gen_bool(0.5));
            merged.extend(if take_a { a.next() } else { b.next() });
        }
        required[0] = merged;

        let mut methods = Vec::new();
        let helper = format!("{}Helper", role.class);
        for (idx, req) in required.into_iter().enumerate() {
            let (params, returns) = sig[idx];
            let mut g = BodyGen {
                rng: &mut rng,
                defined: (0..params).map(Var::Param).collect(),
                locals: 0,
                globals,
            };
            let extra = g.rng.gen_range(1..=4usize);
            let total = req.len() + extra;
            let mut slots: Vec<bool> = (0..total).map(|i| i < req.len()).collect();
            slots.shuffle(g.rng);
            let mut req = req.into_iter();
            let mut stmts = Vec::new();
            for is_req in slots {
                let s = if is_req {
                    let r = req.next().expect("slot count");
                    g.instantiate(&r, &sig)
                } else {
                    g.random_stmt(if idx == 0 { &[] } else { &peers })
                };
                stmts.push(s);
            }
            let ret_uses = if returns { vec![g.pick_use()] } else { vec![] };
            stmts.push(Stmt::Return { uses: ret_uses });
            assign_skips(&mut stmts, &mut rng);
            let class = if idx > 0 && idx % 2 == 0 { helper.clone() } else { role.class.clone() };
            let first = StmtId(next_stmt);
            next_stmt += stmts.len() as u32;
            methods.push(MethodModel {
                id: MethodId::new(p, class, method_name(idx, params, returns)),
                params,
                first_stmt: first,
                stmts,
            });
        }
        processes.push(ProcModel { process: p, globals, methods });
    }
    ProgramModel { processes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(topology: Topology, seed: u64) -> Scenario {
        Scenario { topology, seed, length: 200 }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = scenario(Topology::ClientServer, 0);
        let a = generate_program(&s);
        assert_eq!(a, generate_program(&s));
        assert_eq!(a.processes.len(), 2);
    }

    #[test]
    fn structure_invariants_hold() {
        for seed in 0..50 {
            for t in [Topology::ClientServer, Topology::PeerToPeer, Topology::NTier(3)] {
                let m = generate_program(&scenario(t, seed));
                let src_procs: BTreeSet<_> = m.sources().iter().map(|s| proc_of(&m, *s)).collect();
                let sink_procs: BTreeSet<_> = m.sinks().iter().map(|s| proc_of(&m, *s)).collect();
                assert!(src_procs.iter().any(|p| sink_procs.iter().any(|q| p != q)));
                for p in &m.processes {
                    for (i, meth) in p.methods.iter().enumerate() {
                        assert!(matches!(meth.stmts.last(), Some(Stmt::Return { .. })));
                        for (k, s) in meth.stmts.iter().enumerate() {
                            match s {
                                Stmt::Call { callee, args, .. } => {
                                    assert!(*callee > i);
                                    assert_eq!(args.len(), p.methods[*callee].params as usize);
                                }
                                Stmt::Branch { skip, .. } => assert!(k + (*skip as usize) < meth.stmts.len() - 1),
                                _ => {}
                            }
                            assert!(!matches!(s.def(), Some(Var::Param(_))));
                        }
                    }
                }
            }
        }
    }

    fn proc_of(m: &ProgramModel, s: StmtId) -> ProcId {
        m.stmts().find(|(_, id, _)| *id == s).map(|(m, _, _)| m.id.process).unwrap()
    }

    #[test]
    fn peers_send_and_receive() {
        let m = generate_program(&scenario(Topology::PeerToPeer, 7));
        for p in &m.processes {
            let stmts: Vec<&Stmt> = p.methods.iter().flat_map(|m| &m.stmts).collect();
            assert!(stmts.iter().any(|s| matches!(s, Stmt::Send { .. })));
            assert!(stmts.iter().any(|s| matches!(s, Stmt::Recv { .. })));
        }
    }

    #[test]
    fn tiers_talk_to_neighbours_only() {
        for seed in 0..20 {
            let m = generate_program(&scenario(Topology::NTier(4), seed));
            for (meth, _, s) in m.stmts() {
                let p = meth.id.process as i64;
                match s {
                    Stmt::Send { to: q, .. } | Stmt::Recv { from: q, .. } => assert_eq!((p - *q as i64).abs(), 1),
                    _ => {}
                }
            }
        }
    }
}
