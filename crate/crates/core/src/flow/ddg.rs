//! Dynamic dependence graphs: static edges activated by an event sequence.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{EdgeKind, StaticDepGraph};
use crate::trace::{EventKind, GlobalOrder, MethodId, StmtId};

/// Static dependence graph restricted to activated edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DynDepGraph {
    pub graph: StaticDepGraph,
}

impl DynDepGraph {
    pub fn is_empty(&self) -> bool {
        self.graph.nodes.is_empty()
    }

    fn successors(&self) -> BTreeMap<StmtId, Vec<StmtId>> {
        let mut out: BTreeMap<StmtId, Vec<StmtId>> = BTreeMap::new();
        for e in &self.graph.edges {
            out.entry(e.from).or_default().push(e.to);
        }
        for v in out.values_mut() {
            v.dedup();
        }
        out
    }
}

/// Interprocedural activation witnesses drawn from an event sequence.
pub(crate) struct Activation {
    executed: BTreeSet<MethodId>,
    /// Some event of `.0` is immediately followed by an event of `.1` among
    /// the method events of their process.
    adjacent: BTreeSet<(MethodId, MethodId)>,
    first: BTreeMap<MethodId, u64>,
    last: BTreeMap<MethodId, u64>,
}

impl Activation {
    pub(crate) fn new(es: &GlobalOrder) -> Self {
        let mut act = Activation {
            executed: BTreeSet::new(),
            adjacent: BTreeSet::new(),
            first: BTreeMap::new(),
            last: BTreeMap::new(),
        };
        let mut prev: BTreeMap<u32, &MethodId> = BTreeMap::new();
        for e in es.merged.iter().filter(|e| e.kind.is_method_event()) {
            act.executed.insert(e.method.clone());
            if e.kind == EventKind::Entry {
                act.first.entry(e.method.clone()).or_insert(e.ts);
            }
            act.last.insert(e.method.clone(), e.ts);
            if let Some(p) = prev.insert(e.process(), &e.method) {
                if p != &e.method {
                    act.adjacent.insert((p.clone(), e.method.clone()));
                }
            }
        }
        act
    }

    pub(crate) fn activates(&self, kind: EdgeKind, from: &MethodId, to: &MethodId) -> bool {
        match kind {
            EdgeKind::IntraData | EdgeKind::IntraControl => self.executed.contains(from),
            EdgeKind::InterAdjacent => self.adjacent.contains(&(from.clone(), to.clone())),
            EdgeKind::InterPosterior => match (self.first.get(from), self.last.get(to)) {
                (Some(f), Some(l)) => f < l,
                _ => false,
            },
        }
    }
}

fn reach(seeds: &BTreeSet<StmtId>, adj: &BTreeMap<StmtId, Vec<StmtId>>) -> BTreeSet<StmtId> {
    let mut seen = seeds.clone();
    let mut stack: Vec<StmtId> = seeds.iter().copied().collect();
    while let Some(s) = stack.pop() {
        for t in adj.get(&s).into_iter().flatten() {
            if seen.insert(*t) {
                stack.push(*t);
            }
        }
    }
    seen
}

/// Activates the edges of `sdg` against `es` and keeps the part lying on
/// paths from `s` or an inlet to `t` or an outlet.
///
/// An adjacent interprocedural edge needs an event of the callee side
/// immediately after an event of the caller side; a posterior one needs any
/// later event. Intraprocedural edges of executed methods are always active.
pub fn build_ddg(
    sdg: &StaticDepGraph,
    s: StmtId,
    t: StmtId,
    inlets: &BTreeSet<StmtId>,
    outlets: &BTreeSet<StmtId>,
    es: &GlobalOrder,
) -> DynDepGraph {
    build_with(sdg, s, t, inlets, outlets, &Activation::new(es))
}

pub(crate) fn build_with(
    sdg: &StaticDepGraph,
    s: StmtId,
    t: StmtId,
    inlets: &BTreeSet<StmtId>,
    outlets: &BTreeSet<StmtId>,
    act: &Activation,
) -> DynDepGraph {
    let live = |x: &StmtId| sdg.method_of(*x).is_some_and(|m| act.executed.contains(m));
    if !live(&s) || !live(&t) {
        return DynDepGraph::default();
    }
    let active: Vec<_> = sdg
        .edges
        .iter()
        .filter(|e| act.activates(e.kind, &sdg.nodes[&e.from].method, &sdg.nodes[&e.to].method))
        .collect();
    let mut fwd_adj: BTreeMap<StmtId, Vec<StmtId>> = BTreeMap::new();
    let mut bwd_adj: BTreeMap<StmtId, Vec<StmtId>> = BTreeMap::new();
    for e in &active {
        fwd_adj.entry(e.from).or_default().push(e.to);
        bwd_adj.entry(e.to).or_default().push(e.from);
    }
    let seeds: BTreeSet<StmtId> = inlets.iter().copied().filter(live).chain([s]).collect();
    let targets: BTreeSet<StmtId> = outlets.iter().copied().filter(live).chain([t]).collect();
    let fwd = reach(&seeds, &fwd_adj);
    let bwd = reach(&targets, &bwd_adj);
    let keep: BTreeSet<StmtId> = fwd.intersection(&bwd).copied().collect();
    let mut graph = StaticDepGraph::default();
    for x in &keep {
        graph.add_node(*x, sdg.nodes[x].clone());
    }
    for e in active.into_iter().filter(|e| keep.contains(&e.from) && keep.contains(&e.to)) {
        graph.add_edge(e.kind, e.from, e.to);
    }
    DynDepGraph { graph }
}

/// Drops uncovered statements and their edges.
pub fn prune_ddg(ddg: &DynDepGraph, covered: &BTreeSet<StmtId>) -> DynDepGraph {
    DynDepGraph {
        graph: ddg.graph.prune_by_coverage(covered),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathSearch {
    pub paths: Vec<Vec<StmtId>>,
    /// Whether the length or count limit cut the enumeration short.
    pub truncated: bool,
}

struct Dfs<'a> {
    succ: &'a BTreeMap<StmtId, Vec<StmtId>>,
    useful: &'a BTreeSet<StmtId>,
    outs: &'a BTreeSet<StmtId>,
    max_len: usize,
    max_paths: usize,
    on_path: BTreeSet<StmtId>,
    path: Vec<StmtId>,
    out: PathSearch,
}

impl Dfs<'_> {
    fn visit(&mut self, x: StmtId) {
        if self.out.paths.len() >= self.max_paths {
            self.out.truncated = true;
            return;
        }
        self.path.push(x);
        self.on_path.insert(x);
        if self.outs.contains(&x) {
            self.out.paths.push(self.path.clone());
        }
        for y in self.succ.get(&x).into_iter().flatten() {
            if self.on_path.contains(y) || !self.useful.contains(y) {
                continue;
            }
            if self.path.len() >= self.max_len {
                self.out.truncated = true;
                continue;
            }
            self.visit(*y);
        }
        self.on_path.remove(&x);
        self.path.pop();
    }
}

/// Simple paths from any statement of `ins` to any statement of `outs`,
/// using only statements of `methods`. Paths have at most `max_len`
/// statements and at most `max_paths` are returned.
pub fn find_paths(
    g: &DynDepGraph,
    ins: &BTreeSet<StmtId>,
    outs: &BTreeSet<StmtId>,
    methods: &BTreeSet<MethodId>,
    max_len: usize,
    max_paths: usize,
) -> PathSearch {
    let allowed: BTreeSet<StmtId> = g
        .graph
        .nodes
        .iter()
        .filter(|(_, n)| methods.contains(&n.method))
        .map(|(s, _)| *s)
        .collect();
    let succ: BTreeMap<StmtId, Vec<StmtId>> = g
        .successors()
        .into_iter()
        .filter(|(s, _)| allowed.contains(s))
        .map(|(s, ts)| (s, ts.into_iter().filter(|t| allowed.contains(t)).collect()))
        .collect();
    let mut pred: BTreeMap<StmtId, Vec<StmtId>> = BTreeMap::new();
    for (s, ts) in &succ {
        for t in ts {
            pred.entry(*t).or_default().push(*s);
        }
    }
    let targets: BTreeSet<StmtId> = outs.intersection(&allowed).copied().collect();
    let useful = reach(&targets, &pred);
    let mut dfs = Dfs {
        succ: &succ,
        useful: &useful,
        outs: &targets,
        max_len: max_len.max(1),
        max_paths,
        on_path: BTreeSet::new(),
        path: Vec::new(),
        out: PathSearch::default(),
    };
    for s in ins.iter().filter(|s| useful.contains(*s)) {
        dfs.visit(*s);
    }
    dfs.out
}
