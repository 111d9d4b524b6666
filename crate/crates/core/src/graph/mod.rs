//! Statement-level static dependence graphs and interprocedural CFGs.

mod config;
mod io;
mod reach;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::trace::{BranchId, MethodId, ProcId, ProcessTrace, StmtId};
use crate::{Error, Result};

pub use config::{Designator, SourceSinkConfig};
pub use io::{read_graph, read_graph_set, write_graph, write_graph_set, GraphSet};
pub use reach::relevant_methods;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    IntraData,
    IntraControl,
    /// Parameter or return-value passing between caller and callee.
    InterAdjacent,
    /// Def-use through shared state across methods.
    InterPosterior,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [
        EdgeKind::IntraData,
        EdgeKind::IntraControl,
        EdgeKind::InterAdjacent,
        EdgeKind::InterPosterior,
    ];

    pub fn is_inter(self) -> bool {
        matches!(self, EdgeKind::InterAdjacent | EdgeKind::InterPosterior)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::IntraData => "intra_data",
            EdgeKind::IntraControl => "intra_control",
            EdgeKind::InterAdjacent => "inter_adjacent",
            EdgeKind::InterPosterior => "inter_posterior",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown edge kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: StmtId,
    pub to: StmtId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StmtNode {
    pub method: MethodId,
    /// Name of the message-passing API invoked here, if any.
    pub api: Option<String>,
    /// Innermost branch outcome guarding this statement; `None` when the
    /// statement runs whenever its method is entered.
    pub guard: Option<BranchId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StaticDepGraph {
    pub nodes: BTreeMap<StmtId, StmtNode>,
    pub edges: BTreeSet<Edge>,
    /// Control-flow successors over the whole program.
    pub succ: BTreeMap<StmtId, BTreeSet<StmtId>>,
    /// Entry statement of every process.
    pub entries: BTreeSet<StmtId>,
}

impl StaticDepGraph {
    pub fn add_node(&mut self, stmt: StmtId, node: StmtNode) {
        self.nodes.insert(stmt, node);
    }

    pub fn add_edge(&mut self, kind: EdgeKind, from: StmtId, to: StmtId) {
        self.edges.insert(Edge { kind, from, to });
    }

    pub fn add_cfg(&mut self, from: StmtId, to: StmtId) {
        self.succ.entry(from).or_default().insert(to);
    }

    pub fn method_of(&self, stmt: StmtId) -> Option<&MethodId> {
        self.nodes.get(&stmt).map(|n| &n.method)
    }

    pub fn process_of(&self, stmt: StmtId) -> Option<ProcId> {
        self.method_of(stmt).map(|m| m.process)
    }

    pub fn methods(&self) -> BTreeSet<MethodId> {
        self.nodes.values().map(|n| n.method.clone()).collect()
    }

    pub fn stmts_of<'a>(&'a self, method: &'a MethodId) -> impl Iterator<Item = StmtId> + 'a {
        self.nodes
            .iter()
            .filter(move |(_, n)| &n.method == method)
            .map(|(s, _)| *s)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Distinct method pairs joined by an interprocedural edge, with the kinds seen.
    pub fn method_edges(&self) -> BTreeMap<(MethodId, MethodId), BTreeSet<EdgeKind>> {
        let mut out: BTreeMap<(MethodId, MethodId), BTreeSet<EdgeKind>> = BTreeMap::new();
        for e in self.edges.iter().filter(|e| e.kind.is_inter()) {
            let (a, b) = (&self.nodes[&e.from].method, &self.nodes[&e.to].method);
            out.entry((a.clone(), b.clone())).or_default().insert(e.kind);
        }
        out
    }

    /// Checks endpoint existence and the intra/inter method split.
    pub fn validate(&self) -> Result<()> {
        let missing = |s: &StmtId| !self.nodes.contains_key(s);
        for e in &self.edges {
            if missing(&e.from) || missing(&e.to) {
                return Err(Error::Config(format!("edge {} -> {} has a missing endpoint", e.from, e.to)));
            }
            let same = self.nodes[&e.from].method == self.nodes[&e.to].method;
            if same == e.kind.is_inter() {
                return Err(Error::Config(format!(
                    "{} edge {} -> {} {} method boundaries",
                    e.kind,
                    e.from,
                    e.to,
                    if same { "does not cross" } else { "crosses" }
                )));
            }
        }
        for (from, tos) in &self.succ {
            if missing(from) || tos.iter().any(missing) {
                return Err(Error::Config(format!("control-flow edge from {from} has a missing endpoint")));
            }
        }
        if let Some(s) = self.entries.iter().find(|s| missing(s)) {
            return Err(Error::Config(format!("entry {s} is not a node")));
        }
        Ok(())
    }

    fn restrict(&self, keep: impl Fn(StmtId, &StmtNode) -> bool) -> StaticDepGraph {
        let nodes: BTreeMap<StmtId, StmtNode> = self
            .nodes
            .iter()
            .filter(|(s, n)| keep(**s, n))
            .map(|(s, n)| (*s, n.clone()))
            .collect();
        let has = |s: &StmtId| nodes.contains_key(s);
        let edges = self.edges.iter().filter(|e| has(&e.from) && has(&e.to)).copied().collect();
        let succ = self
            .succ
            .iter()
            .filter(|(s, _)| has(s))
            .map(|(s, tos)| (*s, tos.iter().filter(|t| has(t)).copied().collect::<BTreeSet<_>>()))
            .filter(|(_, tos)| !tos.is_empty())
            .collect();
        let entries = self.entries.iter().filter(|s| has(s)).copied().collect();
        StaticDepGraph { nodes, edges, succ, entries }
    }

    /// Keeps only the statements of the given methods.
    pub fn partial_graph(&self, methods: &BTreeSet<MethodId>) -> StaticDepGraph {
        self.restrict(|_, n| methods.contains(&n.method))
    }

    /// Keeps only covered statements and edges between them.
    pub fn prune_by_coverage(&self, covered: &BTreeSet<StmtId>) -> StaticDepGraph {
        self.restrict(|s, _| covered.contains(&s))
    }

    /// Statement coverage inferred from branch coverage: a statement is
    /// covered when its method was entered and its guarding branch outcome,
    /// if any, was taken at least once.
    pub fn infer_coverage(&self, traces: &[ProcessTrace]) -> BTreeSet<StmtId> {
        use crate::trace::EventKind;
        let mut entered = BTreeSet::new();
        let mut taken = BTreeSet::new();
        for e in traces.iter().flat_map(|t| &t.events) {
            match e.kind {
                EventKind::Entry => {
                    entered.insert(&e.method);
                }
                EventKind::Branch => taken.extend(e.branch),
                _ => {}
            }
        }
        self.nodes
            .iter()
            .filter(|(_, n)| entered.contains(&n.method) && n.guard.is_none_or(|g| taken.contains(&g)))
            .map(|(s, _)| *s)
            .collect()
    }
}

/// Union of recorded statement coverage and coverage inferred from branches.
pub fn statement_coverage(graph: &StaticDepGraph, traces: &[ProcessTrace]) -> BTreeSet<StmtId> {
    let mut covered = graph.infer_coverage(traces);
    for t in traces {
        covered.extend(t.covered_stmts());
    }
    covered
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn node(proc: ProcId, method: &str) -> StmtNode {
        StmtNode {
            method: MethodId::new(proc, "C", method),
            api: None,
            guard: None,
        }
    }

    /// Five methods a..e in one process, one statement each, chained a→b→c→d→e
    /// by data edges and control flow.
    pub fn chain5() -> StaticDepGraph {
        let mut g = StaticDepGraph::default();
        for (i, m) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            g.add_node(StmtId(i as u32 + 1), node(0, m));
        }
        for i in 1..5 {
            g.add_edge(EdgeKind::InterPosterior, StmtId(i), StmtId(i + 1));
            g.add_cfg(StmtId(i), StmtId(i + 1));
        }
        g.entries.insert(StmtId(1));
        g
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::trace::{EventKind, EventRecord};

    fn methods(names: &[&str]) -> BTreeSet<MethodId> {
        names.iter().map(|m| MethodId::new(0, "C", *m)).collect()
    }

    #[test]
    fn partial_graph_keeps_edges_among_kept_methods() {
        let g = chain5();
        let p = g.partial_graph(&methods(&["a", "b", "d"]));
        assert_eq!(p.nodes.len(), 3);
        assert_eq!(p.edges.len(), 1);
        assert!(p.edges.iter().all(|e| e.from == StmtId(1) && e.to == StmtId(2)));
        assert_eq!(g.partial_graph(&g.methods()), g);
        assert!(g.partial_graph(&BTreeSet::new()).nodes.is_empty());
    }

    #[test]
    fn removing_bridge_statement_disconnects() {
        let g = chain5();
        let all: BTreeSet<StmtId> = g.nodes.keys().copied().collect();
        assert_eq!(g.prune_by_coverage(&all), g);
        assert!(g.prune_by_coverage(&BTreeSet::new()).nodes.is_empty());
        let mut cov = all.clone();
        cov.remove(&StmtId(3));
        let p = g.prune_by_coverage(&cov);
        assert!(!p.edges.iter().any(|e| e.from == StmtId(2)));
        assert_eq!(p.edges.len(), 2);
    }

    #[test]
    fn validate_rejects_intra_edge_across_methods() {
        let mut g = chain5();
        g.add_edge(EdgeKind::IntraData, StmtId(1), StmtId(2));
        assert!(g.validate().is_err());
        let mut g = chain5();
        g.add_edge(EdgeKind::IntraData, StmtId(1), StmtId(9));
        assert!(g.validate().is_err());
        assert!(chain5().validate().is_ok());
    }

    #[test]
    fn coverage_follows_taken_branches() {
        let mut g = StaticDepGraph::default();
        let m = MethodId::new(0, "C", "a");
        g.add_node(StmtId(1), StmtNode { method: m.clone(), api: None, guard: None });
        let guarded = |taken| StmtNode {
            method: m.clone(),
            api: None,
            guard: Some(BranchId { stmt: StmtId(1), taken }),
        };
        g.add_node(StmtId(2), guarded(true));
        g.add_node(StmtId(3), guarded(false));
        g.add_node(StmtId(4), node(0, "never"));
        let trace = ProcessTrace::new(
            0,
            vec![
                EventRecord::new(EventKind::Entry, m.clone(), 1),
                EventRecord::new(EventKind::Branch, m, 2)
                    .with_branch(BranchId { stmt: StmtId(1), taken: true }),
            ],
        );
        let cov = g.infer_coverage(&[trace]);
        assert_eq!(cov, [StmtId(1), StmtId(2)].into_iter().collect());
    }
}
