//! Static dependence graphs and analysis configuration for a program model.

use std::collections::{BTreeMap, BTreeSet};

use super::program::{MethodModel, ProcModel, ProgramModel, Stmt, Var, RECV_API, SEND_API};
use crate::graph::{Designator, EdgeKind, GraphSet, SourceSinkConfig, StaticDepGraph, StmtNode};
use crate::trace::BranchId;

fn method_succ(m: &MethodModel, k: usize) -> Vec<usize> {
    let last = m.stmts.len() - 1;
    match m.stmts[k] {
        Stmt::Return { .. } => vec![],
        Stmt::Branch { skip, .. } => {
            let mut v = vec![k + 1, k + 1 + skip as usize];
            v.dedup();
            v
        }
        _ if k < last => vec![k + 1],
        _ => vec![],
    }
}

fn intra_data(g: &mut StaticDepGraph, m: &MethodModel, flow_sensitive: bool) {
    let n = m.stmts.len();
    let defs_of = |v: Var| -> Vec<usize> { (0..n).filter(|k| m.stmts[*k].def() == Some(v)).collect() };
    let mut edges = BTreeSet::new();
    for (k, s) in m.stmts.iter().enumerate() {
        for v in s.uses() {
            if matches!(v, Var::Global(_)) || (matches!(v, Var::Local(_)) && !flow_sensitive) {
                edges.extend(defs_of(*v).into_iter().map(|d| (d, k)));
            }
        }
    }
    if flow_sensitive {
        // reaching definitions of locals; method bodies are acyclic
        let mut input: Vec<BTreeSet<(Var, usize)>> = vec![BTreeSet::new(); n];
        for k in 0..n {
            let s = &m.stmts[k];
            for v in s.uses().iter().filter(|v| matches!(v, Var::Local(_))) {
                edges.extend(input[k].iter().filter(|(dv, _)| dv == v).map(|(_, d)| (*d, k)));
            }
            let mut out = input[k].clone();
            if let Some(d @ Var::Local(_)) = s.def() {
                out.retain(|(v, _)| *v != d);
                out.insert((d, k));
            }
            for j in method_succ(m, k) {
                input[j].extend(out.iter().copied());
            }
        }
    }
    for (d, u) in edges.into_iter().filter(|(d, u)| d != u) {
        g.add_edge(EdgeKind::IntraData, m.stmt_id(d), m.stmt_id(u));
    }
}

fn intra_control(g: &mut StaticDepGraph, m: &MethodModel) {
    for (k, s) in m.stmts.iter().enumerate() {
        if let Stmt::Branch { skip, .. } = s {
            for j in k + 1..=k + *skip as usize {
                g.add_edge(EdgeKind::IntraControl, m.stmt_id(k), m.stmt_id(j));
            }
        }
    }
}

fn inter_edges(g: &mut StaticDepGraph, p: &ProcModel, ctx_sensitive: bool) {
    let mut sites: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (mi, m) in p.methods.iter().enumerate() {
        for (k, s) in m.stmts.iter().enumerate() {
            let Stmt::Call { callee, args, ret } = s else { continue };
            let callee_m = &p.methods[*callee];
            sites.entry(*callee).or_default().push((mi, k));
            for (j, cs) in callee_m.stmts.iter().enumerate() {
                if cs.uses().iter().any(|v| matches!(v, Var::Param(a) if (*a as usize) < args.len())) {
                    g.add_edge(EdgeKind::InterAdjacent, m.stmt_id(k), callee_m.stmt_id(j));
                }
            }
            if ret.is_some() && callee_m.returns_value() {
                let r = callee_m.stmts.len() - 1;
                g.add_edge(EdgeKind::InterAdjacent, callee_m.stmt_id(r), m.stmt_id(k));
            }
        }
    }
    if !ctx_sensitive {
        // merged calling contexts: a value entering one call site may leave at another
        for (callee, calls) in &sites {
            if !p.methods[*callee].returns_value() {
                continue;
            }
            for &(m1, k1) in calls {
                for &(m2, k2) in calls.iter().filter(|(m2, _)| *m2 != m1) {
                    if matches!(p.methods[m2].stmts[k2], Stmt::Call { ret: Some(_), .. }) {
                        g.add_edge(EdgeKind::InterAdjacent, p.methods[m1].stmt_id(k1), p.methods[m2].stmt_id(k2));
                    }
                }
            }
        }
    }
    let mut gdefs = Vec::new();
    let mut guses = Vec::new();
    for m in &p.methods {
        for (id, s) in m.stmt_ids() {
            if let Some(v @ Var::Global(_)) = s.def() {
                gdefs.push((&m.id, v, id));
            }
            for v in s.uses().iter().filter(|v| matches!(v, Var::Global(_))) {
                guses.push((&m.id, *v, id));
            }
        }
    }
    for (dm, dv, d) in &gdefs {
        for (um, uv, u) in &guses {
            if dm != um && dv == uv {
                g.add_edge(EdgeKind::InterPosterior, *d, *u);
            }
        }
    }
}

fn icfg(g: &mut StaticDepGraph, p: &ProcModel) {
    for m in &p.methods {
        for (k, s) in m.stmts.iter().enumerate() {
            match s {
                Stmt::Call { callee, .. } => {
                    let c = &p.methods[*callee];
                    g.add_cfg(m.stmt_id(k), c.stmt_id(0));
                    g.add_cfg(c.stmt_id(c.stmts.len() - 1), m.stmt_id(k + 1));
                }
                _ => {
                    for j in method_succ(m, k) {
                        g.add_cfg(m.stmt_id(k), m.stmt_id(j));
                    }
                }
            }
        }
    }
    let main = &p.methods[0];
    g.add_cfg(main.stmt_id(main.stmts.len() - 1), main.stmt_id(0));
    g.entries.insert(main.stmt_id(0));
}

/// Static dependence graph at the requested sensitivity. Dropping either
/// sensitivity only adds edges.
pub fn emit_static_graph(model: &ProgramModel, ctx_sensitive: bool, flow_sensitive: bool) -> StaticDepGraph {
    let mut g = StaticDepGraph::default();
    for p in &model.processes {
        for m in &p.methods {
            for (k, s) in m.stmts.iter().enumerate() {
                let guard = m.guard_of(k).map(|b| BranchId { stmt: m.stmt_id(b), taken: true });
                let node = StmtNode {
                    method: m.id.clone(),
                    api: s.api().map(str::to_string),
                    guard,
                };
                g.add_node(m.stmt_id(k), node);
            }
            intra_data(&mut g, m, flow_sensitive);
            intra_control(&mut g, m);
        }
        inter_edges(&mut g, p, ctx_sensitive);
        icfg(&mut g, p);
    }
    g
}

pub fn emit_graph_set(model: &ProgramModel) -> GraphSet {
    [(false, false), (false, true), (true, false), (true, true)]
        .into_iter()
        .map(|(c, f)| ((c, f), emit_static_graph(model, c, f)))
        .collect()
}

/// Every source and sink statement, plus the simulator's message APIs.
pub fn source_sink_config(model: &ProgramModel) -> SourceSinkConfig {
    SourceSinkConfig {
        sources: model.sources().into_iter().map(Designator::Stmt).collect(),
        sinks: model.sinks().into_iter().map(Designator::Stmt).collect(),
        send_apis: [SEND_API.to_string()].into(),
        recv_apis: [RECV_API.to_string()].into(),
    }
}
