use std::collections::{BTreeMap, BTreeSet};

use super::{SourceSinkConfig, StaticDepGraph};
use crate::trace::{MethodId, StmtId};
use crate::Result;

fn closure(seeds: &BTreeSet<StmtId>, next: &BTreeMap<StmtId, BTreeSet<StmtId>>) -> BTreeSet<StmtId> {
    let mut seen = seeds.clone();
    let mut stack: Vec<StmtId> = seeds.iter().copied().collect();
    while let Some(s) = stack.pop() {
        for t in next.get(&s).into_iter().flatten() {
            if seen.insert(*t) {
                stack.push(*t);
            }
        }
    }
    seen
}

/// Methods with a statement on some control-flow path from a source to a
/// sink. Message receive callsites also act as sources and message send
/// callsites as sinks.
pub fn relevant_methods(graph: &StaticDepGraph, cfg: &SourceSinkConfig) -> Result<BTreeSet<MethodId>> {
    cfg.require_endpoints()?;
    let mut fwd_seeds = cfg.source_stmts(graph);
    fwd_seeds.extend(cfg.recv_sites(graph));
    let mut bwd_seeds = cfg.sink_stmts(graph);
    bwd_seeds.extend(cfg.send_sites(graph));

    let mut pred: BTreeMap<StmtId, BTreeSet<StmtId>> = BTreeMap::new();
    for (s, tos) in &graph.succ {
        for t in tos {
            pred.entry(*t).or_default().insert(*s);
        }
    }
    let fwd = closure(&fwd_seeds, &graph.succ);
    let bwd = closure(&bwd_seeds, &pred);
    Ok(fwd
        .intersection(&bwd)
        .filter_map(|s| graph.method_of(*s).cloned())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Designator, StmtNode};
    use super::*;

    fn cfg(src: &[u32], sink: &[u32]) -> SourceSinkConfig {
        SourceSinkConfig {
            sources: src.iter().map(|s| Designator::Stmt(StmtId(*s))).collect(),
            sinks: sink.iter().map(|s| Designator::Stmt(StmtId(*s))).collect(),
            ..Default::default()
        }
    }

    fn names(set: &BTreeSet<MethodId>) -> Vec<&str> {
        set.iter().map(|m| m.method_name.as_str()).collect()
    }

    #[test]
    fn linear_chain_is_all_relevant() {
        let g = chain5();
        let r = relevant_methods(&g, &cfg(&[1], &[4])).unwrap();
        assert_eq!(names(&r), ["a", "b", "c", "d"]);
    }

    #[test]
    fn method_off_every_path_excluded() {
        let mut g = chain5();
        g.add_node(StmtId(10), node(0, "side"));
        g.add_cfg(StmtId(2), StmtId(10));
        let r = relevant_methods(&g, &cfg(&[1], &[5])).unwrap();
        assert!(!names(&r).contains(&"side"));
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn message_callsites_bridge_processes() {
        // p0: src(1) -> send(2) -> tail(3); p1: head(10) -> recv(11) -> sink(12)
        let mut g = StaticDepGraph::default();
        let api = |p, m: &str, api: &str| StmtNode {
            api: Some(api.into()),
            ..node(p, m)
        };
        g.add_node(StmtId(1), node(0, "src"));
        g.add_node(StmtId(2), api(0, "sender", "send"));
        g.add_node(StmtId(3), node(0, "tail"));
        g.add_node(StmtId(10), node(1, "head"));
        g.add_node(StmtId(11), api(1, "receiver", "recv"));
        g.add_node(StmtId(12), node(1, "snk"));
        for (a, b) in [(1, 2), (2, 3), (10, 11), (11, 12)] {
            g.add_cfg(StmtId(a), StmtId(b));
        }
        let mut c = cfg(&[1], &[12]);
        let r = relevant_methods(&g, &c).unwrap();
        assert!(r.is_empty());
        c.send_apis.insert("send".into());
        c.recv_apis.insert("recv".into());
        let r = relevant_methods(&g, &c).unwrap();
        assert_eq!(names(&r), ["sender", "src", "receiver", "snk"]);
    }

    #[test]
    fn empty_sinks_is_config_error() {
        assert!(relevant_methods(&chain5(), &cfg(&[1], &[])).is_err());
    }
}
