use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::slice;

use super::Configuration;
use crate::graph::{statement_coverage, EdgeKind, GraphSet, StaticDepGraph};
use crate::trace::{MethodId, MethodSpan, ProcessTrace};
use crate::{Error, Result};

/// Dependence set of every method of one process.
pub type DsMap = BTreeMap<MethodId, BTreeSet<MethodId>>;

/// Method-event queue reduced to the first entry and last event of each method.
pub fn first_last_instances(qu: &ProcessTrace) -> ProcessTrace {
    qu.first_last_only()
}

/// Selects the static graph a configuration needs, pruned by the coverage
/// observed in `qu` when statement coverage is on.
pub(crate) fn graph_for<'a>(config: Configuration, graphs: &'a GraphSet, qu: &ProcessTrace) -> Result<Option<Cow<'a, StaticDepGraph>>> {
    if !config.static_graph() {
        return Ok(None);
    }
    let key = (config.context(), config.flow());
    let g = graphs.get(&key).ok_or(Error::MissingGraph { ctx: key.0, flow: key.1 })?;
    Ok(Some(if config.stmt_coverage() {
        Cow::Owned(g.prune_by_coverage(&statement_coverage(g, slice::from_ref(qu))))
    } else {
        Cow::Borrowed(g)
    }))
}

/// Method-level interprocedural edges within one process.
fn process_edges(g: &StaticDepGraph, qu: &ProcessTrace) -> Vec<(MethodId, MethodId, BTreeSet<EdgeKind>)> {
    g.method_edges()
        .into_iter()
        .filter(|((a, b), _)| a != b && a.process == qu.process && b.process == qu.process)
        .map(|((a, b), k)| (a, b, k))
        .collect()
}

/// Pairs `(a, b)` where an event of `a` is immediately followed by an event
/// of `b` in the method-event sequence.
fn adjacent_pairs(qu: &ProcessTrace) -> BTreeSet<(&MethodId, &MethodId)> {
    let evs: Vec<_> = qu.method_events().collect();
    evs.windows(2).map(|w| (&w[0].method, &w[1].method)).collect()
}

fn reach(start: &MethodId, succ: &BTreeMap<&MethodId, Vec<&MethodId>>) -> BTreeSet<MethodId> {
    let mut seen: BTreeSet<&MethodId> = BTreeSet::from([start]);
    let mut work = VecDeque::from([start]);
    while let Some(m) = work.pop_front() {
        for n in succ.get(m).into_iter().flatten() {
            if seen.insert(n) {
                work.push_back(n);
            }
        }
    }
    seen.into_iter().cloned().collect()
}

/// Computes the dependence set of each method in the process that produced
/// `qu`, an in-order queue of that process's events.
///
/// Every set contains its own method. With method events on, only executed
/// methods get a set; otherwise every method of the process in the static
/// graph does.
pub fn compute_deps(qu: &ProcessTrace, config: Configuration, graphs: &GraphSet) -> Result<DsMap> {
    if let Some(reason) = config.invalid_reason() {
        return Err(Error::InvalidConfiguration { bits: config.to_string(), reason });
    }
    let graph = graph_for(config, graphs, qu)?;
    let qu: Cow<ProcessTrace> = if config.instance_level() {
        Cow::Borrowed(qu)
    } else {
        Cow::Owned(first_last_instances(qu))
    };
    let spans: BTreeMap<MethodId, MethodSpan> = qu.spans();
    let edges = graph.as_deref().map(|g| process_edges(g, &qu)).unwrap_or_default();

    let mut out = DsMap::new();
    if !config.method_event() {
        let mut succ: BTreeMap<&MethodId, Vec<&MethodId>> = BTreeMap::new();
        for (a, b, _) in &edges {
            succ.entry(a).or_default().push(b);
        }
        let g = graph.as_deref().expect("valid configurations without method events use the graph");
        let methods = g.methods().into_iter().filter(|m| m.process == qu.process).chain(spans.keys().cloned());
        for m in methods {
            let ds = reach(&m, &succ);
            out.insert(m, ds);
        }
        return Ok(out);
    }

    if graph.is_none() {
        for (m, span) in &spans {
            let mut ds: BTreeSet<MethodId> =
                spans.iter().filter(|(_, y)| y.last >= span.first).map(|(y, _)| y.clone()).collect();
            ds.insert(m.clone());
            out.insert(m.clone(), ds);
        }
        return Ok(out);
    }

    let adjacent = adjacent_pairs(&qu);
    let posterior = |a: &MethodId, b: &MethodId| match (spans.get(a), spans.get(b)) {
        (Some(x), Some(y)) => x.first < y.last,
        _ => false,
    };
    let mut succ: BTreeMap<&MethodId, Vec<&MethodId>> = BTreeMap::new();
    for (a, b, kinds) in &edges {
        if !spans.contains_key(a) || !spans.contains_key(b) {
            continue;
        }
        let adj_active = kinds.contains(&EdgeKind::InterAdjacent)
            && if config.instance_level() { adjacent.contains(&(a, b)) } else { posterior(a, b) };
        if adj_active || (kinds.contains(&EdgeKind::InterPosterior) && posterior(a, b)) {
            succ.entry(a).or_default().push(b);
        }
    }
    for (m, span) in &spans {
        let mut ds: BTreeSet<MethodId> = reach(m, &succ)
            .into_iter()
            .filter(|y| spans[y].last >= span.first)
            .collect();
        ds.insert(m.clone());
        out.insert(m.clone(), ds);
    }
    Ok(out)
}
