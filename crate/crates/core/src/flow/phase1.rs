//! Method-level flow paths from first-entry / last-return timestamps.

use std::collections::{BTreeMap, BTreeSet};

use super::EndpointMethods;
use crate::exec::Exec;
use crate::trace::{
    all_spans, find_trace, merge_global, CausalIndex, EventRef, FirstMsgMap, GlobalOrder, MethodId, MethodSpan,
    ProcessTrace,
};
use crate::Result;

/// How members of other processes enter a dependence set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RemoteRule {
    /// `m` in `P_j` qualifies when some message received by `P_j` no later
    /// than `lr(m)` is causally preceded by `q`'s first entry.
    #[default]
    Causal,
    /// Only the first message `P_j` received directly from `q`'s process is
    /// considered: `fe(q) <= ts <= lr(m)`.
    FirstMessage,
}

#[derive(Clone, Copy, Debug)]
pub struct Phase1Options {
    pub remote_rule: RemoteRule,
    /// Longer paths are dropped and counted in [`Phase1::truncated`].
    pub max_path_len: usize,
    pub exec: Exec,
}

impl Default for Phase1Options {
    fn default() -> Self {
        Phase1Options {
            remote_rule: RemoteRule::Causal,
            max_path_len: 16,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodFlowPath {
    pub methods: Vec<MethodId>,
}

impl MethodFlowPath {
    pub fn source(&self) -> &MethodId {
        &self.methods[0]
    }

    pub fn sink(&self) -> &MethodId {
        self.methods.last().expect("paths are non-empty")
    }

    /// `fe(m_i) <= lr(m_j)` for every `i < j`.
    pub fn is_ordered(&self, spans: &BTreeMap<MethodId, MethodSpan>) -> bool {
        let mut max_first = 0;
        for m in &self.methods {
            let Some(s) = spans.get(m) else { return false };
            if max_first > s.last {
                return false;
            }
            max_first = max_first.max(s.first);
        }
        true
    }

    pub fn render(&self) -> String {
        let ms: Vec<String> = self.methods.iter().map(|m| m.to_string()).collect();
        format!("path level=method {}", ms.join(" -> "))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Phase1 {
    pub paths: BTreeSet<MethodFlowPath>,
    /// Paths dropped for exceeding the length limit.
    pub truncated: usize,
    /// Dependence set of every executed source method.
    pub ds: BTreeMap<MethodId, BTreeSet<MethodId>>,
}

impl Phase1 {
    /// Methods on the paths of each (source method, sink method) pair.
    pub fn path_methods(&self) -> BTreeMap<(MethodId, MethodId), BTreeSet<MethodId>> {
        let mut out: BTreeMap<(MethodId, MethodId), BTreeSet<MethodId>> = BTreeMap::new();
        for p in &self.paths {
            out.entry((p.source().clone(), p.sink().clone()))
                .or_default()
                .extend(p.methods.iter().cloned());
        }
        out
    }

    pub fn render(&self) -> String {
        self.paths.iter().map(|p| p.render() + "\n").collect()
    }
}

struct Ctx<'a> {
    traces: &'a [ProcessTrace],
    first_msgs: &'a FirstMsgMap,
    spans: BTreeMap<MethodId, MethodSpan>,
    last_event: BTreeMap<MethodId, EventRef>,
    index: CausalIndex,
}

impl<'a> Ctx<'a> {
    fn new(traces: &'a [ProcessTrace], first_msgs: &'a FirstMsgMap) -> Self {
        let mut last_event = BTreeMap::new();
        for e in traces.iter().flat_map(|t| t.method_events()) {
            last_event.insert(e.method.clone(), EventRef::from(e));
        }
        Ctx {
            traces,
            first_msgs,
            spans: all_spans(traces),
            last_event,
            index: CausalIndex::new(traces),
        }
    }

    fn ds(&self, q: &MethodId, rule: RemoteRule) -> BTreeSet<MethodId> {
        let Some(qs) = self.spans.get(q) else { return BTreeSet::new() };
        let frontier = match rule {
            RemoteRule::Causal => self.index.frontier(EventRef { process: q.process, seq: qs.first_seq }),
            RemoteRule::FirstMessage => BTreeMap::new(),
        };
        let arrival = |p| -> Option<u64> {
            let idx = (*frontier.get(&p)?)?;
            Some(find_trace(self.traces, p)?.events[idx].ts)
        };
        self.spans
            .iter()
            .filter(|(m, span)| {
                if m.process == q.process {
                    return qs.first <= span.last;
                }
                if !self.first_msgs.receives_any(m.process) {
                    return false;
                }
                match rule {
                    RemoteRule::Causal => arrival(m.process).is_some_and(|ts| ts <= span.last),
                    RemoteRule::FirstMessage => self
                        .first_msgs
                        .get(m.process, q.process)
                        .is_some_and(|ts| qs.first <= ts && ts <= span.last),
                }
            })
            .map(|(m, _)| m.clone())
            .collect()
    }

    /// Method events of `members` between `q`'s first entry and `sk`'s last
    /// method event, in global order, with repeats collapsed.
    fn projection(&self, es: &GlobalOrder, q: &MethodId, sk: &MethodId, members: &BTreeSet<MethodId>) -> Vec<MethodId> {
        let from = es.position(EventRef { process: q.process, seq: self.spans[q].first_seq });
        let to = es.position(self.last_event[sk]);
        let (Some(from), Some(to)) = (from, to) else { return Vec::new() };
        let mut out: Vec<MethodId> = Vec::new();
        for e in es.merged.get(from..=to).into_iter().flatten() {
            if e.kind.is_method_event() && members.contains(&e.method) && out.last() != Some(&e.method) {
                out.push(e.method.clone());
            }
        }
        out
    }

    fn paths_for(&self, es: &GlobalOrder, q: &MethodId, ds: &BTreeSet<MethodId>, sk: &MethodId) -> Vec<Vec<MethodId>> {
        let lr_sk = self.spans[sk].last;
        let mut middle: Vec<&MethodId> = ds
            .iter()
            .filter(|m| *m != q && *m != sk && self.spans[*m].first <= lr_sk)
            .collect();
        middle.sort_by_key(|m| (self.spans[*m].last, self.spans[*m].first, *m));
        let mut direct = vec![q.clone()];
        direct.extend(middle.into_iter().cloned());
        if direct.len() > 1 || q != sk {
            direct.push(sk.clone());
        }
        vec![direct, self.projection(es, q, sk, ds)]
    }
}

/// Dependence set of `q`: every method whose last method event is not
/// earlier than `q`'s first entry in `q`'s process, plus remote methods
/// selected by `rule`. Empty when `q` never executed.
pub fn method_ds(q: &MethodId, traces: &[ProcessTrace], first_msgs: &FirstMsgMap, rule: RemoteRule) -> BTreeSet<MethodId> {
    Ctx::new(traces, first_msgs).ds(q, rule)
}

/// Dependence sets of every executed method.
pub fn all_method_ds(
    traces: &[ProcessTrace],
    first_msgs: &FirstMsgMap,
    rule: RemoteRule,
    exec: Exec,
) -> BTreeMap<MethodId, BTreeSet<MethodId>> {
    let ctx = Ctx::new(traces, first_msgs);
    let methods: Vec<&MethodId> = ctx.spans.keys().collect();
    let sets = exec.map(&methods, |m| ctx.ds(m, rule));
    methods.into_iter().cloned().zip(sets).collect()
}

/// Method-level paths from every executed source method to every sink
/// method in its dependence set.
///
/// Per (source, sink) pair two paths are emitted: the source, then all
/// qualifying dependence-set members ordered by last event, then the sink;
/// and the globally ordered sequence of dependence-set method events between
/// the source's first entry and the sink's last event.
pub fn method_level_paths(
    traces: &[ProcessTrace],
    first_msgs: &FirstMsgMap,
    endpoints: &EndpointMethods,
    opts: &Phase1Options,
) -> Result<Phase1> {
    let ctx = Ctx::new(traces, first_msgs);
    let es = merge_global(traces)?;
    let sources: Vec<&MethodId> = endpoints.sources.iter().filter(|q| ctx.spans.contains_key(*q)).collect();
    let per_source = opts.exec.map(&sources, |q| {
        let ds = ctx.ds(q, opts.remote_rule);
        let paths: Vec<Vec<MethodId>> = ds
            .iter()
            .filter(|m| endpoints.sinks.contains(*m))
            .flat_map(|sk| ctx.paths_for(&es, q, &ds, sk))
            .collect();
        ((*q).clone(), ds, paths)
    });
    let mut out = Phase1::default();
    for (q, ds, paths) in per_source {
        for p in paths.into_iter().filter(|p| !p.is_empty()) {
            if p.len() > opts.max_path_len {
                out.truncated += 1;
            } else {
                out.paths.insert(MethodFlowPath { methods: p });
            }
        }
        out.ds.insert(q, ds);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{stamp_lamport, EventKind, EventRecord};

    struct Builder {
        traces: Vec<ProcessTrace>,
    }

    impl Builder {
        fn new(n: u32) -> Self {
            Builder { traces: (0..n).map(|p| ProcessTrace::new(p, vec![])).collect() }
        }

        fn ev(&mut self, p: u32, m: &str, kind: EventKind) -> &mut Self {
            let t = &mut self.traces[p as usize];
            let seq = t.events.len() as u64 + 1;
            t.events.push(EventRecord::new(kind, MethodId::new(p, "C", m), seq));
            self
        }

        fn msg(&mut self, p: u32, m: &str, kind: EventKind, id: u64, peer: u32) -> &mut Self {
            self.ev(p, m, kind);
            let e = self.traces[p as usize].events.last_mut().unwrap();
            (e.msg_id, e.peer) = (Some(id), Some(peer));
            self
        }

        fn stamp(&self) -> (Vec<ProcessTrace>, FirstMsgMap) {
            stamp_lamport(&self.traces).unwrap()
        }
    }

    fn mid(p: u32, m: &str) -> MethodId {
        MethodId::new(p, "C", m)
    }

    use EventKind::{Entry, Recv, ReturnedInto, Send};

    #[test]
    fn last_method_of_single_trace_depends_on_itself() {
        let mut b = Builder::new(1);
        b.ev(0, "main", Entry).ev(0, "q", Entry);
        let (t, f) = b.stamp();
        let ds = method_ds(&mid(0, "q"), &t, &f, RemoteRule::Causal);
        assert_eq!(ds, [mid(0, "q")].into());
        assert!(method_ds(&mid(0, "none"), &t, &f, RemoteRule::Causal).is_empty());
    }

    #[test]
    fn silent_remote_process_contributes_nothing() {
        let mut b = Builder::new(2);
        b.ev(0, "q", Entry).ev(1, "m", Entry);
        let (t, f) = b.stamp();
        assert_eq!(method_ds(&mid(0, "q"), &t, &f, RemoteRule::Causal), [mid(0, "q")].into());
    }

    #[test]
    fn message_after_first_entry_pulls_in_remote_method() {
        let mut b = Builder::new(2);
        b.ev(0, "q", Entry).msg(0, "q", Send, 1, 1);
        b.ev(1, "early", Entry).msg(1, "early", Recv, 1, 0).ev(1, "m", Entry).ev(1, "early", ReturnedInto);
        let (t, f) = b.stamp();
        for rule in [RemoteRule::Causal, RemoteRule::FirstMessage] {
            let ds = method_ds(&mid(0, "q"), &t, &f, rule);
            assert_eq!(ds, [mid(0, "q"), mid(1, "early"), mid(1, "m")].into(), "{rule:?}");
        }
        // nothing flows back to process 0
        assert_eq!(method_ds(&mid(1, "m"), &t, &f, RemoteRule::Causal), [mid(1, "early"), mid(1, "m")].into());
    }

    #[test]
    fn causal_rule_follows_relays_the_first_message_rule_misses() {
        let mut b = Builder::new(3);
        b.ev(0, "q", Entry).msg(0, "q", Send, 1, 1);
        b.ev(1, "relay", Entry).msg(1, "relay", Recv, 1, 0).msg(1, "relay", Send, 2, 2);
        b.ev(2, "m", Entry).msg(2, "m", Recv, 2, 1).ev(2, "m", ReturnedInto);
        let (t, f) = b.stamp();
        assert!(method_ds(&mid(0, "q"), &t, &f, RemoteRule::Causal).contains(&mid(2, "m")));
        assert!(!method_ds(&mid(0, "q"), &t, &f, RemoteRule::FirstMessage).contains(&mid(2, "m")));
    }

    fn relay() -> (Vec<ProcessTrace>, FirstMsgMap) {
        let mut b = Builder::new(3);
        b.ev(0, "main", Entry).ev(0, "read", Entry).msg(0, "read", Send, 1, 1).ev(0, "read", ReturnedInto);
        b.ev(0, "main", ReturnedInto);
        b.ev(1, "serve", Entry).msg(1, "serve", Recv, 1, 0).ev(1, "serve", ReturnedInto);
        b.ev(1, "forward", Entry).msg(1, "forward", Send, 2, 2).ev(1, "forward", ReturnedInto);
        b.ev(1, "serve", ReturnedInto);
        b.ev(2, "main", Entry).msg(2, "main", Recv, 2, 1).ev(2, "main", ReturnedInto).ev(2, "store", Entry);
        b.stamp()
    }

    #[test]
    fn relay_path_spans_three_processes() {
        let (t, f) = relay();
        let ends = EndpointMethods { sources: [mid(0, "read")].into(), sinks: [mid(2, "store")].into() };
        let p1 = method_level_paths(&t, &f, &ends, &Phase1Options::default()).unwrap();
        let spans = all_spans(&t);
        assert!(!p1.paths.is_empty());
        for p in &p1.paths {
            assert!(p.is_ordered(&spans));
            assert_eq!((p.source(), p.sink()), (&mid(0, "read"), &mid(2, "store")));
        }
        assert!(p1
            .paths
            .iter()
            .any(|p| { (0..3).all(|proc| p.methods.iter().any(|m| m.process == proc)) }));
        assert!(p1.render().starts_with("path level=method p0.C.read -> "));
    }

    #[test]
    fn no_executed_source_or_no_reachable_sink_gives_no_paths() {
        let (t, f) = relay();
        let none = EndpointMethods { sources: [mid(0, "absent")].into(), sinks: [mid(2, "store")].into() };
        assert!(method_level_paths(&t, &f, &none, &Phase1Options::default()).unwrap().paths.is_empty());
        let backwards = EndpointMethods { sources: [mid(2, "store")].into(), sinks: [mid(0, "read")].into() };
        let p1 = method_level_paths(&t, &f, &backwards, &Phase1Options::default()).unwrap();
        assert!(p1.paths.is_empty());
        assert_eq!(p1.ds.len(), 1);
    }

    #[test]
    fn length_limit_drops_and_counts() {
        let (t, f) = relay();
        let ends = EndpointMethods { sources: [mid(0, "read")].into(), sinks: [mid(2, "store")].into() };
        let opts = Phase1Options { max_path_len: 2, ..Default::default() };
        let p1 = method_level_paths(&t, &f, &ends, &opts).unwrap();
        assert!(p1.paths.is_empty() && p1.truncated > 0);
    }
}
