use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::DsMap;
use crate::trace::{EventKind, EventRef, MethodId, MethodName, MethodSpan, ProcId, ProcessTrace};
use crate::trace::CausalIndex;
use crate::{Error, Result};

/// Per-process dependence maps, as produced by one worker each.
pub type ProcessDeps = BTreeMap<ProcId, DsMap>;

/// `ds` lines: the keyed method, then one member of its set, as
/// tab-separated `process class method` triples.
pub fn render_deps(deps: &ProcessDeps) -> String {
    let mut out = String::new();
    let id = |m: &MethodId| format!("{}\t{}\t{}", m.process, m.class_name, m.method_name);
    for map in deps.values() {
        for (m, set) in map {
            for d in set {
                out.push_str(&format!("ds\t{}\t{}\n", id(m), id(d)));
            }
        }
    }
    out
}

pub fn parse_deps(text: &str, path: &Path) -> Result<ProcessDeps> {
    let mut out = ProcessDeps::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 || f[0] != "ds" {
            return Err(Error::parse(path, n + 1, format!("expected a `ds` line with six fields, got `{line}`")));
        }
        let mid = |f: &[&str]| -> Result<MethodId> {
            let p = f[0].parse().map_err(|_| Error::parse(path, n + 1, format!("bad process `{}`", f[0])))?;
            Ok(MethodId::new(p, f[1], f[2]))
        };
        let (m, d) = (mid(&f[1..4])?, mid(&f[4..7])?);
        out.entry(m.process).or_default().entry(m).or_default().insert(d);
    }
    Ok(out)
}

/// Message and span facts used to merge per-process results for a query.
pub struct QueryIndex<'a> {
    traces: &'a [ProcessTrace],
    causal: CausalIndex,
    spans: BTreeMap<MethodId, MethodSpan>,
    /// msg id → (sending process, index of the send in its trace)
    sends: HashMap<u64, (ProcId, usize)>,
    /// per receiving process: (msg id, ts) of each recv in order
    recvs: BTreeMap<ProcId, Vec<(u64, u64)>>,
}

impl<'a> QueryIndex<'a> {
    pub fn new(traces: &'a [ProcessTrace]) -> Self {
        let mut sends = HashMap::new();
        let mut recvs: BTreeMap<ProcId, Vec<(u64, u64)>> = BTreeMap::new();
        for t in traces {
            for (i, e) in t.events.iter().enumerate() {
                match (e.kind, e.msg_id) {
                    (EventKind::Send, Some(id)) => {
                        sends.insert(id, (t.process, i));
                    }
                    (EventKind::Recv, Some(id)) => recvs.entry(t.process).or_default().push((id, e.ts)),
                    _ => {}
                }
            }
        }
        QueryIndex {
            traces,
            causal: CausalIndex::new(traces),
            spans: crate::trace::all_spans(traces),
            sends,
            recvs,
        }
    }

    /// Instances of `q` that executed, with their first entry events.
    fn instances(&self, q: &MethodName) -> Vec<(MethodId, EventRef)> {
        self.traces
            .iter()
            .filter_map(|t| {
                let id = MethodId::new(t.process, &q.class_name, &q.method_name);
                let span = self.spans.get(&id)?;
                Some((id, EventRef { process: t.process, seq: span.first_seq }))
            })
            .collect()
    }

    /// Merged dependence set of `q` across all processes.
    pub fn merge(&self, q: &MethodName, deps: &ProcessDeps) -> BTreeSet<MethodId> {
        let instances = self.instances(q);
        let mut out = BTreeSet::new();
        let own = |m: &MethodId| deps.get(&m.process).and_then(|d| d.get(m)).cloned().unwrap_or_else(|| BTreeSet::from([m.clone()]));
        for (id, _) in &instances {
            out.extend(own(id));
        }
        let frontiers: Vec<_> = instances.iter().map(|(_, fe)| self.causal.frontier(*fe)).collect();
        let qualifies = |msg: u64| {
            self.sends.get(&msg).is_some_and(|(p, idx)| {
                frontiers.iter().any(|f| f.get(p).copied().flatten().is_some_and(|r| r <= *idx))
            })
        };
        for (proc, recvs) in &self.recvs {
            // the earliest qualifying arrival admits the most methods
            let Some(arrival) = recvs.iter().filter(|(id, _)| qualifies(*id)).map(|(_, ts)| *ts).min() else {
                continue;
            };
            for (m, ds) in deps.get(proc).into_iter().flatten() {
                if self.spans.get(m).is_some_and(|s| s.last >= arrival) {
                    out.extend(ds.iter().cloned());
                }
            }
        }
        out
    }
}

/// Merges per-process dependence sets for the query method `q`.
///
/// Sets of every instance of `q` are included, plus the sets of methods in any
/// process that ran at or after the arrival of a message causally following
/// the first entry of some instance of `q`.
pub fn merge_query(q: &MethodName, deps: &ProcessDeps, traces: &[ProcessTrace]) -> BTreeSet<MethodId> {
    QueryIndex::new(traces).merge(q, deps)
}

/// Answers `query <Class: method>` lines, one `result` block per request.
pub fn answer_queries(requests: &str, deps: &ProcessDeps, traces: &[ProcessTrace]) -> Result<String> {
    let index = QueryIndex::new(traces);
    let mut out = String::new();
    for (n, line) in requests.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::parse(Path::new("<queries>"), n + 1, msg);
        let rest = line.strip_prefix("query").filter(|r| r.starts_with(char::is_whitespace));
        let q: MethodName = rest.ok_or_else(|| bad(format!("expected `query <method>`, got `{line}`")))?.parse().map_err(bad)?;
        let ds = index.merge(&q, deps);
        out.push_str(&format!("result {q} {}\n", ds.len()));
        for m in ds {
            out.push_str(&format!("  {m}\n"));
        }
        out.push_str("end\n");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{stamp_lamport, EventRecord};

    fn mid(p: ProcId, n: &str) -> MethodId {
        MethodId::new(p, "app.C", n)
    }

    fn ev(kind: EventKind, p: ProcId, n: &str, seq: u64) -> EventRecord {
        EventRecord::new(kind, mid(p, n), seq)
    }

    /// P0 runs q then sends; P1 runs `early` before the recv and `late` after it.
    fn fixture(with_message: bool) -> Vec<ProcessTrace> {
        use EventKind::*;
        let mut p0 = vec![ev(Entry, 0, "main", 0), ev(Entry, 0, "q", 1), ev(ReturnedInto, 0, "main", 2)];
        let mut p1 = vec![ev(Entry, 1, "main", 0), ev(Entry, 1, "early", 1), ev(ReturnedInto, 1, "main", 2)];
        if with_message {
            p0.push(ev(Send, 0, "main", 3).with_msg(7, 1));
            p1.push(ev(Recv, 1, "main", 3).with_msg(7, 0));
        }
        p1.push(ev(Entry, 1, "late", 4));
        p1.push(ev(ReturnedInto, 1, "main", 5));
        stamp_lamport(&[ProcessTrace::new(0, p0), ProcessTrace::new(1, p1)]).unwrap().0
    }

    fn deps() -> ProcessDeps {
        let set = |ms: &[MethodId]| ms.iter().cloned().collect::<BTreeSet<_>>();
        BTreeMap::from([
            (0, BTreeMap::from([(mid(0, "q"), set(&[mid(0, "q")])), (mid(0, "main"), set(&[mid(0, "main")]))])),
            (
                1,
                BTreeMap::from([
                    (mid(1, "early"), set(&[mid(1, "early")])),
                    (mid(1, "late"), set(&[mid(1, "late")])),
                ]),
            ),
        ])
    }

    #[test]
    fn unexecuted_query_is_empty() {
        let traces = fixture(true);
        assert!(merge_query(&MethodName::new("app.C", "nope"), &deps(), &traces).is_empty());
    }

    #[test]
    fn remote_sets_merge_only_after_a_qualifying_message() {
        let q = MethodName::new("app.C", "q");
        let with = merge_query(&q, &deps(), &fixture(true));
        assert_eq!(with, BTreeSet::from([mid(0, "q"), mid(1, "late")]));
        let without = merge_query(&q, &deps(), &fixture(false));
        assert_eq!(without, BTreeSet::from([mid(0, "q")]));
    }

    #[test]
    fn deps_round_trip() {
        let d = deps();
        assert_eq!(parse_deps(&render_deps(&d), Path::new("d")).unwrap(), d);
        assert!(parse_deps("ds\t0\tA", Path::new("d")).is_err());
    }

    #[test]
    fn query_protocol() {
        let out = answer_queries("# c\nquery app.C: q\n", &deps(), &fixture(true)).unwrap();
        assert_eq!(out, "result app.C: q 2\n  p0.app.C.q\n  p1.app.C.late\nend\n");
        assert!(answer_queries("ask app.C: q", &deps(), &fixture(true)).is_err());
    }
}
