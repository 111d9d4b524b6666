//! Interprocess coupling and cohesion metrics, quality scalars, and the
//! statistics used to relate them.

mod ipc;
mod quality;
mod stats;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::exec::Exec;
use crate::flow::{all_method_ds, RemoteRule};
use crate::trace::{EventKind, FirstMsgMap, MethodId, ProcId, ProcessTrace};
use crate::{Error, Result};

pub use ipc::{ipc_metrics, ClassKey, IpcReport, RccFormula};
pub use quality::{attack_surface, path_stats, vulnerableness, VulnFormula};
pub use stats::{kmeans2, spearman, KMeans, Spearman, SIGNIFICANCE};
pub use table::{classify, correlate, Classification, CorrelationMatrix, FeatureTable};

/// Dependence facts of one execution, split by process boundary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DepData {
    /// methods of the same process that depend on the key
    pub local_ds: BTreeMap<MethodId, BTreeSet<MethodId>>,
    /// methods of other processes that depend on the key
    pub remote_ds: BTreeMap<MethodId, BTreeSet<MethodId>>,
    pub executed: BTreeSet<MethodId>,
    /// message count per (sender, receiver)
    pub messages: BTreeMap<(ProcId, ProcId), u64>,
}

impl DepData {
    /// Splits the dependence set of every executed method. A method never
    /// counts as depending on itself.
    pub fn from_sets(executed: BTreeSet<MethodId>, ds: &BTreeMap<MethodId, BTreeSet<MethodId>>, messages: BTreeMap<(ProcId, ProcId), u64>) -> Self {
        let mut out = DepData { executed, messages, ..DepData::default() };
        for m in &out.executed {
            let set = ds.get(m).into_iter().flatten().filter(|d| *d != m && out.executed.contains(*d));
            let (local, remote): (BTreeSet<MethodId>, BTreeSet<MethodId>) = set.cloned().partition(|d| d.process == m.process);
            out.local_ds.insert(m.clone(), local);
            out.remote_ds.insert(m.clone(), remote);
        }
        out
    }

    /// Dependence data from stamped traces, using the happens-before
    /// dependence approximation.
    pub fn from_traces(traces: &[ProcessTrace], exec: Exec) -> Self {
        let first_msgs = FirstMsgMap::from_traces(traces);
        let ds = all_method_ds(traces, &first_msgs, RemoteRule::Causal, exec);
        let mut messages = BTreeMap::new();
        for e in traces.iter().flat_map(|t| &t.events) {
            if let (EventKind::Send, Some(peer)) = (e.kind, e.peer) {
                *messages.entry((e.process(), peer)).or_insert(0) += 1;
            }
        }
        DepData::from_sets(ds.keys().cloned().collect(), &ds, messages)
    }

    /// Checks the process split and that every set member executed.
    pub fn validate(&self) -> Result<()> {
        for (sets, local) in [(&self.local_ds, true), (&self.remote_ds, false)] {
            for (m, set) in sets {
                if !self.executed.contains(m) {
                    return Err(Error::Config(format!("{m} has a dependence set but never executed")));
                }
                if let Some(d) = set.iter().find(|d| !self.executed.contains(*d) || (d.process == m.process) != local) {
                    let which = if local { "local" } else { "remote" };
                    return Err(Error::Config(format!("{d} cannot be in the {which} set of {m}")));
                }
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let id = |m: &MethodId| format!("{}\t{}\t{}", m.process, m.class_name, m.method_name);
        for m in &self.executed {
            writeln!(out, "exec\t{}", id(m)).unwrap();
        }
        for (kind, sets) in [("local", &self.local_ds), ("remote", &self.remote_ds)] {
            for (m, set) in sets {
                for d in set {
                    writeln!(out, "{kind}\t{}\t{}", id(m), id(d)).unwrap();
                }
            }
        }
        for ((s, r), n) in &self.messages {
            writeln!(out, "msg\t{s}\t{r}\t{n}").unwrap();
        }
        out
    }

    /// Parses the tab-separated format written by [`DepData::render`].
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut out = DepData::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::parse(path, n + 1, msg);
            let f: Vec<&str> = line.split('\t').collect();
            let proc = |s: &str| s.parse::<ProcId>().map_err(|_| bad(format!("bad process `{s}`")));
            let mid = |f: &[&str]| -> Result<MethodId> { Ok(MethodId::new(proc(f[0])?, f[1], f[2])) };
            match (f[0], f.len()) {
                ("exec", 4) => {
                    out.executed.insert(mid(&f[1..4])?);
                }
                ("local" | "remote", 7) => {
                    let sets = if f[0] == "local" { &mut out.local_ds } else { &mut out.remote_ds };
                    sets.entry(mid(&f[1..4])?).or_default().insert(mid(&f[4..7])?);
                }
                ("msg", 4) => {
                    let count = f[3].parse::<u64>().map_err(|_| bad(format!("bad count `{}`", f[3])))?;
                    *out.messages.entry((proc(f[1])?, proc(f[2])?)).or_insert(0) += count;
                }
                _ => return Err(bad(format!("unrecognized line `{line}`"))),
            }
        }
        for m in &out.executed {
            out.local_ds.entry(m.clone()).or_default();
            out.remote_ds.entry(m.clone()).or_default();
        }
        out.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DepData::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: ProcId, c: &str, n: &str) -> MethodId {
        MethodId::new(p, c, n)
    }

    #[test]
    fn split_excludes_self_and_unexecuted() {
        let executed = BTreeSet::from([m(0, "A", "f"), m(0, "A", "g"), m(1, "B", "h")]);
        let ds = BTreeMap::from([(m(0, "A", "f"), BTreeSet::from([m(0, "A", "f"), m(0, "A", "g"), m(1, "B", "h"), m(2, "Z", "z")]))]);
        let d = DepData::from_sets(executed, &ds, BTreeMap::new());
        assert_eq!(d.local_ds[&m(0, "A", "f")], BTreeSet::from([m(0, "A", "g")]));
        assert_eq!(d.remote_ds[&m(0, "A", "f")], BTreeSet::from([m(1, "B", "h")]));
        assert!(d.local_ds[&m(1, "B", "h")].is_empty());
        d.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let executed = BTreeSet::from([m(0, "A", "void f()"), m(1, "B", "int h(int)")]);
        let ds = BTreeMap::from([(m(0, "A", "void f()"), BTreeSet::from([m(1, "B", "int h(int)")]))]);
        let d = DepData::from_sets(executed, &ds, BTreeMap::from([((0, 1), 3)]));
        assert_eq!(DepData::parse(&d.render(), Path::new("d")).unwrap(), d);
    }

    #[test]
    fn parse_rejects_bad_split() {
        let text = "exec\t0\tA\tf\nexec\t0\tA\tg\nremote\t0\tA\tf\t0\tA\tg\n";
        assert!(DepData::parse(text, Path::new("d")).is_err());
        assert!(DepData::parse("what\n", Path::new("d")).is_err());
    }
}
