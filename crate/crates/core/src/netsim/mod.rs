//! Deterministic simulator of small message-passing programs.
//!
//! A [`Scenario`] seeds a [`ProgramModel`]; [`simulate`] runs it under a
//! seeded scheduler and records traces plus the dependencies that actually
//! occurred, and [`emit_static_graph`] derives static dependence graphs at
//! each sensitivity level.

mod emit;
mod program;
mod sim;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trace::{MethodId, ProcId, StmtId};
use crate::{Error, Result};

pub use emit::{emit_graph_set, emit_static_graph, source_sink_config};
pub use program::{generate_program, MethodModel, ProcModel, ProgramModel, Stmt, Var, RECV_API, SEND_API};
pub use sim::{simulate, Simulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Topology {
    ClientServer,
    /// Ring of three or four peers.
    PeerToPeer,
    NTier(u32),
}

impl Topology {
    /// Processes `p` exchanges messages with.
    pub fn peers(&self, p: ProcId, nprocs: u32) -> Vec<ProcId> {
        match self {
            Topology::ClientServer => vec![1 - p],
            Topology::PeerToPeer => {
                let mut v = vec![(p + 1) % nprocs, (p + nprocs - 1) % nprocs];
                v.dedup();
                v
            }
            Topology::NTier(_) => [p.checked_sub(1), (p + 1 < nprocs).then_some(p + 1)]
                .into_iter()
                .flatten()
                .collect(),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::ClientServer => f.write_str("client_server"),
            Topology::PeerToPeer => f.write_str("peer_to_peer"),
            Topology::NTier(n) => write!(f, "n_tier({n})"),
        }
    }
}

impl FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "client_server" => Ok(Topology::ClientServer),
            "peer_to_peer" => Ok(Topology::PeerToPeer),
            other => {
                let n = other
                    .strip_prefix("n_tier(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|n| n.trim().parse::<u32>().ok())
                    .ok_or_else(|| format!("unknown topology `{other}`"))?;
                if n < 2 {
                    return Err("n_tier needs at least 2 tiers".into());
                }
                Ok(Topology::NTier(n))
            }
        }
    }
}

impl TryFrom<String> for Topology {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Topology> for String {
    fn from(t: Topology) -> String {
        t.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub seed: u64,
    /// Processes stop starting new rounds once this many events were emitted.
    pub length: u64,
}

impl Scenario {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

/// Dependencies that occurred during a simulated run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// `(m1, m2)`: data produced in `m1` was used by `m2`.
    pub dyn_dep: BTreeSet<(MethodId, MethodId)>,
    /// Pairs of `dyn_dep` whose flow stayed inside one process.
    pub local_dep: BTreeSet<(MethodId, MethodId)>,
    /// Statement sequences along which source data reached a sink.
    pub dyn_paths: BTreeSet<Vec<StmtId>>,
}

fn method_fields(m: &MethodId) -> String {
    format!("{}\t{}\t{}", m.process, m.class_name, m.method_name)
}

impl GroundTruth {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.dyn_dep {
            let scope = if self.local_dep.contains(&(a.clone(), b.clone())) { "local" } else { "remote" };
            out.push_str(&format!("dep\t{scope}\t{}\t{}\n", method_fields(a), method_fields(b)));
        }
        for p in &self.dyn_paths {
            let stmts: Vec<String> = p.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("path\t{}\n", stmts.join(" ")));
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut gt = GroundTruth::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| Error::parse(path, n + 1, msg.to_string());
            let f: Vec<&str> = line.split('\t').collect();
            match f[0] {
                "dep" if f.len() == 8 => {
                    let m = |i: usize| -> Result<MethodId> {
                        let p = f[i].parse().map_err(|_| err("bad process id"))?;
                        Ok(MethodId::new(p, f[i + 1], f[i + 2]))
                    };
                    let pair = (m(2)?, m(5)?);
                    match f[1] {
                        "local" => {
                            gt.local_dep.insert(pair.clone());
                        }
                        "remote" => {}
                        _ => return Err(err("scope must be local or remote")),
                    }
                    gt.dyn_dep.insert(pair);
                }
                "path" if f.len() == 2 => {
                    let stmts = f[1]
                        .split_whitespace()
                        .map(|s| s.parse().map(StmtId))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| err("bad statement id"))?;
                    gt.dyn_paths.insert(stmts);
                }
                _ => return Err(err("unrecognized record")),
            }
        }
        Ok(gt)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
