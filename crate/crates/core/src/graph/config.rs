//! Source/sink and message-API configuration.
//!
//! ```text
//! # comment
//! source stmt 12
//! source method org.Client: void run()
//! sink stmt 40
//! send_api sendMessage
//! recv_api readMessage
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use super::StaticDepGraph;
use crate::trace::{MethodName, StmtId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Designator {
    Stmt(StmtId),
    /// Every statement of every method with this name, in any process.
    Method(MethodName),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceSinkConfig {
    pub sources: Vec<Designator>,
    pub sinks: Vec<Designator>,
    pub send_apis: BTreeSet<String>,
    pub recv_apis: BTreeSet<String>,
}

impl SourceSinkConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = SourceSinkConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::parse(path, n + 1, msg);
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "source" | "sink" => {
                    let d = parse_designator(rest).map_err(err)?;
                    if key == "source" {
                        cfg.sources.push(d);
                    } else {
                        cfg.sinks.push(d);
                    }
                }
                "send_api" | "recv_api" if !rest.is_empty() => {
                    let set = if key == "send_api" { &mut cfg.send_apis } else { &mut cfg.recv_apis };
                    set.insert(rest.to_string());
                }
                _ => return Err(err(format!("unrecognized line `{line}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, ds) in [("source", &self.sources), ("sink", &self.sinks)] {
            for d in ds {
                match d {
                    Designator::Stmt(s) => out.push_str(&format!("{key} stmt {s}\n")),
                    Designator::Method(m) => out.push_str(&format!("{key} method {m}\n")),
                }
            }
        }
        for a in &self.send_apis {
            out.push_str(&format!("send_api {a}\n"));
        }
        for a in &self.recv_apis {
            out.push_str(&format!("recv_api {a}\n"));
        }
        out
    }

    pub fn require_endpoints(&self) -> Result<()> {
        if self.sources.is_empty() || self.sinks.is_empty() {
            return Err(Error::Config("at least one source and one sink are required".into()));
        }
        Ok(())
    }

    /// Statements matched by a set of designators.
    pub fn resolve(graph: &StaticDepGraph, ds: &[Designator]) -> BTreeSet<StmtId> {
        let mut out = BTreeSet::new();
        for d in ds {
            match d {
                Designator::Stmt(s) if graph.nodes.contains_key(s) => {
                    out.insert(*s);
                }
                Designator::Stmt(_) => {}
                Designator::Method(name) => out.extend(
                    graph
                        .nodes
                        .iter()
                        .filter(|(_, n)| &n.method.name() == name)
                        .map(|(s, _)| *s),
                ),
            }
        }
        out
    }

    pub fn source_stmts(&self, graph: &StaticDepGraph) -> BTreeSet<StmtId> {
        Self::resolve(graph, &self.sources)
    }

    pub fn sink_stmts(&self, graph: &StaticDepGraph) -> BTreeSet<StmtId> {
        Self::resolve(graph, &self.sinks)
    }

    fn api_stmts<'a>(&'a self, graph: &'a StaticDepGraph, apis: &'a BTreeSet<String>) -> impl Iterator<Item = StmtId> + 'a {
        graph
            .nodes
            .iter()
            .filter(move |(_, n)| n.api.as_ref().is_some_and(|a| apis.contains(a)))
            .map(|(s, _)| *s)
    }

    pub fn send_sites(&self, graph: &StaticDepGraph) -> BTreeSet<StmtId> {
        self.api_stmts(graph, &self.send_apis).collect()
    }

    pub fn recv_sites(&self, graph: &StaticDepGraph) -> BTreeSet<StmtId> {
        self.api_stmts(graph, &self.recv_apis).collect()
    }
}

fn parse_designator(s: &str) -> std::result::Result<Designator, String> {
    let (kind, rest) = s.split_once(char::is_whitespace).ok_or_else(|| format!("bad designator `{s}`"))?;
    match kind {
        "stmt" => rest
            .trim()
            .parse::<u32>()
            .map(|n| Designator::Stmt(StmtId(n)))
            .map_err(|e| format!("bad statement id `{}`: {e}", rest.trim())),
        "method" => rest.parse::<MethodName>().map(Designator::Method),
        _ => Err(format!("designator must be `stmt N` or `method NAME`, got `{s}`")),
    }
}
