//! Tab-separated graph files and the variant manifest.
//!
//! ```text
//! node  <stmt> <method> <class> <proc> [api=<name>] [guard=<stmt>:<T|F>]
//! edge  <kind> <from> <to>
//! cfg   <from> <to>
//! entry <stmt>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{StaticDepGraph, StmtNode};
use crate::trace::{MethodId, StmtId};
use crate::{Error, Result};

pub fn render_graph(g: &StaticDepGraph) -> String {
    let mut out = String::new();
    for (s, n) in &g.nodes {
        out.push_str(&format!(
            "node\t{s}\t{}\t{}\t{}",
            n.method.method_name, n.method.class_name, n.method.process
        ));
        if let Some(api) = &n.api {
            out.push_str(&format!("\tapi={api}"));
        }
        if let Some(b) = &n.guard {
            out.push_str(&format!("\tguard={b}"));
        }
        out.push('\n');
    }
    for e in &g.edges {
        out.push_str(&format!("edge\t{}\t{}\t{}\n", e.kind, e.from, e.to));
    }
    for (s, tos) in &g.succ {
        for t in tos {
            out.push_str(&format!("cfg\t{s}\t{t}\n"));
        }
    }
    for s in &g.entries {
        out.push_str(&format!("entry\t{s}\n"));
    }
    out
}

pub fn parse_graph(text: &str, path: &Path) -> Result<StaticDepGraph> {
    let mut g = StaticDepGraph::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::parse(path, n + 1, msg);
        let f: Vec<&str> = line.split('\t').collect();
        let stmt = |i: usize| -> Result<StmtId> {
            let raw = f.get(i).ok_or_else(|| err(format!("missing field {}", i + 1)))?;
            raw.parse::<u32>()
                .map(StmtId)
                .map_err(|e| err(format!("bad statement id `{raw}`: {e}")))
        };
        match f[0] {
            "node" if f.len() >= 5 => {
                let proc = f[4].parse().map_err(|e| err(format!("bad process `{}`: {e}", f[4])))?;
                let mut node = StmtNode {
                    method: MethodId::new(proc, f[3], f[2]),
                    api: None,
                    guard: None,
                };
                for extra in &f[5..] {
                    match extra.split_once('=') {
                        Some(("api", a)) => node.api = Some(a.to_string()),
                        Some(("guard", b)) => node.guard = Some(b.parse().map_err(err)?),
                        _ => {}
                    }
                }
                g.add_node(stmt(1)?, node);
            }
            "edge" if f.len() == 4 => {
                let kind = f[1].parse().map_err(err)?;
                g.add_edge(kind, stmt(2)?, stmt(3)?);
            }
            "cfg" if f.len() == 3 => g.add_cfg(stmt(1)?, stmt(2)?),
            "entry" if f.len() == 2 => {
                g.entries.insert(stmt(1)?);
            }
            _ => return Err(err(format!("unrecognized record `{line}`"))),
        }
    }
    g.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(g)
}

pub fn write_graph(path: &Path, g: &StaticDepGraph) -> Result<()> {
    fs::write(path, render_graph(g)).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: &Path) -> Result<StaticDepGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, path)
}

/// Graph variants keyed by `(context_sensitive, flow_sensitive)`.
pub type GraphSet = BTreeMap<(bool, bool), StaticDepGraph>;

fn bits_key(ctx: bool, flow: bool) -> String {
    format!("{}{}", ctx as u8, flow as u8)
}

/// Writes each variant plus `graphs.json`, which maps `"<ctx><flow>"` to a file name.
pub fn write_graph_set(dir: &Path, set: &GraphSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = BTreeMap::new();
    for ((ctx, flow), g) in set {
        let key = bits_key(*ctx, *flow);
        let name = format!("graph-{key}.tsv");
        write_graph(&dir.join(&name), g)?;
        manifest.insert(key, name);
    }
    let path = dir.join("graphs.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_graph_set(dir: &Path) -> Result<GraphSet> {
    let path = dir.join("graphs.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?;
    let mut set = GraphSet::new();
    for (key, name) in manifest {
        let bits = match key.as_str() {
            "00" => (false, false),
            "01" => (false, true),
            "10" => (true, false),
            "11" => (true, true),
            _ => return Err(Error::parse(&path, 0, format!("bad variant key `{key}`"))),
        };
        set.insert(bits, read_graph(&dir.join(name))?);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::chain5;
    use super::super::EdgeKind;
    use super::*;
    use crate::trace::BranchId;

    #[test]
    fn graph_text_round_trip() {
        let mut g = chain5();
        let n = g.nodes.get_mut(&StmtId(2)).unwrap();
        n.api = Some("send".into());
        n.guard = Some(BranchId { stmt: StmtId(7), taken: false });
        g.add_edge(EdgeKind::InterAdjacent, StmtId(5), StmtId(1));
        let back = parse_graph(&render_graph(&g), Path::new("g")).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn dangling_edge_rejected() {
        let text = "node\t1\tm\tC\t0\nedge\tintra_data\t1\t2\n";
        assert!(parse_graph(text, Path::new("g")).is_err());
    }

    #[test]
    fn graph_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set: GraphSet = [((true, false), chain5()), ((false, false), StaticDepGraph::default())].into();
        write_graph_set(dir.path(), &set).unwrap();
        assert_eq!(read_graph_set(dir.path()).unwrap(), set);
    }
}
