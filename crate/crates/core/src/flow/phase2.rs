//! Statement-level refinement of method-level paths.

use std::collections::{BTreeMap, BTreeSet};

use super::ddg::{build_with, find_paths, prune_ddg, Activation};
use super::phase1::{method_level_paths, Phase1, Phase1Options};
use super::splice::{splice_segments, InletOutletIndex, Junctions, SpliceRule};
use super::EndpointMethods;
use crate::graph::{relevant_methods, statement_coverage, SourceSinkConfig, StaticDepGraph};
use crate::trace::{merge_global, FirstMsgMap, MethodId, ProcId, ProcessTrace, StmtId};
use crate::Result;

/// Which events each phase consumes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PipelineMode {
    /// Events of statically relevant methods only.
    #[default]
    Default,
    /// All events, no relevance filtering.
    Sim,
    /// First entry and last method event per method for the method-level
    /// phase, then all events for the statement-level phase.
    Mul,
}

impl std::str::FromStr for PipelineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(PipelineMode::Default),
            "sim" => Ok(PipelineMode::Sim),
            "mul" => Ok(PipelineMode::Mul),
            _ => Err(format!("unknown mode `{s}` (expected default, sim or mul)")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Phase2Options {
    pub mode: PipelineMode,
    pub splice: SpliceRule,
    /// Statements per segment.
    pub max_path_len: usize,
    /// Paths per segment search and per splice.
    pub max_paths: usize,
    pub phase1: Phase1Options,
}

impl Default for Phase2Options {
    fn default() -> Self {
        Phase2Options {
            mode: PipelineMode::Default,
            splice: SpliceRule::Peer,
            max_path_len: 64,
            max_paths: 20_000,
            phase1: Phase1Options::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StmtPathKind {
    Intra,
    Spliced,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtFlowPath {
    pub kind: StmtPathKind,
    pub stmts: Vec<StmtId>,
}

impl StmtFlowPath {
    pub fn render(&self) -> String {
        let kind = match self.kind {
            StmtPathKind::Intra => "intra",
            StmtPathKind::Spliced => "spliced",
        };
        let ss: Vec<String> = self.stmts.iter().map(|s| s.to_string()).collect();
        format!("path level=stmt kind={kind} {}", ss.join(" -> "))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Phase2 {
    pub phase1: Phase1,
    pub paths: BTreeSet<StmtFlowPath>,
    /// Segment searches or splices cut short by a limit.
    pub truncated: usize,
}

impl Phase2 {
    pub fn count(&self, kind: StmtPathKind) -> usize {
        self.paths.iter().filter(|p| p.kind == kind).count()
    }

    pub fn render(&self) -> String {
        let mut out: String = self.paths.iter().map(|p| p.render() + "\n").collect();
        out.push_str(&format!(
            "summary intra={} inter={} truncated={}\n",
            self.count(StmtPathKind::Intra),
            self.count(StmtPathKind::Spliced),
            self.truncated
        ));
        out
    }
}

fn executed_by_process(traces: &[ProcessTrace], within: &BTreeSet<MethodId>) -> BTreeMap<ProcId, BTreeSet<MethodId>> {
    let mut out: BTreeMap<ProcId, BTreeSet<MethodId>> = BTreeMap::new();
    for t in traces {
        let set = out.entry(t.process).or_default();
        set.extend(t.method_events().map(|e| &e.method).filter(|m| within.contains(*m)).cloned());
    }
    out
}

/// Statement paths for one (source method, sink method) pair.
fn refine_pair(
    sdg: &StaticDepGraph,
    cfg: &SourceSinkConfig,
    traces: &[ProcessTrace],
    covered: &BTreeSet<StmtId>,
    methods: &BTreeSet<MethodId>,
    (q, sk): (&MethodId, &MethodId),
    opts: &Phase2Options,
) -> Result<(Vec<StmtFlowPath>, usize)> {
    let partial = sdg.partial_graph(methods);
    let local: Vec<ProcessTrace> = traces.iter().map(|t| t.filtered(|m| methods.contains(m))).collect();
    let es = merge_global(&local)?;
    let act = Activation::new(&es);
    let io = InletOutletIndex::new(&partial, cfg, &es);
    let (inlets, outlets) = (io.all_inlets(), io.all_outlets());
    let executed = executed_by_process(&local, methods);
    let junctions = Junctions::new(&es, opts.splice);
    let stmts_in = |m: &MethodId, set: BTreeSet<StmtId>| -> Vec<StmtId> {
        set.into_iter().filter(|s| partial.method_of(*s) == Some(m) && covered.contains(s)).collect()
    };
    let sources = stmts_in(q, cfg.source_stmts(&partial));
    let sinks = stmts_in(sk, cfg.sink_stmts(&partial));

    let mut out = Vec::new();
    let mut truncated = 0;
    let none = BTreeSet::new();
    for &s in &sources {
        for &t in &sinks {
            let ddg = prune_ddg(&build_with(&partial, s, t, &inlets, &outlets, &act), covered);
            if ddg.is_empty() {
                continue;
            }
            let (ps, pt) = (s_proc(&partial, s), s_proc(&partial, t));
            let exec_of = |p: ProcId| executed.get(&p).unwrap_or(&none);
            let mut search = |ins: &BTreeSet<StmtId>, outs: &BTreeSet<StmtId>, p: ProcId| {
                let r = find_paths(&ddg, ins, outs, exec_of(p), opts.max_path_len, opts.max_paths);
                truncated += r.truncated as usize;
                r.paths
            };
            if ps == pt {
                for p in search(&[s].into(), &[t].into(), ps) {
                    out.push(StmtFlowPath { kind: StmtPathKind::Intra, stmts: p });
                }
            }
            let sofps = search(&[s].into(), &io.outlets_of(&partial, ps), ps);
            let sifps = search(&io.inlets_of(&partial, pt), &[t].into(), pt);
            if sofps.is_empty() || sifps.is_empty() {
                continue;
            }
            let mut refps = BTreeMap::new();
            for &p in executed.keys().filter(|p| **p != ps && **p != pt) {
                let segs = search(&io.inlets_of(&partial, p), &io.outlets_of(&partial, p), p);
                if !segs.is_empty() {
                    refps.insert(p, segs);
                }
            }
            let junction = |o: StmtId, i: StmtId| junctions.holds(&partial, o, i);
            let (spliced, cut) = splice_segments(&partial, &sofps, &refps, &sifps, &junction, opts.max_paths);
            truncated += cut as usize;
            out.extend(spliced.into_iter().map(|p| StmtFlowPath { kind: StmtPathKind::Spliced, stmts: p }));
        }
    }
    Ok((out, truncated))
}

fn s_proc(g: &StaticDepGraph, s: StmtId) -> ProcId {
    g.process_of(s).expect("statement belongs to the graph")
}

/// Refines method-level paths to statement paths: intraprocess paths from
/// source to sink, and interprocess paths spliced from per-process segments.
pub fn phase2(
    sdg: &StaticDepGraph,
    phase1: &Phase1,
    traces: &[ProcessTrace],
    covered: &BTreeSet<StmtId>,
    cfg: &SourceSinkConfig,
    opts: &Phase2Options,
) -> Result<Phase2> {
    let pairs: Vec<((MethodId, MethodId), BTreeSet<MethodId>)> = phase1.path_methods().into_iter().collect();
    let results = opts.phase1.exec.map(&pairs, |((q, sk), methods)| {
        refine_pair(sdg, cfg, traces, covered, methods, (q, sk), opts)
    });
    let mut out = Phase2 { phase1: phase1.clone(), ..Default::default() };
    for r in results {
        let (paths, truncated) = r?;
        out.paths.extend(paths);
        out.truncated += truncated;
    }
    Ok(out)
}

/// Both phases over stamped traces, with events selected per `opts.mode`.
pub fn run_pipeline(
    sdg: &StaticDepGraph,
    traces: &[ProcessTrace],
    first_msgs: &FirstMsgMap,
    cfg: &SourceSinkConfig,
    opts: &Phase2Options,
) -> Result<Phase2> {
    cfg.require_endpoints()?;
    let endpoints = EndpointMethods::resolve(sdg, cfg);
    let (first_pass, second_pass): (Vec<ProcessTrace>, Vec<ProcessTrace>) = match opts.mode {
        PipelineMode::Sim => (traces.to_vec(), traces.to_vec()),
        PipelineMode::Default => {
            let relevant = relevant_methods(sdg, cfg)?;
            let kept: Vec<ProcessTrace> = traces.iter().map(|t| t.filtered(|m| relevant.contains(m))).collect();
            (kept.clone(), kept)
        }
        PipelineMode::Mul => (traces.iter().map(|t| t.first_last_only()).collect(), traces.to_vec()),
    };
    let p1 = method_level_paths(&first_pass, first_msgs, &endpoints, &opts.phase1)?;
    let covered = statement_coverage(sdg, &second_pass);
    phase2(sdg, &p1, &second_pass, &covered, cfg, opts)
}
