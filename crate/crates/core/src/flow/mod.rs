//! Source-to-sink information flow paths, first at method level and then
//! refined to statements.

mod ddg;
mod phase1;
mod phase2;
mod splice;

use std::collections::BTreeSet;

use crate::graph::{SourceSinkConfig, StaticDepGraph};
use crate::trace::MethodId;

pub use ddg::{build_ddg, find_paths, prune_ddg, DynDepGraph, PathSearch};
pub use phase1::{all_method_ds, method_ds, method_level_paths, MethodFlowPath, Phase1, Phase1Options, RemoteRule};
pub use phase2::{phase2, run_pipeline, Phase2, Phase2Options, PipelineMode, StmtFlowPath, StmtPathKind};
pub use splice::{junction_holds, splice_segments, InletOutletIndex, SpliceRule};

/// Methods enclosing a configured source and a configured sink.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EndpointMethods {
    pub sources: BTreeSet<MethodId>,
    pub sinks: BTreeSet<MethodId>,
}

impl EndpointMethods {
    pub fn resolve(graph: &StaticDepGraph, cfg: &SourceSinkConfig) -> Self {
        let methods = |stmts: BTreeSet<_>| stmts.into_iter().filter_map(|s| graph.method_of(s).cloned()).collect();
        EndpointMethods {
            sources: methods(cfg.source_stmts(graph)),
            sinks: methods(cfg.sink_stmts(graph)),
        }
    }
}
