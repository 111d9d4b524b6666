mod common;

use std::collections::{BTreeMap, BTreeSet};

use distflow::netsim::emit_graph_set;
use distflow::seads::{compute_deps, Configuration, ProcessDeps, QueryIndex};
use distflow::trace::MethodName;

const BITS: [u8; 6] = [
    Configuration::STATIC_GRAPH,
    Configuration::CONTEXT,
    Configuration::FLOW,
    Configuration::METHOD_EVENT,
    Configuration::STMT_COVERAGE,
    Configuration::INSTANCE_LEVEL,
];

#[test]
fn every_configuration_subsumes_full_and_keeps_truth() {
    let (mut local_checked, mut remote_checked) = (0usize, 0usize);
    for seed in 0..48 {
        let run = common::run(common::topology_for(seed), seed, 160);
        let traces = &run.sim.traces;
        let graphs = emit_graph_set(&run.model);
        let per_config: BTreeMap<Configuration, ProcessDeps> = Configuration::all_valid()
            .into_iter()
            .map(|c| {
                let deps = traces.iter().map(|t| (t.process, compute_deps(t, c, &graphs).unwrap())).collect();
                (c, deps)
            })
            .collect();
        let index = QueryIndex::new(traces);
        let names: BTreeSet<MethodName> = per_config[&Configuration::FULL].values().flat_map(|d| d.keys().map(|m| m.name())).collect();
        let merged = |c: Configuration| -> BTreeMap<&MethodName, _> { names.iter().map(|q| (q, index.merge(q, &per_config[&c]))).collect() };
        let full = merged(Configuration::FULL);

        for (c, deps) in &per_config {
            for (p, map) in &per_config[&Configuration::FULL] {
                for (m, set) in map {
                    assert!(deps[p][m].is_superset(set), "seed {seed} config {c}: {m}");
                }
            }
            for bit in BITS {
                let lower = c.without(bit);
                if lower != *c && lower.is_valid() {
                    for (p, map) in deps {
                        for (m, set) in map {
                            assert!(per_config[&lower][p][m].is_superset(set), "seed {seed}: {lower} vs {c} at {m}");
                        }
                    }
                }
            }
            let ours = merged(*c);
            for (q, set) in &full {
                assert!(ours[q].is_superset(set), "seed {seed} config {c}: query {q}");
            }
            for (m1, m2) in &run.sim.truth.local_dep {
                assert!(deps[&m1.process][m1].contains(m2), "seed {seed} config {c}: local {m1} -> {m2}");
                local_checked += 1;
            }
            for (m1, m2) in &run.sim.truth.dyn_dep {
                assert!(ours[&m1.name()].contains(m2), "seed {seed} config {c}: {m1} -> {m2}");
                remote_checked += usize::from(m1.process != m2.process);
            }
        }
    }
    assert!(local_checked > 1000 && remote_checked > 200, "{local_checked} local, {remote_checked} remote checks");
}

#[test]
fn unqueried_processes_stay_out_without_messages() {
    let run = common::run(distflow::netsim::Topology::PeerToPeer, 3, 120);
    let graphs = emit_graph_set(&run.model);
    let deps: ProcessDeps = run.sim.traces.iter().map(|t| (t.process, compute_deps(t, Configuration::FULL, &graphs).unwrap())).collect();
    let index = QueryIndex::new(&run.sim.traces);
    let unknown = MethodName::new("nowhere.Class", "void f()");
    assert!(index.merge(&unknown, &deps).is_empty());
}
