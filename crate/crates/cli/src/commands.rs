use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use distflow::flow::{run_pipeline, Phase2Options, PipelineMode, RemoteRule, SpliceRule};
use distflow::graph::{read_graph, read_graph_set, write_graph_set, GraphSet, SourceSinkConfig};
use distflow::metrics::{
    attack_surface, classify as classify_table, correlate as correlate_table, ipc_metrics, path_stats, vulnerableness, DepData,
    FeatureTable, RccFormula, VulnFormula,
};
use distflow::netsim::{emit_graph_set, generate_program, simulate as run_simulation, source_sink_config, Scenario, Topology};
use distflow::qlearn::{LearnerParams, QLearner};
use distflow::seads::{
    answer_queries, arbitrate, parse_deps, render_deps, ArbiterParams, Budget, Configuration, CostModel, Fixed, ProcessDeps,
    SyntheticCosts,
};
use distflow::trace::{read_bundle, stamp_lamport, write_bundle, FirstMsgMap, ProcessTrace};
use distflow::{Error, Exec};

use crate::{
    ClassifyArgs, CliError, CorrelateArgs, FlowpathsArgs, MetricsArgs, ModeArg, QueryArgs, RccArg, RemoteArg, SeadsArgs, SimulateArgs,
    SpliceArg,
};

type CliResult = Result<(), CliError>;

const IPC_COLUMNS: [&str; 6] = ["RMC", "RCC", "CCC", "IPR", "CCL", "PLC"];

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Traces of a bundle with Lamport stamps, stamping them if the bundle was not.
fn load_traces(dir: &Path) -> Result<(Vec<ProcessTrace>, FirstMsgMap), Error> {
    let (traces, _) = read_bundle(dir)?;
    if traces.iter().flat_map(|t| &t.events).all(|e| e.is_stamped()) {
        let first = FirstMsgMap::from_traces(&traces);
        Ok((traces, first))
    } else {
        stamp_lamport(&traces)
    }
}

fn need<'a>(path: &'a Option<PathBuf>, run: &Option<PathBuf>, rel: &str, what: &str) -> Result<PathBuf, CliError> {
    match (path, run) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(r)) => Ok(r.join(rel)),
        (None, None) => Err(CliError::Usage(format!("either --run or --{what} is required"))),
    }
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let scenario = match &a.scenario {
        Some(path) => Scenario::read(path).map_err(|e| match e {
            Error::Io { .. } => CliError::Core(e),
            other => CliError::Usage(format!("bad scenario: {other}")),
        })?,
        None => {
            let topology: Topology = a.topology.parse().map_err(|e: String| CliError::Usage(e))?;
            Scenario { topology, seed: a.seed, length: a.length }
        }
    };
    let model = generate_program(&scenario);
    let sim = run_simulation(&model, &scenario);
    let scenario_json = serde_json::to_value(scenario).expect("scenario serializes");
    write(&a.out.join("scenario.json"), &(serde_json::to_string_pretty(&scenario_json).expect("json") + "\n"))?;
    write_bundle(&a.out.join("traces"), &sim.traces, scenario_json)?;
    write_graph_set(&a.out.join("graphs"), &emit_graph_set(&model))?;
    write(&a.out.join("sources_sinks.cfg"), &source_sink_config(&model).render())?;
    sim.truth.write(&a.out.join("truth.tsv"))?;
    println!(
        "simulated {} processes, {} events into {}",
        sim.traces.len(),
        sim.traces.iter().map(|t| t.events.len()).sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

pub fn flowpaths(a: FlowpathsArgs, exec: Exec) -> CliResult {
    let traces_dir = need(&a.traces, &a.run, "traces", "traces")?;
    let cfg_path = need(&a.config, &a.run, "sources_sinks.cfg", "config")?;
    let graph = match (&a.graph, &a.run) {
        (Some(p), _) => read_graph(p)?,
        (None, Some(r)) => {
            let mut set = read_graph_set(&r.join("graphs"))?;
            set.remove(&(true, true))
                .ok_or_else(|| CliError::Usage("run has no context- and flow-sensitive graph".into()))?
        }
        (None, None) => return Err(CliError::Usage("either --run or --graph is required".into())),
    };
    let cfg = SourceSinkConfig::read(&cfg_path)?;
    let (traces, first) = load_traces(&traces_dir)?;
    let mut opts = Phase2Options {
        mode: match a.mode {
            ModeArg::Default => PipelineMode::Default,
            ModeArg::Sim => PipelineMode::Sim,
            ModeArg::Mul => PipelineMode::Mul,
        },
        splice: match a.splice {
            SpliceArg::Peer => SpliceRule::Peer,
            SpliceArg::Strict => SpliceRule::Strict,
        },
        max_paths: a.max_paths,
        ..Phase2Options::default()
    };
    opts.phase1.remote_rule = match a.remote {
        RemoteArg::Causal => RemoteRule::Causal,
        RemoteArg::FirstMessage => RemoteRule::FirstMessage,
    };
    opts.phase1.max_path_len = a.path_limit;
    opts.phase1.exec = exec;
    let out = run_pipeline(&graph, &traces, &first, &cfg, &opts)?;
    let phase1 = format!("{}summary paths={} truncated={}\n", out.phase1.render(), out.phase1.paths.len(), out.phase1.truncated);
    let phase2 = out.render();
    match &a.out {
        Some(dir) => {
            write(&dir.join("phase1.txt"), &phase1)?;
            write(&dir.join("phase2.txt"), &phase2)?;
        }
        None => print!("{phase1}{phase2}"),
    }
    Ok(())
}

fn cost_model(arg: &str) -> Result<CostModel, Error> {
    match arg {
        "synthetic" => Ok(CostModel::Synthetic(SyntheticCosts::default())),
        "wallclock" => Ok(CostModel::Wallclock),
        path => CostModel::read_table(Path::new(path)),
    }
}

pub fn seads(a: SeadsArgs, exec: Exec) -> CliResult {
    if !(a.budget.is_finite() && a.budget > 0.0) {
        return Err(CliError::Usage("--budget must be positive".into()));
    }
    let pinned: Option<Configuration> = a.pin_config.as_deref().map(str::parse).transpose()?;
    let initial: Configuration = match pinned {
        Some(c) => c,
        None => a.initial.parse()?,
    };
    let base = LearnerParams {
        gamma: a.gamma,
        alpha: a.alpha,
        epsilon: a.epsilon,
        seed: a.seed,
        next_state_max: a.next_state_max,
        ..LearnerParams::default()
    };
    base.validate()?;
    let costs = cost_model(&a.cost_model)?;
    let graphs: GraphSet = read_graph_set(&a.run.join("graphs"))?;
    let (traces, _) = load_traces(&a.run.join("traces"))?;
    let mut params = ArbiterParams::new(a.tc.max(1), a.tt, Budget::split(a.budget));
    params.initial = initial;
    params.flush = !a.no_flush;

    let results = exec.map(&traces, |t| {
        match pinned {
            Some(c) => arbitrate(t, &params, &graphs, &costs, &mut Fixed(c)).map(|r| (r, None)),
            None => {
                let mut learner = QLearner::new(LearnerParams { seed: a.seed.wrapping_add(u64::from(t.process)), ..base })?;
                let r = arbitrate(t, &params, &graphs, &costs, &mut learner)?;
                Ok((r, Some(learner.table.dump())))
            }
        }
    });

    let out_dir = a.out.clone().unwrap_or_else(|| a.run.join("seads"));
    let mut deps = ProcessDeps::new();
    let mut summary = String::new();
    for (t, r) in traces.iter().zip(results) {
        let (arb, table) = r?;
        let p = t.process;
        write(&out_dir.join(format!("rounds-p{p}.log")), &arb.log())?;
        if let Some(table) = table {
            write(&out_dir.join(format!("qtable-p{p}.txt")), &table)?;
        }
        let timeouts = arb.rounds.iter().filter(|r| r.timeout).count();
        let within = arb.rounds.iter().filter(|r| r.cost <= r.budget).count();
        writeln!(summary, "process {p} rounds={} timeouts={timeouts} within_budget={within}", arb.rounds.len()).unwrap();
        deps.insert(p, arb.state.deps);
    }
    write(&out_dir.join("deps.tsv"), &render_deps(&deps))?;
    print!("{summary}");
    Ok(())
}

pub fn query(a: QueryArgs) -> CliResult {
    let seads_dir = a.seads.clone().unwrap_or_else(|| a.run.join("seads"));
    let deps_path = seads_dir.join("deps.tsv");
    let deps = parse_deps(&read(&deps_path)?, &deps_path)?;
    let (traces, _) = load_traces(&a.run.join("traces"))?;
    let mut requests = String::new();
    if let Some(path) = &a.requests {
        requests.push_str(&read(path)?);
        if !requests.ends_with('\n') {
            requests.push('\n');
        }
    }
    for m in &a.methods {
        writeln!(requests, "query {m}").unwrap();
    }
    if requests.trim().is_empty() {
        return Err(CliError::Usage("no queries given".into()));
    }
    print!("{}", answer_queries(&requests, &deps, &traces)?);
    Ok(())
}

fn parse_vuln(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("--vuln expects CVSS:YEARS, got `{s}`"));
    let (c, y) = s.split_once(':').ok_or_else(bad)?;
    Ok((c.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

pub fn metrics(a: MetricsArgs, exec: Exec) -> CliResult {
    let dep = match (&a.run, &a.deps) {
        (Some(run), None) => DepData::from_traces(&load_traces(&run.join("traces"))?.0, exec),
        (None, Some(path)) => DepData::read(path)?,
        _ => return Err(CliError::Usage("exactly one of --run or --deps is required".into())),
    };
    if let Some(path) = &a.dump_deps {
        write(path, &dep.render())?;
    }
    let formula = match a.rcc {
        RccArg::Prose => RccFormula::Prose,
        RccArg::Table => RccFormula::Table,
    };
    let mut out = ipc_metrics(&dep, formula).render();
    if let Some(v) = &a.attack_surface {
        let n = |x: f64| -> Result<u64, CliError> {
            (x >= 0.0 && x.fract() == 0.0)
                .then_some(x as u64)
                .ok_or_else(|| CliError::Usage("attack surface counts must be non-negative integers".into()))
        };
        let s = attack_surface(n(v[0])?, n(v[1])?, n(v[2])?, v[3])?;
        writeln!(out, "quality\tattack_surface\t{s:.10}").unwrap();
    }
    if a.vuln_unscored.is_some() || !a.vulns.is_empty() {
        let scored: Vec<(f64, f64)> = a.vulns.iter().map(|s| parse_vuln(s)).collect::<Result<_, _>>()?;
        let formula = if a.vuln_corrected { VulnFormula::Corrected } else { VulnFormula::Printed };
        let v = vulnerableness(a.vuln_unscored.unwrap_or(0), &scored, formula);
        writeln!(out, "quality\tvulnerableness\t{v:.10}").unwrap();
    }
    if let (Some(path), Some(ksloc)) = (&a.paths, a.ksloc) {
        let lengths: Vec<usize> = read(path)?
            .lines()
            .filter_map(|l| l.strip_prefix("path level=stmt "))
            .map(|l| l.split(" -> ").count())
            .collect();
        let (density, mean) = path_stats(&lengths, ksloc)?;
        writeln!(out, "quality\tpaths_per_ksloc\t{density:.10}").unwrap();
        writeln!(out, "quality\tmean_path_length_per_ksloc\t{mean:.10}").unwrap();
    }
    print!("{out}");
    Ok(())
}

pub fn correlate(a: CorrelateArgs) -> CliResult {
    let table = FeatureTable::read(&a.table)?;
    let rows = if a.rows.is_empty() {
        table.columns.iter().filter(|c| IPC_COLUMNS.contains(&c.as_str())).cloned().collect()
    } else {
        a.rows
    };
    let cols = if a.cols.is_empty() {
        table.columns.iter().filter(|c| !rows.contains(c)).cloned().collect()
    } else {
        a.cols
    };
    if rows.is_empty() || cols.is_empty() {
        return Err(CliError::Usage("need at least one row metric and one column metric".into()));
    }
    print!("{}", correlate_table(&table, &rows, &cols)?.render());
    Ok(())
}

pub fn classify(a: ClassifyArgs) -> CliResult {
    let table = FeatureTable::read(&a.table)?;
    let columns = if a.columns.is_empty() { table.columns.clone() } else { a.columns };
    print!("{}", classify_table(&table, &columns, a.seed)?.render());
    Ok(())
}
