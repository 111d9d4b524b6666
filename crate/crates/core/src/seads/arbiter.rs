use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use super::deps::graph_for;
use super::{compute_deps, Budget, Configuration, DsMap};
use crate::graph::GraphSet;
use crate::trace::{EventRecord, ProcId, ProcessTrace};
use crate::{Error, Result};

/// Chooses the configuration of the next round.
pub trait Controller {
    /// `prev` ran the round before `current`; `current` just finished at `cost`.
    fn next(&mut self, prev: Configuration, current: Configuration, cost: f64, budget: f64) -> Configuration;
}

/// Keeps one configuration forever. `Fixed(Configuration::FULL)` is the
/// non-adaptive baseline.
#[derive(Clone, Copy, Debug)]
pub struct Fixed(pub Configuration);

impl Controller for Fixed {
    fn next(&mut self, _: Configuration, _: Configuration, _: f64, _: f64) -> Configuration {
        self.0
    }
}

/// Per-phase cost coefficients of the synthetic model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticCosts {
    /// per graph node or edge, scaled up by context and flow sensitivity
    pub construct: f64,
    /// per graph node or edge
    pub load: f64,
    /// per queued method event
    pub per_event: f64,
    /// per method-level edge considered
    pub per_edge: f64,
}

impl Default for SyntheticCosts {
    fn default() -> Self {
        SyntheticCosts {
            construct: 0.01,
            load: 0.002,
            per_event: 0.001,
            per_edge: 0.0005,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CostModel {
    Synthetic(SyntheticCosts),
    /// Fixed `[construct, load, compute]` per configuration; missing
    /// configurations cost infinitely much.
    Table(BTreeMap<Configuration, [f64; 3]>),
    /// Measured milliseconds.
    Wallclock,
}

impl CostModel {
    /// Parses `<bits> <construct> <load> <compute>` lines.
    pub fn parse_table(text: &str, path: &Path) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::parse(path, n + 1, msg);
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(format!("expected `<bits> <construct> <load> <compute>`, got `{line}`")));
            }
            let config: Configuration = f[0].parse().map_err(|e: Error| bad(e.to_string()))?;
            let mut costs = [0.0; 3];
            for (slot, s) in costs.iter_mut().zip(&f[1..]) {
                *slot = s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(|| bad(format!("bad cost `{s}`")))?;
            }
            table.insert(config, costs);
        }
        Ok(CostModel::Table(table))
    }

    pub fn read_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CostModel::parse_table(&text, path)
    }

    fn predict(&self, config: Configuration, graphs: &GraphSet, qu: &ProcessTrace) -> [f64; 3] {
        match self {
            CostModel::Synthetic(k) => {
                let graph = graphs.get(&(config.context(), config.flow())).filter(|_| config.static_graph());
                let size = graph.map_or(0, |g| g.nodes.len() + g.edge_count()) as f64;
                let sens = if config.context() { 2.0 } else { 1.0 } * if config.flow() { 1.5 } else { 1.0 };
                let events = qu.method_events().count() as f64 * if config.instance_level() { 1.0 } else { 0.5 };
                let edges = graph.map_or(0, |g| g.edge_count()) as f64;
                [
                    k.construct * size * sens,
                    k.load * size * if config.stmt_coverage() { 0.5 } else { 1.0 },
                    k.per_event * events + k.per_edge * edges,
                ]
            }
            CostModel::Table(t) => t.get(&config).copied().unwrap_or([f64::INFINITY; 3]),
            CostModel::Wallclock => [0.0; 3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArbiterParams {
    /// events per round trigger
    pub tc: u64,
    /// logical time that must pass between rounds
    pub tt: f64,
    pub budget: Budget,
    pub initial: Configuration,
    /// run one last round on leftover events at the end of the stream
    pub flush: bool,
}

impl ArbiterParams {
    pub fn new(tc: u64, tt: f64, budget: Budget) -> Self {
        ArbiterParams {
            tc,
            tt,
            budget,
            initial: Configuration::FULL,
            flush: false,
        }
    }
}

/// One analysis round. `deps` is `None` exactly when the round timed out.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub idx: usize,
    pub config: Configuration,
    pub cost: f64,
    pub budget: f64,
    pub timeout: bool,
    pub deps: Option<DsMap>,
}

impl RoundRecord {
    pub fn log_line(&self) -> String {
        format!("round {} {} {:.3} {:.3} {}", self.idx, self.config, self.cost, self.budget, self.timeout)
    }
}

/// Mutable state of one process's analysis worker.
#[derive(Clone, Debug)]
pub struct ArbiterState {
    pub g_counter: u64,
    pub last_t: f64,
    /// logical clock: one unit per event plus the cost of each round
    pub now: f64,
    /// every event observed so far, in order
    pub qu: ProcessTrace,
    pub tcn: Configuration,
    pub old_tcn: Configuration,
    /// static bits of the graph currently built
    pub built: Option<u8>,
    /// union of all completed rounds' results
    pub deps: DsMap,
    pub rounds: usize,
}

impl ArbiterState {
    pub fn new(process: ProcId, initial: Configuration) -> Self {
        ArbiterState {
            g_counter: 0,
            last_t: 0.0,
            now: 0.0,
            qu: ProcessTrace::new(process, Vec::new()),
            tcn: initial,
            old_tcn: initial,
            built: None,
            deps: DsMap::new(),
            rounds: 0,
        }
    }

    fn round(&mut self, params: &ArbiterParams, graphs: &GraphSet, costs: &CostModel, ctl: &mut dyn Controller) -> Result<RoundRecord> {
        let config = self.tcn;
        let budget = params.budget;
        let predicted = costs.predict(config, graphs, &self.qu);
        let needs_build = config.static_graph() && self.built != Some(config.static_part());
        let mut phases = [if needs_build { predicted[0] } else { 0.0 }, if config.static_graph() { predicted[1] } else { 0.0 }, predicted[2]];

        let mut result = None;
        if *costs == CostModel::Wallclock {
            let t0 = Instant::now();
            if needs_build {
                graph_for(config, graphs, &self.qu)?;
            }
            let t1 = Instant::now();
            result = Some(compute_deps(&self.qu, config, graphs)?);
            phases = [ms(t1 - t0), 0.0, ms(t1.elapsed())];
        }
        let limits = [budget.construct, budget.load, budget.compute];
        let timeout = phases.iter().zip(limits).any(|(c, l)| *c > l);
        if needs_build && phases[0] <= limits[0] {
            self.built = Some(config.static_part());
        }
        let deps = if timeout {
            None
        } else {
            Some(match result {
                Some(r) => r,
                None => compute_deps(&self.qu, config, graphs)?,
            })
        };
        if let Some(d) = &deps {
            for (m, ds) in d {
                self.deps.entry(m.clone()).or_default().extend(ds.iter().cloned());
            }
        }
        let cost: f64 = phases.iter().sum();
        let record = RoundRecord {
            idx: self.rounds,
            config,
            cost,
            budget: budget.total,
            timeout,
            deps,
        };
        self.rounds += 1;
        self.now += cost;
        self.g_counter = 0;
        self.last_t = self.now;
        let next = ctl.next(self.old_tcn, config, cost, budget.total);
        self.old_tcn = config;
        self.tcn = next;
        Ok(record)
    }

    /// Queues one event and runs a round if the trigger fires.
    pub fn observe(
        &mut self,
        e: EventRecord,
        params: &ArbiterParams,
        graphs: &GraphSet,
        costs: &CostModel,
        ctl: &mut dyn Controller,
    ) -> Result<Option<RoundRecord>> {
        self.qu.events.push(e);
        self.g_counter += 1;
        self.now += 1.0;
        if self.g_counter >= params.tc && self.now - self.last_t > params.tt {
            return self.round(params, graphs, costs, ctl).map(Some);
        }
        Ok(None)
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Outcome of running one worker over a whole event stream.
#[derive(Clone, Debug)]
pub struct Arbitration {
    pub rounds: Vec<RoundRecord>,
    pub state: ArbiterState,
}

impl Arbitration {
    pub fn log(&self) -> String {
        self.rounds.iter().map(|r| r.log_line() + "\n").collect()
    }
}

/// Feeds `stream` event by event through one analysis worker.
pub fn arbitrate(
    stream: &ProcessTrace,
    params: &ArbiterParams,
    graphs: &GraphSet,
    costs: &CostModel,
    ctl: &mut dyn Controller,
) -> Result<Arbitration> {
    if let Some(reason) = params.initial.invalid_reason() {
        return Err(Error::InvalidConfiguration { bits: params.initial.to_string(), reason });
    }
    let mut state = ArbiterState::new(stream.process, params.initial);
    let mut rounds = Vec::new();
    for e in &stream.events {
        rounds.extend(state.observe(e.clone(), params, graphs, costs, ctl)?);
    }
    if params.flush && state.g_counter > 0 {
        rounds.push(state.round(params, graphs, costs, ctl)?);
    }
    Ok(Arbitration { rounds, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::chain5;
    use crate::trace::{EventKind, MethodId};

    fn stream(n: usize) -> ProcessTrace {
        let events = (0..n)
            .map(|i| {
                let kind = if i % 2 == 0 { EventKind::Entry } else { EventKind::ReturnedInto };
                let mut e = EventRecord::new(kind, MethodId::new(0, "C", ["a", "b", "c", "d", "e", "f"][i / 2]), i as u64);
                e.ts = i as u64 + 1;
                e
            })
            .collect();
        ProcessTrace::new(0, events)
    }

    fn graphs() -> GraphSet {
        [(true, true), (true, false), (false, true), (false, false)].into_iter().map(|k| (k, chain5())).collect()
    }

    #[test]
    fn two_rounds_from_four_events() {
        let params = ArbiterParams::new(2, 0.0, Budget::split(1e9));
        let out = arbitrate(&stream(4), &params, &graphs(), &CostModel::Synthetic(SyntheticCosts::default()), &mut Fixed(Configuration::FULL)).unwrap();
        assert_eq!(out.rounds.len(), 2);
        assert!(out.rounds.iter().all(|r| !r.timeout && r.deps.is_some()));
    }

    #[test]
    fn flush_runs_leftover_events() {
        let mut params = ArbiterParams::new(2, 0.0, Budget::split(1e9));
        params.flush = true;
        let out = arbitrate(&stream(5), &params, &graphs(), &CostModel::Synthetic(SyntheticCosts::default()), &mut Fixed(Configuration::FULL)).unwrap();
        assert_eq!(out.rounds.len(), 3);
    }

    #[test]
    fn construction_overrun_times_out_without_deps() {
        let costs = CostModel::Table(BTreeMap::from([(Configuration::FULL, [25.0, 1.0, 1.0])]));
        let params = ArbiterParams::new(2, 0.0, Budget::split(30.0));
        let out = arbitrate(&stream(4), &params, &graphs(), &costs, &mut Fixed(Configuration::FULL)).unwrap();
        assert!(out.rounds.iter().all(|r| r.timeout && r.deps.is_none()));
        assert_eq!(out.rounds[0].cost, 27.0);
        assert!(out.state.deps.is_empty() && out.state.built.is_none());
        assert_eq!(out.rounds[0].log_line(), "round 0 111111 27.000 30.000 true");
    }

    #[test]
    fn graph_built_once_while_static_bits_stay() {
        let costs = CostModel::Table(BTreeMap::from([(Configuration::FULL, [5.0, 1.0, 1.0])]));
        let params = ArbiterParams::new(2, 0.0, Budget::split(30.0));
        let out = arbitrate(&stream(6), &params, &graphs(), &costs, &mut Fixed(Configuration::FULL)).unwrap();
        let c: Vec<f64> = out.rounds.iter().map(|r| r.cost).collect();
        assert_eq!(c, [7.0, 2.0, 2.0]);
    }

    #[test]
    fn time_threshold_delays_rounds() {
        let params = ArbiterParams::new(1, 3.0, Budget::split(1e9));
        let costs = CostModel::Table(BTreeMap::from([(Configuration::FULL, [0.0, 0.0, 0.0])]));
        let out = arbitrate(&stream(8), &params, &graphs(), &costs, &mut Fixed(Configuration::FULL)).unwrap();
        assert_eq!(out.rounds.len(), 2);
    }

    #[test]
    fn pinned_full_config_matches_direct_computation() {
        let s = stream(12);
        let params = ArbiterParams::new(3, 0.0, Budget::split(f64::MAX));
        let out = arbitrate(&s, &params, &graphs(), &CostModel::Synthetic(SyntheticCosts::default()), &mut Fixed(Configuration::FULL)).unwrap();
        for (i, r) in out.rounds.iter().enumerate() {
            let prefix = ProcessTrace::new(0, s.events[..3 * (i + 1)].to_vec());
            assert_eq!(r.deps.as_ref(), Some(&compute_deps(&prefix, Configuration::FULL, &graphs()).unwrap()));
        }
    }

    #[test]
    fn cost_table_parsing() {
        let t = CostModel::parse_table("# x\n111111 1 2 3\n000100 0 0 0.5\n", Path::new("t")).unwrap();
        assert_eq!(t, CostModel::Table(BTreeMap::from([(Configuration::FULL, [1.0, 2.0, 3.0]), ("000100".parse().unwrap(), [0.0, 0.0, 0.5])])));
        assert!(CostModel::parse_table("000010 1 2 3", Path::new("t")).is_err());
        assert!(CostModel::parse_table("111111 1 2", Path::new("t")).is_err());
        assert!(CostModel::parse_table("111111 1 2 -3", Path::new("t")).is_err());
    }
}
