use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use super::DepData;
use crate::trace::{MethodId, MethodName, ProcId};
use crate::Error;

/// A class as executed by one process.
pub type ClassKey = (ProcId, String);

/// Which class-level RCC definition to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RccFormula {
    /// Methods of the first class some method of the second class depends
    /// on, over all remote methods depending on the first class.
    #[default]
    Prose,
    /// Methods of the second class depending on the first class, over all
    /// methods outside the first process depending on the second class.
    Table,
}

impl FromStr for RccFormula {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "prose" => Ok(RccFormula::Prose),
            "table" => Ok(RccFormula::Table),
            _ => Err(Error::Config(format!("unknown RCC formula `{s}` (prose or table)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IpcReport {
    pub rmc: f64,
    pub rcc: f64,
    pub ccc: f64,
    pub ipr: f64,
    pub ccl: f64,
    pub plc: f64,
    pub process_rmc: BTreeMap<(ProcId, ProcId), f64>,
    pub process_rcc: BTreeMap<ProcId, f64>,
    pub class_rcc: BTreeMap<(ClassKey, ClassKey), f64>,
    pub class_ccc: BTreeMap<ClassKey, f64>,
    pub method_ipr: BTreeMap<MethodId, f64>,
    pub class_ccl: BTreeMap<ClassKey, f64>,
    pub process_plc: BTreeMap<ProcId, f64>,
    /// Set when nothing executed and every metric defaulted to zero.
    pub empty: bool,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn mean<'a>(xs: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn class_of(m: &MethodId) -> ClassKey {
    (m.process, m.class_name.clone())
}

impl IpcReport {
    pub fn system_row(&self) -> [f64; 6] {
        [self.rmc, self.rcc, self.ccc, self.ipr, self.ccl, self.plc]
    }

    /// Tab-separated report: the system row first, then every breakdown.
    pub fn render(&self) -> String {
        let mut out = String::from("system\tRMC\tRCC\tCCC\tIPR\tCCL\tPLC\n");
        let row: Vec<String> = self.system_row().iter().map(|v| format!("{v:.10}")).collect();
        writeln!(out, "system\t{}", row.join("\t")).unwrap();
        for ((s, r), v) in &self.process_rmc {
            writeln!(out, "rmc\t{s}\t{r}\t{v:.10}").unwrap();
        }
        for (p, v) in &self.process_rcc {
            writeln!(out, "rcc\t{p}\t{v:.10}").unwrap();
        }
        for (((p1, c1), (p2, c2)), v) in &self.class_rcc {
            writeln!(out, "class_rcc\t{p1}\t{c1}\t{p2}\t{c2}\t{v:.10}").unwrap();
        }
        for ((p, c), v) in &self.class_ccc {
            writeln!(out, "ccc\t{p}\t{c}\t{v:.10}").unwrap();
        }
        for (m, v) in &self.method_ipr {
            writeln!(out, "ipr\t{}\t{}\t{}\t{v:.10}", m.process, m.class_name, m.method_name).unwrap();
        }
        for ((p, c), v) in &self.class_ccl {
            writeln!(out, "ccl\t{p}\t{c}\t{v:.10}").unwrap();
        }
        for (p, v) in &self.process_plc {
            writeln!(out, "plc\t{p}\t{v:.10}").unwrap();
        }
        if self.empty {
            out.push_str("warning\tempty execution\n");
        }
        out
    }
}

/// Computes all six metrics at every level they are defined for.
pub fn ipc_metrics(dep: &DepData, rcc: RccFormula) -> IpcReport {
    let mut r = IpcReport {
        empty: dep.executed.is_empty(),
        ..IpcReport::default()
    };
    if r.empty {
        return r;
    }
    let none = BTreeSet::new();
    let local = |m: &MethodId| dep.local_ds.get(m).unwrap_or(&none);
    let remote = |m: &MethodId| dep.remote_ds.get(m).unwrap_or(&none);

    let mut classes: BTreeMap<ClassKey, Vec<&MethodId>> = BTreeMap::new();
    let mut procs: BTreeMap<ProcId, Vec<&MethodId>> = BTreeMap::new();
    for m in &dep.executed {
        classes.entry(class_of(m)).or_default().push(m);
        procs.entry(m.process).or_default().push(m);
    }

    r.process_rmc = dep.messages.iter().filter(|(_, n)| **n > 0).map(|(k, n)| (*k, *n as f64)).collect();
    r.rmc = mean(r.process_rmc.values());

    for (p, ms) in &procs {
        let rem: BTreeSet<&MethodId> = ms.iter().flat_map(|m| remote(m)).collect();
        let all: BTreeSet<&MethodId> = ms.iter().flat_map(|m| local(m).iter().chain(remote(m))).collect();
        r.process_rcc.insert(*p, ratio(rem.len(), all.len()));
        let load: usize = ms.iter().map(|m| local(m).len()).sum();
        r.process_plc.insert(*p, ratio(load, ms.len()));
    }
    r.rcc = mean(r.process_rcc.values());
    r.plc = mean(r.process_plc.values());

    for (c1, ms1) in &classes {
        let rem1: BTreeSet<&MethodId> = ms1.iter().flat_map(|m| remote(m)).collect();
        let mut ccc = 0.0;
        for (c2, ms2) in classes.iter().filter(|(c2, _)| c2.0 != c1.0) {
            let v = match rcc {
                RccFormula::Prose => {
                    let hit = ms1.iter().filter(|m| remote(m).iter().any(|d| class_of(d) == *c2)).count();
                    ratio(hit, rem1.len())
                }
                RccFormula::Table => {
                    let hit = ms2.iter().filter(|y| rem1.contains(**y)).count();
                    let deps2: BTreeSet<&MethodId> = ms2
                        .iter()
                        .flat_map(|y| local(y).iter().chain(remote(y)))
                        .filter(|z| z.process != c1.0)
                        .collect();
                    ratio(hit, deps2.len())
                }
            };
            ccc += v;
            r.class_rcc.insert((c1.clone(), c2.clone()), v);
        }
        r.class_ccc.insert(c1.clone(), ccc);
        let load: usize = ms1.iter().map(|m| remote(m).len()).sum();
        r.class_ccl.insert(c1.clone(), ratio(load, ms1.len()));
    }
    r.ccc = mean(r.class_ccc.values());
    r.ccl = mean(r.class_ccl.values());

    let n = dep.executed.len();
    for m in &dep.executed {
        let ln: BTreeSet<MethodName> = local(m).iter().map(MethodId::name).collect();
        let shared = remote(m).iter().map(MethodId::name).collect::<BTreeSet<_>>().intersection(&ln).count();
        r.method_ipr.insert(m.clone(), ratio(shared, n));
    }
    r.ipr = r.method_ipr.values().sum::<f64>() / n as f64;
    r
}
