//! Budget-aware online dependence analysis with switchable configurations.

mod arbiter;
mod deps;
mod query;

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub use arbiter::{arbitrate, ArbiterParams, ArbiterState, Arbitration, Controller, CostModel, Fixed, RoundRecord, SyntheticCosts};
pub use deps::{compute_deps, first_last_instances, DsMap};
pub use query::{answer_queries, merge_query, parse_deps, render_deps, ProcessDeps, QueryIndex};

/// Six analysis switches, most significant first: static graph, context
/// sensitivity, flow sensitivity, method events, statement coverage,
/// method-instance level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(u8);

impl Configuration {
    pub const STATIC_GRAPH: u8 = 0b100000;
    pub const CONTEXT: u8 = 0b010000;
    pub const FLOW: u8 = 0b001000;
    pub const METHOD_EVENT: u8 = 0b000100;
    pub const STMT_COVERAGE: u8 = 0b000010;
    pub const INSTANCE_LEVEL: u8 = 0b000001;

    /// The most precise configuration.
    pub const FULL: Configuration = Configuration(0b111111);

    /// Any 6-bit pattern, valid or not.
    pub fn raw(bits: u8) -> Self {
        Configuration(bits & 0b111111)
    }

    pub fn new(bits: u8) -> Result<Self> {
        let c = Configuration::raw(bits);
        match c.invalid_reason() {
            None if bits < 64 => Ok(c),
            None => Err(Error::InvalidConfiguration { bits: format!("{bits:b}"), reason: "more than six bits" }),
            Some(reason) => Err(Error::InvalidConfiguration { bits: c.to_string(), reason }),
        }
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    fn has(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn static_graph(self) -> bool {
        self.has(Self::STATIC_GRAPH)
    }

    pub fn context(self) -> bool {
        self.has(Self::CONTEXT)
    }

    pub fn flow(self) -> bool {
        self.has(Self::FLOW)
    }

    pub fn method_event(self) -> bool {
        self.has(Self::METHOD_EVENT)
    }

    pub fn stmt_coverage(self) -> bool {
        self.has(Self::STMT_COVERAGE)
    }

    pub fn instance_level(self) -> bool {
        self.has(Self::INSTANCE_LEVEL)
    }

    /// The bits that decide which static graph is needed.
    pub fn static_part(self) -> u8 {
        self.0 & (Self::STATIC_GRAPH | Self::CONTEXT | Self::FLOW)
    }

    pub fn invalid_reason(self) -> Option<&'static str> {
        if self.0 == 0 {
            Some("nothing enabled")
        } else if !self.static_graph() && (self.context() || self.flow() || self.stmt_coverage()) {
            Some("sensitivities and statement coverage need the static graph")
        } else if self.instance_level() && !self.method_event() {
            Some("instance level needs method events")
        } else {
            None
        }
    }

    pub fn is_valid(self) -> bool {
        self.invalid_reason().is_none()
    }

    /// All valid configurations in ascending encoding order.
    pub fn all_valid() -> Vec<Configuration> {
        (0..64).map(Configuration).filter(|c| c.is_valid()).collect()
    }

    /// Same configuration with one bit cleared.
    pub fn without(self, bit: u8) -> Configuration {
        Configuration(self.0 & !bit)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06b}", self.0)
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 6 || !s.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::Config(format!("configuration must be six binary digits, got `{s}`")));
        }
        Configuration::new(u8::from_str_radix(s, 2).expect("checked digits"))
    }
}

/// Time budget per round and its split over the three phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub total: f64,
    pub construct: f64,
    pub load: f64,
    pub compute: f64,
}

impl Budget {
    /// 70% graph construction, 20% graph loading, 10% dependence computation.
    pub fn split(total: f64) -> Self {
        Budget::with_shares(total, [0.7, 0.2, 0.1]).expect("default shares are valid")
    }

    pub fn with_shares(total: f64, shares: [f64; 3]) -> Result<Self> {
        let sum: f64 = shares.iter().sum();
        if !(total > 0.0) || shares.iter().any(|s| !(*s > 0.0)) || sum > 1.0 + 1e-9 {
            return Err(Error::Config(format!("budget {total} with shares {shares:?} is not positive or over-allocated")));
        }
        Ok(Budget {
            total,
            construct: total * shares[0],
            load: total * shares[1],
            compute: total * shares[2],
        })
    }
}
