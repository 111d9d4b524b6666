//! Trace-driven analysis of distributed program executions.
//!
//! The crate is organized around a per-process event trace model stamped with
//! Lamport clocks. On top of it sit:
//!
//! * [`flow`]: two-phase computation of information flow paths, first at method
//!   level from happens-before approximations, then at statement level by a
//!   hybrid static/dynamic dependence graph that is pruned and spliced across
//!   processes.
//! * [`seads`] and [`qlearn`]: an online dependence analysis whose six-bit
//!   configuration is re-tuned every round by a tabular Q-learning controller
//!   under a time budget.
//! * [`metrics`]: interprocess coupling and cohesion metrics with rank
//!   correlation and two-means classification.
//! * [`netsim`]: a deterministic multi-process simulator producing traces, static
//!   graphs and ground truth for all of the above.

pub mod error;
pub mod exec;
pub mod flow;
pub mod graph;
pub mod metrics;
pub mod netsim;
pub mod qlearn;
pub mod seads;
pub mod trace;

pub use error::{Error, Result};
pub use exec::Exec;
