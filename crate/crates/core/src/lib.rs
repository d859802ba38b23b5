//! Temporal event mining over a personal event ledger.
//!
//! The pipeline runs left to right: events from many producers land in a
//! [`ledger::Ledger`]; the [`miner`] turns temporal co-occurrences into
//! candidate [`miner::Hypothesis`] values written in the [`algebra`]
//! pattern language; the [`causal`] tester contrasts treated and control
//! anchors within confounder strata; surviving relationships become
//! confidence-weighted edges of a [`kgraph::KnowledgeGraph`], which
//! [`guidance`] reads to recommend actions and channels. [`synth`] builds
//! ledgers with planted ground truth, and [`pipeline`] wires the stages
//! together end to end.

pub mod algebra;
pub mod error;
pub mod guidance;
pub mod kgraph;
pub mod ledger;
pub mod causal;
pub mod miner;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
