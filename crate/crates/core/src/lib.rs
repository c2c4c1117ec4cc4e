//! Evidential analysis of uncertain intelligence reports.
//!
//! The crate is layered bottom-up:
//!
//! - [`ds`]: frames, mass functions, Dempster's rule with conflict accounting,
//!   belief/plausibility queries and discounting.
//! - [`metacluster`]: partitions a corpus of reports into per-target subsets by
//!   minimizing the metaconflict criterion.
//! - [`specifier`]: graded report-to-subset membership from conflict changes
//!   under hypothetical moves.
//! - [`posterior`]: posterior distribution over the number of targets.
//! - [`track`]: support and plausibility of tracks through a complete DAG of
//!   position reports, with an exact enumeration oracle and a fast DP.
//! - [`decision`]: expected-utility intervals, rho segmentation and the
//!   sequential multi-decision-maker game.
//! - [`oracle`]: brute-force reference implementations used for cross-checks.
//! - [`input`], [`scenario`], [`pipeline`]: file formats, synthetic scenarios
//!   and end-to-end orchestration used by the command-line tool.
//!
//! Data-parallel loops (search restarts, oracle enumeration, per-report
//! specification) go through [`exec`], which uses rayon when the `parallel`
//! feature is on and plain iterators otherwise. Results never depend on the
//! thread schedule.

pub mod decision;
pub mod ds;
pub mod error;
pub mod exec;
pub mod input;
pub mod metacluster;
pub mod oracle;
pub mod pipeline;
pub mod posterior;
pub mod scenario;
pub mod specifier;
pub mod track;

pub use error::{Error, Result};
