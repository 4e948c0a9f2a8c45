//! Evaluation library for video grounding model outputs.
//!
//! The crate covers four benchmark tasks:
//!
//! * **`stg`** — spatio-temporal grounding: a predicted box tube is compared
//!   against a ground-truth tube sampled at 1 Hz, yielding temporal
//!   (`tP`/`tR`/`tIoU`) and volumetric (`vP`/`vR`/`vIoU`/`vIoU-Int`) scores.
//! * **`tr`** — temporal retrieval: predicted time intervals are compared
//!   against ground-truth intervals in continuous time, and per-query scores
//!   are summarised as areas under threshold-sweep accuracy curves.
//! * **`char`** — character tracks: transcript segments with box tracks are
//!   matched one-to-one against ground truth, then scored with segment
//!   `tIoU`, corpus word error rate, and box-level `sIoU`.
//! * **`mc`** — multiple choice: exact-match accuracy over option indices,
//!   with refusals counted as incorrect.
//!
//! [`adapters`] normalises the heterogeneous raw output formats emitted by
//! different model families into the canonical types above, [`dataset`]
//! loads and validates annotation files and assigns slice buckets, and
//! [`report`] drives whole-file evaluation runs and renders deterministic
//! reports.

pub mod adapters;
pub mod assignment;
pub mod dataset;
pub mod error;
pub mod model;
pub mod plot;
pub mod report;
pub mod stg;
pub mod tr;
mod wire;

pub use error::Error;
pub use model::{BoundingBox, Interval, IntervalSet, TemporalSupport, Tube, TubeBuilder};

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
