//! Command-line harness around the [`comvar`] library.
//!
//! Four subcommands cover the built-in experiments and generic data:
//!
//! * `metric-compare` — scores the midpoint and endpoint-averaged local
//!   metrics against the true latent distances on the warped-square
//!   benchmark.
//! * `pendulum` — recovers the two normal-mode frequencies of the coupled
//!   pendulum from a pair of synthetic movies.
//! * `icons` — recovers the shared rotation frequency from three icon
//!   movies via the K-set pipeline.
//! * `embed` — embeds user-supplied observation CSVs with any of the
//!   two-set or K-set pipelines.
//!
//! Every command writes its artifacts plus a `manifest.json` recording all
//! knobs and summary metrics, even when the scientific criterion fails;
//! the exit code carries the verdict (0 pass, 2 criterion failed, 1
//! operational error). Identical flags and seed produce byte-identical
//! artifacts modulo the manifest timestamp.

pub mod args;
pub mod commands;
pub mod io;
pub mod manifest;

pub use commands::{cmd_embed, cmd_icons, cmd_metric_compare, cmd_pendulum, RunOutcome};
pub use manifest::RunManifest;
