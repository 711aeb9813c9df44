//! Maximum-entropy modeling of weighted, directed trade networks.
//!
//! The crate ingests bilateral trade flows and national GDP figures into
//! yearly snapshots, fits the factorized exponential ensemble whose expected
//! link weight is the gravity form (T/X²)·x_i·x_j, samples that ensemble
//! (exactly and with a Metropolis chain), and runs the validation analyses:
//! strength-vs-GDP fits, flow clouds, trade-volume distributions and the
//! fluctuation-response binning of year-over-year changes.
//!
//! The `tradenet` binary exposes the pipeline as `ingest`, `fit`, `simulate`
//! and `analyze` subcommands working over plain CSV files.
//!
//! ```no_run
//! use tradenet::ensemble::{hamiltonian, EnsembleParams};
//! use tradenet::ingest::{build_snapshot, parse_flows, parse_gdp};
//! use tradenet::sampler::sample_direct;
//!
//! # fn main() -> tradenet::Result<()> {
//! let flows = parse_flows(std::fs::File::open("flows.csv")?)?;
//! let gdps = parse_gdp(std::fs::File::open("gdp.csv")?)?;
//! let (snapshot, report) = build_snapshot(1975, &flows, &gdps)?;
//! eprintln!("dropped {} countries without GDP", report.dropped_countries.len());
//!
//! let params = EnsembleParams::fit(&snapshot)?;
//! let realization = sample_direct(&params, 42);
//! println!("H = {}", hamiltonian(&params, &realization)?);
//! # Ok(())
//! # }
//! ```

// Validation uses `!(x > 0.0)` so NaN fails the check like any other bad value.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod io;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
