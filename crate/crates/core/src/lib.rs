//! Circadian-rhythm indicators from Call Detail Records.
//!
//! The crate turns raw CDR exports into wake-up times, bedtimes, day
//! lengths and working hours per cell, site or city, along with home / work
//! inference, daily mobility metrics, a Voronoi tessellation of the cell
//! sites and socioeconomic stratification. A synthetic generator with
//! planted ground truth drives the end-to-end tests.

pub mod circadian;
pub mod config;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod locations;
pub mod mobility;
pub mod pipeline;
pub mod ses;
pub mod synthgen;
pub mod stats;
pub mod time;

pub use error::{Error, Result};
