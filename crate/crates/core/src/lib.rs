//! Rigorous set-oriented analysis of parameterized discrete-time maps.
//!
//! The pipeline encloses a map on a uniform grid with interval arithmetic
//! ([`graphrep::Representation`]), extracts numerical Morse decompositions
//! from the strongly connected components of the resulting graph, measures
//! recurrence inside Morse sets ([`recurrence`]), continues decompositions
//! across parameter grids ([`continuation`]) and clusters parameter boxes by
//! their recurrence features ([`cluster`]).

pub mod cli;
pub mod cluster;
pub mod continuation;
pub mod digraph;
pub mod dynsys;
pub mod error;
pub mod graphrep;
pub mod grid;
pub mod interval;
pub mod recurrence;
pub mod render;
pub mod sim;

pub use dynsys::{MapKind, ParamBox, ParamMap};
pub use error::{Error, Result};
pub use graphrep::{MorseDecomposition, MorseSet, Representation};
pub use grid::{CellId, CellIndex, Grid, RectangularSet};
pub use interval::{Interval, IntervalRect};
pub use recurrence::RecurrenceField;

/// Tool version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
