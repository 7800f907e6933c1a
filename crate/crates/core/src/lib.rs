// `!(x > y)` is how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod binning;
pub mod collective;
pub mod error;
pub mod io;
pub mod optimize;
pub mod pairstats;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/binning.md")]
    struct Binning;
    #[doc = include_str!("../../../book/src/thresholds.md")]
    struct Thresholds;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/analysis.md")]
    struct Analysis;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
