//! Gas-demand datasets, interpretable forecasters and base-fee simulation.
pub mod bench;
pub mod features;
pub mod fee;
pub mod ingest;
pub mod matrix;
pub mod models;
pub mod sentiment;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/fee.md")]
    mod fee {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/monotonic.md")]
    mod monotonic {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
