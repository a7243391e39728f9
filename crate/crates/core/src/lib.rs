//! Surrogate Monte Carlo: artificial time series built by permuting i.i.d.
//! draws from a target's empirical distribution until lagged correlation
//! features match the target's.
//!
//! The pipeline is
//!
//! 1. [`ingest`]: prices to log returns,
//! 2. [`empirical`]: empirical CDF and inverse-transform draws,
//! 3. [`features`]: correlation features, objective, incremental swap scoring,
//! 4. [`anneal`]: simulated annealing over pairwise swaps,
//! 5. [`diagnostics`]: plot-ready comparison data and toy generators.
//!
//! The `book/` directory next to this crate walks through each step; its code
//! listings are compiled and run as doctests.

pub mod anneal;
pub mod cli;
pub mod diagnostics;
pub mod empirical;
mod error;
pub mod features;
pub mod ingest;
pub mod rng;

pub use anneal::{anneal_run, run_realizations, AnnealConfig, AnnealReport, Goal, InitialTemp, Termination};
pub use empirical::{fit_empirical_cdf, EmpiricalDistribution, PlottingPosition, SampleDraw};
pub use error::{Result, SmcError};
pub use features::{
    cross_correlation, init_objective_state, objective_delta, rho, FeatureSpec, FeatureTerm, FeatureVector,
    ObjectiveMode, ObjectiveState, Transform,
};
pub use ingest::{demean, log_returns, parse_price_csv, ColumnSelector, PriceSeries, ReturnSeries};

// The book's listings run as doctests: one empty module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/returns.md")]
    mod returns {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/swaps.md")]
    mod swaps {}
    #[doc = include_str!("../../../book/src/annealing.md")]
    mod annealing {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
