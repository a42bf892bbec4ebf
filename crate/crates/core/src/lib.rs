//! Interbank liquidity-contagion toolkit.
//!
//! The pipeline has four stages:
//!
//! ```text
//! banks.csv / spreads.csv / bis.csv
//!        │ ingest        (validation, liquidity indicator, node terms γ and ν)
//!        ▼
//!   reconstruct          (block-constrained fitness model, z calibration, IPF)
//!        │ ensemble of weighted directed networks
//!        ▼
//!   contagion            (stochastic Exposed-Distressed-Bankrupted process)
//!        │ trajectories
//!        ▼
//!   metrics              (prevalence, bankruptcy ratio, country shares, μ, t*)
//! ```
//!
//! [`oracle`] enumerates the exact Markov chain of tiny instances and is used
//! to validate the stochastic engine. [`synth`] generates input tables with
//! realistic shapes when real balance-sheet data is not available.

pub mod contagion;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod reconstruct;
pub mod rng;
pub mod synth;

pub use contagion::{
    CompartmentState, Compartment, ContagionConfig, ContagionGraph, NodeTerms, Simulator,
    Trajectory, Variant,
};
pub use ingest::{BankRecord, BisExposureMatrix, CountrySpread, IndicatorTable, Pooling};
pub use metrics::{EnsembleResult, MeanCi, Weighting};
pub use reconstruct::{
    generate_ensemble, ReconstructedNetwork, ReconstructionConfig, WeightMatrix, ZMode,
    ZSolution,
};
