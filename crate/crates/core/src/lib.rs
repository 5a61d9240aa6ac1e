//! Spherical codes and neural-collapse geometry in the orthoplex regime
//! `d + 2 ≤ n ≤ 2d`.
//!
//! - [`config`]: spherical configurations and code builders
//! - [`hull`], [`geometry`]: hull distances, margin, coherence, Radon
//!   partitions, rattlers and batch decompositions
//! - [`loss`]: cross-entropy, hardmax and block-code closed forms
//! - [`temperature`]: best block tuple as a function of temperature
//! - [`optimizer`]: Riemannian descent on products of spheres

pub mod config;
pub mod error;
pub mod geometry;
pub mod hull;
pub mod loss;
pub mod optimizer;
pub mod temperature;

pub use config::{
    build_block_code, build_entropy_code, build_orthoplex_subset, build_simplex, direct_sum,
    random_config, DimensionTuple, EntropyKind, FeatureSet, SphericalConfig,
};
pub use error::{Error, Result};
pub use geometry::{
    coherence, find_rattlers, margin, orthoplex_decompose, radon_partition, BatchDecomposition,
    Margin, RadonPartition, Rattlers,
};
pub use hull::{hull_distance, HullDistanceResult};
pub use loss::{
    ce_gradient, ce_loss, ce_selfdual_closed, f_d1, f_d2, f_eval, hardmax_loss, l_tau_c,
    GradientPair, HardmaxConvention, LossParams,
};
pub use optimizer::{
    collapse_metrics, optimize, CollapseMetrics, OptimizeOptions, OptimizerState, StepRule,
};
pub use temperature::{
    concavity_threshold, convexity_threshold, crossover_scan, enumerate_tuples, optimal_tuple,
    SweepReport,
};
