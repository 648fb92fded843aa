//! Penalty-to-prior toolkit for variational inference.
//!
//! The library turns weight penalties into the Bayesian priors they are
//! equivalent to under translation-invariant variational posteriors,
//! verifies the equivalence numerically, derives principled per-layer
//! penalty factors from moment conditions on the prior, demonstrates the
//! factors in a small pruning lab, and checks convergence-rate bounds.

pub mod cli;
pub mod convergence_rates;
pub mod divergence;
pub mod error;
pub mod grid;
pub mod lambda_planner;
pub mod penalty;
pub mod prior;
pub mod prior_engine;
pub mod pruning_lab;
pub mod quadrature;

pub use convergence_rates::{
    corollary_rate, rate_bound, verify_witness, EpsSequence, GaussianProduct, RateCheck,
    RateReport, RateWitness, ToyModel,
};
pub use divergence::{
    kl_dirac, kl_gaussian_gaussian, kl_numeric, renyi_divergence, renyi_divergence_prior,
    renyi_prior_candidate, verify_correspondence, KLMethod, KLReport, ResidualEntry,
};
pub use error::{Error, Result};
pub use grid::GridFunction;
pub use lambda_planner::{
    check_prior_condition, default_bayesian_sweep, default_usual_sweep, lambda_bayesian,
    lambda_usual, plan, plan_to_csv, solve_lambda_from_condition, ArchitectureSpec, ConditionMode,
    LambdaPlan, LayerShape, PriorConditionReport, PriorConditionTarget, PriorFamilyKind, Scheme,
};
pub use penalty::{NuDependence, PenaltyKind, PenaltySpec, PosteriorFamily, PosteriorKind, Sigma2};
pub use prior::{LogDensityPoly, PriorDensity, PriorForm};
pub use prior_engine::{
    check_condition_a, default_grid_config, derive_prior_dirac, derive_prior_grid,
    derive_prior_symbolic, entropy, normalize_prior, reconstruct_penalty, ConditionAReport,
    DerivedLogDensity,
};
pub use pruning_lab::{
    accuracy, forward_backward, lambda_sweep, make_synthetic_dataset,
    penalty_value_and_subgradient, prune_step, train_two_phase, Activation, Dataset, EpochLog,
    Gradients, Layer, MLPModel, PruneReport, TrainConfig,
};
pub use quadrature::{GaussHermite, QuadratureConfig};
