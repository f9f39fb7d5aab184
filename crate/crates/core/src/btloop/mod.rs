//! The single-pass back-translation loop: synthesize a source for every
//! monolingual target, retrain the forward model on bitext plus synthetic
//! pairs, and evaluate. Also holds the enumeration oracles for the marginal
//! likelihood that back-translation approximates.

mod experiment;
mod oracle;
mod strategy;
mod synth;

pub use experiment::{
    run_bt_experiment, ExperimentCell, ExperimentConfig, ExperimentReport, SyntheticDiagnostics, WEAK_BITEXT_FRACTION,
};
pub use oracle::{
    exact_marginal, importance_mc_estimate, jensen_lower_bound, oracle_for_target, McEstimate, OracleResult,
    MAX_ENUMERATION,
};
pub use strategy::BtStrategy;
pub use synth::{synthesize_corpus, train_forward, SynthesisOptions};
