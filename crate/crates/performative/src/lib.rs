//! Simulation and optimization laboratory for performative prediction.
//!
//! When a deployed model changes the distribution of the data it is later
//! scored on, the objective worth minimizing is the performative risk
//!
//! ```text
//! PR(θ) = E_{z ~ D(θ)} [ ℓ(z; θ) ],
//! ```
//!
//! where the distribution map `D(·)` is unknown and can only be sampled by
//! actually deploying a parameter. This crate implements the *plug-in*
//! approach to that problem — deploy exploratory parameters, fit a
//! parametric model (an "atlas") of the distribution map, then minimize the
//! modeled risk — together with the ground-truth simulators, model-agnostic
//! baselines, and the measurement harness needed to study when the plug-in
//! shortcut wins and when model misspecification makes it plateau.
//!
//! Module tour:
//!
//! * [`core`] — parameter-space geometry, seeded RNG streams, loss
//!   functions, sample ledgers, and data collection (the *deploy* step).
//! * [`maps`] — ground-truth distribution maps (biased coin, Gaussian
//!   location family, strategic responses) used as black-box simulators.
//! * [`atlas`] — parametric distribution-map families the learner fits,
//!   with closed-form plug-in risks where they exist.
//! * [`mapfit`] — estimators for the atlas parameter (the *fit* step).
//! * [`optimize`] — plug-in risk minimizers (the *optimize* step) and the
//!   ground-truth oracle used for scoring.
//! * [`baselines`] — derivative-free optimization, greedy SGD, and a
//!   performative-gradient method, run against the same sample ledgers.
//! * [`metrics`] — Monte-Carlo risk, excess risk, empirical Wasserstein-1
//!   and total-variation distances, and sup-gap estimation on grids.
//! * [`harness`] — scenario configs, the experiment runner, CSV and SVG
//!   emission, and the self-test suite behind the CLI.
//!
//! Every stochastic routine takes an explicit [`core::RngStream`]; given a
//! master seed, experiment outputs are reproducible bit for bit.

pub mod atlas;
pub mod baselines;
pub mod core;
mod descent;
pub mod error;
pub mod harness;
mod linalg;
pub mod mapfit;
pub mod maps;
pub mod metrics;
pub mod optimize;

pub use crate::core::{
    deploy_and_collect, Dataset, Exploration, Loss, ParamBall, ParamBox, RngStream, SampleCounter,
    ThetaSet, TrueMap,
};
