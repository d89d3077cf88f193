#![cfg_attr(not(any(feature = "std", test)), no_std)]

//! Coalescent likelihoods under time-varying population size.
//!
//! The crate estimates the probability of an observed allele-count
//! configuration at a microsatellite locus by sequential importance sampling
//! over ancestral histories, optionally with checkpointed resampling guided by
//! the current importance weights and a pairwise composite likelihood of the
//! partial history. On top of the per-locus estimators it provides
//! multilocus maximum-likelihood inference (stratified design, local
//! polynomial smoothing, profile likelihoods, χ²₁ intervals) and the
//! evaluation machinery used to validate all of it.
//!
//! Everything here is pure computation: no IO, no threads. Parallel
//! execution is injected through [`exec::Executor`]; the `coalsisr` crate
//! provides a rayon-backed executor plus the file formats and CLI.
//!
//! All internal time is scaled time `u = t / 2N`, and only the scaled
//! parameters `(θ, D, θ_anc)` ever enter a computation.

extern crate alloc;

pub mod datasim;
pub mod error;
pub mod exec;
pub mod harness;
pub mod inference;
pub mod math;
pub mod model;
pub mod pcl;
pub mod proposal;
pub mod rng;
pub mod sis;
pub mod sisr;
pub mod stats;
pub mod timing;

pub use crate::error::{Error, Result};
pub use crate::model::{
    AlleleConfig, BackwardEvent, DemographyModel, MutationModel, ScaledParams,
};
pub use crate::proposal::ProposalKind;
pub use crate::sis::{EstimateResult, Particle};
pub use crate::sisr::{CheckpointMode, CheckpointPolicy, ResamplingParams};
pub use crate::timing::TimingStrategy;
