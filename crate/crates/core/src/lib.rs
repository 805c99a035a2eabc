//! Joint automated essay scoring and off-topic detection.
//!
//! The crate trains a small multi-layer text encoder with a two-branch
//! scoring head on on-topic essays only, then flags off-topic or adversarial
//! responses by summing per-layer Mahalanobis distances against Gaussian
//! statistics fitted on the training features. On-topic essays receive a
//! calibrated score; flagged essays receive zero.
//!
//! Everything here is pure computation over `alloc` collections; file
//! formats, persistence and the command-line surface live in the companion
//! `ontopic-cli` crate.
//!
//! Module map:
//! - [`corpus`]: essay/prompt data model, synthetic corpus generation, score
//!   normalization and split management
//! - [`encoder`]: tokenizer, the differentiable encoder (forward, exact
//!   backward, per-layer features)
//! - [`trm`]: topic-regularized scoring head, hybrid loss, Adam training loop
//! - [`oodstats`]: per-layer Gaussian statistics and summed Mahalanobis
//!   distances
//! - [`calibrate`]: threshold selection (equal error rate, quantile) and the
//!   joint score/class decision rule
//! - [`metrics`]: quadratic weighted kappa, Pearson correlation, detection
//!   precision/recall/F1, histogram reports
//! - [`adversary`]: deterministic perturbation generators for adversarial
//!   test sets
//! - [`baselines`]: comparison systems and ablations sharing the same
//!   encoder and evaluation path

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adversary;
pub mod baselines;
pub mod calibrate;
pub mod corpus;
pub mod encoder;
pub mod linalg;
pub mod metrics;
pub mod num;
pub mod oodstats;
pub mod seed;
pub mod text;
pub mod trm;
