//! Desk-scale natural language inference with token-level explanations.
//!
//! The crate trains a sentence-pair entailment classifier (shared LSTM
//! encoder, projected inner-product attention, feed-forward head) whose
//! attention distributions can be shaped with multiple-instance-learning
//! regularizers, then extracts token-level explanations three ways:
//! thresholded attention, LIME, and anchor rules. A jointly trained
//! LSTM-CRF tagger serves as the fully supervised baseline, and a
//! harness scores every method against gold token highlights and times
//! it per instance.

pub mod corpus;
pub mod explain;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod tagger;
