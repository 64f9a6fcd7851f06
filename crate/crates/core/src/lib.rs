//! Event temporal status classification over dependency chains.
//!
//! The crate reads dependency-parsed sentences and event annotations
//! ([`corpus`]), selects event-centered token sequences ([`chain`]), trains
//! small from-scratch LSTM, CNN and child-sum tree-LSTM classifiers
//! ([`nncore`], [`models`], [`harness`]) and explains predictions with
//! gradient saliency heatmaps ([`saliency`]).

pub mod chain;
pub mod corpus;
pub mod nncore;
pub mod models;
pub mod harness;
pub mod saliency;
