//! Pre-match outcome prediction for five-versus-five champion games from
//! player-champion experience features.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod ingestion;
pub mod models;
pub mod rng;
pub mod synthgen;
