//! Argument identification for partitive and percent noun predicates: a
//! feature-based boosted scorer, a two-view ensemble and an evaluation
//! harness over an extended CONLL-2000 format.

pub mod corpus;
pub mod embeddings;
pub mod encoding;
pub mod ensemble;
pub mod eval;
pub mod features;
pub mod model;
pub mod parsetree;
pub mod pipeline;
pub mod synth;
