//! Interactive labeling-function synthesis.
//!
//! A user annotates one document at a time; each annotation compiles to a seed
//! rule, the synthesizer proposes generalizations, accepted rules vote on the
//! corpus, a label model denoises the votes and an end model is trained on the
//! resulting probabilistic labels.

pub mod corpus;
pub mod entities;
pub mod glm;
pub mod rule;
pub mod synth;
pub mod label_model;
pub mod metrics;
pub mod end_model;
pub mod sampler;
pub mod project;
