//! Deferred greedy (peeling) decoding for bivariate bicycle codes under
//! circuit-level noise, with the analytical peeling theory alongside.

pub mod bbcode;
pub mod circuit;
pub mod decoder;
pub mod dem;
pub mod gf2;
pub mod harness;
pub mod sampler;
pub mod stats;
pub mod streaming;
pub mod theory;
