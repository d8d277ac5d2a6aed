//! Consistency checks for machine translation.
//!
//! Noun phrases are pulled out of constituency parses, paired with the text
//! that contains them, and both sides are translated. A noun phrase should
//! translate the same way wherever it appears, so the pair is flagged when
//! too many word occurrences of the phrase's own translation are missing
//! from the container's translation.

pub mod detector;
pub mod evalkit;
pub mod extract;
pub mod gateway;
pub mod pipeline;
pub mod synth;
pub mod treebank;
