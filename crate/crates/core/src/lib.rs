//! Complexity-aware hybrid retrieval for spreadsheet question answering.
//!
//! Sheets are profiled for header depth and merge density, indexed as
//! description-embedded blocks and (when flat) as a relational table, and
//! queried through a routed chunk/SQL pipeline with a confidence gate.

pub mod chunk;
pub mod engine;
pub mod eval;
pub mod grid;
pub mod llm;
pub mod scalar;
pub mod sql;
pub mod sqlgen;
pub mod structure;
pub mod text;

pub use scalar::Scalar;

pub type Engine = engine::Engine<f64>;
pub type EngineConfig = engine::EngineConfig<f64>;
pub type SheetIndex = engine::SheetIndex<f64>;
pub type Answer = engine::Answer<f64>;
pub type VectorIndex = chunk::VectorIndex<f64>;

pub type Engine32 = engine::Engine<f32>;
pub type EngineConfig32 = engine::EngineConfig<f32>;
