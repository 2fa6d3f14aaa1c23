//! Toolkit for interaction-aware referring video object segmentation
//! datasets: mask codec and metrics, the annotation schema, the evaluation
//! protocol, clip extraction, dataset statistics, and the staged LLM
//! annotation pipeline.

pub mod clips;
pub mod dataset;
pub mod eval;
pub mod io;
pub mod llm;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod stats;
