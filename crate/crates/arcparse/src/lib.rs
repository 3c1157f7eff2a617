//! Arc-standard transition-based dependency parsing toolkit.
//!
//! The crate covers the full pipeline: CoNLL-U treebank ingestion and
//! statistics ([`treebank`]), the arc-standard transition machine
//! ([`transition`]), training oracles including an ambiguity-aware oracle
//! that returns every correct transition for a configuration ([`oracle`]),
//! a BiLSTM classifier trained with soft-target cross-entropy ([`neural`]),
//! the per-sentence training loop ([`trainer`]), and greedy decoding plus
//! attachment-score evaluation ([`evaluator`]).
//!
//! Per-sentence work (decoding, scoring, statistics) fans out across
//! threads via the `parallel` feature (enabled by default); outputs are
//! deterministic and independent of thread count.

pub mod cli;
pub mod evaluator;
pub mod manifest;
pub mod neural;
pub mod oracle;
pub mod par;
pub mod trainer;
pub mod transition;
pub mod treebank;
