//! Search-phase engine for neural architecture search over tabular benchmarks
//! and macro search spaces.
//!
//! The crate is organised around a small number of cooperating modules:
//!
//! - [`archspace`] — architecture encodings: the four-node cell space with its
//!   text grammar, plus three macro spaces (MobileNet-style, ShuffleNet-style,
//!   transformer), with validation, analytic cost models, and variation
//!   operators (random / mutate / crossover).
//! - [`bench`] — ingestion and lookup of a tabular benchmark mapping every
//!   cell to accuracy figures across datasets and splits.
//! - [`search`] — method-agnostic run machinery: evaluators, constraints, the
//!   visited-set archive, budget accounting, result summaries, and trajectory
//!   export.
//! - [`baselines`] — random search, evolutionary search, and a per-dimension
//!   categorical REINFORCE searcher.
//! - [`backend`] — the chat-model abstraction: an OpenAI-compatible HTTP
//!   client, a scripted replay backend, and a table-guided oracle backend for
//!   offline testing.
//! - [`collm`] — the collaborative two-model search loop (a strategy-setting
//!   navigator plus a candidate-emitting generator) and its single-model
//!   variant.
//! - [`ranking`] — Kendall rank correlation and the ranking probe harness
//!   that scores a chat model's ability to order architectures by accuracy.
//! - [`synthetic`] — deterministic synthetic benchmark tables and landscapes
//!   used by tests and offline runs.

pub mod archspace;
pub mod backend;
pub mod baselines;
pub mod bench;
pub mod collm;
pub mod ranking;
pub mod search;
pub mod synthetic;

pub use archspace::{Arch, CostEstimate, SearchSpace};
pub use bench::{BenchTable, DatasetId, Split};
pub use search::{Constraint, CostMetric, Evaluator, SearchConfig, SearchResult};
