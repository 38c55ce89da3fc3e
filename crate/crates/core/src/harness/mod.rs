//! Desk-scale retrieval pipeline: corpus ingestion, query-likelihood
//! retrieval, pseudo-relevance feedback with separation or mixture models,
//! and MAP evaluation.

pub mod compare;
pub mod corpus;
pub mod eval;
pub mod feedback;
pub mod io;
pub mod retrieval;

pub use compare::{compare_methods, CompareConfig, ComparisonReport, MethodResult, MethodSpec};
pub use corpus::{ingest_corpus, Corpus};
pub use eval::{average_precision, evaluate_map, MapReport, Qrels};
pub use feedback::{
    build_feedback_input, feedback_model, rerank_with_feedback, FeedbackConfig, FeedbackInput, FeedbackMethod,
    FeedbackModel, FeedbackRun,
};
pub use io::{read_qrels, read_queries, synthetic_queries, write_corpus_jsonl, write_qrels, write_queries};
pub use retrieval::{initial_retrieval, kl_scores, Query, RankedDoc, RunRanking};
