//! Pseudo-relevance feedback: estimate a feedback model from the top-ranked
//! documents and rerank the collection with the expanded query.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use super::corpus::Corpus;
use super::retrieval::{initial_retrieval, kl_scores, Query, RunRanking, DEFAULT_MU};
use crate::dist::{TermDistribution, Vocabulary};
use crate::error::{Error, Result};
use crate::mmf::{closed_form_theta, feedback_tf, run_em, EmConfig, FeedbackSet};
use crate::separation::{dsm, LambdaStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackMethod {
    /// Mixture model feedback fitted by EM at a fixed coefficient.
    Mmf { lambda: f64 },
    /// Linear separation at a fixed coefficient: the closed-form MMF
    /// solution, with negative entries clamped and the rest renormalized.
    DsmFixed { lambda: f64 },
    /// Separation at the lower bound `lambda_L`.
    DsmMinus,
    /// Separation at the minimum squared correlation coefficient.
    Dsm,
}

impl FeedbackMethod {
    fn validate(&self) -> Result<()> {
        match *self {
            FeedbackMethod::Mmf { lambda } | FeedbackMethod::DsmFixed { lambda }
                if !(lambda > 0.0 && lambda <= 1.0) =>
            {
                Err(Error::LambdaOutOfRange(lambda))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    pub method: FeedbackMethod,
    /// Number of top-ranked documents used as feedback.
    pub top_k: usize,
    /// Weight of the original query model in the expanded query.
    pub alpha: f64,
    /// Dirichlet prior for retrieval and reranking.
    pub mu: f64,
    pub em: EmConfig,
    /// Length of the final ranking.
    pub depth: usize,
}

impl FeedbackConfig {
    pub fn new(method: FeedbackMethod) -> Self {
        Self {
            method,
            top_k: 10,
            alpha: 0.5,
            mu: DEFAULT_MU,
            em: EmConfig::default(),
            depth: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feedback documents restricted to their own sub-vocabulary, together with
/// the collection model renormalized over it.
#[derive(Debug, Clone)]
pub struct FeedbackInput {
    pub feedback: FeedbackSet,
    pub background: TermDistribution,
    /// Corpus term index of each sub-vocabulary entry.
    pub term_map: Vec<usize>,
}

/// Collects the top `top_k` documents of `ranking` over the terms occurring in
/// them plus the query terms known to the corpus.
pub fn build_feedback_input(
    corpus: &Corpus,
    ranking: &RunRanking,
    top_k: usize,
    query: &Query,
) -> Result<FeedbackInput> {
    let docs: Vec<usize> = ranking
        .doc_ids()
        .take(top_k)
        .map(|id| {
            corpus
                .doc_position(id)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown document {id}")))
        })
        .collect::<Result<_>>()?;
    if docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }

    let mut terms = BTreeSet::new();
    for &d in &docs {
        terms.extend(corpus.doc_terms(d).iter().map(|&(t, _)| t as usize));
    }
    terms.extend(query.terms.iter().filter_map(|t| corpus.vocab().position(t)));
    let term_map: Vec<usize> = terms.into_iter().collect();
    let vocab = Arc::new(Vocabulary::new(
        term_map.iter().map(|&t| corpus.vocab().term(t).to_string()),
    )?);

    let counts = docs
        .iter()
        .map(|&d| term_map.iter().map(|&t| corpus.count(d, t) as u64).collect())
        .collect();
    let ids = docs.iter().map(|&d| corpus.doc_ids()[d].clone()).collect();
    let feedback = FeedbackSet::new(vocab.clone(), ids, counts)?;
    let coll = corpus.collection_model().probs();
    let background = TermDistribution::normalize(vocab, term_map.iter().map(|&t| coll[t]).collect())?;
    Ok(FeedbackInput {
        feedback,
        background,
        term_map,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackModel {
    pub model: TermDistribution,
    /// Coefficient actually used by the estimator.
    pub lambda_used: f64,
}

/// Estimates the feedback model from the feedback documents and the seed
/// irrelevance distribution.
pub fn feedback_model(
    feedback: &FeedbackSet,
    seed: &TermDistribution,
    method: FeedbackMethod,
    em: EmConfig,
) -> Result<FeedbackModel> {
    method.validate()?;
    let m = feedback_tf(feedback)?;
    let strategy = match method {
        FeedbackMethod::Mmf { lambda } => {
            let r = run_em(feedback, seed, lambda, None, em)?;
            return Ok(FeedbackModel {
                model: r.theta,
                lambda_used: lambda,
            });
        }
        FeedbackMethod::DsmFixed { lambda } => {
            let r = closed_form_theta(&m, seed, lambda)?;
            return Ok(FeedbackModel {
                model: r.theta,
                lambda_used: lambda,
            });
        }
        FeedbackMethod::DsmMinus => LambdaStrategy::LowerBound,
        FeedbackMethod::Dsm => LambdaStrategy::MinSquaredCorrelation,
    };
    let r = dsm(&m, seed, strategy)?;
    Ok(FeedbackModel {
        model: r.output,
        lambda_used: r.lambda_used,
    })
}

/// Expanded query model `alpha * uniform(query) + (1 - alpha) * feedback`
/// over the corpus vocabulary. Unknown query terms are dropped.
fn expanded_query(
    corpus: &Corpus,
    query: &Query,
    alpha: f64,
    feedback: Option<(&FeedbackModel, &[usize])>,
) -> Result<Vec<f64>> {
    let mut q = vec![0.0; corpus.vocab().len()];
    let known: Vec<usize> = query.terms.iter().filter_map(|t| corpus.vocab().position(t)).collect();
    let query_weight = if known.is_empty() { 0.0 } else { alpha };
    for &t in &known {
        q[t] += query_weight / known.len() as f64;
    }
    match feedback {
        Some((fb, map)) => {
            let w = 1.0 - query_weight;
            for (&t, &p) in map.iter().zip(fb.model.probs()) {
                q[t] += w * p;
            }
        }
        None if known.is_empty() => return Err(Error::EmptyFeedback),
        None => {}
    }
    Ok(q)
}

/// Outcome of the feedback pipeline for one query.
#[derive(Debug, Clone)]
pub struct FeedbackRun {
    pub ranking: RunRanking,
    /// `None` when `alpha = 1` and no feedback model was estimated.
    pub lambda_used: Option<f64>,
}

/// Initial retrieval, feedback estimation from the top `top_k` documents and a
/// KL-divergence rerank of the whole collection.
pub fn rerank_with_feedback(query: &Query, corpus: &Corpus, config: &FeedbackConfig) -> Result<FeedbackRun> {
    config.validate()?;
    if config.alpha == 1.0 {
        let q = expanded_query(corpus, query, 1.0, None)?;
        let scores = kl_scores(&q, corpus, config.mu)?;
        return Ok(FeedbackRun {
            ranking: RunRanking::from_scores(&query.id, corpus, scores, config.depth),
            lambda_used: None,
        });
    }
    let initial = initial_retrieval(query, corpus, config.mu, config.top_k)?;
    let input = build_feedback_input(corpus, &initial, config.top_k, query)?;
    let fb = feedback_model(&input.feedback, &input.background, config.method, config.em)?;
    let q = expanded_query(corpus, query, config.alpha, Some((&fb, &input.term_map)))?;
    let scores = kl_scores(&q, corpus, config.mu)?;
    Ok(FeedbackRun {
        ranking: RunRanking::from_scores(&query.id, corpus, scores, config.depth),
        lambda_used: Some(fb.lambda_used),
    })
}
