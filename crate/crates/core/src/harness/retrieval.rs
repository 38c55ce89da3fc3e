//! Dirichlet-smoothed query-likelihood retrieval and KL-divergence rescoring.

use serde::Serialize;

use super::corpus::Corpus;
use crate::error::{Error, Result};

/// Default Dirichlet prior.
pub const DEFAULT_MU: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub id: String,
    pub terms: Vec<String>,
}

impl Query {
    pub fn new(id: impl Into<String>, terms: Vec<String>) -> Self {
        Self { id: id.into(), terms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Ranked documents for one query: scores descending, ties by doc id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRanking {
    pub query_id: String,
    pub entries: Vec<RankedDoc>,
}

impl RunRanking {
    /// Sorts `(doc position, score)` pairs and keeps the first `k`.
    pub fn from_scores(query_id: &str, corpus: &Corpus, scores: Vec<f64>, k: usize) -> Self {
        let ids = corpus.doc_ids();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b])));
        order.truncate(k);
        Self {
            query_id: query_id.to_string(),
            entries: order
                .into_iter()
                .map(|d| RankedDoc {
                    doc_id: ids[d].clone(),
                    score: scores[d],
                })
                .collect(),
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")))
    }
}

/// Query likelihood with Dirichlet smoothing:
/// `score(d) = sum_{w in q} ln((c(w; d) + mu p(w|C)) / (|d| + mu))`.
///
/// Query terms outside the vocabulary contribute the same `ln 0` to every
/// document and are skipped.
pub fn initial_retrieval(query: &Query, corpus: &Corpus, mu: f64, k: usize) -> Result<RunRanking> {
    check_mu(mu)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let known: Vec<usize> = query.terms.iter().filter_map(|t| corpus.vocab().position(t)).collect();
    let coll = corpus.collection_model().probs();
    let scores = (0..corpus.num_docs())
        .map(|d| {
            let len = corpus.doc_length(d) as f64;
            known
                .iter()
                .map(|&w| ((corpus.count(d, w) as f64 + mu * coll[w]) / (len + mu)).ln())
                .sum()
        })
        .collect();
    Ok(RunRanking::from_scores(&query.id, corpus, scores, k))
}

/// `-KL(q || p_d)` for every document, where `p_d` is the Dirichlet-smoothed
/// document model and `query_model` a dense distribution over the corpus
/// vocabulary.
///
/// Only terms in the support of `query_model` enter the sum.
pub fn kl_scores(query_model: &[f64], corpus: &Corpus, mu: f64) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let coll = corpus.collection_model().probs();
    if query_model.len() != coll.len() {
        return Err(Error::LengthMismatch {
            expected: coll.len(),
            got: query_model.len(),
        });
    }
    // sum_w q (ln(mu p_C) - ln q): the part shared by every document before
    // the length normalizer
    let base: f64 = query_model
        .iter()
        .zip(coll)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, c)| q * ((mu * c).ln() - q.ln()))
        .sum();
    Ok((0..corpus.num_docs())
        .map(|d| {
            let len = corpus.doc_length(d) as f64;
            let mut s = base - (len + mu).ln();
            for &(w, c) in corpus.doc_terms(d) {
                let q = query_model[w as usize];
                if q > 0.0 {
                    let bg = mu * coll[w as usize];
                    s += q * ((c as f64 + bg).ln() - bg.ln());
                }
            }
            s
        })
        .collect())
}
