//! Relevance judgments and mean average precision.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::retrieval::RunRanking;
use crate::error::{Error, Result};

/// Graded judgments per query. A grade above zero counts as relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn insert(&mut self, query_id: &str, doc_id: &str, relevance: u32) {
        self.judgments
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), relevance);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, u32>)> {
        self.judgments.iter()
    }

    pub fn judgments(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map_or(0, |j| j.values().filter(|&&r| r > 0).count())
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// Uninterpolated average precision; relevant documents missing from the
/// ranking contribute zero. A query without relevant documents scores zero.
pub fn average_precision(ranking: &RunRanking, judgments: &BTreeMap<String, u32>) -> f64 {
    let total = judgments.values().filter(|&&r| r > 0).count();
    if total == 0 {
        return 0.0;
    }
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, doc) in ranking.doc_ids().enumerate() {
        if !seen.insert(doc) {
            continue;
        }
        if judgments.get(doc).is_some_and(|&r| r > 0) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReport {
    pub map: f64,
    /// `(query_id, AP)` in run order.
    pub per_query: Vec<(String, f64)>,
}

pub fn evaluate_map(runs: &[RunRanking], qrels: &Qrels) -> Result<MapReport> {
    let per_query = runs
        .iter()
        .map(|run| {
            let j = qrels
                .judgments(&run.query_id)
                .ok_or_else(|| Error::MissingQrels(run.query_id.clone()))?;
            Ok((run.query_id.clone(), average_precision(run, j)))
        })
        .collect::<Result<Vec<_>>>()?;
    let map = if per_query.is_empty() {
        0.0
    } else {
        per_query.iter().map(|(_, ap)| ap).sum::<f64>() / per_query.len() as f64
    };
    Ok(MapReport { map, per_query })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::retrieval::RankedDoc;

    fn run(q: &str, docs: &[&str]) -> RunRanking {
        RunRanking {
            query_id: q.into(),
            entries: docs
                .iter()
                .enumerate()
                .map(|(i, d)| RankedDoc {
                    doc_id: d.to_string(),
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    fn qrels() -> Qrels {
        let mut q = Qrels::default();
        q.insert("q1", "rel", 1);
        q.insert("q1", "non", 0);
        q.insert("q2", "a", 2);
        q.insert("q2", "b", 1);
        q
    }

    #[test]
    fn single_relevant_at_top() {
        let r = evaluate_map(&[run("q1", &["rel"])], &qrels()).unwrap();
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn relevant_at_rank_two() {
        let r = evaluate_map(&[run("q1", &["non", "rel"])], &qrels()).unwrap();
        assert_eq!(r.map, 0.5);
    }

    #[test]
    fn map_is_mean_of_ap() {
        let r = evaluate_map(&[run("q1", &["rel"]), run("q1", &["x", "rel"])], &qrels()).unwrap();
        assert_eq!(r.map, 0.75);
    }

    #[test]
    fn missing_relevant_docs_count_zero() {
        // a at rank 1, b never retrieved: (1/1 + 0) / 2
        let r = evaluate_map(&[run("q2", &["a", "x"])], &qrels()).unwrap();
        assert_eq!(r.map, 0.5);
        // b at rank 3: (1/1 + 2/3) / 2
        let r = evaluate_map(&[run("q2", &["a", "x", "b"])], &qrels()).unwrap();
        assert!((r.map - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn missing_qrels_is_an_error() {
        assert_eq!(
            evaluate_map(&[run("q9", &["a"])], &qrels()).unwrap_err(),
            Error::MissingQrels("q9".into())
        );
    }
}
