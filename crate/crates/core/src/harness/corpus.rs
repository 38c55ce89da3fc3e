use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::sync::Arc;

use serde::Deserialize;

use crate::dist::{TermDistribution, Vocabulary};
use crate::error::{Error, Result};
use crate::synth::SyntheticCorpus;

/// An immutable bag-of-words collection.
///
/// The vocabulary is the lexicographically sorted union of all document
/// terms, so the collection model has full support.
#[derive(Debug, Clone)]
pub struct Corpus {
    vocab: Arc<Vocabulary>,
    doc_ids: Vec<String>,
    doc_index: HashMap<String, usize>,
    /// Sparse `(term index, count)` pairs sorted by term index.
    docs: Vec<Vec<(u32, u32)>>,
    doc_lengths: Vec<u64>,
    collection_model: TermDistribution,
}

impl Corpus {
    /// Builds a corpus from `(doc_id, [(term, count)])` records, keeping the
    /// input document order.
    pub fn from_documents<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<(String, u64)>)>,
    {
        let mut doc_ids = Vec::new();
        let mut doc_index = HashMap::new();
        let mut raw: Vec<BTreeMap<String, u64>> = Vec::new();
        for (id, terms) in records {
            if doc_index.contains_key(&id) {
                return Err(Error::DuplicateDocId(id));
            }
            doc_index.insert(id.clone(), doc_ids.len());
            doc_ids.push(id);
            let mut bag = BTreeMap::new();
            for (t, c) in terms {
                if c > 0 {
                    *bag.entry(t).or_insert(0) += c;
                }
            }
            raw.push(bag);
        }
        if doc_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let mut terms: Vec<&String> = raw.iter().flat_map(|b| b.keys()).collect();
        terms.sort_unstable();
        terms.dedup();
        let vocab = Arc::new(Vocabulary::new(terms.into_iter().cloned())?);

        let mut totals = vec![0.0; vocab.len()];
        let mut docs = Vec::with_capacity(raw.len());
        let mut doc_lengths = Vec::with_capacity(raw.len());
        for bag in &raw {
            // BTreeMap order is lexicographic, matching vocabulary order
            let sparse: Vec<(u32, u32)> = bag
                .iter()
                .map(|(t, &c)| {
                    let i = vocab.position(t).expect("term collected above");
                    totals[i] += c as f64;
                    (i as u32, c as u32)
                })
                .collect();
            doc_lengths.push(bag.values().sum());
            docs.push(sparse);
        }
        let collection_model = TermDistribution::normalize(vocab.clone(), totals)?;
        Ok(Self {
            vocab,
            doc_ids,
            doc_index,
            docs,
            doc_lengths,
            collection_model,
        })
    }

    /// Converts a generated corpus, dropping vocabulary terms that never occur.
    pub fn from_synthetic(s: &SyntheticCorpus) -> Result<Self> {
        Self::from_documents(s.docs.iter().map(|(id, counts)| {
            let terms = counts
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(i, c)| (s.vocab.term(i).to_string(), *c))
                .collect();
            (id.clone(), terms)
        }))
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn collection_model(&self) -> &TermDistribution {
        &self.collection_model
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_position(&self, id: &str) -> Option<usize> {
        self.doc_index.get(id).copied()
    }

    pub fn doc_length(&self, doc: usize) -> u64 {
        self.doc_lengths[doc]
    }

    /// Sparse term counts of document `doc`, sorted by term index.
    pub fn doc_terms(&self, doc: usize) -> &[(u32, u32)] {
        &self.docs[doc]
    }

    pub fn count(&self, doc: usize, term: usize) -> u32 {
        let d = &self.docs[doc];
        d.binary_search_by_key(&(term as u32), |&(t, _)| t)
            .map(|i| d[i].1)
            .unwrap_or(0)
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    doc_id: String,
    terms: Vec<String>,
}

/// Reads a JSONL stream with one `{"doc_id": ..., "terms": [...]}` object per
/// line. Blank lines are skipped.
pub fn ingest_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: JsonDoc = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: n + 1,
            message: e.to_string(),
        })?;
        records.push((doc.doc_id, doc.terms.into_iter().map(|t| (t, 1)).collect()));
    }
    Corpus::from_documents(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_example() {
        let src = "{\"doc_id\":\"d1\",\"terms\":[\"a\",\"a\",\"b\"]}\n\n{\"doc_id\":\"d2\",\"terms\":[\"b\",\"c\"]}\n";
        let c = ingest_corpus(src.as_bytes()).unwrap();
        assert_eq!(c.vocab().terms(), &["a", "b", "c"]);
        assert_eq!(c.collection_model().probs(), &[0.4, 0.4, 0.2]);
        assert_eq!(c.doc_length(0), 3);
        assert_eq!(c.count(0, 0), 2);
        assert_eq!(c.count(1, 0), 0);
        assert_eq!(c.doc_position("d2"), Some(1));
    }

    #[test]
    fn ingest_errors() {
        assert_eq!(ingest_corpus("".as_bytes()).unwrap_err(), Error::EmptyCorpus);
        let dup = "{\"doc_id\":\"x\",\"terms\":[\"a\"]}\n{\"doc_id\":\"x\",\"terms\":[\"b\"]}\n";
        assert_eq!(
            ingest_corpus(dup.as_bytes()).unwrap_err(),
            Error::DuplicateDocId("x".into())
        );
        let bad = "{\"doc_id\":\"x\",\"terms\":[\"a\"]}\n{\"doc_id\":3}\n";
        assert!(matches!(
            ingest_corpus(bad.as_bytes()).unwrap_err(),
            Error::MalformedRecord { line: 2, .. }
        ));
    }
}
