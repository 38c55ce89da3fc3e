//! Text formats: JSONL corpora, TSV queries and TREC qrels.

use std::io::{BufRead, Write};

use serde::Serialize;

use super::corpus::Corpus;
use super::eval::Qrels;
use super::retrieval::Query;
use crate::error::{Error, Result};
use crate::synth::SyntheticCorpus;

/// `query_id<TAB>term term term`, one query per line.
pub fn read_queries<R: BufRead>(reader: R) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
            line: n + 1,
            message: "expected `query_id<TAB>terms`".into(),
        })?;
        let terms: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if id.is_empty() || terms.is_empty() {
            return Err(Error::MalformedRecord {
                line: n + 1,
                message: "empty query id or query text".into(),
            });
        }
        out.push(Query::new(id, terms));
    }
    Ok(out)
}

pub fn write_queries<W: Write>(mut w: W, queries: &[Query]) -> Result<()> {
    for q in queries {
        writeln!(w, "{}\t{}", q.id, q.terms.join(" "))?;
    }
    Ok(())
}

/// TREC qrels: `query_id 0 doc_id relevance`.
pub fn read_qrels<R: BufRead>(reader: R) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |message: &str| Error::MalformedRecord {
            line: n + 1,
            message: message.to_string(),
        };
        if fields.len() != 4 {
            return Err(malformed("expected `query_id 0 doc_id relevance`"));
        }
        let rel: u32 = fields[3]
            .parse()
            .map_err(|_| malformed("relevance must be a nonnegative integer"))?;
        qrels.insert(fields[0], fields[2], rel);
    }
    Ok(qrels)
}

pub fn write_qrels<W: Write>(mut w: W, qrels: &Qrels) -> Result<()> {
    for (q, docs) in qrels.iter() {
        for (d, rel) in docs {
            writeln!(w, "{q} 0 {d} {rel}")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonDocOut<'a> {
    doc_id: &'a str,
    terms: Vec<&'a str>,
}

/// Writes each document as a JSONL record, repeating terms by count in
/// vocabulary order.
pub fn write_corpus_jsonl<W: Write>(mut w: W, corpus: &Corpus) -> Result<()> {
    let vocab = corpus.vocab();
    for (d, id) in corpus.doc_ids().iter().enumerate() {
        let mut terms = Vec::with_capacity(corpus.doc_length(d) as usize);
        for &(t, c) in corpus.doc_terms(d) {
            terms.extend(std::iter::repeat_n(vocab.term(t as usize), c as usize));
        }
        let rec = JsonDocOut { doc_id: id, terms };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Queries and qrels of a generated corpus in the harness types.
pub fn synthetic_queries(s: &SyntheticCorpus) -> (Vec<Query>, Qrels) {
    let queries = s.queries.iter().map(|q| Query::new(&q.id, q.terms.clone())).collect();
    let mut qrels = Qrels::default();
    for ((q, d), rel) in &s.qrels {
        qrels.insert(q, d, *rel);
    }
    (queries, qrels)
}
