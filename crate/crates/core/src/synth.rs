//! Seeded generators with known ground truth: random distributions, nested
//! mixtures `M = outer * (inner * R + (1 - inner) * I_unknown) + (1 - outer) * I_seed`,
//! and small topic/background corpora with relevance judgments.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{linear_combine, TermDistribution, Vocabulary};
use crate::error::{Error, Result};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random distribution over `vocab` with exactly `zeros` zero entries at
/// uniformly chosen positions. Positive entries are drawn from
/// `Uniform[0.5, 1.5)` and normalized.
pub fn random_distribution_with<R: Rng + ?Sized>(
    vocab: Arc<Vocabulary>,
    zeros: usize,
    rng: &mut R,
) -> Result<TermDistribution> {
    let m = vocab.len();
    if zeros >= m {
        return Err(Error::ZerosTooLarge { m, zeros });
    }
    let mut weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
    for i in index::sample(rng, m, zeros) {
        weights[i] = 0.0;
    }
    TermDistribution::normalize(vocab, weights)
}

/// [`random_distribution_with`] over a synthetic vocabulary of `m` terms.
pub fn random_distribution(m: usize, zeros: usize, seed: u64) -> Result<TermDistribution> {
    if zeros >= m {
        return Err(Error::ZerosTooLarge { m, zeros });
    }
    let vocab = Arc::new(Vocabulary::synthetic(m)?);
    random_distribution_with(vocab, zeros, &mut rng_from_seed(seed))
}

/// Ground truth for a nested linear combination.
#[derive(Debug, Clone)]
pub struct SyntheticMixture {
    pub r_true: TermDistribution,
    /// The unknown irrelevance part, never visible to an estimator.
    pub i_unknown: TermDistribution,
    pub i_seed: TermDistribution,
    pub lambda_inner: f64,
    pub lambda_outer: f64,
    /// `lambda_inner * R + (1 - lambda_inner) * I_unknown`.
    pub l_true: TermDistribution,
    /// `lambda_outer * l_true + (1 - lambda_outer) * I_seed`.
    pub m: TermDistribution,
}

pub fn make_mixture(
    r_true: TermDistribution,
    i_unknown: TermDistribution,
    i_seed: TermDistribution,
    lambda_inner: f64,
    lambda_outer: f64,
) -> Result<SyntheticMixture> {
    for l in [lambda_inner, lambda_outer] {
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::LambdaOutOfRange(l));
        }
    }
    let l_true = linear_combine(&r_true, &i_unknown, lambda_inner)?;
    let m = linear_combine(&l_true, &i_seed, lambda_outer)?;
    Ok(SyntheticMixture {
        r_true,
        i_unknown,
        i_seed,
        lambda_inner,
        lambda_outer,
        l_true,
        m,
    })
}

/// Parameters for [`generate_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParams {
    pub num_docs: usize,
    /// Mean document length; actual lengths are uniform in `[L/2, 3L/2]`.
    pub doc_length: usize,
    pub num_queries: usize,
    /// Fraction of all documents that are relevant to some query.
    pub relevant_fraction: f64,
    /// Exponent applied to uniform topic weights; larger is more peaked.
    pub topic_sharpness: f64,
    pub vocab_size: usize,
    /// Number of vocabulary terms carrying each topic.
    pub topic_terms: usize,
    pub query_terms: usize,
    /// Topic share inside relevant documents.
    pub lambda_gen: f64,
    /// Per-query topic shares are drawn from `lambda_gen +- spread`,
    /// kept inside `[0.05, 0.95]`.
    pub lambda_gen_spread: f64,
    /// Zipf exponent of the background distribution.
    pub background_skew: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            num_docs: 1000,
            doc_length: 200,
            num_queries: 20,
            relevant_fraction: 0.2,
            topic_sharpness: 2.0,
            vocab_size: 500,
            topic_terms: 20,
            query_terms: 2,
            lambda_gen: 0.5,
            lambda_gen_spread: 0.0,
            background_skew: 1.0,
        }
    }
}

impl CorpusParams {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.num_docs == 0 || self.doc_length == 0 || self.num_queries == 0 {
            return bad("num_docs, doc_length and num_queries must be positive");
        }
        if !(self.relevant_fraction > 0.0 && self.relevant_fraction < 1.0) {
            return bad("relevant_fraction must be in (0, 1)");
        }
        if self.topic_sharpness.is_nan() || self.topic_sharpness <= 0.0 {
            return bad("topic_sharpness must be positive");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.topic_terms == 0 || self.topic_terms > self.vocab_size {
            return bad("topic_terms must be in 1..=vocab_size");
        }
        if self.query_terms == 0 || self.query_terms > self.topic_terms {
            return bad("query_terms must be in 1..=topic_terms");
        }
        if !(self.lambda_gen > 0.0 && self.lambda_gen <= 1.0)
            || self.lambda_gen_spread.is_nan()
            || self.lambda_gen_spread < 0.0
        {
            return bad("lambda_gen must be in (0, 1] and the spread nonnegative");
        }
        if self.relevant_per_query() * self.num_queries > self.num_docs {
            return bad("not enough documents for the requested relevant fraction");
        }
        Ok(())
    }

    pub fn relevant_per_query(&self) -> usize {
        ((self.relevant_fraction * self.num_docs as f64 / self.num_queries as f64).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticQuery {
    pub id: String,
    pub terms: Vec<String>,
    pub topic: TermDistribution,
    /// Topic share used for this query's relevant documents.
    pub lambda_gen: f64,
}

/// A generated collection with its generating models.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub vocab: Arc<Vocabulary>,
    /// `(doc_id, dense term counts)` in id order.
    pub docs: Vec<(String, Vec<u64>)>,
    pub queries: Vec<SyntheticQuery>,
    /// `(query_id, doc_id) -> relevance`; only relevant pairs are listed.
    pub qrels: BTreeMap<(String, String), u32>,
    pub background: TermDistribution,
}

/// Zipf-shaped background over a random permutation of the vocabulary.
fn background_model<R: Rng>(vocab: &Arc<Vocabulary>, skew: f64, rng: &mut R) -> Result<TermDistribution> {
    let m = vocab.len();
    let mut ranks: Vec<usize> = (0..m).collect();
    ranks.shuffle(rng);
    let weights = ranks.iter().map(|&r| 1.0 / ((r + 1) as f64).powf(skew)).collect();
    TermDistribution::normalize(vocab.clone(), weights)
}

fn topic_model<R: Rng>(vocab: &Arc<Vocabulary>, params: &CorpusParams, rng: &mut R) -> Result<TermDistribution> {
    let mut weights = vec![0.0; vocab.len()];
    for i in index::sample(rng, vocab.len(), params.topic_terms) {
        let u: f64 = rng.gen_range(0.05..1.0);
        weights[i] = u.powf(params.topic_sharpness);
    }
    TermDistribution::normalize(vocab.clone(), weights)
}

fn sample_counts<R: Rng>(sampler: &WeightedIndex<f64>, m: usize, len: usize, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; m];
    for _ in 0..len {
        counts[sampler.sample(rng)] += 1;
    }
    counts
}

/// Generates a corpus where each query owns a block of relevant documents
/// sampled from `lambda_q * topic_q + (1 - lambda_q) * background`, and every
/// other document is sampled from the background alone.
pub fn generate_corpus(params: &CorpusParams, seed: u64) -> Result<SyntheticCorpus> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let vocab = Arc::new(Vocabulary::synthetic(params.vocab_size)?);
    let m = vocab.len();
    let background = background_model(&vocab, params.background_skew, &mut rng)?;
    let bg_sampler = WeightedIndex::new(background.probs()).expect("background has mass");

    let per_query = params.relevant_per_query();
    let mut queries = Vec::with_capacity(params.num_queries);
    let mut relevant_docs: Vec<(usize, Vec<u64>)> = Vec::new();
    for q in 0..params.num_queries {
        let topic = topic_model(&vocab, params, &mut rng)?;
        let lo = (params.lambda_gen - params.lambda_gen_spread).max(0.05);
        let hi = (params.lambda_gen + params.lambda_gen_spread).min(0.95);
        let lambda_gen = if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            params.lambda_gen
        };

        // query terms drawn from the topic without replacement
        let support: Vec<usize> = (0..m).filter(|&i| topic.probs()[i] > 0.0).collect();
        let chosen = support
            .choose_multiple_weighted(&mut rng, params.query_terms, |&i| topic.probs()[i])
            .expect("topic weights are positive");
        let mut terms: Vec<usize> = chosen.copied().collect();
        terms.sort_unstable();

        let mix = linear_combine(&topic, &background, lambda_gen)?;
        let sampler = WeightedIndex::new(mix.probs()).expect("mixture has mass");
        for _ in 0..per_query {
            let len = doc_len(params.doc_length, &mut rng);
            relevant_docs.push((q, sample_counts(&sampler, m, len, &mut rng)));
        }
        queries.push(SyntheticQuery {
            id: format!("q{:03}", q + 1),
            terms: terms.iter().map(|&i| vocab.term(i).to_string()).collect(),
            topic,
            lambda_gen,
        });
    }

    let mut all: Vec<(Option<usize>, Vec<u64>)> = relevant_docs.into_iter().map(|(q, c)| (Some(q), c)).collect();
    while all.len() < params.num_docs {
        let len = doc_len(params.doc_length, &mut rng);
        all.push((None, sample_counts(&bg_sampler, m, len, &mut rng)));
    }
    all.shuffle(&mut rng);

    let width = params.num_docs.to_string().len().max(5);
    let mut docs = Vec::with_capacity(all.len());
    let mut qrels = BTreeMap::new();
    for (i, (owner, counts)) in all.into_iter().enumerate() {
        let id = format!("d{i:0width$}");
        if let Some(q) = owner {
            qrels.insert((queries[q].id.clone(), id.clone()), 1);
        }
        docs.push((id, counts));
    }

    Ok(SyntheticCorpus {
        vocab,
        docs,
        queries,
        qrels,
        background,
    })
}

fn doc_len<R: Rng>(mean: usize, rng: &mut R) -> usize {
    let lo = (mean / 2).max(1);
    let hi = (mean + mean / 2).max(lo);
    rng.gen_range(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_distribution_examples() {
        let a = random_distribution(3, 0, 11).unwrap();
        let b = random_distribution(3, 0, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.probs().iter().all(|p| *p > 0.0));
        let c = random_distribution(3, 1, 5).unwrap();
        assert_eq!(c.probs().iter().filter(|p| **p == 0.0).count(), 1);
        assert_eq!(
            random_distribution(2, 2, 0).unwrap_err(),
            Error::ZerosTooLarge { m: 2, zeros: 2 }
        );
        let d = random_distribution(50, 7, 99).unwrap();
        assert_eq!(d.probs().iter().filter(|p| **p == 0.0).count(), 7);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn dist(p: &[f64]) -> TermDistribution {
        let vocab = Arc::new(Vocabulary::synthetic(p.len()).unwrap());
        TermDistribution::new(vocab, p.to_vec()).unwrap()
    }

    #[test]
    fn mixture_examples() {
        let r = dist(&[0.0, 0.7, 0.3]);
        let seed = dist(&[0.5, 0.3, 0.2]);
        let mix = make_mixture(r.clone(), r.clone(), seed.clone(), 1.0, 0.6).unwrap();
        for (a, b) in mix.m.probs().iter().zip([0.2, 0.54, 0.26]) {
            assert!((a - b).abs() < 1e-15);
        }
        let mix = make_mixture(r.clone(), seed.clone(), seed.clone(), 0.5, 1.0).unwrap();
        assert_eq!(mix.m, mix.l_true);
        let again = linear_combine(&mix.l_true, &mix.i_seed, mix.lambda_outer).unwrap();
        assert!(again.linf_distance(&mix.m) <= 1e-12);
        assert!(make_mixture(r.clone(), r.clone(), dist(&[0.5, 0.5]), 0.5, 0.5).is_err());
        assert!(make_mixture(r.clone(), r, seed, 0.0, 0.5).is_err());
    }

    fn small() -> CorpusParams {
        CorpusParams {
            num_docs: 200,
            num_queries: 5,
            vocab_size: 100,
            ..CorpusParams::default()
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = generate_corpus(&small(), 7).unwrap();
        let b = generate_corpus(&small(), 7).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&small(), 8).unwrap();
        assert_ne!(a.docs, c.docs);
    }

    #[test]
    fn corpus_shape() {
        let p = small();
        let c = generate_corpus(&p, 3).unwrap();
        assert_eq!(c.docs.len(), p.num_docs);
        assert_eq!(c.queries.len(), p.num_queries);
        assert_eq!(c.qrels.len(), p.num_queries * p.relevant_per_query());
        let ids: std::collections::HashSet<_> = c.docs.iter().map(|d| d.0.clone()).collect();
        for (q, d) in c.qrels.keys() {
            assert!(ids.contains(d));
            assert!(c.queries.iter().any(|x| &x.id == q));
        }
        for q in &c.queries {
            assert_eq!(q.terms.len(), p.query_terms);
            for t in &q.terms {
                assert!(q.topic.get(t).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn corpus_parameter_validation() {
        let mut p = small();
        p.relevant_fraction = 1.0;
        assert!(generate_corpus(&p, 0).is_err());
        let mut p = small();
        p.num_docs = 0;
        assert!(generate_corpus(&p, 0).is_err());
        let mut p = small();
        p.query_terms = 50;
        assert!(generate_corpus(&p, 0).is_err());
    }

    #[test]
    fn spread_varies_topic_share() {
        let p = CorpusParams {
            lambda_gen_spread: 0.4,
            ..small()
        };
        let c = generate_corpus(&p, 1).unwrap();
        let shares: Vec<f64> = c.queries.iter().map(|q| q.lambda_gen).collect();
        assert!(shares.iter().all(|l| (0.1..=0.9).contains(l)));
        assert!(shares.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn relevant_docs_score_higher_under_topic() {
        let c = generate_corpus(&small(), 21).unwrap();
        for q in &c.queries {
            let mix = linear_combine(&q.topic, &c.background, q.lambda_gen).unwrap();
            let avg_ll = |rel: bool| {
                let lls: Vec<f64> = c
                    .docs
                    .iter()
                    .filter(|(id, _)| c.qrels.contains_key(&(q.id.clone(), id.clone())) == rel)
                    .map(|(_, counts)| {
                        let n: u64 = counts.iter().sum();
                        counts
                            .iter()
                            .zip(mix.probs())
                            .filter(|(k, _)| **k > 0)
                            .map(|(k, p)| *k as f64 * p.ln())
                            .sum::<f64>()
                            / n as f64
                    })
                    .collect();
                lls.iter().sum::<f64>() / lls.len() as f64
            };
            assert!(avg_ll(true) > avg_ll(false));
        }
    }

    #[test]
    fn relevant_tf_converges_to_generating_mixture() {
        let l1_at = |len: usize| {
            let p = CorpusParams {
                doc_length: len,
                num_docs: 40,
                num_queries: 2,
                relevant_fraction: 0.25,
                vocab_size: 100,
                ..CorpusParams::default()
            };
            let c = generate_corpus(&p, 5).unwrap();
            let q = &c.queries[0];
            let mut totals = vec![0.0; c.vocab.len()];
            for (id, counts) in &c.docs {
                if c.qrels.contains_key(&(q.id.clone(), id.clone())) {
                    for (t, k) in totals.iter_mut().zip(counts) {
                        *t += *k as f64;
                    }
                }
            }
            let tf = TermDistribution::normalize(c.vocab.clone(), totals).unwrap();
            let mix = linear_combine(&q.topic, &c.background, q.lambda_gen).unwrap();
            tf.l1_distance(&mix)
        };
        let coarse = l1_at(100);
        let fine = l1_at(10_000);
        assert!(fine < coarse);
        assert!(fine < 0.05, "L1 at 10^4 tokens per doc: {fine}");
    }
}
