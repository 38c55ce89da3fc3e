//! Vocabulary-indexed probability vectors and the numerical primitives shared
//! by separation and feedback: convex combination, Pearson correlation, the
//! KL / symmetrized KL / JS divergences, and their analytic derivatives along
//! the separation path `l(xi) = xi * (M - I) + I`.
//!
//! All logarithms are natural, so divergences are in nats.

use std::collections::HashMap;
use std::sync::Arc;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `sum(p) == 1` for a valid distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Ordered set of unique terms shared by every distribution over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let terms: Vec<String> = terms.into_iter().map(Into::into).collect();
        if terms.len() < 2 {
            return Err(Error::VocabularyTooSmall(terms.len()));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::DuplicateTerm(t.clone()));
            }
        }
        Ok(Self { terms, index })
    }

    /// Vocabulary of `m` placeholder terms `t000`, `t001`, ... whose
    /// lexicographic order matches their index order.
    pub fn synthetic(m: usize) -> Result<Self> {
        let width = m.saturating_sub(1).to_string().len().max(3);
        Self::new((0..m).map(|i| format!("t{i:0width$}")))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// A probability vector over a [`Vocabulary`].
#[derive(Debug, Clone)]
pub struct TermDistribution {
    vocab: Arc<Vocabulary>,
    probs: Vec<f64>,
}

impl PartialEq for TermDistribution {
    fn eq(&self, other: &Self) -> bool {
        same_vocab(&self.vocab, &other.vocab) && self.probs == other.probs
    }
}

fn same_vocab(a: &Arc<Vocabulary>, b: &Arc<Vocabulary>) -> bool {
    Arc::ptr_eq(a, b) || a.terms == b.terms
}

impl TermDistribution {
    /// Wraps `probs` after checking nonnegativity and unit sum.
    pub fn new(vocab: Arc<Vocabulary>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != vocab.len() {
            return Err(Error::LengthMismatch {
                expected: vocab.len(),
                got: probs.len(),
            });
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::NegativeEntry { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { vocab, probs })
    }

    /// Divides `weights` by their sum.
    pub fn normalize(vocab: Arc<Vocabulary>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != vocab.len() {
            return Err(Error::LengthMismatch {
                expected: vocab.len(),
                got: weights.len(),
            });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::NegativeWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::AllZero);
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { vocab, probs })
    }

    pub fn uniform(vocab: Arc<Vocabulary>) -> Self {
        let m = vocab.len();
        Self {
            vocab,
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.vocab.position(term).map(|i| self.probs[i])
    }

    /// Checks that `other` is defined over the same vocabulary.
    pub fn check_compatible(&self, other: &TermDistribution) -> Result<()> {
        if same_vocab(&self.vocab, &other.vocab) {
            Ok(())
        } else {
            Err(Error::VocabMismatch)
        }
    }

    /// Adds `eps` to every entry and renormalizes.
    pub fn smoothed(&self, eps: f64) -> Self {
        let total = 1.0 + eps * self.len() as f64;
        Self {
            vocab: self.vocab.clone(),
            probs: self.probs.iter().map(|p| (p + eps) / total).collect(),
        }
    }

    pub fn l1_distance(&self, other: &TermDistribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn linf_distance(&self, other: &TermDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn from_parts_unchecked(vocab: Arc<Vocabulary>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(vocab.len(), probs.len());
        Self { vocab, probs }
    }
}

/// Serialized as a `term -> prob` map in vocabulary order.
impl Serialize for TermDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.len()))?;
        for (t, p) in self.vocab.terms().iter().zip(&self.probs) {
            map.serialize_entry(t, p)?;
        }
        map.end()
    }
}

/// `lambda * f + (1 - lambda) * g`.
pub fn linear_combine(f: &TermDistribution, g: &TermDistribution, lambda: f64) -> Result<TermDistribution> {
    f.check_compatible(g)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    let probs = f
        .probs
        .iter()
        .zip(&g.probs)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Ok(TermDistribution::from_parts_unchecked(f.vocab.clone(), probs))
}

/// Pearson correlation between two probability vectors.
///
/// Both vectors have mean exactly `1/m`, so deviations are taken from `1/m`
/// directly. Returns `None` when either vector has zero variance.
pub fn pearson_correlation(p: &TermDistribution, q: &TermDistribution) -> Result<Option<f64>> {
    p.check_compatible(q)?;
    Ok(correlation_raw(&p.probs, &q.probs))
}

pub(crate) fn correlation_raw(p: &[f64], q: &[f64]) -> Option<f64> {
    let mean = 1.0 / p.len() as f64;
    let (mut cov, mut vp, mut vq) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        let (da, db) = (a - mean, b - mean);
        cov += da * db;
        vp += da * da;
        vq += db * db;
    }
    if vp <= ZERO_VARIANCE || vq <= ZERO_VARIANCE {
        return None;
    }
    Some((cov / (vp.sqrt() * vq.sqrt())).clamp(-1.0, 1.0))
}

const ZERO_VARIANCE: f64 = f64::EPSILON * f64::EPSILON;

/// `sum_i P(i) log(P(i) / Q(i))`, with `0 log(0/q) = 0`.
pub fn kl_divergence(p: &TermDistribution, q: &TermDistribution) -> Result<f64> {
    p.check_compatible(q)?;
    kl_raw(&p.probs, &q.probs)
}

pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (index, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::InfiniteDivergence { index });
            }
            sum += a * (a / b).ln();
        }
    }
    Ok(sum)
}

/// `KL(P, Q) + KL(Q, P)`.
pub fn symmetrized_kl(p: &TermDistribution, q: &TermDistribution) -> Result<f64> {
    Ok(kl_divergence(p, q)? + kl_divergence(q, p)?)
}

/// Jensen-Shannon divergence against the midpoint `(P + Q) / 2`. Always finite
/// and bounded by `ln 2`.
pub fn js_divergence(p: &TermDistribution, q: &TermDistribution) -> Result<f64> {
    p.check_compatible(q)?;
    Ok(js_raw(&p.probs, &q.probs))
}

pub(crate) fn js_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let mid = 0.5 * (a + b);
        if a > 0.0 {
            sum += a * (a / mid).ln();
        }
        if b > 0.0 {
            sum += b * (b / mid).ln();
        }
    }
    (0.5 * sum).clamp(0.0, std::f64::consts::LN_2)
}

/// Which divergence between `l(xi)` and `I_S` to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// `KL(l, I_S)`.
    Kl,
    /// `KL(I_S, l)`, the half of the symmetrized KL not covered by `Kl`.
    ReverseKl,
    /// `JS(l, I_S)`.
    Js,
}

/// Analytic derivative with respect to `xi = 1 / lambda_hat` of the chosen
/// divergence between `l(xi) = xi * (M - I_S) + I_S` and `I_S`.
///
/// * `Kl`: `sum (M - I) ln(l / I)`
/// * `ReverseKl`: `sum -I (M - I) / l`
/// * `Js`: `1/2 sum (M - I) ln(2 l / (l + I))`
///
/// Terms where `l` reaches zero while `M != I` make the derivative `+inf`,
/// which is the correct one-sided limit at `xi = 1 / lambda_L`.
pub fn divergence_derivative(
    kind: DivergenceKind,
    m: &TermDistribution,
    seed: &TermDistribution,
    xi: f64,
) -> Result<f64> {
    m.check_compatible(seed)?;
    if !xi.is_finite() || xi < 1.0 {
        return Err(Error::InvalidParameter(format!("xi must be >= 1, got {xi}")));
    }
    let mut sum = 0.0;
    for (index, (&mi, &si)) in m.probs.iter().zip(&seed.probs).enumerate() {
        let diff = mi - si;
        let l = xi * diff + si;
        if l < -DERIVATIVE_DUST {
            return Err(Error::NegativeEntry { index, value: l });
        }
        if diff == 0.0 {
            continue;
        }
        let l = l.max(0.0);
        let term = match kind {
            DivergenceKind::Kl => {
                if si <= 0.0 {
                    return Err(Error::InfiniteDivergence { index });
                }
                if l == 0.0 {
                    f64::INFINITY
                } else {
                    diff * (l / si).ln()
                }
            }
            DivergenceKind::ReverseKl => {
                if l == 0.0 {
                    f64::INFINITY
                } else {
                    -si * diff / l
                }
            }
            DivergenceKind::Js => {
                if l == 0.0 {
                    f64::INFINITY
                } else {
                    0.5 * diff * (2.0 * l / (l + si)).ln()
                }
            }
        };
        sum += term;
    }
    Ok(sum)
}

const DERIVATIVE_DUST: f64 = 1e-9;

/// One row of a divergence profile along a `lambda_hat` grid.
///
/// `kl` and `skl` are `None` when the divergence is infinite (the separated
/// distribution has a zero where `I_S` does not, or vice versa); `rho` is
/// `None` when the correlation is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceProfilePoint {
    pub lambda_hat: f64,
    pub rho: Option<f64>,
    pub kl: Option<f64>,
    pub skl: Option<f64>,
    pub js: f64,
}

impl DivergenceProfilePoint {
    /// Evaluates every diagnostic for `output` against `seed`.
    pub fn evaluate(lambda_hat: f64, output: &TermDistribution, seed: &TermDistribution) -> Self {
        let forward = kl_raw(&output.probs, &seed.probs).ok();
        let reverse = kl_raw(&seed.probs, &output.probs).ok();
        Self {
            lambda_hat,
            rho: correlation_raw(&output.probs, &seed.probs),
            kl: forward,
            skl: forward.zip(reverse).map(|(a, b)| a + b),
            js: js_raw(&output.probs, &seed.probs),
        }
    }

    /// `kl`, reading an infinite divergence as `+inf`.
    pub fn kl_value(&self) -> f64 {
        self.kl.unwrap_or(f64::INFINITY)
    }

    pub fn skl_value(&self) -> f64 {
        self.skl.unwrap_or(f64::INFINITY)
    }
}
