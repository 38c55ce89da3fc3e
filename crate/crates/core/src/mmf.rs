//! Mixture model feedback: feedback documents are modeled as draws from
//! `lambda * theta + (1 - lambda) * C`, with `C` the collection model and
//! `theta` the topic model fitted by EM.
//!
//! At an interior fixed point the EM solution satisfies
//! `lambda * theta + (1 - lambda) * C = TF`, so `theta` can be computed in one
//! pass as the linear separation `TF / lambda + (1 - 1 / lambda) * C`
//! ([`closed_form_theta`]). [`em_equivalence_gap`] measures how far an EM run
//! is from that closed form.

use std::sync::Arc;

use serde::Serialize;

use crate::dist::{kl_raw, TermDistribution, Vocabulary};
use crate::error::{Error, Result};
use crate::separation::{separation_path, NEGATIVE_DUST};

/// Per-document term counts of the feedback documents.
#[derive(Debug, Clone)]
pub struct FeedbackSet {
    vocab: Arc<Vocabulary>,
    doc_ids: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl FeedbackSet {
    pub fn new(vocab: Arc<Vocabulary>, doc_ids: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if doc_ids.len() != counts.len() {
            return Err(Error::InvalidParameter(format!(
                "{} doc ids for {} count vectors",
                doc_ids.len(),
                counts.len()
            )));
        }
        if let Some(bad) = counts.iter().find(|c| c.len() != vocab.len()) {
            return Err(Error::LengthMismatch {
                expected: vocab.len(),
                got: bad.len(),
            });
        }
        Ok(Self { vocab, doc_ids, counts })
    }

    /// A single pseudo-document holding `counts`.
    pub fn single(vocab: Arc<Vocabulary>, counts: Vec<u64>) -> Result<Self> {
        Self::new(vocab, vec!["d0".to_string()], vec![counts])
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// `c(w, F) = sum_d c(w; d)` as floats.
    pub fn term_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.vocab.len()];
        for doc in &self.counts {
            for (t, &c) in totals.iter_mut().zip(doc) {
                *t += c as f64;
            }
        }
        totals
    }
}

/// Maximum-likelihood term distribution of the feedback documents.
pub fn feedback_tf(feedback: &FeedbackSet) -> Result<TermDistribution> {
    let totals = feedback.term_totals();
    if totals.iter().all(|&c| c == 0.0) {
        return Err(Error::EmptyFeedback);
    }
    TermDistribution::normalize(feedback.vocab.clone(), totals)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

fn check_inputs(
    feedback: &FeedbackSet,
    theta: &TermDistribution,
    background: &TermDistribution,
    lambda: f64,
) -> Result<()> {
    theta.check_compatible(background)?;
    if theta.vocab().terms() != feedback.vocab.terms() {
        return Err(Error::VocabMismatch);
    }
    check_lambda(lambda)
}

/// `sum_d sum_w c(w; d) * ln(lambda * theta(w) + (1 - lambda) * C(w))`.
pub fn mmf_log_likelihood(
    feedback: &FeedbackSet,
    theta: &TermDistribution,
    background: &TermDistribution,
    lambda: f64,
) -> Result<f64> {
    check_inputs(feedback, theta, background, lambda)?;
    log_likelihood_raw(&feedback.term_totals(), theta.probs(), background.probs(), lambda)
}

fn log_likelihood_raw(totals: &[f64], theta: &[f64], background: &[f64], lambda: f64) -> Result<f64> {
    let mut ll = 0.0;
    for (index, ((&c, &t), &b)) in totals.iter().zip(theta).zip(background).enumerate() {
        if c == 0.0 {
            continue;
        }
        let p = lambda * t + (1.0 - lambda) * b;
        if p <= 0.0 {
            return Err(Error::ZeroMixtureProbability { index });
        }
        ll += c * p.ln();
    }
    Ok(ll)
}

/// One EM iteration.
///
/// E step: `p(z_w = 1) = (1 - lambda) C(w) / (lambda theta(w) + (1 - lambda) C(w))`,
/// the posterior that an occurrence of `w` came from the background.
/// M step: `theta'(w)` proportional to `(1 - p(z_w = 1)) * c(w, F)`.
///
/// A term whose mixture probability is zero is attributed entirely to the
/// background, which is the limit of the posterior as `theta(w) -> 0`.
pub fn em_step(
    feedback: &FeedbackSet,
    theta: &TermDistribution,
    background: &TermDistribution,
    lambda: f64,
) -> Result<TermDistribution> {
    check_inputs(feedback, theta, background, lambda)?;
    let probs = em_step_raw(&feedback.term_totals(), theta.probs(), background.probs(), lambda)?;
    Ok(TermDistribution::from_parts_unchecked(theta.vocab().clone(), probs))
}

fn em_step_raw(totals: &[f64], theta: &[f64], background: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut next: Vec<f64> = totals
        .iter()
        .zip(theta)
        .zip(background)
        .map(|((&c, &t), &b)| {
            let topic = lambda * t;
            let mix = topic + (1.0 - lambda) * b;
            if c == 0.0 || mix <= 0.0 {
                0.0
            } else {
                // 1 - p(z_w = 1)
                c * topic / mix
            }
        })
        .collect();
    let norm: f64 = next.iter().sum();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    next.iter_mut().for_each(|v| *v /= norm);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Stop once the L1 change between successive iterates drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmResult {
    pub theta: TermDistribution,
    pub lambda: f64,
    pub iterations: usize,
    /// Log-likelihood of the initial point followed by one entry per iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub final_delta: f64,
}

/// Runs EM from `init` (uniform when `None`) until the L1 change falls below
/// `config.tol` or `config.max_iter` iterations have run.
pub fn run_em(
    feedback: &FeedbackSet,
    background: &TermDistribution,
    lambda: f64,
    init: Option<&TermDistribution>,
    config: EmConfig,
) -> Result<EmResult> {
    if config.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let mut theta = match init {
        Some(t) => t.clone(),
        None => TermDistribution::uniform(background.vocab().clone()),
    };
    check_inputs(feedback, &theta, background, lambda)?;

    let totals = feedback.term_totals();
    if totals.iter().all(|&c| c == 0.0) {
        return Err(Error::EmptyFeedback);
    }
    let bg = background.probs();
    let mut trace = vec![log_likelihood_raw(&totals, theta.probs(), bg, lambda)?];
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    let mut converged = false;

    while iterations < config.max_iter {
        let next = em_step_raw(&totals, theta.probs(), bg, lambda)?;
        delta = next.iter().zip(theta.probs()).map(|(a, b)| (a - b).abs()).sum();
        theta = TermDistribution::from_parts_unchecked(theta.vocab().clone(), next);
        trace.push(log_likelihood_raw(&totals, theta.probs(), bg, lambda)?);
        iterations += 1;
        // With lambda = 1 every posterior is zero, so the first M step already
        // returns TF, which is a fixed point.
        if delta < config.tol || lambda == 1.0 {
            converged = true;
            break;
        }
    }

    Ok(EmResult {
        theta,
        lambda,
        iterations,
        loglik_trace: trace,
        converged,
        final_delta: delta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedForm {
    pub theta: TermDistribution,
    /// True when the raw separation went negative and was projected back.
    pub clamped: bool,
}

/// `theta = TF / lambda + (1 - 1 / lambda) * C`.
///
/// When some raw entry is below `-1e-9`, negatives are set to zero and the
/// vector renormalized, and `clamped` is set.
pub fn closed_form_theta(tf: &TermDistribution, background: &TermDistribution, lambda: f64) -> Result<ClosedForm> {
    tf.check_compatible(background)?;
    check_lambda(lambda)?;
    let mut raw = separation_path(tf.probs(), background.probs(), 1.0 / lambda);
    let clamped = raw.iter().any(|&v| v < -NEGATIVE_DUST);
    raw.iter_mut().for_each(|v| *v = v.max(0.0));
    let theta = TermDistribution::normalize(tf.vocab().clone(), raw)?;
    Ok(ClosedForm { theta, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// `KL(closed, theta_EM)` after adding `1e-12` to both and renormalizing.
    pub kl_em_vs_closed: f64,
    /// `max_w |lambda theta_EM(w) + (1 - lambda) C(w) - TF(w)|`.
    pub linearity_residual: f64,
    pub clamped: bool,
}

/// Smoothing used only inside the gap measurement.
pub const GAP_SMOOTHING: f64 = 1e-12;

/// Compares an EM run against the closed-form separation.
pub fn em_equivalence_gap(
    em: &EmResult,
    closed: &ClosedForm,
    tf: &TermDistribution,
    background: &TermDistribution,
) -> Result<EquivalenceReport> {
    em.theta.check_compatible(&closed.theta)?;
    em.theta.check_compatible(tf)?;
    tf.check_compatible(background)?;
    let p = closed.theta.smoothed(GAP_SMOOTHING);
    let q = em.theta.smoothed(GAP_SMOOTHING);
    let kl = kl_raw(p.probs(), q.probs())?.max(0.0);
    let lambda = em.lambda;
    let residual = em
        .theta
        .probs()
        .iter()
        .zip(background.probs())
        .zip(tf.probs())
        .map(|((t, c), f)| (lambda * t + (1.0 - lambda) * c - f).abs())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        kl_em_vs_closed: kl,
        linearity_residual: residual,
        clamped: closed.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vocab(m: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::synthetic(m).unwrap())
    }

    fn dist(v: &Arc<Vocabulary>, p: &[f64]) -> TermDistribution {
        TermDistribution::new(v.clone(), p.to_vec()).unwrap()
    }

    #[test]
    fn tf_examples() {
        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![3, 1]).unwrap();
        assert_eq!(feedback_tf(&f).unwrap().probs(), &[0.75, 0.25]);
        let f = FeedbackSet::new(v.clone(), vec!["a".into(), "b".into()], vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(feedback_tf(&f).unwrap().probs(), &[0.5, 0.5]);
        let f = FeedbackSet::single(v.clone(), vec![0, 0]).unwrap();
        assert_eq!(feedback_tf(&f).unwrap_err(), Error::EmptyFeedback);
        assert!(FeedbackSet::single(v, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn likelihood_examples() {
        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![3, 1]).unwrap();
        let c = dist(&v, &[0.5, 0.5]);
        let ll = mmf_log_likelihood(&f, &dist(&v, &[1.0, 0.0]), &c, 0.5).unwrap();
        assert_relative_eq!(ll, 3.0 * 0.75f64.ln() + 0.25f64.ln(), epsilon = 1e-12);

        let c2 = dist(&v, &[0.3, 0.7]);
        let expected = 3.0 * 0.3f64.ln() + 0.7f64.ln();
        for lambda in [0.1, 0.5, 1.0] {
            let ll = mmf_log_likelihood(&f, &c2, &c2, lambda).unwrap();
            assert_relative_eq!(ll, expected, epsilon = 1e-12);
        }

        let closed = closed_form_theta(&feedback_tf(&f).unwrap(), &c2, 0.9).unwrap();
        let uniform = TermDistribution::uniform(v.clone());
        assert!(
            mmf_log_likelihood(&f, &closed.theta, &c2, 0.9).unwrap()
                >= mmf_log_likelihood(&f, &uniform, &c2, 0.9).unwrap()
        );

        let zero_bg = dist(&v, &[1.0, 0.0]);
        assert_eq!(
            mmf_log_likelihood(&f, &dist(&v, &[1.0, 0.0]), &zero_bg, 0.5).unwrap_err(),
            Error::ZeroMixtureProbability { index: 1 }
        );
    }

    #[test]
    fn em_step_examples() {
        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![3, 1]).unwrap();
        let c = dist(&v, &[0.5, 0.5]);
        // posteriors 1/3 and 1, numerators 2 and 0
        let next = em_step(&f, &dist(&v, &[1.0, 0.0]), &c, 0.5).unwrap();
        assert_eq!(next.probs(), &[1.0, 0.0]);

        let tf = feedback_tf(&f).unwrap();
        let next = em_step(&f, &tf, &tf, 0.4).unwrap();
        assert!(next.linf_distance(&tf) < 1e-15);

        let next = em_step(&f, &TermDistribution::uniform(v.clone()), &c, 1.0).unwrap();
        assert_eq!(next, tf);
    }

    #[test]
    fn em_step_zero_denominator() {
        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![0, 4]).unwrap();
        let c = dist(&v, &[0.5, 0.5]);
        assert_eq!(
            em_step(&f, &dist(&v, &[1.0, 0.0]), &c, 0.5).unwrap_err(),
            Error::ZeroDenominator
        );
    }

    #[test]
    fn run_em_from_background_is_immediate() {
        let v = vocab(3);
        let f = FeedbackSet::single(v.clone(), vec![2, 3, 5]).unwrap();
        let tf = feedback_tf(&f).unwrap();
        let r = run_em(&f, &tf, 0.5, Some(&tf), EmConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.theta.linf_distance(&tf) < 1e-15);
    }

    #[test]
    fn run_em_lambda_one_returns_tf_after_one_step() {
        let v = vocab(3);
        let f = FeedbackSet::single(v.clone(), vec![2, 3, 5]).unwrap();
        let c = dist(&v, &[0.2, 0.3, 0.5]);
        let r = run_em(&f, &c, 1.0, None, EmConfig::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.theta, feedback_tf(&f).unwrap());
    }

    #[test]
    fn run_em_rejects_bad_config() {
        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![3, 1]).unwrap();
        let c = dist(&v, &[0.5, 0.5]);
        let cfg = EmConfig {
            tol: 1e-10,
            max_iter: 0,
        };
        assert!(matches!(
            run_em(&f, &c, 0.5, None, cfg).unwrap_err(),
            Error::InvalidParameter(_)
        ));
        let cfg = EmConfig { tol: 0.0, max_iter: 10 };
        assert!(run_em(&f, &c, 0.5, None, cfg).is_err());
        assert!(run_em(&f, &c, 0.0, None, EmConfig::default()).is_err());
    }

    // counts [3, 1], C uniform, lambda 0.5: the closed form is exactly [1, 0],
    // sitting where the interior and boundary solutions meet. EM approaches it
    // sublinearly (theta_2 ~ 3 / (8 n)), so tol 1e-10 is out of reach in 10^4
    // iterations, but the iterates head monotonically to [1, 0].
    #[test]
    fn run_em_critical_fixture_approaches_closed_form() {
        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![3, 1]).unwrap();
        let c = dist(&v, &[0.5, 0.5]);
        let tf = feedback_tf(&f).unwrap();
        let closed = closed_form_theta(&tf, &c, 0.5).unwrap();
        assert!(!closed.clamped);
        assert_eq!(closed.theta.probs(), &[1.0, 0.0]);

        let r = run_em(&f, &c, 0.5, None, EmConfig::default()).unwrap();
        let tail = r.theta.probs()[1];
        assert!(tail > 0.0 && tail < 1e-4, "theta_2 = {tail}");
        assert!((tail * r.iterations as f64 - 0.375).abs() < 0.01);
        let gap = em_equivalence_gap(&r, &closed, &tf, &c).unwrap();
        assert!(gap.kl_em_vs_closed < 1e-4);
        assert!(gap.linearity_residual < 1e-4);

        // started at the fixed point, EM stays there exactly
        let r = run_em(&f, &c, 0.5, Some(&closed.theta), EmConfig::default()).unwrap();
        assert!(r.converged);
        let gap = em_equivalence_gap(&r, &closed, &tf, &c).unwrap();
        assert!(gap.kl_em_vs_closed <= 1e-8);
        assert!(gap.linearity_residual <= 1e-8);
    }

    #[test]
    fn closed_form_examples() {
        let v = vocab(2);
        let tf = dist(&v, &[0.75, 0.25]);
        let c = dist(&v, &[0.5, 0.5]);
        let r = closed_form_theta(&tf, &c, 1.0).unwrap();
        assert_eq!(r.theta, tf);
        assert!(!r.clamped);

        let r = closed_form_theta(&tf, &c, 0.9).unwrap();
        assert!(!r.clamped);
        assert_relative_eq!(r.theta.probs()[0], 0.7 / 0.9, epsilon = 1e-12);
        assert_relative_eq!(r.theta.probs()[1], 0.2 / 0.9, epsilon = 1e-12);

        // raw [1.75, -0.75]
        let r = closed_form_theta(&tf, &c, 0.2).unwrap();
        assert!(r.clamped);
        assert_eq!(r.theta.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn clamped_boundary_is_optimal_for_two_terms() {
        // d/dtheta_1 of the likelihood on the segment theta = [t, 1 - t]
        // at t = 1 is positive, so the constrained optimum is [1, 0]
        let lambda = 0.2;
        let (c1, c2) = (3.0, 1.0);
        let d = c1 * lambda / (lambda + (1.0 - lambda) * 0.5) - c2 * lambda / ((1.0 - lambda) * 0.5);
        assert!(d > 0.0);

        let v = vocab(2);
        let f = FeedbackSet::single(v.clone(), vec![3, 1]).unwrap();
        let c = dist(&v, &[0.5, 0.5]);
        let r = run_em(&f, &c, lambda, None, EmConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.theta.probs()[1] < 1e-9);
    }

    #[test]
    fn gap_is_zero_when_tf_equals_background() {
        let v = vocab(3);
        let f = FeedbackSet::single(v.clone(), vec![2, 3, 5]).unwrap();
        let tf = feedback_tf(&f).unwrap();
        let r = run_em(&f, &tf, 0.5, Some(&tf), EmConfig::default()).unwrap();
        let closed = closed_form_theta(&tf, &tf, 0.5).unwrap();
        let gap = em_equivalence_gap(&r, &closed, &tf, &tf).unwrap();
        assert!(gap.kl_em_vs_closed < 1e-15);
        assert!(gap.linearity_residual < 1e-15);
    }

    #[test]
    fn loglik_trace_ascends() {
        let v = vocab(4);
        let f = FeedbackSet::new(
            v.clone(),
            vec!["a".into(), "b".into()],
            vec![vec![5, 1, 0, 2], vec![3, 0, 1, 4]],
        )
        .unwrap();
        let c = dist(&v, &[0.1, 0.4, 0.3, 0.2]);
        let r = run_em(&f, &c, 0.3, None, EmConfig::default()).unwrap();
        for w in r.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert_eq!(r.loglik_trace.len(), r.iterations + 1);
    }
}
