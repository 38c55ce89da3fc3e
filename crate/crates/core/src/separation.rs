//! Distribution separation: recovering `l(R, I_unknown)` from a mixture
//! `M = lambda * l + (1 - lambda) * I_S` when only the seed irrelevance
//! distribution `I_S` is known.
//!
//! Three ways to pick the coefficient are provided through [`LambdaStrategy`]:
//! the lower bound `lambda_L = max(1 - M ./ I_S)` (DSM-), the minimum squared
//! correlation between the output and `I_S` (DSM), or a fixed value.

use serde::Serialize;

use crate::dist::{correlation_raw, DivergenceProfilePoint, TermDistribution};
use crate::error::{Error, Result};

/// Floor applied to `lambda_L` so the estimate stays strictly positive.
pub const LAMBDA_FLOOR: f64 = 1e-12;
/// Negative entries down to this size are treated as rounding noise.
pub const NEGATIVE_DUST: f64 = 1e-9;
/// Number of points in the default profile grid.
pub const DEFAULT_GRID_POINTS: usize = 64;

const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LambdaStrategy {
    /// `lambda_hat = lambda_L` (DSM-).
    LowerBound,
    /// `lambda_hat` minimizing `rho(l_hat, I_S)^2` over `[lambda_L, 1]` (DSM).
    MinSquaredCorrelation,
    /// A caller-chosen value in `(0, 1]`, raised to `lambda_L` if below it.
    Fixed(f64),
}

impl LambdaStrategy {
    pub fn fixed(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self::Fixed(value))
        } else {
            Err(Error::LambdaOutOfRange(value))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationResult {
    pub output: TermDistribution,
    pub lambda_lower: f64,
    pub lambda_used: f64,
    pub strategy: LambdaStrategy,
    /// True when a `Fixed` value was raised to `lambda_L`.
    pub lambda_clamped: bool,
    pub rho_at_lambda: Option<f64>,
    /// Negative rounding dust removed from the raw output before renormalizing.
    pub clamped_mass: f64,
    pub diagnostics: DivergenceProfilePoint,
}

/// `max_i (1 - M(i) / I_S(i))` over entries with `I_S(i) > 0`, floored at
/// [`LAMBDA_FLOOR`].
pub fn lambda_lower_bound(m: &TermDistribution, seed: &TermDistribution) -> Result<f64> {
    m.check_compatible(seed)?;
    lower_bound_raw(m.probs(), seed.probs())
}

fn lower_bound_raw(m: &[f64], seed: &[f64]) -> Result<f64> {
    let bound = m
        .iter()
        .zip(seed)
        .filter(|(_, s)| **s > 0.0)
        .map(|(a, s)| 1.0 - a / s)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or(Error::DegenerateSeed)?;
    Ok(bound.max(LAMBDA_FLOOR))
}

/// `l_hat = M / lambda_hat + (1 - 1 / lambda_hat) * I_S`.
///
/// Negative dust no larger than [`NEGATIVE_DUST`] is zeroed and the vector
/// renormalized; anything more negative is an error.
pub fn separate(m: &TermDistribution, seed: &TermDistribution, lambda_hat: f64) -> Result<TermDistribution> {
    separate_with_dust(m, seed, lambda_hat).map(|(d, _)| d)
}

fn separate_with_dust(
    m: &TermDistribution,
    seed: &TermDistribution,
    lambda_hat: f64,
) -> Result<(TermDistribution, f64)> {
    m.check_compatible(seed)?;
    if !(lambda_hat > 0.0 && lambda_hat <= 1.0) {
        return Err(Error::LambdaOutOfRange(lambda_hat));
    }
    let lower = lower_bound_raw(m.probs(), seed.probs())?;
    if lambda_hat < lower - BOUND_SLACK {
        return Err(Error::LambdaBelowBound {
            lambda: lambda_hat,
            lower,
        });
    }
    let xi = 1.0 / lambda_hat;
    let raw = separation_path(m.probs(), seed.probs(), xi);
    clean_dust(raw).map(|(probs, dust)| (TermDistribution::from_parts_unchecked(m.vocab().clone(), probs), dust))
}

/// `xi * M + (1 - xi) * I_S`, evaluated as `xi * (M - I_S) + I_S`.
pub(crate) fn separation_path(m: &[f64], seed: &[f64], xi: f64) -> Vec<f64> {
    m.iter().zip(seed).map(|(a, s)| xi * (a - s) + s).collect()
}

/// Zeroes entries in `[-NEGATIVE_DUST, 0)` and renormalizes. Returns the
/// cleaned vector and the absolute mass removed.
pub(crate) fn clean_dust(mut raw: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let mut dust = 0.0;
    for (index, v) in raw.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEGATIVE_DUST {
                return Err(Error::NegativeEntry { index, value: *v });
            }
            dust -= *v;
            *v = 0.0;
        }
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::AllZero);
    }
    raw.iter_mut().for_each(|v| *v /= sum);
    Ok((raw, dust))
}

/// The `lambda_hat = -a / b` at which `rho(l_hat, I_S) = 0`, with
/// `a = sum (I_S - 1/m)(M - I_S)` and `b = sum (I_S - 1/m)^2`.
///
/// `None` when `I_S` is uniform (`b = 0`).
pub fn zero_correlation_lambda(m: &TermDistribution, seed: &TermDistribution) -> Result<Option<f64>> {
    m.check_compatible(seed)?;
    let mean = 1.0 / m.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for (mi, si) in m.probs().iter().zip(seed.probs()) {
        let dev = si - mean;
        a += dev * (mi - si);
        b += dev * dev;
    }
    if b <= f64::EPSILON * f64::EPSILON {
        return Ok(None);
    }
    // + 0.0 turns -0.0 into 0.0
    Ok(Some(-a / b + 0.0))
}

fn rho_at(m: &TermDistribution, seed: &TermDistribution, lambda_hat: f64) -> Result<Option<f64>> {
    let out = separate(m, seed, lambda_hat)?;
    Ok(correlation_raw(out.probs(), seed.probs()))
}

/// Solves `min rho(l_hat, I_S)^2` subject to `lambda_L <= lambda_hat <= 1`.
///
/// If the zero-correlation point lies in the interval it is the minimizer;
/// otherwise the two endpoints are compared, ties going to `lambda_L`.
pub fn estimate_lambda_min_rho2(m: &TermDistribution, seed: &TermDistribution) -> Result<f64> {
    let lower = lambda_lower_bound(m, seed)?;
    let zero = zero_correlation_lambda(m, seed)?.ok_or(Error::UniformSeed)?;
    if zero >= lower && zero <= 1.0 {
        return Ok(zero);
    }
    // An undefined rho at an endpoint means the output is uniform, which has
    // zero covariance with I_S.
    let sq = |r: Option<f64>| r.map_or(0.0, |r| r * r);
    let at_lower = sq(rho_at(m, seed, lower)?);
    let at_one = sq(rho_at(m, seed, 1.0)?);
    Ok(if at_lower <= at_one { lower } else { 1.0 })
}

/// Runs the separation with the chosen coefficient strategy and collects
/// diagnostics for the output.
pub fn dsm(m: &TermDistribution, seed: &TermDistribution, strategy: LambdaStrategy) -> Result<SeparationResult> {
    let lambda_lower = lambda_lower_bound(m, seed)?;
    let (lambda_used, lambda_clamped) = match strategy {
        LambdaStrategy::LowerBound => (lambda_lower, false),
        LambdaStrategy::MinSquaredCorrelation => (estimate_lambda_min_rho2(m, seed)?, false),
        LambdaStrategy::Fixed(v) => {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::LambdaOutOfRange(v));
            }
            if v < lambda_lower {
                (lambda_lower, true)
            } else {
                (v, false)
            }
        }
    };
    let (output, clamped_mass) = separate_with_dust(m, seed, lambda_used)?;
    let diagnostics = DivergenceProfilePoint::evaluate(lambda_used, &output, seed);
    Ok(SeparationResult {
        output,
        lambda_lower,
        lambda_used,
        strategy,
        lambda_clamped,
        rho_at_lambda: diagnostics.rho,
        clamped_mass,
        diagnostics,
    })
}

/// `points` values log-spaced from 1 down to `lambda_lower`, both included.
pub fn default_grid(lambda_lower: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let ln_low = lambda_lower.ln();
            let mut grid: Vec<f64> = (0..points)
                .map(|k| (ln_low * k as f64 / (points - 1) as f64).exp())
                .collect();
            grid[0] = 1.0;
            grid[points - 1] = lambda_lower;
            grid
        }
    }
}

/// Evaluates rho, KL, symmetrized KL and JS between `l_hat` and `I_S` at each
/// grid value. The grid must be sorted descending within `[lambda_L, 1]`.
pub fn divergence_profile(
    m: &TermDistribution,
    seed: &TermDistribution,
    grid: &[f64],
) -> Result<Vec<DivergenceProfilePoint>> {
    let lower = lambda_lower_bound(m, seed)?;
    for (i, &g) in grid.iter().enumerate() {
        if !(g >= lower - BOUND_SLACK && g <= 1.0) {
            return Err(Error::InvalidGrid(format!("value {g} outside [{lower}, 1]")));
        }
        if i > 0 && g > grid[i - 1] {
            return Err(Error::InvalidGrid("values must be sorted descending".into()));
        }
    }
    grid.iter()
        .map(|&g| {
            let out = separate(m, seed, g.max(lower))?;
            Ok(DivergenceProfilePoint::evaluate(g, &out, seed))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{linear_combine, Vocabulary};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn dist(p: &[f64]) -> TermDistribution {
        let vocab = Arc::new(Vocabulary::synthetic(p.len()).unwrap());
        TermDistribution::new(vocab, p.to_vec()).unwrap()
    }

    fn close(a: &TermDistribution, b: &[f64], eps: f64) {
        for (x, y) in a.probs().iter().zip(b) {
            assert!((x - y).abs() <= eps, "{:?} vs {:?}", a.probs(), b);
        }
    }

    #[test]
    fn lower_bound_examples() {
        let s = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(lambda_lower_bound(&s, &s).unwrap(), LAMBDA_FLOOR);
        let m = dist(&[0.2, 0.54, 0.26]);
        assert_relative_eq!(lambda_lower_bound(&m, &s).unwrap(), 0.6, epsilon = 1e-12);
        let m = dist(&[0.5, 0.5]);
        let s = dist(&[0.8, 0.2]);
        assert_relative_eq!(lambda_lower_bound(&m, &s).unwrap(), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn lower_bound_skips_zero_seed_entries() {
        let m = dist(&[0.4, 0.6, 0.0]);
        let s = dist(&[0.0, 0.5, 0.5]);
        // entries 1 and 2 give -0.2 and 1.0
        assert_eq!(lambda_lower_bound(&m, &s).unwrap(), 1.0);
    }

    #[test]
    fn separate_examples() {
        let m = dist(&[0.2, 0.54, 0.26]);
        let s = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(separate(&m, &s, 1.0).unwrap(), m);
        close(&separate(&m, &s, 0.6).unwrap(), &[0.0, 0.7, 0.3], 1e-12);
        let m2 = dist(&[0.5, 0.5]);
        let s2 = dist(&[0.8, 0.2]);
        close(&separate(&m2, &s2, 0.375).unwrap(), &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn separate_errors() {
        let m = dist(&[0.2, 0.54, 0.26]);
        let s = dist(&[0.5, 0.3, 0.2]);
        assert!(matches!(
            separate(&m, &s, 0.1).unwrap_err(),
            Error::LambdaBelowBound { .. }
        ));
        assert_eq!(separate(&m, &s, 0.0).unwrap_err(), Error::LambdaOutOfRange(0.0));
        assert_eq!(separate(&m, &s, 1.2).unwrap_err(), Error::LambdaOutOfRange(1.2));
    }

    #[test]
    fn zero_correlation_examples() {
        let s = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(zero_correlation_lambda(&s, &s).unwrap(), Some(0.0));
        let m = dist(&[0.5, 0.3, 0.2]);
        // a = -0.09, b = 0.14 / 3
        let z = zero_correlation_lambda(&m, &s).unwrap().unwrap();
        assert_relative_eq!(z, 0.09 / (0.14 / 3.0), epsilon = 1e-12);
        assert!((z - 1.9286).abs() < 1e-4);
        let u = dist(&[0.25; 4]);
        let m4 = dist(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(zero_correlation_lambda(&m4, &u).unwrap(), None);
    }

    #[test]
    fn min_rho2_picks_endpoint_when_zero_is_outside() {
        let m = dist(&[0.5, 0.3, 0.2]);
        let s = dist(&[0.2, 0.3, 0.5]);
        let r1 = rho_at(&m, &s, 1.0).unwrap().unwrap();
        let rl = rho_at(&m, &s, 0.6).unwrap().unwrap();
        assert!((r1 * r1 - 0.862).abs() < 1e-3);
        assert!((rl * rl - 0.928).abs() < 1e-3);
        assert_eq!(estimate_lambda_min_rho2(&m, &s).unwrap(), 1.0);
        // grid oracle at step 1e-3
        let best = (0..=400)
            .map(|k| 0.6 + k as f64 * 1e-3)
            .map(|l| (l, rho_at(&m, &s, l.min(1.0)).unwrap().unwrap().powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((best.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn min_rho2_returns_interior_zero() {
        // mixture dominated by the seed: rho(M, I_S) > 0 and rho(l_L, I_S) < 0
        let s = dist(&[0.1, 0.2, 0.3, 0.4]);
        let l = dist(&[0.5, 0.5, 0.0, 0.0]);
        let m = linear_combine(&l, &s, 0.3).unwrap();
        let z = zero_correlation_lambda(&m, &s).unwrap().unwrap();
        let lower = lambda_lower_bound(&m, &s).unwrap();
        assert!(z > lower && z < 1.0, "z = {z}, lower = {lower}");
        let est = estimate_lambda_min_rho2(&m, &s).unwrap();
        assert_eq!(est, z);
        assert!(rho_at(&m, &s, est).unwrap().unwrap().abs() < 1e-9);
    }

    #[test]
    fn min_rho2_identical_inputs_keep_m() {
        let s = dist(&[0.2, 0.3, 0.5]);
        let r = dsm(&s, &s, LambdaStrategy::MinSquaredCorrelation).unwrap();
        close(&r.output, s.probs(), 1e-12);
        let u = dist(&[0.5, 0.5]);
        assert_eq!(estimate_lambda_min_rho2(&u, &u).unwrap_err(), Error::UniformSeed);
    }

    #[test]
    fn dsm_examples() {
        let m = dist(&[0.2, 0.54, 0.26]);
        let s = dist(&[0.5, 0.3, 0.2]);
        let r = dsm(&m, &s, LambdaStrategy::Fixed(1.0)).unwrap();
        assert_eq!(r.output, m);
        assert_eq!(r.lambda_used, 1.0);
        assert!(!r.lambda_clamped);

        let r = dsm(&m, &s, LambdaStrategy::LowerBound).unwrap();
        close(&r.output, &[0.0, 0.7, 0.3], 1e-12);
        assert_relative_eq!(r.lambda_used, 0.6, epsilon = 1e-12);
        assert!(r.clamped_mass <= 1e-9);

        let r = dsm(&m, &s, LambdaStrategy::Fixed(0.1)).unwrap();
        assert_relative_eq!(r.lambda_used, 0.6, epsilon = 1e-12);
        assert!(r.lambda_clamped);
        // the requested value really would go negative
        let raw = separation_path(m.probs(), s.probs(), 10.0);
        assert!(raw.iter().any(|v| *v < -NEGATIVE_DUST));

        assert!(LambdaStrategy::fixed(0.0).is_err());
        assert!(dsm(&m, &s, LambdaStrategy::Fixed(1.5)).is_err());
    }

    #[test]
    fn profile_examples() {
        let m = dist(&[0.5, 0.3, 0.2]);
        let s = dist(&[0.2, 0.3, 0.5]);
        let rows = divergence_profile(&m, &s, &[1.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].kl, Some(crate::dist::kl_divergence(&m, &s).unwrap()));

        let grid: Vec<f64> = (0..=8).map(|k| 1.0 - 0.05 * k as f64).collect();
        let rows = divergence_profile(&m, &s, &grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].rho.unwrap() < w[0].rho.unwrap());
            assert!(w[1].kl_value() > w[0].kl_value());
            assert!(w[1].skl_value() > w[0].skl_value());
            assert!(w[1].js > w[0].js);
        }
        // at lambda_L = 0.6 the output has a zero, so the reverse KL is infinite
        assert_eq!(rows.last().unwrap().skl, None);

        let same = divergence_profile(&s, &s, &[1.0, 0.5, 0.1]).unwrap();
        for r in &same {
            assert_eq!(r.kl, Some(0.0));
            assert_eq!(r.js, 0.0);
        }
    }

    #[test]
    fn profile_rejects_bad_grids() {
        let m = dist(&[0.5, 0.3, 0.2]);
        let s = dist(&[0.2, 0.3, 0.5]);
        assert!(matches!(
            divergence_profile(&m, &s, &[1.0, 0.5]).unwrap_err(),
            Error::InvalidGrid(_)
        ));
        assert!(divergence_profile(&m, &s, &[0.7, 0.8]).is_err());
        assert!(divergence_profile(&m, &s, &[1.1]).is_err());
    }

    #[test]
    fn default_grid_is_log_spaced_and_descending() {
        let g = default_grid(0.01, DEFAULT_GRID_POINTS);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[63], 0.01);
        let ratio = g[1] / g[0];
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
            assert_relative_eq!(w[1] / w[0], ratio, epsilon = 1e-9);
        }
    }
}
