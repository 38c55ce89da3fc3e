//! Side-by-side evaluation of retrieval methods with a paired significance
//! test.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::corpus::Corpus;
use super::eval::{evaluate_map, MapReport, Qrels};
use super::feedback::{rerank_with_feedback, FeedbackConfig, FeedbackMethod};
use super::retrieval::{initial_retrieval, Query};
use crate::error::{Error, Result};
use crate::synth::rng_from_seed;

/// Coefficients tried by [`MethodSpec::MmfGridBest`].
pub const MMF_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_PERMUTATION_SEED: u64 = 0x5eed;

/// A retrieval method as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    /// Query likelihood without feedback.
    QueryLikelihood,
    Feedback(FeedbackMethod),
    /// MMF at the grid coefficient with the highest MAP on the evaluated
    /// queries, an oracle choice.
    MmfGridBest,
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::QueryLikelihood => write!(f, "ql"),
            MethodSpec::Feedback(FeedbackMethod::Mmf { lambda }) => write!(f, "mmf:{lambda}"),
            MethodSpec::Feedback(FeedbackMethod::DsmFixed { lambda }) => write!(f, "dsm-fixed:{lambda}"),
            MethodSpec::Feedback(FeedbackMethod::DsmMinus) => write!(f, "dsm-"),
            MethodSpec::Feedback(FeedbackMethod::Dsm) => write!(f, "dsm"),
            MethodSpec::MmfGridBest => write!(f, "mmf-grid-best"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lambda = |v: &str| -> Result<f64> {
            let l: f64 = v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad coefficient in method `{s}`")))?;
            if l > 0.0 && l <= 1.0 {
                Ok(l)
            } else {
                Err(Error::LambdaOutOfRange(l))
            }
        };
        Ok(match s {
            "ql" => MethodSpec::QueryLikelihood,
            "dsm-" => MethodSpec::Feedback(FeedbackMethod::DsmMinus),
            "dsm" => MethodSpec::Feedback(FeedbackMethod::Dsm),
            "mmf-grid-best" => MethodSpec::MmfGridBest,
            _ => match s.split_once(':') {
                Some(("mmf", v)) => MethodSpec::Feedback(FeedbackMethod::Mmf { lambda: lambda(v)? }),
                Some(("dsm-fixed", v)) => MethodSpec::Feedback(FeedbackMethod::DsmFixed { lambda: lambda(v)? }),
                _ => return Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
            },
        })
    }
}

/// Shared pipeline settings; the feedback method is taken from each
/// [`MethodSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    pub pipeline: FeedbackConfig,
    pub resamples: usize,
    pub permutation_seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            pipeline: FeedbackConfig::new(FeedbackMethod::Dsm),
            resamples: DEFAULT_RESAMPLES,
            permutation_seed: DEFAULT_PERMUTATION_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub query_id: String,
    pub ap: f64,
    /// AP minus the baseline's AP on the same query.
    pub delta: f64,
    /// Separation or mixture coefficient used for this query.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub map: f64,
    /// Percent change of MAP over the baseline; `None` when the baseline MAP
    /// is zero.
    pub change_pct: Option<f64>,
    /// Two-sided sign-flip permutation p-value of the paired AP deltas.
    pub p_value: f64,
    /// Coefficient picked by `mmf-grid-best`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_lambda: Option<f64>,
    pub per_query: Vec<QueryResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub baseline: String,
    pub num_queries: usize,
    pub resamples: usize,
    pub methods: Vec<MethodResult>,
}

struct MethodRun {
    report: MapReport,
    lambdas: Vec<Option<f64>>,
    selected_lambda: Option<f64>,
}

fn run_feedback(corpus: &Corpus, queries: &[Query], qrels: &Qrels, config: &FeedbackConfig) -> Result<MethodRun> {
    let mut rankings = Vec::with_capacity(queries.len());
    let mut lambdas = Vec::with_capacity(queries.len());
    for q in queries {
        let r = rerank_with_feedback(q, corpus, config)?;
        rankings.push(r.ranking);
        lambdas.push(r.lambda_used);
    }
    Ok(MethodRun {
        report: evaluate_map(&rankings, qrels)?,
        lambdas,
        selected_lambda: None,
    })
}

fn run_method(
    corpus: &Corpus,
    queries: &[Query],
    qrels: &Qrels,
    spec: MethodSpec,
    pipeline: &FeedbackConfig,
) -> Result<MethodRun> {
    match spec {
        MethodSpec::QueryLikelihood => {
            let rankings = queries
                .iter()
                .map(|q| initial_retrieval(q, corpus, pipeline.mu, pipeline.depth))
                .collect::<Result<Vec<_>>>()?;
            Ok(MethodRun {
                report: evaluate_map(&rankings, qrels)?,
                lambdas: vec![None; queries.len()],
                selected_lambda: None,
            })
        }
        MethodSpec::Feedback(method) => {
            let config = FeedbackConfig { method, ..*pipeline };
            run_feedback(corpus, queries, qrels, &config)
        }
        MethodSpec::MmfGridBest => {
            let mut best: Option<(f64, MethodRun)> = None;
            for lambda in MMF_GRID {
                let config = FeedbackConfig {
                    method: FeedbackMethod::Mmf { lambda },
                    ..*pipeline
                };
                let run = run_feedback(corpus, queries, qrels, &config)?;
                // strict comparison keeps the smallest coefficient on ties
                if best.as_ref().is_none_or(|(_, b)| run.report.map > b.report.map) {
                    best = Some((lambda, run));
                }
            }
            let (lambda, mut run) = best.expect("grid is nonempty");
            run.selected_lambda = Some(lambda);
            Ok(run)
        }
    }
}

/// Two-sided sign-flip permutation test of `mean(deltas) = 0`:
/// `(1 + #{resamples with |mean| >= observed}) / (1 + resamples)`.
pub fn permutation_p_value(deltas: &[f64], resamples: usize, seed: u64) -> f64 {
    if deltas.is_empty() || resamples == 0 {
        return 1.0;
    }
    let n = deltas.len() as f64;
    let observed = (deltas.iter().sum::<f64>() / n).abs();
    // tolerance absorbs summation-order rounding between permutations
    let threshold = observed - 1e-12;
    let mut rng = rng_from_seed(seed);
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let s: f64 = deltas.iter().map(|&d| if rng.gen::<bool>() { d } else { -d }).sum();
        if (s / n).abs() >= threshold {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (resamples + 1) as f64
}

/// Evaluates every method on the same queries. The first method is the
/// baseline for percent changes, deltas and significance tests.
pub fn compare_methods(
    corpus: &Corpus,
    queries: &[Query],
    qrels: &Qrels,
    methods: &[MethodSpec],
    config: &CompareConfig,
) -> Result<ComparisonReport> {
    if methods.len() < 2 {
        return Err(Error::InvalidParameter("at least two methods are required".into()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidParameter("no queries to evaluate".into()));
    }
    config.pipeline.validate()?;

    let runs = methods
        .iter()
        .map(|&m| run_method(corpus, queries, qrels, m, &config.pipeline))
        .collect::<Result<Vec<_>>>()?;
    let base = &runs[0].report;

    let results = methods
        .iter()
        .zip(&runs)
        .map(|(spec, run)| {
            let per_query: Vec<QueryResult> = run
                .report
                .per_query
                .iter()
                .zip(&base.per_query)
                .zip(&run.lambdas)
                .map(|(((qid, ap), (_, base_ap)), lambda)| QueryResult {
                    query_id: qid.clone(),
                    ap: *ap,
                    delta: ap - base_ap,
                    lambda: *lambda,
                })
                .collect();
            let deltas: Vec<f64> = per_query.iter().map(|q| q.delta).collect();
            MethodResult {
                method: spec.to_string(),
                map: run.report.map,
                change_pct: (base.map > 0.0).then(|| 100.0 * (run.report.map - base.map) / base.map),
                p_value: permutation_p_value(&deltas, config.resamples, config.permutation_seed),
                selected_lambda: run.selected_lambda,
                per_query,
            }
        })
        .collect();

    Ok(ComparisonReport {
        baseline: methods[0].to_string(),
        num_queries: queries.len(),
        resamples: config.resamples,
        methods: results,
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned columns: method, MAP, percent change, p-value.
    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 4]> = self
            .methods
            .iter()
            .map(|m| {
                let name = match m.selected_lambda {
                    Some(l) => format!("{} (lambda={l})", m.method),
                    None => m.method.clone(),
                };
                [
                    name,
                    format!("{:.4}", m.map),
                    m.change_pct.map_or("n/a".into(), |c| format!("{c:+.2}%")),
                    format!("{:.4}", m.p_value),
                ]
            })
            .collect();
        let header = ["method", "MAP", "chg", "p"];
        let widths: Vec<usize> = (0..4)
            .map(|i| {
                rows.iter()
                    .map(|r| r[i].len())
                    .chain([header[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let mut line = |cells: [&str; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(header);
        for r in &rows {
            line([&r[0], &r[1], &r[2], &r[3]]);
        }
        let _ = writeln!(out, "baseline: {}, queries: {}", self.baseline, self.num_queries);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::io::synthetic_queries;
    use crate::synth::{generate_corpus, CorpusParams};

    #[test]
    fn method_names_round_trip() {
        for s in ["ql", "mmf:0.5", "dsm-fixed:0.3", "dsm-", "dsm", "mmf-grid-best"] {
            assert_eq!(s.parse::<MethodSpec>().unwrap().to_string(), s);
        }
        assert!("mmf:0".parse::<MethodSpec>().is_err());
        assert!("mmf:x".parse::<MethodSpec>().is_err());
        assert!("bm25".parse::<MethodSpec>().is_err());
    }

    #[test]
    fn permutation_test_edges() {
        assert_eq!(permutation_p_value(&[0.0; 5], 1000, 1), 1.0);
        // all deltas equal and positive: only the all-positive and
        // all-negative sign patterns reach the observed mean
        let p = permutation_p_value(&[0.1; 12], 10_000, 1);
        assert!(p < 0.01, "{p}");
        let p = permutation_p_value(&[0.1, -0.1, 0.05, -0.05], 10_000, 1);
        assert!(p > 0.9);
    }

    fn small() -> (Corpus, Vec<Query>, Qrels) {
        let p = CorpusParams {
            num_docs: 120,
            num_queries: 4,
            vocab_size: 150,
            doc_length: 60,
            ..CorpusParams::default()
        };
        let s = generate_corpus(&p, 11).unwrap();
        let (q, r) = synthetic_queries(&s);
        (Corpus::from_synthetic(&s).unwrap(), q, r)
    }

    #[test]
    fn identical_methods_show_no_change() {
        let (c, q, r) = small();
        let m = [MethodSpec::Feedback(FeedbackMethod::Dsm); 2];
        let rep = compare_methods(&c, &q, &r, &m, &CompareConfig::default()).unwrap();
        let other = &rep.methods[1];
        assert_eq!(other.change_pct, Some(0.0));
        assert_eq!(other.p_value, 1.0);
        assert!(other.per_query.iter().all(|q| q.delta == 0.0));
    }

    #[test]
    fn report_shape_and_rendering() {
        let (c, q, r) = small();
        let m = [
            MethodSpec::QueryLikelihood,
            MethodSpec::Feedback(FeedbackMethod::DsmMinus),
        ];
        let rep = compare_methods(&c, &q, &r, &m, &CompareConfig::default()).unwrap();
        assert_eq!(rep.methods.len(), 2);
        assert!(rep.methods.iter().all(|m| (0.0..=1.0).contains(&m.map)));
        let text = rep.to_text();
        assert!(text.starts_with("method"));
        assert!(text.contains("dsm-"));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(json["methods"][1]["method"], "dsm-");
        assert!(compare_methods(&c, &q, &r, &m[..1], &CompareConfig::default()).is_err());
    }
}
