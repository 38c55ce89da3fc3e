//! Python bindings. Distributions cross the boundary as [`Distribution`]
//! objects; reports come back as plain dicts.

use std::sync::Arc;

use dsm_core::harness::{compare_methods, synthetic_queries, CompareConfig, Corpus, MethodSpec};
use dsm_core::separation::default_grid;
use dsm_core::synth::{generate_corpus, CorpusParams};
use dsm_core::{EmConfig, FeedbackSet, LambdaStrategy, TermDistribution, Vocabulary};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: dsm_core::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn vocab(terms: Option<Vec<String>>, len: usize) -> PyResult<Arc<Vocabulary>> {
    let v = match terms {
        Some(t) => Vocabulary::new(t),
        None => Vocabulary::synthetic(len),
    };
    v.map(Arc::new).map_err(err)
}

/// A probability vector over a vocabulary of terms.
#[pyclass(frozen, skip_from_py_object, name = "Distribution")]
#[derive(Clone)]
pub struct Distribution(TermDistribution);

#[pymethods]
impl Distribution {
    /// `probs` must already sum to 1 unless `normalize` is set. Without
    /// `terms` the vocabulary is `t0, t1, ...`.
    #[new]
    #[pyo3(signature = (probs, terms=None, normalize=false))]
    fn new(probs: Vec<f64>, terms: Option<Vec<String>>, normalize: bool) -> PyResult<Self> {
        let v = vocab(terms, probs.len())?;
        let d = if normalize {
            TermDistribution::normalize(v, probs)
        } else {
            TermDistribution::new(v, probs)
        };
        d.map(Self).map_err(err)
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    #[getter]
    fn terms(&self) -> Vec<String> {
        self.0.vocab().terms().to_vec()
    }

    fn get(&self, term: &str) -> Option<f64> {
        self.0.get(term)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (t, p) in self.0.vocab().terms().iter().zip(self.0.probs()) {
            d.set_item(t, p)?;
        }
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Distribution({:?})", self.0.probs())
    }
}

/// Output of [`dsm`].
#[pyclass(frozen, name = "SeparationResult")]
pub struct PySeparation(dsm_core::SeparationResult);

#[pymethods]
impl PySeparation {
    #[getter]
    fn output(&self) -> Distribution {
        Distribution(self.0.output.clone())
    }

    #[getter]
    fn lambda_lower(&self) -> f64 {
        self.0.lambda_lower
    }

    #[getter]
    fn lambda_used(&self) -> f64 {
        self.0.lambda_used
    }

    #[getter]
    fn lambda_clamped(&self) -> bool {
        self.0.lambda_clamped
    }

    #[getter]
    fn rho(&self) -> Option<f64> {
        self.0.rho_at_lambda
    }

    #[getter]
    fn clamped_mass(&self) -> f64 {
        self.0.clamped_mass
    }

    fn __repr__(&self) -> String {
        format!(
            "SeparationResult(lambda_lower={}, lambda_used={})",
            self.0.lambda_lower, self.0.lambda_used
        )
    }
}

/// Output of [`run_em`].
#[pyclass(frozen, name = "EmResult")]
pub struct PyEm(dsm_core::EmResult);

#[pymethods]
impl PyEm {
    #[getter]
    fn theta(&self) -> Distribution {
        Distribution(self.0.theta.clone())
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn final_delta(&self) -> f64 {
        self.0.final_delta
    }

    #[getter]
    fn loglik_trace(&self) -> Vec<f64> {
        self.0.loglik_trace.clone()
    }
}

#[pyfunction]
fn kl_divergence(p: &Distribution, q: &Distribution) -> PyResult<f64> {
    dsm_core::kl_divergence(&p.0, &q.0).map_err(err)
}

#[pyfunction]
fn symmetrized_kl(p: &Distribution, q: &Distribution) -> PyResult<f64> {
    dsm_core::symmetrized_kl(&p.0, &q.0).map_err(err)
}

#[pyfunction]
fn js_divergence(p: &Distribution, q: &Distribution) -> PyResult<f64> {
    dsm_core::js_divergence(&p.0, &q.0).map_err(err)
}

/// `None` when either input is constant.
#[pyfunction]
fn pearson_correlation(p: &Distribution, q: &Distribution) -> PyResult<Option<f64>> {
    dsm_core::pearson_correlation(&p.0, &q.0).map_err(err)
}

/// `lam * l + (1 - lam) * s`.
#[pyfunction]
fn linear_combine(l: &Distribution, s: &Distribution, lam: f64) -> PyResult<Distribution> {
    dsm_core::linear_combine(&l.0, &s.0, lam).map(Distribution).map_err(err)
}

#[pyfunction]
fn lambda_lower_bound(m: &Distribution, seed: &Distribution) -> PyResult<f64> {
    dsm_core::lambda_lower_bound(&m.0, &seed.0).map_err(err)
}

/// Inverts the mixture at a given coefficient, which must not be below the
/// lower bound.
#[pyfunction]
fn separate(m: &Distribution, seed: &Distribution, lam: f64) -> PyResult<Distribution> {
    dsm_core::separate(&m.0, &seed.0, lam).map(Distribution).map_err(err)
}

/// `strategy` is `"lower"`, `"min_rho2"` or a fixed coefficient.
#[pyfunction]
#[pyo3(signature = (m, seed, strategy=None))]
fn dsm(m: &Distribution, seed: &Distribution, strategy: Option<&Bound<'_, PyAny>>) -> PyResult<PySeparation> {
    let strategy = match strategy {
        None => LambdaStrategy::MinSquaredCorrelation,
        Some(s) => {
            if let Ok(v) = s.extract::<f64>() {
                LambdaStrategy::fixed(v).map_err(err)?
            } else {
                match s.extract::<String>()?.as_str() {
                    "lower" => LambdaStrategy::LowerBound,
                    "min_rho2" => LambdaStrategy::MinSquaredCorrelation,
                    other => return Err(PyValueError::new_err(format!("unknown strategy `{other}`"))),
                }
            }
        }
    };
    dsm_core::dsm(&m.0, &seed.0, strategy).map(PySeparation).map_err(err)
}

/// Rows of `{lambda, rho, kl, skl, js}`; `None` marks an undefined
/// correlation or an infinite divergence.
#[pyfunction]
#[pyo3(signature = (m, seed, grid=None, points=64))]
fn divergence_profile<'py>(
    py: Python<'py>,
    m: &Distribution,
    seed: &Distribution,
    grid: Option<Vec<f64>>,
    points: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let grid = match grid {
        Some(g) => g,
        None => default_grid(dsm_core::lambda_lower_bound(&m.0, &seed.0).map_err(err)?, points),
    };
    let rows = dsm_core::divergence_profile(&m.0, &seed.0, &grid).map_err(err)?;
    rows.iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("lambda", p.lambda_hat)?;
            d.set_item("rho", p.rho)?;
            d.set_item("kl", p.kl)?;
            d.set_item("skl", p.skl)?;
            d.set_item("js", p.js)?;
            Ok(d)
        })
        .collect()
}

/// Fits the mixture feedback model to one pooled count vector.
#[pyfunction]
#[pyo3(signature = (counts, background, lam, tol=1e-10, max_iter=10000))]
fn run_em(counts: Vec<u64>, background: &Distribution, lam: f64, tol: f64, max_iter: usize) -> PyResult<PyEm> {
    let fb = FeedbackSet::single(background.0.vocab().clone(), counts).map_err(err)?;
    dsm_core::run_em(&fb, &background.0, lam, None, EmConfig { tol, max_iter })
        .map(PyEm)
        .map_err(err)
}

/// The closed-form solution and whether it needed clamping.
#[pyfunction]
fn closed_form_theta(tf: &Distribution, background: &Distribution, lam: f64) -> PyResult<(Distribution, bool)> {
    let c = dsm_core::closed_form_theta(&tf.0, &background.0, lam).map_err(err)?;
    Ok((Distribution(c.theta), c.clamped))
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn corpus_params(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<CorpusParams> {
    let mut p = CorpusParams::default();
    let Some(kw) = kwargs else { return Ok(p) };
    for (k, v) in kw.iter() {
        let key: String = k.extract()?;
        match key.as_str() {
            "num_docs" => p.num_docs = v.extract()?,
            "doc_length" => p.doc_length = v.extract()?,
            "num_queries" => p.num_queries = v.extract()?,
            "relevant_fraction" => p.relevant_fraction = v.extract()?,
            "topic_sharpness" => p.topic_sharpness = v.extract()?,
            "vocab_size" => p.vocab_size = v.extract()?,
            "topic_terms" => p.topic_terms = v.extract()?,
            "query_terms" => p.query_terms = v.extract()?,
            "lambda_gen" => p.lambda_gen = v.extract()?,
            "lambda_gen_spread" => p.lambda_gen_spread = v.extract()?,
            "background_skew" => p.background_skew = v.extract()?,
            other => return Err(PyValueError::new_err(format!("unknown corpus parameter `{other}`"))),
        }
    }
    Ok(p)
}

/// Generates a synthetic corpus and returns
/// `{"docs": {id: {term: count}}, "queries": {id: [terms]}, "qrels": [[query, doc]]}`.
#[pyfunction]
#[pyo3(signature = (seed=7, **kwargs))]
fn synthetic_corpus<'py>(
    py: Python<'py>,
    seed: u64,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = generate_corpus(&corpus_params(kwargs)?, seed).map_err(err)?;
    let docs = PyDict::new(py);
    for (id, counts) in &s.docs {
        let d = PyDict::new(py);
        for (i, &c) in counts.iter().enumerate().filter(|(_, c)| **c > 0) {
            d.set_item(s.vocab.term(i), c)?;
        }
        docs.set_item(id, d)?;
    }
    let queries = PyDict::new(py);
    for q in &s.queries {
        queries.set_item(&q.id, q.terms.clone())?;
    }
    let out = PyDict::new(py);
    out.set_item("docs", docs)?;
    out.set_item("queries", queries)?;
    out.set_item("qrels", s.qrels.keys().cloned().collect::<Vec<_>>())?;
    Ok(out)
}

/// Runs the feedback comparison on a synthetic corpus. The first method is
/// the baseline; method names are those accepted by the command line tool.
#[pyfunction]
#[pyo3(signature = (methods, seed=7, resamples=10000, **kwargs))]
fn compare_synthetic<'py>(
    py: Python<'py>,
    methods: Vec<String>,
    seed: u64,
    resamples: usize,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let specs = methods
        .iter()
        .map(|m| m.parse::<MethodSpec>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let s = generate_corpus(&corpus_params(kwargs)?, seed).map_err(err)?;
    let corpus = Corpus::from_synthetic(&s).map_err(err)?;
    let (queries, qrels) = synthetic_queries(&s);
    let config = CompareConfig {
        resamples,
        ..CompareConfig::default()
    };
    let report = compare_methods(&corpus, &queries, &qrels, &specs, &config).map_err(err)?;
    json_to_py(py, &report.to_json())
}

#[pymodule]
#[pyo3(name = "dsm")]
fn dsm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Distribution>()?;
    m.add_class::<PySeparation>()?;
    m.add_class::<PyEm>()?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(symmetrized_kl, m)?)?;
    m.add_function(wrap_pyfunction!(js_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(linear_combine, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(separate, m)?)?;
    m.add_function(wrap_pyfunction!(dsm, m)?)?;
    m.add_function(wrap_pyfunction!(divergence_profile, m)?)?;
    m.add_function(wrap_pyfunction!(run_em, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_theta, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(compare_synthetic, m)?)?;
    Ok(())
}
