use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use dsm_core::harness::{
    compare_methods, ingest_corpus, read_qrels, read_queries, synthetic_queries, write_corpus_jsonl, write_qrels,
    write_queries, CompareConfig, ComparisonReport, Corpus, FeedbackConfig, FeedbackMethod, MethodSpec,
};
use dsm_core::separation::default_grid;
use dsm_core::synth::{generate_corpus, CorpusParams};
use dsm_core::{
    closed_form_theta, divergence_profile, dsm, em_equivalence_gap, feedback_tf, lambda_lower_bound, run_em,
    DivergenceProfilePoint, EmConfig, FeedbackSet, LambdaStrategy, TermDistribution,
};
use serde_json::json;

use crate::args::{
    ExperimentArgs, Format, GenArgs, MmfArgs, PairArgs, ProfileArgs, SeparateArgs, StrategyArg, SynthArgs,
};
use crate::error::CliError;
use crate::input::{load_counts, load_pair};

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>, missing: &str) -> String {
    v.map_or(missing.to_string(), |x| x.to_string())
}

fn distribution_csv(d: &TermDistribution) -> String {
    let mut out = String::from("term,prob\n");
    for (t, p) in d.vocab().terms().iter().zip(d.probs()) {
        let _ = writeln!(out, "{t},{p}");
    }
    out
}

fn distribution_text(d: &TermDistribution) -> String {
    let width = d.vocab().terms().iter().map(String::len).max().unwrap_or(4).max(4);
    let mut out = String::new();
    for (t, p) in d.vocab().terms().iter().zip(d.probs()) {
        let _ = writeln!(out, "{t:<width$}  {p:.6}");
    }
    out
}

fn load_inputs(pair: &PairArgs) -> Result<(TermDistribution, TermDistribution), CliError> {
    let (m, s) = load_pair(&pair.mixture, &pair.seed_dist)?;
    match pair.smooth {
        None => Ok((m, s)),
        Some(eps) if eps > 0.0 && eps.is_finite() => Ok((m.smoothed(eps), s.smoothed(eps))),
        Some(eps) => Err(CliError::Invalid(format!("--smooth must be positive, got {eps}"))),
    }
}

pub fn separate(args: &SeparateArgs) -> Result<String, CliError> {
    let (m, seed) = load_inputs(&args.pair)?;
    let strategy = match (args.lambda, args.strategy) {
        (Some(v), _) => LambdaStrategy::fixed(v)?,
        (None, StrategyArg::Lower) => LambdaStrategy::LowerBound,
        (None, StrategyArg::MinRho2) => LambdaStrategy::MinSquaredCorrelation,
    };
    let r = dsm(&m, &seed, strategy)?;
    Ok(match args.format {
        Format::Json => pretty(&r),
        Format::Csv => distribution_csv(&r.output),
        Format::Text => {
            let d = &r.diagnostics;
            let mut out = String::new();
            let _ = writeln!(out, "lambda_L      {}", r.lambda_lower);
            let _ = writeln!(
                out,
                "lambda_used   {}{}",
                r.lambda_used,
                if r.lambda_clamped { " (clamped)" } else { "" }
            );
            let _ = writeln!(out, "rho           {}", fmt_opt(d.rho, "undefined"));
            let _ = writeln!(out, "kl            {}", fmt_opt(d.kl, "inf"));
            let _ = writeln!(out, "skl           {}", fmt_opt(d.skl, "inf"));
            let _ = writeln!(out, "js            {}", d.js);
            let _ = writeln!(out, "clamped_mass  {}", r.clamped_mass);
            out.push('\n');
            out + &distribution_text(&r.output)
        }
    })
}

fn profile_csv(points: &[DivergenceProfilePoint]) -> String {
    let mut out = String::from("lambda,rho,kl,skl,js\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.lambda_hat,
            fmt_opt(p.rho, "nan"),
            fmt_opt(p.kl, "inf"),
            fmt_opt(p.skl, "inf"),
            p.js
        );
    }
    out
}

pub fn profile(args: &ProfileArgs) -> Result<String, CliError> {
    let (m, seed) = load_inputs(&args.pair)?;
    let grid = match &args.grid {
        Some(g) => g.clone(),
        None => {
            if args.points < 2 {
                return Err(CliError::Invalid("--points must be at least 2".into()));
            }
            default_grid(lambda_lower_bound(&m, &seed)?, args.points)
        }
    };
    let points = divergence_profile(&m, &seed, &grid)?;
    Ok(match args.format {
        Format::Csv => profile_csv(&points),
        Format::Json => pretty(&points),
        Format::Text => {
            let mut out = format!(
                "{:>12}  {:>12}  {:>12}  {:>12}  {:>12}\n",
                "lambda", "rho", "kl", "skl", "js"
            );
            for p in &points {
                let f = |v: Option<f64>, miss: &str| v.map_or(miss.to_string(), |x| format!("{x:.6e}"));
                let _ = writeln!(
                    out,
                    "{:>12.6}  {:>12}  {:>12}  {:>12}  {:>12.6e}",
                    p.lambda_hat,
                    f(p.rho, "nan"),
                    f(p.kl, "inf"),
                    f(p.skl, "inf"),
                    p.js
                );
            }
            out
        }
    })
}

pub fn mmf(args: &MmfArgs) -> Result<String, CliError> {
    let (counts, bg) = load_counts(&args.counts, &args.background)?;
    let fb = FeedbackSet::single(bg.vocab().clone(), counts)?;
    let config = EmConfig {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let em = run_em(&fb, &bg, args.lambda, None, config)?;
    let comparison = if args.compare_closed {
        let tf = feedback_tf(&fb)?;
        let closed = closed_form_theta(&tf, &bg, args.lambda)?;
        let gap = em_equivalence_gap(&em, &closed, &tf, &bg)?;
        Some((closed, gap))
    } else {
        None
    };
    Ok(match args.format {
        Format::Csv => distribution_csv(&em.theta),
        Format::Json => {
            let mut v = json!({ "em": em });
            if let Some((closed, gap)) = &comparison {
                v["closed_form"] = json!(closed);
                v["gap"] = json!(gap);
            }
            pretty(&v)
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "lambda        {}", em.lambda);
            let _ = writeln!(out, "iterations    {}", em.iterations);
            let _ = writeln!(out, "converged     {}", em.converged);
            let _ = writeln!(out, "final_delta   {:e}", em.final_delta);
            let _ = writeln!(
                out,
                "loglik        {}",
                em.loglik_trace.last().copied().unwrap_or(f64::NAN)
            );
            if let Some((_, gap)) = &comparison {
                let _ = writeln!(out, "kl_gap        {:e}", gap.kl_em_vs_closed);
                let _ = writeln!(out, "linearity     {:e}", gap.linearity_residual);
                let _ = writeln!(out, "clamped       {}", gap.clamped);
            }
            out.push('\n');
            out + &distribution_text(&em.theta)
        }
    })
}

fn corpus_params(s: &SynthArgs) -> CorpusParams {
    let d = CorpusParams::default();
    CorpusParams {
        num_docs: s.num_docs.unwrap_or(d.num_docs),
        doc_length: s.doc_length.unwrap_or(d.doc_length),
        num_queries: s.num_queries.unwrap_or(d.num_queries),
        vocab_size: s.vocab_size.unwrap_or(d.vocab_size),
        topic_terms: s.topic_terms.unwrap_or(d.topic_terms),
        relevant_fraction: s.relevant_fraction.unwrap_or(d.relevant_fraction),
        lambda_gen: s.lambda_gen.unwrap_or(d.lambda_gen),
        lambda_gen_spread: s.lambda_spread.unwrap_or(d.lambda_gen_spread),
        ..d
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("method,query_id,ap,delta\n");
    for m in &report.methods {
        for q in &m.per_query {
            let _ = writeln!(out, "{},{},{},{}", m.method, q.query_id, q.ap, q.delta);
        }
    }
    out
}

pub fn experiment(args: &ExperimentArgs) -> Result<String, CliError> {
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<MethodSpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let (corpus, queries, qrels) = if args.synthetic {
        let s = generate_corpus(&corpus_params(&args.synth), args.synth.seed)?;
        let (q, r) = synthetic_queries(&s);
        (Corpus::from_synthetic(&s)?, q, r)
    } else {
        let (c, q, r) = match (&args.corpus, &args.queries, &args.qrels) {
            (Some(c), Some(q), Some(r)) => (c, q, r),
            _ => return Err(CliError::Invalid("--corpus, --queries and --qrels are required".into())),
        };
        // open everything first so a missing file fails before any parsing
        let (cf, qf, rf) = (open(c)?, open(q)?, open(r)?);
        let corpus = ingest_corpus(cf).map_err(|e| CliError::in_file(c, e))?;
        let queries = read_queries(qf).map_err(|e| CliError::in_file(q, e))?;
        let qrels = read_qrels(rf).map_err(|e| CliError::in_file(r, e))?;
        (corpus, queries, qrels)
    };
    let mut pipeline = FeedbackConfig::new(FeedbackMethod::Dsm);
    pipeline.top_k = args.top_k;
    pipeline.alpha = args.alpha;
    pipeline.mu = args.mu;
    pipeline.depth = args.depth;
    pipeline.em = EmConfig {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let config = CompareConfig {
        pipeline,
        resamples: args.resamples,
        ..CompareConfig::default()
    };
    let report = compare_methods(&corpus, &queries, &qrels, &methods, &config)?;
    Ok(match args.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
        Format::Csv => comparison_csv(&report),
    })
}

pub fn gen(args: &GenArgs) -> Result<String, CliError> {
    let s = generate_corpus(&corpus_params(&args.synth), args.synth.seed)?;
    let corpus = Corpus::from_synthetic(&s)?;
    let (queries, qrels) = synthetic_queries(&s);
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        File::create(&p).map(BufWriter::new).map_err(|e| CliError::io(&p, e))
    };
    let mut w = create("corpus.jsonl")?;
    write_corpus_jsonl(&mut w, &corpus)?;
    w.flush().map_err(|e| CliError::io(dir, e))?;
    let mut w = create("queries.tsv")?;
    write_queries(&mut w, &queries)?;
    w.flush().map_err(|e| CliError::io(dir, e))?;
    let mut w = create("qrels.txt")?;
    write_qrels(&mut w, &qrels)?;
    w.flush().map_err(|e| CliError::io(dir, e))?;
    Ok(format!(
        "wrote {} documents, {} queries and {} judgments to {}\n",
        corpus.num_docs(),
        queries.len(),
        s.qrels.len(),
        dir.display()
    ))
}
