//! Two-column CSV inputs: `term,prob` distributions and `term,count` tables.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use dsm_core::{TermDistribution, Vocabulary};

use crate::error::CliError;

/// Allowed distance of a distribution file's total from 1 before a warning.
const SUM_TOLERANCE: f64 = 1e-6;

struct Row {
    term: String,
    value: String,
    line: usize,
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<Row>, CliError> {
    let content = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    // record positions start at any preceding blank or comment lines, so count
    // from the first byte of actual content
    let line_at = |p: &csv::Position| {
        let mut b = p.byte() as usize;
        while b < content.len() {
            match content[b] {
                b'\n' | b'\r' => b += 1,
                b'#' => {
                    b += content[b..]
                        .iter()
                        .position(|&c| c == b'\n')
                        .unwrap_or(content.len() - b)
                }
                _ => break,
            }
        }
        1 + content[..b].iter().filter(|&&c| c == b'\n').count()
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(content.as_slice());
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, line_at);
            CliError::Input {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(i + 1, line_at);
        let bad = |message: String| CliError::Input {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 2 {
            return Err(bad(format!("expected `{header}`, found {} fields", rec.len())));
        }
        if i == 0 && format!("{},{}", &rec[0], &rec[1]) == header {
            continue;
        }
        let term = rec[0].to_string();
        if term.is_empty() {
            return Err(bad("empty term".into()));
        }
        if let Some(first) = seen.insert(term.clone(), line) {
            return Err(bad(format!("term `{term}` already given on line {first}")));
        }
        rows.push(Row {
            term,
            value: rec[1].to_string(),
            line,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            line: 0,
            message: "no rows".into(),
        });
    }
    Ok(rows)
}

/// `term -> probability` in file order.
fn read_probs(path: &Path) -> Result<Vec<(String, f64)>, CliError> {
    read_rows(path, "term,prob")?
        .into_iter()
        .map(|r| match r.value.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok((r.term, v)),
            _ => Err(CliError::Input {
                path: path.to_path_buf(),
                line: r.line,
                message: format!("`{}` is not a nonnegative probability", r.value),
            }),
        })
        .collect()
}

fn finish(path: &Path, vocab: Arc<Vocabulary>, weights: Vec<f64>) -> Result<TermDistribution, CliError> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        eprintln!("warning: {}: probabilities sum to {sum}, renormalizing", path.display());
    }
    TermDistribution::normalize(vocab, weights).map_err(CliError::Core)
}

/// Loads two distributions over the union of their terms, in order of first
/// appearance. A term missing from one file has probability zero there.
pub fn load_pair(first: &Path, second: &Path) -> Result<(TermDistribution, TermDistribution), CliError> {
    let a = read_probs(first)?;
    let b = read_probs(second)?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut terms: Vec<&str> = Vec::new();
    for (t, _) in a.iter().chain(&b) {
        index.entry(t.as_str()).or_insert_with(|| {
            terms.push(t);
            terms.len() - 1
        });
    }
    let vocab = Arc::new(Vocabulary::new(terms.iter().copied())?);
    let dense = |rows: &[(String, f64)]| {
        let mut w = vec![0.0; vocab.len()];
        for (t, p) in rows {
            w[index[t.as_str()]] = *p;
        }
        w
    };
    let wa = dense(&a);
    let wb = dense(&b);
    Ok((finish(first, vocab.clone(), wa)?, finish(second, vocab, wb)?))
}

/// Loads a background distribution and feedback counts aligned to its terms.
/// Terms absent from the counts file have count zero.
pub fn load_counts(counts: &Path, background: &Path) -> Result<(Vec<u64>, TermDistribution), CliError> {
    let bg = read_probs(background)?;
    let vocab = Arc::new(Vocabulary::new(bg.iter().map(|(t, _)| t.as_str()))?);
    let bg = finish(background, vocab.clone(), bg.into_iter().map(|(_, p)| p).collect())?;
    let mut dense = vec![0u64; vocab.len()];
    for r in read_rows(counts, "term,count")? {
        let bad = |message: String| CliError::Input {
            path: counts.to_path_buf(),
            line: r.line,
            message,
        };
        let c: u64 = r
            .value
            .parse()
            .map_err(|_| bad(format!("`{}` is not a nonnegative integer count", r.value)))?;
        let i = vocab
            .position(&r.term)
            .ok_or_else(|| bad(format!("term `{}` is not in the background distribution", r.term)))?;
        dense[i] = c;
    }
    Ok((dense, bg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn pair_uses_union_vocabulary() {
        let a = file("term,prob\na,0.5\nb,0.5\n");
        let b = file("b,0.25\nc,0.75\n");
        let (m, s) = load_pair(a.path(), b.path()).unwrap();
        assert_eq!(m.vocab().terms(), &["a", "b", "c"]);
        assert_eq!(m.probs(), &[0.5, 0.5, 0.0]);
        assert_eq!(s.probs(), &[0.0, 0.25, 0.75]);
    }

    #[test]
    fn off_total_is_renormalized() {
        let a = file("a,2\nb,2\n");
        let (m, _) = load_pair(a.path(), a.path()).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let a = file("a,0.5\n\n# note\nb,oops\n");
        match load_pair(a.path(), a.path()) {
            Err(CliError::Input { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let a = file("a,0.5\nb,0.2,1\n");
        assert!(matches!(
            load_pair(a.path(), a.path()),
            Err(CliError::Input { line: 2, .. })
        ));
        let a = file("a,0.5\na,0.5\n");
        assert!(matches!(
            load_pair(a.path(), a.path()),
            Err(CliError::Input { line: 2, .. })
        ));
    }

    #[test]
    fn counts_align_to_background() {
        let bg = file("x,0.5\ny,0.5\n");
        let c = file("term,count\ny,3\n");
        let (counts, _) = load_counts(c.path(), bg.path()).unwrap();
        assert_eq!(counts, vec![0, 3]);
        let c = file("y,1.5\n");
        assert!(matches!(
            load_counts(c.path(), bg.path()),
            Err(CliError::Input { line: 1, .. })
        ));
        let c = file("z,1\n");
        assert!(load_counts(c.path(), bg.path()).is_err());
    }
}
