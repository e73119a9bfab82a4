//! Dataset files: one sample per line, problem and solution token
//! sequences separated by a TAB, with a JSON sidecar at `PATH.meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::Expr;
use crate::prefix::{decode, DecodeError, TokenSequence};
use crate::sampler::GenProfile;
use crate::taskgen::{normal_key, SamplePair, Task};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: expected 2 TAB-separated fields, found {fields}")]
    FieldCount {
        path: PathBuf,
        line: usize,
        fields: usize,
    },
    #[error("{path}:{line}: {column} does not decode: {source}")]
    Decode {
        path: PathBuf,
        line: usize,
        column: &'static str,
        #[source]
        source: DecodeError,
    },
    #[error("{path}: invalid meta document: {source}")]
    Meta {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCaps {
    pub problem: usize,
    pub solution: usize,
}

/// Contents of the `.meta.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub task: Task,
    pub seed: u64,
    pub count: usize,
    pub profile: GenProfile,
    pub generator_version: String,
    pub token_caps: TokenCaps,
    pub attempts: u64,
}

/// A parsed line with both columns decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    /// 1-based line number in the file.
    pub number: usize,
    pub problem: TokenSequence,
    pub solution: TokenSequence,
    pub problem_expr: Expr,
    pub solution_expr: Expr,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DatasetError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn format_line(problem: &TokenSequence, solution: &TokenSequence) -> String {
    format!("{problem}\t{solution}")
}

pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<(), DatasetError> {
    let mut buf = String::new();
    for l in lines {
        buf.push_str(&l);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

pub fn write_dataset(path: &Path, samples: &[SamplePair], meta: &DatasetMeta) -> Result<(), DatasetError> {
    write_lines(path, samples.iter().map(|s| format_line(&s.problem, &s.solution)))?;
    let json = serde_json::to_string_pretty(meta).expect("meta serialises");
    write_atomic(&meta_path(path), json.as_bytes())
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta, DatasetError> {
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Meta { path: mp, source })
}

pub fn parse_line(path: &Path, number: usize, text: &str) -> Result<Line, DatasetError> {
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != 2 {
        return Err(DatasetError::FieldCount {
            path: path.to_path_buf(),
            line: number,
            fields: fields.len(),
        });
    }
    let problem: TokenSequence = fields[0].parse().expect("infallible");
    let solution: TokenSequence = fields[1].parse().expect("infallible");
    let decode_col = |seq: &TokenSequence, column| {
        decode(seq).map_err(|source| DatasetError::Decode {
            path: path.to_path_buf(),
            line: number,
            column,
            source,
        })
    };
    let problem_expr = decode_col(&problem, "problem")?;
    let solution_expr = decode_col(&solution, "solution")?;
    Ok(Line {
        number,
        problem,
        solution,
        problem_expr,
        solution_expr,
    })
}

/// Reads and decodes every line; the first malformed line is an error.
pub fn read_dataset(path: &Path) -> Result<Vec<Line>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| parse_line(path, i + 1, l))
        .collect()
}

/// Fractions for [`split`]; they must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

pub const SPLIT_BUCKETS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("split fractions must be non-negative and sum to 1 (got {train}, {valid}, {test})")]
pub struct BadSplit {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Valid,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Valid, Part::Test];

    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Valid => "valid",
            Part::Test => "test",
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<SplitSpec, BadSplit> {
        let ok = [train, valid, test].iter().all(|f| f.is_finite() && *f >= 0.0)
            && (train + valid + test - 1.0).abs() < 1e-9;
        if ok {
            Ok(SplitSpec { train, valid, test })
        } else {
            Err(BadSplit { train, valid, test })
        }
    }

    pub fn part_of(&self, problem: &Expr) -> Part {
        let b = split_bucket(problem);
        let train_end = (self.train * SPLIT_BUCKETS as f64).round() as u64;
        let valid_end = ((self.train + self.valid) * SPLIT_BUCKETS as f64).round() as u64;
        if b < train_end {
            Part::Train
        } else if b < valid_end {
            Part::Valid
        } else {
            Part::Test
        }
    }
}

/// Bucket in `0..10_000` derived from a SHA-256 of the problem's normal
/// form, so every rendering of the same problem lands in the same bucket.
pub fn split_bucket(problem: &Expr) -> u64 {
    let digest = Sha256::digest(normal_key(problem).as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head) % SPLIT_BUCKETS
}

/// Assigns every line to a part, preserving file order within each part.
pub fn split<'a>(lines: &'a [Line], spec: &SplitSpec) -> BTreeMap<Part, Vec<&'a Line>> {
    let mut out: BTreeMap<Part, Vec<&Line>> = Part::ALL.iter().map(|p| (*p, Vec::new())).collect();
    for l in lines {
        out.get_mut(&spec.part_of(&l.problem_expr))
            .expect("all parts present")
            .push(l);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub min: usize,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    /// Token lengths; absent for an empty file.
    pub problem_tokens: Option<LengthSummary>,
    pub solution_tokens: Option<LengthSummary>,
    /// Operator occurrences over problems and solutions.
    pub operators: BTreeMap<String, usize>,
}

fn quantile(sorted: &[usize], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let frac = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

fn summarize(mut v: Vec<usize>) -> Option<LengthSummary> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    Some(LengthSummary {
        min: v[0],
        p25: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        p75: quantile(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<usize>() as f64 / v.len() as f64,
    })
}

pub fn stats(lines: &[Line]) -> DatasetStats {
    let mut operators = BTreeMap::new();
    for l in lines {
        for e in [&l.problem_expr, &l.solution_expr] {
            for op in e.operators() {
                *operators.entry(op.name().to_string()).or_insert(0) += 1;
            }
        }
    }
    DatasetStats {
        count: lines.len(),
        problem_tokens: summarize(lines.iter().map(|l| l.problem.len()).collect()),
        solution_tokens: summarize(lines.iter().map(|l| l.solution.len()).collect()),
        operators,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefix::encode;

    fn line(p: &Expr, s: &Expr) -> String {
        format_line(&encode(p), &encode(s))
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        let good = line(&Expr::cos(Expr::x()), &Expr::sin(Expr::x()));
        fs::write(&path, format!("{good}\nadd x\n")).unwrap();
        match read_dataset(&path) {
            Err(DatasetError::FieldCount { line, fields, .. }) => assert_eq!((line, fields), (2, 1)),
            other => panic!("{other:?}"),
        }
        fs::write(&path, format!("{good}\n{good}\nadd x\tx\n")).unwrap();
        match read_dataset(&path) {
            Err(DatasetError::Decode { line, column, .. }) => assert_eq!((line, column), (3, "problem")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_stats() {
        let s = stats(&[]);
        assert_eq!(s.count, 0);
        assert!(s.problem_tokens.is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = summarize(vec![4, 1, 3, 2]).unwrap();
        assert_eq!((s.min, s.max), (1, 4));
        assert!((s.median - 2.5).abs() < 1e-12);
        assert!((s.p25 - 1.75).abs() < 1e-12);
        assert!((s.mean - 2.5).abs() < 1e-12);
    }

    #[test]
    fn split_key_ignores_surface_form() {
        let a = Expr::add(Expr::x(), Expr::int(1));
        let b = Expr::add(Expr::int(1), Expr::x());
        assert_eq!(split_bucket(&a), split_bucket(&b));
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(0.8, 0.1, 0.1).is_ok());
        assert!(SplitSpec::new(0.8, 0.3, 0.1).is_err());
        assert!(SplitSpec::new(1.2, -0.1, -0.1).is_err());
    }
}
