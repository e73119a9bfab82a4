use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use symforge::dataset::{self, DatasetError, DatasetMeta, Part, SplitSpec, TokenCaps};
use symforge::evalkit::{self, ScoreError, ShiftCell};
use symforge::prefix::Vocabulary;
use symforge::sampler::GenProfile;
use symforge::taskgen::{self, GenError, PrimitiveTable, Task};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Generate, verify and score symbolic-mathematics datasets.
#[derive(Parser, Debug)]
#[command(name = "symforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a verified dataset file and its .meta.json sidecar.
    Generate {
        /// fwd, bwd, ibp, ode1 or ode2.
        #[arg(long)]
        task: Task,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// uniform, poly, trig or log.
        #[arg(long, default_value = "uniform")]
        profile: String,
        /// Largest number of operators in a sampled tree.
        #[arg(long)]
        max_ops: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Dataset whose pairs seed the IBP primitive table (normally BWD).
        #[arg(long)]
        seed_table: Option<PathBuf>,
    },
    /// Re-check every sample of a dataset file.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        /// fwd, bwd, ibp, ode1 or ode2.
        #[arg(long)]
        task: Task,
    },
    /// Score predictions against references.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// fwd, bwd, ibp, ode1 or ode2.
        #[arg(long)]
        task: Task,
        /// Accept predictions that differ from the reference by a constant.
        #[arg(long)]
        mod_constant: bool,
    },
    /// Split a dataset into train/valid/test by a hash of each problem.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output files are PREFIX.train, PREFIX.valid and PREFIX.test.
        #[arg(long)]
        out_prefix: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        valid: f64,
        #[arg(long, default_value_t = 0.1)]
        test: f64,
    },
    /// Print counts, token-length quantiles and an operator histogram.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write the token vocabulary, one token per line in id order.
    Vocab {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a generation profile preset as JSON.
    Profile { name: String },
    /// Score a grid of (training set, test set) prediction files.
    ShiftMatrix {
        /// JSON list of {train, test, task, pred, ref} cells.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        mod_constant: bool,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Failure {
        let error = e.into();
        let code = if error.is::<GenError>() {
            EXIT_GENERATION
        } else if error.is::<DatasetError>() || error.is::<ScoreError>() || error.is::<std::io::Error>() {
            EXIT_IO
        } else {
            // anything else is an internal error
            EXIT_GENERATION
        };
        Failure { code, error }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

// A closed stdout (`symforge stats ... | head`) is not an error.
fn print_json(v: &impl serde::Serialize) {
    let text = serde_json::to_string_pretty(v).expect("serialisable");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Ok(n) = std::env::var("SYMFORGE_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: SYMFORGE_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Generate {
            task,
            count,
            seed,
            profile,
            max_ops,
            out,
            seed_table,
        } => generate(task, count, seed, &profile, max_ops, &out, seed_table.as_deref()),
        Command::Verify { input, task } => verify(&input, task),
        Command::Eval {
            pred,
            reference,
            task,
            mod_constant,
        } => {
            let report = evalkit::score_files(&pred, &reference, task, mod_constant)?;
            print_json(&report);
            Ok(0)
        }
        Command::Split {
            input,
            out_prefix,
            train,
            valid,
            test,
        } => split(&input, &out_prefix, train, valid, test),
        Command::Stats { input } => {
            let lines = dataset::read_dataset(&input)?;
            print_json(&dataset::stats(&lines));
            Ok(0)
        }
        Command::Vocab { out } => {
            let text = Vocabulary::build().to_text();
            match out {
                Some(path) => fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(|e| fail(EXIT_IO, e))?,
                None => {
                    let _ = std::io::stdout().write_all(text.as_bytes());
                }
            }
            Ok(0)
        }
        Command::Profile { name } => {
            let p = GenProfile::preset(&name).map_err(|e| fail(EXIT_USAGE, e.into()))?;
            print_json(&p);
            Ok(0)
        }
        Command::ShiftMatrix {
            manifest,
            mod_constant,
        } => {
            let text = fs::read_to_string(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))
                .map_err(|e| fail(EXIT_IO, e))?;
            let cells: Vec<ShiftCell> = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", manifest.display()))
                .map_err(|e| fail(EXIT_IO, e))?;
            print_json(&evalkit::shift_matrix(&cells, mod_constant)?);
            Ok(0)
        }
    }
}

fn generate(
    task: Task,
    count: usize,
    seed: u64,
    profile: &str,
    max_ops: Option<usize>,
    out: &Path,
    seed_table: Option<&Path>,
) -> Result<u8, Failure> {
    let mut profile = GenProfile::preset(profile).map_err(|e| fail(EXIT_USAGE, e.into()))?;
    if let Some(m) = max_ops {
        let min = profile.n_ops.0.min(m);
        profile = profile.with_ops(min, m);
    }
    let result = if task == Task::Ibp {
        let mut table = PrimitiveTable::new();
        if let Some(path) = seed_table {
            for l in dataset::read_dataset(path)? {
                table.insert(l.problem_expr, l.solution_expr);
            }
        }
        taskgen::generate_ibp(&profile, count, seed, &mut table)
    } else {
        taskgen::generate(task, &profile, count, seed)
    };
    let generated = match result {
        Ok(g) => g,
        Err(e) => {
            if let GenError::Exhausted { stats, .. } = &e {
                eprintln!("{}", serde_json::to_string(stats).expect("serialisable"));
            }
            return Err(fail(EXIT_GENERATION, e.into()));
        }
    };
    let meta = DatasetMeta {
        task,
        seed,
        count,
        profile,
        generator_version: taskgen::GENERATOR_VERSION.to_string(),
        token_caps: TokenCaps {
            problem: taskgen::MAX_PROBLEM_TOKENS,
            solution: taskgen::MAX_SOLUTION_TOKENS,
        },
        attempts: generated.stats.attempts,
    };
    dataset::write_dataset(out, &generated.samples, &meta)?;
    print_json(&json!({
        "task": task,
        "count": generated.samples.len(),
        "attempts": generated.stats.attempts,
        "yield": generated.stats.yield_rate(),
        "rejected": generated.stats.rejected,
        "out": out,
    }));
    Ok(0)
}

fn verify(input: &Path, task: Task) -> Result<u8, Failure> {
    let lines = dataset::read_dataset(input)?;
    let failing: Vec<usize> = lines
        .par_iter()
        .filter(|l| {
            !taskgen::verify_sample(task, &l.problem_expr, &l.solution_expr)
                .outcome
                .is_correct()
        })
        .map(|l| l.number)
        .collect();
    print_json(&json!({
        "task": task,
        "total": lines.len(),
        "passed": lines.len() - failing.len(),
        "failing_lines": failing,
    }));
    if failing.is_empty() {
        Ok(0)
    } else {
        eprintln!(
            "error: {} of {} samples failed verification",
            failing.len(),
            lines.len()
        );
        Ok(EXIT_VERIFY)
    }
}

fn split(input: &Path, prefix: &Path, train: f64, valid: f64, test: f64) -> Result<u8, Failure> {
    let spec = SplitSpec::new(train, valid, test).map_err(|e| fail(EXIT_USAGE, e.into()))?;
    let lines = dataset::read_dataset(input)?;
    let parts = dataset::split(&lines, &spec);
    let mut sizes = serde_json::Map::new();
    for part in Part::ALL {
        let mut path = prefix.as_os_str().to_owned();
        path.push(format!(".{}", part.name()));
        let chosen = &parts[&part];
        dataset::write_lines(
            Path::new(&path),
            chosen
                .iter()
                .map(|l| dataset::format_line(&l.problem, &l.solution)),
        )?;
        sizes.insert(part.name().to_string(), json!(chosen.len()));
    }
    print_json(&sizes);
    Ok(0)
}
