use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ocwc::bench::{run_bench, BenchConfig};
use ocwc::dataset::{decode_selection, Dataset};
use ocwc::exec::Execution;
use ocwc::obool::{BackendKind, Circuit, CostModel, TraceLevel};
use ocwc::pcwc::Algorithm;
use ocwc::protocol::{
    decrypt_mask, encrypt_dataset, gen_dataset, keygen, open_evaluator, open_owner, select_file,
    EncryptedFile, ErrorCategory, ProtocolError,
};

/// Single-round encrypted feature selection.
#[derive(Parser)]
#[command(name = "ocwc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BackendArg {
    /// Evaluation backend: sim or fhe.
    #[arg(long, default_value = "sim", value_parser = parse_backend)]
    backend: BackendKind,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key set into a directory.
    Keygen {
        #[command(flatten)]
        backend: BackendArg,
        /// Target directory (must exist).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Encrypt a CSV dataset (owner side).
    Encrypt {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        keys: PathBuf,
        /// CSV with a header row; the last column is the class.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run feature selection on an encrypted dataset (analyst side).
    Select {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "improved", value_parser = parse_algorithm)]
        algorithm: Algorithm,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt a selection mask and print the selected feature names.
    Decrypt {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Plaintext dataset supplying feature names (default f1..fk).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a reproducible random binary dataset as CSV.
    GenDataset {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Make the class the XOR of this many random features.
        #[arg(long)]
        planted: Option<usize>,
        /// Output file (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gate-count and wall-time benchmark over a (k, n) grid.
    Bench {
        #[command(flatten)]
        backend: BackendArg,
        /// Comma-separated KxN points (default: k in 4,8,16,32 by n in 8,16,32).
        #[arg(long, value_delimiter = ',', value_parser = parse_point)]
        grid: Vec<(usize, usize)>,
        /// Algorithms to run (default both).
        #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
        algorithm: Vec<Algorithm>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Planted subset size of the generated datasets; 0 draws random classes.
        #[arg(long, default_value_t = 2)]
        planted: usize,
        /// Skip cells that need more gates than this.
        #[arg(long)]
        gate_limit: Option<u64>,
        /// Gate weights as `kind = weight` lines.
        #[arg(long)]
        cost_model: Option<PathBuf>,
        /// Run cells one after another.
        #[arg(long)]
        sequential: bool,
        /// JSON-lines report path.
        #[arg(long)]
        out: PathBuf,
        /// Tab-separated summary table path.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse()
        .map_err(|e: ocwc::obool::BackendError| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_point(s: &str) -> Result<(usize, usize), String> {
    let (k, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid point `{s}` is not KxN"))?;
    let k = k.trim().parse().map_err(|_| format!("bad k in `{s}`"))?;
    let n = n.trim().parse().map_err(|_| format!("bad n in `{s}`"))?;
    Ok((k, n))
}

fn io_error(path: &Path, source: io::Error) -> ProtocolError {
    ProtocolError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), ProtocolError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn run(cmd: Command) -> Result<(), ProtocolError> {
    match cmd {
        Command::Keygen { backend, out, seed } => {
            let id = keygen(backend.backend, &out, seed)?;
            eprintln!(
                "wrote {} key set {id:016x} to {}",
                backend.backend,
                out.display()
            );
        }
        Command::Encrypt {
            backend,
            keys,
            input,
            out,
        } => {
            let ds = Dataset::load_csv(&input)?;
            let owner = open_owner(backend.backend, &keys)?;
            let mut circ = Circuit::with_trace(owner.engine, TraceLevel::Counts);
            let file = encrypt_dataset(&mut circ, &ds, owner.key_id)?;
            file.save(&out)?;
            eprintln!(
                "encrypted {} rows x {} features (padded to {}) into {}",
                ds.n(),
                ds.k(),
                file.header.n_pad,
                out.display()
            );
        }
        Command::Select {
            backend,
            keys,
            input,
            algorithm,
            out,
        } => {
            let analyst = open_evaluator(backend.backend, &keys)?;
            let request = EncryptedFile::load(&input)?;
            if request.header.key_id != analyst.key_id {
                return Err(ProtocolError::KeyMismatch {
                    expected: analyst.key_id,
                    found: request.header.key_id,
                });
            }
            let mut circ = Circuit::with_trace(analyst.engine, TraceLevel::Counts);
            let reply = select_file(&mut circ, &request, algorithm)?;
            reply.save(&out)?;
            let c = circ.counts();
            eprintln!(
                "{algorithm}: {} gates (xor {}, and {}, not {}, const {}), {} decryptions",
                c.total(),
                c.xor,
                c.and,
                c.not,
                c.constant,
                circ.decrypt_calls()
            );
        }
        Command::Decrypt {
            backend,
            keys,
            input,
            dataset,
            out,
        } => {
            let owner = open_owner(backend.backend, &keys)?;
            let file = EncryptedFile::load(&input)?;
            let mut circ = Circuit::with_trace(owner.engine, TraceLevel::Counts);
            let mask = decrypt_mask(&mut circ, &file, owner.key_id)?;
            let names = match dataset {
                Some(p) => {
                    let ds = Dataset::load_csv(&p)?;
                    decode_selection(&mask, &ds)?
                }
                None => mask
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(j, _)| format!("f{}", j + 1))
                    .collect(),
            };
            write_output(out.as_deref(), &format!("{}\n", names.join(",")))?;
        }
        Command::GenDataset {
            n,
            k,
            seed,
            planted,
            out,
        } => {
            let g = gen_dataset(n, k, seed, planted)?;
            let mut buf = Vec::new();
            g.dataset.write_csv(&mut buf)?;
            write_output(out.as_deref(), &String::from_utf8_lossy(&buf))?;
            if !g.planted.is_empty() {
                let names: Vec<String> = g.planted.iter().map(|j| format!("f{}", j + 1)).collect();
                eprintln!("class = xor of {}", names.join(", "));
            }
        }
        Command::Bench {
            backend,
            grid,
            algorithm,
            seed,
            planted,
            gate_limit,
            cost_model,
            sequential,
            out,
            table,
        } => {
            if backend.backend != BackendKind::Sim {
                return Err(ProtocolError::Usage(
                    "benchmarks run on the sim backend only".into(),
                ));
            }
            let mut cfg = BenchConfig::standard(seed);
            if !grid.is_empty() {
                cfg.grid = grid;
            }
            if !algorithm.is_empty() {
                cfg.algorithms = algorithm;
            }
            cfg.planted = (planted > 0).then_some(planted);
            cfg.gate_limit = gate_limit;
            if let Some(p) = cost_model {
                cfg.cost = CostModel::load(&p).map_err(|e| ProtocolError::Usage(e.to_string()))?;
            }
            if sequential {
                cfg.execution = Execution::Sequential;
            }
            let report = run_bench(&cfg)?;
            let mut buf = Vec::new();
            report
                .write_jsonl(&mut buf)
                .map_err(|e| io_error(&out, e))?;
            fs::write(&out, buf).map_err(|e| io_error(&out, e))?;
            if let Some(t) = table {
                let mut buf = Vec::new();
                report.write_table(&mut buf).map_err(|e| io_error(&t, e))?;
                fs::write(&t, buf).map_err(|e| io_error(&t, e))?;
            }
            let skipped = report.cells.iter().filter(|c| c.reason.is_some()).count();
            eprintln!(
                "{} cells ({skipped} skipped) written to {}",
                report.cells.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Usage => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Backend => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
