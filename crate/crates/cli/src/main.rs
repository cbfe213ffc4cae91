//! `srmq`: build, query and measure succinct RMQ structures, and run the
//! hard-instance generators and lemma verifiers.

mod bench;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use srmq_core::cartesian::{parse_array, write_array, ArrayFormat};
use srmq_core::catalan::{identity_mismatches, BRUTEFORCE_MAX_U};
use srmq_core::hardgen::{self, PredZInstance};
use srmq_core::onebit::DEFAULT_MAX_N;
use srmq_core::{
    BigCount, Error, OneBitRmq, ProbeCounter, Result, SparseTable, Structure, TradeoffRmq,
};

/// Build limit for tradeoff and sparse structures when `RMQ_MAX_N` is unset.
const DEFAULT_MAX_N_LARGE: usize = 1 << 28;

#[derive(Parser)]
#[command(
    name = "srmq",
    version,
    about = "Succinct range minimum queries and hard-instance tooling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact combinatorial identity checks.
    Catalan {
        #[command(subcommand)]
        cmd: CatalanCmd,
    },
    /// Build a structure from an array file and print its space report.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Trade-off level for `tradeoff`.
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Input format; detected from the magic bytes when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one range minimum query from a structure file.
    Query {
        #[arg(long)]
        ds: PathBuf,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        b: usize,
        /// Also report the cell-probe tally.
        #[arg(long)]
        probes: bool,
        #[arg(long, default_value_t = 64)]
        word_size: u32,
        #[arg(long)]
        json: bool,
    },
    /// Print the space report of a structure file as JSON.
    Space {
        #[arg(long)]
        ds: PathBuf,
    },
    /// Measure bits, probes and time over a parameter grid.
    Bench(bench::BenchArgs),
    /// Run a lemma verifier; exits 5 when the threshold is missed.
    Verify(VerifyArgs),
    /// Hard-instance sampling, reduction and verification.
    Hardgen {
        #[command(subcommand)]
        cmd: HardgenCmd,
    },
}

#[derive(Subcommand)]
enum CatalanCmd {
    /// Compare closed forms with brute-force enumeration.
    Check {
        #[arg(long, default_value_t = 20)]
        max_u: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    lemma: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum HardgenCmd {
    /// Sample a pred-z instance; give either `--B --u --d --Z` or `--n --r`.
    Sample {
        #[arg(long = "B")]
        b: Option<u64>,
        #[arg(long)]
        u: Option<u64>,
        #[arg(long)]
        d: Option<u64>,
        /// Decimal integer.
        #[arg(long = "Z")]
        z: Option<String>,
        #[arg(long, conflicts_with_all = ["b", "u", "d", "z"])]
        n: Option<u64>,
        #[arg(long, requires = "n")]
        r: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn an instance into an RMQ array file.
    Reduce {
        #[arg(long)]
        sets: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Bin)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Same as the top-level `verify`.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Onebit,
    Tradeoff,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Bin,
}

impl From<FormatArg> for ArrayFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => ArrayFormat::Text,
            FormatArg::Bin => ArrayFormat::Bin,
        }
    }
}

/// Build limit from `RMQ_MAX_N`, else `default`.
fn max_n(default: usize) -> Result<usize> {
    match std::env::var("RMQ_MAX_N") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("RMQ_MAX_N must be an integer, got '{v}'"))),
        Err(_) => Ok(default),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(std::io::stdout().lock(), "{s}")?;
    Ok(())
}

fn load_structure(path: &Path) -> Result<Structure> {
    let f = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Structure::read_from(&mut BufReader::new(f))
}

pub(crate) fn build_structure(values: &[i64], kind: KindArg, t: usize) -> Result<Structure> {
    let n = values.len();
    Ok(match kind {
        KindArg::Onebit => {
            Structure::OneBit(OneBitRmq::build_with_limit(values, max_n(DEFAULT_MAX_N)?)?)
        }
        KindArg::Tradeoff | KindArg::Sparse => {
            let limit = max_n(DEFAULT_MAX_N_LARGE)?;
            if n > limit {
                return Err(Error::Usage(format!(
                    "n = {n} exceeds the build limit {limit} (RMQ_MAX_N)"
                )));
            }
            if n == 0 {
                return Err(Error::Range("array must be non-empty".into()));
            }
            match kind {
                KindArg::Tradeoff => Structure::Tradeoff(TradeoffRmq::build(values, t)?),
                _ => Structure::Sparse(SparseTable::build(values)),
            }
        }
    })
}

#[derive(Serialize)]
struct QueryOutput {
    a: usize,
    b: usize,
    answer: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    probes: Option<ProbeTally>,
}

#[derive(Serialize)]
struct ProbeTally {
    word_size: u32,
    distinct: u64,
    total: u64,
}

#[derive(Serialize)]
struct CatalanCheck {
    max_u: u64,
    mismatches: u64,
    pass: bool,
}

#[derive(Serialize)]
struct SampleOutput<'a> {
    out: String,
    #[serde(flatten)]
    instance: &'a PredZInstance,
}

#[derive(Serialize)]
struct ReduceOutput {
    out: String,
    n: u64,
    r: u64,
    d: u64,
    #[serde(rename = "B")]
    b: u64,
    u: u64,
}

fn run_verify(args: &VerifyArgs) -> Result<()> {
    let rep = hardgen::verify_lemma(&args.lemma, args.seed, args.trials)?;
    if args.json {
        print_json(&rep)?;
    } else {
        println!("lemma      {}", rep.lemma);
        println!(
            "estimate   {:.6} (95% CI {:.6} .. {:.6})",
            rep.estimate, rep.ci_low, rep.ci_high
        );
        println!("threshold  {}", rep.threshold);
        println!("trials     {}  seed {}", rep.trials, rep.seed);
        for (k, v) in &rep.details {
            println!("  {k} = {v}");
        }
        for n in &rep.notes {
            println!("  note: {n}");
        }
        println!("result     {}", if rep.pass { "PASS" } else { "FAIL" });
    }
    if rep.pass {
        Ok(())
    } else {
        Err(Error::Threshold(format!(
            "lemma {} missed its threshold",
            rep.lemma
        )))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Catalan {
            cmd: CatalanCmd::Check { max_u, json },
        } => {
            if max_u == 0 || max_u > BRUTEFORCE_MAX_U {
                return Err(Error::Usage(format!(
                    "--max-u must be in [1, {BRUTEFORCE_MAX_U}]"
                )));
            }
            let bad = identity_mismatches(max_u)?;
            let out = CatalanCheck {
                max_u,
                mismatches: bad,
                pass: bad == 0,
            };
            if json {
                print_json(&out)?;
            } else {
                println!("identity checks up to U = {max_u}: {bad} mismatches");
            }
            if bad > 0 {
                return Err(Error::Integrity(format!("{bad} identity mismatches")));
            }
            Ok(())
        }
        Cmd::Build {
            input,
            kind,
            t,
            format,
            out,
        } => {
            let values = parse_array(&read_file(&input)?, format.map(Into::into))?;
            let s = build_structure(&values, kind, t)?;
            let mut w = create_file(&out)?;
            s.write_to(&mut w)?;
            w.flush()?;
            print_json(&s.space_report())
        }
        Cmd::Query {
            ds,
            a,
            b,
            probes,
            word_size,
            json,
        } => {
            if word_size == 0 {
                return Err(Error::Usage("--word-size must be positive".into()));
            }
            let s = load_structure(&ds)?;
            let mut p = ProbeCounter::new(word_size);
            let answer = s.query_probed(a, b, &mut p)?;
            let tally = probes.then(|| ProbeTally {
                word_size,
                distinct: p.distinct(),
                total: p.total(),
            });
            if json {
                print_json(&QueryOutput {
                    a,
                    b,
                    answer,
                    probes: tally,
                })
            } else {
                println!("{answer}");
                if let Some(t) = tally {
                    println!(
                        "probes distinct={} total={} w={}",
                        t.distinct, t.total, t.word_size
                    );
                }
                Ok(())
            }
        }
        Cmd::Space { ds } => print_json(&load_structure(&ds)?.space_report()),
        Cmd::Bench(args) => bench::run(&args),
        Cmd::Verify(args)
        | Cmd::Hardgen {
            cmd: HardgenCmd::Verify(args),
        } => run_verify(&args),
        Cmd::Hardgen {
            cmd:
                HardgenCmd::Sample {
                    b,
                    u,
                    d,
                    z,
                    n,
                    r,
                    seed,
                    out,
                },
        } => {
            let (d, b, u, z_cap) = match (n, r) {
                (Some(n), Some(r)) => hardgen::derive_params(n, r)?,
                (Some(_), None) => return Err(Error::Usage("--n needs --r".into())),
                _ => {
                    let missing = || Error::Usage("give --B --u --d --Z, or --n --r".into());
                    let z = z.ok_or_else(missing)?;
                    let z = BigCount::parse_bytes(z.as_bytes(), 10)
                        .ok_or_else(|| Error::Usage("--Z must be a decimal integer".into()))?;
                    (
                        d.ok_or_else(missing)?,
                        b.ok_or_else(missing)?,
                        u.ok_or_else(missing)?,
                        z,
                    )
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = hardgen::sample_instance(d, b, u, &z_cap, &mut rng)?;
            let mut w = create_file(&out)?;
            serde_json::to_writer_pretty(&mut w, &inst)
                .map_err(|e| Error::Format(e.to_string()))?;
            w.flush()?;
            print_json(&SampleOutput {
                out: out.display().to_string(),
                instance: &inst,
            })
        }
        Cmd::Hardgen {
            cmd:
                HardgenCmd::Reduce {
                    sets,
                    n,
                    r,
                    format,
                    out,
                },
        } => {
            let inst: PredZInstance = serde_json::from_slice(&read_file(&sets)?)
                .map_err(|e| Error::Format(format!("{}: {e}", sets.display())))?;
            let layout = hardgen::reduce_to_array(&inst, n, r)?;
            hardgen::check_layout(&layout, &inst)?;
            let mut w = create_file(&out)?;
            write_array(&mut w, &layout.values, format.into())?;
            w.flush()?;
            print_json(&ReduceOutput {
                out: out.display().to_string(),
                n,
                r,
                d: layout.d,
                b: layout.b,
                u: layout.u,
            })
        }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("srmq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
