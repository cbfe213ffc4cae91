//! Parameter-grid measurements of bits, probes and query time.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use srmq_core::{Error, ProbeCounter, Result, Structure};

use crate::{build_structure, create_file, KindArg};

#[derive(clap::Args)]
pub struct BenchArgs {
    /// Comma-separated kinds.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "onebit,tradeoff"
    )]
    kind: Vec<KindArg>,
    /// Comma-separated array lengths.
    #[arg(long, value_delimiter = ',', default_value = "1024,4096")]
    n: Vec<usize>,
    /// Comma-separated trade-off levels (tradeoff only).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    t: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    word_size: u32,
    /// Emit JSON records instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One grid cell. Failed cells keep their key fields, carry `error` and have
/// NaN measurements.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    pub kind: String,
    pub n: usize,
    pub param: String,
    pub total_bits: f64,
    pub redundancy_bits: f64,
    pub benchmark_bits: f64,
    pub mean_probes: f64,
    pub max_probes: f64,
    pub mean_ns: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

const CSV_HEADER: [&str; 10] = [
    "kind",
    "n",
    "param",
    "total_bits",
    "redundancy_bits",
    "benchmark_bits",
    "mean_probes",
    "max_probes",
    "mean_ns",
    "seed",
];

fn kind_name(k: KindArg) -> &'static str {
    match k {
        KindArg::Onebit => "onebit",
        KindArg::Tradeoff => "tradeoff",
        KindArg::Sparse => "sparse",
    }
}

fn measure(kind: KindArg, n: usize, t: usize, args: &BenchArgs) -> Result<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ (n as u64).rotate_left(32));
    let values: Vec<i64> = (0..n).map(|_| rng.gen_range(0..1 << 40)).collect();
    let s = build_structure(&values, kind, t)?;
    let report = s.space_report();
    let windows: Vec<(usize, usize)> = (0..args.queries)
        .map(|_| {
            let (a, b) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
            (a.min(b), a.max(b))
        })
        .collect();
    let (mut sum, mut max) = (0u64, 0u64);
    for &(a, b) in &windows {
        let mut p = ProbeCounter::new(args.word_size);
        s.query_probed(a, b, &mut p)?;
        sum += p.distinct();
        max = max.max(p.distinct());
    }
    let mut off = ProbeCounter::disabled();
    let start = Instant::now();
    for &(a, b) in &windows {
        std::hint::black_box(s.query_probed(a, b, &mut off)?);
    }
    let q = windows.len().max(1) as f64;
    let param = match &s {
        Structure::OneBit(o) => format!("r={}", o.r()),
        Structure::Tradeoff(x) => format!("t={}", x.t()),
        Structure::Sparse(_) => "-".into(),
    };
    Ok(BenchRecord {
        kind: kind_name(kind).into(),
        n,
        param,
        total_bits: report.total_bits,
        redundancy_bits: report.redundancy_bits,
        benchmark_bits: report.benchmark_bits,
        mean_probes: sum as f64 / q,
        max_probes: max as f64,
        mean_ns: start.elapsed().as_nanos() as f64 / q,
        seed: args.seed,
        error: None,
    })
}

/// Runs the whole grid; cells that fail are reported and kept.
pub fn grid(args: &BenchArgs) -> Vec<BenchRecord> {
    let mut out = Vec::new();
    for &kind in &args.kind {
        for &n in &args.n {
            let ts: Vec<usize> = if matches!(kind, KindArg::Tradeoff) {
                args.t.clone()
            } else {
                vec![0]
            };
            for t in ts {
                let rec = measure(kind, n, t, args).unwrap_or_else(|e| {
                    eprintln!("srmq bench: {} n={n} t={t}: {e}", kind_name(kind));
                    BenchRecord {
                        kind: kind_name(kind).into(),
                        n,
                        param: if matches!(kind, KindArg::Tradeoff) {
                            format!("t={t}")
                        } else {
                            "-".into()
                        },
                        total_bits: f64::NAN,
                        redundancy_bits: f64::NAN,
                        benchmark_bits: f64::NAN,
                        mean_probes: f64::NAN,
                        max_probes: f64::NAN,
                        mean_ns: f64::NAN,
                        seed: args.seed,
                        error: Some(e.to_string()),
                    }
                });
                out.push(rec);
            }
        }
    }
    out.sort_by(|a, b| (&a.kind, a.n, &a.param).cmp(&(&b.kind, b.n, &b.param)));
    out
}

pub fn run(args: &BenchArgs) -> Result<()> {
    if args.n.contains(&0) || args.t.contains(&0) {
        return Err(Error::Usage("--n and --t values must be positive".into()));
    }
    let records = grid(args);
    let mut sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create_file(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    if args.json {
        serde_json::to_writer_pretty(&mut sink, &records)
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(sink)?;
    } else {
        let mut w = csv::Writer::from_writer(sink);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &records {
            w.write_record([
                r.kind.clone(),
                r.n.to_string(),
                r.param.clone(),
                r.total_bits.to_string(),
                r.redundancy_bits.to_string(),
                r.benchmark_bits.to_string(),
                format!("{:.3}", r.mean_probes),
                r.max_probes.to_string(),
                format!("{:.1}", r.mean_ns),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(())
}
