//! `jtheta` command-line front end.
//!
//! Exit codes: 0 success, 1 failed precondition or selftest, 2 domain or
//! parse error, 3 precision or convergence failure.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jtheta::evaluate::{evaluate_certified, EvalOptions, MethodChoice};
use jtheta::fast::{FastConfig, DEFAULT_P0};
use jtheta::fseq::DEFAULT_C1;
use jtheta::harness::{default_point, run_bench, BenchConfig};
use jtheta::io::{digits_to_bits, parse_complex, render, BundleJson, Format, OutputSet};
use jtheta::selftest::{run_selftest, SelftestConfig};
use jtheta::{Result, ThetaError};

/// Bits beyond `P` at which `--z` and `--tau` are read.
const INPUT_EXTRA_BITS: u32 = 256;

#[derive(Parser)]
#[command(
    name = "jtheta",
    version,
    about = "Jacobi theta functions to arbitrary precision"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate theta functions at one point.
    Compute(ComputeArgs),
    /// Time the naive series against the fast path over a precision list.
    Bench(BenchArgs),
    /// Check the implementation on seeded random points.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct Tuning {
    /// Largest precision (bits) of the series seed for the Newton phase.
    #[arg(long, default_value_t = DEFAULT_P0)]
    p0: u32,
    /// Guard bits of the F^inf stopping rule.
    #[arg(long, default_value_t = DEFAULT_C1)]
    c1: u32,
}

impl Tuning {
    fn config(&self) -> FastConfig {
        FastConfig {
            p0: self.p0,
            c1: self.c1,
            ..FastConfig::default()
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// Decimal (`0.1+0.2i`) or hex-float (`0x3p-2`) complex number.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    z: String,
    #[arg(long, allow_hyphen_values = true)]
    tau: String,
    /// Absolute precision in bits.
    #[arg(
        long = "prec-bits",
        visible_alias = "prec",
        conflicts_with = "prec_digits"
    )]
    prec_bits: Option<u32>,
    /// Absolute precision in decimal digits.
    #[arg(long = "prec-digits")]
    prec_digits: Option<u32>,
    #[arg(long, default_value = "auto")]
    method: String,
    /// Comma-separated subset of 00, 01, 10, 11, constants (or `all`).
    #[arg(long, default_value = "00,01,10,constants")]
    outputs: String,
    #[arg(long, default_value = "plain")]
    format: String,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<String>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated ascending precisions.
    #[arg(long = "prec-list", default_value = "13288,26576,53152")]
    prec_list: String,
    /// Read `--prec-list` as decimal digits instead of bits.
    #[arg(long)]
    digits: bool,
    #[arg(long, default_value_t = 3)]
    repetitions: u32,
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// `csv` or `json`.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<String>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    cases: u32,
    #[arg(long = "prec-bits", visible_alias = "prec", default_value_t = 256)]
    prec_bits: u32,
    /// Spread the cases over all cores.
    #[arg(long)]
    parallel: bool,
    /// Corrupt theta00(0, tau) by one unit at the target precision.
    #[arg(long)]
    inject_fault: bool,
    #[arg(long)]
    out: Option<String>,
    /// Seed precision for the Newton phase (bits).
    #[arg(long, default_value_t = jtheta::fast::TEST_P0)]
    p0: u32,
    #[arg(long, default_value_t = DEFAULT_C1)]
    c1: u32,
}

fn emit(text: &str, out: Option<&str>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| ThetaError::PreconditionViolated(format!("cannot write {path}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn compute(a: &ComputeArgs) -> Result<()> {
    let p = match (a.prec_bits, a.prec_digits) {
        (Some(b), _) => b,
        (None, Some(d)) => digits_to_bits(d),
        (None, None) => 64,
    };
    if p < 8 {
        return Err(ThetaError::Parse(format!(
            "precision must be at least 8 bits, got {p}"
        )));
    }
    let outputs = OutputSet::parse(&a.outputs)?;
    let format: Format = a.format.parse()?;
    let opts = EvalOptions {
        method: a.method.parse::<MethodChoice>()?,
        fast: a.tuning.config(),
        theta11: outputs.th11,
    };
    let z = parse_complex(&a.z, p + INPUT_EXTRA_BITS)?;
    let tau = parse_complex(&a.tau, p + INPUT_EXTRA_BITS)?;
    let (bundle, cert) = evaluate_certified(&z, &tau, p, &opts)?;
    let j = BundleJson::new(&a.z, &a.tau, p, &bundle, &outputs, Some(&cert));
    emit(&render(&j, format), a.out.as_deref())
}

fn parse_list(s: &str, digits: bool) -> Result<Vec<u32>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: u32 = t
                .parse()
                .map_err(|_| ThetaError::Parse(format!("bad precision {t:?}")))?;
            Ok(if digits { digits_to_bits(v) } else { v })
        })
        .collect()
}

fn bench(a: &BenchArgs) -> Result<()> {
    let precisions = parse_list(&a.prec_list, a.digits)?;
    if precisions.iter().any(|&p| p < 8) {
        return Err(ThetaError::Parse(
            "precisions must be at least 8 bits".into(),
        ));
    }
    let top = precisions.iter().copied().max().unwrap_or(64);
    let (dz, dtau) = default_point();
    let z = match &a.z {
        Some(s) => parse_complex(s, top + INPUT_EXTRA_BITS)?,
        None => dz,
    };
    let tau = match &a.tau {
        Some(s) => parse_complex(s, top + INPUT_EXTRA_BITS)?,
        None => dtau,
    };
    let cfg = BenchConfig {
        precisions,
        repetitions: a.repetitions,
        fast: a.tuning.config(),
        z,
        tau,
    };
    let report = run_bench(&cfg)?;
    let text = match a.format.as_str() {
        "csv" => report.to_csv(),
        "json" => serde_json::to_string_pretty(&report).expect("plain data serializes") + "\n",
        other => return Err(ThetaError::Parse(format!("unknown bench format {other:?}"))),
    };
    emit(&text, a.out.as_deref())
}

fn selftest(a: &SelftestArgs) -> Result<bool> {
    if a.prec_bits < 8 {
        return Err(ThetaError::Parse(
            "precision must be at least 8 bits".into(),
        ));
    }
    let cfg = SelftestConfig {
        seed: a.seed,
        cases: a.cases,
        prec: a.prec_bits,
        fast: FastConfig {
            p0: a.p0,
            c1: a.c1,
            ..FastConfig::default()
        },
        parallel: a.parallel,
        inject_fault: a.inject_fault,
    };
    let report = run_selftest(&cfg);
    emit(&report.render(), a.out.as_deref())?;
    Ok(report.failures() == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Compute(a) => compute(a).map(|_| true),
        Cmd::Bench(a) => bench(a).map(|_| true),
        Cmd::Selftest(a) => selftest(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("jtheta: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
