use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use tensor_spectra::{full_sweep, EigKind, Spectrum, SweepOptions, Tensor, Termination};

const SEED_ENV: &str = "TENSOR_SPECTRA_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Zeig,
    Heig,
    Both,
}

/// Real Z- and H-eigenvalues of a tensor by moment relaxations.
#[derive(Debug, Parser)]
#[command(name = "tensor-spectra", version)]
struct Cli {
    #[arg(value_enum)]
    mode: Mode,
    /// Tensor file ("m n [dense|sparse]" header, then entries).
    file: PathBuf,
    /// Initial gap between consecutive eigenvalues.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta_min: f64,
    /// Highest relaxation order is the starting order plus this.
    #[arg(long, default_value_t = 3)]
    kmax_offset: usize,
    /// Only nonnegative eigenvalues.
    #[arg(long)]
    nonneg: bool,
    #[arg(long, default_value_t = 1e-7)]
    tol_res: f64,
    #[arg(long, default_value_t = 1e-6)]
    rank_tol: f64,
    /// Seed of the atom extraction; TENSOR_SPECTRA_SEED takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    /// Write every relaxation to this directory.
    #[arg(long, value_name = "DIR")]
    dump_sdp: Option<PathBuf>,
}

#[derive(Serialize)]
struct JsonEigen {
    value: f64,
    vectors: Vec<Vec<f64>>,
    residual: f64,
    isolated: bool,
    order: usize,
}

#[derive(Serialize)]
struct JsonConfig {
    input: String,
    nonneg: bool,
    delta: f64,
    delta_min: f64,
    kmax_offset: usize,
    tol_res: f64,
    rank_tol: f64,
    eps_eq: f64,
    eps_dedup: f64,
    seed: u64,
}

#[derive(Serialize)]
struct JsonTimings {
    relaxations: usize,
    solver_iterations: usize,
}

#[derive(Serialize)]
struct JsonSpectrum {
    kind: &'static str,
    eigenvalues: Vec<JsonEigen>,
    termination: &'static str,
    config: JsonConfig,
    timings: JsonTimings,
}

/// Rounds to 12 significant digits.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return 0.0;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn to_json(s: &Spectrum, cli: &Cli, opts: &SweepOptions) -> JsonSpectrum {
    JsonSpectrum {
        kind: s.kind.as_str(),
        eigenvalues: s
            .eigenpairs
            .iter()
            .map(|e| JsonEigen {
                value: sig12(e.value),
                vectors: e.vectors.iter().map(|v| v.iter().map(|&x| sig12(x)).collect()).collect(),
                residual: sig12(e.residual),
                isolated: e.isolated,
                order: e.order,
            })
            .collect(),
        termination: s.termination.as_str(),
        config: JsonConfig {
            input: cli.file.display().to_string(),
            nonneg: opts.nonneg,
            delta: opts.delta0,
            delta_min: opts.delta_min,
            kmax_offset: opts.kmax_offset,
            tol_res: opts.eps_res,
            rank_tol: opts.rank_tol,
            eps_eq: opts.eps_eq,
            eps_dedup: opts.eps_dedup,
            seed: opts.seed,
        },
        timings: JsonTimings {
            relaxations: s.solves(),
            solver_iterations: s.solver_iterations(),
        },
    }
}

fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    // no "-0.0000"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn to_text(s: &Spectrum, a: &Tensor, cli: &Cli) -> String {
    let mut out = String::new();
    let scope = if cli.nonneg { "nonnegative " } else { "" };
    let _ = writeln!(
        out,
        "{scope}{}-eigenvalues of {} (m={}, n={})",
        s.kind,
        cli.file.display(),
        a.order(),
        a.dim()
    );
    if s.eigenpairs.is_empty() {
        let tail = match s.termination {
            Termination::CertifiedComplete => " (certified)",
            _ => "",
        };
        let _ = writeln!(out, "no real {scope}{}-eigenvalues{tail}", s.kind);
    } else {
        let _ = writeln!(
            out,
            "{:>12}  {:>9}  {:>8}  {:>5}  eigenvectors",
            "value", "residual", "isolated", "order"
        );
        for e in &s.eigenpairs {
            let vecs: Vec<String> = e
                .vectors
                .iter()
                .map(|v| format!("({})", v.iter().map(|&x| fmt4(x)).collect::<Vec<_>>().join(", ")))
                .collect();
            let _ = writeln!(
                out,
                "{:>12}  {:>9.1e}  {:>8}  {:>5}  {}",
                fmt4(e.value),
                e.residual,
                if e.isolated { "yes" } else { "no" },
                e.order,
                vecs.join(" ")
            );
        }
    }
    let partial = if partial(s) { " (partial results)" } else { "" };
    let _ = writeln!(out, "termination: {}{partial}", s.termination.as_str());
    out
}

fn partial(s: &Spectrum) -> bool {
    s.termination != Termination::CertifiedComplete
}

fn config(cli: &Cli) -> Result<SweepOptions, String> {
    let seed = match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))?,
        Err(_) => cli.seed,
    };
    let opts = SweepOptions {
        delta0: cli.delta,
        delta_min: cli.delta_min,
        kmax_offset: cli.kmax_offset,
        nonneg: cli.nonneg,
        eps_res: cli.tol_res,
        rank_tol: cli.rank_tol,
        seed,
        dump_dir: cli.dump_sdp.clone(),
        ..SweepOptions::default()
    };
    opts.validate().map_err(|e| e.to_string())?;
    Ok(opts)
}

fn run(cli: &Cli) -> Result<ExitCode, (u8, String)> {
    let opts = config(cli).map_err(|e| (2, e))?;
    let text = std::fs::read_to_string(&cli.file)
        .map_err(|e| (2, format!("{}: {e}", cli.file.display())))?;
    let a = Tensor::parse(&text).map_err(|e| (2, format!("{}: {e}", cli.file.display())))?;
    let kinds: &[EigKind] = match cli.mode {
        Mode::Zeig => &[EigKind::Z],
        Mode::Heig => &[EigKind::H],
        Mode::Both => &[EigKind::Z, EigKind::H],
    };
    let mut spectra = Vec::new();
    for &kind in kinds {
        let s = full_sweep(kind, &a, &opts).map_err(|e| (1, e.to_string()))?;
        spectra.push(s);
    }
    if cli.json {
        let docs: Vec<JsonSpectrum> = spectra.iter().map(|s| to_json(s, cli, &opts)).collect();
        let body = if docs.len() == 1 {
            serde_json::to_string_pretty(&docs[0])
        } else {
            serde_json::to_string_pretty(&docs)
        }
        .map_err(|e| (1, e.to_string()))?;
        println!("{body}");
    } else {
        let blocks: Vec<String> = spectra.iter().map(|s| to_text(s, &a, cli)).collect();
        print!("{}", blocks.join("\n"));
    }
    Ok(if spectra.iter().any(partial) {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("tensor-spectra: {msg}");
            ExitCode::from(code)
        }
    }
}
