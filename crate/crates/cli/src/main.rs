//! `qkd`: rate curves, attack analytics, Monte Carlo runs and privacy
//! amplification matrices for BB84 with weak coherent pulses.
//!
//! CSV goes to stdout or `--out`; everything meant for a human goes to stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use qkd_core::attack::{
    conclusive_prob, resend_error_rate, secure_mu_threshold, threshold_lhs, ukd_povm,
};
use qkd_core::postproc::{sample_pa_matrices, serialize_pa};
use qkd_core::protosim::{expected_stats, run_protocol, z_scores};
use qkd_core::rates::{self, max_secure_distance, optimize_mu, sweep_distance};
use qkd_core::{EveStrategy, SourceKind, SourceVariant, SystemParams, VariantKind};

const Z_LIMIT: f64 = 5.0;
const MIN_ROUNDS: u64 = 10_000;
const AUDIT_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "qkd", version, about = "BB84 weak-coherent-pulse QKD toolkit")]
struct Cli {
    /// Parameter file (key = value); defaults to the embedded gys-like values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Bright-reference intensity ratio |β|²/|α|².
    #[arg(long, global = true)]
    ref_ratio: Option<f64>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate against distance, μ optimized per point unless --mu is given.
    Sweep(SweepArgs),
    /// Optimal μ and rate at one distance.
    Optimize {
        #[arg(long, value_enum, default_value_t = Source::Random)]
        source: Source,
        #[arg(long, default_value_t = 10.0)]
        distance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest distance with positive rate.
    Maxdist {
        #[arg(long, value_enum)]
        source: Vec<Source>,
    },
    /// Unambiguous-discrimination attack report.
    Attack {
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo protocol run compared to the analytic expectation.
    Simulate(SimulateArgs),
    /// Sample privacy amplification matrices G (n×k) and H (n×(n−k)).
    Pa {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the active parameter file.
    Params,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sources to sweep; defaults to nonrandom and random.
    #[arg(long, value_enum)]
    source: Vec<Source>,
    /// Fixed μ instead of per-point optimization.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// min max [step] in km.
    #[arg(long, num_args = 2..=3, allow_negative_numbers = true, value_names = ["MIN", "MAX", "STEP"], default_values_t = [0.0, 150.0, 1.0])]
    distance: Vec<f64>,
    /// File path for one source, file prefix for several (`<prefix>_<source>.csv`), `-` for stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Source::Nonrandom)]
    source: Source,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    distance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    rounds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Eve::None)]
    eve: Eve,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Source {
    Nonrandom,
    Random,
    Bright,
    Modulated,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Eve {
    None,
    Ukd,
}

type CliResult<T> = std::result::Result<T, String>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_params(cli: &Cli) -> CliResult<SystemParams> {
    let mut p = match &cli.config {
        Some(path) => SystemParams::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => SystemParams::gys_like(),
    };
    if let Some(r) = cli.ref_ratio {
        p.ref_ratio = r;
    }
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let params = load_params(&cli)?;
    match cli.cmd {
        Command::Sweep(args) => sweep(&args, &params),
        Command::Optimize {
            source,
            distance,
            out,
        } => {
            let kind = rate_kind(source, &params)?;
            let p = optimize_mu(kind, distance, &params).map_err(|e| e.to_string())?;
            eprintln!(
                "{}: optimal mu {:.6e}, G {:.6e} at {distance} km",
                kind.name(),
                p.mu,
                p.g
            );
            write_output(out.as_deref(), |w| rates::write_csv(w, &[p]))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Maxdist { source } => {
            let sources = default_sources(source);
            let mut out = io::stdout().lock();
            let res: io::Result<()> = (|| {
                writeln!(out, "source,max_distance_km,capped")?;
                for s in sources {
                    let kind = rate_kind(s, &params).map_err(io::Error::other)?;
                    let m = max_secure_distance(kind, &params).map_err(io::Error::other)?;
                    writeln!(out, "{},{:.1},{}", kind.name(), m.distance_km, m.capped)?;
                }
                Ok(())
            })();
            res.map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack { mu, out } => attack(mu, out.as_deref()),
        Command::Simulate(args) => simulate(&args, &params),
        Command::Pa { n, k, seed, out } => {
            let (g, h) = sample_pa_matrices(n, k, seed).map_err(|e| e.to_string())?;
            let text = serialize_pa(&g, &h).map_err(|e| e.to_string())?;
            write_output(out.as_deref(), |w| w.write_all(text.as_bytes()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Params => {
            print!("{}", params.to_config_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn default_sources(mut s: Vec<Source>) -> Vec<Source> {
    if s.is_empty() {
        s = vec![Source::Nonrandom, Source::Random];
    }
    s.dedup();
    s
}

fn rate_kind(s: Source, params: &SystemParams) -> CliResult<SourceKind> {
    match s {
        Source::Nonrandom => Ok(SourceKind::Nonrandom),
        Source::Random => Ok(SourceKind::Random),
        Source::Bright => Ok(SourceKind::Bright {
            ratio: params.ref_ratio,
        }),
        Source::Modulated => Err("rate curves are defined for nonrandom, random and bright".into()),
    }
}

fn sweep(args: &SweepArgs, params: &SystemParams) -> CliResult<ExitCode> {
    let (d_min, d_max) = (args.distance[0], args.distance[1]);
    let step = args.distance.get(2).copied().unwrap_or(1.0);
    let sources = default_sources(args.source.clone());
    let single = sources.len() == 1;
    if !single && args.out.as_deref().map_or(true, |o| o == "-") {
        return Err("several sources need --out <prefix>; pass one --source for stdout".into());
    }
    for s in sources {
        let kind = rate_kind(s, params)?;
        let points = match args.mu {
            None => sweep_distance(kind, d_min, d_max, step, params).map_err(|e| e.to_string())?,
            Some(mu) => {
                let n = rates::sweep_len(d_min, d_max, step).map_err(|e| e.to_string())?;
                (0..n)
                    .map(|i| rates::evaluate_point(kind, mu, d_min + step * i as f64, params))
                    .collect::<qkd_core::Result<Vec<_>>>()
                    .map_err(|e| e.to_string())?
            }
        };
        let cutoff = points.iter().find(|p| p.g == 0.0).map(|p| p.distance_km);
        match cutoff {
            Some(d) => info!("{}: rate vanishes at {d} km", kind.name()),
            None => info!("{}: positive over the whole range", kind.name()),
        }
        let path = match args.out.as_deref() {
            None | Some("-") => None,
            Some(o) if single => Some(PathBuf::from(o)),
            Some(o) => Some(PathBuf::from(format!("{o}_{}.csv", kind.name()))),
        };
        write_output(path.as_deref(), |w| rates::write_csv(w, &points))?;
        if let Some(p) = path {
            eprintln!("{}: {} rows -> {}", kind.name(), points.len(), p.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn attack(mu: f64, out: Option<&Path>) -> CliResult<ExitCode> {
    let err = |e: qkd_core::Error| e.to_string();
    let povm = ukd_povm(mu).map_err(err)?;
    let eig = povm.min_eigenvalues();
    let completeness = povm.completeness_deviation();
    let threshold = secure_mu_threshold();
    let audit = eig.iter().all(|&v| v >= -AUDIT_TOL) && completeness <= AUDIT_TOL;
    let rows: Vec<(&str, f64)> = vec![
        ("mu", mu),
        ("p_conclusive_bit0", conclusive_prob(0, mu).map_err(err)?),
        ("p_conclusive_bit1", conclusive_prob(1, mu).map_err(err)?),
        ("resend_error_rate", resend_error_rate()),
        ("threshold_lhs", threshold_lhs(mu)),
        ("mu_threshold", threshold),
        ("min_eigenvalue_e0", eig[0]),
        ("min_eigenvalue_e1", eig[1]),
        ("min_eigenvalue_inconclusive", eig[2]),
        ("completeness_deviation", completeness),
    ];
    write_output(out, |w| {
        writeln!(w, "quantity,value")?;
        for (name, v) in &rows {
            writeln!(w, "{name},{v:e}")?;
        }
        Ok(())
    })?;
    eprintln!(
        "mu {mu}: {} (threshold {threshold:.6}), POVM audit {}",
        if mu < threshold {
            "provably secure"
        } else {
            "not covered by the security proof"
        },
        if audit { "passed" } else { "FAILED" }
    );
    Ok(if audit {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn simulate(args: &SimulateArgs, params: &SystemParams) -> CliResult<ExitCode> {
    if args.rounds < MIN_ROUNDS {
        return Err(format!("--rounds must be at least {MIN_ROUNDS}"));
    }
    let kind = match args.source {
        Source::Nonrandom | Source::Random => VariantKind::UnmodulatedRef,
        Source::Modulated => VariantKind::ModulatedRef,
        Source::Bright => VariantKind::BrightRef,
    };
    let eve = match args.eve {
        Eve::None => EveStrategy::None,
        Eve::Ukd => EveStrategy::UkdInterceptResend,
    };
    let source =
        SourceVariant::with_mu(kind, args.mu, params.ref_ratio).map_err(|e| e.to_string())?;
    let chan = qkd_core::ChannelParams::new(params.loss_db_per_km, args.distance)
        .map_err(|e| e.to_string())?;
    let tally = run_protocol(args.rounds, source, &chan, &params.detector, eve, args.seed)
        .map_err(|e| e.to_string())?;
    let exp = expected_stats(source, &chan, &params.detector, eve).map_err(|e| e.to_string())?;
    let (zq, ze) = z_scores(&tally, &exp);
    write_output(args.out.as_deref(), |w| tally.write_csv(w))?;
    let q_hat = tally.detected as f64 / tally.sent as f64;
    let errors = tally.errors_x + tally.errors_y;
    let e_hat = errors as f64 / tally.sifted.max(1) as f64;
    eprintln!("Q observed {q_hat:.6e} expected {:.6e} z {zq:+.2}", exp.q);
    eprintln!("e observed {e_hat:.6e} expected {:.6e} z {ze:+.2}", exp.e);
    if zq.abs() > Z_LIMIT || ze.abs() > Z_LIMIT || !zq.is_finite() || !ze.is_finite() {
        warn!("observed statistics deviate from the analytic model by more than {Z_LIMIT} sigma");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn write_output<F>(path: Option<&Path>, f: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let res = match path {
        Some(p) => File::create(p)
            .map(BufWriter::new)
            .and_then(|mut w| f(&mut w).and_then(|_| w.flush())),
        None => {
            let mut w = io::stdout().lock();
            f(&mut w).and_then(|_| w.flush())
        }
    };
    res.map_err(|e| match path {
        Some(p) => format!("{}: {e}", p.display()),
        None => e.to_string(),
    })
}
