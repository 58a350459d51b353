//! `randorder` command-line driver.
//!
//! Exit codes: 0 the relation holds / every check passes, 1 it fails,
//! 2 indeterminate, 3 usage, parse or shape errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use randorder::channels::{self, KrausChannel};
use randorder::experiments::{self, StatExperiment};
use randorder::io;
use randorder::linalg;
use randorder::order::{self, OrderStatus, OrderVerdict, SolverConfig};
use randorder::semigroups::markov;
use randorder::semigroups::quadrature::PolarGrid;
use randorder::semigroups::suite::{self, AmplifierSuiteConfig, Check};
use randorder::semigroups::threegap;

const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "randorder", version, about = "Randomization order of quantum channels and experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Residual at which a relation is accepted.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_feas: f64,
    /// Residual above which a stalled search reports failure.
    #[arg(long, global = true, default_value_t = 1e-4)]
    tol_fail: f64,
    #[arg(long, global = true, default_value_t = 20000)]
    max_iter: usize,
    /// Seed for restarts and the randomized cocycle times.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Relative eigenvalue cutoff defining supports.
    #[arg(long, global = true)]
    support_cutoff: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Is FIRST a randomization of SECOND (FIRST = α ∘ SECOND)?
    CheckOrder { first: PathBuf, second: PathBuf },
    /// Both directions of check-order.
    CheckEquiv { first: PathBuf, second: PathBuf },
    /// Conjugate (complementary) channel.
    Conjugate { channel: PathBuf },
    /// Is the channel randomization-equivalent to a broadcastable one?
    Broadcastable { channel: PathBuf },
    /// Minimal sufficient reduction of an experiment.
    Minsuf {
        experiment: PathBuf,
        /// "fixed", "default" or a comma-separated list of times.
        #[arg(long, default_value = "default")]
        tgrid: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Canonical fingerprint of an experiment.
    Fingerprint {
        experiment: PathBuf,
        #[arg(long, default_value = "default")]
        tgrid: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Is experiment FIRST a randomization of SECOND?
    ExpOrder {
        first: PathBuf,
        second: PathBuf,
        /// Also report an upper bound on the deficiency.
        #[arg(long)]
        deficiency: bool,
    },
    /// Amplifier verification suite.
    Amplifier {
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 1.0, 2.0])]
        t_list: Vec<f64>,
        #[arg(long, default_value_t = 40)]
        fock_dim: usize,
        #[arg(long, default_value_t = 40)]
        kraus_cutoff: usize,
        /// Quadrature radius (default √(3N)).
        #[arg(long)]
        grid_r: Option<f64>,
        #[arg(long, default_value_t = 64)]
        n_r: usize,
        #[arg(long, default_value_t = 48)]
        n_phi: usize,
        /// Restrict to these checks: kekka, qscaling, semigroup, smoothing,
        /// bargmann, truncation.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
    },
    /// Three-gap partition suite.
    Threegap {
        #[arg(long, default_value_t = 0.618_033_988_749_894_8)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 5, 8, 10, 12, 100, 1000])]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        window: usize,
    },
    /// Markov diagnostics of a semigroup acting on an experiment.
    Markov {
        experiment: PathBuf,
        #[arg(long, value_enum, default_value_t = Family::Amplifier)]
        family: Family,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 6.0, 8.0])]
        t_list: Vec<f64>,
        /// Kraus cutoff for the amplifier (default: the Fock dimension).
        #[arg(long)]
        kraus_cutoff: Option<usize>,
        #[arg(long)]
        grid_r: Option<f64>,
        #[arg(long, default_value_t = 48)]
        n_r: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Family {
    Amplifier,
    Depolarizing,
    Dephasing,
}

type Semigroup = fn(usize, f64) -> randorder::Result<KrausChannel>;

struct Report {
    body: String,
    code: u8,
}

fn status_code(s: OrderStatus) -> u8 {
    match s {
        OrderStatus::Holds => 0,
        OrderStatus::Fails => 1,
        OrderStatus::Indeterminate => 2,
    }
}

/// Holds only if both hold; fails if either fails.
fn combined_code(a: OrderStatus, b: OrderStatus) -> u8 {
    if a == OrderStatus::Fails || b == OrderStatus::Fails {
        1
    } else {
        status_code(a).max(status_code(b))
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn csv_table<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn table<T: Serialize>(fmt: Format, rows: &[T]) -> Result<String> {
    match fmt {
        Format::Csv => csv_table(rows),
        Format::Json => Ok(pretty(&serde_json::to_value(rows)?)),
    }
}

#[derive(Serialize)]
struct VerdictRow {
    direction: &'static str,
    status: OrderStatus,
    residual: f64,
    iterations: usize,
}

fn verdict_report(fmt: Format, verdicts: &[(&'static str, &OrderVerdict)], extra: Value) -> Result<String> {
    match fmt {
        Format::Csv => {
            let rows: Vec<VerdictRow> = verdicts
                .iter()
                .map(|(d, v)| VerdictRow { direction: d, status: v.status, residual: v.residual, iterations: v.iterations })
                .collect();
            csv_table(&rows)
        }
        Format::Json => {
            let mut v = if verdicts.len() == 1 {
                io::verdict_to_json(verdicts[0].1)
            } else {
                Value::Object(verdicts.iter().map(|(d, v)| (d.to_string(), io::verdict_to_json(v))).collect())
            };
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                m.extend(e);
            }
            Ok(pretty(&v))
        }
    }
}

fn t_grid(spec: &str, seed: u64) -> Result<Vec<f64>> {
    match spec {
        "default" => Ok(experiments::default_t_grid(seed)),
        "fixed" => Ok(experiments::fixed_t_grid()),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("--tgrid: cannot parse '{s}'")))
            .collect(),
    }
}

fn read_channel(p: &Path) -> Result<KrausChannel> {
    Ok(io::read_channel(p)?)
}

fn read_experiment(p: &Path) -> Result<StatExperiment> {
    Ok(io::read_experiment(p)?)
}

fn run(cli: &Cli) -> Result<Report> {
    let c = &cli.common;
    let cfg = SolverConfig {
        tol_feas: c.tol_feas,
        tol_fail: c.tol_fail,
        max_iter: c.max_iter,
        seed: c.seed,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    if let Some(cut) = c.support_cutoff {
        if !(cut > 0.0 && cut < 1.0) {
            bail!("--support-cutoff must lie in (0, 1)");
        }
        linalg::set_support_cutoff(cut);
    }
    let fmt = c.format;
    let report = match &cli.command {
        Command::CheckOrder { first, second } => {
            let (l, g) = (read_channel(first)?, read_channel(second)?);
            let v = order::check_randomization(&l, &g, &cfg)?;
            Report { body: verdict_report(fmt, &[("first_le_second", &v)], json!({}))?, code: status_code(v.status) }
        }
        Command::CheckEquiv { first, second } => {
            let (l, g) = (read_channel(first)?, read_channel(second)?);
            let (a, b) = order::check_equivalence(&l, &g, &cfg)?;
            Report {
                body: verdict_report(fmt, &[("first_le_second", &a), ("second_le_first", &b)], json!({}))?,
                code: combined_code(a.status, b.status),
            }
        }
        Command::Conjugate { channel } => {
            let ch = channels::conjugate_channel(&read_channel(channel)?)?;
            Report { body: pretty(&io::channel_to_json(&ch)), code: 0 }
        }
        Command::Broadcastable { channel } => {
            let v = order::check_broadcastable(&read_channel(channel)?, &cfg)?;
            Report { body: verdict_report(fmt, &[("broadcastable", &v)], json!({}))?, code: status_code(v.status) }
        }
        Command::Minsuf { experiment, tgrid, depth } => {
            let e = read_experiment(experiment)?;
            let grid = t_grid(tgrid, c.seed)?;
            let m = experiments::minimal_sufficient_experiment(&e, &grid)?;
            let (a, b) = order::check_experiment_equivalence(&m.experiment, &e, &cfg)?;
            let fp = experiments::canonical_fingerprint(&e, *depth, &grid)?;
            let blocks = m.algebra.blocks().map(|b| b.report().0).unwrap_or_default();
            let report = json!({
                "algebra_dim": m.algebra.dim(),
                "block_structure": blocks,
                "generators": m.algebra.basis().iter().map(io::matrix_to_json).collect::<Vec<_>>(),
                "reduced_experiment": io::experiment_to_json(&m.experiment),
                "fingerprint": io::fingerprint_to_json(&fp),
                "equivalence": {
                    "reduced_le_original": io::verdict_to_json(&a),
                    "original_le_reduced": io::verdict_to_json(&b),
                },
            });
            Report { body: pretty(&report), code: combined_code(a.status, b.status) }
        }
        Command::Fingerprint { experiment, tgrid, depth } => {
            let e = read_experiment(experiment)?;
            let fp = experiments::canonical_fingerprint(&e, *depth, &t_grid(tgrid, c.seed)?)?;
            Report { body: pretty(&io::fingerprint_to_json(&fp)), code: 0 }
        }
        Command::ExpOrder { first, second, deficiency } => {
            let (e, f) = (read_experiment(first)?, read_experiment(second)?);
            let v = order::check_experiment_randomization(&e, &f, &cfg)?;
            let extra = if *deficiency {
                json!({ "deficiency_upper_bound": order::deficiency_upper_bound(&e, &f, &cfg)? })
            } else {
                json!({})
            };
            Report { body: verdict_report(fmt, &[("first_le_second", &v)], extra)?, code: status_code(v.status) }
        }
        Command::Amplifier { t_list, fock_dim, kraus_cutoff, grid_r, n_r, n_phi, suite: names } => {
            let checks = if names.is_empty() {
                Check::ALL.to_vec()
            } else {
                names.iter().map(|n| n.parse::<Check>()).collect::<randorder::Result<Vec<_>>>()?
            };
            let scfg = AmplifierSuiteConfig {
                t_list: t_list.clone(),
                fock_dim: *fock_dim,
                kraus_cutoff: *kraus_cutoff,
                grid_r: *grid_r,
                n_r: *n_r,
                n_phi: *n_phi,
                checks,
            };
            let rows = suite::run_amplifier_suite(&scfg)?;
            Report { body: table(fmt, &rows)?, code: if suite::suite_passes(&rows) { 0 } else { 1 } }
        }
        Command::Threegap { alpha, k_list, window } => {
            if !alpha.is_finite() {
                bail!("--alpha must be finite");
            }
            let rows = threegap::threegap_suite(*alpha, k_list, *window)?;
            Report { body: table(fmt, &rows)?, code: if threegap::threegap_suite_passes(&rows) { 0 } else { 1 } }
        }
        Command::Markov { experiment, family, t_list, kraus_cutoff, grid_r, n_r } => {
            let e = read_experiment(experiment)?;
            let d = e.dim();
            match family {
                Family::Amplifier => {
                    let r = grid_r.unwrap_or((3.0 * d as f64).sqrt());
                    let grid = PolarGrid::new(r, *n_r, 2 * d);
                    let rows =
                        markov::amplifier_markov_diagnostics(&e, t_list, kraus_cutoff.unwrap_or(d), &grid, c.tol_feas)?;
                    let ok = rows.iter().all(|r| r.step_holds.unwrap_or(true));
                    Report { body: table(fmt, &rows)?, code: if ok { 0 } else { 1 } }
                }
                Family::Depolarizing | Family::Dephasing => {
                    let (sg, inf): (Semigroup, KrausChannel) = match family {
                        Family::Depolarizing => (markov::depolarizing_semigroup, KrausChannel::completely_depolarizing(d)),
                        _ => (markov::dephasing_semigroup, KrausChannel::dephasing(d)),
                    };
                    let rows = markov::markov_diagnostics(&|t| sg(d, t), &e, t_list, Some(&inf), &cfg)?;
                    let code = rows.iter().filter_map(|r| r.step_status).map(status_code).max().unwrap_or(0);
                    Report { body: table(fmt, &rows)?, code }
                }
            }
        }
    };
    Ok(report)
}

fn init_threads() {
    if let Some(n) = std::env::var("RANDORDER_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(body.as_bytes())?;
            Ok(so.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads();
    match run(&cli).and_then(|r| emit(&cli.common.out, &r.body).map(|_| r.code)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
