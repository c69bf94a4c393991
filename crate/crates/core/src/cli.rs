//! The `greedy-mine` command line.
//!
//! Exit status: 0 on success, 1 on a numerical or I/O failure (including a
//! table reproduction mismatch), 2 on a usage or validation error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{self, StateProbabilities, DEFAULT_THRESHOLD_TOL};
use crate::experiments::{
    self, format_significant, ExperimentError, FlatRecord, SweepMode, SweepOptions, Table1Cell,
    UNDEFINED_MARKER,
};
use crate::model::{StrategyParams, DEFAULT_R_LEADER};
use crate::oracle::{self, DEFAULT_DEPTH};
use crate::simulation::{self, SimConfig, DEFAULT_GIVEUP_DEPTH, DEFAULT_TRIALS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Optional cap on worker threads.
pub const THREADS_ENV: &str = "NG_GREEDY_THREADS";

fn probability(text: &str) -> Result<f64, String> {
    let value: f64 = text.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(format!("{value} is outside [0, 1]"))
    }
}

fn positive_real(text: &str) -> Result<f64, String> {
    let value: f64 = text.parse().map_err(|e| format!("{e}"))?;
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{value} is not a positive number"))
    }
}

fn positive_count(text: &str) -> Result<u64, String> {
    let value: u64 = text.parse().map_err(|e| format!("{e}"))?;
    if value == 0 {
        return Err("must be at least 1".into());
    }
    Ok(value)
}

fn depth(text: &str) -> Result<u32, String> {
    let value: u32 = text.parse().map_err(|e| format!("{e}"))?;
    if value < 2 {
        return Err(format!("{value} is below the minimum depth 2"));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Closed,
    Oracle,
    Mc,
    All,
}

impl From<ModeArg> for SweepMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Closed => SweepMode::Closed,
            ModeArg::Oracle => SweepMode::Oracle,
            ModeArg::Mc => SweepMode::Mc,
            ModeArg::All => SweepMode::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Greedy and honest revenue per (alpha, gamma).
    Revenue,
    /// Closed-form relative extra reward per (alpha, gamma).
    Heatmap,
}

#[derive(Debug, Parser)]
#[command(name = "greedy-mine", version, about = "Greedy-Mine incentive laboratory for Bitcoin-NG")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    pub format: Format,
    /// Write the output to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fee-split bounds that keep the classic attacks unprofitable.
    Bounds {
        #[arg(long, value_parser = probability)]
        alpha: f64,
    },
    /// Closed-form state probabilities, revenues and relative extra reward.
    Analytic {
        #[arg(long, value_parser = probability)]
        alpha: f64,
        #[arg(long, value_parser = probability)]
        gamma: f64,
        #[arg(long = "r-leader", value_parser = probability, default_value_t = DEFAULT_R_LEADER)]
        r_leader: f64,
    },
    /// Bracketed exact greedy win probability of the truncated chain.
    Oracle {
        #[arg(long, value_parser = probability)]
        alpha: f64,
        #[arg(long, value_parser = probability)]
        gamma: f64,
        #[arg(long, value_parser = depth, default_value_t = DEFAULT_DEPTH)]
        depth: u32,
        #[arg(long = "r-leader", value_parser = probability, default_value_t = DEFAULT_R_LEADER)]
        r_leader: f64,
    },
    /// Monte Carlo estimate of the greedy win probability.
    Simulate {
        #[arg(long, value_parser = probability)]
        alpha: f64,
        #[arg(long, value_parser = probability)]
        gamma: f64,
        #[arg(long, value_parser = positive_count, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, required_unless_present = "nondeterministic", conflicts_with = "nondeterministic")]
        seed: Option<u64>,
        /// Draw the master seed from system entropy (it is still echoed).
        #[arg(long)]
        nondeterministic: bool,
        #[arg(long = "giveup-depth", value_parser = depth, default_value_t = DEFAULT_GIVEUP_DEPTH)]
        giveup_depth: u32,
        #[arg(long = "r-leader", value_parser = probability, default_value_t = DEFAULT_R_LEADER)]
        r_leader: f64,
    },
    /// Sweep a grid of (alpha, gamma) points.
    Sweep {
        #[arg(long, value_enum, default_value_t = SweepKind::Revenue)]
        kind: SweepKind,
        /// Comma-separated alpha grid [default: 0.01, 0.02, .., 0.50].
        #[arg(long, value_parser = probability, value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Comma-separated gamma list [default: 0, 0.25, 0.5, 1].
        #[arg(long, value_parser = probability, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Closed)]
        mode: ModeArg,
        #[arg(long, value_parser = depth, default_value_t = DEFAULT_DEPTH)]
        depth: u32,
        #[arg(long, value_parser = positive_count, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "giveup-depth", value_parser = depth, default_value_t = DEFAULT_GIVEUP_DEPTH)]
        giveup_depth: u32,
        #[arg(long = "r-leader", value_parser = probability, default_value_t = DEFAULT_R_LEADER)]
        r_leader: f64,
    },
    /// Minimum mining power for which Greedy-Mine pays off.
    Threshold {
        /// One or more comma-separated propagation factors.
        #[arg(long, value_parser = probability, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        gamma: Vec<f64>,
        #[arg(long, value_parser = positive_real, default_value_t = DEFAULT_THRESHOLD_TOL)]
        tol: f64,
    },
    /// Reproduce the published relative-extra-reward table.
    Table1,
}

/// What one invocation printed and how it exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Outcome {
    fn usage(message: String) -> Self {
        Outcome {
            code: EXIT_USAGE,
            stdout: Vec::new(),
            stderr: message,
        }
    }

    fn failure(message: String) -> Self {
        Outcome {
            code: EXIT_FAILURE,
            stdout: Vec::new(),
            stderr: message,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let text = err.render().to_string();
            return if code == 0 {
                Outcome {
                    code,
                    stdout: text.into_bytes(),
                    stderr: String::new(),
                }
            } else {
                Outcome::usage(text)
            };
        }
    };

    let threads = match std::env::var(THREADS_ENV) {
        Ok(value) => match value.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => return Outcome::usage(format!("error: {THREADS_ENV} must be a positive integer, got {value:?}\n")),
        },
        Err(_) => None,
    };
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Outcome::failure(format!("error: cannot start worker pool: {e}\n")),
        },
        None => dispatch(&cli),
    }
}

/// Rendered document plus whether the command's own check passed.
struct Rendered {
    body: Vec<u8>,
    passed: bool,
}

impl Rendered {
    fn ok(body: impl Into<Vec<u8>>) -> Self {
        Rendered {
            body: body.into(),
            passed: true,
        }
    }
}

pub fn dispatch(cli: &Cli) -> Outcome {
    let rendered = match render(cli) {
        Ok(r) => r,
        Err(err) => {
            let code = match err {
                ExperimentError::EmptyGrid(_)
                | ExperimentError::OutOfRange { .. }
                | ExperimentError::Model(_)
                | ExperimentError::Sim(_) => EXIT_USAGE,
                ExperimentError::Analytics(ref e) => match e {
                    analytics::AnalyticsError::OutOfRange { .. }
                    | analytics::AnalyticsError::BadTolerance(_)
                    | analytics::AnalyticsError::DegenerateAlpha(_) => EXIT_USAGE,
                    _ => EXIT_FAILURE,
                },
                ExperimentError::Oracle(ref e) => match e {
                    oracle::OracleError::DepthTooSmall { .. } | oracle::OracleError::OutOfDomain(_) => EXIT_USAGE,
                    _ => EXIT_FAILURE,
                },
                _ => EXIT_FAILURE,
            };
            return Outcome {
                code,
                stdout: Vec::new(),
                stderr: format!("error: {err}\n"),
            };
        }
    };
    let code = if rendered.passed { EXIT_OK } else { EXIT_FAILURE };

    match &cli.out {
        Some(path) => match std::fs::write(path, &rendered.body) {
            Ok(()) => Outcome {
                code,
                stdout: Vec::new(),
                stderr: format!("wrote {} bytes to {}\n", rendered.body.len(), path.display()),
            },
            Err(e) => Outcome::failure(format!("error: cannot write {}: {e}\n", path.display())),
        },
        None => Outcome {
            code,
            stdout: rendered.body,
            stderr: String::new(),
        },
    }
}

fn num(value: f64) -> String {
    format_significant(value, experiments::CSV_SIGNIFICANT_DIGITS)
}

fn opt_num(value: Option<f64>) -> String {
    value.map_or_else(|| UNDEFINED_MARKER.to_string(), num)
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, ExperimentError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer
        .into_inner()
        .map_err(|e| ExperimentError::Csv(csv::Error::from(e.into_error())))
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, ExperimentError> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    Ok(body)
}

fn records<R: FlatRecord>(format: Format, rows: &[R], human: impl FnOnce(&[R]) -> String) -> Result<Vec<u8>, ExperimentError> {
    match format {
        Format::Human => Ok(human(rows).into_bytes()),
        Format::Json => experiments::to_json(rows),
        Format::Csv => experiments::to_csv(rows),
    }
}

#[derive(Serialize)]
struct AnalyticDoc {
    alpha: f64,
    gamma: f64,
    r_leader: f64,
    probs: StateProbabilities,
    revenue_honest: f64,
    revenue_greedy: f64,
    rer: RerValue,
}

/// A relative extra reward that is either a number or the undefined marker.
#[derive(Serialize)]
#[serde(untagged)]
enum RerValue {
    Defined(f64),
    Undefined(&'static str),
}

impl From<Option<f64>> for RerValue {
    fn from(value: Option<f64>) -> Self {
        value.map_or(RerValue::Undefined(UNDEFINED_MARKER), RerValue::Defined)
    }
}

#[derive(Serialize)]
struct OracleDoc {
    alpha: f64,
    gamma: f64,
    r_leader: f64,
    depth: u32,
    lower: f64,
    upper: f64,
    residual: f64,
    closed_form: f64,
    gap_lower_minus_closed: f64,
}

#[derive(Serialize)]
struct SimulateDoc {
    alpha: f64,
    gamma: f64,
    r_leader: f64,
    trials: u64,
    seed: u64,
    nondeterministic: bool,
    giveup_depth: u32,
    greedy_wins: u64,
    honest_wins: u64,
    truncated: u64,
    p_hat: f64,
    ci95_half_width: f64,
    mean_steps: f64,
    rer_estimate: RerValue,
}

#[derive(Serialize)]
struct Table1Doc<'a> {
    tolerance_percent: f64,
    all_pass: bool,
    cells: &'a [Table1Cell],
}

fn render(cli: &Cli) -> Result<Rendered, ExperimentError> {
    let format = cli.format;
    match cli.command {
        Command::Bounds { alpha } => {
            let b = analytics::incentive_bounds(alpha)?;
            let (low, high) = b
                .window
                .map_or((None, None), |(l, h)| (Some(l), Some(h)));
            let body = match format {
                Format::Human => {
                    let mut s = String::new();
                    writeln!(s, "alpha                   {}", num(alpha)).unwrap();
                    writeln!(s, "r_leader > {}   (transaction inclusion)", num(b.r_min_inclusion)).unwrap();
                    writeln!(s, "r_leader > {}   (modified transaction inclusion)", num(b.r_min_modified)).unwrap();
                    writeln!(s, "r_leader < {}   (longest chain extension)", num(b.r_max_extension)).unwrap();
                    match b.window {
                        Some((l, h)) => writeln!(s, "window                  ({}, {})", num(l), num(h)).unwrap(),
                        None => writeln!(s, "window                  empty").unwrap(),
                    }
                    writeln!(
                        s,
                        "r_leader {} admissible: {}",
                        DEFAULT_R_LEADER,
                        if b.admits(DEFAULT_R_LEADER) { "yes" } else { "no" }
                    )
                    .unwrap();
                    s.into_bytes()
                }
                Format::Json => json(&b)?,
                Format::Csv => csv_table(
                    &["alpha", "r_min_inclusion", "r_min_modified", "r_max_extension", "window_low", "window_high"],
                    &[vec![
                        num(alpha),
                        num(b.r_min_inclusion),
                        num(b.r_min_modified),
                        num(b.r_max_extension),
                        low.map_or_else(String::new, num),
                        high.map_or_else(String::new, num),
                    ]],
                )?,
            };
            Ok(Rendered::ok(body))
        }

        Command::Analytic { alpha, gamma, r_leader } => {
            let params = StrategyParams::new(alpha, gamma, r_leader)?;
            let report = analytics::analytic_report(&params);
            let body = match format {
                Format::Human => {
                    let p = &report.probs;
                    let mut s = String::new();
                    writeln!(s, "alpha {}  gamma {}  r_leader {}", num(alpha), num(gamma), num(r_leader)).unwrap();
                    for (name, value) in [
                        ("p_s", p.p_s),
                        ("p_a0", p.p_a0),
                        ("p_h0", p.p_h0),
                        ("p_h00", p.p_h00),
                        ("p_h10", p.p_h10),
                        ("p_a1", p.p_a1),
                        ("p_a2", p.p_a2),
                        ("p_a00", p.p_a00),
                        ("p_a10", p.p_a10),
                        ("p_a20", p.p_a20),
                    ] {
                        writeln!(s, "  {name:<6} {}", num(value)).unwrap();
                    }
                    writeln!(s, "revenue honest  {}", num(report.revenue_honest)).unwrap();
                    writeln!(s, "revenue greedy  {}", num(report.revenue_greedy)).unwrap();
                    match report.rer {
                        Some(r) => writeln!(s, "rer             {} ({}%)", num(r), num(100.0 * r)).unwrap(),
                        None => writeln!(s, "rer             {UNDEFINED_MARKER}").unwrap(),
                    }
                    s.into_bytes()
                }
                Format::Json => json(&AnalyticDoc {
                    alpha,
                    gamma,
                    r_leader,
                    probs: report.probs,
                    revenue_honest: report.revenue_honest,
                    revenue_greedy: report.revenue_greedy,
                    rer: report.rer.into(),
                })?,
                Format::Csv => experiments::to_csv(&[experiments::SweepRecord::closed(&params)])?,
            };
            Ok(Rendered::ok(body))
        }

        Command::Oracle { alpha, gamma, depth, r_leader } => {
            let params = StrategyParams::new(alpha, gamma, r_leader)?;
            let bounds = oracle::absorption_bounds(&params, depth)?;
            let closed = analytics::greedy_revenue(&params);
            let doc = OracleDoc {
                alpha,
                gamma,
                r_leader,
                depth,
                lower: bounds.lower,
                upper: bounds.upper,
                residual: bounds.residual,
                closed_form: closed,
                gap_lower_minus_closed: bounds.lower - closed,
            };
            let body = match format {
                Format::Human => {
                    let mut s = String::new();
                    writeln!(s, "alpha {}  gamma {}  depth {}", num(alpha), num(gamma), depth).unwrap();
                    writeln!(s, "greedy win probability in [{}, {}]", num(doc.lower), num(doc.upper)).unwrap();
                    writeln!(s, "residual        {:e}", doc.residual).unwrap();
                    writeln!(s, "closed form     {}", num(closed)).unwrap();
                    writeln!(s, "lower - closed  {:e}", doc.gap_lower_minus_closed).unwrap();
                    s.into_bytes()
                }
                Format::Json => json(&doc)?,
                Format::Csv => csv_table(
                    &["alpha", "gamma", "depth", "lower", "upper", "residual", "closed_form", "gap_lower_minus_closed"],
                    &[vec![
                        num(alpha),
                        num(gamma),
                        depth.to_string(),
                        num(doc.lower),
                        num(doc.upper),
                        format!("{:e}", doc.residual),
                        num(closed),
                        format!("{:e}", doc.gap_lower_minus_closed),
                    ]],
                )?,
            };
            Ok(Rendered::ok(body))
        }

        Command::Simulate {
            alpha,
            gamma,
            trials,
            seed,
            nondeterministic,
            giveup_depth,
            r_leader,
        } => {
            let params = StrategyParams::new(alpha, gamma, r_leader)?;
            let seed = seed.unwrap_or_else(rand::random);
            let config = SimConfig::new(params, trials, seed).with_giveup_depth(giveup_depth);
            let stats = simulation::estimate(&config)?;
            let honest = analytics::honest_revenue(&params);
            let doc = SimulateDoc {
                alpha,
                gamma,
                r_leader,
                trials,
                seed,
                nondeterministic,
                giveup_depth,
                greedy_wins: stats.greedy_wins,
                honest_wins: stats.honest_wins,
                truncated: stats.truncated,
                p_hat: stats.p_hat,
                ci95_half_width: stats.ci95_half_width,
                mean_steps: stats.mean_steps,
                rer_estimate: analytics::rer(stats.p_hat, honest).ok().into(),
            };
            let rer_text = analytics::rer(stats.p_hat, honest).ok();
            let body = match format {
                Format::Human => {
                    let mut s = String::new();
                    writeln!(s, "alpha {}  gamma {}  r_leader {}", num(alpha), num(gamma), num(r_leader)).unwrap();
                    writeln!(s, "trials {trials}  seed {seed}  giveup depth {giveup_depth}").unwrap();
                    writeln!(
                        s,
                        "greedy wins {}  honest wins {}  truncated {}",
                        stats.greedy_wins, stats.honest_wins, stats.truncated
                    )
                    .unwrap();
                    writeln!(s, "p_hat       {} +/- {}", num(stats.p_hat), num(stats.ci95_half_width)).unwrap();
                    writeln!(s, "mean steps  {}", num(stats.mean_steps)).unwrap();
                    writeln!(s, "rer         {}", opt_num(rer_text)).unwrap();
                    s.into_bytes()
                }
                Format::Json => json(&doc)?,
                Format::Csv => csv_table(
                    &[
                        "alpha",
                        "gamma",
                        "r_leader",
                        "trials",
                        "seed",
                        "giveup_depth",
                        "greedy_wins",
                        "honest_wins",
                        "truncated",
                        "p_hat",
                        "ci95_half_width",
                        "mean_steps",
                        "rer_estimate",
                    ],
                    &[vec![
                        num(alpha),
                        num(gamma),
                        num(r_leader),
                        trials.to_string(),
                        seed.to_string(),
                        giveup_depth.to_string(),
                        stats.greedy_wins.to_string(),
                        stats.honest_wins.to_string(),
                        stats.truncated.to_string(),
                        num(stats.p_hat),
                        num(stats.ci95_half_width),
                        num(stats.mean_steps),
                        opt_num(rer_text),
                    ]],
                )?,
            };
            Ok(Rendered::ok(body))
        }

        Command::Sweep {
            kind,
            ref alphas,
            ref gammas,
            mode,
            depth,
            trials,
            seed,
            giveup_depth,
            r_leader,
        } => {
            let alphas = if alphas.is_empty() {
                experiments::default_sweep_alphas()
            } else {
                alphas.clone()
            };
            let gammas = if gammas.is_empty() {
                experiments::DEFAULT_SWEEP_GAMMAS.to_vec()
            } else {
                gammas.clone()
            };
            let body = match kind {
                SweepKind::Revenue => {
                    let options = SweepOptions {
                        depth,
                        trials,
                        seed,
                        giveup_depth,
                        r_leader,
                    };
                    let rows = experiments::sweep_revenue(&alphas, &gammas, mode.into(), &options)?;
                    records(format, &rows, human_sweep)?
                }
                SweepKind::Heatmap => {
                    let map = experiments::rer_heatmap(&alphas, &gammas)?;
                    let cells = map.cells();
                    records(format, &cells, |_| human_heatmap(&map))?
                }
            };
            Ok(Rendered::ok(body))
        }

        Command::Threshold { ref gamma, tol } => {
            let curve = experiments::threshold_curve(gamma, tol)?;
            let body = records(format, &curve, |rows| {
                let mut s = String::new();
                writeln!(s, "{:>12}  {:>14}", "gamma", "alpha*").unwrap();
                for r in rows {
                    writeln!(s, "{:>12}  {:>14}", num(r.gamma), num(r.alpha_star)).unwrap();
                }
                writeln!(s, "tol {:e}", tol).unwrap();
                s
            })?;
            Ok(Rendered::ok(body))
        }

        Command::Table1 => {
            let cells = experiments::table1_comparison();
            let all_pass = cells.iter().all(|c| c.pass);
            let body = match format {
                Format::Human => human_table1(&cells).into_bytes(),
                Format::Json => json(&Table1Doc {
                    tolerance_percent: experiments::TABLE1_TOLERANCE_PERCENT,
                    all_pass,
                    cells: &cells,
                })?,
                Format::Csv => csv_table(
                    &["gamma", "alpha", "published_percent", "computed_percent", "deviation", "pass"],
                    &cells
                        .iter()
                        .map(|c| {
                            vec![
                                num(c.gamma),
                                num(c.alpha),
                                format!("{:.4}", c.published_percent),
                                num(c.computed_percent),
                                format!("{:e}", c.deviation),
                                c.pass.to_string(),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?,
            };
            Ok(Rendered { body, passed: all_pass })
        }
    }
}

fn human_sweep(rows: &[experiments::SweepRecord]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:>6} {:>6} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}",
        "gamma", "alpha", "honest", "greedy", "oracle_lo", "oracle_hi", "mc", "rer%"
    )
    .unwrap();
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.8}"));
    for r in rows {
        writeln!(
            s,
            "{:>6.3} {:>6.3} {:>13.8} {:>13.8} {:>13} {:>13} {:>13} {:>13}",
            r.gamma,
            r.alpha,
            r.revenue_honest,
            r.revenue_greedy_closed,
            cell(r.revenue_greedy_oracle_lower),
            cell(r.revenue_greedy_oracle_upper),
            cell(r.revenue_greedy_mc),
            r.rer_closed
                .map_or_else(|| UNDEFINED_MARKER.to_string(), |v| format!("{:.4}", 100.0 * v)),
        )
        .unwrap();
    }
    s
}

fn human_heatmap(map: &experiments::RerHeatmap) -> String {
    let mut s = String::new();
    write!(s, "{:>8}", "alpha").unwrap();
    for g in &map.gammas {
        write!(s, " {:>11}", format!("g={g}")).unwrap();
    }
    s.push('\n');
    for (i, a) in map.alphas.iter().enumerate() {
        write!(s, "{a:>8.4}").unwrap();
        for v in &map.rer[i] {
            match v {
                Some(v) => write!(s, " {:>10.4}%", 100.0 * v).unwrap(),
                None => write!(s, " {UNDEFINED_MARKER:>11}").unwrap(),
            }
        }
        s.push('\n');
    }
    s
}

fn human_table1(cells: &[Table1Cell]) -> String {
    let mut s = String::new();
    write!(s, "{:>8}", "").unwrap();
    for a in experiments::TABLE1_ALPHAS {
        write!(s, " {:>20}", format!("alpha={a}")).unwrap();
    }
    s.push('\n');
    for g in experiments::TABLE1_GAMMAS {
        write!(s, "{:>8}", format!("g={g}")).unwrap();
        for c in cells.iter().filter(|c| c.gamma == g) {
            let mark = if c.pass { "ok" } else { "MISMATCH" };
            write!(s, " {:>11.4} {:>8}", c.computed_percent, mark).unwrap();
        }
        s.push('\n');
    }
    let failures: Vec<_> = cells.iter().filter(|c| !c.pass).collect();
    writeln!(
        s,
        "{} of {} cells within {:e} (percent)",
        cells.len() - failures.len(),
        cells.len(),
        experiments::TABLE1_TOLERANCE_PERCENT
    )
    .unwrap();
    for c in failures {
        writeln!(
            s,
            "  gamma={} alpha={}: published {:.4}, computed {:.6}, deviation {:.2e}",
            c.gamma, c.alpha, c.published_percent, c.computed_percent, c.deviation
        )
        .unwrap();
    }
    s
}
