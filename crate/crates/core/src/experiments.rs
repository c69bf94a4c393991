//! Parameter sweeps, golden-table reproduction and flat-file export.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, AnalyticsError};
use crate::model::{ModelError, StrategyParams};
use crate::oracle::{self, OracleError};
use crate::simulation::{self, SimConfig, SimError};

/// Propagation factors of the published relative-extra-reward table (rows).
pub const TABLE1_GAMMAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
/// Mining-power shares of the published table (columns).
pub const TABLE1_ALPHAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
/// Published relative extra reward, in percent.
pub const TABLE1_PERCENT: [[f64; 5]; 6] = [
    [-69.4187, -39.4667, -12.9279, 7.7053, 20.8333],
    [-63.1523, -30.0900, -2.9542, 16.4968, 27.5000],
    [-56.8859, -20.6933, 7.0195, 25.2884, 34.1667],
    [-50.6196, -11.3067, 16.9932, 34.0800, 40.8333],
    [-44.3532, -1.9200, 26.9668, 42.8716, 47.5000],
    [-38.0868, 7.4667, 36.9405, 51.6632, 54.1667],
];
/// Absolute tolerance on percentage values printed to four decimals.
pub const TABLE1_TOLERANCE_PERCENT: f64 = 5e-5;

pub const DEFAULT_SWEEP_GAMMAS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];
/// Significant digits written to CSV.
pub const CSV_SIGNIFICANT_DIGITS: usize = 10;
pub const UNDEFINED_MARKER: &str = "undefined";

/// `0.01, 0.02, .., 0.50`.
pub fn default_sweep_alphas() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("{name} grid value {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("table reproduction failed: {}", describe_cells(.0))]
    Table1Mismatch(Vec<Table1Cell>),
    #[error("column {column} holds a non-finite value")]
    NonFinite { column: &'static str },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn describe_cells(cells: &[Table1Cell]) -> String {
    cells
        .iter()
        .map(|c| {
            format!(
                "(gamma={}, alpha={}) published {:.4}% computed {:.6}%",
                c.gamma, c.alpha, c.published_percent, c.computed_percent
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Optional `f64` whose absence means "not a number at all" (an undefined
/// relative reward), serialized as the `"undefined"` marker.
mod undefined_marker {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::UNDEFINED_MARKER;

    pub fn serialize<S: Serializer>(value: &Option<f64>, serializer: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => serializer.serialize_f64(*v),
            None => serializer.serialize_str(UNDEFINED_MARKER),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Marker(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(Some(v)),
            Raw::Marker(s) if s == UNDEFINED_MARKER => Ok(None),
            Raw::Marker(s) => Err(serde::de::Error::custom(format!("unexpected marker {s:?}"))),
        }
    }
}

/// One `(alpha, gamma)` point of a revenue sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub gamma: f64,
    pub revenue_honest: f64,
    pub revenue_greedy_closed: f64,
    pub revenue_greedy_oracle_lower: Option<f64>,
    pub revenue_greedy_oracle_upper: Option<f64>,
    pub revenue_greedy_mc: Option<f64>,
    #[serde(with = "undefined_marker")]
    pub rer_closed: Option<f64>,
    pub mc_ci: Option<f64>,
}

impl SweepRecord {
    pub fn closed(params: &StrategyParams) -> Self {
        let report = analytics::analytic_report(params);
        SweepRecord {
            alpha: params.alpha(),
            gamma: params.gamma(),
            revenue_honest: report.revenue_honest,
            revenue_greedy_closed: report.revenue_greedy,
            revenue_greedy_oracle_lower: None,
            revenue_greedy_oracle_upper: None,
            revenue_greedy_mc: None,
            rer_closed: report.rer,
            mc_ci: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub gamma: f64,
    pub alpha_star: f64,
    pub tol: f64,
}

/// One heatmap cell in long form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(with = "undefined_marker")]
    pub rer: Option<f64>,
}

/// Table cell compared against its published value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Cell {
    pub gamma: f64,
    pub alpha: f64,
    pub published_percent: f64,
    pub computed_percent: f64,
    pub deviation: f64,
    pub pass: bool,
}

/// Evaluates every published cell and records its deviation.
pub fn table1_comparison() -> Vec<Table1Cell> {
    let mut cells = Vec::with_capacity(30);
    for (row, &gamma) in TABLE1_GAMMAS.iter().enumerate() {
        for (col, &alpha) in TABLE1_ALPHAS.iter().enumerate() {
            let params = StrategyParams::with_default_split(alpha, gamma).expect("table grid is valid");
            let record = SweepRecord::closed(&params);
            let computed_percent = 100.0 * record.rer_closed.expect("table alphas are positive");
            let published_percent = TABLE1_PERCENT[row][col];
            let deviation = (computed_percent - published_percent).abs();
            cells.push(Table1Cell {
                gamma,
                alpha,
                published_percent,
                computed_percent,
                deviation,
                pass: deviation <= TABLE1_TOLERANCE_PERCENT,
            });
        }
    }
    cells
}

/// The 6x5 table as closed-form sweep records, rows ordered by `(gamma, alpha)`.
///
/// Fails with every cell that misses its published value by more than
/// [`TABLE1_TOLERANCE_PERCENT`].
pub fn reproduce_table1() -> Result<Vec<SweepRecord>, ExperimentError> {
    let failures: Vec<Table1Cell> = table1_comparison().into_iter().filter(|c| !c.pass).collect();
    if !failures.is_empty() {
        return Err(ExperimentError::Table1Mismatch(failures));
    }
    sweep_revenue(&TABLE1_ALPHAS, &TABLE1_GAMMAS, SweepMode::Closed, &SweepOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Closed,
    Oracle,
    Mc,
    All,
}

impl SweepMode {
    fn oracle(self) -> bool {
        matches!(self, SweepMode::Oracle | SweepMode::All)
    }

    fn mc(self) -> bool {
        matches!(self, SweepMode::Mc | SweepMode::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub depth: u32,
    pub trials: u64,
    /// Every cell reuses this seed.
    pub seed: u64,
    pub giveup_depth: u32,
    pub r_leader: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            depth: oracle::DEFAULT_DEPTH,
            trials: simulation::DEFAULT_TRIALS,
            seed: 0,
            giveup_depth: simulation::DEFAULT_GIVEUP_DEPTH,
            r_leader: crate::model::DEFAULT_R_LEADER,
        }
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid(name));
    }
    match grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&value) => Err(ExperimentError::OutOfRange { name, value }),
        None => Ok(()),
    }
}

fn sorted(grid: &[f64]) -> Vec<f64> {
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid
}

/// Revenue of the greedy pool over a grid; rows ordered by `(gamma, alpha)`.
pub fn sweep_revenue(
    alpha_grid: &[f64],
    gamma_list: &[f64],
    mode: SweepMode,
    options: &SweepOptions,
) -> Result<Vec<SweepRecord>, ExperimentError> {
    check_grid("alpha", alpha_grid)?;
    check_grid("gamma", gamma_list)?;
    let alphas = sorted(alpha_grid);
    let points: Vec<(f64, f64)> = sorted(gamma_list)
        .into_iter()
        .flat_map(|g| alphas.iter().map(move |&a| (a, g)))
        .collect();

    points
        .into_par_iter()
        .map(|(alpha, gamma)| {
            let params = StrategyParams::new(alpha, gamma, options.r_leader)?;
            let mut record = SweepRecord::closed(&params);
            if mode.oracle() {
                let bounds = oracle::absorption_bounds(&params, options.depth)?;
                record.revenue_greedy_oracle_lower = Some(bounds.lower);
                record.revenue_greedy_oracle_upper = Some(bounds.upper);
            }
            if mode.mc() {
                let config = SimConfig::new(params, options.trials, options.seed)
                    .with_giveup_depth(options.giveup_depth);
                let stats = simulation::estimate(&config)?;
                record.revenue_greedy_mc = Some(stats.p_hat);
                record.mc_ci = Some(stats.ci95_half_width);
            }
            Ok(record)
        })
        .collect()
}

pub fn threshold_curve(gamma_grid: &[f64], tol: f64) -> Result<Vec<ThresholdRecord>, ExperimentError> {
    check_grid("gamma", gamma_grid)?;
    gamma_grid
        .iter()
        .map(|&gamma| {
            Ok(ThresholdRecord {
                gamma,
                alpha_star: analytics::threshold_alpha(gamma, tol)?,
                tol,
            })
        })
        .collect()
}

/// Closed-form relative extra reward, `rer[i][j]` at `(alphas[i], gammas[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RerHeatmap {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `None` where the honest baseline is zero (alpha = 0).
    pub rer: Vec<Vec<Option<f64>>>,
}

impl RerHeatmap {
    /// Long-form cells ordered by `(gamma, alpha)`.
    pub fn cells(&self) -> Vec<HeatmapCell> {
        let mut cells = Vec::with_capacity(self.alphas.len() * self.gammas.len());
        for (j, &gamma) in self.gammas.iter().enumerate() {
            for (i, &alpha) in self.alphas.iter().enumerate() {
                cells.push(HeatmapCell {
                    alpha,
                    gamma,
                    rer: self.rer[i][j],
                });
            }
        }
        cells
    }
}

pub fn rer_heatmap(alpha_grid: &[f64], gamma_grid: &[f64]) -> Result<RerHeatmap, ExperimentError> {
    check_grid("alpha", alpha_grid)?;
    check_grid("gamma", gamma_grid)?;
    let rer = alpha_grid
        .iter()
        .map(|&alpha| {
            gamma_grid
                .iter()
                .map(|&gamma| {
                    let params = StrategyParams::with_default_split(alpha, gamma)?;
                    Ok(analytics::analytic_report(&params).rer)
                })
                .collect::<Result<Vec<_>, ExperimentError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RerHeatmap {
        alphas: alpha_grid.to_vec(),
        gammas: gamma_grid.to_vec(),
        rer,
    })
}

/// Value of one flat-file column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    Number(f64),
    /// Column not computed in this run; an empty CSV cell.
    Absent,
    /// Quantity mathematically undefined; the `undefined` marker.
    Undefined,
}

impl Field {
    fn optional(value: Option<f64>) -> Self {
        value.map_or(Field::Absent, Field::Number)
    }

    fn defined(value: Option<f64>) -> Self {
        value.map_or(Field::Undefined, Field::Number)
    }
}

/// A record with a fixed list of scalar columns.
pub trait FlatRecord: Sized + Serialize + DeserializeOwned {
    const COLUMNS: &'static [&'static str];

    fn fields(&self) -> Vec<Field>;

    fn from_fields(fields: &[Field]) -> Result<Self, String>;
}

fn number(fields: &[Field], i: usize) -> Result<f64, String> {
    match fields.get(i) {
        Some(Field::Number(v)) => Ok(*v),
        other => Err(format!("column {i}: expected a number, found {other:?}")),
    }
}

fn maybe(fields: &[Field], i: usize) -> Result<Option<f64>, String> {
    match fields.get(i) {
        Some(Field::Number(v)) => Ok(Some(*v)),
        Some(Field::Absent) | Some(Field::Undefined) => Ok(None),
        None => Err(format!("column {i} missing")),
    }
}

impl FlatRecord for SweepRecord {
    const COLUMNS: &'static [&'static str] = &[
        "alpha",
        "gamma",
        "revenue_honest",
        "revenue_greedy_closed",
        "revenue_greedy_oracle_lower",
        "revenue_greedy_oracle_upper",
        "revenue_greedy_mc",
        "rer_closed",
        "mc_ci",
    ];

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Number(self.alpha),
            Field::Number(self.gamma),
            Field::Number(self.revenue_honest),
            Field::Number(self.revenue_greedy_closed),
            Field::optional(self.revenue_greedy_oracle_lower),
            Field::optional(self.revenue_greedy_oracle_upper),
            Field::optional(self.revenue_greedy_mc),
            Field::defined(self.rer_closed),
            Field::optional(self.mc_ci),
        ]
    }

    fn from_fields(fields: &[Field]) -> Result<Self, String> {
        Ok(SweepRecord {
            alpha: number(fields, 0)?,
            gamma: number(fields, 1)?,
            revenue_honest: number(fields, 2)?,
            revenue_greedy_closed: number(fields, 3)?,
            revenue_greedy_oracle_lower: maybe(fields, 4)?,
            revenue_greedy_oracle_upper: maybe(fields, 5)?,
            revenue_greedy_mc: maybe(fields, 6)?,
            rer_closed: maybe(fields, 7)?,
            mc_ci: maybe(fields, 8)?,
        })
    }
}

impl FlatRecord for ThresholdRecord {
    const COLUMNS: &'static [&'static str] = &["gamma", "alpha_star", "tol"];

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Number(self.gamma),
            Field::Number(self.alpha_star),
            Field::Number(self.tol),
        ]
    }

    fn from_fields(fields: &[Field]) -> Result<Self, String> {
        Ok(ThresholdRecord {
            gamma: number(fields, 0)?,
            alpha_star: number(fields, 1)?,
            tol: number(fields, 2)?,
        })
    }
}

impl FlatRecord for HeatmapCell {
    const COLUMNS: &'static [&'static str] = &["alpha", "gamma", "rer"];

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Number(self.alpha),
            Field::Number(self.gamma),
            Field::defined(self.rer),
        ]
    }

    fn from_fields(fields: &[Field]) -> Result<Self, String> {
        Ok(HeatmapCell {
            alpha: number(fields, 0)?,
            gamma: number(fields, 1)?,
            rer: maybe(fields, 2)?,
        })
    }
}

/// Fixed-point rendering with `digits` significant digits.
pub fn format_significant(value: f64, digits: usize) -> String {
    let digits = digits.max(1);
    // The exponent of the correctly rounded mantissa accounts for carries
    // such as 9.99.. -> 10.0.
    let scientific = format!("{:.*e}", digits - 1, value);
    let exponent: i64 = scientific
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    format!("{value:.decimals$}")
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Number(v) => f.write_str(&format_significant(*v, CSV_SIGNIFICANT_DIGITS)),
            Field::Absent => Ok(()),
            Field::Undefined => f.write_str(UNDEFINED_MARKER),
        }
    }
}

fn parse_field(text: &str) -> Result<Field, String> {
    match text {
        "" => Ok(Field::Absent),
        UNDEFINED_MARKER => Ok(Field::Undefined),
        other => other
            .parse::<f64>()
            .map(Field::Number)
            .map_err(|e| format!("{other:?}: {e}")),
    }
}

/// CSV text with a header row and `\n` line endings.
pub fn to_csv<R: FlatRecord>(records: &[R]) -> Result<Vec<u8>, ExperimentError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(R::COLUMNS)?;
    for record in records {
        let fields = record.fields();
        for (column, field) in R::COLUMNS.iter().zip(&fields) {
            if let Field::Number(v) = field {
                if !v.is_finite() {
                    return Err(ExperimentError::NonFinite { column });
                }
            }
        }
        writer.write_record(fields.iter().map(Field::to_string))?;
    }
    writer
        .into_inner()
        .map_err(|e| ExperimentError::Csv(csv::Error::from(e.into_error())))
}

pub fn from_csv<R: FlatRecord>(data: &[u8]) -> Result<Vec<R>, ExperimentError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let header = reader.headers()?.clone();
    if header.iter().ne(R::COLUMNS.iter().copied()) {
        return Err(ExperimentError::Parse {
            row: 0,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            let fields = row
                .iter()
                .map(parse_field)
                .collect::<Result<Vec<_>, _>>()
                .and_then(|fields| R::from_fields(&fields))
                .map_err(|message| ExperimentError::Parse { row: i + 1, message })?;
            Ok(fields)
        })
        .collect()
}

/// JSON array of flat objects.
pub fn to_json<R: FlatRecord>(records: &[R]) -> Result<Vec<u8>, ExperimentError> {
    let mut data = serde_json::to_vec_pretty(records)?;
    data.push(b'\n');
    Ok(data)
}

pub fn from_json<R: FlatRecord>(data: &[u8]) -> Result<Vec<R>, ExperimentError> {
    Ok(serde_json::from_slice(data)?)
}

fn write_file(destination: &Path, data: &[u8]) -> Result<u64, ExperimentError> {
    fs::write(destination, data).map_err(|source| ExperimentError::Io {
        path: destination.to_path_buf(),
        source,
    })?;
    Ok(data.len() as u64)
}

/// Writes `records` as CSV and returns the number of bytes written.
pub fn write_csv<R: FlatRecord>(records: &[R], destination: &Path) -> Result<u64, ExperimentError> {
    write_file(destination, &to_csv(records)?)
}

/// Writes `records` as JSON and returns the number of bytes written.
pub fn write_json<R: FlatRecord>(records: &[R], destination: &Path) -> Result<u64, ExperimentError> {
    write_file(destination, &to_json(records)?)
}
