//! Sweep reports: rows, fits, bounds, verdicts, and their JSON/CSV forms.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PhiSpec};
use super::dump::write_grid_dump;
use super::fit::{fit_power_law, PowerLawFit};
use super::ldos::LdosRow;
use super::tolerances::Tolerances;
use crate::error::{Error, Result};
use crate::model::ValidationReport;
use crate::predictor::{LandauBandSet, WeylPrediction};
use crate::spectral::{PairLocalization, TraceMethod};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylRow {
    pub interval: (f64, f64),
    pub measured: usize,
    pub predicted: f64,
    /// `measured / predicted`; absent when the prediction is zero.
    pub ratio: Option<f64>,
    /// `measured / p^n`.
    pub per_pn: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phi: PhiSpec,
    pub measured: f64,
    /// `p^n <f_0, φ>`.
    pub predicted: f64,
    pub relative_error: f64,
    pub method: TraceMethod,
    /// Eigenvalues in `supp φ`.
    pub count: usize,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub window: (f64, f64),
    /// Eigenvalues in the window.
    pub count: usize,
    /// Eigenvalues in the window but outside every band.
    pub outside: Vec<f64>,
    /// Largest distance from a window eigenvalue to the bands.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub interval: (f64, f64),
    pub count: usize,
    pub max_residual: f64,
    pub min_c_hat: Option<f64>,
    pub min_rate: Option<f64>,
    pub pairs: Vec<PairLocalization>,
    /// Count in the interval on the enlarged domain.
    pub enlarged_count: Option<usize>,
    pub enlarged_lengths: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub check: String,
    pub message: String,
    pub exit_code: i32,
}

impl RowFailure {
    pub fn new(check: &str, err: &Error) -> RowFailure {
        RowFailure {
            check: check.to_string(),
            message: err.to_string(),
            exit_code: err.exit_code(),
        }
    }
}

/// Everything measured at one tensor power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: u32,
    /// The `p` in the config, before flux quantization adjusted it.
    pub requested_p: u32,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
    /// Matrix dimension; 0 when assembly failed.
    pub dimension: usize,
    /// Hash of the cached predictions this row was compared against.
    pub prediction_hash: String,
    pub weyl: Vec<WeylRow>,
    pub trace: Vec<TraceRow>,
    pub cluster: Option<ClusterRow>,
    pub localization: Option<LocalizationRow>,
    pub ldos: Option<LdosRow>,
    pub failures: Vec<RowFailure>,
}

impl SweepRow {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// p-independent quantities, computed once per sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub input_hash: String,
    pub prediction_cells: usize,
    pub sup_b: f64,
    /// Total flux on a torus.
    pub flux: Option<f64>,
    /// Weyl predictions at `p = 1`; multiply by `p^n`.
    pub weyl: Vec<WeylPrediction>,
    /// `<f_0, φ>` per test function.
    pub f0_pairings: Vec<(PhiSpec, f64)>,
    pub bands: Option<LandauBandSet>,
    /// Half extent of the core set per axis, about the domain centre.
    pub core_half_widths: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the resolved config JSON.
    pub config_hash: String,
    pub package: String,
    pub version: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    pub ps: Vec<u32>,
    pub values: Vec<f64>,
    /// Some zero values were replaced by the resolution floor.
    pub floor_substituted: bool,
    pub fit: Option<PowerLawFit>,
    pub error: Option<String>,
}

/// `N / p^n` across a sweep for one counted interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpnBound {
    pub source: String,
    pub values: Vec<(u32, f64)>,
    pub max: f64,
    pub min: f64,
    /// `max / min`; absent when some count is zero.
    pub variation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A density written next to the report when dumps are enabled.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityDump {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Wall-clock facts about one run; everything else in a report is
/// reproducible from the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub unix_seconds: u64,
    /// Seconds spent on each row, by `p`.
    pub row_seconds: Vec<(u32, f64)>,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub validation: ValidationReport,
    pub warnings: Vec<String>,
    pub predictions: Predictions,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<FitRecord>,
    pub bounds: Vec<CpnBound>,
    pub verdicts: Vec<Verdict>,
    /// Some row recorded a failure.
    pub incomplete: bool,
    /// The only field that differs between identical runs.
    pub run: Option<RunInfo>,
    #[serde(skip)]
    pub dumps: Vec<DensityDump>,
}

pub(crate) fn label((a, b): (f64, f64)) -> String {
    format!("[{a}, {b}]")
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn fit(&self, quantity: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Exit code of the first recorded failure, or 0.
    pub fn exit_code(&self) -> i32 {
        self.rows
            .iter()
            .flat_map(|r| &r.failures)
            .map(|f| f.exit_code)
            .next()
            .unwrap_or(0)
    }

    /// Writes `report.json`, the CSV tables and any density dumps into `dir`.
    pub fn write(&self, dir: &Path, csv: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        written.push(json);
        if csv {
            let rows = dir.join("rows.csv");
            write_csv(&rows, &self.csv_rows())?;
            written.push(rows);
            let fits = dir.join("fits.csv");
            write_csv(&fits, &self.csv_fits())?;
            written.push(fits);
        }
        for dump in &self.dumps {
            let path = dir.join(&dump.name);
            write_grid_dump(&path, dump.shape, &dump.values)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Long-format measurement table: one line per (p, quantity).
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut out = Vec::new();
        for row in &self.rows {
            let p = row.p;
            for w in &row.weyl {
                out.push(CsvRow::new(
                    p,
                    "weyl",
                    label(w.interval),
                    w.measured as f64,
                    Some(w.predicted),
                    w.ratio.map(|r| r - 1.0),
                ));
            }
            for t in &row.trace {
                out.push(CsvRow::new(
                    p,
                    "trace",
                    label((t.phi.alpha, t.phi.beta)),
                    t.measured,
                    Some(t.predicted),
                    Some(t.relative_error),
                ));
            }
            if let Some(c) = &row.cluster {
                out.push(CsvRow::new(p, "cluster", label(c.window), c.distance, None, None));
            }
            if let Some(l) = &row.localization {
                out.push(CsvRow::new(
                    p,
                    "localization_rate",
                    label(l.interval),
                    l.min_rate.unwrap_or(f64::NAN),
                    None,
                    None,
                ));
                out.push(CsvRow::new(
                    p,
                    "localization_count",
                    label(l.interval),
                    l.count as f64,
                    l.enlarged_count.map(|c| c as f64),
                    None,
                ));
            }
            if let Some(l) = &row.ldos {
                let a = &l.average;
                out.push(CsvRow::new(
                    p,
                    "ldos_average",
                    label((l.phi.alpha, l.phi.beta)),
                    a.measured,
                    Some(a.predicted),
                    Some(a.deviation),
                ));
                for node in &l.nodes {
                    let name = format!("{:?}", node.node);
                    out.push(CsvRow::new(
                        p,
                        "ldos_node",
                        name,
                        node.measured,
                        Some(node.predicted),
                        Some(node.deviation),
                    ));
                }
            }
        }
        out
    }

    pub fn csv_fits(&self) -> Vec<CsvFit> {
        self.fits
            .iter()
            .map(|f| CsvFit {
                quantity: f.quantity.clone(),
                exponent: f.fit.as_ref().map(|x| x.exponent),
                ci_low: f.fit.as_ref().map(|x| x.exponent_ci95.0),
                ci_high: f.fit.as_ref().map(|x| x.exponent_ci95.1),
                r_squared: f.fit.as_ref().map(|x| x.r_squared),
                floor_substituted: f.floor_substituted,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub p: u32,
    pub check: String,
    pub label: String,
    pub measured: f64,
    pub predicted: Option<f64>,
    pub deviation: Option<f64>,
}

impl CsvRow {
    fn new(
        p: u32,
        check: &str,
        label: String,
        measured: f64,
        predicted: Option<f64>,
        deviation: Option<f64>,
    ) -> CsvRow {
        CsvRow {
            p,
            check: check.to_string(),
            label,
            measured,
            predicted,
            deviation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvFit {
    pub quantity: String,
    pub exponent: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub r_squared: Option<f64>,
    pub floor_substituted: bool,
}

fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in records {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fits `values` against `ps`, substituting `floor` for zeros.
pub fn fit_series(quantity: String, ps: Vec<u32>, values: Vec<f64>, floor: f64) -> FitRecord {
    let floor_substituted = values.contains(&0.0);
    let ys: Vec<f64> = values.iter().map(|&v| if v == 0.0 { floor } else { v }).collect();
    let xs: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
    let (fit, error) = match fit_power_law(&xs, &ys) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    FitRecord {
        quantity,
        ps,
        values,
        floor_substituted,
        fit,
        error,
    }
}

pub fn weyl_quantity(interval: (f64, f64)) -> String {
    format!("weyl_deviation {}", label(interval))
}

pub fn trace_quantity(phi: &PhiSpec) -> String {
    format!("trace_relative_error {}", label((phi.alpha, phi.beta)))
}

pub fn cluster_quantity(window: (f64, f64)) -> String {
    format!("cluster_distance {}", label(window))
}

pub const LDOS_QUANTITY: &str = "ldos_deviation";

/// Power-law fits of every per-p deviation series.
pub fn compute_fits(config: &ExperimentConfig, rows: &[SweepRow]) -> Vec<FitRecord> {
    let floor = config.tolerances.resolution_floor;
    let mut fits = Vec::new();
    let mut series = |quantity: String, pick: &dyn Fn(&SweepRow) -> Option<f64>| {
        let (ps, values): (Vec<u32>, Vec<f64>) = rows.iter().filter_map(|r| pick(r).map(|v| (r.p, v))).unzip();
        fits.push(fit_series(quantity, ps, values, floor));
    };
    for &iv in &config.intervals {
        if !config.has(super::Check::Weyl) {
            break;
        }
        series(weyl_quantity(iv), &|r| {
            r.weyl
                .iter()
                .find(|w| w.interval == iv)
                .and_then(|w| w.ratio)
                .map(|x| (x - 1.0).abs())
        });
    }
    if config.has(super::Check::Trace) {
        for phi in &config.phi {
            series(trace_quantity(phi), &|r| {
                r.trace.iter().find(|t| t.phi == *phi).map(|t| t.relative_error)
            });
        }
    }
    if config.has(super::Check::Cluster) {
        series(cluster_quantity(config.cluster.window), &|r| {
            r.cluster.as_ref().map(|c| c.distance)
        });
    }
    if config.has(super::Check::Ldos) {
        series(LDOS_QUANTITY.to_string(), &|r| {
            r.ldos.as_ref().map(|l| l.tracked_deviation())
        });
    }
    fits
}

/// `N / p^n` for every counted interval.
pub fn compute_bounds(config: &ExperimentConfig, rows: &[SweepRow], n: i32) -> Vec<CpnBound> {
    let mut out = Vec::new();
    let mut bound = |source: String, pick: &dyn Fn(&SweepRow) -> Option<usize>| {
        let values: Vec<(u32, f64)> = rows
            .iter()
            .filter_map(|r| pick(r).map(|c| (r.p, c as f64 / (r.p as f64).powi(n))))
            .collect();
        if values.is_empty() {
            return;
        }
        let max = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let variation = (min > 0.0).then(|| max / min);
        out.push(CpnBound {
            source,
            values,
            max,
            min,
            variation,
        });
    };
    for &iv in &config.intervals {
        bound(format!("weyl {}", label(iv)), &|r| {
            r.weyl.iter().find(|w| w.interval == iv).map(|w| w.measured)
        });
    }
    for phi in &config.phi {
        bound(format!("trace {}", label((phi.alpha, phi.beta))), &|r| {
            r.trace.iter().find(|t| t.phi == *phi).map(|t| t.count)
        });
    }
    if config.has(super::Check::Cluster) {
        bound(format!("cluster {}", label(config.cluster.window)), &|r| {
            r.cluster.as_ref().map(|c| c.count)
        });
    }
    if let Some(loc) = &config.localization {
        bound(format!("localization {}", label(loc.interval)), &|r| {
            r.localization.as_ref().map(|l| l.count)
        });
    }
    out
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

fn decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn exponent_verdict(name: String, record: Option<&FitRecord>, max_exponent: f64, min_r2: Option<f64>) -> Verdict {
    let Some(rec) = record else {
        return Verdict {
            name,
            passed: false,
            detail: "no series".into(),
        };
    };
    let dec = decreasing(&rec.values);
    match &rec.fit {
        Some(f) => {
            let r2_ok = min_r2.is_none_or(|m| f.r_squared >= m);
            Verdict {
                name,
                passed: dec && f.exponent <= max_exponent && r2_ok && !rec.floor_substituted,
                detail: format!(
                    "values {:?}, decreasing {dec}, exponent {:.4} (95% CI [{:.4}, {:.4}], need <= {max_exponent}), R² {:.4}{}{}",
                    rec.values,
                    f.exponent,
                    f.exponent_ci95.0,
                    f.exponent_ci95.1,
                    f.r_squared,
                    min_r2.map(|m| format!(" (need >= {m})")).unwrap_or_default(),
                    if rec.floor_substituted { ", floor substituted" } else { "" },
                ),
            }
        }
        None => Verdict {
            name,
            passed: false,
            detail: format!("values {:?}: {}", rec.values, rec.error.clone().unwrap_or_default()),
        },
    }
}

/// Judges a finished sweep against `tol`.
pub fn compute_verdicts(
    config: &ExperimentConfig,
    rows: &[SweepRow],
    fits: &[FitRecord],
    bounds: &[CpnBound],
    tol: &Tolerances,
) -> Vec<Verdict> {
    let find = |q: &str| fits.iter().find(|f| f.quantity == q);
    let mut out = Vec::new();
    let failed: Vec<u32> = rows.iter().filter(|r| !r.is_complete()).map(|r| r.p).collect();
    out.push(Verdict {
        name: "complete".into(),
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} rows", rows.len())
        } else {
            format!("rows with failures at p = {failed:?}")
        },
    });
    if config.has(super::Check::Weyl) {
        for &iv in &config.intervals {
            let series: Vec<(u32, &WeylRow)> = rows
                .iter()
                .filter_map(|r| r.weyl.iter().find(|w| w.interval == iv).map(|w| (r.p, w)))
                .collect();
            let name = format!("weyl {}", label(iv));
            if series.iter().all(|(_, w)| w.predicted == 0.0) {
                let all_zero = series.iter().all(|(_, w)| w.measured == 0);
                out.push(Verdict {
                    name,
                    passed: all_zero && !series.is_empty(),
                    detail: format!(
                        "zero prediction; measured {:?}",
                        series.iter().map(|(_, w)| w.measured).collect::<Vec<_>>()
                    ),
                });
                continue;
            }
            let devs: Vec<f64> = series
                .iter()
                .map(|(_, w)| w.ratio.map_or(f64::INFINITY, |r| (r - 1.0).abs()))
                .collect();
            let tail: Vec<f64> = series
                .iter()
                .zip(&devs)
                .filter(|((p, _), _)| *p >= tol.weyl_monotone_from)
                .map(|(_, d)| *d)
                .collect();
            let last = devs.last().copied().unwrap_or(f64::INFINITY);
            let monotone = non_increasing(&tail);
            out.push(Verdict {
                name,
                passed: last <= tol.weyl_ratio && monotone,
                detail: format!(
                    "|ratio - 1| = {devs:?}; last {last:.4} (need <= {}), non-increasing from p = {}: {monotone}",
                    tol.weyl_ratio, tol.weyl_monotone_from
                ),
            });
        }
    }
    if config.has(super::Check::Trace) {
        for phi in &config.phi {
            let q = trace_quantity(phi);
            out.push(exponent_verdict(
                format!("trace {}", label((phi.alpha, phi.beta))),
                find(&q),
                tol.trace_exponent,
                None,
            ));
        }
    }
    if config.has(super::Check::Cluster) {
        let q = cluster_quantity(config.cluster.window);
        out.push(exponent_verdict(
            "cluster".into(),
            find(&q),
            tol.cluster_exponent,
            Some(tol.cluster_r_squared),
        ));
    }
    if let (true, Some(loc)) = (config.has(super::Check::Localization), &config.localization) {
        let locs: Vec<(u32, &LocalizationRow)> = rows
            .iter()
            .filter_map(|r| r.localization.as_ref().map(|l| (r.p, l)))
            .collect();
        let rates: Vec<Option<f64>> = locs.iter().map(|(_, l)| l.min_rate).collect();
        let ratio = match (rates.first(), rates.last()) {
            (Some(Some(a)), Some(Some(b))) if locs.len() >= 2 => Some(b / a),
            _ => None,
        };
        let (lo, hi) = tol.localization_ratio;
        let ratio_ok = ratio.is_some_and(|r| r >= lo && r <= hi);
        let changes: Vec<Option<usize>> = locs
            .iter()
            .map(|(_, l)| l.enlarged_count.map(|e| e.abs_diff(l.count)))
            .collect();
        let stable = loc.enlarged_margin_lengths.is_none()
            || changes
                .iter()
                .all(|c| c.is_some_and(|c| c <= tol.enlargement_count_change));
        let nonempty = locs.iter().all(|(_, l)| l.count > 0);
        out.push(Verdict {
            name: "localization".into(),
            passed: ratio_ok && stable && nonempty,
            detail: format!(
                "counts {:?}, rates {rates:?}, ratio {ratio:?} (need in [{lo}, {hi}]), enlargement changes {changes:?}",
                locs.iter().map(|(_, l)| l.count).collect::<Vec<_>>()
            ),
        });
    }
    if config.has(super::Check::Ldos) {
        let ldos: Vec<&LdosRow> = rows.iter().filter_map(|r| r.ldos.as_ref()).collect();
        let tracked: Vec<f64> = ldos.iter().map(|l| l.tracked_deviation()).collect();
        let last = ldos.last().map_or(f64::INFINITY, |l| l.average.deviation);
        let trend = non_increasing(&tracked);
        out.push(Verdict {
            name: "ldos".into(),
            passed: !ldos.is_empty() && last <= tol.ldos_deviation && trend,
            detail: format!(
                "tracked deviations {tracked:?} (non-increasing: {trend}), node-averaged deviation at largest p {last:.4} (need <= {})",
                tol.ldos_deviation
            ),
        });
    }
    for b in bounds {
        let passed = b.max.is_finite() && b.variation.map_or(b.max == 0.0, |v| v < tol.cpn_variation);
        out.push(Verdict {
            name: format!("cpn {}", b.source),
            passed,
            detail: format!(
                "max N/p^n = {:.6}, variation {:?} (need < {})",
                b.max, b.variation, tol.cpn_variation
            ),
        });
    }
    out
}
