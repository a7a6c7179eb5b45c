//! The p-sweep driver.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{Check, ExperimentConfig, ModelSource, PhiSpec};
use super::ldos::{ldos_row, LdosRow};
use super::report::{
    compute_bounds, compute_fits, compute_verdicts, label, ClusterRow, DensityDump, ExperimentReport, LocalizationRow,
    Predictions, Provenance, RowFailure, RunInfo, SweepRow, TraceRow, WeylRow,
};
use crate::discretize::assemble::sup_field;
use crate::discretize::gauge::{nearest_quantized_power, torus_flux};
use crate::discretize::{build_operator, Operator};
use crate::error::{Error, Result};
use crate::model::{sample_fields, validate_model, Domain, FieldSamples, Grid, ModelSpec, ValidationReport};
use crate::predictor::{k_set, sigma_bands, weyl::f0_pairing, weyl_count_prediction};
use crate::spectral::localization::localization_metrics_in;
use crate::spectral::{eigenpairs_with, trace_phi, Eigenpair, EigsOptions, Slicer, TraceMethod};

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn relative_gap(measured: f64, predicted: f64) -> f64 {
    let diff = (measured - predicted).abs();
    if predicted == 0.0 {
        diff
    } else {
        diff / predicted.abs()
    }
}

/// Parts of `window` not covered by `components` (sorted, disjoint).
pub(crate) fn gaps_in(window: (f64, f64), components: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut lo = window.0;
    for &(a, b) in components {
        if b < lo {
            continue;
        }
        if a >= window.1 {
            break;
        }
        if a > lo {
            out.push((lo, a));
        }
        lo = lo.max(b);
    }
    if lo < window.1 {
        out.push((lo, window.1));
    }
    out
}

/// A validated config with its p-independent quantities.
pub(crate) struct Sweep<'c> {
    pub config: &'c ExperimentConfig,
    pub resolved: ExperimentConfig,
    pub spec: ModelSpec,
    /// Half the real dimension.
    pub n: i32,
    /// `(requested, used)` tensor powers, ascending in the used value.
    pub powers: Vec<(u32, u32)>,
    pub warnings: Vec<String>,
    pub validation: ValidationReport,
    pub predictions: Predictions,
}

impl<'c> Sweep<'c> {
    pub fn prepare(config: &'c ExperimentConfig) -> Result<Sweep<'c>> {
        let model = config.model_config()?;
        let spec = ModelSpec::from_config(&model)?;
        spec.flat_density()?;
        let mut resolved = config.clone();
        resolved.model = ModelSource::Inline(model.clone());
        let d = spec.dim();
        let n = (d / 2) as i32;
        let pgrid = Grid::new(&spec.domain, &vec![config.prediction_cells; d])?;
        let validation = validate_model(&spec, &pgrid)?;
        let samples = sample_fields(&spec, &pgrid)?;
        let sup_b = sup_field(&spec, &pgrid)?;
        let mut warnings = Vec::new();

        if config.domain.is_some() && spec.domain.is_periodic() {
            return Err(Error::Config("domain rules apply to rectangles only".into()));
        }
        let flux = if spec.domain.is_periodic() {
            Some(torus_flux(&spec, &pgrid)?)
        } else {
            None
        };
        let mut powers: Vec<(u32, u32)> = Vec::new();
        for &p in &config.p {
            let used = match flux {
                Some(f) => nearest_quantized_power(p, f).ok_or(Error::FluxNotQuantized {
                    p,
                    flux: f,
                    nearest_p: None,
                })?,
                None => p,
            };
            if used != p {
                warnings.push(format!(
                    "p = {p} does not quantize the flux {}; using p = {used}",
                    flux.unwrap_or_default()
                ));
            }
            if powers.iter().any(|&(_, u)| u == used) {
                warnings.push(format!("p = {p} duplicates an adjusted power {used}; dropped"));
                continue;
            }
            powers.push((p, used));
        }
        powers.sort_by_key(|&(_, u)| u);

        let weyl: Vec<_> = config
            .intervals
            .iter()
            .map(|&iv| weyl_count_prediction(&samples, iv, 1.0))
            .collect();
        for w in &weyl {
            for warning in &w.warnings {
                warnings.push(format!("interval {}: {warning:?}", label(w.interval)));
            }
        }
        let f0_pairings: Vec<(PhiSpec, f64)> = config
            .phi
            .iter()
            .map(|phi| (*phi, f0_pairing(&samples, &phi.test_function())))
            .collect();
        let bands = if config.has(Check::Cluster) {
            Some(sigma_bands(
                &samples,
                &vec![true; samples.len()],
                config.cluster.window.1,
            )?)
        } else {
            None
        };
        let core_half_widths = match &config.domain {
            Some(rule) => {
                let iv = rule
                    .core_interval
                    .or(config.localization.as_ref().map(|l| l.interval))
                    .ok_or_else(|| Error::Config("domain rule without a core interval".into()))?;
                Some(core_half_widths(&spec.domain, &samples, iv)?)
            }
            None => None,
        };
        let hash_input = serde_json::json!({
            "model": model,
            "prediction_cells": config.prediction_cells,
            "intervals": config.intervals,
            "phi": config.phi,
            "cluster": config.has(Check::Cluster).then_some(config.cluster.window),
            "domain": config.domain,
            "localization": config.localization.as_ref().map(|l| l.interval),
        });
        let predictions = Predictions {
            input_hash: sha256_hex(hash_input.to_string().as_bytes()),
            prediction_cells: config.prediction_cells,
            sup_b,
            flux,
            weyl,
            f0_pairings,
            bands,
            core_half_widths,
        };
        Ok(Sweep {
            config,
            resolved,
            spec,
            n,
            powers,
            warnings,
            validation,
            predictions,
        })
    }

    fn eigs_options(&self, p: u32) -> EigsOptions {
        EigsOptions {
            seed: self
                .config
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(p as u64),
            ..self.config.eigs.clone()
        }
    }

    /// The domain at `p`: resized around the core when a rule is set.
    fn domain_at(&self, p: u32, margin: f64) -> Domain {
        match &self.predictions.core_half_widths {
            Some(core) => {
                let ell = 1.0 / (p as f64 * self.predictions.sup_b).sqrt();
                let lengths = core.iter().map(|c| 2.0 * (c + margin * ell)).collect();
                self.spec.domain.resized(lengths)
            }
            None => self.spec.domain.clone(),
        }
    }

    fn base_margin(&self) -> f64 {
        self.config.domain.as_ref().map_or(0.0, |r| r.margin_lengths)
    }

    fn operator_at(&self, p: u32, domain: Domain) -> Result<(ModelSpec, Grid, Operator)> {
        let spec = if domain == self.spec.domain {
            self.spec.clone()
        } else {
            self.spec.with_domain(domain)
        };
        let cells = self.config.grid.cells_for(&spec.domain, p, self.predictions.sup_b);
        let grid = Grid::new(&spec.domain, &cells)?;
        let op = build_operator(&spec, &grid, p)?;
        Ok((spec, grid, op))
    }

    fn cluster_row(&self, slicer: &Slicer, opts: &EigsOptions) -> Result<ClusterRow> {
        let bands = self.predictions.bands.as_ref().ok_or(Error::EmptyRegion)?;
        let window = self.config.cluster.window;
        let count = slicer.count_interval(window)?.count;
        let mut outside = Vec::new();
        for gap in gaps_in(window, &bands.components()) {
            let slice = eigenpairs_with(slicer, gap, opts)?;
            outside.extend(slice.values().into_iter().filter(|&l| bands.distance(l) > 0.0));
        }
        let distance = outside.iter().map(|&l| bands.distance(l)).fold(0.0, f64::max);
        Ok(ClusterRow {
            window,
            count,
            outside,
            distance,
        })
    }

    fn localization_row(
        &self,
        p: u32,
        spec: &ModelSpec,
        grid: &Grid,
        slicer: &Slicer,
        opts: &EigsOptions,
    ) -> Result<(LocalizationRow, Vec<Eigenpair>)> {
        let loc = self.config.localization.as_ref().ok_or(Error::EmptyRegion)?;
        let slice = eigenpairs_with(slicer, loc.interval, opts)?;
        let pairs = slice.eigenpairs.unwrap_or_default();
        let samples = sample_fields(spec, grid)?;
        let kset = k_set(&samples, loc.interval);
        let metrics = localization_metrics_in(&pairs, &kset, p as f64, &loc.c_ladder, loc.window);
        let (enlarged_count, enlarged_lengths) = match loc.enlarged_margin_lengths {
            Some(m) => {
                let domain = self.domain_at(p, m);
                let lengths = domain.lengths().to_vec();
                let (_, _, op) = self.operator_at(p, domain)?;
                let count = Slicer::new(&op.matrix).count_interval(loc.interval)?.count;
                (Some(count), Some(lengths))
            }
            None => (None, None),
        };
        let row = LocalizationRow {
            interval: loc.interval,
            count: pairs.len(),
            max_residual: pairs.iter().map(|e| e.residual).fold(0.0, f64::max),
            min_c_hat: metrics.min_c_hat(),
            min_rate: metrics.min_rate(),
            pairs: metrics.pairs,
            enlarged_count,
            enlarged_lengths,
        };
        Ok((row, pairs))
    }

    fn ldos_with(
        &self,
        p: u32,
        samples: &FieldSamples,
        slicer: &Slicer,
        opts: &EigsOptions,
        cached: Option<&[Eigenpair]>,
    ) -> Result<LdosRow> {
        let phi = self.config.ldos_phi().ok_or(Error::EmptyRegion)?;
        let owned;
        let pairs = match cached {
            Some(pairs) => pairs,
            None => {
                let tf = phi.test_function();
                let (a, b) = tf.support();
                let count = slicer.count_interval((a, b))?.count;
                let opts = EigsOptions {
                    max_m: opts.max_m.max(count),
                    ..opts.clone()
                };
                owned = eigenpairs_with(slicer, (a, b), &opts)?.eigenpairs.unwrap_or_default();
                &owned[..]
            }
        };
        Ok(ldos_row(samples, pairs, phi, &self.config.ldos.nodes, p))
    }

    /// LDOS row at `p` on its own operator; errors propagate.
    pub fn ldos_at(&self, p: u32) -> Result<(LdosRow, Grid)> {
        let (spec, grid, op) = self.operator_at(p, self.domain_at(p, self.base_margin()))?;
        let slicer = Slicer::new(&op.matrix);
        let samples = sample_fields(&spec, &grid)?;
        let row = self.ldos_with(p, &samples, &slicer, &self.eigs_options(p), None)?;
        Ok((row, grid))
    }

    pub fn run_row(&self, requested: u32, p: u32) -> (SweepRow, Vec<DensityDump>) {
        let config = self.config;
        let domain = self.domain_at(p, self.base_margin());
        let mut row = SweepRow {
            p,
            requested_p: requested,
            lengths: domain.lengths().to_vec(),
            cells: Vec::new(),
            dimension: 0,
            prediction_hash: self.predictions.input_hash.clone(),
            weyl: Vec::new(),
            trace: Vec::new(),
            cluster: None,
            localization: None,
            ldos: None,
            failures: Vec::new(),
        };
        let mut dumps = Vec::new();
        let (spec, grid, op) = match self.operator_at(p, domain) {
            Ok(x) => x,
            Err(e) => {
                row.failures.push(RowFailure::new("assemble", &e));
                return (row, dumps);
            }
        };
        row.cells = grid.cells().to_vec();
        row.dimension = op.matrix.dim();
        let shape = [grid.shape()[0], grid.shape()[1]];
        let slicer = Slicer::new(&op.matrix);
        let opts = self.eigs_options(p);
        let pn = (p as f64).powi(self.n);

        if config.has(Check::Weyl) {
            for w in &self.predictions.weyl {
                match slicer.count_interval(w.interval) {
                    Ok(s) => {
                        let predicted = w.value * pn;
                        row.weyl.push(WeylRow {
                            interval: w.interval,
                            measured: s.count,
                            predicted,
                            ratio: (predicted != 0.0).then(|| s.count as f64 / predicted),
                            per_pn: s.count as f64 / pn,
                        });
                    }
                    Err(e) => row.failures.push(RowFailure::new("weyl", &e)),
                }
            }
        }

        let mut trace_pairs: Vec<(PhiSpec, Vec<Eigenpair>)> = Vec::new();
        if config.has(Check::Trace) {
            for &(phi, pairing) in &self.predictions.f0_pairings {
                match trace_phi(&slicer, &phi.test_function(), None, &opts) {
                    Ok(t) => {
                        let predicted = pn * pairing;
                        row.trace.push(TraceRow {
                            phi,
                            measured: t.value,
                            predicted,
                            relative_error: relative_gap(t.value, predicted),
                            method: t.method,
                            count: t.count,
                            error_bound: t.error_bound,
                        });
                        if t.method == TraceMethod::Eigenpairs {
                            trace_pairs.push((phi, t.eigenpairs));
                        }
                    }
                    Err(e) => row.failures.push(RowFailure::new("trace", &e)),
                }
            }
        }

        if config.has(Check::Cluster) {
            match self.cluster_row(&slicer, &opts) {
                Ok(c) => row.cluster = Some(c),
                Err(e) => row.failures.push(RowFailure::new("cluster", &e)),
            }
        }

        if config.has(Check::Localization) {
            match self.localization_row(p, &spec, &grid, &slicer, &opts) {
                Ok((loc, pairs)) => {
                    if config.output.dumps {
                        let cell = grid.cell_volume();
                        for (j, pair) in pairs.iter().enumerate() {
                            dumps.push(DensityDump {
                                name: format!("p{p}_localization_{j}.bin"),
                                shape,
                                values: pair.vector.iter().map(|z| z.norm_sqr() / cell).collect(),
                            });
                        }
                    }
                    row.localization = Some(loc);
                }
                Err(e) => row.failures.push(RowFailure::new("localization", &e)),
            }
        }

        if config.has(Check::Ldos) {
            let phi = config.ldos_phi();
            let cached = trace_pairs
                .iter()
                .find(|(f, _)| Some(*f) == phi)
                .map(|(_, pairs)| &pairs[..]);
            let result = sample_fields(&spec, &grid).and_then(|samples| {
                self.ldos_with(p, &samples, &slicer, &opts, cached)
                    .map(|r| (r, samples))
            });
            match result {
                Ok((ldos, _)) => row.ldos = Some(ldos),
                Err(e) => row.failures.push(RowFailure::new("ldos", &e)),
            }
        }
        (row, dumps)
    }
}

/// Half extent of `K_iv` about the domain centre along each axis.
fn core_half_widths(domain: &Domain, samples: &FieldSamples, iv: (f64, f64)) -> Result<Vec<f64>> {
    let kset = k_set(samples, iv);
    if kset.is_empty() {
        return Err(Error::Config(format!("the core set of {} is empty", label(iv))));
    }
    let centre: Vec<f64> = domain
        .origin()
        .iter()
        .zip(domain.lengths())
        .map(|(o, l)| o + 0.5 * l)
        .collect();
    let grid = samples.grid();
    let mut half = vec![0.0f64; grid.dim()];
    for node in (0..grid.len()).filter(|&i| kset.indicator[i]) {
        for (h, (x, c)) in half.iter_mut().zip(grid.coords_vec(node).iter().zip(&centre)) {
            *h = h.max((x - c).abs());
        }
    }
    Ok(half)
}

/// Runs every row of `config`, fits the trends and judges them.
///
/// Failures at one `p` are recorded in that row; only an invalid config or
/// model is an error.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate()?;
    let sweep = Sweep::prepare(config)?;
    let mut outputs: Vec<(SweepRow, Vec<DensityDump>, f64)> = sweep
        .powers
        .par_iter()
        .map(|&(requested, p)| {
            let t = Instant::now();
            let (row, dumps) = sweep.run_row(requested, p);
            (row, dumps, t.elapsed().as_secs_f64())
        })
        .collect();
    outputs.sort_by_key(|(row, _, _)| row.p);
    let row_seconds = outputs.iter().map(|(r, _, t)| (r.p, *t)).collect();
    let (rows, dumps): (Vec<SweepRow>, Vec<Vec<DensityDump>>) = outputs.into_iter().map(|(r, d, _)| (r, d)).unzip();
    let resolved = &sweep.resolved;
    let fits = compute_fits(resolved, &rows);
    let bounds = compute_bounds(resolved, &rows, sweep.n);
    let verdicts = compute_verdicts(resolved, &rows, &fits, &bounds, &config.tolerances);
    let config_json = serde_json::to_string(resolved).map_err(|e| Error::Config(e.to_string()))?;
    let unix_seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ExperimentReport {
        provenance: Provenance {
            config_hash: sha256_hex(config_json.as_bytes()),
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
        },
        config: resolved.clone(),
        validation: sweep.validation,
        warnings: sweep.warnings,
        predictions: sweep.predictions,
        incomplete: rows.iter().any(|r| !r.is_complete()),
        rows,
        fits,
        bounds,
        verdicts,
        run: Some(RunInfo {
            unix_seconds,
            row_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        }),
        dumps: dumps.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn landau_config(extra: &str) -> ExperimentConfig {
        let l = (2.0 * PI).sqrt();
        ExperimentConfig::from_json_str(&format!(
            r#"{{"model": {{"domain": {{"kind": "torus", "lengths": [{l}, {l}]}}, "b": "1", "b0": 1}},
                "prediction_cells": 64, {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn gaps_between_components() {
        let comps = [(0.7, 1.3), (2.1, 6.5)];
        assert_eq!(gaps_in((0.0, 4.0), &comps), vec![(0.0, 0.7), (1.3, 2.1)]);
        assert_eq!(gaps_in((1.0, 2.0), &comps), vec![(1.3, 2.0)]);
        assert_eq!(gaps_in((0.0, 8.0), &comps), vec![(0.0, 0.7), (1.3, 2.1), (6.5, 8.0)]);
        assert!(gaps_in((0.8, 1.2), &comps).is_empty());
    }

    #[test]
    fn landau_degeneracy_sweep() {
        let config = landau_config(r#""p": [2, 4, 6], "intervals": [[0.5, 1.5], [1.5, 2.5]], "checks": ["weyl"]"#);
        let report = run_sweep(&config).unwrap();
        assert!(!report.incomplete);
        for row in &report.rows {
            assert_eq!(row.weyl[0].measured, row.p as usize);
            assert!((row.weyl[0].predicted - row.p as f64).abs() < 1e-9);
            assert_eq!(row.weyl[1].measured, 0);
            assert_eq!(row.weyl[1].ratio, None);
            assert_eq!(row.prediction_hash, report.predictions.input_hash);
        }
        assert!(report.verdict("weyl [1.5, 2.5]").unwrap().passed);
        let bound = &report.bounds[0];
        assert_eq!(bound.variation, Some(1.0));
    }

    #[test]
    fn deterministic_bytes() {
        let config = landau_config(
            r#""p": [2, 4, 6], "intervals": [[0.5, 1.5]], "phi": [{"alpha": 0.8, "beta": 1.6}],
               "checks": ["weyl", "trace", "cluster", "ldos"], "ldos": {"nodes": [[1.0, 1.0]]}"#,
        );
        let mut a = run_sweep(&config).unwrap();
        let mut b = run_sweep(&config).unwrap();
        a.run = None;
        b.run = None;
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.to_json().unwrap().contains("\"config_hash\""));
    }

    #[test]
    fn unquantized_powers_are_adjusted() {
        // Flux 2π·1.5: only even p give an integer number of quanta.
        let l = (3.0 * PI).sqrt();
        let config = ExperimentConfig::from_json_str(&format!(
            r#"{{"model": {{"domain": {{"kind": "torus", "lengths": [{l}, {l}]}}, "b": "1", "b0": 1}},
                "prediction_cells": 64, "p": [2, 3, 4], "intervals": [[0.5, 1.5]], "checks": ["weyl"]}}"#
        ))
        .unwrap();
        let report = run_sweep(&config).unwrap();
        let used: Vec<(u32, u32)> = report.rows.iter().map(|r| (r.requested_p, r.p)).collect();
        // 3 moves to 2 or 4, both taken, so it is dropped.
        assert_eq!(used, vec![(2, 2), (4, 4)]);
        assert_eq!(report.warnings.iter().filter(|w| w.contains("p = 3")).count(), 2);
    }

    #[test]
    fn failures_are_recorded() {
        let config =
            landau_config(r#""p": [2, 4], "intervals": [[0.5, 1.5]], "checks": ["weyl"], "grid": {"cells": [40, 40]}"#);
        let report = run_sweep(&config).unwrap();
        // 40 cells give 11.3 nodes per magnetic length at p = 2 and 7.98 at p = 4.
        let failed: Vec<u32> = report.rows.iter().filter(|r| !r.is_complete()).map(|r| r.p).collect();
        assert!(report.incomplete);
        assert_eq!(failed, vec![4]);
        assert_eq!(report.exit_code(), 2);
        assert!(!report.verdict("complete").unwrap().passed);
    }
}
