//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tolerances::Tolerances;
use crate::error::{Error, Result};
use crate::model::{Domain, ModelConfig};
use crate::predictor::TestFunction;
use crate::spectral::localization::FIT_WINDOW;
use crate::spectral::EigsOptions;

/// The model, inline or as a path (relative paths resolve against the
/// experiment file's directory).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Inline(ModelConfig),
    Path(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Eigenvalue counts against the Weyl prediction for each interval.
    Weyl,
    /// `tr φ(H_p)` against `p^n <f_0, φ>` for each `φ`.
    Trace,
    /// Distance of the spectrum in a window from the band set.
    Cluster,
    /// Decay of gap eigenfunctions away from `K_[α,β]`.
    Localization,
    /// Local density of states at selected nodes.
    Ldos,
}

/// How many cells each axis gets at a given `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridRule {
    /// Target nodes per magnetic length `(p sup b)^(-1/2)`.
    pub nodes_per_length: f64,
    /// Cell counts are rounded up to a multiple of this.
    pub multiple_of: usize,
    /// Fixed cell counts, overriding the rule for every `p`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
}

impl Default for GridRule {
    fn default() -> Self {
        GridRule {
            nodes_per_length: 8.0,
            multiple_of: 4,
            cells: None,
        }
    }
}

impl GridRule {
    /// Cell counts for `domain` at tensor power `p` with field bound `sup_b`.
    pub fn cells_for(&self, domain: &Domain, p: u32, sup_b: f64) -> Vec<usize> {
        if let Some(cells) = &self.cells {
            return cells.clone();
        }
        let scale = (p as f64 * sup_b).sqrt();
        let m = self.multiple_of.max(1);
        domain
            .lengths()
            .iter()
            .map(|l| {
                // Shave a hair off so that exact products do not round up a
                // whole multiple.
                let raw = (self.nodes_per_length * l * scale * (1.0 - 1e-12)).ceil() as usize;
                raw.max(4).div_ceil(m) * m
            })
            .collect()
    }
}

/// Resizes a rectangle around the set `K` of an interval so that a fixed
/// number of magnetic lengths separate `K` from the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainRule {
    /// Margin on each side of `K`, in magnetic lengths.
    pub margin_lengths: f64,
    /// Interval whose `K` is kept clear of the boundary; defaults to the
    /// localization interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core_interval: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl PhiSpec {
    pub fn test_function(&self) -> TestFunction {
        TestFunction::bump(self.alpha, self.beta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Spectral window whose eigenvalues are compared with the bands.
    pub window: (f64, f64),
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { window: (0.0, 4.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationConfig {
    pub interval: (f64, f64),
    #[serde(default = "default_ladder")]
    pub c_ladder: Vec<f64>,
    /// Fit window in normalized distance `√p d`.
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    /// Margin of the enlarged domain used for the count-stability check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enlarged_margin_lengths: Option<f64>,
}

fn default_ladder() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_window() -> (f64, f64) {
    FIT_WINDOW
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdosConfig {
    /// Points at which the LDOS is compared; each snaps to the nearest node.
    pub nodes: Vec<Vec<f64>>,
    /// Test function; defaults to the first entry of `phi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Also write `rows.csv` and `fits.csv`.
    pub csv: bool,
    /// Write `|u|²` of localization and LDOS eigenvectors as binary grids.
    pub dumps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            csv: true,
            dumps: false,
        }
    }
}

/// A declarative p-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(default)]
    pub grid: GridRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainRule>,
    /// Tensor powers, strictly increasing.
    pub p: Vec<u32>,
    #[serde(default)]
    pub intervals: Vec<(f64, f64)>,
    #[serde(default)]
    pub phi: Vec<PhiSpec>,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationConfig>,
    #[serde(default)]
    pub ldos: LdosConfig,
    /// Cells per axis of the grid on which predictions are integrated.
    #[serde(default = "default_prediction_cells")]
    pub prediction_cells: usize,
    /// Seed for every randomized solver start.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Eigensolver settings; the seed is derived from `seed` and `p`.
    #[serde(default)]
    pub eigs: EigsOptions,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_prediction_cells() -> usize {
    512
}

fn default_seed() -> u64 {
    0x5eed
}

fn valid_interval((a, b): (f64, f64)) -> bool {
    a.is_finite() && b.is_finite() && a < b
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and inlines a model given by path.
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json_str(&text)?;
        config.inline_model(path.parent())?;
        Ok(config)
    }

    /// Replaces a model path by its contents, resolving relative paths
    /// against `base`.
    pub fn inline_model(&mut self, base: Option<&Path>) -> Result<()> {
        if let ModelSource::Path(rel) = &self.model {
            let path = match base {
                Some(b) if rel.is_relative() => b.join(rel),
                _ => rel.clone(),
            };
            self.model = ModelSource::Inline(ModelConfig::from_path(&path)?);
        }
        Ok(())
    }

    /// The model, reading it from disk if needed.
    pub fn model_config(&self) -> Result<ModelConfig> {
        match &self.model {
            ModelSource::Inline(m) => Ok(m.clone()),
            ModelSource::Path(p) => ModelConfig::from_path(p),
        }
    }

    pub fn has(&self, check: Check) -> bool {
        self.checks.contains(&check)
    }

    /// Test function of the LDOS check.
    pub fn ldos_phi(&self) -> Option<PhiSpec> {
        self.ldos.phi.or_else(|| self.phi.first().copied())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.p.is_empty() {
            return fail("p list is empty".into());
        }
        if self.p[0] == 0 {
            return fail("p must be positive".into());
        }
        if self.p.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("p list must be strictly increasing, got {:?}", self.p));
        }
        if self.checks.is_empty() {
            return fail("no checks requested".into());
        }
        if let Some(iv) = self.intervals.iter().find(|&&iv| !valid_interval(iv)) {
            return fail(format!("invalid interval {iv:?}"));
        }
        if let Some(phi) = self
            .phi
            .iter()
            .chain(&self.ldos.phi)
            .find(|f| !valid_interval((f.alpha, f.beta)))
        {
            return fail(format!("invalid test function support [{}, {}]", phi.alpha, phi.beta));
        }
        if self.has(Check::Weyl) && self.intervals.is_empty() {
            return fail("the weyl check needs at least one interval".into());
        }
        if self.has(Check::Trace) && self.phi.is_empty() {
            return fail("the trace check needs at least one test function".into());
        }
        if self.has(Check::Ldos) && self.ldos_phi().is_none() {
            return fail("the ldos check needs a test function".into());
        }
        if self.has(Check::Cluster) && !valid_interval(self.cluster.window) {
            return fail(format!("invalid cluster window {:?}", self.cluster.window));
        }
        match &self.localization {
            Some(loc) => {
                if !valid_interval(loc.interval) || !valid_interval(loc.window) {
                    return fail("invalid localization interval or fit window".into());
                }
                if loc.c_ladder.iter().any(|c| !c.is_finite() || *c < 0.0) {
                    return fail("c ladder entries must be non-negative".into());
                }
                if let Some(m) = loc.enlarged_margin_lengths {
                    if self.domain.is_none() {
                        return fail("an enlarged margin needs a domain rule".into());
                    }
                    if !(m.is_finite() && m >= self.tolerances.min_margin_lengths) {
                        return fail(format!("enlarged margin {m} is below the minimum"));
                    }
                }
            }
            None if self.has(Check::Localization) => {
                return fail("the localization check needs a localization section".into());
            }
            None => {}
        }
        if let Some(rule) = &self.domain {
            if !(rule.margin_lengths >= self.tolerances.min_margin_lengths) {
                return fail(format!(
                    "domain margin of {} magnetic lengths is below the minimum {}",
                    rule.margin_lengths, self.tolerances.min_margin_lengths
                ));
            }
            if rule
                .core_interval
                .or(self.localization.as_ref().map(|l| l.interval))
                .is_none()
            {
                return fail("the domain rule needs a core interval".into());
            }
        }
        if let Some(cells) = &self.grid.cells {
            if cells.is_empty() {
                return fail("explicit grid has no axes".into());
            }
        } else if !(self.grid.nodes_per_length > 0.0) {
            return fail("nodes_per_length must be positive".into());
        }
        if self.prediction_cells < 4 {
            return fail("prediction_cells must be at least 4".into());
        }
        if self.ldos.nodes.iter().any(|x| x.iter().any(|c| !c.is_finite())) {
            return fail("ldos nodes must be finite".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"{"domain": {"kind": "torus", "lengths": [2.5, 2.5]}, "b": "1", "b0": 1}"#;

    fn config(extra: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json_str(&format!(r#"{{"model": {MODEL}, {extra}}}"#))
    }

    #[test]
    fn parses_defaults() {
        let c = config(r#""p": [4, 8], "intervals": [[0.5, 1.5]], "checks": ["weyl"]"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid, GridRule::default());
        assert_eq!(c.prediction_cells, 512);
        assert!(matches!(c.model, ModelSource::Inline(_)));
    }

    #[test]
    fn rejects_bad_lists() {
        for extra in [
            r#""p": [8, 4], "intervals": [[0.5, 1.5]], "checks": ["weyl"]"#,
            r#""p": [4, 4], "intervals": [[0.5, 1.5]], "checks": ["weyl"]"#,
            r#""p": [], "intervals": [[0.5, 1.5]], "checks": ["weyl"]"#,
            r#""p": [4], "checks": ["weyl"]"#,
            r#""p": [4], "intervals": [[1.5, 0.5]], "checks": ["weyl"]"#,
            r#""p": [4], "checks": ["trace"]"#,
            r#""p": [4], "checks": ["localization"]"#,
            r#""p": [4], "checks": []"#,
        ] {
            let c = config(extra).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{extra}");
        }
        assert!(config(r#""p": [4], "checks": ["weyl"], "bogus": 1"#).is_err());
    }

    #[test]
    fn margin_floor() {
        let c = config(
            r#""p": [4], "checks": ["localization"],
               "localization": {"interval": [0.3, 0.9]},
               "domain": {"margin_lengths": 3}"#,
        )
        .unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn grid_rule_rounds_up() {
        let domain = Domain::Torus {
            lengths: vec![2.5066282746310002; 2],
            origin: vec![0.0; 2],
        };
        let rule = GridRule::default();
        let cells: Vec<usize> = [8, 16, 32, 64]
            .iter()
            .map(|&p| rule.cells_for(&domain, p, 1.3)[0])
            .collect();
        assert_eq!(cells, vec![68, 92, 132, 184]);
        let exact = GridRule {
            multiple_of: 1,
            ..GridRule::default()
        };
        let unit = Domain::Torus {
            lengths: vec![2.0, 2.0],
            origin: vec![0.0; 2],
        };
        assert_eq!(exact.cells_for(&unit, 4, 1.0), vec![32, 32]);
    }

    #[test]
    fn model_path_resolves_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.json"), MODEL).unwrap();
        let exp = dir.path().join("e.json");
        std::fs::write(
            &exp,
            r#"{"model": "m.json", "p": [1], "intervals": [[0, 2]], "checks": ["weyl"]}"#,
        )
        .unwrap();
        let c = ExperimentConfig::from_path(&exp).unwrap();
        assert!(matches!(c.model, ModelSource::Inline(_)));
    }
}
