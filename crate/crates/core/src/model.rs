//! Continuous problem data and its sampling onto grids.
//!
//! A [`ModelSpec`] holds the domain, metric `g`, magnetic two-form `B` and
//! electric potential `V` as compiled expressions. [`Grid`] is a tensor grid
//! over the domain and [`FieldSamples`] the frozen field values at its nodes,
//! including the frame eigenvalues `a_j(x)`.
//!
//! Only pointwise bounds on the sample grid are checked; bounded derivatives of
//! all orders and bounded geometry are assumed, not verified.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::predictor::frame;

/// Relative slack when comparing sampled frame eigenvalues with the declared
/// lower bound `b0`.
pub const B0_RELATIVE_SLACK: f64 = 1e-12;

/// Required number of grid nodes per magnetic length `(p * sup b)^(-1/2)`.
pub const NODES_PER_MAGNETIC_LENGTH: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Torus,
    Rectangle,
}

/// JSON form of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub lengths: Vec<f64>,
    /// Lower corner. Defaults to the origin for tori and to `-L/2` (a domain
    /// centred at zero) for rectangles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

/// Metric as given in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricConfig {
    /// `"identity"`
    Named(String),
    /// Row-major `d x d` array of expression strings.
    Matrix(Vec<Vec<String>>),
}

/// Model definition file.
///
/// ```json
/// {
///   "domain": { "kind": "torus", "lengths": [2.5066282746310002, 2.5066282746310002] },
///   "params": { "L": 2.5066282746310002 },
///   "b": "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)",
///   "potential": "0",
///   "b0": 0.7
/// }
/// ```
///
/// In dimension two the field is given by the scalar `b` with
/// `B = b dv_g`. In general dimension use `two_form`, a map from `"i,j"`
/// (1-based, `i < j`) to the expression for `B_ij`; omitted entries are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_form: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricConfig>,
    #[serde(default = "zero_potential")]
    pub potential: String,
    pub b0: f64,
}

fn zero_potential() -> String {
    "0".to_string()
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<ModelConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<ModelConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Periodic box `origin + [0, L_1) x ... x [0, L_d)`.
    Torus { lengths: Vec<f64>, origin: Vec<f64> },
    /// Box `origin + [0, L_1] x ... x [0, L_d]` with Dirichlet boundary.
    Rectangle { lengths: Vec<f64>, origin: Vec<f64> },
}

impl Domain {
    pub fn lengths(&self) -> &[f64] {
        match self {
            Domain::Torus { lengths, .. } | Domain::Rectangle { lengths, .. } => lengths,
        }
    }

    pub fn origin(&self) -> &[f64] {
        match self {
            Domain::Torus { origin, .. } | Domain::Rectangle { origin, .. } => origin,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengths().len()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// A copy with new side lengths, keeping a rectangle centred where it was.
    pub fn resized(&self, lengths: Vec<f64>) -> Domain {
        match self {
            Domain::Torus { origin, .. } => Domain::Torus {
                lengths,
                origin: origin.clone(),
            },
            Domain::Rectangle { lengths: old, origin } => {
                let origin = origin
                    .iter()
                    .zip(old)
                    .zip(&lengths)
                    .map(|((o, l_old), l_new)| o + 0.5 * l_old - 0.5 * l_new)
                    .collect();
                Domain::Rectangle { lengths, origin }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricField {
    Identity,
    /// Row-major `d x d` expressions, symmetric.
    Matrix(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TwoFormField {
    /// Dimension two: `B = b dv_g`, i.e. `B_12 = b * sqrt(det g)`.
    Density(Expr),
    /// Upper-triangular entries `(i, j, B_ij)`, zero-based, `i < j`.
    Entries(Vec<(usize, usize, Expr)>),
}

/// The continuous model: domain, metric, magnetic two-form and potential.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub domain: Domain,
    pub metric: MetricField,
    pub two_form: TwoFormField,
    pub potential: Expr,
    pub b0: f64,
    config: ModelConfig,
}

impl ModelSpec {
    pub fn from_config(config: &ModelConfig) -> Result<ModelSpec> {
        let d = config.domain.lengths.len();
        if d == 0 || !d.is_multiple_of(2) {
            return Err(Error::Config(format!("dimension must be even and positive, got {d}")));
        }
        if config.domain.lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("domain lengths must be positive".into()));
        }
        if !(config.b0 > 0.0 && config.b0.is_finite()) {
            return Err(Error::Config("b0 must be positive".into()));
        }
        let origin = match &config.domain.origin {
            Some(o) if o.len() == d => o.clone(),
            Some(o) => return Err(Error::Config(format!("origin has {} entries, expected {d}", o.len()))),
            None => match config.domain.kind {
                DomainKind::Torus => vec![0.0; d],
                DomainKind::Rectangle => config.domain.lengths.iter().map(|l| -0.5 * l).collect(),
            },
        };
        let lengths = config.domain.lengths.clone();
        let domain = match config.domain.kind {
            DomainKind::Torus => Domain::Torus { lengths, origin },
            DomainKind::Rectangle => Domain::Rectangle { lengths, origin },
        };
        let params = &config.params;
        let parse = |s: &str| Expr::parse(s, d, params);

        let metric = match &config.metric {
            None => MetricField::Identity,
            Some(MetricConfig::Named(name)) if name == "identity" => MetricField::Identity,
            Some(MetricConfig::Named(name)) => return Err(Error::Config(format!("unknown metric `{name}`"))),
            Some(MetricConfig::Matrix(rows)) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("metric must be {d} x {d}")));
                }
                let mut entries = Vec::with_capacity(d * d);
                for row in rows {
                    for s in row {
                        entries.push(parse(s)?);
                    }
                }
                for i in 0..d {
                    for j in 0..i {
                        if entries[i * d + j].source() != entries[j * d + i].source() {
                            return Err(Error::Config(format!(
                                "metric entries ({},{}) and ({},{}) differ",
                                i + 1,
                                j + 1,
                                j + 1,
                                i + 1
                            )));
                        }
                    }
                }
                MetricField::Matrix(entries)
            }
        };

        let two_form = match (&config.b, &config.two_form) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `b` or `two_form`, not both".into())),
            (Some(b), None) => {
                if d != 2 {
                    return Err(Error::Config(
                        "scalar `b` only describes two-dimensional fields; use `two_form`".into(),
                    ));
                }
                TwoFormField::Density(parse(b)?)
            }
            (None, Some(map)) => {
                let mut entries = Vec::new();
                for (key, src) in map {
                    let (i, j) = parse_index_pair(key, d)?;
                    entries.push((i, j, parse(src)?));
                }
                TwoFormField::Entries(entries)
            }
            (None, None) => return Err(Error::Config("missing magnetic field `b` or `two_form`".into())),
        };

        Ok(ModelSpec {
            domain,
            metric,
            two_form,
            potential: parse(&config.potential)?,
            b0: config.b0,
            config: config.clone(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<ModelSpec> {
        Self::from_config(&ModelConfig::from_json_str(text)?)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The same model on a resized domain.
    pub fn with_domain(&self, domain: Domain) -> ModelSpec {
        let mut config = self.config.clone();
        config.domain.lengths = domain.lengths().to_vec();
        config.domain.origin = Some(domain.origin().to_vec());
        ModelSpec {
            domain,
            config,
            ..self.clone()
        }
    }

    /// The scalar density `b` of a two-dimensional Euclidean model, as used by
    /// the lattice discretization.
    pub fn flat_density(&self) -> Result<&Expr> {
        if self.dim() != 2 {
            return Err(Error::UnsupportedGeometry(format!(
                "discretization needs d = 2, model has d = {}",
                self.dim()
            )));
        }
        if self.metric != MetricField::Identity {
            return Err(Error::UnsupportedGeometry(
                "discretization needs the identity metric".into(),
            ));
        }
        match &self.two_form {
            TwoFormField::Density(b) => Ok(b),
            TwoFormField::Entries(_) => Err(Error::UnsupportedGeometry(
                "discretization needs the field given as a scalar `b`".into(),
            )),
        }
    }

    /// Metric at `x`, row-major.
    pub fn metric_at(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match &self.metric {
            MetricField::Identity => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }
            MetricField::Matrix(m) => {
                for (o, e) in out.iter_mut().zip(m) {
                    *o = e.eval(x);
                }
            }
        }
    }

    /// Two-form at `x` (row-major, antisymmetric) given the metric there.
    pub fn two_form_at(&self, x: &[f64], metric: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.two_form {
            TwoFormField::Density(b) => {
                let det = metric[0] * metric[3] - metric[1] * metric[2];
                let v = b.eval(x) * det.sqrt();
                out[1] = v;
                out[2] = -v;
            }
            TwoFormField::Entries(entries) => {
                for (i, j, e) in entries {
                    let v = e.eval(x);
                    out[i * d + j] = v;
                    out[j * d + i] = -v;
                }
            }
        }
    }
}

fn parse_index_pair(key: &str, d: usize) -> Result<(usize, usize)> {
    let bad = || {
        Error::Config(format!(
            "two_form key `{key}` must look like \"i,j\" with 1 <= i < j <= {d}"
        ))
    };
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if !(1 <= i && i < j && j <= d) {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

/// Tensor grid over a domain. Nodes are the unknowns of the discretization:
/// all `N_i` points of a torus side, or the `N_i - 1` interior points of a
/// rectangle side split into `N_i` cells. Index order is `x1` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    cells: Vec<usize>,
    n: Vec<usize>,
    h: Vec<f64>,
    first: Vec<f64>,
    periodic: bool,
}

impl Grid {
    /// `cells[i]` is `N_i`, the number of intervals along axis `i`
    /// (`h_i = L_i / N_i`).
    pub fn new(domain: &Domain, cells: &[usize]) -> Result<Grid> {
        let d = domain.dim();
        if cells.len() != d {
            return Err(Error::Config(format!("grid has {} axes, domain has {d}", cells.len())));
        }
        let periodic = domain.is_periodic();
        let min_cells = if periodic { 3 } else { 2 };
        if cells.iter().any(|&c| c < min_cells) {
            return Err(Error::Config(format!("grid needs at least {min_cells} cells per axis")));
        }
        let h: Vec<f64> = domain.lengths().iter().zip(cells).map(|(l, &c)| l / c as f64).collect();
        let (n, first) = if periodic {
            (cells.to_vec(), domain.origin().to_vec())
        } else {
            (
                cells.iter().map(|c| c - 1).collect(),
                domain.origin().iter().zip(&h).map(|(o, h)| o + h).collect(),
            )
        };
        Ok(Grid {
            cells: cells.to_vec(),
            n,
            h,
            first,
            periodic,
        })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Nodes per axis.
    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element `prod h_i` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Multi-index of a linear node index.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for (o, &n) in out.iter_mut().zip(&self.n) {
            *o = idx % n;
            idx /= n;
        }
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (m, n) in multi.iter().zip(&self.n).rev() {
            idx = idx * n + m;
        }
        idx
    }

    /// Coordinates of node `idx`.
    pub fn coords(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for ((o, (&n, h)), first) in out.iter_mut().zip(self.n.iter().zip(&self.h)).zip(&self.first) {
            let i = rest % n;
            rest /= n;
            *o = first + i as f64 * h;
        }
    }

    pub fn coords_vec(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords(idx, &mut x);
        x
    }

    /// Coordinate of node `i` along `axis`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.first[axis] + i as f64 * self.h[axis]
    }

    /// The grid with every cell split into `factor` cells. Nodes of `self`
    /// are nodes of the result.
    pub fn refined(&self, domain: &Domain, factor: usize) -> Result<Grid> {
        let cells: Vec<usize> = self.cells.iter().map(|c| c * factor).collect();
        Grid::new(domain, &cells)
    }

    /// Fails unless every `h_i * sqrt(p * sup_b) <= 1/8`.
    pub fn check_resolution(&self, p: f64, sup_b: f64) -> Result<()> {
        let scale = (p * sup_b).sqrt();
        for &h in &self.h {
            let nodes = 1.0 / (h * scale);
            if nodes < NODES_PER_MAGNETIC_LENGTH * (1.0 - 1e-12) {
                return Err(Error::UnderResolved {
                    p,
                    h,
                    nodes_per_length: nodes,
                    required: NODES_PER_MAGNETIC_LENGTH,
                });
            }
        }
        Ok(())
    }
}

/// Field values frozen at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct FieldSamples {
    grid: Grid,
    dim: usize,
    metric: Vec<f64>,
    two_form: Vec<f64>,
    potential: Vec<f64>,
    frame: Vec<f64>,
    sqrt_det_g: Vec<f64>,
}

impl FieldSamples {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n = d / 2`.
    pub fn half_dim(&self) -> usize {
        self.dim / 2
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn metric(&self, node: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.metric[node * dd..(node + 1) * dd]
    }

    pub fn two_form(&self, node: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.two_form[node * dd..(node + 1) * dd]
    }

    pub fn potential(&self, node: usize) -> f64 {
        self.potential[node]
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potential
    }

    /// Frame eigenvalues `a_1 <= ... <= a_n` at `node`.
    pub fn frame(&self, node: usize) -> &[f64] {
        let n = self.half_dim();
        &self.frame[node * n..(node + 1) * n]
    }

    pub fn sqrt_det_g(&self, node: usize) -> f64 {
        self.sqrt_det_g[node]
    }

    /// Liouville density `prod a_j * sqrt|g|` at `node`.
    pub fn liouville_density(&self, node: usize) -> f64 {
        self.frame(node).iter().product::<f64>() * self.sqrt_det_g[node]
    }

    /// Smallest `a_1` over all nodes and the node attaining it.
    pub fn min_frame(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for node in 0..self.len() {
            let a = self.frame(node)[0];
            if a < best.0 {
                best = (a, node);
            }
        }
        best
    }

    pub fn max_frame(&self) -> f64 {
        let n = self.half_dim();
        (0..self.len()).map(|node| self.frame(node)[n - 1]).fold(0.0, f64::max)
    }

    pub fn sup_abs_potential(&self) -> f64 {
        self.potential.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Outcome of [`validate_model`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    pub min_frame_eigenvalue: f64,
    pub min_frame_at: Vec<f64>,
    pub max_frame_eigenvalue: f64,
    pub b0: f64,
    pub sup_abs_potential: f64,
    pub max_metric_condition: f64,
    pub min_metric_eigenvalue: f64,
    pub nodes: usize,
    pub passes: bool,
}

struct NodeFields {
    metric: Vec<f64>,
    two_form: Vec<f64>,
    potential: f64,
    frame: Vec<f64>,
    sqrt_det_g: f64,
    metric_eigs: (f64, f64),
}

fn eval_node(spec: &ModelSpec, grid: &Grid, node: usize) -> Result<NodeFields> {
    let d = spec.dim();
    let x = grid.coords_vec(node);
    let mut metric = vec![0.0; d * d];
    spec.metric_at(&x, &mut metric);
    if let Some(bad) = metric.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            field: "metric".into(),
            coords: x,
            value: *bad,
        });
    }
    let metric_eigs = frame::symmetric_extreme_eigenvalues(&metric, d);
    if !(metric_eigs.0 > 0.0) {
        return Err(Error::MetricNotSpd {
            coords: x,
            min_eigenvalue: metric_eigs.0,
        });
    }
    let mut two_form = vec![0.0; d * d];
    spec.two_form_at(&x, &metric, &mut two_form);
    if let Some(bad) = two_form.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            field: "two_form".into(),
            coords: x,
            value: *bad,
        });
    }
    let potential = spec.potential.eval(&x);
    if !potential.is_finite() {
        return Err(Error::Evaluation {
            field: "potential".into(),
            coords: x,
            value: potential,
        });
    }
    let frame = frame::frame_eigenvalues_unchecked(&metric, &two_form, d);
    let sqrt_det_g = frame::determinant(&metric, d).sqrt();
    Ok(NodeFields {
        metric,
        two_form,
        potential,
        frame,
        sqrt_det_g,
        metric_eigs,
    })
}

fn eval_all(spec: &ModelSpec, grid: &Grid) -> Result<Vec<NodeFields>> {
    if grid.dim() != spec.dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match model dimension {}",
            grid.dim(),
            spec.dim()
        )));
    }
    (0..grid.len())
        .into_par_iter()
        .map(|node| eval_node(spec, grid, node))
        .collect()
}

/// Checks the standing assumptions pointwise on `grid`.
pub fn validate_model(spec: &ModelSpec, grid: &Grid) -> Result<ValidationReport> {
    let nodes = eval_all(spec, grid)?;
    let n = spec.dim() / 2;
    let mut min_a = f64::INFINITY;
    let mut min_at = 0;
    let mut max_a: f64 = 0.0;
    let mut max_cond: f64 = 1.0;
    let mut min_metric = f64::INFINITY;
    let mut sup_v: f64 = 0.0;
    for (i, f) in nodes.iter().enumerate() {
        if f.frame[0] < min_a {
            min_a = f.frame[0];
            min_at = i;
        }
        max_a = max_a.max(f.frame[n - 1]);
        max_cond = max_cond.max(f.metric_eigs.1 / f.metric_eigs.0);
        min_metric = min_metric.min(f.metric_eigs.0);
        sup_v = sup_v.max(f.potential.abs());
    }
    let at = grid.coords_vec(min_at);
    if min_a < spec.b0 * (1.0 - B0_RELATIVE_SLACK) {
        return Err(Error::NonDegeneracyViolation {
            min_a,
            b0: spec.b0,
            coords: at,
        });
    }
    Ok(ValidationReport {
        min_frame_eigenvalue: min_a,
        min_frame_at: at,
        max_frame_eigenvalue: max_a,
        b0: spec.b0,
        sup_abs_potential: sup_v,
        max_metric_condition: max_cond,
        min_metric_eigenvalue: min_metric,
        nodes: grid.len(),
        passes: true,
    })
}

/// Evaluates all fields at the nodes of `grid`.
pub fn sample_fields(spec: &ModelSpec, grid: &Grid) -> Result<FieldSamples> {
    let nodes = eval_all(spec, grid)?;
    let d = spec.dim();
    let count = nodes.len();
    let mut out = FieldSamples {
        grid: grid.clone(),
        dim: d,
        metric: Vec::with_capacity(count * d * d),
        two_form: Vec::with_capacity(count * d * d),
        potential: Vec::with_capacity(count),
        frame: Vec::with_capacity(count * d / 2),
        sqrt_det_g: Vec::with_capacity(count),
    };
    for f in nodes {
        out.metric.extend_from_slice(&f.metric);
        out.two_form.extend_from_slice(&f.two_form);
        out.potential.push(f.potential);
        out.frame.extend_from_slice(&f.frame);
        out.sqrt_det_g.push(f.sqrt_det_g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_model(b: &str, v: &str, b0: f64, l: f64) -> ModelSpec {
        let cfg = format!(
            r#"{{"domain": {{"kind": "torus", "lengths": [{l}, {l}]}},
                "params": {{"L": {l}}}, "b": "{b}", "potential": "{v}", "b0": {b0}}}"#
        );
        ModelSpec::from_json_str(&cfg).unwrap()
    }

    #[test]
    fn constant_field_passes() {
        let spec = torus_model("1", "0", 1.0, 2.0);
        let grid = Grid::new(&spec.domain, &[16, 16]).unwrap();
        let r = validate_model(&spec, &grid).unwrap();
        assert!(r.passes);
        assert_eq!(r.min_frame_eigenvalue, 1.0);
        assert_eq!(r.sup_abs_potential, 0.0);
        assert_eq!(r.max_metric_condition, 1.0);
    }

    #[test]
    fn vanishing_field_is_rejected() {
        let spec = torus_model("sin(x1)", "0", 0.1, 2.0 * std::f64::consts::PI);
        let grid = Grid::new(&spec.domain, &[32, 32]).unwrap();
        match validate_model(&spec, &grid) {
            Err(Error::NonDegeneracyViolation { min_a, .. }) => assert!(min_a < 0.1),
            other => panic!("expected NonDegeneracyViolation, got {other:?}"),
        }
    }

    #[test]
    fn modulated_field_min_matches_fine_grid_minimum() {
        let l = (2.0 * std::f64::consts::PI).sqrt();
        let spec = torus_model("1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)", "0", 0.7, l);
        let grid = Grid::new(&spec.domain, &[64, 64]).unwrap();
        let r = validate_model(&spec, &grid).unwrap();
        // Independent brute-force minimum over a fine grid.
        let m = 512;
        let mut brute = f64::INFINITY;
        for i in 0..m {
            for j in 0..m {
                let (x, y) = (l * i as f64 / m as f64, l * j as f64 / m as f64);
                let t = 2.0 * std::f64::consts::PI / l;
                brute = brute.min(1.0 + 0.3 * (t * x).cos() * (t * y).cos());
            }
        }
        assert!((brute - 0.7).abs() < 1e-12);
        assert!((r.min_frame_eigenvalue - 0.7).abs() < 1e-12);
    }

    #[test]
    fn non_spd_metric_is_rejected() {
        let cfg = r#"{"domain": {"kind": "torus", "lengths": [1, 1]},
            "metric": [["1", "2"], ["2", "1"]], "b": "1", "b0": 0.5}"#;
        let spec = ModelSpec::from_json_str(cfg).unwrap();
        let grid = Grid::new(&spec.domain, &[4, 4]).unwrap();
        assert!(matches!(validate_model(&spec, &grid), Err(Error::MetricNotSpd { .. })));
    }

    #[test]
    fn constant_field_samples() {
        let spec = torus_model("2", "0", 1.0, 1.0);
        let grid = Grid::new(&spec.domain, &[32, 32]).unwrap();
        let s = sample_fields(&spec, &grid).unwrap();
        assert_eq!(s.len(), 1024);
        assert!((0..s.len()).all(|i| s.frame(i) == [2.0]));
    }

    #[test]
    fn scaled_metric_divides_the_form() {
        let cfg = r#"{"domain": {"kind": "torus", "lengths": [1, 1]},
            "metric": [["2", "0"], ["0", "2"]], "two_form": {"1,2": "3"}, "b0": 1}"#;
        let spec = ModelSpec::from_json_str(cfg).unwrap();
        let grid = Grid::new(&spec.domain, &[4, 4]).unwrap();
        let s = sample_fields(&spec, &grid).unwrap();
        assert!((0..s.len()).all(|i| (s.frame(i)[0] - 1.5).abs() < 1e-15));
        assert!((s.sqrt_det_g(0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn potential_samples_match_closed_form() {
        let cfg = r#"{"domain": {"kind": "rectangle", "lengths": [10, 10]},
            "b": "1", "potential": "-exp(-r2/2)", "b0": 1}"#;
        let spec = ModelSpec::from_json_str(cfg).unwrap();
        let grid = Grid::new(&spec.domain, &[20, 20]).unwrap();
        let s = sample_fields(&spec, &grid).unwrap();
        for node in 0..s.len() {
            let x = grid.coords_vec(node);
            let want = -(-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
            assert_eq!(s.potential(node), want);
        }
    }

    #[test]
    fn refinement_preserves_shared_nodes() {
        let spec = torus_model("1 + 0.3*sin(x1)*cos(2*x2)", "0.1*cos(x1+x2)", 0.5, 3.0);
        let coarse = Grid::new(&spec.domain, &[12, 10]).unwrap();
        let fine = coarse.refined(&spec.domain, 2).unwrap();
        let sc = sample_fields(&spec, &coarse).unwrap();
        let sf = sample_fields(&spec, &fine).unwrap();
        for node in 0..coarse.len() {
            let mut m = [0usize; 2];
            coarse.unravel(node, &mut m);
            let fnode = fine.ravel(&[2 * m[0], 2 * m[1]]);
            assert_eq!(sc.potential(node).to_bits(), sf.potential(fnode).to_bits());
            assert_eq!(sc.frame(node)[0].to_bits(), sf.frame(fnode)[0].to_bits());
        }
    }

    #[test]
    fn rectangle_grid_has_interior_nodes_only() {
        let cfg = r#"{"domain": {"kind": "rectangle", "lengths": [4, 4], "origin": [0, 0]},
            "b": "1", "b0": 1}"#;
        let spec = ModelSpec::from_json_str(cfg).unwrap();
        let grid = Grid::new(&spec.domain, &[4, 4]).unwrap();
        assert_eq!(grid.shape(), &[3, 3]);
        assert_eq!(grid.coords_vec(0), vec![1.0, 1.0]);
        assert_eq!(grid.coords_vec(8), vec![3.0, 3.0]);
    }

    #[test]
    fn resolution_gate() {
        let spec = torus_model("1", "0", 1.0, 2.0);
        let grid = Grid::new(&spec.domain, &[64, 64]).unwrap();
        // h = 1/32, 32 / sqrt(p) nodes per magnetic length.
        assert!(grid.check_resolution(16.0, 1.0).is_ok());
        assert!(grid.check_resolution(17.0, 1.0).is_err());
    }

    #[test]
    fn config_errors() {
        assert!(
            ModelSpec::from_json_str(r#"{"domain": {"kind": "torus", "lengths": [1, 1, 1]}, "b": "1", "b0": 1}"#)
                .is_err()
        );
        assert!(ModelSpec::from_json_str(r#"{"domain": {"kind": "torus", "lengths": [1, 1]}, "b0": 1}"#).is_err());
        assert!(ModelSpec::from_json_str(
            r#"{"domain": {"kind": "torus", "lengths": [1, 1]}, "b": "1", "b0": 1, "extra": 2}"#
        )
        .is_err());
    }
}
