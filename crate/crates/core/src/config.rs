//! Experiment configuration in TOML, with a SHA-256 digest of its canonical form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::{Coefficients, Potential};
use crate::convergence::{SequenceKind, SequenceOptions};
use crate::error::{Error, Result};
use crate::expr::{Expr, ScalarFn, Var};
use crate::mesh::{build_mesh, Topology};
use crate::metric::{MetricFamily, MetricKind};
use crate::solver::{Boundary, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Solve,
    Kernel,
    VerifyMass,
    VerifyMvi,
    VerifyCutoff,
    VerifyDuality,
    VerifyDelta,
    CgRun,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Kernel => "kernel",
            ExperimentKind::VerifyMass => "verify-mass",
            ExperimentKind::VerifyMvi => "verify-mvi",
            ExperimentKind::VerifyCutoff => "verify-cutoff",
            ExperimentKind::VerifyDuality => "verify-duality",
            ExperimentKind::VerifyDelta => "verify-delta",
            ExperimentKind::CgRun => "cg-run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyName {
    Circle,
    Interval,
    Torus2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub topology: TopologyName,
    /// Side lengths; one entry for one-dimensional meshes.
    pub extent: Vec<f64>,
    /// Cells per axis.
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKindName {
    Density,
    Conformal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub kind: MetricKindName,
    /// `rho(x, tau)` or `phi(x, y, tau)`.
    pub value: String,
    /// Analytic `tau` derivative; derived symbolically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// Coordinate components of `X`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
    /// `"0"`, `"R"`, `"R + <expr>"` or an expression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Closed,
    Dirichlet,
    Neumann,
    DirichletData,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Defaults to `closed` on closed meshes and `dirichlet` on intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<BoundaryKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Coordinates of `x0`; snapped to the nearest node.
    pub base_point: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_width: Option<f64>,
    #[serde(default)]
    pub startup_steps: usize,
}

/// Parameters of the individual checks; each has a default chosen at run time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Snapshot and probe times.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taus: Vec<f64>,
    /// Initial data for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    /// Compare the kernel with the closed-form flat kernel.
    #[serde(default)]
    pub oracle: bool,
    /// Test functions for the duality check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phi: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_bar: Option<f64>,
    /// Exponents for the reverse Poincare inequalities.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mvi_tau0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mvi_r0: Option<f64>,
    /// Test field `F` for the delta property.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKindName {
    ConformalPerturbation,
    ExpandingDomains,
    PotentialDrift,
    EdgeSources,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub kind: SequenceKindName,
    pub k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_cg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    pub r_star: f64,
    /// Multiplier `c` of the discretisation tolerance `c (h + dt)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_disc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub mesh: MeshConfig,
    pub metric: MetricConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: CheckConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffConfig>,
    /// Named tolerance overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_output_dir() -> String {
    "out".into()
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    pub k_max: Option<usize>,
    pub output_dir: Option<String>,
    pub tolerances: Vec<(String, f64)>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

pub fn parse_expr(field: &str, src: &str) -> Result<Expr> {
    Expr::parse(src).map_err(|source| Error::Expression { field: field.into(), source })
}

fn scalar(field: &str, src: &str) -> Result<ScalarFn> {
    Ok(parse_expr(field, src)?.into_fn())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| format!("offset {}..{}", s.start, s.end)).unwrap_or_else(|| "<root>".into());
            config_err(&path, e.message())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// Canonical serialisation; parsing it back gives an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialise to TOML")
    }

    /// Hex SHA-256 of [`Self::to_toml`] with `output_dir` blanked, so the
    /// digest identifies the experiment and not where it was written.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir.clear();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.grid {
            for c in self.mesh.cells.iter_mut().filter(|c| **c > 0) {
                *c = n;
            }
        }
        if let Some(dt) = o.dt {
            self.solver.dt = dt;
        }
        if let (Some(k), Some(seq)) = (o.k_max, self.sequence.as_mut()) {
            seq.k_max = k;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        for (name, value) in &o.tolerances {
            self.tolerances.insert(name.clone(), *value);
        }
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let topology = match self.mesh.topology {
            TopologyName::Circle => Topology::Circle,
            TopologyName::Interval => Topology::Interval,
            TopologyName::Torus2 => Topology::Torus2,
        };
        let dim = topology.dimension();
        let take2 = |v: &[f64]| [v.first().copied().unwrap_or(0.0), v.get(1).copied().unwrap_or(0.0)];
        if self.mesh.extent.len() != dim || self.mesh.cells.len() != dim {
            return Err(config_err("mesh", format!("{topology:?} needs {dim} extent and cell entries")));
        }
        let cells = [self.mesh.cells[0], self.mesh.cells.get(1).copied().unwrap_or(0)];
        let mesh = build_mesh(topology, take2(&self.mesh.extent), cells)?;

        let kind = match (self.metric.kind, dim) {
            (MetricKindName::Density, 1) => MetricKind::Density,
            (MetricKindName::Conformal, 2) => MetricKind::ConformalExponent,
            _ => return Err(config_err("metric.kind", "density needs a 1-D mesh and conformal the 2-torus")),
        };
        let value = parse_expr("metric.value", &self.metric.value)?;
        let rate = match &self.metric.rate {
            Some(src) => parse_expr("metric.rate", src)?,
            None => value.derivative(Var::Tau),
        };
        let metric = MetricFamily::from_fns(kind, value.into_fn(), Some(rate.into_fn())).with_label(self.metric.value.clone());

        let mut coefficients = Coefficients::new();
        if let Some(d) = &self.coefficients.drift {
            if d.len() != 2 {
                return Err(config_err("coefficients.drift", "needs two components"));
            }
            let (a, b) = (scalar("coefficients.drift[0]", &d[0])?, scalar("coefficients.drift[1]", &d[1])?);
            coefficients = coefficients.with_drift(move |x, y, t| [a(x, y, t), b(x, y, t)]);
        }
        if let Some(q) = &self.coefficients.potential {
            let q = q.trim();
            let potential = if q == "0" {
                Potential::Zero
            } else if q == "R" {
                Potential::TraceR
            } else if let Some(rest) = q.strip_prefix("R +") {
                Potential::TraceRPlus(scalar("coefficients.potential", rest)?)
            } else {
                Potential::Field(scalar("coefficients.potential", q)?)
            };
            coefficients = coefficients.with_potential(potential);
        }

        let boundary = match (self.boundary.kind, topology.is_closed()) {
            (None, true) | (Some(BoundaryKind::Closed), _) => Boundary::Closed,
            (None, false) | (Some(BoundaryKind::Dirichlet), _) => Boundary::DirichletZero,
            (Some(BoundaryKind::Neumann), _) => Boundary::NeumannZero,
            (Some(BoundaryKind::DirichletData), _) => {
                let src = self.boundary.data.as_deref().ok_or_else(|| config_err("boundary.data", "missing"))?;
                Boundary::DirichletData(scalar("boundary.data", src)?)
            }
        };
        let base_point = mesh.nearest_node(take2(&self.solver.base_point));
        let mut spec = ProblemSpec::new(mesh, metric, base_point, self.solver.horizon, self.solver.dt)
            .with_coefficients(coefficients)
            .with_boundary(boundary)
            .with_startup_steps(self.solver.startup_steps);
        if let Some(w) = self.solver.delta_width {
            spec = spec.with_delta_width(w);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn sequence_options(&self) -> Result<(SequenceKindName, SequenceOptions)> {
        let s = self.sequence.as_ref().ok_or_else(|| config_err("sequence", "cg-run needs a [sequence] section"))?;
        let d = SequenceOptions::default();
        Ok((
            s.kind,
            SequenceOptions {
                k_max: s.k_max,
                c_star: s.c_star.unwrap_or(d.c_star),
                window_start: s.window_start,
                probe_radius: s.probe_radius.unwrap_or(d.probe_radius),
                tol_cg: self.tolerance("cg", s.tol_cg.unwrap_or(d.tol_cg)),
            },
        ))
    }
}

impl SequenceKindName {
    pub fn kind(self) -> SequenceKind {
        match self {
            SequenceKindName::ConformalPerturbation => SequenceKind::ConformalPerturbation,
            SequenceKindName::ExpandingDomains | SequenceKindName::EdgeSources => SequenceKind::ExpandingDomains,
            SequenceKindName::PotentialDrift => SequenceKind::PotentialDrift,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
experiment = "verify-mass"

[mesh]
topology = "circle"
extent = [1.0]
cells = [128]

[metric]
kind = "density"
value = "1 + 0.1 * tau"

[coefficients]
potential = "R"

[solver]
base_point = [0.5]
horizon = 0.2
dt = 1e-3
delta_width = 0.02
"#;

    #[test]
    fn round_trip_is_exact() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let text = c.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
        assert_eq!(back.digest(), c.digest());
        assert_eq!(c.digest().len(), 64);
    }

    #[test]
    fn builds_problem() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let spec = c.problem_spec().unwrap();
        assert_eq!(spec.mesh.len(), 128);
        assert_eq!(spec.base_point, 64);
        let s = spec.sample(0.0).unwrap();
        assert!((s.trace_r[3] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_expression_names_field() {
        let text = SAMPLE.replace("1 + 0.1 * tau", "1 + foo");
        let err = ExperimentConfig::from_toml(&text).unwrap().problem_spec().unwrap_err();
        assert!(err.to_string().starts_with("metric.value"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SAMPLE.replace("horizon = 0.2", "horizon = 0.2\nhorizn = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let before = c.digest();
        c.apply(&Overrides { grid: Some(256), dt: Some(5e-4), tolerances: vec![("mass".into(), 1e-4)], ..Default::default() });
        assert_eq!(c.mesh.cells, vec![256]);
        assert_eq!(c.tolerance("mass", 1.0), 1e-4);
        assert_ne!(c.digest(), before);
        let d = c.digest();
        c.apply(&Overrides { output_dir: Some("elsewhere".into()), ..Default::default() });
        assert_eq!(c.digest(), d);
    }
}
