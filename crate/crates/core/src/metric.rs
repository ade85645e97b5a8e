//! Evolving metrics `g(tau)` conformal to the flat coordinate metric.
//!
//! Both supported kinds are written through a length scale `s(x, y, tau)`
//! with `g_ij = s^2 delta_ij`:
//!
//! * one-dimensional density `rho`: `s = rho`, so `g = rho^2 dx^2`;
//! * conformal exponent `phi` on the 2-torus: `s = exp(phi)`.
//!
//! With `sigma = d(ln s)/d tau` this gives `R_ij = s^2 sigma delta_ij`,
//! `R = n sigma`, `sqrt(det g) = s^n` and operator norm `|R_ij|_g = |sigma|`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::mesh::{Mesh, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// `rho(x, tau)`, metric `rho^2 dx^2`.
    Density,
    /// `phi(x, y, tau)`, metric `exp(2 phi) (dx^2 + dy^2)`.
    ConformalExponent,
}

/// A closed-form family of metrics `g(tau)`.
#[derive(Clone)]
pub struct MetricFamily {
    kind: MetricKind,
    value: ScalarFn,
    time_derivative: Option<ScalarFn>,
    label: String,
}

impl fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricFamily")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("analytic_rate", &self.time_derivative.is_some())
            .finish()
    }
}

impl MetricFamily {
    pub fn density(rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: MetricKind::Density,
            value: Arc::new(move |x, _y, t| rho(x, t)),
            time_derivative: None,
            label: "density".into(),
        }
    }

    pub fn conformal(phi: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: MetricKind::ConformalExponent,
            value: Arc::new(phi),
            time_derivative: None,
            label: "conformal".into(),
        }
    }

    pub fn from_fns(kind: MetricKind, value: ScalarFn, time_derivative: Option<ScalarFn>) -> Self {
        Self {
            kind,
            value,
            time_derivative,
            label: format!("{kind:?}").to_lowercase(),
        }
    }

    /// Flat static metric of the given kind.
    pub fn flat(kind: MetricKind) -> Self {
        let value: ScalarFn = match kind {
            MetricKind::Density => Arc::new(|_, _, _| 1.0),
            MetricKind::ConformalExponent => Arc::new(|_, _, _| 0.0),
        };
        let zero: ScalarFn = Arc::new(|_, _, _| 0.0);
        Self::from_fns(kind, value, Some(zero)).with_label("flat")
    }

    /// Supplies the analytic `tau` derivative of the defining function
    /// (`d rho / d tau` or `d phi / d tau`).
    pub fn with_time_derivative(mut self, d: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.time_derivative = Some(Arc::new(d));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `(1 + psi) g(tau)` for a time-independent `psi > -1`.
    pub fn scaled_by(&self, psi: ScalarFn) -> Self {
        let (value, rate) = (self.value.clone(), self.time_derivative.clone());
        let (new_value, new_rate): (ScalarFn, Option<ScalarFn>) = match self.kind {
            MetricKind::Density => {
                let p = psi.clone();
                (
                    Arc::new(move |x, y, t| value(x, y, t) * (1.0 + p(x, y, t)).sqrt()),
                    rate.map(|d| -> ScalarFn { Arc::new(move |x, y, t| d(x, y, t) * (1.0 + psi(x, y, t)).sqrt()) }),
                )
            }
            MetricKind::ConformalExponent => (Arc::new(move |x, y, t| value(x, y, t) + 0.5 * (1.0 + psi(x, y, t)).ln()), rate),
        };
        Self { kind: self.kind, value: new_value, time_derivative: new_rate, label: format!("{}-scaled", self.label) }
    }

    /// The family pulled back by the translation `x -> x + shift`.
    pub fn translated(&self, shift: [f64; 2]) -> Self {
        let [dx, dy] = shift;
        let value = self.value.clone();
        let rate = self.time_derivative.clone();
        Self {
            kind: self.kind,
            value: Arc::new(move |x, y, t| value(x + dx, y + dy, t)),
            time_derivative: rate.map(|d| -> ScalarFn { Arc::new(move |x, y, t| d(x + dx, y + dy, t)) }),
            label: self.label.clone(),
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_analytic_rate(&self) -> bool {
        self.time_derivative.is_some()
    }

    /// Raw defining function (`rho` or `phi`).
    pub fn raw(&self, x: f64, y: f64, tau: f64) -> f64 {
        (self.value)(x, y, tau)
    }

    /// Length scale `s` with `g = s^2 delta`.
    pub fn scale(&self, x: f64, y: f64, tau: f64) -> f64 {
        let v = (self.value)(x, y, tau);
        match self.kind {
            MetricKind::Density => v,
            MetricKind::ConformalExponent => v.exp(),
        }
    }

    /// `sigma = d ln s / d tau`, analytic when available, else a central
    /// difference with half-width `fd_step`.
    pub fn log_rate(&self, x: f64, y: f64, tau: f64, fd_step: f64) -> f64 {
        match (&self.time_derivative, self.kind) {
            (Some(d), MetricKind::Density) => d(x, y, tau) / (self.value)(x, y, tau),
            (Some(d), MetricKind::ConformalExponent) => d(x, y, tau),
            (None, _) => {
                // R_ii / g_ii with R_ii = (g(t+h) - g(t-h)) / (4h)
                let gp = self.scale(x, y, tau + fd_step).powi(2);
                let gm = self.scale(x, y, tau - fd_step).powi(2);
                let g = self.scale(x, y, tau).powi(2);
                (gp - gm) / (4.0 * fd_step) / g
            }
        }
    }
}

/// Metric quantities on every node at one time.
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub tau: f64,
    pub dimension: usize,
    /// `s` per node.
    pub scale: Vec<f64>,
    /// `sqrt(det g) = s^n` per node.
    pub volume_density: Vec<f64>,
    /// Coordinate component `g_ii = s^2` per node.
    pub g_components: Vec<f64>,
    /// Diagonal coordinate component `R_ii = s^2 sigma` per node.
    pub rij: Vec<f64>,
    /// `R = g^ij R_ij = n sigma` per node.
    pub trace_r: Vec<f64>,
    /// Operator norm `|R_ij|_{g(tau)} = |sigma|` per node.
    pub rij_norm: Vec<f64>,
    /// Gaussian curvature (2-torus) or 0 (one-dimensional meshes).
    pub curvature: Vec<f64>,
    /// `s` at x-faces: face `i` sits between node `i` and its +x neighbour.
    pub face_scale_x: Vec<f64>,
    /// `s` at y-faces (2-torus only).
    pub face_scale_y: Vec<f64>,
    pub(crate) family: MetricFamily,
}

impl MetricSample {
    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    /// Conductance `s^(n-2)` at x-face `i`.
    pub(crate) fn conductance_x(&self, face: usize) -> f64 {
        match self.dimension {
            1 => 1.0 / self.face_scale_x[face],
            _ => 1.0,
        }
    }

    /// Node volume weights `sqrt(det g) * cell volume`.
    pub fn volume_weights(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.len())
            .map(|i| self.volume_density[i] * mesh.cell_volume(i))
            .collect()
    }
}

/// Samples `g(tau)` and its derived quantities on the mesh.
///
/// When the family has no analytic rate, `R_ij` uses central differences in
/// `tau` with half-width `fd_step`.
pub fn sample_metric(family: &MetricFamily, mesh: &Mesh, tau: f64, fd_step: f64) -> Result<MetricSample> {
    let n = mesh.dimension();
    let len = mesh.len();
    let [hx, hy] = mesh.spacing();
    let mut scale = Vec::with_capacity(len);
    let mut rate = Vec::with_capacity(len);
    for idx in 0..len {
        let [x, y] = mesh.coords(idx);
        let s = family.scale(x, y, tau);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::DegenerateMetric { tau, node: idx, value: s });
        }
        scale.push(s);
        rate.push(family.log_rate(x, y, tau, fd_step));
    }

    let volume_density: Vec<f64> = scale.iter().map(|s| s.powi(n as i32)).collect();
    let g_components: Vec<f64> = scale.iter().map(|s| s * s).collect();
    let rij: Vec<f64> = g_components.iter().zip(&rate).map(|(g, r)| g * r).collect();
    let trace_r: Vec<f64> = rate.iter().map(|r| n as f64 * r).collect();
    let rij_norm: Vec<f64> = rate.iter().map(|r| r.abs()).collect();

    let x_faces = match mesh.topology() {
        Topology::Interval => mesh.cells()[0],
        _ => mesh.len(),
    };
    let mut face_scale_x = Vec::with_capacity(x_faces);
    for f in 0..x_faces {
        let [x, y] = mesh.coords(f);
        let s = family.scale(x + 0.5 * hx, y, tau);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::DegenerateMetric { tau, node: f, value: s });
        }
        face_scale_x.push(s);
    }
    let face_scale_y = if mesh.topology() == Topology::Torus2 {
        (0..len)
            .map(|f| {
                let [x, y] = mesh.coords(f);
                family.scale(x, y + 0.5 * hy, tau)
            })
            .collect()
    } else {
        Vec::new()
    };

    let curvature = if mesh.topology() == Topology::Torus2 {
        // K = -s^-2 (d_xx + d_yy) ln s
        let log_s: Vec<f64> = scale.iter().map(|s| s.ln()).collect();
        let (nx, ny) = (mesh.nx(), mesh.ny());
        (0..len)
            .map(|idx| {
                let (i, j) = mesh.ij(idx);
                let c = log_s[idx];
                let e = log_s[mesh.index((i + 1) % nx, j)];
                let w = log_s[mesh.index((i + nx - 1) % nx, j)];
                let nn = log_s[mesh.index(i, (j + 1) % ny)];
                let s_ = log_s[mesh.index(i, (j + ny - 1) % ny)];
                let lap = (e - 2.0 * c + w) / (hx * hx) + (nn - 2.0 * c + s_) / (hy * hy);
                -lap / g_components[idx]
            })
            .collect()
    } else {
        vec![0.0; len]
    };

    Ok(MetricSample {
        tau,
        dimension: n,
        scale,
        volume_density,
        g_components,
        rij,
        trace_r,
        rij_norm,
        curvature,
        face_scale_x,
        face_scale_y,
        family: family.clone(),
    })
}

/// Uniform-equivalence constant of `g(tau)` against `g(0)` over the given
/// times: the smallest `C` with `C^-1 g(0) <= g(tau) <= C g(0)` on the lattice.
pub fn equivalence_constant(family: &MetricFamily, mesh: &Mesh, taus: &[f64]) -> Result<f64> {
    let mut c: f64 = 1.0;
    for idx in 0..mesh.len() {
        let [x, y] = mesh.coords(idx);
        let s0 = family.scale(x, y, 0.0);
        if !(s0 > 0.0) {
            return Err(Error::DegenerateMetric { tau: 0.0, node: idx, value: s0 });
        }
        for &t in taus {
            let ratio = (family.scale(x, y, t) / s0).powi(2);
            if !(ratio > 0.0) || !ratio.is_finite() {
                return Err(Error::DegenerateMetric { tau: t, node: idx, value: ratio });
            }
            c = c.max(ratio).max(1.0 / ratio);
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;

    fn circle(n: usize) -> Mesh {
        build_mesh(Topology::Circle, [1.0, 0.0], [n, 0]).unwrap()
    }

    #[test]
    fn uniform_expansion_rates() {
        let fam = MetricFamily::density(|_, t| 1.0 + 0.1 * t).with_time_derivative(|_, _, _| 0.1);
        let m = circle(32);
        for &t in &[0.0, 0.5, 1.0] {
            let s = sample_metric(&fam, &m, t, 1e-4).unwrap();
            for i in 0..m.len() {
                // R_xx = rho rho', R = rho'/rho
                assert_relative_eq!(s.rij[i], 0.1 * (1.0 + 0.1 * t), epsilon = 1e-14);
                assert_relative_eq!(s.trace_r[i], 0.1 / (1.0 + 0.1 * t), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn static_metric_has_zero_rates() {
        let fam = MetricFamily::density(|x, _| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).sin());
        let s = sample_metric(&fam, &circle(64), 0.4, 1e-3).unwrap();
        assert!(s.rij.iter().all(|v| v.abs() < 1e-12));
        assert!(s.trace_r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn conformal_linear_exponent_trace() {
        let eps = 0.3;
        let fam = MetricFamily::conformal(move |_, _, t| eps * t);
        let m = build_mesh(Topology::Torus2, [1.0, 1.0], [16, 16]).unwrap();
        let s = sample_metric(&fam, &m, 0.7, 1e-4).unwrap();
        for i in 0..m.len() {
            assert_relative_eq!(s.trace_r[i], 2.0 * eps, epsilon = 1e-8);
            assert_relative_eq!(s.volume_density[i], (2.0 * eps * 0.7).exp(), epsilon = 1e-14);
            assert!(s.curvature[i].abs() < 1e-10);
        }
    }

    #[test]
    fn central_difference_rate_is_second_order() {
        // rho = 1 + 0.05 tau sin^2(2 pi x) + 0.02 tau^3; hand derivative for the oracle
        let rho = |x: f64, t: f64| 1.0 + 0.05 * t * (2.0 * std::f64::consts::PI * x).sin().powi(2) + 0.02 * t.powi(3);
        let drho = |x: f64, t: f64| 0.05 * (2.0 * std::f64::consts::PI * x).sin().powi(2) + 0.06 * t * t;
        let fam = MetricFamily::density(rho);
        let m = circle(32);
        let t = 0.8;
        let err = |h: f64| {
            let s = sample_metric(&fam, &m, t, h).unwrap();
            (0..m.len())
                .map(|i| {
                    let x = m.coords(i)[0];
                    (s.trace_r[i] - drho(x, t) / rho(x, t)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn degenerate_density_rejected() {
        let fam = MetricFamily::density(|x, _| x - 0.5);
        assert!(matches!(
            sample_metric(&fam, &circle(16), 0.0, 1e-3),
            Err(Error::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn equivalence_constant_of_uniform_expansion() {
        let fam = MetricFamily::density(|_, t| 1.0 + 0.1 * t);
        let c = equivalence_constant(&fam, &circle(16), &[0.0, 0.5, 1.0]).unwrap();
        assert_relative_eq!(c, 1.1f64.powi(2), epsilon = 1e-14);
    }

    #[test]
    fn curvature_of_conformal_bump_matches_formula() {
        // phi = 0.01 sin(2 pi x) sin(2 pi y): K = -e^{-2 phi} lap phi = e^{-2 phi} 8 pi^2 phi
        let pi = std::f64::consts::PI;
        let fam = MetricFamily::conformal(move |x, y, _| 0.01 * (2.0 * pi * x).sin() * (2.0 * pi * y).sin());
        let m = build_mesh(Topology::Torus2, [1.0, 1.0], [64, 64]).unwrap();
        let s = sample_metric(&fam, &m, 0.0, 1e-4).unwrap();
        for idx in 0..m.len() {
            let [x, y] = m.coords(idx);
            let phi = fam.raw(x, y, 0.0);
            let k = (-2.0 * phi).exp() * 8.0 * pi * pi * phi;
            assert!((s.curvature[idx] - k).abs() < 2e-3 * 0.01 * 8.0 * pi * pi);
        }
    }
}
