//! Drift field `X` and potential `Q` of the operator `d/dtau - Delta + nabla_X + Q`.

use std::fmt;
use std::sync::Arc;

use crate::expr::{ScalarFn, VectorFn};
use crate::mesh::Mesh;
use crate::metric::MetricSample;
use crate::operators::divergence_of;

/// The potential `Q`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    Field(ScalarFn),
    /// `Q = R`, the trace of `R_ij` (the adjoint heat equation case).
    TraceR,
    /// `Q = R + f`.
    TraceRPlus(ScalarFn),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Field(_) => write!(f, "Field(..)"),
            Potential::TraceR => write!(f, "TraceR"),
            Potential::TraceRPlus(_) => write!(f, "TraceRPlus(..)"),
        }
    }
}

#[derive(Clone)]
pub struct Coefficients {
    pub drift: Option<VectorFn>,
    pub potential: Potential,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("drift", &self.drift.as_ref().map(|_| ".."))
            .field("potential", &self.potential)
            .finish()
    }
}

impl Default for Coefficients {
    fn default() -> Self {
        Self { drift: None, potential: Potential::Zero }
    }
}

impl Coefficients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_drift(mut self, x: impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(x));
        self
    }

    pub fn with_potential(mut self, q: Potential) -> Self {
        self.potential = q;
        self
    }

    pub fn with_potential_fn(self, q: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.with_potential(Potential::Field(Arc::new(q)))
    }

    /// Coefficients pulled back by the translation `x -> x + shift`.
    pub fn translated(&self, shift: [f64; 2]) -> Self {
        let [dx, dy] = shift;
        let move_scalar = |q: &ScalarFn| -> ScalarFn {
            let q = q.clone();
            Arc::new(move |x, y, t| q(x + dx, y + dy, t))
        };
        let drift = self.drift.as_ref().map(|v| -> VectorFn {
            let v = v.clone();
            Arc::new(move |x, y, t| v(x + dx, y + dy, t))
        });
        let potential = match &self.potential {
            Potential::Zero => Potential::Zero,
            Potential::Field(q) => Potential::Field(move_scalar(q)),
            Potential::TraceR => Potential::TraceR,
            Potential::TraceRPlus(q) => Potential::TraceRPlus(move_scalar(q)),
        };
        Self { drift, potential }
    }

    /// `Q + extra`.
    pub fn plus_potential(&self, extra: ScalarFn) -> Self {
        let sum = |q: &ScalarFn| -> ScalarFn {
            let (q, e) = (q.clone(), extra.clone());
            Arc::new(move |x, y, t| q(x, y, t) + e(x, y, t))
        };
        let potential = match &self.potential {
            Potential::Zero => Potential::Field(extra.clone()),
            Potential::Field(q) => Potential::Field(sum(q)),
            Potential::TraceR => Potential::TraceRPlus(extra.clone()),
            Potential::TraceRPlus(q) => Potential::TraceRPlus(sum(q)),
        };
        Self { drift: self.drift.clone(), potential }
    }

    /// `X + extra`.
    pub fn plus_drift(&self, extra: VectorFn) -> Self {
        let drift: VectorFn = match &self.drift {
            None => extra,
            Some(v) => {
                let v = v.clone();
                Arc::new(move |x, y, t| {
                    let (a, b) = (v(x, y, t), extra(x, y, t));
                    [a[0] + b[0], a[1] + b[1]]
                })
            }
        };
        Self { drift: Some(drift), potential: self.potential.clone() }
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }
}

/// `X`, `Q` and `div X` sampled on the lattice at one time.
#[derive(Debug, Clone)]
pub struct CoefficientSample {
    pub tau: f64,
    /// Coordinate components `X^i` per node.
    pub drift: Vec<[f64; 2]>,
    pub potential: Vec<f64>,
    pub divergence: Vec<f64>,
    /// `|X|_{g(tau)}` per node.
    pub drift_norm: Vec<f64>,
}

impl CoefficientSample {
    pub fn has_drift(&self) -> bool {
        self.drift.iter().any(|v| v[0] != 0.0 || v[1] != 0.0)
    }

    /// `div X + R - Q` per node.
    pub fn mass_rate(&self, metric: &MetricSample) -> Vec<f64> {
        (0..self.potential.len())
            .map(|i| self.divergence[i] + metric.trace_r[i] - self.potential[i])
            .collect()
    }
}

pub fn sample_coefficients(coeffs: &Coefficients, metric: &MetricSample, mesh: &Mesh) -> CoefficientSample {
    let tau = metric.tau;
    let len = mesh.len();
    let drift: Vec<[f64; 2]> = match &coeffs.drift {
        Some(x) => (0..len)
            .map(|i| {
                let [cx, cy] = mesh.coords(i);
                let v = x(cx, cy, tau);
                if mesh.dimension() == 1 {
                    [v[0], 0.0]
                } else {
                    v
                }
            })
            .collect(),
        None => vec![[0.0, 0.0]; len],
    };
    let potential: Vec<f64> = (0..len)
        .map(|i| {
            let [cx, cy] = mesh.coords(i);
            match &coeffs.potential {
                Potential::Zero => 0.0,
                Potential::Field(q) => q(cx, cy, tau),
                Potential::TraceR => metric.trace_r[i],
                Potential::TraceRPlus(q) => metric.trace_r[i] + q(cx, cy, tau),
            }
        })
        .collect();
    let divergence = if coeffs.drift.is_some() {
        divergence_of(&drift, metric, mesh)
    } else {
        vec![0.0; len]
    };
    let drift_norm = drift
        .iter()
        .zip(&metric.scale)
        .map(|(v, s)| s * (v[0] * v[0] + v[1] * v[1]).sqrt())
        .collect();
    CoefficientSample {
        tau,
        drift,
        potential,
        divergence,
        drift_norm,
    }
}
