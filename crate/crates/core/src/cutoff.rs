//! Space-time cutoff `h = phi((d + a (T1 - tau)) / b)` around the base point,
//! the constants that make it a subsolution up to `-(10 / b^2) h`, and the
//! resulting lower bounds for integrals over balls.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::check::{CheckReport, Verdict};
use crate::coefficients::sample_coefficients;
use crate::distance::{cut_locus, geodesic_distance, geodesic_distance_within};
use crate::error::{Error, Result};
use crate::harness::probe_times;
use crate::mesh::Mesh;
use crate::metric::MetricSample;
use crate::operators::{ball_fractions, gradient_term, laplace_beltrami, weighted_sum};
use crate::solver::{ProblemSpec, SpaceTimeField};

/// Floor applied to `a` when its lower bound is zero.
pub const A_FLOOR: f64 = 1e-6;
/// Bounds below `e^{VACUOUS_LOG}` (about `1e-300`) carry no information.
pub const VACUOUS_LOG: f64 = -690.7755278982137;

type Real = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-dimensional profile `phi` with its first two derivatives.
#[derive(Clone)]
pub struct CutoffProfile {
    pub name: String,
    value: Real,
    first: Real,
    second: Real,
}

impl fmt::Debug for CutoffProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CutoffProfile").field("name", &self.name).finish()
    }
}

impl CutoffProfile {
    /// `cos^2(pi (s - 1) / 2)` on `[1, 2]`, 1 to the left and 0 to the right.
    pub fn cos_squared() -> Self {
        let inside = |s: f64| (1.0..2.0).contains(&s);
        Self::custom(
            "cos2",
            move |s| {
                if s < 1.0 {
                    1.0
                } else if s >= 2.0 {
                    0.0
                } else {
                    (0.5 * PI * (s - 1.0)).cos().powi(2)
                }
            },
            move |s| if inside(s) { -0.5 * PI * (PI * (s - 1.0)).sin() } else { 0.0 },
            move |s| if inside(s) { -0.5 * PI * PI * (PI * (s - 1.0)).cos() } else { 0.0 },
        )
    }

    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), value: Arc::new(value), first: Arc::new(first), second: Arc::new(second) }
    }

    pub fn value(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        (self.first)(s)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        (self.second)(s)
    }
}

pub fn build_profile() -> CutoffProfile {
    CutoffProfile::cos_squared()
}

/// Samples `[0.5, 2.5]` on `samples + 1` points and checks the plateau
/// values, strict decrease on `[1, 2]`, `(phi')^2 <= 10 phi` and `phi'' >= -10 phi`.
pub fn profile_inequality_check(profile: &CutoffProfile, samples: usize) -> CheckReport {
    let samples = samples.max(10_000);
    let grid = |k: usize| 0.5 + 2.0 * k as f64 / samples as f64;
    let mut max_ratio: f64 = 0.0;
    let mut min_second = f64::INFINITY;
    let mut shape_ok = true;
    let mut prev_inside: Option<f64> = None;
    for k in 0..=samples {
        let s = grid(k);
        let (v, d1, d2) = (profile.value(s), profile.derivative(s), profile.second_derivative(s));
        if v > 0.0 {
            max_ratio = max_ratio.max(d1 * d1 / v);
        } else if d1 != 0.0 {
            max_ratio = f64::INFINITY;
        }
        min_second = min_second.min(d2 + 10.0 * v);
        if (s <= 1.0 && v != 1.0) || (s >= 2.0 && v != 0.0) || !(0.0..=1.0).contains(&v) {
            shape_ok = false;
        }
        if (1.0..=2.0).contains(&s) {
            if prev_inside.is_some_and(|p| v >= p) {
                shape_ok = false;
            }
            prev_inside = Some(v);
        }
    }
    CheckReport::upper("cutoff-profile", max_ratio, 10.0, 0.0)
        .require(min_second >= 0.0, format!("min phi'' + 10 phi = {min_second:.6e} < 0"))
        .require(shape_ok, "profile is not 1 on (-inf, 1], 0 on [2, inf) and strictly decreasing between")
        .with_note(format!("{}: max (phi')^2 / phi = {max_ratio:.10}, min phi'' + 10 phi = {min_second:.6e}", profile.name))
}

/// Measured inputs of the cutoff construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffInputs {
    pub r_star: f64,
    /// Equivalence constant between `g(0)` and the reference metric.
    pub c0: f64,
    pub k_star: f64,
    pub k1: f64,
    pub k2: f64,
    pub horizon: f64,
    pub dimension: usize,
}

/// Cutoff constants with the formula that produced each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub inputs: CutoffInputs,
    pub r_hat: f64,
    pub b: f64,
    pub a: f64,
    pub t1: f64,
    /// `-(10 / b^2 + n K* + K2) T1`.
    pub log_bound: f64,
    pub provenance: BTreeMap<String, String>,
}

impl CutoffSpec {
    pub fn from_inputs(inputs: CutoffInputs) -> Self {
        let CutoffInputs { r_star, c0, k_star, k1, k2, horizon, dimension } = inputs;
        let n = dimension as f64;
        let r_hat = 0.5 * (-2.0 * k_star * horizon).exp() * r_star / c0;
        let b = 0.5 * r_hat;
        let a = (10.0 * (n - 1.0) / r_hat + 2.0 * k_star * r_hat + k1).max(A_FLOOR);
        let t1 = horizon.min((b - r_hat / 10.0) / a);
        let log_bound = -(10.0 / (b * b) + n * k_star + k2) * t1;
        let provenance = [
            ("r_hat", "1/2 e^{-2 K* T} C0^-1 r*"),
            ("b", "r_hat / 2"),
            ("a", "max(10 (n-1) / r_hat + 2 K* r_hat + K1, 1e-6)"),
            ("t1", "min(T, (b - r_hat / 10) / a)"),
            ("log_bound", "-(10 / b^2 + n K* + K2) T1"),
            ("k_star", "sup over ball x [0, T] of max(|R_ij|_g, |Rc|_g), operator norms"),
            ("k1", "sup over ball x [0, T] of |X|_g"),
            ("k2", "sup over ball x [0, T1] of (Q + div X)"),
            ("c0", "reference metric is g(0)"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self { inputs, r_hat, b, a, t1, log_bound, provenance }
    }

    /// `e^{log_bound}`; underflows to 0 for vacuous bounds.
    pub fn lower_bound(&self) -> f64 {
        self.log_bound.exp()
    }
}

/// Measures `K*`, `K1`, `K2` on `B_{g(0)}(x0, r*)`, derives the constants and
/// checks their two defining inequalities, the compactness of the ball and
/// `B_{g(tau)}(x0, r_hat) ⊂ B_{g(0)}(x0, r*)`.
pub fn derive_cutoff_constants(spec: &ProblemSpec, r_star: f64) -> Result<(CutoffSpec, CheckReport)> {
    let mesh = &spec.mesh;
    let x0 = spec.base_point;
    if !(r_star > 0.0) {
        return Err(Error::InvalidArgument(format!("r* must be positive, got {r_star}")));
    }
    let s0 = spec.sample(0.0)?;
    let d_ref = geodesic_distance(&s0, mesh, x0);
    let ball: Vec<usize> = (0..mesh.len()).filter(|&i| d_ref[i] <= r_star).collect();
    let compact = mesh.boundary_nodes().iter().all(|&b| d_ref[b] > r_star);

    let times = probe_times(spec);
    let (mut k_star, mut k1): (f64, f64) = (0.0, 0.0);
    let mut per_time = Vec::with_capacity(times.len());
    for &t in &times {
        let m = spec.sample(t)?;
        let c = sample_coefficients(&spec.coefficients, &m, mesh);
        let mut k2_t = f64::NEG_INFINITY;
        for &i in &ball {
            k_star = k_star.max(m.rij_norm[i]).max(m.curvature[i].abs());
            k1 = k1.max(c.drift_norm[i]);
            k2_t = k2_t.max(c.potential[i] + c.divergence[i]);
        }
        per_time.push((t, k2_t));
    }
    let mut inputs = CutoffInputs {
        r_star,
        c0: 1.0,
        k_star,
        k1,
        k2: 0.0,
        horizon: spec.horizon,
        dimension: mesh.dimension(),
    };
    let t1 = CutoffSpec::from_inputs(inputs).t1;
    inputs.k2 = per_time.iter().filter(|(t, _)| *t <= t1 + 1e-12).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let cutoff = CutoffSpec::from_inputs(inputs);

    let n = mesh.dimension() as f64;
    let a_ok = cutoff.a >= 10.0 * (n - 1.0) / cutoff.r_hat + 2.0 * k_star * cutoff.r_hat + k1;
    let t1_ok = cutoff.r_hat / 10.0 + cutoff.a * cutoff.t1 <= cutoff.b * (1.0 + 1e-14);
    let margin = 3.0 * mesh.max_spacing() * s0.scale.iter().cloned().fold(0.0, f64::max);
    let mut contained = true;
    let stride = times.len().div_ceil(16).max(1);
    for &t in times.iter().step_by(stride) {
        let d = geodesic_distance_within(&spec.sample(t)?, mesh, x0, cutoff.r_hat + margin);
        contained &= (0..mesh.len()).all(|i| d[i] > cutoff.r_hat || d_ref[i] <= r_star);
    }
    let report = CheckReport::lower("cutoff-constants", cutoff.t1, spec.dt, 0.0)
        .require(cutoff.t1 > spec.dt, format!("T1 = {:.6e} does not exceed dt = {}", cutoff.t1, spec.dt))
        .require(a_ok, "a below its lower bound")
        .require(t1_ok, "r_hat / 10 + a T1 exceeds b")
        .require(compact, "closed reference ball meets the boundary")
        .require(contained, "B_{g(tau)}(x0, r_hat) leaves the reference ball")
        .with_note(format!(
            "r_hat = {:.6e}, b = {:.6e}, a = {:.6e}, T1 = {:.6e}, K* = {:.6e}, K1 = {:.6e}, K2 = {:.6e}",
            cutoff.r_hat, cutoff.b, cutoff.a, cutoff.t1, k_star, k1, inputs.k2
        ));
    Ok((cutoff, report))
}

/// `h(., tau)` and the distance it was built from.
pub fn build_cutoff_field(
    cutoff: &CutoffSpec,
    profile: &CutoffProfile,
    sample: &MetricSample,
    mesh: &Mesh,
    source: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tau = sample.tau;
    if tau < -1e-12 || tau > cutoff.t1 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("tau = {tau} outside [0, T1 = {}]", cutoff.t1)));
    }
    let margin = 3.0 * mesh.max_spacing() * sample.scale.iter().cloned().fold(0.0, f64::max);
    let d = geodesic_distance_within(sample, mesh, source, cutoff.r_hat + margin);
    let shift = cutoff.a * (cutoff.t1 - tau);
    let h = d.iter().map(|r| profile.value((r + shift) / cutoff.b)).collect();
    Ok((h, d))
}

/// Default discretisation tolerance `c (h + dt)` of [`cutoff_heat_inequality_check`].
pub fn cutoff_tolerance(spec: &ProblemSpec, c: f64) -> f64 {
    c * (spec.mesh.max_spacing() + spec.dt)
}

/// Checks `d_tau h + Delta h - nabla_X h >= -(10 / b^2) h - tol` at every
/// step in `[0, T1]` and every node off the discrete cut locus.
///
/// `d_tau h` is a centered difference of the step fields (one-sided at the
/// ends of the window).
pub fn cutoff_heat_inequality_check(cutoff: &CutoffSpec, profile: &CutoffProfile, spec: &ProblemSpec, tol: f64) -> Result<CheckReport> {
    let mesh = &spec.mesh;
    let last = ((cutoff.t1 / spec.dt) + 1e-9).floor() as usize;
    if last < 1 {
        return Ok(CheckReport::new("cutoff-heat-inequality", 0.0, 0.0, tol, Verdict::Fail).with_note("T1 shorter than one step"));
    }
    let mut fields = Vec::with_capacity(last + 1);
    for j in 0..=last {
        let sample = spec.sample(spec.time(j))?;
        let (h, d) = build_cutoff_field(cutoff, profile, &sample, mesh, spec.base_point)?;
        fields.push((sample, h, d));
    }
    let k = 10.0 / (cutoff.b * cutoff.b);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0usize, 0.0f64, 0.0f64, 0.0f64);
    let mut excluded = std::collections::BTreeSet::new();
    for j in 0..=last {
        let (sample, h, d) = &fields[j];
        let (lo, hi) = (j.saturating_sub(1), (j + 1).min(last));
        let span = spec.time(hi) - spec.time(lo);
        let coeffs = sample_coefficients(&spec.coefficients, sample, mesh);
        let lap = laplace_beltrami(h, sample, mesh);
        let grad = gradient_term(h, &coeffs.drift, mesh);
        let cut = cut_locus(d, sample, mesh);
        for i in 0..mesh.len() {
            if mesh.is_boundary(i) {
                continue;
            }
            if cut[i] {
                if h[i] > 0.0 {
                    excluded.insert(i);
                }
                continue;
            }
            let dh = (fields[hi].1[i] - fields[lo].1[i]) / span;
            let lhs = dh + lap[i] - grad[i];
            let rhs = -k * h[i];
            if rhs - lhs > worst {
                worst = rhs - lhs;
                worst_at = (i, spec.time(j), lhs, rhs);
            }
        }
    }
    Ok(CheckReport::upper("cutoff-heat-inequality", worst, 0.0, tol)
        .with_note(format!("worst node {} at tau {}: lhs {:.6e}, rhs {:.6e}", worst_at.0, worst_at.1, worst_at.2, worst_at.3))
        .with_note(format!("excluded cut-locus nodes in the support: {excluded:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundKind {
    /// `int_{B(r*)} u dmu_{g(tau)} >= e^{log_bound} int_{B(r_hat/10)} u dmu_{g(0)}`.
    SolutionOnBall,
    /// `int_{B(r*)} H dmu_{g(tau)} >= e^{log_bound}`.
    FundamentalSolution,
}

/// Worst log-ratio of the ball integral to its lower bound over `(0, T1]`.
///
/// Comparisons are made in log space. When `log_bound` is below
/// [`VACUOUS_LOG`] a passing comparison is reported as `Vacuous`.
pub fn local_lower_bound_check(
    run: &SpaceTimeField,
    spec: &ProblemSpec,
    cutoff: &CutoffSpec,
    kind: LowerBoundKind,
    tol: f64,
) -> Result<CheckReport> {
    let mesh = &spec.mesh;
    let s0 = spec.sample(0.0)?;
    let d_ref = geodesic_distance(&s0, mesh, spec.base_point);
    let outer = ball_fractions(&d_ref, cutoff.inputs.r_star, &s0, mesh);
    let reference = match kind {
        LowerBoundKind::FundamentalSolution => 1.0,
        LowerBoundKind::SolutionOnBall => {
            let inner = ball_fractions(&d_ref, cutoff.r_hat / 10.0, &s0, mesh);
            let w: Vec<f64> = s0.volume_weights(mesh).iter().zip(&inner).map(|(w, f)| w * f).collect();
            weighted_sum(&run.values[0], &w)
        }
    };
    let id = match kind {
        LowerBoundKind::FundamentalSolution => "local-lower-bound-kernel",
        LowerBoundKind::SolutionOnBall => "local-lower-bound-solution",
    };
    if reference <= 0.0 {
        return Ok(CheckReport::new(id, 0.0, 0.0, tol, Verdict::Skip).with_note("u vanishes on the inner ball"));
    }
    let log_rhs = cutoff.log_bound + reference.ln() + (1.0 - tol).ln();
    let mut worst = f64::INFINITY;
    let mut worst_tau = 0.0;
    let mut worst_measured = 0.0;
    for j in 1..run.len() {
        let t = run.times[j];
        if t > cutoff.t1 * (1.0 + 1e-12) {
            break;
        }
        let w: Vec<f64> = spec.volume_weights(t)?.iter().zip(&outer).map(|(w, f)| w * f).collect();
        let measured = weighted_sum(&run.values[j], &w);
        let gap = if measured > 0.0 { measured.ln() - log_rhs } else { f64::NEG_INFINITY };
        if gap < worst {
            worst = gap;
            worst_tau = t;
            worst_measured = measured;
        }
    }
    if !worst.is_finite() && worst > 0.0 {
        return Ok(CheckReport::new(id, 0.0, cutoff.log_bound, tol, Verdict::Skip).with_note("no steps in (0, T1]"));
    }
    let mut report = CheckReport::lower(id, worst_measured.ln(), log_rhs, 0.0)
        .at_tau(worst_tau)
        .with_note(format!("log bound {:.6e}, reference {:.6e}", cutoff.log_bound, reference))
        .with_note(format!("min ratio measured / bound = e^{worst:.6}"));
    if report.passed() && cutoff.log_bound < VACUOUS_LOG {
        report.verdict = Verdict::Vacuous;
        report = report.with_note("bound below 1e-300");
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Coefficients;
    use crate::mesh::{build_mesh, Topology};
    use crate::metric::{MetricFamily, MetricKind};
    use crate::solver::fundamental_solution;
    use approx::assert_relative_eq;

    fn inputs(r_star: f64, k_star: f64, n: usize, horizon: f64) -> CutoffInputs {
        CutoffInputs { r_star, c0: 1.0, k_star, k1: 0.0, k2: 0.0, horizon, dimension: n }
    }

    #[test]
    fn profile_values_and_constraints() {
        let p = build_profile();
        assert_eq!(p.value(1.0), 1.0);
        assert_eq!(p.value(2.0), 0.0);
        assert_relative_eq!(p.value(1.5), 0.5, epsilon = 1e-15);
        let r = profile_inequality_check(&p, 20_000);
        assert!(r.passed(), "{r}");
        assert!((r.measured - PI * PI).abs() < 1e-6, "{}", r.measured);
    }

    #[test]
    fn steep_profile_fails() {
        let p = CutoffProfile::custom(
            "cos2-steep",
            |s| if s < 1.0 { 1.0 } else if s > 1.5 { 0.0 } else { (PI * (s - 1.0)).cos().powi(2) },
            |s| if (1.0..=1.5).contains(&s) { -PI * (2.0 * PI * (s - 1.0)).sin() } else { 0.0 },
            |s| if (1.0..=1.5).contains(&s) { -2.0 * PI * PI * (2.0 * PI * (s - 1.0)).cos() } else { 0.0 },
        );
        assert!(!profile_inequality_check(&p, 10_000).passed());
    }

    #[test]
    fn constant_examples() {
        let c = CutoffSpec::from_inputs(inputs(4.0, 0.0, 1, 0.5));
        assert_eq!((c.r_hat, c.b, c.a, c.t1), (2.0, 1.0, A_FLOOR, 0.5));
        assert_relative_eq!(c.lower_bound(), 0.0067379, epsilon = 1e-7);
        let c = CutoffSpec::from_inputs(inputs(4.0, 0.0, 2, 1.0));
        assert_eq!(c.a, 5.0);
        assert_relative_eq!(c.t1, 0.16, epsilon = 1e-15);
        let c = CutoffSpec::from_inputs(inputs(4.0, 0.1, 1, 1.0));
        assert_relative_eq!(c.r_hat, 1.6375, epsilon = 1e-4);
        let c = CutoffSpec::from_inputs(inputs(0.4, 0.0, 1, 1.0));
        assert_relative_eq!(c.log_bound, -1000.0, epsilon = 1e-9);
        assert_eq!(c.lower_bound(), 0.0);
    }

    #[test]
    fn serialises_with_ledger() {
        let c = CutoffSpec::from_inputs(inputs(4.0, 0.1, 2, 1.0));
        let text = toml::to_string(&c).unwrap();
        let back: CutoffSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(back.provenance.contains_key("t1"));
    }

    fn big_circle(n: usize, dt: f64, horizon: f64) -> ProblemSpec {
        let mesh = build_mesh(Topology::Circle, [10.0, 0.0], [n, 0]).unwrap();
        ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::Density), n / 2, horizon, dt).with_delta_width(0.1)
    }

    #[test]
    fn derived_constants_on_flat_circle() {
        let spec = big_circle(500, 0.01, 0.5);
        let (c, report) = derive_cutoff_constants(&spec, 4.0).unwrap();
        assert!(report.passed(), "{report} {:?}", report.notes);
        assert_eq!(c.r_hat, 2.0);
        assert_eq!(c.t1, 0.5);
        let p = build_profile();
        let s = spec.sample(c.t1).unwrap();
        let (h, d) = build_cutoff_field(&c, &p, &s, &spec.mesh, spec.base_point).unwrap();
        assert_eq!(h[spec.base_point], 1.0);
        for i in 0..h.len() {
            assert!((0.0..=1.0).contains(&h[i]));
            if h[i] > 0.0 {
                assert!(d[i] < c.r_hat);
            }
        }
        // d = 1.5 b at tau = T1
        let i = spec.base_point + 75;
        assert_relative_eq!(h[i], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn window_too_short_fails() {
        let mesh = build_mesh(Topology::Torus2, [1.0, 1.0], [32, 32]).unwrap();
        let spec = ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::ConformalExponent), 16 * 32 + 16, 0.1, 0.01);
        let (c, report) = derive_cutoff_constants(&spec, 0.1).unwrap();
        assert!(c.t1 < spec.dt);
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn heat_inequality_on_expanding_circle() {
        let fam = MetricFamily::density(|_, t| 1.0 + 0.1 * t).with_time_derivative(|_, _, _| 0.1);
        let spec = ProblemSpec { metric: fam, ..big_circle(500, 0.01, 1.0) };
        let (c, report) = derive_cutoff_constants(&spec, 4.0).unwrap();
        assert!(report.passed(), "{report}");
        assert!((c.inputs.k_star - 0.1).abs() < 1e-12);
        let r = cutoff_heat_inequality_check(&c, &build_profile(), &spec, cutoff_tolerance(&spec, 1.0)).unwrap();
        assert!(r.passed(), "{r} {:?}", r.notes);
    }

    #[test]
    fn kernel_lower_bound_and_vacuous_case() {
        let spec = big_circle(500, 0.01, 0.5);
        let (c, _) = derive_cutoff_constants(&spec, 4.0).unwrap();
        let run = fundamental_solution(&spec).unwrap();
        let r = local_lower_bound_check(&run, &spec, &c, LowerBoundKind::FundamentalSolution, 1e-3).unwrap();
        assert!(r.passed(), "{r}");
        let r = local_lower_bound_check(&run, &spec, &c, LowerBoundKind::SolutionOnBall, 1e-3).unwrap();
        assert!(r.passed(), "{r}");

        let mesh = build_mesh(Topology::Circle, [1.0, 0.0], [128, 0]).unwrap();
        let spec = ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::Density), 64, 1.0, 1e-3)
            .with_coefficients(Coefficients::new());
        let (c, _) = derive_cutoff_constants(&spec, 0.4).unwrap();
        assert_relative_eq!(c.log_bound, -1000.0, epsilon = 1e-9);
        let run = fundamental_solution(&spec).unwrap();
        let r = local_lower_bound_check(&run, &spec, &c, LowerBoundKind::FundamentalSolution, 1e-3).unwrap();
        assert_eq!(r.verdict, Verdict::Vacuous);
    }
}
