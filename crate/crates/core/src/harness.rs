//! Mass identities and bounds, the reverse Poincare inequalities with the
//! explicit choice of `A`, the mean-value ratio probe, and the duality
//! identity behind uniqueness.

use std::f64::consts::PI;

use crate::check::{CheckReport, Verdict};
use crate::coefficients::sample_coefficients;
use crate::distance::geodesic_distance;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Topology};
use crate::metric::MetricSample;
use crate::operators::{ball_fractions, dirichlet_energy, weighted_sum};
use crate::solver::{fundamental_solution, solve_adjoint, Boundary, ProblemSpec, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassTolerances {
    /// Per-step residual of the discrete mass identity.
    pub identity: f64,
    /// Relative slack on `mass <= e^{C_rate tau}`.
    pub bound_rel: f64,
    /// Allowed drift per step when mass is conserved.
    pub conservation_per_step: f64,
}

impl Default for MassTolerances {
    fn default() -> Self {
        Self { identity: 1e-6, bound_rel: 1e-3, conservation_per_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassReport {
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    /// `sup (div X + R - Q)` over the lattice and the step midpoints.
    pub c_rate: f64,
    /// `mass(0) e^{C_rate tau}` per step.
    pub bound: Vec<f64>,
    /// `max mass / bound`.
    pub worst_ratio: f64,
    /// `|d mass / d tau - int (div X + R - Q) u dmu|` per step, at midpoints.
    pub identity_residuals: Vec<f64>,
    /// `X = 0` and `Q = R` on every sampled midpoint.
    pub conservative: bool,
}

pub fn mass_report(run: &SpaceTimeField, spec: &ProblemSpec) -> Result<MassReport> {
    let mesh = &spec.mesh;
    let mut c_rate = f64::NEG_INFINITY;
    let mut conservative = true;
    let mut residuals = Vec::with_capacity(run.len().saturating_sub(1));
    for j in 0..run.len().saturating_sub(1) {
        let (t0, t1) = (run.times[j], run.times[j + 1]);
        let metric = spec.sample(0.5 * (t0 + t1))?;
        let coeffs = sample_coefficients(&spec.coefficients, &metric, mesh);
        let rate = coeffs.mass_rate(&metric);
        c_rate = rate.iter().cloned().fold(c_rate, f64::max);
        if coeffs.has_drift() || coeffs.potential.iter().zip(&metric.trace_r).any(|(q, r)| (q - r).abs() > 1e-14) {
            conservative = false;
        }
        let w = metric.volume_weights(mesh);
        let predicted: f64 = (0..mesh.len())
            .map(|i| w[i] * rate[i] * 0.5 * (run.values[j][i] + run.values[j + 1][i]))
            .sum();
        residuals.push(((run.masses[j + 1] - run.masses[j]) / (t1 - t0) - predicted).abs());
    }
    if !c_rate.is_finite() {
        c_rate = 0.0;
    }
    let m0 = run.masses[0];
    let bound: Vec<f64> = run.times.iter().map(|t| m0 * (c_rate * (t - run.times[0])).exp()).collect();
    let worst_ratio = run.masses.iter().zip(&bound).map(|(m, b)| m / b).fold(f64::NEG_INFINITY, f64::max);
    Ok(MassReport {
        times: run.times.clone(),
        masses: run.masses.clone(),
        c_rate,
        bound,
        worst_ratio,
        identity_residuals: residuals,
        conservative,
    })
}

fn max_drift(masses: &[f64]) -> (f64, usize) {
    let m0 = masses[0];
    masses
        .iter()
        .enumerate()
        .map(|(j, m)| ((m - m0).abs(), j))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
}

fn first_violation(values: &[f64], limit: impl Fn(usize) -> f64) -> Option<usize> {
    values.iter().enumerate().position(|(j, v)| *v > limit(j))
}

/// Mass identity, exponential bound and (when `X = 0`, `Q = R`) exact
/// conservation on a closed mesh.
pub fn mass_evolution_check(run: &SpaceTimeField, spec: &ProblemSpec, tol: &MassTolerances) -> Result<Vec<CheckReport>> {
    if !spec.mesh.topology().is_closed() {
        return Err(Error::InvalidArgument("mass evolution check needs a closed mesh".into()));
    }
    let rep = mass_report(run, spec)?;
    let worst_identity = rep.identity_residuals.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut identity = CheckReport::upper("mass-identity", worst_identity, 0.0, tol.identity);
    if let Some(j) = first_violation(&rep.identity_residuals, |_| tol.identity) {
        identity = identity.with_note(format!("first violating step {j}"));
    }
    out.push(identity);
    let mut bound = CheckReport::upper("mass-bound", rep.worst_ratio, 1.0, tol.bound_rel)
        .with_note(format!("C_rate = {:.6e}", rep.c_rate));
    let ratios: Vec<f64> = rep.masses.iter().zip(&rep.bound).map(|(m, b)| m / b).collect();
    if let Some(j) = first_violation(&ratios, |_| 1.0 + tol.bound_rel) {
        bound = bound.with_note(format!("first violating step {j}"));
    }
    out.push(bound);
    if rep.conservative {
        let steps = run.len().saturating_sub(1).max(1) as f64;
        let (drift, at) = max_drift(&rep.masses);
        out.push(
            CheckReport::upper("mass-conservation", drift, 0.0, tol.conservation_per_step * steps)
                .with_note(format!("largest drift at step {at}")),
        );
    }
    Ok(out)
}

/// Mass bounds on an interval with Dirichlet or Neumann conditions.
pub fn boundary_mass_check(run: &SpaceTimeField, spec: &ProblemSpec, tol: &MassTolerances) -> Result<Vec<CheckReport>> {
    let mesh = &spec.mesh;
    if mesh.topology() != Topology::Interval {
        return Err(Error::InvalidArgument("boundary mass check needs an interval".into()));
    }
    let rep = mass_report(run, spec)?;
    let m0 = rep.masses[0];
    let steps = run.len().saturating_sub(1).max(1) as f64;
    let mut out = Vec::new();
    let dirichlet = spec.boundary.is_dirichlet();
    if dirichlet {
        // <X, nu> >= 0: outward normal is -d/dx on the left end, +d/dx on the right
        let last = mesh.len() - 1;
        let mut worst = f64::INFINITY;
        for &t in &run.times {
            let metric = spec.sample(t)?;
            let c = sample_coefficients(&spec.coefficients, &metric, mesh);
            let left = -c.drift[0][0] * metric.g_components[0];
            let right = c.drift[last][0] * metric.g_components[last];
            worst = worst.min(left).min(right);
        }
        out.push(CheckReport::lower("boundary-precondition", worst, 0.0, 0.0).with_note("min <X, nu> over boundary and steps"));
    }
    match (&spec.boundary, rep.conservative) {
        (Boundary::DirichletZero | Boundary::DirichletData(_), true) => {
            let peak = rep.masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut bound = CheckReport::upper("dirichlet-mass-bound", peak / m0, 1.0, 1e-6);
            if let Some(j) = first_violation(&rep.masses, |_| m0 * (1.0 + 1e-6)) {
                bound = bound.with_note(format!("first violating step {j}"));
            }
            out.push(bound);
            let increases: Vec<f64> = rep.masses.windows(2).map(|w| w[1] - w[0]).collect();
            let worst = increases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut mono = CheckReport::upper("dirichlet-monotone", worst, 0.0, 1e-12 * m0);
            if let Some(j) = first_violation(&increases, |_| 1e-12 * m0) {
                mono = mono.with_note(format!("mass increases at step {j}"));
            }
            out.push(mono);
        }
        (Boundary::NeumannZero, true) => {
            let (drift, at) = max_drift(&rep.masses);
            out.push(
                CheckReport::upper("neumann-conservation", drift, 0.0, tol.conservation_per_step * steps)
                    .with_note(format!("largest drift at step {at}")),
            );
        }
        _ => {
            out.push(
                CheckReport::upper("mass-bound", rep.worst_ratio, 1.0, tol.bound_rel)
                    .with_note(format!("C_rate = {:.6e}", rep.c_rate)),
            );
        }
    }
    Ok(out)
}

/// Ingredients of the rate `A` used in `v = e^{-A tau} u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AChoice {
    pub a: f64,
    /// `1 + sup |X|_{g(tau)}`.
    pub a1: f64,
    /// `sup (R/2 + 5 A1^2 / 4 - Q)`.
    pub sup_p1: f64,
    /// `sup (-Q)`, which governs `p -> infinity`.
    pub sup_neg_q: f64,
}

pub(crate) fn probe_times(spec: &ProblemSpec) -> Vec<f64> {
    let steps = spec.steps();
    let stride = steps.div_ceil(512).max(1);
    let mut t: Vec<f64> = (0..=steps).step_by(stride).map(|j| spec.time(j)).collect();
    if (t.last().copied().unwrap_or(0.0) - spec.horizon).abs() > 0.0 {
        t.push(spec.horizon);
    }
    t
}

/// `A = max(0, sup(R/2 + 5 A1^2/4 - Q), sup(-Q))` over `region x [0, T]`.
///
/// The first term covers `p = 1`, the second `p -> infinity`; the
/// inequality is affine in `1/p`, so together they cover every `p >= 1`.
pub fn compute_a(spec: &ProblemSpec, region: Option<&[usize]>) -> Result<AChoice> {
    let mesh = &spec.mesh;
    let nodes: Vec<usize> = region.map(|r| r.to_vec()).unwrap_or_else(|| (0..mesh.len()).collect());
    let times = probe_times(spec);
    let mut sup_x: f64 = 0.0;
    let mut samples = Vec::with_capacity(times.len());
    for &t in &times {
        let metric = spec.sample(t)?;
        let c = sample_coefficients(&spec.coefficients, &metric, mesh);
        for &i in &nodes {
            sup_x = sup_x.max(c.drift_norm[i]);
        }
        samples.push((metric, c));
    }
    let a1 = 1.0 + sup_x;
    let (mut sup_p1, mut sup_neg_q) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (metric, c) in &samples {
        for &i in &nodes {
            sup_p1 = sup_p1.max(0.5 * metric.trace_r[i] + 1.25 * a1 * a1 - c.potential[i]);
            sup_neg_q = sup_neg_q.max(-c.potential[i]);
        }
    }
    Ok(AChoice { a: 0.0f64.max(sup_p1).max(sup_neg_q), a1, sup_p1, sup_neg_q })
}

/// Node-wise `min (Q + A - R/(2p) - 5 A1^2/(4p))` over `region x [0, T]` and `ps`.
pub fn a_choice_check(spec: &ProblemSpec, region: Option<&[usize]>, choice: &AChoice, ps: &[f64]) -> Result<CheckReport> {
    let mesh = &spec.mesh;
    let nodes: Vec<usize> = region.map(|r| r.to_vec()).unwrap_or_else(|| (0..mesh.len()).collect());
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0usize, 0.0);
    for t in probe_times(spec) {
        let metric = spec.sample(t)?;
        let c = sample_coefficients(&spec.coefficients, &metric, mesh);
        for &p in ps {
            for &i in &nodes {
                let v = c.potential[i] + choice.a - metric.trace_r[i] / (2.0 * p) - 5.0 * choice.a1 * choice.a1 / (4.0 * p);
                if v < worst {
                    worst = v;
                    at = (p, i, t);
                }
            }
        }
    }
    Ok(CheckReport::lower("a-choice", worst, 0.0, 1e-12)
        .with_note(format!("A = {:.6e}, A1 = {:.6e}", choice.a, choice.a1))
        .with_note(format!("minimum at p = {}, node {}, tau = {}", at.0, at.1, at.2)))
}

/// `|grad f|^2_g` per node using the larger of the two one-sided differences on each axis.
fn gradient_sq_upper(f: &[f64], sample: &MetricSample, mesh: &Mesh) -> Vec<f64> {
    let [hx, hy] = mesh.spacing();
    let (nx, ny) = (mesh.nx(), mesh.ny());
    (0..mesh.len())
        .map(|idx| {
            let (i, j) = mesh.ij(idx);
            let one_sided = |a: Option<usize>, b: Option<usize>, h: f64| -> f64 {
                let fwd = a.map(|k| ((f[k] - f[idx]) / h).powi(2)).unwrap_or(0.0);
                let bwd = b.map(|k| ((f[idx] - f[k]) / h).powi(2)).unwrap_or(0.0);
                fwd.max(bwd)
            };
            let gx = match mesh.topology() {
                Topology::Interval => one_sided((i + 1 < nx).then_some(i + 1), (i > 0).then(|| i - 1), hx),
                _ => one_sided(
                    Some(mesh.index((i + 1) % nx, j)),
                    Some(mesh.index((i + nx - 1) % nx, j)),
                    hx,
                ),
            };
            let gy = if mesh.topology() == Topology::Torus2 {
                one_sided(Some(mesh.index(i, (j + 1) % ny)), Some(mesh.index(i, (j + ny - 1) % ny)), hy)
            } else {
                0.0
            };
            (gx + gy) / sample.g_components[idx]
        })
        .collect()
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Cutoff `psi(x, tau) = ramp(tau) bump(x)` on `D = B_{g(0)}(center, radius)`,
/// with `ramp` linear from 0 at `tau1` to 1 at `tau2` and
/// `bump = cos^2(pi d / (2 radius))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversePoincareProbe {
    pub tau1: f64,
    pub tau2: f64,
    pub center: usize,
    pub radius: f64,
    pub p: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReversePoincareOutcome {
    /// Measured `max (psi d_tau psi + |grad psi|^2)`.
    pub l: f64,
    pub gradient_lhs: f64,
    pub gradient_rhs: f64,
    pub terminal_lhs: f64,
    pub terminal_rhs: f64,
    pub reports: Vec<CheckReport>,
}

pub fn reverse_poincare_check(run: &SpaceTimeField, spec: &ProblemSpec, probe: &ReversePoincareProbe) -> Result<ReversePoincareOutcome> {
    let mesh = &spec.mesh;
    if !(probe.tau2 > probe.tau1) || probe.p < 1.0 {
        return Err(Error::InvalidArgument("need tau1 < tau2 and p >= 1".into()));
    }
    let d = geodesic_distance(&spec.sample(0.0)?, mesh, probe.center);
    let region: Vec<usize> = (0..mesh.len()).filter(|&i| d[i] <= probe.radius).collect();
    let bump: Vec<f64> = d
        .iter()
        .map(|&r| if r < probe.radius { (PI * r / (2.0 * probe.radius)).cos().powi(2) } else { 0.0 })
        .collect();
    let (i1, i2) = (run.index_of(probe.tau1), run.index_of(probe.tau2));
    let span = run.times[i2] - run.times[i1];
    let (mut times, mut energy, mut mass) = (Vec::new(), Vec::new(), Vec::new());
    let mut l: f64 = 0.0;
    let mut terminal = 0.0;
    for j in i1..=i2 {
        let t = run.times[j];
        let metric = spec.sample(t)?;
        let w = metric.volume_weights(mesh);
        let ramp = (t - run.times[i1]) / span;
        let psi: Vec<f64> = bump.iter().map(|b| ramp * b).collect();
        let grad = gradient_sq_upper(&psi, &metric, mesh);
        for i in 0..mesh.len() {
            l = l.max(psi[i] * bump[i] / span + grad[i]);
        }
        let v: Vec<f64> = run.values[j].iter().map(|u| (-probe.a * t).exp() * u.max(0.0)).collect();
        let psi_vp: Vec<f64> = psi.iter().zip(&v).map(|(s, v)| s * v.powf(probe.p)).collect();
        energy.push(dirichlet_energy(&psi_vp, &metric, mesh));
        mass.push(region.iter().map(|&i| w[i] * v[i].powf(2.0 * probe.p)).sum::<f64>());
        if j == i2 {
            terminal = (0..mesh.len()).map(|i| w[i] * psi_vp[i] * psi_vp[i]).sum::<f64>();
        }
        times.push(t);
    }
    let integral = trapezoid(&times, &mass);
    let (g_lhs, g_rhs) = (trapezoid(&times, &energy), 8.0 / 3.0 * l * integral);
    let (t_lhs, t_rhs) = (terminal, 4.0 * l * integral);
    let mk = |id: &str, lhs: f64, rhs: f64| {
        if lhs == 0.0 && rhs == 0.0 {
            CheckReport::new(id, 0.0, 0.0, 0.0, Verdict::Pass).with_note("both sides vanish")
        } else {
            CheckReport::upper(id, lhs, rhs, 1e-12 * rhs)
                .with_note(format!("slack factor {:.4}", rhs / lhs))
                .with_note(format!("p = {}, L = {l:.6e}", probe.p))
        }
    };
    let reports = vec![
        mk("reverse-poincare-gradient", g_lhs, g_rhs),
        mk("reverse-poincare-terminal", t_lhs, t_rhs),
    ];
    Ok(ReversePoincareOutcome { l, gradient_lhs: g_lhs, gradient_rhs: g_rhs, terminal_lhs: t_lhs, terminal_rhs: t_rhs, reports })
}

/// Cylinders `B(center, r0) x [tau0 - r0^2, tau0]` inside
/// `B(center, 2 r0) x [tau0 - 4 r0^2, tau0]`, balls in `g(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MviProbe {
    pub center: usize,
    pub tau0: f64,
    pub r0: f64,
}

/// Ratio of the inner supremum to the normalised outer space-time integral.
pub fn mvi_ratio_probe(run: &SpaceTimeField, spec: &ProblemSpec, probe: &MviProbe) -> Result<CheckReport> {
    let mesh = &spec.mesh;
    let MviProbe { center, tau0, r0 } = *probe;
    if tau0 < 4.0 * r0 * r0 - 1e-12 || r0 > 1.0 || r0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("MVI probe needs 0 < r0 <= 1 and tau0 >= (2 r0)^2, got r0 = {r0}, tau0 = {tau0}")));
    }
    let s0 = spec.sample(0.0)?;
    let d = geodesic_distance(&s0, mesh, center);
    let outer = ball_fractions(&d, 2.0 * r0, &s0, mesh);
    let inner = ball_fractions(&d, r0, &s0, mesh);
    let half_period = match mesh.topology() {
        Topology::Interval => f64::INFINITY,
        _ => 0.5 * d.iter().cloned().fold(0.0, f64::max) * 2.0,
    };
    let touches_boundary = mesh.boundary_nodes().iter().any(|&b| outer[b] > 0.0 || d[b] <= 2.0 * r0 + mesh.max_spacing());
    if touches_boundary || 2.0 * r0 >= half_period {
        return Err(Error::InvalidArgument("outer ball must lie in the interior".into()));
    }
    let w0 = s0.volume_weights(mesh);
    let vol_inner = weighted_sum(&inner, &w0);
    let (j_hi, j_mid, j_lo) = (run.index_of(tau0), run.index_of(tau0 - r0 * r0), run.index_of(tau0 - 4.0 * r0 * r0));
    let mut sup = f64::NEG_INFINITY;
    for j in j_mid..=j_hi {
        for i in 0..mesh.len() {
            if d[i] <= r0 {
                sup = sup.max(run.values[j][i]);
            }
        }
    }
    let weights: Vec<f64> = w0.iter().zip(&outer).map(|(w, f)| w * f).collect();
    let slices: Vec<f64> = (j_lo..=j_hi).map(|j| weighted_sum(&run.values[j], &weights)).collect();
    let integral = trapezoid(&run.times[j_lo..=j_hi], &slices);
    let average = integral / (r0 * r0 * vol_inner);
    if sup == 0.0 && average == 0.0 {
        return Ok(CheckReport::new("mvi-ratio", f64::NAN, f64::INFINITY, 0.0, Verdict::Skip).with_note("u vanishes on the cylinder (0/0)"));
    }
    let ratio = sup / average;
    let verdict = if ratio.is_finite() { Verdict::Pass } else { Verdict::Fail };
    Ok(CheckReport::new("mvi-ratio", ratio, f64::INFINITY, 0.0, verdict)
        .at_tau(tau0)
        .with_note(format!("sup {sup:.6e}, normalised integral {average:.6e}")))
}

/// Relative spread `max |r_i - r_0| / r_0` of ratios measured at successive refinements.
pub fn ratio_spread(ratios: &[f64]) -> f64 {
    let r0 = ratios[0];
    ratios.iter().map(|r| (r - r0).abs() / r0).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityOutcome {
    /// `int phi H(., tau_bar) dmu_{g(tau_bar)}`.
    pub kernel_side: f64,
    /// `Phi(x0, 0)`.
    pub adjoint_side: f64,
    /// `int Phi H dmu_{g(tau_j)}` per step.
    pub pairing: Vec<f64>,
    pub reports: Vec<CheckReport>,
}

/// Compares `int phi H(., tau_bar)` with `Phi(x0, 0)` and traces the pairing.
pub fn duality_uniqueness_check(spec: &ProblemSpec, phi: &[f64], tau_bar: f64, tol: f64) -> Result<DualityOutcome> {
    let mut s = spec.clone();
    s.horizon = tau_bar;
    let h = fundamental_solution(&s)?;
    let adj = solve_adjoint(&s, phi, tau_bar)?;
    let pairing = (0..adj.len())
        .map(|j| {
            let w = s.volume_weights(s.time(j))?;
            Ok((0..w.len()).map(|i| adj.values[j][i] * w[i] * h.values[j][i]).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let kernel_side = weighted_sum(phi, &s.volume_weights(tau_bar)?.iter().zip(h.values.last().unwrap()).map(|(w, u)| w * u).collect::<Vec<_>>());
    let adjoint_side = adj.values[0][s.base_point];
    let drift = pairing.iter().map(|p| (p - pairing[0]).abs()).fold(0.0, f64::max);
    let reports = vec![
        CheckReport::upper("duality-identity", (kernel_side - adjoint_side).abs(), 0.0, tol)
            .at_tau(tau_bar)
            .with_note(format!("int phi H = {kernel_side:.8e}, Phi(x0, 0) = {adjoint_side:.8e}")),
        CheckReport::upper("duality-pairing-drift", drift, 0.0, tol).with_note(format!("{} steps", pairing.len())),
    ];
    Ok(DualityOutcome { kernel_side, adjoint_side, pairing, reports })
}

/// Sup differences between kernels with successively halved bump widths,
/// over `tau >= 10 w^2` for the widest bump.
pub fn delta_width_study(spec: &ProblemSpec, widths: &[f64]) -> Result<(Vec<f64>, CheckReport)> {
    if widths.len() < 3 {
        return Err(Error::InvalidArgument("need at least three widths".into()));
    }
    let runs = widths
        .iter()
        .map(|&w| fundamental_solution(&spec.clone().with_delta_width(w)))
        .collect::<Result<Vec<_>>>()?;
    let t_min = 10.0 * widths[0] * widths[0];
    let diffs: Vec<f64> = runs
        .windows(2)
        .map(|pair| {
            let mut sup: f64 = 0.0;
            for j in 0..pair[0].len() {
                if pair[0].times[j] + 1e-12 < t_min {
                    continue;
                }
                for (a, b) in pair[0].values[j].iter().zip(&pair[1].values[j]) {
                    sup = sup.max((a - b).abs());
                }
            }
            sup
        })
        .collect();
    let shrink = diffs[0] / diffs[1];
    let report = CheckReport::lower("delta-width-halving", shrink, 3.0, 0.0)
        .with_note(format!("discrepancies {diffs:?} over tau >= {t_min}"));
    Ok((diffs, report))
}
