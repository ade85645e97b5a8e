//! Implicit time integration of `d/dtau u = Delta u - nabla_X u - Q u` and
//! its adjoint, plus fundamental solutions from Gaussian initial bumps.
//!
//! Each step is Crank-Nicolson with every coefficient sampled at the
//! midpoint `tau_{j+1/2}`:
//!
//! ```text
//! (I - dt/2 L) u_{j+1} = (I + dt/2 L) u_j,   L = Delta - nabla_X - Q
//! ```
//!
//! Dirichlet nodes get unit rows on the left and zero rows on the right.
//! Optional backward-Euler substeps can replace the first steps (Rannacher
//! start-up) to damp the stiff modes of a sharp initial bump.
//!
//! The adjoint march is the exact transpose of the forward map in the
//! `mu_{g(tau_j)}` inner products, so `sum Phi_j W_j u_j` is the same for
//! every `j` up to linear-solve round-off.

use std::fmt;

use crate::coefficients::{sample_coefficients, Coefficients};
use crate::distance::geodesic_distance;
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::linalg::{diagonal_ratio, solve, CsrMatrix};
use crate::mesh::Mesh;
use crate::metric::{sample_metric, MetricFamily, MetricSample};
use crate::operators::{drift_matrix, laplacian_matrix, weighted_sum};

/// Relative residual required of every linear solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
/// Kernel runs fail if `min u < -NEGATIVITY_TOLERANCE * max u`.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-8;

#[derive(Clone)]
pub enum Boundary {
    /// Circle or torus.
    Closed,
    DirichletZero,
    /// Boundary values `psi(x, y, tau)`.
    DirichletData(ScalarFn),
    /// Zero conormal flux.
    NeumannZero,
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Closed => "Closed",
            Boundary::DirichletZero => "DirichletZero",
            Boundary::DirichletData(_) => "DirichletData(..)",
            Boundary::NeumannZero => "NeumannZero",
        })
    }
}

impl Boundary {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, Boundary::DirichletZero | Boundary::DirichletData(_))
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub metric: MetricFamily,
    pub coefficients: Coefficients,
    pub boundary: Boundary,
    /// Node index of `x0`.
    pub base_point: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Standard deviation of the initial bump, in `g(0)`-distance.
    pub delta_width: f64,
    /// Number of leading steps replaced by two backward-Euler half steps each.
    pub startup_steps: usize,
}

impl ProblemSpec {
    /// Spec with zero coefficients, the boundary implied by the topology, and
    /// `delta_width = 2 h`.
    pub fn new(mesh: Mesh, metric: MetricFamily, base_point: usize, horizon: f64, dt: f64) -> Self {
        let boundary = if mesh.topology().is_closed() { Boundary::Closed } else { Boundary::DirichletZero };
        let delta_width = 2.0 * mesh.max_spacing();
        Self {
            mesh,
            metric,
            coefficients: Coefficients::default(),
            boundary,
            base_point,
            horizon,
            dt,
            delta_width,
            startup_steps: 0,
        }
    }

    pub fn with_coefficients(mut self, c: Coefficients) -> Self {
        self.coefficients = c;
        self
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }

    pub fn with_delta_width(mut self, w: f64) -> Self {
        self.delta_width = w;
        self
    }

    pub fn with_startup_steps(mut self, n: usize) -> Self {
        self.startup_steps = n;
        self
    }

    /// Half-width of the central difference used when the metric has no analytic rate.
    pub fn fd_step(&self) -> f64 {
        0.5 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mesh;
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if m.topology().is_closed() != matches!(self.boundary, Boundary::Closed) {
            return bad(format!("boundary {:?} does not match topology {:?}", self.boundary, m.topology()));
        }
        if self.base_point >= m.len() {
            return bad(format!("base point {} outside mesh of {} nodes", self.base_point, m.len()));
        }
        if m.is_boundary(self.base_point) {
            return bad("base point lies on the boundary".into());
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return bad(format!("need positive dt and horizon, got {} and {}", self.dt, self.horizon));
        }
        if self.dt > m.max_spacing() {
            return bad(format!("dt {} exceeds spacing {}", self.dt, m.max_spacing()));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!("horizon {} is not a multiple of dt {}", self.horizon, self.dt));
        }
        let min_extent = m.extent()[..m.dimension()].iter().cloned().fold(f64::INFINITY, f64::min);
        if self.delta_width < 2.0 * m.max_spacing() * (1.0 - 1e-12) || self.delta_width > min_extent / 20.0 {
            return bad(format!(
                "delta width {} outside [2 h, extent / 20] = [{}, {}]",
                self.delta_width,
                2.0 * m.max_spacing(),
                min_extent / 20.0
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn sample(&self, tau: f64) -> Result<MetricSample> {
        sample_metric(&self.metric, &self.mesh, tau, self.fd_step())
    }

    pub fn volume_weights(&self, tau: f64) -> Result<Vec<f64>> {
        Ok(self.sample(tau)?.volume_weights(&self.mesh))
    }

    fn dirichlet_nodes(&self) -> Vec<usize> {
        if self.boundary.is_dirichlet() {
            self.mesh.boundary_nodes()
        } else {
            Vec::new()
        }
    }

    fn boundary_value(&self, node: usize, tau: f64) -> f64 {
        match &self.boundary {
            Boundary::DirichletData(psi) => {
                let [x, y] = self.mesh.coords(node);
                psi(x, y, tau)
            }
            _ => 0.0,
        }
    }
}

/// Matrix of `L = Delta - nabla_X - Q` at time `tau`.
pub fn generator(spec: &ProblemSpec, tau: f64) -> Result<CsrMatrix> {
    let metric = spec.sample(tau)?;
    let coeffs = sample_coefficients(&spec.coefficients, &metric, &spec.mesh);
    let lap = laplacian_matrix(&metric, &spec.mesh);
    let neg_q: Vec<f64> = coeffs.potential.iter().map(|q| -q).collect();
    Ok(if coeffs.has_drift() {
        let drift = drift_matrix(&coeffs.drift, &spec.mesh);
        CsrMatrix::combine(&[(&lap, 1.0), (&drift, -1.0)], Some(&neg_q))
    } else {
        CsrMatrix::combine(&[(&lap, 1.0)], Some(&neg_q))
    })
}

/// One theta-scheme substep `A u1 = B u0 + boundary data`.
struct Substep {
    a: CsrMatrix,
    b: CsrMatrix,
    tau1: f64,
}

fn substep(spec: &ProblemSpec, tau0: f64, tau1: f64, theta: f64) -> Result<Substep> {
    let dt = tau1 - tau0;
    // backward Euler samples at the new time, Crank-Nicolson at the midpoint
    let t_eval = tau0 + theta * dt;
    let l = generator(spec, t_eval)?;
    let dir = spec.dirichlet_nodes();
    let a = l.scaled_plus_identity(-theta * dt, 1.0).with_unit_rows(&dir, 1.0);
    let b = l.scaled_plus_identity((1.0 - theta) * dt, 1.0).with_unit_rows(&dir, 0.0);
    Ok(Substep { a, b, tau1 })
}

/// The substeps making up step `j` (`tau_j -> tau_{j+1}`).
fn step_plan(spec: &ProblemSpec, j: usize) -> Vec<(f64, f64, f64)> {
    let (t0, t1) = (spec.time(j), spec.time(j + 1));
    if j < spec.startup_steps {
        let tm = 0.5 * (t0 + t1);
        vec![(t0, tm, 1.0), (tm, t1, 1.0)]
    } else {
        vec![(t0, t1, 0.5)]
    }
}

fn checked_solve(spec: &ProblemSpec, a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let (x, stats) = solve(a, rhs);
    if !(stats.relative_residual <= SOLVE_TOLERANCE) {
        return Err(Error::LinearSolve {
            residual: stats.relative_residual,
            iterations: stats.iterations,
            condition_estimate: diagonal_ratio(a),
            dt: spec.dt,
            spacing: spec.mesh.max_spacing(),
        });
    }
    Ok(x)
}

/// Advances `u_j` at `tau_j = j dt` to `tau_{j+1}`.
pub fn step(u: &[f64], spec: &ProblemSpec, j: usize) -> Result<Vec<f64>> {
    let mut u = u.to_vec();
    for (t0, t1, theta) in step_plan(spec, j) {
        let s = substep(spec, t0, t1, theta)?;
        let mut rhs = s.b.apply(&u);
        for node in spec.dirichlet_nodes() {
            rhs[node] = spec.boundary_value(node, s.tau1);
        }
        u = checked_solve(spec, &s.a, &rhs)?;
    }
    Ok(u)
}

/// Values of a scalar field at the step times of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// `int u dmu_{g(tau_j)}` per step.
    pub masses: Vec<f64>,
    /// Width of the initial bump for kernel runs.
    pub delta_width: Option<f64>,
    pub warnings: Vec<String>,
}

impl SpaceTimeField {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the stored step nearest to `tau`.
    pub fn index_of(&self, tau: f64) -> usize {
        let mut best = 0;
        for (i, t) in self.times.iter().enumerate() {
            if (t - tau).abs() < (self.times[best] - tau).abs() {
                best = i;
            }
        }
        best
    }

    pub fn at(&self, tau: f64) -> &[f64] {
        &self.values[self.index_of(tau)]
    }

    /// `min u / max u` over all steps.
    pub fn min_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in self.values.iter().flatten() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if hi > 0.0 {
            lo / hi
        } else {
            0.0
        }
    }
}

/// Runs from `initial` at step `start` to step `end`, recording every step.
pub fn solve_forward(spec: &ProblemSpec, initial: &[f64], start: usize, end: usize) -> Result<SpaceTimeField> {
    spec.validate()?;
    if initial.len() != spec.mesh.len() {
        return Err(Error::InvalidArgument(format!(
            "initial field has {} values for {} nodes",
            initial.len(),
            spec.mesh.len()
        )));
    }
    if end < start || end > spec.steps() {
        return Err(Error::InvalidArgument(format!("window {start}..{end} outside 0..{}", spec.steps())));
    }
    let mut times = vec![spec.time(start)];
    let mut values = vec![initial.to_vec()];
    let mut masses = vec![weighted_sum(initial, &spec.volume_weights(spec.time(start))?)];
    let mut u = initial.to_vec();
    for j in start..end {
        u = step(&u, spec, j)?;
        let t = spec.time(j + 1);
        masses.push(weighted_sum(&u, &spec.volume_weights(t)?));
        times.push(t);
        values.push(u.clone());
    }
    Ok(SpaceTimeField { times, values, masses, delta_width: None, warnings: Vec::new() })
}

/// Gaussian bump `exp(-d^2 / (2 w^2))` in `g(0)`-distance from `x0`,
/// normalised to unit `mu_{g(0)}` mass on the grid. Returns the bump and the
/// mass it places outside `B(x0, 5 w)`.
pub fn initial_bump(spec: &ProblemSpec) -> Result<(Vec<f64>, f64)> {
    let sample0 = spec.sample(0.0)?;
    let d = geodesic_distance(&sample0, &spec.mesh, spec.base_point);
    let w = spec.delta_width;
    let mut u: Vec<f64> = d.iter().map(|d| (-d * d / (2.0 * w * w)).exp()).collect();
    for node in spec.dirichlet_nodes() {
        u[node] = 0.0;
    }
    let weights = sample0.volume_weights(&spec.mesh);
    let mass = weighted_sum(&u, &weights);
    u.iter_mut().for_each(|v| *v /= mass);
    let outside: f64 = (0..u.len()).filter(|&i| d[i] > 5.0 * w).map(|i| u[i] * weights[i]).sum();
    Ok((u, outside))
}

/// Approximate fundamental solution from [`initial_bump`] over `[0, T]`.
///
/// Fails if the run undershoots below `-1e-8 max u`.
pub fn fundamental_solution(spec: &ProblemSpec) -> Result<SpaceTimeField> {
    spec.validate()?;
    let (u0, outside) = initial_bump(spec)?;
    let mut run = solve_forward(spec, &u0, 0, spec.steps())?;
    run.delta_width = Some(spec.delta_width);
    if outside > 1e-12 {
        run.warnings
            .push(format!("initial bump places mass {outside:.3e} outside B(x0, 5 w)"));
    }
    let ratio = run.min_ratio();
    if ratio < -NEGATIVITY_TOLERANCE {
        return Err(Error::InvalidProblem(format!(
            "kernel undershoot: min u / max u = {ratio:.3e} below -{NEGATIVITY_TOLERANCE:e}"
        )));
    }
    Ok(run)
}

/// Solves the adjoint equation backward from `Phi(., tau_bar) = phi` to `tau = 0`.
///
/// `tau_bar` must be a step time. The returned field is ordered by increasing
/// time (`values[0]` is `Phi(., 0)`); it vanishes on Dirichlet nodes.
pub fn solve_adjoint(spec: &ProblemSpec, phi: &[f64], tau_bar: f64) -> Result<SpaceTimeField> {
    spec.validate()?;
    let last = (tau_bar / spec.dt).round() as usize;
    if last == 0 || last > spec.steps() || (spec.time(last) - tau_bar).abs() > 1e-9 * spec.dt {
        return Err(Error::InvalidArgument(format!("tau_bar {tau_bar} is not a step time in (0, T]")));
    }
    let dir = spec.dirichlet_nodes();
    let mut cur = phi.to_vec();
    for &node in &dir {
        cur[node] = 0.0;
    }
    let mut values = vec![cur.clone()];
    for j in (0..last).rev() {
        let plan = step_plan(spec, j);
        for &(t0, t1, theta) in plan.iter().rev() {
            let s = substep(spec, t0, t1, theta)?;
            let w1 = spec.volume_weights(t1)?;
            let w0 = spec.volume_weights(t0)?;
            let y: Vec<f64> = cur.iter().zip(&w1).map(|(p, w)| p * w).collect();
            let z = checked_solve(spec, &s.a.transpose(), &y)?;
            let bz = s.b.transpose().apply(&z);
            cur = bz.iter().zip(&w0).map(|(v, w)| v / w).collect();
            for &node in &dir {
                cur[node] = 0.0;
            }
        }
        values.push(cur.clone());
    }
    values.reverse();
    let times: Vec<f64> = (0..=last).map(|j| spec.time(j)).collect();
    let masses = times
        .iter()
        .zip(&values)
        .map(|(t, v)| Ok(weighted_sum(v, &spec.volume_weights(*t)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SpaceTimeField { times, values, masses, delta_width: None, warnings: Vec::new() })
}

/// `(u1 - u0)/dt - L_{tau + dt/2} (u0 + u1)/2`; on Dirichlet nodes `u1 - psi`.
pub fn heat_operator_residual(u0: &[f64], u1: &[f64], spec: &ProblemSpec, tau: f64) -> Result<Vec<f64>> {
    let l = generator(spec, tau + 0.5 * spec.dt)?;
    let mid: Vec<f64> = u0.iter().zip(u1).map(|(a, b)| 0.5 * (a + b)).collect();
    let lu = l.apply(&mid);
    let mut r: Vec<f64> = (0..u0.len()).map(|i| (u1[i] - u0[i]) / spec.dt - lu[i]).collect();
    for node in spec.dirichlet_nodes() {
        r[node] = u1[node] - spec.boundary_value(node, tau + spec.dt);
    }
    Ok(r)
}

/// `f = -ln((4 pi tau)^(n/2) H)`, with nodes where `H <= 1e-300` masked.
#[derive(Debug, Clone, PartialEq)]
pub struct FRepresentation {
    pub values: Vec<Option<f64>>,
    pub masked: Vec<usize>,
}

pub fn f_representation(h: &[f64], tau: f64, dimension: usize) -> Result<FRepresentation> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("f-representation needs tau > 0, got {tau}")));
    }
    let pre = (4.0 * std::f64::consts::PI * tau).powf(dimension as f64 / 2.0);
    let mut masked = Vec::new();
    let values = h
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 1e-300 {
                Some(-(pre * v).ln())
            } else {
                masked.push(i);
                None
            }
        })
        .collect();
    Ok(FRepresentation { values, masked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Topology};
    use crate::metric::MetricKind;
    use crate::oracle::{circle_kernel, interval_kernel, IntervalBc};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn flat_circle(n: usize, dt: f64, horizon: f64) -> ProblemSpec {
        let mesh = build_mesh(Topology::Circle, [1.0, 0.0], [n, 0]).unwrap();
        ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::Density), n / 2, horizon, dt)
    }

    #[test]
    fn validation() {
        let spec = flat_circle(64, 1e-3, 0.1);
        assert!(spec.validate().is_ok());
        assert!(spec.clone().with_boundary(Boundary::DirichletZero).validate().is_err());
        assert!(spec.clone().with_delta_width(0.01).validate().is_err());
        let mut s = spec.clone();
        s.dt = 0.1;
        assert!(s.validate().is_err());
        let mesh = build_mesh(Topology::Interval, [1.0, 0.0], [32, 0]).unwrap();
        let s = ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::Density), 0, 0.1, 1e-3);
        assert!(s.validate().is_err());
    }

    #[test]
    fn constants_are_stationary() {
        let spec = flat_circle(64, 1e-3, 0.01);
        let u1 = step(&vec![3.0; 64], &spec, 0).unwrap();
        assert!(u1.iter().all(|v| (v - 3.0).abs() < 1e-13));
    }

    #[test]
    fn crank_nicolson_amplification() {
        let dt = 1e-3;
        let spec = flat_circle(128, dt, 0.01);
        let m = &spec.mesh;
        let u: Vec<f64> = (0..m.len()).map(|i| (2.0 * PI * m.coords(i)[0]).cos()).collect();
        let u1 = step(&u, &spec, 0).unwrap();
        // discrete eigenvalue of the 3-point Laplacian
        let h = m.spacing()[0];
        let lam = 4.0 / (h * h) * (PI * h).sin().powi(2);
        let factor = (1.0 - lam * dt / 2.0) / (1.0 + lam * dt / 2.0);
        for i in 0..m.len() {
            assert!((u1[i] - factor * u[i]).abs() < 1e-12);
        }
        let lam_exact = 4.0 * PI * PI;
        let exact = (1.0 - lam_exact * dt / 2.0) / (1.0 + lam_exact * dt / 2.0);
        assert!((factor - exact).abs() < 1e-5);
    }

    #[test]
    fn dirichlet_rows_hold_boundary_values() {
        let mesh = build_mesh(Topology::Interval, [1.0, 0.0], [32, 0]).unwrap();
        let spec = ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::Density), 16, 0.01, 1e-3);
        let u1 = step(&vec![1.0; 33], &spec, 0).unwrap();
        assert_eq!(u1[0], 0.0);
        assert_eq!(u1[32], 0.0);
        let data = spec.clone().with_boundary(Boundary::DirichletData(std::sync::Arc::new(|x, _, t| x + t)));
        let u1 = step(&vec![1.0; 33], &data, 0).unwrap();
        assert!((u1[0] - 1e-3).abs() < 1e-15);
        assert!((u1[32] - 1.001).abs() < 1e-15);
    }

    #[test]
    fn forward_runs_have_zero_residual() {
        let fam = MetricFamily::density(|x, t| 1.0 + 0.2 * t * (2.0 * PI * x).sin());
        let mesh = build_mesh(Topology::Circle, [1.0, 0.0], [64, 0]).unwrap();
        let spec = ProblemSpec::new(mesh, fam, 32, 0.02, 1e-3)
            .with_coefficients(Coefficients::new().with_drift(|x, _, _| [0.3 * (2.0 * PI * x).cos(), 0.0]));
        let u0: Vec<f64> = (0..64).map(|i| 1.0 + (i as f64 * 0.2).sin()).collect();
        let run = solve_forward(&spec, &u0, 0, 10).unwrap();
        for j in 0..10 {
            let r = heat_operator_residual(&run.values[j], &run.values[j + 1], &spec, run.times[j]).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-8), "step {j}");
        }
    }

    #[test]
    fn oracle_snapshots_have_small_residual() {
        let (n, dt) = (256, 2.5e-4);
        let spec = flat_circle(n, dt, 0.5);
        let m = &spec.mesh;
        let snap = |t: f64| -> Vec<f64> { (0..n).map(|i| circle_kernel(1.0, t, m.coords(i)[0], 0.5).unwrap()).collect() };
        let r = heat_operator_residual(&snap(0.1), &snap(0.1 + dt), &spec, 0.1).unwrap();
        let sup = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        // truncation of h^2 u''''/12 against a kernel of size ~ 1
        assert!(sup < 5e-3, "{sup}");
    }

    #[test]
    fn fundamental_solution_matches_oracle_peak() {
        let (n, dt) = (256, 2.5e-4);
        let spec = flat_circle(n, dt, 0.05).with_delta_width(0.02);
        let run = fundamental_solution(&spec).unwrap();
        assert_relative_eq!(run.masses[0], 1.0, epsilon = 1e-14);
        let shift = 0.5 * 0.02f64.powi(2);
        let h = run.at(0.05)[spec.base_point];
        let oracle = circle_kernel(1.0, 0.05 + shift, 0.5, 0.5).unwrap();
        assert!((h - oracle).abs() < 1e-3, "{h} vs {oracle}");
        assert!((h - 1.27857).abs() < 1e-2);
    }

    #[test]
    fn dirichlet_kernel_matches_series() {
        let mesh = build_mesh(Topology::Interval, [1.0, 0.0], [256, 0]).unwrap();
        let spec = ProblemSpec::new(mesh, MetricFamily::flat(MetricKind::Density), 128, 0.05, 2.5e-4).with_delta_width(0.02);
        let run = fundamental_solution(&spec).unwrap();
        let shift = 0.5 * 0.02f64.powi(2);
        let u = run.at(0.05);
        let worst = (0..spec.mesh.len())
            .map(|i| (u[i] - interval_kernel(1.0, IntervalBc::Dirichlet, 0.05 + shift, spec.mesh.coords(i)[0], 0.5).unwrap()).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn adjoint_of_cosine_decays() {
        let spec = flat_circle(128, 1e-3, 0.1);
        let m = &spec.mesh;
        let phi: Vec<f64> = (0..m.len()).map(|i| (2.0 * PI * (m.coords(i)[0] - 0.3)).cos()).collect();
        let adj = solve_adjoint(&spec, &phi, 0.1).unwrap();
        assert_eq!(adj.len(), 101);
        let decay = (-4.0 * PI * PI * 0.1f64).exp();
        for i in 0..m.len() {
            assert!((adj.values[0][i] - decay * phi[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn adjoint_pairing_is_constant() {
        let fam = MetricFamily::density(|x, t| 1.0 + 0.2 * t * (2.0 * PI * x).sin());
        let mesh = build_mesh(Topology::Interval, [1.0, 0.0], [64, 0]).unwrap();
        let spec = ProblemSpec::new(mesh, fam, 32, 0.05, 1e-3)
            .with_delta_width(0.04)
            .with_startup_steps(2)
            .with_coefficients(Coefficients::new().with_potential_fn(|x, _, _| x));
        let run = fundamental_solution(&spec).unwrap();
        let m = &spec.mesh;
        let phi: Vec<f64> = (0..m.len()).map(|i| (PI * m.coords(i)[0]).sin()).collect();
        let adj = solve_adjoint(&spec, &phi, 0.05).unwrap();
        let pairing = |j: usize| {
            let w = spec.volume_weights(spec.time(j)).unwrap();
            (0..m.len()).map(|i| adj.values[j][i] * w[i] * run.values[j][i]).sum::<f64>()
        };
        let p0 = pairing(0);
        for j in 0..adj.len() {
            assert!((pairing(j) - p0).abs() < 1e-12, "step {j}");
        }
    }

    #[test]
    fn f_of_flat_gaussian_is_zero() {
        let tau = 0.05;
        let h = (4.0 * PI * tau).powf(-0.5);
        let f = f_representation(&[h, 0.0, 1.27857], tau, 1).unwrap();
        assert!(f.values[0].unwrap().abs() < 1e-14);
        assert_eq!(f.masked, vec![1]);
        assert!((f.values[2].unwrap() + 0.01339).abs() < 1e-4);
        assert!(f_representation(&[1.0], 0.0, 1).is_err());
    }
}
