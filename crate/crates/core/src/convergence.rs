//! Sequences of problems converging to a limit problem, the convergence of
//! their kernels after pull-back, and the delta and positivity properties of
//! the limit kernel.
//!
//! The constructed families converge as full sequences, so monotone decrease
//! of the errors is asserted directly; that is stronger than convergence of
//! a subsequence.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::check::{CheckReport, Verdict};
use crate::coefficients::sample_coefficients;
use crate::error::{Error, Result};
use crate::expr::{ScalarFn, VectorFn};
use crate::harness::probe_times;
use crate::mesh::{build_mesh, Topology};
use crate::operators::{divergence_of, laplace_beltrami, weighted_sum};
use crate::solver::{f_representation, fundamental_solution, Boundary, ProblemSpec, SpaceTimeField};

/// Accepted band for `error_k / error_{k+1}` under `2^-k` perturbations.
pub const RATIO_BAND: (f64, f64) = (1.7, 2.3);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// `g_k = (1 + 2^-k psi) g`, identity maps.
    ConformalPerturbation,
    /// Dirichlet intervals `[-L_k, L_k]` around `x0`, `L_k = 2 + k`, inclusion maps.
    ExpandingDomains,
    /// `Q_k = Q + 2^-k chi`, `X_k = X + 2^-k Y` on a fixed metric.
    PotentialDrift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceOptions {
    pub k_max: usize,
    /// Claimed uniform cap on `sup_tau int H_k dmu`.
    pub c_star: f64,
    /// Start of the comparison window; defaults to `10 w^2` rounded up to a step.
    pub window_start: Option<f64>,
    /// Radius of the probe region around `x0` (expanding domains only).
    pub probe_radius: f64,
    /// Required sup error of the last member.
    pub tol_cg: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self { k_max: 5, c_star: 1.05, window_start: None, probe_radius: 1.0, tol_cg: 1e-2 }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    pub members: Vec<ProblemSpec>,
    pub limit: ProblemSpec,
    /// `maps[k][i]`: member node identified with limit node `i`, if any.
    pub maps: Vec<Vec<Option<usize>>>,
    /// Limit nodes on which kernels are compared.
    pub probe_region: Vec<usize>,
    pub window: [f64; 2],
    pub c_star: f64,
    pub tol_cg: f64,
    /// Per member: sup over the probe region and time of `|g_k - g|`, `|Q_k - Q|`, `|X_k - X|`.
    pub coefficient_gaps: Vec<[f64; 3]>,
}

impl SequenceSpec {
    pub fn k_max(&self) -> usize {
        self.members.len()
    }
}

fn periodic_bump(topology: Topology, extent: [f64; 2]) -> ScalarFn {
    let [lx, ly] = extent;
    match topology {
        Topology::Torus2 => Arc::new(move |x, y, _| (2.0 * PI * x / lx).sin() * (2.0 * PI * y / ly).sin()),
        _ => Arc::new(move |x, _, _| (2.0 * PI * x / lx).sin()),
    }
}

fn scaled(f: &ScalarFn, eps: f64) -> ScalarFn {
    let f = f.clone();
    Arc::new(move |x, y, t| eps * f(x, y, t))
}

pub fn build_sequence(kind: SequenceKind, base: &ProblemSpec, options: &SequenceOptions) -> Result<SequenceSpec> {
    if !(3..=8).contains(&options.k_max) {
        return Err(Error::InvalidArgument(format!("k_max must lie in [3, 8], got {}", options.k_max)));
    }
    base.validate()?;
    let topology = base.mesh.topology();
    let extent = base.mesh.extent();
    let ks: Vec<usize> = (1..=options.k_max).collect();
    let identity: Vec<Option<usize>> = (0..base.mesh.len()).map(Some).collect();
    let interior: Vec<usize> = (0..base.mesh.len()).filter(|&i| !base.mesh.is_boundary(i)).collect();
    let (members, limit, maps, probe_region) = match kind {
        SequenceKind::ConformalPerturbation => {
            let psi = periodic_bump(topology, extent);
            let members = ks
                .iter()
                .map(|&k| {
                    let mut s = base.clone();
                    s.metric = base.metric.scaled_by(scaled(&psi, 0.5f64.powi(k as i32)));
                    s
                })
                .collect();
            (members, base.clone(), vec![identity; ks.len()], interior)
        }
        SequenceKind::PotentialDrift => {
            let [lx, _] = extent;
            let chi: ScalarFn = Arc::new(move |x, _, _| (2.0 * PI * x / lx).cos());
            let two_d = topology == Topology::Torus2;
            let members = ks
                .iter()
                .map(|&k| {
                    let eps = 0.5f64.powi(k as i32);
                    let y: VectorFn = Arc::new(move |x, yy, _| {
                        if two_d {
                            [eps * (2.0 * PI * yy).sin(), eps * (2.0 * PI * x).sin()]
                        } else {
                            [eps * (2.0 * PI * x / lx).sin(), 0.0]
                        }
                    });
                    let mut s = base.clone();
                    s.coefficients = base.coefficients.plus_potential(scaled(&chi, eps)).plus_drift(y);
                    s
                })
                .collect();
            (members, base.clone(), vec![identity; ks.len()], interior)
        }
        SequenceKind::ExpandingDomains => {
            if topology != Topology::Interval {
                return Err(Error::InvalidArgument("expanding domains need an interval base".into()));
            }
            let h = base.mesh.spacing()[0];
            let x0 = base.mesh.coords(base.base_point)[0];
            let half_cells = |l: f64| (l / h).round() as usize;
            let make = |l: f64| -> Result<ProblemSpec> {
                let m = half_cells(l);
                let mesh = build_mesh(Topology::Interval, [2.0 * m as f64 * h, 0.0], [2 * m, 0])?;
                let shift = [x0 - m as f64 * h, 0.0];
                let mut s = base.clone();
                s.metric = base.metric.translated(shift);
                s.coefficients = base.coefficients.translated(shift);
                s.boundary = match &base.boundary {
                    Boundary::DirichletZero | Boundary::Closed => Boundary::DirichletZero,
                    other => other.clone(),
                };
                s.mesh = mesh;
                s.base_point = m;
                Ok(s)
            };
            let lengths: Vec<f64> = ks.iter().map(|&k| 2.0 + k as f64).collect();
            let limit = make(2.0 + options.k_max as f64 + 2.0)?;
            let m_inf = limit.base_point;
            let members = lengths.iter().map(|&l| make(l)).collect::<Result<Vec<_>>>()?;
            let maps = members
                .iter()
                .map(|s| {
                    let m = s.base_point;
                    (0..limit.mesh.len())
                        .map(|i| (i + m >= m_inf && i + m <= m_inf + 2 * m).then(|| i + m - m_inf))
                        .collect()
                })
                .collect();
            let region = (0..limit.mesh.len())
                .filter(|&i| (i as f64 - m_inf as f64).abs() * h <= options.probe_radius + 1e-12)
                .collect();
            (members, limit, maps, region)
        }
    };
    let w = limit.delta_width;
    let tau1 = options.window_start.unwrap_or(10.0 * w * w);
    let tau1 = (tau1 / limit.dt).ceil() * limit.dt;
    let mut seq = SequenceSpec {
        kind,
        members,
        limit,
        maps,
        probe_region,
        window: [tau1, base.horizon],
        c_star: options.c_star,
        tol_cg: options.tol_cg,
        coefficient_gaps: Vec::new(),
    };
    seq.coefficient_gaps = coefficient_gaps(&seq)?;
    Ok(seq)
}

/// Expanding domains whose members carry a source `Q_k = -q_k` in the outer
/// unit layer `L_k - 1 <= |x - x0| <= L_k`.
///
/// Mass reaching distance `l = L_k - 1` by time `t` and growing at rate `q`
/// afterwards scales like `exp(q (T - t) - l^2 / 4t)`, whose maximum over `t` is
/// `exp(q T - l sqrt(q))`. Solving `q T - l sqrt(q) = k` makes the total mass
/// grow like `e^k`, while the contribution that travels back to the probe
/// region carries an extra factor of roughly `exp(-(l - r) sqrt(q))`. Members
/// therefore violate any uniform bound on total mass and still satisfy one on
/// the probe region.
pub fn edge_source_sequence(base: &ProblemSpec, options: &SequenceOptions) -> Result<SequenceSpec> {
    let mut seq = build_sequence(SequenceKind::ExpandingDomains, base, options)?;
    let t_end = base.horizon;
    for (k, member) in seq.members.iter_mut().enumerate() {
        let l = member.mesh.extent()[0] / 2.0;
        let ell = l - 1.0;
        let z = (ell + (ell * ell + 4.0 * t_end * (k + 1) as f64).sqrt()) / (2.0 * t_end);
        let q = z * z;
        let source: ScalarFn = Arc::new(move |x, _, _| {
            let s = (((x - l).abs() - ell) / 0.25).clamp(0.0, 1.0);
            -q * s * s * (3.0 - 2.0 * s)
        });
        member.coefficients = member.coefficients.plus_potential(source);
    }
    seq.coefficient_gaps = coefficient_gaps(&seq)?;
    Ok(seq)
}

fn coefficient_gaps(seq: &SequenceSpec) -> Result<Vec<[f64; 3]>> {
    let limit = &seq.limit;
    let times = probe_times(limit);
    let stride = times.len().div_ceil(8).max(1);
    let mut out = Vec::with_capacity(seq.members.len());
    for (member, map) in seq.members.iter().zip(&seq.maps) {
        let mut gap = [0.0f64; 3];
        for &t in times.iter().step_by(stride) {
            let (ml, mk) = (limit.sample(t)?, member.sample(t)?);
            let (cl, ck) = (
                sample_coefficients(&limit.coefficients, &ml, &limit.mesh),
                sample_coefficients(&member.coefficients, &mk, &member.mesh),
            );
            for &i in &seq.probe_region {
                let Some(j) = map[i] else { continue };
                gap[0] = gap[0].max((mk.g_components[j] - ml.g_components[i]).abs());
                gap[1] = gap[1].max((ck.potential[j] - cl.potential[i]).abs());
                let dx = [ck.drift[j][0] - cl.drift[i][0], ck.drift[j][1] - cl.drift[i][1]];
                gap[2] = gap[2].max(dx[0].hypot(dx[1]));
            }
        }
        out.push(gap);
    }
    Ok(out)
}

/// Which mass hypothesis the members satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisLedger {
    /// `sup_tau int_M H_k dmu <= C*` for every member.
    pub global_held: bool,
    /// `sup_tau int_D H_k dmu <= C*` on the probe region for every member.
    pub local_held: bool,
    /// The bound on the mass of the limit kernel is only asserted under the global hypothesis.
    pub limit_bound_asserted: bool,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub kind: SequenceKind,
    /// Sup of `|H_k o Phi_k - H|` over the probe region and window.
    pub errors: Vec<f64>,
    /// Same for first grid differences divided by the spacing.
    pub gradient_errors: Vec<f64>,
    /// Sup of `|f_k o Phi_k - f|`.
    pub f_errors: Vec<f64>,
    pub global_mass: Vec<f64>,
    pub local_mass: Vec<f64>,
    pub ledger: HypothesisLedger,
    pub limit_run: SpaceTimeField,
    pub reports: Vec<CheckReport>,
}

impl ConvergenceReport {
    /// `error_k / error_{k+1}` for consecutive members.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,sup_error,gradient_error,f_error,global_mass,local_mass\n");
        for k in 0..self.errors.len() {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                k + 1,
                self.errors[k],
                self.gradient_errors[k],
                self.f_errors[k],
                self.global_mass[k],
                self.local_mass[k]
            );
        }
        out
    }
}

fn strictly_decreasing_tail(values: &[f64]) -> Option<usize> {
    // from k = 2 onward (index 1)
    (1..values.len().saturating_sub(1)).find(|&i| values[i + 1] >= values[i]).map(|i| i + 2)
}

/// Solves every member and the limit, pulls member kernels back and compares.
pub fn run_sequence(seq: &SequenceSpec) -> Result<ConvergenceReport> {
    let limit_run = fundamental_solution(&seq.limit)?;
    let member_runs = seq.members.par_iter().map(fundamental_solution).collect::<Result<Vec<_>>>()?;
    let [tau1, t_end] = seq.window;
    let window: Vec<usize> = (0..limit_run.len())
        .filter(|&j| limit_run.times[j] >= tau1 - 1e-12 && limit_run.times[j] <= t_end + 1e-12)
        .collect();
    let mesh = &seq.limit.mesh;
    let n = mesh.dimension();
    let [hx, hy] = mesh.spacing();
    let in_region: Vec<bool> = {
        let mut v = vec![false; mesh.len()];
        for &i in &seq.probe_region {
            v[i] = true;
        }
        v
    };
    let neighbours: Vec<(usize, usize, f64)> = seq
        .probe_region
        .iter()
        .flat_map(|&i| {
            let (a, b) = mesh.ij(i);
            let mut out = Vec::new();
            let xn = match mesh.topology() {
                Topology::Interval => (a + 1 < mesh.nx()).then(|| mesh.index(a + 1, b)),
                _ => Some(mesh.index((a + 1) % mesh.nx(), b)),
            };
            if let Some(k) = xn.filter(|&k| in_region[k]) {
                out.push((i, k, hx));
            }
            if mesh.topology() == Topology::Torus2 {
                let k = mesh.index(a, (b + 1) % mesh.ny());
                if in_region[k] {
                    out.push((i, k, hy));
                }
            }
            out
        })
        .collect();

    let mut errors = Vec::new();
    let mut gradient_errors = Vec::new();
    let mut f_errors = Vec::new();
    let mut global_mass = Vec::new();
    let mut local_mass = Vec::new();
    for (k, (run, map)) in member_runs.iter().zip(&seq.maps).enumerate() {
        if run.len() != limit_run.len() {
            return Err(Error::InvalidProblem(format!("member {} has a different step count", k + 1)));
        }
        let (mut e, mut ge, mut fe) = (0.0f64, 0.0f64, 0.0f64);
        for &j in &window {
            let pulled: Vec<f64> = (0..mesh.len()).map(|i| map[i].map_or(0.0, |m| run.values[j][m])).collect();
            let lim = &limit_run.values[j];
            for &i in &seq.probe_region {
                e = e.max((pulled[i] - lim[i]).abs());
            }
            for &(i, k2, h) in &neighbours {
                ge = ge.max(((pulled[k2] - pulled[i]) - (lim[k2] - lim[i])).abs() / h);
            }
            let (fk, fl) = (f_representation(&pulled, limit_run.times[j], n)?, f_representation(lim, limit_run.times[j], n)?);
            for &i in &seq.probe_region {
                if let (Some(a), Some(b)) = (fk.values[i], fl.values[i]) {
                    fe = fe.max((a - b).abs());
                }
            }
        }
        errors.push(e);
        gradient_errors.push(ge);
        f_errors.push(fe);
        global_mass.push(run.masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let member = &seq.members[k];
        let mut region_mask = vec![0.0; member.mesh.len()];
        for &i in &seq.probe_region {
            if let Some(m) = map[i] {
                region_mask[m] = 1.0;
            }
        }
        let mut local = f64::NEG_INFINITY;
        for j in 0..run.len() {
            let w: Vec<f64> = member.volume_weights(run.times[j])?.iter().zip(&region_mask).map(|(a, b)| a * b).collect();
            local = local.max(weighted_sum(&run.values[j], &w));
        }
        local_mass.push(local);
    }

    let global_held = global_mass.iter().all(|m| *m <= seq.c_star);
    let local_held = local_mass.iter().all(|m| *m <= seq.c_star);
    let ledger = HypothesisLedger { global_held, local_held, limit_bound_asserted: global_held };

    let mut reports = Vec::new();
    let kmax = errors.len();
    let mono = CheckReport::new("cg-monotone", errors[kmax - 1], errors[1], 0.0, Verdict::Pass)
        .with_note(format!("errors {errors:?}"))
        .with_note("full sequence by construction: monotone decrease is stronger than subsequence convergence");
    reports.push(match strictly_decreasing_tail(&errors) {
        Some(k) => mono.require(false, format!("error does not decrease at k = {k}")),
        None => mono,
    });
    reports.push(CheckReport::upper("cg-final-error", errors[kmax - 1], seq.tol_cg, 0.0).member(kmax));
    if matches!(seq.kind, SequenceKind::ConformalPerturbation | SequenceKind::PotentialDrift) {
        // perturbations of size 2^-k: successive errors should halve from k = 2 on
        let tail: Vec<f64> = errors.windows(2).skip(1).map(|w| w[0] / w[1]).collect();
        let outside = tail.iter().cloned().filter(|r| !(RATIO_BAND.0..=RATIO_BAND.1).contains(r)).count();
        let worst = tail.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
        reports.push(
            CheckReport::upper("cg-ratio", worst, 0.3, 0.0)
                .require(outside == 0, format!("{outside} ratios outside [{}, {}]", RATIO_BAND.0, RATIO_BAND.1))
                .with_note(format!("ratios from k = 2: {tail:?}")),
        );
    }
    let f_mono = CheckReport::new("cg-f-monotone", f_errors[kmax - 1], f_errors[1], 0.0, Verdict::Pass)
        .with_note(format!("f errors {f_errors:?}"));
    reports.push(match strictly_decreasing_tail(&f_errors) {
        Some(k) => f_mono.require(false, format!("f error does not decrease at k = {k}")),
        None => f_mono,
    });
    let hyp = if global_held {
        "global mass hypothesis held"
    } else if local_held {
        "only the local (regional) mass hypothesis held"
    } else {
        "neither mass hypothesis held"
    };
    if global_held {
        let worst = limit_run.masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        reports.push(CheckReport::upper("cg-limit-mass", worst, seq.c_star, seq.c_star * 1e-3).with_note(hyp));
    } else {
        reports.push(
            CheckReport::new("cg-limit-mass", f64::NAN, seq.c_star, 0.0, Verdict::Skip)
                .with_note(hyp)
                .with_note("limit mass bound not asserted"),
        );
    }
    Ok(ConvergenceReport { kind: seq.kind, errors, gradient_errors, f_errors, global_mass, local_mass, ledger, limit_run, reports })
}

/// Measured constants of the delta-property sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaOutcome {
    pub c7: f64,
    pub c8: f64,
    /// `int H F dmu_{g(tau)}` per listed time.
    pub pairings: Vec<f64>,
    /// `max_tau (|pairing - F(x0)| - bias) / tau`.
    pub approach_rate: f64,
    pub report: CheckReport,
}

/// Checks
/// `e^{-2 C7 tau} F(x0) - (C8/C7)(1 - e^{-2 C7 tau}) <= int H F <= e^{2 C7 tau} F(x0) + (C8/C7)(e^{2 C7 tau} - 1)`
/// with `C7` the sup over `supp F x [0, T]` of `|Delta F|`, `|div(F X)|`,
/// `|R|` and `|Q|`, and `C8 = C7 C*`.
///
/// The tolerance is the delta-width bias `|int H(0) F - F(x0)|` of the
/// initial bump. Nodal values below `1e-12 max F` in magnitude count as zero.
pub fn delta_property_check(run: &SpaceTimeField, spec: &ProblemSpec, f: &[f64], taus: &[f64], c_star: f64) -> Result<DeltaOutcome> {
    let mesh = &spec.mesh;
    let floor = 1e-12 * f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let f: Vec<f64> = f.iter().map(|&v| if v.abs() <= floor { 0.0 } else { v }).collect();
    let f = f.as_slice();
    if f.len() != mesh.len() || f.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument("test field must be nonnegative on every node".into()));
    }
    let support: Vec<usize> = (0..mesh.len()).filter(|&i| f[i] > 0.0).collect();
    if support.iter().any(|&i| mesh.is_boundary(i)) {
        return Err(Error::InvalidArgument("test field must vanish on the boundary".into()));
    }
    let mut c7: f64 = 0.0;
    for t in probe_times(spec) {
        let m = spec.sample(t)?;
        let c = sample_coefficients(&spec.coefficients, &m, mesh);
        let lap = laplace_beltrami(f, &m, mesh);
        let fx: Vec<[f64; 2]> = c.drift.iter().zip(f).map(|(v, s)| [v[0] * s, v[1] * s]).collect();
        let div = divergence_of(&fx, &m, mesh);
        for &i in &support {
            c7 = c7.max(lap[i].abs()).max(div[i].abs()).max(m.trace_r[i].abs()).max(c.potential[i].abs());
        }
    }
    let c8 = c7 * c_star;
    let f0 = f[spec.base_point];
    let pairing = |j: usize| -> Result<f64> {
        let w = spec.volume_weights(run.times[j])?;
        Ok((0..mesh.len()).map(|i| w[i] * run.values[j][i] * f[i]).sum())
    };
    let bias = (pairing(0)? - f0).abs();
    let tol = bias + 1e-12;
    let mut worst = f64::INFINITY;
    let mut worst_side = String::new();
    let mut pairings = Vec::with_capacity(taus.len());
    let mut rate: f64 = 0.0;
    for &tau in taus {
        let j = run.index_of(tau);
        let t = run.times[j];
        let u = pairing(j)?;
        pairings.push(u);
        // (C8/C7)(e^{2 C7 t} - 1) -> 2 C8 t as C7 -> 0
        let spread = |s: f64| if c7 > 0.0 { c_star * (s * 2.0 * c7 * t).exp_m1() * s } else { 0.0 };
        let lower = (-2.0 * c7 * t).exp() * f0 - spread(-1.0);
        let upper = (2.0 * c7 * t).exp() * f0 + spread(1.0);
        for (slack, side) in [(u - lower, "lower"), (upper - u, "upper")] {
            if slack < worst {
                worst = slack;
                worst_side = format!("{side} side at tau = {t}: pairing {u:.8e}, bounds [{lower:.8e}, {upper:.8e}]");
            }
        }
        if t > 0.0 {
            rate = rate.max(((u - f0).abs() - bias).max(0.0) / t);
        }
    }
    let report = CheckReport::lower("delta-sandwich", worst, 0.0, tol)
        .with_note(format!("C7 = {c7:.6e}, C8 = {c8:.6e}, F(x0) = {f0:.8e}, bias {bias:.3e}"))
        .with_note(worst_side)
        .with_note(format!("|pairing - F(x0)| <= {rate:.4e} tau + bias"));
    Ok(DeltaOutcome { c7, c8, pairings, approach_rate: rate, report })
}

/// `min H > 0` over `region x [tau1, T]`, with `tau1 >= 10 w^2`.
pub fn positivity_check(run: &SpaceTimeField, spec: &ProblemSpec, region: &[usize], tau1: f64) -> Result<CheckReport> {
    let w = spec.delta_width;
    if tau1 < 10.0 * w * w - 1e-12 {
        return Err(Error::InvalidArgument(format!("tau1 = {tau1} below 10 w^2 = {}", 10.0 * w * w)));
    }
    let mut worst = f64::INFINITY;
    let mut at = (0usize, 0.0f64);
    for j in 0..run.len() {
        if run.times[j] < tau1 - 1e-12 {
            continue;
        }
        for &i in region {
            if run.values[j][i] < worst {
                worst = run.values[j][i];
                at = (i, run.times[j]);
            }
        }
    }
    let report = CheckReport::new("positivity", worst, 0.0, 0.0, if worst > 0.0 { Verdict::Pass } else { Verdict::Fail })
        .with_note(format!("minimum at node {} tau {}", at.0, at.1));
    Ok(report.at_tau(at.1))
}
