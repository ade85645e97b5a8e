//! Runs a configured experiment and collects its check reports and tables.

use std::fmt::Write as _;

use crate::check::{CheckReport, Verdict};
use crate::coefficients::sample_coefficients;
use crate::config::{parse_expr, ExperimentConfig, ExperimentKind, SequenceKindName};
use crate::convergence::{build_sequence, delta_property_check, edge_source_sequence, positivity_check, run_sequence};
use crate::cutoff::{
    build_profile, cutoff_heat_inequality_check, cutoff_tolerance, derive_cutoff_constants, local_lower_bound_check,
    profile_inequality_check, LowerBoundKind,
};
use crate::distance::{distance_evolution_check, laplacian_of_distance_check, laplacian_tolerance};
use crate::error::{Error, Result};
use crate::harness::{
    a_choice_check, boundary_mass_check, compute_a, delta_width_study, duality_uniqueness_check, mass_evolution_check,
    mass_report, mvi_ratio_probe, reverse_poincare_check, MassTolerances, MviProbe, ReversePoincareProbe,
};
use crate::mesh::Topology;
use crate::oracle::{OracleFamily, OracleKernel};
use crate::report::{fmt_num, RunStatus, Table};
use crate::solver::{fundamental_solution, initial_bump, solve_forward, Boundary, ProblemSpec, SpaceTimeField};

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub digest: String,
    pub reports: Vec<CheckReport>,
    pub tables: Vec<Table>,
    pub status: RunStatus,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let spec = config.problem_spec()?;
    let (reports, tables) = match config.experiment {
        ExperimentKind::Solve => solve(config, &spec)?,
        ExperimentKind::Kernel => kernel(config, &spec)?,
        ExperimentKind::VerifyMass => verify_mass(config, &spec)?,
        ExperimentKind::VerifyMvi => verify_mvi(config, &spec)?,
        ExperimentKind::VerifyCutoff => verify_cutoff(config, &spec)?,
        ExperimentKind::VerifyDuality => verify_duality(config, &spec)?,
        ExperimentKind::VerifyDelta => verify_delta(config, &spec)?,
        ExperimentKind::CgRun => cg_run(config, &spec)?,
    };
    let status = RunStatus::of(&reports);
    Ok(ExperimentOutcome { digest: config.digest(), reports, tables, status })
}

type Outputs = (Vec<CheckReport>, Vec<Table>);

fn nodal(spec: &ProblemSpec, field: &str, src: &str) -> Result<Vec<f64>> {
    let f = parse_expr(field, src)?.into_fn();
    Ok((0..spec.mesh.len())
        .map(|i| {
            let [x, y] = spec.mesh.coords(i);
            f(x, y, 0.0)
        })
        .collect())
}

fn snapshot_taus(config: &ExperimentConfig, spec: &ProblemSpec) -> Vec<f64> {
    let t = spec.horizon;
    let taus = if config.checks.taus.is_empty() { vec![0.25 * t, 0.5 * t, t] } else { config.checks.taus.clone() };
    taus.into_iter().filter(|&s| s >= 0.0 && s <= t + 1e-12).collect()
}

fn snapshot_table(name: &str, run: &SpaceTimeField, spec: &ProblemSpec, taus: &[f64]) -> Table {
    let mut csv = String::from("tau,node,x,y,u\n");
    for &tau in taus {
        let j = run.index_of(tau);
        for (i, v) in run.values[j].iter().enumerate() {
            let [x, y] = spec.mesh.coords(i);
            let _ = writeln!(csv, "{},{i},{},{},{}", fmt_num(run.times[j]), fmt_num(x), fmt_num(y), fmt_num(*v));
        }
    }
    Table::new(name, csv)
}

fn mass_table(run: &SpaceTimeField, spec: &ProblemSpec) -> Result<Table> {
    let rep = mass_report(run, spec)?;
    let mut csv = String::from("tau,mass,bound\n");
    for j in 0..rep.times.len() {
        let _ = writeln!(csv, "{},{},{}", fmt_num(rep.times[j]), fmt_num(rep.masses[j]), fmt_num(rep.bound[j]));
    }
    Ok(Table::new("mass", csv))
}

fn mass_checks(config: &ExperimentConfig, run: &SpaceTimeField, spec: &ProblemSpec) -> Result<Vec<CheckReport>> {
    let d = MassTolerances::default();
    let tol = MassTolerances {
        identity: config.tolerance("mass-identity", d.identity),
        bound_rel: config.tolerance("mass-bound", d.bound_rel),
        conservation_per_step: config.tolerance("mass-conservation", d.conservation_per_step),
    };
    if spec.mesh.topology().is_closed() {
        mass_evolution_check(run, spec, &tol)
    } else {
        boundary_mass_check(run, spec, &tol)
    }
}

/// Solver warnings as informational records; they do not change the run status.
fn warnings(run: &SpaceTimeField) -> Vec<CheckReport> {
    run.warnings
        .iter()
        .map(|w| CheckReport::new("solver-warning", f64::NAN, f64::NAN, 0.0, Verdict::Pass).with_note(w.clone()))
        .collect()
}

fn solve(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let u0 = match &config.checks.initial {
        Some(src) => nodal(spec, "checks.initial", src)?,
        None => initial_bump(spec)?.0,
    };
    let run = solve_forward(spec, &u0, 0, spec.steps())?;
    let sup = run.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let finite = run.values.iter().flatten().all(|v| v.is_finite());
    let mut reports = vec![CheckReport::new("solve-finite", sup, f64::INFINITY, 0.0, if finite { Verdict::Pass } else { Verdict::Fail })
        .with_note(format!("{} steps", run.len() - 1))];
    reports.extend(mass_checks(config, &run, spec)?);
    reports.extend(warnings(&run));
    let tables = vec![snapshot_table("solution", &run, spec, &snapshot_taus(config, spec)), mass_table(&run, spec)?];
    Ok((reports, tables))
}

/// Reference family for a flat one-dimensional problem with zero coefficients.
fn flat_oracle_family(spec: &ProblemSpec) -> Result<Option<OracleFamily>> {
    let family = match (spec.mesh.topology(), &spec.boundary) {
        (Topology::Circle, _) => OracleFamily::CircleWrappedGaussian,
        (Topology::Interval, Boundary::DirichletZero) => OracleFamily::IntervalDirichletSeries,
        (Topology::Interval, Boundary::NeumannZero) => OracleFamily::IntervalNeumannSeries,
        _ => return Ok(None),
    };
    for t in [0.0, spec.horizon] {
        let m = spec.sample(t)?;
        let c = sample_coefficients(&spec.coefficients, &m, &spec.mesh);
        let flat = m.scale.iter().all(|s| (s - 1.0).abs() < 1e-14) && m.trace_r.iter().all(|r| *r == 0.0);
        if !flat || c.has_drift() || c.potential.iter().any(|q| *q != 0.0) {
            return Ok(None);
        }
    }
    Ok(Some(family))
}

/// Sup over `tau >= tau_min` of `max |H - O| / max O`, with the oracle taken
/// at `tau + w^2 / 2` to account for the initial bump.
fn oracle_check(run: &SpaceTimeField, spec: &ProblemSpec, family: OracleFamily, tau_min: f64, tol: f64) -> Result<CheckReport> {
    let length = spec.mesh.extent()[0];
    let shift = 0.5 * spec.delta_width * spec.delta_width;
    let x0 = spec.mesh.coords(spec.base_point)[0];
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for j in 0..run.len() {
        let t = run.times[j];
        if t + 1e-12 < tau_min {
            continue;
        }
        let oracle = OracleKernel::new(family, length, t + shift, x0)?;
        let (mut diff, mut peak): (f64, f64) = (0.0, 0.0);
        for (i, u) in run.values[j].iter().enumerate() {
            let o = oracle.value(spec.mesh.coords(i)[0]);
            diff = diff.max((u - o).abs());
            peak = peak.max(o.abs());
        }
        if diff / peak > worst {
            worst = diff / peak;
            at = t;
        }
    }
    Ok(CheckReport::upper("kernel-oracle", worst, 0.0, tol).with_note(format!("{family:?}, worst at tau = {at}, time shift {shift:.3e}")))
}

fn kernel(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let run = fundamental_solution(spec)?;
    let taus = snapshot_taus(config, spec);
    let mut reports = vec![CheckReport::lower("kernel-positivity", run.min_ratio(), 0.0, config.tolerance("kernel-positivity", 1e-8))];
    for &tau in &taus {
        let j = run.index_of(tau);
        reports.push(
            CheckReport::new("kernel-value", run.values[j][spec.base_point], f64::NAN, 0.0, Verdict::Pass)
                .at_tau(run.times[j])
                .with_note("H(x0, tau)"),
        );
    }
    if config.checks.oracle {
        match flat_oracle_family(spec)? {
            Some(family) => {
                let tau_min = config.checks.window.map(|w| w[0]).unwrap_or(0.01);
                reports.push(oracle_check(&run, spec, family, tau_min, config.tolerance("kernel-oracle", 1e-3))?);
            }
            None => reports.push(
                CheckReport::new("kernel-oracle", f64::NAN, 0.0, 0.0, Verdict::Skip).with_note("no closed-form kernel for this problem"),
            ),
        }
    }
    reports.extend(warnings(&run));
    Ok((reports, vec![snapshot_table("kernel", &run, spec, &taus), mass_table(&run, spec)?]))
}

fn verify_mass(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let run = fundamental_solution(spec)?;
    let mut reports = mass_checks(config, &run, spec)?;
    reports.extend(warnings(&run));
    Ok((reports, vec![mass_table(&run, spec)?]))
}

fn probe_radius(config: &ExperimentConfig, spec: &ProblemSpec) -> f64 {
    let m = &spec.mesh;
    let min_extent = m.extent()[..m.dimension()].iter().cloned().fold(f64::INFINITY, f64::min);
    config.checks.radius.unwrap_or(0.25 * min_extent)
}

fn verify_mvi(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let run = fundamental_solution(spec)?;
    let t = spec.horizon;
    let w = spec.delta_width;
    let choice = compute_a(spec, None)?;
    let ps = if config.checks.p.is_empty() { vec![1.0, 2.0] } else { config.checks.p.clone() };
    let mut a_ps = ps.clone();
    if !a_ps.contains(&10.0) {
        a_ps.push(10.0);
    }
    let mut reports = vec![a_choice_check(spec, None, &choice, &a_ps)?];
    let [tau1, tau2] = config.checks.window.unwrap_or([(10.0 * w * w).max(0.1 * t), t]);
    let radius = probe_radius(config, spec);
    let mut table = String::from("p,l,gradient_lhs,gradient_rhs,terminal_lhs,terminal_rhs\n");
    for &p in &ps {
        let probe = ReversePoincareProbe { tau1, tau2, center: spec.base_point, radius, p, a: choice.a };
        let out = reverse_poincare_check(&run, spec, &probe)?;
        let _ = writeln!(
            table,
            "{},{},{},{},{},{}",
            fmt_num(p),
            fmt_num(out.l),
            fmt_num(out.gradient_lhs),
            fmt_num(out.gradient_rhs),
            fmt_num(out.terminal_lhs),
            fmt_num(out.terminal_rhs)
        );
        reports.extend(out.reports.into_iter().map(|r| r.with_note(format!("p = {p}"))));
    }
    let r0 = config.checks.mvi_r0.unwrap_or((0.5 * radius).min(0.5 * (t - 10.0 * w * w).max(0.0).sqrt()).min(1.0));
    let tau0 = config.checks.mvi_tau0.unwrap_or(t);
    reports.push(mvi_ratio_probe(&run, spec, &MviProbe { center: spec.base_point, tau0, r0 })?);
    reports.extend(warnings(&run));
    Ok((reports, vec![Table::new("reverse_poincare", table)]))
}

fn verify_cutoff(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let cfg = config.cutoff.as_ref().ok_or_else(|| Error::Config { path: "cutoff".into(), message: "verify-cutoff needs a [cutoff] section".into() })?;
    let profile = build_profile();
    let mut reports = vec![profile_inequality_check(&profile, 20_000)];
    let (cutoff, constants) = derive_cutoff_constants(spec, cfg.r_star)?;
    reports.push(constants);
    let tol = config.tolerance("cutoff-heat-inequality", cutoff_tolerance(spec, cfg.c_disc.unwrap_or(1.0)));
    reports.push(cutoff_heat_inequality_check(&cutoff, &profile, spec, tol)?);

    let run = fundamental_solution(spec)?;
    reports.push(local_lower_bound_check(&run, spec, &cutoff, LowerBoundKind::FundamentalSolution, config.tolerance("local-lower-bound", 1e-3))?);

    let k_star = cutoff.inputs.k_star;
    let steps = spec.steps();
    let taus: Vec<f64> = (0..steps).step_by((steps / 8).max(1)).map(|j| spec.time(j)).collect();
    reports.push(distance_evolution_check(&spec.metric, &spec.mesh, spec.base_point, &taus, spec.dt, k_star, cutoff.r_hat)?);
    let s0 = spec.sample(0.0)?;
    let lap_tol = config.tolerance("laplacian-of-distance", laplacian_tolerance(&spec.mesh, cutoff.r_hat));
    reports.push(laplacian_of_distance_check(&s0, &spec.mesh, spec.base_point, cutoff.r_hat, k_star, lap_tol));
    reports.extend(warnings(&run));

    let mut csv = String::from("name,value,formula\n");
    let i = &cutoff.inputs;
    let values = [
        ("r_star", i.r_star),
        ("c0", i.c0),
        ("k_star", i.k_star),
        ("k1", i.k1),
        ("k2", i.k2),
        ("r_hat", cutoff.r_hat),
        ("b", cutoff.b),
        ("a", cutoff.a),
        ("t1", cutoff.t1),
        ("log_bound", cutoff.log_bound),
    ];
    for (name, v) in values {
        let formula = cutoff.provenance.get(name).map(String::as_str).unwrap_or("measured");
        let _ = writeln!(csv, "{name},{},\"{formula}\"", fmt_num(v));
    }
    Ok((reports, vec![Table::new("cutoff_constants", csv)]))
}

/// Halving widths `[w, w/2, w/4]`, with `w` raised to `8 h` when needed so
/// the narrowest bump stays resolved.
fn halving_widths(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let m = &spec.mesh;
    let h = m.max_spacing();
    let min_extent = m.extent()[..m.dimension()].iter().cloned().fold(f64::INFINITY, f64::min);
    let w = spec.delta_width.max(8.0 * h);
    if w > min_extent / 20.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "width halving needs 8 h <= extent / 20; spacing {h} is too coarse"
        )));
    }
    Ok(vec![w, 0.5 * w, 0.25 * w])
}

fn verify_duality(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let phis = if config.checks.phi.is_empty() { vec!["1".to_string()] } else { config.checks.phi.clone() };
    let tau_bar = config.checks.tau_bar.unwrap_or(spec.horizon);
    let tol = config.tolerance("duality", 5e-3);
    let mut reports = Vec::new();
    let mut csv = String::from("phi,kernel_side,adjoint_side\n");
    for (n, src) in phis.iter().enumerate() {
        let phi = nodal(spec, &format!("checks.phi[{n}]"), src)?;
        let out = duality_uniqueness_check(spec, &phi, tau_bar, tol)?;
        let _ = writeln!(csv, "\"{src}\",{},{}", fmt_num(out.kernel_side), fmt_num(out.adjoint_side));
        reports.extend(out.reports.into_iter().map(|r| r.member(n + 1).with_note(format!("phi = {src}"))));
    }
    let (_, halving) = delta_width_study(spec, &halving_widths(spec)?)?;
    reports.push(halving);
    Ok((reports, vec![Table::new("duality", csv)]))
}

fn verify_delta(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let src = config.checks.test_field.as_deref().ok_or_else(|| Error::Config {
        path: "checks.test_field".into(),
        message: "verify-delta needs a test field".into(),
    })?;
    let f = nodal(spec, "checks.test_field", src)?;
    let run = fundamental_solution(spec)?;
    let taus: Vec<f64> = if config.checks.taus.is_empty() { vec![0.02, 0.05, 0.1] } else { config.checks.taus.clone() };
    let taus: Vec<f64> = taus.into_iter().filter(|&t| t <= spec.horizon + 1e-12).collect();
    let c_star = config.checks.c_star.unwrap_or_else(|| run.masses.iter().cloned().fold(0.0, f64::max));
    let out = delta_property_check(&run, spec, &f, &taus, c_star)?;
    let mut csv = String::from("tau,pairing\n");
    for (t, p) in taus.iter().zip(&out.pairings) {
        let _ = writeln!(csv, "{},{}", fmt_num(*t), fmt_num(*p));
    }
    let interior: Vec<usize> = (0..spec.mesh.len()).filter(|&i| !spec.mesh.is_boundary(i)).collect();
    let w = spec.delta_width;
    let tau1 = ((10.0 * w * w / spec.dt).ceil() * spec.dt).min(spec.horizon);
    let mut reports = vec![out.report, positivity_check(&run, spec, &interior, tau1)?];
    reports.extend(warnings(&run));
    Ok((reports, vec![Table::new("delta_pairings", csv)]))
}

fn cg_run(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<Outputs> {
    let (name, options) = config.sequence_options()?;
    let seq = match name {
        SequenceKindName::EdgeSources => edge_source_sequence(spec, &options)?,
        other => build_sequence(other.kind(), spec, &options)?,
    };
    let rep = run_sequence(&seq)?;
    let mut reports = rep.reports.clone();
    let l = &rep.ledger;
    reports.push(
        CheckReport::new("cg-hypothesis", f64::NAN, f64::NAN, 0.0, Verdict::Pass)
            .with_note(format!("global mass bound held: {}", l.global_held))
            .with_note(format!("local mass bound held: {}", l.local_held))
            .with_note(format!("limit mass bound asserted: {}", l.limit_bound_asserted)),
    );
    Ok((reports, vec![Table::new("convergence", rep.to_csv())]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: &str, extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
experiment = "{kind}"

[mesh]
topology = "circle"
extent = [1.0]
cells = [64]

[metric]
kind = "density"
value = "1"

[solver]
base_point = [0.5]
horizon = 0.05
dt = 0.005
delta_width = 0.04
{extra}
"#
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn kernel_with_oracle_passes() {
        let mut c = config("kernel", "[checks]\noracle = true\nwindow = [0.02, 0.05]\n");
        c.solver.dt = 1e-3;
        c.tolerances.insert("kernel-oracle".into(), 1e-2);
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.status, RunStatus::Pass, "{:#?}", out.reports);
        assert!(out.reports.iter().any(|r| r.id == "kernel-oracle"));
        assert_eq!(out.tables.len(), 2);
    }

    #[test]
    fn mass_on_flat_circle() {
        let out = run_experiment(&config("verify-mass", "")).unwrap();
        assert_eq!(out.status, RunStatus::Pass, "{:#?}", out.reports);
    }

    #[test]
    fn delta_needs_test_field() {
        assert!(matches!(run_experiment(&config("verify-delta", "")), Err(Error::Config { .. })));
    }

    #[test]
    fn duality_phi_error_names_index() {
        let err = run_experiment(&config("verify-duality", "[checks]\nphi = [\"1\", \"cos(\"]\n")).unwrap_err();
        assert!(err.to_string().starts_with("checks.phi[1]"), "{err}");
    }
}
