//! Geodesic distance from a node and the two distance comparison checks.
//!
//! In one dimension the distance is the exact arc length of the piecewise
//! midpoint quadrature `sum s_face h`, which makes the discrete Laplacian of
//! `d` vanish identically away from the source and the cut point. On the
//! 2-torus a shortest path over a wide stencil of lattice segments gives a
//! first estimate; nodes within `0.45` of a period of the source are then
//! refined by shooting geodesics and solving `exp_{x0}(r v(theta)) = x` with
//! Newton's method, so second differences of `d` are not swamped by the
//! path-graph anisotropy.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::check::{CheckReport, Verdict};
use crate::error::Result;
use crate::mesh::{Mesh, Topology};
use crate::metric::{sample_metric, MetricFamily, MetricSample};
use crate::operators::{coordinate_gradient, laplace_beltrami};
use rayon::prelude::*;

/// Largest lattice offset used by the torus shortest-path stencil.
pub const STENCIL_RADIUS: i64 = 5;

/// Gradient norm below which a node is treated as lying on the cut locus.
const CUT_GRADIENT_FLOOR: f64 = 0.9;

/// Fraction of the shorter period inside which torus distances are refined by shooting.
const SHOOTING_REACH: f64 = 0.45;
/// RK4 steps per shot geodesic (fixed so errors vary smoothly between nodes).
const SHOOTING_STEPS: usize = 32;

/// `d_{g(tau)}(x, source)` at every node.
pub fn geodesic_distance(sample: &MetricSample, mesh: &Mesh, source: usize) -> Vec<f64> {
    geodesic_distance_within(sample, mesh, source, f64::INFINITY)
}

/// As [`geodesic_distance`], but on the torus only nodes with graph distance
/// below `radius` are refined by shooting.
pub fn geodesic_distance_within(sample: &MetricSample, mesh: &Mesh, source: usize, radius: f64) -> Vec<f64> {
    match mesh.topology() {
        Topology::Circle | Topology::Interval => distance_1d(sample, mesh, source),
        Topology::Torus2 => {
            let mut d = distance_torus(sample, mesh, source);
            refine_by_shooting(sample, mesh, source, radius, &mut d);
            d
        }
    }
}

fn distance_1d(sample: &MetricSample, mesh: &Mesh, source: usize) -> Vec<f64> {
    let nx = mesh.nx();
    let h = mesh.spacing()[0];
    let mut d = vec![f64::INFINITY; nx];
    d[source] = 0.0;
    let periodic = mesh.topology() == Topology::Circle;
    // walk right, then left; on the circle each walk wraps all the way round
    let steps = if periodic { nx - 1 } else { nx - 1 - source };
    let mut acc = 0.0;
    let mut i = source;
    for _ in 0..steps {
        acc += sample.face_scale_x[i] * h;
        i = (i + 1) % nx;
        d[i] = d[i].min(acc);
    }
    let steps = if periodic { nx - 1 } else { source };
    let mut acc = 0.0;
    let mut i = source;
    for _ in 0..steps {
        let f = (i + nx - 1) % nx;
        acc += sample.face_scale_x[f] * h;
        i = f;
        d[i] = d[i].min(acc);
    }
    d
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn stencil() -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for p in -STENCIL_RADIUS..=STENCIL_RADIUS {
        for q in -STENCIL_RADIUS..=STENCIL_RADIUS {
            if (p, q) != (0, 0) && gcd(p, q) == 1 {
                out.push((p, q));
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by node index
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn distance_torus(sample: &MetricSample, mesh: &Mesh, source: usize) -> Vec<f64> {
    let family = sample.family();
    let tau = sample.tau;
    let (nx, ny) = (mesh.nx() as i64, mesh.ny() as i64);
    let [hx, hy] = mesh.spacing();
    let offsets = stencil();
    // three-point Gauss-Legendre on [0, 1]
    let c = (0.6f64).sqrt() / 2.0;
    let nodes = [0.5 - c, 0.5, 0.5 + c];
    let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let segment = |from: [f64; 2], p: i64, q: i64| -> f64 {
        let (dx, dy) = (p as f64 * hx, q as f64 * hy);
        let len = (dx * dx + dy * dy).sqrt();
        let mean: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| w * family.scale(from[0] + t * dx, from[1] + t * dy, tau))
            .sum();
        len * mean
    };

    let mut dist = vec![f64::INFINITY; mesh.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, idx)) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let (i, j) = mesh.ij(idx);
        let from = mesh.coords(idx);
        for &(p, q) in &offsets {
            let ni = (i as i64 + p).rem_euclid(nx) as usize;
            let nj = (j as i64 + q).rem_euclid(ny) as usize;
            let target = mesh.index(ni, nj);
            let cand = d + segment(from, p, q);
            if cand < dist[target] {
                dist[target] = cand;
                heap.push(Entry(cand, target));
            }
        }
    }
    dist
}

/// `grad ln s` by central differences.
fn log_scale_gradient(family: &MetricFamily, x: f64, y: f64, tau: f64) -> [f64; 2] {
    let e = 1e-6;
    let ls = |a: f64, b: f64| family.scale(a, b, tau).ln();
    [
        (ls(x + e, y) - ls(x - e, y)) / (2.0 * e),
        (ls(x, y + e) - ls(x, y - e)) / (2.0 * e),
    ]
}

/// Unit-speed geodesic of `exp(2 phi) delta` from `start` in coordinate
/// direction `theta`, run for arc length `r`. Returns end point and velocity.
fn shoot(family: &MetricFamily, tau: f64, start: [f64; 2], theta: f64, r: f64) -> ([f64; 2], [f64; 2]) {
    let speed = 1.0 / family.scale(start[0], start[1], tau);
    let mut z = [start[0], start[1], speed * theta.cos(), speed * theta.sin()];
    let rhs = |z: [f64; 4]| -> [f64; 4] {
        let g = log_scale_gradient(family, z[0], z[1], tau);
        let (vx, vy) = (z[2], z[3]);
        let gv = g[0] * vx + g[1] * vy;
        let vv = vx * vx + vy * vy;
        [vx, vy, -2.0 * gv * vx + vv * g[0], -2.0 * gv * vy + vv * g[1]]
    };
    let h = r / SHOOTING_STEPS as f64;
    let add = |a: [f64; 4], b: [f64; 4], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]];
    for _ in 0..SHOOTING_STEPS {
        let k1 = rhs(z);
        let k2 = rhs(add(z, k1, 0.5 * h));
        let k3 = rhs(add(z, k2, 0.5 * h));
        let k4 = rhs(add(z, k3, h));
        for c in 0..4 {
            z[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    ([z[0], z[1]], [z[2], z[3]])
}

fn refine_by_shooting(sample: &MetricSample, mesh: &Mesh, source: usize, radius: f64, dist: &mut [f64]) {
    let family = sample.family();
    let tau = sample.tau;
    let [lx, ly] = mesh.extent();
    let reach = SHOOTING_REACH * lx.min(ly);
    let origin = mesh.coords(source);
    let refined: Vec<(usize, f64)> = (0..mesh.len())
        .into_par_iter()
        .filter_map(|idx| {
            let delta = mesh.displacement(origin, mesh.coords(idx));
            let flat = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
            if idx == source || flat > reach || dist[idx] > radius {
                return None;
            }
            let target = [origin[0] + delta[0], origin[1] + delta[1]];
            let (mut theta, mut r) = (delta[1].atan2(delta[0]), dist[idx]);
            for _ in 0..12 {
                let (end, vel) = shoot(family, tau, origin, theta, r);
                let f = [end[0] - target[0], end[1] - target[1]];
                if f[0].hypot(f[1]) < 1e-11 {
                    return (r <= dist[idx] + 1e-9).then_some((idx, r));
                }
                let dth = 1e-7;
                let (end2, _) = shoot(family, tau, origin, theta + dth, r);
                let jt = [(end2[0] - end[0]) / dth, (end2[1] - end[1]) / dth];
                let det = jt[0] * vel[1] - jt[1] * vel[0];
                if det.abs() < 1e-14 {
                    return None;
                }
                theta -= (f[0] * vel[1] - f[1] * vel[0]) / det;
                r -= (jt[0] * f[1] - jt[1] * f[0]) / det;
            }
            None
        })
        .collect();
    for (idx, r) in refined {
        dist[idx] = r;
    }
}

/// Nodes where the discrete distance is not locally smooth: local maxima
/// along an axis, or centered gradient norm below 0.9.
pub fn cut_locus(distance: &[f64], sample: &MetricSample, mesh: &Mesh) -> Vec<bool> {
    let grad = coordinate_gradient(distance, mesh);
    let (nx, ny) = (mesh.nx(), mesh.ny());
    (0..mesh.len())
        .map(|idx| {
            let norm = (grad[idx][0].powi(2) + grad[idx][1].powi(2)).sqrt() / sample.scale[idx];
            if norm < CUT_GRADIENT_FLOOR {
                return true;
            }
            let (i, j) = mesh.ij(idx);
            let d = distance[idx];
            let ridge_x = match mesh.topology() {
                Topology::Interval => i > 0 && i + 1 < nx && d >= distance[i - 1] && d >= distance[i + 1],
                _ => d >= distance[mesh.index((i + 1) % nx, j)] && d >= distance[mesh.index((i + nx - 1) % nx, j)],
            };
            let ridge_y = mesh.topology() == Topology::Torus2
                && d >= distance[mesh.index(i, (j + 1) % ny)]
                && d >= distance[mesh.index(i, (j + ny - 1) % ny)];
            ridge_x || ridge_y
        })
        .collect()
}

/// Checks `(d(tau + dt) - d(tau)) / dt <= K* d(tau)` on `B_{g(tau)}(source, radius)`.
///
/// The discrete right side uses the integrated form `d (e^{K* dt} - 1) / dt`,
/// which is what Gronwall gives for the forward difference.
pub fn distance_evolution_check(
    family: &MetricFamily,
    mesh: &Mesh,
    source: usize,
    taus: &[f64],
    dt: f64,
    k_star: f64,
    radius: f64,
) -> Result<CheckReport> {
    let growth = if k_star > 0.0 { (k_star * dt).exp_m1() / dt } else { 0.0 };
    let tol = 1e-9;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0usize, 0.0f64);
    let mut probed = 0usize;
    for &tau in taus {
        let s0 = sample_metric(family, mesh, tau, 0.5 * dt)?;
        let s1 = sample_metric(family, mesh, tau + dt, 0.5 * dt)?;
        let d0 = geodesic_distance(&s0, mesh, source);
        let d1 = geodesic_distance(&s1, mesh, source);
        for idx in 0..mesh.len() {
            if d0[idx] > radius {
                continue;
            }
            probed += 1;
            let excess = (d1[idx] - d0[idx]) / dt - growth * d0[idx];
            if excess > worst {
                worst = excess;
                worst_at = (idx, tau);
            }
        }
    }
    if probed == 0 {
        return Ok(CheckReport::new("distance-evolution", 0.0, 0.0, tol, Verdict::Skip).with_note("empty ball"));
    }
    Ok(CheckReport::upper("distance-evolution", worst, 0.0, tol)
        .with_note(format!("K* = {k_star:.6e}, probed {probed} node-times"))
        .with_note(format!("worst node {} at tau {}", worst_at.0, worst_at.1)))
}

/// Default tolerance for [`laplacian_of_distance_check`]: round-off in one
/// dimension; on the torus the five-point truncation `h^2 / (2 r^3)` of
/// `Delta r` at the inner radius `r = r_hat / 10`.
pub fn laplacian_tolerance(mesh: &Mesh, r_hat: f64) -> f64 {
    match mesh.topology() {
        Topology::Torus2 => {
            let h = mesh.max_spacing();
            let inner = r_hat / 10.0;
            h * h / (2.0 * inner.powi(3))
        }
        _ => 1e-8 * (1.0 + 1.0 / r_hat),
    }
}

/// Checks `Delta d <= 10 (n - 1) / r_hat + K* r_hat` on the annulus
/// `r_hat / 10 <= d <= r_hat`, excluding cut-locus and boundary nodes.
pub fn laplacian_of_distance_check(
    sample: &MetricSample,
    mesh: &Mesh,
    source: usize,
    r_hat: f64,
    k_star: f64,
    tolerance: f64,
) -> CheckReport {
    let n = mesh.dimension() as f64;
    let bound = 10.0 * (n - 1.0) / r_hat + k_star * r_hat;
    let margin = 3.0 * mesh.max_spacing() * sample.scale.iter().fold(0.0f64, |m, v| m.max(*v));
    let d = geodesic_distance_within(sample, mesh, source, r_hat + margin);
    let lap = laplace_beltrami(&d, sample, mesh);
    let cut = cut_locus(&d, sample, mesh);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_node = None;
    let (mut probed, mut excluded) = (0usize, 0usize);
    for idx in 0..mesh.len() {
        if d[idx] < r_hat / 10.0 || d[idx] > r_hat || mesh.is_boundary(idx) {
            continue;
        }
        if cut[idx] {
            excluded += 1;
            continue;
        }
        probed += 1;
        if lap[idx] > worst {
            worst = lap[idx];
            worst_node = Some(idx);
        }
    }
    if probed == 0 {
        return CheckReport::new("laplacian-of-distance", 0.0, bound, tolerance, Verdict::Skip)
            .with_note("annulus has no smooth nodes");
    }
    CheckReport::upper("laplacian-of-distance", worst, bound, tolerance)
        .at_tau(sample.tau)
        .with_note(format!("probed {probed}, excluded {excluded} cut-locus nodes"))
        .with_note(format!("worst node {}", worst_node.unwrap_or(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::metric::MetricKind;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn flat_circle_wraps() {
        let m = build_mesh(Topology::Circle, [1.0, 0.0], [100, 0]).unwrap();
        let s = sample_metric(&MetricFamily::flat(MetricKind::Density), &m, 0.0, 1e-3).unwrap();
        let d = geodesic_distance(&s, &m, 0);
        assert_relative_eq!(d[30], 0.3, epsilon = 1e-12);
        assert_relative_eq!(d[70], 0.3, epsilon = 1e-12);
        assert_relative_eq!(d[50], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_density_interval() {
        let m = build_mesh(Topology::Interval, [1.0, 0.0], [64, 0]).unwrap();
        let s = sample_metric(&MetricFamily::density(|_, _| 2.0), &m, 0.0, 1e-3).unwrap();
        let d = geodesic_distance(&s, &m, 0);
        for i in 0..m.len() {
            assert_relative_eq!(d[i], 2.0 * m.coords(i)[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_density_is_integrated_exactly() {
        let m = build_mesh(Topology::Interval, [1.0, 0.0], [50, 0]).unwrap();
        let s = sample_metric(&MetricFamily::density(|x, _| 1.0 + x), &m, 0.0, 1e-3).unwrap();
        let d = geodesic_distance(&s, &m, 0);
        for i in 0..m.len() {
            let x = m.coords(i)[0];
            assert_relative_eq!(d[i], x + x * x / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn flat_torus_distance_is_nearly_euclidean() {
        let m = build_mesh(Topology::Torus2, [1.0, 1.0], [64, 64]).unwrap();
        let s = sample_metric(&MetricFamily::flat(MetricKind::ConformalExponent), &m, 0.0, 1e-3).unwrap();
        let src = m.index(32, 32);
        let d = geodesic_distance(&s, &m, src);
        let mut worst: f64 = 0.0;
        for idx in 0..m.len() {
            let delta = m.displacement(m.coords(src), m.coords(idx));
            let e = (delta[0].powi(2) + delta[1].powi(2)).sqrt();
            if e > 0.0 {
                worst = worst.max((d[idx] - e) / e);
                assert!(d[idx] >= e - 1e-12);
            }
        }
        assert!(worst < 6e-3, "anisotropy {worst}");
    }

    #[test]
    fn one_dimensional_laplacian_of_distance_vanishes() {
        let m = build_mesh(Topology::Circle, [1.0, 0.0], [128, 0]).unwrap();
        let fam = MetricFamily::density(|x, _| 1.0 + 0.3 * (2.0 * PI * x).sin());
        let s = sample_metric(&fam, &m, 0.0, 1e-3).unwrap();
        let d = geodesic_distance(&s, &m, 10);
        let lap = laplace_beltrami(&d, &s, &m);
        let cut = cut_locus(&d, &s, &m);
        let smooth: Vec<usize> = (0..m.len()).filter(|&i| !cut[i] && i != 10).collect();
        assert!(smooth.len() > 100);
        for i in smooth {
            let nb = [(i + 1) % 128, (i + 127) % 128];
            if nb.iter().any(|&j| cut[j] || j == 10) {
                continue;
            }
            assert!(lap[i].abs() < 1e-8, "node {i}: {}", lap[i]);
        }
    }

    #[test]
    fn static_metric_distance_is_constant_in_time() {
        let m = build_mesh(Topology::Circle, [1.0, 0.0], [64, 0]).unwrap();
        let fam = MetricFamily::density(|x, _| 1.0 + 0.2 * (2.0 * PI * x).cos());
        let r = distance_evolution_check(&fam, &m, 0, &[0.0, 0.5], 1e-3, 0.0, 0.4).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.measured.abs() < 1e-9);
    }

    #[test]
    fn uniform_expansion_saturates_the_rate() {
        let m = build_mesh(Topology::Circle, [1.0, 0.0], [64, 0]).unwrap();
        let fam = MetricFamily::density(|_, t| 1.0 + 0.1 * t).with_time_derivative(|_, _, _| 0.1);
        let r = distance_evolution_check(&fam, &m, 0, &[0.0, 0.5, 0.9], 1e-3, 0.1, 0.5).unwrap();
        assert!(r.passed(), "{r}");
        // equality at tau = 0 up to the Gronwall factor
        assert!(r.measured > -1e-4);
        let too_small = distance_evolution_check(&fam, &m, 0, &[0.0], 1e-3, 0.05, 0.5).unwrap();
        assert_eq!(too_small.verdict, Verdict::Fail);
    }
}
