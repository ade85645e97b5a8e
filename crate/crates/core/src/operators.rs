//! Discrete Laplace-Beltrami, drift and divergence operators and volume integrals.
//!
//! The Laplacian is written in conservative form with face conductances
//! `s^(n-2)` and node volume weights `s^n * cell`, so it is symmetric in the
//! weighted inner product: `sum w v (Lap u) = sum w u (Lap v)` exactly. The
//! centered drift and divergence stencils satisfy the discrete divergence
//! theorem `sum w (nabla_X u) = -sum w u div X` exactly on closed meshes.

use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, Topology};
use crate::metric::MetricSample;

/// Matrix of `Delta_{g(tau)}`. Interval ends carry the zero-flux (mirror) closure.
pub fn laplacian_matrix(sample: &MetricSample, mesh: &Mesh) -> CsrMatrix {
    let [hx, hy] = mesh.spacing();
    let len = mesh.len();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(len);
    match mesh.topology() {
        Topology::Circle | Topology::Interval => {
            let periodic = mesh.topology() == Topology::Circle;
            let nx = mesh.nx();
            for i in 0..nx {
                let weight = sample.volume_density[i] * mesh.cell_volume(i);
                let mut row = Vec::with_capacity(3);
                // face to the right: i -> i+1
                if periodic || i + 1 < nx {
                    let k = sample.conductance_x(i) / hx / weight;
                    row.push(((i + 1) % nx, k));
                    row.push((i, -k));
                }
                // face to the left: i-1 -> i
                if periodic || i > 0 {
                    let f = (i + nx - 1) % nx;
                    let k = sample.conductance_x(f) / hx / weight;
                    row.push((f, k));
                    row.push((i, -k));
                }
                rows.push(row);
            }
        }
        Topology::Torus2 => {
            let (nx, ny) = (mesh.nx(), mesh.ny());
            for idx in 0..len {
                let (i, j) = mesh.ij(idx);
                let inv = 1.0 / sample.g_components[idx];
                let (kx, ky) = (inv / (hx * hx), inv / (hy * hy));
                rows.push(vec![
                    (mesh.index((i + 1) % nx, j), kx),
                    (mesh.index((i + nx - 1) % nx, j), kx),
                    (mesh.index(i, (j + 1) % ny), ky),
                    (mesh.index(i, (j + ny - 1) % ny), ky),
                    (idx, -2.0 * (kx + ky)),
                ]);
            }
        }
    }
    CsrMatrix::from_rows(rows)
}

/// Matrix of `nabla_X u = X^i d_i u` with centered differences.
pub fn drift_matrix(drift: &[[f64; 2]], mesh: &Mesh) -> CsrMatrix {
    let [hx, hy] = mesh.spacing();
    let len = mesh.len();
    let mut rows = Vec::with_capacity(len);
    match mesh.topology() {
        Topology::Circle => {
            let nx = mesh.nx();
            for i in 0..nx {
                let c = drift[i][0] / (2.0 * hx);
                rows.push(vec![((i + 1) % nx, c), ((i + nx - 1) % nx, -c)]);
            }
        }
        Topology::Interval => {
            let nx = mesh.nx();
            for i in 0..nx {
                // mirror ghost at the ends gives a vanishing centered difference
                if i == 0 || i + 1 == nx {
                    rows.push(Vec::new());
                } else {
                    let c = drift[i][0] / (2.0 * hx);
                    rows.push(vec![(i + 1, c), (i - 1, -c)]);
                }
            }
        }
        Topology::Torus2 => {
            let (nx, ny) = (mesh.nx(), mesh.ny());
            for idx in 0..len {
                let (i, j) = mesh.ij(idx);
                let cx = drift[idx][0] / (2.0 * hx);
                let cy = drift[idx][1] / (2.0 * hy);
                rows.push(vec![
                    (mesh.index((i + 1) % nx, j), cx),
                    (mesh.index((i + nx - 1) % nx, j), -cx),
                    (mesh.index(i, (j + 1) % ny), cy),
                    (mesh.index(i, (j + ny - 1) % ny), -cy),
                ]);
            }
        }
    }
    CsrMatrix::from_rows(rows)
}

pub fn laplace_beltrami(u: &[f64], sample: &MetricSample, mesh: &Mesh) -> Vec<f64> {
    laplacian_matrix(sample, mesh).apply(u)
}

pub fn gradient_term(u: &[f64], drift: &[[f64; 2]], mesh: &Mesh) -> Vec<f64> {
    drift_matrix(drift, mesh).apply(u)
}

/// `div_{g} X = (sqrt det g)^-1 d_i (sqrt det g X^i)`, centered; one-sided
/// second-order differences at interval ends.
pub fn divergence_of(drift: &[[f64; 2]], sample: &MetricSample, mesh: &Mesh) -> Vec<f64> {
    let [hx, hy] = mesh.spacing();
    let len = mesh.len();
    let flux_x: Vec<f64> = (0..len).map(|i| sample.volume_density[i] * drift[i][0]).collect();
    match mesh.topology() {
        Topology::Circle => {
            let nx = mesh.nx();
            (0..nx)
                .map(|i| (flux_x[(i + 1) % nx] - flux_x[(i + nx - 1) % nx]) / (2.0 * hx) / sample.volume_density[i])
                .collect()
        }
        Topology::Interval => {
            let nx = mesh.nx();
            (0..nx)
                .map(|i| {
                    let d = if i == 0 {
                        (-3.0 * flux_x[0] + 4.0 * flux_x[1] - flux_x[2]) / (2.0 * hx)
                    } else if i + 1 == nx {
                        (3.0 * flux_x[i] - 4.0 * flux_x[i - 1] + flux_x[i - 2]) / (2.0 * hx)
                    } else {
                        (flux_x[i + 1] - flux_x[i - 1]) / (2.0 * hx)
                    };
                    d / sample.volume_density[i]
                })
                .collect()
        }
        Topology::Torus2 => {
            let (nx, ny) = (mesh.nx(), mesh.ny());
            let flux_y: Vec<f64> = (0..len).map(|i| sample.volume_density[i] * drift[i][1]).collect();
            (0..len)
                .map(|idx| {
                    let (i, j) = mesh.ij(idx);
                    let dx = (flux_x[mesh.index((i + 1) % nx, j)] - flux_x[mesh.index((i + nx - 1) % nx, j)]) / (2.0 * hx);
                    let dy = (flux_y[mesh.index(i, (j + 1) % ny)] - flux_y[mesh.index(i, (j + ny - 1) % ny)]) / (2.0 * hy);
                    (dx + dy) / sample.volume_density[idx]
                })
                .collect()
        }
    }
}

/// Centered coordinate gradient `(d_x u, d_y u)` per node; one-sided at interval ends.
pub fn coordinate_gradient(u: &[f64], mesh: &Mesh) -> Vec<[f64; 2]> {
    let [hx, hy] = mesh.spacing();
    match mesh.topology() {
        Topology::Circle => {
            let nx = mesh.nx();
            (0..nx)
                .map(|i| [(u[(i + 1) % nx] - u[(i + nx - 1) % nx]) / (2.0 * hx), 0.0])
                .collect()
        }
        Topology::Interval => {
            let nx = mesh.nx();
            (0..nx)
                .map(|i| {
                    let d = if i == 0 {
                        (u[1] - u[0]) / hx
                    } else if i + 1 == nx {
                        (u[i] - u[i - 1]) / hx
                    } else {
                        (u[i + 1] - u[i - 1]) / (2.0 * hx)
                    };
                    [d, 0.0]
                })
                .collect()
        }
        Topology::Torus2 => {
            let (nx, ny) = (mesh.nx(), mesh.ny());
            (0..mesh.len())
                .map(|idx| {
                    let (i, j) = mesh.ij(idx);
                    [
                        (u[mesh.index((i + 1) % nx, j)] - u[mesh.index((i + nx - 1) % nx, j)]) / (2.0 * hx),
                        (u[mesh.index(i, (j + 1) % ny)] - u[mesh.index(i, (j + ny - 1) % ny)]) / (2.0 * hy),
                    ]
                })
                .collect()
        }
    }
}

/// `|grad u|^2_{g(tau)}` per node from centered differences.
pub fn gradient_norm_sq(u: &[f64], sample: &MetricSample, mesh: &Mesh) -> Vec<f64> {
    coordinate_gradient(u, mesh)
        .iter()
        .zip(&sample.g_components)
        .map(|(g, gii)| (g[0] * g[0] + g[1] * g[1]) / gii)
        .collect()
}

/// `int |grad u|^2_g dmu_g` as the face-sum Dirichlet form matching [`laplacian_matrix`]:
/// equals `-sum w u (Lap u)`.
pub fn dirichlet_energy(u: &[f64], sample: &MetricSample, mesh: &Mesh) -> f64 {
    let [hx, hy] = mesh.spacing();
    match mesh.topology() {
        Topology::Circle | Topology::Interval => {
            let nx = mesh.nx();
            let faces = if mesh.topology() == Topology::Circle { nx } else { nx - 1 };
            (0..faces)
                .map(|f| {
                    let d = u[(f + 1) % nx] - u[f];
                    sample.conductance_x(f) * d * d / hx
                })
                .sum()
        }
        Topology::Torus2 => {
            let (nx, ny) = (mesh.nx(), mesh.ny());
            (0..mesh.len())
                .map(|idx| {
                    let (i, j) = mesh.ij(idx);
                    let dx = u[mesh.index((i + 1) % nx, j)] - u[idx];
                    let dy = u[mesh.index(i, (j + 1) % ny)] - u[idx];
                    dx * dx * hy / hx + dy * dy * hx / hy
                })
                .sum()
        }
    }
}

/// `sum_region u sqrt(det g) cell`.
pub fn volume_integral(u: &[f64], sample: &MetricSample, mesh: &Mesh, region: Option<&[usize]>) -> f64 {
    match region {
        Some(nodes) => nodes
            .iter()
            .map(|&i| u[i] * sample.volume_density[i] * mesh.cell_volume(i))
            .sum(),
        None => (0..mesh.len())
            .map(|i| u[i] * sample.volume_density[i] * mesh.cell_volume(i))
            .sum(),
    }
}

/// `sum u w` for precomputed node weights.
pub fn weighted_sum(u: &[f64], weights: &[f64]) -> f64 {
    u.iter().zip(weights).map(|(a, b)| a * b).sum()
}

/// Fraction of each node's dual cell lying inside the ball `{d < radius}`.
///
/// `distance` is the distance field from the ball centre and `reference` the
/// metric in which it is measured. The cell is treated as spanning
/// `d_i +- s_i h / 2`, which makes ball volumes of constant-density metrics
/// exact in one dimension.
pub fn ball_fractions(distance: &[f64], radius: f64, reference: &MetricSample, mesh: &Mesh) -> Vec<f64> {
    let h = mesh.max_spacing();
    distance
        .iter()
        .zip(&reference.scale)
        .enumerate()
        .map(|(i, (d, s))| {
            let width = s * h;
            let f = ((radius - d) / width + 0.5).clamp(0.0, 1.0);
            if mesh.topology() == Topology::Torus2 {
                f
            } else if mesh.is_boundary(i) {
                // half cell only extends inward
                ((radius - d) / (0.5 * width)).clamp(0.0, 1.0)
            } else {
                f
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::metric::{sample_metric, MetricFamily, MetricKind};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn circle(n: usize) -> Mesh {
        build_mesh(Topology::Circle, [1.0, 0.0], [n, 0]).unwrap()
    }

    #[test]
    fn constants_are_harmonic() {
        let fam = MetricFamily::density(|x, t| 1.0 + 0.2 * (2.0 * PI * x).cos() + 0.1 * t);
        for m in [circle(64), build_mesh(Topology::Interval, [1.0, 0.0], [64, 0]).unwrap()] {
            let s = sample_metric(&fam, &m, 0.3, 1e-4).unwrap();
            let lap = laplace_beltrami(&vec![2.5; m.len()], &s, &m);
            assert!(lap.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn flat_circle_eigenfunction_is_second_order() {
        let err = |n: usize| {
            let m = circle(n);
            let s = sample_metric(&MetricFamily::flat(MetricKind::Density), &m, 0.0, 1e-4).unwrap();
            let u: Vec<f64> = (0..n).map(|i| (2.0 * PI * m.coords(i)[0]).cos()).collect();
            let lap = laplace_beltrami(&u, &s, &m);
            lap.iter()
                .zip(&u)
                .map(|(l, v)| (l + 4.0 * PI * PI * v).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 0.04, "{e1}");
        assert!((e1 / e2).log2() > 1.9);
    }

    #[test]
    fn constant_density_scales_laplacian() {
        let m = circle(128);
        let s = sample_metric(&MetricFamily::density(|_, _| 2.0), &m, 0.0, 1e-4).unwrap();
        let flat = sample_metric(&MetricFamily::flat(MetricKind::Density), &m, 0.0, 1e-4).unwrap();
        let u: Vec<f64> = (0..m.len()).map(|i| (2.0 * PI * m.coords(i)[0]).cos()).collect();
        let a = laplace_beltrami(&u, &s, &m);
        let b = laplace_beltrami(&u, &flat, &m);
        for (p, q) in a.iter().zip(&b) {
            assert_relative_eq!(*p, 0.25 * q, epsilon = 1e-10);
        }
    }

    #[test]
    fn divergence_of_sine_field() {
        let m = circle(256);
        let s = sample_metric(&MetricFamily::flat(MetricKind::Density), &m, 0.0, 1e-4).unwrap();
        let x: Vec<[f64; 2]> = (0..m.len()).map(|i| [(2.0 * PI * m.coords(i)[0]).sin(), 0.0]).collect();
        let div = divergence_of(&x, &s, &m);
        for i in 0..m.len() {
            let exact = 2.0 * PI * (2.0 * PI * m.coords(i)[0]).cos();
            assert!((div[i] - exact).abs() < 2e-3);
        }
        let constant = vec![[0.7, 0.0]; m.len()];
        assert!(divergence_of(&constant, &s, &m).iter().all(|v| v.abs() < 1e-12));
        assert!(gradient_term(&vec![1.0; m.len()], &constant, &m).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn divergence_and_laplacian_converge_at_second_order_on_torus() {
        let fam = MetricFamily::conformal(|x, y, _| 0.1 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let err = |n: usize| {
            let m = build_mesh(Topology::Torus2, [1.0, 1.0], [n, n]).unwrap();
            let s = sample_metric(&fam, &m, 0.0, 1e-4).unwrap();
            let u: Vec<f64> = (0..m.len())
                .map(|i| {
                    let [x, y] = m.coords(i);
                    (2.0 * PI * x).cos() * (4.0 * PI * y).sin()
                })
                .collect();
            let lap = laplace_beltrami(&u, &s, &m);
            let mut e = 0.0f64;
            for i in 0..m.len() {
                let [x, y] = m.coords(i);
                let phi = fam.raw(x, y, 0.0);
                let exact = -(4.0 + 16.0) * PI * PI * u[i] * (-2.0 * phi).exp();
                e = e.max((lap[i] - exact).abs());
            }
            e
        };
        let (e1, e2) = (err(32), err(64));
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn volume_integrals() {
        let m = circle(64);
        let flat = sample_metric(&MetricFamily::flat(MetricKind::Density), &m, 0.0, 1e-4).unwrap();
        assert_relative_eq!(volume_integral(&vec![1.0; 64], &flat, &m, None), 1.0, epsilon = 1e-14);
        let fam = MetricFamily::density(|_, t| 1.0 + 0.1 * t);
        let s = sample_metric(&fam, &m, 1.0, 1e-4).unwrap();
        assert_relative_eq!(volume_integral(&vec![1.0; 64], &s, &m, None), 1.1, epsilon = 1e-14);
        let mut delta = vec![0.0; 64];
        delta[5] = 1.0 / (flat.volume_density[5] * m.cell_volume(5));
        assert_relative_eq!(volume_integral(&delta, &flat, &m, None), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn flat_ball_volume_is_exact() {
        let m = circle(128);
        let s = sample_metric(&MetricFamily::flat(MetricKind::Density), &m, 0.0, 1e-4).unwrap();
        let x0 = 40;
        let d: Vec<f64> = (0..m.len())
            .map(|i| m.displacement(m.coords(x0), m.coords(i))[0].abs())
            .collect();
        for r in [0.05, 0.1234, 0.3] {
            let vol: f64 = ball_fractions(&d, r, &s, &m).iter().map(|f| f * m.spacing()[0]).sum();
            assert_relative_eq!(vol, 2.0 * r, epsilon = 1e-12);
        }
    }
}
