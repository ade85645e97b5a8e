//! Sparse matrices and the linear solvers behind the implicit time step.
//!
//! One-dimensional meshes produce (cyclic) tridiagonal systems, solved
//! directly with the Thomas algorithm plus a Sherman-Morrison correction for
//! the periodic corners. Torus systems use Jacobi-preconditioned BiCGSTAB.

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < n);
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    /// `alpha * self + beta * I`.
    pub fn scaled_plus_identity(&self, alpha: f64, beta: f64) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).map(|(c, v)| (c, alpha * v)).collect();
                r.push((i, beta));
                r
            })
            .collect();
        Self::from_rows(rows)
    }

    /// `sum_k c_k M_k + diag(d)`; all terms must share one dimension.
    pub fn combine(terms: &[(&CsrMatrix, f64)], diag: Option<&[f64]>) -> Self {
        let n = terms.first().map(|t| t.0.n).or(diag.map(|d| d.len())).unwrap_or(0);
        let rows = (0..n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = Vec::new();
                for (m, c) in terms {
                    debug_assert_eq!(m.n, n);
                    r.extend(m.row(i).map(|(col, v)| (col, c * v)));
                }
                if let Some(d) = diag {
                    r.push((i, d[i]));
                }
                r
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Replaces row `i` by the unit row `e_i` (scaled by `diag`).
    pub fn with_unit_rows(&self, rows_to_replace: &[usize], diag: f64) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                if rows_to_replace.contains(&i) {
                    if diag == 0.0 {
                        Vec::new()
                    } else {
                        vec![(i, diag)]
                    }
                } else {
                    self.row(i).collect()
                }
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Bandwidth test for the direct periodic tridiagonal path.
    fn is_cyclic_tridiagonal(&self) -> bool {
        let n = self.n;
        n >= 3
            && (0..n).all(|i| {
                self.row(i).all(|(c, _)| c == i || c == (i + 1) % n || c == (i + n - 1) % n)
            })
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Ratio of largest to smallest diagonal magnitude, a cheap conditioning hint.
pub fn diagonal_ratio(a: &CsrMatrix) -> f64 {
    let d = a.diagonal();
    let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b`. Returns the solution and solve statistics.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> (Vec<f64>, SolveStats) {
    if a.is_cyclic_tridiagonal() {
        let x = solve_cyclic_tridiagonal(a, b);
        let r = relative_residual(a, &x, b);
        return (x, SolveStats { iterations: 1, relative_residual: r });
    }
    bicgstab(a, b, 1e-13, 5000)
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn solve_cyclic_tridiagonal(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let lower: Vec<f64> = (0..n).map(|i| if i > 0 { a.get(i, i - 1) } else { 0.0 }).collect();
    let upper: Vec<f64> = (0..n).map(|i| if i + 1 < n { a.get(i, i + 1) } else { 0.0 }).collect();
    let top_right = a.get(0, n - 1);
    let bottom_left = a.get(n - 1, 0);
    if top_right == 0.0 && bottom_left == 0.0 {
        return thomas(&lower, &diag, &upper, b);
    }
    // Sherman-Morrison: A = T + u v^T with u = (gamma, 0.., bottom_left), v = (1, 0.., top_right / gamma)
    let gamma = -diag[0];
    let mut d_mod = diag.clone();
    d_mod[0] -= gamma;
    d_mod[n - 1] -= bottom_left * top_right / gamma;
    let y = thomas(&lower, &d_mod, &upper, b);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom_left;
    let z = thomas(&lower, &d_mod, &upper, &u);
    let v_dot = |w: &[f64]| w[0] + top_right / gamma * w[n - 1];
    let factor = v_dot(&y) / (1.0 + v_dot(&z));
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveStats) {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let b_norm = norm(b);
    let mut x = precond(b);
    if b_norm == 0.0 {
        return (vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let ax = a.apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = a.apply(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) / b_norm < tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            break;
        }
        let s_hat = precond(&s);
        let t = a.apply(&s_hat);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) / b_norm < tol || omega == 0.0 {
            break;
        }
    }
    let rel = relative_residual(a, &x, b);
    (x, SolveStats { iterations, relative_residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_system(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                vec![
                    ((i + n - 1) % n, -1.0 - 0.1 * (i as f64).sin()),
                    (i, 4.0 + (i as f64 * 0.3).cos()),
                    ((i + 1) % n, -1.2),
                ]
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn cyclic_tridiagonal_direct_solve() {
        let a = periodic_system(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let (x, stats) = solve(&a, &b);
        assert!(stats.relative_residual < 1e-14, "{}", stats.relative_residual);
        assert!(relative_residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn plain_tridiagonal_direct_solve() {
        let n = 30;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 3.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -0.5));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b = vec![1.0; n];
        let (_, stats) = solve(&a, &b);
        assert!(stats.relative_residual < 1e-14);
    }

    #[test]
    fn bicgstab_solves_two_dimensional_system() {
        let m = 12;
        let n = m * m;
        let idx = |i: usize, j: usize| (j % m) * m + (i % m);
        let rows = (0..n)
            .map(|k| {
                let (i, j) = (k % m, k / m);
                vec![
                    (k, 5.0),
                    (idx(i + 1, j), -1.1),
                    (idx(i + m - 1, j), -0.9),
                    (idx(i, j + 1), -1.0),
                    (idx(i, j + m - 1), -1.0),
                ]
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
        let (x, stats) = solve(&a, &b);
        assert!(stats.relative_residual < 1e-12);
        assert!(relative_residual(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn transpose_is_involution() {
        let a = periodic_system(20);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().get(0, 19), a.get(19, 0));
    }
}
