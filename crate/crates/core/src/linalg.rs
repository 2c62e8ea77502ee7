//! Dense and iterative symmetric eigensolvers.
//!
//! Small Hamiltonians (dimension < 4096) are diagonalized densely via
//! Householder tridiagonalization followed by implicit-shift QL; larger ones
//! use Lanczos with full reorthogonalization and restarts, which only needs
//! a matrix-vector product.

use rand::Rng;
use rand_pcg::Pcg64;
use rand::SeedableRng;

/// Threshold below which the dense path is used.
pub const DENSE_DIM_LIMIT: usize = 4096;

/// Row-major dense symmetric matrix.
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On return `a` holds the accumulated orthogonal transform Q (columns are
/// the basis change), `d` the diagonal, `e` the subdiagonal in e[1..].
fn tred2(a: &mut SymMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = a.n;
    for i in (1..n).rev() {
        let l = i;
        let mut h = 0.0;
        if l > 1 {
            let scale: f64 = (0..l).map(|k| a.get(i, k).abs()).sum();
            if scale == 0.0 {
                e[i] = a.get(i, l - 1);
            } else {
                for k in 0..l {
                    let v = a.get(i, k) / scale;
                    a.set(i, k, v);
                    h += v * v;
                }
                let mut f = a.get(i, l - 1);
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a.set(i, l - 1, f - g);
                f = 0.0;
                for j in 0..l {
                    a.set(j, i, a.get(i, j) / h);
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a.get(j, k) * a.get(i, k);
                    }
                    for k in (j + 1)..l {
                        g += a.get(k, j) * a.get(i, k);
                    }
                    e[j] = g / h;
                    f += e[j] * a.get(i, j);
                }
                let hh = f / (h + h);
                for j in 0..l {
                    let fj = a.get(i, j);
                    let gj = e[j] - hh * fj;
                    e[j] = gj;
                    for k in 0..=j {
                        let v = a.get(j, k) - (fj * e[k] + gj * a.get(i, k));
                        a.set(j, k, v);
                    }
                }
            }
        } else {
            e[i] = a.get(i, l - 1);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a.get(i, k) * a.get(k, j);
                }
                for k in 0..i {
                    let v = a.get(k, j) - g * a.get(k, i);
                    a.set(k, j, v);
                }
            }
        }
        d[i] = a.get(i, i);
        a.set(i, i, 1.0);
        for j in 0..i {
            a.set(j, i, 0.0);
            a.set(i, j, 0.0);
        }
    }
}

#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Implicit-shift QL on a tridiagonal matrix; eigenvectors accumulate into
/// `z` when provided (z starts as the tred2 transform or identity).
fn tqli(d: &mut [f64], e: &mut [f64], z: Option<&mut SymMatrix>) {
    let n = d.len();
    let mut z = z;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tqli failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = pythag(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zm.get(k, i + 1);
                        let v = zm.get(k, i);
                        zm.set(k, i + 1, s * v + c * f);
                        zm.set(k, i, c * v - s * f);
                    }
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// All eigenvalues (ascending) and eigenvectors (columns) of a dense
/// symmetric matrix; the input matrix is consumed.
pub fn sym_eig_dense(mut a: SymMatrix) -> (Vec<f64>, SymMatrix) {
    let n = a.n;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut a, &mut d, &mut e);
    tqli(&mut d, &mut e, Some(&mut a));
    // Sort ascending, permuting columns.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let mut dv = vec![0.0; n];
    let mut z = SymMatrix::zeros(n);
    for (new, &old) in order.iter().enumerate() {
        dv[new] = d[old];
        for k in 0..n {
            z.set(k, new, a.get(k, old));
        }
    }
    (dv, z)
}

/// Eigenvalues (ascending) of a symmetric tridiagonal matrix given diagonal
/// `d` and subdiagonal `e` (length n, e[0] unused).
pub fn tridiag_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let mut dv = d.to_vec();
    let mut ev = e.to_vec();
    tqli(&mut dv, &mut ev, None);
    dv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dv
}

/// Smallest eigenpair of a symmetric tridiagonal matrix.
fn tridiag_lowest(d: &[f64], e: &[f64]) -> (f64, Vec<f64>) {
    let n = d.len();
    let mut dv = d.to_vec();
    let mut ev = e.to_vec();
    let mut z = SymMatrix::zeros(n);
    for i in 0..n {
        z.set(i, i, 1.0);
    }
    tqli(&mut dv, &mut ev, Some(&mut z));
    let mut best = 0;
    for i in 1..n {
        if dv[i] < dv[best] {
            best = i;
        }
    }
    let vec = (0..n).map(|k| z.get(k, best)).collect();
    (dv[best], vec)
}

/// Lowest eigenpair of a symmetric operator given only its action, via
/// Lanczos with full reorthogonalization and restarting.
pub fn lanczos_lowest(
    dim: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
    seed: u64,
) -> (f64, Vec<f64>) {
    let max_basis = 200.min(dim);
    let max_restarts = 60;
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut v0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v0);

    let mut last_eval = f64::INFINITY;
    for _restart in 0..max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = vec![0.0]; // beta[0] unused
        let mut w = vec![0.0; dim];
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for (i, x) in w.iter_mut().enumerate() {
                *x -= a * basis[j][i];
                if j > 0 {
                    *x -= beta[j] * basis[j - 1][i];
                }
            }
            // Full reorthogonalization keeps the basis numerically orthogonal.
            for q in &basis {
                let c = dot(q, &w);
                for (i, x) in w.iter_mut().enumerate() {
                    *x -= c * q[i];
                }
            }
            let b = norm(&w);
            let (eval, tvec) = tridiag_lowest(&alpha, &beta);
            let residual = b * tvec[alpha.len() - 1].abs();
            if residual < tol || b < 1e-14 || basis.len() == max_basis {
                // Assemble the Ritz vector.
                let mut ritz = vec![0.0; dim];
                for (c, q) in tvec.iter().zip(basis.iter()) {
                    for (r, x) in ritz.iter_mut().zip(q.iter()) {
                        *r += c * x;
                    }
                }
                normalize(&mut ritz);
                if residual < tol || b < 1e-14 {
                    return (eval, ritz);
                }
                if (eval - last_eval).abs() < tol * 1e-2 {
                    return (eval, ritz);
                }
                last_eval = eval;
                v0 = ritz;
                break;
            }
            beta.push(b);
            let mut next = w.clone();
            for x in next.iter_mut() {
                *x /= b;
            }
            basis.push(next);
        }
    }
    panic!("lanczos failed to converge");
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    for x in a.iter_mut() {
        *x /= n;
    }
}

/// Ordinary least squares for y = slope*x + intercept; returns
/// (slope, intercept).
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Least-squares polynomial fit of given degree; returns coefficients
/// c[0] + c[1] x + ... via normal equations with Gaussian elimination.
pub fn polyfit(points: &[(f64, f64)], degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mut ata = vec![0.0; m * m];
    let mut atb = vec![0.0; m];
    for &(x, y) in points {
        let mut powers = vec![1.0; m];
        for i in 1..m {
            powers[i] = powers[i - 1] * x;
        }
        for i in 0..m {
            atb[i] += powers[i] * y;
            for j in 0..m {
                ata[i * m + j] += powers[i] * powers[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let mut pivot = col;
        for r in (col + 1)..m {
            if ata[r * m + col].abs() > ata[pivot * m + col].abs() {
                pivot = r;
            }
        }
        if pivot != col {
            for j in 0..m {
                ata.swap(col * m + j, pivot * m + j);
            }
            atb.swap(col, pivot);
        }
        let diag = ata[col * m + col];
        for r in (col + 1)..m {
            let factor = ata[r * m + col] / diag;
            for j in col..m {
                ata[r * m + j] -= factor * ata[col * m + j];
            }
            atb[r] -= factor * atb[col];
        }
    }
    let mut coeffs = vec![0.0; m];
    for row in (0..m).rev() {
        let mut acc = atb[row];
        for j in (row + 1)..m {
            acc -= ata[row * m + j] * coeffs[j];
        }
        coeffs[row] = acc / ata[row * m + row];
    }
    coeffs
}
