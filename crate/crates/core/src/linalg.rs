//! Dense symmetric eigensolvers and a small linear-system solver.
//!
//! Full decompositions use Householder tridiagonalization followed by the
//! implicit QL method (the EISPACK `tred2`/`tql2` pair). Large inputs that
//! only need the leading eigenpairs go through Lanczos with full
//! reorthogonalization.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{hypot, sqrt};

/// Eigenpairs sorted by eigenvalue, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Full decomposition of the symmetric row-major `n × n` matrix `a`.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Eigen {
    assert_eq!(a.len(), n * n, "matrix must be n × n");
    if n == 0 {
        return Eigen {
            values: Vec::new(),
            vectors: Vec::new(),
        };
    }
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e);
    // ascending → descending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]).then(x.cmp(&y)));
    Eigen {
        values: order.iter().map(|&k| d[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|r| v[r][k]).collect())
            .collect(),
    }
}

fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iterations > 60 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Leading `k` eigenpairs of a symmetric matrix.
///
/// Small matrices are decomposed fully. Larger ones use Lanczos with full
/// reorthogonalization; the Krylov dimension doubles until every returned
/// pair has a residual below `1e-10 · max(1, |λ₁|)`, falling back to the
/// full decomposition when the subspace would cover half the matrix.
pub fn top_eigenpairs(a: &[f64], n: usize, k: usize) -> Eigen {
    let k = k.min(n);
    if n <= 200 {
        let mut full = symmetric_eigen(a, n);
        full.values.truncate(k);
        full.vectors.truncate(k);
        return full;
    }
    let mut m = 64.min(n);
    loop {
        if 2 * m >= n {
            let mut full = symmetric_eigen(a, n);
            full.values.truncate(k);
            full.vectors.truncate(k);
            return full;
        }
        if let Some(found) = lanczos(a, n, k, m) {
            return found;
        }
        m *= 2;
    }
}

fn matvec(a: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lanczos(a: &[f64], n: usize, k: usize, m: usize) -> Option<Eigen> {
    // deterministic start vector with components on every axis
    let mut q: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 7919 + 17) % 101) as f64 / 101.0)
        .collect();
    let norm = sqrt(dot(&q, &q));
    q.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    for j in 0..m {
        basis.push(q.clone());
        matvec(a, n, &q, &mut w);
        let aj = dot(&w, &q);
        alpha.push(aj);
        // full reorthogonalization (twice for stability)
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bj = sqrt(dot(&w, &w));
        if j + 1 == m || bj < 1e-12 {
            break;
        }
        beta.push(bj);
        q = w.iter().map(|x| x / bj).collect();
    }
    let dim = alpha.len();
    let mut t = vec![0.0; dim * dim];
    for i in 0..dim {
        t[i * dim + i] = alpha[i];
        if i + 1 < dim {
            t[i * dim + i + 1] = beta[i];
            t[(i + 1) * dim + i] = beta[i];
        }
    }
    let small = symmetric_eigen(&t, dim);
    let scale = small.values.first().map_or(1.0, |v| v.abs().max(1.0));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut av = vec![0.0; n];
    for idx in 0..k.min(dim) {
        let s = &small.vectors[idx];
        let mut y = vec![0.0; n];
        for (b, &c) in basis.iter().zip(s) {
            y.iter_mut().zip(b).for_each(|(x, v)| *x += c * v);
        }
        let ny = sqrt(dot(&y, &y));
        y.iter_mut().for_each(|x| *x /= ny);
        matvec(a, n, &y, &mut av);
        let theta = small.values[idx];
        let resid = sqrt(
            av.iter()
                .zip(&y)
                .map(|(p, q)| (p - theta * q) * (p - theta * q))
                .sum::<f64>(),
        );
        if resid > 1e-10 * scale && dim < n {
            return None;
        }
        values.push(theta);
        vectors.push(y);
    }
    if values.len() < k {
        return None;
    }
    Some(Eigen { values, vectors })
}

/// Solves `a x = b` (row-major `n × n`) by Gaussian elimination with partial
/// pivoting. `None` when the matrix is numerically singular.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / a[col * n + col];
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r * n + c] * x[c];
        }
        x[r] = acc / a[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    fn check_pairs(a: &[f64], n: usize, e: &Eigen, tol: f64) {
        let mut av = vec![0.0; n];
        for (val, vec) in e.values.iter().zip(&e.vectors) {
            matvec(a, n, vec, &mut av);
            for i in 0..n {
                assert!((av[i] - val * vec[i]).abs() < tol, "residual too large");
            }
            assert!((dot(vec, vec) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_decomposition_satisfies_definition() {
        for n in [1, 2, 3, 7, 20] {
            let a = random_symmetric(n, n as u64);
            let e = symmetric_eigen(&a, n);
            assert_eq!(e.values.len(), n);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            check_pairs(&a, n, &e, 1e-9);
            let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
            assert!((trace - e.values.iter().sum::<f64>()).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let e = symmetric_eigen(&a, 3);
        assert_eq!(e.values.len(), 3);
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 2.0).abs() < 1e-12);
        assert!((e.values[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_full_decomposition() {
        // low-rank plus noise: a clear gap after the leading pair
        let n = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise = random_symmetric(n, 11);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 5.0 * u[i] * u[j] + 3.0 * w[i] * w[j] + 0.01 * noise[i * n + j];
            }
        }
        let fast = top_eigenpairs(&a, n, 2);
        let full = symmetric_eigen(&a, n);
        for k in 0..2 {
            assert!((fast.values[k] - full.values[k]).abs() < 1e-8);
        }
        check_pairs(&a, n, &fast, 1e-7);
    }

    #[test]
    fn solve_small_system() {
        let x = solve(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0], 2).is_none());
    }
}
