use alloc::vec;
use alloc::vec::Vec;

use super::DistanceMatrix;
use crate::error::{Error, Result};
use crate::linalg::top_eigenpairs;
use crate::math::sqrt;

/// Classical multidimensional scaling to two dimensions.
///
/// Axis signs are fixed so that the coordinate with the largest magnitude on
/// each axis is positive (first index wins ties). Axes with a non-positive
/// eigenvalue collapse to zero.
pub fn embed(d: &DistanceMatrix) -> Result<Vec<[f64; 2]>> {
    let n = d.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    if d.values.len() != n * n || d.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("distance matrix must be n×n and finite".into()));
    }
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            b[i * n + j] = v * v;
        }
    }
    let row_means: Vec<f64> = (0..n)
        .map(|i| b[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // D² is symmetric so column means equal row means.
            b[i * n + j] = -0.5 * (b[i * n + j] - row_means[i] - row_means[j] + grand);
        }
    }
    let eig = top_eigenpairs(&b, n, 2.min(n));
    let mut out = vec![[0.0; 2]; n];
    for (axis, (&lambda, vector)) in eig.values.iter().zip(&eig.vectors).enumerate() {
        if lambda <= 1e-12 * eig.values[0].abs().max(1.0) {
            continue;
        }
        let s = sqrt(lambda);
        let mut best = 0;
        for i in 1..n {
            if vector[i].abs() > vector[best].abs() + 1e-12 {
                best = i;
            }
        }
        let sign = if vector[best] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[i][axis] = sign * s * vector[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, values: &[f64]) -> DistanceMatrix {
        DistanceMatrix {
            n,
            values: values.to_vec(),
        }
    }

    #[test]
    fn two_points_land_on_plus_minus_one() {
        let p = embed(&matrix(2, &[0.0, 2.0, 2.0, 0.0])).unwrap();
        assert!((p[0][0] - 1.0).abs() < 1e-9, "{p:?}");
        assert!((p[1][0] + 1.0).abs() < 1e-9);
        assert!(p[0][1].abs() < 1e-9 && p[1][1].abs() < 1e-9);
    }

    #[test]
    fn right_triangle_is_reproduced() {
        let d = matrix(3, &[0.0, 3.0, 4.0, 3.0, 0.0, 5.0, 4.0, 5.0, 0.0]);
        let p = embed(&d).unwrap();
        let e = DistanceMatrix::euclidean(&p);
        for i in 0..9 {
            assert!((e.values[i] - d.values[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn coincident_points_collapse() {
        let p = embed(&matrix(3, &[0.0; 9])).unwrap();
        assert!(p.iter().all(|q| q[0] == 0.0 && q[1] == 0.0));
        assert!(embed(&matrix(0, &[])).unwrap().is_empty());
        assert_eq!(embed(&matrix(1, &[0.0])).unwrap(), vec![[0.0, 0.0]]);
    }
}
