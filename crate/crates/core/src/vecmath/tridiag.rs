//! Eigen-decomposition of small symmetric tridiagonal matrices (implicit QL).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenpairs of a symmetric tridiagonal matrix.
///
/// `vectors[i * k + j]` is component `i` of the eigenvector belonging to
/// `values[j]`. Values are sorted in descending order.
pub(crate) struct TridiagEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
}

fn hypot<T: Real>(a: T, b: T) -> T {
    a.hypot(b)
}

/// `diag` has length `k`, `off` has length `k - 1`.
pub(crate) fn tridiag_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<TridiagEigen<T>> {
    let k = diag.len();
    debug_assert_eq!(off.len() + 1, k.max(1));
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); k];
    e[..k.saturating_sub(1)].copy_from_slice(off);
    let mut z = vec![T::zero(); k * k];
    for i in 0..k {
        z[i * k + i] = T::one();
    }

    let two = T::lit(2.0);
    for l in 0..k {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < k {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::invalid("tridiagonal QL iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = hypot(g, T::one());
            let sign_r = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in 0..k {
                    let zi1 = z[row * k + i + 1];
                    let zi = z[row * k + i];
                    z[row * k + i + 1] = s * zi + c * zi1;
                    z[row * k + i] = c * zi - s * zi1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = vec![T::zero(); k * k];
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..k {
            vectors[i * k + new_j] = z[i * k + old_j];
        }
    }
    Ok(TridiagEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1.
        let eig = tridiag_eigen(&[2.0_f64, 2.0], &[1.0]).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let (a, b) = (eig.vectors[0], eig.vectors[2]);
        assert!((a.abs() - b.abs()).abs() < 1e-14);
    }

    #[test]
    fn laplacian_spectrum() {
        // Path-graph Laplacian-like matrix: 2 on the diagonal, -1 off it.
        let k = 12;
        let eig = tridiag_eigen(&vec![2.0_f64; k], &vec![-1.0; k - 1]).unwrap();
        for (j, &v) in eig.values.iter().enumerate() {
            let idx = (k - j) as f64;
            let expect = 2.0 - 2.0 * (idx * std::f64::consts::PI / (k as f64 + 1.0)).cos();
            assert!((v - expect).abs() < 1e-12, "{j}: {v} vs {expect}");
        }
    }

    #[test]
    fn single_entry() {
        let eig = tridiag_eigen(&[4.5_f64], &[]).unwrap();
        assert_eq!(eig.values, vec![4.5]);
        assert_eq!(eig.vectors, vec![1.0]);
    }
}
