//! Matrix-free Lanczos iteration for the algebraically largest eigenpair.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vecmath::tridiag::tridiag_eigen;
use crate::vecmath::vector::dot_slices;
use crate::vecmath::{RngStream, Vector};

/// Gap between the two largest Ritz values below which the top eigenvalue is
/// reported as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosOptions<T> {
    /// Krylov dimension budget. `None` means `min(dim, 200)`.
    pub max_iters: Option<usize>,
    /// Convergence requires `|H v - value v| <= tol * max(1, |value|)`.
    pub tol: T,
}

impl<T: Real> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: None,
            tol: T::lit(1e-8),
        }
    }
}

impl<T: Real> LanczosOptions<T> {
    pub fn budget(&self, dim: usize) -> usize {
        self.max_iters.unwrap_or(dim.min(200)).clamp(1, dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosDiagnostics<T> {
    pub iterations: usize,
    /// True residual `|H v - value v|`, measured with one extra product.
    pub residual: T,
    pub degenerate: bool,
    /// Second-largest Ritz value, when the Krylov space has dimension >= 2.
    pub second_ritz: Option<T>,
}

/// Top eigenpair of a symmetric operator.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    /// Unit eigenvector, oriented per [`orient`].
    pub vector: Vector<T>,
    pub diagnostics: LanczosDiagnostics<T>,
}

/// Sign convention shared by every eigenvector the crate returns: non-negative
/// inner product with `reference`, or, without one, a positive entry at the
/// first position of largest magnitude.
pub fn orient<T: Real>(v: &mut Vector<T>, reference: Option<&Vector<T>>) {
    let flip = match reference {
        Some(r) if r.dim() == v.dim() => dot_slices(v.as_slice(), r.as_slice()) < T::zero(),
        _ => {
            let mut best = T::zero();
            let mut sign_neg = false;
            for &x in v.iter() {
                if x.abs() > best {
                    best = x.abs();
                    sign_neg = x < T::zero();
                }
            }
            sign_neg
        }
    };
    if flip {
        v.scale_in_place(-T::one());
    }
}

/// Largest eigenvalue and eigenvector of the symmetric operator `apply_h`.
///
/// Uses full reorthogonalization against every stored Lanczos vector.
pub fn lanczos_top<T, F>(
    apply_h: F,
    dim: usize,
    rng: &mut RngStream,
    opts: &LanczosOptions<T>,
    reference: Option<&Vector<T>>,
) -> Result<EigenPair<T>>
where
    T: Real,
    F: FnMut(&Vector<T>) -> Result<Vector<T>>,
{
    lanczos_core(apply_h, dim, rng, opts, reference, None)
}

/// Largest eigenpair of `apply_h` restricted to the orthogonal complement of
/// the unit vector `deflate`. With `deflate` the top eigenvector this yields
/// the second eigenvalue.
pub fn lanczos_deflated<T, F>(
    apply_h: F,
    dim: usize,
    rng: &mut RngStream,
    opts: &LanczosOptions<T>,
    deflate: &Vector<T>,
) -> Result<EigenPair<T>>
where
    T: Real,
    F: FnMut(&Vector<T>) -> Result<Vector<T>>,
{
    if deflate.dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "lanczos_deflated",
            left: dim,
            right: deflate.dim(),
        });
    }
    if dim < 2 {
        return Err(Error::invalid("deflated Lanczos needs dim >= 2"));
    }
    lanczos_core(apply_h, dim, rng, opts, None, Some(deflate))
}

fn orthogonalize<T: Real>(w: &mut [T], basis: &[Vec<T>]) {
    // Two passes ("twice is enough").
    for _ in 0..2 {
        for q in basis {
            let c = dot_slices(w, q);
            for (wi, &qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

fn norm<T: Real>(w: &[T]) -> T {
    dot_slices(w, w).sqrt()
}

fn lanczos_core<T, F>(
    mut apply_h: F,
    dim: usize,
    rng: &mut RngStream,
    opts: &LanczosOptions<T>,
    reference: Option<&Vector<T>>,
    deflate: Option<&Vector<T>>,
) -> Result<EigenPair<T>>
where
    T: Real,
    F: FnMut(&Vector<T>) -> Result<Vector<T>>,
{
    if dim == 0 {
        return Err(Error::invalid("operator dimension must be positive"));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::invalid("lanczos tolerance must be positive"));
    }
    let locked: Vec<Vec<T>> = deflate.map(|d| vec![d.as_slice().to_vec()]).unwrap_or_default();
    let max_k = if deflate.is_some() {
        opts.budget(dim).min(dim - 1)
    } else {
        opts.budget(dim)
    };

    let mut apply = |x: &[T], iteration: usize| -> Result<Vec<T>> {
        let mut xin = x.to_vec();
        orthogonalize(&mut xin, &locked);
        let out = match apply_h(&Vector::from_vec_unchecked(xin)) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(Error::LanczosNan { iteration }),
            Err(e) => return Err(e),
        };
        if out.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "lanczos operator output",
                left: dim,
                right: out.dim(),
            });
        }
        let mut out = out.into_vec();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LanczosNan { iteration });
        }
        orthogonalize(&mut out, &locked);
        Ok(out)
    };

    let mut q: Vec<T> = rng.normal_vector::<T>(dim).into_vec();
    orthogonalize(&mut q, &locked);
    let qn = norm(&q);
    if !(qn > T::zero()) {
        return Err(Error::LanczosNan { iteration: 0 });
    }
    q.iter_mut().for_each(|v| *v /= qn);

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(max_k);
    let mut alphas: Vec<T> = Vec::with_capacity(max_k);
    let mut betas: Vec<T> = Vec::with_capacity(max_k);
    let mut best_residual = f64::INFINITY;

    for j in 0..max_k {
        let mut w = apply(&q, j)?;
        let a = dot_slices(&w, &q);
        basis.push(q.clone());
        alphas.push(a);
        let mut all = locked.clone();
        all.extend(basis.iter().cloned());
        orthogonalize(&mut w, &all);
        let b = norm(&w);
        if !b.is_finite() {
            return Err(Error::LanczosNan { iteration: j });
        }

        let k = j + 1;
        let scale = alphas.iter().fold(T::zero(), |m, &x| m.max(x.abs())).max(T::one());
        let breakdown = b <= T::lit(1e3) * T::epsilon() * scale;
        let last = k == max_k;
        let check = breakdown || last || k <= 30 || k % 5 == 0;
        if check {
            let eig = tridiag_eigen(&alphas, &betas)?;
            let theta = eig.values[0];
            let s_last = eig.vectors[(k - 1) * k];
            let estimate = (b * s_last).abs();
            let target = opts.tol * theta.abs().max(T::one());
            if breakdown || last || estimate <= target {
                let mut y = vec![T::zero(); dim];
                for (col, qb) in basis.iter().enumerate() {
                    let c = eig.vectors[col * k];
                    for (yi, &qi) in y.iter_mut().zip(qb) {
                        *yi += c * qi;
                    }
                }
                let yn = norm(&y);
                y.iter_mut().for_each(|v| *v /= yn);
                let hy = apply(&y, j + 1)?;
                let value = dot_slices(&hy, &y);
                let residual = hy
                    .iter()
                    .zip(&y)
                    .map(|(&h, &yv)| (h - value * yv) * (h - value * yv))
                    .sum::<T>()
                    .sqrt();
                best_residual = best_residual.min(residual.as_f64());
                let target = opts.tol * value.abs().max(T::one());
                if residual <= target {
                    let second = (k >= 2).then(|| eig.values[1]);
                    let degenerate = second
                        .map(|s| (theta - s).abs() <= T::lit(DEGENERATE_GAP) * value.abs().max(T::one()))
                        .unwrap_or(false);
                    let mut vector = Vector::from_vec_unchecked(y);
                    orient(&mut vector, reference);
                    return Ok(EigenPair {
                        value,
                        vector,
                        diagnostics: LanczosDiagnostics {
                            iterations: k,
                            residual,
                            degenerate,
                            second_ritz: second,
                        },
                    });
                }
                if breakdown || last {
                    return Err(Error::LanczosNoConvergence {
                        iterations: k,
                        best_residual,
                    });
                }
            }
        }
        betas.push(b);
        q = w.into_iter().map(|v| v / b).collect();
    }
    Err(Error::LanczosNoConvergence {
        iterations: max_k,
        best_residual,
    })
}
