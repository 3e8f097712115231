use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense parameter-space vector.
///
/// Entries are finite on construction and after every checked arithmetic
/// operation; the dimension never changes after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector<T> {
    entries: Vec<T>,
}

fn check_finite<T: Real>(entries: &[T], context: &str) -> Result<()> {
    if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("{context} (entry {i} of {})", entries.len()),
        });
    }
    Ok(())
}

impl<T: Real> Vector<T> {
    /// Builds a vector, rejecting empty input and non-finite entries.
    pub fn from_vec(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        check_finite(&entries, "Vector::from_vec")?;
        Ok(Self { entries })
    }

    pub fn from_slice(entries: &[T]) -> Result<Self> {
        Self::from_vec(entries.to_vec())
    }

    /// Zero vector. Panics if `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self {
            entries: vec![T::zero(); dim],
        }
    }

    /// Standard basis vector `e_i`. Panics if `i >= dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[i] = T::one();
        v
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<T>) -> Self {
        debug_assert!(!entries.is_empty());
        Self { entries }
    }

    fn finish(entries: Vec<T>, context: &str) -> Result<Self> {
        check_finite(&entries, context)?;
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<T> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }

    fn same_dim(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context,
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other, "add")?;
        let out = self.iter().zip(other.iter()).map(|(&a, &b)| a + b).collect();
        Self::finish(out, "add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other, "sub")?;
        let out = self.iter().zip(other.iter()).map(|(&a, &b)| a - b).collect();
        Self::finish(out, "sub")
    }

    pub fn scale(&self, a: T) -> Result<Self> {
        let out = self.iter().map(|&v| a * v).collect();
        Self::finish(out, "scale")
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: T, other: &Self) -> Result<Self> {
        self.same_dim(other, "axpy")?;
        let out = self
            .iter()
            .zip(other.iter())
            .map(|(&s, &o)| s + a * o)
            .collect();
        Self::finish(out, "axpy")
    }

    pub fn neg(&self) -> Self {
        Self {
            entries: self.iter().map(|&v| -v).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.same_dim(other, "dot")?;
        Ok(dot_slices(&self.entries, &other.entries))
    }

    pub fn norm_sq(&self) -> T {
        dot_slices(&self.entries, &self.entries)
    }

    /// Euclidean norm, computed with scaling so that it neither overflows nor
    /// underflows for extreme entries.
    pub fn norm(&self) -> T {
        let amax = self.max_abs();
        if amax == T::zero() {
            return T::zero();
        }
        let s: T = self.iter().map(|&v| (v / amax) * (v / amax)).sum();
        amax * s.sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Unit vector in the direction of `self`.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == T::zero() {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        self.scale(T::one() / n)
    }

    /// `v - <v, u> u`, the component of `self` orthogonal to the unit vector `u`.
    pub fn project_out(&self, u: &Self) -> Result<Self> {
        let c = self.dot(u)?;
        self.axpy(-c, u)
    }

    pub(crate) fn add_scaled_in_place(&mut self, a: T, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (s, &o) in self.entries.iter_mut().zip(other.iter()) {
            *s += a * o;
        }
    }

    pub(crate) fn scale_in_place(&mut self, a: T) {
        for s in self.entries.iter_mut() {
            *s *= a;
        }
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.entries
    }

    /// Casts every entry to another scalar type.
    pub fn cast<U: Real>(&self) -> Result<Vector<U>> {
        let out = self.iter().map(|&v| U::lit(v.as_f64())).collect();
        Vector::finish(out, "cast")
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.entries[i]
    }
}

/// Plain left-to-right dot product; callers have already checked lengths.
pub(crate) fn dot_slices<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
