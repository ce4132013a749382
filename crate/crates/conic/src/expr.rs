//! Affine expressions over the scalar variables of a [`ConicProgram`](crate::ConicProgram).

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Index of a scalar decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub usize);

/// Affine expression `Σ coef·var + constant`.
///
/// Terms are kept sorted by variable with duplicates merged and exact zeros
/// dropped, so two expressions describing the same function compare equal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    terms: Vec<(Var, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: Var, coef: f64) -> Self {
        let terms = if coef == 0.0 { Vec::new() } else { vec![(v, coef)] };
        Self {
            terms,
            constant: 0.0,
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (Var, f64)>>(terms: I, constant: f64) -> Self {
        let mut e = Self {
            terms: terms.into_iter().collect(),
            constant,
        };
        e.canonicalize();
        e
    }

    pub fn terms(&self) -> &[(Var, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest referenced variable index, if any.
    pub fn max_var(&self) -> Option<Var> {
        self.terms.last().map(|t| t.0)
    }

    pub fn add_term(&mut self, v: Var, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.terms.binary_search_by_key(&v, |t| t.0) {
            Ok(pos) => {
                self.terms[pos].1 += coef;
                if self.terms[pos].1 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => self.terms.insert(pos, (v, coef)),
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let take_left = j >= other.terms.len()
                || (i < self.terms.len() && self.terms[i].0 < other.terms[j].0);
            let take_right = i >= self.terms.len()
                || (j < other.terms.len() && other.terms[j].0 < self.terms[i].0);
            if take_left {
                merged.push(self.terms[i]);
                i += 1;
            } else if take_right {
                merged.push((other.terms[j].0, scale * other.terms[j].1));
                j += 1;
            } else {
                let c = self.terms[i].1 + scale * other.terms[j].1;
                if c != 0.0 {
                    merged.push((self.terms[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        self.terms = merged;
        self.constant += scale * other.constant;
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        if s == 0.0 {
            return LinExpr::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>() + self.constant
    }

    /// Sum of `|coef · x|` over the linear part, used for relative tolerances.
    pub fn abs_linear_magnitude(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| (c * x[v.0]).abs()).sum()
    }

    /// Entrywise equality up to `tol`.
    pub fn approx_eq(&self, other: &LinExpr, tol: f64) -> bool {
        let mut diff = self.clone();
        diff.add_scaled(other, -1.0);
        diff.constant.abs() <= tol && diff.terms.iter().all(|t| t.1.abs() <= tol)
    }

    /// Replaces every variable `v` with `Some(e)` at `subs[v]` by `e`.
    pub fn substitute(&mut self, subs: &[Option<LinExpr>]) {
        if !self.terms.iter().any(|&(v, _)| matches!(subs.get(v.0), Some(Some(_)))) {
            return;
        }
        let mut out = LinExpr::constant(self.constant);
        for &(v, c) in &self.terms {
            match subs.get(v.0) {
                Some(Some(e)) => out.add_scaled(e, c),
                _ => out.add_term(v, c),
            }
        }
        *self = out;
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(Var, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::var(v)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl AddAssign<LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.add_scaled(&rhs, 1.0);
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl SubAssign<LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: LinExpr) {
        self.add_scaled(&rhs, -1.0);
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs.into();
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs.into();
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Mul<f64> for Var {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        LinExpr::term(self, rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl<T: Into<LinExpr>> Add<T> for Var {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::var(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for Var {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::var(self) - rhs
    }
}

/// Square matrix of affine expressions, stored densely row-major.
///
/// Used to describe PSD blocks before they are checked for symmetry and
/// registered with a program.
#[derive(Clone, Debug, PartialEq)]
pub struct MatExpr {
    dim: usize,
    entries: Vec<LinExpr>,
}

impl MatExpr {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![LinExpr::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, LinExpr::constant(1.0));
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[i * self.dim + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: LinExpr) {
        self.entries[i * self.dim + j] = e;
    }

    /// Sets `(i, j)` and `(j, i)` together.
    pub fn set_sym(&mut self, i: usize, j: usize, e: LinExpr) {
        if i != j {
            self.entries[j * self.dim + i] = e.clone();
        }
        self.entries[i * self.dim + j] = e;
    }
}

/// Symmetric matrix of affine expressions, packed as the lower triangle in
/// column-major order: `(0,0), (1,0), …, (n-1,0), (1,1), (2,1), …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymExpr {
    dim: usize,
    lower: Vec<LinExpr>,
}

impl SymExpr {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Packed lower-triangle entries.
    pub fn packed(&self) -> &[LinExpr] {
        &self.lower
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.lower[packed_index(self.dim, i, j)]
    }

    pub(crate) fn packed_mut(&mut self) -> &mut [LinExpr] {
        &mut self.lower
    }

    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for j in 0..dim {
            for i in j..dim {
                lower.push(f(i, j));
            }
        }
        Self { dim, lower }
    }

    /// Builds from a full matrix, failing when `(i,j)` and `(j,i)` differ by
    /// more than `tol` in any coefficient.
    pub fn try_from_mat(m: &MatExpr, tol: f64) -> Result<Self, (usize, usize)> {
        for i in 0..m.dim() {
            for j in 0..i {
                if !m.get(i, j).approx_eq(m.get(j, i), tol) {
                    return Err((i, j));
                }
            }
        }
        Ok(Self::from_lower_fn(m.dim(), |i, j| m.get(i, j).clone()))
    }

    /// Principal submatrix on the (sorted or unsorted) index list `idx`.
    pub fn principal(&self, idx: &[usize]) -> SymExpr {
        SymExpr::from_lower_fn(idx.len(), |a, b| self.get(idx[a], idx[b]).clone())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                let v = self.get(i, j).eval(x);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Position of `(i, j)` in a packed lower triangle of dimension `n`.
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    c * n - c * c.saturating_sub(1) / 2 + (r - c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_index_matches_enumeration() {
        for n in 1..7 {
            let mut k = 0;
            for j in 0..n {
                for i in j..n {
                    assert_eq!(packed_index(n, i, j), k);
                    assert_eq!(packed_index(n, j, i), k);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn canonical_form_merges_and_drops() {
        let e = LinExpr::from_terms([(Var(3), 1.0), (Var(1), 2.0), (Var(3), -1.0)], 0.5);
        assert_eq!(e.terms(), &[(Var(1), 2.0)]);
        let f = Var(1) * 2.0 + 0.5;
        assert_eq!(e, f);
    }

    #[test]
    fn add_scaled_interleaves() {
        let mut a = LinExpr::from_terms([(Var(0), 1.0), (Var(2), 1.0)], 1.0);
        let b = LinExpr::from_terms([(Var(1), 1.0), (Var(2), 1.0)], 2.0);
        a.add_scaled(&b, -1.0);
        assert_eq!(a.terms(), &[(Var(0), 1.0), (Var(1), -1.0)]);
        assert_eq!(a.constant_term(), -1.0);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let mut m = MatExpr::zeros(2);
        m.set(0, 1, Var(0).into());
        assert_eq!(SymExpr::try_from_mat(&m, 1e-12), Err((1, 0)));
        m.set(1, 0, Var(0).into());
        assert!(SymExpr::try_from_mat(&m, 1e-12).is_ok());
    }
}
