//! Lowering of a [`ConicProgram`] to the stacked form
//! `min cᵀx s.t. Ax + s = b, s ∈ K` used by the numerical backends.
//!
//! Rows are ordered by cone family: zero cone, nonnegative orthant, second
//! order cones, PSD cones. PSD blocks are vectorized as the lower triangle in
//! column-major order with off-diagonal entries scaled by √2, which keeps the
//! trace inner product equal to the Euclidean one.

use std::f64::consts::SQRT_2;

use crate::expr::LinExpr;
use crate::program::{ConicProgram, Constraint};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConeLayout {
    pub zero: usize,
    pub nonneg: usize,
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
}

impl ConeLayout {
    pub fn rows(&self) -> usize {
        self.zero
            + self.nonneg
            + self.soc.iter().sum::<usize>()
            + self.psd.iter().map(|&d| d * (d + 1) / 2).sum::<usize>()
    }
}

/// Compressed sparse matrix; `ptr` indexes into `idx`/`val` per major axis.
#[derive(Clone, Debug, Default)]
pub struct Compressed {
    pub major: usize,
    pub minor: usize,
    pub ptr: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl Compressed {
    pub fn from_major_lists(minor: usize, lists: &[Vec<(usize, f64)>]) -> Self {
        let mut ptr = Vec::with_capacity(lists.len() + 1);
        ptr.push(0);
        let nnz = lists.iter().map(Vec::len).sum();
        let mut idx = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        for l in lists {
            for &(i, v) in l {
                idx.push(i);
                val.push(v);
            }
            ptr.push(idx.len());
        }
        Self {
            major: lists.len(),
            minor,
            ptr,
            idx,
            val,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.minor + 1];
        for &i in &self.idx {
            counts[i + 1] += 1;
        }
        for k in 0..self.minor {
            counts[k + 1] += counts[k];
        }
        let ptr = counts.clone();
        let mut next = counts;
        let mut idx = vec![0; self.idx.len()];
        let mut val = vec![0.0; self.val.len()];
        for major in 0..self.major {
            for k in self.ptr[major]..self.ptr[major + 1] {
                let dst = next[self.idx[k]];
                idx[dst] = major;
                val[dst] = self.val[k];
                next[self.idx[k]] += 1;
            }
        }
        Self {
            major: self.minor,
            minor: self.major,
            ptr,
            idx,
            val,
        }
    }

    pub fn lane(&self, major: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.ptr[major]..self.ptr[major + 1]).map(move |k| (self.idx[k], self.val[k]))
    }
}

/// Stacked data for `min cᵀx + c0 s.t. Ax + s = b, s ∈ K`.
#[derive(Clone, Debug)]
pub struct StandardForm {
    pub n: usize,
    pub m: usize,
    /// Row-major storage of `A`.
    pub a_rows: Compressed,
    /// Column-major storage of `A`.
    pub a_cols: Compressed,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub c0: f64,
    pub cones: ConeLayout,
}

impl StandardForm {
    pub fn from_program(prog: &ConicProgram) -> Self {
        let n = prog.num_vars();
        let mut zero = Vec::new();
        let mut nonneg = Vec::new();
        let mut soc: Vec<Vec<(LinExpr, f64)>> = Vec::new();
        let mut psd: Vec<(usize, Vec<(LinExpr, f64)>)> = Vec::new();

        for (_, lc) in prog.constraints() {
            match &lc.constraint {
                Constraint::Zero { expr } => zero.push(expr.clone()),
                Constraint::NonNeg { expr } => nonneg.push(expr.clone()),
                Constraint::Soc { t, x } => {
                    let mut rows = vec![(t.clone(), 1.0)];
                    rows.extend(x.iter().map(|e| (e.clone(), 1.0)));
                    soc.push(rows);
                }
                Constraint::Psd { expr } => {
                    let d = expr.dim();
                    let mut rows = Vec::with_capacity(d * (d + 1) / 2);
                    for j in 0..d {
                        for i in j..d {
                            let s = if i == j { 1.0 } else { SQRT_2 };
                            rows.push((expr.get(i, j).clone(), s));
                        }
                    }
                    psd.push((d, rows));
                }
            }
        }
        for bd in prog.bounds() {
            if let Some(lo) = bd.lower {
                nonneg.push(LinExpr::var(bd.var) - lo);
            }
            if let Some(hi) = bd.upper {
                nonneg.push(LinExpr::constant(hi) - bd.var);
            }
        }

        let cones = ConeLayout {
            zero: zero.len(),
            nonneg: nonneg.len(),
            soc: soc.iter().map(Vec::len).collect(),
            psd: psd.iter().map(|p| p.0).collect(),
        };

        // s = e(x) = aᵀx + c  ⇒  A row = −a, b = c
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(cones.rows());
        let mut b = Vec::with_capacity(cones.rows());
        let mut push = |e: &LinExpr, scale: f64| {
            rows.push(e.terms().iter().map(|&(v, c)| (v.0, -c * scale)).collect());
            b.push(e.constant_term() * scale);
        };
        zero.iter().for_each(|e| push(e, 1.0));
        nonneg.iter().for_each(|e| push(e, 1.0));
        for block in &soc {
            block.iter().for_each(|(e, s)| push(e, *s));
        }
        for (_, block) in &psd {
            block.iter().for_each(|(e, s)| push(e, *s));
        }

        let m = rows.len();
        let a_rows = Compressed::from_major_lists(n, &rows);
        let a_cols = a_rows.transpose();
        let mut c = vec![0.0; n];
        for &(v, coef) in prog.objective().terms() {
            c[v.0] += coef;
        }
        Self {
            n,
            m,
            a_rows,
            a_cols,
            b,
            c,
            c0: prog.objective().constant_term(),
            cones,
        }
    }

    /// `out = A x`
    pub fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.a_rows.lane(r).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `out = Aᵀ y`
    pub fn at_mul(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.a_cols.lane(j).map(|(r, v)| v * y[r]).sum();
        }
    }
}
