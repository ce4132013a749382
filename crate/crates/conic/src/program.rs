//! Solver-agnostic conic program representation.

use serde::{Deserialize, Serialize};

use crate::expr::{LinExpr, MatExpr, SymExpr, Var};
use crate::ConicError;

/// Shape of a named group of scalar variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// Row-major `rows × cols` matrix with independent entries.
    Dense { rows: usize, cols: usize },
    /// Symmetric `n × n` matrix; only the packed lower triangle is stored.
    Symmetric(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Dense { rows, cols } => rows * cols,
            Shape::Symmetric(n) => n * (n + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub shape: Shape,
    pub offset: usize,
}

/// Handle to a dense matrix variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseVar {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl DenseVar {
    pub fn at(&self, i: usize, j: usize) -> Var {
        assert!(i < self.rows && j < self.cols, "index out of range");
        Var(self.offset + i * self.cols + j)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        x[self.offset..self.offset + self.rows * self.cols].to_vec()
    }
}

/// Handle to a symmetric matrix variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymVar {
    offset: usize,
    dim: usize,
}

impl SymVar {
    pub fn at(&self, i: usize, j: usize) -> Var {
        assert!(i < self.dim && j < self.dim, "index out of range");
        Var(self.offset + crate::expr::packed_index(self.dim, i, j))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major dense copy of the variable's value.
    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = x[self.at(i, j).0];
            }
        }
        out
    }

    pub fn trace(&self) -> LinExpr {
        LinExpr::from_terms((0..self.dim).map(|i| (self.at(i, i), 1.0)), 0.0)
    }
}

/// Handle returned when registering a constraint; stays valid until the
/// constraint is removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `expr = 0`
    Zero { expr: LinExpr },
    /// `expr ≥ 0`
    NonNeg { expr: LinExpr },
    /// `t ≥ ‖x‖₂`
    Soc { t: LinExpr, x: Vec<LinExpr> },
    /// `expr ⪰ 0`
    Psd { expr: SymExpr },
}

impl Constraint {
    fn for_each_expr(&self, mut f: impl FnMut(&LinExpr)) {
        match self {
            Constraint::Zero { expr } | Constraint::NonNeg { expr } => f(expr),
            Constraint::Soc { t, x } => {
                f(t);
                x.iter().for_each(f);
            }
            Constraint::Psd { expr } => expr.packed().iter().for_each(f),
        }
    }

    fn for_each_expr_mut(&mut self, mut f: impl FnMut(&mut LinExpr)) {
        match self {
            Constraint::Zero { expr } | Constraint::NonNeg { expr } => f(expr),
            Constraint::Soc { t, x } => {
                f(t);
                x.iter_mut().for_each(f);
            }
            Constraint::Psd { expr } => expr.packed_mut().iter_mut().for_each(f),
        }
    }

    fn is_constant(&self) -> bool {
        let mut constant = true;
        self.for_each_expr(|e| constant &= e.is_constant());
        constant
    }

    /// Violation of a constraint whose expressions are all constant.
    fn constant_violation(&self) -> f64 {
        let x: [f64; 0] = [];
        match self {
            Constraint::Zero { expr } => expr.eval(&x).abs(),
            Constraint::NonNeg { expr } => (-expr.eval(&x)).max(0.0),
            Constraint::Soc { t, x: v } => {
                let norm = v.iter().map(|e| e.eval(&x).powi(2)).sum::<f64>().sqrt();
                (norm - t.eval(&x)).max(0.0)
            }
            Constraint::Psd { expr } => {
                let d = expr.dim();
                let m = faer::Mat::<f64>::from_fn(d, d, |i, j| expr.get(i, j).eval(&x));
                match m.self_adjoint_eigenvalues(faer::Side::Lower) {
                    Ok(vals) => vals.iter().fold(0.0f64, |acc, &l| acc.max(-l)),
                    Err(_) => f64::INFINITY,
                }
            }
        }
    }

    /// Number of rows this constraint occupies in a stacked cone vector.
    pub fn rows(&self) -> usize {
        match self {
            Constraint::Zero { .. } | Constraint::NonNeg { .. } => 1,
            Constraint::Soc { x, .. } => x.len() + 1,
            Constraint::Psd { expr } => expr.packed().len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: Constraint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarBound {
    pub var: Var,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Linear objective (minimized) over scalar variables plus cone constraints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    blocks: Vec<VarBlock>,
    num_vars: usize,
    bounds: Vec<VarBound>,
    constraints: Vec<Option<LabeledConstraint>>,
    objective: LinExpr,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn bounds(&self) -> &[VarBound] {
        &self.bounds
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    fn push_block(&mut self, name: &str, shape: Shape) -> usize {
        let offset = self.num_vars;
        self.num_vars += shape.len();
        self.blocks.push(VarBlock {
            name: name.to_string(),
            shape,
            offset,
        });
        offset
    }

    pub fn add_scalar(&mut self, name: &str) -> Var {
        Var(self.push_block(name, Shape::Scalar))
    }

    /// Scalar with optional bounds; `None` means unbounded on that side.
    pub fn add_bounded_scalar(&mut self, name: &str, lower: Option<f64>, upper: Option<f64>) -> Var {
        let v = self.add_scalar(name);
        if lower.is_some() || upper.is_some() {
            self.bounds.push(VarBound {
                var: v,
                lower,
                upper,
            });
        }
        v
    }

    pub fn add_vector(&mut self, name: &str, len: usize) -> Vec<Var> {
        let offset = self.push_block(name, Shape::Vector(len));
        (offset..offset + len).map(Var).collect()
    }

    pub fn add_dense(&mut self, name: &str, rows: usize, cols: usize) -> DenseVar {
        let offset = self.push_block(name, Shape::Dense { rows, cols });
        DenseVar { offset, rows, cols }
    }

    pub fn add_symmetric(&mut self, name: &str, dim: usize) -> SymVar {
        let offset = self.push_block(name, Shape::Symmetric(dim));
        SymVar { offset, dim }
    }

    /// Recovers a dense-matrix handle for a block by name.
    pub fn dense_var(&self, name: &str) -> Option<DenseVar> {
        match self.block(name)? {
            VarBlock {
                shape: Shape::Dense { rows, cols },
                offset,
                ..
            } => Some(DenseVar {
                offset: *offset,
                rows: *rows,
                cols: *cols,
            }),
            _ => None,
        }
    }

    pub fn sym_var(&self, name: &str) -> Option<SymVar> {
        match self.block(name)? {
            VarBlock {
                shape: Shape::Symmetric(dim),
                offset,
                ..
            } => Some(SymVar {
                offset: *offset,
                dim: *dim,
            }),
            _ => None,
        }
    }

    pub fn vector_var(&self, name: &str) -> Option<Vec<Var>> {
        let b = self.block(name)?;
        match b.shape {
            Shape::Vector(n) => Some((b.offset..b.offset + n).map(Var).collect()),
            Shape::Scalar => Some(vec![Var(b.offset)]),
            _ => None,
        }
    }

    pub fn set_objective(&mut self, obj: LinExpr) -> Result<(), ConicError> {
        self.check_expr(&obj)?;
        self.objective = obj;
        Ok(())
    }

    fn check_expr(&self, e: &LinExpr) -> Result<(), ConicError> {
        match e.max_var() {
            Some(v) if v.0 >= self.num_vars => Err(ConicError::UnknownVariable(v.0)),
            _ => Ok(()),
        }
    }

    pub fn add_constraint(
        &mut self,
        label: &str,
        constraint: Constraint,
    ) -> Result<ConstraintId, ConicError> {
        let mut err = None;
        constraint.for_each_expr(|e| {
            if err.is_none() {
                err = self.check_expr(e).err();
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        self.constraints.push(Some(LabeledConstraint {
            label: label.to_string(),
            constraint,
        }));
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// `lhs = rhs`
    pub fn add_eq(
        &mut self,
        label: &str,
        lhs: impl Into<LinExpr>,
        rhs: impl Into<LinExpr>,
    ) -> Result<ConstraintId, ConicError> {
        let expr = lhs.into() - rhs.into();
        self.add_constraint(label, Constraint::Zero { expr })
    }

    /// `lhs ≤ rhs`
    pub fn add_le(
        &mut self,
        label: &str,
        lhs: impl Into<LinExpr>,
        rhs: impl Into<LinExpr>,
    ) -> Result<ConstraintId, ConicError> {
        let expr = rhs.into() - lhs.into();
        self.add_constraint(label, Constraint::NonNeg { expr })
    }

    /// `lhs ≥ rhs`
    pub fn add_ge(
        &mut self,
        label: &str,
        lhs: impl Into<LinExpr>,
        rhs: impl Into<LinExpr>,
    ) -> Result<ConstraintId, ConicError> {
        let expr = lhs.into() - rhs.into();
        self.add_constraint(label, Constraint::NonNeg { expr })
    }

    /// `t ≥ ‖x‖₂`
    pub fn add_soc(
        &mut self,
        label: &str,
        t: impl Into<LinExpr>,
        x: Vec<LinExpr>,
    ) -> Result<ConstraintId, ConicError> {
        self.add_constraint(label, Constraint::Soc { t: t.into(), x })
    }

    /// Registers `expr ⪰ 0`. The expression must be symmetric up to 1e-12 in
    /// every coefficient.
    pub fn add_psd_block(&mut self, label: &str, expr: &MatExpr) -> Result<ConstraintId, ConicError> {
        let sym = SymExpr::try_from_mat(expr, 1e-12)
            .map_err(|(i, j)| ConicError::Asymmetric { row: i, col: j })?;
        self.add_psd_sym(label, sym)
    }

    pub fn add_psd_sym(&mut self, label: &str, expr: SymExpr) -> Result<ConstraintId, ConicError> {
        self.add_constraint(label, Constraint::Psd { expr })
    }

    /// Replaces each listed variable by an affine expression in the
    /// objective and every constraint. Substitutes must not reference
    /// substituted variables. Constraints left without variables are removed;
    /// the largest violation among them is returned. The replaced variables
    /// stay in the program but no longer appear anywhere.
    pub fn substitute(&mut self, subs: &[(Var, LinExpr)]) -> Result<f64, ConicError> {
        let mut map: Vec<Option<LinExpr>> = vec![None; self.num_vars];
        for (v, e) in subs {
            self.check_expr(e)?;
            *map.get_mut(v.0).ok_or(ConicError::UnknownVariable(v.0))? = Some(e.clone());
        }
        self.objective.substitute(&map);
        let mut worst: f64 = 0.0;
        for slot in &mut self.constraints {
            let Some(c) = slot else { continue };
            c.constraint.for_each_expr_mut(|e| e.substitute(&map));
            if c.constraint.is_constant() {
                worst = worst.max(c.constraint.constant_violation());
                *slot = None;
            }
        }
        self.bounds.retain(|b| map[b.var.0].is_none());
        Ok(worst)
    }

    /// [`substitute`](Self::substitute) with constant values.
    pub fn fix_variables(&mut self, values: &[(Var, f64)]) -> Result<f64, ConicError> {
        let subs: Vec<(Var, LinExpr)> = values.iter().map(|&(v, x)| (v, LinExpr::constant(x))).collect();
        self.substitute(&subs)
    }

    pub fn constraint(&self, id: ConstraintId) -> Option<&LabeledConstraint> {
        self.constraints.get(id.0).and_then(|c| c.as_ref())
    }

    pub fn remove_constraint(&mut self, id: ConstraintId) -> Result<LabeledConstraint, ConicError> {
        self.constraints
            .get_mut(id.0)
            .and_then(Option::take)
            .ok_or(ConicError::UnknownConstraint(id.0))
    }

    /// Active constraints with their handles, in registration order.
    pub fn constraints(&self) -> impl Iterator<Item = (ConstraintId, &LabeledConstraint)> {
        self.constraints
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (ConstraintId(i), c)))
    }

    pub fn find_constraints(&self, label: &str) -> Vec<ConstraintId> {
        self.constraints()
            .filter(|(_, c)| c.label == label)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints().count()
    }

    /// Canonical JSON dump. Removed constraint slots are kept as `null` so
    /// handles survive a round trip.
    pub fn to_json(&self) -> Result<String, ConicError> {
        serde_json::to_string_pretty(self).map_err(|e| ConicError::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, ConicError> {
        let prog: ConicProgram =
            serde_json::from_str(s).map_err(|e| ConicError::Serialization(e.to_string()))?;
        prog.validate()?;
        Ok(prog)
    }

    /// Re-checks invariants that deserialization cannot enforce.
    pub fn validate(&self) -> Result<(), ConicError> {
        let mut expected = 0;
        for b in &self.blocks {
            if b.offset != expected {
                return Err(ConicError::Serialization(format!(
                    "block {} has offset {} (expected {expected})",
                    b.name, b.offset
                )));
            }
            expected += b.shape.len();
        }
        if expected != self.num_vars {
            return Err(ConicError::Serialization("variable count mismatch".into()));
        }
        self.check_expr(&self.objective)?;
        for (_, c) in self.constraints() {
            let mut err = None;
            c.constraint.for_each_expr(|e| {
                if err.is_none() {
                    err = self.check_expr(e).err();
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        for b in &self.bounds {
            if b.var.0 >= self.num_vars {
                return Err(ConicError::UnknownVariable(b.var.0));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handles_index_blocks() {
        let mut p = ConicProgram::new();
        let t = p.add_scalar("t");
        let x = p.add_dense("X", 3, 2);
        let y = p.add_symmetric("Y", 3);
        assert_eq!(t, Var(0));
        assert_eq!(x.at(0, 0), Var(1));
        assert_eq!(x.at(2, 1), Var(6));
        assert_eq!(y.at(0, 0), Var(7));
        assert_eq!(y.at(1, 0), y.at(0, 1));
        assert_eq!(p.num_vars(), 7 + 6);
        assert_eq!(p.sym_var("Y"), Some(y));
        assert_eq!(p.dense_var("X"), Some(x));
    }

    #[test]
    fn fixing_substitutes_and_drops_constant_rows() {
        let mut p = ConicProgram::new();
        let x = p.add_scalar("x");
        let y = p.add_scalar("y");
        p.add_le("xy", LinExpr::var(x) + LinExpr::var(y), 3.0).unwrap();
        let only_y = p.add_ge("y", y, 5.0).unwrap();
        p.set_objective(LinExpr::var(x) + LinExpr::term(y, 2.0)).unwrap();
        let worst = p.fix_variables(&[(y, 1.0)]).unwrap();
        assert_eq!(worst, 4.0);
        assert!(p.constraint(only_y).is_none());
        assert_eq!(p.objective(), &(LinExpr::var(x) + 2.0));
        let (_, c) = p.constraints().next().unwrap();
        assert_eq!(c.constraint, Constraint::NonNeg { expr: LinExpr::constant(2.0) - LinExpr::var(x) });
        assert!(p.fix_variables(&[(Var(9), 0.0)]).is_err());
    }

    #[test]
    fn substitution_by_expression() {
        let mut p = ConicProgram::new();
        let x = p.add_scalar("x");
        let b = p.add_scalar("b");
        p.add_ge("x", x, 1.0).unwrap();
        p.set_objective(LinExpr::term(x, 3.0)).unwrap();
        p.substitute(&[(x, LinExpr::term(b, 2.0) + 1.0)]).unwrap();
        assert_eq!(p.objective(), &(LinExpr::term(b, 6.0) + 3.0));
        let (_, c) = p.constraints().next().unwrap();
        assert_eq!(c.constraint, Constraint::NonNeg { expr: LinExpr::term(b, 2.0) });
    }

    #[test]
    fn unknown_variable_rejected() {
        let mut p = ConicProgram::new();
        p.add_scalar("x");
        let err = p.add_ge("bad", Var(5), 0.0).unwrap_err();
        assert!(matches!(err, ConicError::UnknownVariable(5)));
    }

    #[test]
    fn removal_keeps_other_handles() {
        let mut p = ConicProgram::new();
        let x = p.add_scalar("x");
        let a = p.add_ge("a", x, 0.0).unwrap();
        let b = p.add_le("b", x, 1.0).unwrap();
        p.remove_constraint(a).unwrap();
        assert!(p.constraint(a).is_none());
        assert_eq!(p.constraint(b).unwrap().label, "b");
        assert!(p.remove_constraint(a).is_err());
        assert_eq!(p.num_constraints(), 1);
    }

    #[test]
    fn psd_block_dimensions() {
        // [[D1, X],[Xᵀ, D2]] for a 3×2 X is a 5×5 block
        let mut p = ConicProgram::new();
        let d1 = p.add_symmetric("D1", 3);
        let d2 = p.add_symmetric("D2", 2);
        let x = p.add_dense("X", 3, 2);
        let m = MatExpr::from_fn(5, |i, j| match (i < 3, j < 3) {
            (true, true) => d1.at(i, j).into(),
            (false, false) => d2.at(i - 3, j - 3).into(),
            (true, false) => x.at(i, j - 3).into(),
            (false, true) => x.at(j, i - 3).into(),
        });
        let id = p.add_psd_block("big", &m).unwrap();
        match &p.constraint(id).unwrap().constraint {
            Constraint::Psd { expr } => {
                assert_eq!(expr.dim(), 5);
                assert_eq!(expr.packed().len(), 15);
            }
            _ => panic!("expected psd"),
        }
    }
}
