//! Generic single-level mixed-integer linear modeling layer with a
//! self-contained solver.
//!
//! A [`MilpModel`] holds variables, linear rows, complementarity pairs
//! (`f ⊥ g`, optionally active only under a binary guard) and indicator
//! blocks (`guard = 1 ⇒ rows hold`). [`compile`] rewrites pairs and
//! indicators into pure big-M rows with fresh binaries; [`solve_lp`] solves
//! the integrality relaxation with a bounded-variable simplex; [`solve_milp`]
//! runs branch-and-bound on the compiled model.
//!
//! The big-M coefficient actually written into a row is the smallest value
//! that keeps the relaxed row vacuous under the variable bounds, capped by
//! [`SolverTolerances::big_m`]; a compile error is raised when the cap does
//! not suffice, which signals that `big_m` is too small for the model.

mod branch;
mod simplex;

pub use branch::brute_force_reference;

use serde_json::json;
use std::collections::HashSet;
use thiserror::Error;

/// Handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
    pub name: String,
}

/// Affine expression `sum coeff * var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new(terms: Vec<(VarId, f64)>, constant: f64) -> Self {
        LinExpr { terms, constant }
    }

    pub fn from_var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) {
        if c != 0.0 {
            self.terms.push((v, c));
        }
    }

    fn normalized(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        LinExpr { terms: merged, constant: self.constant }
    }

    pub fn value(&self, assignment: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * assignment[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Linear row `terms (<=|>=|==) rhs`.
#[derive(Debug, Clone)]
pub struct LinRow {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinRow {
    pub fn new(terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> Self {
        LinRow { terms, sense, rhs }
    }
}

/// Complementarity condition `f ⊥ g` (`f >= 0`, `g >= 0`, `f*g = 0`).
/// When `guard` is set, the condition applies only while the guard is 1.
#[derive(Debug, Clone)]
pub struct CompPair {
    pub f: LinExpr,
    pub g: LinExpr,
    pub guard: Option<VarId>,
}

/// `guard = 1  ⇒  all rows hold`.
#[derive(Debug, Clone)]
pub struct IndicatorBlock {
    pub guard: VarId,
    pub rows: Vec<LinRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Min,
    Max,
}

/// Mixed-integer linear model with complementarity pairs and indicator rows.
#[derive(Debug, Clone)]
pub struct MilpModel {
    vars: Vec<Variable>,
    rows: Vec<LinRow>,
    pairs: Vec<CompPair>,
    indicators: Vec<IndicatorBlock>,
    obj_sense: ObjSense,
    objective: Vec<(VarId, f64)>,
}

impl MilpModel {
    pub fn new(obj_sense: ObjSense) -> Self {
        MilpModel {
            vars: Vec::new(),
            rows: Vec::new(),
            pairs: Vec::new(),
            indicators: Vec::new(),
            obj_sense,
            objective: Vec::new(),
        }
    }

    pub fn add_var(&mut self, kind: VarKind, lo: f64, hi: f64, name: impl Into<String>) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable { kind, lo, hi, name: name.into() });
        id
    }

    pub fn add_row(&mut self, row: LinRow) {
        self.rows.push(row);
    }

    pub fn add_pair(&mut self, pair: CompPair) {
        self.pairs.push(pair);
    }

    pub fn add_indicator(&mut self, block: IndicatorBlock) {
        self.indicators.push(block);
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective = terms;
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn obj_sense(&self) -> ObjSense {
        self.obj_sense
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn set_bounds(&mut self, id: VarId, lo: f64, hi: f64) {
        self.vars[id.0].lo = lo;
        self.vars[id.0].hi = hi;
    }

    pub fn rows(&self) -> &[LinRow] {
        &self.rows
    }

    pub fn pairs(&self) -> &[CompPair] {
        &self.pairs
    }

    pub fn indicators(&self) -> &[IndicatorBlock] {
        &self.indicators
    }

    /// True when the model is already a pure MILP (no pairs, no indicators).
    pub fn is_pure(&self) -> bool {
        self.pairs.is_empty() && self.indicators.is_empty()
    }

    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * assignment[v.0]).sum()
    }

    fn check_ids(&self) -> Result<(), MilpError> {
        let n = self.vars.len();
        let check_terms = |terms: &[(VarId, f64)]| terms.iter().all(|t| t.0 .0 < n);
        let rows_ok = self.rows.iter().all(|r| check_terms(&r.terms));
        let obj_ok = check_terms(&self.objective);
        let pairs_ok = self.pairs.iter().all(|p| {
            check_terms(&p.f.terms)
                && check_terms(&p.g.terms)
                && p.guard.map_or(true, |g| g.0 < n)
        });
        let ind_ok = self
            .indicators
            .iter()
            .all(|b| b.guard.0 < n && b.rows.iter().all(|r| check_terms(&r.terms)));
        if rows_ok && obj_ok && pairs_ok && ind_ok {
            Ok(())
        } else {
            Err(MilpError::InvalidModel("row or objective references an unknown variable".into()))
        }
    }

    /// Structured-text dump of the model, for debugging compiled forms.
    pub fn dump_json(&self) -> serde_json::Value {
        let sense = |s: Sense| match s {
            Sense::Le => "LE",
            Sense::Ge => "GE",
            Sense::Eq => "EQ",
        };
        json!({
            "objective": {
                "sense": match self.obj_sense { ObjSense::Min => "MIN", ObjSense::Max => "MAX" },
                "terms": self.objective.iter().map(|&(v, c)| json!([v.0, c])).collect::<Vec<_>>(),
            },
            "variables": self.vars.iter().enumerate().map(|(i, v)| json!({
                "id": i,
                "kind": match v.kind { VarKind::Continuous => "CONTINUOUS", VarKind::Integer => "INTEGER", VarKind::Binary => "BINARY" },
                "bounds": [v.lo, v.hi],
                "name": v.name,
            })).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| json!({
                "terms": r.terms.iter().map(|&(v, c)| json!([v.0, c])).collect::<Vec<_>>(),
                "sense": sense(r.sense),
                "rhs": r.rhs,
            })).collect::<Vec<_>>(),
            "pairs": self.pairs.len(),
            "indicators": self.indicators.len(),
        })
    }
}

/// Numeric controls shared by compilation and the solver.
#[derive(Debug, Clone)]
pub struct SolverTolerances {
    /// Row violation accepted as feasible.
    pub feasibility_tol: f64,
    /// Distance from the nearest integer accepted as integral.
    pub integrality_tol: f64,
    /// Cap on big-M coefficients written by [`compile`].
    pub big_m: f64,
    /// Activation threshold `ε` used by guard-activation rows.
    pub indicator_epsilon: f64,
    /// Absolute optimality gap accepted by branch-and-bound.
    pub optimality_gap: f64,
    /// Branch-and-bound node budget before `ITER_LIMIT`.
    pub max_nodes: u64,
    /// Per-LP pivot cap before a numerical-instability error.
    pub max_lp_pivots: u64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances {
            feasibility_tol: 1e-8,
            integrality_tol: 1e-9,
            big_m: 1e4,
            indicator_epsilon: 1e-4,
            optimality_gap: 0.0,
            max_nodes: 10_000_000,
            max_lp_pivots: 500_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

/// Outcome of an LP or MILP solve.
#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    /// Objective in the model's own sense; meaningful for `Optimal` and,
    /// as the incumbent value, for `IterLimit`.
    pub objective: f64,
    /// Value per variable id; empty unless an assignment exists.
    pub assignment: Vec<f64>,
    pub node_count: u64,
    pub lp_count: u64,
    /// Proven bound on the optimum (equals `objective` when `Optimal`).
    pub best_bound: f64,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("expression range [{range_lo}, {range_hi}] exceeds big-M {big_m} in {context}")]
    CompileRange { context: String, range_lo: f64, range_hi: f64, big_m: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model is not pure (pairs or indicators remain); compile it first")]
    NotCompiled,
    #[error("variable {0} has non-finite bounds; the solver requires finite boxes")]
    UnboundedVariable(usize),
    #[error("numerical instability: {0}")]
    Numerical(String),
}

/// Interval of an affine expression under the variable bounds.
fn expr_range(model: &MilpModel, expr: &LinExpr) -> (f64, f64) {
    let mut lo = expr.constant;
    let mut hi = expr.constant;
    for &(v, c) in &expr.terms {
        let var = model.var(v);
        let (a, b) = (c * var.lo, c * var.hi);
        lo += a.min(b);
        hi += a.max(b);
    }
    (lo, hi)
}

fn row_lhs_range(model: &MilpModel, terms: &[(VarId, f64)]) -> (f64, f64) {
    expr_range(model, &LinExpr::new(terms.to_vec(), 0.0))
}

/// Key for exact-duplicate row detection.
fn row_key(terms: &[(VarId, f64)], rhs: f64) -> (Vec<(usize, u64)>, u64) {
    let expr = LinExpr::new(terms.to_vec(), 0.0).normalized();
    (
        expr.terms.iter().map(|&(v, c)| (v.0, c.to_bits())).collect(),
        rhs.to_bits(),
    )
}

struct Compiler<'a> {
    out: MilpModel,
    tol: &'a SolverTolerances,
    seen_rows: HashSet<(Vec<(usize, u64)>, u64)>,
}

impl<'a> Compiler<'a> {
    /// Add a `<=` row unless an identical one is already present.
    fn push_le(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        let expr = LinExpr::new(terms, 0.0).normalized();
        if expr.terms.is_empty() {
            return; // constant row; callers never produce violated constants
        }
        let key = row_key(&expr.terms, rhs);
        if self.seen_rows.insert(key) {
            self.out.add_row(LinRow::new(expr.terms, Sense::Le, rhs));
        }
    }

    /// Split a row of any sense into `<=` rows and register them, optionally
    /// relaxed by `slack * (1 - guard)` with the smallest sufficient slack.
    fn push_row(&mut self, row: &LinRow, guard: Option<VarId>, context: &str) -> Result<(), MilpError> {
        let mut le_rows: Vec<(Vec<(VarId, f64)>, f64)> = Vec::new();
        match row.sense {
            Sense::Le => le_rows.push((row.terms.clone(), row.rhs)),
            Sense::Ge => le_rows.push((negate(&row.terms), -row.rhs)),
            Sense::Eq => {
                le_rows.push((row.terms.clone(), row.rhs));
                le_rows.push((negate(&row.terms), -row.rhs));
            }
        }
        for (terms, rhs) in le_rows {
            match guard {
                None => self.push_le(terms, rhs),
                Some(psi) => {
                    let (_, hi) = row_lhs_range(&self.out, &terms);
                    let slack = (hi - rhs).max(0.0);
                    if slack > self.tol.big_m {
                        return Err(MilpError::CompileRange {
                            context: context.to_string(),
                            range_lo: 0.0,
                            range_hi: hi - rhs,
                            big_m: self.tol.big_m,
                        });
                    }
                    // lhs <= rhs + slack*(1 - psi)
                    let mut t = terms;
                    t.push((psi, slack));
                    self.push_le(t, rhs + slack);
                }
            }
        }
        Ok(())
    }

    /// `expr <= m * delta` (+ full relaxation when the pair guard is 0).
    ///
    /// `m` is the smallest coefficient that keeps the relaxed side vacuous
    /// under the variable bounds, capped at big-M. For a bare variable the
    /// cap being exceeded means real solutions would be cut off, which is an
    /// error; for composite expressions (dual slacks over big-M-bounded dual
    /// variables) capping at big-M is exactly the fixed-cap semantics of the
    /// linearization.
    fn push_switched_upper(
        &mut self,
        expr: &LinExpr,
        delta: VarId,
        negate_delta: bool,
        guard: Option<VarId>,
        context: &str,
    ) -> Result<(), MilpError> {
        let (range_lo, range_hi) = expr_range(&self.out, expr);
        let bare_var = expr.constant == 0.0 && expr.terms.len() == 1 && expr.terms[0].1 > 0.0;
        if bare_var && range_hi > self.tol.big_m {
            return Err(MilpError::CompileRange {
                context: context.to_string(),
                range_lo,
                range_hi,
                big_m: self.tol.big_m,
            });
        }
        let m = range_hi.max(0.0).min(self.tol.big_m);
        // expr - m*delta <= 0          (or expr + m*delta <= m with delta negated)
        let mut terms = expr.terms.clone();
        let mut rhs = -expr.constant;
        if negate_delta {
            terms.push((delta, m));
            rhs += m;
        } else {
            terms.push((delta, -m));
        }
        if let Some(psi) = guard {
            terms.push((psi, m));
            rhs += m;
        }
        self.push_le(terms, rhs);
        Ok(())
    }

    /// `expr >= 0` (relaxed to `expr >= -m (1-guard)` under a pair guard);
    /// skipped when the bounds already imply nonnegativity. The relaxation
    /// slack is capped at big-M like the switched rows.
    fn push_nonneg(&mut self, expr: &LinExpr, guard: Option<VarId>) {
        let (range_lo, _) = expr_range(&self.out, expr);
        if range_lo >= 0.0 {
            return;
        }
        // -expr <= 0, relaxed by m*(1-psi) under a guard.
        let mut terms = negate(&expr.terms);
        let mut rhs = expr.constant;
        if let Some(psi) = guard {
            let m = (-range_lo).min(self.tol.big_m);
            terms.push((psi, m));
            rhs += m;
        }
        self.push_le(terms, rhs);
    }
}

fn negate(terms: &[(VarId, f64)]) -> Vec<(VarId, f64)> {
    terms.iter().map(|&(v, c)| (v, -c)).collect()
}

/// Rewrite complementarity pairs and indicator blocks into pure big-M rows.
///
/// Each pair `(f, g)` gets a fresh binary `delta` with `f <= m_f*delta`,
/// `g <= m_g*(1-delta)` plus explicit `f >= 0` / `g >= 0` rows where the
/// bounds do not already imply them; guarded pairs and indicator rows are
/// additionally relaxed by their guard. Rows that would duplicate an existing
/// row exactly are emitted once.
pub fn compile(model: &MilpModel, tol: &SolverTolerances) -> Result<MilpModel, MilpError> {
    model.check_ids()?;
    if model.is_pure() {
        return Ok(model.clone());
    }
    let mut out = MilpModel::new(model.obj_sense);
    out.vars = model.vars.clone();
    out.objective = model.objective.clone();

    let mut compiler = Compiler { out, tol, seen_rows: HashSet::new() };
    for row in &model.rows {
        compiler.push_row(row, None, "model row")?;
    }
    for (k, block) in model.indicators.iter().enumerate() {
        let context = format!("indicator block {k}");
        for row in &block.rows {
            compiler.push_row(row, Some(block.guard), &context)?;
        }
    }
    for (k, pair) in model.pairs.iter().enumerate() {
        let context = format!("complementarity pair {k}");
        let delta = compiler.out.add_var(VarKind::Binary, 0.0, 1.0, format!("delta[{k}]"));
        compiler.push_switched_upper(&pair.f, delta, false, pair.guard, &context)?;
        compiler.push_switched_upper(&pair.g, delta, true, pair.guard, &context)?;
        compiler.push_nonneg(&pair.f, pair.guard);
        compiler.push_nonneg(&pair.g, pair.guard);
    }
    Ok(compiler.out)
}

/// Solve the LP relaxation of a pure model (integrality dropped).
pub fn solve_lp(model: &MilpModel, tol: &SolverTolerances) -> Result<MilpResult, MilpError> {
    if !model.is_pure() {
        return Err(MilpError::NotCompiled);
    }
    model.check_ids()?;
    branch::solve_relaxation(model, tol)
}

/// Solve a model to global optimality: compile if needed, then branch-and-bound.
pub fn solve_milp(model: &MilpModel, tol: &SolverTolerances) -> Result<MilpResult, MilpError> {
    let compiled;
    let pure = if model.is_pure() {
        model
    } else {
        compiled = compile(model, tol)?;
        &compiled
    };
    branch::branch_and_bound(pure, tol)
}

#[cfg(test)]
mod tests;
