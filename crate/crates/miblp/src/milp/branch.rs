//! Branch-and-bound over the simplex engine, plus the LP-relaxation entry
//! point and an exhaustive-enumeration reference solver used by tests.
//!
//! Node order is depth-first (down branch first) with a best-bound restart
//! every 1000 nodes; branching picks the most fractional integer variable
//! with lowest-id tie break. A child differs from its parent only in one
//! variable bound, so nodes reoptimize with the dual simplex from the
//! parent's basis.

use super::simplex::{BasisSnapshot, LpStatus, Simplex};
use super::{MilpError, MilpModel, MilpResult, MilpStatus, ObjSense, Sense, SolverTolerances, VarKind};
use std::rc::Rc;

const BEST_BOUND_RESTART: u64 = 1000;

struct Built {
    engine: Simplex,
    /// structural columns that must be integral
    int_cols: Vec<usize>,
    /// +1 for Min models, -1 for Max (engine always minimizes)
    scale: f64,
}

fn build_engine(model: &MilpModel, tol: &SolverTolerances, relax_integrality: bool) -> Result<Built, MilpError> {
    let n = model.n_vars();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut int_cols = Vec::new();
    for j in 0..n {
        let var = model.var(super::VarId(j));
        if !var.lo.is_finite() || !var.hi.is_finite() {
            return Err(MilpError::UnboundedVariable(j));
        }
        lo.push(var.lo);
        hi.push(var.hi);
        if !relax_integrality && matches!(var.kind, VarKind::Integer | VarKind::Binary) {
            int_cols.push(j);
        }
    }

    // normalize rows to <= and build structural columns
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = Vec::new();
    let push_le = |terms: &[(super::VarId, f64)], rhs: f64, cols: &mut Vec<Vec<(usize, f64)>>, b: &mut Vec<f64>| {
        let row = b.len();
        let expr = super::LinExpr::new(terms.to_vec(), 0.0);
        for (v, c) in expr.normalized().terms {
            cols[v.0].push((row, c));
        }
        b.push(rhs);
    };
    for r in model.rows() {
        match r.sense {
            Sense::Le => push_le(&r.terms, r.rhs, &mut cols, &mut b),
            Sense::Ge => {
                let neg: Vec<_> = r.terms.iter().map(|&(v, c)| (v, -c)).collect();
                push_le(&neg, -r.rhs, &mut cols, &mut b);
            }
            Sense::Eq => {
                push_le(&r.terms, r.rhs, &mut cols, &mut b);
                let neg: Vec<_> = r.terms.iter().map(|&(v, c)| (v, -c)).collect();
                push_le(&neg, -r.rhs, &mut cols, &mut b);
            }
        }
    }

    let scale = match model.obj_sense() {
        ObjSense::Min => 1.0,
        ObjSense::Max => -1.0,
    };
    let mut cost = vec![0.0; n];
    for &(v, c) in model.objective() {
        cost[v.0] += scale * c;
    }

    let engine = Simplex::new(cols, cost, b, lo, hi, tol.feasibility_tol, tol.max_lp_pivots);
    Ok(Built { engine, int_cols, scale })
}

fn result_from(model: &MilpModel, status: MilpStatus, values: Vec<f64>, nodes: u64, lps: u64, best_bound: f64) -> MilpResult {
    let objective = if values.is_empty() { f64::NAN } else { model.objective_value(&values) };
    MilpResult { status, objective, assignment: values, node_count: nodes, lp_count: lps, best_bound }
}

/// Solve the LP relaxation of a pure model.
pub(super) fn solve_relaxation(model: &MilpModel, tol: &SolverTolerances) -> Result<MilpResult, MilpError> {
    let mut built = build_engine(model, tol, true)?;
    let status = built.engine.solve_fresh().map_err(|e| MilpError::Numerical(e.to_string()))?;
    Ok(match status {
        LpStatus::Optimal => {
            let values = built.engine.struct_values();
            let obj = model.objective_value(&values);
            result_from(model, MilpStatus::Optimal, values, 0, 1, obj)
        }
        LpStatus::Infeasible => result_from(model, MilpStatus::Infeasible, Vec::new(), 0, 1, f64::NAN),
        LpStatus::Unbounded => result_from(model, MilpStatus::Unbounded, Vec::new(), 0, 1, f64::NAN),
    })
}

struct Node {
    /// bound overrides relative to the root, innermost last
    overrides: Rc<OverrideChain>,
    snapshot: Rc<BasisSnapshot>,
    /// parent LP objective in the minimized sense; lower bound for the subtree
    bound: f64,
}

enum OverrideChain {
    Root,
    Link { parent: Rc<OverrideChain>, col: usize, lo: f64, hi: f64 },
}

fn collect_overrides(chain: &Rc<OverrideChain>) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    let mut cur = chain.clone();
    loop {
        match &*cur {
            OverrideChain::Root => break,
            OverrideChain::Link { parent, col, lo, hi } => {
                out.push((*col, *lo, *hi));
                cur = parent.clone();
            }
        }
    }
    out.reverse();
    out
}

/// Branch-and-bound on a compiled (pure) model.
pub(super) fn branch_and_bound(model: &MilpModel, tol: &SolverTolerances) -> Result<MilpResult, MilpError> {
    let mut built = build_engine(model, tol, false)?;
    let root_lo: Vec<f64> = (0..built.engine.n_struct).map(|j| built.engine.bounds(j).0).collect();
    let root_hi: Vec<f64> = (0..built.engine.n_struct).map(|j| built.engine.bounds(j).1).collect();

    let mut nodes: u64 = 0;
    let mut lps: u64 = 0;
    let mut incumbent: Option<(f64, Vec<f64>)> = None; // (minimized objective, values)

    let root_status = built.engine.solve_fresh().map_err(|e| MilpError::Numerical(e.to_string()))?;
    lps += 1;
    match root_status {
        LpStatus::Infeasible => {
            return Ok(result_from(model, MilpStatus::Infeasible, Vec::new(), 0, lps, f64::NAN));
        }
        LpStatus::Unbounded => {
            return Ok(result_from(model, MilpStatus::Unbounded, Vec::new(), 0, lps, f64::NAN));
        }
        LpStatus::Optimal => {}
    }

    let mut stack: Vec<Node> = vec![Node {
        overrides: Rc::new(OverrideChain::Root),
        snapshot: Rc::new(built.engine.snapshot()),
        bound: built.engine.objective_value(),
    }];
    // The root node re-solves from its own snapshot; cheap and uniform.

    while let Some(node) = pop_next(&mut stack, nodes) {
        if nodes >= tol.max_nodes {
            stack.push(node);
            return Ok(finish_limit(model, &built, incumbent, &stack, nodes, lps));
        }
        nodes += 1;

        // install node bounds
        let overrides = collect_overrides(&node.overrides);
        let mut touched: Vec<usize> = Vec::with_capacity(overrides.len());
        for &(col, lo, hi) in &overrides {
            built.engine.set_bounds(col, lo, hi);
            touched.push(col);
        }
        let revert = |engine: &mut Simplex, touched: &[usize]| {
            for &col in touched {
                engine.set_bounds(col, root_lo[col], root_hi[col]);
            }
        };

        let mut status = match built.engine.restore(&node.snapshot) {
            Ok(()) => built.engine.resolve_from_basis(),
            Err(e) => Err(e),
        };
        // fall back to a scratch solve on numerical trouble, including a
        // warm solve that claims optimality with a non-finite value
        let suspicious = match &status {
            Ok(LpStatus::Optimal) => !built.engine.objective_value().is_finite(),
            Ok(_) => false,
            Err(_) => true,
        };
        if suspicious {
            status = built.engine.solve_fresh();
            if matches!(status, Ok(LpStatus::Optimal)) && !built.engine.objective_value().is_finite() {
                return Err(MilpError::Numerical("node relaxation produced a non-finite optimum".into()));
            }
        }
        let status = status.map_err(|e| MilpError::Numerical(e.to_string()))?;
        lps += 1;

        if status != LpStatus::Optimal || built.engine.primal_infeasibility() > tol.feasibility_tol * 100.0 {
            revert(&mut built.engine, &touched);
            if status == LpStatus::Unbounded {
                return Ok(result_from(model, MilpStatus::Unbounded, Vec::new(), nodes, lps, f64::NAN));
            }
            continue;
        }

        let obj = built.engine.objective_value();
        if let Some((inc, _)) = &incumbent {
            let cutoff = inc - tol.optimality_gap.max(1e-9 * (1.0 + inc.abs()));
            if obj >= cutoff {
                revert(&mut built.engine, &touched);
                continue;
            }
        }

        // branching variable: most fractional, lowest id on ties. Values are
        // clamped into the node box first; the LP keeps basics in bounds only
        // up to its feasibility tolerance, and an out-of-box value would
        // otherwise branch to a child identical to its parent.
        let mut branch: Option<(f64, usize, f64)> = None; // (closeness to .5, col, value)
        for &col in &built.int_cols {
            let (lo_j, hi_j) = built.engine.bounds(col);
            let raw = built.engine.value(col);
            if !raw.is_finite() {
                return Err(MilpError::Numerical("non-finite variable value in node relaxation".into()));
            }
            let v = raw.clamp(lo_j, hi_j);
            let frac = v - v.floor();
            let dist = (frac - 0.5).abs();
            let integral = frac.min(1.0 - frac) <= tol.integrality_tol.max(1e-9);
            if !integral && branch.map_or(true, |(d, _, _)| dist < d) {
                branch = Some((dist, col, v));
            }
        }

        match branch {
            None => {
                let values = built.engine.struct_values();
                let min_obj = obj;
                if incumbent.as_ref().map_or(true, |(inc, _)| min_obj < *inc) {
                    incumbent = Some((min_obj, values));
                }
            }
            Some((_, col, v)) => {
                let snapshot = Rc::new(built.engine.snapshot());
                let (lo_cur, hi_cur) = built.engine.bounds(col);
                let up = Node {
                    overrides: Rc::new(OverrideChain::Link {
                        parent: node.overrides.clone(),
                        col,
                        lo: v.ceil(),
                        hi: hi_cur,
                    }),
                    snapshot: snapshot.clone(),
                    bound: obj,
                };
                let down = Node {
                    overrides: Rc::new(OverrideChain::Link {
                        parent: node.overrides.clone(),
                        col,
                        lo: lo_cur,
                        hi: v.floor(),
                    }),
                    snapshot,
                    bound: obj,
                };
                stack.push(up);
                stack.push(down);
            }
        }
        revert(&mut built.engine, &touched);
    }

    Ok(match incumbent {
        Some((min_obj, values)) => {
            let status = MilpStatus::Optimal;
            let bound = built.scale * min_obj;
            let mut res = result_from(model, status, values, nodes, lps, bound);
            res.best_bound = res.objective;
            res
        }
        None => result_from(model, MilpStatus::Infeasible, Vec::new(), nodes, lps, f64::NAN),
    })
}

fn pop_next(stack: &mut Vec<Node>, processed: u64) -> Option<Node> {
    if stack.is_empty() {
        return None;
    }
    if processed > 0 && processed % BEST_BOUND_RESTART == 0 {
        let mut best = 0;
        for i in 1..stack.len() {
            if stack[i].bound < stack[best].bound {
                best = i;
            }
        }
        return Some(stack.remove(best));
    }
    stack.pop()
}

fn finish_limit(
    model: &MilpModel,
    built: &Built,
    incumbent: Option<(f64, Vec<f64>)>,
    stack: &[Node],
    nodes: u64,
    lps: u64,
) -> MilpResult {
    let mut bound = incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o);
    for node in stack {
        bound = bound.min(node.bound);
    }
    let best_bound = built.scale * bound;
    match incumbent {
        Some((_, values)) => {
            let mut res = result_from(model, MilpStatus::IterLimit, values, nodes, lps, best_bound);
            res.best_bound = best_bound;
            res
        }
        None => MilpResult {
            status: MilpStatus::IterLimit,
            objective: f64::NAN,
            assignment: Vec::new(),
            node_count: nodes,
            lp_count: lps,
            best_bound,
        },
    }
}

/// Exhaustive reference: enumerate every integral assignment of the integer
/// variables and solve the continuous LP for each. Intended for small test
/// models; panics if the integer grid exceeds `grid_cap`.
pub fn brute_force_reference(
    model: &MilpModel,
    tol: &SolverTolerances,
    grid_cap: u64,
) -> Result<MilpResult, MilpError> {
    let compiled;
    let pure = if model.is_pure() {
        model
    } else {
        compiled = super::compile(model, tol)?;
        &compiled
    };

    let int_vars: Vec<usize> = (0..pure.n_vars())
        .filter(|&j| matches!(pure.var(super::VarId(j)).kind, VarKind::Integer | VarKind::Binary))
        .collect();
    let mut grid: u64 = 1;
    for &j in &int_vars {
        let var = pure.var(super::VarId(j));
        let width = (var.hi - var.lo + 1.0).max(0.0) as u64;
        grid = grid.saturating_mul(width);
        assert!(grid <= grid_cap, "integer grid {grid} exceeds cap {grid_cap}");
    }

    let mut best: Option<MilpResult> = None;
    let mut lps = 0;
    let mut point: Vec<i64> = int_vars.iter().map(|&j| pure.var(super::VarId(j)).lo as i64).collect();
    let better = |a: f64, b: f64| match pure.obj_sense() {
        ObjSense::Min => a < b,
        ObjSense::Max => a > b,
    };
    loop {
        let mut fixed = pure.clone();
        for (k, &j) in int_vars.iter().enumerate() {
            fixed.set_bounds(super::VarId(j), point[k] as f64, point[k] as f64);
        }
        let res = solve_relaxation(&fixed, tol)?;
        lps += 1;
        if res.status == MilpStatus::Optimal
            && best.as_ref().map_or(true, |b| better(res.objective, b.objective))
        {
            best = Some(res);
        }

        // next grid point
        let mut k = 0;
        loop {
            if k == int_vars.len() {
                let mut out = best.unwrap_or(MilpResult {
                    status: MilpStatus::Infeasible,
                    objective: f64::NAN,
                    assignment: Vec::new(),
                    node_count: 0,
                    lp_count: 0,
                    best_bound: f64::NAN,
                });
                out.lp_count = lps;
                return Ok(out);
            }
            let var = pure.var(super::VarId(int_vars[k]));
            if (point[k] as f64) < var.hi {
                point[k] += 1;
                break;
            }
            point[k] = var.lo as i64;
            k += 1;
        }
    }
}
