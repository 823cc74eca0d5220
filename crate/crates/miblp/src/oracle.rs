//! Independent exact solvers for small instances, used to cross-check the
//! decomposition: a grid oracle that enumerates the integer boxes directly,
//! a full-enumeration solve of the guarded single-level model, and the
//! optimistic-value evaluator at a fixed upper point.

use crate::milp::{self, LinRow, MilpModel, MilpStatus, ObjSense, Sense, SolverTolerances, VarId, VarKind};
use crate::model::{dot_i, BilevelSolution, MiblpInstance};
use crate::reform::{self, BlockKind};
use crate::subprob;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub status: OracleStatus,
    pub value: f64,
    pub point: Option<BilevelSolution>,
}

/// Optimistic value of a fixed upper point.
#[derive(Debug, Clone)]
pub struct OptimisticValue {
    pub feasible: bool,
    /// Full upper objective `cR'xu + cZ'yu + dR'xl + dZ'yl` when feasible.
    pub value: f64,
    pub point: Option<BilevelSolution>,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("the grid oracle cannot enumerate continuous upper variables (mR = {m_r})")]
    NotPureInteger { m_r: usize },
    #[error("lower level is empty at the given upper point")]
    LowerEmpty,
    #[error("integer grid of size {grid} exceeds the cap {cap}")]
    CapExceeded { grid: u128, cap: u128 },
    #[error("solver did not prove optimality: {0}")]
    Unresolved(String),
    #[error(transparent)]
    Milp(#[from] milp::MilpError),
    #[error(transparent)]
    Reform(#[from] reform::ReformError),
    #[error(transparent)]
    Subprob(#[from] subprob::SubprobError),
}

/// Evaluate a fixed upper point: best response, then optimistic selection.
/// `feasible == false` means no response of best-response quality satisfies
/// the upper rows at this point.
pub fn optimistic_value(
    instance: &MiblpInstance,
    xu: &[f64],
    yu: &[f64],
    tol: &SolverTolerances,
) -> Result<OptimisticValue, OracleError> {
    let canon = instance.canonicalize();
    let s1 = match subprob::solve_sub1(&canon, xu, yu, tol) {
        Ok(s1) => s1,
        Err(subprob::SubprobError::LowerInfeasible) => return Err(OracleError::LowerEmpty),
        Err(e) => return Err(e.into()),
    };
    let s2 = subprob::solve_sub2(&canon, xu, yu, s1.theta, tol)?;
    if !s2.feasible {
        return Ok(OptimisticValue { feasible: false, value: f64::NAN, point: None });
    }
    let yu_i: Vec<i64> = yu.iter().map(|&v| v.round() as i64).collect();
    let point = BilevelSolution::new(&canon, xu.to_vec(), yu_i, s2.x_star, s2.y_star);
    Ok(OptimisticValue { feasible: true, value: point.upper_value, point: Some(point) })
}

fn grid_size(bounds: &[(f64, f64)]) -> u128 {
    bounds.iter().fold(1u128, |acc, &(lo, hi)| acc.saturating_mul((hi - lo + 1.0).max(0.0) as u128))
}

fn odometer_next(point: &mut [i64], bounds: &[(f64, f64)]) -> bool {
    let mut j = point.len();
    loop {
        if j == 0 {
            return false;
        }
        j -= 1;
        if (point[j] as f64) < bounds[j].1 {
            point[j] += 1;
            return true;
        }
        point[j] = bounds[j].0 as i64;
    }
}

/// Best continuous completion of `(yu, yl)`: value of `max wR'x` over the
/// lower rows, or `None` when no completion exists. Trivially 0 for
/// instances without lower continuous variables.
fn completion_value(
    inst: &MiblpInstance,
    yu: &[i64],
    yl: &[i64],
    tol: &SolverTolerances,
) -> Result<Option<(f64, MilpModel, Vec<VarId>)>, OracleError> {
    let d = inst.dims;
    let yu_f: Vec<f64> = yu.iter().map(|&v| v as f64).collect();
    let yl_f: Vec<f64> = yl.iter().map(|&v| v as f64).collect();
    if d.n_r == 0 {
        let ok = (0..d.n_l).all(|i| {
            inst.q_z.row_dot(i, &yu_f) + inst.p_z.row_dot(i, &yl_f) <= inst.s[i] + tol.feasibility_tol
        });
        return Ok(ok.then(|| (0.0, MilpModel::new(ObjSense::Min), Vec::new())));
    }
    let mut model = MilpModel::new(ObjSense::Max);
    let xl: Vec<VarId> = (0..d.n_r)
        .map(|j| model.add_var(VarKind::Continuous, inst.xl_bounds[j].0, inst.xl_bounds[j].1, format!("x[{j}]")))
        .collect();
    for i in 0..d.n_l {
        let rhs = inst.s[i] - inst.q_z.row_dot(i, &yu_f) - inst.p_z.row_dot(i, &yl_f);
        let terms: Vec<(VarId, f64)> = inst.p_r.row(i).map(|(j, v)| (xl[j], v)).collect();
        model.add_row(LinRow::new(terms, Sense::Le, rhs));
    }
    model.set_objective((0..d.n_r).map(|j| (xl[j], inst.w_r[j])).collect());
    let res = milp::solve_lp(&model, tol)?;
    match res.status {
        MilpStatus::Optimal => Ok(Some((res.objective, model, xl))),
        MilpStatus::Infeasible => Ok(None),
        other => Err(OracleError::Unresolved(format!("completion LP returned {other:?}"))),
    }
}

/// Direct search over the integer boxes. Requires an instance without upper
/// continuous variables; lower continuous parts are resolved per grid point
/// by small LPs. Exact by construction: for each upper point the lower
/// optimum is computed over the full response grid, and the selection
/// minimizes the leader's objective over the optimal responses that satisfy
/// the upper rows.
pub fn solve_grid(
    instance: &MiblpInstance,
    tol: &SolverTolerances,
    cap: u128,
) -> Result<OracleResult, OracleError> {
    if instance.dims.m_r > 0 {
        return Err(OracleError::NotPureInteger { m_r: instance.dims.m_r });
    }
    let inst = instance.canonicalize();
    let d = inst.dims;
    let grid = grid_size(&inst.yu_bounds).saturating_mul(grid_size(&inst.yl_bounds));
    if grid > cap {
        return Err(OracleError::CapExceeded { grid, cap });
    }

    let mut best: Option<BilevelSolution> = None;
    let mut yu: Vec<i64> = inst.yu_bounds.iter().map(|&(lo, _)| lo as i64).collect();
    loop {
        let yu_f: Vec<f64> = yu.iter().map(|&v| v as f64).collect();

        // lower optimum over the whole response grid
        let mut theta = f64::NEG_INFINITY;
        let mut responses: Vec<(Vec<i64>, f64)> = Vec::new(); // (yl, completion value)
        let mut yl: Vec<i64> = inst.yl_bounds.iter().map(|&(lo, _)| lo as i64).collect();
        loop {
            if let Some((xval, _, _)) = completion_value(&inst, &yu, &yl, tol)? {
                let total = xval + dot_i(&inst.w_z, &yl);
                theta = theta.max(total);
                responses.push((yl.clone(), total));
            }
            if d.n_z == 0 || !odometer_next(&mut yl, &inst.yl_bounds) {
                break;
            }
        }

        if theta.is_finite() {
            let eps = 1e-9 * (1.0 + theta.abs());
            for (yl, total) in &responses {
                if *total < theta - eps {
                    continue;
                }
                // optimistic completion: among best responses, minimize the
                // leader's lower-part cost subject to the upper rows
                let yl_f: Vec<f64> = yl.iter().map(|&v| v as f64).collect();
                let candidate = if d.n_r == 0 {
                    let upper_ok = (0..d.n_u).all(|i| {
                        inst.a_z.row_dot(i, &yu_f) + inst.b_z.row_dot(i, &yl_f)
                            <= inst.r[i] + tol.feasibility_tol
                    });
                    upper_ok.then(|| BilevelSolution::new(&inst, vec![], yu.clone(), vec![], yl.clone()))
                } else {
                    let (xval, _, _) = completion_value(&inst, &yu, yl, tol)?.expect("response was completable");
                    // among completions of this response with the optimal
                    // w-value, minimize the leader's lower-part cost subject
                    // to the upper rows
                    let mut model = MilpModel::new(ObjSense::Min);
                    let xl: Vec<VarId> = (0..d.n_r)
                        .map(|j| model.add_var(VarKind::Continuous, inst.xl_bounds[j].0, inst.xl_bounds[j].1, format!("x[{j}]")))
                        .collect();
                    for i in 0..d.n_l {
                        let rhs = inst.s[i] - inst.q_z.row_dot(i, &yu_f) - inst.p_z.row_dot(i, &yl_f);
                        let terms: Vec<(VarId, f64)> = inst.p_r.row(i).map(|(j, v)| (xl[j], v)).collect();
                        model.add_row(LinRow::new(terms, Sense::Le, rhs));
                    }
                    for i in 0..d.n_u {
                        let rhs = inst.r[i] - inst.a_z.row_dot(i, &yu_f) - inst.b_z.row_dot(i, &yl_f);
                        let terms: Vec<(VarId, f64)> = inst.b_r.row(i).map(|(j, v)| (xl[j], v)).collect();
                        model.add_row(LinRow::new(terms, Sense::Le, rhs));
                    }
                    let pin: Vec<(VarId, f64)> = (0..d.n_r).map(|j| (xl[j], inst.w_r[j])).collect();
                    model.add_row(LinRow::new(pin, Sense::Ge, xval - tol.feasibility_tol));
                    model.set_objective((0..d.n_r).map(|j| (xl[j], inst.d_r[j])).collect());
                    let res = milp::solve_lp(&model, tol)?;
                    match res.status {
                        MilpStatus::Optimal => {
                            let x: Vec<f64> = xl.iter().map(|&v| res.assignment[v.0]).collect();
                            Some(BilevelSolution::new(&inst, vec![], yu.clone(), x, yl.clone()))
                        }
                        MilpStatus::Infeasible => None,
                        other => return Err(OracleError::Unresolved(format!("selection LP returned {other:?}"))),
                    }
                };
                if let Some(cand) = candidate {
                    if best.as_ref().map_or(true, |b| cand.upper_value < b.upper_value - 1e-12) {
                        best = Some(cand);
                    }
                }
            }
        }

        if d.m_z == 0 || !odometer_next(&mut yu, &inst.yu_bounds) {
            break;
        }
    }

    Ok(match best {
        Some(point) => OracleResult { status: OracleStatus::Optimal, value: point.upper_value, point: Some(point) },
        None => OracleResult { status: OracleStatus::Infeasible, value: f64::NAN, point: None },
    })
}

/// Solve the full-enumeration guarded model once; exact for every instance
/// whose response grid fits under the cap.
pub fn solve_exact(
    instance: &MiblpInstance,
    tol: &SolverTolerances,
    cap: u128,
) -> Result<OracleResult, OracleError> {
    let inst = instance.canonicalize();
    let master = reform::build_full_enumeration(&inst, BlockKind::ProjectionGuarded, tol, cap)?;
    let res = milp::solve_milp(&master.model, tol)?;
    match res.status {
        MilpStatus::Optimal => {
            let xu: Vec<f64> = master.xu.iter().map(|&v| res.assignment[v.0]).collect();
            let yu: Vec<i64> = master.yu.iter().map(|&v| res.assignment[v.0].round() as i64).collect();
            let xl0: Vec<f64> = master.xl0.iter().map(|&v| res.assignment[v.0]).collect();
            let yl0: Vec<i64> = master.yl0.iter().map(|&v| res.assignment[v.0].round() as i64).collect();
            let point = BilevelSolution::new(&inst, xu, yu, xl0, yl0);
            Ok(OracleResult { status: OracleStatus::Optimal, value: res.objective, point: Some(point) })
        }
        MilpStatus::Infeasible => Ok(OracleResult { status: OracleStatus::Infeasible, value: f64::NAN, point: None }),
        other => Err(OracleError::Unresolved(format!("full-enumeration solve returned {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccg;
    use crate::fixtures;

    fn tol() -> SolverTolerances {
        SolverTolerances::default()
    }

    const CAP: u128 = reform::DEFAULT_ENUM_CAP;

    #[test]
    fn optimistic_value_toy1() {
        let v = optimistic_value(&fixtures::toy1(), &[], &[2.0], &tol()).unwrap();
        assert!(v.feasible);
        assert!((v.value - (-22.0)).abs() < 1e-9);
    }

    #[test]
    fn optimistic_value_toy2_infeasible_point() {
        let v = optimistic_value(&fixtures::toy2(), &[], &[6.0], &tol()).unwrap();
        assert!(!v.feasible);
    }

    #[test]
    fn optimistic_value_q0() {
        let v = optimistic_value(&fixtures::q0(), &[], &[1.0], &tol()).unwrap();
        assert!(v.feasible);
        assert!((v.value - (-2.0)).abs() < 1e-9);
        let p = v.point.unwrap();
        assert!(p.xl0[0].abs() < 1e-9);
        assert_eq!(p.yl0, vec![1]);
    }

    #[test]
    fn grid_golden_values() {
        let t = tol();
        let r = solve_grid(&fixtures::toy1(), &t, CAP).unwrap();
        assert!((r.value - (-22.0)).abs() < 1e-9);
        let p = r.point.unwrap();
        assert_eq!((p.yu[0], p.yl0[0]), (2, 2));

        let r = solve_grid(&fixtures::toy2(), &t, CAP).unwrap();
        assert!((r.value - (-20.0)).abs() < 1e-9);
        let p = r.point.unwrap();
        assert_eq!((p.yu[0], p.yl0[0]), (8, 6));

        let r = solve_grid(&fixtures::q0(), &t, CAP).unwrap();
        assert!((r.value - (-2.0)).abs() < 1e-9);
        let p = r.point.unwrap();
        assert_eq!((p.yu[0], p.yl0[0]), (1, 1));
        assert!(p.xl0[0].abs() < 1e-9);
    }

    #[test]
    fn grid_rejects_continuous_upper_variables() {
        assert!(matches!(
            solve_grid(&fixtures::toy3(), &tol(), CAP),
            Err(OracleError::NotPureInteger { m_r: 1 })
        ));
    }

    #[test]
    fn exact_golden_values() {
        let t = tol();
        let r = solve_exact(&fixtures::toy3(), &t, CAP).unwrap();
        assert!((r.value - (-243.5)).abs() < 1e-3, "{}", r.value);
        let p = r.point.unwrap();
        assert!((p.xu[0] - 3.0).abs() < 1e-3);
        assert_eq!(p.yu, vec![8]);
        assert!((p.xl0[0] - 0.5).abs() < 1e-3);
        assert_eq!(p.yl0, vec![0]);

        let r = solve_exact(&fixtures::q0(), &t, CAP).unwrap();
        assert!((r.value - (-2.0)).abs() < 1e-6);
    }

    #[test]
    fn exact_agrees_with_grid_on_integer_instances() {
        let t = tol();
        for inst in [fixtures::toy1(), fixtures::toy2(), fixtures::q0()] {
            let g = solve_grid(&inst, &t, CAP).unwrap();
            let e = solve_exact(&inst, &t, CAP).unwrap();
            assert_eq!(g.status, e.status, "{}", inst.name);
            assert!((g.value - e.value).abs() < 1e-6, "{}: grid {} exact {}", inst.name, g.value, e.value);
        }
    }

    #[test]
    fn optimistic_value_reproduces_ccg_upper_bound() {
        let t = tol();
        for inst in [fixtures::toy1(), fixtures::toy2(), fixtures::toy3(), fixtures::q0()] {
            let report = ccg::solve(&inst, &ccg::CcgConfig::default()).unwrap();
            let best = report.best.as_ref().unwrap();
            let yu_f: Vec<f64> = best.yu.iter().map(|&v| v as f64).collect();
            let v = optimistic_value(&inst, &best.xu, &yu_f, &t).unwrap();
            assert!(v.feasible, "{}", inst.name);
            assert!((v.value - report.ub).abs() < 1e-6, "{}: {} vs {}", inst.name, v.value, report.ub);
        }
    }
}
