//! The two subproblems solved at each fixed upper point: the follower's best
//! response, and the optimistic selection among equally good responses
//! subject to the upper rows.

use crate::milp::{self, LinRow, MilpModel, ObjSense, Sense, SolverTolerances, VarId, VarKind};
use crate::model::{dot, dot_i, MiblpInstance};
use thiserror::Error;

/// Best response of the follower at a fixed upper point.
#[derive(Debug, Clone)]
pub struct Sub1Result {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<i64>,
    /// Lower objective value `wR'x_hat + wZ'y_hat`.
    pub theta: f64,
}

/// Optimistic selection at a fixed upper point: among lower solutions at
/// least as good as `theta`, the one minimizing the leader's lower-part cost,
/// subject to the upper rows. Infeasibility is a normal outcome.
#[derive(Debug, Clone)]
pub struct Sub2Result {
    pub feasible: bool,
    pub x_star: Vec<f64>,
    pub y_star: Vec<i64>,
    /// `dR'x_star + dZ'y_star` when feasible.
    pub theta_o: f64,
}

#[derive(Debug, Error)]
pub enum SubprobError {
    #[error("instance is not canonical; canonicalize first")]
    NotCanonical,
    #[error("lower level is infeasible at the given upper point")]
    LowerInfeasible,
    #[error(transparent)]
    Milp(#[from] milp::MilpError),
}

fn lower_vars(inst: &MiblpInstance, model: &mut MilpModel) -> (Vec<VarId>, Vec<VarId>) {
    let xl: Vec<VarId> = (0..inst.dims.n_r)
        .map(|j| model.add_var(VarKind::Continuous, inst.xl_bounds[j].0, inst.xl_bounds[j].1, format!("xl[{j}]")))
        .collect();
    let yl: Vec<VarId> = (0..inst.dims.n_z)
        .map(|j| model.add_var(VarKind::Integer, inst.yl_bounds[j].0, inst.yl_bounds[j].1, format!("yl[{j}]")))
        .collect();
    (xl, yl)
}

fn lower_rows(inst: &MiblpInstance, model: &mut MilpModel, xl: &[VarId], yl: &[VarId], xu: &[f64], yu: &[f64]) {
    for i in 0..inst.dims.n_l {
        let mut rhs = inst.s[i];
        for (j, v) in inst.q_r.row(i) {
            rhs -= v * xu[j];
        }
        for (j, v) in inst.q_z.row(i) {
            rhs -= v * yu[j];
        }
        let mut terms = Vec::new();
        for (j, v) in inst.p_r.row(i) {
            terms.push((xl[j], v));
        }
        for (j, v) in inst.p_z.row(i) {
            terms.push((yl[j], v));
        }
        model.add_row(LinRow::new(terms, Sense::Le, rhs));
    }
}

fn extract(inst: &MiblpInstance, assignment: &[f64], xl: &[VarId], yl: &[VarId]) -> (Vec<f64>, Vec<i64>) {
    let x: Vec<f64> = xl.iter().map(|&v| assignment[v.0]).collect();
    let y: Vec<i64> = yl.iter().map(|&v| assignment[v.0].round() as i64).collect();
    let _ = inst;
    (x, y)
}

/// Solve the follower's problem at `(xu, yu)` to global optimality.
pub fn solve_sub1(
    inst: &MiblpInstance,
    xu: &[f64],
    yu: &[f64],
    tol: &SolverTolerances,
) -> Result<Sub1Result, SubprobError> {
    if !inst.is_canonical() {
        return Err(SubprobError::NotCanonical);
    }
    let mut model = MilpModel::new(ObjSense::Max);
    let (xl, yl) = lower_vars(inst, &mut model);
    lower_rows(inst, &mut model, &xl, &yl, xu, yu);
    let mut obj = Vec::new();
    for (j, &w) in inst.w_r.iter().enumerate() {
        obj.push((xl[j], w));
    }
    for (j, &w) in inst.w_z.iter().enumerate() {
        obj.push((yl[j], w));
    }
    model.set_objective(obj);
    let res = milp::solve_milp(&model, tol)?;
    match res.status {
        milp::MilpStatus::Optimal => {
            let (x_hat, y_hat) = extract(inst, &res.assignment, &xl, &yl);
            let theta = dot(&inst.w_r, &x_hat) + dot_i(&inst.w_z, &y_hat);
            Ok(Sub1Result { x_hat, y_hat, theta })
        }
        milp::MilpStatus::Infeasible => Err(SubprobError::LowerInfeasible),
        other => Err(SubprobError::Milp(milp::MilpError::Numerical(format!(
            "unexpected status {other:?} for the best-response problem"
        )))),
    }
}

/// Solve the optimistic selection at `(xu, yu)` given the best-response value
/// `theta`. The lower-optimality constraint is imposed as
/// `w'(x, y) >= theta - feasibility_tol` so floating-point noise in `theta`
/// cannot cut the true argmax set.
pub fn solve_sub2(
    inst: &MiblpInstance,
    xu: &[f64],
    yu: &[f64],
    theta: f64,
    tol: &SolverTolerances,
) -> Result<Sub2Result, SubprobError> {
    if !inst.is_canonical() {
        return Err(SubprobError::NotCanonical);
    }
    let mut model = MilpModel::new(ObjSense::Min);
    let (xl, yl) = lower_vars(inst, &mut model);
    lower_rows(inst, &mut model, &xl, &yl, xu, yu);
    // upper rows with the upper point fixed
    for i in 0..inst.dims.n_u {
        let mut rhs = inst.r[i];
        for (j, v) in inst.a_r.row(i) {
            rhs -= v * xu[j];
        }
        for (j, v) in inst.a_z.row(i) {
            rhs -= v * yu[j];
        }
        let mut terms = Vec::new();
        for (j, v) in inst.b_r.row(i) {
            terms.push((xl[j], v));
        }
        for (j, v) in inst.b_z.row(i) {
            terms.push((yl[j], v));
        }
        model.add_row(LinRow::new(terms, Sense::Le, rhs));
    }
    // lower optimality
    let mut opt_terms = Vec::new();
    for (j, &w) in inst.w_r.iter().enumerate() {
        opt_terms.push((xl[j], w));
    }
    for (j, &w) in inst.w_z.iter().enumerate() {
        opt_terms.push((yl[j], w));
    }
    model.add_row(LinRow::new(opt_terms, Sense::Ge, theta - tol.feasibility_tol));

    let mut obj = Vec::new();
    for (j, &d) in inst.d_r.iter().enumerate() {
        obj.push((xl[j], d));
    }
    for (j, &d) in inst.d_z.iter().enumerate() {
        obj.push((yl[j], d));
    }
    model.set_objective(obj);

    let res = milp::solve_milp(&model, tol)?;
    match res.status {
        milp::MilpStatus::Optimal => {
            let (x_star, y_star) = extract(inst, &res.assignment, &xl, &yl);
            let theta_o = dot(&inst.d_r, &x_star) + dot_i(&inst.d_z, &y_star);
            Ok(Sub2Result { feasible: true, x_star, y_star, theta_o })
        }
        milp::MilpStatus::Infeasible => {
            Ok(Sub2Result { feasible: false, x_star: Vec::new(), y_star: Vec::new(), theta_o: f64::NAN })
        }
        other => Err(SubprobError::Milp(milp::MilpError::Numerical(format!(
            "unexpected status {other:?} for the selection problem"
        )))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tol() -> SolverTolerances {
        SolverTolerances::default()
    }

    #[test]
    fn sub1_toy1_best_response() {
        let r = solve_sub1(&fixtures::toy1(), &[], &[2.0], &tol()).unwrap();
        assert_eq!(r.y_hat, vec![2]);
        assert!((r.theta - (-2.0)).abs() < 1e-9);
    }

    #[test]
    fn sub1_toy2_best_response() {
        let r = solve_sub1(&fixtures::toy2(), &[], &[6.0], &tol()).unwrap();
        assert_eq!(r.y_hat, vec![12]);
    }

    #[test]
    fn sub1_toy3_best_response_at_first_master_point() {
        // upper point with the second lower row tight at 2.4
        let xu = 25.6 / 9.0;
        let r = solve_sub1(&fixtures::toy3(), &[xu], &[8.0], &tol()).unwrap();
        assert_eq!(r.y_hat, vec![2]);
        assert!((r.x_hat[0] - 0.2).abs() < 1e-6, "{}", r.x_hat[0]);
    }

    #[test]
    fn sub2_toy2_infeasible_under_connecting_rows() {
        let t = tol();
        let inst = fixtures::toy2();
        let s1 = solve_sub1(&inst, &[], &[6.0], &t).unwrap();
        let s2 = solve_sub2(&inst, &[], &[6.0], s1.theta, &t).unwrap();
        assert!(!s2.feasible);
    }

    #[test]
    fn sub2_toy1_optimistic_value() {
        let t = tol();
        let inst = fixtures::toy1();
        let s1 = solve_sub1(&inst, &[], &[2.0], &t).unwrap();
        let s2 = solve_sub2(&inst, &[], &[2.0], s1.theta, &t).unwrap();
        assert!(s2.feasible);
        assert_eq!(s2.y_star, vec![2]);
        // bound contribution: cZ*yu + theta_o = -2 - 20
        assert!((inst.c_z[0] * 2.0 + s2.theta_o - (-22.0)).abs() < 1e-9);
    }

    #[test]
    fn sub2_toy3_selection_near_the_optimum() {
        let t = tol();
        let inst = fixtures::toy3();
        // at exactly xu = 3 the best response is cut off by the upper rows
        let s1 = solve_sub1(&inst, &[3.0], &[8.0], &t).unwrap();
        assert!((s1.theta - 27.0).abs() < 1e-6);
        let s2 = solve_sub2(&inst, &[3.0], &[8.0], s1.theta, &t).unwrap();
        assert!(!s2.feasible);

        // nudged inside by the activation threshold, the selection appears
        let xu = 3.0 + t.indicator_epsilon / 9.0;
        let s1 = solve_sub1(&inst, &[xu], &[8.0], &t).unwrap();
        let s2 = solve_sub2(&inst, &[xu], &[8.0], s1.theta, &t).unwrap();
        assert!(s2.feasible);
        assert_eq!(s2.y_star, vec![0]);
        assert!((s2.x_star[0] - 0.5).abs() < 1e-3);
        let ub = 20.0 * xu - 38.0 * 8.0 + s2.theta_o;
        assert!((ub - (-243.5)).abs() < 1e-3, "{ub}");
    }

    #[test]
    fn sub1_dominates_sampled_lower_feasible_points() {
        let t = tol();
        let inst = fixtures::toy3();
        let (xu, yu) = (1.5, 4.0);
        let s1 = solve_sub1(&inst, &[xu], &[yu], &t).unwrap();
        let mut state = 7u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        for _ in 0..2000 {
            let x = next() * 20.0;
            let y = (next() * 20.0).floor();
            let ok = 8.0 * xu + 2.0 * x + 8.0 * y <= 53.0 && 9.0 * xu + 2.0 * x + y <= 28.0;
            if ok {
                checked += 1;
                let w = 39.0 * x + 27.0 * y;
                assert!(w <= s1.theta + 1e-7, "sampled {w} beats theta {}", s1.theta);
            }
        }
        assert!(checked > 50, "sampling found too few feasible points");
    }

    #[test]
    fn sub2_respects_lower_optimality_and_upper_rows() {
        let t = tol();
        let inst = fixtures::toy3();
        let (xu, yu) = (3.0 + t.indicator_epsilon / 9.0, 8.0);
        let s1 = solve_sub1(&inst, &[xu], &[yu], &t).unwrap();
        let s2 = solve_sub2(&inst, &[xu], &[yu], s1.theta, &t).unwrap();
        assert!(s2.feasible);
        let w = 39.0 * s2.x_star[0] + 27.0 * s2.y_star[0] as f64;
        assert!(w >= s1.theta - 1e-6);
        let up1 = 7.0 * yu + 5.0 * s2.x_star[0] + 7.0 * s2.y_star[0] as f64;
        let up2 = 6.0 * xu + 9.0 * yu + 10.0 * s2.x_star[0] + 2.0 * s2.y_star[0] as f64;
        assert!(up1 <= 62.0 + 1e-9 && up2 <= 117.0 + 1e-9);
    }
}
