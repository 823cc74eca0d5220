use super::*;

fn tol() -> SolverTolerances {
    SolverTolerances::default()
}

fn var_c(m: &mut MilpModel, lo: f64, hi: f64, name: &str) -> VarId {
    m.add_var(VarKind::Continuous, lo, hi, name)
}

fn var_b(m: &mut MilpModel, name: impl Into<String>) -> VarId {
    m.add_var(VarKind::Binary, 0.0, 1.0, name)
}

#[test]
fn lp_max_single_variable() {
    let mut m = MilpModel::new(ObjSense::Max);
    let x = var_c(&mut m, 0.0, 10.0, "x");
    m.add_row(LinRow::new(vec![(x, 1.0)], Sense::Le, 3.0));
    m.set_objective(vec![(x, 1.0)]);
    let res = solve_lp(&m, &tol()).unwrap();
    assert_eq!(res.status, MilpStatus::Optimal);
    assert!((res.objective - 3.0).abs() < 1e-9);
    assert!((res.assignment[x.0] - 3.0).abs() < 1e-9);
}

#[test]
fn lp_detects_infeasibility() {
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 0.0, 10.0, "x");
    m.add_row(LinRow::new(vec![(x, 1.0)], Sense::Le, -1.0));
    let res = solve_lp(&m, &tol()).unwrap();
    assert_eq!(res.status, MilpStatus::Infeasible);
}

#[test]
fn lp_relaxation_slack_projection_value() {
    // min t  s.t.  x - t <= -1,  x, t >= 0: the violation absorbed by t is 1.
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 0.0, 10.0, "x");
    let t = var_c(&mut m, 0.0, 1e4, "t");
    m.add_row(LinRow::new(vec![(x, 1.0), (t, -1.0)], Sense::Le, -1.0));
    m.set_objective(vec![(t, 1.0)]);
    let res = solve_lp(&m, &tol()).unwrap();
    assert_eq!(res.status, MilpStatus::Optimal);
    assert!((res.objective - 1.0).abs() < 1e-9, "got {}", res.objective);
}

#[test]
fn lp_handles_equality_and_ge_rows() {
    // min x + y  s.t.  x + y == 4, x - y >= 1, 0 <= x,y <= 10
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 0.0, 10.0, "x");
    let y = var_c(&mut m, 0.0, 10.0, "y");
    m.add_row(LinRow::new(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0));
    m.add_row(LinRow::new(vec![(x, 1.0), (y, -1.0)], Sense::Ge, 1.0));
    m.set_objective(vec![(x, 1.0), (y, 1.0)]);
    let res = solve_lp(&m, &tol()).unwrap();
    assert_eq!(res.status, MilpStatus::Optimal);
    assert!((res.objective - 4.0).abs() < 1e-9);
}

#[test]
fn lp_respects_lower_bounds_away_from_zero() {
    // min x + y  s.t.  x + y >= 7, x in [2, 10], y in [3, 10]
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 2.0, 10.0, "x");
    let y = var_c(&mut m, 3.0, 10.0, "y");
    m.add_row(LinRow::new(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 7.0));
    m.set_objective(vec![(x, 1.0), (y, 1.0)]);
    let res = solve_lp(&m, &tol()).unwrap();
    assert_eq!(res.status, MilpStatus::Optimal);
    assert!((res.objective - 7.0).abs() < 1e-9);
}

#[test]
fn compile_is_identity_for_pure_models() {
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 0.0, 1.0, "x");
    m.add_row(LinRow::new(vec![(x, 1.0)], Sense::Le, 0.5));
    let compiled = compile(&m, &tol()).unwrap();
    assert_eq!(compiled.n_vars(), 1);
    assert_eq!(compiled.rows().len(), 1);
}

#[test]
fn compile_pair_forces_extremes() {
    // pair (x, 1-x) with x in [0,1]: feasible points have x in {0, 1}.
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 0.0, 1.0, "x");
    m.add_pair(CompPair {
        f: LinExpr::from_var(x),
        g: LinExpr::new(vec![(x, -1.0)], 1.0),
        guard: None,
    });
    let compiled = compile(&m, &t).unwrap();
    assert_eq!(compiled.n_vars(), 2, "one fresh binary");
    // enumerate the binary by brute force: either way, x*(1-x) = 0
    for want in [0.0, 1.0] {
        let mut probe = compiled.clone();
        probe.set_objective(vec![(x, if want == 0.0 { 1.0 } else { -1.0 })]);
        let res = solve_milp(&probe, &t).unwrap();
        assert_eq!(res.status, MilpStatus::Optimal);
        assert!((res.assignment[x.0] - want).abs() < 1e-7);
    }
}

#[test]
fn compile_guarded_row_uses_big_m_relaxation() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Max);
    let y = var_c(&mut m, 0.0, 100.0, "y");
    let psi = var_b(&mut m, "psi");
    m.add_indicator(IndicatorBlock { guard: psi, rows: vec![LinRow::new(vec![(y, 1.0)], Sense::Le, 2.0)] });
    m.set_objective(vec![(y, 1.0)]);
    let compiled = compile(&m, &t).unwrap();
    // with psi forced to 1, the row binds
    let mut on = compiled.clone();
    on.set_bounds(psi, 1.0, 1.0);
    let res = solve_milp(&on, &t).unwrap();
    assert!((res.objective - 2.0).abs() < 1e-7);
    // with psi forced to 0, the row is vacuous
    let mut off = compiled.clone();
    off.set_bounds(psi, 0.0, 0.0);
    let res = solve_milp(&off, &t).unwrap();
    assert!((res.objective - 100.0).abs() < 1e-7);
}

#[test]
fn compile_range_error_when_big_m_too_small() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Min);
    let x = var_c(&mut m, 0.0, 1e6, "x");
    let y = var_c(&mut m, 0.0, 1.0, "y");
    m.add_pair(CompPair { f: LinExpr::from_var(x), g: LinExpr::from_var(y), guard: None });
    match compile(&m, &t) {
        Err(MilpError::CompileRange { .. }) => {}
        other => panic!("expected CompileRange, got {other:?}"),
    }
}

#[test]
fn milp_binary_knapsack_matches_enumeration() {
    // max 5a + 4b  s.t.  6a + 4b <= 11, a, b binary: all four points feasible
    // except none; optimum 9 at (1,1) since 10 <= 11.
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Max);
    let a = var_b(&mut m, "a");
    let b = var_b(&mut m, "b");
    m.add_row(LinRow::new(vec![(a, 6.0), (b, 4.0)], Sense::Le, 11.0));
    m.set_objective(vec![(a, 5.0), (b, 4.0)]);
    let res = solve_milp(&m, &t).unwrap();
    assert_eq!(res.status, MilpStatus::Optimal);
    assert!((res.objective - 9.0).abs() < 1e-9);
    let reference = brute_force_reference(&m, &t, 1 << 20).unwrap();
    assert!((reference.objective - res.objective).abs() < 1e-9);
}

#[test]
fn milp_on_continuous_model_equals_lp() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Max);
    let x = var_c(&mut m, 0.0, 10.0, "x");
    let y = var_c(&mut m, 0.0, 10.0, "y");
    m.add_row(LinRow::new(vec![(x, 2.0), (y, 1.0)], Sense::Le, 10.0));
    m.add_row(LinRow::new(vec![(x, 1.0), (y, 3.0)], Sense::Le, 15.0));
    m.set_objective(vec![(x, 3.0), (y, 2.0)]);
    let lp = solve_lp(&m, &t).unwrap();
    let ip = solve_milp(&m, &t).unwrap();
    assert!((lp.objective - ip.objective).abs() < 1e-9);
    assert_eq!(ip.node_count, 1);
}

#[test]
fn milp_proves_infeasibility() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Min);
    let a = var_b(&mut m, "a");
    let b = var_b(&mut m, "b");
    m.add_row(LinRow::new(vec![(a, 1.0), (b, 1.0)], Sense::Ge, 3.0));
    let res = solve_milp(&m, &t).unwrap();
    assert_eq!(res.status, MilpStatus::Infeasible);
}

#[test]
fn milp_iter_limit_carries_bound() {
    let mut t = tol();
    t.max_nodes = 1;
    let mut m = MilpModel::new(ObjSense::Max);
    let vars: Vec<VarId> = (0..6).map(|i| var_b(&mut m, format!("b{i}"))).collect();
    let terms: Vec<(VarId, f64)> = vars.iter().enumerate().map(|(i, &v)| (v, 3.0 + i as f64)).collect();
    m.add_row(LinRow::new(terms.clone(), Sense::Le, 11.0));
    m.set_objective(terms);
    let res = solve_milp(&m, &t).unwrap();
    assert_eq!(res.status, MilpStatus::IterLimit);
    assert!(res.best_bound.is_finite());
}

#[test]
fn relaxation_bounds_the_integer_optimum() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Max);
    let a = var_b(&mut m, "a");
    let b = var_b(&mut m, "b");
    let c = var_b(&mut m, "c");
    m.add_row(LinRow::new(vec![(a, 2.0), (b, 3.0), (c, 4.0)], Sense::Le, 5.0));
    m.set_objective(vec![(a, 2.0), (b, 3.0), (c, 3.0)]);
    let relaxed = solve_lp(&m, &t).unwrap();
    let exact = solve_milp(&m, &t).unwrap();
    assert!(relaxed.objective >= exact.objective - 1e-9);
}

#[test]
fn compile_soundness_products_vanish_at_optima() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Max);
    let u = var_c(&mut m, 0.0, 10.0, "u");
    let v = var_c(&mut m, 0.0, 10.0, "v");
    m.add_row(LinRow::new(vec![(u, 1.0), (v, 1.0)], Sense::Le, 8.0));
    m.add_pair(CompPair { f: LinExpr::from_var(u), g: LinExpr::from_var(v), guard: None });
    m.set_objective(vec![(u, 1.0), (v, 2.0)]);
    let res = solve_milp(&m, &t).unwrap();
    assert_eq!(res.status, MilpStatus::Optimal);
    let fu = res.assignment[u.0];
    let gv = res.assignment[v.0];
    assert!(fu * gv <= t.feasibility_tol * (1.0 + fu.abs() + gv.abs()));
    assert!((res.objective - 16.0).abs() < 1e-7);
}

#[test]
fn solver_is_deterministic() {
    let t = tol();
    let mut m = MilpModel::new(ObjSense::Min);
    let vars: Vec<VarId> = (0..8).map(|i| var_b(&mut m, format!("b{i}"))).collect();
    for k in 0..4 {
        let terms: Vec<(VarId, f64)> =
            vars.iter().enumerate().map(|(i, &v)| (v, ((i * 7 + k * 3) % 11) as f64 - 4.0)).collect();
        m.add_row(LinRow::new(terms, Sense::Ge, -2.0));
    }
    m.set_objective(vars.iter().enumerate().map(|(i, &v)| (v, (i as f64) - 3.5)).collect());
    let a = solve_milp(&m, &t).unwrap();
    let b = solve_milp(&m, &t).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.assignment.len(), b.assignment.len());
    for (x, y) in a.assignment.iter().zip(&b.assignment) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

// Randomized cross-check against exhaustive enumeration; a larger version
// runs in the acceptance suite.
#[test]
fn bnb_matches_brute_force_on_random_models() {
    let t = tol();
    let mut state = 0x1234_5678_9abc_def0u64;
    let mut next_u64 = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut unif = move || (next_u64() >> 11) as f64 / (1u64 << 53) as f64;

    for _case in 0..25 {
        let nb = 2 + (unif() * 7.0) as usize; // 2..8 binaries
        let nc = (unif() * 3.0) as usize; // 0..2 continuous
        let mut m = MilpModel::new(if unif() < 0.5 { ObjSense::Min } else { ObjSense::Max });
        let mut vars = Vec::new();
        for i in 0..nb {
            vars.push(m.add_var(VarKind::Binary, 0.0, 1.0, format!("b{i}")));
        }
        for i in 0..nc {
            vars.push(m.add_var(VarKind::Continuous, 0.0, 10.0, format!("x{i}")));
        }
        let n_rows = 1 + (unif() * 4.0) as usize;
        for _ in 0..n_rows {
            let terms: Vec<(VarId, f64)> =
                vars.iter().map(|&v| (v, (unif() * 10.0 - 5.0).round())).filter(|t| t.1 != 0.0).collect();
            if terms.is_empty() {
                continue;
            }
            let rhs = (unif() * 20.0 - 5.0).round();
            let sense = if unif() < 0.7 { Sense::Le } else { Sense::Ge };
            m.add_row(LinRow::new(terms, sense, rhs));
        }
        m.set_objective(vars.iter().map(|&v| (v, (unif() * 20.0 - 10.0).round())).collect());

        let exact = solve_milp(&m, &t).unwrap();
        let reference = brute_force_reference(&m, &t, 1 << 20).unwrap();
        assert_eq!(exact.status, reference.status, "case {_case}: {:?}", m.dump_json());
        if exact.status == MilpStatus::Optimal {
            assert!(
                (exact.objective - reference.objective).abs() < 1e-7,
                "case {_case}: bnb {} vs brute force {}",
                exact.objective,
                reference.objective
            );
        }
    }
}

#[test]
#[ignore]
fn replay_dumped_lp() {
    let text = std::fs::read_to_string("/tmp/lp_dump.json").unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let cols: Vec<Vec<(usize, f64)>> = serde_json::from_value(v["cols"].clone()).unwrap();
    let n_struct = v["n_struct"].as_u64().unwrap() as usize;
    let m = v["m"].as_u64().unwrap() as usize;
    let lo: Vec<f64> = serde_json::from_value(v["lo"].clone()).unwrap();
    let hi: Vec<f64> = serde_json::from_value(v["hi"].clone()).unwrap();
    let real_cost: Vec<f64> = serde_json::from_value(v["real_cost"].clone()).unwrap();
    let b: Vec<f64> = serde_json::from_value(v["b"].clone()).unwrap();
    // rebuild a pure-LP model from the STRUCTURAL columns only (slacks and
    // artificials are re-created by the engine)
    let mut model = MilpModel::new(ObjSense::Min);
    for j in 0..n_struct {
        let mut l = lo[j];
        let mut h = hi[j];
        if l < -1e300 { l = f64::NEG_INFINITY; }
        if h > 1e300 { h = f64::INFINITY; }
        model.add_var(VarKind::Continuous, l, h, format!("c{j}"));
    }
    let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); m];
    for j in 0..n_struct {
        for &(i, a) in &cols[j] {
            rows[i].push((VarId(j), a));
        }
    }
    for (i, terms) in rows.into_iter().enumerate() {
        model.add_row(LinRow::new(terms, Sense::Le, b[i]));
    }
    model.set_objective((0..n_struct).map(|j| (VarId(j), real_cost[j])).filter(|t| t.1 != 0.0).collect());
    let t = SolverTolerances::default();
    let res = solve_lp(&model, &t);
    eprintln!("replay: {res:?}");
}
