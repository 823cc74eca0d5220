//! The decomposition driver: alternate between the lower-bounding master and
//! the two subproblems, growing the master by one response block per
//! iteration, until the bound gap closes.
//!
//! Per iteration `k`: solve the master and take its optimum as the lower
//! bound; stop if the gap is closed; solve the best-response problem at the
//! master's upper point; solve the optimistic selection — when feasible it
//! yields an upper bound (and the incumbent), and its response is the one
//! added to the master, otherwise the best response is added instead; stop if
//! the gap is closed, else loop. An infeasible master means the instance has
//! no bilevel-feasible point (the masters are relaxations of one another in
//! sequence, so infeasibility never appears spuriously).

use crate::milp::{self, MilpStatus, SolverTolerances};
use crate::model::{dot, dot_i, BilevelSolution, MiblpInstance};
use crate::reform::{self, BlockKind, MasterState};
use crate::subprob::{self, Sub1Result, Sub2Result};
use serde_json::json;
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

/// Driver configuration; defaults follow the reference settings (absolute
/// gap 1e-3, big-M 1e4, activation threshold 1e-4, tightening on).
#[derive(Debug, Clone)]
pub struct CcgConfig {
    /// Gap tolerance: terminate when `ub - lb < xi`.
    pub xi: f64,
    /// Interpret `xi` as a relative gap `(ub - lb) / max(1, |ub|)`.
    pub relative_gap: bool,
    pub tol: SolverTolerances,
    pub use_tightening: bool,
    pub max_iterations: usize,
    pub block_kind: BlockKind,
    /// See [`MasterState::literal_eq83`].
    pub literal_eq83: bool,
}

impl Default for CcgConfig {
    fn default() -> Self {
        CcgConfig {
            xi: 1e-3,
            relative_gap: false,
            tol: SolverTolerances::default(),
            use_tightening: true,
            max_iterations: 500,
            block_kind: BlockKind::ProjectionGuarded,
            literal_eq83: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

/// Everything observed in one iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    /// Master optimum (the lower bound after this master solve).
    pub lb: f64,
    /// The master's optimal point (not necessarily bilevel feasible).
    pub master_point: BilevelSolution,
    /// Best response at the master's upper point; absent when the run
    /// terminated before reaching it.
    pub sub1: Option<Sub1Result>,
    pub sub2: Option<Sub2Result>,
    /// Upper bound after this iteration's selection step.
    pub ub_after: f64,
    /// Response whose block was generated in this iteration.
    pub generated_y: Option<Vec<i64>>,
    pub master_secs: f64,
    pub sub_secs: f64,
}

/// Final outcome with the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Incumbent achieving `ub` (present whenever some selection succeeded).
    pub best: Option<BilevelSolution>,
    pub lb: f64,
    pub ub: f64,
    pub iterations: Vec<IterationRecord>,
    pub master_secs: f64,
    pub sub1_secs: f64,
    pub sub2_secs: f64,
}

impl SolveReport {
    /// Number of master solves performed.
    pub fn master_solves(&self) -> usize {
        self.iterations.len()
    }

    /// Write the trace as line-delimited JSON records.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for it in &self.iterations {
            let rec = json!({
                "k": it.k,
                "lb": finite_or_null(it.lb),
                "ub": finite_or_null(it.ub_after),
                "sub2_feasible": it.sub2.as_ref().map(|s| s.feasible),
                "generated_y": it.generated_y,
                "master_secs": it.master_secs,
                "sub_secs": it.sub_secs,
            });
            writeln!(w, "{rec}")?;
        }
        Ok(())
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

#[derive(Debug, Error)]
pub enum CcgError {
    #[error("instance failed validation:\n{0}")]
    Invalid(String),
    #[error(transparent)]
    Reform(#[from] reform::ReformError),
    #[error(transparent)]
    Subprob(#[from] subprob::SubprobError),
    #[error(transparent)]
    Milp(#[from] milp::MilpError),
    #[error("internal: {0}")]
    Internal(String),
}

struct MasterPoint {
    xu: Vec<f64>,
    yu: Vec<i64>,
    xl0: Vec<f64>,
    yl0: Vec<i64>,
}

fn extract_point(master: &MasterState, assignment: &[f64]) -> MasterPoint {
    MasterPoint {
        xu: master.xu.iter().map(|&v| assignment[v.0]).collect(),
        yu: master.yu.iter().map(|&v| assignment[v.0].round() as i64).collect(),
        xl0: master.xl0.iter().map(|&v| assignment[v.0]).collect(),
        yl0: master.yl0.iter().map(|&v| assignment[v.0].round() as i64).collect(),
    }
}

/// Run the decomposition on an instance.
pub fn solve(instance: &MiblpInstance, config: &CcgConfig) -> Result<SolveReport, CcgError> {
    let report = instance.validate();
    if !report.ok {
        return Err(CcgError::Invalid(report.to_string().trim_end().to_string()));
    }
    let canon = instance.canonicalize();
    let tol = &config.tol;

    let mut master = reform::build_master_base(&canon, config.use_tightening, tol)?;
    master.literal_eq83 = config.literal_eq83;

    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut best: Option<BilevelSolution> = None;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut master_secs = 0.0;
    let mut sub1_secs = 0.0;
    let mut sub2_secs = 0.0;
    let mut stalled = 0u32;

    let gap_closed = |ub: f64, lb: f64| -> bool {
        if !ub.is_finite() || !lb.is_finite() {
            return false;
        }
        let gap = ub - lb;
        let closed = if config.relative_gap { gap / ub.abs().max(1.0) < config.xi } else { gap < config.xi };
        closed || gap <= tol.feasibility_tol
    };

    let finish = |status: SolveStatus,
                  best: Option<BilevelSolution>,
                  lb: f64,
                  ub: f64,
                  iterations: Vec<IterationRecord>,
                  times: (f64, f64, f64)| SolveReport {
        status,
        best,
        lb,
        ub,
        iterations,
        master_secs: times.0,
        sub1_secs: times.1,
        sub2_secs: times.2,
    };

    for k in 0..config.max_iterations {
        // lower bounding
        let t0 = Instant::now();
        let res = milp::solve_milp(&master.model, tol)?;
        let m_secs = t0.elapsed().as_secs_f64();
        master_secs += m_secs;
        match res.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible => {
                return Ok(finish(SolveStatus::Infeasible, best, lb, ub, iterations, (master_secs, sub1_secs, sub2_secs)));
            }
            MilpStatus::IterLimit => {
                if res.best_bound.is_finite() {
                    lb = lb.max(res.best_bound);
                }
                return Ok(finish(SolveStatus::IterLimit, best, lb, ub, iterations, (master_secs, sub1_secs, sub2_secs)));
            }
            MilpStatus::Unbounded => {
                return Err(CcgError::Internal("master unbounded despite finite variable boxes".into()));
            }
        }
        lb = res.objective;
        let point = extract_point(&master, &res.assignment);
        let master_point = BilevelSolution::new(&canon, point.xu.clone(), point.yu.clone(), point.xl0.clone(), point.yl0.clone());

        // termination on the fresh bounds
        if gap_closed(ub, lb) {
            iterations.push(IterationRecord {
                k,
                lb,
                master_point,
                sub1: None,
                sub2: None,
                ub_after: ub,
                generated_y: None,
                master_secs: m_secs,
                sub_secs: 0.0,
            });
            return Ok(finish(SolveStatus::Optimal, best, lb, ub, iterations, (master_secs, sub1_secs, sub2_secs)));
        }

        // best response at the master's upper point
        let yu_f: Vec<f64> = point.yu.iter().map(|&v| v as f64).collect();
        let t1 = Instant::now();
        let sub1 = subprob::solve_sub1(&canon, &point.xu, &yu_f, tol)?;
        let s1_secs = t1.elapsed().as_secs_f64();
        sub1_secs += s1_secs;

        // optimistic selection; a success updates the upper bound
        let t2 = Instant::now();
        let sub2 = subprob::solve_sub2(&canon, &point.xu, &yu_f, sub1.theta, tol)?;
        let s2_secs = t2.elapsed().as_secs_f64();
        sub2_secs += s2_secs;

        let generated = if sub2.feasible {
            let candidate = dot(&canon.c_r, &point.xu) + dot_i(&canon.c_z, &point.yu) + sub2.theta_o;
            if candidate < ub {
                ub = candidate;
                best = Some(BilevelSolution::new(
                    &canon,
                    point.xu.clone(),
                    point.yu.clone(),
                    sub2.x_star.clone(),
                    sub2.y_star.clone(),
                ));
            }
            sub2.y_star.clone()
        } else {
            sub1.y_hat.clone()
        };

        // grow the master; a repeated response means the next gap check must
        // close (otherwise the run has stalled numerically)
        match reform::add_ccg_block(&mut master, &generated, config.block_kind, tol) {
            Ok(()) => stalled = 0,
            Err(reform::ReformError::DuplicateBlock) => stalled += 1,
            Err(e) => return Err(e.into()),
        }

        iterations.push(IterationRecord {
            k,
            lb,
            master_point,
            sub1: Some(sub1),
            sub2: Some(sub2),
            ub_after: ub,
            generated_y: Some(generated),
            master_secs: m_secs,
            sub_secs: s1_secs + s2_secs,
        });

        if gap_closed(ub, lb) {
            return Ok(finish(SolveStatus::Optimal, best, lb, ub, iterations, (master_secs, sub1_secs, sub2_secs)));
        }
        if stalled >= 2 {
            return Ok(finish(SolveStatus::IterLimit, best, lb, ub, iterations, (master_secs, sub1_secs, sub2_secs)));
        }
    }
    Ok(finish(SolveStatus::IterLimit, best, lb, ub, iterations, (master_secs, sub1_secs, sub2_secs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn lbs(report: &SolveReport) -> Vec<f64> {
        report.iterations.iter().map(|r| r.lb).collect()
    }

    #[test]
    fn toy1_golden_trace() {
        let report = solve(&fixtures::toy1(), &CcgConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.master_solves(), 3);
        let lbs = lbs(&report);
        for (got, want) in lbs.iter().zip([-42.0, -26.0, -22.0]) {
            assert!((got - want).abs() < 1e-6, "lbs {lbs:?}");
        }
        assert!((report.ub - (-22.0)).abs() < 1e-6);
        let best = report.best.as_ref().unwrap();
        assert_eq!(best.yu, vec![2]);
        assert_eq!(best.yl0, vec![2]);
        // the terminating check fires before the subproblems
        assert!(report.iterations[2].sub1.is_none());
        // bound monotonicity along the run
        for w in report.iterations.windows(2) {
            assert!(w[0].lb <= w[1].lb + 1e-9);
            assert!(w[0].ub_after >= w[1].ub_after - 1e-9);
        }
    }

    #[test]
    fn toy2_golden_trace() {
        let report = solve(&fixtures::toy2(), &CcgConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.master_solves(), 3);
        let lbs = lbs(&report);
        for (got, want) in lbs.iter().zip([-22.0, -21.0, -20.0]) {
            assert!((got - want).abs() < 1e-6, "lbs {lbs:?}");
        }
        // selections fail in the first two iterations under the connecting rows
        assert!(!report.iterations[0].sub2.as_ref().unwrap().feasible);
        assert!(!report.iterations[1].sub2.as_ref().unwrap().feasible);
        assert_eq!(report.iterations[0].generated_y.as_deref(), Some(&[12][..]));
        assert_eq!(report.iterations[1].generated_y.as_deref(), Some(&[9][..]));
        assert!((report.ub - (-20.0)).abs() < 1e-6);
        let best = report.best.as_ref().unwrap();
        assert_eq!(best.yu, vec![8]);
        assert_eq!(best.yl0, vec![6]);
    }

    #[test]
    fn toy3_golden_trace_with_tightening() {
        let report = solve(&fixtures::toy3(), &CcgConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.master_solves(), 3, "lbs {:?}", lbs(&report));
        let lbs = lbs(&report);
        for (got, want) in lbs.iter().zip([-245.911, -245.222, -243.5]) {
            assert!((got - want).abs() < 1e-3, "lbs {lbs:?}");
        }
        let best = report.best.as_ref().unwrap();
        assert!((best.xu[0] - 3.0).abs() < 1e-3);
        assert_eq!(best.yu, vec![8]);
        assert!((best.xl0[0] - 0.5).abs() < 1e-3);
        assert_eq!(best.yl0, vec![0]);
        assert!((report.ub - (-243.5)).abs() < 1e-3);
    }

    #[test]
    fn toy3_takes_five_iterations_without_tightening() {
        let config = CcgConfig { use_tightening: false, ..CcgConfig::default() };
        let report = solve(&fixtures::toy3(), &config).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.master_solves(), 5, "lbs {:?}", lbs(&report));
        assert!((report.ub - (-243.5)).abs() < 1e-3);
    }

    #[test]
    fn q0_solves_in_one_iteration() {
        let report = solve(&fixtures::q0(), &CcgConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!((report.ub - (-2.0)).abs() < 1e-6);
        let best = report.best.as_ref().unwrap();
        assert_eq!(best.yu, vec![1]);
        assert!(best.xl0[0].abs() < 1e-6);
        assert_eq!(best.yl0, vec![1]);
    }

    #[test]
    fn infeasible_instance_is_reported() {
        // upper rows force yl0 >= 3 while the lower rows cap the response at 2
        let mut inst = fixtures::toy1();
        inst.dims.n_u = 1;
        inst.a_r = crate::model::SparseMat::new(1, 0);
        inst.a_z = crate::model::SparseMat::new(1, 1);
        inst.b_r = crate::model::SparseMat::new(1, 0);
        inst.b_z = crate::model::SparseMat::from_triplets(1, 1, [(0usize, 0usize, -1.0)]);
        inst.r = vec![-5.0];
        inst.upper_senses = vec![crate::model::RowSense::Le];
        let report = solve(&inst, &CcgConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Infeasible);
    }

    #[test]
    fn validation_failure_is_an_error() {
        let mut inst = fixtures::toy1();
        inst.yu_bounds[0] = (0.0, f64::INFINITY);
        assert!(matches!(solve(&inst, &CcgConfig::default()), Err(CcgError::Invalid(_))));
    }

    #[test]
    fn trace_lines_parse_as_json() {
        let report = solve(&fixtures::toy2(), &CcgConfig::default()).unwrap();
        let mut buf = Vec::new();
        report.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), report.master_solves());
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("k").is_some() && v.get("lb").is_some());
        }
    }
}
