//! Bounded-variable simplex over a product-form representation of the basis
//! inverse.
//!
//! The engine works on the normalized form `min c'x  s.t.  A x <= b`,
//! `lo <= x <= hi`, augmented with one slack per row (`[0, inf)`) and, during
//! phase 1, artificial columns for rows whose slack starts out of bounds.
//! Branch-and-bound talks to the same engine: a child node only tightens
//! variable bounds, so the parent's optimal basis stays dual feasible and the
//! node is reoptimized with the dual simplex.
//!
//! Pivot rules (fixed, so results are deterministic): entering by largest
//! reduced cost with lowest-index tie break, switching to Bland's rule after
//! a run of degenerate pivots; leaving by ratio test with largest-pivot then
//! lowest-index tie break.

const PIVOT_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-11;
const DUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const BLAND_TRIGGER: u64 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug)]
pub(crate) enum LpError {
    SingularBasis,
    PivotLimit,
    UnstablePivot,
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::SingularBasis => write!(f, "singular basis during refactorization"),
            LpError::PivotLimit => write!(f, "simplex pivot limit exceeded"),
            LpError::UnstablePivot => write!(f, "pivot element too small"),
        }
    }
}

struct Eta {
    pivot_row: usize,
    pivot_val: f64,
    /// Off-pivot entries of the transformed column.
    entries: Vec<(usize, f64)>,
}

/// Basis snapshot used to warm-start child nodes.
#[derive(Clone)]
pub(crate) struct BasisSnapshot {
    basis: Vec<usize>,
    at_upper: Vec<bool>,
}

pub(crate) struct Simplex {
    pub(crate) n_struct: usize,
    m: usize,
    /// Sparse columns for every variable: structural, slack, artificial.
    cols: Vec<Vec<(usize, f64)>>,
    pub(crate) lo: Vec<f64>,
    pub(crate) hi: Vec<f64>,
    real_cost: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    feas_tol: f64,
    pivot_cap: u64,

    basis: Vec<usize>,
    pos_in_basis: Vec<i64>,
    at_upper: Vec<bool>,
    xb: Vec<f64>,
    etas: Vec<Eta>,
    art_for_row: Vec<Option<usize>>,
    pub(crate) iterations: u64,
    degenerate_streak: u64,
    bland: bool,
}

impl Simplex {
    /// `cols`/`costs` describe the structural part; rows are all `<=` with
    /// right-hand side `b`.
    pub(crate) fn new(
        struct_cols: Vec<Vec<(usize, f64)>>,
        struct_cost: Vec<f64>,
        b: Vec<f64>,
        mut lo: Vec<f64>,
        mut hi: Vec<f64>,
        feas_tol: f64,
        pivot_cap: u64,
    ) -> Self {
        let n = struct_cols.len();
        let m = b.len();
        let mut cols = struct_cols;
        cols.reserve(m);
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
        }
        lo.extend(std::iter::repeat(0.0).take(m));
        hi.extend(std::iter::repeat(f64::INFINITY).take(m));
        let mut real_cost = struct_cost;
        real_cost.extend(std::iter::repeat(0.0).take(m));
        Simplex {
            n_struct: n,
            m,
            cols,
            lo,
            hi,
            cost: real_cost.clone(),
            real_cost,
            b,
            feas_tol,
            pivot_cap,
            basis: Vec::new(),
            pos_in_basis: Vec::new(),
            at_upper: Vec::new(),
            xb: vec![0.0; m],
            etas: Vec::new(),
            art_for_row: vec![None; m],
            iterations: 0,
            degenerate_streak: 0,
            bland: false,
        }
    }

    pub(crate) fn set_bounds(&mut self, col: usize, lo: f64, hi: f64) {
        self.lo[col] = lo;
        self.hi[col] = hi;
    }

    pub(crate) fn bounds(&self, col: usize) -> (f64, f64) {
        (self.lo[col], self.hi[col])
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn nb_val(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.hi[j]
        } else {
            self.lo[j]
        }
    }

    /// Value of any column under the current basis.
    pub(crate) fn value(&self, j: usize) -> f64 {
        let p = self.pos_in_basis[j];
        if p >= 0 {
            self.xb[p as usize]
        } else {
            self.nb_val(j)
        }
    }

    pub(crate) fn objective_value(&self) -> f64 {
        (0..self.n_struct).map(|j| self.real_cost[j] * self.value(j)).sum()
    }

    pub(crate) fn struct_values(&self) -> Vec<f64> {
        (0..self.n_struct).map(|j| self.value(j)).collect()
    }

    pub(crate) fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot { basis: self.basis.clone(), at_upper: self.at_upper.clone() }
    }

    pub(crate) fn restore(&mut self, snap: &BasisSnapshot) -> Result<(), LpError> {
        self.basis = snap.basis.clone();
        self.at_upper = snap.at_upper.clone();
        // Snapshots never contain artificials beyond the current column set.
        self.at_upper.resize(self.ncols(), false);
        self.pos_in_basis = vec![-1; self.ncols()];
        for (p, &c) in self.basis.iter().enumerate() {
            self.pos_in_basis[c] = p as i64;
        }
        self.refactor()?;
        Ok(())
    }

    // --- factorization ------------------------------------------------------

    fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let t = v[eta.pivot_row] / eta.pivot_val;
            if t != 0.0 {
                for &(i, w) in &eta.entries {
                    v[i] -= w * t;
                }
            }
            v[eta.pivot_row] = t;
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.pivot_row];
            for &(i, w) in &eta.entries {
                s -= w * v[i];
            }
            v[eta.pivot_row] = s / eta.pivot_val;
        }
    }

    fn scatter_col(&self, j: usize, v: &mut [f64]) {
        v.iter_mut().for_each(|x| *x = 0.0);
        for &(i, a) in &self.cols[j] {
            v[i] = a;
        }
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, a)| a * v[i]).sum()
    }

    /// Rebuild the eta file from the current basis.
    ///
    /// The factorization pairs every basic column with a pivot row; the
    /// basis array is then reordered so that position `p` is exactly the
    /// column pivoted at coordinate `p`, which is the invariant every other
    /// routine (including the incremental eta appends) relies on. `xb` is
    /// stale after this call and must be recomputed.
    fn refactor(&mut self) -> Result<(), LpError> {
        self.etas.clear();
        let mut row_used = vec![false; self.m];
        let mut assigned: Vec<(usize, usize)> = Vec::with_capacity(self.m); // (col, row)
        let mut multi: Vec<usize> = Vec::new();
        for &c in &self.basis {
            if self.cols[c].len() == 1 {
                let (r, a) = self.cols[c][0];
                if row_used[r] {
                    return Err(LpError::SingularBasis);
                }
                row_used[r] = true;
                assigned.push((c, r));
                if a != 1.0 {
                    self.etas.push(Eta { pivot_row: r, pivot_val: a, entries: Vec::new() });
                }
            } else {
                multi.push(c);
            }
        }
        multi.sort_by_key(|&c| (self.cols[c].len(), c));
        let mut work = vec![0.0; self.m];
        for c in multi {
            self.scatter_col(c, &mut work);
            self.ftran(&mut work);
            let mut best: Option<(f64, usize)> = None;
            for (r, used) in row_used.iter().enumerate() {
                if !used {
                    let a = work[r].abs();
                    if a > ZERO_TOL && best.map_or(true, |(ba, _)| a > ba) {
                        best = Some((a, r));
                    }
                }
            }
            let Some((_, r)) = best else {
                return Err(LpError::SingularBasis);
            };
            row_used[r] = true;
            assigned.push((c, r));
            let entries: Vec<(usize, f64)> = work
                .iter()
                .enumerate()
                .filter(|&(i, &w)| i != r && w.abs() > ZERO_TOL)
                .map(|(i, &w)| (i, w))
                .collect();
            self.etas.push(Eta { pivot_row: r, pivot_val: work[r], entries });
        }
        for &(c, r) in &assigned {
            self.basis[r] = c;
            self.pos_in_basis[c] = r as i64;
        }
        Ok(())
    }

    pub(crate) fn recompute_xb(&mut self) {
        let mut v = self.b.clone();
        for j in 0..self.ncols() {
            if self.pos_in_basis[j] >= 0 {
                continue;
            }
            let val = self.nb_val(j);
            if val != 0.0 {
                for &(i, a) in &self.cols[j] {
                    v[i] -= a * val;
                }
            }
        }
        self.ftran(&mut v);
        self.xb = v;
    }

    fn append_eta(&mut self, pivot_row: usize, w: &[f64]) -> Result<(), LpError> {
        if !w[pivot_row].is_finite() || w[pivot_row].abs() < PIVOT_TOL {
            return Err(LpError::UnstablePivot);
        }
        let entries: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &x)| i != pivot_row && x.abs() > ZERO_TOL)
            .map(|(i, &x)| (i, x))
            .collect();
        self.etas.push(Eta { pivot_row, pivot_val: w[pivot_row], entries });
        if self.etas.len() > REFACTOR_EVERY {
            self.refactor()?;
            self.recompute_xb();
        }
        Ok(())
    }

    // --- primal simplex -----------------------------------------------------

    fn reduced_costs_vector(&self, work: &mut [f64]) {
        // work <- y with y'B = c_B'
        work.iter_mut().for_each(|x| *x = 0.0);
        for (p, &c) in self.basis.iter().enumerate() {
            work[p] = self.cost[c];
        }
        self.btran(work);
    }

    fn primal(&mut self) -> Result<LpStatus, LpError> {
        let mut y = vec![0.0; self.m];
        let mut w = vec![0.0; self.m];
        loop {
            self.iterations += 1;
            if self.iterations > self.pivot_cap {
                if std::env::var("MIBLP_LP_DEBUG").is_ok() {
                    eprintln!("PRIMAL cap: m {} ncols {} obj {} bland {} degen {}",
                        self.m, self.ncols(), self.objective_value(), self.bland, self.degenerate_streak);
                    self.debug_dump("/tmp/lp_dump.json");
                }
                return Err(LpError::PivotLimit);
            }
            self.reduced_costs_vector(&mut y);

            // entering variable
            let mut entering: Option<(f64, usize, f64)> = None; // (score, col, direction)
            for j in 0..self.ncols() {
                if self.pos_in_basis[j] >= 0 || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = self.cost[j] - self.col_dot(j, &y);
                let cand = if !self.at_upper[j] && d < -DUAL_TOL {
                    Some((-d, 1.0))
                } else if self.at_upper[j] && d > DUAL_TOL {
                    Some((d, -1.0))
                } else {
                    None
                };
                if let Some((score, dir)) = cand {
                    if self.bland {
                        entering = Some((score, j, dir));
                        break;
                    }
                    if entering.map_or(true, |(s, _, _)| score > s) {
                        entering = Some((score, j, dir));
                    }
                }
            }
            let Some((_, q, sigma)) = entering else {
                return Ok(LpStatus::Optimal);
            };

            self.scatter_col(q, &mut w);
            self.ftran(&mut w);

            // ratio test: largest step t >= 0 keeping basics in bounds.
            // First pass finds the binding step, second pass picks the
            // leaving row among ties: largest pivot normally, lowest variable
            // index under Bland's rule.
            let flip_limit = self.hi[q] - self.lo[q];
            let ratio_of = |pos: usize, w: &[f64]| -> Option<(f64, bool)> {
                let wi = w[pos];
                if wi.abs() <= PIVOT_TOL {
                    return None;
                }
                let bc = self.basis[pos];
                let delta = -sigma * wi;
                let (room, to_upper) = if delta < 0.0 {
                    ((self.xb[pos] - self.lo[bc]).max(0.0), false)
                } else {
                    let room = self.hi[bc] - self.xb[pos];
                    if !room.is_finite() {
                        return None;
                    }
                    (room.max(0.0), true)
                };
                Some((room / delta.abs(), to_upper))
            };
            let mut t_best = f64::INFINITY;
            for pos in 0..self.m {
                if let Some((ratio, _)) = ratio_of(pos, &w) {
                    t_best = t_best.min(ratio);
                }
            }
            let mut leave: Option<(usize, bool)> = None;
            let mut best_key = f64::NEG_INFINITY;
            for pos in 0..self.m {
                if let Some((ratio, to_upper)) = ratio_of(pos, &w) {
                    if ratio > t_best + 1e-9 {
                        continue;
                    }
                    if self.bland {
                        if leave.map_or(true, |(lpos, _)| self.basis[pos] < self.basis[lpos]) {
                            leave = Some((pos, to_upper));
                        }
                    } else if w[pos].abs() > best_key {
                        best_key = w[pos].abs();
                        leave = Some((pos, to_upper));
                    }
                }
            }

            if flip_limit <= t_best {
                if !flip_limit.is_finite() {
                    return Ok(LpStatus::Unbounded);
                }
                // bound flip, no basis change
                for pos in 0..self.m {
                    self.xb[pos] -= sigma * flip_limit * w[pos];
                }
                self.at_upper[q] = !self.at_upper[q];
                self.note_step(flip_limit);
                continue;
            }
            let Some((p, to_upper)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            if !w[p].is_finite() || w[p].abs() < PIVOT_TOL {
                return Err(LpError::UnstablePivot);
            }
            let t = t_best;
            for pos in 0..self.m {
                self.xb[pos] -= sigma * t * w[pos];
            }
            let entering_value = self.nb_val(q) + sigma * t;
            let leaving = self.basis[p];
            self.at_upper[leaving] = to_upper;
            self.pos_in_basis[leaving] = -1;
            self.basis[p] = q;
            self.pos_in_basis[q] = p as i64;
            self.xb[p] = entering_value;
            self.append_eta(p, &w)?;
            self.note_step(t);
        }
    }

    fn note_step(&mut self, t: f64) {
        if t.abs() <= 1e-10 {
            self.degenerate_streak += 1;
            if self.degenerate_streak > BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
        }
    }

    // --- dual simplex ---------------------------------------------------------

    /// Reoptimize from a dual-feasible basis after bound changes.
    pub(crate) fn dual(&mut self, budget: u64) -> Result<LpStatus, LpError> {
        let cap = self.pivot_cap.min(budget);
        let mut y = vec![0.0; self.m];
        let mut rho = vec![0.0; self.m];
        let mut w = vec![0.0; self.m];
        loop {
            self.iterations += 1;
            if self.iterations > cap {
                if std::env::var("MIBLP_LP_DEBUG").is_ok() {
                    eprintln!("DUAL cap: m {} ncols {} obj {} bland {} infeas {}",
                        self.m, self.ncols(), self.objective_value(), self.bland, self.primal_infeasibility());
                }
                return Err(LpError::PivotLimit);
            }

            // leaving: most infeasible basic (lowest variable index under
            // Bland's rule)
            let mut leave: Option<(f64, usize, bool)> = None; // (violation, pos, to_lower)
            for pos in 0..self.m {
                let bc = self.basis[pos];
                let v = self.xb[pos];
                let cand = if v < self.lo[bc] - self.feas_tol {
                    Some((self.lo[bc] - v, true))
                } else if v > self.hi[bc] + self.feas_tol {
                    Some((v - self.hi[bc], false))
                } else {
                    None
                };
                if let Some((viol, to_lower)) = cand {
                    let take = match leave {
                        None => true,
                        Some((bv, bpos, _)) => {
                            if self.bland {
                                self.basis[pos] < self.basis[bpos]
                            } else {
                                viol > bv
                            }
                        }
                    };
                    if take {
                        leave = Some((viol, pos, to_lower));
                    }
                }
            }
            let Some((_, p, to_lower)) = leave else {
                return Ok(LpStatus::Optimal);
            };

            rho.iter_mut().for_each(|x| *x = 0.0);
            rho[p] = 1.0;
            self.btran(&mut rho);
            self.reduced_costs_vector(&mut y);

            // entering: min dual ratio; ties by largest pivot, or lowest
            // index under Bland's rule
            let eligible_alpha = |j: usize, alpha: f64| -> bool {
                let sigma = if self.at_upper[j] { -1.0 } else { 1.0 };
                let s = sigma * alpha;
                if to_lower {
                    s < 0.0
                } else {
                    s > 0.0
                }
            };
            let mut ratio_best = f64::INFINITY;
            let mut alphas: Vec<(usize, f64, f64)> = Vec::new(); // (col, alpha, ratio)
            for j in 0..self.ncols() {
                if self.pos_in_basis[j] >= 0 || self.lo[j] == self.hi[j] {
                    continue;
                }
                let alpha = self.col_dot(j, &rho);
                if alpha.abs() <= PIVOT_TOL || !eligible_alpha(j, alpha) {
                    continue;
                }
                let sigma = if self.at_upper[j] { -1.0 } else { 1.0 };
                let d = self.cost[j] - self.col_dot(j, &y);
                let ratio = (sigma * d).max(0.0) / alpha.abs();
                ratio_best = ratio_best.min(ratio);
                alphas.push((j, alpha, ratio));
            }
            let mut entering: Option<(usize, f64)> = None;
            let mut best_key = f64::NEG_INFINITY;
            for &(j, alpha, ratio) in &alphas {
                if ratio > ratio_best + 1e-9 {
                    continue;
                }
                if self.bland {
                    if entering.is_none() {
                        entering = Some((j, alpha));
                    }
                } else if alpha.abs() > best_key {
                    best_key = alpha.abs();
                    entering = Some((j, alpha));
                }
            }
            let Some((q, alpha_q)) = entering else {
                return Ok(LpStatus::Infeasible);
            };

            self.scatter_col(q, &mut w);
            self.ftran(&mut w);
            // the BTRAN-computed alpha and the FTRAN direction must agree;
            // a large discrepancy means the factorization has degraded
            if !w[p].is_finite() || w[p].abs() < PIVOT_TOL || (w[p] - alpha_q).abs() > 1e-6 * (1.0 + alpha_q.abs()) {
                return Err(LpError::UnstablePivot);
            }
            let target = if to_lower { self.lo[self.basis[p]] } else { self.hi[self.basis[p]] };
            let delta_q = (self.xb[p] - target) / w[p];
            for pos in 0..self.m {
                self.xb[pos] -= delta_q * w[pos];
            }
            let entering_value = self.nb_val(q) + delta_q;
            let leaving = self.basis[p];
            self.at_upper[leaving] = !to_lower;
            self.pos_in_basis[leaving] = -1;
            self.basis[p] = q;
            self.pos_in_basis[q] = p as i64;
            self.xb[p] = entering_value;
            self.append_eta(p, &w)?;
            self.note_step(ratio_best);
        }
    }

    // --- driver ---------------------------------------------------------------

    /// Full solve from the slack basis: phase 1 with artificials where the
    /// slack start is infeasible, then phase 2 with the real objective.
    ///
    /// Artificial columns are created once per row and kept for the lifetime
    /// of the engine (pinned to `[0, 0]` outside phase 1), so basis snapshots
    /// taken earlier remain valid across fresh solves.
    pub(crate) fn solve_fresh(&mut self) -> Result<LpStatus, LpError> {
        self.bland = false;
        self.degenerate_streak = 0;
        self.iterations = 0;

        // pin any artificials left over from earlier solves
        for row in 0..self.m {
            if let Some(a) = self.art_for_row[row] {
                self.lo[a] = 0.0;
                self.hi[a] = 0.0;
            }
        }

        self.basis = (0..self.m).map(|i| self.n_struct + i).collect();
        self.pos_in_basis = vec![-1; self.ncols()];
        for (p, &c) in self.basis.iter().enumerate() {
            self.pos_in_basis[c] = p as i64;
        }
        self.at_upper = vec![false; self.ncols()];
        self.etas.clear();
        self.recompute_xb();

        let mut artificials = Vec::new();
        for pos in 0..self.m {
            if self.xb[pos] < -self.feas_tol {
                let art = match self.art_for_row[pos] {
                    Some(a) => a,
                    None => {
                        let a = self.cols.len();
                        self.cols.push(vec![(pos, -1.0)]);
                        self.lo.push(0.0);
                        self.hi.push(f64::INFINITY);
                        self.real_cost.push(0.0);
                        self.at_upper.push(false);
                        self.pos_in_basis.push(-1);
                        self.art_for_row[pos] = Some(a);
                        a
                    }
                };
                self.lo[art] = 0.0;
                self.hi[art] = f64::INFINITY;
                // slack leaves, artificial enters with positive value
                let slack = self.basis[pos];
                self.pos_in_basis[slack] = -1;
                self.at_upper[slack] = false;
                self.basis[pos] = art;
                self.pos_in_basis[art] = pos as i64;
                self.xb[pos] = -self.xb[pos];
                artificials.push(art);
            }
        }

        if !artificials.is_empty() {
            self.refactor()?;
            self.recompute_xb();
            self.cost = vec![0.0; self.cols.len()];
            for &a in &artificials {
                self.cost[a] = 1.0;
            }
            let status = self.primal();
            let infeas: f64 = artificials.iter().map(|&a| self.value(a).max(0.0)).sum();
            // Pin on every exit path: an artificial left free would silently
            // relax its row in later warm-started solves.
            for &a in &artificials {
                self.lo[a] = 0.0;
                self.hi[a] = 0.0;
            }
            let status = status?;
            if status != LpStatus::Optimal || infeas > self.feas_tol * 10.0 {
                return Ok(LpStatus::Infeasible);
            }
        }

        self.cost = self.real_cost.clone();
        self.bland = false;
        self.degenerate_streak = 0;
        self.primal()
    }

    /// Warm reoptimization after bound changes, from a restored basis.
    pub(crate) fn resolve_from_basis(&mut self) -> Result<LpStatus, LpError> {
        self.cost = self.real_cost.clone();
        self.bland = false;
        self.degenerate_streak = 0;
        self.iterations = 0;
        for row in 0..self.m {
            if let Some(a) = self.art_for_row[row] {
                self.lo[a] = 0.0;
                self.hi[a] = 0.0;
            }
        }
        self.recompute_xb();
        // a warm start that needs this many pivots is better replaced by a
        // scratch solve; the caller falls back on the budget error
        let budget = 2_000 + 10 * self.m as u64;
        self.dual(budget)
    }

    #[allow(dead_code)]
    pub(crate) fn debug_dump(&self, path: &str) {
        let mut obj = serde_json::Map::new();
        obj.insert("m".into(), self.m.into());
        obj.insert("n_struct".into(), self.n_struct.into());
        obj.insert("cols".into(), serde_json::json!(self.cols));
        obj.insert("lo".into(), serde_json::json!(self.lo.iter().map(|v| if v.is_finite() { *v } else { -1e308 }).collect::<Vec<_>>()));
        obj.insert("hi".into(), serde_json::json!(self.hi.iter().map(|v| if v.is_finite() { *v } else { 1e308 }).collect::<Vec<_>>()));
        obj.insert("cost".into(), serde_json::json!(self.cost));
        obj.insert("real_cost".into(), serde_json::json!(self.real_cost));
        obj.insert("b".into(), serde_json::json!(self.b));
        std::fs::write(path, serde_json::Value::Object(obj).to_string()).ok();
    }

    /// Max bound violation over basic variables, for post-solve verification.
    pub(crate) fn primal_infeasibility(&self) -> f64 {
        (0..self.m)
            .map(|pos| {
                let bc = self.basis[pos];
                (self.lo[bc] - self.xb[pos]).max(self.xb[pos] - self.hi[bc]).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}
