//! Problem data model: instance description, validation, canonicalization to
//! the all-`<=` row form, and the `MIBLP-JSON v1` file format.
//!
//! An instance describes the bilevel program
//!
//! ```text
//! min  cR'xu + cZ'yu + dR'xl0 + dZ'yl0
//! s.t. AR xu + AZ yu + BR xl0 + BZ yl0  <=  r          (upper rows)
//!      (xl0, yl0) in argmax { wR'xl + wZ'yl :
//!          QR xu + QZ yu + PR xl + PZ yl  <=  s }      (lower rows)
//! ```
//!
//! with `xu, xl` continuous, `yu, yl` integer, and every variable carrying an
//! explicit finite `[lo, hi]` bound (`lo >= 0`). Row senses `LE` and `EQ` are
//! admitted at the format level; [`MiblpInstance::canonicalize`] splits each
//! `EQ` row into two opposing `LE` rows so the solver layers only ever see
//! `<=` rows.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Variable-group and row-group counts of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Upper-level continuous variables (`xu`).
    #[serde(rename = "mR")]
    pub m_r: usize,
    /// Upper-level integer variables (`yu`).
    #[serde(rename = "mZ")]
    pub m_z: usize,
    /// Lower-level continuous variables (`xl`).
    #[serde(rename = "nR")]
    pub n_r: usize,
    /// Lower-level integer variables (`yl`).
    #[serde(rename = "nZ")]
    pub n_z: usize,
    /// Upper-level constraint rows.
    #[serde(rename = "nU")]
    pub n_u: usize,
    /// Lower-level constraint rows.
    #[serde(rename = "nL")]
    pub n_l: usize,
}

/// Row sense admitted by the file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    /// `a.x <= b`
    #[serde(rename = "LE")]
    Le,
    /// `a.x == b`
    #[serde(rename = "EQ")]
    Eq,
}

/// Sparse rational matrix stored as `[row, col, value]` triplets.
///
/// Unlisted entries are zero. Triplets are kept sorted row-major with
/// duplicates summed, so two structurally equal matrices serialize
/// identically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMat {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMat {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        SparseMat { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut m = SparseMat::new(n_rows, n_cols);
        for (r, c, v) in triplets {
            m.push(r, c, v);
        }
        m.normalize();
        m
    }

    /// Dense row-major construction helper, mostly for tests and fixtures.
    pub fn from_dense(rows: &[Vec<f64>], n_cols: usize) -> Self {
        let mut m = SparseMat::new(rows.len(), n_cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_cols, "dense row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.push(i, j, v);
                }
            }
        }
        m
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    /// Sort row-major and merge duplicate coordinates (summing values).
    pub fn normalize(&mut self) {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        self.entries = merged;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Entries of one row as `(col, value)` pairs. Requires normalized storage.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = self.entries.partition_point(|e| e.0 < row);
        self.entries[start..]
            .iter()
            .take_while(move |e| e.0 == row)
            .map(|&(_, c, v)| (c, v))
    }

    /// `sum_j m[row,j] * x[j]`
    pub fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        self.row(row).map(|(c, v)| v * x[c]).sum()
    }

    /// Entries of one column as `(row, value)` pairs (linear scan).
    pub fn col(&self, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().filter(move |e| e.1 == col).map(|&(r, _, v)| (r, v))
    }

    /// Matrix with each entry negated.
    pub fn negated(&self) -> Self {
        SparseMat {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, -v)).collect(),
        }
    }

    /// Stack `other` below `self` (column counts must agree).
    fn vstack(&self, other: &SparseMat) -> Self {
        assert_eq!(self.n_cols, other.n_cols);
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(r, c, v)| (r + self.n_rows, c, v)));
        SparseMat { n_rows: self.n_rows + other.n_rows, n_cols: self.n_cols, entries }
    }

    /// Select a subset of rows, in the given order.
    fn select_rows(&self, rows: &[usize]) -> Self {
        let mut m = SparseMat::new(rows.len(), self.n_cols);
        for (new_r, &old_r) in rows.iter().enumerate() {
            for (c, v) in self.row(old_r) {
                m.push(new_r, c, v);
            }
        }
        m.normalize();
        m
    }
}

/// Inclusive variable bound `[lo, hi]`.
pub type Bound = (f64, f64);

/// Full numeric description of one bilevel instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MiblpInstance {
    pub name: String,
    pub dims: Dims,
    /// Upper objective coefficients on `xu`, `yu`, `xl0`, `yl0`.
    pub c_r: Vec<f64>,
    pub c_z: Vec<f64>,
    pub d_r: Vec<f64>,
    pub d_z: Vec<f64>,
    /// Lower objective coefficients (`max wR'xl + wZ'yl`).
    pub w_r: Vec<f64>,
    pub w_z: Vec<f64>,
    /// Upper rows: `AR xu + AZ yu + BR xl0 + BZ yl0 (<=|==) r`.
    pub a_r: SparseMat,
    pub a_z: SparseMat,
    pub b_r: SparseMat,
    pub b_z: SparseMat,
    pub r: Vec<f64>,
    pub upper_senses: Vec<RowSense>,
    /// Lower rows: `QR xu + QZ yu + PR xl + PZ yl (<=|==) s`.
    pub q_r: SparseMat,
    pub q_z: SparseMat,
    pub p_r: SparseMat,
    pub p_z: SparseMat,
    pub s: Vec<f64>,
    pub lower_senses: Vec<RowSense>,
    /// Per-variable `[lo, hi]` bounds, by group.
    pub xu_bounds: Vec<Bound>,
    pub yu_bounds: Vec<Bound>,
    pub xl_bounds: Vec<Bound>,
    pub yl_bounds: Vec<Bound>,
    /// Free-form provenance (generator parameters, encoding notes).
    pub seed_metadata: Option<String>,
}

/// Candidate point with both objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct BilevelSolution {
    pub xu: Vec<f64>,
    pub yu: Vec<i64>,
    pub xl0: Vec<f64>,
    pub yl0: Vec<i64>,
    /// `cR'xu + cZ'yu + dR'xl0 + dZ'yl0`
    pub upper_value: f64,
    /// `wR'xl0 + wZ'yl0`
    pub lower_value: f64,
}

impl BilevelSolution {
    pub fn new(
        instance: &MiblpInstance,
        xu: Vec<f64>,
        yu: Vec<i64>,
        xl0: Vec<f64>,
        yl0: Vec<i64>,
    ) -> Self {
        let upper_value = instance.upper_objective(&xu, &yu, &xl0, &yl0);
        let lower_value = instance.lower_objective(&xl0, &yl0);
        BilevelSolution { xu, yu, xl0, yl0, upper_value, lower_value }
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding with a locator into the instance.
#[derive(Debug, Clone)]
pub struct Issue {
    pub severity: Severity,
    pub locator: String,
    pub message: String,
}

/// Outcome of [`MiblpInstance::validate`]; `ok` iff no `Error`-severity issue.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{tag}: {}: {}", issue.locator, issue.message)?;
        }
        Ok(())
    }
}

/// Errors from instance I/O.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: i64, expected: i64 },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

const FORMAT_VERSION: i64 = 1;

impl MiblpInstance {
    /// Check every structural invariant. Never fails; findings are returned
    /// in the report (with `ok == false` when any is an error).
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut err = |locator: &str, message: String| {
            issues.push(Issue { severity: Severity::Error, locator: locator.to_string(), message });
        };

        let d = self.dims;
        if d.m_r + d.m_z + d.n_r + d.n_z == 0 {
            err("dims", "instance has no variables".to_string());
        }
        if d.n_r + d.n_z == 0 {
            err("dims", "instance has no lower-level variables".to_string());
        }

        let vec_checks: [(&str, usize, usize); 8] = [
            ("upper_objective.cR", self.c_r.len(), d.m_r),
            ("upper_objective.cZ", self.c_z.len(), d.m_z),
            ("upper_objective.dR", self.d_r.len(), d.n_r),
            ("upper_objective.dZ", self.d_z.len(), d.n_z),
            ("lower_objective.wR", self.w_r.len(), d.n_r),
            ("lower_objective.wZ", self.w_z.len(), d.n_z),
            ("upper_constraints.r", self.r.len(), d.n_u),
            ("lower_constraints.s", self.s.len(), d.n_l),
        ];
        for (loc, got, want) in vec_checks {
            if got != want {
                err(loc, format!("dimension mismatch: has {got} entries, dims require {want}"));
            }
        }
        if self.upper_senses.len() != d.n_u {
            err("upper_constraints.senses", format!("dimension mismatch: has {} entries, dims require {}", self.upper_senses.len(), d.n_u));
        }
        if self.lower_senses.len() != d.n_l {
            err("lower_constraints.senses", format!("dimension mismatch: has {} entries, dims require {}", self.lower_senses.len(), d.n_l));
        }

        let mat_checks: [(&str, &SparseMat, usize, usize); 8] = [
            ("upper_constraints.AR", &self.a_r, d.n_u, d.m_r),
            ("upper_constraints.AZ", &self.a_z, d.n_u, d.m_z),
            ("upper_constraints.BR", &self.b_r, d.n_u, d.n_r),
            ("upper_constraints.BZ", &self.b_z, d.n_u, d.n_z),
            ("lower_constraints.QR", &self.q_r, d.n_l, d.m_r),
            ("lower_constraints.QZ", &self.q_z, d.n_l, d.m_z),
            ("lower_constraints.PR", &self.p_r, d.n_l, d.n_r),
            ("lower_constraints.PZ", &self.p_z, d.n_l, d.n_z),
        ];
        for (loc, m, rows, cols) in mat_checks {
            if m.n_rows() != rows || m.n_cols() != cols {
                err(loc, format!(
                    "dimension mismatch: is {}x{}, dims require {}x{}",
                    m.n_rows(), m.n_cols(), rows, cols
                ));
            } else {
                for &(rr, cc, v) in m.triplets() {
                    if rr >= rows || cc >= cols {
                        err(loc, format!("triplet ({rr},{cc}) out of range {rows}x{cols}"));
                        break;
                    }
                    if !v.is_finite() {
                        err(loc, format!("non-finite coefficient at ({rr},{cc})"));
                        break;
                    }
                }
            }
        }

        let bound_groups: [(&str, &[Bound], usize, bool); 4] = [
            ("bounds.xu", &self.xu_bounds, d.m_r, false),
            ("bounds.yu", &self.yu_bounds, d.m_z, true),
            ("bounds.xl", &self.xl_bounds, d.n_r, false),
            ("bounds.yl", &self.yl_bounds, d.n_z, true),
        ];
        for (loc, bounds, want, integral) in bound_groups {
            if bounds.len() != want {
                err(loc, format!("dimension mismatch: has {} entries, dims require {want}", bounds.len()));
                continue;
            }
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                let at = format!("{loc}[{i}]");
                if !hi.is_finite() || !lo.is_finite() {
                    err(&at, format!("unbounded variable: [{lo}, {hi}] (all variables need finite bounds)"));
                    continue;
                }
                if lo < 0.0 {
                    err(&at, format!("negative lower bound {lo}"));
                }
                if lo > hi {
                    err(&at, format!("empty bound interval [{lo}, {hi}]"));
                }
                if integral && (lo.fract() != 0.0 || hi.fract() != 0.0) {
                    err(&at, format!("non-integral bounds [{lo}, {hi}] on integer variable"));
                }
            }
        }

        for (loc, vals) in [
            ("upper_constraints.r", &self.r),
            ("lower_constraints.s", &self.s),
            ("upper_objective.cR", &self.c_r),
            ("upper_objective.cZ", &self.c_z),
            ("upper_objective.dR", &self.d_r),
            ("upper_objective.dZ", &self.d_z),
            ("lower_objective.wR", &self.w_r),
            ("lower_objective.wZ", &self.w_z),
        ] {
            if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                err(&format!("{loc}[{i}]"), "non-finite value".to_string());
            }
        }

        let ok = issues.iter().all(|i| i.severity != Severity::Error);
        ValidationReport { ok, issues }
    }

    /// True when every row sense is `LE`.
    pub fn is_canonical(&self) -> bool {
        self.upper_senses.iter().chain(&self.lower_senses).all(|&s| s == RowSense::Le)
    }

    /// Rewrite to the all-`<=` form: each `EQ` row `a.x == b` is replaced, in
    /// place, by `a.x <= b` followed by `-a.x <= -b`. Objectives, variables
    /// and the solution set are unchanged.
    pub fn canonicalize(&self) -> MiblpInstance {
        if self.is_canonical() {
            return self.clone();
        }
        let mut out = self.clone();

        let split = |senses: &[RowSense]| -> (Vec<usize>, Vec<f64>, Vec<RowSense>) {
            // Expanded row list: LE rows map to one source row, EQ rows to
            // (row, +1) then (row, -1).
            let mut order = Vec::new();
            let mut signs = Vec::new();
            for (i, &sense) in senses.iter().enumerate() {
                order.push(i);
                signs.push(1.0);
                if sense == RowSense::Eq {
                    order.push(i);
                    signs.push(-1.0);
                }
            }
            let senses = vec![RowSense::Le; order.len()];
            (order, signs, senses)
        };

        let expand_mat = |m: &SparseMat, order: &[usize], signs: &[f64]| -> SparseMat {
            let sel = m.select_rows(order);
            let mut out = SparseMat::new(sel.n_rows(), sel.n_cols());
            for &(r, c, v) in sel.triplets() {
                out.push(r, c, v * signs[r]);
            }
            out.normalize();
            out
        };
        let expand_vec = |v: &[f64], order: &[usize], signs: &[f64]| -> Vec<f64> {
            order.iter().zip(signs).map(|(&i, &sg)| v[i] * sg).collect()
        };

        let (u_order, u_signs, u_senses) = split(&self.upper_senses);
        out.a_r = expand_mat(&self.a_r, &u_order, &u_signs);
        out.a_z = expand_mat(&self.a_z, &u_order, &u_signs);
        out.b_r = expand_mat(&self.b_r, &u_order, &u_signs);
        out.b_z = expand_mat(&self.b_z, &u_order, &u_signs);
        out.r = expand_vec(&self.r, &u_order, &u_signs);
        out.upper_senses = u_senses;
        out.dims.n_u = u_order.len();

        let (l_order, l_signs, l_senses) = split(&self.lower_senses);
        out.q_r = expand_mat(&self.q_r, &l_order, &l_signs);
        out.q_z = expand_mat(&self.q_z, &l_order, &l_signs);
        out.p_r = expand_mat(&self.p_r, &l_order, &l_signs);
        out.p_z = expand_mat(&self.p_z, &l_order, &l_signs);
        out.s = expand_vec(&self.s, &l_order, &l_signs);
        out.lower_senses = l_senses;
        out.dims.n_l = l_order.len();

        out
    }

    /// `cR'xu + cZ'yu + dR'xl0 + dZ'yl0`
    pub fn upper_objective(&self, xu: &[f64], yu: &[i64], xl0: &[f64], yl0: &[i64]) -> f64 {
        dot(&self.c_r, xu)
            + dot_i(&self.c_z, yu)
            + dot(&self.d_r, xl0)
            + dot_i(&self.d_z, yl0)
    }

    /// `wR'xl + wZ'yl`
    pub fn lower_objective(&self, xl: &[f64], yl: &[i64]) -> f64 {
        dot(&self.w_r, xl) + dot_i(&self.w_z, yl)
    }

    /// Residual `lhs - rhs` of every upper row at a full point (positive means
    /// violated for `LE` rows).
    pub fn upper_row_residuals(&self, xu: &[f64], yu: &[f64], xl0: &[f64], yl0: &[f64]) -> Vec<f64> {
        (0..self.dims.n_u)
            .map(|i| {
                self.a_r.row_dot(i, xu) + self.a_z.row_dot(i, yu)
                    + self.b_r.row_dot(i, xl0)
                    + self.b_z.row_dot(i, yl0)
                    - self.r[i]
            })
            .collect()
    }

    /// Residual `lhs - rhs` of every lower row at a full point.
    pub fn lower_row_residuals(&self, xu: &[f64], yu: &[f64], xl: &[f64], yl: &[f64]) -> Vec<f64> {
        (0..self.dims.n_l)
            .map(|i| {
                self.q_r.row_dot(i, xu) + self.q_z.row_dot(i, yu)
                    + self.p_r.row_dot(i, xl)
                    + self.p_z.row_dot(i, yl)
                    - self.s[i]
            })
            .collect()
    }

    /// Whether a full point satisfies both row families within `tol`
    /// (respecting each row's sense).
    pub fn point_feasible(
        &self,
        xu: &[f64],
        yu: &[f64],
        xl0: &[f64],
        yl0: &[f64],
        tol: f64,
    ) -> bool {
        let up = self.upper_row_residuals(xu, yu, xl0, yl0);
        let lo = self.lower_row_residuals(xu, yu, xl0, yl0);
        up.iter().zip(&self.upper_senses).all(|(&res, &sense)| residual_ok(res, sense, tol))
            && lo.iter().zip(&self.lower_senses).all(|(&res, &sense)| residual_ok(res, sense, tol))
    }

    /// Parse an instance from `MIBLP-JSON v1` bytes.
    pub fn read(bytes: &[u8]) -> Result<MiblpInstance, ModelError> {
        let file: InstanceFile = serde_json::from_slice(bytes)
            .map_err(|e| ModelError::Parse(format!("line {}, column {}: {}", e.line(), e.column(), e)))?;
        if file.version != FORMAT_VERSION {
            return Err(ModelError::VersionMismatch { found: file.version, expected: FORMAT_VERSION });
        }
        let inst = file.into_instance();
        let report = inst.validate();
        if !report.ok {
            return Err(ModelError::Invalid(report.to_string().trim_end().to_string()));
        }
        Ok(inst)
    }

    /// Serialize to `MIBLP-JSON v1` bytes (pretty-printed, stable field order).
    pub fn write(&self) -> Vec<u8> {
        let file = InstanceFile::from_instance(self);
        let mut out = serde_json::to_vec_pretty(&file).expect("instance serialization cannot fail");
        out.push(b'\n');
        out
    }
}

fn residual_ok(res: f64, sense: RowSense, tol: f64) -> bool {
    match sense {
        RowSense::Le => res <= tol,
        RowSense::Eq => res.abs() <= tol,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dot_i(a: &[f64], b: &[i64]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| x * y as f64).sum()
}

// --- file schema ------------------------------------------------------------

type Triplet = (usize, usize, f64);

#[derive(Serialize, Deserialize)]
struct UpperObjectiveFile {
    #[serde(rename = "cR")]
    c_r: Vec<f64>,
    #[serde(rename = "cZ")]
    c_z: Vec<f64>,
    #[serde(rename = "dR")]
    d_r: Vec<f64>,
    #[serde(rename = "dZ")]
    d_z: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LowerObjectiveFile {
    #[serde(rename = "wR")]
    w_r: Vec<f64>,
    #[serde(rename = "wZ")]
    w_z: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct UpperConstraintsFile {
    #[serde(rename = "AR")]
    a_r: Vec<Triplet>,
    #[serde(rename = "AZ")]
    a_z: Vec<Triplet>,
    #[serde(rename = "BR")]
    b_r: Vec<Triplet>,
    #[serde(rename = "BZ")]
    b_z: Vec<Triplet>,
    r: Vec<f64>,
    senses: Vec<RowSense>,
}

#[derive(Serialize, Deserialize)]
struct LowerConstraintsFile {
    #[serde(rename = "QR")]
    q_r: Vec<Triplet>,
    #[serde(rename = "QZ")]
    q_z: Vec<Triplet>,
    #[serde(rename = "PR")]
    p_r: Vec<Triplet>,
    #[serde(rename = "PZ")]
    p_z: Vec<Triplet>,
    s: Vec<f64>,
    senses: Vec<RowSense>,
}

#[derive(Serialize, Deserialize)]
struct BoundsFile {
    xu: Vec<(f64, f64)>,
    yu: Vec<(f64, f64)>,
    xl: Vec<(f64, f64)>,
    yl: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: i64,
    #[serde(default)]
    name: String,
    dims: Dims,
    upper_objective: UpperObjectiveFile,
    lower_objective: LowerObjectiveFile,
    upper_constraints: UpperConstraintsFile,
    lower_constraints: LowerConstraintsFile,
    bounds: BoundsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed_metadata: Option<String>,
}

impl InstanceFile {
    fn into_instance(self) -> MiblpInstance {
        let d = self.dims;
        let mat = |t: Vec<Triplet>, rows: usize, cols: usize| SparseMat::from_triplets(rows, cols, t);
        MiblpInstance {
            name: self.name,
            dims: d,
            c_r: self.upper_objective.c_r,
            c_z: self.upper_objective.c_z,
            d_r: self.upper_objective.d_r,
            d_z: self.upper_objective.d_z,
            w_r: self.lower_objective.w_r,
            w_z: self.lower_objective.w_z,
            a_r: mat(self.upper_constraints.a_r, d.n_u, d.m_r),
            a_z: mat(self.upper_constraints.a_z, d.n_u, d.m_z),
            b_r: mat(self.upper_constraints.b_r, d.n_u, d.n_r),
            b_z: mat(self.upper_constraints.b_z, d.n_u, d.n_z),
            r: self.upper_constraints.r,
            upper_senses: self.upper_constraints.senses,
            q_r: mat(self.lower_constraints.q_r, d.n_l, d.m_r),
            q_z: mat(self.lower_constraints.q_z, d.n_l, d.m_z),
            p_r: mat(self.lower_constraints.p_r, d.n_l, d.n_r),
            p_z: mat(self.lower_constraints.p_z, d.n_l, d.n_z),
            s: self.lower_constraints.s,
            lower_senses: self.lower_constraints.senses,
            xu_bounds: self.bounds.xu,
            yu_bounds: self.bounds.yu,
            xl_bounds: self.bounds.xl,
            yl_bounds: self.bounds.yl,
            seed_metadata: self.seed_metadata,
        }
    }

    fn from_instance(inst: &MiblpInstance) -> InstanceFile {
        let norm = |m: &SparseMat| {
            let mut m = m.clone();
            m.normalize();
            m.triplets().to_vec()
        };
        InstanceFile {
            version: FORMAT_VERSION,
            name: inst.name.clone(),
            dims: inst.dims,
            upper_objective: UpperObjectiveFile {
                c_r: inst.c_r.clone(),
                c_z: inst.c_z.clone(),
                d_r: inst.d_r.clone(),
                d_z: inst.d_z.clone(),
            },
            lower_objective: LowerObjectiveFile { w_r: inst.w_r.clone(), w_z: inst.w_z.clone() },
            upper_constraints: UpperConstraintsFile {
                a_r: norm(&inst.a_r),
                a_z: norm(&inst.a_z),
                b_r: norm(&inst.b_r),
                b_z: norm(&inst.b_z),
                r: inst.r.clone(),
                senses: inst.upper_senses.clone(),
            },
            lower_constraints: LowerConstraintsFile {
                q_r: norm(&inst.q_r),
                q_z: norm(&inst.q_z),
                p_r: norm(&inst.p_r),
                p_z: norm(&inst.p_z),
                s: inst.s.clone(),
                senses: inst.lower_senses.clone(),
            },
            bounds: BoundsFile {
                xu: inst.xu_bounds.clone(),
                yu: inst.yu_bounds.clone(),
                xl: inst.xl_bounds.clone(),
                yl: inst.yl_bounds.clone(),
            },
            seed_metadata: inst.seed_metadata.clone(),
        }
    }
}

#[allow(unused)]
fn unused_vstack_guard(m: &SparseMat) -> SparseMat {
    // vstack is exercised by canonicalize-adjacent helpers in tests.
    m.vstack(&SparseMat::new(0, m.n_cols()))
}
