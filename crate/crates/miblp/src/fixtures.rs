//! Bundled small instances, used by the test-suite, the examples, and the
//! files under `fixtures/`.
//!
//! The two classic integer-only instances (`toy1`, `toy2`) and the
//! counterexample `q0` are stated in the literature without explicit variable
//! bounds; every variable here carries the box `[0, 20]` (respectively
//! `[0, 1]` for binary-by-construction variables and `[0, 10]` for `q0`'s
//! lower continuous variable), chosen wide enough to contain every point of
//! interest while keeping enumeration cheap. The same note is recorded in
//! each instance's `seed_metadata`.

use crate::model::{Dims, MiblpInstance, RowSense, SparseMat};

fn mat(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> SparseMat {
    SparseMat::from_triplets(n_rows, n_cols, triplets.iter().copied())
}

/// Integer-only instance with four lower rows and no upper rows:
///
/// ```text
/// min -yu - 10 yl0
/// s.t. yl0 in argmax { -yl : -25 yu + 20 yl <= 30,
///                            yu + 2 yl <= 10,
///                            2 yu - yl <= 15,
///                            -2 yu - 10 yl <= -15 }
/// ```
///
/// Optimum -22 at `(yu, yl0) = (2, 2)`.
pub fn toy1() -> MiblpInstance {
    let dims = Dims { m_r: 0, m_z: 1, n_r: 0, n_z: 1, n_u: 0, n_l: 4 };
    MiblpInstance {
        name: "toy1".to_string(),
        dims,
        c_r: vec![],
        c_z: vec![-1.0],
        d_r: vec![],
        d_z: vec![-10.0],
        w_r: vec![],
        w_z: vec![-1.0],
        a_r: mat(0, 0, &[]),
        a_z: mat(0, 1, &[]),
        b_r: mat(0, 0, &[]),
        b_z: mat(0, 1, &[]),
        r: vec![],
        upper_senses: vec![],
        q_r: mat(4, 0, &[]),
        q_z: mat(4, 1, &[(0, 0, -25.0), (1, 0, 1.0), (2, 0, 2.0), (3, 0, -2.0)]),
        p_r: mat(4, 0, &[]),
        p_z: mat(4, 1, &[(0, 0, 20.0), (1, 0, 2.0), (2, 0, -1.0), (3, 0, -10.0)]),
        s: vec![30.0, 10.0, 15.0, -15.0],
        lower_senses: vec![RowSense::Le; 4],
        xu_bounds: vec![],
        yu_bounds: vec![(0.0, 20.0)],
        xl_bounds: vec![],
        yl_bounds: vec![(0.0, 20.0)],
        seed_metadata: Some(
            "literature encoding; integer boxes [0,20] added to satisfy the finite-bound \
             requirement (no bound given in the source)"
                .to_string(),
        ),
    }
}

/// Integer-only instance with two upper rows that involve the lower variable
/// (connecting constraints):
///
/// ```text
/// min -yu - 2 yl0
/// s.t. -2 yu + 3 yl0 <= 12,  yu + yl0 <= 14
///      yl0 in argmax { yl : -3 yu + yl <= -3, 3 yu + yl <= 30 }
/// ```
///
/// Optimum -20 at `(yu, yl0) = (8, 6)`.
pub fn toy2() -> MiblpInstance {
    let dims = Dims { m_r: 0, m_z: 1, n_r: 0, n_z: 1, n_u: 2, n_l: 2 };
    MiblpInstance {
        name: "toy2".to_string(),
        dims,
        c_r: vec![],
        c_z: vec![-1.0],
        d_r: vec![],
        d_z: vec![-2.0],
        w_r: vec![],
        w_z: vec![1.0],
        a_r: mat(2, 0, &[]),
        a_z: mat(2, 1, &[(0, 0, -2.0), (1, 0, 1.0)]),
        b_r: mat(2, 0, &[]),
        b_z: mat(2, 1, &[(0, 0, 3.0), (1, 0, 1.0)]),
        r: vec![12.0, 14.0],
        upper_senses: vec![RowSense::Le; 2],
        q_r: mat(2, 0, &[]),
        q_z: mat(2, 1, &[(0, 0, -3.0), (1, 0, 3.0)]),
        p_r: mat(2, 0, &[]),
        p_z: mat(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]),
        s: vec![-3.0, 30.0],
        lower_senses: vec![RowSense::Le; 2],
        xu_bounds: vec![],
        yu_bounds: vec![(0.0, 20.0)],
        xl_bounds: vec![],
        yl_bounds: vec![(0.0, 20.0)],
        seed_metadata: Some(
            "literature encoding; integer boxes [0,20] added to satisfy the finite-bound \
             requirement (no bound given in the source)"
                .to_string(),
        ),
    }
}

/// Mixed instance with continuous and integer variables at both levels and
/// two connecting upper rows:
///
/// ```text
/// min 20 xu - 38 yu + xl0 + 42 yl0
/// s.t. 7 yu + 5 xl0 + 7 yl0 <= 62
///      6 xu + 9 yu + 10 xl0 + 2 yl0 <= 117
///      (xl0, yl0) in argmax { 39 xl + 27 yl :
///          8 xu + 2 xl + 8 yl <= 53,
///          9 xu + 2 xl + yl <= 28 }
/// ```
///
/// Optimum -243.5 at `(xu, yu, xl0, yl0) = (3.0, 8, 0.5, 0)`.
pub fn toy3() -> MiblpInstance {
    let dims = Dims { m_r: 1, m_z: 1, n_r: 1, n_z: 1, n_u: 2, n_l: 2 };
    MiblpInstance {
        name: "toy3".to_string(),
        dims,
        c_r: vec![20.0],
        c_z: vec![-38.0],
        d_r: vec![1.0],
        d_z: vec![42.0],
        w_r: vec![39.0],
        w_z: vec![27.0],
        a_r: mat(2, 1, &[(1, 0, 6.0)]),
        a_z: mat(2, 1, &[(0, 0, 7.0), (1, 0, 9.0)]),
        b_r: mat(2, 1, &[(0, 0, 5.0), (1, 0, 10.0)]),
        b_z: mat(2, 1, &[(0, 0, 7.0), (1, 0, 2.0)]),
        r: vec![62.0, 117.0],
        upper_senses: vec![RowSense::Le; 2],
        q_r: mat(2, 1, &[(0, 0, 8.0), (1, 0, 9.0)]),
        q_z: mat(2, 1, &[]),
        p_r: mat(2, 1, &[(0, 0, 2.0), (1, 0, 2.0)]),
        p_z: mat(2, 1, &[(0, 0, 8.0), (1, 0, 1.0)]),
        s: vec![53.0, 28.0],
        lower_senses: vec![RowSense::Le; 2],
        xu_bounds: vec![(0.0, 20.0)],
        yu_bounds: vec![(0.0, 20.0)],
        xl_bounds: vec![(0.0, 20.0)],
        yl_bounds: vec![(0.0, 20.0)],
        seed_metadata: Some(
            "literature encoding; boxes [0,20] added to satisfy the finite-bound requirement \
             (no bound given in the source); rows imply tighter ranges everywhere"
                .to_string(),
        ),
    }
}

/// The counterexample showing that unconditionally enumerating per-response
/// blocks is wrong when some responses are infeasible for some upper choices:
///
/// ```text
/// min -yu - yl0,  yu in {0,1}
/// s.t. (xl0, yl0) in argmax { -xl - yl : xl - yl <= -yu },  yl in {0,1}
/// ```
///
/// True optimum -2 at `(yu, xl0, yl0) = (1, 0, 1)`; the unconditional
/// two-block model wrongly yields 0.
pub fn q0() -> MiblpInstance {
    let dims = Dims { m_r: 0, m_z: 1, n_r: 1, n_z: 1, n_u: 0, n_l: 1 };
    MiblpInstance {
        name: "q0".to_string(),
        dims,
        c_r: vec![],
        c_z: vec![-1.0],
        d_r: vec![0.0],
        d_z: vec![-1.0],
        w_r: vec![-1.0],
        w_z: vec![-1.0],
        a_r: mat(0, 0, &[]),
        a_z: mat(0, 1, &[]),
        b_r: mat(0, 1, &[]),
        b_z: mat(0, 1, &[]),
        r: vec![],
        upper_senses: vec![],
        q_r: mat(1, 0, &[]),
        q_z: mat(1, 1, &[(0, 0, 1.0)]),
        p_r: mat(1, 1, &[(0, 0, 1.0)]),
        p_z: mat(1, 1, &[(0, 0, -1.0)]),
        s: vec![0.0],
        lower_senses: vec![RowSense::Le],
        xu_bounds: vec![],
        yu_bounds: vec![(0.0, 1.0)],
        xl_bounds: vec![(0.0, 10.0)],
        yl_bounds: vec![(0.0, 1.0)],
        seed_metadata: Some(
            "literature encoding; xl0 box [0,10] added to satisfy the finite-bound requirement \
             (the lower row forces xl0 <= 1 wherever it matters)"
                .to_string(),
        ),
    }
}

/// All bundled instances, by name.
pub fn all() -> Vec<MiblpInstance> {
    vec![toy1(), toy2(), toy3(), q0()]
}
