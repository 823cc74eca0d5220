//! Deterministic instance generators for two benchmark families: random
//! dense instances with connecting constraints, and hierarchical supply
//! chain planning (capacitated plant selection with a leader-side resource
//! budget).
//!
//! Instances depend only on their parameters. Randomness comes from a
//! splitmix64 stream with fixed constants and a fixed draw order, so the same
//! parameters produce byte-identical files on every platform. Seeds recorded
//! in the literature for these families are carried as provenance metadata
//! only; the original draws came from an unspecified modeling-system
//! generator and are not reproduced bit for bit.

use crate::model::{Dims, MiblpInstance, RowSense, SparseMat};
use thiserror::Error;

/// splitmix64: 64-bit mixing generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Independent stream for the `index`-th derived task.
    pub fn derive(seed: u64, index: u64) -> u64 {
        let mut rng = SplitMix64::new(seed ^ index.wrapping_mul(0xd1342543de82ef95));
        rng.next_u64()
    }
}

/// Parameters of the random family.
#[derive(Debug, Clone)]
pub struct RandomGenParams {
    /// Half the total variable count; each level has this many variables.
    pub half_nt: usize,
    /// Dispersion of the continuous/integer split around an even one.
    pub std: f64,
    pub seed: u64,
}

/// Parameters of the supply chain planning family.
#[derive(Debug, Clone)]
pub struct HscpParams {
    pub n_plants: usize,
    pub n_products: usize,
    pub seed: u64,
    /// Leader-side resource quota.
    pub q: f64,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

fn split_count(rng: &mut SplitMix64, side: usize, std: f64) -> usize {
    let raw = side as f64 / 2.0 + std * rng.normal();
    raw.round().clamp(0.0, side as f64) as usize
}

/// Generate one random instance: equal variable counts per level with a
/// randomly dispersed continuous/integer split, row counts at a fifth of the
/// total variable count, dense uniform coefficients (objectives in
/// `[-50, 50]`, matrices in `[0, 10]`, upper right-hand sides in `[30, 130]`,
/// lower in `[10, 110]`), continuous boxes `[0, 10]` and binary integers.
pub fn generate_random(params: &RandomGenParams) -> Result<MiblpInstance, GenError> {
    if params.half_nt < 2 {
        return Err(GenError::InvalidParams(format!("half_nt must be at least 2, got {}", params.half_nt)));
    }
    if params.std < 0.0 || !params.std.is_finite() {
        return Err(GenError::InvalidParams(format!("std must be nonnegative, got {}", params.std)));
    }
    let mut rng = SplitMix64::new(params.seed);
    let side = params.half_nt;
    let n_t = 2 * side;
    let m_r = split_count(&mut rng, side, params.std);
    let m_z = side - m_r;
    let n_r = split_count(&mut rng, side, params.std);
    let n_z = side - n_r;
    let rows = ((0.2 * n_t as f64).round() as usize).max(1);
    let dims = Dims { m_r, m_z, n_r, n_z, n_u: rows, n_l: rows };

    let mut vec_in = |rng: &mut SplitMix64, n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|_| rng.uniform(lo, hi)).collect()
    };
    let c_r = vec_in(&mut rng, m_r, -50.0, 50.0);
    let c_z = vec_in(&mut rng, m_z, -50.0, 50.0);
    let d_r = vec_in(&mut rng, n_r, -50.0, 50.0);
    let d_z = vec_in(&mut rng, n_z, -50.0, 50.0);
    let w_r = vec_in(&mut rng, n_r, -50.0, 50.0);
    let w_z = vec_in(&mut rng, n_z, -50.0, 50.0);

    let mut dense = |rng: &mut SplitMix64, n_rows: usize, n_cols: usize| -> SparseMat {
        let mut m = SparseMat::new(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m.push(i, j, rng.uniform(0.0, 10.0));
            }
        }
        m.normalize();
        m
    };
    let a_r = dense(&mut rng, rows, m_r);
    let a_z = dense(&mut rng, rows, m_z);
    let b_r = dense(&mut rng, rows, n_r);
    let b_z = dense(&mut rng, rows, n_z);
    let q_r = dense(&mut rng, rows, m_r);
    let q_z = dense(&mut rng, rows, m_z);
    let p_r = dense(&mut rng, rows, n_r);
    let p_z = dense(&mut rng, rows, n_z);
    let r = vec_in(&mut rng, rows, 30.0, 130.0);
    let s = vec_in(&mut rng, rows, 10.0, 110.0);

    Ok(MiblpInstance {
        name: format!("miblp_{n_t}_{}", params.seed),
        dims,
        c_r,
        c_z,
        d_r,
        d_z,
        w_r,
        w_z,
        a_r,
        a_z,
        b_r,
        b_z,
        r,
        upper_senses: vec![RowSense::Le; rows],
        q_r,
        q_z,
        p_r,
        p_z,
        s,
        lower_senses: vec![RowSense::Le; rows],
        xu_bounds: vec![(0.0, 10.0); m_r],
        yu_bounds: vec![(0.0, 1.0); m_z],
        xl_bounds: vec![(0.0, 10.0); n_r],
        yl_bounds: vec![(0.0, 1.0); n_z],
        seed_metadata: Some(format!(
            "family=random half_nt={} std={} seed={}",
            params.half_nt, params.std, params.seed
        )),
    })
}

/// Generate one supply chain planning instance.
///
/// The leader opens plants (`Y`, binary) and sets their capacities (`Cap`,
/// continuous, boxed by a drawn upper bound that is also kept as an explicit
/// upper row so the reported row counts match). One more upper row caps the
/// total resource use of the follower's production plan at `q`. The follower
/// assigns demand fractions (`X`) and opens production lines (`Z`), subject
/// to full demand coverage (equality rows), plant capacities, a no-production
/// lock for closed plants, and line activation.
pub fn generate_hscp(params: &HscpParams) -> Result<MiblpInstance, GenError> {
    if params.n_plants == 0 || params.n_products == 0 {
        return Err(GenError::InvalidParams("plant and product counts must be positive".into()));
    }
    if !(params.q > 0.0) {
        return Err(GenError::InvalidParams(format!("resource quota must be positive, got {}", params.q)));
    }
    let mut rng = SplitMix64::new(params.seed);
    let np = params.n_plants;
    let nj = params.n_products;
    let pairs = np * nj;

    // draw order: per-product demand, then per-plant cost data, then the
    // per-pair tables, each row-major by plant
    let d: Vec<f64> = (0..nj).map(|_| 5.0 * rng.uniform(8.0, 12.0)).collect();
    let f: Vec<f64> = (0..np).map(|_| 5.0 * rng.uniform(20.0, 80.0)).collect();
    let p: Vec<f64> = (0..np).map(|_| 0.1 * rng.uniform(4.0, 10.0)).collect();
    let w: Vec<f64> = p.iter().map(|&pi| pi + 0.1 * rng.uniform(-2.0, 2.0)).collect();
    let cu: Vec<f64> = (0..np).map(|_| 50.0 * rng.uniform(2.0, 9.0)).collect();
    // the denominator is floored away from zero; the drawn ratio is otherwise
    // unbounded as the denominator vanishes
    let a: Vec<f64> = (0..pairs).map(|_| 0.1 * rng.uniform(7.0, 12.0) / rng.uniform(0.05, 1.0)).collect();
    let r_cost: Vec<f64> = (0..pairs)
        .map(|_| 0.1 * rng.uniform(0.0, 5.0) + 0.1 * rng.uniform(0.0, 5.0) + 0.01 * rng.uniform(1.0, 3.0))
        .collect();
    let s_cost: Vec<f64> =
        (0..pairs).map(|_| (0.5 * rng.uniform(20.0, 80.0)).round() + 2.0 * rng.uniform(-3.0, 3.0)).collect();
    let g_cost: Vec<f64> = (0..pairs)
        .map(|_| (0.5 * rng.uniform(20.0, 80.0)).round() + 2.0 * rng.uniform(-3.0, 3.0) + 2.0 * rng.uniform(-2.0, 2.0))
        .collect();
    let e: Vec<f64> = (0..pairs)
        .map(|_| 0.1 * rng.uniform(0.0, 5.0) + 0.1 * rng.uniform(0.0, 5.0) + 0.1 * rng.uniform(1.0, 3.0))
        .collect();

    let at = |i: usize, j: usize| i * nj + j;
    let n_u = 1 + np;
    let n_l = nj + np + np + pairs;
    let dims = Dims { m_r: np, m_z: np, n_r: pairs, n_z: pairs, n_u, n_l };

    // leader objective: opening costs on Y, opportunity cost p_i on unused
    // capacity, line costs on Z
    let c_r = p.clone();
    let c_z = f.clone();
    let mut d_r = vec![0.0; pairs];
    let mut d_z = vec![0.0; pairs];
    for i in 0..np {
        for j in 0..nj {
            d_r[at(i, j)] = -p[i] * d[j] * a[at(i, j)];
            d_z[at(i, j)] = g_cost[at(i, j)];
        }
    }
    // follower cost, negated into maximization form
    let mut w_r = vec![0.0; pairs];
    let mut w_z = vec![0.0; pairs];
    for i in 0..np {
        for j in 0..nj {
            w_r[at(i, j)] = -(w[i] * d[j] * a[at(i, j)] + d[j] * r_cost[at(i, j)]);
            w_z[at(i, j)] = -s_cost[at(i, j)];
        }
    }

    // upper rows: resource budget, then one capacity-box row per plant
    let mut a_r = SparseMat::new(n_u, np);
    let a_z = SparseMat::new(n_u, np);
    let mut b_r = SparseMat::new(n_u, pairs);
    let b_z = SparseMat::new(n_u, pairs);
    let mut r_rhs = vec![0.0; n_u];
    for i in 0..np {
        for j in 0..nj {
            b_r.push(0, at(i, j), d[j] * e[at(i, j)]);
        }
    }
    r_rhs[0] = params.q;
    for i in 0..np {
        a_r.push(1 + i, i, 1.0);
        r_rhs[1 + i] = cu[i];
    }
    a_r.normalize();
    b_r.normalize();

    // lower rows: demand coverage (equalities), capacity, plant lock, line
    // activation
    let mut q_r = SparseMat::new(n_l, np);
    let mut q_z = SparseMat::new(n_l, np);
    let mut p_r = SparseMat::new(n_l, pairs);
    let mut p_z = SparseMat::new(n_l, pairs);
    let mut s_rhs = vec![0.0; n_l];
    let mut senses = vec![RowSense::Le; n_l];
    for j in 0..nj {
        for i in 0..np {
            p_r.push(j, at(i, j), 1.0);
        }
        s_rhs[j] = 1.0;
        senses[j] = RowSense::Eq;
    }
    for i in 0..np {
        let row = nj + i;
        for j in 0..nj {
            p_r.push(row, at(i, j), d[j] * a[at(i, j)]);
        }
        q_r.push(row, i, -1.0);
        s_rhs[row] = 0.0;
    }
    for i in 0..np {
        let row = nj + np + i;
        for j in 0..nj {
            p_r.push(row, at(i, j), 1.0);
        }
        q_z.push(row, i, -(nj as f64));
        s_rhs[row] = 0.0;
    }
    for i in 0..np {
        for j in 0..nj {
            let row = nj + 2 * np + at(i, j);
            p_r.push(row, at(i, j), 1.0);
            p_z.push(row, at(i, j), -1.0);
            s_rhs[row] = 0.0;
        }
    }
    q_r.normalize();
    q_z.normalize();
    p_r.normalize();
    p_z.normalize();

    Ok(MiblpInstance {
        name: format!("hscp_{np}_{nj}_{}", params.seed),
        dims,
        c_r,
        c_z,
        d_r,
        d_z,
        w_r,
        w_z,
        a_r,
        a_z,
        b_r,
        b_z,
        r: r_rhs,
        upper_senses: vec![RowSense::Le; n_u],
        q_r,
        q_z,
        p_r,
        p_z,
        s: s_rhs,
        lower_senses: senses,
        xu_bounds: (0..np).map(|i| (0.0, cu[i])).collect(),
        yu_bounds: vec![(0.0, 1.0); np],
        xl_bounds: vec![(0.0, 1.0); pairs],
        yl_bounds: vec![(0.0, 1.0); pairs],
        seed_metadata: Some(format!(
            "family=hscp plants={} products={} seed={} q={}",
            np, nj, params.seed, params.q
        )),
    })
}
