//! Global saddle-point system: assembly, direct solution and conditioning.
//!
//! Unknowns are ordered u (all fractures), λ (all fracture/trace pairs), ψ (all
//! traces). With the stabilizing dual weight `W` and residual maps `P`, `Q`,
//! `G` of each pair, the block rows read
//!
//! ```text
//! u:  (A + ωt PᵀWP) u + (-Bᵀ - ωt PᵀWQ) λ            = f + ωt PᵀWG
//! λ:  (-B + ω QᵀWP) u + (-ω QᵀWQ) λ        + C ψ    = ω QᵀWG
//! ψ:                     Cᵀ λ                       = 0
//! ```
//!
//! The λ rows carry the opposite sign of the textbook form so that `t = -1`
//! yields a symmetric matrix.

use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{DfnError, Result};
use crate::fem::{apply_dirichlet, expand, DofMap};
use crate::linalg::{norm_inf, SparseMatrix, TripletBuilder};
use crate::stabilization::{build_meshdep_stab, build_natural_stab, MeshDepStabOperator, NaturalStabOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// No stabilization.
    None,
    /// Dual-norm stabilization with the inverse band stiffness.
    Natural,
    /// Scaled inverse trace mass.
    MeshDep,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::None => "none",
            Variant::Natural => "natural",
            Variant::MeshDep => "meshdep",
        })
    }
}

impl FromStr for Variant {
    type Err = DfnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Variant::None),
            "natural" => Ok(Variant::Natural),
            "meshdep" | "mesh-dependent" => Ok(Variant::MeshDep),
            other => Err(DfnError::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// Stabilization weight (ω or α) and the test-function parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabParams {
    pub weight: f64,
    pub t: f64,
}

impl Default for StabParams {
    fn default() -> Self {
        Self { weight: 0.1, t: 0.0 }
    }
}

/// Reduced system over the unconstrained unknowns.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub dofmap: DofMap,
    pub variant: Variant,
    pub params: StabParams,
}

/// Nodal values of all three fields, Dirichlet values included.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl Solution {
    pub fn from_full(x: &[f64], dofmap: &DofMap) -> Self {
        let take = |r: &std::ops::Range<usize>| x[r.clone()].to_vec();
        Self {
            u: dofmap.u.iter().map(take).collect(),
            lambda: dofmap.lambda.iter().map(take).collect(),
            psi: dofmap.psi.iter().map(take).collect(),
        }
    }

    pub fn to_full(&self, dofmap: &DofMap) -> Vec<f64> {
        let mut x = vec![0.0; dofmap.total];
        let blocks = [(&self.u, &dofmap.u), (&self.lambda, &dofmap.lambda), (&self.psi, &dofmap.psi)];
        for (vals, ranges) in blocks {
            for (v, r) in vals.iter().zip(ranges.iter()) {
                x[r.clone()].copy_from_slice(v);
            }
        }
        x
    }
}

/// Per-pair stabilization operators for one variant.
#[derive(Debug, Clone)]
pub enum StabOperators {
    None,
    Natural(Vec<NaturalStabOperator>),
    MeshDep(Vec<MeshDepStabOperator>),
}

pub fn build_operators(disc: &Discretization, variant: Variant, params: StabParams) -> Result<StabOperators> {
    Ok(match variant {
        Variant::None => StabOperators::None,
        Variant::Natural => StabOperators::Natural(
            disc.couplings
                .iter()
                .map(|c| build_natural_stab(&c.band, c.maps.clone(), params.weight, params.t))
                .collect::<Result<_>>()?,
        ),
        Variant::MeshDep => StabOperators::MeshDep(
            disc.couplings
                .iter()
                .map(|c| {
                    let m = c.key.trace;
                    build_meshdep_stab(&disc.segmeshes[m], &disc.trace_mass[m], c.maps.clone(), params.weight, params.t)
                })
                .collect::<Result<_>>()?,
        ),
    })
}

/// Unstabilized blocks over the full (unreduced) numbering.
fn base_blocks(disc: &Discretization) -> (TripletBuilder, Vec<f64>) {
    let dm = &disc.dofmap;
    let mut b = TripletBuilder::new(dm.total, dm.total);
    let mut rhs = vec![0.0; dm.total];
    for (i, a) in disc.stiffness.iter().enumerate() {
        let o = dm.u[i].start;
        b.add_sparse(o, o, a, 1.0);
        rhs[dm.u[i].clone()].copy_from_slice(&disc.load[i]);
    }
    for (c, coupling) in disc.couplings.iter().enumerate() {
        let (ou, ol, op) = (dm.u[coupling.key.fracture].start, dm.lambda[c].start, dm.psi[coupling.key.trace].start);
        for (r, col, v) in coupling.b.iter() {
            b.push(ou + col, ol + r, -v);
            b.push(ol + r, ou + col, -v);
        }
        for (r, col, v) in disc.trace_mass[coupling.key.trace].iter() {
            b.push(ol + r, op + col, v);
            b.push(op + col, ol + r, v);
        }
    }
    (b, rhs)
}

/// Adds `ω (P u - Q λ - G)ᵀ W (t P v - Q μ)` for one pair with a dense weight `W`.
fn add_dual_weight_blocks(
    b: &mut TripletBuilder,
    rhs: &mut [f64],
    disc: &Discretization,
    c: usize,
    w: &Mat<f64>,
    params: StabParams,
) {
    let coupling = &disc.couplings[c];
    let maps = &coupling.maps;
    let nfree = maps.num_free();
    if nfree == 0 {
        return;
    }
    assert_eq!(w.nrows(), nfree);
    let dm = &disc.dofmap;
    let ou = dm.u[coupling.key.fracture].start;
    let ol = dm.lambda[c].start;
    let cols: Vec<usize> = maps.p.nonzero_columns();
    let pd = maps.p.dense_columns(&cols);
    let q = maps.q.to_dense();
    let g = Mat::from_fn(nfree, 1, |i, _| maps.g[i]);
    let (om, t) = (params.weight, params.t);
    let u_idx: Vec<usize> = cols.iter().map(|&j| ou + j).collect();
    let l_idx: Vec<usize> = (0..q.ncols()).map(|k| ol + k).collect();

    let wp = w * &pd;
    let wq = w * &q;
    let wg = w * &g;
    if t != 0.0 {
        b.add_dense_mapped(&u_idx, &u_idx, &(pd.transpose() * &wp), om * t);
        b.add_dense_mapped(&u_idx, &l_idx, &(pd.transpose() * &wq), -om * t);
        let ru = pd.transpose() * &wg;
        for (k, &i) in u_idx.iter().enumerate() {
            rhs[i] += om * t * ru[(k, 0)];
        }
    }
    b.add_dense_mapped(&l_idx, &u_idx, &(q.transpose() * &wp), om);
    b.add_dense_mapped(&l_idx, &l_idx, &(q.transpose() * &wq), -om);
    let rl = q.transpose() * &wg;
    for (k, &i) in l_idx.iter().enumerate() {
        rhs[i] += om * rl[(k, 0)];
    }
}

/// Closed-form mesh-dependent blocks for one pair (valid on the free λ rows and columns).
fn add_meshdep_blocks(
    b: &mut TripletBuilder,
    rhs: &mut [f64],
    disc: &Discretization,
    c: usize,
    op: &MeshDepStabOperator,
) {
    let coupling = &disc.couplings[c];
    let maps = &coupling.maps;
    let nfree = maps.num_free();
    if nfree == 0 {
        return;
    }
    let dm = &disc.dofmap;
    let ou = dm.u[coupling.key.fracture].start;
    let ol = dm.lambda[c].start;
    let (ad, t) = (op.alpha * op.delta, op.t);
    let free = &maps.free_trace_nodes;
    let l_idx: Vec<usize> = free.iter().map(|&k| ol + k).collect();

    for (l, col, v) in maps.p.iter() {
        b.push(l_idx[l], ou + col, ad * v);
        if t != 0.0 {
            b.push(ou + col, l_idx[l], -ad * t * v);
        }
    }
    b.add_dense_mapped(&l_idx, &l_idx, &op.m, -ad);
    for (l, &i) in l_idx.iter().enumerate() {
        rhs[i] += ad * maps.g[l];
    }
    if t != 0.0 {
        let cols = maps.p.nonzero_columns();
        let pd = maps.p.dense_columns(&cols);
        let u_idx: Vec<usize> = cols.iter().map(|&j| ou + j).collect();
        let mp = &op.m_inv * &pd;
        b.add_dense_mapped(&u_idx, &u_idx, &(pd.transpose() * &mp), ad * t);
        let g = Mat::from_fn(nfree, 1, |i, _| maps.g[i]);
        let ru = mp.transpose() * &g;
        for (k, &i) in u_idx.iter().enumerate() {
            rhs[i] += ad * t * ru[(k, 0)];
        }
    }
}

fn reduce(
    disc: &Discretization,
    b: TripletBuilder,
    rhs: Vec<f64>,
    variant: Variant,
    params: StabParams,
) -> SaddleSystem {
    let full = b.build();
    let red = apply_dirichlet(&full, &rhs, &disc.dofmap.fixed);
    debug_assert_eq!(red.free, disc.dofmap.free);
    SaddleSystem { matrix: red.matrix, rhs: red.rhs, dofmap: disc.dofmap.clone(), variant, params }
}

/// Assembles the reduced system of the given variant.
pub fn assemble_system(disc: &Discretization, variant: Variant, params: StabParams) -> Result<SaddleSystem> {
    let ops = build_operators(disc, variant, params)?;
    assemble_with_operators(disc, &ops, params)
}

pub fn assemble_with_operators(disc: &Discretization, ops: &StabOperators, params: StabParams) -> Result<SaddleSystem> {
    let (mut b, mut rhs) = base_blocks(disc);
    let n = disc.couplings.len();
    let variant = match ops {
        StabOperators::None => Variant::None,
        StabOperators::Natural(v) => {
            check_len(v.len(), n)?;
            for (c, op) in v.iter().enumerate() {
                add_dual_weight_blocks(&mut b, &mut rhs, disc, c, &op.s, StabParams { weight: op.omega, t: op.t });
            }
            Variant::Natural
        }
        StabOperators::MeshDep(v) => {
            check_len(v.len(), n)?;
            for (c, op) in v.iter().enumerate() {
                add_meshdep_blocks(&mut b, &mut rhs, disc, c, op);
            }
            Variant::MeshDep
        }
    };
    Ok(reduce(disc, b, rhs, variant, params))
}

/// Assembles the stabilized system with an explicit dual weight per pair,
/// `ω (P u - Q λ - G)ᵀ W_c (t P v - Q μ)`. The variant tag is taken from the caller.
pub fn assemble_with_dual_weights(
    disc: &Discretization,
    weights: &[Mat<f64>],
    variant: Variant,
    params: StabParams,
) -> Result<SaddleSystem> {
    check_len(weights.len(), disc.couplings.len())?;
    let (mut b, mut rhs) = base_blocks(disc);
    for (c, w) in weights.iter().enumerate() {
        if w.nrows() != disc.couplings[c].maps.num_free() || w.ncols() != w.nrows() {
            return Err(DfnError::Dimension(format!(
                "dual weight {c} is {}x{}, expected {n}x{n}",
                w.nrows(),
                w.ncols(),
                n = disc.couplings[c].maps.num_free()
            )));
        }
        add_dual_weight_blocks(&mut b, &mut rhs, disc, c, w, params);
    }
    Ok(reduce(disc, b, rhs, variant, params))
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(DfnError::Dimension(format!("{got} stabilization operators for {want} couplings")));
    }
    Ok(())
}

/// Solves `M x = b` with sparse LU and checks the residual.
pub fn solve_sparse(m: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n || b.len() != n {
        return Err(DfnError::Dimension(format!(
            "{}x{} system with {} right-hand side entries",
            n,
            m.ncols(),
            b.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = m.to_faer()?.sp_lu().map_err(|e| DfnError::SingularSystem(format!("LU factorization failed: {e:?}")))?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let sol = lu.solve(rhs.as_ref());
    let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DfnError::SingularSystem("solution has non-finite entries".into()));
    }
    let r = m.mul_vec(&x);
    let res = r.iter().zip(b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
    let (nb, nm, nx) = (norm_inf(b), m.norm_inf(), norm_inf(&x));
    if res > 1e-9 * (nb + nm * nx) {
        return Err(DfnError::SingularSystem(format!("residual {res:e} fails the backward-error check")));
    }
    if nb > 0.0 && nx * nm > 1e15 * nb {
        return Err(DfnError::SingularSystem(format!(
            "solution growth ‖x‖‖M‖/‖b‖ = {:e} indicates a numerically singular matrix",
            nx * nm / nb
        )));
    }
    Ok(x)
}

pub fn solve(sys: &SaddleSystem) -> Result<Solution> {
    let x = solve_sparse(&sys.matrix, &sys.rhs)?;
    let full = expand(&x, &sys.dofmap.free, &sys.dofmap.fixed);
    Ok(Solution::from_full(&full, &sys.dofmap))
}

/// Dense SVD threshold for [`condition_number`].
pub const DENSE_CONDITION_LIMIT: usize = 1500;

/// Spectral condition number `σ_max / σ_min` of the reduced matrix.
///
/// Up to [`DENSE_CONDITION_LIMIT`] unknowns this is exact (dense SVD). Above it,
/// `σ_max` comes from power iteration on `MᵀM` and `σ_min` from inverse iteration
/// with the sparse LU factors; the result is an estimate.
pub fn condition_number(sys: &SaddleSystem) -> Result<f64> {
    matrix_condition_number(&sys.matrix)
}

pub fn matrix_condition_number(m: &SparseMatrix) -> Result<f64> {
    let n = m.nrows();
    if n == 0 {
        return Ok(1.0);
    }
    let (smax, smin) = if n <= DENSE_CONDITION_LIMIT {
        let sv = m.to_dense().singular_values().map_err(|e| DfnError::SingularSystem(format!("SVD failed: {e:?}")))?;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        (smax, smin)
    } else {
        estimate_extreme_singular_values(m)?
    };
    if !(smin > 1e-300) {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

pub fn estimate_extreme_singular_values(m: &SparseMatrix) -> Result<(f64, f64)> {
    let n = m.nrows();
    let start = |k: usize| 1.0 + 0.01 * ((k * 7919) % 101) as f64;
    let normalize = |v: &mut Vec<f64>| {
        let s = crate::linalg::norm_l2(v);
        v.iter_mut().for_each(|x| *x /= s);
        s
    };

    let mut v: Vec<f64> = (0..n).map(start).collect();
    normalize(&mut v);
    let mut smax = 0.0;
    for _ in 0..200 {
        let mut w = m.tr_mul_vec(&m.mul_vec(&v));
        let s = normalize(&mut w).sqrt();
        v = w;
        let done = (s - smax).abs() <= 1e-6 * s;
        smax = s;
        if done {
            break;
        }
    }

    let lu = match m.to_faer()?.sp_lu() {
        Ok(lu) => lu,
        Err(_) => return Ok((smax, 0.0)),
    };
    let mut v: Vec<f64> = (0..n).map(start).collect();
    normalize(&mut v);
    let mut inv_smin = 0.0;
    for _ in 0..200 {
        // (MᵀM)⁻¹ v = M⁻¹ M⁻ᵀ v
        let rhs = Mat::from_fn(n, 1, |i, _| v[i]);
        let y = lu.solve_transpose(rhs.as_ref());
        let z = lu.solve(y.as_ref());
        let mut w: Vec<f64> = (0..n).map(|i| z[(i, 0)]).collect();
        if w.iter().any(|x| !x.is_finite()) {
            return Ok((smax, 0.0));
        }
        let s = normalize(&mut w).sqrt();
        v = w;
        let done = (s - inv_smin).abs() <= 1e-6 * s;
        inv_smin = s;
        if done {
            break;
        }
    }
    Ok((smax, if inv_smin > 0.0 { 1.0 / inv_smin } else { 0.0 }))
}

/// `max_k |Σ_i ∫ λ^i ψ_k|` over free trace basis functions, divided by `Σ_i ‖λ^i‖₀`.
pub fn flux_conservation_residual(sol: &Solution, disc: &Discretization) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale = 0.0;
    for (m, sm) in disc.segmeshes.iter().enumerate() {
        let mass = &disc.trace_mass[m];
        let mut acc = vec![0.0; sm.num_nodes()];
        for c in disc.couplings_of_trace(m) {
            let l = &sol.lambda[c];
            let ml = mass.mul_vec(l);
            scale += crate::linalg::dot(l, &ml).max(0.0).sqrt();
            acc.iter_mut().zip(&ml).for_each(|(a, b)| *a += b);
        }
        for k in sm.free_nodes() {
            worst = worst.max(acc[k].abs());
        }
    }
    if scale == 0.0 {
        return 0.0;
    }
    worst / scale
}

/// MatrixMarket coordinate dump.
pub fn matrix_market(m: &SparseMatrix) -> String {
    use std::fmt::Write;
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (r, c, v) in m.iter() {
        let _ = writeln!(s, "{} {} {:.17e}", r + 1, c + 1, v);
    }
    s
}
