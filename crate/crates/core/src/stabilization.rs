//! Residual-based stabilization on the auxiliary bands.
//!
//! For one (fracture, trace) pair the discrete residual tested against the band
//! basis `η_ℓ` is `r = P u - Q λ`, where
//!
//! * `P = Θ J`: `Θ[ℓ, e] = ∫_e η_ℓ` and `J` maps nodal values to edge flux jumps,
//! * `Q` is the trace mass matrix restricted to free band rows,
//! * the load counterpart is `G[ℓ] = ∫_band g η_ℓ`.
//!
//! The stabilizing form is `(P u - Q λ)ᵀ W (t P v - Q μ)` with a dual weight `W`:
//! `W = R⁻¹` (inverse band stiffness) for the natural variant and `W = δ M̃`
//! (scaled inverse trace mass) for the mesh-dependent one.

use std::sync::Arc;

use faer::Mat;

use crate::error::{DfnError, Result};
use crate::fem::{assemble_load, assemble_stiffness};
use crate::geometry::{Fracture, LocalFn};
use crate::linalg::{dense_mul_vec, dot, spd_condition, spd_inverse, SparseMatrix, TripletBuilder};
use crate::meshing::{overlay_partial, AuxBandMesh, SegMesh, TriMesh};
use crate::vecmath::*;

/// Edge integrals of the band basis: `rows[ℓ]` lists `(edge, θ_e^ℓ)`.
#[derive(Debug, Clone)]
pub struct ThetaTable {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub num_edges: usize,
}

impl ThetaTable {
    pub fn to_sparse(&self) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.rows.len(), self.num_edges);
        for (l, row) in self.rows.iter().enumerate() {
            for &(e, v) in row {
                b.push(l, e, v);
            }
        }
        b.build()
    }
}

/// Integrates every band basis function over the fracture mesh edges meeting the band.
/// `η_ℓ` is linear on each overlay piece, so the trapezoid rule is exact.
pub fn compute_theta(band: &AuxBandMesh, fmesh: &TriMesh) -> ThetaTable {
    let nfree = band.num_free();
    let mut acc: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); nfree];
    let idx = band.free_index();
    if band.mesh.num_triangles() > 0 {
        let (lo, hi) = band.mesh.bbox();
        let mut edges: Vec<usize> = fmesh.candidates(lo, hi).into_iter().flat_map(|t| fmesh.tri_edges(t)).collect();
        edges.sort_unstable();
        edges.dedup();
        for e in edges {
            let [na, nb] = fmesh.edges()[e].nodes;
            let (a, b) = (fmesh.node(na), fmesh.node(nb));
            let (elo, ehi) = ([a[0].min(b[0]), a[1].min(b[1])], [a[0].max(b[0]), a[1].max(b[1])]);
            if ehi[0] < lo[0] || ehi[1] < lo[1] || elo[0] > hi[0] || elo[1] > hi[1] {
                continue;
            }
            let ov = overlay_partial(a, b, &band.mesh);
            for piece in &ov.pieces {
                let t = piece.cells[0];
                let b0 = band.mesh.barycentric(t, ov.point(piece.t0));
                let b1 = band.mesh.barycentric(t, ov.point(piece.t1));
                for (k, &node) in band.mesh.triangles()[t].iter().enumerate() {
                    if let Some(l) = idx[node] {
                        *acc[l].entry(e).or_insert(0.0) += 0.5 * piece.length() * (b0[k] + b1[k]);
                    }
                }
            }
        }
    }
    let drop = 1e-14 * band.mesh.meshsize();
    ThetaTable {
        rows: acc.into_iter().map(|m| m.into_iter().filter(|(_, v)| v.abs() >= drop).collect()).collect(),
        num_edges: fmesh.edges().len(),
    }
}

/// `Σ_e θ_e^ℓ [K ∇u · ν]_e` for every band dof, computing flux jumps edge by edge.
pub fn eval_au_functional(u: &[f64], theta: &ThetaTable, fmesh: &TriMesh, f: &Fracture) -> Vec<f64> {
    let k = f.permeability();
    let flux = |t: usize, n: P2| {
        let g = fmesh.gradients(t);
        let tri = fmesh.triangles()[t];
        let grad = (0..3).fold([0.0, 0.0], |acc, i| add2(acc, scale2(g[i], u[tri[i]])));
        let kg = [k[0][0] * grad[0] + k[0][1] * grad[1], k[1][0] * grad[0] + k[1][1] * grad[1]];
        dot2(kg, n)
    };
    theta
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(e, th)| {
                    let edge = fmesh.edges()[e];
                    let neumann = crate::meshing::is_neumann_edge(fmesh, f, e);
                    if edge.is_boundary() && !neumann {
                        return 0.0;
                    }
                    let d = sub2(fmesh.node(edge.nodes[1]), fmesh.node(edge.nodes[0]));
                    let n = scale2([d[1], -d[0]], 1.0 / norm2(d));
                    let mut jump = flux(edge.left, n);
                    if let Some(r) = edge.right {
                        jump += flux(r, scale2(n, -1.0));
                    }
                    th * jump
                })
                .sum()
        })
        .collect()
}

/// Linear maps from a discrete state to the band residual of one (fracture, trace) pair.
#[derive(Debug, Clone)]
pub struct ResidualMaps {
    /// Free band dofs by fracture nodes.
    pub p: SparseMatrix,
    /// Free band dofs by trace nodes.
    pub q: SparseMatrix,
    pub g: Vec<f64>,
    /// Trace nodes carrying the free band dofs, in order.
    pub free_trace_nodes: Vec<usize>,
}

impl ResidualMaps {
    pub fn build(
        band: &AuxBandMesh,
        theta: &ThetaTable,
        jump: &SparseMatrix,
        trace_mass: &SparseMatrix,
        forcing: &LocalFn,
    ) -> Self {
        let p = theta.to_sparse().matmul(jump);
        let all: Vec<usize> = (0..trace_mass.ncols()).collect();
        let q = trace_mass.select(&band.free_nodes, &all);
        let load = assemble_load(&band.mesh, forcing);
        let g = band.free_nodes.iter().map(|&n| load[n]).collect();
        Self { p, q, g, free_trace_nodes: band.free_nodes.clone() }
    }

    pub fn num_free(&self) -> usize {
        self.free_trace_nodes.len()
    }

    /// `P u - Q λ`.
    pub fn residual(&self, u: &[f64], lambda: &[f64]) -> Vec<f64> {
        let pu = self.p.mul_vec(u);
        let ql = self.q.mul_vec(lambda);
        pu.iter().zip(&ql).map(|(a, b)| a - b).collect()
    }

    /// `t P v - Q μ`.
    pub fn test_residual(&self, t: f64, v: &[f64], mu: &[f64]) -> Vec<f64> {
        let pv = self.p.mul_vec(v);
        let qm = self.q.mul_vec(mu);
        pv.iter().zip(&qm).map(|(a, b)| t * a - b).collect()
    }
}

/// `(P u - Q λ)ᵀ W (t P v - Q μ)` for an arbitrary dual weight `W`.
pub fn dual_product(
    w: &Mat<f64>,
    maps: &ResidualMaps,
    t: f64,
    (u, lambda): (&[f64], &[f64]),
    (v, mu): (&[f64], &[f64]),
) -> f64 {
    let r = maps.residual(u, lambda);
    let s = maps.test_residual(t, v, mu);
    dot(&r, &dense_mul_vec(w, &s))
}

/// Unit-coefficient band stiffness on the free band dofs.
pub fn band_stiffness(band: &AuxBandMesh) -> Mat<f64> {
    let r = assemble_stiffness(&band.mesh, [[1.0, 0.0], [0.0, 1.0]]);
    r.select(&band.free_nodes, &band.free_nodes).to_dense()
}

fn symmetric_part(m: Mat<f64>) -> Mat<f64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Natural stabilization of one (fracture, trace) pair: `W = S = R⁻¹`.
#[derive(Debug, Clone)]
pub struct NaturalStabOperator {
    pub r: Mat<f64>,
    pub s: Mat<f64>,
    pub maps: Arc<ResidualMaps>,
    pub omega: f64,
    pub t: f64,
}

pub fn build_natural_stab(
    band: &AuxBandMesh,
    maps: Arc<ResidualMaps>,
    omega: f64,
    t: f64,
) -> Result<NaturalStabOperator> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(DfnError::Stabilization(format!("weight must be positive, got {omega}")));
    }
    let r = band_stiffness(band);
    let s = if r.nrows() == 0 {
        Mat::zeros(0, 0)
    } else {
        let cond = spd_condition(&r)?;
        if !(cond <= 1e14) {
            return Err(DfnError::Stabilization(format!(
                "band stiffness of trace {} on fracture {} is numerically singular (condition {cond:e})",
                band.trace, band.fracture
            )));
        }
        symmetric_part(spd_inverse(&r)?)
    };
    Ok(NaturalStabOperator { r, s, maps, omega, t })
}

/// `𝒮(u, λ; v, μ) = (P u - Q λ)ᵀ S (t P v - Q μ)`.
pub fn apply_natural_stab_bilinear(op: &NaturalStabOperator, state: (&[f64], &[f64]), test: (&[f64], &[f64])) -> f64 {
    dual_product(&op.s, &op.maps, op.t, state, test)
}

/// `𝒢(v, μ) = Gᵀ S (t P v - Q μ)`.
pub fn natural_stab_rhs(op: &NaturalStabOperator, v: &[f64], mu: &[f64]) -> f64 {
    let s = op.maps.test_residual(op.t, v, mu);
    dot(&op.maps.g, &dense_mul_vec(&op.s, &s))
}

/// Mesh-dependent stabilization of one (fracture, trace) pair: `W = δ M̃`.
#[derive(Debug, Clone)]
pub struct MeshDepStabOperator {
    pub delta: f64,
    /// Trace mass on the free band dofs.
    pub m: Mat<f64>,
    pub m_inv: Mat<f64>,
    /// Full trace mass matrix.
    pub trace_mass: SparseMatrix,
    pub maps: Arc<ResidualMaps>,
    pub alpha: f64,
    pub t: f64,
}

impl MeshDepStabOperator {
    /// The dual weight `δ M̃` this variant substitutes for `S`.
    pub fn dual_weight(&self) -> Mat<f64> {
        let n = self.m_inv.nrows();
        Mat::from_fn(n, n, |i, j| self.delta * self.m_inv[(i, j)])
    }
}

pub fn build_meshdep_stab(
    sm: &SegMesh,
    trace_mass: &SparseMatrix,
    maps: Arc<ResidualMaps>,
    alpha: f64,
    t: f64,
) -> Result<MeshDepStabOperator> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(DfnError::Stabilization(format!("weight must be positive, got {alpha}")));
    }
    let free = &maps.free_trace_nodes;
    let m = trace_mass.select(free, free).to_dense();
    let m_inv = if m.nrows() == 0 { Mat::zeros(0, 0) } else { symmetric_part(spd_inverse(&m)?) };
    Ok(MeshDepStabOperator { delta: sm.meshsize, m, m_inv, trace_mass: trace_mass.clone(), maps, alpha, t })
}

/// Closed-form mesh-dependent stabilizing form
/// `δ [ t (Pu)ᵀ M̃ (Pv) - (Pu)·μ - t λ·(Pv) + ∫ λ μ ]`.
///
/// `λ` and `μ` must vanish at Dirichlet trace endpoints.
pub fn apply_meshdep_blocks(op: &MeshDepStabOperator, (u, lambda): (&[f64], &[f64]), (v, mu): (&[f64], &[f64])) -> f64 {
    let pu = op.maps.p.mul_vec(u);
    let pv = op.maps.p.mul_vec(v);
    let free = &op.maps.free_trace_nodes;
    let mu_f: Vec<f64> = free.iter().map(|&k| mu[k]).collect();
    let la_f: Vec<f64> = free.iter().map(|&k| lambda[k]).collect();
    let au_av = dot(&pu, &dense_mul_vec(&op.m_inv, &pv));
    let lm = dot(lambda, &op.trace_mass.mul_vec(mu));
    op.delta * (op.t * au_av - dot(&pu, &mu_f) - op.t * dot(&la_f, &pv) + lm)
}

/// Closed-form right-hand side `δ [ t Gᵀ M̃ (Pv) - ∫_band g Ê(μ) ]`.
pub fn meshdep_rhs(op: &MeshDepStabOperator, v: &[f64], mu: &[f64]) -> f64 {
    let pv = op.maps.p.mul_vec(v);
    let mu_f: Vec<f64> = op.maps.free_trace_nodes.iter().map(|&k| mu[k]).collect();
    op.delta * (op.t * dot(&op.maps.g, &dense_mul_vec(&op.m_inv, &pv)) - dot(&op.maps.g, &mu_f))
}
