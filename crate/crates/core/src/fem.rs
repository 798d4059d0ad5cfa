//! P1 assembly on fracture and trace meshes, plus Dirichlet elimination and dof bookkeeping.

use std::ops::Range;

use crate::error::Result;
use crate::geometry::{BoundaryCondition, Fracture, LocalFn, TraceParam};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::meshing::{overlay_segment, NodeMarker, OverlayMesh, SegMesh, TriMesh};
use crate::quadrature::{gauss2_unit, triangle_order2};
use crate::vecmath::*;

#[inline]
fn apply_tensor(k: [[f64; 2]; 2], g: P2) -> P2 {
    [k[0][0] * g[0] + k[0][1] * g[1], k[1][0] * g[0] + k[1][1] * g[1]]
}

/// Element stiffness `∫_T K ∇φ_j · ∇φ_i` for a P1 triangle.
pub fn element_stiffness(v: [P2; 3], k: [[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let area = 0.5 * orient2(v[0], v[1], v[2]);
    let g = crate::meshing::hat_gradients(v);
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            a[i][j] = area * dot2(apply_tensor(k, g[j]), g[i]);
            a[j][i] = a[i][j];
        }
    }
    a
}

/// Stiffness over all mesh nodes; constraints are applied later.
pub fn assemble_stiffness(mesh: &TriMesh, k: [[f64; 2]; 2]) -> SparseMatrix {
    let n = mesh.num_nodes();
    let mut b = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = element_stiffness(mesh.vertices(t), k);
        for i in 0..3 {
            for j in 0..3 {
                b.push(tri[i], tri[j], a[i][j]);
            }
        }
    }
    b.build()
}

/// Load vector `∫ g φ_j` with the 3-point rule on every triangle.
pub fn assemble_load(mesh: &TriMesh, g: &LocalFn) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = mesh.vertices(t);
        let area = mesh.area(t);
        for (bary, w) in triangle_order2() {
            let p = [
                bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
                bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
            ];
            let gv = g.eval(p) * w * area;
            for k in 0..3 {
                f[tri[k]] += gv * bary[k];
            }
        }
    }
    f
}

/// Coupling `∫_S μ_k v_j` between trace-mesh hats (rows) and fracture hats (columns).
///
/// The integrand is piecewise quadratic on the overlay of both meshes along the
/// trace, so two Gauss points per overlay piece are exact.
pub fn assemble_coupling_b(mesh: &TriMesh, sm: &SegMesh, param: &TraceParam) -> Result<SparseMatrix> {
    let len = sm.length();
    let ov = overlay_segment(
        param.at(0.0),
        param.at(len),
        &[OverlayMesh::Tri(mesh), OverlayMesh::Seg { mesh: sm, span: [0.0, len] }],
    )?;
    let mut b = TripletBuilder::new(sm.num_nodes(), mesh.num_nodes());
    for piece in &ov.pieces {
        let (tri, el) = (piece.cells[0], piece.cells[1]);
        let nodes = mesh.triangles()[tri];
        let h = piece.length();
        for (xi, w) in gauss2_unit() {
            let s = piece.t0 + xi * h;
            let bary = mesh.barycentric(tri, param.at(s));
            let t = (s - sm.coords[el]) / sm.element_length(el);
            let mu = [1.0 - t, t];
            for (a, &m) in mu.iter().enumerate() {
                for k in 0..3 {
                    b.push(el + a, nodes[k], w * h * m * bary[k]);
                }
            }
        }
    }
    Ok(b.build())
}

/// 1D P1 mass matrix of a trace mesh.
pub fn assemble_coupling_c(sm: &SegMesh) -> SparseMatrix {
    let n = sm.num_nodes();
    let mut b = TripletBuilder::new(n, n);
    for k in 0..sm.num_elements() {
        let h = sm.element_length(k);
        b.push(k, k, h / 3.0);
        b.push(k + 1, k + 1, h / 3.0);
        b.push(k, k + 1, h / 6.0);
        b.push(k + 1, k, h / 6.0);
    }
    b.build()
}

/// Edge-by-node matrix of conormal flux jumps `Σ_T K ∇u|_T · n_T` over the triangles
/// sharing each edge (outward normals). Neumann boundary edges keep their one-sided
/// flux; Dirichlet boundary edges give empty rows.
pub fn flux_jump_matrix(mesh: &TriMesh, f: &Fracture) -> SparseMatrix {
    let k = f.permeability();
    let mut b = TripletBuilder::new(mesh.edges().len(), mesh.num_nodes());
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.is_boundary() {
            let dirichlet = mesh
                .polygon_edge(e)
                .is_none_or(|j| matches!(f.boundary_conditions()[j], BoundaryCondition::Dirichlet(_)));
            if dirichlet {
                continue;
            }
        }
        let d = sub2(mesh.node(edge.nodes[1]), mesh.node(edge.nodes[0]));
        let n_left = scale2(perp(d), -1.0 / norm2(d));
        let sides = [(Some(edge.left), 1.0), (edge.right, -1.0)];
        for (tri, sign) in sides {
            let Some(t) = tri else { continue };
            let g = mesh.gradients(t);
            for (i, &node) in mesh.triangles()[t].iter().enumerate() {
                b.push(e, node, sign * dot2(apply_tensor(k, g[i]), n_left));
            }
        }
    }
    b.build()
}

/// Dirichlet value for every node marked Dirichlet.
pub fn dirichlet_values(mesh: &TriMesh, f: &Fracture) -> Vec<Option<f64>> {
    mesh.nodes()
        .iter()
        .zip(mesh.node_markers())
        .map(|(p, m)| match m {
            NodeMarker::Dirichlet => f.dirichlet_value(*p),
            _ => None,
        })
        .collect()
}

/// A linear system restricted to its unconstrained unknowns.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Full indices of the kept unknowns, ascending.
    pub free: Vec<usize>,
}

/// Eliminates prescribed unknowns by lifting: `M_ff x_f = b_f - M_fc x_c`.
pub fn apply_dirichlet(matrix: &SparseMatrix, rhs: &[f64], fixed: &[Option<f64>]) -> Reduced {
    let n = matrix.nrows();
    assert_eq!(fixed.len(), n);
    assert_eq!(rhs.len(), n);
    let lift: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    let ml = matrix.mul_vec(&lift);
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    Reduced { matrix: matrix.select(&free, &free), rhs: free.iter().map(|&i| rhs[i] - ml[i]).collect(), free }
}

/// Scatters a reduced solution back, filling constrained entries with their values.
pub fn expand(reduced: &[f64], free: &[usize], fixed: &[Option<f64>]) -> Vec<f64> {
    let mut x: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    for (k, &i) in free.iter().enumerate() {
        x[i] = reduced[k];
    }
    x
}

/// One multiplier block: trace `trace` seen from fracture `fracture`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingKey {
    pub fracture: usize,
    pub trace: usize,
    /// Position of the fracture in the trace's pair.
    pub side: usize,
}

/// Global numbering: all u blocks, then all λ blocks, then all ψ blocks.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub u: Vec<Range<usize>>,
    pub lambda: Vec<Range<usize>>,
    pub psi: Vec<Range<usize>>,
    pub couplings: Vec<CouplingKey>,
    pub total: usize,
    /// Prescribed value of each constrained unknown.
    pub fixed: Vec<Option<f64>>,
    /// Unconstrained unknowns in global order.
    pub free: Vec<usize>,
    /// Global index to position among the free unknowns.
    pub reduced_index: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(u_sizes: &[usize], couplings: Vec<CouplingKey>, lambda_sizes: &[usize], psi_sizes: &[usize]) -> Self {
        assert_eq!(couplings.len(), lambda_sizes.len());
        let mut next = 0;
        let mut ranges = |sizes: &[usize]| {
            sizes
                .iter()
                .map(|&s| {
                    let r = next..next + s;
                    next += s;
                    r
                })
                .collect::<Vec<_>>()
        };
        let u = ranges(u_sizes);
        let lambda = ranges(lambda_sizes);
        let psi = ranges(psi_sizes);
        let total = next;
        Self {
            u,
            lambda,
            psi,
            couplings,
            total,
            fixed: vec![None; total],
            free: (0..total).collect(),
            reduced_index: (0..total).map(Some).collect(),
        }
    }

    /// Sets constrained values and rebuilds the free list.
    pub fn set_fixed(&mut self, fixed: Vec<Option<f64>>) {
        assert_eq!(fixed.len(), self.total);
        self.fixed = fixed;
        self.free = (0..self.total).filter(|&i| self.fixed[i].is_none()).collect();
        self.reduced_index = vec![None; self.total];
        for (k, &i) in self.free.iter().enumerate() {
            self.reduced_index[i] = Some(k);
        }
    }

    fn count_free(&self, ranges: &[Range<usize>]) -> usize {
        ranges.iter().flat_map(|r| r.clone()).filter(|&i| self.fixed[i].is_none()).count()
    }

    pub fn num_free_u(&self) -> usize {
        self.count_free(&self.u)
    }

    pub fn num_free_lambda(&self) -> usize {
        self.count_free(&self.lambda)
    }

    pub fn num_free_psi(&self) -> usize {
        self.count_free(&self.psi)
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }
}
