use crate::error::{DfnError, Result};
use crate::geometry::{Fracture, Trace};
use crate::meshing::{SegMesh, TriMesh};
use crate::vecmath::*;

/// Two rows of triangles straddling a trace inside one fracture.
///
/// Nodes `0..=n` are the trace breakpoints in order, so the trace node map is
/// the identity on SegMesh indices. All other nodes lie on the band boundary
/// and carry no unknown.
#[derive(Debug, Clone)]
pub struct AuxBandMesh {
    pub fracture: usize,
    pub trace: usize,
    pub mesh: TriMesh,
    /// SegMesh node index to band node index.
    pub trace_node_map: Vec<usize>,
    pub zero_nodes: Vec<bool>,
    /// Band nodes carrying unknowns, ordered like the SegMesh free nodes.
    pub free_nodes: Vec<usize>,
}

impl AuxBandMesh {
    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    /// Position of each band node among the free dofs.
    pub fn free_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.mesh.num_nodes()];
        for (l, &n) in self.free_nodes.iter().enumerate() {
            idx[n] = Some(l);
        }
        idx
    }
}

/// Builds the auxiliary band of trace `t` on fracture `f` (at position `side` of the trace pair).
///
/// Interior breakpoints are offset by `±w` along the in-plane trace normal with
/// `w = min(δ_m, distance to ∂F, separation / 2)`. A Dirichlet endpoint closes the
/// band with a fan. A free endpoint on the fracture boundary slides its offsets
/// along that boundary edge; a free endpoint inside the fracture gets a cap node
/// beyond the trace end.
pub fn build_aux_band(
    f: &Fracture,
    fracture_index: usize,
    t: &Trace,
    side: usize,
    sm: &SegMesh,
    separation: f64,
) -> Result<AuxBandMesh> {
    let param = t.params[side];
    let nrm = param.normal();
    let dm = sm.meshsize;
    let cap = if separation.is_finite() { 0.5 * separation } else { f64::INFINITY };
    let floor = 1e-3 * dm;
    let n = sm.num_elements();
    let collapse = |k: usize, w: f64| {
        Err(DfnError::Mesh(format!(
            "band of trace {} on fracture {} collapses at breakpoint {k} (half-width {w:e})",
            t.id,
            f.id()
        )))
    };

    let mut nodes: Vec<P2> = sm.coords.iter().map(|&s| param.at(s)).collect();
    let mut plus: Vec<Option<usize>> = vec![None; n + 1];
    let mut minus: Vec<Option<usize>> = vec![None; n + 1];
    let mut caps: Vec<[usize; 3]> = Vec::new();

    for k in 1..n {
        let p = nodes[k];
        let w = dm.min(f.boundary_distance(p)).min(cap);
        if w < floor {
            return collapse(k, w);
        }
        nodes.push(add2(p, scale2(nrm, w)));
        plus[k] = Some(nodes.len() - 1);
        nodes.push(sub2(p, scale2(nrm, w)));
        minus[k] = Some(nodes.len() - 1);
    }

    let tol = f.boundary_tol();
    for (end, k) in [(0usize, 0usize), (1, n)] {
        if sm.endpoint_markers[end].is_dirichlet() {
            continue;
        }
        let p = nodes[k];
        let outward = if end == 0 { scale2(param.dir, -1.0) } else { param.dir };
        let on_edges = f.edges_containing(p, tol);
        if on_edges.is_empty() {
            let w = dm.min(f.boundary_distance(p)).min(cap);
            if w < floor {
                return collapse(k, w);
            }
            nodes.push(add2(p, scale2(nrm, w)));
            plus[k] = Some(nodes.len() - 1);
            nodes.push(sub2(p, scale2(nrm, w)));
            minus[k] = Some(nodes.len() - 1);
            nodes.push(add2(p, scale2(outward, w)));
            let e = nodes.len() - 1;
            caps.push([k, plus[k].unwrap(), e]);
            caps.push([k, e, minus[k].unwrap()]);
        } else {
            // slide along the boundary edge most transversal to the trace
            let (a, b, c) = on_edges
                .iter()
                .map(|&j| {
                    let (a, b) = f.edge(j);
                    let e = scale2(sub2(b, a), 1.0 / dist2(a, b));
                    (a, b, dot2(e, nrm))
                })
                .max_by(|x, y| x.2.abs().total_cmp(&y.2.abs()))
                .unwrap();
            let e = scale2(sub2(b, a), 1.0 / dist2(a, b));
            if c.abs() < 1e-3 {
                return collapse(k, 0.0);
            }
            // along-edge room on each side limits the normal offset
            let room = dist2(p, a).min(dist2(p, b)) * c.abs();
            let w = dm.min(cap).min(room);
            if w < floor {
                return collapse(k, w);
            }
            nodes.push(add2(p, scale2(e, w / c)));
            plus[k] = Some(nodes.len() - 1);
            nodes.push(sub2(p, scale2(e, w / c)));
            minus[k] = Some(nodes.len() - 1);
        }
    }

    let mut triangles = caps;
    for k in 0..n {
        for offs in [&plus, &minus] {
            match (offs[k], offs[k + 1]) {
                (Some(qa), Some(qb)) => {
                    triangles.push([k, k + 1, qb]);
                    triangles.push([k, qb, qa]);
                }
                (None, Some(qb)) => triangles.push([k, k + 1, qb]),
                (Some(qa), None) => triangles.push([k, k + 1, qa]),
                (None, None) => {}
            }
        }
    }
    let mesh = TriMesh::new(nodes, triangles, dm)?;
    let free_nodes = sm.free_nodes();
    let mut zero_nodes = vec![true; mesh.num_nodes()];
    for &k in &free_nodes {
        zero_nodes[k] = false;
    }
    Ok(AuxBandMesh {
        fracture: fracture_index,
        trace: t.id,
        mesh,
        trace_node_map: (0..=n).collect(),
        zero_nodes,
        free_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_network, BoundaryCondition, LocalFn, Network};
    use crate::meshing::mesh_trace;

    const X: P3 = [1.0, 0.0, 0.0];
    const Y: P3 = [0.0, 1.0, 0.0];
    const Z: P3 = [0.0, 0.0, 1.0];

    /// A unit-length trace in the middle of a large square, ending inside it.
    fn interior_trace(dirichlet_edge: bool) -> Network {
        let bc = if dirichlet_edge {
            BoundaryCondition::Dirichlet(LocalFn::constant(0.0))
        } else {
            BoundaryCondition::Neumann
        };
        let big =
            Fracture::rectangle(1, [0.0; 3], [X, Y], [-2.0, 2.0], [-2.0, 2.0], vec![BoundaryCondition::Neumann; 4])
                .unwrap();
        let small = Fracture::rectangle(2, [0.0, -0.5, 0.0], [Y, Z], [0.0, 1.0], [-1.0, 1.0], vec![bc; 4]).unwrap();
        build_network(vec![big, small]).unwrap()
    }

    fn total_area(b: &AuxBandMesh) -> f64 {
        (0..b.mesh.num_triangles()).map(|t| b.mesh.area(t)).sum()
    }

    #[test]
    fn fan_closed_band_counts() {
        let net = interior_trace(true);
        let t = net.trace(0);
        let sm = mesh_trace(t, 0.25, &net).unwrap();
        assert!(sm.endpoint_markers.iter().all(|m| m.is_dirichlet()));
        let band = build_aux_band(net.fracture(0), 0, t, 0, &sm, net.separation()).unwrap();
        let n = sm.num_elements();
        assert_eq!(band.mesh.num_triangles(), 4 * (n - 1));
        assert_eq!(band.num_free(), n - 1);
        assert!(band.zero_nodes[0] && band.zero_nodes[n]);
        // two rows of half-width 0.25 around the inner part, fans at the ends
        let expected = 2.0 * 0.25 * 0.5 + 4.0 * 0.5 * 0.25 * 0.25;
        assert!((total_area(&band) - expected).abs() < 1e-12);
    }

    #[test]
    fn free_interior_ends_get_caps() {
        let net = interior_trace(false);
        let t = net.trace(0);
        let sm = mesh_trace(t, 0.25, &net).unwrap();
        let band = build_aux_band(net.fracture(0), 0, t, 0, &sm, net.separation()).unwrap();
        let n = sm.num_elements();
        assert_eq!(band.num_free(), n + 1);
        assert_eq!(band.mesh.num_triangles(), 4 * n + 4);
        for p in band.mesh.nodes() {
            assert!(net.fracture(0).contains(*p, 1e-12));
        }
    }

    #[test]
    fn free_boundary_ends_slide_along_the_edge() {
        // trace crossing the whole small fracture: its ends lie on the small fracture's boundary
        let net = interior_trace(false);
        let t = net.trace(0);
        let sm = mesh_trace(t, 0.25, &net).unwrap();
        let f = net.fracture(1);
        let band = build_aux_band(f, 1, t, 1, &sm, net.separation()).unwrap();
        assert_eq!(band.num_free(), sm.num_nodes());
        assert_eq!(band.mesh.num_triangles(), 4 * sm.num_elements());
        for p in band.mesh.nodes() {
            assert!(f.contains(*p, 1e-12));
        }
        let area = total_area(&band);
        assert!((area - 2.0 * 0.25 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn restriction_to_trace_matches_segmesh_basis() {
        let net = interior_trace(true);
        let t = net.trace(0);
        let sm = mesh_trace(t, 0.2, &net).unwrap();
        let band = build_aux_band(net.fracture(0), 0, t, 0, &sm, net.separation()).unwrap();
        let param = t.params[0];
        let idx = band.free_index();
        let mut samples = sm.coords.clone();
        samples.extend(sm.coords.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for s in samples {
            let p = param.at(s);
            let (tri, bary) = band.mesh.locate(p).unwrap();
            for (l, &node) in band.free_nodes.iter().enumerate() {
                let mut seg_vals = vec![0.0; sm.num_nodes()];
                seg_vals[node] = 1.0;
                let mut eta = 0.0;
                for (k, &v) in band.mesh.triangles()[tri].iter().enumerate() {
                    if idx[v] == Some(l) {
                        eta += bary[k];
                    }
                }
                assert!((eta - sm.interpolate(&seg_vals, s)).abs() < 1e-12);
            }
        }
    }
}
