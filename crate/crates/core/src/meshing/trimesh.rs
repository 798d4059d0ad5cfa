use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DfnError, Result};
use crate::geometry::{BoundaryCondition, Fracture};
use crate::vecmath::*;

/// Lower bound on `area / meshsize^2` for generated triangles.
pub const SHAPE_FLOOR: f64 = 1e-3;
/// Upper bound on `max edge / min edge` for generated fracture meshes.
pub const QUASI_UNIFORMITY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeMarker {
    Interior,
    Dirichlet,
    Neumann,
}

/// A mesh edge. `nodes[0] -> nodes[1]` runs counter-clockwise around `left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub nodes: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Options for fracture mesh generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Interior node perturbation as a fraction of the grid spacing, in `[0, 0.25]`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { jitter: 0.0, seed: 0 }
    }
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Debug, Clone)]
struct Locator {
    min: P2,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(nodes: &[P2], triangles: &[[usize; 3]]) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in nodes {
            for k in 0..2 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        if triangles.is_empty() {
            return Self { min: [0.0; 2], cell: 1.0, dims: [1, 1], buckets: vec![Vec::new()] };
        }
        let ext = [(max[0] - min[0]).max(1e-300), (max[1] - min[1]).max(1e-300)];
        let cell = ((ext[0] * ext[1] / triangles.len() as f64).sqrt() * 1.5).max(ext[0].max(ext[1]) / 2048.0);
        let dims = [((ext[0] / cell).ceil() as usize).max(1), ((ext[1] / cell).ceil() as usize).max(1)];
        let mut loc = Self { min, cell, dims, buckets: vec![Vec::new(); dims[0] * dims[1]] };
        for (t, tri) in triangles.iter().enumerate() {
            let (lo, hi) = bbox(tri.map(|i| nodes[i]).as_slice());
            let (i0, j0) = loc.cell_of(lo);
            let (i1, j1) = loc.cell_of(hi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * dims[0] + i].push(t);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: P2) -> (usize, usize) {
        let f = |k: usize| {
            let x = ((p[k] - self.min[k]) / self.cell).floor();
            (x.max(0.0) as usize).min(self.dims[k] - 1)
        };
        (f(0), f(1))
    }

    fn query(&self, lo: P2, hi: P2, out: &mut Vec<usize>) {
        let (i0, j0) = self.cell_of(lo);
        let (i1, j1) = self.cell_of(hi);
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend_from_slice(&self.buckets[j * self.dims[0] + i]);
            }
        }
    }
}

pub(crate) fn bbox(pts: &[P2]) -> (P2, P2) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Conforming P1 triangulation in fracture-local coordinates.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<P2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `tri_edges[t][k]` is the edge joining local vertices `k` and `k + 1`.
    tri_edges: Vec<[usize; 3]>,
    node_markers: Vec<NodeMarker>,
    /// Polygon edge carrying each mesh boundary edge (None for interior edges).
    polygon_edge: Vec<Option<usize>>,
    meshsize: f64,
    locator: Locator,
}

impl TriMesh {
    /// Builds a mesh from raw nodes and triangles. Triangles are reoriented to be
    /// counter-clockwise; all nodes start as interior and no edge is attributed to a polygon.
    pub fn new(nodes: Vec<P2>, mut triangles: Vec<[usize; 3]>, meshsize: f64) -> Result<Self> {
        for tri in triangles.iter_mut() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(DfnError::Mesh(format!("triangle {tri:?} references a missing node")));
            }
            let a = orient2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if a == 0.0 || !a.is_finite() {
                return Err(DfnError::Mesh(format!("degenerate triangle {tri:?}")));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }
        let (edges, tri_edges) = build_edges(nodes.len(), &triangles)?;
        let locator = Locator::new(&nodes, &triangles);
        let n = nodes.len();
        let ne = edges.len();
        Ok(Self {
            nodes,
            triangles,
            edges,
            tri_edges,
            node_markers: vec![NodeMarker::Interior; n],
            polygon_edge: vec![None; ne],
            meshsize,
            locator,
        })
    }

    /// Tags boundary nodes and edges from the fracture's boundary conditions.
    /// A node shared by a Dirichlet and a Neumann edge is Dirichlet.
    pub fn mark_boundary(&mut self, f: &Fracture) -> Result<()> {
        let tol = f.boundary_tol();
        for (i, p) in self.nodes.iter().enumerate() {
            let on = f.edges_containing(*p, tol);
            self.node_markers[i] = if on.is_empty() {
                NodeMarker::Interior
            } else if on.iter().any(|&k| f.boundary_conditions()[k].is_dirichlet()) {
                NodeMarker::Dirichlet
            } else {
                NodeMarker::Neumann
            };
        }
        for (e, edge) in self.edges.iter().enumerate() {
            if !edge.is_boundary() {
                continue;
            }
            let mid = lerp2(self.nodes[edge.nodes[0]], self.nodes[edge.nodes[1]], 0.5);
            let on = f.edges_containing(mid, tol);
            match on.first() {
                Some(&k) => self.polygon_edge[e] = Some(k),
                None => {
                    return Err(DfnError::Mesh(format!(
                        "boundary edge {e} does not lie on the boundary of fracture {}",
                        f.id()
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[P2] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> P2 {
        self.nodes[i]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn tri_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn node_markers(&self) -> &[NodeMarker] {
        &self.node_markers
    }

    pub fn polygon_edge(&self, e: usize) -> Option<usize> {
        self.polygon_edge[e]
    }

    pub fn meshsize(&self) -> f64 {
        self.meshsize
    }

    pub fn vertices(&self, t: usize) -> [P2; 3] {
        self.triangles[t].map(|i| self.nodes[i])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * orient2(a, b, c)
    }

    /// Gradients of the three local hat functions on triangle `t`.
    pub fn gradients(&self, t: usize) -> [P2; 3] {
        hat_gradients(self.vertices(t))
    }

    pub fn barycentric(&self, t: usize, p: P2) -> [f64; 3] {
        barycentric(self.vertices(t), p)
    }

    pub fn centroid(&self, t: usize) -> P2 {
        let [a, b, c] = self.vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].nodes;
        dist2(self.nodes[a], self.nodes[b])
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        dist2(a, b).max(dist2(b, c)).max(dist2(c, a))
    }

    /// Triangles whose bounding boxes may overlap the box `[lo, hi]`; sorted, no duplicates.
    pub fn candidates(&self, lo: P2, hi: P2) -> Vec<usize> {
        let mut out = Vec::new();
        self.locator.query(lo, hi, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Triangle containing `p` (closed, up to a relative tolerance) and its barycentric coordinates.
    pub fn locate(&self, p: P2) -> Option<(usize, [f64; 3])> {
        let mut cand = Vec::new();
        self.locator.query(p, p, &mut cand);
        let mut best: Option<(usize, [f64; 3])> = None;
        let mut best_min = f64::NEG_INFINITY;
        for t in cand {
            let b = self.barycentric(t, p);
            let m = b[0].min(b[1]).min(b[2]);
            if m > best_min {
                best_min = m;
                best = Some((t, b));
            }
        }
        best.filter(|_| best_min >= -1e-10)
    }

    /// Evaluates a nodal P1 field at `p`.
    pub fn interpolate(&self, values: &[f64], p: P2) -> Option<f64> {
        let (t, b) = self.locate(p)?;
        let tri = self.triangles[t];
        Some((0..3).map(|k| b[k] * values[tri[k]]).sum())
    }

    pub fn bbox(&self) -> (P2, P2) {
        bbox(&self.nodes)
    }

    /// Checks area floor, edge adjacency and quasi-uniformity.
    pub fn check_quality(&self) -> Result<()> {
        let floor = SHAPE_FLOOR * self.meshsize * self.meshsize;
        for t in 0..self.num_triangles() {
            if self.area(t) < floor {
                return Err(DfnError::Mesh(format!(
                    "triangle {t} has area {} below the shape floor {floor}",
                    self.area(t)
                )));
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for e in 0..self.edges.len() {
            let l = self.edge_length(e);
            lo = lo.min(l);
            hi = hi.max(l);
        }
        if hi > QUASI_UNIFORMITY * lo {
            return Err(DfnError::Mesh(format!("edge length ratio {} exceeds {QUASI_UNIFORMITY}", hi / lo)));
        }
        Ok(())
    }

    /// Plain-text dump: `nodes:` lines `u v marker`, then `triangles:` lines `a b c`.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from("nodes:\n");
        for (p, m) in self.nodes.iter().zip(&self.node_markers) {
            let tag = match m {
                NodeMarker::Interior => "interior",
                NodeMarker::Dirichlet => "dirichlet",
                NodeMarker::Neumann => "neumann",
            };
            let _ = writeln!(s, "{:.17e} {:.17e} {tag}", p[0], p[1]);
        }
        s.push_str("triangles:\n");
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

pub fn hat_gradients([a, b, c]: [P2; 3]) -> [P2; 3] {
    let det = orient2(a, b, c);
    [scale2(perp(sub2(b, c)), -1.0 / det), scale2(perp(sub2(c, a)), -1.0 / det), scale2(perp(sub2(a, b)), -1.0 / det)]
}

pub fn barycentric([a, b, c]: [P2; 3], p: P2) -> [f64; 3] {
    let det = orient2(a, b, c);
    let l1 = orient2(p, b, c) / det;
    let l2 = orient2(a, p, c) / det;
    [l1, l2, 1.0 - l1 - l2]
}

fn build_edges(num_nodes: usize, triangles: &[[usize; 3]]) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    use std::collections::HashMap;
    let mut map: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
    let mut edges: Vec<Edge> = Vec::new();
    let mut tri_edges = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut te = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            debug_assert!(a < num_nodes && b < num_nodes);
            let key = (a.min(b), a.max(b));
            match map.get(&key) {
                Some(&e) => {
                    let edge = &mut edges[e];
                    if edge.right.is_some() || edge.nodes != [b, a] {
                        return Err(DfnError::Mesh(format!("edge ({a}, {b}) is not shared consistently")));
                    }
                    edge.right = Some(t);
                    te[k] = e;
                }
                None => {
                    map.insert(key, edges.len());
                    te[k] = edges.len();
                    edges.push(Edge { nodes: [a, b], left: t, right: None });
                }
            }
        }
        tri_edges.push(te);
    }
    Ok((edges, tri_edges))
}

/// Triangulates a fracture without regard to trace positions.
///
/// Rectangles get a structured grid with `n = ceil(L / delta)` cells per side,
/// each cell split along its diagonal. Other convex polygons get a centroid fan
/// followed by uniform refinement until every edge is at most `delta`.
pub fn triangulate_fracture(f: &Fracture, delta: f64, options: MeshOptions) -> Result<TriMesh> {
    if !(delta > 0.0 && delta < f.diameter()) {
        return Err(DfnError::Mesh(format!(
            "mesh size {delta} must be positive and below the fracture diameter {}",
            f.diameter()
        )));
    }
    if !(0.0..=0.25).contains(&options.jitter) {
        return Err(DfnError::Mesh(format!("jitter {} outside [0, 0.25]", options.jitter)));
    }
    let (nodes, triangles, spacing) = match rectangle_frame(f.vertices()) {
        Some((o, e1, e2)) => structured(o, e1, e2, delta),
        None => fan_refined(f.vertices(), delta),
    };
    let mut mesh = TriMesh::new(nodes, triangles, delta)?;
    mesh.mark_boundary(f)?;
    if options.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(f.id() as u64);
        let amp = options.jitter * spacing;
        for i in 0..mesh.nodes.len() {
            let dx: f64 = rng.random_range(-1.0..=1.0);
            let dy: f64 = rng.random_range(-1.0..=1.0);
            if mesh.node_markers[i] == NodeMarker::Interior {
                mesh.nodes[i] = add2(mesh.nodes[i], [amp * dx, amp * dy]);
            }
        }
        if (0..mesh.num_triangles()).any(|t| mesh.area(t) <= 0.0) {
            return Err(DfnError::Mesh("jitter inverted a triangle".into()));
        }
        mesh.locator = Locator::new(&mesh.nodes, &mesh.triangles);
    }
    mesh.check_quality()?;
    Ok(mesh)
}

/// Detects a rectangle `v0, v0 + e1, v0 + e1 + e2, v0 + e2`.
fn rectangle_frame(v: &[P2]) -> Option<(P2, P2, P2)> {
    if v.len() != 4 {
        return None;
    }
    let e1 = sub2(v[1], v[0]);
    let e2 = sub2(v[3], v[0]);
    let scale = norm2(e1) * norm2(e2);
    let closes = dist2(add2(v[1], e2), v[2]) <= 1e-12 * (norm2(e1) + norm2(e2));
    (dot2(e1, e2).abs() <= 1e-12 * scale && closes).then_some((v[0], e1, e2))
}

fn cells(len: f64, delta: f64) -> usize {
    ((len / delta) - 1e-9).ceil().max(1.0) as usize
}

fn structured(o: P2, e1: P2, e2: P2, delta: f64) -> (Vec<P2>, Vec<[usize; 3]>, f64) {
    let nx = cells(norm2(e1), delta);
    let ny = cells(norm2(e2), delta);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let s = i as f64 / nx as f64;
            let t = j as f64 / ny as f64;
            nodes.push(add2(o, add2(scale2(e1, s), scale2(e2, t))));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let spacing = (norm2(e1) / nx as f64).min(norm2(e2) / ny as f64);
    (nodes, tris, spacing)
}

fn fan_refined(v: &[P2], delta: f64) -> (Vec<P2>, Vec<[usize; 3]>, f64) {
    use std::collections::HashMap;
    let n = v.len();
    let c = scale2(v.iter().fold([0.0, 0.0], |acc, p| add2(acc, *p)), 1.0 / n as f64);
    let mut nodes: Vec<P2> = v.to_vec();
    nodes.push(c);
    let mut tris: Vec<[usize; 3]> = (0..n).map(|k| [k, (k + 1) % n, n]).collect();
    let longest = |nodes: &[P2], tris: &[[usize; 3]]| {
        tris.iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| dist2(nodes[a], nodes[b]))
            .fold(0.0, f64::max)
    };
    while longest(&nodes, &tris) > delta * (1.0 + 1e-9) {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<P2>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                nodes.push(lerp2(nodes[a], nodes[b], 0.5));
                nodes.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut nodes);
            let bc = midpoint(b, c, &mut nodes);
            let ca = midpoint(c, a, &mut nodes);
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    let shortest = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
        .map(|(a, b)| dist2(nodes[a], nodes[b]))
        .fold(f64::INFINITY, f64::min);
    (nodes, tris, shortest)
}

/// True when the fracture edge attached to mesh edge `e` carries a Neumann condition.
pub fn is_neumann_edge(mesh: &TriMesh, f: &Fracture, e: usize) -> bool {
    mesh.polygon_edge(e).is_some_and(|k| matches!(f.boundary_conditions()[k], BoundaryCondition::Neumann))
}
