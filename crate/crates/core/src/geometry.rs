//! Fractures, traces and the network that ties them together.
//!
//! Every fracture carries its own orthonormal in-plane frame; finite element
//! work happens in those local 2D coordinates. A trace is stored once in 3D
//! and once per adjacent fracture as an affine map from arc length to the
//! fracture's local coordinates.

use std::fmt;
use std::sync::Arc;

use crate::error::{DfnError, Result};
use crate::vecmath::*;

/// A scalar function of fracture-local coordinates.
#[derive(Clone)]
pub struct LocalFn(Arc<dyn Fn(P2) -> f64 + Send + Sync>);

impl LocalFn {
    pub fn new(f: impl Fn(P2) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    #[inline]
    pub fn eval(&self, p: P2) -> f64 {
        (self.0)(p)
    }
}

impl fmt::Debug for LocalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LocalFn(..)")
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    Dirichlet(LocalFn),
    /// Homogeneous Neumann (no flow).
    Neumann,
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet(_))
    }
}

/// A planar convex polygonal fracture with a local frame.
#[derive(Debug, Clone)]
pub struct Fracture {
    id: usize,
    origin: P3,
    axes: [P3; 2],
    vertices: Vec<P2>,
    permeability: [[f64; 2]; 2],
    boundary_conditions: Vec<BoundaryCondition>,
    diameter: f64,
}

impl Fracture {
    /// Validates and builds a fracture. Edge `k` joins vertex `k` to vertex `k + 1`.
    pub fn new(
        id: usize,
        origin: P3,
        axes: [P3; 2],
        vertices: Vec<P2>,
        permeability: [[f64; 2]; 2],
        boundary_conditions: Vec<BoundaryCondition>,
    ) -> Result<Self> {
        let err = |msg: String| Err(DfnError::Geometry(format!("fracture {id}: {msg}")));
        let [a1, a2] = axes;
        for (label, v) in [("|axis1|", dot3(a1, a1)), ("|axis2|", dot3(a2, a2))] {
            if (v - 1.0).abs() > 1e-12 {
                return err(format!("{label}^2 = {v}, axes must be unit vectors"));
            }
        }
        if dot3(a1, a2).abs() > 1e-12 {
            return err("axes are not orthogonal".into());
        }
        let n = vertices.len();
        if n < 3 {
            return err(format!("polygon needs at least 3 vertices, got {n}"));
        }
        if boundary_conditions.len() != n {
            return err(format!("{} boundary conditions for {n} edges", boundary_conditions.len()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return err("non-finite vertex coordinate".into());
        }
        let area = polygon_area(&vertices);
        if area <= 0.0 {
            return err("polygon must be positively oriented with nonzero area".into());
        }
        let mut turning = 0.0;
        for k in 0..n {
            let e0 = sub2(vertices[(k + 1) % n], vertices[k]);
            let e1 = sub2(vertices[(k + 2) % n], vertices[(k + 1) % n]);
            let c = cross2(e0, e1);
            if c <= 1e-14 * norm2(e0) * norm2(e1) {
                return err(format!("polygon is not strictly convex at vertex {}", (k + 1) % n));
            }
            turning += c.atan2(dot2(e0, e1));
        }
        if (turning - std::f64::consts::TAU).abs() > 1e-9 {
            return err("polygon is not simple".into());
        }
        let k = permeability;
        let scale = k[0][0].abs().max(k[1][1].abs()).max(k[0][1].abs());
        if (k[0][1] - k[1][0]).abs() > 1e-12 * scale {
            return err("permeability tensor is not symmetric".into());
        }
        if !(k[0][0] > 0.0 && k[0][0] * k[1][1] - k[0][1] * k[1][0] > 0.0) {
            return err("permeability tensor is not positive definite".into());
        }
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max(dist2(vertices[i], vertices[j]));
            }
        }
        Ok(Self { id, origin, axes, vertices, permeability, boundary_conditions, diameter })
    }

    /// Axis-aligned rectangle `[u0, u1] x [v0, v1]` in the local frame.
    /// Edges are numbered bottom, right, top, left.
    pub fn rectangle(
        id: usize,
        origin: P3,
        axes: [P3; 2],
        u: [f64; 2],
        v: [f64; 2],
        boundary_conditions: Vec<BoundaryCondition>,
    ) -> Result<Self> {
        let vertices = vec![[u[0], v[0]], [u[1], v[0]], [u[1], v[1]], [u[0], v[1]]];
        Self::new(id, origin, axes, vertices, [[1.0, 0.0], [0.0, 1.0]], boundary_conditions)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn origin(&self) -> P3 {
        self.origin
    }

    pub fn axes(&self) -> [P3; 2] {
        self.axes
    }

    pub fn vertices(&self) -> &[P2] {
        &self.vertices
    }

    pub fn permeability(&self) -> [[f64; 2]; 2] {
        self.permeability
    }

    pub fn boundary_conditions(&self) -> &[BoundaryCondition] {
        &self.boundary_conditions
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn normal(&self) -> P3 {
        cross3(self.axes[0], self.axes[1])
    }

    pub fn to_global(&self, p: P2) -> P3 {
        add3(self.origin, add3(scale3(self.axes[0], p[0]), scale3(self.axes[1], p[1])))
    }

    /// Orthogonal projection onto the fracture plane, in local coordinates.
    pub fn to_local(&self, x: P3) -> P2 {
        let r = sub3(x, self.origin);
        [dot3(r, self.axes[0]), dot3(r, self.axes[1])]
    }

    /// Expresses a global direction in the local frame.
    pub fn direction_to_local(&self, d: P3) -> P2 {
        [dot3(d, self.axes[0]), dot3(d, self.axes[1])]
    }

    pub fn plane_distance(&self, x: P3) -> f64 {
        dot3(sub3(x, self.origin), self.normal()).abs()
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge(&self, k: usize) -> (P2, P2) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    /// True when `p` lies in the closed polygon, up to `tol` (a length).
    pub fn contains(&self, p: P2, tol: f64) -> bool {
        (0..self.num_edges()).all(|k| {
            let (a, b) = self.edge(k);
            orient2(a, b, p) / dist2(a, b) >= -tol
        })
    }

    /// Distance from an interior point to the polygon boundary.
    pub fn boundary_distance(&self, p: P2) -> f64 {
        (0..self.num_edges())
            .map(|k| {
                let (a, b) = self.edge(k);
                point_segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Default tolerance for on-boundary tests.
    pub fn boundary_tol(&self) -> f64 {
        1e-10 * self.diameter
    }

    /// Indices of the polygon edges passing within `tol` of `p`.
    pub fn edges_containing(&self, p: P2, tol: f64) -> Vec<usize> {
        (0..self.num_edges())
            .filter(|&k| {
                let (a, b) = self.edge(k);
                point_segment_distance(p, a, b) <= tol
            })
            .collect()
    }

    /// Dirichlet value at a boundary point, taken from the first Dirichlet edge containing it.
    pub fn dirichlet_value(&self, p: P2) -> Option<f64> {
        self.edges_containing(p, self.boundary_tol()).into_iter().find_map(|k| match &self.boundary_conditions[k] {
            BoundaryCondition::Dirichlet(f) => Some(f.eval(p)),
            BoundaryCondition::Neumann => None,
        })
    }

    pub fn has_dirichlet(&self) -> bool {
        self.boundary_conditions.iter().any(BoundaryCondition::is_dirichlet)
    }

    /// Parameter interval of the line `p0 + s d` inside the closed polygon.
    pub fn clip_line(&self, p0: P2, d: P2) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for k in 0..self.num_edges() {
            let (a, b) = self.edge(k);
            let e = sub2(b, a);
            // inside half-plane: cross(e, p - a) >= 0
            let f0 = cross2(e, sub2(p0, a));
            let fd = cross2(e, d);
            if fd.abs() <= 1e-15 * norm2(e) * norm2(d) {
                if f0 < -1e-12 * norm2(e) * self.diameter {
                    return None;
                }
                continue;
            }
            let s = -f0 / fd;
            if fd > 0.0 {
                lo = lo.max(s);
            } else {
                hi = hi.min(s);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Signed area of a polygon (positive for counter-clockwise order).
pub fn polygon_area(v: &[P2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|k| cross2(v[k], v[(k + 1) % n])).sum::<f64>()
}

/// Clips the convex polygon `subject` against the convex, counter-clockwise `clip`.
pub fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out: Vec<P2> = subject.to_vec();
    let n = clip.len();
    for k in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % n];
        let input = std::mem::take(&mut out);
        let m = input.len();
        for i in 0..m {
            let p = input[i];
            let q = input[(i + 1) % m];
            let fp = orient2(a, b, p);
            let fq = orient2(a, b, q);
            if fp >= 0.0 {
                out.push(p);
            }
            if (fp >= 0.0) != (fq >= 0.0) {
                out.push(lerp2(p, q, fp / (fp - fq)));
            }
        }
    }
    out
}

/// Affine map `s -> start + s * dir` from trace arc length to fracture-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParam {
    pub start: P2,
    /// Unit direction in the local frame.
    pub dir: P2,
}

impl TraceParam {
    #[inline]
    pub fn at(&self, s: f64) -> P2 {
        add2(self.start, scale2(self.dir, s))
    }

    /// In-plane unit normal, pointing to the left of the trace direction.
    pub fn normal(&self) -> P2 {
        perp(self.dir)
    }
}

/// Intersection segment of two fractures.
#[derive(Debug, Clone)]
pub struct Trace {
    pub id: usize,
    /// Ids of the two fractures, lower first.
    pub fracture_ids: [usize; 2],
    pub endpoints: [P3; 2],
    pub length: f64,
    /// Local parametrizations on the two fractures, in the order of `fracture_ids`.
    pub params: [TraceParam; 2],
}

impl Trace {
    pub fn point(&self, s: f64) -> P3 {
        let t = s / self.length;
        add3(self.endpoints[0], scale3(sub3(self.endpoints[1], self.endpoints[0]), t))
    }
}

/// Computes the trace shared by two fractures, if any.
///
/// The endpoints are ordered so that the local parametrization on the lower-id
/// fracture runs with increasing first coordinate (ties: increasing second).
pub fn intersect_fractures(a: &Fracture, b: &Fracture) -> Option<Trace> {
    if a.id == b.id {
        return None;
    }
    let (lo, hi) = if a.id < b.id { (a, b) } else { (b, a) };
    let n1 = lo.normal();
    let n2 = hi.normal();
    let d = cross3(n1, n2);
    let dn = norm3(d);
    if dn < 1e-12 {
        return None;
    }
    let c1 = dot3(n1, lo.origin);
    let c2 = dot3(n2, hi.origin);
    let p0 = scale3(add3(scale3(cross3(n2, d), c1), scale3(cross3(d, n1), c2)), 1.0 / (dn * dn));
    let dir = scale3(d, 1.0 / dn);

    let i1 = lo.clip_line(lo.to_local(p0), lo.direction_to_local(dir))?;
    let i2 = hi.clip_line(hi.to_local(p0), hi.direction_to_local(dir))?;
    let s0 = i1.0.max(i2.0);
    let s1 = i1.1.min(i2.1);
    let scale = lo.diameter.max(hi.diameter);
    if !(s1 - s0 >= 1e-12 * scale) {
        return None;
    }
    let mut e0 = add3(p0, scale3(dir, s0));
    let mut e1 = add3(p0, scale3(dir, s1));
    let length = s1 - s0;
    let delta = sub2(lo.to_local(e1), lo.to_local(e0));
    let tie = 1e-12 * length;
    if delta[0] < -tie || (delta[0].abs() <= tie && delta[1] < 0.0) {
        std::mem::swap(&mut e0, &mut e1);
    }
    let param = |f: &Fracture| {
        let start = f.to_local(e0);
        let dir = scale2(sub2(f.to_local(e1), start), 1.0 / length);
        TraceParam { start, dir }
    };
    Some(Trace { id: 0, fracture_ids: [lo.id, hi.id], endpoints: [e0, e1], length, params: [param(lo), param(hi)] })
}

/// Fractures plus all their pairwise traces.
#[derive(Debug, Clone)]
pub struct Network {
    fractures: Vec<Fracture>,
    traces: Vec<Trace>,
    traces_of_fracture: Vec<Vec<usize>>,
    fractures_of_trace: Vec<[usize; 2]>,
    separation: f64,
}

impl Network {
    /// Fractures sorted by id.
    pub fn fractures(&self) -> &[Fracture] {
        &self.fractures
    }

    pub fn fracture(&self, index: usize) -> &Fracture {
        &self.fractures[index]
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn trace(&self, index: usize) -> &Trace {
        &self.traces[index]
    }

    /// Trace indices touching the fracture at `index`.
    pub fn traces_of_fracture(&self, index: usize) -> &[usize] {
        &self.traces_of_fracture[index]
    }

    /// Fracture indices (lower id first) of the trace at `index`.
    pub fn fractures_of_trace(&self, index: usize) -> [usize; 2] {
        self.fractures_of_trace[index]
    }

    /// Position of `fracture` in the trace's fracture pair.
    pub fn side_of(&self, trace: usize, fracture: usize) -> Option<usize> {
        self.fractures_of_trace[trace].iter().position(|&f| f == fracture)
    }

    pub fn index_of_id(&self, id: usize) -> Option<usize> {
        self.fractures.binary_search_by_key(&id, |f| f.id).ok()
    }

    /// Minimum distance between distinct traces (`inf` with fewer than two traces).
    pub fn separation(&self) -> f64 {
        self.separation
    }
}

pub fn build_network(mut fractures: Vec<Fracture>) -> Result<Network> {
    if fractures.is_empty() {
        return Err(DfnError::Geometry("a network needs at least one fracture".into()));
    }
    fractures.sort_by_key(|f| f.id);
    if let Some(w) = fractures.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(DfnError::Geometry(format!("duplicate fracture id {}", w[0].id)));
    }
    let nf = fractures.len();
    let mut traces = Vec::new();
    let mut traces_of_fracture = vec![Vec::new(); nf];
    let mut fractures_of_trace = Vec::new();
    for i in 0..nf {
        for j in i + 1..nf {
            let (a, b) = (&fractures[i], &fractures[j]);
            check_coplanar_overlap(a, b)?;
            if let Some(mut t) = intersect_fractures(a, b) {
                t.id = traces.len();
                traces_of_fracture[i].push(t.id);
                traces_of_fracture[j].push(t.id);
                fractures_of_trace.push([i, j]);
                traces.push(t);
            }
        }
    }
    let mut separation = f64::INFINITY;
    for m in 0..traces.len() {
        for k in m + 1..traces.len() {
            let (s, t) = (&traces[m], &traces[k]);
            let d = segment_segment_distance3(s.endpoints[0], s.endpoints[1], t.endpoints[0], t.endpoints[1]);
            separation = separation.min(d);
        }
    }
    Ok(Network { fractures, traces, traces_of_fracture, fractures_of_trace, separation })
}

fn check_coplanar_overlap(a: &Fracture, b: &Fracture) -> Result<()> {
    if norm3(cross3(a.normal(), b.normal())) >= 1e-12 {
        return Ok(());
    }
    let scale = a.diameter.max(b.diameter);
    if a.plane_distance(b.origin) > 1e-12 * scale {
        return Ok(());
    }
    let mut other: Vec<P2> = b.vertices.iter().map(|&v| a.to_local(b.to_global(v))).collect();
    if polygon_area(&other) < 0.0 {
        other.reverse();
    }
    let overlap = clip_convex(&a.vertices, &other);
    if overlap.len() >= 3 && polygon_area(&overlap) > 1e-12 * scale * scale {
        return Err(DfnError::Geometry(format!("fractures {} and {} are coplanar and overlap", a.id, b.id)));
    }
    Ok(())
}

pub fn check_separation(network: &Network, gamma0: f64) -> bool {
    network.separation >= gamma0
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: P3 = [1.0, 0.0, 0.0];
    const Y: P3 = [0.0, 1.0, 0.0];
    const Z: P3 = [0.0, 0.0, 1.0];

    fn neumann4() -> Vec<BoundaryCondition> {
        vec![BoundaryCondition::Neumann; 4]
    }

    fn horizontal(id: usize, z: f64) -> Fracture {
        Fracture::rectangle(id, [0.0, 0.0, z], [X, Y], [-1.0, 1.0], [0.0, 1.0], neumann4()).unwrap()
    }

    fn vertical(id: usize, x: f64) -> Fracture {
        Fracture::rectangle(id, [x, 0.0, 0.0], [Y, Z], [0.0, 1.0], [-0.5, 0.5], neumann4()).unwrap()
    }

    #[test]
    fn rejects_bad_fractures() {
        let bad_axes = Fracture::rectangle(0, [0.0; 3], [X, [0.6, 0.8, 0.0]], [0.0, 1.0], [0.0, 1.0], neumann4());
        assert!(matches!(bad_axes, Err(DfnError::Geometry(_))));
        let cw = Fracture::new(
            0,
            [0.0; 3],
            [X, Y],
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
            [[1.0, 0.0], [0.0, 1.0]],
            neumann4(),
        );
        assert!(cw.is_err());
        let indefinite = Fracture::new(
            0,
            [0.0; 3],
            [X, Y],
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            [[1.0, 2.0], [2.0, 1.0]],
            neumann4(),
        );
        assert!(indefinite.is_err());
    }

    #[test]
    fn perpendicular_fractures_meet_along_the_y_axis() {
        let f1 = horizontal(1, 0.0);
        let f2 = Fracture::rectangle(2, [0.0; 3], [Z, Y], [-1.0, 1.0], [0.0, 1.0], neumann4()).unwrap();
        let t = intersect_fractures(&f1, &f2).unwrap();
        assert!((t.length - 1.0).abs() < 1e-14);
        assert_eq!(t.fracture_ids, [1, 2]);
        for s in [0.0, 0.3, 1.0] {
            let x = t.point(s);
            assert!(x[0].abs() < 1e-14 && x[2].abs() < 1e-14);
            for (k, f) in [&f1, &f2].into_iter().enumerate() {
                let back = f.to_global(t.params[k].at(s));
                assert!(norm3(sub3(back, x)) < 1e-12);
            }
        }
        // swapped arguments give the same trace
        let u = intersect_fractures(&f2, &f1).unwrap();
        assert_eq!(u.endpoints, t.endpoints);
    }

    #[test]
    fn parallel_planes_do_not_intersect() {
        assert!(intersect_fractures(&horizontal(0, 0.0), &horizontal(1, 1.0)).is_none());
    }

    #[test]
    fn offset_vertical_fracture_trace() {
        let t = intersect_fractures(&horizontal(1, 0.0), &vertical(2, 0.2)).unwrap();
        for e in t.endpoints {
            assert!((e[0] - 0.2).abs() < 1e-14 && e[2].abs() < 1e-14);
        }
        assert!((t.endpoints[0][1]).abs() < 1e-14 && (t.endpoints[1][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn separation_of_parallel_traces() {
        for d in [0.4, 0.05] {
            let net = build_network(vec![horizontal(1, 0.0), vertical(2, -d / 2.0), vertical(3, d / 2.0)]).unwrap();
            assert_eq!(net.traces().len(), 2);
            assert!((net.separation() - d).abs() < 1e-12);
            assert!(check_separation(&net, 0.3) == (d > 0.3));
            assert_eq!(net.fractures_of_trace(1), [0, 2]);
            assert_eq!(net.traces_of_fracture(0), &[0, 1]);
        }
        let single = build_network(vec![horizontal(1, 0.0), vertical(2, 0.0)]).unwrap();
        assert!(single.separation().is_infinite());
        assert!(check_separation(&single, 1e9));
    }

    #[test]
    fn coplanar_overlap_is_rejected() {
        let a = horizontal(0, 0.0);
        let b = Fracture::rectangle(1, [0.5, 0.5, 0.0], [X, Y], [0.0, 1.0], [0.0, 1.0], neumann4()).unwrap();
        assert!(build_network(vec![a.clone(), b]).is_err());
        let far = Fracture::rectangle(1, [5.0, 0.0, 0.0], [X, Y], [0.0, 1.0], [0.0, 1.0], neumann4()).unwrap();
        assert_eq!(build_network(vec![a, far]).unwrap().traces().len(), 0);
    }

    #[test]
    fn clip_line_through_square() {
        let f = horizontal(0, 0.0);
        let (lo, hi) = f.clip_line([0.0, 0.5], [1.0, 0.0]).unwrap();
        assert!((lo + 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        assert!(f.clip_line([0.0, 2.0], [1.0, 0.0]).is_none());
    }
}
