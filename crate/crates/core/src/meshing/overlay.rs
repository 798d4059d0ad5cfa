use crate::error::{DfnError, Result};
use crate::meshing::{SegMesh, TriMesh};
use crate::vecmath::*;

/// A mesh taking part in a segment overlay.
#[derive(Debug, Clone, Copy)]
pub enum OverlayMesh<'a> {
    Tri(&'a TriMesh),
    /// A trace mesh; `span` gives the arc-length coordinates of the segment endpoints on it.
    Seg {
        mesh: &'a SegMesh,
        span: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayPiece {
    /// Arc length from the segment start.
    pub t0: f64,
    pub t1: f64,
    /// Containing cell (triangle or element index), one per participating mesh.
    pub cells: Vec<usize>,
}

impl OverlayPiece {
    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }
}

#[derive(Debug, Clone)]
pub struct OverlaySegment {
    pub start: P2,
    pub end: P2,
    pub length: f64,
    pub pieces: Vec<OverlayPiece>,
}

impl OverlaySegment {
    pub fn point(&self, t: f64) -> P2 {
        lerp2(self.start, self.end, t / self.length)
    }
}

/// Parameter interval `[lo, hi] ⊂ [0, 1]` of `a + τ (b - a)` inside the closed triangle.
fn clip_to_triangle(v: [P2; 3], a: P2, b: P2) -> Option<(f64, f64)> {
    let d = sub2(b, a);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let scale = norm2(d);
    for k in 0..3 {
        let p = v[k];
        let q = v[(k + 1) % 3];
        let e = sub2(q, p);
        let f0 = cross2(e, sub2(a, p));
        let fd = cross2(e, d);
        let el = norm2(e);
        if fd.abs() <= 1e-14 * el * scale {
            if f0 < -1e-12 * el * el.max(scale) {
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

/// Triangles of `mesh` meeting the segment, with their clipped parameter intervals.
fn crossings(mesh: &TriMesh, a: P2, b: P2) -> Vec<(usize, f64, f64)> {
    let len = dist2(a, b);
    let chunks = ((len / mesh.meshsize().max(1e-300)).ceil() as usize).clamp(1, 1 << 16);
    let mut cand = Vec::new();
    for c in 0..chunks {
        let p = lerp2(a, b, c as f64 / chunks as f64);
        let q = lerp2(a, b, (c + 1) as f64 / chunks as f64);
        let lo = [p[0].min(q[0]), p[1].min(q[1])];
        let hi = [p[0].max(q[0]), p[1].max(q[1])];
        cand.extend(mesh.candidates(lo, hi));
    }
    cand.sort_unstable();
    cand.dedup();
    cand.into_iter().filter_map(|t| clip_to_triangle(mesh.vertices(t), a, b).map(|(lo, hi)| (t, lo, hi))).collect()
}

/// Picks the triangle containing the parameter `tau` among clipped candidates.
/// If the segment runs along a mesh edge, the triangle left of the segment wins.
fn pick(mesh: &TriMesh, hits: &[(usize, f64, f64)], a: P2, b: P2, tau: f64, tol: f64) -> Option<usize> {
    let d = sub2(b, a);
    let mut best: Option<(usize, f64)> = None;
    for &(t, lo, hi) in hits {
        if tau < lo - tol || tau > hi + tol {
            continue;
        }
        let side = cross2(d, sub2(mesh.centroid(t), a));
        if best.is_none_or(|(_, s)| side > s) {
            best = Some((t, side));
        }
    }
    best.map(|(t, _)| t)
}

fn dedup_sorted(mut v: Vec<f64>, tol: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

/// Splits the segment `[a, b]` at every crossing with the given meshes.
///
/// Breakpoints closer than `1e-12 * length` are merged. Every piece is assigned
/// one cell per mesh; a piece outside some mesh is an error.
pub fn overlay_segment(a: P2, b: P2, meshes: &[OverlayMesh<'_>]) -> Result<OverlaySegment> {
    let length = dist2(a, b);
    if length == 0.0 {
        return Err(DfnError::Overlay("zero-length segment".into()));
    }
    let tol = 1e-12;
    let mut taus = vec![0.0, 1.0];
    let mut hits = Vec::with_capacity(meshes.len());
    for m in meshes {
        match *m {
            OverlayMesh::Tri(mesh) => {
                let h = crossings(mesh, a, b);
                for &(_, lo, hi) in &h {
                    taus.push(lo);
                    taus.push(hi);
                }
                hits.push(h);
            }
            OverlayMesh::Seg { mesh, span } => {
                let w = span[1] - span[0];
                for &c in &mesh.coords {
                    let tau = (c - span[0]) / w;
                    if tau > 0.0 && tau < 1.0 {
                        taus.push(tau);
                    }
                }
                hits.push(Vec::new());
            }
        }
    }
    let taus = dedup_sorted(taus.into_iter().map(|t| t.clamp(0.0, 1.0)).collect(), tol);
    let mut pieces = Vec::with_capacity(taus.len());
    for w in taus.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut cells = Vec::with_capacity(meshes.len());
        for (m, h) in meshes.iter().zip(&hits) {
            let cell = match *m {
                OverlayMesh::Tri(mesh) => pick(mesh, h, a, b, mid, tol),
                OverlayMesh::Seg { mesh, span } => {
                    let s = span[0] + mid * (span[1] - span[0]);
                    (s >= -tol * length && s <= mesh.length() * (1.0 + tol)).then(|| mesh.locate(s).0)
                }
            };
            match cell {
                Some(c) => cells.push(c),
                None => {
                    return Err(DfnError::Overlay(format!(
                        "piece at {:?} is not covered by every mesh",
                        lerp2(a, b, mid)
                    )))
                }
            }
        }
        pieces.push(OverlayPiece { t0: w[0] * length, t1: w[1] * length, cells });
    }
    Ok(OverlaySegment { start: a, end: b, length, pieces })
}

/// Pieces of `[a, b]` covered by `mesh`, each with its containing triangle. Uncovered
/// parts are skipped.
pub fn overlay_partial(a: P2, b: P2, mesh: &TriMesh) -> OverlaySegment {
    let length = dist2(a, b);
    let tol = 1e-12;
    let hits = crossings(mesh, a, b);
    let mut taus = Vec::with_capacity(2 * hits.len());
    for &(_, lo, hi) in &hits {
        taus.push(lo);
        taus.push(hi);
    }
    let taus = dedup_sorted(taus, tol);
    let pieces = taus
        .windows(2)
        .filter_map(|w| {
            let t = pick(mesh, &hits, a, b, 0.5 * (w[0] + w[1]), tol)?;
            Some(OverlayPiece { t0: w[0] * length, t1: w[1] * length, cells: vec![t] })
        })
        .collect();
    OverlaySegment { start: a, end: b, length, pieces }
}
