//! Error norms, mesh-dependent trace norms and convergence rates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{DfnError, Result};
use crate::geometry::LocalFn;
use crate::linalg::{dot, SparseMatrix};
use crate::meshing::{overlay_partial, SegMesh, TriMesh};
use crate::quadrature::triangle_order5;
use crate::solver::{Solution, StabParams, Variant};
use crate::vecmath::*;

/// A vector field of fracture-local coordinates.
#[derive(Clone)]
pub struct LocalGrad(Arc<dyn Fn(P2) -> P2 + Send + Sync>);

impl LocalGrad {
    pub fn new(f: impl Fn(P2) -> P2 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_| [0.0, 0.0])
    }

    #[inline]
    pub fn eval(&self, p: P2) -> P2 {
        (self.0)(p)
    }
}

impl fmt::Debug for LocalGrad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LocalGrad(..)")
    }
}

/// A scalar function of trace arc length.
#[derive(Clone)]
pub struct LineFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl LineFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.0)(s)
    }
}

impl fmt::Debug for LineFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LineFn(..)")
    }
}

#[derive(Debug, Clone)]
pub struct ExactField {
    pub value: LocalFn,
    pub gradient: LocalGrad,
}

/// Exact multipliers and trace head on one trace; `flux` follows the order of the
/// trace's fracture ids.
#[derive(Debug, Clone)]
pub struct TraceExact {
    pub flux: [LineFn; 2],
    pub head: LineFn,
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// One field per fracture, in network order.
    pub fields: Vec<ExactField>,
    /// Per trace, when known.
    pub traces: Vec<Option<TraceExact>>,
}

impl ExactSolution {
    pub fn new(fields: Vec<ExactField>) -> Self {
        Self { fields, traces: Vec::new() }
    }

    pub fn trace(&self, m: usize) -> Option<&TraceExact> {
        self.traces.get(m).and_then(Option::as_ref)
    }

    /// Wraps a computed solution as a reference; points are located on the
    /// reference meshes.
    pub fn from_discrete(disc: &Discretization, sol: &Solution) -> Self {
        let mut fields = Vec::with_capacity(disc.meshes.len());
        for (mesh, u) in disc.meshes.iter().zip(&sol.u) {
            let mesh = Arc::new(mesh.clone());
            let u = Arc::new(u.clone());
            let (m1, u1) = (mesh.clone(), u.clone());
            fields.push(ExactField {
                value: LocalFn::new(move |p| eval_p1(&m1, &u1, p).0),
                gradient: LocalGrad::new(move |p| eval_p1(&mesh, &u, p).1),
            });
        }
        let mut traces = Vec::with_capacity(disc.segmeshes.len());
        for (m, sm) in disc.segmeshes.iter().enumerate() {
            let cs = disc.couplings_of_trace(m);
            if cs.len() != 2 {
                traces.push(None);
                continue;
            }
            let line = |v: &Vec<f64>| {
                let sm: Arc<SegMesh> = Arc::new(sm.clone());
                let v = Arc::new(v.clone());
                LineFn::new(move |s| sm.interpolate(&v, s.clamp(0.0, sm.length())))
            };
            traces.push(Some(TraceExact {
                flux: [line(&sol.lambda[cs[0]]), line(&sol.lambda[cs[1]])],
                head: line(&sol.psi[m]),
            }));
        }
        Self { fields, traces }
    }
}

/// Value and gradient of a nodal P1 field; points just outside the mesh use the
/// nearest triangle's extension.
fn eval_p1(mesh: &TriMesh, values: &[f64], p: P2) -> (f64, P2) {
    let found = mesh.locate(p).or_else(|| {
        let mut r = mesh.meshsize();
        for _ in 0..8 {
            let cand = mesh.candidates(sub2(p, [r, r]), add2(p, [r, r]));
            let best =
                cand.into_iter().map(|t| (t, mesh.barycentric(t, p))).max_by(|a, b| min3(a.1).total_cmp(&min3(b.1)));
            if best.is_some() {
                return best;
            }
            r *= 2.0;
        }
        None
    });
    let Some((t, b)) = found else {
        return (0.0, [0.0, 0.0]);
    };
    let tri = mesh.triangles()[t];
    let g = mesh.gradients(t);
    let mut val = 0.0;
    let mut grad = [0.0, 0.0];
    for k in 0..3 {
        val += b[k] * values[tri[k]];
        grad = add2(grad, scale2(g[k], values[tri[k]]));
    }
    (val, grad)
}

fn min3(b: [f64; 3]) -> f64 {
    b[0].min(b[1]).min(b[2])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FractureErrors {
    pub l2: f64,
    /// Broken H¹ seminorm of the error.
    pub h1: f64,
}

/// Clips a convex polygon to the half-plane `side * (n·x - c) >= 0`.
fn clip_half_plane(poly: &[P2], n: P2, c: f64, side: f64) -> Vec<P2> {
    let f = |p: P2| side * (dot2(n, p) - c);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let (fp, fq) = (f(p), f(q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp > 0.0 && fq < 0.0) || (fp < 0.0 && fq > 0.0) {
            out.push(lerp2(p, q, fp / (fp - fq)));
        }
    }
    out
}

/// Splits a triangle along the given lines (point, unit normal) into triangles.
fn split_triangle(v: [P2; 3], lines: &[(P2, P2)]) -> Vec<[P2; 3]> {
    let area = 0.5 * cross2(sub2(v[1], v[0]), sub2(v[2], v[0])).abs();
    let mut polys = vec![v.to_vec()];
    for &(p0, n) in lines {
        let c = dot2(n, p0);
        let vals = v.map(|p| dot2(n, p) - c);
        let scale = dist2(v[0], v[1]).max(dist2(v[1], v[2]));
        let tol = 1e-12 * scale;
        if vals.iter().all(|&x| x >= -tol) || vals.iter().all(|&x| x <= tol) {
            continue;
        }
        polys = polys
            .into_iter()
            .flat_map(|poly| [clip_half_plane(&poly, n, c, 1.0), clip_half_plane(&poly, n, c, -1.0)])
            .filter(|p| p.len() >= 3)
            .collect();
    }
    let mut out = Vec::new();
    for poly in polys {
        for k in 1..poly.len() - 1 {
            let t = [poly[0], poly[k], poly[k + 1]];
            if 0.5 * cross2(sub2(t[1], t[0]), sub2(t[2], t[0])).abs() > 1e-14 * area {
                out.push(t);
            }
        }
    }
    out
}

/// L² and broken H¹ errors per fracture, by order-5 quadrature on triangles split
/// along the trace lines.
pub fn error_l2_h1(sol: &Solution, exact: &ExactSolution, disc: &Discretization) -> Result<Vec<FractureErrors>> {
    if exact.fields.len() != disc.meshes.len() {
        return Err(DfnError::Dimension(format!(
            "{} exact fields for {} fractures",
            exact.fields.len(),
            disc.meshes.len()
        )));
    }
    let net = disc.network();
    let mut out = Vec::with_capacity(disc.meshes.len());
    for (i, mesh) in disc.meshes.iter().enumerate() {
        let lines: Vec<(P2, P2)> = net
            .traces_of_fracture(i)
            .iter()
            .map(|&m| {
                let side = net.side_of(m, i).expect("trace lists are consistent");
                let p = net.trace(m).params[side];
                (p.start, p.normal())
            })
            .collect();
        let field = &exact.fields[i];
        let u = &sol.u[i];
        let (mut l2, mut h1) = (0.0, 0.0);
        for t in 0..mesh.num_triangles() {
            let v = mesh.vertices(t);
            let tri = mesh.triangles()[t];
            let g = mesh.gradients(t);
            let grad_h = (0..3).fold([0.0, 0.0], |acc, k| add2(acc, scale2(g[k], u[tri[k]])));
            for piece in split_triangle(v, &lines) {
                let area = 0.5 * cross2(sub2(piece[1], piece[0]), sub2(piece[2], piece[0])).abs();
                for &(b, w) in triangle_order5() {
                    let p = add2(add2(scale2(piece[0], b[0]), scale2(piece[1], b[1])), scale2(piece[2], b[2]));
                    let bh = mesh.barycentric(t, p);
                    let uh: f64 = (0..3).map(|k| bh[k] * u[tri[k]]).sum();
                    let e = uh - field.value.eval(p);
                    let ge = sub2(grad_h, field.gradient.eval(p));
                    l2 += w * area * e * e;
                    h1 += w * area * dot2(ge, ge);
                }
            }
        }
        out.push(FractureErrors { l2: l2.sqrt(), h1: h1.sqrt() });
    }
    Ok(out)
}

/// Broken H¹ seminorm `(Σ_i |u_i|²₁)^{1/2}` of nodal fields.
pub fn broken_h1_seminorm(u: &[Vec<f64>], stiffness_unit: &[SparseMatrix]) -> f64 {
    u.iter().zip(stiffness_unit).map(|(v, a)| dot(v, &a.mul_vec(v))).sum::<f64>().max(0.0).sqrt()
}

/// `∫_a^b f` along a straight segment in one fracture, split at the mesh
/// crossings; `f` gets the containing triangle and the point.
pub fn segment_integral(mesh: &TriMesh, a: P2, b: P2, f: impl Fn(usize, P2) -> f64) -> f64 {
    const GAUSS3: [(f64, f64); 3] =
        [(0.112_701_665_379_258_31, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.887_298_334_620_741_7, 5.0 / 18.0)];
    let ov = overlay_partial(a, b, mesh);
    let mut acc = 0.0;
    for piece in &ov.pieces {
        let h = piece.length();
        for (x, w) in GAUSS3 {
            let p = ov.point(piece.t0 + x * h);
            acc += w * h * f(piece.cells[0], p);
        }
    }
    acc
}

fn p1_at(mesh: &TriMesh, u: &[f64], t: usize, p: P2) -> f64 {
    let tri = mesh.triangles()[t];
    let b = mesh.barycentric(t, p);
    (0..3).map(|k| b[k] * u[tri[k]]).sum()
}

/// Mean of `[[u]] = u_i - u_j` (i the lower fracture id) over every trace.
pub fn jump_means(u: &[Vec<f64>], disc: &Discretization) -> Vec<f64> {
    jump_means_with(disc, |i, t, p| p1_at(&disc.meshes[i], &u[i], t, p))
}

fn jump_means_with(disc: &Discretization, f: impl Fn(usize, usize, P2) -> f64) -> Vec<f64> {
    let net = disc.network();
    net.traces()
        .iter()
        .enumerate()
        .map(|(m, tr)| {
            let [fi, fj] = net.fractures_of_trace(m);
            let int = |side: usize, frac: usize| {
                let p = tr.params[side];
                segment_integral(&disc.meshes[frac], p.at(0.0), p.at(tr.length), |t, x| f(frac, t, x))
            };
            (int(0, fi) - int(1, fj)) / tr.length
        })
        .collect()
}

/// `‖u‖₁,δ = (Σ_i |u_i|²₁ + Σ_m |S_m| (mean [[u]])²)^{1/2}` for a discrete state.
pub fn norm_1_delta(u: &[Vec<f64>], disc: &Discretization) -> f64 {
    let unit: Vec<SparseMatrix> = disc.meshes.iter().map(|m| crate::fem::assemble_stiffness(m, IDENTITY)).collect();
    let h1 = broken_h1_seminorm(u, &unit);
    combine_1_delta(h1, &jump_means(u, disc), disc)
}

const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

fn combine_1_delta(h1: f64, means: &[f64], disc: &Discretization) -> f64 {
    let jump: f64 = disc.network().traces().iter().zip(means).map(|(t, m)| t.length * m * m).sum();
    (h1 * h1 + jump).sqrt()
}

/// `‖·‖₁,δ` of the error `u_δ - u`, given the broken H¹ error.
pub fn error_1_delta(sol: &Solution, exact: &ExactSolution, disc: &Discretization, h1_error: f64) -> f64 {
    let means =
        jump_means_with(disc, |i, t, p| p1_at(&disc.meshes[i], &sol.u[i], t, p) - exact.fields[i].value.eval(p));
    combine_1_delta(h1_error, &means, disc)
}

/// `(Σ w_k vᵀ M v)^{1/2}` over (vector, mass matrix, weight) triples.
pub fn weighted_mass_norm<'a>(items: impl IntoIterator<Item = (&'a [f64], &'a SparseMatrix, f64)>) -> f64 {
    items.into_iter().map(|(v, m, w)| w * dot(v, &m.mul_vec(v))).sum::<f64>().max(0.0).sqrt()
}

/// `‖λ‖_{-1/2,δ}`: multiplier of each pair weighted by its fracture's mesh size.
pub fn lambda_norm_minus_half_delta(lambda: &[Vec<f64>], disc: &Discretization) -> f64 {
    weighted_mass_norm(
        disc.couplings
            .iter()
            .zip(lambda)
            .map(|(c, l)| (l.as_slice(), &disc.trace_mass[c.key.trace], disc.params.fracture_delta[c.key.fracture])),
    )
}

/// `‖ψ‖_{1/2,δ}`: trace heads weighted by the inverse trace mesh size.
pub fn psi_norm_half_delta(psi: &[Vec<f64>], disc: &Discretization) -> f64 {
    weighted_mass_norm(
        psi.iter().enumerate().map(|(m, p)| (p.as_slice(), &disc.trace_mass[m], 1.0 / disc.params.trace_delta[m])),
    )
}

/// Nodal error of the multipliers and trace heads against the exact trace data,
/// where available. Traces without exact data contribute nothing.
pub fn trace_errors(sol: &Solution, exact: &ExactSolution, disc: &Discretization) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let lambda = disc
        .couplings
        .iter()
        .zip(&sol.lambda)
        .map(|(c, l)| {
            let sm = &disc.segmeshes[c.key.trace];
            match exact.trace(c.key.trace) {
                Some(te) => sm.coords.iter().zip(l).map(|(&s, &v)| v - te.flux[c.key.side].eval(s)).collect(),
                None => vec![0.0; l.len()],
            }
        })
        .collect();
    let psi = disc
        .segmeshes
        .iter()
        .zip(&sol.psi)
        .enumerate()
        .map(|(m, (sm, p))| match exact.trace(m) {
            Some(te) => sm.coords.iter().zip(p).map(|(&s, &v)| v - te.head.eval(s)).collect(),
            None => vec![0.0; p.len()],
        })
        .collect();
    (lambda, psi)
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(DfnError::Config(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

/// Pairwise rates `log(e_k / e_{k+1}) / log(δ_k / δ_{k+1})`.
pub fn eoc(errors: &[f64], deltas: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != deltas.len() || errors.len() < 2 {
        return Err(DfnError::Config(format!(
            "need at least two matching errors and mesh sizes, got {} and {}",
            errors.len(),
            deltas.len()
        )));
    }
    check_positive("errors", errors)?;
    check_positive("mesh sizes", deltas)?;
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DfnError::Config("mesh sizes must be strictly decreasing".into()));
    }
    Ok(errors.windows(2).zip(deltas.windows(2)).map(|(e, d)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln()).collect())
}

/// Least-squares slope of `log e` against `log δ` over the last `last` points.
pub fn eoc_fit(errors: &[f64], deltas: &[f64], last: usize) -> Result<f64> {
    eoc(errors, deltas)?;
    let n = errors.len();
    let k = last.clamp(2, n);
    let xs: Vec<f64> = deltas[n - k..].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors[n - k..].iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub variant: Variant,
    pub delta: f64,
    pub weight: f64,
    pub t: f64,
    pub dofs_u: usize,
    pub dofs_lambda: usize,
    pub dofs_psi: usize,
    pub per_fracture: Vec<FractureErrors>,
    pub err_l2: f64,
    pub err_h1: f64,
    pub err_1delta: f64,
    pub lambda_norm_minus_half_delta: f64,
    pub psi_norm_half_delta: f64,
    /// `None` when not requested.
    pub cond: Option<f64>,
    pub conservation: f64,
}

/// Errors of `sol` against `exact`; the trace norms measure the error where
/// exact trace data is known and the discrete field otherwise.
#[allow(clippy::too_many_arguments)]
pub fn error_report(
    sol: &Solution,
    exact: &ExactSolution,
    disc: &Discretization,
    variant: Variant,
    delta: f64,
    params: StabParams,
    cond: Option<f64>,
    conservation: f64,
) -> Result<ErrorReport> {
    let per_fracture = error_l2_h1(sol, exact, disc)?;
    let err_l2 = per_fracture.iter().map(|e| e.l2 * e.l2).sum::<f64>().sqrt();
    let err_h1 = per_fracture.iter().map(|e| e.h1 * e.h1).sum::<f64>().sqrt();
    let err_1delta = error_1_delta(sol, exact, disc, err_h1);
    let (lambda, psi) = if exact.traces.iter().any(Option::is_some) {
        trace_errors(sol, exact, disc)
    } else {
        (sol.lambda.clone(), sol.psi.clone())
    };
    let dm = &disc.dofmap;
    Ok(ErrorReport {
        variant,
        delta,
        weight: params.weight,
        t: params.t,
        dofs_u: dm.num_free_u(),
        dofs_lambda: dm.num_free_lambda(),
        dofs_psi: dm.num_free_psi(),
        per_fracture,
        err_l2,
        err_h1,
        err_1delta,
        lambda_norm_minus_half_delta: lambda_norm_minus_half_delta(&lambda, disc),
        psi_norm_half_delta: psi_norm_half_delta(&psi, disc),
        cond,
        conservation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[1.0, 0.5], &[1.0, 0.5]).unwrap()[0] - 1.0).abs() < 1e-14);
        assert!((eoc(&[1.0, 0.5f64.sqrt()], &[1.0, 0.5]).unwrap()[0] - 0.5).abs() < 1e-14);
        assert!(eoc(&[1.0, 0.0], &[1.0, 0.5]).is_err());
        assert!(eoc(&[1.0, 0.5], &[0.5, 1.0]).is_err());
        assert!(eoc(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn fitted_slope_of_power_law() {
        let d = [0.4, 0.2, 0.1, 0.05];
        let e: Vec<f64> = d.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((eoc_fit(&e, &d, 3).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn split_preserves_area() {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let lines = [([0.3, 0.0], [1.0, 0.0]), ([0.0, 0.2], [0.0, 1.0]), ([0.0, 0.0], [0.0, 1.0])];
        let parts = split_triangle(v, &lines);
        assert!(parts.len() >= 4);
        let total: f64 = parts.iter().map(|t| 0.5 * cross2(sub2(t[1], t[0]), sub2(t[2], t[0])).abs()).sum();
        assert!((total - 0.5).abs() < 1e-15);
        for t in &parts {
            let c = scale2(add2(add2(t[0], t[1]), t[2]), 1.0 / 3.0);
            for p in t {
                assert!((p[0] - 0.3) * (c[0] - 0.3) >= -1e-15);
                assert!((p[1] - 0.2) * (c[1] - 0.2) >= -1e-15);
            }
        }
    }
}
