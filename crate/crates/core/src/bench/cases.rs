//! Benchmark networks with known solutions.

use std::sync::Arc;

use crate::analysis::{ExactField, ExactSolution, LineFn, LocalGrad, TraceExact};
use crate::discretization::Problem;
use crate::error::Result;
use crate::geometry::{build_network, BoundaryCondition, Fracture, LocalFn};

const X: [f64; 3] = [1.0, 0.0, 0.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];
const Z: [f64; 3] = [0.0, 0.0, 1.0];

fn dirichlet_zero() -> Vec<BoundaryCondition> {
    vec![BoundaryCondition::Dirichlet(LocalFn::constant(0.0)); 4]
}

/// Two perpendicular unit-height fractures, `z = 0` and `x = 0`, crossing along
/// the `y` axis. Local coordinates are `(x, y)` on the first and `(z, y)` on the
/// second. The exact heads are
///
/// ```text
/// h1 = y (y - 1) |x| (x² - 1),    h2 = y (1 - y) |z| (z² - 1)
/// ```
///
/// with homogeneous Dirichlet data on every edge.
pub fn make_test1() -> Result<Problem> {
    let f1 = Fracture::rectangle(1, [0.0; 3], [X, Y], [-1.0, 1.0], [0.0, 1.0], dirichlet_zero())?;
    let f2 = Fracture::rectangle(2, [0.0; 3], [Z, Y], [-1.0, 1.0], [0.0, 1.0], dirichlet_zero())?;
    let network = build_network(vec![f1, f2])?;

    // h = sign * y(y-1) * (|s|^3 - |s|) in local coordinates (s, y)
    let field = |sign: f64| ExactField {
        value: LocalFn::new(move |[s, y]| sign * y * (y - 1.0) * s.abs() * (s * s - 1.0)),
        gradient: LocalGrad::new(move |[s, y]| {
            let a = y * (y - 1.0);
            let b = s.abs() * (s * s - 1.0);
            [sign * a * s.signum() * (3.0 * s * s - 1.0), sign * (2.0 * y - 1.0) * b]
        }),
    };
    let forcing = |sign: f64| {
        LocalFn::new(move |[s, y]: [f64; 2]| -sign * (2.0 * s.abs() * (s * s - 1.0) + 6.0 * s.abs() * y * (y - 1.0)))
    };

    let trace = network.trace(0).clone();
    let height = move |s: f64| trace.point(s)[1];
    let flux = |sign: f64| {
        let h = height.clone();
        LineFn::new(move |s| {
            let y = h(s);
            sign * 2.0 * y * (y - 1.0)
        })
    };
    let exact = ExactSolution {
        fields: vec![field(1.0), field(-1.0)],
        traces: vec![Some(TraceExact { flux: [flux(1.0), flux(-1.0)], head: LineFn::constant(0.0) })],
    };
    Problem::new("test1", network, vec![forcing(1.0), forcing(-1.0)], Some(exact))
}

/// Distance between the two vertical fractures of test2A and test2B.
pub fn test2_distance(variant: char) -> Option<f64> {
    match variant.to_ascii_uppercase() {
        'A' => Some(0.4),
        'B' => Some(0.05),
        _ => None,
    }
}

/// A horizontal fracture `[-1, 1] x [0, 1]` at `z = 0`, fully no-flow, crossed by
/// two vertical fractures at `x = ∓d/2` spanning `y ∈ [0, 1]`, `z ∈ [-1/2, 1/2]`.
/// The top edge (`z = 1/2`) is held at head 1 on the left vertical fracture and
/// at 0 on the right one; all other edges are no-flow.
///
/// Flow runs in series down the left fracture, across the horizontal one and up
/// the right one, so the head is affine along each leg with unit-width flux
/// `q = 1 / (1 + d)`, and constant on the dead-end parts.
pub fn make_test2_with_distance(name: &str, d: f64) -> Result<Problem> {
    let neumann = || vec![BoundaryCondition::Neumann; 4];
    let top = |v: f64| {
        let mut bc = neumann();
        bc[2] = BoundaryCondition::Dirichlet(LocalFn::constant(v));
        bc
    };
    let f1 = Fracture::rectangle(1, [0.0; 3], [X, Y], [-1.0, 1.0], [0.0, 1.0], neumann())?;
    let f2 = Fracture::rectangle(2, [-0.5 * d, 0.0, 0.0], [Y, Z], [0.0, 1.0], [-0.5, 0.5], top(1.0))?;
    let f3 = Fracture::rectangle(3, [0.5 * d, 0.0, 0.0], [Y, Z], [0.0, 1.0], [-0.5, 0.5], top(0.0))?;
    let network = build_network(vec![f1, f2, f3])?;

    let q = 1.0 / (1.0 + d);
    let psi2 = 1.0 - 0.5 * q;
    let psi3 = 0.5 * q;
    let horizontal = ExactField {
        value: LocalFn::new(move |[x, _]| psi2 - q * (x.clamp(-0.5 * d, 0.5 * d) + 0.5 * d)),
        gradient: LocalGrad::new(move |[x, _]| if x.abs() < 0.5 * d { [-q, 0.0] } else { [0.0, 0.0] }),
    };
    let vertical = |base: f64, slope: f64| ExactField {
        value: LocalFn::new(move |[_, z]| base + slope * z.max(0.0)),
        gradient: LocalGrad::new(move |[_, z]| if z > 0.0 { [0.0, slope] } else { [0.0, 0.0] }),
    };
    let exact = ExactSolution {
        fields: vec![horizontal, vertical(psi2, q), vertical(psi3, -q)],
        traces: vec![
            Some(TraceExact { flux: [LineFn::constant(q), LineFn::constant(-q)], head: LineFn::constant(psi2) }),
            Some(TraceExact { flux: [LineFn::constant(-q), LineFn::constant(q)], head: LineFn::constant(psi3) }),
        ],
    };
    let forcing = vec![LocalFn::constant(0.0); 3];
    Problem::new(name, network, forcing, Some(exact))
}

/// test2A (`d = 0.4`) or test2B (`d = 0.05`).
pub fn make_test2(variant: char) -> Result<Problem> {
    let d =
        test2_distance(variant).ok_or_else(|| crate::DfnError::Config(format!("unknown test2 variant `{variant}`")))?;
    make_test2_with_distance(&format!("test2{}", variant.to_ascii_uppercase()), d)
}

/// The test1 geometry with an exact solution that is affine on each fracture,
/// continuous across the trace and free of flux jumps:
/// `u1 = 1 + 2y + x/2` on the first fracture, `u2 = 1 + 2y - 0.7 z` on the second.
pub fn make_linear_patch() -> Result<Problem> {
    let linear = |c: [f64; 3]| LocalFn::new(move |[s, y]| c[0] + c[1] * s + c[2] * y);
    let bc = |c: [f64; 3]| vec![BoundaryCondition::Dirichlet(linear(c)); 4];
    let c1 = [1.0, 0.5, 2.0];
    let c2 = [1.0, -0.7, 2.0];
    let f1 = Fracture::rectangle(1, [0.0; 3], [X, Y], [-1.0, 1.0], [0.0, 1.0], bc(c1))?;
    let f2 = Fracture::rectangle(2, [0.0; 3], [Z, Y], [-1.0, 1.0], [0.0, 1.0], bc(c2))?;
    let network = build_network(vec![f1, f2])?;
    let field = |c: [f64; 3]| ExactField { value: linear(c), gradient: LocalGrad::new(move |_| [c[1], c[2]]) };
    let trace = Arc::new(network.trace(0).clone());
    let head = LineFn::new(move |s| 1.0 + 2.0 * trace.point(s)[1]);
    let exact = ExactSolution {
        fields: vec![field(c1), field(c2)],
        traces: vec![Some(TraceExact { flux: [LineFn::constant(0.0), LineFn::constant(0.0)], head })],
    };
    Problem::new("linear-patch", network, vec![LocalFn::constant(0.0); 2], Some(exact))
}
