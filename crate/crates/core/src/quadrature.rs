//! Quadrature rules on triangles (barycentric) and on intervals.

/// A point in barycentric coordinates with its weight relative to the triangle area.
pub type TriPoint = ([f64; 3], f64);

/// 3-point rule, exact for quadratics.
pub fn triangle_order2() -> &'static [TriPoint] {
    const A: f64 = 2.0 / 3.0;
    const B: f64 = 1.0 / 6.0;
    const W: f64 = 1.0 / 3.0;
    &[([A, B, B], W), ([B, A, B], W), ([B, B, A], W)]
}

/// 7-point rule, exact for polynomials of degree 5.
pub fn triangle_order5() -> &'static [TriPoint] {
    static RULE: std::sync::OnceLock<Vec<TriPoint>> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        let r = 15f64.sqrt();
        let a1 = (6.0 - r) / 21.0;
        let b1 = (9.0 + 2.0 * r) / 21.0;
        let w1 = (155.0 - r) / 1200.0;
        let a2 = (6.0 + r) / 21.0;
        let b2 = (9.0 - 2.0 * r) / 21.0;
        let w2 = (155.0 + r) / 1200.0;
        let third = 1.0 / 3.0;
        vec![
            ([third, third, third], 9.0 / 40.0),
            ([b1, a1, a1], w1),
            ([a1, b1, a1], w1),
            ([a1, a1, b1], w1),
            ([b2, a2, a2], w2),
            ([a2, b2, a2], w2),
            ([a2, a2, b2], w2),
        ]
    })
}

/// Two-point Gauss rule on `[0, 1]`, exact for cubics.
pub fn gauss2_unit() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}
