//! Small fixed-size vector helpers for points in the fracture plane and in space.

pub type P2 = [f64; 2];
pub type P3 = [f64; 3];

#[inline]
pub fn add2(a: P2, b: P2) -> P2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub2(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale2(a: P2, s: f64) -> P2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot2(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// z-component of the planar cross product.
#[inline]
pub fn cross2(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm2(a: P2) -> f64 {
    dot2(a, a).sqrt()
}

#[inline]
pub fn dist2(a: P2, b: P2) -> f64 {
    norm2(sub2(a, b))
}

/// Counter-clockwise rotation by 90 degrees.
#[inline]
pub fn perp(a: P2) -> P2 {
    [-a[1], a[0]]
}

#[inline]
pub fn lerp2(a: P2, b: P2, t: f64) -> P2 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

#[inline]
pub fn add3(a: P3, b: P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3(a: P3, s: f64) -> P3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot3(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm3(a: P3) -> f64 {
    dot3(a, a).sqrt()
}

/// Twice the signed area of the triangle `(a, b, c)`.
#[inline]
pub fn orient2(a: P2, b: P2, c: P2) -> f64 {
    cross2(sub2(b, a), sub2(c, a))
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = sub2(b, a);
    let len2 = dot2(ab, ab);
    if len2 == 0.0 {
        return dist2(p, a);
    }
    let t = (dot2(sub2(p, a), ab) / len2).clamp(0.0, 1.0);
    dist2(p, lerp2(a, b, t))
}

/// Minimum distance between the closed segments `[p1, q1]` and `[p2, q2]` in space.
pub fn segment_segment_distance3(p1: P3, q1: P3, p2: P3, q2: P3) -> f64 {
    let d1 = sub3(q1, p1);
    let d2 = sub3(q2, p2);
    let r = sub3(p1, p2);
    let a = dot3(d1, d1);
    let e = dot3(d2, d2);
    let f = dot3(d2, r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return norm3(r);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot3(d1, r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot3(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = add3(p1, scale3(d1, s));
    let c2 = add3(p2, scale3(d2, t));
    norm3(sub3(c1, c2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_segments_distance() {
        let d = segment_segment_distance3([-0.2, 0.0, 0.0], [-0.2, 1.0, 0.0], [0.2, 0.0, 0.0], [0.2, 1.0, 0.0]);
        assert!((d - 0.4).abs() < 1e-15);
    }

    #[test]
    fn skew_segments_distance() {
        let d = segment_segment_distance3([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 2.0], [0.0, 1.0, 2.0]);
        assert!((d - 2.0).abs() < 1e-15);
        // endpoint-to-interior case
        let d = segment_segment_distance3([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, -1.0, 0.0], [2.0, 1.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_to_segment() {
        assert!((point_segment_distance([0.5, 1.0], [0.0, 0.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((point_segment_distance([2.0, 0.0], [0.0, 0.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
