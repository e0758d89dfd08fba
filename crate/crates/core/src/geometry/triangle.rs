use super::{add, cross, dist, dot, norm, scale, sub, Point3};
use crate::error::{Error, Result};

/// Closest point on the closed triangle `abc` to `p`, by Voronoi-region
/// classification (vertex, edge, or face interior).
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }

    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }

    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }

    // Face region: orthogonal projection onto the plane, which returns
    // in-plane points unchanged.
    let n = cross(ab, ac);
    sub(p, scale(n, dot(ap, n) / dot(n, n)))
}

pub(crate) fn is_degenerate(a: Point3, b: Point3, c: Point3) -> bool {
    let area2 = norm(cross(sub(b, a), sub(c, a)));
    let longest = dist(a, b).max(dist(b, c)).max(dist(c, a));
    !(area2 > 1e-12 * longest * longest) || !area2.is_finite()
}

/// Euclidean distance from `p` to the closed triangle.
pub fn point_to_triangle_distance(p: Point3, tri: [Point3; 3]) -> Result<f64> {
    let [a, b, c] = tri;
    if is_degenerate(a, b, c) {
        return Err(Error::DegenerateTriangle);
    }
    Ok(dist(p, closest_point_on_triangle(p, a, b, c)))
}
