//! Planar object shapes, signed distances and the penalty contact law.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Object outline in its body frame (m), centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disc { radius: f64 },
    /// Convex polygon, vertices counter-clockwise, grown outward by
    /// `rounding` so its corners are circular arcs.
    Polygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default)]
        rounding: f64,
    },
}

impl Shape {
    pub fn rectangle(width: f64, height: f64) -> Self {
        let (w, h) = (0.5 * width, 0.5 * height);
        Shape::Polygon { vertices: alloc::vec![[-w, -h], [w, -h], [w, h], [-w, h]], rounding: 0.0 }
    }

    /// A `width` by `height` rectangle whose corners have radius `radius`.
    pub fn rounded_rectangle(width: f64, height: f64, radius: f64) -> Self {
        let (w, h) = (0.5 * width - radius, 0.5 * height - radius);
        Shape::Polygon { vertices: alloc::vec![[-w, -h], [w, -h], [w, h], [-w, h]], rounding: radius }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Shape::Disc { radius } if *radius > 0.0 && radius.is_finite() => Ok(()),
            Shape::Disc { .. } => Err(Error::invalid("disc radius must be positive")),
            Shape::Polygon { vertices, rounding } => {
                let n = vertices.len();
                if !(*rounding >= 0.0) || !rounding.is_finite() {
                    return Err(Error::invalid("polygon rounding must be finite and non-negative"));
                }
                if n < 3 {
                    return Err(Error::invalid("polygon needs at least 3 vertices"));
                }
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    let turn = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if !(turn > 0.0) {
                        return Err(Error::invalid("polygon must be convex and counter-clockwise"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Distance from the centre to the lowest point.
    pub fn half_height(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices, rounding } => rounding - vertices.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min),
        }
    }

    /// Distance from the centre to the highest point.
    pub fn top(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices, rounding } => rounding + vertices.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn half_width(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices, rounding } => rounding + vertices.iter().map(|v| v[0].abs()).fold(0.0, f64::max),
        }
    }

    /// Radius of the smallest origin-centred circle containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices, rounding } => {
                rounding + vertices.iter().map(|v| math::hypot(v[0], v[1])).fold(0.0, f64::max)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disc { radius } => math::PI * radius * radius,
            Shape::Polygon { vertices, rounding } => {
                let n = vertices.len();
                let (mut core, mut perimeter) = (0.0, 0.0);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    core += 0.5 * (a[0] * b[1] - b[0] * a[1]);
                    perimeter += math::hypot(b[0] - a[0], b[1] - a[1]);
                }
                core + perimeter * rounding + math::PI * rounding * rounding
            }
        }
    }

    /// Cheap conservative test: true only if `p` is farther than `margin`
    /// from the shape.
    pub fn clear_of(&self, p: [f64; 2], margin: f64) -> bool {
        match self {
            Shape::Disc { radius } => {
                let r = radius + margin;
                p[0] * p[0] + p[1] * p[1] > r * r
            }
            Shape::Polygon { vertices, rounding } => {
                let n = vertices.len();
                let margin = margin + rounding;
                (0..n).any(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    // unnormalized outward plane distance, compared squared
                    let plane = e[1] * (p[0] - a[0]) - e[0] * (p[1] - a[1]);
                    plane > 0.0 && plane * plane > margin * margin * (e[0] * e[0] + e[1] * e[1])
                })
            }
        }
    }

    /// Signed distance from body-frame point `p` to the outline (negative
    /// inside) and the outward unit normal at the closest feature.
    pub fn signed_distance(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        match self {
            Shape::Disc { radius } => {
                let d = math::hypot(p[0], p[1]);
                let n = if d > 0.0 { [p[0] / d, p[1] / d] } else { [0.0, 1.0] };
                (d - radius, n)
            }
            Shape::Polygon { vertices, rounding } => {
                let (d, n) = polygon_distance(vertices, p);
                (d - rounding, n)
            }
        }
    }
}

fn polygon_distance(vertices: &[[f64; 2]], p: [f64; 2]) -> (f64, [f64; 2]) {
    let n = vertices.len();
    let mut best_inside = (f64::NEG_INFINITY, [0.0, 1.0]);
    let mut best_outside = (f64::INFINITY, [0.0, 1.0]);
    let mut outside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = math::hypot(e[0], e[1]);
        let normal = [e[1] / len, -e[0] / len];
        let plane = normal[0] * (p[0] - a[0]) + normal[1] * (p[1] - a[1]);
        if plane > 0.0 {
            outside = true;
        }
        if plane > best_inside.0 {
            best_inside = (plane, normal);
        }
        let t = (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / (len * len)).clamp(0.0, 1.0);
        let q = [a[0] + t * e[0], a[1] + t * e[1]];
        let dx = p[0] - q[0];
        let dy = p[1] - q[1];
        let d = math::hypot(dx, dy);
        if d < best_outside.0 {
            let nrm = if d > 0.0 { [dx / d, dy / d] } else { normal };
            best_outside = (d, nrm);
        }
    }
    if outside {
        best_outside
    } else {
        best_inside
    }
}

/// Penalty normal force for penetration `depth`: quadratic up to `smoothing`,
/// linear with slope `stiffness` beyond, continuous with its derivative.
pub fn penalty_force(depth: f64, stiffness: f64, smoothing: f64) -> f64 {
    if depth <= 0.0 {
        0.0
    } else if depth < smoothing {
        stiffness * depth * depth / (2.0 * smoothing)
    } else {
        stiffness * (depth - 0.5 * smoothing)
    }
}

/// Coulomb clamp: the demanded tangential force, limited in magnitude to
/// `mu * normal_force`, keeping the demand's sign.
pub fn friction_contact(normal_force: f64, mu: f64, tangential_demand: f64) -> f64 {
    let limit = mu * normal_force.max(0.0);
    let magnitude = tangential_demand.abs().min(limit);
    if tangential_demand < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friction_examples() {
        assert_eq!(friction_contact(10.0, 0.5, 3.0), 3.0);
        assert_eq!(friction_contact(10.0, 0.5, 8.0), 5.0);
        assert_eq!(friction_contact(0.0, 0.5, 8.0), 0.0);
        assert_eq!(friction_contact(10.0, 0.5, -8.0), -5.0);
    }

    #[test]
    fn square_distances() {
        let s = Shape::rectangle(2.0, 2.0);
        s.check().unwrap();
        let (d, n) = s.signed_distance([3.0, 0.0]);
        assert!((d - 2.0).abs() < 1e-15 && n == [1.0, 0.0]);
        let (d, n) = s.signed_distance([0.0, -0.25]);
        assert!((d + 0.75).abs() < 1e-15 && n == [0.0, -1.0]);
        let (d, _) = s.signed_distance([2.0, 2.0]);
        assert!((d - math::sqrt(2.0)).abs() < 1e-15);
        assert!((s.area() - 4.0).abs() < 1e-15);
        assert_eq!(s.half_height(), 1.0);
    }

    #[test]
    fn rounded_rectangle_keeps_its_extent() {
        let s = Shape::rounded_rectangle(2.0, 1.0, 0.25);
        s.check().unwrap();
        assert_eq!((s.half_width(), s.half_height(), s.top()), (1.0, 0.5, 0.5));
        let (d, n) = s.signed_distance([2.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15 && n == [1.0, 0.0]);
        // the corner is an arc centred a radius inside both edges
        let c = [0.75, 0.25];
        let (d, _) = s.signed_distance([c[0] + 1.0, c[1] + 1.0]);
        assert!((d - (math::sqrt(2.0) - 0.25)).abs() < 1e-15);
        let area = 2.0 - (4.0 - math::PI) * 0.25 * 0.25;
        assert!((s.area() - area).abs() < 1e-15);
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let s = Shape::Polygon { vertices: alloc::vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], rounding: 0.0 };
        assert!(s.check().is_err());
    }

    #[test]
    fn penalty_is_smooth_at_the_knee() {
        let (k, e) = (100.0, 0.01);
        let below = penalty_force(e - 1e-9, k, e);
        let above = penalty_force(e + 1e-9, k, e);
        assert!((below - above).abs() < 1e-6);
        assert_eq!(penalty_force(-1.0, k, e), 0.0);
    }
}
