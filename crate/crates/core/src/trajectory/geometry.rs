//! Convex polygons and their exact Euclidean separation.

use serde::{Deserialize, Serialize};

use super::TrajectoryError;

pub type Point = [f64; 2];

const AREA_EPS: f64 = 1e-12;

/// A convex polygon with counter-clockwise vertices and positive area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = TrajectoryError;

    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let d = sub(p, q);
    dot(d, d).sqrt()
}

impl Polygon {
    /// Rejects fewer than three vertices, non-finite coordinates, zero area,
    /// clockwise order and non-convex (including collinear) corners.
    pub fn new(vertices: Vec<Point>) -> Result<Self, TrajectoryError> {
        let n = vertices.len();
        let bad = |m: &str| TrajectoryError::DegeneratePolygon(m.to_string());
        if n < 3 {
            return Err(bad("fewer than 3 vertices"));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        let area2: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area2.abs() <= AREA_EPS {
            return Err(bad("zero area"));
        }
        if area2 < 0.0 {
            return Err(bad("vertices are clockwise"));
        }
        for i in 0..n {
            if cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]) <= AREA_EPS {
                return Err(bad("not strictly convex"));
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, TrajectoryError> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Centroid of the vertices and the largest vertex distance from it.
    pub fn bounding_circle(&self) -> (Point, f64) {
        let n = self.vertices.len() as f64;
        let c = [
            self.vertices.iter().map(|v| v[0]).sum::<f64>() / n,
            self.vertices.iter().map(|v| v[1]).sum::<f64>() / n,
        ];
        let r = self
            .vertices
            .iter()
            .map(|v| dot(sub(*v, c), sub(*v, c)).sqrt())
            .fold(0.0, f64::max);
        (c, r)
    }

    /// Whether `p` lies inside or on the boundary.
    pub fn contains(&self, p: Point) -> bool {
        self.edges().all(|(a, b)| cross(a, b, p) >= 0.0)
    }

    /// Distance from `p` to the polygon, 0 inside.
    pub fn point_distance(&self, p: Point) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Reflection across the x-axis, re-ordered to stay counter-clockwise.
    pub fn mirrored(&self) -> Self {
        let mut v: Vec<Point> = self.vertices.iter().map(|p| [p[0], -p[1]]).collect();
        v.reverse();
        Self { vertices: v }
    }

    fn projection(&self, axis: Point) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| dot(*v, axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    }

    /// Separating-axis test over both polygons' edge normals; touching counts.
    pub fn intersects(&self, other: &Polygon) -> bool {
        for poly in [self, other] {
            for (a, b) in poly.edges() {
                let axis = [b[1] - a[1], a[0] - b[0]];
                let (l1, h1) = self.projection(axis);
                let (l2, h2) = other.projection(axis);
                if h1 < l2 || h2 < l1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Exact Euclidean separation of two convex polygons, 0 when they intersect.
///
/// Disjoint convex polygons attain their distance at a vertex of one and an
/// edge of the other, so the minimum over all vertex-edge pairs is exact.
pub fn polygon_distance(a: &Polygon, b: &Polygon) -> f64 {
    if a.intersects(b) {
        return 0.0;
    }
    let one_way = |p: &Polygon, q: &Polygon| {
        p.vertices
            .iter()
            .flat_map(|&v| q.edges().map(move |(s, e)| point_segment_distance(v, s, e)))
            .fold(f64::INFINITY, f64::min)
    };
    one_way(a, b).min(one_way(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64) -> Polygon {
        Polygon::rect(x, y, x + 1.0, y + 1.0).unwrap()
    }

    #[test]
    fn axis_aligned_gap() {
        assert_eq!(polygon_distance(&square(0.0, 0.0), &square(3.0, 0.0)), 2.0);
    }

    #[test]
    fn overlap_is_zero() {
        assert_eq!(polygon_distance(&square(0.0, 0.0), &square(0.5, 0.5)), 0.0);
        // Containment, no boundary crossing.
        let big = Polygon::rect(-5.0, -5.0, 5.0, 5.0).unwrap();
        assert_eq!(polygon_distance(&big, &square(0.0, 0.0)), 0.0);
    }

    #[test]
    fn diagonal_corner_gap() {
        let d = polygon_distance(&square(0.0, 0.0), &square(2.0, 2.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        let dart = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [1.0, 2.0]];
        assert!(Polygon::new(dart).is_err());
    }

    #[test]
    fn mirror_keeps_orientation() {
        let p = Polygon::new(vec![[0.0, 0.0], [2.0, 1.0], [0.0, 3.0]]).unwrap();
        let m = p.mirrored();
        assert!(Polygon::new(m.vertices().to_vec()).is_ok());
        assert!(m.contains([0.5, -1.0]));
    }

    #[test]
    fn json_round_trip_validates() {
        let p: Polygon = serde_json::from_str("[[0,0],[1,0],[0,1]]").unwrap();
        assert_eq!(p.vertices().len(), 3);
        assert!(serde_json::from_str::<Polygon>("[[0,0],[0,1],[1,0]]").is_err());
    }
}
