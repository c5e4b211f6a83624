//! Planar primitives, parametric interface curves, closed polylines and the
//! Hausdorff distance used to score reconstructions.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Twice the signed area of the triangle (a, b, c); positive when counterclockwise.
pub fn orient2d(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Distance from `p` to the closed segment [a, b].
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Proper or touching intersection test for the closed segments [p1, p2] and [q1, q2].
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient2d(q1, q2, p1);
    let d2 = orient2d(q1, q2, p2);
    let d3 = orient2d(p1, p2, q1);
    let d4 = orient2d(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Vec2, b: Vec2, p: Vec2| {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Shape of an interface curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveKind {
    Circle { radius: f64 },
    /// Star-shaped curve with radius `scale * (a + b cos(m t))`.
    CosineStar { scale: f64, a: f64, b: f64, m: u32 },
    /// Two-lobed curve with radius `scale * (1 + waist cos(2t))`; concave
    /// at the waist once `waist > 1/5`.
    Peanut { scale: f64, waist: f64 },
    /// Closed polygon, vertices in order (either orientation).
    Polygon { vertices: Vec<Vec2> },
}

/// Closed interface curve, translated by `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricCurve {
    #[serde(flatten)]
    pub kind: CurveKind,
    #[serde(default)]
    pub center: Vec2,
}

impl ParametricCurve {
    pub fn circle(radius: f64) -> Self {
        Self { kind: CurveKind::Circle { radius }, center: Vec2::ZERO }
    }

    pub fn cosine_star(scale: f64, a: f64, b: f64, m: u32) -> Self {
        Self { kind: CurveKind::CosineStar { scale, a, b, m }, center: Vec2::ZERO }
    }

    pub fn peanut(scale: f64, waist: f64) -> Self {
        Self { kind: CurveKind::Peanut { scale, waist }, center: Vec2::ZERO }
    }

    pub fn polygon(vertices: Vec<Vec2>) -> Self {
        Self { kind: CurveKind::Polygon { vertices }, center: Vec2::ZERO }
    }

    pub fn with_center(mut self, center: Vec2) -> Self {
        self.center = center;
        self
    }

    /// Radius function of the star-shaped kinds; `None` for polygons.
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        match &self.kind {
            CurveKind::Circle { radius } => Some(*radius),
            CurveKind::CosineStar { scale, a, b, m } => Some(scale * (a + b * (*m as f64 * t).cos())),
            CurveKind::Peanut { scale, waist } => Some(scale * (1.0 + waist * (2.0 * t).cos())),
            CurveKind::Polygon { .. } => None,
        }
    }

    /// Point at parameter `t` in [0, 2π). Polygons are parametrized
    /// proportionally to arc length.
    pub fn point(&self, t: f64) -> Vec2 {
        match &self.kind {
            CurveKind::Polygon { vertices } => polygon_point(vertices, t / (2.0 * PI)) + self.center,
            _ => Vec2::from_polar(self.radius_at(t).unwrap(), t) + self.center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::Geometry("curve center is not finite".into()));
        }
        match &self.kind {
            CurveKind::Polygon { vertices } => {
                let poly = Polyline::new(vertices.clone())?;
                if !poly.is_simple() {
                    return Err(Error::Geometry("polygon vertices do not form a simple polygon".into()));
                }
            }
            _ => {
                let n = 4096;
                let min_r = (0..n)
                    .map(|i| self.radius_at(2.0 * PI * i as f64 / n as f64).unwrap())
                    .fold(f64::INFINITY, f64::min);
                if !(min_r > 0.0) || !min_r.is_finite() {
                    return Err(Error::Geometry(format!(
                        "radius function must stay positive (min {min_r})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `n` points at equispaced parameter values.
    pub fn sample(&self, n: usize) -> Result<Polyline> {
        if n < 3 {
            return Err(Error::Geometry(format!("need at least 3 samples, got {n}")));
        }
        let pts = (0..n).map(|i| self.point(2.0 * PI * i as f64 / n as f64)).collect();
        Polyline::new(pts)
    }

    /// Counterclockwise polyline lying on the curve with edge lengths close to
    /// `spacing`. Polygon corners are always kept as vertices.
    pub fn sample_by_spacing(&self, spacing: f64) -> Result<Polyline> {
        if !(spacing > 0.0) {
            return Err(Error::Geometry("sampling spacing must be positive".into()));
        }
        let mut pts = match &self.kind {
            CurveKind::Polygon { vertices } => {
                let mut pts = Vec::new();
                for i in 0..vertices.len() {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % vertices.len()];
                    let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
                    for j in 0..k {
                        pts.push(a + (b - a) * (j as f64 / k as f64) + self.center);
                    }
                }
                pts
            }
            _ => {
                // Invert the arc-length map on a dense table so that the
                // samples are equally spaced along the curve but still lie on it.
                let dense = 8192;
                let params: Vec<f64> = (0..=dense).map(|i| 2.0 * PI * i as f64 / dense as f64).collect();
                let mut cum = vec![0.0; dense + 1];
                for i in 1..=dense {
                    cum[i] = cum[i - 1] + self.point(params[i]).dist(self.point(params[i - 1]));
                }
                let total = cum[dense];
                let n = ((total / spacing).round() as usize).max(8);
                let mut pts = Vec::with_capacity(n);
                let mut j = 0;
                for k in 0..n {
                    let target = total * k as f64 / n as f64;
                    while cum[j + 1] < target {
                        j += 1;
                    }
                    let w = if cum[j + 1] > cum[j] { (target - cum[j]) / (cum[j + 1] - cum[j]) } else { 0.0 };
                    let t = params[j] + w * (params[j + 1] - params[j]);
                    pts.push(self.point(t));
                }
                pts
            }
        };
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        Polyline::new(pts)
    }
}

fn polygon_point(vertices: &[Vec2], frac: f64) -> Vec2 {
    let n = vertices.len();
    let lens: Vec<f64> = (0..n).map(|i| vertices[i].dist(vertices[(i + 1) % n])).collect();
    let total: f64 = lens.iter().sum();
    let mut target = frac.rem_euclid(1.0) * total;
    for i in 0..n {
        if target <= lens[i] || i == n - 1 {
            let w = if lens[i] > 0.0 { (target / lens[i]).min(1.0) } else { 0.0 };
            return vertices[i] + (vertices[(i + 1) % n] - vertices[i]) * w;
        }
        target -= lens[i];
    }
    vertices[0]
}

fn signed_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    0.5 * (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>()
}

/// Closed polyline; the last point connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<Vec2>,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Geometry(format!(
                "a closed polyline needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Geometry("polyline contains non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Shoelace area; positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    /// No two non-adjacent edges touch and no adjacent edges overlap.
    pub fn is_simple(&self) -> bool {
        let n = self.points.len();
        let p = &self.points;
        for i in 0..n {
            let (a1, a2) = (p[i], p[(i + 1) % n]);
            if a1 == a2 {
                return false;
            }
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (b1, b2) = (p[j], p[(j + 1) % n]);
                if adjacent {
                    // Adjacent edges share one endpoint; they must not fold back.
                    let shared = if j == i + 1 { a2 } else { a1 };
                    let other_a = if j == i + 1 { a1 } else { a2 };
                    let other_b = if j == i + 1 { b2 } else { b1 };
                    let u = other_a - shared;
                    let v = other_b - shared;
                    if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                        return false;
                    }
                } else if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, q: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.y > q.y) != (b.y > q.y) {
                let x = a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if q.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `q` to the polyline (as a curve, not a region).
    pub fn distance_to(&self, q: Vec2) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(q, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn transformed(&self, rotation: f64, translation: Vec2) -> Polyline {
        Polyline { points: self.points.iter().map(|p| p.rotated(rotation) + translation).collect() }
    }

    pub fn reversed(&self) -> Polyline {
        let mut points = self.points.clone();
        points.reverse();
        Polyline { points }
    }
}

/// Symmetric Hausdorff distance between two closed polylines, treated as the
/// continuous curves they trace.
pub fn hausdorff_distance(a: &Polyline, b: &Polyline) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// `sup_{x in a} dist(x, b)`.
///
/// The distance to any single segment of `b` is convex along a segment of
/// `a`, so on a sub-interval its maximum sits at an endpoint. The minimum over
/// segments of those endpoint maxima is an upper bound for the interval, which
/// drives a branch-and-bound bisection down to round-off.
pub fn directed_hausdorff(a: &Polyline, b: &Polyline) -> f64 {
    let targets: Vec<(Vec2, Vec2)> = b.segments().collect();
    let dists = |p: Vec2| -> Vec<f64> { targets.iter().map(|&(s, e)| point_segment_distance(p, s, e)).collect() };
    let min_of = |d: &[f64]| d.iter().copied().fold(f64::INFINITY, f64::min);

    let mut best: f64 = 0.0;
    for p in a.points() {
        best = best.max(b.distance_to(*p));
    }
    let scale = 1.0 + best;
    let tol = 1e-14 * scale;

    for (p0, p1) in a.segments() {
        let d0 = dists(p0);
        let d1 = dists(p1);
        let mut stack = vec![(0.0_f64, 1.0_f64, d0, d1)];
        while let Some((s0, s1, da, db)) = stack.pop() {
            let upper = da.iter().zip(&db).map(|(x, y)| x.max(*y)).fold(f64::INFINITY, f64::min);
            if upper <= best + tol || s1 - s0 < 1e-15 {
                continue;
            }
            let sm = 0.5 * (s0 + s1);
            let dm = dists(p0 + (p1 - p0) * sm);
            best = best.max(min_of(&dm));
            stack.push((s0, sm, da, dm.clone()));
            stack.push((sm, s1, dm, db));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polyline {
        Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)])
            .unwrap()
    }

    #[test]
    fn circle_four_samples_hit_axes() {
        let p = ParametricCurve::circle(1.5).sample(4).unwrap();
        let expect = [(1.5, 0.0), (0.0, 1.5), (-1.5, 0.0), (0.0, -1.5)];
        for (q, (x, y)) in p.points().iter().zip(expect) {
            assert!((q.x - x).abs() < 1e-12 && (q.y - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_star_extrema() {
        let p = ParametricCurve::cosine_star(1.0, 2.0, 0.3, 3).sample(3000).unwrap();
        let radii: Vec<f64> = p.points().iter().map(|q| q.norm()).collect();
        let max = radii.iter().copied().fold(0.0, f64::max);
        let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((max - 2.3).abs() < 1e-12);
        assert!((min - 1.7).abs() < 1e-5);
    }

    #[test]
    fn flower_max_radius() {
        let p = ParametricCurve::cosine_star(5.0, 0.4, 0.06, 3).sample(360).unwrap();
        let max = p.points().iter().map(|q| q.norm()).fold(0.0, f64::max);
        assert!((max - 2.3).abs() < 1e-12);
    }

    #[test]
    fn perimeters() {
        assert!((unit_square().perimeter() - 4.0).abs() < 1e-15);
        let c = ParametricCurve::circle(1.5).sample(1024).unwrap();
        let exact = 2.0 * PI * 1.5;
        assert!((c.perimeter() - exact).abs() / exact < 1e-4);
    }

    #[test]
    fn degenerate_polyline_rejected() {
        assert!(Polyline::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn hausdorff_cases() {
        let sq = unit_square();
        assert_eq!(hausdorff_distance(&sq, &sq), 0.0);
        let moved = sq.transformed(0.0, Vec2::new(0.2, 0.0));
        assert!((hausdorff_distance(&sq, &moved) - 0.2).abs() < 1e-12);

        let a = ParametricCurve::circle(1.5).sample(2000).unwrap();
        let b = ParametricCurve::circle(1.6).sample(2000).unwrap();
        assert!((hausdorff_distance(&a, &b) - 0.1).abs() < 1e-3);
    }

    #[test]
    fn hausdorff_sees_segment_interiors() {
        // The farthest point of `a` from `b` is the midpoint of a's top edge.
        let a = Polyline::new(vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let b = Polyline::new(vec![
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ])
        .unwrap();
        // Apex (0,1) lies on b; the edge midpoints (±0.5, 0.5) are 0.5 from b.
        assert!((directed_hausdorff(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simplicity_and_containment() {
        assert!(unit_square().is_simple());
        let bow = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)])
            .unwrap();
        assert!(!bow.is_simple());
        assert!(unit_square().contains(Vec2::new(0.5, 0.5)));
        assert!(!unit_square().contains(Vec2::new(1.5, 0.5)));
    }

    #[test]
    fn spacing_sampling_keeps_corners_and_orientation() {
        let sq = ParametricCurve::polygon(vec![
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
        ]);
        let p = sq.sample_by_spacing(0.3).unwrap();
        assert!(p.signed_area() > 0.0);
        for c in [Vec2::new(1.0, 1.0), Vec2::new(-1.0, -1.0)] {
            assert!(p.points().iter().any(|q| q.dist(c) < 1e-14));
        }
        let circ = ParametricCurve::circle(1.5).sample_by_spacing(0.1).unwrap();
        assert!(circ.points().iter().all(|q| (q.norm() - 1.5).abs() < 1e-12));
    }

    #[test]
    fn nonpositive_radius_rejected() {
        assert!(ParametricCurve::cosine_star(1.0, 0.2, 0.5, 3).validate().is_err());
        assert!(ParametricCurve::cosine_star(5.0, 0.4, 0.06, 3).validate().is_ok());
    }
}
