//! Planar primitives: oriented rectangles, axis-aligned boxes and exact
//! convex polygon intersection.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Aabb {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.x_min <= o.x_max && o.x_min <= self.x_max && self.y_min <= o.y_max && o.y_min <= self.y_max
    }

    /// Counter-clockwise corners.
    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x_min, self.y_min),
            Point::new(self.x_max, self.y_min),
            Point::new(self.x_max, self.y_max),
            Point::new(self.x_min, self.y_max),
        ]
    }
}

/// Rectangle of the given length (along `heading`) and width, centered on
/// `(cx, cy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn new(cx: f64, cy: f64, length: f64, width: f64, heading: f64) -> Self {
        Self {
            cx,
            cy,
            length,
            width,
            heading,
        }
    }

    /// Counter-clockwise corners.
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.heading.sin_cos();
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let at = |u: f64, v: f64| Point::new(self.cx + u * c - v * s, self.cy + u * s + v * c);
        [at(-hl, -hw), at(hl, -hw), at(hl, hw), at(-hl, hw)]
    }

    pub fn bounds(&self) -> Aabb {
        let cs = self.corners();
        let mut b = Aabb {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in cs {
            b.x_min = b.x_min.min(p.x);
            b.x_max = b.x_max.max(p.x);
            b.y_min = b.y_min.min(p.y);
            b.y_max = b.y_max.max(p.y);
        }
        b
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (p.x - self.cx, p.y - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        u.abs() <= 0.5 * self.length && v.abs() <= 0.5 * self.width
    }
}

/// Separating-axis overlap test for two oriented rectangles. Touching edges
/// count as overlap.
pub fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    if !a.bounds().intersects(&b.bounds()) {
        return false;
    }
    let ca = a.corners();
    let cb = b.corners();
    for rect in [a, b] {
        let (s, c) = rect.heading.sin_cos();
        for axis in [Point::new(c, s), Point::new(-s, c)] {
            let proj = |p: &Point| p.x * axis.x + p.y * axis.y;
            let (amin, amax) = min_max(ca.iter().map(proj));
            let (bmin, bmax) = min_max(cb.iter().map(proj));
            if amax < bmin || bmax < amin {
                return false;
            }
        }
    }
    true
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Shoelace area of a simple polygon, any orientation.
pub fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice.abs()
}

fn ensure_ccw(poly: &mut Vec<Point>) {
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        twice += p.x * q.y - q.x * p.y;
    }
    if twice < 0.0 {
        poly.reverse();
    }
}

/// Sutherland-Hodgman clip of `subject` by the convex polygon `clip`.
/// Returns the intersection polygon (possibly empty).
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut clip = clip.to_vec();
    ensure_ccw(&mut clip);
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let side = |p: &Point| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: Point, q: Point, sp: f64, sq: f64) -> Point {
    let t = sp / (sp - sq);
    Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

/// Exact area of the intersection of two convex polygons.
pub fn convex_intersection_area(a: &[Point], b: &[Point]) -> f64 {
    polygon_area(&clip_convex(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_square_area() {
        let sq = Aabb {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert_eq!(polygon_area(&sq.corners()), 1.0);
    }

    #[test]
    fn rotated_square_inside_itself() {
        let r = OrientedRect::new(1.0, 2.0, 4.0, 2.0, 0.7);
        let a = convex_intersection_area(&r.corners(), &r.corners());
        assert!((a - 8.0).abs() < 1e-9);
    }

    #[test]
    fn diamond_in_square() {
        // A square rotated by 45 degrees with half-diagonal 1 inside [-1,1]^2.
        let d = OrientedRect::new(0.0, 0.0, 2f64.sqrt(), 2f64.sqrt(), std::f64::consts::FRAC_PI_4);
        let sq = Aabb {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
        };
        assert!((convex_intersection_area(&d.corners(), &sq.corners()) - 2.0).abs() < 1e-12);
        // Clipping to the upper half keeps exactly half of the diamond.
        let half = Aabb { y_min: 0.0, ..sq };
        assert!((convex_intersection_area(&d.corners(), &half.corners()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sat_detects_rotated_overlap_and_separation() {
        let a = OrientedRect::new(0.0, 0.0, 4.0, 2.0, 0.0);
        let b = OrientedRect::new(3.0, 0.0, 4.0, 2.0, 0.3);
        assert!(rects_overlap(&a, &b));
        let c = OrientedRect::new(0.0, 3.1, 4.0, 2.0, 0.0);
        assert!(!rects_overlap(&a, &c));
        // Bounding boxes overlap but a separating axis exists.
        let d = OrientedRect::new(2.2, 2.2, 4.0, 0.5, -std::f64::consts::FRAC_PI_4);
        assert!(a.bounds().intersects(&d.bounds()));
        assert!(!rects_overlap(&a, &d));
    }

    fn rect() -> impl Strategy<Value = OrientedRect> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.5..6.0f64, 0.5..3.0f64, -3.2..3.2f64)
            .prop_map(|(x, y, l, w, h)| OrientedRect::new(x, y, l, w, h))
    }

    proptest! {
        #[test]
        fn intersection_is_symmetric_and_bounded(a in rect(), b in rect()) {
            let ab = convex_intersection_area(&a.corners(), &b.corners());
            let ba = convex_intersection_area(&b.corners(), &a.corners());
            prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
            prop_assert!(ab >= 0.0);
            prop_assert!(ab <= a.area().min(b.area()) + 1e-9);
            if ab > 1e-9 {
                prop_assert!(rects_overlap(&a, &b));
            }
        }
    }
}
