//! Planar points and polygon helpers. All coordinates are centimeters.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A 2D point or displacement, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn distance_squared(self, other: Point2) -> f64 {
        let d = self - other;
        d.x * d.x + d.y * d.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, rhs: Point2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Signed shoelace area; positive for counter-clockwise winding.
pub fn signed_area(polygon: &[Point2]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, p) in polygon.iter().enumerate() {
        let q = polygon[(i + 1) % polygon.len()];
        acc += p.cross(q);
    }
    acc * 0.5
}

/// Even-odd point-in-polygon test (crossing number).
pub fn contains_even_odd(polygon: &[Point2], p: Point2) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Sutherland–Hodgman clip of `polygon` against the axis-aligned box
/// `[0, width] x [0, height]`.
pub fn clip_to_rect(polygon: &[Point2], width: f64, height: f64) -> Vec<Point2> {
    // (inside predicate, intersection with the boundary line)
    type Edge = (
        fn(Point2, f64) -> bool,
        fn(Point2, Point2, f64) -> Point2,
        f64,
    );

    fn lerp_x(a: Point2, b: Point2, x: f64) -> Point2 {
        let t = (x - a.x) / (b.x - a.x);
        Point2::new(x, a.y + t * (b.y - a.y))
    }
    fn lerp_y(a: Point2, b: Point2, y: f64) -> Point2 {
        let t = (y - a.y) / (b.y - a.y);
        Point2::new(a.x + t * (b.x - a.x), y)
    }

    let edges: [Edge; 4] = [
        (|p, v| p.x >= v, lerp_x, 0.0),
        (|p, v| p.x <= v, lerp_x, width),
        (|p, v| p.y >= v, lerp_y, 0.0),
        (|p, v| p.y <= v, lerp_y, height),
    ];

    let mut output: Vec<Point2> = polygon.to_vec();
    for (inside, intersect, bound) in edges {
        if output.is_empty() {
            break;
        }
        let input = std::mem::take(&mut output);
        let mut prev = *input.last().unwrap();
        for &cur in &input {
            let cur_in = inside(cur, bound);
            let prev_in = inside(prev, bound);
            if cur_in {
                if !prev_in {
                    output.push(intersect(prev, cur, bound));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(prev, cur, bound));
            }
            prev = cur;
        }
    }
    output
}

/// Removes consecutive duplicates (including the wrap-around pair).
pub fn dedup_vertices(polygon: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(polygon.len());
    for &p in polygon {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + side, y0),
            Point2::new(x0 + side, y0 + side),
            Point2::new(x0, y0 + side),
        ]
    }

    #[test]
    fn area_of_unit_square() {
        assert_eq!(signed_area(&square(0.0, 0.0, 1.0)), 1.0);
    }

    #[test]
    fn even_odd_inside_outside() {
        let sq = square(0.0, 0.0, 10.0);
        assert!(contains_even_odd(&sq, Point2::new(5.0, 5.0)));
        assert!(!contains_even_odd(&sq, Point2::new(15.0, 5.0)));
    }

    #[test]
    fn clip_keeps_inner_part() {
        let clipped = clip_to_rect(&square(-5.0, -5.0, 10.0), 100.0, 100.0);
        assert!((signed_area(&clipped) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn clip_outside_is_empty() {
        let clipped = clip_to_rect(&square(200.0, 200.0, 10.0), 100.0, 100.0);
        assert!(clipped.is_empty() || signed_area(&clipped).abs() == 0.0);
    }
}
