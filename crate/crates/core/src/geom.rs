//! Plane geometry: vectors, poses, oriented boxes (SAT), and polyline
//! projection used for lane/route arithmetic.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Normalize an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product (signed parallelogram area).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    /// Unit vector for a heading angle.
    pub fn from_heading(h: f64) -> Vec2 {
        Vec2::new(h.cos(), h.sin())
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Position plus heading; heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Oriented rectangle: center, heading, and full extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Obb {
            center,
            heading,
            length,
            width,
        }
    }

    /// Long axis (heading direction) and short axis.
    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_heading(self.heading);
        (u, Vec2::new(-u.y, u.x))
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let du = u.scale(self.length / 2.0);
        let dv = v.scale(self.width / 2.0);
        [
            self.center + du + dv,
            self.center + du - dv,
            self.center - du - dv,
            self.center - du + dv,
        ]
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.corners() {
            let p = c.dot(axis);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        (lo, hi)
    }
}

/// Separating-axis test over the four face normals. Touching rectangles
/// (zero gap) count as intersecting.
pub fn obb_intersects(a: &Obb, b: &Obb) -> bool {
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    for axis in [au, av, bu, bv] {
        let (alo, ahi) = a.project(axis);
        let (blo, bhi) = b.project(axis);
        if alo > bhi || blo > ahi {
            return false;
        }
    }
    true
}

/// Circle vs oriented rectangle, non-strict (touching counts).
pub fn circle_obb_intersects(center: Vec2, radius: f64, b: &Obb) -> bool {
    let (u, v) = b.axes();
    let d = center - b.center;
    let lu = d.dot(u).clamp(-b.length / 2.0, b.length / 2.0);
    let lv = d.dot(v).clamp(-b.width / 2.0, b.width / 2.0);
    let closest = b.center + u.scale(lu) + v.scale(lv);
    center.distance(closest) <= radius
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length from the start, clamped to `[0, length]`.
    pub s: f64,
    /// Arc length continued past the route ends along the end segments;
    /// equals `s` for interior matches.
    pub s_extended: f64,
    /// Signed lateral offset; positive on the left of travel.
    pub lateral: f64,
    /// Tangent heading of the matched segment.
    pub tangent: f64,
}

/// Piecewise-linear centerline with cached cumulative arc length.
#[derive(Debug, Clone)]
pub struct Polyline {
    points: Vec<Vec2>,
    cum: Vec<f64>,
}

impl Polyline {
    /// Requires at least two points with strictly increasing arc length.
    pub fn new(points: Vec<Vec2>) -> Option<Polyline> {
        if points.len() < 2 {
            return None;
        }
        let mut cum = Vec::with_capacity(points.len());
        cum.push(0.0);
        for w in points.windows(2) {
            let d = w[0].distance(w[1]);
            if d <= 0.0 {
                return None;
            }
            cum.push(cum.last().unwrap() + d);
        }
        Some(Polyline { points, cum })
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    /// Closest-point projection. Ties between adjacent segments resolve to
    /// the earlier segment, keeping the result deterministic.
    ///
    /// Arc length clamps to `[0, length]`, but on the first and last
    /// segments the lateral offset is the perpendicular distance to the
    /// segment's infinite line: the road notionally continues beyond the
    /// route ends, so longitudinal overshoot is not lateral departure.
    pub fn project(&self, p: Vec2) -> Projection {
        let mut best_d2 = f64::INFINITY;
        let mut best = Projection {
            s: 0.0,
            s_extended: 0.0,
            lateral: 0.0,
            tangent: 0.0,
        };
        let last = self.points.len() - 2;
        for i in 0..=last {
            let a = self.points[i];
            let b = self.points[i + 1];
            let ab = b - a;
            let len = ab.norm();
            let t_raw = (p - a).dot(ab) / (len * len);
            let t = t_raw.clamp(0.0, 1.0);
            let foot = a + ab.scale(t);
            let d2 = (p - foot).dot(p - foot);
            if d2 < best_d2 - 1e-12 {
                best_d2 = d2;
                let tangent = ab.y.atan2(ab.x);
                let cross = ab.cross(p - a);
                let extended = (i == 0 && t_raw < 0.0) || (i == last && t_raw > 1.0);
                let lateral = if extended {
                    cross / len
                } else {
                    d2.sqrt() * cross.signum()
                };
                let s = self.cum[i] + t * len;
                best = Projection {
                    s,
                    s_extended: if extended { self.cum[i] + t_raw * len } else { s },
                    lateral,
                    tangent,
                };
            }
        }
        best
    }

    /// Point and tangent at arc length `s`; `s` beyond the ends extrapolates
    /// along the first/last segment (used for lookahead targets).
    pub fn point_at(&self, s: f64) -> (Vec2, f64) {
        let n = self.points.len();
        if s <= 0.0 {
            let dir = self.points[1] - self.points[0];
            let tangent = dir.y.atan2(dir.x);
            let p = self.points[0] + dir.scale(s / dir.norm());
            return (p, tangent);
        }
        if s >= self.length() {
            let dir = self.points[n - 1] - self.points[n - 2];
            let tangent = dir.y.atan2(dir.x);
            let overshoot = s - self.length();
            let p = self.points[n - 1] + dir.scale(overshoot / dir.norm());
            return (p, tangent);
        }
        // binary search over cumulative lengths
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cum[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = self.points[lo];
        let b = self.points[lo + 1];
        let seg = b - a;
        let t = (s - self.cum[lo]) / seg.norm();
        let tangent = seg.y.atan2(seg.x);
        (a + seg.scale(t), tangent)
    }
}
