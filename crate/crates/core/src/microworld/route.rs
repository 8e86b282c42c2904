//! Route specifications: centerline geometry, lane width, roadside obstacles,
//! actor start poses, and optional traffic-control zones.
//!
//! Three routes are built in (straight, left turn, right turn), each roughly
//! 150 m of arc length. Route files round-trip through JSON with units of
//! meters, radians, and ticks.

use crate::error::{Error, Result};
use crate::geom::{Obb, Polyline, Pose2D, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteId {
    Straight,
    LeftTurn,
    RightTurn,
}

impl RouteId {
    pub const ALL: [RouteId; 3] = [RouteId::Straight, RouteId::LeftTurn, RouteId::RightTurn];

    pub fn name(&self) -> &'static str {
        match self {
            RouteId::Straight => "straight",
            RouteId::LeftTurn => "left_turn",
            RouteId::RightTurn => "right_turn",
        }
    }
}

impl std::str::FromStr for RouteId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(RouteId::Straight),
            "left_turn" => Ok(RouteId::LeftTurn),
            "right_turn" => Ok(RouteId::RightTurn),
            other => Err(Error::config(format!("unknown route `{other}`"))),
        }
    }
}

impl std::fmt::Display for RouteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A circular zone that is "red" during a tick interval; the ego vehicle must
/// not move through it faster than walking pace while red.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficControl {
    pub center: Vec2,
    pub radius: f64,
    /// Inclusive `[start, end]` tick interval during which the zone is red.
    pub red_interval: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub id: RouteId,
    /// Ordered waypoints; arc length must be strictly increasing.
    pub centerline: Vec<Pose2D>,
    pub lane_half_width: f64,
    pub obstacles: Vec<Obb>,
    pub ev_start: Pose2D,
    pub vif_start: Pose2D,
    pub ped_start: Pose2D,
    pub destination: Pose2D,
    pub traffic_control: Option<TrafficControl>,
    /// Total arc length of the centerline.
    pub route_length: f64,
}

/// A validated route with its cached centerline polyline.
#[derive(Debug, Clone)]
pub struct Route {
    pub spec: RouteSpec,
    pub line: Polyline,
}

impl Route {
    pub fn from_spec(spec: RouteSpec) -> Result<Arc<Route>> {
        let pts: Vec<Vec2> = spec.centerline.iter().map(|p| p.position()).collect();
        let line = Polyline::new(pts).ok_or_else(|| {
            Error::config("route centerline needs >= 2 waypoints with increasing arc length")
        })?;
        if spec.lane_half_width <= 0.0 {
            return Err(Error::config("lane_half_width must be positive"));
        }
        if (spec.route_length - line.length()).abs() > 1e-6 {
            return Err(Error::config(format!(
                "route_length {} does not match centerline arc length {}",
                spec.route_length,
                line.length()
            )));
        }
        let s_ev = line.project(spec.ev_start.position()).s;
        let s_vif = line.project(spec.vif_start.position()).s;
        if s_vif <= s_ev {
            return Err(Error::config(
                "vif_start must be ahead of ev_start along the centerline",
            ));
        }
        let dest = spec.centerline.last().unwrap();
        if dest.position().distance(spec.destination.position()) > 1e-6 {
            return Err(Error::config("destination must be the last waypoint"));
        }
        for o in &spec.obstacles {
            if o.length <= 0.0 || o.width <= 0.0 {
                return Err(Error::config("obstacle extents must be positive"));
            }
        }
        Ok(Arc::new(Route { spec, line }))
    }

    pub fn builtin(id: RouteId) -> Arc<Route> {
        let spec = match id {
            RouteId::Straight => straight_spec(),
            RouteId::LeftTurn => left_turn_spec(),
            RouteId::RightTurn => right_turn_spec(),
        };
        Route::from_spec(spec).expect("builtin route must validate")
    }

    pub fn from_json(text: &str) -> Result<Arc<Route>> {
        let spec: RouteSpec = serde_json::from_str(text)?;
        Route::from_spec(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("route serializes")
    }
}

fn obstacle(x: f64, y: f64, heading: f64, length: f64, width: f64) -> Obb {
    Obb::new(Vec2::new(x, y), heading, length, width)
}

fn pose(x: f64, y: f64, heading: f64) -> Pose2D {
    Pose2D::new(x, y, heading)
}

/// Sampled circular arc appended to `pts`, excluding the start point.
fn push_arc(pts: &mut Vec<Pose2D>, center: Vec2, radius: f64, a0: f64, a1: f64, steps: usize) {
    for i in 1..=steps {
        let t = a0 + (a1 - a0) * i as f64 / steps as f64;
        let p = center + Vec2::new(t.cos(), t.sin()).scale(radius);
        // tangent for ccw travel is t + pi/2, for cw travel t - pi/2
        let tangent = if a1 > a0 { t + PI / 2.0 } else { t - PI / 2.0 };
        pts.push(pose(p.x, p.y, tangent));
    }
}

fn polyline_length(pts: &[Pose2D]) -> f64 {
    pts.windows(2)
        .map(|w| w[0].position().distance(w[1].position()))
        .sum()
}

/// 120 m straight road. Marker boards line the shoulders; a wandering lead
/// vehicle that wedges against one at a moderate angle leaves its tail
/// inside the lane while its center sits outside the controller's detection
/// corridor.
fn straight_spec() -> RouteSpec {
    let centerline = vec![pose(0.0, 0.0, 0.0), pose(50.0, 0.0, 0.0), pose(100.0, 0.0, 0.0)];
    let route_length = polyline_length(&centerline);
    let obstacles = vec![
        obstacle(62.0, -5.6, 0.0, 4.0, 1.0),
        obstacle(82.0, -5.6, 0.0, 4.0, 1.0),
        obstacle(72.0, 5.6, 0.0, 4.0, 1.0),
        obstacle(92.0, 5.6, 0.0, 4.0, 1.0),
    ];
    RouteSpec {
        id: RouteId::Straight,
        centerline,
        lane_half_width: 2.0,
        obstacles,
        ev_start: pose(0.0, 0.0, 0.0),
        vif_start: pose(60.0, 0.0, 0.0),
        ped_start: pose(55.0, 6.0, 0.0),
        destination: pose(100.0, 0.0, 0.0),
        traffic_control: Some(TrafficControl {
            center: Vec2::new(78.0, 0.0),
            radius: 8.0,
            red_interval: (280, 560),
        }),
        route_length,
    }
}

/// 40 m straight, 90-degree left turn of radius 25 m, then 70 m straight.
/// The first obstacle sits on the straight-ahead line from the start, just
/// past the curve entry, so a lead vehicle that fails to turn runs into it.
fn left_turn_spec() -> RouteSpec {
    let mut centerline = vec![pose(0.0, 0.0, 0.0), pose(40.0, 0.0, 0.0)];
    // arc center above the entry point; ccw from -pi/2 to 0
    push_arc(&mut centerline, Vec2::new(40.0, 25.0), 25.0, -PI / 2.0, 0.0, 15);
    centerline.push(pose(65.0, 60.0, PI / 2.0));
    centerline.push(pose(65.0, 95.0, PI / 2.0));
    let route_length = polyline_length(&centerline);
    let obstacles = vec![
        obstacle(56.5, -0.6, 0.0, 2.0, 1.2),
        obstacle(62.0, 7.0, 0.9, 2.0, 1.0),
        obstacle(70.5, 16.0, PI / 2.0, 2.0, 1.0),
        obstacle(70.5, 34.0, PI / 2.0, 2.0, 1.0),
    ];
    RouteSpec {
        id: RouteId::LeftTurn,
        centerline,
        lane_half_width: 2.0,
        obstacles,
        ev_start: pose(0.0, 0.0, 0.0),
        vif_start: pose(25.0, 0.0, 0.0),
        ped_start: pose(20.0, 6.0, 0.0),
        destination: pose(65.0, 95.0, PI / 2.0),
        traffic_control: None,
        route_length,
    }
}

/// 60 m straight, 90-degree right turn of radius 25 m, then 50 m straight.
/// Obstacles line the right shoulder of the approach (like the straight
/// route) and the outside of the bend.
fn right_turn_spec() -> RouteSpec {
    let mut centerline = vec![pose(0.0, 0.0, 0.0), pose(60.0, 0.0, 0.0)];
    // arc center below the entry point; cw from pi/2 to 0
    push_arc(&mut centerline, Vec2::new(60.0, -25.0), 25.0, PI / 2.0, 0.0, 15);
    centerline.push(pose(85.0, -60.0, -PI / 2.0));
    centerline.push(pose(85.0, -75.0, -PI / 2.0));
    let route_length = polyline_length(&centerline);
    let obstacles = vec![
        obstacle(38.0, -5.6, 0.0, 4.0, 1.0),
        obstacle(52.0, -5.6, 0.0, 4.0, 1.0),
        obstacle(76.5, -0.6, 0.0, 2.0, 1.2),
        obstacle(82.0, 7.0, 0.9, 2.0, 1.0),
        obstacle(30.0, 5.6, 0.0, 4.0, 1.0),
    ];
    RouteSpec {
        id: RouteId::RightTurn,
        centerline,
        lane_half_width: 2.0,
        obstacles,
        ev_start: pose(0.0, 0.0, 0.0),
        vif_start: pose(25.0, 0.0, 0.0),
        ped_start: pose(40.0, 6.0, 0.0),
        destination: pose(85.0, -75.0, -PI / 2.0),
        traffic_control: Some(TrafficControl {
            center: Vec2::new(55.0, 0.0),
            radius: 8.0,
            red_interval: (380, 700),
        }),
        route_length,
    }
}
