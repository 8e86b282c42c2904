//! Deterministic 2D driving microworld.
//!
//! One ego vehicle (driven by the scripted controller under test), one lead
//! vehicle whose throttle/steer commands are perturbed by the testing agent,
//! one pedestrian, weather, and static roadside obstacles. Fixed-step Euler
//! integration of a kinematic bicycle model; collision handling freezes
//! actors in contact rather than simulating crash dynamics.

pub mod route;

use crate::agents::actions::{ActionId, ActionKind};
use crate::geom::{circle_obb_intersects, normalize_angle, obb_intersects, Obb, Pose2D, Vec2};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub use route::{Route, RouteId, RouteSpec, TrafficControl};

/// Simulator and controller constants. The controller constants are tuned so
/// that a run without agent perturbations completes every route without a
/// violation, while a lead vehicle intruding into the lane from outside the
/// detection corridor causes collisions.
pub mod params {
    /// Seconds per simulation tick.
    pub const DT: f64 = 0.1;

    pub const VEHICLE_LENGTH: f64 = 4.5;
    pub const VEHICLE_WIDTH: f64 = 2.0;
    pub const WHEELBASE: f64 = 2.8;
    /// Full steering command maps to this wheel angle (radians).
    pub const MAX_WHEEL_ANGLE: f64 = 0.2;

    /// Peak engine acceleration at full throttle.
    pub const ENGINE_ACCEL: f64 = 3.0;
    /// Linear drag coefficient; steady speed is ENGINE_ACCEL*throttle/DRAG.
    pub const DRAG: f64 = 0.35;
    /// Full-brake deceleration in dry conditions (a0).
    pub const BRAKE_DECEL: f64 = 6.0;

    pub const PED_RADIUS: f64 = 0.3;
    pub const PED_SPEED_MAX: f64 = 3.0;

    /// Ego controller: cruise speed and pure-pursuit lookahead.
    pub const TARGET_SPEED: f64 = 8.0;
    pub const LOOKAHEAD: f64 = 6.0;
    /// Clear-weather perception range (R0).
    pub const PERCEPTION_RANGE: f64 = 40.0;
    /// Extra distance beyond the kinematic stopping distance at which the
    /// brake engages. Zero at standstill: a blocked ego creeps forward until
    /// contact, which is the controller's characteristic low-speed rear-end
    /// failure once a lead vehicle stalls in the lane.
    pub const BRAKE_MARGIN: f64 = 0.0;
    pub const SPEED_KP: f64 = 0.5;

    /// Perception range multiplier when the sun is below GLARE_SUN_ALTITUDE.
    pub const GLARE_FACTOR: f64 = 0.6;
    pub const GLARE_SUN_ALTITUDE: f64 = 10.0;
    /// Range loss at full fog: R = R0 * (1 - 0.7 * fog).
    pub const FOG_RANGE_LOSS: f64 = 0.7;
    /// Braking loss at full rain: a = a0 * (1 - 0.5 * rain).
    pub const RAIN_BRAKE_LOSS: f64 = 0.5;

    /// Lead-vehicle throttle command at scenario reset. Off the action grid
    /// (multiples of 0.1) so throttle perturbations never park it exactly.
    pub const VIF_INITIAL_THROTTLE: f64 = 0.95;

    pub const DEFAULT_SUN_ALTITUDE: f64 = 60.0;

    /// Speed above which movement through a red control zone is a violation.
    pub const TRAFFIC_SPEED_LIMIT: f64 = 0.5;
}

use params::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: Pose2D,
    pub speed: f64,
    pub accel: f64,
    /// Persistent throttle command in [0, 1].
    pub throttle: f64,
    /// Persistent steering command in [-1, 1]; positive steers left.
    pub steer: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn at(pose: Pose2D) -> Self {
        VehicleState {
            pose,
            speed: 0.0,
            accel: 0.0,
            throttle: 0.0,
            steer: 0.0,
            length: VEHICLE_LENGTH,
            width: VEHICLE_WIDTH,
        }
    }

    pub fn obb(&self) -> Obb {
        Obb::new(
            self.pose.position(),
            self.pose.heading,
            self.length,
            self.width,
        )
    }

    /// Radius of the inscribed circle used by the distance metrics.
    pub fn inscribed_radius(&self) -> f64 {
        self.width / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianState {
    pub pose: Pose2D,
    /// Walking speed in [0, 3] m/s.
    pub speed: f64,
    pub radius: f64,
}

impl PedestrianState {
    pub fn at(pose: Pose2D) -> Self {
        PedestrianState {
            pose,
            speed: 0.0,
            radius: PED_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub fog: f64,
    pub rain: f64,
    /// Degrees in [-90, 90].
    pub sun_altitude: f64,
}

impl Weather {
    pub fn clear() -> Self {
        Weather {
            fog: 0.0,
            rain: 0.0,
            sun_altitude: DEFAULT_SUN_ALTITUDE,
        }
    }

    pub fn clamp(&mut self) {
        self.fog = self.fog.clamp(0.0, 1.0);
        self.rain = self.rain.clamp(0.0, 1.0);
        self.sun_altitude = self.sun_altitude.clamp(-90.0, 90.0);
    }
}

/// Driving command produced by the scripted controller each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvCommand {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

impl EvCommand {
    pub fn new(throttle: f64, brake: f64, steer: f64) -> Self {
        EvCommand {
            throttle: throttle.clamp(0.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
            steer: steer.clamp(-1.0, 1.0),
        }
    }
}

/// Full simulator snapshot.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub ev: VehicleState,
    pub vif: VehicleState,
    pub ped: PedestrianState,
    pub weather: Weather,
    pub route: Arc<Route>,
    pub tick: u64,
    pub dt: f64,
}

impl WorldState {
    /// Arc-length progress of a point along the route centerline.
    pub fn progress_of(&self, p: Vec2) -> f64 {
        self.route.line.project(p).s
    }

    pub fn ev_progress(&self) -> f64 {
        self.progress_of(self.ev.pose.position())
    }

    /// Remaining route fraction in [0, 1]; 1.0 at the start line.
    pub fn dt_norm(&self) -> f64 {
        let l = self.route.line.length();
        ((l - self.ev_progress()) / l).clamp(0.0, 1.0)
    }

    /// True while the ego vehicle moves through an active red control zone.
    pub fn traffic_rule_violated(&self) -> bool {
        match &self.route.spec.traffic_control {
            None => false,
            Some(tc) => {
                let (t0, t1) = tc.red_interval;
                self.tick >= t0
                    && self.tick <= t1
                    && self.ev.pose.position().distance(tc.center) <= tc.radius
                    && self.ev.speed > TRAFFIC_SPEED_LIMIT
            }
        }
    }
}

/// Signed separation of two actors: Euclidean distance between centers minus
/// the sum of their inscribed-circle radii. Can be positive while the actual
/// bodies already intersect (e.g. corner contact of two rectangles); sensor
/// detection and this metric deliberately disagree in that band.
pub fn center_distance(a: Vec2, a_inscribed: f64, b: Vec2, b_inscribed: f64) -> f64 {
    a.distance(b) - a_inscribed - b_inscribed
}

/// Place the actors at their start poses with zero speed and clear weather.
pub fn reset_scenario(route: &Arc<Route>) -> WorldState {
    let spec = &route.spec;
    let mut vif = VehicleState::at(spec.vif_start);
    vif.throttle = VIF_INITIAL_THROTTLE;
    WorldState {
        ev: VehicleState::at(spec.ev_start),
        vif,
        ped: PedestrianState::at(spec.ped_start),
        weather: Weather::clear(),
        route: Arc::clone(route),
        tick: 0,
        dt: DT,
    }
}

/// Apply one perturbation action: exactly one controlled variable changes by
/// its table delta and is clamped to its range.
pub fn apply_action(world: &mut WorldState, action: ActionId) {
    match action.kind() {
        ActionKind::VifThrottle(d) => {
            world.vif.throttle = (world.vif.throttle + d).clamp(0.0, 1.0);
        }
        ActionKind::VifSteer(d) => {
            world.vif.steer = (world.vif.steer + d).clamp(-1.0, 1.0);
        }
        ActionKind::PedSpeed(d) => {
            world.ped.speed = (world.ped.speed + d).clamp(0.0, PED_SPEED_MAX);
        }
        ActionKind::PedShiftX(d) => {
            world.ped.pose.x += d;
        }
        ActionKind::PedShiftY(d) => {
            world.ped.pose.y += d;
        }
        ActionKind::Fog(d) => {
            world.weather.fog += d;
            world.weather.clamp();
        }
        ActionKind::Rain(d) => {
            world.weather.rain += d;
            world.weather.clamp();
        }
        ActionKind::SunAltitude(d) => {
            world.weather.sun_altitude += d;
            world.weather.clamp();
        }
        ActionKind::NoOp => {}
    }
}

/// Effective perception range under the current weather.
pub fn perception_range(weather: &Weather) -> f64 {
    let glare = if weather.sun_altitude < GLARE_SUN_ALTITUDE {
        GLARE_FACTOR
    } else {
        1.0
    };
    PERCEPTION_RANGE * (1.0 - FOG_RANGE_LOSS * weather.fog) * glare
}

/// Effective full-brake deceleration under the current weather.
pub fn brake_decel(weather: &Weather) -> f64 {
    BRAKE_DECEL * (1.0 - RAIN_BRAKE_LOSS * weather.rain)
}

struct PerceivedObject {
    /// Arc-length gap from the ego front to the object's near edge.
    gap: f64,
}

/// The scripted lane-following controller: pure-pursuit steering toward a
/// lookahead point, proportional speed control toward the cruise speed, and
/// a full brake when a perceived object sits inside the braking envelope.
///
/// Perception is a corridor test on object centers: an object is seen only
/// when its center lies ahead within the weather-limited range and within
/// `lane_half_width` of the centerline. Bodies that straddle the lane edge
/// with their center outside the corridor are not seen; this blind spot is a
/// deliberate property of the controller under test.
pub fn ads_control(world: &WorldState) -> EvCommand {
    let line = &world.route.line;
    let ev = &world.ev;
    let proj = line.project(ev.pose.position());

    // pure pursuit toward the lookahead point
    let (target, _) = line.point_at(proj.s + LOOKAHEAD);
    let to_target = target - ev.pose.position();
    let alpha = normalize_angle(to_target.y.atan2(to_target.x) - ev.pose.heading);
    let wheel = (2.0 * WHEELBASE * alpha.sin()).atan2(LOOKAHEAD);
    let steer = (wheel / MAX_WHEEL_ANGLE).clamp(-1.0, 1.0);

    let range = perception_range(&world.weather);
    let w_detect = world.route.spec.lane_half_width;
    let mut perceived: Vec<PerceivedObject> = Vec::new();

    let mut consider = |center: Vec2, half_len: f64| {
        let op = line.project(center);
        let ahead = op.s_extended - proj.s_extended;
        if op.lateral.abs() <= w_detect && ahead > 0.0 && ahead <= range {
            perceived.push(PerceivedObject {
                gap: ahead - (ev.length / 2.0 + half_len),
            });
        }
    };
    consider(world.vif.pose.position(), world.vif.length / 2.0);
    consider(world.ped.pose.position(), world.ped.radius);
    for o in &world.route.spec.obstacles {
        consider(o.center, o.length / 2.0);
    }

    let decel = brake_decel(&world.weather);
    let envelope = ev.speed * ev.speed / (2.0 * decel) + BRAKE_MARGIN;
    let braking = perceived.iter().any(|p| p.gap <= envelope);

    if braking {
        EvCommand::new(0.0, 1.0, steer)
    } else {
        let feedforward = DRAG * TARGET_SPEED / ENGINE_ACCEL;
        let throttle = feedforward + SPEED_KP * (TARGET_SPEED - ev.speed);
        EvCommand::new(throttle, 0.0, steer)
    }
}

fn vehicle_overlaps_obstacle(v: &VehicleState, obstacles: &[Obb]) -> bool {
    let body = v.obb();
    obstacles.iter().any(|o| obb_intersects(&body, o))
}

fn ped_overlaps_obstacle(p: &PedestrianState, obstacles: &[Obb]) -> bool {
    obstacles
        .iter()
        .any(|o| circle_obb_intersects(p.pose.position(), p.radius, o))
}

/// Explicit-Euler vehicle step: position advances with the pre-update speed
/// and heading, then heading and speed update.
fn integrate_vehicle(v: &mut VehicleState, throttle: f64, brake: f64, steer: f64, weather: &Weather, dt: f64) {
    let old_speed = v.speed;
    let dir = Vec2::from_heading(v.pose.heading);
    v.pose.x += dt * old_speed * dir.x;
    v.pose.y += dt * old_speed * dir.y;

    let wheel = steer.clamp(-1.0, 1.0) * MAX_WHEEL_ANGLE;
    v.pose.heading = normalize_angle(v.pose.heading + dt * old_speed * wheel.tan() / WHEELBASE);

    let accel = ENGINE_ACCEL * throttle - brake_decel(weather) * brake - DRAG * old_speed;
    v.speed = (old_speed + dt * accel).max(0.0);
    v.accel = (v.speed - old_speed) / dt;
}

/// Advance the world by one tick. The ego vehicle follows `ev_cmd`, the lead
/// vehicle its persistent commands, the pedestrian its heading and speed.
///
/// Contact rules: an actor may end a step overlapping an obstacle (or the
/// other vehicle) — that first contact stands and the actor stops; once in
/// contact, further motion that keeps it in contact is rolled back, holding
/// the pose at contact.
pub fn simulate_tick(world: &mut WorldState, ev_cmd: EvCommand) {
    let obstacles = &world.route.spec.obstacles;
    let weather = world.weather;
    let dt = world.dt;

    let ev_before = world.ev;
    let vif_before = world.vif;
    let ped_before = world.ped;
    let ev_was_stuck = vehicle_overlaps_obstacle(&world.ev, obstacles);
    let vif_was_stuck = vehicle_overlaps_obstacle(&world.vif, obstacles);
    let ped_was_stuck = ped_overlaps_obstacle(&world.ped, obstacles);
    let vv_was_contact = obb_intersects(&world.ev.obb(), &world.vif.obb());

    integrate_vehicle(
        &mut world.ev,
        ev_cmd.throttle,
        ev_cmd.brake,
        ev_cmd.steer,
        &weather,
        dt,
    );
    let vif_throttle = world.vif.throttle;
    let vif_steer = world.vif.steer;
    integrate_vehicle(&mut world.vif, vif_throttle, 0.0, vif_steer, &weather, dt);

    {
        let ped = &mut world.ped;
        let old_speed = ped.speed;
        let dir = Vec2::from_heading(ped.pose.heading);
        ped.pose.x += dt * old_speed * dir.x;
        ped.pose.y += dt * old_speed * dir.y;
    }

    // obstacle contact: stop, and hold the pose once in contact
    if vehicle_overlaps_obstacle(&world.ev, obstacles) {
        if ev_was_stuck {
            world.ev.pose = ev_before.pose;
        }
        world.ev.accel = (0.0 - ev_before.speed) / dt;
        world.ev.speed = 0.0;
    }
    if vehicle_overlaps_obstacle(&world.vif, obstacles) {
        if vif_was_stuck {
            world.vif.pose = vif_before.pose;
        }
        world.vif.accel = (0.0 - vif_before.speed) / dt;
        world.vif.speed = 0.0;
    }
    if ped_overlaps_obstacle(&world.ped, obstacles) {
        if ped_was_stuck {
            world.ped.pose = ped_before.pose;
        }
        world.ped.speed = 0.0;
    }

    // vehicle-vehicle contact: both stop; the first overlapping pose stands
    // so collision sensors observe the intersection
    if obb_intersects(&world.ev.obb(), &world.vif.obb()) {
        if vv_was_contact {
            world.ev.pose = ev_before.pose;
            world.vif.pose = vif_before.pose;
        }
        world.ev.accel = (0.0 - ev_before.speed) / dt;
        world.vif.accel = (0.0 - vif_before.speed) / dt;
        world.ev.speed = 0.0;
        world.vif.speed = 0.0;
    }

    world.tick += 1;
}
