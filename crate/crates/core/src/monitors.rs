//! Requirement monitors: the six distance metrics, violation detection under
//! three detection modes, and the per-requirement reward functions.

use crate::geom::{circle_obb_intersects, obb_intersects};
use crate::microworld::{center_distance, WorldState};
use serde::{Deserialize, Serialize};

pub const REQUIREMENT_COUNT: usize = 6;

/// Reward returned by every reward function while its requirement is
/// violated.
pub const VIOLATION_REWARD: f64 = 1.0e6;

/// Lane-keeping violation threshold on the distance from the lane center.
pub const DCL_THRESHOLD: f64 = 1.15;

/// Floor applied to distances inside the dense rewards, capping them at 100.
pub const DISTANCE_FLOOR: f64 = 0.01;

/// The six requirements, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Requirement {
    /// Keep the lane (distance from center of lane).
    R1Dcl,
    /// No collision with the vehicle in front.
    R2Dv,
    /// No collision with the pedestrian.
    R3Dp,
    /// No collision with static obstacles.
    R4Ds,
    /// Complete the route in time (distance from destination).
    R5Dt,
    /// Abide by traffic rules.
    R6Tr,
}

impl Requirement {
    pub const ALL: [Requirement; REQUIREMENT_COUNT] = [
        Requirement::R1Dcl,
        Requirement::R2Dv,
        Requirement::R3Dp,
        Requirement::R4Ds,
        Requirement::R5Dt,
        Requirement::R6Tr,
    ];

    pub fn index(self) -> usize {
        match self {
            Requirement::R1Dcl => 0,
            Requirement::R2Dv => 1,
            Requirement::R3Dp => 2,
            Requirement::R4Ds => 3,
            Requirement::R5Dt => 4,
            Requirement::R6Tr => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Requirement::R1Dcl => "R1_DCL",
            Requirement::R2Dv => "R2_DV",
            Requirement::R3Dp => "R3_DP",
            Requirement::R4Ds => "R4_DS",
            Requirement::R5Dt => "R5_DT",
            Requirement::R6Tr => "R6_TR",
        }
    }
}

/// Small set of requirements backed by a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RequirementSet(pub u8);

impl RequirementSet {
    pub const EMPTY: RequirementSet = RequirementSet(0);

    pub fn insert(&mut self, r: Requirement) {
        self.0 |= 1 << r.index();
    }

    pub fn contains(self, r: Requirement) -> bool {
        self.0 & (1 << r.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Requirement> {
        Requirement::ALL.into_iter().filter(move |r| self.contains(*r))
    }

    pub fn union(self, other: RequirementSet) -> RequirementSet {
        RequirementSet(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: RequirementSet) -> bool {
        self.0 & !other.0 == 0
    }
}

impl FromIterator<Requirement> for RequirementSet {
    fn from_iter<T: IntoIterator<Item = Requirement>>(iter: T) -> Self {
        let mut s = RequirementSet::EMPTY;
        for r in iter {
            s.insert(r);
        }
        s
    }
}

/// How violations are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Geometric sensors: body intersection and lane-invasion checks.
    Sensor,
    /// Distance metrics against fixed thresholds only.
    Threshold,
    /// Thresholds, but each distance is forced to its threshold value
    /// whenever the corresponding sensor fires.
    Fused,
}

impl std::str::FromStr for DetectionMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sensor" => Ok(DetectionMode::Sensor),
            "threshold" => Ok(DetectionMode::Threshold),
            "fused" => Ok(DetectionMode::Fused),
            other => Err(crate::Error::config(format!("unknown detection mode `{other}`"))),
        }
    }
}

/// The six requirement metrics at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceVector {
    /// Distance of the ego center from the lane centerline (>= 0).
    pub dcl: f64,
    /// Signed separation to the vehicle in front.
    pub dv: f64,
    /// Signed separation to the pedestrian.
    pub dp: f64,
    /// Signed separation to the nearest static obstacle.
    pub ds: f64,
    /// Remaining route fraction in [0, 1].
    pub dt_norm: f64,
    /// True while the ego vehicle moves through an active red zone.
    pub tr_violated: bool,
}

/// Raw sensor readings at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SensorFlags {
    pub vif_contact: bool,
    pub ped_contact: bool,
    pub static_contact: bool,
    pub lane_invasion: bool,
}

/// One latched violation; at most one per requirement and episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub episode: u64,
    pub tick: u64,
    pub requirement: Requirement,
}

pub fn compute_distances(world: &WorldState) -> DistanceVector {
    let ev = &world.ev;
    let line = &world.route.line;
    let dcl = line.project(ev.pose.position()).lateral.abs();
    let dv = center_distance(
        ev.pose.position(),
        ev.inscribed_radius(),
        world.vif.pose.position(),
        world.vif.inscribed_radius(),
    );
    let dp = center_distance(
        ev.pose.position(),
        ev.inscribed_radius(),
        world.ped.pose.position(),
        world.ped.radius,
    );
    let ds = world
        .route
        .spec
        .obstacles
        .iter()
        .map(|o| center_distance(ev.pose.position(), ev.inscribed_radius(), o.center, o.width / 2.0))
        .fold(1.0e9, f64::min);
    DistanceVector {
        dcl,
        dv,
        dp,
        ds,
        dt_norm: world.dt_norm(),
        tr_violated: world.traffic_rule_violated(),
    }
}

pub fn sensor_flags(world: &WorldState) -> SensorFlags {
    let ev_obb = world.ev.obb();
    let vif_contact = obb_intersects(&ev_obb, &world.vif.obb());
    let ped_contact = circle_obb_intersects(world.ped.pose.position(), world.ped.radius, &ev_obb);
    let static_contact = world
        .route
        .spec
        .obstacles
        .iter()
        .any(|o| obb_intersects(&ev_obb, o));
    let half = world.route.spec.lane_half_width;
    let lane_invasion = ev_obb
        .corners()
        .iter()
        .any(|c| world.route.line.project(*c).lateral.abs() > half);
    SensorFlags {
        vif_contact,
        ped_contact,
        static_contact,
        lane_invasion,
    }
}

/// Distances with each value forced to its violation threshold when the
/// corresponding sensor fired. This is the "fused" view that the learning
/// agents are rewarded on.
pub fn fused_distances(d: &DistanceVector, flags: &SensorFlags) -> DistanceVector {
    DistanceVector {
        dcl: if flags.lane_invasion { DCL_THRESHOLD } else { d.dcl },
        dv: if flags.vif_contact { 0.0 } else { d.dv },
        dp: if flags.ped_contact { 0.0 } else { d.dp },
        ds: if flags.static_contact { 0.0 } else { d.ds },
        dt_norm: d.dt_norm,
        tr_violated: d.tr_violated,
    }
}

/// Instantaneous violation check.
///
/// `episode_end` is true only when the scenario ran its course (destination
/// reached or time exhausted); the completion requirement is checked then.
/// Under `Fused`, a sensor-forced distance counts as violated even though
/// the threshold comparison for the lane metric is strict.
pub fn detect_violations(
    d: &DistanceVector,
    flags: &SensorFlags,
    mode: DetectionMode,
    episode_end: bool,
) -> RequirementSet {
    let mut out = RequirementSet::EMPTY;
    let threshold_hits = |out: &mut RequirementSet| {
        if d.dcl > DCL_THRESHOLD {
            out.insert(Requirement::R1Dcl);
        }
        if d.dv <= 0.0 {
            out.insert(Requirement::R2Dv);
        }
        if d.dp <= 0.0 {
            out.insert(Requirement::R3Dp);
        }
        if d.ds <= 0.0 {
            out.insert(Requirement::R4Ds);
        }
    };
    let sensor_hits = |out: &mut RequirementSet| {
        if flags.lane_invasion {
            out.insert(Requirement::R1Dcl);
        }
        if flags.vif_contact {
            out.insert(Requirement::R2Dv);
        }
        if flags.ped_contact {
            out.insert(Requirement::R3Dp);
        }
        if flags.static_contact {
            out.insert(Requirement::R4Ds);
        }
    };
    match mode {
        DetectionMode::Threshold => threshold_hits(&mut out),
        DetectionMode::Sensor => sensor_hits(&mut out),
        DetectionMode::Fused => {
            threshold_hits(&mut out);
            sensor_hits(&mut out);
        }
    }
    if episode_end && d.dt_norm > 0.0 {
        out.insert(Requirement::R5Dt);
    }
    if d.tr_violated {
        out.insert(Requirement::R6Tr);
    }
    out
}

/// Per-requirement reward. While a requirement is violated the reward is the
/// large constant; otherwise it is a dense inverse-distance signal except
/// for the traffic-rule requirement, whose reward is sparse (zero).
pub fn reward(req: Requirement, d: &DistanceVector, violated: bool) -> f64 {
    if violated {
        return VIOLATION_REWARD;
    }
    match req {
        Requirement::R1Dcl => {
            let dcl_norm = (d.dcl / DCL_THRESHOLD).min(1.0);
            1.0 / (1.0 - dcl_norm).max(DISTANCE_FLOOR)
        }
        Requirement::R2Dv => 1.0 / d.dv.max(DISTANCE_FLOOR),
        Requirement::R3Dp => 1.0 / d.dp.max(DISTANCE_FLOOR),
        Requirement::R4Ds => 1.0 / d.ds.max(DISTANCE_FLOOR),
        Requirement::R5Dt => {
            let remaining = 1.0 - d.dt_norm;
            if remaining <= 0.0 {
                VIOLATION_REWARD
            } else {
                1.0 / remaining.max(DISTANCE_FLOOR)
            }
        }
        Requirement::R6Tr => 0.0,
    }
}

/// Reward vector over all six requirements from the fused distances.
pub fn reward_vector(d: &DistanceVector, violated: RequirementSet) -> [f64; REQUIREMENT_COUNT] {
    let mut out = [0.0; REQUIREMENT_COUNT];
    for req in Requirement::ALL {
        out[req.index()] = reward(req, d, violated.contains(req));
    }
    out
}
