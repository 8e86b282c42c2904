//! Testing agents: observation/state-key encodings, the random baseline,
//! tabular Q-learning, and the many-objective controller.

pub mod actions;
pub mod morlot;
pub mod qtable;

pub use actions::{random_select, ActionId, ActionKind, ACTION_COUNT};
pub use morlot::{morlot_select, morlot_update, MorlotState};
pub use qtable::{q_select, q_update, QTable};

use crate::geom::normalize_angle;
use crate::microworld::WorldState;
use crate::monitors::REQUIREMENT_COUNT;
use serde::{Deserialize, Serialize};

pub const OBSERVATION_LEN: usize = 19;

/// Coordinate frame for observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Raw world coordinates (the original formulation).
    Absolute,
    /// Ego-centric polar coordinates for the other actors and lane-centric
    /// coordinates for the ego vehicle.
    Relative,
}

/// The 19 state variables in their fixed slot order:
///
/// ```text
///  0..5   EV    x, y, heading, speed, accel
///  5..10  VIF   x, y, heading, speed, accel
/// 10..14  PED   x, y, heading, speed
/// 14..17  fog, rain, sun_altitude
/// 17..19  VIF throttle command, VIF steer command
/// ```
///
/// In the relative frame, positions of the VIF and pedestrian become
/// (range, bearing) about the ego vehicle, their headings become heading
/// differences, and the ego slots become (arc-length progress, lateral
/// offset, heading error to the route tangent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub [f64; OBSERVATION_LEN]);

impl Observation {
    pub fn slots(&self) -> &[f64; OBSERVATION_LEN] {
        &self.0
    }
}

pub fn encode_observation(world: &WorldState, frame: Frame) -> Observation {
    let ev = &world.ev;
    let vif = &world.vif;
    let ped = &world.ped;
    let w = &world.weather;
    let mut o = [0.0; OBSERVATION_LEN];
    match frame {
        Frame::Absolute => {
            o[0] = ev.pose.x;
            o[1] = ev.pose.y;
            o[2] = ev.pose.heading;
            o[5] = vif.pose.x;
            o[6] = vif.pose.y;
            o[7] = vif.pose.heading;
            o[10] = ped.pose.x;
            o[11] = ped.pose.y;
            o[12] = ped.pose.heading;
        }
        Frame::Relative => {
            let proj = world.route.line.project(ev.pose.position());
            o[0] = proj.s;
            o[1] = proj.lateral;
            o[2] = normalize_angle(ev.pose.heading - proj.tangent);
            let polar = |x: f64, y: f64| {
                let dx = x - ev.pose.x;
                let dy = y - ev.pose.y;
                let range = (dx * dx + dy * dy).sqrt();
                let bearing = if range > 0.0 {
                    normalize_angle(dy.atan2(dx) - ev.pose.heading)
                } else {
                    0.0
                };
                (range, bearing)
            };
            let (r, b) = polar(vif.pose.x, vif.pose.y);
            o[5] = r;
            o[6] = b;
            o[7] = normalize_angle(vif.pose.heading - ev.pose.heading);
            let (r, b) = polar(ped.pose.x, ped.pose.y);
            o[10] = r;
            o[11] = b;
            o[12] = normalize_angle(ped.pose.heading - ev.pose.heading);
        }
    }
    o[3] = ev.speed;
    o[4] = ev.accel;
    o[8] = vif.speed;
    o[9] = vif.accel;
    o[13] = ped.speed;
    o[14] = w.fog;
    o[15] = w.rain;
    o[16] = w.sun_altitude;
    o[17] = vif.throttle;
    o[18] = vif.steer;
    Observation(o)
}

/// Decimal precision used when turning observations into table keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPrecision {
    /// Shortest round-trip formatting; distinct values give distinct keys.
    Full,
    /// Fixed number of decimals (coarse bucketing).
    Decimals(u8),
}

impl std::str::FromStr for KeyPrecision {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(KeyPrecision::Full);
        }
        s.parse::<u8>()
            .map(KeyPrecision::Decimals)
            .map_err(|_| crate::Error::config(format!("bad key precision `{s}` (want `full` or 0-17)")))
    }
}

/// Text key: the 19 observation values joined with `|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateKey(pub String);

impl StateKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn encode_state_key(obs: &Observation, precision: KeyPrecision) -> StateKey {
    use std::fmt::Write as _;
    let mut out = String::with_capacity(OBSERVATION_LEN * 8);
    for (i, v) in obs.0.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        match precision {
            // `{}` on f64 prints the shortest string that parses back exactly
            KeyPrecision::Full => write!(out, "{v}").unwrap(),
            KeyPrecision::Decimals(d) => write!(out, "{:.*}", d as usize, v).unwrap(),
        }
    }
    StateKey(out)
}

/// One step of experience. Tabular agents use the text keys, the deep agent
/// the raw observations; the reward vector is indexed by requirement order.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state_key: StateKey,
    pub action: ActionId,
    pub reward: [f64; REQUIREMENT_COUNT],
    pub next_state_key: StateKey,
    pub obs: Observation,
    pub next_obs: Observation,
    pub done: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microworld::{reset_scenario, Route, RouteId};
    use crate::geom::Pose2D;

    #[test]
    fn absolute_encoding_at_rest() {
        let w = reset_scenario(&Route::builtin(RouteId::Straight));
        let obs = encode_observation(&w, Frame::Absolute);
        assert_eq!(obs.0[3], 0.0); // EV speed
        assert_eq!(obs.0[5], 60.0); // VIF x
        assert_eq!(obs.0[16], 60.0); // sun altitude
        assert_eq!(obs.0[17], w.vif.throttle);
    }

    #[test]
    fn relative_encoding_collinear_vif() {
        let mut w = reset_scenario(&Route::builtin(RouteId::Straight));
        w.ev.pose = Pose2D::new(5.0, 0.0, 0.0);
        w.vif.pose = Pose2D::new(15.0, 0.0, 0.0);
        let obs = encode_observation(&w, Frame::Relative);
        assert!((obs.0[5] - 10.0).abs() < 1e-12); // range
        assert_eq!(obs.0[6], 0.0); // bearing
    }

    /// Two geometrically identical scenes at different absolute positions:
    /// equal relative encodings, different absolute encodings.
    #[test]
    fn translation_collapses_in_relative_frame() {
        let base = Route::builtin(RouteId::Straight);
        let mut shifted_spec = base.spec.clone();
        let dx = 500.0;
        for p in &mut shifted_spec.centerline {
            p.x += dx;
        }
        shifted_spec.ev_start.x += dx;
        shifted_spec.vif_start.x += dx;
        shifted_spec.ped_start.x += dx;
        shifted_spec.destination.x += dx;
        for o in &mut shifted_spec.obstacles {
            o.center.x += dx;
        }
        if let Some(tc) = &mut shifted_spec.traffic_control {
            tc.center.x += dx;
        }
        let shifted = Route::from_spec(shifted_spec).unwrap();

        let wa = reset_scenario(&base);
        let wb = reset_scenario(&shifted);
        let rel_a = encode_observation(&wa, Frame::Relative);
        let rel_b = encode_observation(&wb, Frame::Relative);
        let abs_a = encode_observation(&wa, Frame::Absolute);
        let abs_b = encode_observation(&wb, Frame::Absolute);
        for i in 0..OBSERVATION_LEN {
            assert!((rel_a.0[i] - rel_b.0[i]).abs() < 1e-9, "slot {i}");
        }
        assert_ne!(abs_a.0[0], abs_b.0[0]);
    }

    #[test]
    fn key_rounding_contract() {
        let mut o = [0.0; OBSERVATION_LEN];
        o[0] = 1.234;
        let key = encode_state_key(&Observation(o), KeyPrecision::Decimals(1));
        assert!(key.as_str().starts_with("1.2|"));
    }

    #[test]
    fn keys_are_deterministic() {
        let mut o = [0.0; OBSERVATION_LEN];
        o[4] = -0.125;
        o[18] = 0.3;
        let obs = Observation(o);
        assert_eq!(
            encode_state_key(&obs, KeyPrecision::Full),
            encode_state_key(&obs, KeyPrecision::Full)
        );
    }

    /// Full precision distinguishes observations that differ by 1e-9 in a
    /// single slot.
    #[test]
    fn full_precision_keys_are_injective() {
        let mut a = [0.5; OBSERVATION_LEN];
        let mut b = [0.5; OBSERVATION_LEN];
        b[7] += 1e-9;
        a[0] = 0.0;
        b[0] = 0.0;
        let ka = encode_state_key(&Observation(a), KeyPrecision::Full);
        let kb = encode_state_key(&Observation(b), KeyPrecision::Full);
        assert_ne!(ka, kb);
        // and a parsed-back key reproduces the slots exactly
        let parsed: Vec<f64> = ka
            .as_str()
            .split('|')
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(parsed.len(), OBSERVATION_LEN);
        for (p, v) in parsed.iter().zip(a.iter()) {
            assert_eq!(p, v);
        }
    }
}
