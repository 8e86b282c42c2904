//! Campaign orchestration: budgets, the epsilon schedule, episode
//! termination, violation/coverage timelines, trajectory and table-growth
//! logging, and seeded parallel repetitions.

pub mod output;

use crate::agents::{
    encode_observation, encode_state_key, morlot_select, morlot_update, q_select, q_update,
    random_select, ActionId, Frame, KeyPrecision, MorlotState, QTable, StateKey,
    Transition,
};
use crate::deepq::{DqnAgent, DqnHyper, Normalizer, TrainOutcome};
use crate::error::{Error, Result};
use crate::microworld::{
    ads_control, apply_action, reset_scenario, simulate_tick, Route, RouteId, WorldState,
};
use crate::monitors::{
    compute_distances, detect_violations, fused_distances, reward_vector, sensor_flags,
    DetectionMode, DistanceVector, Requirement, RequirementSet, SensorFlags, ViolationEvent,
    REQUIREMENT_COUNT,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Number of timeline samples over a campaign budget (the analog of
/// sampling every 20 minutes of a 4-hour run).
pub const TIMELINE_SAMPLES: usize = 12;

/// Stream separator between the action rng and the training rng, so that
/// replay sampling never perturbs the action sequence.
const TRAIN_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Random,
    Q,
    Morlot,
    Dqn,
}

impl Technique {
    pub fn name(&self) -> &'static str {
        match self {
            Technique::Random => "random",
            Technique::Q => "q",
            Technique::Morlot => "morlot",
            Technique::Dqn => "dqn",
        }
    }
}

impl std::str::FromStr for Technique {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Technique::Random),
            "q" => Ok(Technique::Q),
            "morlot" => Ok(Technique::Morlot),
            "dqn" => Ok(Technique::Dqn),
            other => Err(Error::config(format!("unknown technique `{other}`"))),
        }
    }
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Replication keeps all six objectives; the extension focuses on the
/// vehicle-collision requirement and terminates episodes once a collision
/// happened or can no longer happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignMode {
    Replication,
    Extension,
}

impl std::str::FromStr for CampaignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replication" => Ok(CampaignMode::Replication),
            "extension" => Ok(CampaignMode::Extension),
            other => Err(Error::config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub technique: Technique,
    pub route: RouteId,
    pub mode: CampaignMode,
    /// `None` selects the per-technique default: learned techniques use the
    /// fused detector, the random baseline the plain sensors.
    pub detection: Option<DetectionMode>,
    /// Total simulator ticks per repetition.
    pub budget_steps: u64,
    /// Tick limit per episode.
    pub episode_timeout: u64,
    pub repetitions: u32,
    pub base_seed: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the budget over which epsilon anneals linearly.
    pub anneal_fraction: f64,
    /// Hold each selected action for this many ticks.
    pub action_repeat: u64,
    pub frame: Frame,
    pub key_precision: KeyPrecision,
    /// Tabular learning rate and discount.
    pub alpha: f64,
    pub gamma: f64,
    pub dqn: DqnHyper,
    /// Worker threads for repetitions; 0 means all logical cores.
    pub jobs: usize,
    /// Keep per-tick records in memory (needed for detection replay and
    /// selection-trace analysis).
    pub retain_ticks: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            technique: Technique::Random,
            route: RouteId::Straight,
            mode: CampaignMode::Replication,
            detection: None,
            budget_steps: 200_000,
            episode_timeout: 400,
            repetitions: 10,
            base_seed: 1,
            eps_start: 1.0,
            eps_end: 0.1,
            anneal_fraction: 0.2,
            action_repeat: 1,
            frame: Frame::Absolute,
            key_precision: KeyPrecision::Full,
            alpha: 0.1,
            gamma: 0.99,
            dqn: DqnHyper::default(),
            jobs: 0,
            retain_ticks: false,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget_steps <= self.episode_timeout {
            return Err(Error::config("budget_steps must exceed episode_timeout"));
        }
        if self.repetitions < 1 {
            return Err(Error::config("repetitions must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return Err(Error::config("epsilon bounds must lie in [0, 1]"));
        }
        if !(self.anneal_fraction > 0.0 && self.anneal_fraction <= 1.0) {
            return Err(Error::config("anneal_fraction must lie in (0, 1]"));
        }
        if self.action_repeat < 1 {
            return Err(Error::config("action_repeat must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("alpha and gamma must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn detection_mode(&self) -> DetectionMode {
        self.detection.unwrap_or(match self.technique {
            Technique::Random => DetectionMode::Sensor,
            _ => DetectionMode::Fused,
        })
    }

    /// Deterministic default output directory name.
    pub fn campaign_id(&self) -> String {
        format!(
            "{}_{}_{}_s{}",
            self.technique.name(),
            self.route.name(),
            match self.mode {
                CampaignMode::Replication => "replication",
                CampaignMode::Extension => "extension",
            },
            self.base_seed
        )
    }
}

/// Linear anneal from `eps_start` to `eps_end` over the first
/// `anneal_fraction` of the budget, then constant.
pub fn epsilon_at(step: u64, cfg: &CampaignConfig) -> f64 {
    let anneal = cfg.anneal_fraction * cfg.budget_steps as f64;
    if (step as f64) >= anneal {
        cfg.eps_end
    } else {
        cfg.eps_start + (cfg.eps_end - cfg.eps_start) * step as f64 / anneal
    }
}

/// True once the ego's arc-length progress exceeds the lead vehicle's by
/// more than one vehicle length (strict).
pub fn overtake_detected(world: &WorldState) -> bool {
    let s_ev = world.progress_of(world.ev.pose.position());
    let s_vif = world.progress_of(world.vif.pose.position());
    s_ev > s_vif + world.ev.length
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    Destination,
    Timeout,
    Collision,
    Overtake,
}

/// Everything observed at one agent step (window end).
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub tick: u64,
    pub action: ActionId,
    pub distances: DistanceVector,
    pub flags: SensorFlags,
    pub reward: [f64; REQUIREMENT_COUNT],
    pub epsilon: f64,
    /// Requirement whose table drove this step (many-objective only).
    pub chosen: Option<Requirement>,
    /// Previous-step reward vector at selection time (many-objective only).
    pub last_reward: Option<[f64; REQUIREMENT_COUNT]>,
    /// Uncovered set at selection time (many-objective only).
    pub uncovered: Option<RequirementSet>,
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: u64,
    pub start_step: u64,
    pub ticks_used: u64,
    pub cause: TerminationCause,
    pub violations: Vec<ViolationEvent>,
    /// Lead-vehicle positions per tick; retained only for failing episodes
    /// unless tick retention is on.
    pub vif_trajectory: Vec<(f64, f64)>,
    pub records: Vec<TickRecord>,
}

impl EpisodeLog {
    pub fn failing(&self) -> bool {
        !self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub sample_index: usize,
    pub step: u64,
    /// Covered requirements / 6.
    pub coverage: f64,
    /// Counted violations up to this step (mode-dependent).
    pub violations_total: u64,
}

/// A violation event stamped with the global step it occurred at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StampedEvent {
    pub step: u64,
    pub event: ViolationEvent,
}

#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub repetition: u32,
    pub seed: u64,
    pub events: Vec<StampedEvent>,
    pub timeline: Vec<SamplePoint>,
    /// (step, distinct states per table); one column for plain Q-learning,
    /// six for the many-objective controller.
    pub growth: Vec<(u64, Vec<usize>)>,
    /// (step, loss, epsilon) — deep agent only.
    pub loss_curve: Vec<(u64, f64, f64)>,
    pub failure_trajectories: Vec<(u64, TerminationCause, Vec<(f64, f64)>)>,
    pub episode_logs: Vec<EpisodeLog>,
    pub episode_count: u64,
    pub total_ticks: u64,
    pub violations_per_requirement: [u64; REQUIREMENT_COUNT],
    /// Final Q table(s) exported after the run (tabular techniques).
    pub qtable_csv: Option<String>,
    /// Final network checkpoint (deep agent).
    pub dqn_checkpoint: Option<String>,
}

impl RepetitionResult {
    /// Violations counted under the campaign's reporting rule.
    pub fn counted_violations(&self, mode: CampaignMode) -> u64 {
        match mode {
            CampaignMode::Replication => self.events.len() as u64,
            CampaignMode::Extension => self
                .events
                .iter()
                .filter(|e| e.event.requirement == Requirement::R2Dv)
                .count() as u64,
        }
    }

    pub fn final_coverage(&self) -> f64 {
        let set: RequirementSet = self.events.iter().map(|e| e.event.requirement).collect();
        set.len() as f64 / REQUIREMENT_COUNT as f64
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub reps: Vec<RepetitionResult>,
}

/// Coverage/violation timeline sampled at the midpoints of `samples` equal
/// windows over the budget. Coverage latches, so the series is
/// non-decreasing.
pub fn coverage_timeline(
    events: &[StampedEvent],
    mode: CampaignMode,
    budget_steps: u64,
    samples: usize,
) -> Vec<SamplePoint> {
    (0..samples)
        .map(|k| {
            let step =
                ((k as f64 + 0.5) / samples as f64 * budget_steps as f64).round() as u64;
            let upto: Vec<&StampedEvent> = events.iter().filter(|e| e.step <= step).collect();
            let covered: RequirementSet =
                upto.iter().map(|e| e.event.requirement).collect();
            let violations_total = match mode {
                CampaignMode::Replication => upto.len() as u64,
                CampaignMode::Extension => upto
                    .iter()
                    .filter(|e| e.event.requirement == Requirement::R2Dv)
                    .count() as u64,
            };
            SamplePoint {
                sample_index: k + 1,
                step,
                coverage: covered.len() as f64 / REQUIREMENT_COUNT as f64,
                violations_total,
            }
        })
        .collect()
}

/// Re-detect violations from retained tick records under a different
/// detection mode; returns per-requirement counts latched once per episode.
pub fn replay_detection(
    logs: &[EpisodeLog],
    mode: DetectionMode,
) -> [u64; REQUIREMENT_COUNT] {
    let mut counts = [0u64; REQUIREMENT_COUNT];
    for log in logs {
        let mut latched = RequirementSet::EMPTY;
        for rec in &log.records {
            let viol = detect_violations(&rec.distances, &rec.flags, mode, false);
            for r in viol.iter() {
                if !latched.contains(r) {
                    latched.insert(r);
                }
            }
        }
        // completion/timeout judgment is mode-independent
        for v in &log.violations {
            if v.requirement == Requirement::R5Dt && !latched.contains(Requirement::R5Dt) {
                latched.insert(Requirement::R5Dt);
            }
        }
        for r in latched.iter() {
            counts[r.index()] += 1;
        }
    }
    counts
}

enum AgentDriver {
    Random,
    Q(QTable),
    Morlot(MorlotState),
    Dqn(Box<DqnAgent>),
}

impl AgentDriver {
    fn new(cfg: &CampaignConfig, route: &std::sync::Arc<Route>, rng: &mut ChaCha8Rng) -> AgentDriver {
        match cfg.technique {
            Technique::Random => AgentDriver::Random,
            Technique::Q => AgentDriver::Q(QTable::new()),
            Technique::Morlot => AgentDriver::Morlot(MorlotState::new()),
            Technique::Dqn => {
                let norm = Normalizer::for_route(route, cfg.frame);
                AgentDriver::Dqn(Box::new(DqnAgent::new(
                    cfg.dqn.clone(),
                    norm,
                    Requirement::R2Dv,
                    rng,
                )))
            }
        }
    }

    fn is_tabular(&self) -> bool {
        matches!(self, AgentDriver::Q(_) | AgentDriver::Morlot(_))
    }

    fn distinct_states(&self) -> Vec<usize> {
        match self {
            AgentDriver::Q(t) => vec![t.distinct_states()],
            AgentDriver::Morlot(m) => Requirement::ALL
                .iter()
                .map(|r| m.table(*r).distinct_states())
                .collect(),
            _ => Vec::new(),
        }
    }
}

struct RepRunner<'a> {
    cfg: &'a CampaignConfig,
    route: std::sync::Arc<Route>,
    driver: AgentDriver,
    rng_action: ChaCha8Rng,
    rng_train: ChaCha8Rng,
    global_step: u64,
    events: Vec<StampedEvent>,
    growth: Vec<(u64, Vec<usize>)>,
    next_growth_step: u64,
    growth_stride: u64,
    loss_curve: Vec<(u64, f64, f64)>,
    failure_trajectories: Vec<(u64, TerminationCause, Vec<(f64, f64)>)>,
    episode_logs: Vec<EpisodeLog>,
    total_ticks: u64,
}

impl<'a> RepRunner<'a> {
    fn new(cfg: &'a CampaignConfig, route: std::sync::Arc<Route>, repetition: u32) -> RepRunner<'a> {
        let seed = cfg.base_seed.wrapping_add(repetition as u64);
        let mut rng_train = ChaCha8Rng::seed_from_u64(seed ^ TRAIN_STREAM_SALT);
        let driver = AgentDriver::new(cfg, &route, &mut rng_train);
        let growth_stride = (cfg.budget_steps / 200).max(1);
        RepRunner {
            cfg,
            route,
            driver,
            rng_action: ChaCha8Rng::seed_from_u64(seed),
            rng_train,
            global_step: 0,
            events: Vec::new(),
            growth: Vec::new(),
            next_growth_step: 0,
            growth_stride,
            loss_curve: Vec::new(),
            failure_trajectories: Vec::new(),
            episode_logs: Vec::new(),
            total_ticks: 0,
        }
    }

    fn run(mut self, repetition: u32) -> RepetitionResult {
        let mut episode = 0u64;
        while self.global_step < self.cfg.budget_steps {
            let remaining = self.cfg.budget_steps - self.global_step;
            let max_ticks = self.cfg.episode_timeout.min(remaining);
            let log = self.run_episode(episode, max_ticks);
            if log.failing() {
                self.failure_trajectories
                    .push((episode, log.cause, log.vif_trajectory.clone()));
            }
            self.episode_logs.push(if self.cfg.retain_ticks {
                log
            } else {
                EpisodeLog {
                    vif_trajectory: Vec::new(),
                    records: Vec::new(),
                    ..log
                }
            });
            episode += 1;
        }
        let mut violations_per_requirement = [0u64; REQUIREMENT_COUNT];
        for e in &self.events {
            violations_per_requirement[e.event.requirement.index()] += 1;
        }
        let timeline = coverage_timeline(
            &self.events,
            self.cfg.mode,
            self.cfg.budget_steps,
            TIMELINE_SAMPLES,
        );
        let qtable_csv = match &self.driver {
            AgentDriver::Q(t) => {
                let mut buf = Vec::new();
                t.export_csv(&mut buf).expect("in-memory write");
                Some(String::from_utf8(buf).unwrap())
            }
            _ => None,
        };
        let dqn_checkpoint = match &self.driver {
            AgentDriver::Dqn(agent) => Some(agent.checkpoint_json()),
            _ => None,
        };
        RepetitionResult {
            repetition,
            seed: self.cfg.base_seed.wrapping_add(repetition as u64),
            events: self.events,
            timeline,
            growth: self.growth,
            loss_curve: self.loss_curve,
            failure_trajectories: self.failure_trajectories,
            episode_logs: self.episode_logs,
            episode_count: episode,
            total_ticks: self.total_ticks,
            violations_per_requirement,
            qtable_csv,
            dqn_checkpoint,
        }
    }

    fn run_episode(&mut self, episode: u64, max_ticks: u64) -> EpisodeLog {
        let cfg = self.cfg;
        let mode = cfg.detection_mode();
        let extension = cfg.mode == CampaignMode::Extension;
        let start_step = self.global_step;
        let mut world = reset_scenario(&self.route);
        let mut latched = RequirementSet::EMPTY;
        let mut violations: Vec<ViolationEvent> = Vec::new();
        let mut vif_trajectory: Vec<(f64, f64)> = Vec::new();
        let mut records: Vec<TickRecord> = Vec::new();
        let mut ticks = 0u64;
        let mut cause: Option<TerminationCause> = None;

        while cause.is_none() {
            let epsilon = epsilon_at(self.global_step, cfg);
            let obs = encode_observation(&world, cfg.frame);
            let key = if self.driver.is_tabular() {
                encode_state_key(&obs, cfg.key_precision)
            } else {
                StateKey(String::new())
            };
            let (action, chosen, sel_last_reward, sel_uncovered) = match &mut self.driver {
                AgentDriver::Random => (random_select(&mut self.rng_action), None, None, None),
                AgentDriver::Q(table) => (
                    q_select(table, &key, epsilon, &mut self.rng_action),
                    None,
                    None,
                    None,
                ),
                AgentDriver::Morlot(m) => {
                    let last = m.last_reward;
                    let uncovered: RequirementSet = m.uncovered().iter().copied().collect();
                    match morlot_select(m, &key, epsilon, &mut self.rng_action) {
                        Some((a, req)) => (a, Some(req), Some(last), Some(uncovered)),
                        // every objective covered: keep perturbing blindly
                        None => (random_select(&mut self.rng_action), None, Some(last), Some(uncovered)),
                    }
                }
                AgentDriver::Dqn(agent) => (
                    agent
                        .select(&obs, epsilon, &mut self.rng_action)
                        .expect("finite observation"),
                    None,
                    None,
                    None,
                ),
            };

            apply_action(&mut world, action);
            let mut newly = RequirementSet::EMPTY;
            let mut last_distances;
            let mut last_flags;
            loop {
                let cmd = ads_control(&world);
                simulate_tick(&mut world, cmd);
                ticks += 1;
                self.global_step += 1;
                self.total_ticks += 1;
                vif_trajectory.push((world.vif.pose.x, world.vif.pose.y));

                last_distances = compute_distances(&world);
                last_flags = sensor_flags(&world);
                let viol = detect_violations(&last_distances, &last_flags, mode, false);
                for r in viol.iter() {
                    if !latched.contains(r) {
                        latched.insert(r);
                        let ev = ViolationEvent {
                            episode,
                            tick: ticks,
                            requirement: r,
                        };
                        violations.push(ev);
                        self.events.push(StampedEvent {
                            step: self.global_step,
                            event: ev,
                        });
                        newly.insert(r);
                    }
                }

                if extension && last_flags.vif_contact {
                    cause = Some(TerminationCause::Collision);
                } else if extension && overtake_detected(&world) {
                    cause = Some(TerminationCause::Overtake);
                } else if world.ev_progress() >= self.route.line.length() - 1e-9 {
                    cause = Some(TerminationCause::Destination);
                } else if ticks >= max_ticks {
                    cause = Some(TerminationCause::Timeout);
                }
                if cause.is_some() || (ticks % cfg.action_repeat == 0) {
                    break;
                }
            }

            // rewards from the fused view of the final window tick
            let fused = fused_distances(&last_distances, &last_flags);
            let instant = detect_violations(&last_distances, &last_flags, mode, false);
            let rewards = reward_vector(&fused, instant);
            let done = cause.is_some();
            let next_obs = encode_observation(&world, cfg.frame);

            match &mut self.driver {
                AgentDriver::Random => {}
                AgentDriver::Q(table) => {
                    let next_key = encode_state_key(&next_obs, cfg.key_precision);
                    q_update(
                        table,
                        &key,
                        action,
                        rewards[Requirement::R2Dv.index()],
                        &next_key,
                        cfg.alpha,
                        cfg.gamma,
                    );
                }
                AgentDriver::Morlot(m) => {
                    let next_key = encode_state_key(&next_obs, cfg.key_precision);
                    let t = Transition {
                        state_key: key.clone(),
                        action,
                        reward: rewards,
                        next_state_key: next_key,
                        obs,
                        next_obs,
                        done,
                    };
                    morlot_update(m, &t, newly, cfg.alpha, cfg.gamma);
                }
                AgentDriver::Dqn(agent) => {
                    agent.push(Transition {
                        state_key: StateKey(String::new()),
                        action,
                        reward: rewards,
                        next_state_key: StateKey(String::new()),
                        obs,
                        next_obs,
                        done,
                    });
                    if self.global_step % cfg.dqn.train_interval == 0 {
                        if let TrainOutcome::Trained { loss } =
                            agent.train_step(&mut self.rng_train).expect("finite batch")
                        {
                            if self.loss_curve.len() < 100_000 {
                                self.loss_curve.push((self.global_step, loss, epsilon));
                            }
                        }
                    }
                }
            }

            if cfg.retain_ticks {
                records.push(TickRecord {
                    tick: ticks,
                    action,
                    distances: last_distances,
                    flags: last_flags,
                    reward: rewards,
                    epsilon,
                    chosen,
                    last_reward: sel_last_reward,
                    uncovered: sel_uncovered,
                });
            }

            if self.driver.is_tabular() && self.global_step >= self.next_growth_step {
                self.growth.push((self.global_step, self.driver.distinct_states()));
                self.next_growth_step = self.global_step + self.growth_stride;
            }
        }

        let cause = cause.unwrap();
        // the completion requirement is judged when the scenario ran its
        // course; collision- and overtake-terminated episodes are early
        // stops, not incompletions
        if matches!(cause, TerminationCause::Timeout | TerminationCause::Destination) {
            let d = compute_distances(&world);
            let flags = sensor_flags(&world);
            let end = detect_violations(&d, &flags, mode, true);
            if end.contains(Requirement::R5Dt) && !latched.contains(Requirement::R5Dt) {
                latched.insert(Requirement::R5Dt);
                let ev = ViolationEvent {
                    episode,
                    tick: ticks,
                    requirement: Requirement::R5Dt,
                };
                violations.push(ev);
                self.events.push(StampedEvent {
                    step: self.global_step,
                    event: ev,
                });
                if let AgentDriver::Morlot(m) = &mut self.driver {
                    let mut set = RequirementSet::EMPTY;
                    set.insert(Requirement::R5Dt);
                    // retire without a further table update
                    m.mark_covered(set);
                }
            }
        }

        EpisodeLog {
            episode,
            start_step,
            ticks_used: ticks,
            cause,
            violations,
            vif_trajectory,
            records,
        }
    }
}

/// Run all repetitions, up to `jobs` in parallel. Every repetition owns its
/// world, agent, and generators; aggregation is a deterministic reduce, so
/// outputs are identical for any parallelism degree.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let route = Route::builtin(cfg.route);
    let reps = cfg.repetitions as usize;
    let jobs = if cfg.jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cfg.jobs
    }
    .min(reps)
    .max(1);

    let results: Mutex<Vec<Option<RepetitionResult>>> = Mutex::new((0..reps).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= reps {
                    break;
                }
                let runner = RepRunner::new(cfg, std::sync::Arc::clone(&route), r as u32);
                let result = runner.run(r as u32);
                results.lock().unwrap()[r] = Some(result);
            });
        }
    });
    let rep_results = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker completed"))
        .collect();
    Ok(CampaignResult {
        config: cfg.clone(),
        reps: rep_results,
    })
}
