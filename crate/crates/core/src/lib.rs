//! Desk-scale testbed for reinforcement-learning-driven online testing of a
//! scripted driving stack.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`microworld`] — deterministic 2D simulator: routes, vehicle and
//!   pedestrian dynamics, weather, and the scripted lane-following controller
//!   under test.
//! - [`monitors`] — the six safety/functional requirement metrics, violation
//!   detection under three detection modes, and the per-requirement reward
//!   functions.
//! - [`agents`] — the 17-action perturbation catalogue, observation and
//!   state-key encodings, the random baseline, tabular Q-learning, and the
//!   many-objective controller.
//! - [`deepq`] — from-scratch MLP with exact backpropagation, replay buffer,
//!   target network, and the single-objective deep Q agent.
//! - [`campaign`] — episode/campaign orchestration, budgets, epsilon
//!   schedule, logging, and seeded parallel repetitions.
//! - [`stats`] — Friedman / Dunn nonparametric tests, normalized AUC, and
//!   summary descriptors.
//! - [`render`] — SVG figures: failure trajectories, coverage-over-time, and
//!   Q-table growth.

pub mod agents;
pub mod campaign;
pub mod deepq;
pub mod error;
pub mod geom;
pub mod microworld;
pub mod monitors;
pub mod render;
pub mod stats;

pub use error::Error;

/// Crate version stamped into output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
