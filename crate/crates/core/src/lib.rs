//! Simulator and optimizers for a multi-tier underwater computing system: a
//! surface station, a fleet of AUVs relaying and ferrying work, and clusters
//! of battery-powered seabed devices.
//!
//! The physical layer ([`acoustics`], [`ocean`]) feeds per-task accounting
//! ([`service`]), tours ([`routing`]) and the profit objective
//! ([`economics`]). On top sit an episodic environment ([`mdp`]), an
//! actor-critic trainer ([`a3c`]), fixed schemes and an exhaustive oracle
//! ([`baselines`]), and the experiment runner behind the `mtuc` binary
//! ([`experiment`]).

pub mod a3c;
pub mod acoustics;
pub mod baselines;
pub mod economics;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod ocean;
pub mod routing;
pub mod scenario;
pub mod service;

pub use error::{Error, Result, ScenarioError};
pub use scenario::{generate_random, load_scenario, Scenario};
