//! Meta-RL with separate explore and exploit policies.
//!
//! The crate is organized around a small set of pieces:
//!
//! * [`env`] defines environment distributions ([`Domain`](env::Domain)),
//!   sampled instances ([`Env`](env::Env)), episodes, and meta-rollouts.
//! * [`bandit`], [`darkroom`], and [`raymaze`] are the three concrete
//!   environment distributions.
//! * [`model`] is a causal transformer policy backbone with two action heads
//!   and hand-written backpropagation.
//! * [`rollout`] runs episodes and meta-rollouts, recording what training
//!   needs; [`training`] implements conditional action cloning and the
//!   cumulative-reward control; [`selection`] picks the explore-episode
//!   budget k after training and evaluates the combined policy.
//! * [`baselines`] holds UCB-1, Thompson sampling, and the random policy.
//! * [`oracles`] and [`stats`] provide closed-form reference values,
//!   Monte Carlo checks, and the Mann-Whitney U test.
//! * [`config`], [`checkpoint`], and [`experiment`] form the reproducibility
//!   harness used by the `fe` binary.
//!
//! All randomness flows from a single experiment seed through named streams
//! (see [`rng`]), so every artifact is reproducible byte for byte.

pub mod bandit;
pub mod baselines;
pub mod batch;
pub mod checkpoint;
pub mod config;
pub mod darkroom;
pub mod env;
pub mod experiment;
pub mod model;
pub mod oracles;
pub mod raymaze;
pub mod rng;
pub mod rollout;
pub mod selection;
pub mod training;
pub mod stats;
