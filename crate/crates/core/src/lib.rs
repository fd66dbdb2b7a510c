//! Convex MDP solver over tabular occupancy measures.
//!
//! A convex MDP `min_{d in K} f(d)` is played as a zero-sum game between a
//! cost player, which emits linear costs `lambda`, and a policy player, which
//! answers with an occupancy measure in `K`. The averaged occupancy converges
//! to a minimizer as both players' average regrets vanish.
//!
//! Everything numerical is generic over [`scalar::Real`]; the aliases below
//! fix the scalar to `f64` (or `f32`) for everyday use.

pub mod cost;
pub mod game;
pub mod linalg;
pub mod mdp;
pub mod objectives;
pub mod policy;
pub mod scalar;

pub use scalar::Real;

pub type Mdp = mdp::TabularMdp<f64>;
pub type Occupancy = mdp::OccupancyMeasure<f64>;
pub type StationaryPolicy = mdp::Policy<f64>;

pub type Mdp32 = mdp::TabularMdp<f32>;
pub type Occupancy32 = mdp::OccupancyMeasure<f32>;
pub type StationaryPolicy32 = mdp::Policy<f32>;
