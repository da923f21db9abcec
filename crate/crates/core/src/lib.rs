//! Semi-Markov decision processes: residence-time distributions, cylinder
//! probabilities, parallel composition, the faster-than preorder,
//! (bi)simulation and monotonicity conditions for composed systems.

pub mod compose;
pub mod cylinder;
pub mod dist;
pub mod error;
pub mod grid;
pub mod model;
pub mod monotonicity;
pub mod montecarlo;
pub mod relations;

pub use dist::{
    compose_residence, convolve, convolve_power, CompositionOperator, Distribution, Extremum,
};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{Scheduler, Smdp, StateId, LabelId};
