//! Quasi-Morse interaction potentials and the compactly supported flock and
//! mill steady states they admit, together with a particle simulator used to
//! check the continuum predictions.

pub mod error;
pub mod particles;
pub mod potential;
pub mod quad;
pub mod radialconv;
pub mod specfun;
pub mod steadystate;
pub mod sweep;

pub use error::{Error, Result};
pub use particles::MotionParams;
pub use potential::{regime, PotentialParams, Regime, Region};
pub use radialconv::{build_operator, ConvolutionOperator, RadialGrid};
pub use specfun::{bessel, BesselKind};
pub use steadystate::{search_support, Pattern, SearchConfig, SteadyState};
pub use sweep::{run_sweep, Outcome, SweepCell, SweepConfig};
