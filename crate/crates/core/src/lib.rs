//! Radially symmetric finite-volume simulation of the attraction-repulsion
//! chemotaxis system, with the energy functionals, initial-data families and
//! comparison ODE used to study finite-time blow-up.

pub mod advection;
pub mod dynamics;
pub mod functionals;
pub mod geometry;
pub mod initdata;
pub mod model;
pub mod oderef;
pub mod output;
pub mod presets;
pub mod registry;
pub mod scenario;
pub mod sweep;
pub mod tridiag;

pub use advection::{AdvectionScheme, Centered, Upwind};
pub use geometry::{RadialField, RadialGrid};
pub use model::{OriginalParams, OriginalState, Regime, TransformedParams, TransformedState};
pub use registry::Registry;
pub use scenario::{Scenario, ScenarioError};
