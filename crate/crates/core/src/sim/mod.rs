//! Mobile scenario simulation.

pub mod config;
pub mod engine;
pub mod events;
pub mod interactions;
pub mod mobility;
pub mod population;

pub use config::{AttackerConfig, PopulationConfig, ScenarioConfig};
pub use engine::{run_scenario, RunOutput};
pub use events::{Event, EventLog};
