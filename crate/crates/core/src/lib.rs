//! Job-shop scheduling environment with dispatcher actions, masked legal
//! actions, a dense area-based reward and per-job features, plus
//! dispatching-rule agents, a best-of sampling search, exact oracles for
//! tiny instances and a benchmark harness.

pub mod agents;
pub mod bench;
pub mod env;
pub mod instance;
pub mod schedule;
pub mod trace;

pub use agents::{
    best_of_search, rollout, Agent, AgentError, AgentSpec, PriorityRule, RandomAgent,
    RolloutResult, SearchOptions, SearchResult, SoftmaxAgent, StochasticAgent,
};
pub use env::{Action, ActionMask, EnvConfig, EnvError, EnvState, Observation, StepOutcome};
pub use instance::{
    load_instance, parse_instance, serialize_instance, Instance, InstanceError, InstanceStats,
    Operation, ParseOptions, Time, ValidationReport,
};
pub use schedule::{Schedule, ScheduleError, ScheduleReport};
