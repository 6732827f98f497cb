//! Decision policies over observations, episode drivers and exact oracles.

mod oracle;
mod rules;
mod search;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::env::{Action, EnvError, EnvState, Observation};
use crate::instance::{Instance, Time};
use crate::schedule::{Schedule, ScheduleError};

pub use oracle::{
    brute_force_optimal, env_tree_best, env_tree_best_with, OracleError, OracleLimits,
};
pub use rules::{masked_softmax, PriorityFeature, PriorityRule, RandomAgent, SoftmaxAgent};
pub use search::{
    best_of_search, best_of_search_parallel, sample_search, SearchOptions, SearchResult,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no legal action in mask")]
    EmptyMask,
    #[error("score and mask lengths differ ({scores} vs {mask})")]
    LengthMismatch { scores: usize, mask: usize },
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("agent {agent} chose illegal action {action}")]
    IllegalChoice { agent: String, action: Action },
    #[error("unknown agent `{0}` (expected fifo, mwkr, random or softmax:<a4|a6>:<temperature>)")]
    UnknownAgent(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// A dispatcher: maps an observation to a legal action.
pub trait Agent: Send {
    fn decide(&mut self, obs: &Observation) -> Result<Action, AgentError>;

    fn name(&self) -> String;
}

/// A sampling policy with a greedy (zero-temperature) counterpart.
pub trait StochasticAgent: Agent {
    fn deterministic(&self) -> Box<dyn Agent>;
}

/// Agent selection by name, as used on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Fifo,
    Mwkr,
    Random,
    Softmax {
        feature: PriorityFeature,
        temperature: f64,
    },
}

impl AgentSpec {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, AgentSpec::Random | AgentSpec::Softmax { .. })
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Agent>, AgentError> {
        Ok(match *self {
            AgentSpec::Fifo => Box::new(PriorityRule::fifo()),
            AgentSpec::Mwkr => Box::new(PriorityRule::mwkr()),
            AgentSpec::Random => Box::new(RandomAgent::new(seed)),
            AgentSpec::Softmax {
                feature,
                temperature,
            } => Box::new(SoftmaxAgent::new(feature, temperature, seed)?),
        })
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Fifo => f.write_str("fifo"),
            AgentSpec::Mwkr => f.write_str("mwkr"),
            AgentSpec::Random => f.write_str("random"),
            AgentSpec::Softmax {
                feature,
                temperature,
            } => write!(f, "softmax:{feature}:{temperature}"),
        }
    }
}

impl FromStr for AgentSpec {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || AgentError::UnknownAgent(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["fifo"] => Ok(AgentSpec::Fifo),
            ["mwkr"] => Ok(AgentSpec::Mwkr),
            ["random"] => Ok(AgentSpec::Random),
            ["softmax", feature, temperature] => {
                let feature = feature.parse().map_err(|_| unknown())?;
                let temperature: f64 = temperature.parse().map_err(|_| unknown())?;
                if !(temperature.is_finite() && temperature > 0.0) {
                    return Err(AgentError::Temperature(temperature));
                }
                Ok(AgentSpec::Softmax {
                    feature,
                    temperature,
                })
            }
            _ => Err(unknown()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutResult {
    pub schedule: Schedule,
    pub makespan: Time,
    /// Sum of unscaled rewards over the episode.
    pub raw_return: i64,
    pub steps: usize,
}

/// Drive `state` from a restart to completion with `agent`. The schedule is
/// not validated here.
pub(crate) fn run_episode(
    state: &mut EnvState,
    agent: &mut dyn Agent,
    obs: &mut Observation,
) -> Result<Time, AgentError> {
    state.restart();
    while !state.is_done() {
        state.observe_into(obs);
        let action = agent.decide(obs)?;
        if !obs.mask.is_legal(action) {
            return Err(AgentError::IllegalChoice {
                agent: agent.name(),
                action,
            });
        }
        state.apply(action)?;
    }
    Ok(state.makespan()?)
}

pub(crate) fn empty_observation(state: &EnvState) -> Observation {
    Observation {
        features: Vec::with_capacity(state.instance().job_count()),
        mask: state.mask().clone(),
    }
}

/// Run one episode on `inst` and return its validated schedule.
pub fn rollout(inst: &Instance, agent: &mut dyn Agent) -> Result<RolloutResult, AgentError> {
    let mut state = EnvState::reset(inst)?;
    rollout_with(&mut state, agent)
}

/// Like [`rollout`] but reuses an existing state (and its config).
pub fn rollout_with(
    state: &mut EnvState,
    agent: &mut dyn Agent,
) -> Result<RolloutResult, AgentError> {
    let mut obs = empty_observation(state);
    let makespan = run_episode(state, agent, &mut obs)?;
    let schedule = Schedule::from_env(state)?;
    let report = schedule.validate(state.instance())?;
    if !report.valid || report.makespan != makespan {
        return Err(ScheduleError::Invalid(format!(
            "env produced an invalid schedule: {:?}",
            report.violations
        ))
        .into());
    }
    Ok(RolloutResult {
        schedule,
        makespan,
        raw_return: state.raw_return(),
        steps: state.steps(),
    })
}

/// Record the actions `agent` takes over one episode.
pub fn action_sequence(inst: &Instance, agent: &mut dyn Agent) -> Result<Vec<Action>, AgentError> {
    let mut state = EnvState::reset(inst)?;
    let mut actions = Vec::new();
    while !state.is_done() {
        let obs = state.observe();
        let action = agent.decide(&obs)?;
        state.apply(action)?;
        actions.push(action);
    }
    Ok(actions)
}
