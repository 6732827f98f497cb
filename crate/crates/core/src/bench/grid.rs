use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{
    best_of_search, rollout_with, sample_search, AgentSpec, RandomAgent, SearchOptions,
    SoftmaxAgent,
};
use crate::env::{EnvConfig, EnvState};
use crate::instance::{Instance, Time};
use crate::schedule::Schedule;

/// One (instance, agent, seed) cell of a benchmark grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub agent: String,
    /// `None` for deterministic agents, which run once.
    pub seed: Option<u64>,
    /// Seconds.
    pub wall_budget: f64,
    /// Best makespan of a validated schedule; `None` if the cell failed.
    pub makespan: Option<Time>,
    pub lower_bound: Time,
    pub episodes: usize,
    /// Seconds.
    pub wall_time: f64,
    pub engine_steps_per_second: f64,
    pub valid: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub record: RunRecord,
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Wall-clock budget per stochastic cell.
    pub budget: Duration,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub env: EnvConfig,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            budget: Duration::from_secs(600),
            seeds: vec![0],
            workers: 1,
            env: EnvConfig::default(),
        }
    }
}

struct Cell<'a> {
    instance: &'a Instance,
    agent: &'a AgentSpec,
    seed: Option<u64>,
}

/// Run every agent on every instance. Deterministic agents run once per
/// instance, stochastic agents run a best-of search per seed. Cells that
/// fail are recorded with `valid = false` and the grid keeps going.
pub fn run_grid(
    instances: &[Instance],
    agents: &[AgentSpec],
    opts: &GridOptions,
) -> Result<Vec<CellOutput>, HarnessError> {
    for inst in instances {
        let report = inst.validate();
        if !report.is_valid() {
            return Err(HarnessError::InvalidInstance {
                name: inst.name.clone(),
                report,
            });
        }
    }
    let mut cells = Vec::new();
    for inst in instances {
        for agent in agents {
            if agent.is_stochastic() {
                cells.extend(opts.seeds.iter().map(|&s| Cell {
                    instance: inst,
                    agent,
                    seed: Some(s),
                }));
            } else {
                cells.push(Cell {
                    instance: inst,
                    agent,
                    seed: None,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(c, opts)).collect()))
}

fn run_cell(cell: &Cell<'_>, opts: &GridOptions) -> CellOutput {
    let started = Instant::now();
    let lower_bound = cell.instance.stats().trivial_lower_bound;
    let mut record = RunRecord {
        instance: cell.instance.name.clone(),
        agent: cell.agent.to_string(),
        seed: cell.seed,
        wall_budget: if cell.seed.is_some() {
            opts.budget.as_secs_f64()
        } else {
            0.0
        },
        makespan: None,
        lower_bound,
        episodes: 0,
        wall_time: 0.0,
        engine_steps_per_second: 0.0,
        valid: false,
        error: None,
    };

    let outcome = match cell.seed {
        None => deterministic_cell(cell, opts),
        Some(seed) => stochastic_cell(cell, seed, opts),
    };
    record.wall_time = started.elapsed().as_secs_f64();
    match outcome {
        Ok((makespan, schedule, episodes, steps)) => {
            let check = schedule.validate(cell.instance);
            match check {
                Ok(rep) if rep.valid && rep.makespan == makespan => {
                    record.makespan = Some(makespan);
                    record.valid = true;
                    record.episodes = episodes;
                    if record.wall_time > 0.0 {
                        record.engine_steps_per_second = steps as f64 / record.wall_time;
                    }
                    CellOutput {
                        record,
                        schedule: Some(schedule),
                    }
                }
                Ok(rep) => {
                    record.error =
                        Some(format!("schedule failed validation: {:?}", rep.violations));
                    CellOutput {
                        record,
                        schedule: None,
                    }
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    CellOutput {
                        record,
                        schedule: None,
                    }
                }
            }
        }
        Err(e) => {
            record.error = Some(e);
            CellOutput {
                record,
                schedule: None,
            }
        }
    }
}

type CellResult = Result<(Time, Schedule, usize, u64), String>;

fn deterministic_cell(cell: &Cell<'_>, opts: &GridOptions) -> CellResult {
    let mut state = EnvState::with_config(cell.instance, opts.env).map_err(|e| e.to_string())?;
    let mut agent = cell.agent.build(0).map_err(|e| e.to_string())?;
    let r = rollout_with(&mut state, agent.as_mut()).map_err(|e| e.to_string())?;
    Ok((r.makespan, r.schedule, 1, r.steps as u64))
}

fn stochastic_cell(cell: &Cell<'_>, seed: u64, opts: &GridOptions) -> CellResult {
    let search = SearchOptions {
        budget: opts.budget,
        max_episodes: None,
        env: opts.env,
    };
    let res = match *cell.agent {
        AgentSpec::Softmax {
            feature,
            temperature,
        } => {
            let mut agent =
                SoftmaxAgent::new(feature, temperature, seed).map_err(|e| e.to_string())?;
            best_of_search(cell.instance, &mut agent, &search)
        }
        AgentSpec::Random => sample_search(cell.instance, &mut RandomAgent::new(seed), &search),
        AgentSpec::Fifo | AgentSpec::Mwkr => unreachable!("deterministic agents have no seed"),
    }
    .map_err(|e| e.to_string())?;
    Ok((
        res.best_makespan,
        res.best_schedule,
        res.episodes,
        res.engine_steps,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Vec<Instance> {
        vec![
            Instance::generate_random(6, 4, (1, 20), 1).unwrap(),
            Instance::generate_random(5, 5, (1, 20), 2).unwrap(),
        ]
    }

    #[test]
    fn deterministic_agents_run_once() {
        let agents = vec![AgentSpec::Fifo, AgentSpec::Mwkr];
        let out = run_grid(&small(), &agents, &GridOptions::default()).unwrap();
        assert_eq!(out.len(), 4);
        for c in &out {
            assert!(c.record.valid);
            assert_eq!(c.record.episodes, 1);
            assert_eq!(c.record.seed, None);
            assert!(c.record.makespan.unwrap() >= c.record.lower_bound);
        }
    }

    #[test]
    fn empty_agent_list_yields_nothing() {
        let out = run_grid(&small(), &[], &GridOptions::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn stochastic_agents_run_per_seed() {
        let agents = vec!["softmax:a4:0.1".parse().unwrap(), AgentSpec::Random];
        let opts = GridOptions {
            budget: Duration::from_millis(20),
            seeds: vec![0, 1, 2],
            ..GridOptions::default()
        };
        let out = run_grid(&small()[..1], &agents, &opts).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|c| c.record.valid && c.record.episodes >= 1));
    }

    #[test]
    fn parallel_grid_matches_serial_for_deterministic_agents() {
        let agents = vec![AgentSpec::Fifo, AgentSpec::Mwkr];
        let serial = run_grid(&small(), &agents, &GridOptions::default()).unwrap();
        let parallel = run_grid(
            &small(),
            &agents,
            &GridOptions {
                workers: 3,
                ..GridOptions::default()
            },
        )
        .unwrap();
        let key = |c: &CellOutput| {
            (
                c.record.instance.clone(),
                c.record.agent.clone(),
                c.record.makespan,
            )
        };
        let mut a: Vec<_> = serial.iter().map(key).collect();
        let mut b: Vec<_> = parallel.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let bad = Instance {
            name: "bad".into(),
            machine_count: 1,
            jobs: vec![],
        };
        assert!(matches!(
            run_grid(&[bad], &[AgentSpec::Fifo], &GridOptions::default()),
            Err(HarnessError::InvalidInstance { .. })
        ));
    }
}
