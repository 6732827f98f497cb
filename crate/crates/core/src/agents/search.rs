use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{empty_observation, run_episode, Agent, AgentError, StochasticAgent};
use crate::env::{EnvConfig, EnvState};
use crate::instance::{Instance, Time};
use crate::schedule::{Schedule, ScheduleError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Sampling stops once this much wall time has passed. The deterministic
    /// first episode always runs.
    pub budget: Duration,
    /// Optional hard cap on the number of episodes, deterministic one included.
    pub max_episodes: Option<usize>,
    pub env: EnvConfig,
}

impl SearchOptions {
    pub fn with_budget(budget: Duration) -> Self {
        Self {
            budget,
            max_episodes: None,
            env: EnvConfig::default(),
        }
    }

    pub fn with_episodes(episodes: usize) -> Self {
        Self {
            budget: Duration::MAX,
            max_episodes: Some(episodes),
            env: EnvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_makespan: Time,
    pub best_schedule: Schedule,
    pub episodes: usize,
    /// Seconds.
    pub wall_time: f64,
    pub makespan_history: Vec<Time>,
    /// Environment transitions applied over all episodes.
    pub engine_steps: u64,
}

impl SearchResult {
    pub fn steps_per_second(&self) -> f64 {
        if self.wall_time > 0.0 {
            self.engine_steps as f64 / self.wall_time
        } else {
            0.0
        }
    }
}

struct Best {
    makespan: Time,
    schedule: Schedule,
}

fn keep_if_better(
    best: &mut Option<Best>,
    state: &EnvState,
    makespan: Time,
) -> Result<(), AgentError> {
    if best.as_ref().is_none_or(|b| makespan < b.makespan) {
        *best = Some(Best {
            makespan,
            schedule: Schedule::from_env(state)?,
        });
    }
    Ok(())
}

fn validated(inst: &Instance, best: Best) -> Result<Best, AgentError> {
    let report = best.schedule.validate(inst)?;
    if !report.valid || report.makespan != best.makespan {
        return Err(ScheduleError::Invalid(format!(
            "search kept an invalid schedule: {:?}",
            report.violations
        ))
        .into());
    }
    Ok(best)
}

/// Repeated rollouts under a wall-clock budget, keeping the best schedule.
///
/// Episode 1 is the agent's deterministic counterpart, so the result is never
/// worse than the plain dispatching rule.
pub fn best_of_search<A: StochasticAgent>(
    inst: &Instance,
    agent: &mut A,
    opts: &SearchOptions,
) -> Result<SearchResult, AgentError> {
    let mut greedy = agent.deterministic();
    search_loop(inst, Some(greedy.as_mut()), agent, opts)
}

/// Best-of sampling without a deterministic first episode (e.g. for the
/// uniform random agent).
pub fn sample_search(
    inst: &Instance,
    agent: &mut dyn Agent,
    opts: &SearchOptions,
) -> Result<SearchResult, AgentError> {
    search_loop(inst, None, agent, opts)
}

fn search_loop(
    inst: &Instance,
    first: Option<&mut dyn Agent>,
    agent: &mut dyn Agent,
    opts: &SearchOptions,
) -> Result<SearchResult, AgentError> {
    let started = Instant::now();
    let mut state = EnvState::with_config(inst, opts.env)?;
    let mut obs = empty_observation(&state);
    let mut history = Vec::new();
    let mut engine_steps = 0u64;
    let mut best = None;

    let mut record = |state: &EnvState, makespan: Time, history: &mut Vec<Time>| {
        engine_steps += state.steps() as u64;
        history.push(makespan);
        keep_if_better(&mut best, state, makespan)
    };

    if let Some(greedy) = first {
        let makespan = run_episode(&mut state, greedy, &mut obs)?;
        record(&state, makespan, &mut history)?;
    }
    let max_episodes = opts.max_episodes.unwrap_or(usize::MAX);
    while history.is_empty() || (history.len() < max_episodes && started.elapsed() < opts.budget) {
        let makespan = run_episode(&mut state, agent, &mut obs)?;
        record(&state, makespan, &mut history)?;
    }

    let best = validated(inst, best.expect("at least one episode ran"))?;
    debug_assert_eq!(Some(&best.makespan), history.iter().min());
    Ok(SearchResult {
        best_makespan: best.makespan,
        best_schedule: best.schedule,
        episodes: history.len(),
        wall_time: started.elapsed().as_secs_f64(),
        makespan_history: history,
        engine_steps,
    })
}

/// Multi-worker variant. Worker `w` samples with the agent returned by
/// `make_agent(w)`; worker 0 also runs the deterministic episode first.
/// Workers share only the best makespan. Results are not reproducible
/// across runs when `workers > 1`.
pub fn best_of_search_parallel<A, F>(
    inst: &Instance,
    make_agent: F,
    opts: &SearchOptions,
    workers: usize,
) -> Result<SearchResult, AgentError>
where
    A: StochasticAgent,
    F: Fn(usize) -> Result<A, AgentError> + Sync,
{
    let workers = workers.max(1);
    if workers == 1 {
        let mut agent = make_agent(0)?;
        return best_of_search(inst, &mut agent, opts);
    }
    let started = Instant::now();
    let best_makespan = AtomicU64::new(Time::MAX);
    let merged: Mutex<(Option<Best>, Vec<Time>, u64)> = Mutex::new((None, Vec::new(), 0));
    let max_episodes = opts.max_episodes.unwrap_or(usize::MAX);
    let episodes = std::sync::atomic::AtomicUsize::new(0);

    let results: Vec<Result<(), AgentError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let best_makespan = &best_makespan;
                let merged = &merged;
                let episodes = &episodes;
                let make_agent = &make_agent;
                scope.spawn(move || -> Result<(), AgentError> {
                    let mut agent = make_agent(w)?;
                    let mut state = EnvState::with_config(inst, opts.env)?;
                    let mut obs = empty_observation(&state);
                    let mut local_best: Option<Best> = None;
                    let mut history = Vec::new();
                    let mut steps = 0u64;
                    let mut first = w == 0;
                    loop {
                        if !first {
                            if started.elapsed() >= opts.budget {
                                break;
                            }
                            if episodes.fetch_add(1, Ordering::Relaxed) >= max_episodes {
                                break;
                            }
                        }
                        let makespan = if first {
                            first = false;
                            episodes.fetch_add(1, Ordering::Relaxed);
                            let mut greedy = agent.deterministic();
                            run_episode(&mut state, greedy.as_mut(), &mut obs)?
                        } else {
                            run_episode(&mut state, &mut agent, &mut obs)?
                        };
                        steps += state.steps() as u64;
                        history.push(makespan);
                        if makespan < best_makespan.load(Ordering::Relaxed) {
                            best_makespan.fetch_min(makespan, Ordering::Relaxed);
                            keep_if_better(&mut local_best, &state, makespan)?;
                        }
                    }
                    let mut guard = merged
                        .lock()
                        .expect("no worker panics while holding the lock");
                    if let Some(lb) = local_best {
                        if guard.0.as_ref().is_none_or(|b| lb.makespan < b.makespan) {
                            guard.0 = Some(lb);
                        }
                    }
                    guard.1.extend(history);
                    guard.2 += steps;
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("search worker panicked"))
            .collect()
    });
    for r in results {
        r?;
    }
    let (best, history, engine_steps) = merged.into_inner().expect("lock not poisoned");
    let best = validated(inst, best.expect("worker 0 always runs one episode"))?;
    Ok(SearchResult {
        best_makespan: best.makespan,
        best_schedule: best.schedule,
        episodes: history.len(),
        wall_time: started.elapsed().as_secs_f64(),
        makespan_history: history,
        engine_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{rollout, PriorityFeature, PriorityRule, SoftmaxAgent};

    fn inst() -> Instance {
        Instance::generate_random(8, 5, (1, 20), 42).unwrap()
    }

    #[test]
    fn one_episode_equals_deterministic_rule() {
        let inst = inst();
        let mut agent = SoftmaxAgent::new(PriorityFeature::WorkRemaining, 0.1, 0).unwrap();
        let res = best_of_search(&inst, &mut agent, &SearchOptions::with_episodes(1)).unwrap();
        let rule = rollout(&inst, &mut PriorityRule::mwkr()).unwrap();
        assert_eq!(res.episodes, 1);
        assert_eq!(res.best_makespan, rule.makespan);
        assert_eq!(res.best_schedule, rule.schedule);

        let zero = SearchOptions::with_budget(Duration::ZERO);
        let res = best_of_search(&inst, &mut agent, &zero).unwrap();
        assert_eq!(res.episodes, 1);
    }

    #[test]
    fn search_dominates_rule_and_tracks_history() {
        let inst = inst();
        let rule = rollout(&inst, &mut PriorityRule::fifo()).unwrap();
        let mut agent = SoftmaxAgent::new(PriorityFeature::IdleSinceLast, 0.05, 3).unwrap();
        let res = best_of_search(&inst, &mut agent, &SearchOptions::with_episodes(200)).unwrap();
        assert_eq!(res.episodes, 200);
        assert_eq!(res.makespan_history.len(), 200);
        assert_eq!(res.makespan_history[0], rule.makespan);
        assert_eq!(Some(&res.best_makespan), res.makespan_history.iter().min());
        assert!(res.best_makespan <= rule.makespan);
        assert!(res.best_schedule.validate(&inst).unwrap().valid);
        assert!(res.engine_steps >= 200 * 40);
    }

    #[test]
    fn search_is_reproducible() {
        let inst = inst();
        let run = || {
            let mut agent = SoftmaxAgent::new(PriorityFeature::WorkRemaining, 0.2, 9).unwrap();
            best_of_search(&inst, &mut agent, &SearchOptions::with_episodes(50))
                .unwrap()
                .makespan_history
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn parallel_search_keeps_best() {
        let inst = inst();
        let opts = SearchOptions::with_episodes(60);
        let res = best_of_search_parallel(
            &inst,
            |w| SoftmaxAgent::new(PriorityFeature::WorkRemaining, 0.2, w as u64),
            &opts,
            3,
        )
        .unwrap();
        let rule = rollout(&inst, &mut PriorityRule::mwkr()).unwrap();
        assert!(res.best_makespan <= rule.makespan);
        assert!(res.makespan_history.contains(&rule.makespan));
        assert_eq!(Some(&res.best_makespan), res.makespan_history.iter().min());
        assert!(res.episodes <= 61);
    }
}
