//! Discrete-event job-shop environment.
//!
//! The agent acts as a dispatcher: at every decision point it either
//! allocates the next operation of one job, or takes No-Op to let time run
//! until a new job becomes allocatable. The clock only moves through the
//! ordered set of pending completion times, so all time arithmetic is exact
//! integer arithmetic.
//!
//! Reward for a transition is the processing time allocated minus the idle
//! time ("holes") every machine accumulates while the clock advances,
//! including machines that have already finished all of their operations.
//! Summed over an episode this is exactly
//! `2 * total_duration - machine_count * makespan`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, InstanceStats, Time, ValidationReport};

/// Number of columns in the observation matrix.
pub const FEATURE_COUNT: usize = 7;

/// Column indices into a feature row.
pub mod feature {
    pub const LEGAL: usize = 0;
    pub const OP_REMAINING: usize = 1;
    pub const PROGRESS: usize = 2;
    pub const WORK_REMAINING: usize = 3;
    pub const MACHINE_WAIT: usize = 4;
    pub const IDLE_SINCE_LAST: usize = 5;
    pub const IDLE_TOTAL: usize = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Job(usize),
    NoOp,
}

impl Action {
    /// Index in the `(job_count + 1)` action space; No-Op is the last slot.
    pub fn index(self, job_count: usize) -> usize {
        match self {
            Action::Job(j) => j,
            Action::NoOp => job_count,
        }
    }

    pub fn from_index(index: usize, job_count: usize) -> Option<Self> {
        match index.cmp(&job_count) {
            std::cmp::Ordering::Less => Some(Action::Job(index)),
            std::cmp::Ordering::Equal => Some(Action::NoOp),
            std::cmp::Ordering::Greater => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Job(j) => write!(f, "J{j}"),
            Action::NoOp => f.write_str("No-Op"),
        }
    }
}

/// Legality flags for every job plus No-Op in the last slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionMask {
    pub flags: Vec<bool>,
}

impl ActionMask {
    pub fn job_count(&self) -> usize {
        self.flags.len() - 1
    }

    pub fn is_legal(&self, action: Action) -> bool {
        self.flags
            .get(action.index(self.job_count()))
            .copied()
            .unwrap_or(false)
    }

    pub fn noop(&self) -> bool {
        self.flags[self.job_count()]
    }

    pub fn job(&self, j: usize) -> bool {
        self.flags[j]
    }

    pub fn legal_jobs(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags[..self.job_count()]
            .iter()
            .enumerate()
            .filter_map(|(j, &l)| l.then_some(j))
    }

    pub fn legal_actions(&self) -> impl Iterator<Item = Action> + '_ {
        let n = self.job_count();
        self.flags
            .iter()
            .enumerate()
            .filter_map(move |(i, &l)| if l { Action::from_index(i, n) } else { None })
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }
}

impl fmt::Display for ActionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &flag in &self.flags {
            f.write_str(if flag { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `job_count x 7` feature matrix plus the legal-action mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub features: Vec<[f64; FEATURE_COUNT]>,
    pub mask: ActionMask,
}

impl Observation {
    pub fn job_count(&self) -> usize {
        self.features.len()
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(move |row| row[col])
    }
}

/// Snapshot of one machine at the current clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineStatus {
    pub busy_until: Time,
    pub running_job: Option<usize>,
    pub paused_jobs: Vec<usize>,
}

/// Snapshot of one job at the current clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobStatus {
    pub next_op: usize,
    /// Completion time of the running operation, if one is running.
    pub op_busy_until: Option<Time>,
    pub last_completion: Time,
    pub idle_since_last: Time,
    pub idle_total: Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    /// Reward after scaling (see [`EnvConfig::scale_reward`]).
    pub reward: f64,
    /// Allocated duration minus holes, in time units.
    pub raw_reward: i64,
    pub done: bool,
    /// Idle time per machine incurred during this transition.
    pub holes: Vec<Time>,
    pub elapsed: Time,
}

/// Result of [`EnvState::apply`]; a [`StepOutcome`] without the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub raw_reward: i64,
    pub idle: Time,
    pub elapsed: Time,
    pub done: bool,
}

/// Toggles for the search-space reduction rules plus No-Op caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// No-Op is illegal once this many machines have an allocatable job.
    pub machines_cap: usize,
    /// No-Op is illegal once this many jobs are allocatable.
    pub jobs_cap: usize,
    pub non_final_prioritization: bool,
    /// Every machine with allocatable jobs must receive a new non-final
    /// job sooner than its shortest candidate operation.
    pub noop_future_work: bool,
    pub noop_caps: bool,
    /// No-Op needs at least one pending event.
    pub noop_needs_event: bool,
    /// Divide rewards by the longest operation of the instance.
    pub scale_reward: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            machines_cap: 4,
            jobs_cap: 5,
            non_final_prioritization: true,
            noop_future_work: true,
            noop_caps: true,
            noop_needs_event: true,
            scale_reward: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("invalid instance: {0}")]
    InvalidInstance(ValidationReport),
    #[error("episode is already done")]
    Terminal,
    #[error("episode is not done yet")]
    NotDone,
    #[error("action index {index} out of range for {job_count} jobs")]
    OutOfRange { index: usize, job_count: usize },
    #[error("illegal action {action} (mask {mask})")]
    IllegalAction { action: Action, mask: ActionMask },
}

/// Instance data shared by every copy of an episode state.
#[derive(Debug)]
pub(crate) struct Problem {
    instance: Instance,
    stats: InstanceStats,
    /// `work_after[j][k]`: total duration of operations `k..` of job `j`.
    work_after: Vec<Vec<Time>>,
}

impl Problem {
    fn new(instance: Instance) -> Self {
        let stats = instance.stats();
        let work_after = instance
            .jobs
            .iter()
            .map(|job| {
                let mut acc = vec![0; job.ops.len() + 1];
                for k in (0..job.ops.len()).rev() {
                    acc[k] = acc[k + 1] + job.ops[k].duration;
                }
                acc
            })
            .collect();
        Self {
            instance,
            stats,
            work_after,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MachineSlot {
    busy_until: Time,
    last_job: Option<usize>,
    paused: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JobSlot {
    next_op: usize,
    /// Completion time of the last allocated operation (0 before the first).
    ready_at: Time,
    idle_since_last: Time,
    idle_total: Time,
}

/// Mutable episode state. `Clone` is a deep copy suitable for tree search.
#[derive(Debug, Clone)]
pub struct EnvState {
    problem: Arc<Problem>,
    config: EnvConfig,
    clock: Time,
    future: BTreeSet<Time>,
    machines: Vec<MachineSlot>,
    jobs: Vec<JobSlot>,
    starts: Vec<Vec<Option<Time>>>,
    ops_remaining: usize,
    raw_return: i64,
    cumulative_reward: f64,
    steps: usize,
    mask: ActionMask,
    // scratch buffers, rebuilt on every mask refresh
    base: Vec<bool>,
    machine_candidates: Vec<u32>,
    machine_has_non_final: Vec<bool>,
    machine_min_duration: Vec<Time>,
    machine_next_arrival: Vec<Time>,
    holes: Vec<Time>,
}

impl EnvState {
    pub fn reset(instance: &Instance) -> Result<Self, EnvError> {
        Self::with_config(instance, EnvConfig::default())
    }

    pub fn with_config(instance: &Instance, config: EnvConfig) -> Result<Self, EnvError> {
        let report = instance.validate();
        if !report.is_valid() {
            return Err(EnvError::InvalidInstance(report));
        }
        let problem = Arc::new(Problem::new(instance.clone()));
        let jc = instance.job_count();
        let mc = instance.machine_count;
        let mut state = Self {
            config,
            clock: 0,
            future: BTreeSet::new(),
            machines: vec![
                MachineSlot {
                    busy_until: 0,
                    last_job: None,
                    paused: Vec::new(),
                };
                mc
            ],
            jobs: vec![
                JobSlot {
                    next_op: 0,
                    ready_at: 0,
                    idle_since_last: 0,
                    idle_total: 0,
                };
                jc
            ],
            starts: instance
                .jobs
                .iter()
                .map(|j| vec![None; j.ops.len()])
                .collect(),
            ops_remaining: instance.op_count(),
            raw_return: 0,
            cumulative_reward: 0.0,
            steps: 0,
            mask: ActionMask {
                flags: vec![false; jc + 1],
            },
            base: vec![false; jc],
            machine_candidates: vec![0; mc],
            machine_has_non_final: vec![false; mc],
            machine_min_duration: vec![0; mc],
            machine_next_arrival: vec![0; mc],
            holes: vec![0; mc],
            problem,
        };
        state.refresh_mask();
        Ok(state)
    }

    /// Return to the initial state of the same instance, keeping the config.
    pub fn restart(&mut self) {
        self.clock = 0;
        self.future.clear();
        for m in &mut self.machines {
            m.busy_until = 0;
            m.last_job = None;
            m.paused.clear();
        }
        for j in &mut self.jobs {
            *j = JobSlot {
                next_op: 0,
                ready_at: 0,
                idle_since_last: 0,
                idle_total: 0,
            };
        }
        for row in &mut self.starts {
            row.iter_mut().for_each(|s| *s = None);
        }
        self.ops_remaining = self.problem.instance.op_count();
        self.raw_return = 0;
        self.cumulative_reward = 0.0;
        self.steps = 0;
        self.refresh_mask();
    }

    pub fn instance(&self) -> &Instance {
        &self.problem.instance
    }

    pub fn stats(&self) -> &InstanceStats {
        &self.problem.stats
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn clock(&self) -> Time {
        self.clock
    }

    pub fn future_times(&self) -> impl Iterator<Item = Time> + '_ {
        self.future.iter().copied()
    }

    pub fn ops_remaining(&self) -> usize {
        self.ops_remaining
    }

    /// Number of transitions applied since reset.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Sum of unscaled rewards so far.
    pub fn raw_return(&self) -> i64 {
        self.raw_return
    }

    /// Sum of rewards as returned by [`EnvState::step`].
    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative_reward
    }

    pub fn is_done(&self) -> bool {
        self.ops_remaining == 0 && self.future.is_empty()
    }

    pub fn machine_status(&self, m: usize) -> MachineStatus {
        let slot = &self.machines[m];
        MachineStatus {
            busy_until: slot.busy_until.max(self.clock),
            running_job: if slot.busy_until > self.clock {
                slot.last_job
            } else {
                None
            },
            paused_jobs: slot.paused.clone(),
        }
    }

    pub fn job_status(&self, j: usize) -> JobStatus {
        let slot = &self.jobs[j];
        let running = slot.ready_at > self.clock;
        JobStatus {
            next_op: slot.next_op,
            op_busy_until: running.then_some(slot.ready_at),
            last_completion: if running {
                self.previous_completion(j)
            } else {
                slot.ready_at
            },
            idle_since_last: slot.idle_since_last,
            idle_total: slot.idle_total,
        }
    }

    fn previous_completion(&self, j: usize) -> Time {
        let slot = &self.jobs[j];
        if slot.next_op < 2 {
            return 0;
        }
        let k = slot.next_op - 2;
        self.starts[j][k].expect("allocated op has a start")
            + self.problem.instance.op(j, k).duration
    }

    /// Start times recorded so far, indexed by `(job, op position)`.
    pub fn start_times(&self) -> &[Vec<Option<Time>>] {
        &self.starts
    }

    pub fn legal_actions(&self) -> Result<&ActionMask, EnvError> {
        if self.is_done() {
            return Err(EnvError::Terminal);
        }
        Ok(&self.mask)
    }

    /// Current mask without the terminal check (all false once done).
    pub fn mask(&self) -> &ActionMask {
        &self.mask
    }

    pub fn makespan(&self) -> Result<Time, EnvError> {
        if self.is_done() {
            Ok(self.clock)
        } else {
            Err(EnvError::NotDone)
        }
    }

    pub fn observe(&self) -> Observation {
        let mut obs = Observation {
            features: Vec::with_capacity(self.jobs.len()),
            mask: self.mask.clone(),
        };
        self.observe_into(&mut obs);
        obs
    }

    /// Refresh `obs` in place, reusing its buffers.
    pub fn observe_into(&self, obs: &mut Observation) {
        let inst = &self.problem.instance;
        let stats = &self.problem.stats;
        let max_op = stats.max_op_duration as f64;
        let max_job = stats.max_job_total() as f64;
        let total = stats.total_duration as f64;
        let clock = self.clock;

        obs.mask.flags.clone_from(&self.mask.flags);
        obs.features.clear();
        for (j, slot) in self.jobs.iter().enumerate() {
            let n = inst.jobs[j].ops.len();
            let running = slot.ready_at > clock;
            let left_on_op = if running { slot.ready_at - clock } else { 0 };
            let waiting = !running && slot.next_op < n;
            let machine_wait = if slot.next_op < n {
                let m = inst.op(j, slot.next_op).machine;
                self.machines[m].busy_until.saturating_sub(clock)
            } else {
                0
            };
            let (idle_since, idle_total) = if waiting {
                let gap = clock - slot.ready_at;
                (gap, slot.idle_total + gap)
            } else {
                (slot.idle_since_last, slot.idle_total)
            };
            obs.features.push([
                if self.mask.flags[j] { 1.0 } else { 0.0 },
                left_on_op as f64 / max_op,
                slot.next_op as f64 / n as f64,
                (self.problem.work_after[j][slot.next_op] + left_on_op) as f64 / max_job,
                machine_wait as f64 / max_op,
                idle_since as f64 / total,
                idle_total as f64 / total,
            ]);
        }
    }

    /// Apply `action` and return the full outcome including the new observation.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        let t = self.apply(action)?;
        let scale = self.reward_scale();
        Ok(StepOutcome {
            observation: self.observe(),
            reward: t.raw_reward as f64 / scale,
            raw_reward: t.raw_reward,
            done: t.done,
            holes: self.holes.clone(),
            elapsed: t.elapsed,
        })
    }

    fn reward_scale(&self) -> f64 {
        if self.config.scale_reward {
            self.problem.stats.max_op_duration as f64
        } else {
            1.0
        }
    }

    /// Apply `action` without building an observation. On error the state is
    /// left unchanged.
    pub fn apply(&mut self, action: Action) -> Result<Transition, EnvError> {
        if self.is_done() {
            return Err(EnvError::Terminal);
        }
        let jc = self.jobs.len();
        if let Action::Job(j) = action {
            if j >= jc {
                return Err(EnvError::OutOfRange {
                    index: j,
                    job_count: jc,
                });
            }
        }
        if !self.mask.is_legal(action) {
            return Err(EnvError::IllegalAction {
                action,
                mask: self.mask.clone(),
            });
        }

        self.holes.iter_mut().for_each(|h| *h = 0);
        let start_clock = self.clock;
        let allocated = match action {
            Action::Job(j) => {
                let d = self.allocate(j);
                self.refresh_mask();
                d
            }
            Action::NoOp => {
                self.wait_for_new_job();
                0
            }
        };
        self.settle();

        let idle: Time = self.holes.iter().sum();
        let raw_reward = allocated as i64 - idle as i64;
        self.raw_return += raw_reward;
        self.cumulative_reward += raw_reward as f64 / self.reward_scale();
        self.steps += 1;
        Ok(Transition {
            raw_reward,
            idle,
            elapsed: self.clock - start_clock,
            done: self.is_done(),
        })
    }

    fn allocate(&mut self, j: usize) -> Time {
        let clock = self.clock;
        let slot = &mut self.jobs[j];
        let k = slot.next_op;
        let op = self.problem.instance.op(j, k);
        let end = clock + op.duration;

        let gap = clock - slot.ready_at;
        slot.idle_since_last = gap;
        slot.idle_total += gap;
        slot.ready_at = end;
        slot.next_op += 1;

        let machine = &mut self.machines[op.machine];
        machine.busy_until = end;
        machine.last_job = Some(j);
        machine.paused.clear();

        self.starts[j][k] = Some(clock);
        self.future.insert(end);
        self.ops_remaining -= 1;
        op.duration
    }

    /// Pop the next event time and charge idle time on every machine.
    fn advance(&mut self) -> bool {
        let Some(next) = self.future.pop_first() else {
            return false;
        };
        let dt = next - self.clock;
        for (m, slot) in self.machines.iter().enumerate() {
            let busy = if slot.busy_until > self.clock {
                slot.busy_until.min(next) - self.clock
            } else {
                0
            };
            self.holes[m] += dt - busy;
        }
        self.clock = next;
        true
    }

    /// No-Op: pause every currently allocatable job on its machine, then run
    /// the clock until some job that was not allocatable becomes so.
    fn wait_for_new_job(&mut self) {
        for j in 0..self.jobs.len() {
            if self.base[j] {
                let m = self.next_machine(j);
                self.machines[m].paused.push(j);
            }
        }
        loop {
            if !self.advance() {
                // only reachable with the future-work rule disabled
                self.release_pauses();
                break;
            }
            self.refresh_mask();
            if self.base.iter().any(|&b| b) {
                break;
            }
        }
        self.refresh_mask();
    }

    /// Advance until some action is legal or the episode completes.
    fn settle(&mut self) {
        while !self.mask.any() {
            if self.future.is_empty() {
                if self.ops_remaining == 0 {
                    break;
                }
                // every waiting job is paused and nothing is running: only
                // possible when No-Op rules are switched off
                self.release_pauses();
                self.refresh_mask();
                debug_assert!(self.mask.any(), "released pauses must free a job");
                if !self.mask.any() {
                    break;
                }
                continue;
            }
            self.advance();
            self.refresh_mask();
        }
    }

    fn release_pauses(&mut self) {
        for m in &mut self.machines {
            m.paused.clear();
        }
    }

    fn next_machine(&self, j: usize) -> usize {
        self.problem.instance.op(j, self.jobs[j].next_op).machine
    }

    fn is_final(&self, j: usize) -> bool {
        self.jobs[j].next_op + 1 == self.problem.instance.jobs[j].ops.len()
    }

    fn refresh_mask(&mut self) {
        let inst = &self.problem.instance;
        let clock = self.clock;
        let jc = self.jobs.len();

        self.machine_candidates.iter_mut().for_each(|c| *c = 0);
        self.machine_has_non_final
            .iter_mut()
            .for_each(|f| *f = false);
        self.machine_min_duration
            .iter_mut()
            .for_each(|d| *d = Time::MAX);
        self.machine_next_arrival
            .iter_mut()
            .for_each(|t| *t = Time::MAX);

        let mut base_count = 0usize;
        for j in 0..jc {
            let slot = &self.jobs[j];
            let n = inst.jobs[j].ops.len();
            self.base[j] = false;
            if slot.next_op >= n {
                continue;
            }
            let op = inst.op(j, slot.next_op);
            let m = op.machine;
            if slot.ready_at > clock {
                // running: note when it reaches its next machine, if that op is not final
                if slot.next_op + 1 < n {
                    let arrival = &mut self.machine_next_arrival[m];
                    *arrival = (*arrival).min(slot.ready_at);
                }
                continue;
            }
            let machine = &self.machines[m];
            if machine.busy_until > clock || machine.paused.contains(&j) {
                continue;
            }
            self.base[j] = true;
            base_count += 1;
            self.machine_candidates[m] += 1;
            self.machine_min_duration[m] = self.machine_min_duration[m].min(op.duration);
            if slot.next_op + 1 < n {
                self.machine_has_non_final[m] = true;
            }
        }

        for j in 0..jc {
            let legal = self.base[j]
                && !(self.config.non_final_prioritization
                    && self.is_final(j)
                    && self.machine_has_non_final[self.next_machine(j)]);
            self.mask.flags[j] = legal;
        }
        self.mask.flags[jc] = base_count > 0 && self.noop_allowed(base_count);
    }

    fn noop_allowed(&self, base_count: usize) -> bool {
        let cfg = &self.config;
        if cfg.noop_needs_event && self.future.is_empty() {
            return false;
        }
        if cfg.noop_caps {
            let machines_with_jobs = self.machine_candidates.iter().filter(|&&c| c > 0).count();
            if machines_with_jobs >= cfg.machines_cap || base_count >= cfg.jobs_cap {
                return false;
            }
        }
        if cfg.noop_future_work {
            for m in 0..self.machines.len() {
                if self.machine_candidates[m] == 0 {
                    continue;
                }
                let arrival = self.machine_next_arrival[m];
                if arrival == Time::MAX || arrival - self.clock >= self.machine_min_duration[m] {
                    return false;
                }
            }
        }
        true
    }
}
