//! Exact optima for tiny instances.
//!
//! [`brute_force_optimal`] branches on active-schedule conflict sets
//! (Giffler-Thompson) and never touches the environment.
//! [`env_tree_best`] exhaustively walks the environment's legal-action tree.
//! Comparing the two tells whether the environment's reduction rules cut
//! the optimum out of reach.

use thiserror::Error;

use crate::env::{EnvError, EnvState};
use crate::instance::{Instance, Time, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    /// Largest `jobs * machines` accepted.
    pub max_ops: usize,
    /// Search nodes expanded before giving up.
    pub node_budget: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_ops: 12,
            node_budget: 50_000_000,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {ops} operations, cap is {cap}")]
    TooLarge { ops: usize, cap: usize },
    #[error("node budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Env(#[from] EnvError),
}

fn check(inst: &Instance, limits: &OracleLimits) -> Result<(), OracleError> {
    let report = inst.validate();
    if !report.is_valid() {
        return Err(OracleError::Invalid(report));
    }
    let ops = inst.op_count();
    if ops > limits.max_ops {
        return Err(OracleError::TooLarge {
            ops,
            cap: limits.max_ops,
        });
    }
    Ok(())
}

struct BranchAndBound<'a> {
    inst: &'a Instance,
    next: Vec<usize>,
    job_ready: Vec<Time>,
    machine_ready: Vec<Time>,
    job_left: Vec<Time>,
    machine_left: Vec<Time>,
    scheduled: usize,
    total_ops: usize,
    best: Time,
    nodes: u64,
    budget: u64,
}

impl BranchAndBound<'_> {
    fn lower_bound(&self, current: Time) -> Time {
        let jobs = self
            .job_ready
            .iter()
            .zip(&self.job_left)
            .map(|(r, l)| r + l);
        let machines = self
            .machine_ready
            .iter()
            .zip(&self.machine_left)
            .map(|(r, l)| r + l);
        jobs.chain(machines).fold(current, Time::max)
    }

    fn dfs(&mut self, current: Time) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(OracleError::BudgetExhausted(self.budget));
        }
        if self.scheduled == self.total_ops {
            self.best = self.best.min(current);
            return Ok(());
        }
        if self.lower_bound(current) >= self.best {
            return Ok(());
        }

        // operation with the earliest completion among all schedulable ones
        let mut pivot: Option<(Time, usize)> = None;
        for j in 0..self.next.len() {
            let k = self.next[j];
            if k == self.inst.jobs[j].ops.len() {
                continue;
            }
            let op = self.inst.op(j, k);
            let end = self.job_ready[j].max(self.machine_ready[op.machine]) + op.duration;
            if pivot.is_none_or(|(e, _)| end < e) {
                pivot = Some((end, op.machine));
            }
        }
        let (earliest_end, machine) = pivot.expect("unscheduled operations remain");

        for j in 0..self.next.len() {
            let k = self.next[j];
            if k == self.inst.jobs[j].ops.len() {
                continue;
            }
            let op = self.inst.op(j, k);
            if op.machine != machine {
                continue;
            }
            let start = self.job_ready[j].max(self.machine_ready[machine]);
            if start >= earliest_end {
                continue;
            }
            let end = start + op.duration;
            let saved = (self.job_ready[j], self.machine_ready[machine]);
            self.next[j] += 1;
            self.job_ready[j] = end;
            self.machine_ready[machine] = end;
            self.job_left[j] -= op.duration;
            self.machine_left[machine] -= op.duration;
            self.scheduled += 1;

            let r = self.dfs(current.max(end));

            self.scheduled -= 1;
            self.machine_left[machine] += op.duration;
            self.job_left[j] += op.duration;
            (self.job_ready[j], self.machine_ready[machine]) = saved;
            self.next[j] -= 1;
            r?;
        }
        Ok(())
    }
}

/// Exact optimal makespan by depth-first branch-and-bound over active schedules.
pub fn brute_force_optimal(inst: &Instance, limits: &OracleLimits) -> Result<Time, OracleError> {
    check(inst, limits)?;
    let stats = inst.stats();
    let mut bb = BranchAndBound {
        inst,
        next: vec![0; inst.job_count()],
        job_ready: vec![0; inst.job_count()],
        machine_ready: vec![0; inst.machine_count],
        job_left: stats.job_totals.clone(),
        machine_left: stats.machine_totals.clone(),
        scheduled: 0,
        total_ops: inst.op_count(),
        // any schedule that runs one operation at a time finishes by then
        best: stats.total_duration + 1,
        nodes: 0,
        budget: limits.node_budget,
    };
    bb.dfs(0)?;
    Ok(bb.best)
}

/// Best makespan reachable by any legal action sequence in the environment.
pub fn env_tree_best(inst: &Instance, limits: &OracleLimits) -> Result<Time, OracleError> {
    check(inst, limits)?;
    env_tree_best_with(&EnvState::reset(inst)?, limits)
}

/// Same as [`env_tree_best`] but starting from an arbitrary (e.g. ablated) state.
pub fn env_tree_best_with(root: &EnvState, limits: &OracleLimits) -> Result<Time, OracleError> {
    let mut best = Time::MAX;
    let mut nodes = 0u64;
    walk(root, &mut best, &mut nodes, limits.node_budget)?;
    Ok(best)
}

/// Sound bound: every job still needs its unallocated work after it is free,
/// and every machine still needs its unallocated load after it is free.
fn env_lower_bound(state: &EnvState) -> Time {
    let inst = state.instance();
    let clock = state.clock();
    let mut machine_left = vec![0; inst.machine_count];
    let mut bound = clock;
    for j in 0..inst.job_count() {
        let status = state.job_status(j);
        let mut left = 0;
        for op in &inst.jobs[j].ops[status.next_op..] {
            left += op.duration;
            machine_left[op.machine] += op.duration;
        }
        bound = bound.max(status.op_busy_until.unwrap_or(clock) + left);
    }
    for (m, left) in machine_left.into_iter().enumerate() {
        bound = bound.max(state.machine_status(m).busy_until + left);
    }
    bound
}

fn walk(
    state: &EnvState,
    best: &mut Time,
    nodes: &mut u64,
    budget: u64,
) -> Result<(), OracleError> {
    *nodes += 1;
    if *nodes > budget {
        return Err(OracleError::BudgetExhausted(budget));
    }
    if state.is_done() {
        *best = (*best).min(state.clock());
        return Ok(());
    }
    if env_lower_bound(state) >= *best {
        return Ok(());
    }
    let actions: Vec<_> = state.mask().legal_actions().collect();
    for action in actions {
        let mut child = state.clone();
        child.apply(action)?;
        walk(&child, best, nodes, budget)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_instances() {
        let limits = OracleLimits::default();
        let one = Instance::from_rows("1", 1, &[&[(0, 5)]]).unwrap();
        assert_eq!(brute_force_optimal(&one, &limits), Ok(5));
        assert_eq!(env_tree_best(&one, &limits), Ok(5));
        let serial = Instance::from_rows("s", 1, &[&[(0, 3)], &[(0, 4)]]).unwrap();
        assert_eq!(brute_force_optimal(&serial, &limits), Ok(7));
        assert_eq!(env_tree_best(&serial, &limits), Ok(7));
    }

    #[test]
    fn two_by_two() {
        let limits = OracleLimits::default();
        let inst = Instance::from_rows("2x2", 2, &[&[(0, 2), (1, 2)], &[(1, 3), (0, 1)]]).unwrap();
        assert_eq!(brute_force_optimal(&inst, &limits), Ok(5));
        assert_eq!(env_tree_best(&inst, &limits), Ok(5));
    }

    #[test]
    fn caps_and_budgets() {
        let inst = Instance::generate_random(4, 4, (1, 9), 0).unwrap();
        let limits = OracleLimits::default();
        assert_eq!(
            brute_force_optimal(&inst, &limits),
            Err(OracleError::TooLarge { ops: 16, cap: 12 })
        );
        assert!(matches!(
            env_tree_best(&inst, &limits),
            Err(OracleError::TooLarge { .. })
        ));
        let tight = OracleLimits {
            max_ops: 16,
            node_budget: 3,
        };
        assert_eq!(
            brute_force_optimal(&inst, &tight),
            Err(OracleError::BudgetExhausted(3))
        );
        assert_eq!(
            env_tree_best(&inst, &tight),
            Err(OracleError::BudgetExhausted(3))
        );
    }
}
