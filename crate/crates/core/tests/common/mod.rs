//! Test-only oracles. Nothing here calls into the code under test except to
//! load data, so the checks stay independent.

#![allow(dead_code)]

use std::path::PathBuf;

use jss_core::{load_instance, Instance, ParseOptions, Time};

pub const TAILLARD: [&str; 10] = [
    "ta41", "ta42", "ta43", "ta44", "ta45", "ta46", "ta47", "ta48", "ta49", "ta50",
];
pub const DEMIRKOL: [&str; 5] = ["dmu16", "dmu17", "dmu18", "dmu19", "dmu20"];

pub fn instance_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("instances")
        .join(format!("{name}.txt"))
}

pub fn benchmark(name: &str) -> Instance {
    load_instance(&instance_path(name), ParseOptions::default()).expect("bundled instance loads")
}

/// Closed-form episode return: every unit of work is rewarded once and every
/// machine is charged for the whole horizon minus its own work.
pub fn expected_return(inst: &Instance, makespan: Time) -> i64 {
    let total: i64 = inst
        .jobs
        .iter()
        .flat_map(|j| &j.ops)
        .map(|o| o.duration as i64)
        .sum();
    2 * total - inst.machine_count as i64 * makespan as i64
}

/// Pairwise feasibility check over raw start times. Returns a description of
/// the first problem found.
pub fn check_starts(inst: &Instance, starts: &[Vec<Time>]) -> Result<Time, String> {
    if starts.len() != inst.job_count() {
        return Err("wrong job count".into());
    }
    let mut intervals = Vec::new();
    let mut makespan = 0;
    for (j, (row, job)) in starts.iter().zip(&inst.jobs).enumerate() {
        if row.len() != job.ops.len() {
            return Err(format!("job {j}: wrong operation count"));
        }
        for (k, (&s, op)) in row.iter().zip(&job.ops).enumerate() {
            if k > 0 && s < row[k - 1] + job.ops[k - 1].duration {
                return Err(format!("job {j} op {k} starts before its predecessor ends"));
            }
            intervals.push((op.machine, s, s + op.duration, j, k));
            makespan = makespan.max(s + op.duration);
        }
    }
    for (a, x) in intervals.iter().enumerate() {
        for y in &intervals[a + 1..] {
            if x.0 == y.0 && x.1 < y.2 && y.1 < x.2 {
                return Err(format!(
                    "machine {}: job {} op {} overlaps job {} op {}",
                    x.0, x.3, x.4, y.3, y.4
                ));
            }
        }
    }
    Ok(makespan)
}

/// Optimal makespan by trying every combination of machine sequences and
/// computing the semi-active schedule of each. Only for very small instances.
pub fn enumerate_optimal(inst: &Instance) -> Time {
    let m = inst.machine_count;
    // per machine, the (job, op) pairs that run on it
    let mut on_machine: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    for (j, job) in inst.jobs.iter().enumerate() {
        for (k, op) in job.ops.iter().enumerate() {
            on_machine[op.machine].push((j, k));
        }
    }
    let perms: Vec<Vec<Vec<usize>>> = on_machine
        .iter()
        .map(|ops| permutations(ops.len()))
        .collect();
    let mut choice = vec![0usize; m];
    let mut best = Time::MAX;
    loop {
        let orders: Vec<Vec<(usize, usize)>> = (0..m)
            .map(|mi| {
                perms[mi][choice[mi]]
                    .iter()
                    .map(|&i| on_machine[mi][i])
                    .collect()
            })
            .collect();
        if let Some(ms) = semi_active(inst, &orders) {
            best = best.min(ms);
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == m {
                return best;
            }
            choice[i] += 1;
            if choice[i] < perms[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Earliest start times given fixed machine orders, or `None` if the orders
/// contradict the job routes.
fn semi_active(inst: &Instance, orders: &[Vec<(usize, usize)>]) -> Option<Time> {
    let mut job_next = vec![0usize; inst.job_count()];
    let mut job_ready = vec![0 as Time; inst.job_count()];
    let mut mach_pos = vec![0usize; inst.machine_count];
    let mut mach_ready = vec![0 as Time; inst.machine_count];
    let total = inst.op_count();
    let mut done = 0;
    while done < total {
        let mut progressed = false;
        for mi in 0..inst.machine_count {
            while let Some(&(j, k)) = orders[mi].get(mach_pos[mi]) {
                if job_next[j] != k {
                    break;
                }
                let start = job_ready[j].max(mach_ready[mi]);
                let end = start + inst.jobs[j].ops[k].duration;
                job_ready[j] = end;
                mach_ready[mi] = end;
                job_next[j] += 1;
                mach_pos[mi] += 1;
                done += 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    Some(mach_ready.into_iter().max().unwrap_or(0))
}

/// Move op `k >= 1` of job `j` to start together with its predecessor.
pub fn inject_precedence(starts: &mut [Vec<Time>], j: usize, k: usize) {
    assert!(k >= 1);
    starts[j][k] = starts[j][k - 1];
}

/// Make the `idx`-th machine-adjacent pair on machine `m` start at the same time.
/// Returns false if the machine has fewer than two operations.
pub fn inject_overlap(inst: &Instance, starts: &mut [Vec<Time>], m: usize, idx: usize) -> bool {
    let mut ops: Vec<(Time, usize, usize)> = Vec::new();
    for (j, job) in inst.jobs.iter().enumerate() {
        for (k, op) in job.ops.iter().enumerate() {
            if op.machine == m {
                ops.push((starts[j][k], j, k));
            }
        }
    }
    if ops.len() < 2 {
        return false;
    }
    ops.sort();
    let i = idx % (ops.len() - 1);
    let (s, _, _) = ops[i];
    let (_, j, k) = ops[i + 1];
    starts[j][k] = s;
    true
}
