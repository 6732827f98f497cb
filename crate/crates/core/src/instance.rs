//! Classic job-shop instances: parsing, serialization, validation,
//! Taillard-style generation and the aggregates used for feature scaling.
//!
//! The text format is the one used by the public benchmark distributions:
//!
//! ```text
//! # optional comment lines
//! J M
//! m d m d ... (M pairs, one line per job)
//! ```
//!
//! Machine indices are 0-based unless [`ParseOptions::one_based`] is set.

use std::fmt::{self, Write as _};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer time unit used for durations and clock values.
pub type Time = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub machine: usize,
    pub duration: Time,
}

/// The precedence chain of one job.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JobSpec {
    pub ops: Vec<Operation>,
}

impl JobSpec {
    pub fn new(ops: Vec<Operation>) -> Self {
        Self { ops }
    }

    pub fn total_duration(&self) -> Time {
        self.ops.iter().map(|op| op.duration).sum()
    }
}

/// An immutable problem definition.
///
/// Fields are public so that malformed instances can be built and passed to
/// [`Instance::validate`]; everything downstream (the environment, the
/// oracles) validates on entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub machine_count: usize,
    pub jobs: Vec<JobSpec>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Treat machine indices in the file as 1-based and shift them down.
    pub one_based: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoJobs,
    NoMachines,
    ZeroDuration {
        job: usize,
        op: usize,
    },
    MachineOutOfRange {
        job: usize,
        op: usize,
        machine: usize,
    },
    DuplicateMachine {
        job: usize,
        machine: usize,
    },
    WrongOperationCount {
        job: usize,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NoJobs => write!(f, "instance has no jobs"),
            Violation::NoMachines => write!(f, "instance has no machines"),
            Violation::ZeroDuration { job, op } => {
                write!(f, "job {job} operation {op} has duration 0")
            }
            Violation::MachineOutOfRange { job, op, machine } => {
                write!(
                    f,
                    "job {job} operation {op} uses machine {machine}, out of range"
                )
            }
            Violation::DuplicateMachine { job, machine } => {
                write!(f, "job {job} visits machine {machine} more than once")
            }
            Violation::WrongOperationCount {
                job,
                expected,
                found,
            } => write!(f, "job {job} has {found} operations, expected {expected}"),
        }
    }
}

/// All invariant violations found in an instance. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Instance-level aggregates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub max_op_duration: Time,
    pub total_duration: Time,
    pub job_totals: Vec<Time>,
    pub machine_totals: Vec<Time>,
    /// max(longest job, most loaded machine)
    pub trivial_lower_bound: Time,
}

impl InstanceStats {
    pub fn max_job_total(&self) -> Time {
        self.job_totals.iter().copied().max().unwrap_or(0)
    }
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        machine_count: usize,
        jobs: Vec<JobSpec>,
    ) -> Result<Self, InstanceError> {
        let inst = Self {
            name: name.into(),
            machine_count,
            jobs,
        };
        let report = inst.validate();
        if report.is_valid() {
            Ok(inst)
        } else {
            Err(InstanceError::Invalid(report))
        }
    }

    /// Build from `(machine, duration)` rows, one row per job.
    pub fn from_rows(
        name: impl Into<String>,
        machine_count: usize,
        rows: &[&[(usize, Time)]],
    ) -> Result<Self, InstanceError> {
        let jobs = rows
            .iter()
            .map(|row| {
                JobSpec::new(
                    row.iter()
                        .map(|&(machine, duration)| Operation { machine, duration })
                        .collect(),
                )
            })
            .collect();
        Self::new(name, machine_count, jobs)
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn op_count(&self) -> usize {
        self.jobs.iter().map(|j| j.ops.len()).sum()
    }

    pub fn op(&self, job: usize, pos: usize) -> Operation {
        self.jobs[job].ops[pos]
    }

    /// Check every classic-JSS invariant and collect all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.jobs.is_empty() {
            violations.push(Violation::NoJobs);
        }
        if self.machine_count == 0 {
            violations.push(Violation::NoMachines);
        }
        for (j, job) in self.jobs.iter().enumerate() {
            if job.ops.len() != self.machine_count {
                violations.push(Violation::WrongOperationCount {
                    job: j,
                    expected: self.machine_count,
                    found: job.ops.len(),
                });
            }
            let mut seen = vec![false; self.machine_count];
            let mut reported = vec![false; self.machine_count];
            for (k, op) in job.ops.iter().enumerate() {
                if op.duration == 0 {
                    violations.push(Violation::ZeroDuration { job: j, op: k });
                }
                if op.machine >= self.machine_count {
                    violations.push(Violation::MachineOutOfRange {
                        job: j,
                        op: k,
                        machine: op.machine,
                    });
                    continue;
                }
                if seen[op.machine] && !reported[op.machine] {
                    violations.push(Violation::DuplicateMachine {
                        job: j,
                        machine: op.machine,
                    });
                    reported[op.machine] = true;
                }
                seen[op.machine] = true;
            }
        }
        ValidationReport { violations }
    }

    pub fn stats(&self) -> InstanceStats {
        let mut machine_totals = vec![0; self.machine_count];
        let mut max_op_duration = 0;
        let mut job_totals = Vec::with_capacity(self.jobs.len());
        for job in &self.jobs {
            let mut total = 0;
            for op in &job.ops {
                max_op_duration = max_op_duration.max(op.duration);
                total += op.duration;
                if let Some(slot) = machine_totals.get_mut(op.machine) {
                    *slot += op.duration;
                }
            }
            job_totals.push(total);
        }
        let total_duration = job_totals.iter().sum();
        let trivial_lower_bound = job_totals
            .iter()
            .chain(machine_totals.iter())
            .copied()
            .max()
            .unwrap_or(0);
        InstanceStats {
            max_op_duration,
            total_duration,
            job_totals,
            machine_totals,
            trivial_lower_bound,
        }
    }

    /// Canonical text form. Round-trips through [`parse_instance`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.jobs.len(), self.machine_count);
        for job in &self.jobs {
            let mut first = true;
            for op in &job.ops {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{} {}", op.machine, op.duration);
            }
            out.push('\n');
        }
        out
    }

    /// Taillard-style random instance: each job visits the machines in a
    /// random permutation, durations uniform in `durations` (inclusive).
    pub fn generate_random(
        job_count: usize,
        machine_count: usize,
        durations: (Time, Time),
        seed: u64,
    ) -> Result<Self, InstanceError> {
        let (lo, hi) = durations;
        if job_count == 0 || machine_count == 0 {
            return Err(InstanceError::Generator(format!(
                "need at least one job and one machine, got {job_count}x{machine_count}"
            )));
        }
        if lo == 0 || lo > hi {
            return Err(InstanceError::Generator(format!(
                "duration range [{lo}, {hi}] must be non-empty and start at 1 or above"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut machines: Vec<usize> = (0..machine_count).collect();
        let jobs = (0..job_count)
            .map(|_| {
                machines.shuffle(&mut rng);
                JobSpec::new(
                    machines
                        .iter()
                        .map(|&machine| Operation {
                            machine,
                            duration: rng.gen_range(lo..=hi),
                        })
                        .collect(),
                )
            })
            .collect();
        Self::new(
            format!("rand-{job_count}x{machine_count}-s{seed}"),
            machine_count,
            jobs,
        )
    }
}

pub const DEFAULT_DURATIONS: (Time, Time) = (1, 99);

pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    parse_instance_with(text, "instance", ParseOptions::default())
}

pub fn serialize_instance(inst: &Instance) -> String {
    inst.to_text()
}

fn parse_number(tok: &str, line: usize, what: &str) -> Result<u64, InstanceError> {
    tok.parse::<u64>()
        .map_err(|_| parse_err(line, format!("expected {what}, found `{tok}`")))
}

/// Parse the standard benchmark format. Errors carry 1-based line numbers.
pub fn parse_instance_with(
    text: &str,
    name: &str,
    opts: ParseOptions,
) -> Result<Instance, InstanceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header line `J M`"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(parse_err(
            header_line,
            format!("malformed header: expected `J M`, found `{header}`"),
        ));
    }
    let job_count = parse_number(toks[0], header_line, "job count")? as usize;
    let machine_count = parse_number(toks[1], header_line, "machine count")? as usize;
    if job_count == 0 || machine_count == 0 {
        return Err(parse_err(
            header_line,
            "malformed header: job and machine counts must be at least 1",
        ));
    }

    let mut jobs = Vec::with_capacity(job_count);
    let mut last_line = header_line;
    for j in 0..job_count {
        let (line_no, line) = lines.next().ok_or_else(|| {
            parse_err(
                last_line + 1,
                format!("expected {job_count} job lines, found {j}"),
            )
        })?;
        last_line = line_no;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 * machine_count {
            return Err(parse_err(
                line_no,
                format!(
                    "job {j}: expected {machine_count} (machine duration) pairs, found {} tokens",
                    toks.len()
                ),
            ));
        }
        let mut seen = vec![false; machine_count];
        let mut ops = Vec::with_capacity(machine_count);
        for pair in toks.chunks_exact(2) {
            let raw = parse_number(pair[0], line_no, "machine index")?;
            let machine = if opts.one_based {
                raw.checked_sub(1)
                    .ok_or_else(|| parse_err(line_no, "machine index 0 in a 1-based file"))?
            } else {
                raw
            } as usize;
            let duration = parse_number(pair[1], line_no, "duration")?;
            if machine >= machine_count {
                return Err(parse_err(
                    line_no,
                    format!("job {j}: machine index {machine} out of range 0..{machine_count}"),
                ));
            }
            if duration < 1 {
                return Err(parse_err(
                    line_no,
                    format!("job {j}: duration must be at least 1"),
                ));
            }
            if seen[machine] {
                return Err(parse_err(
                    line_no,
                    format!("job {j}: machine {machine} appears twice"),
                ));
            }
            seen[machine] = true;
            ops.push(Operation { machine, duration });
        }
        jobs.push(JobSpec::new(ops));
    }
    if let Some((line_no, line)) = lines.next() {
        return Err(parse_err(
            line_no,
            format!("unexpected trailing content `{line}` after {job_count} job lines"),
        ));
    }
    Instance::new(name, machine_count, jobs)
}

/// Read an instance file; the file stem becomes the instance name.
pub fn load_instance(path: &Path, opts: ParseOptions) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|e| InstanceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".to_string());
    parse_instance_with(&text, &name, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_line(r: Result<Instance, InstanceError>) -> usize {
        match r {
            Err(InstanceError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_instance() {
        let inst = parse_instance("1 1\n0 5\n").unwrap();
        assert_eq!(inst.job_count(), 1);
        assert_eq!(inst.machine_count, 1);
        assert_eq!(
            inst.op(0, 0),
            Operation {
                machine: 0,
                duration: 5
            }
        );
        assert_eq!(serialize_instance(&inst), "1 1\n0 5\n");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let inst = parse_instance("# ta-like\n\n2 2\n0 1 1 2\n# mid\n1 3 0 4\n").unwrap();
        assert_eq!(inst.op_count(), 4);
        assert_eq!(
            inst.op(1, 1),
            Operation {
                machine: 0,
                duration: 4
            }
        );
    }

    #[test]
    fn three_by_three_permutation_instance() {
        let inst = parse_instance("3 3\n0 3 1 2 2 2\n0 2 2 1 1 4\n1 4 2 3 0 1\n").unwrap();
        assert!(inst.validate().is_valid());
        for m in 0..3 {
            for job in &inst.jobs {
                assert_eq!(job.ops.iter().filter(|o| o.machine == m).count(), 1);
            }
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(err_line(parse_instance("")), 1);
        assert_eq!(err_line(parse_instance("2\n0 1\n")), 1);
        assert_eq!(err_line(parse_instance("x 1\n0 1\n")), 1);
        // wrong pair count
        assert_eq!(err_line(parse_instance("2 2\n0 1 1 1\n0 1\n")), 3);
        // machine out of range
        assert_eq!(err_line(parse_instance("1 2\n0 1 2 1\n")), 2);
        // zero duration
        assert_eq!(err_line(parse_instance("1 2\n0 0 1 1\n")), 2);
        // duplicate machine
        assert_eq!(err_line(parse_instance("# c\n1 2\n0 1 0 1\n")), 3);
        // missing job line
        assert_eq!(err_line(parse_instance("2 1\n0 1\n")), 3);
        // trailing junk
        assert_eq!(err_line(parse_instance("1 1\n0 1\n0 1\n")), 3);
    }

    #[test]
    fn one_based_files_are_rejected_or_converted() {
        let text = "2 2\n1 3 2 4\n2 1 1 2\n";
        assert!(parse_instance(text).is_err());
        let inst = parse_instance_with(text, "x", ParseOptions { one_based: true }).unwrap();
        assert_eq!(inst.op(0, 0).machine, 0);
        assert_eq!(inst.op(0, 1).machine, 1);
    }

    #[test]
    fn validate_reports_each_violation() {
        let dup = Instance {
            name: "dup".into(),
            machine_count: 2,
            jobs: vec![JobSpec::new(vec![
                Operation {
                    machine: 0,
                    duration: 1,
                },
                Operation {
                    machine: 0,
                    duration: 1,
                },
            ])],
        };
        assert_eq!(
            dup.validate().violations,
            vec![Violation::DuplicateMachine { job: 0, machine: 0 }]
        );

        let zero = Instance {
            name: "zero".into(),
            machine_count: 1,
            jobs: vec![JobSpec::new(vec![Operation {
                machine: 0,
                duration: 0,
            }])],
        };
        assert_eq!(
            zero.validate().violations,
            vec![Violation::ZeroDuration { job: 0, op: 0 }]
        );

        let empty = Instance {
            name: "e".into(),
            machine_count: 0,
            jobs: vec![],
        };
        assert_eq!(empty.validate().violations.len(), 2);
    }

    #[test]
    fn aggregates() {
        let inst = parse_instance("1 1\n0 5\n").unwrap();
        let s = inst.stats();
        assert_eq!(
            (s.max_op_duration, s.total_duration, s.trivial_lower_bound),
            (5, 5, 5)
        );

        let two = Instance::from_rows("t", 1, &[&[(0, 5)], &[(0, 7)]]).unwrap();
        let s = two.stats();
        assert_eq!(s.machine_totals, vec![12]);
        assert_eq!(s.trivial_lower_bound, 12);
        assert_eq!(s.max_job_total(), 7);
    }

    #[test]
    fn generator_is_deterministic_and_sized() {
        let a = Instance::generate_random(3, 3, DEFAULT_DURATIONS, 0).unwrap();
        let b = Instance::generate_random(3, 3, DEFAULT_DURATIONS, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_valid());
        let big = Instance::generate_random(30, 20, DEFAULT_DURATIONS, 7).unwrap();
        assert_eq!(big.op_count(), 600);
        assert!(big
            .jobs
            .iter()
            .flat_map(|j| &j.ops)
            .all(|o| (1..=99).contains(&o.duration)));
    }

    #[test]
    fn generator_seeds_differ() {
        let mut collisions = 0;
        for s in 0..100u64 {
            let a = Instance::generate_random(3, 3, DEFAULT_DURATIONS, 2 * s).unwrap();
            let b = Instance::generate_random(3, 3, DEFAULT_DURATIONS, 2 * s + 1).unwrap();
            if a.jobs == b.jobs {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(Instance::generate_random(0, 3, DEFAULT_DURATIONS, 0).is_err());
        assert!(Instance::generate_random(3, 0, DEFAULT_DURATIONS, 0).is_err());
        assert!(Instance::generate_random(3, 3, (5, 4), 0).is_err());
        assert!(Instance::generate_random(3, 3, (0, 4), 0).is_err());
    }
}
