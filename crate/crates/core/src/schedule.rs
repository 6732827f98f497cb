//! Complete schedules, checked independently of the environment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvState;
use crate::instance::{Instance, Time};

/// Start time of every operation, indexed by `(job, op position)`.
/// Durations always come from the instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub starts: Vec<Vec<Time>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("episode is not done")]
    NotTerminal,
    #[error("incomplete schedule: {0}")]
    Incomplete(String),
    #[error("schedule is not valid: {0}")]
    Invalid(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Precedence,
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleViolation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub valid: bool,
    pub makespan: Time,
    pub violations: Vec<ScheduleViolation>,
}

impl Schedule {
    /// Copy the recorded start times out of a finished episode.
    pub fn from_env(state: &EnvState) -> Result<Self, ScheduleError> {
        if !state.is_done() {
            return Err(ScheduleError::NotTerminal);
        }
        let starts = state
            .start_times()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| s.expect("terminal state records every start"))
                    .collect()
            })
            .collect();
        Ok(Self { starts })
    }

    fn check_shape(&self, inst: &Instance) -> Result<(), ScheduleError> {
        if self.starts.len() != inst.job_count() {
            return Err(ScheduleError::Incomplete(format!(
                "{} job rows for {} jobs",
                self.starts.len(),
                inst.job_count()
            )));
        }
        for (j, (row, job)) in self.starts.iter().zip(&inst.jobs).enumerate() {
            if row.len() != job.ops.len() {
                return Err(ScheduleError::Incomplete(format!(
                    "job {j} has {} start times for {} operations",
                    row.len(),
                    job.ops.len()
                )));
            }
        }
        Ok(())
    }

    pub fn makespan(&self, inst: &Instance) -> Result<Time, ScheduleError> {
        self.check_shape(inst)?;
        Ok(self
            .starts
            .iter()
            .zip(&inst.jobs)
            .flat_map(|(row, job)| row.iter().zip(&job.ops).map(|(s, op)| s + op.duration))
            .max()
            .unwrap_or(0))
    }

    /// Check precedence within jobs and exclusivity on machines.
    pub fn validate(&self, inst: &Instance) -> Result<ScheduleReport, ScheduleError> {
        let makespan = self.makespan(inst)?;
        let mut violations = Vec::new();

        for (j, (row, job)) in self.starts.iter().zip(&inst.jobs).enumerate() {
            for k in 1..row.len() {
                let ready = row[k - 1] + job.ops[k - 1].duration;
                if row[k] < ready {
                    violations.push(ScheduleViolation {
                        kind: ViolationKind::Precedence,
                        detail: format!(
                            "job {j} op {k} starts at {} before op {} completes at {ready}",
                            row[k],
                            k - 1
                        ),
                    });
                }
            }
        }

        // (start, end, job, op) per machine
        let mut per_machine: Vec<Vec<(Time, Time, usize, usize)>> =
            vec![Vec::new(); inst.machine_count];
        for (j, (row, job)) in self.starts.iter().zip(&inst.jobs).enumerate() {
            for (k, (&s, op)) in row.iter().zip(&job.ops).enumerate() {
                per_machine[op.machine].push((s, s + op.duration, j, k));
            }
        }
        for (m, ops) in per_machine.iter_mut().enumerate() {
            ops.sort_unstable();
            for pair in ops.windows(2) {
                let (s0, e0, j0, k0) = pair[0];
                let (s1, _, j1, k1) = pair[1];
                if s1 < e0 {
                    violations.push(ScheduleViolation {
                        kind: ViolationKind::Overlap,
                        detail: format!(
                            "machine {m}: job {j0} op {k0} [{s0}, {e0}) overlaps job {j1} op {k1} starting at {s1}"
                        ),
                    });
                }
            }
        }

        Ok(ScheduleReport {
            valid: violations.is_empty(),
            makespan,
            violations,
        })
    }

    pub fn to_json(&self, inst: &Instance) -> Result<String, ScheduleError> {
        let doc = ScheduleDoc {
            instance_name: inst.name.clone(),
            makespan: self.makespan(inst)?,
            starts: self.starts.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc).expect("schedule serializes"))
    }

    /// Parse the JSON document and check it against `inst`.
    pub fn from_json(inst: &Instance, text: &str) -> Result<Self, ScheduleError> {
        let doc: ScheduleDoc =
            serde_json::from_str(text).map_err(|e| ScheduleError::Schema(e.to_string()))?;
        if doc.starts.is_empty() {
            return Err(ScheduleError::Schema("`starts` is empty".into()));
        }
        let sched = Schedule { starts: doc.starts };
        let actual = sched
            .makespan(inst)
            .map_err(|e| ScheduleError::Schema(e.to_string()))?;
        if actual != doc.makespan {
            return Err(ScheduleError::Schema(format!(
                "makespan field {} does not match recomputed {actual}",
                doc.makespan
            )));
        }
        Ok(sched)
    }

    /// Gantt chart, one row per machine. Fails on schedules that do not validate.
    pub fn to_svg(&self, inst: &Instance) -> Result<String, ScheduleError> {
        let report = self.validate(inst)?;
        if !report.valid {
            return Err(ScheduleError::Invalid(
                report
                    .violations
                    .iter()
                    .map(|v| v.detail.as_str())
                    .collect::<Vec<_>>()
                    .join("; "),
            ));
        }
        Ok(render_gantt(inst, self, report.makespan))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    instance_name: String,
    makespan: Time,
    starts: Vec<Vec<Time>>,
}

const PALETTE: [&str; 20] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1f77b4", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#dbdb8d", "#9edae5",
];

const LABEL_WIDTH: f64 = 48.0;
const ROW_HEIGHT: f64 = 24.0;
const CHART_WIDTH: f64 = 960.0;
const AXIS_HEIGHT: f64 = 20.0;

fn render_gantt(inst: &Instance, sched: &Schedule, makespan: Time) -> String {
    let scale = CHART_WIDTH / makespan.max(1) as f64;
    let height = inst.machine_count as f64 * ROW_HEIGHT + AXIS_HEIGHT;
    let width = LABEL_WIDTH + CHART_WIDTH + 8.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="monospace" font-size="10">"#
    );
    let _ = writeln!(
        svg,
        "<title>{} makespan {makespan}</title>",
        xml_escape(&inst.name)
    );
    for m in 0..inst.machine_count {
        let y = m as f64 * ROW_HEIGHT;
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.1}">M{m}</text>"#,
            y + ROW_HEIGHT * 0.65
        );
    }
    for (j, (row, job)) in sched.starts.iter().zip(&inst.jobs).enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        for (&s, op) in row.iter().zip(&job.ops) {
            let x = LABEL_WIDTH + s as f64 * scale;
            let w = op.duration as f64 * scale;
            let y = op.machine as f64 * ROW_HEIGHT + 2.0;
            let _ = writeln!(
                svg,
                r##"<rect x="{x:.2}" y="{y:.1}" width="{w:.2}" height="{:.1}" fill="{color}" stroke="#333" stroke-width="0.5"><title>J{j} [{s}, {})</title></rect>"##,
                ROW_HEIGHT - 4.0,
                s + op.duration
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.1}">J{j}</text>"#,
                x + 2.0,
                y + ROW_HEIGHT * 0.55
            );
        }
    }
    let axis_y = inst.machine_count as f64 * ROW_HEIGHT + 14.0;
    let _ = writeln!(
        svg,
        r#"<text x="{LABEL_WIDTH:.0}" y="{axis_y:.1}">0</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{axis_y:.1}" text-anchor="end">{makespan}</text>"#,
        LABEL_WIDTH + CHART_WIDTH
    );
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
