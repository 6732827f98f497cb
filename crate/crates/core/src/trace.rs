//! JSON-lines trajectory dumps: one record per transition.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvError, EnvState};
use crate::instance::Time;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    /// Action index; `job_count` is No-Op.
    pub action: usize,
    /// Unscaled reward of the transition.
    pub reward: i64,
    /// Clock after the transition.
    pub clock: Time,
    pub done: bool,
    /// Mask after the transition, as `0`/`1` characters.
    pub mask: String,
}

/// Replay `actions` from a fresh reset of `state`'s instance and record every step.
pub fn record(state: &mut EnvState, actions: &[Action]) -> Result<Vec<TraceRecord>, EnvError> {
    state.restart();
    let jc = state.instance().job_count();
    let mut out = Vec::with_capacity(actions.len());
    for (step, &action) in actions.iter().enumerate() {
        let t = state.apply(action)?;
        out.push(TraceRecord {
            step,
            action: action.index(jc),
            reward: t.raw_reward,
            clock: state.clock(),
            done: t.done,
            mask: state.mask().to_string(),
        });
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[TraceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
