use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, StochasticAgent};
use crate::env::{feature, Action, Observation};

/// Feature column a priority rule ranks jobs by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorityFeature {
    /// a4, remaining processing time (MWKR).
    WorkRemaining,
    /// a6, idle time since the last completed operation (FIFO).
    IdleSinceLast,
}

impl PriorityFeature {
    pub fn column(self) -> usize {
        match self {
            PriorityFeature::WorkRemaining => feature::WORK_REMAINING,
            PriorityFeature::IdleSinceLast => feature::IDLE_SINCE_LAST,
        }
    }
}

impl fmt::Display for PriorityFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorityFeature::WorkRemaining => "a4",
            PriorityFeature::IdleSinceLast => "a6",
        })
    }
}

impl FromStr for PriorityFeature {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a4" | "mwkr" => Ok(PriorityFeature::WorkRemaining),
            "a6" | "fifo" => Ok(PriorityFeature::IdleSinceLast),
            _ => Err(AgentError::UnknownAgent(s.to_string())),
        }
    }
}

fn no_job_fallback(obs: &Observation) -> Result<Action, AgentError> {
    if obs.mask.noop() {
        Ok(Action::NoOp)
    } else {
        Err(AgentError::EmptyMask)
    }
}

/// Deterministic dispatching rule: the legal job with the largest feature
/// value, lowest index on ties. Never takes No-Op while a job is legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorityRule {
    pub feature: PriorityFeature,
}

impl PriorityRule {
    pub fn fifo() -> Self {
        Self {
            feature: PriorityFeature::IdleSinceLast,
        }
    }

    pub fn mwkr() -> Self {
        Self {
            feature: PriorityFeature::WorkRemaining,
        }
    }
}

impl Agent for PriorityRule {
    fn decide(&mut self, obs: &Observation) -> Result<Action, AgentError> {
        let col = self.feature.column();
        let mut best: Option<(usize, f64)> = None;
        for j in obs.mask.legal_jobs() {
            let v = obs.features[j][col];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        match best {
            Some((j, _)) => Ok(Action::Job(j)),
            None => no_job_fallback(obs),
        }
    }

    fn name(&self) -> String {
        match self.feature {
            PriorityFeature::WorkRemaining => "mwkr".into(),
            PriorityFeature::IdleSinceLast => "fifo".into(),
        }
    }
}

/// Uniform over every legal action, No-Op included.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn decide(&mut self, obs: &Observation) -> Result<Action, AgentError> {
        let count = obs.mask.count();
        if count == 0 {
            return Err(AgentError::EmptyMask);
        }
        let pick = self.rng.gen_range(0..count);
        Ok(obs
            .mask
            .legal_actions()
            .nth(pick)
            .expect("pick is below the legal count"))
    }

    fn name(&self) -> String {
        "random".into()
    }
}

/// Softmax over `scores` with illegal entries forced to the most negative
/// finite value first. Illegal entries come out as exactly zero.
pub fn masked_softmax(scores: &[f64], mask: &[bool]) -> Result<Vec<f64>, AgentError> {
    let mut probs = Vec::with_capacity(scores.len());
    masked_softmax_into(scores, mask, &mut probs)?;
    Ok(probs)
}

fn masked_softmax_into(
    scores: &[f64],
    mask: &[bool],
    probs: &mut Vec<f64>,
) -> Result<(), AgentError> {
    if scores.len() != mask.len() {
        return Err(AgentError::LengthMismatch {
            scores: scores.len(),
            mask: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(AgentError::EmptyMask);
    }
    probs.clear();
    probs.extend(
        scores
            .iter()
            .zip(mask)
            .map(|(&s, &legal)| if legal { s } else { f64::MIN }),
    );
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        *p = (*p - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Samples jobs from `masked_softmax(feature / temperature)`. No-Op is only
/// chosen when no job is legal, like the deterministic rules.
#[derive(Debug, Clone)]
pub struct SoftmaxAgent {
    feature: PriorityFeature,
    temperature: f64,
    rng: ChaCha8Rng,
    scores: Vec<f64>,
    legal: Vec<bool>,
    probs: Vec<f64>,
}

impl SoftmaxAgent {
    pub fn new(feature: PriorityFeature, temperature: f64, seed: u64) -> Result<Self, AgentError> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(AgentError::Temperature(temperature));
        }
        Ok(Self {
            feature,
            temperature,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scores: Vec::new(),
            legal: Vec::new(),
            probs: Vec::new(),
        })
    }

    pub fn feature(&self) -> PriorityFeature {
        self.feature
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Job-action probabilities for `obs` (No-Op excluded).
    pub fn probabilities(&self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        let col = self.feature.column();
        let scores: Vec<f64> = obs.column(col).map(|v| v / self.temperature).collect();
        let legal: Vec<bool> = (0..obs.job_count()).map(|j| obs.mask.job(j)).collect();
        masked_softmax(&scores, &legal)
    }
}

impl Agent for SoftmaxAgent {
    fn decide(&mut self, obs: &Observation) -> Result<Action, AgentError> {
        let jc = obs.job_count();
        self.legal.clear();
        self.legal.extend((0..jc).map(|j| obs.mask.job(j)));
        let legal_count = self.legal.iter().filter(|&&l| l).count();
        match legal_count {
            0 => return no_job_fallback(obs),
            1 => {
                let j = self.legal.iter().position(|&l| l).expect("one legal job");
                return Ok(Action::Job(j));
            }
            _ => {}
        }
        let col = self.feature.column();
        self.scores.clear();
        self.scores
            .extend(obs.features.iter().map(|row| row[col] / self.temperature));
        masked_softmax_into(&self.scores, &self.legal, &mut self.probs)?;

        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut last_legal = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if !self.legal[j] {
                continue;
            }
            acc += p;
            last_legal = j;
            if u < acc {
                return Ok(Action::Job(j));
            }
        }
        // rounding left u above the accumulated mass
        Ok(Action::Job(last_legal))
    }

    fn name(&self) -> String {
        format!("softmax:{}:{}", self.feature, self.temperature)
    }
}

impl StochasticAgent for SoftmaxAgent {
    fn deterministic(&self) -> Box<dyn Agent> {
        Box::new(PriorityRule {
            feature: self.feature,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionMask, FEATURE_COUNT};

    fn obs_with(column: usize, values: &[f64], legal: &[bool], noop: bool) -> Observation {
        let features = values
            .iter()
            .zip(legal)
            .map(|(&v, &l)| {
                let mut row = [0.0; FEATURE_COUNT];
                row[column] = v;
                row[feature::LEGAL] = if l { 1.0 } else { 0.0 };
                row
            })
            .collect();
        let mut flags = legal.to_vec();
        flags.push(noop);
        Observation {
            features,
            mask: ActionMask { flags },
        }
    }

    #[test]
    fn fifo_picks_longest_waiting() {
        let total = 100.0;
        let obs = obs_with(
            feature::IDLE_SINCE_LAST,
            &[4.0 / total, 9.0 / total],
            &[true, true],
            false,
        );
        assert_eq!(PriorityRule::fifo().decide(&obs).unwrap(), Action::Job(1));
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let obs = obs_with(
            feature::IDLE_SINCE_LAST,
            &[0.0, 0.0, 0.0],
            &[false, true, true],
            false,
        );
        assert_eq!(PriorityRule::fifo().decide(&obs).unwrap(), Action::Job(1));
    }

    #[test]
    fn mwkr_picks_most_remaining_work() {
        let obs = obs_with(
            feature::WORK_REMAINING,
            &[10.0 / 25.0, 1.0],
            &[true, true],
            true,
        );
        assert_eq!(PriorityRule::mwkr().decide(&obs).unwrap(), Action::Job(1));
    }

    #[test]
    fn rules_fall_back_to_noop_or_fail() {
        let obs = obs_with(feature::WORK_REMAINING, &[0.3], &[false], true);
        assert_eq!(PriorityRule::mwkr().decide(&obs).unwrap(), Action::NoOp);
        let empty = obs_with(feature::WORK_REMAINING, &[0.3], &[false], false);
        assert!(matches!(
            PriorityRule::mwkr().decide(&empty),
            Err(AgentError::EmptyMask)
        ));
        assert!(matches!(
            RandomAgent::new(0).decide(&empty),
            Err(AgentError::EmptyMask)
        ));
    }

    #[test]
    fn softmax_values() {
        let p = masked_softmax(&[0.0, 0.0], &[true, false]).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1e-30);

        let p = masked_softmax(&[1.5; 4], &[true; 4]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));

        let p = masked_softmax(&[2f64.ln(), 0.0], &[true, true]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);

        assert!(matches!(
            masked_softmax(&[1.0], &[false]),
            Err(AgentError::EmptyMask)
        ));
        assert!(matches!(
            masked_softmax(&[1.0, 2.0], &[true]),
            Err(AgentError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn softmax_survives_extreme_scores() {
        let p = masked_softmax(&[1e300, -1e300, f64::MAX], &[true, true, false]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_agent_single_legal_action() {
        let obs = obs_with(feature::WORK_REMAINING, &[0.1, 0.2], &[false, true], false);
        let mut agent = RandomAgent::new(11);
        for _ in 0..20 {
            assert_eq!(agent.decide(&obs).unwrap(), Action::Job(1));
        }
    }

    #[test]
    fn random_agent_is_roughly_uniform() {
        let obs = obs_with(feature::WORK_REMAINING, &[0.1, 0.2], &[true, false], true);
        let mut agent = RandomAgent::new(5);
        let mut jobs = 0;
        for _ in 0..1000 {
            if agent.decide(&obs).unwrap() == Action::Job(0) {
                jobs += 1;
            }
        }
        // binomial(1000, 0.5): P(X < 400) is about 1e-10
        assert!(jobs >= 400 && 1000 - jobs >= 400, "{jobs}");
    }

    #[test]
    fn cold_softmax_matches_rule() {
        let obs = obs_with(feature::WORK_REMAINING, &[0.2, 0.9], &[true, true], false);
        let mut agent = SoftmaxAgent::new(PriorityFeature::WorkRemaining, 1e-6, 1).unwrap();
        for _ in 0..1000 {
            assert_eq!(agent.decide(&obs).unwrap(), Action::Job(1));
        }
        assert!(SoftmaxAgent::new(PriorityFeature::WorkRemaining, 0.0, 1).is_err());
        assert!(SoftmaxAgent::new(PriorityFeature::WorkRemaining, f64::NAN, 1).is_err());
    }

    #[test]
    fn softmax_frequencies_match_probabilities() {
        let obs = obs_with(
            feature::WORK_REMAINING,
            &[0.2, 0.9, 0.5, 0.7],
            &[true, true, false, true],
            false,
        );
        let mut agent = SoftmaxAgent::new(PriorityFeature::WorkRemaining, 0.5, 99).unwrap();
        let probs = agent.probabilities(&obs).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            match agent.decide(&obs).unwrap() {
                Action::Job(j) => counts[j] += 1,
                Action::NoOp => panic!("no-op not legal"),
            }
        }
        assert_eq!(counts[2], 0);
        for j in 0..4 {
            let expected = probs[j] * n as f64;
            let sigma = (n as f64 * probs[j] * (1.0 - probs[j])).sqrt();
            assert!(
                (counts[j] as f64 - expected).abs() <= 3.0 * sigma.max(1e-9),
                "job {j}: {} vs {expected}",
                counts[j]
            );
        }
    }

    #[test]
    fn seeded_agents_are_reproducible() {
        let obs = obs_with(
            feature::WORK_REMAINING,
            &[0.2, 0.9, 0.5],
            &[true, true, true],
            true,
        );
        let run = |seed| {
            let mut a = SoftmaxAgent::new(PriorityFeature::WorkRemaining, 1.0, seed).unwrap();
            let mut r = RandomAgent::new(seed);
            (0..50)
                .map(|_| (a.decide(&obs).unwrap(), r.decide(&obs).unwrap()))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
