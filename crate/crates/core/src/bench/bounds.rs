//! Literature reference values for the 30x20 Taillard and Demirkol instances.

use serde::{Deserialize, Serialize};

use crate::instance::Time;
use Dataset::{Demirkol as D, Taillard as T};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    Taillard,
    Demirkol,
    Other,
}

impl Dataset {
    pub fn of(instance: &str) -> Self {
        if instance.starts_with("dmu") {
            Dataset::Demirkol
        } else if instance.starts_with("ta") {
            Dataset::Taillard
        } else {
            Dataset::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Taillard => "Taillard",
            Dataset::Demirkol => "Demirkol",
            Dataset::Other => "Other",
        }
    }
}

/// One row of the reference table. Every column is a makespan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundsEntry {
    pub instance: &'static str,
    pub dataset: Dataset,
    /// Best known solution.
    pub upper_bound: Time,
    /// Learned PPO dispatcher, 10 minutes per instance.
    pub ours_paper: Time,
    pub fifo_paper: Time,
    pub mwkr_paper: Time,
    /// Graph-network dispatcher trained on random instances.
    pub gnn_paper: Time,
    /// Dueling double DQN selecting among dispatching rules.
    pub ddqn_paper: Option<Time>,
    pub ortools_paper: Time,
}

impl BoundsEntry {
    pub fn references(&self) -> impl Iterator<Item = Time> {
        [
            Some(self.ours_paper),
            Some(self.fifo_paper),
            Some(self.mwkr_paper),
            Some(self.gnn_paper),
            self.ddqn_paper,
            Some(self.ortools_paper),
        ]
        .into_iter()
        .flatten()
    }
}

const fn row(
    instance: &'static str,
    dataset: Dataset,
    v: [Time; 4],
    ddqn: Option<Time>,
    ortools: Time,
    upper_bound: Time,
) -> BoundsEntry {
    BoundsEntry {
        instance,
        dataset,
        upper_bound,
        ours_paper: v[0],
        fifo_paper: v[1],
        mwkr_paper: v[2],
        gnn_paper: v[3],
        ddqn_paper: ddqn,
        ortools_paper: ortools,
    }
}

// ours, fifo, mwkr, gnn | ddqn | or-tools | upper bound
static BOUNDS: [BoundsEntry; 15] = [
    row("ta41", T, [2208, 2543, 2632, 2667], Some(2450), 2144, 2005),
    row("ta42", T, [2168, 2578, 2401, 2664], Some(2351), 2071, 1937),
    row("ta43", T, [2086, 2506, 2385, 2431], None, 1967, 1846),
    row("ta44", T, [2261, 2555, 2532, 2714], None, 2094, 1979),
    row("ta45", T, [2227, 2565, 2431, 2637], None, 2032, 2000),
    row("ta46", T, [2349, 2617, 2485, 2776], None, 2129, 2004),
    row("ta47", T, [2101, 2508, 2301, 2476], None, 1952, 1889),
    row("ta48", T, [2267, 2541, 2350, 2490], None, 2091, 1941),
    row("ta49", T, [2154, 2550, 2474, 2556], None, 2089, 1961),
    row("ta50", T, [2216, 2531, 2496, 2628], None, 2010, 1923),
    row("dmu16", D, [4188, 4934, 4550, 4953], Some(4414), 3903, 3751),
    row("dmu17", D, [4274, 5014, 4874, 5379], None, 3960, 3814),
    row("dmu18", D, [4326, 4936, 4792, 5100], None, 4073, 3844),
    row("dmu19", D, [4195, 4902, 4842, 4889], None, 3922, 3764),
    row("dmu20", D, [4074, 4539, 4500, 4859], None, 3913, 3703),
];

/// Dataset averages as published alongside the per-instance rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedAverages {
    pub dataset: Dataset,
    pub ours: Time,
    pub fifo: Time,
    pub mwkr: Time,
    pub gnn: Time,
    pub ortools: Time,
    pub upper_bound: Time,
}

static AVERAGES: [PublishedAverages; 2] = [
    PublishedAverages {
        dataset: T,
        ours: 2203,
        fifo: 2549,
        mwkr: 2449,
        gnn: 2604,
        ortools: 2058,
        upper_bound: 1948,
    },
    PublishedAverages {
        dataset: D,
        ours: 4211,
        fifo: 4865,
        mwkr: 4712,
        gnn: 5036,
        ortools: 3954,
        upper_bound: 3775,
    },
];

pub fn embedded_bounds() -> &'static [BoundsEntry] {
    &BOUNDS
}

pub fn lookup(instance: &str) -> Option<&'static BoundsEntry> {
    BOUNDS.iter().find(|b| b.instance == instance)
}

pub fn published_averages(dataset: Dataset) -> Option<&'static PublishedAverages> {
    AVERAGES.iter().find(|a| a.dataset == dataset)
}
