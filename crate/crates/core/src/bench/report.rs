use std::collections::BTreeMap;

use serde::Serialize;

use super::bounds::{BoundsEntry, Dataset};
use super::grid::RunRecord;
use super::HarnessError;
use crate::instance::Time;

/// Bumped whenever a CSV column is added, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub markdown: String,
    pub csv: String,
    pub json: String,
    /// Instances with records but no bounds entry; their gap columns are empty.
    pub unmatched: Vec<String>,
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    row: &'static str,
    dataset: &'static str,
    instance: &'a str,
    agent: &'a str,
    seed: Option<u64>,
    wall_budget_s: Option<f64>,
    makespan: Option<String>,
    lower_bound: Option<Time>,
    upper_bound: Option<Time>,
    gap_pct: Option<String>,
    episodes: Option<usize>,
    wall_time_s: Option<String>,
    steps_per_second: Option<String>,
    valid: Option<bool>,
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct AgentCell {
    agent: String,
    best_makespan: Option<Time>,
    mean_makespan: Option<f64>,
    runs: usize,
    failed: usize,
    gap_pct: Option<f64>,
}

#[derive(Debug, Serialize)]
struct InstanceRow {
    dataset: Dataset,
    instance: String,
    lower_bound: Time,
    references: Option<BoundsEntry>,
    agents: Vec<AgentCell>,
}

#[derive(Debug, Serialize)]
struct AverageRow {
    dataset: Dataset,
    agent: String,
    instances: usize,
    mean_best_makespan: Option<f64>,
    mean_gap_pct: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ReportDoc<'a> {
    schema_version: u32,
    instances: &'a [InstanceRow],
    averages: &'a [AverageRow],
    unmatched: &'a [String],
}

fn gap(makespan: f64, upper_bound: Time) -> f64 {
    (makespan - upper_bound as f64) / upper_bound as f64 * 100.0
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// ("ta", 41) so that ta9 sorts before ta10.
fn natural_key(name: &str) -> (Dataset, String, u64, String) {
    let split = name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let number = name[split..].parse().unwrap_or(0);
    let rank = Dataset::of(name);
    (rank, name[..split].to_string(), number, name.to_string())
}

/// Build the pivot table, long-format CSV and JSON for `records`.
///
/// Only validated records contribute makespans. Output depends only on the
/// record contents, so identical inputs give identical bytes.
pub fn report(records: &[RunRecord], bounds: &[BoundsEntry]) -> Result<Report, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    let find_bounds = |name: &str| bounds.iter().find(|b| b.instance == name);

    let mut agents: Vec<&str> = Vec::new();
    for r in records {
        if !agents.contains(&r.agent.as_str()) {
            agents.push(&r.agent);
        }
    }
    let mut by_instance: BTreeMap<(Dataset, String, u64, String), Vec<&RunRecord>> =
        BTreeMap::new();
    for r in records {
        by_instance
            .entry(natural_key(&r.instance))
            .or_default()
            .push(r);
    }

    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for ((dataset, _, _, name), recs) in &by_instance {
        let refs = find_bounds(name).copied();
        if refs.is_none() {
            unmatched.push(name.clone());
        }
        let cells = agents
            .iter()
            .map(|&agent| {
                let mine: Vec<_> = recs.iter().filter(|r| r.agent == agent).collect();
                let ok: Vec<Time> = mine
                    .iter()
                    .filter(|r| r.valid)
                    .filter_map(|r| r.makespan)
                    .collect();
                let best = ok.iter().copied().min();
                AgentCell {
                    agent: agent.to_string(),
                    best_makespan: best,
                    mean_makespan: (!ok.is_empty())
                        .then(|| mean(&ok.iter().map(|&m| m as f64).collect::<Vec<_>>())),
                    runs: mine.len(),
                    failed: mine.len() - ok.len(),
                    gap_pct: best.zip(refs).map(|(b, e)| gap(b as f64, e.upper_bound)),
                }
            })
            .collect();
        rows.push(InstanceRow {
            dataset: *dataset,
            instance: name.clone(),
            lower_bound: recs[0].lower_bound,
            references: refs,
            agents: cells,
        });
    }

    let mut datasets: Vec<Dataset> = rows.iter().map(|r| r.dataset).collect();
    datasets.dedup();
    let mut averages = Vec::new();
    for &ds in &datasets {
        let group: Vec<&InstanceRow> = rows.iter().filter(|r| r.dataset == ds).collect();
        for (a, &agent) in agents.iter().enumerate() {
            let bests: Option<Vec<f64>> = group
                .iter()
                .map(|r| r.agents[a].best_makespan.map(|m| m as f64))
                .collect();
            let gaps: Option<Vec<f64>> = group.iter().map(|r| r.agents[a].gap_pct).collect();
            averages.push(AverageRow {
                dataset: ds,
                agent: agent.to_string(),
                instances: group.len(),
                mean_best_makespan: bests.map(|v| mean(&v)),
                mean_gap_pct: gaps.map(|v| mean(&v)),
            });
        }
    }

    let markdown = render_markdown(&agents, &rows, &averages);
    let csv = render_csv(records, &rows, &averages)?;
    let json = serde_json::to_string_pretty(&ReportDoc {
        schema_version: CSV_SCHEMA_VERSION,
        instances: &rows,
        averages: &averages,
        unmatched: &unmatched,
    })? + "\n";
    Ok(Report {
        markdown,
        csv,
        json,
        unmatched,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn render_markdown(agents: &[&str], rows: &[InstanceRow], averages: &[AverageRow]) -> String {
    let mut out = String::new();
    let mut header = vec!["Dataset".to_string(), "Instance".to_string()];
    header.extend(agents.iter().map(|a| a.to_string()));
    header.extend(
        [
            "FIFO (ref)",
            "MWKR (ref)",
            "Ours (ref)",
            "OR-Tools (ref)",
            "Upper bound",
            "Best gap %",
        ]
        .map(String::from),
    );
    let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
    out.push_str(&line(&header));
    out.push_str(&line(&vec!["---".to_string(); header.len()]));

    let emit_average = |out: &mut String, ds: Dataset| {
        let group: Vec<&InstanceRow> = rows.iter().filter(|r| r.dataset == ds).collect();
        let mut cells = vec![ds.as_str().to_string(), "Average".to_string()];
        cells.extend(
            averages
                .iter()
                .filter(|a| a.dataset == ds)
                .map(|a| opt(a.mean_best_makespan.map(|m| format!("{m:.1}")))),
        );
        let refs: Option<Vec<BoundsEntry>> = group.iter().map(|r| r.references).collect();
        let col = |f: fn(&BoundsEntry) -> Time| {
            opt(refs.as_ref().map(|v| {
                format!(
                    "{:.1}",
                    mean(&v.iter().map(|e| f(e) as f64).collect::<Vec<_>>())
                )
            }))
        };
        cells.push(col(|e| e.fifo_paper));
        cells.push(col(|e| e.mwkr_paper));
        cells.push(col(|e| e.ours_paper));
        cells.push(col(|e| e.ortools_paper));
        cells.push(col(|e| e.upper_bound));
        let best_gaps: Option<Vec<f64>> = group.iter().map(|r| best_gap(r)).collect();
        cells.push(opt(best_gaps.map(|g| format!("{:.2}", mean(&g)))));
        out.push_str(&line(&cells));
    };

    for (i, r) in rows.iter().enumerate() {
        let mut cells = vec![r.dataset.as_str().to_string(), r.instance.clone()];
        cells.extend(r.agents.iter().map(|c| opt(c.best_makespan)));
        let e = r.references;
        cells.push(opt(e.map(|e| e.fifo_paper)));
        cells.push(opt(e.map(|e| e.mwkr_paper)));
        cells.push(opt(e.map(|e| e.ours_paper)));
        cells.push(opt(e.map(|e| e.ortools_paper)));
        cells.push(opt(e.map(|e| e.upper_bound)));
        cells.push(opt(best_gap(r).map(|g| format!("{g:.2}"))));
        out.push_str(&line(&cells));
        let last_of_dataset = rows.get(i + 1).is_none_or(|n| n.dataset != r.dataset);
        if last_of_dataset {
            emit_average(&mut out, r.dataset);
        }
    }
    out
}

fn best_gap(row: &InstanceRow) -> Option<f64> {
    row.agents
        .iter()
        .filter_map(|c| c.gap_pct)
        .min_by(f64::total_cmp)
}

fn render_csv(
    records: &[RunRecord],
    rows: &[InstanceRow],
    averages: &[AverageRow],
) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        for r in records.iter().filter(|r| r.instance == row.instance) {
            let ub = row.references.map(|e| e.upper_bound);
            let makespan = r.makespan.filter(|_| r.valid);
            w.serialize(CsvRow {
                schema_version: CSV_SCHEMA_VERSION,
                row: "run",
                dataset: row.dataset.as_str(),
                instance: &r.instance,
                agent: &r.agent,
                seed: r.seed,
                wall_budget_s: Some(r.wall_budget),
                makespan: makespan.map(|m| m.to_string()),
                lower_bound: Some(r.lower_bound),
                upper_bound: ub,
                gap_pct: makespan
                    .zip(ub)
                    .map(|(m, ub)| format!("{:.2}", gap(m as f64, ub))),
                episodes: Some(r.episodes),
                wall_time_s: Some(format!("{:.3}", r.wall_time)),
                steps_per_second: Some(format!("{:.0}", r.engine_steps_per_second)),
                valid: Some(r.valid),
                error: r.error.as_deref(),
            })?;
        }
    }
    for a in averages {
        w.serialize(CsvRow {
            schema_version: CSV_SCHEMA_VERSION,
            row: "average",
            dataset: a.dataset.as_str(),
            instance: "Average",
            agent: &a.agent,
            seed: None,
            wall_budget_s: None,
            makespan: a.mean_best_makespan.map(|m| format!("{m:.1}")),
            lower_bound: None,
            upper_bound: None,
            gap_pct: a.mean_gap_pct.map(|g| format!("{g:.2}")),
            episodes: None,
            wall_time_s: None,
            steps_per_second: None,
            valid: None,
            error: None,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))
}

/// Header line of the CSV report, for consumers that check the schema.
pub fn csv_header() -> String {
    [
        "schema_version",
        "row",
        "dataset",
        "instance",
        "agent",
        "seed",
        "wall_budget_s",
        "makespan",
        "lower_bound",
        "upper_bound",
        "gap_pct",
        "episodes",
        "wall_time_s",
        "steps_per_second",
        "valid",
        "error",
    ]
    .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::bounds::embedded_bounds;

    fn rec(instance: &str, agent: &str, seed: Option<u64>, makespan: Time) -> RunRecord {
        RunRecord {
            instance: instance.into(),
            agent: agent.into(),
            seed,
            wall_budget: 1.0,
            makespan: Some(makespan),
            lower_bound: 1,
            episodes: 1,
            wall_time: 0.5,
            engine_steps_per_second: 1000.0,
            valid: true,
            error: None,
        }
    }

    #[test]
    fn empty_records_rejected() {
        assert!(matches!(
            report(&[], embedded_bounds()),
            Err(HarnessError::NoRecords)
        ));
    }

    #[test]
    fn single_unknown_record() {
        let r = report(&[rec("one", "fifo", None, 5)], embedded_bounds()).unwrap();
        assert_eq!(r.unmatched, vec!["one".to_string()]);
        assert!(r
            .markdown
            .contains("| Other | one | 5 | - | - | - | - | - | - |"));
        assert!(r.csv.starts_with(&csv_header()));
        assert_eq!(r.csv.lines().count(), 3);
    }

    #[test]
    fn gap_against_bound() {
        let r = report(&[rec("ta41", "mwkr", None, 2406)], embedded_bounds()).unwrap();
        assert!(r.unmatched.is_empty());
        // (2406 - 2005) / 2005 = 20%
        assert!(r.markdown.contains("| 2005 | 20.00 |"), "{}", r.markdown);
        assert!(r.csv.contains(",2406,1,2005,20.00,"));
    }

    #[test]
    fn averages_and_ordering() {
        let mut records = Vec::new();
        for (i, name) in ["ta50", "ta41", "ta9"].iter().enumerate() {
            records.push(rec(name, "mwkr", None, 2000 + 100 * i as Time));
            records.push(rec(name, "softmax:a4:0.1", Some(0), 3000));
            records.push(rec(name, "softmax:a4:0.1", Some(1), 2900));
        }
        let r = report(&records, embedded_bounds()).unwrap();
        let body: Vec<&str> = r.markdown.lines().skip(2).collect();
        assert!(body[0].contains("| ta9 |"));
        assert!(body[1].contains("| ta41 |"));
        assert!(body[2].contains("| ta50 |"));
        assert!(
            body[3].starts_with("| Taillard | Average | 2100.0 | 2900.0 |"),
            "{}",
            body[3]
        );
        assert_eq!(r.unmatched, vec!["ta9".to_string()]);
        // ta9 has no reference row, so the dataset reference averages are blank
        assert!(body[3].ends_with("| - | - | - | - | - | - |"));
    }

    #[test]
    fn failed_records_do_not_contribute() {
        let mut bad = rec("ta41", "fifo", None, 10);
        bad.valid = false;
        bad.error = Some("overlap, on machine 3".into());
        let r = report(&[bad], embedded_bounds()).unwrap();
        assert!(r.markdown.contains("| Taillard | ta41 | - |"));
        assert!(r.csv.contains("\"overlap, on machine 3\""));
    }

    #[test]
    fn byte_deterministic() {
        let records = vec![
            rec("ta42", "fifo", None, 2600),
            rec("dmu16", "fifo", None, 4900),
        ];
        let a = report(&records, embedded_bounds()).unwrap();
        let b = report(&records, embedded_bounds()).unwrap();
        assert_eq!(a, b);
        assert!(a.markdown.find("ta42").unwrap() < a.markdown.find("dmu16").unwrap());
    }
}
