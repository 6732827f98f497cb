use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jss_core::agents::{
    action_sequence, best_of_search, best_of_search_parallel, brute_force_optimal, env_tree_best,
    sample_search, OracleLimits, RandomAgent,
};
use jss_core::bench::{self, embedded_bounds, GridOptions, RunRecord};
use jss_core::{
    load_instance, rollout, trace, AgentSpec, EnvState, Instance, ParseOptions, Schedule,
    SearchOptions, SoftmaxAgent,
};

/// Worker count for `bench run` and `search` when `--workers` is not given.
const WORKERS_ENV: &str = "JSS_WORKERS";

#[derive(Parser)]
#[command(
    name = "jss",
    version,
    about = "Job-shop scheduling environment, dispatchers and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print instance statistics and validation report as JSON.
    Inspect {
        file: PathBuf,
        #[arg(long)]
        one_based: bool,
    },
    /// Write a random instance in the standard text format.
    Generate {
        #[arg(long)]
        jobs: usize,
        #[arg(long)]
        machines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        min_duration: u64,
        #[arg(long, default_value_t = 99)]
        max_duration: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run one episode with an agent.
    Rollout {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, default_value = "mwkr")]
        agent: AgentSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Schedule JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trajectory JSON-lines output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Best-of sampling search under a wall-clock budget.
    Search {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, default_value = "softmax:a4:0.05")]
        agent: AgentSpec,
        /// Seconds.
        #[arg(long, default_value_t = 600.0)]
        budget: f64,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact optimum of a tiny instance, both by branch-and-bound and over the env's action tree.
    Oracle {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, default_value_t = 12)]
        max_ops: usize,
    },
    /// Check a schedule against an instance.
    Validate {
        #[command(flatten)]
        input: InstanceArg,
        schedule: PathBuf,
    },
    /// Render a schedule as an SVG Gantt chart.
    Gantt {
        #[command(flatten)]
        input: InstanceArg,
        schedule: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct InstanceArg {
    instance: PathBuf,
    #[arg(long)]
    one_based: bool,
}

impl InstanceArg {
    fn load(&self) -> Result<Instance> {
        load(&self.instance, self.one_based)
    }
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run an agent x instance grid and write records, schedules and reports.
    Run {
        #[arg(long)]
        instances: PathBuf,
        /// Comma-separated agent specs; may be empty.
        #[arg(long, default_value = "fifo,mwkr")]
        agents: String,
        /// Seconds per stochastic (instance, agent, seed) cell.
        #[arg(long, default_value_t = 600.0)]
        budget: f64,
        /// `a..b` (exclusive), `a..=b` or a comma list.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild reports from a results directory.
    Report {
        dir: PathBuf,
        /// `builtin` or `none`.
        #[arg(long, default_value = "builtin")]
        bounds: String,
    },
}

fn load(path: &Path, one_based: bool) -> Result<Instance> {
    load_instance(path, ParseOptions { one_based })
        .with_context(|| format!("loading {}", path.display()))
}

fn load_schedule(inst: &Instance, path: &Path) -> Result<Schedule> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Schedule::from_json(inst, &text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|w| w.max(1))
            .with_context(|| format!("{WORKERS_ENV}={v} is not a number")),
        Err(_) => Ok(1),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
        if a >= b {
            bail!("empty seed range {s}");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().with_context(|| format!("bad seed `{p}`")))
        .collect()
}

fn budget(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).with_context(|| format!("bad budget {secs}"))
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Inspect { file, one_based } => {
            let text =
                fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let name = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("instance");
            // syntax errors carry a line number; semantic ones come back as a full report
            let inst =
                jss_core::instance::parse_instance_with(&text, name, ParseOptions { one_based });
            let inst = match inst {
                Ok(inst) => inst,
                Err(jss_core::InstanceError::Invalid(report)) => {
                    println!(
                        "{}",
                        serde_json::json!({ "instance": name, "valid": false, "violations": report.violations })
                    );
                    return Ok(ExitCode::FAILURE);
                }
                Err(e) => return Err(e).with_context(|| format!("parsing {}", file.display())),
            };
            let doc = serde_json::json!({
                "instance": inst.name,
                "jobs": inst.job_count(),
                "machines": inst.machine_count,
                "valid": true,
                "violations": inst.validate().violations,
                "stats": inst.stats(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Generate {
            jobs,
            machines,
            seed,
            min_duration,
            max_duration,
            out,
        } => {
            let inst =
                Instance::generate_random(jobs, machines, (min_duration, max_duration), seed)?;
            match out {
                Some(path) => write(&path, inst.to_text())?,
                None => print!("{}", inst.to_text()),
            }
        }
        Command::Rollout {
            input,
            agent,
            seed,
            out,
            trace: trace_path,
        } => {
            let inst = input.load()?;
            let result = rollout(&inst, agent.build(seed)?.as_mut())?;
            println!(
                "{} {} makespan {} steps {} return {}",
                inst.name, agent, result.makespan, result.steps, result.raw_return
            );
            if let Some(path) = out {
                write(&path, result.schedule.to_json(&inst)?)?;
            }
            if let Some(path) = trace_path {
                let actions = action_sequence(&inst, agent.build(seed)?.as_mut())?;
                let records = trace::record(&mut EnvState::reset(&inst)?, &actions)?;
                write(&path, trace::to_jsonl(&records))?;
            }
        }
        Command::Search {
            input,
            agent,
            budget: secs,
            episodes,
            seed,
            workers: w,
            out,
        } => {
            let inst = input.load()?;
            let opts = SearchOptions {
                budget: budget(secs)?,
                max_episodes: episodes,
                ..SearchOptions::with_budget(Duration::ZERO)
            };
            let w = workers(w)?;
            let result = match agent {
                AgentSpec::Softmax {
                    feature,
                    temperature,
                } if w > 1 => best_of_search_parallel(
                    &inst,
                    |i| SoftmaxAgent::new(feature, temperature, seed.wrapping_add(i as u64)),
                    &opts,
                    w,
                )?,
                AgentSpec::Softmax {
                    feature,
                    temperature,
                } => best_of_search(
                    &inst,
                    &mut SoftmaxAgent::new(feature, temperature, seed)?,
                    &opts,
                )?,
                AgentSpec::Random => sample_search(&inst, &mut RandomAgent::new(seed), &opts)?,
                AgentSpec::Fifo | AgentSpec::Mwkr => sample_search(
                    &inst,
                    agent.build(seed)?.as_mut(),
                    &SearchOptions::with_episodes(1),
                )?,
            };
            println!(
                "{} {} best {} episodes {} wall {:.2}s steps/s {:.0}",
                inst.name,
                agent,
                result.best_makespan,
                result.episodes,
                result.wall_time,
                result.steps_per_second()
            );
            if let Some(path) = out {
                write(&path, result.best_schedule.to_json(&inst)?)?;
            }
        }
        Command::Oracle { input, max_ops } => {
            let inst = input.load()?;
            let limits = OracleLimits {
                max_ops,
                ..OracleLimits::default()
            };
            let optimal = brute_force_optimal(&inst, &limits)?;
            let env_best = env_tree_best(&inst, &limits)?;
            println!(
                "{}",
                serde_json::json!({ "instance": inst.name, "optimal": optimal, "env_best": env_best })
            );
        }
        Command::Validate { input, schedule } => {
            let inst = input.load()?;
            let report = load_schedule(&inst, &schedule)?.validate(&inst)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.valid {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Gantt {
            input,
            schedule,
            out,
        } => {
            let inst = input.load()?;
            write(&out, load_schedule(&inst, &schedule)?.to_svg(&inst)?)?;
        }
        Command::Bench(cmd) => return run_bench(cmd),
    }
    Ok(ExitCode::SUCCESS)
}

fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_none_or(|e| e == "txt") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no instance files in {}", dir.display());
    }
    Ok(files)
}

fn write_reports(dir: &Path, records: &[RunRecord], bounds: &str) -> Result<()> {
    let table = match bounds {
        "builtin" => embedded_bounds(),
        "none" => &[],
        other => bail!("unknown bounds source `{other}` (expected builtin or none)"),
    };
    let report = bench::report(records, table)?;
    write(&dir.join("report.md"), &report.markdown)?;
    write(&dir.join("report.csv"), &report.csv)?;
    write(&dir.join("report.json"), &report.json)?;
    for name in &report.unmatched {
        eprintln!("note: no bounds entry for {name}; gap left empty");
    }
    print!("{}", report.markdown);
    Ok(())
}

fn run_bench(cmd: BenchCommand) -> Result<ExitCode> {
    match cmd {
        BenchCommand::Run {
            instances,
            agents,
            budget: secs,
            seeds,
            workers: w,
            out,
        } => {
            let instances = instance_files(&instances)?
                .iter()
                .map(|p| load(p, false))
                .collect::<Result<Vec<_>>>()?;
            let opts = GridOptions {
                budget: budget(secs)?,
                seeds: parse_seeds(&seeds)?,
                workers: workers(w)?,
                ..GridOptions::default()
            };
            let agents = agents
                .split(',')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(str::parse)
                .collect::<Result<Vec<AgentSpec>, _>>()?;
            let cells = bench::run_grid(&instances, &agents, &opts)?;
            let schedules = out.join("schedules");
            fs::create_dir_all(&schedules)
                .with_context(|| format!("creating {}", schedules.display()))?;
            for (cell, inst) in cells.iter().filter_map(|c| {
                let inst = instances.iter().find(|i| i.name == c.record.instance)?;
                Some((c, inst))
            }) {
                if let Some(s) = &cell.schedule {
                    let tag = match cell.record.seed {
                        Some(seed) => format!("s{seed}"),
                        None => "det".to_string(),
                    };
                    let agent = cell.record.agent.replace(':', "_");
                    write(
                        &schedules.join(format!("{}__{agent}__{tag}.json", inst.name)),
                        s.to_json(inst)?,
                    )?;
                }
            }
            let records: Vec<RunRecord> = cells.into_iter().map(|c| c.record).collect();
            let mut buf = Vec::new();
            bench::write_records(&mut buf, &records)?;
            write(&out.join("records.jsonl"), buf)?;
            let failed: Vec<_> = records.iter().filter(|r| !r.valid).collect();
            if !records.is_empty() {
                write_reports(&out, &records, "builtin")?;
            }
            for r in &failed {
                eprintln!(
                    "error: {} {} seed {:?}: {}",
                    r.instance,
                    r.agent,
                    r.seed,
                    r.error.as_deref().unwrap_or("invalid schedule")
                );
            }
            Ok(if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        BenchCommand::Report { dir, bounds } => {
            let path = dir.join("records.jsonl");
            let file =
                fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let records = bench::read_records(std::io::BufReader::new(file))?;
            write_reports(&dir, &records, &bounds)?;
            Ok(if records.iter().all(|r| r.valid) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
