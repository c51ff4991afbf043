//! Command-line surface: solving, benchmarking, generation, exact search,
//! dataset export, Gantt rendering and validation.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use jobshop::dispatching::{compose_filters, ReadyFilter};
use jobshop::exact::{export_dataset, solve_exact};
use jobshop::formats;
use jobshop::generation::{GeneratorConfig, InstanceGenerator};
use jobshop::instance::Instance;
use jobshop::rules;
use jobshop::schedule::Schedule;

mod bench;
mod gantt;

#[derive(Parser)]
#[command(name = "jobshop", version, about = "Job-shop scheduling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Taillard,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance with a dispatching rule; prints the makespan last.
    Solve {
        /// Instance file to solve.
        #[arg(long, conflicts_with = "benchmark")]
        input: Option<PathBuf>,
        /// Vendored benchmark instance name (e.g. ft06).
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Taillard)]
        format: Format,
        /// Treat machine ids in Taillard input as 1-based.
        #[arg(long)]
        one_based: bool,
        #[arg(long, default_value = "spt")]
        rule: String,
        /// Ready-operations filter; repeat to compose left-to-right.
        #[arg(long = "filter", default_values_t = vec!["nio".to_string()])]
        filters: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the schedule as JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run rules x filters over benchmark suites and emit a CSV report.
    Bench {
        /// Suite selector: "all", a family prefix (ta, la, ...) or a
        /// comma-separated list of names/prefixes.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value = "spt,fcfs,mwkr,mor,random")]
        rules: String,
        #[arg(long, default_value = "nio")]
        filters: String,
        /// Seeds for the random rule (its cell value is their average).
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also print per-size mean optimality gaps per rule.
        #[arg(long)]
        gap_summary: bool,
    },
    /// Exact branch-and-bound makespan minimization.
    Exact {
        #[arg(long, conflicts_with = "benchmark")]
        input: Option<PathBuf>,
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Taillard)]
        format: Format,
        #[arg(long)]
        one_based: bool,
        /// Time limit in seconds.
        #[arg(long, default_value_t = 60)]
        time_limit: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate random instances.
    Gen {
        /// Jobs: a single number or an inclusive lo:hi range.
        #[arg(long, default_value = "10")]
        jobs: String,
        /// Machines: a single number or an inclusive lo:hi range.
        #[arg(long, default_value = "10")]
        machines: String,
        /// Durations: inclusive lo:hi range.
        #[arg(long, default_value = "1:99")]
        durations: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        recirculation: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Output directory (files named after the instances).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Export an imitation-learning dataset from solved schedule files.
    ExportDataset {
        /// Schedule JSON files (each carries its instance), replayed in
        /// the given order.
        #[arg(long, required = true, num_args = 1..)]
        instances: Vec<PathBuf>,
        /// Sampling period n: a step k is sampled when (k + C) mod n == 0.
        #[arg(long, default_value_t = 31)]
        sample_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a schedule JSON as an SVG Gantt chart.
    Gantt {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Verify a schedule against its instance.
    Validate {
        /// Schedule JSON (carries its instance unless --instance overrides).
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Taillard)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_instance(
    input: &Option<PathBuf>,
    benchmark: &Option<String>,
    format: Format,
    one_based: bool,
) -> Result<Arc<Instance>, String> {
    match (input, benchmark) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "instance".into());
            match format {
                Format::Taillard => formats::parse_taillard_named(&text, &name, one_based)
                    .map(Instance::into_arc)
                    .map_err(|e| e.to_string()),
                Format::Json => formats::parse_json_instance(&text)
                    .map(Instance::into_arc)
                    .map_err(|e| e.to_string()),
            }
        }
        (None, Some(name)) => formats::load_benchmark(name).map_err(|e| e.to_string()),
        _ => Err("exactly one of --input or --benchmark is required".into()),
    }
}

fn parse_filters(names: &[String]) -> Result<ReadyFilter, String> {
    let parts = names
        .iter()
        .map(|n| ReadyFilter::parse(n).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        compose_filters(parts)
    })
}

fn parse_range(text: &str) -> Result<(usize, usize), String> {
    if let Some((lo, hi)) = text.split_once(':') {
        Ok((
            lo.parse().map_err(|_| format!("bad range '{text}'"))?,
            hi.parse().map_err(|_| format!("bad range '{text}'"))?,
        ))
    } else {
        let v: usize = text.parse().map_err(|_| format!("bad number '{text}'"))?;
        Ok((v, v))
    }
}

fn write_schedule(schedule: &Schedule, path: &PathBuf) -> Result<(), String> {
    let text = formats::write_json_schedule(schedule).map_err(|e| e.to_string())?;
    std::fs::write(path, text).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Solve {
            input,
            benchmark,
            format,
            one_based,
            rule,
            filters,
            seed,
            output,
        } => {
            let instance = load_instance(&input, &benchmark, format, one_based)?;
            let filter = parse_filters(&filters)?;
            let schedule =
                rules::solve(instance, &rule, filter, seed).map_err(|e| match e {
                    jobshop::RuleError::UnknownRule(_) | jobshop::RuleError::UnknownFilter(_) => {
                        // usage errors exit with code 2 via clap conventions
                        std::process::exit(2);
                    }
                    other => other.to_string(),
                })?;
            if let Some(path) = &output {
                write_schedule(&schedule, path)?;
            }
            println!("{}", schedule.makespan());
            Ok(())
        }
        Command::Bench {
            suite,
            rules,
            filters,
            seeds,
            csv,
            gap_summary,
        } => bench::run(&suite, &rules, &filters, &seeds, csv.as_deref(), gap_summary),
        Command::Exact {
            input,
            benchmark,
            format,
            one_based,
            time_limit,
            output,
        } => {
            let instance = load_instance(&input, &benchmark, format, one_based)?;
            let result = solve_exact(&instance, Duration::from_secs(time_limit));
            if let Some(path) = &output {
                write_schedule(&result.schedule, path)?;
            }
            println!(
                "makespan {} ({})",
                result.schedule.makespan(),
                if result.proven_optimal {
                    "proven optimal"
                } else {
                    "incumbent, not proven"
                }
            );
            Ok(())
        }
        Command::Gen {
            jobs,
            machines,
            durations,
            count,
            seed,
            recirculation,
            format,
            out_dir,
        } => {
            let (jlo, jhi) = parse_range(&jobs)?;
            let (mlo, mhi) = parse_range(&machines)?;
            let (dlo, dhi) = parse_range(&durations)?;
            let config = GeneratorConfig {
                num_jobs_range: (jlo, jhi),
                num_machines_range: (mlo, mhi),
                duration_range: (dlo as u32, dhi as u32),
                allow_recirculation: recirculation,
                seed,
                iteration_limit: Some(count),
                ..GeneratorConfig::default()
            };
            let generator = InstanceGenerator::new(config).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            for instance in generator {
                let (text, ext) = match format {
                    Format::Taillard => (formats::write_taillard(&instance), "taillard"),
                    Format::Json => (
                        formats::write_json_instance(&instance).map_err(|e| e.to_string())?,
                        "json",
                    ),
                };
                let path = out_dir.join(format!("{}.{ext}", instance.name()));
                std::fs::write(&path, text).map_err(|e| e.to_string())?;
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::ExportDataset {
            instances,
            sample_every,
            out,
        } => {
            let mut schedules = Vec::new();
            for path in &instances {
                let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
                schedules.push(formats::parse_json_schedule(&text).map_err(|e| e.to_string())?);
            }
            let manifest =
                export_dataset(&schedules, sample_every, &out).map_err(|e| e.to_string())?;
            println!(
                "exported {} records from {} replays into {}",
                manifest.emitted,
                manifest.instances.len(),
                out.display()
            );
            Ok(())
        }
        Command::Gantt { schedule, svg } => {
            let text = std::fs::read_to_string(&schedule).map_err(|e| e.to_string())?;
            let schedule = formats::parse_json_schedule(&text).map_err(|e| e.to_string())?;
            let rendered = gantt::render_svg(&schedule);
            std::fs::write(&svg, rendered).map_err(|e| e.to_string())?;
            println!("wrote {}", svg.display());
            Ok(())
        }
        Command::Validate {
            schedule,
            instance,
            format,
        } => {
            let text = std::fs::read_to_string(&schedule).map_err(|e| e.to_string())?;
            let schedule = if let Some(instance_path) = instance {
                let inst =
                    load_instance(&Some(instance_path), &None, format, false)?;
                // re-anchor the stored job sequences onto the given instance
                let doc_text = text.clone();
                let doc: serde_json::Value =
                    serde_json::from_str(&doc_text).map_err(|e| e.to_string())?;
                let y: Vec<Vec<usize>> =
                    serde_json::from_value(doc["job_sequences"].clone())
                        .map_err(|e| e.to_string())?;
                Schedule::from_job_sequences(inst, &y).map_err(|e| e.to_string())?
            } else {
                formats::parse_json_schedule(&text).map_err(|e| e.to_string())?
            };
            let report = schedule.verify();
            println!("valid: {}", report.valid);
            println!("complete: {}", report.complete);
            println!("semi_active: {}", report.semi_active);
            println!("non_delay: {}", report.non_delay);
            for v in &report.violations {
                println!("violation: {v}");
            }
            if report.valid {
                println!("makespan: {}", schedule.makespan());
            }
            Ok(())
        }
    }
}
