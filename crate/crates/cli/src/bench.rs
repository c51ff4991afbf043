//! The benchmark runner: evaluates (instance x rule x filter) cells on a
//! worker pool and reports makespans, optimality gaps and wall times.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use jobshop::dispatching::ReadyFilter;
use jobshop::formats;
use jobshop::instance::Instance;
use jobshop::rules;

pub struct Cell {
    pub instance: String,
    pub size: (usize, usize),
    pub rule: String,
    pub filter: String,
    pub makespan: f64,
    pub reference: Option<u32>,
    pub gap: Option<f64>,
    pub seconds: f64,
}

/// Reference value for the optimality gap: the known optimum if present,
/// otherwise the best known upper bound.
pub fn reference_makespan(instance: &Instance) -> Option<u32> {
    for key in ["optimum", "upper_bound"] {
        if let Some(v) = instance.metadata().get(key) {
            if let Some(n) = v.as_u64() {
                return Some(n as u32);
            }
        }
    }
    None
}

pub fn select_suite(suite: &str) -> Vec<String> {
    let names = formats::list_benchmarks();
    if suite == "all" {
        return names;
    }
    let selectors: Vec<&str> = suite.split(',').map(str::trim).collect();
    names
        .into_iter()
        .filter(|n| selectors.iter().any(|s| n == s || n.starts_with(s)))
        .collect()
}

/// Runs one cell; the random rule averages over the given seeds.
fn run_cell(
    instance: &Arc<Instance>,
    rule: &str,
    filter: &ReadyFilter,
    seeds: &[u64],
) -> (f64, f64) {
    // rule errors surface as panics and are caught per cell by the runner

    let started = Instant::now();
    let makespan = if rule == "random" {
        let total: u64 = seeds
            .iter()
            .map(|&seed| {
                rules::solve(Arc::clone(instance), rule, filter.clone(), seed)
                    .expect("rule solve")
                    .makespan() as u64
            })
            .sum();
        total as f64 / seeds.len() as f64
    } else {
        rules::solve(Arc::clone(instance), rule, filter.clone(), 0)
            .expect("rule solve")
            .makespan() as f64
    };
    (makespan, started.elapsed().as_secs_f64())
}

pub fn run_cells(
    instances: &[Arc<Instance>],
    rules_list: &[String],
    filters_list: &[String],
    seeds: &[u64],
) -> Result<Vec<Cell>, String> {
    let mut jobs = Vec::new();
    for instance in instances {
        for rule in rules_list {
            for filter_name in filters_list {
                jobs.push((Arc::clone(instance), rule.clone(), filter_name.clone()));
            }
        }
    }
    let cells: Vec<Cell> = jobs
        .par_iter()
        .filter_map(|(instance, rule, filter_name)| {
            let filter = ReadyFilter::parse(filter_name).expect("validated filter name");
            match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                run_cell(instance, rule, &filter, seeds)
            })) {
                Ok((makespan, seconds)) => {
                    let reference = reference_makespan(instance);
                    let gap = reference.map(|r| (makespan - f64::from(r)) / f64::from(r));
                    Some(Cell {
                        instance: instance.name().to_string(),
                        size: (instance.num_jobs(), instance.num_machines()),
                        rule: rule.clone(),
                        filter: filter_name.clone(),
                        makespan,
                        reference,
                        gap,
                        seconds,
                    })
                }
                Err(_) => {
                    // record the failure and keep going with other cells
                    eprintln!("warning: {}/{rule}/{filter_name} failed; skipped", instance.name());
                    None
                }
            }
        })
        .collect();
    Ok(cells)
}

fn format_makespan(m: f64) -> String {
    if (m - m.round()).abs() < 1e-9 {
        format!("{}", m.round() as u64)
    } else {
        format!("{m:.1}")
    }
}

pub fn write_csv(cells: &[Cell], path: &Path) -> Result<(), String> {
    let mut out = String::from("instance,rule,filter,makespan,optimum,gap,seconds\n");
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3}\n",
            cell.instance,
            cell.rule,
            cell.filter,
            format_makespan(cell.makespan),
            cell.reference.map(|r| r.to_string()).unwrap_or_default(),
            cell.gap.map(|g| format!("{g:.4}")).unwrap_or_default(),
            cell.seconds,
        ));
    }
    std::fs::write(path, out).map_err(|e| e.to_string())
}

pub fn run(
    suite: &str,
    rules_arg: &str,
    filters_arg: &str,
    seeds_arg: &str,
    csv: Option<&Path>,
    gap_summary: bool,
) -> Result<(), String> {
    let names = select_suite(suite);
    if names.is_empty() {
        return Err(format!("suite '{suite}' selects no instances"));
    }
    let rules_list: Vec<String> = rules_arg.split(',').map(|s| s.trim().to_string()).collect();
    let filters_list: Vec<String> = filters_arg
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    for f in &filters_list {
        if ReadyFilter::parse(f).is_err() {
            eprintln!("error: unknown filter '{f}'");
            std::process::exit(2);
        }
    }
    for r in &rules_list {
        if r != "random" && rules::rule_by_name(r, 0).is_err() {
            eprintln!("error: unknown rule '{r}'");
            std::process::exit(2);
        }
    }
    let seeds: Vec<u64> = seeds_arg
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad seed '{s}'")))
        .collect::<Result<_, String>>()?;
    let instances: Vec<Arc<Instance>> = names
        .iter()
        .map(|n| formats::load_benchmark(n).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let mut cells = run_cells(&instances, &rules_list, &filters_list, &seeds)?;
    cells.sort_by(|a, b| {
        (&a.instance, &a.rule, &a.filter).cmp(&(&b.instance, &b.rule, &b.filter))
    });
    if let Some(path) = csv {
        write_csv(&cells, path)?;
        println!("wrote {}", path.display());
    } else {
        for cell in &cells {
            println!(
                "{} {} {} {}",
                cell.instance,
                cell.rule,
                cell.filter,
                format_makespan(cell.makespan)
            );
        }
    }
    if gap_summary {
        print_gap_summary(&cells);
    }
    Ok(())
}

/// Mean optimality gap per (size, rule, filter); sizes ordered by job then
/// machine count.
pub fn print_gap_summary(cells: &[Cell]) {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize, String, String), (f64, usize)> = BTreeMap::new();
    for cell in cells {
        if let Some(gap) = cell.gap {
            let key = (
                cell.size.0,
                cell.size.1,
                cell.rule.clone(),
                cell.filter.clone(),
            );
            let entry = groups.entry(key).or_insert((0.0, 0));
            entry.0 += gap;
            entry.1 += 1;
        }
    }
    for ((jobs, machines, rule, filter), (sum, count)) in groups {
        println!(
            "gap {}x{} {} {} {:.4}",
            jobs,
            machines,
            rule,
            filter,
            sum / count as f64
        );
    }
}
