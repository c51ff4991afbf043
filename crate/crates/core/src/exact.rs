//! Desk-scale exact makespan minimization, optimal-action labeling, and the
//! imitation-learning dataset exporter.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;

use crate::dispatching::{Dispatcher, ReadyFilter};
use crate::env::{record_bytes, SingleEnv, SingleEnvConfig};
use crate::error::ExactError;
use crate::graphs::build_resource_task_graph;
use crate::instance::{Instance, JobId, Operation, Time};
use crate::rules;
use crate::schedule::{Schedule, ScheduledOperation};

/// Result of [`solve_exact`].
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub schedule: Schedule,
    /// True when the search space was exhausted, so the makespan is the true
    /// optimum. False means the best incumbent found within the time limit.
    pub proven_optimal: bool,
    pub nodes_explored: u64,
}

struct SearchState {
    durations: Vec<Vec<Time>>,
    machines: Vec<Vec<usize>>,
    job_tail: Vec<Vec<Time>>, // remaining work of job i from position p (inclusive)
    num_machines: usize,
    job_next: Vec<usize>,
    job_frontier: Vec<Time>,
    machine_frontier: Vec<Time>,
    machine_remaining: Vec<Time>,
    order: Vec<(JobId, usize)>,
    best_makespan: Time,
    best_order: Vec<(JobId, usize)>,
    deadline: Instant,
    nodes: u64,
    expired: bool,
}

impl SearchState {
    fn lower_bound(&self, partial_makespan: Time) -> Time {
        let mut bound = partial_makespan;
        // job bound: frontier plus remaining chain
        for (job, &pos) in self.job_next.iter().enumerate() {
            if pos < self.durations[job].len() {
                bound = bound.max(self.job_frontier[job] + self.job_tail[job][pos]);
            }
        }
        // one-machine bound: min release + total work + min tail over the
        // machine's remaining operations
        let mut min_release = vec![Time::MAX; self.num_machines];
        let mut min_tail = vec![Time::MAX; self.num_machines];
        for (job, &pos) in self.job_next.iter().enumerate() {
            let mut chain = self.job_frontier[job];
            for p in pos..self.durations[job].len() {
                let m = self.machines[job][p];
                let duration = self.durations[job][p];
                let release = chain.max(self.machine_frontier[m]);
                let tail = self.job_tail[job][p] - duration;
                min_release[m] = min_release[m].min(release);
                min_tail[m] = min_tail[m].min(tail);
                chain += duration;
            }
        }
        for m in 0..self.num_machines {
            if self.machine_remaining[m] > 0 && min_release[m] != Time::MAX {
                bound = bound.max(min_release[m] + self.machine_remaining[m] + min_tail[m]);
            }
        }
        bound
    }

    fn branch(&mut self, partial_makespan: Time) {
        self.nodes += 1;
        if self.expired {
            return;
        }
        if self.nodes % 4096 == 0 && Instant::now() >= self.deadline {
            self.expired = true;
            return;
        }
        // ready operations with earliest starts
        let mut ready: Vec<(JobId, usize, usize, Time, Time)> = Vec::new(); // job,pos,machine,est,dur
        for (job, &pos) in self.job_next.iter().enumerate() {
            if pos < self.durations[job].len() {
                let m = self.machines[job][pos];
                let est = self.job_frontier[job].max(self.machine_frontier[m]);
                ready.push((job, pos, m, est, self.durations[job][pos]));
            }
        }
        if ready.is_empty() {
            if partial_makespan < self.best_makespan {
                self.best_makespan = partial_makespan;
                self.best_order = self.order.clone();
            }
            return;
        }
        if self.lower_bound(partial_makespan) >= self.best_makespan {
            return;
        }
        // Giffler-Thompson branching: take the operation with the earliest
        // completion; branch on every ready operation of its machine that
        // could start before that completion.
        let (_, _, m_star, est_star, dur_star) = *ready
            .iter()
            .min_by_key(|&&(job, _, _, est, dur)| (est + dur, job))
            .unwrap();
        let completion = est_star + dur_star;
        let mut candidates: Vec<(JobId, usize, usize, Time, Time)> = ready
            .into_iter()
            .filter(|&(_, _, m, est, _)| m == m_star && est < completion)
            .collect();
        // explore promising starts first
        candidates.sort_by_key(|&(_, _, _, est, dur)| (est + dur, est));
        for (job, pos, m, est, dur) in candidates {
            let end = est + dur;
            let saved = (
                self.job_frontier[job],
                self.machine_frontier[m],
                self.machine_remaining[m],
            );
            self.job_next[job] += 1;
            self.job_frontier[job] = end;
            self.machine_frontier[m] = end;
            self.machine_remaining[m] -= dur;
            self.order.push((job, pos));
            self.branch(partial_makespan.max(end));
            self.order.pop();
            self.job_next[job] -= 1;
            self.job_frontier[job] = saved.0;
            self.machine_frontier[m] = saved.1;
            self.machine_remaining[m] = saved.2;
            if self.expired {
                return;
            }
        }
    }
}

/// Branch-and-bound makespan minimization over active schedules
/// (Giffler-Thompson branching), seeded with the best of the built-in
/// dispatching rules. Intended for desk-scale instances; on timeout the best
/// incumbent is returned with `proven_optimal = false`.
pub fn solve_exact(instance: &Arc<Instance>, time_limit: Duration) -> ExactResult {
    let deadline = Instant::now() + time_limit;
    // incumbent: best PDR schedule under the non-immediate filter
    let mut incumbent: Option<Schedule> = None;
    for rule in ["spt", "fcfs", "mwkr", "mor"] {
        if let Ok(s) = rules::solve(
            Arc::clone(instance),
            rule,
            ReadyFilter::NonImmediateOperations,
            0,
        ) {
            if incumbent
                .as_ref()
                .map(|b| s.makespan() < b.makespan())
                .unwrap_or(true)
            {
                incumbent = Some(s);
            }
        }
    }
    let incumbent = incumbent.expect("rule solver produced a schedule");

    let durations = instance.duration_matrix();
    let machines = instance.machines_matrix();
    let job_tail: Vec<Vec<Time>> = durations
        .iter()
        .map(|row| {
            let mut tail = vec![0; row.len()];
            let mut acc = 0;
            for p in (0..row.len()).rev() {
                acc += row[p];
                tail[p] = acc;
            }
            tail
        })
        .collect();
    let mut machine_remaining = vec![0; instance.num_machines()];
    for job in instance.jobs() {
        for op in job {
            machine_remaining[op.machine_id] += op.duration;
        }
    }
    let mut state = SearchState {
        num_machines: instance.num_machines(),
        job_next: vec![0; instance.num_jobs()],
        job_frontier: vec![0; instance.num_jobs()],
        machine_frontier: vec![0; instance.num_machines()],
        machine_remaining,
        order: Vec::new(),
        best_makespan: incumbent.makespan(),
        best_order: Vec::new(),
        deadline,
        nodes: 0,
        expired: false,
        durations,
        machines,
        job_tail,
    };
    state.branch(0);

    let mut schedule = if state.best_order.is_empty() {
        incumbent
    } else {
        // replay the best dispatch order
        let mut dispatcher = Dispatcher::with_filter(Arc::clone(instance), ReadyFilter::None);
        for &(job, pos) in &state.best_order {
            let op = instance.job(job)[pos];
            dispatcher
                .dispatch(&op)
                .expect("best order replays cleanly");
        }
        dispatcher.core().schedule().clone()
    };
    let proven_optimal = !state.expired;
    schedule
        .metadata
        .insert("solver".into(), json!("branch_and_bound"));
    schedule
        .metadata
        .insert("proven_optimal".into(), json!(proven_optimal));
    schedule.metadata.insert("makespan".into(), json!(schedule.makespan()));
    ExactResult {
        schedule,
        proven_optimal,
        nodes_explored: state.nodes,
    }
}

/// Tracks a reference solution during a replay: an available operation is
/// optimal when it is the one its machine's reference sequence expects next.
#[derive(Debug, Clone)]
pub struct OptimalLabeler {
    y_star: Vec<Vec<JobId>>,
    cursor: Vec<usize>,
}

impl OptimalLabeler {
    /// Builds a labeler from a complete reference schedule.
    pub fn new(reference: &Schedule) -> Self {
        Self {
            y_star: reference.job_sequences(),
            cursor: vec![0; reference.instance().num_machines()],
        }
    }

    /// 1 for operations that respect the reference sequencing, else 0.
    pub fn label(&self, available: &[Operation]) -> Vec<u8> {
        available
            .iter()
            .map(|op| {
                let m = op.machine_id;
                u8::from(
                    self.cursor[m] < self.y_star[m].len()
                        && self.y_star[m][self.cursor[m]] == op.job_id,
                )
            })
            .collect()
    }

    /// Advances the machine cursor after a dispatch.
    pub fn advance(&mut self, scheduled: &ScheduledOperation) {
        self.cursor[scheduled.machine_id] += 1;
    }
}

/// Where a dataset export writes its records.
#[derive(Debug, Clone, Serialize)]
pub struct ExportManifest {
    pub version: u32,
    pub sample_every: usize,
    pub emitted: usize,
    pub feature_columns: std::collections::BTreeMap<String, Vec<String>>,
    pub instances: Vec<ExportedInstance>,
    pub records: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportedInstance {
    pub name: String,
    pub steps: usize,
    /// Replay steps at which the sampling condition held.
    pub sampled_steps: Vec<usize>,
    /// Subset of `sampled_steps` actually written (the skip rule drops
    /// single-action steps).
    pub emitted_steps: Vec<usize>,
    /// Provenance carried over from the reference schedule (solver, rule,
    /// seed, wall time).
    pub reference_metadata: crate::instance::Metadata,
}

/// Replays each reference schedule through the environment and writes
/// (observation record, label vector) pairs for the sampled steps.
///
/// A step `k` of a replay is sampled when `(k + c_global) % n == 0`, where
/// `c_global` accumulates the lengths of all previously replayed instances.
/// Sampled steps with fewer than two available operations are skipped but
/// still advance `k` and `c_global`. At every step the first optimal
/// available operation is dispatched.
pub fn export_dataset(
    references: &[Schedule],
    sample_every: usize,
    sink: &Path,
) -> Result<ExportManifest, ExactError> {
    std::fs::create_dir_all(sink)?;
    let mut c_global: usize = 0;
    let mut emitted_total = 0usize;
    let mut instances = Vec::new();
    let mut records = Vec::new();
    let mut feature_columns = std::collections::BTreeMap::new();

    for reference in references {
        let instance = Arc::clone(reference.instance());
        let graph = build_resource_task_graph(&instance);
        let mut env = SingleEnv::new(
            Arc::clone(&instance),
            graph,
            SingleEnvConfig {
                filter: ReadyFilter::DominatedOperations,
                normalize: true,
                ..SingleEnvConfig::default()
            },
        )?;
        let mut labeler = OptimalLabeler::new(reference);
        let total_steps = instance.num_operations();
        let mut sampled_steps = Vec::new();
        let mut emitted_steps = Vec::new();
        let mut observation = env.reset()?;
        if feature_columns.is_empty() {
            for (kind, names) in env.feature_columns() {
                feature_columns.insert(kind, names);
            }
        }
        for k in 0..total_steps {
            let mut actions = observation.info.available_actions.clone();
            let mut available: Vec<Operation> = actions
                .iter()
                .map(|a| *instance.operation(a.operation_id).expect("valid op id"))
                .collect();
            let mut labels = labeler.label(&available);
            if !labels.contains(&1) {
                // the dominated-operations filter excluded every optimal
                // operation; fall back to the raw ready set for this step
                available = env.dispatcher().core().raw_ready_operations();
                actions = available
                    .iter()
                    .map(|op| crate::env::AvailableAction {
                        operation_id: op.operation_id,
                        machine_id: op.machine_id,
                        job_id: op.job_id,
                    })
                    .collect();
                labels = labeler.label(&available);
                if !labels.contains(&1) {
                    return Err(ExactError::Desync);
                }
            }
            let sampled = (k + c_global) % sample_every == 0;
            if sampled {
                sampled_steps.push(k);
                if available.len() >= 2 {
                    let remapped = env.remapped_observation(&observation)?;
                    let bytes = record_bytes(&observation, &remapped, &labels);
                    let file = format!("{:06}.bin", emitted_total);
                    std::fs::write(sink.join(&file), bytes)?;
                    records.push(file);
                    emitted_steps.push(k);
                    emitted_total += 1;
                }
            }
            // dispatch the first optimal available operation
            let choice = labels
                .iter()
                .position(|&l| l == 1)
                .expect("at least one optimal operation");
            let op = available[choice];
            let _ = actions;
            let step = env.step_operation(&op)?;
            labeler.advance(&step.scheduled);
            observation = step.observation;
        }
        c_global += total_steps;
        instances.push(ExportedInstance {
            name: instance.name().to_string(),
            steps: total_steps,
            sampled_steps,
            emitted_steps,
            reference_metadata: reference.metadata.clone(),
        });
    }

    let manifest = ExportManifest {
        version: 1,
        sample_every,
        emitted: emitted_total,
        feature_columns,
        instances,
        records,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ExactError::Serialization(e.to_string()))?;
    std::fs::write(sink.join("manifest.json"), text)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{furniture, two_job};

    #[test]
    fn furniture_optimum_is_ten() {
        let result = solve_exact(&furniture(), Duration::from_secs(1));
        assert!(result.proven_optimal);
        assert_eq!(result.schedule.makespan(), 10);
        assert!(result.schedule.verify().valid);
    }

    #[test]
    fn two_job_optimum_is_nine() {
        let result = solve_exact(&two_job(), Duration::from_secs(1));
        assert!(result.proven_optimal);
        assert_eq!(result.schedule.makespan(), 9);
    }

    /// Brute-force oracle: enumerate all feasible per-machine job orders via
    /// recursive dispatch and take the best makespan.
    pub(crate) fn brute_force_optimum(instance: &Arc<Instance>) -> Time {
        fn go(
            instance: &Arc<Instance>,
            job_next: &mut Vec<usize>,
            job_frontier: &mut Vec<Time>,
            machine_frontier: &mut Vec<Time>,
            makespan: Time,
            best: &mut Time,
        ) {
            let mut any = false;
            for job in 0..instance.num_jobs() {
                let pos = job_next[job];
                if pos >= instance.job(job).len() {
                    continue;
                }
                any = true;
                let op = instance.job(job)[pos];
                let est = job_frontier[job].max(machine_frontier[op.machine_id]);
                let end = est + op.duration;
                let (jf, mf) = (job_frontier[job], machine_frontier[op.machine_id]);
                job_next[job] += 1;
                job_frontier[job] = end;
                machine_frontier[op.machine_id] = end;
                go(
                    instance,
                    job_next,
                    job_frontier,
                    machine_frontier,
                    makespan.max(end),
                    best,
                );
                job_next[job] -= 1;
                job_frontier[job] = jf;
                machine_frontier[op.machine_id] = mf;
            }
            if !any {
                *best = (*best).min(makespan);
            }
        }
        let mut best = Time::MAX;
        go(
            instance,
            &mut vec![0; instance.num_jobs()],
            &mut vec![0; instance.num_jobs()],
            &mut vec![0; instance.num_machines()],
            0,
            &mut best,
        );
        best
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        use crate::generation::{GeneratorConfig, InstanceGenerator};
        let config = GeneratorConfig {
            duration_range: (1, 20),
            seed: 11,
            ..GeneratorConfig::fixed_size(3, 3)
        };
        let mut generator = InstanceGenerator::new(config).unwrap();
        for _ in 0..10 {
            let inst = generator.generate().unwrap().into_arc();
            let exact = solve_exact(&inst, Duration::from_secs(5));
            assert!(exact.proven_optimal);
            assert_eq!(exact.schedule.makespan(), brute_force_optimum(&inst));
        }
    }

    #[test]
    fn labeler_marks_reference_order() {
        let inst = furniture();
        let y = vec![vec![2, 0, 1], vec![0, 1, 2], vec![2, 0, 1]];
        let reference = Schedule::from_job_sequences(Arc::clone(&inst), &y).unwrap();
        let labeler = OptimalLabeler::new(&reference);
        let fresh: Vec<Operation> = inst.jobs().iter().map(|j| j[0]).collect();
        assert_eq!(labeler.label(&fresh), vec![0, 0, 1]);
    }

    #[test]
    fn corrupted_reference_desyncs() {
        let inst = furniture();
        // a "reference" whose only machine-sequence entry contradicts the
        // job order: it expects job 0's second operation before its first
        let mut bogus = Schedule::empty(Arc::clone(&inst));
        bogus.add(ScheduledOperation {
            operation: inst.job(0)[1],
            machine_id: 1,
            start_time: 0,
        });
        let labeler = OptimalLabeler::new(&bogus);
        let ready: Vec<Operation> = inst.jobs().iter().map(|j| j[0]).collect();
        assert!(!labeler.label(&ready).contains(&1));
        // the exporter surfaces it as a desync
        let dir = std::env::temp_dir().join("jobshop-desync-test");
        let result = export_dataset(&[bogus], 1, &dir);
        assert!(matches!(result, Err(ExactError::Desync)));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn replaying_reference_reproduces_makespan() {
        let inst = furniture();
        let y = vec![vec![2, 0, 1], vec![0, 1, 2], vec![2, 0, 1]];
        let reference = Schedule::from_job_sequences(Arc::clone(&inst), &y).unwrap();
        let mut labeler = OptimalLabeler::new(&reference);
        let mut dispatcher = Dispatcher::with_filter(Arc::clone(&inst), ReadyFilter::None);
        while !dispatcher.core().is_complete() {
            let ready = dispatcher.core().raw_ready_operations();
            let labels = labeler.label(&ready);
            let idx = labels.iter().position(|&l| l == 1).unwrap();
            let s = dispatcher.dispatch(&ready[idx].clone()).unwrap();
            labeler.advance(&s);
        }
        assert_eq!(
            dispatcher.core().schedule().makespan(),
            reference.makespan()
        );
    }
}
