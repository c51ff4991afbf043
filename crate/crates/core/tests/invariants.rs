//! Cross-module properties: permutation symmetry, filter monotonicity,
//! engine equivalence, reset reproducibility, rule dominance.

use std::sync::Arc;

use proptest::prelude::*;

use jobshop::dispatching::{Dispatcher, ReadyFilter};
use jobshop::env::{Action, SingleEnv, SingleEnvConfig};
use jobshop::features::{CompositeFeatures, FeatureKind, FeatureObserver, FeatureObserverKind};
use jobshop::formats::{list_benchmarks, load_benchmark};
use jobshop::generation::{GeneratorConfig, InstanceGenerator};
use jobshop::graphs::build_resource_task_graph;
use jobshop::instance::{Instance, Metadata, Time};
use jobshop::rules::{self, rule_by_name};
use jobshop::schedule::Schedule;

fn random_instance(jobs: usize, machines: usize, seed: u64) -> Arc<Instance> {
    let mut generator = InstanceGenerator::new(GeneratorConfig {
        seed,
        ..GeneratorConfig::fixed_size(jobs, machines)
    })
    .unwrap();
    generator.generate().unwrap().into_arc()
}

/// Builds a feasible solution matrix by simulating a random dispatch order.
fn feasible_y(instance: &Arc<Instance>, seed: u64) -> Vec<Vec<usize>> {
    let schedule = rules::solve(
        Arc::clone(instance),
        "random",
        ReadyFilter::None,
        seed,
    )
    .unwrap();
    schedule.job_sequences()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any feasible solution matrix rebuilds into a valid, complete,
    /// semi-active schedule.
    #[test]
    fn from_job_sequences_is_semi_active(seed in 0u64..5000) {
        let instance = random_instance(4, 3, seed);
        let y = feasible_y(&instance, seed);
        let schedule = Schedule::from_job_sequences(Arc::clone(&instance), &y).unwrap();
        let report = schedule.verify();
        prop_assert!(report.valid);
        prop_assert!(report.complete);
        prop_assert!(report.semi_active);
    }

    /// Rebuilding any schedule from its extracted job sequences never
    /// increases the makespan.
    #[test]
    fn rebuild_never_worse(seed in 0u64..5000, rule_idx in 0usize..4) {
        let instance = random_instance(5, 4, seed);
        let rule = ["spt", "fcfs", "mwkr", "mor"][rule_idx];
        let schedule = rules::solve(Arc::clone(&instance), rule, ReadyFilter::None, 0).unwrap();
        let rebuilt =
            Schedule::from_job_sequences(Arc::clone(&instance), &schedule.job_sequences())
                .unwrap();
        prop_assert!(rebuilt.makespan() <= schedule.makespan());
    }

    /// Makespan is invariant under consistent relabeling of jobs and
    /// machines.
    #[test]
    fn makespan_permutation_symmetry(seed in 0u64..5000) {
        let instance = random_instance(4, 4, seed);
        let y = feasible_y(&instance, seed.wrapping_add(17));
        let base = Schedule::from_job_sequences(Arc::clone(&instance), &y)
            .unwrap()
            .makespan();

        // relabel jobs by rotation and machines by reversal
        let jobs = instance.num_jobs();
        let machines = instance.num_machines();
        let job_map: Vec<usize> = (0..jobs).map(|j| (j + 1) % jobs).collect();
        let machine_map: Vec<usize> = (0..machines).rev().collect();
        let mut durations = vec![Vec::new(); jobs];
        let mut machine_rows = vec![Vec::new(); jobs];
        for (j, job) in instance.jobs().iter().enumerate() {
            durations[job_map[j]] = job.iter().map(|o| o.duration).collect();
            machine_rows[job_map[j]] = job.iter().map(|o| machine_map[o.machine_id]).collect();
        }
        let relabeled =
            Instance::from_matrices("relabeled", &durations, &machine_rows, Metadata::new())
                .unwrap()
                .into_arc();
        // remap the solution matrix rows and job ids consistently
        let mut y_relabeled = vec![Vec::new(); machines];
        for (m, row) in y.iter().enumerate() {
            y_relabeled[machine_map[m]] = row.iter().map(|&j| job_map[j]).collect();
        }
        let relabeled_makespan =
            Schedule::from_job_sequences(relabeled, &y_relabeled).unwrap().makespan();
        prop_assert_eq!(base, relabeled_makespan);
    }

    /// Current time never decreases under the built-in filters, and the
    /// filtered action sets nest: NIO output within DO output within input.
    #[test]
    fn filter_monotonicity_and_nesting(seed in 0u64..5000, filter_idx in 0usize..5) {
        let filters = [
            ReadyFilter::None,
            ReadyFilter::DominatedOperations,
            ReadyFilter::NonImmediateOperations,
            ReadyFilter::NonIdleMachines,
            ReadyFilter::NonImmediateMachines,
        ];
        let instance = random_instance(5, 4, seed);
        let mut dispatcher =
            Dispatcher::with_filter(Arc::clone(&instance), filters[filter_idx].clone());
        let mut rule = rule_by_name("spt", 0).unwrap();
        let mut last_time = dispatcher.core().current_time();
        while !dispatcher.core().is_complete() {
            let core = dispatcher.core();
            let ready = core.raw_ready_operations();
            let dominated = ReadyFilter::DominatedOperations.apply(core, ready.clone());
            let immediate = ReadyFilter::NonImmediateOperations.apply(core, ready.clone());
            for op in &immediate {
                prop_assert!(
                    dominated.iter().any(|o| o.operation_id == op.operation_id),
                    "non-immediate output must be within the dominated-ops output"
                );
            }
            for op in &dominated {
                prop_assert!(ready.iter().any(|o| o.operation_id == op.operation_id));
            }
            let op = rule.choose(dispatcher.core()).unwrap();
            dispatcher.dispatch(&op).unwrap();
            let now = dispatcher.core().current_time();
            prop_assert!(now >= last_time, "current time moved backward");
            last_time = now;
        }
    }

    /// Feature trajectories are bitwise reproducible: reset then replay the
    /// same actions and compare every emitted matrix.
    #[test]
    fn reset_replay_is_bitwise_identical(seed in 0u64..2000) {
        let instance = random_instance(4, 4, seed);
        let kinds = [
            FeatureObserverKind::IsReady,
            FeatureObserverKind::IsScheduled,
            FeatureObserverKind::EarliestStart,
            FeatureObserverKind::Duration,
            FeatureObserverKind::PositionInJob,
            FeatureObserverKind::RemainingOperations,
        ];
        let mut dispatcher =
            Dispatcher::with_filter(Arc::clone(&instance), ReadyFilter::DominatedOperations);
        let handle = dispatcher.subscribe(|core| {
            jobshop::features::ObservedFeatures(CompositeFeatures::new(core, &kinds, false))
        });
        let mut rule = rule_by_name("mwkr", 0).unwrap();
        let mut actions = Vec::new();
        let mut first_run = Vec::new();
        while !dispatcher.core().is_complete() {
            let op = rule.choose(dispatcher.core()).unwrap();
            dispatcher.dispatch(&op).unwrap();
            actions.push(op);
            first_run.push(dispatcher.observer(handle).features().clone());
        }
        dispatcher.reset();
        for (step, op) in actions.iter().enumerate() {
            dispatcher.dispatch(op).unwrap();
            let features = dispatcher.observer(handle).features();
            prop_assert_eq!(features, &first_run[step], "step {}", step);
        }
    }

    /// Driving the environment with a rule gives step-for-step the same
    /// schedule as the rule solver with the same rule and filter.
    #[test]
    fn env_engine_equivalence(seed in 0u64..2000, rule_idx in 0usize..4) {
        let rule_name = ["spt", "fcfs", "mwkr", "mor"][rule_idx];
        let instance = random_instance(4, 4, seed);
        let reference = rules::solve(
            Arc::clone(&instance),
            rule_name,
            ReadyFilter::DominatedOperations,
            0,
        )
        .unwrap();
        let graph = build_resource_task_graph(&instance);
        let mut env = SingleEnv::new(
            Arc::clone(&instance),
            graph,
            SingleEnvConfig::default(),
        )
        .unwrap();
        env.reset().unwrap();
        let mut rule = rule_by_name(rule_name, 0).unwrap();
        loop {
            let op = rule.choose(env.dispatcher().core()).unwrap();
            let outcome = env.step(Action::new(op.job_id, op.machine_id as i64)).unwrap();
            if outcome.terminated {
                break;
            }
        }
        prop_assert_eq!(
            env.dispatcher().core().schedule().job_sequences(),
            reference.job_sequences()
        );
    }
}

/// Node features are invariant under job/machine relabeling, up to the
/// induced row permutation.
#[test]
fn features_permutation_symmetry() {
    for seed in 0..10u64 {
        let instance = random_instance(4, 3, seed);
        let jobs = instance.num_jobs();
        let machines = instance.num_machines();
        let job_map: Vec<usize> = (0..jobs).map(|j| (j + 2) % jobs).collect();
        let machine_map: Vec<usize> = (0..machines).rev().collect();
        let mut durations = vec![Vec::new(); jobs];
        let mut machine_rows = vec![Vec::new(); jobs];
        for (j, job) in instance.jobs().iter().enumerate() {
            durations[job_map[j]] = job.iter().map(|o| o.duration).collect();
            machine_rows[job_map[j]] = job.iter().map(|o| machine_map[o.machine_id]).collect();
        }
        let relabeled =
            Instance::from_matrices("relabeled", &durations, &machine_rows, Metadata::new())
                .unwrap()
                .into_arc();

        let kinds = [
            FeatureObserverKind::EarliestStart,
            FeatureObserverKind::Duration,
            FeatureObserverKind::RemainingOperations,
        ];
        let mut base = Dispatcher::with_filter(Arc::clone(&instance), ReadyFilter::None);
        let base_handle = base.subscribe(|core| {
            jobshop::features::ObservedFeatures(CompositeFeatures::new(core, &kinds, false))
        });
        let mut other = Dispatcher::with_filter(Arc::clone(&relabeled), ReadyFilter::None);
        let other_handle = other.subscribe(|core| {
            jobshop::features::ObservedFeatures(CompositeFeatures::new(core, &kinds, false))
        });
        // replay the same logical episode on both labelings
        let mut rule = rule_by_name("spt", 0).unwrap();
        while !base.core().is_complete() {
            let op = rule.choose(base.core()).unwrap();
            base.dispatch(&op).unwrap();
            let relabeled_op = relabeled.job(job_map[op.job_id])[op.position_in_job];
            other.dispatch(&relabeled_op).unwrap();

            let base_features = base.observer(base_handle).features();
            let other_features = other.observer(other_handle).features();
            // job rows permute by job_map
            let base_jobs = &base_features[&FeatureKind::Jobs];
            let other_jobs = &other_features[&FeatureKind::Jobs];
            for j in 0..jobs {
                assert_eq!(base_jobs.row(j), other_jobs.row(job_map[j]), "job rows");
            }
            let base_machines = &base_features[&FeatureKind::Machines];
            let other_machines = &other_features[&FeatureKind::Machines];
            for m in 0..machines {
                assert_eq!(
                    base_machines.row(m),
                    other_machines.row(machine_map[m]),
                    "machine rows"
                );
            }
        }
    }
}

/// On vendored instances where every job has the same length, the
/// first-come-first-served and most-operations-remaining rules build
/// identical schedules, not merely equal makespans.
#[test]
fn fcfs_equals_mor_on_equal_length_jobs() {
    for name in list_benchmarks() {
        let instance = load_benchmark(&name).unwrap();
        let len0 = instance.job(0).len();
        if !instance.jobs().iter().all(|j| j.len() == len0) {
            continue;
        }
        let fcfs = rules::solve(
            Arc::clone(&instance),
            "fcfs",
            ReadyFilter::NonImmediateOperations,
            0,
        )
        .unwrap();
        let mor = rules::solve(
            Arc::clone(&instance),
            "mor",
            ReadyFilter::NonImmediateOperations,
            0,
        )
        .unwrap();
        assert_eq!(
            fcfs.job_sequences(),
            mor.job_sequences(),
            "{name}: fcfs and mor schedules differ"
        );
    }
}

/// Rule makespans never beat the known optimum of vendored instances.
#[test]
fn rules_never_beat_known_optima() {
    for name in list_benchmarks() {
        let instance = load_benchmark(&name).unwrap();
        let Some(optimum) = instance.metadata().get("optimum").and_then(|v| v.as_u64()) else {
            continue;
        };
        for rule in ["spt", "fcfs", "mwkr", "mor"] {
            let makespan = rules::solve(
                Arc::clone(&instance),
                rule,
                ReadyFilter::NonImmediateOperations,
                0,
            )
            .unwrap()
            .makespan();
            assert!(
                u64::from(makespan) >= optimum,
                "{name}/{rule}: makespan {makespan} beats the optimum {optimum}"
            );
        }
    }
}

/// Duration sampling is uniform: chi-square over 10^4 draws at the 1e-3
/// significance level.
#[test]
fn generator_duration_uniformity() {
    let bins = 9usize;
    let config = GeneratorConfig {
        duration_range: (1, bins as Time),
        seed: 99,
        ..GeneratorConfig::fixed_size(10, 10)
    };
    let mut generator = InstanceGenerator::new(config).unwrap();
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    while total < 10_000 {
        let instance = generator.generate().unwrap();
        for row in instance.duration_matrix() {
            for d in row {
                counts[(d - 1) as usize] += 1;
                total += 1;
            }
        }
    }
    let expected = total as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum();
    // chi-square critical value for 8 degrees of freedom at alpha = 1e-3
    assert!(
        chi2 < 26.124,
        "chi-square {chi2:.2} rejects uniformity (counts {counts:?})"
    );
}
