//! Priority dispatching rules and the rule-driven solver loop.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::dispatching::{Dispatcher, DispatcherCore, ReadyFilter};
use crate::error::RuleError;
use crate::instance::{Instance, MachineId, Operation};
use crate::schedule::Schedule;

/// Picks the next operation to dispatch from `core.available_operations()`.
///
/// Ties break on first occurrence in the available list, which is ordered by
/// ascending job id; this pins every rule's output deterministically.
pub trait DispatchingRule {
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError>;
    fn name(&self) -> String;
}

fn first_min_by_key<K: Ord>(ops: &[Operation], key: impl Fn(&Operation) -> K) -> Operation {
    let mut best = 0;
    let mut best_key = key(&ops[0]);
    for (i, op) in ops.iter().enumerate().skip(1) {
        let k = key(op);
        if k < best_key {
            best = i;
            best_key = k;
        }
    }
    ops[best]
}

fn first_max_by_key<K: Ord>(ops: &[Operation], key: impl Fn(&Operation) -> K) -> Operation {
    let mut best = 0;
    let mut best_key = key(&ops[0]);
    for (i, op) in ops.iter().enumerate().skip(1) {
        let k = key(op);
        if k > best_key {
            best = i;
            best_key = k;
        }
    }
    ops[best]
}

fn available(core: &DispatcherCore) -> Result<Vec<Operation>, RuleError> {
    let ops = core.available_operations();
    if ops.is_empty() {
        return Err(RuleError::EmptyActionSet);
    }
    Ok(ops)
}

/// Shortest processing time: the available operation with minimum duration.
pub struct ShortestProcessingTime;

impl DispatchingRule for ShortestProcessingTime {
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError> {
        Ok(first_min_by_key(&available(core)?, |op| op.duration))
    }
    fn name(&self) -> String {
        "spt".into()
    }
}

/// First come first served: minimum position in job.
pub struct FirstComeFirstServed;

impl DispatchingRule for FirstComeFirstServed {
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError> {
        Ok(first_min_by_key(&available(core)?, |op| op.position_in_job))
    }
    fn name(&self) -> String {
        "fcfs".into()
    }
}

/// Most work remaining: the job with the largest total duration of
/// undispatched operations. Work leaves the pool at dispatch time.
pub struct MostWorkRemaining;

impl DispatchingRule for MostWorkRemaining {
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError> {
        let work = core.remaining_work();
        Ok(first_max_by_key(&available(core)?, |op| work[op.job_id]))
    }
    fn name(&self) -> String {
        "mwkr".into()
    }
}

/// Most operations remaining: the job with the most uncompleted operations.
/// Unlike [`MostWorkRemaining`], an operation counts until it completes in
/// time, not until it is dispatched.
pub struct MostOperationsRemaining;

impl DispatchingRule for MostOperationsRemaining {
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError> {
        let counts = core.uncompleted_counts(core.current_time());
        Ok(first_max_by_key(&available(core)?, |op| counts[op.job_id]))
    }
    fn name(&self) -> String {
        "mor".into()
    }
}

/// Uniform random choice over the available operations, reproducible from
/// the seed (ChaCha8 keystream).
pub struct RandomRule {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RandomRule {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }
}

impl DispatchingRule for RandomRule {
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError> {
        let ops = available(core)?;
        let idx = self.rng.random_range(0..ops.len());
        Ok(ops[idx])
    }
    fn name(&self) -> String {
        format!("random[seed={}]", self.seed)
    }
}

/// Builds a rule from a per-job scorer: the rule dispatches the first
/// available operation whose job attains the maximum score.
pub fn score_based_rule<F>(name: impl Into<String>, scorer: F) -> ScoreBasedRule<F>
where
    F: FnMut(&DispatcherCore) -> Vec<i64>,
{
    ScoreBasedRule {
        name: name.into(),
        scorer,
    }
}

pub struct ScoreBasedRule<F> {
    name: String,
    scorer: F,
}

impl<F> DispatchingRule for ScoreBasedRule<F>
where
    F: FnMut(&DispatcherCore) -> Vec<i64>,
{
    fn choose(&mut self, core: &DispatcherCore) -> Result<Operation, RuleError> {
        let scores = (self.scorer)(core);
        Ok(first_max_by_key(&available(core)?, |op| scores[op.job_id]))
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Looks a rule up by its command-line name.
pub fn rule_by_name(name: &str, seed: u64) -> Result<Box<dyn DispatchingRule>, RuleError> {
    match name {
        "spt" => Ok(Box::new(ShortestProcessingTime)),
        "fcfs" => Ok(Box::new(FirstComeFirstServed)),
        "mwkr" => Ok(Box::new(MostWorkRemaining)),
        "mor" => Ok(Box::new(MostOperationsRemaining)),
        "random" => Ok(Box::new(RandomRule::new(seed))),
        other => Err(RuleError::UnknownRule(other.into())),
    }
}

/// Chooses the machine for a selected operation. The classical chooser
/// returns the operation's own machine; the hook exists for flexible
/// variants.
pub type MachineChooser = fn(&DispatcherCore, &Operation) -> MachineId;

pub fn own_machine(_core: &DispatcherCore, op: &Operation) -> MachineId {
    op.machine_id
}

/// Drives a dispatching rule step by step until the schedule is complete.
pub struct RuleSolver {
    pub rule: Box<dyn DispatchingRule>,
    pub filter: ReadyFilter,
    pub machine_chooser: MachineChooser,
}

impl RuleSolver {
    pub fn new(rule: Box<dyn DispatchingRule>, filter: ReadyFilter) -> Self {
        Self {
            rule,
            filter,
            machine_chooser: own_machine,
        }
    }

    /// Runs the rule to completion; terminates in exactly one step per
    /// operation. The returned schedule's metadata records the rule, the
    /// filter and the wall time.
    pub fn solve(&mut self, instance: Arc<Instance>) -> Result<Schedule, RuleError> {
        let started = Instant::now();
        let mut dispatcher = Dispatcher::with_filter(instance, self.filter.clone());
        while !dispatcher.core().is_complete() {
            let op = self.rule.choose(dispatcher.core())?;
            let machine = (self.machine_chooser)(dispatcher.core(), &op);
            dispatcher.dispatch_on(&op, machine)?;
        }
        let mut schedule = dispatcher.core().schedule().clone();
        schedule.metadata.insert("rule".into(), json!(self.rule.name()));
        schedule
            .metadata
            .insert("filter".into(), json!(self.filter.name()));
        schedule.metadata.insert(
            "wall_time_seconds".into(),
            json!(started.elapsed().as_secs_f64()),
        );
        Ok(schedule)
    }
}

/// One-call convenience: solve `instance` with a named rule and filter.
pub fn solve(
    instance: Arc<Instance>,
    rule: &str,
    filter: ReadyFilter,
    seed: u64,
) -> Result<Schedule, RuleError> {
    let mut solver = RuleSolver::new(rule_by_name(rule, seed)?, filter);
    let mut schedule = solver.solve(instance)?;
    if rule == "random" {
        schedule.metadata.insert("seed".into(), json!(seed));
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{furniture, two_job};

    fn nio() -> ReadyFilter {
        ReadyFilter::NonImmediateOperations
    }

    #[test]
    fn spt_on_furniture_gives_thirteen() {
        let s = solve(furniture(), "spt", nio(), 0).unwrap();
        assert_eq!(s.makespan(), 13);
        assert!(s.verify().valid);
    }

    #[test]
    fn two_job_spt_nio_vs_do() {
        let s = solve(two_job(), "spt", nio(), 0).unwrap();
        assert_eq!(s.makespan(), 11);
        let s = solve(two_job(), "spt", ReadyFilter::DominatedOperations, 0).unwrap();
        assert_eq!(s.makespan(), 9);
    }

    #[test]
    fn single_available_op_is_chosen_by_every_rule() {
        let inst = Instance::from_matrices(
            "single",
            &[vec![5, 3]],
            &[vec![0, 1]],
            Default::default(),
        )
        .unwrap()
        .into_arc();
        for name in ["spt", "fcfs", "mwkr", "mor", "random"] {
            let mut rule = rule_by_name(name, 7).unwrap();
            let d = Dispatcher::with_filter(Arc::clone(&inst), nio());
            let op = rule.choose(d.core()).unwrap();
            assert_eq!((op.job_id, op.position_in_job), (0, 0), "rule {name}");
        }
    }

    #[test]
    fn score_based_matches_mor() {
        // scorer counting uncompleted operations reproduces MOR's choices
        let inst = furniture();
        let mut mor = MostOperationsRemaining;
        let mut scored = score_based_rule("scored-mor", |core: &DispatcherCore| {
            core.uncompleted_counts(core.current_time())
                .into_iter()
                .map(|c| c as i64)
                .collect()
        });
        let mut d = Dispatcher::with_filter(inst, nio());
        while !d.core().is_complete() {
            let a = mor.choose(d.core()).unwrap();
            let b = scored.choose(d.core()).unwrap();
            assert_eq!(a.operation_id, b.operation_id);
            d.dispatch(&a).unwrap();
        }
    }

    #[test]
    fn constant_scorer_picks_first_available() {
        let mut rule = score_based_rule("const", |core: &DispatcherCore| {
            vec![0; core.instance().num_jobs()]
        });
        let d = Dispatcher::with_filter(furniture(), nio());
        let op = rule.choose(d.core()).unwrap();
        assert_eq!(op.job_id, 0);
    }

    #[test]
    fn remaining_work_scorer_matches_mwkr() {
        use crate::generation::{GeneratorConfig, InstanceGenerator};
        let mut generator = InstanceGenerator::new(GeneratorConfig {
            seed: 31,
            ..GeneratorConfig::fixed_size(10, 10)
        })
        .unwrap();
        for _ in 0..50 {
            let instance = generator.generate().unwrap().into_arc();
            let mwkr = solve(Arc::clone(&instance), "mwkr", nio(), 0).unwrap();
            let mut solver = RuleSolver::new(
                Box::new(score_based_rule("remaining-work", |core: &DispatcherCore| {
                    core.remaining_work().iter().map(|&w| w as i64).collect()
                })),
                nio(),
            );
            let scored = solver.solve(Arc::clone(&instance)).unwrap();
            assert_eq!(mwkr.job_sequences(), scored.job_sequences());
        }
    }

    #[test]
    fn random_rule_is_seed_reproducible() {
        let a = solve(furniture(), "random", nio(), 42).unwrap();
        let b = solve(furniture(), "random", nio(), 42).unwrap();
        assert_eq!(a.job_sequences(), b.job_sequences());
        let total: u32 = furniture().stats().job_durations.iter().sum();
        for seed in 0..5 {
            let s = solve(furniture(), "random", nio(), seed).unwrap();
            assert!(s.makespan() >= 10 && s.makespan() <= total);
        }
    }

    #[test]
    fn unknown_rule_is_an_error() {
        assert!(matches!(
            rule_by_name("lexicographic", 0),
            Err(RuleError::UnknownRule(_))
        ));
    }

    #[test]
    fn solver_records_metadata() {
        let s = solve(furniture(), "spt", nio(), 0).unwrap();
        assert_eq!(s.metadata["rule"], "spt");
        assert_eq!(s.metadata["filter"], "nio");
        assert!(s.metadata.contains_key("wall_time_seconds"));
    }

    #[test]
    fn nio_episodes_are_non_delay() {
        for rule in ["spt", "fcfs", "mwkr", "mor"] {
            let s = solve(furniture(), rule, nio(), 0).unwrap();
            let report = s.verify();
            assert!(report.valid && report.complete && report.semi_active);
            assert!(report.non_delay, "rule {rule} broke non-delay");
        }
    }
}
