//! The scheduling engine: dispatches operations at their earliest feasible
//! start, tracks frontiers and ready sets, applies ready-operation filters
//! and notifies observers.

use std::any::Any;
use std::marker::PhantomData;
use std::sync::Arc;

use crate::error::CoreError;
use crate::instance::{Instance, MachineId, Operation, Time};
use crate::schedule::{Schedule, ScheduledOperation};

/// Pruning rule mapping the raw ready list to the action set.
///
/// Built-in filters keep the property that the current time never moves
/// backward. User filters receive the full engine view and may break that
/// property; the engine does not guard against it.
#[derive(Clone)]
pub enum ReadyFilter {
    /// No pruning: the raw ready list is the action set.
    None,
    /// Drops operations dominated by a same-machine peer that can finish
    /// before they could start (DO).
    DominatedOperations,
    /// Keeps only operations that can start at the current time (NIO).
    NonImmediateOperations,
    /// Drops operations whose machine is busy at the current time (NIDM).
    NonIdleMachines,
    /// Keeps operations on machines owning at least one operation that can
    /// start at the current time (NIM).
    NonImmediateMachines,
    /// Applies the inner filters left to right.
    Composite(Vec<ReadyFilter>),
    /// User-provided pruning function.
    Custom(Arc<dyn Fn(&DispatcherCore, Vec<Operation>) -> Vec<Operation> + Send + Sync>),
}

impl std::fmt::Debug for ReadyFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl ReadyFilter {
    /// Canonical name as used by the command-line tools.
    pub fn name(&self) -> String {
        match self {
            ReadyFilter::None => "none".into(),
            ReadyFilter::DominatedOperations => "do".into(),
            ReadyFilter::NonImmediateOperations => "nio".into(),
            ReadyFilter::NonIdleMachines => "nidm".into(),
            ReadyFilter::NonImmediateMachines => "nim".into(),
            ReadyFilter::Composite(inner) => inner
                .iter()
                .map(ReadyFilter::name)
                .collect::<Vec<_>>()
                .join("+"),
            ReadyFilter::Custom(_) => "custom".into(),
        }
    }

    /// Parses filter names like `nio` or compositions like `do+nim`.
    pub fn parse(name: &str) -> Result<Self, crate::error::RuleError> {
        if name.contains('+') {
            let parts = name
                .split('+')
                .map(ReadyFilter::parse)
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(compose_filters(parts));
        }
        match name {
            "none" => Ok(ReadyFilter::None),
            "do" | "dominated" => Ok(ReadyFilter::DominatedOperations),
            "nio" => Ok(ReadyFilter::NonImmediateOperations),
            "nidm" => Ok(ReadyFilter::NonIdleMachines),
            "nim" => Ok(ReadyFilter::NonImmediateMachines),
            other => Err(crate::error::RuleError::UnknownFilter(other.into())),
        }
    }

    pub fn apply(&self, core: &DispatcherCore, ready: Vec<Operation>) -> Vec<Operation> {
        match self {
            ReadyFilter::None => ready,
            ReadyFilter::DominatedOperations => filter_dominated_operations(core, ready),
            ReadyFilter::NonImmediateOperations => filter_non_immediate_operations(core, ready),
            ReadyFilter::NonIdleMachines => filter_non_idle_machines(core, ready),
            ReadyFilter::NonImmediateMachines => filter_non_immediate_machines(core, ready),
            ReadyFilter::Composite(inner) => inner
                .iter()
                .fold(ready, |acc, f| f.apply(core, acc)),
            ReadyFilter::Custom(f) => f(core, ready),
        }
    }
}

/// Drops every operation dominated by a same-machine peer in the list: a
/// peer that can complete no later than the operation could start.
pub fn filter_dominated_operations(
    core: &DispatcherCore,
    ready: Vec<Operation>,
) -> Vec<Operation> {
    let ests: Vec<Time> = ready.iter().map(|op| core.earliest_start(op)).collect();
    ready
        .iter()
        .enumerate()
        .filter(|(i, op)| {
            !ready.iter().enumerate().any(|(j, other)| {
                j != *i
                    && other.machine_id == op.machine_id
                    && ests[j] + other.duration <= ests[*i]
            })
        })
        .map(|(_, op)| *op)
        .collect()
}

/// Keeps only operations whose earliest start equals the minimum earliest
/// start over the input list.
pub fn filter_non_immediate_operations(
    core: &DispatcherCore,
    ready: Vec<Operation>,
) -> Vec<Operation> {
    let Some(t) = ready.iter().map(|op| core.earliest_start(op)).min() else {
        return ready;
    };
    ready
        .into_iter()
        .filter(|op| core.earliest_start(op) == t)
        .collect()
}

/// Drops operations whose machine is processing another operation at the
/// minimum earliest start over the input list.
pub fn filter_non_idle_machines(core: &DispatcherCore, ready: Vec<Operation>) -> Vec<Operation> {
    let Some(t) = ready.iter().map(|op| core.earliest_start(op)).min() else {
        return ready;
    };
    ready
        .into_iter()
        .filter(|op| !core.machine_busy_at(op.machine_id, t))
        .collect()
}

/// Keeps operations on machines owning at least one input operation whose
/// earliest start equals the minimum earliest start over the input list.
pub fn filter_non_immediate_machines(
    core: &DispatcherCore,
    ready: Vec<Operation>,
) -> Vec<Operation> {
    let ests: Vec<Time> = ready.iter().map(|op| core.earliest_start(op)).collect();
    let Some(&t) = ests.iter().min() else {
        return ready;
    };
    let immediate: Vec<MachineId> = ready
        .iter()
        .zip(&ests)
        .filter(|(_, &e)| e == t)
        .map(|(op, _)| op.machine_id)
        .collect();
    ready
        .into_iter()
        .filter(|op| immediate.contains(&op.machine_id))
        .collect()
}

/// Applies the given filters sequentially, left to right.
pub fn compose_filters(filters: Vec<ReadyFilter>) -> ReadyFilter {
    ReadyFilter::Composite(filters)
}

/// Reacts to dispatch events. Observers never mutate engine state; they are
/// notified after each schedule mutation, in subscription order.
pub trait DispatcherObserver: Any {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation);
    /// Restores the observer to the state it had right after construction.
    fn reset(&mut self, core: &DispatcherCore);
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Typed handle to an observer owned by a [`Dispatcher`].
pub struct ObserverHandle<T> {
    index: usize,
    _marker: PhantomData<T>,
}

impl<T> Clone for ObserverHandle<T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for ObserverHandle<T> {}

/// Engine state shared with filters, rules and observers.
#[derive(Debug, Clone)]
pub struct DispatcherCore {
    instance: Arc<Instance>,
    schedule: Schedule,
    job_frontier: Vec<Time>,
    machine_frontier: Vec<Time>,
    job_next_position: Vec<usize>,
    /// (start, end) per operation id once dispatched.
    dispatched: Vec<Option<(Time, Time)>>,
    num_dispatched: usize,
    filter: ReadyFilter,
}

impl DispatcherCore {
    fn new(instance: Arc<Instance>, filter: ReadyFilter) -> Self {
        let jobs = instance.num_jobs();
        let machines = instance.num_machines();
        let ops = instance.num_operations();
        Self {
            schedule: Schedule::empty(Arc::clone(&instance)),
            instance,
            job_frontier: vec![0; jobs],
            machine_frontier: vec![0; machines],
            job_next_position: vec![0; jobs],
            dispatched: vec![None; ops],
            num_dispatched: 0,
            filter,
        }
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn filter(&self) -> &ReadyFilter {
        &self.filter
    }

    pub fn job_frontier(&self) -> &[Time] {
        &self.job_frontier
    }

    pub fn machine_frontier(&self) -> &[Time] {
        &self.machine_frontier
    }

    pub fn job_next_position(&self) -> &[usize] {
        &self.job_next_position
    }

    pub fn num_dispatched(&self) -> usize {
        self.num_dispatched
    }

    pub fn is_complete(&self) -> bool {
        self.num_dispatched == self.instance.num_operations()
    }

    pub fn is_dispatched(&self, op: &Operation) -> bool {
        self.dispatched[op.operation_id].is_some()
    }

    /// Start and end time of a dispatched operation.
    pub fn dispatch_times(&self, op: &Operation) -> Option<(Time, Time)> {
        self.dispatched[op.operation_id]
    }

    /// Earliest feasible start: released by the job predecessor and the
    /// machine frontier.
    pub fn earliest_start(&self, op: &Operation) -> Time {
        self.job_frontier[op.job_id].max(self.machine_frontier[op.machine_id])
    }

    /// Next undispatched operation of each job with work remaining, in
    /// ascending job id.
    pub fn raw_ready_operations(&self) -> Vec<Operation> {
        let mut ready = Vec::new();
        for (job_id, job) in self.instance.jobs().iter().enumerate() {
            let pos = self.job_next_position[job_id];
            if pos < job.len() {
                ready.push(job[pos]);
            }
        }
        ready
    }

    /// The action set: the configured filter applied to the raw ready list.
    pub fn available_operations(&self) -> Vec<Operation> {
        let ready = self.raw_ready_operations();
        self.filter.apply(self, ready)
    }

    /// Minimum earliest start over the available operations; equals the
    /// makespan once the schedule is complete.
    pub fn current_time(&self) -> Time {
        if self.is_complete() {
            return self.schedule.makespan();
        }
        self.available_operations()
            .iter()
            .map(|op| self.earliest_start(op))
            .min()
            .unwrap_or_else(|| self.schedule.makespan())
    }

    /// True when some dispatched operation occupies the machine at `t`.
    pub fn machine_busy_at(&self, machine: MachineId, t: Time) -> bool {
        self.schedule.machine_sequences()[machine]
            .iter()
            .any(|s| s.start_time <= t && t < s.end_time())
    }

    /// An operation is completed once its end time is at or before the
    /// current time.
    pub fn is_completed_at(&self, op: &Operation, now: Time) -> bool {
        matches!(self.dispatched[op.operation_id], Some((_, end)) if end <= now)
    }

    /// Operations not yet completed at the current time, per job.
    pub fn uncompleted_counts(&self, now: Time) -> Vec<usize> {
        let mut counts = vec![0usize; self.instance.num_jobs()];
        for job in self.instance.jobs() {
            for op in job {
                if !self.is_completed_at(op, now) {
                    counts[op.job_id] += 1;
                }
            }
        }
        counts
    }

    /// Remaining (undispatched) work per job.
    pub fn remaining_work(&self) -> Vec<Time> {
        let mut work = vec![0; self.instance.num_jobs()];
        for job in self.instance.jobs() {
            for op in job {
                if !self.is_dispatched(op) {
                    work[op.job_id] += op.duration;
                }
            }
        }
        work
    }
}

/// The engine: owns the growing schedule and the subscribed observers.
pub struct Dispatcher {
    core: DispatcherCore,
    observers: Vec<Box<dyn DispatcherObserver>>,
}

impl Dispatcher {
    pub fn new(instance: Arc<Instance>) -> Self {
        Self::with_filter(instance, ReadyFilter::DominatedOperations)
    }

    /// Engine with an explicit ready-operations filter.
    pub fn with_filter(instance: Arc<Instance>, filter: ReadyFilter) -> Self {
        Self {
            core: DispatcherCore::new(instance, filter),
            observers: Vec::new(),
        }
    }

    pub fn core(&self) -> &DispatcherCore {
        &self.core
    }

    /// Registers an observer constructed from the current engine state and
    /// returns a typed handle for later access.
    pub fn subscribe<T, F>(&mut self, build: F) -> ObserverHandle<T>
    where
        T: DispatcherObserver + 'static,
        F: FnOnce(&DispatcherCore) -> T,
    {
        let observer = build(&self.core);
        self.observers.push(Box::new(observer));
        ObserverHandle {
            index: self.observers.len() - 1,
            _marker: PhantomData,
        }
    }

    pub fn observer<T: DispatcherObserver + 'static>(&self, handle: ObserverHandle<T>) -> &T {
        self.observers[handle.index]
            .as_any()
            .downcast_ref()
            .expect("observer handle type mismatch")
    }

    pub fn observer_mut<T: DispatcherObserver + 'static>(
        &mut self,
        handle: ObserverHandle<T>,
    ) -> &mut T {
        self.observers[handle.index]
            .as_any_mut()
            .downcast_mut()
            .expect("observer handle type mismatch")
    }

    /// Dispatches `op` on its own machine.
    pub fn dispatch(&mut self, op: &Operation) -> Result<ScheduledOperation, CoreError> {
        self.dispatch_on(op, op.machine_id)
    }

    /// Dispatches `op` on `machine` at the earliest feasible start. The
    /// classical model requires `machine` to be the operation's machine; the
    /// parameter exists as a hook for flexible variants.
    pub fn dispatch_on(
        &mut self,
        op: &Operation,
        machine: MachineId,
    ) -> Result<ScheduledOperation, CoreError> {
        if self.core.is_complete() {
            return Err(CoreError::Complete);
        }
        if machine != op.machine_id {
            return Err(CoreError::MachineMismatch {
                expected: op.machine_id,
                got: machine,
            });
        }
        if self.core.job_next_position[op.job_id] != op.position_in_job {
            return Err(CoreError::NotReady { job: op.job_id });
        }
        let start = self.core.earliest_start(op);
        let end = start + op.duration;
        let scheduled = ScheduledOperation {
            operation: *op,
            machine_id: machine,
            start_time: start,
        };
        self.core.schedule.add(scheduled);
        self.core.job_frontier[op.job_id] = end;
        self.core.machine_frontier[machine] = end;
        self.core.job_next_position[op.job_id] += 1;
        self.core.dispatched[op.operation_id] = Some((start, end));
        self.core.num_dispatched += 1;
        for observer in &mut self.observers {
            observer.update(&self.core, &scheduled);
        }
        Ok(scheduled)
    }

    /// Clears the schedule and restores every observer to its initial state.
    pub fn reset(&mut self) {
        let filter = self.core.filter.clone();
        self.core = DispatcherCore::new(Arc::clone(&self.core.instance), filter);
        for observer in &mut self.observers {
            observer.reset(&self.core);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{furniture, two_job};

    #[test]
    fn dispatch_places_at_earliest_start() {
        let mut d = Dispatcher::with_filter(furniture(), ReadyFilter::None);
        let cabinet_cut = d.core().instance().job(2)[0];
        let s = d.dispatch(&cabinet_cut).unwrap();
        assert_eq!((s.machine_id, s.start_time), (0, 0));
        let table_cut = d.core().instance().job(0)[0];
        let s = d.dispatch(&table_cut).unwrap();
        assert_eq!(s.start_time, 2);
    }

    #[test]
    fn first_dispatch_starts_at_zero() {
        let mut d = Dispatcher::with_filter(two_job(), ReadyFilter::None);
        let op = d.core().instance().job(1)[0];
        assert_eq!(d.dispatch(&op).unwrap().start_time, 0);
    }

    #[test]
    fn out_of_order_dispatch_is_rejected() {
        let mut d = Dispatcher::with_filter(furniture(), ReadyFilter::None);
        let second = d.core().instance().job(0)[1];
        assert!(matches!(
            d.dispatch(&second),
            Err(CoreError::NotReady { job: 0 })
        ));
    }

    #[test]
    fn raw_ready_lists_first_ops_ascending() {
        let d = Dispatcher::with_filter(furniture(), ReadyFilter::None);
        let ready = d.core().raw_ready_operations();
        let ids: Vec<_> = ready.iter().map(|o| (o.job_id, o.position_in_job)).collect();
        assert_eq!(ids, vec![(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn ready_excludes_finished_jobs() {
        let mut d = Dispatcher::with_filter(furniture(), ReadyFilter::None);
        for pos in 0..3 {
            let op = d.core().instance().job(1)[pos];
            d.dispatch(&op).unwrap();
        }
        let jobs: Vec<_> = d
            .core()
            .raw_ready_operations()
            .iter()
            .map(|o| o.job_id)
            .collect();
        assert_eq!(jobs, vec![0, 2]);
    }

    #[test]
    fn fresh_instance_current_time_is_zero() {
        let d = Dispatcher::with_filter(furniture(), ReadyFilter::None);
        assert_eq!(d.core().current_time(), 0);
    }

    /// Replays the canonical non-delay trace on the two-job instance and
    /// checks earliest starts along the way.
    #[test]
    fn two_job_non_delay_trace() {
        let mut d = Dispatcher::with_filter(two_job(), ReadyFilter::NonImmediateOperations);
        let inst = Arc::clone(d.core().instance());
        d.dispatch(&inst.job(1)[0]).unwrap(); // machine 2, 0-2
        d.dispatch(&inst.job(1)[1]).unwrap(); // machine 1, 2-7
        d.dispatch(&inst.job(0)[0]).unwrap(); // machine 0, 0-3
        assert_eq!(d.core().earliest_start(&inst.job(0)[1]), 7);
    }

    #[test]
    fn complete_schedule_current_time_is_makespan() {
        let mut d = Dispatcher::with_filter(two_job(), ReadyFilter::NonImmediateOperations);
        while !d.core().is_complete() {
            let op = d.core().available_operations()[0];
            d.dispatch(&op).unwrap();
        }
        assert_eq!(d.core().current_time(), d.core().schedule().makespan());
    }

    #[test]
    fn dominated_filter_drops_strictly_later_op() {
        // machine m with A (est 0, dur 2) and B (est 5): B dominated
        let inst = Instance::from_matrices(
            "dom",
            &[vec![2], vec![5, 1]],
            &[vec![0], vec![1, 0]],
            Default::default(),
        )
        .unwrap()
        .into_arc();
        let mut d = Dispatcher::with_filter(inst, ReadyFilter::DominatedOperations);
        let j1 = d.core().instance().job(1)[0];
        d.dispatch(&j1).unwrap(); // machine 1 busy 0-5, job 1 next on machine 0 at est 5
        let avail = d.core().available_operations();
        let ids: Vec<_> = avail.iter().map(|o| o.job_id).collect();
        assert_eq!(ids, vec![0]);
    }

    #[test]
    fn dominated_filter_keeps_close_race() {
        // two-job trace from the action-definition example: neither ready op
        // dominates the other (2 + 5 > 3)
        let mut d = Dispatcher::with_filter(two_job(), ReadyFilter::DominatedOperations);
        let inst = Arc::clone(d.core().instance());
        d.dispatch(&inst.job(0)[0]).unwrap(); // 0-3 on machine 0
        d.dispatch(&inst.job(1)[0]).unwrap(); // 0-2 on machine 2
        let avail = d.core().available_operations();
        assert_eq!(avail.len(), 2);
    }

    #[test]
    fn dominated_filter_identity_on_distinct_machines() {
        let d = Dispatcher::with_filter(furniture(), ReadyFilter::DominatedOperations);
        // all first ops share machine 0 with est 0 and positive durations:
        // nothing dominated
        assert_eq!(d.core().available_operations().len(), 3);
    }

    #[test]
    fn nio_keeps_min_est_ops() {
        let mut d = Dispatcher::with_filter(two_job(), ReadyFilter::NonImmediateOperations);
        let inst = Arc::clone(d.core().instance());
        d.dispatch(&inst.job(0)[0]).unwrap(); // job 0 op 1 now est 3
        d.dispatch(&inst.job(1)[0]).unwrap(); // job 1 op 1 now est 2
        let avail = d.core().available_operations();
        assert_eq!(avail.len(), 1);
        assert_eq!(avail[0].job_id, 1);
    }

    #[test]
    fn nim_identity_when_all_immediate() {
        let d = Dispatcher::with_filter(furniture(), ReadyFilter::NonImmediateMachines);
        assert_eq!(d.core().available_operations().len(), 3);
    }

    #[test]
    fn nidm_drops_busy_machine_ops() {
        // machine 0 processing during [0,5) while t = 0: the machine-0
        // ready op is dropped, the idle machine's op survives
        let inst = Instance::from_matrices(
            "busy",
            &[vec![5], vec![3], vec![2]],
            &[vec![0], vec![0], vec![1]],
            Default::default(),
        )
        .unwrap()
        .into_arc();
        let mut d = Dispatcher::with_filter(inst, ReadyFilter::NonIdleMachines);
        let j0 = d.core().instance().job(0)[0];
        d.dispatch(&j0).unwrap(); // machine 0 busy 0-5
        // ready: job1 (machine 0, est 5), job2 (machine 1, est 0); t = 0
        let avail = d.core().available_operations();
        let machines: Vec<_> = avail.iter().map(|o| o.machine_id).collect();
        assert_eq!(machines, vec![1]);
    }

    #[test]
    fn observers_fire_once_per_dispatch_in_order() {
        struct Recorder {
            seen: Vec<usize>,
            tag: usize,
            log: Arc<std::sync::Mutex<Vec<(usize, usize)>>>,
        }
        impl DispatcherObserver for Recorder {
            fn update(&mut self, _core: &DispatcherCore, s: &ScheduledOperation) {
                self.seen.push(s.operation.operation_id);
                self.log
                    .lock()
                    .unwrap()
                    .push((self.tag, s.operation.operation_id));
            }
            fn reset(&mut self, _core: &DispatcherCore) {
                self.seen.clear();
            }
            fn as_any(&self) -> &dyn Any {
                self
            }
            fn as_any_mut(&mut self) -> &mut dyn Any {
                self
            }
        }
        let log = Arc::new(std::sync::Mutex::new(Vec::new()));
        let mut d = Dispatcher::with_filter(furniture(), ReadyFilter::None);
        let h1 = d.subscribe(|_| Recorder {
            seen: vec![],
            tag: 1,
            log: Arc::clone(&log),
        });
        let h2 = d.subscribe(|_| Recorder {
            seen: vec![],
            tag: 2,
            log: Arc::clone(&log),
        });
        let op = d.core().instance().job(0)[0];
        d.dispatch(&op).unwrap();
        assert_eq!(d.observer(h1).seen, vec![0]);
        assert_eq!(d.observer(h2).seen, vec![0]);
        assert_eq!(*log.lock().unwrap(), vec![(1, 0), (2, 0)]);
        d.reset();
        assert!(d.observer(h1).seen.is_empty());
    }
}
