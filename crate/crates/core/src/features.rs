//! Observer-driven node features for operations, machines and jobs.
//!
//! Each observer maintains one dense matrix per entity kind. The composite
//! observer concatenates its constituents horizontally and is what the
//! environments register with the dispatcher.

use std::collections::BTreeMap;

use crate::dispatching::DispatcherCore;
use crate::error::EnvError;
use crate::instance::Time;
use crate::schedule::ScheduledOperation;

/// Entity kinds features are computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Operations,
    Machines,
    Jobs,
}

impl FeatureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Operations => "operations",
            FeatureKind::Machines => "machines",
            FeatureKind::Jobs => "jobs",
        }
    }
}

/// Dense row-major matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Divides every entry by the maximum absolute value; no-op when the
    /// matrix is all zero.
    pub fn normalize_max_abs(&mut self) {
        let max = self
            .data
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if max > 0.0 {
            for v in &mut self.data {
                *v /= max;
            }
        }
    }
}

/// Per-kind feature matrices.
pub type FeatureSet = BTreeMap<FeatureKind, FeatureMatrix>;

/// Normalizes each kind's matrix by its own maximum absolute value.
pub fn normalize_feature_set(set: &mut FeatureSet) {
    for matrix in set.values_mut() {
        matrix.normalize_max_abs();
    }
}

/// Adapter that lets a single [`FeatureObserver`] subscribe to a dispatcher
/// on its own (the environments register a [`CompositeFeatures`] instead).
pub struct ObservedFeatures<T: FeatureObserver>(pub T);

impl<T: FeatureObserver + 'static> crate::dispatching::DispatcherObserver for ObservedFeatures<T> {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        self.0.update(core, scheduled);
    }
    fn reset(&mut self, core: &DispatcherCore) {
        self.0.reset(core);
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

impl<T: FeatureObserver> std::ops::Deref for ObservedFeatures<T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.0
    }
}

/// Computes entity features and keeps them current as operations dispatch.
pub trait FeatureObserver {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation);
    /// Recomputes features from a fresh engine state; equivalent to
    /// constructing the observer anew.
    fn reset(&mut self, core: &DispatcherCore);
    fn features(&self) -> &FeatureSet;
    fn column_names(&self, kind: FeatureKind) -> Vec<String>;
}

fn status_matrices(core: &DispatcherCore) -> (usize, usize, usize) {
    let instance = core.instance();
    (
        instance.num_operations(),
        instance.num_machines(),
        instance.num_jobs(),
    )
}

/// Which status flag a [`StatusObserver`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusKind {
    /// In the available action set (machines/jobs: own at least one).
    Ready,
    /// Dispatched (machines/jobs: at least one dispatched, uncompleted op).
    Scheduled,
    /// Completed in time (machines/jobs: all operations completed).
    Completed,
}

impl StatusKind {
    fn name(&self) -> &'static str {
        match self {
            StatusKind::Ready => "is_ready",
            StatusKind::Scheduled => "is_scheduled",
            StatusKind::Completed => "is_completed",
        }
    }
}

/// Binary status flags per entity.
pub struct StatusObserver {
    kind: StatusKind,
    set: FeatureSet,
}

impl StatusObserver {
    pub fn new(kind: StatusKind, core: &DispatcherCore) -> Self {
        let mut observer = Self {
            kind,
            set: FeatureSet::new(),
        };
        observer.reset(core);
        observer
    }

    fn recompute(&mut self, core: &DispatcherCore) {
        let (ops, machines, jobs) = status_matrices(core);
        let mut op_m = FeatureMatrix::zeros(ops, 1);
        let mut mach_m = FeatureMatrix::zeros(machines, 1);
        let mut job_m = FeatureMatrix::zeros(jobs, 1);
        match self.kind {
            StatusKind::Ready => {
                for op in core.available_operations() {
                    op_m.set(op.operation_id, 0, 1.0);
                    mach_m.set(op.machine_id, 0, 1.0);
                    job_m.set(op.job_id, 0, 1.0);
                }
            }
            StatusKind::Scheduled => {
                let now = core.current_time();
                for job in core.instance().jobs() {
                    for op in job {
                        if core.is_dispatched(op) {
                            op_m.set(op.operation_id, 0, 1.0);
                            if !core.is_completed_at(op, now) {
                                mach_m.set(op.machine_id, 0, 1.0);
                                job_m.set(op.job_id, 0, 1.0);
                            }
                        }
                    }
                }
            }
            StatusKind::Completed => {
                let now = core.current_time();
                for (m, load) in machine_completion(core, now) {
                    mach_m.set(m, 0, load);
                }
                for (j, done) in job_completion(core, now) {
                    job_m.set(j, 0, done);
                }
                for job in core.instance().jobs() {
                    for op in job {
                        if core.is_completed_at(op, now) {
                            op_m.set(op.operation_id, 0, 1.0);
                        }
                    }
                }
            }
        }
        self.set.insert(FeatureKind::Operations, op_m);
        self.set.insert(FeatureKind::Machines, mach_m);
        self.set.insert(FeatureKind::Jobs, job_m);
    }
}

fn machine_completion(core: &DispatcherCore, now: Time) -> Vec<(usize, f64)> {
    let machines = core.instance().num_machines();
    let mut all_done = vec![true; machines];
    for job in core.instance().jobs() {
        for op in job {
            if !core.is_completed_at(op, now) {
                all_done[op.machine_id] = false;
            }
        }
    }
    all_done
        .into_iter()
        .enumerate()
        .map(|(m, done)| (m, f64::from(u8::from(done))))
        .collect()
}

fn job_completion(core: &DispatcherCore, now: Time) -> Vec<(usize, f64)> {
    core.instance()
        .jobs()
        .iter()
        .enumerate()
        .map(|(j, job)| {
            let done = job.iter().all(|op| core.is_completed_at(op, now));
            (j, f64::from(u8::from(done)))
        })
        .collect()
}

impl FeatureObserver for StatusObserver {
    fn update(&mut self, core: &DispatcherCore, _scheduled: &ScheduledOperation) {
        self.recompute(core);
    }
    fn reset(&mut self, core: &DispatcherCore) {
        self.recompute(core);
    }
    fn features(&self) -> &FeatureSet {
        &self.set
    }
    fn column_names(&self, _kind: FeatureKind) -> Vec<String> {
        vec![self.kind.name().into()]
    }
}

/// Incremental earliest-start times.
///
/// Maintains the absolute earliest start `S*` of every operation given the
/// dispatched prefix: dispatched operations keep their actual start; for the
/// rest, a forward pass per job anchored at the job frontier takes
/// `max(previous chain end, machine frontier)` at each position. On each
/// dispatch only the chains that can change are walked again (the dispatched
/// operation's job and every job with remaining work on its machine), which
/// reproduces the from-scratch forward pass exactly.
///
/// The emitted operation feature is `S* - t`; machine features take the
/// minimum over their undispatched operations (0 when none remain) and job
/// features the value of the job's next undispatched operation.
pub struct EarliestStartObserver {
    est: Vec<Time>,
    set: FeatureSet,
}

impl EarliestStartObserver {
    pub fn new(core: &DispatcherCore) -> Self {
        let mut observer = Self {
            est: vec![0; core.instance().num_operations()],
            set: FeatureSet::new(),
        };
        observer.reset(core);
        observer
    }

    /// The absolute earliest-start matrix, row per job.
    pub fn est_matrix(&self, core: &DispatcherCore) -> Vec<Vec<Time>> {
        core.instance()
            .jobs()
            .iter()
            .map(|job| job.iter().map(|op| self.est[op.operation_id]).collect())
            .collect()
    }

    fn walk_job(&mut self, core: &DispatcherCore, job_id: usize) {
        let job = core.instance().job(job_id);
        let start_pos = core.job_next_position()[job_id];
        let mut prev_end = core.job_frontier()[job_id];
        for op in &job[start_pos..] {
            let est = prev_end.max(core.machine_frontier()[op.machine_id]);
            self.est[op.operation_id] = est;
            prev_end = est + op.duration;
        }
    }

    fn recompute_features(&mut self, core: &DispatcherCore) {
        let instance = core.instance();
        let now = f64::from(core.current_time());
        let mut op_m = FeatureMatrix::zeros(instance.num_operations(), 1);
        for job in instance.jobs() {
            for op in job {
                op_m.set(op.operation_id, 0, f64::from(self.est[op.operation_id]) - now);
            }
        }
        let mut mach_m = FeatureMatrix::zeros(instance.num_machines(), 1);
        let mut mach_min = vec![f64::INFINITY; instance.num_machines()];
        for job in instance.jobs() {
            for op in job {
                if !core.is_dispatched(op) {
                    let value = f64::from(self.est[op.operation_id]) - now;
                    mach_min[op.machine_id] = mach_min[op.machine_id].min(value);
                }
            }
        }
        for (m, v) in mach_min.into_iter().enumerate() {
            mach_m.set(m, 0, if v.is_finite() { v } else { 0.0 });
        }
        let mut job_m = FeatureMatrix::zeros(instance.num_jobs(), 1);
        for (j, job) in instance.jobs().iter().enumerate() {
            let pos = core.job_next_position()[j];
            let value = if pos < job.len() {
                f64::from(self.est[job[pos].operation_id]) - now
            } else {
                0.0
            };
            job_m.set(j, 0, value);
        }
        self.set.insert(FeatureKind::Operations, op_m);
        self.set.insert(FeatureKind::Machines, mach_m);
        self.set.insert(FeatureKind::Jobs, job_m);
    }
}

impl FeatureObserver for EarliestStartObserver {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        let op = &scheduled.operation;
        self.est[op.operation_id] = scheduled.start_time;
        // the dispatched operation's job chain moved, and so may every job
        // with remaining work on the dispatched machine
        self.walk_job(core, op.job_id);
        let machine = scheduled.machine_id;
        for (job_id, job) in core.instance().jobs().iter().enumerate() {
            if job_id == op.job_id {
                continue;
            }
            let pos = core.job_next_position()[job_id];
            if job[pos..].iter().any(|o| o.machine_id == machine) {
                self.walk_job(core, job_id);
            }
        }
        self.recompute_features(core);
    }

    fn reset(&mut self, core: &DispatcherCore) {
        // prefix sums per job: no machine conflicts exist yet
        for job in core.instance().jobs() {
            let mut acc = 0;
            for op in job {
                self.est[op.operation_id] = acc;
                acc += op.duration;
            }
        }
        self.recompute_features(core);
    }

    fn features(&self) -> &FeatureSet {
        &self.set
    }

    fn column_names(&self, _kind: FeatureKind) -> Vec<String> {
        vec!["earliest_start_time".into()]
    }
}

/// Remaining processing time per operation, and per machine/job the total
/// duration of their undispatched operations.
pub struct DurationObserver {
    set: FeatureSet,
}

impl DurationObserver {
    pub fn new(core: &DispatcherCore) -> Self {
        let mut observer = Self {
            set: FeatureSet::new(),
        };
        observer.reset(core);
        observer
    }

    fn recompute(&mut self, core: &DispatcherCore) {
        let instance = core.instance();
        let now = core.current_time();
        let mut op_m = FeatureMatrix::zeros(instance.num_operations(), 1);
        let mut mach_m = FeatureMatrix::zeros(instance.num_machines(), 1);
        let mut job_m = FeatureMatrix::zeros(instance.num_jobs(), 1);
        for job in instance.jobs() {
            for op in job {
                let value = match core.dispatch_times(op) {
                    // remaining duration, clamped at zero for completed ops
                    Some((_, end)) => f64::from(end.saturating_sub(now)),
                    None => {
                        mach_m.set(op.machine_id, 0, mach_m.get(op.machine_id, 0) + f64::from(op.duration));
                        job_m.set(op.job_id, 0, job_m.get(op.job_id, 0) + f64::from(op.duration));
                        f64::from(op.duration)
                    }
                };
                op_m.set(op.operation_id, 0, value);
            }
        }
        self.set.insert(FeatureKind::Operations, op_m);
        self.set.insert(FeatureKind::Machines, mach_m);
        self.set.insert(FeatureKind::Jobs, job_m);
    }
}

impl FeatureObserver for DurationObserver {
    fn update(&mut self, core: &DispatcherCore, _scheduled: &ScheduledOperation) {
        self.recompute(core);
    }
    fn reset(&mut self, core: &DispatcherCore) {
        self.recompute(core);
    }
    fn features(&self) -> &FeatureSet {
        &self.set
    }
    fn column_names(&self, _kind: FeatureKind) -> Vec<String> {
        vec!["duration".into()]
    }
}

/// Position of each operation within the undispatched remainder of its job.
pub struct PositionInJobObserver {
    set: FeatureSet,
}

impl PositionInJobObserver {
    pub fn new(core: &DispatcherCore) -> Self {
        let mut observer = Self {
            set: FeatureSet::new(),
        };
        observer.reset(core);
        observer
    }

    fn recompute(&mut self, core: &DispatcherCore) {
        let instance = core.instance();
        let mut op_m = FeatureMatrix::zeros(instance.num_operations(), 1);
        for (j, job) in instance.jobs().iter().enumerate() {
            let dispatched = core.job_next_position()[j];
            for op in job {
                op_m.set(
                    op.operation_id,
                    0,
                    op.position_in_job as f64 - dispatched as f64,
                );
            }
        }
        self.set.insert(FeatureKind::Operations, op_m);
    }
}

impl FeatureObserver for PositionInJobObserver {
    fn update(&mut self, core: &DispatcherCore, _scheduled: &ScheduledOperation) {
        self.recompute(core);
    }
    fn reset(&mut self, core: &DispatcherCore) {
        self.recompute(core);
    }
    fn features(&self) -> &FeatureSet {
        &self.set
    }
    fn column_names(&self, _kind: FeatureKind) -> Vec<String> {
        vec!["position_in_job".into()]
    }
}

/// Counts of undispatched operations per machine and per job.
pub struct RemainingOperationsObserver {
    set: FeatureSet,
}

impl RemainingOperationsObserver {
    pub fn new(core: &DispatcherCore) -> Self {
        let mut observer = Self {
            set: FeatureSet::new(),
        };
        observer.reset(core);
        observer
    }

    fn recompute(&mut self, core: &DispatcherCore) {
        let instance = core.instance();
        let mut mach_m = FeatureMatrix::zeros(instance.num_machines(), 1);
        let mut job_m = FeatureMatrix::zeros(instance.num_jobs(), 1);
        for job in instance.jobs() {
            for op in job {
                if !core.is_dispatched(op) {
                    mach_m.set(op.machine_id, 0, mach_m.get(op.machine_id, 0) + 1.0);
                    job_m.set(op.job_id, 0, job_m.get(op.job_id, 0) + 1.0);
                }
            }
        }
        self.set.insert(FeatureKind::Machines, mach_m);
        self.set.insert(FeatureKind::Jobs, job_m);
    }
}

impl FeatureObserver for RemainingOperationsObserver {
    fn update(&mut self, core: &DispatcherCore, _scheduled: &ScheduledOperation) {
        self.recompute(core);
    }
    fn reset(&mut self, core: &DispatcherCore) {
        self.recompute(core);
    }
    fn features(&self) -> &FeatureSet {
        &self.set
    }
    fn column_names(&self, _kind: FeatureKind) -> Vec<String> {
        vec!["remaining_operations".into()]
    }
}

/// Named constructor set for the built-in observers; used by environment
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureObserverKind {
    IsReady,
    IsScheduled,
    IsCompleted,
    EarliestStart,
    Duration,
    PositionInJob,
    RemainingOperations,
}

impl FeatureObserverKind {
    pub fn build(&self, core: &DispatcherCore) -> Box<dyn FeatureObserver + Send> {
        match self {
            FeatureObserverKind::IsReady => Box::new(StatusObserver::new(StatusKind::Ready, core)),
            FeatureObserverKind::IsScheduled => {
                Box::new(StatusObserver::new(StatusKind::Scheduled, core))
            }
            FeatureObserverKind::IsCompleted => {
                Box::new(StatusObserver::new(StatusKind::Completed, core))
            }
            FeatureObserverKind::EarliestStart => Box::new(EarliestStartObserver::new(core)),
            FeatureObserverKind::Duration => Box::new(DurationObserver::new(core)),
            FeatureObserverKind::PositionInJob => Box::new(PositionInJobObserver::new(core)),
            FeatureObserverKind::RemainingOperations => {
                Box::new(RemainingOperationsObserver::new(core))
            }
        }
    }
}

/// Concatenates constituent observers' matrices horizontally, in
/// registration order. Optionally appends each operation's job feature row
/// to the operation matrix.
pub struct CompositeFeatures {
    constituents: Vec<Box<dyn FeatureObserver + Send>>,
    append_job_features_to_operations: bool,
    widths: BTreeMap<FeatureKind, Vec<usize>>,
    /// Job id of each operation row (rows are in job-major order).
    job_of_rows: Vec<usize>,
    error: Option<EnvError>,
    set: FeatureSet,
}

impl CompositeFeatures {
    pub fn new(
        core: &DispatcherCore,
        kinds: &[FeatureObserverKind],
        append_job_features_to_operations: bool,
    ) -> Self {
        let constituents: Vec<_> = kinds.iter().map(|k| k.build(core)).collect();
        Self::from_observers(core, constituents, append_job_features_to_operations)
    }

    pub fn from_observers(
        core: &DispatcherCore,
        constituents: Vec<Box<dyn FeatureObserver + Send>>,
        append_job_features_to_operations: bool,
    ) -> Self {
        let job_of_rows: Vec<usize> = core
            .instance()
            .jobs()
            .iter()
            .flatten()
            .map(|op| op.job_id)
            .collect();
        let mut widths: BTreeMap<FeatureKind, Vec<usize>> = BTreeMap::new();
        for kind in [
            FeatureKind::Operations,
            FeatureKind::Machines,
            FeatureKind::Jobs,
        ] {
            widths.insert(
                kind,
                constituents
                    .iter()
                    .map(|c| c.features().get(&kind).map_or(0, FeatureMatrix::cols))
                    .collect(),
            );
        }
        let mut composite = Self {
            constituents,
            append_job_features_to_operations,
            widths,
            job_of_rows,
            error: None,
            set: FeatureSet::new(),
        };
        composite.concat().expect("initial widths are consistent");
        composite
    }

    /// Re-concatenates constituent matrices; fails if a constituent's width
    /// changed mid-episode.
    fn concat(&mut self) -> Result<(), EnvError> {
        let mut set = FeatureSet::new();
        for kind in [
            FeatureKind::Operations,
            FeatureKind::Machines,
            FeatureKind::Jobs,
        ] {
            let mut rows = 0;
            let mut total_cols = 0;
            for (i, c) in self.constituents.iter().enumerate() {
                if let Some(m) = c.features().get(&kind) {
                    let expected = self.widths[&kind][i];
                    if m.cols() != expected {
                        return Err(EnvError::WidthMismatch(format!(
                            "constituent {i} changed {kind:?} width from {expected} to {}",
                            m.cols()
                        )));
                    }
                    rows = rows.max(m.rows());
                    total_cols += m.cols();
                }
            }
            if total_cols == 0 {
                continue;
            }
            let mut matrix = FeatureMatrix::zeros(rows, total_cols);
            let mut offset = 0;
            for c in &self.constituents {
                if let Some(m) = c.features().get(&kind) {
                    for r in 0..m.rows() {
                        for col in 0..m.cols() {
                            matrix.set(r, offset + col, m.get(r, col));
                        }
                    }
                    offset += m.cols();
                }
            }
            set.insert(kind, matrix);
        }
        if self.append_job_features_to_operations {
            if let (Some(ops), Some(jobs)) =
                (set.get(&FeatureKind::Operations), set.get(&FeatureKind::Jobs))
            {
                let mut widened =
                    FeatureMatrix::zeros(ops.rows(), ops.cols() + jobs.cols());
                let op_cols = ops.cols();
                for r in 0..ops.rows() {
                    for c in 0..op_cols {
                        widened.set(r, c, ops.get(r, c));
                    }
                    let job = self.job_of_rows[r];
                    for c in 0..jobs.cols() {
                        widened.set(r, op_cols + c, jobs.get(job, c));
                    }
                }
                set.insert(FeatureKind::Operations, widened);
            }
        }
        self.set = set;
        Ok(())
    }

    /// Surfaces a width mismatch detected during the last update, if any.
    pub fn take_error(&mut self) -> Option<EnvError> {
        self.error.take()
    }
}

impl FeatureObserver for CompositeFeatures {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        for c in &mut self.constituents {
            c.update(core, scheduled);
        }
        if let Err(e) = self.concat() {
            self.error = Some(e);
        }
    }

    fn reset(&mut self, core: &DispatcherCore) {
        for c in &mut self.constituents {
            c.reset(core);
        }
        if let Err(e) = self.concat() {
            self.error = Some(e);
        }
    }

    fn features(&self) -> &FeatureSet {
        &self.set
    }

    fn column_names(&self, kind: FeatureKind) -> Vec<String> {
        let mut names: Vec<String> = self
            .constituents
            .iter()
            .flat_map(|c| {
                c.features()
                    .get(&kind)
                    .map(|_| c.column_names(kind))
                    .unwrap_or_default()
            })
            .collect();
        if kind == FeatureKind::Operations && self.append_job_features_to_operations {
            for c in &self.constituents {
                if c.features().get(&FeatureKind::Jobs).is_some() {
                    for n in c.column_names(FeatureKind::Jobs) {
                        names.push(format!("job_{n}"));
                    }
                }
            }
        }
        names
    }
}
