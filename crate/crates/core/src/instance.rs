//! Problem data model: operations and instances.

use std::sync::Arc;

use serde_json::{Map, Value};

use crate::error::CoreError;

/// Integer time unit. All durations and start times are integral.
pub type Time = u32;
pub type JobId = usize;
pub type MachineId = usize;
/// Global operation index in job-major order.
pub type OperationId = usize;

/// Open key-value metadata attached to instances and schedules.
pub type Metadata = Map<String, Value>;

/// A single task: one step of a job, bound to a machine, with a duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Operation {
    pub job_id: JobId,
    /// 0-based index of this operation within its job.
    pub position_in_job: usize,
    pub machine_id: MachineId,
    pub duration: Time,
    /// Global index: sum of preceding job lengths plus `position_in_job`.
    pub operation_id: OperationId,
}

/// An immutable job-shop problem definition.
///
/// Jobs are ordered lists of operations; within each job the operations must
/// be processed in order. Construct with [`Instance::from_matrices`] or the
/// parsers in [`crate::formats`], then share via `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    jobs: Vec<Vec<Operation>>,
    metadata: Metadata,
    num_machines: usize,
    num_operations: usize,
}

impl Instance {
    /// Builds an instance from congruent duration and machine matrices.
    ///
    /// Row `i` of both matrices describes job `i` in processing order.
    pub fn from_matrices(
        name: impl Into<String>,
        durations: &[Vec<Time>],
        machines: &[Vec<MachineId>],
        metadata: Metadata,
    ) -> Result<Self, CoreError> {
        if durations.is_empty() {
            return Err(CoreError::EmptyInstance);
        }
        if durations.len() != machines.len() {
            return Err(CoreError::Shape(format!(
                "duration matrix has {} rows, machines matrix has {}",
                durations.len(),
                machines.len()
            )));
        }
        let num_machines = machines
            .iter()
            .flatten()
            .copied()
            .max()
            .map_or(0, |m| m + 1);
        let mut jobs = Vec::with_capacity(durations.len());
        let mut operation_id = 0;
        for (job_id, (dur_row, mach_row)) in durations.iter().zip(machines).enumerate() {
            if dur_row.is_empty() {
                return Err(CoreError::EmptyJob(job_id));
            }
            if dur_row.len() != mach_row.len() {
                return Err(CoreError::Shape(format!(
                    "job {job_id}: {} durations vs {} machines",
                    dur_row.len(),
                    mach_row.len()
                )));
            }
            let mut ops = Vec::with_capacity(dur_row.len());
            for (position_in_job, (&duration, &machine_id)) in
                dur_row.iter().zip(mach_row).enumerate()
            {
                ops.push(Operation {
                    job_id,
                    position_in_job,
                    machine_id,
                    duration,
                    operation_id,
                });
                operation_id += 1;
            }
            jobs.push(ops);
        }
        Ok(Self {
            name: name.into(),
            jobs,
            metadata,
            num_machines,
            num_operations: operation_id,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn set_metadata(&mut self, metadata: Metadata) {
        self.metadata = metadata;
    }

    pub fn jobs(&self) -> &[Vec<Operation>] {
        &self.jobs
    }

    pub fn job(&self, job: JobId) -> &[Operation] {
        &self.jobs[job]
    }

    pub fn num_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn num_machines(&self) -> usize {
        self.num_machines
    }

    pub fn num_operations(&self) -> usize {
        self.num_operations
    }

    /// Looks an operation up by its global id.
    pub fn operation(&self, id: OperationId) -> Option<&Operation> {
        // job-major order: scan is fine for the sizes we handle, but keep it
        // O(#jobs) by walking row offsets.
        let mut offset = 0;
        for job in &self.jobs {
            if id < offset + job.len() {
                return Some(&job[id - offset]);
            }
            offset += job.len();
        }
        None
    }

    /// Duration matrix, row per job.
    pub fn duration_matrix(&self) -> Vec<Vec<Time>> {
        self.jobs
            .iter()
            .map(|j| j.iter().map(|o| o.duration).collect())
            .collect()
    }

    /// Machine matrix, row per job.
    pub fn machines_matrix(&self) -> Vec<Vec<MachineId>> {
        self.jobs
            .iter()
            .map(|j| j.iter().map(|o| o.machine_id).collect())
            .collect()
    }

    /// Aggregate workload statistics.
    pub fn stats(&self) -> InstanceStats {
        let mut machine_loads = vec![0; self.num_machines];
        let mut job_durations = Vec::with_capacity(self.jobs.len());
        let mut max_duration = 0;
        for job in &self.jobs {
            let mut total = 0;
            for op in job {
                machine_loads[op.machine_id] += op.duration;
                total += op.duration;
                max_duration = max_duration.max(op.duration);
            }
            job_durations.push(total);
        }
        InstanceStats {
            machine_loads,
            job_durations,
            max_duration,
            num_operations: self.num_operations,
        }
    }

    pub fn into_arc(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Workload summary produced by [`Instance::stats`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceStats {
    /// Total processing time assigned to each machine.
    pub machine_loads: Vec<Time>,
    /// Total processing time of each job.
    pub job_durations: Vec<Time>,
    pub max_duration: Time,
    pub num_operations: usize,
}

/// The three-job instance used as a running example throughout the tests:
/// a table, a chair and a cabinet moving through cutting, sanding and
/// assembly stations.
#[cfg(test)]
pub(crate) fn furniture() -> Arc<Instance> {
    Instance::from_matrices(
        "furniture",
        &[vec![2, 2, 2], vec![1, 1, 1], vec![2, 3, 3]],
        &[vec![0, 1, 2], vec![0, 1, 2], vec![0, 2, 1]],
        Metadata::new(),
    )
    .unwrap()
    .into_arc()
}

/// Two-job instance where reserving an operation beats dispatching
/// immediately (used in filter and solver tests).
#[cfg(test)]
pub(crate) fn two_job() -> Arc<Instance> {
    Instance::from_matrices(
        "two-job",
        &[vec![3, 1, 3], vec![2, 5]],
        &[vec![0, 1, 2], vec![2, 1]],
        Metadata::new(),
    )
    .unwrap()
    .into_arc()
}
