//! Solutions: scheduled operations, schedules, semi-active construction and
//! validation.

use std::sync::Arc;

use crate::error::CoreError;
use crate::instance::{Instance, JobId, MachineId, Metadata, Operation, Time};

/// An operation bound to a machine and a start time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledOperation {
    pub operation: Operation,
    pub machine_id: MachineId,
    pub start_time: Time,
}

impl ScheduledOperation {
    pub fn end_time(&self) -> Time {
        self.start_time + self.operation.duration
    }

    pub fn job_id(&self) -> JobId {
        self.operation.job_id
    }
}

/// A (possibly partial) solution: one ordered operation list per machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    instance: Arc<Instance>,
    machine_sequences: Vec<Vec<ScheduledOperation>>,
    pub metadata: Metadata,
}

impl Schedule {
    pub fn empty(instance: Arc<Instance>) -> Self {
        let machines = instance.num_machines();
        Self {
            instance,
            machine_sequences: vec![Vec::new(); machines],
            metadata: Metadata::new(),
        }
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn machine_sequences(&self) -> &[Vec<ScheduledOperation>] {
        &self.machine_sequences
    }

    /// Appends an already-placed operation to its machine sequence. The
    /// schedule stores what it is given; start-time policy lives in the
    /// dispatcher.
    pub fn add(&mut self, scheduled: ScheduledOperation) {
        self.machine_sequences[scheduled.machine_id].push(scheduled);
    }

    pub fn num_scheduled_operations(&self) -> usize {
        self.machine_sequences.iter().map(Vec::len).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.num_scheduled_operations() == self.instance.num_operations()
    }

    /// Maximum end time over all scheduled operations; 0 when empty.
    pub fn makespan(&self) -> Time {
        self.machine_sequences
            .iter()
            .flatten()
            .map(ScheduledOperation::end_time)
            .max()
            .unwrap_or(0)
    }

    /// Per-machine job-visit sequences (the solution matrix): entry `m`
    /// lists the job ids of machine `m`'s operations in processing order.
    pub fn job_sequences(&self) -> Vec<Vec<JobId>> {
        self.machine_sequences
            .iter()
            .map(|seq| seq.iter().map(ScheduledOperation::job_id).collect())
            .collect()
    }

    /// Builds the unique semi-active schedule that follows the given
    /// per-machine job sequences: every operation starts as early as its job
    /// predecessor and machine predecessor allow.
    ///
    /// Machines able to advance are served in ascending machine id; the
    /// result does not depend on that order, it only makes iteration
    /// deterministic. Job ids may repeat within a row (recirculation); each
    /// entry is consumed per visit.
    pub fn from_job_sequences(
        instance: Arc<Instance>,
        y: &[Vec<JobId>],
    ) -> Result<Self, CoreError> {
        let num_machines = instance.num_machines();
        if y.len() != num_machines {
            return Err(CoreError::Shape(format!(
                "job sequences have {} rows, instance has {} machines",
                y.len(),
                num_machines
            )));
        }
        // visit counts must match the instance exactly
        let mut expected = vec![vec![0usize; instance.num_jobs()]; num_machines];
        for job in instance.jobs() {
            for op in job {
                expected[op.machine_id][op.job_id] += 1;
            }
        }
        let mut given = vec![vec![0usize; instance.num_jobs()]; num_machines];
        for (m, row) in y.iter().enumerate() {
            for &job in row {
                if job >= instance.num_jobs() {
                    return Err(CoreError::Shape(format!(
                        "machine {m} references job {job}, instance has {} jobs",
                        instance.num_jobs()
                    )));
                }
                given[m][job] += 1;
            }
        }
        if expected != given {
            return Err(CoreError::Shape(
                "per-machine job visit counts do not match the instance".into(),
            ));
        }

        let mut schedule = Self::empty(Arc::clone(&instance));
        let mut machine_cursor = vec![0usize; num_machines];
        let mut machine_frontier = vec![0 as Time; num_machines];
        let mut job_frontier = vec![0 as Time; instance.num_jobs()];
        let mut job_next = vec![0usize; instance.num_jobs()];
        let total = instance.num_operations();
        let mut placed = 0;
        while placed < total {
            let mut advanced = false;
            for m in 0..num_machines {
                let cursor = machine_cursor[m];
                if cursor >= y[m].len() {
                    continue;
                }
                let job = y[m][cursor];
                let pos = job_next[job];
                let op = instance.job(job)[pos];
                // the job's next operation must be the one this row expects
                if op.machine_id != m {
                    continue;
                }
                let start = job_frontier[job].max(machine_frontier[m]);
                schedule.add(ScheduledOperation {
                    operation: op,
                    machine_id: m,
                    start_time: start,
                });
                let end = start + op.duration;
                job_frontier[job] = end;
                machine_frontier[m] = end;
                job_next[job] += 1;
                machine_cursor[m] += 1;
                placed += 1;
                advanced = true;
            }
            if !advanced {
                return Err(CoreError::Deadlock);
            }
        }
        Ok(schedule)
    }

    /// Checks validity, completeness, semi-activeness and the non-delay
    /// property. Violations are reported, never raised.
    pub fn verify(&self) -> VerifyReport {
        let instance = &self.instance;
        let mut violations = Vec::new();

        // every op at most once, machine matches, count for completeness
        let mut seen = vec![false; instance.num_operations()];
        for (m, seq) in self.machine_sequences.iter().enumerate() {
            for s in seq {
                if s.machine_id != m {
                    violations.push(format!(
                        "operation {} stored under machine {m} but bound to {}",
                        s.operation.operation_id, s.machine_id
                    ));
                }
                if s.machine_id != s.operation.machine_id {
                    violations.push(format!(
                        "operation {} scheduled on machine {} but requires {}",
                        s.operation.operation_id, s.machine_id, s.operation.machine_id
                    ));
                }
                if seen[s.operation.operation_id] {
                    violations.push(format!(
                        "operation {} scheduled more than once",
                        s.operation.operation_id
                    ));
                }
                seen[s.operation.operation_id] = true;
            }
        }
        let complete = seen.iter().all(|&b| b);

        // machine sequences: non-decreasing starts, no overlap
        for (m, seq) in self.machine_sequences.iter().enumerate() {
            for pair in seq.windows(2) {
                if pair[1].start_time < pair[0].start_time {
                    violations.push(format!("machine {m}: starts decrease"));
                }
                if pair[1].start_time < pair[0].end_time() {
                    violations.push(format!(
                        "machine {m}: operations {} and {} overlap",
                        pair[0].operation.operation_id, pair[1].operation.operation_id
                    ));
                }
            }
        }

        // job precedence over the scheduled subset
        let mut by_op: Vec<Option<&ScheduledOperation>> =
            vec![None; instance.num_operations()];
        for s in self.machine_sequences.iter().flatten() {
            by_op[s.operation.operation_id] = Some(s);
        }
        for job in instance.jobs() {
            for pair in job.windows(2) {
                if let (Some(a), Some(b)) = (
                    by_op[pair[0].operation_id],
                    by_op[pair[1].operation_id],
                ) {
                    if b.start_time < a.end_time() {
                        violations.push(format!(
                            "job {}: operation {} starts before {} ends",
                            pair[0].job_id, pair[1].operation_id, pair[0].operation_id
                        ));
                    }
                }
            }
        }
        let valid = violations.is_empty();

        // semi-active: no operation can start earlier with sequences fixed
        let mut semi_active = valid;
        if valid {
            'outer: for seq in &self.machine_sequences {
                for (idx, s) in seq.iter().enumerate() {
                    let machine_ready = if idx == 0 { 0 } else { seq[idx - 1].end_time() };
                    let job_ready = if s.operation.position_in_job == 0 {
                        0
                    } else {
                        let pred_id = s.operation.operation_id - 1;
                        match by_op[pred_id] {
                            Some(p) => p.end_time(),
                            None => continue,
                        }
                    };
                    if s.start_time != machine_ready.max(job_ready) {
                        semi_active = false;
                        break 'outer;
                    }
                }
            }
        }

        // non-delay: no machine idles while an operation for it is ready
        let mut non_delay = valid;
        if valid {
            'nd: for (m, seq) in self.machine_sequences.iter().enumerate() {
                // idle gaps: before the first op and between consecutive ops
                let mut gaps: Vec<(Time, Time)> = Vec::new();
                if let Some(first) = seq.first() {
                    if first.start_time > 0 {
                        gaps.push((0, first.start_time));
                    }
                }
                for pair in seq.windows(2) {
                    if pair[1].start_time > pair[0].end_time() {
                        gaps.push((pair[0].end_time(), pair[1].start_time));
                    }
                }
                for &(g0, g1) in &gaps {
                    for s in seq {
                        if s.start_time < g1 {
                            continue; // started before the gap closed
                        }
                        let ready = if s.operation.position_in_job == 0 {
                            0
                        } else {
                            match by_op[s.operation.operation_id - 1] {
                                Some(p) => p.end_time(),
                                None => continue,
                            }
                        };
                        if ready.max(g0) < g1 {
                            non_delay = false;
                            break 'nd;
                        }
                    }
                }
                let _ = m;
            }
        }

        VerifyReport {
            valid,
            complete,
            semi_active,
            non_delay,
            violations,
        }
    }
}

/// Outcome of [`Schedule::verify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    /// Job precedence and machine non-overlap hold.
    pub valid: bool,
    /// Every operation appears exactly once.
    pub complete: bool,
    /// No single operation can start earlier with all sequences fixed.
    pub semi_active: bool,
    /// No machine idles while an operation for it could start.
    pub non_delay: bool,
    pub violations: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{furniture, two_job};

    fn furniture_optimal() -> Schedule {
        let y = vec![vec![2, 0, 1], vec![0, 1, 2], vec![2, 0, 1]];
        Schedule::from_job_sequences(furniture(), &y).unwrap()
    }

    #[test]
    fn empty_schedule_has_zero_makespan() {
        assert_eq!(Schedule::empty(furniture()).makespan(), 0);
    }

    #[test]
    fn furniture_optimal_makespan_is_ten() {
        assert_eq!(furniture_optimal().makespan(), 10);
    }

    #[test]
    fn single_operation_starts_at_zero() {
        let inst = Instance::from_matrices(
            "one",
            &[vec![4]],
            &[vec![0]],
            Metadata::new(),
        )
        .unwrap()
        .into_arc();
        let s = Schedule::from_job_sequences(inst, &[vec![0]]).unwrap();
        assert_eq!(s.machine_sequences()[0][0].start_time, 0);
        assert_eq!(s.makespan(), 4);
    }

    #[test]
    fn two_job_optimal_reaches_nine() {
        let y = vec![vec![0], vec![0, 1], vec![1, 0]];
        let s = Schedule::from_job_sequences(two_job(), &y).unwrap();
        assert_eq!(s.makespan(), 9);
        let report = s.verify();
        assert!(report.valid && report.complete && report.semi_active);
        // the optimal schedule reserves machine 1, so it is not non-delay
        assert!(!report.non_delay);
    }

    #[test]
    fn infeasible_sequences_deadlock() {
        // machine 0 wants job 1 first, but job 1 starts on machine 2
        let y = vec![vec![1, 0, 2], vec![0, 1, 2], vec![0, 1, 2]];
        // swap to a genuinely cyclic requirement
        let y_bad = vec![vec![0, 1, 2], vec![2, 0, 1], vec![0, 2, 1]];
        let _ = y;
        let err = Schedule::from_job_sequences(furniture(), &y_bad).unwrap_err();
        assert!(matches!(err, CoreError::Deadlock));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let err = Schedule::from_job_sequences(furniture(), &[vec![0]]).unwrap_err();
        assert!(matches!(err, CoreError::Shape(_)));
    }

    #[test]
    fn verify_flags_overlap() {
        let inst = furniture();
        let mut s = Schedule::empty(Arc::clone(&inst));
        let job0 = inst.job(0);
        let job1 = inst.job(1);
        s.add(ScheduledOperation {
            operation: job0[0],
            machine_id: 0,
            start_time: 0,
        });
        s.add(ScheduledOperation {
            operation: job1[0],
            machine_id: 0,
            start_time: 1, // overlaps the duration-2 op above
        });
        let report = s.verify();
        assert!(!report.valid);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn furniture_optimal_verifies() {
        let report = furniture_optimal().verify();
        assert!(report.valid);
        assert!(report.complete);
        assert!(report.semi_active);
    }

    #[test]
    fn job_sequence_extraction_round_trips() {
        let s = furniture_optimal();
        let y = s.job_sequences();
        let rebuilt = Schedule::from_job_sequences(furniture(), &y).unwrap();
        assert_eq!(rebuilt.makespan(), s.makespan());
    }
}
