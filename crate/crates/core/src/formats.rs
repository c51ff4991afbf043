//! Taillard and JSON instance/schedule formats, plus the vendored benchmark
//! suite.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::FormatError;
use crate::instance::{Instance, JobId, MachineId, Metadata, Time};
use crate::schedule::Schedule;

/// Plain-data form of an instance, mirroring the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub name: String,
    pub duration_matrix: Vec<Vec<Time>>,
    pub machines_matrix: Vec<Vec<MachineId>>,
    #[serde(default)]
    pub metadata: Metadata,
}

impl InstanceDocument {
    pub fn from_instance(instance: &Instance) -> Self {
        Self {
            name: instance.name().to_string(),
            duration_matrix: instance.duration_matrix(),
            machines_matrix: instance.machines_matrix(),
            metadata: instance.metadata().clone(),
        }
    }

    pub fn into_instance(self) -> Result<Instance, FormatError> {
        Ok(Instance::from_matrices(
            self.name,
            &self.duration_matrix,
            &self.machines_matrix,
            self.metadata,
        )?)
    }
}

/// Plain-data form of a schedule: the instance plus per-machine job
/// sequences (the solution matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub instance: InstanceDocument,
    pub job_sequences: Vec<Vec<JobId>>,
    #[serde(default)]
    pub metadata: Metadata,
}

impl ScheduleDocument {
    pub fn from_schedule(schedule: &Schedule) -> Self {
        Self {
            instance: InstanceDocument::from_instance(schedule.instance()),
            job_sequences: schedule.job_sequences(),
            metadata: schedule.metadata.clone(),
        }
    }

    /// Rebuilds the semi-active schedule encoded by `job_sequences`.
    pub fn into_schedule(self) -> Result<Schedule, FormatError> {
        let metadata = self.metadata;
        let instance = self.instance.into_instance()?.into_arc();
        let mut schedule = Schedule::from_job_sequences(instance, &self.job_sequences)?;
        schedule.metadata = metadata;
        Ok(schedule)
    }
}

/// Parses the Taillard text format: a `jobs machines` header followed by one
/// line per job of `machine duration` pairs. `#` starts a comment.
pub fn parse_taillard(text: &str) -> Result<Instance, FormatError> {
    parse_taillard_named(text, "taillard", false)
}

/// Taillard parser with an explicit name and support for corpora that count
/// machines from 1.
pub fn parse_taillard_named(
    text: &str,
    name: &str,
    one_based_machines: bool,
) -> Result<Instance, FormatError> {
    let mut rows: Vec<(usize, Vec<i64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>().map_err(|_| FormatError::Parse {
                    line: idx + 1,
                    reason: format!("expected integer, got '{tok}'"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((idx + 1, nums));
    }
    let Some((header_line, header)) = rows.first() else {
        return Err(FormatError::Parse {
            line: 1,
            reason: "empty input".into(),
        });
    };
    if header.len() != 2 || header[0] <= 0 || header[1] <= 0 {
        return Err(FormatError::Parse {
            line: *header_line,
            reason: "header must be two positive integers: jobs machines".into(),
        });
    }
    let (num_jobs, num_machines) = (header[0] as usize, header[1] as usize);
    if rows.len() - 1 != num_jobs {
        return Err(FormatError::Parse {
            line: rows.last().map(|r| r.0).unwrap_or(1),
            reason: format!("expected {num_jobs} job lines, found {}", rows.len() - 1),
        });
    }
    let mut durations = Vec::with_capacity(num_jobs);
    let mut machines = Vec::with_capacity(num_jobs);
    for (line, nums) in &rows[1..] {
        if nums.is_empty() || nums.len() % 2 != 0 {
            return Err(FormatError::Parse {
                line: *line,
                reason: format!("job line must hold machine/duration pairs, got {} tokens", nums.len()),
            });
        }
        let mut dur_row = Vec::with_capacity(nums.len() / 2);
        let mut mach_row = Vec::with_capacity(nums.len() / 2);
        for pair in nums.chunks(2) {
            let mut machine = pair[0];
            let duration = pair[1];
            if one_based_machines {
                machine -= 1;
            }
            if machine < 0 || machine as usize >= num_machines {
                return Err(FormatError::Parse {
                    line: *line,
                    reason: format!("machine id {} out of range 0..{num_machines}", pair[0]),
                });
            }
            if duration < 0 {
                return Err(FormatError::Parse {
                    line: *line,
                    reason: format!("negative duration {duration}"),
                });
            }
            mach_row.push(machine as usize);
            dur_row.push(duration as Time);
        }
        durations.push(dur_row);
        machines.push(mach_row);
    }
    Ok(Instance::from_matrices(
        name,
        &durations,
        &machines,
        Metadata::new(),
    )?)
}

/// Writes the Taillard text format (0-based machine ids). Metadata is not
/// representable in this format and is dropped.
pub fn write_taillard(instance: &Instance) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} {}\n",
        instance.num_jobs(),
        instance.num_machines()
    ));
    for job in instance.jobs() {
        let line: Vec<String> = job
            .iter()
            .flat_map(|op| [op.machine_id.to_string(), op.duration.to_string()])
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn take_metadata(value: &mut serde_json::Map<String, Value>) -> Metadata {
    match value.remove("metadata") {
        Some(Value::Object(map)) => {
            let mut metadata = map;
            // unknown top-level keys are preserved under metadata
            for (k, v) in std::mem::take(value) {
                metadata.entry(k).or_insert(v);
            }
            metadata
        }
        _ => std::mem::take(value),
    }
}

/// Parses an instance from its JSON document form. Unknown top-level keys
/// are preserved under metadata.
pub fn parse_json_instance(text: &str) -> Result<Instance, FormatError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| FormatError::Serialization(e.to_string()))?;
    instance_from_value(value)
}

fn instance_from_value(value: Value) -> Result<Instance, FormatError> {
    let Value::Object(mut map) = value else {
        return Err(FormatError::Serialization("expected a JSON object".into()));
    };
    let name = match map.remove("name") {
        Some(Value::String(s)) => s,
        _ => {
            return Err(FormatError::Serialization(
                "missing string field 'name'".into(),
            ))
        }
    };
    let durations: Vec<Vec<Time>> = serde_json::from_value(
        map.remove("duration_matrix")
            .ok_or_else(|| FormatError::Serialization("missing 'duration_matrix'".into()))?,
    )
    .map_err(|e| FormatError::Serialization(e.to_string()))?;
    let machines: Vec<Vec<MachineId>> = serde_json::from_value(
        map.remove("machines_matrix")
            .ok_or_else(|| FormatError::Serialization("missing 'machines_matrix'".into()))?,
    )
    .map_err(|e| FormatError::Serialization(e.to_string()))?;
    let metadata = take_metadata(&mut map);
    Ok(Instance::from_matrices(name, &durations, &machines, metadata)?)
}

pub fn write_json_instance(instance: &Instance) -> Result<String, FormatError> {
    serde_json::to_string_pretty(&InstanceDocument::from_instance(instance))
        .map_err(|e| FormatError::Serialization(e.to_string()))
}

pub fn parse_json_schedule(text: &str) -> Result<Schedule, FormatError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| FormatError::Serialization(e.to_string()))?;
    let Value::Object(mut map) = value else {
        return Err(FormatError::Serialization("expected a JSON object".into()));
    };
    let instance = instance_from_value(
        map.remove("instance")
            .ok_or_else(|| FormatError::Serialization("missing 'instance'".into()))?,
    )?
    .into_arc();
    let job_sequences: Vec<Vec<JobId>> = serde_json::from_value(
        map.remove("job_sequences")
            .ok_or_else(|| FormatError::Serialization("missing 'job_sequences'".into()))?,
    )
    .map_err(|e| FormatError::Serialization(e.to_string()))?;
    let metadata = take_metadata(&mut map);
    let mut schedule = Schedule::from_job_sequences(instance, &job_sequences)?;
    schedule.metadata = metadata;
    Ok(schedule)
}

pub fn write_json_schedule(schedule: &Schedule) -> Result<String, FormatError> {
    serde_json::to_string_pretty(&ScheduleDocument::from_schedule(schedule))
        .map_err(|e| FormatError::Serialization(e.to_string()))
}

/// The vendored benchmark collection, compiled into the binary.
static BENCHMARKS: OnceLock<BTreeMap<String, Arc<Instance>>> = OnceLock::new();

fn benchmarks() -> &'static BTreeMap<String, Arc<Instance>> {
    BENCHMARKS.get_or_init(|| {
        let raw = include_str!("../data/benchmarks.json");
        let docs: BTreeMap<String, InstanceDocument> =
            serde_json::from_str(raw).expect("vendored benchmark data is well-formed");
        docs.into_iter()
            .map(|(name, doc)| {
                let instance = doc.into_instance().expect("vendored benchmark is valid");
                (name, instance.into_arc())
            })
            .collect()
    })
}

/// Loads a vendored benchmark instance such as `ft06` or `ta41`. Instance
/// metadata carries the known optimum and/or best bounds.
pub fn load_benchmark(name: &str) -> Result<Arc<Instance>, FormatError> {
    benchmarks()
        .get(name)
        .cloned()
        .ok_or_else(|| FormatError::UnknownInstance(name.into()))
}

/// Names of all vendored benchmark instances, sorted.
pub fn list_benchmarks() -> Vec<String> {
    benchmarks().keys().cloned().collect()
}
