//! Reset/step sequential-decision environments over a single instance and
//! over an instance distribution, the resource-task observation remapper,
//! and the binary observation record format.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dispatching::{Dispatcher, ObserverHandle, ReadyFilter};
use crate::error::EnvError;
use crate::features::{
    normalize_feature_set, CompositeFeatures, FeatureKind, FeatureObserver, FeatureObserverKind,
    FeatureMatrix, FeatureSet,
};
use crate::generation::InstanceGenerator;
use crate::graphs::{GraphUpdater, NodePayload, NodeType, SchedulingGraph, UpdateStrategy};
use crate::instance::{Instance, JobId, MachineId, Operation, OperationId};
use crate::rewards::{AnyReward, RewardKind};
use crate::schedule::ScheduledOperation;

/// Observer wrapper so the composite participates in dispatcher
/// notifications.
struct CompositeObserver(CompositeFeatures);

impl crate::dispatching::DispatcherObserver for CompositeObserver {
    fn update(
        &mut self,
        core: &crate::dispatching::DispatcherCore,
        scheduled: &ScheduledOperation,
    ) {
        self.0.update(core, scheduled);
    }
    fn reset(&mut self, core: &crate::dispatching::DispatcherCore) {
        self.0.reset(core);
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

/// One entry of the action listing carried in observation info.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvailableAction {
    pub operation_id: OperationId,
    pub machine_id: MachineId,
    pub job_id: JobId,
}

/// Side data attached to every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationInfo {
    pub feature_columns: BTreeMap<String, Vec<String>>,
    pub available_actions: Vec<AvailableAction>,
}

/// A full observation: removal mask over the initial node set, COO edge
/// list over global node ids, and per-kind feature matrices holding the
/// active entities (ascending original id).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBundle {
    pub removed_nodes: Vec<bool>,
    /// Two rows (source, destination), one column per edge. Padded columns
    /// hold -1.
    pub edge_index: Vec<[i64; 2]>,
    pub features: BTreeMap<FeatureKind, FeatureMatrix>,
    pub info: ObservationInfo,
}

/// An agent action: a job plus the machine for its next operation. Machine
/// `-1` is allowed when the designated operation has a single machine (the
/// classical case).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub job_id: JobId,
    pub machine_id: i64,
}

impl Action {
    pub fn new(job_id: JobId, machine_id: i64) -> Self {
        Self { job_id, machine_id }
    }
}

/// Result of an environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: ObservationBundle,
    pub reward: f64,
    pub terminated: bool,
    /// Always false: episodes end exactly when the schedule completes.
    pub truncated: bool,
    pub scheduled: ScheduledOperation,
}

/// Environment configuration knobs.
#[derive(Debug, Clone)]
pub struct SingleEnvConfig {
    pub feature_observers: Vec<FeatureObserverKind>,
    pub append_job_features_to_operations: bool,
    pub reward: RewardKind,
    pub update_strategy: UpdateStrategy,
    pub remove_completed_machine_nodes: bool,
    pub remove_completed_job_nodes: bool,
    pub filter: ReadyFilter,
    pub use_padding: bool,
    /// Normalize each emitted kind matrix by its max absolute value.
    pub normalize: bool,
}

impl Default for SingleEnvConfig {
    fn default() -> Self {
        Self {
            feature_observers: vec![
                FeatureObserverKind::IsScheduled,
                FeatureObserverKind::EarliestStart,
                FeatureObserverKind::Duration,
                FeatureObserverKind::PositionInJob,
                FeatureObserverKind::RemainingOperations,
            ],
            append_job_features_to_operations: false,
            reward: RewardKind::Makespan,
            update_strategy: UpdateStrategy::Residual,
            remove_completed_machine_nodes: false,
            remove_completed_job_nodes: false,
            filter: ReadyFilter::DominatedOperations,
            use_padding: false,
            normalize: false,
        }
    }
}

/// Reset/step environment over one instance and one initial graph.
pub struct SingleEnv {
    instance: Arc<Instance>,
    config: SingleEnvConfig,
    dispatcher: Dispatcher,
    features: ObserverHandle<CompositeObserver>,
    updater: ObserverHandle<GraphUpdater>,
    reward: ObserverHandle<AnyReward>,
    /// Padding targets: (nodes, edges, rows per kind).
    pad_nodes: usize,
    pad_edges: usize,
    pad_rows: BTreeMap<FeatureKind, usize>,
}

impl SingleEnv {
    pub fn new(
        instance: Arc<Instance>,
        graph: SchedulingGraph,
        config: SingleEnvConfig,
    ) -> Result<Self, EnvError> {
        let mut dispatcher =
            Dispatcher::with_filter(Arc::clone(&instance), config.filter.clone());
        let kinds = config.feature_observers.clone();
        let append = config.append_job_features_to_operations;
        let features =
            dispatcher.subscribe(|core| CompositeObserver(CompositeFeatures::new(core, &kinds, append)));
        let strategy = config.update_strategy;
        let (rm, rj) = (
            config.remove_completed_machine_nodes,
            config.remove_completed_job_nodes,
        );
        let updater = dispatcher.subscribe(|_| GraphUpdater::new(graph, strategy, rm, rj));
        let reward_kind = config.reward;
        let reward = dispatcher.subscribe(|core| AnyReward::new(reward_kind, core));
        let initial = dispatcher.observer(updater).initial_graph();
        let pad_nodes = initial.nodes().len();
        let pad_edges = initial.num_edges();
        let mut pad_rows = BTreeMap::new();
        pad_rows.insert(FeatureKind::Operations, instance.num_operations());
        pad_rows.insert(FeatureKind::Machines, instance.num_machines());
        pad_rows.insert(FeatureKind::Jobs, instance.num_jobs());
        Ok(Self {
            instance,
            config,
            dispatcher,
            features,
            updater,
            reward,
            pad_nodes,
            pad_edges,
            pad_rows,
        })
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn dispatcher(&self) -> &Dispatcher {
        &self.dispatcher
    }

    pub fn graph(&self) -> &SchedulingGraph {
        self.dispatcher.observer(self.updater).graph()
    }

    /// Feature column names per kind (kind name -> columns).
    pub fn feature_columns(&self) -> BTreeMap<String, Vec<String>> {
        let composite = &self.dispatcher.observer(self.features).0;
        let mut map = BTreeMap::new();
        for kind in [
            FeatureKind::Operations,
            FeatureKind::Machines,
            FeatureKind::Jobs,
        ] {
            let names = composite.column_names(kind);
            if !names.is_empty() {
                map.insert(kind.as_str().to_string(), names);
            }
        }
        map
    }

    /// Reinitializes the episode and returns the initial observation.
    pub fn reset(&mut self) -> Result<ObservationBundle, EnvError> {
        self.dispatcher.reset();
        self.observation()
    }

    /// Rewards collected so far this episode.
    pub fn rewards(&self) -> &[f64] {
        self.dispatcher.observer(self.reward).rewards()
    }

    /// Applies an action: dispatches the next operation of `action.job_id`.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        let job = action.job_id;
        if job >= self.instance.num_jobs() {
            return Err(EnvError::InvalidAction(format!("job {job} does not exist")));
        }
        let pos = self.dispatcher.core().job_next_position()[job];
        if pos >= self.instance.job(job).len() {
            return Err(EnvError::InvalidAction(format!("job {job} is complete")));
        }
        let op = self.instance.job(job)[pos];
        if action.machine_id >= 0 && action.machine_id as usize != op.machine_id {
            return Err(EnvError::InvalidAction(format!(
                "operation of job {job} runs on machine {}, not {}",
                op.machine_id, action.machine_id
            )));
        }
        self.step_operation(&op)
    }

    /// Steps with an explicit operation (must be available).
    pub fn step_operation(&mut self, op: &Operation) -> Result<StepOutcome, EnvError> {
        let available = self.dispatcher.core().available_operations();
        if !available.iter().any(|o| o.operation_id == op.operation_id) {
            return Err(EnvError::InvalidAction(format!(
                "operation {} of job {} is not in the available set",
                op.position_in_job, op.job_id
            )));
        }
        let scheduled = self
            .dispatcher
            .dispatch(op)
            .map_err(|e| EnvError::InvalidAction(e.to_string()))?;
        if let Some(err) = self
            .dispatcher
            .observer_mut(self.features)
            .0
            .take_error()
        {
            return Err(err);
        }
        let observation = self.observation()?;
        Ok(StepOutcome {
            observation,
            reward: self.dispatcher.observer(self.reward).last_reward(),
            terminated: self.dispatcher.core().is_complete(),
            truncated: false,
            scheduled,
        })
    }

    /// Assembles the current observation.
    pub fn observation(&self) -> Result<ObservationBundle, EnvError> {
        let graph = self.graph();
        let mut removed_nodes = graph.removed().to_vec();
        let mut edge_index = graph.edge_index();
        let composite = &self.dispatcher.observer(self.features).0;
        let full = composite.features();
        // keep rows of active entities only, ascending original id
        let mut features: BTreeMap<FeatureKind, FeatureMatrix> = BTreeMap::new();
        for (kind, matrix) in full {
            let active = self.active_rows(*kind, graph, matrix.rows());
            let mut filtered = FeatureMatrix::zeros(active.len(), matrix.cols());
            for (r, &orig) in active.iter().enumerate() {
                for c in 0..matrix.cols() {
                    filtered.set(r, c, matrix.get(orig, c));
                }
            }
            features.insert(*kind, filtered);
        }
        if self.config.normalize {
            let mut set: FeatureSet = features.clone();
            normalize_feature_set(&mut set);
            features = set;
        }
        let available_actions = self
            .dispatcher
            .core()
            .available_operations()
            .iter()
            .map(|op| AvailableAction {
                operation_id: op.operation_id,
                machine_id: op.machine_id,
                job_id: op.job_id,
            })
            .collect();
        if self.config.use_padding {
            while removed_nodes.len() < self.pad_nodes {
                removed_nodes.push(true);
            }
            while edge_index.len() < self.pad_edges {
                edge_index.push([-1, -1]);
            }
            for (kind, target_rows) in &self.pad_rows {
                if let Some(matrix) = features.get(kind) {
                    if matrix.rows() < *target_rows {
                        let mut padded = FeatureMatrix::zeros(*target_rows, matrix.cols());
                        for r in 0..matrix.rows() {
                            for c in 0..matrix.cols() {
                                padded.set(r, c, matrix.get(r, c));
                            }
                        }
                        for r in matrix.rows()..*target_rows {
                            for c in 0..matrix.cols() {
                                padded.set(r, c, -1.0);
                            }
                        }
                        features.insert(*kind, padded);
                    }
                }
            }
        }
        Ok(ObservationBundle {
            removed_nodes,
            edge_index,
            features,
            info: ObservationInfo {
                feature_columns: self.feature_columns(),
                available_actions,
            },
        })
    }

    /// Original ids (row indices into the full matrices) of the active
    /// entities of a kind. When the graph has no nodes of the kind, all
    /// entities are active.
    fn active_rows(
        &self,
        kind: FeatureKind,
        graph: &SchedulingGraph,
        all_rows: usize,
    ) -> Vec<usize> {
        let node_type = match kind {
            FeatureKind::Operations => NodeType::Operation,
            FeatureKind::Machines => NodeType::Machine,
            FeatureKind::Jobs => NodeType::Job,
        };
        let mut present = false;
        let mut active = Vec::new();
        for node in graph.nodes() {
            if node.node_type != node_type {
                continue;
            }
            present = true;
            if graph.is_removed(node.node_id) {
                continue;
            }
            let row = match node.payload {
                NodePayload::Operation(op) => op.operation_id,
                NodePayload::Machine(m) => m,
                NodePayload::Job(j) => j,
                NodePayload::None => continue,
            };
            active.push(row);
        }
        if present {
            active.sort_unstable();
            active
        } else {
            (0..all_rows).collect()
        }
    }

    /// Remaps an (unpadded) observation of a resource-task style graph into
    /// per-type locally indexed form.
    pub fn remapped_observation(
        &self,
        bundle: &ObservationBundle,
    ) -> Result<RemappedObservation, EnvError> {
        remap_resource_task_observation(bundle, self.graph())
    }
}

/// Observation with node identifiers remapped per type: local indices are
/// contiguous from zero, and `original_ids` recovers each type's original
/// entity ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RemappedObservation {
    pub edge_index: BTreeMap<(String, String, String), Vec<[i64; 2]>>,
    pub node_features: BTreeMap<String, FeatureMatrix>,
    pub original_ids: BTreeMap<String, Vec<usize>>,
}

/// Splits the global COO edge list by (source type, "to", destination type),
/// renumbers nodes per type (active nodes only, ascending original id) and
/// filters feature matrices down to active rows.
pub fn remap_resource_task_observation(
    bundle: &ObservationBundle,
    graph: &SchedulingGraph,
) -> Result<RemappedObservation, EnvError> {
    // local index per node, per type
    let mut local: Vec<Option<usize>> = vec![None; graph.nodes().len()];
    let mut original_ids: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut counters: BTreeMap<NodeType, usize> = BTreeMap::new();
    for node in graph.nodes() {
        if graph.is_removed(node.node_id) {
            continue;
        }
        let idx = counters.entry(node.node_type).or_insert(0);
        local[node.node_id] = Some(*idx);
        *idx += 1;
        let entity = match node.payload {
            NodePayload::Operation(op) => op.operation_id,
            NodePayload::Machine(m) => m,
            NodePayload::Job(j) => j,
            NodePayload::None => 0,
        };
        original_ids
            .entry(node.node_type.as_str().to_string())
            .or_default()
            .push(entity);
    }
    let mut edge_index: BTreeMap<(String, String, String), Vec<[i64; 2]>> = BTreeMap::new();
    for col in &bundle.edge_index {
        if col[0] < 0 {
            continue; // padding
        }
        let (src, dst) = (col[0] as usize, col[1] as usize);
        let key = (
            graph.node(src).node_type.as_str().to_string(),
            "to".to_string(),
            graph.node(dst).node_type.as_str().to_string(),
        );
        let (Some(ls), Some(ld)) = (local[src], local[dst]) else {
            continue;
        };
        edge_index
            .entry(key)
            .or_default()
            .push([ls as i64, ld as i64]);
    }
    let mut node_features: BTreeMap<String, FeatureMatrix> = BTreeMap::new();
    for (type_name, _ids) in &original_ids {
        let kind = match type_name.as_str() {
            "operation" => Some(FeatureKind::Operations),
            "machine" => Some(FeatureKind::Machines),
            "job" => Some(FeatureKind::Jobs),
            "global" => None,
            other => {
                let node_type = graph
                    .nodes()
                    .iter()
                    .find(|n| n.node_type.as_str() == other)
                    .map(|n| n.node_type)
                    .unwrap_or(NodeType::Global);
                return Err(EnvError::Graph(crate::error::GraphError::UnknownNodeType(
                    node_type,
                )));
            }
        };
        match kind {
            Some(kind) => {
                // bundle matrices already hold active rows in ascending
                // original id, which matches the local numbering
                if let Some(matrix) = bundle.features.get(&kind) {
                    node_features.insert(type_name.clone(), matrix.clone());
                }
            }
            None => {
                let count = original_ids[type_name].len();
                node_features.insert(type_name.clone(), FeatureMatrix::zeros(count, 0));
            }
        }
    }
    Ok(RemappedObservation {
        edge_index,
        node_features,
        original_ids,
    })
}

/// Environment over a distribution of instances: every reset draws a fresh
/// instance from the generator and rebuilds the inner environment. Padding
/// targets the generator's maximum dimensions.
pub struct MultiEnv {
    generator: InstanceGenerator,
    graph_initializer: fn(&Instance) -> SchedulingGraph,
    config: SingleEnvConfig,
    inner: Option<SingleEnv>,
    max_dims: (usize, usize, usize),
}

impl MultiEnv {
    pub fn new(
        generator: InstanceGenerator,
        graph_initializer: fn(&Instance) -> SchedulingGraph,
        config: SingleEnvConfig,
    ) -> Self {
        let max_dims = generator.max_dimensions();
        Self {
            generator,
            graph_initializer,
            config,
            inner: None,
            max_dims,
        }
    }

    pub fn inner(&self) -> Option<&SingleEnv> {
        self.inner.as_ref()
    }

    /// Draws the next instance and starts its episode.
    pub fn reset(&mut self) -> Result<ObservationBundle, EnvError> {
        let instance = self.generator.generate()?.into_arc();
        let graph = (self.graph_initializer)(&instance);
        let mut env = SingleEnv::new(instance, graph, self.config.clone())?;
        if self.config.use_padding {
            // pad to the distribution's maxima rather than this instance's
            let (jobs, machines, ops) = self.max_dims;
            env.pad_rows.insert(FeatureKind::Operations, ops);
            env.pad_rows.insert(FeatureKind::Machines, machines);
            env.pad_rows.insert(FeatureKind::Jobs, jobs);
            env.pad_nodes = env.pad_nodes.max(ops + machines + jobs + 1);
            // edge pad target stays the instance's own initial edge count;
            // consumers strip -1 columns either way
        }
        let obs = env.reset()?;
        self.inner = Some(env);
        Ok(obs)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        self.inner
            .as_mut()
            .ok_or_else(|| EnvError::InvalidAction("step before reset".into()))?
            .step(action)
    }
}

/// Serializes an observation + label pair in the flat binary record format
/// consumed by external trainers.
///
/// Layout (all integers little-endian):
/// - 1 version byte (currently 1)
/// - `u32` count, then that many `u8` flags: the removed-nodes mask
/// - `u32` number of typed edge groups, then per group (sorted
///   lexicographically by key): three length-prefixed UTF-8 strings (source
///   type, relation, destination type), `u32` edge count, then `i32`
///   source ids and `i32` destination ids
/// - `u32` number of feature kinds, then per kind (sorted by name): a
///   length-prefixed name, `u32` rows, `u32` cols, then row-major `f32`
///   values
/// - `u32` label count, then that many `u8` labels
pub fn record_bytes(
    bundle: &ObservationBundle,
    remapped: &RemappedObservation,
    labels: &[u8],
) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(1u8);
    out.extend_from_slice(&(bundle.removed_nodes.len() as u32).to_le_bytes());
    out.extend(bundle.removed_nodes.iter().map(|&b| u8::from(b)));
    out.extend_from_slice(&(remapped.edge_index.len() as u32).to_le_bytes());
    for (key, cols) in &remapped.edge_index {
        for part in [&key.0, &key.1, &key.2] {
            out.extend_from_slice(&(part.len() as u32).to_le_bytes());
            out.extend_from_slice(part.as_bytes());
        }
        out.extend_from_slice(&(cols.len() as u32).to_le_bytes());
        for col in cols {
            out.extend_from_slice(&(col[0] as i32).to_le_bytes());
        }
        for col in cols {
            out.extend_from_slice(&(col[1] as i32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(remapped.node_features.len() as u32).to_le_bytes());
    for (name, matrix) in &remapped.node_features {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(matrix.cols() as u32).to_le_bytes());
        for v in matrix.data() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    out.extend_from_slice(labels);
    out
}
