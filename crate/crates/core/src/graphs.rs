//! Typed scheduling graphs, initial-graph builders and dynamic updaters.

use crate::dispatching::{DispatcherCore, DispatcherObserver};
use crate::instance::{Instance, Operation};
use crate::schedule::ScheduledOperation;

/// Kinds of graph nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeType {
    Operation,
    Machine,
    Job,
    Global,
    Source,
    Sink,
}

impl NodeType {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeType::Operation => "operation",
            NodeType::Machine => "machine",
            NodeType::Job => "job",
            NodeType::Global => "global",
            NodeType::Source => "source",
            NodeType::Sink => "sink",
        }
    }
}

/// What a node stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodePayload {
    Operation(Operation),
    Machine(usize),
    Job(usize),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    /// Assigned at insertion, unique, never reused.
    pub node_id: usize,
    pub node_type: NodeType,
    pub payload: NodePayload,
}

/// Structural role of an edge; the typed key exported to consumers is always
/// derived from the endpoint node types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Job-precedence arc between consecutive operations.
    Conjunctive,
    /// Same-machine arc in a disjunctive graph.
    Disjunctive,
    /// Any other structural edge (resource-task links, cliques, source/sink).
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

/// A directed graph over typed nodes with removal tracking. Node ids stay
/// stable over an episode; removal is a mask so feature rows and exported
/// edge lists stay aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingGraph {
    nodes: Vec<Node>,
    removed: Vec<bool>,
    edges: Vec<Edge>,
}

impl Default for SchedulingGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl SchedulingGraph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            removed: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self, node_type: NodeType, payload: NodePayload) -> usize {
        let node_id = self.nodes.len();
        self.nodes.push(Node {
            node_id,
            node_type,
            payload,
        });
        self.removed.push(false);
        node_id
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, kind: EdgeKind) {
        self.edges.push(Edge { src, dst, kind });
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn removed(&self) -> &[bool] {
        &self.removed
    }

    pub fn is_removed(&self, id: usize) -> bool {
        self.removed[id]
    }

    pub fn num_active_nodes(&self) -> usize {
        self.removed.iter().filter(|&&r| !r).count()
    }

    /// Live edges (edges never reference removed nodes).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Typed key of an edge: source type, "to", destination type.
    pub fn edge_type_key(&self, edge: &Edge) -> (&'static str, &'static str, &'static str) {
        (
            self.nodes[edge.src].node_type.as_str(),
            "to",
            self.nodes[edge.dst].node_type.as_str(),
        )
    }

    /// Marks a node removed and drops its incident edges.
    pub fn remove_node(&mut self, id: usize) {
        if self.removed[id] {
            return;
        }
        self.removed[id] = true;
        self.edges.retain(|e| e.src != id && e.dst != id);
    }

    /// Removes live nodes with no incident edges. Source and sink nodes are
    /// kept: they are sentinels, not entities.
    pub fn remove_isolated_nodes(&mut self) {
        let mut incident = vec![false; self.nodes.len()];
        for e in &self.edges {
            incident[e.src] = true;
            incident[e.dst] = true;
        }
        for id in 0..self.nodes.len() {
            if !self.removed[id]
                && !incident[id]
                && !matches!(
                    self.nodes[id].node_type,
                    NodeType::Source | NodeType::Sink
                )
            {
                self.removed[id] = true;
            }
        }
    }

    /// Node id of an operation node, when the graph was built with
    /// operations first (all builders here do).
    pub fn operation_node(&self, operation_id: usize) -> usize {
        operation_id
    }

    /// Edge list in COO layout: two rows of node ids, one column per edge.
    pub fn edge_index(&self) -> Vec<[i64; 2]> {
        self.edges
            .iter()
            .map(|e| [e.src as i64, e.dst as i64])
            .collect()
    }
}

fn add_operation_nodes(graph: &mut SchedulingGraph, instance: &Instance) {
    for job in instance.jobs() {
        for op in job {
            graph.add_node(NodeType::Operation, NodePayload::Operation(*op));
        }
    }
}

fn ops_by_machine(instance: &Instance) -> Vec<Vec<usize>> {
    let mut by_machine = vec![Vec::new(); instance.num_machines()];
    for job in instance.jobs() {
        for op in job {
            by_machine[op.machine_id].push(op.operation_id);
        }
    }
    by_machine
}

/// Classic disjunctive graph: conjunctive arcs along each job, disjunctive
/// arcs in both directions within each machine's operation set, optionally a
/// source node linked to first operations and a sink fed by last operations.
pub fn build_disjunctive_graph(instance: &Instance, with_source_sink: bool) -> SchedulingGraph {
    let mut graph = SchedulingGraph::new();
    add_operation_nodes(&mut graph, instance);
    for job in instance.jobs() {
        for pair in job.windows(2) {
            graph.add_edge(
                pair[0].operation_id,
                pair[1].operation_id,
                EdgeKind::Conjunctive,
            );
        }
    }
    for ops in ops_by_machine(instance) {
        for (i, &a) in ops.iter().enumerate() {
            for &b in &ops[i + 1..] {
                graph.add_edge(a, b, EdgeKind::Disjunctive);
                graph.add_edge(b, a, EdgeKind::Disjunctive);
            }
        }
    }
    if with_source_sink {
        let source = graph.add_node(NodeType::Source, NodePayload::None);
        let sink = graph.add_node(NodeType::Sink, NodePayload::None);
        for job in instance.jobs() {
            graph.add_edge(source, job[0].operation_id, EdgeKind::Other);
            graph.add_edge(job[job.len() - 1].operation_id, sink, EdgeKind::Other);
        }
    }
    graph
}

/// Basic resource-task graph: operation and machine nodes, operation-machine
/// links in both directions, a machine-node clique, and a clique over each
/// job's operations.
pub fn build_resource_task_graph(instance: &Instance) -> SchedulingGraph {
    let mut graph = SchedulingGraph::new();
    add_operation_nodes(&mut graph, instance);
    let machine_nodes: Vec<usize> = (0..instance.num_machines())
        .map(|m| graph.add_node(NodeType::Machine, NodePayload::Machine(m)))
        .collect();
    for job in instance.jobs() {
        for op in job {
            let m = machine_nodes[op.machine_id];
            graph.add_edge(op.operation_id, m, EdgeKind::Other);
            graph.add_edge(m, op.operation_id, EdgeKind::Other);
        }
    }
    clique(&mut graph, &machine_nodes);
    for job in instance.jobs() {
        let ids: Vec<usize> = job.iter().map(|o| o.operation_id).collect();
        clique(&mut graph, &ids);
    }
    graph
}

/// Resource-task graph with job nodes: job nodes replace the intra-job
/// operation cliques and form a clique themselves.
pub fn build_resource_task_graph_with_jobs(instance: &Instance) -> SchedulingGraph {
    let mut graph = SchedulingGraph::new();
    add_operation_nodes(&mut graph, instance);
    let machine_nodes: Vec<usize> = (0..instance.num_machines())
        .map(|m| graph.add_node(NodeType::Machine, NodePayload::Machine(m)))
        .collect();
    let job_nodes: Vec<usize> = (0..instance.num_jobs())
        .map(|j| graph.add_node(NodeType::Job, NodePayload::Job(j)))
        .collect();
    for job in instance.jobs() {
        for op in job {
            let m = machine_nodes[op.machine_id];
            graph.add_edge(op.operation_id, m, EdgeKind::Other);
            graph.add_edge(m, op.operation_id, EdgeKind::Other);
            let j = job_nodes[op.job_id];
            graph.add_edge(op.operation_id, j, EdgeKind::Other);
            graph.add_edge(j, op.operation_id, EdgeKind::Other);
        }
    }
    clique(&mut graph, &machine_nodes);
    clique(&mut graph, &job_nodes);
    graph
}

/// Complete resource-task graph: adds a global node linked in both
/// directions to every machine and job node; machine and job cliques are
/// dropped in its favor.
pub fn build_resource_task_graph_complete(instance: &Instance) -> SchedulingGraph {
    let mut graph = SchedulingGraph::new();
    add_operation_nodes(&mut graph, instance);
    let machine_nodes: Vec<usize> = (0..instance.num_machines())
        .map(|m| graph.add_node(NodeType::Machine, NodePayload::Machine(m)))
        .collect();
    let job_nodes: Vec<usize> = (0..instance.num_jobs())
        .map(|j| graph.add_node(NodeType::Job, NodePayload::Job(j)))
        .collect();
    for job in instance.jobs() {
        for op in job {
            let m = machine_nodes[op.machine_id];
            graph.add_edge(op.operation_id, m, EdgeKind::Other);
            graph.add_edge(m, op.operation_id, EdgeKind::Other);
            let j = job_nodes[op.job_id];
            graph.add_edge(op.operation_id, j, EdgeKind::Other);
            graph.add_edge(j, op.operation_id, EdgeKind::Other);
        }
    }
    let global = graph.add_node(NodeType::Global, NodePayload::None);
    for &m in &machine_nodes {
        graph.add_edge(global, m, EdgeKind::Other);
        graph.add_edge(m, global, EdgeKind::Other);
    }
    for &j in &job_nodes {
        graph.add_edge(global, j, EdgeKind::Other);
        graph.add_edge(j, global, EdgeKind::Other);
    }
    graph
}

fn clique(graph: &mut SchedulingGraph, ids: &[usize]) {
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            graph.add_edge(a, b, EdgeKind::Other);
            graph.add_edge(b, a, EdgeKind::Other);
        }
    }
}

/// How a [`GraphUpdater`] maintains disjunctive arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateStrategy {
    /// Only remove completed nodes (any graph variant).
    Residual,
    /// Residual plus removing-arc maintenance of disjunctive arcs: when an
    /// operation is dispatched its incoming arcs from unscheduled
    /// same-machine operations are dropped, so the surviving arcs point
    /// scheduled -> unscheduled in sequence order; arcs of the previously
    /// scheduled operation to unscheduled ones are dropped entirely.
    DisjunctiveRemovingArc,
    /// Starts from a graph stripped of all disjunctive arcs and adds the
    /// machine-sequence arc after each dispatch.
    DisjunctiveAddingArc,
}

/// Dispatcher observer that keeps a [`SchedulingGraph`] synchronized with
/// the schedule: completed operation nodes are removed (their features no
/// longer matter), optionally machine and job nodes follow once all their
/// operations complete, and isolated nodes are pruned.
pub struct GraphUpdater {
    graph: SchedulingGraph,
    initial: SchedulingGraph,
    strategy: UpdateStrategy,
    remove_machine_nodes: bool,
    remove_job_nodes: bool,
}

impl GraphUpdater {
    pub fn new(
        mut graph: SchedulingGraph,
        strategy: UpdateStrategy,
        remove_machine_nodes: bool,
        remove_job_nodes: bool,
    ) -> Self {
        if strategy == UpdateStrategy::DisjunctiveAddingArc {
            graph.edges.retain(|e| e.kind != EdgeKind::Disjunctive);
        }
        Self {
            initial: graph.clone(),
            graph,
            strategy,
            remove_machine_nodes,
            remove_job_nodes,
        }
    }

    /// Residual updater: removes completed nodes only.
    pub fn residual(
        graph: SchedulingGraph,
        remove_machine_nodes: bool,
        remove_job_nodes: bool,
    ) -> Self {
        Self::new(
            graph,
            UpdateStrategy::Residual,
            remove_machine_nodes,
            remove_job_nodes,
        )
    }

    /// Removing-arc disjunctive updater.
    pub fn disjunctive(graph: SchedulingGraph) -> Self {
        Self::new(graph, UpdateStrategy::DisjunctiveRemovingArc, false, false)
    }

    pub fn graph(&self) -> &SchedulingGraph {
        &self.graph
    }

    pub fn initial_graph(&self) -> &SchedulingGraph {
        &self.initial
    }

    fn remove_completed(&mut self, core: &DispatcherCore) {
        let now = core.current_time();
        let instance = core.instance();
        for job in instance.jobs() {
            for op in job {
                let node = self.graph.operation_node(op.operation_id);
                if !self.graph.is_removed(node) && core.is_completed_at(op, now) {
                    self.graph.remove_node(node);
                }
            }
        }
        if self.remove_machine_nodes || self.remove_job_nodes {
            let mut machine_done = vec![true; instance.num_machines()];
            let mut job_done = vec![true; instance.num_jobs()];
            for job in instance.jobs() {
                for op in job {
                    if !core.is_completed_at(op, now) {
                        machine_done[op.machine_id] = false;
                        job_done[op.job_id] = false;
                    }
                }
            }
            let targets: Vec<usize> = self
                .graph
                .nodes()
                .iter()
                .filter(|n| match (n.node_type, n.payload) {
                    (NodeType::Machine, NodePayload::Machine(m)) => {
                        self.remove_machine_nodes && machine_done[m]
                    }
                    (NodeType::Job, NodePayload::Job(j)) => self.remove_job_nodes && job_done[j],
                    _ => false,
                })
                .map(|n| n.node_id)
                .collect();
            for id in targets {
                self.graph.remove_node(id);
            }
        }
        self.graph.remove_isolated_nodes();
    }

    fn update_disjunctive_arcs(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        let machine = scheduled.machine_id;
        let node = self
            .graph
            .operation_node(scheduled.operation.operation_id);
        let sequence = &core.schedule().machine_sequences()[machine];
        match self.strategy {
            UpdateStrategy::DisjunctiveRemovingArc => {
                // arcs into the newly scheduled operation from unscheduled
                // same-machine ops are gone: the order is now decided
                self.graph.edges.retain(|e| {
                    !(e.kind == EdgeKind::Disjunctive
                        && e.dst == node
                        && !core.is_dispatched(&op_of(core, e.src)))
                });
                if sequence.len() >= 2 {
                    let prev = sequence[sequence.len() - 2].operation.operation_id;
                    let prev_node = self.graph.operation_node(prev);
                    // drop the arc back to the previous operation and every
                    // remaining arc between it and unscheduled operations
                    self.graph.edges.retain(|e| {
                        if e.kind != EdgeKind::Disjunctive {
                            return true;
                        }
                        if e.src == node && e.dst == prev_node {
                            return false;
                        }
                        let touches_prev = e.src == prev_node || e.dst == prev_node;
                        if touches_prev {
                            let other = if e.src == prev_node { e.dst } else { e.src };
                            if !core.is_dispatched(&op_of(core, other)) {
                                return false;
                            }
                        }
                        true
                    });
                }
            }
            UpdateStrategy::DisjunctiveAddingArc => {
                if sequence.len() >= 2 {
                    let prev = sequence[sequence.len() - 2].operation.operation_id;
                    let prev_node = self.graph.operation_node(prev);
                    if !self.graph.is_removed(prev_node) && !self.graph.is_removed(node) {
                        self.graph.add_edge(prev_node, node, EdgeKind::Disjunctive);
                    }
                }
            }
            UpdateStrategy::Residual => {}
        }
    }
}

fn op_of(core: &DispatcherCore, node_id: usize) -> Operation {
    *core
        .instance()
        .operation(node_id)
        .expect("operation nodes precede all others")
}

impl DispatcherObserver for GraphUpdater {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        if self.strategy != UpdateStrategy::Residual {
            self.update_disjunctive_arcs(core, scheduled);
        }
        self.remove_completed(core);
    }

    fn reset(&mut self, _core: &DispatcherCore) {
        self.graph = self.initial.clone();
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}
