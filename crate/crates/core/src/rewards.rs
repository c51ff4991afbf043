//! Reward observers: per-step reward signals derived from dispatch events.

use crate::dispatching::{DispatcherCore, DispatcherObserver};
use crate::schedule::ScheduledOperation;

/// Accumulates one reward per dispatch. `last_reward` is 0 before the first
/// step; `reset` clears the sequence.
pub trait RewardObserver {
    fn rewards(&self) -> &[f64];
    fn last_reward(&self) -> f64 {
        self.rewards().last().copied().unwrap_or(0.0)
    }
}

/// Reward = previous partial makespan minus the new one (always <= 0); the
/// episode total is the negated final makespan.
pub struct MakespanReward {
    previous: f64,
    rewards: Vec<f64>,
}

impl MakespanReward {
    pub fn new(core: &DispatcherCore) -> Self {
        Self {
            previous: f64::from(core.schedule().makespan()),
            rewards: Vec::new(),
        }
    }
}

impl RewardObserver for MakespanReward {
    fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

impl DispatcherObserver for MakespanReward {
    fn update(&mut self, core: &DispatcherCore, _scheduled: &ScheduledOperation) {
        let current = f64::from(core.schedule().makespan());
        self.rewards.push(self.previous - current);
        self.previous = current;
    }
    fn reset(&mut self, core: &DispatcherCore) {
        self.previous = f64::from(core.schedule().makespan());
        self.rewards.clear();
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

/// Reward = negated idle gap introduced on the dispatched operation's
/// machine immediately before its start.
pub struct IdleTimeReward {
    rewards: Vec<f64>,
}

impl IdleTimeReward {
    pub fn new(_core: &DispatcherCore) -> Self {
        Self {
            rewards: Vec::new(),
        }
    }
}

fn idle_before(core: &DispatcherCore, scheduled: &ScheduledOperation) -> f64 {
    let sequence = &core.schedule().machine_sequences()[scheduled.machine_id];
    // the dispatched operation is the last entry; idle time is measured from
    // the end of the one before it (or from zero for the first)
    let previous_end = if sequence.len() >= 2 {
        sequence[sequence.len() - 2].end_time()
    } else {
        0
    };
    f64::from(scheduled.start_time) - f64::from(previous_end)
}

impl RewardObserver for IdleTimeReward {
    fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

impl DispatcherObserver for IdleTimeReward {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        self.rewards.push(-idle_before(core, scheduled));
    }
    fn reset(&mut self, _core: &DispatcherCore) {
        self.rewards.clear();
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

/// Idle-time reward shaped by the dispatched duration: duration minus the
/// introduced idle gap. Episode totals differ from [`IdleTimeReward`] by the
/// constant total processing time.
pub struct ScheduledAreaReward {
    rewards: Vec<f64>,
}

impl ScheduledAreaReward {
    pub fn new(_core: &DispatcherCore) -> Self {
        Self {
            rewards: Vec::new(),
        }
    }
}

impl RewardObserver for ScheduledAreaReward {
    fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

impl DispatcherObserver for ScheduledAreaReward {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        let idle = idle_before(core, scheduled);
        self.rewards
            .push(f64::from(scheduled.operation.duration) - idle);
    }
    fn reset(&mut self, _core: &DispatcherCore) {
        self.rewards.clear();
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

/// Zero everywhere except the completing dispatch, which pays the negated
/// makespan.
pub struct SparseMakespanReward {
    rewards: Vec<f64>,
}

impl SparseMakespanReward {
    pub fn new(_core: &DispatcherCore) -> Self {
        Self {
            rewards: Vec::new(),
        }
    }
}

impl RewardObserver for SparseMakespanReward {
    fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

impl DispatcherObserver for SparseMakespanReward {
    fn update(&mut self, core: &DispatcherCore, _scheduled: &ScheduledOperation) {
        if core.is_complete() {
            self.rewards
                .push(-f64::from(core.schedule().makespan()));
        } else {
            self.rewards.push(0.0);
        }
    }
    fn reset(&mut self, _core: &DispatcherCore) {
        self.rewards.clear();
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

/// Reward function selector for environment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    Makespan,
    IdleTime,
    ScheduledArea,
    SparseMakespan,
}

pub(crate) enum AnyReward {
    Makespan(MakespanReward),
    IdleTime(IdleTimeReward),
    ScheduledArea(ScheduledAreaReward),
    SparseMakespan(SparseMakespanReward),
}

impl AnyReward {
    pub(crate) fn new(kind: RewardKind, core: &DispatcherCore) -> Self {
        match kind {
            RewardKind::Makespan => AnyReward::Makespan(MakespanReward::new(core)),
            RewardKind::IdleTime => AnyReward::IdleTime(IdleTimeReward::new(core)),
            RewardKind::ScheduledArea => AnyReward::ScheduledArea(ScheduledAreaReward::new(core)),
            RewardKind::SparseMakespan => {
                AnyReward::SparseMakespan(SparseMakespanReward::new(core))
            }
        }
    }

    pub(crate) fn rewards(&self) -> &[f64] {
        match self {
            AnyReward::Makespan(r) => r.rewards(),
            AnyReward::IdleTime(r) => r.rewards(),
            AnyReward::ScheduledArea(r) => r.rewards(),
            AnyReward::SparseMakespan(r) => r.rewards(),
        }
    }

    pub(crate) fn last_reward(&self) -> f64 {
        self.rewards().last().copied().unwrap_or(0.0)
    }
}

impl DispatcherObserver for AnyReward {
    fn update(&mut self, core: &DispatcherCore, scheduled: &ScheduledOperation) {
        match self {
            AnyReward::Makespan(r) => r.update(core, scheduled),
            AnyReward::IdleTime(r) => r.update(core, scheduled),
            AnyReward::ScheduledArea(r) => r.update(core, scheduled),
            AnyReward::SparseMakespan(r) => r.update(core, scheduled),
        }
    }
    fn reset(&mut self, core: &DispatcherCore) {
        match self {
            AnyReward::Makespan(r) => DispatcherObserver::reset(r, core),
            AnyReward::IdleTime(r) => DispatcherObserver::reset(r, core),
            AnyReward::ScheduledArea(r) => DispatcherObserver::reset(r, core),
            AnyReward::SparseMakespan(r) => DispatcherObserver::reset(r, core),
        }
    }
    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}
