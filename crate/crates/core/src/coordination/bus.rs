use std::collections::{BTreeMap, VecDeque};

use super::HandoffMessage;
use crate::geometry::RobotId;

/// Reliable in-process bus with a fixed delivery delay.
///
/// Messages to one addressee are delivered in send order, each exactly once,
/// at `tick + delay` or later.
#[derive(Debug, Clone, Default)]
pub struct MessageBus {
    delay: u64,
    queues: BTreeMap<RobotId, VecDeque<(u64, HandoffMessage)>>,
}

impl MessageBus {
    pub fn new(delay: u64) -> Self {
        MessageBus {
            delay,
            queues: BTreeMap::new(),
        }
    }

    pub fn delay(&self) -> u64 {
        self.delay
    }

    /// Enqueues `message` for `message.to`, deliverable from `message.tick + delay`.
    pub fn send(&mut self, message: HandoffMessage) {
        let due = message.tick + self.delay;
        self.queues
            .entry(message.to)
            .or_default()
            .push_back((due, message));
    }

    /// Removes and returns every message for `robot` that is due at `tick`.
    pub fn poll(&mut self, robot: RobotId, tick: u64) -> Vec<HandoffMessage> {
        let Some(queue) = self.queues.get_mut(&robot) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        while queue.front().is_some_and(|(due, _)| *due <= tick) {
            out.push(queue.pop_front().expect("front checked").1);
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    /// True if a message from `from` to `to` is still undelivered.
    pub fn in_flight(&self, from: RobotId, to: RobotId) -> bool {
        self.queues
            .get(&to)
            .is_some_and(|q| q.iter().any(|(_, m)| m.from == from))
    }
}

/// Enqueues `message`; see [`MessageBus::send`].
pub fn bus_send(bus: &mut MessageBus, message: HandoffMessage) {
    bus.send(message)
}

/// Drains due messages; see [`MessageBus::poll`].
pub fn bus_poll(bus: &mut MessageBus, robot: RobotId, tick: u64) -> Vec<HandoffMessage> {
    bus.poll(robot, tick)
}
