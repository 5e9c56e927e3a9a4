//! Per-robot finite-state machine and handoff signalling.
//!
//! | state    | event                                   | next     | emits          |
//! |----------|-----------------------------------------|----------|----------------|
//! | Idle     | AssignSegment                           | Navigate |                |
//! | Navigate | ArrivedWaypoint (pickup)                | Pickup   |                |
//! | Pickup   | PickupDone                              | Navigate |                |
//! | Navigate | ArrivedWaypoint (outgoing transfer)     | Relay    | HandoffReady   |
//! | Relay    | MessageReceived(HandoffAck)             | Idle     |                |
//! | Navigate | ArrivedWaypoint (incoming transfer)     | Navigate | HandoffAck if a ready signal is already held |
//! | Navigate | MessageReceived(HandoffReady)           | Navigate | HandoffAck once at the incoming transfer |
//! | Navigate | ArrivedWaypoint (drop)                  | Deliver  |                |
//! | Deliver  | DropDone                                | Idle     | TaskComplete   |
//!
//! Any other combination is an [`IllegalTransition`]: a protocol bug in the
//! driver, never an expected runtime condition. The item changes hands when
//! the receiver emits `HandoffAck`; the sender drops its claim when the ack
//! reaches it.

mod bus;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bus::{bus_poll, bus_send, MessageBus};

use crate::geometry::{Point, RobotId};
use crate::planning::{RelayPlan, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FsmState {
    Idle,
    Navigate,
    Pickup,
    Relay,
    Deliver,
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    HandoffReady,
    HandoffAck,
    TaskComplete,
}

/// Advisory status light: green while carrying, blue while waiting at a
/// transfer point, off once done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusLed {
    Green,
    Blue,
    Off,
}

/// One line of the message log. `TaskComplete` is addressed to its sender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffMessage {
    pub kind: MessageKind,
    pub task_id: u64,
    pub from: RobotId,
    pub to: RobotId,
    pub at: Point,
    pub tick: u64,
    pub status_led: StatusLed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointKind {
    Pickup,
    IncomingTransfer,
    OutgoingTransfer,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub kind: WaypointKind,
    pub point: Point,
}

/// A robot's share of a relay plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub task_id: u64,
    pub role: Role,
    pub item: String,
    pub waypoints: Vec<Waypoint>,
    /// Robot handing the item to this one.
    pub previous: Option<RobotId>,
    /// Robot this one hands the item to.
    pub next: Option<RobotId>,
}

/// Splits `plan` into one assignment per active robot, in chain order.
pub fn assignments(plan: &RelayPlan, task_id: u64) -> Vec<(RobotId, Assignment)> {
    let k = plan.active.len();
    plan.segments
        .iter()
        .enumerate()
        .map(|(j, seg)| {
            let first = if j == 0 {
                Waypoint {
                    kind: WaypointKind::Pickup,
                    point: plan.task.pickup,
                }
            } else {
                Waypoint {
                    kind: WaypointKind::IncomingTransfer,
                    point: plan.transfers[j - 1],
                }
            };
            let last = if j + 1 == k {
                Waypoint {
                    kind: WaypointKind::Drop,
                    point: plan.task.drop,
                }
            } else {
                Waypoint {
                    kind: WaypointKind::OutgoingTransfer,
                    point: plan.transfers[j],
                }
            };
            let assignment = Assignment {
                task_id,
                role: seg.role,
                item: plan.task.item.clone(),
                waypoints: vec![first, last],
                previous: j.checked_sub(1).map(|p| plan.active[p]),
                next: plan.active.get(j + 1).copied(),
            };
            (seg.robot, assignment)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    AssignSegment(Assignment),
    ArrivedWaypoint { at: Point },
    PickupDone,
    MessageReceived(HandoffMessage),
    DropDone,
}

impl EventKind {
    fn name(&self) -> &'static str {
        match self {
            EventKind::AssignSegment(_) => "AssignSegment",
            EventKind::ArrivedWaypoint { .. } => "ArrivedWaypoint",
            EventKind::PickupDone => "PickupDone",
            EventKind::MessageReceived(m) => match m.kind {
                MessageKind::HandoffReady => "MessageReceived(HandoffReady)",
                MessageKind::HandoffAck => "MessageReceived(HandoffAck)",
                MessageKind::TaskComplete => "MessageReceived(TaskComplete)",
            },
            EventKind::DropDone => "DropDone",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmEvent {
    pub tick: u64,
    pub kind: EventKind,
}

impl FsmEvent {
    pub fn new(tick: u64, kind: EventKind) -> Self {
        FsmEvent { tick, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("robot {robot}: {event} is not legal in state {state}")]
pub struct IllegalTransition {
    pub robot: RobotId,
    pub state: FsmState,
    pub event: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFsm {
    pub robot_id: RobotId,
    pub state: FsmState,
    pub role: Role,
    pub waypoints: VecDeque<Waypoint>,
    pub carrying: Option<String>,
    pub status_led: StatusLed,
    task_id: u64,
    item: String,
    previous: Option<RobotId>,
    next: Option<RobotId>,
    position: Option<Point>,
    /// At the incoming transfer, waiting for the sender's signal.
    awaiting_handoff: bool,
    /// Ready signal received before reaching the incoming transfer.
    held_ready: Option<HandoffMessage>,
}

impl RobotFsm {
    /// A fresh idle robot. Robots that never get an assignment are bystanders.
    pub fn new(robot_id: RobotId) -> Self {
        RobotFsm {
            robot_id,
            state: FsmState::Idle,
            role: Role::Bystander,
            waypoints: VecDeque::new(),
            carrying: None,
            status_led: StatusLed::Off,
            task_id: 0,
            item: String::new(),
            previous: None,
            next: None,
            position: None,
            awaiting_handoff: false,
            held_ready: None,
        }
    }

    pub fn current_waypoint(&self) -> Option<&Waypoint> {
        self.waypoints.front()
    }

    /// Whether the driver should move this robot towards its next waypoint.
    pub fn wants_to_move(&self) -> bool {
        self.state == FsmState::Navigate && !self.awaiting_handoff
    }

    pub fn is_awaiting_handoff(&self) -> bool {
        self.awaiting_handoff
    }

    pub fn previous(&self) -> Option<RobotId> {
        self.previous
    }

    pub fn next(&self) -> Option<RobotId> {
        self.next
    }

    /// Applies `event` and returns the messages it emits.
    pub fn step(&mut self, event: &FsmEvent) -> Result<Vec<HandoffMessage>, IllegalTransition> {
        let illegal = |fsm: &RobotFsm| IllegalTransition {
            robot: fsm.robot_id,
            state: fsm.state,
            event: event.kind.name(),
        };
        let front = self.waypoints.front().map(|w| w.kind);
        let mut out = Vec::new();

        match (&event.kind, self.state) {
            (EventKind::AssignSegment(a), FsmState::Idle)
                if a.role != Role::Bystander
                    && !a.waypoints.is_empty()
                    && self.role == Role::Bystander =>
            {
                self.role = a.role;
                self.task_id = a.task_id;
                self.item = a.item.clone();
                self.previous = a.previous;
                self.next = a.next;
                self.waypoints = a.waypoints.iter().copied().collect();
                self.state = FsmState::Navigate;
            }
            (EventKind::ArrivedWaypoint { at }, FsmState::Navigate) if !self.awaiting_handoff => {
                self.position = Some(*at);
                match front {
                    Some(WaypointKind::Pickup) if self.carrying.is_none() => {
                        self.waypoints.pop_front();
                        self.state = FsmState::Pickup;
                    }
                    Some(WaypointKind::OutgoingTransfer) if self.carrying.is_some() => {
                        let to = self.next.ok_or_else(|| illegal(self))?;
                        self.waypoints.pop_front();
                        self.state = FsmState::Relay;
                        self.status_led = StatusLed::Blue;
                        out.push(self.message(MessageKind::HandoffReady, to, *at, event.tick));
                    }
                    Some(WaypointKind::IncomingTransfer) if self.carrying.is_none() => {
                        match self.held_ready.take() {
                            Some(ready) => out.push(self.accept(&ready, event.tick)),
                            None => self.awaiting_handoff = true,
                        }
                    }
                    Some(WaypointKind::Drop) if self.carrying.is_some() => {
                        self.waypoints.pop_front();
                        self.state = FsmState::Deliver;
                    }
                    _ => return Err(illegal(self)),
                }
            }
            (EventKind::PickupDone, FsmState::Pickup) => {
                self.carrying = Some(self.item.clone());
                self.status_led = StatusLed::Green;
                self.state = FsmState::Navigate;
            }
            (EventKind::MessageReceived(m), FsmState::Navigate)
                if m.kind == MessageKind::HandoffReady
                    && m.to == self.robot_id
                    && Some(m.from) == self.previous
                    && front == Some(WaypointKind::IncomingTransfer)
                    && self.held_ready.is_none() =>
            {
                if self.awaiting_handoff {
                    out.push(self.accept(m, event.tick));
                } else {
                    self.held_ready = Some(m.clone());
                }
            }
            (EventKind::MessageReceived(m), FsmState::Relay)
                if m.kind == MessageKind::HandoffAck
                    && m.to == self.robot_id
                    && Some(m.from) == self.next =>
            {
                self.carrying = None;
                self.status_led = StatusLed::Off;
                self.state = FsmState::Idle;
            }
            (EventKind::DropDone, FsmState::Deliver) => {
                self.carrying = None;
                self.status_led = StatusLed::Off;
                self.state = FsmState::Idle;
                let at = self.position.unwrap_or(Point::new(f64::NAN, f64::NAN));
                out.push(self.message(MessageKind::TaskComplete, self.robot_id, at, event.tick));
            }
            _ => return Err(illegal(self)),
        }
        Ok(out)
    }

    /// Takes the item announced by `ready`; the ack echoes the handoff location.
    fn accept(&mut self, ready: &HandoffMessage, tick: u64) -> HandoffMessage {
        self.awaiting_handoff = false;
        self.waypoints.pop_front();
        self.carrying = Some(self.item.clone());
        self.status_led = StatusLed::Green;
        self.message(MessageKind::HandoffAck, ready.from, ready.at, tick)
    }

    fn message(&self, kind: MessageKind, to: RobotId, at: Point, tick: u64) -> HandoffMessage {
        HandoffMessage {
            kind,
            task_id: self.task_id,
            from: self.robot_id,
            to,
            at,
            tick,
            status_led: self.status_led,
        }
    }
}

/// Functional form of [`RobotFsm::step`].
pub fn fsm_step(
    mut fsm: RobotFsm,
    event: &FsmEvent,
) -> Result<(RobotFsm, Vec<HandoffMessage>), IllegalTransition> {
    let out = fsm.step(event)?;
    Ok((fsm, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn initiator() -> Assignment {
        Assignment {
            task_id: 7,
            role: Role::Initiator,
            item: "cup".into(),
            waypoints: vec![
                Waypoint {
                    kind: WaypointKind::Pickup,
                    point: p(1.5, 1.5),
                },
                Waypoint {
                    kind: WaypointKind::OutgoingTransfer,
                    point: p(5.0, 1.5),
                },
            ],
            previous: None,
            next: Some(RobotId(2)),
        }
    }

    fn receiver() -> Assignment {
        Assignment {
            task_id: 7,
            role: Role::Final,
            item: "cup".into(),
            waypoints: vec![
                Waypoint {
                    kind: WaypointKind::IncomingTransfer,
                    point: p(5.0, 1.5),
                },
                Waypoint {
                    kind: WaypointKind::Drop,
                    point: p(9.5, 1.5),
                },
            ],
            previous: Some(RobotId(1)),
            next: None,
        }
    }

    fn ev(tick: u64, kind: EventKind) -> FsmEvent {
        FsmEvent::new(tick, kind)
    }

    #[test]
    fn assign_starts_navigation() {
        let (fsm, out) = fsm_step(
            RobotFsm::new(RobotId(1)),
            &ev(0, EventKind::AssignSegment(initiator())),
        )
        .unwrap();
        assert_eq!(fsm.state, FsmState::Navigate);
        assert!(out.is_empty());
        assert!(fsm.wants_to_move());
    }

    #[test]
    fn full_sender_cycle() {
        let mut s = RobotFsm::new(RobotId(1));
        s.step(&ev(0, EventKind::AssignSegment(initiator())))
            .unwrap();
        s.step(&ev(3, EventKind::ArrivedWaypoint { at: p(1.5, 1.5) }))
            .unwrap();
        assert_eq!(s.state, FsmState::Pickup);
        assert_eq!(s.carrying, None);
        s.step(&ev(4, EventKind::PickupDone)).unwrap();
        assert_eq!(s.state, FsmState::Navigate);
        assert_eq!(s.carrying.as_deref(), Some("cup"));
        assert_eq!(s.status_led, StatusLed::Green);

        let out = s
            .step(&ev(8, EventKind::ArrivedWaypoint { at: p(4.5, 1.5) }))
            .unwrap();
        assert_eq!(s.state, FsmState::Relay);
        assert_eq!(out.len(), 1);
        let ready = &out[0];
        assert_eq!(ready.kind, MessageKind::HandoffReady);
        assert_eq!(
            (ready.from, ready.to, ready.tick),
            (RobotId(1), RobotId(2), 8)
        );
        assert_eq!(ready.status_led, StatusLed::Blue);

        let mut r = RobotFsm::new(RobotId(2));
        r.step(&ev(0, EventKind::AssignSegment(receiver())))
            .unwrap();
        r.step(&ev(5, EventKind::ArrivedWaypoint { at: p(5.5, 1.5) }))
            .unwrap();
        assert!(r.is_awaiting_handoff());
        assert!(!r.wants_to_move());
        let acks = r
            .step(&ev(8, EventKind::MessageReceived(ready.clone())))
            .unwrap();
        assert_eq!(acks[0].kind, MessageKind::HandoffAck);
        assert_eq!(acks[0].at, ready.at);
        assert_eq!(r.carrying.as_deref(), Some("cup"));
        assert_eq!(r.state, FsmState::Navigate);

        let none = s
            .step(&ev(9, EventKind::MessageReceived(acks[0].clone())))
            .unwrap();
        assert!(none.is_empty());
        assert_eq!(s.state, FsmState::Idle);
        assert_eq!(s.carrying, None);
        assert_eq!(s.status_led, StatusLed::Off);

        r.step(&ev(12, EventKind::ArrivedWaypoint { at: p(9.5, 1.5) }))
            .unwrap();
        assert_eq!(r.state, FsmState::Deliver);
        let done = r.step(&ev(13, EventKind::DropDone)).unwrap();
        assert_eq!(done[0].kind, MessageKind::TaskComplete);
        assert_eq!(done[0].at, p(9.5, 1.5));
        assert_eq!(r.state, FsmState::Idle);
        assert_eq!(r.carrying, None);
    }

    #[test]
    fn early_ready_is_held_until_arrival() {
        let ready = HandoffMessage {
            kind: MessageKind::HandoffReady,
            task_id: 7,
            from: RobotId(1),
            to: RobotId(2),
            at: p(4.5, 1.5),
            tick: 3,
            status_led: StatusLed::Blue,
        };
        let mut r = RobotFsm::new(RobotId(2));
        r.step(&ev(0, EventKind::AssignSegment(receiver())))
            .unwrap();
        assert!(r
            .step(&ev(3, EventKind::MessageReceived(ready.clone())))
            .unwrap()
            .is_empty());
        assert_eq!(r.carrying, None);
        let out = r
            .step(&ev(6, EventKind::ArrivedWaypoint { at: p(5.5, 1.5) }))
            .unwrap();
        assert_eq!(out[0].kind, MessageKind::HandoffAck);
        assert_eq!(out[0].tick, 6);
        assert!(r.carrying.is_some());
    }

    #[test]
    fn illegal_transitions() {
        let mut idle = RobotFsm::new(RobotId(4));
        let err = idle.step(&ev(0, EventKind::PickupDone)).unwrap_err();
        assert_eq!(err.state, FsmState::Idle);
        assert_eq!(err.event, "PickupDone");

        let bystander = Assignment {
            role: Role::Bystander,
            ..initiator()
        };
        assert!(idle
            .step(&ev(0, EventKind::AssignSegment(bystander)))
            .is_err());

        let mut s = RobotFsm::new(RobotId(1));
        s.step(&ev(0, EventKind::AssignSegment(initiator())))
            .unwrap();
        assert!(s.step(&ev(1, EventKind::DropDone)).is_err());
        assert!(s
            .step(&ev(1, EventKind::AssignSegment(initiator())))
            .is_err());
        // an ack from a stranger does not release the item
        s.step(&ev(1, EventKind::ArrivedWaypoint { at: p(1.5, 1.5) }))
            .unwrap();
        s.step(&ev(2, EventKind::PickupDone)).unwrap();
        s.step(&ev(3, EventKind::ArrivedWaypoint { at: p(4.5, 1.5) }))
            .unwrap();
        let stray = HandoffMessage {
            kind: MessageKind::HandoffAck,
            task_id: 7,
            from: RobotId(9),
            to: RobotId(1),
            at: p(4.5, 1.5),
            tick: 4,
            status_led: StatusLed::Green,
        };
        assert!(s.step(&ev(4, EventKind::MessageReceived(stray))).is_err());
        assert_eq!(s.state, FsmState::Relay);
    }

    #[test]
    fn deterministic_replay() {
        let events = vec![
            ev(0, EventKind::AssignSegment(initiator())),
            ev(2, EventKind::ArrivedWaypoint { at: p(1.5, 1.5) }),
            ev(3, EventKind::PickupDone),
            ev(6, EventKind::ArrivedWaypoint { at: p(4.5, 1.5) }),
        ];
        let run = || {
            let mut fsm = RobotFsm::new(RobotId(1));
            let mut trace = Vec::new();
            for e in &events {
                let out = fsm.step(e).unwrap();
                trace.push((fsm.state, out));
            }
            trace
        };
        assert_eq!(run(), run());
    }
}
