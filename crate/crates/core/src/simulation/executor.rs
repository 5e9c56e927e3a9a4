//! Tick-synchronous execution of a relay plan on the grid.
//!
//! Every tick, robots act in ascending id order. A robot first drains its
//! due messages, then performs one action: finish a pickup or drop, or move
//! one 4-connected cell along its current leg (arriving counts in the same
//! tick). A robot whose next cell is occupied waits; after two consecutive
//! waits it replans around every occupied cell.
//!
//! Robots never share a cell. Waypoints are served from the free cell
//! nearest to them, where "free" excludes cells of parked robots (idle,
//! relaying, or waiting for a handoff). At a transfer point the sender parks
//! on the nearest free cell and the receiver on a free neighbouring cell
//! (Chebyshev distance 1).

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::coordination::{
    assignments, EventKind, FsmEvent, FsmState, HandoffMessage, MessageBus, MessageKind, RobotFsm,
    WaypointKind,
};
use crate::geometry::{Point, RobotId};
use crate::planning::{astar_with, RelayPlan};
use crate::world::{cell_of, center_of, GridCell, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub message_delay: u64,
    pub tick_budget: u64,
}

/// Where the item is, according to the executor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Package {
    AtPickup,
    Carried(RobotId),
    Delivered,
}

/// Location check for one handoff signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffCheck {
    pub transfer: usize,
    pub kind: MessageKind,
    pub planned: Point,
    pub at: Point,
    pub distance: f64,
    /// Chebyshev distance between sender and receiver cells (acks only).
    pub separation: Option<u32>,
}

/// Invariants observed while executing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    /// Ticks at which more robots held the item than the handoff rule allows.
    pub possession_violations: u64,
    /// Ticks at which the package state disagreed with the robots' claims.
    pub conservation_violations: u64,
    /// Ticks at which a sender still held the item while its ack was in flight.
    pub overlap_ticks: u64,
    pub max_carriers: usize,
    pub handoffs: Vec<HandoffCheck>,
    /// Robots outside the chain that moved or signalled.
    pub bystander_activity: u64,
}

impl Monitor {
    /// True when every handoff signal lies within `radius` of its planned
    /// transfer point and every ack was exchanged between neighbouring cells.
    pub fn handoffs_local(&self, radius: f64) -> bool {
        self.handoffs
            .iter()
            .all(|h| h.distance <= radius + 1e-9 && h.separation.map_or(true, |s| s <= 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub completed: bool,
    pub ticks: u64,
    /// Executed moves of each active robot.
    pub moves: BTreeMap<RobotId, u64>,
    pub messages: Vec<HandoffMessage>,
    pub package: Package,
    pub monitor: Monitor,
}

impl Execution {
    pub fn total_moves(&self) -> u64 {
        self.moves.values().sum()
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }
}

struct Agent {
    id: RobotId,
    cell: GridCell,
    fsm: RobotFsm,
    moves: u64,
    route: VecDeque<GridCell>,
    route_goal: Option<GridCell>,
    waited: u32,
    active: bool,
}

impl Agent {
    fn parked(&self) -> bool {
        match self.fsm.state {
            FsmState::Idle | FsmState::Relay => true,
            FsmState::Navigate => self.fsm.is_awaiting_handoff(),
            FsmState::Pickup | FsmState::Deliver => false,
        }
    }
}

struct Sim<'a> {
    plan: &'a RelayPlan,
    grid: &'a OccupancyGrid,
    agents: Vec<Agent>,
    occupant: Vec<Option<usize>>,
    bus: MessageBus,
    log: Vec<HandoffMessage>,
    package: Package,
    monitor: Monitor,
    completed: bool,
}

/// Runs `plan` to completion or until the tick budget is spent.
pub fn execute(
    plan: &RelayPlan,
    grid: &OccupancyGrid,
    config: ExecConfig,
    task_id: u64,
) -> Result<Execution, SimError> {
    let mut robots = plan.robots.clone();
    robots.sort_by_key(|r| r.id);
    let mut occupant = vec![None; grid.len()];
    let mut agents = Vec::with_capacity(robots.len());
    for (idx, r) in robots.iter().enumerate() {
        let cell = cell_of(r.position, grid)?;
        if grid.is_blocked(cell) {
            return Err(SimError::InvalidPlacement(format!(
                "robot {} starts on a blocked cell",
                r.id
            )));
        }
        let slot = &mut occupant[grid.index(cell)];
        if slot.is_some() {
            return Err(SimError::InvalidPlacement(format!(
                "two robots start in cell {cell}"
            )));
        }
        *slot = Some(idx);
        agents.push(Agent {
            id: r.id,
            cell,
            fsm: RobotFsm::new(r.id),
            moves: 0,
            route: VecDeque::new(),
            route_goal: None,
            waited: 0,
            active: false,
        });
    }

    let mut sim = Sim {
        plan,
        grid,
        agents,
        occupant,
        bus: MessageBus::new(config.message_delay),
        log: Vec::new(),
        package: Package::AtPickup,
        monitor: Monitor::default(),
        completed: false,
    };

    for (id, assignment) in assignments(plan, task_id) {
        let idx = sim.index_of(id)?;
        sim.agents[idx].active = true;
        let out = sim.agents[idx]
            .fsm
            .step(&FsmEvent::new(0, EventKind::AssignSegment(assignment)))?;
        sim.dispatch(idx, out);
    }

    let mut ticks = config.tick_budget;
    for tick in 0..config.tick_budget {
        for idx in 0..sim.agents.len() {
            sim.act(idx, tick)?;
        }
        sim.observe();
        if sim.completed {
            ticks = tick + 1;
            break;
        }
    }

    let moves = sim
        .agents
        .iter()
        .filter(|a| a.active)
        .map(|a| (a.id, a.moves))
        .collect();
    Ok(Execution {
        completed: sim.completed,
        ticks,
        moves,
        messages: sim.log,
        package: sim.package,
        monitor: sim.monitor,
    })
}

impl Sim<'_> {
    fn index_of(&self, id: RobotId) -> Result<usize, SimError> {
        self.agents
            .binary_search_by_key(&id, |a| a.id)
            .map_err(|_| SimError::InvalidPlacement(format!("plan names unknown robot {id}")))
    }

    fn chain_position(&self, id: RobotId) -> Option<usize> {
        self.plan.active.iter().position(|&a| a == id)
    }

    fn act(&mut self, idx: usize, tick: u64) -> Result<(), SimError> {
        let id = self.agents[idx].id;
        for msg in self.bus.poll(id, tick) {
            let out = self.agents[idx]
                .fsm
                .step(&FsmEvent::new(tick, EventKind::MessageReceived(msg)))?;
            self.dispatch(idx, out);
        }
        match self.agents[idx].fsm.state {
            FsmState::Pickup => {
                let out = self.agents[idx]
                    .fsm
                    .step(&FsmEvent::new(tick, EventKind::PickupDone))?;
                self.package = Package::Carried(id);
                self.dispatch(idx, out);
            }
            FsmState::Deliver => {
                let out = self.agents[idx]
                    .fsm
                    .step(&FsmEvent::new(tick, EventKind::DropDone))?;
                self.package = Package::Delivered;
                self.dispatch(idx, out);
            }
            FsmState::Navigate if self.agents[idx].fsm.wants_to_move() => {
                let Some(target) = self.target_cell(idx) else {
                    return Ok(());
                };
                if self.agents[idx].cell != target {
                    self.advance(idx, target);
                }
                if self.agents[idx].cell == target {
                    let at = center_of(target, self.grid)?;
                    let event = FsmEvent::new(tick, EventKind::ArrivedWaypoint { at });
                    let out = self.agents[idx].fsm.step(&event)?;
                    self.dispatch(idx, out);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn dispatch(&mut self, idx: usize, messages: Vec<HandoffMessage>) {
        if !self.agents[idx].active && !messages.is_empty() {
            self.monitor.bystander_activity += 1;
        }
        for msg in messages {
            match msg.kind {
                MessageKind::HandoffReady => {
                    self.check_handoff(&msg, self.chain_position(msg.from), None);
                    self.bus.send(msg.clone());
                }
                MessageKind::HandoffAck => {
                    self.package = Package::Carried(msg.from);
                    let sender = self.index_of(msg.to).ok().map(|s| self.agents[s].cell);
                    let separation = sender.map(|c| c.chebyshev(self.agents[idx].cell));
                    let transfer = self.chain_position(msg.to);
                    self.check_handoff(&msg, transfer, separation);
                    self.bus.send(msg.clone());
                }
                MessageKind::TaskComplete => self.completed = true,
            }
            self.log.push(msg);
        }
    }

    fn check_handoff(
        &mut self,
        msg: &HandoffMessage,
        transfer: Option<usize>,
        separation: Option<u32>,
    ) {
        let Some(planned) = transfer.and_then(|j| self.plan.transfers.get(j).copied()) else {
            self.monitor.handoffs.push(HandoffCheck {
                transfer: usize::MAX,
                kind: msg.kind,
                planned: msg.at,
                at: msg.at,
                distance: f64::INFINITY,
                separation,
            });
            return;
        };
        self.monitor.handoffs.push(HandoffCheck {
            transfer: transfer.unwrap_or(usize::MAX),
            kind: msg.kind,
            planned,
            at: msg.at,
            distance: planned.distance(msg.at),
            separation,
        });
    }

    /// Cell from which the robot serves its current waypoint.
    fn target_cell(&self, idx: usize) -> Option<GridCell> {
        let agent = &self.agents[idx];
        let wp = *agent.fsm.current_waypoint()?;
        let partner = match wp.kind {
            WaypointKind::IncomingTransfer => agent.fsm.previous(),
            _ => None,
        };
        let blocked_by_parked = |c: GridCell, exempt: &[Option<RobotId>]| {
            self.occupant[self.grid.index(c)].is_some_and(|o| {
                let other = &self.agents[o];
                o != idx && other.parked() && !exempt.contains(&Some(other.id))
            })
        };
        match wp.kind {
            WaypointKind::Pickup | WaypointKind::Drop | WaypointKind::OutgoingTransfer => {
                self.nearest_free(wp.point, |c| !blocked_by_parked(c, &[]))
            }
            WaypointKind::IncomingTransfer => {
                let sender = partner.and_then(|p| self.index_of(p).ok());
                let handoff = match sender {
                    Some(s) if self.agents[s].fsm.state == FsmState::Relay => self.agents[s].cell,
                    _ => self.nearest_free(wp.point, |c| !blocked_by_parked(c, &[partner]))?,
                };
                if agent.cell.chebyshev(handoff) == 1 {
                    return Some(agent.cell);
                }
                // never wait on the cell the sender is standing in
                let sender_cell = sender.map(|s| self.agents[s].cell);
                let open = |c: GridCell| Some(c) != sender_cell && !blocked_by_parked(c, &[]);
                self.nearest_free(wp.point, |c| c.chebyshev(handoff) == 1 && open(c))
                    .or_else(|| self.nearest_free(wp.point, |c| c != handoff && open(c)))
            }
        }
    }

    /// Free cell whose center is nearest to `point` (row-major on ties).
    fn nearest_free(&self, point: Point, allowed: impl Fn(GridCell) -> bool) -> Option<GridCell> {
        let ws = self.grid.workspace();
        let lo = ws.min_corner();
        let (cw, ch) = (ws.cell_width(), ws.cell_height());
        let col0 = ((point.x - lo.x) / cw)
            .floor()
            .clamp(0.0, (self.grid.cols() - 1) as f64) as i64;
        let row0 = ((point.y - lo.y) / ch)
            .floor()
            .clamp(0.0, (self.grid.rows() - 1) as f64) as i64;
        let max_ring = self.grid.cols().max(self.grid.rows()) as i64;
        let step = cw.min(ch);

        let mut best: Option<(f64, GridCell)> = None;
        for ring in 0..=max_ring {
            if let Some((d, _)) = best {
                // every cell on this ring is at least this far away
                if (ring as f64 - 1.0) * step > d {
                    break;
                }
            }
            for dr in -ring..=ring {
                for dc in -ring..=ring {
                    if dr.abs().max(dc.abs()) != ring {
                        continue;
                    }
                    let (col, row) = (col0 + dc, row0 + dr);
                    if col < 0 || row < 0 {
                        continue;
                    }
                    let cell = GridCell::new(col as u32, row as u32);
                    if !self.grid.is_free(cell) || !allowed(cell) {
                        continue;
                    }
                    let center = center_of(cell, self.grid).expect("in bounds");
                    let d = center.distance(point);
                    let better = match best {
                        None => true,
                        Some((bd, bc)) => d < bd || (d == bd && cell < bc),
                    };
                    if better {
                        best = Some((d, cell));
                    }
                }
            }
        }
        best.map(|(_, c)| c)
    }

    fn occupied_by_other(&self, idx: usize, cell: GridCell) -> bool {
        self.occupant[self.grid.index(cell)].is_some_and(|o| o != idx)
    }

    fn parked_by_other(&self, idx: usize, cell: GridCell) -> bool {
        self.occupant[self.grid.index(cell)].is_some_and(|o| o != idx && self.agents[o].parked())
    }

    fn plan_route(&mut self, idx: usize, target: GridCell, avoid_all: bool) {
        let start = self.agents[idx].cell;
        let path = astar_with(self.grid, start, target, |c| {
            if avoid_all {
                !self.occupied_by_other(idx, c)
            } else {
                !self.parked_by_other(idx, c)
            }
        });
        let agent = &mut self.agents[idx];
        agent.route = path
            .map(|p| p.cells.into_iter().skip(1).collect())
            .unwrap_or_default();
        agent.route_goal = Some(target);
    }

    fn advance(&mut self, idx: usize, target: GridCell) {
        let stale = {
            let a = &self.agents[idx];
            a.route_goal != Some(target)
                || a.route.is_empty()
                || a.route.front().map_or(true, |&n| n.manhattan(a.cell) != 1)
                || a.route.iter().any(|&c| self.parked_by_other(idx, c))
        };
        if stale {
            self.plan_route(idx, target, false);
        }
        if self.agents[idx].waited >= 2 {
            self.plan_route(idx, target, true);
            if self.agents[idx].route.is_empty() {
                self.plan_route(idx, target, false);
            }
        }
        let Some(&next) = self.agents[idx].route.front() else {
            self.agents[idx].waited += 1;
            return;
        };
        if self.occupied_by_other(idx, next) {
            self.agents[idx].waited += 1;
            return;
        }
        let from = self.agents[idx].cell;
        let from_slot = self.grid.index(from);
        let to_slot = self.grid.index(next);
        self.occupant[from_slot] = None;
        self.occupant[to_slot] = Some(idx);
        let agent = &mut self.agents[idx];
        agent.route.pop_front();
        agent.cell = next;
        agent.moves += 1;
        agent.waited = 0;
        if !agent.active {
            self.monitor.bystander_activity += 1;
        }
    }

    /// End-of-tick possession and conservation checks. A sender that has
    /// released the item but not yet received the ack is tolerated.
    fn observe(&mut self) {
        let mut holders = Vec::new();
        let mut releasing = 0;
        for a in self.agents.iter().filter(|a| a.fsm.carrying.is_some()) {
            let acked = a.fsm.state == FsmState::Relay
                && a.fsm.next().is_some_and(|n| self.bus.in_flight(n, a.id));
            if acked {
                releasing += 1;
            } else {
                holders.push(a.id);
            }
        }
        self.monitor.max_carriers = self.monitor.max_carriers.max(holders.len() + releasing);
        if releasing > 0 {
            self.monitor.overlap_ticks += 1;
        }
        match self.package {
            Package::AtPickup | Package::Delivered => {
                if !holders.is_empty() {
                    self.monitor.conservation_violations += 1;
                }
            }
            Package::Carried(holder) => {
                if !holders.contains(&holder) {
                    self.monitor.conservation_violations += 1;
                }
                if holders.len() > 1 {
                    self.monitor.possession_violations += 1;
                }
            }
        }
    }
}
