//! Command loop: recommendations from matched scenarios, the expert approval
//! workflow for command tickets, dispatch with drone routing, and outcome
//! feedback.

mod ledger;
mod route;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::{Scene, Vec3};
use crate::incident::Timestamp;
use crate::library::{ActionKind, InterventionPlan, MatchResult, ScenarioRecord, Target};
use crate::status::OutcomeEntry;

pub use ledger::{ActionChange, LedgerEntry, OverrideLedger, PlanDelta, DEFAULT_PENALTY_FLOOR, DEFAULT_REJECTION_PENALTY};
pub use route::{
    astar, plan_drone_route, route_on, triangle_overlaps_box, RouteConfig, RouteError, RoutePlan, VoxelGrid,
    VoxelIndex, DEFAULT_CLEARANCE_M, DEFAULT_VOXEL_M,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommandError {
    #[error("no scenario matches to recommend from")]
    NoMatches,
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown ticket {0}")]
    UnknownTicket(u64),
    #[error("{action:?} is not allowed in state {from:?}")]
    IllegalTransition { from: TicketState, action: TicketAction },
    #[error("modify verdict without a modified plan")]
    MissingModifiedPlan,
    #[error("approver {0:?} already approved this ticket")]
    DuplicateApprover(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(&'static str),
    #[error(transparent)]
    Route(#[from] RouteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TicketState {
    Proposed,
    PendingApproval,
    Approved,
    Rejected,
    Dispatched,
    Executed,
    Failed,
}

impl TicketState {
    pub const ALL: [TicketState; 7] = [
        TicketState::Proposed,
        TicketState::PendingApproval,
        TicketState::Approved,
        TicketState::Rejected,
        TicketState::Dispatched,
        TicketState::Executed,
        TicketState::Failed,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TicketAction {
    Submit,
    Approve,
    Reject,
    Modify,
    Dispatch,
    ReportSuccess,
    ReportFailure,
}

impl TicketAction {
    pub const ALL: [TicketAction; 7] = [
        TicketAction::Submit,
        TicketAction::Approve,
        TicketAction::Reject,
        TicketAction::Modify,
        TicketAction::Dispatch,
        TicketAction::ReportSuccess,
        TicketAction::ReportFailure,
    ];
}

/// The ticket state machine. `None` marks an illegal transition.
///
/// An approval below quorum is legal but leaves the ticket pending; this table
/// gives the state once quorum is met.
pub fn transition(from: TicketState, action: TicketAction) -> Option<TicketState> {
    use TicketAction as A;
    use TicketState as S;
    match (from, action) {
        (S::Proposed, A::Submit) => Some(S::PendingApproval),
        (S::PendingApproval, A::Approve | A::Modify) => Some(S::Approved),
        (S::PendingApproval, A::Reject) => Some(S::Rejected),
        (S::Approved, A::Dispatch) => Some(S::Dispatched),
        (S::Dispatched, A::ReportSuccess) => Some(S::Executed),
        (S::Dispatched, A::ReportFailure) => Some(S::Failed),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Verdict {
    Approve,
    Reject,
    Modify,
}

impl Verdict {
    fn action(self) -> TicketAction {
        match self {
            Verdict::Approve => TicketAction::Approve,
            Verdict::Reject => TicketAction::Reject,
            Verdict::Modify => TicketAction::Modify,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Decision {
    pub approver_id: String,
    pub verdict: Verdict,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub modified_plan: Option<InterventionPlan>,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Outcome {
    pub success: bool,
    pub note: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DispatchRecord {
    pub timestamp: Timestamp,
    /// One route per drone action with a point target, in action order.
    pub routes: Vec<RoutePlan>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CommandTicket {
    pub id: u64,
    pub plan: InterventionPlan,
    pub scenario_id: String,
    pub state: TicketState,
    pub decisions: Vec<Decision>,
    pub dispatch: Option<DispatchRecord>,
    pub outcome: Option<Outcome>,
}

impl CommandTicket {
    pub fn has_approval(&self) -> bool {
        self.decisions
            .iter()
            .any(|d| matches!(d.verdict, Verdict::Approve | Verdict::Modify))
    }
}

/// One state change, in the order applied. Replaying the log rebuilds the desk.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "event", rename_all = "snake_case"))]
pub enum TicketEvent {
    Proposed {
        ticket_id: u64,
        scenario_id: String,
        plan: InterventionPlan,
        timestamp: Timestamp,
    },
    Submitted {
        ticket_id: u64,
        timestamp: Timestamp,
    },
    Decided {
        ticket_id: u64,
        decision: Decision,
    },
    Dispatched {
        ticket_id: u64,
        record: DispatchRecord,
    },
    OutcomeReported {
        ticket_id: u64,
        outcome: Outcome,
    },
}

impl TicketEvent {
    pub fn ticket_id(&self) -> u64 {
        match self {
            TicketEvent::Proposed { ticket_id, .. }
            | TicketEvent::Submitted { ticket_id, .. }
            | TicketEvent::Decided { ticket_id, .. }
            | TicketEvent::Dispatched { ticket_id, .. }
            | TicketEvent::OutcomeReported { ticket_id, .. } => *ticket_id,
        }
    }
}

/// What dispatch needs to know about the world.
#[derive(Debug, Clone, Copy)]
pub struct DispatchContext<'a> {
    pub scene: &'a Scene,
    /// Active flame spheres `(center, radius)`.
    pub flames: &'a [(Vec3, f64)],
    /// Where drones take off.
    pub drone_base: Vec3,
    pub route: RouteConfig,
}

/// Owns every ticket and the override ledger. All mutation goes through here.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandDesk {
    tickets: BTreeMap<u64, CommandTicket>,
    ledger: OverrideLedger,
    events: Vec<TicketEvent>,
    scenarios: BTreeSet<String>,
    quorum: usize,
    next_id: u64,
}

impl CommandDesk {
    /// Desk accepting plans from the given scenarios. `quorum` below 1 is treated as 1.
    pub fn new<I, S>(scenario_ids: I, quorum: usize, ledger: OverrideLedger) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tickets: BTreeMap::new(),
            ledger,
            events: Vec::new(),
            scenarios: scenario_ids.into_iter().map(Into::into).collect(),
            quorum: quorum.max(1),
            next_id: 1,
        }
    }

    pub fn for_library(library: &[ScenarioRecord]) -> Self {
        Self::new(library.iter().map(|s| s.id.clone()), 1, OverrideLedger::default())
    }

    pub fn quorum(&self) -> usize {
        self.quorum
    }

    pub fn ledger(&self) -> &OverrideLedger {
        &self.ledger
    }

    pub fn events(&self) -> &[TicketEvent] {
        &self.events
    }

    pub fn ticket(&self, id: u64) -> Option<&CommandTicket> {
        self.tickets.get(&id)
    }

    pub fn tickets(&self) -> impl Iterator<Item = &CommandTicket> {
        self.tickets.values()
    }

    /// Adds a ticket in `Proposed`.
    pub fn propose(
        &mut self,
        plan: InterventionPlan,
        scenario_id: &str,
        now: Timestamp,
    ) -> Result<&CommandTicket, CommandError> {
        plan.validate().map_err(CommandError::InvalidPlan)?;
        if !self.scenarios.contains(scenario_id) {
            return Err(CommandError::UnknownScenario(scenario_id.into()));
        }
        let id = self.next_id;
        self.apply(TicketEvent::Proposed {
            ticket_id: id,
            scenario_id: scenario_id.into(),
            plan,
            timestamp: now,
        })?;
        Ok(&self.tickets[&id])
    }

    /// Moves a proposed ticket to `PendingApproval`.
    pub fn submit_ticket(&mut self, id: u64, now: Timestamp) -> Result<&CommandTicket, CommandError> {
        self.check(id, TicketAction::Submit)?;
        self.apply(TicketEvent::Submitted {
            ticket_id: id,
            timestamp: now,
        })?;
        Ok(&self.tickets[&id])
    }

    /// Proposes and submits in one go.
    pub fn submit(
        &mut self,
        plan: InterventionPlan,
        scenario_id: &str,
        now: Timestamp,
    ) -> Result<&CommandTicket, CommandError> {
        let id = self.propose(plan, scenario_id, now)?.id;
        self.submit_ticket(id, now)
    }

    pub fn decide(&mut self, id: u64, decision: Decision) -> Result<&CommandTicket, CommandError> {
        let ticket = self.check(id, decision.verdict.action())?;
        match decision.verdict {
            Verdict::Modify => match &decision.modified_plan {
                None => return Err(CommandError::MissingModifiedPlan),
                Some(p) => p.validate().map_err(CommandError::InvalidPlan)?,
            },
            Verdict::Approve => {
                let dup = ticket
                    .decisions
                    .iter()
                    .any(|d| d.verdict == Verdict::Approve && d.approver_id == decision.approver_id);
                if dup {
                    return Err(CommandError::DuplicateApprover(decision.approver_id));
                }
            }
            Verdict::Reject => {}
        }
        self.apply(TicketEvent::Decided { ticket_id: id, decision })?;
        Ok(&self.tickets[&id])
    }

    /// Dispatches an approved ticket, planning a route for every drone action
    /// with a point target.
    ///
    /// A target inside blocked space is moved to the nearest free voxel, since
    /// drones act on a fire from outside its clearance.
    pub fn dispatch(
        &mut self,
        id: u64,
        ctx: &DispatchContext<'_>,
        now: Timestamp,
    ) -> Result<&CommandTicket, CommandError> {
        let ticket = self.check(id, TicketAction::Dispatch)?;
        let drone_targets: Vec<Vec3> = ticket
            .plan
            .actions
            .iter()
            .filter(|a| a.kind == ActionKind::DeployDrone)
            .filter_map(|a| match a.target {
                Target::Point(p) => Some(p),
                Target::Zone(_) => None,
            })
            .collect();
        let mut routes = Vec::with_capacity(drone_targets.len());
        if !drone_targets.is_empty() {
            let grid = VoxelGrid::build(ctx.scene, ctx.flames, ctx.route)?;
            for goal in drone_targets {
                let cell = grid.index_of(goal).ok_or(RouteError::OutOfBounds(goal))?;
                let goal = if grid.is_blocked(cell) {
                    let free = grid
                        .nearest_free(goal)
                        .ok_or(RouteError::RouteBlocked("no free voxel near the target"))?;
                    grid.center(free)
                } else {
                    goal
                };
                routes.push(route_on(&grid, ctx.drone_base, goal, ctx.route.clearance)?);
            }
        }
        self.apply(TicketEvent::Dispatched {
            ticket_id: id,
            record: DispatchRecord { timestamp: now, routes },
        })?;
        Ok(&self.tickets[&id])
    }

    /// Closes a dispatched ticket. The returned entry belongs in the status log.
    pub fn report_outcome(
        &mut self,
        id: u64,
        success: bool,
        note: &str,
        now: Timestamp,
    ) -> Result<OutcomeEntry, CommandError> {
        let action = if success {
            TicketAction::ReportSuccess
        } else {
            TicketAction::ReportFailure
        };
        self.check(id, action)?;
        self.apply(TicketEvent::OutcomeReported {
            ticket_id: id,
            outcome: Outcome {
                success,
                note: note.into(),
                timestamp: now,
            },
        })?;
        Ok(OutcomeEntry {
            ticket_id: id,
            success,
            note: note.into(),
            timestamp: now,
        })
    }

    /// Rebuilds a desk from its event log. Scenario ids are taken from the log.
    pub fn replay(events: &[TicketEvent], quorum: usize, ledger: OverrideLedger) -> Result<Self, CommandError> {
        let ids = events.iter().filter_map(|e| match e {
            TicketEvent::Proposed { scenario_id, .. } => Some(scenario_id.clone()),
            _ => None,
        });
        let mut desk = Self::new(ids, quorum, ledger);
        for e in events {
            if !matches!(e, TicketEvent::Proposed { .. }) {
                let action = match e {
                    TicketEvent::Submitted { .. } => TicketAction::Submit,
                    TicketEvent::Decided { decision, .. } => decision.verdict.action(),
                    TicketEvent::Dispatched { .. } => TicketAction::Dispatch,
                    TicketEvent::OutcomeReported { outcome, .. } if outcome.success => TicketAction::ReportSuccess,
                    _ => TicketAction::ReportFailure,
                };
                desk.check(e.ticket_id(), action)?;
            }
            desk.apply(e.clone())?;
        }
        Ok(desk)
    }

    fn check(&self, id: u64, action: TicketAction) -> Result<&CommandTicket, CommandError> {
        let t = self.tickets.get(&id).ok_or(CommandError::UnknownTicket(id))?;
        match transition(t.state, action) {
            Some(_) => Ok(t),
            None => Err(CommandError::IllegalTransition { from: t.state, action }),
        }
    }

    /// Applies an already validated event.
    fn apply(&mut self, event: TicketEvent) -> Result<(), CommandError> {
        match &event {
            TicketEvent::Proposed {
                ticket_id,
                scenario_id,
                plan,
                ..
            } => {
                self.tickets.insert(
                    *ticket_id,
                    CommandTicket {
                        id: *ticket_id,
                        plan: plan.clone(),
                        scenario_id: scenario_id.clone(),
                        state: TicketState::Proposed,
                        decisions: Vec::new(),
                        dispatch: None,
                        outcome: None,
                    },
                );
                self.next_id = self.next_id.max(ticket_id + 1);
            }
            TicketEvent::Submitted { ticket_id, .. } => {
                self.ticket_mut(*ticket_id)?.state = TicketState::PendingApproval;
            }
            TicketEvent::Decided { ticket_id, decision } => {
                let quorum = self.quorum;
                let t = self.ticket_mut(*ticket_id)?;
                let old_plan = t.plan.clone();
                let scenario_id = t.scenario_id.clone();
                t.decisions.push(decision.clone());
                let mut delta = None;
                match decision.verdict {
                    Verdict::Approve => {
                        let approvals = t.decisions.iter().filter(|d| d.verdict == Verdict::Approve).count();
                        if approvals >= quorum {
                            t.state = TicketState::Approved;
                        }
                    }
                    Verdict::Reject => t.state = TicketState::Rejected,
                    Verdict::Modify => {
                        let new_plan = decision.modified_plan.clone().ok_or(CommandError::MissingModifiedPlan)?;
                        delta = Some(PlanDelta::between(&old_plan, &new_plan));
                        t.plan = new_plan;
                        t.state = TicketState::Approved;
                    }
                }
                if decision.verdict != Verdict::Approve {
                    self.ledger.record(LedgerEntry {
                        scenario_id,
                        plan_id: old_plan.id,
                        verdict: decision.verdict,
                        timestamp: decision.timestamp,
                        delta,
                    });
                }
            }
            TicketEvent::Dispatched { ticket_id, record } => {
                let t = self.ticket_mut(*ticket_id)?;
                t.dispatch = Some(record.clone());
                t.state = TicketState::Dispatched;
            }
            TicketEvent::OutcomeReported { ticket_id, outcome } => {
                let t = self.ticket_mut(*ticket_id)?;
                t.state = if outcome.success {
                    TicketState::Executed
                } else {
                    TicketState::Failed
                };
                t.outcome = Some(outcome.clone());
            }
        }
        self.events.push(event);
        Ok(())
    }

    fn ticket_mut(&mut self, id: u64) -> Result<&mut CommandTicket, CommandError> {
        self.tickets.get_mut(&id).ok_or(CommandError::UnknownTicket(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RecommendWeights {
    pub effectiveness: f64,
    pub cost_efficiency: f64,
    pub response_speed: f64,
}

impl Default for RecommendWeights {
    fn default() -> Self {
        Self {
            effectiveness: 0.5,
            cost_efficiency: 0.25,
            response_speed: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Recommendation {
    pub scenario_id: String,
    pub plan: InterventionPlan,
    pub penalty: f64,
    pub score: f64,
}

/// Plans of the best-matching scenario, scored and sorted descending (ties by plan id).
pub fn recommend(
    matches: &[MatchResult],
    library: &[ScenarioRecord],
    ledger: &OverrideLedger,
    weights: &RecommendWeights,
) -> Result<Vec<Recommendation>, CommandError> {
    let top = matches.first().ok_or(CommandError::NoMatches)?;
    let scenario = library
        .iter()
        .find(|s| s.id == top.scenario_id)
        .ok_or_else(|| CommandError::UnknownScenario(top.scenario_id.clone()))?;
    let mut out: Vec<Recommendation> = scenario
        .plans
        .iter()
        .map(|p| {
            let penalty = ledger.penalty(&scenario.id, &p.id);
            let base = weights.effectiveness * p.effectiveness
                + weights.cost_efficiency * p.cost_efficiency
                + weights.response_speed * p.response_speed;
            Recommendation {
                scenario_id: scenario.id.clone(),
                plan: p.clone(),
                penalty,
                score: base * penalty,
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.plan.id.cmp(&b.plan.id)));
    Ok(out)
}
