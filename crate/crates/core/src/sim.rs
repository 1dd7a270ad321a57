//! Discrete-time execution of an online policy.
//!
//! Each tick `t = 1, 2, ...` the engine first reveals the requests released
//! at `t`, then (if the vehicle is free) asks the policy for one decision.
//! Serving takes one tick; travel is non-preemptive and takes the metric
//! distance. The output is a [`Schedule`] plus a per-tick [`Trace`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Action, Instance, Request, RequestId, Schedule, Time};
use crate::metric::{MetricSpace, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Serve { request: RequestId },
    TravelTo { node: Node },
    Idle,
}

/// Where the vehicle is at the start of a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Position {
    At {
        node: Node,
    },
    Transit {
        from: Node,
        to: Node,
        depart: Time,
        arrive: Time,
    },
}

impl Position {
    /// Current node, or the destination while travelling.
    pub fn reference(&self) -> Node {
        match *self {
            Position::At { node } => node,
            Position::Transit { to, .. } => to,
        }
    }
}

/// What a policy sees when asked for a decision. The vehicle is always
/// idle at `location` at that moment.
#[derive(Debug, Clone, Copy)]
pub struct EngineView<'a> {
    pub t: Time,
    pub location: Node,
    pub metric: &'a MetricSpace,
    /// Revealed, unserved requests with `deadline >= t`, by `(release, id)`.
    pub pending: &'a [Request],
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Called once per tick with the requests released at `t` (possibly
    /// none), before any decision at `t`.
    fn observe(&mut self, _t: Time, _released: &[Request]) {}

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision;
}

impl<P: Policy + ?Sized> Policy for alloc::boxed::Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn observe(&mut self, t: Time, released: &[Request]) {
        (**self).observe(t, released)
    }

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision {
        (**self).next_action(view)
    }
}

/// What an adaptive request source sees at the start of tick `t`, before
/// it releases anything.
#[derive(Debug, Clone, Copy)]
pub struct SourceView<'a> {
    pub t: Time,
    pub position: Position,
    pub metric: &'a MetricSpace,
    /// Actions issued so far (all started before `t`).
    pub actions: &'a [Action],
    pub served: &'a BTreeSet<RequestId>,
    pub pending: &'a [Request],
}

/// A request sequence that may depend on the policy's behaviour so far.
pub trait RequestSource {
    /// Requests released at `view.t`; each must have `release == view.t`.
    fn release(&mut self, view: &SourceView<'_>) -> Vec<Request>;

    /// Notes to attach to the trace at the current tick.
    fn drain_notes(&mut self) -> Vec<String> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: Time,
    pub position: Position,
    pub released: Vec<RequestId>,
    /// Pending count when the policy was (or would have been) asked.
    pub pending: usize,
    pub served: usize,
    /// The action started at this tick; `None` while busy.
    pub action: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub t: Time,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub ticks: Vec<TickRecord>,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub schedule: Schedule,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveRun {
    pub instance: Instance,
    pub schedule: Schedule,
    pub trace: Trace,
}

struct Engine<'a> {
    metric: &'a MetricSpace,
    position: Position,
    busy_until: Time,
    pending: Vec<Request>,
    served: BTreeSet<RequestId>,
    actions: Vec<Action>,
    trace: Trace,
}

impl<'a> Engine<'a> {
    fn new(metric: &'a MetricSpace, start: Node) -> Result<Self> {
        metric.check_node(start)?;
        Ok(Engine {
            metric,
            position: Position::At { node: start },
            busy_until: 1,
            pending: Vec::new(),
            served: BTreeSet::new(),
            actions: Vec::new(),
            trace: Trace::default(),
        })
    }

    fn push_idle(&mut self, t: Time) {
        if let Some(Action::Idle { end, .. }) = self.actions.last_mut() {
            if *end == t {
                *end = t + 1;
                return;
            }
        }
        self.actions.push(Action::Idle { start: t, end: t + 1 });
    }

    /// Reveal `released`, then let the policy act at `t`.
    fn tick<P: Policy + ?Sized>(&mut self, t: Time, released: Vec<Request>, policy: &mut P) -> Result<()> {
        let ids: Vec<RequestId> = released.iter().map(|r| r.id).collect();
        policy.observe(t, &released);
        self.pending.extend(released);
        self.pending.retain(|r| r.deadline >= t);

        if let Position::Transit { to, arrive, .. } = self.position {
            if arrive <= t {
                self.position = Position::At { node: to };
            }
        }
        let position = self.position;
        let mut record = TickRecord {
            t,
            position,
            released: ids,
            pending: self.pending.len(),
            served: self.served.len(),
            action: None,
        };
        if self.busy_until > t {
            self.trace.ticks.push(record);
            return Ok(());
        }
        let Position::At { node: here } = position else {
            unreachable!("vehicle is free only when it has arrived");
        };

        let view = EngineView {
            t,
            location: here,
            metric: self.metric,
            pending: &self.pending,
        };
        let action = match policy.next_action(&view) {
            Decision::Serve { request } => {
                let Some(idx) = self.pending.iter().position(|r| r.id == request) else {
                    return Err(Error::PolicyProtocol {
                        t,
                        reason: format!("serve of {request}, which is not pending"),
                    });
                };
                if self.pending[idx].node != here {
                    return Err(Error::PolicyProtocol {
                        t,
                        reason: format!("serve of {request} away from its node"),
                    });
                }
                self.pending.remove(idx);
                self.served.insert(request);
                self.busy_until = t + 1;
                let a = Action::Serve { request, start: t };
                self.actions.push(a);
                a
            }
            Decision::TravelTo { node } => {
                if node >= self.metric.n() || node == here {
                    return Err(Error::PolicyProtocol {
                        t,
                        reason: format!("travel from {here} to invalid node {node}"),
                    });
                }
                let arrive = t + self.metric.dist(here, node);
                self.position = Position::Transit {
                    from: here,
                    to: node,
                    depart: t,
                    arrive,
                };
                self.busy_until = arrive;
                let a = Action::Travel {
                    from: here,
                    to: node,
                    depart: t,
                };
                self.actions.push(a);
                a
            }
            Decision::Idle => {
                self.push_idle(t);
                self.busy_until = t + 1;
                Action::Idle { start: t, end: t + 1 }
            }
        };
        record.action = Some(action);
        self.trace.ticks.push(record);
        Ok(())
    }
}

/// Runs `policy` on a fixed instance from `start`, for ticks `1..=horizon`
/// (default: the latest deadline).
pub fn run<P: Policy + ?Sized>(inst: &Instance, policy: &mut P, start: Node, horizon: Option<Time>) -> Result<Run> {
    let max_d = inst.max_deadline();
    let horizon = horizon.unwrap_or(max_d);
    if horizon < max_d {
        return Err(Error::PreconditionViolated(format!(
            "horizon {horizon} is before the latest deadline {max_d}"
        )));
    }
    let mut engine = Engine::new(inst.metric(), start)?;
    let reqs = inst.requests();
    let mut next = 0;
    for t in 1..=horizon {
        let from = next;
        while next < reqs.len() && reqs[next].release <= t {
            next += 1;
        }
        engine.tick(t, reqs[from..next].to_vec(), policy)?;
    }
    Ok(Run {
        schedule: Schedule {
            actions: engine.actions,
        },
        trace: engine.trace,
    })
}

/// Runs `policy` against an adaptive `source` for ticks `1..=horizon` and
/// returns the request sequence the source generated.
pub fn run_adaptive<S, P>(
    metric: &MetricSpace,
    source: &mut S,
    policy: &mut P,
    start: Node,
    horizon: Time,
) -> Result<AdaptiveRun>
where
    S: RequestSource + ?Sized,
    P: Policy + ?Sized,
{
    let mut engine = Engine::new(metric, start)?;
    let mut all: Vec<Request> = Vec::new();
    let mut ids = BTreeSet::new();
    for t in 1..=horizon {
        let view = SourceView {
            t,
            position: engine.position_at(t),
            metric,
            actions: &engine.actions,
            served: &engine.served,
            pending: &engine.pending,
        };
        let released = source.release(&view);
        for r in &released {
            let bad = if r.release != t {
                Some("release differs from the current tick")
            } else if r.deadline < r.release + 1 {
                Some("window shorter than one tick")
            } else if r.node >= metric.n() {
                Some("node out of range")
            } else if !ids.insert(r.id) {
                Some("duplicate request id")
            } else {
                None
            };
            if let Some(reason) = bad {
                return Err(Error::SourceProtocol {
                    t,
                    reason: format!("{}: {reason}", r.id),
                });
            }
        }
        for note in source.drain_notes() {
            engine.trace.annotations.push(Annotation { t, note });
        }
        all.extend_from_slice(&released);
        engine.tick(t, released, policy)?;
    }
    Ok(AdaptiveRun {
        instance: Instance::new(metric.clone(), all, 1)?,
        schedule: Schedule {
            actions: engine.actions,
        },
        trace: engine.trace,
    })
}

impl Engine<'_> {
    /// Position as seen at the very start of tick `t`.
    fn position_at(&self, t: Time) -> Position {
        match self.position {
            Position::Transit { to, arrive, .. } if arrive <= t => Position::At { node: to },
            p => p,
        }
    }
}
