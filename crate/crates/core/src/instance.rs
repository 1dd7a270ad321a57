//! Requests, instances and schedules, plus the feasibility checker that
//! every policy and oracle output is held to.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{diameter, tsp_best_effort, MetricSpace, Node};
use crate::Caps;

/// Integer clock; the first usable tick is 1.
pub type Time = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u32);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A unit-service demand at `node`, startable at any tick in
/// `[release, deadline]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    #[serde(rename = "r")]
    pub release: Time,
    #[serde(rename = "d")]
    pub deadline: Time,
    #[serde(rename = "v")]
    pub node: Node,
}

impl Request {
    pub fn window_len(&self) -> Time {
        self.deadline.saturating_sub(self.release)
    }

    /// True when no start tick remains (only produced by window transforms).
    pub fn infeasible_window(&self) -> bool {
        self.deadline < self.release
    }

    pub fn contains(&self, t: Time) -> bool {
        self.release <= t && t <= self.deadline
    }
}

/// A metric plus its request sequence, sorted by `(release, id)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    metric: MetricSpace,
    requests: Vec<Request>,
    scale: u64,
    seed: Option<u64>,
}

/// On-disk form:
/// `{"scale": int, "metric": {...}, "requests": [{"id","r","d","v"}]}`
/// with an optional `"seed"` recorded by generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub scale: u64,
    pub metric: MetricSpace,
    pub requests: Vec<Request>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        let mut inst = Instance::new(f.metric, f.requests, f.scale)?;
        inst.seed = f.seed;
        Ok(inst)
    }
}

impl From<Instance> for InstanceFile {
    fn from(i: Instance) -> Self {
        InstanceFile {
            scale: i.scale,
            metric: i.metric,
            requests: i.requests,
            seed: i.seed,
        }
    }
}

impl Instance {
    /// Validates and sorts. Windows must satisfy `1 <= r` and `d >= r + 1`.
    pub fn new(metric: MetricSpace, requests: Vec<Request>, scale: u64) -> Result<Self> {
        for r in &requests {
            if r.release < 1 {
                return Err(Error::InvalidRequest {
                    id: r.id,
                    reason: "release time must be at least 1",
                });
            }
            if r.deadline < r.release + 1 {
                return Err(Error::InvalidRequest {
                    id: r.id,
                    reason: "window length must be at least 1",
                });
            }
        }
        Self::assemble(metric, requests, scale)
    }

    /// Like [`Instance::new`] but admits short or empty windows; used by
    /// the window transforms.
    pub(crate) fn assemble(metric: MetricSpace, mut requests: Vec<Request>, scale: u64) -> Result<Self> {
        if scale == 0 {
            return Err(Error::PreconditionViolated("scale must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for r in &requests {
            metric.check_node(r.node)?;
            if !ids.insert(r.id) {
                return Err(Error::InvalidRequest {
                    id: r.id,
                    reason: "duplicate request id",
                });
            }
        }
        requests.sort_by_key(|r| (r.release, r.id));
        Ok(Instance {
            metric,
            requests,
            scale,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn by_id(&self) -> BTreeMap<RequestId, Request> {
        self.requests.iter().map(|r| (r.id, *r)).collect()
    }

    pub fn max_deadline(&self) -> Time {
        self.requests.iter().map(|r| r.deadline).max().unwrap_or(0)
    }

    /// Requests whose window has become empty.
    pub fn infeasible_requests(&self) -> Vec<RequestId> {
        self.requests
            .iter()
            .filter(|r| r.infeasible_window())
            .map(|r| r.id)
            .collect()
    }

    /// Same metric, only the requests not in `ids`.
    pub fn without(&self, ids: &BTreeSet<RequestId>) -> Instance {
        Instance {
            metric: self.metric.clone(),
            requests: self.requests.iter().filter(|r| !ids.contains(&r.id)).copied().collect(),
            scale: self.scale,
            seed: self.seed,
        }
    }
}

/// Minimum window length over all requests.
pub fn laxity(inst: &Instance) -> Result<Time> {
    inst.requests
        .iter()
        .map(|r| r.window_len())
        .min()
        .ok_or(Error::EmptyInstance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// `L < Δ/2`: no online algorithm is competitive.
    A,
    /// `2Δ < L <= TSP`.
    B,
    /// `L > TSP`.
    C,
    /// `Δ/2 <= L <= 2Δ`: depends on the metric.
    Gap,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::Gap => "gap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: Case,
    pub laxity: Time,
    pub diameter: u64,
    pub tsp: u64,
    pub tsp_exact: bool,
    /// `L - 2Δ`; positive inside case B.
    pub margin: i64,
}

pub fn classify_laxity(laxity: Time, diameter: u64, tsp: u64) -> Case {
    if 2 * laxity < diameter {
        Case::A
    } else if laxity > tsp {
        Case::C
    } else if laxity > 2 * diameter {
        Case::B
    } else {
        Case::Gap
    }
}

pub fn classify_case(inst: &Instance, caps: &Caps) -> Result<CaseReport> {
    let l = laxity(inst)?;
    let d = diameter(&inst.metric);
    let (tour, exact) = tsp_best_effort(&inst.metric, caps.tsp);
    Ok(CaseReport {
        case: classify_laxity(l, d, tour.weight),
        laxity: l,
        diameter: d,
        tsp: tour.weight,
        tsp_exact: exact,
        margin: l as i64 - 2 * d as i64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaRatio {
    pub value: Ratio<u64>,
    /// False when the tour came from the doubling approximation.
    pub exact: bool,
}

/// `TSP(G) / L` as an exact fraction.
pub fn delta_ratio(inst: &Instance, caps: &Caps) -> Result<DeltaRatio> {
    let l = laxity(inst)?;
    if l == 0 {
        return Err(Error::PreconditionViolated("laxity must be at least 1".into()));
    }
    let (tour, exact) = tsp_best_effort(&inst.metric, caps.tsp);
    Ok(DeltaRatio {
        value: Ratio::new(tour.weight, l),
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// Unit service occupying `[start, start + 1)`.
    Serve { request: RequestId, start: Time },
    /// Occupies `[depart, depart + dist(from, to))`.
    Travel { from: Node, to: Node, depart: Time },
    /// Occupies `[start, end)`.
    Idle { start: Time, end: Time },
}

impl Action {
    pub fn start(&self) -> Time {
        match *self {
            Action::Serve { start, .. } => start,
            Action::Travel { depart, .. } => depart,
            Action::Idle { start, .. } => start,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub actions: Vec<Action>,
}

impl Schedule {
    pub fn throughput(&self) -> usize {
        self.served().count()
    }

    /// `(request, start)` for every serve, in schedule order.
    pub fn served(&self) -> impl Iterator<Item = (RequestId, Time)> + '_ {
        self.actions.iter().filter_map(|a| match *a {
            Action::Serve { request, start } => Some((request, start)),
            _ => None,
        })
    }

    pub fn served_ids(&self) -> BTreeSet<RequestId> {
        self.served().map(|(id, _)| id).collect()
    }
}

/// Which feasibility rule an action breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// (a) service start outside `[r, d]`.
    Window,
    /// (b) not enough time to travel between consecutive services.
    Travel,
    /// (c) action overlaps the previous one or has an empty interval.
    Overlap,
    /// (d) request served twice.
    Duplicate,
    /// (e) action before tick 1.
    BeforeStart,
    UnknownRequest,
    /// Travel chain inconsistent with where the vehicle is.
    Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub action_index: usize,
    pub action: Action,
}

pub fn validate_schedule(inst: &Instance, sched: &Schedule) -> Result<(), Vec<Violation>> {
    validate_schedule_from(inst, sched, None)
}

/// As [`validate_schedule`]; with `start` the vehicle is additionally
/// known to be at that node at tick 1.
pub fn validate_schedule_from(inst: &Instance, sched: &Schedule, start: Option<Node>) -> Result<(), Vec<Violation>> {
    let metric = &inst.metric;
    let by_id = inst.by_id();
    let mut out = Vec::new();
    let mut served = BTreeSet::new();
    let mut busy_until: Time = 0;
    let mut last_serve: Option<(Node, Time)> = start.map(|s| (s, 1));
    let mut location: Option<Node> = start;
    let mut arrived_by_travel = start.is_some();

    for (i, action) in sched.actions.iter().enumerate() {
        let mut flag = |rule| {
            out.push(Violation {
                rule,
                action_index: i,
                action: *action,
            })
        };
        let begin = action.start();
        let end = match *action {
            Action::Serve { start, .. } => start + 1,
            Action::Travel { from, to, depart } => {
                if from >= metric.n() || to >= metric.n() || from == to {
                    flag(Rule::Location);
                    depart + 1
                } else {
                    depart + metric.dist(from, to)
                }
            }
            Action::Idle { start, end } => {
                if end <= start {
                    flag(Rule::Overlap);
                }
                end
            }
        };
        if begin < 1 {
            flag(Rule::BeforeStart);
        }
        if begin < busy_until {
            flag(Rule::Overlap);
        }
        busy_until = busy_until.max(end);

        match *action {
            Action::Serve { request, start } => {
                let Some(req) = by_id.get(&request) else {
                    flag(Rule::UnknownRequest);
                    continue;
                };
                if !served.insert(request) {
                    flag(Rule::Duplicate);
                }
                if !req.contains(start) {
                    flag(Rule::Window);
                }
                if let Some((prev, prev_end)) = last_serve {
                    if prev != req.node && start < prev_end + metric.dist(prev, req.node) {
                        flag(Rule::Travel);
                    }
                }
                if arrived_by_travel && location.is_some_and(|l| l != req.node) {
                    flag(Rule::Location);
                }
                last_serve = Some((req.node, start + 1));
                location = Some(req.node);
                arrived_by_travel = false;
            }
            Action::Travel { from, to, .. } => {
                if location.is_some_and(|l| l != from) {
                    flag(Rule::Location);
                }
                location = Some(to);
                arrived_by_travel = true;
            }
            Action::Idle { .. } => {}
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
