//! Online policies: the phase-based TSP-EDF and ORIENT-WINDOW, two greedy
//! baselines, and two trivial drivers (idle, scripted replay).
//!
//! Both phase policies split time into phases `[K(l-1), Kl)`. At the first
//! decision of phase `l` they plan from the requests released by the phase
//! start whose deadline, rounded down to a multiple of `K`, still allows a
//! serve inside the phase. The plan visits nodes in a fixed order, serving
//! each node's requests consecutively; whatever no longer fits before the
//! phase ends is dropped.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Action, Request, RequestId, Schedule, Time};
use crate::metric::{diameter, tsp_approx, tsp_exact, MetricSpace, Node, Tour};
use crate::num::ceil_sqrt;
use crate::orienteering::{orienteering_exact, orienteering_greedy};
use crate::sim::{Decision, EngineView, Policy};
use crate::Caps;

/// `K * floor(d / K)`.
pub fn decreased_deadline(d: Time, k: Time) -> Time {
    k * (d / k)
}

/// Phase index of tick `t` (phases are 1-based and cover `[K(l-1), Kl)`).
pub fn phase_of(t: Time, k: Time) -> u64 {
    t / k + 1
}

/// Released by the phase start, and the decreased deadline reaches the
/// last serve tick `Kl - 1` of the phase.
pub fn eligible(r: &Request, k: Time, phase: u64) -> bool {
    r.release <= k * (phase - 1) && decreased_deadline(r.deadline, k) + 1 >= k * phase
}

/// `R^l` in EDF order of decreased deadline, ties by id.
fn eligible_edf(pending: &[Request], k: Time, phase: u64) -> Vec<Request> {
    let mut out: Vec<Request> = pending.iter().filter(|r| eligible(r, k, phase)).copied().collect();
    out.sort_by_key(|r| (decreased_deadline(r.deadline, k), r.id));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Go(Node),
    Serve(RequestId),
}

/// Plan bookkeeping shared by the two phase policies.
#[derive(Debug, Clone)]
struct Phases {
    k: Time,
    current: u64,
    plan: VecDeque<Step>,
}

impl Phases {
    fn new(k: Time) -> Self {
        Phases {
            k,
            current: 0,
            plan: VecDeque::new(),
        }
    }

    fn decide(&mut self, view: &EngineView<'_>, build: impl FnOnce(&EngineView<'_>, u64) -> Vec<Step>) -> Decision {
        let phase = phase_of(view.t, self.k);
        if phase != self.current {
            self.current = phase;
            self.plan = build(view, phase).into();
        }
        let end = self.k * phase;
        let mut here = view.location;
        while let Some(&step) = self.plan.front() {
            match step {
                Step::Go(v) if v == here => {
                    self.plan.pop_front();
                    here = v;
                }
                Step::Go(v) => {
                    if view.t + view.metric.dist(here, v) < end {
                        self.plan.pop_front();
                        return Decision::TravelTo { node: v };
                    }
                    break;
                }
                Step::Serve(id) => {
                    let ok = view.pending.iter().any(|r| r.id == id && r.node == here);
                    if ok && view.t < end {
                        self.plan.pop_front();
                        return Decision::Serve { request: id };
                    }
                    break;
                }
            }
        }
        self.plan.clear();
        Decision::Idle
    }
}

/// Groups `requests` by node and lays them out in `node_order`.
fn layout(node_order: &[Node], requests: &[Request]) -> Vec<Step> {
    let mut steps = Vec::new();
    for &v in node_order {
        let mut first = true;
        for r in requests.iter().filter(|r| r.node == v) {
            if first {
                steps.push(Step::Go(v));
                first = false;
            }
            steps.push(Step::Serve(r.id));
        }
    }
    steps
}

/// Static facts about a constructed policy, reported with every run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub name: String,
    /// Phase length `K`, for the phase policies.
    pub phase_len: Option<Time>,
    /// Whether the run is inside the regime where the policy's competitive
    /// guarantee applies.
    pub guarantee: bool,
    /// Tour weight used by TSP-EDF and whether it is optimal.
    pub tour_weight: Option<u64>,
    pub tour_exact: Option<bool>,
    /// Whether ORIENT-WINDOW solves orienteering exactly.
    pub orienteering_exact: Option<bool>,
}

pub struct TspEdf {
    tour: Tour,
    phases: Phases,
    meta: PolicyMeta,
}

impl TspEdf {
    /// `K = max(1, ceil(sqrt(tour.weight * laxity)))`.
    pub fn new(tour: Tour, tour_exact: bool, laxity: Time) -> Self {
        let k = ceil_sqrt(tour.weight * laxity).max(1);
        let meta = PolicyMeta {
            name: "tsp-edf".into(),
            phase_len: Some(k),
            guarantee: laxity > 10 * tour.weight,
            tour_weight: Some(tour.weight),
            tour_exact: Some(tour_exact),
            orienteering_exact: None,
        };
        TspEdf {
            tour,
            phases: Phases::new(k),
            meta,
        }
    }

    pub fn for_metric(g: &MetricSpace, laxity: Time, tour: TourChoice, caps: &Caps) -> Result<Self> {
        let (t, exact) = match tour {
            TourChoice::Exact => (tsp_exact(g, caps.tsp)?, true),
            TourChoice::Approx => (tsp_approx(g), false),
            TourChoice::Auto => match tsp_exact(g, caps.tsp) {
                Ok(t) => (t, true),
                Err(_) => (tsp_approx(g), false),
            },
        };
        Ok(Self::new(t, exact, laxity))
    }

    pub fn k(&self) -> Time {
        self.phases.k
    }

    pub fn meta(&self) -> &PolicyMeta {
        &self.meta
    }
}

/// The tour rotated to start at `from`.
fn rotated(order: &[Node], from: Node) -> Vec<Node> {
    let at = order.iter().position(|&v| v == from).unwrap_or(0);
    order[at..].iter().chain(&order[..at]).copied().collect()
}

impl Policy for TspEdf {
    fn name(&self) -> &str {
        "tsp-edf"
    }

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision {
        let k = self.phases.k;
        let tour = &self.tour.order;
        self.phases.decide(view, |view, phase| {
            let mut s = eligible_edf(view.pending, k, phase);
            s.truncate(k as usize);
            layout(&rotated(tour, view.location), &s)
        })
    }
}

pub struct OrientWindow {
    budget: u64,
    exact_cap: Option<usize>,
    phases: Phases,
    meta: PolicyMeta,
}

impl OrientWindow {
    /// `K = max(1, 3 * diameter)`, orienteering budget `diameter`.
    pub fn new(g: &MetricSpace, laxity: Time, caps: &Caps) -> Self {
        let delta = diameter(g);
        let k = (3 * delta).max(1);
        let exact = g.n() <= caps.orienteering;
        let meta = PolicyMeta {
            name: "orient-window".into(),
            phase_len: Some(k),
            guarantee: laxity > 9 * delta && exact,
            tour_weight: None,
            tour_exact: None,
            orienteering_exact: Some(exact),
        };
        OrientWindow {
            budget: delta,
            exact_cap: exact.then_some(caps.orienteering),
            phases: Phases::new(k),
            meta,
        }
    }

    pub fn k(&self) -> Time {
        self.phases.k
    }

    pub fn meta(&self) -> &PolicyMeta {
        &self.meta
    }
}

impl Policy for OrientWindow {
    fn name(&self) -> &str {
        "orient-window"
    }

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision {
        let k = self.phases.k;
        let (budget, cap) = (self.budget, self.exact_cap);
        self.phases.decide(view, |view, phase| {
            let r = eligible_edf(view.pending, k, phase);
            let mut prizes = vec![0u64; view.metric.n()];
            for q in &r {
                prizes[q.node] += 1;
            }
            let sol = match cap {
                Some(c) => orienteering_exact(view.metric, &prizes, budget, c),
                None => orienteering_greedy(view.metric, &prizes, budget),
            }
            .expect("prize vector matches the metric");
            if sol.prize == 0 {
                return Vec::new();
            }
            let mut path = sol.path;
            let (a, b) = (path[0], path[path.len() - 1]);
            if view.metric.dist(view.location, b) < view.metric.dist(view.location, a) {
                path.reverse();
            }
            layout(&path, &r)
        })
    }
}

/// Requests still servable if the vehicle heads there now.
fn reachable<'a>(view: &'a EngineView<'_>) -> impl Iterator<Item = &'a Request> + 'a {
    view.pending
        .iter()
        .filter(move |r| view.t + view.metric.dist(view.location, r.node) <= r.deadline)
}

fn go_or_serve(view: &EngineView<'_>, r: Option<&Request>) -> Decision {
    match r {
        None => Decision::Idle,
        Some(r) if r.node == view.location => Decision::Serve { request: r.id },
        Some(r) => Decision::TravelTo { node: r.node },
    }
}

/// Heads for the reachable request with the earliest deadline (ties by id).
#[derive(Debug, Clone, Default)]
pub struct EdfGreedy;

impl Policy for EdfGreedy {
    fn name(&self) -> &str {
        "edf"
    }

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision {
        go_or_serve(view, reachable(view).min_by_key(|r| (r.deadline, r.id)))
    }
}

/// Heads for the closest reachable request (ties by deadline, then id).
#[derive(Debug, Clone, Default)]
pub struct NearestFirst;

impl Policy for NearestFirst {
    fn name(&self) -> &str {
        "nearest"
    }

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision {
        go_or_serve(
            view,
            reachable(view).min_by_key(|r| (view.metric.dist(view.location, r.node), r.deadline, r.id)),
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct IdlePolicy;

impl Policy for IdlePolicy {
    fn name(&self) -> &str {
        "idle"
    }

    fn next_action(&mut self, _: &EngineView<'_>) -> Decision {
        Decision::Idle
    }
}

/// Replays the serves and travels of a schedule at their recorded ticks and
/// idles in between.
#[derive(Debug, Clone)]
pub struct Scripted {
    actions: Vec<Action>,
    next: usize,
}

impl Scripted {
    pub fn new(schedule: &Schedule) -> Self {
        let actions = schedule
            .actions
            .iter()
            .filter(|a| !matches!(a, Action::Idle { .. }))
            .copied()
            .collect();
        Scripted { actions, next: 0 }
    }
}

impl Policy for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }

    fn next_action(&mut self, view: &EngineView<'_>) -> Decision {
        while self.next < self.actions.len() && self.actions[self.next].start() < view.t {
            self.next += 1;
        }
        match self.actions.get(self.next) {
            Some(a) if a.start() == view.t => {
                self.next += 1;
                match *a {
                    Action::Serve { request, .. } => Decision::Serve { request },
                    Action::Travel { to, .. } => Decision::TravelTo { node: to },
                    Action::Idle { .. } => Decision::Idle,
                }
            }
            _ => Decision::Idle,
        }
    }
}

/// Which tour TSP-EDF follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TourChoice {
    Exact,
    Approx,
    /// Exact when within the cap, else the doubling tour.
    #[default]
    Auto,
}

impl FromStr for TourChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(TourChoice::Exact),
            "approx" => Ok(TourChoice::Approx),
            "auto" => Ok(TourChoice::Auto),
            _ => Err(Error::PreconditionViolated(alloc::format!("unknown tour choice {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    TspEdf,
    OrientWindow,
    Edf,
    Nearest,
    Idle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::TspEdf,
        PolicyKind::OrientWindow,
        PolicyKind::Edf,
        PolicyKind::Nearest,
        PolicyKind::Idle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::TspEdf => "tsp-edf",
            PolicyKind::OrientWindow => "orient-window",
            PolicyKind::Edf => "edf",
            PolicyKind::Nearest => "nearest",
            PolicyKind::Idle => "idle",
        }
    }

    /// Builds the policy for metric `g` and laxity `laxity`.
    pub fn build(
        self,
        g: &MetricSpace,
        laxity: Time,
        tour: TourChoice,
        caps: &Caps,
    ) -> Result<(Box<dyn Policy + Send>, PolicyMeta)> {
        let plain = |name: &str| PolicyMeta {
            name: name.into(),
            phase_len: None,
            guarantee: false,
            tour_weight: None,
            tour_exact: None,
            orienteering_exact: None,
        };
        Ok(match self {
            PolicyKind::TspEdf => {
                let p = TspEdf::for_metric(g, laxity, tour, caps)?;
                let m = p.meta().clone();
                (Box::new(p), m)
            }
            PolicyKind::OrientWindow => {
                let p = OrientWindow::new(g, laxity, caps);
                let m = p.meta().clone();
                (Box::new(p), m)
            }
            PolicyKind::Edf => (Box::new(EdfGreedy), plain("edf")),
            PolicyKind::Nearest => (Box::new(NearestFirst), plain("nearest")),
            PolicyKind::Idle => (Box::new(IdlePolicy), plain("idle")),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::PreconditionViolated(alloc::format!("unknown policy {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::instance::{validate_schedule_from, Instance};
    use crate::sim::run;

    fn req(id: u32, r: Time, d: Time, v: Node) -> Request {
        Request {
            id: RequestId(id),
            release: r,
            deadline: d,
            node: v,
        }
    }

    #[test]
    fn phase_arithmetic() {
        assert_eq!(decreased_deadline(37, 10), 30);
        assert_eq!(phase_of(9, 10), 1);
        assert_eq!(phase_of(10, 10), 2);
        // released at the phase start is eligible, one tick later is not
        assert!(eligible(&req(0, 10, 40, 0), 10, 2));
        assert!(!eligible(&req(0, 11, 40, 0), 10, 2));
        // decreased deadline 20 covers the last serve tick 19 of phase 2
        assert!(eligible(&req(0, 5, 29, 0), 10, 2));
        assert!(!eligible(&req(0, 5, 19, 0), 10, 2));
    }

    #[test]
    fn tsp_edf_phase_length() {
        let p = TspEdf::new(
            Tour {
                order: vec![0, 1],
                weight: 4,
            },
            true,
            400,
        );
        assert_eq!(p.k(), 40);
        assert!(p.meta().guarantee);
        let tight = TspEdf::new(
            Tour {
                order: vec![0, 1],
                weight: 4,
            },
            true,
            40,
        );
        assert!(!tight.meta().guarantee);
        let single = TspEdf::new(
            Tour {
                order: vec![0],
                weight: 0,
            },
            true,
            5,
        );
        assert_eq!(single.k(), 1);
    }

    #[test]
    fn orient_window_phase_length() {
        let g = gen::path(4, 1);
        let p = OrientWindow::new(&g, 100, &Caps::default());
        assert_eq!(p.k(), 9);
        assert!(p.meta().guarantee);
    }

    #[test]
    fn orient_window_single_node_hotspot() {
        // diameter 2, K = 6; eight requests at node 2, start at node 0
        let g = gen::path(3, 1);
        let reqs: Vec<Request> = (0..8).map(|i| req(i, 1, 60, 2)).collect();
        let inst = Instance::new(g.clone(), reqs, 1).unwrap();
        let mut p = OrientWindow::new(&g, 59, &Caps::default());
        let out = run(&inst, &mut p, 0, None).unwrap();
        validate_schedule_from(&inst, &out.schedule, Some(0)).unwrap();
        // phase 2 is [6, 12): travel 2 ticks, then 4 = K - diameter serves
        let in_phase2 = out.schedule.served().filter(|&(_, s)| (6..12).contains(&s)).count();
        assert_eq!(in_phase2, 4);
        assert_eq!(out.schedule.throughput(), 8);
    }

    #[test]
    fn orient_window_idles_without_requests() {
        let g = gen::path(3, 1);
        let inst = Instance::new(g.clone(), vec![req(0, 20, 22, 1)], 1).unwrap();
        let mut p = OrientWindow::new(&g, 2, &Caps::default());
        let out = run(&inst, &mut p, 0, None).unwrap();
        assert_eq!(out.schedule.throughput(), 0);
        assert!(out.schedule.actions.iter().all(|a| matches!(a, Action::Idle { .. })));
    }

    #[test]
    fn edf_tie_goes_to_lower_id() {
        let inst = Instance::new(gen::uniform(1, 1), vec![req(3, 1, 5, 0), req(1, 1, 5, 0)], 1).unwrap();
        let out = run(&inst, &mut EdfGreedy, 0, None).unwrap();
        let order: Vec<RequestId> = out.schedule.served().map(|(id, _)| id).collect();
        assert_eq!(order, vec![RequestId(1), RequestId(3)]);
    }

    #[test]
    fn baselines_idle_without_feasible_requests() {
        let inst = Instance::new(gen::uniform(2, 5), vec![req(0, 1, 3, 1)], 1).unwrap();
        for p in [&mut EdfGreedy as &mut dyn Policy, &mut NearestFirst] {
            let out = run(&inst, p, 0, None).unwrap();
            assert_eq!(out.schedule.throughput(), 0);
            assert!(out.schedule.actions.iter().all(|a| matches!(a, Action::Idle { .. })));
        }
    }

    #[test]
    fn nearest_prefers_close_requests() {
        let g = gen::path(3, 2);
        let inst = Instance::new(g, vec![req(0, 1, 30, 2), req(1, 1, 30, 1)], 1).unwrap();
        let out = run(&inst, &mut NearestFirst, 0, None).unwrap();
        assert_eq!(
            out.schedule.actions[0],
            Action::Travel {
                from: 0,
                to: 1,
                depart: 1
            }
        );
    }

    /// Phase containment, deadline safety and per-phase travel budgets.
    #[test]
    fn phase_policies_respect_phase_structure() {
        let caps = Caps::default();
        for seed in 0..60u64 {
            let n = 2 + seed as usize % 5;
            let g = gen::random_metric(n, 4, seed);
            let inst = gen::random_instance(
                g.clone(),
                gen::RequestGen {
                    count: 25,
                    laxity: 6 + seed % 30,
                    slack: 20,
                    horizon: 60,
                },
                seed,
            );
            let l = crate::instance::laxity(&inst).unwrap();
            let tour = tsp_exact(&g, caps.tsp).unwrap();
            let delta = diameter(&g);
            let mut te = TspEdf::new(tour.clone(), true, l);
            let mut ow = OrientWindow::new(&g, l, &caps);
            let runs = [
                (te.k(), tour.weight, run(&inst, &mut te, 0, None).unwrap()),
                (ow.k(), 2 * delta, run(&inst, &mut ow, 0, None).unwrap()),
            ];
            for (k, travel_cap, out) in runs {
                validate_schedule_from(&inst, &out.schedule, Some(0)).unwrap();
                let mut travel = alloc::collections::BTreeMap::<u64, u64>::new();
                for a in &out.schedule.actions {
                    match *a {
                        Action::Serve { start, .. } => assert!(start < k * phase_of(start, k)),
                        Action::Travel { from, to, depart } => {
                            let ph = phase_of(depart, k);
                            assert!(depart + g.dist(from, to) < k * ph);
                            *travel.entry(ph).or_default() += g.dist(from, to);
                        }
                        Action::Idle { .. } => {}
                    }
                }
                assert!(travel.values().all(|&t| t <= travel_cap), "seed {seed}: {travel:?}");
            }
        }
    }

    #[test]
    fn scripted_replays_a_schedule() {
        let g = gen::random_metric(4, 3, 9);
        let inst = gen::random_instance(
            g,
            gen::RequestGen {
                count: 12,
                laxity: 5,
                slack: 5,
                horizon: 20,
            },
            9,
        );
        let first = run(&inst, &mut EdfGreedy, 0, None).unwrap();
        let again = run(&inst, &mut Scripted::new(&first.schedule), 0, None).unwrap();
        assert_eq!(first.schedule, again.schedule);
    }

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
