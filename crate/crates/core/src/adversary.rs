//! Adaptive lower-bound request sources.
//!
//! * Case A: when the laxity is below half the diameter, a request appears
//!   every `Δ+1` ticks at the node farthest from the vehicle, which can
//!   never reach it in time.
//! * Star blocks: blocks of `3F` ticks, `F = ceil(sqrt(w(S) L))`. Each
//!   block releases `F` short type-B requests at the spokes up front and one
//!   long type-A request at `v0` per tick. After each block the source
//!   checks the policy's backlog (Condition 1) and its throughput in the
//!   block (Condition 2) and ends the sequence with the matching final
//!   event; after `N` quiet blocks it ends with Case 3.
//! * General metric: the star blocks on the star embedding of `G`, with the
//!   vehicle travelling on `G`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_star, StarMetric};
use crate::error::{Error, Result};
use crate::instance::{Action, Instance, Request, RequestId, Schedule, Time};
use crate::metric::{diameter, tsp_best_effort, MetricSpace, Node};
use crate::num::ceil_sqrt;
use crate::offline::{bundle_state_count, constructive_opt_prime, opt_bundled, opt_exact};
use crate::policies::{PolicyKind, PolicyMeta, TourChoice};
use crate::sim::{run_adaptive, Policy, RequestSource, SourceView, Trace};
use crate::Caps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CaseA,
    Star,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    /// `([t, 3L], v0)`, one per tick.
    TypeA,
    /// `([t_i, L + t_i], v_j)`, released at a block start.
    TypeB,
    /// Released at the final event.
    Final,
    /// A Case A request.
    Emission,
}

/// How the sequence ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Case 1: `count` requests `([time, L + time], node)`.
    Backlog { time: Time, node: Node, count: u64 },
    /// Case 2: `count` requests `([time, 3L], v0)`.
    Idleness { time: Time, count: u64 },
    /// Case 3: `count` requests `([L + 1, 3L], v0)`.
    Travel { time: Time, count: u64 },
    /// Case A ran to completion.
    Emissions { count: u64 },
}

impl Termination {
    /// Termination case 1, 2 or 3; `None` for Case A.
    pub fn case(&self) -> Option<u8> {
        match self {
            Termination::Backlog { .. } => Some(1),
            Termination::Idleness { .. } => Some(2),
            Termination::Travel { .. } => Some(3),
            Termination::Emissions { .. } => None,
        }
    }

    /// Tick of the final event.
    pub fn time(&self) -> Option<Time> {
        match *self {
            Termination::Backlog { time, .. }
            | Termination::Idleness { time, .. }
            | Termination::Travel { time, .. } => Some(time),
            Termination::Emissions { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: u64,
    pub start: Time,
    /// First tick after the block.
    pub end: Time,
    /// Type-B requests released per node (zero at `v0`).
    pub type_b: Vec<u64>,
    /// Serves the policy started during the block.
    pub served: u64,
    /// Type-B requests still unserved and alive when the block ended.
    pub unserved_type_b: u64,
    pub condition1: bool,
    pub condition2: bool,
}

/// The counting observations every block transcript must satisfy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observations {
    /// A block with at most `2F` serves has at least `F` other ticks.
    pub idle_when_slow: bool,
    /// The final event happens by `L + 1`.
    pub final_by_l_plus_1: bool,
    /// Exactly one type-A request per tick before the final event, hence
    /// at most `L` of them.
    pub one_type_a_per_tick: bool,
    pub type_a_before_final: u64,
    /// Exactly `F` type-B requests per block, at most `L/3` overall.
    pub f_type_b_per_block: bool,
    pub type_b_before_final: u64,
}

impl Observations {
    pub fn hold(&self, laxity: Time) -> bool {
        self.idle_when_slow
            && self.final_by_l_plus_1
            && self.one_type_a_per_tick
            && self.type_a_before_final <= laxity
            && self.f_type_b_per_block
            && 3 * self.type_b_before_final <= laxity
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryTranscript {
    pub mode: Mode,
    pub v0: Node,
    pub laxity: Time,
    /// Star the blocks are accounted on (absent for Case A).
    pub star: Option<StarMetric>,
    /// Tour weight of the travel metric and whether it is exact.
    pub tsp: u64,
    pub tsp_exact: bool,
    pub f: u64,
    pub n_blocks: u64,
    pub blocks: Vec<BlockRecord>,
    pub termination: Option<Termination>,
    pub kinds: BTreeMap<RequestId, RequestKind>,
    /// The generated sequence on the travel metric.
    pub instance: Instance,
    pub observations: Option<Observations>,
    /// Policy travel time measured on the star and on the travel metric.
    pub alg_travel_star: Option<u64>,
    pub alg_travel_metric: u64,
}

impl AdversaryTranscript {
    pub fn kind_of(&self, id: RequestId) -> Option<RequestKind> {
        self.kinds.get(&id).copied()
    }

    /// Lower bound the constructive OPT′ must meet: `Y - 2w(S)` (star) or
    /// `Y - TSP(G)` (general) in Case 1, exactly `3L` in Cases 2 and 3,
    /// every emission for Case A. Returns `(bound, exact)`.
    pub fn opt_prime_target(&self) -> Option<(u64, bool)> {
        let y = self.instance.len() as u64;
        Some(match self.termination? {
            Termination::Backlog { .. } => {
                let slack = match self.mode {
                    Mode::General => self.tsp,
                    _ => 2 * self.star.as_ref().map_or(0, |s| s.total()),
                };
                (y.saturating_sub(slack), false)
            }
            Termination::Idleness { .. } | Termination::Travel { .. } => (3 * self.laxity, true),
            Termination::Emissions { count } => (count, true),
        })
    }
}

/// Requests of a Case A run: at ticks `k(Δ+1)`, `k = 1..=count`.
pub struct CaseA {
    laxity: Time,
    period: Time,
    count: u64,
    emitted: u64,
    kinds: BTreeMap<RequestId, RequestKind>,
}

impl CaseA {
    pub fn new(g: &MetricSpace, laxity: Time, count: u64) -> Result<Self> {
        let delta = diameter(g);
        if laxity == 0 || 2 * laxity >= delta {
            return Err(Error::PreconditionViolated(format!(
                "case A needs 1 <= L < diameter/2, got L = {laxity}, diameter = {delta}"
            )));
        }
        Ok(CaseA {
            laxity,
            period: delta + 1,
            count,
            emitted: 0,
            kinds: BTreeMap::new(),
        })
    }

    pub fn horizon(&self) -> Time {
        self.count * self.period + self.laxity
    }
}

/// Node farthest from `from`, smallest id among ties.
pub fn farthest_from(g: &MetricSpace, from: Node) -> Node {
    (0..g.n())
        .max_by_key(|&v| (g.dist(from, v), core::cmp::Reverse(v)))
        .expect("metric is nonempty")
}

impl RequestSource for CaseA {
    fn release(&mut self, view: &SourceView<'_>) -> Vec<Request> {
        if self.emitted >= self.count || !view.t.is_multiple_of(self.period) {
            return Vec::new();
        }
        let id = RequestId(self.emitted as u32);
        self.emitted += 1;
        self.kinds.insert(id, RequestKind::Emission);
        vec![Request {
            id,
            release: view.t,
            deadline: view.t + self.laxity,
            node: farthest_from(view.metric, view.position.reference()),
        }]
    }
}

/// Splits `f` over `weights` proportionally, rounding by largest
/// remainder (ties to the smaller index), so the parts sum to `f`.
pub fn proportional_split(f: u64, weights: &[u64]) -> Vec<u64> {
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut parts: Vec<u64> = weights.iter().map(|&w| f * w / total).collect();
    let mut rest = f - parts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&i| (core::cmp::Reverse(f * weights[i] % total), i));
    for i in order {
        if rest == 0 {
            break;
        }
        parts[i] += 1;
        rest -= 1;
    }
    parts
}

/// Block parameters `(F, N)`: `F = ceil(sqrt(w L))`, `N = max(1, floor(L / 3F))`.
pub fn block_params(weight: u64, laxity: Time) -> (u64, u64) {
    let f = ceil_sqrt(weight * laxity);
    (f, (laxity / (3 * f.max(1))).max(1))
}

/// Smallest laxity with `weight / L <= delta`.
pub fn laxity_for_delta(weight: u64, delta: Ratio<u64>) -> Result<Time> {
    if *delta.numer() == 0 {
        return Err(Error::PreconditionViolated("delta must be positive".into()));
    }
    Ok((weight * delta.denom()).div_ceil(*delta.numer()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Blocks { index: u64 },
    Tail,
    Done,
}

/// The star block adversary (also drives the general-metric mode).
pub struct Blocks {
    mode: Mode,
    star: StarMetric,
    v0: Node,
    v1: Node,
    laxity: Time,
    f: u64,
    n_blocks: u64,
    split: Vec<u64>,
    phase: Phase,
    next_id: u32,
    type_b: Vec<Request>,
    kinds: BTreeMap<RequestId, RequestKind>,
    blocks: Vec<BlockRecord>,
    termination: Option<Termination>,
    notes: Vec<String>,
    tsp: (u64, bool),
}

impl Blocks {
    /// Star mode. `v0` is the type-A node; every other leaf is a type-B
    /// node. Requires `9 w(S) <= L` and `3F <= L`.
    pub fn star(star: StarMetric, v0: Node, laxity: Time) -> Result<Self> {
        let (tour, exact) = tsp_best_effort(&star.to_metric()?, Caps::default().tsp);
        let total = star.total();
        Self::build(Mode::Star, star, v0, laxity, total, (tour.weight, exact))
    }

    /// General mode on `g`: blocks are computed on the star embedding of
    /// `g` rooted at `v0`. Requires `9 TSP(G) <= L` and `3F <= L`.
    pub fn general(g: &MetricSpace, v0: Node, laxity: Time, caps: &Caps) -> Result<Self> {
        g.check_node(v0)?;
        let emb = embed_star(g, v0);
        let (tour, exact) = tsp_best_effort(g, caps.tsp);
        Self::build(Mode::General, emb.star, v0, laxity, tour.weight, (tour.weight, exact))
    }

    fn build(
        mode: Mode,
        star: StarMetric,
        v0: Node,
        laxity: Time,
        delta_weight: u64,
        tsp: (u64, bool),
    ) -> Result<Self> {
        let n = star.n();
        if v0 >= n {
            return Err(Error::NodeOutOfRange { node: v0, n });
        }
        if n < 2 {
            return Err(Error::PreconditionViolated(
                "block adversary needs a type-B node".into(),
            ));
        }
        let spokes: Vec<u64> = (0..n).map(|j| if j == v0 { 0 } else { star.leaf_weights[j] }).collect();
        if spokes.iter().all(|&w| w == 0) {
            return Err(Error::PreconditionViolated("type-B nodes carry no star weight".into()));
        }
        if 9 * delta_weight > laxity {
            return Err(Error::PreconditionViolated(format!(
                "delta = {delta_weight}/{laxity} exceeds 1/9; use L >= {}",
                9 * delta_weight
            )));
        }
        let (f, n_blocks) = block_params(star.total(), laxity);
        if 3 * f > laxity {
            return Err(Error::PreconditionViolated(format!(
                "block length 3F = {} exceeds L = {laxity}",
                3 * f
            )));
        }
        let split = proportional_split(f, &spokes);
        let v1 = (0..n).find(|&j| j != v0).expect("n >= 2");
        Ok(Blocks {
            mode,
            star,
            v0,
            v1,
            laxity,
            f,
            n_blocks,
            split,
            phase: Phase::Blocks { index: 1 },
            next_id: 0,
            type_b: Vec::new(),
            kinds: BTreeMap::new(),
            blocks: Vec::new(),
            termination: None,
            notes: Vec::new(),
            tsp,
        })
    }

    pub fn f(&self) -> u64 {
        self.f
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_blocks
    }

    pub fn split(&self) -> &[u64] {
        &self.split
    }

    /// Last tick any request can be served.
    pub fn horizon(&self) -> Time {
        3 * self.laxity
    }

    pub fn block_start(&self, i: u64) -> Time {
        1 + 3 * (i - 1) * self.f
    }

    fn emit(&mut self, out: &mut Vec<Request>, kind: RequestKind, release: Time, deadline: Time, node: Node) {
        let id = RequestId(self.next_id);
        self.next_id += 1;
        self.kinds.insert(id, kind);
        let r = Request {
            id,
            release,
            deadline,
            node,
        };
        if kind == RequestKind::TypeB {
            self.type_b.push(r);
        }
        out.push(r);
    }

    fn open_block(&mut self, out: &mut Vec<Request>, t: Time) {
        for j in 0..self.split.len() {
            for _ in 0..self.split[j] {
                self.emit(out, RequestKind::TypeB, t, self.laxity + t, j);
            }
        }
    }

    fn close_block(&mut self, index: u64, t: Time, view: &SourceView<'_>) -> BlockRecord {
        let start = self.block_start(index);
        let served = view
            .actions
            .iter()
            .filter(|a| matches!(a, Action::Serve { start: s, .. } if *s >= start && *s < t))
            .count() as u64;
        let unserved = self
            .type_b
            .iter()
            .filter(|r| r.deadline >= t && !view.served.contains(&r.id))
            .count() as u64;
        let rec = BlockRecord {
            index,
            start,
            end: t,
            type_b: self.split.clone(),
            served,
            unserved_type_b: unserved,
            condition1: 2 * unserved >= self.f,
            condition2: served <= 2 * self.f,
        };
        self.notes.push(format!(
            "block {index} ends: served {served}, unserved type-B {unserved}, condition1 {}, condition2 {}",
            rec.condition1, rec.condition2
        ));
        rec
    }

    fn finish(&mut self, out: &mut Vec<Request>, term: Termination) {
        let l = self.laxity;
        match term {
            Termination::Backlog { time, node, count } => {
                for _ in 0..count {
                    self.emit(out, RequestKind::Final, time, l + time, node);
                }
            }
            Termination::Idleness { time, count } | Termination::Travel { time, count } => {
                for _ in 0..count {
                    self.emit(out, RequestKind::Final, time, 3 * l, self.v0);
                }
            }
            Termination::Emissions { .. } => unreachable!("not a block ending"),
        }
        self.notes
            .push(format!("final event: termination case {}", term.case().unwrap_or(0)));
        self.termination = Some(term);
        self.phase = Phase::Done;
    }

    fn type_a(&mut self, out: &mut Vec<Request>, t: Time) {
        self.emit(out, RequestKind::TypeA, t, 3 * self.laxity, self.v0);
    }

    fn observations(&self, inst: &Instance) -> Observations {
        let final_time = self.termination.and_then(|t| t.time()).unwrap_or(Time::MAX);
        let mut a_per_tick: BTreeMap<Time, u64> = BTreeMap::new();
        let mut b_before = 0;
        for r in inst.requests() {
            match self.kinds.get(&r.id) {
                Some(RequestKind::TypeA) => *a_per_tick.entry(r.release).or_default() += 1,
                Some(RequestKind::TypeB) if r.release < final_time => b_before += 1,
                _ => {}
            }
        }
        let one_per_tick = final_time != Time::MAX
            && (1..final_time).all(|t| a_per_tick.get(&t) == Some(&1))
            && a_per_tick.keys().all(|&t| t < final_time);
        Observations {
            idle_when_slow: self
                .blocks
                .iter()
                .all(|b| b.served > 2 * self.f || (b.end - b.start) - b.served >= self.f),
            final_by_l_plus_1: final_time <= self.laxity + 1,
            one_type_a_per_tick: one_per_tick,
            type_a_before_final: a_per_tick.values().sum(),
            f_type_b_per_block: self.blocks.iter().all(|b| b.type_b.iter().sum::<u64>() == self.f),
            type_b_before_final: b_before,
        }
    }
}

impl RequestSource for Blocks {
    fn release(&mut self, view: &SourceView<'_>) -> Vec<Request> {
        let t = view.t;
        let l = self.laxity;
        let mut out = Vec::new();
        match self.phase {
            Phase::Done => {}
            Phase::Tail => {
                if t <= l {
                    self.type_a(&mut out, t);
                } else {
                    self.finish(&mut out, Termination::Travel { time: t, count: 3 * l });
                }
            }
            Phase::Blocks { index } => {
                let start = self.block_start(index);
                let end = start + 3 * self.f;
                if t == start && index == 1 {
                    self.open_block(&mut out, t);
                    self.type_a(&mut out, t);
                } else if t < end {
                    self.type_a(&mut out, t);
                } else {
                    let rec = self.close_block(index, t, view);
                    let (c1, c2) = (rec.condition1, rec.condition2);
                    self.blocks.push(rec);
                    if c1 {
                        let node = self.v1;
                        self.finish(
                            &mut out,
                            Termination::Backlog {
                                time: t,
                                node,
                                count: l,
                            },
                        );
                    } else if c2 {
                        self.finish(&mut out, Termination::Idleness { time: t, count: 3 * l });
                    } else if index == self.n_blocks {
                        if t <= l {
                            self.phase = Phase::Tail;
                            self.type_a(&mut out, t);
                        } else {
                            self.finish(&mut out, Termination::Travel { time: t, count: 3 * l });
                        }
                    } else {
                        self.phase = Phase::Blocks { index: index + 1 };
                        self.open_block(&mut out, t);
                        self.type_a(&mut out, t);
                    }
                }
            }
        }
        out
    }

    fn drain_notes(&mut self) -> Vec<String> {
        core::mem::take(&mut self.notes)
    }
}

/// What to attack and with which sequence.
#[derive(Debug, Clone)]
pub enum AttackSpec {
    CaseA {
        metric: MetricSpace,
        laxity: Time,
        count: u64,
    },
    Star {
        star: StarMetric,
        v0: Node,
        laxity: Time,
    },
    General {
        metric: MetricSpace,
        v0: Node,
        laxity: Time,
    },
}

impl AttackSpec {
    pub fn mode(&self) -> Mode {
        match self {
            AttackSpec::CaseA { .. } => Mode::CaseA,
            AttackSpec::Star { .. } => Mode::Star,
            AttackSpec::General { .. } => Mode::General,
        }
    }

    pub fn laxity(&self) -> Time {
        match *self {
            AttackSpec::CaseA { laxity, .. } | AttackSpec::Star { laxity, .. } | AttackSpec::General { laxity, .. } => {
                laxity
            }
        }
    }

    /// The metric the vehicle travels on.
    pub fn travel_metric(&self) -> Result<MetricSpace> {
        match self {
            AttackSpec::CaseA { metric, .. } | AttackSpec::General { metric, .. } => Ok(metric.clone()),
            AttackSpec::Star { star, .. } => star.to_metric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioReport {
    pub alg: u64,
    pub opt_prime: u64,
    /// Exact optimum when an oracle fits within its cap.
    pub opt_exact: Option<u64>,
    /// `opt_prime / alg`; `None` when the policy served nothing.
    pub ratio: Option<Ratio<u64>>,
    /// Whether the constructive OPT′ meets its case's count bound.
    pub opt_prime_bound: bool,
}

impl RatioReport {
    /// Ratio strictly above one (an infinite ratio counts).
    pub fn exceeds_one(&self) -> bool {
        self.opt_prime > self.alg
    }
}

/// Compares the policy's schedule with the constructive OPT′ (and the
/// exact optimum when it fits).
pub fn ratio_report(tr: &AdversaryTranscript, alg: &Schedule, caps: &Caps) -> Result<RatioReport> {
    let opt = constructive_opt_prime(tr)?;
    let alg_n = alg.throughput() as u64;
    let opt_prime = opt.throughput as u64;
    let opt_exact = if tr.instance.len() <= caps.opt {
        Some(opt_exact(&tr.instance, tr.v0, caps, None)?.throughput as u64)
    } else if bundle_state_count(&tr.instance).is_some_and(|s| s <= caps.bundle_states) {
        Some(opt_bundled(&tr.instance, tr.v0, caps, None)?.throughput as u64)
    } else {
        None
    };
    let bound = match tr.opt_prime_target() {
        Some((b, true)) => opt_prime == b,
        Some((b, false)) => opt_prime >= b,
        None => false,
    };
    Ok(RatioReport {
        alg: alg_n,
        opt_prime,
        opt_exact,
        ratio: (alg_n > 0).then(|| Ratio::new(opt_prime, alg_n)),
        opt_prime_bound: bound,
    })
}

#[derive(Debug, Clone)]
pub struct Attack {
    pub transcript: AdversaryTranscript,
    pub schedule: Schedule,
    pub trace: Trace,
    pub opt_prime: Schedule,
    pub report: RatioReport,
}

fn travel_sum(sched: &Schedule, cost: impl Fn(Node, Node) -> u64) -> u64 {
    sched
        .actions
        .iter()
        .map(|a| match *a {
            Action::Travel { from, to, .. } => cost(from, to),
            _ => 0,
        })
        .sum()
}

/// Runs `policy` against the adversary described by `spec`, starting at
/// `v0` (node 0 for Case A).
pub fn run_attack<P: Policy + ?Sized>(spec: &AttackSpec, policy: &mut P, caps: &Caps) -> Result<Attack> {
    let metric = spec.travel_metric()?;
    let (transcript, schedule, trace) = match spec {
        AttackSpec::CaseA { laxity, count, .. } => {
            let mut src = CaseA::new(&metric, *laxity, *count)?;
            let horizon = src.horizon();
            let run = run_adaptive(&metric, &mut src, policy, 0, horizon)?;
            let (tour, exact) = tsp_best_effort(&metric, caps.tsp);
            let travel = travel_sum(&run.schedule, |a, b| metric.dist(a, b));
            let tr = AdversaryTranscript {
                mode: Mode::CaseA,
                v0: 0,
                laxity: *laxity,
                star: None,
                tsp: tour.weight,
                tsp_exact: exact,
                f: 0,
                n_blocks: 0,
                blocks: Vec::new(),
                termination: Some(Termination::Emissions { count: src.emitted }),
                kinds: src.kinds,
                instance: run.instance,
                observations: None,
                alg_travel_star: None,
                alg_travel_metric: travel,
            };
            (tr, run.schedule, run.trace)
        }
        AttackSpec::Star { star, v0, laxity } => {
            blocks_attack(Blocks::star(star.clone(), *v0, *laxity)?, &metric, policy)?
        }
        AttackSpec::General { metric: g, v0, laxity } => {
            blocks_attack(Blocks::general(g, *v0, *laxity, caps)?, &metric, policy)?
        }
    };
    let opt = constructive_opt_prime(&transcript)?;
    let report = ratio_report(&transcript, &schedule, caps)?;
    Ok(Attack {
        transcript,
        schedule,
        trace,
        opt_prime: opt.schedule,
        report,
    })
}

fn blocks_attack<P: Policy + ?Sized>(
    mut src: Blocks,
    metric: &MetricSpace,
    policy: &mut P,
) -> Result<(AdversaryTranscript, Schedule, Trace)> {
    let (horizon, v0) = (src.horizon(), src.v0);
    let run = run_adaptive(metric, &mut src, policy, v0, horizon)?;
    let observations = src.observations(&run.instance);
    let star = src.star.clone();
    let tr = AdversaryTranscript {
        mode: src.mode,
        v0: src.v0,
        laxity: src.laxity,
        tsp: src.tsp.0,
        tsp_exact: src.tsp.1,
        f: src.f,
        n_blocks: src.n_blocks,
        blocks: src.blocks,
        termination: src.termination,
        kinds: src.kinds,
        observations: Some(observations),
        alg_travel_star: Some(travel_sum(&run.schedule, |a, b| star.travel(a, b))),
        alg_travel_metric: travel_sum(&run.schedule, |a, b| metric.dist(a, b)),
        star: Some(star),
        instance: run.instance,
    };
    Ok((tr, run.schedule, run.trace))
}

/// Builds the named policy for `spec` and attacks it.
pub fn attack_with(spec: &AttackSpec, kind: PolicyKind, caps: &Caps) -> Result<(Attack, PolicyMeta)> {
    let metric = spec.travel_metric()?;
    let (mut policy, meta) = kind.build(&metric, spec.laxity(), TourChoice::Auto, caps)?;
    Ok((run_attack(spec, &mut policy, caps)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::instance::validate_schedule_from;
    use crate::policies::{EdfGreedy, IdlePolicy, NearestFirst, Scripted};
    use crate::sim::run;

    #[test]
    fn block_parameters() {
        assert_eq!(block_params(4, 144), (24, 2));
        let b = Blocks::star(StarMetric::new(vec![0, 1, 1, 2]), 0, 144).unwrap();
        assert_eq!((b.f(), b.n_blocks()), (24, 2));
        assert_eq!((b.block_start(1), b.block_start(2)), (1, 73));
        assert_eq!(b.split(), &[0, 6, 6, 12]);
    }

    #[test]
    fn split_sums_exactly() {
        assert_eq!(proportional_split(10, &[0, 1, 1, 1]), vec![0, 4, 3, 3]);
        assert_eq!(proportional_split(7, &[0, 2, 5]), vec![0, 2, 5]);
        for f in 0..50 {
            let w = [0, 3, 7, 1, 4];
            assert_eq!(proportional_split(f, &w).iter().sum::<u64>(), f);
        }
    }

    #[test]
    fn delta_to_laxity() {
        assert_eq!(laxity_for_delta(4, Ratio::new(1, 9)).unwrap(), 36);
        assert_eq!(laxity_for_delta(5, Ratio::new(1, 36)).unwrap(), 180);
        assert!(laxity_for_delta(4, Ratio::new(0, 1)).is_err());
    }

    #[test]
    fn preconditions() {
        let s = StarMetric::new(vec![0, 1, 1, 2]);
        assert!(matches!(
            Blocks::star(s.clone(), 0, 35),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(Blocks::star(s, 0, 36).is_ok());
        let g = gen::uniform(3, 10);
        assert!(matches!(CaseA::new(&g, 5, 3), Err(Error::PreconditionViolated(_))));
        assert!(CaseA::new(&g, 4, 3).is_ok());
    }

    #[test]
    fn idle_policy_leaves_a_backlog() {
        // all F type-B requests stay unserved, and Condition 1 is checked first
        let spec = AttackSpec::Star {
            star: StarMetric::new(vec![0, 1, 1, 2]),
            v0: 0,
            laxity: 144,
        };
        let a = run_attack(&spec, &mut IdlePolicy, &Caps::default()).unwrap();
        let tr = &a.transcript;
        assert_eq!(tr.blocks.len(), 1);
        assert!(tr.blocks[0].condition1 && tr.blocks[0].condition2);
        assert_eq!(
            tr.termination,
            Some(Termination::Backlog {
                time: 73,
                node: 1,
                count: 144
            })
        );
        assert_eq!(a.report.alg, 0);
        assert_eq!(a.report.ratio, None);
        assert!(a.report.opt_prime_bound);
        assert!(tr.observations.as_ref().unwrap().hold(144));
        validate_schedule_from(&tr.instance, &a.opt_prime, Some(0)).unwrap();
    }

    /// EDF that never serves at node 0.
    struct SpokesOnly;

    impl Policy for SpokesOnly {
        fn name(&self) -> &str {
            "spokes-only"
        }

        fn next_action(&mut self, view: &crate::sim::EngineView<'_>) -> crate::sim::Decision {
            use crate::sim::Decision;
            let pick = view
                .pending
                .iter()
                .filter(|r| r.node != 0)
                .min_by_key(|r| (view.metric.dist(view.location, r.node), r.deadline, r.id));
            match pick {
                None => Decision::Idle,
                Some(r) if r.node == view.location => Decision::Serve { request: r.id },
                Some(r) => Decision::TravelTo { node: r.node },
            }
        }
    }

    #[test]
    fn slow_block_triggers_case_2() {
        let spec = AttackSpec::Star {
            star: StarMetric::new(vec![0, 1, 1, 2]),
            v0: 0,
            laxity: 144,
        };
        let a = run_attack(&spec, &mut SpokesOnly, &Caps::default()).unwrap();
        let tr = &a.transcript;
        assert_eq!(tr.blocks.len(), 1);
        assert!(!tr.blocks[0].condition1 && tr.blocks[0].condition2);
        assert_eq!(tr.termination, Some(Termination::Idleness { time: 73, count: 432 }));
        assert_eq!(a.report.opt_prime, 432);
        assert_eq!(a.report.alg, 24);
        assert!(a.report.exceeds_one());
        validate_schedule_from(&tr.instance, &a.opt_prime, Some(0)).unwrap();
    }

    #[test]
    fn case_a_defeats_baselines() {
        let g = gen::path(4, 3);
        for p in [&mut EdfGreedy as &mut dyn Policy, &mut NearestFirst] {
            let spec = AttackSpec::CaseA {
                metric: g.clone(),
                laxity: 4,
                count: 5,
            };
            let a = run_attack(&spec, p, &Caps::default()).unwrap();
            assert_eq!(a.report.alg, 0);
            assert_eq!(a.report.opt_prime, 5);
            assert!(a.report.opt_prime_bound);
            validate_schedule_from(&a.transcript.instance, &a.opt_prime, Some(0)).unwrap();
        }
    }

    #[test]
    fn case_a_targets_far_end() {
        let g = gen::line(&[0, 1, 10]);
        assert_eq!(farthest_from(&g, 0), 2);
        assert_eq!(farthest_from(&g, 2), 0);
        assert_eq!(farthest_from(&g, 1), 2);
    }

    #[test]
    fn replaying_opt_prime_gives_ratio_one() {
        let spec = AttackSpec::Star {
            star: StarMetric::new(vec![0, 1, 1, 2]),
            v0: 0,
            laxity: 144,
        };
        let caps = Caps::default();
        for kind in [PolicyKind::Edf, PolicyKind::TspEdf, PolicyKind::Nearest] {
            let (a, _) = attack_with(&spec, kind, &caps).unwrap();
            let inst = &a.transcript.instance;
            let replay = run(inst, &mut Scripted::new(&a.opt_prime), 0, Some(3 * 144)).unwrap();
            assert_eq!(replay.schedule.throughput(), a.opt_prime.throughput());
            let r = ratio_report(&a.transcript, &replay.schedule, &caps).unwrap();
            assert_eq!(r.ratio, Some(Ratio::from_integer(1)));
        }
    }

    #[test]
    fn general_mode_on_a_star_matches_star_mode() {
        // a star metric whose embedding from its center is itself
        let star = StarMetric::new(vec![0, 2, 3, 4]);
        let g = star.to_metric().unwrap();
        let caps = Caps::default();
        let laxity = 9 * tsp_best_effort(&g, caps.tsp).0.weight;
        let s = attack_with(&AttackSpec::Star { star, v0: 0, laxity }, PolicyKind::Edf, &caps)
            .unwrap()
            .0;
        let gm = attack_with(
            &AttackSpec::General {
                metric: g,
                v0: 0,
                laxity,
            },
            PolicyKind::Edf,
            &caps,
        )
        .unwrap()
        .0;
        assert_eq!(s.transcript.instance, gm.transcript.instance);
        assert_eq!(s.schedule, gm.schedule);
        assert_eq!(gm.transcript.alg_travel_star, Some(gm.transcript.alg_travel_metric));
    }

    #[test]
    fn path_metric_block_composition() {
        let g = gen::path(3, 1);
        let b = Blocks::general(&g, 0, 100, &Caps::default()).unwrap();
        assert_eq!(b.star.leaf_weights, vec![0, 1, 1]);
        // F = ceil(sqrt(200)) = 15; the odd unit goes to the smaller id
        assert_eq!(b.f(), 15);
        assert_eq!(b.split(), &[0, 8, 7]);
    }
}
