//! Exact offline throughput oracles and the constructive schedules used by
//! the lower-bound adversaries.
//!
//! The vehicle starts at a given node at tick 1 and may not move earlier.
//! Both DPs store, per state, the earliest completion time of the last
//! serve; with unit services that value dominates every other schedule
//! reaching the same state.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryTranscript, Mode, RequestKind, Termination};
use crate::error::{Error, Result};
use crate::instance::{Action, Instance, Request, RequestId, Schedule, Time};
use crate::metric::{tsp_best_effort, MetricSpace, Node};
use crate::Caps;

const NONE: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptResult {
    pub throughput: usize,
    pub schedule: Schedule,
    /// Reachable DP states (diagnostics).
    pub explored: u64,
}

fn cancelled(cancel: Option<&AtomicBool>) -> Result<()> {
    match cancel {
        Some(c) if c.load(Ordering::Relaxed) => Err(Error::Cancelled),
        _ => Ok(()),
    }
}

/// Earliest start of `req` for a vehicle free at `node` from tick `free`.
fn earliest_start(g: &MetricSpace, node: Node, free: Time, req: &Request) -> Option<Time> {
    let s = (free + g.dist(node, req.node)).max(req.release);
    (s <= req.deadline).then_some(s)
}

/// Serves `order` at earliest start times from `start` at tick 1, with
/// explicit travel actions. `None` if some request misses its deadline.
pub fn schedule_in_order(g: &MetricSpace, start: Node, order: &[Request]) -> Option<Schedule> {
    let mut actions = Vec::with_capacity(2 * order.len());
    let (mut here, mut free) = (start, 1);
    for r in order {
        let s = earliest_start(g, here, free, r)?;
        if r.node != here {
            actions.push(Action::Travel {
                from: here,
                to: r.node,
                depart: free,
            });
        }
        actions.push(Action::Serve {
            request: r.id,
            start: s,
        });
        here = r.node;
        free = s + 1;
    }
    Some(Schedule { actions })
}

/// Plain subset DP over `(served set, last request)`. At most `caps.opt`
/// requests.
pub fn opt_exact(inst: &Instance, start: Node, caps: &Caps, cancel: Option<&AtomicBool>) -> Result<OptResult> {
    let g = inst.metric();
    g.check_node(start)?;
    let reqs = inst.requests();
    let m = reqs.len();
    if m > caps.opt {
        return Err(Error::InstanceTooLarge {
            what: "opt_exact request count",
            size: m,
            cap: caps.opt,
        });
    }
    if m == 0 {
        return Ok(OptResult {
            throughput: 0,
            schedule: Schedule::default(),
            explored: 0,
        });
    }

    let full = 1usize << m;
    let mut done = vec![NONE; full * m];
    for (i, r) in reqs.iter().enumerate() {
        if let Some(s) = earliest_start(g, start, 1, r) {
            done[(1 << i) * m + i] = s + 1;
        }
    }
    let mut explored = 0u64;
    let mut best = (0usize, NONE, 0usize, 0usize);
    for mask in 1..full {
        if mask & 0xfff == 0 {
            cancelled(cancel)?;
        }
        let size = mask.count_ones() as usize;
        for last in 0..m {
            let c = done[mask * m + last];
            if c == NONE {
                continue;
            }
            explored += 1;
            if size > best.0 || (size == best.0 && c < best.1) {
                best = (size, c, mask, last);
            }
            let here = reqs[last].node;
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                if let Some(s) = earliest_start(g, here, c, &reqs[next]) {
                    let slot = (mask | (1 << next)) * m + next;
                    if s + 1 < done[slot] {
                        done[slot] = s + 1;
                    }
                }
            }
        }
    }
    if best.0 == 0 {
        return Ok(OptResult {
            throughput: 0,
            schedule: Schedule::default(),
            explored,
        });
    }

    // Walk back through predecessors that reproduce each completion time.
    let (_, _, mut mask, mut last) = best;
    let mut rev = vec![last];
    loop {
        let c = done[mask * m + last];
        let prev = mask & !(1 << last);
        if prev == 0 {
            break;
        }
        let p = (0..m)
            .filter(|&p| prev & (1 << p) != 0 && done[prev * m + p] != NONE)
            .find(|&p| earliest_start(g, reqs[p].node, done[prev * m + p], &reqs[last]) == Some(c - 1))
            .expect("a predecessor attains the stored value");
        rev.push(p);
        mask = prev;
        last = p;
    }
    let order: Vec<Request> = rev.iter().rev().map(|&i| reqs[i]).collect();
    let schedule = schedule_in_order(g, start, &order).expect("DP order is feasible");
    Ok(OptResult {
        throughput: order.len(),
        schedule,
        explored,
    })
}

/// Requests sharing node and window, with their ids in increasing order.
#[derive(Debug, Clone)]
struct Class {
    node: Node,
    release: Time,
    deadline: Time,
    ids: Vec<RequestId>,
}

fn classes(inst: &Instance) -> Vec<Class> {
    let mut map: BTreeMap<(Node, Time, Time), Vec<RequestId>> = BTreeMap::new();
    for r in inst.requests() {
        map.entry((r.node, r.release, r.deadline)).or_default().push(r.id);
    }
    map.into_iter()
        .map(|((node, release, deadline), mut ids)| {
            ids.sort();
            Class {
                node,
                release,
                deadline,
                ids,
            }
        })
        .collect()
}

/// State count of the bundled DP, or `None` on overflow.
pub fn bundle_state_count(inst: &Instance) -> Option<usize> {
    let cls = classes(inst);
    let mut p: usize = 1;
    for c in &cls {
        p = p.checked_mul(c.ids.len() + 1)?;
    }
    p.checked_mul(cls.len().max(1))
}

/// DP over count vectors: identical requests (same node and window) are
/// one class, and a state records how many of each class were served plus
/// the class served last. Capped by `caps.bundle_states`.
pub fn opt_bundled(inst: &Instance, start: Node, caps: &Caps, cancel: Option<&AtomicBool>) -> Result<OptResult> {
    let g = inst.metric();
    g.check_node(start)?;
    let cls = classes(inst);
    let k = cls.len();
    let states = bundle_state_count(inst).unwrap_or(usize::MAX);
    if states > caps.bundle_states {
        return Err(Error::InstanceTooLarge {
            what: "opt_bundled state count",
            size: states,
            cap: caps.bundle_states,
        });
    }
    if k == 0 {
        return Ok(OptResult {
            throughput: 0,
            schedule: Schedule::default(),
            explored: 0,
        });
    }
    let mut stride = vec![1usize; k];
    for i in 1..k {
        stride[i] = stride[i - 1] * (cls[i - 1].ids.len() + 1);
    }
    let vectors = stride[k - 1] * (cls[k - 1].ids.len() + 1);
    let digit = |idx: usize, i: usize| (idx / stride[i]) % (cls[i].ids.len() + 1);
    let as_req = |c: &Class| Request {
        id: RequestId(0),
        release: c.release,
        deadline: c.deadline,
        node: c.node,
    };
    let creq: Vec<Request> = cls.iter().map(as_req).collect();

    let mut done = vec![NONE; vectors * k];
    for (i, r) in creq.iter().enumerate() {
        if let Some(s) = earliest_start(g, start, 1, r) {
            done[stride[i] * k + i] = s + 1;
        }
    }
    let mut explored = 0u64;
    let mut best = (0usize, NONE, 0usize, 0usize);
    for idx in 1..vectors {
        if idx & 0xfff == 0 {
            cancelled(cancel)?;
        }
        let mut size = 0;
        for i in 0..k {
            size += digit(idx, i);
        }
        for last in 0..k {
            let c = done[idx * k + last];
            if c == NONE {
                continue;
            }
            explored += 1;
            if size > best.0 || (size == best.0 && c < best.1) {
                best = (size, c, idx, last);
            }
            let here = cls[last].node;
            for next in 0..k {
                if digit(idx, next) == cls[next].ids.len() {
                    continue;
                }
                if let Some(s) = earliest_start(g, here, c, &creq[next]) {
                    let slot = (idx + stride[next]) * k + next;
                    if s + 1 < done[slot] {
                        done[slot] = s + 1;
                    }
                }
            }
        }
    }
    if best.0 == 0 {
        return Ok(OptResult {
            throughput: 0,
            schedule: Schedule::default(),
            explored,
        });
    }

    let (_, _, mut idx, mut last) = best;
    let mut rev = vec![last];
    loop {
        let c = done[idx * k + last];
        let prev = idx - stride[last];
        if prev == 0 {
            break;
        }
        let p = (0..k)
            .filter(|&p| digit(prev, p) > 0 && done[prev * k + p] != NONE)
            .find(|&p| earliest_start(g, cls[p].node, done[prev * k + p], &creq[last]) == Some(c - 1))
            .expect("a predecessor attains the stored value");
        rev.push(p);
        idx = prev;
        last = p;
    }
    let mut used = vec![0usize; k];
    let order: Vec<Request> = rev
        .iter()
        .rev()
        .map(|&i| {
            let id = cls[i].ids[used[i]];
            used[i] += 1;
            Request { id, ..creq[i] }
        })
        .collect();
    let schedule = schedule_in_order(g, start, &order).expect("DP order is feasible");
    Ok(OptResult {
        throughput: order.len(),
        schedule,
        explored,
    })
}

/// Optimum over the requests not in `forbidden` (typically those the
/// online policy served).
pub fn opt_prime_exact(
    inst: &Instance,
    forbidden: &BTreeSet<RequestId>,
    start: Node,
    caps: &Caps,
    cancel: Option<&AtomicBool>,
) -> Result<OptResult> {
    opt_exact(&inst.without(forbidden), start, caps, cancel)
}

/// Serves `ids` back to back at `node` from tick `from`, skipping nothing:
/// each id gets the next tick. Returns the first free tick.
fn serve_run(actions: &mut Vec<Action>, ids: impl IntoIterator<Item = RequestId>, from: Time) -> Time {
    let mut t = from;
    for id in ids {
        actions.push(Action::Serve { request: id, start: t });
        t += 1;
    }
    t
}

/// The offline schedule the lower-bound argument exhibits for a block
/// transcript, starting at `v0` at tick 1.
///
/// Termination Cases 2 and 3: one type-A request per tick as it arrives,
/// then the final batch until `3L`. Case 1: each block's type-B requests
/// are swept first (in id order on a star, in tour order otherwise), the
/// rest of the block goes to type-A requests at `v0`; at the final event
/// the vehicle moves to `v1` and serves the final batch, then returns to
/// `v0` for the remaining type-A backlog.
pub fn constructive_opt_prime(tr: &AdversaryTranscript) -> Result<OptResult> {
    let Some(term) = tr.termination.as_ref() else {
        return Err(Error::TranscriptMismatch("transcript has no termination case"));
    };
    let inst = &tr.instance;
    let g = inst.metric();
    let v0 = tr.v0;
    let by_kind = |kind: RequestKind| -> Vec<Request> {
        let mut v: Vec<Request> = inst
            .requests()
            .iter()
            .filter(|r| tr.kind_of(r.id) == Some(kind))
            .copied()
            .collect();
        v.sort_by_key(|r| (r.release, r.id));
        v
    };
    let mut actions = Vec::new();
    match *term {
        Termination::Idleness { .. } | Termination::Travel { .. } => {
            let mut type_a = by_kind(RequestKind::TypeA);
            type_a.sort_by_key(|r| r.release);
            for r in &type_a {
                actions.push(Action::Serve {
                    request: r.id,
                    start: r.release,
                });
            }
            let fin = by_kind(RequestKind::Final);
            let t = fin.first().map_or(1, |r| r.release);
            let horizon = fin.first().map_or(0, |r| r.deadline);
            let n = (horizon + 1).saturating_sub(t) as usize;
            serve_run(&mut actions, fin.iter().take(n).map(|r| r.id), t);
        }
        Termination::Backlog { time, node, .. } => {
            let order = match tr.mode {
                Mode::Star | Mode::CaseA => (0..g.n()).collect::<Vec<Node>>(),
                Mode::General => tsp_best_effort(g, Caps::default().tsp).0.order,
            };
            // rotate so the sweep leaves v0 first
            let at = order.iter().position(|&v| v == v0).unwrap_or(0);
            let order: Vec<Node> = order[at..].iter().chain(&order[..at]).copied().collect();
            let type_b = by_kind(RequestKind::TypeB);
            let mut backlog: Vec<Request> = Vec::new();
            let mut type_a = by_kind(RequestKind::TypeA).into_iter().peekable();
            let mut t: Time = 1;
            let mut here = v0;
            for b in &tr.blocks {
                // type-A released before this block that is still waiting
                while let Some(r) = type_a.next_if(|r| r.release < b.start) {
                    backlog.push(r);
                }
                t = t.max(b.start);
                for &v in &order {
                    let reqs: Vec<RequestId> = type_b
                        .iter()
                        .filter(|r| r.node == v && r.release == b.start)
                        .map(|r| r.id)
                        .collect();
                    if reqs.is_empty() {
                        continue;
                    }
                    if v != here {
                        actions.push(Action::Travel {
                            from: here,
                            to: v,
                            depart: t,
                        });
                        t += g.dist(here, v);
                        here = v;
                    }
                    t = serve_run(&mut actions, reqs, t);
                }
                if here != v0 {
                    actions.push(Action::Travel {
                        from: here,
                        to: v0,
                        depart: t,
                    });
                    t += g.dist(here, v0);
                    here = v0;
                }
                // type-A until the block ends, oldest first
                while t < b.end {
                    while let Some(r) = type_a.next_if(|r| r.release <= t) {
                        backlog.push(r);
                    }
                    if backlog.is_empty() {
                        t = b.end;
                        break;
                    }
                    let r = backlog.remove(0);
                    t = serve_run(&mut actions, [r.id], t);
                }
            }
            backlog.extend(type_a);
            let fin = by_kind(RequestKind::Final);
            t = t.max(time);
            if here != node {
                actions.push(Action::Travel {
                    from: here,
                    to: node,
                    depart: t,
                });
                t += g.dist(here, node);
                here = node;
            }
            let fin_deadline = fin.first().map_or(0, |r| r.deadline);
            let n = (fin_deadline + 1).saturating_sub(t) as usize;
            t = serve_run(&mut actions, fin.iter().take(n).map(|r| r.id), t);
            if !backlog.is_empty() && here != v0 {
                actions.push(Action::Travel {
                    from: here,
                    to: v0,
                    depart: t,
                });
                t += g.dist(here, v0);
            }
            let a_deadline = backlog.iter().map(|r| r.deadline).max().unwrap_or(0);
            let n = (a_deadline + 1).saturating_sub(t) as usize;
            serve_run(&mut actions, backlog.iter().take(n).map(|r| r.id), t);
        }
        Termination::Emissions { .. } => {
            // every emission is reachable: it appears Δ+1 ticks after the
            // previous one, and any two nodes are at most Δ apart
            let reqs: Vec<Request> = inst.requests().to_vec();
            let schedule = schedule_in_order(g, v0, &reqs)
                .ok_or(Error::TranscriptMismatch("case A emissions are not all reachable"))?;
            return Ok(OptResult {
                throughput: schedule.throughput(),
                schedule,
                explored: 0,
            });
        }
    }
    let schedule = Schedule { actions };
    Ok(OptResult {
        throughput: schedule.throughput(),
        schedule,
        explored: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::instance::validate_schedule_from;

    fn req(id: u32, r: Time, d: Time, v: Node) -> Request {
        Request {
            id: RequestId(id),
            release: r,
            deadline: d,
            node: v,
        }
    }

    /// Depth-first over every feasible serve sequence.
    fn brute(inst: &Instance, start: Node) -> usize {
        fn go(g: &MetricSpace, reqs: &[Request], used: &mut Vec<bool>, here: Node, free: Time) -> usize {
            let mut best = 0;
            for i in 0..reqs.len() {
                if used[i] {
                    continue;
                }
                if let Some(s) = earliest_start(g, here, free, &reqs[i]) {
                    used[i] = true;
                    best = best.max(1 + go(g, reqs, used, reqs[i].node, s + 1));
                    used[i] = false;
                }
            }
            best
        }
        let reqs = inst.requests();
        go(inst.metric(), reqs, &mut vec![false; reqs.len()], start, 1)
    }

    #[test]
    fn small_examples() {
        let caps = Caps::default();
        let one = Instance::new(gen::uniform(2, 1), vec![req(0, 1, 2, 1)], 1).unwrap();
        assert_eq!(opt_exact(&one, 0, &caps, None).unwrap().throughput, 1);

        for (k, l) in [(3u32, 5u64), (7, 3), (4, 3)] {
            let reqs = (0..k).map(|i| req(i, 1, 1 + l, 0)).collect();
            let inst = Instance::new(gen::uniform(1, 1), reqs, 1).unwrap();
            let want = (k as usize).min(l as usize + 1);
            assert_eq!(opt_exact(&inst, 0, &caps, None).unwrap().throughput, want);
            assert_eq!(opt_bundled(&inst, 0, &caps, None).unwrap().throughput, want);
        }

        let two = Instance::new(gen::uniform(2, 2), vec![req(0, 1, 2, 0), req(1, 1, 2, 1)], 1).unwrap();
        assert_eq!(opt_exact(&two, 0, &caps, None).unwrap().throughput, 1);
        assert_eq!(brute(&two, 0), 1);
    }

    #[test]
    fn opt_prime_examples() {
        let caps = Caps::default();
        let inst = Instance::new(gen::uniform(1, 1), vec![req(0, 1, 3, 0), req(1, 1, 3, 0)], 1).unwrap();
        let all: BTreeSet<RequestId> = [RequestId(0), RequestId(1)].into();
        assert_eq!(opt_prime_exact(&inst, &all, 0, &caps, None).unwrap().throughput, 0);
        assert_eq!(
            opt_prime_exact(&inst, &BTreeSet::new(), 0, &caps, None)
                .unwrap()
                .throughput,
            2
        );
        let one: BTreeSet<RequestId> = [RequestId(0)].into();
        let r = opt_prime_exact(&inst, &one, 0, &caps, None).unwrap();
        assert_eq!(r.throughput, 1);
        assert_eq!(r.schedule.served_ids(), [RequestId(1)].into());
    }

    #[test]
    fn cap_and_cancel() {
        let reqs = (0..19).map(|i| req(i, 1, 30, 0)).collect();
        let inst = Instance::new(gen::uniform(1, 1), reqs, 1).unwrap();
        assert!(matches!(
            opt_exact(&inst, 0, &Caps::default(), None),
            Err(Error::InstanceTooLarge { .. })
        ));
        let flag = AtomicBool::new(true);
        let reqs = (0..14).map(|i| req(i, 1 + i as u64, 40, 0)).collect();
        let inst = Instance::new(gen::uniform(1, 1), reqs, 1).unwrap();
        assert!(matches!(
            opt_exact(&inst, 0, &Caps::default(), Some(&flag)),
            Err(Error::Cancelled)
        ));
    }

    #[test]
    fn oracles_agree_with_enumeration() {
        let caps = Caps::default();
        for seed in 0..120u64 {
            let n = 1 + seed as usize % 4;
            let inst = gen::random_instance(
                gen::random_metric(n, 4, seed),
                gen::RequestGen {
                    count: 3 + seed as usize % 6,
                    laxity: 1 + seed % 4,
                    slack: 4,
                    horizon: 10,
                },
                seed,
            );
            let want = brute(&inst, 0);
            let plain = opt_exact(&inst, 0, &caps, None).unwrap();
            let bundled = opt_bundled(&inst, 0, &caps, None).unwrap();
            assert_eq!(plain.throughput, want, "seed {seed}");
            assert_eq!(bundled.throughput, want, "seed {seed}");
            for s in [&plain.schedule, &bundled.schedule] {
                validate_schedule_from(&inst, s, Some(0)).unwrap();
                assert_eq!(s.throughput(), want);
            }
        }
    }

    #[test]
    fn bundled_collapses_identical_requests() {
        // 30 identical requests would be 2^30 subsets for the plain DP
        let reqs = (0..30).map(|i| req(i, 1, 12, (i % 2) as usize)).collect();
        let inst = Instance::new(gen::uniform(2, 1), reqs, 1).unwrap();
        assert_eq!(bundle_state_count(&inst), Some(16 * 16 * 2));
        let r = opt_bundled(&inst, 0, &Caps::default(), None).unwrap();
        // start ticks 1..=12 all at node 0, which holds 15 of them
        assert_eq!(r.throughput, 12);
        validate_schedule_from(&inst, &r.schedule, Some(0)).unwrap();
    }

    #[test]
    fn restriction_is_monotone() {
        let caps = Caps::default();
        for seed in 0..30u64 {
            let inst = gen::random_instance(
                gen::random_metric(3, 3, seed),
                gen::RequestGen {
                    count: 8,
                    laxity: 2,
                    slack: 5,
                    horizon: 8,
                },
                seed,
            );
            let mut forbidden = BTreeSet::new();
            let mut last = opt_prime_exact(&inst, &forbidden, 0, &caps, None).unwrap().throughput;
            for r in inst.requests() {
                forbidden.insert(r.id);
                let now = opt_prime_exact(&inst, &forbidden, 0, &caps, None).unwrap().throughput;
                assert!(now <= last);
                last = now;
            }
            assert_eq!(last, 0);
        }
    }
}
