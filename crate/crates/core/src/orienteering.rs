//! Unrooted orienteering with node prizes: find a simple path of length at
//! most `budget` that maximizes the total prize of its nodes.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricSpace, Node};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrienteeringSolution {
    pub path: Vec<Node>,
    pub length: u64,
    pub prize: u64,
}

impl OrienteeringSolution {
    fn key(&self) -> (core::cmp::Reverse<u64>, u64, &[Node]) {
        (core::cmp::Reverse(self.prize), self.length, &self.path)
    }
}

/// Best single node: largest prize, smallest id.
fn best_single(prizes: &[u64]) -> OrienteeringSolution {
    let (v, &p) = prizes
        .iter()
        .enumerate()
        .max_by_key(|&(v, &p)| (p, core::cmp::Reverse(v)))
        .expect("metric has at least one node");
    OrienteeringSolution {
        path: vec![v],
        length: 0,
        prize: p,
    }
}

fn check_prizes(g: &MetricSpace, prizes: &[u64]) -> Result<()> {
    if prizes.len() != g.n() {
        return Err(Error::DimensionMismatch {
            declared: g.n(),
            rows: prizes.len(),
        });
    }
    Ok(())
}

/// Exact subset DP. Among maximum-prize paths the shortest wins, then the
/// lexicographically smallest node sequence.
///
/// Zero-prize nodes are left out of the DP: a path through one is never
/// shorter than its shortcut, so no optimum uses them.
pub fn orienteering_exact(g: &MetricSpace, prizes: &[u64], budget: u64, cap: usize) -> Result<OrienteeringSolution> {
    check_prizes(g, prizes)?;
    if g.n() > cap {
        return Err(Error::InstanceTooLarge {
            what: "orienteering node count",
            size: g.n(),
            cap,
        });
    }
    let cand: Vec<Node> = (0..g.n()).filter(|&v| prizes[v] > 0).collect();
    let m = cand.len();
    if m <= 1 {
        return Ok(best_single(prizes));
    }

    // len[mask * m + v]: shortest simple path over exactly `mask`, with `v`
    // at one end. Paths are reversible, so either end works as the start.
    let full = 1usize << m;
    let mut len = vec![u64::MAX; full * m];
    for i in 0..m {
        len[(1 << i) * m + i] = 0;
    }
    for mask in 1..full {
        for last in 0..m {
            let cur = len[mask * m + last];
            if cur == u64::MAX || cur > budget {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nl = cur + g.dist(cand[last], cand[next]);
                let slot = (mask | (1 << next)) * m + next;
                if nl < len[slot] {
                    len[slot] = nl;
                }
            }
        }
    }

    let prize_of = |mask: usize| -> u64 { (0..m).filter(|&i| mask & (1 << i) != 0).map(|i| prizes[cand[i]]).sum() };
    let shortest = |mask: usize| (0..m).map(|v| len[mask * m + v]).min().unwrap_or(u64::MAX);

    let mut best: Option<(u64, u64)> = None;
    for mask in 1..full {
        let l = shortest(mask);
        if l > budget {
            continue;
        }
        let key = (prize_of(mask), l);
        if best.is_none_or(|(bp, bl)| key.0 > bp || (key.0 == bp && key.1 < bl)) {
            best = Some(key);
        }
    }
    let (prize, length) = best.expect("single nodes fit any budget");

    // Lexicographically smallest path over every optimal mask: greedily take
    // the smallest node that still admits a completion of the right length.
    let mut out: Option<Vec<Node>> = None;
    for mask in 1..full {
        if prize_of(mask) != prize || shortest(mask) != length {
            continue;
        }
        let mut order: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        order.sort_by_key(|&i| cand[i]);
        let mut rest = mask;
        let mut left = length;
        let mut path = Vec::new();
        let mut prev: Option<usize> = None;
        while rest != 0 {
            let step = order
                .iter()
                .copied()
                .filter(|&i| rest & (1 << i) != 0)
                .find(|&i| {
                    let hop = prev.map_or(0, |p| g.dist(cand[p], cand[i]));
                    hop <= left && len[rest * m + i] == left - hop
                })
                .expect("an optimal completion exists");
            left -= prev.map_or(0, |p| g.dist(cand[p], cand[step]));
            path.push(cand[step]);
            rest &= !(1 << step);
            prev = Some(step);
        }
        if out.as_ref().is_none_or(|o| path < *o) {
            out = Some(path);
        }
    }
    Ok(OrienteeringSolution {
        path: out.expect("an optimal mask exists"),
        length,
        prize,
    })
}

/// Ratio-greedy path growth from every start node; no approximation
/// guarantee. Each step appends the unvisited positive-prize node with the
/// best prize per unit distance that still fits the budget.
pub fn orienteering_greedy(g: &MetricSpace, prizes: &[u64], budget: u64) -> Result<OrienteeringSolution> {
    check_prizes(g, prizes)?;
    let mut best = best_single(prizes);
    for start in (0..g.n()).filter(|&v| prizes[v] > 0) {
        let mut path = vec![start];
        let mut used = vec![false; g.n()];
        used[start] = true;
        let mut length = 0;
        let mut prize = prizes[start];
        loop {
            let cur = *path.last().expect("path is nonempty");
            // maximize prize / dist without floats: compare p1 * d2 vs p2 * d1
            let pick = (0..g.n())
                .filter(|&v| !used[v] && prizes[v] > 0 && length + g.dist(cur, v) <= budget)
                .min_by(|&a, &b| {
                    let (pa, da) = (prizes[a] as u128, g.dist(cur, a) as u128);
                    let (pb, db) = (prizes[b] as u128, g.dist(cur, b) as u128);
                    (pb * da).cmp(&(pa * db)).then(a.cmp(&b))
                });
            let Some(v) = pick else { break };
            length += g.dist(cur, v);
            prize += prizes[v];
            used[v] = true;
            path.push(v);
        }
        let cand = OrienteeringSolution { path, length, prize };
        if cand.key() < best.key() {
            best = cand;
        }
    }
    Ok(best)
}
