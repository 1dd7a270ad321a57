//! Star embedding read off Prim's tree, and the Embed-Prim procedure that
//! witnesses the Steiner lower bound edge by edge.
//!
//! For a root `v0`, every node `u` gets leaf weight `dist(u, parent(u))` in
//! Prim's tree. The star's total weight is the MST weight, and for every
//! node set containing `v0` the star weight of the set never exceeds the
//! set's Steiner tree weight in the source metric.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gen;
use crate::metric::{
    edge, mst_weight, prim_order, steiner_exact, steiner_table, steiner_tree, validate_metric, Edge, MetricSpace, Node,
    RootedTree,
};
use crate::Caps;

/// Largest node count for exhaustive verification.
pub const EXHAUSTIVE_CAP: usize = 10;

/// Hub-and-spoke metric: leaf `i` hangs off the center with weight `w_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarMetric {
    pub leaf_weights: Vec<u64>,
}

impl StarMetric {
    pub fn new(leaf_weights: Vec<u64>) -> Self {
        StarMetric { leaf_weights }
    }

    /// Every leaf at weight 1, so any two leaves are 2 apart: a uniform
    /// metric with its distances doubled.
    pub fn uniform(n: usize) -> Self {
        StarMetric {
            leaf_weights: vec![1; n],
        }
    }

    pub fn n(&self) -> usize {
        self.leaf_weights.len()
    }

    /// `w(S)`.
    pub fn total(&self) -> u64 {
        self.leaf_weights.iter().sum()
    }

    /// `w_S(V')`.
    pub fn subset_weight(&self, nodes: &[Node]) -> u64 {
        let set: BTreeSet<Node> = nodes.iter().copied().collect();
        set.into_iter().map(|v| self.leaf_weights[v]).sum()
    }

    pub fn travel(&self, a: Node, b: Node) -> u64 {
        if a == b {
            0
        } else {
            self.leaf_weights[a] + self.leaf_weights[b]
        }
    }

    /// The leaf-to-leaf metric. Fails when two leaves would coincide
    /// (both weights zero).
    pub fn to_metric(&self) -> Result<MetricSpace> {
        let n = self.n();
        let rows: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| self.travel(i, j)).collect()).collect();
        validate_metric(&rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub source: MetricSpace,
    pub v0: Node,
    pub star: StarMetric,
    pub tree: RootedTree,
}

pub fn embed_star(g: &MetricSpace, v0: Node) -> Embedding {
    let (tree, _) = prim_order(g, v0);
    let star = StarMetric::new(tree.edge_weight.clone());
    Embedding {
        source: g.clone(),
        v0,
        star,
        tree,
    }
}

/// How an Embed-Prim step relates to `T'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepCase {
    /// Added node is outside `V'`; not charged.
    Outside,
    /// Prim's edge already belongs to `T'`.
    Present,
    /// Prim's edge closes a cycle in `T'`; a heavier edge is removed.
    Exchange,
}

impl StepCase {
    pub fn tag(self) -> u8 {
        match self {
            StepCase::Outside => 1,
            StepCase::Present => 2,
            StepCase::Exchange => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node: Node,
    pub added: Edge,
    pub added_weight: u64,
    pub deleted: Option<Edge>,
    pub deleted_weight: Option<u64>,
    pub case: StepCase,
    /// `T'` after the step, sorted.
    pub tree_after: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedPrimTrace {
    pub v0: Node,
    pub terminals: Vec<Node>,
    pub initial: Vec<Edge>,
    pub initial_weight: u64,
    pub steps: Vec<TraceStep>,
}

impl EmbedPrimTrace {
    fn charged(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps
            .iter()
            .filter(|s| matches!(s.case, StepCase::Present | StepCase::Exchange))
    }

    /// Sum of Prim edge weights charged to `V'`; equals `w_S(V')`.
    pub fn charged_added(&self) -> u64 {
        self.charged().map(|s| s.added_weight).sum()
    }

    pub fn charged_deleted(&self) -> u64 {
        self.charged().filter_map(|s| s.deleted_weight).sum()
    }

    /// `T'` at the end of the run.
    pub fn final_tree(&self) -> &[Edge] {
        self.steps
            .last()
            .map(|s| s.tree_after.as_slice())
            .unwrap_or(&self.initial)
    }
}

/// Unique path between `from` and `to` in the forest `edges`.
fn tree_path(edges: &BTreeSet<Edge>, n: usize, from: Node, to: Node) -> Option<Vec<Edge>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut prev = vec![usize::MAX; n];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        if x == to {
            break;
        }
        for &y in &adj[x] {
            if prev[y] == usize::MAX {
                prev[y] = x;
                queue.push_back(y);
            }
        }
    }
    if prev[to] == usize::MAX {
        return None;
    }
    let mut path = Vec::new();
    let mut x = to;
    while x != from {
        path.push(edge(x, prev[x]));
        x = prev[x];
    }
    Some(path)
}

/// Runs Embed-Prim from the exact Steiner tree on `terminals` (which must
/// contain `v0`) until Prim has attached every node.
pub fn embed_prim_trace(g: &MetricSpace, v0: Node, terminals: &[Node], caps: &Caps) -> Result<EmbedPrimTrace> {
    g.check_node(v0)?;
    if !terminals.contains(&v0) {
        return Err(Error::PreconditionViolated("terminal set must contain v0".into()));
    }
    let n = g.n();
    let term: BTreeSet<Node> = terminals.iter().copied().collect();
    let initial = steiner_tree(g, terminals, caps.steiner)?;
    let initial_weight = initial.iter().map(|&(a, b)| g.dist(a, b)).sum();

    let mut tree: BTreeSet<Edge> = initial.iter().copied().collect();
    let mut in_tree: BTreeSet<Node> = term.clone();
    in_tree.extend(initial.iter().flat_map(|&(a, b)| [a, b]));

    let (prim, order) = prim_order(g, v0);
    let mut visited = vec![false; n];
    visited[v0] = true;
    let mut prim_edges: BTreeSet<Edge> = BTreeSet::new();
    let mut steps = Vec::with_capacity(n.saturating_sub(1));

    for &u in &order[1..] {
        let w = prim.parent[u];
        let e = edge(w, u);
        let ew = g.dist(w, u);
        prim_edges.insert(e);
        let in_terms = term.contains(&u);

        let (case, deleted) = if !in_tree.contains(&u) {
            tree.insert(e);
            in_tree.insert(u);
            (StepCase::Outside, None)
        } else if tree.contains(&e) {
            if in_terms {
                (StepCase::Present, Some(e))
            } else {
                (StepCase::Outside, None)
            }
        } else {
            let path = tree_path(&tree, n, u, w)
                .ok_or_else(|| Error::PreconditionViolated(String::from("T' is disconnected")))?;
            // heaviest cycle edge outside {e_1..e_i} touching the attached nodes
            let victim = path
                .into_iter()
                .filter(|f| !prim_edges.contains(f) && (visited[f.0] || visited[f.1]))
                .max_by(|a, b| g.dist(a.0, a.1).cmp(&g.dist(b.0, b.1)).then_with(|| b.cmp(a)))
                .ok_or_else(|| Error::PreconditionViolated(String::from("no deletable edge on the cycle")))?;
            tree.insert(e);
            tree.remove(&victim);
            let case = if in_terms {
                StepCase::Exchange
            } else {
                StepCase::Outside
            };
            (case, Some(victim))
        };
        visited[u] = true;
        steps.push(TraceStep {
            node: u,
            added: e,
            added_weight: ew,
            deleted,
            deleted_weight: deleted.map(|(a, b)| g.dist(a, b)),
            case,
            tree_after: tree.iter().copied().collect(),
        });
    }

    Ok(EmbedPrimTrace {
        v0,
        terminals: term.into_iter().collect(),
        initial,
        initial_weight,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifyMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCheck {
    pub nodes: Vec<Node>,
    pub steiner: u64,
    pub star: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub v0: Node,
    pub mst: u64,
    pub star_total: u64,
    pub property1: bool,
    pub checks: Vec<SubsetCheck>,
    pub pass: bool,
}

/// Checks both embedding properties. A failed inequality is reported, not
/// returned as an error.
pub fn verify_embedding(g: &MetricSpace, emb: &Embedding, mode: VerifyMode, caps: &Caps) -> Result<EmbeddingReport> {
    let n = g.n();
    let v0 = emb.v0;
    let mst = mst_weight(g);
    let star_total = emb.star.total();
    let property1 = star_total == mst
        && emb.star.leaf_weights.len() == n
        && emb.star.leaf_weights[v0] == 0
        && (0..n)
            .filter(|&v| v != v0)
            .all(|v| emb.star.leaf_weights[v] == g.dist(v, emb.tree.parent[v]));

    let mut checks = Vec::new();
    match mode {
        VerifyMode::Exhaustive => {
            if n > EXHAUSTIVE_CAP {
                return Err(Error::InstanceTooLarge {
                    what: "exhaustive embedding check node count",
                    size: n,
                    cap: EXHAUSTIVE_CAP,
                });
            }
            let table = steiner_table(g, EXHAUSTIVE_CAP)?;
            for mask in 1usize..(1 << n) {
                if mask & (1 << v0) == 0 {
                    continue;
                }
                let nodes: Vec<Node> = (0..n).filter(|v| mask & (1 << v) != 0).collect();
                let star = emb.star.subset_weight(&nodes);
                let steiner = table[mask];
                checks.push(SubsetCheck {
                    nodes,
                    steiner,
                    star,
                    pass: steiner >= star,
                });
            }
        }
        VerifyMode::Sampled { count, seed } => {
            let mut rng = gen::rng(seed);
            let others: Vec<Node> = (0..n).filter(|&v| v != v0).collect();
            let max_extra = caps.steiner.saturating_sub(1).min(others.len());
            for _ in 0..count {
                let k = rng.gen_range(0..=max_extra);
                let mut nodes: Vec<Node> = others.choose_multiple(&mut rng, k).copied().collect();
                nodes.push(v0);
                nodes.sort_unstable();
                let star = emb.star.subset_weight(&nodes);
                let steiner = steiner_exact(g, &nodes, caps.steiner)?;
                checks.push(SubsetCheck {
                    nodes,
                    steiner,
                    star,
                    pass: steiner >= star,
                });
            }
        }
    }
    let pass = property1 && checks.iter().all(|c| c.pass);
    Ok(EmbeddingReport {
        v0,
        mst,
        star_total,
        property1,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::mst_prim;

    fn path3() -> MetricSpace {
        gen::path(3, 1)
    }

    #[test]
    fn embed_examples() {
        let e = embed_star(&path3(), 0);
        assert_eq!(e.star.leaf_weights, vec![0, 1, 1]);
        assert_eq!(e.star.total(), 2);

        let e = embed_star(&gen::uniform(1, 1), 0);
        assert_eq!(e.star.leaf_weights, vec![0]);

        let e = embed_star(&gen::uniform(3, 1), 0);
        assert_eq!(e.star.leaf_weights, vec![0, 1, 1]);
        assert_eq!(e.star.total(), 2);
    }

    #[test]
    fn star_metric_travel() {
        let s = StarMetric::new(vec![0, 1, 1, 2]);
        assert_eq!(s.total(), 4);
        assert_eq!(s.travel(1, 3), 3);
        assert_eq!(s.travel(0, 2), 1);
        assert_eq!(s.subset_weight(&[0, 3, 3]), 2);
        let m = s.to_metric().unwrap();
        assert_eq!(m.dist(1, 2), 2);
        assert_eq!(StarMetric::uniform(4).to_metric().unwrap(), gen::uniform(4, 2));
        assert!(StarMetric::new(vec![0, 0]).to_metric().is_err());
    }

    #[test]
    fn star_of_a_star_is_itself() {
        let s = StarMetric::new(vec![0, 2, 3, 1]);
        let m = s.to_metric().unwrap();
        assert_eq!(embed_star(&m, 0).star, s);
    }

    #[test]
    fn trace_with_only_root_has_no_charges() {
        let g = gen::random_metric(6, 9, 3);
        let t = embed_prim_trace(&g, 2, &[2], &Caps::default()).unwrap();
        assert!(t.steps.iter().all(|s| s.case == StepCase::Outside));
        assert_eq!(t.charged_added(), 0);
        assert_eq!(t.initial, vec![]);
    }

    #[test]
    fn trace_on_path_metric() {
        let g = path3();
        let t = embed_prim_trace(&g, 0, &[0, 2], &Caps::default()).unwrap();
        // two terminals admit no Steiner point, so the tree is the direct edge
        assert_eq!(t.initial, vec![(0, 2)]);
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.steps[0].case, StepCase::Outside);
        assert_eq!(t.steps[1].case, StepCase::Exchange);
        assert_eq!(t.steps[1].deleted, Some((0, 2)));
        assert!(t.charged_deleted() >= t.charged_added());
        assert_eq!(t.charged_added(), embed_star(&g, 0).star.subset_weight(&[0, 2]));
    }

    #[test]
    fn trace_exchange_steps_delete_heavier_edges() {
        let caps = Caps::default();
        for seed in 0..60u64 {
            let n = 3 + (seed as usize % 5);
            let g = gen::random_metric(n, 12, seed);
            let v0 = seed as usize % n;
            let mut rng = gen::rng(seed ^ 0xabc);
            let mut terms: Vec<Node> = (0..n).filter(|&v| v != v0 && rng.gen_bool(0.5)).collect();
            terms.truncate(4);
            terms.push(v0);
            let t = embed_prim_trace(&g, v0, &terms, &caps).unwrap();
            for s in &t.steps {
                if let Some(dw) = s.deleted_weight {
                    assert!(s.added_weight <= dw, "seed {seed}: {s:?}");
                }
                if s.case != StepCase::Outside {
                    assert!(s.deleted.is_some());
                }
            }
            assert_eq!(t.final_tree(), mst_prim(&g, v0).edges().as_slice());
            let star = embed_star(&g, v0).star.subset_weight(&terms);
            assert_eq!(t.charged_added(), star);
            assert!(t.charged_deleted() <= t.initial_weight);
        }
    }

    #[test]
    fn verify_examples() {
        let caps = Caps::default();
        let g = path3();
        let e = embed_star(&g, 0);
        let r = verify_embedding(&g, &e, VerifyMode::Exhaustive, &caps).unwrap();
        assert!(r.pass);
        let c = r.checks.iter().find(|c| c.nodes == vec![0, 2]).unwrap();
        assert_eq!((c.steiner, c.star), (2, 1));
        let c = r.checks.iter().find(|c| c.nodes == vec![0]).unwrap();
        assert_eq!((c.steiner, c.star), (0, 0));

        for seed in 0..5 {
            let g = gen::random_metric(6, 20, seed);
            let e = embed_star(&g, 0);
            let r = verify_embedding(&g, &e, VerifyMode::Exhaustive, &caps).unwrap();
            assert_eq!(r.checks.len(), 32);
            assert!(r.pass);
        }

        let g = gen::random_metric(12, 20, 1);
        let e = embed_star(&g, 4);
        assert!(verify_embedding(&g, &e, VerifyMode::Exhaustive, &caps).is_err());
        let r = verify_embedding(&g, &e, VerifyMode::Sampled { count: 20, seed: 9 }, &caps).unwrap();
        assert_eq!(r.checks.len(), 20);
        assert!(r.pass);
        assert!(r.checks.iter().all(|c| c.nodes.contains(&4)));
    }

    #[test]
    fn tampered_embedding_fails_property1() {
        let g = gen::random_metric(5, 10, 2);
        let mut e = embed_star(&g, 0);
        e.star.leaf_weights[3] += 1;
        let r = verify_embedding(&g, &e, VerifyMode::Exhaustive, &Caps::default()).unwrap();
        assert!(!r.property1);
        assert!(!r.pass);
    }

    #[test]
    fn embedding_is_deterministic() {
        let g = gen::random_metric(7, 5, 11);
        assert_eq!(embed_star(&g, 3), embed_star(&g, 3));
    }
}
