//! Exact integer metric spaces and the graph primitives built on them:
//! Prim's MST, diameter, Held-Karp TSP, MST-doubling TSP and the
//! Dreyfus-Wagner Steiner oracle.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Node = usize;

/// An undirected edge stored as `(min, max)`.
pub type Edge = (Node, Node);

pub(crate) fn edge(a: Node, b: Node) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A finite metric with integer distances. Construction validates the
/// metric axioms, so every `MetricSpace` in circulation is well formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MetricFile", into = "MetricFile")]
pub struct MetricSpace {
    n: usize,
    dist: Vec<u64>,
}

/// On-disk form: `{"n": int, "dist": [[int]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricFile {
    pub n: usize,
    pub dist: Vec<Vec<u64>>,
}

impl TryFrom<MetricFile> for MetricSpace {
    type Error = Error;

    fn try_from(file: MetricFile) -> Result<Self> {
        if file.dist.len() != file.n {
            return Err(Error::DimensionMismatch {
                declared: file.n,
                rows: file.dist.len(),
            });
        }
        validate_metric(&file.dist)
    }
}

impl From<MetricSpace> for MetricFile {
    fn from(m: MetricSpace) -> Self {
        MetricFile { n: m.n, dist: m.rows() }
    }
}

/// Checks a square matrix against the metric axioms. Errors name the
/// first witnessing indices in row-major order.
pub fn validate_metric(matrix: &[Vec<u64>]) -> Result<MetricSpace> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::EmptyMetric);
    }
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare { row, len: r.len(), n });
        }
    }
    for i in 0..n {
        if matrix[i][i] != 0 {
            return Err(Error::NonzeroDiagonal(i));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if matrix[i][j] != matrix[j][i] {
                return Err(Error::Asymmetry(i, j));
            }
            if i != j && matrix[i][j] == 0 {
                return Err(Error::ZeroDistance(i, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if matrix[i][j] > matrix[i][k] + matrix[k][j] {
                    return Err(Error::TriangleViolation { i, j, k });
                }
            }
        }
    }
    Ok(MetricSpace {
        n,
        dist: matrix.iter().flatten().copied().collect(),
    })
}

impl MetricSpace {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dist(&self, a: Node, b: Node) -> u64 {
        self.dist[a * self.n + b]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.dist.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn check_node(&self, node: Node) -> Result<()> {
        if node < self.n {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, n: self.n })
        }
    }

    /// Multiplies every distance by `factor` (used to clear halves).
    pub fn scaled(&self, factor: u64) -> MetricSpace {
        assert!(factor >= 1, "scale factor must be positive");
        MetricSpace {
            n: self.n,
            dist: self.dist.iter().map(|d| d * factor).collect(),
        }
    }

    /// Weight of a node sequence walked in order (not closed).
    pub fn path_length(&self, path: &[Node]) -> u64 {
        path.windows(2).map(|w| self.dist(w[0], w[1])).sum()
    }

    /// Weight of a closed tour through `order`.
    pub fn cycle_length(&self, order: &[Node]) -> u64 {
        match order {
            [] | [_] => 0,
            [first, .., last] => self.path_length(order) + self.dist(*last, *first),
        }
    }
}

/// A spanning tree given by parent pointers. The root is its own parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedTree {
    pub root: Node,
    pub parent: Vec<Node>,
    pub edge_weight: Vec<u64>,
}

impl RootedTree {
    pub fn weight(&self) -> u64 {
        self.edge_weight.iter().sum()
    }

    /// Tree edges in `(min, max)` form, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = (0..self.parent.len())
            .filter(|&v| v != self.root)
            .map(|v| edge(v, self.parent[v]))
            .collect();
        out.sort_unstable();
        out
    }

    /// Children lists, each in increasing id order.
    pub fn children(&self) -> Vec<Vec<Node>> {
        let mut ch = vec![Vec::new(); self.parent.len()];
        for v in 0..self.parent.len() {
            if v != self.root {
                ch[self.parent[v]].push(v);
            }
        }
        ch
    }
}

/// Prim's algorithm from `root`. Ties go to the smallest candidate node,
/// then to the smallest attaching endpoint.
pub fn mst_prim(g: &MetricSpace, root: Node) -> RootedTree {
    prim_order(g, root).0
}

/// Prim's tree together with the order in which nodes were attached
/// (`order[0] == root`).
pub(crate) fn prim_order(g: &MetricSpace, root: Node) -> (RootedTree, Vec<Node>) {
    let n = g.n();
    assert!(root < n, "root out of range");
    let mut in_tree = vec![false; n];
    let mut best: Vec<(u64, Node)> = (0..n).map(|v| (g.dist(root, v), root)).collect();
    let mut parent = vec![root; n];
    let mut edge_weight = vec![0; n];
    let mut order = Vec::with_capacity(n);
    in_tree[root] = true;
    order.push(root);
    for _ in 1..n {
        let mut pick: Option<Node> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            match pick {
                None => pick = Some(v),
                Some(p) if best[v].0 < best[p].0 => pick = Some(v),
                _ => {}
            }
        }
        let u = pick.expect("a node remains outside the tree");
        in_tree[u] = true;
        parent[u] = best[u].1;
        edge_weight[u] = best[u].0;
        order.push(u);
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = g.dist(u, v);
            if d < best[v].0 || (d == best[v].0 && u < best[v].1) {
                best[v] = (d, u);
            }
        }
    }
    (
        RootedTree {
            root,
            parent,
            edge_weight,
        },
        order,
    )
}

pub fn mst_weight(g: &MetricSpace) -> u64 {
    mst_prim(g, 0).weight()
}

pub fn diameter(g: &MetricSpace) -> u64 {
    g.dist.iter().copied().max().unwrap_or(0)
}

/// A closed tour; `order` starts at node 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<Node>,
    pub weight: u64,
}

/// Held-Karp over subsets of the nodes other than 0.
pub fn tsp_exact(g: &MetricSpace, cap: usize) -> Result<Tour> {
    let n = g.n();
    if n > cap {
        return Err(Error::InstanceTooLarge {
            what: "tsp_exact node count",
            size: n,
            cap,
        });
    }
    if n <= 2 {
        let order: Vec<Node> = (0..n).collect();
        let weight = g.cycle_length(&order);
        return Ok(Tour { order, weight });
    }
    // Node i >= 1 is bit i-1.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = vec![u64::MAX; (full + 1) * m];
    let mut prev = vec![usize::MAX; (full + 1) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = g.dist(0, j + 1);
    }
    for mask in 1..=full {
        for last in 0..m {
            if mask & (1 << last) == 0 {
                continue;
            }
            let c = cost[mask * m + last];
            if c == u64::MAX {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let nc = c + g.dist(last + 1, next + 1);
                let slot = nm * m + next;
                if nc < cost[slot] {
                    cost[slot] = nc;
                    prev[slot] = last;
                }
            }
        }
    }
    let (mut last, weight) = (0..m)
        .map(|j| (j, cost[full * m + j] + g.dist(j + 1, 0)))
        .min_by_key(|&(j, c)| (c, j))
        .expect("m >= 2");
    let mut mask = full;
    let mut rev = Vec::with_capacity(n);
    loop {
        rev.push(last + 1);
        let p = prev[mask * m + last];
        mask &= !(1 << last);
        if p == usize::MAX {
            break;
        }
        last = p;
    }
    let mut order = vec![0];
    order.extend(rev.into_iter().rev());
    Ok(Tour { order, weight })
}

/// MST doubling with shortcutting: preorder of Prim's tree rooted at 0,
/// children visited in id order.
pub fn tsp_approx(g: &MetricSpace) -> Tour {
    let tree = mst_prim(g, 0);
    let children = tree.children();
    let mut order = Vec::with_capacity(g.n());
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(children[v].iter().rev());
    }
    let weight = g.cycle_length(&order);
    Tour { order, weight }
}

/// Exact tour when `n` is within `cap`, otherwise the doubling tour. The
/// flag tells which one was used.
pub fn tsp_best_effort(g: &MetricSpace, cap: usize) -> (Tour, bool) {
    match tsp_exact(g, cap) {
        Ok(t) => (t, true),
        Err(_) => (tsp_approx(g), false),
    }
}

/// Dreyfus-Wagner table: `dp[s * n + v]` is the weight of a minimum tree
/// spanning terminal subset `s` plus node `v`.
fn dreyfus_wagner(g: &MetricSpace, terminals: &[Node]) -> Vec<u64> {
    let n = g.n();
    let k = terminals.len();
    let subsets = 1usize << k;
    let mut dp = vec![u64::MAX; subsets * n];
    for (i, &t) in terminals.iter().enumerate() {
        for v in 0..n {
            dp[(1 << i) * n + v] = g.dist(t, v);
        }
    }
    let mut merged = vec![u64::MAX; n];
    for s in 1..subsets {
        if s.is_power_of_two() {
            continue;
        }
        for (v, slot) in merged.iter_mut().enumerate() {
            let mut best = u64::MAX;
            // proper non-empty subsets a of s containing the lowest bit of s,
            // so each split is visited once
            let low = s & s.wrapping_neg();
            let rest = s ^ low;
            let mut sub = rest;
            loop {
                let a = sub | low;
                if a != s {
                    let b = s ^ a;
                    let c = dp[a * n + v].saturating_add(dp[b * n + v]);
                    best = best.min(c);
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            *slot = best;
        }
        for v in 0..n {
            let mut best = merged[v];
            for (u, &m) in merged.iter().enumerate() {
                best = best.min(m.saturating_add(g.dist(u, v)));
            }
            dp[s * n + v] = best;
        }
    }
    dp
}

fn distinct_terminals(g: &MetricSpace, terminals: &[Node]) -> Result<Vec<Node>> {
    let mut t = terminals.to_vec();
    t.sort_unstable();
    t.dedup();
    for &v in &t {
        g.check_node(v)?;
    }
    Ok(t)
}

/// Weight of a minimum Steiner tree on `terminals`, every node of `g`
/// being an admissible Steiner point.
pub fn steiner_exact(g: &MetricSpace, terminals: &[Node], cap: usize) -> Result<u64> {
    let t = distinct_terminals(g, terminals)?;
    if t.is_empty() {
        return Err(Error::PreconditionViolated("empty terminal set".into()));
    }
    if t.len() > cap {
        return Err(Error::InstanceTooLarge {
            what: "steiner terminal count",
            size: t.len(),
            cap,
        });
    }
    if t.len() == 1 {
        return Ok(0);
    }
    let dp = dreyfus_wagner(g, &t[1..]);
    let full = (1usize << (t.len() - 1)) - 1;
    Ok(dp[full * g.n() + t[0]])
}

/// Steiner weights for every node subset at once (indexed by node bitmask;
/// entry 0 is unused and set to 0). Requires `n <= cap`.
pub fn steiner_table(g: &MetricSpace, cap: usize) -> Result<Vec<u64>> {
    let n = g.n();
    if n > cap {
        return Err(Error::InstanceTooLarge {
            what: "steiner table node count",
            size: n,
            cap,
        });
    }
    let nodes: Vec<Node> = (0..n).collect();
    let dp = dreyfus_wagner(g, &nodes);
    let mut out = vec![0; 1 << n];
    for (s, slot) in out.iter_mut().enumerate().skip(1) {
        if s.is_power_of_two() {
            continue;
        }
        let low = s.trailing_zeros() as usize;
        *slot = dp[s * n + low];
    }
    Ok(out)
}

/// Kruskal on the complete graph over `nodes`, edges ordered by
/// `(weight, u, v)`.
pub(crate) fn kruskal(g: &MetricSpace, nodes: &[Node]) -> (u64, Vec<Edge>) {
    let mut edges: Vec<(u64, Node, Node)> = Vec::new();
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            let (u, v) = edge(a, b);
            edges.push((g.dist(u, v), u, v));
        }
    }
    edges.sort_unstable();
    let mut uf: Vec<Node> = (0..g.n()).collect();
    fn find(uf: &mut [Node], mut x: Node) -> Node {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut total = 0;
    let mut chosen = Vec::with_capacity(nodes.len().saturating_sub(1));
    for (w, u, v) in edges {
        let (ru, rv) = (find(&mut uf, u), find(&mut uf, v));
        if ru != rv {
            uf[ru] = rv;
            total += w;
            chosen.push((u, v));
        }
    }
    chosen.sort_unstable();
    (total, chosen)
}

/// An explicit minimum Steiner tree (edge list, sorted). Among optimal
/// Steiner point sets the lexicographically smallest Kruskal tree wins.
pub fn steiner_tree(g: &MetricSpace, terminals: &[Node], cap: usize) -> Result<Vec<Edge>> {
    let t = distinct_terminals(g, terminals)?;
    if t.is_empty() {
        return Err(Error::PreconditionViolated("empty terminal set".into()));
    }
    if t.len() > cap {
        return Err(Error::InstanceTooLarge {
            what: "steiner terminal count",
            size: t.len(),
            cap,
        });
    }
    let others: Vec<Node> = (0..g.n()).filter(|v| t.binary_search(v).is_err()).collect();
    // an optimal metric Steiner tree needs at most |T| - 2 Steiner points
    let max_extra = t.len().saturating_sub(2);
    if others.len() > 20 {
        return Err(Error::InstanceTooLarge {
            what: "steiner candidate points",
            size: others.len(),
            cap: 20,
        });
    }
    let mut best: Option<(u64, Vec<Edge>)> = None;
    for mask in 0usize..(1 << others.len()) {
        if mask.count_ones() as usize > max_extra {
            continue;
        }
        let mut nodes = t.clone();
        nodes.extend(
            others
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v),
        );
        let (w, edges) = kruskal(g, &nodes);
        let better = match &best {
            None => true,
            Some((bw, be)) => w < *bw || (w == *bw && edges < *be),
        };
        if better {
            best = Some((w, edges));
        }
    }
    Ok(best.expect("at least the empty extension").1)
}
