//! Seeded generators for metrics and request sequences. A seed fully
//! determines the output.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{Instance, Request, RequestId, Time};
use crate::metric::{validate_metric, MetricSpace, Node};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All off-diagonal distances equal to `d`.
pub fn uniform(n: usize, d: u64) -> MetricSpace {
    let rows: Vec<Vec<u64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0 } else { d }).collect())
        .collect();
    validate_metric(&rows).expect("uniform metric is valid")
}

/// Points `0, 1, ..., n-1` on a line, scaled by `step`.
pub fn path(n: usize, step: u64) -> MetricSpace {
    let rows: Vec<Vec<u64>> = (0..n)
        .map(|i| (0..n).map(|j| (i.abs_diff(j) as u64) * step).collect())
        .collect();
    validate_metric(&rows).expect("path metric is valid")
}

/// Points on a line at the given (distinct) positions.
pub fn line(positions: &[u64]) -> MetricSpace {
    let rows: Vec<Vec<u64>> = positions
        .iter()
        .map(|&a| positions.iter().map(|&b| a.abs_diff(b)).collect())
        .collect();
    validate_metric(&rows).expect("line positions must be distinct")
}

/// Random symmetric weights in `1..=max_w`, closed under shortest paths.
pub fn random_metric(n: usize, max_w: u64, seed: u64) -> MetricSpace {
    let mut r = rng(seed);
    let mut d = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = r.gen_range(1..=max_w.max(1));
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    validate_metric(&d).expect("shortest-path closure is a metric")
}

/// Parameters for random request sequences.
#[derive(Debug, Clone, Copy)]
pub struct RequestGen {
    pub count: usize,
    /// Minimum window length (the instance laxity is at least this).
    pub laxity: Time,
    /// Extra window length drawn uniformly from `0..=slack`.
    pub slack: Time,
    /// Releases drawn from `1..=horizon`.
    pub horizon: Time,
}

/// Random requests on `metric`; node choice is uniform. One request is
/// forced to have window length exactly `laxity` so that the instance's
/// laxity is `laxity`.
pub fn random_instance(metric: MetricSpace, spec: RequestGen, seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = metric.n();
    let requests: Vec<Request> = (0..spec.count)
        .map(|i| {
            let release = r.gen_range(1..=spec.horizon.max(1));
            let extra = if i == 0 { 0 } else { r.gen_range(0..=spec.slack) };
            let node: Node = r.gen_range(0..n);
            Request {
                id: RequestId(i as u32),
                release,
                deadline: release + spec.laxity + extra,
                node,
            }
        })
        .collect();
    Instance::new(metric, requests, 1).expect("generated requests are valid")
}
