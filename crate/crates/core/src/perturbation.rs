//! Window-shrinking transforms used by the upper-bound analysis, and an
//! empirical check of the perturbation bound: shrinking every window by at
//! most `λ` on each side keeps at least a `1 - 2λ/L` fraction of OPT.

use alloc::collections::BTreeMap;
use core::sync::atomic::AtomicBool;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{laxity, Instance, Request, RequestId, Time};
use crate::metric::Node;
use crate::offline::opt_exact;
use crate::Caps;

/// Aligns every window to multiples of `k`: `[k*ceil(r/k), k*floor(d/k)]`.
/// Windows that become empty are kept; see
/// [`Instance::infeasible_requests`].
pub fn perturb_align(inst: &Instance, k: Time) -> Result<Instance> {
    if k == 0 {
        return Err(Error::PreconditionViolated("phase length must be at least 1".into()));
    }
    let requests = inst
        .requests()
        .iter()
        .map(|r| Request {
            release: r.release.div_ceil(k) * k,
            deadline: r.deadline / k * k,
            ..*r
        })
        .collect();
    Instance::assemble(inst.metric().clone(), requests, inst.scale())
}

/// Moves every request to `node`, keeping its window.
pub fn collapse_nodes(inst: &Instance, node: Node) -> Result<Instance> {
    inst.metric().check_node(node)?;
    let requests = inst.requests().iter().map(|r| Request { node, ..*r }).collect();
    Instance::assemble(inst.metric().clone(), requests, inst.scale())
}

/// Whether `hat` is `orig` with every window shrunk by at most `lambda` on
/// each side. Requests are matched by id and must agree on their node.
pub fn is_lambda_perturbation(orig: &Instance, hat: &Instance, lambda: Time) -> Result<bool> {
    let o: BTreeMap<RequestId, Request> = orig.by_id();
    let h: BTreeMap<RequestId, Request> = hat.by_id();
    for (id, a) in &o {
        match h.get(id) {
            Some(b) if b.node == a.node => {}
            _ => return Err(Error::RequestMismatch(*id)),
        }
    }
    if let Some(id) = h.keys().find(|id| !o.contains_key(id)) {
        return Err(Error::RequestMismatch(*id));
    }
    Ok(o.values().all(|a| {
        let b = &h[&a.id];
        b.release >= a.release
            && b.deadline <= a.deadline
            && b.release - a.release <= lambda
            && a.deadline - b.deadline <= lambda
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub lambda: Time,
    pub laxity: Time,
    pub opt: usize,
    pub opt_hat: usize,
    /// `(1 - 2λ/L) * opt`; negative when `2λ > L`.
    pub bound: Ratio<i64>,
    pub pass: bool,
}

/// Runs the exact oracle on `inst` and on its `k`-aligned version, both
/// from `start`, and compares against the bound with `λ = k`.
pub fn check_perturbation_bound(
    inst: &Instance,
    k: Time,
    start: Node,
    caps: &Caps,
    cancel: Option<&AtomicBool>,
) -> Result<PerturbationReport> {
    let l = laxity(inst)?;
    let hat = perturb_align(inst, k)?;
    let opt = opt_exact(inst, start, caps, cancel)?.throughput;
    let opt_hat = opt_exact(&hat, start, caps, cancel)?.throughput;
    let (li, ki) = (l as i64, k as i64);
    let bound = Ratio::new(opt as i64 * (li - 2 * ki), li);
    // opt_hat >= opt (L - 2k) / L, cross-multiplied
    let pass = opt_hat as i128 * l as i128 >= opt as i128 * (li as i128 - 2 * ki as i128);
    Ok(PerturbationReport {
        lambda: k,
        laxity: l,
        opt,
        opt_hat,
        bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{self, RequestGen};

    fn req(id: u32, r: Time, d: Time, v: Node) -> Request {
        Request {
            id: RequestId(id),
            release: r,
            deadline: d,
            node: v,
        }
    }

    fn one(r: Time, d: Time) -> Instance {
        Instance::new(gen::uniform(2, 1), vec![req(0, r, d, 0)], 1).unwrap()
    }

    #[test]
    fn align_examples() {
        let a = perturb_align(&one(3, 17), 5).unwrap();
        assert_eq!((a.requests()[0].release, a.requests()[0].deadline), (5, 15));
        let a = perturb_align(&one(5, 15), 5).unwrap();
        assert_eq!((a.requests()[0].release, a.requests()[0].deadline), (5, 15));
        let a = perturb_align(&one(6, 9), 5).unwrap();
        assert_eq!((a.requests()[0].release, a.requests()[0].deadline), (10, 5));
        assert_eq!(a.infeasible_requests(), vec![RequestId(0)]);
        assert!(perturb_align(&one(1, 2), 0).is_err());
    }

    #[test]
    fn collapse_examples() {
        let inst = Instance::new(gen::uniform(3, 5), vec![req(0, 1, 2, 1), req(1, 1, 2, 2)], 1).unwrap();
        let c = collapse_nodes(&inst, 0).unwrap();
        assert!(c.requests().iter().all(|r| r.node == 0));
        let caps = Caps::default();
        assert_eq!(opt_exact(&inst, 0, &caps, None).unwrap().throughput, 0);
        assert_eq!(opt_exact(&c, 0, &caps, None).unwrap().throughput, 2);
        assert!(collapse_nodes(&inst, 3).is_err());
    }

    #[test]
    fn relation_examples() {
        let inst = one(3, 17);
        assert!(is_lambda_perturbation(&inst, &inst, 0).unwrap());
        let a = perturb_align(&inst, 5).unwrap();
        assert!(is_lambda_perturbation(&inst, &a, 5).unwrap());
        assert!(!is_lambda_perturbation(&inst, &a, 1).unwrap());
        let late = one(3 + 6, 17);
        assert!(!is_lambda_perturbation(&inst, &late, 5).unwrap());
        // widening is not a perturbation
        assert!(!is_lambda_perturbation(&inst, &one(2, 17), 5).unwrap());
        let other = Instance::new(gen::uniform(2, 1), vec![req(1, 3, 17, 0)], 1).unwrap();
        assert!(matches!(
            is_lambda_perturbation(&inst, &other, 5),
            Err(Error::RequestMismatch(RequestId(0)))
        ));
        let moved = Instance::new(gen::uniform(2, 1), vec![req(0, 3, 17, 1)], 1).unwrap();
        assert!(is_lambda_perturbation(&inst, &moved, 5).is_err());
    }

    #[test]
    fn degenerate_bound() {
        // L = 2K: the bound is zero
        let inst = Instance::new(gen::uniform(1, 1), vec![req(0, 1, 11, 0), req(1, 3, 13, 0)], 1).unwrap();
        let rep = check_perturbation_bound(&inst, 5, 0, &Caps::default(), None).unwrap();
        assert_eq!(rep.bound, Ratio::from_integer(0));
        assert!(rep.pass);
        assert_eq!(rep.opt, 2);
    }

    #[test]
    fn third_of_opt_when_l_is_nine_delta() {
        // Δ = 2, K = 3Δ = 6, L = 9Δ = 18
        let g = gen::uniform(3, 2);
        for seed in 0..40 {
            let inst = gen::random_instance(
                g.clone(),
                RequestGen {
                    count: 8,
                    laxity: 18,
                    slack: 10,
                    horizon: 30,
                },
                seed,
            );
            let rep = check_perturbation_bound(&inst, 6, 0, &Caps::default(), None).unwrap();
            assert_eq!(rep.bound, Ratio::new(rep.opt as i64, 3));
            assert!(rep.pass, "seed {seed}: {rep:?}");
            assert!(rep.opt_hat <= rep.opt);
        }
    }

    #[test]
    fn aligned_windows_nest_and_monotone() {
        for seed in 0..100 {
            let inst = gen::random_instance(
                gen::random_metric(4, 4, seed),
                RequestGen {
                    count: 8,
                    laxity: 12,
                    slack: 8,
                    horizon: 25,
                },
                seed,
            );
            for k in 1..=4 {
                let a = perturb_align(&inst, k).unwrap();
                assert!(is_lambda_perturbation(&inst, &a, k).unwrap());
                assert!(is_lambda_perturbation(&inst, &a, k + 1).unwrap());
                let rep = check_perturbation_bound(&inst, k, 0, &Caps::default(), None).unwrap();
                assert!(rep.pass, "seed {seed} k {k}: {rep:?}");
                assert!(rep.opt_hat <= rep.opt);
            }
        }
    }
}
