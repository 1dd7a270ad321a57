use std::collections::BTreeSet;

use proptest::prelude::*;

use ttw_core::embedding::{embed_star, verify_embedding, VerifyMode};
use ttw_core::gen::{self, RequestGen};
use ttw_core::instance::{laxity, validate_schedule_from};
use ttw_core::metric::mst_weight;
use ttw_core::offline::opt_exact;
use ttw_core::perturbation::{collapse_nodes, is_lambda_perturbation, perturb_align};
use ttw_core::policies::{PolicyKind, Scripted, TourChoice};
use ttw_core::sim::run;
use ttw_core::{Caps, Instance, RequestId};

fn instance(n: usize, max_w: u64, count: usize, lax: u64, slack: u64, seed: u64) -> Instance {
    gen::random_instance(
        gen::random_metric(n, max_w, seed),
        RequestGen {
            count,
            laxity: lax,
            slack,
            horizon: 24,
        },
        seed,
    )
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    (1usize..=5, 1u64..=4, 1usize..=10, 1u64..=10, 0u64..=8, any::<u64>())
        .prop_map(|(n, w, c, l, s, seed)| instance(n, w, c, l, s, seed))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 96,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn policies_emit_valid_schedules_below_opt(inst in arb_instance()) {
        let caps = Caps::default();
        let opt = opt_exact(&inst, 0, &caps, None).unwrap();
        prop_assert!(validate_schedule_from(&inst, &opt.schedule, Some(0)).is_ok());
        let l = laxity(&inst).unwrap();
        for kind in PolicyKind::ALL {
            let (mut p, _) = kind.build(inst.metric(), l, TourChoice::Auto, &caps).unwrap();
            let out = run(&inst, &mut p, 0, None).unwrap();
            prop_assert!(validate_schedule_from(&inst, &out.schedule, Some(0)).is_ok(), "{}", kind);
            prop_assert!(out.schedule.throughput() <= opt.throughput, "{}", kind);
            prop_assert_eq!(out.trace.ticks.len() as u64, inst.max_deadline());
        }
    }

    #[test]
    fn runs_are_deterministic(inst in arb_instance()) {
        let caps = Caps::default();
        let l = laxity(&inst).unwrap();
        for kind in [PolicyKind::TspEdf, PolicyKind::OrientWindow] {
            let (mut a, _) = kind.build(inst.metric(), l, TourChoice::Auto, &caps).unwrap();
            let (mut b, _) = kind.build(inst.metric(), l, TourChoice::Auto, &caps).unwrap();
            prop_assert_eq!(run(&inst, &mut a, 0, None).unwrap(), run(&inst, &mut b, 0, None).unwrap());
        }
    }

    #[test]
    fn replaying_opt_serves_everything_it_planned(inst in arb_instance()) {
        let opt = opt_exact(&inst, 0, &Caps::default(), None).unwrap();
        let out = run(&inst, &mut Scripted::new(&opt.schedule), 0, None).unwrap();
        prop_assert_eq!(out.schedule.served_ids(), opt.schedule.served_ids());
    }

    #[test]
    fn dropping_requests_never_helps(inst in arb_instance(), pick in any::<u64>()) {
        let caps = Caps::default();
        let drop: BTreeSet<RequestId> = inst
            .requests()
            .iter()
            .filter(|r| (pick >> (r.id.0 % 64)) & 1 == 1)
            .map(|r| r.id)
            .collect();
        let full = opt_exact(&inst, 0, &caps, None).unwrap().throughput;
        let part = opt_exact(&inst.without(&drop), 0, &caps, None).unwrap().throughput;
        prop_assert!(part <= full);
        prop_assert!(full <= part + drop.len());
    }

    #[test]
    fn alignment_nests_windows(inst in arb_instance(), k in 1u64..=6) {
        let caps = Caps::default();
        let hat = perturb_align(&inst, k).unwrap();
        prop_assert!(is_lambda_perturbation(&inst, &hat, k).unwrap());
        prop_assert!(is_lambda_perturbation(&inst, &hat, k + 3).unwrap());
        prop_assert!(is_lambda_perturbation(&inst, &inst, 0).unwrap());
        let by_id = hat.by_id();
        for a in inst.requests() {
            let b = by_id[&a.id];
            prop_assert!(b.release.is_multiple_of(k) && b.deadline.is_multiple_of(k));
        }
        let opt = opt_exact(&inst, 0, &caps, None).unwrap().throughput;
        let opt_hat = opt_exact(&hat, 0, &caps, None).unwrap().throughput;
        prop_assert!(opt_hat <= opt);
    }

    #[test]
    fn collapsing_nodes_never_hurts(inst in arb_instance()) {
        let caps = Caps::default();
        let c = collapse_nodes(&inst, 0).unwrap();
        let before = opt_exact(&inst, 0, &caps, None).unwrap().throughput;
        let after = opt_exact(&c, 0, &caps, None).unwrap().throughput;
        prop_assert!(after >= before);
    }

    #[test]
    fn star_weight_is_mst(n in 1usize..=7, w in 1u64..=9, seed in any::<u64>(), v0 in 0usize..7) {
        let g = gen::random_metric(n, w, seed);
        let v0 = v0 % n;
        let emb = embed_star(&g, v0);
        prop_assert_eq!(emb.star.total(), mst_weight(&g));
        let rep = verify_embedding(&g, &emb, VerifyMode::Sampled { count: 16, seed }, &Caps::default()).unwrap();
        prop_assert!(rep.pass);
    }
}
