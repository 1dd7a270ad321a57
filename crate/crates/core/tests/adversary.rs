use ttw_core::adversary::{attack_with, laxity_for_delta, AttackSpec, RequestKind, Termination};
use ttw_core::embedding::StarMetric;
use ttw_core::gen;
use ttw_core::instance::validate_schedule_from;
use ttw_core::metric::tsp_exact;
use ttw_core::policies::PolicyKind;
use ttw_core::Caps;

use num_rational::Ratio;

fn general(seed: u64, delta: Ratio<u64>) -> AttackSpec {
    let g = gen::random_metric(4 + (seed % 3) as usize, 4, seed);
    let tsp = tsp_exact(&g, 14).unwrap().weight;
    AttackSpec::General {
        laxity: laxity_for_delta(tsp, delta).unwrap(),
        metric: g,
        v0: (seed % 4) as usize,
    }
}

#[test]
fn transcripts_are_consistent_on_random_metrics() {
    let caps = Caps::default();
    for seed in 0..6 {
        let spec = general(seed, Ratio::new(1, 12));
        for kind in PolicyKind::ALL {
            let (a, meta) = attack_with(&spec, kind, &caps).unwrap();
            let tr = &a.transcript;
            assert_eq!(meta.name, kind.as_str());
            assert_eq!(tr.kinds.len(), tr.instance.len());
            for b in &tr.blocks {
                assert_eq!(b.type_b.iter().sum::<u64>(), tr.f);
                assert_eq!(b.type_b[tr.v0], 0);
                assert_eq!(b.end - b.start, 3 * tr.f);
            }
            let finals = tr.kinds.values().filter(|k| **k == RequestKind::Final).count() as u64;
            match tr.termination.unwrap() {
                Termination::Backlog { count, node, .. } => {
                    assert_eq!(count, tr.laxity);
                    assert_ne!(node, tr.v0);
                    assert_eq!(finals, count);
                }
                Termination::Idleness { count, .. } | Termination::Travel { count, .. } => {
                    assert_eq!(count, 3 * tr.laxity);
                    assert_eq!(finals, count);
                }
                Termination::Emissions { .. } => panic!("block attacks never end by emissions"),
            }
            assert!(validate_schedule_from(&tr.instance, &a.schedule, Some(tr.v0)).is_ok());
            assert!(validate_schedule_from(&tr.instance, &a.opt_prime, Some(tr.v0)).is_ok());
            assert!(a.report.opt_prime_bound, "seed {seed} {kind}");
            assert!(a.report.exceeds_one(), "seed {seed} {kind}");
            assert!(tr.observations.as_ref().unwrap().hold(tr.laxity));
        }
    }
}

#[test]
fn attacks_are_reproducible() {
    let caps = Caps::default();
    let spec = AttackSpec::Star {
        star: StarMetric::new(vec![0, 2, 1, 1, 3]),
        v0: 0,
        laxity: laxity_for_delta(7, Ratio::new(1, 16)).unwrap(),
    };
    for kind in [PolicyKind::TspEdf, PolicyKind::OrientWindow, PolicyKind::Nearest] {
        let (a, _) = attack_with(&spec, kind, &caps).unwrap();
        let (b, _) = attack_with(&spec, kind, &caps).unwrap();
        assert_eq!(a.transcript, b.transcript);
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.report, b.report);
    }
}

#[test]
fn case_a_spacing_follows_the_diameter() {
    let g = gen::path(5, 3);
    let spec = AttackSpec::CaseA {
        metric: g,
        laxity: 2,
        count: 4,
    };
    let (a, _) = attack_with(&spec, PolicyKind::Edf, &Caps::default()).unwrap();
    let releases: Vec<u64> = a.transcript.instance.requests().iter().map(|r| r.release).collect();
    // one emission every Δ + 1 = 13 ticks
    assert_eq!(releases, vec![13, 26, 39, 52]);
    assert_eq!(a.report.alg, 0);
    assert_eq!(a.report.opt_prime, 4);
}
