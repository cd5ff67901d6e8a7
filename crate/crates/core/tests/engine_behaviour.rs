mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::thread;

use cascade_core::cost;
use cascade_core::eval::{self, WorkloadOptions};
use cascade_core::tiers::Tier;
use cascade_core::{Cascade, CascadeConfig, CaptionKey, Error};

use common::{dataset, oracle_cascade, tiers, Counting};

fn config(tiers: Vec<Arc<dyn Tier>>, m: Vec<usize>, k: usize) -> CascadeConfig {
    CascadeConfig::new(tiers, m, 0.1, k).unwrap()
}

#[test]
fn concurrent_queries_charge_each_document_once() {
    let data = dataset(800, 32, 200, 1.2, 21);
    let base = tiers(&data, &[4, 16, 32], &[1.0, 3.0, 9.0]);
    let counted: Vec<Arc<Counting>> = base.iter().cloned().map(Counting::wrap).collect();
    let family = counted.iter().map(|c| c.clone() as Arc<dyn Tier>).collect();
    let engine = Arc::new(Cascade::build(data.images.doc_ids(), config(family, vec![40, 10], 5)).unwrap());

    let handles: Vec<_> = (0..8u64)
        .map(|t| {
            let engine = engine.clone();
            thread::spawn(move || {
                for i in 0..100u64 {
                    engine.query((i * 3 + t * 11) % 200).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }

    let ledger = engine.ledger();
    assert_eq!(ledger.q(), 800);
    for (level, tier) in counted.iter().enumerate().skip(1) {
        assert_eq!(ledger.invocations(level), ledger.touched_len(level) as u64);
        // racing producers may both encode a document; only one is stored and charged
        assert!(tier.calls() >= ledger.invocations(level));
        assert_eq!(engine.cache(level).len(), ledger.touched_len(level));
    }

    // the same touched sets as a sequential trace
    let mut expected = vec![BTreeSet::new(); 2];
    let keys: BTreeSet<CaptionKey> = (0..8u64)
        .flat_map(|t| (0..100u64).map(move |i| (i * 3 + t * 11) % 200))
        .collect();
    for key in keys {
        let (sets, _) = oracle_cascade(&base, &[40, 10], data.images.doc_ids(), key);
        for (j, set) in sets.into_iter().enumerate() {
            expected[j].extend(set);
        }
    }
    assert_eq!(ledger.touched_len(1), expected[0].len());
    assert_eq!(ledger.touched_len(2), expected[1].len());
}

#[test]
fn workload_hits_target_fraction() {
    let data = dataset(5000, 64, 2000, 1.0, 4);
    let pair = tiers(&data, &[8, 64], &[1.0, 4.0]);
    let engine = Cascade::build(data.images.doc_ids(), config(pair, vec![50], 10)).unwrap();
    let workload =
        eval::generate_workload(&engine, &data.truth, 0.1, 17, &WorkloadOptions::default()).unwrap();
    assert!((0.08..=0.12).contains(&workload.pilot_f), "pilot f {}", workload.pilot_f);
    assert!(workload.pool.len() >= 10, "pool {}", workload.pool.len());

    // the pilot is side-effect free; executing the workload realizes it
    assert_eq!(engine.ledger().q(), 0);
    for &key in &workload.queries {
        engine.query(key).unwrap();
    }
    let realized = cost::estimate_f(engine.ledger()).unwrap();
    assert_eq!(realized, workload.pilot_f);
}

#[test]
fn workload_is_seeded() {
    let data = dataset(500, 16, 200, 1.0, 5);
    let pair = tiers(&data, &[4, 16], &[1.0, 4.0]);
    let engine = Cascade::build(data.images.doc_ids(), config(pair, vec![20], 5)).unwrap();
    let opts = WorkloadOptions::default();
    let a = eval::generate_workload(&engine, &data.truth, 0.2, 1, &opts).unwrap();
    let b = eval::generate_workload(&engine, &data.truth, 0.2, 1, &opts).unwrap();
    assert_eq!(a, b);
    let c = eval::generate_workload(&engine, &data.truth, 0.2, 2, &opts).unwrap();
    assert_ne!(a.queries, c.queries);
}

#[test]
fn workload_infeasible_when_prefix_is_whole_collection() {
    let data = dataset(60, 8, 20, 1.0, 6);
    let pair = tiers(&data, &[2, 8], &[1.0, 4.0]);
    let engine = Cascade::build(data.images.doc_ids(), config(pair, vec![60], 10)).unwrap();
    let err =
        eval::generate_workload(&engine, &data.truth, 0.5, 0, &WorkloadOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err}");
    let full = eval::generate_workload(&engine, &data.truth, 1.0, 0, &WorkloadOptions::default()).unwrap();
    assert_eq!(full.pilot_f, 1.0);
}

#[test]
fn experiment_speedup_matches_two_level_formula() {
    let data = dataset(2000, 32, 300, 1.2, 8);
    let (t_s, t_1) = (1.0, 4.0);
    let pair = tiers(&data, &[8, 32], &[t_s, t_1]);
    let engine = Cascade::build(data.images.doc_ids(), config(pair, vec![50], 10)).unwrap();
    let workload =
        eval::generate_workload(&engine, &data.truth, 0.1, 3, &WorkloadOptions::default()).unwrap();
    let report = eval::run_experiment(&engine, &data.truth, &workload.queries, &[1, 5, 10]).unwrap();

    let f_hat = report.lifetime.realized_f;
    let formula: f64 = cost::two_level_speedup(t_s, t_1, f_hat).unwrap();
    let realized = report.realized_speedup.unwrap();
    assert!((realized - formula).abs() < 1e-12, "{realized} vs {formula}");
    let model: f64 = cost::two_level_speedup(t_s, t_1, 0.1).unwrap();
    assert!((report.model_speedup.unwrap() - model).abs() < 1e-12);
    assert_eq!(report.query_speedup, None);
    assert_eq!(report.recall.queries, 300);
}

#[test]
fn experiment_with_full_prefix_reproduces_large_tier_recall() {
    let data = dataset(300, 32, 100, 1.5, 9);
    let pair = tiers(&data, &[4, 32], &[1.0, 4.0]);
    let cascade = Cascade::build(data.images.doc_ids(), config(pair.clone(), vec![300], 10)).unwrap();
    let large = Cascade::build(data.images.doc_ids(), config(vec![pair[1].clone()], vec![], 10)).unwrap();
    let a = eval::run_experiment(&cascade, &data.truth, &[0, 1, 2], &[1, 5, 10]).unwrap();
    let b = eval::run_experiment(&large, &data.truth, &[0, 1, 2], &[1, 5, 10]).unwrap();
    assert_eq!(a.recall.recall, b.recall.recall);
}

#[test]
fn three_level_experiment_reports_query_speedup() {
    let data = dataset(500, 64, 50, 1.0, 10);
    let family = tiers(&data, &[8, 16, 64], &[0.5, 1.0, 3.3]);
    let engine = Cascade::build(data.images.doc_ids(), config(family, vec![50, 10], 10)).unwrap();
    let report = eval::run_experiment(&engine, &data.truth, &[0, 1], &[1, 10]).unwrap();
    let s = report.query_speedup.unwrap();
    assert!((s - 165.0 / 83.0).abs() < 1e-9, "{s}");
}

#[test]
fn evaluation_leaves_ledger_and_caches_untouched() {
    let data = dataset(400, 32, 120, 1.2, 11);
    let family = tiers(&data, &[4, 16, 32], &[1.0, 3.0, 9.0]);
    let engine = Cascade::build(data.images.doc_ids(), config(family, vec![30, 10], 10)).unwrap();
    for key in 0..10 {
        engine.query(key).unwrap();
    }
    let before = engine.ledger().snapshot();
    let cached: Vec<_> = (1..=2).map(|l| engine.cache(l).ids()).collect();
    let report = eval::evaluate(&engine, &data.truth, &[1, 5, 10]).unwrap();
    assert_eq!(engine.ledger().snapshot(), before);
    let after: Vec<_> = (1..=2).map(|l| engine.cache(l).ids()).collect();
    assert_eq!(cached, after);
    assert!(report.at(1).unwrap() <= report.at(5).unwrap());
    assert!(report.at(5).unwrap() <= report.at(10).unwrap());
}

#[test]
fn larger_tier_recall_dominates_in_sign_test() {
    let mut not_worse = 0;
    for seed in 0..24u64 {
        let data = dataset(1000, 64, 200, 1.5, 300 + seed);
        let pair = tiers(&data, &[8, 64], &[1.0, 4.0]);
        let r1 = |tier: &Arc<dyn Tier>| {
            let engine = Cascade::build(data.images.doc_ids(), config(vec![tier.clone()], vec![], 1)).unwrap();
            eval::evaluate(&engine, &data.truth, &[1]).unwrap().at(1).unwrap()
        };
        not_worse += usize::from(r1(&pair[1]) >= r1(&pair[0]));
    }
    // one-sided sign test at the 1% level needs 19 of 24
    assert!(not_worse >= 19, "{not_worse} of 24");
}
