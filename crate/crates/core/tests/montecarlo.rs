mod common;

use common::corpus;
use smdp_core::compose::compose;
use smdp_core::cylinder::{prob_cylinder_paths, TimeBoundedCylinder};
use smdp_core::montecarlo::*;
use smdp_core::{CompositionOperator, Scheduler, Smdp};

fn exact(m: &Smdp, sch: &Scheduler, word: &[usize], t: f64) -> f64 {
    prob_cylinder_paths(m, sch, m.initial(), &TimeBoundedCylinder::new(word.to_vec(), t).unwrap()).unwrap()
}

#[test]
fn intervals_cover_anomaly_probabilities() {
    let cases = [
        ("fig4_W_prod", CompositionOperator::ProductRate),
        ("fig4_W_min", CompositionOperator::Minimum),
        ("fig4_W_max", CompositionOperator::Maximum),
    ];
    let mut seed = 7;
    for (ctx, op) in cases {
        let w = corpus(ctx);
        for base in ["fig2_U", "fig2_V"] {
            let m = compose(&corpus(base), &w, op).unwrap();
            let sch = Scheduler::uniform(&m);
            let p = exact(&m, &sch, &[0, 0], 2.0);
            let est = estimate_cylinder(&m, &sch, &[0, 0], 2.0, 1_000_000, seed).unwrap();
            seed += 1;
            assert!(est.contains(p), "{base}*{ctx}: {} +- {} vs {p}", est.estimate, est.half_width);
        }
    }
}

#[test]
fn interval_covers_single_step_probability() {
    let u = corpus("fig2_U");
    let sch = Scheduler::uniform(&u);
    let est = estimate_cylinder(&u, &sch, &[0], 1.0, 1_000_000, 42).unwrap();
    assert!(est.contains(1.0 - (-2.0f64).exp()));
}

#[test]
fn same_seed_same_estimate() {
    let v = corpus("fig3_V");
    let sch = Scheduler::uniform(&v);
    let a = estimate_cylinder(&v, &sch, &[0, 1, 0], 2.0, 200_000, 3).unwrap();
    let b = estimate_cylinder(&v, &sch, &[0, 1, 0], 2.0, 200_000, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(sample_path(&v, &sch, 5, 9).unwrap(), sample_path(&v, &sch, 5, 9).unwrap());
}

#[test]
fn chain_paths_follow_the_chain() {
    let u = corpus("fig2_U");
    let sch = Scheduler::uniform(&u);
    for seed in 0..20 {
        let SampledPath::Complete(p) = sample_path(&u, &sch, 3, seed).unwrap() else {
            panic!("chain never deadlocks");
        };
        assert_eq!(p.start, 0);
        let states: Vec<usize> = p.steps.iter().map(|s| s.state).collect();
        assert_eq!(states, [1, 2, 2]);
        assert!(p.steps.iter().all(|s| s.label == 0 && s.sojourn >= 0.0));
    }
}

#[test]
fn degenerate_cylinders_are_never_hit() {
    let u = corpus("fig2_U");
    let sch = Scheduler::uniform(&u);
    assert_eq!(estimate_cylinder(&u, &sch, &[0, 0], 0.0, 10_000, 1).unwrap().hits, 0);
    let v = corpus("fig3_V");
    let sched = smdp_core::model::parse_scheduler(&v, "v0 a 1\nv1 a 1\nv2 b 1\n").unwrap();
    assert_eq!(estimate_cylinder(&v, &sched, &[1], 5.0, 10_000, 1).unwrap().hits, 0);
    assert!(estimate_cylinder(&u, &sch, &[0], 1.0, 10, 1).is_err());
}
