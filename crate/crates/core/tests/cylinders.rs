mod common;

use common::{corpus, erlang, hypoexp2};
use proptest::prelude::*;
use smdp_core::compose::compose;
use smdp_core::cylinder::*;
use smdp_core::{CompositionOperator, Distribution, Scheduler, Smdp};

fn p_paths(m: &Smdp, sch: &Scheduler, word: &[usize], t: f64) -> f64 {
    prob_cylinder_paths(m, sch, m.initial(), &TimeBoundedCylinder::new(word.to_vec(), t).unwrap()).unwrap()
}

fn p_inductive(m: &Smdp, sch: &Scheduler, word: &[usize], t: f64) -> f64 {
    prob_cylinder_inductive(m, sch, m.initial(), &TimeBoundedCylinder::new(word.to_vec(), t).unwrap()).unwrap()
}

fn anomaly(ctx: &str, op: CompositionOperator) -> (f64, f64) {
    let w = corpus(ctx);
    let uw = compose(&corpus("fig2_U"), &w, op).unwrap();
    let vw = compose(&corpus("fig2_V"), &w, op).unwrap();
    let p = |m: &Smdp| p_paths(m, &Scheduler::uniform(m), &[0, 0], 2.0);
    (p(&uw), p(&vw))
}

#[test]
fn anomaly_probabilities_match_closed_forms() {
    let cases = [
        ("fig4_W_prod", CompositionOperator::ProductRate, hypoexp2(20.0, 0.05, 2.0), hypoexp2(5.0, 0.2, 2.0)),
        ("fig4_W_min", CompositionOperator::Minimum, hypoexp2(1.0, 0.5, 2.0), hypoexp2(0.5, 2.0, 2.0)),
        ("fig4_W_max", CompositionOperator::Maximum, hypoexp2(2.0, 1.0, 2.0), erlang(2, 2.0, 2.0)),
    ];
    for (ctx, op, fast, slow) in cases {
        let (pu, pv) = anomaly(ctx, op);
        assert!((pu - fast).abs() < 1e-9, "{ctx}: {pu} vs {fast}");
        assert!((pv - slow).abs() < 1e-9, "{ctx}: {pv} vs {slow}");
    }
}

#[test]
fn anomaly_probabilities_match_printed_values() {
    // values printed to two digits for the three composition functions
    let printed = [
        ("fig4_W_prod", CompositionOperator::ProductRate, 0.09, 0.30),
        ("fig4_W_min", CompositionOperator::Minimum, 0.40, 0.51),
        ("fig4_W_max", CompositionOperator::Maximum, 0.75, 0.91),
    ];
    for (ctx, op, fast, slow) in printed {
        let (pu, pv) = anomaly(ctx, op);
        assert!((pu - fast).abs() < 0.006, "{ctx}: {pu}");
        assert!((pv - slow).abs() < 0.006, "{ctx}: {pv}");
        assert!(pu < pv);
    }
}

#[test]
fn chains_with_swapped_residences_agree() {
    // commutativity of convolution: exp(2) * exp(0.5) * exp(1)^k on both sides
    let (u, v) = (corpus("fig2_U"), corpus("fig2_V"));
    let (su, sv) = (Scheduler::uniform(&u), Scheduler::uniform(&v));
    for n in 2..=6 {
        let word = vec![0; n];
        for t in [0.5, 1.0, 2.0, 5.0] {
            let a = p_paths(&u, &su, &word, t);
            let b = p_paths(&v, &sv, &word, t);
            assert!((a - b).abs() < 1e-9, "n={n} t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn one_step_differs_in_the_first_state() {
    let (u, v) = (corpus("fig2_U"), corpus("fig2_V"));
    let a = p_paths(&u, &Scheduler::uniform(&u), &[0], 1.0);
    let b = p_paths(&v, &Scheduler::uniform(&v), &[0], 1.0);
    assert!((a - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
    assert!((b - (1.0 - (-0.5f64).exp())).abs() < 1e-12);
}

#[test]
fn fig3_adversary_probabilities() {
    let v = corpus("fig3_V");
    let text = std::fs::read_to_string(common::corpus_dir().join("fig3_V.sched")).unwrap();
    let sch = smdp_core::model::parse_scheduler(&v, &text).unwrap();
    let u = corpus("fig3_U");
    let half = Scheduler::uniform(&u);
    for n in 2..=5 {
        let word = vec![0; n];
        let t = 3.0;
        let mu_n = erlang(n as u32, 1.0, t);
        assert!((p_paths(&v, &sch, &word, t) - 0.5 * mu_n).abs() < 1e-9);
        assert!((p_paths(&u, &half, &word, t) - 0.5f64.powi(n as i32) * mu_n).abs() < 1e-9);
    }
}

#[test]
fn engines_agree_on_corpus() {
    for name in ["fig2_U", "fig2_V", "fig3_U", "fig3_V", "twolabel_U", "fig4_W_max"] {
        let m = corpus(name);
        let sch = Scheduler::uniform(&m);
        let words: Vec<Vec<usize>> = match m.num_labels() {
            1 => (1..=4).map(|n| vec![0; n]).collect(),
            _ => vec![vec![0], vec![1], vec![0, 1], vec![1, 1, 0], vec![0, 1, 0, 1]],
        };
        for w in &words {
            for t in [0.3, 1.0, 2.5, 6.0] {
                let a = p_paths(&m, &sch, w, t);
                let b = p_inductive(&m, &sch, w, t);
                assert!((a - b).abs() <= 1e-5, "{name} {w:?} t={t}: {a} vs {b}");
            }
            // saturation: a huge bound gives the untimed rectangular cylinder
            let r = prob_rect_cylinder(&m, &sch, m.initial(), &RectCylinder::unbounded_word(&m, w)).unwrap();
            let big = p_paths(&m, &sch, w, 1e6);
            assert!((r - big).abs() <= 1e-9, "{name} {w:?}: {r} vs {big}");
        }
    }
}

#[test]
fn one_letter_rectangle_equals_time_bound() {
    let m = corpus("fig3_V");
    let sch = Scheduler::uniform(&m);
    let c = RectCylinder {
        steps: vec![RectStep {
            labels: vec![0],
            times: TimeSet::new(vec![Interval::closed(0.0, 1.5)]).unwrap(),
            states: (0..m.num_states()).collect(),
        }],
    };
    let r = prob_rect_cylinder(&m, &sch, 0, &c).unwrap();
    assert!((r - p_paths(&m, &sch, &[0], 1.5)).abs() < 1e-12);
}

#[test]
fn zero_time_and_dead_words() {
    let u = corpus("fig2_U");
    let s = Scheduler::uniform(&u);
    assert_eq!(p_paths(&u, &s, &[0, 0], 0.0), 0.0);
    let v = corpus("fig3_V");
    let sch = smdp_core::model::parse_scheduler(&v, "v0 a 1\nv1 a 1\nv2 b 1\n").unwrap();
    assert_eq!(p_paths(&v, &sch, &[1], 5.0), 0.0);
}

/// Random model with residences of every literal family.
fn model() -> impl Strategy<Value = Smdp> {
    let dist = prop_oneof![
        (0.2f64..3.0).prop_map(|r| Distribution::exponential(r).unwrap()),
        (0.0f64..1.0, 0.1f64..2.0).prop_map(|(a, w)| Distribution::uniform(a, a + w).unwrap()),
        (0.1f64..2.0).prop_map(|c| Distribution::dirac(c).unwrap()),
        (0.5f64..2.0, 2.1f64..4.0).prop_map(|(a, b)| Distribution::phase_type(vec![a, b]).unwrap()),
    ];
    (
        prop::collection::vec(dist, 1..=3),
        prop::collection::vec((0usize..3, 0usize..3, 0.0f64..1.0), 6),
    )
        .prop_map(|(ds, edges)| {
            let n = ds.len();
            let mut b = Smdp::builder();
            b.labels(["a", "b"]);
            for (i, d) in ds.into_iter().enumerate() {
                b.state(&format!("s{i}"), d);
            }
            b.initial("s0");
            for (k, (from, to, p)) in edges.into_iter().enumerate() {
                let (from, to) = (from % n, to % n);
                let label = ["a", "b"][k % 2];
                // two edges per (state, label) at most, scaled below one
                b.transition(&format!("s{from}"), label, &format!("s{to}"), 0.45 * p + 0.05);
            }
            b.build()
        })
        .prop_filter("valid", |m| m.ensure_valid().is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn paths_and_inductive_engines_agree(m in model(), word in prop::collection::vec(0usize..2, 1..=3), t in 0.1f64..5.0) {
        let sch = Scheduler::uniform(&m);
        let a = p_paths(&m, &sch, &word, t);
        let b = p_inductive(&m, &sch, &word, t);
        prop_assert!((a - b).abs() <= 1e-5, "{} vs {}", a, b);
    }

    #[test]
    fn nondecreasing_in_time(m in model(), word in prop::collection::vec(0usize..2, 1..=3), t in 0.0f64..5.0, dt in 0.0f64..2.0) {
        let sch = Scheduler::uniform(&m);
        prop_assert!(p_paths(&m, &sch, &word, t) <= p_paths(&m, &sch, &word, t + dt) + 1e-12);
    }

    #[test]
    fn extending_the_word_cannot_help(m in model(), word in prop::collection::vec(0usize..2, 1..=3), a in 0usize..2, t in 0.0f64..5.0) {
        let sch = Scheduler::uniform(&m);
        let mut longer = word.clone();
        longer.push(a);
        prop_assert!(p_paths(&m, &sch, &longer, t) <= p_paths(&m, &sch, &word, t) + 1e-12);
    }

    #[test]
    fn saturation_matches_rectangles(m in model(), word in prop::collection::vec(0usize..2, 1..=4)) {
        let sch = Scheduler::uniform(&m);
        let r = prob_rect_cylinder(&m, &sch, m.initial(), &RectCylinder::unbounded_word(&m, &word)).unwrap();
        prop_assert!((r - p_paths(&m, &sch, &word, 1e6)).abs() <= 1e-9);
    }
}
