use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::engine::{applicable_actions, apply_action, initial_state, replay, ActionInstance};
use crate::reward::{FeatureMap, RewardModel};
use crate::testing::{chain, toy, world};

/// Direct recursion with no sharing, as an independent oracle.
fn naive_q(w: &WorldSpec, rm: &RewardModel, s: &GameState, d: usize, beta: f64) -> Vec<f64> {
    applicable_actions(w, s)
        .iter()
        .map(|a| {
            let next = apply_action(w, s, a).unwrap().next_state;
            rm.reward(&next).unwrap() + naive_v(w, rm, &next, d - 1, beta)
        })
        .collect()
}

fn naive_v(w: &WorldSpec, rm: &RewardModel, s: &GameState, j: usize, beta: f64) -> f64 {
    if j == 0 || s.is_terminal(w) {
        return 0.0;
    }
    let q = naive_q(w, rm, s, j, beta);
    if q.is_empty() {
        return 0.0;
    }
    let p = boltzmann_policy(&q, beta).unwrap();
    p.iter().zip(&q).map(|(p, q)| p * q).sum()
}

fn weights_for(fm: &FeatureMap, named: &[(&str, f64)]) -> Vec<f64> {
    let mut w = vec![0.0; fm.len()];
    for (n, v) in named {
        w[fm.index_of(n).unwrap()] = *v;
    }
    w
}

fn demo(w: &WorldSpec, id: &str, actions: &[ActionInstance]) -> Demonstration {
    let r = replay(w, actions).unwrap();
    Demonstration {
        source_trace_id: String::from(id),
        pairs: r.steps.iter().map(|s| (s.state.clone(), s.action)).collect(),
    }
}

fn chain_demo(w: &WorldSpec) -> Demonstration {
    let s1 = w.location_ix("s1").unwrap();
    let s2 = w.location_ix("s2").unwrap();
    demo(w, "chain", &[ActionInstance::goto(s1), ActionInstance::goto(s2)])
}

fn toy_demo(w: &WorldSpec) -> Demonstration {
    let l = |id| w.location_ix(id).unwrap();
    let o = |id| w.object_ix(id).unwrap();
    demo(
        w,
        "toy",
        &[
            ActionInstance::take(o("key")),
            ActionInstance::goto(l("b")),
            ActionInstance::unlock(o("chest"), o("key")),
            ActionInstance::open(o("chest")),
            ActionInstance::take(o("gem")),
            ActionInstance::goto(l("c")),
            ActionInstance::open(o("door")),
            ActionInstance::goto(l("d")),
        ],
    )
}

#[test]
fn zero_reward_gives_zero_q() {
    let w = toy();
    let rm = RewardModel::zero(FeatureMap::for_world(&w));
    for d in 1..=3 {
        for (_, q) in soft_q(&w, &rm, &initial_state(&w), d, 1.0).unwrap() {
            assert_eq!(q, 0.0);
        }
    }
}

#[test]
fn depth_one_is_successor_reward() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let rm = RewardModel::new(fm.clone(), weights_for(&fm, &[("locations_available", 0.5), ("inventory_share", -0.3)])).unwrap();
    let s = initial_state(&w);
    for (a, q) in soft_q(&w, &rm, &s, 1, 2.0).unwrap() {
        let next = apply_action(&w, &s, &a).unwrap().next_state;
        assert_eq!(q, rm.reward(&next).unwrap());
    }
}

#[test]
fn chain_depth_two_by_hand() {
    // At s1 (all locations available): goto s0 leads to X with R = a + d and a
    // single onward move back to s1, so Q = 2(a + d). goto s2 ends the game:
    // Q = a + b + c + d.
    let w = chain();
    let fm = FeatureMap::for_world(&w);
    let (a, b, c, d) = (0.1, 0.2, 0.3, -0.1);
    let rm = RewardModel::new(
        fm.clone(),
        weights_for(&fm, &[("plot:mid", a), ("plot:goal", b), ("ending:goal", c), ("locations_available", d)]),
    )
    .unwrap();
    let s1 = replay(&w, &[ActionInstance::goto(w.location_ix("s1").unwrap())])
        .unwrap()
        .final_state()
        .clone();
    let q = soft_q(&w, &rm, &s1, 2, 1.0).unwrap();
    assert_eq!(q.len(), 2);
    assert_eq!(q[0].0, ActionInstance::goto(w.location_ix("s0").unwrap()));
    assert!((q[0].1 - 2.0 * (a + d)).abs() < 1e-15);
    assert!((q[1].1 - (a + b + c + d)).abs() < 1e-15);

    // Two pairs: the opening move is forced (log 1 = 0), the second picks s2.
    let cfg = LearnerConfig::new(2, 1.0);
    let ll = log_likelihood(&w, &rm, &[chain_demo(&w)], &cfg).unwrap();
    let (q0, q1) = (2.0 * (a + d), a + b + c + d);
    let expected = libm::log(libm::exp(q1) / (libm::exp(q0) + libm::exp(q1)));
    assert!((ll - expected).abs() < 1e-14, "{ll} vs {expected}");
}

#[test]
fn soft_q_rejects_terminal_states() {
    let w = chain();
    let rm = RewardModel::zero(FeatureMap::for_world(&w));
    let end = replay(
        &w,
        &[
            ActionInstance::goto(w.location_ix("s1").unwrap()),
            ActionInstance::goto(w.location_ix("s2").unwrap()),
        ],
    )
    .unwrap()
    .final_state()
    .clone();
    assert_eq!(soft_q(&w, &rm, &end, 1, 1.0), Err(RhirlError::TerminalState));
}

#[test]
fn soft_q_matches_naive_recursion() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let weights = [0.05, 0.1, 0.2, -0.15, 0.1, 0.2, -0.1, 0.1];
    let rm = RewardModel::new(fm, weights.to_vec()).unwrap();
    let key_taken = replay(&w, &[ActionInstance::take(w.object_ix("key").unwrap())])
        .unwrap()
        .final_state()
        .clone();
    for s in [initial_state(&w), key_taken] {
        for d in 1..=4 {
            let ours: Vec<f64> = soft_q(&w, &rm, &s, d, 0.7).unwrap().into_iter().map(|(_, q)| q).collect();
            let oracle = naive_q(&w, &rm, &s, d, 0.7);
            assert_eq!(ours.len(), oracle.len());
            for (x, y) in ours.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-12, "depth {d}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn empty_demonstrations_have_zero_likelihood() {
    let w = toy();
    let rm = RewardModel::zero(FeatureMap::for_world(&w));
    assert_eq!(log_likelihood(&w, &rm, &[], &LearnerConfig::new(2, 1.0)).unwrap(), 0.0);
}

#[test]
fn uniform_policy_likelihood() {
    // Initial toy state: goto b, examine key, take key, use key.
    let w = toy();
    let rm = RewardModel::zero(FeatureMap::for_world(&w));
    assert_eq!(applicable_actions(&w, &initial_state(&w)).len(), 4);
    let d = demo(&w, "one", &[ActionInstance::take(w.object_ix("key").unwrap())]);
    let ll = log_likelihood(&w, &rm, &[d], &LearnerConfig::new(3, 0.5)).unwrap();
    assert!((ll - libm::log(0.25)).abs() < 1e-15 && (ll + 1.3863).abs() < 1e-4);
}

#[test]
fn inapplicable_demonstration_is_named() {
    let w = toy();
    let rm = RewardModel::zero(FeatureMap::for_world(&w));
    let mut d = toy_demo(&w);
    d.pairs[2].1 = ActionInstance::goto(w.location_ix("d").unwrap());
    let err = log_likelihood(&w, &rm, &[d], &LearnerConfig::new(1, 1.0)).unwrap_err();
    assert_eq!(
        err,
        RhirlError::DemonstrationMismatch {
            trace_id: "toy".into(),
            index: 2
        }
    );
}

#[test]
fn zero_weights_on_symmetric_world_give_zero_gradient() {
    // From s1 both successors share every descriptor except ones the
    // symmetric world never distinguishes: two dead-end rooms.
    let w = world(
        r#"{
          "schema_version": "1",
          "start_location": "hub",
          "locations": [
            {"id": "hub", "adjacent": ["left", "right"]},
            {"id": "left", "adjacent": ["hub"]},
            {"id": "right", "adjacent": ["hub"]},
            {"id": "exit"}
          ],
          "plot_points": [{"id": "out", "trigger": {"at": "exit"}, "is_ending": true}]
        }"#,
    );
    let fm = FeatureMap::for_world(&w);
    let rm = RewardModel::zero(fm);
    let d = demo(&w, "sym", &[ActionInstance::goto(w.location_ix("left").unwrap())]);
    for h in 1..=3 {
        let g = grad_log_likelihood(&w, &rm, &[d.clone()], &LearnerConfig::new(h, 1.0)).unwrap();
        assert!(g.iter().all(|x| *x == 0.0), "h={h}: {g:?}");
    }
}

#[test]
fn depth_one_gradient_closed_form() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let weights = vec![0.1, -0.2, 0.05, 0.3, -0.1, 0.15, 0.05, -0.05];
    let rm = RewardModel::new(fm.clone(), weights).unwrap();
    let d = toy_demo(&w);
    let beta = 1.7;
    let g = grad_log_likelihood(&w, &rm, &[d.clone()], &LearnerConfig::new(1, beta)).unwrap();
    let mut expected = vec![0.0; fm.len()];
    for (s, a) in &d.pairs {
        let acts = applicable_actions(&w, s);
        let phis: Vec<Vec<f64>> = acts
            .iter()
            .map(|b| fm.phi(&apply_action(&w, s, b).unwrap().next_state))
            .collect();
        let q: Vec<f64> = acts
            .iter()
            .map(|b| rm.reward(&apply_action(&w, s, b).unwrap().next_state).unwrap())
            .collect();
        let p = boltzmann_policy(&q, beta).unwrap();
        let chosen = acts.iter().position(|b| b == a).unwrap();
        for k in 0..fm.len() {
            let mean: f64 = p.iter().zip(&phis).map(|(p, f)| p * f[k]).sum();
            expected[k] += beta * phis[chosen][k] - beta * mean;
        }
    }
    for (x, y) in g.iter().zip(&expected) {
        assert!((x - y).abs() < 1e-12, "{g:?} vs {expected:?}");
    }
}

fn finite_difference(obj: &LikelihoodObjective<'_>, w: &[f64], eps: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut hi = w.to_vec();
            let mut lo = w.to_vec();
            hi[i] += eps;
            lo[i] -= eps;
            (obj.value(&hi).unwrap() - obj.value(&lo).unwrap()) / (2.0 * eps)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn gradient_matches_finite_differences(
        raw in proptest::collection::vec(-1.0f64..1.0, 8),
        h in 1usize..=3,
        beta in 0.05f64..3.0,
    ) {
        let w = toy();
        let fm = FeatureMap::for_world(&w);
        let weights = crate::reward::project_l1(&raw, 1.0);
        let d = toy_demo(&w);
        let obj = LikelihoodObjective::new(&w, &fm, &[d], h, beta).unwrap();
        let (_, g) = obj.value_and_gradient(&weights).unwrap();
        let fd = finite_difference(&obj, &weights, 1e-5);
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = libm::sqrt(g.iter().map(|a| a * a).sum::<f64>()).max(libm::sqrt(fd.iter().map(|a| a * a).sum::<f64>()));
        prop_assert!(diff <= 1e-4 * scale.max(1e-8), "{:?} vs {:?}", g, fd);
    }

    #[test]
    fn log_likelihood_is_non_positive(
        raw in proptest::collection::vec(-1.0f64..1.0, 8),
        h in 1usize..=3,
        beta in 0.0f64..5.0,
    ) {
        let w = toy();
        let fm = FeatureMap::for_world(&w);
        let rm = RewardModel::new(fm, raw).unwrap();
        let ll = log_likelihood(&w, &rm, &[toy_demo(&w)], &LearnerConfig::new(h, beta)).unwrap();
        prop_assert!(ll <= 0.0);
    }
}

#[test]
fn large_beta_is_nearly_greedy() {
    let q = [0.3, 0.31, -1.0];
    let p = boltzmann_policy(&q, 1e6).unwrap();
    assert!(p[1] >= 1.0 - 1e-6);
}

#[test]
fn horizon_consistency_on_short_chain() {
    // Diameter 3; reward only on the ending indicator.
    let w = world(
        r#"{
          "schema_version": "1",
          "start_location": "c0",
          "locations": [
            {"id": "c0", "adjacent": ["c1"]},
            {"id": "c1", "adjacent": ["c0", "c2"]},
            {"id": "c2", "adjacent": ["c1", "c3"]},
            {"id": "c3", "adjacent": ["c2"]}
          ],
          "plot_points": [{"id": "end", "trigger": {"at": "c3"}, "is_ending": true}]
        }"#,
    );
    let fm = FeatureMap::for_world(&w);
    let rm = RewardModel::new(fm.clone(), weights_for(&fm, &[("ending:end", 1.0)])).unwrap();
    let ranking = |q: Vec<(ActionInstance, f64)>| {
        let mut order: Vec<usize> = (0..q.len()).collect();
        order.sort_by(|&i, &j| q[j].1.total_cmp(&q[i].1).then(i.cmp(&j)));
        order
    };
    let l = |id| w.location_ix(id).unwrap();
    let mut states = vec![initial_state(&w)];
    for path in [&[l("c1")][..], &[l("c1"), l("c2")][..], &[l("c1"), l("c0")][..]] {
        let acts: Vec<_> = path.iter().map(|x| ActionInstance::goto(*x)).collect();
        states.push(replay(&w, &acts).unwrap().final_state().clone());
    }
    for s in &states {
        for h in 3..=5 {
            let a = ranking(soft_q(&w, &rm, s, h, 1.0).unwrap());
            let b = ranking(soft_q(&w, &rm, s, h + 1, 1.0).unwrap());
            assert_eq!(a, b, "h = {h}");
        }
    }
}

#[test]
fn training_is_monotone_and_bounded() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let demos = [toy_demo(&w)];
    for h in 1..=3 {
        for beta in [0.1, 0.5, 1.0] {
            let cfg = LearnerConfig::new(h, beta);
            let (rm, record) = train(&w, &fm, &demos, &cfg).unwrap();
            let lls = record.log_likelihoods();
            assert_eq!(lls.len(), cfg.max_iterations + 1);
            assert!(lls.windows(2).all(|p| p[1] >= p[0]), "{lls:?}");
            assert!(lls[lls.len() - 1] >= lls[0]);
            assert!(rm.l1_norm() <= 1.0 + 1e-12);
            assert_eq!(rm.weights(), &record.weights[..]);
        }
    }
}

#[test]
fn training_is_deterministic() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let cfg = LearnerConfig::new(2, 0.5);
    let a = train(&w, &fm, &[toy_demo(&w)], &cfg).unwrap();
    let b = train(&w, &fm, &[toy_demo(&w)], &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_requires_demonstrations() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    assert_eq!(
        train(&w, &fm, &[], &LearnerConfig::default()).unwrap_err(),
        RhirlError::EmptyDemonstrations
    );
}

#[test]
fn config_validation() {
    assert!(LearnerConfig::new(0, 1.0).validate().is_err());
    assert!(LearnerConfig::new(1, -0.1).validate().is_err());
    assert!(LearnerConfig { max_iterations: 0, ..LearnerConfig::default() }.validate().is_err());
    assert!(LearnerConfig::default().validate().is_ok());
}

#[test]
fn grid_cardinality_and_independence() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let mut groups = alloc::collections::BTreeMap::new();
    groups.insert(String::from("g1"), vec![toy_demo(&w)]);
    groups.insert(String::from("g2"), vec![chain_like_toy_demo(&w)]);
    let base = LearnerConfig {
        max_iterations: 2,
        ..LearnerConfig::default()
    };
    let grid = run_grid(&w, &fm, &groups, &[1, 2, 3, 4], &[0.1, 0.5, 1.0], &base).unwrap();
    assert_eq!(grid.len(), 24);
    let cell = GridCell {
        group: "g2".into(),
        horizon: 2,
        beta: 0.5,
    };
    let alone = train(&w, &fm, &groups["g2"], &LearnerConfig { horizon: 2, beta: 0.5, ..base }).unwrap().1;
    assert_eq!(grid[&cell].as_ref().unwrap(), &alone);
}

fn chain_like_toy_demo(w: &WorldSpec) -> Demonstration {
    let l = |id| w.location_ix(id).unwrap();
    demo(w, "walk", &[ActionInstance::goto(l("b")), ActionInstance::goto(l("c")), ActionInstance::goto(l("b"))])
}

#[test]
fn grid_keeps_failed_cells() {
    let w = toy();
    let fm = FeatureMap::for_world(&w);
    let mut bad = toy_demo(&w);
    bad.pairs[0].1 = ActionInstance::goto(w.location_ix("d").unwrap());
    let mut groups = alloc::collections::BTreeMap::new();
    groups.insert(String::from("bad"), vec![bad]);
    groups.insert(String::from("good"), vec![toy_demo(&w)]);
    let grid = run_grid(&w, &fm, &groups, &[1], &[0.5], &LearnerConfig { max_iterations: 1, ..LearnerConfig::default() }).unwrap();
    assert_eq!(grid.len(), 2);
    assert!(grid.values().filter(|r| r.is_err()).count() == 1);
    assert!(run_grid(&w, &fm, &alloc::collections::BTreeMap::new(), &[1], &[0.5], &LearnerConfig::default()).is_err());
}
