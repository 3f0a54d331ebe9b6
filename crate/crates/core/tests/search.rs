mod common;

use std::collections::BTreeSet;

use extruplan::generate::{generate, trap_suite, Family};
use extruplan::heuristics::HeuristicKind;
use extruplan::search::{plan, Algorithm, SearchConfig, SearchLimits, SearchStatus, TraceEvent};
use extruplan::validate::validate_plan;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn traced(algorithm: Algorithm, seed: u64) -> Vec<TraceEvent> {
    let g = trap_suite(0, 1).remove(0);
    let mut c = SearchConfig::new(algorithm, HeuristicKind::Euclidean, seed);
    c.trace = true;
    c.limits = SearchLimits { timeout: Some(std::time::Duration::from_secs(30)), max_expansions: Some(200) };
    plan(&g.problem, &c).trace
}

#[test]
fn pops_follow_the_key_order() {
    for alg in [Algorithm::Progression, Algorithm::ForwardCheck, Algorithm::Regression] {
        let mut open = BTreeSet::new();
        let mut pops = 0;
        for ev in traced(alg, 1) {
            match ev {
                TraceEvent::Push { key, .. } => {
                    assert!(open.insert(key));
                }
                TraceEvent::Pop { key, .. } => {
                    assert_eq!(open.first(), Some(&key), "{alg:?} popped out of order");
                    open.remove(&key);
                    pops += 1;
                }
                TraceEvent::Planner { .. } => {}
            }
        }
        assert!(pops > 0);
    }
}

#[test]
fn planning_happens_only_while_handling_a_pop() {
    for alg in [Algorithm::Progression, Algorithm::ForwardCheck, Algorithm::Regression] {
        let mut current = None;
        let mut calls = 0;
        for ev in traced(alg, 2) {
            match ev {
                TraceEvent::Pop { node, .. } => current = Some(node),
                TraceEvent::Planner { node } => {
                    assert_eq!(Some(node), current, "{alg:?} planned for a node it had not popped");
                    calls += 1;
                }
                TraceEvent::Push { .. } => {}
            }
        }
        assert!(calls > 0);
    }
}

#[test]
fn every_algorithm_and_heuristic_returns_valid_plans() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let problems =
        [generate(Family::Tower, &[2, 1, 2], &mut rng).unwrap(), generate(Family::Pyramid, &[3], &mut rng).unwrap()];
    for g in &problems {
        for alg in [Algorithm::Progression, Algorithm::ForwardCheck, Algorithm::Regression] {
            for h in HeuristicKind::ALL {
                let mut c = SearchConfig::new(alg, h, 4);
                c.limits = SearchLimits::timeout(60.0);
                let out = plan(&g.problem, &c);
                if let Some(p) = &out.plan {
                    let v = validate_plan(&g.problem, p);
                    assert!(v.valid, "{} {alg:?}/{h}: {}", g.name, v.to_json());
                } else {
                    assert_ne!(out.status, SearchStatus::Solved);
                }
            }
        }
        let out = plan(&g.problem, &SearchConfig::new(Algorithm::Regression, HeuristicKind::StiffPlan, 0));
        assert_eq!(out.status, SearchStatus::Solved, "{}", g.name);
    }
}

#[test]
fn chain_plans_bottom_up() {
    let p = common::chain_problem();
    for alg in [Algorithm::Progression, Algorithm::Regression] {
        let out = plan(&p, &SearchConfig::new(alg, HeuristicKind::Euclidean, 7));
        let seq = out.plan.expect("chain is feasible").sequence;
        assert_eq!(seq.iter().map(|d| d.element.0).collect::<Vec<_>>(), vec![0, 1]);
        // a chain never branches, so only persistence re-queues can jump back
        assert!(out.stats.backtracks <= out.stats.requeues, "{alg:?} {:?}", out.stats);
    }
}

#[test]
fn expansion_limit_stops_the_search() {
    let g = trap_suite(0, 1).remove(0);
    let mut c = SearchConfig::new(Algorithm::Progression, HeuristicKind::Random, 0);
    c.limits = SearchLimits { timeout: None, max_expansions: Some(3) };
    let out = plan(&g.problem, &c);
    assert!(out.plan.is_none());
    assert_eq!(out.status, SearchStatus::Timeout);
    assert!(out.stats.expansions <= 3);
}
