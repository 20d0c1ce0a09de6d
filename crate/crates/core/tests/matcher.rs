mod common;

use std::collections::BTreeMap;

use lcc_core::matcher::{global_match_identification, match_chain, match_probe, match_signature, Gallery};
use lcc_core::models::{train_model, LogisticConfig, ModelConfig};
use lcc_core::pairs::build_local_bank;
use lcc_core::signature::build_signature;
use lcc_core::{LabelPair, LabelPairSet, MatchMode, PairSource, Signature, Termination};
use ndarray::{array, Array1};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct Case {
    signature: Signature,
    pairs: LabelPairSet,
    start: usize,
}

fn local_value(rng: &mut ChaCha8Rng) -> f64 {
    // coarse grid so equal votes and 0.5 ties show up
    match rng.random_range(0..3) {
        0 => rng.random_range(0..=10) as f64 / 10.0,
        _ => rng.random_range(0.0..1.0),
    }
}

fn build_case(l: usize, pairs: Vec<LabelPair>, rng: &mut ChaCha8Rng) -> Case {
    let global: Vec<f64> = {
        let raw: Vec<f64> = (0..l).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    };
    let local: BTreeMap<_, _> = pairs
        .iter()
        .map(|&p| {
            let b = local_value(rng);
            (p, (b, 1.0 - b))
        })
        .collect();
    let signature = Signature::new(global, local, MatchMode::Classification).unwrap();
    Case {
        signature,
        pairs: LabelPairSet::new(PairSource::Confusion, 0.0, pairs),
        start: rng.random_range(0..l),
    }
}

fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.random_range(2..=6);
    let mut all = Vec::new();
    for i in 0..l {
        for j in (i + 1)..l {
            all.push(LabelPair::new(i, j).unwrap());
        }
    }
    let count = rng.random_range(0..=all.len().min(8));
    let mut chosen = Vec::new();
    for _ in 0..count {
        chosen.push(all.swap_remove(rng.random_range(0..all.len())));
    }
    build_case(l, chosen, &mut rng)
}

fn random_tree_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.random_range(2..=6);
    let pairs = (1..l).map(|v| LabelPair::new(rng.random_range(0..v), v).unwrap()).collect();
    build_case(l, pairs, &mut rng)
}

/// Step-by-step interpreter of the chain walk, kept separate from the library.
fn interpret(case: &Case) -> (usize, usize, Termination) {
    let pairs: Vec<(usize, usize)> = case.pairs.iter().map(|p| (p.lo(), p.hi())).collect();
    let mut o = case.start;
    let mut accepted = vec![o];
    loop {
        let related: Vec<(usize, usize)> = pairs.iter().copied().filter(|&(a, b)| a == o || b == o).collect();
        if related.is_empty() {
            return (o, accepted.len() - 1, Termination::NoPairs);
        }
        let mut a = 0.0;
        let mut next = o;
        for (x, y) in related {
            let (bx, by) = case.signature.local_scores(LabelPair::new(x, y).unwrap()).unwrap();
            let (arg, value) = if by > bx { (y, by) } else { (x, bx) };
            if arg != o && value > a {
                next = arg;
                a = value;
            }
        }
        if next == o {
            return (o, accepted.len() - 1, Termination::NoImprovement);
        }
        if accepted.contains(&next) {
            return (o, accepted.len() - 1, Termination::CycleGuard);
        }
        accepted.push(next);
        o = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn chain_matches_interpreter(seed in any::<u64>()) {
        let case = random_case(seed);
        let trace = match_chain(&case.signature, &case.pairs, case.start).unwrap();
        let (final_label, steps, reason) = interpret(&case);
        prop_assert_eq!(trace.final_label, final_label);
        prop_assert_eq!(trace.steps.len(), steps);
        prop_assert_eq!(trace.terminated_by, reason);
    }

    #[test]
    fn chain_properties(seed in any::<u64>()) {
        let case = random_case(seed);
        let l = case.signature.class_count();
        let trace = match_chain(&case.signature, &case.pairs, case.start).unwrap();
        prop_assert!(trace.steps.len() < l);
        let mut current = case.start;
        let mut seen = vec![case.start];
        for step in &trace.steps {
            prop_assert!(step.pair.contains(current));
            let (b_lo, b_hi) = case.signature.local_scores(step.pair).unwrap();
            let winner = if b_lo >= b_hi { step.pair.lo() } else { step.pair.hi() };
            prop_assert_eq!(step.accepted_label, winner);
            prop_assert_ne!(step.accepted_label, current);
            prop_assert!(!seen.contains(&step.accepted_label));
            // maximal among this round's overturning candidates
            for p in case.pairs.pairs_with(current) {
                let (a, b) = case.signature.local_scores(p).unwrap();
                let w = if a >= b { p.lo() } else { p.hi() };
                if w != current {
                    prop_assert!(a.max(b) <= step.local_value);
                }
            }
            seen.push(step.accepted_label);
            current = step.accepted_label;
        }
        prop_assert_eq!(trace.final_label, current);
        let again = match_chain(&case.signature, &case.pairs, case.start).unwrap();
        prop_assert_eq!(again, trace);
    }

    #[test]
    fn trees_never_hit_cycle_guard(seed in any::<u64>()) {
        let case = random_tree_case(seed);
        let trace = match_chain(&case.signature, &case.pairs, case.start).unwrap();
        prop_assert_ne!(trace.terminated_by, Termination::CycleGuard);
    }

    #[test]
    fn empty_pair_set_is_global_argmax(seed in any::<u64>()) {
        let case = random_case(seed);
        let empty = LabelPairSet::empty(PairSource::Similarity, 1.0);
        let (label, trace) = match_signature(&case.signature, &empty).unwrap();
        prop_assert_eq!(label, lcc_core::models::argmax(case.signature.global()));
        prop_assert!(trace.steps.is_empty());
    }
}

#[test]
fn two_step_deer_chain() {
    const DEER: usize = 4;
    const DOG: usize = 5;
    const HORSE: usize = 7;
    let mut global = vec![0.05; 10];
    global[DOG] = 0.35;
    global[HORSE] = 0.25;
    let s: f64 = global.iter().sum();
    let global = global.iter().map(|v| v / s).collect();
    let pair = |a: usize, b: usize| LabelPair::new(a.min(b), a.max(b)).unwrap();
    let mut local = BTreeMap::new();
    // dog vs horse favors horse, horse vs deer favors deer, dog vs deer favors dog weakly
    local.insert(pair(DOG, HORSE), (0.2, 0.8));
    local.insert(pair(DEER, HORSE), (0.9, 0.1));
    local.insert(pair(DEER, DOG), (0.45, 0.55));
    let signature = Signature::new(global, local.clone(), MatchMode::Classification).unwrap();
    let set = LabelPairSet::new(PairSource::Similarity, 0.5, local.keys().copied());
    let (final_label, trace) = match_signature(&signature, &set).unwrap();
    assert_eq!(trace.start_label, DOG);
    assert_eq!(trace.steps.iter().map(|s| s.accepted_label).collect::<Vec<_>>(), vec![HORSE, DEER]);
    assert_eq!(final_label, DEER);
}

#[test]
fn identification_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let mut entries = Vec::new();
        for id in 0..5 {
            for _ in 0..3 {
                entries.push((id, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()));
            }
        }
        let probe: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gallery = Gallery::new(entries.clone(), 5).unwrap();
        let (label, matching) = global_match_identification(Array1::from(probe.clone()).view(), &gallery).unwrap();

        let cos = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        let (best_entry, _) = entries
            .iter()
            .map(|(id, v)| (*id, cos(v, &probe)))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (id, c)| if c > acc.1 { (id, c) } else { acc });
        assert_eq!(label, best_entry);
        for id in 0..5 {
            let best = entries.iter().filter(|(i, _)| *i == id).map(|(_, v)| cos(v, &probe)).fold(f64::NEG_INFINITY, f64::max);
            assert!((matching[id] - best).abs() < 1e-12);
        }
    }
}

#[test]
fn identification_end_to_end() {
    let train = common::three_blobs(0.5, 20, 31);
    let config = ModelConfig::Logistic(LogisticConfig::default());
    let set = LabelPairSet::new(PairSource::Confusion, 0.1, [LabelPair::new(1, 2).unwrap()]);
    let bank = build_local_bank(&train, &set, &config).unwrap();
    let gallery = Gallery::new(vec![(0, vec![1.0, 1.0]), (1, vec![5.0, 0.5]), (2, vec![0.5, 5.0])], 3).unwrap();
    let (label, trace) = match_probe(array![4.0, 0.3].view(), &gallery, &bank).unwrap();
    assert_eq!(trace.start_label, 1);
    assert_eq!(label, 1);
}

#[test]
fn signatures_near_class_one_favor_it_locally() {
    let train = common::three_blobs(0.5, 30, 12);
    let config = ModelConfig::Logistic(LogisticConfig::default());
    let global = train_model(&train, &config).unwrap();
    let set = LabelPairSet::new(
        PairSource::Similarity,
        0.5,
        [LabelPair::new(0, 1).unwrap(), LabelPair::new(1, 2).unwrap()],
    );
    let bank = build_local_bank(&train, &set, &config).unwrap();
    let x = array![4.8, 0.2];
    let s = build_signature(x.view(), &global, &bank).unwrap();
    let (_, b01) = s.local_scores(LabelPair::new(0, 1).unwrap()).unwrap();
    let (b12, _) = s.local_scores(LabelPair::new(1, 2).unwrap()).unwrap();
    assert!(b01 > 0.5 && b12 > 0.5);
    // oracle: direct scoring by the bank's models
    use lcc_core::models::ScoringModel;
    for (pair, model) in bank.models() {
        let direct = model.score(x.view()).unwrap();
        assert_eq!(s.local_scores(*pair).unwrap(), (direct[0], direct[1]));
    }
}
