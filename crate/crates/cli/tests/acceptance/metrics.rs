//! Matching and partition agreement against brute-force oracles.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taforge_core::llm::MockEmbedder;
use taforge_core::metrics::{clustering_macro_f1, match_sets, optimal_matching, similarity_matrix, weighted_prf, PrfMode};
use taforge_core::{Agreement, ExactAgreement};

use crate::{ensure, Outcome};

const LABELS: &[&str] = &[
    "insurance paperwork", "hidden costs", "appointment delays", "pharmacy shortages", "telehealth",
    "medical trust", "peer support", "billing errors", "long waits", "coverage denial", "remote visits",
    "mistrust", "support groups", "wait times", "prior authorization",
];

/// Best total over every partial injection using only entries >= tau.
fn exhaustive<S: Clone + PartialOrd + std::ops::Add<Output = S>>(sim: &[Vec<S>], cols: usize, tau: &S, zero: S) -> S {
    fn go<S: Clone + PartialOrd + std::ops::Add<Output = S>>(sim: &[Vec<S>], row: usize, used: &mut Vec<bool>, tau: &S, acc: S, best: &mut S) {
        if row == sim.len() {
            if acc > *best {
                *best = acc;
            }
            return;
        }
        go(sim, row + 1, used, tau, acc.clone(), best);
        for j in 0..used.len() {
            if !used[j] && sim[row][j] >= *tau {
                used[j] = true;
                go(sim, row + 1, used, tau, acc.clone() + sim[row][j].clone(), best);
                used[j] = false;
            }
        }
    }
    let mut best = zero.clone();
    go(sim, 0, &mut vec![false; cols], tau, zero, &mut best);
    best
}

fn labels(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.random_range(0..=6);
    (0..n).map(|_| LABELS.choose(rng).unwrap().to_string()).collect()
}

fn sets(rng: &mut ChaCha8Rng, instances: usize) -> Result<(), String> {
    for i in 0..instances {
        let embedder = MockEmbedder::new(rng.random());
        let (p, r) = (labels(rng), labels(rng));
        let tau = rng.random_range(0.05..=1.0);
        let sim = similarity_matrix(&p, &r, &embedder).map_err(|e| e.to_string())?;
        let m = match_sets(&p, &r, tau, &embedder).map_err(|e| e.to_string())?;
        let want = exhaustive(&sim, r.len(), &tau, 0.0);
        let got = m.total_similarity();
        ensure((got - want).abs() <= 1e-9, || format!("embedded instance {i}: {got} vs exhaustive {want}"))?;
        let mut seen = std::collections::BTreeSet::new();
        for pair in &m.pairs {
            ensure(pair.similarity >= tau && seen.insert(pair.reference), || format!("embedded instance {i}: bad pair"))?;
        }
    }
    Ok(())
}

fn matrices(rng: &mut ChaCha8Rng, instances: usize) -> Result<(), String> {
    for i in 0..instances {
        let (n, m) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let sim: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
        let tau = rng.random_range(0.01..=1.0);
        let res = optimal_matching(&sim, m, tau).map_err(|e| e.to_string())?;
        let want = exhaustive(&sim, m, &tau, 0.0);
        let got = res.total_similarity();
        ensure((got - want).abs() <= 1e-9, || format!("matrix instance {i}: {got} vs exhaustive {want}"))?;
    }
    Ok(())
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact_matrices(rng: &mut ChaCha8Rng, instances: usize) -> Result<(), String> {
    for i in 0..instances {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let sim: Vec<Vec<BigRational>> = (0..n)
            .map(|_| (0..m).map(|_| ratio(rng.random_range(0..=12), 12)).collect())
            .collect();
        let tau = ratio(rng.random_range(1..=12), 12);
        let res = optimal_matching(&sim, m, tau.clone()).map_err(|e| e.to_string())?;
        let want = exhaustive(&sim, m, &tau, BigRational::zero());
        ensure(res.total_similarity() == want, || format!("exact instance {i}: {} vs {want}", res.total_similarity()))?;
    }
    Ok(())
}

/// Same-cluster and different-cluster F1 over all item pairs, averaged.
fn pair_oracle(pred: &[usize], reference: &[usize]) -> BigRational {
    let n = pred.len();
    let (mut both_same, mut pred_same, mut ref_same) = (0i64, 0i64, 0i64);
    let (mut both_diff, mut pred_diff, mut ref_diff) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let (p, r) = (pred[i] == pred[j], reference[i] == reference[j]);
            pred_same += p as i64;
            ref_same += r as i64;
            both_same += (p && r) as i64;
            pred_diff += !p as i64;
            ref_diff += !r as i64;
            both_diff += (!p && !r) as i64;
        }
    }
    let f1 = |tp: i64, p: i64, r: i64| if p + r == 0 { BigRational::one() } else { ratio(2 * tp, p + r) };
    (f1(both_same, pred_same, ref_same) + f1(both_diff, pred_diff, ref_diff)) / ratio(2, 1)
}

fn groups(assign: &[usize]) -> Vec<Vec<String>> {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (item, &g) in assign.iter().enumerate() {
        out[g].push(format!("i{item}"));
    }
    out.retain(|g| !g.is_empty());
    out
}

fn partitions(rng: &mut ChaCha8Rng, instances: usize) -> Result<(), String> {
    for i in 0..instances {
        let n = rng.random_range(0..=8);
        let k = rng.random_range(1..=n.max(1));
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let reference: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let got: ExactAgreement = clustering_macro_f1(&groups(&pred), &groups(&reference)).map_err(|e| e.to_string())?;
        let want = pair_oracle(&pred, &reference);
        ensure(got.macro_f1 == want, || format!("partition {i} {pred:?} vs {reference:?}: {} != {want}", got.macro_f1))?;
    }
    Ok(())
}

fn identities(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let embedder = MockEmbedder::new(3);
    for _ in 0..20 {
        let mut xs = labels(rng);
        xs.sort();
        xs.dedup();
        if xs.is_empty() {
            continue;
        }
        let m = match_sets(&xs, &xs, taforge_core::metrics::DEFAULT_TAU, &embedder).map_err(|e| e.to_string())?;
        for mode in [PrfMode::Hard, PrfMode::SimilarityWeighted] {
            let s = weighted_prf(&m, mode);
            ensure(s.f1 == 1.0 && s.precision == 1.0 && s.recall == 1.0, || format!("identity set {xs:?} {mode:?} scored {s:?}"))?;
        }
        let ps = groups(&(0..xs.len()).map(|i| i % 3).collect::<Vec<_>>());
        let a: Agreement = clustering_macro_f1(&ps, &ps).map_err(|e| e.to_string())?;
        ensure(a.macro_f1 == 1.0, || format!("identity partition scored {}", a.macro_f1))?;
    }
    Ok(())
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    sets(&mut rng, 100)?;
    matrices(&mut rng, 100)?;
    exact_matrices(&mut rng, 50)?;
    partitions(&mut rng, 200)?;
    identities(&mut rng)?;
    Ok("200 matching instances within 1e-9 of exhaustive search (plus 50 exact rational), \
        200 partitions equal to the pair oracle exactly, identity inputs score 1.0"
        .into())
}
