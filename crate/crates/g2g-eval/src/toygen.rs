//! Deterministic toy-corpus generation for experiments and tests: small
//! chain molecules plus ring-bearing variants of the same chains, so that
//! "add a ring while staying similar" pairs exist by construction.

use std::collections::BTreeSet;

use g2g_chem::junctree::{assemble, decompose, ground_truth_choices};
use g2g_chem::molgraph::{isomorphic, parse_smiles, write_smiles};
use rand::prelude::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RINGS: [&str; 4] = ["c1ccccc1", "C1CCCCC1", "C1CCCC1", "c1ccncc1"];
const CHAIN_UNITS: [&str; 8] = ["C", "C", "C", "C", "O", "N", "C(C)", "C(Cl)"];

fn random_chain(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    let len = rng.gen_range(min_len..=max_len);
    let mut out = String::from("C");
    let mut prev_hetero = false;
    for _ in 1..len {
        let unit = CHAIN_UNITS[rng.gen_range(0..CHAIN_UNITS.len())];
        // No adjacent heteroatoms; keeps every attachment valence-legal.
        let hetero = unit.starts_with('O') || unit.starts_with('N');
        if hetero && prev_hetero {
            out.push('C');
            prev_hetero = false;
        } else {
            out.push_str(unit);
            prev_hetero = hetero;
        }
    }
    out
}

/// Chain-family corpus for the ring-addition task: each family contributes a
/// base chain and the same chain with a ring appended. All SMILES are
/// canonical and the corpus is deduplicated (order preserved).
pub fn toy_translation_corpus(seed: u64, families: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let push = |s: String, seen: &mut BTreeSet<String>, out: &mut Vec<String>| {
        if let Ok(m) = parse_smiles(&s) {
            let canon = write_smiles(&m);
            if seen.insert(canon.clone()) {
                out.push(canon);
            }
        }
    };
    for _ in 0..families {
        let chain = random_chain(&mut rng, 5, 8);
        let ring = RINGS[rng.gen_range(0..RINGS.len())];
        push(chain.clone(), &mut seen, &mut out);
        push(format!("{}{}", chain, ring), &mut seen, &mut out);
        // Some families also get a second, differently-ringed variant.
        if rng.gen_bool(0.5) {
            let ring2 = RINGS[rng.gen_range(0..RINGS.len())];
            push(format!("{}{}", chain, ring2), &mut seen, &mut out);
        }
    }
    out
}

/// Mixed-shape corpus for structural round-trip suites: chains, branches,
/// rings at either end, and double-bond segments. Every emitted molecule is
/// verified to survive decompose -> assemble.
pub fn round_trip_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n && attempts < n * 50 {
        attempts += 1;
        let shape = rng.gen_range(0..6);
        let chain = random_chain(&mut rng, 3, 7);
        let ring = RINGS[rng.gen_range(0..RINGS.len())];
        let ring2 = RINGS[rng.gen_range(0..RINGS.len())];
        let candidate = match shape {
            0 => chain,
            1 => format!("{}{}", chain, ring),
            2 => format!("{}{}", ring, chain),
            3 => format!("{}{}{}", ring, chain, ring2),
            4 => format!("C=C{}", chain),
            _ => format!("{}C=C", chain),
        };
        let Ok(m) = parse_smiles(&candidate) else {
            continue;
        };
        let canon = write_smiles(&m);
        if seen.contains(&canon) {
            continue;
        }
        // Keep only molecules that reassemble from their junction tree.
        let tree = decompose(&m);
        let Ok(choices) = ground_truth_choices(&tree, &m) else {
            continue;
        };
        let Ok(back) = assemble(&tree, &choices) else {
            continue;
        };
        if !isomorphic(&m, &back) {
            continue;
        }
        seen.insert(canon.clone());
        out.push(canon);
    }
    assert_eq!(out.len(), n, "generator exhausted after {} attempts", attempts);
    out
}

/// Deterministically splits a corpus into (train, test) by shuffling with the
/// seed and reserving `test_n` molecules for the test side.
pub fn split_corpus(corpus: &[String], seed: u64, test_n: usize) -> (Vec<String>, Vec<String>) {
    split_corpus_by(corpus, seed, test_n, |_| true)
}

/// Split with test molecules drawn only from a source domain (for example
/// ring-free molecules when the task is to add a ring). Non-eligible
/// molecules always stay in the training side.
pub fn split_corpus_by(
    corpus: &[String],
    seed: u64,
    test_n: usize,
    eligible: impl Fn(&str) -> bool,
) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    idx.shuffle(&mut rng);
    let mut test = Vec::with_capacity(test_n);
    let mut train = Vec::new();
    for &i in &idx {
        if test.len() < test_n && eligible(&corpus[i]) {
            test.push(corpus[i].clone());
        } else {
            train.push(corpus[i].clone());
        }
    }
    (train, test)
}
