use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::dfg::{compute_footprint, mine_dfg, DirectlyFollowsGraph, FootprintMatrix, Relation};
use super::MinerError;
use crate::eventlog::EventLog;

/// A place connecting every activity in `inputs` to every activity in `outputs`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Place {
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaNet {
    pub transitions: BTreeSet<String>,
    /// Places between transitions, sorted; source and sink are kept apart.
    pub places: Vec<Place>,
    pub source_outputs: BTreeSet<String>,
    pub sink_inputs: BTreeSet<String>,
    /// Pairs with `a > b` and `b > a`, which the classic algorithm cannot tell from concurrency.
    pub short_loops: Vec<(String, String)>,
}

impl AlphaNet {
    /// Places including source and sink.
    pub fn place_count(&self) -> usize {
        self.places.len() + 2
    }
}

// Activity sets as bitmasks; logs with more than 128 activities fall back to singleton places.
type Set = u128;

fn members(s: Set) -> impl Iterator<Item = usize> {
    (0..128).filter(move |i| s & (1 << i) != 0)
}

pub fn alpha_from_dfg(g: &DirectlyFollowsGraph) -> AlphaNet {
    let fp = compute_footprint(g);
    let n = fp.activities.len();
    let rel = |a: usize, b: usize| fp.relations[a][b];
    let pairs = if n <= 128 {
        maximal_pairs(&fp)
    } else {
        singleton_pairs(&fp)
    };
    let name_set = |s: &[usize]| s.iter().map(|&i| fp.activities[i].clone()).collect::<BTreeSet<_>>();
    let mut places: Vec<Place> = pairs
        .into_iter()
        .map(|(a, b)| Place {
            inputs: name_set(&a),
            outputs: name_set(&b),
        })
        .collect();
    places.sort();
    let mut short_loops = Vec::new();
    for a in 0..n {
        for b in a..n {
            if rel(a, b) == Relation::Parallel {
                short_loops.push((fp.activities[a].clone(), fp.activities[b].clone()));
            }
        }
    }
    AlphaNet {
        transitions: g.activities.clone(),
        places,
        source_outputs: g.start.keys().cloned().collect(),
        sink_inputs: g.end.keys().cloned().collect(),
        short_loops,
    }
}

fn singleton_pairs(fp: &FootprintMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = fp.activities.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if fp.relations[a][b] == Relation::Causal {
                out.push((vec![a], vec![b]));
            }
        }
    }
    out
}

/// All (A, B) with A -> B pairwise and A, B internally unrelated, then the maximal ones.
fn maximal_pairs(fp: &FootprintMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = fp.activities.len();
    let mut causal: Vec<Set> = vec![0; n]; // causal[a] = {b : a -> b}
    let mut choice: Vec<Set> = vec![0; n]; // choice[a] = {b : a # b}
    for a in 0..n {
        for b in 0..n {
            match fp.relations[a][b] {
                Relation::Causal => causal[a] |= 1 << b,
                Relation::Choice => choice[a] |= 1 << b,
                _ => {}
            }
        }
    }
    // feasible extensions: x joins A if x # A, x # x and x -> every b in B
    let all_causal_to = |s: Set| -> Set {
        let mut ok: Set = if n == 128 { Set::MAX } else { (1 << n) - 1 };
        for b in members(s) {
            let mut preds: Set = 0;
            for a in 0..n {
                if causal[a] & (1 << b) != 0 {
                    preds |= 1 << a;
                }
            }
            ok &= preds;
        }
        ok
    };
    let all_choice_with = |s: Set| -> Set {
        let mut ok: Set = if n == 128 { Set::MAX } else { (1 << n) - 1 };
        for a in members(s) {
            ok &= choice[a];
        }
        ok
    };
    let selfless: Set = (0..n).filter(|&x| choice[x] & (1 << x) != 0).fold(0, |m, x| m | 1 << x);
    let mut seen: HashSet<(Set, Set)> = HashSet::new();
    let mut stack: Vec<(Set, Set)> = Vec::new();
    for a in 0..n {
        for b in members(causal[a]) {
            if choice[a] & (1 << a) != 0 && choice[b] & (1 << b) != 0 && seen.insert((1 << a, 1 << b)) {
                stack.push((1 << a, 1 << b));
            }
        }
    }
    let mut maximal = Vec::new();
    while let Some((a, b)) = stack.pop() {
        let grow_a = all_causal_to(b) & all_choice_with(a) & selfless & !a;
        let grow_b = {
            let mut ok = all_choice_with(b) & selfless & !b;
            for x in members(a) {
                ok &= causal[x];
            }
            ok
        };
        if grow_a == 0 && grow_b == 0 {
            maximal.push((a, b));
            continue;
        }
        for x in members(grow_a) {
            if seen.insert((a | 1 << x, b)) {
                stack.push((a | 1 << x, b));
            }
        }
        for y in members(grow_b) {
            if seen.insert((a, b | 1 << y)) {
                stack.push((a, b | 1 << y));
            }
        }
    }
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = maximal
        .into_iter()
        .map(|(a, b)| (members(a).collect(), members(b).collect()))
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn alpha_mine(el: &EventLog) -> Result<AlphaNet, MinerError> {
    Ok(alpha_from_dfg(&mine_dfg(el)?))
}
