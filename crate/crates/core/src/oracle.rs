//! Brute-force reference implementations.
//!
//! Each function here recomputes a result of the main modules by direct
//! enumeration, sharing only the evidence primitives in [`crate::ds`]. They
//! back the acceptance suite and the `oracle-check` command and are only
//! practical on small inputs.

use std::collections::HashMap;

use crate::decision::{DecisionMaker, UtilityIntervalChoice, VALUE_EPSILON};
use crate::ds::combine_all;
use crate::error::{Error, Result};
use crate::metacluster::{DomainPrior, EvidenceCorpus, Partition};
use crate::posterior::CountingBpa;
use crate::track::{TrackGraph, TrackPath};

/// Largest corpus [`exhaustive_partition`] accepts.
pub const PARTITION_ORACLE_MAX_REPORTS: usize = 16;

/// Global metaconflict minimum over every set partition with at most
/// `r_max` blocks (more blocks score 1). Among minimizers the smallest
/// restricted-growth label vector is returned, with the number of
/// partitions visited.
pub fn exhaustive_partition(
    corpus: &EvidenceCorpus,
    prior: &DomainPrior,
) -> Result<(f64, Partition, usize)> {
    let n = corpus.len();
    if n > PARTITION_ORACLE_MAX_REPORTS {
        return Err(Error::InvalidCorpus(format!(
            "exhaustive partition oracle is limited to {PARTITION_ORACLE_MAX_REPORTS} reports"
        )));
    }
    let mut conflict: Vec<Option<f64>> = vec![None; 1 << n];
    let mut block_conflict = |mask: usize| -> f64 {
        if let Some(c) = conflict[mask] {
            return c;
        }
        let ms: Vec<_> = (0..n)
            .filter(|j| mask & (1 << j) != 0)
            .map(|j| corpus.reports()[j].evidence.clone())
            .collect();
        let c = if ms.len() < 2 {
            0.0
        } else {
            combine_all(&ms).map(|(_, c)| c).unwrap_or(1.0)
        };
        conflict[mask] = Some(c);
        c
    };

    let limit = prior.r_max().min(n);
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0;
    // Restricted growth strings in lexicographic order.
    loop {
        let blocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut masks = vec![0usize; blocks];
        for (j, &l) in labels.iter().enumerate() {
            masks[l] |= 1 << j;
        }
        let survive = masks.iter().fold(prior.prob(blocks), |acc, &m| {
            acc * (1.0 - block_conflict(m))
        });
        let mcf = (1.0 - survive).clamp(0.0, 1.0);
        visited += 1;
        if best.as_ref().is_none_or(|(b, _)| mcf < *b) {
            best = Some((mcf, labels.clone()));
        }

        // Next string: bump the rightmost position that can grow.
        let mut k = n;
        loop {
            if k == 1 {
                let (mcf, labels) = best.expect("at least one partition");
                return Ok((mcf, Partition::from_labels(&labels), visited));
            }
            k -= 1;
            let prefix_max = labels[..k].iter().copied().max().unwrap_or(0);
            if labels[k] <= prefix_max && labels[k] + 1 < limit {
                labels[k] += 1;
                for l in &mut labels[k + 1..] {
                    *l = 0;
                }
                break;
            }
        }
    }
}

/// Counting evidence by summing over all `2^n` existence patterns.
pub fn counting_bpa_enumeration(supports: &[f64]) -> CountingBpa {
    let n = supports.len();
    let mut by_count = vec![0.0; n + 1];
    for pattern in 0u64..(1 << n) {
        let mass: f64 = supports
            .iter()
            .enumerate()
            .map(|(i, &s)| if pattern & (1 << i) != 0 { s } else { 1.0 - s })
            .product();
        by_count[pattern.count_ones() as usize] += mass;
    }
    CountingBpa {
        vacuous: by_count[0],
        at_least: by_count[1..].to_vec(),
    }
}

/// Winning share per choice on a midpoint grid of `points` values of ρ.
/// Identical intervals share a point equally.
pub fn rho_grid_preferences(choices: &[UtilityIntervalChoice], points: usize) -> Vec<f64> {
    let mut prefs = vec![0.0; choices.len()];
    let w = 1.0 / points as f64;
    for k in 0..points {
        let rho = (k as f64 + 0.5) * w;
        let vals: Vec<f64> = choices
            .iter()
            .map(|c| c.e_low + rho * (c.e_high - c.e_low))
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top: Vec<usize> = (0..choices.len()).filter(|&c| vals[c] == max).collect();
        for &c in &top {
            prefs[c] += w / top.len() as f64;
        }
    }
    prefs
}

/// Backward induction by tabulating every complete play and resolving
/// decision makers from the last to the first.
pub fn sequential_play_exhaustive(makers: &[DecisionMaker], rho: f64) -> Vec<usize> {
    let d_count = makers.len();
    let value = |d: usize, a: usize| makers[d].choices[a].value_at(rho);

    let profiles = |len: usize| -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for maker in &makers[..len] {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..maker.choices.len()).map(move |a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        out
    };

    // outcome[prefix] = equilibrium completion of the game after `prefix`.
    let mut outcome: HashMap<Vec<usize>, Vec<usize>> = profiles(d_count)
        .into_iter()
        .map(|p| (p.clone(), p))
        .collect();
    for d in (0..d_count).rev() {
        let mut next = HashMap::new();
        for prefix in profiles(d) {
            let mut chosen: Option<(bool, f64, Vec<usize>)> = None;
            for a in 0..makers[d].choices.len() {
                let mut key = prefix.clone();
                key.push(a);
                let play = outcome[&key].clone();
                let max = play
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| value(k, c))
                    .fold(f64::NEG_INFINITY, f64::max);
                let own = value(d, a);
                let wins = own >= max - VALUE_EPSILON;
                let take = match &chosen {
                    None => true,
                    Some((w, v, _)) => (wins && !*w) || (wins == *w && own > v + VALUE_EPSILON),
                };
                if take {
                    chosen = Some((wins, own, play));
                }
            }
            next.insert(prefix, chosen.expect("nonempty choice set").2);
        }
        outcome = next;
    }
    outcome.remove(&Vec::new()).unwrap_or_default()
}

/// Most plausible path by scoring every nonempty vertex subset with the
/// full plausibility product; ties to the lexicographically smaller path.
pub fn exhaustive_best_path(g: &TrackGraph) -> (TrackPath, f64) {
    let n = g.len();
    let mut best: Option<(TrackPath, f64)> = None;
    for mask in 1u64..(1 << n) {
        let path = TrackPath::from_mask(mask);
        let v = path.vertices();
        let mut value = 1.0;
        for i in 0..n {
            if mask & (1 << i) == 0 {
                value *= 1.0 - g.p(i);
            }
        }
        for w in v.windows(2) {
            value *= 1.0 - g.q(w[0], w[1]);
        }
        let better = match &best {
            None => true,
            Some((bp, bv)) => value > *bv || (value == *bv && path < *bp),
        };
        if better {
            best = Some((path, value));
        }
    }
    best.expect("graph has vertices")
}
