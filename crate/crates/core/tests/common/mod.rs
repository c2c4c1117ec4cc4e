#![allow(dead_code)]

use std::sync::Arc;

use dsintel::decision::{DecisionMaker, UtilityIntervalChoice};
use dsintel::ds::{FocalSet, Frame, MassFunction};
use dsintel::metacluster::{EvidenceCorpus, Partition, Report};
use dsintel::track::TrackGraph;
use rand::seq::SliceRandom;
use rand::Rng;

/// A mass function on `frame` with up to `max_focal` random focal sets and
/// positive mass on Θ, so any two of them combine.
pub fn random_mass(rng: &mut impl Rng, frame: &Arc<Frame>, max_focal: usize) -> MassFunction {
    let full = frame.full().bits();
    let k = rng.random_range(1..=max_focal);
    let mut entries: Vec<(FocalSet, f64)> = (0..k)
        .map(|_| {
            let bits = rng.random_range(1..=full);
            (FocalSet::from_bits(bits), rng.random_range(0.05..1.0))
        })
        .collect();
    entries.push((frame.full(), rng.random_range(0.05..1.0)));
    let total: f64 = entries.iter().map(|e| e.1).sum();
    for e in &mut entries {
        e.1 /= total;
    }
    MassFunction::new(frame.clone(), &entries).unwrap()
}

pub fn random_frame(rng: &mut impl Rng, max: usize) -> Arc<Frame> {
    let n = rng.random_range(2..=max);
    Frame::new((0..n).map(|i| format!("e{i}"))).unwrap()
}

/// A corpus whose reports agree within each group and conflict across
/// groups: group `g` speaks about `{2g}` or `{2g, 2g+1}` only.
pub fn separable_corpus(
    rng: &mut impl Rng,
    reports: usize,
    groups: usize,
) -> (EvidenceCorpus, Partition) {
    let frame = Frame::new((0..2 * groups).map(|i| format!("h{i}"))).unwrap();
    let mut labels: Vec<usize> = (0..reports)
        .map(|i| {
            if i < groups {
                i
            } else {
                rng.random_range(0..groups)
            }
        })
        .collect();
    labels.shuffle(rng);
    let reports = labels
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let set = if rng.random_bool(0.5) {
                FocalSet::singleton(2 * g)
            } else {
                FocalSet::from_indices([2 * g, 2 * g + 1])
            };
            let m = (rng.random_range(0.3..0.95) * 1e6_f64).round() / 1e6;
            Report::new(
                format!("r{i:02}"),
                MassFunction::simple_support(frame.clone(), set, m).unwrap(),
            )
        })
        .collect();
    (
        EvidenceCorpus::new(frame, reports).unwrap(),
        Partition::from_labels(&labels),
    )
}

pub fn random_graph(rng: &mut impl Rng, n: usize) -> TrackGraph {
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.95)).collect();
    let q: Vec<Vec<f64>> = (0..n.saturating_sub(1))
        .map(|i| (i + 1..n).map(|_| rng.random_range(0.0..0.95)).collect())
        .collect();
    TrackGraph::from_masses(&p, &q).unwrap()
}

/// Interval endpoints on a coarse grid so that ties and shared crossings
/// actually occur.
pub fn random_choice(rng: &mut impl Rng, id: String) -> UtilityIntervalChoice {
    let a = rng.random_range(0..=10) as f64 / 10.0;
    let b = rng.random_range(0..=10) as f64 / 10.0;
    UtilityIntervalChoice::new(id, a.min(b), a.max(b)).unwrap()
}

pub fn random_game(rng: &mut impl Rng, shape: &[usize]) -> Vec<DecisionMaker> {
    shape
        .iter()
        .enumerate()
        .map(|(d, &k)| DecisionMaker {
            id: format!("dm{d}"),
            choices: (0..k)
                .map(|a| random_choice(rng, format!("c{d}{a}")))
                .collect(),
        })
        .collect()
}
