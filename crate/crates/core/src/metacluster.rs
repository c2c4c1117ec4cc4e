//! Partitioning a report corpus into per-target subsets.
//!
//! Each subset's internal Dempster conflict `c_i`, together with the domain
//! conflict `c0` between the hypothesized subset count and the prior, is
//! treated as independent evidence against the partition being adequate. The
//! metaconflict `1 − (1 − c0)·Π(1 − c_i)` is minimized by a best-improvement
//! local search over single-report moves with seeded random restarts.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ds::{combine_all, Frame, MassFunction};
use crate::error::{Error, Result};
use crate::exec;

/// Minimum mcf decrease for a move to be applied.
pub const MOVE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Report {
    pub id: String,
    pub evidence: MassFunction,
    /// Seconds.
    pub time: Option<f64>,
    /// Kilometers.
    pub pos: Option<[f64; 2]>,
}

impl Report {
    pub fn new(id: impl Into<String>, evidence: MassFunction) -> Self {
        Report {
            id: id.into(),
            evidence,
            time: None,
            pos: None,
        }
    }

    pub fn with_kinematics(mut self, time: f64, pos: [f64; 2]) -> Self {
        self.time = Some(time);
        self.pos = Some(pos);
        self
    }
}

/// The set of all reports, sharing one frame.
#[derive(Debug, Clone)]
pub struct EvidenceCorpus {
    frame: Arc<Frame>,
    reports: Vec<Report>,
}

impl EvidenceCorpus {
    pub fn new(frame: Arc<Frame>, reports: Vec<Report>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::InvalidCorpus("corpus has no reports".into()));
        }
        for (i, r) in reports.iter().enumerate() {
            if reports[..i].iter().any(|o| o.id == r.id) {
                return Err(Error::InvalidCorpus(format!(
                    "duplicate report id '{}'",
                    r.id
                )));
            }
            if **r.evidence.frame() != *frame {
                return Err(Error::InvalidCorpus(format!(
                    "report '{}' uses a different frame",
                    r.id
                )));
            }
        }
        Ok(EvidenceCorpus { frame, reports })
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.reports.iter().position(|r| r.id == id)
    }

    /// Resolves report ids to indices.
    pub fn indices_of<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.index_of(id.as_ref()).ok_or_else(|| {
                    Error::InvalidPartition(format!("unknown report id '{}'", id.as_ref()))
                })
            })
            .collect()
    }
}

/// Prior probability over the number of subsets `r ∈ {1..r_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPrior {
    probs: Vec<f64>,
}

impl DomainPrior {
    /// `probs[r - 1]` is the probability of `r` subsets.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPrior("r_max must be at least 1".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPrior(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > crate::ds::MASS_TOLERANCE {
            return Err(Error::InvalidPrior(format!("probabilities sum to {total}")));
        }
        Ok(DomainPrior { probs })
    }

    pub fn uniform(r_max: usize) -> Result<Self> {
        if r_max == 0 {
            return Err(Error::InvalidPrior("r_max must be at least 1".into()));
        }
        Ok(DomainPrior {
            probs: vec![1.0 / r_max as f64; r_max],
        })
    }

    /// Prior certain on `r` subsets.
    pub fn certain(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidPrior(
                "subset count must be at least 1".into(),
            ));
        }
        let mut probs = vec![0.0; r];
        probs[r - 1] = 1.0;
        Ok(DomainPrior { probs })
    }

    pub fn r_max(&self) -> usize {
        self.probs.len()
    }

    /// Probability of `r` subsets, 0 outside `1..=r_max`.
    pub fn prob(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.probs.get(r - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }
}

/// Disjoint nonempty blocks of report indices covering a corpus.
///
/// Blocks are kept canonical: each block ascending, blocks ordered by their
/// smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    n_reports: usize,
}

impl Partition {
    pub fn from_blocks(n_reports: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n_reports];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &j in b {
                if j >= n_reports {
                    return Err(Error::InvalidPartition(format!(
                        "report index {j} out of range"
                    )));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidPartition(format!(
                        "report index {j} in two blocks"
                    )));
                }
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "report index {j} not covered"
            )));
        }
        Ok(Self::canonical(n_reports, blocks))
    }

    /// Builds a partition from per-report block labels (any integers).
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: Vec<(usize, Vec<usize>)> = Vec::new();
        for (j, &l) in labels.iter().enumerate() {
            match map.iter_mut().find(|(k, _)| *k == l) {
                Some((_, b)) => b.push(j),
                None => map.push((l, vec![j])),
            }
        }
        Self::canonical(labels.len(), map.into_iter().map(|(_, b)| b).collect())
    }

    pub fn single_block(n_reports: usize) -> Self {
        Self::canonical(n_reports, vec![(0..n_reports).collect()])
    }

    pub fn singletons(n_reports: usize) -> Self {
        Self::canonical(n_reports, (0..n_reports).map(|j| vec![j]).collect())
    }

    fn canonical(n_reports: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        blocks.retain(|b| !b.is_empty());
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Partition { blocks, n_reports }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_reports(&self) -> usize {
        self.n_reports
    }

    pub fn block_of(&self, report: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&report))
    }

    /// Restricted-growth labels: block index per report, first appearance
    /// order. This is the canonical encoding used for tie-breaking.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n_reports];
        for (i, b) in self.blocks.iter().enumerate() {
            for &j in b {
                labels[j] = i;
            }
        }
        labels
    }

    /// Blocks as report ids.
    pub fn block_ids<'a>(&self, corpus: &'a EvidenceCorpus) -> Vec<Vec<&'a str>> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&j| corpus.reports[j].id.as_str()).collect())
            .collect()
    }

    /// Moves `report` into block `dest` (`None` = a fresh block).
    pub fn with_move(&self, report: usize, dest: Option<usize>) -> Partition {
        let mut blocks = self.blocks.clone();
        for b in &mut blocks {
            b.retain(|&j| j != report);
        }
        match dest {
            Some(k) => blocks[k].push(report),
            None => blocks.push(vec![report]),
        }
        Self::canonical(self.n_reports, blocks)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaConflictReport {
    pub c0: f64,
    pub cluster_conflicts: Vec<f64>,
    pub mcf: f64,
}

/// Conflict of combining every report in `block`; 0 for empty or singleton
/// blocks and 1 on total contradiction.
pub fn cluster_conflict(corpus: &EvidenceCorpus, block: &[usize]) -> f64 {
    if block.len() < 2 {
        return 0.0;
    }
    let ms: Vec<MassFunction> = block
        .iter()
        .map(|&j| corpus.reports[j].evidence.clone())
        .collect();
    match combine_all(&ms) {
        Ok((_, c)) => c,
        Err(_) => 1.0,
    }
}

/// `c0 = 1 − prior(n)`.
pub fn domain_conflict(n: usize, prior: &DomainPrior) -> f64 {
    1.0 - prior.prob(n)
}

/// `1 − (1 − c0)·Π(1 − c_i)`.
pub fn combine_metaconflict<I: IntoIterator<Item = f64>>(c0: f64, cluster: I) -> f64 {
    let survive = cluster.into_iter().fold(1.0 - c0, |acc, c| acc * (1.0 - c));
    (1.0 - survive).clamp(0.0, 1.0)
}

pub fn metaconflict(
    corpus: &EvidenceCorpus,
    partition: &Partition,
    prior: &DomainPrior,
) -> MetaConflictReport {
    let cluster_conflicts: Vec<f64> = partition
        .blocks
        .iter()
        .map(|b| cluster_conflict(corpus, b))
        .collect();
    let c0 = domain_conflict(partition.block_count(), prior);
    let mcf = combine_metaconflict(c0, cluster_conflicts.iter().copied());
    MetaConflictReport {
        c0,
        cluster_conflicts,
        mcf,
    }
}

/// Memoized block conflicts for one search run.
pub struct ConflictCache<'a> {
    corpus: &'a EvidenceCorpus,
    map: HashMap<Vec<usize>, f64>,
}

impl<'a> ConflictCache<'a> {
    pub fn new(corpus: &'a EvidenceCorpus) -> Self {
        ConflictCache {
            corpus,
            map: HashMap::new(),
        }
    }

    /// `block` must be sorted ascending.
    pub fn get(&mut self, block: &[usize]) -> f64 {
        if block.len() < 2 {
            return 0.0;
        }
        if let Some(&c) = self.map.get(block) {
            return c;
        }
        let c = cluster_conflict(self.corpus, block);
        self.map.insert(block.to_vec(), c);
        c
    }

    fn with_inserted(&mut self, block: &[usize], j: usize) -> f64 {
        let mut b = block.to_vec();
        let pos = b.partition_point(|&x| x < j);
        b.insert(pos, j);
        self.get(&b)
    }

    fn with_removed(&mut self, block: &[usize], j: usize) -> f64 {
        let b: Vec<usize> = block.iter().copied().filter(|&x| x != j).collect();
        self.get(&b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 20,
            seed: 0,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub partition: Partition,
    pub report: MetaConflictReport,
    pub initial_mcf: f64,
    pub moves: usize,
}

/// Best-improvement descent from `initial`.
///
/// Each sweep evaluates every report (corpus order) against every other
/// block (index order) and a fresh block, and applies the single move with
/// the largest decrease. The first move found wins ties. Stops when no move
/// improves by more than [`MOVE_EPSILON`] or after `max_sweeps` moves.
pub fn local_search(
    corpus: &EvidenceCorpus,
    prior: &DomainPrior,
    initial: Partition,
    max_sweeps: usize,
) -> SearchOutcome {
    let mut cache = ConflictCache::new(corpus);
    let mut part = initial;
    let initial_mcf = metaconflict(corpus, &part, prior).mcf;
    let mut moves = 0;

    while moves < max_sweeps {
        let conflicts: Vec<f64> = part.blocks.iter().map(|b| cache.get(b)).collect();
        let n = part.block_count();
        let current = combine_metaconflict(domain_conflict(n, prior), conflicts.iter().copied());

        let mut best: Option<(f64, usize, Option<usize>)> = None;
        for j in 0..part.n_reports {
            let src = part.block_of(j).expect("partition covers the corpus");
            let src_block = &part.blocks[src];
            let emptied = src_block.len() == 1;
            let src_after = if emptied {
                0.0
            } else {
                cache.with_removed(src_block, j)
            };

            let dests = (0..n)
                .filter(|&k| k != src)
                .map(Some)
                .chain((!emptied).then_some(None));
            for dest in dests {
                let (dest_after, n_after) = match dest {
                    Some(k) => (
                        cache.with_inserted(&part.blocks[k], j),
                        if emptied { n - 1 } else { n },
                    ),
                    None => (0.0, n + 1),
                };
                let others = conflicts
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != src && Some(i) != dest)
                    .map(|(_, &c)| c);
                let candidate = combine_metaconflict(
                    domain_conflict(n_after, prior),
                    others.chain([src_after, dest_after]),
                );
                let decrease = current - candidate;
                if decrease > MOVE_EPSILON && best.is_none_or(|(d, _, _)| decrease > d) {
                    best = Some((decrease, j, dest));
                }
            }
        }

        match best {
            Some((_, j, dest)) => {
                part = part.with_move(j, dest);
                moves += 1;
            }
            None => break,
        }
    }

    let report = metaconflict(corpus, &part, prior);
    SearchOutcome {
        partition: part,
        report,
        initial_mcf,
        moves,
    }
}

/// Random initial assignment for restart `restart`.
///
/// Draws a block count uniformly from `1..=min(r_max, reports)` and assigns
/// each report to a uniformly random block; empty blocks are dropped.
pub fn initial_partition(
    n_reports: usize,
    prior: &DomainPrior,
    seed: u64,
    restart: usize,
) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let upper = prior.r_max().min(n_reports).max(1);
    let n = rng.random_range(1..=upper);
    let labels: Vec<usize> = (0..n_reports).map(|_| rng.random_range(0..n)).collect();
    Partition::from_labels(&labels)
}

/// Seeded multi-restart local search. Restarts run in parallel; the lowest
/// mcf wins, ties broken by the smaller canonical label vector.
pub fn partition_search(
    corpus: &EvidenceCorpus,
    prior: &DomainPrior,
    config: &SearchConfig,
) -> (Partition, MetaConflictReport) {
    let outcomes = exec::map_range(config.restarts.max(1), |r| {
        let init = initial_partition(corpus.len(), prior, config.seed, r);
        local_search(corpus, prior, init, config.max_sweeps)
    });
    let best = outcomes
        .into_iter()
        .min_by(|a, b| {
            a.report
                .mcf
                .total_cmp(&b.report.mcf)
                .then_with(|| a.partition.labels().cmp(&b.partition.labels()))
        })
        .expect("at least one restart");
    (best.partition, best.report)
}
