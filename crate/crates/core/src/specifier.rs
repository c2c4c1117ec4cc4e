//! Graded report-to-subset membership.
//!
//! For a fixed partition, each report is hypothetically taken out of its own
//! block and inserted into every other block (and a fresh one). The conflict
//! change of each move is read as metalevel evidence against the report
//! belonging to that block:
//!
//! - own block `i`: `(c_i − c_i⁻ʲ) / (1 − c_i⁻ʲ)`
//! - foreign block `k`: `(c_kʲ⁺ − c_k) / (1 − c_k)`
//!
//! Moves that change the subset count add a domain component from the
//! change in `c0`, fused with the cluster component by `1 − Π(1 − ·)`.

use crate::ds::MassFunction;
use crate::error::{Error, Result};
use crate::exec;
use crate::metacluster::{
    cluster_conflict, domain_conflict, DomainPrior, EvidenceCorpus, Partition,
};

/// Synthetic id for the fresh-block column.
pub const FRESH_BLOCK_ID: &str = "new";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEvidence {
    /// Cluster-conflict component.
    pub against: f64,
    pub domain: f64,
    /// `1 − (1 − against)·(1 − domain)`.
    pub total: f64,
}

impl BlockEvidence {
    fn new(against: f64, domain: f64) -> Self {
        let against = against.clamp(0.0, 1.0);
        let domain = domain.clamp(0.0, 1.0);
        BlockEvidence {
            against,
            domain,
            total: (1.0 - (1.0 - against) * (1.0 - domain)).clamp(0.0, 1.0),
        }
    }

    pub fn plausibility(&self) -> f64 {
        1.0 - self.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipEvidence {
    pub report: usize,
    /// Indexed like the partition's blocks.
    pub blocks: Vec<BlockEvidence>,
    pub fresh: BlockEvidence,
}

/// Incremental conflict attributable to going from `before` to `after`;
/// 1 when `before` is already total.
fn conflict_increase(before: f64, after: f64) -> f64 {
    if after <= before {
        return 0.0;
    }
    let denom = 1.0 - before;
    if denom <= 0.0 {
        1.0
    } else {
        (after - before) / denom
    }
}

pub fn membership_evidence(
    corpus: &EvidenceCorpus,
    partition: &Partition,
    prior: &DomainPrior,
    report: usize,
) -> Result<MembershipEvidence> {
    if partition.n_reports() != corpus.len() {
        return Err(Error::InvalidPartition(
            "partition does not match corpus".into(),
        ));
    }
    let own = partition.block_of(report).ok_or_else(|| {
        Error::InvalidPartition(format!("report index {report} not in partition"))
    })?;
    let n = partition.block_count();
    let c0 = domain_conflict(n, prior);
    let own_block = &partition.blocks()[own];
    let singleton = own_block.len() == 1;

    let blocks = partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(k, block)| {
            let c_k = cluster_conflict(corpus, block);
            if k == own {
                let rest: Vec<usize> = block.iter().copied().filter(|&j| j != report).collect();
                let c_without = cluster_conflict(corpus, &rest);
                let against = if 1.0 - c_without <= 0.0 {
                    1.0
                } else {
                    ((c_k - c_without) / (1.0 - c_without)).max(0.0)
                };
                // Emptying the block lowers the count; a drop in c0 from that
                // counts against membership, mirroring the cluster term.
                let domain = if singleton && n > 1 {
                    conflict_increase(domain_conflict(n - 1, prior), c0)
                } else {
                    0.0
                };
                BlockEvidence::new(against, domain)
            } else {
                let mut with = block.clone();
                with.push(report);
                with.sort_unstable();
                let against = conflict_increase(c_k, cluster_conflict(corpus, &with));
                let domain = if singleton {
                    conflict_increase(c0, domain_conflict(n - 1, prior))
                } else {
                    0.0
                };
                BlockEvidence::new(against, domain)
            }
        })
        .collect();

    let fresh_domain = if singleton {
        0.0
    } else {
        conflict_increase(c0, domain_conflict(n + 1, prior))
    };

    Ok(MembershipEvidence {
        report,
        blocks,
        fresh: BlockEvidence::new(0.0, fresh_domain),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMembership {
    pub report: usize,
    /// Membership plausibility per block.
    pub plausibility: Vec<f64>,
    /// Plausibility of spawning a new block for this report.
    pub fresh_plausibility: f64,
    /// Plausibilities normalized over the existing blocks.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipSpecification {
    pub reports: Vec<ReportMembership>,
}

impl MembershipSpecification {
    pub fn plausibility(&self, report: usize, block: usize) -> f64 {
        self.reports[report].plausibility[block]
    }

    /// Block with the largest plausibility for `report` (first on ties).
    pub fn most_plausible_block(&self, report: usize) -> usize {
        let p = &self.reports[report].plausibility;
        (0..p.len()).fold(0, |best, k| if p[k] > p[best] { k } else { best })
    }
}

pub fn specify_corpus(
    corpus: &EvidenceCorpus,
    partition: &Partition,
    prior: &DomainPrior,
) -> Result<MembershipSpecification> {
    let indices: Vec<usize> = (0..corpus.len()).collect();
    let evidence = exec::map_slice(&indices, |&j| {
        membership_evidence(corpus, partition, prior, j)
    });
    let reports = evidence
        .into_iter()
        .map(|ev| {
            let ev = ev?;
            let plausibility: Vec<f64> =
                ev.blocks.iter().map(BlockEvidence::plausibility).collect();
            let sum: f64 = plausibility.iter().sum();
            let weights = if sum > 0.0 {
                plausibility.iter().map(|p| p / sum).collect()
            } else {
                vec![1.0 / plausibility.len() as f64; plausibility.len()]
            };
            Ok(ReportMembership {
                report: ev.report,
                plausibility,
                fresh_plausibility: ev.fresh.plausibility(),
                weights,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MembershipSpecification { reports })
}

/// Every report in the corpus discounted by its membership plausibility for
/// `block`.
pub fn discounted_view(
    corpus: &EvidenceCorpus,
    spec: &MembershipSpecification,
    block: usize,
) -> Result<Vec<MassFunction>> {
    if spec.reports.len() != corpus.len() {
        return Err(Error::InvalidPartition(
            "specification does not match corpus".into(),
        ));
    }
    corpus
        .reports()
        .iter()
        .zip(&spec.reports)
        .map(|(r, m)| {
            let alpha = *m
                .plausibility
                .get(block)
                .ok_or_else(|| Error::InvalidPartition(format!("no block {block}")))?;
            r.evidence.discount(alpha)
        })
        .collect()
}
