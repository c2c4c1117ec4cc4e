//! End-to-end analysis: cluster, specify, count, track, decide.

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::decision::{competitive_preferences, rho_segmentation, sequential_play, DecisionMaker};
use crate::error::Error;
use crate::exec;
use crate::metacluster::{
    partition_search, DomainPrior, EvidenceCorpus, MetaConflictReport, Partition, SearchConfig,
};
use crate::posterior::{
    counting_bpa, posterior_distribution, subset_support, PosteriorDistribution,
};
use crate::specifier::{specify_corpus, MembershipSpecification, FRESH_BLOCK_ID};
use crate::track::{
    best_path_dp, combine_oracle, TrackAnalysis, TrackGraph, TrackVertex, Waypoint, DEFAULT_Q_CAP,
    ORACLE_MAX_VERTICES,
};

/// Ceiling on vertex masses derived from reports.
pub const VERTEX_MASS_CAP: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub search: SearchConfig,
    /// km/h.
    pub v_max: f64,
    pub q_cap: f64,
    pub top_k: usize,
    /// Point at which the sequential game is played.
    pub rho: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            search: SearchConfig::default(),
            v_max: 30.0,
            q_cap: DEFAULT_Q_CAP,
            top_k: 3,
            rho: 0.5,
        }
    }
}

/// A failure tagged with the stage that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage '{}' failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

fn stage<T>(name: &'static str, r: crate::Result<T>) -> Result<T, StageError> {
    r.map_err(|error| StageError { stage: name, error })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetaConflictOut {
    pub c0: f64,
    pub clusters: Vec<f64>,
    pub mcf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipOut {
    pub report: String,
    pub block: usize,
    /// Per block index, plus the fresh-block entry.
    pub plausibility: Vec<(String, f64)>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathOut {
    pub vertices: Vec<String>,
    pub plausibility_unnorm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plausibility_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockTracks {
    pub block: usize,
    /// Report ids in rank order.
    pub vertices: Vec<String>,
    /// Reports without time or position.
    pub excluded: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflict: Option<f64>,
    pub best_paths: Vec<PathOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChoiceOut {
    pub id: String,
    pub e_low: f64,
    pub e_high: f64,
    /// Length of ρ on which this choice is the maker's own best.
    pub preference: f64,
    /// Length of ρ on which this choice is played and holds the overall maximum.
    pub competitive_preference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MakerOut {
    pub id: String,
    pub choices: Vec<ChoiceOut>,
    pub crossovers: Vec<f64>,
    /// Alternative played at the configured ρ.
    pub plays: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionOut {
    pub rho: f64,
    pub makers: Vec<MakerOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineResult {
    pub partition: Vec<Vec<String>>,
    pub metaconflict: MetaConflictOut,
    pub membership: Vec<MembershipOut>,
    /// `(r, probability)` for `r = 1..=r_max`.
    pub posterior: Vec<(usize, f64)>,
    pub posterior_mode: usize,
    pub tracks: Vec<BlockTracks>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionOut>,
}

/// Intermediate results kept alongside the serializable output.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub partition: Partition,
    pub report: MetaConflictReport,
    pub spec: MembershipSpecification,
    pub posterior: PosteriorDistribution,
    pub graphs: Vec<Option<TrackGraph>>,
    pub result: PipelineResult,
}

pub fn cluster_stage(
    corpus: &EvidenceCorpus,
    prior: &DomainPrior,
    cfg: &PipelineConfig,
) -> (Partition, MetaConflictReport) {
    partition_search(corpus, prior, &cfg.search)
}

pub fn posterior_stage(
    corpus: &EvidenceCorpus,
    partition: &Partition,
    prior: &DomainPrior,
) -> Result<PosteriorDistribution, StageError> {
    let supports: Vec<f64> = partition
        .blocks()
        .iter()
        .map(|b| subset_support(corpus, b))
        .collect();
    let cb = stage("posterior", counting_bpa(&supports))?;
    stage("posterior", posterior_distribution(&cb, prior))
}

/// A block's track graph with the reports it was built from.
#[derive(Debug, Clone)]
pub struct BlockGraph {
    pub graph: Option<TrackGraph>,
    /// Corpus indices in vertex order.
    pub vertices: Vec<usize>,
    pub excluded: Vec<usize>,
}

/// Track graph for one block: reports with time and position, ordered by
/// time then corpus order. Vertex mass is the report's non-Θ mass scaled by
/// its membership plausibility for the block.
pub fn block_graph(
    corpus: &EvidenceCorpus,
    partition: &Partition,
    spec: &MembershipSpecification,
    block: usize,
    cfg: &PipelineConfig,
) -> Result<BlockGraph, StageError> {
    let mut usable = Vec::new();
    let mut excluded = Vec::new();
    for &j in &partition.blocks()[block] {
        let r = &corpus.reports()[j];
        match (r.time, r.pos) {
            (Some(_), Some(_)) => usable.push(j),
            _ => excluded.push(j),
        }
    }
    usable.sort_by(|&a, &b| {
        let ta = corpus.reports()[a].time.unwrap_or(0.0);
        let tb = corpus.reports()[b].time.unwrap_or(0.0);
        ta.total_cmp(&tb).then(a.cmp(&b))
    });
    if usable.is_empty() {
        return Ok(BlockGraph {
            graph: None,
            vertices: usable,
            excluded,
        });
    }
    let vertices = usable
        .iter()
        .map(|&j| {
            let r = &corpus.reports()[j];
            let p = (1.0 - r.evidence.theta_mass()) * spec.plausibility(j, block);
            TrackVertex {
                label: r.id.clone(),
                waypoint: Some(Waypoint {
                    time: r.time.unwrap_or(0.0),
                    pos: r.pos.unwrap_or([0.0, 0.0]),
                }),
                p: p.clamp(0.0, VERTEX_MASS_CAP),
            }
        })
        .collect();
    let g = stage(
        "tracks",
        TrackGraph::kinematic(vertices, cfg.v_max, cfg.q_cap),
    )?;
    Ok(BlockGraph {
        graph: Some(g),
        vertices: usable,
        excluded,
    })
}

fn analyze_tracks(
    corpus: &EvidenceCorpus,
    partition: &Partition,
    spec: &MembershipSpecification,
    block: usize,
    cfg: &PipelineConfig,
) -> Result<(Option<TrackGraph>, BlockTracks), StageError> {
    let BlockGraph {
        graph,
        vertices: usable,
        excluded,
    } = block_graph(corpus, partition, spec, block, cfg)?;
    let ids = |v: &[usize]| -> Vec<String> {
        v.iter().map(|&j| corpus.reports()[j].id.clone()).collect()
    };
    let mut out = BlockTracks {
        block,
        vertices: ids(&usable),
        excluded: ids(&excluded),
        conflict: None,
        best_paths: Vec::new(),
    };
    let Some(g) = graph else {
        return Ok((None, out));
    };
    let oracle: Option<TrackAnalysis> = if g.len() <= ORACLE_MAX_VERTICES {
        Some(stage("tracks", combine_oracle(&g))?)
    } else {
        None
    };
    out.conflict = oracle.as_ref().map(|a| a.conflict);
    out.best_paths = best_path_dp(&g, cfg.top_k)
        .into_iter()
        .map(|rp| {
            let scored = oracle.as_ref().and_then(|a| a.get(&rp.path));
            PathOut {
                vertices: rp
                    .path
                    .vertices()
                    .iter()
                    .map(|&v| g.vertices()[v].label.clone())
                    .collect(),
                plausibility_unnorm: rp.unnormalized,
                plausibility_norm: scored.map(|s| s.plausibility),
                support: scored.map(|s| s.support),
            }
        })
        .collect();
    Ok((Some(g), out))
}

pub fn decision_stage(makers: &[DecisionMaker], rho: f64) -> Result<DecisionOut, StageError> {
    let game = stage("decision", competitive_preferences(makers))?;
    let plays = stage("decision", sequential_play(makers, rho))?;
    let makers_out = makers
        .iter()
        .enumerate()
        .map(|(d, m)| {
            let seg = stage("decision", rho_segmentation(&m.choices))?;
            Ok(MakerOut {
                id: m.id.clone(),
                choices: m
                    .choices
                    .iter()
                    .enumerate()
                    .map(|(a, c)| ChoiceOut {
                        id: c.id.clone(),
                        e_low: c.e_low,
                        e_high: c.e_high,
                        preference: seg.preferences[a],
                        competitive_preference: game.preferences[d][a],
                    })
                    .collect(),
                crossovers: seg.crossovers(),
                plays: m.choices[plays[d]].id.clone(),
            })
        })
        .collect::<Result<Vec<_>, StageError>>()?;
    Ok(DecisionOut {
        rho,
        makers: makers_out,
    })
}

pub fn run_pipeline(
    corpus: &EvidenceCorpus,
    prior: &DomainPrior,
    decision: Option<&[DecisionMaker]>,
    cfg: &PipelineConfig,
) -> Result<PipelineRun, StageError> {
    let (partition, report) = cluster_stage(corpus, prior, cfg);
    let spec = stage("specify", specify_corpus(corpus, &partition, prior))?;
    let posterior = posterior_stage(corpus, &partition, prior)?;

    let blocks: Vec<usize> = (0..partition.block_count()).collect();
    let analyzed = exec::map_slice(&blocks, |&b| {
        analyze_tracks(corpus, &partition, &spec, b, cfg)
    });
    let mut graphs = Vec::with_capacity(blocks.len());
    let mut tracks = Vec::with_capacity(blocks.len());
    for a in analyzed {
        let (g, t) = a?;
        graphs.push(g);
        tracks.push(t);
    }

    let decision = match decision {
        Some(makers) if !makers.is_empty() => Some(decision_stage(makers, cfg.rho)?),
        _ => None,
    };

    let id = |j: usize| corpus.reports()[j].id.clone();
    let membership = spec
        .reports
        .iter()
        .map(|r| {
            let mut plausibility: Vec<(String, f64)> = r
                .plausibility
                .iter()
                .enumerate()
                .map(|(k, &p)| (k.to_string(), p))
                .collect();
            plausibility.push((FRESH_BLOCK_ID.to_string(), r.fresh_plausibility));
            MembershipOut {
                report: id(r.report),
                block: partition
                    .block_of(r.report)
                    .expect("partition covers corpus"),
                plausibility,
                weights: r.weights.clone(),
            }
        })
        .collect();

    let result = PipelineResult {
        partition: partition
            .blocks()
            .iter()
            .map(|b| b.iter().map(|&j| id(j)).collect())
            .collect(),
        metaconflict: MetaConflictOut {
            c0: report.c0,
            clusters: report.cluster_conflicts.clone(),
            mcf: report.mcf,
        },
        membership,
        posterior: posterior
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (i + 1, p))
            .collect(),
        posterior_mode: posterior.mode(),
        tracks,
        decision,
    };
    Ok(PipelineRun {
        partition,
        report,
        spec,
        posterior,
        graphs,
        result,
    })
}

impl PipelineResult {
    /// Machine-readable form. Maps are emitted as JSON objects.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("pipeline result serializes");
        let obj = v.as_object_mut().expect("object");
        obj.insert(
            "posterior".into(),
            serde_json::Value::Object(
                self.posterior
                    .iter()
                    .map(|(r, p)| (r.to_string(), serde_json::json!(p)))
                    .collect(),
            ),
        );
        if let Some(serde_json::Value::Array(ms)) = obj.get_mut("membership") {
            for (m, src) in ms.iter_mut().zip(&self.membership) {
                m["plausibility"] = serde_json::Value::Object(
                    src.plausibility
                        .iter()
                        .map(|(k, p)| (k.clone(), serde_json::json!(p)))
                        .collect(),
                );
            }
        }
        v
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("json");
        s.push('\n');
        s
    }

    /// Aligned human-readable tables.
    pub fn to_tables(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "partition ({} blocks)", self.partition.len());
        let _ = writeln!(out, "  {:>5}  {:>10}  reports", "block", "conflict");
        for (i, b) in self.partition.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {:>5}  {:>10.6}  {}",
                i,
                self.metaconflict.clusters[i],
                b.join(" ")
            );
        }
        let _ = writeln!(
            out,
            "  c0 = {:.6}  mcf = {:.6}\n",
            self.metaconflict.c0, self.metaconflict.mcf
        );
        out.push_str(&membership_table(&self.membership));
        out.push('\n');
        let _ = writeln!(
            out,
            "posterior over target count (mode {})",
            self.posterior_mode
        );
        for (r, p) in &self.posterior {
            let _ = writeln!(out, "  {:>3}  {:.6}", r, p);
        }
        out.push('\n');
        out.push_str(&tracks_table(&self.tracks));
        if let Some(d) = &self.decision {
            out.push('\n');
            out.push_str(&decision_table(d));
        }
        out
    }
}

pub fn membership_table(rows: &[MembershipOut]) -> String {
    let mut out = String::from("membership plausibility\n");
    let Some(first) = rows.first() else {
        return out;
    };
    let idw = rows
        .iter()
        .map(|r| r.report.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let _ = write!(out, "  {:<idw$}  {:>5}", "report", "block");
    for (k, _) in &first.plausibility {
        let _ = write!(out, "  {:>10}", k);
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "  {:<idw$}  {:>5}", r.report, r.block);
        for (_, p) in &r.plausibility {
            let _ = write!(out, "  {:>10.6}", p);
        }
        out.push('\n');
    }
    out
}

pub fn tracks_table(tracks: &[BlockTracks]) -> String {
    let mut out = String::from("tracks\n");
    for t in tracks {
        let _ = write!(out, "  block {}: {} vertices", t.block, t.vertices.len());
        if let Some(c) = t.conflict {
            let _ = write!(out, ", conflict {:.6}", c);
        }
        if !t.excluded.is_empty() {
            let _ = write!(out, ", excluded {}", t.excluded.join(" "));
        }
        out.push('\n');
        for (rank, p) in t.best_paths.iter().enumerate() {
            let _ = write!(out, "    #{:<2} pls {:.6}", rank + 1, p.plausibility_unnorm);
            if let Some(n) = p.plausibility_norm {
                let _ = write!(out, "  norm {:.6}", n);
            }
            if let Some(s) = p.support {
                let _ = write!(out, "  bel {:.6}", s);
            }
            let _ = writeln!(out, "  {}", p.vertices.join(" -> "));
        }
    }
    out
}

pub fn decision_table(d: &DecisionOut) -> String {
    let mut out = format!("decision (rho = {:.6})\n", d.rho);
    for m in &d.makers {
        let _ = writeln!(out, "  {} plays {}", m.id, m.plays);
        let _ = writeln!(
            out,
            "    {:<10} {:>10} {:>10} {:>10} {:>10}",
            "choice", "e_low", "e_high", "pref", "compet."
        );
        for c in &m.choices {
            let _ = writeln!(
                out,
                "    {:<10} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
                c.id, c.e_low, c.e_high, c.preference, c.competitive_preference
            );
        }
    }
    out
}
