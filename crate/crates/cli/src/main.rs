//! `dsintel`: cluster, specify, count, track and decide from a corpus file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsintel::decision::DecisionMaker;
use dsintel::input::{ingest_corpus, IngestError};
use dsintel::metacluster::{DomainPrior, EvidenceCorpus, SearchConfig};
use dsintel::oracle::{
    exhaustive_best_path, exhaustive_partition, sequential_play_exhaustive,
    PARTITION_ORACLE_MAX_REPORTS,
};
use dsintel::pipeline::{
    block_graph, cluster_stage, decision_stage, decision_table, membership_table, posterior_stage,
    run_pipeline, tracks_table, PipelineConfig, PipelineResult, StageError,
};
use dsintel::scenario::{generate_scenario, ScenarioConfig};
use dsintel::specifier::specify_corpus;
use dsintel::track::{best_path_dp, ORACLE_MAX_VERTICES};

const EXIT_VALIDATION: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "dsintel",
    version,
    about = "Evidential analysis of intelligence reports"
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition the reports into per-target subsets.
    Cluster(Common),
    /// Graded membership of every report in every subset.
    Specify(Common),
    /// Posterior over the number of targets.
    Posterior(Common),
    /// Best tracks through each subset's position reports.
    Tracks(Common),
    /// Rho analysis of the file's decision problem.
    Decide(Common),
    /// Run every stage and export the result.
    Pipeline(Common),
    /// Write a synthetic scenario.
    Gen(GenArgs),
    /// Cross-check the fast algorithms against their brute-force oracles.
    OracleCheck(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Corpus file (JSON).
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Use a uniform prior on 1..=RMAX instead of the file's prior.
    #[arg(long)]
    rmax: Option<usize>,
    /// Speed limit in km/h for track edges.
    #[arg(long, default_value_t = 30.0)]
    vmax: f64,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    /// Rho at which the sequential game is played.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Write the track graphs in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write machine-readable JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    targets: usize,
    #[arg(long, default_value_t = 4)]
    reports_per_target: usize,
    #[arg(long, default_value_t = 6)]
    frame_size: usize,
    #[arg(long, default_value_t = 0.5)]
    contradiction: f64,
    #[arg(long, default_value_t = 100.0)]
    area_km: f64,
    #[arg(long, default_value_t = 30.0)]
    speed_kmh: f64,
    #[arg(long, default_value_t = 36_000.0)]
    time_span_s: f64,
    /// Upper end of the uniform prior written to the file.
    #[arg(long, default_value_t = 5)]
    rmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Validation(String),
    Stage(String),
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Stage(format!("cannot write {}: {e}", path.display()))
}

struct Loaded {
    corpus: EvidenceCorpus,
    prior: DomainPrior,
    decision: Option<Vec<DecisionMaker>>,
    cfg: PipelineConfig,
}

fn load(args: &Common) -> Result<Loaded, Failure> {
    let ing = ingest_corpus(&args.input)?;
    let prior = match (args.rmax, ing.prior) {
        (Some(r), _) => {
            DomainPrior::uniform(r).map_err(|e| Failure::Validation(format!("--rmax: {e}")))?
        }
        (None, Some(p)) => p,
        (None, None) => DomainPrior::uniform(ing.corpus.len())
            .map_err(|e| Failure::Validation(e.to_string()))?,
    };
    if !(0.0..=1.0).contains(&args.rho) {
        return Err(Failure::Validation(format!(
            "--rho {} outside [0, 1]",
            args.rho
        )));
    }
    if args.vmax.is_nan() || args.vmax <= 0.0 {
        return Err(Failure::Validation(format!(
            "--vmax {} must be positive",
            args.vmax
        )));
    }
    let cfg = PipelineConfig {
        search: SearchConfig {
            restarts: args.restarts.max(1),
            seed: args.seed,
            ..Default::default()
        },
        v_max: args.vmax,
        top_k: args.top_k,
        rho: args.rho,
        ..Default::default()
    };
    Ok(Loaded {
        corpus: ing.corpus,
        prior,
        decision: ing.decision,
        cfg,
    })
}

fn emit(args: &Common, json: &serde_json::Value, tables: &str) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(json).expect("json");
    text.push('\n');
    if let Some(path) = &args.out {
        fs::write(path, &text).map_err(|e| io_failure(path, e))?;
    }
    if args.json {
        print!("{text}");
    } else {
        print!("{tables}");
    }
    Ok(())
}

fn partition_json(
    run_blocks: &[Vec<String>],
    c0: f64,
    clusters: &[f64],
    mcf: f64,
) -> serde_json::Value {
    serde_json::json!({
        "partition": run_blocks,
        "metaconflict": { "c0": c0, "clusters": clusters, "mcf": mcf },
    })
}

fn cmd_cluster(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let (p, rep) = cluster_stage(&l.corpus, &l.prior, &l.cfg);
    let ids: Vec<Vec<String>> = p
        .block_ids(&l.corpus)
        .into_iter()
        .map(|b| b.into_iter().map(String::from).collect())
        .collect();
    let json = partition_json(&ids, rep.c0, &rep.cluster_conflicts, rep.mcf);
    let mut t = format!("partition ({} blocks)\n", ids.len());
    t.push_str(&format!("  {:>5}  {:>10}  reports\n", "block", "conflict"));
    for (i, b) in ids.iter().enumerate() {
        t.push_str(&format!(
            "  {:>5}  {:>10.6}  {}\n",
            i,
            rep.cluster_conflicts[i],
            b.join(" ")
        ));
    }
    t.push_str(&format!("  c0 = {:.6}  mcf = {:.6}\n", rep.c0, rep.mcf));
    emit(args, &json, &t)
}

fn full_run(l: &Loaded) -> Result<PipelineResult, Failure> {
    Ok(run_pipeline(&l.corpus, &l.prior, l.decision.as_deref(), &l.cfg)?.result)
}

fn warn_excluded(r: &PipelineResult) {
    for t in &r.tracks {
        if !t.excluded.is_empty() {
            eprintln!(
                "warning: block {}: reports without time or position left out of track analysis: {}",
                t.block,
                t.excluded.join(" ")
            );
        }
    }
}

fn cmd_specify(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let r = full_run(&l)?;
    let json =
        serde_json::json!({ "partition": r.partition, "membership": r.to_json()["membership"] });
    emit(args, &json, &membership_table(&r.membership))
}

fn cmd_posterior(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let (p, _) = cluster_stage(&l.corpus, &l.prior, &l.cfg);
    let post = posterior_stage(&l.corpus, &p, &l.prior)?;
    let map: serde_json::Map<String, serde_json::Value> = post
        .probs
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1).to_string(), serde_json::json!(v)))
        .collect();
    let json =
        serde_json::json!({ "blocks": p.block_count(), "posterior": map, "mode": post.mode() });
    let mut t = format!(
        "posterior over target count ({} blocks, mode {})\n",
        p.block_count(),
        post.mode()
    );
    for (i, v) in post.probs.iter().enumerate() {
        t.push_str(&format!("  {:>3}  {:.6}\n", i + 1, v));
    }
    emit(args, &json, &t)
}

fn write_dot(l: &Loaded, path: &Path) -> Result<(), Failure> {
    let (p, _) = cluster_stage(&l.corpus, &l.prior, &l.cfg);
    let spec = specify_corpus(&l.corpus, &p, &l.prior).map_err(|error| StageError {
        stage: "specify",
        error,
    })?;
    let mut out = String::new();
    for b in 0..p.block_count() {
        if let Some(g) = block_graph(&l.corpus, &p, &spec, b, &l.cfg)?.graph {
            out.push_str(
                &g.to_dot()
                    .replacen("digraph track", &format!("digraph block{b}"), 1),
            );
        }
    }
    fs::write(path, out).map_err(|e| io_failure(path, e))
}

fn cmd_tracks(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let r = full_run(&l)?;
    warn_excluded(&r);
    if let Some(path) = &args.dot {
        write_dot(&l, path)?;
    }
    let json = serde_json::json!({ "partition": r.partition, "tracks": r.to_json()["tracks"] });
    emit(args, &json, &tracks_table(&r.tracks))
}

fn cmd_decide(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let Some(makers) = &l.decision else {
        return Err(Failure::Validation(format!(
            "{}: no decision section",
            args.input.display()
        )));
    };
    let d = decision_stage(makers, l.cfg.rho)?;
    let json = serde_json::to_value(&d).expect("json");
    emit(args, &json, &decision_table(&d))
}

fn cmd_pipeline(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let r = full_run(&l)?;
    warn_excluded(&r);
    if let Some(path) = &args.dot {
        write_dot(&l, path)?;
    }
    emit(args, &r.to_json(), &r.to_tables())
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let cfg = ScenarioConfig {
        seed: args.seed,
        targets: args.targets,
        reports_per_target: args.reports_per_target,
        frame_size: args.frame_size,
        contradiction: args.contradiction,
        area_km: args.area_km,
        speed_kmh: args.speed_kmh,
        time_span_s: args.time_span_s,
        r_max: args.rmax,
    };
    let text = generate_scenario(&cfg).map_err(|e| Failure::Validation(e.to_string()))?;
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Disagreements count as stage failures.
fn cmd_oracle_check(args: &Common) -> Result<(), Failure> {
    let l = load(args)?;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut check = |lines: &mut Vec<String>, name: String, pass: bool, detail: String| {
        ok &= pass;
        lines.push(format!(
            "{} {name}: {detail}",
            if pass { "agree   " } else { "DISAGREE" }
        ));
    };

    let (p, rep) = cluster_stage(&l.corpus, &l.prior, &l.cfg);
    if l.corpus.len() <= PARTITION_ORACLE_MAX_REPORTS {
        let (best, _, count) =
            exhaustive_partition(&l.corpus, &l.prior).map_err(|error| StageError {
                stage: "oracle",
                error,
            })?;
        check(
            &mut lines,
            "partition".into(),
            rep.mcf <= best + 1e-9,
            format!(
                "search mcf {:.6}, exhaustive minimum {:.6} over {count} partitions",
                rep.mcf, best
            ),
        );
    } else {
        lines.push(format!(
            "skipped  partition: {} reports exceeds the oracle limit {PARTITION_ORACLE_MAX_REPORTS}",
            l.corpus.len()
        ));
    }

    let spec = specify_corpus(&l.corpus, &p, &l.prior).map_err(|error| StageError {
        stage: "specify",
        error,
    })?;
    for b in 0..p.block_count() {
        let Some(g) = block_graph(&l.corpus, &p, &spec, b, &l.cfg)?.graph else {
            continue;
        };
        if g.len() > ORACLE_MAX_VERTICES {
            lines.push(format!("skipped  tracks block {b}: {} vertices", g.len()));
            continue;
        }
        let (path, score) = exhaustive_best_path(&g);
        let dp = &best_path_dp(&g, 1)[0];
        check(
            &mut lines,
            format!("tracks block {b}"),
            dp.path == path && (dp.unnormalized - score).abs() < 1e-9,
            format!(
                "dp {:?} {:.6}, exhaustive {:?} {:.6}",
                dp.path.vertices(),
                dp.unnormalized,
                path.vertices(),
                score
            ),
        );
    }

    if let Some(makers) = &l.decision {
        let fast =
            dsintel::decision::sequential_play(makers, l.cfg.rho).map_err(|error| StageError {
                stage: "decision",
                error,
            })?;
        let slow = sequential_play_exhaustive(makers, l.cfg.rho);
        check(
            &mut lines,
            format!("sequential play at rho {}", l.cfg.rho),
            fast == slow,
            format!("{fast:?} vs {slow:?}"),
        );
    }

    for line in &lines {
        println!("{line}");
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Stage(
            "fast and exhaustive results disagree".into(),
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot set up {} threads: {e}", cli.threads);
            return ExitCode::from(EXIT_STAGE);
        }
    }
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Specify(a) => cmd_specify(a),
        Command::Posterior(a) => cmd_posterior(a),
        Command::Tracks(a) => cmd_tracks(a),
        Command::Decide(a) => cmd_decide(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Gen(a) => cmd_gen(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Stage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}
