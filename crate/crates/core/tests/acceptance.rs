//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use dsintel::decision::{rho_segmentation, sequential_play, DecisionMaker, UtilityIntervalChoice};
use dsintel::ds::{combine_all, FocalSet, Frame, MassFunction};
use dsintel::error::Error;
use dsintel::input::parse_corpus;
use dsintel::metacluster::{
    cluster_conflict, metaconflict, partition_search, DomainPrior, Partition, SearchConfig,
};
use dsintel::oracle::{
    counting_bpa_enumeration, exhaustive_best_path, exhaustive_partition, rho_grid_preferences,
    sequential_play_exhaustive,
};
use dsintel::pipeline::{run_pipeline, PipelineConfig};
use dsintel::posterior::{counting_bpa, posterior_distribution, CountingBpa};
use dsintel::scenario::{generate_scenario, ScenarioConfig};
use dsintel::specifier::specify_corpus;
use dsintel::track::{best_path_dp, combine_oracle, path_plausibility, TrackGraph, TrackPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (
        elapsed < limit,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn c1_dempster_algebra() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let f = random_frame(&mut r, 6);
        let a = random_mass(&mut r, &f, 4);
        let b = random_mass(&mut r, &f, 4);
        let (ab, cab) = a.combine(&b).unwrap();
        let (ba, cba) = b.combine(&a).unwrap();
        worst = worst
            .max(ab.max_difference(&ba).unwrap())
            .max((cab - cba).abs());
    }
    for _ in 0..100 {
        let f = random_frame(&mut r, 6);
        let a = random_mass(&mut r, &f, 4);
        let b = random_mass(&mut r, &f, 4);
        let c = random_mass(&mut r, &f, 4);
        let left = a.combine(&b).unwrap().0.combine(&c).unwrap().0;
        let right = a.combine(&b.combine(&c).unwrap().0).unwrap().0;
        worst = worst.max(left.max_difference(&right).unwrap());
    }
    // Sequential conflict accounting against one simultaneous enumeration
    // over every choice of focal set per simple support.
    for _ in 0..200 {
        let f = random_frame(&mut r, 6);
        let k = r.random_range(2..=6);
        let supports: Vec<(FocalSet, f64)> = (0..k)
            .map(|_| {
                (
                    FocalSet::from_bits(r.random_range(1..=f.full().bits())),
                    r.random_range(0.0..0.95),
                )
            })
            .collect();
        let ms: Vec<MassFunction> = supports
            .iter()
            .map(|&(s, m)| MassFunction::simple_support(f.clone(), s, m).unwrap())
            .collect();
        let (_, sequential) = combine_all(&ms).unwrap();
        let mut simultaneous = 0.0;
        for pick in 0..1u32 << k {
            let mut inter = f.full();
            let mut w = 1.0;
            for (i, &(s, m)) in supports.iter().enumerate() {
                if pick & (1 << i) != 0 {
                    inter = inter.intersect(s);
                    w *= m;
                } else {
                    w *= 1.0 - m;
                }
            }
            if inter.is_empty() {
                simultaneous += w;
            }
        }
        worst = worst.max((sequential - simultaneous).abs());
    }
    let (fast, t) = within(start.elapsed(), Duration::from_secs(10));
    outcome(
        worst < 1e-9 && fast,
        format!("max deviation {worst:.2e}; {t}"),
    )
}

fn c2_clustering_optimality() -> Outcome {
    let start = Instant::now();
    let prior = DomainPrior::uniform(4).unwrap();
    let cfg = SearchConfig {
        restarts: 20,
        ..Default::default()
    };
    let mut r = rng(2);
    let (mut optimal, mut recovered, mut visited) = (0, 0, 0);
    for _ in 0..100 {
        let (corpus, truth) = separable_corpus(&mut r, 10, 3);
        let (found, report) = partition_search(&corpus, &prior, &cfg);
        let (best, _, count) = exhaustive_partition(&corpus, &prior).unwrap();
        visited = count;
        optimal += usize::from((report.mcf - best).abs() < 1e-9);
        recovered += usize::from(found == truth);
    }
    let (fast, t) = within(start.elapsed(), Duration::from_secs(120));
    outcome(
        optimal >= 95 && recovered >= 95 && fast,
        format!("global minimum {optimal}/100, ground truth {recovered}/100, {visited} partitions each; {t}"),
    )
}

fn c3_four_subsets() -> Outcome {
    let start = Instant::now();
    let prior = DomainPrior::uniform(5).unwrap();
    let mut counts = Vec::new();
    let mut r = rng(3);
    for _ in 0..10 {
        let (corpus, truth) = separable_corpus(&mut r, 13, 4);
        let (found, _) = partition_search(&corpus, &prior, &SearchConfig::default());
        counts.push((found.block_count(), found == truth));
    }
    let ok = counts.iter().all(|&(b, t)| b == 4 && t);
    let (fast, t) = within(start.elapsed(), Duration::from_secs(5));
    let blocks: Vec<usize> = counts.iter().map(|c| c.0).collect();
    outcome(
        ok && fast,
        format!("block counts over 10 scenarios {blocks:?}; {t}"),
    )
}

fn c4_specifier_coherence() -> Outcome {
    let prior = DomainPrior::uniform(4).unwrap();
    let mut r = rng(2);
    let (mut misplaced, mut reports, mut moves, mut violations) = (0, 0, 0, 0);
    for _ in 0..100 {
        let (corpus, truth) = separable_corpus(&mut r, 10, 3);
        let spec = specify_corpus(&corpus, &truth, &prior).unwrap();
        for m in &spec.reports {
            reports += 1;
            let own = truth.block_of(m.report).unwrap();
            let strict = m
                .plausibility
                .iter()
                .enumerate()
                .all(|(k, &p)| k == own || p < m.plausibility[own]);
            misplaced += usize::from(!strict);
        }
        // Every single-report removal and insertion, on the truth and on a
        // random partition.
        let labels: Vec<usize> = (0..corpus.len()).map(|_| r.random_range(0..4)).collect();
        for p in [truth.clone(), Partition::from_labels(&labels)] {
            for block in p.blocks() {
                let c = cluster_conflict(&corpus, block);
                for j in 0..corpus.len() {
                    moves += 1;
                    let changed: Vec<usize> = if block.contains(&j) {
                        block.iter().copied().filter(|&x| x != j).collect()
                    } else {
                        let mut v = block.clone();
                        v.push(j);
                        v.sort_unstable();
                        v
                    };
                    let c2 = cluster_conflict(&corpus, &changed);
                    let bad = if block.contains(&j) {
                        c2 > c + 1e-12
                    } else {
                        c2 < c - 1e-12
                    };
                    violations += usize::from(bad);
                }
            }
        }
    }
    outcome(
        misplaced == 0 && violations == 0,
        format!("{misplaced}/{reports} reports off their block; {violations}/{moves} monotonicity violations"),
    )
}

fn c5_posterior() -> Outcome {
    let mut r = rng(5);
    let mut enum_dev = 0.0_f64;
    let mut ds_dev = 0.0_f64;
    for _ in 0..200 {
        let n = r.random_range(0..=12);
        let s: Vec<f64> = (0..n).map(|_| r.random_range(0.0..=1.0)).collect();
        let fast = counting_bpa(&s).unwrap();
        let slow = counting_bpa_enumeration(&s);
        enum_dev = enum_dev.max((fast.vacuous - slow.vacuous).abs());
        for (a, b) in fast.at_least.iter().zip(&slow.at_least) {
            enum_dev = enum_dev.max((a - b).abs());
        }

        let r_max = r.random_range(n.max(1)..=14);
        let raw: Vec<f64> = (0..r_max).map(|_| r.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let prior = DomainPrior::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let post = posterior_distribution(&fast, &prior).unwrap();
        let reference = posterior_by_combination(&fast, &prior);
        for (a, b) in post.probs.iter().zip(&reference) {
            ds_dev = ds_dev.max((a - b).abs());
        }
    }
    let prior = DomainPrior::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let vac = posterior_distribution(&counting_bpa(&[0.0, 0.0]).unwrap(), &prior).unwrap();
    let exact = vac.probs == prior.probabilities();
    outcome(
        enum_dev < 1e-12 && ds_dev < 1e-9 && exact,
        format!(
            "enumeration {enum_dev:.2e}, combination {ds_dev:.2e}, vacuous returns prior exactly: {exact}"
        ),
    )
}

/// Counting evidence and the Bayesian prior as mass functions on the
/// count frame, combined by Dempster's rule.
fn posterior_by_combination(cb: &CountingBpa, prior: &DomainPrior) -> Vec<f64> {
    let r_max = prior.r_max();
    let frame = Frame::new((1..=r_max).map(|r| r.to_string())).unwrap();
    let mut entries: Vec<(FocalSet, f64)> = cb
        .at_least
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(k, &m)| (FocalSet::from_indices(k..r_max), m))
        .collect();
    if cb.vacuous > 0.0 {
        entries.push((frame.full(), cb.vacuous));
    }
    let counting = MassFunction::new(frame.clone(), &entries).unwrap();
    let bayes: Vec<(FocalSet, f64)> = prior
        .probabilities()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (FocalSet::singleton(i), p))
        .collect();
    let bayes = MassFunction::new(frame.clone(), &bayes).unwrap();
    let (post, _) = counting.combine(&bayes).unwrap();
    (0..r_max)
        .map(|i| post.mass(FocalSet::singleton(i)))
        .collect()
}

fn c6_track_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(6);
    let (mut worst, mut argmax_hits, mut total) = (0.0_f64, 0, 0);
    for n in 2..=5 {
        for _ in 0..100 {
            let g = random_graph(&mut r, n);
            let analysis = combine_oracle(&g).unwrap();
            for path in TrackPath::all(n) {
                let closed = path_plausibility(&g, &path).unwrap().unnormalized;
                let oracle = analysis.get(&path).unwrap().unnormalized_plausibility;
                worst = worst.max((closed - oracle).abs());
            }
            total += 1;
            let (best, _) = exhaustive_best_path(&g);
            let top = analysis.ranked()[0].path.clone();
            argmax_hits += usize::from(best_path_dp(&g, 1)[0].path == best && top == best);
        }
    }
    let g = TrackGraph::from_masses(&[0.6, 0.5], &[vec![0.3]]).unwrap();
    let a = combine_oracle(&g).unwrap();
    let both = a.get(&TrackPath::new(vec![0, 1]).unwrap()).unwrap();
    let example = (a.conflict - 0.09).abs() < 1e-6
        && (both.support - 0.21 / 0.91).abs() < 1e-6
        && (both.plausibility - 0.70 / 0.91).abs() < 1e-6;
    let (fast, t) = within(start.elapsed(), Duration::from_secs(60));
    outcome(
        worst < 1e-9 && argmax_hits == total && example && fast,
        format!(
            "closed form deviation {worst:.2e}; dp argmax {argmax_hits}/{total}; n=2 example conflict {:.6} bel {:.6} pls {:.6}; {t}",
            a.conflict, both.support, both.plausibility
        ),
    )
}

fn c7_track_scaling() -> Outcome {
    let g = random_graph(&mut rng(7), 200);
    let start = Instant::now();
    let best = best_path_dp(&g, 1);
    let elapsed = start.elapsed();
    let refused = matches!(combine_oracle(&g), Err(Error::OracleLimit { n: 200, .. }));
    let (fast, t) = within(elapsed, Duration::from_secs(1));
    outcome(
        fast && refused && best.len() == 1,
        format!(
            "n=200 best path of {} vertices in {t}; oracle refused: {refused}",
            best[0].path.vertices().len()
        ),
    )
}

fn c8_decision() -> Outcome {
    let mut r = rng(8);
    let mut grid_dev = 0.0_f64;
    for _ in 0..50 {
        let k = r.random_range(1..=5);
        let choices: Vec<UtilityIntervalChoice> = (0..k)
            .map(|a| {
                let x: f64 = r.random_range(0.0..1.0);
                let y: f64 = r.random_range(0.0..1.0);
                UtilityIntervalChoice::new(format!("c{a}"), x.min(y), x.max(y)).unwrap()
            })
            .collect();
        let exact = rho_segmentation(&choices).unwrap().preferences;
        let grid = rho_grid_preferences(&choices, 10_000);
        for (a, b) in exact.iter().zip(&grid) {
            grid_dev = grid_dev.max((a - b).abs());
        }
    }

    let ab = [
        UtilityIntervalChoice::new("A", 0.2, 0.9).unwrap(),
        UtilityIntervalChoice::new("B", 0.4, 0.6).unwrap(),
    ];
    let seg = rho_segmentation(&ab).unwrap();
    let cross = seg.crossovers();
    let example = cross.len() == 1
        && (cross[0] - 0.4).abs() < 1e-12
        && (seg.preferences[0] - 0.6).abs() < 1e-12
        && (seg.preferences[1] - 0.4).abs() < 1e-12;

    // Every shape up to three makers with up to three choices each.
    let mut shapes: Vec<Vec<usize>> = Vec::new();
    for d in 1..=3u32 {
        for code in 0..3usize.pow(d) {
            shapes.push((0..d).map(|i| code / 3usize.pow(i) % 3 + 1).collect());
        }
    }
    let (mut games, mut agree) = (0, 0);
    for shape in &shapes {
        for _ in 0..40 {
            let makers: Vec<DecisionMaker> = random_game(&mut r, shape);
            for step in 0..=20 {
                let rho = step as f64 / 20.0;
                games += 1;
                agree += usize::from(
                    sequential_play(&makers, rho).unwrap()
                        == sequential_play_exhaustive(&makers, rho),
                );
            }
        }
    }
    outcome(
        grid_dev < 2e-4 && example && agree == games,
        format!(
            "grid deviation {grid_dev:.2e}; A/B crossover {:?} preferences {:?}; sequential play {agree}/{games} over {} shapes",
            cross,
            seg.preferences,
            shapes.len()
        ),
    )
}

fn pipeline_json(text: &str, seed: u64) -> String {
    let ing = parse_corpus(text, "scenario").unwrap();
    let cfg = PipelineConfig {
        search: SearchConfig {
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let prior = ing.prior.unwrap();
    run_pipeline(&ing.corpus, &prior, ing.decision.as_deref(), &cfg)
        .unwrap()
        .result
        .to_json_string()
}

fn c9_determinism() -> Outcome {
    let text = generate_scenario(&ScenarioConfig {
        targets: 3,
        reports_per_target: 5,
        ..Default::default()
    })
    .unwrap();
    let first = pipeline_json(&text, 11);
    let second = pipeline_json(&text, 11);
    let mut same = first == second;
    let mut detail = format!("two runs identical: {same}");
    #[cfg(feature = "parallel")]
    {
        let in_pool = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| pipeline_json(&text, 11))
        };
        let threads_same = in_pool(1) == first && in_pool(4) == first;
        same &= threads_same;
        detail.push_str(&format!("; 1 and 4 threads identical: {threads_same}"));
    }
    // Sanity: the partition must be a real result, not an empty run.
    let mcf_ok = {
        let ing = parse_corpus(&text, "scenario").unwrap();
        let prior = ing.prior.unwrap();
        let (p, rep) = partition_search(
            &ing.corpus,
            &prior,
            &SearchConfig {
                seed: 11,
                ..Default::default()
            },
        );
        (metaconflict(&ing.corpus, &p, &prior).mcf - rep.mcf).abs() < 1e-12
    };
    outcome(same && mcf_ok, format!("{detail}; {} bytes", first.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("Dempster core algebra", c1_dempster_algebra),
        ("clustering optimality", c2_clustering_optimality),
        ("four-subset scenario", c3_four_subsets),
        ("specifier coherence", c4_specifier_coherence),
        ("posterior correctness", c5_posterior),
        ("track oracle equivalence", c6_track_oracle),
        ("track scaling", c7_track_scaling),
        ("decision module", c8_decision),
        ("pipeline determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} {}: {} ({})",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
