//! Synthetic multi-target scenarios.
//!
//! Targets get pairwise-disjoint characteristic focal sets, so reports from
//! different targets conflict and reports from the same target never do.
//! Each target moves on a bounded random walk that respects the speed limit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::{CorpusFile, MassEntry, ReportEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub targets: usize,
    pub reports_per_target: usize,
    pub frame_size: usize,
    /// In `[0, 1]`; 0 makes every report categorical on its target's focal set.
    pub contradiction: f64,
    pub area_km: f64,
    pub speed_kmh: f64,
    pub time_span_s: f64,
    /// Upper end of the uniform prior written to the file.
    pub r_max: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 7,
            targets: 3,
            reports_per_target: 4,
            frame_size: 6,
            contradiction: 0.5,
            area_km: 100.0,
            speed_kmh: 30.0,
            time_span_s: 36_000.0,
            r_max: 5,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.targets == 0
            || self.reports_per_target == 0
            || self.frame_size == 0
            || self.r_max == 0
        {
            return bad("counts must be at least 1".into());
        }
        if self.frame_size < self.targets {
            return bad(format!(
                "a frame of {} elements cannot give {} targets disjoint focal sets",
                self.frame_size, self.targets
            ));
        }
        if !(0.0..=1.0).contains(&self.contradiction) {
            return bad(format!(
                "contradiction level {} outside [0, 1]",
                self.contradiction
            ));
        }
        if !(self.area_km > 0.0 && self.speed_kmh > 0.0 && self.time_span_s > 0.0) {
            return bad("area, speed limit and time span must be positive".into());
        }
        Ok(())
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn generate_file(cfg: &ScenarioConfig) -> Result<CorpusFile> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame: Vec<String> = (1..=cfg.frame_size).map(|i| format!("h{i}")).collect();
    let width = cfg.frame_size / cfg.targets;
    let theta = frame.clone();

    let mut reports = Vec::with_capacity(cfg.targets * cfg.reports_per_target);
    for t in 0..cfg.targets {
        let focal: Vec<String> = frame[t * width..(t + 1) * width].to_vec();
        let mut pos = [
            rng.random_range(0.0..cfg.area_km),
            rng.random_range(0.0..cfg.area_km),
        ];
        let mut times: Vec<f64> = (0..cfg.reports_per_target)
            .map(|_| rng.random_range(0.0..cfg.time_span_s))
            .collect();
        times.sort_by(f64::total_cmp);
        let mut last = times[0];
        for (k, &time) in times.iter().enumerate() {
            if k > 0 {
                let reach = 0.8 * cfg.speed_kmh * (time - last) / 3600.0;
                let dist = rng.random_range(0.0..=1.0) * reach;
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                // Clamping onto the area never lengthens the step.
                pos = [
                    (pos[0] + dist * angle.cos()).clamp(0.0, cfg.area_km),
                    (pos[1] + dist * angle.sin()).clamp(0.0, cfg.area_km),
                ];
                last = time;
            }
            let noise: f64 = rng.random_range(0.0..1.0);
            let mass = round6(1.0 - cfg.contradiction * noise);
            let mut masses = vec![MassEntry {
                set: focal.clone(),
                mass,
            }];
            if mass < 1.0 {
                masses.push(MassEntry {
                    set: theta.clone(),
                    mass: round6(1.0 - mass),
                });
            }
            reports.push(ReportEntry {
                id: String::new(),
                masses,
                time: Some(round6(time)),
                pos: Some([round6(pos[0]), round6(pos[1])]),
                target: Some(t),
            });
        }
    }
    reports.shuffle(&mut rng);
    let digits = reports.len().to_string().len();
    for (i, r) in reports.iter_mut().enumerate() {
        r.id = format!("r{:0digits$}", i + 1);
    }

    let prior = (1..=cfg.r_max)
        .map(|r| (r.to_string(), 1.0 / cfg.r_max as f64))
        .collect();
    Ok(CorpusFile {
        frame,
        prior: Some(prior),
        reports,
        decision: None,
    })
}

/// Corpus file content for `cfg`; byte-identical for a fixed config.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<String> {
    let file = generate_file(cfg)?;
    let mut text = serde_json::to_string_pretty(&file).expect("corpus file serializes");
    text.push('\n');
    Ok(text)
}
