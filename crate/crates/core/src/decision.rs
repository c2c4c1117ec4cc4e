//! Expected-utility intervals and decisions parameterized by rho.
//!
//! A choice backed by a mass function over a utility frame has an interval
//! `[e_low, e_high]` of expected utility. The parameter `ρ ∈ [0, 1]` picks
//! the point `e_low + ρ·(e_high − e_low)`; a choice's preference under
//! unknown ρ is the length of the ρ-set on which it wins.

use crate::ds::MassFunction;
use crate::error::{Error, Result};

/// Values closer than this are ties.
pub const VALUE_EPSILON: f64 = 1e-12;

/// Mass function over a utility frame with one utility per frame element.
#[derive(Debug, Clone)]
pub struct UtilityBpa {
    mass: MassFunction,
    utilities: Vec<f64>,
}

impl UtilityBpa {
    pub fn new(mass: MassFunction, utilities: Vec<f64>) -> Result<Self> {
        if utilities.len() != mass.frame().len() {
            return Err(Error::InvalidDecision(format!(
                "{} utilities for a frame of {}",
                utilities.len(),
                mass.frame().len()
            )));
        }
        if let Some(u) = utilities.iter().find(|u| !u.is_finite()) {
            return Err(Error::InvalidDecision(format!("utility {u} is not finite")));
        }
        Ok(UtilityBpa { mass, utilities })
    }

    pub fn mass(&self) -> &MassFunction {
        &self.mass
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityIntervalChoice {
    pub id: String,
    pub e_low: f64,
    pub e_high: f64,
}

impl UtilityIntervalChoice {
    pub fn new(id: impl Into<String>, e_low: f64, e_high: f64) -> Result<Self> {
        if !(e_low.is_finite() && e_high.is_finite()) || e_low > e_high {
            return Err(Error::InvalidDecision(format!(
                "interval [{e_low}, {e_high}] is invalid"
            )));
        }
        Ok(UtilityIntervalChoice {
            id: id.into(),
            e_low,
            e_high,
        })
    }

    pub fn value_at(&self, rho: f64) -> f64 {
        self.e_low * (1.0 - rho) + self.e_high * rho
    }

    fn slope(&self) -> f64 {
        self.e_high - self.e_low
    }

    fn same_line(&self, other: &Self) -> bool {
        self.e_low == other.e_low && self.e_high == other.e_high
    }
}

/// `[Σ m(A)·min_A u, Σ m(A)·max_A u]`.
pub fn expected_interval(id: impl Into<String>, u: &UtilityBpa) -> UtilityIntervalChoice {
    let mut low = 0.0;
    let mut high = 0.0;
    for (set, m) in u.mass.focal() {
        let (lo, hi) = set
            .indices()
            .map(|i| u.utilities[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        low += m * lo;
        high += m * hi;
    }
    UtilityIntervalChoice {
        id: id.into(),
        e_low: low,
        e_high: high.max(low),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSegment {
    pub start: f64,
    pub end: f64,
    /// Indices of the winning choices; more than one only for identical
    /// intervals.
    pub winners: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSegmentation {
    pub segments: Vec<RhoSegment>,
    /// Total winning length per choice; sums to 1.
    pub preferences: Vec<f64>,
}

impl RhoSegmentation {
    /// Breakpoints strictly inside (0, 1).
    pub fn crossovers(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

/// Upper envelope of the choices' value lines over `ρ ∈ [0, 1]`.
///
/// At a crossing the right-hand winner (steeper line) takes over.
pub fn rho_segmentation(choices: &[UtilityIntervalChoice]) -> Result<RhoSegmentation> {
    if choices.is_empty() {
        return Err(Error::InvalidDecision("no choices".into()));
    }
    let steepest = |cands: &mut dyn Iterator<Item = usize>| -> usize {
        cands
            .reduce(|best, c| {
                if choices[c].slope() > choices[best].slope() {
                    c
                } else {
                    best
                }
            })
            .expect("nonempty candidate set")
    };

    let top = choices
        .iter()
        .map(|c| c.e_low)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut current =
        steepest(&mut (0..choices.len()).filter(|&c| choices[c].e_low >= top - VALUE_EPSILON));
    let mut rho = 0.0;
    let mut segments = Vec::new();

    loop {
        let cur = &choices[current];
        let mut next: Option<(f64, usize)> = None;
        for (c, other) in choices.iter().enumerate() {
            let rel = other.slope() - cur.slope();
            if rel <= 0.0 {
                continue;
            }
            let cross = ((cur.e_low - other.e_low) / rel).max(rho);
            let better = match next {
                None => true,
                Some((r, b)) => {
                    cross < r - VALUE_EPSILON
                        || (cross <= r + VALUE_EPSILON && other.slope() > choices[b].slope())
                }
            };
            if better {
                next = Some((cross, c));
            }
        }
        let winners: Vec<usize> = (0..choices.len())
            .filter(|&c| choices[c].same_line(cur))
            .collect();
        match next {
            Some((cross, c)) if cross < 1.0 => {
                if cross > rho {
                    segments.push(RhoSegment {
                        start: rho,
                        end: cross,
                        winners,
                    });
                }
                rho = cross;
                current = c;
            }
            _ => {
                segments.push(RhoSegment {
                    start: rho,
                    end: 1.0,
                    winners,
                });
                break;
            }
        }
    }

    let mut preferences = vec![0.0; choices.len()];
    for s in &segments {
        let share = (s.end - s.start) / s.winners.len() as f64;
        for &w in &s.winners {
            preferences[w] += share;
        }
    }
    Ok(RhoSegmentation {
        segments,
        preferences,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMaker {
    pub id: String,
    pub choices: Vec<UtilityIntervalChoice>,
}

fn check_makers(makers: &[DecisionMaker]) -> Result<()> {
    if makers.is_empty() {
        return Err(Error::InvalidDecision("no decision makers".into()));
    }
    if let Some(m) = makers.iter().find(|m| m.choices.is_empty()) {
        return Err(Error::InvalidDecision(format!(
            "decision maker '{}' has no choices",
            m.id
        )));
    }
    Ok(())
}

/// Backward induction over the sequential game at a fixed ρ.
///
/// Decision makers choose in order, each seeing earlier choices and
/// anticipating later ones. Each ranks its alternatives lexicographically:
/// first whether its final value attains the maximum over all decision
/// makers' final choices, then its own value, then list order. Returns the
/// chosen alternative index per decision maker.
pub fn sequential_play(makers: &[DecisionMaker], rho: f64) -> Result<Vec<usize>> {
    check_makers(makers)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidDecision(format!("rho {rho} outside [0, 1]")));
    }
    let values: Vec<Vec<f64>> = makers
        .iter()
        .map(|m| m.choices.iter().map(|c| c.value_at(rho)).collect())
        .collect();
    let mut prefix = Vec::with_capacity(makers.len());
    Ok(induce(&values, &mut prefix))
}

fn induce(values: &[Vec<f64>], prefix: &mut Vec<f64>) -> Vec<usize> {
    let d = prefix.len();
    if d == values.len() {
        return Vec::new();
    }
    let mut best: Option<(bool, f64, Vec<usize>)> = None;
    for (a, &v) in values[d].iter().enumerate() {
        prefix.push(v);
        let rest = induce(values, prefix);
        prefix.pop();
        let max = prefix
            .iter()
            .copied()
            .chain([v])
            .chain(rest.iter().enumerate().map(|(k, &c)| values[d + 1 + k][c]))
            .fold(f64::NEG_INFINITY, f64::max);
        let wins = v >= max - VALUE_EPSILON;
        let improves = match &best {
            None => true,
            Some((bw, bv, _)) => (wins && !bw) || (wins == *bw && v > bv + VALUE_EPSILON),
        };
        if improves {
            let mut plan = vec![a];
            plan.extend(rest);
            best = Some((wins, v, plan));
        }
    }
    best.expect("nonempty choice set").2
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSegment {
    pub start: f64,
    pub end: f64,
    /// Alternative played by each decision maker.
    pub choices: Vec<usize>,
    /// Decision makers whose final value attains the maximum.
    pub winners: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSegmentation {
    pub segments: Vec<GameSegment>,
    /// `preferences[d][a]`: length of ρ on which decision maker `d` plays
    /// `a` and holds the highest value.
    pub preferences: Vec<Vec<f64>>,
}

/// Competitive preference of every alternative under unknown ρ.
///
/// The play is constant between consecutive crossings of any two value
/// lines, so it is evaluated once per such interval.
pub fn competitive_preferences(makers: &[DecisionMaker]) -> Result<GameSegmentation> {
    check_makers(makers)?;
    let lines: Vec<&UtilityIntervalChoice> = makers.iter().flat_map(|m| &m.choices).collect();
    let mut breaks = vec![0.0, 1.0];
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            let rel = a.slope() - b.slope();
            if rel != 0.0 {
                let r = (b.e_low - a.e_low) / rel;
                if r > 0.0 && r < 1.0 {
                    breaks.push(r);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= VALUE_EPSILON);

    let mut preferences: Vec<Vec<f64>> =
        makers.iter().map(|m| vec![0.0; m.choices.len()]).collect();
    let mut segments: Vec<GameSegment> = Vec::new();
    for w in breaks.windows(2) {
        let (start, end) = (w[0], w[1]);
        let mid = 0.5 * (start + end);
        let choices = sequential_play(makers, mid)?;
        let vals: Vec<f64> = choices
            .iter()
            .enumerate()
            .map(|(d, &a)| makers[d].choices[a].value_at(mid))
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..vals.len())
            .filter(|&d| vals[d] >= max - VALUE_EPSILON)
            .collect();
        for &d in &winners {
            preferences[d][choices[d]] += end - start;
        }
        match segments.last_mut() {
            Some(last) if last.choices == choices && last.winners == winners => last.end = end,
            _ => segments.push(GameSegment {
                start,
                end,
                choices,
                winners,
            }),
        }
    }
    Ok(GameSegmentation {
        segments,
        preferences,
    })
}
