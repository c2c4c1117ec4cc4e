//! Track analysis over a complete DAG of position reports.
//!
//! Vertices are ranked position reports, each with a mass `p_i` supporting
//! "the target was here". Every ordered pair `i < j` carries a mass `q_ij`
//! against the direct transition `i → j`. The frame is the set of all
//! nonempty vertex subsets, read as tracks visiting their members in rank
//! order.
//!
//! Under this model the unnormalized plausibility of a track has the closed
//! form `Π_{i ∉ path}(1 − p_i) · Π_{consecutive (i,j)}(1 − q_ij)`, which the
//! DP maximizes in O(n²·k). [`combine_oracle`] is the exact step-by-step
//! combination, feasible only for small graphs.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::exec;

/// Largest graph [`combine_oracle`] will enumerate (21 pieces of evidence).
pub const ORACLE_MAX_VERTICES: usize = 6;

/// Default ceiling on kinematic edge masses.
pub const DEFAULT_Q_CAP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    /// Seconds.
    pub time: f64,
    /// Kilometers.
    pub pos: [f64; 2],
}

/// Mass against the direct transition `a → b` given a speed limit in km/h.
///
/// Zero when the required speed is within `v_max`, otherwise
/// `min(q_cap, 1 − v_max / v)`. A non-positive time difference yields
/// `q_cap`.
pub fn kinematic_edge_mass(a: &Waypoint, b: &Waypoint, v_max: f64, q_cap: f64) -> f64 {
    let dt_hours = (b.time - a.time) / 3600.0;
    if dt_hours <= 0.0 || v_max <= 0.0 {
        return q_cap;
    }
    let dist = (b.pos[0] - a.pos[0]).hypot(b.pos[1] - a.pos[1]);
    let speed = dist / dt_hours;
    if speed <= v_max {
        0.0
    } else {
        q_cap.min(1.0 - v_max / speed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackVertex {
    pub label: String,
    pub waypoint: Option<Waypoint>,
    /// Support for the target having been at this vertex.
    pub p: f64,
}

impl TrackVertex {
    pub fn new(label: impl Into<String>, p: f64) -> Self {
        TrackVertex {
            label: label.into(),
            waypoint: None,
            p,
        }
    }
}

/// Ranked vertices with vertex masses and a complete set of edge masses.
#[derive(Debug)]
pub struct TrackGraph {
    vertices: Vec<TrackVertex>,
    /// Row-major `n × n`; only `i < j` is meaningful.
    q: Vec<f64>,
    conflict: OnceLock<Option<f64>>,
}

impl Clone for TrackGraph {
    fn clone(&self) -> Self {
        TrackGraph {
            vertices: self.vertices.clone(),
            q: self.q.clone(),
            conflict: self.conflict.clone(),
        }
    }
}

fn check_mass(what: &str, m: f64) -> Result<()> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::InvalidGraph(format!("{what} = {m} outside [0, 1)")));
    }
    Ok(())
}

impl TrackGraph {
    /// Builds a graph with `edge(i, j)` for every `i < j`.
    pub fn new<F>(vertices: Vec<TrackVertex>, mut edge: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            check_mass(&format!("p[{i}]"), v.p)?;
        }
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let m = edge(i, j);
                check_mass(&format!("q[{i}][{j}]"), m)?;
                q[i * n + j] = m;
            }
        }
        Ok(TrackGraph {
            vertices,
            q,
            conflict: OnceLock::new(),
        })
    }

    /// Graph from bare masses: `q_upper[i][j - i - 1]` is `q_ij`.
    pub fn from_masses(p: &[f64], q_upper: &[Vec<f64>]) -> Result<Self> {
        let n = p.len();
        if q_upper.len() + 1 < n || (0..n).any(|i| i + 1 < n && q_upper[i].len() != n - i - 1) {
            return Err(Error::InvalidGraph(
                "edge mass table does not match vertex count".into(),
            ));
        }
        let vertices = p
            .iter()
            .enumerate()
            .map(|(i, &p)| TrackVertex::new(format!("{}", i + 1), p))
            .collect();
        Self::new(vertices, |i, j| q_upper[i][j - i - 1])
    }

    /// Graph whose edge masses come from [`kinematic_edge_mass`]. Every
    /// vertex needs a waypoint; vertices must already be in rank order.
    pub fn kinematic(vertices: Vec<TrackVertex>, v_max: f64, q_cap: f64) -> Result<Self> {
        if v_max <= 0.0 {
            return Err(Error::InvalidGraph(format!(
                "speed limit {v_max} must be positive"
            )));
        }
        check_mass("q_cap", q_cap)?;
        let wps = vertices
            .iter()
            .map(|v| {
                v.waypoint.ok_or_else(|| {
                    Error::InvalidGraph(format!("vertex '{}' has no waypoint", v.label))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vertices, |i, j| {
            kinematic_edge_mass(&wps[i], &wps[j], v_max, q_cap)
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[TrackVertex] {
        &self.vertices
    }

    pub fn p(&self, i: usize) -> f64 {
        self.vertices[i].p
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        assert!(i < j && j < self.len(), "edge ({i}, {j}) is not ranked");
        self.q[i * self.len() + j]
    }

    /// Conflict of the full combination, when the oracle can compute it.
    pub fn total_conflict(&self) -> Option<f64> {
        *self
            .conflict
            .get_or_init(|| combine_oracle(self).ok().map(|a| a.conflict))
    }

    /// Graphviz rendering with `p` on vertices and `q` on edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph track {\n  rankdir=LR;\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(
                out,
                "  v{i} [label=\"{}\\np={:.6}\"];",
                v.label.replace('"', "\\\""),
                v.p
            );
        }
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let _ = writeln!(out, "  v{i} -> v{j} [label=\"{:.6}\"];", self.q(i, j));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// A strictly increasing, nonempty vertex sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackPath(Vec<usize>);

impl TrackPath {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidGraph("empty path".into()));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGraph(format!(
                "path {vertices:?} is not strictly increasing"
            )));
        }
        Ok(TrackPath(vertices))
    }

    /// Path visiting the set bits of `mask` in order.
    pub fn from_mask(mask: u64) -> Self {
        TrackPath((0..64).filter(|i| mask & (1 << i) != 0).collect())
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | (1 << i))
    }

    /// All nonempty paths over `n` vertices, in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = TrackPath> {
        (1u64..(1u64 << n)).map(TrackPath::from_mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPlausibility {
    pub unnormalized: f64,
    /// `None` when the graph exceeds the oracle limit.
    pub normalized: Option<f64>,
}

fn unnormalized_plausibility(g: &TrackGraph, path: &[usize]) -> f64 {
    let mut on = vec![false; g.len()];
    for &v in path {
        on[v] = true;
    }
    let vertices: f64 = (0..g.len())
        .filter(|&i| !on[i])
        .map(|i| 1.0 - g.p(i))
        .product();
    let edges: f64 = path.windows(2).map(|w| 1.0 - g.q(w[0], w[1])).product();
    vertices * edges
}

pub fn path_plausibility(g: &TrackGraph, path: &TrackPath) -> Result<PathPlausibility> {
    if path.0.last().is_some_and(|&v| v >= g.len()) {
        return Err(Error::InvalidGraph(format!(
            "path {:?} leaves the graph",
            path.0
        )));
    }
    let unnormalized = unnormalized_plausibility(g, &path.0);
    let normalized = g.total_conflict().map(|c| unnormalized / (1.0 - c));
    Ok(PathPlausibility {
        unnormalized,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathScore {
    pub path: TrackPath,
    /// Belief of the singleton `{path}`.
    pub support: f64,
    pub plausibility: f64,
    pub unnormalized_plausibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackAnalysis {
    pub conflict: f64,
    /// Every nonempty path, in mask order.
    pub paths: Vec<PathScore>,
}

impl TrackAnalysis {
    pub fn get(&self, path: &TrackPath) -> Option<&PathScore> {
        let idx = path.mask().checked_sub(1)? as usize;
        self.paths.get(idx)
    }

    /// Paths ordered by plausibility, ties to the lexicographically smaller.
    pub fn ranked(&self) -> Vec<&PathScore> {
        let mut v: Vec<&PathScore> = self.paths.iter().collect();
        v.sort_by(|a, b| {
            b.unnormalized_plausibility
                .total_cmp(&a.unnormalized_plausibility)
                .then_with(|| a.path.cmp(&b.path))
        });
        v
    }
}

/// Exact combination of all vertex and edge evidence by enumerating every
/// selection of focal-versus-Θ outcomes.
///
/// Frame element `m − 1` stands for the path with vertex mask `m`. Vertex
/// evidence `i` has focal set "paths containing i"; edge evidence `(i, j)`
/// has focal set "paths not stepping directly from i to j".
pub fn combine_oracle(g: &TrackGraph) -> Result<TrackAnalysis> {
    let n = g.len();
    if n > ORACLE_MAX_VERTICES {
        return Err(Error::OracleLimit {
            n,
            limit: ORACLE_MAX_VERTICES,
        });
    }
    let path_count = (1usize << n) - 1;
    let full: u64 = if path_count == 64 {
        u64::MAX
    } else {
        (1u64 << path_count) - 1
    };

    let mut evidence: Vec<(u64, f64)> = Vec::new();
    for i in 0..n {
        let focal = (1..=path_count as u64)
            .filter(|m| m & (1 << i) != 0)
            .fold(0u64, |f, m| f | (1 << (m - 1)));
        evidence.push((focal, g.p(i)));
    }
    for i in 0..n {
        for j in i + 1..n {
            let between: u64 = ((1u64 << j) - 1) & !((1u64 << (i + 1)) - 1);
            let focal = (1..=path_count as u64)
                .filter(|m| !(m & (1 << i) != 0 && m & (1 << j) != 0 && m & between == 0))
                .fold(0u64, |f, m| f | (1 << (m - 1)));
            evidence.push((focal, g.q(i, j)));
        }
    }

    // Fan out over the outcomes of the first few pieces of evidence.
    let split = evidence.len().min(6);
    let (head, tail) = evidence.split_at(split);
    let partials = exec::map_range(1 << split, |prefix| {
        let mut focal = full;
        let mut mass = 1.0;
        for (b, &(f, m)) in head.iter().enumerate() {
            if prefix & (1 << b) != 0 {
                focal &= f;
                mass *= m;
            } else {
                mass *= 1.0 - m;
            }
        }
        let mut acc: HashMap<u64, f64> = HashMap::new();
        if mass > 0.0 {
            enumerate(tail, focal, mass, &mut acc);
        }
        let mut v: Vec<(u64, f64)> = acc.into_iter().collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    });

    let mut focal_masses: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    for part in partials {
        for (f, m) in part {
            *focal_masses.entry(f).or_insert(0.0) += m;
        }
    }

    let conflict = focal_masses.get(&0).copied().unwrap_or(0.0);
    let norm = 1.0 - conflict;
    let paths = (0..path_count)
        .map(|e| {
            let bit = 1u64 << e;
            let unnorm: f64 = focal_masses
                .iter()
                .filter(|(f, _)| *f & bit != 0)
                .map(|(_, m)| m)
                .sum();
            let singleton = focal_masses.get(&bit).copied().unwrap_or(0.0);
            PathScore {
                path: TrackPath::from_mask(e as u64 + 1),
                support: singleton / norm,
                plausibility: unnorm / norm,
                unnormalized_plausibility: unnorm,
            }
        })
        .collect();
    Ok(TrackAnalysis { conflict, paths })
}

fn enumerate(rest: &[(u64, f64)], focal: u64, mass: f64, acc: &mut HashMap<u64, f64>) {
    match rest.split_first() {
        None => *acc.entry(focal).or_insert(0.0) += mass,
        Some((&(f, m), tail)) => {
            if m > 0.0 {
                enumerate(tail, focal & f, mass * m, acc);
            }
            if m < 1.0 {
                enumerate(tail, focal, mass * (1.0 - m), acc);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPath {
    pub path: TrackPath,
    pub unnormalized: f64,
}

struct Partial {
    score: f64,
    path: Vec<usize>,
}

fn rank(a_score: f64, a_path: &[usize], b_score: f64, b_path: &[usize]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_path.cmp(b_path))
}

/// The `top_k` most plausible paths by longest-path DP over the DAG.
///
/// Path score is `Σ_{i ∈ path} −ln(1 − p_i) + Σ_{consecutive} ln(1 − q_ij)`,
/// the log of the plausibility product with `Π_all(1 − p_i)` factored out.
/// Each vertex keeps its k best paths ending there; ties go to the
/// lexicographically smaller vertex sequence.
pub fn best_path_dp(g: &TrackGraph, top_k: usize) -> Vec<RankedPath> {
    let n = g.len();
    if top_k == 0 || n == 0 {
        return Vec::new();
    }
    let gain: Vec<f64> = (0..n).map(|i| -(-g.p(i)).ln_1p()).collect();
    let mut ending: Vec<Vec<Partial>> = Vec::with_capacity(n);

    for (j, &gain_j) in gain.iter().enumerate() {
        // (score, predecessor vertex, rank in its list)
        let mut cands: Vec<(f64, Option<(usize, usize)>)> = vec![(gain_j, None)];
        for (i, list) in ending.iter().enumerate() {
            let step = (-g.q(i, j)).ln_1p() + gain_j;
            cands.extend(
                list.iter()
                    .enumerate()
                    .map(|(r, e)| (e.score + step, Some((i, r)))),
            );
        }
        let prefix = |c: &Option<(usize, usize)>| -> &[usize] {
            match c {
                Some((i, r)) => &ending[*i][*r].path,
                None => &[],
            }
        };
        // Every candidate ends in j, so prefixes decide lexicographic order.
        let cmp = |a: &(f64, Option<(usize, usize)>), b: &(f64, Option<(usize, usize)>)| {
            let ord = b.0.total_cmp(&a.0);
            if ord != Ordering::Equal {
                return ord;
            }
            let (pa, pb) = (prefix(&a.1), prefix(&b.1));
            // The bare [j] sorts after any [i, .., j] with i < j.
            match (pa.is_empty(), pb.is_empty()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                (false, false) => pa.cmp(pb),
            }
        };
        if cands.len() > top_k {
            cands.select_nth_unstable_by(top_k - 1, cmp);
            cands.truncate(top_k);
        }
        cands.sort_by(cmp);
        let list = cands
            .iter()
            .map(|(score, c)| {
                let mut path = prefix(c).to_vec();
                path.push(j);
                Partial {
                    score: *score,
                    path,
                }
            })
            .collect();
        ending.push(list);
    }

    let mut all: Vec<Partial> = ending.into_iter().flatten().collect();
    all.sort_by(|a, b| rank(a.score, &a.path, b.score, &b.path));
    all.truncate(top_k);
    all.into_iter()
        .map(|p| RankedPath {
            unnormalized: unnormalized_plausibility(g, &p.path),
            path: TrackPath(p.path),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> TrackGraph {
        TrackGraph::from_masses(&[0.9, 0.5, 0.8], &[vec![0.2, 0.9], vec![0.1]]).unwrap()
    }

    fn path(v: &[usize]) -> TrackPath {
        TrackPath::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kinematic_examples() {
        let at = |t: f64, x: f64| Waypoint {
            time: t,
            pos: [x, 0.0],
        };
        assert_eq!(
            kinematic_edge_mass(&at(0.0, 0.0), &at(3600.0, 10.0), 25.0, 0.999),
            0.0
        );
        let q = kinematic_edge_mass(&at(0.0, 0.0), &at(7200.0, 100.0), 25.0, 0.999);
        assert!((q - 0.5).abs() < 1e-12);
        assert_eq!(
            kinematic_edge_mass(&at(5.0, 0.0), &at(5.0, 1.0), 25.0, 0.999),
            0.999
        );
        assert_eq!(
            kinematic_edge_mass(&at(0.0, 0.0), &at(1.0, 1000.0), 25.0, 0.9),
            0.9
        );
    }

    #[test]
    fn graph_validation() {
        assert!(TrackGraph::from_masses(&[1.0], &[]).is_err());
        assert!(TrackGraph::from_masses(&[0.5, 0.5], &[vec![1.0]]).is_err());
        assert!(TrackGraph::from_masses(&[0.5, 0.5], &[vec![]]).is_err());
        assert!(TrackGraph::from_masses(&[], &[]).is_err());
        assert!(TrackPath::new(vec![2, 1]).is_err());
        assert!(TrackPath::new(vec![]).is_err());
        let v = vec![TrackVertex::new("a", 0.5)];
        assert!(TrackGraph::kinematic(v, 25.0, 0.999).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let g = three();
        let full = path_plausibility(&g, &path(&[0, 1, 2])).unwrap();
        assert!((full.unnormalized - 0.72).abs() < 1e-12);
        let skip = path_plausibility(&g, &path(&[0, 2])).unwrap();
        assert!((skip.unnormalized - 0.05).abs() < 1e-12);
        assert!(skip.normalized.is_some());

        let zero = TrackGraph::from_masses(&[0.0; 3], &[vec![0.0, 0.0], vec![0.0]]).unwrap();
        for p in TrackPath::all(3) {
            assert_eq!(path_plausibility(&zero, &p).unwrap().unnormalized, 1.0);
        }
        assert!(path_plausibility(&g, &path(&[3])).is_err());
    }

    #[test]
    fn oracle_two_vertex_example() {
        let g = TrackGraph::from_masses(&[0.6, 0.5], &[vec![0.3]]).unwrap();
        let a = combine_oracle(&g).unwrap();
        assert!((a.conflict - 0.09).abs() < 1e-12);
        let both = a.get(&path(&[0, 1])).unwrap();
        assert!((both.support - 0.21 / 0.91).abs() < 1e-12);
        assert!((both.plausibility - 0.70 / 0.91).abs() < 1e-12);
        let first = a.get(&path(&[0])).unwrap();
        assert!((first.unnormalized_plausibility - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_vacuous_and_limit() {
        let g = TrackGraph::from_masses(&[0.0, 0.0], &[vec![0.0]]).unwrap();
        let a = combine_oracle(&g).unwrap();
        assert_eq!(a.conflict, 0.0);
        assert!(a
            .paths
            .iter()
            .all(|p| p.plausibility == 1.0 && p.support == 0.0));

        let big = TrackGraph::new(
            (0..7)
                .map(|i| TrackVertex::new(i.to_string(), 0.1))
                .collect(),
            |_, _| 0.1,
        )
        .unwrap();
        assert_eq!(
            combine_oracle(&big).unwrap_err(),
            Error::OracleLimit { n: 7, limit: 6 }
        );
        assert!(path_plausibility(&big, &path(&[0]))
            .unwrap()
            .normalized
            .is_none());
    }

    #[test]
    fn oracle_matches_closed_form_on_three() {
        let g = three();
        let a = combine_oracle(&g).unwrap();
        for s in &a.paths {
            let cf = path_plausibility(&g, &s.path).unwrap();
            assert!((cf.unnormalized - s.unnormalized_plausibility).abs() < 1e-12);
            assert!((cf.normalized.unwrap() - s.plausibility).abs() < 1e-12);
            assert!(s.support <= s.plausibility + 1e-15);
        }
    }

    #[test]
    fn dp_examples() {
        let best = best_path_dp(&three(), 1);
        assert_eq!(best[0].path, path(&[0, 1, 2]));
        assert!((best[0].unnormalized - 0.72).abs() < 1e-12);

        let zero = TrackGraph::from_masses(&[0.0; 3], &[vec![0.0, 0.0], vec![0.0]]).unwrap();
        let best = best_path_dp(&zero, 7);
        assert_eq!(best[0].path, path(&[0]));
        assert_eq!(best[0].unnormalized, 1.0);
        let order: Vec<Vec<usize>> = best.iter().map(|r| r.path.vertices().to_vec()).collect();
        assert_eq!(
            order,
            vec![
                vec![0],
                vec![0, 1],
                vec![0, 1, 2],
                vec![0, 2],
                vec![1],
                vec![1, 2],
                vec![2]
            ]
        );

        let skip =
            TrackGraph::from_masses(&[0.5, 0.9, 0.5], &[vec![0.99, 0.0], vec![0.99]]).unwrap();
        // Among the paths from the first to the last vertex, skipping the
        // middle wins: 0.1 against 0.0001. The middle vertex alone scores
        // 0.5·0.5 and is the overall best.
        let best = best_path_dp(&skip, 7);
        let score = |v: &[usize]| {
            best.iter()
                .find(|r| r.path.vertices() == v)
                .unwrap()
                .unnormalized
        };
        assert!((score(&[0, 2]) - 0.1).abs() < 1e-12);
        assert!((score(&[0, 1, 2]) - 0.0001).abs() < 1e-12);
        assert_eq!(best[0].path, path(&[1]));
        assert!((best[0].unnormalized - 0.25).abs() < 1e-12);
        assert!(best_path_dp(&skip, 0).is_empty());
    }

    #[test]
    fn dp_top_k_matches_exhaustive_ranking() {
        let g = TrackGraph::from_masses(
            &[0.3, 0.7, 0.2, 0.6],
            &[vec![0.1, 0.5, 0.2], vec![0.4, 0.05], vec![0.3]],
        )
        .unwrap();
        let dp = best_path_dp(&g, 15);
        let mut exhaustive: Vec<(f64, TrackPath)> = TrackPath::all(4)
            .map(|p| (path_plausibility(&g, &p).unwrap().unnormalized, p))
            .collect();
        exhaustive.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        assert_eq!(dp.len(), 15);
        for (d, e) in dp.iter().zip(&exhaustive) {
            assert_eq!(d.path, e.1);
        }
    }

    #[test]
    fn dot_export() {
        let dot = three().to_dot();
        assert!(dot.starts_with("digraph track {"));
        assert!(dot.contains("v0 [label=\"1\\np=0.900000\"];"));
        assert!(dot.contains("v0 -> v2 [label=\"0.900000\"];"));
        assert_eq!(dot.matches("->").count(), 3);
    }
}
