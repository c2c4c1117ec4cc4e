//! The self-describing corpus file.
//!
//! ```json
//! {
//!   "frame": ["A", "B"],
//!   "prior": {"1": 0.5, "2": 0.5},
//!   "reports": [
//!     {"id": "e1", "masses": [{"set": ["A"], "mass": 0.6}, {"set": ["A", "B"], "mass": 0.4}],
//!      "time": 0.0, "pos": [1.5, 2.0]}
//!   ],
//!   "decision": {
//!     "utilities": {"lose": 0.0, "win": 1.0},
//!     "makers": [{"id": "dm1", "choices": [{"id": "x", "masses": [{"set": ["win"], "mass": 1.0}]}]}]
//!   }
//! }
//! ```
//!
//! `prior` and `decision` are optional. A report may carry `target`, the
//! ground-truth group written by the scenario generator; it is not used by
//! the analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decision::{expected_interval, DecisionMaker, UtilityBpa};
use crate::ds::{Frame, MassFunction};
use crate::metacluster::{DomainPrior, EvidenceCorpus, Report};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassEntry {
    pub set: Vec<String>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    pub masses: Vec<MassEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceEntry {
    pub id: String,
    pub masses: Vec<MassEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakerEntry {
    pub id: String,
    pub choices: Vec<ChoiceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSection {
    pub utilities: BTreeMap<String, f64>,
    #[serde(default)]
    pub makers: Vec<MakerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub frame: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<BTreeMap<String, f64>>,
    pub reports: Vec<ReportEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestErrorKind {
    Io,
    Syntax,
    Validation,
}

/// An ingestion failure with its location in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestError {
    pub kind: IngestErrorKind,
    pub source: String,
    /// `line:column` for syntax errors, a JSON path otherwise.
    pub location: String,
    pub message: String,
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.location.is_empty() {
            write!(f, "{}: {}", self.source, self.message)
        } else {
            write!(f, "{}: {}: {}", self.source, self.location, self.message)
        }
    }
}

impl std::error::Error for IngestError {}

/// A validated corpus file.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: EvidenceCorpus,
    pub prior: Option<DomainPrior>,
    /// `None` when the file has no decision problem.
    pub decision: Option<Vec<DecisionMaker>>,
    /// Ground-truth groups, when every report carries one.
    pub truth: Option<Vec<usize>>,
}

pub fn ingest_corpus(path: &Path) -> Result<Ingested, IngestError> {
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| IngestError {
        kind: IngestErrorKind::Io,
        source: source.clone(),
        location: String::new(),
        message: e.to_string(),
    })?;
    parse_corpus(&text, &source)
}

pub fn parse_corpus(text: &str, source: &str) -> Result<Ingested, IngestError> {
    let file: CorpusFile = serde_json::from_str(text).map_err(|e| IngestError {
        kind: IngestErrorKind::Syntax,
        source: source.to_string(),
        location: format!("{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    validate(&file, source)
}

fn masses_to_function(
    frame: &Arc<Frame>,
    masses: &[MassEntry],
    fail: &dyn Fn(String, String) -> IngestError,
    at: &str,
) -> Result<MassFunction, IngestError> {
    let mut entries = Vec::with_capacity(masses.len());
    for (k, m) in masses.iter().enumerate() {
        let set = frame
            .subset(&m.set)
            .map_err(|e| fail(format!("{at}.masses[{k}]"), e.to_string()))?;
        entries.push((set, m.mass));
    }
    MassFunction::new(frame.clone(), &entries).map_err(|e| fail(at.to_string(), e.to_string()))
}

pub fn validate(file: &CorpusFile, source: &str) -> Result<Ingested, IngestError> {
    let fail = |location: String, message: String| IngestError {
        kind: IngestErrorKind::Validation,
        source: source.to_string(),
        location,
        message,
    };

    let frame =
        Frame::new(file.frame.iter().cloned()).map_err(|e| fail("frame".into(), e.to_string()))?;

    let mut reports = Vec::with_capacity(file.reports.len());
    for (i, r) in file.reports.iter().enumerate() {
        let at = format!("reports[{i}] (id '{}')", r.id);
        if file.reports[..i].iter().any(|o| o.id == r.id) {
            return Err(fail(at, format!("duplicate report id '{}'", r.id)));
        }
        let evidence = masses_to_function(&frame, &r.masses, &fail, &at)?;
        if let Some(t) = r.time {
            if !t.is_finite() {
                return Err(fail(at, format!("time {t} is not finite")));
            }
        }
        if let Some(p) = r.pos {
            if !p.iter().all(|x| x.is_finite()) {
                return Err(fail(at, "position is not finite".into()));
            }
        }
        reports.push(Report {
            id: r.id.clone(),
            evidence,
            time: r.time,
            pos: r.pos,
        });
    }
    let corpus =
        EvidenceCorpus::new(frame, reports).map_err(|e| fail("reports".into(), e.to_string()))?;

    let prior = match &file.prior {
        None => None,
        Some(map) => {
            let mut parsed = Vec::with_capacity(map.len());
            for (k, &p) in map {
                let r: usize = k.parse().ok().filter(|&r| r >= 1).ok_or_else(|| {
                    fail(
                        format!("prior.\"{k}\""),
                        "subset count must be an integer ≥ 1".into(),
                    )
                })?;
                parsed.push((r, p));
            }
            let r_max = parsed.iter().map(|e| e.0).max().unwrap_or(0);
            let mut probs = vec![0.0; r_max];
            for (r, p) in parsed {
                probs[r - 1] = p;
            }
            Some(DomainPrior::new(probs).map_err(|e| fail("prior".into(), e.to_string()))?)
        }
    };

    let decision = match &file.decision {
        Some(d) if !d.makers.is_empty() => Some(decision_makers(d, &fail)?),
        _ => None,
    };

    let truth = file
        .reports
        .iter()
        .map(|r| r.target)
        .collect::<Option<Vec<_>>>();

    Ok(Ingested {
        corpus,
        prior,
        decision,
        truth,
    })
}

fn decision_makers(
    d: &DecisionSection,
    fail: &dyn Fn(String, String) -> IngestError,
) -> Result<Vec<DecisionMaker>, IngestError> {
    let frame = Frame::new(d.utilities.keys().cloned())
        .map_err(|e| fail("decision.utilities".into(), e.to_string()))?;
    let utilities: Vec<f64> = d.utilities.values().copied().collect();
    let mut makers = Vec::with_capacity(d.makers.len());
    for (i, m) in d.makers.iter().enumerate() {
        if m.choices.is_empty() {
            return Err(fail(
                format!("decision.makers[{i}] (id '{}')", m.id),
                "no choices".into(),
            ));
        }
        let mut choices = Vec::with_capacity(m.choices.len());
        for (k, c) in m.choices.iter().enumerate() {
            let at = format!("decision.makers[{i}].choices[{k}] (id '{}')", c.id);
            let mass = masses_to_function(&frame, &c.masses, fail, &at)?;
            let bpa = UtilityBpa::new(mass, utilities.clone())
                .map_err(|e| fail(at.clone(), e.to_string()))?;
            choices.push(expected_interval(c.id.clone(), &bpa));
        }
        makers.push(DecisionMaker {
            id: m.id.clone(),
            choices,
        });
    }
    Ok(makers)
}
