//! Frames of discernment, mass functions and Dempster's rule.
//!
//! Subsets of a frame are encoded as bit masks over the frame's element
//! indices, so focal-set lookups are exact. Frames hold at most
//! [`MAX_FRAME`] elements.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest supported frame.
pub const MAX_FRAME: usize = 64;

/// Allowed deviation of a mass function's total from 1.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Focal masses below this after combination are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// An ordered set of hypothesis labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    elements: Vec<String>,
}

impl Frame {
    pub fn new<I, S>(elements: I) -> Result<Arc<Frame>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let elements: Vec<String> = elements.into_iter().map(Into::into).collect();
        if elements.is_empty() {
            return Err(Error::InvalidFrame("frame is empty".into()));
        }
        if elements.len() > MAX_FRAME {
            return Err(Error::InvalidFrame(format!(
                "{} elements exceed the limit of {MAX_FRAME}",
                elements.len()
            )));
        }
        for (i, e) in elements.iter().enumerate() {
            if elements[..i].contains(e) {
                return Err(Error::InvalidFrame(format!("duplicate element '{e}'")));
            }
        }
        Ok(Arc::new(Frame { elements }))
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == label)
    }

    /// The whole frame, Θ.
    pub fn full(&self) -> FocalSet {
        if self.len() == 64 {
            FocalSet(u64::MAX)
        } else {
            FocalSet((1u64 << self.len()) - 1)
        }
    }

    /// Builds a subset from element labels.
    pub fn subset<S: AsRef<str>>(&self, labels: &[S]) -> Result<FocalSet> {
        let mut bits = 0u64;
        for l in labels {
            let l = l.as_ref();
            let i = self
                .index_of(l)
                .ok_or_else(|| Error::UnknownElement(l.to_string()))?;
            bits |= 1 << i;
        }
        Ok(FocalSet(bits))
    }

    pub fn labels(&self, set: FocalSet) -> Vec<&str> {
        set.indices().map(|i| self.elements[i].as_str()).collect()
    }

    fn check(&self, set: FocalSet) -> Result<()> {
        if set.0 & !self.full().0 != 0 {
            let index = 63 - set.0.leading_zeros() as usize;
            return Err(Error::SubsetOutOfFrame {
                index,
                size: self.len(),
            });
        }
        Ok(())
    }
}

/// A subset of a frame, canonically encoded by element index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FocalSet(u64);

impl FocalSet {
    pub const EMPTY: FocalSet = FocalSet(0);

    pub fn from_bits(bits: u64) -> Self {
        FocalSet(bits)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        FocalSet(indices.into_iter().fold(0u64, |acc, i| {
            assert!(i < MAX_FRAME, "element index {i} out of range");
            acc | (1 << i)
        }))
    }

    pub fn singleton(index: usize) -> Self {
        Self::from_indices([index])
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, index: usize) -> bool {
        index < MAX_FRAME && self.0 & (1 << index) != 0
    }

    pub fn intersect(self, other: FocalSet) -> FocalSet {
        FocalSet(self.0 & other.0)
    }

    pub fn union(self, other: FocalSet) -> FocalSet {
        FocalSet(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: FocalSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..MAX_FRAME).filter(move |i| bits & (1 << i) != 0)
    }
}

/// A basic probability assignment over a frame, in normalized Shafer form.
#[derive(Debug, Clone)]
pub struct MassFunction {
    frame: Arc<Frame>,
    focal: BTreeMap<FocalSet, f64>,
}

impl MassFunction {
    /// Validates `entries` into a mass function.
    ///
    /// Zero masses are dropped and duplicate subsets merged. Masses must be
    /// nonnegative, the empty set may not carry mass and the total must be 1
    /// within [`MASS_TOLERANCE`].
    pub fn new(frame: Arc<Frame>, entries: &[(FocalSet, f64)]) -> Result<Self> {
        let mut focal = BTreeMap::new();
        let mut total = 0.0;
        for &(set, mass) in entries {
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidMass(mass));
            }
            frame.check(set)?;
            if mass == 0.0 {
                continue;
            }
            if set.is_empty() {
                return Err(Error::EmptyFocalSet(mass));
            }
            *focal.entry(set).or_insert(0.0) += mass;
            total += mass;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassSum(total));
        }
        for m in focal.values_mut() {
            *m /= total;
        }
        Ok(MassFunction { frame, focal })
    }

    /// Convenience constructor taking element labels.
    pub fn from_labels<S: AsRef<str>>(frame: Arc<Frame>, entries: &[(&[S], f64)]) -> Result<Self> {
        let sets = entries
            .iter()
            .map(|(labels, m)| Ok((frame.subset(labels)?, *m)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frame, &sets)
    }

    /// The vacuous mass function `{Θ → 1}`.
    pub fn vacuous(frame: Arc<Frame>) -> Self {
        let mut focal = BTreeMap::new();
        focal.insert(frame.full(), 1.0);
        MassFunction { frame, focal }
    }

    /// `{set → mass, Θ → 1 − mass}`.
    pub fn simple_support(frame: Arc<Frame>, set: FocalSet, mass: f64) -> Result<Self> {
        let theta = frame.full();
        Self::new(frame, &[(set, mass), (theta, 1.0 - mass)])
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    /// Focal sets with their masses, in canonical order.
    pub fn focal(&self) -> impl Iterator<Item = (FocalSet, f64)> + '_ {
        self.focal.iter().map(|(s, m)| (*s, *m))
    }

    pub fn focal_count(&self) -> usize {
        self.focal.len()
    }

    pub fn mass(&self, set: FocalSet) -> f64 {
        self.focal.get(&set).copied().unwrap_or(0.0)
    }

    pub fn theta_mass(&self) -> f64 {
        self.mass(self.frame.full())
    }

    pub fn total(&self) -> f64 {
        self.focal.values().sum()
    }

    pub fn is_vacuous(&self) -> bool {
        self.focal.len() == 1 && self.theta_mass() > 0.0
    }

    fn same_frame(&self, other: &MassFunction) -> Result<()> {
        if Arc::ptr_eq(&self.frame, &other.frame) || self.frame == other.frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch)
        }
    }

    /// Dempster's rule. Returns the normalized combination and the conflict,
    /// the product mass that fell on the empty set.
    pub fn combine(&self, other: &MassFunction) -> Result<(MassFunction, f64)> {
        self.same_frame(other)?;
        let mut acc: BTreeMap<FocalSet, f64> = BTreeMap::new();
        let mut conflict = 0.0;
        for (&a, &ma) in &self.focal {
            for (&b, &mb) in &other.focal {
                let c = a.intersect(b);
                let m = ma * mb;
                if c.is_empty() {
                    conflict += m;
                } else {
                    *acc.entry(c).or_insert(0.0) += m;
                }
            }
        }
        let conflict = conflict.clamp(0.0, 1.0);
        let kept: f64 = acc.values().sum();
        if kept <= 0.0 {
            return Err(Error::TotalConflict { conflict });
        }
        for m in acc.values_mut() {
            *m /= kept;
        }
        acc.retain(|_, m| *m >= PRUNE_THRESHOLD);
        let kept: f64 = acc.values().sum();
        for m in acc.values_mut() {
            *m /= kept;
        }
        Ok((
            MassFunction {
                frame: self.frame.clone(),
                focal: acc,
            },
            conflict,
        ))
    }

    /// `(Bel(set), Pls(set))`.
    pub fn bel_pls(&self, set: FocalSet) -> Result<(f64, f64)> {
        self.frame.check(set)?;
        let mut bel = 0.0;
        let mut pls = 0.0;
        for (&b, &m) in &self.focal {
            if b.is_subset_of(set) {
                bel += m;
            }
            if !b.intersect(set).is_empty() {
                pls += m;
            }
        }
        Ok((bel.min(1.0), pls.min(1.0)))
    }

    pub fn belief(&self, set: FocalSet) -> Result<f64> {
        Ok(self.bel_pls(set)?.0)
    }

    pub fn plausibility(&self, set: FocalSet) -> Result<f64> {
        Ok(self.bel_pls(set)?.1)
    }

    /// Scales every non-Θ focal mass by `alpha` and moves the deficit to Θ.
    pub fn discount(&self, alpha: f64) -> Result<MassFunction> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidDiscount(alpha));
        }
        let theta = self.frame.full();
        let mut focal = BTreeMap::new();
        let mut moved = 0.0;
        for (&s, &m) in &self.focal {
            if s == theta {
                continue;
            }
            let scaled = m * alpha;
            moved += m - scaled;
            if scaled > 0.0 {
                focal.insert(s, scaled);
            }
        }
        let theta_mass = self.theta_mass() + moved;
        if theta_mass > 0.0 {
            focal.insert(theta, theta_mass);
        }
        Ok(MassFunction {
            frame: self.frame.clone(),
            focal,
        })
    }

    /// Largest absolute focal-mass difference, or `None` across frames.
    pub fn max_difference(&self, other: &MassFunction) -> Option<f64> {
        self.same_frame(other).ok()?;
        let keys = self.focal.keys().chain(other.focal.keys());
        Some(
            keys.map(|k| (self.mass(*k) - other.mass(*k)).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn approx_eq(&self, other: &MassFunction, tol: f64) -> bool {
        self.max_difference(other).is_some_and(|d| d <= tol)
    }
}

impl fmt::Display for MassFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let theta = self.frame.full();
        write!(f, "{{")?;
        for (i, (s, m)) in self.focal().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if s == theta {
                write!(f, "Θ: {m}")?;
            } else {
                write!(f, "{{{}}}: {m}", self.frame.labels(s).join(","))?;
            }
        }
        write!(f, "}}")
    }
}

/// Left fold of Dempster's rule over `ms`.
///
/// The accumulated conflict is `1 − Π(1 − c_step)`, which equals the conflict
/// of combining all inputs simultaneously.
pub fn combine_all(ms: &[MassFunction]) -> Result<(MassFunction, f64)> {
    let (first, rest) = ms
        .split_first()
        .ok_or_else(|| Error::InvalidCorpus("nothing to combine".into()))?;
    let mut acc = first.clone();
    let mut survive = 1.0;
    for m in rest {
        match acc.combine(m) {
            Ok((next, c)) => {
                acc = next;
                survive *= 1.0 - c;
            }
            Err(Error::TotalConflict { .. }) => {
                return Err(Error::TotalConflict { conflict: 1.0 });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((acc, (1.0 - survive).clamp(0.0, 1.0)))
}
