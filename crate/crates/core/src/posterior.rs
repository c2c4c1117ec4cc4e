//! Posterior distribution over the number of targets.
//!
//! Each subset's existence is supported to the degree its reports support
//! anything other than the whole frame. Combining the per-subset simple
//! supports yields mass on "at least k subsets exist", which is then combined
//! with a Bayesian prior over the count.

use crate::error::{Error, Result};
use crate::metacluster::{DomainPrior, EvidenceCorpus};

/// `1 − Π m_e(Θ)` over the reports in `block`.
pub fn subset_support(corpus: &EvidenceCorpus, block: &[usize]) -> f64 {
    let theta: f64 = block
        .iter()
        .map(|&j| corpus.reports()[j].evidence.theta_mass())
        .product();
    (1.0 - theta).clamp(0.0, 1.0)
}

/// Mass on "at least k subsets" for `k = 1..=n` plus the vacuous remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingBpa {
    /// `at_least[k - 1]` is the mass on `{k, k+1, ...}`.
    pub at_least: Vec<f64>,
    pub vacuous: f64,
}

impl CountingBpa {
    pub fn subsets(&self) -> usize {
        self.at_least.len()
    }

    pub fn total(&self) -> f64 {
        self.vacuous + self.at_least.iter().sum::<f64>()
    }

    /// Mass of focal sets containing the count `r`.
    pub fn plausibility_of(&self, r: usize) -> f64 {
        self.vacuous + self.at_least.iter().take(r).sum::<f64>()
    }
}

/// Combines the simple supports `supports[i]` for "subset i exists".
///
/// The mass on "at least k" is the probability that exactly k of the
/// independent supports fire, computed by the polynomial-product recurrence
/// over `Π (1 − s_i + s_i·x)`.
pub fn counting_bpa(supports: &[f64]) -> Result<CountingBpa> {
    if let Some(s) = supports.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidMass(*s));
    }
    let mut coeffs = vec![0.0; supports.len() + 1];
    coeffs[0] = 1.0;
    for (i, &s) in supports.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            coeffs[k] = coeffs[k] * (1.0 - s) + coeffs[k - 1] * s;
        }
        coeffs[0] *= 1.0 - s;
    }
    Ok(CountingBpa {
        vacuous: coeffs[0],
        at_least: coeffs[1..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDistribution {
    /// `probs[r - 1]` for `r ∈ 1..=r_max`.
    pub probs: Vec<f64>,
}

impl PosteriorDistribution {
    pub fn prob(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.probs.get(r - 1).copied().unwrap_or(0.0)
        }
    }

    /// Most probable count; the smallest on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] + 1e-12 {
                best = i;
            }
        }
        best + 1
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }
}

/// Dempster combination of the counting evidence with a Bayesian prior.
///
/// `P(r) ∝ prior(r) · (vacuous + Σ_{k ≤ r} at_least_k)`.
pub fn posterior_distribution(
    cb: &CountingBpa,
    prior: &DomainPrior,
) -> Result<PosteriorDistribution> {
    if cb.subsets() > prior.r_max() {
        return Err(Error::TooManySubsets {
            blocks: cb.subsets(),
            r_max: prior.r_max(),
        });
    }
    let mut cumulative = cb.vacuous;
    let mut unnorm = Vec::with_capacity(prior.r_max());
    for r in 1..=prior.r_max() {
        if let Some(m) = cb.at_least.get(r - 1) {
            cumulative += m;
        }
        unnorm.push(prior.prob(r) * cumulative);
    }
    let z: f64 = unnorm.iter().sum();
    if z <= 0.0 {
        return Err(Error::IncompatiblePrior);
    }
    Ok(PosteriorDistribution {
        probs: unnorm.into_iter().map(|u| u / z).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ds::{FocalSet, Frame, MassFunction};
    use crate::metacluster::Report;

    #[test]
    fn subset_support_examples() {
        let f = Frame::new(["A", "B"]).unwrap();
        let a = FocalSet::singleton(0);
        let reports = vec![
            Report::new(
                "e1",
                MassFunction::simple_support(f.clone(), a, 0.6).unwrap(),
            ),
            Report::new(
                "e2",
                MassFunction::simple_support(f.clone(), a, 0.5).unwrap(),
            ),
            Report::new("e3", MassFunction::vacuous(f.clone())),
            Report::new(
                "e4",
                MassFunction::simple_support(f.clone(), a, 1.0).unwrap(),
            ),
        ];
        let c = EvidenceCorpus::new(f, reports).unwrap();
        assert!((subset_support(&c, &[0, 1]) - 0.8).abs() < 1e-12);
        assert_eq!(subset_support(&c, &[2]), 0.0);
        assert_eq!(subset_support(&c, &[0, 3]), 1.0);
    }

    #[test]
    fn counting_examples() {
        let cb = counting_bpa(&[0.8, 0.5]).unwrap();
        assert!((cb.at_least[0] - 0.5).abs() < 1e-12);
        assert!((cb.at_least[1] - 0.4).abs() < 1e-12);
        assert!((cb.vacuous - 0.1).abs() < 1e-12);

        let cb = counting_bpa(&[1.0]).unwrap();
        assert_eq!(cb.at_least, vec![1.0]);
        assert_eq!(cb.vacuous, 0.0);

        let cb = counting_bpa(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(cb.vacuous, 1.0);
        assert!(cb.at_least.iter().all(|&m| m == 0.0));

        assert!(counting_bpa(&[1.2]).is_err());
    }

    #[test]
    fn posterior_examples() {
        let cb = counting_bpa(&[0.8, 0.5]).unwrap();
        let post = posterior_distribution(&cb, &DomainPrior::uniform(3).unwrap()).unwrap();
        let expect = [0.6 / 2.6, 1.0 / 2.6, 1.0 / 2.6];
        for (p, e) in post.probs.iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
        assert!((post.probs[0] - 0.2308).abs() < 1e-4);
        assert_eq!(post.mode(), 2);

        let prior = DomainPrior::new(vec![0.1, 0.3, 0.6]).unwrap();
        let vac = counting_bpa(&[0.0, 0.0]).unwrap();
        let post = posterior_distribution(&vac, &prior).unwrap();
        assert_eq!(post.probs, prior.probabilities());

        let post = posterior_distribution(&cb, &DomainPrior::certain(2).unwrap()).unwrap();
        assert_eq!(post.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn posterior_errors() {
        let cb = counting_bpa(&[0.8, 0.5, 0.1]).unwrap();
        assert!(matches!(
            posterior_distribution(&cb, &DomainPrior::uniform(2).unwrap()),
            Err(Error::TooManySubsets {
                blocks: 3,
                r_max: 2
            })
        ));
        let cb = counting_bpa(&[1.0, 1.0]).unwrap();
        assert_eq!(
            posterior_distribution(&cb, &DomainPrior::new(vec![1.0, 0.0]).unwrap()),
            Err(Error::IncompatiblePrior)
        );
    }
}
