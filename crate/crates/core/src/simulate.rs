//! Two-topology mixtures of trees around a base tree, optionally with two
//! correlated topology changes, plus multiplicative log-normal branch jitter.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::split::{Split, TaxonSet};
use crate::tree::Tree;

#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub base: Tree,
    /// A split of `base` and the NNI alternative that replaces it.
    pub pair: (Split, Split),
    /// Probability of keeping the base split.
    pub theta: f64,
    /// Standard deviation of the log of the per-branch jitter factor.
    pub jitter_sigma: f64,
    pub n: usize,
    pub seed: u64,
    pub second_pair: Option<(Split, Split)>,
    /// Correlation between the two topology indicators.
    pub rho: Option<f64>,
}

/// One simulated tree. `first` is true when the base split of the first
/// pair was kept; `second` likewise for the second pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tree: Tree,
    pub first: bool,
    pub second: Option<bool>,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let taxa = self.base.taxa();
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta {} outside [0, 1]",
                self.theta
            )));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "jitter sigma {} must be non-negative",
                self.jitter_sigma
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        check_pair(&self.base, self.pair)?;
        match (self.second_pair, self.rho) {
            (None, None) => Ok(()),
            (Some(second), Some(rho)) => {
                check_pair(&self.base, second)?;
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(Error::InvalidParameter(format!(
                        "rho {rho} outside [-1, 1]"
                    )));
                }
                let (a, b) = self.pair;
                let (c, d) = second;
                let disjoint = a != c
                    && [a, b]
                        .iter()
                        .all(|x| [c, d].iter().all(|y| x.compatible(*y)));
                if !disjoint {
                    return Err(Error::InvalidParameter(format!(
                        "pairs {} and {} do not act on disjoint parts of the tree",
                        taxa.format_split(a),
                        taxa.format_split(c)
                    )));
                }
                Ok(())
            }
            (Some(_), None) => Err(Error::InvalidParameter("a second pair needs rho".into())),
            (None, Some(_)) => Err(Error::InvalidParameter("rho needs a second pair".into())),
        }
    }
}

fn check_pair(base: &Tree, (p, q): (Split, Split)) -> Result<()> {
    let taxa = base.taxa();
    if p.is_terminal(base.n_taxa()) || !base.contains(p) {
        return Err(Error::InvalidSplit(format!(
            "{} is not an internal split of the base tree",
            taxa.format_split(p)
        )));
    }
    if !base.topology().xnni_replacements(p)?.contains(&q) {
        return Err(Error::InvalidSplit(format!(
            "{} is not an NNI alternative to {}",
            taxa.format_split(q),
            taxa.format_split(p)
        )));
    }
    Ok(())
}

/// Generator for tree `index`: its own stream of the seeded generator.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn build(
    spec: &MixtureSpec,
    first: bool,
    second: Option<bool>,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    let jitter = if spec.jitter_sigma > 0.0 {
        Some(
            LogNormal::new(0.0, spec.jitter_sigma)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?,
        )
    } else {
        None
    };
    let swap = |p: Split| {
        if !first && p == spec.pair.0 {
            return spec.pair.1;
        }
        match (spec.second_pair, second) {
            (Some((a, b)), Some(false)) if p == a => b,
            _ => p,
        }
    };
    let entries: Vec<(Split, f64)> = spec
        .base
        .entries()
        .iter()
        .map(|&(p, l)| {
            let f = jitter.as_ref().map_or(1.0, |d| d.sample(rng));
            (swap(p), l * f)
        })
        .collect();
    Tree::new(spec.base.taxa().clone(), entries)
}

/// `n` trees that keep the base split with probability `theta` and take its
/// alternative otherwise, each branch then jittered.
pub fn simulate_mixture(spec: &MixtureSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    if spec.second_pair.is_some() {
        return Err(Error::InvalidParameter(
            "use simulate_correlated for two pairs".into(),
        ));
    }
    (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(spec.seed, i);
            let first = rng.random::<f64>() < spec.theta;
            let tree = build(spec, first, None, &mut rng)?;
            Ok(Sample {
                tree,
                first,
                second: None,
            })
        })
        .collect()
}

/// Like [`simulate_mixture`] with two pairs whose indicators are both
/// Bernoulli(`theta`) with correlation `rho`, drawn through a Gaussian
/// copula.
pub fn simulate_correlated(spec: &MixtureSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let rho = spec
        .rho
        .ok_or_else(|| Error::InvalidParameter("rho is required".into()))?;
    if spec.second_pair.is_none() {
        return Err(Error::InvalidParameter("a second pair is required".into()));
    }
    let r = latent_correlation(spec.theta, rho)?;
    let cut = threshold(spec.theta);
    let tail = (1.0 - r * r).max(0.0).sqrt();
    (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(spec.seed, i);
            let z1: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let z2 = r * z1 + tail * e;
            let (first, second) = (z1 < cut, z2 < cut);
            let tree = build(spec, first, Some(second), &mut rng)?;
            Ok(Sample {
                tree,
                first,
                second: Some(second),
            })
        })
        .collect()
}

fn threshold(theta: f64) -> f64 {
    if theta <= 0.0 {
        f64::NEG_INFINITY
    } else if theta >= 1.0 {
        f64::INFINITY
    } else {
        Normal::standard().inverse_cdf(theta)
    }
}

/// Smallest correlation two Bernoulli(`theta`) variables can have.
pub fn min_correlation(theta: f64) -> f64 {
    let v = theta * (1.0 - theta);
    ((2.0 * theta - 1.0).max(0.0) - theta * theta) / v
}

/// Correlation of the latent normals that gives Bernoulli(`theta`)
/// indicators correlation `rho`, by bisection.
pub fn latent_correlation(theta: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "theta {theta}, rho {rho} out of range"
        )));
    }
    if theta == 0.0 || theta == 1.0 || rho == 0.0 {
        // constant indicators carry no correlation
        return Ok(0.0);
    }
    if rho == 1.0 {
        return Ok(1.0);
    }
    let lowest = min_correlation(theta);
    if rho < lowest - 1e-12 {
        return Err(Error::Infeasible(format!(
            "correlation {rho} is below the minimum {lowest:.6} for theta {theta}"
        )));
    }
    let target = theta * theta + rho * theta * (1.0 - theta);
    let c = threshold(theta);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bivariate_normal_cdf(c, c, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `P(Z₁ ≤ h, Z₂ ≤ k)` for standard normals with correlation `r`, from
/// Plackett's identity integrated by Simpson's rule in `θ = asin t`.
pub fn bivariate_normal_cdf(h: f64, k: f64, r: f64) -> f64 {
    const STEPS: usize = 2000;
    let normal = Normal::standard();
    let base = normal.cdf(h) * normal.cdf(k);
    let end = r.clamp(-1.0, 1.0).asin();
    if end == 0.0 {
        return base;
    }
    let f = |t: f64| {
        let c2 = t.cos().powi(2);
        let num = h * h + k * k - 2.0 * h * k * t.sin();
        if c2 < 1e-300 {
            // limit at |r| = 1
            return if num.abs() < 1e-300 {
                (-h * h / 2.0).exp()
            } else {
                0.0
            };
        }
        (-num / (2.0 * c2)).exp()
    };
    let step = end / STEPS as f64;
    let mut sum = f(0.0) + f(end);
    for i in 1..STEPS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * step);
    }
    base + sum * step / 3.0 / (2.0 * std::f64::consts::PI)
}

/// Random binary tree by joining random pairs of clusters, with branch
/// lengths uniform on `[lo, hi)`.
pub fn random_tree<R: Rng>(taxa: Arc<TaxonSet>, rng: &mut R, lo: f64, hi: f64) -> Result<Tree> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "length range [{lo}, {hi}) must be positive"
        )));
    }
    let m = taxa.len();
    let len = |rng: &mut R| {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    let mut clusters: Vec<u128> = (0..m).map(|i| 1u128 << i).collect();
    let mut entries = Vec::with_capacity(2 * m - 3);
    for i in 0..m {
        entries.push((Split::terminal(i, m), len(rng)));
    }
    while clusters.len() > 3 {
        let a = clusters.swap_remove(rng.random_range(0..clusters.len()));
        let b = clusters.swap_remove(rng.random_range(0..clusters.len()));
        let joined = a | b;
        entries.push((Split::from_side(joined, m)?, len(rng)));
        clusters.push(joined);
    }
    Tree::new(taxa, entries)
}

/// A random internal split of `base` and one of its NNI alternatives.
pub fn random_nni_pair<R: Rng>(base: &Tree, rng: &mut R) -> Result<(Split, Split)> {
    let internal: Vec<Split> = base.internal_splits().collect();
    if internal.is_empty() {
        return Err(Error::InvalidParameter(
            "base tree has no internal splits".into(),
        ));
    }
    let p = internal[rng.random_range(0..internal.len())];
    let alts = base.topology().xnni_replacements(p)?;
    Ok((p, alts[rng.random_range(0..alts.len())]))
}

/// A random NNI pair of `base` that does not interact with `first`.
pub fn random_disjoint_pair<R: Rng>(
    base: &Tree,
    first: (Split, Split),
    rng: &mut R,
) -> Result<(Split, Split)> {
    let topo = base.topology();
    let mut options = Vec::new();
    for p in base.internal_splits() {
        if p == first.0 {
            continue;
        }
        for q in topo.xnni_replacements(p)? {
            if [p, q]
                .iter()
                .all(|x| x.compatible(first.0) && x.compatible(first.1))
            {
                options.push((p, q));
            }
        }
    }
    if options.is_empty() {
        return Err(Error::Infeasible(
            "no NNI pair disjoint from the first one".into(),
        ));
    }
    Ok(options[rng.random_range(0..options.len())])
}
