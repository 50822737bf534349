//! Majority-rule consensus and per-split branch-length normalization.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::line::SimpleLine;
use crate::split::Split;
use crate::tree::{ordered_sum, Tree};

/// Per-split divisors applied by [`normalize_lengths`]: the mean length of
/// the split over the trees that contain it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaleMap {
    factors: BTreeMap<Split, f64>,
}

impl ScaleMap {
    pub fn factor(&self, p: Split) -> Option<f64> {
        self.factors.get(&p).copied()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Factors in canonical split order.
    pub fn iter(&self) -> impl Iterator<Item = (Split, f64)> + '_ {
        self.factors.iter().map(|(p, f)| (*p, *f))
    }

    /// Divides each length by its split's factor. Splits without a factor
    /// keep their length.
    pub fn scale(&self, x: &Tree) -> Tree {
        x.map_lengths(|p, l| l / self.factor(p).unwrap_or(1.0))
    }

    /// Inverse of [`scale`](Self::scale).
    pub fn restore(&self, x: &Tree) -> Tree {
        x.map_lengths(|p, l| l * self.factor(p).unwrap_or(1.0))
    }
}

fn ensure_shared_taxa(trees: &[Tree]) -> Result<&Tree> {
    let first = trees.first().ok_or(Error::EmptyInput("no trees"))?;
    for t in &trees[1..] {
        first.ensure_same_taxa(t)?;
    }
    Ok(first)
}

/// Every split that occurs in the data with the lengths it takes there, in
/// canonical split order.
fn occurrences(trees: &[Tree]) -> BTreeMap<Split, Vec<f64>> {
    let mut map: BTreeMap<Split, Vec<f64>> = BTreeMap::new();
    for t in trees {
        for &(p, l) in t.entries() {
            map.entry(p).or_default().push(l);
        }
    }
    map
}

/// Mean taken as an offset from the smallest value, so equal values give
/// that value back exactly and the input order does not matter.
fn mean(values: &mut [f64]) -> f64 {
    let n = values.len() as f64;
    values.sort_unstable_by(f64::total_cmp);
    let base = values[0];
    let mut offsets: Vec<f64> = values.iter().map(|v| v - base).collect();
    base + ordered_sum(&mut offsets) / n
}

/// Tree of the splits found in strictly more than half of the trees, each
/// with its mean length over the trees containing it.
pub fn majority_consensus(trees: &[Tree]) -> Result<Tree> {
    let first = ensure_shared_taxa(trees)?;
    let n = trees.len();
    let m = first.n_taxa();
    let entries: Vec<(Split, f64)> = occurrences(trees)
        .into_iter()
        .filter(|(p, lens)| p.is_terminal(m) || 2 * lens.len() > n)
        .map(|(p, mut lens)| (p, mean(&mut lens)))
        .collect();
    Tree::new(first.taxa().clone(), entries)
}

/// Rescales every split so its mean length over the trees containing it is
/// one. Returns the scaled trees and the divisors used.
pub fn normalize_lengths(trees: &[Tree]) -> Result<(Vec<Tree>, ScaleMap)> {
    ensure_shared_taxa(trees)?;
    let factors: BTreeMap<Split, f64> = occurrences(trees)
        .into_iter()
        .map(|(p, mut lens)| (p, mean(&mut lens)))
        .collect();
    let scales = ScaleMap { factors };
    let scaled = trees.iter().map(|t| scales.scale(t)).collect();
    Ok((scaled, scales))
}

/// Maps a line found on normalized data back to the original scale: each
/// weight is multiplied by the factor of its `p`, breakpoints are recomputed
/// against `midpoint`, and the reordered line is checked again.
pub fn back_transform_weights(
    line: &SimpleLine,
    scales: &ScaleMap,
    midpoint: &Tree,
) -> Result<SimpleLine> {
    line.midpoint().ensure_same_taxa(midpoint)?;
    let taxa = midpoint.taxa();
    let mut pairs = Vec::with_capacity(line.len());
    for pr in line.pairs() {
        let factor = match scales.factor(pr.p) {
            Some(f) => f,
            None if line.midpoint().length(pr.p) == 0.0 => 1.0,
            None => {
                return Err(Error::InvalidParameter(format!(
                    "no scale factor for {}",
                    taxa.format_split(pr.p)
                )))
            }
        };
        pairs.push((pr.p, pr.p_prime, pr.w * factor));
    }
    SimpleLine::from_pairs(midpoint.clone(), pairs)
}
