//! Trees as weighted split sets, i.e. points of tree-space under the vector
//! embedding that assigns each split its branch length.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::split::{Split, TaxonSet, Topology};

/// An unrooted tree with strictly positive branch lengths.
///
/// Splits are kept sorted by their canonical bits; splits absent from the
/// tree have length zero.
#[derive(Debug, Clone)]
pub struct Tree {
    taxa: Arc<TaxonSet>,
    splits: Vec<(Split, f64)>,
}

impl Tree {
    /// Validating constructor. Requires every terminal split, positive finite
    /// lengths and pairwise-compatible splits.
    pub fn new<I>(taxa: Arc<TaxonSet>, lengths: I) -> Result<Tree>
    where
        I: IntoIterator<Item = (Split, f64)>,
    {
        let m = taxa.len();
        let mut splits: Vec<(Split, f64)> = lengths.into_iter().collect();
        splits.sort_by_key(|(p, _)| *p);
        for w in splits.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidSplit(format!(
                    "{} listed twice",
                    taxa.format_split(w[0].0)
                )));
            }
        }
        for &(p, len) in &splits {
            if p.bits() & !taxa.full_mask() != 0 {
                return Err(Error::InvalidSplit("taxon index out of range".into()));
            }
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::NonPositiveLength(len));
            }
        }
        let internal: Vec<Split> = splits
            .iter()
            .map(|(p, _)| *p)
            .filter(|p| !p.is_terminal(m))
            .collect();
        for (i, p) in internal.iter().enumerate() {
            for q in &internal[..i] {
                if !p.compatible(*q) {
                    return Err(Error::IncompatibleSplits(
                        taxa.format_split(*q),
                        taxa.format_split(*p),
                    ));
                }
            }
        }
        let terminals = splits.len() - internal.len();
        if terminals != m {
            return Err(Error::InvalidSplit(format!(
                "tree has {terminals} of {m} terminal splits"
            )));
        }
        debug_assert!(splits.len() <= 2 * m - 3);
        Ok(Tree { taxa, splits })
    }

    /// Builds a tree from sorted, positive, compatible splits. Only checked in
    /// debug builds.
    pub(crate) fn from_sorted_unchecked(taxa: Arc<TaxonSet>, splits: Vec<(Split, f64)>) -> Tree {
        let tree = Tree { taxa, splits };
        debug_assert!(tree.check().is_ok(), "{:?}", tree.check());
        tree
    }

    /// Builds a tree from unsorted entries, dropping non-positive lengths.
    pub(crate) fn from_unsorted_unchecked(
        taxa: Arc<TaxonSet>,
        mut splits: Vec<(Split, f64)>,
    ) -> Tree {
        splits.retain(|(_, l)| *l > 0.0);
        splits.sort_by_key(|(p, _)| *p);
        Tree::from_sorted_unchecked(taxa, splits)
    }

    /// Re-runs the constructor invariants.
    pub fn check(&self) -> Result<()> {
        Tree::new(self.taxa.clone(), self.splits.iter().copied()).map(|_| ())
    }

    pub fn taxa(&self) -> &Arc<TaxonSet> {
        &self.taxa
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    /// `(split, length)` entries in canonical split order, terminals included.
    pub fn entries(&self) -> &[(Split, f64)] {
        &self.splits
    }

    pub fn splits(&self) -> impl Iterator<Item = Split> + '_ {
        self.splits.iter().map(|(p, _)| *p)
    }

    pub fn internal_splits(&self) -> impl Iterator<Item = Split> + '_ {
        let m = self.n_taxa();
        self.splits().filter(move |p| !p.is_terminal(m))
    }

    pub fn topology(&self) -> Topology {
        Topology::from_sorted_unchecked(self.n_taxa(), self.internal_splits().collect())
    }

    /// Branch length of `p`, zero if absent.
    pub fn length(&self, p: Split) -> f64 {
        match self.splits.binary_search_by_key(&p, |(q, _)| *q) {
            Ok(i) => self.splits[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, p: Split) -> bool {
        self.splits.binary_search_by_key(&p, |(q, _)| *q).is_ok()
    }

    pub fn same_taxa(&self, other: &Tree) -> bool {
        Arc::ptr_eq(&self.taxa, &other.taxa) || *self.taxa == *other.taxa
    }

    pub(crate) fn ensure_same_taxa(&self, other: &Tree) -> Result<()> {
        if self.same_taxa(other) {
            Ok(())
        } else {
            Err(Error::TaxonMismatch)
        }
    }

    /// Returns a copy with every length transformed by `f(split, length)`.
    /// Entries mapped to a non-positive value are dropped.
    pub fn map_lengths<F>(&self, mut f: F) -> Tree
    where
        F: FnMut(Split, f64) -> f64,
    {
        let splits = self
            .splits
            .iter()
            .map(|&(p, l)| (p, f(p, l)))
            .filter(|(_, l)| *l > 0.0)
            .collect();
        Tree::from_sorted_unchecked(self.taxa.clone(), splits)
    }
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.same_taxa(other) && self.splits == other.splits
    }
}

/// Sums after sorting, so the result does not depend on the order the terms
/// were produced in.
pub(crate) fn ordered_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Visits every split of `x ∪ y` in canonical order with both lengths.
pub(crate) fn merge_entries<F>(x: &Tree, y: &Tree, mut f: F)
where
    F: FnMut(Split, f64, f64),
{
    let (a, b) = (&x.splits, &y.splits);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            f(a[i].0, a[i].1, 0.0);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            f(b[j].0, 0.0, b[j].1);
            j += 1;
        } else {
            f(a[i].0, a[i].1, b[j].1);
            i += 1;
            j += 1;
        }
    }
}

/// L2 distance between the split-length vectors of two trees.
pub fn euclidean_distance(x: &Tree, y: &Tree) -> Result<f64> {
    x.ensure_same_taxa(y)?;
    Ok(euclidean_unchecked(x, y))
}

pub(crate) fn euclidean_unchecked(x: &Tree, y: &Tree) -> f64 {
    let mut terms = Vec::with_capacity(x.splits.len() + 2);
    merge_entries(x, y, |_, a, b| terms.push((a - b) * (a - b)));
    ordered_sum(&mut terms).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taxa5() -> Arc<TaxonSet> {
        Arc::new(TaxonSet::new(["A", "B", "C", "D", "E"]).unwrap())
    }

    fn tree(taxa: &Arc<TaxonSet>, internal: &[(&str, f64)]) -> Tree {
        let m = taxa.len();
        let mut entries: Vec<(Split, f64)> = (0..m).map(|i| (Split::terminal(i, m), 1.0)).collect();
        for (s, l) in internal {
            entries.push((taxa.parse_split(s).unwrap(), *l));
        }
        Tree::new(taxa.clone(), entries).unwrap()
    }

    #[test]
    fn missing_terminal_rejected() {
        let taxa = taxa5();
        let entries: Vec<_> = (0..4).map(|i| (Split::terminal(i, 5), 1.0)).collect();
        assert!(Tree::new(taxa, entries).is_err());
    }

    #[test]
    fn nonpositive_length_rejected() {
        let taxa = taxa5();
        let mut entries: Vec<_> = (0..5).map(|i| (Split::terminal(i, 5), 1.0)).collect();
        entries[2].1 = 0.0;
        assert_eq!(
            Tree::new(taxa, entries).unwrap_err(),
            Error::NonPositiveLength(0.0)
        );
    }

    #[test]
    fn incompatible_rejected() {
        let taxa = taxa5();
        let mut entries: Vec<_> = (0..5).map(|i| (Split::terminal(i, 5), 1.0)).collect();
        entries.push((taxa.parse_split("A,B").unwrap(), 1.0));
        entries.push((taxa.parse_split("A,C").unwrap(), 1.0));
        assert!(matches!(
            Tree::new(taxa, entries),
            Err(Error::IncompatibleSplits(..))
        ));
    }

    #[test]
    fn euclidean_examples() {
        let taxa = taxa5();
        let x = tree(&taxa, &[("A,B", 1.0), ("D,E", 3.0)]);
        let y = tree(&taxa, &[("A,C", 3.0), ("B,E", 1.0)]);
        assert_eq!(euclidean_distance(&x, &x).unwrap(), 0.0);
        let d = euclidean_distance(&x, &y).unwrap();
        assert!((d - 20f64.sqrt()).abs() < 1e-12);
        let z = tree(&taxa, &[("A,B", 1.25), ("D,E", 3.0)]);
        assert!((euclidean_distance(&x, &z).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn euclidean_rejects_other_taxa() {
        let x = tree(&taxa5(), &[]);
        let other = Arc::new(TaxonSet::new(["A", "B", "C", "D", "F"]).unwrap());
        let y = tree(&other, &[]);
        assert_eq!(
            euclidean_distance(&x, &y).unwrap_err(),
            Error::TaxonMismatch
        );
    }

    #[test]
    fn length_lookup() {
        let taxa = taxa5();
        let x = tree(&taxa, &[("A,B", 2.5)]);
        assert_eq!(x.length(taxa.parse_split("A,B").unwrap()), 2.5);
        assert_eq!(x.length(taxa.parse_split("A,C").unwrap()), 0.0);
        assert_eq!(x.internal_splits().count(), 1);
    }
}
