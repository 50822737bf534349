//! Taxon sets, splits and topologies.
//!
//! A split is stored as a bit-vector over taxon indices. The stored side is
//! always the one that does not contain taxon 0, which makes the
//! representation unique: equality, ordering and hashing work directly on the
//! bits.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Largest supported number of taxa (width of the split bit-vector).
pub const MAX_TAXA: usize = 128;

/// Ordered set of distinct taxon labels.
#[derive(Debug, Clone)]
pub struct TaxonSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TaxonSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::EmptyLabel);
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(name.clone()));
            }
        }
        if names.len() < 4 {
            return Err(Error::TooFewTaxa(names.len()));
        }
        if names.len() > MAX_TAXA {
            return Err(Error::TooManyTaxa {
                max: MAX_TAXA,
                found: names.len(),
            });
        }
        Ok(TaxonSet { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Bit mask with one bit per taxon.
    pub fn full_mask(&self) -> u128 {
        full_mask(self.len())
    }

    /// Parses a split written as `A,B|C,D,E`. A single side (`A,B`) is also
    /// accepted; the other side is implied.
    pub fn parse_split(&self, text: &str) -> Result<Split> {
        let (side, other) = match text.split_once('|') {
            Some((l, r)) => (l, Some(r)),
            None => (text, None),
        };
        let bits = self.parse_side(side)?;
        if let Some(other) = other {
            let rest = self.parse_side(other)?;
            if bits & rest != 0 || (bits | rest) != self.full_mask() {
                return Err(Error::InvalidSplit(format!(
                    "`{text}` does not partition the taxon set"
                )));
            }
        }
        Split::from_side(bits, self.len())
    }

    fn parse_side(&self, side: &str) -> Result<u128> {
        let mut bits = 0u128;
        for label in side.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let i = self
                .index_of(label)
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            bits |= 1u128 << i;
        }
        Ok(bits)
    }

    /// Renders a split as `A,B|C,D,E`, smaller side first.
    pub fn format_split(&self, split: Split) -> String {
        let m = self.len();
        let side = split.bits();
        let other = split.complement(m);
        let (first, second) = if side.count_ones() < other.count_ones() {
            (side, other)
        } else {
            // ties go to the side holding taxon 0
            (other, side)
        };
        format!("{}|{}", self.join_side(first), self.join_side(second))
    }

    fn join_side(&self, bits: u128) -> String {
        let mut names: Vec<&str> = iter_bits(bits).map(|i| self.names[i].as_str()).collect();
        names.sort_unstable();
        names.join(",")
    }
}

impl PartialEq for TaxonSet {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for TaxonSet {}

pub(crate) fn full_mask(m: usize) -> u128 {
    if m >= 128 {
        u128::MAX
    } else {
        (1u128 << m) - 1
    }
}

/// Iterates the indices of set bits in ascending order.
pub(crate) fn iter_bits(mut bits: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if bits == 0 {
            None
        } else {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        }
    })
}

/// A bipartition of the taxon set, stored as the side excluding taxon 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split(u128);

impl Split {
    /// Builds a split from either side of the bipartition.
    pub fn from_side(bits: u128, m: usize) -> Result<Split> {
        let full = full_mask(m);
        if bits & !full != 0 {
            return Err(Error::InvalidSplit("taxon index out of range".into()));
        }
        let canonical = if bits & 1 == 1 { full & !bits } else { bits };
        if canonical == 0 {
            return Err(Error::InvalidSplit("one side is empty".into()));
        }
        Ok(Split(canonical))
    }

    pub fn from_indices(indices: &[usize], m: usize) -> Result<Split> {
        let mut bits = 0u128;
        for &i in indices {
            if i >= m {
                return Err(Error::InvalidSplit(format!("taxon index {i} out of range")));
            }
            bits |= 1u128 << i;
        }
        Split::from_side(bits, m)
    }

    /// Terminal split isolating taxon `i`.
    pub fn terminal(i: usize, m: usize) -> Split {
        if i == 0 {
            Split(full_mask(m) & !1)
        } else {
            Split(1u128 << i)
        }
    }

    /// The stored side (never contains taxon 0).
    pub fn bits(self) -> u128 {
        self.0
    }

    /// The side containing taxon 0.
    pub fn complement(self, m: usize) -> u128 {
        full_mask(m) & !self.0
    }

    pub fn is_terminal(self, m: usize) -> bool {
        let c = self.0.count_ones() as usize;
        c == 1 || c + 1 == m
    }

    /// Four-point compatibility. Both stored sides exclude taxon 0, so the
    /// intersection of the two complements is never empty and only three
    /// intersections need checking.
    pub fn compatible(self, other: Split) -> bool {
        let (x, y) = (self.0, other.0);
        x & y == 0 || x & !y == 0 || y & !x == 0
    }
}

impl fmt::Debug for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Split{{")?;
        for (k, i) in iter_bits(self.0).enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// `true` iff `p` is compatible with every split in `splits`.
pub fn compatible_with_all<'a, I>(p: Split, splits: I) -> bool
where
    I: IntoIterator<Item = &'a Split>,
{
    splits.into_iter().all(|q| p.compatible(*q))
}

/// A set of pairwise-compatible internal splits over `m` taxa.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    m: usize,
    splits: Vec<Split>,
}

impl Topology {
    pub fn new<I: IntoIterator<Item = Split>>(m: usize, splits: I) -> Result<Topology> {
        let set: BTreeSet<Split> = splits.into_iter().collect();
        let splits: Vec<Split> = set.into_iter().collect();
        for (i, p) in splits.iter().enumerate() {
            if p.is_terminal(m) {
                return Err(Error::InvalidSplit(format!("{p:?} is terminal")));
            }
            if p.bits() & !full_mask(m) != 0 {
                return Err(Error::InvalidSplit("taxon index out of range".into()));
            }
            for q in &splits[..i] {
                if !p.compatible(*q) {
                    return Err(Error::IncompatibleSplits(
                        format!("{q:?}"),
                        format!("{p:?}"),
                    ));
                }
            }
        }
        if m >= 3 && splits.len() > m - 3 {
            return Err(Error::InvalidSplit(format!(
                "{} internal splits exceed the maximum of {}",
                splits.len(),
                m - 3
            )));
        }
        Ok(Topology { m, splits })
    }

    pub fn empty(m: usize) -> Topology {
        Topology {
            m,
            splits: Vec::new(),
        }
    }

    /// Builds from splits already known to be internal and pairwise compatible.
    pub(crate) fn from_sorted_unchecked(m: usize, splits: Vec<Split>) -> Topology {
        debug_assert!(splits.windows(2).all(|w| w[0] < w[1]));
        Topology { m, splits }
    }

    pub fn n_taxa(&self) -> usize {
        self.m
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn is_resolved(&self) -> bool {
        self.splits.len() + 3 == self.m
    }

    pub fn contains(&self, p: Split) -> bool {
        self.splits.binary_search(&p).is_ok()
    }

    /// `true` iff `p` is compatible with every split of the topology.
    pub fn compatible_with(&self, p: Split) -> bool {
        compatible_with_all(p, &self.splits)
    }

    pub fn with(&self, p: Split) -> Topology {
        let mut splits = self.splits.clone();
        if let Err(pos) = splits.binary_search(&p) {
            splits.insert(pos, p);
        }
        Topology { m: self.m, splits }
    }

    pub fn without(&self, p: Split) -> Topology {
        Topology {
            m: self.m,
            splits: self.splits.iter().copied().filter(|&q| q != p).collect(),
        }
    }

    /// All splits reachable from `p` by one extended nearest-neighbour
    /// interchange across the edge of `p` in `self ∪ {p}`: swap one subtree
    /// hanging from one end of the edge with one from the other end.
    pub fn xnni_replacements(&self, p: Split) -> Result<Vec<Split>> {
        let m = self.m;
        if p.is_terminal(m) {
            return Err(Error::TerminalSplit(format!("{p:?}")));
        }
        if !self.compatible_with(p) {
            return Err(Error::InvalidSplit(format!(
                "{p:?} is not compatible with the topology"
            )));
        }
        let side = p.bits();
        let other = p.complement(m);
        let near = self.children_of(side, p);
        let far = self.children_of(other, p);
        let mut out = BTreeSet::new();
        for &a in &near {
            for &b in &far {
                let bits = (side & !a) | b;
                out.insert(Split::from_side(bits, m)?);
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Maximal clusters strictly inside `side` among the tree's splits
    /// (terminals included), ignoring the edge `p` itself.
    fn children_of(&self, side: u128, p: Split) -> Vec<u128> {
        let full = full_mask(self.m);
        let mut clusters: Vec<u128> = iter_bits(side).map(|i| 1u128 << i).collect();
        for q in &self.splits {
            if *q == p {
                continue;
            }
            for c in [q.bits(), full & !q.bits()] {
                if c & !side == 0 && c != side {
                    clusters.push(c);
                }
            }
        }
        clusters.sort_unstable();
        clusters.dedup();
        clusters
            .iter()
            .copied()
            .filter(|&c| !clusters.iter().any(|&d| d != c && c & !d == 0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taxa5() -> TaxonSet {
        TaxonSet::new(["A", "B", "C", "D", "E"]).unwrap()
    }

    #[test]
    fn canonical_form_is_unique() {
        let t = taxa5();
        let ab = t.parse_split("A,B|C,D,E").unwrap();
        let cde = t.parse_split("C,D,E").unwrap();
        assert_eq!(ab, cde);
        assert_eq!(ab.bits() & 1, 0);
        assert_eq!(t.format_split(ab), "A,B|C,D,E");
    }

    #[test]
    fn rejects_trivial_sides() {
        assert!(Split::from_side(0, 5).is_err());
        assert!(Split::from_side(0b11111, 5).is_err());
        assert!(Split::from_side(1 << 7, 5).is_err());
    }

    #[test]
    fn taxon_set_invariants() {
        assert_eq!(
            TaxonSet::new(["A", "B", "C"]).unwrap_err(),
            Error::TooFewTaxa(3)
        );
        assert!(matches!(
            TaxonSet::new(["A", "B", "A", "C"]),
            Err(Error::DuplicateLabel(_))
        ));
        assert_eq!(
            TaxonSet::new(["A", "", "B", "C"]).unwrap_err(),
            Error::EmptyLabel
        );
    }

    #[test]
    fn terminal_detection() {
        let m = 5;
        for i in 0..m {
            assert!(Split::terminal(i, m).is_terminal(m));
        }
        let t = taxa5();
        assert!(!t.parse_split("A,B").unwrap().is_terminal(m));
    }

    #[test]
    fn compatibility_examples() {
        let t = taxa5();
        let ab = t.parse_split("A,B|C,D,E").unwrap();
        let ac = t.parse_split("A,C|B,D,E").unwrap();
        let de = t.parse_split("D,E|A,B,C").unwrap();
        assert!(!ab.compatible(ac));
        assert!(!ac.compatible(ab));
        assert!(ab.compatible(de));
        assert!(ab.compatible(ab));
        for i in 0..5 {
            assert!(ab.compatible(Split::terminal(i, 5)));
        }
    }

    #[test]
    fn compatible_with_topology() {
        let t = taxa5();
        let ab = t.parse_split("A,B").unwrap();
        let de = t.parse_split("D,E").unwrap();
        let be = t.parse_split("B,E").unwrap();
        let top = Topology::new(5, [de]).unwrap();
        assert!(top.compatible_with(ab));
        let top = Topology::new(5, [ab]).unwrap();
        assert!(!top.compatible_with(be));
        assert!(Topology::empty(5).compatible_with(be));
    }

    #[test]
    fn topology_rejects_incompatible_and_terminal() {
        let t = taxa5();
        let ab = t.parse_split("A,B").unwrap();
        let ac = t.parse_split("A,C").unwrap();
        assert!(Topology::new(5, [ab, ac]).is_err());
        assert!(Topology::new(5, [Split::terminal(2, 5)]).is_err());
    }

    #[test]
    fn xnni_on_five_taxa() {
        let t = taxa5();
        let ab = t.parse_split("A,B").unwrap();
        let de = t.parse_split("D,E").unwrap();
        let top = Topology::new(5, [ab, de]).unwrap();
        let got = top.xnni_replacements(de).unwrap();
        let mut want = vec![
            t.parse_split("C,D|A,B,E").unwrap(),
            t.parse_split("C,E|A,B,D").unwrap(),
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn xnni_on_unresolved_edge() {
        // A,B,C hang from one end, D,E from the other: 3 x 2 distinct swaps
        let t = taxa5();
        let de = t.parse_split("D,E").unwrap();
        let got = Topology::empty(5).xnni_replacements(de).unwrap();
        assert_eq!(got.len(), 6);
        for q in got {
            assert!(!q.compatible(de));
        }
    }

    #[test]
    fn xnni_rejects_terminal() {
        let top = Topology::empty(5);
        assert!(matches!(
            top.xnni_replacements(Split::terminal(1, 5)),
            Err(Error::TerminalSplit(_))
        ));
    }
}
