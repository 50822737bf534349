//! Newick reading and writing.
//!
//! Dialect: every edge carries a branch length, internal node labels are
//! ignored, whitespace is tolerated and `[...]` comments are stripped. Rooted
//! input is de-rooted by fusing the two root edges. Zero-length internal edges
//! are dropped; zero-length terminal edges are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::split::{iter_bits, Split, TaxonSet};
use crate::tree::Tree;

struct Node {
    children: Vec<usize>,
    label: Option<String>,
    length: Option<f64>,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Newick {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() {
            match self.text[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' => self.pos += 1,
                b'[' => {
                    while self.pos < self.text.len() && self.text[self.pos] != b']' {
                        self.pos += 1;
                    }
                    self.pos += 1;
                }
                _ => break,
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn subtree(&mut self) -> Result<usize> {
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.err("expected `,` or `)`"),
                }
            }
        }
        let label = self.label()?;
        if children.is_empty() && label.is_none() {
            return self.err("expected a taxon label");
        }
        let length = if self.peek() == Some(b':') {
            self.pos += 1;
            Some(self.number()?)
        } else {
            None
        };
        self.nodes.push(Node {
            children,
            label,
            length,
        });
        Ok(self.nodes.len() - 1)
    }

    fn label(&mut self) -> Result<Option<String>> {
        match self.peek() {
            Some(b'\'') => {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.text.get(self.pos) {
                        None => return self.err("unterminated quoted label"),
                        Some(b'\'') if self.text.get(self.pos + 1) == Some(&b'\'') => {
                            out.push(b'\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(&c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                match String::from_utf8(out) {
                    Ok(s) => Ok(Some(s)),
                    Err(_) => self.err("label is not valid UTF-8"),
                }
            }
            Some(_) => {
                let start = self.pos;
                while let Some(&c) = self.text.get(self.pos) {
                    if is_delimiter(c) {
                        break;
                    }
                    self.pos += 1;
                }
                if start == self.pos {
                    return Ok(None);
                }
                Ok(Some(
                    String::from_utf8_lossy(&self.text[start..self.pos]).into_owned(),
                ))
            }
            None => Ok(None),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.text.get(self.pos) {
            if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let token = std::str::from_utf8(&self.text[start..self.pos]).unwrap_or("");
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.err(format!("invalid branch length `{token}`"))
            }
        }
    }
}

fn is_delimiter(c: u8) -> bool {
    matches!(
        c,
        b'(' | b')' | b',' | b':' | b';' | b'[' | b' ' | b'\t' | b'\n' | b'\r'
    )
}

/// Parses a single Newick expression. When `taxa` is given the leaf labels
/// must match it exactly; otherwise taxa are numbered in order of appearance.
pub fn parse_newick(text: &str, taxa: Option<&Arc<TaxonSet>>) -> Result<Tree> {
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
    };
    let root = parser.subtree()?;
    if parser.peek() != Some(b';') {
        return parser.err("expected `;`");
    }
    parser.pos += 1;
    if parser.peek().is_some() {
        return parser.err("trailing characters after `;`");
    }
    let nodes = parser.nodes;

    // children are always pushed before their parent, so arena order is a
    // post-order traversal
    let leaves: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].children.is_empty())
        .collect();
    let taxa = match taxa {
        Some(t) => {
            let mut seen = vec![false; t.len()];
            for &leaf in &leaves {
                let name = nodes[leaf].label.as_deref().unwrap_or_default();
                let i = t
                    .index_of(name)
                    .ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::DuplicateLabel(name.to_string()));
                }
            }
            if leaves.len() != t.len() {
                return Err(Error::TaxonCount {
                    expected: t.len(),
                    found: leaves.len(),
                });
            }
            t.clone()
        }
        None => Arc::new(TaxonSet::new(
            leaves
                .iter()
                .map(|&l| nodes[l].label.clone().unwrap_or_default()),
        )?),
    };
    let m = taxa.len();
    let full = taxa.full_mask();

    let mut bits = vec![0u128; nodes.len()];
    let mut totals: BTreeMap<Split, f64> = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if node.children.is_empty() {
            let name = node.label.as_deref().unwrap_or_default();
            bits[i] = 1u128 << taxa.index_of(name).expect("label checked above");
        } else {
            bits[i] = node.children.iter().fold(0, |acc, &c| acc | bits[c]);
        }
        if i == root {
            continue;
        }
        let what = || {
            node.label
                .clone()
                .unwrap_or_else(|| "internal edge".to_string())
        };
        let len = node.length.ok_or_else(|| Error::MissingLength(what()))?;
        if len < 0.0 {
            return Err(Error::NonPositiveLength(len));
        }
        if bits[i] == full {
            // edge above a node that already spans every taxon carries no split
            continue;
        }
        let split = Split::from_side(bits[i], m)?;
        *totals.entry(split).or_insert(0.0) += len;
    }

    let mut entries = Vec::with_capacity(totals.len());
    for (split, len) in totals {
        if split.is_terminal(m) {
            if len <= 0.0 {
                return Err(Error::NonPositiveLength(len));
            }
            entries.push((split, len));
        } else if len > 0.0 {
            entries.push((split, len));
        }
    }
    Tree::new(taxa, entries)
}

/// Parses a multi-tree file: one expression per line, blank lines and lines
/// starting with `#` are skipped. All trees share the first tree's taxon set.
pub fn parse_newick_lines(text: &str) -> Result<Vec<Tree>> {
    let mut trees = Vec::new();
    let mut taxa: Option<Arc<TaxonSet>> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tree = parse_newick(line, taxa.as_ref()).map_err(|e| Error::AtLine {
            line: i + 1,
            inner: Box::new(e),
        })?;
        if taxa.is_none() {
            taxa = Some(tree.taxa().clone());
        }
        trees.push(tree);
    }
    Ok(trees)
}

/// Writes a tree rooted at the node adjacent to the last taxon. Children are
/// ordered by their smallest taxon index, so output is deterministic.
pub fn write_newick(tree: &Tree) -> String {
    let taxa = tree.taxa();
    let m = taxa.len();
    let last = 1u128 << (m - 1);
    let full = taxa.full_mask();

    // clusters on the side away from the last taxon; the root cluster is
    // everything but the last taxon
    let root_bits = full & !last;
    let mut clusters: Vec<(u128, f64)> = Vec::with_capacity(tree.entries().len());
    let mut last_len = 0.0;
    for &(p, len) in tree.entries() {
        let side = if p.bits() & last != 0 {
            p.complement(m)
        } else {
            p.bits()
        };
        if side == root_bits {
            last_len = len;
        } else {
            clusters.push((side, len));
        }
    }
    // larger clusters first so each cluster's parent is seen before it
    clusters.sort_by(|a, b| b.0.count_ones().cmp(&a.0.count_ones()).then(a.0.cmp(&b.0)));
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); clusters.len()];
    let mut top: Vec<usize> = Vec::new();
    for i in 0..clusters.len() {
        let c = clusters[i].0;
        // smallest strict superset seen so far
        let parent = (0..i)
            .rev()
            .find(|&j| clusters[j].0 != c && c & !clusters[j].0 == 0);
        match parent {
            Some(j) => children[j].push(i),
            None => top.push(i),
        }
    }
    let min_taxon = |i: usize| clusters[i].0.trailing_zeros();
    for list in children.iter_mut() {
        list.sort_by_key(|&i| min_taxon(i));
    }
    top.sort_by_key(|&i| min_taxon(i));

    fn emit(
        out: &mut String,
        i: usize,
        clusters: &[(u128, f64)],
        children: &[Vec<usize>],
        taxa: &TaxonSet,
    ) {
        let (bits, len) = clusters[i];
        if children[i].is_empty() {
            let leaf = iter_bits(bits).next().expect("nonempty cluster");
            write_label(out, taxa.name(leaf));
        } else {
            out.push('(');
            for (k, &c) in children[i].iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                emit(out, c, clusters, children, taxa);
            }
            out.push(')');
        }
        let _ = write!(out, ":{len}");
    }

    let mut out = String::from("(");
    for &i in &top {
        emit(&mut out, i, &clusters, &children, taxa);
        out.push(',');
    }
    write_label(&mut out, taxa.name(m - 1));
    let _ = write!(out, ":{last_len});");
    out
}

fn write_label(out: &mut String, label: &str) {
    if label
        .bytes()
        .any(|c| is_delimiter(c) || c == b'\'' || c == b']')
    {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    } else {
        out.push_str(label);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(tree: &Tree, s: &str) -> Split {
        tree.taxa().parse_split(s).unwrap()
    }

    #[test]
    fn reads_unrooted_expression() {
        let t = parse_newick("((A:1,B:1):1,(C:1,D:1):1,E:1);", None).unwrap();
        assert_eq!(t.n_taxa(), 5);
        assert_eq!(t.internal_splits().count(), 2);
        assert_eq!(t.length(split(&t, "A,B|C,D,E")), 1.0);
        assert_eq!(t.length(split(&t, "C,D|A,B,E")), 1.0);
    }

    #[test]
    fn derooting_sums_root_edges() {
        let t = parse_newick("((A:1,B:1):0.5,(C:1,D:1):0.5);", None).unwrap();
        let internal: Vec<_> = t.internal_splits().collect();
        assert_eq!(internal, vec![split(&t, "A,B|C,D")]);
        assert_eq!(t.length(internal[0]), 1.0);
    }

    #[test]
    fn derooting_onto_a_leaf_edge() {
        let t = parse_newick("(A:1,(B:1,(C:1,D:1):1):2);", None).unwrap();
        assert_eq!(t.length(Split::terminal(0, 4)), 3.0);
        assert_eq!(t.internal_splits().count(), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_newick("((A:1,A:1):1,C:1,D:1);", None),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(
            parse_newick("((A:1,B):1,C:1,D:1);", None),
            Err(Error::MissingLength(_))
        ));
        assert!(matches!(
            parse_newick("(A:1,B:1,C:1);", None),
            Err(Error::TooFewTaxa(3))
        ));
        assert!(matches!(
            parse_newick("((A:1,B:-1):1,C:1,D:1);", None),
            Err(Error::NonPositiveLength(_))
        ));
        assert!(matches!(
            parse_newick("((A:1,B:0):1,C:1,D:1);", None),
            Err(Error::NonPositiveLength(_))
        ));
        assert!(matches!(
            parse_newick("((A:1,B:1):1,C:1,D:1)", None),
            Err(Error::Newick { .. })
        ));
        let taxa = parse_newick("(A:1,B:1,C:1,D:1);", None)
            .unwrap()
            .taxa()
            .clone();
        assert!(matches!(
            parse_newick("(A:1,B:1,C:1,X:1);", Some(&taxa)),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            parse_newick("(A:1,B:1,C:1);", Some(&taxa)),
            Err(Error::TaxonCount { .. })
        ));
    }

    #[test]
    fn zero_internal_edge_is_dropped() {
        let t = parse_newick("((A:1,B:1):0,C:1,D:1,E:1);", None).unwrap();
        assert_eq!(t.internal_splits().count(), 0);
    }

    #[test]
    fn comments_whitespace_and_internal_labels() {
        let t = parse_newick(" ( (A:1 ,B:1)x:1 [note], C:1,\n D:1 , E:2 )root ; ", None).unwrap();
        assert_eq!(t.internal_splits().count(), 1);
        assert_eq!(t.length(Split::terminal(4, 5)), 2.0);
    }

    #[test]
    fn writes_canonical_form() {
        let t = parse_newick("(C:1,(B:1,A:1):1,E:1,D:1);", None).unwrap();
        // taxa numbered by appearance: C,B,A,E,D
        assert_eq!(write_newick(&t), "(C:1,(B:1,A:1):1,E:1,D:1);");
        let t = parse_newick("((A:1,B:1):1,C:1,D:1,E:1);", None).unwrap();
        assert_eq!(write_newick(&t), "((A:1,B:1):1,C:1,D:1,E:1);");
        let star = parse_newick("(A:1,B:1,C:1,D:1);", None).unwrap();
        assert_eq!(write_newick(&star), "(A:1,B:1,C:1,D:1);");
    }

    #[test]
    fn quoted_labels_round_trip() {
        let t = parse_newick("('a b':1,'it''s':1,C:1,D:1);", None).unwrap();
        assert_eq!(t.taxa().name(1), "it's");
        let back = parse_newick(&write_newick(&t), None).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn multi_tree_file() {
        let text = "# header\n(A:1,B:1,C:1,D:1);\n\n(D:2,C:1,B:1,A:1);\n";
        let trees = parse_newick_lines(text).unwrap();
        assert_eq!(trees.len(), 2);
        assert!(trees[0].same_taxa(&trees[1]));
        assert_eq!(trees[1].length(Split::terminal(3, 4)), 2.0);
        let err = parse_newick_lines("(A:1,B:1,C:1,D:1);\n(A:1,B:1,C:1,E:1);\n").unwrap_err();
        assert!(matches!(err, Error::AtLine { line: 2, .. }));
    }
}
