//! Geodesic distances in tree-space.
//!
//! Splits shared by both trees, and splits of one tree compatible with every
//! split of the other, stay present along the whole geodesic and contribute a
//! plain Euclidean term. The remaining splits `A = T_x \ T_y` and
//! `B = T_y \ T_x` are handled by successive support refinement: starting
//! from the cone path support `(A, B)`, each leg `(A_i, B_i)` is split by a
//! minimum-weight vertex cover of its incompatibility graph whenever that
//! cover weighs less than one. The resulting support satisfies the
//! compatibility, ratio-ordering and no-further-split conditions that
//! characterise the geodesic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::split::Split;
use crate::tree::{euclidean_unchecked, merge_entries, ordered_sum, Tree};

/// Relative tolerance when comparing leg ratios and cover weights.
const RATIO_TOL: f64 = 1e-12;

/// One leg of a geodesic: the splits of `a` shrink to zero while the splits
/// of `b` grow from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub a: Vec<Split>,
    pub b: Vec<Split>,
}

/// The orthant sequence of a geodesic, reusable as a warm start.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Support {
    pub legs: Vec<Leg>,
}

/// The shortest path between two trees.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    x: Tree,
    y: Tree,
    common: Vec<(Split, f64, f64)>,
    legs: Vec<LegData>,
    length: f64,
}

#[derive(Debug, Clone)]
struct LegData {
    a: Vec<(Split, f64)>,
    b: Vec<(Split, f64)>,
    norm_a: f64,
    norm_b: f64,
}

impl GeodesicPath {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn endpoints(&self) -> (&Tree, &Tree) {
        (&self.x, &self.y)
    }

    /// Splits present along the whole path with their lengths at `x` and `y`.
    /// Includes splits of one tree that are compatible with all of the other
    /// (their length at the other end is zero).
    pub fn common_splits(&self) -> &[(Split, f64, f64)] {
        &self.common
    }

    pub fn support(&self) -> Support {
        Support {
            legs: self
                .legs
                .iter()
                .map(|l| Leg {
                    a: l.a.iter().map(|e| e.0).collect(),
                    b: l.b.iter().map(|e| e.0).collect(),
                })
                .collect(),
        }
    }

    /// `(‖A_i‖, ‖B_i‖)` for every leg, in path order.
    pub fn leg_norms(&self) -> Vec<(f64, f64)> {
        self.legs.iter().map(|l| (l.norm_a, l.norm_b)).collect()
    }

    /// The tree at arc-length fraction `t` of the path.
    pub fn point_along(&self, t: f64) -> Result<Tree> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "t = {t} is outside [0, 1]"
            )));
        }
        let mut entries = Vec::with_capacity(self.x.entries().len());
        for &(p, lx, ly) in &self.common {
            entries.push((p, (1.0 - t) * lx + t * ly));
        }
        for leg in &self.legs {
            let (na, nb) = (leg.norm_a, leg.norm_b);
            let shrink = ((1.0 - t) * na - t * nb) / na;
            if shrink > 0.0 {
                entries.extend(leg.a.iter().map(|&(p, l)| (p, l * shrink)));
            }
            let grow = (t * nb - (1.0 - t) * na) / nb;
            if grow > 0.0 {
                entries.extend(leg.b.iter().map(|&(p, l)| (p, l * grow)));
            }
        }
        Ok(Tree::from_unsorted_unchecked(
            self.x.taxa().clone(),
            entries,
        ))
    }

    fn reversed(self) -> GeodesicPath {
        GeodesicPath {
            common: self.common.into_iter().map(|(p, a, b)| (p, b, a)).collect(),
            legs: self
                .legs
                .into_iter()
                .rev()
                .map(|l| LegData {
                    a: l.b,
                    b: l.a,
                    norm_a: l.norm_b,
                    norm_b: l.norm_a,
                })
                .collect(),
            length: self.length,
            x: self.y,
            y: self.x,
        }
    }
}

/// Geodesic between `x` and `y`.
pub fn geodesic(x: &Tree, y: &Tree) -> Result<GeodesicPath> {
    x.ensure_same_taxa(y)?;
    if swap_for_canonical_order(x, y) {
        Ok(solve(y, x, None).0.reversed())
    } else {
        Ok(solve(x, y, None).0)
    }
}

/// Geodesic distance.
pub fn distance(x: &Tree, y: &Tree) -> Result<f64> {
    x.ensure_same_taxa(y)?;
    Ok(distance_unchecked(x, y))
}

pub(crate) fn distance_unchecked(x: &Tree, y: &Tree) -> f64 {
    if x.entries().len() == y.entries().len()
        && x.entries().iter().zip(y.entries()).all(|(a, b)| a.0 == b.0)
    {
        return euclidean_unchecked(x, y);
    }
    let (x, y) = if swap_for_canonical_order(x, y) {
        (y, x)
    } else {
        (x, y)
    };
    solve_length(x, y, None).0
}

/// Distance with a support hint from a nearby pair of trees. The hint is
/// used only if it is still a valid starting support; the returned support
/// can seed the next call.
pub fn distance_with_hint(x: &Tree, y: &Tree, hint: Option<&Support>) -> Result<(f64, Support)> {
    x.ensure_same_taxa(y)?;
    let (len, legs) = solve_length(x, y, hint);
    Ok((len, legs))
}

/// Length of the path that collapses every split of `T_x \ T_y`, passes
/// through the shared face and expands `T_y \ T_x`.
pub fn cone_path_distance(x: &Tree, y: &Tree) -> Result<f64> {
    x.ensure_same_taxa(y)?;
    let mut common = Vec::new();
    let mut only_x = Vec::new();
    let mut only_y = Vec::new();
    merge_entries(x, y, |_, a, b| {
        if a > 0.0 && b > 0.0 {
            common.push((a - b) * (a - b));
        } else if a > 0.0 {
            only_x.push(a * a);
        } else {
            only_y.push(b * b);
        }
    });
    let leg = ordered_sum(&mut only_x).sqrt() + ordered_sum(&mut only_y).sqrt();
    common.push(leg * leg);
    Ok(ordered_sum(&mut common).sqrt())
}

/// Symmetric matrix of pairwise geodesic distances.
pub fn distance_matrix(trees: &[Tree]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = trees.first() {
        for t in &trees[1..] {
            first.ensure_same_taxa(t)?;
        }
    }
    let n = trees.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| distance_unchecked(&trees[i], &trees[j]))
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(values) {
        out[i][j] = d;
        out[j][i] = d;
    }
    Ok(out)
}

/// Orders the pair so that `distance(x, y)` and `distance(y, x)` run the same
/// arithmetic.
fn swap_for_canonical_order(x: &Tree, y: &Tree) -> bool {
    let (a, b) = (x.entries(), y.entries());
    for (p, q) in a.iter().zip(b) {
        match p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord == std::cmp::Ordering::Greater,
        }
    }
    a.len() > b.len()
}

/// Splits of the two trees sorted into the Euclidean part and the two sides
/// of the combinatorial part.
struct Partition {
    common: Vec<(Split, f64, f64)>,
    a: Vec<(Split, f64)>,
    b: Vec<(Split, f64)>,
}

fn partition(x: &Tree, y: &Tree) -> Partition {
    let mut common = Vec::new();
    let mut only_x = Vec::new();
    let mut only_y = Vec::new();
    merge_entries(x, y, |p, a, b| {
        if a > 0.0 && b > 0.0 {
            common.push((p, a, b));
        } else if a > 0.0 {
            only_x.push((p, a));
        } else {
            only_y.push((p, b));
        }
    });
    let mut a = Vec::with_capacity(only_x.len());
    let mut b = Vec::with_capacity(only_y.len());
    for &(p, l) in &only_x {
        if only_y.iter().all(|(q, _)| p.compatible(*q)) {
            common.push((p, l, 0.0));
        } else {
            a.push((p, l));
        }
    }
    for &(q, l) in &only_y {
        if only_x.iter().all(|(p, _)| q.compatible(*p)) {
            common.push((q, 0.0, l));
        } else {
            b.push((q, l));
        }
    }
    Partition { common, a, b }
}

/// Leg as index lists into `Partition::a` / `Partition::b`.
#[derive(Clone)]
struct IdxLeg {
    a: Vec<usize>,
    b: Vec<usize>,
}

fn norm_of(idx: &[usize], lens: &[(Split, f64)]) -> f64 {
    let mut sq: Vec<f64> = idx.iter().map(|&i| lens[i].1 * lens[i].1).collect();
    ordered_sum(&mut sq).sqrt()
}

struct Refiner<'a> {
    part: &'a Partition,
    incompatible: Vec<bool>,
}

impl<'a> Refiner<'a> {
    fn new(part: &'a Partition) -> Self {
        let nb = part.b.len();
        let mut incompatible = vec![false; part.a.len() * nb];
        for (i, (p, _)) in part.a.iter().enumerate() {
            for (j, (q, _)) in part.b.iter().enumerate() {
                incompatible[i * nb + j] = !p.compatible(*q);
            }
        }
        Refiner { part, incompatible }
    }

    fn incompatible(&self, i: usize, j: usize) -> bool {
        self.incompatible[i * self.part.b.len() + j]
    }

    /// Splits a leg in two when its incompatibility graph has a vertex cover
    /// of weight below one.
    fn split_leg(&self, leg: &IdxLeg) -> Option<(IdxLeg, IdxLeg)> {
        if leg.a.len() < 2 && leg.b.len() < 2 {
            return None;
        }
        let (pa, pb) = (&self.part.a, &self.part.b);
        let na2: f64 = norm_of(&leg.a, pa).powi(2);
        let nb2: f64 = norm_of(&leg.b, pb).powi(2);
        let (ka, kb) = (leg.a.len(), leg.b.len());
        let source = 0;
        let sink = ka + kb + 1;
        let mut net = FlowNetwork::new(ka + kb + 2);
        for (u, &i) in leg.a.iter().enumerate() {
            net.add_edge(source, 1 + u, pa[i].1 * pa[i].1 / na2);
            for (v, &j) in leg.b.iter().enumerate() {
                if self.incompatible(i, j) {
                    net.add_edge(1 + u, 1 + ka + v, f64::INFINITY);
                }
            }
        }
        for (v, &j) in leg.b.iter().enumerate() {
            net.add_edge(1 + ka + v, sink, pb[j].1 * pb[j].1 / nb2);
        }
        let (weight, reach) = net.max_flow(source, sink);
        if weight >= 1.0 - RATIO_TOL {
            return None;
        }
        // cover = unreachable a-nodes ∪ reachable b-nodes
        let mut first = IdxLeg {
            a: Vec::new(),
            b: Vec::new(),
        };
        let mut second = IdxLeg {
            a: Vec::new(),
            b: Vec::new(),
        };
        for (u, &i) in leg.a.iter().enumerate() {
            if reach[1 + u] {
                second.a.push(i);
            } else {
                first.a.push(i);
            }
        }
        for (v, &j) in leg.b.iter().enumerate() {
            if reach[1 + ka + v] {
                second.b.push(j);
            } else {
                first.b.push(j);
            }
        }
        if first.a.is_empty() || first.b.is_empty() || second.a.is_empty() || second.b.is_empty() {
            return None;
        }
        Some((first, second))
    }

    fn refine(&self, mut legs: Vec<IdxLeg>) -> Vec<IdxLeg> {
        loop {
            let mut changed = false;
            let mut next = Vec::with_capacity(legs.len() + 1);
            for leg in legs {
                match self.split_leg(&leg) {
                    Some((l1, l2)) => {
                        next.push(l1);
                        next.push(l2);
                        changed = true;
                    }
                    None => next.push(leg),
                }
            }
            legs = next;
            if !changed {
                return legs;
            }
        }
    }

    fn ratios_ordered(&self, legs: &[IdxLeg]) -> bool {
        let ratios: Vec<f64> = legs
            .iter()
            .map(|l| norm_of(&l.a, &self.part.a) / norm_of(&l.b, &self.part.b))
            .collect();
        ratios.windows(2).all(|w| w[0] <= w[1] * (1.0 + RATIO_TOL))
    }

    /// Maps a hint onto this partition; `None` if it does not cover exactly
    /// the current split sets or violates the ratio ordering.
    fn from_hint(&self, hint: &Support) -> Option<Vec<IdxLeg>> {
        let (pa, pb) = (&self.part.a, &self.part.b);
        let mut used_a = vec![false; pa.len()];
        let mut used_b = vec![false; pb.len()];
        let mut legs = Vec::with_capacity(hint.legs.len());
        for leg in &hint.legs {
            if leg.a.is_empty() || leg.b.is_empty() {
                return None;
            }
            let mut out = IdxLeg {
                a: Vec::with_capacity(leg.a.len()),
                b: Vec::with_capacity(leg.b.len()),
            };
            for p in &leg.a {
                let i = pa.binary_search_by_key(p, |e| e.0).ok()?;
                if std::mem::replace(&mut used_a[i], true) {
                    return None;
                }
                out.a.push(i);
            }
            for q in &leg.b {
                let j = pb.binary_search_by_key(q, |e| e.0).ok()?;
                if std::mem::replace(&mut used_b[j], true) {
                    return None;
                }
                out.b.push(j);
            }
            legs.push(out);
        }
        if !used_a.iter().all(|&u| u) || !used_b.iter().all(|&u| u) {
            return None;
        }
        // the orthant sequence must be realisable: everything added so far
        // compatible with everything not yet removed
        for (k, later) in legs.iter().enumerate() {
            for earlier in &legs[..k] {
                for &i in &later.a {
                    if earlier.b.iter().any(|&j| self.incompatible(i, j)) {
                        return None;
                    }
                }
            }
        }
        if !self.ratios_ordered(&legs) {
            return None;
        }
        Some(legs)
    }
}

fn solve_legs(part: &Partition, hint: Option<&Support>) -> Vec<IdxLeg> {
    if part.a.is_empty() {
        return Vec::new();
    }
    let refiner = Refiner::new(part);
    if let Some(start) = hint.and_then(|h| refiner.from_hint(h)) {
        let legs = refiner.refine(start);
        if refiner.ratios_ordered(&legs) {
            return legs;
        }
    }
    let cone = IdxLeg {
        a: (0..part.a.len()).collect(),
        b: (0..part.b.len()).collect(),
    };
    let legs = refiner.refine(vec![cone]);
    debug_assert!(refiner.ratios_ordered(&legs));
    legs
}

fn total_length(part: &Partition, legs: &[IdxLeg]) -> f64 {
    let mut terms: Vec<f64> = part
        .common
        .iter()
        .map(|&(_, a, b)| (a - b) * (a - b))
        .collect();
    for leg in legs {
        let s = norm_of(&leg.a, &part.a) + norm_of(&leg.b, &part.b);
        terms.push(s * s);
    }
    ordered_sum(&mut terms).sqrt()
}

fn to_support(part: &Partition, legs: &[IdxLeg]) -> Support {
    Support {
        legs: legs
            .iter()
            .map(|l| Leg {
                a: l.a.iter().map(|&i| part.a[i].0).collect(),
                b: l.b.iter().map(|&j| part.b[j].0).collect(),
            })
            .collect(),
    }
}

pub(crate) fn solve_length(x: &Tree, y: &Tree, hint: Option<&Support>) -> (f64, Support) {
    let part = partition(x, y);
    let legs = solve_legs(&part, hint);
    (total_length(&part, &legs), to_support(&part, &legs))
}

fn solve(x: &Tree, y: &Tree, hint: Option<&Support>) -> (GeodesicPath, Support) {
    let part = partition(x, y);
    let legs = solve_legs(&part, hint);
    let length = total_length(&part, &legs);
    let support = to_support(&part, &legs);
    let legs = legs
        .iter()
        .map(|l| LegData {
            a: l.a.iter().map(|&i| part.a[i]).collect(),
            b: l.b.iter().map(|&j| part.b[j]).collect(),
            norm_a: norm_of(&l.a, &part.a),
            norm_b: norm_of(&l.b, &part.b),
        })
        .collect();
    let mut common = part.common;
    common.sort_by_key(|e| e.0);
    let path = GeodesicPath {
        x: x.clone(),
        y: y.clone(),
        common,
        legs,
        length,
    };
    (path, support)
}
