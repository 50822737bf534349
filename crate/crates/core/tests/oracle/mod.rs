//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls into the geodesic solver.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::Rng;
use treespace::{Split, TaxonSet, Tree};

pub fn taxa(m: usize) -> Arc<TaxonSet> {
    let names: Vec<String> = (0..m)
        .map(|i| {
            if i < 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("T{i}")
            }
        })
        .collect();
    Arc::new(TaxonSet::new(names).unwrap())
}

/// Random binary tree by random agglomeration. Each internal split is kept
/// with probability `1 - collapse`; lengths are uniform on `[lo, hi)`.
pub fn random_tree<R: Rng>(
    taxa: &Arc<TaxonSet>,
    rng: &mut R,
    collapse: f64,
    lo: f64,
    hi: f64,
) -> Tree {
    let m = taxa.len();
    let mut clusters: Vec<u128> = (0..m).map(|i| 1u128 << i).collect();
    let mut entries: Vec<(Split, f64)> = (0..m)
        .map(|i| (Split::terminal(i, m), rng.random_range(lo..hi)))
        .collect();
    while clusters.len() > 3 {
        let i = rng.random_range(0..clusters.len());
        let a = clusters.swap_remove(i);
        let j = rng.random_range(0..clusters.len());
        let b = clusters.swap_remove(j);
        let joined = a | b;
        clusters.push(joined);
        if rng.random::<f64>() >= collapse {
            entries.push((
                Split::from_side(joined, m).unwrap(),
                rng.random_range(lo..hi),
            ));
        }
    }
    Tree::new(taxa.clone(), entries).unwrap()
}

/// Same topology as `tree` with fresh random lengths.
pub fn rescale<R: Rng>(tree: &Tree, rng: &mut R, lo: f64, hi: f64) -> Tree {
    Tree::new(
        tree.taxa().clone(),
        tree.entries()
            .iter()
            .map(|&(p, _)| (p, rng.random_range(lo..hi))),
    )
    .unwrap()
}

/// Applies a taxon permutation: taxon `i` of `tree` becomes taxon `perm[i]`.
pub fn relabel(tree: &Tree, perm: &[usize]) -> Tree {
    let m = tree.n_taxa();
    let entries = tree.entries().iter().map(|&(p, l)| {
        let mut bits = 0u128;
        for (i, &j) in perm.iter().enumerate() {
            if p.bits() >> i & 1 == 1 {
                bits |= 1u128 << j;
            }
        }
        (Split::from_side(bits, m).unwrap(), l)
    });
    Tree::new(tree.taxa().clone(), entries.collect::<Vec<_>>()).unwrap()
}

fn lengths(tree: &Tree) -> BTreeMap<Split, f64> {
    tree.entries().iter().copied().collect()
}

/// Plain L2 distance of the split-length vectors.
pub fn euclid(x: &Tree, y: &Tree) -> f64 {
    let (lx, ly) = (lengths(x), lengths(y));
    let mut keys: Vec<Split> = lx.keys().chain(ly.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|p| {
            let d = lx.get(p).copied().unwrap_or(0.0) - ly.get(p).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Geodesic distance on five taxa by unfolding quadrant sequences into the
/// plane.
///
/// The internal part of 5-taxon tree-space is a 2-complex of 15 quadrants,
/// one per compatible pair of internal splits, glued along shared axes. For
/// every simple chain of quadrants from one containing `x` to one containing
/// `y` the chain is laid out as consecutive 90-degree wedges around the
/// origin; if the straight segment between the unfolded points stays inside
/// the wedges it is a real path of that length. The minimum over all chains
/// and the path through the star tree is the geodesic distance.
pub fn unfolding_distance_5(x: &Tree, y: &Tree) -> f64 {
    let m = x.n_taxa();
    assert_eq!(m, 5);
    let internal: Vec<Split> = (1u128..32)
        .filter(|b| b & 1 == 0)
        .map(|b| Split::from_side(b, m).unwrap())
        .filter(|p| !p.is_terminal(m))
        .collect();
    assert_eq!(internal.len(), 10);
    let mut quadrants: Vec<(Split, Split)> = Vec::new();
    for (i, &p) in internal.iter().enumerate() {
        for &q in &internal[i + 1..] {
            if p.compatible(q) {
                quadrants.push((p, q));
            }
        }
    }
    assert_eq!(quadrants.len(), 15);

    let (lx, ly) = (lengths(x), lengths(y));
    let len = |map: &BTreeMap<Split, f64>, p: Split| map.get(&p).copied().unwrap_or(0.0);
    let mut terminal = 0.0;
    for i in 0..m {
        let t = Split::terminal(i, m);
        terminal += (len(&lx, t) - len(&ly, t)).powi(2);
    }
    let x_int: Vec<Split> = x.internal_splits().collect();
    let y_int: Vec<Split> = y.internal_splits().collect();
    let norm = |map: &BTreeMap<Split, f64>, s: &[Split]| {
        s.iter().map(|&p| len(map, p).powi(2)).sum::<f64>().sqrt()
    };
    let mut best = norm(&lx, &x_int) + norm(&ly, &y_int);

    let holds =
        |quad: (Split, Split), splits: &[Split]| splits.iter().all(|&p| p == quad.0 || p == quad.1);
    let shared = |a: (Split, Split), b: (Split, Split)| -> Option<Split> {
        let common: Vec<Split> = [a.0, a.1]
            .into_iter()
            .filter(|&p| p == b.0 || p == b.1)
            .collect();
        if common.len() == 1 {
            Some(common[0])
        } else {
            None
        }
    };
    let other = |q: (Split, Split), p: Split| if q.0 == p { q.1 } else { q.0 };

    // depth-first over simple chains of at most four quadrants
    let mut stack: Vec<Vec<usize>> = (0..quadrants.len())
        .filter(|&i| holds(quadrants[i], &x_int))
        .map(|i| vec![i])
        .collect();
    while let Some(chain) = stack.pop() {
        let last = *chain.last().unwrap();
        if holds(quadrants[last], &y_int) {
            best = best.min(chain_length(&chain, &quadrants, &lx, &ly, &shared, &other));
        }
        if chain.len() == 4 {
            continue;
        }
        for next in 0..quadrants.len() {
            if chain.contains(&next) {
                continue;
            }
            let Some(s) = shared(quadrants[last], quadrants[next]) else {
                continue;
            };
            if chain.len() >= 2 {
                let prev = shared(quadrants[chain[chain.len() - 2]], quadrants[last]).unwrap();
                if prev == s {
                    continue;
                }
            }
            let mut extended = chain.clone();
            extended.push(next);
            stack.push(extended);
        }
    }
    (terminal + best * best).sqrt()
}

fn chain_length(
    chain: &[usize],
    quadrants: &[(Split, Split)],
    lx: &BTreeMap<Split, f64>,
    ly: &BTreeMap<Split, f64>,
    shared: &dyn Fn((Split, Split), (Split, Split)) -> Option<Split>,
    other: &dyn Fn((Split, Split), Split) -> Split,
) -> f64 {
    let len = |map: &BTreeMap<Split, f64>, p: Split| map.get(&p).copied().unwrap_or(0.0);
    let k = chain.len() - 1;
    // rays[j] is the split laid out at angle 90 * j degrees
    let mut rays: Vec<Split> = Vec::with_capacity(k + 2);
    if k == 0 {
        let q = quadrants[chain[0]];
        rays.push(q.0);
        rays.push(q.1);
    } else {
        let s01 = shared(quadrants[chain[0]], quadrants[chain[1]]).unwrap();
        rays.push(other(quadrants[chain[0]], s01));
        rays.push(s01);
        for i in 1..=k {
            let q = quadrants[chain[i]];
            rays.push(other(q, rays[i]));
        }
    }
    let at = |angle: f64, r: f64| (r * angle.cos(), r * angle.sin());
    let (x0, x1) = (at(0.0, len(lx, rays[0])), at(FRAC_PI_2, len(lx, rays[1])));
    let xp = (x0.0 + x1.0, x0.1 + x1.1);
    let a0 = FRAC_PI_2 * k as f64;
    let (y0, y1) = (
        at(a0, len(ly, rays[k])),
        at(a0 + FRAC_PI_2, len(ly, rays[k + 1])),
    );
    let yp = (y0.0 + y1.0, y0.1 + y1.1);
    let rx = len(lx, rays[0]).hypot(len(lx, rays[1]));
    let ry = len(ly, rays[k]).hypot(len(ly, rays[k + 1]));
    if k >= 2 && rx > 0.0 && ry > 0.0 {
        let ax = len(lx, rays[1]).atan2(len(lx, rays[0]));
        let ay = a0 + len(ly, rays[k + 1]).atan2(len(ly, rays[k]));
        if ay - ax > std::f64::consts::PI {
            return f64::INFINITY;
        }
    }
    ((xp.0 - yp.0).powi(2) + (xp.1 - yp.1).powi(2)).sqrt()
}

/// Geodesic distance by enumerating every orthant sequence.
///
/// Splits of both trees stay fixed; the others form `A = T_x \ T_y` and
/// `B = T_y \ T_x`. A candidate is a pair of ordered partitions
/// `(A_1..A_k)`, `(B_1..B_k)` (blocks may be empty on one side) such that
/// every intermediate orthant `B_1 ∪ .. ∪ B_i ∪ A_{i+1} ∪ .. ∪ A_k` is
/// compatible and the ratios `|A_i| / |B_i|` are non-decreasing. Each
/// candidate is a realisable path; the shortest is the geodesic. Exponential,
/// so only for small trees.
pub fn enumeration_distance(x: &Tree, y: &Tree) -> f64 {
    let (lx, ly) = (lengths(x), lengths(y));
    let mut common = 0.0;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (&p, &l) in &lx {
        match ly.get(&p) {
            Some(&r) => common += (l - r) * (l - r),
            None => a.push((p, l)),
        }
    }
    for (&p, &l) in &ly {
        if !lx.contains_key(&p) {
            b.push((p, l));
        }
    }
    let n = a.len() + b.len();
    assert!(n <= 10, "enumeration oracle is exponential");
    if n == 0 {
        return common.sqrt();
    }
    // label every element with a leg index; legs must be nonempty
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for k in 1..=n {
        enumerate_labels(&mut labels, 0, k, &mut |labels: &[usize]| {
            let mut legs = vec![(Vec::new(), Vec::new()); k];
            for (i, &(p, l)) in a.iter().enumerate() {
                legs[labels[i]].0.push((p, l));
            }
            for (j, &(q, l)) in b.iter().enumerate() {
                legs[labels[a.len() + j]].1.push((q, l));
            }
            if legs.iter().any(|(la, lb)| la.is_empty() && lb.is_empty()) {
                return;
            }
            if let Some(len) = support_length(&legs) {
                best = best.min(len);
            }
        });
    }
    (common + best * best).sqrt()
}

fn enumerate_labels(labels: &mut [usize], pos: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    if pos == labels.len() {
        f(labels);
        return;
    }
    for leg in 0..k {
        labels[pos] = leg;
        enumerate_labels(labels, pos + 1, k, f);
    }
}

type Block = Vec<(Split, f64)>;

fn support_length(legs: &[(Block, Block)]) -> Option<f64> {
    let norm = |v: &Block| v.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let ratio = |(a, b): &(Block, Block)| {
        let (na, nb) = (norm(a), norm(b));
        if nb == 0.0 {
            f64::INFINITY
        } else {
            na / nb
        }
    };
    for w in legs.windows(2) {
        if ratio(&w[0]) > ratio(&w[1]) {
            return None;
        }
    }
    for i in 0..=legs.len() {
        let present: Vec<Split> = legs[..i]
            .iter()
            .flat_map(|l| l.1.iter().map(|e| e.0))
            .chain(legs[i..].iter().flat_map(|l| l.0.iter().map(|e| e.0)))
            .collect();
        for (u, p) in present.iter().enumerate() {
            for q in &present[u + 1..] {
                if !p.compatible(*q) {
                    return None;
                }
            }
        }
    }
    Some(
        legs.iter()
            .map(|l| (norm(&l.0) + norm(&l.1)).powi(2))
            .sum::<f64>()
            .sqrt(),
    )
}

/// Side lengths `a = d(x,y)`, `b = d(x,z)`, `c = d(y,z)`: distance from `z'`
/// to the point at fraction `t` along `x'y'` in the Euclidean comparison
/// triangle (Stewart's theorem).
pub fn comparison_distance(a: f64, b: f64, c: f64, t: f64) -> f64 {
    ((1.0 - t) * b * b + t * c * c - t * (1.0 - t) * a * a)
        .max(0.0)
        .sqrt()
}
