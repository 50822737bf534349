//! Random simple lines for the integration and acceptance tests.

use rand::Rng;
use treespace::{Sign, SimpleLine, Split, Topology, WeightRange};

use super::oracle;

/// Random magnitude-respecting weight inside `r`.
fn weight_in<R: Rng>(r: &WeightRange, rng: &mut R) -> f64 {
    let sign = if r.hi <= 0.0 { -1.0 } else { 1.0 };
    let (near, far) = {
        let (a, b) = (r.lo.abs(), r.hi.abs());
        (a.min(b), a.max(b))
    };
    let mag = match (near == 0.0, far.is_finite()) {
        (true, false) => rng.random_range(0.2..2.0),
        (true, true) => rng.random_range(0.05..1.0) * far,
        (false, false) => near * (1.0 + rng.random_range(0.0..3.0)),
        (false, true) => rng.random_range(near..=far),
    };
    sign * mag
}

/// Random split of `m` taxa that is internal and compatible with `t0`.
fn extending_split<R: Rng>(t0: &Topology, m: usize, rng: &mut R) -> Option<Split> {
    for _ in 0..50 {
        let bits: u128 = rng.random::<u128>() & ((1u128 << m) - 2);
        if let Ok(p) = Split::from_side(bits, m) {
            if !p.is_terminal(m) && t0.compatible_with(p) && !t0.contains(p) {
                return Some(p);
            }
        }
    }
    None
}

/// A valid simple line with up to `max_pairs` pairs through a random
/// midpoint on `m` taxa.
pub fn random_line<R: Rng>(m: usize, max_pairs: usize, rng: &mut R) -> SimpleLine {
    let taxa = oracle::taxa(m);
    let x0 = oracle::random_tree(&taxa, rng, 0.25, 0.2, 2.0);
    let t0 = x0.topology();
    let mut line = SimpleLine::new(x0.clone());
    let target = rng.random_range(1..=max_pairs);
    for _ in 0..200 {
        if line.len() >= target {
            break;
        }
        let internal: Vec<Split> = t0
            .splits()
            .iter()
            .copied()
            .filter(|p| !line.uses(*p))
            .collect();
        let p = if !internal.is_empty() && rng.random_bool(0.75) {
            internal[rng.random_range(0..internal.len())]
        } else {
            match extending_split(&t0, m, rng) {
                Some(p) if !line.uses(p) => p,
                _ => continue,
            }
        };
        let i = rng.random_range(0..=line.len());
        let sign = if rng.random_bool(0.5) {
            Sign::Negative
        } else {
            Sign::Positive
        };
        let t_i: Vec<Split> = line
            .interval_splits(i)
            .into_iter()
            .filter(|&q| q != p)
            .collect();
        let Ok(face) = Topology::new(m, t_i) else {
            continue;
        };
        let Ok(reps) = face.xnni_replacements(p) else {
            continue;
        };
        let reps: Vec<Split> = reps.into_iter().filter(|q| !line.uses(*q)).collect();
        if reps.is_empty() {
            continue;
        }
        let p_prime = reps[rng.random_range(0..reps.len())];
        if let Ok(Some(range)) = line.validate_extension(p, p_prime, i, sign) {
            let w = weight_in(&range, rng);
            if let Ok(next) = line.with_pair(p, p_prime, w, i) {
                line = next;
            }
        }
    }
    line
}

/// Half-width of a parameter window that covers every breakpoint.
pub fn span(line: &SimpleLine) -> f64 {
    line.pairs()
        .iter()
        .map(|pr| pr.s_break.abs())
        .fold(0.0, f64::max)
        + 2.0
}
