//! Simple lines through a midpoint tree and projection of trees onto them.
//!
//! A simple line is parameterized by split pairs `(p, p')` with weights `w`.
//! Along the line `p` has length `λ₀(p) + s·w` while that is non-negative,
//! after which `p'` takes over with the mirrored length. The pair switches
//! at `s = -λ₀(p)/w`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{distance_unchecked, solve_length, Support};
use crate::optim::golden_min;
use crate::split::{Split, Topology};
use crate::tree::{euclidean_unchecked, Tree};

/// Default stopping width for the projection search, relative to `max(1, |s₀|)`.
pub const DEFAULT_GOLDEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPair {
    pub p: Split,
    pub p_prime: Split,
    pub w: f64,
    /// Where `p` reaches zero length and is replaced by `p'`.
    pub s_break: f64,
}

/// Direction of travel for a proposed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn of(w: f64) -> Sign {
        if w < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Positive => 1.0,
        }
    }
}

/// Admissible weights for a new pair, `lo ≤ w ≤ hi`. Zero is never
/// admissible even when it is an endpoint; infinite endpoints are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl WeightRange {
    /// Restricts to `min_abs ≤ |w| ≤ cap`. `None` if nothing is left.
    pub fn clip(&self, min_abs: f64, cap: f64) -> Option<WeightRange> {
        let (lo, hi) = if self.hi <= 0.0 {
            (self.lo.max(-cap), self.hi.min(-min_abs))
        } else {
            (self.lo.max(min_abs), self.hi.min(cap))
        };
        (lo <= hi).then_some(WeightRange { lo, hi })
    }

    pub fn contains(&self, w: f64) -> bool {
        w != 0.0 && self.lo <= w && w <= self.hi
    }
}

/// An unbounded geodesic through a midpoint tree made of split pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleLine {
    midpoint: Tree,
    pairs: Vec<SplitPair>,
}

/// Closest point of a line to a tree.
#[derive(Debug, Clone)]
pub struct Projection {
    pub s_star: f64,
    pub y: Tree,
    pub d_perp: f64,
    pub d_par: f64,
}

impl SimpleLine {
    /// The line with no pairs: every point is the midpoint.
    pub fn new(midpoint: Tree) -> SimpleLine {
        SimpleLine {
            midpoint,
            pairs: Vec::new(),
        }
    }

    /// Builds a line from `(p, p', w)` triples. Pairs are ordered by
    /// breakpoint, ties keeping the given order, then the result is checked.
    pub fn from_pairs<I>(midpoint: Tree, pairs: I) -> Result<SimpleLine>
    where
        I: IntoIterator<Item = (Split, Split, f64)>,
    {
        let mut out = Vec::new();
        for (p, p_prime, w) in pairs {
            if !(w.is_finite() && w != 0.0) {
                return Err(Error::InvalidLine(format!(
                    "weight {w} must be finite and nonzero"
                )));
            }
            let s_break = breakpoint(midpoint.length(p), w);
            out.push(SplitPair {
                p,
                p_prime,
                w,
                s_break,
            });
        }
        out.sort_by(|a, b| a.s_break.total_cmp(&b.s_break));
        let line = SimpleLine {
            midpoint,
            pairs: out,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn midpoint(&self) -> &Tree {
        &self.midpoint
    }

    /// Pairs in breakpoint order.
    pub fn pairs(&self) -> &[SplitPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Speed of the line: `d(y(s), y(s')) = |s - s'|·‖w‖`.
    pub fn weight_norm(&self) -> f64 {
        self.pairs.iter().map(|pr| pr.w * pr.w).sum::<f64>().sqrt()
    }

    /// Interval `i` runs from breakpoint `i-1` to breakpoint `i`, with
    /// infinite ends.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.pairs[i - 1].s_break
        };
        let hi = self.pairs.get(i).map_or(f64::INFINITY, |pr| pr.s_break);
        (lo, hi)
    }

    /// True if `q` is one of the line's `p` or `p'` splits.
    pub fn uses(&self, q: Split) -> bool {
        self.pairs.iter().any(|pr| pr.p == q || pr.p_prime == q)
    }

    /// Internal splits present on the open interval `i`, sorted.
    pub fn interval_splits(&self, i: usize) -> Vec<Split> {
        let mut v: Vec<Split> = self
            .midpoint
            .internal_splits()
            .filter(|q| !self.pairs.iter().any(|pr| pr.p == *q))
            .collect();
        for (j, pr) in self.pairs.iter().enumerate() {
            v.push(if p_present(pr, j < i) {
                pr.p
            } else {
                pr.p_prime
            });
        }
        v.sort_unstable();
        v
    }

    /// Topology on interval `i`; fails if the line is not valid there.
    pub fn topology(&self, i: usize) -> Result<Topology> {
        Topology::new(self.midpoint.n_taxa(), self.interval_splits(i))
    }

    /// The tree at parameter `s`. Splits whose length is exactly zero are
    /// left out. A point on a breakpoint counts as lying on the interval
    /// below it.
    pub fn evaluate(&self, s: f64) -> Tree {
        let i = self.pairs.partition_point(|pr| pr.s_break < s);
        let mut entries: Vec<(Split, f64)> = self
            .midpoint
            .entries()
            .iter()
            .copied()
            .filter(|(q, _)| !self.pairs.iter().any(|pr| pr.p == *q))
            .collect();
        for (j, pr) in self.pairs.iter().enumerate() {
            let v = self.midpoint.length(pr.p) + s * pr.w;
            let q = if p_present(pr, j < i) {
                pr.p
            } else {
                pr.p_prime
            };
            entries.push((q, v.abs()));
        }
        Tree::from_unsorted_unchecked(self.midpoint.taxa().clone(), entries)
    }

    /// Full validity check: breakpoint order and values, distinct splits,
    /// compatible topologies on every interval and an XNNI move at every
    /// breakpoint.
    pub fn validate(&self) -> Result<()> {
        for w in self.pairs.windows(2) {
            if w[0].s_break > w[1].s_break {
                return Err(Error::InvalidLine("breakpoints out of order".into()));
            }
        }
        for pr in &self.pairs {
            if !(pr.w.is_finite() && pr.w != 0.0) {
                return Err(Error::InvalidLine(format!(
                    "weight {} must be finite and nonzero",
                    pr.w
                )));
            }
            let expected = breakpoint(self.midpoint.length(pr.p), pr.w);
            if (pr.s_break - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(Error::InvalidLine(format!(
                    "breakpoint {} does not match -λ₀/w = {expected}",
                    pr.s_break
                )));
            }
        }
        self.check_structure()
    }

    /// Everything in [`validate`](Self::validate) that depends only on the
    /// order of the pairs.
    fn check_structure(&self) -> Result<()> {
        let m = self.midpoint.n_taxa();
        let taxa = self.midpoint.taxa();
        let t0 = self.midpoint.topology();
        let mut seen: Vec<Split> = Vec::new();
        for pr in &self.pairs {
            for q in [pr.p, pr.p_prime] {
                if q.is_terminal(m) {
                    return Err(Error::TerminalSplit(taxa.format_split(q)));
                }
                if seen.contains(&q) {
                    return Err(Error::InvalidLine(format!(
                        "{} used twice",
                        taxa.format_split(q)
                    )));
                }
                seen.push(q);
            }
            if !t0.compatible_with(pr.p) {
                return Err(Error::IncompatibleSplits(
                    taxa.format_split(pr.p),
                    "the midpoint topology".into(),
                ));
            }
            if pr.p.compatible(pr.p_prime) {
                return Err(Error::InvalidLine(format!(
                    "{} and {} are compatible",
                    taxa.format_split(pr.p),
                    taxa.format_split(pr.p_prime)
                )));
            }
        }
        for i in 0..=self.pairs.len() {
            self.topology(i)
                .map_err(|e| Error::InvalidLine(format!("interval {i}: {e}")))?;
        }
        for (j, pr) in self.pairs.iter().enumerate() {
            let before = self.interval_splits(j);
            let face: Vec<Split> = before
                .into_iter()
                .filter(|&q| q != pr.p && q != pr.p_prime)
                .collect();
            let face = Topology::from_sorted_unchecked(m, face);
            if !face.xnni_replacements(pr.p)?.contains(&pr.p_prime) {
                return Err(Error::InvalidLine(format!(
                    "{} -> {} is not an XNNI move at s = {}",
                    taxa.format_split(pr.p),
                    taxa.format_split(pr.p_prime),
                    pr.s_break
                )));
            }
        }
        Ok(())
    }

    /// Weights for which `(p, p')` with the given sign can be added so that
    /// the switch happens on interval `i`. `Ok(None)` when the geometric or
    /// topological constraints rule the pair out there.
    pub fn validate_extension(
        &self,
        p: Split,
        p_prime: Split,
        i: usize,
        sign: Sign,
    ) -> Result<Option<WeightRange>> {
        let m = self.midpoint.n_taxa();
        let taxa = self.midpoint.taxa();
        if i > self.pairs.len() {
            return Err(Error::InvalidParameter(format!(
                "interval {i} out of range for a line with {} pairs",
                self.pairs.len()
            )));
        }
        if p.is_terminal(m) {
            return Err(Error::TerminalSplit(taxa.format_split(p)));
        }
        if !self.midpoint.topology().compatible_with(p) {
            return Err(Error::IncompatibleSplits(
                taxa.format_split(p),
                "the midpoint topology".into(),
            ));
        }
        if self.uses(p) || self.uses(p_prime) {
            return Err(Error::InvalidLine("split already used on the line".into()));
        }
        let t_i = self.interval_splits(i);
        if !t_i.iter().all(|q| q.compatible(p)) {
            return Ok(None);
        }
        let face =
            Topology::from_sorted_unchecked(m, t_i.iter().copied().filter(|&q| q != p).collect());
        if !face.xnni_replacements(p)?.contains(&p_prime) {
            return Err(Error::InvalidSplit(format!(
                "{} is not an XNNI replacement of {} on interval {i}",
                taxa.format_split(p_prime),
                taxa.format_split(p)
            )));
        }
        // p must hold wherever its length is positive and p' elsewhere
        let (p_side, q_side) = match sign {
            Sign::Negative => (0..=i, i..=self.pairs.len()),
            Sign::Positive => (i..=self.pairs.len(), 0..=i),
        };
        for j in p_side {
            if !self.interval_splits(j).iter().all(|q| q.compatible(p)) {
                return Ok(None);
            }
        }
        for j in q_side {
            if !self
                .interval_splits(j)
                .iter()
                .all(|&q| q == p || q.compatible(p_prime))
            {
                return Ok(None);
            }
        }
        let (lo, hi) = self.interval(i);
        let Some(range) = weight_range(self.midpoint.length(p), lo, hi, sign) else {
            return Ok(None);
        };
        // the new pair must not break the moves of the existing ones
        let trial = self.insert_unchecked(p, p_prime, sample_weight(&range), i);
        if trial.check_structure().is_err() {
            return Ok(None);
        }
        Ok(Some(range))
    }

    /// Adds a pair switching on interval `i` and checks the result.
    pub fn with_pair(&self, p: Split, p_prime: Split, w: f64, i: usize) -> Result<SimpleLine> {
        let sign = Sign::of(w);
        match self.validate_extension(p, p_prime, i, sign)? {
            Some(range) if range.contains(w) => {
                let line = self.insert_unchecked(p, p_prime, w, i);
                line.validate()?;
                Ok(line)
            }
            _ => Err(Error::InvalidLine(format!(
                "weight {w} is infeasible on interval {i}"
            ))),
        }
    }

    /// Inserts at position `i` with the breakpoint clamped into interval `i`.
    pub(crate) fn insert_unchecked(
        &self,
        p: Split,
        p_prime: Split,
        w: f64,
        i: usize,
    ) -> SimpleLine {
        let (lo, hi) = self.interval(i);
        let s_break = breakpoint(self.midpoint.length(p), w).clamp(lo, hi);
        let mut pairs = self.pairs.clone();
        pairs.insert(
            i,
            SplitPair {
                p,
                p_prime,
                w,
                s_break,
            },
        );
        SimpleLine {
            midpoint: self.midpoint.clone(),
            pairs,
        }
    }

    /// The same line traversed the other way: `mirrored().evaluate(s)` equals
    /// `evaluate(-s)`.
    pub fn mirrored(&self) -> SimpleLine {
        let pairs = self
            .pairs
            .iter()
            .rev()
            .map(|pr| SplitPair {
                w: -pr.w,
                s_break: 0.0 - pr.s_break,
                ..*pr
            })
            .collect();
        SimpleLine {
            midpoint: self.midpoint.clone(),
            pairs,
        }
    }

    /// A pair whose `p` is absent from the midpoint can be written either way
    /// round: `(p, p', w)` and `(p', p, -w)` trace the same trees.
    fn relabels(&self, pr: &SplitPair) -> bool {
        pr.p_prime < pr.p && self.midpoint.length(pr.p) == 0.0
    }

    fn runs_backwards(&self) -> bool {
        self.pairs
            .iter()
            .min_by_key(|pr| pr.p)
            .is_some_and(|pr| pr.w < 0.0)
    }

    /// Whether this is the representative returned by
    /// [`canonical`](Self::canonical).
    pub fn is_canonical(&self) -> bool {
        !self.pairs.iter().any(|pr| self.relabels(pr)) && !self.runs_backwards()
    }

    /// Representative of the lines tracing the same trees with the same
    /// speed: pairs through the midpoint list the smaller split first, and
    /// the pair with the smallest `p` has a positive weight.
    pub fn canonical(&self) -> SimpleLine {
        let pairs = self
            .pairs
            .iter()
            .map(|pr| match self.relabels(pr) {
                true => SplitPair {
                    p: pr.p_prime,
                    p_prime: pr.p,
                    w: -pr.w,
                    s_break: pr.s_break,
                },
                false => *pr,
            })
            .collect();
        let line = SimpleLine {
            midpoint: self.midpoint.clone(),
            pairs,
        };
        if line.runs_backwards() {
            line.mirrored()
        } else {
            line
        }
    }

    /// Indices of the pairs that may be removed: the outermost pair on each
    /// side of the midpoint.
    pub fn removable_pairs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(first) = self.pairs.first() {
            if first.s_break <= 0.0 {
                out.push(0);
            }
        }
        let last = self.pairs.len().wrapping_sub(1);
        if let Some(pr) = self.pairs.last() {
            if pr.s_break >= 0.0 && !out.contains(&last) {
                out.push(last);
            }
        }
        out
    }

    /// Removes pair `j` and checks the result.
    pub fn without_pair(&self, j: usize) -> Result<SimpleLine> {
        if j >= self.pairs.len() {
            return Err(Error::InvalidParameter(format!("no pair {j}")));
        }
        let mut pairs = self.pairs.clone();
        pairs.remove(j);
        let line = SimpleLine {
            midpoint: self.midpoint.clone(),
            pairs,
        };
        line.validate()?;
        Ok(line)
    }
}

fn p_present(pr: &SplitPair, passed: bool) -> bool {
    (pr.w > 0.0) == passed
}

fn breakpoint(lambda0: f64, w: f64) -> f64 {
    if lambda0 == 0.0 {
        0.0
    } else {
        -lambda0 / w
    }
}

/// Weights of the given sign whose breakpoint `-λ₀/w` lies in `[lo, hi]`.
fn weight_range(lambda0: f64, lo: f64, hi: f64, sign: Sign) -> Option<WeightRange> {
    if lambda0 == 0.0 {
        if lo > 0.0 || hi < 0.0 {
            return None;
        }
        return Some(match sign {
            Sign::Negative => WeightRange {
                lo: f64::NEG_INFINITY,
                hi: 0.0,
            },
            Sign::Positive => WeightRange {
                lo: 0.0,
                hi: f64::INFINITY,
            },
        });
    }
    match sign {
        // breakpoint at s > 0
        Sign::Negative => {
            if hi <= 0.0 {
                return None;
            }
            let lo = lo.max(0.0);
            let w_lo = if lo == 0.0 {
                f64::NEG_INFINITY
            } else {
                -lambda0 / lo
            };
            let w_hi = if hi.is_infinite() { 0.0 } else { -lambda0 / hi };
            Some(WeightRange { lo: w_lo, hi: w_hi })
        }
        // breakpoint at s < 0
        Sign::Positive => {
            if lo >= 0.0 {
                return None;
            }
            let hi = hi.min(0.0);
            let w_lo = if lo.is_infinite() { 0.0 } else { lambda0 / -lo };
            let w_hi = if hi == 0.0 {
                f64::INFINITY
            } else {
                lambda0 / -hi
            };
            Some(WeightRange { lo: w_lo, hi: w_hi })
        }
    }
}

/// Some nonzero finite weight inside the range.
fn sample_weight(r: &WeightRange) -> f64 {
    match (r.lo.is_finite(), r.hi.is_finite()) {
        (true, true) if r.lo == 0.0 => r.hi / 2.0,
        (true, true) if r.hi == 0.0 => r.lo / 2.0,
        (true, true) => 0.5 * (r.lo + r.hi),
        (true, false) => r.lo.abs().max(1.0) * 2.0,
        (false, true) => -(r.hi.abs().max(1.0) * 2.0),
        (false, false) => 1.0,
    }
}

/// Projects `x` onto the line with the default search tolerance.
pub fn project(x: &Tree, line: &SimpleLine) -> Result<Projection> {
    project_with_tol(x, line, DEFAULT_GOLDEN_TOL)
}

/// Projects `x` onto the line. A Euclidean first guess `s₀` over the
/// embedded segments of the line brackets the answer within
/// `s₀ ± √2·ε/‖w‖`, where `ε` is the Euclidean distance from `x` to the
/// guess; golden-section search then narrows the bracket to
/// `tol·max(1, |s₀|)`.
pub fn project_with_tol(x: &Tree, line: &SimpleLine, tol: f64) -> Result<Projection> {
    x.ensure_same_taxa(&line.midpoint)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    Ok(project_unchecked(x, line, tol))
}

fn project_unchecked(x: &Tree, line: &SimpleLine, tol: f64) -> Projection {
    let x0 = &line.midpoint;
    if line.is_empty() {
        let d = distance_unchecked(x, x0);
        return Projection {
            s_star: 0.0,
            y: x0.clone(),
            d_perp: d,
            d_par: 0.0,
        };
    }
    let norm_w = line.weight_norm();
    let reach = distance_unchecked(x, x0) / norm_w + 1.0;
    let s0 = euclidean_guess(x, line, reach);
    let eps = euclidean_unchecked(x, &line.evaluate(s0));
    let half = 2f64.sqrt() * eps / norm_w * (1.0 + 1e-9);
    let mut hint: Option<Support> = None;
    let (s_star, _) = golden_min(s0 - half, s0 + half, tol * s0.abs().max(1.0), |s| {
        let (d, support) = solve_length(x, &line.evaluate(s), hint.as_ref());
        hint = Some(support);
        d
    });
    let y = line.evaluate(s_star);
    let d_perp = distance_unchecked(x, &y);
    Projection {
        s_star,
        y,
        d_perp,
        d_par: s_star.abs() * norm_w,
    }
}

/// Closest point in the Euclidean embedding over every segment of the line,
/// restricted to `|s| ≤ reach`.
fn euclidean_guess(x: &Tree, line: &SimpleLine, reach: f64) -> f64 {
    let x0 = &line.midpoint;
    let mut fixed = 0.0;
    crate::tree::merge_entries(x, x0, |q, lx, l0| {
        if !line.uses(q) {
            fixed += (l0 - lx) * (l0 - lx);
        }
    });
    let k = line.pairs.len();
    let lambda: Vec<f64> = line.pairs.iter().map(|pr| x0.length(pr.p)).collect();
    let xp: Vec<(f64, f64)> = line
        .pairs
        .iter()
        .map(|pr| (x.length(pr.p), x.length(pr.p_prime)))
        .collect();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=k {
        let (lo, hi) = line.interval(i);
        let (lo, hi) = (lo.max(-reach), hi.min(reach));
        if lo > hi {
            continue;
        }
        // squared distance is c + 2·a·s + b·s² on this segment
        let (mut a, mut b, mut c) = (0.0, 0.0, fixed);
        for (j, pr) in line.pairs.iter().enumerate() {
            let (base, slope, target, other) = if p_present(pr, j < i) {
                (lambda[j], pr.w, xp[j].0, xp[j].1)
            } else {
                (-lambda[j], -pr.w, xp[j].1, xp[j].0)
            };
            let r = base - target;
            a += slope * r;
            b += slope * slope;
            c += r * r + other * other;
        }
        let s = (-a / b).clamp(lo, hi);
        let val = c + 2.0 * a * s + b * s * s;
        if val < best.0 {
            best = (val, s);
        }
    }
    best.1
}

/// Projects every tree, in parallel, keeping input order.
pub fn project_all(line: &SimpleLine, data: &[Tree], tol: f64) -> Result<Vec<Projection>> {
    for x in data {
        x.ensure_same_taxa(&line.midpoint)?;
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    Ok(data
        .par_iter()
        .map(|x| project_unchecked(x, line, tol))
        .collect())
}

/// `(Σ d(x₀, yᵢ)², Σ d(xᵢ, yᵢ)²)` over the projections `yᵢ` of the data.
pub fn sums_of_squares(line: &SimpleLine, data: &[Tree]) -> Result<(f64, f64)> {
    let proj = project_all(line, data, DEFAULT_GOLDEN_TOL)?;
    Ok(sum_projections(&proj))
}

pub(crate) fn sum_projections(proj: &[Projection]) -> (f64, f64) {
    proj.iter().fold((0.0, 0.0), |(par, perp), pr| {
        (par + pr.d_par * pr.d_par, perp + pr.d_perp * pr.d_perp)
    })
}
