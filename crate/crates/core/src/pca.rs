//! First principal geodesic path: the best simple line through a midpoint,
//! found greedily or by simulated annealing over birth and death moves.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::consensus::{back_transform_weights, normalize_lengths, ScaleMap};
use crate::error::{Error, Result};
use crate::geodesic::distance_unchecked;
use crate::line::{project_all, sum_projections, Projection, Sign, SimpleLine, WeightRange};
use crate::optim::golden_max;
use crate::split::Split;
use crate::tree::Tree;

/// Which sum of squares the search optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Maximize `Σ d(x₀, yᵢ)²`.
    Parallel,
    /// Minimize `Σ d(xᵢ, yᵢ)²`.
    Perpendicular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub iterations: usize,
    pub tau0: f64,
    pub decay: f64,
    pub birth_floor: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            iterations: 5000,
            tau0: 1.0,
            decay: 0.999,
            birth_floor: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaConfig {
    pub objective: Objective,
    /// Largest `|w|` searched. `None` derives a cap from the data.
    pub weight_cap: Option<f64>,
    /// Smallest `|w|` searched, and the relative stopping width of the
    /// weight search.
    pub weight_tol: f64,
    /// Relative stopping width of the projection search.
    pub golden_tol: f64,
    pub annealing: AnnealConfig,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            objective: Objective::Parallel,
            weight_cap: None,
            weight_tol: 1e-6,
            golden_tol: crate::line::DEFAULT_GOLDEN_TOL,
            annealing: AnnealConfig::default(),
            seed: 0,
            normalize: false,
        }
    }
}

impl PcaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.golden_tol > 0.0) {
            return bad("golden_tol must be positive");
        }
        if !(self.weight_tol > 0.0) {
            return bad("weight_tol must be positive");
        }
        if let Some(cap) = self.weight_cap {
            if !(cap > self.weight_tol && cap.is_finite()) {
                return bad("weight_cap must be finite and exceed weight_tol");
            }
        }
        let a = &self.annealing;
        if !(a.tau0 > 0.0 && a.tau0.is_finite()) {
            return bad("tau0 must be positive");
        }
        if !(a.decay > 0.0 && a.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(a.birth_floor > 0.0 && a.birth_floor < 1.0) {
            return bad("birth_floor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// The principal line on the scale of the input data.
    pub line: SimpleLine,
    /// The line the search worked with; differs from `line` only when
    /// branch lengths were normalized.
    pub analysis_line: SimpleLine,
    /// Weights of `line` divided by their Euclidean norm, in pair order.
    pub normalized_weights: Vec<f64>,
    /// Projections of the data onto `analysis_line`.
    pub projections: Vec<Projection>,
    pub d2_par: f64,
    pub d2_perp: f64,
    pub d2_0: f64,
    /// `d2_par / d2_0`, absent when every tree equals the midpoint.
    pub proportion: Option<f64>,
    pub scale_map: Option<ScaleMap>,
    /// Objective value of the empty line followed by the value after each
    /// committed pair (greedy) or each new best state (annealing):
    /// `d2_par` for the parallel objective, `d2_perp` for the perpendicular
    /// one.
    pub trace: Vec<f64>,
    /// `(p, p')` of each pair in the order greedy committed it. Annealing
    /// reports its best state in line order.
    pub commits: Vec<(Split, Split)>,
}

/// `d2_par / d2_0`.
pub fn proportion_of_variance(result: &PcaResult) -> Result<f64> {
    result
        .proportion
        .ok_or_else(|| Error::Degenerate("every tree equals the midpoint (d2_0 = 0)".into()))
}

/// Internal splits found in at least one tree, in canonical order.
pub fn feasible_splits(data: &[Tree]) -> Result<Vec<Split>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("no trees"));
    }
    let set: BTreeSet<Split> = data.iter().flat_map(|t| t.internal_splits()).collect();
    Ok(set.into_iter().collect())
}

/// Ten times the longest branch in the data over the shortest internal
/// branch of the midpoint.
pub fn default_weight_cap(data: &[Tree], x0: &Tree) -> f64 {
    let longest = data
        .iter()
        .chain(std::iter::once(x0))
        .flat_map(|t| t.entries().iter().map(|e| e.1))
        .fold(0.0, f64::max);
    let shortest = x0
        .internal_splits()
        .map(|p| x0.length(p))
        .fold(f64::INFINITY, f64::min);
    if shortest.is_finite() {
        10.0 * longest / shortest
    } else {
        10.0 * longest
    }
}

/// Objective evaluation over a fixed data set; higher is better for both
/// objectives.
struct Scorer<'a> {
    data: &'a [Tree],
    objective: Objective,
    golden_tol: f64,
}

impl Scorer<'_> {
    fn score(&self, line: &SimpleLine) -> Result<f64> {
        // equivalent lines must score identically, bit for bit
        if !line.is_canonical() {
            return self.score(&line.canonical());
        }
        let proj = project_all(line, self.data, self.golden_tol)?;
        let (par, perp) = sum_projections(&proj);
        Ok(match self.objective {
            Objective::Parallel => par,
            Objective::Perpendicular => -perp,
        })
    }
}

/// Golden-section search for the weight of a new pair `(p, p')` switching on
/// interval `i`, with the other weights held fixed. Returns the weight and
/// the objective value (`d2_par` for the parallel objective, `d2_perp` for
/// the perpendicular one).
#[allow(clippy::too_many_arguments)]
pub fn optimize_weight(
    line: &SimpleLine,
    p: Split,
    p_prime: Split,
    i: usize,
    range: WeightRange,
    data: &[Tree],
    config: &PcaConfig,
) -> Result<(f64, f64)> {
    config.validate()?;
    let cap = config
        .weight_cap
        .unwrap_or_else(|| default_weight_cap(data, line.midpoint()));
    let range = range
        .clip(config.weight_tol, cap)
        .ok_or_else(|| Error::Infeasible("no admissible weight within the cap".into()))?;
    let scorer = Scorer {
        data,
        objective: config.objective,
        golden_tol: config.golden_tol,
    };
    let (w, score) = best_weight(line, p, p_prime, i, range, &scorer, config.weight_tol)?;
    Ok(match config.objective {
        Objective::Parallel => (w, score),
        Objective::Perpendicular => (w, -score),
    })
}

/// Number of log-spaced probes used to bracket the weight over wide ranges.
const SCAN_POINTS: usize = 16;

fn best_weight(
    line: &SimpleLine,
    p: Split,
    p_prime: Split,
    i: usize,
    range: WeightRange,
    scorer: &Scorer,
    weight_tol: f64,
) -> Result<(f64, f64)> {
    let sign = if range.hi <= 0.0 { -1.0 } else { 1.0 };
    let (a, b) = {
        let (x, y) = (range.lo.abs(), range.hi.abs());
        (x.min(y), x.max(y))
    };
    let mut err = None;
    let mut f = |mag: f64| -> f64 {
        match scorer.score(&line.insert_unchecked(p, p_prime, sign * mag, i)) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    // alone on the line, only the direction of the weight matters
    if line.is_empty() {
        let mag = 1.0f64.clamp(a, b);
        let v = f(mag);
        return match err {
            Some(e) => Err(e),
            None => Ok((sign * mag, v)),
        };
    }
    let (lo, hi, scanned) = if b > 10.0 * a {
        let ratio = (b / a).powf(1.0 / (SCAN_POINTS - 1) as f64);
        let pts: Vec<f64> = (0..SCAN_POINTS)
            .map(|k| {
                if k + 1 == SCAN_POINTS {
                    b
                } else {
                    a * ratio.powi(k as i32)
                }
            })
            .collect();
        let vals: Vec<f64> = pts.iter().map(|&x| f(x)).collect();
        let mut j = 0;
        for k in 1..pts.len() {
            if vals[k] > vals[j] {
                j = k;
            }
        }
        let lo = pts[j.saturating_sub(1)];
        let hi = pts[(j + 1).min(pts.len() - 1)];
        (lo, hi, Some((pts[j], vals[j])))
    } else {
        (a, b, None)
    };
    let tol = weight_tol * lo.max(1.0);
    let (mut mag, mut v) = golden_max(lo, hi, tol, &mut f);
    if let Some((m0, v0)) = scanned {
        if v0 > v {
            (mag, v) = (m0, v0);
        }
    }
    match err {
        Some(e) => Err(e),
        None => Ok((sign * mag, v)),
    }
}

/// Data and midpoint on the scale the search works on.
struct Prepared {
    data: Vec<Tree>,
    x0: Tree,
    scales: Option<ScaleMap>,
    splits: Vec<Split>,
    d2_0: f64,
    cap: f64,
}

fn prepare(data: &[Tree], x0: &Tree, config: &PcaConfig) -> Result<Prepared> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("no trees"));
    }
    for t in data {
        x0.ensure_same_taxa(t)?;
    }
    let (data, x0, scales) = if config.normalize {
        let (scaled, scales) = normalize_lengths(data)?;
        let x0 = scales.scale(x0);
        (scaled, x0, Some(scales))
    } else {
        (data.to_vec(), x0.clone(), None)
    };
    let d2_0 = data
        .par_iter()
        .map(|x| {
            let d = distance_unchecked(&x0, x);
            d * d
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let splits = feasible_splits(&data)?;
    let cap = config
        .weight_cap
        .unwrap_or_else(|| default_weight_cap(&data, &x0));
    Ok(Prepared {
        data,
        x0,
        scales,
        splits,
        d2_0,
        cap,
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    p: Split,
    p_prime: Split,
    interval: usize,
    range: WeightRange,
}

/// Every admissible extension of `line` by an unused pair from `splits`,
/// in canonical order of `(p, p', interval, sign)`.
fn candidates(
    line: &SimpleLine,
    splits: &[Split],
    cap: f64,
    weight_tol: f64,
    only_p: Option<Split>,
) -> Vec<Candidate> {
    let t0 = line.midpoint().topology();
    let mut out = Vec::new();
    for &p in splits {
        if only_p.is_some_and(|q| q != p) || line.uses(p) || !t0.compatible_with(p) {
            continue;
        }
        for &p_prime in splits {
            if p_prime == p || line.uses(p_prime) || p.compatible(p_prime) {
                continue;
            }
            for interval in 0..=line.len() {
                for sign in [Sign::Negative, Sign::Positive] {
                    if let Ok(Some(r)) = line.validate_extension(p, p_prime, interval, sign) {
                        if let Some(range) = r.clip(weight_tol, cap) {
                            out.push(Candidate {
                                p,
                                p_prime,
                                interval,
                                range,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn finish(
    prep: Prepared,
    line: SimpleLine,
    original_x0: &Tree,
    config: &PcaConfig,
    trace: Vec<f64>,
    commits: Option<Vec<(Split, Split)>>,
) -> Result<PcaResult> {
    let line = line.canonical();
    let trace = match config.objective {
        Objective::Parallel => trace,
        Objective::Perpendicular => trace.into_iter().map(|v| -v).collect(),
    };
    let commits =
        commits.unwrap_or_else(|| line.pairs().iter().map(|pr| (pr.p, pr.p_prime)).collect());
    let projections = project_all(&line, &prep.data, config.golden_tol)?;
    let (d2_par, d2_perp) = sum_projections(&projections);
    let original = match &prep.scales {
        Some(scales) => back_transform_weights(&line, scales, original_x0)?,
        None => line.clone(),
    };
    let norm = original.weight_norm();
    let normalized_weights = original.pairs().iter().map(|pr| pr.w / norm).collect();
    let proportion = (prep.d2_0 > 0.0).then(|| d2_par / prep.d2_0);
    Ok(PcaResult {
        line: original,
        analysis_line: line,
        normalized_weights,
        projections,
        d2_par,
        d2_perp,
        d2_0: prep.d2_0,
        proportion,
        scale_map: prep.scales,
        trace,
        commits,
    })
}

/// Greedy search: repeatedly adds the pair, interval and weight that most
/// improve the objective, until nothing improves it by more than
/// `1e-10·d2_0` or the midpoint's `m - 3` splits are exhausted.
pub fn greedy_search(data: &[Tree], x0: &Tree, config: &PcaConfig) -> Result<PcaResult> {
    let prep = prepare(data, x0, config)?;
    let scorer = Scorer {
        data: &prep.data,
        objective: config.objective,
        golden_tol: config.golden_tol,
    };
    let m = prep.x0.n_taxa();
    let mut line = SimpleLine::new(prep.x0.clone());
    let mut current = scorer.score(&line)?;
    let mut trace = vec![current];
    let mut commits = Vec::new();
    while line.len() < m - 3 {
        let cands = candidates(&line, &prep.splits, prep.cap, config.weight_tol, None);
        let scored: Vec<Result<(f64, f64)>> = cands
            .par_iter()
            .map(|c| {
                best_weight(
                    &line,
                    c.p,
                    c.p_prime,
                    c.interval,
                    c.range,
                    &scorer,
                    config.weight_tol,
                )
            })
            .collect();
        let mut order: Vec<(usize, f64, f64)> = Vec::with_capacity(scored.len());
        for (k, r) in scored.into_iter().enumerate() {
            let (w, v) = r?;
            order.push((k, w, v));
        }
        // best score first, ties in candidate order
        order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        let mut committed = false;
        for &(k, w, v) in &order {
            if !(v - current > 1e-10 * prep.d2_0) {
                break;
            }
            let c = &cands[k];
            let next = line.insert_unchecked(c.p, c.p_prime, w, c.interval);
            if next.validate().is_ok() {
                line = next;
                current = v;
                trace.push(v);
                commits.push((c.p, c.p_prime));
                committed = true;
                break;
            }
        }
        if !committed {
            break;
        }
    }
    finish(prep, line, x0, config, trace, Some(commits))
}

type LineKey = Vec<(u128, u128, u64)>;

fn key(line: &SimpleLine) -> LineKey {
    line.pairs()
        .iter()
        .map(|pr| (pr.p.bits(), pr.p_prime.bits(), pr.w.to_bits()))
        .collect()
}

struct Annealer<'a> {
    prep: &'a Prepared,
    scorer: Scorer<'a>,
    weight_tol: f64,
    scores: HashMap<LineKey, f64>,
    births: HashMap<(LineKey, u128, u128, usize, bool), (f64, f64)>,
}

impl Annealer<'_> {
    fn score(&mut self, line: &SimpleLine) -> Result<f64> {
        let k = key(line);
        if let Some(&v) = self.scores.get(&k) {
            return Ok(v);
        }
        let v = self.scorer.score(line)?;
        self.scores.insert(k, v);
        Ok(v)
    }

    fn birth(&mut self, line: &SimpleLine, rng: &mut ChaCha8Rng) -> Result<Option<SimpleLine>> {
        let t0 = line.midpoint().topology();
        let pool: Vec<Split> = self
            .prep
            .splits
            .iter()
            .copied()
            .filter(|&p| !line.uses(p) && t0.compatible_with(p))
            .collect();
        if pool.is_empty() {
            return Ok(None);
        }
        let p = pool[rng.random_range(0..pool.len())];
        let options = candidates(
            line,
            &self.prep.splits,
            self.prep.cap,
            self.weight_tol,
            Some(p),
        );
        let mut primes: Vec<Split> = options.iter().map(|c| c.p_prime).collect();
        primes.dedup();
        if primes.is_empty() {
            return Ok(None);
        }
        let p_prime = primes[rng.random_range(0..primes.len())];
        let moves: Vec<&Candidate> = options.iter().filter(|c| c.p_prime == p_prime).collect();
        let c = *moves[rng.random_range(0..moves.len())];
        let memo = (
            key(line),
            p.bits(),
            p_prime.bits(),
            c.interval,
            c.range.hi > 0.0,
        );
        let (w, v) = match self.births.get(&memo) {
            Some(&hit) => hit,
            None => {
                let hit = best_weight(
                    line,
                    p,
                    p_prime,
                    c.interval,
                    c.range,
                    &self.scorer,
                    self.weight_tol,
                )?;
                self.births.insert(memo, hit);
                hit
            }
        };
        let next = line.insert_unchecked(p, p_prime, w, c.interval);
        if next.validate().is_err() {
            return Ok(None);
        }
        self.scores.entry(key(&next)).or_insert(v);
        Ok(Some(next))
    }

    fn death(&mut self, line: &SimpleLine, rng: &mut ChaCha8Rng) -> Option<SimpleLine> {
        let ends = line.removable_pairs();
        if ends.is_empty() {
            return None;
        }
        line.without_pair(ends[rng.random_range(0..ends.len())])
            .ok()
    }
}

/// Simulated annealing over simple lines. Each iteration proposes a birth
/// (a new pair with its best weight) or a death (removing an outermost
/// pair). Improvements are always accepted, others with probability
/// `(1 - δ/D)^(1/τ)`; `τ` decays geometrically. Returns the best line seen.
pub fn anneal_search(data: &[Tree], x0: &Tree, config: &PcaConfig) -> Result<PcaResult> {
    let prep = prepare(data, x0, config)?;
    let m = prep.x0.n_taxa();
    let k_max = (m - 3) as f64;
    let mut state = Annealer {
        prep: &prep,
        scorer: Scorer {
            data: &prep.data,
            objective: config.objective,
            golden_tol: config.golden_tol,
        },
        weight_tol: config.weight_tol,
        scores: HashMap::new(),
        births: HashMap::new(),
    };
    let a = &config.annealing;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = SimpleLine::new(prep.x0.clone());
    let mut current_score = state.score(&current)?;
    let mut best = (current.clone(), current_score);
    let mut trace = vec![current_score];
    let mut tau = a.tau0;
    for _ in 0..a.iterations {
        let k = current.len() as f64;
        let birth_prob = if k == 0.0 {
            1.0
        } else if k >= k_max {
            0.0
        } else {
            a.birth_floor.max(1.0 - k / k_max)
        };
        let proposal = if rng.random::<f64>() < birth_prob {
            state.birth(&current, &mut rng)?
        } else {
            state.death(&current, &mut rng)
        };
        if let Some(next) = proposal {
            let v = state.score(&next)?;
            let accept = v >= current_score || {
                let delta = current_score - v;
                let bound = match config.objective {
                    Objective::Perpendicular => prep.d2_0,
                    Objective::Parallel => current_score.max(1e-6 * prep.d2_0),
                };
                let prob = if bound > 0.0 && delta < bound {
                    (1.0 - delta / bound).powf(1.0 / tau)
                } else {
                    0.0
                };
                rng.random::<f64>() < prob
            };
            if accept {
                debug_assert!(next.validate().is_ok());
                current = next;
                current_score = v;
                if v > best.1 {
                    best = (current.clone(), v);
                    trace.push(v);
                }
            }
        }
        tau *= a.decay;
    }
    let line = best.0;
    drop(state);
    finish(prep, line, x0, config, trace, None)
}
