use serde::Serialize;
use treespace::{write_newick, PcaResult, Tree};

use crate::config::Algorithm;

pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to 12 significant digits so reports do not depend on the last
/// bits of floating-point noise.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Serialize)]
pub struct InputSummary {
    pub file: String,
    pub n: usize,
    pub m: usize,
    pub taxa: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct PairRow {
    pub p: String,
    pub p_prime: String,
    pub change: String,
    pub w: f64,
    pub normalized_w: f64,
    pub s_break: f64,
}

#[derive(Debug, Serialize)]
pub struct ProjectionRow {
    pub index: usize,
    pub s_star: f64,
    pub d_perp: f64,
}

#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub objective: &'static str,
    pub algorithm: Algorithm,
    pub normalize: bool,
    pub midpoint: String,
    pub weight_cap: Option<f64>,
    pub weight_tol: f64,
    pub golden_tol: f64,
    pub iterations: usize,
    pub tau0: f64,
    pub decay: f64,
    pub birth_floor: f64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub input: InputSummary,
    pub midpoint: String,
    pub objective: &'static str,
    pub algorithm: Algorithm,
    pub pairs: Vec<PairRow>,
    pub d2_0: f64,
    pub d2_par: f64,
    pub d2_perp: f64,
    pub proportion: Option<f64>,
    pub trace: Vec<f64>,
    pub projections: Vec<ProjectionRow>,
    pub config: ConfigEcho,
    pub seed: u64,
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn new(
        input: InputSummary,
        midpoint: &Tree,
        result: &PcaResult,
        config: ConfigEcho,
        seed: u64,
    ) -> RunReport {
        let taxa = result.line.midpoint().taxa();
        let pairs = result
            .line
            .pairs()
            .iter()
            .zip(&result.normalized_weights)
            .map(|(pr, &nw)| {
                let p = taxa.format_split(pr.p);
                let p_prime = taxa.format_split(pr.p_prime);
                PairRow {
                    change: format!("{p} \u{2192} {p_prime}"),
                    p,
                    p_prime,
                    w: sig12(pr.w),
                    normalized_w: sig12(nw),
                    s_break: sig12(pr.s_break),
                }
            })
            .collect();
        let projections = result
            .projections
            .iter()
            .enumerate()
            .map(|(i, pj)| ProjectionRow {
                index: i + 1,
                s_star: sig12(pj.s_star),
                d_perp: sig12(pj.d_perp),
            })
            .collect();
        RunReport {
            schema_version: SCHEMA_VERSION,
            input,
            midpoint: write_newick(midpoint),
            objective: config.objective,
            algorithm: config.algorithm,
            pairs,
            d2_0: sig12(result.d2_0),
            d2_par: sig12(result.d2_par),
            d2_perp: sig12(result.d2_perp),
            proportion: result.proportion.map(sig12),
            trace: result.trace.iter().copied().map(sig12).collect(),
            projections,
            config,
            seed,
            wall_time_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text summary: one row per pair, largest normalized weight first.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "trees: {}  taxa: {}  objective: {}  algorithm: {}  seed: {}\n",
            self.input.n,
            self.input.m,
            self.objective,
            self.algorithm.name(),
            self.seed
        ));
        out.push_str(&format!("midpoint: {}\n\n", self.midpoint));
        let mut rows: Vec<&PairRow> = self.pairs.iter().collect();
        rows.sort_by(|a, b| b.normalized_w.abs().total_cmp(&a.normalized_w.abs()));
        out.push_str(&format!(
            "{:>4}  {:>14}  {:>14}  {:>14}  change in topology\n",
            "rank", "w", "normalized w", "s_break"
        ));
        for (k, r) in rows.iter().enumerate() {
            out.push_str(&format!(
                "{:>4}  {:>14.6}  {:>14.6}  {:>14.6}  {}\n",
                k + 1,
                r.w,
                r.normalized_w,
                r.s_break,
                r.change
            ));
        }
        if rows.is_empty() {
            out.push_str("(no split pairs)\n");
        }
        out.push_str(&format!(
            "\nd2_0 = {}\nd2_par = {}\nd2_perp = {}\n",
            self.d2_0, self.d2_par, self.d2_perp
        ));
        match self.proportion {
            Some(p) => out.push_str(&format!("proportion of variance = {:.4}%\n", 100.0 * p)),
            None => out.push_str("proportion of variance undefined\n"),
        }
        out
    }
}
