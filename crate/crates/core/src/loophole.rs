//! The singlet reference behavior and a search for ternary contextual models
//! whose post-selected correlations violate CHSH.
//!
//! Candidates live on a small discrete space: diagonal source atoms
//! `(k, k)`, instrument pmfs and source masses on a grid with denominator
//! [`SearchConfig::grid`], and outcome tables with entries in `{-1, 0, +1}`.
//! Scoring uses floats; the winner is re-evaluated with exact rationals.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::behavior::{behavior_from_model, BehaviorTable};
use crate::chsh::{chsh_values, postselected_correlations, zero_to_coin, PostSelectionReport};
use crate::error::{Error, Result};
use crate::model::{ContextualModel, OutcomeTable, Pmf, ResolvedSetting, Setting, Side, CONTEXTS};
use crate::rational::Rational;

/// Analyzer angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleSet {
    pub theta_x: f64,
    pub theta_x_prime: f64,
    pub theta_y: f64,
    pub theta_y_prime: f64,
}

impl AngleSet {
    /// `(0, π/2, π/4, 3π/4)`.
    pub fn chsh_optimal() -> Self {
        use std::f64::consts::PI;
        AngleSet { theta_x: 0.0, theta_x_prime: PI / 2.0, theta_y: PI / 4.0, theta_y_prime: 3.0 * PI / 4.0 }
    }

    fn alice(&self, i: usize) -> f64 {
        [self.theta_x, self.theta_x_prime][i]
    }

    fn bob(&self, i: usize) -> f64 {
        [self.theta_y, self.theta_y_prime][i]
    }
}

/// `P(x, y | a, b) = (1 + x y E) / 4` with `E = -cos(θ_a - θ_b)`. Each `E` is
/// the exact rational value of the float cosine, so the table is exactly
/// normalized and no-signalling.
pub fn quantum_singlet_behavior(angles: &AngleSet) -> Result<BehaviorTable> {
    let mut corr = Vec::with_capacity(4);
    for c in CONTEXTS {
        let e = -(angles.alice(c.alice) - angles.bob(c.bob)).cos();
        let e = Rational::from_f64_exact(e.clamp(-1.0, 1.0))
            .ok_or_else(|| Error::InvalidArgument(format!("angles must be finite, got {angles:?}")))?;
        corr.push(e);
    }
    let quarter = Rational::new(1, 4);
    BehaviorTable::binary_from_fn(|c, x, y| {
        let e = &corr[c.index()];
        let xy_e = if x * y > 0 { e.clone() } else { -e };
        (Rational::one() + xy_e) * &quarter
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub source_atoms: usize,
    pub instrument_atoms: usize,
    /// Total number of candidate evaluations, shared across restarts.
    pub budget: u64,
    pub seed: u64,
    pub restarts: usize,
    /// Every context must have at least this coincidence rate.
    pub min_coincidence_rate: Rational,
    /// Every per-side detection rate must be strictly below this, if set.
    pub max_detection_rate: Option<Rational>,
    /// Denominator of the mass grid, at most 64.
    pub grid: u32,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            source_atoms: 4,
            instrument_atoms: 3,
            budget: 400_000,
            seed: 0,
            restarts: 32,
            min_coincidence_rate: Rational::new(3, 10),
            max_detection_rate: Some(Rational::new(2, 3)),
            grid: 64,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.source_atoms == 0 || self.source_atoms > 12 {
            return bad("source atoms must be between 1 and 12");
        }
        if self.instrument_atoms == 0 || self.instrument_atoms > 8 {
            return bad("instrument atoms must be between 1 and 8");
        }
        if self.budget == 0 || self.restarts == 0 {
            return bad("budget and restarts must be positive");
        }
        if self.grid == 0 || self.grid > 64 {
            return bad("grid denominator must be between 1 and 64");
        }
        let r = &self.min_coincidence_rate;
        if r.is_negative() || r.is_zero() || *r > Rational::one() {
            return bad("coincidence rate constraint must lie in (0, 1]");
        }
        if let Some(d) = &self.max_detection_rate {
            if !d.is_unit_bounded() || d.is_negative() || d.is_zero() {
                return bad("detection rate bound must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

/// A point of the search space. Masses are grid numerators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
struct Candidate {
    source: Vec<u32>,
    /// `[side][setting]` instrument masses.
    instrument: [[Vec<u32>; 2]; 2],
    /// `[side][setting][source atom][instrument atom]`.
    table: [[Vec<Vec<i8>>; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    chsh: f64,
    min_coincidence: f64,
    penalty: f64,
}

impl Score {
    fn feasible(&self) -> bool {
        self.penalty == 0.0
    }

    fn objective(&self) -> f64 {
        self.chsh - 8.0 * self.penalty
    }
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize, grid: u32) -> Vec<u32> {
    let mut m = vec![0u32; n];
    for _ in 0..grid {
        m[rng.gen_range(0..n)] += 1;
    }
    m
}

impl Candidate {
    fn random(rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Self {
        let n = cfg.source_atoms;
        let k = cfg.instrument_atoms;
        let table_for = |rng: &mut ChaCha8Rng| -> Vec<Vec<i8>> {
            (0..n).map(|_| (0..k).map(|_| rng.gen_range(-1i8..=1)).collect()).collect()
        };
        let table = [[table_for(rng), table_for(rng)], [table_for(rng), table_for(rng)]];
        let instrument = std::array::from_fn(|_| std::array::from_fn(|_| random_masses(rng, k, cfg.grid)));
        Candidate { source: random_masses(rng, n, cfg.grid), instrument, table }
    }

    /// `P(outcome | side, setting, source atom)` indexed by `outcome + 1`.
    fn outcome_dist(&self, side: usize, setting: usize, atom: usize, grid: f64) -> [f64; 3] {
        let mut d = [0.0; 3];
        for (v, &m) in self.table[side][setting][atom].iter().zip(&self.instrument[side][setting]) {
            d[(*v + 1) as usize] += m as f64 / grid;
        }
        d
    }

    fn score(&self, cfg: &SearchConfig) -> Score {
        let grid = cfg.grid as f64;
        let n = self.source.len();
        let dists: [[Vec<[f64; 3]>; 2]; 2] = std::array::from_fn(|side| {
            std::array::from_fn(|s| (0..n).map(|k| self.outcome_dist(side, s, k, grid)).collect())
        });
        let mut detection = [[0.0f64; 2]; 2];
        for side in 0..2 {
            for s in 0..2 {
                detection[side][s] = (0..n)
                    .map(|k| self.source[k] as f64 / grid * (1.0 - dists[side][s][k][1]))
                    .sum();
            }
        }
        let mut cond = [0.0f64; 4];
        let mut rates = [0.0f64; 4];
        for c in CONTEXTS {
            let (mut agree, mut disagree) = (0.0, 0.0);
            for (k, &m) in self.source.iter().enumerate() {
                let p = m as f64 / grid;
                let a = &dists[0][c.alice][k];
                let b = &dists[1][c.bob][k];
                agree += p * (a[2] * b[2] + a[0] * b[0]);
                disagree += p * (a[2] * b[0] + a[0] * b[2]);
            }
            let rate = agree + disagree;
            rates[c.index()] = rate;
            cond[c.index()] = if rate > 0.0 { (agree - disagree) / rate } else { 0.0 };
        }
        let chsh = (0..4)
            .map(|flipped| crate::chsh::combination(flipped, 1, &cond).abs())
            .fold(0.0, f64::max);
        let min_rate = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut penalty = (cfg.min_coincidence_rate.to_f64() - min_rate).max(0.0);
        if let Some(bound) = &cfg.max_detection_rate {
            // Strict inequality, on a grid of 1/grid^2 steps.
            let limit = bound.to_f64() - 0.5 / (grid * grid);
            for r in detection.iter().flatten() {
                penalty += (r - limit).max(0.0);
            }
        }
        Score { chsh, min_coincidence: min_rate, penalty }
    }

    fn mutate(&mut self, rng: &mut ChaCha8Rng) {
        match rng.gen_range(0..4) {
            0 | 1 => {
                let side = rng.gen_range(0..2);
                let s = rng.gen_range(0..2);
                let row = rng.gen_range(0..self.source.len());
                let col = rng.gen_range(0..self.instrument[0][0].len());
                let cell = &mut self.table[side][s][row][col];
                *cell = (*cell + rng.gen_range(1..=2) + 1).rem_euclid(3) - 1;
            }
            2 => shift_mass(rng, &mut self.source),
            _ => {
                let side = rng.gen_range(0..2);
                let s = rng.gen_range(0..2);
                shift_mass(rng, &mut self.instrument[side][s]);
            }
        }
    }

    fn to_model(&self, grid: u32) -> ContextualModel {
        let atom = |k: usize| format!("s{k}");
        let source_atoms: Vec<usize> = (0..self.source.len()).filter(|&k| self.source[k] > 0).collect();
        let rows: Vec<String> = source_atoms.iter().map(|&k| atom(k)).collect();
        let mass = |m: u32| Rational::new(m as i64, grid as i64);
        let setting = |side: usize, s: usize| {
            let prefix = match (side, s) {
                (0, 0) => "x",
                (0, _) => "xp",
                (_, 0) => "y",
                _ => "yp",
            };
            let inst_atoms: Vec<usize> =
                (0..self.instrument[side][s].len()).filter(|&j| self.instrument[side][s][j] > 0).collect();
            let cols: Vec<String> = inst_atoms.iter().map(|j| format!("{prefix}{j}")).collect();
            let values = source_atoms
                .iter()
                .map(|&k| inst_atoms.iter().map(|&j| Rational::from_integer(self.table[side][s][k][j] as i64)).collect())
                .collect();
            Setting {
                label: ["x", "x'", "y", "y'"][side * 2 + s].to_string(),
                instrument: Pmf::from_atoms(
                    inst_atoms.iter().zip(&cols).map(|(&j, c)| (c.clone(), mass(self.instrument[side][s][j]))).collect(),
                ),
                table: OutcomeTable { rows: rows.clone(), cols, values, ternary: true },
            }
        };
        ContextualModel {
            source: Pmf::from_atoms(source_atoms.iter().map(|&k| ((atom(k), atom(k)), mass(self.source[k]))).collect()),
            alice: [setting(0, 0), setting(0, 1)],
            bob: [setting(1, 0), setting(1, 1)],
        }
    }
}

fn shift_mass(rng: &mut ChaCha8Rng, masses: &mut [u32]) {
    if masses.len() < 2 {
        return;
    }
    let from = rng.gen_range(0..masses.len());
    if masses[from] == 0 {
        return;
    }
    let mut to = rng.gen_range(0..masses.len() - 1);
    if to >= from {
        to += 1;
    }
    let amount = rng.gen_range(1..=masses[from].min(8));
    masses[from] -= amount;
    masses[to] += amount;
}

/// Per-side, per-setting probability of a non-zero outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DetectionRates {
    pub alice: [Rational; 2],
    pub bob: [Rational; 2],
    /// Comparison of each rate (Alice's two, then Bob's two) with `2/3`.
    pub versus_two_thirds: [RateRelation; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateRelation {
    Below,
    At,
    Above,
}

impl DetectionRates {
    pub fn all_below_two_thirds(&self) -> bool {
        self.versus_two_thirds.iter().all(|r| *r == RateRelation::Below)
    }
}

pub fn detection_rates(model: &ContextualModel) -> Result<DetectionRates> {
    model.ensure_valid()?;
    let rate = |side: Side, index: usize| -> Result<Rational> {
        let s = ResolvedSetting::new(model, side, index)?;
        let mut total = Rational::zero();
        for ((l1, l2), p) in model.source.atoms() {
            let row = s.row(if side == Side::Alice { l1 } else { l2 })?;
            for &(col, m) in &s.instrument {
                if !s.value(row, col).is_zero() {
                    total += m * p;
                }
            }
        }
        Ok(total)
    };
    let alice = [rate(Side::Alice, 0)?, rate(Side::Alice, 1)?];
    let bob = [rate(Side::Bob, 0)?, rate(Side::Bob, 1)?];
    let two_thirds = Rational::new(2, 3);
    let rel = |r: &Rational| match r.cmp(&two_thirds) {
        Ordering::Less => RateRelation::Below,
        Ordering::Equal => RateRelation::At,
        Ordering::Greater => RateRelation::Above,
    };
    let versus_two_thirds = [rel(&alice[0]), rel(&alice[1]), rel(&bob[0]), rel(&bob[1])];
    Ok(DetectionRates { alice, bob, versus_two_thirds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub best_score: f64,
    pub feasible: bool,
    /// Best feasible score at evenly spaced checkpoints; never decreases.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub model: ContextualModel,
    pub report: PostSelectionReport,
    /// Post-selected max |CHSH|, when every context has coincidences.
    pub postselected_max_abs: Option<Rational>,
    pub violating: bool,
    /// Whether the winner meets the rate constraints exactly.
    pub constraints_met: bool,
    pub detection: DetectionRates,
    pub restarts: Vec<RestartSummary>,
}

impl SearchResult {
    /// Running best over restarts in order.
    pub fn history(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.restarts
            .iter()
            .map(|r| {
                if r.feasible {
                    best = best.max(r.best_score);
                }
                best
            })
            .collect()
    }
}

const CHECKPOINTS: u64 = 16;

fn run_restart(cfg: &SearchConfig, restart: usize, evaluations: u64) -> (Candidate, Score, RestartSummary) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64 + 1);
    let mut current = Candidate::random(&mut rng, cfg);
    let mut current_score = current.score(cfg);
    let mut best = (current.clone(), current_score);
    let mut trace = Vec::with_capacity(CHECKPOINTS as usize);
    let every = (evaluations / CHECKPOINTS).max(1);
    for i in 0..evaluations {
        let mut next = current.clone();
        let moves = if rng.gen_bool(0.2) { 2 } else { 1 };
        for _ in 0..moves {
            next.mutate(&mut rng);
        }
        let s = next.score(cfg);
        if s.objective() >= current_score.objective() {
            current = next;
            current_score = s;
            if better(&current_score, &best.1) {
                best = (current.clone(), current_score);
            }
        }
        if (i + 1) % every == 0 {
            trace.push(if best.1.feasible() { best.1.chsh } else { f64::NEG_INFINITY });
        }
    }
    let summary = RestartSummary {
        restart,
        best_score: best.1.chsh,
        feasible: best.1.feasible(),
        trace,
    };
    (best.0, best.1, summary)
}

/// Feasible beats infeasible; then higher CHSH; then lower coincidence rate.
fn better(a: &Score, b: &Score) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.objective() > b.objective(),
        (true, true) => {
            a.chsh > b.chsh + 1e-12 || ((a.chsh - b.chsh).abs() <= 1e-12 && a.min_coincidence < b.min_coincidence)
        }
    }
}

fn tie(a: &Score, b: &Score) -> bool {
    !better(a, b) && !better(b, a)
}

/// Seeded random restarts of a greedy local search, maximizing the
/// post-selected CHSH value under the rate constraints. The winner is
/// re-verified exactly, including that its coin-flip reduction satisfies
/// CHSH.
pub fn search_postselection_violation(config: &SearchConfig) -> Result<SearchResult> {
    config.validate()?;
    let per_restart = (config.budget / config.restarts as u64).max(1);
    let runs: Vec<(Candidate, Score, RestartSummary)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(config, r, per_restart))
        .collect();
    let mut winner = 0;
    for i in 1..runs.len() {
        let (a, b) = (&runs[i].1, &runs[winner].1);
        if better(a, b) {
            winner = i;
        } else if tie(a, b) {
            let key = |c: &Candidate| serde_json::to_string(c).expect("candidate serializes");
            if key(&runs[i].0) < key(&runs[winner].0) {
                winner = i;
            }
        }
    }
    let model = runs[winner].0.to_model(config.grid);
    let restarts = runs.into_iter().map(|r| r.2).collect();
    verify(model, config, restarts)
}

/// Exact evaluation of a ternary model against the search constraints.
pub fn verify_winner(model: ContextualModel, config: &SearchConfig) -> Result<SearchResult> {
    verify(model, config, Vec::new())
}

fn verify(model: ContextualModel, config: &SearchConfig, restarts: Vec<RestartSummary>) -> Result<SearchResult> {
    let behavior = behavior_from_model(&model)?;
    let report = postselected_correlations(&behavior);
    let raw = zero_to_coin(&model)?.quad()?;
    if raw != report.raw_quad || !chsh_values(&raw)?.satisfied {
        return Err(Error::Inconsistent(format!("coin-flip reduction of the search winner gives {raw}")));
    }
    let postselected_max_abs = report.conditional_chsh().map(|r| r.max_abs);
    let violating = postselected_max_abs.as_ref().is_some_and(|m| *m > Rational::from_integer(2));
    let detection = detection_rates(&model)?;
    let rate_ok = *report.min_coincidence_rate() >= config.min_coincidence_rate;
    let detection_ok = config
        .max_detection_rate
        .as_ref()
        .is_none_or(|d| detection.alice.iter().chain(&detection.bob).all(|r| r < d));
    Ok(SearchResult {
        model,
        report,
        postselected_max_abs,
        violating,
        constraints_met: rate_ok && detection_ok,
        detection,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fine::{check_no_signalling, find_joint, JointVerdict};
    use crate::model::counterexample_model;
    use crate::rational::q;
    use std::f64::consts::PI;

    #[test]
    fn equal_angles_anticorrelate() {
        let b = quantum_singlet_behavior(&AngleSet { theta_x: 0.3, theta_x_prime: 0.3, theta_y: 0.3, theta_y_prime: 0.3 })
            .unwrap();
        for c in CONTEXTS {
            assert_eq!(b.prob(c, 1, -1), &q(1, 2));
            assert_eq!(b.prob(c, -1, 1), &q(1, 2));
            assert_eq!(b.correlation(c), q(-1, 1));
        }
    }

    #[test]
    fn orthogonal_angles_are_uniform() {
        let b = quantum_singlet_behavior(&AngleSet { theta_x: 0.0, theta_x_prime: 0.0, theta_y: PI / 2.0, theta_y_prime: PI / 2.0 })
            .unwrap();
        for c in CONTEXTS {
            // cos(π/2) in floating point is 6e-17, not zero.
            assert!(b.correlation(c).to_f64().abs() < 1e-15);
            assert!((b.prob(c, 1, 1).to_f64() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn tsirelson_value_and_no_joint() {
        let b = quantum_singlet_behavior(&AngleSet::chsh_optimal()).unwrap();
        let report = chsh_values(&b.quad()).unwrap();
        assert!((report.max_abs.to_f64() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(check_no_signalling(&b, &Rational::zero()).unwrap().holds);
        match find_joint(&b).unwrap() {
            JointVerdict::Infeasible { certificate } => assert!(certificate.value > q(2, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detection_rates_of_simple_models() {
        let rates = detection_rates(&counterexample_model()).unwrap();
        assert!(rates.alice.iter().chain(&rates.bob).all(Rational::is_one));
        assert_eq!(rates.versus_two_thirds, [RateRelation::Above; 4]);

        // Alice outputs zero on half of her instrument mass.
        let mut m = counterexample_model();
        for s in &mut m.alice {
            s.instrument = Pmf::uniform(["0".to_string(), "1".to_string()]);
            let rows = s.table.rows.clone();
            s.table = OutcomeTable::from_fn(rows, vec!["0".into(), "1".into()], true, |_, c| {
                if c == "0" { q(0, 1) } else { q(1, 1) }
            });
        }
        let rates = detection_rates(&m).unwrap();
        assert_eq!(rates.alice, [q(1, 2), q(1, 2)]);
        assert!(rates.versus_two_thirds[..2].iter().all(|r| *r == RateRelation::Below));
    }

    #[test]
    fn no_post_selection_means_no_violation() {
        let cfg = SearchConfig {
            min_coincidence_rate: q(1, 1),
            max_detection_rate: None,
            budget: 40_000,
            restarts: 4,
            seed: 3,
            ..Default::default()
        };
        let result = search_postselection_violation(&cfg).unwrap();
        if result.constraints_met {
            assert!(!result.violating);
            assert!(result.postselected_max_abs.unwrap() <= q(2, 1));
        }
    }

    #[test]
    fn default_search_finds_a_violation() {
        let cfg = SearchConfig { seed: 1, ..Default::default() };
        let result = search_postselection_violation(&cfg).unwrap();
        assert!(result.model.validate().is_ok());
        assert!(result.constraints_met, "{:?}", result.detection);
        assert!(result.violating);
        let max = result.postselected_max_abs.clone().unwrap();
        assert!(max >= q(11, 5), "{max}");
        assert!(result.detection.all_below_two_thirds());
        assert!(result.report.raw_chsh().satisfied);
        for r in &result.restarts {
            assert!(r.trace.windows(2).all(|w| w[0] <= w[1]));
        }
        let again = search_postselection_violation(&cfg).unwrap();
        assert_eq!(again.model, result.model);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            SearchConfig { budget: 0, ..Default::default() },
            SearchConfig { source_atoms: 13, ..Default::default() },
            SearchConfig { grid: 128, ..Default::default() },
            SearchConfig { min_coincidence_rate: q(0, 1), ..Default::default() },
            SearchConfig { min_coincidence_rate: q(3, 2), ..Default::default() },
        ] {
            assert!(search_postselection_violation(&cfg).is_err());
        }
    }
}
