//! Seeded simulation of the causal model of one Bell trial.
//!
//! Settings `(A, B)` come from an experimenter variable, the hidden variable
//! `Λ` from an independent source, and the outcomes are deterministic
//! functions `X = f(A, Λ)`, `Y = g(B, Λ)`. A contextual model becomes such a
//! model by bundling the source pair, one uniform per side (the instrument
//! variables of both settings are read off it) and one auxiliary uniform per
//! side that realizes zero or fractional outcomes as ±1.

mod diagnostic;
mod streams;

pub use diagnostic::{independence_diagnostic, IndependenceReport};
pub use streams::Stream;

use rayon::prelude::*;
use serde::Serialize;

use crate::behavior::CorrelationQuad;
use crate::error::{Error, Result};
use crate::flatten::{Refinement, UniformPartition};
use crate::model::{Context, ContextualModel, Label, ResolvedSetting, Side, CONTEXTS};
use crate::rational::Rational;
use streams::TrialDraws;

/// How the experimenter picks settings.
#[derive(Debug, Clone, PartialEq)]
pub enum SettingSource {
    /// Independent choices; the probability of each party's first setting.
    Independent { alice_first: Rational, bob_first: Rational },
    /// A correlated choice over the four contexts in canonical order, driven
    /// by one draw of the experimenter variable.
    Joint([Rational; 4]),
}

impl Default for SettingSource {
    fn default() -> Self {
        SettingSource::Independent { alice_first: Rational::new(1, 2), bob_first: Rational::new(1, 2) }
    }
}

impl SettingSource {
    /// From a pmf over the four contexts; product pmfs become independent
    /// choices so that each party's setting has its own stream.
    pub fn from_context_pmf(pmf: [Rational; 4]) -> Result<Self> {
        if pmf.iter().any(Rational::is_negative) || !pmf.iter().sum::<Rational>().is_one() {
            return Err(Error::InvalidArgument("setting bias must be a pmf over the four contexts".into()));
        }
        let alice_first = &pmf[0] + &pmf[1];
        let bob_first = &pmf[0] + &pmf[2];
        let product = CONTEXTS.iter().all(|c| {
            let pa = if c.alice == 0 { alice_first.clone() } else { Rational::one() - &alice_first };
            let pb = if c.bob == 0 { bob_first.clone() } else { Rational::one() - &bob_first };
            pmf[c.index()] == pa * pb
        });
        Ok(if product {
            SettingSource::Independent { alice_first, bob_first }
        } else {
            SettingSource::Joint(pmf)
        })
    }
}

/// One party's response function: a uniform cell picks the instrument atom,
/// the table gives the conditional expectation `v`, and the auxiliary uniform
/// realizes `+1` with probability `(1 + v) / 2`.
#[derive(Debug, Clone)]
struct Response {
    /// Upper edges of the uniform cells.
    cell_upper: Vec<f64>,
    cell_length: Vec<Rational>,
    /// `[setting][source row][cell]`.
    values: [Vec<Vec<Rational>>; 2],
    thresholds: [Vec<Vec<f64>>; 2],
}

impl Response {
    fn new(model: &ContextualModel, side: Side, rows: &[Label]) -> Result<Self> {
        let settings = model.settings(side);
        let part = UniformPartition::new(&settings[0].instrument, &settings[1].instrument, Refinement::Common);
        let resolved = [ResolvedSetting::new(model, side, 0)?, ResolvedSetting::new(model, side, 1)?];
        let mut values: [Vec<Vec<Rational>>; 2] = Default::default();
        for s in 0..2 {
            for row_label in rows {
                let row = resolved[s].row(row_label)?;
                values[s].push(
                    part.picks[s]
                        .iter()
                        .map(|&atom| resolved[s].value(row, resolved[s].instrument[atom].0).clone())
                        .collect(),
                );
            }
        }
        let thresholds = values.clone().map(|per_row| {
            per_row
                .iter()
                .map(|cells| cells.iter().map(|v| (1.0 + v.to_f64()) / 2.0).collect())
                .collect()
        });
        Ok(Response {
            cell_upper: part.cells.iter().map(|(_, hi)| hi.to_f64()).collect(),
            cell_length: (0..part.cells.len()).map(|k| part.cell_length(k)).collect(),
            values,
            thresholds,
        })
    }

    fn cell(&self, u: f64) -> usize {
        self.cell_upper.iter().position(|&hi| u < hi).unwrap_or(self.cell_upper.len() - 1)
    }

    fn respond(&self, setting: usize, row: usize, u: f64, aux: f64) -> i8 {
        let t = self.thresholds[setting][row][self.cell(u)];
        if aux < t {
            1
        } else {
            -1
        }
    }
}

/// `Λ = (source atom, u₁, u₂, c₁, c₂)` for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenDraw {
    pub source_atom: usize,
    pub u_alice: f64,
    pub u_bob: f64,
    pub aux_alice: f64,
    pub aux_bob: f64,
}

/// A local hidden-variable model in causal form.
#[derive(Debug, Clone)]
pub struct DagModel {
    pub settings: SettingSource,
    pub alice_labels: [Label; 2],
    pub bob_labels: [Label; 2],
    /// `(alice row, bob row, mass)` per source atom.
    source: Vec<(usize, usize, Rational)>,
    source_cdf: Vec<f64>,
    alice: Response,
    bob: Response,
}

impl DagModel {
    /// `f(a, Λ)`. Depends on Alice's setting and `Λ` only.
    pub fn alice_outcome(&self, a: usize, lambda: &HiddenDraw) -> i8 {
        let (row, _, _) = self.source[lambda.source_atom];
        self.alice.respond(a, row, lambda.u_alice, lambda.aux_alice)
    }

    /// `g(b, Λ)`.
    pub fn bob_outcome(&self, b: usize, lambda: &HiddenDraw) -> i8 {
        let (_, row, _) = self.source[lambda.source_atom];
        self.bob.respond(b, row, lambda.u_bob, lambda.aux_bob)
    }

    pub fn source_atoms(&self) -> usize {
        self.source.len()
    }

    /// Exact context correlations `E(f(a, Λ) g(b, Λ))`.
    pub fn exact_quad(&self) -> CorrelationQuad {
        let quad = CONTEXTS.iter().map(|&c| {
            let mut total = Rational::zero();
            for (ra, rb, p) in &self.source {
                for (k1, l1) in self.alice.cell_length.iter().enumerate() {
                    let a = &self.alice.values[c.alice][*ra][k1];
                    if a.is_zero() {
                        continue;
                    }
                    for (k2, l2) in self.bob.cell_length.iter().enumerate() {
                        total += a * &self.bob.values[c.bob][*rb][k2] * p * l1 * l2;
                    }
                }
            }
            total
        });
        CorrelationQuad::from_vec(quad.collect())
    }

    fn draw_hidden(&self, seed: u64, trial: u64) -> HiddenDraw {
        let u = TrialDraws::new(seed, Stream::Source, 0, trial).uniform();
        self.hidden_from(u, seed, trial)
    }

    fn hidden_from(&self, source_uniform: f64, seed: u64, trial: u64) -> HiddenDraw {
        let source_atom = self
            .source_cdf
            .iter()
            .position(|&f| source_uniform < f)
            .unwrap_or(self.source.len() - 1);
        let mut alice = TrialDraws::new(seed, Stream::AliceInstrument, 0, trial);
        let mut bob = TrialDraws::new(seed, Stream::BobInstrument, 0, trial);
        HiddenDraw {
            source_atom,
            u_alice: alice.uniform(),
            aux_alice: alice.uniform(),
            u_bob: bob.uniform(),
            aux_bob: bob.uniform(),
        }
    }
}

/// Builds the causal model of a contextual model. Zero and fractional
/// outcomes are realized through the auxiliary uniforms.
pub fn from_contextual(model: &ContextualModel, settings: SettingSource) -> Result<DagModel> {
    model.ensure_valid()?;
    let alice_rows = model.source_labels(Side::Alice);
    let bob_rows = model.source_labels(Side::Bob);
    let alice_index = crate::model::index_of(&alice_rows);
    let bob_index = crate::model::index_of(&bob_rows);
    let source: Vec<(usize, usize, Rational)> = model
        .source
        .atoms()
        .iter()
        .map(|((l1, l2), p)| (alice_index[l1.as_str()], bob_index[l2.as_str()], p.clone()))
        .collect();
    let mut acc = Rational::zero();
    let source_cdf = source
        .iter()
        .map(|(_, _, p)| {
            acc += p;
            acc.to_f64()
        })
        .collect();
    let labels = |side: Side| {
        let s = model.settings(side);
        [s[0].label.clone(), s[1].label.clone()]
    };
    Ok(DagModel {
        settings,
        alice_labels: labels(Side::Alice),
        bob_labels: labels(Side::Bob),
        source,
        source_cdf,
        alice: Response::new(model, Side::Alice, &alice_rows)?,
        bob: Response::new(model, Side::Bob, &bob_rows)?,
    })
}

/// One line of the `N x 4` spreadsheet; settings are indices into the
/// model's setting labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TrialRecord {
    pub a: u8,
    pub b: u8,
    pub x: i8,
    pub y: i8,
}

impl TrialRecord {
    pub fn context(&self) -> Context {
        Context::new(self.a as usize, self.b as usize)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Draw the settings from the source stream, so that settings and `Λ`
    /// share randomness. This deliberately breaks the model's independence
    /// assumption.
    pub confound: bool,
    /// Re-keys Bob's setting stream only; `0` is the normal run.
    pub bob_setting_salt: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<TrialRecord>,
    /// Source atom index drawn in each trial.
    pub hidden_trace: Vec<usize>,
}

fn pick_first(p: &Rational, u: f64) -> u8 {
    if u < p.to_f64() {
        0
    } else {
        1
    }
}

fn draw_settings(dag: &DagModel, seed: u64, trial: u64, opts: &SimulationOptions) -> (u8, u8) {
    if opts.confound {
        // Settings read the very uniforms that select the source atom.
        let mut src = TrialDraws::new(seed, Stream::Source, 0, trial);
        let u = src.uniform();
        let v = (u * 2.0).fract();
        return match &dag.settings {
            SettingSource::Independent { alice_first, bob_first } => {
                (pick_first(alice_first, u), pick_first(bob_first, v))
            }
            SettingSource::Joint(pmf) => context_from_uniform(pmf, u),
        };
    }
    match &dag.settings {
        SettingSource::Independent { alice_first, bob_first } => {
            let a = pick_first(alice_first, TrialDraws::new(seed, Stream::AliceSetting, 0, trial).uniform());
            let b = pick_first(
                bob_first,
                TrialDraws::new(seed, Stream::BobSetting, opts.bob_setting_salt, trial).uniform(),
            );
            (a, b)
        }
        SettingSource::Joint(pmf) => {
            context_from_uniform(pmf, TrialDraws::new(seed, Stream::Settings, opts.bob_setting_salt, trial).uniform())
        }
    }
}

fn context_from_uniform(pmf: &[Rational; 4], u: f64) -> (u8, u8) {
    let mut acc = 0.0;
    for c in CONTEXTS {
        acc += pmf[c.index()].to_f64();
        if u < acc {
            return (c.alice as u8, c.bob as u8);
        }
    }
    (1, 1)
}

/// Runs `n_trials` independent trials. Output depends only on
/// `(dag, n_trials, seed, opts)`; work is spread over the rayon pool.
pub fn simulate(dag: &DagModel, n_trials: u64, seed: u64, opts: &SimulationOptions) -> Result<Simulation> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let (records, hidden_trace): (Vec<TrialRecord>, Vec<usize>) = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let (a, b) = draw_settings(dag, seed, t, opts);
            let lambda = dag.draw_hidden(seed, t);
            let record = TrialRecord {
                a,
                b,
                x: dag.alice_outcome(a as usize, &lambda),
                y: dag.bob_outcome(b as usize, &lambda),
            };
            (record, lambda.source_atom)
        })
        .unzip();
    Ok(Simulation { records, hidden_trace })
}

/// The spreadsheet alone, with default options.
pub fn simulate_spreadsheet(dag: &DagModel, n_trials: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    Ok(simulate(dag, n_trials, seed, &SimulationOptions::default())?.records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub count: u64,
}

/// Mean of `x·y` per context with its standard error; `None` for contexts
/// with no records.
pub fn estimate_correlations(records: &[TrialRecord]) -> [Option<Estimate>; 4] {
    let mut count = [0u64; 4];
    let mut sum = [0i64; 4];
    for r in records {
        let k = r.context().index();
        count[k] += 1;
        sum[k] += (r.x * r.y) as i64;
    }
    std::array::from_fn(|k| {
        if count[k] == 0 {
            return None;
        }
        let n = count[k] as f64;
        let mean = sum[k] as f64 / n;
        // x·y is ±1, so the sample variance has a closed form.
        let var = if count[k] > 1 { (1.0 - mean * mean) * n / (n - 1.0) } else { 0.0 };
        Some(Estimate { estimate: mean, std_error: (var.max(0.0) / n).sqrt(), count: count[k] })
    })
}

/// `(X₁, X₂, Y₁, Y₂) = (f(1, Λ), f(2, Λ), g(1, Λ), g(2, Λ))` from one `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CouplingSample {
    pub x: [i8; 2],
    pub y: [i8; 2],
}

impl CouplingSample {
    /// `x₁y₁ - x₂y₁ - x₁y₂ - x₂y₂`.
    pub fn combination(&self) -> i8 {
        self.x[0] * self.y[0] - self.x[1] * self.y[0] - self.x[0] * self.y[1] - self.x[1] * self.y[1]
    }

    pub fn product(&self, c: Context) -> i8 {
        self.x[c.alice] * self.y[c.bob]
    }
}

/// Evaluates all four outcome functions on each of `n_trials` hidden draws.
pub fn sample_coupling(dag: &DagModel, n_trials: u64, seed: u64) -> Result<Vec<CouplingSample>> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    Ok((0..n_trials)
        .into_par_iter()
        .map(|t| {
            let lambda = dag.draw_hidden(seed, t);
            CouplingSample {
                x: [dag.alice_outcome(0, &lambda), dag.alice_outcome(1, &lambda)],
                y: [dag.bob_outcome(0, &lambda), dag.bob_outcome(1, &lambda)],
            }
        })
        .collect())
}

/// Empirical `E(X_a Y_b)` per context over coupling samples, with standard
/// errors.
pub fn coupling_correlations(samples: &[CouplingSample]) -> [Estimate; 4] {
    let n = samples.len() as f64;
    CONTEXTS.map(|c| {
        let sum: i64 = samples.iter().map(|s| s.product(c) as i64).sum();
        let mean = sum as f64 / n;
        let var = if samples.len() > 1 { (1.0 - mean * mean) * n / (n - 1.0) } else { 0.0 };
        Estimate { estimate: mean, std_error: (var.max(0.0) / n).sqrt(), count: samples.len() as u64 }
    })
}

/// Counts of each distinct coupling sample, by the joint index of
/// `(x₁, x₂, y₁, y₂)`.
pub fn coupling_histogram(samples: &[CouplingSample]) -> [u64; 16] {
    let mut counts = [0u64; 16];
    for s in samples {
        let k = [s.x[0], s.x[1], s.y[0], s.y[1]]
            .iter()
            .fold(0usize, |acc, &o| (acc << 1) | usize::from(o < 0));
        counts[k] += 1;
    }
    counts
}

/// Writes records as CSV with columns `trial,a,b,x,y`, settings by label.
pub fn write_csv(dag: &DagModel, records: &[TrialRecord], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "trial,a,b,x,y")?;
    for (t, r) in records.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            t,
            dag.alice_labels[r.a as usize],
            dag.bob_labels[r.b as usize],
            r.x,
            r.y
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_model, OutcomeKind};
    use crate::model::{counterexample_model, OutcomeTable, Pmf, Setting};
    use crate::rational::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_plus() -> ContextualModel {
        let s = |l: &str| Setting {
            label: l.into(),
            instrument: Pmf::uniform(["i".to_string(), "j".to_string()]),
            table: OutcomeTable::from_fn(vec!["s".into()], vec!["i".into(), "j".into()], false, |_, _| q(1, 1)),
        };
        ContextualModel {
            source: Pmf::point(("s".into(), "s".into())),
            alice: [s("x"), s("x'")],
            bob: [s("y"), s("y'")],
        }
    }

    #[test]
    fn counterexample_dag_quad_and_perfect_correlation() {
        let dag = from_contextual(&counterexample_model(), SettingSource::default()).unwrap();
        assert_eq!(dag.exact_quad().values(), [q(1, 1), q(0, 1), q(0, 1), q(-1, 1)]);
        let records = simulate_spreadsheet(&dag, 5_000, 99).unwrap();
        assert!(records.iter().filter(|r| r.a == 0 && r.b == 0).all(|r| r.x * r.y == 1));
        assert!(records.iter().filter(|r| r.a == 1 && r.b == 1).all(|r| r.x * r.y == -1));
    }

    #[test]
    fn deterministic_model_gives_constant_records() {
        let dag = from_contextual(&all_plus(), SettingSource::default()).unwrap();
        let records = simulate_spreadsheet(&dag, 1000, 1).unwrap();
        assert!(records.iter().all(|r| r.x == 1 && r.y == 1));
        let est = estimate_correlations(&records);
        let e = est[0].unwrap();
        assert_eq!((e.estimate, e.std_error), (1.0, 0.0));
        let coupling = sample_coupling(&dag, 100, 1).unwrap();
        assert!(coupling.iter().all(|s| *s == coupling[0]));
    }

    #[test]
    fn exact_quad_matches_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for kind in [OutcomeKind::Binary, OutcomeKind::Ternary, OutcomeKind::Fractional] {
            for _ in 0..30 {
                let m = random_model(&mut rng, 4, 3, kind);
                let dag = from_contextual(&m, SettingSource::default()).unwrap();
                assert_eq!(dag.exact_quad(), m.quad().unwrap());
            }
        }
    }

    #[test]
    fn seeds_determine_spreadsheets() {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(4), 4, 3, OutcomeKind::Ternary);
        let dag = from_contextual(&m, SettingSource::default()).unwrap();
        let a = simulate_spreadsheet(&dag, 2000, 7).unwrap();
        assert_eq!(a, simulate_spreadsheet(&dag, 2000, 7).unwrap());
        assert_ne!(a, simulate_spreadsheet(&dag, 2000, 8).unwrap());
        // A prefix run is a prefix of the longer run.
        assert_eq!(&a[..500], &simulate_spreadsheet(&dag, 500, 7).unwrap()[..]);
        assert!(simulate_spreadsheet(&dag, 0, 7).is_err());
    }

    #[test]
    fn bob_setting_stream_does_not_reach_alice() {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(6), 4, 3, OutcomeKind::Fractional);
        let dag = from_contextual(&m, SettingSource::default()).unwrap();
        let base = simulate(&dag, 3000, 11, &SimulationOptions::default()).unwrap();
        let salted = simulate(&dag, 3000, 11, &SimulationOptions { bob_setting_salt: 1, ..Default::default() }).unwrap();
        assert_ne!(
            base.records.iter().map(|r| r.b).collect::<Vec<_>>(),
            salted.records.iter().map(|r| r.b).collect::<Vec<_>>()
        );
        for (r, s) in base.records.iter().zip(&salted.records) {
            assert_eq!((r.a, r.x), (s.a, s.x));
        }
    }

    #[test]
    fn empty_contexts_are_absent() {
        let records = vec![TrialRecord { a: 1, b: 1, x: 1, y: 1 }];
        let est = estimate_correlations(&records);
        assert!(est[0].is_none() && est[1].is_none() && est[2].is_none());
        assert_eq!(est[3].unwrap().estimate, 1.0);
    }

    #[test]
    fn biased_settings() {
        let pmf = [q(1, 2), q(1, 4), q(1, 8), q(1, 8)];
        let source = SettingSource::from_context_pmf(pmf.clone()).unwrap();
        assert!(matches!(source, SettingSource::Joint(_)));
        let product = SettingSource::from_context_pmf([q(1, 6), q(1, 6), q(1, 3), q(1, 3)]).unwrap();
        assert_eq!(product, SettingSource::Independent { alice_first: q(1, 3), bob_first: q(1, 2) });
        let dag = from_contextual(&all_plus(), source).unwrap();
        let records = simulate_spreadsheet(&dag, 40_000, 3).unwrap();
        let share = records.iter().filter(|r| r.a == 0 && r.b == 0).count() as f64 / 40_000.0;
        assert!((share - 0.5).abs() < 0.02, "{share}");
        assert!(SettingSource::from_context_pmf([q(1, 2), q(1, 2), q(1, 2), q(-1, 2)]).is_err());
    }

    #[test]
    fn coupling_combination_is_plus_or_minus_two() {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(8), 4, 3, OutcomeKind::Fractional);
        let dag = from_contextual(&m, SettingSource::default()).unwrap();
        let samples = sample_coupling(&dag, 10_000, 5).unwrap();
        assert!(samples.iter().all(|s| s.combination().abs() == 2));
        assert_eq!(coupling_histogram(&samples).iter().sum::<u64>(), 10_000);
    }

    #[test]
    fn csv_layout() {
        let dag = from_contextual(&counterexample_model(), SettingSource::default()).unwrap();
        let records = simulate_spreadsheet(&dag, 3, 0).unwrap();
        let mut buf = Vec::new();
        write_csv(&dag, &records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trial,a,b,x,y");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[1].split(',').count(), 5);
    }
}
