//! Seeded random generators for models and behaviors, used by the property
//! tests, the acceptance suite and the examples.

use rand::Rng;

use crate::behavior::BehaviorTable;
use crate::model::{ContextualModel, Label, OutcomeTable, Pmf, Setting};
use crate::rational::{q, Rational};

/// What kind of outcome values a random model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    /// `{-1, +1}`.
    Binary,
    /// `{-1, 0, +1}`, tables flagged ternary.
    Ternary,
    /// Rationals in `[-1, 1]` with denominators up to 12.
    Fractional,
}

/// Random masses on a grid, each atom at least `min_weight / total`.
fn random_masses<R: Rng>(rng: &mut R, n: usize, min_weight: u32) -> Vec<Rational> {
    loop {
        let weights: Vec<i64> = (0..n).map(|_| rng.gen_range(min_weight..=12) as i64).collect();
        let total: i64 = weights.iter().sum();
        if total > 0 {
            return weights.into_iter().map(|w| q(w, total)).collect();
        }
    }
}

fn random_outcome<R: Rng>(rng: &mut R, kind: OutcomeKind) -> Rational {
    match kind {
        OutcomeKind::Binary => q(if rng.gen_bool(0.5) { 1 } else { -1 }, 1),
        OutcomeKind::Ternary => q(rng.gen_range(-1..=1), 1),
        OutcomeKind::Fractional => {
            let d = rng.gen_range(1..=12);
            q(rng.gen_range(-d..=d), d)
        }
    }
}

/// A random well-formed model with `λ₁` and `λ₂` spaces of 1 to `max_source`
/// atoms each (joint pmf on a random non-empty subset of pairs, possibly with
/// zero-mass atoms) and 1 to `max_instrument` instrument atoms per setting.
pub fn random_model<R: Rng>(
    rng: &mut R,
    max_source: usize,
    max_instrument: usize,
    kind: OutcomeKind,
) -> ContextualModel {
    let n1 = rng.gen_range(1..=max_source);
    let n2 = rng.gen_range(1..=max_source);
    let mut pairs: Vec<(Label, Label)> = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if rng.gen_bool(0.6) {
                pairs.push((format!("s{i}"), format!("t{j}")));
            }
        }
    }
    if pairs.is_empty() {
        pairs.push(("s0".into(), "t0".into()));
    }
    let masses = random_masses(rng, pairs.len(), 0);
    let source = Pmf::from_atoms(pairs.into_iter().zip(masses).collect());

    let mut model = ContextualModel {
        source,
        alice: [placeholder("x"), placeholder("x'")],
        bob: [placeholder("y"), placeholder("y'")],
    };
    let alice_rows = model.source_labels(crate::model::Side::Alice);
    let bob_rows = model.source_labels(crate::model::Side::Bob);
    for (setting, rows) in model
        .alice
        .iter_mut()
        .map(|s| (s, &alice_rows))
        .chain(model.bob.iter_mut().map(|s| (s, &bob_rows)))
    {
        let k = rng.gen_range(1..=max_instrument);
        let cols: Vec<Label> = (0..k).map(|c| format!("{}{c}", setting.label.replace('\'', "p"))).collect();
        let masses = random_masses(rng, k, 1);
        setting.instrument = Pmf::from_atoms(cols.iter().cloned().zip(masses).collect());
        setting.table = OutcomeTable::from_fn(rows.clone(), cols, kind == OutcomeKind::Ternary, |_, _| {
            random_outcome(rng, kind)
        });
    }
    model
}

fn placeholder(label: &str) -> Setting {
    Setting {
        label: label.into(),
        instrument: Pmf::from_atoms(Vec::new()),
        table: OutcomeTable { rows: vec![], cols: vec![], values: vec![], ternary: false },
    }
}

/// The corpus used by the flagship checks: models alternating through binary,
/// ternary and fractional outcomes with up to 6x6 source atoms and 4
/// instrument atoms.
pub fn model_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<ContextualModel> {
    const KINDS: [OutcomeKind; 3] = [OutcomeKind::Binary, OutcomeKind::Ternary, OutcomeKind::Fractional];
    (0..n).map(|i| random_model(rng, 6, 4, KINDS[i % 3])).collect()
}

/// A random exact no-signalling binary behavior.
///
/// Each context is `P(x, y) = (1 + x·m_A + y·m_B + x·y·E) / 4` with
/// per-setting marginal biases `m_A`, `m_B` on a grid and `E` drawn from the
/// interval that keeps all four entries non-negative. These range over the
/// whole no-signalling polytope, so roughly half of them violate CHSH.
pub fn random_no_signalling<R: Rng>(rng: &mut R) -> BehaviorTable {
    const GRID: i64 = 24;
    let bias = |rng: &mut R| {
        if rng.gen_bool(0.4) {
            Rational::zero()
        } else {
            q(rng.gen_range(-GRID / 2..=GRID / 2), GRID)
        }
    };
    let alice = [bias(rng), bias(rng)];
    let bob = [bias(rng), bias(rng)];
    let mut corr: Vec<Rational> = Vec::with_capacity(4);
    for c in crate::model::CONTEXTS {
        let (ma, mb) = (&alice[c.alice], &bob[c.bob]);
        let lo = (ma + mb).abs() - Rational::one();
        let hi = Rational::one() - (ma - mb).abs();
        let t = q(rng.gen_range(0..=GRID), GRID);
        // Push towards the extremes so CHSH-violating tables are common.
        let t = if rng.gen_bool(0.5) { t } else if rng.gen_bool(0.5) { Rational::one() } else { Rational::zero() };
        corr.push(&lo + &(&hi - &lo) * &t);
    }
    BehaviorTable::binary_from_fn(|c, x, y| {
        let (xs, ys) = (q(x, 1), q(y, 1));
        (Rational::one() + &xs * &alice[c.alice] + &ys * &bob[c.bob] + &xs * &ys * &corr[c.index()]) / q(4, 1)
    })
    .expect("constructed non-negative and normalized")
}

/// `t·a + (1 - t)·b`, context by context.
pub fn mix(a: &BehaviorTable, b: &BehaviorTable, t: &Rational) -> BehaviorTable {
    let s = Rational::one() - t;
    BehaviorTable::binary_from_fn(|c, x, y| t * a.prob(c, x, y) + &s * b.prob(c, x, y))
        .expect("mixture of binary behaviors")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in model_corpus(&mut rng, 90) {
            assert!(m.validate().is_ok(), "{}", m.validate());
        }
    }

    #[test]
    fn random_no_signalling_tables_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            random_no_signalling(&mut rng);
        }
    }
}
