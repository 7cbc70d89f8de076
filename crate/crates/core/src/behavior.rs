//! Observable behaviors `P(x, y | a, b)` and correlation quads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_point_outcome, Context, ContextualModel, ResolvedSetting, Side, CONTEXTS};
use crate::rational::Rational;

/// Outcome alphabet of a behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    Binary,
    Ternary,
}

/// The outcome values in table order.
pub const OUTCOMES: [i64; 3] = [-1, 0, 1];

fn slot(outcome: i64) -> usize {
    (outcome + 1) as usize
}

/// Distribution over outcome pairs `(x, y)` for one context, indexed by
/// `[x + 1][y + 1]`.
pub type PairPmf = [[Rational; 3]; 3];

pub fn zero_pair_pmf() -> PairPmf {
    std::array::from_fn(|_| std::array::from_fn(|_| Rational::zero()))
}

/// The four per-context outcome distributions an experiment estimates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorTable {
    pub alphabet: Alphabet,
    contexts: [PairPmf; 4],
}

impl BehaviorTable {
    /// Builds a table from per-context pair distributions in canonical context
    /// order. Entries are checked for non-negativity and normalization; a
    /// binary table must not put mass on zero outcomes.
    pub fn new(alphabet: Alphabet, contexts: [PairPmf; 4]) -> Result<Self> {
        for (k, pmf) in contexts.iter().enumerate() {
            let mut total = Rational::zero();
            for (i, row) in pmf.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    if p.is_negative() {
                        return Err(Error::OutOfRange {
                            what: format!("P({}, {} | context {k})", OUTCOMES[i], OUTCOMES[j]),
                            value: p.to_string(),
                        });
                    }
                    if alphabet == Alphabet::Binary && (i == 1 || j == 1) && !p.is_zero() {
                        return Err(Error::InvalidArgument(format!(
                            "binary behavior puts mass {p} on a zero outcome in context {k}"
                        )));
                    }
                    total += p;
                }
            }
            if !total.is_one() {
                return Err(Error::OutOfRange {
                    what: format!("total probability of context {k}"),
                    value: total.to_string(),
                });
            }
        }
        Ok(BehaviorTable { alphabet, contexts })
    }

    /// A binary table from `P(x, y | a, b)` given as a function of the
    /// context and the two ±1 outcomes.
    pub fn binary_from_fn(mut f: impl FnMut(Context, i64, i64) -> Rational) -> Result<Self> {
        let contexts = CONTEXTS.map(|c| {
            let mut pmf = zero_pair_pmf();
            for x in [-1, 1] {
                for y in [-1, 1] {
                    pmf[slot(x)][slot(y)] = f(c, x, y);
                }
            }
            pmf
        });
        BehaviorTable::new(Alphabet::Binary, contexts)
    }

    pub fn context(&self, c: Context) -> &PairPmf {
        &self.contexts[c.index()]
    }

    pub fn prob(&self, c: Context, x: i64, y: i64) -> &Rational {
        &self.contexts[c.index()][slot(x)][slot(y)]
    }

    /// `P(outcome | setting)` for one party, read off one context.
    pub fn marginal(&self, c: Context, side: Side, outcome: i64) -> Rational {
        let pmf = self.context(c);
        match side {
            Side::Alice => pmf[slot(outcome)].iter().sum(),
            Side::Bob => pmf.iter().map(|row| &row[slot(outcome)]).sum(),
        }
    }

    /// `E(XY | a, b)` for one context.
    pub fn correlation(&self, c: Context) -> Rational {
        let pmf = self.context(c);
        let mut total = Rational::zero();
        for x in [-1i64, 1] {
            for y in [-1i64, 1] {
                let p = &pmf[slot(x)][slot(y)];
                if x * y > 0 {
                    total += p;
                } else {
                    total -= p;
                }
            }
        }
        total
    }

    pub fn quad(&self) -> CorrelationQuad {
        CorrelationQuad::from_vec(CONTEXTS.iter().map(|&c| self.correlation(c)).collect())
    }

    pub fn has_zero_outcomes(&self) -> bool {
        self.contexts.iter().any(|pmf| {
            (0..3).any(|k| !pmf[1][k].is_zero() || !pmf[k][1].is_zero())
        })
    }

    pub fn contexts(&self) -> &[PairPmf; 4] {
        &self.contexts
    }
}

/// `E(A_x B_y), E(A_x B_y'), E(A_x' B_y), E(A_x' B_y')` in canonical context
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationQuad {
    pub e_xy: Rational,
    pub e_xy_prime: Rational,
    pub e_x_prime_y: Rational,
    pub e_x_prime_y_prime: Rational,
}

impl CorrelationQuad {
    pub fn new(values: [Rational; 4]) -> Self {
        let [e_xy, e_xy_prime, e_x_prime_y, e_x_prime_y_prime] = values;
        CorrelationQuad { e_xy, e_xy_prime, e_x_prime_y, e_x_prime_y_prime }
    }

    pub(crate) fn from_vec(values: Vec<Rational>) -> Self {
        let values: [Rational; 4] = values.try_into().expect("four contexts");
        Self::new(values)
    }

    pub fn values(&self) -> [Rational; 4] {
        [
            self.e_xy.clone(),
            self.e_xy_prime.clone(),
            self.e_x_prime_y.clone(),
            self.e_x_prime_y_prime.clone(),
        ]
    }

    pub fn get(&self, c: Context) -> &Rational {
        match c.index() {
            0 => &self.e_xy,
            1 => &self.e_xy_prime,
            2 => &self.e_x_prime_y,
            _ => &self.e_x_prime_y_prime,
        }
    }

    pub fn to_f64(&self) -> [f64; 4] {
        self.values().map(|v| v.to_f64())
    }
}

impl fmt::Display for CorrelationQuad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.e_xy, self.e_xy_prime, self.e_x_prime_y, self.e_x_prime_y_prime
        )
    }
}

/// The behavior a point-valued model induces. Fractional outcomes are
/// conditional expectations, not outcomes, and are rejected.
pub fn behavior_from_model(model: &ContextualModel) -> Result<BehaviorTable> {
    model.ensure_valid()?;
    for side in [Side::Alice, Side::Bob] {
        for (i, s) in model.settings(side).iter().enumerate() {
            if let Some((r, c, v)) = s.table.entries().find(|(_, _, v)| !is_point_outcome(v)) {
                return Err(Error::FractionalOutcome {
                    table: model.table_name(side, i),
                    row: s.table.rows[r].clone(),
                    col: s.table.cols[c].clone(),
                    value: Box::new(v.clone()),
                });
            }
        }
    }
    let ternary = model
        .alice
        .iter()
        .chain(&model.bob)
        .any(|s| s.table.ternary || s.table.has_zero());
    let alphabet = if ternary { Alphabet::Ternary } else { Alphabet::Binary };

    let mut contexts: [PairPmf; 4] = std::array::from_fn(|_| zero_pair_pmf());
    for c in CONTEXTS {
        let alice = ResolvedSetting::new(model, Side::Alice, c.alice)?;
        let bob = ResolvedSetting::new(model, Side::Bob, c.bob)?;
        let pmf = &mut contexts[c.index()];
        for ((l1, l2), p) in model.source.atoms() {
            let ra = alice.row(l1)?;
            let rb = bob.row(l2)?;
            // Outcome distributions of each side given the source atom.
            let mut pa = [Rational::zero(), Rational::zero(), Rational::zero()];
            for &(col, m) in &alice.instrument {
                pa[outcome_slot(alice.value(ra, col))] += m;
            }
            let mut pb = [Rational::zero(), Rational::zero(), Rational::zero()];
            for &(col, m) in &bob.instrument {
                pb[outcome_slot(bob.value(rb, col))] += m;
            }
            for i in 0..3 {
                if pa[i].is_zero() {
                    continue;
                }
                for j in 0..3 {
                    pmf[i][j] += &pa[i] * &pb[j] * p;
                }
            }
        }
    }
    BehaviorTable::new(alphabet, contexts)
}

fn outcome_slot(v: &Rational) -> usize {
    if v.is_zero() {
        1
    } else if v.is_negative() {
        0
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_model, OutcomeKind};
    use crate::model::{counterexample_model, exact_expectation};
    use crate::rational::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counterexample_behavior() {
        let b = behavior_from_model(&counterexample_model()).unwrap();
        assert_eq!(b.alphabet, Alphabet::Binary);
        let c = Context::new(0, 0);
        assert!(b.prob(c, 1, 1).is_one());
        for (x, y) in [(1, -1), (-1, 1), (-1, -1)] {
            assert!(b.prob(c, x, y).is_zero());
        }
        // Context (-1, -1): λ odd gives (-1, +1), λ even gives (+1, -1).
        let c = Context::new(1, 1);
        assert_eq!(*b.prob(c, -1, 1), q(1, 2));
        assert_eq!(*b.prob(c, 1, -1), q(1, 2));
    }

    #[test]
    fn correlations_match_exact_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [OutcomeKind::Binary, OutcomeKind::Ternary] {
            for _ in 0..100 {
                let m = random_model(&mut rng, 5, 4, kind);
                let b = behavior_from_model(&m).unwrap();
                for c in CONTEXTS {
                    assert_eq!(b.correlation(c), exact_expectation(&m, c).unwrap());
                }
            }
        }
    }

    #[test]
    fn fractional_models_are_rejected() {
        let mut m = counterexample_model();
        m.alice[0].table.values[2][0] = q(1, 3);
        assert!(matches!(behavior_from_model(&m), Err(Error::FractionalOutcome { .. })));
    }

    #[test]
    fn table_construction_checks() {
        let bad = BehaviorTable::binary_from_fn(|_, _, _| q(1, 3));
        assert!(bad.is_err());
        let mut pmf = zero_pair_pmf();
        pmf[1][1] = Rational::one();
        let contexts = [pmf.clone(), pmf.clone(), pmf.clone(), pmf];
        assert!(BehaviorTable::new(Alphabet::Binary, contexts.clone()).is_err());
        let t = BehaviorTable::new(Alphabet::Ternary, contexts).unwrap();
        assert!(t.has_zero_outcomes());
        assert!(t.correlation(Context::new(0, 0)).is_zero());
    }
}
