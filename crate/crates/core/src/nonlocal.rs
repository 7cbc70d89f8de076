//! Models whose hidden-variable distribution depends on both settings, and
//! the diagnostic that exposes it: `p_ij(λ_i, λ_j) ≠ p_i(λ_i) p_j(λ_j)`.

use std::collections::HashMap;

use crate::behavior::{BehaviorTable, CorrelationQuad};
use crate::error::{Error, Result};
use crate::model::{Context, Label, Pmf, CONTEXTS};
use crate::rational::Rational;

/// Per-context joint distributions over `(λ_i, λ_j)` with deterministic
/// outcome functions `A_i(λ_i)`, `B_j(λ_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonlocalPairModel {
    /// Indexed by [`Context::index`].
    pub joint: [Pmf<(Label, Label)>; 4],
    pub alice_outcomes: [HashMap<Label, Rational>; 2],
    pub bob_outcomes: [HashMap<Label, Rational>; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextFactorization {
    pub context: Context,
    pub factorizable: bool,
    /// `max |p_ij(λ_i, λ_j) - p_i(λ_i) p_j(λ_j)|` over the product of the
    /// marginal supports.
    pub max_deviation: Rational,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorizationReport {
    pub contexts: Vec<ContextFactorization>,
}

impl FactorizationReport {
    pub fn all_factorizable(&self) -> bool {
        self.contexts.iter().all(|c| c.factorizable)
    }
}

impl NonlocalPairModel {
    /// Realizes any binary behavior: in each context the hidden pair is the
    /// outcome pair itself, drawn from `P(·, · | a, b)`.
    pub fn from_behavior(behavior: &BehaviorTable) -> Result<Self> {
        if behavior.has_zero_outcomes() {
            return Err(Error::TernaryBehavior);
        }
        let sign = |v: i64| if v > 0 { "+".to_string() } else { "-".to_string() };
        let joint = CONTEXTS.map(|c| {
            let mut atoms = Vec::new();
            for x in [1, -1] {
                for y in [1, -1] {
                    atoms.push(((sign(x), sign(y)), behavior.prob(c, x, y).clone()));
                }
            }
            Pmf::from_atoms(atoms)
        });
        let identity: HashMap<Label, Rational> =
            [("+".to_string(), Rational::one()), ("-".to_string(), -Rational::one())].into();
        Ok(NonlocalPairModel {
            joint,
            alice_outcomes: [identity.clone(), identity.clone()],
            bob_outcomes: [identity.clone(), identity],
        })
    }

    pub fn expectation(&self, c: Context) -> Result<Rational> {
        let a = &self.alice_outcomes[c.alice];
        let b = &self.bob_outcomes[c.bob];
        let mut total = Rational::zero();
        for ((li, lj), p) in self.joint[c.index()].atoms() {
            let missing = |side: &str, l: &Label| Error::DomainMismatch {
                table: format!("{side} outcomes"),
                row: l.clone(),
                col: "*".into(),
            };
            let va = a.get(li).ok_or_else(|| missing("alice", li))?;
            let vb = b.get(lj).ok_or_else(|| missing("bob", lj))?;
            total += va * vb * p;
        }
        Ok(total)
    }

    pub fn quad(&self) -> Result<CorrelationQuad> {
        Ok(CorrelationQuad::from_vec(
            CONTEXTS.iter().map(|&c| self.expectation(c)).collect::<Result<_>>()?,
        ))
    }
}

/// Compares each context's joint pmf with the product of its own marginals.
/// With `tolerance = 0` the comparison is exact.
pub fn is_setting_factorizable(model: &NonlocalPairModel, tolerance: &Rational) -> FactorizationReport {
    let contexts = CONTEXTS
        .iter()
        .map(|&c| {
            let pmf = &model.joint[c.index()];
            let mut left: Vec<(Label, Rational)> = Vec::new();
            let mut right: Vec<(Label, Rational)> = Vec::new();
            let mut cells: HashMap<(&Label, &Label), Rational> = HashMap::new();
            for ((li, lj), p) in pmf.atoms() {
                accumulate(&mut left, li, p);
                accumulate(&mut right, lj, p);
                *cells.entry((li, lj)).or_insert_with(Rational::zero) += p;
            }
            let mut max_deviation = Rational::zero();
            for (li, pi) in &left {
                for (lj, pj) in &right {
                    let joint = cells.get(&(li, lj)).cloned().unwrap_or_else(Rational::zero);
                    let dev = (joint - pi * pj).abs();
                    if dev > max_deviation {
                        max_deviation = dev;
                    }
                }
            }
            ContextFactorization {
                context: c,
                factorizable: max_deviation <= *tolerance,
                max_deviation,
                normalized: pmf.total().is_one(),
            }
        })
        .collect();
    FactorizationReport { contexts }
}

fn accumulate(acc: &mut Vec<(Label, Rational)>, label: &Label, mass: &Rational) {
    match acc.iter_mut().find(|(l, _)| l == label) {
        Some((_, m)) => *m += mass,
        None => acc.push((label.clone(), mass.clone())),
    }
}
