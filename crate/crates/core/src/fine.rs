//! Joint distributions of `(A_x, A_x', B_y, B_y')` reproducing a behavior.
//!
//! For binary outcomes with setting-independent marginals, such a joint
//! exists exactly when all eight CHSH inequalities hold. [`find_joint`]
//! decides existence with an exact linear feasibility solve and
//! [`fine_criterion`] with the inequalities; the two are independent routes
//! to the same answer.

use serde::Serialize;

use crate::behavior::{zero_pair_pmf, BehaviorTable, PairPmf};
use crate::chsh::{chsh_values, ChshValue};
use crate::error::{Error, Result};
use crate::flatten::FlatModel;
use crate::lp::{find_feasible, Feasibility};
use crate::model::{Context, Side, CONTEXTS};
use crate::rational::Rational;

/// A pmf over `(a, a', b, b') ∈ {±1}⁴`: Alice's outcome at each of her two
/// settings and Bob's at each of his.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointDistribution16 {
    mass: Vec<Rational>,
}

/// The outcome tuple `(a, a', b, b')` of joint index `k`.
pub fn joint_outcomes(k: usize) -> [i64; 4] {
    std::array::from_fn(|bit| if k >> (3 - bit) & 1 == 1 { -1 } else { 1 })
}

fn joint_index(outcomes: [i64; 4]) -> usize {
    outcomes.iter().fold(0, |acc, &o| (acc << 1) | usize::from(o < 0))
}

impl JointDistribution16 {
    /// Checks non-negativity and unit sum.
    pub fn new(mass: Vec<Rational>) -> Result<Self> {
        if mass.len() != 16 {
            return Err(Error::InvalidArgument(format!("joint needs 16 masses, got {}", mass.len())));
        }
        if let Some(m) = mass.iter().find(|m| m.is_negative()) {
            return Err(Error::OutOfRange { what: "joint mass".into(), value: m.to_string() });
        }
        let total: Rational = mass.iter().sum();
        if !total.is_one() {
            return Err(Error::OutOfRange { what: "joint total mass".into(), value: total.to_string() });
        }
        Ok(JointDistribution16 { mass })
    }

    pub fn uniform() -> Self {
        JointDistribution16 { mass: vec![Rational::new(1, 16); 16] }
    }

    pub fn point(outcomes: [i64; 4]) -> Self {
        let mut mass = vec![Rational::zero(); 16];
        mass[joint_index(outcomes)] = Rational::one();
        JointDistribution16 { mass }
    }

    pub fn get(&self, outcomes: [i64; 4]) -> &Rational {
        &self.mass[joint_index(outcomes)]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    pub fn entries(&self) -> impl Iterator<Item = ([i64; 4], &Rational)> {
        self.mass.iter().enumerate().map(|(k, m)| (joint_outcomes(k), m))
    }

    /// The behavior obtained by marginalizing onto each context.
    pub fn behavior(&self) -> BehaviorTable {
        let contexts = CONTEXTS.map(|c| marginalize_context(self, c));
        BehaviorTable::new(crate::behavior::Alphabet::Binary, contexts).expect("marginals of a valid joint")
    }
}

/// Sums out the two coordinates a context does not read.
pub fn marginalize_context(joint: &JointDistribution16, c: Context) -> PairPmf {
    let mut pmf = zero_pair_pmf();
    for (o, m) in joint.entries() {
        let x = o[c.alice];
        let y = o[2 + c.bob];
        pmf[(x + 1) as usize][(y + 1) as usize] += m;
    }
    pmf
}

/// Pushes the flat model's measure forward through
/// `λ ↦ (A(x, λ), A(x', λ), B(y, λ), B(y', λ))`. Requires ±1 outcomes.
pub fn coupling_joint(flat: &FlatModel) -> Result<JointDistribution16> {
    if !flat.is_binary() {
        return Err(Error::InvalidArgument("coupling needs a model with outcomes in {-1, +1}".into()));
    }
    let sign = |v: &Rational| if v.is_negative() { -1 } else { 1 };
    let mut mass = vec![Rational::zero(); 16];
    for atom in &flat.atoms {
        let o = [sign(&atom.alice[0]), sign(&atom.alice[1]), sign(&atom.bob[0]), sign(&atom.bob[1])];
        mass[joint_index(o)] += &atom.mass;
    }
    JointDistribution16::new(mass)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarginalComparison {
    pub side: String,
    pub setting: usize,
    /// `P(+1)` in the two contexts that share this setting, indexed by the
    /// other party's setting.
    pub p_plus: [Rational; 2],
    pub difference: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NoSignallingReport {
    pub comparisons: Vec<MarginalComparison>,
    pub max_deviation: Rational,
    pub tolerance: Rational,
    pub holds: bool,
}

/// Compares each party's marginal across the other party's two settings.
/// Use `tolerance = 0` for exact behaviors.
pub fn check_no_signalling(behavior: &BehaviorTable, tolerance: &Rational) -> Result<NoSignallingReport> {
    if behavior.has_zero_outcomes() {
        return Err(Error::TernaryBehavior);
    }
    let mut comparisons = Vec::with_capacity(4);
    for setting in 0..2 {
        let p_plus = [
            behavior.marginal(Context::new(setting, 0), Side::Alice, 1),
            behavior.marginal(Context::new(setting, 1), Side::Alice, 1),
        ];
        let difference = (&p_plus[0] - &p_plus[1]).abs();
        comparisons.push(MarginalComparison { side: "alice".into(), setting, p_plus, difference });
    }
    for setting in 0..2 {
        let p_plus = [
            behavior.marginal(Context::new(0, setting), Side::Bob, 1),
            behavior.marginal(Context::new(1, setting), Side::Bob, 1),
        ];
        let difference = (&p_plus[0] - &p_plus[1]).abs();
        comparisons.push(MarginalComparison { side: "bob".into(), setting, p_plus, difference });
    }
    let max_deviation = comparisons.iter().map(|c| c.difference.clone()).max().expect("four comparisons");
    Ok(NoSignallingReport {
        holds: max_deviation <= *tolerance,
        max_deviation,
        tolerance: tolerance.clone(),
        comparisons,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum JointVerdict {
    Feasible { joint: JointDistribution16 },
    /// No joint exists; `certificate` is a CHSH combination exceeding 2.
    Infeasible { certificate: ChshValue },
}

impl JointVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, JointVerdict::Feasible { .. })
    }
}

/// Solves for a joint distribution whose four context marginals equal the
/// behavior exactly.
pub fn find_joint(behavior: &BehaviorTable) -> Result<JointVerdict> {
    let ns = check_no_signalling(behavior, &Rational::zero())?;
    if !ns.holds {
        return Err(Error::Signalling { max_deviation: ns.max_deviation });
    }
    let mut rows: Vec<Vec<Rational>> = vec![vec![Rational::one(); 16]];
    let mut rhs = vec![Rational::one()];
    for c in CONTEXTS {
        for x in [-1i64, 1] {
            for y in [-1i64, 1] {
                rows.push(
                    (0..16)
                        .map(|k| {
                            let o = joint_outcomes(k);
                            if o[c.alice] == x && o[2 + c.bob] == y {
                                Rational::one()
                            } else {
                                Rational::zero()
                            }
                        })
                        .collect(),
                );
                rhs.push(behavior.prob(c, x, y).clone());
            }
        }
    }
    match find_feasible(&rows, &rhs) {
        Feasibility::Feasible(x) => Ok(JointVerdict::Feasible { joint: JointDistribution16::new(x)? }),
        Feasibility::Infeasible { residual } => {
            let report = chsh_values(&behavior.quad())?;
            match report.violated().max_by(|a, b| a.value.cmp(&b.value)) {
                Some(v) => Ok(JointVerdict::Infeasible { certificate: v.clone() }),
                None => Err(Error::Inconsistent(format!(
                    "no joint exists (residual {residual}) yet every CHSH inequality holds"
                ))),
            }
        }
    }
}

/// No-signalling holds exactly and all eight CHSH inequalities hold. Ternary
/// behaviors are outside the criterion and give `false`.
pub fn fine_criterion(behavior: &BehaviorTable) -> bool {
    match check_no_signalling(behavior, &Rational::zero()) {
        Ok(ns) if ns.holds => chsh_values(&behavior.quad()).map(|r| r.satisfied).unwrap_or(false),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::behavior_from_model;
    use crate::corpus::{random_model, random_no_signalling, OutcomeKind};
    use crate::flatten::product_flatten;
    use crate::model::counterexample_model;
    use crate::rational::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn index_round_trip() {
        for k in 0..16 {
            assert_eq!(joint_index(joint_outcomes(k)), k);
        }
    }

    #[test]
    fn counterexample_has_a_joint() {
        let b = behavior_from_model(&counterexample_model()).unwrap();
        assert!(fine_criterion(&b));
        let JointVerdict::Feasible { joint } = find_joint(&b).unwrap() else {
            panic!("expected a joint");
        };
        assert_eq!(joint.behavior(), b);
        assert_eq!(joint.behavior().quad().values(), [q(1, 1), q(0, 1), q(0, 1), q(-1, 1)]);
    }

    #[test]
    fn uniform_behavior_and_uniform_joint() {
        let b = BehaviorTable::binary_from_fn(|_, _, _| q(1, 4)).unwrap();
        assert!(find_joint(&b).unwrap().is_feasible());
        assert_eq!(JointDistribution16::uniform().behavior(), b);
        for c in CONTEXTS {
            let pmf = marginalize_context(&JointDistribution16::uniform(), c);
            assert_eq!(pmf[0][0], q(1, 4));
            assert_eq!(pmf[2][2], q(1, 4));
        }
    }

    #[test]
    fn point_mass_marginals() {
        let joint = JointDistribution16::point([1, 1, 1, 1]);
        for c in CONTEXTS {
            assert!(marginalize_context(&joint, c)[2][2].is_one());
        }
    }

    #[test]
    fn pr_box_is_infeasible_with_certificate() {
        // E = +1, +1, +1, -1 with unbiased marginals.
        let b = BehaviorTable::binary_from_fn(|c, x, y| {
            let e = if c == Context::new(1, 1) { -1 } else { 1 };
            if x * y == e { q(1, 2) } else { q(0, 1) }
        })
        .unwrap();
        assert!(!fine_criterion(&b));
        let JointVerdict::Infeasible { certificate } = find_joint(&b).unwrap() else {
            panic!("PR box has no joint");
        };
        assert_eq!(certificate.value, q(4, 1));
    }

    #[test]
    fn signalling_is_measured_and_rejected() {
        // Alice's P(+1 | x) is 1/2 with y and 3/5 with y'.
        let b = BehaviorTable::binary_from_fn(|c, x, _| {
            if c == Context::new(0, 1) {
                if x > 0 { q(3, 10) } else { q(1, 5) }
            } else {
                q(1, 4)
            }
        })
        .unwrap();
        let report = check_no_signalling(&b, &Rational::zero()).unwrap();
        assert_eq!(report.max_deviation, q(1, 10));
        assert!(!report.holds);
        assert!(check_no_signalling(&b, &q(1, 10)).unwrap().holds);
        assert!(matches!(find_joint(&b), Err(Error::Signalling { .. })));
        assert!(!fine_criterion(&b));
    }

    #[test]
    fn product_behaviors_do_not_signal() {
        let pa = [q(1, 3), q(3, 4)];
        let pb = [q(1, 5), q(1, 2)];
        let p = |v: &Rational, o: i64| if o > 0 { v.clone() } else { Rational::one() - v };
        let b = BehaviorTable::binary_from_fn(|c, x, y| p(&pa[c.alice], x) * p(&pb[c.bob], y)).unwrap();
        assert!(check_no_signalling(&b, &Rational::zero()).unwrap().max_deviation.is_zero());
    }

    #[test]
    fn lhv_behaviors_are_feasible_and_pushforward_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let m = random_model(&mut rng, 3, 3, OutcomeKind::Binary);
            let b = behavior_from_model(&m).unwrap();
            assert!(check_no_signalling(&b, &Rational::zero()).unwrap().max_deviation.is_zero());
            let JointVerdict::Feasible { joint } = find_joint(&b).unwrap() else {
                panic!("local behavior must be feasible");
            };
            assert_eq!(joint.behavior(), b);
            let pushed = coupling_joint(&product_flatten(&m).unwrap()).unwrap();
            assert_eq!(pushed.behavior(), b);
        }
    }

    #[test]
    fn solver_agrees_with_criterion_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut infeasible = 0;
        for _ in 0..200 {
            let b = random_no_signalling(&mut rng);
            let verdict = find_joint(&b).unwrap();
            assert_eq!(verdict.is_feasible(), fine_criterion(&b));
            match verdict {
                JointVerdict::Feasible { joint } => assert_eq!(joint.behavior(), b),
                JointVerdict::Infeasible { .. } => infeasible += 1,
            }
        }
        assert!(infeasible > 10, "corpus should exercise both verdicts, got {infeasible}");
    }

    #[test]
    fn ternary_behavior_is_rejected() {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(1), 2, 2, OutcomeKind::Ternary);
        let b = behavior_from_model(&m).unwrap();
        if b.has_zero_outcomes() {
            assert!(matches!(find_joint(&b), Err(Error::TernaryBehavior)));
            assert!(!fine_criterion(&b));
        }
    }

    #[test]
    fn joint_construction_checks() {
        assert!(JointDistribution16::new(vec![q(1, 16); 15]).is_err());
        assert!(JointDistribution16::new(vec![q(1, 15); 16]).is_err());
        let mut m = vec![q(1, 8); 16];
        m[0] = q(-1, 1);
        assert!(JointDistribution16::new(m).is_err());
    }
}
