//! The eight one-sided CHSH inequalities, post-selected correlations, and the
//! reduction of zero outcomes to fair coin flips.

use serde::Serialize;

use crate::behavior::{BehaviorTable, CorrelationQuad};
use crate::error::{Error, Result};
use crate::model::{is_point_outcome, Context, ContextualModel, Label, OutcomeTable, Pmf, Setting, Side, CONTEXTS};
use crate::rational::Rational;

/// One CHSH combination: all four correlations with sign `+` except the
/// `flipped` context, the whole multiplied by `sign`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChshValue {
    pub flipped: usize,
    pub sign: i8,
    pub value: Rational,
}

impl ChshValue {
    /// Coefficient of context `c` in this combination.
    pub fn coefficient(&self, c: Context) -> i64 {
        let base = if c.index() == self.flipped { -1 } else { 1 };
        base * self.sign as i64
    }

    /// Human-readable form, e.g. `+E(x,y) +E(x,y') -E(x',y) +E(x',y')`.
    pub fn describe(&self, alice: &[Label; 2], bob: &[Label; 2]) -> String {
        CONTEXTS
            .iter()
            .map(|&c| {
                let s = if self.coefficient(c) > 0 { '+' } else { '-' };
                format!("{s}E({},{})", alice[c.alice], bob[c.bob])
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChshReport {
    pub values: Vec<ChshValue>,
    pub max_abs: Rational,
    pub satisfied: bool,
}

impl ChshReport {
    /// The combination with the largest absolute value (first on ties).
    pub fn worst(&self) -> &ChshValue {
        let mut best = &self.values[0];
        for v in &self.values[1..] {
            if v.value.abs() > best.value.abs() {
                best = v;
            }
        }
        best
    }

    /// Combinations whose value exceeds `2`.
    pub fn violated(&self) -> impl Iterator<Item = &ChshValue> {
        let two = Rational::from_integer(2);
        self.values.iter().filter(move |v| v.value > two)
    }
}

/// The signed combination `Σ_c coefficient(c) · values[c]`.
pub fn combination<T>(flipped: usize, sign: i8, values: &[T; 4]) -> T
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Neg<Output = T>,
{
    let term = |k: usize| if k == flipped { -values[k].clone() } else { values[k].clone() };
    let s = term(0) + term(1) + term(2) + term(3);
    if sign < 0 {
        -s
    } else {
        s
    }
}

/// All eight one-sided CHSH values of a correlation quad.
pub fn chsh_values(quad: &CorrelationQuad) -> Result<ChshReport> {
    let values = quad.values();
    for (c, v) in CONTEXTS.iter().zip(&values) {
        if !v.is_unit_bounded() {
            return Err(Error::OutOfRange { what: format!("correlation {:?}", c), value: v.to_string() });
        }
    }
    let mut out = Vec::with_capacity(8);
    for flipped in 0..4 {
        for sign in [1i8, -1] {
            out.push(ChshValue { flipped, sign, value: combination(flipped, sign, &values) });
        }
    }
    let max_abs = out.iter().map(|v| v.value.abs()).max().expect("eight values");
    let satisfied = max_abs <= Rational::from_integer(2);
    Ok(ChshReport { values: out, max_abs, satisfied })
}

/// Post-selected statistics of a (possibly ternary) behavior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostSelectionReport {
    /// Correlations over all trials; a zero outcome contributes zero, exactly
    /// as a fair coin flip would.
    pub raw_quad: CorrelationQuad,
    /// `E(XY | X ≠ 0, Y ≠ 0)` per context; `None` where no coincidence occurs.
    pub conditional: [Option<Rational>; 4],
    /// `P(X ≠ 0, Y ≠ 0)` per context.
    pub coincidence_rate: [Rational; 4],
    /// `P(X ≠ 0 | a)`, read from the contexts with Bob's first setting.
    pub alice_detection: [Rational; 2],
    /// `P(Y ≠ 0 | b)`, read from the contexts with Alice's first setting.
    pub bob_detection: [Rational; 2],
}

impl PostSelectionReport {
    /// The conditional quad, if every context has coincidences.
    pub fn conditional_quad(&self) -> Option<CorrelationQuad> {
        let values: Option<Vec<Rational>> = self.conditional.iter().cloned().collect();
        values.map(CorrelationQuad::from_vec)
    }

    pub fn conditional_chsh(&self) -> Option<ChshReport> {
        self.conditional_quad().map(|q| chsh_values(&q).expect("conditional correlations are bounded"))
    }

    pub fn raw_chsh(&self) -> ChshReport {
        chsh_values(&self.raw_quad).expect("raw correlations are bounded")
    }

    pub fn min_coincidence_rate(&self) -> &Rational {
        self.coincidence_rate.iter().min().expect("four contexts")
    }

    pub fn max_detection_rate(&self) -> &Rational {
        self.alice_detection.iter().chain(&self.bob_detection).max().expect("four rates")
    }
}

/// Correlations conditioned on both parties reporting a non-zero outcome.
pub fn postselected_correlations(behavior: &BehaviorTable) -> PostSelectionReport {
    let mut conditional: [Option<Rational>; 4] = Default::default();
    let mut coincidence_rate: [Rational; 4] = std::array::from_fn(|_| Rational::zero());
    for c in CONTEXTS {
        let mut rate = Rational::zero();
        let mut weighted = Rational::zero();
        for x in [-1i64, 1] {
            for y in [-1i64, 1] {
                let p = behavior.prob(c, x, y);
                rate += p;
                if x * y > 0 {
                    weighted += p;
                } else {
                    weighted -= p;
                }
            }
        }
        if !rate.is_zero() {
            conditional[c.index()] = Some(&weighted / &rate);
        }
        coincidence_rate[c.index()] = rate;
    }
    let detected = |c: Context, side: Side| {
        Rational::one() - behavior.marginal(c, side, 0)
    };
    PostSelectionReport {
        raw_quad: behavior.quad(),
        conditional,
        coincidence_rate,
        alice_detection: [detected(Context::new(0, 0), Side::Alice), detected(Context::new(1, 0), Side::Alice)],
        bob_detection: [detected(Context::new(0, 0), Side::Bob), detected(Context::new(0, 1), Side::Bob)],
    }
}

/// Replaces every zero outcome by a fair coin: each instrument atom of a
/// table containing zeros splits into a heads half and a tails half, and a
/// zero becomes `+1` on heads and `-1` on tails. The result is binary and has
/// exactly the same expectations.
pub fn zero_to_coin(model: &ContextualModel) -> Result<ContextualModel> {
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
    binarize(model)
}

/// Realizes every outcome value `v ∈ [-1, 1]` as a `±1` outcome with
/// conditional expectation `v`, using an auxiliary uniform variable per
/// instrument atom: on the cell `[lo, hi)` the outcome is `+1` iff
/// `lo < (1 + v) / 2`. Cells are the common refinement of those thresholds
/// over all source rows. For point-valued tables this is [`zero_to_coin`].
pub fn binarize(model: &ContextualModel) -> Result<ContextualModel> {
    model.ensure_valid()?;
    let convert = |s: &Setting| -> Setting {
        if s.table.entries().all(|(_, _, v)| v.abs().is_one()) {
            let mut out = s.clone();
            out.table.ternary = false;
            return out;
        }
        let half = Rational::new(1, 2);
        let mut atoms: Vec<(Label, Rational)> = Vec::new();
        let mut cols: Vec<Label> = Vec::new();
        let mut columns: Vec<Vec<Rational>> = Vec::new();
        for (label, mass) in s.instrument.atoms() {
            // Instrument atoms and table columns may be ordered differently.
            let col = s.table.cols.iter().position(|x| x == label).expect("validated");
            let thresholds: Vec<Rational> =
                s.table.values.iter().map(|row| (Rational::one() + &row[col]) * &half).collect();
            let mut cuts: Vec<Rational> = thresholds
                .iter()
                .filter(|t| !t.is_zero() && !t.is_one())
                .cloned()
                .collect();
            cuts.sort();
            cuts.dedup();
            let mut edges = vec![Rational::zero()];
            edges.extend(cuts);
            edges.push(Rational::one());
            let single = edges.len() == 2;
            for w in edges.windows(2) {
                let (lo, hi) = (&w[0], &w[1]);
                let sub = if single {
                    label.clone()
                } else if edges.len() == 3 && edges[1] == half {
                    format!("{label}|{}", if lo.is_zero() { "heads" } else { "tails" })
                } else {
                    format!("{label}|[{lo},{hi})")
                };
                atoms.push((sub.clone(), mass * &(hi - lo)));
                cols.push(sub);
                columns.push(
                    thresholds
                        .iter()
                        .map(|t| if lo < t { Rational::one() } else { -Rational::one() })
                        .collect(),
                );
            }
        }
        let values = (0..s.table.rows.len())
            .map(|r| columns.iter().map(|col| col[r].clone()).collect())
            .collect();
        Setting {
            label: s.label.clone(),
            instrument: Pmf::from_atoms(atoms),
            table: OutcomeTable { rows: s.table.rows.clone(), cols, values, ternary: false },
        }
    };
    Ok(ContextualModel {
        source: model.source.clone(),
        alice: [convert(&model.alice[0]), convert(&model.alice[1])],
        bob: [convert(&model.bob[0]), convert(&model.bob[1])],
    })
}

/// Upper bound on the probability that a local process produces an
/// estimated CHSH value of at least `observed`, kept in log form because it
/// underflows `f64` for realistic trial counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleBound {
    pub log_bound: f64,
}

impl SampleBound {
    pub fn bound(&self) -> f64 {
        self.log_bound.exp()
    }
}

/// Hoeffding bound `min(1, exp(-n · max(0, |S| - 2)² / 32))` for `n` trials
/// split evenly over the four contexts: the per-trial increment of the
/// estimator has range 8.
pub fn finite_sample_bound(n_trials: u64, observed: f64) -> Result<SampleBound> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("finite_sample_bound needs at least one trial".into()));
    }
    if !observed.is_finite() || observed.abs() > 4.0 {
        return Err(Error::OutOfRange { what: "observed CHSH value".into(), value: observed.to_string() });
    }
    let excess = (observed.abs() - 2.0).max(0.0);
    let log_bound = (-(n_trials as f64) * excess * excess / 32.0).min(0.0);
    Ok(SampleBound { log_bound })
}
