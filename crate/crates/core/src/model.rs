//! Contextual local hidden-variable models and their exact expectations.
//!
//! A [`ContextualModel`] has a source distribution over pairs `(λ₁, λ₂)`, and
//! for each of the two settings on each side an instrument distribution over
//! `λ_x` together with an outcome table `A_x(λ₁, λ_x)` (or `B_y(λ₂, λ_y)` for
//! Bob). Hidden-variable spaces are finite and all masses are exact rationals.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::Rational;

pub type Label = String;

/// The two parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Alice,
    Bob,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Alice => f.write_str("alice"),
            Side::Bob => f.write_str("bob"),
        }
    }
}

/// A joint setting choice. Setting index `0` is the unprimed setting (`x` or
/// `y`), index `1` the primed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    pub alice: usize,
    pub bob: usize,
}

impl Context {
    pub const fn new(alice: usize, bob: usize) -> Self {
        Context { alice, bob }
    }

    /// Position in the canonical order `xy, xy', x'y, x'y'`.
    pub fn index(self) -> usize {
        2 * self.alice + self.bob
    }
}

/// The four contexts in canonical order `xy, xy', x'y, x'y'`.
pub const CONTEXTS: [Context; 4] = [
    Context::new(0, 0),
    Context::new(0, 1),
    Context::new(1, 0),
    Context::new(1, 1),
];

/// A finite probability mass function. Construction does not validate; see
/// [`Pmf::issues`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pmf<L> {
    atoms: Vec<(L, Rational)>,
}

impl<L: Clone + Eq + std::hash::Hash + fmt::Debug> Pmf<L> {
    pub fn from_atoms(atoms: Vec<(L, Rational)>) -> Self {
        Pmf { atoms }
    }

    pub fn uniform(labels: impl IntoIterator<Item = L>) -> Self {
        let labels: Vec<L> = labels.into_iter().collect();
        let n = labels.len() as i64;
        let atoms = labels.into_iter().map(|l| (l, Rational::new(1, n))).collect();
        Pmf { atoms }
    }

    pub fn point(label: L) -> Self {
        Pmf { atoms: vec![(label, Rational::one())] }
    }

    pub fn atoms(&self) -> &[(L, Rational)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &L> {
        self.atoms.iter().map(|(l, _)| l)
    }

    pub fn total(&self) -> Rational {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    pub fn mass_of(&self, label: &L) -> Rational {
        self.atoms
            .iter()
            .filter(|(l, _)| l == label)
            .map(|(_, m)| m)
            .sum()
    }

    /// Invariant violations, named relative to `name`.
    pub fn issues(&self, name: &str) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        if self.atoms.is_empty() {
            out.push(ValidationIssue::EmptyPmf { pmf: name.to_string() });
        }
        let mut seen = HashSet::new();
        for (label, mass) in &self.atoms {
            if mass.is_negative() {
                out.push(ValidationIssue::NegativeMass {
                    pmf: name.to_string(),
                    label: format!("{label:?}"),
                    mass: mass.clone(),
                });
            }
            if !seen.insert(label) {
                out.push(ValidationIssue::DuplicateLabel {
                    pmf: name.to_string(),
                    label: format!("{label:?}"),
                });
            }
        }
        let total = self.total();
        if !total.is_one() {
            out.push(ValidationIssue::NotNormalized {
                pmf: name.to_string(),
                deficit: Rational::one() - &total,
                total,
            });
        }
        out
    }
}

/// Outcome function `A_x(λ₁, λ_x)` tabulated row-major: rows are source
/// labels, columns instrument labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeTable {
    pub rows: Vec<Label>,
    pub cols: Vec<Label>,
    pub values: Vec<Vec<Rational>>,
    /// Restricts outcomes to `{-1, 0, +1}`.
    pub ternary: bool,
}

impl OutcomeTable {
    pub fn from_fn(
        rows: Vec<Label>,
        cols: Vec<Label>,
        ternary: bool,
        mut f: impl FnMut(&str, &str) -> Rational,
    ) -> Self {
        let values = rows
            .iter()
            .map(|r| cols.iter().map(|c| f(r, c)).collect())
            .collect();
        OutcomeTable { rows, cols, values, ternary }
    }

    pub fn get(&self, row: usize, col: usize) -> &Rational {
        &self.values[row][col]
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.values
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, v)| (r, c, v)))
    }

    /// Every entry lies in `{-1, 0, +1}`.
    pub fn is_point_valued(&self) -> bool {
        self.entries().all(|(_, _, v)| is_point_outcome(v))
    }

    pub fn has_zero(&self) -> bool {
        self.entries().any(|(_, _, v)| v.is_zero())
    }
}

pub(crate) fn is_point_outcome(v: &Rational) -> bool {
    v.is_zero() || v.abs().is_one()
}

/// One measurement setting of one party: its instrument distribution and
/// outcome table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub label: Label,
    pub instrument: Pmf<Label>,
    pub table: OutcomeTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextualModel {
    pub source: Pmf<(Label, Label)>,
    pub alice: [Setting; 2],
    pub bob: [Setting; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    EmptyPmf { pmf: String },
    NegativeMass { pmf: String, label: String, mass: Rational },
    DuplicateLabel { pmf: String, label: String },
    NotNormalized { pmf: String, total: Rational, deficit: Rational },
    OutcomeOutOfRange { table: String, row: Label, col: Label, value: Rational },
    NotTernary { table: String, row: Label, col: Label, value: Rational },
    DomainMismatch { table: String, detail: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            EmptyPmf { pmf } => write!(f, "{pmf}: no atoms"),
            NegativeMass { pmf, label, mass } => write!(f, "{pmf}: atom {label} has negative mass {mass}"),
            DuplicateLabel { pmf, label } => write!(f, "{pmf}: duplicate label {label}"),
            NotNormalized { pmf, total, deficit } => {
                write!(f, "{pmf}: masses sum to {total} (deficit {deficit})")
            }
            OutcomeOutOfRange { table, row, col, value } => {
                write!(f, "{table}[{row}, {col}] = {value} is outside [-1, 1]")
            }
            NotTernary { table, row, col, value } => {
                write!(f, "{table}[{row}, {col}] = {value} is not in {{-1, 0, 1}} but the table is ternary")
            }
            DomainMismatch { table, detail } => write!(f, "{table}: {detail}"),
        }
    }
}

/// Every invariant a model violates. Empty means well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

fn distinct_in_order<'a>(labels: impl Iterator<Item = &'a Label>) -> Vec<Label> {
    let mut seen = HashSet::new();
    labels.filter(|l| seen.insert(*l)).cloned().collect()
}

fn same_set(a: &[Label], b: &[Label]) -> bool {
    let sa: HashSet<_> = a.iter().collect();
    let sb: HashSet<_> = b.iter().collect();
    sa == sb && sa.len() == a.len() && sb.len() == b.len()
}

impl ContextualModel {
    pub fn settings(&self, side: Side) -> &[Setting; 2] {
        match side {
            Side::Alice => &self.alice,
            Side::Bob => &self.bob,
        }
    }

    pub fn setting(&self, side: Side, index: usize) -> &Setting {
        &self.settings(side)[index]
    }

    /// Distinct first (Alice) or second (Bob) source coordinates, in order of
    /// first appearance.
    pub fn source_labels(&self, side: Side) -> Vec<Label> {
        match side {
            Side::Alice => distinct_in_order(self.source.labels().map(|(a, _)| a)),
            Side::Bob => distinct_in_order(self.source.labels().map(|(_, b)| b)),
        }
    }

    pub fn table_name(&self, side: Side, index: usize) -> String {
        format!("{side}[{}].table", self.setting(side, index).label)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_model(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    /// All outcome tables hold values in `{-1, +1}` only.
    pub fn is_binary(&self) -> bool {
        self.alice
            .iter()
            .chain(&self.bob)
            .all(|s| s.table.entries().all(|(_, _, v)| v.abs().is_one()))
    }

    /// All outcome tables hold point outcomes in `{-1, 0, +1}`.
    pub fn is_point_valued(&self) -> bool {
        self.alice.iter().chain(&self.bob).all(|s| s.table.is_point_valued())
    }

    pub fn quad(&self) -> Result<crate::behavior::CorrelationQuad> {
        let values = CONTEXTS
            .iter()
            .map(|&c| exact_expectation(self, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::behavior::CorrelationQuad::from_vec(values))
    }
}

/// Reports every violated invariant; never fails.
pub fn validate_model(model: &ContextualModel) -> ValidationReport {
    let mut issues = model.source.issues("source");
    for side in [Side::Alice, Side::Bob] {
        let rows_expected = model.source_labels(side);
        for (i, setting) in model.settings(side).iter().enumerate() {
            let pmf_name = format!("{side}[{}].instrument", setting.label);
            issues.extend(setting.instrument.issues(&pmf_name));
            let table_name = model.table_name(side, i);
            let table = &setting.table;
            if !same_set(&table.rows, &rows_expected) {
                issues.push(ValidationIssue::DomainMismatch {
                    table: table_name.clone(),
                    detail: format!(
                        "rows {:?} do not match the source {side} labels {:?}",
                        table.rows, rows_expected
                    ),
                });
            }
            let cols_expected: Vec<Label> = setting.instrument.labels().cloned().collect();
            if !same_set(&table.cols, &cols_expected) {
                issues.push(ValidationIssue::DomainMismatch {
                    table: table_name.clone(),
                    detail: format!(
                        "columns {:?} do not match the instrument labels {:?}",
                        table.cols, cols_expected
                    ),
                });
            }
            if table.values.len() != table.rows.len()
                || table.values.iter().any(|r| r.len() != table.cols.len())
            {
                issues.push(ValidationIssue::DomainMismatch {
                    table: table_name.clone(),
                    detail: format!(
                        "value array is not {} x {}",
                        table.rows.len(),
                        table.cols.len()
                    ),
                });
                continue;
            }
            for (r, c, v) in table.entries() {
                if !v.is_unit_bounded() {
                    issues.push(ValidationIssue::OutcomeOutOfRange {
                        table: table_name.clone(),
                        row: table.rows[r].clone(),
                        col: table.cols[c].clone(),
                        value: v.clone(),
                    });
                } else if table.ternary && !is_point_outcome(v) {
                    issues.push(ValidationIssue::NotTernary {
                        table: table_name.clone(),
                        row: table.rows[r].clone(),
                        col: table.cols[c].clone(),
                        value: v.clone(),
                    });
                }
            }
        }
    }
    ValidationReport { issues }
}

/// Index of every label in `labels`.
pub(crate) fn index_of(labels: &[Label]) -> HashMap<&str, usize> {
    labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect()
}

/// Resolves a setting's instrument atoms against its table columns and a list
/// of source labels against its table rows.
pub(crate) struct ResolvedSetting<'a> {
    pub setting: &'a Setting,
    /// `(column index, mass)` per instrument atom.
    pub instrument: Vec<(usize, &'a Rational)>,
    rows: HashMap<&'a str, usize>,
    table_name: String,
}

impl<'a> ResolvedSetting<'a> {
    pub fn new(model: &'a ContextualModel, side: Side, index: usize) -> Result<Self> {
        let setting = model.setting(side, index);
        let table_name = model.table_name(side, index);
        let cols = index_of(&setting.table.cols);
        let instrument = setting
            .instrument
            .atoms()
            .iter()
            .map(|(label, mass)| {
                cols.get(label.as_str()).map(|&c| (c, mass)).ok_or_else(|| Error::DomainMismatch {
                    table: table_name.clone(),
                    row: "*".into(),
                    col: label.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedSetting {
            setting,
            instrument,
            rows: index_of(&setting.table.rows),
            table_name,
        })
    }

    pub fn row(&self, label: &str) -> Result<usize> {
        self.rows.get(label).copied().ok_or_else(|| Error::DomainMismatch {
            table: self.table_name.clone(),
            row: label.to_string(),
            col: "*".into(),
        })
    }

    pub fn value(&self, row: usize, col: usize) -> &'a Rational {
        self.setting.table.get(row, col)
    }
}

/// `E(A_a B_b) = Σ A_a(λ₁, λ_a) B_b(λ₂, λ_b) p_a(λ_a) p_b(λ_b) p(λ₁, λ₂)`, summed
/// over the full four-fold product.
pub fn exact_expectation(model: &ContextualModel, context: Context) -> Result<Rational> {
    let alice = ResolvedSetting::new(model, Side::Alice, context.alice)?;
    let bob = ResolvedSetting::new(model, Side::Bob, context.bob)?;
    let mut total = Rational::zero();
    for ((l1, l2), p) in model.source.atoms() {
        let ra = alice.row(l1)?;
        let rb = bob.row(l2)?;
        for &(ca, pa) in &alice.instrument {
            let a = alice.value(ra, ca);
            if a.is_zero() {
                continue;
            }
            for &(cb, pb) in &bob.instrument {
                let b = bob.value(rb, cb);
                total += a * b * pa * pb * p;
            }
        }
    }
    Ok(total)
}

/// Expectation of a single party's outcome at one setting.
pub fn single_expectation(model: &ContextualModel, side: Side, index: usize) -> Result<Rational> {
    let resolved = ResolvedSetting::new(model, side, index)?;
    let mut total = Rational::zero();
    for ((l1, l2), p) in model.source.atoms() {
        let row = resolved.row(if side == Side::Alice { l1 } else { l2 })?;
        for &(c, pc) in &resolved.instrument {
            total += resolved.value(row, c) * pc * p;
        }
    }
    Ok(total)
}

/// The die-and-coins model: a fair die `λ ∈ {1..6}` is sent to both parties,
/// with `A(a, λ) = a^λ` and `B(b, λ) = b^(λ+1)` for settings `a, b ∈ {+1, -1}`.
/// Instruments are trivial one-atom distributions.
pub fn counterexample_model() -> ContextualModel {
    let lambdas: Vec<Label> = (1..=6).map(|l| l.to_string()).collect();
    let source = Pmf::uniform(lambdas.iter().map(|l| (l.clone(), l.clone())));
    let power = |base: i64, exp: i64| Rational::from_integer(if base == 1 || exp % 2 == 0 { 1 } else { -1 });
    let setting = |base: i64, shift: i64| {
        let label = if base == 1 { "+1" } else { "-1" };
        Setting {
            label: label.to_string(),
            instrument: Pmf::point("0".to_string()),
            table: OutcomeTable::from_fn(lambdas.clone(), vec!["0".into()], false, |row, _| {
                power(base, row.parse::<i64>().unwrap() + shift)
            }),
        }
    };
    ContextualModel {
        source,
        alice: [setting(1, 0), setting(-1, 0)],
        bob: [setting(1, 1), setting(-1, 1)],
    }
}
