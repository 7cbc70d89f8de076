//! Constructions that rewrite a contextual model as an ordinary local model
//! on a single, setting-independent probability space.
//!
//! * [`product_flatten`]: the Cartesian product of the source and all four
//!   instrument spaces with the product measure.
//! * [`uniform_reduce`]: the two instrument variables of each side are read
//!   off one shared uniform variable per side, discretized exactly into the
//!   cells of the common refinement of their quantile partitions.
//! * [`bell_average`]: the instrument variables are averaged out, leaving
//!   outcome functions of the source variable alone.
//!
//! All three reproduce the four context expectations exactly.

use crate::behavior::CorrelationQuad;
use crate::error::Result;
use crate::model::{Context, ContextualModel, Label, Pmf, ResolvedSetting, Side, CONTEXTS};
use crate::rational::Rational;

/// One atom of a flat model: a hidden-variable tuple, its mass, and the
/// outcome each setting assigns to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatAtom {
    pub tuple: Vec<Label>,
    pub mass: Rational,
    pub alice: [Rational; 2],
    pub bob: [Rational; 2],
}

/// A local hidden-variable model on one product space. The single `mass` per
/// atom serves all four contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatModel {
    /// Names of the tuple coordinates.
    pub coordinates: Vec<String>,
    pub alice_settings: [Label; 2],
    pub bob_settings: [Label; 2],
    pub atoms: Vec<FlatAtom>,
}

impl FlatModel {
    pub fn lambda_pmf(&self) -> Pmf<Vec<Label>> {
        Pmf::from_atoms(self.atoms.iter().map(|a| (a.tuple.clone(), a.mass.clone())).collect())
    }

    /// `A(setting, λ)` for the atom at `index`.
    pub fn alice_outcome(&self, setting: usize, index: usize) -> &Rational {
        &self.atoms[index].alice[setting]
    }

    pub fn bob_outcome(&self, setting: usize, index: usize) -> &Rational {
        &self.atoms[index].bob[setting]
    }

    pub fn expectation(&self, c: Context) -> Rational {
        self.atoms
            .iter()
            .filter(|a| !a.mass.is_zero())
            .map(|a| &a.alice[c.alice] * &a.bob[c.bob] * &a.mass)
            .sum()
    }

    pub fn quad(&self) -> CorrelationQuad {
        CorrelationQuad::from_vec(CONTEXTS.iter().map(|&c| self.expectation(c)).collect())
    }

    pub fn is_binary(&self) -> bool {
        self.atoms
            .iter()
            .all(|a| a.alice.iter().chain(&a.bob).all(|v| v.abs().is_one()))
    }
}

/// Instrument-averaged outcome functions `Ā_x(λ₁)`, `B̄_y(λ₂)` on the
/// original source space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AveragedModel {
    pub source: Pmf<(Label, Label)>,
    pub alice_settings: [Label; 2],
    pub bob_settings: [Label; 2],
    /// Per setting, `(λ₁, Ā(λ₁))` in table row order.
    pub alice_bar: [Vec<(Label, Rational)>; 2],
    pub bob_bar: [Vec<(Label, Rational)>; 2],
}

impl AveragedModel {
    fn lookup<'a>(table: &'a [(Label, Rational)], label: &str) -> &'a Rational {
        table
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v)
            .expect("averaged table covers every source label")
    }

    pub fn alice_bar(&self, setting: usize, lambda1: &str) -> &Rational {
        Self::lookup(&self.alice_bar[setting], lambda1)
    }

    pub fn bob_bar(&self, setting: usize, lambda2: &str) -> &Rational {
        Self::lookup(&self.bob_bar[setting], lambda2)
    }

    /// `Σ Ā_a(λ₁) B̄_b(λ₂) p(λ₁, λ₂)`.
    pub fn expectation(&self, c: Context) -> Rational {
        self.source
            .atoms()
            .iter()
            .map(|((l1, l2), p)| self.alice_bar(c.alice, l1) * self.bob_bar(c.bob, l2) * p)
            .sum()
    }

    pub fn quad(&self) -> CorrelationQuad {
        CorrelationQuad::from_vec(CONTEXTS.iter().map(|&c| self.expectation(c)).collect())
    }

    /// `|Ā| <= 1` and `|B̄| <= 1` everywhere.
    pub fn is_bounded(&self) -> bool {
        self.alice_bar
            .iter()
            .chain(&self.bob_bar)
            .flatten()
            .all(|(_, v)| v.is_unit_bounded())
    }
}

fn setting_labels(model: &ContextualModel, side: Side) -> [Label; 2] {
    let s = model.settings(side);
    [s[0].label.clone(), s[1].label.clone()]
}

/// Product-space flattening over tuples `(λ₁, λ₂, λ_x, λ_x', λ_y, λ_y')` with
/// mass `p(λ₁, λ₂) p_x(λ_x) p_x'(λ_x') p_y(λ_y) p_y'(λ_y')`.
pub fn product_flatten(model: &ContextualModel) -> Result<FlatModel> {
    model.ensure_valid()?;
    let ax = ResolvedSetting::new(model, Side::Alice, 0)?;
    let axp = ResolvedSetting::new(model, Side::Alice, 1)?;
    let by = ResolvedSetting::new(model, Side::Bob, 0)?;
    let byp = ResolvedSetting::new(model, Side::Bob, 1)?;
    let col_label = |r: &ResolvedSetting, c: usize| r.setting.table.cols[c].clone();

    let mut atoms = Vec::new();
    for ((l1, l2), p) in model.source.atoms() {
        let (rx, rxp) = (ax.row(l1)?, axp.row(l1)?);
        let (ry, ryp) = (by.row(l2)?, byp.row(l2)?);
        for &(cx, px) in &ax.instrument {
            let m1 = p * px;
            for &(cxp, pxp) in &axp.instrument {
                let m2 = &m1 * pxp;
                for &(cy, py) in &by.instrument {
                    let m3 = &m2 * py;
                    for &(cyp, pyp) in &byp.instrument {
                        atoms.push(FlatAtom {
                            tuple: vec![
                                l1.clone(),
                                l2.clone(),
                                col_label(&ax, cx),
                                col_label(&axp, cxp),
                                col_label(&by, cy),
                                col_label(&byp, cyp),
                            ],
                            mass: &m3 * pyp,
                            alice: [ax.value(rx, cx).clone(), axp.value(rxp, cxp).clone()],
                            bob: [by.value(ry, cy).clone(), byp.value(ryp, cyp).clone()],
                        });
                    }
                }
            }
        }
    }
    let names = |side: Side| {
        model
            .settings(side)
            .iter()
            .map(|s| format!("lambda[{side}:{}]", s.label))
            .collect::<Vec<_>>()
    };
    let mut coordinates = vec!["lambda1".to_string(), "lambda2".to_string()];
    coordinates.extend(names(Side::Alice));
    coordinates.extend(names(Side::Bob));
    Ok(FlatModel {
        coordinates,
        alice_settings: setting_labels(model, Side::Alice),
        bob_settings: setting_labels(model, Side::Bob),
        atoms,
    })
}

/// How the unit interval is cut for [`uniform_reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refinement {
    /// Cells between consecutive breakpoints of either setting's CDF.
    #[default]
    Common,
    /// Equal cells of width `1/L`, `L` the lcm of all breakpoint denominators.
    /// Finer than `Common`; same expectations.
    Lcm,
}

/// A partition of `[0, 1)` into half-open cells, with the instrument atom each
/// setting's inverse CDF assigns to every cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformPartition {
    /// Interior breakpoints, strictly increasing, in `(0, 1)`.
    pub breakpoints: Vec<Rational>,
    /// `(lo, hi)` per cell.
    pub cells: Vec<(Rational, Rational)>,
    /// Per setting, the instrument atom index picked in each cell.
    pub picks: [Vec<usize>; 2],
}

impl UniformPartition {
    pub fn new(first: &Pmf<Label>, second: &Pmf<Label>, refinement: Refinement) -> Self {
        let cdf = |p: &Pmf<Label>| {
            let mut acc = Rational::zero();
            p.atoms()
                .iter()
                .map(|(_, m)| {
                    acc += m;
                    acc.clone()
                })
                .collect::<Vec<_>>()
        };
        let (c1, c2) = (cdf(first), cdf(second));
        let mut points: Vec<Rational> = c1
            .iter()
            .chain(&c2)
            .filter(|b| !b.is_zero() && **b < Rational::one())
            .cloned()
            .collect();
        points.sort();
        points.dedup();
        if refinement == Refinement::Lcm {
            let l = points
                .iter()
                .map(|b| b.denom_string().parse::<u64>().expect("grid denominator fits in u64"))
                .fold(1u64, num_integer::lcm);
            let l = i64::try_from(l).expect("grid too fine");
            points = (1..l).map(|k| Rational::new(k, l)).collect();
        }
        let mut edges = vec![Rational::zero()];
        edges.extend(points.iter().cloned());
        edges.push(Rational::one());
        let cells: Vec<(Rational, Rational)> =
            edges.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        // Atom i owns [F_{i-1}, F_i); a cell lies inside exactly one of them.
        let pick = |cdf: &[Rational], lo: &Rational| cdf.iter().position(|f| lo < f).expect("cdf reaches 1");
        let picks = [
            cells.iter().map(|(lo, _)| pick(&c1, lo)).collect(),
            cells.iter().map(|(lo, _)| pick(&c2, lo)).collect(),
        ];
        UniformPartition { breakpoints: points, cells, picks }
    }

    pub fn cell_label(&self, k: usize) -> Label {
        let (lo, hi) = &self.cells[k];
        format!("[{lo},{hi})")
    }

    pub fn cell_length(&self, k: usize) -> Rational {
        let (lo, hi) = &self.cells[k];
        hi - lo
    }
}

/// Reduction to tuples `(λ₁, λ₂, u₁, u₂)` where `u₁` and `u₂` are cells of a
/// uniform variable per side. Setting dependence lives entirely in the
/// outcome functions.
pub fn uniform_reduce(model: &ContextualModel, refinement: Refinement) -> Result<FlatModel> {
    model.ensure_valid()?;
    let alice = [
        ResolvedSetting::new(model, Side::Alice, 0)?,
        ResolvedSetting::new(model, Side::Alice, 1)?,
    ];
    let bob = [ResolvedSetting::new(model, Side::Bob, 0)?, ResolvedSetting::new(model, Side::Bob, 1)?];
    let u1 = UniformPartition::new(&model.alice[0].instrument, &model.alice[1].instrument, refinement);
    let u2 = UniformPartition::new(&model.bob[0].instrument, &model.bob[1].instrument, refinement);

    // Outcome of `setting` given the source row and a uniform cell.
    let read = |side: &[ResolvedSetting; 2], part: &UniformPartition, s: usize, row: usize, cell: usize| {
        let (col, _) = side[s].instrument[part.picks[s][cell]];
        side[s].value(row, col).clone()
    };

    let mut atoms = Vec::new();
    for ((l1, l2), p) in model.source.atoms() {
        let ra = [alice[0].row(l1)?, alice[1].row(l1)?];
        let rb = [bob[0].row(l2)?, bob[1].row(l2)?];
        for k1 in 0..u1.cells.len() {
            let m1 = p * &u1.cell_length(k1);
            let a = [read(&alice, &u1, 0, ra[0], k1), read(&alice, &u1, 1, ra[1], k1)];
            for k2 in 0..u2.cells.len() {
                atoms.push(FlatAtom {
                    tuple: vec![l1.clone(), l2.clone(), u1.cell_label(k1), u2.cell_label(k2)],
                    mass: &m1 * &u2.cell_length(k2),
                    alice: a.clone(),
                    bob: [read(&bob, &u2, 0, rb[0], k2), read(&bob, &u2, 1, rb[1], k2)],
                });
            }
        }
    }
    Ok(FlatModel {
        coordinates: vec!["lambda1".into(), "lambda2".into(), "u1".into(), "u2".into()],
        alice_settings: setting_labels(model, Side::Alice),
        bob_settings: setting_labels(model, Side::Bob),
        atoms,
    })
}

/// Averages each outcome function over its instrument distribution:
/// `Ā_x(λ₁) = Σ_{λ_x} A_x(λ₁, λ_x) p_x(λ_x)`, likewise for Bob.
pub fn bell_average(model: &ContextualModel) -> Result<AveragedModel> {
    model.ensure_valid()?;
    let average = |side: Side, s: usize| -> Result<Vec<(Label, Rational)>> {
        let r = ResolvedSetting::new(model, side, s)?;
        Ok(r.setting
            .table
            .rows
            .iter()
            .enumerate()
            .map(|(row, label)| {
                let bar = r.instrument.iter().map(|&(col, m)| r.value(row, col) * m).sum();
                (label.clone(), bar)
            })
            .collect())
    };
    Ok(AveragedModel {
        source: model.source.clone(),
        alice_settings: setting_labels(model, Side::Alice),
        bob_settings: setting_labels(model, Side::Bob),
        alice_bar: [average(Side::Alice, 0)?, average(Side::Alice, 1)?],
        bob_bar: [average(Side::Bob, 0)?, average(Side::Bob, 1)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_model, OutcomeKind};
    use crate::model::{counterexample_model, OutcomeTable, Setting};
    use crate::rational::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_of(m: &ContextualModel) -> CorrelationQuad {
        m.quad().unwrap()
    }

    #[test]
    fn counterexample_is_preserved() {
        let m = counterexample_model();
        let expected = CorrelationQuad::new([q(1, 1), q(0, 1), q(0, 1), q(-1, 1)]);
        assert_eq!(product_flatten(&m).unwrap().quad(), expected);
        assert_eq!(uniform_reduce(&m, Refinement::Common).unwrap().quad(), expected);
        let avg = bell_average(&m).unwrap();
        assert_eq!(avg.quad(), expected);
        for l in 1..=6 {
            assert!(avg.alice_bar(0, &l.to_string()).is_one());
        }
    }

    #[test]
    fn singleton_instruments_flatten_to_the_source_space() {
        let m = counterexample_model();
        let flat = product_flatten(&m).unwrap();
        assert_eq!(flat.atoms.len(), m.source.len());
        for (atom, ((l1, l2), p)) in flat.atoms.iter().zip(m.source.atoms()) {
            assert_eq!((&atom.tuple[0], &atom.tuple[1], &atom.mass), (l1, l2, p));
        }
    }

    #[test]
    fn partition_of_halves_and_thirds() {
        let halves = Pmf::uniform(["a".to_string(), "b".to_string()]);
        let thirds = Pmf::uniform(["c".to_string(), "d".to_string(), "e".to_string()]);
        let part = UniformPartition::new(&halves, &thirds, Refinement::Common);
        assert_eq!(part.breakpoints, vec![q(1, 3), q(1, 2), q(2, 3)]);
        assert_eq!(part.cells.len(), 4);
        assert_eq!(part.picks, [vec![0, 0, 1, 1], vec![0, 1, 1, 2]]);
        let lcm = UniformPartition::new(&halves, &thirds, Refinement::Lcm);
        assert_eq!(lcm.cells.len(), 6);
        let total: Rational = (0..lcm.cells.len()).map(|k| lcm.cell_length(k)).sum();
        assert!(total.is_one());
    }

    #[test]
    fn identical_instruments_give_the_quantile_partition() {
        let p = Pmf::from_atoms(vec![("a".into(), q(1, 5)), ("b".into(), q(0, 1)), ("c".into(), q(4, 5))]);
        let part = UniformPartition::new(&p, &p, Refinement::Common);
        assert_eq!(part.breakpoints, vec![q(1, 5)]);
        // The zero-mass atom owns no cell.
        assert_eq!(part.picks, [vec![0, 2], vec![0, 2]]);
    }

    #[test]
    fn instrument_independent_tables_average_to_themselves() {
        let mut m = counterexample_model();
        let s = Setting {
            label: "+1".into(),
            instrument: Pmf::from_atoms(vec![("i".into(), q(1, 4)), ("j".into(), q(3, 4))]),
            table: OutcomeTable::from_fn(
                (1..=6).map(|l| l.to_string()).collect(),
                vec!["i".into(), "j".into()],
                false,
                |r, _| q(r.parse::<i64>().unwrap() - 3, 3),
            ),
        };
        m.alice[0] = s;
        let avg = bell_average(&m).unwrap();
        for l in 1..=6 {
            assert_eq!(*avg.alice_bar(0, &l.to_string()), q(l - 3, 3));
        }
    }

    #[test]
    fn all_routes_agree_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for i in 0..150 {
            let kind = [OutcomeKind::Binary, OutcomeKind::Ternary, OutcomeKind::Fractional][i % 3];
            let m = random_model(&mut rng, 3, 3, kind);
            let quad = quad_of(&m);
            let flat = product_flatten(&m).unwrap();
            assert!(flat.lambda_pmf().total().is_one());
            assert_eq!(flat.quad(), quad);
            for r in [Refinement::Common, Refinement::Lcm] {
                assert_eq!(uniform_reduce(&m, r).unwrap().quad(), quad);
            }
            let avg = bell_average(&m).unwrap();
            assert!(avg.is_bounded());
            assert_eq!(avg.quad(), quad);
        }
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut m = counterexample_model();
        m.bob[0].table.values[0][0] = q(2, 1);
        assert!(product_flatten(&m).is_err());
        assert!(uniform_reduce(&m, Refinement::Common).is_err());
        assert!(bell_average(&m).is_err());
    }
}
