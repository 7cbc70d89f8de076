//! JSON file format for models and behaviors.
//!
//! Every probability and outcome is a string holding an exact fraction
//! (`"1/6"`) or a decimal (`"0.125"`, converted exactly). Pmfs are arrays of
//! `[label, mass]` pairs so that atom order survives a round trip. A
//! top-level `kind` selects the document type and defaults to `contextual`:
//!
//! ```json
//! {
//!   "source": [["1", "1", "1/6"], ["2", "2", "1/6"]],
//!   "alice": [
//!     {"label": "+1", "instrument": [["0", "1"]],
//!      "table": {"rows": ["1", "2"], "cols": ["0"], "values": [["1"], ["-1"]]}},
//!     ...
//!   ],
//!   "bob": [...]
//! }
//! ```
//!
//! Flat and averaged models carry `"kind": "flat"` / `"kind": "averaged"`;
//! behaviors carry `"kind": "behavior"` and a `contexts` object keyed by
//! `xy`, `xy'`, `x'y`, `x'y'`, each mapping outcome pairs such as `"+-"` (and
//! `"0+"` etc. for ternary tables) to probabilities.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::{zero_pair_pmf, Alphabet, BehaviorTable, PairPmf};
use crate::error::{Error, Result};
use crate::flatten::{AveragedModel, FlatAtom, FlatModel};
use crate::model::{ContextualModel, Label, OutcomeTable, Pmf, Setting, CONTEXTS};
use crate::rational::Rational;

/// Canonical context keys in context order.
pub const CONTEXT_KEYS: [&str; 4] = ["xy", "xy'", "x'y", "x'y'"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    ternary: bool,
    rows: Vec<Label>,
    cols: Vec<Label>,
    values: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingDoc {
    label: Label,
    instrument: Vec<(Label, Rational)>,
    table: TableDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextualDoc {
    #[serde(default)]
    kind: String,
    source: Vec<(Label, Label, Rational)>,
    alice: [SettingDoc; 2],
    bob: [SettingDoc; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatAtomDoc {
    tuple: Vec<Label>,
    mass: Rational,
    alice: [Rational; 2],
    bob: [Rational; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatDoc {
    #[serde(default)]
    kind: String,
    coordinates: Vec<String>,
    alice_settings: [Label; 2],
    bob_settings: [Label; 2],
    atoms: Vec<FlatAtomDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AveragedDoc {
    #[serde(default)]
    kind: String,
    source: Vec<(Label, Label, Rational)>,
    alice_settings: [Label; 2],
    bob_settings: [Label; 2],
    alice_bar: [Vec<(Label, Rational)>; 2],
    bob_bar: [Vec<(Label, Rational)>; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorDoc {
    #[serde(default)]
    kind: String,
    alphabet: Alphabet,
    contexts: BTreeMap<String, BTreeMap<String, Rational>>,
}

#[allow(clippy::large_enum_variant)]
enum Doc {
    Contextual(ContextualDoc),
    Flat(FlatDoc),
    Averaged(AveragedDoc),
    Behavior(BehaviorDoc),
}

/// Anything a model file can hold.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelFile {
    Contextual(ContextualModel),
    Flat(FlatModel),
    Averaged(AveragedModel),
    Behavior(BehaviorTable),
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Contextual(_) => "contextual",
            ModelFile::Flat(_) => "flat",
            ModelFile::Averaged(_) => "averaged",
            ModelFile::Behavior(_) => "behavior",
        }
    }
}

fn outcome_char(v: i64) -> char {
    match v {
        1 => '+',
        -1 => '-',
        _ => '0',
    }
}

fn outcome_of(c: char) -> Option<i64> {
    match c {
        '+' => Some(1),
        '-' => Some(-1),
        '0' => Some(0),
        _ => None,
    }
}

fn setting_doc(s: &Setting) -> SettingDoc {
    SettingDoc {
        label: s.label.clone(),
        instrument: s.instrument.atoms().to_vec(),
        table: TableDoc {
            ternary: s.table.ternary,
            rows: s.table.rows.clone(),
            cols: s.table.cols.clone(),
            values: s.table.values.clone(),
        },
    }
}

fn to_doc(file: &ModelFile) -> Doc {
    match file {
        ModelFile::Contextual(m) => Doc::Contextual(ContextualDoc {
            kind: "contextual".into(),
            source: m.source.atoms().iter().map(|((a, b), p)| (a.clone(), b.clone(), p.clone())).collect(),
            alice: [setting_doc(&m.alice[0]), setting_doc(&m.alice[1])],
            bob: [setting_doc(&m.bob[0]), setting_doc(&m.bob[1])],
        }),
        ModelFile::Flat(f) => Doc::Flat(FlatDoc {
            kind: "flat".into(),
            coordinates: f.coordinates.clone(),
            alice_settings: f.alice_settings.clone(),
            bob_settings: f.bob_settings.clone(),
            atoms: f
                .atoms
                .iter()
                .map(|a| FlatAtomDoc { tuple: a.tuple.clone(), mass: a.mass.clone(), alice: a.alice.clone(), bob: a.bob.clone() })
                .collect(),
        }),
        ModelFile::Averaged(m) => Doc::Averaged(AveragedDoc {
            kind: "averaged".into(),
            source: m.source.atoms().iter().map(|((a, b), p)| (a.clone(), b.clone(), p.clone())).collect(),
            alice_settings: m.alice_settings.clone(),
            bob_settings: m.bob_settings.clone(),
            alice_bar: m.alice_bar.clone(),
            bob_bar: m.bob_bar.clone(),
        }),
        ModelFile::Behavior(b) => {
            let outcomes: &[i64] = match b.alphabet {
                Alphabet::Binary => &[1, -1],
                Alphabet::Ternary => &[1, 0, -1],
            };
            let contexts = CONTEXTS
                .iter()
                .map(|&c| {
                    let mut m = BTreeMap::new();
                    for &x in outcomes {
                        for &y in outcomes {
                            let key = format!("{}{}", outcome_char(x), outcome_char(y));
                            m.insert(key, b.prob(c, x, y).clone());
                        }
                    }
                    (CONTEXT_KEYS[c.index()].to_string(), m)
                })
                .collect();
            Doc::Behavior(BehaviorDoc { kind: "behavior".into(), alphabet: b.alphabet, contexts })
        }
    }
}

fn semantic(path: &str, message: String) -> Error {
    Error::Parse { path: path.into(), line: 1, column: 1, message }
}

fn from_setting_doc(d: SettingDoc) -> Setting {
    Setting {
        label: d.label,
        instrument: Pmf::from_atoms(d.instrument),
        table: OutcomeTable { rows: d.table.rows, cols: d.table.cols, values: d.table.values, ternary: d.table.ternary },
    }
}

fn from_doc(doc: Doc, path: &str) -> Result<ModelFile> {
    Ok(match doc {
        Doc::Contextual(d) => {
            let [a0, a1] = d.alice;
            let [b0, b1] = d.bob;
            ModelFile::Contextual(ContextualModel {
                source: Pmf::from_atoms(d.source.into_iter().map(|(a, b, p)| ((a, b), p)).collect()),
                alice: [from_setting_doc(a0), from_setting_doc(a1)],
                bob: [from_setting_doc(b0), from_setting_doc(b1)],
            })
        }
        Doc::Flat(d) => ModelFile::Flat(FlatModel {
            coordinates: d.coordinates,
            alice_settings: d.alice_settings,
            bob_settings: d.bob_settings,
            atoms: d
                .atoms
                .into_iter()
                .map(|a| FlatAtom { tuple: a.tuple, mass: a.mass, alice: a.alice, bob: a.bob })
                .collect(),
        }),
        Doc::Averaged(d) => ModelFile::Averaged(AveragedModel {
            source: Pmf::from_atoms(d.source.into_iter().map(|(a, b, p)| ((a, b), p)).collect()),
            alice_settings: d.alice_settings,
            bob_settings: d.bob_settings,
            alice_bar: d.alice_bar,
            bob_bar: d.bob_bar,
        }),
        Doc::Behavior(d) => {
            let mut contexts: [PairPmf; 4] = std::array::from_fn(|_| zero_pair_pmf());
            for (key, probs) in d.contexts {
                let Some(k) = CONTEXT_KEYS.iter().position(|c| *c == key) else {
                    return Err(semantic(path, format!("unknown context `{key}`; expected one of {CONTEXT_KEYS:?}")));
                };
                for (pair, p) in probs {
                    let chars: Vec<char> = pair.chars().collect();
                    let parsed = match chars[..] {
                        [x, y] => outcome_of(x).zip(outcome_of(y)),
                        _ => None,
                    };
                    let Some((x, y)) = parsed else {
                        return Err(semantic(path, format!("context {key}: bad outcome pair `{pair}`")));
                    };
                    if d.alphabet == Alphabet::Binary && (x == 0 || y == 0) {
                        return Err(semantic(path, format!("context {key}: outcome pair `{pair}` in a binary behavior")));
                    }
                    contexts[k][(x + 1) as usize][(y + 1) as usize] = p;
                }
            }
            let table = BehaviorTable::new(d.alphabet, contexts).map_err(|e| semantic(path, e.to_string()))?;
            ModelFile::Behavior(table)
        }
    })
}

/// Serializes to pretty JSON in canonical form.
pub fn print_model(file: &ModelFile) -> String {
    let text = match to_doc(file) {
        Doc::Contextual(d) => serde_json::to_string_pretty(&d),
        Doc::Flat(d) => serde_json::to_string_pretty(&d),
        Doc::Averaged(d) => serde_json::to_string_pretty(&d),
        Doc::Behavior(d) => serde_json::to_string_pretty(&d),
    };
    text.expect("documents serialize")
}

pub fn print_contextual(model: &ContextualModel) -> String {
    print_model(&ModelFile::Contextual(model.clone()))
}

/// Parses a document. `path` only labels error messages.
pub fn parse_str(text: &str, path: &str) -> Result<ModelFile> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| json_error(path, &e))?;
    let kind = match value.get("kind") {
        None => "contextual",
        Some(k) => k.as_str().unwrap_or(""),
    };
    let parse_err = |e: serde_json::Error| json_error(path, &e);
    let doc = match kind {
        "contextual" => Doc::Contextual(serde_json::from_str(text).map_err(parse_err)?),
        "flat" => Doc::Flat(serde_json::from_str(text).map_err(parse_err)?),
        "averaged" => Doc::Averaged(serde_json::from_str(text).map_err(parse_err)?),
        "behavior" => Doc::Behavior(serde_json::from_str(text).map_err(parse_err)?),
        other => {
            return Err(semantic(
                path,
                format!("unknown kind `{other}`; expected contextual, flat, averaged or behavior"),
            ))
        }
    };
    let file = from_doc(doc, path)?;
    if let ModelFile::Contextual(m) = &file {
        m.ensure_valid()?;
    }
    Ok(file)
}

fn json_error(path: &str, e: &serde_json::Error) -> Error {
    let message = e.to_string();
    // serde_json appends " at line L column C"; keep the message bare.
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    Error::Parse { path: path.into(), line: e.line(), column: e.column(), message }
}

/// Reads and validates a model file.
pub fn parse_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_str(&text, &path.display().to_string())
}

/// Reads a file that must hold a contextual model.
pub fn read_contextual(path: impl AsRef<Path>) -> Result<ContextualModel> {
    let shown = path.as_ref().display().to_string();
    match parse_model(path)? {
        ModelFile::Contextual(m) => Ok(m),
        other => Err(semantic(&shown, format!("expected a contextual model, found kind `{}`", other.kind()))),
    }
}
