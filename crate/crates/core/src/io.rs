//! File formats shared with the command-line tool.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly and keeps output byte-stable.

use std::io;

use num_complex::Complex64;
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::hilbert::{OperatorMatrix, StateVector};
use crate::inequalities::{ChshScenario, KcbsScenario};
use crate::lhv::{LhvModel, SettingSpace};
use crate::{Error, Result};

/// A float with 17 significant digits, `null` for non-finite values.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_owned()
    }
}

/// Pretty JSON whose floats go through [`fmt17`].
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serializes to pretty JSON with 17-digit floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// `serde(with)` adapter writing complex vectors as `[[re, im], ...]`.
pub mod amplitudes {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

fn to_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

/// Deserializes a document, reporting the JSON path of the first bad value.
fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "document".to_owned() } else { path };
        Error::input(field, e.into_inner().to_string())
    })?;
    de.end()?;
    Ok(value)
}

fn with_field<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidInput { field: inner, reason } => Error::input(format!("{field}.{inner}"), reason),
        Error::InvalidDistribution { field: inner, reason } => {
            Error::distribution(format!("{field}.{inner}"), reason)
        }
        Error::Format(_) | Error::Internal(_) => e,
        other => Error::input(field, other.to_string()),
    })
}

#[derive(Debug, Clone, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsFile {
    pub alice: usize,
    pub bob: usize,
    pub marginal: Vec<f64>,
}

/// On-disk form of an [`LhvModel`].
///
/// `lambda_given_settings` has one row per joint setting (`a * bob + b`) and one
/// column per hidden value.
#[derive(Debug, Clone, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub lambda_count: usize,
    pub settings: SettingsFile,
    pub lambda_given_settings: Vec<Vec<f64>>,
    pub alice_response: Vec<Vec<f64>>,
    pub bob_response: Vec<Vec<f64>>,
}

impl From<&LhvModel> for ModelFile {
    fn from(m: &LhvModel) -> Self {
        let s = m.settings();
        Self {
            lambda_count: m.lambda_count(),
            settings: SettingsFile {
                alice: s.alice_settings(),
                bob: s.bob_settings(),
                marginal: s.marginal().to_vec(),
            },
            lambda_given_settings: m.lambda_given_settings().to_vec(),
            alice_response: m.alice_response().to_vec(),
            bob_response: m.bob_response().to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for LhvModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let settings = SettingSpace::new(f.settings.alice, f.settings.bob, f.settings.marginal)?;
        if f.lambda_given_settings.iter().any(|r| r.len() != f.lambda_count) {
            return Err(Error::input(
                "lambda_given_settings",
                format!("every row must have lambda_count = {} entries", f.lambda_count),
            ));
        }
        LhvModel::new(
            settings,
            f.lambda_given_settings,
            f.alice_response,
            f.bob_response,
        )
    }
}

pub fn model_to_json(model: &LhvModel) -> Result<String> {
    to_json(&ModelFile::from(model))
}

pub fn model_from_json(text: &str) -> Result<LhvModel> {
    let file: ModelFile = parse(text)?;
    LhvModel::try_from(file)
}

type MatrixPairs = Vec<Vec<[f64; 2]>>;

/// On-disk CHSH scenario: 2x2 observables as nested `[re, im]` rows.
#[derive(Debug, Clone, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshScenarioFile {
    pub alice: [MatrixPairs; 2],
    pub bob: [MatrixPairs; 2],
    pub state: Vec<[f64; 2]>,
}

fn matrix_to_pairs(m: &OperatorMatrix) -> MatrixPairs {
    m.rows().iter().map(|r| to_pairs(r)).collect()
}

fn matrix_from_pairs(field: &str, rows: &MatrixPairs) -> Result<OperatorMatrix> {
    let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| from_pairs(r)).collect();
    with_field(field, OperatorMatrix::from_rows(&rows))
}

impl From<&ChshScenario> for ChshScenarioFile {
    fn from(s: &ChshScenario) -> Self {
        Self {
            alice: s.alice_observables().each_ref().map(matrix_to_pairs),
            bob: s.bob_observables().each_ref().map(matrix_to_pairs),
            state: to_pairs(s.state().amplitudes()),
        }
    }
}

impl TryFrom<ChshScenarioFile> for ChshScenario {
    type Error = Error;

    fn try_from(f: ChshScenarioFile) -> Result<Self> {
        let alice = [
            matrix_from_pairs("alice[0]", &f.alice[0])?,
            matrix_from_pairs("alice[1]", &f.alice[1])?,
        ];
        let bob = [
            matrix_from_pairs("bob[0]", &f.bob[0])?,
            matrix_from_pairs("bob[1]", &f.bob[1])?,
        ];
        let state = with_field("state", StateVector::new(from_pairs(&f.state)))?;
        ChshScenario::new(alice, bob, state)
    }
}

pub fn chsh_scenario_to_json(s: &ChshScenario) -> Result<String> {
    to_json(&ChshScenarioFile::from(s))
}

pub fn chsh_scenario_from_json(text: &str) -> Result<ChshScenario> {
    let file: ChshScenarioFile = parse(text)?;
    ChshScenario::try_from(file)
}

/// On-disk KCBS scenario: five real triples and a qutrit state.
#[derive(Debug, Clone, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KcbsScenarioFile {
    pub vectors: [[f64; 3]; 5],
    pub state: Vec<[f64; 2]>,
}

impl From<&KcbsScenario> for KcbsScenarioFile {
    fn from(s: &KcbsScenario) -> Self {
        Self {
            vectors: *s.vectors(),
            state: to_pairs(s.state().amplitudes()),
        }
    }
}

impl TryFrom<KcbsScenarioFile> for KcbsScenario {
    type Error = Error;

    fn try_from(f: KcbsScenarioFile) -> Result<Self> {
        let state = with_field("state", StateVector::new(from_pairs(&f.state)))?;
        KcbsScenario::new(f.vectors, state)
    }
}

pub fn kcbs_scenario_to_json(s: &KcbsScenario) -> Result<String> {
    to_json(&KcbsScenarioFile::from(s))
}

pub fn kcbs_scenario_from_json(text: &str) -> Result<KcbsScenario> {
    let file: KcbsScenarioFile = parse(text)?;
    KcbsScenario::try_from(file)
}
