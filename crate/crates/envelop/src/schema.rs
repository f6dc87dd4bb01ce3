//! JSON model files.
//!
//! Complex numbers are `[re, im]`; matrices are lists of rows. Alice's
//! command order comes from `alice_commands`, measurer command order from
//! `eve_commands`; states, POVMs and tables are keyed by label.
//!
//! ```json
//! {
//!   "kind": "measurement",
//!   "name": "b92",
//!   "dim": 2,
//!   "alice_commands": ["0", "1"],
//!   "states": { "0": [[1, 0], [0, 0]], "1": [[0.7071, 0], [0.7071, 0]] },
//!   "eve_commands": [{ "label": "default", "outcomes": ["0", "1", "inconclusive"] }],
//!   "povms": { "default": [ [[[…]]], … ] }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use envelop_core::hilbert::{validate_povm, ValidationReport};
use envelop_core::models::{ClassicalCommand, MeasurementCommand, ProbeCommand, ProbeSpec};
use envelop_core::{
    COp, CVec, ClassicalModel, CpcModel, Error, MeasurementModel, Povm, ProbeModel, C64, TOL,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type Complex = [f64; 2];
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandDecl {
    pub label: String,
    pub outcomes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub name: String,
    pub dim: usize,
    pub alice_commands: Vec<String>,
    pub states: BTreeMap<String, Vec<Complex>>,
    pub eve_commands: Vec<CommandDecl>,
    pub povms: BTreeMap<String, Vec<Matrix>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFile {
    pub name: String,
    pub sig_dim: usize,
    pub probe_dim: usize,
    pub leak_dim: usize,
    pub alice_commands: Vec<String>,
    /// Vectors on `leak ⊗ signal`.
    pub states: BTreeMap<String, Vec<Complex>>,
    pub probe_start: Vec<Complex>,
    pub eve_commands: Vec<CommandDecl>,
    /// Interaction on `leak ⊗ probe ⊗ signal`.
    pub unitaries: BTreeMap<String, Matrix>,
    /// Eve's POVMs on `leak ⊗ probe`.
    pub povms: BTreeMap<String, Vec<Matrix>>,
    pub bob_outcomes: Vec<String>,
    pub bob_povm: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalFile {
    pub name: String,
    pub alice_commands: Vec<String>,
    pub eve_commands: Vec<CommandDecl>,
    /// Per command, one outcome distribution per Alice command.
    pub tables: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Measurement(MeasurementFile),
    Probe(ProbeFile),
    Classical(ClassicalFile),
}

/// A loaded model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Measurement(MeasurementModel),
    Probe(ProbeModel),
    Classical(ClassicalModel),
}

impl AnyModel {
    pub fn as_cpc(&self) -> &dyn CpcModel {
        match self {
            AnyModel::Measurement(m) => m,
            AnyModel::Probe(m) => m,
            AnyModel::Classical(m) => m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Measurement(_) => "measurement",
            AnyModel::Probe(_) => "probe",
            AnyModel::Classical(_) => "classical",
        }
    }
}

fn c64(x: &Complex) -> C64 {
    C64::new(x[0], x[1])
}

fn complex(x: &C64) -> Complex {
    [x.re, x.im]
}

fn vector(entries: &[Complex]) -> Result<CVec, Error> {
    CVec::new(entries.iter().map(c64).collect())
}

fn matrix(rows: &Matrix, dim: usize) -> Result<COp, Error> {
    let m = COp::from_rows(
        &rows
            .iter()
            .map(|r| r.iter().map(c64).collect())
            .collect::<Vec<Vec<C64>>>(),
    )?;
    if m.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: m.dim(),
        });
    }
    Ok(m)
}

fn to_matrix(op: &COp) -> Matrix {
    op.rows().map(|r| r.iter().map(complex).collect()).collect()
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, what: &str, label: &str) -> Result<&'a T, Error> {
    map.get(label)
        .ok_or_else(|| Error::Label(format!("{what} for `{label}` missing")))
}

fn check_keys<T>(map: &BTreeMap<String, T>, what: &str, labels: &[String]) -> Result<(), Error> {
    match map.keys().find(|k| !labels.contains(k)) {
        Some(extra) => Err(Error::Label(format!(
            "{what} given for undeclared `{extra}`"
        ))),
        None => Ok(()),
    }
}

fn povm(elements: &[Matrix], dim: usize) -> Result<Povm, Error> {
    Povm::new(
        elements
            .iter()
            .map(|m| matrix(m, dim))
            .collect::<Result<_, _>>()?,
    )
}

fn states(
    alice: &[String],
    map: &BTreeMap<String, Vec<Complex>>,
) -> Result<Vec<(String, CVec)>, Error> {
    check_keys(map, "state", alice)?;
    alice
        .iter()
        .map(|a| Ok((a.clone(), vector(lookup(map, "state", a)?)?)))
        .collect()
}

fn labels(decls: &[CommandDecl]) -> Vec<String> {
    decls.iter().map(|d| d.label.clone()).collect()
}

/// Every POVM in the file with its validation report, in command order.
/// Bob's POVM of a probe file is listed as `bob`.
pub fn povm_reports(file: &ModelFile) -> Result<Vec<(String, ValidationReport)>, Error> {
    let mut out = Vec::new();
    match file {
        ModelFile::Measurement(f) => {
            check_keys(&f.povms, "POVM", &labels(&f.eve_commands))?;
            for c in &f.eve_commands {
                let p = povm(lookup(&f.povms, "POVM", &c.label)?, f.dim)?;
                out.push((c.label.clone(), validate_povm(&p, TOL)));
            }
        }
        ModelFile::Probe(f) => {
            check_keys(&f.povms, "POVM", &labels(&f.eve_commands))?;
            for c in &f.eve_commands {
                let p = povm(
                    lookup(&f.povms, "POVM", &c.label)?,
                    f.leak_dim * f.probe_dim,
                )?;
                out.push((c.label.clone(), validate_povm(&p, TOL)));
            }
            out.push((
                "bob".to_owned(),
                validate_povm(&povm(&f.bob_povm, f.sig_dim)?, TOL),
            ));
        }
        ModelFile::Classical(_) => {}
    }
    Ok(out)
}

impl ModelFile {
    pub fn to_model(&self) -> Result<AnyModel, Error> {
        match self {
            ModelFile::Measurement(f) => {
                check_keys(&f.povms, "POVM", &labels(&f.eve_commands))?;
                let commands = f
                    .eve_commands
                    .iter()
                    .map(|c| {
                        Ok(MeasurementCommand {
                            label: c.label.clone(),
                            povm: povm(lookup(&f.povms, "POVM", &c.label)?, f.dim)?,
                            outcome_labels: c.outcomes.clone(),
                        })
                    })
                    .collect::<Result<_, Error>>()?;
                let states = states(&f.alice_commands, &f.states)?;
                if let Some((_, v)) = states.iter().find(|(_, v)| v.dim() != f.dim) {
                    return Err(Error::Dimension {
                        expected: f.dim,
                        found: v.dim(),
                    });
                }
                Ok(AnyModel::Measurement(MeasurementModel::new(
                    &f.name, states, commands,
                )?))
            }
            ModelFile::Probe(f) => {
                let eve = labels(&f.eve_commands);
                check_keys(&f.povms, "POVM", &eve)?;
                check_keys(&f.unitaries, "unitary", &eve)?;
                let full = f.leak_dim * f.probe_dim * f.sig_dim;
                let eve_commands = f
                    .eve_commands
                    .iter()
                    .map(|c| {
                        Ok(ProbeCommand {
                            label: c.label.clone(),
                            unitary: matrix(lookup(&f.unitaries, "unitary", &c.label)?, full)?,
                            povm: povm(
                                lookup(&f.povms, "POVM", &c.label)?,
                                f.leak_dim * f.probe_dim,
                            )?,
                            outcome_labels: c.outcomes.clone(),
                        })
                    })
                    .collect::<Result<_, Error>>()?;
                Ok(AnyModel::Probe(ProbeModel::new(ProbeSpec {
                    name: f.name.clone(),
                    sig_dim: f.sig_dim,
                    probe_dim: f.probe_dim,
                    leak_dim: f.leak_dim,
                    states: states(&f.alice_commands, &f.states)?,
                    probe_start: vector(&f.probe_start)?,
                    eve_commands,
                    bob_povm: povm(&f.bob_povm, f.sig_dim)?,
                    bob_outcome_labels: f.bob_outcomes.clone(),
                })?))
            }
            ModelFile::Classical(f) => {
                check_keys(&f.tables, "table", &labels(&f.eve_commands))?;
                let commands = f
                    .eve_commands
                    .iter()
                    .map(|c| {
                        Ok(ClassicalCommand {
                            label: c.label.clone(),
                            outcome_labels: c.outcomes.clone(),
                            rows: lookup(&f.tables, "table", &c.label)?.clone(),
                        })
                    })
                    .collect::<Result<_, Error>>()?;
                Ok(AnyModel::Classical(ClassicalModel::new(
                    &f.name,
                    f.alice_commands.clone(),
                    commands,
                )?))
            }
        }
    }

    pub fn from_model(model: &AnyModel) -> Self {
        let states = |alice: &[String], vs: &[CVec]| -> BTreeMap<String, Vec<Complex>> {
            alice
                .iter()
                .zip(vs)
                .map(|(a, v)| (a.clone(), v.entries().iter().map(complex).collect()))
                .collect()
        };
        let povm_rows = |p: &Povm| -> Vec<Matrix> { p.elements().iter().map(to_matrix).collect() };
        match model {
            AnyModel::Measurement(m) => ModelFile::Measurement(MeasurementFile {
                name: m.name().to_owned(),
                dim: m.dim(),
                alice_commands: m.alice_commands().to_vec(),
                states: states(m.alice_commands(), m.states()),
                eve_commands: m
                    .commands()
                    .iter()
                    .map(|c| CommandDecl {
                        label: c.label.clone(),
                        outcomes: c.outcome_labels.clone(),
                    })
                    .collect(),
                povms: m
                    .commands()
                    .iter()
                    .map(|c| (c.label.clone(), povm_rows(&c.povm)))
                    .collect(),
            }),
            AnyModel::Probe(m) => ModelFile::Probe(ProbeFile {
                name: m.name().to_owned(),
                sig_dim: m.sig_dim(),
                probe_dim: m.probe_dim(),
                leak_dim: m.leak_dim(),
                alice_commands: m.alice_commands().to_vec(),
                states: states(m.alice_commands(), m.states()),
                probe_start: m.probe_start().entries().iter().map(complex).collect(),
                eve_commands: m
                    .commands()
                    .iter()
                    .map(|c| CommandDecl {
                        label: c.label.clone(),
                        outcomes: c.outcome_labels.clone(),
                    })
                    .collect(),
                unitaries: m
                    .commands()
                    .iter()
                    .map(|c| (c.label.clone(), to_matrix(&c.unitary)))
                    .collect(),
                povms: m
                    .commands()
                    .iter()
                    .map(|c| (c.label.clone(), povm_rows(&c.povm)))
                    .collect(),
                bob_outcomes: m.bob_outcome_labels().to_vec(),
                bob_povm: povm_rows(m.bob_povm()),
            }),
            AnyModel::Classical(m) => ModelFile::Classical(ClassicalFile {
                name: m.name().to_owned(),
                alice_commands: m.alice_commands().to_vec(),
                eve_commands: m
                    .commands()
                    .iter()
                    .map(|c| CommandDecl {
                        label: c.label.clone(),
                        outcomes: c.outcome_labels.clone(),
                    })
                    .collect(),
                tables: m
                    .commands()
                    .iter()
                    .map(|c| (c.label.clone(), c.rows.clone()))
                    .collect(),
            }),
        }
    }
}

pub fn read_model_file(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

pub fn load_model(path: &Path) -> Result<AnyModel, CliError> {
    Ok(read_model_file(path)?.to_model()?)
}

/// Pretty JSON with a trailing newline.
pub fn model_json(model: &AnyModel) -> String {
    let mut s = serde_json::to_string_pretty(&ModelFile::from_model(model))
        .expect("model files always serialize");
    s.push('\n');
    s
}
