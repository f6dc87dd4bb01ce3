//! Command-conditioned models: each states `Pr(j | b_A, b_E)` for Alice's
//! preparation command `b_A`, the measurer's command `b_E` and outcome `j`.
//!
//! Three representations share the [`CpcModel`] surface:
//! [`MeasurementModel`] (Alice prepares, one party measures), [`ProbeModel`]
//! (Eve entangles a probe and reads it while Bob reads the signal) and
//! [`ClassicalModel`] (a bare probability table).

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::discrimination::{usd_povm, UsdSpec};
use crate::error::{label_err, Error, Result};
use crate::hilbert::{check_dim, clamp_probability, COp, CVec, Povm, TOL};

/// Measurer command used when the receiver takes no commands.
pub const DEFAULT_COMMAND: &str = "default";
/// Outcome label for a measurement that declines to decide.
pub const INCONCLUSIVE: &str = "inconclusive";

/// One cell of a conditional distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    /// Bob's outcome for joint (probe) models.
    pub bob: Option<String>,
    pub outcome: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub alice: String,
    pub eve: String,
    pub cells: Vec<TableCell>,
}

impl TableRow {
    pub fn total(&self) -> f64 {
        self.cells.iter().map(|c| c.probability).sum()
    }
}

/// Dense listing of every conditional probability of a model, ordered by
/// Alice command, then measurer command, then outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub rows: Vec<TableRow>,
}

impl ProbabilityTable {
    pub fn row(&self, alice: &str, eve: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.alice == alice && r.eve == eve)
    }

    /// Rows whose measurer command is in `eve_commands`.
    pub fn restricted_to(&self, eve_commands: &[String]) -> ProbabilityTable {
        ProbabilityTable {
            rows: self
                .rows
                .iter()
                .filter(|r| eve_commands.contains(&r.eve))
                .cloned()
                .collect(),
        }
    }
}

/// Common surface of every model kind.
pub trait CpcModel {
    fn name(&self) -> &str;
    fn alice_commands(&self) -> &[String];
    fn eve_commands(&self) -> &[String];
    /// Distribution of outcomes given command indices.
    fn conditional_row(&self, alice: usize, eve: usize) -> Result<Vec<TableCell>>;
    /// Alice's prepared vector, when the model has one.
    fn signal_state(&self, _alice: usize) -> Option<&CVec> {
        None
    }

    fn alice_index(&self, label: &str) -> Result<usize> {
        position(self.alice_commands(), label)
    }

    fn eve_index(&self, label: &str) -> Result<usize> {
        position(self.eve_commands(), label)
    }

    fn probability_table(&self) -> ProbabilityTable {
        let mut rows = Vec::new();
        for (a, alice) in self.alice_commands().iter().enumerate() {
            for (e, eve) in self.eve_commands().iter().enumerate() {
                let cells = self
                    .conditional_row(a, e)
                    .expect("indices in range of a validated model");
                rows.push(TableRow {
                    alice: alice.clone(),
                    eve: eve.clone(),
                    cells,
                });
            }
        }
        ProbabilityTable { rows }
    }
}

/// A measurement command: a POVM plus the label of each of its outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCommand {
    pub label: String,
    pub povm: Povm,
    pub outcome_labels: Vec<String>,
}

impl MeasurementCommand {
    pub fn new(label: &str, povm: Povm, outcome_labels: &[&str]) -> Self {
        Self {
            label: label.to_owned(),
            povm,
            outcome_labels: outcome_labels.iter().map(|s| (*s).to_owned()).collect(),
        }
    }

    pub fn outcome_index(&self, label: &str) -> Result<usize> {
        position(&self.outcome_labels, label)
    }
}

/// Alice prepares `|v(b_A)⟩`; the measurer applies the POVM selected by `b_E`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    name: String,
    dim: usize,
    alice_commands: Vec<String>,
    states: Vec<CVec>,
    measurer_commands: Vec<String>,
    commands: Vec<MeasurementCommand>,
}

impl MeasurementModel {
    pub fn new(
        name: &str,
        states: Vec<(String, CVec)>,
        commands: Vec<MeasurementCommand>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Domain(
                "model needs at least one Alice command".into(),
            ));
        }
        if commands.is_empty() {
            return Err(Error::Domain(
                "model needs at least one measurer command".into(),
            ));
        }
        let dim = states[0].1.dim();
        let (alice_commands, states): (Vec<String>, Vec<CVec>) = states.into_iter().unzip();
        ensure_unique(&alice_commands)?;
        for (label, v) in alice_commands.iter().zip(&states) {
            check_dim(dim, v.dim())?;
            if !v.is_unit() {
                return Err(Error::Invariant(format!(
                    "state for `{label}` has norm {}",
                    v.norm()
                )));
            }
        }
        let measurer_commands: Vec<String> = commands.iter().map(|c| c.label.clone()).collect();
        ensure_unique(&measurer_commands)?;
        for c in &commands {
            check_command(c, dim)?;
        }
        Ok(Self {
            name: name.to_owned(),
            dim,
            alice_commands,
            states,
            measurer_commands,
            commands,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[CVec] {
        &self.states
    }

    pub fn state(&self, alice: &str) -> Result<&CVec> {
        Ok(&self.states[self.alice_index(alice)?])
    }

    pub fn commands(&self) -> &[MeasurementCommand] {
        &self.commands
    }

    pub fn command(&self, label: &str) -> Result<&MeasurementCommand> {
        Ok(&self.commands[self.eve_index(label)?])
    }

    /// `⟨v(b_A)|M(b_E; j)|v(b_A)⟩`.
    pub fn probability(&self, alice: &str, eve: &str, outcome: &str) -> Result<f64> {
        let a = self.alice_index(alice)?;
        let cmd = self.command(eve)?;
        let j = cmd.outcome_index(outcome)?;
        crate::hilbert::born_probability(&self.states[a], &cmd.povm, j)
    }

    /// All outcome probabilities for command indices.
    pub fn distribution(&self, alice: usize, eve: usize) -> Result<Vec<f64>> {
        let state = self.states.get(alice).ok_or(Error::Index {
            index: alice,
            len: self.states.len(),
        })?;
        let cmd = self.commands.get(eve).ok_or(Error::Index {
            index: eve,
            len: self.commands.len(),
        })?;
        cmd.povm.probabilities(state)
    }

    /// `|⟨v(a)|v(b)⟩|`.
    pub fn overlap(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.state(a)?.inner(self.state(b)?)?.norm())
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_owned();
        self
    }
}

impl CpcModel for MeasurementModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn alice_commands(&self) -> &[String] {
        &self.alice_commands
    }

    fn eve_commands(&self) -> &[String] {
        &self.measurer_commands
    }

    fn conditional_row(&self, alice: usize, eve: usize) -> Result<Vec<TableCell>> {
        let probs = self.distribution(alice, eve)?;
        Ok(self.commands[eve]
            .outcome_labels
            .iter()
            .zip(probs)
            .map(|(label, p)| TableCell {
                bob: None,
                outcome: label.clone(),
                probability: p,
            })
            .collect())
    }

    fn signal_state(&self, alice: usize) -> Option<&CVec> {
        self.states.get(alice)
    }
}

/// The B92 two-state model: `v(0) = (1, 0)`, `v(1) = (cos θ, sin θ)`, read by
/// the unambiguous-discrimination receiver with outcomes `0`, `1`,
/// `inconclusive`.
pub fn b92_model(theta: f64) -> Result<MeasurementModel> {
    if !(theta > 0.0 && theta < core::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "B92 angle {theta} must lie strictly between 0 and π/2"
        )));
    }
    let v0 = CVec::from_real(&[1.0, 0.0])?;
    let v1 = CVec::from_real(&[theta.cos(), theta.sin()])?;
    let povm = usd_povm(&UsdSpec::new(v0.clone(), v1.clone())?)?;
    MeasurementModel::new(
        "b92",
        alloc::vec![("0".into(), v0), ("1".into(), v1)],
        alloc::vec![MeasurementCommand::new(
            DEFAULT_COMMAND,
            povm,
            &["0", "1", INCONCLUSIVE]
        )],
    )
}

/// One of Eve's probe commands: the interaction unitary on
/// `leak ⊗ probe ⊗ signal` and her POVM on `leak ⊗ probe`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCommand {
    pub label: String,
    pub unitary: COp,
    pub povm: Povm,
    pub outcome_labels: Vec<String>,
}

/// Fields of a [`ProbeModel`] prior to validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub name: String,
    pub sig_dim: usize,
    pub probe_dim: usize,
    pub leak_dim: usize,
    /// Alice's command and her vector on `leak ⊗ signal`.
    pub states: Vec<(String, CVec)>,
    pub probe_start: CVec,
    pub eve_commands: Vec<ProbeCommand>,
    pub bob_povm: Povm,
    pub bob_outcome_labels: Vec<String>,
}

/// Eve's probe interacts with Alice's signal through `U(b_E)`; Eve then
/// measures `leak ⊗ probe` and Bob measures the signal.
///
/// Operator layout is `leak ⊗ probe ⊗ signal`. A model with `leak_dim = 1`
/// has no leak sector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    name: String,
    sig_dim: usize,
    probe_dim: usize,
    leak_dim: usize,
    alice_commands: Vec<String>,
    states: Vec<CVec>,
    probe_start: CVec,
    eve_labels: Vec<String>,
    eve_commands: Vec<ProbeCommand>,
    bob_povm: Povm,
    bob_outcome_labels: Vec<String>,
}

impl ProbeModel {
    pub fn new(spec: ProbeSpec) -> Result<Self> {
        let ProbeSpec {
            name,
            sig_dim,
            probe_dim,
            leak_dim,
            states,
            probe_start,
            eve_commands,
            bob_povm,
            bob_outcome_labels,
        } = spec;
        if sig_dim == 0 || probe_dim == 0 || leak_dim == 0 {
            return Err(Error::Domain("sector dimensions must be positive".into()));
        }
        if states.is_empty() || eve_commands.is_empty() {
            return Err(Error::Domain(
                "probe model needs Alice and Eve commands".into(),
            ));
        }
        let (alice_commands, states): (Vec<String>, Vec<CVec>) = states.into_iter().unzip();
        ensure_unique(&alice_commands)?;
        for (label, v) in alice_commands.iter().zip(&states) {
            check_dim(leak_dim * sig_dim, v.dim())?;
            if !v.is_unit() {
                return Err(Error::Invariant(format!("state for `{label}` is not unit")));
            }
        }
        check_dim(probe_dim, probe_start.dim())?;
        if !probe_start.is_unit() {
            return Err(Error::Invariant("probe start state is not unit".into()));
        }
        let full = leak_dim * probe_dim * sig_dim;
        for c in &eve_commands {
            check_dim(full, c.unitary.dim())?;
            if !c.unitary.is_unitary(TOL) {
                return Err(Error::Invariant(format!(
                    "interaction for `{}` is not unitary (residual {:e})",
                    c.label,
                    c.unitary.unitarity_residual()
                )));
            }
            check_dim(leak_dim * probe_dim, c.povm.dim())?;
            check_povm(&c.label, &c.povm, c.outcome_labels.len())?;
            ensure_unique(&c.outcome_labels)?;
        }
        check_dim(sig_dim, bob_povm.dim())?;
        check_povm("bob", &bob_povm, bob_outcome_labels.len())?;
        ensure_unique(&bob_outcome_labels)?;
        let eve_labels: Vec<String> = eve_commands.iter().map(|c| c.label.clone()).collect();
        ensure_unique(&eve_labels)?;
        Ok(Self {
            name,
            sig_dim,
            probe_dim,
            leak_dim,
            alice_commands,
            states,
            probe_start,
            eve_labels,
            eve_commands,
            bob_povm,
            bob_outcome_labels,
        })
    }

    pub fn sig_dim(&self) -> usize {
        self.sig_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn leak_dim(&self) -> usize {
        self.leak_dim
    }

    pub fn states(&self) -> &[CVec] {
        &self.states
    }

    pub fn probe_start(&self) -> &CVec {
        &self.probe_start
    }

    pub fn commands(&self) -> &[ProbeCommand] {
        &self.eve_commands
    }

    pub fn command(&self, label: &str) -> Result<&ProbeCommand> {
        Ok(&self.eve_commands[self.eve_index(label)?])
    }

    pub fn bob_povm(&self) -> &Povm {
        &self.bob_povm
    }

    pub fn bob_outcome_labels(&self) -> &[String] {
        &self.bob_outcome_labels
    }

    pub fn to_spec(&self) -> ProbeSpec {
        ProbeSpec {
            name: self.name.clone(),
            sig_dim: self.sig_dim,
            probe_dim: self.probe_dim,
            leak_dim: self.leak_dim,
            states: self
                .alice_commands
                .iter()
                .cloned()
                .zip(self.states.iter().cloned())
                .collect(),
            probe_start: self.probe_start.clone(),
            eve_commands: self.eve_commands.clone(),
            bob_povm: self.bob_povm.clone(),
            bob_outcome_labels: self.bob_outcome_labels.clone(),
        }
    }

    /// `|w, v⟩` with the probe start inserted between leak and signal.
    pub fn initial_state(&self, alice: usize) -> Result<CVec> {
        let v = self.states.get(alice).ok_or(Error::Index {
            index: alice,
            len: self.states.len(),
        })?;
        let (p, s) = (self.probe_dim, self.sig_dim);
        let mut out = Vec::with_capacity(self.leak_dim * p * s);
        for l in 0..self.leak_dim {
            for e in self.probe_start.entries() {
                for k in 0..s {
                    out.push(v.entries()[l * s + k] * e);
                }
            }
        }
        CVec::new(out)
    }

    /// Joint distribution `Pr(j_B, j_E | b_A, b_E)` indexed `[j_B][j_E]`.
    pub fn joint_distribution(&self, alice: usize, eve: usize) -> Result<Vec<Vec<f64>>> {
        let cmd = self.eve_commands.get(eve).ok_or(Error::Index {
            index: eve,
            len: self.eve_commands.len(),
        })?;
        let evolved = cmd.unitary.apply(&self.initial_state(alice)?)?;
        let mut table = Vec::with_capacity(self.bob_povm.len());
        for mb in self.bob_povm.elements() {
            let mut row = Vec::with_capacity(cmd.povm.len());
            for me in cmd.povm.elements() {
                let op = me.tensor(mb);
                row.push(clamp_probability(op.expectation(&evolved)?.re)?);
            }
            table.push(row);
        }
        Ok(table)
    }

    /// `Pr(j_B, j_E | b_A, b_E)` by label.
    pub fn probe_joint_probability(
        &self,
        alice: &str,
        eve: &str,
        bob_outcome: &str,
        eve_outcome: &str,
    ) -> Result<f64> {
        let a = self.alice_index(alice)?;
        let e = self.eve_index(eve)?;
        let jb = position(&self.bob_outcome_labels, bob_outcome)?;
        let je = position(&self.eve_commands[e].outcome_labels, eve_outcome)?;
        Ok(self.joint_distribution(a, e)?[jb][je])
    }

    pub fn overlap(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = (self.alice_index(a)?, self.alice_index(b)?);
        Ok(self.states[a].inner(&self.states[b])?.norm())
    }
}

impl CpcModel for ProbeModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn alice_commands(&self) -> &[String] {
        &self.alice_commands
    }

    fn eve_commands(&self) -> &[String] {
        &self.eve_labels
    }

    fn conditional_row(&self, alice: usize, eve: usize) -> Result<Vec<TableCell>> {
        let joint = self.joint_distribution(alice, eve)?;
        let eve_labels = &self.eve_commands[eve].outcome_labels;
        let mut cells = Vec::new();
        for (jb, row) in joint.into_iter().enumerate() {
            for (je, p) in row.into_iter().enumerate() {
                cells.push(TableCell {
                    bob: Some(self.bob_outcome_labels[jb].clone()),
                    outcome: eve_labels[je].clone(),
                    probability: p,
                });
            }
        }
        Ok(cells)
    }

    fn signal_state(&self, alice: usize) -> Option<&CVec> {
        self.states.get(alice)
    }
}

/// A non-quantum measurement command: one outcome distribution per Alice
/// command.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalCommand {
    pub label: String,
    pub outcome_labels: Vec<String>,
    /// `rows[a][j] = Pr(j | b_A = a, this command)`.
    pub rows: Vec<Vec<f64>>,
}

/// A model given directly as conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    name: String,
    alice_commands: Vec<String>,
    eve_labels: Vec<String>,
    commands: Vec<ClassicalCommand>,
}

impl ClassicalModel {
    pub fn new(
        name: &str,
        alice_commands: Vec<String>,
        commands: Vec<ClassicalCommand>,
    ) -> Result<Self> {
        if alice_commands.is_empty() || commands.is_empty() {
            return Err(Error::Domain(
                "classical model needs Alice and Eve commands".into(),
            ));
        }
        ensure_unique(&alice_commands)?;
        for c in &commands {
            check_classical_command(c, alice_commands.len())?;
        }
        let eve_labels: Vec<String> = commands.iter().map(|c| c.label.clone()).collect();
        ensure_unique(&eve_labels)?;
        Ok(Self {
            name: name.to_owned(),
            alice_commands,
            eve_labels,
            commands,
        })
    }

    pub fn commands(&self) -> &[ClassicalCommand] {
        &self.commands
    }

    pub fn classical_probability(&self, alice: &str, eve: &str, outcome: &str) -> Result<f64> {
        let a = self.alice_index(alice)?;
        let c = &self.commands[self.eve_index(eve)?];
        let j = position(&c.outcome_labels, outcome)?;
        Ok(c.rows[a][j])
    }
}

impl CpcModel for ClassicalModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn alice_commands(&self) -> &[String] {
        &self.alice_commands
    }

    fn eve_commands(&self) -> &[String] {
        &self.eve_labels
    }

    fn conditional_row(&self, alice: usize, eve: usize) -> Result<Vec<TableCell>> {
        let c = self.commands.get(eve).ok_or(Error::Index {
            index: eve,
            len: self.commands.len(),
        })?;
        let row = c.rows.get(alice).ok_or(Error::Index {
            index: alice,
            len: c.rows.len(),
        })?;
        Ok(c.outcome_labels
            .iter()
            .zip(row)
            .map(|(label, &p)| TableCell {
                bob: None,
                outcome: label.clone(),
                probability: p,
            })
            .collect())
    }
}

pub(crate) fn check_classical_command(c: &ClassicalCommand, alice_count: usize) -> Result<()> {
    if c.rows.len() != alice_count {
        return Err(Error::Domain(format!(
            "command `{}` has {} rows for {} Alice commands",
            c.label,
            c.rows.len(),
            alice_count
        )));
    }
    ensure_unique(&c.outcome_labels)?;
    for row in &c.rows {
        if row.len() != c.outcome_labels.len() {
            return Err(Error::Domain(format!(
                "command `{}` row has {} entries for {} outcomes",
                c.label,
                row.len(),
                c.outcome_labels.len()
            )));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain(format!(
                "command `{}` has a negative or non-finite probability",
                c.label
            )));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::Domain(format!(
                "command `{}` row sums to {total}",
                c.label
            )));
        }
    }
    Ok(())
}

fn check_command(c: &MeasurementCommand, dim: usize) -> Result<()> {
    check_dim(dim, c.povm.dim())?;
    check_povm(&c.label, &c.povm, c.outcome_labels.len())?;
    ensure_unique(&c.outcome_labels)
}

fn check_povm(label: &str, povm: &Povm, labels: usize) -> Result<()> {
    if povm.len() != labels {
        return Err(Error::Invariant(format!(
            "command `{label}` has {} POVM elements but {labels} outcome labels",
            povm.len()
        )));
    }
    if !povm.validate(TOL).ok {
        return Err(Error::Invariant(format!(
            "command `{label}` does not carry a valid POVM"
        )));
    }
    Ok(())
}

pub(crate) fn position(labels: &[String], label: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| label_err(label))
}

pub(crate) fn ensure_unique(labels: &[String]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::Config(format!("duplicate label `{l}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{validate_povm, C64};
    use alloc::vec;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn b92_overlap_and_usd_probabilities() {
        let m = b92_model(deg(45.0)).unwrap();
        assert!((m.overlap("0", "1").unwrap() - 0.7071068).abs() < 1e-7);
        let inc = m.probability("0", DEFAULT_COMMAND, INCONCLUSIVE).unwrap();
        assert!((inc - 0.7071068).abs() < 1e-7);
        assert!(m.probability("0", DEFAULT_COMMAND, "1").unwrap() <= TOL);
        assert!(m.probability("1", DEFAULT_COMMAND, "0").unwrap() <= TOL);
        for a in ["0", "1"] {
            let total: f64 = ["0", "1", INCONCLUSIVE]
                .iter()
                .map(|j| m.probability(a, DEFAULT_COMMAND, j).unwrap())
                .sum();
            assert!((total - 1.0).abs() <= 3.0 * TOL);
        }
    }

    #[test]
    fn b92_orthogonal_limit() {
        let m = b92_model(core::f64::consts::FRAC_PI_2 - 1e-9).unwrap();
        assert!(m.overlap("0", "1").unwrap() < 1e-8);
        assert!(m.probability("1", DEFAULT_COMMAND, INCONCLUSIVE).unwrap() < 1e-8);
    }

    #[test]
    fn b92_angle_domain() {
        assert!(matches!(b92_model(0.0), Err(Error::Domain(_))));
        assert!(matches!(
            b92_model(core::f64::consts::FRAC_PI_2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(b92_model(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn unknown_labels_rejected() {
        let m = b92_model(deg(30.0)).unwrap();
        assert_eq!(
            m.probability("2", DEFAULT_COMMAND, "0"),
            Err(Error::Label("unknown label `2`".into()))
        );
        assert_eq!(
            m.probability("0", "tap", "0"),
            Err(Error::Label("unknown label `tap`".into()))
        );
        assert_eq!(
            m.probability("0", DEFAULT_COMMAND, "maybe"),
            Err(Error::Label("unknown label `maybe`".into()))
        );
    }

    #[test]
    fn b92_table_shape() {
        let t = b92_model(deg(45.0)).unwrap().probability_table();
        assert_eq!(t.rows.len(), 2);
        for row in &t.rows {
            assert_eq!(row.cells.len(), 3);
            assert!((row.total() - 1.0).abs() <= 3.0 * TOL);
        }
    }

    #[test]
    fn constructor_rejects_invalid_povm() {
        let half = COp::identity(2).scale(C64::new(0.6, 0.0));
        let povm = Povm::new(vec![half.clone(), half]).unwrap();
        let err = MeasurementModel::new(
            "bad",
            vec![("0".into(), CVec::basis(2, 0))],
            vec![MeasurementCommand::new("m", povm, &["a", "b"])],
        );
        assert!(matches!(err, Err(Error::Invariant(_))));
    }

    fn identity_probe_model() -> ProbeModel {
        let bob = Povm::projective(&[CVec::basis(2, 0), CVec::basis(2, 1)]).unwrap();
        ProbeModel::new(ProbeSpec {
            name: "idle".into(),
            sig_dim: 2,
            probe_dim: 2,
            leak_dim: 1,
            states: vec![
                ("0".into(), CVec::basis(2, 0)),
                ("1".into(), CVec::basis(2, 1)),
            ],
            probe_start: CVec::basis(2, 0),
            eve_commands: vec![ProbeCommand {
                label: "idle".into(),
                unitary: COp::identity(4),
                povm: Povm::new(vec![COp::identity(2)]).unwrap(),
                outcome_labels: vec!["none".into()],
            }],
            bob_povm: bob,
            bob_outcome_labels: vec!["0".into(), "1".into()],
        })
        .unwrap()
    }

    #[test]
    fn probe_identity_interaction_leaves_bob_exact() {
        let m = identity_probe_model();
        assert_eq!(
            m.probe_joint_probability("0", "idle", "0", "none").unwrap(),
            1.0
        );
        assert_eq!(
            m.probe_joint_probability("1", "idle", "1", "none").unwrap(),
            1.0
        );
        assert_eq!(
            m.probe_joint_probability("1", "idle", "0", "none").unwrap(),
            0.0
        );
    }

    #[test]
    fn probe_cnot_copies_bit_into_probe() {
        // CNOT with the signal as control and the probe as target, on probe ⊗ signal.
        let mut u = COp::zeros(4);
        for (probe, sig) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let target = probe ^ sig;
            u.set(target * 2 + sig, probe * 2 + sig, C64::new(1.0, 0.0));
        }
        let mut spec = identity_probe_model().to_spec();
        spec.eve_commands = vec![ProbeCommand {
            label: "copy".into(),
            unitary: u,
            povm: Povm::projective(&[CVec::basis(2, 0), CVec::basis(2, 1)]).unwrap(),
            outcome_labels: vec!["0".into(), "1".into()],
        }];
        let m = ProbeModel::new(spec).unwrap();
        for a in ["0", "1"] {
            let eve_correct: f64 = ["0", "1"]
                .iter()
                .map(|jb| m.probe_joint_probability(a, "copy", jb, a).unwrap())
                .sum();
            assert_eq!(eve_correct, 1.0);
        }
    }

    #[test]
    fn probe_rejects_non_unitary() {
        let mut spec = identity_probe_model().to_spec();
        spec.eve_commands[0].unitary = COp::identity(4).scale(C64::new(2.0, 0.0));
        assert!(matches!(ProbeModel::new(spec), Err(Error::Invariant(_))));
        let mut spec = identity_probe_model().to_spec();
        spec.eve_commands[0].unitary = COp::identity(8);
        assert!(matches!(
            ProbeModel::new(spec),
            Err(Error::Dimension { .. })
        ));
    }

    fn coin() -> ClassicalModel {
        ClassicalModel::new(
            "coin",
            vec!["0".into(), "1".into()],
            vec![
                ClassicalCommand {
                    label: "flip".into(),
                    outcome_labels: vec!["h".into(), "t".into()],
                    rows: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                },
                ClassicalCommand {
                    label: "peek".into(),
                    outcome_labels: vec!["h".into(), "t".into()],
                    rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn classical_lookup() {
        let c = coin();
        assert_eq!(c.classical_probability("0", "peek", "h").unwrap(), 1.0);
        assert_eq!(c.classical_probability("1", "flip", "h").unwrap(), 0.5);
        assert_eq!(
            c.classical_probability("0", "stare", "h"),
            Err(Error::Label("unknown label `stare`".into()))
        );
        let t = c.probability_table();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.iter().all(|r| r.total() == 1.0));
        assert_eq!(t.row("1", "peek").unwrap().cells[1].probability, 1.0);
    }

    #[test]
    fn classical_rejects_bad_rows() {
        let bad = ClassicalModel::new(
            "bad",
            vec!["0".into()],
            vec![ClassicalCommand {
                label: "x".into(),
                outcome_labels: vec!["a".into(), "b".into()],
                rows: vec![vec![0.7, 0.7]],
            }],
        );
        assert!(matches!(bad, Err(Error::Domain(_))));
    }

    #[test]
    fn every_b92_povm_validates() {
        for k in 1..18 {
            let m = b92_model(deg(5.0 * k as f64)).unwrap();
            assert!(validate_povm(&m.commands()[0].povm, TOL).ok);
        }
    }
}
