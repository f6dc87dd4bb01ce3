//! Enveloping models.
//!
//! An envelope `β` of a model `α` reproduces every conditional probability
//! `α` states for its own measurement commands, while tensoring a leak
//! factor `|w(b_A)⟩` onto Alice's vectors. Inner products between Alice's
//! vectors are thereby multiplied by `|⟨w(b)|w(b')⟩| = r`, and `β` may offer
//! the measurer extra commands that `α` never mentions.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::discrimination::{usd_povm, UsdSpec};
use crate::error::{Error, Result};
use crate::hilbert::{check_dim, COp, CVec, Povm, C64, TOL};
use crate::models::{
    check_classical_command, ensure_unique, ClassicalCommand, ClassicalModel, CpcModel,
    MeasurementCommand, MeasurementModel, ProbeCommand, ProbeModel, INCONCLUSIVE,
};

/// Label of the stock extra command that runs USD on the enveloped states.
pub const STOCK_USD_COMMAND: &str = "usd";
/// Label of the stock extra command that reads the leak sector projectively.
pub const STOCK_LEAK_READOUT: &str = "leak-readout";
/// Label of the stock classical command that reveals Alice's choice.
pub const STOCK_REVEAL: &str = "reveal";

/// How leak vectors are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakLayout {
    /// `K` commands in dimension `K + 1`:
    /// `|w(b)⟩ = √(1−r)|u(b)⟩ + √r|u_0⟩` over an orthonormal basis.
    General,
    /// Two commands in dimension 2: `(1, 0)` and `(r, √(1−r²))`.
    Economy,
}

/// Unit leak vectors with pairwise overlap exactly `r` (general layout).
pub fn make_leak_vectors(count: usize, r: f64) -> Result<Vec<CVec>> {
    check_ratio(r)?;
    if count == 0 {
        return Err(Error::Domain("need at least one command".into()));
    }
    let dim = count + 1;
    let own = (1.0 - r).sqrt();
    let shared = r.sqrt();
    Ok((0..count)
        .map(|b| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[b] = C64::new(own, 0.0);
            v[count] = C64::new(shared, 0.0);
            CVec::new(v).expect("finite and non-empty")
        })
        .collect())
}

/// Two unit vectors in dimension 2 with overlap `r`.
pub fn economy_leak_pair(r: f64) -> Result<Vec<CVec>> {
    check_ratio(r)?;
    Ok(vec![
        CVec::from_real(&[1.0, 0.0])?,
        CVec::from_real(&[r, (1.0 - r * r).sqrt()])?,
    ])
}

fn check_ratio(r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "overlap ratio {r} must lie in [0, 1)"
        )));
    }
    Ok(())
}

/// An extra measurement command offered by the enveloping model.
///
/// For segmented envelopes `povm` acts on `leak ⊗ signal` and `unitary` must
/// be `None`. For probe envelopes `povm` acts on `leak ⊗ probe` and `unitary`
/// on `leak ⊗ probe ⊗ signal` (identity when `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraCommand {
    pub label: String,
    pub outcome_labels: Vec<String>,
    pub povm: Povm,
    pub unitary: Option<COp>,
}

/// Leak vectors (one per Alice command, in the model's command order), the
/// overlap ratio they realize and any extra commands.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    r: f64,
    leak_vectors: Vec<CVec>,
    extra: Vec<ExtraCommand>,
}

impl EnvelopeParams {
    /// Checks that the vectors are unit, share a dimension and overlap
    /// pairwise by `r` in magnitude.
    pub fn new(r: f64, leak_vectors: Vec<CVec>) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!(
                "overlap ratio {r} must lie in [0, 1]"
            )));
        }
        let Some(first) = leak_vectors.first() else {
            return Err(Error::Domain("need at least one leak vector".into()));
        };
        let dim = first.dim();
        for (i, w) in leak_vectors.iter().enumerate() {
            check_dim(dim, w.dim())?;
            if !w.is_unit() {
                return Err(Error::Invariant(format!("leak vector {i} is not unit")));
            }
            for w2 in &leak_vectors[..i] {
                let overlap = w2.inner(w)?.norm();
                if (overlap - r).abs() > TOL {
                    return Err(Error::Invariant(format!(
                        "leak overlap {overlap} differs from r = {r}"
                    )));
                }
            }
        }
        Ok(Self {
            r,
            leak_vectors,
            extra: Vec::new(),
        })
    }

    /// General layout: dimension `count + 1`.
    pub fn uniform(count: usize, r: f64) -> Result<Self> {
        Self::with_layout(count, r, LeakLayout::General)
    }

    pub fn with_layout(count: usize, r: f64, layout: LeakLayout) -> Result<Self> {
        let vectors = match layout {
            LeakLayout::General => make_leak_vectors(count, r)?,
            LeakLayout::Economy => {
                if count != 2 {
                    return Err(Error::Config(
                        "the economy layout needs exactly two commands".into(),
                    ));
                }
                economy_leak_pair(r)?
            }
        };
        Self::new(r, vectors)
    }

    /// The `r = 1` envelope: one shared one-dimensional leak vector.
    pub fn identity(count: usize) -> Self {
        Self::new(1.0, vec![CVec::basis(1, 0); count.max(1)]).expect("trivially valid")
    }

    pub fn with_extra(mut self, extra: ExtraCommand) -> Self {
        self.extra.push(extra);
        self
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn leak_dim(&self) -> usize {
        self.leak_vectors[0].dim()
    }

    pub fn leak_vectors(&self) -> &[CVec] {
        &self.leak_vectors
    }

    pub fn extra(&self) -> &[ExtraCommand] {
        &self.extra
    }
}

fn check_count(params: &EnvelopeParams, commands: usize) -> Result<()> {
    if params.leak_vectors.len() != commands {
        return Err(Error::Config(format!(
            "{} leak vectors for {commands} Alice commands",
            params.leak_vectors.len()
        )));
    }
    Ok(())
}

fn check_new_label(existing: &[String], label: &str) -> Result<()> {
    if existing.iter().any(|l| l == label) {
        return Err(Error::Config(format!(
            "extra command `{label}` collides with an existing command"
        )));
    }
    Ok(())
}

/// Segmented envelope: `|v_β(b)⟩ = |w(b)⟩ ⊗ |v_α(b)⟩`, old commands become
/// `1_leak ⊗ M_α(b_E; j)`, extra commands are appended as given.
pub fn envelope_segmented(
    alpha: &MeasurementModel,
    params: &EnvelopeParams,
) -> Result<MeasurementModel> {
    check_count(params, alpha.alice_commands().len())?;
    let leak_dim = params.leak_dim();
    let states = alpha
        .alice_commands()
        .iter()
        .zip(alpha.states())
        .zip(&params.leak_vectors)
        .map(|((label, v), w)| (label.clone(), w.tensor(v)))
        .collect();
    let mut commands: Vec<MeasurementCommand> = alpha
        .commands()
        .iter()
        .map(|c| MeasurementCommand {
            label: c.label.clone(),
            povm: c.povm.lift_left(leak_dim),
            outcome_labels: c.outcome_labels.clone(),
        })
        .collect();
    for extra in &params.extra {
        if extra.unitary.is_some() {
            return Err(Error::Config(format!(
                "segmented extra command `{}` cannot carry an interaction",
                extra.label
            )));
        }
        check_dim(leak_dim * alpha.dim(), extra.povm.dim())?;
        check_new_label(alpha.eve_commands(), &extra.label)?;
        commands.push(MeasurementCommand {
            label: extra.label.clone(),
            povm: extra.povm.clone(),
            outcome_labels: extra.outcome_labels.clone(),
        });
    }
    MeasurementModel::new(&format!("{}+envelope", alpha.name()), states, commands)
}

/// USD on the two enveloped vectors `w(b) ⊗ v_α(b)`; outcomes are Alice's two
/// command labels followed by `inconclusive`.
pub fn stock_usd_command(
    alpha: &MeasurementModel,
    params: &EnvelopeParams,
) -> Result<ExtraCommand> {
    let labels = alpha.alice_commands();
    if labels.len() != 2 {
        return Err(Error::Config(
            "USD extra command needs exactly two Alice commands".into(),
        ));
    }
    check_count(params, 2)?;
    let v: Vec<CVec> = params
        .leak_vectors
        .iter()
        .zip(alpha.states())
        .map(|(w, v)| w.tensor(v))
        .collect();
    let povm = usd_povm(&UsdSpec::new(v[0].clone(), v[1].clone())?)?;
    Ok(ExtraCommand {
        label: STOCK_USD_COMMAND.to_owned(),
        outcome_labels: vec![
            labels[0].clone(),
            labels[1].clone(),
            INCONCLUSIVE.to_owned(),
        ],
        povm,
        unitary: None,
    })
}

/// Two-command segmented envelope at ratio `r` carrying the stock USD
/// command. `r = 1` gives the identity envelope; other values use the
/// general leak layout.
pub fn envelope_segmented_usd(alpha: &MeasurementModel, r: f64) -> Result<MeasurementModel> {
    let params = if r == 1.0 {
        EnvelopeParams::identity(alpha.alice_commands().len())
    } else {
        EnvelopeParams::uniform(alpha.alice_commands().len(), r)?
    };
    let usd = stock_usd_command(alpha, &params)?;
    envelope_segmented(alpha, &params.with_extra(usd))
}

/// Probe envelope: leak factor prepended to Alice's vectors,
/// `U_β = 1_leak ⊗ U_α`, `M_β = 1_leak ⊗ M_α` on Eve's side, Bob untouched.
///
/// A model that already carries a leak sector is enveloped again by
/// prepending a further factor, so envelopes compose.
pub fn envelope_probe(alpha: &ProbeModel, params: &EnvelopeParams) -> Result<ProbeModel> {
    check_count(params, alpha.alice_commands().len())?;
    let new_leak = params.leak_dim();
    let mut spec = alpha.to_spec();
    spec.name = format!("{}+envelope", alpha.name());
    spec.leak_dim = new_leak * alpha.leak_dim();
    spec.states = spec
        .states
        .into_iter()
        .zip(&params.leak_vectors)
        .map(|((label, v), w)| (label, w.tensor(&v)))
        .collect();
    let id = COp::identity(new_leak);
    spec.eve_commands = spec
        .eve_commands
        .into_iter()
        .map(|c| ProbeCommand {
            label: c.label,
            unitary: id.tensor(&c.unitary),
            povm: c.povm.lift_left(new_leak),
            outcome_labels: c.outcome_labels,
        })
        .collect();
    let full = spec.leak_dim * spec.probe_dim * spec.sig_dim;
    for extra in &params.extra {
        check_new_label(alpha.eve_commands(), &extra.label)?;
        check_dim(spec.leak_dim * spec.probe_dim, extra.povm.dim())?;
        let unitary = match &extra.unitary {
            Some(u) => {
                check_dim(full, u.dim())?;
                u.clone()
            }
            None => COp::identity(full),
        };
        spec.eve_commands.push(ProbeCommand {
            label: extra.label.clone(),
            unitary,
            povm: extra.povm.clone(),
            outcome_labels: extra.outcome_labels.clone(),
        });
    }
    ProbeModel::new(spec)
}

/// Projective readout of a general-layout leak sector, leaving the
/// interaction idle. Basis vector `u(b)` reports Alice's command `b`; the
/// shared vector `u_0` reports `inconclusive`.
pub fn stock_leak_readout(alpha: &ProbeModel, params: &EnvelopeParams) -> Result<ExtraCommand> {
    let commands = alpha.alice_commands();
    check_count(params, commands.len())?;
    let leak_dim = params.leak_dim();
    if leak_dim != commands.len() + 1 {
        return Err(Error::Config(
            "leak readout needs the general leak layout".into(),
        ));
    }
    let rest = COp::identity(alpha.leak_dim() * alpha.probe_dim());
    let elements = (0..leak_dim)
        .map(|i| COp::projector(&CVec::basis(leak_dim, i)).tensor(&rest))
        .collect();
    let mut outcome_labels = commands.to_vec();
    outcome_labels.push(INCONCLUSIVE.to_owned());
    Ok(ExtraCommand {
        label: STOCK_LEAK_READOUT.to_owned(),
        outcome_labels,
        povm: Povm::validated(elements)?,
        unitary: None,
    })
}

/// Probe envelope at ratio `r` (general layout) carrying the stock leak
/// readout.
pub fn envelope_probe_readout(alpha: &ProbeModel, r: f64) -> Result<ProbeModel> {
    let params = EnvelopeParams::uniform(alpha.alice_commands().len(), r)?;
    let readout = stock_leak_readout(alpha, &params)?;
    envelope_probe(alpha, &params.with_extra(readout))
}

/// `|⟨v(a)|v(b)⟩|` in both models for one pair of Alice commands.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverlapPair {
    pub a: String,
    pub b: String,
    pub s_alpha: f64,
    pub s_beta: f64,
    /// `s_beta / s_alpha`; `None` when `α`'s vectors are orthogonal.
    pub ratio: Option<f64>,
}

/// Evidence that `β` envelops `α`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvelopeReport {
    /// Largest `|Pr_β − Pr_α|` over shared commands and outcomes.
    pub max_prob_deviation: f64,
    pub overlap_pairs: Vec<OverlapPair>,
    /// Ratio shared by all pairs, taken from the first defined one.
    pub r: Option<f64>,
    pub ok: bool,
}

impl EnvelopeReport {
    /// Whether every defined ratio lies within `tol` of `r`.
    pub fn ratios_match(&self, r: f64, tol: f64) -> bool {
        self.overlap_pairs
            .iter()
            .all(|p| p.ratio.map_or(p.s_beta <= tol, |x| (x - r).abs() <= tol))
    }
}

/// Compares `β` against `α` on `α`'s commands and collects overlap ratios.
pub fn verify_envelope<A: CpcModel + ?Sized, B: CpcModel + ?Sized>(
    alpha: &A,
    beta: &B,
) -> Result<EnvelopeReport> {
    let alice_map: Vec<usize> = alpha
        .alice_commands()
        .iter()
        .map(|l| beta.alice_index(l))
        .collect::<Result<_>>()?;
    let eve_map: Vec<usize> = alpha
        .eve_commands()
        .iter()
        .map(|l| beta.eve_index(l))
        .collect::<Result<_>>()?;

    let mut max_dev = 0.0f64;
    for (a, &ba) in alice_map.iter().enumerate() {
        for (e, &be) in eve_map.iter().enumerate() {
            let ra = alpha.conditional_row(a, e)?;
            let rb = beta.conditional_row(ba, be)?;
            if ra.len() != rb.len() {
                return Err(Error::Label(format!(
                    "outcome sets differ for command `{}`",
                    alpha.eve_commands()[e]
                )));
            }
            for (ca, cb) in ra.iter().zip(&rb) {
                if ca.outcome != cb.outcome || ca.bob != cb.bob {
                    return Err(Error::Label(format!(
                        "outcome `{}` of `{}` has no counterpart",
                        ca.outcome,
                        alpha.eve_commands()[e]
                    )));
                }
                max_dev = max_dev.max((ca.probability - cb.probability).abs());
            }
        }
    }

    let mut overlap_pairs = Vec::new();
    let labels = alpha.alice_commands();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let (Some(ai), Some(aj), Some(bi), Some(bj)) = (
                alpha.signal_state(i),
                alpha.signal_state(j),
                beta.signal_state(alice_map[i]),
                beta.signal_state(alice_map[j]),
            ) else {
                continue;
            };
            let s_alpha = ai.inner(aj)?.norm();
            let s_beta = bi.inner(bj)?.norm();
            overlap_pairs.push(OverlapPair {
                a: labels[i].clone(),
                b: labels[j].clone(),
                s_alpha,
                s_beta,
                ratio: (s_alpha > TOL).then(|| s_beta / s_alpha),
            });
        }
    }
    let r = overlap_pairs.iter().find_map(|p| p.ratio);
    let mut report = EnvelopeReport {
        max_prob_deviation: max_dev,
        overlap_pairs,
        r,
        ok: false,
    };
    report.ok = max_dev <= TOL && report.ratios_match(r.unwrap_or(0.0), TOL);
    Ok(report)
}

/// Classical envelope: `α`'s table unchanged plus the extra commands.
pub fn classical_envelope(
    alpha: &ClassicalModel,
    extra: Vec<ClassicalCommand>,
) -> Result<ClassicalModel> {
    let mut commands = alpha.commands().to_vec();
    for c in extra {
        check_classical_command(&c, alpha.alice_commands().len())?;
        check_new_label(alpha.eve_commands(), &c.label)?;
        commands.push(c);
    }
    let labels: Vec<String> = commands.iter().map(|c| c.label.clone()).collect();
    ensure_unique(&labels)?;
    ClassicalModel::new(
        &format!("{}+envelope", alpha.name()),
        alpha.alice_commands().to_vec(),
        commands,
    )
}

/// A command whose outcome equals Alice's command with certainty.
pub fn reveal_command(alice_commands: &[String]) -> ClassicalCommand {
    let n = alice_commands.len();
    ClassicalCommand {
        label: STOCK_REVEAL.to_owned(),
        outcome_labels: alice_commands.to_vec(),
        rows: (0..n)
            .map(|a| (0..n).map(|j| if a == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    }
}
