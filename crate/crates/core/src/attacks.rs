//! Monte-Carlo eavesdropping on segmented and probe models.
//!
//! Trial `k` of a run draws only from `rng::substream(seed, k)`, so results
//! do not depend on evaluation order.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::envelope::{envelope_segmented_usd, STOCK_USD_COMMAND};
use crate::error::{Error, Result};
use crate::models::{position, CpcModel, MeasurementModel, ProbeModel, DEFAULT_COMMAND};
use crate::rng::{sample_index, substream, uniform_index};

/// Bob's outcome label when Eve withholds the retransmission.
pub const NO_SIGNAL: &str = "none";

/// What Eve sends Bob after an inconclusive result. On a conclusive result
/// she always resends the state for the command she identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ResendPolicy {
    /// Resend the state for a uniformly random command.
    GuessOnInconclusive,
    /// Send nothing; Bob records [`NO_SIGNAL`].
    SuppressOnInconclusive,
}

/// Segmented intercept-resend run.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// The model Eve measures in.
    pub beta: MeasurementModel,
    pub eve_command: String,
    /// Supplies the states Eve resends and Bob's measurement.
    pub bob_receiver: MeasurementModel,
    pub bob_command: String,
    pub policy: ResendPolicy,
    pub trials: u64,
    pub seed: u64,
}

impl AttackConfig {
    /// Stock setup: Eve runs the USD extra command of `beta`, Bob runs the
    /// receiver's default command, guesses on inconclusive.
    pub fn new(
        beta: MeasurementModel,
        bob_receiver: MeasurementModel,
        trials: u64,
        seed: u64,
    ) -> Self {
        Self {
            beta,
            eve_command: STOCK_USD_COMMAND.to_owned(),
            bob_receiver,
            bob_command: DEFAULT_COMMAND.to_owned(),
            policy: ResendPolicy::GuessOnInconclusive,
            trials,
            seed,
        }
    }

    pub fn with_policy(mut self, policy: ResendPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_eve_command(mut self, label: &str) -> Self {
        self.eve_command = label.to_owned();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.beta.alice_commands() != self.bob_receiver.alice_commands() {
            return Err(Error::Config(
                "Eve's model and Bob's receiver disagree on Alice's commands".into(),
            ));
        }
        self.beta
            .eve_index(&self.eve_command)
            .map_err(|_| Error::Config(format!("Eve has no command `{}`", self.eve_command)))?;
        self.bob_receiver
            .eve_index(&self.bob_command)
            .map_err(|_| Error::Config(format!("Bob has no command `{}`", self.bob_command)))?;
        Ok(())
    }
}

/// Exact rates implied by an [`AttackConfig`], for checking simulations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub eve_conclusive_rate: f64,
    pub bob_error_rate: f64,
    pub sifted_fraction: f64,
}

/// Counts and summary rates of a segmented attack.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackStats {
    pub trials: u64,
    pub seed: u64,
    pub alice_labels: Vec<String>,
    pub eve_labels: Vec<String>,
    /// Bob's outcome labels, followed by [`NO_SIGNAL`].
    pub bob_labels: Vec<String>,
    /// `counts[a][e][b]`.
    pub counts: Vec<Vec<Vec<u64>>>,
    pub sifted: u64,
    pub bob_error_rate: f64,
    pub bob_error_stderr: f64,
    pub eve_conclusive_rate: f64,
    pub eve_conclusive_stderr: f64,
    /// Information between the command Eve resent and Bob's sifted bit, in
    /// bits per sifted bit.
    pub eve_info_bits: f64,
    /// Information between Eve's outcome and Alice's command, in bits per
    /// trial.
    pub eve_alice_info_bits: f64,
    pub sifted_fraction: f64,
}

impl AttackStats {
    pub fn count(&self, alice: &str, eve: &str, bob: &str) -> Result<u64> {
        Ok(
            self.counts[position(&self.alice_labels, alice)?][position(&self.eve_labels, eve)?]
                [position(&self.bob_labels, bob)?],
        )
    }
}

fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

struct Prepared {
    eve_rows: Vec<Vec<f64>>,
    /// Alice-command index identified by each Eve outcome.
    eve_hits: Vec<Option<usize>>,
    bob_rows: Vec<Vec<f64>>,
    /// Alice-command index named by each Bob outcome.
    bob_hits: Vec<Option<usize>>,
    eve_labels: Vec<String>,
    bob_labels: Vec<String>,
}

fn prepare(cfg: &AttackConfig) -> Result<Prepared> {
    cfg.validate()?;
    let alice = cfg.beta.alice_commands();
    let e = cfg.beta.eve_index(&cfg.eve_command)?;
    let b = cfg.bob_receiver.eve_index(&cfg.bob_command)?;
    let eve_labels = cfg.beta.commands()[e].outcome_labels.clone();
    let bob_labels = cfg.bob_receiver.commands()[b].outcome_labels.clone();
    if bob_labels.iter().any(|l| l == NO_SIGNAL) {
        return Err(Error::Config(format!(
            "Bob's outcome label `{NO_SIGNAL}` is reserved"
        )));
    }
    let hits = |labels: &[String]| -> Vec<Option<usize>> {
        labels
            .iter()
            .map(|l| alice.iter().position(|a| a == l))
            .collect()
    };
    let eve_hits = hits(&eve_labels);
    let bob_hits = hits(&bob_labels);
    let eve_rows = (0..alice.len())
        .map(|a| cfg.beta.distribution(a, e))
        .collect::<Result<_>>()?;
    let bob_rows = (0..alice.len())
        .map(|a| cfg.bob_receiver.distribution(a, b))
        .collect::<Result<_>>()?;
    let mut bob_labels_ext = bob_labels;
    bob_labels_ext.push(NO_SIGNAL.to_owned());
    Ok(Prepared {
        eve_rows,
        eve_hits,
        bob_rows,
        bob_hits,
        eve_labels,
        bob_labels: bob_labels_ext,
    })
}

/// Exact expectation of the rates [`simulate_segmented_attack`] estimates.
pub fn expected_rates(cfg: &AttackConfig) -> Result<ExpectedRates> {
    let p = prepare(cfg)?;
    let k = p.eve_rows.len();
    let prior = 1.0 / k as f64;
    let (mut conclusive, mut sifted, mut errors) = (0.0, 0.0, 0.0);
    for a in 0..k {
        for (je, &pe) in p.eve_rows[a].iter().enumerate() {
            let resent: Vec<(usize, f64)> = match (p.eve_hits[je], cfg.policy) {
                (Some(x), _) => {
                    conclusive += prior * pe;
                    vec![(x, 1.0)]
                }
                (None, ResendPolicy::GuessOnInconclusive) => {
                    (0..k).map(|x| (x, 1.0 / k as f64)).collect()
                }
                (None, ResendPolicy::SuppressOnInconclusive) => Vec::new(),
            };
            for (x, px) in resent {
                for (jb, &pb) in p.bob_rows[x].iter().enumerate() {
                    if let Some(bit) = p.bob_hits[jb] {
                        let w = prior * pe * px * pb;
                        sifted += w;
                        if bit != a {
                            errors += w;
                        }
                    }
                }
            }
        }
    }
    Ok(ExpectedRates {
        eve_conclusive_rate: conclusive,
        bob_error_rate: if sifted > 0.0 { errors / sifted } else { 0.0 },
        sifted_fraction: sifted,
    })
}

/// Intercept-resend: Alice picks a command uniformly, Eve measures in
/// `beta`, resends per policy, Bob measures the resent state.
pub fn simulate_segmented_attack(cfg: &AttackConfig) -> Result<AttackStats> {
    let p = prepare(cfg)?;
    let k = p.eve_rows.len();
    let none = p.bob_labels.len() - 1;
    let mut counts = vec![vec![vec![0u64; p.bob_labels.len()]; p.eve_labels.len()]; k];
    // Rows: the command Eve resent; columns: Bob's sifted bit.
    let mut resent_vs_bob = vec![vec![0.0f64; k]; k];
    let (mut conclusive, mut sifted, mut errors) = (0u64, 0u64, 0u64);
    for trial in 0..cfg.trials {
        let mut rng = substream(cfg.seed, trial);
        let a = uniform_index(&mut rng, k);
        let je = sample_index(&mut rng, &p.eve_rows[a]);
        let resent = match (p.eve_hits[je], cfg.policy) {
            (Some(x), _) => {
                conclusive += 1;
                Some(x)
            }
            (None, ResendPolicy::GuessOnInconclusive) => Some(uniform_index(&mut rng, k)),
            (None, ResendPolicy::SuppressOnInconclusive) => None,
        };
        let jb = match resent {
            Some(x) => sample_index(&mut rng, &p.bob_rows[x]),
            None => none,
        };
        counts[a][je][jb] += 1;
        if let (Some(x), Some(bit)) = (resent, p.bob_hits.get(jb).copied().flatten()) {
            sifted += 1;
            if bit != a {
                errors += 1;
            }
            resent_vs_bob[x][bit] += 1.0;
        }
    }
    let mut eve_alice = vec![vec![0.0f64; p.eve_labels.len()]; k];
    for (a, by_eve) in counts.iter().enumerate() {
        for (je, by_bob) in by_eve.iter().enumerate() {
            eve_alice[a][je] = by_bob.iter().sum::<u64>() as f64;
        }
    }
    let bob_error_rate = ratio(errors, sifted);
    let eve_conclusive_rate = ratio(conclusive, cfg.trials);
    Ok(AttackStats {
        trials: cfg.trials,
        seed: cfg.seed,
        alice_labels: cfg.beta.alice_commands().to_vec(),
        eve_labels: p.eve_labels,
        bob_labels: p.bob_labels,
        counts,
        sifted,
        bob_error_rate,
        bob_error_stderr: binomial_stderr(bob_error_rate, sifted),
        eve_conclusive_rate,
        eve_conclusive_stderr: binomial_stderr(eve_conclusive_rate, cfg.trials),
        eve_info_bits: if sifted == 0 {
            0.0
        } else {
            mutual_information(&resent_vs_bob)?
        },
        eve_alice_info_bits: mutual_information(&eve_alice)?,
        sifted_fraction: ratio(sifted, cfg.trials),
    })
}

/// Settings shared by every point of a [`tradeoff_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanTemplate {
    pub policy: ResendPolicy,
    pub trials: u64,
    pub seed: u64,
}

/// One row of the overlap-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurveRow {
    pub r: f64,
    pub s_beta: f64,
    pub bob_error_rate: f64,
    pub bob_error_stderr: f64,
    pub eve_conclusive_rate: f64,
    pub eve_conclusive_stderr: f64,
    pub eve_info_bits: f64,
    pub sifted_fraction: f64,
    pub trials: u64,
    pub seed: u64,
}

impl CurveRow {
    /// Eve holds at least `1 − epsilon` bits per sifted bit while Bob's
    /// error rate stays at or below `threshold`.
    pub fn is_insecure(&self, epsilon: f64, threshold: f64) -> bool {
        self.eve_info_bits >= 1.0 - epsilon && self.bob_error_rate <= threshold
    }
}

/// Envelopes `alpha` at each `r` (stock USD extra command), attacks with
/// Eve using it and Bob using `alpha`'s default command. Every point reuses
/// the template seed. Rows are sorted by `r`.
pub fn tradeoff_scan(
    alpha: &MeasurementModel,
    r_grid: &[f64],
    template: &ScanTemplate,
) -> Result<Vec<CurveRow>> {
    let mut grid = r_grid.to_vec();
    if let Some(bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Domain(format!(
            "overlap ratio {bad} must lie in [0, 1]"
        )));
    }
    grid.sort_by(f64::total_cmp);
    let labels = alpha.alice_commands();
    if labels.len() != 2 {
        return Err(Error::Config("the sweep needs a two-command model".into()));
    }
    grid.iter()
        .map(|&r| {
            let beta = envelope_segmented_usd(alpha, r)?;
            let s_beta = beta.overlap(&labels[0], &labels[1])?;
            let cfg = AttackConfig::new(beta, alpha.clone(), template.trials, template.seed)
                .with_policy(template.policy);
            let stats = simulate_segmented_attack(&cfg)?;
            Ok(CurveRow {
                r,
                s_beta,
                bob_error_rate: stats.bob_error_rate,
                bob_error_stderr: stats.bob_error_stderr,
                eve_conclusive_rate: stats.eve_conclusive_rate,
                eve_conclusive_stderr: stats.eve_conclusive_stderr,
                eve_info_bits: stats.eve_info_bits,
                sifted_fraction: stats.sifted_fraction,
                trials: template.trials,
                seed: template.seed,
            })
        })
        .collect()
}

/// Quantities a defense function would consume. Only carried, never
/// evaluated numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseContext {
    pub sifted_bits: u64,
    pub tolerated_error: f64,
    pub overlap: f64,
}

impl DefenseContext {
    pub fn new(sifted_bits: u64, tolerated_error: f64, overlap: f64) -> Result<Self> {
        if sifted_bits == 0 {
            return Err(Error::Config("need at least one sifted bit".into()));
        }
        if !(0.0..0.5).contains(&tolerated_error) {
            return Err(Error::Domain(format!(
                "tolerated error {tolerated_error} must lie in [0, 0.5)"
            )));
        }
        if !(0.0..=1.0).contains(&overlap) {
            return Err(Error::Domain(format!(
                "overlap {overlap} must lie in [0, 1]"
            )));
        }
        Ok(Self {
            sifted_bits,
            tolerated_error,
            overlap,
        })
    }
}

/// Joint counts of a probe attack.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeAttackStats {
    pub trials: u64,
    pub seed: u64,
    pub eve_command: String,
    pub alice_labels: Vec<String>,
    pub eve_labels: Vec<String>,
    pub bob_labels: Vec<String>,
    /// `counts[a][j_E][j_B]`.
    pub counts: Vec<Vec<Vec<u64>>>,
    /// Bob outcomes naming an Alice command.
    pub sifted: u64,
    pub bob_error_rate: f64,
    pub bob_error_stderr: f64,
    pub sifted_fraction: f64,
    /// Information between Eve's outcome and Alice's command, per trial.
    pub eve_alice_info_bits: f64,
    /// Information between Eve's outcome and Bob's sifted bit, per sifted
    /// bit.
    pub eve_bob_info_bits: f64,
    /// Information between Alice's command and Bob's outcome, per trial.
    pub bob_alice_info_bits: f64,
}

impl ProbeAttackStats {
    /// Relative frequency of `(j_E, j_B)` among trials with Alice command `a`.
    pub fn joint_frequency(&self, a: usize, je: usize, jb: usize) -> f64 {
        let total: u64 = self.counts[a].iter().flatten().sum();
        ratio(self.counts[a][je][jb], total)
    }
}

/// Alice picks uniformly; `(j_B, j_E)` is drawn from the joint distribution
/// of `beta` under Eve's command `eve_command`.
pub fn simulate_probe_attack(
    beta: &ProbeModel,
    eve_command: &str,
    trials: u64,
    seed: u64,
) -> Result<ProbeAttackStats> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let e = beta.eve_index(eve_command)?;
    let alice = beta.alice_commands();
    let k = alice.len();
    let eve_labels = beta.commands()[e].outcome_labels.clone();
    let bob_labels = beta.bob_outcome_labels().to_vec();
    let (ne, nb) = (eve_labels.len(), bob_labels.len());
    // Flattened j_E-major so one draw picks the pair.
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let joint = beta.joint_distribution(a, e)?;
            Ok((0..ne * nb).map(|i| joint[i % nb][i / nb]).collect())
        })
        .collect::<Result<_>>()?;
    let bob_hits: Vec<Option<usize>> = bob_labels
        .iter()
        .map(|l| alice.iter().position(|a| a == l))
        .collect();

    let mut counts = vec![vec![vec![0u64; nb]; ne]; k];
    for trial in 0..trials {
        let mut rng = substream(seed, trial);
        let a = uniform_index(&mut rng, k);
        let i = sample_index(&mut rng, &rows[a]);
        counts[a][i / nb][i % nb] += 1;
    }

    let mut eve_alice = vec![vec![0.0; ne]; k];
    let mut bob_alice = vec![vec![0.0; nb]; k];
    let mut eve_bob = vec![vec![0.0; k]; ne];
    let (mut sifted, mut errors) = (0u64, 0u64);
    for a in 0..k {
        for je in 0..ne {
            for jb in 0..nb {
                let c = counts[a][je][jb];
                eve_alice[a][je] += c as f64;
                bob_alice[a][jb] += c as f64;
                if let Some(bit) = bob_hits[jb] {
                    sifted += c;
                    if bit != a {
                        errors += c;
                    }
                    eve_bob[je][bit] += c as f64;
                }
            }
        }
    }
    let bob_error_rate = ratio(errors, sifted);
    Ok(ProbeAttackStats {
        trials,
        seed,
        eve_command: eve_command.to_owned(),
        alice_labels: alice.to_vec(),
        eve_labels,
        bob_labels,
        counts,
        sifted,
        bob_error_rate,
        bob_error_stderr: binomial_stderr(bob_error_rate, sifted),
        sifted_fraction: ratio(sifted, trials),
        eve_alice_info_bits: mutual_information(&eve_alice)?,
        eve_bob_info_bits: if sifted == 0 {
            0.0
        } else {
            mutual_information(&eve_bob)?
        },
        bob_alice_info_bits: mutual_information(&bob_alice)?,
    })
}

/// Plug-in mutual information of a joint count (or weight) table, in bits.
pub fn mutual_information(counts: &[Vec<f64>]) -> Result<f64> {
    let cols = counts.first().map_or(0, Vec::len);
    if counts.iter().any(|r| r.len() != cols) {
        return Err(Error::Domain("count table rows differ in length".into()));
    }
    if counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::Domain(
            "counts must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = counts.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::Domain("count table is all zero".into()));
    }
    let row_sums: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| counts.iter().map(|r| r[j]).sum())
        .collect();
    let mut mi = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                mi += c / total * (c * total / (row_sums[i] * col_sums[j])).log2();
            }
        }
    }
    // Rounding can push a zero estimate slightly negative.
    Ok(mi.max(0.0))
}

/// Shannon entropy of a weight vector, in bits.
pub fn entropy_bits(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

/// `trials` draws of `(alice index, outcome index)` with Alice uniform and
/// the measurer running `eve_command`.
pub fn sample_outcome_stream<M: CpcModel + ?Sized>(
    model: &M,
    eve_command: &str,
    trials: u64,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let e = model.eve_index(eve_command)?;
    let k = model.alice_commands().len();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            Ok(model
                .conditional_row(a, e)?
                .into_iter()
                .map(|c| c.probability)
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..trials)
        .map(|trial| {
            let mut rng = substream(seed, trial);
            let a = uniform_index(&mut rng, k);
            (a, sample_index(&mut rng, &rows[a]))
        })
        .collect())
}
