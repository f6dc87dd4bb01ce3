//! Clock-skew models and their feedback loop.
//!
//! A [`DeltaModel`] refines a two-state receiver model with a two-level
//! pilot. Skew `s` acts through `U(s) = exp(−i s ω G)` with
//! `G = P⊥ ⊗ 1 + 1 ⊗ |1⟩⟨1|`, where `P⊥` projects onto the antisymmetric
//! direction of Alice's two signal vectors. The joint POVM is
//! `M(j) ⊗ Π(m)`, so summing over the pilot outcome `m` gives back the base
//! receiver exactly.
//!
//! Bob estimates skew with a grid Bayes filter and steers a proportional
//! lever. [`simulate_clock_modulation`] reuses the same generator for a
//! secret per-step phase schedule.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::attacks::mutual_information;
use crate::discrimination::{usd_povm, UsdSpec};
use crate::error::{Error, Result};
use crate::hilbert::{COp, CVec, Povm, C64, TOL};
use crate::models::{position, CpcModel, MeasurementModel, DEFAULT_COMMAND, INCONCLUSIVE};
use crate::rng::{sample_index, substream, uniform, uniform_index};

/// Which pilot basis Bob reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PilotReadout {
    /// `|±i⟩`: `Pr(m = 1 | s) = (1 − sin ωs)/2`, odd in `s`, so the sign
    /// of the skew is visible.
    Quadrature,
    /// `|±⟩`: `Pr(m = 1 | s) = (1 − cos ωs)/2`, blind to the sign.
    InPhase,
}

/// Base receiver model plus pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaModel {
    base: MeasurementModel,
    receiver: usize,
    omega: f64,
    readout: PilotReadout,
    antisymmetric: COp,
    pilot_state: CVec,
    pilot_povm: Povm,
    combined: Vec<Povm>,
}

impl DeltaModel {
    /// `base` must have exactly two Alice commands with distinct vectors.
    /// Bob's receiver is the `default` command when present, else the first.
    pub fn new(base: MeasurementModel, omega: f64, readout: PilotReadout) -> Result<Self> {
        if base.alice_commands().len() != 2 {
            return Err(Error::Config(
                "skew model needs exactly two Alice commands".into(),
            ));
        }
        if !omega.is_finite() {
            return Err(Error::Domain("skew rate must be finite".into()));
        }
        let (v0, v1) = (&base.states()[0], &base.states()[1]);
        let inner = v0.inner(v1)?;
        let aligned = if inner.norm() > 0.0 {
            v1.scale((inner / inner.norm()).conj())
        } else {
            v1.clone()
        };
        let d = v0.add_scaled(C64::new(-1.0, 0.0), &aligned)?;
        if d.norm() < TOL {
            return Err(Error::Degenerate("Alice's vectors coincide".into()));
        }
        let antisymmetric = COp::projector(&d.normalized()?);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let pilot_state = CVec::from_real(&[h, h])?;
        let pilot_basis = match readout {
            PilotReadout::Quadrature => [
                CVec::new(vec![C64::new(h, 0.0), C64::new(0.0, h)])?,
                CVec::new(vec![C64::new(h, 0.0), C64::new(0.0, -h)])?,
            ],
            PilotReadout::InPhase => [CVec::from_real(&[h, h])?, CVec::from_real(&[h, -h])?],
        };
        let pilot_povm = Povm::projective(&pilot_basis)?;
        let combined = base
            .commands()
            .iter()
            .map(|c| {
                Povm::new(
                    c.povm
                        .elements()
                        .iter()
                        .flat_map(|mj| pilot_povm.elements().iter().map(move |pm| mj.tensor(pm)))
                        .collect(),
                )
            })
            .collect::<Result<_>>()?;
        let receiver = base.eve_index(DEFAULT_COMMAND).unwrap_or(0);
        Ok(Self {
            base,
            receiver,
            omega,
            readout,
            antisymmetric,
            pilot_state,
            pilot_povm,
            combined,
        })
    }

    /// Quadrature pilot with `ω = 1.2 / s0`.
    pub fn stock(base: MeasurementModel, s0: f64) -> Result<Self> {
        if !(s0 > 0.0) {
            return Err(Error::Domain("leeway s0 must be positive".into()));
        }
        Self::new(base, 1.2 / s0, PilotReadout::Quadrature)
    }

    pub fn base(&self) -> &MeasurementModel {
        &self.base
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn readout(&self) -> PilotReadout {
        self.readout
    }

    pub fn receiver(&self) -> usize {
        self.receiver
    }

    pub fn pilot_povm(&self) -> &Povm {
        &self.pilot_povm
    }

    /// Joint POVM of base command `command`; element `2j + m` is
    /// `M(j) ⊗ Π(m)`.
    pub fn combined_povm(&self, command: usize) -> Result<&Povm> {
        self.combined.get(command).ok_or(Error::Index {
            index: command,
            len: self.combined.len(),
        })
    }

    fn signal_phase_op(&self, theta: f64) -> COp {
        let phase = C64::new(theta.cos() - 1.0, theta.sin());
        COp::identity(self.base.dim())
            .add(&self.antisymmetric.scale(phase))
            .expect("same dim")
    }

    /// `e^{iθ P⊥} |v(a)⟩`.
    pub fn phased_signal(&self, alice: usize, theta: f64) -> Result<CVec> {
        let v = self.base.states().get(alice).ok_or(Error::Index {
            index: alice,
            len: 2,
        })?;
        self.signal_phase_op(theta).apply(v)
    }

    /// `U(s)` on `signal ⊗ pilot`.
    pub fn skew_unitary(&self, s: f64) -> COp {
        let theta = -self.omega * s;
        let pilot = COp::diagonal(&[C64::new(1.0, 0.0), C64::new(theta.cos(), theta.sin())]);
        self.signal_phase_op(theta).tensor(&pilot)
    }

    /// `U(−s)(|v(a)⟩ ⊗ |+⟩)`.
    pub fn skewed_state(&self, alice: usize, s: f64) -> Result<CVec> {
        let theta = self.omega * s;
        let pilot = CVec::new(vec![
            self.pilot_state.entries()[0],
            self.pilot_state.entries()[1] * C64::new(theta.cos(), theta.sin()),
        ])?;
        Ok(self.phased_signal(alice, theta)?.tensor(&pilot))
    }

    /// `Pr(j, m | a, command, s)`, indexed `[j][m]`.
    pub fn delta_probabilities(
        &self,
        alice: usize,
        command: usize,
        s: f64,
    ) -> Result<Vec<Vec<f64>>> {
        let flat = self.flat_probabilities(alice, command, s)?;
        Ok(flat.chunks(2).map(<[f64]>::to_vec).collect())
    }

    fn flat_probabilities(&self, alice: usize, command: usize, s: f64) -> Result<Vec<f64>> {
        self.combined_povm(command)?
            .probabilities(&self.skewed_state(alice, s)?)
    }

    /// Largest `‖Σ_m M(j,m) − M(j) ⊗ 1‖_max` over commands and outcomes.
    pub fn partition_residual(&self) -> f64 {
        let id = COp::identity(2);
        let mut worst = 0.0f64;
        for (c, povm) in self.base.commands().iter().zip(&self.combined) {
            for (j, mj) in c.povm.elements().iter().enumerate() {
                let sum = povm.elements()[2 * j]
                    .add(&povm.elements()[2 * j + 1])
                    .expect("same dim");
                worst = worst.max(sum.max_abs_diff(&mj.tensor(&id)).expect("same dim"));
            }
        }
        worst
    }

    /// Largest `|Pr_s(j) − Pr_0(j)| / |s|` of the pilot-summed distribution
    /// over `0 < |s| ≤ s0`, sampled on 400 points.
    pub fn lipschitz_constant(&self, s0: f64) -> Result<f64> {
        let mut kappa = 0.0f64;
        for command in 0..self.combined.len() {
            for a in 0..2 {
                let at_zero = self.base.distribution(a, command)?;
                for i in 1..=200 {
                    let s = s0 * i as f64 / 200.0;
                    for s in [s, -s] {
                        let p = self.delta_probabilities(a, command, s)?;
                        for (j, pj) in p.iter().enumerate() {
                            let gap = (pj[0] + pj[1] - at_zero[j]).abs();
                            kappa = kappa.max(gap / s.abs());
                        }
                    }
                }
            }
        }
        Ok(kappa)
    }

    /// Likelihood of `(j, m)` for each skew in `grid`. With `alice = None`
    /// the two commands are averaged.
    pub fn likelihood(
        &self,
        grid: &[f64],
        alice: Option<usize>,
        command: usize,
        j: usize,
        m: usize,
    ) -> Result<Vec<f64>> {
        if m > 1 {
            return Err(Error::Index { index: m, len: 2 });
        }
        let index = 2 * j + m;
        let povm = self.combined_povm(command)?;
        if index >= povm.len() {
            return Err(Error::Index {
                index: j,
                len: povm.len() / 2,
            });
        }
        grid.iter()
            .map(|&s| {
                let lik = |a: usize| -> Result<f64> {
                    Ok(self.flat_probabilities(a, command, s)?[index])
                };
                match alice {
                    Some(a) => lik(a),
                    None => Ok(0.5 * (lik(0)? + lik(1)?)),
                }
            })
            .collect()
    }
}

/// Posterior over skew on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesGrid {
    grid: Vec<f64>,
    weights: Vec<f64>,
    sigma_prior: f64,
}

impl BayesGrid {
    /// Gaussian prior of width `sigma_prior` on `points` values spanning
    /// `±4 sigma_prior`.
    pub fn gaussian(sigma_prior: f64, points: usize) -> Result<Self> {
        if !(sigma_prior > 0.0) || points < 2 {
            return Err(Error::Domain(
                "prior needs positive width and at least two grid points".into(),
            ));
        }
        let half = 4.0 * sigma_prior;
        let step = 2.0 * half / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| -half + step * i as f64).collect();
        let weights = grid
            .iter()
            .map(|s| (-0.5 * (s / sigma_prior).powi(2)).exp())
            .collect();
        Ok(Self {
            grid,
            weights,
            sigma_prior,
        }
        .normalized())
    }

    /// 201-point Gaussian prior.
    pub fn stock(sigma_prior: f64) -> Result<Self> {
        Self::gaussian(sigma_prior, 201)
    }

    fn normalized(mut self) -> Self {
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= total;
        }
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma_prior(&self) -> f64 {
        self.sigma_prior
    }

    pub fn mean(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s * w)
            .sum()
    }

    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        self.grid
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * (s - mean).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Multiplies by `likelihood` and renormalizes.
    pub fn update_with(&self, likelihood: &[f64]) -> Result<Self> {
        if likelihood.len() != self.grid.len() {
            return Err(Error::Dimension {
                expected: self.grid.len(),
                found: likelihood.len(),
            });
        }
        let weights: Vec<f64> = self
            .weights
            .iter()
            .zip(likelihood)
            .map(|(w, l)| w * l)
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateEvidence);
        }
        Ok(Self {
            grid: self.grid.clone(),
            weights: weights.into_iter().map(|w| w / total).collect(),
            sigma_prior: self.sigma_prior,
        })
    }

    /// Bayes update on one `(j, m)` observation of `command`.
    pub fn update(
        &self,
        d: &DeltaModel,
        alice: Option<usize>,
        command: usize,
        j: usize,
        m: usize,
    ) -> Result<Self> {
        self.update_with(&d.likelihood(&self.grid, alice, command, j, m)?)
    }

    /// Moves the posterior by `shift` and spreads it with Gaussian noise of
    /// width `sigma`. Mass pushed off the grid is dropped; if nothing is
    /// left the prior is restored.
    pub fn predict(&self, shift: f64, sigma: f64) -> Self {
        let n = self.grid.len();
        let h = self.grid[1] - self.grid[0];
        let mut moved = vec![0.0; n];
        for (i, &w) in self.weights.iter().enumerate() {
            let x = i as f64 + shift / h;
            let lo = x.floor();
            let frac = x - lo;
            for (k, part) in [(lo, 1.0 - frac), (lo + 1.0, frac)] {
                if k >= 0.0 && (k as usize) < n && part > 0.0 {
                    moved[k as usize] += w * part;
                }
            }
        }
        let spread = if sigma > 0.0 {
            let reach = ((6.0 * sigma / h).ceil() as usize).min(n);
            let kernel: Vec<f64> = (0..=reach)
                .map(|o| (-0.5 * (o as f64 * h / sigma).powi(2)).exp())
                .collect();
            let norm: f64 = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
            let mut out = vec![0.0; n];
            for (i, &w) in moved.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &k) in kernel.iter().enumerate() {
                    if i + o < n {
                        out[i + o] += w * k / norm;
                    }
                    if o > 0 && i >= o {
                        out[i - o] += w * k / norm;
                    }
                }
            }
            out
        } else {
            moved
        };
        let total: f64 = spread.iter().sum();
        if total > 0.0 {
            Self {
                grid: self.grid.clone(),
                weights: spread.into_iter().map(|w| w / total).collect(),
                sigma_prior: self.sigma_prior,
            }
        } else {
            Self::gaussian(self.sigma_prior, n).expect("validated at construction")
        }
    }
}

/// Bayes update by label; `alice = None` averages over Alice's commands.
pub fn bayes_update(
    g: &BayesGrid,
    d: &DeltaModel,
    alice: Option<&str>,
    command: &str,
    outcome: &str,
    pilot: usize,
) -> Result<BayesGrid> {
    let a = alice.map(|l| d.base.alice_index(l)).transpose()?;
    let c = d.base.eve_index(command)?;
    let j = d.base.commands()[c].outcome_index(outcome)?;
    g.update(d, a, c, j, pilot)
}

/// Proportional lever with deadband.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Controller {
    pub gain: f64,
    pub deadband: f64,
    pub u_max: f64,
}

impl Controller {
    pub fn new(gain: f64, deadband: f64, u_max: f64) -> Result<Self> {
        if !(gain > 0.0) {
            return Err(Error::Config("controller gain must be positive".into()));
        }
        if !(deadband >= 0.0) || !(u_max > 0.0) {
            return Err(Error::Config(
                "deadband must be nonnegative and lever range positive".into(),
            ));
        }
        Ok(Self {
            gain,
            deadband,
            u_max,
        })
    }

    /// Gain 0.5, no deadband, lever range `s0 / 2` per step.
    pub fn stock(s0: f64) -> Self {
        Self {
            gain: 0.5,
            deadband: 0.0,
            u_max: 0.5 * s0,
        }
    }

    pub fn command(&self, estimate: f64) -> f64 {
        control_command(self, estimate)
    }
}

/// `clamp(−g · estimate, ±u_max)`, zero inside the deadband.
pub fn control_command(c: &Controller, estimate: f64) -> f64 {
    if estimate.abs() <= c.deadband {
        return 0.0;
    }
    (-c.gain * estimate).clamp(-c.u_max, c.u_max)
}

/// Skew random walk: `s ← s + drift + u + noise · N(0, 1)` per step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkewDynamics {
    pub initial_skew: f64,
    pub drift_rate: f64,
    pub noise_sigma: f64,
    /// Seconds per step; carried for reporting.
    pub dt: f64,
    pub s0: f64,
}

impl SkewDynamics {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return Err(Error::Config("leeway s0 must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.dt > 0.0) {
            return Err(Error::Config(
                "noise must be nonnegative and step length positive".into(),
            ));
        }
        if !self.initial_skew.is_finite() || !self.drift_rate.is_finite() {
            return Err(Error::Config("skew and drift must be finite".into()));
        }
        Ok(())
    }

    /// Drift `s0/100` and noise `s0/20` per step, starting at zero.
    pub fn stock(s0: f64) -> Self {
        Self {
            initial_skew: 0.0,
            drift_rate: 0.01 * s0,
            noise_sigma: 0.05 * s0,
            dt: 1.0,
            s0,
        }
    }

    /// No motion at all.
    pub fn still(s0: f64) -> Self {
        Self {
            initial_skew: 0.0,
            drift_rate: 0.0,
            noise_sigma: 0.0,
            dt: 1.0,
            s0,
        }
    }
}

/// One step of a sync run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub step: u64,
    pub true_skew: f64,
    pub estimate: f64,
    pub lever: f64,
    pub gamma_outcome: String,
    pub pilot_outcome: usize,
    pub contained: bool,
}

/// Base-receiver frequencies on contained steps against the zero-skew value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaCell {
    pub alice: String,
    pub outcome: String,
    pub count: u64,
    pub total: u64,
    pub frequency: f64,
    pub expected: f64,
    /// `4 √(p(1−p)/N) + κ s0`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyncStats {
    pub steps: u64,
    pub seed: u64,
    pub contained_fraction: f64,
    pub max_abs_skew: f64,
    pub kappa: f64,
    /// Largest `|frequency − expected|` over the cells.
    pub gamma_gap: f64,
    pub gamma_cells: Vec<GammaCell>,
    /// Times the filter met impossible evidence and restarted from its prior.
    pub filter_resets: u64,
}

impl SyncStats {
    pub fn gamma_within_tolerance(&self) -> bool {
        self.gamma_cells
            .iter()
            .all(|c| (c.frequency - c.expected).abs() <= c.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncRun {
    pub trace: Vec<TraceRow>,
    pub stats: SyncStats,
}

/// Closed loop: skew moves, Alice sends a random command, Bob observes
/// `(j, m)` at the true skew, filters without knowing Alice's command and
/// sets the lever for the next step. `controller = None` leaves the lever
/// at zero. Step `k` draws from `substream(seed, k)`.
pub fn simulate_sync_loop(
    d: &DeltaModel,
    dynamics: &SkewDynamics,
    controller: Option<&Controller>,
    prior: &BayesGrid,
    steps: u64,
    seed: u64,
) -> Result<SyncRun> {
    dynamics.validate()?;
    if steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    let command = d.receiver;
    let outcome_labels = &d.base.commands()[command].outcome_labels;
    let n_out = outcome_labels.len();
    let s0 = dynamics.s0;
    let kappa = d.lipschitz_constant(s0)?;

    // Likelihood of each (j, m) on the grid, Alice's command averaged.
    let grid = prior.grid().to_vec();
    let lik: Vec<Vec<f64>> = (0..2 * n_out)
        .map(|i| d.likelihood(&grid, None, command, i / 2, i % 2))
        .collect::<Result<_>>()?;

    let mut posterior = prior.clone();
    let mut s = dynamics.initial_skew;
    let mut trace = Vec::with_capacity(steps as usize);
    let mut contained_counts = vec![vec![0u64; n_out]; 2];
    let (mut contained, mut max_abs, mut resets) = (0u64, 0.0f64, 0u64);
    for step in 0..steps {
        let mut rng = substream(seed, step);
        let a = uniform_index(&mut rng, 2);
        let flat = d.flat_probabilities(a, command, s)?;
        let idx = sample_index(&mut rng, &flat);
        let noise: f64 = StandardNormal.sample(&mut rng);

        posterior = match posterior.update_with(&lik[idx]) {
            Ok(p) => p,
            Err(Error::DegenerateEvidence) => {
                resets += 1;
                prior.clone()
            }
            Err(e) => return Err(e),
        };
        let estimate = posterior.mean();
        let lever = controller.map_or(0.0, |c| c.command(estimate));
        let inside = s.abs() <= s0;
        if inside {
            contained += 1;
            contained_counts[a][idx / 2] += 1;
        }
        max_abs = max_abs.max(s.abs());
        trace.push(TraceRow {
            step,
            true_skew: s,
            estimate,
            lever,
            gamma_outcome: outcome_labels[idx / 2].clone(),
            pilot_outcome: idx % 2,
            contained: inside,
        });
        s += dynamics.drift_rate + lever + dynamics.noise_sigma * noise;
        posterior = posterior.predict(dynamics.drift_rate + lever, dynamics.noise_sigma);
    }

    let mut gamma_cells = Vec::new();
    let mut gamma_gap = 0.0f64;
    for (a, row) in contained_counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let expected = d.base.distribution(a, command)?;
        for (j, &count) in row.iter().enumerate() {
            let p = expected[j];
            let frequency = count as f64 / total as f64;
            gamma_gap = gamma_gap.max((frequency - p).abs());
            gamma_cells.push(GammaCell {
                alice: d.base.alice_commands()[a].clone(),
                outcome: outcome_labels[j].clone(),
                count,
                total,
                frequency,
                expected: p,
                tolerance: 4.0 * (p * (1.0 - p) / total as f64).sqrt() + kappa * s0,
            });
        }
    }
    Ok(SyncRun {
        trace,
        stats: SyncStats {
            steps,
            seed,
            contained_fraction: contained as f64 / steps as f64,
            max_abs_skew: max_abs,
            kappa,
            gamma_gap,
            gamma_cells,
            filter_resets: resets,
        },
    })
}

/// `steps` phase offsets `amplitude · 2π · U[0, 1)`, offset `k` drawn from
/// `substream(seed, k)`.
pub fn phase_schedule(amplitude: f64, steps: u64, seed: u64) -> Vec<f64> {
    (0..steps)
        .map(|k| amplitude * core::f64::consts::TAU * uniform(&mut substream(seed, k)))
        .collect()
}

/// Bob's and Eve's view of one modulation run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulationStats {
    pub eve_knows: bool,
    pub steps: u64,
    pub seed: u64,
    pub bob_error_rate: f64,
    pub bob_error_stderr: f64,
    pub bob_sifted_fraction: f64,
    pub eve_conclusive_rate: f64,
    pub eve_conclusive_stderr: f64,
    /// Wrong conclusive answers among Eve's conclusive answers.
    pub eve_error_rate: f64,
    /// Information between Eve's outcome and Alice's command, per bit sent.
    pub eve_info_bits: f64,
    /// Information between Eve's outcome and Bob's sifted bit, per sifted bit.
    pub eve_bob_info_bits: f64,
    /// `counts[a][j_E]`.
    pub eve_counts: Vec<Vec<u64>>,
}

/// Alice rotates her vector by the secret phase `schedule[k]` along the
/// skew generator; Bob, holding the schedule, undoes it. Eve taps the line
/// without disturbing it and runs USD on Alice's unmodulated vectors,
/// undoing the phase only when `eve_knows`. Both also see the residual skew
/// of `dynamics` (no lever). Every step consumes the same draws whatever
/// `eve_knows` is.
pub fn simulate_clock_modulation(
    d: &DeltaModel,
    dynamics: &SkewDynamics,
    schedule: &[f64],
    eve_knows: bool,
    steps: u64,
    seed: u64,
) -> Result<ModulationStats> {
    dynamics.validate()?;
    if schedule.len() as u64 != steps {
        return Err(Error::Config(format!(
            "schedule has {} entries for {steps} steps",
            schedule.len()
        )));
    }
    if steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    let base = &d.base;
    let bob = &base.commands()[d.receiver];
    let bob_hits: Vec<Option<usize>> = bob
        .outcome_labels
        .iter()
        .map(|l| base.alice_commands().iter().position(|a| a == l))
        .collect();
    let eve_povm = usd_povm(&UsdSpec::new(
        base.states()[0].clone(),
        base.states()[1].clone(),
    )?)?;

    let mut eve_counts = vec![vec![0u64; 3]; 2];
    let mut eve_bob = vec![vec![0.0f64; 2]; 3];
    let (mut sifted, mut errors) = (0u64, 0u64);
    let mut s = dynamics.initial_skew;
    for (k, &phi) in schedule.iter().enumerate() {
        let mut rng = substream(seed, k as u64);
        let a = uniform_index(&mut rng, 2);
        let theta = d.omega * s;
        let bob_state = d.phased_signal(a, theta)?;
        let eve_state = if eve_knows {
            bob_state.clone()
        } else {
            d.phased_signal(a, theta - phi)?
        };
        let jb = sample_index(&mut rng, &bob.povm.probabilities(&bob_state)?);
        let je = sample_index(&mut rng, &eve_povm.probabilities(&eve_state)?);
        let noise: f64 = StandardNormal.sample(&mut rng);
        eve_counts[a][je] += 1;
        if let Some(bit) = bob_hits[jb] {
            sifted += 1;
            if bit != a {
                errors += 1;
            }
            eve_bob[je][bit] += 1.0;
        }
        s += dynamics.drift_rate + dynamics.noise_sigma * noise;
    }
    let conclusive: u64 = eve_counts.iter().map(|r| r[0] + r[1]).sum();
    let eve_wrong = eve_counts[0][1] + eve_counts[1][0];
    let rate = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let se = |p: f64, n: u64| {
        if n == 0 {
            0.0
        } else {
            (p * (1.0 - p) / n as f64).sqrt()
        }
    };
    let bob_error_rate = rate(errors, sifted);
    let eve_conclusive_rate = rate(conclusive, steps);
    let table: Vec<Vec<f64>> = eve_counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    Ok(ModulationStats {
        eve_knows,
        steps,
        seed,
        bob_error_rate,
        bob_error_stderr: se(bob_error_rate, sifted),
        bob_sifted_fraction: rate(sifted, steps),
        eve_conclusive_rate,
        eve_conclusive_stderr: se(eve_conclusive_rate, steps),
        eve_error_rate: rate(eve_wrong, conclusive),
        eve_info_bits: mutual_information(&table)?,
        eve_bob_info_bits: if sifted == 0 {
            0.0
        } else {
            mutual_information(&eve_bob)?
        },
        eve_counts,
    })
}

/// Baseline (no modulation), informed Eve and uninformed Eve on one
/// schedule and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationComparison {
    pub baseline: ModulationStats,
    pub informed: ModulationStats,
    pub blind: ModulationStats,
}

pub fn compare_modulation(
    d: &DeltaModel,
    dynamics: &SkewDynamics,
    schedule: &[f64],
    seed: u64,
) -> Result<ModulationComparison> {
    let steps = schedule.len() as u64;
    let zeros = vec![0.0; schedule.len()];
    Ok(ModulationComparison {
        baseline: simulate_clock_modulation(d, dynamics, &zeros, false, steps, seed)?,
        informed: simulate_clock_modulation(d, dynamics, schedule, true, steps, seed)?,
        blind: simulate_clock_modulation(d, dynamics, schedule, false, steps, seed)?,
    })
}

/// Eve's USD outcome distribution when the phase is uniform on `[0, 2π)`
/// and unknown to her, averaged over `samples` equally spaced phases;
/// indexed `[a][j_E]` with outcomes Alice's commands then `inconclusive`.
pub fn dephased_eve_table(d: &DeltaModel, samples: usize) -> Result<Vec<Vec<f64>>> {
    let base = &d.base;
    let eve_povm = usd_povm(&UsdSpec::new(
        base.states()[0].clone(),
        base.states()[1].clone(),
    )?)?;
    let samples = samples.max(1);
    (0..2)
        .map(|a| {
            let mut acc = vec![0.0; 3];
            for i in 0..samples {
                let phi = core::f64::consts::TAU * i as f64 / samples as f64;
                for (x, p) in acc
                    .iter_mut()
                    .zip(eve_povm.probabilities(&d.phased_signal(a, -phi)?)?)
                {
                    *x += p / samples as f64;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Labels of Eve's USD outcomes in [`ModulationStats::eve_counts`] order.
pub fn eve_outcome_labels(d: &DeltaModel) -> Vec<String> {
    let mut labels = d.base.alice_commands().to_vec();
    labels.push(INCONCLUSIVE.to_owned());
    labels
}

/// Index of `label` among `d`'s receiver outcomes.
pub fn receiver_outcome_index(d: &DeltaModel, label: &str) -> Result<usize> {
    position(&d.base.commands()[d.receiver].outcome_labels, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::b92_model;

    fn stock() -> DeltaModel {
        DeltaModel::stock(b92_model(core::f64::consts::FRAC_PI_4).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn skew_unitary_basics() {
        let d = stock();
        assert_eq!(
            d.skew_unitary(0.0).max_abs_diff(&COp::identity(4)).unwrap(),
            0.0
        );
        for i in -20..=20 {
            let s = 0.1 * i as f64;
            let u = d.skew_unitary(s);
            assert!(u.unitarity_residual() <= 1e-12);
            let back = u.matmul(&d.skew_unitary(-s)).unwrap();
            assert!(back.max_abs_diff(&COp::identity(4)).unwrap() <= TOL);
        }
    }

    #[test]
    fn pilot_phase_follows_skew() {
        let d = stock();
        let s = 0.37;
        // Acting on |0⟩_sig-symmetric ⊗ |1⟩_pilot picks up e^{−iωs}.
        let u = d.skew_unitary(s);
        let pilot_only = COp::identity(2).tensor(&COp::diagonal(&[
            C64::new(1.0, 0.0),
            C64::new((-d.omega() * s).cos(), (-d.omega() * s).sin()),
        ]));
        let sig = d.signal_phase_op(-d.omega() * s);
        let expected = sig.tensor(&COp::identity(2)).matmul(&pilot_only).unwrap();
        assert!(u.max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn partition_and_projection() {
        let d = stock();
        assert!(d.partition_residual() <= TOL);
        for a in 0..2 {
            let p = d.delta_probabilities(a, 0, 0.0).unwrap();
            let base = d.base().distribution(a, 0).unwrap();
            let total: f64 = p.iter().flatten().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (j, pj) in p.iter().enumerate() {
                assert!((pj[0] + pj[1] - base[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pilot_probabilities_closed_form() {
        let base = b92_model(core::f64::consts::FRAC_PI_4).unwrap();
        let quad = DeltaModel::new(base.clone(), 1.2, PilotReadout::Quadrature).unwrap();
        let inphase = DeltaModel::new(base, 1.2, PilotReadout::InPhase).unwrap();
        for i in -10..=10 {
            let s = 0.15 * i as f64;
            let m1 = |d: &DeltaModel| -> f64 {
                d.delta_probabilities(0, 0, s)
                    .unwrap()
                    .iter()
                    .map(|r| r[1])
                    .sum()
            };
            assert!((m1(&quad) - (1.0 - (1.2 * s).sin()) / 2.0).abs() < 1e-12);
            assert!((m1(&inphase) - (1.0 - (1.2 * s).cos()) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_bound_holds() {
        let d = stock();
        let kappa = d.lipschitz_constant(1.0).unwrap();
        assert!(kappa > 0.0 && kappa <= 2.0 * d.omega());
    }

    #[test]
    fn flat_likelihood_leaves_prior() {
        let g = BayesGrid::stock(0.5).unwrap();
        let post = g.update_with(&vec![0.3; g.grid().len()]).unwrap();
        for (a, b) in g.weights().iter().zip(post.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((post.weights().iter().sum::<f64>() - 1.0).abs() < TOL);
        assert_eq!(
            g.update_with(&vec![0.0; g.grid().len()]),
            Err(Error::DegenerateEvidence)
        );
    }

    #[test]
    fn pilot_observations_locate_skew() {
        let d = stock();
        let truth = 0.3;
        let mut g = BayesGrid::stock(0.5).unwrap();
        for k in 0..200 {
            let mut rng = substream(17, k);
            let p = d.delta_probabilities(0, 0, truth).unwrap();
            let flat: Vec<f64> = p.iter().flatten().copied().collect();
            let idx = sample_index(&mut rng, &flat);
            g = g.update(&d, Some(0), 0, idx / 2, idx % 2).unwrap();
        }
        assert!((g.mean() - truth).abs() < 0.1, "mean {}", g.mean());
    }

    #[test]
    fn predict_shifts_mean() {
        let g = BayesGrid::stock(0.5).unwrap();
        let moved = g.predict(0.1, 0.0);
        assert!((moved.mean() - 0.1).abs() < 1e-3);
        let spread = g.predict(0.0, 0.1);
        assert!(spread.std_dev() > g.std_dev());
        assert!((spread.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn controller_examples() {
        let c = Controller::new(1.0, 0.05, 100.0).unwrap();
        assert_eq!(c.command(0.0), 0.0);
        assert_eq!(c.command(1.0), -1.0);
        assert_eq!(c.command(0.04), 0.0);
        assert_eq!(Controller::new(1.0, 0.0, 0.2).unwrap().command(-3.0), 0.2);
        assert!(Controller::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn still_clock_stays_at_zero() {
        let d = stock();
        let prior = BayesGrid::stock(0.5).unwrap();
        let run =
            simulate_sync_loop(&d, &SkewDynamics::still(1.0), None, &prior, 2_000, 4).unwrap();
        assert!(run.trace.iter().all(|r| r.true_skew == 0.0));
        assert_eq!(run.stats.contained_fraction, 1.0);
        for c in &run.stats.gamma_cells {
            let bound = 4.0 * (c.expected * (1.0 - c.expected) / c.total as f64).sqrt();
            assert!(
                (c.frequency - c.expected).abs() <= bound.max(1e-12),
                "{c:?}"
            );
        }
    }

    #[test]
    fn sync_runs_reproduce() {
        let d = stock();
        let prior = BayesGrid::stock(0.5).unwrap();
        let dynamics = SkewDynamics::stock(1.0);
        let c = Controller::stock(1.0);
        let a = simulate_sync_loop(&d, &dynamics, Some(&c), &prior, 300, 8).unwrap();
        let b = simulate_sync_loop(&d, &dynamics, Some(&c), &prior, 300, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn modulation_schedule_length_checked() {
        let d = stock();
        assert!(matches!(
            simulate_clock_modulation(&d, &SkewDynamics::still(1.0), &[0.0; 3], false, 4, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_amplitude_modulation_is_noop() {
        let d = stock();
        let schedule = phase_schedule(0.0, 3_000, 5);
        let dynamics = SkewDynamics::still(1.0);
        let mut a = simulate_clock_modulation(&d, &dynamics, &schedule, true, 3_000, 6).unwrap();
        let b = simulate_clock_modulation(&d, &dynamics, &schedule, false, 3_000, 6).unwrap();
        a.eve_knows = false;
        assert_eq!(a, b);
    }

    #[test]
    fn dephasing_erases_eve_information() {
        let d = stock();
        let table = dephased_eve_table(&d, 720).unwrap();
        assert!(mutual_information(&table).unwrap() < 1e-12);
    }
}
