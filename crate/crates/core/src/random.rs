//! Seeded random fixtures: states, unitaries, POVMs and whole models.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::hilbert::{COp, CVec, Povm, C64};
use crate::models::{MeasurementCommand, MeasurementModel, ProbeCommand, ProbeModel, ProbeSpec};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Haar-distributed unit vector.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVec {
    let v = CVec::new((0..dim).map(|_| gaussian(rng)).collect()).expect("dim > 0");
    v.normalized()
        .expect("a Gaussian vector is nonzero almost surely")
}

/// Unitary from Gram–Schmidt on the columns of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> COp {
    let mut columns: Vec<CVec> = Vec::with_capacity(dim);
    while columns.len() < dim {
        let mut v = CVec::new((0..dim).map(|_| gaussian(rng)).collect()).expect("dim > 0");
        for c in &columns {
            let coeff = c.inner(&v).expect("same dim");
            v = v.add_scaled(-coeff, c).expect("same dim");
        }
        // Reject the (measure-zero) nearly dependent draw.
        if v.norm() > 1e-6 {
            columns.push(v.normalized().expect("nonzero"));
        }
    }
    let mut u = COp::zeros(dim);
    for (j, c) in columns.iter().enumerate() {
        for (i, x) in c.entries().iter().enumerate() {
            u.set(i, j, *x);
        }
    }
    u
}

/// Random `outcomes`-element POVM on `dim`.
///
/// The first `dim` columns of a random unitary of size `dim · outcomes` form
/// an isometry `V`; element `j` sums `r†r` over the `j`-th block of `dim`
/// rows `r`, so the elements add up to `V†V = 1`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize) -> Povm {
    let big = dim * outcomes;
    let u = random_unitary(rng, big);
    let elements = (0..outcomes)
        .map(|j| {
            let mut m = COp::zeros(dim);
            for row in j * dim..(j + 1) * dim {
                for a in 0..dim {
                    for b in 0..dim {
                        let add = u.get(row, a).conj() * u.get(row, b);
                        m.set(a, b, m.get(a, b) + add);
                    }
                }
            }
            m
        })
        .collect();
    Povm::new(elements).expect("equal dims")
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if prefix.is_empty() {
                i.to_string()
            } else {
                format!("{prefix}{i}")
            }
        })
        .collect()
}

/// Random states and POVMs. Alice's commands are `0..`, measurer commands
/// `e0..`, outcomes `j0..`.
pub fn random_measurement_model<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    alice: usize,
    commands: usize,
    outcomes: usize,
) -> Result<MeasurementModel> {
    let states = labels("", alice)
        .into_iter()
        .map(|l| (l, random_state(rng, dim)))
        .collect();
    let outcome_labels = labels("j", outcomes);
    let commands = labels("e", commands)
        .into_iter()
        .map(|label| MeasurementCommand {
            label,
            povm: random_povm(rng, dim, outcomes),
            outcome_labels: outcome_labels.clone(),
        })
        .collect();
    MeasurementModel::new("random", states, commands)
}

/// Random probe model without a leak sector. Eve's outcomes are `j0..`,
/// Bob's are Alice's command labels.
pub fn random_probe_model<R: Rng + ?Sized>(
    rng: &mut R,
    sig_dim: usize,
    probe_dim: usize,
    alice: usize,
    eve_commands: usize,
    eve_outcomes: usize,
) -> Result<ProbeModel> {
    let alice_labels = labels("", alice);
    let states = alice_labels
        .iter()
        .map(|l| (l.clone(), random_state(rng, sig_dim)))
        .collect();
    let probe_start = random_state(rng, probe_dim);
    let eve_outcome_labels = labels("j", eve_outcomes);
    let eve_commands = labels("e", eve_commands)
        .into_iter()
        .map(|label| ProbeCommand {
            label,
            unitary: random_unitary(rng, probe_dim * sig_dim),
            povm: random_povm(rng, probe_dim, eve_outcomes),
            outcome_labels: eve_outcome_labels.clone(),
        })
        .collect();
    let bob_povm = random_povm(rng, sig_dim, alice);
    ProbeModel::new(ProbeSpec {
        name: "random-probe".into(),
        sig_dim,
        probe_dim,
        leak_dim: 1,
        states,
        probe_start,
        eve_commands,
        bob_povm,
        bob_outcome_labels: alice_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::TOL;
    use crate::rng::substream;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = substream(1, 0);
        for dim in 1..6 {
            assert!(random_unitary(&mut rng, dim).unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn random_povm_validates() {
        let mut rng = substream(2, 0);
        for (dim, n) in [(2, 2), (2, 3), (3, 4), (4, 2)] {
            assert!(random_povm(&mut rng, dim, n).validate(TOL).ok);
        }
    }

    #[test]
    fn random_models_construct() {
        let mut rng = substream(3, 0);
        random_measurement_model(&mut rng, 3, 3, 2, 3).unwrap();
        random_probe_model(&mut rng, 2, 2, 2, 2, 3).unwrap();
    }

    #[test]
    fn fixtures_are_seeded() {
        let a = random_state(&mut substream(9, 4), 3);
        let b = random_state(&mut substream(9, 4), 3);
        assert_eq!(a, b);
    }
}
