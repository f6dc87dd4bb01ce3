//! Unambiguous discrimination of two pure states.
//!
//! For equal priors the optimal zero-error measurement fails (answers
//! `inconclusive`) with probability `S = |⟨v0|v1⟩|`. [`usd_povm`] builds it in
//! closed form; [`usd_oracle`] searches the zero-error family directly and is
//! used to check the closed form.

use alloc::format;
use alloc::vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{check_dim, COp, CVec, Povm, C64, TOL};

/// Two states to tell apart, with the prior of `v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct UsdSpec {
    v0: CVec,
    v1: CVec,
    prior0: f64,
    overlap: f64,
}

impl UsdSpec {
    pub fn new(v0: CVec, v1: CVec) -> Result<Self> {
        check_dim(v0.dim(), v1.dim())?;
        if !v0.is_unit() || !v1.is_unit() {
            return Err(Error::Invariant("USD states must be unit vectors".into()));
        }
        let overlap = v0.inner(&v1)?.norm();
        if overlap >= 1.0 - TOL {
            return Err(Error::Degenerate(format!(
                "states with overlap {overlap} cannot be discriminated"
            )));
        }
        Ok(Self {
            v0,
            v1,
            prior0: 0.5,
            overlap,
        })
    }

    pub fn with_prior(mut self, prior0: f64) -> Result<Self> {
        if !(prior0 > 0.0 && prior0 < 1.0) {
            return Err(Error::Domain(format!("prior {prior0} must lie in (0, 1)")));
        }
        self.prior0 = prior0;
        Ok(self)
    }

    pub fn v0(&self) -> &CVec {
        &self.v0
    }

    pub fn v1(&self) -> &CVec {
        &self.v1
    }

    pub fn prior0(&self) -> f64 {
        self.prior0
    }

    /// `S = |⟨v0|v1⟩|`.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }
}

/// Component of `v` orthogonal to `against`, normalized, inside their span.
fn orthogonal_in_span(v: &CVec, against: &CVec) -> Result<CVec> {
    let coeff = against.inner(v)?;
    v.add_scaled(-coeff, against)?.normalized()
}

/// Equal-prior optimal USD POVM, elements ordered `0`, `1`, `inconclusive`.
///
/// `M(0) = c|v1⊥⟩⟨v1⊥|`, `M(1) = c|v0⊥⟩⟨v0⊥|`, `c = 1/(1+S)`,
/// `M(inc) = 1 − M(0) − M(1)`, where `v1⊥` is the part of `v0` orthogonal
/// to `v1` and vice versa. Works in any dimension.
pub fn usd_povm(spec: &UsdSpec) -> Result<Povm> {
    if spec.prior0 != 0.5 {
        return Err(Error::Domain(
            "closed-form USD covers equal priors only; use usd_oracle".into(),
        ));
    }
    let c = C64::new(1.0 / (1.0 + spec.overlap), 0.0);
    let not_v1 = orthogonal_in_span(&spec.v0, &spec.v1)?;
    let not_v0 = orthogonal_in_span(&spec.v1, &spec.v0)?;
    let m0 = COp::projector(&not_v1).scale(c);
    let m1 = COp::projector(&not_v0).scale(c);
    let inc = COp::identity(spec.v0.dim()).sub(&m0)?.sub(&m1)?;
    Povm::validated(vec![m0, m1, inc])
}

/// Average inconclusive probability of the closed-form measurement, from
/// Born probabilities.
pub fn usd_failure_probability(spec: &UsdSpec) -> Result<f64> {
    let povm = usd_povm(spec)?;
    let f0 = crate::hilbert::born_probability(&spec.v0, &povm, 2)?;
    let f1 = crate::hilbert::born_probability(&spec.v1, &povm, 2)?;
    Ok(spec.prior0 * f0 + (1.0 - spec.prior0) * f1)
}

/// Brute-force search over zero-error two-state measurements in dimension 2.
///
/// The candidates are `a|v1⊥⟩⟨v1⊥| + b|v0⊥⟩⟨v0⊥|` with the inconclusive
/// element `1 − ·` required to be positive. `a` runs over a uniform grid of
/// `resolution + 1` points in `[0, 1]`; for each `a` the largest feasible `b`
/// is found by bisection on the smallest eigenvalue of the inconclusive
/// element, computed from the 2×2 characteristic polynomial. Returns the
/// smallest average failure probability found.
pub fn usd_oracle(spec: &UsdSpec, resolution: usize) -> Result<f64> {
    check_dim(2, spec.v0.dim())?;
    let resolution = resolution.max(1);
    // In two dimensions the orthogonal complement of (x, y) is (−ȳ, x̄).
    let perp = |v: &CVec| [-v.entries()[1].conj(), v.entries()[0].conj()];
    let p = perp(&spec.v1);
    let q = perp(&spec.v0);
    let hit0 = (p[0].conj() * spec.v0.entries()[0] + p[1].conj() * spec.v0.entries()[1]).norm_sqr();
    let hit1 = (q[0].conj() * spec.v1.entries()[0] + q[1].conj() * spec.v1.entries()[1]).norm_sqr();

    let min_eig = |a: f64, b: f64| -> f64 {
        // I − a|p⟩⟨p| − b|q⟩⟨q|
        let m00 = 1.0 - a * p[0].norm_sqr() - b * q[0].norm_sqr();
        let m11 = 1.0 - a * p[1].norm_sqr() - b * q[1].norm_sqr();
        let m01 = -(p[0] * p[1].conj()) * a - (q[0] * q[1].conj()) * b;
        let half_trace = 0.5 * (m00 + m11);
        let disc = (0.25 * (m00 - m11) * (m00 - m11) + m01.norm_sqr()).sqrt();
        half_trace - disc
    };

    let mut best_conclusive = 0.0f64;
    for i in 0..=resolution {
        let a = i as f64 / resolution as f64;
        if min_eig(a, 0.0) < 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if min_eig(a, hi) >= 0.0 {
            lo = hi;
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if min_eig(a, mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let conclusive = spec.prior0 * a * hit0 + (1.0 - spec.prior0) * lo * hit1;
        best_conclusive = best_conclusive.max(conclusive);
    }
    Ok(1.0 - best_conclusive)
}
