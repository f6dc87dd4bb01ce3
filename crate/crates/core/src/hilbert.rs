//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Vectors and operators are stored densely; operators are row-major.
//! Tensor products use the lexicographic index convention: the left factor
//! carries the most significant index, so `(a ⊗ b)[i * dim_b + j] = a[i] * b[j]`.
//! Every module that builds composite spaces (leak ⊗ signal, leak ⊗ probe ⊗
//! signal, signal ⊗ pilot) relies on this ordering.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Global numeric tolerance for unit norms, hermiticity, unitarity,
/// positivity and POVM completeness.
pub const TOL: f64 = 1e-10;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A complex column vector.
#[derive(Clone, PartialEq)]
pub struct CVec {
    entries: Vec<C64>,
}

impl CVec {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("vector dimension must be positive".into()));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Domain("vector has non-finite components".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut entries = alloc::vec![ZERO; dim];
        entries[index] = ONE;
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            entries: alloc::vec![ZERO; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= TOL {
            return Err(Error::Degenerate("cannot normalize a zero vector".into()));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: C64, other: &CVec) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &CVec) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        let mut acc = ZERO;
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc += a.conj() * b;
        }
        Ok(acc)
    }

    pub fn tensor(&self, other: &CVec) -> CVec {
        let mut entries = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.entries {
            for b in &other.entries {
                entries.push(a * b);
            }
        }
        CVec { entries }
    }

    pub fn max_abs_diff(&self, other: &CVec) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

impl fmt::Debug for CVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

/// `⟨a|b⟩` with conjugation on the first argument.
pub fn inner_product(a: &CVec, b: &CVec) -> Result<C64> {
    a.inner(b)
}

/// A square complex matrix acting on a `dim`-dimensional space.
#[derive(Clone, PartialEq)]
pub struct COp {
    dim: usize,
    entries: Vec<C64>,
}

impl COp {
    /// Builds an operator from row-major entries.
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("operator dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Domain("operator has non-finite entries".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(dim, entries)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            dim,
            entries: alloc::vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.entries[i * dim + i] = ONE;
        }
        op
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            op.entries[i * diag.len() + i] = *d;
        }
        op
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &CVec, b: &CVec) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        let dim = a.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for x in a.entries() {
            for y in b.entries() {
                entries.push(x * y.conj());
            }
        }
        Ok(Self { dim, entries })
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &CVec) -> Self {
        Self::outer(v, v).expect("same vector")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.entries.chunks(self.dim)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self.entries[j * n + i].conj());
            }
        }
        Self { dim: n, entries }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &COp) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &COp) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &COp) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = alloc::vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    pub fn apply(&self, v: &CVec) -> Result<CVec> {
        check_dim(self.dim, v.dim())?;
        let entries = self
            .rows()
            .map(|row| {
                let mut acc = ZERO;
                for (a, b) in row.iter().zip(v.entries()) {
                    acc += a * b;
                }
                acc
            })
            .collect();
        Ok(CVec { entries })
    }

    /// `⟨v|A|v⟩`.
    pub fn expectation(&self, v: &CVec) -> Result<C64> {
        v.inner(&self.apply(v)?)
    }

    pub fn tensor(&self, other: &COp) -> COp {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut entries = alloc::vec![ZERO; dim * dim];
        for i in 0..n {
            for j in 0..n {
                let a = self.entries[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        entries[(i * m + k) * dim + (j * m + l)] = a * other.entries[k * m + l];
                    }
                }
            }
        }
        COp { dim, entries }
    }

    pub fn max_abs_diff(&self, other: &COp) -> Result<f64> {
        check_dim(self.dim, other.dim)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `‖A†A − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        let product = self.adjoint().matmul(self).expect("square");
        product
            .max_abs_diff(&COp::identity(self.dim))
            .expect("same dim")
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    /// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let sym = nalgebra::DMatrix::<C64>::from_fn(n, n, |i, j| {
            (self.entries[i * n + j] + self.entries[j * n + i].conj()) * 0.5
        });
        let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue() >= -tol
    }
}

impl fmt::Debug for COp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

/// A tensor factor whose kind is only known at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Vector(CVec),
    Operator(COp),
}

/// Kronecker product of two factors of the same kind.
pub fn tensor(a: &Factor, b: &Factor) -> Result<Factor> {
    match (a, b) {
        (Factor::Vector(x), Factor::Vector(y)) => Ok(Factor::Vector(x.tensor(y))),
        (Factor::Operator(x), Factor::Operator(y)) => Ok(Factor::Operator(x.tensor(y))),
        _ => Err(Error::Kind),
    }
}

/// Per-element diagnostics of a POVM check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElementDiagnostics {
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub elements: Vec<ElementDiagnostics>,
    pub completeness_residual: f64,
    pub tol: f64,
    pub ok: bool,
}

/// A positive-operator-valued measure; element `j` belongs to outcome `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<COp>,
}

impl Povm {
    /// Groups operators into a POVM without checking positivity or
    /// completeness; see [`Povm::validated`].
    pub fn new(elements: Vec<COp>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::Domain("a POVM needs at least one element".into()));
        };
        let dim = first.dim();
        for e in &elements {
            check_dim(dim, e.dim())?;
        }
        Ok(Self { dim, elements })
    }

    /// Like [`Povm::new`] but rejects anything failing [`validate_povm`] at [`TOL`].
    pub fn validated(elements: Vec<COp>) -> Result<Self> {
        let p = Self::new(elements)?;
        let report = p.validate(TOL);
        if !report.ok {
            return Err(Error::Invariant(format!(
                "invalid POVM (completeness residual {:e}, min eigenvalue {:e})",
                report.completeness_residual,
                report
                    .elements
                    .iter()
                    .map(|e| e.min_eigenvalue)
                    .fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(p)
    }

    /// Projective measurement onto an orthonormal family.
    pub fn projective(basis: &[CVec]) -> Result<Self> {
        Self::validated(basis.iter().map(COp::projector).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[COp] {
        &self.elements
    }

    pub fn element(&self, j: usize) -> Result<&COp> {
        self.elements.get(j).ok_or(Error::Index {
            index: j,
            len: self.elements.len(),
        })
    }

    /// `1_n ⊗ M(j)` for every element.
    pub fn lift_left(&self, n: usize) -> Povm {
        let id = COp::identity(n);
        Povm {
            dim: n * self.dim,
            elements: self.elements.iter().map(|m| id.tensor(m)).collect(),
        }
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        validate_povm(self, tol)
    }

    /// Born probabilities of every outcome.
    pub fn probabilities(&self, state: &CVec) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|j| born_probability(state, self, j))
            .collect()
    }
}

/// Diagnoses hermiticity, positivity and completeness; never fails.
pub fn validate_povm(p: &Povm, tol: f64) -> ValidationReport {
    let mut sum = COp::zeros(p.dim);
    let mut elements = Vec::with_capacity(p.len());
    let mut ok = true;
    for m in &p.elements {
        let diag = ElementDiagnostics {
            hermiticity_residual: m.hermiticity_residual(),
            min_eigenvalue: m.min_eigenvalue(),
        };
        ok &= diag.hermiticity_residual <= tol && diag.min_eigenvalue >= -tol;
        elements.push(diag);
        sum = sum.add(m).expect("dims checked at construction");
    }
    let completeness_residual = sum.max_abs_diff(&COp::identity(p.dim)).expect("same dim");
    ok &= completeness_residual <= tol;
    ValidationReport {
        elements,
        completeness_residual,
        tol,
        ok,
    }
}

/// `⟨v|M(j)|v⟩` for a unit state.
///
/// Values within [`TOL`] outside `[0, 1]` are clamped; anything further out
/// is reported as an invariant violation.
pub fn born_probability(state: &CVec, p: &Povm, j: usize) -> Result<f64> {
    if !state.is_unit() {
        return Err(Error::Invariant(format!(
            "state norm {} is not 1",
            state.norm()
        )));
    }
    check_dim(p.dim, state.dim())?;
    let m = p.element(j)?;
    let prob = m.expectation(state)?.re;
    clamp_probability(prob)
}

pub(crate) fn clamp_probability(prob: f64) -> Result<f64> {
    if !(-TOL..=1.0 + TOL).contains(&prob) {
        return Err(Error::Invariant(format!(
            "probability {prob} outside [0, 1]"
        )));
    }
    Ok(prob.clamp(0.0, 1.0))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inner_product_examples() {
        let e0 = CVec::basis(2, 0);
        let e1 = CVec::basis(2, 1);
        assert_eq!(inner_product(&e0, &e0).unwrap(), c(1.0, 0.0));
        assert_eq!(inner_product(&e0, &e1).unwrap(), c(0.0, 0.0));
        let h = core::f64::consts::FRAC_PI_4;
        let d = CVec::from_real(&[h.cos(), h.sin()]).unwrap();
        let ip = inner_product(&e0, &d).unwrap();
        assert!((ip.re - 0.7071068).abs() < 1e-7);
        assert_eq!(ip.im, 0.0);
    }

    #[test]
    fn inner_product_conjugates_first_argument() {
        let a = CVec::new(vec![c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        let b = CVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(a.inner(&b).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let err = inner_product(&CVec::basis(2, 0), &CVec::basis(3, 0)).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn tensor_index_convention() {
        let v = CVec::basis(2, 0).tensor(&CVec::basis(2, 1));
        assert_eq!(v, CVec::basis(4, 1));
        let v = CVec::basis(2, 1).tensor(&CVec::basis(3, 0));
        assert_eq!(v, CVec::basis(6, 3));
        assert_eq!(COp::identity(2).tensor(&COp::identity(2)), COp::identity(4));
    }

    #[test]
    fn operator_tensor_acts_factorwise() {
        let x = COp::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let id = COp::identity(2);
        // (X ⊗ 1)|0⟩|1⟩ = |1⟩|1⟩
        let out = x.tensor(&id).apply(&CVec::basis(4, 1)).unwrap();
        assert_eq!(out, CVec::basis(4, 3));
    }

    #[test]
    fn mixed_kind_tensor_rejected() {
        let v = Factor::Vector(CVec::basis(2, 0));
        let m = Factor::Operator(COp::identity(2));
        assert_eq!(tensor(&v, &m), Err(Error::Kind));
        assert!(matches!(tensor(&m, &m), Ok(Factor::Operator(_))));
    }

    #[test]
    fn validate_identity_singleton() {
        let p = Povm::new(vec![COp::identity(2)]).unwrap();
        let r = validate_povm(&p, TOL);
        assert!(r.ok);
        assert_eq!(r.completeness_residual, 0.0);
    }

    #[test]
    fn validate_reports_overcomplete_sum() {
        let half = COp::identity(2).scale(c(0.6, 0.0));
        let p = Povm::new(vec![half.clone(), half]).unwrap();
        let r = validate_povm(&p, TOL);
        assert!(!r.ok);
        assert!((r.completeness_residual - 0.2).abs() < 1e-12);
        assert!(Povm::validated(p.elements().to_vec()).is_err());
    }

    #[test]
    fn validate_reports_negative_and_nonhermitian_elements() {
        let neg = COp::diagonal(&[c(-0.5, 0.0), c(0.0, 0.0)]);
        let rest = COp::diagonal(&[c(1.5, 0.0), c(1.0, 0.0)]);
        let r = validate_povm(&Povm::new(vec![neg, rest]).unwrap(), TOL);
        assert!(!r.ok);
        assert!((r.elements[0].min_eigenvalue + 0.5).abs() < 1e-12);
        assert_eq!(r.completeness_residual, 0.0);

        let mut skew = COp::zeros(2);
        skew.set(0, 1, c(0.1, 0.0));
        let rest = COp::identity(2).sub(&skew).unwrap();
        let r = validate_povm(&Povm::new(vec![skew, rest]).unwrap(), TOL);
        assert!(!r.ok);
        assert!((r.elements[0].hermiticity_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn born_probability_projective() {
        let p = Povm::projective(&[CVec::basis(2, 0), CVec::basis(2, 1)]).unwrap();
        let e0 = CVec::basis(2, 0);
        assert_eq!(born_probability(&e0, &p, 0).unwrap(), 1.0);
        assert_eq!(born_probability(&e0, &p, 1).unwrap(), 0.0);
    }

    #[test]
    fn born_probability_errors() {
        let p = Povm::projective(&[CVec::basis(2, 0), CVec::basis(2, 1)]).unwrap();
        assert_eq!(
            born_probability(&CVec::basis(2, 0), &p, 2),
            Err(Error::Index { index: 2, len: 2 })
        );
        let fat = CVec::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            born_probability(&fat, &p, 0),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn born_probability_rejects_large_excursions() {
        let big = COp::identity(2).scale(c(1.5, 0.0));
        let p = Povm::new(vec![big]).unwrap();
        assert!(matches!(
            born_probability(&CVec::basis(2, 0), &p, 0),
            Err(Error::Invariant(_))
        ));
        let barely = COp::identity(2).scale(c(1.0 + 1e-12, 0.0));
        let p = Povm::new(vec![barely]).unwrap();
        assert_eq!(born_probability(&CVec::basis(2, 0), &p, 0).unwrap(), 1.0);
    }

    #[test]
    fn unitary_and_hermitian_checks() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let had = COp::from_real_rows(&[&[h, h], &[h, -h]]).unwrap();
        assert!(had.is_unitary(TOL));
        assert!(had.is_hermitian(TOL));
        let not_unitary = COp::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(!not_unitary.is_unitary(TOL));
    }

    #[test]
    fn hermitian_eigenvalues_of_complex_matrix() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = COp::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let eig = m.hermitian_eigenvalues();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }
}
