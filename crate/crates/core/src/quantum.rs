//! Dense complex linear algebra for the emitter ⊗ truncated-Fock space.
//!
//! Basis ordering: the two-level system comes first in the tensor product and
//! its excited state is index 0, so `σ_z = diag(+1, −1)`. A product state
//! `|tls, n⟩` sits at index `tls · (N + 1) + n`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn try_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Largest entrywise modulus of `M − M†`.
    pub fn hermiticity_error(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("hermiticity of a non-square matrix".into()));
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        Ok(worst)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Eigenvalues of the Hermitian part `(M + M†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
        }
        let m = self.to_nalgebra();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_matmul(rhs).expect("matrix product dimensions")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product of two square matrices.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::DimensionMismatch("tensor product needs square factors".into()));
    }
    let (na, nb) = (a.rows, b.rows);
    Ok(ComplexMatrix::from_fn(na * nb, na * nb, |i, j| {
        a[(i / nb, j / nb)] * b[(i % nb, j % nb)]
    }))
}

/// Photon annihilation operator truncated at `cutoff` photons.
pub fn annihilation_operator(cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff < 1 {
        return Err(Error::invalid("photon cutoff must be at least 1"));
    }
    let mut a = ComplexMatrix::zeros(cutoff + 1, cutoff + 1);
    for n in 1..=cutoff {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Two-level operators with the excited state first.
#[derive(Debug, Clone)]
pub struct PauliOperators {
    pub sigma_z: ComplexMatrix,
    pub sigma_plus: ComplexMatrix,
    pub sigma_minus: ComplexMatrix,
}

pub fn pauli_operators() -> PauliOperators {
    let sigma_z = ComplexMatrix::diagonal(&[1.0, -1.0]);
    let mut sigma_minus = ComplexMatrix::zeros(2, 2);
    sigma_minus[(1, 0)] = ONE;
    let sigma_plus = sigma_minus.dagger();
    PauliOperators { sigma_z, sigma_plus, sigma_minus }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tls {
    Excited,
    Ground,
}

/// Emitter ⊗ cavity-mode space with the field truncated at `fock_cutoff` photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpace {
    fock_cutoff: usize,
}

impl HilbertSpace {
    pub fn new(fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 1 {
            return Err(Error::invalid("photon cutoff must be at least 1"));
        }
        Ok(Self { fock_cutoff })
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn tls_dim(&self) -> usize {
        2
    }

    pub fn total_dim(&self) -> usize {
        2 * (self.fock_cutoff + 1)
    }

    pub fn index(&self, tls: Tls, photons: usize) -> usize {
        let t = match tls {
            Tls::Excited => 0,
            Tls::Ground => 1,
        };
        t * (self.fock_cutoff + 1) + photons
    }

    pub fn operators(&self) -> SystemOperators {
        SystemOperators::new(*self)
    }
}

/// Operators lifted to the full space.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub space: HilbertSpace,
    /// `I ⊗ a`
    pub a: ComplexMatrix,
    /// `I ⊗ a†`
    pub a_dag: ComplexMatrix,
    /// `I ⊗ a†a`
    pub number: ComplexMatrix,
    /// `σ₋ ⊗ I`
    pub sigma_minus: ComplexMatrix,
    /// `σ₊ ⊗ I`
    pub sigma_plus: ComplexMatrix,
    /// `σ_z ⊗ I`
    pub sigma_z: ComplexMatrix,
    /// `σ₊σ₋ ⊗ I`
    pub excited: ComplexMatrix,
    pub identity: ComplexMatrix,
}

impl SystemOperators {
    fn new(space: HilbertSpace) -> Self {
        let n = space.fock_cutoff;
        let i_tls = ComplexMatrix::identity(2);
        let i_fock = ComplexMatrix::identity(n + 1);
        let a_f = annihilation_operator(n).expect("cutoff validated by HilbertSpace");
        let p = pauli_operators();
        let lift_f = |m: &ComplexMatrix| tensor(&i_tls, m).expect("square");
        let lift_t = |m: &ComplexMatrix| tensor(m, &i_fock).expect("square");
        let a = lift_f(&a_f);
        let a_dag = a.dagger();
        let number = &a_dag * &a;
        let sigma_minus = lift_t(&p.sigma_minus);
        let sigma_plus = lift_t(&p.sigma_plus);
        let excited = &sigma_plus * &sigma_minus;
        Self {
            space,
            a,
            a_dag,
            number,
            sigma_minus,
            sigma_plus,
            sigma_z: lift_t(&p.sigma_z),
            excited,
            identity: ComplexMatrix::identity(space.total_dim()),
        }
    }
}

pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// A validated state: unit trace, Hermitian and positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(space: HilbertSpace, matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(space, matrix, TRACE_TOLERANCE, HERMITICITY_TOLERANCE, EIGENVALUE_FLOOR)
    }

    pub fn with_tolerances(
        space: HilbertSpace,
        matrix: ComplexMatrix,
        trace_tol: f64,
        herm_tol: f64,
        eig_floor: f64,
    ) -> Result<Self> {
        let d = space.total_dim();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, space has dimension {d}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > trace_tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let herm = matrix.hermiticity_error()?;
        if herm > herm_tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let min_ev = matrix.hermitian_eigenvalues()?[0];
        if min_ev < eig_floor {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev:e}")));
        }
        Ok(Self { space, matrix })
    }

    /// The pure product state `|tls, photons⟩⟨tls, photons|`.
    pub fn basis_state(space: HilbertSpace, tls: Tls, photons: usize) -> Result<Self> {
        if photons > space.fock_cutoff {
            return Err(Error::invalid(format!(
                "{photons} photons exceeds the cutoff {}",
                space.fock_cutoff
            )));
        }
        let d = space.total_dim();
        let mut m = ComplexMatrix::zeros(d, d);
        let k = space.index(tls, photons);
        m[(k, k)] = ONE;
        Ok(Self { space, matrix: m })
    }

    pub fn ground(space: HilbertSpace) -> Self {
        Self::basis_state(space, Tls::Ground, 0).expect("vacuum is always in range")
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// `tr(ρ O)`.
pub fn expectation(rho: &DensityMatrix, op: &ComplexMatrix) -> Result<C64> {
    trace_product(rho.matrix(), op)
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.rows() != b.cols() || a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "tr of {}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut acc = ZERO;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}
