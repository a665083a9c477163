//! Qubit and two-qubit states, Pauli operators and entanglement metrics.
//!
//! Conventions used throughout the crate:
//! - computational basis |H⟩ = (1, 0), |V⟩ = (0, 1), with σ_z|H⟩ = |H⟩;
//! - two-qubit basis order |HH⟩, |HV⟩, |VH⟩, |VV⟩ (arm 1 is the major index);
//! - correlation matrix T_ij = −Tr[ρ (σ_i ⊗ σ_j)], so that
//!   ρ = (𝟙⊗𝟙 − Σ T_ij σ_i⊗σ_j)/4 when the local Bloch vectors vanish.

use nalgebra::{Matrix3, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_deviation, hermitian_eigenvalues, kron, psd_sqrt, trace4, trace_product, CMatrix2,
    CMatrix4, C64, I, ONE, ZERO,
};

/// Tolerance for algebraic identities in double precision.
pub const EPS: f64 = 1e-9;

/// The fixed operators 𝟙, σ_x, σ_y, σ_z.
pub struct PauliBasis;

impl PauliBasis {
    pub fn identity() -> CMatrix2 {
        CMatrix2::identity()
    }

    pub fn x() -> CMatrix2 {
        CMatrix2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn y() -> CMatrix2 {
        CMatrix2::new(ZERO, -I, I, ZERO)
    }

    pub fn z() -> CMatrix2 {
        CMatrix2::new(ONE, ZERO, ZERO, -ONE)
    }

    /// `[𝟙, σ_x, σ_y, σ_z]`.
    pub fn all() -> [CMatrix2; 4] {
        [Self::identity(), Self::x(), Self::y(), Self::z()]
    }

    /// `[σ_x, σ_y, σ_z]`.
    pub fn sigmas() -> [CMatrix2; 3] {
        [Self::x(), Self::y(), Self::z()]
    }

    /// σ_k ⊗ σ_l for k, l ∈ {0 (identity), 1, 2, 3}.
    pub fn product(k: usize, l: usize) -> CMatrix4 {
        let ops = Self::all();
        kron(&ops[k], &ops[l])
    }
}

/// A point of the closed unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(r: Vector3<f64>) -> Result<Self> {
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = r.norm();
        if norm > 1.0 + EPS {
            return Err(Error::BlochOutOfBall { norm });
        }
        Ok(Self(r))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// ρ = (𝟙 + r·σ)/2.
    pub fn to_state(&self) -> QubitState {
        let [sx, sy, sz] = PauliBasis::sigmas();
        let r = &self.0;
        let rho = (CMatrix2::identity() + sx.scale(r.x) + sy.scale(r.y) + sz.scale(r.z)).scale(0.5);
        QubitState { rho }
    }
}

/// Single-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    rho: CMatrix2,
}

impl QubitState {
    pub fn new(rho: CMatrix2) -> Result<Self> {
        if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = hermitian_deviation(&rho);
        if dev > EPS {
            return Err(Error::NotHermitian(dev));
        }
        let tr = (rho[(0, 0)] + rho[(1, 1)]).re;
        if (tr - 1.0).abs() > EPS {
            return Err(Error::BadTrace(tr));
        }
        // For a unit-trace Hermitian 2×2, the smaller eigenvalue is (1 − |r|)/2.
        let state = Self { rho };
        let min_eig = 0.5 * (1.0 - state.bloch_components().norm());
        if min_eig < -EPS {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(state)
    }

    pub fn rho(&self) -> &CMatrix2 {
        &self.rho
    }

    fn bloch_components(&self) -> Vector3<f64> {
        let s = PauliBasis::sigmas();
        Vector3::from_fn(|i, _| (self.rho * s[i]).trace().re)
    }

    /// r_i = Tr[ρ σ_i].
    pub fn bloch_vector(&self) -> BlochVector {
        let r = self.bloch_components();
        // Valid states have |r| ≤ 1 + 2ε; rescale the rounding excess away.
        let n = r.norm();
        BlochVector(if n > 1.0 { r / n } else { r })
    }
}

/// Two-qubit density matrix in the |HH⟩, |HV⟩, |VH⟩, |VV⟩ basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: CMatrix4,
}

impl TwoQubitState {
    /// Validates Hermiticity, unit trace and positivity within [`EPS`].
    pub fn new(rho: CMatrix4) -> Result<Self> {
        if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = hermitian_deviation(&rho);
        if dev > EPS {
            return Err(Error::NotHermitian(dev));
        }
        let tr = trace4(&rho).re;
        if (tr - 1.0).abs() > EPS {
            return Err(Error::BadTrace(tr));
        }
        let min_eig = hermitian_eigenvalues(&rho)[0];
        if min_eig < -EPS {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { rho })
    }

    /// Trusted constructor for matrices that are density matrices by construction.
    pub(crate) fn from_trusted(rho: CMatrix4) -> Self {
        Self { rho }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) nonzero ket.
    pub fn pure(ket: &Vector4<C64>) -> Result<Self> {
        let norm = ket.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter("ket must be nonzero and finite".into()));
        }
        let psi = ket.unscale(norm);
        Ok(Self { rho: psi * psi.adjoint() })
    }

    pub fn maximally_mixed() -> Self {
        Self { rho: CMatrix4::identity().scale(0.25) }
    }

    /// (|HH⟩ + e^{iφ}|VV⟩)/√2.
    pub fn phi_plus(phase: f64) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ket = Vector4::new(C64::new(h, 0.0), ZERO, ZERO, C64::from_polar(h, phase));
        Self { rho: ket * ket.adjoint() }
    }

    /// (|HV⟩ − |VH⟩)/√2.
    pub fn singlet() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ket = Vector4::new(ZERO, C64::new(h, 0.0), C64::new(-h, 0.0), ZERO);
        Self { rho: ket * ket.adjoint() }
    }

    /// (1 − w)·self + w·other.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(Self { rho: self.rho.scale(1.0 - w) + other.rho.scale(w) })
    }

    /// Isotropic admixture: (1 − mixing)·self + mixing·𝟙/4.
    pub fn depolarized(&self, mixing: f64) -> Result<Self> {
        self.mix(&Self::maximally_mixed(), mixing)
    }

    pub fn rho(&self) -> &CMatrix4 {
        &self.rho
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vector4<f64> {
        hermitian_eigenvalues(&self.rho)
    }

    /// c_kl = Tr[ρ (σ_k ⊗ σ_l)], k, l ∈ {0, x, y, z}; c_00 = 1.
    pub fn pauli_coefficients(&self) -> [[f64; 4]; 4] {
        let mut c = [[0.0; 4]; 4];
        for (k, row) in c.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                *v = trace_product(&self.rho, &PauliBasis::product(k, l)).re;
            }
        }
        c
    }

    /// Inverse of [`pauli_coefficients`](Self::pauli_coefficients); checks positivity.
    pub fn from_pauli_coefficients(c: &[[f64; 4]; 4]) -> Result<Self> {
        let mut rho = CMatrix4::zeros();
        for (k, row) in c.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    rho += PauliBasis::product(k, l).scale(v);
                }
            }
        }
        Self::new(rho.scale(0.25))
    }

    /// T_ij = −Tr[ρ (σ_i ⊗ σ_j)].
    pub fn correlation_matrix(&self) -> Matrix3<f64> {
        let c = self.pauli_coefficients();
        Matrix3::from_fn(|i, j| -c[i + 1][j + 1])
    }

    /// ρ = (𝟙⊗𝟙 − Σ T_ij σ_i⊗σ_j)/4; fails when the result is not PSD.
    pub fn from_correlation(t: &Matrix3<f64>) -> Result<Self> {
        let mut c = [[0.0; 4]; 4];
        c[0][0] = 1.0;
        for i in 0..3 {
            for j in 0..3 {
                c[i + 1][j + 1] = -t[(i, j)];
            }
        }
        Self::from_pauli_coefficients(&c)
    }

    /// Bloch vectors of the two single-photon marginals.
    pub fn local_bloch_vectors(&self) -> (Vector3<f64>, Vector3<f64>) {
        let c = self.pauli_coefficients();
        (Vector3::new(c[1][0], c[2][0], c[3][0]), Vector3::new(c[0][1], c[0][2], c[0][3]))
    }

    /// Wootters concurrence.
    pub fn concurrence(&self) -> f64 {
        let yy = PauliBasis::product(2, 2);
        let tilde = yy * self.rho.map(|z| z.conj()) * yy;
        let root = psd_sqrt(&self.rho);
        let m = root * tilde * root;
        // λ_i are square roots of the eigenvalues of ρ ρ̃, which equal those of √ρ ρ̃ √ρ.
        let ev = hermitian_eigenvalues(&m);
        let l: Vec<f64> = ev.iter().rev().map(|&x| x.max(0.0).sqrt()).collect();
        (l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0)
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.rho, &self.rho).re
    }

    /// (4/3)(1 − Tr ρ²): 0 for pure states, 1 for 𝟙/4.
    pub fn linear_entropy(&self) -> f64 {
        (4.0 / 3.0 * (1.0 - self.purity())).clamp(0.0, 1.0)
    }

    /// Uhlmann fidelity (Tr √(√a b √a))².
    pub fn fidelity(&self, other: &Self) -> f64 {
        let root = psd_sqrt(&self.rho);
        let inner = psd_sqrt(&(root * other.rho * root));
        trace4(&inner).re.powi(2).clamp(0.0, 1.0)
    }

    /// arg ⟨VV|ρ|HH⟩, which equals φ for (|HH⟩ + e^{iφ}|VV⟩)/√2.
    pub fn coherence_phase(&self) -> f64 {
        self.rho[(3, 0)].arg()
    }
}
