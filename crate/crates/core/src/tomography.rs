//! Maximum-likelihood state reconstruction and ancilla-assisted extraction of Λ.
//!
//! The density matrix is parameterized as ρ = L·L†/Tr[L·L†] with L lower
//! triangular, so every iterate is a physical state. The objective is the
//! Poisson negative log-likelihood with means μ_i = flux·Tr[ρΠ_i] + accidentals.

use nalgebra::{Cholesky, DVector, Matrix3};
use serde::Serialize;

use crate::channel::{SignedSvd, UnitalChannel};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, project_to_density, trace4, trace_product, CMatrix4, C64};
use crate::measurement::{is_tomographically_complete, projector_rank, CountSet, MeasurementSetting};
use crate::optimize::{minimize, BfgsOptions};
use crate::qubit::{PauliBasis, TwoQubitState};

/// Floor applied to μ_i inside the logarithm.
pub const MU_FLOOR: f64 = 1e-12;

/// Default cap on the condition number of the input correlation matrix.
pub const DEFAULT_MAX_CONDITION: f64 = 1e3;

/// Strictly lower entries of a 4×4 matrix, row by row.
const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// 16 reals: the 4 diagonal entries of L followed by (re, im) of its 6 strictly lower entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholeskyParams(pub [f64; 16]);

impl CholeskyParams {
    pub fn lower(&self) -> CMatrix4 {
        let t = &self.0;
        let mut l = CMatrix4::zeros();
        for i in 0..4 {
            l[(i, i)] = C64::new(t[i], 0.0);
        }
        for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
            l[(r, c)] = C64::new(t[4 + 2 * k], t[5 + 2 * k]);
        }
        l
    }

    pub fn from_lower(l: &CMatrix4) -> Self {
        let mut t = [0.0; 16];
        for i in 0..4 {
            t[i] = l[(i, i)].re;
        }
        for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
            t[4 + 2 * k] = l[(r, c)].re;
            t[5 + 2 * k] = l[(r, c)].im;
        }
        Self(t)
    }

    /// Cholesky factor of a slightly regularized copy of ρ, so that the factor is full rank.
    pub fn from_state(state: &TwoQubitState) -> Self {
        let delta = 1e-4;
        let reg = state.rho().scale(1.0 - delta) + CMatrix4::identity().scale(delta / 4.0);
        let herm = (reg + reg.adjoint()).scale(0.5);
        let l = Cholesky::new(herm).map(|c| c.l()).unwrap_or_else(|| CMatrix4::identity().scale(0.5));
        Self::from_lower(&l)
    }

    /// ρ = L·L†/Tr[L·L†]; `None` only for the all-zero parameter vector.
    pub fn state(&self) -> Option<TwoQubitState> {
        let l = self.lower();
        let a = l * l.adjoint();
        let tr = trace4(&a).re;
        (tr > 0.0 && tr.is_finite()).then(|| {
            let rho = a.unscale(tr);
            TwoQubitState::from_trusted((rho + rho.adjoint()).scale(0.5))
        })
    }
}

/// Poisson likelihood of counts under the Cholesky parameterization.
#[derive(Debug, Clone)]
pub struct Likelihood {
    projectors: Vec<CMatrix4>,
    counts: Vec<f64>,
    flux: f64,
    accidentals: f64,
    /// Objective is divided by this (total counts) to keep its scale O(1).
    scale: f64,
}

impl Likelihood {
    pub fn new(settings: &[MeasurementSetting], counts: &[f64], flux: f64, accidentals: f64) -> Result<Self> {
        if settings.len() != counts.len() {
            return Err(Error::InvalidCounts(format!("{} settings but {} counts", settings.len(), counts.len())));
        }
        if counts.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(Error::InvalidCounts("counts must be finite and nonnegative".into()));
        }
        if !(flux.is_finite() && flux > 0.0) || !(accidentals.is_finite() && accidentals >= 0.0) {
            return Err(Error::InvalidParameter("flux must be positive, accidentals nonnegative".into()));
        }
        if !is_tomographically_complete(settings) {
            return Err(Error::IncompleteSettings(projector_rank(settings)));
        }
        let total: f64 = counts.iter().sum();
        Ok(Self {
            projectors: settings.iter().map(|s| s.projector()).collect(),
            counts: counts.to_vec(),
            flux,
            accidentals,
            scale: if total > 0.0 { total } else { 1.0 },
        })
    }

    fn means(&self, rho: &CMatrix4) -> impl Iterator<Item = f64> + '_ {
        let rho = *rho;
        self.projectors.iter().map(move |p| self.flux * trace_product(&rho, p).re + self.accidentals)
    }

    /// Σ [μ_i − n_i log μ_i], the reported negative log-likelihood (constants dropped).
    pub fn neg_log_likelihood(&self, state: &TwoQubitState) -> f64 {
        self.means(state.rho())
            .zip(&self.counts)
            .map(|(mu, &n)| mu - if n > 0.0 { n * mu.max(MU_FLOOR).ln() } else { 0.0 })
            .sum()
    }

    /// Normalized deviance-form objective and its gradient in the 16 real parameters.
    ///
    /// Uses Σ [μ − n − n log(μ/n)] / N, which differs from the negative
    /// log-likelihood by a constant but avoids cancellation near the optimum.
    pub fn objective(&self, params: &[f64]) -> (f64, [f64; 16]) {
        let theta = CholeskyParams(params.try_into().expect("16 parameters"));
        let l = theta.lower();
        let a = l * l.adjoint();
        let s = trace4(&a).re;
        if !(s > 0.0 && s.is_finite()) {
            return (f64::INFINITY, [0.0; 16]);
        }

        let mut value = 0.0;
        let mut weights = CMatrix4::zeros();
        let mut c = 0.0;
        for (p, &n) in self.projectors.iter().zip(&self.counts) {
            let t = trace_product(&a, p).re;
            let mu = self.flux * t / s + self.accidentals;
            let floored = mu.max(MU_FLOOR);
            value += mu - n;
            if n > 0.0 {
                value -= n * (floored / n).ln();
            }
            let dmu = if mu > MU_FLOOR { 1.0 - n / mu } else { 1.0 };
            let g = dmu * self.flux / s;
            weights += p.scale(g);
            c += g * t / s;
        }
        value /= self.scale;

        // ∂/∂L of Σ g_i (Tr[AΠ_i] − (t_i/s)·Tr[A]) = 2·(W − c𝟙)·L, read off on the lower triangle.
        let m = (weights - CMatrix4::identity().scale(c)) * l;
        let mut grad = [0.0; 16];
        for i in 0..4 {
            grad[i] = 2.0 * m[(i, i)].re / self.scale;
        }
        for (k, &(r, col)) in OFF_DIAGONAL.iter().enumerate() {
            grad[4 + 2 * k] = 2.0 * m[(r, col)].re / self.scale;
            grad[5 + 2 * k] = 2.0 * m[(r, col)].im / self.scale;
        }
        (value, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { gradient_tol: 1e-8, max_iterations: 5000 }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub state: TwoQubitState,
    pub neg_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
    /// Normalized objective after each optimizer step.
    pub objective_trace: Vec<f64>,
}

/// Linear inversion of probabilities (n_i − accidentals)/flux, projected to a
/// density matrix; falls back to 𝟙/4 when the estimate is far from physical.
pub fn linear_inversion(
    settings: &[MeasurementSetting],
    counts: &[f64],
    flux: f64,
    accidentals: f64,
) -> TwoQubitState {
    let fallback = TwoQubitState::maximally_mixed;
    if settings.len() < 16 {
        return fallback();
    }
    // Design matrix M_{i,kl} = Tr[Π_i σ_k⊗σ_l]/4 in the Pauli coordinates of ρ.
    let design = nalgebra::DMatrix::from_fn(settings.len(), 16, |i, kl| {
        trace_product(&settings[i].projector(), &PauliBasis::product(kl / 4, kl % 4)).re / 4.0
    });
    let probs = nalgebra::DVector::from_iterator(settings.len(), counts.iter().map(|n| (n - accidentals) / flux));
    let Ok(coeffs) = design.svd(true, true).solve(&probs, 1e-12) else {
        return fallback();
    };
    let c00 = coeffs[0];
    if !(c00 > 1e-6 && c00.is_finite()) {
        return fallback();
    }
    let mut rho = CMatrix4::zeros();
    for kl in 0..16 {
        rho += PauliBasis::product(kl / 4, kl % 4).scale(coeffs[kl] / c00 / 4.0);
    }
    if hermitian_eigenvalues(&rho)[0] < -0.5 {
        return fallback();
    }
    match project_to_density(&rho) {
        Some(p) => TwoQubitState::from_trusted(p),
        None => fallback(),
    }
}

/// Maximum-likelihood reconstruction from (possibly non-integer) counts.
pub fn mle_from_counts(
    settings: &[MeasurementSetting],
    counts: &[f64],
    flux: f64,
    accidentals: f64,
    opts: &MleOptions,
) -> Result<MleResult> {
    let model = Likelihood::new(settings, counts, flux, accidentals)?;
    let start = CholeskyParams::from_state(&linear_inversion(settings, counts, flux, accidentals));
    let bfgs = BfgsOptions { gradient_tol: opts.gradient_tol, max_iterations: opts.max_iterations };
    let outcome = minimize(
        |x: &DVector<f64>| {
            let (v, g) = model.objective(x.as_slice());
            (v, DVector::from_column_slice(&g))
        },
        DVector::from_column_slice(&start.0),
        &bfgs,
    );
    let params = CholeskyParams(outcome.x.as_slice().try_into().expect("16 parameters"));
    let state = params.state().ok_or(Error::NonFinite)?;
    Ok(MleResult {
        neg_log_likelihood: model.neg_log_likelihood(&state),
        state,
        iterations: outcome.iterations,
        converged: outcome.converged,
        final_gradient_norm: outcome.gradient_norm,
        objective_trace: outcome.trace,
    })
}

/// Maximum-likelihood reconstruction of a sampled [`CountSet`].
pub fn mle_reconstruct(counts: &CountSet, settings: &[MeasurementSetting], opts: &MleOptions) -> Result<MleResult> {
    if counts.records.len() != settings.len()
        || counts.records.iter().zip(settings).any(|(r, s)| r.setting != *s)
    {
        return Err(Error::InvalidCounts("count records do not match the measurement settings".into()));
    }
    let n: Vec<f64> = counts.records.iter().map(|r| r.observed as f64).collect();
    mle_from_counts(settings, &n, counts.flux, counts.accidentals, opts)
}

/// (ΛT)_ij = −Tr[ρ (σ_i ⊗ σ_j)], the correlation matrix of the channel output.
pub fn extract_lambda_t(state: &TwoQubitState) -> Matrix3<f64> {
    state.correlation_matrix()
}

/// Channel map recovered from an ancilla-assisted measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessResult {
    pub lambda: UnitalChannel,
    pub lambda_t: Matrix3<f64>,
    pub input_t: Matrix3<f64>,
    pub condition_number: f64,
    pub svd: SignedSvd,
}

pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Λ = (ΛT)·T⁻¹ from the output state and the (possibly mixed) input state.
pub fn extract_channel(output: &TwoQubitState, input: &TwoQubitState, max_condition: f64) -> Result<ProcessResult> {
    let input_t = input.correlation_matrix();
    let condition = condition_number(&input_t);
    if condition.is_nan() || condition > max_condition {
        return Err(Error::IllConditioned { condition, cap: max_condition });
    }
    let inverse = input_t.try_inverse().ok_or(Error::IllConditioned { condition, cap: max_condition })?;
    let lambda_t = extract_lambda_t(output);
    let lambda = UnitalChannel::new(lambda_t * inverse)?;
    Ok(ProcessResult { svd: lambda.signed_svd(), lambda, lambda_t, input_t, condition_number: condition })
}

/// (ℰ ⊗ I)(ρ_in): the channel acts on arm 1.
pub fn jamiolkowski_state(channel: &UnitalChannel, input: &TwoQubitState) -> Result<TwoQubitState> {
    let c = input.pauli_coefficients();
    let lambda = channel.lambda();
    let a = channel.translation();
    let mut out = c;
    for l in 0..4 {
        for k in 1..4 {
            let mut v = a[k - 1] * c[0][l];
            for m in 1..4 {
                v += lambda[(k - 1, m - 1)] * c[m][l];
            }
            out[k][l] = v;
        }
    }
    TwoQubitState::from_pauli_coefficients(&out)
}

/// JSON view of a density matrix: rows of [re, im] pairs.
pub fn density_matrix_json(state: &TwoQubitState) -> Vec<Vec<[f64; 2]>> {
    let rho = state.rho();
    (0..4).map(|r| (0..4).map(|c| [rho[(r, c)].re, rho[(r, c)].im]).collect()).collect()
}

pub fn matrix3_json(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| m[(r, c)]))
}

#[derive(Debug, Clone, Serialize)]
pub struct MleReport {
    pub density_matrix: Vec<Vec<[f64; 2]>>,
    pub neg_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
}

impl From<&MleResult> for MleReport {
    fn from(r: &MleResult) -> Self {
        Self {
            density_matrix: density_matrix_json(&r.state),
            neg_log_likelihood: r.neg_log_likelihood,
            iterations: r.iterations,
            converged: r.converged,
            final_gradient_norm: r.final_gradient_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessReport {
    pub lambda: [[f64; 3]; 3],
    pub lambda_t: [[f64; 3]; 3],
    pub input_t: [[f64; 3]; 3],
    pub condition_number: f64,
    pub d: [f64; 3],
    pub o: [[f64; 3]; 3],
    pub o_prime: [[f64; 3]; 3],
}

impl From<&ProcessResult> for ProcessReport {
    fn from(r: &ProcessResult) -> Self {
        Self {
            lambda: matrix3_json(r.lambda.lambda()),
            lambda_t: matrix3_json(&r.lambda_t),
            input_t: matrix3_json(&r.input_t),
            condition_number: r.condition_number,
            d: r.svd.d,
            o: matrix3_json(r.svd.o.matrix()),
            o_prime: matrix3_json(r.svd.o_prime.matrix()),
        }
    }
}

/// Central finite-difference gradient of the likelihood objective (test oracle).
pub fn finite_difference_gradient(model: &Likelihood, params: &[f64; 16], h: f64) -> [f64; 16] {
    let mut grad = [0.0; 16];
    for k in 0..16 {
        let mut plus = *params;
        let mut minus = *params;
        plus[k] += h;
        minus[k] -= h;
        grad[k] = (model.objective(&plus).0 - model.objective(&minus).0) / (2.0 * h);
    }
    grad
}
