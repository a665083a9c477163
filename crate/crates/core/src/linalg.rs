//! Small fixed-size complex matrix helpers shared by the state and tomography code.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix2 = Matrix2<C64>;
pub type CMatrix4 = Matrix4<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Kronecker product of two 2×2 matrices, first factor acting on the
/// most significant index (basis order HH, HV, VH, VV).
pub fn kron(a: &CMatrix2, b: &CMatrix2) -> CMatrix4 {
    CMatrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

pub fn trace4(m: &CMatrix4) -> C64 {
    m[(0, 0)] + m[(1, 1)] + m[(2, 2)] + m[(3, 3)]
}

/// Tr[a·b] without forming the product.
pub fn trace_product(a: &CMatrix4, b: &CMatrix4) -> C64 {
    let mut acc = ZERO;
    for i in 0..4 {
        for k in 0..4 {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn hermitian_deviation<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> f64 {
    let mut worst = 0.0_f64;
    for r in 0..N {
        for c in 0..N {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix4) -> (Vector4<f64>, CMatrix4) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector4::from_fn(|i, _| eig.eigenvalues[order[i]]);
    let vectors = CMatrix4::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix4) -> Vector4<f64> {
    hermitian_eigen(m).0
}

/// Rebuilds V·diag(f(λ))·V† from a Hermitian eigen-decomposition.
pub fn spectral_map(m: &CMatrix4, f: impl Fn(f64) -> f64) -> CMatrix4 {
    let (values, vectors) = hermitian_eigen(m);
    let mut scaled = vectors;
    for c in 0..4 {
        let w = C64::new(f(values[c]), 0.0);
        for r in 0..4 {
            scaled[(r, c)] *= w;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a PSD matrix; eigenvalues below zero are clamped.
pub fn psd_sqrt(m: &CMatrix4) -> CMatrix4 {
    spectral_map(m, |x| x.max(0.0).sqrt())
}

/// Nearest unit-trace PSD matrix obtained by clamping negative eigenvalues.
pub fn project_to_density(m: &CMatrix4) -> Option<CMatrix4> {
    let clamped = spectral_map(m, |x| x.max(0.0));
    let tr = trace4(&clamped).re;
    (tr > 0.0).then(|| clamped.unscale(tr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_orders_first_factor_major() {
        let z = CMatrix2::new(ONE, ZERO, ZERO, -ONE);
        let id = CMatrix2::identity();
        let zi = kron(&z, &id);
        let diag: Vec<f64> = (0..4).map(|i| zi[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn eigen_recomposes() {
        let m = CMatrix4::from_fn(|r, c| C64::new((r + 2 * c) as f64, r as f64 - c as f64));
        let h = m + m.adjoint();
        let rebuilt = spectral_map(&h, |x| x);
        assert!((rebuilt - h).norm() < 1e-10);
    }
}
