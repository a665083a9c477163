//! Unital qubit channels as affine Bloch maps r ↦ Λr + a.
//!
//! Channels are synthesized either from a Pauli mixture, from a duty-cycle
//! schedule of rotations, or from the squeezer model of an electrically driven
//! polarization controller. [`SignedSvd`] splits Λ into two proper rotations
//! and a signed diagonal, and [`tetrahedron_check`] certifies complete
//! positivity of that diagonal.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{BlochVector, EPS};

/// A proper 3×3 rotation of the Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Checks orthogonality and det = +1 within [`EPS`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        if ortho > EPS {
            return Err(Error::InvalidRotation(format!("not orthogonal (deviation {ortho:e})")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > EPS {
            return Err(Error::InvalidRotation(format!("determinant {det} ≠ +1")));
        }
        Ok(Self(m))
    }

    /// Right-handed rotation by `angle` radians about `axis` (Rodrigues formula).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) || !angle.is_finite() {
            return Err(Error::InvalidRotation("axis must be nonzero and finite".into()));
        }
        let u = axis / n;
        let k = u.cross_matrix();
        let m = Matrix3::identity() * angle.cos() + u * u.transpose() * (1.0 - angle.cos()) + k * angle.sin();
        Ok(Self(m))
    }

    /// 180° rotation about x, i.e. conjugation by σ_x.
    pub fn flip_x() -> Self {
        Self(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)))
    }

    pub fn flip_y() -> Self {
        Self(Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0)))
    }

    pub fn flip_z() -> Self {
        Self(Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &Rotation3) -> Rotation3 {
        Rotation3(self.0 * first.0)
    }

    pub fn inverse(&self) -> Rotation3 {
        Rotation3(self.0.transpose())
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Affine Bloch map r ↦ Λr + a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitalChannel {
    lambda: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl UnitalChannel {
    pub fn new(lambda: Matrix3<f64>) -> Result<Self> {
        if !lambda.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { lambda, translation: Vector3::zeros() })
    }

    pub fn identity() -> Self {
        Self { lambda: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_rotation(r: &Rotation3) -> Self {
        Self { lambda: r.0, translation: Vector3::zeros() }
    }

    /// Λ = diag(p0+px−py−pz, p0−px+py−pz, p0−px−py+pz).
    pub fn from_pauli_mixture(m: &PauliMixture) -> Self {
        let d = Vector3::new(
            m.p0 + m.px - m.py - m.pz,
            m.p0 - m.px + m.py - m.pz,
            m.p0 - m.px - m.py + m.pz,
        );
        Self { lambda: Matrix3::from_diagonal(&d), translation: Vector3::zeros() }
    }

    /// Time average of the scheduled rotations: Λ = Σ f_i R_i.
    pub fn from_schedule(s: &DutyCycleSchedule) -> Self {
        let lambda = s.segments.iter().fold(Matrix3::zeros(), |acc, seg| acc + seg.rotation.0 * seg.fraction);
        Self { lambda, translation: Vector3::zeros() }
    }

    pub fn lambda(&self) -> &Matrix3<f64> {
        &self.lambda
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply_vector(&self, r: &Vector3<f64>) -> Vector3<f64> {
        self.lambda * r + self.translation
    }

    /// Λr + a; errors if the image leaves the Bloch ball (non-physical Λ).
    pub fn apply(&self, r: &BlochVector) -> Result<BlochVector> {
        BlochVector::from_vector(self.apply_vector(r.vector()))
    }

    /// `post ∘ self ∘ pre`, used to model fixed fiber birefringence around the device.
    pub fn framed(&self, pre: &Rotation3, post: &Rotation3) -> Self {
        Self { lambda: post.0 * self.lambda * pre.0, translation: post.0 * self.translation }
    }

    pub fn signed_svd(&self) -> SignedSvd {
        SignedSvd::new(&self.lambda)
    }

    /// Images of a latitude/longitude grid of unit vectors plus principal semi-axes.
    pub fn on_sphere(&self, mesh_resolution: usize) -> Result<Ellipsoid> {
        if mesh_resolution < 4 {
            return Err(Error::InvalidParameter(format!("mesh resolution {mesh_resolution} < 4")));
        }
        let mut points = Vec::with_capacity(mesh_resolution * mesh_resolution);
        for i in 0..mesh_resolution {
            let u = std::f64::consts::PI * i as f64 / (mesh_resolution - 1) as f64;
            for j in 0..mesh_resolution {
                let v = 2.0 * std::f64::consts::PI * j as f64 / mesh_resolution as f64;
                let r = Vector3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos());
                points.push(SpherePoint { u, v, image: self.apply_vector(&r) });
            }
        }
        let svd = self.signed_svd();
        let o = svd.o.matrix();
        let axes = [0, 1, 2].map(|k| o.column(k) * svd.d[k].abs());
        Ok(Ellipsoid { points, axes, center: self.translation })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub u: f64,
    pub v: f64,
    pub image: Vector3<f64>,
}

/// Transformed Bloch sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub points: Vec<SpherePoint>,
    /// Semi-axis vectors: columns of O scaled by |D|.
    pub axes: [Vector3<f64>; 3],
    pub center: Vector3<f64>,
}

/// Probability weights of 𝟙 and the three 180° rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliMixture {
    pub p0: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl PauliMixture {
    pub fn new(p0: f64, px: f64, py: f64, pz: f64) -> Result<Self> {
        let m = Self { p0, px, py, pz };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p0, self.px, self.py, self.pz];
        if ps.iter().any(|p| !p.is_finite() || *p < -EPS) {
            return Err(Error::InvalidMixture("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = ps.iter().sum();
        if (sum - 1.0).abs() > EPS {
            return Err(Error::InvalidMixture(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSegment {
    pub rotation: Rotation3,
    pub fraction: f64,
}

/// One period of the temporal driving loop: each rotation is held for its fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct DutyCycleSchedule {
    segments: Vec<ScheduleSegment>,
    period: f64,
}

impl DutyCycleSchedule {
    pub fn new(segments: Vec<ScheduleSegment>, period: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !s.fraction.is_finite() || s.fraction < -EPS || s.fraction > 1.0 + EPS {
                return Err(Error::InvalidSchedule(format!("segment {i} fraction {} outside [0, 1]", s.fraction)));
            }
        }
        let total: f64 = segments.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > EPS {
            return Err(Error::InvalidSchedule(format!("fractions sum to {total}, not 1")));
        }
        Ok(Self { segments, period })
    }

    /// Edge channel (1 − p)·idle + p·R, where `idle` is what the device does when undriven.
    pub fn edge(idle: Rotation3, r: Rotation3, p: f64) -> Result<Self> {
        Self::new(
            vec![ScheduleSegment { rotation: idle, fraction: 1.0 - p }, ScheduleSegment { rotation: r, fraction: p }],
            0.150,
        )
    }

    /// Face channel (1 − p)·idle + p(R₁ + R₂)/2.
    pub fn face(idle: Rotation3, r1: Rotation3, r2: Rotation3, p: f64) -> Result<Self> {
        Self::new(
            vec![
                ScheduleSegment { rotation: idle, fraction: 1.0 - p },
                ScheduleSegment { rotation: r1, fraction: 0.5 * p },
                ScheduleSegment { rotation: r2, fraction: 0.5 * p },
            ],
            0.050,
        )
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// A fiber squeezer: a waveplate with fixed orientation and tunable retardance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Squeezer {
    /// Physical orientation of the fast axis in radians, measured from H.
    pub axis_angle: f64,
}

impl Squeezer {
    /// Bloch-sphere rotation axis (sin 2θ, 0, cos 2θ): linear polarizations
    /// lie on the x–z great circle under the H ↔ +z convention.
    pub fn bloch_axis(&self) -> Vector3<f64> {
        Vector3::new((2.0 * self.axis_angle).sin(), 0.0, (2.0 * self.axis_angle).cos())
    }
}

/// Stack of squeezers forming an electrically driven polarization controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpcModel {
    pub squeezers: Vec<Squeezer>,
    /// Retardance left on a squeezer whose command is exactly zero.
    #[serde(default)]
    pub hysteresis_residual: f64,
}

impl EpcModel {
    /// Four squeezers at 0°, 45°, 0°, 45°.
    pub fn ideal() -> Self {
        let q = std::f64::consts::FRAC_PI_4;
        Self::with_axes(&[0.0, q, 0.0, q], 0.0)
    }

    pub fn with_axes(axis_angles: &[f64], hysteresis_residual: f64) -> Self {
        Self {
            squeezers: axis_angles.iter().map(|&axis_angle| Squeezer { axis_angle }).collect(),
            hysteresis_residual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.squeezers.is_empty() {
            return Err(Error::InvalidParameter("EPC needs at least one squeezer".into()));
        }
        if !self.hysteresis_residual.is_finite() || self.squeezers.iter().any(|s| !s.axis_angle.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Composite rotation, first squeezer applied first.
    pub fn unitary(&self, commanded: &[f64]) -> Result<Rotation3> {
        self.validate()?;
        if commanded.len() != self.squeezers.len() {
            return Err(Error::RetardanceCount { expected: self.squeezers.len(), got: commanded.len() });
        }
        let mut total = Rotation3::identity();
        for (sq, &cmd) in self.squeezers.iter().zip(commanded) {
            if !cmd.is_finite() {
                return Err(Error::NonFinite);
            }
            let retardance = if cmd == 0.0 { self.hysteresis_residual } else { cmd };
            let step = Rotation3::from_axis_angle(&sq.bloch_axis(), retardance)?;
            total = step.after(&total);
        }
        Ok(total)
    }

    /// What the controller does when no squeezer is driven.
    pub fn idle(&self) -> Result<Rotation3> {
        self.unitary(&vec![0.0; self.squeezers.len()])
    }
}

/// Λ = O·diag(D)·O′ with proper rotations O, O′.
///
/// Canonical form: |D₁| ≥ |D₂| ≥ |D₃|, D₁, D₂ ≥ 0, and sign(D₃) carries
/// sign(det Λ). When singular values are degenerate O and O′ are not unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedSvd {
    pub o: Rotation3,
    pub d: [f64; 3],
    pub o_prime: Rotation3,
}

impl SignedSvd {
    pub fn new(lambda: &Matrix3<f64>) -> Self {
        let svd = lambda.svd(true, true);
        let u = svd.u.expect("3×3 SVD always yields U");
        let v_t = svd.v_t.expect("3×3 SVD always yields Vᵀ");
        let s = svd.singular_values;

        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let mut o = Matrix3::from_fn(|r, c| u[(r, order[c])]);
        let mut op = Matrix3::from_fn(|r, c| v_t[(order[r], c)]);
        let mut d = order.map(|k| s[k]);

        // Make both factors proper by moving reflections into D.
        if o.determinant() < 0.0 {
            o.column_mut(2).neg_mut();
            d[2] = -d[2];
        }
        if op.determinant() < 0.0 {
            op.row_mut(2).neg_mut();
            d[2] = -d[2];
        }

        // Normalize signs: first two nonnegative, overall sign on the last entry.
        let signs = d.map(|x| if x < 0.0 { -1.0 } else { 1.0 });
        let product = signs[0] * signs[1] * signs[2];
        let target = [1.0, 1.0, product];
        for k in 0..3 {
            if signs[k] != target[k] {
                o.column_mut(k).neg_mut();
            }
            d[k] = target[k] * d[k].abs();
        }
        let d = d.map(|x| if x == 0.0 { 0.0 } else { x });
        Self { o: Rotation3(o), d, o_prime: Rotation3(op) }
    }

    pub fn reconstruct(&self) -> Matrix3<f64> {
        self.o.0 * Matrix3::from_diagonal(&Vector3::from(self.d)) * self.o_prime.0
    }

    /// Leading principal axis of the image ellipsoid (first column of O).
    pub fn leading_axis(&self) -> Vector3<f64> {
        self.o.0.column(0).into_owned()
    }
}

/// Canonical representative of a signed triplet under permutations and
/// paired sign flips (the freedom left by the proper-rotation factors).
pub fn canonical_triplet(d: [f64; 3]) -> [f64; 3] {
    SignedSvd::new(&Matrix3::from_diagonal(&Vector3::from(d))).d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TetrahedronCheck {
    pub inside: bool,
    pub margin: f64,
}

/// Complete-positivity test |D_x ± D_y| ≤ |1 ± D_z| for a unital channel.
///
/// The two absolute-value inequalities expand into the four faces of the
/// tetrahedron with vertices 𝟙, R_x, R_y, R_z; the margin is the smallest
/// slack `1 − s·D` over those faces, so it stays meaningful for |D_z| > 1.
pub fn tetrahedron_check(d: [f64; 3], tolerance: f64) -> TetrahedronCheck {
    const FACES: [[f64; 3]; 4] = [[1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];
    let margin = FACES
        .iter()
        .map(|s| 1.0 - (s[0] * d[0] + s[1] * d[1] + s[2] * d[2]))
        .fold(f64::INFINITY, f64::min);
    TetrahedronCheck { inside: margin >= -tolerance, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(a, b, c))
    }

    #[test]
    fn apply_examples() {
        assert!(BlochVector::new(1.0, 1.0, 1.0).is_err());
        let s3 = 1.0 / 3f64.sqrt();
        let v = BlochVector::new(s3, s3, s3).unwrap();
        assert_eq!(UnitalChannel::identity().apply(&v).unwrap(), v);

        let p = 0.5;
        let ch = UnitalChannel::new(diag(1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p)).unwrap();
        let out = ch.apply(&v).unwrap();
        assert!((out.vector() - Vector3::new(s3, 0.0, 0.0)).norm() < EPS);

        let zero = UnitalChannel::new(Matrix3::zeros()).unwrap();
        assert_eq!(zero.apply(&v).unwrap().norm(), 0.0);
    }

    #[test]
    fn pauli_mixture_examples() {
        let id = UnitalChannel::from_pauli_mixture(&PauliMixture::new(1.0, 0.0, 0.0, 0.0).unwrap());
        assert_eq!(*id.lambda(), Matrix3::identity());
        let uniform = UnitalChannel::from_pauli_mixture(&PauliMixture::new(0.25, 0.25, 0.25, 0.25).unwrap());
        assert!(uniform.lambda().norm() < EPS);
        let p = 0.3;
        let z = UnitalChannel::from_pauli_mixture(&PauliMixture::new(1.0 - p, 0.0, 0.0, p).unwrap());
        assert!((z.lambda() - diag(0.4, 0.4, 1.0)).norm() < EPS);
        assert!(PauliMixture::new(0.5, 0.5, 0.5, -0.5).is_err());
        assert!(PauliMixture::new(0.5, 0.2, 0.2, 0.0).is_err());
    }

    #[test]
    fn schedule_examples() {
        for p in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let s = DutyCycleSchedule::edge(Rotation3::identity(), Rotation3::flip_z(), p).unwrap();
            let ch = UnitalChannel::from_schedule(&s);
            assert!((ch.lambda() - diag(1.0 - 2.0 * p, 1.0 - 2.0 * p, 1.0)).norm() < EPS);
            let d = ch.signed_svd().d;
            let law = canonical_triplet([1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p]);
            for k in 0..3 {
                assert_abs_diff_eq!(d[k], law[k], epsilon = EPS);
            }
        }
        let id = DutyCycleSchedule::new(vec![ScheduleSegment { rotation: Rotation3::identity(), fraction: 1.0 }], 0.1).unwrap();
        assert_eq!(*UnitalChannel::from_schedule(&id).lambda(), Matrix3::identity());

        let face = DutyCycleSchedule::face(Rotation3::identity(), Rotation3::flip_x(), Rotation3::flip_y(), 0.5).unwrap();
        assert!((UnitalChannel::from_schedule(&face).lambda() - diag(0.5, 0.5, 0.0)).norm() < EPS);

        let short = vec![ScheduleSegment { rotation: Rotation3::identity(), fraction: 0.9 }];
        assert!(matches!(DutyCycleSchedule::new(short, 0.1), Err(Error::InvalidSchedule(_))));
        assert!(DutyCycleSchedule::new(vec![], 0.1).is_err());
    }

    #[test]
    fn epc_identity_when_undriven() {
        let epc = EpcModel::ideal();
        let r = epc.unitary(&[0.0; 4]).unwrap();
        assert!((r.matrix() - Matrix3::identity()).norm() < EPS);
        assert!(matches!(epc.unitary(&[0.0; 3]), Err(Error::RetardanceCount { expected: 4, got: 3 })));
    }

    #[test]
    fn epc_euler_reaches_half_turn_about_any_axis() {
        // Squeezers at 0°, 45°, 0° rotate about Bloch z, x, z: a z-x-z Euler chain.
        let epc = EpcModel::with_axes(&[0.0, FRAC_PI_4, 0.0], 0.0);
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        let target = Rotation3::from_axis_angle(&axis, PI).unwrap();
        // Euler angles of R = Rz(γ)·Rx(β)·Rz(α), applied α first.
        let m = target.matrix();
        let beta = m[(2, 2)].clamp(-1.0, 1.0).acos();
        let alpha = m[(2, 0)].atan2(m[(2, 1)]);
        let gamma = m[(0, 2)].atan2(-m[(1, 2)]);
        let got = epc.unitary(&[alpha, beta, gamma]).unwrap();
        assert!((got.matrix() - m).norm() < 1e-9, "{got:?} vs {target:?}");
    }

    #[test]
    fn epc_hysteresis_deviates_from_ideal() {
        let ideal = Rotation3::from_axis_angle(&Vector3::z(), PI).unwrap();
        let mut previous = 0.0;
        for h in [0.0, 0.05, 0.1] {
            let epc = EpcModel::with_axes(&[0.0, FRAC_PI_4, 0.0, FRAC_PI_4], h);
            let got = epc.unitary(&[PI, 0.0, 0.0, 0.0]).unwrap();
            // Independent composition: three h-rotations after the π rotation.
            let x = Vector3::x();
            let z = Vector3::z();
            let expect = Rotation3::from_axis_angle(&x, h).unwrap().matrix()
                * Rotation3::from_axis_angle(&z, h).unwrap().matrix()
                * Rotation3::from_axis_angle(&x, h).unwrap().matrix()
                * ideal.matrix();
            assert!((got.matrix() - expect).norm() < 1e-12);
            let dev = (got.matrix() - ideal.matrix()).norm();
            assert!(dev >= previous);
            previous = dev;
        }
        assert!(previous > 0.1);
    }

    #[test]
    fn signed_svd_examples() {
        let id = UnitalChannel::identity().signed_svd();
        assert_eq!(id.d, [1.0, 1.0, 1.0]);

        let rz = UnitalChannel::from_rotation(&Rotation3::flip_z()).signed_svd();
        assert_eq!(rz.d.map(|x| (x * 1e9).round() / 1e9), [1.0, 1.0, 1.0]);
        assert!((rz.reconstruct() - Rotation3::flip_z().matrix()).norm() < EPS);

        let m = diag(0.8, 0.5, -0.9);
        let s = UnitalChannel::new(m).unwrap().signed_svd();
        for (a, b) in s.d.iter().zip([0.9, 0.8, -0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = EPS);
        }
        assert!((s.reconstruct() - m).norm() < EPS);
        assert_abs_diff_eq!(s.o.matrix().determinant(), 1.0, epsilon = EPS);
        assert_abs_diff_eq!(s.o_prime.matrix().determinant(), 1.0, epsilon = EPS);
    }

    #[test]
    fn signed_svd_rank_deficient() {
        for m in [Matrix3::zeros(), diag(0.7, 0.0, 0.0), diag(-0.7, 0.3, 0.0), diag(0.5, -0.5, 0.0)] {
            let s = SignedSvd::new(&m);
            assert!((s.reconstruct() - m).norm() < EPS);
            assert!(s.d[0] >= 0.0 && s.d[1] >= 0.0);
        }
    }

    #[test]
    fn tetrahedron_examples() {
        let vertex = tetrahedron_check([1.0, 1.0, 1.0], 0.0);
        assert!(vertex.inside);
        assert_abs_diff_eq!(vertex.margin, 0.0, epsilon = EPS);
        let center = tetrahedron_check([0.0, 0.0, 0.0], 0.0);
        assert!(center.inside);
        assert_abs_diff_eq!(center.margin, 1.0, epsilon = EPS);
        let outside = tetrahedron_check([1.0, 1.0, -1.0], 0.0);
        assert!(!outside.inside);
        assert_abs_diff_eq!(outside.margin, -2.0, epsilon = EPS);
        assert!(tetrahedron_check([1.0, 1.0, -1.0], 2.5).inside);
    }

    #[test]
    fn tetrahedron_agrees_with_absolute_value_form() {
        // For |D_z| ≤ 1 the face margin equals min(|1 + Dz| − |Dx + Dy|, |1 − Dz| − |Dx − Dy|).
        let grid = [-1.0, -0.7, -0.2, 0.0, 0.4, 0.9, 1.0];
        for &x in &grid {
            for &y in &grid {
                for &z in &grid {
                    let abs_form = f64::min((1.0 + z) - f64::abs(x + y), (1.0 - z) - f64::abs(x - y));
                    assert_abs_diff_eq!(tetrahedron_check([x, y, z], 0.0).margin, abs_form, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn sphere_examples() {
        let id = UnitalChannel::identity().on_sphere(8).unwrap();
        for p in &id.points {
            assert_abs_diff_eq!(p.image.norm(), 1.0, epsilon = EPS);
        }
        let prolate = UnitalChannel::new(diag(1.0, 0.5, 0.5)).unwrap().on_sphere(9).unwrap();
        assert!((prolate.axes[0].abs() - Vector3::x()).norm() < EPS);
        let longest = prolate.points.iter().map(|p| p.image.norm()).fold(0.0, f64::max);
        assert_abs_diff_eq!(longest, 1.0, epsilon = EPS);
        // Equator point along y shrinks to 0.5.
        let eq = prolate.points.iter().find(|p| (p.u - PI / 2.0).abs() < 1e-12 && (p.v - PI / 2.0).abs() < 1e-12);
        if let Some(p) = eq {
            assert_abs_diff_eq!(p.image.norm(), 0.5, epsilon = EPS);
        }
        let zero = UnitalChannel::new(Matrix3::zeros()).unwrap().on_sphere(4).unwrap();
        assert!(zero.points.iter().all(|p| p.image.norm() == 0.0));
        assert!(UnitalChannel::identity().on_sphere(3).is_err());
    }

    fn rotation_strategy() -> impl Strategy<Value = Rotation3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..PI)
            .prop_filter("axis", |(x, y, z, _)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z, a)| Rotation3::from_axis_angle(&Vector3::new(x, y, z), a).unwrap())
    }

    fn schedule_strategy() -> impl Strategy<Value = UnitalChannel> {
        proptest::collection::vec((rotation_strategy(), 0.01..1.0f64), 1..5).prop_map(|segs| {
            let total: f64 = segs.iter().map(|s| s.1).sum();
            let segments = segs.into_iter().map(|(rotation, f)| ScheduleSegment { rotation, fraction: f / total }).collect();
            UnitalChannel::from_schedule(&DutyCycleSchedule::new(segments, 1.0).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn svd_reconstructs_convex_rotation_mixtures(ch in schedule_strategy()) {
            let s = ch.signed_svd();
            prop_assert!((s.reconstruct() - ch.lambda()).norm() < EPS);
            prop_assert!((s.o.matrix().determinant() - 1.0).abs() < EPS);
            prop_assert!((s.o_prime.matrix().determinant() - 1.0).abs() < EPS);
            prop_assert!(s.d[0].abs() >= s.d[1].abs() && s.d[1].abs() >= s.d[2].abs());
            let det = ch.lambda().determinant();
            if det.abs() > 1e-12 {
                prop_assert_eq!(det.signum(), (s.d[0] * s.d[1] * s.d[2]).signum());
            }
            prop_assert!(s.d[0].abs() <= 1.0 + EPS);
            prop_assert!(tetrahedron_check(s.d, EPS).inside);
        }

        #[test]
        fn pauli_mixtures_are_inside(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, d in 0.0..1.0f64) {
            let t = a + b + c + d + 1e-9;
            let m = PauliMixture::new(a / t, b / t, c / t, 1.0 - (a + b + c) / t).unwrap();
            let s = UnitalChannel::from_pauli_mixture(&m).signed_svd();
            prop_assert!(tetrahedron_check(s.d, 0.0).margin >= -EPS);
        }

        #[test]
        fn edge_law(r in rotation_strategy(), p in 0.0..=1.0f64) {
            // Any 180° rotation: reuse the random axis.
            let axis = {
                let m = r.matrix();
                let v = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
                if v.norm() > 1e-6 { v } else { Vector3::z() }
            };
            let half = Rotation3::from_axis_angle(&axis, PI).unwrap();
            let ch = UnitalChannel::from_schedule(&DutyCycleSchedule::edge(Rotation3::identity(), half, p).unwrap());
            let got = ch.signed_svd().d;
            let law = canonical_triplet([1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p]);
            for k in 0..3 {
                prop_assert!((got[k] - law[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn face_law(r in rotation_strategy(), p in 0.0..=1.0f64) {
            // Orthogonal half-turn axes: conjugate R_x, R_y by a random rotation.
            let q = r.matrix();
            let r1 = Rotation3::new(q * Rotation3::flip_x().matrix() * q.transpose()).unwrap();
            let r2 = Rotation3::new(q * Rotation3::flip_y().matrix() * q.transpose()).unwrap();
            let ch = UnitalChannel::from_schedule(&DutyCycleSchedule::face(Rotation3::identity(), r1, r2, p).unwrap());
            let got = ch.signed_svd().d;
            let law = canonical_triplet([1.0 - p, 1.0 - p, 1.0 - 2.0 * p]);
            for k in 0..3 {
                prop_assert!((got[k] - law[k]).abs() < 1e-9);
            }
            // The face-channel triplet lies on the face x + y − z = 1 of the tetrahedron.
            prop_assert!((tetrahedron_check(got, 0.0).margin).abs() < 1e-9);
        }
    }
}
