//! Duty-cycle sweeps through the full characterization pipeline and the
//! geometry used to read them: projection of singular-value triplets onto a
//! face of the tetrahedron, total-least-squares line fits, and the spread of
//! principal axes across a family of channels.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::channel::{tetrahedron_check, DutyCycleSchedule, Rotation3, SignedSvd, UnitalChannel};
use crate::error::{Error, Result};
use crate::measurement::{expected_counts, standard_settings, CountSet};
use crate::qubit::TwoQubitState;
use crate::tomography::{
    extract_channel, jamiolkowski_state, mle_reconstruct, MleOptions, ProcessResult, DEFAULT_MAX_CONDITION,
};

/// Everything a sweep needs besides the p grid and the rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Phase φ of the (|HH⟩ + e^{iφ}|VV⟩)/√2 source state.
    pub input_phase: f64,
    /// Isotropic admixture of 𝟙/4 in the source state.
    pub input_mixing: f64,
    pub flux: f64,
    pub accidentals: f64,
    /// Skip sampling and reconstruction; characterize the exact states.
    pub noiseless: bool,
    /// Also reconstruct the input state from its own counts (once per seed)
    /// instead of using the configured source state in the inversion.
    pub reconstruct_input: bool,
    /// What the controller does during the "identity" part of the loop.
    pub idle: Rotation3,
    /// Fixed (pre, post) rotations of the fibers around the controller.
    pub frame: Option<(Rotation3, Rotation3)>,
    pub mle: MleOptions,
    pub max_condition: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_phase: 0.0,
            input_mixing: 0.0,
            flux: 1e4,
            accidentals: 0.0,
            noiseless: false,
            reconstruct_input: false,
            idle: Rotation3::identity(),
            frame: None,
            mle: MleOptions::default(),
            max_condition: DEFAULT_MAX_CONDITION,
        }
    }
}

impl PipelineConfig {
    pub fn noiseless() -> Self {
        Self { noiseless: true, ..Self::default() }
    }

    pub fn source_state(&self) -> Result<TwoQubitState> {
        TwoQubitState::phi_plus(self.input_phase).depolarized(self.input_mixing)
    }

    fn frame(&self, ch: UnitalChannel) -> UnitalChannel {
        match &self.frame {
            Some((pre, post)) => ch.framed(pre, post),
            None => ch,
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator seed for one measurement run of an experiment seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream))
}

const INPUT_STREAM: u64 = u64::MAX;

/// Tomographic estimate of a state together with the optimizer status.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub state: TwoQubitState,
    pub converged: bool,
}

/// Measures and reconstructs `truth`, or returns it unchanged in noiseless mode.
pub fn estimate_state(truth: &TwoQubitState, cfg: &PipelineConfig, seed: Option<u64>, stream: u64) -> Result<Estimate> {
    match (cfg.noiseless, seed) {
        (true, _) | (false, None) => {
            expected_counts(truth, cfg.flux, cfg.accidentals)?;
            Ok(Estimate { state: truth.clone(), converged: true })
        }
        (false, Some(seed)) => {
            let counts = CountSet::sample(truth, cfg.flux, cfg.accidentals, derive_seed(seed, stream))?;
            let r = mle_reconstruct(&counts, &standard_settings(), &cfg.mle)?;
            Ok(Estimate { state: r.state, converged: r.converged })
        }
    }
}

/// Input state used in the inversion: the source state itself unless
/// `reconstruct_input` is set, in which case its tomographic estimate.
pub fn estimate_input(cfg: &PipelineConfig, seed: Option<u64>) -> Result<Estimate> {
    let source = cfg.source_state()?;
    if cfg.reconstruct_input {
        estimate_state(&source, cfg, seed, INPUT_STREAM)
    } else {
        Ok(Estimate { state: source, converged: true })
    }
}

/// Ancilla-assisted characterization of one channel against a measured input.
pub fn characterize(
    channel: &UnitalChannel,
    cfg: &PipelineConfig,
    input: &Estimate,
    seed: Option<u64>,
    stream: u64,
) -> Result<(ProcessResult, bool)> {
    let output_truth = jamiolkowski_state(channel, &cfg.source_state()?)?;
    let output = estimate_state(&output_truth, cfg, seed, stream)?;
    let process = extract_channel(&output.state, &input.state, cfg.max_condition)?;
    Ok((process, output.converged && input.converged))
}

/// One reconstructed channel of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub p: f64,
    pub seed: Option<u64>,
    pub d: [f64; 3],
    pub margin: f64,
    pub converged: bool,
    pub process: ProcessResult,
}

fn check_grid(p_values: &[f64]) -> Result<()> {
    match p_values.iter().position(|p| !(0.0..=1.0).contains(p)) {
        Some(i) => Err(Error::InvalidParameter(format!("p_values[{i}] = {} outside [0, 1]", p_values[i]))),
        None => Ok(()),
    }
}

/// Runs the pipeline for every (p, seed); rows are ordered by p, then seed.
pub fn sweep<F>(p_values: &[f64], seeds: &[u64], cfg: &PipelineConfig, channel_at: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> Result<UnitalChannel> + Sync,
{
    check_grid(p_values)?;
    let seeds: Vec<Option<u64>> = if cfg.noiseless || seeds.is_empty() {
        vec![None]
    } else {
        seeds.iter().copied().map(Some).collect()
    };
    let inputs = seeds
        .par_iter()
        .map(|&s| estimate_input(cfg, s))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..p_values.len()).flat_map(|i| (0..seeds.len()).map(move |j| (i, j))).collect();
    jobs.par_iter()
        .map(|&(i, j)| {
            let p = p_values[i];
            let channel = cfg.frame(channel_at(p)?);
            let (process, converged) = characterize(&channel, cfg, &inputs[j], seeds[j], p.to_bits())?;
            let d = process.svd.d;
            Ok(SweepRow { p, seed: seeds[j], d, margin: tetrahedron_check(d, 0.0).margin, converged, process })
        })
        .collect()
}

/// Channels (1 − p)·idle + p·R.
pub fn edge_sweep(p_values: &[f64], r: &Rotation3, cfg: &PipelineConfig, seeds: &[u64]) -> Result<Vec<SweepRow>> {
    sweep(p_values, seeds, cfg, |p| Ok(UnitalChannel::from_schedule(&DutyCycleSchedule::edge(cfg.idle, *r, p)?)))
}

/// Channels (1 − p)·idle + p(R₁ + R₂)/2.
pub fn face_sweep(
    p_values: &[f64],
    r1: &Rotation3,
    r2: &Rotation3,
    cfg: &PipelineConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    sweep(p_values, seeds, cfg, |p| Ok(UnitalChannel::from_schedule(&DutyCycleSchedule::face(cfg.idle, *r1, *r2, p)?)))
}

/// Half-turn-like rotations R₁ about x and R₂ about an axis `separation` radians
/// away in the x–y plane, both by `angle`.
pub fn face_rotations(separation: f64, angle: f64) -> Result<(Rotation3, Rotation3)> {
    let r1 = Rotation3::from_axis_angle(&Vector3::x(), angle)?;
    let r2 = Rotation3::from_axis_angle(&Vector3::new(separation.cos(), separation.sin(), 0.0), angle)?;
    Ok((r1, r2))
}

/// Vertices 𝟙, R_x, R_y of the tetrahedron face holding the (1 − p)𝟙 + p(R_x + R_y)/2 family.
pub fn identity_face() -> [Vector3<f64>; 3] {
    [Vector3::new(1.0, 1.0, 1.0), Vector3::new(1.0, -1.0, -1.0), Vector3::new(-1.0, 1.0, -1.0)]
}

/// Orthonormal frame of a triangle: origin at the centroid, x along v1→v2,
/// y toward v0 (so v0 is "up" and the v1v2 edge horizontal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    pub vertices: [Vector3<f64>; 3],
    pub origin: Vector3<f64>,
    pub ex: Vector3<f64>,
    pub ey: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl FaceFrame {
    pub fn new(vertices: [Vector3<f64>; 3]) -> Result<Self> {
        let [v0, v1, v2] = vertices;
        let origin = (v0 + v1 + v2) / 3.0;
        let edge = v2 - v1;
        let up = v0 - origin;
        if edge.norm() < 1e-12 || edge.cross(&up).norm() < 1e-12 * edge.norm() * up.norm().max(1e-300) {
            return Err(Error::DegenerateFace);
        }
        let ex = edge.normalize();
        let ey = (up - ex * ex.dot(&up)).normalize();
        let normal = ex.cross(&ey);
        Ok(Self { vertices, origin, ex, ey, normal })
    }

    /// In-plane coordinates and signed out-of-plane residual.
    pub fn project(&self, point: &Vector3<f64>) -> (Vector2<f64>, f64) {
        let rel = point - self.origin;
        (Vector2::new(rel.dot(&self.ex), rel.dot(&self.ey)), rel.dot(&self.normal))
    }

    pub fn embed(&self, point: &Vector2<f64>, residual: f64) -> Vector3<f64> {
        self.origin + self.ex * point.x + self.ey * point.y + self.normal * residual
    }

    /// Median from v0 to the midpoint of v1v2, as (point, unit direction) in face coordinates.
    pub fn median(&self) -> (Vector2<f64>, Vector2<f64>) {
        let top = self.project(&self.vertices[0]).0;
        let mid = self.project(&((self.vertices[1] + self.vertices[2]) / 2.0)).0;
        (top, (mid - top).normalize())
    }

    /// Perpendicular in-plane distance from the median line.
    pub fn median_distance(&self, point: &Vector2<f64>) -> f64 {
        let (a, u) = self.median();
        let rel = point - a;
        (rel.x * u.y - rel.y * u.x).abs()
    }
}

/// Element of the symmetry group of the tetrahedron acting on signed triplets:
/// `out[k] = signs[k] · d[permutation[k]]`, with an even number of sign flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TetraSymmetry {
    pub permutation: [usize; 3],
    pub signs: [i8; 3],
}

impl TetraSymmetry {
    pub fn all() -> Vec<TetraSymmetry> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]];
        const SIGNS: [[i8; 3]; 4] = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];
        PERMS
            .iter()
            .flat_map(|&permutation| SIGNS.iter().map(move |&signs| TetraSymmetry { permutation, signs }))
            .collect()
    }

    pub fn apply(&self, d: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| f64::from(self.signs[k]) * d[self.permutation[k]])
    }
}

/// Singular-value triplets seen in the coordinates of one tetrahedron face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceProjection {
    pub frame: FaceFrame,
    /// Triplets after the symmetry that brings them closest to the face.
    pub matched: Vec<[f64; 3]>,
    pub symmetries: Vec<TetraSymmetry>,
    pub points_2d: Vec<Vector2<f64>>,
    /// Signed distance from the face plane.
    pub residuals: Vec<f64>,
}

impl FaceProjection {
    pub fn median_distances(&self) -> Vec<f64> {
        self.points_2d.iter().map(|p| self.frame.median_distance(p)).collect()
    }
}

const MATCH_TIE: f64 = 1e-9;

/// Orthogonal projection onto `face` after matching each triplet to the face.
///
/// Signed singular values are only defined up to permutations and paired sign
/// flips. Each triplet is replaced by the image closest to the face plane;
/// among images equally close (the face's own symmetries), the one nearest
/// the median from `face[0]` wins, then the one with nonnegative x.
pub fn project_to_face(triplets: &[[f64; 3]], face: [Vector3<f64>; 3]) -> Result<FaceProjection> {
    let frame = FaceFrame::new(face)?;
    let group = TetraSymmetry::all();
    let mut out = FaceProjection {
        frame,
        matched: Vec::with_capacity(triplets.len()),
        symmetries: Vec::with_capacity(triplets.len()),
        points_2d: Vec::with_capacity(triplets.len()),
        residuals: Vec::with_capacity(triplets.len()),
    };
    for d in triplets {
        let images: Vec<(TetraSymmetry, [f64; 3], Vector2<f64>, f64)> = group
            .iter()
            .map(|g| {
                let e = g.apply(*d);
                let (p2, res) = frame.project(&Vector3::from(e));
                (*g, e, p2, res)
            })
            .collect();
        let best_res = images.iter().map(|i| i.3.abs()).fold(f64::INFINITY, f64::min);
        let on_face: Vec<_> = images.iter().filter(|i| i.3.abs() <= best_res + MATCH_TIE).collect();
        let best_med = on_face.iter().map(|i| frame.median_distance(&i.2)).fold(f64::INFINITY, f64::min);
        let chosen = on_face
            .iter()
            .filter(|i| frame.median_distance(&i.2) <= best_med + MATCH_TIE)
            .find(|i| i.2.x >= -MATCH_TIE)
            .or_else(|| on_face.iter().find(|i| frame.median_distance(&i.2) <= best_med + MATCH_TIE))
            .expect("at least the identity image qualifies");
        out.symmetries.push(chosen.0);
        out.matched.push(chosen.1);
        out.points_2d.push(chosen.2);
        out.residuals.push(chosen.3);
    }
    Ok(out)
}

/// Total-least-squares line through 2-D points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    /// Unit direction, oriented with nonnegative y (nonnegative x if horizontal).
    pub direction: Vector2<f64>,
    /// Centroid of the points, which the line passes through.
    pub point: Vector2<f64>,
    /// RMS of perpendicular distances.
    pub rms_residual: f64,
}

impl LineFit {
    /// Angle between this line and a direction, in degrees within [0, 90].
    pub fn angle_to_deg(&self, direction: &Vector2<f64>) -> f64 {
        let c = self.direction.dot(&direction.normalize()).abs().min(1.0);
        c.acos().to_degrees()
    }
}

pub fn fit_line(points: &[Vector2<f64>]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateLine);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let scatter = points.iter().fold(Matrix2::zeros(), |acc, p| {
        let r = p - centroid;
        acc + r * r.transpose()
    });
    if scatter.trace() <= 1e-300 {
        return Err(Error::DegenerateLine);
    }
    let eig = scatter.symmetric_eigen();
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let mut direction: Vector2<f64> = eig.eigenvectors.column(k).into_owned().normalize();
    if direction.y < 0.0 || (direction.y == 0.0 && direction.x < 0.0) {
        direction = -direction;
    }
    let normal = Vector2::new(-direction.y, direction.x);
    let ss: f64 = points.iter().map(|p| (p - centroid).dot(&normal).powi(2)).sum();
    Ok(LineFit { direction, point: centroid, rms_residual: (ss / n).sqrt() })
}

/// Spread of the leading principal axes of a family of channels.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisAlignment {
    /// Largest pairwise angle between leading axes, axes taken up to sign.
    pub max_angle_deg: f64,
    /// Indices whose leading singular value was too close to the second to define an axis.
    pub excluded: Vec<usize>,
}

/// Default gap |D₁| − |D₂| below which a leading axis is considered undefined.
pub const AXIS_DEGENERACY_GAP: f64 = 0.05;

pub fn principal_axis_alignment(svds: &[SignedSvd], degeneracy_gap: f64) -> Result<AxisAlignment> {
    if svds.len() < 2 {
        return Err(Error::InvalidParameter("axis alignment needs at least two channels".into()));
    }
    let mut excluded = Vec::new();
    let mut axes = Vec::new();
    for (i, s) in svds.iter().enumerate() {
        if s.d[0].abs() - s.d[1].abs() < degeneracy_gap {
            excluded.push(i);
        } else {
            axes.push(s.leading_axis());
        }
    }
    let mut max_angle: f64 = 0.0;
    for (i, a) in axes.iter().enumerate() {
        for b in &axes[i + 1..] {
            let c = a.dot(b).abs().min(1.0);
            max_angle = max_angle.max(c.acos().to_degrees());
        }
    }
    Ok(AxisAlignment { max_angle_deg: max_angle, excluded })
}

/// Per-p statistics of a noisy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub p: f64,
    pub median_d: [f64; 3],
    pub margin_std: f64,
    pub min_margin: f64,
    pub runs: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Groups rows by p (in order of first appearance) and summarizes each group.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut ps: Vec<f64> = Vec::new();
    for r in rows {
        if !ps.iter().any(|p| p.to_bits() == r.p.to_bits()) {
            ps.push(r.p);
        }
    }
    ps.into_iter()
        .map(|p| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.p.to_bits() == p.to_bits()).collect();
            let median_d = [0, 1, 2].map(|k| median(&mut group.iter().map(|r| r.d[k]).collect::<Vec<_>>()));
            let margins: Vec<f64> = group.iter().map(|r| r.margin).collect();
            SweepSummary {
                p,
                median_d,
                margin_std: std_dev(&margins),
                min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
                runs: group.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::canonical_triplet;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(step: f64, hi: f64) -> Vec<f64> {
        let n = (hi / step).round() as usize;
        (0..=n).map(|i| i as f64 * step).collect()
    }

    #[test]
    fn noiseless_edge_examples() {
        let rows = edge_sweep(&[0.0, 0.5], &Rotation3::flip_z(), &PipelineConfig::noiseless(), &[]).unwrap();
        for (a, b) in rows[0].d.iter().zip([1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        for (a, b) in rows[1].d.iter().zip([1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn noiseless_edge_law_on_grid() {
        let ps = grid(0.05, 1.0);
        let rows = edge_sweep(&ps, &Rotation3::flip_x(), &PipelineConfig::noiseless(), &[]).unwrap();
        assert_eq!(rows.len(), 21);
        for r in &rows {
            let law = canonical_triplet([1.0, 1.0 - 2.0 * r.p, 1.0 - 2.0 * r.p]);
            for (got, want) in r.d.iter().zip(law) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_face_examples() {
        let cfg = PipelineConfig::noiseless();
        let rows = face_sweep(&[0.5, 1.0], &Rotation3::flip_x(), &Rotation3::flip_y(), &cfg, &[]).unwrap();
        let proj = project_to_face(&rows.iter().map(|r| r.d).collect::<Vec<_>>(), identity_face()).unwrap();
        for (a, b) in rows[0].d.iter().zip([0.5, 0.5, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        // p = 1 gives diag(0, 0, −1), the midpoint of the R_x R_y edge.
        for (a, b) in proj.matched[1].iter().zip([0.0, 0.0, -1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        assert!(proj.median_distances().iter().all(|d| *d < 1e-9));
    }

    #[test]
    fn noiseless_face_sweep_lies_on_median() {
        let ps = grid(0.05, 1.0);
        let rows = face_sweep(&ps, &Rotation3::flip_x(), &Rotation3::flip_y(), &PipelineConfig::noiseless(), &[]).unwrap();
        let proj = project_to_face(&rows.iter().map(|r| r.d).collect::<Vec<_>>(), identity_face()).unwrap();
        for (row, m) in rows.iter().zip(&proj.matched) {
            let p = row.p;
            for (a, b) in m.iter().zip([1.0 - p, 1.0 - p, 1.0 - 2.0 * p]) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
            }
        }
        assert!(proj.median_distances().iter().all(|d| *d < 1e-9));
        assert!(proj.residuals.iter().all(|r| r.abs() < 1e-9));
        let fit = fit_line(&proj.points_2d).unwrap();
        assert!(fit.angle_to_deg(&proj.frame.median().1) < 1e-6);
    }

    #[test]
    fn face_projection_examples() {
        let face = identity_face();
        let proj = project_to_face(&[[1.0, 1.0, 1.0], [1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0]], face).unwrap();
        assert_abs_diff_eq!(proj.residuals[0], 0.0, epsilon = 1e-12);
        let top = proj.frame.project(&face[0]).0;
        assert!((proj.points_2d[0] - top).norm() < 1e-12);
        assert!(proj.points_2d[1].norm() < 1e-12);

        let n = proj.frame.normal;
        let c = proj.frame.origin + n;
        let off = project_to_face(&[[c.x, c.y, c.z]], face).unwrap();
        assert_abs_diff_eq!(off.residuals[0].abs(), 1.0, epsilon = 1e-12);

        let flat = [Vector3::zeros(), Vector3::x(), Vector3::x() * 2.0];
        assert!(matches!(project_to_face(&[[0.0; 3]], flat), Err(Error::DegenerateFace)));
    }

    #[test]
    fn line_fit_examples() {
        let pts: Vec<Vector2<f64>> = (0..5).map(|i| Vector2::new(1.0 + 2.0 * i as f64, -3.0 + i as f64)).collect();
        let fit = fit_line(&pts).unwrap();
        assert!(fit.rms_residual < 1e-12);
        assert!(fit.angle_to_deg(&Vector2::new(2.0, 1.0)) < 1e-6);
        assert!(matches!(fit_line(&[Vector2::new(1.0, 1.0); 3]), Err(Error::DegenerateLine)));
        assert!(matches!(fit_line(&pts[..1]), Err(Error::DegenerateLine)));
    }

    #[test]
    fn axis_alignment_examples() {
        let s = UnitalChannel::new(nalgebra::Matrix3::from_diagonal(&Vector3::new(0.3, 1.0, 0.3))).unwrap().signed_svd();
        let same = principal_axis_alignment(&[s, s, s], AXIS_DEGENERACY_GAP).unwrap();
        assert_eq!(same.max_angle_deg, 0.0);

        let rows = edge_sweep(&grid(0.05, 1.0), &Rotation3::flip_z(), &PipelineConfig::noiseless(), &[]).unwrap();
        let svds: Vec<SignedSvd> = rows.iter().map(|r| r.process.svd).collect();
        let a = principal_axis_alignment(&svds, AXIS_DEGENERACY_GAP).unwrap();
        assert!(a.max_angle_deg < 1e-6, "{a:?}");
        // p = 0 and p = 1 are pure rotations with no preferred axis.
        assert!(a.excluded.contains(&0) && a.excluded.contains(&20));
        assert!(principal_axis_alignment(&svds[..1], 0.05).is_err());
    }

    #[test]
    fn noisy_edge_sweep_is_reproducible() {
        let cfg = PipelineConfig { flux: 1e4, reconstruct_input: true, ..Default::default() };
        let a = edge_sweep(&[0.3], &Rotation3::flip_z(), &cfg, &[1, 2]).unwrap();
        let b = edge_sweep(&[0.3], &Rotation3::flip_z(), &cfg, &[1, 2]).unwrap();
        assert_eq!(a.iter().map(|r| r.d).collect::<Vec<_>>(), b.iter().map(|r| r.d).collect::<Vec<_>>());
        assert_eq!(a[0].seed, Some(1));
        for r in &a {
            assert!((r.d[0] - 1.0).abs() < 0.1 && (r.d[1] - 0.4).abs() < 0.1);
        }
    }

    #[test]
    fn grid_outside_unit_interval_rejected() {
        let err = edge_sweep(&[0.2, 1.5], &Rotation3::flip_z(), &PipelineConfig::noiseless(), &[]).unwrap_err();
        assert!(err.to_string().contains("p_values[1]"));
    }

    proptest! {
        #[test]
        fn reembedding_reproduces_points(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
            let proj = project_to_face(&[[a, b, c]], identity_face()).unwrap();
            let back = proj.frame.embed(&proj.points_2d[0], proj.residuals[0]);
            prop_assert!((back - Vector3::from(proj.matched[0])).norm() < 1e-12);
        }
    }
}
