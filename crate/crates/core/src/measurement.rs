//! Two-photon polarization measurements: the 16 projective settings,
//! coincidence probabilities, Poisson-sampled counts and the classical
//! three-input probe of a channel.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::UnitalChannel;
use crate::error::{Error, Result};
use crate::linalg::{kron, trace_product, CMatrix2, CMatrix4, C64};
use crate::qubit::{BlochVector, TwoQubitState};

/// Polarization basis states. R = (|H⟩ − i|V⟩)/√2, L = (|H⟩ + i|V⟩)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolarizationKet {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolarizationKet {
    pub const ALL: [PolarizationKet; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    pub fn amplitudes(self) -> Vector2<C64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Self::H => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            Self::V => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            Self::D => (C64::new(h, 0.0), C64::new(h, 0.0)),
            Self::A => (C64::new(h, 0.0), C64::new(-h, 0.0)),
            Self::R => (C64::new(h, 0.0), C64::new(0.0, -h)),
            Self::L => (C64::new(h, 0.0), C64::new(0.0, h)),
        };
        Vector2::new(a, b)
    }

    pub fn projector(self) -> CMatrix2 {
        let k = self.amplitudes();
        k * k.adjoint()
    }

    /// H = +z, D = +x, R = −y, L = +y.
    pub fn bloch(self) -> BlochVector {
        let v = match self {
            Self::H => Vector3::new(0.0, 0.0, 1.0),
            Self::V => Vector3::new(0.0, 0.0, -1.0),
            Self::D => Vector3::new(1.0, 0.0, 0.0),
            Self::A => Vector3::new(-1.0, 0.0, 0.0),
            Self::R => Vector3::new(0.0, -1.0, 0.0),
            Self::L => Vector3::new(0.0, 1.0, 0.0),
        };
        BlochVector::from_vector(v).expect("basis states are unit vectors")
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::H => "H",
            Self::V => "V",
            Self::D => "D",
            Self::A => "A",
            Self::R => "R",
            Self::L => "L",
        }
    }
}

impl fmt::Display for PolarizationKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for PolarizationKet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.symbol() == s)
            .ok_or_else(|| Error::InvalidCounts(format!("unknown polarization {s:?}")))
    }
}

/// Projective setting of both analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    pub arm1: PolarizationKet,
    pub arm2: PolarizationKet,
}

impl MeasurementSetting {
    pub const fn new(arm1: PolarizationKet, arm2: PolarizationKet) -> Self {
        Self { arm1, arm2 }
    }

    pub fn projector(&self) -> CMatrix4 {
        kron(&self.arm1.projector(), &self.arm2.projector())
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.arm1, self.arm2)
    }
}

/// The tomographically complete sequence of 16 two-photon projections, in acquisition order.
pub fn standard_settings() -> [MeasurementSetting; 16] {
    use PolarizationKet::*;
    const ORDER: [(PolarizationKet, PolarizationKet); 16] = [
        (H, H),
        (H, V),
        (V, V),
        (V, H),
        (R, H),
        (R, V),
        (D, V),
        (D, H),
        (D, R),
        (D, D),
        (R, D),
        (H, D),
        (V, D),
        (V, L),
        (H, L),
        (R, L),
    ];
    ORDER.map(|(a, b)| MeasurementSetting::new(a, b))
}

/// Rank of the span of the settings' projectors in the 16-dimensional real
/// space of 4×4 Hermitian operators.
pub fn projector_rank(settings: &[MeasurementSetting]) -> usize {
    // Each projector as 16 real Pauli coordinates Tr[Π (σ_k ⊗ σ_l)].
    let rows: Vec<f64> = settings
        .iter()
        .flat_map(|s| {
            let p = s.projector();
            (0..16).map(move |kl| trace_product(&p, &crate::qubit::PauliBasis::product(kl / 4, kl % 4)).re)
        })
        .collect();
    if settings.is_empty() {
        return 0;
    }
    let m = DMatrix::from_row_slice(settings.len(), 16, &rows);
    m.rank(1e-9)
}

pub fn is_tomographically_complete(settings: &[MeasurementSetting]) -> bool {
    projector_rank(settings) == 16
}

/// Tr[ρ (Π₁ ⊗ Π₂)], clamped to [0, 1].
pub fn coincidence_probability(state: &TwoQubitState, setting: &MeasurementSetting) -> f64 {
    trace_product(state.rho(), &setting.projector()).re.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceRecord {
    pub setting: MeasurementSetting,
    /// Model probability; absent for counts read from disk.
    pub probability: Option<f64>,
    /// Mean counts flux·probability + accidentals; absent for counts read from disk.
    pub expected: Option<f64>,
    pub observed: u64,
}

/// Coincidence counts for the 16 standard settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSet {
    pub records: Vec<CoincidenceRecord>,
    /// Mean coincidences per setting at unit probability.
    pub flux: f64,
    /// Flat accidental mean added to every setting.
    pub accidentals: f64,
    pub rng_seed: u64,
}

fn check_rates(flux: f64, accidentals: f64) -> Result<()> {
    if !(flux.is_finite() && flux > 0.0) {
        return Err(Error::InvalidParameter(format!("flux must be positive and finite, got {flux}")));
    }
    if !(accidentals.is_finite() && accidentals >= 0.0) {
        return Err(Error::InvalidParameter(format!("accidentals must be nonnegative and finite, got {accidentals}")));
    }
    Ok(())
}

/// Means flux·p_i + accidentals for the standard settings, without sampling.
pub fn expected_counts(state: &TwoQubitState, flux: f64, accidentals: f64) -> Result<Vec<f64>> {
    check_rates(flux, accidentals)?;
    Ok(standard_settings().iter().map(|s| flux * coincidence_probability(state, s) + accidentals).collect())
}

impl CountSet {
    /// Draws Poisson counts for each standard setting from a generator seeded by `seed`.
    pub fn sample(state: &TwoQubitState, flux: f64, accidentals: f64, seed: u64) -> Result<Self> {
        check_rates(flux, accidentals)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = standard_settings()
            .into_iter()
            .map(|setting| {
                let probability = coincidence_probability(state, &setting);
                let mean = flux * probability + accidentals;
                let observed = if mean > 0.0 {
                    Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64
                } else {
                    0
                };
                CoincidenceRecord { setting, probability: Some(probability), expected: Some(mean), observed }
            })
            .collect();
        Ok(Self { records, flux, accidentals, rng_seed: seed })
    }

    pub fn settings(&self) -> Vec<MeasurementSetting> {
        self.records.iter().map(|r| r.setting).collect()
    }

    pub fn observed(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.observed).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CountSetDoc::from(self))?)
    }

    /// Parses and validates the interchange document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CountSetDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// JSON shape of a [`CountSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSetDoc {
    pub settings: Vec<[PolarizationKet; 2]>,
    pub observed: Vec<u64>,
    pub flux: f64,
    pub accidentals: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<Vec<f64>>,
}

impl From<&CountSet> for CountSetDoc {
    fn from(c: &CountSet) -> Self {
        let all = |f: fn(&CoincidenceRecord) -> Option<f64>| c.records.iter().map(f).collect::<Option<Vec<_>>>();
        Self {
            settings: c.records.iter().map(|r| [r.setting.arm1, r.setting.arm2]).collect(),
            observed: c.observed(),
            flux: c.flux,
            accidentals: c.accidentals,
            seed: c.rng_seed,
            expected: all(|r| r.expected),
            probability: all(|r| r.probability),
        }
    }
}

impl TryFrom<CountSetDoc> for CountSet {
    type Error = Error;

    fn try_from(doc: CountSetDoc) -> Result<Self> {
        check_rates(doc.flux, doc.accidentals)?;
        let standard = standard_settings();
        if doc.settings.len() != standard.len() {
            return Err(Error::InvalidCounts(format!("expected 16 settings, got {}", doc.settings.len())));
        }
        for (i, (got, want)) in doc.settings.iter().zip(&standard).enumerate() {
            if got[0] != want.arm1 || got[1] != want.arm2 {
                return Err(Error::InvalidCounts(format!(
                    "setting {i} is {}{}, expected {want}",
                    got[0], got[1]
                )));
            }
        }
        if doc.observed.len() != 16 {
            return Err(Error::InvalidCounts(format!("expected 16 observed counts, got {}", doc.observed.len())));
        }
        let optional = |v: Option<Vec<f64>>, name: &str| -> Result<Vec<Option<f64>>> {
            match v {
                None => Ok(vec![None; 16]),
                Some(v) if v.len() == 16 && v.iter().all(|x| x.is_finite() && *x >= 0.0) => {
                    Ok(v.into_iter().map(Some).collect())
                }
                Some(_) => Err(Error::InvalidCounts(format!("{name} must hold 16 nonnegative finite values"))),
            }
        };
        let expected = optional(doc.expected, "expected")?;
        let probability = optional(doc.probability, "probability")?;
        let records = standard
            .into_iter()
            .enumerate()
            .map(|(i, setting)| CoincidenceRecord {
                setting,
                probability: probability[i],
                expected: expected[i],
                observed: doc.observed[i],
            })
            .collect();
        Ok(Self { records, flux: doc.flux, accidentals: doc.accidentals, rng_seed: doc.seed })
    }
}

/// Gaussian readout noise for the classical probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Reconstructs Λ from the channel's action on three known input polarizations.
pub fn classical_probe(
    channel: &UnitalChannel,
    inputs: &[BlochVector; 3],
    noise: Option<ReadoutNoise>,
) -> Result<UnitalChannel> {
    let x = Matrix3::from_columns(&inputs.map(|r| *r.vector()));
    let det = x.determinant();
    if det.abs() < 1e-9 {
        return Err(Error::DependentProbeInputs(det.abs()));
    }
    let mut y = Matrix3::from_columns(&inputs.map(|r| channel.apply_vector(r.vector())));
    if let Some(n) = noise {
        if !(n.sigma.is_finite() && n.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("readout sigma {} invalid", n.sigma)));
        }
        if n.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
            let normal = Normal::new(0.0, n.sigma).expect("valid sigma");
            y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
    }
    let inverse = x.try_inverse().ok_or(Error::DependentProbeInputs(det.abs()))?;
    UnitalChannel::new(y * inverse)
}

/// H, D and L: the three calibration polarizations.
pub fn probe_inputs() -> [BlochVector; 3] {
    [PolarizationKet::H.bloch(), PolarizationKet::D.bloch(), PolarizationKet::L.bloch()]
}
