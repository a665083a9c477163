//! Experiment configuration: JSON schema, validation and conversion to core types.

use std::fmt;
use std::path::PathBuf;

use nalgebra::Vector3;
use qchannel_core::analysis::PipelineConfig;
use qchannel_core::{DutyCycleSchedule, EpcModel, PauliMixture, Rotation3, ScheduleSegment, UnitalChannel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    StateTomo,
    ProcessTomo,
    EdgeSweep,
    FaceSweep,
    ClassicalProbe,
    GenerateCounts,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::StateTomo => "state-tomo",
            Mode::ProcessTomo => "process-tomo",
            Mode::EdgeSweep => "edge-sweep",
            Mode::FaceSweep => "face-sweep",
            Mode::ClassicalProbe => "classical-probe",
            Mode::GenerateCounts => "generate-counts",
        }
    }

    fn needs_channel(self) -> bool {
        matches!(self, Mode::ProcessTomo | Mode::ClassicalProbe)
    }

    fn is_sweep(self) -> bool {
        matches!(self, Mode::EdgeSweep | Mode::FaceSweep)
    }
}

/// (|HH⟩ + e^{iφ}|VV⟩)/√2 with an isotropic admixture of 𝟙/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputStateConfig {
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub mixing: f64,
}

impl Default for InputStateConfig {
    fn default() -> Self {
        Self { phase: 0.0, mixing: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    pub axis: [f64; 3],
    pub angle_deg: f64,
}

impl RotationConfig {
    pub fn to_rotation(&self) -> Result<Rotation3, String> {
        Rotation3::from_axis_angle(&Vector3::from(self.axis), self.angle_deg.to_radians()).map_err(|e| e.to_string())
    }

    fn half_turn(axis: [f64; 3]) -> Self {
        Self { axis, angle_deg: 180.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub rotation: RotationConfig,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub segments: Vec<SegmentConfig>,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    0.150
}

/// One step of the EPC driving loop: commanded retardances (radians) held for a fraction of the period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetardanceStep {
    pub retardances: Vec<f64>,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpcConfig {
    /// Squeezer fast-axis orientations in degrees.
    #[serde(default = "default_squeezers")]
    pub squeezers: Vec<f64>,
    #[serde(default)]
    pub retardance_program: Vec<RetardanceStep>,
    /// Residual retardance (radians) of an undriven squeezer.
    #[serde(default)]
    pub hysteresis: f64,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_squeezers() -> Vec<f64> {
    vec![0.0, 45.0, 0.0, 45.0]
}

impl EpcConfig {
    pub fn model(&self) -> EpcModel {
        let axes: Vec<f64> = self.squeezers.iter().map(|d| d.to_radians()).collect();
        EpcModel::with_axes(&axes, self.hysteresis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    PauliMixture(PauliMixture),
    Schedule(ScheduleConfig),
    Epc(EpcConfig),
}

impl ChannelConfig {
    pub fn build(&self) -> Result<UnitalChannel, String> {
        match self {
            ChannelConfig::PauliMixture(m) => {
                m.validate().map_err(|e| e.to_string())?;
                Ok(UnitalChannel::from_pauli_mixture(m))
            }
            ChannelConfig::Schedule(s) => {
                let segments = s
                    .segments
                    .iter()
                    .map(|seg| Ok(ScheduleSegment { rotation: seg.rotation.to_rotation()?, fraction: seg.fraction }))
                    .collect::<Result<Vec<_>, String>>()?;
                let schedule = DutyCycleSchedule::new(segments, s.period).map_err(|e| e.to_string())?;
                Ok(UnitalChannel::from_schedule(&schedule))
            }
            ChannelConfig::Epc(e) => {
                let model = e.model();
                let segments = e
                    .retardance_program
                    .iter()
                    .map(|step| {
                        let rotation = model.unitary(&step.retardances).map_err(|e| e.to_string())?;
                        Ok(ScheduleSegment { rotation, fraction: step.fraction })
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                let schedule = DutyCycleSchedule::new(segments, e.period).map_err(|e| e.to_string())?;
                Ok(UnitalChannel::from_schedule(&schedule))
            }
        }
    }

    /// Rotation performed while the device is undriven.
    pub fn idle(&self) -> Result<Rotation3, String> {
        match self {
            ChannelConfig::Epc(e) => e.model().idle().map_err(|e| e.to_string()),
            _ => Ok(Rotation3::identity()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub pre: RotationConfig,
    pub post: RotationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeNoiseConfig {
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub input_state: InputStateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelConfig>,
    #[serde(default = "default_flux")]
    pub flux: f64,
    #[serde(default)]
    pub accidentals: f64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub p_grid: Vec<f64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub noiseless: bool,
    /// Reconstruct the input state from its own counts instead of using it as configured.
    #[serde(default)]
    pub reconstruct_input: bool,
    /// Rotation R of the edge sweep; default 180° about z.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_rotation: Option<RotationConfig>,
    /// Rotations R₁, R₂ of the face sweep; default 180° about x and y.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_rotations: Option<[RotationConfig; 2]>,
    /// Fixed fiber rotations around the controller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameConfig>,
    /// CountSet JSON to reconstruct instead of simulating (state-tomo).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts_path: Option<PathBuf>,
    #[serde(default = "default_mesh")]
    pub mesh_resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_noise: Option<ProbeNoiseConfig>,
    #[serde(default = "default_max_condition")]
    pub max_condition: f64,
}

fn default_flux() -> f64 {
    1e4
}

fn default_mesh() -> usize {
    24
}

fn default_max_condition() -> f64 {
    qchannel_core::tomography::DEFAULT_MAX_CONDITION
}

/// A schema or invariant violation located by JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Parses a config document, reporting the failing JSON path on schema errors.
pub fn parse(text: &str) -> Result<ExperimentConfig, Diagnostic> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
        Diagnostic::new(path, e.into_inner().to_string())
    })
}

fn check_rotation(out: &mut Vec<Diagnostic>, path: &str, r: &RotationConfig) {
    if let Err(e) = r.to_rotation() {
        out.push(Diagnostic::new(path, e));
    }
}

fn check_finite(out: &mut Vec<Diagnostic>, path: &str, v: f64) -> bool {
    if v.is_finite() {
        true
    } else {
        out.push(Diagnostic::new(path, "must be finite"));
        false
    }
}

impl ExperimentConfig {
    /// All invariant violations; empty exactly when `run` would start.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        check_finite(&mut out, "$.input_state.phase", self.input_state.phase);
        if !(0.0..=1.0).contains(&self.input_state.mixing) {
            out.push(Diagnostic::new("$.input_state.mixing", format!("{} outside [0, 1]", self.input_state.mixing)));
        }
        if !(self.flux.is_finite() && self.flux > 0.0) {
            out.push(Diagnostic::new("$.flux", format!("must be positive and finite, got {}", self.flux)));
        }
        if !(self.accidentals.is_finite() && self.accidentals >= 0.0) {
            out.push(Diagnostic::new("$.accidentals", format!("must be nonnegative and finite, got {}", self.accidentals)));
        }
        if !(self.max_condition.is_finite() && self.max_condition >= 1.0) {
            out.push(Diagnostic::new("$.max_condition", "must be finite and at least 1"));
        }
        for (i, p) in self.p_grid.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                out.push(Diagnostic::new(format!("$.p_grid[{i}]"), format!("{p} outside [0, 1]")));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            out.push(Diagnostic::new("$.output_dir", "must not be empty"));
        }
        if self.mesh_resolution < 4 {
            out.push(Diagnostic::new("$.mesh_resolution", "must be at least 4"));
        }
        if let Some(r) = &self.edge_rotation {
            check_rotation(&mut out, "$.edge_rotation", r);
        }
        if let Some([r1, r2]) = &self.face_rotations {
            check_rotation(&mut out, "$.face_rotations[0]", r1);
            check_rotation(&mut out, "$.face_rotations[1]", r2);
        }
        if let Some(f) = &self.frame {
            check_rotation(&mut out, "$.frame.pre", &f.pre);
            check_rotation(&mut out, "$.frame.post", &f.post);
        }
        if let Some(n) = &self.probe_noise {
            if !(n.sigma.is_finite() && n.sigma >= 0.0) {
                out.push(Diagnostic::new("$.probe_noise.sigma", "must be nonnegative and finite"));
            }
        }
        if let Some(ch) = &self.channel {
            self.channel_diagnostics(ch, &mut out);
        }

        if self.mode.needs_channel() && self.channel.is_none() {
            out.push(Diagnostic::new("$.channel", format!("required for mode {}", self.mode.name())));
        }
        if self.mode.is_sweep() && self.p_grid.is_empty() {
            out.push(Diagnostic::new("$.p_grid", format!("required for mode {}", self.mode.name())));
        }
        let simulates = match self.mode {
            Mode::StateTomo => self.counts_path.is_none(),
            Mode::ProcessTomo | Mode::EdgeSweep | Mode::FaceSweep => true,
            Mode::GenerateCounts => true,
            Mode::ClassicalProbe => false,
        };
        if simulates && !self.noiseless && self.seeds.is_empty() {
            out.push(Diagnostic::new("$.seeds", "at least one seed is required unless noiseless"));
        }
        if self.mode == Mode::GenerateCounts && self.noiseless {
            out.push(Diagnostic::new("$.noiseless", "generate-counts always samples"));
        }
        if self.counts_path.is_some() && self.mode != Mode::StateTomo {
            out.push(Diagnostic::new("$.counts_path", "only used by state-tomo"));
        }
        if self.mode.is_sweep() && matches!(self.channel, Some(ChannelConfig::PauliMixture(_) | ChannelConfig::Schedule(_))) {
            out.push(Diagnostic::new("$.channel", "sweeps take only an epc channel (its idle state sets the I segment)"));
        }
        out
    }

    fn channel_diagnostics(&self, ch: &ChannelConfig, out: &mut Vec<Diagnostic>) {
        match ch {
            ChannelConfig::PauliMixture(m) => {
                if let Err(e) = m.validate() {
                    out.push(Diagnostic::new("$.channel.pauli_mixture", e.to_string()));
                }
            }
            ChannelConfig::Schedule(s) => {
                let before = out.len();
                for (i, seg) in s.segments.iter().enumerate() {
                    check_rotation(out, &format!("$.channel.schedule.segments[{i}].rotation"), &seg.rotation);
                }
                if !(s.period.is_finite() && s.period > 0.0) {
                    out.push(Diagnostic::new("$.channel.schedule.period", "must be positive and finite"));
                }
                if out.len() == before {
                    if let Err(e) = ch.build() {
                        out.push(Diagnostic::new("$.channel.schedule", e));
                    }
                }
            }
            ChannelConfig::Epc(e) => {
                let before = out.len();
                let n = e.squeezers.len();
                if n == 0 {
                    out.push(Diagnostic::new("$.channel.epc.squeezers", "needs at least one squeezer"));
                }
                for (i, a) in e.squeezers.iter().enumerate() {
                    check_finite(out, &format!("$.channel.epc.squeezers[{i}]"), *a);
                }
                check_finite(out, "$.channel.epc.hysteresis", e.hysteresis);
                if !(e.period.is_finite() && e.period > 0.0) {
                    out.push(Diagnostic::new("$.channel.epc.period", "must be positive and finite"));
                }
                for (i, step) in e.retardance_program.iter().enumerate() {
                    if step.retardances.len() != n {
                        out.push(Diagnostic::new(
                            format!("$.channel.epc.retardance_program[{i}].retardances"),
                            format!("expected {n} retardances, got {}", step.retardances.len()),
                        ));
                    }
                    for (j, r) in step.retardances.iter().enumerate() {
                        check_finite(out, &format!("$.channel.epc.retardance_program[{i}].retardances[{j}]"), *r);
                    }
                }
                let usable = !self.mode.is_sweep() || !e.retardance_program.is_empty();
                if out.len() == before && usable {
                    if let Err(err) = ch.build() {
                        out.push(Diagnostic::new("$.channel.epc.retardance_program", err));
                    }
                }
            }
        }
    }

    /// Pipeline settings shared by the tomography and sweep modes. Call after `diagnostics` is empty.
    pub fn pipeline(&self) -> Result<PipelineConfig, String> {
        let idle = match &self.channel {
            Some(ch) => ch.idle()?,
            None => Rotation3::identity(),
        };
        let frame = match &self.frame {
            Some(f) => Some((f.pre.to_rotation()?, f.post.to_rotation()?)),
            None => None,
        };
        Ok(PipelineConfig {
            input_phase: self.input_state.phase,
            input_mixing: self.input_state.mixing,
            flux: self.flux,
            accidentals: self.accidentals,
            noiseless: self.noiseless,
            reconstruct_input: self.reconstruct_input,
            idle,
            frame,
            max_condition: self.max_condition,
            ..PipelineConfig::default()
        })
    }

    pub fn edge_rotation(&self) -> RotationConfig {
        self.edge_rotation.unwrap_or(RotationConfig::half_turn([0.0, 0.0, 1.0]))
    }

    pub fn face_rotations(&self) -> [RotationConfig; 2] {
        self.face_rotations
            .unwrap_or([RotationConfig::half_turn([1.0, 0.0, 0.0]), RotationConfig::half_turn([0.0, 1.0, 0.0])])
    }
}
