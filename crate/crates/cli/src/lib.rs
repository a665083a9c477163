//! Batch runner behind the `qchannel` binary: loads an experiment config,
//! runs the requested pipeline and writes CSV/JSON artifacts plus a manifest.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qchannel_core::analysis::{
    self, edge_sweep, face_sweep, fit_line, identity_face, principal_axis_alignment, project_to_face, Estimate,
    PipelineConfig, SweepRow, AXIS_DEGENERACY_GAP,
};
use qchannel_core::measurement::probe_inputs;
use qchannel_core::tomography::{density_matrix_json, matrix3_json, mle_from_counts, MleReport, ProcessReport};
use qchannel_core::{
    classical_probe, expected_counts, jamiolkowski_state, mle_reconstruct, standard_settings, CountSet, MleOptions,
    MleResult, TwoQubitState,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{Diagnostic, ExperimentConfig, Mode};

/// Environment variable that re-roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "QCHANNEL_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", format_diagnostics(.0))]
    Config(Vec<Diagnostic>),
    #[error("{context}: {source}")]
    Domain {
        context: String,
        #[source]
        source: qchannel_core::Error,
    },
    #[error("{0}")]
    DomainMessage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 usage, 2 domain, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Domain { .. } | CliError::DomainMessage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

pub fn format_diagnostics(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

fn domain(context: impl Into<String>) -> impl FnOnce(qchannel_core::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Domain { context, source }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    config::parse(&text).map_err(|d| CliError::Config(vec![d]))
}

/// Diagnostics for a config file; an unreadable file is an I/O error.
pub fn validate(path: &Path) -> Result<Vec<Diagnostic>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(validate_str(&text))
}

pub fn validate_str(text: &str) -> Vec<Diagnostic> {
    match config::parse(text) {
        Ok(cfg) => cfg.diagnostics(),
        Err(d) => vec![d],
    }
}

/// One-off overrides from the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub flux: Option<f64>,
    pub accidentals: Option<f64>,
    pub noiseless: bool,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(f) = self.flux {
            cfg.flux = f;
        }
        if let Some(a) = self.accidentals {
            cfg.accidentals = a;
        }
        if self.noiseless {
            cfg.noiseless = true;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
    }
}

/// Resolves the output directory, re-rooting relative paths under `root` when given.
pub fn output_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    match root {
        Some(root) if cfg.output_dir.is_relative() => root.join(&cfg.output_dir),
        _ => cfg.output_dir.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFlag {
    pub label: String,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub output_dir: PathBuf,
    /// File names relative to `output_dir`, in write order.
    pub artifacts: Vec<String>,
    pub runs: Vec<RunFlag>,
    pub wall_clock_seconds: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Atomic artifact writer: temp file in the target directory, then rename.
struct Artifacts<'a> {
    dir: PathBuf,
    cfg: &'a ExperimentConfig,
    written: Vec<String>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_seed(seed: Option<u64>) -> String {
    seed.map(|s| s.to_string()).unwrap_or_default()
}

impl<'a> Artifacts<'a> {
    fn new(dir: PathBuf, cfg: &'a ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, cfg, written: Vec::new() })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io_err(&self.dir))?;
        tmp.write_all(bytes).map_err(io_err(&path))?;
        tmp.as_file().sync_all().map_err(io_err(&path))?;
        tmp.persist(&path).map_err(|e| CliError::Io { path: path.clone(), source: e.error })?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV plus a `<name>.json` sidecar carrying the full config.
    fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        let csv_err = |e: csv::Error| CliError::Io { path: path.clone(), source: e.into() };
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io { path: path.clone(), source: e.into_error() })?;
        self.write_bytes(name, &bytes)?;
        let sidecar = json!({
            "artifact": name,
            "columns": header,
            "mode": self.cfg.mode.name(),
            "config": self.cfg,
        });
        self.write_json(&format!("{name}.json"), &sidecar)
    }
}

fn mle_options() -> MleOptions {
    MleOptions::default()
}

#[derive(Serialize)]
struct StateReport {
    seed: Option<u64>,
    concurrence: f64,
    linear_entropy: f64,
    purity: f64,
    fidelity_to_source: f64,
    coherence_phase: f64,
    mle: MleReport,
}

fn state_report(seed: Option<u64>, r: &MleResult, source: &TwoQubitState) -> StateReport {
    StateReport {
        seed,
        concurrence: r.state.concurrence(),
        linear_entropy: r.state.linear_entropy(),
        purity: r.state.purity(),
        fidelity_to_source: r.state.fidelity(source),
        coherence_phase: r.state.coherence_phase(),
        mle: MleReport::from(r),
    }
}

fn seed_tag(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("seed{s}"),
        None => "noiseless".to_string(),
    }
}

fn seed_list(cfg: &ExperimentConfig) -> Vec<Option<u64>> {
    if cfg.noiseless {
        vec![None]
    } else {
        cfg.seeds.iter().copied().map(Some).collect()
    }
}

/// Validates and runs an experiment; the manifest is written last.
pub fn run(cfg: &ExperimentConfig, output_root: Option<&Path>) -> Result<RunManifest, CliError> {
    let diagnostics = cfg.diagnostics();
    if !diagnostics.is_empty() {
        return Err(CliError::Config(diagnostics));
    }
    let started = Instant::now();
    let dir = output_dir(cfg, output_root);
    let mut out = Artifacts::new(dir.clone(), cfg)?;
    let pipeline = cfg.pipeline().map_err(CliError::DomainMessage)?;
    let runs = match cfg.mode {
        Mode::StateTomo => run_state_tomo(cfg, &pipeline, &mut out)?,
        Mode::ProcessTomo => run_process_tomo(cfg, &pipeline, &mut out)?,
        Mode::EdgeSweep => run_edge_sweep(cfg, &pipeline, &mut out)?,
        Mode::FaceSweep => run_face_sweep(cfg, &pipeline, &mut out)?,
        Mode::ClassicalProbe => run_classical_probe(cfg, &mut out)?,
        Mode::GenerateCounts => run_generate_counts(cfg, &pipeline, &mut out)?,
    };
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        output_dir: dir,
        artifacts: out.written.clone(),
        runs,
        wall_clock_seconds: 0.0,
    };
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    out.write_json(MANIFEST_NAME, &manifest)?;
    Ok(manifest)
}

fn run_state_tomo(cfg: &ExperimentConfig, pipeline: &PipelineConfig, out: &mut Artifacts) -> Result<Vec<RunFlag>, CliError> {
    let source = pipeline.source_state().map_err(domain("input state"))?;
    let settings = standard_settings();
    let results: Vec<(Option<u64>, MleResult)> = if let Some(path) = &cfg.counts_path {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let counts = CountSet::from_json(&text).map_err(domain(format!("count set {}", path.display())))?;
        let r = mle_reconstruct(&counts, &settings, &mle_options()).map_err(domain("reconstruction"))?;
        vec![(Some(counts.rng_seed), r)]
    } else {
        seed_list(cfg)
            .into_par_iter()
            .map(|seed| {
                let r = match seed {
                    None => {
                        let mean = expected_counts(&source, cfg.flux, cfg.accidentals).map_err(domain("expected counts"))?;
                        mle_from_counts(&settings, &mean, cfg.flux, cfg.accidentals, &mle_options())
                    }
                    Some(s) => {
                        let counts = CountSet::sample(&source, cfg.flux, cfg.accidentals, s).map_err(domain("sampling"))?;
                        mle_reconstruct(&counts, &settings, &mle_options())
                    }
                }
                .map_err(domain(format!("reconstruction ({})", seed_tag(seed))))?;
                Ok((seed, r))
            })
            .collect::<Result<_, CliError>>()?
    };

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(seed, r)| {
            vec![
                fmt_seed(*seed),
                fmt_f(r.state.concurrence()),
                fmt_f(r.state.linear_entropy()),
                fmt_f(r.state.purity()),
                fmt_f(r.state.fidelity(&source)),
                fmt_f(r.neg_log_likelihood),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "state_tomo.csv",
        &["seed", "concurrence", "linear_entropy", "purity", "fidelity", "neg_log_likelihood", "iterations", "converged"],
        &rows,
    )?;
    let mut flags = Vec::new();
    for (seed, r) in &results {
        let label = match (&cfg.counts_path, seed) {
            (Some(_), _) => "counts".to_string(),
            _ => seed_tag(*seed),
        };
        out.write_json(&format!("state_{label}.json"), &state_report(*seed, r, &source))?;
        flags.push(RunFlag { label, converged: r.converged });
    }
    Ok(flags)
}

fn run_process_tomo(cfg: &ExperimentConfig, pipeline: &PipelineConfig, out: &mut Artifacts) -> Result<Vec<RunFlag>, CliError> {
    let channel_cfg = cfg.channel.as_ref().expect("validated");
    let channel = channel_cfg.build().map_err(CliError::DomainMessage)?;
    let channel = match &pipeline.frame {
        Some((pre, post)) => channel.framed(pre, post),
        None => channel,
    };
    let results = seed_list(cfg)
        .into_par_iter()
        .map(|seed| {
            let input: Estimate = analysis::estimate_input(pipeline, seed).map_err(domain("input tomography"))?;
            let (process, converged) =
                analysis::characterize(&channel, pipeline, &input, seed, 0).map_err(domain(format!("process tomography ({})", seed_tag(seed))))?;
            Ok((seed, process, converged))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(seed, p, converged)| {
            let d = p.svd.d;
            let margin = qchannel_core::tetrahedron_check(d, 0.0).margin;
            vec![fmt_seed(*seed), fmt_f(d[0]), fmt_f(d[1]), fmt_f(d[2]), fmt_f(margin), fmt_f(p.condition_number), converged.to_string()]
        })
        .collect();
    out.write_csv("process_tomo.csv", &["seed", "D1", "D2", "D3", "margin", "condition_number", "converged"], &rows)?;

    let truth = channel.signed_svd();
    let mut flags = Vec::new();
    for (seed, p, converged) in &results {
        let label = seed_tag(*seed);
        let report = json!({
            "seed": seed,
            "process": ProcessReport::from(p),
            "true_lambda": matrix3_json(channel.lambda()),
            "true_d": truth.d,
            "frobenius_error": (p.lambda.lambda() - channel.lambda()).norm(),
        });
        out.write_json(&format!("process_{label}.json"), &report)?;
        write_ellipsoid(out, &format!("ellipsoid_{label}"), &p.lambda, cfg.mesh_resolution)?;
        flags.push(RunFlag { label, converged: *converged });
    }
    Ok(flags)
}

fn write_ellipsoid(
    out: &mut Artifacts,
    stem: &str,
    channel: &qchannel_core::UnitalChannel,
    resolution: usize,
) -> Result<(), CliError> {
    let e = channel.on_sphere(resolution).map_err(domain("ellipsoid mesh"))?;
    let rows: Vec<Vec<String>> = e
        .points
        .iter()
        .map(|p| vec![fmt_f(p.u), fmt_f(p.v), fmt_f(p.image.x), fmt_f(p.image.y), fmt_f(p.image.z)])
        .collect();
    out.write_csv(&format!("{stem}.csv"), &["u", "v", "x", "y", "z"], &rows)?;
    let axes: Vec<Vec<String>> = e
        .axes
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let (from, to) = (e.center - a, e.center + a);
            vec![(k + 1).to_string(), fmt_f(from.x), fmt_f(from.y), fmt_f(from.z), fmt_f(to.x), fmt_f(to.y), fmt_f(to.z)]
        })
        .collect();
    out.write_csv(&format!("{stem}_axes.csv"), &["axis", "x0", "y0", "z0", "x1", "y1", "z1"], &axes)
}

fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![fmt_f(r.p), fmt_seed(r.seed), fmt_f(r.d[0]), fmt_f(r.d[1]), fmt_f(r.d[2]), fmt_f(r.margin)])
        .collect()
}

const SWEEP_HEADER: [&str; 6] = ["p", "seed", "D1", "D2", "D3", "margin"];

fn sweep_flags(rows: &[SweepRow]) -> Vec<RunFlag> {
    rows.iter()
        .map(|r| RunFlag { label: format!("p={}/{}", r.p, seed_tag(r.seed)), converged: r.converged })
        .collect()
}

/// Max pairwise principal-axis angle per seed.
fn alignment_summary(rows: &[SweepRow]) -> Result<serde_json::Value, CliError> {
    let mut seeds: Vec<Option<u64>> = Vec::new();
    for r in rows {
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    let mut per_seed = Vec::new();
    for seed in seeds {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.seed == seed).collect();
        let svds: Vec<_> = group.iter().map(|r| r.process.svd).collect();
        let entry = match principal_axis_alignment(&svds, AXIS_DEGENERACY_GAP) {
            Ok(a) => json!({
                "seed": seed,
                "max_angle_deg": a.max_angle_deg,
                "excluded_p": a.excluded.iter().map(|&i| group[i].p).collect::<Vec<_>>(),
            }),
            Err(e) => json!({ "seed": seed, "error": e.to_string() }),
        };
        per_seed.push(entry);
    }
    Ok(json!({ "degeneracy_gap": AXIS_DEGENERACY_GAP, "per_seed": per_seed }))
}

fn summary_json(rows: &[SweepRow]) -> serde_json::Value {
    let s: Vec<_> = analysis::summarize(rows)
        .into_iter()
        .map(|s| json!({ "p": s.p, "median_d": s.median_d, "margin_std": s.margin_std, "min_margin": s.min_margin, "runs": s.runs }))
        .collect();
    json!(s)
}

fn run_edge_sweep(cfg: &ExperimentConfig, pipeline: &PipelineConfig, out: &mut Artifacts) -> Result<Vec<RunFlag>, CliError> {
    let r = cfg.edge_rotation().to_rotation().map_err(CliError::DomainMessage)?;
    let rows = edge_sweep(&cfg.p_grid, &r, pipeline, &cfg.seeds).map_err(domain("edge sweep"))?;
    out.write_csv("edge_sweep.csv", &SWEEP_HEADER, &sweep_rows(&rows))?;
    let summary = json!({
        "per_p": summary_json(&rows),
        "alignment": alignment_summary(&rows)?,
    });
    out.write_json("edge_summary.json", &summary)?;
    Ok(sweep_flags(&rows))
}

fn run_face_sweep(cfg: &ExperimentConfig, pipeline: &PipelineConfig, out: &mut Artifacts) -> Result<Vec<RunFlag>, CliError> {
    let [a, b] = cfg.face_rotations();
    let r1 = a.to_rotation().map_err(CliError::DomainMessage)?;
    let r2 = b.to_rotation().map_err(CliError::DomainMessage)?;
    let rows = face_sweep(&cfg.p_grid, &r1, &r2, pipeline, &cfg.seeds).map_err(domain("face sweep"))?;
    out.write_csv("face_sweep.csv", &SWEEP_HEADER, &sweep_rows(&rows))?;

    let triplets: Vec<[f64; 3]> = rows.iter().map(|r| r.d).collect();
    let proj = project_to_face(&triplets, identity_face()).map_err(domain("face projection"))?;
    let proj_rows: Vec<Vec<String>> = rows
        .iter()
        .zip(proj.points_2d.iter().zip(&proj.residuals))
        .map(|(r, (pt, res))| vec![fmt_f(r.p), fmt_seed(r.seed), fmt_f(pt.x), fmt_f(pt.y), fmt_f(*res)])
        .collect();
    out.write_csv("face_projection.csv", &["p", "seed", "x2d", "y2d", "residual"], &proj_rows)?;

    let (_, median_dir) = proj.frame.median();
    let fit = match fit_line(&proj.points_2d) {
        Ok(f) => json!({
            "direction": [f.direction.x, f.direction.y],
            "point": [f.point.x, f.point.y],
            "rms_residual": f.rms_residual,
            "angle_to_median_deg": f.angle_to_deg(&median_dir),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let distances = proj.median_distances();
    let summary = json!({
        "frame": {
            "origin": proj.frame.origin.as_slice(),
            "ex": proj.frame.ex.as_slice(),
            "ey": proj.frame.ey.as_slice(),
            "normal": proj.frame.normal.as_slice(),
            "vertices": proj.frame.vertices.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>(),
        },
        "line_fit": fit,
        "max_median_distance": distances.iter().copied().fold(0.0, f64::max),
        "max_abs_residual": proj.residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
        "per_p": summary_json(&rows),
    });
    out.write_json("face_summary.json", &summary)?;
    Ok(sweep_flags(&rows))
}

fn run_classical_probe(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<RunFlag>, CliError> {
    let channel = cfg.channel.as_ref().expect("validated").build().map_err(CliError::DomainMessage)?;
    let noise = cfg.probe_noise.map(|n| qchannel_core::measurement::ReadoutNoise { sigma: n.sigma, seed: n.seed });
    let estimate = classical_probe(&channel, &probe_inputs(), noise).map_err(domain("classical probe"))?;
    let report = json!({
        "inputs": probe_inputs().iter().map(|b| b.vector().as_slice().to_vec()).collect::<Vec<_>>(),
        "lambda": matrix3_json(estimate.lambda()),
        "true_lambda": matrix3_json(channel.lambda()),
        "frobenius_error": (estimate.lambda() - channel.lambda()).norm(),
        "d": estimate.signed_svd().d,
    });
    out.write_json("probe.json", &report)?;
    let rows: Vec<Vec<String>> =
        (0..3).map(|r| (0..3).map(|c| fmt_f(estimate.lambda()[(r, c)])).collect()).collect();
    out.write_csv("probe_lambda.csv", &["c1", "c2", "c3"], &rows)?;
    write_ellipsoid(out, "ellipsoid_probe", &estimate, cfg.mesh_resolution)?;
    Ok(vec![RunFlag { label: "probe".into(), converged: true }])
}

fn run_generate_counts(cfg: &ExperimentConfig, pipeline: &PipelineConfig, out: &mut Artifacts) -> Result<Vec<RunFlag>, CliError> {
    let source = pipeline.source_state().map_err(domain("input state"))?;
    let state = match &cfg.channel {
        Some(ch) if !matches!(ch, config::ChannelConfig::Epc(e) if e.retardance_program.is_empty()) => {
            let channel = ch.build().map_err(CliError::DomainMessage)?;
            jamiolkowski_state(&channel, &source).map_err(domain("channel output state"))?
        }
        _ => source,
    };
    let mut flags = Vec::new();
    for &seed in &cfg.seeds {
        let counts = CountSet::sample(&state, cfg.flux, cfg.accidentals, seed).map_err(domain("sampling"))?;
        let mut text = counts.to_json().map_err(domain("serialize counts"))?;
        text.push('\n');
        out.write_bytes(&format!("counts_seed{seed}.json"), text.as_bytes())?;
        flags.push(RunFlag { label: seed_tag(Some(seed)), converged: true });
    }
    out.write_json("true_state.json", &json!({ "density_matrix": density_matrix_json(&state) }))?;
    Ok(flags)
}
