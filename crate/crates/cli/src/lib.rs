//! Command-line front end: load inputs, resolve parameters, run one
//! calibrator (or all of them segment by segment), write a JSON report.
//!
//! Exit codes: 0 success, 1 data or convergence failure (an error report is
//! written), 2 usage or configuration error (nothing is written).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consistency;
pub mod dataset;
pub mod params;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use x2car::{io, CalibError};

use crate::dataset::{Dataset, Method, Trace};
use crate::params::Params;
use crate::report::{emit, to_json, ErrorReport, Report, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] CalibError),
}

#[derive(Debug, Parser)]
#[command(
    name = "x2car",
    version,
    about = "Sensor-to-vehicle rotation calibration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML parameter file; missing keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report path (stdout when absent). For `simulate`, the output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Overrides the `seed` parameter (and the scenario seed for `simulate`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write `<output stem>_trace.csv` (camera, radar-velocity).
    #[arg(long, global = true)]
    pub trace: bool,
    /// Parameter override, e.g. `--set lidar.inlier_tol=0.03`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Inputs {
    /// Camera intrinsics (TOML).
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    /// Per-frame vanishing point and horizon angle (CSV).
    #[arg(long, conflicts_with = "lines")]
    pub vp: Option<PathBuf>,
    /// Line segments grouped by timestamp (CSV).
    #[arg(long)]
    pub lines: Option<PathBuf>,
    /// Sensor poses (CSV). For camera consistency, the vehicle track.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Point-cloud directory.
    #[arg(long)]
    pub clouds: Option<PathBuf>,
    /// Radar detections (CSV).
    #[arg(long)]
    pub radar: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll, pitch and yaw from vanishing points and horizon angles.
    Camera(Inputs),
    /// Roll, pitch, yaw and height from point clouds and sensor poses.
    Lidar(Inputs),
    /// Yaw of an INS against its own trajectory heading.
    Gnss(Inputs),
    /// Radar yaw from Doppler of static targets.
    RadarVelocity(Inputs),
    /// Radar yaw from range and azimuth of tracked static objects.
    RadarPosition(Inputs),
    /// Generate a synthetic scenario into the output directory.
    Simulate {
        /// Scenario description (TOML).
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Per-segment estimates and their spread.
    Consistency {
        #[arg(long, value_enum)]
        method: Method,
        /// Overrides `consistency.segment_length`, seconds.
        #[arg(long)]
        segment_length: Option<f64>,
        #[command(flatten)]
        inputs: Inputs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Camera(_) => "camera",
            Command::Lidar(_) => "lidar",
            Command::Gnss(_) => "gnss",
            Command::RadarVelocity(_) => "radar-velocity",
            Command::RadarPosition(_) => "radar-position",
            Command::Simulate { .. } => "simulate",
            Command::Consistency { .. } => "consistency",
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let name = cli.command.name();
    let output = cli.common.output.clone();
    match execute(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err}");
            // Simulate's output is a directory; its error report goes to stdout.
            let path = output.filter(|_| name != "simulate");
            if let Err(e) = emit(path.as_deref(), &to_json(&ErrorReport::new(name, &err))) {
                eprintln!("error: cannot write error report: {e}");
            }
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut params = Params::resolve(cli.common.config.as_deref(), &cli.common.overrides)?;
    if let Some(seed) = cli.common.seed {
        params.seed = seed;
    }
    let trace_path = if cli.common.trace {
        let out = cli
            .common
            .output
            .as_deref()
            .ok_or_else(|| CliError::Usage("--trace needs --output".into()))?;
        Some(trace_path(out))
    } else {
        None
    };
    let name = cli.command.name();

    match &cli.command {
        Command::Simulate { scenario } => {
            if trace_path.is_some() {
                return Err(CliError::Usage(
                    "--trace is not available for simulate".into(),
                ));
            }
            let dir = cli
                .common
                .output
                .as_deref()
                .ok_or_else(|| CliError::Usage("simulate needs --output".into()))?;
            must_exist(scenario)?;
            let report = simulate(scenario, dir, cli.common.seed)?;
            emit(None, &report)
        }
        Command::Consistency {
            method,
            segment_length,
            inputs,
        } => {
            if trace_path.is_some() {
                return Err(CliError::Usage(
                    "--trace is not available for consistency".into(),
                ));
            }
            if let Some(l) = segment_length {
                params.consistency.segment_length = *l;
                params.validate()?;
            }
            let (data, paths) = load(*method, inputs, &params, true)?;
            let result = consistency::consistency(&data, &params)?;
            emit(
                cli.common.output.as_deref(),
                &to_json(&envelope(name, paths, &params, result)),
            )
        }
        Command::Camera(inputs)
        | Command::Lidar(inputs)
        | Command::Gnss(inputs)
        | Command::RadarVelocity(inputs)
        | Command::RadarPosition(inputs) => {
            let method = match &cli.command {
                Command::Camera(_) => Method::Camera,
                Command::Lidar(_) => Method::Lidar,
                Command::Gnss(_) => Method::Gnss,
                Command::RadarVelocity(_) => Method::RadarVelocity,
                _ => Method::RadarPosition,
            };
            if trace_path.is_some() && !matches!(method, Method::Camera | Method::RadarVelocity) {
                return Err(CliError::Usage(format!(
                    "--trace is not available for {name}"
                )));
            }
            let (data, paths) = load(method, inputs, &params, false)?;
            let est = data.run(&params, params.seed)?;
            if let (Some(path), Some(trace)) = (&trace_path, &est.trace) {
                write_trace(path, trace)?;
            }
            emit(
                cli.common.output.as_deref(),
                &to_json(&envelope(name, paths, &params, est.detail)),
            )
        }
    }
}

fn envelope<'a, R: Serialize>(
    command: &'a str,
    inputs: BTreeMap<&'static str, String>,
    params: &'a Params,
    result: R,
) -> Report<'a, R> {
    Report {
        schema_version: SCHEMA_VERSION,
        command,
        status: "ok",
        inputs,
        params,
        result,
    }
}

/// `dir/name.json` → `dir/name_trace.csv`.
pub fn trace_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    output.with_file_name(format!("{stem}_trace.csv"))
}

fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CalibError::from)?;
    w.write_record(&trace.header).map_err(CalibError::from)?;
    for row in &trace.rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(CalibError::from)?;
    }
    w.flush().map_err(CalibError::from)?;
    Ok(())
}

fn must_exist(p: &Path) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input not found: {}", p.display())))
    }
}

fn required<'a>(flag: &str, p: &'a Option<PathBuf>, method: Method) -> Result<&'a Path, CliError> {
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{} needs --{flag}", method.name())))?;
    must_exist(p)?;
    Ok(p)
}

/// Checks every referenced path before reading any of them, so a missing
/// file never leaves a partial report behind.
fn load(
    method: Method,
    inputs: &Inputs,
    params: &Params,
    consistency: bool,
) -> Result<(Dataset, BTreeMap<&'static str, String>), CliError> {
    let mut paths = BTreeMap::new();
    let mut note = |k: &'static str, p: &Path| {
        paths.insert(k, p.display().to_string());
    };
    let data = match method {
        Method::Camera => {
            let k = required("intrinsics", &inputs.intrinsics, method)?;
            let track = match (&inputs.poses, consistency) {
                (Some(p), true) => {
                    must_exist(p)?;
                    note("poses", p);
                    Some(p.as_path())
                }
                _ => None,
            };
            note("intrinsics", k);
            let obs = match (&inputs.vp, &inputs.lines) {
                (Some(vp), _) => {
                    must_exist(vp)?;
                    note("vp", vp);
                    io::read_vp(vp)?
                }
                (None, Some(lines)) => {
                    must_exist(lines)?;
                    note("lines", lines);
                    let frames = io::read_lines(lines)?;
                    x2car::camera::observations_from_lines(&frames, &params.camera, params.seed)
                }
                (None, None) => return Err(CliError::Usage("camera needs --vp or --lines".into())),
            };
            let track = track.map(io::read_poses).transpose()?;
            Dataset::Camera {
                k: io::read_intrinsics(k)?,
                obs,
                track,
            }
        }
        Method::Lidar => {
            let poses = required("poses", &inputs.poses, method)?;
            let clouds = required("clouds", &inputs.clouds, method)?;
            note("poses", poses);
            note("clouds", clouds);
            Dataset::Lidar {
                poses: io::read_poses(poses)?,
                frames: io::read_clouds(clouds)?,
            }
        }
        Method::Gnss => {
            let poses = required("poses", &inputs.poses, method)?;
            note("poses", poses);
            Dataset::Gnss {
                poses: io::read_poses(poses)?,
            }
        }
        Method::RadarVelocity | Method::RadarPosition => {
            let radar = required("radar", &inputs.radar, method)?;
            note("radar", radar);
            Dataset::Radar {
                method,
                rows: io::read_radar(radar)?,
            }
        }
    };
    Ok((data, paths))
}

#[derive(Serialize)]
struct SimulateResult {
    directory: String,
    files: Vec<String>,
    truth: x2car::sim::Truth,
}

fn simulate(scenario: &Path, dir: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let mut spec = io::read_scenario(scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let sc = x2car::sim::generate(&spec)?;
    std::fs::create_dir_all(dir).map_err(CalibError::from)?;
    let mut files = Vec::new();
    let mut put = |name: &str| {
        files.push(name.to_string());
        dir.join(name)
    };
    if let Some(p) = &sc.gnss_poses {
        io::write_poses(&put("gnss_poses.csv"), p)?;
    }
    if let Some((poses, frames)) = &sc.lidar {
        io::write_poses(&put("lidar_poses.csv"), poses)?;
        io::write_clouds(&put("clouds"), frames)?;
    }
    if let Some(rows) = &sc.radar {
        io::write_radar(&put("radar.csv"), rows)?;
    }
    if let (Some(obs), Some(cam)) = (&sc.camera, &spec.camera) {
        io::write_vp(&put("vp.csv"), obs)?;
        io::write_intrinsics(&put("intrinsics.toml"), &cam.intrinsics)?;
    }
    let resolved = toml::to_string(&spec).map_err(|e| CalibError::Parse(e.to_string()))?;
    std::fs::write(put("scenario.toml"), resolved).map_err(CalibError::from)?;
    io::write_json(&put("truth.json"), &sc.truth)?;

    #[derive(Serialize)]
    struct SimReport<'a> {
        schema_version: u32,
        command: &'a str,
        status: &'a str,
        result: SimulateResult,
    }
    Ok(to_json(&SimReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        status: "ok",
        result: SimulateResult {
            directory: dir.display().to_string(),
            files,
            truth: sc.truth,
        },
    }))
}
