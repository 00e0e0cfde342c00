use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use tlssc_core::behavior::BehaviorLabel;
use tlssc_core::calibration::{
    build_scenario, calibrate, calibration_group, reference_fit, CalibrationProblem, CalibrationResult,
    ParamBounds,
};
use tlssc_core::direct::{benchmarks, minimize};
use tlssc_core::fvdm::{simulate, FvdmParams, LeaderSpec, SimState};
use tlssc_core::quality::{summarize_by_category, QualityReport};
use tlssc_core::report;
use tlssc_core::synth::{
    segment_from_series, synth_accelerating, synth_oscillation, synth_stopping, AcceleratingConfig,
    OscillationConfig, StoppingConfig,
};
use tlssc_core::threshold::{replay, ThresholdConfig};
use tlssc_core::trajectory::{
    interpolate_gaps, project_to_path, read_segment_file, smooth_segment, window_samples_for, write_segment,
    Schema, SegmentMeta,
};
use tlssc_core::{OptimizerConfig, TrajectorySegment};

const DEFAULT_BOUNDS: &str = "0:5,0:5,0:10,0.1:20";

#[derive(Parser)]
#[command(name = "tlssc", version, about = "ADAS trajectory processing and FVDM calibration at traffic lights and stop signs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill short gaps, smooth and project segment files.
    Smooth(SmoothArgs),
    /// Data quality table per behavior category.
    Assess(AssessArgs),
    /// Forward FVDM simulation against a free, stopped or recorded leader.
    Simulate(SimulateArgs),
    /// Fit FVDM parameters per behavior group with DIRECT.
    Calibrate(CalibrateArgs),
    /// Replay the lead-distance mode decision and the resulting trajectory.
    Threshold(ThresholdArgs),
    /// Generate synthetic segment fixtures.
    Synth(SynthArgs),
    /// Merge calibration and quality JSON records into one document.
    Report(ReportArgs),
    /// Check the optimizer against brute-force oracles.
    #[command(name = "opt-selftest", hide = true)]
    OptSelftest(SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Smooth(_) => "smooth",
            Command::Assess(_) => "assess",
            Command::Simulate(_) => "simulate",
            Command::Calibrate(_) => "calibrate",
            Command::Threshold(_) => "threshold",
            Command::Synth(_) => "synth",
            Command::Report(_) => "report",
            Command::OptSelftest(_) => "opt-selftest",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SegmentInput {
    /// Segment file, or a directory of `*.csv` segment files.
    #[arg(long)]
    input: PathBuf,
    /// Nominal sample interval of the input (s).
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    input: SegmentInput,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    /// Moving-average window (s).
    #[arg(long, default_value_t = 1.0)]
    window_s: f64,
    /// Widest hole filled by linear interpolation (s).
    #[arg(long, default_value_t = 1.0)]
    gap_max_s: f64,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    input: SegmentInput,
    /// Smoothing window for segments without smoothed columns (s).
    #[arg(long, default_value_t = 1.0)]
    window_s: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LeaderMode {
    Free,
    Stop,
}

#[derive(Args)]
struct SimulateArgs {
    /// Reference parameter group used for any parameter not given.
    #[arg(long, default_value = "stopping")]
    group: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    delta_s: Option<f64>,
    /// Desired speed (m/s); ignored with --input.
    #[arg(long, default_value_t = 15.6464)]
    v_max: f64,
    #[arg(long, value_enum, default_value_t = LeaderMode::Stop)]
    leader: LeaderMode,
    /// Stop line ahead of the start (m).
    #[arg(long, default_value_t = 150.0)]
    stop_line_m: f64,
    /// Initial speed (m/s).
    #[arg(long, default_value_t = 15.6464)]
    v0: f64,
    /// Simulated time (s).
    #[arg(long, default_value_t = 30.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Simulate the calibration scenario of this segment file instead.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    input: SegmentInput,
    /// Only these groups (e.g. stopping, accelerating, standard-follow-4).
    #[arg(long = "group")]
    groups: Vec<String>,
    /// Parameter box `a_lo:a_hi,b_lo:b_hi,s0_lo:s0_hi,ds_lo:ds_hi`.
    #[arg(long, default_value = DEFAULT_BOUNDS)]
    bounds: String,
    /// Objective evaluations per group.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// Potential-optimality slack.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Leader distance at activation (m).
    #[arg(long)]
    distance_m: f64,
    /// Car-following threshold (m).
    #[arg(long, default_value_t = 90.0)]
    threshold_m: f64,
    /// Stop when the leader is exactly at the threshold.
    #[arg(long)]
    exclusive: bool,
    /// Leader speed, also the initial and desired speed (m/s).
    #[arg(long, default_value_t = 17.8816)]
    leader_speed: f64,
    #[arg(long, default_value_t = 300.0)]
    stop_line_m: f64,
    #[arg(long, default_value_t = 120.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    Oscillation,
    Stopping,
    Accelerating,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Seed of the first segment; segment k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian speed noise (m/s).
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    /// Reference parameter group (default follows --kind).
    #[arg(long)]
    group: Option<String>,
    /// Desired speed (m/s).
    #[arg(long, default_value_t = 20.1168)]
    v_max: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON records written by `calibrate` or `assess` with `--format json`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<tlssc_core::Error> for Failure {
    fn from(e: tlssc_core::Error) -> Self {
        Failure { kind: e.kind(), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { kind: "io", message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { kind: "json", message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { kind: "invalid_input", message: message.into() }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Ordered `key: value` pairs echoed at the top of every output.
struct Meta(Vec<(String, String)>);

impl Meta {
    fn new(command: &str) -> Self {
        Meta(vec![
            ("tool".into(), format!("tlssc {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), command.into()),
        ])
    }

    fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    fn header(&self) -> String {
        self.0.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    fn json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    }
}

fn emit(output: Option<&Path>, text: &str) -> Outcome {
    match output {
        Some(p) => fs::write(p, text)?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn json_document(meta: &Meta, key: &str, body: impl Serialize) -> Outcome<String> {
    let mut doc = Map::new();
    doc.insert("meta".into(), meta.json());
    doc.insert(key.into(), serde_json::to_value(body)?);
    Ok(serde_json::to_string_pretty(&Value::Object(doc))? + "\n")
}

fn input_files(path: &Path) -> Outcome<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Failure { kind: "io", message: format!("{}: {e}", path.display()) })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(format!("no segment files under {}", path.display())));
    }
    Ok(files)
}

fn load_segments(input: &SegmentInput) -> Outcome<Vec<TrajectorySegment>> {
    let files = input_files(&input.input)?;
    let schema = Schema::default();
    let defaults = SegmentMeta { dt_nominal: input.dt, ..SegmentMeta::default() };
    Ok(files.par_iter().map(|p| read_segment_file(p, &schema, &defaults)).collect::<Result<Vec<_>, _>>()?)
}

fn write_annotation(path: &Path, seg: &TrajectorySegment) -> Outcome {
    if let Some(ann) = &seg.annotation {
        fs::write(path.with_extension("ann.json"), ann.to_json(seg.utc_offset_s)?)?;
    }
    Ok(())
}

fn reference_params(group: &str, v_max: f64) -> Outcome<FvdmParams> {
    reference_fit(group).map(|f| f.params(v_max)).ok_or_else(|| invalid(format!("unknown parameter group `{group}`")))
}

fn run_smooth(a: &SmoothArgs) -> Outcome {
    let segments = load_segments(&a.input)?;
    fs::create_dir_all(&a.output)?;
    let meta = Meta::new("smooth").with("window_s", a.window_s).with("gap_max_s", a.gap_max_s);
    let written = segments
        .par_iter()
        .map(|seg| -> Outcome<PathBuf> {
            let filled = interpolate_gaps(seg, a.gap_max_s).map_err(|e| e.in_segment(&seg.id))?;
            let smoothed = smooth_segment(&filled, window_samples_for(a.window_s, seg.dt_nominal))?;
            let derived = project_to_path(&smoothed).map_err(|e| e.in_segment(&seg.id))?;
            let path = a.output.join(format!("{}.csv", seg.id));
            write_segment(fs::File::create(&path)?, &smoothed, Some(&derived), &meta.0)?;
            write_annotation(&path, &smoothed)?;
            Ok(path)
        })
        .collect::<Outcome<Vec<_>>>()?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn run_assess(a: &AssessArgs) -> Outcome {
    let segments = load_segments(&a.input)?;
    let window = window_samples_for(a.window_s, a.input.dt);
    let rows = summarize_by_category(&segments, window)?;
    let meta = Meta::new("assess")
        .with("dt", a.input.dt)
        .with("window_s", a.window_s)
        .with("segments", segments.len());
    let text = match a.format {
        Format::Csv => meta.header() + &report::quality_table(&rows),
        Format::Json => json_document(&meta, "quality", &rows)?,
    };
    emit(a.output.as_deref(), &text)
}

fn run_simulate(a: &SimulateArgs) -> Outcome {
    let base = reference_params(&a.group, a.v_max)?;
    let mut params = FvdmParams::new(
        a.alpha.unwrap_or(base.alpha),
        a.beta.unwrap_or(base.beta),
        a.s0.unwrap_or(base.s0),
        a.delta_s.unwrap_or(base.delta_s),
        a.v_max,
    );
    let mut meta = Meta::new("simulate").with("group", &a.group).with("dt", a.dt);
    let (init, leader, horizon, label, id) = match &a.input {
        Some(path) => {
            let seg = read_segment_file(path, &Schema::default(), &SegmentMeta::default())?;
            let sc = build_scenario(&seg, a.dt)?;
            params = params.with_v_max(sc.v_max);
            meta = meta.with("input", path.display());
            (sc.init, sc.leader, sc.horizon, seg.behavior, format!("{}-sim", seg.id))
        }
        None => {
            let (leader, label) = match a.leader {
                LeaderMode::Stop => (LeaderSpec::VirtualStopped(a.stop_line_m), BehaviorLabel::StopRedYellow),
                LeaderMode::Free => (LeaderSpec::VirtualFree, BehaviorLabel::AccelGreenAfterStop),
            };
            meta = meta
                .with("leader", format!("{:?}", a.leader).to_lowercase())
                .with("stop_line_m", a.stop_line_m)
                .with("v0", a.v0);
            (SimState { t: 0.0, x: 0.0, v: a.v0 }, leader, a.horizon, label, "sim".to_string())
        }
    };
    let out = simulate(init, &leader, &params, a.dt, horizon)?;
    if let Some(c) = out.collision {
        return Err(tlssc_core::Error::Collision { t: c.t, spacing: c.spacing }.into());
    }
    let meta = meta
        .with("alpha", params.alpha)
        .with("beta", params.beta)
        .with("s0", params.s0)
        .with("delta_s", params.delta_s)
        .with("v_max", params.v_max)
        .with("horizon", horizon);
    let include_leader = matches!(leader, LeaderSpec::Recorded(_));
    let seg = segment_from_series(&id, label, params.v_max, &out.series, include_leader);
    let mut buf = Vec::new();
    write_segment(&mut buf, &seg, Some(&out.series), &meta.0)?;
    emit(a.output.as_deref(), &String::from_utf8_lossy(&buf))
}

/// Stopping, accelerating, then car-following groups in label order.
fn group_segments(segments: Vec<TrajectorySegment>) -> Vec<(String, Vec<TrajectorySegment>)> {
    let mut groups: Vec<(String, Vec<TrajectorySegment>)> = Vec::new();
    let mut sorted = segments;
    sorted.sort_by_key(|s| s.behavior);
    for seg in sorted {
        let g = calibration_group(seg.behavior);
        match groups.iter_mut().find(|(name, _)| *name == g) {
            Some((_, v)) => v.push(seg),
            None => groups.push((g, vec![seg])),
        }
    }
    groups
}

fn run_calibrate(a: &CalibrateArgs) -> Outcome {
    let bounds = ParamBounds::parse(&a.bounds)?;
    let optimizer = OptimizerConfig { max_evals: a.budget, epsilon: a.epsilon };
    optimizer.validate()?;
    let mut groups = group_segments(load_segments(&a.input)?);
    if !a.groups.is_empty() {
        if let Some(missing) = a.groups.iter().find(|g| !groups.iter().any(|(name, _)| name == *g)) {
            return Err(invalid(format!("no segments in group `{missing}`")));
        }
        groups.retain(|(name, _)| a.groups.contains(name));
    }
    let mut results: Vec<CalibrationResult> = Vec::new();
    for (_, segments) in groups {
        let problem = CalibrationProblem { segments, bounds, optimizer, dt: a.input.dt };
        results.push(calibrate(&problem)?);
    }
    let meta = Meta::new("calibrate")
        .with("dt", a.input.dt)
        .with("bounds", bounds)
        .with("budget", a.budget)
        .with("epsilon", a.epsilon)
        .with("rmse", "pooled over all samples of a group");
    let text = match a.format {
        Format::Csv => meta.header() + &report::calibration_table(&results),
        Format::Json => json_document(&meta, "calibration", &results)?,
    };
    emit(a.output.as_deref(), &text)
}

fn run_threshold(a: &ThresholdArgs) -> Outcome {
    let cfg = ThresholdConfig {
        leader_speed: a.leader_speed,
        desired_speed: a.leader_speed,
        stop_line_m: a.stop_line_m,
        threshold_m: a.threshold_m,
        inclusive: !a.exclusive,
        dt: a.dt,
        horizon: a.horizon,
        ..ThresholdConfig::at_distance(a.distance_m)
    };
    let r = replay(&cfg)?;
    let meta = Meta::new("threshold")
        .with("distance_m", a.distance_m)
        .with("threshold_m", a.threshold_m)
        .with("inclusive", cfg.inclusive)
        .with("leader_speed", a.leader_speed)
        .with("stop_line_m", a.stop_line_m)
        .with("dt", a.dt)
        .with("horizon", a.horizon)
        .with("mode", r.decision.mode)
        .with("crossed_stop_line", r.crossed_stop_line);
    let text = match a.format {
        Format::Json => json_document(&meta, "replay", &r)?,
        Format::Csv => {
            let mut s = meta.header();
            s.push_str("t_s,speed_mps,position_m,leader_speed_mps,gap_headway_m,time_headway_s\n");
            let lead = r.series.leader.as_ref().expect("replay sets the leader");
            for k in 0..r.series.len() {
                let th = r.time_headway[k].map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.series.t[k], r.series.speed[k], r.series.position[k], lead.speed[k], r.gap_headway[k], th
                ));
            }
            s
        }
    };
    emit(a.output.as_deref(), &text)
}

fn run_synth(a: &SynthArgs) -> Outcome {
    let group = a.group.clone().unwrap_or_else(|| {
        match a.kind {
            SynthKind::Oscillation => "standard-follow-4",
            SynthKind::Stopping => "stopping",
            SynthKind::Accelerating => "accelerating",
        }
        .to_string()
    });
    let params = reference_params(&group, a.v_max)?;
    let label = match a.kind {
        SynthKind::Oscillation => group
            .parse::<BehaviorLabel>()
            .ok()
            .filter(|l| l.is_car_following())
            .ok_or_else(|| invalid(format!("oscillation fixtures need a car-following group, got `{group}`")))?,
        SynthKind::Stopping => BehaviorLabel::StopRedYellow,
        SynthKind::Accelerating => BehaviorLabel::AccelGreenAfterStop,
    };
    let kind = format!("{:?}", a.kind).to_lowercase();
    fs::create_dir_all(&a.output)?;
    let meta = Meta::new("synth")
        .with("kind", &kind)
        .with("group", &group)
        .with("noise_std", a.noise_std)
        .with("dt", a.dt);
    let written = (0..a.count)
        .into_par_iter()
        .map(|k| -> Outcome<PathBuf> {
            let id = format!("{kind}-{k:03}");
            let seed = a.seed.wrapping_add(k as u64);
            let seg = match a.kind {
                SynthKind::Oscillation => synth_oscillation(
                    &id,
                    &params,
                    &OscillationConfig { label, noise_std: a.noise_std, seed, dt: a.dt, ..Default::default() },
                )?,
                SynthKind::Stopping => synth_stopping(
                    &id,
                    &params,
                    &StoppingConfig { noise_std: a.noise_std, seed, dt: a.dt, ..Default::default() },
                )?,
                SynthKind::Accelerating => synth_accelerating(
                    &id,
                    &params,
                    &AcceleratingConfig { noise_std: a.noise_std, seed, dt: a.dt, ..Default::default() },
                )?,
            };
            let path = a.output.join(format!("{id}.csv"));
            let mut lines = meta.0.clone();
            lines.push(("seed".into(), seed.to_string()));
            write_segment(fs::File::create(&path)?, &seg, None, &lines)?;
            write_annotation(&path, &seg)?;
            Ok(path)
        })
        .collect::<Outcome<Vec<_>>>()?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn run_report(a: &ReportArgs) -> Outcome {
    let mut results: Vec<CalibrationResult> = Vec::new();
    let mut quality: Vec<QualityReport> = Vec::new();
    for path in &a.inputs {
        let doc: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        let mut found = false;
        if let Some(v) = doc.get("calibration") {
            results.extend(serde_json::from_value::<Vec<CalibrationResult>>(v.clone())?);
            found = true;
        }
        if let Some(v) = doc.get("quality") {
            quality.extend(serde_json::from_value::<Vec<QualityReport>>(v.clone())?);
            found = true;
        }
        if !found {
            return Err(invalid(format!("{} holds no calibration or quality records", path.display())));
        }
    }
    if results.is_empty() && quality.is_empty() {
        return Err(invalid("nothing to report"));
    }
    let meta = Meta::new("report").with("inputs", a.inputs.len());
    let text = match a.format {
        Format::Csv => meta.header() + &report::render(&results, &quality),
        Format::Json => {
            let mut doc: Value = serde_json::from_str(&report::render_json(&results, &quality)?)?;
            doc["meta"] = meta.json();
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    emit(a.output.as_deref(), &text)
}

fn run_selftest(a: &SelftestArgs) -> Outcome {
    let cfg = OptimizerConfig { max_evals: a.budget, epsilon: a.epsilon };
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{name} [{}] {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(name.to_string());
        }
    };

    let box2 = [(0.0, 1.0), (0.0, 1.0)];
    let m = minimize(benchmarks::shifted_sphere, &box2, &cfg)?;
    let grid = benchmarks::grid_minimum(benchmarks::shifted_sphere, &box2, 501);
    check("sphere", m.f <= grid + 1e-6, format!("direct {:.3e}, grid {grid:.3e}, {} evals", m.f, m.evals));

    let wide = [(-1.0, 2.0), (-1.0, 2.0)];
    let m = minimize(benchmarks::sine_bowl, &wide, &cfg)?;
    let grid = benchmarks::grid_minimum(benchmarks::sine_bowl, &wide, 1501);
    check("sine-bowl", m.f <= grid + 1e-3, format!("direct {:.6}, grid {grid:.6}, {} evals", m.f, m.evals));

    let again = minimize(benchmarks::sine_bowl, &wide, &cfg)?;
    let same = again.f.to_bits() == m.f.to_bits()
        && again.evals == m.evals
        && again.x.iter().zip(&m.x).all(|(p, q)| p.to_bits() == q.to_bits());
    check("repeatable", same, format!("{} evals twice", m.evals));

    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { kind: "selftest", message: format!("failed checks: {}", failed.join(", ")) })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = match &cli.command {
        Command::Smooth(a) => run_smooth(a),
        Command::Assess(a) => run_assess(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Threshold(a) => run_threshold(a),
        Command::Synth(a) => run_synth(a),
        Command::Report(a) => run_report(a),
        Command::OptSelftest(a) => run_selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let record = json!({ "error": { "command": name, "kind": f.kind, "message": f.message } });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
