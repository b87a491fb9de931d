//! `stylemorpheus` command line. Every command prints one JSON summary line
//! on stdout when it succeeds; failures print one JSON line on stderr and
//! exit nonzero.

mod run_config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use stylemorpheus::applications::{edit_part_color, fit_single_image, ColorEditRequest, FitOptions};
use stylemorpheus::codes::{mix_codes, Group, SemanticCode};
use stylemorpheus::data_io::image_io::{load_mask, load_rgb, save_rgb};
use stylemorpheus::data_io::{
    generate_toy_dataset, load_checkpoint, load_checkpoint_expecting, load_dataset, save_checkpoint, CheckpointMeta,
};
use stylemorpheus::imaging::resize_bicubic;
use stylemorpheus::trainer::{prepare_samples, Trainer};
use stylemorpheus::{CameraPose, Error, Model, ModelConfig};
use stylemorpheus_service::ServiceConfig;

use run_config::RunConfig;

pub const HOME_ENV: &str = "STYLEMORPHEUS_HOME";

#[derive(Parser)]
#[command(name = "stylemorpheus", version, about = "Semantic 3D-aware face generation and editing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an untrained checkpoint for a preset.
    Init {
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic multi-view head dataset.
    MakeToyData {
        #[arg(long, default_value_t = 8)]
        ids: usize,
        #[arg(long, default_value_t = 12)]
        views: usize,
        #[arg(long, default_value_t = 64)]
        res: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Preset whose camera and code sizes the records use.
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage 1 (reconstruction) or stage 2 (adversarial) training.
    Train {
        #[arg(long)]
        stage: Option<u8>,
        /// Run file; see the README for keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint directory to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        deterministic: bool,
    },
    /// Fit a code to one image by optimizing per-group offsets.
    Fit {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// `yaw,pitch,roll` in radians or a JSON pose object.
        #[arg(long)]
        pose: Option<String>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a code, a yaw sweep, or a throughput benchmark.
    Render {
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Without --ckpt, an untrained model of this preset.
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Code JSON, or any result JSON with a `code` field.
        #[arg(long, conflicts_with = "image")]
        code: Option<PathBuf>,
        /// Encode this image instead of reading a code.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        pose: Option<String>,
        /// `from:to:count` yaw sweep in radians, written as numbered frames.
        #[arg(long, value_name = "FROM:TO:COUNT", allow_hyphen_values = true)]
        yaw_sweep: Option<String>,
        #[arg(long)]
        size: Option<usize>,
        /// Time this many renders and report renders per second.
        #[arg(long)]
        bench: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Take the listed groups from the target code and the rest from the source.
    Mix {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated subset of id,expr,tex,light.
        #[arg(long, default_value = "")]
        groups: String,
        #[arg(long)]
        pose: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Move the mean color of a masked part toward a target color.
    EditColor {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        pose: Option<String>,
        /// Binary part mask PNG at the output resolution.
        #[arg(long)]
        mask: PathBuf,
        /// `r,g,b` in [0, 1].
        #[arg(long)]
        color: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 8)]
        queue_limit: usize,
        /// Allowed CORS origin; repeat for several. Any origin when absent.
        #[arg(long)]
        cors_origin: Vec<String>,
    },
}

struct CliError {
    kind: &'static str,
    field: Option<String>,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { kind: "usage", field: None, message: message.into() }
    }

    fn line(&self) -> String {
        json!({ "error": self.kind, "field": self.field, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let field = match &e {
            Error::Argument { field, .. } => Some(field.clone()),
            _ => None,
        };
        Self { kind: e.kind(), field, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn arg_error(field: &str, reason: impl Into<String>) -> CliError {
    Error::arg(field, reason).into()
}

/// `--out`, or `$STYLEMORPHEUS_HOME/<sub>`, or `./stylemorpheus-out/<sub>`.
fn out_dir(flag: Option<PathBuf>, sub: &str) -> PathBuf {
    flag.unwrap_or_else(|| {
        let home = std::env::var_os(HOME_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("stylemorpheus-out"));
        home.join(sub)
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).into())
}

/// A code file holds a code, or a result object with a `code` field.
fn read_code(path: &Path, field: &str, model: &Model) -> CliResult<SemanticCode> {
    let mut v = read_json(path)?;
    if let Some(inner) = v.get_mut("code") {
        v = inner.take();
    }
    let code: SemanticCode =
        serde_json::from_value(v).map_err(|e| arg_error(field, format!("{}: {e}", path.display())))?;
    code.validate(&model.config.codes)?;
    Ok(code)
}

fn number(v: &Value, field: &str) -> CliResult<f64> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| arg_error(field, "expected a finite number"))
}

/// `yaw,pitch,roll` or `{"yaw": .., "pitch": .., "roll": .., "t": [x, y, z]}`;
/// missing parts take the canonical pose's values.
fn parse_pose(text: &str, radius: f64) -> CliResult<CameraPose> {
    let mut pose = CameraPose::canonical(radius);
    let text = text.trim();
    if text.starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| arg_error("pose", e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| arg_error("pose", "expected an object"))?;
        for (k, val) in obj {
            let field = format!("pose.{k}");
            match k.as_str() {
                "yaw" => pose.yaw = number(val, &field)?,
                "pitch" => pose.pitch = number(val, &field)?,
                "roll" => pose.roll = number(val, &field)?,
                "t" => {
                    let arr = val.as_array().filter(|a| a.len() == 3).ok_or_else(|| arg_error(&field, "expected 3 numbers"))?;
                    for (i, x) in arr.iter().enumerate() {
                        pose.t[i] = number(x, &field)?;
                    }
                }
                _ => return Err(arg_error(&field, "unknown pose field")),
            }
        }
    } else {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.is_empty() || parts.len() > 3 {
            return Err(arg_error("pose", "expected yaw[,pitch[,roll]]"));
        }
        let mut a = [0.0; 3];
        for (i, p) in parts.iter().enumerate() {
            a[i] = p.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| arg_error("pose", format!("bad angle {p:?}")))?;
        }
        (pose.yaw, pose.pitch, pose.roll) = (a[0], a[1], a[2]);
    }
    pose.validate()?;
    Ok(pose)
}

fn pose_or_canonical(text: Option<&str>, radius: f64) -> CliResult<CameraPose> {
    match text {
        Some(t) => parse_pose(t, radius),
        None => Ok(CameraPose::canonical(radius)),
    }
}

fn parse_color(text: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<f64> = text.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()
        .map_err(|_| arg_error("color", "expected r,g,b"))?;
    match parts.as_slice() {
        &[r, g, b] if parts.iter().all(|c| (0.0..=1.0).contains(c)) => Ok([r, g, b]),
        _ => Err(arg_error("color", "expected three components in [0, 1]")),
    }
}

fn parse_sweep(text: &str) -> CliResult<Vec<f64>> {
    let bad = || arg_error("yaw_sweep", "expected FROM:TO:COUNT");
    let parts: Vec<&str> = text.split(':').collect();
    let [from, to, count] = parts.as_slice() else { return Err(bad()) };
    let from: f64 = from.trim().parse().map_err(|_| bad())?;
    let to: f64 = to.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !from.is_finite() || !to.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![from]);
    }
    Ok((0..count).map(|k| from + (to - from) * k as f64 / (count - 1) as f64).collect())
}

fn load_model(ckpt: &Path) -> CliResult<Model> {
    Ok(load_checkpoint(ckpt)?.0)
}

fn init(preset: &str, seed: u64, out: Option<PathBuf>) -> CliResult<Value> {
    let out = out_dir(out, "init");
    let model = Model::new(ModelConfig::preset(preset)?, seed)?;
    let meta = CheckpointMeta { stage: 0, seed, ..CheckpointMeta::default() };
    save_checkpoint(&model, &meta, &out)?;
    Ok(json!({ "checkpoint": out, "parameters": model.store.num_scalars(), "checksum": model.checksum() }))
}

fn make_toy_data(ids: usize, views: usize, res: usize, seed: u64, preset: &str, out: Option<PathBuf>) -> CliResult<Value> {
    if ids == 0 || views == 0 {
        return Err(arg_error(if ids == 0 { "ids" } else { "views" }, "must be positive"));
    }
    let cfg = ModelConfig::preset(preset)?;
    let out = out_dir(out, "toy-data");
    let n = generate_toy_dataset(&out, ids, views, res, seed, &cfg.codes, &cfg.camera, cfg.camera_radius)?;
    Ok(json!({ "records": n, "out": out }))
}

#[allow(clippy::too_many_arguments)]
fn train(
    stage: Option<u8>,
    config: Option<PathBuf>,
    resume: Option<PathBuf>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    epochs: Option<usize>,
    seed: Option<u64>,
    deterministic: bool,
) -> CliResult<Value> {
    let mut rc = match &config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::for_preset("toy")?,
    };
    if let Some(s) = stage {
        rc.train.stage = s;
    }
    if let Some(e) = epochs {
        rc.train.epochs = e;
    }
    if let Some(s) = seed {
        rc.train.seed = s;
    }
    rc.train.deterministic |= deterministic;
    rc.train.validate()?;
    let stage = rc.train.stage;
    if stage == 2 && resume.is_none() {
        return Err(Error::Precondition("stage 2 needs a stage-1 checkpoint (use --resume)".into()).into());
    }
    let data = data.or(rc.dataset.clone()).ok_or_else(|| arg_error("data", "no dataset (use --data or `dataset` in the run file)"))?;
    let out = out_dir(out.or(rc.out.clone()), &format!("runs/stage{stage}"));
    let mut trainer = match &resume {
        Some(ckpt) => {
            let (model, meta) = load_checkpoint_expecting(ckpt, &rc.model)?;
            if stage == 2 && meta.stage < 1 {
                return Err(Error::Precondition(format!("{} is not a trained stage-1 checkpoint", ckpt.display())).into());
            }
            Trainer::resume(model, &meta, rc.train.clone())?
        }
        None => Trainer::new(Model::new(rc.model.clone(), rc.train.seed)?, rc.train.clone())?,
    }
    .with_output(&out)?;
    let dataset = load_dataset(&data, &rc.model.codes)?;
    let samples = prepare_samples(&dataset, &trainer.model)?;
    let summary = if stage == 1 {
        let mut last = None;
        for _ in 0..rc.train.epochs {
            let s = trainer.train_stage1_epoch(&samples)?;
            log::info!("epoch {} recon {:.5} total {:.5}", s.epoch, s.mean_recon, s.mean_total);
            last = Some(s);
        }
        json!({ "stage": 1, "epochs": rc.train.epochs, "last": last })
    } else {
        let logs = trainer.train_stage2(&samples)?;
        json!({ "stage": 2, "steps": logs.len(), "last": logs.last() })
    };
    let final_dir = out.join(format!("stage{stage}_final"));
    save_checkpoint(&trainer.model, &trainer.meta(stage), &final_dir)?;
    let mut summary = summary;
    summary["checkpoint"] = json!(final_dir);
    summary["log"] = json!(out.join("losses.jsonl"));
    Ok(summary)
}

fn fit(image: &Path, mask: &Path, pose: Option<&str>, ckpt: &Path, steps: usize, out: Option<PathBuf>) -> CliResult<Value> {
    let model = load_model(ckpt)?;
    let radius = model.config.camera_radius;
    let pose = match pose {
        Some(p) => parse_pose(p, radius)?,
        None => {
            log::warn!("no --pose given; using the canonical frontal pose");
            CameraPose::canonical(radius)
        }
    };
    let image = load_rgb(image)?;
    let mask = load_mask(mask)?;
    let opts = FitOptions { steps, ..FitOptions::for_model(&model) };
    let result = fit_single_image(&model, &image, &mask, &pose, &opts, |_, _| {})?;
    let out = out_dir(out, "fit");
    create_dir(&out)?;
    write_json(&out.join("fit.json"), &result)?;
    save_rgb(&out.join("fit.png"), &model.render(&result.code, &result.pose)?.rgb)?;
    Ok(json!({
        "initial_loss": result.trace[0],
        "best_loss": result.best_loss,
        "best_step": result.best_step,
        "out": out,
    }))
}

#[allow(clippy::too_many_arguments)]
fn render(
    ckpt: Option<PathBuf>,
    preset: &str,
    seed: u64,
    code: Option<PathBuf>,
    image: Option<PathBuf>,
    pose: Option<&str>,
    yaw_sweep: Option<&str>,
    size: Option<usize>,
    bench: Option<usize>,
    out: Option<PathBuf>,
) -> CliResult<Value> {
    if size == Some(0) {
        return Err(arg_error("size", "must be positive"));
    }
    let model = match &ckpt {
        Some(p) => load_model(p)?,
        None => {
            log::warn!("no --ckpt given; rendering an untrained {preset} model");
            Model::new(ModelConfig::preset(preset)?, seed)?
        }
    };
    let z = match (&code, &image) {
        (Some(p), _) => read_code(p, "code", &model)?,
        (None, Some(p)) => model.encode(&load_rgb(p)?)?,
        (None, None) => SemanticCode::zeros(&model.config.codes),
    };
    let pose = pose_or_canonical(pose, model.config.camera_radius)?;
    let draw = |p: &CameraPose| -> CliResult<_> {
        let rgb = model.render(&z, p)?.rgb;
        Ok(match size {
            Some(s) => resize_bicubic(&rgb, s, s),
            None => rgb,
        })
    };
    if let Some(n) = bench {
        if n == 0 {
            return Err(arg_error("bench", "must be positive"));
        }
        draw(&pose)?;
        let t0 = Instant::now();
        for _ in 0..n {
            draw(&pose)?;
        }
        let secs = t0.elapsed().as_secs_f64();
        let res = size.unwrap_or(model.config.final_res());
        log::info!("{n} renders at {res}px in {secs:.3}s");
        return Ok(json!({
            "preset": model.config.preset,
            "resolution": res,
            "renders": n,
            "seconds": secs,
            "renders_per_second": n as f64 / secs,
        }));
    }
    let out = out_dir(out, "render");
    create_dir(&out)?;
    match yaw_sweep {
        Some(spec) => {
            let yaws = parse_sweep(spec)?;
            let mut frames = Vec::with_capacity(yaws.len());
            for (k, yaw) in yaws.iter().enumerate() {
                let path = out.join(format!("frame_{k:03}.png"));
                save_rgb(&path, &draw(&CameraPose { yaw: *yaw, ..pose })?)?;
                frames.push(path);
            }
            Ok(json!({ "frames": frames, "out": out }))
        }
        None => {
            let path = out.join("render.png");
            save_rgb(&path, &draw(&pose)?)?;
            Ok(json!({ "image": path, "out": out }))
        }
    }
}

fn mix(ckpt: &Path, source: &Path, target: &Path, groups: &str, pose: Option<&str>, out: Option<PathBuf>) -> CliResult<Value> {
    let model = load_model(ckpt)?;
    let names: Vec<&str> = groups.split(',').map(str::trim).filter(|g| !g.is_empty()).collect();
    let groups = Group::parse_list(&names)?;
    let source = read_code(source, "source", &model)?;
    let target = read_code(target, "target", &model)?;
    let mixed = mix_codes(&source, &target, &groups)?;
    let pose = pose_or_canonical(pose, model.config.camera_radius)?;
    let out = out_dir(out, "mix");
    create_dir(&out)?;
    write_json(&out.join("mixed.json"), &mixed)?;
    save_rgb(&out.join("mixed.png"), &model.render(&mixed, &pose)?.rgb)?;
    Ok(json!({ "groups": groups, "code": out.join("mixed.json"), "image": out.join("mixed.png") }))
}

#[allow(clippy::too_many_arguments)]
fn edit_color(
    ckpt: &Path,
    code: &Path,
    pose: Option<&str>,
    mask: &Path,
    color: &str,
    steps: usize,
    out: Option<PathBuf>,
) -> CliResult<Value> {
    let model = load_model(ckpt)?;
    let code = read_code(code, "code", &model)?;
    let pose = pose_or_canonical(pose, model.config.camera_radius)?;
    let color = parse_color(color)?;
    let mut req = ColorEditRequest::new(code, pose, load_mask(mask)?, color);
    req.steps = steps;
    let result = edit_part_color(&model, &req, |_, _| {})?;
    let out = out_dir(out, "edit-color");
    create_dir(&out)?;
    write_json(&out.join("edit.json"), &result)?;
    save_rgb(&out.join("edit.png"), &result.image)?;
    Ok(json!({
        "initial_distance": result.color_distance[0],
        "best_distance": result.color_distance[result.best_step],
        "best_step": result.best_step,
        "out": out,
    }))
}

fn serve(ckpt: Option<PathBuf>, host: &str, port: u16, queue_limit: usize, cors_origins: Vec<String>) -> CliResult<Value> {
    let model = match &ckpt {
        Some(p) => Some(Arc::new(load_model(p)?)),
        None => {
            log::warn!("no --ckpt given; every model endpoint will answer 503");
            None
        }
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(async move {
        let addr = format!("{host}:{port}");
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| Error::io(&addr, e))?;
        let local = listener.local_addr().map_err(|e| Error::io(&addr, e))?;
        println!("{}", json!({ "listening": format!("http://{local}") }));
        let cfg = ServiceConfig { queue_limit, cors_origins };
        stylemorpheus_service::serve(listener, model, cfg).await.map_err(|e| Error::io(&addr, e))?;
        Ok(json!({ "stopped": format!("http://{local}") }))
    })
}

fn run(cmd: Command) -> CliResult<Value> {
    match cmd {
        Command::Init { preset, seed, out } => init(&preset, seed, out),
        Command::MakeToyData { ids, views, res, seed, preset, out } => make_toy_data(ids, views, res, seed, &preset, out),
        Command::Train { stage, config, resume, data, out, epochs, seed, deterministic } => {
            train(stage, config, resume, data, out, epochs, seed, deterministic)
        }
        Command::Fit { image, mask, pose, ckpt, steps, out } => fit(&image, &mask, pose.as_deref(), &ckpt, steps, out),
        Command::Render { ckpt, preset, seed, code, image, pose, yaw_sweep, size, bench, out } => {
            render(ckpt, &preset, seed, code, image, pose.as_deref(), yaw_sweep.as_deref(), size, bench, out)
        }
        Command::Mix { ckpt, source, target, groups, pose, out } => {
            mix(&ckpt, &source, &target, &groups, pose.as_deref(), out)
        }
        Command::EditColor { ckpt, code, pose, mask, color, steps, out } => {
            edit_color(&ckpt, &code, pose.as_deref(), &mask, &color, steps, out)
        }
        Command::Serve { ckpt, host, port, queue_limit, cors_origin } => serve(ckpt, &host, port, queue_limit, cors_origin),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).line());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(if e.kind == "argument" { 2 } else { 1 })
        }
    }
}
