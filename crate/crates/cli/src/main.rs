//! `airchunk` command-line tool.
//!
//! Exit status: 0 when every validator passes, 1 when one fails (invalid
//! config, scene, task, dataset, trial result or trial log), 2 on usage or
//! I/O errors.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use nalgebra::Vector3;

use airchunk::config::Config;
use airchunk::dynamics::{
    position_setpoint_controller, simulate, write_trajectory_jsonl, DroneState, MassEvent, PoseTarget,
};
use airchunk::harness::{
    read_run, read_run_log, render_csv, render_table, run_benchmark, write_run, build_report, MethodKind, OracleField,
    TaskSpec,
};
use airchunk::policy::{load_checkpoint, save_checkpoint, train_flow_matching, VelocityField};
use airchunk::synth::{
    generate_dataset, read_dataset, validate_dataset, write_dataset, write_manifest, Dataset, RolloutStatus, Scene,
    TaskKind,
};

#[derive(Parser)]
#[command(name = "airchunk", version, about = "Guided flow-matching action chunks for a simulated aerial manipulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a demonstration dataset from expert rollouts.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset file; the rollout manifest goes next to it as
        /// `<stem>.manifest.jsonl`.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `synth.randomization.recovery_fraction`.
        #[arg(long)]
        recovery_fraction: Option<f64>,
        #[arg(long, default_value = "gate_nav", value_parser = parse_kind)]
        task: TaskKind,
    },
    /// Fit a flow-matching policy to a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `train.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run seeded closed-loop trials of one or more methods on a task.
    Eval {
        /// naive, rtc or rtc+payload; repeat for several.
        #[arg(long = "method", required = true, value_parser = parse_method)]
        methods: Vec<MethodKind>,
        #[arg(long)]
        task: PathBuf,
        /// Checkpoint file, or `oracle` for the scripted reference field.
        #[arg(long)]
        policy: String,
        /// Policy label in report rows; defaults to the checkpoint stem.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for results, trial logs and the report.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Rebuild and check the report of a stored run.
    Report {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Fly the setpoint controller to a point and export the trajectory.
    Fly {
        #[arg(long, num_args = 3, allow_negative_numbers = true, default_values_t = [0.0, 0.0, 1.0])]
        from: Vec<f64>,
        #[arg(long, num_args = 3, allow_negative_numbers = true)]
        to: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        /// Attach the payload at t = 0.
        #[arg(long)]
        payload: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration, or write it with the default scenes
    /// and tasks into a directory.
    Config {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

/// A validator rejected its input.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(e: impl std::fmt::Display) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

fn parse_kind(s: &str) -> Result<TaskKind, String> {
    TaskKind::ALL
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("expected one of gate_nav, pick_place, compositional; got {s:?}"))
}

fn parse_method(s: &str) -> Result<MethodKind, String> {
    s.parse().map_err(|e: airchunk::Error| e.to_string())
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Config::from_toml(&text).map_err(invalid)
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    out.with_file_name(format!("{stem}.manifest.jsonl"))
}

fn synth(
    scene: &Path,
    config: Option<&Path>,
    n: usize,
    seed: u64,
    out: &Path,
    recovery_fraction: Option<f64>,
    task: TaskKind,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(f) = recovery_fraction {
        cfg.synth.randomization.recovery_fraction = f;
    }
    let scene_text = fs::read_to_string(scene).with_context(|| format!("reading {}", scene.display()))?;
    let scene = Scene::from_json(&scene_text).map_err(invalid)?;
    let start = Instant::now();
    let dataset = generate_dataset(&scene, task, &cfg.synth, &cfg.drone, &cfg.gains, n, seed).map_err(invalid)?;
    let kept = dataset
        .rollouts
        .iter()
        .filter(|r| matches!(r.status, RolloutStatus::Kept { .. }))
        .count();
    write_dataset(&dataset.records, BufWriter::new(create(out)?))?;
    write_manifest(&dataset.rollouts, BufWriter::new(create(&manifest_path(out))?))?;
    println!(
        "{} records from {kept}/{n} kept rollouts in {:.1} s -> {}",
        dataset.records.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    let check = validate_dataset(&dataset, &cfg.synth, &cfg.drone);
    if !check.is_ok() {
        for e in &check.errors {
            eprintln!("invalid: {e}");
        }
        bail!(Invalid(format!("{} dataset violations", check.errors.len())));
    }
    Ok(())
}

fn train(data: &Path, out: &Path, config: Option<&Path>, epochs: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    let f = File::open(data).with_context(|| format!("opening {}", data.display()))?;
    let records = read_dataset(BufReader::new(f)).map_err(invalid)?;
    let dataset = Dataset {
        records,
        rollouts: Vec::new(),
    };
    let start = Instant::now();
    let trained = train_flow_matching(&dataset.pairs(), &cfg.train).map_err(invalid)?;
    create_parent(out)?;
    save_checkpoint(&trained.field, out)?;
    let r = &trained.report;
    let fmt = |v: Option<f64>| v.map_or("--".to_string(), |v| format!("{v:.4}"));
    println!(
        "{} train / {} held-out pairs, {} epochs in {:.1} s; held-out loss {} -> {}; saved {}",
        r.n_train,
        r.n_heldout,
        r.epoch_losses.len(),
        start.elapsed().as_secs_f64(),
        fmt(r.initial_heldout_loss),
        fmt(r.final_heldout_loss),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    methods: &[MethodKind],
    task: &Path,
    policy: &str,
    label: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    config: Option<&Path>,
    logs: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let task_text = fs::read_to_string(task).with_context(|| format!("reading {}", task.display()))?;
    let task = TaskSpec::from_json(&task_text).map_err(invalid)?;
    let field: Box<dyn VelocityField> = if policy == "oracle" {
        Box::new(OracleField::new(task.scene.gate, cfg.rtc.horizon))
    } else {
        Box::new(load_checkpoint(policy).with_context(|| format!("loading {policy}"))?)
    };
    let label = label.unwrap_or_else(|| {
        Path::new(policy)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(policy)
            .to_string()
    });
    let methods = methods
        .iter()
        .map(|&k| cfg.method(format!("{k}/{label}"), k, field.as_ref()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let start = Instant::now();
    let run = run_benchmark(
        &methods,
        std::slice::from_ref(&task),
        trials.unwrap_or(cfg.eval.trials),
        seed.unwrap_or(cfg.eval.seed),
        &cfg.rtc,
        &cfg.sim(),
        cfg.digest(),
    )
    .map_err(invalid)?;
    print!("{}", render_table(&run.report));
    println!("{} trials in {:.1} s", run.records.len(), start.elapsed().as_secs_f64());
    if let Some(dir) = logs {
        write_run(dir, &run)?;
        println!("logs -> {}", dir.display());
    }
    let mut bad = 0;
    for (r, log) in run.records.iter().zip(&run.logs) {
        if let Err(e) = r.result.validate().and_then(|_| log.validate()) {
            eprintln!("invalid: {} {} trial {}: {e}", r.task, r.method, r.trial);
            bad += 1;
        }
    }
    if bad > 0 {
        bail!(Invalid(format!("{bad} trials failed validation")));
    }
    Ok(())
}

fn report(dir: &Path, csv: bool) -> anyhow::Result<()> {
    let (header, records) = read_run(dir).with_context(|| format!("reading run in {}", dir.display()))?;
    let report = build_report(&header, &records);
    if csv {
        print!("{}", render_csv(&report));
    } else {
        print!("{}", render_table(&report));
    }
    let mut bad = 0;
    for r in &records {
        let checked = r
            .result
            .validate()
            .and_then(|_| read_run_log(dir, r))
            .and_then(|log| log.validate());
        if let Err(e) = checked {
            eprintln!("invalid: {} {} trial {}: {e}", r.task, r.method, r.trial);
            bad += 1;
        }
    }
    if bad > 0 {
        bail!(Invalid(format!("{bad} trials failed validation")));
    }
    Ok(())
}

fn fly(from: &[f64], to: &[f64], duration: f64, payload: bool, config: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let start = DroneState::at_rest(Vector3::from_column_slice(from));
    let target = PoseTarget::new(Vector3::from_column_slice(to), 0.0);
    let mut model = cfg.drone;
    model.payload_mass = 0.0;
    let events = if payload {
        vec![MassEvent::Grasp {
            time: 0.0,
            mass: cfg.world.payload_ratio * cfg.drone.mass,
        }]
    } else {
        Vec::new()
    };
    let traj = simulate(
        &start,
        |_, s| position_setpoint_controller(&target, s, &model, &cfg.gains),
        duration,
        cfg.world.sim_dt,
        &cfg.drone,
        &events,
    )
    .map_err(invalid)?;
    write_trajectory_jsonl(&traj, BufWriter::new(create(out)?))?;
    let end = traj.last().expect("at least one sample").state.position;
    println!(
        "{} samples -> {}; final position ({:.3}, {:.3}, {:.3})",
        traj.len(),
        out.display(),
        end.x,
        end.y,
        end.z
    );
    Ok(())
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<File> {
    create_parent(path)?;
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Writes `default.toml`, `scenes/*.json` and `tasks/*.json` under `dir`.
fn write_defaults(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir.join("scenes"))?;
    fs::create_dir_all(dir.join("tasks"))?;
    fs::write(dir.join("default.toml"), Config::default().to_toml())?;
    write_json(&dir.join("scenes/gate.json"), &Scene::gate_default())?;
    write_json(&dir.join("scenes/pick_place.json"), &Scene::pick_place_default())?;
    let perturbed = TaskSpec {
        name: "gate_nav_perturbed".into(),
        start_box: Config::default().eval.perturbed_start_box,
        ..TaskSpec::gate_nav()
    };
    for t in [TaskSpec::gate_nav(), perturbed, TaskSpec::pick_place(), TaskSpec::compositional()] {
        write_json(&dir.join(format!("tasks/{}.json", t.name)), &t)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth {
            scene,
            config,
            n,
            seed,
            out,
            recovery_fraction,
            task,
        } => synth(&scene, config.as_deref(), n, seed, &out, recovery_fraction, task),
        Command::Train {
            data,
            out,
            config,
            epochs,
        } => train(&data, &out, config.as_deref(), epochs),
        Command::Eval {
            methods,
            task,
            policy,
            label,
            trials,
            seed,
            config,
            logs,
        } => eval(&methods, &task, &policy, label, trials, seed, config.as_deref(), logs.as_deref()),
        Command::Report { logs, csv } => report(&logs, csv),
        Command::Fly {
            from,
            to,
            duration,
            payload,
            config,
            out,
        } => fly(&from, &to, duration, payload, config.as_deref(), &out),
        Command::Config { write } => match write {
            Some(dir) => write_defaults(&dir),
            None => {
                print!("{}", Config::default().to_toml());
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Invalid>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
