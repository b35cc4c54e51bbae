use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamsight::beamnet::{load_params, save_params, write_history_csv, BeamNet};
use beamsight::harness::{
    acceptance_failures, emit_report, generate_dataset, oracle_sweep, run_ablation, run_experiment,
    run_experiment_with, tracker_benchmark, Ablation, BenchConfig, Experiment, ExperimentConfig,
};
use beamsight::identify::IdModel;
use beamsight::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "beamsight", version, about = "Vision-aided beam selection testbed")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write both synthetic scenarios and the split manifest.
    Gen,
    /// Train the transmitter detector and save it as id_model.bin.
    TrainId,
    /// Train the beam predictor and save it as beamnet.bin with history.csv.
    TrainBeam,
    /// Check the exhaustive-sweep oracle against nearest-angle beams.
    OracleSweep {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Evaluate the pipeline and write metrics.
    Eval {
        /// Exit with status 3 when an acceptance threshold is missed.
        #[arg(long)]
        strict: bool,
        /// Reuse a saved detector instead of training one.
        #[arg(long)]
        id_model: Option<PathBuf>,
        /// Reuse a saved beam network instead of training one.
        #[arg(long)]
        beam_model: Option<PathBuf>,
    },
    /// Run one ablation: 1, 2, 3, id-rgb or id-zero.
    Ablate {
        #[arg(long)]
        which: String,
    },
    /// Full run with every ablation plus the tracker benchmark, figures included.
    Report,
}

fn load_config(c: &Common) -> beamsight::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> beamsight::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> beamsight::Result<ExitCode> {
    let cfg = load_config(&cli.common)?;
    let out = &cli.common.out;
    fs::create_dir_all(out)?;
    match cli.cmd {
        Command::Gen => {
            let m = generate_dataset(&cfg, out)?;
            println!("wrote {} train / {} test / {} transfer frames to {}", m.train, m.test, m.transfer, out.display());
        }
        Command::TrainId => {
            let exp = Experiment::prepare(&cfg)?;
            let model = exp.train_id(cfg.visual_mode, false)?;
            model.save(BufWriter::new(File::create(out.join("id_model.bin"))?))?;
            println!("saved {}", out.join("id_model.bin").display());
        }
        Command::TrainBeam => {
            let exp = Experiment::prepare(&cfg)?;
            let (net, history) = exp.train_beam(cfg.net.clone(), &exp.samples_a)?;
            save_params(&net, BufWriter::new(File::create(out.join("beamnet.bin"))?))?;
            write_history_csv(BufWriter::new(File::create(out.join("history.csv"))?), &history)?;
            if let Some(last) = history.last() {
                println!("epoch {} val top-1 {:.4}", last.epoch, last.val_top1);
            }
        }
        Command::OracleSweep { trials } => {
            let s = oracle_sweep(&cfg.channel, trials, cfg.seed)?;
            write_json(&out.join("oracle_sweep.json"), &s)?;
            println!("{} / {} agree ({} ties skipped)", s.agree, s.trials - s.ties, s.ties);
            if s.agreement < 1.0 {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Eval {
            strict,
            id_model,
            beam_model,
        } => {
            let id = id_model
                .map(|p| IdModel::load(BufReader::new(File::open(p)?)))
                .transpose()?;
            let beam: Option<BeamNet<f32>> = beam_model
                .map(|p| load_params(BufReader::new(File::open(p)?)))
                .transpose()?;
            let run = run_experiment_with(&cfg, &[], id, beam)?;
            emit_report(out, &run)?;
            println!("{}", serde_json::to_string_pretty(&run.report)?);
            let failures = acceptance_failures(&run.report);
            for f in &failures {
                eprintln!("threshold missed: {f}");
            }
            if strict && !failures.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Ablate { which } => {
            let a = Ablation::parse(&which)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown ablation {which:?}")))?;
            let exp = Experiment::prepare(&cfg)?;
            let (row, id_row) = run_ablation(&exp, a)?;
            let path = out.join(format!("ablation_{}.json", a.name()));
            match (row, id_row) {
                (Some(r), _) => write_json(&path, &r)?,
                (_, Some(r)) => write_json(&path, &r)?,
                _ => {}
            }
            println!("{}", fs::read_to_string(&path)?);
        }
        Command::Report => {
            let run = run_experiment(&cfg, &Ablation::ALL)?;
            emit_report(out, &run)?;
            save_params(&run.beam_net, BufWriter::new(File::create(out.join("beamnet.bin"))?))?;
            run.id_model.save(BufWriter::new(File::create(out.join("id_model.bin"))?))?;
            let bench = tracker_benchmark(&BenchConfig::default(), &cfg.tracker, cfg.seed)?;
            write_json(&out.join("tracker_bench.json"), &bench)?;
            println!("{}", serde_json::to_string_pretty(&run.report)?);
            println!("tracker: {:.4} of frames kept the transmitter", bench.preserved_rate);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
