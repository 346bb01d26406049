use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coloc::calibration::{CalibrationSet, DEFAULT_REFERENCE_DISTANCES, DEFAULT_SAMPLES_PER_POINT};
use coloc::geometry::{RangingPair, Shape, CANONICAL_PAIRS, DEFAULT_SCALE};
use coloc::harness::{
    compare_runs, eval_dir, run_experiment_to_dir, ErrorSummary, RunConfig, Transport,
    DEFAULT_DURATION, DEFAULT_RATE,
};
use coloc::twr::RangingEngine;
use coloc::{Error, Result};

#[derive(Parser)]
#[command(name = "coloc", version, about = "Relative localization campaigns over simulated UWB ranging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-pair linear calibration models from reference-distance campaigns.
    Calibrate {
        /// `all`, or a comma list such as `d10,d21`.
        #[arg(long, default_value = "all")]
        pairs: String,
        /// Reference distances in meters.
        #[arg(long = "ref", value_delimiter = ',', default_values_t = DEFAULT_REFERENCE_DISTANCES)]
        references: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_POINT)]
        samples: usize,
        /// Error/clock configuration file; engine defaults otherwise.
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "calib.csv")]
        out: PathBuf,
    },
    /// Simulate a geometry campaign, estimate poses and write the results.
    Run {
        #[arg(long, default_value = "square")]
        shape: Shape,
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: f64,
        #[arg(long, default_value_t = DEFAULT_RATE)]
        rate: f64,
        #[arg(long, default_value_t = DEFAULT_DURATION)]
        duration: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Calibration file from `coloc calibrate`; raw distances otherwise.
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long, default_value = "inproc")]
        transport: Transport,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute and print the error summary of a run directory.
    Eval { dir: PathBuf },
    /// Compare the per-node error distributions of two run directories.
    Compare { first: PathBuf, second: PathBuf },
}

fn parse_pairs(list: &str) -> Result<Vec<RangingPair>> {
    if list == "all" {
        return Ok(CANONICAL_PAIRS.to_vec());
    }
    list.split(',')
        .map(|item| {
            let body = item.trim().trim_start_matches('d');
            let (tag, anchor) = match body.split_once(':') {
                Some(parts) => parts,
                None if body.len() == 2 && body.is_char_boundary(1) => body.split_at(1),
                None => return Err(Error::Domain(format!("bad pair `{item}`"))),
            };
            let id = |s: &str| {
                s.parse::<u16>()
                    .map_err(|_| Error::Domain(format!("bad pair `{item}`")))
            };
            Ok(RangingPair::new(id(tag)?, id(anchor)?))
        })
        .collect()
}

fn load_engine(noise: Option<&PathBuf>, seed: Option<u64>) -> Result<RangingEngine> {
    let mut engine = match noise {
        Some(path) => RangingEngine::load_config(path)?,
        None => RangingEngine::default(),
    };
    if let Some(seed) = seed {
        engine.error.seed = seed;
    }
    Ok(engine)
}

fn print_summary(summary: &ErrorSummary) {
    println!("config,node,rmse_m,max_err_m,median_m,q1_m,q3_m");
    for (id, n) in &summary.nodes {
        let b = &n.box_stats;
        println!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            summary.config, id, n.rmse, n.max_error, b.median, b.q1, b.q3
        );
    }
    println!("{},mean,{:.6},,,,", summary.config, summary.mean_rmse());
    println!(
        "{},mean_excl_0,{:.6},,,,",
        summary.config,
        summary.mean_rmse_excluding_origin()
    );
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Calibrate {
            pairs,
            references,
            samples,
            noise,
            seed,
            out,
        } => {
            let engine = load_engine(noise.as_ref(), seed)?;
            let set = CalibrationSet::calibrate(&parse_pairs(&pairs)?, &references, samples, &engine)?;
            set.save(&out)?;
            for m in set.models.values() {
                println!(
                    "{}: m_c = {:.6}, q_c = {:.6} m, residual rms = {:.2e} m",
                    m.pair, m.slope, m.intercept, m.residual_rms
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Run {
            shape,
            scale,
            rate,
            duration,
            seed,
            calib,
            noise,
            transport,
            out,
        } => {
            let config = RunConfig {
                shape,
                scale,
                rate,
                duration,
                engine: load_engine(noise.as_ref(), seed)?,
                calibration: calib.map(CalibrationSet::load).transpose()?,
                transport,
                ..RunConfig::default()
            };
            let (record, summary) = run_experiment_to_dir(&config, &out)?;
            println!("{} epochs written to {}", record.poses.len(), out.display());
            print_summary(&summary);
        }
        Command::Eval { dir } => print_summary(&eval_dir(&dir)?.summary),
        Command::Compare { first, second } => {
            let report = compare_runs(&eval_dir(&first)?, &eval_dir(&second)?)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coloc: {e}");
            ExitCode::FAILURE
        }
    }
}
