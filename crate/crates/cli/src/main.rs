use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pedhybrid::gap::ModelKind;
use pedhybrid::harness::{
    cmd_compare_behavior, cmd_evaluate, cmd_rank_features, cmd_simulate, cmd_train_gap, cmd_tune_noise, exit_code,
    ExperimentConfig,
};
use pedhybrid::Result;

#[derive(Parser)]
#[command(name = "pedhybrid", version, about = "Pedestrian crosswalk behavior experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the simulator, the train/test split and rollouts.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Falls back to $OUTPUT_DIR, then the config value.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        let out = cfg.resolve_output_dir(self.out.as_deref());
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic crossing dataset.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train gap-acceptance classifiers and report held-out metrics.
    TrainGap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// svm, logistic, cond_prob or all.
        #[arg(long, default_value = "all")]
        kind: String,
    },
    /// Leave-one-feature-out ranking of the SVM classifier.
    RankFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Prediction errors of the hybrid model and the constant-velocity baseline.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Gap model JSON written by train-gap.
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare accepted gaps and walking speeds of two datasets.
    CompareBehavior {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Grid search of the filter noise by tracking error.
    TuneNoise {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn parse_kinds(s: &str) -> Result<Vec<ModelKind>> {
    if s == "all" {
        return Ok(ModelKind::ALL.to_vec());
    }
    s.parse()
        .map(|k| vec![k])
        .map_err(|e| pedhybrid::Error::Config(format!("--kind: {e}")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.3}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let (cfg, out) = common.load()?;
            let r = cmd_simulate(&cfg, &out)?;
            let s = &r.summary;
            println!(
                "episodes {} events {} accepted {} rejected {} undetermined {} ratio {:.3} violations {}",
                s.n_episodes,
                s.n_events,
                s.accepted,
                s.rejected,
                s.undetermined,
                s.acceptance_ratio,
                r.violations.len()
            );
        }
        Command::TrainGap { common, dataset, kind } => {
            let (cfg, out) = common.load()?;
            let kinds = parse_kinds(&kind)?;
            let r = cmd_train_gap(&cfg, &dataset, &kinds, &out)?;
            for row in &r.rows {
                let c = &row.report;
                println!(
                    "{:<10} acc {:.3} p {:.3} r {:.3} f1 {:.3}",
                    row.kind.name(),
                    c.accuracy,
                    c.precision,
                    c.recall,
                    c.f1
                );
            }
        }
        Command::RankFeatures { common, dataset } => {
            let (cfg, out) = common.load()?;
            let r = cmd_rank_features(&cfg, &dataset, &out)?;
            println!("{:<14} f1 {:.3}", "(none)", r.full.f1);
            for row in &r.rows {
                println!("{:<14} f1 {:.3}", row.removed.name(), row.report.f1);
            }
        }
        Command::Evaluate { common, dataset, model } => {
            let (cfg, out) = common.load()?;
            let r = cmd_evaluate(&cfg, &dataset, &model, &out)?;
            let all = &r.comparisons[0];
            for (h, c) in all.hybrid.iter().zip(&all.cv) {
                println!(
                    "{:>4.1} s  ade {:.3}/{:.3}  fde {:.3}/{:.3}  rmse {:.3}/{:.3}  (hybrid/cv)",
                    h.horizon_s, h.ade, c.ade, h.fde, c.fde, h.rmse, c.rmse
                );
            }
            println!("walk-away max |hybrid - cv| {:.3e}", r.walk_away_max_diff);
        }
        Command::CompareBehavior { common, a, b } => {
            let (cfg, out) = common.load()?;
            let r = cmd_compare_behavior(&cfg, &a, &b, &out)?;
            println!("KL {:.6}", r.kl);
            for (name, s) in [("A", &r.speeds_a), ("B", &r.speeds_b)] {
                println!(
                    "{name} crossing {} m/s sidewalk {} m/s",
                    fmt_opt(s.crossing_mean),
                    fmt_opt(s.sidewalk_mean)
                );
            }
        }
        Command::TuneNoise { common, dataset } => {
            let (cfg, out) = common.load()?;
            let r = cmd_tune_noise(&cfg, &dataset, &out)?;
            let b = r.best;
            println!("best q_pos {:e} q_vel {:e} r_pos {:e}", b.q_pos, b.q_vel, b.r_pos);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
