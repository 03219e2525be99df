//! `tiscan`: runs the tracking-accuracy, servo-accuracy, and ultrasound
//! NCC-stability studies against the simulated phantom and writes CSV and
//! JSON reports.
//!
//! Exit codes: 0 success, 1 config error, 2 tracking failure, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tiscan_harness::config::{ExperimentConfig, ExperimentKind, MotionAxis, ProfileSelection};
use tiscan_harness::experiments::{
    ncc_suite, run_ncc_stability, run_servo_accuracy, run_tracking_accuracy, servo_suite,
    tracking_suite, NccOutcome, TrialOutcome,
};
use tiscan_harness::HarnessError;

#[derive(Parser)]
#[command(
    name = "tiscan",
    about = "Simulated tissue-scanning experiments: tracking accuracy, servo accuracy, and ultrasound NCC stability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tracker accuracy against ground-truth tissue poses (no robot).
    Tracking(TrialArgs),
    /// Closed-loop servo accuracy against the compensated target pose.
    Servo(TrialArgs),
    /// Paired ultrasound NCC with and without motion compensation.
    Ncc(TrialArgs),
    /// All three study suites back to back.
    Run(TrialArgs),
}

/// Shared trial flags. Without `--config`, `--profile`, and `--axis`, the
/// full suite for the chosen study runs; naming a profile or axis filters
/// the suite, and naming both (or choosing `static`, or passing a config
/// file) runs a single trial.
#[derive(Args)]
struct TrialArgs {
    /// TOML config file; CLI flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Motion profile: static, profile1|1, profile2|2, profile3|3.
    #[arg(long, value_enum)]
    profile: Option<ProfileSelection>,
    /// Motion axis: x, y, z, free-form.
    #[arg(long, value_enum)]
    axis: Option<MotionAxis>,
    /// Master run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Depth noise sigma in millimetres.
    #[arg(long)]
    noise: Option<f64>,
    /// Directory the reports are written into.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print a mean ± std summary table on stdout after the runs.
    #[arg(long)]
    table: bool,
}

impl TrialArgs {
    fn base_config(&self, kind: ExperimentKind) -> Result<ExperimentConfig, HarnessError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::default(),
        };
        config.kind = kind;
        if let Some(profile) = self.profile {
            config.profile = profile;
        }
        if let Some(axis) = self.axis {
            config.axis = axis;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(duration) = self.duration {
            config.duration_s = duration;
        }
        if let Some(noise) = self.noise {
            config.noise_sigma_mm = noise;
        }
        if let Some(out_dir) = &self.out_dir {
            config.out_dir = out_dir.clone();
        }
        config.validate()?;
        Ok(config)
    }

    fn single_trial(&self) -> bool {
        self.config.is_some()
            || (self.profile.is_some() && self.axis.is_some())
            || self.profile == Some(ProfileSelection::Static)
    }

    /// The trial configs this invocation asks for.
    fn trial_configs(
        &self,
        kind: ExperimentKind,
        suite: &[(ProfileSelection, MotionAxis)],
    ) -> Result<Vec<ExperimentConfig>, HarnessError> {
        let base = self.base_config(kind)?;
        if self.single_trial() {
            return Ok(vec![base]);
        }
        Ok(suite
            .iter()
            .filter(|&&(p, a)| {
                self.profile.is_none_or(|want| want == p)
                    && self.axis.is_none_or(|want| want == a)
            })
            .map(|&(p, a)| {
                let mut config = base.clone();
                config.profile = p;
                config.axis = a;
                config
            })
            .collect())
    }
}

fn print_trial_table(title: &str, outcomes: &[TrialOutcome]) {
    println!("{title}");
    println!("{:<22} {:>20} {:>20}", "trial", "translation (mm)", "rotation (deg)");
    for o in outcomes {
        println!(
            "{:<22} {:>12.3} \u{b1} {:.3} {:>12.3} \u{b1} {:.3}",
            o.label,
            o.translation_mm.mean,
            o.translation_mm.std,
            o.rotation_deg.mean,
            o.rotation_deg.std
        );
    }
}

fn print_ncc_table(outcomes: &[NccOutcome]) {
    println!("ultrasound NCC vs initial slice");
    println!("{:<22} {:>10} {:>10} {:>10}", "trial", "MC on", "MC off", "delta");
    for o in outcomes {
        println!(
            "{:<22} {:>10.3} {:>10.3} {:>10.3}",
            o.label,
            o.mean_with_compensation,
            o.mean_without_compensation,
            o.mean_with_compensation - o.mean_without_compensation
        );
    }
}

fn run_tracking(args: &TrialArgs) -> Result<Vec<TrialOutcome>, HarnessError> {
    let mut outcomes = Vec::new();
    for config in args.trial_configs(ExperimentKind::TrackingAccuracy, &tracking_suite())? {
        eprintln!(
            "tracking {} (seed {}, {} s, sigma {} mm)",
            config.trial_label(),
            config.seed,
            config.duration_s,
            config.noise_sigma_mm
        );
        let (_, outcome) = run_tracking_accuracy(&config)?;
        eprintln!(
            "  translation {:.3} \u{b1} {:.3} mm, rotation {:.3} \u{b1} {:.3} deg",
            outcome.translation_mm.mean,
            outcome.translation_mm.std,
            outcome.rotation_deg.mean,
            outcome.rotation_deg.std
        );
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn run_servo(args: &TrialArgs) -> Result<Vec<TrialOutcome>, HarnessError> {
    let mut outcomes = Vec::new();
    for config in args.trial_configs(ExperimentKind::ServoAccuracy, &servo_suite())? {
        eprintln!(
            "servo {} (seed {}, {} s, sigma {} mm)",
            config.trial_label(),
            config.seed,
            config.duration_s,
            config.noise_sigma_mm
        );
        let (_, outcome) = run_servo_accuracy(&config)?;
        eprintln!(
            "  translation {:.3} \u{b1} {:.3} mm, rotation {:.3} \u{b1} {:.3} deg",
            outcome.translation_mm.mean,
            outcome.translation_mm.std,
            outcome.rotation_deg.mean,
            outcome.rotation_deg.std
        );
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn run_ncc(args: &TrialArgs) -> Result<Vec<NccOutcome>, HarnessError> {
    let mut outcomes = Vec::new();
    for config in args.trial_configs(ExperimentKind::NccStability, &ncc_suite())? {
        eprintln!(
            "ncc {} (seed {}, {} s, sigma {} mm)",
            config.trial_label(),
            config.seed,
            config.duration_s,
            config.noise_sigma_mm
        );
        let (_, _, outcome) = run_ncc_stability(&config)?;
        eprintln!(
            "  MC on {:.3}, MC off {:.3}",
            outcome.mean_with_compensation, outcome.mean_without_compensation
        );
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Tracking(args) => {
            let outcomes = run_tracking(args)?;
            if args.table {
                print_trial_table("tracking accuracy", &outcomes);
            }
        }
        Command::Servo(args) => {
            let outcomes = run_servo(args)?;
            if args.table {
                print_trial_table("servo accuracy", &outcomes);
            }
        }
        Command::Ncc(args) => {
            let outcomes = run_ncc(args)?;
            if args.table {
                print_ncc_table(&outcomes);
            }
        }
        Command::Run(args) => {
            let tracking = run_tracking(args)?;
            let servo = run_servo(args)?;
            let ncc = run_ncc(args)?;
            if args.table {
                print_trial_table("tracking accuracy", &tracking);
                println!();
                print_trial_table("servo accuracy", &servo);
                println!();
                print_ncc_table(&ncc);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(HarnessError::Config(String::new()).exit_code() as u8);
        }
        Err(help_or_version) => {
            let _ = help_or_version.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
