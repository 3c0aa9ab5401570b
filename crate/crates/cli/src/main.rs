mod args;
mod commands;
mod config;
mod meta;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use commands::Ctx;
use meta::{OutputDir, RunMeta};

/// An invocation problem (bad option value, missing option, bad config);
/// exits with status 1 and the usage line.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const USAGE_EXIT: u8 = 1;
const DATA_EXIT: u8 = 2;

fn clap_exit(e: clap::Error) -> ExitCode {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
        _ => ExitCode::from(USAGE_EXIT),
    }
}

fn usage_exit(cmd: &mut clap::Command, sub: Option<&str>, msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    cmd.build();
    let usage = match sub.and_then(|s| cmd.find_subcommand_mut(s)) {
        Some(s) => s.render_usage(),
        None => cmd.render_usage(),
    };
    eprintln!("{usage}\n\nFor more information, try '--help'.");
    ExitCode::from(USAGE_EXIT)
}

fn run(argv: Vec<OsString>) -> ExitCode {
    let first = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return clap_exit(e),
    };
    let sub = first.subcommand_name().expect("subcommand is required").to_owned();
    let mut cmd = Cli::command();
    if let Some(path) = first.get_one::<std::path::PathBuf>("config") {
        cmd = match config::apply(cmd, path, &sub) {
            Ok(c) => c,
            Err(e) => {
                if e.downcast_ref::<UsageError>().is_some() {
                    return usage_exit(&mut Cli::command(), Some(&sub), &format!("{e:#}"));
                }
                eprintln!("error: {e:#}");
                return ExitCode::from(DATA_EXIT);
            }
        };
    }
    let matches = match cmd.try_get_matches_from_mut(&argv) {
        Ok(m) => m,
        Err(e) => return clap_exit(e),
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return clap_exit(e),
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    if let Some(n) = cli.threads {
        if n == 0 {
            return usage_exit(&mut cmd, Some(&sub), "--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }

    let mut ctx = Ctx {
        meta: RunMeta::new(&sub, config::effective(&cmd, &matches)),
        json: cli.json,
        deterministic: cli.deterministic,
        outputs: OutputDir(cli.output_dir.clone()),
    };
    let result = match &cli.command {
        Command::TrainLm(a) => commands::train_lm_cmd(&mut ctx, a),
        Command::ScoreLm(a) => commands::score_lm_cmd(&mut ctx, a),
        Command::Align(a) => commands::align_cmd(&mut ctx, a),
        Command::ReorderScore(a) => commands::reorder_score_cmd(&mut ctx, a),
        Command::Bleu(a) => commands::bleu_cmd(&mut ctx, a),
        Command::Accuracy(a) => commands::accuracy_cmd(&mut ctx, a),
        Command::FreqProfile(a) => commands::freq_profile_cmd(&mut ctx, a),
        Command::Trajectory(a) => commands::trajectory_cmd(&mut ctx, a),
        Command::DetectStages(a) => commands::detect_stages_cmd(&mut ctx, a),
        Command::RecommendTeacher(a) => commands::recommend_teacher_cmd(&mut ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => usage_exit(&mut cmd, Some(&sub), &format!("{e:#}")),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(DATA_EXIT)
        }
    }
}

fn main() -> ExitCode {
    run(std::env::args_os().collect())
}
