use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eoslab::{run_preset, CliError, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(name = "eoslab", version = eoslab::manifest::VERSION, about = "Edge-of-stability SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Config file; pass `-` to start from the preset defaults.
        config: PathBuf,
        /// Preset name, overriding the config's `preset` key.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exit non-zero unless every acceptance check passes.
        #[arg(long)]
        check: bool,
        /// Output directory, overriding `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "EOSLAB_THREADS")]
        threads: Option<usize>,
    },
    /// Print the default config of a preset.
    Defaults { preset: String },
}

fn parse_preset(name: &str) -> Result<Preset, CliError> {
    Preset::from_name(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Defaults { preset } => {
            print!("{}", parse_preset(&preset)?.default_config().to_text());
            Ok(true)
        }
        Command::Run {
            config,
            preset,
            seed,
            check,
            out,
            threads,
        } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
            }
            let preset = preset.as_deref().map(parse_preset).transpose()?;
            let mut cfg = if config.as_os_str() == "-" {
                let p = preset.ok_or_else(|| CliError::Invalid("`-` needs --preset".into()))?;
                ExperimentConfig::for_preset(p)
            } else {
                let text = std::fs::read_to_string(&config).map_err(|e| CliError::Io {
                    path: config.clone(),
                    source: e,
                })?;
                ExperimentConfig::from_text(&text, preset)?
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            let (manifest, outcome) = run_preset(&cfg)?;
            for row in &outcome.summary {
                println!("{:<48} {:>24.10e} ± {:.3e}", row.key, row.value, row.stderr);
            }
            for c in &manifest.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!(
                "wrote {} files to {} in {:.1}s",
                manifest.outputs.len() + 1,
                cfg.out_dir.display(),
                manifest.duration_secs
            );
            Ok(!check || manifest.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
