use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hzlab::cli_report::{exit_code, run, RunConfig, KEYS};
use hzlab::{Error, Result};

#[derive(Parser)]
#[command(name = "hzlab", version, about = "Operator Hölder-Zygmund experiments")]
struct Cli {
    /// `key = value` config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// extra `key=value` overrides, applied last
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Littlewood-Paley blocks of a random trigonometric polynomial
    Decompose,
    /// Hölder or Λω seminorm of a function on a grid
    Seminorm,
    /// double operator integral identity on random Hermitian pairs
    VerifyDoi,
    /// finite differences against multiple operator integrals
    VerifyMoi,
    /// the N-fold unitary difference expansion
    VerifyGen,
    /// κ_J table, recursive and closed form
    Kappa,
    /// unitary dilations and semi-spectral integrals of contractions
    DilateCheck,
    /// ratio experiment for one inequality (`theorem` key)
    HolderScan,
    /// scalar BKS inequality
    Bks,
    /// lower bounds for Ω over a δ grid
    OmegaScan,
    /// lower bound for Ω at a single δ
    OmegaSearch,
    /// all four Ω functionals and the block transfers
    CommutatorScan,
    /// fitted Zygmund constant
    ZygmundFit,
    /// random and ascent search for the |t| envelope
    AbsExplorer,
    /// re-render a trial CSV (`input` key)
    Report,
    /// list configuration keys
    Keys,
}

impl Command {
    fn tag(self) -> &'static str {
        match self {
            Command::Decompose => "decompose",
            Command::Seminorm => "seminorm",
            Command::VerifyDoi => "verify-doi",
            Command::VerifyMoi => "verify-moi",
            Command::VerifyGen => "verify-gen",
            Command::Kappa => "kappa",
            Command::DilateCheck => "dilate-check",
            Command::HolderScan => "holder-scan",
            Command::Bks => "bks",
            Command::OmegaScan => "omega-scan",
            Command::OmegaSearch => "omega-search",
            Command::CommutatorScan => "commutator-scan",
            Command::ZygmundFit => "zygmund-fit",
            Command::AbsExplorer => "abs-explorer",
            Command::Report => "report",
            Command::Keys => "keys",
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.set("tag", cli.command.tag())?;
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(o) = &cli.out {
        cfg.set("out", &o.to_string_lossy())?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Keys = cli.command {
        let mut out = std::io::stdout();
        for (k, d) in KEYS {
            if writeln!(out, "{k:<14} {d}").is_err() {
                break;
            }
        }
        return ExitCode::SUCCESS;
    }
    let result = build_config(&cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(bundle) => {
            let text = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hzlab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
