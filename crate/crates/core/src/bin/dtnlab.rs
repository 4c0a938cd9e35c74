use clap::{Parser, Subcommand};
use dtnlab::cli::{run_dtn, run_fit, run_net, run_scan, run_solve, run_verify, LabConfig, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dtnlab", version, about = "DtN maps and instability scans on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON configuration; sections [solve], [dtn], [verify], [net], [scan], [fit]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// overrides every seed in the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// one forward problem, u along a ray
    Solve,
    /// DtN matrix of one potential, plus Γ from both representations
    Dtn,
    /// invariant suites
    Verify,
    /// net spec and quantization of a bump family
    Net,
    /// full frequency–perturbation scan
    Scan,
    /// envelope fit from a scan CSV
    Fit,
}

fn run(cli: &Cli) -> dtnlab::Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => LabConfig::from_path(p)?,
        None => LabConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    let dir = &cli.out_dir;
    match cli.command {
        Command::Solve => run_solve(&cfg.solve, dir),
        Command::Dtn => run_dtn(&cfg.dtn, dir),
        Command::Verify => run_verify(&cfg.verify, dir),
        Command::Net => run_net(&cfg.net, dir),
        Command::Scan => {
            let scan_dir = cfg.scan.out_dir.clone().unwrap_or_else(|| dir.clone());
            run_scan(&cfg.scan, &scan_dir)
        }
        Command::Fit => run_fit(&cfg.fit, dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(out) => {
            for g in &out.gates {
                println!("[{}] {}: {}", if g.passed { "pass" } else { "FAIL" }, g.name, g.detail);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
