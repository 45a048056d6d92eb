mod compare;
mod config;
mod run;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, RunConfig};
use run::CliError;

#[derive(Parser)]
#[command(
    name = "sbpgcl",
    version,
    about = "Metric-term verification experiments on perturbed hexahedral meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// GCL residuals of each metric variant and the 1D operator check.
    MetricsCheck(RunArgs),
    /// Drift of a uniform Euler state.
    Freestream(RunArgs),
    /// Isentropic vortex error study.
    Vortex(RunArgs),
    /// Viscous shock error study.
    Shock(RunArgs),
    /// Ratio of two errors.csv reports (first over second).
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value = "out/compare")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config merged over the subcommand defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Run a single metric variant: analytic, tl or optimized.
    #[arg(long)]
    metric: Option<String>,
    /// Validate the config and print the resolved values without running.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Sub::MetricsCheck(a) => execute(Command::MetricsCheck, a),
        Sub::Freestream(a) => execute(Command::Freestream, a),
        Sub::Vortex(a) => execute(Command::Vortex, a),
        Sub::Shock(a) => execute(Command::Shock, a),
        Sub::Compare { first, second, out } => compare::compare(&first, &second)
            .and_then(|csv| write_files(&out, &[("compare.csv".into(), csv)]).map(|_| out)),
    };
    match result {
        Ok(dir) => {
            println!("reports in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cmd: Command, args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(cmd, &text).map_err(CliError::Config)?
        }
        None => RunConfig::defaults(cmd),
    };
    if let Some(m) = &args.metric {
        cfg.metrics = vec![m.clone()];
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.display().to_string());
    }
    cfg.validate(cmd).map_err(CliError::Config)?;
    Ok(cfg)
}

fn execute(cmd: Command, args: RunArgs) -> Result<PathBuf, CliError> {
    let cfg = load_config(cmd, &args)?;
    if args.check {
        let json = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Io(e.to_string()))?;
        println!("{json}");
        return Ok(PathBuf::from(
            cfg.output.unwrap_or_else(|| format!("out/{}", cmd.name())),
        ));
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dir = PathBuf::from(
        cfg.output
            .clone()
            .unwrap_or_else(|| format!("out/{}", cmd.name())),
    );
    let report = run::run(cmd, &cfg)?;
    let mut files = report.files.clone();
    files.push(("metadata.txt".into(), metadata(cmd, &cfg, &report)?));
    write_files(&dir, &files)?;
    print!(
        "{}",
        files
            .iter()
            .find(|(n, _)| n == "summary.txt")
            .map(|(_, s)| s.as_str())
            .unwrap_or("")
    );
    Ok(dir)
}

fn metadata(cmd: Command, cfg: &RunConfig, report: &run::Report) -> Result<String, CliError> {
    let mut s = String::new();
    let _ = writeln!(s, "sbpgcl-cli {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command: {}", cmd.name());
    let _ = writeln!(s, "threads: {}", rayon::current_num_threads());
    for note in &report.notes {
        let _ = writeln!(s, "{note}");
    }
    let json = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    let _ = writeln!(s, "resolved config:\n{json}");
    if !report.stats.is_empty() {
        let _ = writeln!(
            s,
            "step statistics (accepted, rejected, rhs evaluations, final step):"
        );
        for (label, st) in &report.stats {
            let _ = writeln!(
                s,
                "{label}: {} {} {} {:.6e}",
                st.accepted, st.rejected, st.rhs_evaluations, st.final_h
            );
        }
    }
    Ok(s)
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
