use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zoomcons::codec::trace;
use zoomcons::experiment::{self, ExperimentConfig};
use zoomcons::{verify, RunStatus};

#[derive(Parser)]
#[command(name = "zoomcons", version, about = "Quantized average consensus with zooming-in/zooming-out encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set params.m=3` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for both the graph and the initial state
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration; exit 0 converged, 2 horizon exhausted, 3 diverged
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory for history.csv and manifest.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cross product of the swept keys and write sweep.csv
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Run the acceptance checks; exit 0 iff all pass
    Verify,
    /// Print the essential spectral radius and eigenvalues of the configured matrix
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Also write P.csv, K.csv and graph.txt here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> zoomcons::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("graph.seed", &seed.to_string())?;
        cfg.set("x0.seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> zoomcons::Result<()> {
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn single_cell(cfg: &ExperimentConfig) -> zoomcons::Result<experiment::Cell> {
    let mut cells = cfg.cells()?;
    if cells.len() != 1 {
        return Err(zoomcons::Error::InvalidArgument(format!(
            "config sweeps {} cells; use `sweep`",
            cells.len()
        )));
    }
    Ok(cells.remove(0))
}

fn cmd_run(common: &Common, out: &Path) -> zoomcons::Result<RunStatus> {
    let cfg = load(common)?;
    let cell = single_cell(&cfg)?;
    let outcome = experiment::run_cell(&cell.spec)?;
    std::fs::create_dir_all(out)?;
    write(out, "config.txt", cfg.to_text())?;
    write(out, "history.csv", outcome.result.history_csv())?;
    write(out, "manifest.txt", experiment::manifest(&cell.spec, &outcome))?;
    if let Some(symbols) = &outcome.result.symbols {
        write(out, "symbols.bin", trace::to_bytes(symbols))?;
        write(out, "symbols.csv", trace::to_csv(symbols))?;
    }
    let r = &outcome.result;
    println!(
        "{} after {} steps (rho {:.6}, zoom-outs {}, certificate {})",
        r.status,
        r.steps(),
        outcome.matrix.rho(),
        r.zoom_out_count,
        if outcome.certificate.all_hold { "holds" } else { "does not hold" }
    );
    Ok(r.status)
}

fn cmd_sweep(common: &Common, out: &Path, workers: usize) -> zoomcons::Result<()> {
    let cfg = load(common)?;
    let rows = experiment::sweep(&cfg, workers)?;
    std::fs::create_dir_all(out)?;
    write(out, "config.txt", cfg.to_text())?;
    write(out, "sweep.csv", experiment::sweep_csv(&cfg, &rows))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    let converged = rows.iter().filter(|r| matches!(&r.outcome, Ok(s) if s.converged)).count();
    println!("{} cells: {converged} converged, {failed} errors", rows.len());
    Ok(())
}

fn cmd_spectrum(common: &Common, out: Option<&Path>) -> zoomcons::Result<()> {
    let cfg = load(common)?;
    let cell = single_cell(&cfg)?;
    let (graph, seed) = experiment::build_graph(&cell.spec.graph)?;
    let matrix = experiment::build_matrix(&cell.spec.matrix, &graph)?;
    println!("n: {}", graph.n());
    if let Some(s) = seed {
        println!("graph_seed: {s}");
    }
    println!("rho: {}", matrix.rho());
    for ev in matrix.eigenvalues() {
        if ev.im == 0.0 {
            println!("{}", ev.re);
        } else {
            println!("{}{:+}i", ev.re, ev.im);
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write(dir, "P.csv", matrix.p_to_csv())?;
        write(dir, "K.csv", matrix.k_to_csv())?;
        write(dir, "graph.txt", graph.to_edge_list())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, out } => cmd_run(common, out).map(|status| match status {
            RunStatus::Converged => ExitCode::SUCCESS,
            RunStatus::HorizonExhausted => ExitCode::from(2),
            RunStatus::Diverged => ExitCode::from(3),
        }),
        Command::Sweep { common, out, workers } => cmd_sweep(common, out, *workers).map(|_| ExitCode::SUCCESS),
        Command::Spectrum { common, out } => cmd_spectrum(common, out.as_deref()).map(|_| ExitCode::SUCCESS),
        Command::Verify => {
            let outcomes = verify::run_all();
            for o in &outcomes {
                println!("{}", o.line());
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            println!("{passed}/{} checks passed", outcomes.len());
            Ok(if passed == outcomes.len() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
