use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaborlab::commands::{
    cmd_build_frame, cmd_calibrate, cmd_counterexample, cmd_inequalities, cmd_verify_frame, CommandOutput,
    Counterexample, RunConfig,
};
use gaborlab::inequalities::Suite;
use gaborlab::report::Report;

/// Gabor frame construction, counterexamples and inequality suites.
#[derive(Parser)]
#[command(name = "gaborlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a certified frame for L^p and write frame.json.
    BuildFrame(Common),
    /// Check contraction and reconstruction for a stored frame.
    VerifyFrame {
        /// Path to a frame.json written by build-frame.
        frame: PathBuf,
        #[arg(long)]
        corpus_size: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a counterexample (thm42: dilations, thm52: translates).
    Counterexample {
        which: Counterexample,
        #[command(flatten)]
        common: Common,
    },
    /// Run an inequality suite.
    Inequalities {
        /// khintchine, squarefunc, type_cotype, lacunary or rdf.
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute the calibration constants from the reference runs.
    Calibrate {
        /// Where to write the constants (JSON).
        #[arg(long)]
        write: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    grid_log2: Option<u32>,
    #[arg(long)]
    span: Option<i64>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    growth: Option<f64>,
    /// Explicit block sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Candidate set: integers or geometric.
    #[arg(long)]
    lambda: Option<String>,
    /// Translate rule: distinct or geometric.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    corpus: Option<usize>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    j_max: Option<u32>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> gaborlab::Result<RunConfig> {
        let flags = RunConfig {
            p: self.p,
            grid_log2: self.grid_log2,
            span: self.span,
            blocks: self.blocks,
            growth: self.growth,
            sizes: self.sizes.clone(),
            lambda: self.lambda.clone(),
            rule: self.rule.clone(),
            trials: self.trials,
            seed: self.seed,
            tol: self.tol,
            corpus_size: self.corpus,
            k_max: self.k_max,
            j_max: self.j_max,
            n_max: self.n_max,
            alpha: self.alpha,
            ps: self.ps.clone(),
            out: self.out.clone(),
        };
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        Ok(base.merged(&flags))
    }
}

fn emit(output: &CommandOutput, out: Option<&PathBuf>) -> gaborlab::Result<bool> {
    print_report(&output.report);
    if let Some(dir) = out {
        output.write_to(dir)?;
    }
    Ok(output.report.passed())
}

fn print_report(report: &Report) {
    println!("{}", report.to_json());
    for c in &report.assertions {
        eprintln!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
}

fn run(cli: Cli) -> gaborlab::Result<bool> {
    match cli.command {
        Command::BuildFrame(common) => {
            let cfg = common.resolve()?;
            emit(&cmd_build_frame(&cfg)?, cfg.out.as_ref())
        }
        Command::VerifyFrame { frame, corpus_size, common } => {
            let cfg = common.resolve()?;
            emit(&cmd_verify_frame(&cfg, &frame, corpus_size)?, cfg.out.as_ref())
        }
        Command::Counterexample { which, common } => {
            let cfg = common.resolve()?;
            emit(&cmd_counterexample(&cfg, which)?, cfg.out.as_ref())
        }
        Command::Inequalities { suite, common } => {
            let cfg = common.resolve()?;
            emit(&cmd_inequalities(&cfg, suite)?, cfg.out.as_ref())
        }
        Command::Calibrate { write, out } => {
            let (report, cal) = cmd_calibrate()?;
            print_report(&report);
            if let Some(path) = write {
                std::fs::write(path, cal.to_json())?;
            }
            if let Some(dir) = out {
                report.write_to(&dir)?;
            }
            Ok(true)
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
