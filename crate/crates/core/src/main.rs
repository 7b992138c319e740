use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use typicell::cell::build_typical_cell;
use typicell::facestats::face_census;
use typicell::harness::{self, adaptive_cell, direction_stream_index, stream_index, ExperimentConfig, Format};
use typicell::sampler::{sample_ball, PointSet, RngStream};
use typicell::{measure, Error, Result};

#[derive(Parser)]
#[command(name = "typicell", version, about = "Typical Poisson-Voronoi cell simulation and measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Poisson configuration in a ball and print it as JSON.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Truncation radius.
        #[arg(long, default_value_t = harness::INITIAL_RADIUS)]
        radius: f64,
    },
    /// Build a certified cell (or the cell of `--in`) and print its dump.
    Cell(Common),
    /// Measure the functionals of one replication.
    Measure(Common),
    /// Face census of one replication.
    Census(Common),
    /// Run the replication grid and write the result tables.
    Sweep(Common),
    /// Convert a results table between CSV and JSON.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Dimension, or a list/range such as `2-9` for sweeps.
    #[arg(long)]
    d: Option<String>,
    /// Replications per dimension, or the replication index for single runs.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma separated epsilons.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    kmax: Option<usize>,
    /// Comma separated radii for tuple counts.
    #[arg(long)]
    rgrid: Option<String>,
    #[arg(long)]
    dirs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Point budget per replication.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Input file.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Key-value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let s = |v: &dyn ToString| v.to_string();
        let pairs: [(&str, Option<String>); 8] = [
            ("d", self.d.clone()),
            ("reps", self.reps.map(|v| s(&v))),
            ("seed", self.seed.map(|v| s(&v))),
            ("eps", self.eps.clone()),
            ("kmax", self.kmax.map(|v| s(&v))),
            ("rgrid", self.rgrid.clone()),
            ("dirs", self.dirs.map(|v| s(&v))),
            ("budget", self.budget.map(|v| s(&v))),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        if let Some(o) = &self.out {
            c.out_dir = Some(o.clone());
        }
        c.validate()?;
        Ok(c)
    }

    /// Dimension and replication index for single-cell commands.
    fn single(&self) -> Result<(ExperimentConfig, usize, usize)> {
        let c = self.experiment()?;
        let d = match c.d_list.as_slice() {
            [d] => *d,
            _ => return Err(Error::Domain("pass a single dimension with --d".into())),
        };
        Ok((c, d, self.reps.unwrap_or(0)))
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, s)?,
        None => println!("{s}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sample { common, radius } => {
            let (c, d, rep) = common.single()?;
            let ps = sample_ball(d, radius, &mut RngStream::new(c.master_seed, stream_index(d, rep)))?;
            emit(&ps, common.out.as_ref())?;
        }
        Command::Cell(common) => {
            let cell = match &common.input {
                Some(p) => build_typical_cell(&PointSet::from_json(&std::fs::read_to_string(p)?)?)?,
                None => {
                    let (c, d, rep) = common.single()?;
                    adaptive_cell(&c, d, rep)?.0
                }
            };
            emit(&cell.to_dump(), common.out.as_ref())?;
            return Ok(cell.truncation_certified);
        }
        Command::Measure(common) => {
            let (c, d, rep) = common.single()?;
            let (cell, _, _) = adaptive_cell(&c, d, rep)?;
            let mut dirs = RngStream::new(c.master_seed, direction_stream_index(d, rep));
            emit(&measure(&cell, c.n_directions, &mut dirs)?, common.out.as_ref())?;
        }
        Command::Census(common) => {
            let (c, d, rep) = common.single()?;
            let (cell, ps, _) = adaptive_cell(&c, d, rep)?;
            let census = face_census(&cell, &ps, c.k_max.min(d), &c.eps, &c.r_grid)?;
            emit(&census.summaries, common.out.as_ref())?;
        }
        Command::Sweep(common) => {
            let c = common.experiment()?;
            let out = c.out_dir.clone().unwrap_or_else(|| PathBuf::from("typicell-out"));
            let outcome = harness::sweep_with(&c, |r| {
                let status = if r.passed() { "ok" } else { "FAILED" };
                eprintln!("d={} rep={} {status}", r.d, r.rep);
            })?;
            let format = match common.format {
                OutFormat::Csv => Format::Csv,
                OutFormat::Json => Format::Json,
            };
            for p in harness::report(&outcome, &c, &out, format)? {
                eprintln!("wrote {}", p.display());
            }
            let failures = harness::failure_summary(&outcome.reports);
            if !failures.is_empty() {
                eprint!("{failures}");
            }
            return Ok(outcome.all_passed());
        }
        Command::Report(common) => {
            let input = common.input.as_ref().ok_or_else(|| Error::Domain("--in is required".into()))?;
            let text = std::fs::read_to_string(input)?;
            let table = if text.starts_with("#schema=") {
                harness::parse_table_csv(&text)?
            } else {
                harness::parse_table_json(&text)?
            };
            let body = match common.format {
                OutFormat::Csv => harness::table_csv(&table)?,
                OutFormat::Json => harness::table_json(&table)?,
            };
            match &common.out {
                Some(p) => std::fs::write(p, body)?,
                None => print!("{body}"),
            }
        }
    }
    Ok(true)
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
