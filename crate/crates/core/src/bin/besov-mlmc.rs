use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use besov_mlmc::experiment::{
    comparable_slope, complexity_report, dump_field_sample, load_scenario, parse_eps, read_csv, rmse_table,
    run_scenario, write_csv, write_timing, Scenario,
};
use besov_mlmc::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "besov-mlmc", version, about = "MLMC-FEM for elliptic PDEs with Besov tree priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reference runs plus replicated MLMC estimates, written as CSV.
    Run {
        /// Built-in scenario name or path of a TOML scenario file.
        #[arg(long)]
        scenario: String,
        /// Comma-separated accuracies, e.g. `2^-3,0.0625`.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<String>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Use the full replicate counts and accuracy range.
        #[arg(long)]
        full: bool,
        /// CSV destination; wall times go to `<out>.timing.csv`. Stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One prior realization and its FEM solution on a lattice.
    DumpField {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        resolution: u32,
        #[arg(long)]
        truncation: u32,
        /// Overrides the survival probability of the scenario.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// RMSE and work-versus-accuracy fit of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidInput(_) | Error::Parse(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(command: Command) -> besov_mlmc::Result<()> {
    match command {
        Command::Run {
            scenario,
            eps_list,
            seed,
            threads,
            full,
            out,
        } => {
            let mut cfg = load_scenario(&scenario, full)?;
            if let Some(list) = eps_list {
                cfg.eps_list = list.iter().map(|t| parse_eps(t)).collect::<Result<_, _>>()?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                if t == 0 {
                    return Err(Error::Config("--threads must be positive".into()));
                }
                pool = pool.num_threads(t);
            }
            let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
            let output = pool.install(|| run_scenario(&cfg))?;
            match &out {
                Some(path) => {
                    write_csv(BufWriter::new(fs::File::create(path)?), &cfg, &output.records)?;
                    let mut timing = path.clone().into_os_string();
                    timing.push(".timing.csv");
                    write_timing(BufWriter::new(fs::File::create(timing)?), &output.records)?;
                }
                None => write_csv(io::stdout().lock(), &cfg, &output.records)?,
            }
            for eps in &output.skipped {
                eprintln!("skipped eps = {eps}: no admissible mesh level");
            }
            eprintln!("reference = {}", output.reference);
            eprintln!("{:>12} {:>6} {:>12} {:>14}", "eps", "reps", "rmse", "mean work");
            for row in &output.rmse {
                eprintln!("{:>12.6} {:>6} {:>12.6} {:>14.0}", row.eps, row.replicates, row.rmse, row.mean_work);
            }
            Ok(())
        }
        Command::DumpField {
            scenario,
            resolution,
            truncation,
            beta,
            seed,
            out,
        } => {
            let mut sc = load_scenario(&scenario, false)?.scenario;
            if let Some(b) = beta {
                sc.beta = b;
            }
            let paths = dump_field_sample(&sc, resolution, truncation, seed, &out)?;
            println!("{}", paths.field.display());
            println!("{}", paths.solution.display());
            println!("{}", paths.active.display());
            Ok(())
        }
        Command::Report { input } => {
            let (meta, records) = read_csv(BufReader::new(fs::File::open(&input)?))?;
            let (reference, rows) = rmse_table(&records)?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "reference = {reference}")?;
            writeln!(out, "{:>12} {:>6} {:>12} {:>14}", "eps", "reps", "rmse", "mean work")?;
            for row in &rows {
                writeln!(
                    out,
                    "{:>12.6} {:>6} {:>12.6} {:>14.0}",
                    row.eps, row.replicates, row.rmse, row.mean_work
                )?;
            }
            if rows.len() >= 3 {
                let fit = complexity_report(&records)?;
                let scenario = scenario_from_meta(&meta)?;
                writeln!(out, "work slope          = {:.3}", fit.slope)?;
                writeln!(out, "work/log(eps)^2 slope = {:.3}", fit.slope_log_corrected)?;
                writeln!(
                    out,
                    "compared slope      = {:.3} (predicted {:.3})",
                    comparable_slope(&fit, &scenario)?,
                    scenario.predicted_work_exponent()
                )?;
            }
            Ok(())
        }
    }
}

fn scenario_from_meta(meta: &BTreeMap<String, String>) -> besov_mlmc::Result<Scenario> {
    let num = |k: &str| -> besov_mlmc::Result<f64> {
        meta.get(k)
            .ok_or_else(|| Error::Parse(format!("front matter lacks '{k}'")))?
            .parse()
            .map_err(|_| Error::Parse(format!("front matter '{k}' is not a number")))
    };
    Ok(Scenario {
        name: meta.get("scenario").cloned().unwrap_or_default(),
        s: num("s")?,
        p: num("p")?,
        kappa: num("kappa")?,
        beta: num("beta")?,
        t: num("t")?,
        r: num("r")?,
        theta: num("theta")?,
    })
}
