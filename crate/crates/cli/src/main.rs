use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heavytail::harness::{self, ExperimentConfig, RunOptions};
use heavytail::weights::{CoefficientSpec, LinearWindow, SlowFactor, DEFAULT_EPS_TAIL};
use heavytail::{Error, TailModel};

/// Monte Carlo experiments for weighted sums and linear processes with
/// heavy-tailed innovations.
#[derive(Parser)]
#[command(name = "heavytail", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Override the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: machine parallelism)
    #[arg(long, env = "HEAVYTAIL_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment and write report.json plus replicate CSVs
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Output directory (overrides output.dir)
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write hist_n{n}.csv with this many bins
        #[arg(long, value_name = "BINS")]
        emit_hist: Option<usize>,
    },
    /// Print the normalizer D_n for every n of a config
    Normalizer { config: PathBuf },
    /// Print coefficients a_j, or window weights b_nj with --window
    Coeffs {
        /// e.g. `fractional d=0.25`, `regvar alpha=0.75 p=1`, `explicit 0.5,0.25`
        #[arg(required = true, num_args = 1..)]
        spec: Vec<String>,
        /// Number of coefficients from the first index
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Print the window weights for this n instead
        #[arg(long, value_name = "N")]
        window: Option<usize>,
        /// Tail model used to truncate infinite windows
        #[arg(long, default_value = "pareto2")]
        model: String,
        #[arg(long, default_value_t = DEFAULT_EPS_TAIL)]
        eps_tail: f64,
    },
    /// Run the condition checks of a config without simulating
    Check {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rescore a column of a replicate CSV against the standard normal
    Gof {
        csv: PathBuf,
        #[arg(long, default_value = "T_self")]
        column: String,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut c = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    Ok(c)
}

fn json(out: &mut impl Write, value: &impl serde::Serialize) -> Result<(), Error> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn parse_spec(words: &[String]) -> Result<CoefficientSpec, Error> {
    let bad = |msg: String| Error::Config(msg);
    let (kind, rest) = words.split_first().ok_or_else(|| bad("empty spec".into()))?;
    let mut pairs = std::collections::BTreeMap::new();
    let mut bare = Vec::new();
    for w in rest {
        match w.split_once('=') {
            Some((k, v)) => {
                let v: f64 = v.parse().map_err(|_| bad(format!("'{v}' is not a number")))?;
                pairs.insert(k.to_string(), v);
            }
            None => bare.push(w.as_str()),
        }
    }
    let mut take = |k: &str| pairs.remove(k);
    let spec = match kind.as_str() {
        "fractional" => CoefficientSpec::fractional(take("d").ok_or_else(|| bad("fractional needs d=".into()))?)?,
        "regvar" => {
            let alpha = take("alpha").ok_or_else(|| bad("regvar needs alpha=".into()))?;
            let slow = take("p").map_or(SlowFactor::Const, |p| SlowFactor::LnPower { p });
            CoefficientSpec::regvar(alpha, slow)?
        }
        "explicit" => {
            let start = take("start").map_or(Ok(1), |s| {
                if s.fract() == 0.0 { Ok(s as i64) } else { Err(bad(format!("start={s} is not an integer"))) }
            })?;
            let values = bare
                .drain(..)
                .flat_map(|w| w.split(','))
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("'{s}' is not a number"))))
                .collect::<Result<Vec<_>, _>>()?;
            CoefficientSpec::explicit(start, values)?
        }
        other => return Err(bad(format!("unknown spec kind '{other}' (fractional, regvar, explicit)"))),
    };
    if let Some(k) = pairs.keys().next() {
        return Err(bad(format!("unexpected parameter '{k}' for {kind}")));
    }
    if !bare.is_empty() {
        return Err(bad(format!("unexpected argument '{}'", bare[0])));
    }
    Ok(spec)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Run { config, common, out_dir, emit_hist } => {
            let mut c = load(&config, common.seed)?;
            if let Some(dir) = out_dir {
                c.output.dir = dir;
            }
            let result = harness::run_experiment(&c, &RunOptions { threads: common.threads })?;
            let files = harness::write_outputs(&result, &c.output.dir, emit_hist)?;
            let report = &result.report;
            for r in &report.results {
                writeln!(
                    out,
                    "n={} D={} {} KS={:.4} CvM={:.4} (KS 95% critical {:.4})",
                    r.n, r.normalizer.d, report.statistic, r.gof.ks, r.gof.cvm, r.gof.ks_critical_95
                )?;
            }
            for f in files {
                writeln!(out, "wrote {}", f.display())?;
            }
        }
        Command::Normalizer { config } => {
            let c = load(&config, None)?;
            writeln!(out, "n\tD\tresidual\tasymptotic")?;
            for row in harness::normalizer_table(&c)? {
                let asym = row.asymptotic.map(|a| a.d.to_string()).unwrap_or_else(|| "-".into());
                writeln!(out, "{}\t{}\t{:e}\t{}", row.n, row.root_find.d, row.root_find.residual, asym)?;
            }
        }
        Command::Coeffs { spec, count, window, model, eps_tail } => {
            let spec = parse_spec(&spec)?;
            let model: TailModel = serde_json::from_value(serde_json::Value::String(model.clone()))
                .map_err(|_| Error::Config(format!("unknown model '{model}'")))?;
            match window {
                Some(n) => {
                    if n == 0 {
                        return Err(Error::Config("--window must be >= 1".into()));
                    }
                    let w = LinearWindow::build(&spec, n, model, eps_tail)?;
                    for (k, b) in w.weights.entries.iter().enumerate() {
                        writeln!(out, "{}\t{b}", w.weights.offset + k as i64)?;
                    }
                }
                None => {
                    let first = spec.first_index();
                    let last = spec.last_index().map_or(first + count as i64 - 1, |l| l.min(first + count as i64 - 1));
                    for a in spec.coefficients(first, last) {
                        writeln!(out, "{a}")?;
                    }
                }
            }
        }
        Command::Check { config, common } => {
            let c = load(&config, common.seed)?;
            json(&mut out, &harness::run_checks(&c)?)?;
        }
        Command::Gof { csv, column } => {
            json(&mut out, &harness::rescore_csv(&csv, &column)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // the reader went away (e.g. `| head`); nothing left to report to
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
