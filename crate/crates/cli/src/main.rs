use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hittime::estimate::{closed_form, Direction, EstimateReport};
use hittime::exact::{hitting_times, Route};
use hittime::experiment::{lamplighter_experiment, run_sweep, sweep_csv, sweep_json, write_sweep, SweepConfig};
use hittime::families::{generate, FamilyParams};
use hittime::harnack::{certify, CertifyConfig, EnvelopeConfig};
use hittime::simulate::{sample_hitting, DEFAULT_STEP_CAP};
use hittime::MarkovKernel;

#[derive(Parser, Debug)]
#[command(name = "hittime", version, about = "Hitting times of reversible random walks: exact, estimated and simulated")]
struct Cli {
    /// Seed for Monte Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files and JSON sidecars.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Format of tabular output on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RouteArg {
    Auto,
    Spectral,
    LinearSolve,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::Auto => Route::Auto,
            RouteArg::Spectral => Route::Spectral,
            RouteArg::LinearSolve => Route::LinearSolve,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a family graph and write its edge list with a JSON spec sidecar.
    Generate {
        #[arg(long)]
        family: String,
        /// Comma-separated `key=value` list, e.g. `sides=8x8` or `alpha=0.5,n=40`.
        #[arg(long, default_value = "")]
        params: String,
        /// Edge-list path; defaults to `<out-dir>/<family>.edges`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact hitting times between vertices of an edge-list kernel.
    Solve {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, required_unless_present = "all_pairs")]
        source: Option<usize>,
        #[arg(long, required_unless_present = "all_pairs")]
        target: Option<usize>,
        #[arg(long)]
        all_pairs: bool,
        #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
        route: RouteArg,
    },
    /// Volume-sum estimate for hitting a target.
    Estimate {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(long)]
        theta: f64,
        /// Diameter; computed from the kernel when omitted.
        #[arg(long)]
        diameter: Option<usize>,
        /// Also solve `H(source, target)` exactly and report the ratio.
        #[arg(long)]
        source: Option<usize>,
        /// Family whose closed form to attach.
        #[arg(long)]
        closed_form: Option<String>,
        /// Parameters of the closed-form family.
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Monte Carlo estimate of a hitting time.
    Simulate {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        cap: u64,
    },
    /// Ellipticity, doubling, Poincaré, gap and heat-kernel certificate.
    Check {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 20)]
        balls: usize,
        /// Number of (source, time) rows in the envelope fit; every target is
        /// evaluated for each row.
        #[arg(long, default_value_t = 64)]
        envelope_sample: usize,
    },
    /// Run a parameter sweep from a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the sweep name from the config.
        #[arg(long)]
        name: Option<String>,
    },
    /// Relaxation time of lamplighter chains against the base's maximal hitting time.
    Lamplighter {
        /// Base as `family:params`, e.g. `torus:sides=6` or `complete:m=4`. Repeatable.
        #[arg(long = "base", required = true)]
        bases: Vec<String>,
    },
}

fn load_kernel(path: &Path) -> Result<MarkovKernel> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(MarkovKernel::read_edge_list(BufReader::new(file))?)
}

fn emit(cli: &Cli, command: &str, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(dir) = &cli.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{command}.json")), format!("{text}\n"))?;
    }
    Ok(())
}

fn parse_base(spec: &str) -> Result<FamilyParams> {
    let (family, params) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(FamilyParams::parse(family, params)?)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate { family, params, output } => {
            let params = FamilyParams::parse(family, params)?;
            let fam = generate(&params)?;
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let path = output.clone().unwrap_or_else(|| dir.join(format!("{family}.edges")));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut out = BufWriter::new(File::create(&path)?);
            fam.kernel.write_edge_list(&mut out)?;
            out.flush()?;
            let spec = serde_json::to_value(&fam.spec)?;
            fs::write(path.with_extension("json"), serde_json::to_string_pretty(&spec)? + "\n")?;
            println!("{}", serde_json::to_string_pretty(&json!({ "edges": path, "spec": spec }))?);
            Ok(true)
        }
        Command::Solve {
            kernel,
            source,
            target,
            all_pairs,
            route,
        } => {
            let k = load_kernel(kernel)?;
            let pairs: Vec<(usize, usize)> = if *all_pairs {
                let n = k.vertex_count();
                (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect()
            } else {
                vec![(source.unwrap(), target.unwrap())]
            };
            let report = hitting_times(&k, &pairs, (*route).into())?;
            emit(cli, "solve", &serde_json::to_value(&report)?)?;
            Ok(true)
        }
        Command::Estimate {
            kernel,
            target,
            theta,
            diameter,
            source,
            closed_form: family,
            params,
        } => {
            let k = load_kernel(kernel)?;
            let d = diameter.unwrap_or_else(|| k.diameter().hops);
            let mut report = EstimateReport::new(&k, *target, *theta, d)?;
            if let Some(family) = family {
                let fp = FamilyParams::parse(family, params)?;
                report = report.with_closed_form(closed_form(&fp, Direction::OriginToFar, d));
            }
            if let Some(x) = source {
                let h = hitting_times(&k, &[(*x, *target)], Route::Auto)?;
                report = report.with_exact(h.pairs[0].value);
            }
            emit(cli, "estimate", &serde_json::to_value(&report)?)?;
            Ok(true)
        }
        Command::Simulate {
            kernel,
            source,
            target,
            trials,
            cap,
        } => {
            let k = load_kernel(kernel)?;
            let stats = sample_hitting(&k, *source, *target, *trials, cli.seed.unwrap_or(0), *cap)?;
            let reliable = stats.reliable;
            emit(cli, "simulate", &serde_json::to_value(&stats)?)?;
            Ok(reliable)
        }
        Command::Check {
            kernel,
            theta,
            balls,
            envelope_sample,
        } => {
            let k = load_kernel(kernel)?;
            let d = k.diameter().hops;
            let times = 16;
            let config = CertifyConfig {
                balls: *balls,
                envelope: EnvelopeConfig {
                    sources: envelope_sample.div_ceil(times).max(1),
                    times,
                    ..EnvelopeConfig::default()
                },
            };
            let cert = certify(&k, *theta, d, &config)?;
            let ok = cert.is_finite() && cert.envelope_violations == 0;
            emit(cli, "check", &serde_json::to_value(&cert)?)?;
            Ok(ok)
        }
        Command::Sweep { config, name } => {
            let mut cfg = SweepConfig::load(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(name) = name {
                cfg.name = name.clone();
            }
            let result = run_sweep(&cfg)?;
            let dir = cli
                .out_dir
                .clone()
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            let (csv_path, json_path) = write_sweep(&result, &dir)?;
            log::info!("wrote {} and {}", csv_path.display(), json_path.display());
            match cli.format {
                Format::Csv => print!("{}", sweep_csv(&result)?),
                Format::Json => println!("{}", sweep_json(&result)?),
            }
            if result.failures > 0 {
                eprintln!("{} of {} rows failed", result.failures, result.rows.len());
            }
            Ok(result.failures == 0)
        }
        Command::Lamplighter { bases } => {
            let params: Vec<FamilyParams> = bases.iter().map(|b| parse_base(b)).collect::<Result<_>>()?;
            let rows = lamplighter_experiment(&params)?;
            match cli.format {
                Format::Json => emit(cli, "lamplighter", &serde_json::to_value(&rows)?)?,
                Format::Csv => {
                    println!("base,base_vertices,states,max_h,trel,ratio,max_volume_sum,vertex_transitive");
                    for r in &rows {
                        println!(
                            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                            r.base, r.base_vertices, r.states, r.max_h, r.trel, r.ratio, r.max_volume_sum, r.vertex_transitive
                        );
                    }
                    if let Some(dir) = &cli.out_dir {
                        fs::create_dir_all(dir)?;
                        fs::write(dir.join("lamplighter.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_spec_parsing() {
        assert_eq!(parse_base("complete:m=4").unwrap(), FamilyParams::Complete { m: 4 });
        assert_eq!(parse_base("torus:sides=6").unwrap(), FamilyParams::Torus { sides: vec![6] });
        assert!(parse_base("nothing").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
