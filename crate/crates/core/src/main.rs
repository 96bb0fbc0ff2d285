use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use zonecache::harness::{self, parse_kv, ConfigError, ExperimentConfig, HarnessError};
use zonecache::workload::{write_trace, WorkloadSpec};
use zonecache::zstorage::compute_min_op;

#[derive(Parser)]
#[command(name = "zonecache", version, about = "Zoned-storage flash cache simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print or write its CSV report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. --set scheme=zns_middle_lru.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// CSV destination; overrides the `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per value of a parameter, one CSV each.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Experiments run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the minimum OP ratio for a cache write rate and GC throughput.
    OpCalc {
        #[arg(long)]
        t_cache: f64,
        #[arg(long)]
        t_gc: f64,
        #[arg(long)]
        k: f64,
    },
    /// Write a synthetic trace file.
    GenTrace {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        ops: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cache size the key space is scaled to.
        #[arg(long, default_value = "3824MiB")]
        cache_bytes: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    #[value(name = "op_ratio")]
    OpRatio,
    #[value(name = "cache_zones")]
    CacheZones,
    #[value(name = "vop_ratio")]
    VopRatio,
    #[value(name = "region_size")]
    RegionSize,
}

impl SweepParam {
    fn key(self) -> &'static str {
        match self {
            SweepParam::OpRatio => "op_ratio",
            SweepParam::CacheZones => "cache_zones",
            SweepParam::VopRatio => "vop_ratio",
            SweepParam::RegionSize => "region_size",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => Failure::Config(c.to_string()),
            HarnessError::Scheme(s) => Failure::Config(s.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load(config: Option<&Path>, overrides: &[String]) -> Result<BTreeMap<String, String>, Failure> {
    let mut map = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
            parse_kv(&text)?
        }
        None => BTreeMap::new(),
    };
    for o in overrides {
        map.extend(parse_kv(o)?);
    }
    Ok(map)
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, overrides, out } => {
            let mut cfg = ExperimentConfig::from_kv(&load(config.as_deref(), &overrides)?)?;
            if out.is_some() {
                cfg.output_path = out;
            }
            let report = harness::run(&cfg)?;
            if cfg.output_path.is_none() {
                print!("{}", report.to_csv());
            } else {
                eprintln!("{}", report.to_csv().lines().last().unwrap_or_default());
            }
            Ok(())
        }
        Command::Sweep { param, values, config, overrides, out_dir, jobs } => {
            let base = load(config.as_deref(), &overrides)?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out_dir.display())))?;
            let mut points = Vec::new();
            for v in &values {
                let mut map = base.clone();
                map.insert(param.key().to_string(), v.clone());
                let mut cfg = ExperimentConfig::from_kv(&map)?;
                let file = format!("{}_{}_{}.csv", cfg.scheme.name, param.key(), v.replace(['/', ' '], "_"));
                cfg.output_path = Some(out_dir.join(file));
                points.push(cfg);
            }
            for chunk in points.chunks(jobs.max(1)) {
                let results: Vec<Result<(), HarnessError>> = std::thread::scope(|s| {
                    let handles: Vec<_> = chunk.iter().map(|cfg| s.spawn(move || harness::run(cfg).map(|_| ()))).collect();
                    handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
                });
                for (cfg, r) in chunk.iter().zip(results) {
                    r?;
                    if let Some(p) = &cfg.output_path {
                        println!("{}", p.display());
                    }
                }
            }
            Ok(())
        }
        Command::OpCalc { t_cache, t_gc, k } => {
            let plan = compute_min_op(t_cache, t_gc, k).map_err(|e| Failure::Config(e.to_string()))?;
            println!("r_op {:.4}", plan.r_op);
            println!("r_invalid {:.4}", plan.r_invalid);
            Ok(())
        }
        Command::GenTrace { preset, out, ops, seed, cache_bytes } => {
            let bytes = harness::parse_size(&cache_bytes).map_err(Failure::Config)?;
            let spec = WorkloadSpec::preset(&preset, bytes, ops, seed).map_err(|e| Failure::Config(e.to_string()))?;
            let gen = spec.generate().map_err(|e| Failure::Config(e.to_string()))?;
            let f = std::fs::File::create(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            write_trace(std::io::BufWriter::new(f), gen).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            Ok(())
        }
    }
}
