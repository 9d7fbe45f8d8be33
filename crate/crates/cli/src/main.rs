use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coded_pilot::sim::{
    reproduce_figure, resolve_designs, run_campaign, selftest, thread_pool, to_csv,
    CampaignConfig, Figure, Scale,
};

#[derive(Parser)]
#[command(name = "coded-pilot", version, about = "Pilot-free polar-coded packet link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve the codes of a campaign and write them as JSON.
    Design(Common),
    /// Run a Monte Carlo campaign and write BLER rows as CSV.
    Run(Common),
    /// Regenerate one of the published result sets.
    Reproduce {
        /// fig3, fig5 or fig6.
        figure: String,
        /// smoke, desk or full.
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads (0: all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run quick consistency checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Campaign configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR points in dB: `a,b,c` or `start:stop:step`.
    #[arg(long)]
    snr: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    list_size: Option<usize>,
    #[arg(long)]
    target_bler: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<CampaignConfig> {
        let mut cfg = CampaignConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(snr) = &self.snr {
            cfg.snr_db = parse_snr(snr)?;
        }
        if let Some(l) = self.list_size {
            cfg.list_size = l;
        }
        if let Some(p) = self.target_bler {
            cfg.target_bler = p;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_snr(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim().parse::<f64>().with_context(|| format!("bad SNR value {s:?}"))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            bail!("SNR range must be start:stop:step");
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("SNR range needs a positive step and start <= stop");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run() -> Result<bool> {
    match Cli::parse().command {
        Command::Design(args) => {
            let cfg = args.load()?;
            let pool = thread_pool(args.threads)?;
            let report = resolve_designs(&cfg, &pool)?;
            emit(&report.to_json()?, cfg.output.as_deref())?;
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let (report, rows) = run_campaign(&cfg, args.threads)?;
            emit(&to_csv(&rows)?, cfg.output.as_deref())?;
            if let Some(out) = &cfg.output {
                let design = out.with_extension("design.json");
                emit(&report.to_json()?, Some(&design))?;
            }
        }
        Command::Reproduce { figure, scale, out, seed, threads } => {
            let figure: Figure = figure.parse()?;
            let scale: Scale = scale.parse()?;
            let output = reproduce_figure(figure, scale, &out, seed, threads)?;
            print!("{}", output.summary);
            for f in &output.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Selftest { seed, threads } => {
            let report = selftest(seed, threads)?;
            for (name, ok) in &report.checks {
                println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
            }
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
