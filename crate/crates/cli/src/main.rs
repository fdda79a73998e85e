//! `memres` — run, sweep, and analyze memristor-reservoir experiments.
//!
//! Every subcommand takes the same four knobs: `--config` (TOML experiment
//! file, library defaults when omitted), `--seed`, `--out`, and
//! `--train-limit`, the last three overriding whatever the config says.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use memres_core::analysis::{bin_occupancy, final_state_sweep, main_effects};
use memres_core::pipeline::{factor_sweep, monte_carlo, run_pipeline};
use memres_core::results::{
    read_records_csv, save_weights, write_occupancy_csv, write_separability_csv, RecordWriter,
};
use memres_core::{Dataset, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "memres",
    version,
    about = "Memristor-reservoir experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration; library defaults when omitted
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for CSVs and checkpoints (overrides the config)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Train on only the first N images of the seeded shuffle;
    /// the test split is never reduced
    #[arg(long, value_name = "N")]
    train_limit: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and report its test accuracy
    Run(Common),

    /// Run every point of the config's [sweep] grid, streaming records to CSV
    Sweep(Common),

    /// Repeat the experiment with freshly perturbed devices and aggregate
    Montecarlo(Common),

    /// Tabulate final device states for every pulse sequence of a given length
    Separability {
        #[command(flatten)]
        common: Common,

        /// Pulse-sequence length L (2^L sequences)
        #[arg(short = 'L', long, default_value_t = 4)]
        seq_len: usize,

        /// Decay-constant grid, nanoseconds
        #[arg(long, value_delimiter = ',', default_value = "6,10,15,20")]
        tau_ns: Vec<f64>,

        /// Quantizer depths to score separability at
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
        bits: Vec<u32>,
    },

    /// Rank configuration factors by their accuracy main effects
    Summarize {
        #[command(flatten)]
        common: Common,

        /// Records CSV produced by `run`, `sweep`, or `montecarlo`
        records: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(limit) = common.train_limit {
        cfg.train_limit = Some(limit);
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    Dataset::load_dir(&cfg.data_dir)
        .with_context(|| format!("loading MNIST IDX files from {}", cfg.data_dir.display()))
}

fn ensure_out(cfg: &ExperimentConfig, what: &str) -> Result<PathBuf> {
    match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            Ok(dir.clone())
        }
        None => bail!("{what} needs an output directory: pass --out or set out_dir in the config"),
    }
}

fn cmd_run(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let data = load_dataset(&cfg)?;
    let outcome = run_pipeline(&cfg, &data).context("pipeline run failed")?;
    println!(
        "accuracy {:.4} on {} test images ({} features, {:.1} s, config {})",
        outcome.test_accuracy,
        data.test.len(),
        outcome.weights.n_features,
        outcome.runtime_s,
        outcome.record.config_hash,
    );
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let csv = dir.join("records.csv");
        let mut writer = RecordWriter::create(&csv)?;
        writer.write(&outcome.record)?;
        println!("wrote {}", csv.display());
        if cfg.save_weights {
            let ckpt = dir.join("weights.bin");
            save_weights(
                &ckpt,
                &outcome.weights,
                cfg.master_seed,
                &outcome.record.config_hash,
            )?;
            println!("wrote {}", ckpt.display());
        }
    }
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    if cfg.sweep.is_none() {
        bail!("config has no [sweep] grid to expand");
    }
    let out = ensure_out(&cfg, "sweep")?;
    let data = load_dataset(&cfg)?;
    let csv = out.join("records.csv");
    let mut writer = RecordWriter::create(&csv)?;
    let mut failed = 0usize;
    let results = factor_sweep(&cfg, &data);
    let total = results.len();
    for (i, (point, result)) in results.into_iter().enumerate() {
        match result {
            Ok(record) => {
                eprintln!(
                    "[{}/{total}] {:?} parity={} k={} bits={} tau={:.0}ns d2d={:.0}% -> {:.4}",
                    i + 1,
                    point.encoding.dimension,
                    point.encoding.parity,
                    point.encoding.sections,
                    point.quantizer.bits,
                    record.tau_ns,
                    100.0 * record.variability_pct,
                    record.accuracy,
                );
                writer.write(&record)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("[{}/{total}] point failed: {e}", i + 1);
            }
        }
    }
    println!(
        "wrote {} ({} points, {failed} failed)",
        csv.display(),
        total - failed
    );
    Ok(())
}

fn cmd_montecarlo(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let data = load_dataset(&cfg)?;
    let (stats, records) = monte_carlo(&cfg, &data).context("Monte-Carlo study failed")?;
    println!(
        "{} runs at {:.0}% device spread: mean {:.4}, min {:.4}, best {:.4}",
        stats.runs,
        100.0 * cfg.variability.d2d_pct,
        stats.mean,
        stats.min,
        stats.max,
    );
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let csv = dir.join("montecarlo.csv");
        let mut writer = RecordWriter::create(&csv)?;
        for record in &records {
            writer.write(record)?;
        }
        println!("wrote {}", csv.display());
    }
    Ok(())
}

fn cmd_separability(common: &Common, seq_len: usize, tau_ns: &[f64], bits: &[u32]) -> Result<()> {
    let cfg = load_config(common)?;
    let tau_s: Vec<f64> = tau_ns.iter().map(|t| t * 1e-9).collect();
    let table = final_state_sweep(seq_len, &tau_s, &cfg.device)?;
    let occupancy = bin_occupancy(&table, &cfg.device, bits)?;

    println!(
        "uniquely separated sequences out of {} (rows: τ in ns)",
        1usize << seq_len
    );
    print!("{:>10}", "tau_ns");
    for b in bits {
        print!("{b:>7}-bit");
    }
    println!();
    for (t, tau) in tau_ns.iter().enumerate() {
        print!("{tau:>10.1}");
        for b in 0..bits.len() {
            print!("{:>11}", occupancy.counts[t][b]);
        }
        println!();
    }

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let states = dir.join("separability.csv");
        write_separability_csv(&states, &table)?;
        let occ = dir.join("occupancy.csv");
        write_occupancy_csv(&occ, &occupancy)?;
        println!("wrote {} and {}", states.display(), occ.display());
    }
    Ok(())
}

fn cmd_summarize(common: &Common, records_path: &Path) -> Result<()> {
    let _ = load_config(common)?; // surfaces config errors even here
    let records = read_records_csv(records_path)
        .with_context(|| format!("reading {}", records_path.display()))?;
    let effects = main_effects(&records)?;
    println!(
        "accuracy main effects over {} records (largest span first)",
        records.len()
    );
    for effect in &effects {
        let levels: Vec<String> = effect
            .levels
            .iter()
            .map(|l| format!("{}={:.4} (n={})", l.level, l.mean_accuracy, l.count))
            .collect();
        println!(
            "{:>16}: span {:.4} | {}",
            effect.factor,
            effect.span,
            levels.join(", ")
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match &Cli::parse().command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep(common) => cmd_sweep(common),
        Command::Montecarlo(common) => cmd_montecarlo(common),
        Command::Separability {
            common,
            seq_len,
            tau_ns,
            bits,
        } => cmd_separability(common, *seq_len, tau_ns, bits),
        Command::Summarize { common, records } => cmd_summarize(common, records),
    }
}
