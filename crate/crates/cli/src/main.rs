//! Command-line batch runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use rayon::prelude::*;

use siot_trust::adversary::{Behavior, IdentitySource};
use siot_trust::io::output::to_file;
use siot_trust::io::output::{write_metrics_csv, write_run_tables, Manifest, MetricsRow};
use siot_trust::sim::{run_scenario, ScenarioConfig};
use siot_trust::social::{ContextKind, RelationType};

#[derive(Debug, Parser)]
#[command(
    name = "siot-trust",
    version,
    about = "Run seeded Sybil detection scenarios and write result tables"
)]
struct Args {
    /// Scenario file (TOML). Flags override its values.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the configuration and seeds recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Fraction of devices that are attackers, in [0, 1].
    #[arg(long = "attacker-pct")]
    attacker_pct: Option<f64>,
    #[arg(long)]
    behavior: Option<Behavior>,
    #[arg(long)]
    identity: Option<IdentitySource>,
    #[arg(long)]
    context: Option<ContextKind>,
    #[arg(long)]
    relation: Option<RelationType>,
    /// First seed; runs use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded runs.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Friendship edge list; a synthetic graph is used when absent.
    #[arg(long)]
    friends: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Args {
    fn resolve(&self) -> Result<(ScenarioConfig, Vec<u64>)> {
        if let Some(path) = &self.manifest {
            let m = Manifest::load(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok((m.config, m.seeds));
        }
        let mut cfg = match &self.config {
            Some(path) => {
                ScenarioConfig::load(path).with_context(|| format!("reading {}", path.display()))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(v) = self.nodes {
            cfg.node_count = v;
        }
        if let Some(v) = self.attacker_pct {
            cfg.attacker_fraction = v;
        }
        if let Some(v) = self.behavior {
            cfg.attacker.behavior = v;
        }
        if let Some(v) = self.identity {
            cfg.attacker.identity_source = v;
        }
        if let Some(v) = self.context.clone() {
            cfg.context = v;
        }
        if let Some(v) = self.relation {
            cfg.relation_filter = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = self.duration {
            cfg.duration = v;
        }
        if let Some(p) = &self.friends {
            if !p.is_file() {
                bail!("friendship file {} is not readable", p.display());
            }
            cfg.population.friends_path = Some(p.clone());
        }
        if self.seeds == 0 {
            bail!("--seeds must be at least 1");
        }
        cfg.validate()?;
        let seeds = (0..self.seeds).map(|k| cfg.rng_seed + k).collect();
        Ok((cfg, seeds))
    }
}

fn run_batch(cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let results: Vec<(MetricsRow, Vec<String>)> = seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let mut run_cfg = cfg.clone();
            run_cfg.rng_seed = seed;
            let run = run_scenario(&run_cfg).with_context(|| format!("seed {seed}"))?;
            let files = write_run_tables(out, &format!("seed{seed}"), &run_cfg, &run)?;
            Ok((MetricsRow::new(&run_cfg, &run.report), files))
        })
        .collect::<Result<_>>()?;

    let mut files = vec!["metrics.csv".to_string()];
    let mut rows = Vec::new();
    for (row, mut written) in results {
        rows.push(row);
        files.append(&mut written);
    }
    to_file(&out.join("metrics.csv"), |w| write_metrics_csv(w, &rows))?;
    let mut manifest_cfg = cfg.clone();
    manifest_cfg.rng_seed = seeds[0];
    Manifest::new(manifest_cfg, seeds.to_vec(), files).save(&out.join("manifest.toml"))?;
    for r in &rows {
        println!(
            "seed {} DR {} ACC {} FN {} FP {}",
            r.seed, r.dr, r.acc, r.fn_rate, r.fp
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = args
        .resolve()
        .and_then(|(cfg, seeds)| run_batch(&cfg, &seeds, &args.out));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
