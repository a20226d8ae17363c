use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lorafp::harness::{self, ExperimentSpec, Part, RunSummary};
use lorafp::ingest::{self, ColumnMapping};
use lorafp::report;
use lorafp::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(
    name = "lorafp",
    version,
    about = "RSSI fingerprint localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the split seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: the config's `output`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and write the gateway count table and RSSI histogram.
    IngestCheck(Common),
    /// Draw a train/validation/test split and save its manifest.
    Split(Common),
    /// kNN validation error over the exponential alpha grid.
    SweepAlpha(Common),
    /// kNN validation error over the powed beta grid.
    SweepBeta(Common),
    /// Best k for every metric and representation, plus the boolean metrics.
    SweepTable2(Common),
    /// Fit the configured method and evaluate it on all splits.
    Run(Common),
    /// Collect `result.json` files from run directories into one table.
    Report {
        /// Run output directories (default: subdirectories of --out).
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a synthetic fingerprint CSV with the default column names.
    Synth {
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct RunContext {
    spec: ExperimentSpec,
    out: PathBuf,
}

fn setup(c: &Common) -> Result<RunContext> {
    if let Some(jobs) = c.jobs {
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
        #[cfg(not(feature = "parallel"))]
        log::warn!("built without parallelism, ignoring --jobs {jobs}");
    }
    let mut spec = ExperimentSpec::load(&c.config)?;
    if let Some(seed) = c.seed {
        spec.split.seed = seed;
    }
    let out = c
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(RunContext { spec, out })
}

fn describe_split(data: &harness::PreparedData) {
    let origin = if data.manifest_from_file {
        "manifest"
    } else {
        "fresh seeded split"
    };
    println!(
        "split ({origin}): train {} / val {} / test {}",
        data.manifest.train.len(),
        data.manifest.val.len(),
        data.manifest.test.len()
    );
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::IngestCheck(c) => {
            let ctx = setup(&c)?;
            let ds = ctx.spec.load_dataset()?;
            let hist = ingest::gateway_histogram(&ds);
            println!("{} records from {}", ds.len(), ds.source_id);
            for (g, n) in &hist {
                println!("  received by {g} gateways: {n}");
            }
            report::write_gateway_table(ctx.out.join("table1.csv"), &hist)?;
            report::write_rssi_histogram(
                ctx.out.join("fig2_hist.csv"),
                &ingest::rssi_histogram(&ds, 1.0)?,
            )?;
        }
        Command::Split(c) => {
            let ctx = setup(&c)?;
            let ds = ctx.spec.load_dataset()?;
            let m = ingest::split_dataset(&ds, ctx.spec.split.seed, ctx.spec.split.fractions)?;
            let path = ctx.out.join("split.txt");
            m.save(&path)?;
            println!(
                "wrote {} (train {} / val {} / test {})",
                path.display(),
                m.train.len(),
                m.val.len(),
                m.test.len()
            );
        }
        Command::SweepAlpha(c) => {
            let ctx = setup(&c)?;
            let data = ctx.spec.prepare()?;
            describe_split(&data);
            let s = &ctx.spec.sweep;
            let r = harness::sweep_alpha(&data, ctx.spec.representation, &s.alphas, s.metric, s.k)?;
            report::write_sweep(ctx.out.join("fig3_alpha.csv"), &r)?;
            print_sweep(&r);
        }
        Command::SweepBeta(c) => {
            let ctx = setup(&c)?;
            let data = ctx.spec.prepare()?;
            describe_split(&data);
            let s = &ctx.spec.sweep;
            let r = harness::sweep_beta(&data, ctx.spec.representation, &s.betas, s.metric, s.k)?;
            report::write_sweep(ctx.out.join("fig4_beta.csv"), &r)?;
            print_sweep(&r);
        }
        Command::SweepTable2(c) => {
            let ctx = setup(&c)?;
            let data = ctx.spec.prepare()?;
            describe_split(&data);
            let s = &ctx.spec.sweep;
            let reps: Vec<_> = s
                .representations
                .iter()
                .map(|&k| s.grid_params(k))
                .collect();
            let cells = harness::sweep_metric_k(&data, &s.metrics, &reps, s.k_max)?;
            report::write_grid(ctx.out.join("table2.csv"), &cells)?;
            let boolean = harness::run_boolean_family(&data, s.k_max)?;
            report::write_grid(ctx.out.join("table2_boolean.csv"), &boolean)?;
            for cell in cells.iter().chain(&boolean) {
                println!(
                    "{:<11} {:<12} k={:<3} val mean {:.1} m, median {:.1} m",
                    cell.metric.name(),
                    cell.representation.name(),
                    cell.best_k,
                    cell.val.mean,
                    cell.val.median
                );
            }
        }
        Command::Run(c) => {
            let ctx = setup(&c)?;
            let data = ctx.spec.prepare()?;
            describe_split(&data);
            let outcome =
                harness::run_experiment(&data, ctx.spec.representation, &ctx.spec.method)?;
            for p in Part::ALL {
                report::write_predictions(
                    ctx.out.join(format!("predictions_{}.csv", p.name())),
                    data.indices(p),
                    &data.coords(p),
                    outcome.predictions(p),
                )?;
            }
            if let Some(h) = &outcome.history {
                report::write_loss_curve(ctx.out.join("fig5_loss.csv"), h)?;
                println!("best epoch {} of {}", h.best_epoch, h.epochs.len());
            }
            let s = &outcome.summary;
            let json = serde_json::to_string_pretty(s)?;
            fs::write(ctx.out.join("result.json"), json).context("writing result.json")?;
            println!("{}: mean/median error (m)", s.method);
            for (name, st) in [("train", s.train), ("val", s.val), ("test", s.test)] {
                println!("  {name:<5} {:>8.1} {:>8.1}", st.mean, st.median);
            }
        }
        Command::Report { dirs, out } => {
            let dirs = if dirs.is_empty() {
                subdirectories(&out)?
            } else {
                dirs
            };
            let mut runs = Vec::new();
            for d in &dirs {
                let p = d.join("result.json");
                if !p.exists() {
                    continue;
                }
                let text =
                    fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                let run: RunSummary = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))?;
                runs.push(run);
            }
            if runs.is_empty() {
                bail!("no result.json found in {} director(ies)", dirs.len());
            }
            let path = out.join("table3.csv");
            report::write_summary_table(&path, &runs)?;
            println!("wrote {} with {} run(s)", path.display(), runs.len());
        }
        Command::Synth { samples, seed, out } => {
            let ds = synth::generate(&SynthConfig {
                samples,
                seed,
                ..SynthConfig::default()
            })?;
            ingest::write_dataset(&out, &ds, &ColumnMapping::default())?;
            println!("wrote {} synthetic records to {}", ds.len(), out.display());
        }
    }
    Ok(())
}

fn print_sweep(r: &harness::SweepResult) {
    for p in &r.points {
        println!(
            "{} = {:<5} val mean {:.2} m, median {:.2} m",
            r.axis, p.value, p.val.mean, p.val.median
        );
    }
    let best = r.best();
    println!(
        "best {} = {} (val mean {:.2} m); test mean {:.2} m, median {:.2} m",
        r.axis, best.value, best.val.mean, r.test.mean, r.test.median
    );
}

fn subdirectories(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}
