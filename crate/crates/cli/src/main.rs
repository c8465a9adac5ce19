use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hydra_core::config::{BackendKind, DataSource, ExperimentConfig, ProfileKind};
use hydra_core::dataset::DatasetKind;
use hydra_core::encoder::Scheme;
use hydra_core::experiment::{
    load_dataset, run_calibrate, run_classify, run_cluster, run_cost_report, run_dim_sweep,
    run_transfer_curve, CsvFile,
};
use hydra_core::learner::HvMode;

#[derive(Parser)]
#[command(
    name = "hydra",
    version,
    about = "HDC experiments on a behavioral SOT-CAM model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, retrain and evaluate a classifier on a held-out split.
    Classify(Common),
    /// HDC k-means clustering.
    Cluster(Common),
    /// Accuracy, energy and latency per query across dimensions.
    DimSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated dimensions; overrides `dims` in the config.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
    /// Match-line current against mismatch count, uniform and calibrated.
    TransferCurve(Common),
    /// Search the 4-level voltage profile for the configured analog parameters.
    Calibrate(Common),
    /// Per-operation costs and ratios against the CMOS baseline.
    CostReport(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file; replaces the configured data source.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset format for --data. Inferred from the extension when omitted
    /// (.csv = feature_csv, .txt/.tsv = text_corpus, .bits = synthetic_blobs).
    #[arg(long)]
    kind: Option<String>,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Binary,
    Multibit,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Ideal,
    Analog,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Uniform,
    Calibrated,
}

fn infer_kind(path: &Path) -> Result<DatasetKind> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(DatasetKind::FeatureCsv),
        Some("txt") | Some("tsv") => Ok(DatasetKind::TextCorpus),
        Some("bits") => Ok(DatasetKind::SyntheticBlobs),
        _ => bail!(
            "cannot infer the format of {}; pass --kind feature_csv|text_corpus|synthetic_blobs",
            path.display()
        ),
    }
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.dim {
            cfg.dim = d;
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::Binary => HvMode::Binary,
                ModeArg::Multibit => HvMode::Multibit,
            };
        }
        if let Some(b) = self.backend {
            cfg.backend = match b {
                BackendArg::Ideal => BackendKind::Ideal,
                BackendArg::Analog => BackendKind::Analog,
            };
        }
        if let Some(p) = self.profile {
            cfg.profile = match p {
                ProfileArg::Uniform => ProfileKind::Uniform,
                ProfileArg::Calibrated => ProfileKind::Calibrated,
            };
        }
        if let Some(path) = &self.data {
            let kind = match &self.kind {
                Some(k) => k.parse()?,
                None => infer_kind(path)?,
            };
            cfg.data.source = DataSource::File;
            cfg.data.path = Some(path.clone());
            cfg.data.kind = Some(kind);
            match kind {
                DatasetKind::FeatureCsv => cfg.encoding.scheme = Scheme::Record,
                DatasetKind::TextCorpus => cfg.encoding.scheme = Scheme::Ngram,
                DatasetKind::SyntheticBlobs => {}
            }
        } else if self.kind.is_some() {
            bail!("--kind only applies together with --data");
        }
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_files(out: &Path, files: &[CsvFile]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for f in files {
        let path = out.join(&f.name);
        fs::write(&path, &f.contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classify(c) => {
            let cfg = c.config()?;
            let ds = load_dataset(&cfg)?;
            let r = run_classify(&cfg, &ds)?;
            println!(
                "backend {}  accuracy {:.4}  (train {:.4})",
                r.backend, r.accuracy, r.train_accuracy
            );
            if let Some(cal) = &r.calibration {
                println!("profile {:?} V", cal.profile.levels);
            }
            print!("{}", r.report);
            write_files(&c.out, &r.files)
        }
        Command::Cluster(c) => {
            let cfg = c.config()?;
            let ds = load_dataset(&cfg)?;
            let r = run_cluster(&cfg, &ds)?;
            println!(
                "epochs {}  converged {}  purity {}",
                r.state.epoch,
                r.state.converged,
                r.purity
                    .map_or_else(|| "n/a".to_string(), |p| format!("{p:.4}"))
            );
            write_files(&c.out, &r.files)
        }
        Command::DimSweep { common, dims } => {
            let cfg = common.config()?;
            let dims = dims.unwrap_or_else(|| cfg.dims.clone());
            let ds = load_dataset(&cfg)?;
            let r = run_dim_sweep(&cfg, &ds, &dims)?;
            for p in &r.points {
                println!(
                    "dim {:>4}  accuracy {:.4}  energy/query {:.3} pJ  latency/query {:.3} ns",
                    p.dim, p.accuracy, p.energy_per_query_pj, p.latency_per_query_ns
                );
            }
            write_files(&common.out, &r.files)
        }
        Command::TransferCurve(c) => {
            let cfg = c.config()?;
            let r = run_transfer_curve(&cfg)?;
            println!(
                "profile {:?} V  max deviation {:.3e} A (uniform {:.3e} A, {:.2}x)",
                r.calibration.profile.levels,
                r.calibration.max_deviation,
                r.calibration.uniform_max_deviation,
                r.calibration.improvement()
            );
            write_files(&c.out, &r.files)
        }
        Command::Calibrate(c) => {
            let cfg = c.config()?;
            let (cal, files) = run_calibrate(&cfg)?;
            println!(
                "profile {:?} V  improvement {:.2}x",
                cal.profile.levels,
                cal.improvement()
            );
            if let Some(w) = &cal.warning {
                eprintln!("warning: {w}");
            }
            write_files(&c.out, &files)
        }
        Command::CostReport(c) => {
            let cfg = c.config()?;
            let (_, files) = run_cost_report(&cfg)?;
            write_files(&c.out, &files)
        }
    }
}

fn main() -> Result<()> {
    run(Cli::parse())
}
