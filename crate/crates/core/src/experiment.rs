//! Experiment drivers behind the command-line verbs.
//!
//! Every driver returns typed results plus the CSV files it would write. Each
//! CSV starts with a `#` comment block holding the resolved config and all
//! derived seeds, so a file alone is enough to reproduce the run.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cam::{
    calibrate_profile, linearity, transfer_curve, AnalogSearch, Calibration, Linearity,
    PlacementRule, VoltageProfile, CALIBRATION_SEED, SEGMENTS,
};
use crate::config::{BackendKind, DataSource, ExperimentConfig, ProfileKind, Seeds};
use crate::cost::{fmt_f, ratios_vs_cmos, CostLedger, CostReport, CostTable, OpCounts, OpKind};
use crate::dataset::{
    ingest, stratified_split, synthetic_blobs, synthetic_language, synthetic_records, Dataset,
    DatasetKind, Samples, ALPHABET_LEN,
};
use crate::encoder::{
    build_item_memory, build_level_memory, encode_ngram, encode_record, ngram_op_counts,
    record_op_counts, EncodingConfig, ItemMemory, LevelMemory, Scheme,
};
use crate::error::{Error, Result};
use crate::learner::{
    accuracy, cluster, purity, retrain, train, ClusterState, Encoded, HvMode, Predictor,
    SimilarityBackend,
};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvFile {
    pub name: String,
    pub contents: String,
}

fn header(verb: &str, cfg: &ExperimentConfig) -> String {
    let seeds = cfg.seeds();
    let mut out = format!("# hydra {verb}\n");
    let _ = writeln!(
        out,
        "# seeds master={} data={} split={} item_memory={} encoding={} lta={} cluster={} calibration={} rng=chacha8",
        seeds.master,
        seeds.data,
        seeds.split,
        seeds.item_memory,
        seeds.encoding,
        seeds.lta,
        seeds.cluster,
        CALIBRATION_SEED
    );
    out.push_str("# config:\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(out, "#   {line}");
    }
    out
}

fn csv_file(
    verb: &str,
    name: &str,
    cfg: &ExperimentConfig,
    head: &[&str],
    rows: &[Vec<String>],
) -> CsvFile {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(head).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    CsvFile {
        name: name.to_string(),
        contents: header(verb, cfg) + &body,
    }
}

fn kv_file(verb: &str, name: &str, cfg: &ExperimentConfig, rows: &[(String, String)]) -> CsvFile {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, v)| vec![k.clone(), v.clone()])
        .collect();
    csv_file(verb, name, cfg, &["key", "value"], &rows)
}

pub fn cost_table(cfg: &ExperimentConfig) -> Result<CostTable> {
    match &cfg.cost_table {
        Some(p) => CostTable::load(p),
        None => Ok(CostTable::default()),
    }
}

/// Loads the configured dataset or generates the configured synthetic one.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut rng = Rng::new(cfg.seeds().data);
    match cfg.data.source {
        DataSource::File => {
            let path =
                cfg.data.path.as_ref().ok_or_else(|| {
                    Error::Config("data.source = \"file\" needs data.path".into())
                })?;
            ingest(path, cfg.data.kind.unwrap_or(DatasetKind::FeatureCsv))
        }
        DataSource::Records => synthetic_records(&cfg.records, &mut rng),
        DataSource::Language => synthetic_language(&cfg.language, &mut rng),
        DataSource::Blobs => {
            let mut spec = cfg.blobs;
            spec.dim = cfg.dim;
            synthetic_blobs(&spec, &mut rng)
        }
    }
}

enum Memories {
    Record { im: ItemMemory, lm: LevelMemory },
    Ngram { im: ItemMemory },
    Points,
}

/// Item and level memories for one dataset, plus the encoding rules.
pub struct Encoder {
    cfg: EncodingConfig,
    seed: u64,
    memories: Memories,
}

impl Encoder {
    pub fn build(ds: &Dataset, cfg: &EncodingConfig, seeds: &Seeds) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::new(seeds.item_memory);
        let memories = match (&ds.samples, cfg.scheme) {
            (Samples::Features(_), Scheme::Record) => {
                let im = build_item_memory(ds.arity(), cfg.dim, &mut rng)?;
                let lm = build_level_memory(cfg.levels, cfg.dim, &mut rng)?;
                Memories::Record { im, lm }
            }
            (Samples::Text(_), Scheme::Ngram) => Memories::Ngram {
                im: build_item_memory(ALPHABET_LEN, cfg.dim, &mut rng)?,
            },
            (Samples::Points(p), _) => {
                if let Some(x) = p.iter().find(|x| x.dim() != cfg.dim) {
                    return Err(Error::Config(format!(
                        "points have dim {} but the config asks for {}",
                        x.dim(),
                        cfg.dim
                    )));
                }
                Memories::Points
            }
            (Samples::Features(_), Scheme::Ngram) => {
                return Err(Error::Config(
                    "feature data needs encoding.scheme = \"record\"".into(),
                ))
            }
            (Samples::Text(_), Scheme::Record) => {
                return Err(Error::Config(
                    "text data needs encoding.scheme = \"ngram\"".into(),
                ))
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            seed: seeds.encoding,
            memories,
        })
    }

    /// Encodes every sample. Sample `i` draws any random fill bits from its
    /// own stream, so results do not depend on scheduling.
    pub fn encode_all(&self, ds: &Dataset) -> Result<Vec<(Encoded, OpCounts)>> {
        match (&ds.samples, &self.memories) {
            (Samples::Features(rows), Memories::Record { im, lm }) => rows
                .par_iter()
                .map(|r| {
                    Ok((
                        Encoded::new(encode_record(r, im, lm)?)?,
                        record_op_counts(r.len()),
                    ))
                })
                .collect(),
            (Samples::Text(seqs), Memories::Ngram { im }) => seqs
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut rng = Rng::derive(self.seed, i as u64);
                    let acc = encode_ngram(s, self.cfg.n, im, &self.cfg, &mut rng)?;
                    Ok((Encoded::new(acc)?, ngram_op_counts(s.len(), self.cfg.n)))
                })
                .collect(),
            (Samples::Points(p), Memories::Points) => p
                .iter()
                .map(|x| Ok((Encoded::from_hv(x.clone())?, OpCounts::default())))
                .collect(),
            _ => Err(Error::Config(
                "dataset does not match the encoder it was built for".into(),
            )),
        }
    }
}

/// Similarity backend for evaluation, with the calibration that produced its
/// profile when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedBackend {
    pub backend: SimilarityBackend,
    pub calibration: Option<Calibration>,
}

pub fn prepare_backend(cfg: &ExperimentConfig) -> Result<PreparedBackend> {
    Ok(match cfg.backend {
        BackendKind::Ideal => PreparedBackend {
            backend: ideal_backend(cfg.mode),
            calibration: None,
        },
        BackendKind::Analog => {
            let (profile, calibration) = match cfg.profile {
                ProfileKind::Uniform => (VoltageProfile::default(), None),
                ProfileKind::Calibrated => {
                    let cal =
                        calibrate_profile(&cfg.analog, PlacementRule::Random(CALIBRATION_SEED))?;
                    (cal.profile, Some(cal))
                }
            };
            let search = AnalogSearch {
                profile,
                params: cfg.analog,
                sensing: cfg.sensing,
                seed: cfg.seeds().lta,
            };
            search.validate()?;
            PreparedBackend {
                backend: SimilarityBackend::AnalogCam(search),
                calibration,
            }
        }
    })
}

pub fn ideal_backend(mode: HvMode) -> SimilarityBackend {
    match mode {
        HvMode::Binary => SimilarityBackend::IdealHamming,
        HvMode::Multibit => SimilarityBackend::IdealDot,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOutcome {
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub retrain_errors: Vec<usize>,
    pub predictions: Vec<Prediction>,
    pub ledger: CostLedger,
    pub report: CostReport,
    pub backend: String,
    pub calibration: Option<Calibration>,
    pub files: Vec<CsvFile>,
}

pub fn run_classify(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ClassifyOutcome> {
    cfg.validate()?;
    let prepared = prepare_backend(cfg)?;
    classify_with(cfg, ds, &prepared)
}

/// Train, retrain with the ideal backend for the configured mode, then
/// evaluate the held-out split with `prepared`.
pub fn classify_with(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    prepared: &PreparedBackend,
) -> Result<ClassifyOutcome> {
    let labels = ds.labels()?;
    if ds.num_classes() < 2 {
        return Err(Error::Config(
            "classification needs at least two classes".into(),
        ));
    }
    let seeds = cfg.seeds();
    let table = cost_table(cfg)?;
    let split = stratified_split(labels, cfg.train_fraction, seeds.split)?;
    if split.test.is_empty() {
        return Err(Error::Config("the test split is empty".into()));
    }
    let encoder = Encoder::build(ds, &cfg.encoding, &seeds)?;
    let encoded = encoder.encode_all(ds)?;

    let train_set: Vec<(Encoded, usize)> = split
        .train
        .iter()
        .map(|&i| (encoded[i].0.clone(), labels[i]))
        .collect();
    let cm = train(&train_set, ds.num_classes(), cfg.mode)?;
    let refine = ideal_backend(cfg.mode);
    let retrained = retrain(&cm, &train_set, cfg.retrain_epochs, &refine)?;
    let cm = retrained.cm;

    let train_pred = Predictor::new(&cm, &refine)?
        .predict_all(&train_set.iter().map(|s| s.0.clone()).collect::<Vec<_>>())?;
    let train_labels: Vec<usize> = train_set.iter().map(|s| s.1).collect();

    let queries: Vec<Encoded> = split.test.iter().map(|&i| encoded[i].0.clone()).collect();
    let predicted = Predictor::new(&cm, &prepared.backend)?.predict_all(&queries)?;
    let test_labels: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();

    let mut ledger = CostLedger::new();
    for &i in &split.test {
        ledger.tally_counts(&encoded[i].1, cfg.dim)?;
        ledger.tally(OpKind::Search, 1, cfg.dim)?;
    }
    ledger.add_queries(split.test.len() as u64);
    let report = ledger.report(&table);

    let predictions: Vec<Prediction> = split
        .test
        .iter()
        .zip(&predicted)
        .map(|(&i, &p)| Prediction {
            index: i,
            label: labels[i],
            predicted: p,
        })
        .collect();
    let mut outcome = ClassifyOutcome {
        accuracy: accuracy(&predicted, &test_labels),
        train_accuracy: accuracy(&train_pred, &train_labels),
        retrain_errors: retrained.errors,
        predictions,
        ledger,
        report,
        backend: prepared.backend.name().to_string(),
        calibration: prepared.calibration.clone(),
        files: Vec::new(),
    };
    outcome.files = classify_files(cfg, ds, &outcome, &prepared.backend);
    Ok(outcome)
}

fn profile_rows(backend: &SimilarityBackend) -> Vec<(String, String)> {
    match backend {
        SimilarityBackend::AnalogCam(s) => (0..SEGMENTS)
            .map(|k| (format!("profile.level{k}_v"), fmt_f(s.profile.levels[k])))
            .collect(),
        _ => Vec::new(),
    }
}

fn classify_files(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    out: &ClassifyOutcome,
    backend: &SimilarityBackend,
) -> Vec<CsvFile> {
    let mut summary = vec![
        ("backend".to_string(), out.backend.clone()),
        ("mode".into(), format!("{:?}", cfg.mode).to_lowercase()),
        ("samples".into(), ds.len().to_string()),
        ("classes".into(), ds.num_classes().to_string()),
        ("test_samples".into(), out.predictions.len().to_string()),
        ("accuracy".into(), fmt_f(out.accuracy)),
        ("train_accuracy".into(), fmt_f(out.train_accuracy)),
        (
            "retrain_errors".into(),
            out.retrain_errors
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ),
    ];
    summary.extend(profile_rows(backend));
    summary.extend(out.report.rows());
    let rows: Vec<Vec<String>> = out
        .predictions
        .iter()
        .map(|p| {
            vec![
                p.index.to_string(),
                ds.label_names[p.label].clone(),
                ds.label_names[p.predicted].clone(),
                (p.label == p.predicted).to_string(),
            ]
        })
        .collect();
    vec![
        kv_file("classify", "classify_summary.csv", cfg, &summary),
        csv_file(
            "classify",
            "classify_predictions.csv",
            cfg,
            &["index", "label", "predicted", "correct"],
            &rows,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub state: ClusterState,
    pub purity: Option<f64>,
    pub report: CostReport,
    pub files: Vec<CsvFile>,
}

pub fn run_cluster(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ClusterOutcome> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let prepared = prepare_backend(cfg)?;
    let backend = match prepared.backend {
        SimilarityBackend::IdealDot => SimilarityBackend::IdealHamming,
        b => b,
    };
    let encoder = Encoder::build(ds, &cfg.encoding, &seeds)?;
    let encoded = encoder.encode_all(ds)?;
    let points: Vec<_> = encoded.iter().map(|e| e.0.hv.clone()).collect();
    let mut rng = Rng::new(seeds.cluster);
    let c = cfg.cluster;
    let state = cluster(&points, c.k, c.threshold, c.max_epochs, &mut rng, &backend)?;
    let purity = ds.labels.as_ref().map(|l| purity(&state.assignments, l));

    let epochs = state.epoch as u64;
    let n = points.len() as u64;
    let mut ledger = CostLedger::new();
    for (_, ops) in &encoded {
        ledger.tally_counts(ops, cfg.dim)?;
    }
    ledger.tally(OpKind::Search, n * epochs, cfg.dim)?;
    ledger.tally(OpKind::Addition, n * epochs, cfg.dim)?;
    ledger.add_queries(n * epochs);
    let report = ledger.report(&cost_table(cfg)?);

    let mut summary = vec![
        ("backend".to_string(), backend.name().to_string()),
        ("points".into(), n.to_string()),
        ("k".into(), c.k.to_string()),
        ("epochs".into(), state.epoch.to_string()),
        ("converged".into(), state.converged.to_string()),
        (
            "purity".into(),
            purity.map_or_else(|| "n/a".to_string(), fmt_f),
        ),
    ];
    summary.extend(report.rows());
    let trace: Vec<Vec<String>> = (0..state.epoch)
        .map(|e| {
            vec![
                (e + 1).to_string(),
                if e == 0 {
                    String::new()
                } else {
                    state.objective_before_assign[e - 1].to_string()
                },
                state.objective[e].to_string(),
                state.center_shift[e].to_string(),
            ]
        })
        .collect();
    let assignments: Vec<Vec<String>> = state
        .assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            vec![
                i.to_string(),
                a.to_string(),
                ds.labels
                    .as_ref()
                    .map_or_else(String::new, |l| ds.label_names[l[i]].clone()),
            ]
        })
        .collect();
    let files = vec![
        kv_file("cluster", "cluster_summary.csv", cfg, &summary),
        csv_file(
            "cluster",
            "cluster_trace.csv",
            cfg,
            &[
                "epoch",
                "objective_before_assign",
                "objective_after_assign",
                "max_center_shift",
            ],
            &trace,
        ),
        csv_file(
            "cluster",
            "cluster_assignments.csv",
            cfg,
            &["index", "cluster", "label"],
            &assignments,
        ),
    ];
    Ok(ClusterOutcome {
        state,
        purity,
        report,
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub dim: usize,
    pub accuracy: f64,
    pub energy_per_query_pj: f64,
    pub latency_per_query_ns: f64,
    pub ops: OpCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub files: Vec<CsvFile>,
}

pub fn run_dim_sweep(cfg: &ExperimentConfig, ds: &Dataset, dims: &[usize]) -> Result<SweepOutcome> {
    if dims.is_empty() {
        return Err(Error::Config(
            "dim sweep needs at least one dimension".into(),
        ));
    }
    let prepared = {
        cfg.validate()?;
        prepare_backend(cfg)?
    };
    let mut points = Vec::new();
    for &dim in dims {
        let mut c = cfg.clone();
        c.dim = dim;
        let c = c.resolved();
        c.validate()?;
        let run = classify_with(&c, ds, &prepared)?;
        let mut ops = OpCounts::default();
        for op in OpKind::ALL {
            ops.add(op, run.ledger.count(op));
        }
        points.push(SweepPoint {
            dim,
            accuracy: run.accuracy,
            energy_per_query_pj: run.report.energy_per_query_pj(),
            latency_per_query_ns: run.report.latency_per_query_ns(),
            ops,
        });
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = vec![
                p.dim.to_string(),
                fmt_f(p.accuracy),
                fmt_f(p.energy_per_query_pj),
                fmt_f(p.latency_per_query_ns),
            ];
            r.extend(OpKind::ALL.iter().map(|&op| p.ops.get(op).to_string()));
            r
        })
        .collect();
    let head = [
        "dim",
        "accuracy",
        "energy_per_query_pj",
        "latency_per_query_ns",
        "addition",
        "permutation",
        "multiplication",
        "search",
    ];
    Ok(SweepOutcome {
        files: vec![csv_file("dim-sweep", "dim_sweep.csv", cfg, &head, &rows)],
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub rule: PlacementRule,
    pub uniform: Vec<(usize, f64)>,
    pub calibrated: Vec<(usize, f64)>,
    pub uniform_linearity: Linearity,
    pub calibrated_linearity: Linearity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutcome {
    pub calibration: Calibration,
    pub curves: Vec<CurveSet>,
    pub files: Vec<CsvFile>,
}

fn rule_name(rule: PlacementRule) -> String {
    match rule {
        PlacementRule::NearestFirst => "nearest_first".into(),
        PlacementRule::FarthestFirst => "farthest_first".into(),
        PlacementRule::Random(s) => format!("random_{s}"),
    }
}

fn calibration_rows(cal: &Calibration) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> = (0..SEGMENTS)
        .map(|k| (format!("level{k}_v"), fmt_f(cal.profile.levels[k])))
        .collect();
    rows.push((
        "max_deviation_a".into(),
        format!("{:.6e}", cal.max_deviation),
    ));
    rows.push((
        "uniform_max_deviation_a".into(),
        format!("{:.6e}", cal.uniform_max_deviation),
    ));
    rows.push(("improvement".into(), fmt_f(cal.improvement())));
    rows.push(("evaluations".into(), cal.evaluations.to_string()));
    rows.push(("warning".into(), cal.warning.clone().unwrap_or_default()));
    rows
}

pub fn run_transfer_curve(cfg: &ExperimentConfig) -> Result<TransferOutcome> {
    cfg.analog.validate()?;
    let calibration = calibrate_profile(&cfg.analog, PlacementRule::Random(CALIBRATION_SEED))?;
    let uniform = VoltageProfile::default();
    let mut curves = Vec::new();
    for rule in [
        PlacementRule::Random(CALIBRATION_SEED),
        PlacementRule::NearestFirst,
        PlacementRule::FarthestFirst,
    ] {
        let u = transfer_curve(&uniform, &cfg.analog, rule)?;
        let c = transfer_curve(&calibration.profile, &cfg.analog, rule)?;
        curves.push(CurveSet {
            rule,
            uniform_linearity: linearity(&u),
            calibrated_linearity: linearity(&c),
            uniform: u,
            calibrated: c,
        });
    }
    let mut rows = Vec::new();
    for set in &curves {
        for (u, c) in set.uniform.iter().zip(&set.calibrated) {
            rows.push(vec![
                rule_name(set.rule),
                u.0.to_string(),
                format!("{:.6e}", u.1),
                format!("{:.6e}", c.1),
            ]);
        }
    }
    let mut summary = calibration_rows(&calibration);
    for set in &curves {
        let name = rule_name(set.rule);
        summary.push((
            format!("{name}.uniform_max_deviation_a"),
            format!("{:.6e}", set.uniform_linearity.max_deviation),
        ));
        summary.push((
            format!("{name}.calibrated_max_deviation_a"),
            format!("{:.6e}", set.calibrated_linearity.max_deviation),
        ));
    }
    let files = vec![
        csv_file(
            "transfer-curve",
            "transfer_curve.csv",
            cfg,
            &[
                "placement",
                "mismatches",
                "uniform_current_a",
                "calibrated_current_a",
            ],
            &rows,
        ),
        kv_file("transfer-curve", "transfer_summary.csv", cfg, &summary),
    ];
    Ok(TransferOutcome {
        calibration,
        curves,
        files,
    })
}

pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<(Calibration, Vec<CsvFile>)> {
    let cal = calibrate_profile(&cfg.analog, PlacementRule::Random(CALIBRATION_SEED))?;
    let file = kv_file("calibrate", "calibration.csv", cfg, &calibration_rows(&cal));
    Ok((cal, vec![file]))
}

/// Per-operation costs at the configured dimension and the CMOS ratios.
pub fn run_cost_report(cfg: &ExperimentConfig) -> Result<(CostTable, Vec<CsvFile>)> {
    crate::hv::check_dim(cfg.dim)?;
    let table = cost_table(cfg)?;
    let ratios = ratios_vs_cmos(&table);
    let rows: Vec<Vec<String>> = ratios
        .iter()
        .map(|r| {
            let c = table.cost(r.op);
            vec![
                r.op.name().to_string(),
                fmt_f(table.hydra_energy_pj(r.op, cfg.dim)),
                fmt_f(c.hydra_latency_ns),
                fmt_f(c.cmos_energy_pj),
                fmt_f(c.cmos_net_energy_pj),
                fmt_f(table.cmos_latency_ns(r.op)),
                fmt_f(r.energy_ratio),
                fmt_f(r.net_energy_ratio),
            ]
        })
        .collect();
    let head = [
        "op",
        "hydra_energy_pj",
        "hydra_latency_ns",
        "cmos_energy_pj",
        "cmos_net_energy_pj",
        "cmos_latency_ns",
        "energy_ratio",
        "net_energy_ratio",
    ];
    let file = csv_file("cost-report", "cost_report.csv", cfg, &head, &rows);
    Ok((table, vec![file]))
}
