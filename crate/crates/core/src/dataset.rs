//! Dataset ingestion, synthetic generators and train/test splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cam::BANK_ROWS;
use crate::error::{Error, Result};
use crate::hv::BipolarHV;
use crate::rng::Rng;

/// Text symbols: `a`..=`z` then space. Anything else reads as a space.
pub const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz ";
pub const ALPHABET_LEN: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    FeatureCsv,
    TextCorpus,
    SyntheticBlobs,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::FeatureCsv => "feature_csv",
            DatasetKind::TextCorpus => "text_corpus",
            DatasetKind::SyntheticBlobs => "synthetic_blobs",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature_csv" => Ok(DatasetKind::FeatureCsv),
            "text_corpus" => Ok(DatasetKind::TextCorpus),
            "synthetic_blobs" => Ok(DatasetKind::SyntheticBlobs),
            other => Err(Error::Parse {
                line: 0,
                msg: format!("unknown dataset kind {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    /// Feature vectors normalized to [0, 1].
    Features(Vec<Vec<f64>>),
    /// Symbol index sequences over [`ALPHABET`].
    Text(Vec<Vec<usize>>),
    /// Pre-encoded points.
    Points(Vec<BipolarHV>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Features(v) => v.len(),
            Samples::Text(v) => v.len(),
            Samples::Points(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Samples {
        match self {
            Samples::Features(v) => Samples::Features(idx.iter().map(|&i| v[i].clone()).collect()),
            Samples::Text(v) => Samples::Text(idx.iter().map(|&i| v[i].clone()).collect()),
            Samples::Points(v) => Samples::Points(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub samples: Samples,
    pub labels: Option<Vec<usize>>,
    /// Original label strings, indexed by label id.
    pub label_names: Vec<String>,
    /// Per-feature (min, max) before normalization.
    pub feature_ranges: Vec<(f64, f64)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn arity(&self) -> usize {
        self.feature_ranges.len()
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Config("this dataset carries no labels".into()))
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            kind: self.kind,
            samples: self.samples.select(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            label_names: self.label_names.clone(),
            feature_ranges: self.feature_ranges.clone(),
        }
    }
}

struct LabelTable(BTreeMap<String, usize>, Vec<String>);

impl LabelTable {
    fn new() -> Self {
        Self(BTreeMap::new(), Vec::new())
    }

    fn id(&mut self, name: &str, line: usize) -> Result<usize> {
        if let Some(&id) = self.0.get(name) {
            return Ok(id);
        }
        let id = self.1.len();
        if id >= BANK_ROWS {
            return Err(Error::Parse {
                line,
                msg: format!("more than {BANK_ROWS} distinct labels"),
            });
        }
        self.0.insert(name.to_string(), id);
        self.1.push(name.to_string());
        Ok(id)
    }
}

pub fn ingest(path: &Path, kind: DatasetKind) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse(&text, kind)
}

pub fn parse(text: &str, kind: DatasetKind) -> Result<Dataset> {
    let ds = match kind {
        DatasetKind::FeatureCsv => parse_features(text)?,
        DatasetKind::TextCorpus => parse_corpus(text)?,
        DatasetKind::SyntheticBlobs => parse_points(text)?,
    };
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(ds)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_features(text: &str) -> Result<Dataset> {
    let mut labels = LabelTable::new();
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    let mut arity = None;
    for (line, raw) in content_lines(text) {
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "need at least one feature and a label".into(),
            });
        }
        let n = fields.len() - 1;
        match arity {
            None => arity = Some(n),
            Some(a) if a != n => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {a} features, found {n}"),
                })
            }
            _ => {}
        }
        let row = fields[..n]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("non-numeric feature {f:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        ids.push(labels.id(fields[n], line)?);
    }
    let ranges = normalize(&mut rows);
    Ok(Dataset {
        kind: DatasetKind::FeatureCsv,
        samples: Samples::Features(rows),
        labels: Some(ids),
        label_names: labels.1,
        feature_ranges: ranges,
    })
}

/// Rescales every feature to [0, 1] in place and returns the original ranges.
/// Constant features map to 0.
pub fn normalize(rows: &mut [Vec<f64>]) -> Vec<(f64, f64)> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut ranges: Vec<(f64, f64)> = first.iter().map(|&v| (v, v)).collect();
    for row in rows.iter() {
        for (r, &v) in ranges.iter_mut().zip(row) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    }
    for row in rows.iter_mut() {
        for (v, &(lo, hi)) in row.iter_mut().zip(&ranges) {
            *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
        }
    }
    ranges
}

pub fn symbol_of(c: char) -> usize {
    let c = c.to_ascii_lowercase();
    if c.is_ascii_lowercase() {
        (c as u8 - b'a') as usize
    } else {
        ALPHABET_LEN - 1
    }
}

pub fn symbols(text: &str) -> Vec<usize> {
    text.chars().map(symbol_of).collect()
}

fn parse_corpus(text: &str) -> Result<Dataset> {
    let mut labels = LabelTable::new();
    let mut seqs = Vec::new();
    let mut ids = Vec::new();
    for (line, raw) in content_lines(text) {
        let (label, body) = raw.split_once('\t').ok_or_else(|| Error::Parse {
            line,
            msg: "expected \"label<TAB>text\"".into(),
        })?;
        if label.trim().is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty label".into(),
            });
        }
        seqs.push(symbols(body));
        ids.push(labels.id(label.trim(), line)?);
    }
    Ok(Dataset {
        kind: DatasetKind::TextCorpus,
        samples: Samples::Text(seqs),
        labels: Some(ids),
        label_names: labels.1,
        feature_ranges: Vec::new(),
    })
}

/// One point per line as a string of `0`/`1` characters, optionally followed
/// by `,label`. Either every line has a label or none does.
fn parse_points(text: &str) -> Result<Dataset> {
    let mut labels = LabelTable::new();
    let mut points = Vec::new();
    let mut ids = Vec::new();
    let mut labelled = None;
    let mut dim = None;
    for (line, raw) in content_lines(text) {
        let (bits, label) = match raw.split_once(',') {
            Some((b, l)) => (b.trim(), Some(l.trim())),
            None => (raw.trim(), None),
        };
        match labelled {
            None => labelled = Some(label.is_some()),
            Some(has) if has != label.is_some() => {
                return Err(Error::Parse {
                    line,
                    msg: "labels must be given on every line or none".into(),
                })
            }
            _ => {}
        }
        let parsed = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line,
                    msg: format!("unexpected character {other:?} in bit string"),
                }),
            })
            .collect::<Result<Vec<bool>>>()?;
        match dim {
            None => dim = Some(parsed.len()),
            Some(d) if d != parsed.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {d} bits, found {}", parsed.len()),
                })
            }
            _ => {}
        }
        let hv = BipolarHV::from_bits(parsed).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        points.push(hv);
        if let Some(l) = label {
            ids.push(labels.id(l, line)?);
        }
    }
    Ok(Dataset {
        kind: DatasetKind::SyntheticBlobs,
        samples: Samples::Points(points),
        labels: (labelled == Some(true)).then_some(ids),
        label_names: labels.1,
        feature_ranges: Vec::new(),
    })
}

/// Renders points in the format read by `ingest(_, SyntheticBlobs)`.
pub fn format_points(points: &[BipolarHV], labels: Option<&[usize]>) -> String {
    let mut out = String::new();
    for (i, p) in points.iter().enumerate() {
        out.extend(p.bits().map(|b| if b { '1' } else { '0' }));
        if let Some(l) = labels {
            out.push_str(&format!(",{}", l[i]));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordSpec {
    pub samples: usize,
    pub classes: usize,
    pub features: usize,
    /// Standard deviation of the Gaussian noise around each class prototype.
    pub noise: f64,
}

impl Default for RecordSpec {
    fn default() -> Self {
        Self {
            samples: 600,
            classes: 5,
            features: 24,
            noise: 0.35,
        }
    }
}

/// Feature vectors drawn around per-class random prototypes in [0, 1]^F,
/// clipped to the unit cube. Labels cycle through the classes.
pub fn synthetic_records(spec: &RecordSpec, rng: &mut Rng) -> Result<Dataset> {
    if spec.samples == 0 || spec.classes < 2 || spec.features == 0 || spec.classes > BANK_ROWS {
        return Err(Error::Config(format!("invalid record spec {spec:?}")));
    }
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let protos: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.features).map(|_| rng.unit()).collect())
        .collect();
    let mut rows = Vec::with_capacity(spec.samples);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let c = i % spec.classes;
        rows.push(
            protos[c]
                .iter()
                .map(|&p| (p + noise.sample(rng.inner_mut())).clamp(0.0, 1.0))
                .collect(),
        );
        labels.push(c);
    }
    Ok(Dataset {
        kind: DatasetKind::FeatureCsv,
        samples: Samples::Features(rows),
        labels: Some(labels),
        label_names: (0..spec.classes).map(|c| format!("class{c}")).collect(),
        feature_ranges: vec![(0.0, 1.0); spec.features],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LanguageSpec {
    pub samples: usize,
    pub languages: usize,
    /// Mean sample length in letters; lengths vary by +-20%.
    pub length: usize,
    /// Weight of each language's own bigram table against the shared one.
    pub distinctness: f64,
}

impl Default for LanguageSpec {
    fn default() -> Self {
        Self {
            samples: 480,
            languages: 4,
            length: 100,
            distinctness: 0.8,
        }
    }
}

fn random_transitions(rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..ALPHABET_LEN)
        .map(|_| {
            // u^5 rows carry about 3.4 bits of entropy, close to the
            // conditional letter entropy of natural text.
            let w: Vec<f64> = (0..ALPHABET_LEN).map(|_| rng.unit().powi(5)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

fn draw(weights: &[f64], rng: &mut Rng) -> usize {
    let mut u = rng.unit();
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Letter sequences from per-language first-order Markov chains. Every
/// language mixes a shared bigram table with its own, so `distinctness`
/// controls how hard the languages are to tell apart.
pub fn synthetic_language(spec: &LanguageSpec, rng: &mut Rng) -> Result<Dataset> {
    if spec.samples == 0
        || spec.languages < 2
        || spec.languages > BANK_ROWS
        || spec.length < 5
        || !(0.0..=1.0).contains(&spec.distinctness)
    {
        return Err(Error::Config(format!("invalid language spec {spec:?}")));
    }
    let shared = random_transitions(rng);
    let tables: Vec<Vec<Vec<f64>>> = (0..spec.languages)
        .map(|_| {
            let own = random_transitions(rng);
            own.iter()
                .zip(&shared)
                .map(|(o, s)| {
                    o.iter()
                        .zip(s)
                        .map(|(o, s)| spec.distinctness * o + (1.0 - spec.distinctness) * s)
                        .collect()
                })
                .collect()
        })
        .collect();
    let span = spec.length / 5;
    let mut seqs = Vec::with_capacity(spec.samples);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let lang = i % spec.languages;
        let len = spec.length - span + rng.below(2 * span + 1);
        let mut seq = Vec::with_capacity(len);
        let mut cur = rng.below(ALPHABET_LEN);
        for _ in 0..len {
            seq.push(cur);
            cur = draw(&tables[lang][cur], rng);
        }
        seqs.push(seq);
        labels.push(lang);
    }
    Ok(Dataset {
        kind: DatasetKind::TextCorpus,
        samples: Samples::Text(seqs),
        labels: Some(labels),
        label_names: (0..spec.languages).map(|l| format!("lang{l}")).collect(),
        feature_ranges: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobSpec {
    pub blobs: usize,
    pub per_blob: usize,
    pub dim: usize,
    /// Largest number of bits flipped away from a planted center.
    pub max_flips: usize,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            blobs: 2,
            per_blob: 20,
            dim: 2048,
            max_flips: 2048 / 16,
        }
    }
}

/// Points scattered around random planted centers, each at most `max_flips`
/// bits away from its own center.
pub fn synthetic_blobs(spec: &BlobSpec, rng: &mut Rng) -> Result<Dataset> {
    if spec.blobs < 2 || spec.per_blob == 0 || spec.max_flips > spec.dim {
        return Err(Error::Config(format!("invalid blob spec {spec:?}")));
    }
    let centers = (0..spec.blobs)
        .map(|_| BipolarHV::random(spec.dim, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut positions: Vec<usize> = (0..spec.dim).collect();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..spec.per_blob {
            let flips = rng.below(spec.max_flips + 1);
            rng.shuffle(&mut positions);
            let mut p = c.clone();
            for &i in &positions[..flips] {
                p.set(i, !p.get(i));
            }
            points.push(p);
            labels.push(b);
        }
    }
    Ok(Dataset {
        kind: DatasetKind::SyntheticBlobs,
        samples: Samples::Points(points),
        labels: Some(labels),
        label_names: (0..spec.blobs).map(|b| format!("blob{b}")).collect(),
        feature_ranges: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded stratified split: in each class, a shuffled `train_fraction` of the
/// samples (rounded down, at least one) goes to training. Index lists are
/// returned sorted.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> Result<Split> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for members in by_class.values_mut() {
        rng.shuffle(members);
        let k = ((members.len() as f64 * train_fraction).floor() as usize).max(1);
        split.train.extend_from_slice(&members[..k]);
        split.test.extend_from_slice(&members[k..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
