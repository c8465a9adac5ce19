//! Item/level memories and MAP encoders.
//!
//! Record (spatial) encoding binds a per-feature basis HV with the level HV of
//! the quantized feature value and bundles the results. N-gram (temporal)
//! encoding binds permuted symbol HVs over a sliding window and bundles the
//! grams; older symbols in the window are permuted further.

use serde::{Deserialize, Serialize};

use crate::cost::{OpCounts, OpKind};
use crate::error::{Error, Result};
use crate::hv::{check_dim, AccumulatorHV, BipolarHV, DROP_WIDTHS};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct ItemMemory {
    dim: usize,
    symbols: Vec<BipolarHV>,
}

impl ItemMemory {
    pub fn from_symbols(symbols: Vec<BipolarHV>) -> Result<Self> {
        let dim = symbols
            .first()
            .ok_or(Error::Generation("no symbols".into()))?
            .dim();
        if let Some(bad) = symbols.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        Ok(Self { dim, symbols })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, symbol: usize) -> Result<&BipolarHV> {
        self.symbols
            .get(symbol)
            .ok_or_else(|| Error::Encoding(format!("unknown symbol {symbol}")))
    }

    pub fn symbols(&self) -> &[BipolarHV] {
        &self.symbols
    }

    /// Every pair lies within `dim/2 ± 4·sqrt(dim)`.
    pub fn is_quasi_orthogonal(&self) -> bool {
        let (lo, hi) = orthogonality_band(self.dim);
        self.symbols.iter().enumerate().all(|(i, a)| {
            self.symbols[i + 1..].iter().all(|b| {
                let h = a.hamming(b).expect("equal dims") as f64;
                (lo..=hi).contains(&h)
            })
        })
    }
}

pub fn orthogonality_band(dim: usize) -> (f64, f64) {
    let half = dim as f64 / 2.0;
    let spread = 4.0 * (dim as f64).sqrt();
    (half - spread, half + spread)
}

pub fn build_item_memory(num_symbols: usize, dim: usize, rng: &mut Rng) -> Result<ItemMemory> {
    if num_symbols == 0 {
        return Err(Error::Generation(
            "item memory needs at least one symbol".into(),
        ));
    }
    check_dim(dim)?;
    for _attempt in 0..2 {
        let symbols = (0..num_symbols)
            .map(|_| BipolarHV::random(dim, rng))
            .collect::<Result<Vec<_>>>()?;
        let im = ItemMemory { dim, symbols };
        if im.is_quasi_orthogonal() {
            return Ok(im);
        }
    }
    Err(Error::Generation(format!(
        "{num_symbols} random symbols at dim {dim} failed the orthogonality check twice"
    )))
}

#[derive(Debug, Clone)]
pub struct LevelMemory {
    levels: Vec<BipolarHV>,
    value_min: f64,
    value_max: f64,
}

impl LevelMemory {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    pub fn level(&self, k: usize) -> &BipolarHV {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[BipolarHV] {
        &self.levels
    }

    pub fn range(&self) -> (f64, f64) {
        (self.value_min, self.value_max)
    }

    // Written negated so NaN bounds are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn with_range(mut self, value_min: f64, value_max: f64) -> Result<Self> {
        if !(value_min <= value_max) {
            return Err(Error::Param(format!(
                "level range [{value_min}, {value_max}] is empty"
            )));
        }
        self.value_min = value_min;
        self.value_max = value_max;
        Ok(self)
    }
}

/// Linear level HVs: each step flips a fresh disjoint block of pre-shuffled
/// positions, so `hamming(levels[0], levels[k])` grows linearly in `k` and the
/// two extremes differ in exactly `dim/2` positions. Values map to `[0, 1]`
/// until [`LevelMemory::with_range`] says otherwise.
pub fn build_level_memory(num_levels: usize, dim: usize, rng: &mut Rng) -> Result<LevelMemory> {
    check_dim(dim)?;
    if num_levels < 2 {
        return Err(Error::Param(format!(
            "need at least 2 levels, got {num_levels}"
        )));
    }
    let steps = num_levels - 1;
    let half = dim / 2;
    if half / steps < 1 {
        return Err(Error::TooManyLevels {
            levels: num_levels,
            dim,
        });
    }
    let mut order: Vec<usize> = (0..dim).collect();
    rng.shuffle(&mut order);

    let mut current = BipolarHV::random(dim, rng)?;
    let mut levels = Vec::with_capacity(num_levels);
    levels.push(current.clone());
    for k in 0..steps {
        let (start, end) = (k * half / steps, (k + 1) * half / steps);
        for &pos in &order[start..end] {
            current.set(pos, !current.get(pos));
        }
        levels.push(current.clone());
    }
    Ok(LevelMemory {
        levels,
        value_min: 0.0,
        value_max: 1.0,
    })
}

/// Level index of `x`: `floor((x - min) / (max - min) * L)` clamped to `[0, L-1]`.
pub fn quantize(x: f64, lm: &LevelMemory) -> usize {
    let l = lm.len();
    let (lo, hi) = lm.range();
    if hi <= lo || x.is_nan() {
        return 0;
    }
    let t = ((x - lo) / (hi - lo) * l as f64).floor();
    t.clamp(0.0, (l - 1) as f64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Record,
    Ngram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermuteMode {
    Shift,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    pub scheme: Scheme,
    /// N-gram width.
    pub n: usize,
    /// Level count for record encoding.
    pub levels: usize,
    pub permute_mode: PermuteMode,
    /// Permutation stride per window position (bits). Shift mode rotates by
    /// the same stride so the two modes differ only in the wrapped tail.
    pub drop_width: usize,
    pub dim: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Record,
            n: 3,
            levels: 16,
            permute_mode: PermuteMode::Shift,
            drop_width: 8,
            dim: 2048,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.n == 0 {
            return Err(Error::Config("n-gram width must be at least 1".into()));
        }
        if self.scheme == Scheme::Ngram && self.n < 2 {
            return Err(Error::Config("n-gram scheme needs n >= 2".into()));
        }
        if self.scheme == Scheme::Record && self.levels < 2 {
            return Err(Error::Config(
                "record scheme needs at least 2 levels".into(),
            ));
        }
        if !DROP_WIDTHS[1..].contains(&self.drop_width) {
            return Err(Error::DropWidth(self.drop_width));
        }
        Ok(())
    }
}

/// Spatial record encoding: bundle of `bind(basis_f, level(x_f))`.
pub fn encode_record(features: &[f64], im: &ItemMemory, lm: &LevelMemory) -> Result<AccumulatorHV> {
    if features.len() != im.len() {
        return Err(Error::Encoding(format!(
            "{} features but item memory holds {} basis vectors",
            features.len(),
            im.len()
        )));
    }
    if lm.dim() != im.dim() {
        return Err(Error::DimMismatch {
            left: im.dim(),
            right: lm.dim(),
        });
    }
    let mut acc = AccumulatorHV::zeros(im.dim())?;
    for (basis, &x) in im.symbols().iter().zip(features) {
        acc.add_hv(&basis.bind(lm.level(quantize(x, lm)))?)?;
    }
    Ok(acc)
}

pub fn record_op_counts(num_features: usize) -> OpCounts {
    let mut c = OpCounts::default();
    c.add(OpKind::Multiplication, num_features as u64);
    c.add(OpKind::Addition, num_features as u64);
    c
}

/// Permutes `hv` by `k` window positions.
fn permute_k(hv: &BipolarHV, k: usize, cfg: &EncodingConfig, rng: &mut Rng) -> Result<BipolarHV> {
    match cfg.permute_mode {
        PermuteMode::Shift => hv.permute_shift((k * cfg.drop_width) % hv.dim()),
        PermuteMode::Drop => {
            let mut out = hv.clone();
            for _ in 0..k {
                out = out.permute_drop(cfg.drop_width, rng)?;
            }
            Ok(out)
        }
    }
}

/// One gram: `bind_k permute^k(basis[window[n-1-k]])`.
pub fn encode_gram(
    window: &[usize],
    im: &ItemMemory,
    cfg: &EncodingConfig,
    rng: &mut Rng,
) -> Result<BipolarHV> {
    let n = window.len();
    let mut gram = im.get(window[n - 1])?.clone();
    for k in 1..n {
        let permuted = permute_k(im.get(window[n - 1 - k])?, k, cfg, rng)?;
        gram = gram.bind(&permuted)?;
    }
    Ok(gram)
}

/// Temporal n-gram encoding of a symbol sequence.
pub fn encode_ngram(
    sequence: &[usize],
    n: usize,
    im: &ItemMemory,
    cfg: &EncodingConfig,
    rng: &mut Rng,
) -> Result<AccumulatorHV> {
    if n == 0 {
        return Err(Error::Encoding("n-gram width must be at least 1".into()));
    }
    if sequence.len() < n {
        return Err(Error::Encoding(format!(
            "sequence of length {} is shorter than n = {n}",
            sequence.len()
        )));
    }
    let mut acc = AccumulatorHV::zeros(im.dim())?;
    for window in sequence.windows(n) {
        acc.add_hv(&encode_gram(window, im, cfg, rng)?)?;
    }
    Ok(acc)
}

pub fn ngram_op_counts(sequence_len: usize, n: usize) -> OpCounts {
    let windows = (sequence_len + 1).saturating_sub(n) as u64;
    let mut c = OpCounts::default();
    c.add(OpKind::Permutation, windows * (n as u64 - 1));
    c.add(OpKind::Multiplication, windows * (n as u64 - 1));
    c.add(OpKind::Addition, windows);
    c
}
