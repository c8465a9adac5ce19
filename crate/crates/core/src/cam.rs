//! Behavioral model of the SOT-CAM fabric.
//!
//! Up to 16 banks of 128x128 cells hold one stored hypervector per row; column
//! `c` of bank `k` holds bit `128k + c`. An ideal search returns exact Hamming
//! distances. The analog search models each bank's match line (ML) as a
//! resistive ladder: column 0 sits next to the sensing block, which holds the
//! line at the reference potential, and every segment between neighbouring
//! cells has resistance `r_segment`. A mismatching cell at column `j` drives
//!
//! ```text
//! i_j = g_cell * max(0, gamma * V_search(j) - v_ml(j) - v_th)^2
//! ```
//!
//! into the ladder, where `v_ml(j)` is the local line potential. A constant
//! bias current `i_bias` enters at the far end and is removed again by the
//! sensing block; it sets up the position-dependent IR drop along the line.
//! The bank reading is the mismatch current arriving at the sensing node and
//! the row reading is the sum over active banks.
//!
//! Search voltages come from a [`VoltageProfile`]: one level per 32-column
//! segment, non-increasing toward the sensing block.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hv::{check_dim, BipolarHV, BANK_WIDTH};
use crate::learner::ClassMemory;
use crate::lta::{argmin_serial, LtaDecision, SensingSpec};
use crate::rng::Rng;

pub const NUM_BANKS: usize = 16;
pub const BANK_ROWS: usize = 128;
pub const BANK_COLS: usize = BANK_WIDTH;
pub const SEGMENTS: usize = 4;
pub const SEGMENT_COLS: usize = BANK_COLS / SEGMENTS;

pub const BASE_VOLTAGE: f64 = 1.0;
pub const MAX_SEARCH_VOLTAGE: f64 = 1.2;
pub const MIN_CALIBRATION_VOLTAGE: f64 = 0.8;

/// MTJ resistances of the 45 nm junctions (parallel / anti-parallel). Kept for
/// reference; search-path energy through them is negligible and they do not
/// enter the ML solve.
pub const MTJ_R_PARALLEL_OHM: f64 = 1.25e6;
pub const MTJ_R_ANTIPARALLEL_OHM: f64 = 3.44e6;

pub const SOLVER_TOLERANCE: f64 = 1e-9;
pub const SOLVER_MAX_ITERATIONS: usize = 10_000;
pub const SOLVER_DAMPING: f64 = 0.5;

/// Upper end of the per-bank current range the sensing path accepts (A).
pub const SENSE_RANGE_PER_BANK: f64 = 40e-6;

/// Placement seed used for calibration and linearity reporting.
pub const CALIBRATION_SEED: u64 = 0xCA1B;

/// Minimum per-mismatch current step, as a fraction of `i_cell_nominal`,
/// that a calibrated profile must keep.
pub const MIN_STEP_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankLayout {
    dim: usize,
    /// `banks[k][r]` is row `r` of bank `k`.
    banks: Vec<Vec<u128>>,
    rows: usize,
    /// Class id to row index.
    row_map: Vec<usize>,
}

impl BankLayout {
    /// Stores `hvs[i]` in row `i`.
    pub fn load(hvs: &[BipolarHV]) -> Result<Self> {
        let dim = hvs.first().ok_or(Error::EmptyClassMemory)?.dim();
        check_dim(dim)?;
        if hvs.len() > BANK_ROWS {
            return Err(Error::Capacity { count: hvs.len() });
        }
        let mut banks = vec![vec![0u128; BANK_ROWS]; NUM_BANKS];
        for (r, hv) in hvs.iter().enumerate() {
            if hv.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: hv.dim(),
                });
            }
            for (k, &word) in hv.words().iter().enumerate() {
                banks[k][r] = word;
            }
        }
        Ok(Self {
            dim,
            banks,
            rows: hvs.len(),
            row_map: (0..hvs.len()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn active_banks(&self) -> usize {
        self.dim / BANK_COLS
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row_of(&self, class: usize) -> Option<usize> {
        self.row_map.get(class).copied()
    }

    pub fn class_of(&self, row: usize) -> Option<usize> {
        self.row_map.iter().position(|&r| r == row)
    }

    /// Bits of bank `k`, row `r`.
    pub fn cell_word(&self, k: usize, r: usize) -> u128 {
        self.banks[k][r]
    }

    pub fn row_hv(&self, r: usize) -> BipolarHV {
        let words = (0..self.active_banks()).map(|k| self.banks[k][r]).collect();
        BipolarHV::from_words(words).expect("stored rows are aligned")
    }

    fn check_query(&self, query: &BipolarHV) -> Result<()> {
        if query.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: query.dim(),
            });
        }
        Ok(())
    }
}

/// Places every deployed class HV in its own row.
pub fn load_rows(cm: &ClassMemory) -> Result<BankLayout> {
    BankLayout::load(cm.deployed()?)
}

/// Exact Hamming distance per occupied row.
pub fn search_ideal(layout: &BankLayout, query: &BipolarHV) -> Result<Vec<usize>> {
    layout.check_query(query)?;
    Ok((0..layout.rows)
        .map(|r| {
            (0..layout.active_banks())
                .map(|k| (layout.banks[k][r] ^ query.bank(k)).count_ones() as usize)
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoltageProfile {
    /// Search voltage per 32-column segment, segment 0 next to the sensing block.
    pub levels: [f64; SEGMENTS],
}

impl Default for VoltageProfile {
    fn default() -> Self {
        Self::uniform(BASE_VOLTAGE)
    }
}

impl VoltageProfile {
    pub fn uniform(v: f64) -> Self {
        Self {
            levels: [v; SEGMENTS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .levels
            .iter()
            .any(|&v| !(v > 0.0 && v <= MAX_SEARCH_VOLTAGE))
        {
            return Err(Error::Param(format!(
                "search voltages must lie in (0, {MAX_SEARCH_VOLTAGE}] V: {:?}",
                self.levels
            )));
        }
        if self.levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Param(format!(
                "search voltages must not increase toward the sensing block: {:?}",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn voltage_at(&self, column: usize) -> f64 {
        self.levels[column / SEGMENT_COLS]
    }

    pub fn is_uniform(&self) -> bool {
        self.levels.iter().all(|&v| v == self.levels[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalogParams {
    /// ML interconnect resistance per cell pitch (ohm).
    pub r_segment: f64,
    /// Fraction of the search voltage that appears as mismatch gate drive.
    pub gamma: f64,
    /// Driver threshold voltage (V).
    pub v_th: f64,
    /// Sensing floor (A); bank currents below it read as zero.
    pub i_floor: f64,
    /// Current of one mismatching cell at 1 V search and no IR drop (A).
    pub i_cell_nominal: f64,
    /// Bias current entering at the far end of each ML (A).
    pub i_bias: f64,
}

impl Default for AnalogParams {
    fn default() -> Self {
        Self {
            r_segment: 3.0,
            gamma: 0.6,
            v_th: 0.3,
            i_floor: 1e-9,
            i_cell_nominal: 0.15e-6,
            i_bias: 250e-6,
        }
    }
}

impl AnalogParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma", self.gamma),
            ("v_th", self.v_th),
            ("i_floor", self.i_floor),
            ("i_cell_nominal", self.i_cell_nominal),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("r_segment", self.r_segment), ("i_bias", self.i_bias)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Param(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.gamma * BASE_VOLTAGE <= self.v_th {
            return Err(Error::Param(
                "nominal mismatch drive is below threshold".into(),
            ));
        }
        if self.i_floor >= self.i_cell_nominal {
            return Err(Error::Param(
                "i_floor must be well below i_cell_nominal".into(),
            ));
        }
        Ok(())
    }

    fn nominal_overdrive(&self) -> f64 {
        self.gamma * BASE_VOLTAGE - self.v_th
    }

    /// Square-law transconductance implied by `i_cell_nominal` (A/V^2).
    pub fn g_cell(&self) -> f64 {
        self.i_cell_nominal / self.nominal_overdrive().powi(2)
    }

    /// Line potential with no mismatching cells.
    fn bias_potential(&self) -> [f64; BANK_COLS] {
        let mut v = [0.0; BANK_COLS];
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = self.r_segment * self.i_bias * (j + 1) as f64;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MLReading {
    pub row: usize,
    pub current: f64,
    pub bank_currents: Vec<f64>,
}

/// Solves one bank's match line for the given mismatch mask, starting from
/// the potentials in `v` and leaving the converged potentials there.
fn solve_ladder(
    mismatches: u128,
    profile: &VoltageProfile,
    params: &AnalogParams,
    v: &mut [f64; BANK_COLS],
) -> Result<f64> {
    if mismatches == 0 {
        return Ok(0.0);
    }
    let od_nom = params.nominal_overdrive();
    let mut drive = [0.0; BANK_COLS];
    for (j, d) in drive.iter_mut().enumerate() {
        *d = params.gamma * profile.voltage_at(j) - params.v_th;
    }
    let cell = |j: usize, vj: f64| {
        let od = drive[j] - vj;
        if od > 0.0 {
            params.i_cell_nominal * (od / od_nom) * (od / od_nom)
        } else {
            0.0
        }
    };
    let columns: Vec<usize> = (0..BANK_COLS)
        .filter(|&j| (mismatches >> j) & 1 == 1)
        .collect();

    let mut trace = Vec::new();
    let mut injected = [0.0; BANK_COLS];
    let mut fresh = [0.0; BANK_COLS];
    for _ in 0..SOLVER_MAX_ITERATIONS {
        for &j in &columns {
            injected[j] = cell(j, v[j]);
        }
        // Segment k carries everything injected at or beyond node k.
        let mut through = params.i_bias;
        let mut seg = [0.0; BANK_COLS];
        for k in (0..BANK_COLS).rev() {
            through += injected[k];
            seg[k] = through;
        }
        let (mut acc, mut residual, mut scale) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..BANK_COLS {
            acc += params.r_segment * seg[j];
            fresh[j] = acc;
            residual = residual.max((acc - v[j]).abs());
            scale = scale.max(acc.abs());
        }
        if residual <= SOLVER_TOLERANCE * scale {
            *v = fresh;
            return Ok(columns.iter().map(|&j| cell(j, v[j])).sum());
        }
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(residual);
        for j in 0..BANK_COLS {
            v[j] += SOLVER_DAMPING * (fresh[j] - v[j]);
        }
    }
    Err(Error::Solver {
        iterations: SOLVER_MAX_ITERATIONS,
        trace,
    })
}

/// Current of one bank whose mismatching columns are the set bits of `mismatches`.
pub fn solve_bank(
    mismatches: u128,
    profile: &VoltageProfile,
    params: &AnalogParams,
) -> Result<f64> {
    let mut v = params.bias_potential();
    let i = solve_ladder(mismatches, profile, params, &mut v)?;
    Ok(if i < params.i_floor { 0.0 } else { i })
}

/// ML reading of a stored row against a query, summed over active banks.
pub fn solve_ml(
    row_bits: &BipolarHV,
    query_bits: &BipolarHV,
    profile: &VoltageProfile,
    params: &AnalogParams,
) -> Result<MLReading> {
    if row_bits.dim() != query_bits.dim() {
        return Err(Error::DimMismatch {
            left: row_bits.dim(),
            right: query_bits.dim(),
        });
    }
    let bank_currents = row_bits
        .words()
        .iter()
        .zip(query_bits.words())
        .map(|(r, q)| solve_bank(r ^ q, profile, params))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MLReading {
        row: 0,
        current: bank_currents.iter().sum(),
        bank_currents,
    })
}

/// Analog search of every occupied row; rows are solved independently.
pub fn search_analog(
    layout: &BankLayout,
    query: &BipolarHV,
    profile: &VoltageProfile,
    params: &AnalogParams,
) -> Result<Vec<MLReading>> {
    layout.check_query(query)?;
    (0..layout.rows)
        .into_par_iter()
        .map(|r| {
            let bank_currents = (0..layout.active_banks())
                .map(|k| solve_bank(layout.banks[k][r] ^ query.bank(k), profile, params))
                .collect::<Result<Vec<f64>>>()?;
            Ok(MLReading {
                row: r,
                current: bank_currents.iter().sum(),
                bank_currents,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "seed")]
pub enum PlacementRule {
    NearestFirst,
    FarthestFirst,
    Random(u64),
}

impl PlacementRule {
    pub fn column_order(&self) -> Vec<usize> {
        match *self {
            PlacementRule::NearestFirst => (0..BANK_COLS).collect(),
            PlacementRule::FarthestFirst => (0..BANK_COLS).rev().collect(),
            PlacementRule::Random(seed) => {
                let mut order: Vec<usize> = (0..BANK_COLS).collect();
                Rng::new(seed).shuffle(&mut order);
                order
            }
        }
    }
}

/// Bank current for `h = 0..=128` mismatches placed by `rule`; each point
/// adds one mismatch to the previous placement.
pub fn transfer_curve(
    profile: &VoltageProfile,
    params: &AnalogParams,
    rule: PlacementRule,
) -> Result<Vec<(usize, f64)>> {
    let order = rule.column_order();
    let mut v = params.bias_potential();
    let mut mask = 0u128;
    let mut curve = Vec::with_capacity(BANK_COLS + 1);
    curve.push((0, 0.0));
    for (h, &col) in order.iter().enumerate() {
        mask |= 1u128 << col;
        let i = solve_ladder(mask, profile, params, &mut v)?;
        curve.push((h + 1, i));
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearity {
    /// Largest absolute distance from the least-squares line (A).
    pub max_deviation: f64,
    pub slope: f64,
    pub intercept: f64,
}

pub fn linearity(curve: &[(usize, f64)]) -> Linearity {
    let n = curve.len() as f64;
    let mx = curve.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = curve.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = curve.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = curve.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let max_deviation = curve
        .iter()
        .map(|p| (p.1 - (slope * p.0 as f64 + intercept)).abs())
        .fold(0.0, f64::max);
    Linearity {
        max_deviation,
        slope,
        intercept,
    }
}

/// Every pair of curve points is at least `MIN_STEP_FRACTION * i_cell_nominal`
/// per mismatch apart.
pub fn keeps_min_step(curve: &[(usize, f64)], params: &AnalogParams) -> bool {
    let step = MIN_STEP_FRACTION * params.i_cell_nominal;
    curve
        .windows(2)
        .all(|w| w[1].1 - w[0].1 >= step * (w[1].0 - w[0].0) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub profile: VoltageProfile,
    pub max_deviation: f64,
    pub uniform_max_deviation: f64,
    /// Set when no candidate beat the uniform profile.
    pub warning: Option<String>,
    pub evaluations: usize,
}

impl Calibration {
    pub fn improvement(&self) -> f64 {
        self.uniform_max_deviation / self.max_deviation
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    /// Levels in centivolts.
    cv: [u32; SEGMENTS],
    feasible: bool,
    deviation: f64,
}

fn to_profile(cv: [u32; SEGMENTS]) -> VoltageProfile {
    VoltageProfile {
        levels: cv.map(|c| c as f64 / 100.0),
    }
}

fn evaluate(cv: [u32; SEGMENTS], params: &AnalogParams, rule: PlacementRule) -> Result<Candidate> {
    let curve = transfer_curve(&to_profile(cv), params, rule)?;
    Ok(Candidate {
        cv,
        feasible: keeps_min_step(&curve, params),
        deviation: linearity(&curve).max_deviation,
    })
}

/// Search for the 4-level profile that makes the transfer curve most linear.
///
/// Levels range over 0.80..=1.20 V in 10 mV steps and never increase toward
/// the sensing block. An exhaustive 50 mV grid picks the starting point, then
/// coordinate descent refines one level at a time. Profiles that let any
/// per-mismatch current step fall below `MIN_STEP_FRACTION * i_cell_nominal`
/// are rejected.
pub fn calibrate_profile(params: &AnalogParams, rule: PlacementRule) -> Result<Calibration> {
    params.validate()?;
    let (lo, hi) = (
        (MIN_CALIBRATION_VOLTAGE * 100.0).round() as u32,
        (MAX_SEARCH_VOLTAGE * 100.0).round() as u32,
    );
    // Ties and floating-point noise never displace the incumbent.
    let eps = 1e-6 * params.i_cell_nominal;
    let better = |a: &Candidate, b: &Candidate| match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        _ => a.deviation < b.deviation - eps,
    };

    let uniform = evaluate([100; SEGMENTS], params, rule)?;
    let mut evaluations = 1;

    let coarse: Vec<u32> = (lo..=hi).step_by(5).collect();
    let mut grid = Vec::new();
    for &a in &coarse {
        for &b in coarse.iter().filter(|&&b| b >= a) {
            for &c in coarse.iter().filter(|&&c| c >= b) {
                for &d in coarse.iter().filter(|&&d| d >= c) {
                    grid.push([a, b, c, d]);
                }
            }
        }
    }
    let scored = grid
        .par_iter()
        .map(|&cv| evaluate(cv, params, rule))
        .collect::<Result<Vec<_>>>()?;
    evaluations += scored.len();
    let mut best = uniform;
    for cand in &scored {
        if better(cand, &best) {
            best = *cand;
        }
    }

    loop {
        let mut moved = false;
        for seg in 0..SEGMENTS {
            let low = if seg == 0 { lo } else { best.cv[seg - 1] };
            let high = if seg + 1 == SEGMENTS {
                hi
            } else {
                best.cv[seg + 1]
            };
            let options: Vec<[u32; SEGMENTS]> = (low..=high)
                .filter(|&x| x != best.cv[seg])
                .map(|x| {
                    let mut cv = best.cv;
                    cv[seg] = x;
                    cv
                })
                .collect();
            let scored = options
                .par_iter()
                .map(|&cv| evaluate(cv, params, rule))
                .collect::<Result<Vec<_>>>()?;
            evaluations += scored.len();
            for cand in &scored {
                if better(cand, &best) {
                    best = *cand;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }

    let warning = if better(&best, &uniform) {
        None
    } else {
        best = uniform;
        Some(if uniform.feasible {
            "no profile improves on the uniform 1 V profile; analog parameters may be degenerate"
                .into()
        } else {
            "no profile keeps the minimum per-mismatch current step".into()
        })
    };
    Ok(Calibration {
        profile: to_profile(best.cv),
        max_deviation: best.deviation,
        uniform_max_deviation: uniform.deviation,
        warning,
        evaluations,
    })
}

/// Analog similarity search followed by serial LTA selection.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSearch {
    pub profile: VoltageProfile,
    pub params: AnalogParams,
    pub sensing: SensingSpec,
    /// Seed for comparator ambiguity draws.
    pub seed: u64,
}

impl AnalogSearch {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.params.validate()?;
        self.sensing.validate()
    }

    /// Row with the smallest sensed ML current. The comparator stream is keyed
    /// by the query contents, so the result is a pure function of its inputs.
    pub fn nearest_row(
        &self,
        layout: &BankLayout,
        query: &BipolarHV,
    ) -> Result<(usize, LtaDecision)> {
        let readings = search_analog(layout, query, &self.profile, &self.params)?;
        let currents: Vec<f64> = readings.iter().map(|r| r.current).collect();
        let key = query.words().iter().fold(0u64, |h, &w| {
            crate::rng::mix(h, (w as u64) ^ ((w >> 64) as u64))
        });
        let mut rng = Rng::derive(self.seed, key);
        let decision = argmin_serial(&currents, &self.sensing, &mut rng)?;
        Ok((decision.winner, decision))
    }
}
