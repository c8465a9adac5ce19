//! Batched loser-takes-all sensing.
//!
//! The LTA block compares up to `batch` match-line currents and keeps the
//! smallest. Rows are streamed through a serializer: the first batch holds the
//! first `batch` rows, every later batch holds the buffered winner plus the
//! next `batch - 1` rows. Currents below the sensing floor read as zero, and
//! any candidate closer than `resolution` to the minimum is indistinguishable
//! from it; such comparisons are settled by a seeded draw and flagged. A gap of
//! exactly `resolution` (up to floating-point rounding) is resolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Relative slack on the resolution so that a gap meant to equal it is not
/// flagged because of rounding in the subtraction.
const RESOLUTION_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingSpec {
    /// Smallest current difference the comparator resolves (A).
    pub resolution: f64,
    /// Currents below this read as zero (A).
    pub floor: f64,
    pub batch: usize,
}

impl Default for SensingSpec {
    fn default() -> Self {
        Self {
            resolution: 0.2e-6,
            floor: 1e-9,
            batch: 8,
        }
    }
}

impl SensingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.resolution > self.floor) {
            return Err(Error::Param(format!(
                "sensing spec needs resolution > floor > 0 (got {} / {})",
                self.resolution, self.floor
            )));
        }
        if self.batch < 2 {
            return Err(Error::Param("LTA batch must be at least 2".into()));
        }
        Ok(())
    }

    fn sensed(&self, current: f64) -> f64 {
        if current < self.floor {
            0.0
        } else {
            current
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOutcome {
    /// Position of the winner within the batch.
    pub index: usize,
    pub ambiguous: bool,
}

/// One LTA pass over at most `spec.batch` currents.
pub fn compare_batch(currents: &[f64], spec: &SensingSpec, rng: &mut Rng) -> Result<BatchOutcome> {
    if currents.len() < 2 || currents.len() > spec.batch {
        return Err(Error::LtaBatch {
            len: currents.len(),
            batch: spec.batch,
        });
    }
    let sensed: Vec<f64> = currents.iter().map(|&c| spec.sensed(c)).collect();
    let min = sensed.iter().copied().fold(f64::INFINITY, f64::min);
    let near: Vec<usize> = (0..sensed.len())
        .filter(|&i| sensed[i] - min < spec.resolution * (1.0 - RESOLUTION_RTOL))
        .collect();
    if near.len() == 1 {
        return Ok(BatchOutcome {
            index: near[0],
            ambiguous: false,
        });
    }
    Ok(BatchOutcome {
        index: near[rng.below(near.len())],
        ambiguous: true,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchTrace {
    /// Row indices presented to the comparator, buffered winner first.
    pub rows: Vec<usize>,
    pub winner: usize,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtaDecision {
    pub winner: usize,
    pub trace: Vec<BatchTrace>,
    pub ambiguous_flags: usize,
}

/// Serial argmin over all rows using one `batch`-input LTA block.
pub fn argmin_serial(currents: &[f64], spec: &SensingSpec, rng: &mut Rng) -> Result<LtaDecision> {
    if currents.is_empty() {
        return Err(Error::LtaEmpty);
    }
    spec.validate()?;
    let mut decision = LtaDecision {
        winner: 0,
        trace: Vec::new(),
        ambiguous_flags: 0,
    };
    if currents.len() == 1 {
        return Ok(decision);
    }

    let first = spec.batch.min(currents.len());
    let mut rows: Vec<usize> = (0..first).collect();
    let mut next = first;
    loop {
        let batch: Vec<f64> = rows.iter().map(|&r| currents[r]).collect();
        let out = compare_batch(&batch, spec, rng)?;
        decision.winner = rows[out.index];
        decision.ambiguous_flags += out.ambiguous as usize;
        decision.trace.push(BatchTrace {
            rows: rows.clone(),
            winner: decision.winner,
            ambiguous: out.ambiguous,
        });
        if next >= currents.len() {
            break;
        }
        let end = (next + spec.batch - 1).min(currents.len());
        rows = std::iter::once(decision.winner).chain(next..end).collect();
        next = end;
    }
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UA: f64 = 1e-6;

    #[test]
    fn picks_lowest_current() {
        let spec = SensingSpec::default();
        let out = compare_batch(&[5.0 * UA, 3.0 * UA, 9.0 * UA], &spec, &mut Rng::new(0)).unwrap();
        assert_eq!(
            out,
            BatchOutcome {
                index: 1,
                ambiguous: false
            }
        );
    }

    #[test]
    fn sub_resolution_pair_depends_on_seed() {
        let spec = SensingSpec::default();
        let currents = [4.0 * UA, 4.1 * UA, 8.0 * UA];
        let mut seen = [false; 2];
        for seed in 0..64 {
            let out = compare_batch(&currents, &spec, &mut Rng::new(seed)).unwrap();
            assert!(out.ambiguous);
            seen[out.index] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn boundary_delta_is_resolved() {
        let spec = SensingSpec::default();
        for base in [0.1e-6, 0.3e-6, 1.7e-6, 12.9e-6] {
            let out = compare_batch(&[base + 0.2e-6, base], &spec, &mut Rng::new(1)).unwrap();
            assert_eq!(
                out,
                BatchOutcome {
                    index: 1,
                    ambiguous: false
                }
            );
        }
        let out = compare_batch(&[1.0e-6, 1.19e-6], &spec, &mut Rng::new(1)).unwrap();
        assert!(out.ambiguous);
    }

    #[test]
    fn all_below_floor_is_uniform_and_flagged() {
        let spec = SensingSpec::default();
        let currents = [0.1e-9, 0.5e-9, 0.9e-9, 0.2e-9];
        let mut hits = [0usize; 4];
        for seed in 0..400 {
            let out = compare_batch(&currents, &spec, &mut Rng::new(seed)).unwrap();
            assert!(out.ambiguous);
            hits[out.index] += 1;
        }
        assert!(hits.iter().all(|&h| h > 60), "{hits:?}");
    }

    #[test]
    fn batch_size_errors() {
        let spec = SensingSpec::default();
        let mut rng = Rng::new(0);
        assert!(compare_batch(&[], &spec, &mut rng).is_err());
        assert!(compare_batch(&[1.0], &spec, &mut rng).is_err());
        assert!(compare_batch(&[1.0; 9], &spec, &mut rng).is_err());
        assert!(argmin_serial(&[], &spec, &mut rng).is_err());
    }

    #[test]
    fn single_row_has_empty_trace() {
        let d = argmin_serial(&[3.0 * UA], &SensingSpec::default(), &mut Rng::new(0)).unwrap();
        assert_eq!(d.winner, 0);
        assert!(d.trace.is_empty());
    }

    #[test]
    fn eight_rows_single_batch() {
        let currents: Vec<f64> = [7, 3, 9, 1, 5, 8, 2, 6]
            .iter()
            .map(|&c| c as f64 * UA)
            .collect();
        let d = argmin_serial(&currents, &SensingSpec::default(), &mut Rng::new(0)).unwrap();
        assert_eq!(d.winner, 3);
        assert_eq!(d.trace.len(), 1);
        assert_eq!(d.ambiguous_flags, 0);
    }

    #[test]
    fn carry_forward_layout() {
        let currents: Vec<f64> = (0..20).map(|i| (20 - i) as f64 * UA).collect();
        let d = argmin_serial(&currents, &SensingSpec::default(), &mut Rng::new(0)).unwrap();
        assert_eq!(d.winner, 19);
        assert_eq!(d.trace.len(), 3);
        assert_eq!(d.trace[0].rows, (0..8).collect::<Vec<_>>());
        assert_eq!(d.trace[1].rows, vec![7, 8, 9, 10, 11, 12, 13, 14]);
        assert_eq!(d.trace[2].rows, vec![14, 15, 16, 17, 18, 19]);
    }

    #[test]
    fn twenty_separated_rows_match_brute_force() {
        let mut rng = Rng::new(33);
        for _ in 0..50 {
            let mut currents: Vec<f64> =
                (0..20).map(|i| (i as f64) * 0.3 * UA + 1.0 * UA).collect();
            rng.shuffle(&mut currents);
            let oracle = (0..20)
                .min_by(|&a, &b| currents[a].partial_cmp(&currents[b]).unwrap())
                .unwrap();
            let d = argmin_serial(&currents, &SensingSpec::default(), &mut rng).unwrap();
            assert_eq!(d.winner, oracle);
            assert_eq!(d.ambiguous_flags, 0);
        }
    }
}
