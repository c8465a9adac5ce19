//! MAP hypervector algebra.
//!
//! Bit convention: bit `0` is bipolar `+1`, bit `1` is bipolar `-1`. Under this
//! mapping elementwise multiplication is XOR and the Hamming distance is the
//! similarity metric.
//!
//! Storage is one `u128` word per 128-bit CAM bank, lowest index in the least
//! significant bit, so bank `k` column `c` is bit `c` of word `k`.

use crate::error::{Error, Result};
use crate::rng::{splitmix64, Rng};

pub const BANK_WIDTH: usize = 128;
pub const MAX_DIM: usize = 2048;

/// Seed of the per-index tie-break function used by [`AccumulatorHV::binarize`].
pub const TIE_BREAK_SEED: u64 = 0x7E1E_B4EA_C0DE_5EED;

/// Permutation amounts supported by the batch-offset read path.
pub const DROP_WIDTHS: [usize; 3] = [0, 8, 16];

pub fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_multiple_of(BANK_WIDTH) || dim > MAX_DIM {
        return Err(Error::Alignment { dim });
    }
    Ok(())
}

fn check_same(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimMismatch { left, right });
    }
    Ok(())
}

/// Deterministic tie-break bit for index `i`.
pub fn tie_bit(i: usize) -> bool {
    splitmix64(TIE_BREAK_SEED ^ i as u64) & 1 == 1
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BipolarHV {
    dim: usize,
    words: Vec<u128>,
}

impl BipolarHV {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            words: vec![0; dim / BANK_WIDTH],
        })
    }

    pub fn ones(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            words: vec![u128::MAX; dim / BANK_WIDTH],
        })
    }

    /// Uniformly random hypervector.
    pub fn random(dim: usize, rng: &mut Rng) -> Result<Self> {
        check_dim(dim)?;
        let words = (0..dim / BANK_WIDTH).map(|_| rng.next_u128()).collect();
        Ok(Self { dim, words })
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self> {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut hv = Self::zeros(bits.len())?;
        for (i, b) in bits.into_iter().enumerate() {
            hv.set(i, b);
        }
        Ok(hv)
    }

    /// Builds a hypervector from bank words (one `u128` per 128 bits).
    pub fn from_words(words: Vec<u128>) -> Result<Self> {
        let dim = words.len() * BANK_WIDTH;
        check_dim(dim)?;
        Ok(Self { dim, words })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn banks(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[u128] {
        &self.words
    }

    pub fn bank(&self, k: usize) -> u128 {
        self.words[k]
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / BANK_WIDTH] >> (i % BANK_WIDTH)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        let mask = 1u128 << (i % BANK_WIDTH);
        let w = &mut self.words[i / BANK_WIDTH];
        if bit {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Bipolar value of element `i`.
    pub fn value(&self, i: usize) -> i64 {
        1 - 2 * self.get(i) as i64
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.dim).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        Self {
            dim: self.dim,
            words: self.words.iter().map(|w| !w).collect(),
        }
    }

    /// Elementwise multiplication of bipolar values, i.e. XOR of bits.
    pub fn bind(&self, other: &Self) -> Result<Self> {
        check_same(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        check_same(self.dim, other.dim)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Circular shift: `result[i] = self[(i + s) mod dim]`.
    pub fn permute_shift(&self, s: usize) -> Result<Self> {
        if s >= self.dim {
            return Err(Error::Permutation {
                amount: s,
                dim: self.dim,
            });
        }
        let n = self.words.len();
        let (q, r) = (s / BANK_WIDTH, s % BANK_WIDTH);
        let words = (0..n)
            .map(|k| {
                let lo = self.words[(k + q) % n];
                if r == 0 {
                    lo
                } else {
                    let hi = self.words[(k + q + 1) % n];
                    (lo >> r) | (hi << (BANK_WIDTH - r))
                }
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            words,
        })
    }

    /// Batch-offset read: drops the first `s` bits and fills the vacated tail
    /// with fresh random bits.
    pub fn permute_drop(&self, s: usize, rng: &mut Rng) -> Result<Self> {
        if !DROP_WIDTHS.contains(&s) {
            return Err(Error::DropWidth(s));
        }
        if s == 0 {
            return Ok(self.clone());
        }
        let mut out = self.permute_shift(s)?;
        let fill = rng.next_u64();
        for t in 0..s {
            out.set(self.dim - s + t, (fill >> t) & 1 == 1);
        }
        Ok(out)
    }
}

/// Bundling workspace: 16-bit signed counters, one per dimension.
///
/// `counts[i]` is the number of bundled vectors with a `1` bit at `i` (minus
/// those subtracted). `n_bundled` is the net number of bundled vectors and may
/// go negative during retraining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulatorHV {
    dim: usize,
    counts: Vec<i16>,
    n_bundled: i64,
}

impl AccumulatorHV {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            counts: vec![0; dim],
            n_bundled: 0,
        })
    }

    pub fn from_counts(counts: Vec<i16>, n_bundled: i64) -> Result<Self> {
        check_dim(counts.len())?;
        Ok(Self {
            dim: counts.len(),
            counts,
            n_bundled,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[i16] {
        &self.counts
    }

    pub fn n_bundled(&self) -> i64 {
        self.n_bundled
    }

    /// Signed sum of the bipolar values bundled at `i`: `n_bundled - 2 * counts[i]`.
    pub fn value(&self, i: usize) -> i64 {
        self.n_bundled - 2 * self.counts[i] as i64
    }

    /// Half-adder update: increment exactly where `hv` has a `1` bit.
    pub fn add_hv(&mut self, hv: &BipolarHV) -> Result<()> {
        self.step_hv(hv, 1)
    }

    pub fn sub_hv(&mut self, hv: &BipolarHV) -> Result<()> {
        self.step_hv(hv, -1)
    }

    fn step_hv(&mut self, hv: &BipolarHV, delta: i16) -> Result<()> {
        check_same(self.dim, hv.dim())?;
        let limit = if delta > 0 { i16::MAX } else { i16::MIN };
        if let Some(index) = (0..self.dim).find(|&i| hv.get(i) && self.counts[i] == limit) {
            return Err(Error::Saturation { index });
        }
        for (k, &word) in hv.words().iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                self.counts[k * BANK_WIDTH + b] += delta;
                w &= w - 1;
            }
        }
        self.n_bundled += delta as i64;
        Ok(())
    }

    pub fn bundle_add(&self, hv: &BipolarHV) -> Result<Self> {
        let mut out = self.clone();
        out.add_hv(hv)?;
        Ok(out)
    }

    pub fn bundle_sub(&self, hv: &BipolarHV) -> Result<Self> {
        let mut out = self.clone();
        out.sub_hv(hv)?;
        Ok(out)
    }

    /// Adds another accumulator elementwise (multibit bundling).
    pub fn add_acc(&mut self, other: &Self) -> Result<()> {
        self.merge_acc(other, 1)
    }

    pub fn sub_acc(&mut self, other: &Self) -> Result<()> {
        self.merge_acc(other, -1)
    }

    fn merge_acc(&mut self, other: &Self, sign: i32) -> Result<()> {
        check_same(self.dim, other.dim)?;
        let mut merged = Vec::with_capacity(self.dim);
        for (index, (&a, &b)) in self.counts.iter().zip(&other.counts).enumerate() {
            let v = a as i32 + sign * b as i32;
            let v = i16::try_from(v).map_err(|_| Error::Saturation { index })?;
            merged.push(v);
        }
        self.counts = merged;
        self.n_bundled += sign as i64 * other.n_bundled;
        Ok(())
    }

    /// Majority vote: bit 1 where `counts[i] > n/2`, 0 where `counts[i] < n/2`,
    /// and a fixed pseudo-random bit on exact ties.
    pub fn binarize(&self) -> Result<BipolarHV> {
        if self.n_bundled == 0 && self.counts.iter().all(|&c| c == 0) {
            return Err(Error::EmptyBundle);
        }
        let mut hv = BipolarHV::zeros(self.dim)?;
        for i in 0..self.dim {
            let twice = 2 * self.counts[i] as i64;
            let bit = match twice.cmp(&self.n_bundled) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => tie_bit(i),
            };
            hv.set(i, bit);
        }
        Ok(hv)
    }
}

/// Operand of [`dot_bipolar`]: a binary hypervector or a bundling accumulator.
#[derive(Debug, Clone, Copy)]
pub enum HvRef<'a> {
    Binary(&'a BipolarHV),
    Multibit(&'a AccumulatorHV),
}

impl<'a> From<&'a BipolarHV> for HvRef<'a> {
    fn from(hv: &'a BipolarHV) -> Self {
        HvRef::Binary(hv)
    }
}

impl<'a> From<&'a AccumulatorHV> for HvRef<'a> {
    fn from(acc: &'a AccumulatorHV) -> Self {
        HvRef::Multibit(acc)
    }
}

impl HvRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            HvRef::Binary(h) => h.dim(),
            HvRef::Multibit(a) => a.dim(),
        }
    }

    fn value(&self, i: usize) -> i64 {
        match self {
            HvRef::Binary(h) => h.value(i),
            HvRef::Multibit(a) => a.value(i),
        }
    }
}

/// Bipolar dot product. For two binary operands this is `dim - 2 * hamming`.
pub fn dot_bipolar<'a, 'b>(a: impl Into<HvRef<'a>>, b: impl Into<HvRef<'b>>) -> Result<i64> {
    let (a, b) = (a.into(), b.into());
    check_same(a.dim(), b.dim())?;
    if let (HvRef::Binary(x), HvRef::Binary(y)) = (a, b) {
        return Ok(x.dim() as i64 - 2 * x.hamming(y)? as i64);
    }
    Ok((0..a.dim()).map(|i| a.value(i) * b.value(i)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hv_from_str(prefix: &str, dim: usize) -> BipolarHV {
        let mut hv = BipolarHV::zeros(dim).unwrap();
        for (i, c) in prefix.chars().enumerate() {
            hv.set(i, c == '1');
        }
        hv
    }

    #[test]
    fn alignment_errors() {
        let mut rng = Rng::new(1);
        assert!(matches!(
            BipolarHV::random(100, &mut rng),
            Err(Error::Alignment { dim: 100 })
        ));
        assert!(BipolarHV::random(0, &mut rng).is_err());
        assert!(BipolarHV::random(2176, &mut rng).is_err());
        assert!(BipolarHV::random(2048, &mut rng).is_ok());
    }

    #[test]
    fn random_hv_golden_seed_7() {
        // First 128-bit word drawn from ChaCha8 seeded with 7, frozen once.
        let hv = BipolarHV::random(128, &mut Rng::new(7)).unwrap();
        assert_eq!(hv.bank(0), GOLDEN_SEED7);
        let again = BipolarHV::random(128, &mut Rng::new(7)).unwrap();
        assert_eq!(hv, again);
    }

    const GOLDEN_SEED7: u128 = 0x2865533423d743bb2b0159d32e9b293a;

    #[test]
    fn random_pairs_concentrate() {
        let mut r1 = Rng::new(11);
        let mut r2 = Rng::new(12);
        let a = BipolarHV::random(2048, &mut r1).unwrap();
        let b = BipolarHV::random(2048, &mut r2).unwrap();
        let h = a.hamming(&b).unwrap();
        assert!((1024 - 150..=1024 + 150).contains(&h), "{h}");
    }

    #[test]
    fn bind_truth_table() {
        let a = hv_from_str("1010", 128);
        let b = hv_from_str("0110", 128);
        let c = a.bind(&b).unwrap();
        assert_eq!(
            (0..4).map(|i| c.get(i)).collect::<Vec<_>>(),
            vec![true, true, false, false]
        );
    }

    #[test]
    fn bind_self_and_zero() {
        let mut rng = Rng::new(3);
        let x = BipolarHV::random(512, &mut rng).unwrap();
        assert_eq!(x.bind(&x).unwrap(), BipolarHV::zeros(512).unwrap());
        assert_eq!(x.bind(&BipolarHV::zeros(512).unwrap()).unwrap(), x);
        assert!(x.bind(&BipolarHV::zeros(256).unwrap()).is_err());
    }

    #[test]
    fn bundle_add_increments_where_one() {
        let acc = AccumulatorHV::zeros(128).unwrap();
        let acc = acc.bundle_add(&hv_from_str("101", 128)).unwrap();
        assert_eq!(&acc.counts()[..3], &[1, 0, 1]);
        assert_eq!(acc.n_bundled(), 1);

        let mut counts = vec![0i16; 128];
        counts[0] = 5;
        counts[1] = 2;
        let acc = AccumulatorHV::from_counts(counts, 5).unwrap();
        let added = acc.bundle_add(&hv_from_str("01", 128)).unwrap();
        assert_eq!(&added.counts()[..2], &[5, 3]);
        let back = added.bundle_sub(&hv_from_str("01", 128)).unwrap();
        assert_eq!(back, acc);
    }

    #[test]
    fn saturation_is_an_error() {
        let mut counts = vec![0i16; 128];
        counts[4] = i16::MAX;
        let acc = AccumulatorHV::from_counts(counts, 1).unwrap();
        let mut hv = BipolarHV::zeros(128).unwrap();
        hv.set(4, true);
        assert!(matches!(
            acc.bundle_add(&hv),
            Err(Error::Saturation { index: 4 })
        ));
        // Unaffected where the bit is 0.
        assert!(acc.bundle_add(&BipolarHV::zeros(128).unwrap()).is_ok());

        let mut counts = vec![0i16; 128];
        counts[9] = i16::MIN;
        let acc = AccumulatorHV::from_counts(counts, 0).unwrap();
        let mut hv = BipolarHV::zeros(128).unwrap();
        hv.set(9, true);
        assert!(matches!(
            acc.bundle_sub(&hv),
            Err(Error::Saturation { index: 9 })
        ));
    }

    #[test]
    fn binarize_majority_and_errors() {
        let mut counts = vec![0i16; 128];
        counts[0] = 3;
        counts[2] = 2;
        let acc = AccumulatorHV::from_counts(counts, 3).unwrap();
        let hv = acc.binarize().unwrap();
        assert_eq!((hv.get(0), hv.get(1), hv.get(2)), (true, false, true));

        assert!(matches!(
            AccumulatorHV::zeros(128).unwrap().binarize(),
            Err(Error::EmptyBundle)
        ));

        let x = BipolarHV::random(256, &mut Rng::new(5)).unwrap();
        let single = AccumulatorHV::zeros(256).unwrap().bundle_add(&x).unwrap();
        assert_eq!(single.binarize().unwrap(), x);
    }

    #[test]
    fn binarize_tie_break_is_frozen() {
        // n = 2 with one vote everywhere: every index is a tie.
        let acc = AccumulatorHV::from_counts(vec![1; 128], 2).unwrap();
        let hv = acc.binarize().unwrap();
        let first16: Vec<u8> = (0..16).map(|i| hv.get(i) as u8).collect();
        assert_eq!(first16, GOLDEN_TIES);
        assert_eq!(acc.binarize().unwrap(), hv);
    }

    // splitmix64(TIE_BREAK_SEED ^ i) & 1, evaluated independently.
    const GOLDEN_TIES: [u8; 16] = [0, 1, 1, 1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 0];

    #[test]
    fn permute_shift_examples() {
        let x = BipolarHV::random(256, &mut Rng::new(2)).unwrap();
        assert_eq!(x.permute_shift(0).unwrap(), x);
        assert!(x.permute_shift(256).is_err());
        let y = x.permute_shift(37).unwrap();
        for i in 0..256 {
            assert_eq!(y.get(i), x.get((i + 37) % 256));
        }
    }

    #[test]
    fn permute_drop_examples() {
        let mut rng = Rng::new(4);
        let x = BipolarHV::random(2048, &mut rng).unwrap();
        assert_eq!(x.permute_drop(0, &mut rng).unwrap(), x);
        assert!(matches!(
            x.permute_drop(4, &mut rng),
            Err(Error::DropWidth(4))
        ));
        let d = x.permute_drop(8, &mut rng).unwrap();
        for i in 0..2040 {
            assert_eq!(d.get(i), x.get(i + 8));
        }
        assert!(d.hamming(&x.permute_shift(8).unwrap()).unwrap() <= 8);
    }

    #[test]
    fn permute_drop_tail_mismatch_averages_half() {
        let mut rng = Rng::new(8);
        let trials = 400;
        let mut total = 0;
        for _ in 0..trials {
            let x = BipolarHV::random(2048, &mut rng).unwrap();
            let d = x.permute_drop(8, &mut rng).unwrap();
            total += d.hamming(&x.permute_shift(8).unwrap()).unwrap();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 4.0).abs() < 0.4, "{mean}");
    }

    #[test]
    fn hamming_and_dot_examples() {
        let x = BipolarHV::random(1024, &mut Rng::new(6)).unwrap();
        assert_eq!(x.hamming(&x).unwrap(), 0);
        assert_eq!(x.hamming(&x.complement()).unwrap(), 1024);
        assert_eq!(
            hv_from_str("1010", 128)
                .hamming(&hv_from_str("0110", 128))
                .unwrap(),
            2
        );
        assert_eq!(dot_bipolar(&x, &x).unwrap(), 1024);

        let y = BipolarHV::random(1024, &mut Rng::new(60)).unwrap();
        let d = dot_bipolar(&x, &y).unwrap();
        assert!((d.abs() as f64) < 5.0 * 32.0);
    }

    #[test]
    fn dot_accumulator_matches_elementwise_sum() {
        let mut rng = Rng::new(10);
        let hvs: Vec<_> = (0..5)
            .map(|_| BipolarHV::random(128, &mut rng).unwrap())
            .collect();
        let mut acc = AccumulatorHV::zeros(128).unwrap();
        for h in &hvs {
            acc.add_hv(h).unwrap();
        }
        let q = BipolarHV::random(128, &mut rng).unwrap();
        let expected: i64 = (0..128)
            .map(|i| hvs.iter().map(|h| h.value(i)).sum::<i64>() * q.value(i))
            .sum();
        assert_eq!(dot_bipolar(&acc, &q).unwrap(), expected);
        // Single-vector accumulator behaves like the vector itself.
        let one = AccumulatorHV::zeros(128).unwrap().bundle_add(&q).unwrap();
        assert_eq!(
            dot_bipolar(&one, &hvs[0]).unwrap(),
            dot_bipolar(&q, &hvs[0]).unwrap()
        );
    }
}
