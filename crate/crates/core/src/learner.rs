//! HDC classification and clustering over an ideal or analog similarity backend.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cam::{AnalogSearch, BankLayout, BANK_ROWS};
use crate::error::{Error, Result};
use crate::hv::{dot_bipolar, AccumulatorHV, BipolarHV};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HvMode {
    #[default]
    Binary,
    Multibit,
}

/// An encoded sample: the raw bundle and its binarization.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub acc: AccumulatorHV,
    pub hv: BipolarHV,
}

impl Encoded {
    pub fn new(acc: AccumulatorHV) -> Result<Self> {
        let hv = acc.binarize()?;
        Ok(Self { acc, hv })
    }

    pub fn from_hv(hv: BipolarHV) -> Result<Self> {
        let mut acc = AccumulatorHV::zeros(hv.dim())?;
        acc.add_hv(&hv)?;
        Ok(Self { acc, hv })
    }

    pub fn dim(&self) -> usize {
        self.hv.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMemory {
    dim: usize,
    mode: HvMode,
    accumulators: Vec<AccumulatorHV>,
    deployed: Option<Vec<BipolarHV>>,
}

impl ClassMemory {
    pub fn new(num_classes: usize, dim: usize, mode: HvMode) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::EmptyClassMemory);
        }
        if num_classes > BANK_ROWS {
            return Err(Error::Capacity { count: num_classes });
        }
        Ok(Self {
            dim,
            mode,
            accumulators: (0..num_classes)
                .map(|_| AccumulatorHV::zeros(dim))
                .collect::<Result<_>>()?,
            deployed: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> HvMode {
        self.mode
    }

    pub fn num_classes(&self) -> usize {
        self.accumulators.len()
    }

    pub fn accumulator(&self, class: usize) -> &AccumulatorHV {
        &self.accumulators[class]
    }

    pub fn accumulators(&self) -> &[AccumulatorHV] {
        &self.accumulators
    }

    pub fn is_deployed(&self) -> bool {
        self.deployed.is_some()
    }

    /// Binarized class HVs; present only after [`ClassMemory::deploy`].
    pub fn deployed(&self) -> Result<&[BipolarHV]> {
        self.deployed.as_deref().ok_or(Error::EmptyClassMemory)
    }

    pub fn deployed_hv(&self, class: usize) -> Result<&BipolarHV> {
        self.deployed
            .as_ref()
            .and_then(|d| d.get(class))
            .ok_or(Error::EmptyClassMemory)
    }

    pub fn deploy(&mut self) -> Result<()> {
        self.deployed = Some(
            self.accumulators
                .iter()
                .map(AccumulatorHV::binarize)
                .collect::<Result<_>>()?,
        );
        Ok(())
    }

    fn check(&self, sample: &Encoded) -> Result<()> {
        if sample.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: sample.dim(),
            });
        }
        Ok(())
    }

    fn class_index(&self, class: usize) -> Result<usize> {
        if class >= self.num_classes() {
            return Err(Error::Capacity { count: class + 1 });
        }
        Ok(class)
    }

    pub fn add_sample(&mut self, class: usize, sample: &Encoded) -> Result<()> {
        self.check(sample)?;
        let idx = self.class_index(class)?;
        let acc = &mut self.accumulators[idx];
        match self.mode {
            HvMode::Binary => acc.add_hv(&sample.hv),
            HvMode::Multibit => acc.add_acc(&sample.acc),
        }
    }

    pub fn sub_sample(&mut self, class: usize, sample: &Encoded) -> Result<()> {
        self.check(sample)?;
        let idx = self.class_index(class)?;
        let acc = &mut self.accumulators[idx];
        match self.mode {
            HvMode::Binary => acc.sub_hv(&sample.hv),
            HvMode::Multibit => acc.sub_acc(&sample.acc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SimilarityBackend {
    #[default]
    IdealHamming,
    IdealDot,
    AnalogCam(AnalogSearch),
}

impl SimilarityBackend {
    pub fn name(&self) -> &'static str {
        match self {
            SimilarityBackend::IdealHamming => "ideal_hamming",
            SimilarityBackend::IdealDot => "ideal_dot",
            SimilarityBackend::AnalogCam(_) => "analog_cam",
        }
    }
}

fn argmin<T: PartialOrd + Copy>(values: impl Iterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Nearest-class search over a deployed class memory.
#[derive(Debug, Clone)]
pub struct Predictor<'a> {
    cm: &'a ClassMemory,
    backend: &'a SimilarityBackend,
    classes: &'a [BipolarHV],
    layout: Option<BankLayout>,
}

impl<'a> Predictor<'a> {
    pub fn new(cm: &'a ClassMemory, backend: &'a SimilarityBackend) -> Result<Self> {
        let mut layout = None;
        Self::with_layout(cm, backend, &mut layout)
    }

    /// Like [`Predictor::new`], reusing an analog bank layout loaded by an
    /// earlier call while the deployed HVs stay the same.
    fn with_layout(
        cm: &'a ClassMemory,
        backend: &'a SimilarityBackend,
        cache: &mut Option<BankLayout>,
    ) -> Result<Self> {
        let classes = cm.deployed()?;
        let layout = match backend {
            SimilarityBackend::AnalogCam(search) => {
                if cache.is_none() {
                    search.validate()?;
                    *cache = Some(BankLayout::load(classes)?);
                }
                cache.clone()
            }
            _ => None,
        };
        Ok(Self {
            cm,
            backend,
            classes,
            layout,
        })
    }

    pub fn predict(&self, query: &Encoded) -> Result<usize> {
        self.cm.check(query)?;
        match self.backend {
            SimilarityBackend::IdealHamming => {
                let d = self
                    .classes
                    .iter()
                    .map(|c| c.hamming(&query.hv))
                    .collect::<Result<Vec<_>>>()?;
                argmin(d.into_iter()).ok_or(Error::EmptyClassMemory)
            }
            SimilarityBackend::IdealDot => {
                let d = self
                    .cm
                    .accumulators
                    .iter()
                    .map(|c| dot_bipolar(c, &query.acc).map(|x| -x))
                    .collect::<Result<Vec<_>>>()?;
                argmin(d.into_iter()).ok_or(Error::EmptyClassMemory)
            }
            SimilarityBackend::AnalogCam(search) => {
                let layout = self.layout.as_ref().expect("analog layout loaded in new");
                let (row, _) = search.nearest_row(layout, &query.hv)?;
                layout
                    .class_of(row)
                    .ok_or_else(|| Error::Backend(format!("row {row} holds no class")))
            }
        }
    }

    pub fn predict_all(&self, queries: &[Encoded]) -> Result<Vec<usize>> {
        queries.par_iter().map(|q| self.predict(q)).collect()
    }
}

pub fn predict(query: &Encoded, cm: &ClassMemory, backend: &SimilarityBackend) -> Result<usize> {
    Predictor::new(cm, backend)?.predict(query)
}

/// Bundles each labeled sample into its class and deploys binarized class HVs.
pub fn train(
    samples: &[(Encoded, usize)],
    num_classes: usize,
    mode: HvMode,
) -> Result<ClassMemory> {
    let dim = samples.first().ok_or(Error::EmptyDataset)?.0.dim();
    if let Some(max) = samples.iter().map(|s| s.1).max() {
        if max >= BANK_ROWS {
            return Err(Error::Capacity { count: max + 1 });
        }
    }
    let mut cm = ClassMemory::new(num_classes, dim, mode)?;
    for (sample, label) in samples {
        cm.add_sample(*label, sample)?;
    }
    cm.deploy()?;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrainOutcome {
    pub cm: ClassMemory,
    /// Training mispredictions seen in each epoch that ran.
    pub errors: Vec<usize>,
}

/// Perceptron-style refinement, one sample at a time. Accumulators change
/// immediately, so dot-product predictions see every earlier update; the
/// deployed binary HVs are re-binarized only at epoch end. Stops early once
/// an epoch sees no errors.
pub fn retrain(
    cm: &ClassMemory,
    samples: &[(Encoded, usize)],
    epochs: usize,
    backend: &SimilarityBackend,
) -> Result<RetrainOutcome> {
    let mut cur = cm.clone();
    let mut errors = Vec::new();
    for _ in 0..epochs {
        let mut layout = None;
        let mut wrong = 0;
        for (sample, label) in samples {
            let p = Predictor::with_layout(&cur, backend, &mut layout)?.predict(sample)?;
            if p != *label {
                wrong += 1;
                cur.sub_sample(p, sample)?;
                cur.add_sample(*label, sample)?;
            }
        }
        errors.push(wrong);
        if wrong == 0 {
            break;
        }
        cur.deploy()?;
    }
    Ok(RetrainOutcome { cm: cur, errors })
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / predicted.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub centers: Vec<BipolarHV>,
    pub assignments: Vec<usize>,
    pub epoch: usize,
    pub threshold: usize,
    pub converged: bool,
    /// Sum of point-to-center Hamming distances before each assign step
    /// (previous assignments, current centers). Empty for the first epoch.
    pub objective_before_assign: Vec<u64>,
    /// The same sum right after each assign step.
    pub objective: Vec<u64>,
    /// Largest center movement in each epoch.
    pub center_shift: Vec<usize>,
}

fn objective(points: &[BipolarHV], centers: &[BipolarHV], assign: &[usize]) -> Result<u64> {
    points
        .iter()
        .zip(assign)
        .map(|(p, &a)| p.hamming(&centers[a]).map(|d| d as u64))
        .sum()
}

fn nearest_centers(
    points: &[BipolarHV],
    centers: &[BipolarHV],
    backend: &SimilarityBackend,
) -> Result<Vec<usize>> {
    match backend {
        SimilarityBackend::AnalogCam(search) => {
            let layout = BankLayout::load(centers)?;
            points
                .par_iter()
                .map(|p| search.nearest_row(&layout, p).map(|(r, _)| r))
                .collect()
        }
        _ => points
            .par_iter()
            .map(|p| {
                let d = centers
                    .iter()
                    .map(|c| c.hamming(p))
                    .collect::<Result<Vec<_>>>()?;
                Ok(argmin(d.into_iter()).expect("at least two centers"))
            })
            .collect(),
    }
}

/// HDC k-means: random initial centers, nearest-center assignment, majority
/// re-centering, stopping once no center moves by `threshold` bits or more.
///
/// A cluster left empty by an assignment takes over the point farthest from
/// its own center among clusters with at least two members.
pub fn cluster(
    points: &[BipolarHV],
    k: usize,
    threshold: usize,
    max_epochs: usize,
    rng: &mut Rng,
    backend: &SimilarityBackend,
) -> Result<ClusterState> {
    if k < 2 {
        return Err(Error::Param(format!("clustering needs K >= 2, got {k}")));
    }
    if k > BANK_ROWS {
        return Err(Error::Capacity { count: k });
    }
    if points.len() < k {
        return Err(Error::Param(format!(
            "clustering needs at least K = {k} points, got {}",
            points.len()
        )));
    }
    if max_epochs == 0 {
        return Err(Error::Param("max_epochs must be at least 1".into()));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimMismatch {
            left: dim,
            right: p.dim(),
        });
    }

    let mut state = ClusterState {
        centers: (0..k)
            .map(|_| BipolarHV::random(dim, rng))
            .collect::<Result<_>>()?,
        assignments: Vec::new(),
        epoch: 0,
        threshold,
        converged: false,
        objective_before_assign: Vec::new(),
        objective: Vec::new(),
        center_shift: Vec::new(),
    };

    while state.epoch < max_epochs {
        state.epoch += 1;
        if !state.assignments.is_empty() {
            state.objective_before_assign.push(objective(
                points,
                &state.centers,
                &state.assignments,
            )?);
        }
        let mut assign = nearest_centers(points, &state.centers, backend)?;
        reseed_empty(points, &mut state.centers, &mut assign)?;
        state
            .objective
            .push(objective(points, &state.centers, &assign)?);

        let mut sums = (0..k)
            .map(|_| AccumulatorHV::zeros(dim))
            .collect::<Result<Vec<_>>>()?;
        for (p, &a) in points.iter().zip(&assign) {
            sums[a].add_hv(p)?;
        }
        let fresh = sums
            .iter()
            .map(AccumulatorHV::binarize)
            .collect::<Result<Vec<_>>>()?;
        let shift = state
            .centers
            .iter()
            .zip(&fresh)
            .map(|(a, b)| a.hamming(b))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(0);
        state.center_shift.push(shift);
        state.centers = fresh;
        state.assignments = assign;
        if shift < threshold {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

fn reseed_empty(
    points: &[BipolarHV],
    centers: &mut [BipolarHV],
    assign: &mut [usize],
) -> Result<()> {
    loop {
        let mut sizes = vec![0usize; centers.len()];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return Ok(());
        };
        let mut far: Option<(usize, usize)> = None;
        for (i, p) in points.iter().enumerate() {
            if sizes[assign[i]] < 2 {
                continue;
            }
            let d = p.hamming(&centers[assign[i]])?;
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("points >= K leaves a cluster with two members");
        centers[empty] = points[i].clone();
        assign[i] = empty;
    }
}

/// Fraction of points whose cluster's majority label matches their own.
pub fn purity(assignments: &[usize], labels: &[usize]) -> f64 {
    if assignments.is_empty() {
        return 0.0;
    }
    let clusters = assignments.iter().max().map_or(0, |m| m + 1);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; classes]; clusters];
    for (&a, &l) in assignments.iter().zip(labels) {
        table[a][l] += 1;
    }
    let hits: usize = table
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    hits as f64 / assignments.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_hv(dim: usize, rng: &mut Rng) -> BipolarHV {
        BipolarHV::random(dim, rng).unwrap()
    }

    fn flip(hv: &BipolarHV, n: usize, rng: &mut Rng) -> BipolarHV {
        let mut out = hv.clone();
        let mut idx: Vec<usize> = (0..hv.dim()).collect();
        rng.shuffle(&mut idx);
        for &i in &idx[..n] {
            out.set(i, !out.get(i));
        }
        out
    }

    #[test]
    fn one_sample_per_class() {
        let mut rng = Rng::new(1);
        let samples: Vec<_> = (0..3)
            .map(|c| (Encoded::from_hv(rand_hv(512, &mut rng)).unwrap(), c))
            .collect();
        let cm = train(&samples, 3, HvMode::Binary).unwrap();
        for (s, c) in &samples {
            assert_eq!(cm.deployed_hv(*c).unwrap(), &s.hv);
        }
    }

    #[test]
    fn disjoint_classes_are_far_apart() {
        let mut rng = Rng::new(2);
        let samples: Vec<_> = (0..10)
            .map(|i| (Encoded::from_hv(rand_hv(2048, &mut rng)).unwrap(), i % 2))
            .collect();
        let cm = train(&samples, 2, HvMode::Binary).unwrap();
        let d = cm
            .deployed_hv(0)
            .unwrap()
            .hamming(cm.deployed_hv(1).unwrap())
            .unwrap();
        assert!((900..=1150).contains(&d), "{d}");
    }

    #[test]
    fn accumulators_match_brute_force_sums() {
        let mut rng = Rng::new(3);
        let dim = 256;
        let samples: Vec<_> = (0..12)
            .map(|i| (Encoded::from_hv(rand_hv(dim, &mut rng)).unwrap(), i % 3))
            .collect();
        let cm = train(&samples, 3, HvMode::Binary).unwrap();
        for c in 0..3 {
            for i in 0..dim {
                let expect: i64 = samples
                    .iter()
                    .filter(|s| s.1 == c)
                    .map(|s| s.0.hv.value(i))
                    .sum();
                assert_eq!(cm.accumulator(c).value(i), expect);
            }
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let hv = BipolarHV::zeros(128).unwrap();
        let s = vec![(Encoded::from_hv(hv).unwrap(), 128)];
        assert!(matches!(
            train(&s, 129, HvMode::Binary),
            Err(Error::Capacity { .. })
        ));
        assert!(ClassMemory::new(129, 128, HvMode::Binary).is_err());
    }

    #[test]
    fn predict_examples() {
        let mut rng = Rng::new(4);
        let samples: Vec<_> = (0..4)
            .map(|c| (Encoded::from_hv(rand_hv(1024, &mut rng)).unwrap(), c))
            .collect();
        let cm = train(&samples, 4, HvMode::Binary).unwrap();
        let backend = SimilarityBackend::IdealHamming;
        assert_eq!(predict(&samples[2].0, &cm, &backend).unwrap(), 2);
        let near = Encoded::from_hv(flip(&samples[1].0.hv, 1, &mut rng)).unwrap();
        assert_eq!(predict(&near, &cm, &backend).unwrap(), 1);
        assert_eq!(
            predict(&near, &cm, &SimilarityBackend::IdealDot).unwrap(),
            1
        );
    }

    #[test]
    fn undeployed_memory_is_rejected() {
        let cm = ClassMemory::new(2, 128, HvMode::Binary).unwrap();
        let q = Encoded::from_hv(BipolarHV::zeros(128).unwrap()).unwrap();
        assert!(matches!(
            predict(&q, &cm, &SimilarityBackend::IdealHamming),
            Err(Error::EmptyClassMemory)
        ));
    }

    #[test]
    fn retrain_without_errors_is_identity() {
        let mut rng = Rng::new(5);
        let samples: Vec<_> = (0..4)
            .map(|c| (Encoded::from_hv(rand_hv(512, &mut rng)).unwrap(), c))
            .collect();
        let cm = train(&samples, 4, HvMode::Binary).unwrap();
        let out = retrain(&cm, &samples, 5, &SimilarityBackend::IdealHamming).unwrap();
        assert_eq!(out.cm, cm);
        assert_eq!(out.errors, vec![0]);
        let out = retrain(&cm, &samples, 0, &SimilarityBackend::IdealHamming).unwrap();
        assert_eq!(out.cm, cm);
        assert!(out.errors.is_empty());
    }

    #[test]
    fn single_mispredicted_sample_moves_two_classes() {
        let mut rng = Rng::new(6);
        let a = rand_hv(512, &mut rng);
        let b = rand_hv(512, &mut rng);
        let c = rand_hv(512, &mut rng);
        // Class 0 is built from `a` three times; the planted sample is a copy
        // of `a` labelled 1, so it lands in class 0.
        let mut samples: Vec<_> = (0..3)
            .map(|_| (Encoded::from_hv(a.clone()).unwrap(), 0))
            .collect();
        samples.push((Encoded::from_hv(b.clone()).unwrap(), 1));
        samples.push((Encoded::from_hv(b.clone()).unwrap(), 1));
        samples.push((Encoded::from_hv(b.clone()).unwrap(), 1));
        samples.push((Encoded::from_hv(c).unwrap(), 2));
        let planted = (Encoded::from_hv(flip(&a, 20, &mut rng)).unwrap(), 1);
        let cm = train(&samples, 3, HvMode::Binary).unwrap();
        let backend = SimilarityBackend::IdealHamming;
        assert_eq!(predict(&planted.0, &cm, &backend).unwrap(), 0);

        let out = retrain(&cm, std::slice::from_ref(&planted), 1, &backend).unwrap();
        assert_eq!(out.errors, vec![1]);
        let changed: Vec<usize> = (0..3)
            .filter(|&k| out.cm.accumulator(k) != cm.accumulator(k))
            .collect();
        assert_eq!(changed, vec![0, 1]);
    }

    #[test]
    fn retraining_fixes_planted_error() {
        let mut rng = Rng::new(7);
        let dim = 1024;
        let a = rand_hv(dim, &mut rng);
        let b = rand_hv(dim, &mut rng);
        let mut samples: Vec<_> = (0..5)
            .map(|_| (Encoded::from_hv(flip(&a, 100, &mut rng)).unwrap(), 0))
            .collect();
        samples.extend((0..5).map(|_| (Encoded::from_hv(flip(&b, 100, &mut rng)).unwrap(), 1)));
        // Closer to `a` than to `b`, but labelled 1.
        let odd = (Encoded::from_hv(flip(&a, 300, &mut rng)).unwrap(), 1);
        samples.push(odd.clone());
        let backend = SimilarityBackend::IdealHamming;
        let cm = train(&samples, 2, HvMode::Binary).unwrap();
        assert_eq!(predict(&odd.0, &cm, &backend).unwrap(), 0);
        let out = retrain(&cm, &samples, 10, &backend).unwrap();
        assert_eq!(predict(&odd.0, &out.cm, &backend).unwrap(), 1);
        assert_eq!(*out.errors.last().unwrap(), 0);
    }

    #[test]
    fn multibit_mode_adds_raw_bundles() {
        let mut rng = Rng::new(8);
        let mut acc = AccumulatorHV::zeros(128).unwrap();
        for _ in 0..3 {
            acc.add_hv(&rand_hv(128, &mut rng)).unwrap();
        }
        let e = Encoded::new(acc.clone()).unwrap();
        let cm = train(&[(e.clone(), 0), (e, 1)], 2, HvMode::Multibit).unwrap();
        assert_eq!(cm.accumulator(0), &acc);
        let cm = train(
            &[(Encoded::new(acc.clone()).unwrap(), 0)],
            1,
            HvMode::Binary,
        )
        .unwrap();
        assert_eq!(cm.accumulator(0).n_bundled(), 1);
    }

    #[test]
    fn clustering_known_points() {
        let mut rng = Rng::new(9);
        let points: Vec<_> = (0..4).map(|_| rand_hv(1024, &mut rng)).collect();
        let st = cluster(
            &points,
            4,
            1,
            20,
            &mut rng,
            &SimilarityBackend::IdealHamming,
        )
        .unwrap();
        assert!(st.converged);
        assert!(st.epoch <= 2, "{}", st.epoch);
        let mut centers = st.centers.clone();
        let mut expect = points.clone();
        centers.sort_by_key(|c| c.words().to_vec());
        expect.sort_by_key(|c| c.words().to_vec());
        assert_eq!(centers, expect);
    }

    #[test]
    fn threshold_dim_converges_in_one_epoch() {
        let mut rng = Rng::new(10);
        let points: Vec<_> = (0..10).map(|_| rand_hv(256, &mut rng)).collect();
        let st = cluster(
            &points,
            3,
            256,
            20,
            &mut rng,
            &SimilarityBackend::IdealHamming,
        )
        .unwrap();
        assert_eq!(st.epoch, 1);
        assert!(st.converged);
    }

    #[test]
    fn two_blobs_recovered() {
        let mut rng = Rng::new(11);
        let dim = 2048;
        let centers = [rand_hv(dim, &mut rng), rand_hv(dim, &mut rng)];
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (l, c) in centers.iter().enumerate() {
            for _ in 0..20 {
                let n = rng.below(dim / 16 + 1);
                points.push(flip(c, n, &mut rng));
                labels.push(l);
            }
        }
        let st = cluster(
            &points,
            2,
            1,
            20,
            &mut rng,
            &SimilarityBackend::IdealHamming,
        )
        .unwrap();
        assert!(purity(&st.assignments, &labels) >= 0.95);
        assert!(st.objective.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cluster_preconditions() {
        let mut rng = Rng::new(12);
        let points: Vec<_> = (0..3).map(|_| rand_hv(128, &mut rng)).collect();
        let b = SimilarityBackend::IdealHamming;
        assert!(cluster(&points, 1, 1, 5, &mut rng, &b).is_err());
        assert!(cluster(&points, 4, 1, 5, &mut rng, &b).is_err());
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert_eq!(purity(&[0, 0, 0, 0], &[0, 0, 1, 1]), 0.5);
    }
}
