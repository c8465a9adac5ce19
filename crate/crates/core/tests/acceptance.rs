//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use hydra_core::cam::{
    calibrate_profile, linearity, transfer_curve, AnalogParams, PlacementRule, VoltageProfile,
    CALIBRATION_SEED,
};
use hydra_core::config::{BackendKind, DataSource, ExperimentConfig, ProfileKind};
use hydra_core::cost::{ratios_vs_cmos, CostLedger, CostTable, OpKind};
use hydra_core::encoder::{PermuteMode, Scheme};
use hydra_core::experiment::{
    classify_with, load_dataset, prepare_backend, run_classify, run_cluster, run_dim_sweep,
    PreparedBackend,
};
use hydra_core::learner::{HvMode, SimilarityBackend};
use hydra_core::lta::{argmin_serial, SensingSpec};
use hydra_core::Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const UA: f64 = 1e-6;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * b.abs()
}

fn records(seed: u64, samples: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed,
        ..Default::default()
    };
    cfg.records.samples = samples;
    cfg.resolved()
}

fn language(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed,
        ..Default::default()
    };
    cfg.data.source = DataSource::Language;
    cfg.encoding.scheme = Scheme::Ngram;
    cfg.resolved()
}

/// Mean held-out accuracy in percent over the fixed seeds.
fn mean_accuracy(make: impl Fn(u64) -> ExperimentConfig) -> Result<f64, String> {
    let mut sum = 0.0;
    for &s in &SEEDS {
        let cfg = make(s);
        let ds = load_dataset(&cfg).map_err(|e| e.to_string())?;
        sum += run_classify(&cfg, &ds).map_err(|e| e.to_string())?.accuracy;
    }
    Ok(100.0 * sum / SEEDS.len() as f64)
}

fn cost_ratios() -> Check {
    let r = ratios_vs_cmos(&CostTable::default());
    let net = [
        (OpKind::Addition, 21.5),
        (OpKind::Permutation, 552.74),
        (OpKind::Multiplication, 1.45),
        (OpKind::Search, 282.57),
    ];
    let direct = [
        (OpKind::Addition, 1.51),
        (OpKind::Permutation, 6.19),
        (OpKind::Search, 2.02),
    ];
    let line = |op| r.iter().find(|l| l.op == op).expect("every op has a ratio");
    let mut ok = true;
    let mut parts = Vec::new();
    for (op, want) in net {
        let got = line(op).net_energy_ratio;
        ok &= rel_close(got, want, 0.005);
        parts.push(format!("{} net {got:.2}x", op.name()));
    }
    for (op, want) in direct {
        let got = line(op).energy_ratio;
        ok &= rel_close(got, want, 0.01);
        parts.push(format!("{} direct {got:.2}x", op.name()));
    }
    verdict(ok, parts.join(", "))
}

fn binary_multibit_gap() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (task, make) in [
        (
            "records",
            &(|s| records(s, 600)) as &dyn Fn(u64) -> ExperimentConfig,
        ),
        ("language", &language),
    ] {
        let bin = mean_accuracy(make)?;
        let mb = mean_accuracy(|s| ExperimentConfig {
            mode: HvMode::Multibit,
            ..make(s)
        })?;
        ok &= mb - bin <= 5.0;
        parts.push(format!(
            "{task}: binary {bin:.2}% multibit {mb:.2}% gap {:.2}",
            mb - bin
        ));
    }
    verdict(ok, parts.join("; "))
}

fn drop_permutation() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for w in [8, 16] {
        let with = |mode| {
            move |s| {
                let mut c = language(s);
                c.encoding.permute_mode = mode;
                c.encoding.drop_width = w;
                c
            }
        };
        let shift = mean_accuracy(with(PermuteMode::Shift))?;
        let drop = mean_accuracy(with(PermuteMode::Drop))?;
        ok &= (drop - shift).abs() <= 2.0;
        parts.push(format!("width {w}: shift {shift:.2}% drop {drop:.2}%"));
    }
    verdict(ok, parts.join("; "))
}

fn analog_accuracy(
    make: impl Fn(u64) -> ExperimentConfig,
    prepared: &PreparedBackend,
) -> Result<f64, String> {
    let mut sum = 0.0;
    for &s in &SEEDS {
        let cfg = make(s);
        let mut p = prepared.clone();
        if let SimilarityBackend::AnalogCam(search) = &mut p.backend {
            search.seed = cfg.seeds().lta;
        }
        let ds = load_dataset(&cfg).map_err(|e| e.to_string())?;
        sum += classify_with(&cfg, &ds, &p)
            .map_err(|e| e.to_string())?
            .accuracy;
    }
    Ok(100.0 * sum / SEEDS.len() as f64)
}

fn voltage_scaling() -> Check {
    let make = |s| records(s, 1000);
    let prepare = |profile| {
        prepare_backend(&ExperimentConfig {
            backend: BackendKind::Analog,
            profile,
            ..make(1)
        })
        .map_err(|e| e.to_string())
    };
    let ideal = mean_accuracy(make)?;
    let uniform = analog_accuracy(make, &prepare(ProfileKind::Uniform)?)?;
    let calibrated = analog_accuracy(make, &prepare(ProfileKind::Calibrated)?)?;
    verdict(
        (ideal - calibrated).abs() <= 1.0 && uniform < calibrated,
        format!("ideal {ideal:.2}% uniform {uniform:.2}% calibrated {calibrated:.2}%"),
    )
}

fn linearity_gain() -> Check {
    let p = AnalogParams::default();
    let rule = PlacementRule::Random(CALIBRATION_SEED);
    let cal = calibrate_profile(&p, rule).map_err(|e| e.to_string())?;
    let dev = |prof: &VoltageProfile| -> Result<f64, String> {
        let c = transfer_curve(prof, &p, rule).map_err(|e| e.to_string())?;
        Ok(linearity(&c).max_deviation)
    };
    let uniform = dev(&VoltageProfile::default())?;
    let calibrated = dev(&cal.profile)?;
    let gain = uniform / calibrated;
    verdict(
        gain >= 3.0,
        format!(
            "profile {:?} V, max deviation {uniform:.3e} A -> {calibrated:.3e} A ({gain:.2}x)",
            cal.profile.levels
        ),
    )
}

fn separated_currents(n: usize, spacing: f64, rng: &mut Rng) -> Vec<f64> {
    let mut level = 0.5 * UA + rng.unit() * UA;
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(level);
        level += spacing + rng.unit() * UA;
    }
    rng.shuffle(&mut v);
    v
}

fn lta_equivalence() -> Check {
    let spec = SensingSpec::default();
    let mut rng = Rng::new(0x17a);
    let mut exact = 0;
    for _ in 0..1000 {
        let n = 1 + rng.below(64);
        let c = separated_currents(n, 0.2 * UA, &mut rng);
        let want = (0..n).min_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
        let d = argmin_serial(&c, &spec, &mut rng).map_err(|e| e.to_string())?;
        exact += (d.winner == want && d.ambiguous_flags == 0) as usize;
    }

    // Plant one pair closer than the resolution; every batch whose minimum
    // has such a neighbour must raise the flag, and no other batch may.
    let (mut affected, mut flagged, mut spurious) = (0, 0, 0);
    for _ in 0..1000 {
        let n = 2 + rng.below(63);
        let mut c = separated_currents(n, 0.4 * UA, &mut rng);
        let a = if rng.below(2) == 0 {
            (0..n).min_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap()
        } else {
            rng.below(n)
        };
        let b = (a + 1 + rng.below(n - 1)) % n;
        c[b] = c[a] + (0.01 + 0.18 * rng.unit()) * UA;
        let d = argmin_serial(&c, &spec, &mut rng).map_err(|e| e.to_string())?;
        for t in &d.trace {
            let min = t.rows.iter().map(|&r| c[r]).fold(f64::INFINITY, f64::min);
            let near = t
                .rows
                .iter()
                .filter(|&&r| c[r] - min < spec.resolution)
                .count();
            if near > 1 {
                affected += 1;
                flagged += t.ambiguous as usize;
            } else {
                spurious += t.ambiguous as usize;
            }
        }
    }
    verdict(
        exact == 1000 && affected > 0 && flagged == affected && spurious == 0,
        format!("separated {exact}/1000 exact; planted pairs flagged {flagged}/{affected} batches, {spurious} spurious"),
    )
}

fn clustering() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2, 3] {
        let (mut worst_purity, mut worst_epochs) = (1.0f64, 0);
        for &s in &SEEDS {
            let mut cfg = ExperimentConfig {
                seed: s,
                ..Default::default()
            };
            cfg.data.source = DataSource::Blobs;
            cfg.cluster.k = k;
            cfg.cluster.max_epochs = 20;
            cfg.blobs.blobs = k;
            cfg.blobs.max_flips = cfg.dim / 16;
            let cfg = cfg.resolved();
            let ds = load_dataset(&cfg).map_err(|e| e.to_string())?;
            let r = run_cluster(&cfg, &ds).map_err(|e| e.to_string())?;
            let st = &r.state;
            let purity = r.purity.ok_or("blob labels missing")?;
            let monotone = (1..st.epoch).all(|e| {
                st.objective[e] <= st.objective_before_assign[e - 1]
                    && st.objective[e] <= st.objective[e - 1]
            });
            ok &= purity >= 0.95 && st.converged && st.epoch <= 20 && monotone;
            worst_purity = worst_purity.min(purity);
            worst_epochs = worst_epochs.max(st.epoch);
            if !monotone {
                parts.push(format!(
                    "k={k} seed {s}: objective increased {:?}",
                    st.objective
                ));
            }
        }
        parts.push(format!(
            "k={k}: min purity {worst_purity:.3}, max epochs {worst_epochs}"
        ));
    }
    verdict(ok, parts.join("; "))
}

fn dimension_scaling() -> Check {
    let table = CostTable::default();
    let mut exact = true;
    let counts = [
        (OpKind::Addition, 1900),
        (OpKind::Permutation, 23),
        (OpKind::Multiplication, 1200),
        (OpKind::Search, 1),
    ];
    let energy = |dim| -> Result<f64, String> {
        let mut l = CostLedger::new();
        for (op, n) in counts {
            l.tally(op, n, dim).map_err(|e| e.to_string())?;
        }
        l.add_queries(1);
        Ok(l.report(&table).energy_per_query_pj())
    };
    let full = energy(2048)?;
    for dim in (128..=2048).step_by(128) {
        exact &= rel_close(energy(dim)?, full * dim as f64 / 2048.0, 1e-12);
    }

    let (mut small, mut large) = (0.0, 0.0);
    for &s in &SEEDS {
        let cfg = records(s, 600);
        let ds = load_dataset(&cfg).map_err(|e| e.to_string())?;
        let sweep = run_dim_sweep(&cfg, &ds, &[512, 2048]).map_err(|e| e.to_string())?;
        let (p, q) = (&sweep.points[0], &sweep.points[1]);
        if p.ops == q.ops {
            exact &= rel_close(p.energy_per_query_pj, q.energy_per_query_pj / 4.0, 1e-12);
        }
        small += p.accuracy;
        large += q.accuracy;
    }
    let n = SEEDS.len() as f64;
    let (small, large) = (100.0 * small / n, 100.0 * large / n);
    verdict(
        exact && large - small <= 10.0,
        format!("energy scaling exact: {exact}; accuracy dim 512 {small:.2}% vs 2048 {large:.2}%"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("cost ratios against CMOS", cost_ratios),
        ("binary vs multibit gap <= 5 points", binary_multibit_gap),
        (
            "drop permutation within 2 points of shift",
            drop_permutation,
        ),
        ("voltage scaling recovers ideal accuracy", voltage_scaling),
        ("calibrated linearity gain >= 3x", linearity_gain),
        ("LTA matches brute-force argmin", lta_equivalence),
        ("clustering purity and convergence", clustering),
        ("dimension scaling", dimension_scaling),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name} [{:.1}s]: {detail}", t.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
