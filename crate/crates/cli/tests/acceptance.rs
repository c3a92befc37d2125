//! Acceptance suite. Runs every exit criterion, prints one line each and
//! exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use condsel::attribution::{all_block_conductances, objective, AttributionConfig, BlockKind, ToyNetwork};
use condsel::dcd::{verify_tail_bound, LemmaCheck};
use condsel::harness::sweep::sweep_n_src;
use condsel::harness::theory::{asymmetry_witness, random_instance};
use condsel::harness::{generate_synthetic_world, leave_one_out};
use condsel::metrics::evaluate;
use condsel::rankagg::{average_ranks, baseline_avgrank, ranking};
use condsel::taskrep::importance;
use condsel::{Method, ModelId, RankTable, RunConfig, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COMPLETENESS_TOL: f64 = 1e-3;
const COMPLETENESS_RATIO: f64 = 2.0;
const COMPLETENESS_BUDGET: Duration = Duration::from_secs(5);
const AFFINE_TOL: f64 = 1e-12;
const OPTIMALITY_TOL: f64 = 1e-12;
const DECOMPOSITION_TOL: f64 = 1e-12;
const NDCG_TOL: f64 = 1e-12;
const WITNESS_ETA: f64 = 10.0;
const WITNESS_FORWARD_MAX: f64 = 0.05;
const WITNESS_BACKWARD_MIN: f64 = 0.5;
const VANISHING_GAMMA: f64 = 1e-9;
const SIGNAL_MARGIN: f64 = 0.03;
const SIGNAL_BUDGET: Duration = Duration::from_secs(30);
const SATURATION_BAND: f64 = 0.03;

const TOY_WIDTHS: [usize; 5] = [4, 8, 8, 6, 4];
const WORLD_SEEDS: u64 = 10;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn uniform_inputs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Largest completeness gap over blocks.
fn completeness_gap(net: &ToyNetwork, x: &[f64], steps: usize) -> f64 {
    let baseline = vec![0.0; x.len()];
    let delta = objective(net.forward(x).unwrap().embedding()) - objective(net.forward(&baseline).unwrap().embedding());
    all_block_conductances(net, x, &AttributionConfig::with_steps(steps))
        .unwrap()
        .iter()
        .map(|b| (b.per_neuron.iter().sum::<f64>() - delta).abs())
        .fold(0.0, f64::max)
}

fn completeness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst, mut min_ratio, mut over_tol, mut slow_halving) = (0.0f64, f64::INFINITY, 0, 0);
    for seed in 0..20 {
        let net = ToyNetwork::seeded(seed, &TOY_WIDTHS, BlockKind::AffineTanh).unwrap();
        for x in uniform_inputs(&mut rng, 20, TOY_WIDTHS[0]) {
            let gaps = [64, 128, 256].map(|n| completeness_gap(&net, &x, n));
            worst = worst.max(gaps[2]);
            if gaps[2] > COMPLETENESS_TOL {
                over_tol += 1;
            }
            let ratio = (gaps[0] / gaps[1]).min(gaps[1] / gaps[2]);
            min_ratio = min_ratio.min(ratio);
            if ratio < COMPLETENESS_RATIO {
                slow_halving += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        over_tol == 0 && slow_halving == 0 && elapsed < COMPLETENESS_BUDGET,
        format!(
            "max gap at n=256 {worst:.3e} ({over_tol}/400 above {COMPLETENESS_TOL:e}); \
             min halving ratio {min_ratio:.3} ({slow_halving}/400 below {COMPLETENESS_RATIO}); {elapsed:.2?}"
        ),
    )
}

fn affine_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let net = ToyNetwork::seeded_with_bias(seed, &TOY_WIDTHS, BlockKind::Affine, 0.0).unwrap();
        for x in uniform_inputs(&mut rng, 5, TOY_WIDTHS[0]) {
            let one = all_block_conductances(&net, &x, &AttributionConfig::with_steps(1)).unwrap();
            let many = all_block_conductances(&net, &x, &AttributionConfig::with_steps(1000)).unwrap();
            for (a, b) in one.iter().zip(&many) {
                for (p, q) in a.per_neuron.iter().zip(&b.per_neuron) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
    }
    outcome(worst <= AFFINE_TOL, format!("max |n=1 - n=1000| {worst:.3e}"))
}

fn softmax_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut violations, mut worst) = (0usize, f64::NEG_INFINITY);
    for _ in 0..100 {
        let d = rng.random_range(2..=10);
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eta = rng.random_range(0.1..20.0);
        let alpha = importance(&u, eta).alpha;
        let best = oracles::alignment(&alpha, &u, eta);
        for _ in 0..10_000 {
            let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let z: f64 = e.iter().sum();
            let p: Vec<f64> = e.iter().map(|v| v / z).collect();
            let excess = oracles::alignment(&p, &u, eta) - best;
            worst = worst.max(excess);
            if excess > OPTIMALITY_TOL {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 1,000,000 points; largest excess {worst:.3e}"),
    )
}

fn tail_mass() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut violations, mut mismatches) = (0, 0, 0);
    while checked < 1000 {
        let inst = random_instance(&mut rng);
        let report = verify_tail_bound(&inst.u, inst.eta, inst.k, &inst.delta).unwrap();
        let (LemmaCheck::Holds { bound } | LemmaCheck::Violated { bound }) = report.lemma else {
            continue;
        };
        checked += 1;
        let t = oracles::tail_mass_oracle(&inst.u, inst.eta, inst.k);
        if (t - report.tail_mass).abs() > 1e-12 {
            mismatches += 1;
        }
        if t > bound * (1.0 + 1e-12) || report.lemma.is_violation() {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && mismatches == 0,
        format!("{checked} instances with positive gap; {violations} violations; {mismatches} tail-mass mismatches"),
    )
}

fn decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut violations, mut worst) = (0, 0.0f64);
    for _ in 0..1000 {
        let inst = random_instance(&mut rng);
        let r = verify_tail_bound(&inst.u, inst.eta, inst.k, &inst.delta).unwrap();
        let b = inst.delta.iter().copied().fold(0.0, f64::max);
        let err = (r.divergence - ((1.0 - r.tail_mass) * r.restricted + r.residual)).abs();
        worst = worst.max(err);
        let ok = err <= DECOMPOSITION_TOL
            && r.residual >= 0.0
            && r.residual <= b * r.tail_mass + DECOMPOSITION_TOL
            && (r.divergence - r.restricted).abs() <= 2.0 * b * r.tail_mass + DECOMPOSITION_TOL
            && r.residual_bounded
            && r.relaxation_bounded;
        if !ok {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("1000 instances; {violations} violations; max recomposition error {worst:.3e}"),
    )
}

fn asymmetry() -> Outcome {
    let w = asymmetry_witness(WITNESS_ETA, 1e-8).unwrap();
    outcome(
        w.forward < WITNESS_FORWARD_MAX && w.backward > WITNESS_BACKWARD_MIN,
        format!("forward {:.4}, backward {:.4} at eta={}", w.forward, w.backward, w.eta),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut ndcg_bad, mut tau_bad, mut small_bad, mut small) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..=n.min(5));
        let models: Vec<ModelId> = (0..n).map(|i| ModelId::new(format!("m{i}"))).collect();
        let acc: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let truth: BTreeMap<ModelId, f64> = models.iter().cloned().zip(average_ranks(&acc, true)).collect();
        let scores = models.iter().cloned().map(|m| (m, rng.random::<f64>())).collect();
        let pred = ranking(TaskId::new("t"), scores).unwrap();
        let r = evaluate(&pred, &truth, k).unwrap();
        if (r.ndcg - oracles::ndcg_oracle(&pred, &truth, k)).abs() > NDCG_TOL {
            ndcg_bad += 1;
        }
        if r.tau != oracles::tau_oracle(&pred, &truth, k) {
            tau_bad += 1;
        }
        if r.intersection_size < 2 {
            small += 1;
            if r.ndcg != 0.0 || r.tau != 0.0 {
                small_bad += 1;
            }
        }
    }
    outcome(
        ndcg_bad + tau_bad + small_bad == 0 && small > 0,
        format!("1000 instances; ndcg mismatches {ndcg_bad}, tau mismatches {tau_bad}; {small} with |I| < 2, {small_bad} nonzero"),
    )
}

fn baseline_reduction() -> Outcome {
    let world = generate_synthetic_world(0, 8, 6, 6, 0.05).unwrap();
    let cfg = RunConfig {
        gamma: VANISHING_GAMMA,
        methods: vec![Method::Dcd],
        ..RunConfig::default()
    };
    let report = leave_one_out(&world.bundles, &world.accuracy, &cfg).unwrap();
    let mut mismatches = 0;
    let mut rows = 0;
    for row in report.rows_for(Method::Dcd) {
        rows += 1;
        let target = &row.metrics.task_id;
        let sources: Vec<TaskId> = world.tasks.iter().filter(|t| *t != target).cloned().collect();
        let ranks = RankTable::from_source(&world.accuracy, &sources).unwrap();
        if row.ranking.order != baseline_avgrank(&ranks, target).unwrap().order {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{rows} (run, target) rankings; {mismatches} differ from avgrank"))
}

fn signal_recovery() -> Outcome {
    let start = Instant::now();
    let (mut dcd, mut avg) = (0.0, 0.0);
    for seed in 0..WORLD_SEEDS {
        let world = generate_synthetic_world(seed, 8, 6, 6, 0.05).unwrap();
        let cfg = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let report = leave_one_out(&world.bundles, &world.accuracy, &cfg).unwrap();
        dcd += report.summary(Method::Dcd).unwrap().ndcg.mean;
        avg += report.summary(Method::AvgRank).unwrap().ndcg.mean;
    }
    let (dcd, avg) = (dcd / WORLD_SEEDS as f64, avg / WORLD_SEEDS as f64);
    let elapsed = start.elapsed();
    outcome(
        dcd - avg >= SIGNAL_MARGIN && elapsed < SIGNAL_BUDGET,
        format!("dcd {dcd:.4} vs avgrank {avg:.4} (margin {:.4}); {elapsed:.2?}", dcd - avg),
    )
}

fn sampling_saturation() -> Outcome {
    let sizes = [1, 25, 50, 100];
    let mut means = [0.0; 4];
    let mut noise_free = true;
    for seed in 0..WORLD_SEEDS {
        let world = generate_synthetic_world(seed, 8, 6, 6, 0.05).unwrap();
        noise_free &= world.is_noise_free();
        let base = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let cells = sweep_n_src(&world.bundles, &world.accuracy, &base, &sizes).unwrap();
        for (m, c) in means.iter_mut().zip(&cells) {
            *m += c.summary.ndcg.mean / WORLD_SEEDS as f64;
        }
    }
    let plateau = &means[1..];
    let spread = plateau.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - plateau.iter().copied().fold(f64::INFINITY, f64::min);
    let jump = (means[1] - means[0]).abs();
    outcome(
        spread < SATURATION_BAND && (jump > SATURATION_BAND || noise_free),
        format!(
            "NDCG@5 at n_src 1/25/50/100: {:.4}/{:.4}/{:.4}/{:.4}; plateau spread {spread:.4}; \
             1 vs 25 gap {jump:.4}; noise-free {noise_free}",
            means[0], means[1], means[2], means[3]
        ),
    )
}

fn run_select(bin: &str, data: &Path, out: &Path) -> Vec<u8> {
    let output = Command::new(bin)
        .arg("select")
        .arg("--bundles")
        .arg(data.join("bundles"))
        .arg("--accuracy")
        .arg(data.join("accuracy.csv"))
        .arg("--out")
        .arg(out)
        .args(["--seed", "7", "--runs", "3", "--methods", "dcd,avgrank,inb,cosine,jsd"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    output.stdout
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_condsel");
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("world");
    let status = Command::new(bin)
        .arg("synth")
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let stdout_same = run_select(bin, &data, &a) == run_select(bin, &data, &b);
    let mut files = 0;
    let mut differing = Vec::new();
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        files += 1;
        if fs::read(a.join(&name)).unwrap() != fs::read(b.join(&name)).unwrap() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    outcome(
        stdout_same && differing.is_empty() && files > 0,
        format!("{files} report files compared; differing {differing:?}; stdout identical {stdout_same}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("conductance completeness", completeness),
        ("affine exactness", affine_exactness),
        ("softmax optimality", softmax_optimality),
        ("tail-mass bound", tail_mass),
        ("decomposition bounds", decomposition),
        ("asymmetry witness", asymmetry),
        ("metric oracles", metric_oracles),
        ("baseline reduction", baseline_reduction),
        ("signal recovery", signal_recovery),
        ("sampling saturation", sampling_saturation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {}  {}",
            i + 1,
            name,
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
