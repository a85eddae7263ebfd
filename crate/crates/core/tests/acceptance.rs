//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion
//! that all of them passed. Tolerances and time limits are fixed here.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use attntopo::features::{amplitude_bottleneck, amplitude_wasserstein, persistence_entropy};
use attntopo::graph::{to_distance_matrix, AttentionMap, DistanceMatrix};
use attntopo::metrics::{auroc, fpr_at_95_tpr};
use attntopo::persistence::{
    betti_at, compute_persistence, compute_persistence_with, PersistenceDiagram, PersistenceOptions, PersistencePair,
};
use attntopo::pipeline::{run_pipeline, PipelineConfig};
use attntopo::record_io::synth_attention;
use attntopo::scoring::{GaussianScorer, NeighborBank, Scorer};

use common::{circle_distances, kruskal_weights, naive_persistence, normalize, random_distances, rng, Bars};

const ORACLE_LIMIT: Duration = Duration::from_secs(60);
const MST_LIMIT: Duration = Duration::from_secs(30);
const ENTROPY_TOL: f64 = 1e-12;
const AUROC_TOL: f64 = 1e-12;
const MAHA_TOL: f64 = 1e-9;
const SEPARATION_AUROC: f64 = 0.9;
const SEPARATION_LIMIT: Duration = Duration::from_secs(300);
const SMALL_HEAD_LIMIT: Duration = Duration::from_secs(5);
const LARGE_HEAD_LIMIT: Duration = Duration::from_secs(1);

type Check = std::result::Result<String, String>;

fn bars_of(diagram: &PersistenceDiagram) -> Bars {
    normalize(diagram.points().iter().map(|p| (p.dim, p.birth, p.death)).collect())
}

fn within(limit: Duration, started: Instant, summary: String) -> Check {
    let took = started.elapsed();
    let line = format!("{summary}; {:.2} s (limit {} s)", took.as_secs_f64(), limit.as_secs_f64());
    if took < limit {
        Ok(line)
    } else {
        Err(line)
    }
}

fn persistence_oracle() -> Check {
    let started = Instant::now();
    let mut rng = rng(101);
    for case in 0..200 {
        let n = rng.random_range(2..=8);
        let levels = [0, 4, 10][case % 3];
        let cap = if case % 4 == 3 { 0.75 } else { 1.0 };
        let raw = random_distances(&mut rng, n, levels);
        let dist = DistanceMatrix::new(n, raw.clone()).map_err(|e| e.to_string())?;
        let got = bars_of(&compute_persistence(&dist, 3, cap).map_err(|e| e.to_string())?);
        let want = naive_persistence(n, &raw, 3, cap);
        if got != want {
            return Err(format!("case {case} (n = {n}, cap = {cap}): got {got:?}, oracle {want:?}"));
        }
    }
    within(ORACLE_LIMIT, started, "200 matrices, n <= 8, dims 0-3 identical to the reduction oracle".into())
}

fn mst_equivalence() -> Check {
    let started = Instant::now();
    let mut rng = rng(202);
    for case in 0..50 {
        let n = if case == 0 { 64 } else { rng.random_range(2..=64) };
        let levels = if case % 2 == 0 { 0 } else { 8 };
        let raw = random_distances(&mut rng, n, levels);
        let dist = DistanceMatrix::new(n, raw.clone()).map_err(|e| e.to_string())?;
        let diagram = compute_persistence(&dist, 0, 1.0).map_err(|e| e.to_string())?;
        let essential = diagram.in_dim(0).filter(|p| p.death == 1.0).count();
        let mut deaths: Vec<f64> = diagram.in_dim(0).filter(|p| p.death < 1.0).map(|p| p.death).collect();
        deaths.sort_by(f64::total_cmp);
        let want = kruskal_weights(n, &raw, 1.0);
        if deaths != want || essential != 1 {
            return Err(format!("case {case} (n = {n}): deaths {deaths:?}, MST {want:?}, {essential} essential"));
        }
    }
    within(MST_LIMIT, started, "50 matrices, n <= 64, finite H0 deaths equal MST weights".into())
}

fn known_shapes() -> Check {
    let n = 6;
    let raw = circle_distances(n);
    let hexagon = DistanceMatrix::new(n, raw.clone()).map_err(|e| e.to_string())?;
    let diagram = compute_persistence(&hexagon, 3, 1.0).map_err(|e| e.to_string())?;
    let h1: Vec<_> = diagram.in_dim(1).collect();
    if h1.len() != 1 {
        return Err(format!("hexagon has {} H1 bars: {h1:?}", h1.len()));
    }
    let oracle = naive_persistence(n, &raw, 3, 1.0);
    if bars_of(&diagram) != oracle {
        return Err(format!("hexagon diagram {:?} differs from oracle {oracle:?}", bars_of(&diagram)));
    }
    let (ring, fill) = (raw[1], raw[2]);
    let mid = (ring + fill) / 2.0;
    if betti_at(&diagram, 1, mid) != 1 {
        return Err(format!("β1 at {mid} is {}", betti_at(&diagram, 1, mid)));
    }

    let cycle = DistanceMatrix::from_fn(4, |i, j| if (i + j) % 2 == 1 { 0.3 } else { 0.9 })
        .map_err(|e| e.to_string())?;
    let diagram = compute_persistence(&cycle, 3, 1.0).map_err(|e| e.to_string())?;
    let h1: Vec<(f64, f64)> = diagram.in_dim(1).map(|p| (p.birth, p.death)).collect();
    if h1 != [(0.3, 0.9)] {
        return Err(format!("4-cycle H1 = {h1:?}"));
    }
    let oracle_h1: Vec<(f64, f64)> =
        naive_persistence(4, cycle.as_slice(), 3, 1.0).into_iter().filter(|b| b.0 == 1).map(|b| (b.1, b.2)).collect();
    if oracle_h1 != h1 {
        return Err(format!("4-cycle oracle H1 = {oracle_h1:?}"));
    }
    Ok(format!("hexagon: one H1 bar ({ring:.4}, {fill:.4}), β1 = 1 between; 4-cycle H1 = {{(0.3, 0.9)}}"))
}

fn feature_units() -> Check {
    for k in 1..=16usize {
        let diagram = PersistenceDiagram::new(
            (0..k).map(|_| PersistencePair { birth: 0.2, death: 0.7, dim: 1 }),
            1.0,
            3,
        );
        let entropy = persistence_entropy(&diagram, 1);
        let expected = (k as f64).log2();
        if (entropy - expected).abs() > ENTROPY_TOL {
            return Err(format!("{k} equal bars: entropy {entropy}, expected {expected}"));
        }
    }
    let empty = PersistenceDiagram::empty(1.0, 3);
    for dim in 0..=3 {
        if persistence_entropy(&empty, dim) != -1.0 {
            return Err(format!("empty entropy in dim {dim} is {}", persistence_entropy(&empty, dim)));
        }
    }
    let mut rng = rng(404);
    for case in 0..1000 {
        let count = rng.random_range(0..=30);
        let points: Vec<PersistencePair> = (0..count)
            .map(|_| {
                let birth: f64 = rng.random_range(0.0..1.0);
                let death = rng.random_range(birth..=1.0);
                PersistencePair { birth, death, dim: 1 }
            })
            .collect();
        let diagram = PersistenceDiagram::new(points, 1.0, 1);
        for p in [1.0, 2.0, rng.random_range(1.0..8.0)] {
            let (b, w) = (amplitude_bottleneck(&diagram, 1), amplitude_wasserstein(&diagram, 1, p));
            if b > w {
                return Err(format!("diagram {case}, p = {p}: bottleneck {b} > Wasserstein {w}"));
            }
        }
    }
    Ok("entropy of k equal bars = log2 k (k <= 16); empty = -1; bottleneck <= Wasserstein on 1000 diagrams".into())
}

fn metric_oracle() -> Check {
    let mut rng = rng(505);
    for case in 0..100 {
        let (n_id, n_ood) = (rng.random_range(1..=500), rng.random_range(1..=500));
        let levels: u32 = [0, 3, 50][case % 3];
        let mut draw = |shift: f64| -> f64 {
            if levels == 0 {
                rng.random_range(0.0..1.0) + shift
            } else {
                f64::from(rng.random_range(0..levels)) + shift.round()
            }
        };
        let id: Vec<f64> = (0..n_id).map(|_| draw(0.3)).collect();
        let ood: Vec<f64> = (0..n_ood).map(|_| draw(0.0)).collect();
        let got = auroc(&id, &ood).map_err(|e| e.to_string())?;
        let want = common::pairwise_auroc(&id, &ood);
        if (got - want).abs() > AUROC_TOL {
            return Err(format!("score set {case}: AUROC {got}, pair count {want}"));
        }
    }

    // λ is the ⌈0.05 · n⌉-th smallest ID score; FPR counts OOD scores >= λ
    let ramp = |n: usize| (1..=n).map(|i| i as f64).collect::<Vec<f64>>();
    let crafted: [(Vec<f64>, Vec<f64>, f64); 5] = [
        (ramp(20), vec![0.5, 1.0, 1.5, 25.0], 0.75),
        (ramp(21), vec![1.5, 2.0], 0.5),
        (ramp(40), vec![1.999, 2.0, 2.5, 3.0], 0.75),
        (ramp(100), vec![4.9, 5.0, 6.0, 0.0, 100.0], 0.6),
        (vec![3.0; 20], vec![3.0, 2.999], 0.5),
    ];
    for (i, (id, ood, want)) in crafted.iter().enumerate() {
        let got = fpr_at_95_tpr(id, ood).map_err(|e| e.to_string())?;
        if got != *want {
            return Err(format!("crafted set {i}: FPR95 {got}, expected {want}"));
        }
    }
    if fpr_at_95_tpr(&ramp(19), &[1.0]).is_ok() {
        return Err("FPR95 accepted 19 ID scores".into());
    }
    Ok("AUROC equals pair counting on 100 sets (tol 1e-12); FPR95 matches 5 crafted sets".into())
}

fn scorer_oracles() -> Check {
    let mut rng = rng(606);
    for case in 0..200 {
        let d = rng.random_range(1..=12);
        let classes = rng.random_range(1..=4);
        let mut vector = |scale: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(-scale..scale)).collect() };
        let centroids: Vec<Vec<f64>> = (0..classes).map(|_| vector(3.0)).collect();
        let z = vector(5.0);
        let model = GaussianScorer {
            labels: (0..classes).map(|c| format!("c{c}")).collect(),
            centroids: centroids.clone(),
            precision: DMatrix::identity(d, d),
        };
        let got = model.score(&z).map_err(|e| e.to_string())?;
        let want = -centroids
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if (got - want).abs() > MAHA_TOL {
            return Err(format!("case {case}: maha {got}, squared Euclidean {want}"));
        }

        let bank_size = rng.random_range(1..=60);
        let bank: Vec<Vec<f64>> = (0..bank_size)
            .map(|_| (0..d).map(|_| f64::from(rng.random_range(-3i32..=3))).collect())
            .collect();
        let k = rng.random_range(1..=bank_size);
        let probe: Vec<f64> = (0..d).map(|_| f64::from(rng.random_range(-3i32..=3))).collect();
        let neighbours = NeighborBank::new(bank.clone(), k).map_err(|e| e.to_string())?;
        let got = neighbours.score(&probe).map_err(|e| e.to_string())?;
        let want = common::sorted_knn(&probe, &bank, k);
        if got != want {
            return Err(format!("case {case}: knn {got}, sorted oracle {want}"));
        }
    }
    Ok("maha with identity precision = -min squared distance (tol 1e-9); knn equals sorted oracle on 200 cases".into())
}

fn synthetic_separation() -> Check {
    let started = Instant::now();
    let config = PipelineConfig::parse(
        "input = synth\n\
         seed = 7\n\
         max_hom_dim = 1\n\
         synth.count = 200\n\
         synth.n_tokens = 16\n\
         synth.layers = 2\n\
         synth.heads = 2\n\
         synth.id_locality = 0.8\n\
         synth.ood_locality = 0.1\n",
        Path::new("."),
    )
    .map_err(|e| e.to_string())?;
    let output = run_pipeline(&config).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    let mut worst = f64::INFINITY;
    for scorer in [Scorer::Knn, Scorer::Maha] {
        let row = output
            .report
            .rows
            .iter()
            .find(|r| r.scorer == scorer)
            .ok_or_else(|| format!("no report row for {}", scorer.as_str()))?;
        if row.n_id != 200 || row.n_ood != 200 {
            return Err(format!("{} scored {} ID / {} OOD", scorer.as_str(), row.n_id, row.n_ood));
        }
        worst = worst.min(row.auroc);
        summary.push(format!("{} AUROC {:.4}", scorer.as_str(), row.auroc));
    }
    let line = within(SEPARATION_LIMIT, started, format!("{} (need >= {SEPARATION_AUROC})", summary.join(", ")));
    match line {
        Ok(text) if worst >= SEPARATION_AUROC => Ok(text),
        Ok(text) | Err(text) => Err(text),
    }
}

fn run_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        "input = synth\nseed = 1\nmax_hom_dim = 1\nsynth.count = 30\nsynth.n_tokens = 10\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for attempt in ["a", "b"] {
        let out = dir.path().join(attempt);
        let status = Command::new(env!("CARGO_BIN_EXE_attntopo"))
            .args(["run", "--seed", "42", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .map_err(|e| e.to_string())?
            .map(|entry| {
                let path = entry.unwrap().path();
                (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    let names: Vec<&str> = outputs[0].iter().map(|f| f.0.as_str()).collect();
    for required in ["report.csv", "report.txt", "features_validation.csv", "features_test.csv"] {
        if !names.contains(&required) {
            return Err(format!("{required} missing from run output {names:?}"));
        }
    }
    if outputs[0] != outputs[1] {
        return Err("two runs with seed 42 produced different files".into());
    }
    Ok(format!("two runs with --seed 42 wrote identical bytes for {} files", names.len()))
}

fn time_head(n: usize, max_hom_dim: usize, locality: f64, seed: u64) -> std::result::Result<Duration, String> {
    let record = synth_attention(seed, n, 1, 1, locality).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let map = AttentionMap::from_f32(n, record.map(0, 0)).map_err(|e| e.to_string())?;
    let options = PersistenceOptions { max_hom_dim, ..PersistenceOptions::default() };
    compute_persistence_with(&to_distance_matrix(&map), &options).map_err(|e| e.to_string())?;
    Ok(started.elapsed())
}

fn performance_envelope() -> Check {
    let mut report = Vec::new();
    let mut ok = true;
    for (n, dims, limit) in [(32, 3, SMALL_HEAD_LIMIT), (128, 1, LARGE_HEAD_LIMIT)] {
        let mut slowest = Duration::ZERO;
        for (seed, locality) in [(1, 0.0), (2, 0.5), (3, 1.0)] {
            slowest = slowest.max(time_head(n, dims, locality, seed)?);
        }
        ok &= slowest < limit;
        report.push(format!(
            "n = {n}, dims 0-{dims}: slowest {:.3} s (limit {} s)",
            slowest.as_secs_f64(),
            limit.as_secs_f64()
        ));
    }
    let line = report.join("; ");
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("persistence oracle equivalence", persistence_oracle),
        ("H0 / minimum spanning tree equivalence", mst_equivalence),
        ("known-shape checks", known_shapes),
        ("feature unit checks", feature_units),
        ("metric oracle", metric_oracle),
        ("scorer oracles", scorer_oracles),
        ("end-to-end synthetic separation", synthetic_separation),
        ("run determinism", run_determinism),
        ("performance envelope", performance_envelope),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
