//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the lines are always printed. A failing
//! criterion makes the process exit nonzero only when `ACCEPTANCE_STRICT=1`
//! is set; otherwise the result is reported and the run continues.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crowdcast::allocator::{allocate_slot, Algorithm, AllocatorConfig, CapacityLedger, SlotMetrics};
use crowdcast::forecast::{mae, r_squared, Forecaster, MlpNet, RidgeAr, SeasonalNaive, SupervisedWindowSet};
use crowdcast::harness::{self, ExperimentConfig, GridMetrics, Phase1, ReservationMode};
use crowdcast::model::{
    avg_latency, validate_plan, DemandMatrix, LiveVideo, Quality, QualityLadder, RegionId, RttMatrix, SlotIndex,
    VideoId, VideoMeta,
};
use crowdcast::optimizer::{brute_force_video, solve_video, OptimizerConfig, OptimizerError};
use crowdcast::pricing::{video_cost, CloudModel, PriceBook};
use crowdcast::workload::{diurnal_series, DEFAULT_PROFILE};
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (CloudModel<f64>, LiveVideo, f64) {
    let n = rng.gen_range(1..=3);
    let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(5.0..12.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { diag[i] } else { diag[i].max(diag[j]) + rng.gen_range(0.0..200.0) })
                .collect()
        })
        .collect();
    let mut col = |lo: f64, hi: f64| (0..n).map(|_| rng.gen_range(lo..hi)).collect::<Vec<f64>>();
    let (zeta, eta, omega) = (col(0.01, 0.2), col(0.0, 0.15), col(0.01, 0.2));
    let cloud = CloudModel::new(
        RttMatrix::new(rows).unwrap(),
        PriceBook::with_reserved_discount(zeta, eta, omega, 0.25).unwrap(),
        QualityLadder::default(),
    )
    .unwrap();
    // at most two quality levels
    let qb = Quality::from_index(rng.gen_range(0..2)).unwrap();
    let pairs = rng.gen_range(0..=6);
    let demand = DemandMatrix::from_entries((0..pairs).map(|_| {
        let q = Quality::from_index(rng.gen_range(0..=qb.index())).unwrap();
        (RegionId(rng.gen_range(0..n)), q, rng.gen_range(1..30))
    }));
    let meta = VideoMeta {
        id: VideoId(1),
        slot: SlotIndex(0),
        broadcast_region: RegionId(rng.gen_range(0..n)),
        original_quality: qb,
    };
    let threshold = match rng.gen_range(0..3) {
        0 => 8.8,
        1 => rng.gen_range(5.0..250.0),
        _ => 1e6,
    };
    (cloud, LiveVideo::new(meta, demand, n).unwrap(), threshold)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (cases, mut feasible, mut worst) = (300, 0, 0.0f64);
    for i in 0..cases {
        let (cloud, video, threshold) = random_instance(&mut rng);
        let cfg = OptimizerConfig::with_threshold(threshold);
        match (solve_video(&video, &cloud, &cfg), brute_force_video(&video, &cloud, &cfg)) {
            (Ok(e), Ok(b)) => {
                let ce = video_cost(&video, &e, &cloud.ladder, &cloud.prices).total();
                let cb = video_cost(&video, &b, &cloud.ladder, &cloud.prices).total();
                worst = worst.max((ce - cb).abs());
                if (ce - cb).abs() > 1e-9 || !validate_plan(&e, &video.meta, &video.demand).is_empty() {
                    return verdict(false, format!("instance {i}: exact {ce} vs enumeration {cb}"));
                }
                feasible += 1;
            }
            (Err(OptimizerError::Infeasible { .. }), Err(OptimizerError::Infeasible { .. })) => {}
            (e, b) => return verdict(false, format!("instance {i}: {e:?} vs {b:?}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        secs <= 60.0,
        format!("{cases} instances ({feasible} feasible), max |cost diff| {worst:e}, {secs:.2} s"),
    )
}

fn criteria_2_3() -> (Verdict, Verdict) {
    let cfg = ExperimentConfig {
        horizon: 48,
        ..ExperimentConfig::default()
    };
    let inputs = harness::load_inputs(&cfg).unwrap();
    let runs = harness::optimize_all(&cfg, &inputs).unwrap();
    let by_delay: BTreeMap<String, &harness::DelayRun> = runs.iter().map(|r| (r.delay.to_string(), r)).collect();

    let pinned = by_delay["8.8"];
    let mut videos = 0;
    let mut bad = Vec::new();
    for sol in &pinned.solutions {
        for v in inputs.workload.slot(sol.slot) {
            if v.demand.is_empty() {
                continue;
            }
            videos += 1;
            let reported = sol.per_video_latency[&v.id()];
            let recomputed = avg_latency(&sol.plans[&v.id()], &v.demand, &inputs.cloud.rtt).unwrap();
            if reported != 8.8 || recomputed != 8.8 {
                bad.push((v.id(), reported, recomputed));
            }
        }
    }
    let c2 = verdict(
        bad.is_empty() && videos > 0,
        format!(
            "{videos} videos over {} slots, {} off 8.8 ms{}",
            pinned.solutions.len(),
            bad.len(),
            bad.first().map(|b| format!(", first {b:?}")).unwrap_or_default()
        ),
    );

    let (a, b, c) = (by_delay["8.8"], by_delay["120"], by_delay["180"]);
    let mut violations = 0;
    let mut strict = 0;
    for t in 0..a.solutions.len() {
        let (x, y, z) = (a.solutions[t].objective, b.solutions[t].objective, c.solutions[t].objective);
        let tol = 1e-9 * x.abs().max(1.0);
        if x + tol < y || y + tol < z {
            violations += 1;
        }
        if x > z + tol {
            strict += 1;
        }
    }
    let c3 = verdict(
        violations == 0 && strict >= 1,
        format!("{} slots, {violations} order violations, {strict} with strict decrease", a.solutions.len()),
    );
    (c2, c3)
}

fn criterion_4() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    let clean = diurnal_series(&DEFAULT_PROFILE, 24 * 10, 0.0, 1);
    let set = SupervisedWindowSet::from_values(&clean, 24).unwrap();
    let (train, test) = set.split(0.8).unwrap();
    let mut naive = SeasonalNaive::new(24);
    naive.fit(&train).unwrap();
    let r2 = r_squared(&test.targets, &naive.predict_all(&test).unwrap()).unwrap();
    pass &= r2 == 1.0;
    notes.push(format!("seasonal-naive R2 {r2}"));

    let noisy = diurnal_series(&DEFAULT_PROFILE, 24 * 7, 0.1, 1);
    let set = SupervisedWindowSet::from_values(&noisy, 24).unwrap();
    let (train, test) = set.split(0.8).unwrap();
    let mut ridge = RidgeAr::new(0.1);
    ridge.fit(&train).unwrap();
    let r2 = r_squared(&test.targets, &ridge.predict_all(&test).unwrap()).unwrap();
    pass &= r2 >= 0.7;
    notes.push(format!("ridge-AR R2 {r2:.4}"));

    let a = [1.0, 4.0, 2.0, 7.0];
    let mean = vec![3.5; 4];
    let examples = [
        r_squared(&a, &a).unwrap() == 1.0,
        r_squared(&a, &mean).unwrap() == 0.0,
        r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() == 0.5,
        mae(&a, &a).unwrap() == 0.0,
        mae(&[0.0, 0.0], &[1.0, 3.0]).unwrap() == 2.0,
    ];
    let ok = examples.iter().filter(|&&e| e).count();
    pass &= ok == examples.len();
    notes.push(format!("{ok}/{} metric examples exact", examples.len()));
    verdict(pass, notes.join(", "))
}

fn oracle_run() -> (Phase1, Vec<GridMetrics>) {
    let cfg = ExperimentConfig {
        reservations: ReservationMode::Oracle,
        ..ExperimentConfig::default()
    };
    let p1 = harness::run_phase1(&cfg).unwrap();
    let p2 = harness::run_phase2(&cfg, &p1).unwrap();
    (p1, p2.grid.into_iter().map(|g| g.metrics).collect())
}

fn rows(grid: &[GridMetrics], delay: f64, diss: f64, alg: Algorithm) -> Vec<SlotMetrics<f64>> {
    let point = grid.iter().find(|g| g.delay == delay && g.diss == diss).unwrap();
    point.rows.iter().filter(|r| r.algorithm == alg).cloned().collect()
}

fn total(grid: &[GridMetrics], delay: f64, diss: f64, alg: Algorithm) -> f64 {
    rows(grid, delay, diss, alg).iter().map(|r| r.total_cost).sum()
}

fn criterion_5(grid: &[GridMetrics]) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for g in grid {
        let (n, c, m) = (
            total(grid, g.delay, g.diss, Algorithm::Gnca),
            total(grid, g.delay, g.diss, Algorithm::Gca),
            total(grid, g.delay, g.diss, Algorithm::Gmc),
        );
        let (rn, rc, rm) = (
            rows(grid, g.delay, g.diss, Algorithm::Gnca),
            rows(grid, g.delay, g.diss, Algorithm::Gca),
            rows(grid, g.delay, g.diss, Algorithm::Gmc),
        );
        let slower = (0..rn.len())
            .filter(|&i| rn[i].avg_latency_ms > rc[i].avg_latency_ms || rn[i].avg_latency_ms > rm[i].avg_latency_ms)
            .count();
        let ok = n <= c && c <= m && slower == 0;
        pass &= ok;
        notes.push(format!(
            "D{} diss{}: GNCA {n:.2} GCA {c:.2} GMC {m:.2}, GNCA slower in {slower}/{} h{}",
            g.delay,
            g.diss,
            rn.len(),
            if ok { "" } else { " [x]" }
        ));
    }
    verdict(pass, notes.join("; "))
}

fn criterion_6(grid: &[GridMetrics]) -> Verdict {
    let ratios: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|g| {
            let r = total(grid, g.delay, g.diss, Algorithm::Gnca) / total(grid, g.delay, g.diss, Algorithm::Gmc);
            (g.delay, g.diss, r)
        })
        .collect();
    let listed = ratios
        .iter()
        .map(|(d, x, r)| format!("D{d} diss{x} {r:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    if ratios.iter().all(|r| r.2 <= 0.8) {
        return verdict(true, format!("GNCA/GMC at every grid point: {listed}"));
    }
    let pinned = ratios.iter().find(|r| r.0 == 8.8 && r.1 == 0.0).map(|r| r.2);
    match pinned {
        Some(r) if r <= 0.8 => verdict(true, format!("via D = 8.8 ms clause, ratio {r:.4}; all: {listed}")),
        _ => verdict(false, format!("GNCA/GMC: {listed}")),
    }
}

fn criterion_7(grid: &[GridMetrics]) -> Verdict {
    let hit = |alg| rows(grid, 8.8, 0.0, alg);
    let (n, c, m) = (hit(Algorithm::Gnca), hit(Algorithm::Gca), hit(Algorithm::Gmc));
    let hits_ok = n.iter().chain(&c).all(|r| r.hit_pct == 100.0 && r.unserved == 0);
    let od_ok = grid
        .iter()
        .flat_map(|g| g.rows.iter().filter(|r| r.algorithm == Algorithm::Gmc))
        .all(|r| r.on_demand_pct == 100.0);
    verdict(
        hits_ok && od_ok && !n.is_empty() && !m.is_empty(),
        format!(
            "GNCA/GCA hit 100% in {}/{} hours, GMC on-demand 100% in every grid row: {od_ok}",
            n.iter().zip(&c).filter(|(a, b)| a.hit_pct == 100.0 && b.hit_pct == 100.0).count(),
            n.len()
        ),
    )
}

fn criterion_8(grid: &[GridMetrics]) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for d in [120.0, 180.0] {
        for alg in Algorithm::ALL {
            let (lo, hi) = (total(grid, d, 10.0, alg), total(grid, d, 0.0, alg));
            pass &= lo <= hi;
            notes.push(format!("D{d} {}: {lo:.2} <= {hi:.2}", alg.label()));
        }
    }
    verdict(pass, notes.join(", "))
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_9() -> Verdict {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 1000,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let props = runner.run(&common::instance(), |inst| {
        for alg in Algorithm::ALL {
            let cfg = AllocatorConfig::new(inst.delay, inst.diss_pct as f64).unwrap();
            let stock = if alg.uses_reservations() { inst.reserved.clone() } else { vec![0; inst.reserved.len()] };
            let mut first = CapacityLedger::new(stock.clone(), inst.limit);
            let mut second = CapacityLedger::new(stock.clone(), inst.limit);
            let a = allocate_slot(alg, SlotIndex(0), &inst.videos, &mut first, &inst.cloud, &cfg).unwrap();
            let b = allocate_slot(alg, SlotIndex(0), &inst.videos, &mut second, &inst.cloud, &cfg).unwrap();
            proptest::prop_assert_eq!(&a, &b);
            for r in (0..stock.len()).map(RegionId) {
                proptest::prop_assert_eq!(first.reserved_used(r) + first.reserved_remaining(r), stock[r.0]);
                proptest::prop_assert_eq!(first.on_demand_used(r) + first.on_demand_remaining(r), inst.limit);
            }
            let placed = a.placements().count() as u64;
            let used: u64 = (0..stock.len())
                .map(RegionId)
                .map(|r| first.reserved_used(r) + first.on_demand_used(r))
                .sum();
            proptest::prop_assert_eq!(placed, used);
        }
        Ok(())
    });
    if let Err(e) = props {
        return verdict(false, format!("property failure: {e}"));
    }

    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        out_dir: tmp.path().join("out"),
        ..ExperimentConfig::default()
    };
    let run = || {
        let _ = std::fs::remove_dir_all(&cfg.out_dir);
        harness::run_all(&cfg).unwrap();
        files_under(&cfg.out_dir)
    };
    let (a, b) = (run(), run());
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let same = a.len() == b.len() && differing.is_empty();
    verdict(
        same,
        format!(
            "1000 ledger/determinism cases passed; pipeline rerun: {} files, {} differ {:?}",
            a.len(),
            differing.len(),
            differing
        ),
    )
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..20 {
        let inputs = rng.gen_range(2..=6);
        let hidden = rng.gen_range(2..=8);
        let batch = rng.gen_range(1..=8);
        let net = MlpNet::<f64>::new(inputs, hidden, &mut rng);
        let rows: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let xs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let ts: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = net.loss_and_gradient(&xs, &ts);
        let h = 1e-6;
        for k in 0..net.params().len() {
            let mut plus = net.clone();
            plus.params_mut()[k] += h;
            let mut minus = net.clone();
            minus.params_mut()[k] -= h;
            let fd = (plus.loss_and_gradient(&xs, &ts).0 - minus.loss_and_gradient(&xs, &ts).0) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    verdict(
        worst <= 1e-4,
        format!("20 networks, {checked} parameters, worst relative error {worst:e}"),
    )
}

fn main() {
    let mut results: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |n: u32, v: Verdict| {
        println!("criterion {n:>2}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, v));
    };
    report(1, criterion_1());
    let (c2, c3) = criteria_2_3();
    report(2, c2);
    report(3, c3);
    report(4, criterion_4());
    let (_, grid) = oracle_run();
    report(5, criterion_5(&grid));
    report(6, criterion_6(&grid));
    report(7, criterion_7(&grid));
    report(8, criterion_8(&grid));
    report(9, criterion_9());
    report(10, criterion_10());

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass; failing: {failed:?}", results.len() - failed.len(), results.len());
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
