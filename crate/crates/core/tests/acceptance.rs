//! End-to-end acceptance checks. Each criterion prints one `PASS`, `FAIL` or
//! `SKIP` line; the process fails if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 4`.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use common::{all_allocations, close_to_any, dense_xy, naive_for, naive_log_icl, random_allocation, random_cube, random_hyper, rng};
use sbtm::evalkit::{median, nmi, nmi_per_frame, PartitionFrame};
use sbtm::genmodel::{simulate, ModelParameters, ParamSource};
use sbtm::greedy::{fit, FitConfig, InitMethod, SweepState};
use sbtm::icl::{log_icl_full, score_delta_move, score_full, Hyperparameters};
use sbtm::io::read_edge_list;
use sbtm::netcube::{discretize, validate, AdjacencyCube};
use sbtm::suffstats::{apply_move, compute_stats, AllocationMatrix, DyadCounts};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn log_icl(cube: &AdjacencyCube, z: &AllocationMatrix, hyper: &Hyperparameters) -> f64 {
    log_icl_full(&compute_stats(cube, z).unwrap(), hyper).unwrap().log_icl
}

fn same(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

fn oracle_equality() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut r = rng(101);
    for case in 0..200 {
        let n = r.random_range(1..=5);
        let t = r.random_range(1..=3);
        let k = r.random_range(1..=3);
        let (pa, pe) = (0.4 + 0.6 * r.random::<f64>(), r.random::<f64>());
        let cube = random_cube(&mut r, n, t, pa, pe);
        let z = random_allocation(&mut r, &cube, k);
        let hyper = if case % 2 == 0 { Hyperparameters::jeffreys(k) } else { random_hyper(&mut r, k) };
        let lib = log_icl(&cube, &z, &hyper);
        let naive = naive_for(&cube, &z, &hyper);
        if !same(lib, naive, 1e-9) {
            bad += 1;
        }
        if lib.is_finite() {
            worst = worst.max((lib - naive).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        bad == 0 && secs < 10.0,
        format!("200 instances, {bad} mismatches, max |diff| {worst:.2e}, {secs:.2}s"),
    )
}

fn delta_consistency() -> Outcome {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    let mut stat_mismatch = 0;
    let mut score_mismatch = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=10);
        let t = r.random_range(1..=5);
        let k = r.random_range(1..=5);
        let (pa, pe) = (0.5 + 0.5 * r.random::<f64>(), r.random::<f64>());
        let cube = random_cube(&mut r, n, t, pa, pe);
        let mut z = random_allocation(&mut r, &cube, k);
        let hyper = random_hyper(&mut r, k);
        let active: Vec<(usize, usize)> = (0..t)
            .flat_map(|f| cube.active_nodes(f).iter().map(move |&i| (f, i as usize)))
            .collect();
        if active.is_empty() {
            continue;
        }
        let mut stats = compute_stats(&cube, &z).unwrap();
        let mut score = score_full(&stats, &hyper).unwrap();
        for _ in 0..500 {
            let (f, i) = active[r.random_range(0..active.len())];
            let g = r.random_range(1..=k as u32);
            let d = score_delta_move(&stats, &hyper, &cube, &z, f, i, g).unwrap();
            apply_move(&mut stats, &cube, &mut z, f, i, g).unwrap();
            score = score.apply(d);
        }
        if stats != compute_stats(&cube, &z).unwrap() {
            stat_mismatch += 1;
        }
        let full = score_full(&stats, &hyper).unwrap();
        let diff = (full.finite - score.finite).abs();
        worst = worst.max(diff);
        if full.zero_mass != score.zero_mass || diff > 1e-8 {
            score_mismatch += 1;
        }
    }
    verdict(
        stat_mismatch == 0 && score_mismatch == 0,
        format!("100 x 500 moves, stats mismatches {stat_mismatch}, score mismatches {score_mismatch}, max |diff| {worst:.2e}"),
    )
}

fn exhaustive_optimum() -> Outcome {
    let start = Instant::now();
    let (n, t, k) = (4, 2, 2);
    let hyper = Hyperparameters::jeffreys(k);
    let configs = all_allocations(n, t, k);
    let mut r = rng(303);
    let mut hits = 0;
    let mut outside_top5 = 0;
    for case in 0..50u64 {
        let (pa, pe) = (1.0, 0.2 + 0.6 * r.random::<f64>());
        let cube = random_cube(&mut r, n, t, pa, pe);
        let (x, y) = dense_xy(&cube);
        let mut values: Vec<f64> = configs.iter().map(|z| naive_log_icl(z, &x, &y, k, &hyper)).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let mut top = Vec::new();
        for &v in &values {
            if top.len() == 5 {
                break;
            }
            if !top.iter().any(|&w: &f64| same(v, w, 1e-9)) {
                top.push(v);
            }
        }
        let config = FitConfig {
            k_up: k,
            n_restarts: 20,
            seed: case,
            ..FitConfig::default()
        };
        let result = fit(&cube, &hyper, &config).unwrap();
        if same(result.log_icl, top[0], 1e-9) {
            hits += 1;
        }
        if !close_to_any(result.log_icl, &top, 1e-9) {
            outside_top5 += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        hits * 10 >= 50 * 9 && outside_top5 == 0 && secs < 60.0,
        format!("maximum attained in {hits}/50, outside top-5 {outside_top5}, {secs:.2}s"),
    )
}

fn study_one() -> Outcome {
    let start = Instant::now();
    let gen_hyper = Hyperparameters::jeffreys(3);
    let fit_hyper = Hyperparameters::jeffreys(10);
    let mut nmis = Vec::new();
    let mut better = 0;
    for d in 0..20u64 {
        let out = simulate(50, 20, &ParamSource::Prior { k: 3, hyper: gen_hyper.clone() }, 1000 + d).unwrap();
        let config = FitConfig {
            k_up: 10,
            n_restarts: 30,
            init_method: InitMethod::Random,
            seed: d,
            ..FitConfig::default()
        };
        let result = fit(&out.cube, &fit_hyper, &config).unwrap();
        let truth = log_icl(&out.cube, &out.z_true, &gen_hyper);
        if result.log_icl >= truth - 1e-9 {
            better += 1;
        }
        nmis.extend(nmi_per_frame(&result.z_hat, &out.z_true).unwrap());
    }
    let med = median(&nmis).unwrap_or(0.0);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        med >= 0.75 && better >= 16 && secs < 120.0,
        format!("median NMI {med:.3}, fit >= truth in {better}/20, {secs:.1}s"),
    )
}

fn timing_scale() -> Outcome {
    let params = ModelParameters::persistence_benchmark(0.8).unwrap();
    let out = simulate(50, 20, &ParamSource::Fixed(params), 77).unwrap();
    let config = FitConfig {
        k_up: 10,
        n_restarts: 1,
        seed: 1,
        threads: Some(1),
        ..FitConfig::default()
    };
    let start = Instant::now();
    let result = fit(&out.cube, &Hyperparameters::jeffreys(10), &config).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        secs < 5.0,
        format!("N=50 T=20 K_up=10: {secs:.3}s, {} sweeps, k_hat {}", result.n_sweeps, result.k_hat),
    )
}

fn study_two() -> Outcome {
    let params = ModelParameters::persistence_benchmark(0.8).unwrap();
    let hyper = Hyperparameters::jeffreys(10);
    let mut pooled = vec![DyadCounts::default(); 9];
    let mut nmis = Vec::new();
    for d in 0..20u64 {
        let out = simulate(50, 20, &ParamSource::Fixed(params.clone()), 2000 + d).unwrap();
        let stats = compute_stats(&out.cube, &out.z_true).unwrap();
        for g in 1..=3u32 {
            for h in g..=3u32 {
                let slot = (g as usize - 1) * 3 + h as usize - 1;
                pooled[slot] = pooled[slot].add(stats.block(g, h));
            }
        }
        let config = FitConfig {
            k_up: 10,
            n_restarts: 1,
            seed: d,
            ..FitConfig::default()
        };
        let result = fit(&out.cube, &hyper, &config).unwrap();
        nmis.extend(nmi_per_frame(&result.z_hat, &out.z_true).unwrap());
    }
    let mut outside = Vec::new();
    let mut checked = 0;
    for g in 1..=3u32 {
        for h in g..=3u32 {
            let c = pooled[(g as usize - 1) * 3 + h as usize - 1];
            for (name, truth, s, f) in [
                ("theta", params.theta(g, h), c.eta, c.zeta),
                ("p", params.p(g, h), c.u01, c.u00),
                ("q", params.q(g, h), c.u10, c.u11),
            ] {
                let n = s + f;
                if n == 0 {
                    outside.push(format!("{name}[{g},{h}] unobserved"));
                    continue;
                }
                checked += 1;
                let est = s as f64 / n as f64;
                let sigma = (truth * (1.0 - truth) / n as f64).sqrt();
                if (est - truth).abs() > 3.0 * sigma {
                    outside.push(format!("{name}[{g},{h}]={est:.4} vs {truth}"));
                }
            }
        }
    }
    let med = median(&nmis).unwrap_or(0.0);
    verdict(
        outside.is_empty() && med >= 0.6,
        format!("{checked} block estimates, outside 3 sigma: {outside:?}; median NMI {med:.3}"),
    )
}

fn reality_mining_fixture() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("SBTM_REALITY_MINING") {
        return Some(PathBuf::from(p));
    }
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reality_mining.txt");
    p.exists().then_some(p)
}

fn reality_mining() -> Outcome {
    let Some(path) = reality_mining_fixture() else {
        return Outcome::Skip(
            "fixture absent (set SBTM_REALITY_MINING or add tests/fixtures/reality_mining.txt)".into(),
        );
    };
    let parsed = match read_edge_list(&path) {
        Ok(p) => p,
        Err(e) => return Outcome::Fail(format!("{}: {e}", path.display())),
    };
    let cube = discretize(&parsed.events, 4.0 * 3600.0).unwrap();
    let inactive = cube.activity().inactive_fraction();
    let start = Instant::now();
    let config = FitConfig {
        k_up: 20,
        n_restarts: 1,
        seed: 0,
        ..FitConfig::default()
    };
    let result = fit(&cube, &Hyperparameters::jeffreys(20), &config).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        cube.n_nodes() == 96
            && cube.n_frames() == 1392
            && (0.80..=0.86).contains(&inactive)
            && secs < 600.0
            && (3..=8).contains(&result.k_hat),
        format!(
            "N={} T={} inactive {inactive:.3}, k_hat {} in {secs:.1}s",
            cube.n_nodes(),
            cube.n_frames(),
            result.k_hat
        ),
    )
}

fn invariant_suite() -> Outcome {
    let mut trials = 0;
    let mut violations = Vec::new();
    let mut r = rng(808);

    // monotonicity over accepted moves and merges, checked by recomputation
    for case in 0..500u64 {
        let n = r.random_range(2..=8);
        let t = r.random_range(1..=4);
        let k = r.random_range(2..=4);
        let (pa, pe) = (0.6 + 0.4 * r.random::<f64>(), r.random::<f64>());
        let cube = random_cube(&mut r, n, t, pa, pe);
        let hyper = Hyperparameters::jeffreys(k);
        let z = random_allocation(&mut r, &cube, k);
        let mut state = SweepState::new(&cube, &hyper, z).unwrap();
        let mut order: Vec<(usize, usize)> = (0..t)
            .flat_map(|f| cube.active_nodes(f).iter().map(move |&i| (f, i as usize)))
            .collect();
        for _ in 0..3 {
            order.shuffle(&mut r);
            for &(f, i) in &order {
                let (g, _) = state.best_move(f, i);
                if g == state.z().get(i, f) {
                    continue;
                }
                let before = score_full(state.stats(), &hyper).unwrap();
                state.apply_move(f, i, g).unwrap();
                let after = score_full(state.stats(), &hyper).unwrap();
                if g == 0 || after.delta_from(&before).zero_mass > 0 || (after.zero_mass == before.zero_mass && after.finite < before.finite) {
                    violations.push(format!("move decreased the score (case {case})"));
                }
            }
        }
        while let Some((g, h, _)) = state.best_merge() {
            let before = score_full(state.stats(), &hyper).unwrap();
            state.apply_merge(g, h).unwrap();
            let after = score_full(state.stats(), &hyper).unwrap();
            if after.delta_from(&before).zero_mass > 0 || (after.zero_mass == before.zero_mass && after.finite < before.finite) {
                violations.push(format!("merge decreased the score (case {case})"));
            }
        }
        trials += 1;
    }

    // label permutation invariance
    for case in 0..2500 {
        let n = r.random_range(1..=8);
        let t = r.random_range(1..=4);
        let k = r.random_range(1..=5);
        let (pa, pe) = (0.7, r.random::<f64>());
        let cube = random_cube(&mut r, n, t, pa, pe);
        let hyper = Hyperparameters::jeffreys(k);
        let z = random_allocation(&mut r, &cube, k);
        let mut map: Vec<u32> = (1..=k as u32).collect();
        map.shuffle(&mut r);
        map.insert(0, 0);
        let a = log_icl(&cube, &z, &hyper);
        let b = log_icl(&cube, &z.relabel(&map).unwrap(), &hyper);
        if !same(a, b, 1e-12) {
            violations.push(format!("label permutation changed log ICL by {:.2e} (case {case})", (a - b).abs()));
        }
        trials += 1;
    }

    // simulator output validity
    for case in 0..2000u64 {
        let n = r.random_range(1..=20);
        let t = r.random_range(1..=6);
        let k = r.random_range(1..=4);
        let out = simulate(n, t, &ParamSource::Prior { k, hyper: Hyperparameters::jeffreys(k) }, case).unwrap();
        if !validate(&out.cube.to_dense()).is_valid() {
            violations.push(format!("simulated cube invalid (case {case})"));
        }
        if out.z_true.check_consistent(&out.cube).is_err() {
            violations.push(format!("simulated allocation inconsistent (case {case})"));
        }
        trials += 1;
    }

    // NMI symmetry, permutation invariance and bounds
    for case in 0..5000 {
        let len = r.random_range(1..=40);
        let ka = r.random_range(1..=6);
        let kb = r.random_range(1..=6);
        let a: Vec<u32> = (0..len).map(|_| r.random_range(1..=ka)).collect();
        let b: Vec<u32> = (0..len).map(|_| r.random_range(1..=kb)).collect();
        let mut map: Vec<u32> = (1..=ka).collect();
        map.shuffle(&mut r);
        let renamed: Vec<u32> = a.iter().map(|&g| map[g as usize - 1]).collect();
        let (pa, pb, pr) = (PartitionFrame(a), PartitionFrame(b), PartitionFrame(renamed));
        let v = nmi(&pa, &pb).unwrap();
        if !(0.0..=1.0).contains(&v)
            || (v - nmi(&pb, &pa).unwrap()).abs() > 1e-12
            || (v - nmi(&pr, &pb).unwrap()).abs() > 1e-12
        {
            violations.push(format!("NMI property violated (case {case})"));
        }
        trials += 1;
    }

    verdict(
        violations.is_empty(),
        format!("{trials} trials, {} violations {:?}", violations.len(), violations.iter().take(3).collect::<Vec<_>>()),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1", "oracle ICL equality", oracle_equality),
        ("2", "delta consistency", delta_consistency),
        ("3", "exhaustive optimum", exhaustive_optimum),
        ("4", "simulated hierarchy recovery", study_one),
        ("5", "timing scale", timing_scale),
        ("6", "persistence regime recognition", study_two),
        ("7", "Reality Mining ingestion", reality_mining),
        ("8", "invariant suite", invariant_suite),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id} [{tag}] {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

