//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p qaoa-graphsim --test acceptance`.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use qaoa_graphsim::evolution::dense::{dense_expm, DenseMatrix};
use qaoa_graphsim::evolution::{expm_action, StateVector};
use qaoa_graphsim::graphs::{brute_force_best, deform, erdos_renyi, Deformation, Graph};
use qaoa_graphsim::hamiltonians::{build_cost_diagonal, build_mixer, CostDiagonal, CostMode, FeasibleIndices};
use qaoa_graphsim::harness::{run_experiment, ExperimentConfig};
use qaoa_graphsim::permutations::{factorial, kth_permutation};
use qaoa_graphsim::qaoa::{expectation, QaoaParams, Simulator, Variant};
use qaoa_graphsim::rng;

type Check = std::result::Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { name: "edge-overlap example", limit: Duration::from_secs(1), run: edge_overlap_example },
        Criterion { name: "tail table", limit: Duration::from_secs(1), run: tail_table },
        Criterion { name: "expm oracle equivalence", limit: Duration::from_secs(30), run: expm_oracle },
        Criterion { name: "spectral bound", limit: Duration::from_secs(10), run: spectral_bound },
        Criterion { name: "unitarity", limit: Duration::from_secs(60), run: unitarity },
        Criterion { name: "cost-diagonal oracle sweep", limit: Duration::from_secs(30), run: diagonal_sweep },
        Criterion { name: "nesting", limit: Duration::from_secs(120), run: nesting },
        Criterion { name: "qaoa beats random", limit: Duration::from_secs(600), run: beats_random },
        Criterion { name: "determinism", limit: Duration::from_secs(120), run: determinism },
        Criterion { name: "performance smoke", limit: Duration::from_secs(5), run: performance },
    ];
    let mut failures = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {:.0?}", c.limit)),
            Err(d) => (false, d),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} [{:>2}] {} ({:.2}s): {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_graphsim"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn random_state(q: u32, rng: &mut impl Rng) -> StateVector {
    let mut a: Vec<Complex64> = (0..1usize << q)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.iter_mut().for_each(|z| *z /= norm);
    StateVector::from_amplitudes(a).expect("power-of-two length")
}

fn edge_overlap_example() -> Check {
    let a = fixture("overlap_a.graph");
    let b = fixture("overlap_b.graph");
    let out = cli(&["oracle", a.to_str().unwrap(), b.to_str().unwrap()])?;
    let value: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("similarity "))
        .ok_or("no similarity line")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    ensure(value == 0.875, || format!("similarity {value}, expected 0.875"))?;
    Ok(format!("similarity {value}"))
}

fn tail_table() -> Check {
    let out = cli(&["tail", "--max-v", "12"])?;
    let rows: Vec<Vec<u64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().take(5).map(|x| x.parse().unwrap()).collect())
        .collect();
    let row = |v: u64| rows.iter().find(|r| r[0] == v).cloned().ok_or(format!("missing row {v}"));
    // (V, q, 2^q, 2^q - V!)
    for (v, q, size, diff) in [(2, 1, 2, 0), (8, 16, 65536, 25216), (10, 22, 4194304, 565504), (12, 29, 536870912, 57869312)] {
        let r = row(v)?;
        ensure(r[2] == q && r[3] == size && r[4] == diff, || format!("row {v}: {r:?}"))?;
    }
    let r = row(4)?;
    let f = factorial(4).unwrap();
    let q = (f as f64).log2().ceil() as u64;
    ensure(
        r[1] == f && r[2] == q && r[3] == 1 << q && r[4] == (1 << q) - f,
        || format!("row 4: {r:?}"),
    )?;
    Ok("rows 2, 8, 10, 12 exact; row 4 = (24, 5, 32, 8) by formula".into())
}

fn expm_oracle() -> Check {
    let mut rng = rng::seeded(0xE4);
    let mut worst = 0.0f64;
    for q in 1..=8u32 {
        let m = build_mixer(q, None).map_err(|e| e.to_string())?;
        let dense = m.to_dense();
        let n = 1usize << q;
        for _ in 0..50 {
            let beta = rng.random_range(0.0..TAU);
            let psi = random_state(q, &mut rng);
            let u = dense_expm(&DenseMatrix::from_real_scaled(n, &dense, Complex64::new(0.0, -beta)))
                .map_err(|e| e.to_string())?;
            let want = u.mul_vec(psi.amplitudes());
            let mut got = psi.clone();
            expm_action(&m, beta, &mut got).map_err(|e| e.to_string())?;
            let err = got
                .amplitudes()
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    ensure(worst <= 1e-10, || format!("max error {worst:.3e}"))?;
    Ok(format!("400 cases, max error {worst:.3e}"))
}

fn eigen_extremes(m: &qaoa_graphsim::hamiltonians::MixerMatrix) -> (f64, f64) {
    let n = m.dimension();
    let eig = DMatrix::from_row_slice(n, n, &m.to_dense()).symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn spectral_bound() -> Check {
    let mut worst = 0.0f64;
    for q in 1..=6u32 {
        let m = build_mixer(q, None).map_err(|e| e.to_string())?;
        let (lo, hi) = eigen_extremes(&m);
        let err = (lo + q as f64).abs().max((hi - q as f64).abs());
        ensure(err <= 1e-10, || format!("q={q}: extremes ({lo}, {hi})"))?;
        worst = worst.max(err);
    }
    let mut rng = rng::seeded(0x5B);
    let mut masked = 0;
    for q in 1..=6u32 {
        let n = 1u64 << q;
        let mut limits: Vec<u64> = vec![1, n / 2 + 1, n - 1];
        // feasible-index masks of the graph sizes that land on this q
        limits.extend((2..=5).map(|v| factorial(v).unwrap()).filter(|&f| f <= n));
        for limit in limits {
            let m = build_mixer(q, Some(&FeasibleIndices { limit })).map_err(|e| e.to_string())?;
            let (lo, hi) = eigen_extremes(&m);
            ensure(lo.abs().max(hi.abs()) <= q as f64 + 1e-10, || format!("q={q} limit={limit}: ({lo}, {hi})"))?;
            masked += 1;
        }
        for _ in 0..5 {
            let keep: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
            let mask = |i: usize| keep[i];
            let m = build_mixer(q, Some(&mask)).map_err(|e| e.to_string())?;
            let (lo, hi) = eigen_extremes(&m);
            ensure(lo.abs().max(hi.abs()) <= q as f64 + 1e-10, || format!("q={q} random mask: ({lo}, {hi})"))?;
            masked += 1;
        }
    }
    Ok(format!("unmasked extremes within {worst:.1e} of ±q; {masked} masked radii <= q"))
}

fn unitarity() -> Check {
    let mut rng = rng::seeded(0x0417);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let q = rng.random_range(1..=12u32);
        let p = rng.random_range(1..=4usize);
        let diag = CostDiagonal::new(
            (0..1usize << q).map(|_| rng.random_range(0..30) as f64).collect(),
            CostMode::EdgeDifference,
        )
        .unwrap();
        let npo = rng.random_bool(0.5);
        let (variant, mixer) = if npo {
            let limit = rng.random_range(1..=(1u64 << q));
            (Variant::Npo, build_mixer(q, Some(&FeasibleIndices { limit })).unwrap())
        } else {
            (Variant::Standard, build_mixer(q, None).unwrap())
        };
        let x: Vec<f64> = (0..variant.parameter_count(p)).map(|_| rng.random_range(0.0..TAU)).collect();
        let params = QaoaParams::from_flat(&x, p, variant).unwrap();
        let psi = Simulator::new(&diag, &mixer, variant)
            .and_then(|mut s| s.evolve(&params))
            .map_err(|e| e.to_string())?;
        worst = worst.max((psi.norm() - 1.0).abs());
    }
    ensure(worst <= 1e-9, || format!("max |norm - 1| = {worst:.3e}"))?;
    Ok(format!("200 draws, max |norm - 1| = {worst:.3e}"))
}

/// Mismatched slots under `perm`, written out from the definition.
fn recount(g1: &Graph, g2: &Graph, perm: &[usize]) -> usize {
    let v = g1.vertices();
    let mut d = 0;
    for i in 0..v {
        for j in 0..v {
            if !g1.is_directed() && j <= i {
                continue;
            }
            if g1.has_edge(i, j) != g2.has_edge(perm[i], perm[j]) {
                d += 1;
            }
        }
    }
    d
}

fn diagonal_sweep() -> Check {
    let mut checked = 0usize;
    let mut pairs = 0usize;
    for v in 2..=5usize {
        for directed in [true, false] {
            for seed in 0..10u64 {
                let g1 = erdos_renyi(v, directed, 1000 * v as u64 + seed);
                let kind = Deformation::ALL[seed as usize % Deformation::ALL.len()];
                let g2 = if seed % 2 == 0 { deform(&g1, kind, seed) } else { erdos_renyi(v, directed, 7 + seed) };
                let edge = build_cost_diagonal(&g1, &g2, CostMode::EdgeDifference).map_err(|e| e.to_string())?;
                let alt = build_cost_diagonal(&g1, &g2, CostMode::AlternatePenalty).map_err(|e| e.to_string())?;
                let feasible = factorial(v).unwrap();
                let mut min = usize::MAX;
                for k in 0..feasible {
                    let perm = kth_permutation(v, k).unwrap();
                    let d = recount(&g1, &g2, perm.as_slice());
                    ensure(edge.values()[k as usize] == d as f64, || format!("V={v} k={k}: {} vs {d}", edge.values()[k as usize]))?;
                    ensure(alt.values()[k as usize] == -(d as f64), || format!("V={v} k={k}: alternate entry"))?;
                    min = min.min(d);
                    checked += 1;
                }
                let best = brute_force_best(&g1, &g2).map_err(|e| e.to_string())?;
                ensure(best.difference == min, || format!("V={v}: brute force {} vs diagonal {min}", best.difference))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs, {checked} feasible entries"))
}

fn nesting() -> Check {
    let g1 = erdos_renyi(3, true, 31);
    let g2 = deform(&g1, Deformation::AddRemove, 32);
    let diag = build_cost_diagonal(&g1, &g2, CostMode::EdgeDifference).map_err(|e| e.to_string())?;
    let mixer = build_mixer(diag.qubits(), None).map_err(|e| e.to_string())?;
    let mut sim = Simulator::new(&diag, &mixer, Variant::Standard).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..9).map(|k| k as f64 * TAU / 9.0).collect();
    let mut f = |g: &[f64], b: &[f64]| -> Result<f64, String> {
        let p = QaoaParams::new(g.to_vec(), b.to_vec(), None).map_err(|e| e.to_string())?;
        sim.expectation(&p).map_err(|e| e.to_string())
    };
    let mut min1 = f64::INFINITY;
    let mut min2_sub = f64::INFINITY;
    for &g in &grid {
        for &b in &grid {
            min1 = min1.min(f(&[g], &[b])?);
            min2_sub = min2_sub.min(f(&[g, 0.0], &[b, 0.0])?);
        }
    }
    let mut min2 = f64::INFINITY;
    for &g1 in &grid {
        for &g2 in &grid {
            for &b1 in &grid {
                for &b2 in &grid {
                    min2 = min2.min(f(&[g1, g2], &[b1, b2])?);
                }
            }
        }
    }
    ensure(min2_sub == min1, || format!("padded p=2 min {min2_sub} != p=1 min {min1}"))?;
    ensure(min2 <= min1, || format!("p=2 min {min2} > p=1 min {min1}"))?;
    Ok(format!("min F1 = {min1:.6}, padded min F2 = {min2_sub:.6}, full min F2 = {min2:.6}"))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn beats_random() -> Check {
    let mut improvement = Vec::new();
    let mut comparison = Vec::new();
    for v in [3usize, 4] {
        let mut cfg = ExperimentConfig::default();
        cfg.graph.size = v;
        cfg.qaoa.depths = vec![2];
        cfg.qaoa.mode = CostMode::EdgeDifference;
        cfg.optimizer.methods = vec!["nelder_mead".into()];
        cfg.run.trials = 30;
        cfg.run.seed = 2024;
        cfg.run.record_timings = false;
        for r in run_experiment(&cfg).map_err(|e| e.to_string())? {
            let res = r.outcome.map_err(|e| format!("trial {}: {e}", r.trial))?;
            ensure(res.metrics.evaluations <= 200 * 2 * v, || "budget exceeded".into())?;
            improvement.push(res.metrics.expectation_improvement);
            comparison.push(res.metrics.classical_comparison);
        }
    }
    let n = improvement.len();
    let (mi, mc) = (median(improvement), median(comparison));
    ensure(n >= 50, || format!("only {n} trials"))?;
    ensure(mi > 0.0 && mc < 0.0, || format!("median improvement {mi:.4}, median comparison {mc:.4}"))?;
    Ok(format!("{n} trials, median improvement {mi:.4}, median classical comparison {mc:.4}"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"
[graph]
size = 3
directed = true
[qaoa]
depths = [1, 2]
[optimizer]
methods = ["nelder_mead", "direct", "random"]
scaling = 50
[run]
seed = 99
trials = 4
record_timings = false
"#,
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")] {
        let path = dir.path().join(name);
        cli(&["run", "--config", config.to_str().unwrap(), "--out", path.to_str().unwrap(), "--threads", threads])?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "repeat run differs".into())?;
    ensure(outputs[0] == outputs[2], || "run with 2 threads differs".into())?;
    let rows = outputs[0].iter().filter(|&&b| b == b'\n').count() - 1;
    Ok(format!("{rows} rows, {} bytes, identical across 3 runs", outputs[0].len()))
}

fn performance() -> Check {
    // V = 8 encodes into 16 qubits
    let g1 = erdos_renyi(8, true, 5);
    let g2 = deform(&g1, Deformation::AddRemove, 6);
    let diag = build_cost_diagonal(&g1, &g2, CostMode::EdgeDifference).map_err(|e| e.to_string())?;
    let mixer = build_mixer(diag.qubits(), None).map_err(|e| e.to_string())?;
    ensure(diag.qubits() == 16, || format!("q = {}", diag.qubits()))?;
    let mut sim = Simulator::new(&diag, &mixer, Variant::Standard).map_err(|e| e.to_string())?;
    let params = QaoaParams::new(vec![0.8, 1.9], vec![0.5, 0.5], None).unwrap();
    let t = Instant::now();
    let psi = sim.evolve(&params).map_err(|e| e.to_string())?;
    let evolve = t.elapsed();
    let f = expectation(&psi, &diag).map_err(|e| e.to_string())?;
    let (phase, mix) = (sim.phase_time(), sim.mixer_time());
    ensure(evolve < Duration::from_secs(5), || format!("evolve took {evolve:?}"))?;
    ensure(mix > phase, || format!("mixer {mix:?} <= phase {phase:?}"))?;
    Ok(format!(
        "evolve {:.3}s (mixer {:.3}s, phase {:.4}s), F = {f:.4}",
        evolve.as_secs_f64(),
        mix.as_secs_f64(),
        phase.as_secs_f64()
    ))
}
