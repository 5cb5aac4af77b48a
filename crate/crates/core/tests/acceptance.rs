//! Acceptance suite. Prints one line per criterion and exits non-zero if any fails.
//!
//! Criterion 8 needs an NGSIM US-101 lane-2 field produced by `asm-tse ingest`
//! (67 x 2700, dx = 10 m, dt = 1 s, t_min = 0); point `ASM_TSE_NGSIM_FIELD` at it.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use adaptive_smoothing::admm::{lagrangian, update_weight, update_z_hat, AdmmState, MaskedObservations};
use adaptive_smoothing::cli::cmd_estimate;
use adaptive_smoothing::config::RunConfig;
use adaptive_smoothing::prelude::*;
use adaptive_smoothing::synth::SplitMix64;
use ndarray::{s, Array2};

use common::*;

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

/// Converged solves collected from the other criteria, for criterion 3.
#[derive(Default)]
struct Solves {
    runs: Vec<(AdmmResult, PrioriBank)>,
}

impl Solves {
    fn record(&mut self, res: &AdmmResult, bank: &PrioriBank) {
        if res.converged {
            self.runs.push((res.clone(), bank.clone()));
        }
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn synthetic_config() -> RunConfig {
    RunConfig::load(&repo_root().join("configs/synthetic.toml")).expect("configs/synthetic.toml")
}

fn synthetic_truth() -> SpeedField {
    generate_field(&synthetic_config().synthetic().unwrap()).unwrap()
}

// 1. ADMM objective against the exact per-cell optimum on 100 random 4x5 instances.
fn oracle_optimality(solves: &mut Solves) -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x4_5);
    // the default cap of 5000 iterations is too short for speed-scaled data at beta = 1
    let params = AdmmParams {
        max_iters: 200_000,
        ..AdmmParams::default()
    };
    let (mut worst, mut unconverged, mut max_iters) = (0.0f64, 0, 0);
    for _ in 0..100 {
        let inst = two_field_instance(&mut rng, 4, 5);
        let res = solve(&inst.observed, &inst.mask, &inst.bank, &params).unwrap();
        let oracle = brute_force_weights(&inst.observed, &inst.mask, &inst.bank).unwrap();
        let best = adaptive_smoothing::admm::objective(&oracle, &inst.bank, &inst.observed, &inst.mask).unwrap();
        worst = worst.max((res.objective - best).abs());
        max_iters = max_iters.max(res.iters);
        if !res.converged {
            unconverged += 1;
        }
        solves.record(&res, &inst.bank);
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-6 && unconverged == 0 && elapsed < Duration::from_secs(10),
        format!(
            "max |obj - oracle| = {worst:.2e} (tol 1e-6), unconverged {unconverged}/100, max iters {max_iters}, {:.2} s (limit 10 s)",
            elapsed.as_secs_f64()
        ),
    )
}

// 2. Central-difference gradient of the augmented Lagrangian after each block update.
fn stationarity() -> Outcome {
    let mut rng = SplitMix64::new(0x3_3);
    let h = 1e-6;
    let (mut worst_z, mut worst_w, mut worst_printed) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..40 {
        let m = 2 + case % 2;
        let grid = GridSpec::new(0.0, 0.0, 10.0, 1.0, 3, 3).unwrap();
        let fields: Vec<SpeedField> = (0..m).map(|_| field(grid, random_matrix(&mut rng, (3, 3), 0.0, 10.0))).collect();
        let bank = PrioriBank::from_fields((0..m).map(|i| if i % 2 == 0 { 80.0 } else { -15.0 }).collect(), fields).unwrap();
        let mask = random_mask(&mut rng, grid, 0.6);
        let observed = apply_mask(&field(grid, random_matrix(&mut rng, (3, 3), 0.0, 10.0)), &mask).unwrap();
        let obs = MaskedObservations::new(&observed, &mask).unwrap();
        let beta = uniform(&mut rng, 0.5, 2.0);
        let params = AdmmParams { beta, ..AdmmParams::default() };
        let weights = WeightBank::new((0..m).map(|_| random_matrix(&mut rng, (3, 3), 0.0, 1.0)).collect()).unwrap();
        let mut state = AdmmState::from_parts(
            random_matrix(&mut rng, (3, 3), 0.0, 10.0),
            weights,
            random_matrix(&mut rng, (3, 3), -1.0, 1.0),
            random_matrix(&mut rng, (3, 3), -1.0, 1.0),
        )
        .unwrap();

        state.z_hat = update_z_hat(&state, &bank, &obs, &params).unwrap();
        let g = central_gradient(&state.z_hat, h, |zh| {
            let probe = AdmmState::from_parts(zh.clone(), state.weights.clone(), state.lambda1.clone(), state.lambda2.clone()).unwrap();
            lagrangian(&probe, &bank, &obs, beta).unwrap()
        });
        worst_z = worst_z.max(max_abs(&g));

        for i in 0..m {
            let wi = update_weight(i, &state, &bank, &params).unwrap();
            let with_block = |w: &Array2<f64>| {
                let mut all = state.weights.clone().into_inner();
                all[i] = w.clone();
                AdmmState::from_parts(state.z_hat.clone(), WeightBank::new(all).unwrap(), state.lambda1.clone(), state.lambda2.clone())
                    .unwrap()
            };
            let grad_at = |w: &Array2<f64>| {
                central_gradient(w, h, |probe| lagrangian(&with_block(probe), &bank, &obs, beta).unwrap())
            };
            worst_w = worst_w.max(max_abs(&grad_at(&wi)));
            // the same update with -Λ1 in place of -Λ2
            let zi = bank.field(i);
            let printed = &wi + &((&state.lambda2 - &state.lambda1) / &(zi.mapv(|z| z * z + 1.0) * beta));
            worst_printed = worst_printed.max(max_abs(&grad_at(&printed)));
            state = with_block(&wi);
        }
    }
    verdict(
        worst_z < 1e-6 && worst_w < 1e-6,
        format!(
            "max |grad| after Z-hat update {worst_z:.2e}, after W updates {worst_w:.2e} (tol 1e-6); the -Λ1 variant leaves {worst_printed:.2e}"
        ),
    )
}

// 3. Sum-to-one feasibility and bit-exact fused output on every converged solve.
fn feasibility(solves: &Solves) -> Outcome {
    if solves.runs.is_empty() {
        return Outcome::Fail("no converged solves to check".into());
    }
    let mut worst_rms = 0.0f64;
    let mut mismatched = 0;
    for (res, bank) in &solves.runs {
        worst_rms = worst_rms.max(res.weights.sum_violation_rms());
        if res.fused_field.values() != fused_reference(&res.weights, bank) {
            mismatched += 1;
        }
    }
    verdict(
        worst_rms < 1e-4 && mismatched == 0,
        format!(
            "{} converged solves, max RMS(ΣW - J) {worst_rms:.2e} (tol 1e-4), fused mismatches {mismatched}",
            solves.runs.len()
        ),
    )
}

// 4. Windowed smoother against the all-pairs reference on 5x5 grids.
fn kernel_equivalence() -> Outcome {
    let mut rng = SplitMix64::new(0x5_5);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for shape in [KernelShape::Exponential, KernelShape::Gaussian] {
        for c in [80.0, -15.0] {
            for _ in 0..10 {
                let grid = GridSpec::new(0.0, 0.0, uniform(&mut rng, 5.0, 50.0), uniform(&mut rng, 0.5, 5.0), 5, 5).unwrap();
                let mask = random_mask(&mut rng, grid, 0.4);
                let observed = apply_mask(&field(grid, random_matrix(&mut rng, (5, 5), 5.0, 100.0)), &mask).unwrap();
                let params = KernelParams::new(
                    uniform(&mut rng, 0.3, 2.0) * grid.dx,
                    uniform(&mut rng, 0.3, 2.0) * grid.dt,
                    shape,
                    uniform(&mut rng, 1.0, 6.0),
                )
                .unwrap();
                let got = smooth_along_wave(&observed, &mask, c, &params).unwrap();
                let want = kernel_reference(&observed, &mask, c, &params);
                for (a, b) in got.values().iter().zip(want.iter()) {
                    worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
                }
                cases += 1;
            }
        }
    }
    verdict(worst <= 1e-10, format!("{cases} cases, max relative deviation {worst:.2e} (tol 1e-10)"))
}

// 5. Synthetic end-to-end: ADMM no worse than ASM, both below 0.25.
fn synthetic_end_to_end(solves: &mut Solves) -> Outcome {
    let start = Instant::now();
    let cfg = synthetic_config();
    let est_cfg = cfg.estimation().unwrap();
    let truth = synthetic_truth();
    let rows = equally_spaced_detectors(truth.grid(), cfg.detectors.unwrap()).unwrap();
    let mask = detector_mask(truth.grid(), &rows).unwrap();
    let observed = apply_mask(&truth, &mask).unwrap();
    let asm = estimate(&observed, &mask, Method::Asm, &est_cfg).unwrap();
    let admm = estimate(&observed, &mask, Method::Admm, &est_cfg).unwrap();
    let res = admm.admm.as_ref().unwrap();
    solves.record(res, &admm.bank);
    let e_asm = relative_error(&asm.field, &truth).unwrap();
    let e_admm = relative_error(&admm.field, &truth).unwrap();
    let elapsed = start.elapsed();
    verdict(
        e_admm <= e_asm && e_asm < 0.25 && e_admm < 0.25 && elapsed < Duration::from_secs(60),
        format!(
            "m_r ASM {e_asm:.5}, ADMM {e_admm:.5} (converged {}, {} iters), {:.2} s (limit 60 s)",
            res.converged,
            res.iters,
            elapsed.as_secs_f64()
        ),
    )
}

// 6. Adding a second wave-speed pair does not raise the ADMM objective.
fn multi_wave_speed() -> Outcome {
    let cfg = synthetic_config();
    let truth = synthetic_truth();
    let rows = equally_spaced_detectors(truth.grid(), cfg.detectors.unwrap()).unwrap();
    let mask = detector_mask(truth.grid(), &rows).unwrap();
    let points = wavespeed_sweep(&truth, &mask, &[(-15.0, 80.0), (-12.5, 70.0)], &cfg.estimation().unwrap()).unwrap();
    let (one, two) = (&points[0], &points[1]);
    verdict(
        two.objective <= one.objective,
        format!(
            "objective 1 pair {:.4e} (converged {}), 2 pairs {:.4e} (converged {}); m_r {:.5} -> {:.5}",
            one.objective, one.converged, two.objective, two.converged, one.relative_error, two.relative_error
        ),
    )
}

// 7. Six detectors beat two for both methods.
fn coverage() -> Outcome {
    let cfg = synthetic_config();
    let est_cfg = cfg.estimation().unwrap();
    let truth = synthetic_truth();
    let mut ok = true;
    let mut detail = Vec::new();
    for method in [Method::Asm, Method::Admm] {
        let pts = coverage_sweep(&truth, &[2, 6], method, &est_cfg).unwrap();
        ok &= pts[1].relative_error < pts[0].relative_error;
        detail.push(format!(
            "{method} m_r(2) {:.5} -> m_r(6) {:.5}",
            pts[0].relative_error, pts[1].relative_error
        ));
    }
    verdict(ok, detail.join(", "))
}

fn time_window(f: &SpeedField, t0: f64, t1: f64) -> SpeedField {
    let g = *f.grid();
    let k0 = ((t0 - g.t_min) / g.dt).round() as usize;
    let k1 = ((t1 - g.t_min) / g.dt).round() as usize;
    let grid = GridSpec::new(g.x_min, g.t_min + k0 as f64 * g.dt, g.dx, g.dt, g.n_x, k1 - k0).unwrap();
    SpeedField::new(grid, f.values().slice(s![.., k0..k1]).to_owned()).unwrap()
}

// 8. NGSIM US-101 lane 2 against the published relative errors.
fn ngsim() -> Outcome {
    let Some(path) = std::env::var_os("ASM_TSE_NGSIM_FIELD") else {
        return Outcome::Skip("set ASM_TSE_NGSIM_FIELD to an ingested 67x2700 lane-2 field".into());
    };
    let full = match adaptive_smoothing::io::read_field(Path::new(&path)) {
        Ok(f) => f,
        Err(e) => return Outcome::Fail(format!("cannot read {}: {e}", Path::new(&path).display())),
    };
    let cfg = EstimationConfig::default();
    let cases = [("case 1", 100.0, 700.0, 0.12417, 0.12054), ("case 2", 1400.0, 2000.0, 0.19843, 0.19637)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, t0, t1, want_asm, want_admm) in cases {
        let truth = time_window(&full, t0, t1);
        let rows = equally_spaced_detectors(truth.grid(), 4).unwrap();
        let mask = detector_mask(truth.grid(), &rows).unwrap();
        let observed = apply_mask(&truth, &mask).unwrap();
        for (method, want) in [(Method::Asm, want_asm), (Method::Admm, want_admm)] {
            let got = relative_error(&estimate(&observed, &mask, method, &cfg).unwrap().field, &truth).unwrap();
            ok &= (got - want).abs() <= 0.01;
            detail.push(format!("{name} {method} {got:.5} (target {want})"));
        }
    }
    verdict(ok, detail.join(", "))
}

// 9. Two identical `estimate` runs write identical files.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let truth_path = dir.path().join("truth.txt");
    adaptive_smoothing::io::write_field(&truth_path, &synthetic_truth()).unwrap();
    let run = |name: &str| {
        let cfg = RunConfig {
            field: Some(truth_path.clone()),
            out: Some(dir.path().join(name)),
            trace: Some(true),
            ..synthetic_config()
        };
        cmd_estimate(&cfg).unwrap().dir
    };
    let (a, b) = (run("a"), run("b"));
    let files = ["estimate.txt", "weights_1.txt", "weights_2.txt", "mask.txt", "report.tsv", "trace.tsv"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} output files byte-identical", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let mut solves = Solves::default();
    let results = [
        (1, "oracle optimality (m=2)", oracle_optimality(&mut solves)),
        (2, "stationarity of closed-form updates", stationarity()),
        (4, "kernel oracle equivalence", kernel_equivalence()),
        (5, "synthetic end-to-end", synthetic_end_to_end(&mut solves)),
        (3, "constraint feasibility", feasibility(&solves)),
        (6, "multi-wave-speed objective", multi_wave_speed()),
        (7, "coverage sweep", coverage()),
        (8, "NGSIM reproduction", ngsim()),
        (9, "determinism", determinism()),
    ];
    let mut sorted: Vec<_> = results.into_iter().collect();
    sorted.sort_by_key(|r| r.0);
    let mut failed = 0;
    println!();
    for (n, name, outcome) in &sorted {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n} [{tag}] {name}: {detail}");
    }
    println!("\nacceptance: {} passed, {failed} failed, {} skipped", sorted.iter().filter(|r| matches!(r.2, Outcome::Pass(_))).count(), sorted.iter().filter(|r| matches!(r.2, Outcome::Skip(_))).count());
    if failed > 0 {
        std::process::exit(1);
    }
}
