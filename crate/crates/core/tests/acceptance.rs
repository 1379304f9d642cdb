//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use hwcert::chaining::{chaining_estimate, BetaTag, MethodTag};
use hwcert::chaos::{
    decoupling_check, prop31_check, single_matrix_tail_check, uniform_dominance_check,
    weak_strong_check, FTag, FitRule,
};
use hwcert::circulant::{
    build_vx, circ_convolve_direct, circ_convolve_fft, draw_omega, expected_energy_check,
    random_vx_family, rip_exact, rip_experiment, rip_sampled, CirculantOperator, SparseSpec,
};
use hwcert::experiment::{random_square_family, run, ExperimentConfig, RunOptions, RECORD_SUFFIX};
use hwcert::norms::DenseMatrix;
use hwcert::rng::{derive_seed, rng_from_seed};
use hwcert::stats::CompensatedSum;
use hwcert::weibull::{ks_distance, sample_ws, ws_moment, AlphaLaw};

const ALPHAS: [f64; 2] = [0.5, 1.0];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn sampler_exactness() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for alpha in ALPHAS {
        let start = Instant::now();
        let batch = sample_ws(&AlphaLaw::raw(alpha).unwrap(), 100_000, 11).unwrap();
        let ks = ks_distance(&batch);
        let secs = start.elapsed().as_secs_f64();
        ok &= ks < 0.01 && secs < 5.0;
        details.push(format!("alpha={alpha} ks={ks:.4} time={secs:.2}s"));
    }
    verdict(ok, details.join("; "))
}

fn moment_formula() -> Outcome {
    let start = Instant::now();
    let n = 1_000_000;
    let mut worst = 0.0f64;
    for alpha in ALPHAS {
        let batch = sample_ws(&AlphaLaw::raw(alpha).unwrap(), n, 12).unwrap();
        for p in [1.0, 2.0, 3.0, 4.0] {
            let mean = batch
                .values
                .iter()
                .map(|v| v.abs().powf(p))
                .collect::<CompensatedSum>()
                .value()
                / n as f64;
            let exact = ws_moment(alpha, p).unwrap();
            let se = ((ws_moment(alpha, 2.0 * p).unwrap() - exact * exact) / n as f64).sqrt();
            worst = worst.max((mean - exact).abs() / se);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 3.0 && secs < 30.0,
        format!("max |z|={worst:.2} time={secs:.2}s"),
    )
}

fn convolution_equivalence() -> Outcome {
    let mut rng = rng_from_seed(13);
    let mut worst = 0.0f64;
    for n in [8, 64, 1024] {
        for _ in 0..100 {
            let (z, x) = (random_vec(n, &mut rng), random_vec(n, &mut rng));
            let a = circ_convolve_fft(&z, &x).unwrap();
            let b = circ_convolve_direct(&z, &x).unwrap();
            worst = a
                .iter()
                .zip(&b)
                .fold(worst, |m, (p, q)| m.max((p - q).abs()));
        }
    }
    verdict(worst < 1e-9, format!("max deviation={worst:.2e}"))
}

fn vx_identity() -> Outcome {
    let mut rng = rng_from_seed(14);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = 2 + k % 31;
        let m = rng.random_range(1..=n);
        let omega = draw_omega(n, m, &mut rng).unwrap();
        let (x, eta) = (random_vec(n, &mut rng), random_vec(n, &mut rng));
        let lhs = build_vx(&x, &omega, n).unwrap().mul_vec(&eta).unwrap();
        let conv = circ_convolve_direct(&x, &eta).unwrap();
        let scale = 1.0 / (m as f64).sqrt();
        for (l, &w) in lhs.iter().zip(&omega) {
            worst = worst.max((l - scale * conv[w]).abs());
        }
    }
    verdict(worst < 1e-10, format!("max deviation={worst:.2e}"))
}

fn energy_identity() -> Outcome {
    let (n, m) = (128, 64);
    let mut rng = rng_from_seed(15);
    let x = unit(random_vec(n, &mut rng));
    let omega = draw_omega(n, m, &mut rng).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for alpha in ALPHAS {
        let law = AlphaLaw::standardized(alpha).unwrap();
        let op = CirculantOperator::random(&law, n, omega.clone(), &mut rng).unwrap();
        let r = expected_energy_check(&op, &x, &law, 100_000, 16).unwrap();
        ok &= r.relative_error() < 0.01;
        details.push(format!("alpha={alpha} rel err={:.4}", r.relative_error()));
    }
    verdict(ok, details.join("; "))
}

fn rip_oracle() -> Outcome {
    let spec = SparseSpec::new(2, 8).unwrap();
    let mut rng = rng_from_seed(17);
    let mut identical = true;
    for _ in 0..10 {
        let omega = draw_omega(8, 5, &mut rng).unwrap();
        let op =
            CirculantOperator::random(&AlphaLaw::standardized(1.0).unwrap(), 8, omega, &mut rng)
                .unwrap();
        let phi = op.matrix();
        let exact = rip_exact(&phi, spec).unwrap();
        let sampled = rip_sampled(&phi, spec, spec.support_count() as u64, 1).unwrap();
        identical &= exact.delta.to_bits() == sampled.delta.to_bits();
    }
    let diag = rip_exact(
        &DenseMatrix::diagonal(&[1.0, 0.5]).unwrap(),
        SparseSpec::new(1, 2).unwrap(),
    )
    .unwrap()
    .delta;
    verdict(
        identical && diag == 0.75,
        format!("bitwise equal={identical} diag delta={diag}"),
    )
}

fn rip_monotone_in_s() -> Outcome {
    let n = 12;
    let mut rng = rng_from_seed(18);
    let mut bad = 0;
    for k in 0..20 {
        let m = 4 + k % 8;
        let omega = draw_omega(n, m, &mut rng).unwrap();
        let op =
            CirculantOperator::random(&AlphaLaw::standardized(0.5).unwrap(), n, omega, &mut rng)
                .unwrap();
        let phi = op.matrix();
        let d: Vec<f64> = (1..=3)
            .map(|s| {
                rip_exact(&phi, SparseSpec::new(s, n).unwrap())
                    .unwrap()
                    .delta
            })
            .collect();
        if d.windows(2).any(|w| w[1] < w[0]) {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("non-monotone operators={bad}/20"))
}

fn single_matrix_exponent() -> Outcome {
    let a = DenseMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }).unwrap();
    let thresholds: Vec<f64> = (0..60).map(|k| 0.5 + k as f64 * 2.0).collect();
    let r = single_matrix_tail_check(
        &a,
        &AlphaLaw::raw(1.0).unwrap(),
        &thresholds,
        1_000_000,
        19,
        1e-3,
    )
    .unwrap();
    match r.far_tail_slope {
        Some(slope) => verdict((slope - 0.5).abs() <= 0.1, format!("slope={slope:.3}")),
        None => Err("no far-tail slope".into()),
    }
}

fn decoupling_dominance() -> Outcome {
    let law = AlphaLaw::standardized(1.0).unwrap();
    let c_grid: Vec<f64> = (-20..=20).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    let mut worst = 0.0f64;
    let mut missing = 0;
    let mut max_spread = 1.0f64;
    for fam_idx in 0..10 {
        let family = random_square_family(8, 5, derive_seed(20, fam_idx)).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for seed in 0..20 {
            let r = decoupling_check(
                &family,
                &law,
                FTag::Abs,
                &c_grid,
                2_000,
                derive_seed(21, fam_idx * 100 + seed),
            )
            .unwrap();
            match r.smallest_c {
                Some(c) => {
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
                None => missing += 1,
            }
        }
        worst = worst.max(hi);
        if lo.is_finite() {
            max_spread = max_spread.max(hi / lo);
        }
    }
    verdict(
        missing == 0 && worst <= 100.0,
        format!("largest C={worst:.3} missing={missing} max seed spread={max_spread:.2}"),
    )
}

fn weak_strong_ratio() -> Outcome {
    let n = 16;
    let mut rng = rng_from_seed(22);
    let basis: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let sets = [
        ("singleton", vec![basis[0].clone()]),
        ("basis", basis.clone()),
        (
            "random",
            (0..50).map(|_| unit(random_vec(n, &mut rng))).collect(),
        ),
    ];
    let mut worst = 0.0f64;
    for alpha in ALPHAS {
        let law = AlphaLaw::raw(alpha).unwrap();
        for (_, points) in &sets {
            let r = weak_strong_check(points, &law, &[2.0, 4.0, 8.0], 100_000, 23).unwrap();
            worst = worst.max(r.max_ratio);
        }
    }
    verdict(worst <= 10.0, format!("max ratio={worst:.3}"))
}

fn supremum_moment_ratio() -> Outcome {
    let spec = SparseSpec::new(2, 16).unwrap();
    let mut worst = 0.0f64;
    for alpha in ALPHAS {
        for seed in 0..20 {
            let (_, family) = random_vx_family(spec, 8, 10, derive_seed(24, seed)).unwrap();
            let r =
                prop31_check(&family, alpha, &[2.0, 4.0], 20_000, derive_seed(25, seed)).unwrap();
            worst = worst.max(r.max_ratio);
        }
    }
    verdict(worst <= 10.0, format!("max ratio={worst:.3}"))
}

fn uniform_tail_dominance() -> Outcome {
    let spec = SparseSpec::new(2, 32).unwrap();
    let (_, family) = random_vx_family(spec, 16, 50, 26).unwrap();
    let thresholds: Vec<f64> = (0..300).map(|k| 0.01 * 1.03f64.powi(k)).collect();
    let mut ok = true;
    let mut details = Vec::new();
    for alpha in ALPHAS {
        let law = AlphaLaw::standardized(alpha).unwrap();
        let est = chaining_estimate(
            &family,
            alpha,
            BetaTag::Infinity,
            MethodTag::EntropyIntegral,
        )
        .unwrap();
        let r = uniform_dominance_check(
            &family,
            &law,
            &est,
            &thresholds,
            100_000,
            27,
            1e-3,
            FitRule::Prefactor,
        )
        .unwrap();
        ok &= r.dominated();
        details.push(format!(
            "alpha={alpha} checked={} informative={} violations={}",
            r.checked,
            r.informative,
            r.violations.len()
        ));
    }
    verdict(ok, details.join("; "))
}

fn rip_phase() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for alpha in ALPHAS {
        let rows = rip_experiment(alpha, 64, &[8, 16, 32, 64], 2, 0.5, 200, 28).unwrap();
        ok &= rows.windows(2).all(|w| w[1].ci_high >= w[0].ci_low);
        let rates: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.rate())).collect();
        details.push(format!("alpha={alpha} rates=[{}]", rates.join(", ")));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    details.push(format!("time={secs:.1}s"));
    verdict(ok, details.join("; "))
}

fn determinism() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke");
    let mut differing = Vec::new();
    let mut compared = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let config = ExperimentConfig::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run(
            &config,
            &RunOptions {
                workers: 1,
                ..RunOptions::new(a.path())
            },
        )
        .unwrap();
        run(
            &config,
            &RunOptions {
                workers: 8,
                ..RunOptions::new(b.path())
            },
        )
        .unwrap();
        for file in &ra.result_files {
            if file.ends_with(RECORD_SUFFIX) {
                continue;
            }
            compared += 1;
            if fs::read(a.path().join(file)).unwrap() != fs::read(b.path().join(file)).unwrap() {
                differing.push(file.clone());
            }
        }
    }
    verdict(
        differing.is_empty() && compared > 0,
        format!("files compared={compared} differing={differing:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("sampler exactness", sampler_exactness),
        ("moment formula", moment_formula),
        ("convolution equivalence", convolution_equivalence),
        ("V_x identity", vx_identity),
        ("energy identity", energy_identity),
        ("RIP oracle", rip_oracle),
        ("RIP monotone in s", rip_monotone_in_s),
        ("single-matrix tail exponent", single_matrix_exponent),
        ("decoupling dominance", decoupling_dominance),
        ("weak-strong ratio", weak_strong_ratio),
        ("supremum moment ratio", supremum_moment_ratio),
        ("uniform tail dominance", uniform_tail_dominance),
        ("RIP phase behavior", rip_phase),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("{:>2} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {label}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label}: {detail}");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
