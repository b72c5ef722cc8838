//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use probfn::case_study::run_energy;
use probfn::config::RunConfig;
use probfn::gaussian_radial::{DirectionSet, GaussianModel, SamplingMethod};
use probfn::oracles::{Ball, ConvexSetOracle, HalfSpace, HyperbolicInequality, HyperbolicSet, Slab};
use probfn::prob::{Constraints, Evaluator, TiePolicy};
use probfn::radial::RootOptions;
use probfn::verify::{
    continuity_failures, crn_identity_error, enlargement_sequence, hyperbolic_derivatives, hyperbolic_rejection_mc,
    monotone_past_root_failures, nesting_failures, unique_root_failures, CRN_FIXTURES, ENLARGEMENTS,
};
use probfn::config::Fixture;

struct Outcome {
    passed: bool,
    detail: String,
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() <= limit_s
}

fn criterion_1_halfspace() -> Outcome {
    let nd = Normal::standard();
    let mut passed = true;
    let mut parts = Vec::new();
    for m in [2usize, 4, 8] {
        let t = Instant::now();
        let sys = HalfSpace::axis(m);
        let model = GaussianModel::standard(m).unwrap();
        let dirs = DirectionSet::sample(m, 10_000, 2024, SamplingMethod::Qmc).unwrap();
        let ev = Evaluator::new(Constraints::Inequality(&sys), &model, &dirs, RootOptions::default()).unwrap();
        let g = ev.gradient(&[1.0], TiePolicy::Average).unwrap();
        let dt = t.elapsed();
        let ev_err = (g.value - nd.cdf(1.0)).abs();
        let eg_err = (g.gradient[0] - nd.pdf(1.0)).abs();
        passed &= ev_err <= 1e-3 && eg_err <= 1e-3 && within(dt, 5.0);
        parts.push(format!("m={m} |Δφ|={ev_err:.1e} |Δφ'|={eg_err:.1e} {:.2}s", dt.as_secs_f64()));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn criterion_2_slab() -> Outcome {
    let nd = Normal::standard();
    let t = Instant::now();
    let sys = Slab::level(vec![1.0, 0.0]).unwrap();
    let model = GaussianModel::standard(2).unwrap();
    let dirs = DirectionSet::sample(2, 10_000, 2024, SamplingMethod::Qmc).unwrap();
    let ev = Evaluator::new(Constraints::Inequality(&sys), &model, &dirs, RootOptions::default()).unwrap();
    let g = ev.gradient(&[-1.0], TiePolicy::Average).unwrap();
    let dt = t.elapsed();
    let e2 = std::f64::consts::E.powi(2);
    let tau = (e2 - 1.0).sqrt();
    let exact = 2.0 * nd.cdf(tau) - 1.0;
    // d/dx [2Φ(τ(x)) - 1] with τ(x) = sqrt(e^{-2x} - 1)
    let exact_grad = 2.0 * nd.pdf(tau) * (-e2 / tau);
    let ev_err = (g.value - exact).abs();
    let eg_err = (g.gradient[0] - exact_grad).abs();
    Outcome {
        passed: ev_err <= 1e-3 && eg_err <= 1e-3 && within(dt, 5.0),
        detail: format!("|Δφ|={ev_err:.1e} |Δφ'|={eg_err:.1e} {:.2}s", dt.as_secs_f64()),
    }
}

fn criterion_3_crn() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    let fixtures = CRN_FIXTURES.iter().copied().chain([(Fixture::Infinite, 0.0)]);
    for (k, (f, eps)) in fixtures.enumerate() {
        let e = crn_identity_error(f, eps, 10_000, 10, 700 + k as u64).unwrap();
        worst = worst.max(e);
        parts.push(format!("{f}={e:.0e}"));
    }
    let dt = t.elapsed();
    Outcome {
        passed: worst <= 1e-6 && within(dt, 30.0),
        detail: format!("max rel={worst:.1e} [{}] {:.1}s", parts.join(" "), dt.as_secs_f64()),
    }
}

fn criterion_4_lemmas() -> Outcome {
    let suites: [(&str, fn(&mut ChaCha8Rng, usize) -> probfn::Result<usize>); 4] = [
        ("monotone", monotone_past_root_failures),
        ("unique-root", unique_root_failures),
        ("nesting", nesting_failures),
        ("continuity", continuity_failures),
    ];
    let mut total = 0;
    let mut parts = Vec::new();
    for (k, (name, f)) in suites.into_iter().enumerate() {
        let failures = f(&mut ChaCha8Rng::seed_from_u64(4000 + k as u64), 100).unwrap();
        total += failures;
        parts.push(format!("{name}={failures}/100"));
    }
    Outcome { passed: total == 0, detail: parts.join(" ") }
}

fn criterion_5_enlargement() -> Outcome {
    let model = GaussianModel::standard(2).unwrap();
    let dirs = DirectionSet::sample(2, 10_000, 2024, SamplingMethod::Qmc).unwrap();
    let ball = Ball::new(vec![0.0, 0.0]);
    let cases: [(&str, &dyn ConvexSetOracle, Option<&dyn probfn::oracles::InequalitySystem>); 2] =
        [("ball", &ball, None), ("hyperbolic", &HyperbolicSet, Some(&HyperbolicInequality))];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, set, exact) in cases {
        let (vals, phi) = enlargement_sequence(set, exact, &model, &[1.0], &ENLARGEMENTS, &dirs).unwrap();
        let monotone = vals.windows(2).all(|w| w[1] <= w[0]);
        let gap = (vals[3] - phi).abs();
        passed &= monotone && gap <= 2e-3;
        parts.push(format!("{name}: nonincreasing={monotone} |φ_0.001-φ|={gap:.1e}"));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn criterion_6_example() -> Outcome {
    let t = Instant::now();
    let (p_mc, se) = hyperbolic_rejection_mc(1.0, 1_000_000, 6);
    let model = GaussianModel::standard(2).unwrap();
    let dirs = DirectionSet::sample(2, 10_000, 2024, SamplingMethod::Qmc).unwrap();
    let phi = Evaluator::new(Constraints::Inequality(&HyperbolicInequality), &model, &dirs, RootOptions::default())
        .unwrap()
        .probability(&[1.0])
        .unwrap();
    let z = (phi - p_mc).abs() / se;
    let (d, d_se) = hyperbolic_derivatives(1.0, 10_000, &[61, 62, 63, 64, 65]).unwrap();
    let spread = d.iter().copied().fold(f64::MIN, f64::max) - d.iter().copied().fold(f64::MAX, f64::min);
    let se_max = d_se.iter().copied().fold(0.0, f64::max);
    let dt = t.elapsed();
    Outcome {
        passed: z <= 3.0 && spread <= 3.0 * se_max && within(dt, 60.0),
        detail: format!(
            "φ̂={phi:.5} mc={p_mc:.5} ({z:.2} SE); φ' spread={spread:.1e} <= 3·{se_max:.1e}; {:.1}s",
            dt.as_secs_f64()
        ),
    }
}

fn criterion_7_energy() -> Outcome {
    let t = Instant::now();
    let run = run_energy(&RunConfig::default());
    let dt = t.elapsed();
    match run {
        Ok(run) => {
            let v = run.validation.value;
            let st = &run.stationarity;
            Outcome {
                passed: (0.79..=0.81).contains(&v) && st.passed && within(dt, 300.0),
                detail: format!(
                    "status={:?} iterations={} validated φ={v:.4} cost={:.3} fd={:.1e} kkt={:.1e} {:.1}s",
                    run.status(),
                    run.trace.records.len(),
                    run.cost,
                    st.fd_rel_err,
                    st.kkt_residual,
                    dt.as_secs_f64()
                ),
            }
        }
        Err(e) => Outcome { passed: false, detail: format!("solver error: {e}") },
    }
}

fn run_cli(args: &[&str], out: &Path) -> (Vec<u8>, Vec<(String, Vec<u8>)>) {
    let o = Command::new(env!("CARGO_BIN_EXE_probfn"))
        .args(args)
        .args(["--threads", "1", "--out", out.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<_> = fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    (o.stdout, files)
}

fn criterion_8_determinism() -> Outcome {
    let commands: [&[&str]; 4] = [
        &["eval", "--fixture", "hyperbolic", "--eps", "0.01"],
        &["grad", "--fixture", "slab", "--check-fd"],
        &["solve-energy"],
        &["verify", "--quick"],
    ];
    let mut identical = 0;
    for args in commands {
        let dir = tempfile::tempdir().unwrap();
        let a = run_cli(args, &dir.path().join("a"));
        let b = run_cli(args, &dir.path().join("b"));
        identical += usize::from(a == b && !a.1.is_empty());
    }
    Outcome {
        passed: identical == commands.len(),
        detail: format!("{identical}/{} commands byte-identical", commands.len()),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 analytic half-space", criterion_1_halfspace),
        ("2 analytic slab", criterion_2_slab),
        ("3 CRN gradient identity", criterion_3_crn),
        ("4 radial-function lemmas", criterion_4_lemmas),
        ("5 enlargement limit", criterion_5_enlargement),
        ("6 hyperbolic example", criterion_6_example),
        ("7 energy case study", criterion_7_energy),
        ("8 determinism", criterion_8_determinism),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let o = f();
        println!("criterion {name}: {} — {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
