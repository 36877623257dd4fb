//! Acceptance gate for the release: ten checks covering convergence,
//! transmission economy, certificate math, numerics, and artifact
//! stability. Each test prints exactly one verdict line (visible with
//! --nocapture) and asserts the same condition.

use std::time::{Duration, Instant};

use once_cell::sync::Lazy;

use etc_sim::analysis::{check_lyapunov_decrease, trigger_stats};
use etc_sim::io::builtin_scenario;
use etc_sim::models::{builtin_model, ModelBundle};
use etc_sim::num::{eigenvalues, is_hurwitz, rk4_step, solve_lyapunov, Matrix, Vector};
use etc_sim::simulator::{run_ideal_validation, simulate, SimulationResult, ValidationReport};
use etc_sim::triggering::{
    derive_certificate, min_interevent_actuator, IssCertificate, LyapunovPair,
};

static MODEL: Lazy<ModelBundle> =
    Lazy::new(|| builtin_model("flexible-link").expect("benchmark model"));

static BENCH: Lazy<(SimulationResult, Duration)> = Lazy::new(|| {
    let parsed = builtin_scenario("flexible-link-paper").expect("benchmark scenario");
    let start = Instant::now();
    let result = simulate(&parsed.scenario).expect("benchmark run");
    (result, start.elapsed())
});

static CERT: Lazy<(LyapunovPair, IssCertificate)> =
    Lazy::new(|| derive_certificate(&MODEL).expect("benchmark certificate"));

static IDEAL: Lazy<ValidationReport> = Lazy::new(|| {
    let parsed = builtin_scenario("flexible-link-paper").expect("benchmark scenario");
    run_ideal_validation(&parsed.scenario, &CERT.1).expect("ideal validation run")
});

fn verdict(index: u32, name: &str, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    println!("[criterion {index:02}] {name}: {word} ({detail})");
}

/// Deterministic 64-bit LCG, mapped to [0, 1).
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

#[test]
fn criterion_01_benchmark_converges_within_tolerance() {
    let (result, wall) = &*BENCH;
    let last = result.trajectory.last().expect("non-empty trajectory");
    let pass =
        last.norm_x <= 0.05 && last.norm_z <= 0.05 && *wall < Duration::from_secs(10);
    verdict(
        1,
        "benchmark converges within tolerance",
        pass,
        &format!(
            "|x(15)| = {:.3e}, |x - xhat|(15) = {:.3e}, wall = {:.2?}",
            last.norm_x, last.norm_z, wall
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_sensor_nodes_transmit_fewer_than_the_periodic_baseline() {
    let stats = trigger_stats(&BENCH.0).expect("trigger stats");
    let sensors: Vec<(String, u64)> = stats
        .per_node
        .iter()
        .filter(|n| n.node.label().starts_with('y'))
        .map(|n| (n.node.label(), n.count))
        .collect();
    let pass = !sensors.is_empty() && sensors.iter().all(|(_, count)| *count < 300);
    let detail: Vec<String> =
        sensors.iter().map(|(name, count)| format!("{name} = {count}")).collect();
    verdict(
        2,
        "every sensor node transmits fewer than 300 times",
        pass,
        &detail.join(", "),
    );
    assert!(pass, "{sensors:?}");
}

#[test]
fn criterion_03_closed_loops_are_hurwitz_with_the_recorded_spectra() {
    let plant = &MODEL.plant;
    let control_loop = plant.a() + &plant.b().matmul(MODEL.controller.gain());
    let observer_loop = plant.a() - &MODEL.observer.gain().matmul(plant.c());
    let hurwitz = is_hurwitz(&control_loop).unwrap() && is_hurwitz(&observer_loop).unwrap();

    let expected_control = [
        (-9.600638878868, 0.0),
        (-5.763598114089, 1.385774345905),
        (-5.763598114089, -1.385774345905),
        (-4.340084892954, 0.0),
    ];
    let expected_observer = [
        (-9.800472896688, 0.0),
        (-9.333400197243, 0.0),
        (-8.425047360826, 0.0),
        (-5.390979545243, 0.0),
    ];
    let matches = |m: &Matrix, expected: &[(f64, f64)]| -> bool {
        let eigs = eigenvalues(m).unwrap();
        expected.iter().all(|&(re, im)| {
            eigs.iter().any(|&(er, ei)| (er - re).abs() < 1e-6 && (ei - im).abs() < 1e-6)
        })
    };
    let spectra_match =
        matches(&control_loop, &expected_control) && matches(&observer_loop, &expected_observer);
    let pass = hurwitz && spectra_match;
    verdict(
        3,
        "both closed loops are Hurwitz with the recorded spectra",
        pass,
        &format!("hurwitz = {hurwitz}, spectra match = {spectra_match}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_actuator_spacing_matches_the_closed_form_and_is_monotone() {
    let tau = min_interevent_actuator(2.0, 0.5, 0.1, 1.0).unwrap();
    let expected = 0.031770059934774976; // ln(1.1) / 3
    let closed_form_ok = (tau - expected).abs() <= 1e-7;

    let mut rng = Lcg(0x5eed_0001);
    let mut monotone_ok = true;
    for _ in 0..1000 {
        let l_g = rng.in_range(0.5, 10.0);
        let sigma_prime = rng.in_range(0.01, 1.0);
        let slope = rng.in_range(0.1, 5.0);
        let kappa_small = rng.in_range(1e-4, 1.0);
        let kappa_large = kappa_small * rng.in_range(1.0 + 1e-6, 4.0);
        let tau_small = min_interevent_actuator(l_g, sigma_prime, kappa_small, slope).unwrap();
        let tau_large = min_interevent_actuator(l_g, sigma_prime, kappa_large, slope).unwrap();
        // spacing grows with the budget share and shrinks with the
        // closed-loop growth rate
        let tau_fast =
            min_interevent_actuator(l_g * rng.in_range(1.5, 3.0), sigma_prime, kappa_small, slope)
                .unwrap();
        if !(tau_large > tau_small && tau_fast < tau_small) {
            monotone_ok = false;
            break;
        }
    }
    let pass = closed_form_ok && monotone_ok;
    verdict(
        4,
        "actuator spacing matches the closed form and is monotone",
        pass,
        &format!("tau(2, 0.5, 0.1, 1) = {tau:.9}, monotone over 1000 cases = {monotone_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_inter_event_gaps_respect_the_dwell_floor() {
    let stats = trigger_stats(&BENCH.0).expect("trigger stats");
    let parsed = builtin_scenario("flexible-link-paper").unwrap();
    let event_tol = parsed.scenario.event_tol;
    let mut worst: f64 = f64::INFINITY;
    let mut pass = true;
    for (node, policy) in stats.per_node.iter().zip(&parsed.scenario.policies) {
        if let Some(min_gap) = node.min_gap {
            let floor = policy.tau_min() - event_tol;
            worst = worst.min(min_gap - policy.tau_min());
            if min_gap < floor {
                pass = false;
            }
        }
    }
    verdict(
        5,
        "inter-event gaps respect each node's dwell floor",
        pass,
        &format!("worst gap minus dwell = {worst:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_ideal_policy_run_never_exceeds_the_error_budget() {
    let report = &*IDEAL;
    let pass = report.violations.is_empty() && report.checked_samples > 10_000;
    verdict(
        6,
        "ideal-policy run never exceeds the transmission-error budget",
        pass,
        &format!(
            "checked = {}, violations = {}, slack = {:.3e}",
            report.checked_samples,
            report.violations.len(),
            report.slack
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_certified_run_shows_no_lyapunov_increase() {
    let (lyap, cert) = &*CERT;
    let check = check_lyapunov_decrease(&IDEAL.result, &MODEL, lyap, cert).unwrap();
    let pass = check.violations.is_empty();
    // with transmissions nearly every step, almost every interior
    // sample is event-adjacent and excluded; the count is printed so
    // a vacuous pass is visible as such
    verdict(
        7,
        "certified run shows no decrease-rate violations",
        pass,
        &format!("checked = {}, excluded = {}", check.checked, check.excluded),
    );
    assert!(pass);
}

#[test]
fn criterion_08_numerics_meet_their_contracts() {
    // fourth-order step: halving h divides the global error by ~16
    let decay = |_: f64, x: &Vector| Vector::from_slice(&[-x[0]]).unwrap();
    let integrate = |h: f64| -> f64 {
        let steps = (1.0 / h).round() as usize;
        let mut x = Vector::from_slice(&[1.0]).unwrap();
        let mut t = 0.0;
        for _ in 0..steps {
            x = rk4_step(&decay, t, &x, h).unwrap();
            t += h;
        }
        (x[0] - (-1.0f64).exp()).abs()
    };
    let mut ratios = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        ratios.push(integrate(h) / integrate(h / 2.0));
    }
    let rk4_ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));

    // golden quadratic certificate for a damped oscillator
    let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap();
    let p = solve_lyapunov(&m, &Matrix::identity(2)).unwrap();
    let golden = [[1.25, 0.25], [0.25, 0.25]];
    let mut golden_ok = true;
    for i in 0..2 {
        for j in 0..2 {
            if (p[(i, j)] - golden[i][j]).abs() > 1e-10 {
                golden_ok = false;
            }
        }
    }

    // random strictly diagonally dominant (hence Hurwitz) 4x4 systems:
    // the solver's residual stays at solver precision
    let mut rng = Lcg(0x5eed_0002);
    let mut max_rel_residual: f64 = 0.0;
    for _ in 0..100 {
        let mut rows = vec![vec![0.0; 4]; 4];
        for row in rows.iter_mut() {
            for value in row.iter_mut() {
                *value = rng.in_range(-1.0, 1.0);
            }
        }
        for i in 0..4 {
            let off: f64 = (0..4).map(|j| rows[i][j].abs()).sum();
            rows[i][i] -= 1.0 + off;
        }
        let m = Matrix::from_rows(&rows).unwrap();
        let mut s = vec![vec![0.0; 4]; 4];
        for row in s.iter_mut() {
            for value in row.iter_mut() {
                *value = rng.in_range(-1.0, 1.0);
            }
        }
        let s = Matrix::from_rows(&s).unwrap();
        let q = &s.transpose().matmul(&s) + &Matrix::identity(4);
        let p = solve_lyapunov(&m, &q).unwrap();
        let residual = &(&m.transpose().matmul(&p) + &p.matmul(&m)) + &q;
        max_rel_residual = max_rel_residual.max(residual.norm_inf() / q.norm_inf());
    }
    let residual_ok = max_rel_residual <= 1e-10;

    let pass = rk4_ok && golden_ok && residual_ok;
    verdict(
        8,
        "integrator order, golden certificate, and solver residuals hold",
        pass,
        &format!(
            "rk4 ratios = {:.2?}, golden = {golden_ok}, max relative residual = {max_rel_residual:.3e}",
            ratios
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_certified_thresholds_sit_far_below_practical_ones() {
    let cert = &CERT.1;
    let q = cert.actuator_node_count;
    let mut max_ratio: f64 = 0.0;
    for i in 0..q {
        max_ratio = max_ratio.max(cert.kappa[i] / MODEL.controller.node_lipschitz(i));
    }
    for j in 0..cert.kappa.len() - q {
        max_ratio = max_ratio
            .max(cert.kappa[q + j] / (2.0 * MODEL.observer.node_output_lipschitz(j)));
    }
    let pass = max_ratio <= 0.02;
    verdict(
        9,
        "certified relative thresholds stay below 2 percent",
        pass,
        &format!("max kappa-to-slope ratio = {max_ratio:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_etc-sim"))
            .args(["run", "flexible-link-paper", "--out", out.to_str().unwrap()])
            .env_remove("ETC_SIM_OUT")
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    let mut pass = true;
    let mut detail = Vec::new();
    for name in [
        "flexible-link-paper.csv",
        "flexible-link-paper.svg",
        "flexible-link-paper-report.txt",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        let same = a == b;
        pass &= same;
        detail.push(format!("{name}: {}", if same { "identical" } else { "DIFFERS" }));
    }
    verdict(10, "artifacts are byte-identical across runs", pass, &detail.join(", "));
    assert!(pass);
}
