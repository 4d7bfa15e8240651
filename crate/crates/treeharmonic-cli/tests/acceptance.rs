//! End-to-end acceptance battery. Each test covers one numbered criterion,
//! prints a single `PASS criterion N: …` line on success (visible under
//! `--nocapture`) and fails with a `criterion N` message otherwise. The
//! expected values are closed forms or independently frozen reference
//! numbers, never re-derived from the code under test.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use treeharmonic::dirichlet::{self, BoundaryData};
use treeharmonic::fatou;
use treeharmonic::measure;
use treeharmonic::operators::AveragingOp;
use treeharmonic::tree::MadicUnion;
use treeharmonic::ucp::{self, ProfilePattern, UcpVerdict};

fn pass(n: u32, msg: &str) {
    println!("PASS criterion {n}: {msg}");
}

#[test]
fn criterion_01_linear_exactness() {
    let start = Instant::now();
    let m = 3usize;
    let ops = [AveragingOp::p_average(m, 2.0).unwrap(), AveragingOp::mean_midrange(m, 0.0).unwrap()];
    let mut worst = 0f64;
    for op in &ops {
        for k in 1..=6u32 {
            let size = 3u64.pow(k);
            let expected = (m as f64).powi(-(k as i32));
            for i in 0..size {
                let cells = MadicUnion::new(k, i, i, m).unwrap();
                let w = measure::harmonic_measure(op, &cells).unwrap();
                let err = (w - expected).abs();
                worst = worst.max(err);
                assert!(
                    err <= 1e-12,
                    "criterion 1: {} cell {k}:{i} measure {w} vs {expected}",
                    op.label()
                );
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "criterion 1: runtime {elapsed:.2}s exceeds 1s");
    pass(1, &format!("single-cell measures exact to {worst:.2e} for p=2 and pure mean, k<=6 in {elapsed:.2}s"));
}

#[test]
fn criterion_02_upper_bound_sweep() {
    let start = Instant::now();
    let cs = [0.5, 1.0, 2.0];
    let mut checked = 0usize;
    for m in [3usize, 4] {
        let f = BoundaryData::constant(m, 0.0).unwrap();
        for alpha in [0.25, 0.5, 0.75] {
            let op = AveragingOp::mean_median(m, alpha).unwrap();
            let configs = measure::standard_sweep_configs(m, 6, &cs).unwrap();
            let reports = measure::bound_sweep(&op, &f, &configs, false).unwrap();
            for r in &reports {
                assert_eq!(
                    r.satisfied_upper,
                    Some(true),
                    "criterion 2: global/sharpened bound failed at m={m} alpha={alpha} n={} k0={} c={} gap={} thm1={:?}",
                    r.n, r.interval.k0(), r.c, r.measured_gap, r.bound_thm1
                );
                assert_eq!(
                    r.satisfied_raw,
                    Some(true),
                    "criterion 2: raw kappa^n bound failed at m={m} alpha={alpha} n={} k0={} cells={} c={} gap={} raw={:?}",
                    r.n, r.interval.k0(), r.interval.cell_count(), r.c, r.measured_gap, r.raw_bound
                );
            }
            checked += reports.len();
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 2: runtime {elapsed:.1}s exceeds 30s");
    pass(2, &format!("gap <= 2c(m|I|)^gamma and raw kappa^n bounds over {checked} configs in {elapsed:.1}s"));
}

#[test]
fn criterion_03_upper_class_ladder() {
    let m = 3usize;
    let op = AveragingOp::mean_median(m, 0.5).unwrap();
    // Measure context: data is the bump c·χ_I alone. Piecewise-constant data
    // makes the perturbed root depth-independent, so the w_l ladder is
    // genuinely monotone rather than monotone-up-to-depth-tail.
    let f = BoundaryData::constant(m, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    for cfg in 0..10 {
        let n = rng.gen_range(1..=3u32);
        let size = 3u64.pow(n);
        let pair = rng.gen_bool(0.5) && size > 1;
        let k0 = rng.gen_range(0..if pair { size - 1 } else { size });
        let k1 = if pair { k0 + 1 } else { k0 };
        let cells = MadicUnion::new(n, k0, k1, m).unwrap();
        let c = 0.25 + 1.75 * rng.gen::<f64>();
        let mut prev = f64::INFINITY;
        for l in 1..=5u32 {
            let step = measure::approximating_upper_class(&op, &f, &cells, c, n, l).unwrap();
            assert!(
                step.w_root >= step.v_root - 1e-10
                    && step.w_root <= step.v_root + step.certified_gap + 1e-10,
                "criterion 3: bracket broken at config {cfg} l={l}: v={} w={} ceiling={}",
                step.v_root, step.w_root, step.certified_gap
            );
            assert!(
                step.w_root <= prev + 1e-10,
                "criterion 3: w_l increased at config {cfg} l={l}: {prev} -> {}",
                step.w_root
            );
            prev = step.w_root;
        }
    }
    pass(3, "w_l brackets the perturbed root and is nonincreasing for l=1..5 over 10 random configs");
}

#[test]
fn criterion_04_lower_bound_sweep() {
    let cs = [0.5, 1.0, 2.0];
    let mut checked = 0usize;
    for m in [3usize, 4] {
        let f = BoundaryData::constant(m, 0.0).unwrap();
        let ops = [
            AveragingOp::p_average(m, 2.0).unwrap(),
            AveragingOp::mean_median(m, 0.25).unwrap(),
            AveragingOp::mean_median(m, 0.5).unwrap(),
        ];
        for op in &ops {
            let configs = measure::standard_sweep_configs(m, 6, &cs).unwrap();
            let reports = measure::bound_sweep(&op, &f, &configs, true).unwrap();
            for r in &reports {
                assert_eq!(
                    r.satisfied_lower,
                    Some(true),
                    "criterion 4: lower bound failed for {} at m={m} n={} k0={} c={} gap={} bound={:?}",
                    op.label(), r.n, r.interval.k0(), r.c, r.measured_gap, r.lower_bound
                );
            }
            checked += reports.len();
        }
    }
    pass(4, &format!("gap >= c(|I|/2m)^theta over {checked} configs for p=2 and F1 with alpha<=1/2"));
}

#[test]
fn criterion_05_dirichlet_error_bound() {
    let m = 3usize;
    let f = BoundaryData::identity(m);
    let ops = [
        AveragingOp::p_average(m, 2.0).unwrap(),
        AveragingOp::mean_median(m, 0.5).unwrap(),
        AveragingOp::mean_midrange(m, 0.5).unwrap(),
    ];
    for op in &ops {
        let roots: Vec<f64> = (1..=9u32)
            .map(|n| dirichlet::solve_data(op, &f, n).unwrap().root_value())
            .collect();
        for n in 1..=6usize {
            let diff = (roots[n - 1] - roots[n + 2]).abs();
            assert!(
                diff <= 3f64.powi(-(n as i32)),
                "criterion 5: {} |u_{n} - u_{}| = {diff} above 3^-{n}",
                op.label(),
                n + 3
            );
        }
    }
    // p = 2: exact closed form for the root value.
    let exact_op = &ops[0];
    for n in 1..=6u32 {
        let root = dirichlet::solve_data(exact_op, &f, n).unwrap().root_value();
        let p = 3f64.powi(n as i32);
        let expected = (p - 1.0) / (2.0 * p);
        assert!(
            (root - expected).abs() <= 1e-12,
            "criterion 5: p=2 root at n={n} is {root}, want {expected}"
        );
    }
    pass(5, "|u_n - u_{n+3}| <= 3^-n for three families and p=2 roots match (3^n-1)/(2*3^n)");
}

#[test]
fn criterion_06_comparison_principle() {
    let m = 3usize;
    let ops = [
        AveragingOp::mean_midrange(m, 0.5).unwrap(),
        AveragingOp::mean_median(m, 0.5).unwrap(),
        AveragingOp::median_midrange(m, 0.5).unwrap(),
        AveragingOp::p_average(m, 3.0).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    let mut worst = f64::NEG_INFINITY;
    for op in &ops {
        for trial in 0..100 {
            let mut pf = Vec::new();
            let mut pg = Vec::new();
            for j in 0..=8u32 {
                let t = f64::from(j) / 8.0;
                let v: f64 = rng.gen_range(-1.0..1.0);
                pf.push((t, v));
                pg.push((t, v + rng.gen_range(0.0..1.0)));
            }
            let u = dirichlet::solve_data(op, &BoundaryData::table(m, pf).unwrap(), 5).unwrap();
            let v = dirichlet::solve_data(op, &BoundaryData::table(m, pg).unwrap(), 5).unwrap();
            let excess = dirichlet::comparison_check(&u, &v).unwrap();
            worst = worst.max(excess);
            assert!(
                excess <= 1e-10,
                "criterion 6: {} trial {trial}: interior u-v exceeds boundary max by {excess}",
                op.label()
            );
        }
    }
    pass(6, &format!("100 ordered pairs per family keep interior u-v below the boundary max (worst excess {worst:.2e})"));
}

#[test]
fn criterion_07_ucp_counterexample() {
    let m = 3usize;
    let op = AveragingOp::mean_median(m, 0.5).unwrap();
    let ce = ucp::build_counterexample(&op, &[2, 2, 2], 6).unwrap();
    assert!(ce.delta_is_exact, "criterion 7: delta = 1/6 should take the exact path");
    assert!(
        ce.residual <= 1e-12,
        "criterion 7: harmonicity residual {} above 1e-12",
        ce.residual
    );
    assert!(!ce.canonical_u.is_empty(), "criterion 7: canonical U is empty");
    for x in &ce.canonical_u {
        let v = ce.solution.value(x.level(), x.index(m).unwrap()).unwrap();
        assert_eq!(v, 0.0, "criterion 7: nonzero value {v} on canonical U at {x}");
    }
    // Level-eta_k maxima must equal (36/35)^k exactly (same rounding as the
    // builder's rational-to-double conversion).
    let ratio = BigRational::new(BigInt::from(36), BigInt::from(35));
    for (k, &eta) in ce.eta.iter().enumerate() {
        let level_max = ce
            .solution
            .level(eta)
            .unwrap()
            .iter()
            .fold(f64::NEG_INFINITY, |s, &v| s.max(v));
        let expected = num::pow::pow(ratio.clone(), k + 1).to_f64().unwrap();
        assert_eq!(
            level_max,
            expected,
            "criterion 7: level-{eta} max is {level_max}, want (36/35)^{}",
            k + 1
        );
        assert_eq!(level_max, ce.stage_max[k], "criterion 7: stage ceiling mismatch at k={}", k + 1);
    }
    let hold = ucp::classify_pattern(ce.delta, ProfilePattern::Constant { rho: 2 }).unwrap();
    assert_eq!(hold.verdict, UcpVerdict::Holds, "criterion 7: constant profile must give Holds");
    let fail = ucp::classify_pattern(ce.delta, ProfilePattern::Linear { a: 1, b: 0 }).unwrap();
    assert_eq!(fail.verdict, UcpVerdict::Fails, "criterion 7: linear profile must give Fails");
    pass(7, &format!(
        "rho=(2,2,2) build: residual {:.1e}, vanishes on U ({} vertices), level maxima (36/35)^k exact, verdicts Holds/Fails",
        ce.residual,
        ce.canonical_u.len()
    ));
}

/// Independently frozen reference dims for the grid points where the numeric
/// optimum genuinely beats the median/midrange closed form.
const F2_REFERENCE_DIMS: [((u64, u64), f64); 8] = [
    ((5, 50), 0.969_022_26),
    ((5, 75), 0.885_215_45),
    ((6, 50), 0.983_566_01),
    ((6, 75), 0.935_628_44),
    ((7, 50), 0.957_742_06),
    ((7, 75), 0.887_556_02),
    ((8, 50), 0.965_413_54),
    ((8, 75), 0.924_457_28),
];

#[test]
fn criterion_08_tau_cross_check() {
    let start = Instant::now();
    let alphas = [0.0, 0.25, 0.5, 0.75];
    let mut deviations = Vec::new();
    for m in 3..=8usize {
        for &alpha in &alphas {
            // F1: the numeric dim must land on one of the two s-conventions.
            let op = AveragingOp::mean_median(m, alpha).unwrap();
            let r = fatou::tau_minimize(&op, m, 64, 1e-10).unwrap();
            assert!(
                r.constraint_residual <= 1e-9,
                "criterion 8: F1 m={m} alpha={alpha} residual {}",
                r.constraint_residual
            );
            let convention = fatou::f1_convention_match(m as u64, alpha, r.dim, 1e-6).unwrap();
            assert_ne!(
                convention, "neither",
                "criterion 8: F1 m={m} alpha={alpha} dim {} matches no s-convention",
                r.dim
            );

            // F2: agree with the closed form, or prove the disagreement.
            let op = AveragingOp::median_midrange(m, alpha).unwrap();
            let r = fatou::tau_minimize(&op, m, 64, 1e-10).unwrap();
            assert!(
                r.constraint_residual <= 1e-9,
                "criterion 8: F2 m={m} alpha={alpha} residual {}",
                r.constraint_residual
            );
            let closed = fatou::tau_closed_form_f2(m as u64, alpha).unwrap();
            if (r.dim - closed.dim).abs() > 1e-6 {
                // The formula's own critical point must still be feasible and
                // reproduce the formula — the disagreement is then a genuine
                // property of the landscape, and the numeric value must match
                // the frozen reference.
                assert!(
                    r.dim < closed.dim - 1e-6,
                    "criterion 8: F2 m={m} alpha={alpha} numeric dim {} above closed {}",
                    r.dim, closed.dim
                );
                let d = r.discrepancy.expect("criterion 8: discrepancy must be recorded");
                assert!(d < -1e-6, "criterion 8: recorded discrepancy {d} not negative");
                let x = fatou::f2_closed_minimizer(m as u64, alpha).unwrap();
                let resid = AveragingOp::median_midrange(m, alpha)
                    .unwrap()
                    .eval(&x)
                    .unwrap()
                    .abs();
                assert!(
                    resid <= 1e-9,
                    "criterion 8: closed-form point infeasible at m={m} alpha={alpha}: residual {resid}"
                );
                let tau_at_x: f64 = x.iter().map(|v| v.exp()).sum();
                assert!(
                    (tau_at_x - closed.tau).abs() <= 1e-9 * closed.tau.max(1.0),
                    "criterion 8: closed-form point gives tau {tau_at_x}, formula says {}",
                    closed.tau
                );
                let key = (m as u64, (alpha * 100.0) as u64);
                let frozen = F2_REFERENCE_DIMS
                    .iter()
                    .find(|(k, _)| *k == key)
                    .unwrap_or_else(|| {
                        panic!("criterion 8: unexpected F2 deviation at m={m} alpha={alpha}")
                    })
                    .1;
                assert!(
                    (r.dim - frozen).abs() <= 1e-6,
                    "criterion 8: F2 m={m} alpha={alpha} dim {} differs from reference {frozen}",
                    r.dim
                );
                deviations.push(format!("(m={m},a={alpha}) dim {:.8} < formula {:.8}", r.dim, closed.dim));
            }
        }
        // p = 2 average: dimension exactly 1.
        let op = AveragingOp::p_average(m, 2.0).unwrap();
        let r = fatou::tau_minimize(&op, m, 64, 1e-10).unwrap();
        assert!(
            (r.dim - 1.0).abs() <= 1e-9,
            "criterion 8: p=2 dim at m={m} is {} not 1",
            r.dim
        );
    }
    assert_eq!(
        deviations.len(),
        F2_REFERENCE_DIMS.len(),
        "criterion 8: expected exactly the {} known F2 deviations, saw {:?}",
        F2_REFERENCE_DIMS.len(),
        deviations
    );

    // Large-m behaviour of the F2 closed form: by m = 200 the dimension is
    // still above its limit (1+alpha)/2 but a doubling step moves it by less
    // than 0.02, and the gap to the limit shrinks monotonically.
    for &alpha in &alphas {
        let d100 = fatou::tau_closed_form_f2(100, alpha).unwrap().dim;
        let d200 = fatou::tau_closed_form_f2(200, alpha).unwrap().dim;
        let limit = fatou::dim_limit(fatou::ClosedFamily::F2, alpha);
        assert!(
            (d200 - d100).abs() < 0.02,
            "criterion 8: F2 dim moved {} from m=100 to m=200 at alpha={alpha}",
            (d200 - d100).abs()
        );
        assert!(d200 > limit, "criterion 8: dim {d200} fell below the limit {limit}");
        assert!(
            d200 - limit < d100 - limit,
            "criterion 8: gap to the limit not shrinking at alpha={alpha}"
        );
        println!(
            "criterion 8 note: F2 closed dim at m=200, alpha={alpha}: {d200:.5} (limit {limit:.4}, doubling step {:.4})",
            (d200 - d100).abs()
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "criterion 8: runtime {elapsed:.1}s exceeds 2min");
    pass(8, &format!(
        "tau grid m=3..8 x 4 alphas matches closed forms; {} proven F2 deviations match frozen references; large-m trend verified in {elapsed:.1}s",
        deviations.len()
    ));
}

#[test]
fn criterion_09_axiom_fuzzing() {
    let mut f2_lines = Vec::new();
    for m in [3usize, 4] {
        let mut ops = Vec::new();
        for alpha in [0.0, 0.25, 0.5, 0.75] {
            ops.push(AveragingOp::mean_midrange(m, alpha).unwrap());
            ops.push(AveragingOp::mean_median(m, alpha).unwrap());
            ops.push(AveragingOp::median_midrange(m, alpha).unwrap());
        }
        for p in [1.5, 2.0, 3.0, 8.0] {
            ops.push(AveragingOp::p_average(m, p).unwrap());
        }
        for op in &ops {
            let tol = match op.kind() {
                treeharmonic::operators::OpKind::PAverage { .. } => 1e-7,
                _ => 1e-9,
            };
            let rep = op.check_axioms(10_000, 1, tol).unwrap();
            assert!(
                rep.passed,
                "criterion 9: {} failed axiom checks: {:?}",
                op.label(),
                rep.failures()
            );
            if let Some(kappa) = rep.kappa_closed_form {
                assert!(
                    rep.empirical_kappa <= kappa + 1e-9,
                    "criterion 9: {} empirical kappa {} above closed form {kappa}",
                    op.label(),
                    rep.empirical_kappa
                );
                if rep.kappa_disputed {
                    f2_lines.push(format!(
                        "{}: empirical kappa {:.12} vs closed form {:.12} (margin {:.2e})",
                        op.label(),
                        rep.empirical_kappa,
                        kappa,
                        kappa - rep.empirical_kappa
                    ));
                }
            }
        }
    }
    // The two sources disagree on whether the median/midrange family has a
    // contraction constant; the fuzzed estimate settles it and is part of the
    // recorded output.
    assert!(!f2_lines.is_empty(), "criterion 9: no disputed-kappa report recorded");
    for line in &f2_lines {
        println!("criterion 9 note: {line}");
    }
    pass(9, "10^4-sample axiom fuzzing passed for every family; empirical kappa within closed forms, disputed case recorded");
}

#[test]
fn criterion_10_boundary_comparison_contract() {
    let m = 3usize;
    let op = AveragingOp::mean_median(m, 0.5).unwrap();
    let m_bound = 1.0;
    let eps = 0.1f64;
    let gamma = measure::gamma_of(&op).unwrap();
    let threshold = (eps / 2.0).powf(1.0 / gamma) / m as f64;
    // Eligible levels: |I| = 3^-l at or below the threshold, within the
    // dense-array cap. That is levels 9 and 10; the cell sample per data set
    // is deterministic (edges plus seeded random interior picks).
    let levels: Vec<u32> = (1..=10u32)
        .filter(|&l| (m as f64).powi(-(l as i32)) <= threshold)
        .collect();
    assert_eq!(levels, vec![9, 10], "criterion 10: eligible levels changed");
    let mut rng = ChaCha8Rng::seed_from_u64(0xBC9);
    let mut max_gap = 0f64;
    let mut checked = 0usize;
    for _trial in 0..20 {
        for &level in &levels {
            let size = 3u64.pow(level);
            let picks = [0, rng.gen_range(1..size - 1), size - 1];
            for &k in &picks {
                let cells = MadicUnion::new(level, k, k, m).unwrap();
                assert!(cells.length(m).unwrap() <= threshold);
                // Piecewise-linear f pinned to -M/2 on the cell, random
                // outside; g = f + M on the cell exactly.
                let (a, b) = cells.endpoints(m).unwrap();
                let mut pts: Vec<(f64, f64)> = Vec::new();
                for j in 0..=8u32 {
                    let t = f64::from(j) / 8.0;
                    if t <= a - 1.0 / 32.0 || t >= b + 1.0 / 32.0 {
                        pts.push((t, rng.gen_range(-0.5..=0.5)));
                    }
                }
                pts.push((a, -0.5));
                pts.push((b, -0.5));
                pts.sort_by(|x, y| x.0.total_cmp(&y.0));
                let f = BoundaryData::table(m, pts).unwrap();
                let g = BoundaryData::composite(f.clone(), cells.clone(), m_bound).unwrap();
                let r = measure::boundary_comparison(&op, &f, &g, &cells, m_bound, eps).unwrap();
                assert!(
                    r.gap < eps,
                    "criterion 10: gap {} at level {level} cell {k} reaches eps",
                    r.gap
                );
                assert!(r.satisfied, "criterion 10: contract flag false at level {level} cell {k}");
                max_gap = max_gap.max(r.gap);
                checked += 1;
            }
        }
    }
    pass(10, &format!(
        "root gap stayed below eps=0.1 for {checked} perturbed data sets on levels 9-10 (max gap {max_gap:.2e})"
    ));
}

#[test]
fn criterion_11_determinism() {
    let bin = env!("CARGO_BIN_EXE_treeharmonic");
    let run = || {
        std::process::Command::new(bin)
            .args(["reproduce-all", "--seed", "7"])
            .output()
            .expect("criterion 11: battery run")
    };
    let first = run();
    let second = run();
    assert!(
        first.status.success() && second.status.success(),
        "criterion 11: battery exited nonzero: {:?} / {:?}",
        first.status,
        second.status
    );
    assert!(!first.stdout.is_empty(), "criterion 11: battery produced no output");
    assert!(
        String::from_utf8_lossy(&first.stdout).contains("SUMMARY"),
        "criterion 11: battery output has no summary"
    );
    assert_eq!(
        first.stdout, second.stdout,
        "criterion 11: two identical invocations differ"
    );
    pass(11, &format!(
        "reproduce-all --seed 7 is byte-identical across runs ({} bytes)",
        first.stdout.len()
    ));
}
