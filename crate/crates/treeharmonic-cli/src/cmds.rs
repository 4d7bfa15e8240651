//! Subcommand implementations. Each returns Ok(true) when every check it ran
//! held, Ok(false) when a check completed and reported a violation (exit 2),
//! and Err for usage, input or numeric failures (exit 1).

use crate::output::{meta_line, open_sink, write_text, Cell, Report};
use crate::{
    AxiomsArgs, BcpArgs, BoundArgs, MeasureArgs, ReproduceArgs, SolveArgs, TauArgs,
    UcpCounterArgs, UcpExtractArgs,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use treeharmonic::dirichlet::{self, BoundaryData};
use treeharmonic::fatou;
use treeharmonic::measure::{self, SweepConfig};
use treeharmonic::operators::{AveragingOp, OpKind};
use treeharmonic::tree::{self, MadicUnion, VertexPath};
use treeharmonic::ucp::{self, ProfilePattern, UcpVerdict};
use treeharmonic::{Error, Result};

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(dirichlet::parse_real).collect()
}

/// Inclusive `LO..HI` (an `=` before HI is tolerated) or a single value.
fn parse_range_u32(s: &str) -> Result<(u32, u32)> {
    let s = s.trim();
    let one = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|_| Error::input(format!("bad range endpoint {t:?} in {s:?}")))
    };
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (lo, hi) = (one(a)?, one(b)?);
        if lo > hi {
            return Err(Error::input(format!("empty range {s:?}")));
        }
        Ok((lo, hi))
    } else {
        let v = one(s)?;
        Ok((v, v))
    }
}

fn parse_rho(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::input(format!("bad profile entry {t:?} in {s:?}")))
        })
        .collect()
}

pub fn solve(a: &SolveArgs) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let f = BoundaryData::parse_spec(&a.f, a.m)?;
    let sol = dirichlet::solve_data(&op, &f, a.n)?;
    let residual = sol.harmonicity_residual(&op)?;
    let meta = meta_line(None);
    let mut w = open_sink(a.out.csv.as_deref())?;
    if a.dump {
        let mut rep = Report::new(&["level", "index", "psi", "value"]);
        for (level, values) in sol.levels().iter().enumerate() {
            for (idx, &v) in values.iter().enumerate() {
                let x = VertexPath::from_index(level as u32, idx as u64, a.m)?;
                rep.push(vec![
                    Cell::Uint(level as u64),
                    Cell::Uint(idx as u64),
                    Cell::Num(tree::psi(&x, a.m)?),
                    Cell::Num(v),
                ]);
            }
        }
        rep.note(format!("root_value={}", sol.root_value()));
        rep.note(format!("harmonicity_residual={residual}"));
        rep.write(&mut w, a.out.format, &meta)?;
    } else {
        let mut lines = vec![
            format!("m={} op={} n={}", a.m, op.label(), a.n),
            format!("root_value={}", sol.root_value()),
            format!("harmonicity_residual={residual} (tolerance {})", sol.harmonicity_tol()),
        ];
        let (lo, hi) = sol.value_range();
        lines.push(format!("value_range=[{lo},{hi}]"));
        match f.lipschitz() {
            Some(l) => {
                let err = l * (a.m as f64).powi(-(a.n as i32));
                lines.push(format!("certified_error={err} (L/m^n with L={l})"));
            }
            None => lines.push("certified_error=unknown (no Lipschitz constant for this data)".into()),
        }
        write_text(&mut w, &lines, &meta)?;
    }
    w.flush()?;
    Ok(residual <= sol.harmonicity_tol())
}

pub fn measure(a: &MeasureArgs) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let cells = MadicUnion::parse(&a.cells, a.m)?;
    let value = measure::harmonic_measure(&op, &cells)?;
    let mut rep = Report::new(&["m", "op", "n", "k0", "k1", "cells", "length", "measure"]);
    rep.push(vec![
        Cell::Uint(a.m as u64),
        Cell::Text(op.label()),
        Cell::Uint(cells.level() as u64),
        Cell::Uint(cells.k0()),
        Cell::Uint(cells.k1()),
        Cell::Uint(cells.cell_count()),
        Cell::Num(cells.length(a.m)?),
        Cell::Num(value),
    ]);
    let mut w = open_sink(a.out.csv.as_deref())?;
    rep.write(&mut w, a.out.format, &meta_line(None))?;
    w.flush()?;
    Ok(true)
}

pub fn bound(a: &BoundArgs, lower: bool) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let f = match &a.f {
        Some(spec) => BoundaryData::parse_spec(spec, a.m)?,
        None => BoundaryData::constant(a.m, 0.0)?,
    };
    if !lower && a.theta.is_some() {
        return Err(Error::input("--theta only applies to lower-bound".to_string()));
    }
    let cs = parse_f64_list(&a.c)?;
    if cs.is_empty() {
        return Err(Error::input("need at least one bump height c".to_string()));
    }
    let configs: Vec<SweepConfig> = match (&a.cells, &a.sweep_depths) {
        (Some(cells), None) => {
            let cells = MadicUnion::parse(cells, a.m)?;
            cs.iter().map(|&c| SweepConfig { cells: cells.clone(), c }).collect()
        }
        (None, Some(range)) => {
            let (lo, hi) = parse_range_u32(range)?;
            if lo < 1 {
                return Err(Error::input("sweep depths start at 1".to_string()));
            }
            measure::standard_sweep_configs(a.m, hi, &cs)?
                .into_iter()
                .filter(|cfg| cfg.cells.level() >= lo)
                .collect()
        }
        (Some(_), Some(_)) => {
            return Err(Error::input("--cells and --sweep-depths are mutually exclusive".to_string()))
        }
        (None, None) => return Err(Error::input("need --cells or --sweep-depths".to_string())),
    };
    let mut reports = if lower && a.theta.is_some() {
        // Per-config path so the θ override is honored.
        let mut out = Vec::with_capacity(configs.len());
        for cfg in &configs {
            out.push(measure::check_lower_bound(&op, &f, &cfg.cells, cfg.c, a.theta)?);
        }
        out
    } else {
        measure::bound_sweep(&op, &f, &configs, lower)?
    };
    reports.sort_by(|x, y| {
        (x.n, x.interval.k0(), x.interval.k1())
            .cmp(&(y.n, y.interval.k0(), y.interval.k1()))
            .then(x.c.total_cmp(&y.c))
    });
    let mut rep = Report::new(&[
        "m", "op", "n", "k0", "k1", "c", "gap", "bound_thm1", "bound_l54", "bound_l55",
        "lower_bound", "gamma", "theta", "satisfied",
    ]);
    let mut all_ok = true;
    for r in &reports {
        all_ok &= r.satisfied;
        rep.push(vec![
            Cell::Uint(r.m as u64),
            Cell::Text(r.op.clone()),
            Cell::Uint(r.n as u64),
            Cell::Uint(r.interval.k0()),
            Cell::Uint(r.interval.k1()),
            Cell::Num(r.c),
            Cell::Num(r.measured_gap),
            Cell::opt_num(r.bound_thm1),
            Cell::opt_num(r.bound_l54),
            Cell::opt_num(r.bound_l55),
            Cell::opt_num(r.lower_bound),
            Cell::opt_num(r.gamma_used),
            Cell::opt_num(r.theta_used),
            Cell::Bool(r.satisfied),
        ]);
    }
    rep.note(format!("configs={} all_satisfied={all_ok}", reports.len()));
    let mut w = open_sink(a.out.csv.as_deref())?;
    rep.write(&mut w, a.out.format, &meta_line(None))?;
    w.flush()?;
    Ok(all_ok)
}

/// Piecewise-linear data pinned to −M/2 across the union (so the composite
/// bump g = f + M·χ keeps ‖f‖ + ‖g‖ ≤ M exactly), random elsewhere.
fn random_pinned_table(
    m: usize,
    cells: &MadicUnion,
    m_bound: f64,
    rng: &mut ChaCha8Rng,
) -> Result<BoundaryData> {
    let (a, b) = cells.endpoints(m)?;
    let margin = 1.0 / 32.0;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for j in 0..=8u32 {
        let t = f64::from(j) / 8.0;
        if t <= a - margin || t >= b + margin {
            pts.push((t, rng.gen_range(-m_bound / 2.0..=m_bound / 2.0)));
        }
    }
    pts.push((a, -m_bound / 2.0));
    pts.push((b, -m_bound / 2.0));
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    BoundaryData::table(m, pts)
}

pub fn bcp(a: &BcpArgs) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let cells = MadicUnion::parse(&a.cells, a.m)?;
    if a.trials == 0 {
        return Err(Error::input("need at least one trial".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rep = Report::new(&[
        "trial", "m", "op", "n", "k0", "k1", "m_bound", "eps", "gap", "corollary_bound",
        "delta_required", "interval_length", "satisfied",
    ]);
    let mut all_ok = true;
    for trial in 0..a.trials {
        let f = random_pinned_table(a.m, &cells, a.m_bound, &mut rng)?;
        let g = BoundaryData::composite(f.clone(), cells.clone(), a.m_bound)?;
        let r = measure::boundary_comparison(&op, &f, &g, &cells, a.m_bound, a.eps)?;
        all_ok &= r.satisfied;
        rep.push(vec![
            Cell::Uint(trial as u64),
            Cell::Uint(a.m as u64),
            Cell::Text(op.label()),
            Cell::Uint(cells.level() as u64),
            Cell::Uint(cells.k0()),
            Cell::Uint(cells.k1()),
            Cell::Num(a.m_bound),
            Cell::Num(a.eps),
            Cell::Num(r.gap),
            Cell::Num(r.corollary_bound),
            Cell::Num(r.delta_required),
            Cell::Num(r.interval_length),
            Cell::Bool(r.satisfied),
        ]);
    }
    rep.note(format!("trials={} all_satisfied={all_ok}", a.trials));
    let mut w = open_sink(a.out.csv.as_deref())?;
    rep.write(&mut w, a.out.format, &meta_line(Some(a.seed)))?;
    w.flush()?;
    Ok(all_ok)
}

pub fn ucp_extract(a: &UcpExtractArgs) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let text = std::fs::read_to_string(&a.set_file)?;
    let mut u = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        u.push(VertexPath::parse(line, a.m)?);
    }
    let prof = ucp::extract_rho(&u, a.m, a.max_depth, &op)?;
    let mut rep = Report::new(&["k", "rho_k", "eta_k", "series_partial", "product_mk"]);
    for k in 0..prof.rho.len() {
        let head = &prof.rho[..=k];
        let (series, prod) = if prof.delta > 0.0 && prof.delta < 1.0 {
            (
                Cell::Num(ucp::series_partial(prof.delta, head)?),
                Cell::Num(ucp::mk_product(prof.delta, head)?),
            )
        } else {
            (Cell::Empty, Cell::Empty)
        };
        rep.push(vec![
            Cell::Uint(k as u64 + 1),
            Cell::Uint(u64::from(prof.rho[k])),
            Cell::Uint(u64::from(prof.eta[k])),
            series,
            prod,
        ]);
    }
    rep.note(format!("vertices={} delta={}", u.len(), prof.delta));
    rep.note(format!(
        "p1_ok={} p2_ok={} p0_density_ok={} truncated={}",
        prof.p1_ok, prof.p2_ok, prof.p0_density_ok, prof.truncated
    ));
    if let Some(wit) = &prof.p1_witness {
        rep.note(format!("p1_witness: {wit}"));
    }
    if let Some(wit) = &prof.p2_witness {
        rep.note(format!("p2_witness: {wit}"));
    }
    for n in &prof.notes {
        rep.note(n.clone());
    }
    let mut w = open_sink(a.out.csv.as_deref())?;
    rep.write(&mut w, a.out.format, &meta_line(None))?;
    w.flush()?;
    Ok(true)
}

pub fn ucp_counterexample(a: &UcpCounterArgs) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let rho = parse_rho(&a.rho)?;
    let ce = ucp::build_counterexample(&op, &rho, a.depth)?;
    let in_u: BTreeSet<(u32, u64)> = ce
        .canonical_u
        .iter()
        .map(|x| Ok((x.level(), x.index(a.m)?)))
        .collect::<Result<_>>()?;
    let mut rep = Report::new(&["level", "index", "psi", "value", "in_u"]);
    for (level, values) in ce.solution.levels().iter().enumerate() {
        for (idx, &v) in values.iter().enumerate() {
            let x = VertexPath::from_index(level as u32, idx as u64, a.m)?;
            rep.push(vec![
                Cell::Uint(level as u64),
                Cell::Uint(idx as u64),
                Cell::Num(tree::psi(&x, a.m)?),
                Cell::Num(v),
                Cell::Bool(in_u.contains(&(level as u32, idx as u64))),
            ]);
        }
    }
    rep.note(format!("delta={} exact={}", ce.delta, ce.delta_is_exact));
    let eta: Vec<String> = ce.eta.iter().map(u32::to_string).collect();
    rep.note(format!("eta={}", eta.join(",")));
    let sup: Vec<String> = ce.stage_max.iter().map(f64::to_string).collect();
    rep.note(format!("stage_max={}", sup.join(",")));
    rep.note(format!("harmonicity_residual={}", ce.residual));
    rep.note(format!("canonical_u={}", ce.canonical_u.len()));
    let mut w = open_sink(a.out.csv.as_deref())?;
    rep.write(&mut w, a.out.format, &meta_line(None))?;
    w.flush()?;
    Ok(true)
}

pub fn tau(a: &TauArgs) -> Result<bool> {
    let family = a.family.trim();
    if !matches!(family, "F0" | "F1" | "F2" | "Fp") {
        return Err(Error::input(format!(
            "unknown family {family:?} (want F0, F1, F2 or Fp)"
        )));
    }
    let (m_lo, m_hi) = parse_range_u32(&a.m)?;
    let params: Vec<f64> = if family == "Fp" {
        vec![a.p.ok_or_else(|| Error::input("family Fp needs --p".to_string()))?]
    } else {
        if a.p.is_some() {
            return Err(Error::input("--p only applies to family Fp".to_string()));
        }
        parse_f64_list(&a.alpha)?
    };
    let mut rep = Report::new(&[
        "m", "alpha", "tau_numeric", "dim_numeric", "dim_closed", "discrepancy",
        "convention_matched",
    ]);
    let mut all_ok = true;
    for m in m_lo..=m_hi {
        let m = m as usize;
        for &param in &params {
            let op = match family {
                "F0" => AveragingOp::mean_midrange(m, param)?,
                "F1" => AveragingOp::mean_median(m, param)?,
                "F2" => AveragingOp::median_midrange(m, param)?,
                _ => AveragingOp::p_average(m, param)?,
            };
            let r = fatou::tau_minimize(&op, m, a.restarts, a.tol)?;
            let convention = if family == "F1" {
                Cell::Text(fatou::f1_convention_match(m as u64, param, r.dim, 1e-6)?.to_string())
            } else {
                Cell::Empty
            };
            // A numeric optimum that lands above a known formula failed to
            // find the minimum; one strictly below it is a finding and is
            // reported as found.
            all_ok &= r.constraint_residual <= 1e-9
                && r.discrepancy.map_or(true, |d| d <= 1e-6);
            rep.push(vec![
                Cell::Uint(m as u64),
                Cell::Num(param),
                Cell::Num(r.tau),
                Cell::Num(r.dim),
                Cell::opt_num(r.closed_form),
                Cell::opt_num(r.discrepancy),
                convention,
            ]);
        }
    }
    let mut w = open_sink(a.out.csv.as_deref())?;
    rep.write(&mut w, a.out.format, &meta_line(None))?;
    w.flush()?;
    Ok(all_ok)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

pub fn axioms(a: &AxiomsArgs) -> Result<bool> {
    let op = AveragingOp::parse_spec(&a.op, a.m)?;
    let tol = a.tol.unwrap_or(match op.kind() {
        OpKind::PAverage { .. } => 1e-7,
        _ => 1e-9,
    });
    let rep = op.check_axioms(a.samples, a.seed, tol)?;
    let mut lines = vec![
        format!("operator={} samples={} seed={} tol={}", rep.operator, rep.samples, rep.seed, rep.tol),
        format!("normalization_residual={}", rep.normalization_residual),
        format!("homogeneity_residual={}", rep.homogeneity_residual),
        format!("translation_residual={}", rep.translation_residual),
        format!("strict_max_margin={}", rep.strict_max_margin),
        format!("monotonicity_residual={}", rep.monotonicity_residual),
        format!("permutation_residual={}", rep.permutation_residual),
        format!("reflection_residual={}", rep.reflection_residual),
        format!("antisymmetry_residual={}", rep.antisymmetry_residual),
        format!(
            "empirical_kappa={} closed_form={} disputed={}",
            rep.empirical_kappa,
            fmt_opt(rep.kappa_closed_form),
            rep.kappa_disputed
        ),
        format!("empirical_eta={} closed_form={}", rep.empirical_eta, fmt_opt(rep.eta_closed_form)),
        format!("empirical_b={}", fmt_opt(rep.empirical_b)),
    ];
    let failures = rep.failures();
    lines.push(if failures.is_empty() {
        "passed=true".to_string()
    } else {
        format!("passed=false failures={}", failures.join(","))
    });
    let mut w = open_sink(a.out.csv.as_deref())?;
    write_text(&mut w, &lines, &meta_line(Some(a.seed)))?;
    w.flush()?;
    Ok(rep.passed)
}

/// The reproduce-all battery: a fixed, scaled-down pass over every module.
/// All randomness is derived from the one seed, so two runs with the same
/// seed emit byte-identical reports.
pub fn reproduce_all(a: &ReproduceArgs) -> Result<bool> {
    let seed = a.seed;
    let m = 3usize;
    let mut results: Vec<(bool, String)> = Vec::new();

    // Exact root value for the p = 2 average with identity data.
    {
        let op = AveragingOp::p_average(m, 2.0)?;
        let f = BoundaryData::identity(m);
        let root = dirichlet::solve_data(&op, &f, 6)?.root_value();
        let expected = (729.0 - 1.0) / (2.0 * 729.0);
        results.push((
            (root - expected).abs() <= 1e-12,
            format!("solve-exact-root root={root} expected={expected}"),
        ));
    }

    // Root values at depth n and n+3 stay within m^{-n}.
    {
        let op = AveragingOp::mean_median(m, 0.5)?;
        let f = BoundaryData::identity(m);
        let u3 = dirichlet::solve_data(&op, &f, 3)?.root_value();
        let u6 = dirichlet::solve_data(&op, &f, 6)?.root_value();
        let diff = (u3 - u6).abs();
        results.push((
            diff <= 3f64.powi(-3),
            format!("solve-depth-tail |u3-u6|={diff} bound={}", 3f64.powi(-3)),
        ));
    }

    // Harmonic measure of single cells is exactly m^{-k} for the p = 2 average.
    {
        let op = AveragingOp::p_average(m, 2.0)?;
        let mut worst = 0f64;
        for k in 1..=3u32 {
            let size = tree::level_size(m, k)?;
            for i in 0..size {
                let w = measure::harmonic_measure(&op, &MadicUnion::new(k, i, i, m)?)?;
                worst = worst.max((w - (m as f64).powi(-(k as i32))).abs());
            }
        }
        results.push((worst <= 1e-12, format!("measure-exactness worst={worst}")));
    }

    // Upper and lower bound sweeps at depths 1..=4.
    {
        let op = AveragingOp::mean_median(m, 0.5)?;
        let f = BoundaryData::constant(m, 0.0)?;
        let configs = measure::standard_sweep_configs(m, 4, &[0.5, 1.0, 2.0])?;
        let reports = measure::bound_sweep(&op, &f, &configs, true)?;
        let all = reports.iter().all(|r| r.satisfied);
        let slack_up = reports
            .iter()
            .filter_map(|r| r.upper_bound.map(|b| b - r.measured_gap))
            .fold(f64::INFINITY, f64::min);
        let slack_low = reports
            .iter()
            .filter_map(|r| r.lower_bound.map(|b| r.measured_gap - b))
            .fold(f64::INFINITY, f64::min);
        results.push((
            all,
            format!(
                "bound-sweep configs={} all_satisfied={all} min_upper_slack={slack_up} min_lower_slack={slack_low}",
                reports.len()
            ),
        ));
    }

    // Upper-class ladder brackets the target and decreases in l.
    {
        let op = AveragingOp::mean_median(m, 0.5)?;
        let f = BoundaryData::sine(m, 1.0)?;
        let cells = MadicUnion::new(2, 4, 4, m)?;
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        let mut last = 0f64;
        for l in 1..=4u32 {
            let step = measure::approximating_upper_class(&op, &f, &cells, 1.0, 2, l)?;
            monotone &= step.w_root <= prev + 1e-10;
            prev = step.w_root;
            last = step.w_root;
        }
        results.push((monotone, format!("upper-class-ladder monotone={monotone} w4={last}")));
    }

    // Comparison principle on random ordered pairs.
    {
        let op = AveragingOp::mean_median(m, 0.5)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_6d70);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..3 {
            let mut pf = Vec::new();
            let mut pg = Vec::new();
            for j in 0..=8u32 {
                let t = f64::from(j) / 8.0;
                let v: f64 = rng.gen_range(-1.0..1.0);
                pf.push((t, v));
                pg.push((t, v + rng.gen_range(0.0..1.0)));
            }
            let u = dirichlet::solve_data(&op, &BoundaryData::table(m, pf)?, 5)?;
            let v = dirichlet::solve_data(&op, &BoundaryData::table(m, pg)?, 5)?;
            worst = worst.max(dirichlet::comparison_check(&u, &v)?);
        }
        results.push((worst <= 1e-10, format!("comparison pairs=3 worst_excess={worst}")));
    }

    // Boundary-comparison contract at eps = 0.3 on a level-6 cell.
    {
        let op = AveragingOp::mean_median(m, 0.5)?;
        let cells = MadicUnion::new(6, 364, 364, m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6263_70);
        let mut all = true;
        let mut max_gap = 0f64;
        for _ in 0..5 {
            let f = random_pinned_table(m, &cells, 1.0, &mut rng)?;
            let g = BoundaryData::composite(f.clone(), cells.clone(), 1.0)?;
            let r = measure::boundary_comparison(&op, &f, &g, &cells, 1.0, 0.3)?;
            all &= r.satisfied;
            max_gap = max_gap.max(r.gap);
        }
        results.push((all, format!("bcp trials=5 eps=0.3 max_gap={max_gap} all_satisfied={all}")));
    }

    // Counterexample construction and its certificates.
    {
        let op = AveragingOp::mean_median(m, 0.5)?;
        let ce = ucp::build_counterexample(&op, &[2, 2], 4)?;
        let level4_max = ce.solution.level(4)?.iter().fold(0f64, |s, &v| s.max(v));
        let exact = level4_max == ce.stage_max[1] && ce.residual <= 1e-12;
        results.push((
            exact,
            format!(
                "ucp-counterexample rho=2,2 depth=4 residual={} level4_max={level4_max} ceiling={}",
                ce.residual, ce.stage_max[1]
            ),
        ));

        let prof = ucp::extract_rho(&ce.canonical_u, m, 4, &op)?;
        let round = prof.rho == vec![2, 2] && prof.p1_ok && prof.p2_ok;
        results.push((
            round,
            format!(
                "ucp-roundtrip rho={:?} p1={} p2={} density={}",
                prof.rho, prof.p1_ok, prof.p2_ok, prof.p0_density_ok
            ),
        ));

        let hold = ucp::classify_pattern(ce.delta, ProfilePattern::Constant { rho: 2 })?;
        let fail = ucp::classify_pattern(ce.delta, ProfilePattern::Linear { a: 1, b: 0 })?;
        let ok = hold.verdict == UcpVerdict::Holds
            && fail.verdict == UcpVerdict::Fails
            && fail.series_limit.is_some_and(|l| (l - 0.2).abs() <= 1e-12);
        results.push((
            ok,
            format!(
                "ucp-verdicts constant=Holds linear=Fails series_limit={}",
                fmt_opt(fail.series_limit)
            ),
        ));
    }

    // Dimension minimization against the closed forms.
    {
        let runs: [(&str, usize, f64); 6] = [
            ("F1", 3, 0.5),
            ("F1", 4, 0.5),
            ("F1", 5, 0.5),
            ("F2", 3, 0.5),
            ("F0", 3, 0.0),
            ("Fp", 3, 2.0),
        ];
        for (family, mm, param) in runs {
            let op = match family {
                "F0" => AveragingOp::mean_midrange(mm, param)?,
                "F1" => AveragingOp::mean_median(mm, param)?,
                "F2" => AveragingOp::median_midrange(mm, param)?,
                _ => AveragingOp::p_average(mm, param)?,
            };
            let r = fatou::tau_minimize(&op, mm, 24, 1e-10)?;
            let ok = r.constraint_residual <= 1e-9
                && r.discrepancy.is_some_and(|d| d.abs() <= 1e-6);
            results.push((
                ok,
                format!(
                    "tau-{family} m={mm} param={param} dim={} closed={} residual={}",
                    r.dim,
                    fmt_opt(r.closed_form),
                    r.constraint_residual
                ),
            ));
        }
    }

    // Operator axioms on every family.
    {
        let ops = [
            AveragingOp::mean_midrange(m, 0.5)?,
            AveragingOp::mean_median(m, 0.5)?,
            AveragingOp::median_midrange(m, 0.5)?,
            AveragingOp::p_average(m, 3.0)?,
        ];
        for op in ops {
            let tol = match op.kind() {
                OpKind::PAverage { .. } => 1e-7,
                _ => 1e-9,
            };
            let rep = op.check_axioms(2000, seed, tol)?;
            results.push((rep.passed, format!("axioms op={} passed={}", op.label(), rep.passed)));
        }
    }

    let failed = results.iter().filter(|(ok, _)| !ok).count();
    let mut lines: Vec<String> = results
        .iter()
        .map(|(ok, msg)| format!("{} {msg}", if *ok { "ok" } else { "FAIL" }))
        .collect();
    lines.push(format!("SUMMARY checks={} failed={failed}", results.len()));
    let mut w = open_sink(a.out.csv.as_deref())?;
    write_text(&mut w, &lines, &meta_line(Some(seed)))?;
    w.flush()?;
    Ok(failed == 0)
}
