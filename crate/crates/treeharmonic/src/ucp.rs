//! Unique-continuation analysis on T_m.
//!
//! For a vertex set U, the profile ρ_1, ρ_2, … records the depth gaps
//! between consecutive "hits" of U: ρ_1 is the first level meeting U, and
//! ρ_k the gap from level η_{k−1} = ρ_1+…+ρ_{k−1} to the next hits below the
//! surviving (non-U, not-under-a-hit) vertices. Under the structural
//! hypotheses (P0)–(P2), a bounded F-harmonic function vanishing on U must
//! vanish everywhere exactly when Σ_k δ^{ρ_k} diverges, where δ = F(0,…,0,1).
//!
//! The failure direction is constructive and implemented here: for a
//! convergent profile, `build_counterexample` produces the explicit
//! F-harmonic function that is 1 at the root, vanishes on the canonical
//! chain realization of U (digit m−1 repeated), and is bounded by
//! ∏_k 1/(1−δ^{ρ_k}). Its values are computed in exact rational arithmetic
//! whenever δ is rational (the three closed-form families and p = 2).

use crate::dirichlet::{harmonicity_tolerance, TreeSolution};
use crate::error::{Error, Result};
use crate::operators::{AveragingOp, OpKind};
use crate::rational::{recover_simple_fraction, Frac};
use crate::tree::{level_size, VertexPath};
use num::{BigInt, BigRational, One, ToPrimitive};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Extracted depth-gap profile plus hypothesis verdicts.
#[derive(Clone, Debug, Serialize)]
pub struct RhoProfile {
    pub rho: Vec<u32>,
    /// Partial sums η_k = ρ_1 + … + ρ_k.
    pub eta: Vec<u32>,
    /// Stage 1 had exactly one hit under the root.
    pub p1_ok: bool,
    /// Every later stage had exactly one hit under every surviving vertex.
    pub p2_ok: bool,
    /// Density proxy to the explored depth: no level is fully contained in U,
    /// and the boundary images ψ(U) touch every reachable cell at the finest
    /// level whose cell count is still ≤ |U| (cells vacated by a shallower U
    /// element are exempt). A finite list can never certify density; this is
    /// the checkable shadow of it.
    pub p0_density_ok: bool,
    /// δ = F(0,…,0,1) of the operator in use.
    pub delta: f64,
    pub p1_witness: Option<String>,
    pub p2_witness: Option<String>,
    /// U contained vertices deeper than max_depth that were ignored.
    pub truncated: bool,
    pub notes: Vec<String>,
}

fn under_kill(m: usize, level: u32, idx: u64, kills: &[(u32, u64)]) -> Result<bool> {
    for &(lk, ik) in kills {
        if level >= lk && idx / level_size(m, level - lk)? == ik {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Walk U stage by stage: ρ_k, the hit sets, and the (P1)/(P2) uniqueness
/// checks, stopping at `max_depth`.
pub fn extract_rho(
    u_set: &[VertexPath],
    m: usize,
    max_depth: u32,
    op: &AveragingOp,
) -> Result<RhoProfile> {
    if op.arity() != m {
        return Err(Error::shape(format!("operator arity {} with m = {m}", op.arity())));
    }
    level_size(m, max_depth)?;

    let mut elems: BTreeSet<(u32, u64)> = BTreeSet::new();
    let mut truncated = false;
    for v in u_set {
        if v.level() == 0 {
            return Err(Error::domain("the root cannot belong to U".to_string()));
        }
        if v.level() > max_depth {
            truncated = true;
            continue;
        }
        elems.insert((v.level(), v.index(m)?));
    }

    let mut profile = RhoProfile {
        rho: Vec::new(),
        eta: Vec::new(),
        p1_ok: true,
        p2_ok: true,
        p0_density_ok: true,
        delta: op.delta(),
        p1_witness: None,
        p2_witness: None,
        truncated,
        notes: Vec::new(),
    };
    if u_set.is_empty() {
        profile.notes.push(format!("U is empty: no hits to depth {max_depth}"));
        profile.p0_density_ok = false;
        return Ok(profile);
    }

    let mut kills: Vec<(u32, u64)> = Vec::new();
    let mut eta = 0u32;
    let mut stage = 1usize;
    loop {
        // Next hit depth: the closest eligible U element below a surviving
        // level-η vertex.
        let mut best: Option<u32> = None;
        for &(lv, idx) in elems.iter().filter(|&&(lv, _)| lv > eta) {
            let prefix = idx / level_size(m, lv - eta)?;
            if !under_kill(m, eta, prefix, &kills)? {
                best = Some(best.map_or(lv - eta, |b: u32| b.min(lv - eta)));
            }
        }
        let Some(rho_k) = best else {
            if !profile.rho.is_empty() {
                profile
                    .notes
                    .push(format!("no further hits between level {eta} and depth {max_depth}"));
            }
            break;
        };
        let hit_level = eta + rho_k;

        // Group this stage's hits by their surviving level-η ancestor.
        let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &(_, idx) in elems.iter().filter(|&&(lv, _)| lv == hit_level) {
            let prefix = idx / level_size(m, rho_k)?;
            if !under_kill(m, eta, prefix, &kills)? {
                groups.entry(prefix).or_default().push(idx);
            }
        }

        let mut flag = |witness: String| {
            if stage == 1 {
                profile.p1_ok = false;
                profile.p1_witness.get_or_insert(witness);
            } else {
                profile.p2_ok = false;
                profile.p2_witness.get_or_insert(witness);
            }
        };
        for (prefix, hits) in &groups {
            if hits.len() > 1 {
                let y = VertexPath::from_index(eta, *prefix, m)?;
                flag(format!("{} hits of U at level {hit_level} below vertex ({y})", hits.len()));
            }
        }
        // Surviving vertices at level η with no hit below them.
        let mut survivors = u128::from(level_size(m, eta)?);
        for &(lk, _) in &kills {
            survivors -= u128::from(level_size(m, eta - lk)?);
        }
        if (groups.len() as u128) < survivors {
            if let Some(gap) = first_gap(m, eta, &kills, &groups)? {
                let y = VertexPath::from_index(eta, gap, m)?;
                flag(format!("no hit of U at level {hit_level} below vertex ({y})"));
            }
        }

        for hits in groups.values() {
            for &idx in hits {
                kills.push((hit_level, idx));
            }
        }
        profile.rho.push(rho_k);
        eta = hit_level;
        profile.eta.push(eta);
        stage += 1;
        if eta >= max_depth {
            break;
        }
    }
    if profile.rho.is_empty() {
        profile.notes.push(format!("no hits to depth {max_depth}"));
    }

    density_check(&mut profile, &elems, m, max_depth)?;
    Ok(profile)
}

/// Smallest level-η index that is neither under a kill nor a group prefix.
fn first_gap(
    m: usize,
    eta: u32,
    kills: &[(u32, u64)],
    groups: &BTreeMap<u64, Vec<u64>>,
) -> Result<Option<u64>> {
    let mut blocked: Vec<(u64, u64)> = Vec::with_capacity(kills.len() + groups.len());
    for &(lk, ik) in kills {
        let span = level_size(m, eta - lk)?;
        blocked.push((ik * span, (ik + 1) * span));
    }
    for &p in groups.keys() {
        blocked.push((p, p + 1));
    }
    blocked.sort_unstable();
    let mut cur = 0u64;
    for (s, e) in blocked {
        if cur < s {
            return Ok(Some(cur));
        }
        cur = cur.max(e);
    }
    Ok((cur < level_size(m, eta)?).then_some(cur))
}

fn density_check(
    profile: &mut RhoProfile,
    elems: &BTreeSet<(u32, u64)>,
    m: usize,
    max_depth: u32,
) -> Result<()> {
    let mut per_level: BTreeMap<u32, u64> = BTreeMap::new();
    for &(lv, _) in elems {
        *per_level.entry(lv).or_insert(0) += 1;
    }
    for (&lv, &count) in &per_level {
        if count >= level_size(m, lv)? {
            profile.p0_density_ok = false;
            profile.notes.push(format!("level {lv} is entirely contained in U"));
        }
    }
    // Coarsest level whose cell count |U| could still cover.
    let total = elems.len() as u64;
    let mut lstar: Option<u32> = None;
    for l in 0..=max_depth {
        if level_size(m, l)? <= total {
            lstar = Some(l);
        }
    }
    let Some(lstar) = lstar else {
        profile.p0_density_ok = false;
        profile.notes.push("ψ(U) cannot cover even the level-0 cell".to_string());
        return Ok(());
    };
    // A cell is reachable unless it sits strictly inside the subtree of a
    // shallower U element (everything below a hit is vacated, so demanding
    // ψ(U) points there would be asking for density where U forbids it).
    let mut covered: BTreeSet<u64> = BTreeSet::new();
    for &(lv, idx) in elems {
        let cell = if lv >= lstar {
            idx / level_size(m, lv - lstar)?
        } else {
            idx * level_size(m, lstar - lv)?
        };
        covered.insert(cell);
    }
    let shallow: Vec<(u32, u64)> =
        elems.iter().copied().filter(|&(lv, _)| lv < lstar).collect();
    let mut missing = 0u64;
    let mut example: Option<u64> = None;
    for cell in 0..level_size(m, lstar)? {
        if covered.contains(&cell) {
            continue;
        }
        let reachable = !under_kill(m, lstar, cell, &shallow)?;
        if reachable {
            missing += 1;
            example.get_or_insert(cell);
        }
    }
    if missing > 0 {
        profile.p0_density_ok = false;
        let cell = VertexPath::from_index(lstar, example.unwrap(), m)?;
        profile.notes.push(format!(
            "ψ(U) misses {missing} reachable level-{lstar} cell(s), e.g. ({cell})"
        ));
    }
    Ok(())
}

/// Σ_k δ^{ρ_k} over the finite profile.
pub fn series_partial(delta: f64, rho: &[u32]) -> Result<f64> {
    check_delta(delta)?;
    Ok(rho.iter().map(|&r| delta.powi(r as i32)).sum())
}

/// ∏_k 1/(1−δ^{ρ_k}).
pub fn mk_product(delta: f64, rho: &[u32]) -> Result<f64> {
    check_delta(delta)?;
    Ok(rho.iter().map(|&r| 1.0 / (1.0 - delta.powi(r as i32))).product())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("δ must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// Declared asymptotic shape of a ρ profile (divergence of Σδ^{ρ_k} is not
/// decidable from finitely many terms, so verdicts need a declared pattern).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProfilePattern {
    /// ρ_k = ρ for all k.
    Constant { rho: u32 },
    /// ρ_k = a·k + b with a ≥ 1.
    Linear { a: u32, b: u32 },
    /// lim sup ρ_k ≤ sup.
    Bounded { sup: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UcpVerdict {
    Holds,
    Fails,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PatternVerdict {
    pub verdict: UcpVerdict,
    /// Exact value of Σ δ^{ρ_k} when it converges.
    pub series_limit: Option<f64>,
    pub delta: f64,
}

/// UCP verdict for a declared pattern: bounded profiles (constant included)
/// make the series diverge termwise, linear growth makes it geometric.
pub fn classify_pattern(delta: f64, pattern: ProfilePattern) -> Result<PatternVerdict> {
    check_delta(delta)?;
    match pattern {
        ProfilePattern::Constant { rho } => {
            if rho == 0 {
                return Err(Error::domain("constant pattern needs ρ ≥ 1".to_string()));
            }
            Ok(PatternVerdict { verdict: UcpVerdict::Holds, series_limit: None, delta })
        }
        ProfilePattern::Bounded { sup } => {
            if sup == 0 {
                return Err(Error::domain("bounded pattern needs sup ≥ 1".to_string()));
            }
            Ok(PatternVerdict { verdict: UcpVerdict::Holds, series_limit: None, delta })
        }
        ProfilePattern::Linear { a, b } => {
            if a == 0 {
                return Err(Error::domain(
                    "linear pattern needs slope a ≥ 1 (a = 0 is the constant pattern)".to_string(),
                ));
            }
            // Σ_{k≥1} δ^{ak+b} = δ^{a+b}/(1−δ^a).
            let da = delta.powi(a as i32);
            let limit = delta.powi((a + b) as i32) / (1.0 - da);
            Ok(PatternVerdict { verdict: UcpVerdict::Fails, series_limit: Some(limit), delta })
        }
    }
}

/// Exact rational δ when the operator admits one.
fn exact_delta(op: &AveragingOp) -> Option<Frac> {
    let m = op.arity() as i128;
    let alpha_frac = |alpha: f64| {
        recover_simple_fraction(alpha, 1_000_000, 1e-12)
            .or_else(|| crate::rational::frac_from_f64(alpha).ok())
    };
    match *op.kind() {
        OpKind::MeanMidrange { alpha } => {
            let a = alpha_frac(alpha)?;
            Some(a / 2 + (Frac::one() - a) / m)
        }
        OpKind::MeanMedian { alpha } => {
            let a = alpha_frac(alpha)?;
            Some((Frac::one() - a) / m)
        }
        OpKind::MedianMidrange { alpha } => {
            let a = alpha_frac(alpha)?;
            Some((Frac::one() - a) / 2)
        }
        OpKind::PAverage { p } if p == 2.0 => Some(Frac::new(1, m)),
        _ => None,
    }
}

/// The constructed counterexample function and its certificates.
#[derive(Clone, Debug)]
pub struct Counterexample {
    /// Values on levels 0..=depth (stored like a solver output; the
    /// "boundary" level is simply the deepest built level).
    pub solution: TreeSolution,
    /// The canonical U: every chain-bottom vertex within the built depth.
    pub canonical_u: Vec<VertexPath>,
    pub eta: Vec<u32>,
    /// Stage ceilings 𝔐_k = ∏_{i≤k} 1/(1−δ^{ρ_i}); the maximum over level
    /// η_k equals 𝔐_k.
    pub stage_max: Vec<f64>,
    pub delta: f64,
    /// Values came from exact rational arithmetic (rational δ).
    pub delta_is_exact: bool,
    /// Worst F-harmonicity residual over interior vertices.
    pub residual: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Zero,
    /// Stage-k chain vertex, i levels into the stage (level η_{k−1}+i).
    Chain { k: u16, i: u16 },
    /// Constant-value vertex carrying 𝔐_k until level η_k.
    Off { k: u16 },
}

/// Build the explicit bounded F-harmonic function that is 1 at the root and
/// vanishes on (and below) the canonical chain realization of a profile:
/// along each stage-k chain the values step down the ladder
/// 𝔪_{k,i} = 𝔐_{k−1}(1−δ^{ρ_k−i})/(1−δ^{ρ_k}), every off-chain sibling
/// carries 𝔐_k, and at level η_k each off-chain vertex restarts stage k+1.
pub fn build_counterexample(op: &AveragingOp, rho: &[u32], depth: u32) -> Result<Counterexample> {
    let m = op.arity();
    if matches!(op.kind(), OpKind::Custom { .. }) {
        return Err(Error::Unsupported(
            "counterexample construction needs a verified permutation-invariant operator".to_string(),
        ));
    }
    if rho.is_empty() || rho.iter().any(|&r| r == 0) {
        return Err(Error::domain("profile must be nonempty with every ρ_k ≥ 1".to_string()));
    }
    let eta: Vec<u32> = rho
        .iter()
        .scan(0u32, |acc, &r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    let eta_total = *eta.last().unwrap();
    if depth < eta_total {
        return Err(Error::precondition(format!(
            "depth {depth} is shallower than the profile total η_K = {eta_total}"
        )));
    }
    let bottom = level_size(m, depth)?;
    if bottom > crate::dirichlet::MAX_SOLVE_CELLS {
        return Err(Error::capacity(format!(
            "depth {depth} needs {bottom} cells, above the dense-array cap"
        )));
    }

    // Per-stage value tables: chain[k][i] = 𝔪_{k+1,i}, ceiling[k] = 𝔐_{k+1},
    // exact when δ is rational.
    let delta_frac = exact_delta(op);
    let delta = delta_frac
        .as_ref()
        .map(|d| crate::rational::frac_to_f64(d))
        .unwrap_or_else(|| op.delta());
    check_delta(delta)?;
    let mut chain_tables: Vec<Vec<f64>> = Vec::with_capacity(rho.len());
    let mut ceilings: Vec<f64> = Vec::with_capacity(rho.len());
    if let Some(d) = delta_frac {
        let d = BigRational::new(BigInt::from(*d.numer()), BigInt::from(*d.denom()));
        let mut mk = BigRational::one();
        for &r in rho {
            let dr = d.pow(r as i32);
            let denom = BigRational::one() - &dr;
            let mut table = Vec::with_capacity(r as usize + 1);
            for i in 0..=r {
                let num = BigRational::one() - d.pow((r - i) as i32);
                let v = &mk * num / &denom;
                table.push(v.to_f64().ok_or_else(|| {
                    Error::capacity("ladder value does not fit a double".to_string())
                })?);
            }
            mk /= denom;
            chain_tables.push(table);
            ceilings.push(mk.to_f64().ok_or_else(|| {
                Error::capacity("stage ceiling does not fit a double".to_string())
            })?);
        }
    } else {
        let mut mk = 1.0f64;
        for &r in rho {
            let dr = delta.powi(r as i32);
            let denom = 1.0 - dr;
            let table: Vec<f64> = (0..=r)
                .map(|i| mk * (1.0 - delta.powi((r - i) as i32)) / denom)
                .collect();
            mk /= denom;
            chain_tables.push(table);
            ceilings.push(mk);
        }
    }

    let value_of = |s: State| -> f64 {
        match s {
            State::Zero => 0.0,
            State::Chain { k, i } => chain_tables[k as usize - 1][i as usize],
            State::Off { k } => ceilings[k as usize - 1],
        }
    };
    let stage_of_level = |level: u32| -> Option<usize> {
        eta.iter().position(|&e| e == level)
    };

    let is_chain_bottom = |s: State| -> bool {
        matches!(s, State::Chain { k, i } if u32::from(i) == rho[k as usize - 1])
    };
    let k_total = rho.len() as u16;
    let mut states = vec![State::Chain { k: 1, i: 0 }];
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(depth as usize + 1);
    let mut canonical_u = Vec::new();
    levels.push(vec![value_of(states[0])]);
    for level in 0..depth {
        let mut next = Vec::with_capacity(states.len() * m);
        for (idx, &s) in states.iter().enumerate() {
            if is_chain_bottom(s) {
                canonical_u.push(VertexPath::from_index(level, idx as u64, m)?);
            }
            // Children, in digit order 0..m−1; the chain always follows the
            // last digit.
            let children = match s {
                State::Zero => ChildStates::All(State::Zero),
                State::Chain { k, i } => {
                    if u32::from(i) == rho[k as usize - 1] {
                        ChildStates::All(State::Zero)
                    } else {
                        ChildStates::Split { off: State::Off { k }, last: State::Chain { k, i: i + 1 } }
                    }
                }
                State::Off { k } => {
                    if stage_of_level(level) == Some(k as usize - 1) && k < k_total {
                        ChildStates::Split {
                            off: State::Off { k: k + 1 },
                            last: State::Chain { k: k + 1, i: 1 },
                        }
                    } else {
                        ChildStates::All(State::Off { k })
                    }
                }
            };
            match children {
                ChildStates::All(c) => next.extend(std::iter::repeat(c).take(m)),
                ChildStates::Split { off, last } => {
                    next.extend(std::iter::repeat(off).take(m - 1));
                    next.push(last);
                }
            }
        }
        states = next;
        levels.push(states.iter().map(|&s| value_of(s)).collect());
    }
    for (idx, &s) in states.iter().enumerate() {
        if is_chain_bottom(s) {
            canonical_u.push(VertexPath::from_index(depth, idx as u64, m)?);
        }
    }

    let solution = TreeSolution::from_levels(m, &op.label(), harmonicity_tolerance(op), levels);
    let residual = solution.harmonicity_residual(op)?;
    let tol = harmonicity_tolerance(op);
    if residual > tol {
        return Err(Error::precondition(format!(
            "constructed function has harmonicity residual {residual} above tolerance {tol}"
        )));
    }
    Ok(Counterexample {
        solution,
        canonical_u,
        eta,
        stage_max: ceilings,
        delta,
        delta_is_exact: delta_frac.is_some(),
        residual,
    })
}

#[derive(Clone, Copy)]
enum ChildStates {
    All(State),
    Split { off: State, last: State },
}
