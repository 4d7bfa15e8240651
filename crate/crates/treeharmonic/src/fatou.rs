//! Minimal Fatou/BV dimension via τ(m,F) = min{Σ e^{x_j} : F(x) = 0}.
//!
//! The constraint is eliminated exactly: by translation equivariance,
//! F(y − F(y)·1) = 0 for every y, so minimizing g(y) = Σ exp(y_j − F(y))
//! over all of ℝ^m solves the constrained problem, and y ↦ y − F(y)·1
//! recovers a feasible minimizer. g is translation-invariant and piecewise
//! smooth (median/midrange kinks), so descent is done with a derivative-free
//! simplex method under deterministic seeded restarts.
//!
//! Closed forms for the two median families are evaluated alongside and the
//! numeric optimum is compared against them; disagreements are carried in
//! the result, not clamped away. Known behavior: the closed-form F_2 expression
//! is a critical point that stops being the global minimum once m and α are
//! both moderately large (its configuration pins the median to the minimum;
//! splitting the low coordinates does better). See the module tests for the
//! first few verified (m, α) pairs where the numerical optimum drops below
//! the formula.

use crate::error::{Error, Result};
use crate::operators::{AveragingOp, OpKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of a τ minimization.
#[derive(Clone, Debug, Serialize)]
pub struct TauResult {
    pub tau: f64,
    /// Feasible minimizer with F(minimizer) ≈ 0, sorted ascending.
    pub minimizer: Vec<f64>,
    /// log_m(τ): the minimal Fatou/BV dimension.
    pub dim: f64,
    /// |F(minimizer)| as actually evaluated.
    pub constraint_residual: f64,
    /// Closed-form dimension for the operator's family, when one exists.
    pub closed_form: Option<f64>,
    /// dim − closed_form; negative means the numeric optimum undercuts the
    /// formula.
    pub discrepancy: Option<f64>,
}

/// Fixed base seed for the restart spread; restarts are reproducible for a
/// given count regardless of thread schedule.
const TAU_SEED: u64 = 0x7ee5_1eaf;
const NM_MAX_ITERS: usize = 6000;
const POLISH_ROUNDS: usize = 2;

/// Minimize τ(m, F) with `restarts` seeded simplex descents run in parallel.
///
/// `m` must match the operator arity. Fails only if no restart reaches the
/// requested tolerance; the error carries the best incumbent value.
pub fn tau_minimize(op: &AveragingOp, m: usize, restarts: usize, tol: f64) -> Result<TauResult> {
    if m != op.arity() {
        return Err(Error::shape(format!("m = {m} against operator arity {}", op.arity())));
    }
    if restarts == 0 {
        return Err(Error::input("need at least one restart".to_string()));
    }
    if !(tol > 0.0) {
        return Err(Error::input(format!("tolerance must be positive, got {tol}")));
    }

    let starts: Vec<(usize, Vec<f64>)> = (0..restarts).map(|k| (k, start_point(k, m))).collect();
    let runs = crate::exec::map_slice(&starts, |(_, y0)| {
        let mut scratch = Vec::with_capacity(m);
        let mut g = |y: &[f64]| {
            let fy = op.eval_raw(y, &mut scratch);
            y.iter().map(|&v| (v - fy).exp()).sum::<f64>()
        };
        let step = 0.25 * (1.0 + y0.iter().fold(0.0f64, |a, &b| a.max(b.abs())));
        let (mut best, mut val, mut conv) = nelder_mead(&mut g, y0, step, tol, NM_MAX_ITERS);
        for round in 0..POLISH_ROUNDS {
            let h = step * 1e-2f64.powi(round as i32 + 1);
            let (p, v, c) = nelder_mead(&mut g, &best, h, tol, NM_MAX_ITERS);
            if v < val {
                best = p;
                val = v;
            }
            conv = conv || c;
        }
        (val, best, conv)
    });

    let mut winner: Option<(f64, usize)> = None;
    for (k, (val, _, _)) in runs.iter().enumerate() {
        let better = match winner {
            None => true,
            Some((bv, _)) => *val < bv,
        };
        if better && val.is_finite() {
            winner = Some((*val, k));
        }
    }
    let Some((best_val, best_k)) = winner else {
        return Err(Error::Optimization {
            context: "all τ restarts diverged".to_string(),
            best: f64::INFINITY,
        });
    };
    if !runs.iter().any(|(_, _, conv)| *conv) {
        return Err(Error::Optimization {
            context: format!("no τ restart of {restarts} converged to {tol}"),
            best: best_val,
        });
    }

    let y = &runs[best_k].1;
    let fy = op.eval(y)?;
    let mut x: Vec<f64> = y.iter().map(|&v| v - fy).collect();
    x.sort_by(f64::total_cmp);
    let tau: f64 = x.iter().map(|&v| v.exp()).sum();
    let constraint_residual = op.eval(&x)?.abs();
    let dim = tau.ln() / (m as f64).ln();
    let closed_form = closed_form_dim(op);
    let discrepancy = closed_form.map(|c| dim - c);
    Ok(TauResult { tau, minimizer: x, dim, constraint_residual, closed_form, discrepancy })
}

/// Restart 0 is the symmetric point; later restarts spread like log of a
/// flat-Dirichlet draw at a cycling scale, so every face of the exponent
/// simplex is probed.
fn start_point(k: usize, m: usize) -> Vec<f64> {
    if k == 0 {
        return vec![0.0; m];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(TAU_SEED ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let scale = [0.5, 1.0, 2.0][k % 3];
    let gammas: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = gammas.iter().sum();
    gammas
        .iter()
        .map(|&g| scale * ((m as f64) * (g / total).max(1e-12)).ln())
        .collect()
}

/// Adaptive Nelder–Mead (dimension-scaled coefficients). Returns the best
/// point, its value, and whether the value spread fell below `tol`.
fn nelder_mead(
    g: &mut impl FnMut(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let nf = n as f64;
    let (refl, expa, contr, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((g(start), start.to_vec()));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push((g(&p), p));
    }

    let mut converged = false;
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let best = simplex[0].0;
        let worst = simplex[n].0;
        if worst - best <= tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (_, p) in &simplex[..n] {
            for (c, &v) in centroid.iter_mut().zip(p) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= nf;
        }
        let worst_p = simplex[n].1.clone();
        let second_worst = simplex[n - 1].0;

        let at = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_p)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect()
        };
        let xr = at(refl);
        let fr = g(&xr);
        if fr < best {
            let xe = at(refl * expa);
            let fe = g(&xe);
            simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < second_worst {
            simplex[n] = (fr, xr);
        } else {
            let (xc, fc) = if fr < simplex[n].0 {
                let xc = at(refl * contr);
                let fc = g(&xc);
                (xc, fc)
            } else {
                let xc = at(-contr);
                let fc = g(&xc);
                (xc, fc)
            };
            if fc < simplex[n].0.min(fr) {
                simplex[n] = (fc, xc);
            } else {
                let best_p = simplex[0].1.clone();
                for entry in &mut simplex[1..] {
                    let p: Vec<f64> = best_p
                        .iter()
                        .zip(&entry.1)
                        .map(|(&b, &v)| b + shrink * (v - b))
                        .collect();
                    *entry = (g(&p), p);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (val, point) = simplex.swap_remove(0);
    (point, val, converged)
}

/// Closed-form dimension for operators that have one: both mean-like cases
/// give 1 exactly, the two median families use their closed-form expressions
/// (F_1 under the parity-dependent s convention).
pub fn closed_form_dim(op: &AveragingOp) -> Option<f64> {
    let m = op.arity() as u64;
    match *op.kind() {
        OpKind::MeanMidrange { alpha } if alpha == 0.0 => Some(1.0),
        OpKind::PAverage { p } if p == 2.0 => Some(1.0),
        OpKind::MeanMedian { alpha } => {
            tau_closed_form_f1(m, alpha, f1_s_standard(m)).ok().map(|c| c.dim)
        }
        OpKind::MedianMidrange { alpha } => tau_closed_form_f2(m, alpha).ok().map(|c| c.dim),
        _ => None,
    }
}

/// The standard s convention: ⌊m/2⌋+1 for odd m, m/2 for even m.
pub fn f1_s_standard(m: u64) -> u64 {
    if m % 2 == 1 {
        m / 2 + 1
    } else {
        m / 2
    }
}

/// The rival reading (⌊m/2⌋+1 regardless of parity); coincides with the
/// standard one for odd m.
pub fn f1_s_alternate(m: u64) -> u64 {
    m / 2 + 1
}

#[derive(Clone, Debug, Serialize)]
pub struct F1Closed {
    pub s: u64,
    /// The ratio parameter of the closed-form minimizer (unrelated to the
    /// measure exponent that shares the letter elsewhere).
    pub gamma: f64,
    pub tau: f64,
    pub dim: f64,
}

/// Closed-form F_1 optimum: dim = log_m( (m/(1−α)) ·
/// ((m−s+1)(1−α)/(m+(1−s)(1−α)))^{1−((s−1)/m)(1−α)} ).
pub fn tau_closed_form_f1(m: u64, alpha: f64, s: u64) -> Result<F1Closed> {
    check_closed_args(m, alpha)?;
    if s < 2 || s > m {
        return Err(Error::domain(format!("s = {s} outside 2..={m}")));
    }
    let (mf, sf) = (m as f64, s as f64);
    let num = mf + (1.0 - sf) * (1.0 - alpha);
    let den = (mf - sf + 1.0) * (1.0 - alpha);
    let gamma = num / den;
    let expo = 1.0 - ((sf - 1.0) / mf) * (1.0 - alpha);
    let tau = mf / (1.0 - alpha) * (den / num).powf(expo);
    Ok(F1Closed { s, gamma, tau, dim: tau.ln() / mf.ln() })
}

/// The closed-form F_1 minimizer: s−1 coordinates at −((m+(1−s)(1−α))/m)·ln γ
/// and the rest at ((s−1)(1−α)/m)·ln γ.
pub fn f1_standard_minimizer(m: u64, alpha: f64, s: u64) -> Result<Vec<f64>> {
    let closed = tau_closed_form_f1(m, alpha, s)?;
    let (mf, sf) = (m as f64, s as f64);
    let lg = closed.gamma.ln();
    let low = -(mf + (1.0 - sf) * (1.0 - alpha)) / mf * lg;
    let high = (sf - 1.0) * (1.0 - alpha) / mf * lg;
    let mut x = vec![low; (s - 1) as usize];
    x.extend(std::iter::repeat(high).take((m - s + 1) as usize));
    Ok(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct F2Closed {
    /// η = (1+α)/((m−1)(1−α)).
    pub eta: f64,
    pub tau: f64,
    pub dim: f64,
}

/// Closed-form F_2 optimum: dim = log_m( 2(m−1)(1+α)^{−(1+α)/2} /
/// ((m−1)(1−α))^{(1−α)/2} ).
pub fn tau_closed_form_f2(m: u64, alpha: f64) -> Result<F2Closed> {
    check_closed_args(m, alpha)?;
    let mf = m as f64;
    let eta = (1.0 + alpha) / ((mf - 1.0) * (1.0 - alpha));
    let tau = 2.0 * (mf - 1.0) * (1.0 + alpha).powf(-(1.0 + alpha) / 2.0)
        / ((mf - 1.0) * (1.0 - alpha)).powf((1.0 - alpha) / 2.0);
    Ok(F2Closed { eta, tau, dim: tau.ln() / mf.ln() })
}

/// The closed-form F_2 minimizer, with the lone −((1+α)/2)·ln η coordinate in
/// last position for α ≤ (m−2)/m and first position past that.
pub fn f2_closed_minimizer(m: u64, alpha: f64) -> Result<Vec<f64>> {
    let closed = tau_closed_form_f2(m, alpha)?;
    let le = closed.eta.ln();
    let bulk = (1.0 - alpha) / 2.0 * le;
    let lone = -(1.0 + alpha) / 2.0 * le;
    let mf = m as f64;
    let mut x = vec![bulk; m as usize];
    if alpha <= (mf - 2.0) / mf {
        x[m as usize - 1] = lone;
    } else {
        x[0] = lone;
    }
    Ok(x)
}

fn check_closed_args(m: u64, alpha: f64) -> Result<()> {
    if m < 3 {
        return Err(Error::domain(format!("m = {m} below 3")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!("α = {alpha} outside [0,1) (α = 1 is singular)")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClosedFamily {
    F1,
    F2,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DimRow {
    pub m: u64,
    pub dim: f64,
}

/// Large-m limit of the minimal dimension.
pub fn dim_limit(family: ClosedFamily, alpha: f64) -> f64 {
    match family {
        ClosedFamily::F1 => 1.0,
        ClosedFamily::F2 => (1.0 + alpha) / 2.0,
    }
}

/// Closed-form dimension along a grid of m, for eyeballing (and asserting)
/// the approach to `dim_limit`.
pub fn dim_limits_sweep(family: ClosedFamily, alpha: f64, m_grid: &[u64]) -> Result<Vec<DimRow>> {
    m_grid
        .iter()
        .map(|&m| {
            let dim = match family {
                ClosedFamily::F1 => tau_closed_form_f1(m, alpha, f1_s_standard(m))?.dim,
                ClosedFamily::F2 => tau_closed_form_f2(m, alpha)?.dim,
            };
            Ok(DimRow { m, dim })
        })
        .collect()
}

/// Which s convention the numeric optimum matched, for reporting.
pub fn f1_convention_match(m: u64, alpha: f64, dim_numeric: f64, tol: f64) -> Result<&'static str> {
    let a = tau_closed_form_f1(m, alpha, f1_s_standard(m))?.dim;
    let b = tau_closed_form_f1(m, alpha, f1_s_alternate(m))?.dim;
    let hit_a = (dim_numeric - a).abs() <= tol;
    let hit_b = (dim_numeric - b).abs() <= tol;
    Ok(match (hit_a, hit_b) {
        (true, true) => "both",
        (true, false) => "standard",
        (false, true) => "alternate",
        (false, false) => "neither",
    })
}
