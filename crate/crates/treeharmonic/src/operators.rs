//! Averaging operators F: R^m -> R on the successor values of a tree vertex.
//!
//! An averaging operator is permutation invariant and satisfies
//!   (i)   F(0,…,0) = 0 and F(1,…,1) = 1,
//!   (ii)  F(t·x) = t·F(x),
//!   (iii) F(t + x) = t + F(x),
//!   (iv)  F(x) < max_j x_j unless all coordinates are equal,
//!   (v)   coordinatewise nondecreasing.
//!
//! Four families are provided:
//! * mean/midrange mix  F_0 = (α/2)(max+min) + (β/m)Σ,
//! * mean/median mix    F_1 = α·med + (β/m)Σ,
//! * median/midrange mix F_2 = α·med + (β/2)(max+min),   (α + β = 1 throughout)
//! * p-average          F^p = the unique root t of Σ (x_j−t)|x_j−t|^{p−2} = 0,
//!
//! plus a test-only custom hook. Several estimates depend on the one-sided
//! Lipschitz constants: κ with F(x + c·e_1) ≤ F(x) + cκ (contraction) and
//! η with F(x + c·e_1) ≥ F(x) + cη (expansion); closed forms are exposed
//! where known and an axiom fuzzer measures them empirically.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Default bisection tolerance for the implicit p-average root.
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-13;
/// Hard iteration cap for the bisection (2^-200 of the initial bracket).
pub const MAX_ROOT_ITERATIONS: u32 = 200;
/// Accepted exponent range for the p-average family. p near 1 makes the
/// defining function flat at the root; p is capped well before that.
pub const MIN_P: f64 = 1.0 + 1e-6;
pub const MAX_P: f64 = 64.0;

/// Operator family plus its family-specific parameter.
#[derive(Clone)]
pub enum OpKind {
    /// F_0: α·midrange + β·mean.
    MeanMidrange { alpha: f64 },
    /// F_1: α·median + β·mean.
    MeanMedian { alpha: f64 },
    /// F_2: α·median + β·midrange.
    MedianMidrange { alpha: f64 },
    /// F^p: implicit p-average.
    PAverage { p: f64 },
    /// Arbitrary hook for tests (axioms are *not* guaranteed).
    Custom {
        name: String,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::MeanMidrange { alpha } => write!(f, "MeanMidrange {{ alpha: {alpha} }}"),
            OpKind::MeanMedian { alpha } => write!(f, "MeanMedian {{ alpha: {alpha} }}"),
            OpKind::MedianMidrange { alpha } => write!(f, "MedianMidrange {{ alpha: {alpha} }}"),
            OpKind::PAverage { p } => write!(f, "PAverage {{ p: {p} }}"),
            OpKind::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// An averaging operator of fixed arity m ≥ 3.
#[derive(Clone, Debug)]
pub struct AveragingOp {
    kind: OpKind,
    m: usize,
    root_tolerance: f64,
}

fn validate_m(m: usize) -> Result<()> {
    if m < 3 {
        return Err(Error::domain(format!("arity m must be ≥ 3, got {m}")));
    }
    Ok(())
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

impl AveragingOp {
    /// F_0 = (α/2)(max+min) + ((1−α)/m)·Σ.
    pub fn mean_midrange(m: usize, alpha: f64) -> Result<Self> {
        validate_m(m)?;
        validate_alpha(alpha)?;
        Ok(Self { kind: OpKind::MeanMidrange { alpha }, m, root_tolerance: DEFAULT_ROOT_TOLERANCE })
    }

    /// F_1 = α·med + ((1−α)/m)·Σ.
    pub fn mean_median(m: usize, alpha: f64) -> Result<Self> {
        validate_m(m)?;
        validate_alpha(alpha)?;
        Ok(Self { kind: OpKind::MeanMedian { alpha }, m, root_tolerance: DEFAULT_ROOT_TOLERANCE })
    }

    /// F_2 = α·med + ((1−α)/2)(max+min).
    pub fn median_midrange(m: usize, alpha: f64) -> Result<Self> {
        validate_m(m)?;
        validate_alpha(alpha)?;
        Ok(Self { kind: OpKind::MedianMidrange { alpha }, m, root_tolerance: DEFAULT_ROOT_TOLERANCE })
    }

    /// F^p: t with Σ (x_j−t)|x_j−t|^{p−2} = 0, found by bisection.
    pub fn p_average(m: usize, p: f64) -> Result<Self> {
        validate_m(m)?;
        if !p.is_finite() || !(MIN_P..=MAX_P).contains(&p) {
            return Err(Error::domain(format!("p must lie in [{MIN_P}, {MAX_P}], got {p}")));
        }
        Ok(Self { kind: OpKind::PAverage { p }, m, root_tolerance: DEFAULT_ROOT_TOLERANCE })
    }

    /// Test-only escape hatch; the hook is trusted to be an averaging operator
    /// (the axiom fuzzer exists to check exactly that).
    pub fn custom(m: usize, name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        validate_m(m)?;
        Ok(Self {
            kind: OpKind::Custom { name: name.to_string(), f: Arc::new(f) },
            m,
            root_tolerance: DEFAULT_ROOT_TOLERANCE,
        })
    }

    /// Parse a CLI operator spec: `F0:alpha=0.5`, `F1:alpha=0.25`,
    /// `F2:alpha=0.75`, `Fp:p=3.5`.
    pub fn parse_spec(spec: &str, m: usize) -> Result<Self> {
        let (family, params) = spec.split_once(':').unwrap_or((spec, ""));
        let parse_param = |key: &str| -> Result<f64> {
            let (k, v) = params
                .split_once('=')
                .ok_or_else(|| Error::input(format!("operator spec {spec:?}: expected {key}=<value>")))?;
            if k.trim() != key {
                return Err(Error::input(format!("operator spec {spec:?}: unknown parameter {k:?}, expected {key:?}")));
            }
            v.trim()
                .parse()
                .map_err(|_| Error::input(format!("operator spec {spec:?}: cannot parse {v:?} as a number")))
        };
        match family.trim() {
            "F0" => Self::mean_midrange(m, parse_param("alpha")?),
            "F1" => Self::mean_median(m, parse_param("alpha")?),
            "F2" => Self::median_midrange(m, parse_param("alpha")?),
            "Fp" => Self::p_average(m, parse_param("p")?),
            other => Err(Error::input(format!("unknown operator family {other:?} (expected F0, F1, F2 or Fp)"))),
        }
    }

    pub fn with_root_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::domain(format!("root tolerance must be positive, got {tol}")));
        }
        self.root_tolerance = tol;
        Ok(self)
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn arity(&self) -> usize {
        self.m
    }

    pub fn root_tolerance(&self) -> f64 {
        self.root_tolerance
    }

    /// Mixing weight α (None for p-average/custom).
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            OpKind::MeanMidrange { alpha }
            | OpKind::MeanMedian { alpha }
            | OpKind::MedianMidrange { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Complementary weight β = 1 − α.
    pub fn beta(&self) -> Option<f64> {
        self.alpha().map(|a| 1.0 - a)
    }

    /// Short human/CSV label, e.g. `F1:alpha=0.5`.
    pub fn label(&self) -> String {
        match &self.kind {
            OpKind::MeanMidrange { alpha } => format!("F0:alpha={alpha}"),
            OpKind::MeanMedian { alpha } => format!("F1:alpha={alpha}"),
            OpKind::MedianMidrange { alpha } => format!("F2:alpha={alpha}"),
            OpKind::PAverage { p } => format!("Fp:p={p}"),
            OpKind::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    /// Apply the operator to exactly m finite values.
    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.m {
            return Err(Error::Arity { expected: self.m, got: values.len() });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite successor value {bad}")));
        }
        let mut scratch = Vec::with_capacity(self.m);
        Ok(self.eval_raw(values, &mut scratch))
    }

    /// Hot-path eval: caller guarantees arity and finiteness; `scratch` is
    /// reused across calls to keep the median selection allocation-free.
    pub(crate) fn eval_raw(&self, values: &[f64], scratch: &mut Vec<f64>) -> f64 {
        match &self.kind {
            OpKind::MeanMidrange { alpha } => {
                let (lo, hi) = min_max(values);
                alpha * 0.5 * (lo + hi) + (1.0 - alpha) * mean(values)
            }
            OpKind::MeanMedian { alpha } => {
                alpha * median_with(values, scratch) + (1.0 - alpha) * mean(values)
            }
            OpKind::MedianMidrange { alpha } => {
                let (lo, hi) = min_max(values);
                alpha * median_with(values, scratch) + (1.0 - alpha) * 0.5 * (lo + hi)
            }
            OpKind::PAverage { p } => p_average_root(values, *p, self.root_tolerance),
            OpKind::Custom { f, .. } => f(values),
        }
    }

    /// δ = F(0,…,0,1): the weight a single raised coordinate receives. By
    /// permutation invariance and (ii)/(iii), F(a,…,a,b) = a(1−δ) + bδ.
    pub fn delta(&self) -> f64 {
        let mut v = vec![0.0; self.m];
        v[self.m - 1] = 1.0;
        let mut scratch = Vec::with_capacity(self.m);
        self.eval_raw(&v, &mut scratch)
    }

    /// Closed-form contraction constant κ with F(x + c·e_1) ≤ F(x) + cκ:
    /// α/2 + β/m (F_0), α + β/m (F_1), α + β/2 (F_2), 1/m (exact mean p=2).
    ///
    /// None for other p-averages and custom hooks. See
    /// [`contraction_constant_disputed`](Self::contraction_constant_disputed)
    /// for the F_2 caveat.
    pub fn contraction_constant(&self) -> Option<f64> {
        let m = self.m as f64;
        match self.kind {
            OpKind::MeanMidrange { alpha } => Some(alpha / 2.0 + (1.0 - alpha) / m),
            OpKind::MeanMedian { alpha } => Some(alpha + (1.0 - alpha) / m),
            OpKind::MedianMidrange { alpha } => Some(alpha + (1.0 - alpha) / 2.0),
            OpKind::PAverage { p } if p == 2.0 => Some(1.0 / m),
            _ => None,
        }
    }

    /// The source material both denies that the median/midrange family has a
    /// contraction constant and displays α + β/2 for it. We return the
    /// constant (it is valid: a single bumped coordinate moves the median by
    /// at most c and max+min by at most c) but flag it so reports can show the
    /// empirical value alongside.
    pub fn contraction_constant_disputed(&self) -> bool {
        matches!(self.kind, OpKind::MedianMidrange { .. })
    }

    /// Closed-form expansion constant η with F(x + c·e_1) ≥ F(x) + cη:
    /// β/m for F_0/F_1 (absent when β = 0, since the estimate needs η > 0),
    /// 1/m for the exact mean p=2. None otherwise (F_2 has η = 0: the bumped
    /// coordinate can avoid median, max and min entirely).
    pub fn expansion_constant(&self) -> Option<f64> {
        let m = self.m as f64;
        match self.kind {
            OpKind::MeanMidrange { alpha } | OpKind::MeanMedian { alpha } if alpha < 1.0 => {
                Some((1.0 - alpha) / m)
            }
            OpKind::PAverage { p } if p == 2.0 => Some(1.0 / m),
            _ => None,
        }
    }

    /// Seeded randomized check of axioms (i)–(v), permutation invariance,
    /// reflection F(1−x) = 1−F(x), the antisymmetric point F(1,0,…,0,−1) = 0,
    /// and the empirical one-sided Lipschitz constants.
    pub fn check_axioms(&self, samples: usize, seed: u64, tol: f64) -> Result<AxiomReport> {
        check_axioms_impl(self, samples, seed, tol)
    }
}

/// Median with the standard convention: the middle value for odd length, the
/// average of the two middle values for even length.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("median of an empty slice".to_string()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value {bad} in median")));
    }
    let mut scratch = Vec::with_capacity(values.len());
    Ok(median_with(values, &mut scratch))
}

fn median_with(values: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(values);
    let n = scratch.len();
    let mid = n / 2;
    let (left, upper, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Root of g(t) = Σ (x_j−t)|x_j−t|^{p−2} on [min x, max x], as a standalone
/// routine (validating wrapper around the solver used by the PAverage family).
pub fn implicit_p_average(values: &[f64], p: f64, tol: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("p-average of an empty slice".to_string()));
    }
    if !(MIN_P..=MAX_P).contains(&p) {
        return Err(Error::domain(format!("p must lie in [{MIN_P}, {MAX_P}], got {p}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value {bad} in p-average")));
    }
    Ok(p_average_root(values, p, tol))
}

fn p_average_root(values: &[f64], p: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = min_max(values);
    if hi <= lo {
        return lo;
    }
    let e = p - 1.0;
    let g = |t: f64| values.iter().map(|&x| signed_pow(x - t, e)).sum::<f64>();
    // g is strictly decreasing with g(min) ≥ 0 ≥ g(max); bisect keeping that
    // bracket. Deterministic: fixed midpoint sequence, no early exit on g = 0.
    for _ in 0..MAX_ROOT_ITERATIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// sign(x)·|x|^e with exact passthrough at e = 1 (the p = 2 case).
fn signed_pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// Outcome of the randomized axiom check. Residuals are worst absolute
/// violations over all samples (0 = never violated); `strict_max_margin` is
/// the signed worst of F(x) − max x over non-constant samples and must stay
/// strictly negative for axiom (iv).
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub operator: String,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub normalization_residual: f64,
    pub homogeneity_residual: f64,
    pub translation_residual: f64,
    pub strict_max_margin: f64,
    pub monotonicity_residual: f64,
    pub permutation_residual: f64,
    pub reflection_residual: f64,
    pub antisymmetry_residual: f64,
    /// max over samples of (F(x + c·e_j) − F(x))/c.
    pub empirical_kappa: f64,
    /// min over samples of the same quotient.
    pub empirical_eta: f64,
    /// Closed forms for comparison, when known.
    pub kappa_closed_form: Option<f64>,
    pub eta_closed_form: Option<f64>,
    /// True when the source material is internally inconsistent about κ
    /// (median/midrange family); the empirical value is the arbiter.
    pub kappa_disputed: bool,
    /// Most negative coordinate seen among samples with F(x) ≥ 0 and
    /// max x ≤ 1 (the operators admit a uniform bound b with min x ≥ −b
    /// on that set; None if no sample qualified).
    pub empirical_b: Option<f64>,
    pub passed: bool,
}

impl AxiomReport {
    /// Names of the checks that failed, for reporting.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let t = self.tol;
        if !(self.normalization_residual <= t) {
            out.push("normalization");
        }
        if !(self.homogeneity_residual <= t) {
            out.push("homogeneity");
        }
        if !(self.translation_residual <= t) {
            out.push("translation");
        }
        if !(self.strict_max_margin < 0.0) {
            out.push("strict_below_max");
        }
        if !(self.monotonicity_residual <= t) {
            out.push("monotonicity");
        }
        if !(self.permutation_residual <= t) {
            out.push("permutation");
        }
        if !(self.reflection_residual <= t) {
            out.push("reflection");
        }
        if !(self.antisymmetry_residual <= t) {
            out.push("antisymmetry");
        }
        if let Some(k) = self.kappa_closed_form {
            if !(self.empirical_kappa <= k + t) {
                out.push("contraction");
            }
        }
        if let Some(e) = self.eta_closed_form {
            if !(self.empirical_eta >= e - t) {
                out.push("expansion");
            }
        }
        out
    }
}

/// Bump offsets c are drawn from [0.01·R, R]: the difference quotient
/// (F(x+c·e_j) − F(x))/c loses precision as c → 0.
const SAMPLE_RANGE: f64 = 4.0;

fn check_axioms_impl(op: &AveragingOp, samples: usize, seed: u64, tol: f64) -> Result<AxiomReport> {
    if samples == 0 {
        return Err(Error::domain("axiom check needs at least one sample".to_string()));
    }
    let m = op.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = Vec::with_capacity(m);
    let mut ev = |v: &[f64]| op.eval_raw(v, &mut scratch);

    let r = SAMPLE_RANGE;
    let mut report = AxiomReport {
        operator: op.label(),
        samples,
        seed,
        tol,
        normalization_residual: ev(&vec![0.0; m]).abs().max((ev(&vec![1.0; m]) - 1.0).abs()),
        homogeneity_residual: 0.0,
        translation_residual: 0.0,
        strict_max_margin: f64::NEG_INFINITY,
        monotonicity_residual: 0.0,
        permutation_residual: 0.0,
        reflection_residual: 0.0,
        antisymmetry_residual: {
            let mut v = vec![0.0; m];
            v[0] = 1.0;
            v[m - 1] = -1.0;
            ev(&v).abs()
        },
        empirical_kappa: f64::NEG_INFINITY,
        empirical_eta: f64::INFINITY,
        kappa_closed_form: op.contraction_constant(),
        eta_closed_form: op.expansion_constant(),
        kappa_disputed: op.contraction_constant_disputed(),
        empirical_b: None,
        passed: false,
    };

    let mut x = vec![0.0f64; m];
    let mut y = vec![0.0f64; m];
    let mut idx: Vec<usize> = (0..m).collect();
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.gen_range(-r..r);
        }
        let fx = ev(&x);

        // (ii) homogeneity, including negative scales.
        let t = rng.gen_range(-2.0..2.0f64);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = t * xi;
        }
        report.homogeneity_residual = report.homogeneity_residual.max((ev(&y) - t * fx).abs());

        // (iii) translation.
        let s = rng.gen_range(-r..r);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = s + xi;
        }
        report.translation_residual = report.translation_residual.max((ev(&y) - (s + fx)).abs());

        // (iv) strictly below the max for non-constant input (continuous
        // sampling never produces a constant vector).
        let (_, hi) = min_max(&x);
        report.strict_max_margin = report.strict_max_margin.max(fx - hi);

        // (v) monotone in each coordinate + the Lipschitz quotients.
        let c = rng.gen_range(0.01 * r..r);
        let j = rng.gen_range(0..m);
        y.copy_from_slice(&x);
        y[j] += c;
        let quotient = (ev(&y) - fx) / c;
        report.monotonicity_residual = report.monotonicity_residual.max(-quotient * c);
        report.empirical_kappa = report.empirical_kappa.max(quotient);
        report.empirical_eta = report.empirical_eta.min(quotient);

        // Permutation invariance.
        idx.iter_mut().enumerate().for_each(|(i, v)| *v = i);
        idx.shuffle(&mut rng);
        for (yi, &i) in y.iter_mut().zip(idx.iter()) {
            *yi = x[i];
        }
        report.permutation_residual = report.permutation_residual.max((ev(&y) - fx).abs());

        // Reflection F(1−x) = 1−F(x).
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = 1.0 - xi;
        }
        report.reflection_residual = report.reflection_residual.max((ev(&y) - (1.0 - fx)).abs());

        // Lower-bound witness on {F ≥ 0, max ≤ 1}.
        let (lo, hi) = min_max(&x);
        if fx >= 0.0 && hi <= 1.0 {
            report.empirical_b = Some(report.empirical_b.map_or(lo, |b| b.min(lo)));
        }
    }

    let mut passed = report.normalization_residual <= tol
        && report.homogeneity_residual <= tol
        && report.translation_residual <= tol
        && report.strict_max_margin < 0.0
        && report.monotonicity_residual <= tol
        && report.permutation_residual <= tol
        && report.reflection_residual <= tol
        && report.antisymmetry_residual <= tol;
    if let Some(k) = report.kappa_closed_form {
        passed &= report.empirical_kappa <= k + tol;
    }
    if let Some(e) = report.eta_closed_form {
        passed &= report.empirical_eta >= e - tol;
    }
    report.passed = passed;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {a} ≈ {b} (tol {tol})");
    }

    #[test]
    fn mean_midrange_pure_mean() {
        let op = AveragingOp::mean_midrange(3, 0.0).unwrap();
        assert_eq!(op.eval(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn mean_midrange_pure_midrange() {
        let op = AveragingOp::mean_midrange(3, 1.0).unwrap();
        assert_eq!(op.eval(&[0.0, 0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn mean_median_mixed() {
        let op = AveragingOp::mean_median(3, 0.5).unwrap();
        close(op.eval(&[0.0, 0.0, 1.0]).unwrap(), 1.0 / 6.0, 1e-15);
    }

    #[test]
    fn p_average_p2_is_mean() {
        let op = AveragingOp::p_average(3, 2.0).unwrap();
        close(op.eval(&[1.0, 2.0, 3.0]).unwrap(), 2.0, DEFAULT_ROOT_TOLERANCE);
        close(implicit_p_average(&[0.0, 0.0, 3.0], 2.0, 1e-13).unwrap(), 1.0, 1e-13);
    }

    #[test]
    fn p_average_constant_short_circuits() {
        close(implicit_p_average(&[7.0, 7.0, 7.0], 3.5, 1e-13).unwrap(), 7.0, 0.0);
    }

    #[test]
    fn p_average_p4_matches_scalar_oracle() {
        // Independent oracle: F^4(0,0,1) is the root of 2t^3 + (t-1)^3 = 0,
        // solved here by a bisection on the cubic itself.
        let f = |t: f64| 2.0 * t.powi(3) + (t - 1.0).powi(3);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let oracle = 0.5 * (lo + hi); // ≈ 0.4424933340244421
        close(oracle, 0.4424933340244421, 1e-15);
        let got = implicit_p_average(&[0.0, 0.0, 1.0], 4.0, 1e-13).unwrap();
        close(got, oracle, 1e-12);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[0.0, 1.0, 1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(median(&[5.0, 5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(median(&[2.0, 1.0, 4.0, 8.0]).unwrap(), 3.0);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn delta_values() {
        close(AveragingOp::mean_midrange(3, 1.0).unwrap().delta(), 0.5, 0.0);
        close(AveragingOp::mean_median(3, 0.5).unwrap().delta(), 1.0 / 6.0, 1e-16);
        close(AveragingOp::p_average(3, 2.0).unwrap().delta(), 1.0 / 3.0, 1e-13);
    }

    #[test]
    fn closed_form_constants() {
        let f0 = AveragingOp::mean_midrange(3, 0.5).unwrap();
        close(f0.contraction_constant().unwrap(), 5.0 / 12.0, 1e-15);
        close(f0.expansion_constant().unwrap(), 1.0 / 6.0, 1e-15);

        let f1 = AveragingOp::mean_median(3, 0.5).unwrap();
        close(f1.contraction_constant().unwrap(), 2.0 / 3.0, 1e-15);

        let f1w = AveragingOp::mean_median(4, 0.0).unwrap();
        close(f1w.expansion_constant().unwrap(), 0.25, 0.0);

        let f2 = AveragingOp::median_midrange(3, 0.5).unwrap();
        close(f2.contraction_constant().unwrap(), 0.75, 0.0);
        assert!(f2.contraction_constant_disputed());
        assert!(f2.expansion_constant().is_none());

        // β = 0 leaves no expansion constant (η must be positive).
        assert!(AveragingOp::mean_midrange(3, 1.0).unwrap().expansion_constant().is_none());

        // Exact p = 2 is the arithmetic mean.
        let mean = AveragingOp::p_average(5, 2.0).unwrap();
        close(mean.contraction_constant().unwrap(), 0.2, 0.0);
        close(mean.expansion_constant().unwrap(), 0.2, 0.0);
        assert!(AveragingOp::p_average(5, 3.0).unwrap().contraction_constant().is_none());
        assert!(AveragingOp::p_average(5, 3.0).unwrap().expansion_constant().is_none());
    }

    #[test]
    fn construction_errors() {
        assert!(AveragingOp::mean_midrange(2, 0.5).is_err());
        assert!(AveragingOp::mean_median(3, 1.5).is_err());
        assert!(AveragingOp::mean_median(3, -0.1).is_err());
        assert!(AveragingOp::p_average(3, 1.0).is_err());
        assert!(AveragingOp::p_average(3, 100.0).is_err());
        assert!(AveragingOp::mean_median(3, 0.5).unwrap().with_root_tolerance(0.0).is_err());
    }

    #[test]
    fn eval_errors() {
        let op = AveragingOp::mean_median(3, 0.5).unwrap();
        assert!(matches!(op.eval(&[1.0, 2.0]), Err(Error::Arity { expected: 3, got: 2 })));
        assert!(op.eval(&[1.0, 2.0, f64::NAN]).is_err());
        assert!(op.eval(&[1.0, 2.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn parse_specs() {
        assert!(matches!(
            AveragingOp::parse_spec("F0:alpha=0.5", 3).unwrap().kind(),
            OpKind::MeanMidrange { .. }
        ));
        assert!(matches!(
            AveragingOp::parse_spec("Fp:p=3.5", 4).unwrap().kind(),
            OpKind::PAverage { .. }
        ));
        assert!(AveragingOp::parse_spec("F9:alpha=0.5", 3).is_err());
        assert!(AveragingOp::parse_spec("F1:p=0.5", 3).is_err());
        assert!(AveragingOp::parse_spec("F1:alpha=x", 3).is_err());
        assert!(AveragingOp::parse_spec("F1", 3).is_err());
    }

    #[test]
    fn axiom_fuzz_standard_families_pass() {
        for op in [
            AveragingOp::mean_midrange(3, 0.5).unwrap(),
            AveragingOp::mean_median(4, 0.25).unwrap(),
            AveragingOp::median_midrange(3, 0.75).unwrap(),
            AveragingOp::p_average(3, 3.0).unwrap(),
        ] {
            let tol = if matches!(op.kind(), OpKind::PAverage { .. }) { 1e-7 } else { 1e-9 };
            let rep = op.check_axioms(2000, 42, tol).unwrap();
            assert!(rep.passed, "{} failed axioms: {:?}", rep.operator, rep.failures());
        }
    }

    #[test]
    fn axiom_fuzz_detects_max() {
        let op = AveragingOp::custom(3, "max", |v| v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))).unwrap();
        let rep = op.check_axioms(500, 7, 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(rep.failures().contains(&"strict_below_max"));
    }

    #[test]
    fn axiom_fuzz_is_deterministic() {
        let op = AveragingOp::mean_median(3, 0.5).unwrap();
        let a = op.check_axioms(500, 11, 1e-9).unwrap();
        let b = op.check_axioms(500, 11, 1e-9).unwrap();
        assert_eq!(a.empirical_kappa, b.empirical_kappa);
        assert_eq!(a.empirical_eta, b.empirical_eta);
        assert_eq!(a.homogeneity_residual, b.homogeneity_residual);
    }

    #[test]
    fn empirical_kappa_matches_mean() {
        // For the exact mean every bump quotient is exactly 1/m.
        let op = AveragingOp::mean_midrange(3, 0.0).unwrap();
        let rep = op.check_axioms(2000, 3, 1e-9).unwrap();
        close(rep.empirical_kappa, 1.0 / 3.0, 1e-12);
        close(rep.empirical_eta, 1.0 / 3.0, 1e-12);
    }
}
