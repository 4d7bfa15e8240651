//! Bottom-up solver for the discretized Dirichlet problem on T_m.
//!
//! Boundary data f on [0,1] is discretized at depth n by left-endpoint
//! sampling, f_n(j/mⁿ), placed on the level-n vertices, and propagated to the
//! root by applying the averaging operator to each vertex's m successor
//! values. For L-Lipschitz data the root value is within L/mⁿ of the limit,
//! which `refine_until` uses to pick the depth; without a known L it falls
//! back to a depth-doubling Cauchy heuristic and says so.
//!
//! Levels are contiguous arrays (vertex ↔ flat index); one reduction step is
//! `chunks_exact(m)` → operator, which parallelizes over chunks when the
//! `parallel` feature is on. Values depend only on the level below, so the
//! result is independent of the partitioning.

use crate::error::{Error, Result};
#[cfg(feature = "parallel")]
use crate::exec::PAR_THRESHOLD;
use crate::operators::{AveragingOp, OpKind};
use crate::rational::{frac_to_f64, parse_frac, Frac};
use crate::tree::{level_size, MadicUnion};
use num::Zero;
use std::fs;
use std::path::Path;

/// Dense level arrays cap: solving needs mⁿ ≤ 2^24 boundary cells
/// (≈ 16.8M doubles at the bottom level).
pub const MAX_SOLVE_CELLS: u64 = 1 << 24;

/// Harmonicity slack for re-verification: exact re-evaluation for the
/// closed-form families, 10× the bisection tolerance for p-averages.
pub fn harmonicity_tolerance(op: &AveragingOp) -> f64 {
    match op.kind() {
        OpKind::PAverage { .. } => 10.0 * op.root_tolerance(),
        _ => 1e-12,
    }
}

/// Boundary function source. All variants evaluate to finite values on [0,1].
#[derive(Clone, Debug)]
pub enum BoundarySource {
    /// f(t) = v.
    Const(f64),
    /// f(t) = t.
    Identity,
    /// f(t) = sin(2π·freq·t).
    Sine { freq: f64 },
    /// f = height·χ_I for an m-adic cell union I (half-open convention:
    /// t ∈ [k0/mⁿ, (k1+1)/mⁿ), closed when the right endpoint is 1).
    Indicator { cells: MadicUnion, height: f64 },
    /// Piecewise-linear interpolation through `(t, value)` points with
    /// strictly increasing t; constant beyond the first/last point.
    Table { points: Vec<(f64, f64)> },
    /// base + c·χ_I.
    Composite { base: Box<BoundaryData>, cells: MadicUnion, c: f64 },
}

/// Boundary data plus its Lipschitz constant when one is known (the constant
/// drives the certified depth selection in [`refine_until`]).
#[derive(Clone, Debug)]
pub struct BoundaryData {
    source: BoundarySource,
    /// Tree arity; cell-union variants are tied to it.
    m: usize,
    lipschitz: Option<f64>,
}

impl BoundaryData {
    pub fn constant(m: usize, v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::domain(format!("constant boundary value must be finite, got {v}")));
        }
        Ok(Self { source: BoundarySource::Const(v), m, lipschitz: Some(0.0) })
    }

    pub fn identity(m: usize) -> Self {
        Self { source: BoundarySource::Identity, m, lipschitz: Some(1.0) }
    }

    pub fn sine(m: usize, freq: f64) -> Result<Self> {
        if !freq.is_finite() {
            return Err(Error::domain(format!("sine frequency must be finite, got {freq}")));
        }
        Ok(Self {
            source: BoundarySource::Sine { freq },
            m,
            lipschitz: Some(2.0 * std::f64::consts::PI * freq.abs()),
        })
    }

    pub fn indicator(m: usize, cells: MadicUnion, height: f64) -> Result<Self> {
        if !height.is_finite() {
            return Err(Error::domain(format!("indicator height must be finite, got {height}")));
        }
        cells.endpoints_frac(m)?; // ties the union to this arity
        let lipschitz = if height == 0.0 { Some(0.0) } else { None };
        Ok(Self { source: BoundarySource::Indicator { cells, height }, m, lipschitz })
    }

    /// In-memory table. Without an explicit constant the exact one for the
    /// interpolant (the largest absolute slope) is attached.
    pub fn table(m: usize, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("boundary table has no rows".to_string()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::input(format!(
                    "boundary table abscissae must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(t, v) in &points {
            if !(0.0..=1.0).contains(&t) || !v.is_finite() {
                return Err(Error::input(format!("boundary table row ({t}, {v}) out of range")));
            }
        }
        let max_slope = points
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0f64, f64::max);
        Ok(Self { source: BoundarySource::Table { points }, m, lipschitz: Some(max_slope) })
    }

    /// Load a table from CSV rows `t,value`; lines starting with `#` are
    /// comments, and a `# L=<value>` comment overrides the Lipschitz constant.
    pub fn table_from_file(m: usize, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut header_l = None;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("L=") {
                    header_l = Some(v.trim().parse::<f64>().map_err(|_| {
                        Error::input(format!("bad Lipschitz header {line:?} in {}", path.display()))
                    })?);
                }
                continue;
            }
            let (t, v) = line.split_once(',').ok_or_else(|| {
                Error::input(format!("line {}: expected t,value in {}", lineno + 1, path.display()))
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::input(format!("line {}: bad number {s:?} in {}", lineno + 1, path.display()))
                })
            };
            points.push((parse(t)?, parse(v)?));
        }
        let mut data = Self::table(m, points)?;
        if let Some(l) = header_l {
            data = data.with_lipschitz(l)?;
        }
        Ok(data)
    }

    pub fn composite(base: BoundaryData, cells: MadicUnion, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::domain(format!("perturbation size must be finite, got {c}")));
        }
        let m = base.m;
        cells.endpoints_frac(m)?;
        Ok(Self { source: BoundarySource::Composite { base: Box::new(base), cells, c }, m, lipschitz: None })
    }

    /// Override the Lipschitz constant (e.g. a table header or sharper info).
    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::domain(format!("Lipschitz constant must be ≥ 0, got {l}")));
        }
        self.lipschitz = Some(l);
        Ok(self)
    }

    pub fn source(&self) -> &BoundarySource {
        &self.source
    }

    pub fn arity(&self) -> usize {
        self.m
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Evaluate at an exact rational t ∈ [0,1]. Indicator membership is
    /// decided by exact comparison, so m-adic sample points land on the
    /// correct side of every cell boundary.
    pub fn eval_frac(&self, t: &Frac) -> Result<f64> {
        if t < &Frac::zero() || t > &Frac::new(1, 1) {
            return Err(Error::domain(format!("boundary data evaluated outside [0,1] at {t}")));
        }
        Ok(match &self.source {
            BoundarySource::Const(v) => *v,
            BoundarySource::Identity => frac_to_f64(t),
            BoundarySource::Sine { freq } => {
                (2.0 * std::f64::consts::PI * freq * frac_to_f64(t)).sin()
            }
            BoundarySource::Indicator { cells, height } => {
                if contains_half_open(cells, t, self.m)? {
                    *height
                } else {
                    0.0
                }
            }
            BoundarySource::Table { points } => interp(points, frac_to_f64(t)),
            BoundarySource::Composite { base, cells, c } => {
                let mut v = base.eval_frac(t)?;
                if contains_half_open(cells, t, self.m)? {
                    v += c;
                }
                v
            }
        })
    }

    /// Evaluate at a double (converted to an exact rational first).
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.eval_frac(&crate::rational::frac_from_f64(t)?)
    }

    /// Parse a CLI boundary spec:
    /// `id` | `const=V` | `sine=F` | `ind=N:K0..K1,h=H` | `table=PATH`,
    /// optionally wrapped as `BASE+C@N:K0..K1` for base + c·χ_cells.
    pub fn parse_spec(spec: &str, m: usize) -> Result<Self> {
        let spec = spec.trim();
        if let Some((left, cells)) = spec.rsplit_once('@') {
            let (base, c) = left.rsplit_once('+').ok_or_else(|| {
                Error::input(format!("boundary spec {spec:?}: expected BASE+C@CELLS"))
            })?;
            let c: f64 = c.trim().parse().map_err(|_| {
                Error::input(format!("boundary spec {spec:?}: bad perturbation size {c:?}"))
            })?;
            let cells = MadicUnion::parse(cells, m)?;
            return Self::composite(Self::parse_spec(base, m)?, cells, c);
        }
        if spec == "id" {
            return Ok(Self::identity(m));
        }
        let (kind, arg) = spec
            .split_once('=')
            .ok_or_else(|| Error::input(format!("unknown boundary spec {spec:?}")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::input(format!("boundary spec {spec:?}: bad number {s:?}")))
        };
        match kind.trim() {
            "const" => Self::constant(m, num(arg)?),
            "sine" => Self::sine(m, num(arg)?),
            "ind" => {
                let (cells, h) = arg.rsplit_once(",h=").ok_or_else(|| {
                    Error::input(format!("boundary spec {spec:?}: expected ind=N:K0..K1,h=H"))
                })?;
                Self::indicator(m, MadicUnion::parse(cells, m)?, num(h)?)
            }
            "table" => Self::table_from_file(m, Path::new(arg.trim())),
            other => Err(Error::input(format!("unknown boundary spec kind {other:?}"))),
        }
    }
}

/// Half-open membership t ∈ [k0/mⁿ, (k1+1)/mⁿ), closed at the right when the
/// union ends at 1 (each boundary point belongs to exactly one level-n cell).
fn contains_half_open(cells: &MadicUnion, t: &Frac, m: usize) -> Result<bool> {
    let (a, b) = cells.endpoints_frac(m)?;
    Ok(*t >= a && (*t < b || (b == Frac::new(1, 1) && *t == b)))
}

fn interp(points: &[(f64, f64)], t: f64) -> f64 {
    match points.partition_point(|&(x, _)| x <= t) {
        0 => points[0].1,
        i if i == points.len() => points[i - 1].1,
        i => {
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
        }
    }
}

/// Left-endpoint samples f(j/mⁿ) for j = 0..mⁿ−1.
pub fn sample_boundary(f: &BoundaryData, n: u32, m: usize) -> Result<Vec<f64>> {
    if f.arity() != m {
        return Err(Error::shape(format!(
            "boundary data built for arity {} sampled with m = {m}",
            f.arity()
        )));
    }
    let size = level_size(m, n)?;
    if size > MAX_SOLVE_CELLS {
        return Err(Error::capacity(format!(
            "level {n} has {size} cells, above the dense-array cap {MAX_SOLVE_CELLS}"
        )));
    }
    (0..size)
        .map(|j| f.eval_frac(&Frac::new(j as i128, size as i128)))
        .collect()
}

/// Values on T_m up to depth n: `levels[k]` holds the m^k level-k values,
/// `levels[n]` is the boundary array the solve started from.
#[derive(Clone, Debug)]
pub struct TreeSolution {
    m: usize,
    op_label: String,
    harmonicity_tol: f64,
    levels: Vec<Vec<f64>>,
}

impl TreeSolution {
    /// Wrap externally constructed level arrays (each level k must hold m^k
    /// values); used by constructions that build values top-down instead of
    /// solving bottom-up.
    pub(crate) fn from_levels(
        m: usize,
        op_label: &str,
        harmonicity_tol: f64,
        levels: Vec<Vec<f64>>,
    ) -> Self {
        debug_assert!(levels
            .iter()
            .enumerate()
            .all(|(k, l)| l.len() as u64 == (m as u64).pow(k as u32)));
        TreeSolution { m, op_label: op_label.to_string(), harmonicity_tol, levels }
    }

    pub fn arity(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn op_label(&self) -> &str {
        &self.op_label
    }

    pub fn harmonicity_tol(&self) -> f64 {
        self.harmonicity_tol
    }

    pub fn root_value(&self) -> f64 {
        self.levels[0][0]
    }

    pub fn level(&self, k: u32) -> Result<&[f64]> {
        self.levels
            .get(k as usize)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::shape(format!("level {k} beyond solution depth {}", self.depth())))
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn boundary(&self) -> &[f64] {
        &self.levels[self.levels.len() - 1]
    }

    pub fn value(&self, level: u32, index: u64) -> Result<f64> {
        self.level(level)?
            .get(index as usize)
            .copied()
            .ok_or_else(|| Error::shape(format!("index {index} out of range at level {level}")))
    }

    /// Worst |value − F(successor values)| over interior vertices; 0 up to
    /// bisection determinism since the solve applied F directly.
    pub fn harmonicity_residual(&self, op: &AveragingOp) -> Result<f64> {
        if op.arity() != self.m {
            return Err(Error::shape(format!(
                "operator arity {} against a solution on the {}-ary tree",
                op.arity(),
                self.m
            )));
        }
        let mut worst = 0.0f64;
        let mut scratch = Vec::with_capacity(self.m);
        for k in 0..self.levels.len() - 1 {
            for (i, &v) in self.levels[k].iter().enumerate() {
                let children = &self.levels[k + 1][i * self.m..(i + 1) * self.m];
                worst = worst.max((v - op.eval_raw(children, &mut scratch)).abs());
            }
        }
        Ok(worst)
    }

    /// (min, max) over every stored value.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for level in &self.levels {
            for &v in level {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Solve bottom-up from a dense level-n boundary array (length mⁿ).
/// Data-parallel over each level when the `parallel` feature is on; the
/// values are identical either way.
pub fn solve(op: &AveragingOp, boundary: &[f64]) -> Result<TreeSolution> {
    solve_impl(op, boundary, true)
}

/// Single-threaded solve regardless of features (benchmark baseline and
/// determinism cross-check).
pub fn solve_sequential(op: &AveragingOp, boundary: &[f64]) -> Result<TreeSolution> {
    solve_impl(op, boundary, false)
}

/// [`sample_boundary`] followed by [`solve`].
pub fn solve_data(op: &AveragingOp, f: &BoundaryData, n: u32) -> Result<TreeSolution> {
    solve(op, &sample_boundary(f, n, op.arity())?)
}

fn solve_impl(op: &AveragingOp, boundary: &[f64], parallel: bool) -> Result<TreeSolution> {
    let m = op.arity();
    let mut size = 1u64;
    while (size as usize) < boundary.len() {
        size = size
            .checked_mul(m as u64)
            .filter(|&s| s <= MAX_SOLVE_CELLS)
            .ok_or_else(|| {
                Error::capacity(format!(
                    "boundary of {} cells exceeds the dense-array cap {MAX_SOLVE_CELLS}",
                    boundary.len()
                ))
            })?;
    }
    if size as usize != boundary.len() {
        return Err(Error::shape(format!(
            "boundary length {} is not a power of m = {m}",
            boundary.len()
        )));
    }
    if let Some(bad) = boundary.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite boundary value {bad}")));
    }

    let mut levels = Vec::new();
    levels.push(boundary.to_vec());
    while levels.last().unwrap().len() > 1 {
        let next = reduce_level(op, levels.last().unwrap(), parallel);
        levels.push(next);
    }
    levels.reverse();
    Ok(TreeSolution {
        m,
        op_label: op.label(),
        harmonicity_tol: harmonicity_tolerance(op),
        levels,
    })
}

fn reduce_level(op: &AveragingOp, lower: &[f64], parallel: bool) -> Vec<f64> {
    let m = op.arity();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if parallel && lower.len() >= m * PAR_THRESHOLD {
            return lower
                .par_chunks_exact(m)
                .map_init(|| Vec::with_capacity(m), |scratch, chunk| op.eval_raw(chunk, scratch))
                .collect();
        }
    }
    let _ = parallel;
    let mut scratch = Vec::with_capacity(m);
    lower
        .chunks_exact(m)
        .map(|chunk| op.eval_raw(chunk, &mut scratch))
        .collect()
}

/// Result of depth refinement: `certified` marks the Lipschitz bound L/mⁿ;
/// otherwise `error_bound` is the heuristic gap between the last two depths.
#[derive(Clone, Copy, Debug)]
pub struct Refinement {
    pub root_value: f64,
    pub n_used: u32,
    pub error_bound: f64,
    pub certified: bool,
}

/// Pick a depth whose root value is within `target_eps` of the limit. With a
/// known Lipschitz constant L this takes the least n ≥ 1 with L/mⁿ ≤ eps
/// (a certified bound); otherwise depths double until consecutive root
/// values agree to eps (a heuristic).
pub fn refine_until(
    op: &AveragingOp,
    f: &BoundaryData,
    target_eps: f64,
    max_n: u32,
) -> Result<Refinement> {
    if !(target_eps > 0.0 && target_eps.is_finite()) {
        return Err(Error::domain(format!("target_eps must be positive, got {target_eps}")));
    }
    if max_n == 0 {
        return Err(Error::domain("max_n must be at least 1".to_string()));
    }
    let m = op.arity() as f64;
    if let Some(l) = f.lipschitz() {
        let mut n = 1u32;
        while l / m.powi(n as i32) > target_eps {
            if n >= max_n {
                let best = solve_data(op, f, max_n)?.root_value();
                return Err(Error::Convergence {
                    context: format!(
                        "certified bound L/m^n = {} still above {target_eps} at max_n = {max_n}",
                        l / m.powi(max_n as i32)
                    ),
                    best,
                    gap: l / m.powi(max_n as i32),
                });
            }
            n += 1;
        }
        let root = solve_data(op, f, n)?.root_value();
        return Ok(Refinement { root_value: root, n_used: n, error_bound: l / m.powi(n as i32), certified: true });
    }

    let mut prev_n = 1u32.min(max_n);
    let mut prev = solve_data(op, f, prev_n)?.root_value();
    while prev_n < max_n {
        let next_n = (prev_n * 2).min(max_n);
        let next = solve_data(op, f, next_n)?.root_value();
        let gap = (next - prev).abs();
        if gap <= target_eps {
            return Ok(Refinement { root_value: next, n_used: next_n, error_bound: gap, certified: false });
        }
        prev_n = next_n;
        prev = next;
    }
    Err(Error::Convergence {
        context: format!("root values still moving more than {target_eps} at max_n = {max_n}"),
        best: prev,
        gap: target_eps,
    })
}

/// Comparison-principle check: max over all vertices of (u−v) minus max over
/// the boundary arrays of (u−v). Nonpositive (up to solver tolerance) for
/// solutions under the same operator.
pub fn comparison_check(u: &TreeSolution, v: &TreeSolution) -> Result<f64> {
    if u.m != v.m || u.depth() != v.depth() || u.op_label != v.op_label {
        return Err(Error::shape(format!(
            "comparison needs matching solutions, got {}@depth{} on m={} vs {}@depth{} on m={}",
            u.op_label,
            u.depth(),
            u.m,
            v.op_label,
            v.depth(),
            v.m
        )));
    }
    let all = u
        .levels
        .iter()
        .zip(&v.levels)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y))
        .fold(f64::NEG_INFINITY, f64::max);
    let boundary = u
        .boundary()
        .iter()
        .zip(v.boundary())
        .map(|(x, y)| x - y)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(all - boundary)
}

/// Parse `a/b` or a decimal as an exact fraction, then round: CLI helper for
/// exact-rational flags that end up in double arithmetic.
pub fn parse_real(s: &str) -> Result<f64> {
    Ok(frac_to_f64(&parse_frac(s)?))
}
