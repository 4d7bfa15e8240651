//! Vertex addressing on the directed regular m-ary tree, the boundary map ψ,
//! and m-adic interval bookkeeping.
//!
//! A vertex is a finite digit sequence (a_1,…,a_k), each digit < m; the root
//! is the empty sequence. The boundary map sends a vertex to
//! ψ(x) = Σ a_j m^{−j} ∈ [0,1), and the cell of a level-k vertex is
//! I_x = [ψ(x), ψ(x)+m^{−k}]. Vertices are never materialized as a graph:
//! a level-k vertex is equivalently its index Σ a_j m^{k−j} ∈ {0,…,m^k−1},
//! and whole levels are stored as flat arrays indexed that way.
//!
//! All endpoint arithmetic is done in exact rationals ([`Frac`]); doubles
//! appear only at the public convenience layer.

use crate::error::{Error, Result};
use crate::rational::{frac_ceil_u64, frac_floor_u64, frac_from_f64, frac_to_f64, Frac};
use serde::Serialize;
use std::fmt;

/// Depth cap: level-n indices must satisfy m^n ≤ 2^40 (64-bit indexing with
/// headroom for the flanking-cell arithmetic at merged levels).
pub const MAX_INDEX_BITS: u32 = 40;

fn validate_m(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::domain(format!("tree arity m must be ≥ 2, got {m}")));
    }
    Ok(())
}

/// m^n as u64, or a capacity error once past the depth cap.
pub fn level_size(m: usize, n: u32) -> Result<u64> {
    validate_m(m)?;
    let p = (m as u128)
        .checked_pow(n)
        .filter(|&p| p <= 1u128 << MAX_INDEX_BITS)
        .ok_or_else(|| {
            Error::capacity(format!("level {n} of the {m}-ary tree exceeds the 2^{MAX_INDEX_BITS} index cap"))
        })?;
    Ok(p as u64)
}

/// A vertex of T_m as its digit path from the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct VertexPath {
    digits: Vec<u32>,
}

impl VertexPath {
    /// The root ∅ (level 0).
    pub fn root() -> Self {
        Self { digits: Vec::new() }
    }

    /// Build from explicit digits; every digit must be < m.
    pub fn new(digits: Vec<u32>, m: usize) -> Result<Self> {
        validate_m(m)?;
        level_size(m, digits.len() as u32)?;
        if let Some(&d) = digits.iter().find(|&&d| d as usize >= m) {
            return Err(Error::domain(format!("digit {d} out of range for an {m}-ary tree")));
        }
        Ok(Self { digits })
    }

    /// The level-`level` vertex with the given flat index (most significant
    /// digit first: index = Σ a_j m^{level−j}).
    pub fn from_index(level: u32, index: u64, m: usize) -> Result<Self> {
        let size = level_size(m, level)?;
        if index >= size {
            return Err(Error::domain(format!(
                "index {index} out of range for level {level} of the {m}-ary tree (size {size})"
            )));
        }
        let mut digits = vec![0u32; level as usize];
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = (rest % m as u64) as u32;
            rest /= m as u64;
        }
        Ok(Self { digits })
    }

    pub fn level(&self) -> u32 {
        self.digits.len() as u32
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Flat index of this vertex within its level.
    pub fn index(&self, m: usize) -> Result<u64> {
        level_size(m, self.level())?;
        let mut idx = 0u64;
        for &d in &self.digits {
            if d as usize >= m {
                return Err(Error::domain(format!("digit {d} out of range for an {m}-ary tree")));
            }
            idx = idx * m as u64 + d as u64;
        }
        Ok(idx)
    }

    /// The j-th successor (x, j).
    pub fn child(&self, j: u32, m: usize) -> Result<Self> {
        validate_m(m)?;
        if j as usize >= m {
            return Err(Error::domain(format!("successor digit {j} out of range for an {m}-ary tree")));
        }
        level_size(m, self.level() + 1)?;
        let mut digits = self.digits.clone();
        digits.push(j);
        Ok(Self { digits })
    }

    /// Parse a comma-separated digit list; the empty string (or "root") is ∅.
    pub fn parse(s: &str, m: usize) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "root" {
            return Self::new(Vec::new(), m);
        }
        let digits = s
            .split(',')
            .map(|d| {
                d.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::input(format!("bad digit {d:?} in vertex path {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(digits, m)
    }
}

impl fmt::Display for VertexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "root");
        }
        let mut first = true;
        for d in &self.digits {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
            first = false;
        }
        Ok(())
    }
}

/// ψ(x) = Σ a_j m^{−j} as an exact rational.
pub fn psi_frac(x: &VertexPath, m: usize) -> Result<Frac> {
    let size = level_size(m, x.level())?;
    let idx = x.index(m)?;
    Ok(Frac::new(idx as i128, size as i128))
}

/// ψ(x) rounded to double.
pub fn psi(x: &VertexPath, m: usize) -> Result<f64> {
    Ok(frac_to_f64(&psi_frac(x, m)?))
}

/// I_x = [ψ(x), ψ(x) + m^{−level}] with exact endpoints.
pub fn interval_frac(x: &VertexPath, m: usize) -> Result<(Frac, Frac)> {
    let size = level_size(m, x.level())?;
    let idx = x.index(m)? as i128;
    Ok((Frac::new(idx, size as i128), Frac::new(idx + 1, size as i128)))
}

/// I_x rounded to doubles.
pub fn interval_of(x: &VertexPath, m: usize) -> Result<(f64, f64)> {
    let (a, b) = interval_frac(x, m)?;
    Ok((frac_to_f64(&a), frac_to_f64(&b)))
}

/// The m successors (x,0),…,(x,m−1) in digit order.
pub fn successors(x: &VertexPath, m: usize) -> Result<Vec<VertexPath>> {
    (0..m as u32).map(|j| x.child(j, m)).collect()
}

/// A union of consecutive level-n cells: I = [k0/mⁿ, (k1+1)/mⁿ].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MadicUnion {
    level_n: u32,
    k0: u64,
    k1: u64,
}

impl MadicUnion {
    pub fn new(level_n: u32, k0: u64, k1: u64, m: usize) -> Result<Self> {
        let size = level_size(m, level_n)?;
        if k0 > k1 || k1 >= size {
            return Err(Error::shape(format!(
                "cell range {k0}..{k1} invalid at level {level_n} of the {m}-ary tree (need k0 ≤ k1 ≤ {})",
                size - 1
            )));
        }
        Ok(Self { level_n, k0, k1 })
    }

    /// The single cell of a vertex.
    pub fn of_vertex(x: &VertexPath, m: usize) -> Result<Self> {
        let idx = x.index(m)?;
        Self::new(x.level(), idx, idx, m)
    }

    pub fn level(&self) -> u32 {
        self.level_n
    }

    pub fn k0(&self) -> u64 {
        self.k0
    }

    pub fn k1(&self) -> u64 {
        self.k1
    }

    pub fn cell_count(&self) -> u64 {
        self.k1 - self.k0 + 1
    }

    /// Exact endpoints [k0/mⁿ, (k1+1)/mⁿ].
    pub fn endpoints_frac(&self, m: usize) -> Result<(Frac, Frac)> {
        let size = level_size(m, self.level_n)? as i128;
        Ok((Frac::new(self.k0 as i128, size), Frac::new(self.k1 as i128 + 1, size)))
    }

    pub fn endpoints(&self, m: usize) -> Result<(f64, f64)> {
        let (a, b) = self.endpoints_frac(m)?;
        Ok((frac_to_f64(&a), frac_to_f64(&b)))
    }

    /// |I| = (k1−k0+1)/mⁿ.
    pub fn length_frac(&self, m: usize) -> Result<Frac> {
        let size = level_size(m, self.level_n)? as i128;
        Ok(Frac::new(self.cell_count() as i128, size))
    }

    pub fn length(&self, m: usize) -> Result<f64> {
        Ok(frac_to_f64(&self.length_frac(m)?))
    }

    /// Whether the closed interval I contains the point.
    pub fn contains_frac(&self, x: &Frac, m: usize) -> Result<bool> {
        let (a, b) = self.endpoints_frac(m)?;
        Ok(*x >= a && *x <= b)
    }

    /// The constituent level-n vertices, in index order.
    pub fn vertices(&self, m: usize) -> Result<Vec<VertexPath>> {
        (self.k0..=self.k1)
            .map(|k| VertexPath::from_index(self.level_n, k, m))
            .collect()
    }

    /// Parse the CLI form `n:k0..k1` (or `n:k` for a single cell).
    pub fn parse(s: &str, m: usize) -> Result<Self> {
        let (lvl, range) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::input(format!("bad cell union {s:?}: expected n:k0..k1")))?;
        let level_n: u32 = lvl
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad level in cell union {s:?}")))?;
        let (k0, k1) = match range.split_once("..") {
            Some((a, b)) => (
                a.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::input(format!("bad start index in cell union {s:?}")))?,
                b.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::input(format!("bad end index in cell union {s:?}")))?,
            ),
            None => {
                let k = range
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| Error::input(format!("bad cell index in cell union {s:?}")))?;
                (k, k)
            }
        };
        Self::new(level_n, k0, k1, m)
    }
}

impl fmt::Display for MadicUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k0 == self.k1 {
            write!(f, "{}:{}", self.level_n, self.k0)
        } else {
            write!(f, "{}:{}..{}", self.level_n, self.k0, self.k1)
        }
    }
}

/// Largest level-n union inside [a,b] (None if no cell fits) and smallest
/// level-n union covering [a,b].
pub fn madic_cover(a: &Frac, b: &Frac, n: u32, m: usize) -> Result<(Option<MadicUnion>, MadicUnion)> {
    if *a < Frac::new(0, 1) || *b > Frac::new(1, 1) || a >= b {
        return Err(Error::domain(format!(
            "cover needs 0 ≤ a < b ≤ 1, got a = {a}, b = {b}"
        )));
    }
    let size = level_size(m, n)? as i128;
    let am = a * Frac::from_integer(size);
    let bm = b * Frac::from_integer(size);
    let outer_k0 = frac_floor_u64(&am)?;
    let outer_k1 = frac_ceil_u64(&bm)? - 1;
    let outer = MadicUnion::new(n, outer_k0, outer_k1, m)?;
    let i0 = frac_ceil_u64(&am)?;
    let i1f = frac_floor_u64(&bm)?;
    let inner = if i1f >= 1 && i0 <= i1f - 1 {
        Some(MadicUnion::new(n, i0, i1f - 1, m)?)
    } else {
        None
    };
    Ok((inner, outer))
}

/// [`madic_cover`] for double endpoints (converted exactly, bit for bit).
pub fn madic_cover_f64(a: f64, b: f64, n: u32, m: usize) -> Result<(Option<MadicUnion>, MadicUnion)> {
    madic_cover(&frac_from_f64(a)?, &frac_from_f64(b)?, n, m)
}

/// Parse the CLI interval form `a/b..c/d` (any `parse_frac` form per side).
pub fn parse_interval(s: &str) -> Result<(Frac, Frac)> {
    let (a, b) = s
        .trim()
        .split_once("..")
        .ok_or_else(|| Error::input(format!("bad interval {s:?}: expected a..b")))?;
    Ok((crate::rational::parse_frac(a)?, crate::rational::parse_frac(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_examples() {
        let m = 3;
        assert_eq!(psi_frac(&VertexPath::new(vec![2], m).unwrap(), m).unwrap(), Frac::new(2, 3));
        // 1/3 + 0 + 2/27 = 11/27
        assert_eq!(
            psi_frac(&VertexPath::new(vec![1, 0, 2], m).unwrap(), m).unwrap(),
            Frac::new(11, 27)
        );
        assert_eq!(psi_frac(&VertexPath::root(), m).unwrap(), Frac::new(0, 1));
        assert_eq!(psi(&VertexPath::root(), 5).unwrap(), 0.0);
    }

    #[test]
    fn interval_examples() {
        let m = 3;
        assert_eq!(
            interval_frac(&VertexPath::new(vec![0], m).unwrap(), m).unwrap(),
            (Frac::new(0, 1), Frac::new(1, 3))
        );
        // ψ(2,2) = 2/3 + 2/9 = 8/9
        assert_eq!(
            interval_frac(&VertexPath::new(vec![2, 2], m).unwrap(), m).unwrap(),
            (Frac::new(8, 9), Frac::new(1, 1))
        );
        assert_eq!(
            interval_of(&VertexPath::root(), m).unwrap(),
            (0.0, 1.0)
        );
    }

    #[test]
    fn successor_examples() {
        let m = 3;
        let kids = successors(&VertexPath::root(), m).unwrap();
        assert_eq!(kids.len(), 3);
        assert_eq!(kids[0], VertexPath::new(vec![0], m).unwrap());
        assert_eq!(kids[2], VertexPath::new(vec![2], m).unwrap());

        let kids = successors(&VertexPath::new(vec![1], m).unwrap(), m).unwrap();
        assert_eq!(kids[1], VertexPath::new(vec![1, 1], m).unwrap());

        let kids = successors(&VertexPath::new(vec![3, 3], 4).unwrap(), 4).unwrap();
        assert_eq!(kids.len(), 4);
        assert!(kids.iter().all(|k| k.level() == 3));
    }

    #[test]
    fn index_round_trip() {
        let m = 5;
        for idx in 0..125 {
            let v = VertexPath::from_index(3, idx, m).unwrap();
            assert_eq!(v.index(m).unwrap(), idx);
        }
        assert!(VertexPath::from_index(3, 125, m).is_err());
    }

    #[test]
    fn digit_validation() {
        assert!(VertexPath::new(vec![3], 3).is_err());
        assert!(VertexPath::new(vec![0, 1, 2], 3).is_ok());
        assert!(VertexPath::root().child(5, 3).is_err());
    }

    #[test]
    fn depth_cap() {
        // 3^26 > 2^40: level 26 is out of reach for m = 3.
        assert!(level_size(3, 25).is_ok());
        assert!(level_size(3, 26).is_err());
        assert!(matches!(level_size(3, 80), Err(Error::Capacity(_))));
    }

    #[test]
    fn cover_examples() {
        let m = 3;
        let (inner, outer) = madic_cover(&Frac::new(1, 3), &Frac::new(2, 3), 1, m).unwrap();
        assert_eq!(inner.as_ref(), Some(&outer));
        assert_eq!((outer.k0(), outer.k1()), (1, 1));

        let (inner, _) = madic_cover(&Frac::new(2, 9), &Frac::new(5, 9), 2, m).unwrap();
        let inner = inner.unwrap();
        assert_eq!((inner.k0(), inner.k1()), (2, 4));

        let (inner, outer) = madic_cover_f64(0.1, 0.2, 1, m).unwrap();
        assert!(inner.is_none());
        assert_eq!((outer.k0(), outer.k1()), (0, 0));
    }

    #[test]
    fn cover_exactness_at_binary_thirds() {
        // (1/3)·3 rounds below 1 in doubles; the exact path must not.
        let third = Frac::new(1, 3);
        let (inner, outer) = madic_cover(&third, &Frac::new(1, 1), 1, 3).unwrap();
        assert_eq!(inner.unwrap(), MadicUnion::new(1, 1, 2, 3).unwrap());
        assert_eq!((outer.k0(), outer.k1()), (1, 2));
    }

    #[test]
    fn cover_rejects_bad_input() {
        assert!(madic_cover(&Frac::new(1, 2), &Frac::new(1, 2), 1, 3).is_err());
        assert!(madic_cover(&Frac::new(-1, 2), &Frac::new(1, 2), 1, 3).is_err());
        assert!(madic_cover(&Frac::new(1, 2), &Frac::new(3, 2), 1, 3).is_err());
    }

    #[test]
    fn union_endpoints_and_length() {
        let u = MadicUnion::new(2, 3, 5, 3).unwrap();
        assert_eq!(u.endpoints_frac(3).unwrap(), (Frac::new(1, 3), Frac::new(2, 3)));
        assert_eq!(u.length_frac(3).unwrap(), Frac::new(1, 3));
        assert_eq!(u.cell_count(), 3);
        assert!(u.contains_frac(&Frac::new(1, 2), 3).unwrap());
        assert!(!u.contains_frac(&Frac::new(1, 4), 3).unwrap());
    }

    #[test]
    fn union_vertices_reconstruct() {
        let m = 3;
        let u = MadicUnion::new(2, 3, 5, m).unwrap();
        let vs = u.vertices(m).unwrap();
        assert_eq!(vs.len(), 3);
        let (a0, _) = interval_frac(&vs[0], m).unwrap();
        let (_, b2) = interval_frac(&vs[2], m).unwrap();
        assert_eq!((a0, b2), u.endpoints_frac(m).unwrap());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(MadicUnion::parse("2:3..5", 3).unwrap(), MadicUnion::new(2, 3, 5, 3).unwrap());
        assert_eq!(MadicUnion::parse("1:0", 3).unwrap(), MadicUnion::new(1, 0, 0, 3).unwrap());
        assert!(MadicUnion::parse("2:5..3", 3).is_err());
        assert!(MadicUnion::parse("2:0..9", 3).is_err());
        assert!(MadicUnion::parse("garbage", 3).is_err());

        assert_eq!(
            parse_interval("1/3..0.5").unwrap(),
            (Frac::new(1, 3), Frac::new(1, 2))
        );
        assert!(parse_interval("1/3").is_err());

        assert_eq!(VertexPath::parse("1,0,2", 3).unwrap(), VertexPath::new(vec![1, 0, 2], 3).unwrap());
        assert_eq!(VertexPath::parse("", 3).unwrap(), VertexPath::root());
        assert_eq!(VertexPath::parse("root", 3).unwrap(), VertexPath::root());
        assert!(VertexPath::parse("1,7", 3).is_err());
    }

    #[test]
    fn display_round_trip() {
        let v = VertexPath::new(vec![1, 0, 2], 3).unwrap();
        assert_eq!(VertexPath::parse(&v.to_string(), 3).unwrap(), v);
        let u = MadicUnion::new(2, 3, 5, 3).unwrap();
        assert_eq!(MadicUnion::parse(&u.to_string(), 3).unwrap(), u);
    }
}
