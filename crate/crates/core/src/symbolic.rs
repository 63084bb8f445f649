//! Bi-infinite sequences with finitely many non-default entries, the shift on
//! them, and the codings of the `S_Q` subshift, of circle strands and of cones.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use serde::Serialize;

use crate::circle::{MorseSmaleCircleMap, Orientation};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteSupportSequence<S> {
    default: S,
    exceptions: BTreeMap<i64, S>,
}

impl<S: Clone + PartialEq> FiniteSupportSequence<S> {
    pub fn constant(default: S) -> Self {
        FiniteSupportSequence {
            default,
            exceptions: BTreeMap::new(),
        }
    }

    pub fn new(default: S, entries: impl IntoIterator<Item = (i64, S)>) -> Self {
        let mut s = Self::constant(default);
        for (n, v) in entries {
            s.set(n, v);
        }
        s
    }

    pub fn default_symbol(&self) -> &S {
        &self.default
    }

    pub fn exceptions(&self) -> &BTreeMap<i64, S> {
        &self.exceptions
    }

    pub fn get(&self, n: i64) -> &S {
        self.exceptions.get(&n).unwrap_or(&self.default)
    }

    pub fn set(&mut self, n: i64, v: S) {
        if v == self.default {
            self.exceptions.remove(&n);
        } else {
            self.exceptions.insert(n, v);
        }
    }

    /// `new[n] = old[n + direction]`.
    pub fn shift_step(&self, direction: i64) -> Self {
        FiniteSupportSequence {
            default: self.default.clone(),
            exceptions: self
                .exceptions
                .iter()
                .map(|(&n, v)| (n - direction, v.clone()))
                .collect(),
        }
    }
}

/// `sum_n |t_n - s_n| / 2^|n|` over the union of the supports.
pub fn hilbert_metric_d(s: &FiniteSupportSequence<f64>, t: &FiniteSupportSequence<f64>) -> Result<f64> {
    if s.default != t.default {
        return Err(Error::DefaultMismatch);
    }
    let support: BTreeSet<i64> = s.exceptions.keys().chain(t.exceptions.keys()).copied().collect();
    Ok(support
        .into_iter()
        .map(|n| (s.get(n) - t.get(n)).abs() * 0.5f64.powi(n.unsigned_abs() as i32))
        .sum())
}

/// Points of `S_Q`: symbol `p >= 1` stands for `1/p`, `0` for zero.
pub type SqPoint = FiniteSupportSequence<u32>;

/// The fixed point of the shift on `S_Q`.
pub fn sq_fixed() -> SqPoint {
    SqPoint::constant(0)
}

/// The point with a single `1/p` at index `n`.
pub fn sq_point(n: i64, p: u32) -> Result<SqPoint> {
    if p == 0 {
        return Err(Error::InvalidParameter("symbol index p starts at 1".into()));
    }
    Ok(SqPoint::new(0, [(n, p)]))
}

/// Default zero and every `1/p` at most once.
pub fn sq_valid(x: &SqPoint) -> bool {
    let mut seen = BTreeSet::new();
    *x.default_symbol() == 0 && x.exceptions().values().all(|p| seen.insert(*p))
}

pub fn sq_to_cube(x: &SqPoint) -> FiniteSupportSequence<f64> {
    FiniteSupportSequence::new(0.0, x.exceptions().iter().map(|(&n, &p)| (n, 1.0 / p as f64)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnRow {
    pub n: i64,
    pub p: u32,
    pub min_return: f64,
    /// `2^-|n| / p`: the term of the original spike that no shift cancels.
    pub floor: f64,
    pub certified: bool,
}

/// `min_{1 <= k <= N} D(shift^k x, x)` for single-spike points, with a floor
/// that shows the point does not return close to itself.
pub fn sq_nonwandering_evidence(window: usize, samples: &[(i64, u32)]) -> Result<Vec<ReturnRow>> {
    samples
        .iter()
        .map(|&(n, p)| {
            let x = sq_point(n, p)?;
            let cube = sq_to_cube(&x);
            let mut min_return = f64::INFINITY;
            let mut cur = x.clone();
            for _ in 0..window {
                cur = cur.shift_step(1);
                min_return = min_return.min(hilbert_metric_d(&sq_to_cube(&cur), &cube)?);
            }
            let floor = 0.5f64.powi(n.unsigned_abs() as i32) / p as f64;
            Ok(ReturnRow {
                n,
                p,
                min_return,
                floor,
                certified: min_return >= floor && floor > 0.0,
            })
        })
        .collect()
}

/// Bit `p - 1` at index `n` is set iff `p <= r` and the single-spike point
/// `b_n^p` belongs to the set.
pub fn phi_sq(set: &[SqPoint], r: u32) -> FiniteSupportSequence<u32> {
    let mut out = FiniteSupportSequence::constant(0u32);
    for x in set {
        if x.exceptions().len() == 1 {
            let (&n, &p) = x.exceptions().iter().next().expect("one entry");
            if p <= r {
                let bits = *out.get(n) | 1 << (p - 1);
                out.set(n, bits);
            }
        }
    }
    out
}

/// A set whose coding is `pattern`: the fixed point plus one spike per set bit.
pub fn phi_sq_preimage(pattern: &FiniteSupportSequence<u32>) -> Vec<SqPoint> {
    let mut set = vec![sq_fixed()];
    for (&n, &bits) in pattern.exceptions() {
        for b in 0..32 {
            if bits >> b & 1 == 1 {
                set.push(SqPoint::new(0, [(n, b + 1)]));
            }
        }
    }
    set
}

/// A random finite set of `S_Q` points within the window: spikes of symbols
/// up to `r + 1`, occasionally two spikes in one point, and the fixed point.
pub fn random_sq_set(rng: &mut impl Rng, window: i64, r: u32) -> Vec<SqPoint> {
    let mut set = vec![];
    if rng.gen_bool(0.5) {
        set.push(sq_fixed());
    }
    for _ in 0..rng.gen_range(1..8) {
        let p = rng.gen_range(1..=r + 1);
        let mut x = SqPoint::new(0, [(rng.gen_range(-window..=window), p)]);
        if rng.gen_bool(0.2) {
            x.set(rng.gen_range(-window..=window), p + r + 1);
        }
        set.push(x);
    }
    set
}

#[derive(Clone, Debug, Serialize)]
pub struct FiniteMapCoding {
    pub window: usize,
    /// `strands[i][m + W + 1] = f^m(x^i_0)` for `|m| <= W + 1`, built by
    /// forward iteration from the left end so that consecutive entries are
    /// exact images of each other under the floating-point map.
    pub strands: Vec<Vec<f64>>,
    #[serde(skip)]
    lookup: HashMap<u64, (usize, usize)>,
}

impl FiniteMapCoding {
    /// Strand `i` starts in the basin interval `i mod 2k`; strands sharing an
    /// interval start at evenly spaced points of one fundamental domain there.
    pub fn circle(m: &MorseSmaleCircleMap, r: usize, window: usize) -> Result<Self> {
        if m.orientation() != Orientation::Preserving {
            return Err(Error::Precondition(
                "the coding uses an orientation-preserving map".into(),
            ));
        }
        if r == 0 {
            return Err(Error::InvalidParameter("need at least one strand".into()));
        }
        let intervals = 2 * m.pairs() as usize;
        let per_interval = r.div_ceil(intervals);
        let starts: Vec<f64> = (0..r)
            .map(|i| {
                let c = (i % intervals) as f64 / intervals as f64 + 0.5 / intervals as f64;
                c + (m.eval(c) - c) * (i / intervals) as f64 / per_interval as f64
            })
            .collect();
        Self::from_starts(m, &starts, window)
    }

    /// Forward strands reach the attractor at a geometric rate, so after a few
    /// dozen steps distinct orbits are closer than any fixed tolerance.
    /// Membership is therefore bit identity with a tabulated point, and the
    /// instance is rejected if two tabulated points, or a tabulated point and
    /// a fixed point, coincide.
    pub fn from_starts(m: &MorseSmaleCircleMap, starts: &[f64], window: usize) -> Result<Self> {
        let w = window as i64 + 1;
        let strands = starts
            .iter()
            .map(|&y| {
                let mut s = vec![m.iterate(y, -w)?];
                for _ in 0..2 * w {
                    s.push(m.eval(*s.last().expect("nonempty")));
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut lookup = HashMap::new();
        let fixed: Vec<u64> = m.fixed_coords().iter().map(|q| q.to_bits()).collect();
        for (i, s) in strands.iter().enumerate() {
            for (j, &x) in s.iter().enumerate() {
                if fixed.contains(&x.to_bits()) || lookup.insert(x.to_bits(), (i, j)).is_some() {
                    return Err(Error::Precondition(format!("strands are not disjoint at {x}")));
                }
            }
        }
        Ok(FiniteMapCoding {
            window,
            strands,
            lookup,
        })
    }

    /// `b^(i+1)_n` for `x = f^-n(x^i_0)`, the fixed point off the strands.
    pub fn phi(&self, x: f64) -> SqPoint {
        match self.lookup.get(&x.to_bits()) {
            Some(&(i, j)) => SqPoint::new(0, [(self.window as i64 + 1 - j as i64, i as u32 + 1)]),
            None => sq_fixed(),
        }
    }

    /// Strand points with `|m| <= W`, each paired with its coding.
    pub fn domain(&self) -> impl Iterator<Item = f64> + '_ {
        self.strands.iter().flat_map(|s| s[1..s.len() - 1].iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub checked: usize,
    pub passed: usize,
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        self.checked == self.passed
    }
}

/// `phi(f(x)) = shift(phi(x))` over every tabulated point and the extra points.
pub fn check_finite_map_coding(m: &MorseSmaleCircleMap, coding: &FiniteMapCoding, extra: &[f64]) -> IdentityCheck {
    let mut check = IdentityCheck { checked: 0, passed: 0 };
    for x in coding.domain().chain(extra.iter().copied()) {
        check.checked += 1;
        if coding.phi(m.eval(x)) == coding.phi(x).shift_step(1) {
            check.passed += 1;
        }
    }
    check
}

/// Subcontinua of the cone over `{b_n} ∪ {a}` that contain the apex: spoke `n`
/// is covered from height `h_n` up to the apex; `h_n = 1` is the apex alone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeContinuum {
    heights: BTreeMap<i64, f64>,
}

impl ConeContinuum {
    pub fn apex() -> Self {
        ConeContinuum {
            heights: BTreeMap::new(),
        }
    }

    pub fn new(heights: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (n, h) in heights {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::InvalidParameter(format!("height {h} outside [0, 1]")));
            }
            if h < 1.0 {
                out.insert(n, h);
            }
        }
        Ok(ConeContinuum { heights: out })
    }

    pub fn height(&self, n: i64) -> f64 {
        self.heights.get(&n).copied().unwrap_or(1.0)
    }

    /// The induced base shift: spoke `n` moves to spoke `n + 1`.
    pub fn step(&self) -> Self {
        ConeContinuum {
            heights: self.heights.iter().map(|(&n, &h)| (n + 1, h)).collect(),
        }
    }
}

pub fn cone_phi(a: &ConeContinuum) -> FiniteSupportSequence<f64> {
    FiniteSupportSequence::new(0.0, a.heights.iter().map(|(&n, &h)| (n, 1.0 - h)))
}

pub fn random_cone(rng: &mut impl Rng, window: i64) -> ConeContinuum {
    let heights: Vec<(i64, f64)> = (0..rng.gen_range(0..6))
        .map(|_| (rng.gen_range(-window..=window), rng.gen_range(0.0..=1.0)))
        .collect();
    ConeContinuum::new(heights).expect("heights drawn from [0, 1]")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn shifting() {
        let a = sq_fixed();
        assert_eq!(a.shift_step(1), a);
        let b = sq_point(0, 1).unwrap();
        assert_eq!(b.shift_step(1), sq_point(-1, 1).unwrap());
        assert_eq!(b.shift_step(1).shift_step(-1), b);
        let s = FiniteSupportSequence::new(0.0, [(2, 0.5), (3, 0.0)]);
        assert_eq!(s.exceptions().len(), 1);
        assert_eq!(*s.shift_step(-1).get(3), 0.5);
    }

    #[test]
    fn hilbert_metric_examples() {
        let a = sq_to_cube(&sq_fixed());
        let b0 = sq_to_cube(&sq_point(0, 1).unwrap());
        assert_eq!(hilbert_metric_d(&a, &a).unwrap(), 0.0);
        assert_eq!(hilbert_metric_d(&b0, &a).unwrap(), 1.0);
        let b2 = sq_to_cube(&sq_point(2, 1).unwrap());
        let bm1 = sq_to_cube(&sq_point(-1, 1).unwrap());
        assert_eq!(hilbert_metric_d(&b2, &bm1).unwrap(), 0.75);
        let ones = FiniteSupportSequence::constant(1.0);
        assert_eq!(hilbert_metric_d(&a, &ones), Err(Error::DefaultMismatch));
    }

    #[test]
    fn hilbert_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut draw = || {
            FiniteSupportSequence::new(
                0.0,
                (0..rng.gen_range(0..5))
                    .map(|_| (rng.gen_range(-6..=6i64), rng.gen_range(0..=8) as f64 / 8.0))
                    .collect::<Vec<_>>(),
            )
        };
        for _ in 0..300 {
            let (x, y, z) = (draw(), draw(), draw());
            let dxy = hilbert_metric_d(&x, &y).unwrap();
            assert_eq!(dxy, hilbert_metric_d(&y, &x).unwrap());
            assert!(dxy <= hilbert_metric_d(&x, &z).unwrap() + hilbert_metric_d(&z, &y).unwrap());
            assert_eq!(dxy == 0.0, x == y);
        }
    }

    #[test]
    fn sq_returns_are_bounded_away() {
        let rows = sq_nonwandering_evidence(20, &[(0, 1), (3, 2), (-4, 5)]).unwrap();
        assert!(rows[0].min_return >= 0.5);
        assert!(rows.iter().all(|r| r.certified && r.min_return > 0.0));
    }

    #[test]
    fn sq_validity_survives_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            for x in random_sq_set(&mut rng, 10, 3) {
                assert!(sq_valid(&x));
                assert!(sq_valid(&x.shift_step(1)) && sq_valid(&x.shift_step(-1)));
            }
        }
        assert!(!sq_valid(&SqPoint::new(0, [(0, 2), (4, 2)])));
    }

    #[test]
    fn phi_sq_examples() {
        assert_eq!(phi_sq(&[sq_fixed()], 2), FiniteSupportSequence::constant(0));
        let set = [sq_point(0, 1).unwrap(), sq_point(0, 2).unwrap()];
        assert_eq!(phi_sq(&set, 2), FiniteSupportSequence::new(0, [(0, 0b11)]));
        assert_eq!(phi_sq(&set, 1), FiniteSupportSequence::new(0, [(0, 0b01)]));
    }

    #[test]
    fn phi_sq_equivariant_and_onto() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let set = random_sq_set(&mut rng, 8, 3);
            let image: Vec<SqPoint> = set.iter().map(|x| x.shift_step(1)).collect();
            assert_eq!(phi_sq(&image, 3), phi_sq(&set, 3).shift_step(1));
        }
        for code in 0..1u32 << 6 {
            let pattern = FiniteSupportSequence::new(0u32, [(-1, code & 3), (0, code >> 2 & 3), (1, code >> 4)]);
            assert_eq!(phi_sq(&phi_sq_preimage(&pattern), 2), pattern);
        }
    }

    #[test]
    fn finite_map_coding_circle() {
        let m = MorseSmaleCircleMap::preserving(1, 0.1).unwrap();
        let coding = FiniteMapCoding::circle(&m, 3, 30).unwrap();
        assert_eq!(coding.phi(0.0), sq_fixed());
        let x = coding.strands[0][(-3 + 31) as usize];
        assert_eq!(coding.phi(x), sq_point(3, 1).unwrap());
        let check = check_finite_map_coding(&m, &coding, &[0.0, 0.5, 0.123_456, 0.987_654]);
        assert_eq!(check.checked, 3 * 61 + 4);
        assert!(check.holds());
        let codes: BTreeSet<String> = coding.domain().map(|x| format!("{:?}", coding.phi(x))).collect();
        assert_eq!(codes.len(), 3 * 61);
    }

    #[test]
    fn cone_examples() {
        assert_eq!(cone_phi(&ConeContinuum::apex()), FiniteSupportSequence::constant(0.0));
        assert_eq!(
            cone_phi(&ConeContinuum::apex().step()),
            cone_phi(&ConeContinuum::apex())
        );
        let a = ConeContinuum::new([(0, 0.25)]).unwrap();
        assert_eq!(cone_phi(&a), FiniteSupportSequence::new(0.0, [(0, 0.75)]));
        assert!(ConeContinuum::new([(0, 1.5)]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let c = random_cone(&mut rng, 10);
            assert_eq!(cone_phi(&c.step()), cone_phi(&c).shift_step(-1));
        }
    }
}
