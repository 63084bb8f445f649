//! The comb dendrite: the segment `[-1, 1] x {0}` with vertical legs of height
//! `1/(|n|+1)` at the nodes `a_n`, and the homeomorphism that moves every node
//! and leg one index to the right. Points and subtrees are stored by node index
//! so the map and its inverse act exactly.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbolic::FiniteSupportSequence;

/// `a_0 = 0`, `a_n = 1 - 1/(n+1)`, `a_{-n} = -a_n`.
pub fn node(n: i64) -> f64 {
    let a = 1.0 - 1.0 / (n.unsigned_abs() as f64 + 1.0);
    if n < 0 {
        -a
    } else {
        a
    }
}

pub fn leg_length(n: i64) -> f64 {
    1.0 / (n.unsigned_abs() as f64 + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DendritePoint {
    /// The left end `(-1, 0)`.
    P,
    /// The right end `(1, 0)`.
    Q,
    /// `a_seg + t (a_{seg+1} - a_seg)` on the spine, `t` in `[0, 1)`.
    Spine { seg: i64, t: f64 },
    /// Height `frac / (|node|+1)` on leg `node`, `frac` in `(0, 1]`.
    Leg { node: i64, frac: f64 },
}

impl DendritePoint {
    pub fn spine(x: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Geometry(format!("spine coordinate {x} outside [-1, 1]")));
        }
        if x == -1.0 {
            return Ok(DendritePoint::P);
        }
        if x == 1.0 {
            return Ok(DendritePoint::Q);
        }
        let m = (1.0 / (1.0 - x.abs()) - 1.0).floor() as i64;
        let mut seg = if x >= 0.0 { m } else { -m - 1 };
        while node(seg) > x {
            seg -= 1;
        }
        while node(seg + 1) <= x {
            seg += 1;
        }
        let t = (x - node(seg)) / (node(seg + 1) - node(seg));
        Ok(DendritePoint::Spine { seg, t })
    }

    pub fn leg(n: i64, height: f64) -> Result<Self> {
        let frac = height / leg_length(n);
        if !(0.0..=1.0).contains(&frac) {
            return Err(Error::Geometry(format!("height {height} outside leg {n}")));
        }
        Ok(if frac == 0.0 {
            DendritePoint::Spine { seg: n, t: 0.0 }
        } else {
            DendritePoint::Leg { node: n, frac }
        })
    }

    pub fn coords(&self) -> (f64, f64) {
        match *self {
            DendritePoint::P => (-1.0, 0.0),
            DendritePoint::Q => (1.0, 0.0),
            DendritePoint::Spine { seg, t } => (node(seg) + t * (node(seg + 1) - node(seg)), 0.0),
            DendritePoint::Leg { node: n, frac } => (node(n), frac * leg_length(n)),
        }
    }

    pub fn distance(&self, other: &DendritePoint) -> f64 {
        let (a, b) = (self.coords(), other.coords());
        (a.0 - b.0).hypot(a.1 - b.1)
    }

    pub fn is_spine(&self) -> bool {
        !matches!(self, DendritePoint::Leg { .. })
    }

    /// `F^steps`, exact for any sign of `steps`.
    pub fn map(&self, steps: i64) -> Self {
        match *self {
            DendritePoint::Spine { seg, t } => DendritePoint::Spine { seg: seg + steps, t },
            DendritePoint::Leg { node, frac } => DendritePoint::Leg {
                node: node + steps,
                frac,
            },
            end => end,
        }
    }

    pub fn eval(&self) -> Self {
        self.map(1)
    }

    pub fn inverse(&self) -> Self {
        self.map(-1)
    }

    fn spine_x(&self) -> f64 {
        self.coords().0
    }
}

/// A spine interval plus legs rising from nodes inside it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subtree {
    lo: DendritePoint,
    hi: DendritePoint,
    /// Node index to leg fraction in `(0, 1]`.
    legs: BTreeMap<i64, f64>,
}

impl Subtree {
    pub fn new(lo: DendritePoint, hi: DendritePoint, legs: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        if !lo.is_spine() || !hi.is_spine() || lo.spine_x() > hi.spine_x() {
            return Err(Error::Geometry("spine interval must be ordered spine points".into()));
        }
        let mut out = BTreeMap::new();
        for (n, frac) in legs {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(Error::Geometry(format!("leg fraction {frac} outside (0, 1]")));
            }
            if node(n) < lo.spine_x() || node(n) > hi.spine_x() {
                return Err(Error::Geometry(format!(
                    "leg {n} is not attached to the spine interval"
                )));
            }
            out.insert(n, frac);
        }
        Ok(Subtree { lo, hi, legs: out })
    }

    pub fn spine_only(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DendritePoint::spine(lo)?, DendritePoint::spine(hi)?, [])
    }

    pub fn spine_interval(&self) -> (f64, f64) {
        (self.lo.spine_x(), self.hi.spine_x())
    }

    pub fn legs(&self) -> &BTreeMap<i64, f64> {
        &self.legs
    }

    /// `C(F)^steps`.
    pub fn image(&self, steps: i64) -> Self {
        Subtree {
            lo: self.lo.map(steps),
            hi: self.hi.map(steps),
            legs: self.legs.iter().map(|(&n, &f)| (n + steps, f)).collect(),
        }
    }

    pub fn contains(&self, x: &DendritePoint) -> bool {
        let (u, v) = self.spine_interval();
        match *x {
            DendritePoint::Leg { node: n, frac } => self.legs.get(&n).is_some_and(|&h| frac <= h),
            _ => (u..=v).contains(&x.spine_x()),
        }
    }

    /// The spine piece followed by one vertical segment per leg.
    fn segments(&self) -> Vec<Segment> {
        let (u, v) = self.spine_interval();
        let mut out = vec![Segment::Horizontal { from: u, to: v }];
        out.extend(self.legs.iter().map(|(&n, &f)| Segment::Vertical {
            x: node(n),
            top: f * leg_length(n),
        }));
        out
    }

    /// Points spaced at most `step` apart along every piece.
    pub fn discretize(&self, step: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for s in self.segments() {
            let (a, b, len) = match s {
                Segment::Horizontal { from, to } => ((from, 0.0), (to, 0.0), to - from),
                Segment::Vertical { x, top } => ((x, 0.0), (x, top), top),
            };
            let k = (len / step).ceil().max(1.0) as usize;
            out.extend((0..=k).map(|i| {
                let s = i as f64 / k as f64;
                (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))
            }));
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    Horizontal { from: f64, to: f64 },
    Vertical { x: f64, top: f64 },
}

/// Distance along a source piece to one target piece, as
/// `sqrt(dist(s, [lo, hi])^2 + offset^2)` in the piece parameter `s`.
#[derive(Clone, Copy, Debug)]
struct Profile {
    lo: f64,
    hi: f64,
    offset: f64,
}

impl Profile {
    fn at(&self, s: f64) -> f64 {
        let d = if s < self.lo {
            self.lo - s
        } else if s > self.hi {
            s - self.hi
        } else {
            0.0
        };
        d.hypot(self.offset)
    }

    /// Linear pieces `alpha s + beta` of the unsigned distance to `[lo, hi]`.
    fn pieces(&self) -> [(f64, f64); 3] {
        [(-1.0, self.lo), (0.0, 0.0), (1.0, -self.hi)]
    }
}

fn profile(source: Segment, target: Segment) -> Profile {
    match (source, target) {
        (Segment::Horizontal { .. }, Segment::Horizontal { from, to }) => Profile {
            lo: from,
            hi: to,
            offset: 0.0,
        },
        // nearest point of a leg to a spine point is its foot
        (Segment::Horizontal { .. }, Segment::Vertical { x, .. }) => Profile {
            lo: x,
            hi: x,
            offset: 0.0,
        },
        (Segment::Vertical { x, .. }, Segment::Horizontal { from, to }) => {
            let d = if x < from {
                from - x
            } else if x > to {
                x - to
            } else {
                0.0
            };
            Profile {
                lo: 0.0,
                hi: 0.0,
                offset: d,
            }
        }
        (Segment::Vertical { x, .. }, Segment::Vertical { x: y, top }) => Profile {
            lo: 0.0,
            hi: top,
            offset: (x - y).abs(),
        },
    }
}

fn push_roots(a: f64, b: f64, c: f64, out: &mut Vec<f64>) {
    if a == 0.0 {
        if b != 0.0 {
            out.push(-c / b);
        }
        return;
    }
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        out.push((-b - r) / (2.0 * a));
        out.push((-b + r) / (2.0 * a));
    }
}

/// `sup_{s in [s0, s1]} min_j g_j(s)`. Each profile is unimodal with a flat
/// bottom, so the supremum of the lower envelope is attained at an end of the
/// range, a breakpoint of some profile, or a crossing of two profiles.
fn envelope_sup(s0: f64, s1: f64, profiles: &[Profile]) -> f64 {
    let mut cands = vec![s0, s1];
    for p in profiles {
        cands.extend([p.lo, p.hi]);
    }
    for (i, p) in profiles.iter().enumerate() {
        for q in &profiles[i + 1..] {
            for (ai, bi) in p.pieces() {
                for (aj, bj) in q.pieces() {
                    push_roots(
                        ai * ai - aj * aj,
                        2.0 * (ai * bi - aj * bj),
                        bi * bi + p.offset * p.offset - bj * bj - q.offset * q.offset,
                        &mut cands,
                    );
                }
            }
        }
    }
    cands
        .into_iter()
        .filter(|s| s.is_finite() && (s0..=s1).contains(s))
        .map(|s| profiles.iter().map(|p| p.at(s)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn directed(from: &Subtree, to: &Subtree) -> f64 {
    let targets = to.segments();
    from.segments()
        .into_iter()
        .map(|s| {
            let profiles: Vec<Profile> = targets.iter().map(|&t| profile(s, t)).collect();
            match s {
                Segment::Horizontal { from, to } => envelope_sup(from, to, &profiles),
                Segment::Vertical { top, .. } => envelope_sup(0.0, top, &profiles),
            }
        })
        .fold(0.0, f64::max)
}

/// Exact Euclidean Hausdorff distance between two subtrees.
pub fn hausdorff_subtrees(a: &Subtree, b: &Subtree) -> f64 {
    if a == b {
        return 0.0;
    }
    directed(a, b).max(directed(b, a))
}

/// The subtree with a leg stub of fraction `sigma_j / k` at node `j` and spine
/// `[a_0, a_{n-1}]`: the graduation points of the leg at node 0 pushed along
/// `n` iterates.
pub fn build_c_sigma(k: u32, sigma: &[u32]) -> Result<Subtree> {
    if k < 2 || sigma.is_empty() {
        return Err(Error::InvalidParameter("need k >= 2 and a nonempty word".into()));
    }
    if let Some(s) = sigma.iter().find(|&&s| s == 0 || s > k) {
        return Err(Error::InvalidParameter(format!("symbol {s} outside 1..={k}")));
    }
    let n = sigma.len() as i64;
    Subtree::new(
        DendritePoint::Spine { seg: 0, t: 0.0 },
        DendritePoint::Spine { seg: n - 1, t: 0.0 },
        sigma.iter().enumerate().map(|(j, &s)| (j as i64, s as f64 / k as f64)),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationCertificate {
    pub k: u32,
    pub n: usize,
    pub count: usize,
    pub pairs: usize,
    pub delta: f64,
    /// Smallest `(n, C(F)^-1)` distance over all pairs.
    pub delta_star: f64,
    pub certified: bool,
    /// `ln(count) / n`.
    pub growth: f64,
}

pub fn default_separation_delta(k: u32) -> f64 {
    0.9 * (1.0 / k as f64).min(0.5)
}

/// All `k^n` words, in lexicographic order.
pub fn words(k: u32, n: usize) -> Vec<Vec<u32>> {
    (0..k.pow(n as u32))
        .map(|mut code| {
            let mut w = vec![0; n];
            for s in w.iter_mut().rev() {
                *s = code % k + 1;
                code /= k;
            }
            w
        })
        .collect()
}

/// Compares `max_{0 <= j < n} d_H(F^-j C_s, F^-j C_t)` against `delta` for
/// every pair of words.
pub fn verify_c_sigma_separation(k: u32, n: usize, delta: Option<f64>) -> Result<SeparationCertificate> {
    if n == 0 || k < 2 || (k as u64).pow(n as u32) > 100 {
        return Err(Error::InvalidParameter(format!(
            "k^n must lie in 2..=100, got k={k}, n={n}"
        )));
    }
    let delta = delta.unwrap_or_else(|| default_separation_delta(k));
    let trees = words(k, n)
        .iter()
        .map(|w| build_c_sigma(k, w))
        .collect::<Result<Vec<_>>>()?;
    let orbits: Vec<Vec<Subtree>> = trees
        .iter()
        .map(|t| (0..n as i64).map(|j| t.image(-j)).collect())
        .collect();
    let count = trees.len();
    let delta_star = (0..count)
        .into_par_iter()
        .map(|i| {
            (i + 1..count)
                .map(|j| {
                    orbits[i]
                        .iter()
                        .zip(&orbits[j])
                        .map(|(a, b)| hausdorff_subtrees(a, b))
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(SeparationCertificate {
        k,
        n,
        count,
        pairs: count * (count - 1) / 2,
        delta,
        delta_star,
        certified: delta_star > delta,
        growth: (count as f64).ln() / n as f64,
    })
}

/// A full cone with `r` leg families: family `i` owns the nodes `r m + i`, and
/// the cone is the whole spine plus every selected full leg.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FullConeCode {
    pub r: u32,
    pub selected: BTreeSet<(u32, i64)>,
}

impl FullConeCode {
    pub fn new(r: u32, selected: impl IntoIterator<Item = (u32, i64)>) -> Result<Self> {
        if r == 0 || r > 32 {
            return Err(Error::InvalidParameter(format!("family count {r} outside 1..=32")));
        }
        let selected: BTreeSet<(u32, i64)> = selected.into_iter().collect();
        if let Some((i, _)) = selected.iter().find(|(i, _)| *i >= r) {
            return Err(Error::InvalidParameter(format!("family {i} outside 0..{r}")));
        }
        Ok(FullConeCode { r, selected })
    }

    /// Every family advances one position, which is `F^r` on the dendrite.
    pub fn step(&self) -> Self {
        FullConeCode {
            r: self.r,
            selected: self.selected.iter().map(|&(i, n)| (i, n + 1)).collect(),
        }
    }

    pub fn decode(&self) -> Subtree {
        Subtree {
            lo: DendritePoint::P,
            hi: DendritePoint::Q,
            legs: self
                .selected
                .iter()
                .map(|&(i, n)| (self.r as i64 * n + i as i64, 1.0))
                .collect(),
        }
    }
}

/// Bit `i` at index `n` iff leg `(i, n)` is in the cone.
pub fn fullcone_phi(code: &FullConeCode) -> FiniteSupportSequence<u32> {
    let mut out = FiniteSupportSequence::constant(0u32);
    for &(i, n) in &code.selected {
        let bits = *out.get(n) | 1 << i;
        out.set(n, bits);
    }
    out
}

pub fn fullcone_phi_inverse(r: u32, seq: &FiniteSupportSequence<u32>) -> Result<FullConeCode> {
    FullConeCode::new(
        r,
        seq.exceptions()
            .iter()
            .flat_map(|(&n, &bits)| (0..32).filter(move |b| bits >> b & 1 == 1).map(move |b| (b, n))),
    )
}

/// A lower bound for the Hausdorff distance between decoded cones that differ
/// at some node `m` in `[lo, hi]`: the tip of leg `m` is at least its own height
/// from the spine and at least the node gap from any other leg.
pub fn fullcone_separation_floor(lo: i64, hi: i64) -> f64 {
    (lo..=hi)
        .map(|m| leg_length(m).min(node(m) - node(m - 1)).min(node(m + 1) - node(m)))
        .fold(f64::INFINITY, f64::min)
}
