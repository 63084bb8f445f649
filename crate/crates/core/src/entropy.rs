//! Separated-set entropy estimates and the orbit coding that yields exact
//! exponential lower bounds for `2^f`.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{circle_distance, CircleContinuum, CirclePoint, MorseSmaleCircleMap};
use crate::error::{Error, Result};
use crate::hyperspace::{hausdorff_continua, hausdorff_finite, induced_2f_step, FiniteSubset};

/// A compact metric space with a map on it and a seeded sampler.
pub trait MetricSystem: Sync {
    type Point: Clone + Send + Sync;

    fn sample(&self, count: usize, seed: u64) -> Vec<Self::Point>;
    fn metric(&self, a: &Self::Point, b: &Self::Point) -> f64;
    fn forward(&self, x: &Self::Point) -> Self::Point;
    fn inverse(&self, _x: &Self::Point) -> Result<Self::Point> {
        Err(Error::MissingInverse)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

fn orbit<S: MetricSystem>(sys: &S, x: &S::Point, n: usize, dir: Direction) -> Result<Vec<S::Point>> {
    let mut out = Vec::with_capacity(n);
    let mut cur = x.clone();
    out.push(cur.clone());
    for _ in 1..n {
        cur = match dir {
            Direction::Forward => sys.forward(&cur),
            Direction::Backward => sys.inverse(&cur)?,
        };
        out.push(cur.clone());
    }
    Ok(out)
}

/// `max_{0 <= i < n} d(g^i x, g^i y)` with `g` the forward map or its inverse.
pub fn dn_distance<S: MetricSystem>(sys: &S, x: &S::Point, y: &S::Point, n: usize, dir: Direction) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let (ox, oy) = (orbit(sys, x, n, dir)?, orbit(sys, y, n, dir)?);
    Ok(ox.iter().zip(&oy).map(|(a, b)| sys.metric(a, b)).fold(0.0, f64::max))
}

fn separated<S: MetricSystem>(sys: &S, a: &[S::Point], b: &[S::Point], n: usize, eps: f64) -> bool {
    a[..n].iter().zip(&b[..n]).any(|(x, y)| sys.metric(x, y) > eps)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyOutcome {
    /// Indices into the sample list, in selection order.
    pub selected: Vec<usize>,
    pub evaluations: u64,
    /// False when the evaluation cap stopped the scan.
    pub complete: bool,
}

fn greedy_on_orbits<S: MetricSystem>(sys: &S, orbits: &[Vec<S::Point>], n: usize, eps: f64, cap: u64) -> GreedyOutcome {
    let mut selected: Vec<usize> = Vec::new();
    let mut evaluations = 0u64;
    for (i, o) in orbits.iter().enumerate() {
        let mut keep = true;
        for &j in &selected {
            if evaluations == cap {
                return GreedyOutcome {
                    selected,
                    evaluations,
                    complete: false,
                };
            }
            evaluations += 1;
            if !separated(sys, o, &orbits[j], n, eps) {
                keep = false;
                break;
            }
        }
        if keep {
            selected.push(i);
        }
    }
    GreedyOutcome {
        selected,
        evaluations,
        complete: true,
    }
}

/// Scans `samples` in order and keeps each one that is `(n, eps)`-separated
/// from everything kept so far.
pub fn greedy_separated<S: MetricSystem>(sys: &S, samples: &[S::Point], n: usize, eps: f64) -> Result<GreedyOutcome> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let orbits = samples
        .par_iter()
        .map(|x| orbit(sys, x, n, Direction::Forward))
        .collect::<Result<Vec<_>>>()?;
    Ok(greedy_on_orbits(sys, &orbits, n, eps, u64::MAX))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    Greedy,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparatedRow {
    pub n: usize,
    pub epsilon: f64,
    pub count: usize,
    pub method: CountMethod,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySchedule {
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub samples: usize,
    /// Cap on pairwise `d_n` comparisons over the whole table.
    #[serde(default)]
    pub budget: Option<u64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub rows: Vec<SeparatedRow>,
    pub evaluations: u64,
    /// Set when the budget ran out before every row was filled.
    pub partial: bool,
    /// Largest tail slope of `log count` against `n`, over the epsilons.
    pub extrapolated: f64,
}

impl EntropyReport {
    pub fn counts(&self, epsilon: f64) -> Vec<(usize, usize)> {
        self.rows
            .iter()
            .filter(|r| r.epsilon == epsilon)
            .map(|r| (r.n, r.count))
            .collect()
    }
}

/// Least-squares slope of `log count` over the last three `n` values.
pub fn tail_slope(points: &[(usize, usize)]) -> f64 {
    let tail = &points[points.len().saturating_sub(3)..];
    if tail.len() < 2 {
        return tail.first().map_or(0.0, |&(n, c)| (c as f64).ln() / n as f64);
    }
    let xs: Vec<f64> = tail.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&(_, c)| (c as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fills the `(epsilon, n)` table of greedy counts. Rows are computed in
/// parallel and then charged against the budget in table order; rows past the
/// point of exhaustion are dropped.
pub fn entropy_estimate<S: MetricSystem>(sys: &S, schedule: &EntropySchedule) -> Result<EntropyReport> {
    let EntropySchedule {
        epsilons,
        ns,
        samples,
        budget,
        seed,
    } = schedule;
    if epsilons.is_empty() || ns.is_empty() || *samples == 0 {
        return Err(Error::InvalidParameter(
            "schedules and sample count must be nonempty".into(),
        ));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidParameter(
            "epsilons must be positive and decreasing".into(),
        ));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] == 0 {
        return Err(Error::InvalidParameter(
            "n schedule must be positive and increasing".into(),
        ));
    }
    let n_max = *ns.last().expect("nonempty");
    let points = sys.sample(*samples, *seed);
    let orbits = points
        .par_iter()
        .map(|x| orbit(sys, x, n_max, Direction::Forward))
        .collect::<Result<Vec<_>>>()?;
    let cap = budget.unwrap_or(u64::MAX);
    let cells: Vec<(f64, usize)> = epsilons.iter().flat_map(|&e| ns.iter().map(move |&n| (e, n))).collect();
    let outcomes: Vec<GreedyOutcome> = cells
        .par_iter()
        .map(|&(e, n)| greedy_on_orbits(sys, &orbits, n, e, cap))
        .collect();

    let mut rows = Vec::new();
    let mut spent = 0u64;
    let mut partial = false;
    for (&(epsilon, n), out) in cells.iter().zip(&outcomes) {
        if !out.complete || spent + out.evaluations > cap {
            partial = true;
            spent = cap;
            break;
        }
        spent += out.evaluations;
        let count = out.selected.len();
        rows.push(SeparatedRow {
            n,
            epsilon,
            count,
            method: CountMethod::Greedy,
            estimate: (count as f64).ln() / n as f64,
        });
    }
    let mut report = EntropyReport {
        rows,
        evaluations: spent,
        partial,
        extrapolated: 0.0,
    };
    report.extrapolated = epsilons
        .iter()
        .map(|&e| report.counts(e))
        .filter(|c| !c.is_empty())
        .map(|c| tail_slope(&c))
        .fold(0.0, f64::max);
    Ok(report)
}

/// The circle map acting on points.
pub struct CircleSystem(pub MorseSmaleCircleMap);

impl MetricSystem for CircleSystem {
    type Point = f64;

    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    fn metric(&self, a: &f64, b: &f64) -> f64 {
        circle_distance(*a, *b)
    }

    fn forward(&self, x: &f64) -> f64 {
        self.0.eval(*x)
    }

    fn inverse(&self, x: &f64) -> Result<f64> {
        self.0.inverse(*x)
    }
}

/// Rigid rotation `x -> x + angle`.
pub struct Rotation {
    pub angle: f64,
}

impl MetricSystem for Rotation {
    type Point = f64;

    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    fn metric(&self, a: &f64, b: &f64) -> f64 {
        circle_distance(*a, *b)
    }

    fn forward(&self, x: &f64) -> f64 {
        CirclePoint::new(x + self.angle).coord()
    }

    fn inverse(&self, x: &f64) -> Result<f64> {
        Ok(CirclePoint::new(x - self.angle).coord())
    }
}

/// `C(f)` on subcontinua of the circle with the Hausdorff metric.
pub struct ArcSystem(pub MorseSmaleCircleMap);

impl MetricSystem for ArcSystem {
    type Point = CircleContinuum;

    /// Mostly proper arcs with uniform start and length, plus some points.
    fn sample(&self, count: usize, seed: u64) -> Vec<CircleContinuum> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let a: f64 = rng.gen_range(0.0..1.0);
                if rng.gen_bool(0.1) {
                    return CircleContinuum::point(a);
                }
                let len: f64 = rng.gen_range(1e-3..0.999);
                CircleContinuum::arc(a, a + len).unwrap_or(CircleContinuum::point(a))
            })
            .collect()
    }

    fn metric(&self, a: &CircleContinuum, b: &CircleContinuum) -> f64 {
        hausdorff_continua(a, b).value
    }

    fn forward(&self, x: &CircleContinuum) -> CircleContinuum {
        self.0.continuum_image(x)
    }

    fn inverse(&self, x: &CircleContinuum) -> Result<CircleContinuum> {
        self.0.continuum_preimage(x)
    }
}

/// One-sided full shift on `symbols` letters, truncated to words of length
/// `depth`, with `d(x, y) = 2^-(first differing position)`.
pub struct FullShift {
    pub symbols: u8,
    pub depth: usize,
}

impl FullShift {
    /// One word per cylinder of length `n`, padded with zeros.
    pub fn cylinders(&self, n: usize) -> Vec<Vec<u8>> {
        let r = self.symbols as usize;
        (0..r.pow(n as u32))
            .map(|mut code| {
                let mut w = vec![0u8; self.depth];
                for s in w.iter_mut().take(n) {
                    *s = (code % r) as u8;
                    code /= r;
                }
                w
            })
            .collect()
    }
}

impl MetricSystem for FullShift {
    type Point = Vec<u8>;

    fn sample(&self, count: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..self.depth).map(|_| rng.gen_range(0..self.symbols)).collect())
            .collect()
    }

    fn metric(&self, a: &Vec<u8>, b: &Vec<u8>) -> f64 {
        a.iter()
            .zip(b)
            .position(|(x, y)| x != y)
            .map_or(0.0, |i| 0.5f64.powi(i as i32))
    }

    fn forward(&self, x: &Vec<u8>) -> Vec<u8> {
        let mut w = x[1..].to_vec();
        w.push(0);
        w
    }
}

/// Membership of an orbit point in a subset is decided within this distance.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Distances between this and the membership tolerance are ambiguous.
pub const AMBIGUITY_BAND: f64 = 1e-6;

/// Base points `y_0 .. y_{r-1}` evenly spaced in one fundamental domain
/// `[y, f(y))` between the first repeller and the next attractor, so their
/// orbits are distinct.
pub fn coding_base_points(m: &MorseSmaleCircleMap, r: usize) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::InvalidParameter("need at least one base point".into()));
    }
    let half_gap = 0.5 / (2.0 * m.pairs() as f64);
    let y = match m.orientation() {
        crate::circle::Orientation::Preserving => half_gap,
        crate::circle::Orientation::Reversing => {
            return Err(Error::Precondition(
                "the coding uses an orientation-preserving map".into(),
            ))
        }
    };
    let step = m.eval(y) - y;
    Ok((0..r).map(|k| y + step * k as f64 / r as f64).collect())
}

/// `w[k][n + W] = 1` iff `f^n(y_k)` lies in `A`, for `|n| <= W`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodingMatrix {
    pub window: usize,
    pub rows: Vec<Vec<bool>>,
}

impl CodingMatrix {
    pub fn get(&self, k: usize, n: i64) -> bool {
        self.rows[k][(n + self.window as i64) as usize]
    }
}

pub fn orbit_table(m: &MorseSmaleCircleMap, base: &[f64], window: usize) -> Result<Vec<Vec<f64>>> {
    let w = window as i64;
    base.iter()
        .map(|&y| (-w..=w).map(|n| m.iterate(y, n)).collect::<Result<Vec<_>>>())
        .collect()
}

pub fn coding_phi_finite(
    m: &MorseSmaleCircleMap,
    base: &[f64],
    set: &FiniteSubset<CirclePoint>,
    window: usize,
) -> Result<CodingMatrix> {
    code_against_table(&orbit_table(m, base, window)?, set, window)
}

/// Codes `set` against a precomputed orbit table (rows of `2W + 1` points).
pub fn code_against_table(table: &[Vec<f64>], set: &FiniteSubset<CirclePoint>, window: usize) -> Result<CodingMatrix> {
    let rows = table
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| {
                    let d = set.distance_to(&CirclePoint::new(x));
                    if d <= MEMBERSHIP_TOL {
                        Ok(true)
                    } else if d < AMBIGUITY_BAND {
                        Err(Error::AmbiguousMembership { point: x, distance: d })
                    } else {
                        Ok(false)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CodingMatrix { window, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct CodingFamily {
    pub base: Vec<f64>,
    pub anchors: Vec<f64>,
    pub n: usize,
    pub subsets: Vec<FiniteSubset<CirclePoint>>,
    /// Half the smallest spacing of the orbit grid and the anchors.
    pub delta: f64,
    pub min_pair_distance: f64,
    pub pairs_checked: usize,
    pub count: usize,
    pub estimate: f64,
}

/// Spacing below which the orbit grid is rejected.
pub const MIN_GRID_SPACING: f64 = 1e-6;

/// All `2^(r n)` subsets `{f^i(y_k) : bit (k, i) set} ∪ Fix(f)`, certified
/// pairwise `(n, delta)`-separated for `2^f` by exhaustive comparison.
pub fn exact_separated_lower_bound_coding(m: &MorseSmaleCircleMap, r: usize, n: usize) -> Result<CodingFamily> {
    if r == 0 || n == 0 || r * n > 12 {
        return Err(Error::InvalidParameter(format!("r * n = {} must lie in 1..=12", r * n)));
    }
    let base = coding_base_points(m, r)?;
    let grid: Vec<f64> = base
        .iter()
        .flat_map(|&y| (0..n as i64).map(move |i| m.iterate(y, i)))
        .collect::<Result<Vec<_>>>()?;
    let anchors = m.fixed_coords();
    let all: Vec<f64> = grid.iter().chain(&anchors).copied().collect();
    let mut spacing = f64::INFINITY;
    for (i, &a) in all.iter().enumerate() {
        for &b in &all[i + 1..] {
            spacing = spacing.min(circle_distance(a, b));
        }
    }
    if spacing < MIN_GRID_SPACING {
        return Err(Error::SpacingCollapse(spacing));
    }
    let delta = 0.5 * spacing;
    let bits = r * n;
    let subsets = (0u32..1 << bits)
        .map(|pattern| {
            let mut coords: Vec<f64> = anchors.clone();
            coords.extend((0..bits).filter(|b| pattern >> b & 1 == 1).map(|b| grid[b]));
            FiniteSubset::from_coords(&coords)
        })
        .collect::<Result<Vec<_>>>()?;
    let orbits: Vec<Vec<FiniteSubset<CirclePoint>>> = subsets
        .par_iter()
        .map(|s| {
            let mut out = vec![s.clone()];
            for _ in 1..n {
                out.push(induced_2f_step(m, out.last().expect("nonempty")));
            }
            out
        })
        .collect();
    let count = subsets.len();
    let min_pair_distance = (0..count)
        .into_par_iter()
        .map(|i| {
            (i + 1..count)
                .map(|j| {
                    orbits[i]
                        .iter()
                        .zip(&orbits[j])
                        .map(|(a, b)| hausdorff_finite(a, b).value)
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    if count > 1 && min_pair_distance <= delta {
        return Err(Error::Invariant(format!(
            "pair at distance {min_pair_distance} is not {delta}-separated"
        )));
    }
    Ok(CodingFamily {
        base,
        anchors,
        n,
        subsets,
        delta,
        min_pair_distance,
        pairs_checked: count * (count - 1) / 2,
        count,
        estimate: (count as f64).log2() / n as f64 * LN_2,
    })
}
