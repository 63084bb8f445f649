//! Pseudo-orbits of induced maps, a grid falsifier for shadowing of `C(f)` on
//! the circle, and constructive shadowing of finite-set pseudo-orbits under `2^f`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circle::{circle_distance, CircleContinuum, CirclePoint, MorseSmaleCircleMap, Orientation, Stability};
use crate::error::{Error, Result};
use crate::hyperspace::{hausdorff_continua, hausdorff_discretized, hausdorff_finite, induced_2f_step, FiniteSubset};

/// States `x_{-N} ..= x_N` stored at offset `N`.
#[derive(Clone, Debug, Serialize)]
pub struct PseudoOrbit<T> {
    pub window: usize,
    pub states: Vec<T>,
    pub gap: f64,
}

impl<T> PseudoOrbit<T> {
    pub fn new(window: usize, states: Vec<T>, gap: f64) -> Result<Self> {
        if states.len() != 2 * window + 1 {
            return Err(Error::InvalidParameter(format!(
                "window {window} needs {} states, got {}",
                2 * window + 1,
                states.len()
            )));
        }
        Ok(PseudoOrbit { window, states, gap })
    }

    pub fn at(&self, i: i64) -> &T {
        &self.states[(i + self.window as i64) as usize]
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i64> {
        -(self.window as i64)..=self.window as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub ok: bool,
    pub max_gap: f64,
}

/// Checks `dist(step(x_i), x_{i+1}) <= gap` for every consecutive pair.
pub fn verify_pseudo_orbit<T>(po: &PseudoOrbit<T>, step: impl Fn(&T) -> T, dist: impl Fn(&T, &T) -> f64) -> GapCheck {
    let max_gap = po
        .states
        .windows(2)
        .map(|w| dist(&step(&w[0]), &w[1]))
        .fold(0.0, f64::max);
    GapCheck {
        ok: max_gap <= po.gap,
        max_gap,
    }
}

/// An adjacent repeller/attractor pair `(q, p)` of a preserving map.
fn repeller_attractor(m: &MorseSmaleCircleMap) -> Result<(f64, f64)> {
    if m.orientation() != Orientation::Preserving {
        return Err(Error::Precondition(
            "the construction needs an orientation-preserving map".into(),
        ));
    }
    let fps = m.fixed_points();
    let q = fps
        .iter()
        .find(|f| f.stability == Stability::Repeller)
        .expect("repellers exist");
    let p = fps
        .iter()
        .find(|f| f.stability == Stability::Attractor && f.point.coord() > q.point.coord())
        .expect("attractors alternate with repellers");
    Ok((q.point.coord(), p.point.coord()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SplicedOrbit {
    pub attractor: f64,
    pub repeller: f64,
    pub orbit: PseudoOrbit<CircleContinuum>,
}

/// `x_0 = S^1`, `x_1` = circle minus a `delta/2` gap at the repeller,
/// `x_-1` = circle minus a `delta/2` gap at the attractor, and exact `C(f)`
/// orbits on either side.
pub fn build_spliced_pseudo_orbit(m: &MorseSmaleCircleMap, delta: f64, window: usize) -> Result<SplicedOrbit> {
    let (q, p) = repeller_attractor(m)?;
    if !(delta > 0.0 && delta < circle_distance(p, q)) {
        return Err(Error::Precondition(format!(
            "delta = {delta} must lie in (0, {}) for disjoint collars",
            circle_distance(p, q)
        )));
    }
    let h = 0.5 * delta;
    let around_attractor = CircleContinuum::arc(q + h, q - h)?;
    let around_repeller = CircleContinuum::arc(p + h, p - h)?;
    let mut states = vec![CircleContinuum::FullCircle; 2 * window + 1];
    if window >= 1 {
        states[window + 1] = around_attractor;
        states[window - 1] = around_repeller;
        for i in 2..=window {
            states[window + i] = m.continuum_image(&states[window + i - 1]);
            states[window - i] = m.continuum_preimage(&states[window - i + 1])?;
        }
    }
    Ok(SplicedOrbit {
        attractor: p,
        repeller: q,
        orbit: PseudoOrbit::new(window, states, delta)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Falsified,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct FalsificationReport {
    pub epsilon: f64,
    pub delta: f64,
    pub candidates_tested: usize,
    /// Smallest excess `d_H - epsilon` over candidates, each measured at its
    /// failing index (or, for a survivor, the largest excess over the window).
    pub worst_margin: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CandidateRecord {
    pub candidate: CircleContinuum,
    pub contains_repeller: bool,
    pub failing_index: Option<i64>,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditSummary {
    pub samples: usize,
    pub passed: usize,
    /// Largest disagreement between the recorded distance and the recomputation.
    pub max_discrepancy: f64,
    /// Largest gap between the exact recomputation and an `eta`-net estimate.
    pub max_net_gap: f64,
}

impl AuditSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.samples
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Falsification {
    pub report: FalsificationReport,
    pub records: Vec<CandidateRecord>,
}

#[derive(Clone, Copy)]
enum Cand {
    Point(usize),
    Arc(usize, usize),
    Full,
}

struct EndpointTables {
    coords: Vec<f64>,
    forward: Vec<Vec<f64>>,
    backward: Vec<Vec<f64>>,
}

impl EndpointTables {
    fn new(m: &MorseSmaleCircleMap, grid: usize, window: usize) -> Result<Self> {
        let coords: Vec<f64> = (0..grid).map(|i| i as f64 / grid as f64).collect();
        let orbit = |x: f64, dir: i64| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(window + 1);
            let mut cur = x;
            out.push(cur);
            for _ in 0..window {
                cur = m.iterate(cur, dir)?;
                out.push(cur);
            }
            Ok(out)
        };
        let forward = coords.par_iter().map(|&x| orbit(x, 1)).collect::<Result<Vec<_>>>()?;
        let backward = coords.par_iter().map(|&x| orbit(x, -1)).collect::<Result<Vec<_>>>()?;
        Ok(EndpointTables {
            coords,
            forward,
            backward,
        })
    }

    fn initial(&self, c: Cand) -> CircleContinuum {
        match c {
            Cand::Point(i) => CircleContinuum::point(self.coords[i]),
            Cand::Arc(i, j) => CircleContinuum::Arc {
                a: CirclePoint::new(self.coords[i]),
                b: CirclePoint::new(self.coords[j]),
            },
            Cand::Full => CircleContinuum::FullCircle,
        }
    }

    /// Step `n >= 1` along the forward or backward orbit of a preserving map.
    fn advance(&self, c: Cand, prev: &CircleContinuum, n: usize, forward: bool) -> CircleContinuum {
        let t = if forward { &self.forward } else { &self.backward };
        match c {
            Cand::Point(i) => CircleContinuum::point(t[i][n]),
            Cand::Arc(i, j) => CircleContinuum::arc_from_image(t[i][n], t[j][n], prev.length()),
            Cand::Full => CircleContinuum::FullCircle,
        }
    }
}

fn candidate_at(index: usize, grid: usize) -> Cand {
    if index < grid {
        return Cand::Point(index);
    }
    let k = index - grid;
    if k < grid * (grid - 1) {
        let i = k / (grid - 1);
        let mut j = k % (grid - 1);
        if j >= i {
            j += 1;
        }
        return Cand::Arc(i, j);
    }
    Cand::Full
}

/// A distance counts as leaving the `epsilon`-ball only when it clears
/// `epsilon` by this much, so grid ties decided by rounding never count.
pub const FAILURE_SLACK: f64 = 1e-12;

/// Every continuum with grid endpoints (points, arcs, the circle) is tested
/// against the spliced pseudo-orbit. A candidate fails at the first index where
/// its orbit leaves the `epsilon`-ball around the pseudo-orbit. When it contains
/// the repeller the forward side is searched first, otherwise the backward side.
pub fn falsify_cf_shadowing(
    m: &MorseSmaleCircleMap,
    epsilon: f64,
    delta: f64,
    window: usize,
    grid: f64,
) -> Result<Falsification> {
    let po = build_spliced_pseudo_orbit(m, delta, window)?;
    if !(epsilon > 0.0 && 2.0 * epsilon < circle_distance(po.attractor, po.repeller)) {
        return Err(Error::Precondition(format!(
            "epsilon = {epsilon} does not separate the balls around the fixed points and the circle"
        )));
    }
    if !(grid > 0.0 && grid <= 0.5) {
        return Err(Error::InvalidParameter(format!("grid spacing {grid} out of range")));
    }
    let check = verify_pseudo_orbit(
        &po.orbit,
        |c| m.continuum_image(c),
        |a, b| hausdorff_continua(a, b).value,
    );
    if !check.ok {
        return Err(Error::Invariant(format!(
            "pseudo-orbit gap {} exceeds {delta}",
            check.max_gap
        )));
    }
    let g = (1.0 / grid).round() as usize;
    let tables = EndpointTables::new(m, g, window)?;
    let total = g + g * (g - 1) + 1;
    let q = po.repeller;

    let records: Vec<CandidateRecord> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let cand = candidate_at(idx, g);
            let start = tables.initial(cand);
            let contains_repeller = start.contains(q);
            let mut best_excess = f64::NEG_INFINITY;
            let d0 = hausdorff_continua(&start, po.orbit.at(0)).value;
            if d0 > epsilon + FAILURE_SLACK {
                return CandidateRecord {
                    candidate: start,
                    contains_repeller,
                    failing_index: Some(0),
                    distance: d0,
                };
            }
            best_excess = best_excess.max(d0 - epsilon);
            let order = if contains_repeller {
                [true, false]
            } else {
                [false, true]
            };
            let mut best_d = d0;
            for forward in order {
                let mut cur = start;
                for n in 1..=window {
                    cur = tables.advance(cand, &cur, n, forward);
                    let i = if forward { n as i64 } else { -(n as i64) };
                    let d = hausdorff_continua(&cur, po.orbit.at(i)).value;
                    if d > epsilon + FAILURE_SLACK {
                        return CandidateRecord {
                            candidate: start,
                            contains_repeller,
                            failing_index: Some(i),
                            distance: d,
                        };
                    }
                    if d - epsilon > best_excess {
                        best_excess = d - epsilon;
                        best_d = d;
                    }
                }
            }
            CandidateRecord {
                candidate: start,
                contains_repeller,
                failing_index: None,
                distance: best_d,
            }
        })
        .collect();

    let worst_margin = records
        .iter()
        .map(|r| r.distance - epsilon)
        .fold(f64::INFINITY, f64::min);
    let verdict = if records.iter().all(|r| r.failing_index.is_some()) && worst_margin > FAILURE_SLACK {
        Verdict::Falsified
    } else {
        Verdict::Inconclusive
    };
    Ok(Falsification {
        report: FalsificationReport {
            epsilon,
            delta,
            candidates_tested: total,
            worst_margin,
            verdict,
        },
        records,
    })
}

/// Re-derives the failing distance of `samples` random failing records along
/// an independent path: the candidate is iterated with `C(f)` directly, the
/// pseudo-orbit state is rebuilt from its defining arc, the exact distance is
/// recomputed and compared against an `eta`-net estimate.
pub fn audit_failures(
    m: &MorseSmaleCircleMap,
    delta: f64,
    epsilon: f64,
    records: &[CandidateRecord],
    samples: usize,
    eta: f64,
    seed: u64,
) -> Result<AuditSummary> {
    let failing: Vec<&CandidateRecord> = records.iter().filter(|r| r.failing_index.is_some()).collect();
    if failing.is_empty() {
        return Ok(AuditSummary {
            samples: 0,
            passed: 0,
            max_discrepancy: 0.0,
            max_net_gap: 0.0,
        });
    }
    let (q, p) = repeller_attractor(m)?;
    let h = 0.5 * delta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<&CandidateRecord> = (0..samples).map(|_| failing[rng.gen_range(0..failing.len())]).collect();
    let mut summary = AuditSummary {
        samples,
        passed: 0,
        max_discrepancy: 0.0,
        max_net_gap: 0.0,
    };
    for r in picks {
        let i = r.failing_index.expect("filtered");
        let image = m.continuum_iterate(&r.candidate, i)?;
        let state = match i.signum() {
            0 => CircleContinuum::FullCircle,
            1 => m.continuum_iterate(&CircleContinuum::arc(q + h, q - h)?, i - 1)?,
            _ => m.continuum_iterate(&CircleContinuum::arc(p + h, p - h)?, i + 1)?,
        };
        let exact = hausdorff_continua(&image, &state).value;
        let net = hausdorff_discretized(&image, &state, eta).value;
        let discrepancy = (exact - r.distance).abs();
        let net_gap = (exact - net).abs();
        summary.max_discrepancy = summary.max_discrepancy.max(discrepancy);
        summary.max_net_gap = summary.max_net_gap.max(net_gap);
        if exact > epsilon + FAILURE_SLACK && discrepancy <= 1e-12 && net_gap <= 2.0 * eta {
            summary.passed += 1;
        }
    }
    Ok(summary)
}

/// A pseudo-orbit of finite sets given as labelled strands: `states[i + N][j]`
/// is the `j`-th point of `x_i`.
#[derive(Clone, Debug, Serialize)]
pub struct StrandPseudoOrbit {
    pub window: usize,
    pub states: Vec<Vec<f64>>,
    pub gap: f64,
}

impl StrandPseudoOrbit {
    pub fn strand_count(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn strand(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    pub fn sets(&self) -> Result<PseudoOrbit<FiniteSubset<CirclePoint>>> {
        let sets = self
            .states
            .iter()
            .map(|s| FiniteSubset::from_coords(s))
            .collect::<Result<Vec<_>>>()?;
        PseudoOrbit::new(self.window, sets, self.gap)
    }

    /// Every strand is itself a `gap`-pseudo-orbit of `f`.
    pub fn verify(&self, m: &MorseSmaleCircleMap) -> GapCheck {
        let mut max_gap: f64 = 0.0;
        for w in self.states.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                max_gap = max_gap.max(circle_distance(m.eval(*a), *b));
            }
        }
        GapCheck {
            ok: max_gap <= self.gap,
            max_gap,
        }
    }
}

/// Strands started uniformly at `x_{-N}` and pushed forward with uniform noise
/// of size at most `gap`.
pub fn random_strand_pseudo_orbit(
    m: &MorseSmaleCircleMap,
    strands: usize,
    window: usize,
    gap: f64,
    rng: &mut impl Rng,
) -> StrandPseudoOrbit {
    let mut states = vec![Vec::with_capacity(strands); 2 * window + 1];
    for _ in 0..strands {
        let mut x: f64 = rng.gen_range(0.0..1.0);
        states[0].push(x);
        for state in states.iter_mut().skip(1) {
            let noise: f64 = rng.gen_range(-gap..=gap);
            x = CirclePoint::new(m.eval(x) + noise).coord();
            state.push(x);
        }
    }
    StrandPseudoOrbit { window, states, gap }
}

/// Splits unlabelled finite-set states into strands: each step pairs the
/// images of the current strands with the points of the next state so that
/// every pair is within the gap (a perfect bipartite matching, found by
/// augmenting paths over nearest-first edge lists).
pub fn decompose_strands(
    m: &MorseSmaleCircleMap,
    sets: &PseudoOrbit<FiniteSubset<CirclePoint>>,
) -> Result<StrandPseudoOrbit> {
    let first = sets.states[0].coords();
    let s = first.len();
    let mut states = vec![first];
    for next in &sets.states[1..] {
        let next = next.coords();
        if next.len() != s {
            return Err(Error::Precondition(format!(
                "state sizes differ: {s} vs {}",
                next.len()
            )));
        }
        let prev = states.last().expect("nonempty");
        let edges: Vec<Vec<usize>> = prev
            .iter()
            .map(|&x| {
                let y = m.eval(x);
                let mut e: Vec<usize> = (0..s).filter(|&k| circle_distance(y, next[k]) <= sets.gap).collect();
                e.sort_by(|&a, &b| circle_distance(y, next[a]).total_cmp(&circle_distance(y, next[b])));
                e
            })
            .collect();
        let owner = perfect_matching(&edges, s)
            .ok_or_else(|| Error::Precondition(format!("no strand decomposition within {}", sets.gap)))?;
        let mut assigned = vec![0; s];
        for (k, j) in owner.into_iter().enumerate() {
            assigned[j] = k;
        }
        states.push(assigned.iter().map(|&k| next[k]).collect());
    }
    Ok(StrandPseudoOrbit {
        window: sets.window,
        states,
        gap: sets.gap,
    })
}

/// Returns `owner[k]` = left vertex matched to right vertex `k`.
fn perfect_matching(edges: &[Vec<usize>], right: usize) -> Option<Vec<usize>> {
    fn augment(j: usize, edges: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &k in &edges[j] {
            if !seen[k] {
                seen[k] = true;
                if owner[k].is_none_or(|o| augment(o, edges, seen, owner)) {
                    owner[k] = Some(j);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; right];
    for j in 0..edges.len() {
        let mut seen = vec![false; right];
        if !augment(j, edges, &mut seen, &mut owner) {
            return None;
        }
    }
    owner.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowStatus {
    Shadowed,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowReport {
    pub status: ShadowStatus,
    pub epsilon: f64,
    /// The shadowing set at index `-N`.
    pub anchor: FiniteSubset<CirclePoint>,
    /// The shadowing set at index 0.
    pub shadow: FiniteSubset<CirclePoint>,
    pub strand_sup: Vec<f64>,
    /// `sup_i d_H((2^f)^i(A), x_i)`, evaluated on the sets.
    pub sup_distance: f64,
}

/// `sup_i d(f^(i+N)(z), strand_i)` for a start `z` at index `-N`, abandoned
/// early once it exceeds `bound`.
fn strand_cost(m: &MorseSmaleCircleMap, z: f64, strand: &[f64], bound: f64) -> f64 {
    let mut sup = circle_distance(z, strand[0]);
    let mut cur = z;
    for &target in &strand[1..] {
        if sup > bound {
            return sup;
        }
        cur = m.eval(cur);
        sup = sup.max(circle_distance(cur, target));
    }
    sup
}

fn shadow_strand(m: &MorseSmaleCircleMap, strand: &[f64], grid: f64) -> (f64, f64) {
    let mut best = (strand[0], strand_cost(m, strand[0], strand, f64::INFINITY));
    let scan = |best: &mut (f64, f64), z: f64| {
        let c = strand_cost(m, z, strand, best.1);
        if c < best.1 {
            *best = (z, c);
        }
    };
    let n = (1.0 / grid).round() as usize;
    for k in 0..n {
        scan(&mut best, k as f64 / n as f64);
    }
    let centre = best.0;
    for k in -100..=100 {
        scan(&mut best, CirclePoint::new(centre + grid * k as f64 / 100.0).coord());
    }
    best
}

/// Shadows each strand by a grid search over its starting point at index `-N`
/// and reports the union of the shadowing points with its set-level tracking
/// distance. Orbits are only iterated forward, so the attracting side never
/// has to be run backwards.
pub fn shadow_finite_2f(
    m: &MorseSmaleCircleMap,
    po: &StrandPseudoOrbit,
    epsilon: f64,
    grid: f64,
) -> Result<ShadowReport> {
    if !(grid > 0.0 && grid < 1.0) {
        return Err(Error::InvalidParameter(format!("grid spacing {grid} out of range")));
    }
    let check = po.verify(m);
    if !check.ok {
        return Err(Error::Precondition(format!(
            "strand gap {} exceeds {}",
            check.max_gap, po.gap
        )));
    }
    let found: Vec<(f64, f64)> = (0..po.strand_count())
        .into_par_iter()
        .map(|j| shadow_strand(m, &po.strand(j), grid))
        .collect();
    let sets = po.sets()?;
    let mut cur = FiniteSubset::from_coords(&found.iter().map(|f| f.0).collect::<Vec<_>>())?;
    let anchor = cur.clone();
    let mut shadow = cur.clone();
    let mut sup: f64 = 0.0;
    for i in sets.indices() {
        if i > -(po.window as i64) {
            cur = induced_2f_step(m, &cur);
        }
        if i == 0 {
            shadow = cur.clone();
        }
        sup = sup.max(hausdorff_finite(&cur, sets.at(i)).value);
    }
    Ok(ShadowReport {
        status: if sup <= epsilon {
            ShadowStatus::Shadowed
        } else {
            ShadowStatus::Inconclusive
        },
        epsilon,
        anchor,
        shadow,
        strand_sup: found.iter().map(|f| f.1).collect(),
        sup_distance: sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1() -> MorseSmaleCircleMap {
        MorseSmaleCircleMap::preserving(1, 0.1).unwrap()
    }

    fn point_orbit(m: &MorseSmaleCircleMap, x: f64, window: usize) -> Vec<f64> {
        (-(window as i64)..=window as i64)
            .map(|i| m.iterate(x, i).unwrap())
            .collect()
    }

    #[test]
    fn gap_checks() {
        let m = m1();
        let exact = PseudoOrbit::new(5, point_orbit(&m, 0.3, 5), 0.01).unwrap();
        let step = |x: &f64| m.eval(*x);
        let d = |a: &f64, b: &f64| circle_distance(*a, *b);
        let c = verify_pseudo_orbit(&exact, step, d);
        assert!(c.ok && c.max_gap < 1e-12);
        let mut jump = exact.clone();
        jump.states[6] = CirclePoint::new(jump.states[6] + 0.02).coord();
        assert!(!verify_pseudo_orbit(&jump, step, d).ok);
    }

    #[test]
    fn single_link_gap_is_reported() {
        let m = m1();
        let mut states = point_orbit(&m, 0.3, 5);
        // restart the orbit at index 1 from a point delta/2 away from f(x_0)
        let restart = CirclePoint::new(m.eval(states[5]) + 0.005).coord();
        for (n, s) in states[6..].iter_mut().enumerate() {
            *s = m.iterate(restart, n as i64).unwrap();
        }
        let po = PseudoOrbit::new(5, states, 0.01).unwrap();
        let c = verify_pseudo_orbit(&po, |x| m.eval(*x), |a, b| circle_distance(*a, *b));
        assert!(c.ok);
        assert!((c.max_gap - 0.005).abs() < 1e-12);
    }

    #[test]
    fn spliced_orbit_is_a_pseudo_orbit() {
        let m = m1();
        let po = build_spliced_pseudo_orbit(&m, 0.01, 60).unwrap();
        let c = verify_pseudo_orbit(
            &po.orbit,
            |x| m.continuum_image(x),
            |a, b| hausdorff_continua(a, b).value,
        );
        assert!(c.ok, "max gap {}", c.max_gap);
        assert!(hausdorff_continua(po.orbit.at(1), &CircleContinuum::FullCircle).value < 0.01);
        // forward tail collapses onto the attractor, backward tail onto the repeller
        assert!(hausdorff_continua(po.orbit.at(60), &CircleContinuum::point(po.attractor)).value <= 1e-4);
        assert!(hausdorff_continua(po.orbit.at(-60), &CircleContinuum::point(po.repeller)).value <= 1e-4);
        assert!(build_spliced_pseudo_orbit(&m, 0.6, 10).is_err());
    }

    #[test]
    fn coarse_falsification() {
        let m = m1();
        let f = falsify_cf_shadowing(&m, 0.1, 0.01, 60, 0.02).unwrap();
        assert_eq!(f.report.verdict, Verdict::Falsified);
        assert_eq!(f.report.candidates_tested, 50 + 50 * 49 + 1);
        let full = f.records.last().unwrap();
        assert_eq!(full.candidate, CircleContinuum::FullCircle);
        assert!(full.failing_index.unwrap() > 0);
        let point = f
            .records
            .iter()
            .find(|r| r.candidate == CircleContinuum::point(0.5))
            .unwrap();
        assert_eq!(point.failing_index, Some(0));
        assert!(f.records.iter().any(|r| r.failing_index.unwrap() < 0));
        assert!(f.records.iter().any(|r| r.failing_index.unwrap() > 0));
        let audit = audit_failures(&m, 0.01, 0.1, &f.records, 50, 1e-4, 7).unwrap();
        assert!(audit.all_passed(), "{audit:?}");
    }

    #[test]
    fn candidate_indexing_covers_every_arc() {
        let g = 7;
        let mut seen = std::collections::BTreeSet::new();
        for idx in 0..g + g * (g - 1) + 1 {
            match candidate_at(idx, g) {
                Cand::Arc(i, j) => {
                    assert_ne!(i, j);
                    assert!(seen.insert((i, j)));
                }
                Cand::Point(i) => assert!(i < g),
                Cand::Full => assert_eq!(idx, g * g),
            }
        }
        assert_eq!(seen.len(), g * (g - 1));
    }

    #[test]
    fn exact_strands_shadow_themselves() {
        let m = m1();
        let window = 20;
        let strands: Vec<Vec<f64>> = [0.1, 0.3, 0.8].iter().map(|&x| point_orbit(&m, x, window)).collect();
        let states = (0..2 * window + 1)
            .map(|i| strands.iter().map(|s| s[i]).collect())
            .collect();
        let po = StrandPseudoOrbit {
            window,
            states,
            gap: 1e-9,
        };
        let r = shadow_finite_2f(&m, &po, 0.05, 1e-3).unwrap();
        assert_eq!(r.status, ShadowStatus::Shadowed);
        assert!(r.sup_distance < 1e-6, "{}", r.sup_distance);
    }

    #[test]
    fn random_strands_are_shadowed() {
        let m = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let po = random_strand_pseudo_orbit(&m, 3, 50, 1e-3, &mut rng);
        assert!(po.verify(&m).ok);
        let r = shadow_finite_2f(&m, &po, 0.05, 1e-4).unwrap();
        assert_eq!(r.status, ShadowStatus::Shadowed, "sup {}", r.sup_distance);
        // each shadowing point tracks some strand when iterated with `iterate`
        let w = po.window as i64;
        for z in r.shadow.coords() {
            let best = (0..3)
                .map(|j| {
                    (-w..=w)
                        .map(|i| circle_distance(m.iterate(z, i).unwrap(), po.states[(i + w) as usize][j]))
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 0.05);
        }
    }

    #[test]
    fn basin_jump_is_inconclusive() {
        let m = m1();
        let window = 10;
        let states: Vec<Vec<f64>> = (-(window as i64)..=window as i64)
            .map(|i| {
                vec![if i < 0 {
                    m.iterate(0.35, i).unwrap()
                } else {
                    m.iterate(0.62, i).unwrap()
                }]
            })
            .collect();
        let po = StrandPseudoOrbit {
            window,
            states,
            gap: 0.3,
        };
        assert!(po.verify(&m).ok);
        let r = shadow_finite_2f(&m, &po, 0.01, 1e-3).unwrap();
        assert_eq!(r.status, ShadowStatus::Inconclusive);
    }

    #[test]
    fn unlabelled_states_are_decomposed() {
        let m = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let po = random_strand_pseudo_orbit(&m, 3, 10, 1e-3, &mut rng);
        let sets = po.sets().unwrap();
        let back = decompose_strands(&m, &sets).unwrap();
        assert!(back.verify(&m).ok);
        for (a, b) in back.states.iter().zip(&sets.states) {
            assert_eq!(FiniteSubset::from_coords(a).unwrap(), *b);
        }
    }
}
