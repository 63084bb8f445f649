//! Recurrence structures of the induced maps on the circle: truncated orbit
//! closures (periodic points of `2^f`), homoclinic witnesses, the finite set of
//! fixed continua of `C(f)`, and per-candidate wandering certificates.

use rayon::prelude::*;
use serde::Serialize;

use crate::circle::{circle_distance, CircleContinuum, CirclePoint, MorseSmaleCircleMap, Orientation};
use crate::error::{Error, Result};
use crate::hyperspace::{hausdorff_continua, hausdorff_finite, induced_2f_step, FiniteSubset};

const FIXED_TOL: f64 = 1e-12;

fn periodic_set(m: &MorseSmaleCircleMap) -> FiniteSubset<CirclePoint> {
    FiniteSubset::from_coords(&m.fixed_coords()).expect("at least two fixed points")
}

fn reject_periodic(m: &MorseSmaleCircleMap, x: f64) -> Result<()> {
    if m.fixed_coords().iter().any(|&p| circle_distance(p, x) <= FIXED_TOL) {
        return Err(Error::Precondition(format!("{x} is a periodic point")));
    }
    Ok(())
}

fn step_k(m: &MorseSmaleCircleMap, set: &FiniteSubset<CirclePoint>, k: u32) -> FiniteSubset<CirclePoint> {
    (0..k).fold(set.clone(), |s, _| induced_2f_step(m, &s))
}

/// `{f^(k i)(x) : |i| <= m} ∪ Per(f)`, a truncation of the orbit closure under `f^k`.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitClosureApprox {
    pub base: f64,
    pub stride: u32,
    pub truncation: u32,
    pub points: FiniteSubset<CirclePoint>,
    /// `d_H((2^f)^k(points), points)`.
    pub defect: f64,
}

impl OrbitClosureApprox {
    pub fn step(&self, m: &MorseSmaleCircleMap) -> FiniteSubset<CirclePoint> {
        step_k(m, &self.points, self.stride)
    }
}

pub fn build_orbit_closure(
    m: &MorseSmaleCircleMap,
    x: f64,
    stride: u32,
    truncation: u32,
) -> Result<OrbitClosureApprox> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    reject_periodic(m, x)?;
    let mut pts = m.fixed_coords();
    let (mut fwd, mut bwd) = (CirclePoint::new(x).coord(), CirclePoint::new(x).coord());
    pts.push(fwd);
    for _ in 0..truncation {
        fwd = m.iterate(fwd, stride as i64)?;
        bwd = m.iterate(bwd, -(stride as i64))?;
        pts.push(fwd);
        pts.push(bwd);
    }
    let points = FiniteSubset::from_coords(&pts)?;
    let defect = hausdorff_finite(&step_k(m, &points, stride), &points).value;
    Ok(OrbitClosureApprox {
        base: x,
        stride,
        truncation,
        points,
        defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximantRow {
    pub j: u32,
    /// `d_H(K_j, K)` with `K_j = K ∪ {f^-j(x)}`.
    pub approximant_gap: f64,
    /// `d_H((2^f)^j(K_j), K)`.
    pub return_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomoclinicReport {
    pub base: f64,
    pub window: u32,
    /// `min_{1<=n<=N} d_H(K, (2^f)^n(K))`.
    pub epsilon_star: f64,
    /// Half of `min(min_n d(f^n x, x), d(x, Per f))`; `epsilon_star` must reach it.
    pub epsilon_floor: f64,
    pub non_recurrent: bool,
    /// `(2^f)^n(K) = Per(f) ∪ {f^n(x)}` held for every `n` in the window.
    pub identity_holds: bool,
    pub approximants: Vec<ApproximantRow>,
}

impl HomoclinicReport {
    /// First `j` at which both approximant distances are below `tol`.
    pub fn first_below(&self, tol: f64) -> Option<u32> {
        self.approximants
            .iter()
            .find(|r| r.approximant_gap < tol && r.return_gap < tol)
            .map(|r| r.j)
    }
}

/// `K = Per(f) ∪ {x}` is homoclinic to `Per(f)` under `2^f`, not recurrent, and
/// a limit of sets `K_j` whose `j`-th images return close to `K`.
pub fn homoclinic_witness(m: &MorseSmaleCircleMap, x: f64, window: u32) -> Result<HomoclinicReport> {
    reject_periodic(m, x)?;
    let x = CirclePoint::new(x).coord();
    let fix = periodic_set(m);
    let k = fix.union(&FiniteSubset::from_coords(&[x])?);

    let mut epsilon_star = f64::INFINITY;
    let mut min_move = f64::INFINITY;
    let mut identity_holds = true;
    let mut kn = k.clone();
    let mut xn = x;
    for _ in 1..=window {
        kn = induced_2f_step(m, &kn);
        xn = m.eval(xn);
        let formula = fix.union(&FiniteSubset::from_coords(&[xn])?);
        identity_holds &= kn == formula;
        epsilon_star = epsilon_star.min(hausdorff_finite(&k, &kn).value);
        min_move = min_move.min(circle_distance(xn, x));
    }
    let epsilon_floor = 0.5 * min_move.min(fix.distance_to(&CirclePoint::new(x)));

    let mut approximants = Vec::with_capacity(window as usize);
    let mut back = x;
    for j in 1..=window {
        back = m.inverse(back)?;
        let kj = k.union(&FiniteSubset::from_coords(&[back])?);
        let mut img = kj.clone();
        for _ in 0..j {
            img = induced_2f_step(m, &img);
        }
        approximants.push(ApproximantRow {
            j,
            approximant_gap: hausdorff_finite(&kj, &k).value,
            return_gap: hausdorff_finite(&img, &k).value,
        });
    }
    Ok(HomoclinicReport {
        base: x,
        window,
        epsilon_star,
        epsilon_floor,
        non_recurrent: epsilon_star > 0.0 && epsilon_star >= epsilon_floor,
        identity_holds,
        approximants,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuumKind {
    /// A single periodic point.
    Degenerate,
    /// Both endpoints fixed.
    DArc,
    /// Endpoints `p` and `f(p)` for a point `p` of period two.
    DStarMix,
    /// Endpoints on different periodic orbits.
    DMix,
    FullCircle,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicContinuum {
    pub continuum: CircleContinuum,
    pub kind: ContinuumKind,
    pub period: u32,
}

/// Periodic continua of `C(f)` whose boundary lies in `Per(f)`, plus the circle.
/// For a preserving map these are exactly the fixed points of `C(f)`.
pub fn enumerate_fixed_continua(m: &MorseSmaleCircleMap) -> Result<Vec<PeriodicContinuum>> {
    let fps = m.fixed_points();
    let mut candidates: Vec<(CircleContinuum, ContinuumKind)> = Vec::new();
    for f in &fps {
        candidates.push((CircleContinuum::Point { p: f.point }, ContinuumKind::Degenerate));
    }
    for fi in &fps {
        for fj in &fps {
            if fi.point == fj.point {
                continue;
            }
            let (a, b) = (fi.point.coord(), fj.point.coord());
            let kind = if fi.period == 1 && fj.period == 1 {
                ContinuumKind::DArc
            } else if fi.period == 2 && circle_distance(m.eval(a), b) <= FIXED_TOL {
                ContinuumKind::DStarMix
            } else {
                ContinuumKind::DMix
            };
            candidates.push((CircleContinuum::arc(a, b)?, kind));
        }
    }
    candidates.push((CircleContinuum::FullCircle, ContinuumKind::FullCircle));

    candidates
        .into_iter()
        .map(|(c, kind)| {
            let once = m.continuum_image(&c);
            let period = if once == c {
                1
            } else if m.continuum_image(&once) == c {
                2
            } else {
                return Err(Error::Invariant(format!("{c:?} is not periodic under C(f)")));
            };
            if m.orientation() == Orientation::Preserving && period != 1 {
                return Err(Error::Invariant(format!("{c:?} moved under a preserving map")));
            }
            Ok(PeriodicContinuum {
                continuum: c,
                kind,
                period,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Certified,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusRow {
    pub radius: f64,
    pub neighbors: usize,
    pub min_return: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WanderingReport {
    pub target: CircleContinuum,
    pub status: CertificateStatus,
    /// Largest certified radius: every grid continuum within it of the target
    /// stays farther than it from the target for `1 <= n <= window`.
    pub radius: Option<f64>,
    pub rows: Vec<RadiusRow>,
}

fn is_d_arc(m: &MorseSmaleCircleMap, c: &CircleContinuum) -> bool {
    let per = |x: f64| m.fixed_coords().iter().any(|&p| circle_distance(p, x) <= FIXED_TOL);
    match *c {
        CircleContinuum::Point { p } => per(p.coord()),
        CircleContinuum::Arc { a, b } => per(a.coord()) && per(b.coord()),
        CircleContinuum::FullCircle => true,
    }
}

/// Every continuum with endpoints on the `grid`-spaced lattice: points, arcs and
/// the full circle.
pub fn grid_continua(grid: f64) -> Vec<CircleContinuum> {
    let g = (1.0 / grid).round() as usize;
    let coord = |i: usize| i as f64 / g as f64;
    let mut out = Vec::with_capacity(g * g + 1);
    for i in 0..g {
        out.push(CircleContinuum::point(coord(i)));
    }
    for i in 0..g {
        for j in 0..g {
            if i != j {
                out.push(CircleContinuum::Arc {
                    a: CirclePoint::new(coord(i)),
                    b: CirclePoint::new(coord(j)),
                });
            }
        }
    }
    out.push(CircleContinuum::FullCircle);
    out
}

/// Numerical evidence that `target` is a wandering point of `C(f)`.
pub fn wandering_certificate(
    m: &MorseSmaleCircleMap,
    target: &CircleContinuum,
    epsilon: f64,
    grid: f64,
    window: u32,
) -> Result<WanderingReport> {
    if !(epsilon > 0.0 && grid > 0.0 && grid < 1.0) {
        return Err(Error::InvalidParameter("need epsilon > 0 and 0 < grid < 1".into()));
    }
    if is_d_arc(m, target) {
        return Err(Error::Precondition(format!("{target:?} is a periodic continuum")));
    }
    let near: Vec<(CircleContinuum, f64)> = grid_continua(grid)
        .into_par_iter()
        .filter_map(|c| {
            let d = hausdorff_continua(&c, target).value;
            (d < epsilon).then_some((c, d))
        })
        .collect();
    let returns: Vec<(f64, f64)> = near
        .par_iter()
        .map(|(c, d0)| {
            let mut best = f64::INFINITY;
            let mut cur = *c;
            for _ in 0..window {
                cur = m.continuum_image(&cur);
                best = best.min(hausdorff_continua(&cur, target).value);
            }
            (*d0, best)
        })
        .collect();

    let mut rows = Vec::new();
    let mut radius = epsilon;
    while radius >= grid {
        let inside: Vec<f64> = returns.iter().filter(|(d0, _)| *d0 < radius).map(|r| r.1).collect();
        let min_return = inside.iter().copied().fold(f64::INFINITY, f64::min);
        let certified = !inside.is_empty() && min_return > radius;
        rows.push(RadiusRow {
            radius,
            neighbors: inside.len(),
            min_return,
            certified,
        });
        if certified {
            break;
        }
        radius *= 0.5;
    }
    let found = rows.iter().find(|r| r.certified).map(|r| r.radius);
    Ok(WanderingReport {
        target: *target,
        status: if found.is_some() {
            CertificateStatus::Certified
        } else {
            CertificateStatus::Inconclusive
        },
        radius: found,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1() -> MorseSmaleCircleMap {
        MorseSmaleCircleMap::preserving(1, 0.1).unwrap()
    }

    #[test]
    fn orbit_closure_defect() {
        let m = m1();
        let oc = build_orbit_closure(&m, 0.25, 1, 50).unwrap();
        assert!(oc.defect <= 1e-6, "defect {}", oc.defect);
        assert!(build_orbit_closure(&m, 0.5, 1, 10).is_err());

        let zero = build_orbit_closure(&m, 0.25, 1, 0).unwrap();
        assert_eq!(zero.points.len(), 3);
        // direct evaluation: the image {0, 0.35, 0.5} against {0, 0.25, 0.5}
        let expected = circle_distance(m.eval(0.25), 0.25).min(circle_distance(m.eval(0.25), 0.5));
        assert!((zero.defect - expected).abs() < 1e-15);
    }

    #[test]
    fn orbit_closure_defect_is_monotone() {
        let m = m1();
        let defects: Vec<f64> = (1..=10)
            .map(|t| build_orbit_closure(&m, 0.25, 1, 10 * t).unwrap().defect)
            .collect();
        for w in defects.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{defects:?}");
        }
    }

    #[test]
    fn orbit_closure_is_nearly_periodic() {
        let m = m1();
        let oc = build_orbit_closure(&m, 0.3, 2, 40).unwrap();
        let mut img = oc.points.clone();
        let mut bound = 0.0;
        for j in 1..=5 {
            img = step_k(&m, &img, oc.stride);
            // triangle inequality along the chain, each link stretched by Lip^(k i)
            bound += m.lipschitz().powi((oc.stride * (j - 1)) as i32) * oc.defect;
            assert!(hausdorff_finite(&img, &oc.points).value <= bound + 1e-15);
        }
    }

    #[test]
    fn homoclinic_example() {
        let m = m1();
        let r = homoclinic_witness(&m, 0.25, 200).unwrap();
        assert!(r.identity_holds);
        assert!(r.epsilon_star > 0.01);
        assert!(r.non_recurrent);
        let j = r.first_below(1e-6).expect("approximants converge");
        assert!(j <= 200);
        let row = &r.approximants[49];
        let back = m.iterate(0.25, -50).unwrap();
        assert!((row.approximant_gap - circle_distance(back, 0.0).min(circle_distance(back, 0.25))).abs() < 1e-15);
    }

    #[test]
    fn fixed_continua_counts() {
        let c1 = enumerate_fixed_continua(&m1()).unwrap();
        assert_eq!(c1.len(), 5);
        let m2 = MorseSmaleCircleMap::preserving(2, 0.05).unwrap();
        let c2 = enumerate_fixed_continua(&m2).unwrap();
        assert_eq!(c2.len(), 17);
        for (m, list) in [(m1(), &c1), (m2, &c2)] {
            for c in list {
                assert_eq!(c.period, 1);
                assert_eq!(
                    hausdorff_continua(&m.continuum_image(&c.continuum), &c.continuum).value,
                    0.0
                );
            }
        }
    }

    #[test]
    fn fixed_continua_match_exhaustive_search() {
        // every arc with endpoints in Fix(f), plus points and the circle, kept iff invariant
        let m = MorseSmaleCircleMap::preserving(2, 0.05).unwrap();
        let fix = m.fixed_coords();
        let mut invariant = vec![CircleContinuum::FullCircle];
        for &a in &fix {
            invariant.push(CircleContinuum::point(a));
            for &b in &fix {
                if let Ok(c) = CircleContinuum::arc(a, b) {
                    if m.continuum_image(&c) == c {
                        invariant.push(c);
                    }
                }
            }
        }
        let listed: Vec<CircleContinuum> = enumerate_fixed_continua(&m)
            .unwrap()
            .into_iter()
            .map(|c| c.continuum)
            .collect();
        assert_eq!(invariant.len(), listed.len());
        for c in invariant {
            assert!(listed.contains(&c));
        }
    }

    #[test]
    fn reversing_taxonomy() {
        let m = MorseSmaleCircleMap::new(2, 0.05, Orientation::Reversing).unwrap();
        let all = enumerate_fixed_continua(&m).unwrap();
        assert_eq!(all.len(), 17);
        for c in &all {
            let expected_fixed = match c.kind {
                ContinuumKind::DStarMix | ContinuumKind::FullCircle => true,
                ContinuumKind::Degenerate => {
                    let CircleContinuum::Point { p } = c.continuum else {
                        unreachable!()
                    };
                    m.eval(p.coord()) == p.coord()
                }
                ContinuumKind::DArc | ContinuumKind::DMix => false,
            };
            assert_eq!(c.period == 1, expected_fixed, "{c:?}");
        }
        assert_eq!(all.iter().filter(|c| c.kind == ContinuumKind::DStarMix).count(), 2);
    }

    #[test]
    fn wandering_examples() {
        let m = m1();
        let r = wandering_certificate(&m, &CircleContinuum::arc(0.25, 0.6).unwrap(), 0.05, 1e-3, 100).unwrap();
        assert_eq!(r.status, CertificateStatus::Certified);
        assert!(r.radius.unwrap() >= 0.01);
        let short = wandering_certificate(&m, &CircleContinuum::arc(0.25, 0.26).unwrap(), 0.05, 1e-3, 100).unwrap();
        assert_eq!(short.status, CertificateStatus::Certified);
        assert!(matches!(
            wandering_certificate(&m, &CircleContinuum::arc(0.0, 0.5).unwrap(), 0.05, 1e-3, 100),
            Err(Error::Precondition(_))
        ));
    }
}
