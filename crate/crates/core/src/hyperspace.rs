//! Hausdorff metric on finite subsets and on circle continua, and the induced
//! maps `2^f` and `C(f)`.

use serde::Serialize;
use std::cmp::Ordering;
use std::fmt::Debug;

use crate::circle::{circle_distance, sweep, CircleContinuum, CirclePoint, MorseSmaleCircleMap};
use crate::error::{Error, Result};

pub const DEDUP_TOL: f64 = 1e-12;

/// A point of a metric carrier with a canonical total order.
pub trait MetricPoint: Clone + Debug {
    fn dist(&self, other: &Self) -> f64;
    fn canonical_cmp(&self, other: &Self) -> Ordering;
}

impl MetricPoint for CirclePoint {
    fn dist(&self, other: &Self) -> f64 {
        self.distance(*other)
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.coord().total_cmp(&other.coord())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HausdorffMethod {
    Exact,
    Discretized { eta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HausdorffValue {
    pub value: f64,
    pub method: HausdorffMethod,
}

impl HausdorffValue {
    pub fn exact(value: f64) -> Self {
        HausdorffValue {
            value,
            method: HausdorffMethod::Exact,
        }
    }
}

/// Nonempty finite set, sorted canonically, with no two points within [`DEDUP_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FiniteSubset<P> {
    points: Vec<P>,
}

impl<P: MetricPoint> FiniteSubset<P> {
    pub fn new(mut points: Vec<P>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("finite subsets must be nonempty".into()));
        }
        points.sort_by(|a, b| a.canonical_cmp(b));
        let mut kept: Vec<P> = Vec::with_capacity(points.len());
        for p in points {
            if kept.iter().all(|q| q.dist(&p) > DEDUP_TOL) {
                kept.push(p);
            }
        }
        Ok(FiniteSubset { points: kept })
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance_to(&self, x: &P) -> f64 {
        self.points.iter().map(|p| p.dist(x)).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise image, re-deduplicated.
    pub fn image(&self, f: impl Fn(&P) -> P) -> Self {
        FiniteSubset::new(self.points.iter().map(f).collect()).expect("image of a nonempty set")
    }

    pub fn try_image(&self, f: impl Fn(&P) -> Result<P>) -> Result<Self> {
        FiniteSubset::new(self.points.iter().map(f).collect::<Result<Vec<_>>>()?)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        FiniteSubset::new(pts).expect("union of nonempty sets")
    }
}

impl FiniteSubset<CirclePoint> {
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        FiniteSubset::new(coords.iter().map(|&x| CirclePoint::new(x)).collect())
    }

    pub fn coords(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.coord()).collect()
    }
}

fn directed_finite<P: MetricPoint>(a: &FiniteSubset<P>, b: &FiniteSubset<P>) -> f64 {
    a.points.iter().map(|x| b.distance_to(x)).fold(0.0, f64::max)
}

pub fn hausdorff_finite<P: MetricPoint>(a: &FiniteSubset<P>, b: &FiniteSubset<P>) -> HausdorffValue {
    HausdorffValue::exact(directed_finite(a, b).max(directed_finite(b, a)))
}

/// The point of the complement of `c` farthest from `c`, if the complement is nonempty.
fn farthest_from(c: &CircleContinuum) -> Option<f64> {
    match *c {
        CircleContinuum::Point { p } => Some(p.coord() + 0.5),
        CircleContinuum::Arc { a, b } => {
            let gap = 1.0 - sweep(a.coord(), b.coord());
            Some(b.coord() + 0.5 * gap)
        }
        CircleContinuum::FullCircle => None,
    }
}

/// Exact `sup_{x in from} d(x, to)`: the distance to `to` is zero on `to` and a
/// tent on its complement, so the supremum over `from` is attained at an
/// endpoint of `from` or at the tent peak.
pub fn directed_continua(from: &CircleContinuum, to: &CircleContinuum) -> f64 {
    let Some(peak) = farthest_from(to) else {
        return 0.0;
    };
    let mut best: f64 = 0.0;
    match *from {
        CircleContinuum::Point { p } => best = best.max(to.distance_to(p.coord())),
        CircleContinuum::Arc { a, b } => {
            best = best.max(to.distance_to(a.coord())).max(to.distance_to(b.coord()));
        }
        CircleContinuum::FullCircle => {}
    }
    if from.contains(peak) {
        best = best.max(to.distance_to(peak));
    }
    best.min(0.5)
}

pub fn hausdorff_continua(c1: &CircleContinuum, c2: &CircleContinuum) -> HausdorffValue {
    HausdorffValue::exact(directed_continua(c1, c2).max(directed_continua(c2, c1)))
}

fn nearest_sorted(sorted: &[f64], x: f64) -> f64 {
    let i = sorted.partition_point(|&y| y < x);
    let n = sorted.len();
    [i % n, (i + n - 1) % n]
        .iter()
        .map(|&j| circle_distance(sorted[j], x))
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between `eta`-nets of the two continua, by nearest-point
/// search. Differs from the exact value by at most `2 eta`.
pub fn hausdorff_discretized(c1: &CircleContinuum, c2: &CircleContinuum, eta: f64) -> HausdorffValue {
    let mut s1 = c1.discretize(eta);
    let mut s2 = c2.discretize(eta);
    s1.sort_by(f64::total_cmp);
    s2.sort_by(f64::total_cmp);
    let d12 = s1.iter().map(|&x| nearest_sorted(&s2, x)).fold(0.0, f64::max);
    let d21 = s2.iter().map(|&x| nearest_sorted(&s1, x)).fold(0.0, f64::max);
    HausdorffValue {
        value: d12.max(d21),
        method: HausdorffMethod::Discretized { eta },
    }
}

/// `2^f(A) = f(A)`.
pub fn induced_2f_step(m: &MorseSmaleCircleMap, a: &FiniteSubset<CirclePoint>) -> FiniteSubset<CirclePoint> {
    a.image(|p| m.map_eval(*p))
}

pub fn induced_2f_inverse(m: &MorseSmaleCircleMap, a: &FiniteSubset<CirclePoint>) -> Result<FiniteSubset<CirclePoint>> {
    a.try_image(|p| m.inverse(p.coord()).map(CirclePoint::new))
}

/// `C(f)(C)`.
pub fn induced_cf_step(m: &MorseSmaleCircleMap, c: &CircleContinuum) -> CircleContinuum {
    m.continuum_image(c)
}

/// Sets that know their distance to a point.
pub trait PointDistance<P> {
    fn point_distance(&self, x: &P) -> f64;
}

impl<P: MetricPoint> PointDistance<P> for FiniteSubset<P> {
    fn point_distance(&self, x: &P) -> f64 {
        self.distance_to(x)
    }
}

impl PointDistance<CirclePoint> for CircleContinuum {
    fn point_distance(&self, x: &CirclePoint) -> f64 {
        self.distance_to(x.coord())
    }
}

/// Membership in the open ball `V(A, r)`.
pub fn neighborhood_contains<P, S: PointDistance<P>>(set: &S, r: f64, x: &P) -> Result<bool> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    Ok(set.point_distance(x) < r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fs(c: &[f64]) -> FiniteSubset<CirclePoint> {
        FiniteSubset::from_coords(c).unwrap()
    }

    #[test]
    fn finite_examples() {
        assert_eq!(hausdorff_finite(&fs(&[0.0]), &fs(&[0.5])).value, 0.5);
        assert_eq!(hausdorff_finite(&fs(&[0.1, 0.7]), &fs(&[0.7, 0.1])).value, 0.0);
        assert!((hausdorff_finite(&fs(&[0.0, 0.4]), &fs(&[0.1])).value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn dedup_and_order() {
        let a = fs(&[0.5, 0.25, 0.25 + 1e-13, 1.25]);
        assert_eq!(a.coords(), vec![0.25, 0.5]);
        assert!(FiniteSubset::<CirclePoint>::new(vec![]).is_err());
    }

    #[test]
    fn continuum_examples() {
        for p in [0.0, 0.3, 0.99] {
            let v = hausdorff_continua(&CircleContinuum::FullCircle, &CircleContinuum::point(p));
            assert_eq!(v.value, 0.5);
        }
        let a = CircleContinuum::arc(0.0, 0.5).unwrap();
        assert_eq!(hausdorff_continua(&a, &a).value, 0.0);
        let c1 = CircleContinuum::arc(0.0, 0.6).unwrap();
        let c2 = CircleContinuum::arc(0.1, 0.5).unwrap();
        let exact = hausdorff_continua(&c1, &c2).value;
        assert!((exact - 0.1).abs() < 1e-15);
        assert!((exact - hausdorff_discretized(&c1, &c2, 1e-4).value).abs() <= 2e-4);
    }

    #[test]
    fn induced_steps() {
        let m = MorseSmaleCircleMap::preserving(1, 0.1).unwrap();
        let fix = fs(&m.fixed_coords());
        assert_eq!(induced_2f_step(&m, &fix), fix);
        let one = induced_2f_step(&m, &fs(&[0.25]));
        assert!((one.coords()[0] - 0.35).abs() < 1e-15);
        let mut a = fs(&[0.25, 0.75]);
        let two = induced_2f_step(&m, &a);
        assert!((two.coords()[0] - 0.35).abs() < 1e-15 && (two.coords()[1] - 0.65).abs() < 1e-15);
        for _ in 0..200 {
            a = induced_2f_step(&m, &a);
        }
        assert!(hausdorff_finite(&a, &fs(&[0.5])).value < 1e-6);

        let mut c = CircleContinuum::arc(0.25, 0.75).unwrap();
        for _ in 0..200 {
            c = induced_cf_step(&m, &c);
        }
        assert!(hausdorff_continua(&c, &CircleContinuum::point(0.5)).value < 1e-6);
        assert_eq!(
            induced_cf_step(&m, &CircleContinuum::point(0.5)),
            CircleContinuum::point(0.5)
        );
    }

    #[test]
    fn neighborhoods() {
        let a = fs(&[0.0]);
        assert!(neighborhood_contains(&a, 0.01, &CirclePoint::new(0.0)).unwrap());
        assert!(!neighborhood_contains(&a, 0.1, &CirclePoint::new(0.2)).unwrap());
        let arc = CircleContinuum::arc(0.0, 0.5).unwrap();
        assert!(neighborhood_contains(&arc, 0.05, &CirclePoint::new(0.53)).unwrap());
        assert!(neighborhood_contains(&arc, 0.0, &CirclePoint::new(0.53)).is_err());
    }

    fn arb_continuum() -> impl Strategy<Value = CircleContinuum> {
        prop_oneof![
            1 => (0.0f64..1.0).prop_map(CircleContinuum::point),
            6 => (0.0f64..1.0, 0.001f64..0.999).prop_map(|(a, l)| CircleContinuum::arc(a, a + l).unwrap()),
            1 => Just(CircleContinuum::FullCircle),
        ]
    }

    proptest! {
        #[test]
        fn exact_matches_sampling(c1 in arb_continuum(), c2 in arb_continuum()) {
            let exact = hausdorff_continua(&c1, &c2).value;
            let eta = 1e-3;
            prop_assert!((exact - hausdorff_discretized(&c1, &c2, eta).value).abs() <= 2.0 * eta);
        }

        #[test]
        fn continua_metric_axioms(a in arb_continuum(), b in arb_continuum(), c in arb_continuum()) {
            let ab = hausdorff_continua(&a, &b).value;
            prop_assert_eq!(ab, hausdorff_continua(&b, &a).value);
            prop_assert!(ab <= hausdorff_continua(&a, &c).value + hausdorff_continua(&c, &b).value + 1e-12);
            prop_assert_eq!(hausdorff_continua(&a, &a).value, 0.0);
            if a != b { prop_assert!(ab > 0.0); }
        }

        #[test]
        fn induced_map_lipschitz(xs in prop::collection::vec(0.0f64..1.0, 1..6), ys in prop::collection::vec(0.0f64..1.0, 1..6)) {
            let m = MorseSmaleCircleMap::preserving(1, 0.1).unwrap();
            let (a, b) = (fs(&xs), fs(&ys));
            let before = hausdorff_finite(&a, &b).value;
            let after = hausdorff_finite(&induced_2f_step(&m, &a), &induced_2f_step(&m, &b)).value;
            prop_assert!(after <= m.lipschitz() * before + 1e-12);
        }

        #[test]
        fn cf_semigroup(a in 0.0f64..1.0, l in 0.01f64..0.99, n in 0i64..30) {
            let m = MorseSmaleCircleMap::preserving(2, 0.05).unwrap();
            let c = CircleContinuum::arc(a, a + l).unwrap();
            let it = m.continuum_iterate(&c, n).unwrap();
            let (fa, fb) = (m.iterate(a, n).unwrap(), m.iterate(a + l, n).unwrap());
            match it {
                CircleContinuum::Arc { a: ia, b: ib } => {
                    prop_assert_eq!(ia.coord(), fa);
                    prop_assert_eq!(ib.coord(), fb);
                }
                CircleContinuum::Point { p } => prop_assert!(fa == fb && p.coord() == fa),
                CircleContinuum::FullCircle => prop_assert_eq!(fa, fb),
            }
        }
    }
}
