//! The circle `R/Z`, its subcontinua, and a parametric family of Morse-Smale
//! circle diffeomorphisms `x + A sin(2 pi k x)` with a known hyperbolic
//! fixed-point structure.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

pub const DEFAULT_INVERSE_TOL: f64 = 1e-12;
pub const INVERSE_MAX_ITER: usize = 200;

fn normalize(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of the circle, stored as its coordinate in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(x: f64) -> Self {
        CirclePoint(normalize(x))
    }

    pub fn coord(self) -> f64 {
        self.0
    }

    pub fn distance(self, other: CirclePoint) -> f64 {
        circle_distance(self.0, other.0)
    }
}

impl From<f64> for CirclePoint {
    fn from(x: f64) -> Self {
        CirclePoint::new(x)
    }
}

impl From<CirclePoint> for f64 {
    fn from(p: CirclePoint) -> f64 {
        p.0
    }
}

/// Arc-length distance on a circle of length one.
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (normalize(x) - normalize(y)).abs();
    d.min(1.0 - d)
}

/// Length of the sweep from `a` to `b` in the increasing direction, in `[0, 1)`.
pub fn sweep(a: f64, b: f64) -> f64 {
    normalize(b - a)
}

/// A nonempty subcontinuum of the circle. `Arc { a, b }` is the closed sweep
/// from `a` to `b` in the increasing direction and never has `a == b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", try_from = "ContinuumRepr")]
pub enum CircleContinuum {
    Point { p: CirclePoint },
    Arc { a: CirclePoint, b: CirclePoint },
    FullCircle,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ContinuumRepr {
    Point { p: f64 },
    Arc { a: f64, b: f64 },
    FullCircle,
}

impl TryFrom<ContinuumRepr> for CircleContinuum {
    type Error = Error;

    fn try_from(r: ContinuumRepr) -> Result<Self> {
        match r {
            ContinuumRepr::Point { p } => Ok(CircleContinuum::point(p)),
            ContinuumRepr::Arc { a, b } => CircleContinuum::arc(a, b),
            ContinuumRepr::FullCircle => Ok(CircleContinuum::FullCircle),
        }
    }
}

impl CircleContinuum {
    pub fn point(p: f64) -> Self {
        CircleContinuum::Point { p: CirclePoint::new(p) }
    }

    pub fn arc(a: f64, b: f64) -> Result<Self> {
        let (a, b) = (CirclePoint::new(a), CirclePoint::new(b));
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "arc endpoints coincide at {}; use a point or the full circle",
                a.coord()
            )));
        }
        Ok(CircleContinuum::Arc { a, b })
    }

    /// Builds an arc from mapped endpoints. When rounding merges the endpoints
    /// the result is a point or the full circle, whichever the preimage length
    /// points to.
    pub(crate) fn arc_from_image(a: f64, b: f64, preimage_len: f64) -> Self {
        let (a, b) = (CirclePoint::new(a), CirclePoint::new(b));
        if a != b {
            CircleContinuum::Arc { a, b }
        } else if preimage_len > 0.5 {
            CircleContinuum::FullCircle
        } else {
            CircleContinuum::Point { p: a }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            CircleContinuum::Point { p } => normalize(x) == p.coord(),
            CircleContinuum::Arc { a, b } => sweep(a.coord(), x) <= sweep(a.coord(), b.coord()),
            CircleContinuum::FullCircle => true,
        }
    }

    /// Arc length of the continuum (zero for a point, one for the circle).
    pub fn length(&self) -> f64 {
        match *self {
            CircleContinuum::Point { .. } => 0.0,
            CircleContinuum::Arc { a, b } => sweep(a.coord(), b.coord()),
            CircleContinuum::FullCircle => 1.0,
        }
    }

    /// Distance from `x` to the nearest point of the continuum.
    pub fn distance_to(&self, x: f64) -> f64 {
        match *self {
            CircleContinuum::Point { p } => circle_distance(p.coord(), x),
            CircleContinuum::Arc { a, b } => {
                if self.contains(x) {
                    0.0
                } else {
                    circle_distance(a.coord(), x).min(circle_distance(b.coord(), x))
                }
            }
            CircleContinuum::FullCircle => 0.0,
        }
    }

    /// Points spaced at most `step` apart covering the continuum, endpoints included.
    pub fn discretize(&self, step: f64) -> Vec<f64> {
        match *self {
            CircleContinuum::Point { p } => vec![p.coord()],
            CircleContinuum::Arc { a, .. } => {
                let len = self.length();
                let n = (len / step).ceil().max(1.0) as usize;
                (0..=n)
                    .map(|i| normalize(a.coord() + len * i as f64 / n as f64))
                    .collect()
            }
            CircleContinuum::FullCircle => {
                let n = (1.0 / step).ceil().max(1.0) as usize;
                (0..n).map(|i| i as f64 / n as f64).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Preserving,
    Reversing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Attractor,
    Repeller,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub point: CirclePoint,
    pub stability: Stability,
    /// 1 for fixed points of the map, 2 for points of a two-cycle.
    pub period: u32,
}

/// `sin(2 pi t)`, exact at multiples of a quarter turn.
fn sin_turns(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r == 0.0 || r == 0.5 || r >= 1.0 {
        0.0
    } else if r == 0.25 {
        1.0
    } else if r == 0.75 {
        -1.0
    } else {
        (TAU * r).sin()
    }
}

/// `x + A sin(2 pi k x) mod 1`, optionally followed by `x -> -x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircleMapParams", into = "CircleMapParams")]
pub struct MorseSmaleCircleMap {
    pairs: u32,
    amplitude: f64,
    orientation: Orientation,
}

/// Config form: `{"kind":"circle_ms","k":1,"amplitude":0.1,"orientation":"preserving"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleMapParams {
    pub kind: String,
    pub k: u32,
    pub amplitude: f64,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
}

fn default_orientation() -> Orientation {
    Orientation::Preserving
}

impl TryFrom<CircleMapParams> for MorseSmaleCircleMap {
    type Error = Error;

    fn try_from(s: CircleMapParams) -> Result<Self> {
        if s.kind != "circle_ms" {
            return Err(Error::InvalidParameter(format!("unknown map kind {:?}", s.kind)));
        }
        MorseSmaleCircleMap::new(s.k, s.amplitude, s.orientation)
    }
}

impl From<MorseSmaleCircleMap> for CircleMapParams {
    fn from(m: MorseSmaleCircleMap) -> Self {
        CircleMapParams {
            kind: "circle_ms".into(),
            k: m.pairs,
            amplitude: m.amplitude,
            orientation: m.orientation,
        }
    }
}

impl MorseSmaleCircleMap {
    pub fn new(pairs: u32, amplitude: f64, orientation: Orientation) -> Result<Self> {
        if pairs == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        let strength = TAU * pairs as f64 * amplitude;
        if !(strength > 0.0 && strength < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < 2 pi k A < 1, got {strength}"
            )));
        }
        Ok(MorseSmaleCircleMap {
            pairs,
            amplitude,
            orientation,
        })
    }

    pub fn preserving(pairs: u32, amplitude: f64) -> Result<Self> {
        Self::new(pairs, amplitude, Orientation::Preserving)
    }

    pub fn pairs(&self) -> u32 {
        self.pairs
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Upper bound on the Lipschitz constant, `1 + 2 pi k A`.
    pub fn lipschitz(&self) -> f64 {
        1.0 + TAU * self.pairs as f64 * self.amplitude
    }

    fn lift(&self, x: f64) -> f64 {
        x + self.amplitude * sin_turns(self.pairs as f64 * x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = self.lift(normalize(x));
        match self.orientation {
            Orientation::Preserving => normalize(y),
            Orientation::Reversing => normalize(-y),
        }
    }

    pub fn map_eval(&self, x: CirclePoint) -> CirclePoint {
        CirclePoint(self.eval(x.coord()))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.pairs as f64;
        let d = 1.0 + TAU * k * self.amplitude * (TAU * k * x).cos();
        match self.orientation {
            Orientation::Preserving => d,
            Orientation::Reversing => -d,
        }
    }

    /// Inverse by bisection on the strictly increasing lift.
    pub fn inverse_tol(&self, y: f64, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let y = normalize(y);
        if self.eval(y) == y {
            return Ok(y);
        }
        let target = match self.orientation {
            Orientation::Preserving => y,
            Orientation::Reversing => normalize(-y),
        };
        let (mut lo, mut hi) = (target - self.amplitude, target + self.amplitude);
        for _ in 0..INVERSE_MAX_ITER {
            if hi - lo <= tol {
                let best = [lo, 0.5 * (lo + hi), hi]
                    .into_iter()
                    .min_by(|u, v| {
                        let du = circle_distance(self.eval(*u), y);
                        let dv = circle_distance(self.eval(*v), y);
                        du.total_cmp(&dv)
                    })
                    .unwrap_or(lo);
                return Ok(normalize(best));
            }
            let mid = 0.5 * (lo + hi);
            if self.lift(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NoConvergence {
            target: y,
            iterations: INVERSE_MAX_ITER,
        })
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.inverse_tol(y, DEFAULT_INVERSE_TOL)
    }

    pub fn map_inverse(&self, y: CirclePoint, tol: f64) -> Result<CirclePoint> {
        self.inverse_tol(y.coord(), tol).map(CirclePoint)
    }

    /// `f^n(x)`; negative `n` iterates the inverse.
    pub fn iterate(&self, x: f64, n: i64) -> Result<f64> {
        let mut x = normalize(x);
        if n >= 0 {
            for _ in 0..n {
                x = self.eval(x);
            }
        } else {
            for _ in 0..n.unsigned_abs() {
                x = self.inverse(x)?;
            }
        }
        Ok(x)
    }

    pub fn iterate_point(&self, x: CirclePoint, n: i64) -> Result<CirclePoint> {
        self.iterate(x.coord(), n).map(CirclePoint)
    }

    /// Fixed points sorted by coordinate. For a reversing map these are the
    /// fixed points of `f^2`, tagged with their period under `f`.
    pub fn fixed_points(&self) -> Vec<FixedPoint> {
        let m = 2 * self.pairs;
        (0..m)
            .map(|j| {
                let x = j as f64 / m as f64;
                let stability = if j % 2 == 0 {
                    Stability::Repeller
                } else {
                    Stability::Attractor
                };
                let period = match self.orientation {
                    Orientation::Preserving => 1,
                    Orientation::Reversing if j == 0 || j == self.pairs => 1,
                    Orientation::Reversing => 2,
                };
                FixedPoint {
                    point: CirclePoint(x),
                    stability,
                    period,
                }
            })
            .collect()
    }

    pub fn fixed_coords(&self) -> Vec<f64> {
        self.fixed_points().iter().map(|f| f.point.coord()).collect()
    }

    pub fn is_fixed(&self, x: f64, tol: f64) -> bool {
        self.fixed_points()
            .iter()
            .any(|f| f.period == 1 && circle_distance(f.point.coord(), x) <= tol)
    }

    pub fn continuum_image(&self, c: &CircleContinuum) -> CircleContinuum {
        match *c {
            CircleContinuum::Point { p } => CircleContinuum::Point { p: self.map_eval(p) },
            CircleContinuum::FullCircle => CircleContinuum::FullCircle,
            CircleContinuum::Arc { a, b } => {
                let (fa, fb) = (self.eval(a.coord()), self.eval(b.coord()));
                let len = c.length();
                match self.orientation {
                    Orientation::Preserving => CircleContinuum::arc_from_image(fa, fb, len),
                    Orientation::Reversing => CircleContinuum::arc_from_image(fb, fa, len),
                }
            }
        }
    }

    pub fn continuum_preimage(&self, c: &CircleContinuum) -> Result<CircleContinuum> {
        Ok(match *c {
            CircleContinuum::Point { p } => CircleContinuum::point(self.inverse(p.coord())?),
            CircleContinuum::FullCircle => CircleContinuum::FullCircle,
            CircleContinuum::Arc { a, b } => {
                let (ga, gb) = (self.inverse(a.coord())?, self.inverse(b.coord())?);
                let len = c.length();
                match self.orientation {
                    Orientation::Preserving => CircleContinuum::arc_from_image(ga, gb, len),
                    Orientation::Reversing => CircleContinuum::arc_from_image(gb, ga, len),
                }
            }
        })
    }

    /// `C(f)^n(c)`; negative `n` uses the inverse.
    pub fn continuum_iterate(&self, c: &CircleContinuum, n: i64) -> Result<CircleContinuum> {
        let mut c = *c;
        if n >= 0 {
            for _ in 0..n {
                c = self.continuum_image(&c);
            }
        } else {
            for _ in 0..n.unsigned_abs() {
                c = self.continuum_preimage(&c)?;
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m1() -> MorseSmaleCircleMap {
        MorseSmaleCircleMap::preserving(1, 0.1).unwrap()
    }

    #[test]
    fn worked_values() {
        let m = m1();
        assert_eq!(m.eval(0.0), 0.0);
        assert_eq!(m.eval(0.5), 0.5);
        assert!((m.eval(0.25) - 0.35).abs() < 1e-15);
        assert!((m.inverse(0.35).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(m.inverse(0.0).unwrap(), 0.0);
        assert_eq!(m.inverse(0.5).unwrap(), 0.5);
    }

    #[test]
    fn rejects_non_diffeomorphic_amplitude() {
        assert!(MorseSmaleCircleMap::preserving(1, 0.2).is_err());
        assert!(MorseSmaleCircleMap::preserving(0, 0.1).is_err());
        assert!(MorseSmaleCircleMap::preserving(1, -0.1).is_err());
    }

    #[test]
    fn fixed_points_alternate() {
        let m = m1();
        let fp = m.fixed_points();
        assert_eq!(fp.len(), 2);
        assert_eq!((fp[0].point.coord(), fp[0].stability), (0.0, Stability::Repeller));
        assert_eq!((fp[1].point.coord(), fp[1].stability), (0.5, Stability::Attractor));

        let m2 = MorseSmaleCircleMap::preserving(2, 0.05).unwrap();
        let fp2 = m2.fixed_points();
        let coords: Vec<f64> = fp2.iter().map(|f| f.point.coord()).collect();
        assert_eq!(coords, vec![0.0, 0.25, 0.5, 0.75]);
        for w in fp2.windows(2) {
            assert_ne!(w[0].stability, w[1].stability);
        }
        for f in &fp2 {
            assert_eq!(m2.eval(f.point.coord()), f.point.coord());
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let m = m1();
        let h = 1e-6;
        let fd = (m.lift(h) - m.lift(-h)) / (2.0 * h);
        assert!((fd - m.derivative(0.0)).abs() < 1e-6);
        assert!((m.derivative(0.0) - (1.0 + 0.2 * std::f64::consts::PI)).abs() < 1e-15);
        for f in m.fixed_points() {
            let d = m.derivative(f.point.coord());
            match f.stability {
                Stability::Attractor => assert!(d.abs() < 1.0),
                Stability::Repeller => assert!(d.abs() > 1.0),
            }
        }
    }

    #[test]
    fn long_iterates_reach_fixed_points() {
        let m = m1();
        assert_eq!(m.iterate(0.25, 0).unwrap(), 0.25);
        assert!(circle_distance(m.iterate(0.25, 200).unwrap(), 0.5) < 1e-9);
        assert!(circle_distance(m.iterate(0.25, -200).unwrap(), 0.0) < 1e-9);
    }

    #[test]
    fn arc_images() {
        let m = m1();
        assert_eq!(
            m.continuum_image(&CircleContinuum::FullCircle),
            CircleContinuum::FullCircle
        );
        let img = m.continuum_image(&CircleContinuum::arc(0.25, 0.75).unwrap());
        match img {
            CircleContinuum::Arc { a, b } => {
                assert!((a.coord() - 0.35).abs() < 1e-15);
                assert!((b.coord() - 0.65).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversing_image_matches_pointwise_image() {
        let m = MorseSmaleCircleMap::new(1, 0.1, Orientation::Reversing).unwrap();
        let arc = CircleContinuum::arc(0.1, 0.3).unwrap();
        let img = m.continuum_image(&arc);
        // every mapped sample lies in the image, and every image point is near a mapped sample
        let mapped: Vec<f64> = arc.discretize(1.0 / 200.0).iter().map(|&x| m.eval(x)).collect();
        for &y in &mapped {
            assert!(img.distance_to(y) <= 1e-12);
        }
        for y in img.discretize(1e-4) {
            let d = mapped
                .iter()
                .map(|&z| circle_distance(y, z))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= m.lipschitz() / 200.0 + 1e-6);
        }
        if let CircleContinuum::Arc { a, b } = img {
            assert!((a.coord() - m.eval(0.3)).abs() < 1e-15);
            assert!((b.coord() - m.eval(0.1)).abs() < 1e-15);
        }
    }

    #[test]
    fn reversing_fixed_point_periods() {
        let m = MorseSmaleCircleMap::new(2, 0.05, Orientation::Reversing).unwrap();
        let fp = m.fixed_points();
        for f in &fp {
            let x = f.point.coord();
            let once = m.eval(x);
            let twice = m.eval(once);
            assert!(circle_distance(twice, x) < 1e-15);
            assert_eq!(f.period == 1, circle_distance(once, x) < 1e-15);
        }
        assert_eq!(fp.iter().filter(|f| f.period == 1).count(), 2);
    }

    #[test]
    fn degenerate_arc_rejected() {
        assert!(CircleContinuum::arc(0.3, 0.3).is_err());
        assert!(CircleContinuum::arc(0.25, 1.25).is_err());
    }

    #[test]
    fn continuum_json_shape() {
        let c = CircleContinuum::arc(0.25, 0.5).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"type":"arc","a":0.25,"b":0.5}"#);
        let back: CircleContinuum = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<CircleContinuum>(r#"{"type":"arc","a":0.2,"b":0.2}"#).is_err());
        let text = r#"{"kind":"circle_ms","k":2,"amplitude":0.05,"orientation":"reversing"}"#;
        let m: MorseSmaleCircleMap = serde_json::from_str(text).unwrap();
        assert_eq!(m.orientation(), Orientation::Reversing);
        assert!(serde_json::from_str::<MorseSmaleCircleMap>(r#"{"kind":"circle_ms","k":1,"amplitude":0.5}"#).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trip(x in 0.0f64..1.0, k in 1u32..4, frac in 0.05f64..0.95, rev in any::<bool>()) {
            let amp = frac / (TAU * k as f64);
            let o = if rev { Orientation::Reversing } else { Orientation::Preserving };
            let m = MorseSmaleCircleMap::new(k, amp, o).unwrap();
            let back = m.inverse(m.eval(x)).unwrap();
            prop_assert!(circle_distance(back, x) <= 2.0 * DEFAULT_INVERSE_TOL);
        }

        #[test]
        fn iterate_composes(x in 0.0f64..1.0, n in 0i64..12, j in 0i64..12) {
            let m = m1();
            let forward = m.iterate(x, n + j).unwrap();
            prop_assert_eq!(forward, m.iterate(m.iterate(x, n).unwrap(), j).unwrap());
            // undoing j of the n + j forward steps; each inverse step errs by at most
            // 2 tol, amplified by at most 1 / min f' per later backward step
            let back = m.iterate(forward, -j).unwrap();
            let amp = (1.0f64 / (1.0 - 0.2 * std::f64::consts::PI)).powi(j as i32);
            let slack = 2.0 * DEFAULT_INVERSE_TOL * j as f64 * amp + 1e-15;
            prop_assert!(circle_distance(back, m.iterate(x, n).unwrap()) <= slack);
        }

        #[test]
        fn image_tracks_net(a in 0.0f64..1.0, len in 0.01f64..0.99) {
            let m = m1();
            let arc = CircleContinuum::arc(a, a + len).unwrap();
            let img = m.continuum_image(&arc);
            let eta = 1e-3;
            for x in arc.discretize(eta) {
                prop_assert!(img.distance_to(m.eval(x)) <= 1e-12);
            }
            let mapped: Vec<f64> = arc.discretize(eta).iter().map(|&x| m.eval(x)).collect();
            for y in img.discretize(eta / 4.0) {
                let d = mapped.iter().map(|&z| circle_distance(y, z)).fold(f64::INFINITY, f64::min);
                prop_assert!(d <= m.lipschitz() * eta);
            }
        }
    }
}
