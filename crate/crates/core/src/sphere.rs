//! The North-South map `z -> z/2` of the Riemann sphere with the chordal
//! metric: periodic and homoclinic continua, the conjugacy of an invariant
//! comb onto the dendrite model, and a sweep showing that a spliced
//! pseudo-orbit of great circles is not shadowed.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dendrite::DendritePoint;
use crate::error::{Error, Result};
use crate::shadowing::{FalsificationReport, GapCheck, Verdict, FAILURE_SLACK};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpherePoint {
    Finite { u: f64, v: f64 },
    Infinity,
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

const NORTH: V3 = [0.0, 0.0, 1.0];

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint::Finite { u: 0.0, v: 0.0 };

    pub fn finite(u: f64, v: f64) -> Self {
        SpherePoint::Finite { u, v }
    }

    /// Stereographic image on the unit sphere; chordal distance is the
    /// Euclidean distance of these images.
    pub fn lift(&self) -> V3 {
        match *self {
            SpherePoint::Infinity => NORTH,
            SpherePoint::Finite { u, v } => {
                let r2 = u * u + v * v;
                if !r2.is_finite() {
                    return NORTH;
                }
                let d = 1.0 + r2;
                [2.0 * u / d, 2.0 * v / d, (r2 - 1.0) / d]
            }
        }
    }

    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        match (*self, *other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
            (SpherePoint::Finite { u, v }, SpherePoint::Infinity)
            | (SpherePoint::Infinity, SpherePoint::Finite { u, v }) => 2.0 / (1.0 + u * u + v * v).sqrt(),
            (SpherePoint::Finite { u: a, v: b }, SpherePoint::Finite { u: c, v: d }) => {
                2.0 * (a - c).hypot(b - d) / ((1.0 + a * a + b * b) * (1.0 + c * c + d * d)).sqrt()
            }
        }
    }
}

/// `z/2` forward, `2z` backward; both poles are fixed.
pub fn ns_map(z: SpherePoint, direction: i64) -> SpherePoint {
    match z {
        SpherePoint::Infinity => z,
        SpherePoint::Finite { u, v } => {
            let s = 0.5f64.powi(direction as i32);
            SpherePoint::Finite { u: u * s, v: v * s }
        }
    }
}

/// A piece of a continuum in plane coordinates. Segments are straight in the
/// plane; a ray runs from a finite point to infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Piece {
    Point { at: SpherePoint },
    Segment { a: (f64, f64), b: (f64, f64) },
    Ray { from: (f64, f64), dir: (f64, f64) },
}

impl Piece {
    /// The map applied `steps` times; exact, since it scales by a power of two.
    pub fn map(&self, steps: i64) -> Piece {
        let s = 0.5f64.powi(steps as i32);
        match *self {
            Piece::Point { at } => Piece::Point { at: ns_map(at, steps) },
            Piece::Segment { a, b } => Piece::Segment {
                a: (a.0 * s, a.1 * s),
                b: (b.0 * s, b.1 * s),
            },
            Piece::Ray { from, dir } => Piece::Ray {
                from: (from.0 * s, from.1 * s),
                dir,
            },
        }
    }

    fn lift(&self) -> Lifted {
        let p = |z: (f64, f64)| SpherePoint::finite(z.0, z.1).lift();
        match *self {
            Piece::Point { at } => Lifted::Point(at.lift()),
            Piece::Segment { a, b } => Lifted::arc(p(a), p(((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)), p(b)),
            Piece::Ray { from, dir } => {
                let s = from.0.hypot(from.1).max(1.0) / dir.0.hypot(dir.1);
                Lifted::arc(p(from), p((from.0 + s * dir.0, from.1 + s * dir.1)), NORTH)
            }
        }
    }

    fn contains_zero(&self) -> bool {
        match *self {
            Piece::Point { at } => at == SpherePoint::ZERO,
            Piece::Segment { a, b } => {
                let c = a.0 * b.1 - a.1 * b.0;
                c == 0.0 && a.0 * b.0 + a.1 * b.1 <= 0.0
            }
            Piece::Ray { from, dir } => {
                let c = from.0 * dir.1 - from.1 * dir.0;
                c == 0.0 && from.0 * dir.0 + from.1 * dir.1 <= 0.0
            }
        }
    }

    fn contains_infinity(&self) -> bool {
        matches!(
            self,
            Piece::Ray { .. }
                | Piece::Point {
                    at: SpherePoint::Infinity
                }
        )
    }

    /// Largest `|sin arg z|` over the piece, for pieces that avoid 0.
    fn max_abs_sin_arg(&self) -> f64 {
        let sweep = |a: f64, b: f64| {
            // directions swept monotonically from a to b along the short way
            let mut d = (b - a).rem_euclid(TAU);
            let start = if d > PI {
                d = TAU - d;
                b
            } else {
                a
            };
            let mut m = a.sin().abs().max(b.sin().abs());
            for peak in [PI / 2.0, 3.0 * PI / 2.0] {
                if (peak - start).rem_euclid(TAU) <= d {
                    m = 1.0;
                }
            }
            m
        };
        match *self {
            Piece::Point {
                at: SpherePoint::Finite { u, v },
            } => v.atan2(u).sin().abs(),
            Piece::Point { .. } => 0.0,
            Piece::Segment { a, b } => sweep(a.1.atan2(a.0), b.1.atan2(b.0)),
            Piece::Ray { from, dir } => sweep(from.1.atan2(from.0), dir.1.atan2(dir.0)),
        }
    }
}

/// A piece lifted to the unit sphere: a circular arc, a short chord, or a point.
#[derive(Clone, Copy, Debug)]
enum Lifted {
    Point(V3),
    Chord(V3, V3),
    Arc {
        centre: V3,
        radius: f64,
        e1: V3,
        e2: V3,
        span: f64,
    },
}

/// Arcs shorter than this are treated as straight chords.
const CHORD_LIMIT: f64 = 1e-7;

impl Lifted {
    /// The arc from `s` through `m` to `e`.
    fn arc(s: V3, m: V3, e: V3) -> Lifted {
        if norm(sub(s, e)) < CHORD_LIMIT {
            return if norm(sub(s, e)) == 0.0 {
                Lifted::Point(s)
            } else {
                Lifted::Chord(s, e)
            };
        }
        let (a, b) = (sub(s, e), sub(m, e));
        let axb = cross(a, b);
        let den = 2.0 * dot(axb, axb);
        if den < 1e-30 {
            return Lifted::Chord(s, e);
        }
        let centre = add(
            e,
            scale(cross(sub(scale(b, dot(a, a)), scale(a, dot(b, b))), axb), 1.0 / den),
        );
        let radius = norm(sub(s, centre));
        let n = scale(axb, 1.0 / axb.iter().map(|x| x * x).sum::<f64>().sqrt());
        let e1 = scale(sub(s, centre), 1.0 / radius);
        let mut e2 = cross(n, e1);
        let angle = |p: V3, e2: V3| {
            let w = sub(p, centre);
            dot(w, e2).atan2(dot(w, e1)).rem_euclid(TAU)
        };
        if angle(m, e2) > angle(e, e2) {
            e2 = scale(e2, -1.0);
        }
        let span = angle(e, e2);
        Lifted::Arc {
            centre,
            radius,
            e1,
            e2,
            span,
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Lifted::Point(_) => 0.0,
            Lifted::Chord(a, b) => norm(sub(a, b)),
            Lifted::Arc { radius, span, .. } => radius * span,
        }
    }

    fn distance(&self, x: V3) -> f64 {
        match *self {
            Lifted::Point(p) => norm(sub(x, p)),
            Lifted::Chord(a, b) => {
                let d = sub(b, a);
                let t = (dot(sub(x, a), d) / dot(d, d)).clamp(0.0, 1.0);
                norm(sub(x, add(a, scale(d, t))))
            }
            Lifted::Arc {
                centre,
                radius,
                e1,
                e2,
                span,
            } => {
                let w = sub(x, centre);
                let (c1, c2) = (dot(w, e1), dot(w, e2));
                let ends = || {
                    let end = add(centre, scale(add(scale(e1, span.cos()), scale(e2, span.sin())), radius));
                    norm(sub(x, add(centre, scale(e1, radius)))).min(norm(sub(x, end)))
                };
                if c1.hypot(c2) < 1e-15 {
                    return ends();
                }
                if c2.atan2(c1).rem_euclid(TAU) <= span {
                    let n = cross(e1, e2);
                    let h = dot(w, n);
                    (c1.hypot(c2) - radius).hypot(h)
                } else {
                    ends()
                }
            }
        }
    }

    /// Points along the piece at spacing at most `eta`, with that spacing.
    fn samples(&self, eta: f64) -> (Vec<V3>, f64) {
        let k = (self.length() / eta).ceil().max(1.0) as usize;
        let pts = (0..=k)
            .map(|i| {
                let s = i as f64 / k as f64;
                match *self {
                    Lifted::Point(p) => p,
                    Lifted::Chord(a, b) => add(a, scale(sub(b, a), s)),
                    Lifted::Arc {
                        centre,
                        radius,
                        e1,
                        e2,
                        span,
                    } => {
                        let phi = s * span;
                        add(centre, scale(add(scale(e1, phi.cos()), scale(e2, phi.sin())), radius))
                    }
                }
            })
            .collect();
        (pts, self.length() / k as f64)
    }
}

/// A union of pieces, connected by construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereContinuum {
    pub pieces: Vec<Piece>,
}

impl SphereContinuum {
    pub fn point(z: SpherePoint) -> Self {
        SphereContinuum {
            pieces: vec![Piece::Point { at: z }],
        }
    }

    pub fn polyline(vertices: &[(f64, f64)]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Geometry("empty polyline".into()));
        }
        if vertices.len() == 1 {
            return Ok(Self::point(SpherePoint::finite(vertices[0].0, vertices[0].1)));
        }
        Ok(SphereContinuum {
            pieces: vertices
                .windows(2)
                .map(|w| Piece::Segment { a: w[0], b: w[1] })
                .collect(),
        })
    }

    /// The line through 0 at the given angle, closed up at infinity.
    pub fn line_through_zero(angle: f64) -> Self {
        let d = (angle.cos(), angle.sin());
        SphereContinuum {
            pieces: vec![
                Piece::Ray {
                    from: (0.0, 0.0),
                    dir: d,
                },
                Piece::Ray {
                    from: (0.0, 0.0),
                    dir: (-d.0, -d.1),
                },
            ],
        }
    }

    pub fn image(&self, steps: i64) -> Self {
        SphereContinuum {
            pieces: self.pieces.iter().map(|p| p.map(steps)).collect(),
        }
    }

    pub fn union(&self, other: &SphereContinuum) -> Self {
        SphereContinuum {
            pieces: self.pieces.iter().chain(&other.pieces).copied().collect(),
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.pieces.iter().any(Piece::contains_zero)
    }

    pub fn contains_infinity(&self) -> bool {
        self.pieces.iter().any(Piece::contains_infinity)
    }

    /// Whether the continuum reaches the closed double wedge
    /// `|sin arg z| >= sin(theta)` around the imaginary axis.
    pub fn meets_wedge(&self, theta: f64) -> bool {
        self.pieces.iter().any(|p| p.max_abs_sin_arg() >= theta.sin())
    }

    pub fn distance_to(&self, z: SpherePoint) -> f64 {
        let x = z.lift();
        self.pieces
            .iter()
            .map(|p| p.lift().distance(x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A lower estimate of a Hausdorff distance from sampling, with the sampling
/// error: the true distance lies in `[value, value + error_bound]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereDistance {
    pub value: f64,
    pub error_bound: f64,
}

impl SphereDistance {
    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }
}

/// Samples every piece of `from` that is not also a piece of `to` and takes
/// exact distances to the pieces of `to`.
pub fn directed_sphere(from: &SphereContinuum, to: &SphereContinuum, eta: f64) -> SphereDistance {
    let targets: Vec<Lifted> = to.pieces.iter().map(Piece::lift).collect();
    let mut out = SphereDistance {
        value: 0.0,
        error_bound: 0.0,
    };
    for p in &from.pieces {
        if to.pieces.contains(p) {
            continue;
        }
        let (pts, spacing) = p.lift().samples(eta);
        out.error_bound = out.error_bound.max(0.5 * spacing);
        for x in pts {
            let d = targets.iter().map(|t| t.distance(x)).fold(f64::INFINITY, f64::min);
            out.value = out.value.max(d);
        }
    }
    out
}

pub fn hausdorff_sphere(a: &SphereContinuum, b: &SphereContinuum, eta: f64) -> SphereDistance {
    let (x, y) = (directed_sphere(a, b, eta), directed_sphere(b, a, eta));
    SphereDistance {
        value: x.value.max(y.value),
        error_bound: x.error_bound.max(y.error_bound),
    }
}

/// Chordal resolution for reported distances.
pub const SPHERE_ETA: f64 = 1e-4;

/// The ray from 0 through `x` closed up at both poles: invariant under the map.
pub fn build_fixed_spine(x: (f64, f64)) -> Result<SphereContinuum> {
    if x == (0.0, 0.0) || !x.0.is_finite() || !x.1.is_finite() {
        return Err(Error::Geometry("spine needs a finite point other than 0".into()));
    }
    Ok(SphereContinuum {
        pieces: vec![Piece::Ray {
            from: (0.0, 0.0),
            dir: x,
        }],
    })
}

fn point_segment_gap(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * d.0).hypot(p.1 - a.1 - t * d.1)
}

/// A semicircle in the upper half plane from `x` to `x / 2^period` on the
/// positive real axis, as a polyline with `vertices` vertices.
pub fn semicircle_detour(x: f64, period: u32, vertices: usize) -> Vec<(f64, f64)> {
    let end = x * 0.5f64.powi(period as i32);
    let (c, r) = ((x + end) / 2.0, (x - end) / 2.0);
    (0..vertices)
        .map(|i| {
            if i == 0 {
                return (x, 0.0);
            }
            if i == vertices - 1 {
                return (end, 0.0);
            }
            let phi = PI * i as f64 / (vertices - 1) as f64;
            (c + r * phi.cos(), r * phi.sin())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicContinuumReport {
    pub period: u32,
    pub window: usize,
    pub continuum: SphereContinuum,
    pub defect: SphereDistance,
    /// `d_H(step^(2N)(K), K)`.
    pub double_defect: SphereDistance,
}

/// `K_W = ∪_{|j| <= W} f^(jN)(γ) ∪ {0, ∞}` for a detour `γ` from `x` to `f^N(x)`.
pub fn build_periodic_continuum(period: u32, detour: &[(f64, f64)], window: usize) -> Result<PeriodicContinuumReport> {
    if period == 0 || detour.len() < 2 {
        return Err(Error::InvalidParameter(
            "need period >= 1 and a detour with two vertices".into(),
        ));
    }
    let x = detour[0];
    let s = 0.5f64.powi(period as i32);
    let end = *detour.last().expect("nonempty");
    if end != (x.0 * s, x.1 * s) || x == (0.0, 0.0) {
        return Err(Error::Precondition("detour must run from x != 0 to f^N(x)".into()));
    }
    for j in (1..period as i32).flat_map(|j| [j, -j]) {
        let z = (x.0 * 0.5f64.powi(j), x.1 * 0.5f64.powi(j));
        if detour.windows(2).any(|w| point_segment_gap(z, w[0], w[1]) < 1e-12) {
            return Err(Error::Precondition(format!("detour meets the iterate f^{j}(x)")));
        }
    }
    let gamma = SphereContinuum::polyline(detour)?;
    let n = period as i64;
    let w = window as i64;
    let mut pieces = vec![
        Piece::Point { at: SpherePoint::ZERO },
        Piece::Point {
            at: SpherePoint::Infinity,
        },
    ];
    for j in -w..=w {
        pieces.extend(gamma.image(j * n).pieces);
    }
    let k = SphereContinuum { pieces };
    let defect = hausdorff_sphere(&k.image(n), &k, SPHERE_ETA);
    let double_defect = hausdorff_sphere(&k.image(2 * n), &k, SPHERE_ETA);
    Ok(PeriodicContinuumReport {
        period,
        window,
        continuum: k,
        defect,
        double_defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HomoclinicRow {
    pub n: i64,
    /// `d_H(step^n(K), P)`.
    pub to_spine: f64,
    /// `d_H(K_n, K)` with `K_n = K ∪ f^-n(β)`, for `n >= 1`.
    pub approximant: Option<f64>,
    /// `d_H(step^n(K_n), K)`, for `n >= 1`.
    pub approximant_return: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereHomoclinicReport {
    pub window: usize,
    pub rows: Vec<HomoclinicRow>,
    /// `min_{1 <= n <= W} d_H(step^n(K), K)`.
    pub recurrence_floor: f64,
    pub error_bound: f64,
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    [(a, b, c), (a, b, d), (c, d, a), (c, d, b)]
        .iter()
        .any(|&(p, q, r)| point_segment_gap(r, p, q) == 0.0)
}

/// `K = P ∪ β` with `P` the fixed spine through `x` and `β` a segment
/// attached to `P` at `x`.
pub fn build_homoclinic_witness(x: (f64, f64), beta_tip: (f64, f64), window: usize) -> Result<SphereHomoclinicReport> {
    let spine = build_fixed_spine(x)?;
    // beta may meet the spine line only at x
    let cr = x.0 * (beta_tip.1 - x.1) - x.1 * (beta_tip.0 - x.0);
    let along = (beta_tip.0 - x.0) * x.0 + (beta_tip.1 - x.1) * x.1;
    if cr == 0.0 && along != 0.0 || beta_tip == x {
        return Err(Error::Precondition("beta runs along the spine".into()));
    }
    for j in 1..=window as i32 {
        let s = 0.5f64.powi(j);
        for s in [s, 1.0 / s] {
            if segments_intersect(x, beta_tip, (x.0 * s, x.1 * s), (beta_tip.0 * s, beta_tip.1 * s)) {
                return Err(Error::Precondition(format!("beta meets its iterate at step {j}")));
            }
        }
    }
    let beta = SphereContinuum {
        pieces: vec![Piece::Segment { a: x, b: beta_tip }],
    };
    let k = spine.union(&beta);
    let w = window as i64;
    let mut error_bound: f64 = 0.0;
    let mut track = |d: SphereDistance| {
        error_bound = error_bound.max(d.error_bound);
        d.value
    };
    let mut rows = Vec::new();
    let mut recurrence_floor = f64::INFINITY;
    for n in -w..=w {
        let img = k.image(n);
        let to_spine = track(hausdorff_sphere(&img, &spine, SPHERE_ETA));
        let (mut approximant, mut approximant_return) = (None, None);
        if n >= 1 {
            recurrence_floor = recurrence_floor.min(track(hausdorff_sphere(&img, &k, SPHERE_ETA)));
            let kn = k.union(&beta.image(-n));
            approximant = Some(track(hausdorff_sphere(&kn, &k, SPHERE_ETA)));
            approximant_return = Some(track(hausdorff_sphere(&kn.image(n), &k, SPHERE_ETA)));
        }
        rows.push(HomoclinicRow {
            n,
            to_spine,
            approximant,
            approximant_return,
        });
    }
    Ok(SphereHomoclinicReport {
        window,
        rows,
        recurrence_floor,
        error_bound,
    })
}

/// The conjugacy from the comb `∪ f^n(γ ∪ β) ∪ {0, ∞}` onto the dendrite,
/// where `γ = [x/2, x]` on the positive real axis and `β` is the vertical
/// segment of height `h` above `x`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CombConjugacy {
    pub x: f64,
    pub h: f64,
}

impl CombConjugacy {
    pub fn new(x: f64, h: f64) -> Result<Self> {
        if !(x > 0.0 && h > 0.0 && x.is_finite() && h.is_finite()) {
            return Err(Error::InvalidParameter("need x > 0 and h > 0".into()));
        }
        Ok(CombConjugacy { x, h })
    }

    /// `n` with `2^n z / x` in `(1/2, 1]`.
    fn block(&self, z: f64) -> i64 {
        let mut n = -(z / self.x).log2().ceil() as i64;
        while z / self.x * 2f64.powi(n as i32) > 1.0 {
            n -= 1;
        }
        while z / self.x * 2f64.powi(n as i32) <= 0.5 {
            n += 1;
        }
        n
    }

    /// The sink 0 goes to the attracting end `Q`, the source to `P`; block
    /// `f^n(γ)` goes onto the spine segment `[a_n, a_{n+1}]` and `f^n(β)` onto
    /// the leg at node `n`.
    pub fn eval(&self, z: SpherePoint) -> Result<DendritePoint> {
        let (u, v) = match z {
            SpherePoint::Infinity => return Ok(DendritePoint::P),
            SpherePoint::Finite { u, v } => (u, v),
        };
        if u == 0.0 && v == 0.0 {
            return Ok(DendritePoint::Q);
        }
        if u <= 0.0 || v < 0.0 {
            return Err(Error::Invariant(format!("({u}, {v}) is off the comb")));
        }
        let n = self.block(u);
        let s = 2f64.powi(n as i32);
        if v == 0.0 {
            return Ok(DendritePoint::Spine {
                seg: n,
                t: 2.0 * (1.0 - s * u / self.x),
            });
        }
        if s * u / self.x != 1.0 || s * v > self.h {
            return Err(Error::Invariant(format!("({u}, {v}) is off the comb")));
        }
        Ok(DendritePoint::Leg {
            node: n,
            frac: s * v / self.h,
        })
    }

    /// Seeded points of the blocks with `|n| <= window`, half on each kind.
    pub fn mesh(&self, count: usize, window: i64, seed: u64) -> Vec<SpherePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let n = rng.gen_range(-window..=window);
                let s = 0.5f64.powi(n as i32);
                if i % 2 == 0 {
                    SpherePoint::finite(self.x * s * rng.gen_range(0.5..1.0), 0.0)
                } else {
                    SpherePoint::finite(self.x * s, self.h * s * rng.gen_range(f64::MIN_POSITIVE..=1.0))
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusRow {
    pub at: String,
    pub radius: f64,
    /// Largest dendrite distance from the image of the centre over mesh
    /// points chordally within `radius` of it.
    pub modulus: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    pub mesh_points: usize,
    pub residual: f64,
    pub moduli: Vec<ModulusRow>,
}

pub fn special_dendrite_conjugacy(
    h: &CombConjugacy,
    mesh_points: usize,
    window: i64,
    seed: u64,
) -> Result<ConjugacyReport> {
    let mesh = h.mesh(mesh_points, window, seed);
    let images = mesh.iter().map(|&z| h.eval(z)).collect::<Result<Vec<_>>>()?;
    let mut residual: f64 = 0.0;
    for (&z, hz) in mesh.iter().zip(&images) {
        let lhs = h.eval(ns_map(z, 1))?;
        residual = residual.max(lhs.distance(&hz.eval()));
    }
    let centres = [
        ("sink", SpherePoint::ZERO),
        ("source", SpherePoint::Infinity),
        ("junction", SpherePoint::finite(h.x, 0.0)),
    ];
    let mut moduli = Vec::new();
    for (name, c) in centres {
        let hc = h.eval(c)?;
        for radius in [0.1, 0.05, 0.01] {
            let near: Vec<usize> = (0..mesh.len()).filter(|&i| mesh[i].chordal(&c) < radius).collect();
            let modulus = near.iter().map(|&i| images[i].distance(&hc)).fold(0.0, f64::max);
            moduli.push(ModulusRow {
                at: name.into(),
                radius,
                modulus,
                points: near.len(),
            });
        }
    }
    Ok(ConjugacyReport {
        mesh_points,
        residual,
        moduli,
    })
}

/// The spliced pseudo-orbit on the real great circle `S1`: `x_0 = S1`,
/// `x_1 = S1` minus the `delta/2` ball at infinity, `x_-1 = S1` minus the
/// `delta/2` ball at 0, exact orbits on either side.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GreatCirclePseudoOrbit {
    pub delta: f64,
    /// Half-width of `x_1`.
    pub outer: f64,
    /// Inner radius of `x_-1`.
    pub inner: f64,
}

impl GreatCirclePseudoOrbit {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Precondition(format!("delta = {delta} outside (0, 1)")));
        }
        let h = delta / 2.0;
        Ok(GreatCirclePseudoOrbit {
            delta,
            outer: ((2.0 / h).powi(2) - 1.0).sqrt(),
            inner: h / (4.0 - h * h).sqrt(),
        })
    }

    pub fn state(&self, i: i64) -> SphereContinuum {
        match i.signum() {
            0 => SphereContinuum::line_through_zero(0.0),
            1 => {
                let r = self.outer * 0.5f64.powi(i as i32 - 1);
                SphereContinuum {
                    pieces: vec![Piece::Segment {
                        a: (-r, 0.0),
                        b: (r, 0.0),
                    }],
                }
            }
            _ => {
                let r = self.inner * 2f64.powi((-i) as i32 - 1);
                SphereContinuum {
                    pieces: vec![
                        Piece::Ray {
                            from: (r, 0.0),
                            dir: (1.0, 0.0),
                        },
                        Piece::Ray {
                            from: (-r, 0.0),
                            dir: (-1.0, 0.0),
                        },
                    ],
                }
            }
        }
    }

    /// Upper bounds on every splice gap in the window.
    pub fn verify(&self, window: i64) -> GapCheck {
        let max_gap = (-window..window)
            .map(|i| hausdorff_sphere(&self.state(i).image(1), &self.state(i + 1), SPHERE_ETA).upper())
            .fold(0.0, f64::max);
        GapCheck {
            ok: max_gap <= self.delta,
            max_gap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateFamily {
    LineThroughZero,
    RadialSegment,
    OffsetSegment,
    CircleThroughZero,
    BentPolyline,
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereCandidate {
    pub family: CandidateFamily,
    pub continuum: SphereContinuum,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Five parametric families of about 2000 continua each.
pub fn candidate_family() -> Vec<SphereCandidate> {
    let mut out = Vec::with_capacity(10_000);
    let mut push = |family, continuum| out.push(SphereCandidate { family, continuum });
    for j in 0..2000 {
        push(
            CandidateFamily::LineThroughZero,
            SphereContinuum::line_through_zero(PI * j as f64 / 2000.0),
        );
    }
    let radii = log_grid(1e-3, 1e3, 21);
    for angle in [0.0, 0.05, -0.05, 0.2, -0.2, 0.5, 1.0, PI / 2.0, PI - 0.1, PI] {
        let d = (f64::cos(angle), f64::sin(angle));
        for (i, &r1) in radii.iter().enumerate() {
            for &r2 in &radii[i + 1..] {
                push(
                    CandidateFamily::RadialSegment,
                    SphereContinuum::polyline(&[(r1 * d.0, r1 * d.1), (r2 * d.0, r2 * d.1)]).expect("two vertices"),
                );
            }
        }
    }
    let ends = log_grid(1e-2, 1e2, 10);
    let heights = [-1.0, -0.3, -0.1, -0.01, 0.001, 0.01, 0.1, 0.3, 1.0, 3.0];
    for &h in &heights {
        for &a in &ends {
            for &b in &ends {
                push(
                    CandidateFamily::OffsetSegment,
                    SphereContinuum::polyline(&[(-a, h), (b, h)]).expect("two vertices"),
                );
                push(
                    CandidateFamily::OffsetSegment,
                    SphereContinuum::polyline(&[(a * 0.1, h), (a * 0.1 + b, h)]).expect("two vertices"),
                );
            }
        }
    }
    for &rho in &log_grid(1e-2, 1e2, 50) {
        for j in 0..40 {
            let alpha = TAU * j as f64 / 40.0;
            let c = (rho * alpha.cos(), rho * alpha.sin());
            let verts: Vec<(f64, f64)> = (0..=16)
                .map(|i| {
                    let phi = alpha + PI + TAU * i as f64 / 16.0;
                    if i == 0 || i == 16 {
                        (0.0, 0.0)
                    } else {
                        (c.0 + rho * phi.cos(), c.1 + rho * phi.sin())
                    }
                })
                .collect();
            push(
                CandidateFamily::CircleThroughZero,
                SphereContinuum::polyline(&verts).expect("vertices"),
            );
        }
    }
    let spans = log_grid(1e-2, 1e2, 20);
    let lifts = log_grid(1e-3, 1e1, 10);
    for &l in &spans {
        for &hgt in &lifts {
            for (s, t) in [(1.0, 1.0), (1.0, -1.0), (0.5, 1.0), (2.0, 1.0), (1.0, 0.5)] {
                push(
                    CandidateFamily::BentPolyline,
                    SphereContinuum::polyline(&[(-l, 0.0), (0.0, t * hgt), (s * l, 0.0)]).expect("vertices"),
                );
            }
            for (s, t) in [(1.0, 1.0), (1.0, -1.0), (0.5, 1.0), (2.0, 0.5), (0.5, -2.0)] {
                push(
                    CandidateFamily::BentPolyline,
                    SphereContinuum::polyline(&[(l, t * hgt), (s * l, 0.0), (s * l * 2.0, -t * hgt)])
                        .expect("vertices"),
                );
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// Fails already at index 0.
    FarFromCircle,
    /// Contains a fixed point, so one tail is left behind.
    ContainsFixedPoint,
    /// Reaches the wedge around the imaginary axis, which every iterate keeps.
    WedgeEscape,
    Survived,
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereCandidateRecord {
    pub index: usize,
    pub family: CandidateFamily,
    pub reason: FailureReason,
    pub failing_index: Option<i64>,
    /// Sampled lower bound for `d_H` at the failing index.
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereFalsification {
    pub report: FalsificationReport,
    pub theta: f64,
    pub sweep_eta: f64,
    pub max_gap: f64,
    pub records: Vec<SphereCandidateRecord>,
}

/// Sampling resolution used inside the sweep; failures only need lower bounds.
pub const SWEEP_ETA: f64 = 5e-3;

fn excess_at(po: &GreatCirclePseudoOrbit, a: &SphereContinuum, i: i64, eps: f64) -> f64 {
    let img = a.image(i);
    let target = po.state(i);
    let d = directed_sphere(&img, &target, SWEEP_ETA).value;
    if d > eps + FAILURE_SLACK {
        return d;
    }
    d.max(directed_sphere(&target, &img, SWEEP_ETA).value)
}

/// Tests every candidate against the spliced great-circle pseudo-orbit. Each
/// is classified by the fixed points it contains and by whether it reaches
/// the wedge between `S2` and `S3` (lines through 0 at angles `±theta` from
/// the imaginary axis' complement), and its failing index is searched in the
/// direction that classification points to.
pub fn sphere_nonshadowing_certificate(
    epsilon: f64,
    delta: f64,
    window: usize,
    theta: f64,
    candidates: &[SphereCandidate],
) -> Result<SphereFalsification> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Precondition(format!(
            "epsilon = {epsilon} must separate the poles and S1"
        )));
    }
    if !(theta > 0.0 && theta < PI / 2.0 && 2.0 * (theta / 2.0).sin() > epsilon) {
        return Err(Error::Precondition(format!(
            "the lines at angle {theta} do not leave the epsilon-collar"
        )));
    }
    if delta >= epsilon {
        return Err(Error::Precondition("delta must be below epsilon".into()));
    }
    let po = GreatCirclePseudoOrbit::new(delta)?;
    let w = window as i64;
    let check = po.verify(w);
    if !check.ok {
        return Err(Error::Invariant(format!(
            "splice gap {} exceeds {delta}",
            check.max_gap
        )));
    }
    let records = candidates
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let a = &c.continuum;
            let record = |reason, failing_index, distance| SphereCandidateRecord {
                index,
                family: c.family,
                reason,
                failing_index,
                distance,
            };
            let d0 = excess_at(&po, a, 0, epsilon);
            if d0 > epsilon + FAILURE_SLACK {
                return Ok(record(FailureReason::FarFromCircle, Some(0), d0));
            }
            let (has_zero, has_inf) = (a.contains_zero(), a.contains_infinity());
            let (reason, first_backward) = if has_inf {
                (FailureReason::ContainsFixedPoint, false)
            } else if has_zero {
                (FailureReason::ContainsFixedPoint, true)
            } else if a.meets_wedge(theta) {
                (FailureReason::WedgeEscape, true)
            } else {
                return Err(Error::Invariant(format!(
                    "candidate {index} is epsilon-close to S1, avoids both poles and misses the wedge"
                )));
            };
            let mut best = d0;
            for backward in [first_backward, !first_backward] {
                for n in 1..=w {
                    let i = if backward { -n } else { n };
                    let d = excess_at(&po, a, i, epsilon);
                    if d > epsilon + FAILURE_SLACK {
                        return Ok(record(reason, Some(i), d));
                    }
                    best = best.max(d);
                }
            }
            Ok(record(FailureReason::Survived, None, best))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_margin = records
        .iter()
        .map(|r| r.distance - epsilon)
        .fold(f64::INFINITY, f64::min);
    let verdict = if records.iter().all(|r| r.failing_index.is_some()) && worst_margin > FAILURE_SLACK {
        Verdict::Falsified
    } else {
        Verdict::Inconclusive
    };
    Ok(SphereFalsification {
        report: FalsificationReport {
            epsilon,
            delta,
            candidates_tested: candidates.len(),
            worst_margin,
            verdict,
        },
        theta,
        sweep_eta: SWEEP_ETA,
        max_gap: check.max_gap,
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereAudit {
    pub samples: usize,
    pub passed: usize,
    /// Largest amount by which a fine recomputation fell below the recorded value.
    pub max_shortfall: f64,
}

impl SphereAudit {
    pub fn all_passed(&self) -> bool {
        self.passed == self.samples
    }
}

/// Recomputes random failures at the reporting resolution: the candidate is
/// pushed through `ns_map` vertex by vertex, the pseudo-orbit state is rebuilt,
/// and the fine distance must exceed `epsilon` and agree with the record.
pub fn audit_sphere_failures(
    delta: f64,
    epsilon: f64,
    candidates: &[SphereCandidate],
    records: &[SphereCandidateRecord],
    samples: usize,
    seed: u64,
) -> Result<SphereAudit> {
    let failing: Vec<&SphereCandidateRecord> = records.iter().filter(|r| r.failing_index.is_some()).collect();
    let mut audit = SphereAudit {
        samples: 0,
        passed: 0,
        max_shortfall: 0.0,
    };
    if failing.is_empty() {
        return Ok(audit);
    }
    audit.samples = samples;
    let po = GreatCirclePseudoOrbit::new(delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let r = failing[rng.gen_range(0..failing.len())];
        let i = r.failing_index.expect("filtered");
        let pieces = candidates[r.index]
            .continuum
            .pieces
            .iter()
            .map(|p| {
                let step = |z: (f64, f64)| match ns_map(SpherePoint::finite(z.0, z.1), i.signum()) {
                    SpherePoint::Finite { u, v } => (u, v),
                    SpherePoint::Infinity => unreachable!("finite vertices stay finite"),
                };
                let mut p = *p;
                for _ in 0..i.abs() {
                    p = match p {
                        Piece::Point { at } => Piece::Point {
                            at: ns_map(at, i.signum()),
                        },
                        Piece::Segment { a, b } => Piece::Segment { a: step(a), b: step(b) },
                        Piece::Ray { from, dir } => Piece::Ray { from: step(from), dir },
                    };
                }
                p
            })
            .collect();
        let fine = hausdorff_sphere(&SphereContinuum { pieces }, &po.state(i), SPHERE_ETA);
        let shortfall = (r.distance - fine.upper()).max(0.0);
        audit.max_shortfall = audit.max_shortfall.max(shortfall);
        if fine.value > epsilon + FAILURE_SLACK && shortfall <= 2.0 * SPHERE_ETA {
            audit.passed += 1;
        }
    }
    Ok(audit)
}
