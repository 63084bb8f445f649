//! Acceptance suite: one PASS/FAIL line per criterion, then the independent
//! oracles. Runs without the libtest harness so the lines always print.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperlab::circle::{CircleContinuum, MorseSmaleCircleMap};
use hyperlab::hyperspace::hausdorff_continua;
use hyperlab::recurrence::enumerate_fixed_continua;
use hyperlab::reproduce::{csv_files, run_criterion, Tolerances, CRITERIA};

/// Wall-clock budget per criterion.
const LIMITS: [Duration; 9] = [
    Duration::from_secs(60),
    Duration::from_secs(600),
    Duration::from_secs(120),
    Duration::from_secs(120),
    Duration::from_secs(300),
    Duration::from_secs(120),
    Duration::from_secs(60),
    Duration::from_secs(600),
    Duration::from_secs(600),
];

fn line(id: u8, passed: bool, elapsed: Duration, detail: &str) -> bool {
    let limit = LIMITS[id as usize - 1];
    let in_time = elapsed <= limit;
    let ok = passed && in_time;
    let mark = if ok { "PASS" } else { "FAIL" };
    let late = if in_time { "" } else { " over budget" };
    println!(
        "criterion {id}: {mark} ({:.2?} of {:?}{late}) {} | {detail}",
        elapsed,
        limit,
        CRITERIA[id as usize - 1].1
    );
    ok
}

// Oracles below share nothing with the library beyond the continuum type.

fn wrap(x: f64) -> f64 {
    x.rem_euclid(1.0)
}

fn arc_distance(x: f64, y: f64) -> f64 {
    let d = (wrap(x) - wrap(y)).abs();
    d.min(1.0 - d)
}

/// Sorted samples of the closed arc from `a` counterclockwise to `b`.
fn arc_samples(a: f64, b: f64, step: f64) -> Vec<f64> {
    let len = wrap(b - a);
    let n = (len / step).ceil() as usize;
    let mut s: Vec<f64> = (0..=n).map(|i| wrap(a + len * i as f64 / n.max(1) as f64)).collect();
    s.sort_by(f64::total_cmp);
    s
}

fn nearest(sorted: &[f64], x: f64) -> f64 {
    let i = sorted.partition_point(|&y| y < x);
    let before = sorted[(i + sorted.len() - 1) % sorted.len()];
    let after = sorted[i % sorted.len()];
    arc_distance(x, before).min(arc_distance(x, after))
}

fn brute_hausdorff(p: &[f64], q: &[f64]) -> f64 {
    let directed = |from: &[f64], to: &[f64]| from.iter().map(|&x| nearest(to, x)).fold(0.0, f64::max);
    directed(p, q).max(directed(q, p))
}

fn endpoints(c: &CircleContinuum) -> (f64, f64) {
    match c {
        CircleContinuum::Arc { a, b } => (a.coord(), b.coord()),
        CircleContinuum::Point { p } => (p.coord(), p.coord()),
        CircleContinuum::FullCircle => (0.0, 1.0 - 1e-15),
    }
}

/// Closed-form distance against a sampled brute force, plus configurations
/// with a known answer.
fn hausdorff_oracle() -> Result<String, String> {
    let step = 2e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let mut arc = || {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b = wrap(a + rng.gen_range(1e-3..0.999));
            (a, b)
        };
        let ((a1, b1), (a2, b2)) = (arc(), arc());
        let closed = hausdorff_continua(
            &CircleContinuum::arc(a1, b1).unwrap(),
            &CircleContinuum::arc(a2, b2).unwrap(),
        );
        let brute = brute_hausdorff(&arc_samples(a1, b1, step), &arc_samples(a2, b2, step));
        worst = worst.max((closed.value - brute).abs());
    }
    if worst > step {
        return Err(format!("closed form and brute force differ by {worst:e}"));
    }
    let point = |x: f64| CircleContinuum::point(x);
    let known = [
        (point(0.1), point(0.95), 0.15),
        (
            CircleContinuum::arc(0.3, 0.4).unwrap(),
            CircleContinuum::arc(0.25, 0.45).unwrap(),
            0.05,
        ),
        (point(0.5), CircleContinuum::arc(0.2, 0.8).unwrap(), 0.3),
        (point(0.0), CircleContinuum::FullCircle, 0.5),
        (
            CircleContinuum::arc(0.9, 0.1).unwrap(),
            CircleContinuum::arc(0.4, 0.6).unwrap(),
            0.4,
        ),
    ];
    for (x, y, want) in &known {
        let got = hausdorff_continua(x, y).value;
        if (got - want).abs() > 1e-12 {
            return Err(format!("{x:?} vs {y:?}: {got} instead of {want}"));
        }
    }
    Ok(format!(
        "300 random arc pairs within {worst:e} of brute force; {} known values",
        known.len()
    ))
}

/// Invariant continua of a map with 2k fixed points: the points, the arcs
/// joining ordered pairs of them, and the circle, so 4k^2 + 1 in total.
fn fixed_continua_oracle() -> Result<String, String> {
    let mut counts = Vec::new();
    for (k, amplitude) in [(1u32, 0.1), (2, 0.05), (3, 0.03)] {
        let m = MorseSmaleCircleMap::preserving(k, amplitude).map_err(|e| e.to_string())?;
        let list = enumerate_fixed_continua(&m).map_err(|e| e.to_string())?;
        let want = 4 * (k as usize).pow(2) + 1;
        if list.len() != want {
            return Err(format!("k={k}: {} fixed continua, expected {want}", list.len()));
        }
        for p in &list {
            let (a, b) = endpoints(&p.continuum);
            for x in arc_samples(a, b, 1e-3) {
                let y = m.eval(x);
                let near_end = arc_distance(y, a).min(arc_distance(y, b)) <= 1e-12;
                if !p.continuum.contains(y) && !near_end {
                    return Err(format!("k={k}: image of {x} leaves {:?}", p.continuum));
                }
            }
            for end in [a, b] {
                if matches!(p.continuum, CircleContinuum::Arc { .. }) && arc_distance(m.eval(end), end) > 1e-12 {
                    return Err(format!("k={k}: endpoint {end} of {:?} moves", p.continuum));
                }
            }
        }
        counts.push(list.len());
    }
    Ok(format!(
        "counts {counts:?} equal 4k^2+1 and every sampled image stays inside"
    ))
}

fn main() -> ExitCode {
    let tol = Tolerances::default();
    let mut all = true;
    let mut first = Vec::new();
    for id in 1..=8u8 {
        let started = Instant::now();
        match run_criterion(id, &tol) {
            Ok(r) => {
                all &= line(
                    id,
                    r.passed,
                    started.elapsed(),
                    &format!("{} (threshold {})", r.measured, r.threshold),
                );
                first.push(r);
            }
            Err(e) => all &= line(id, false, started.elapsed(), &format!("error: {e}")),
        }
    }

    let started = Instant::now();
    let rerun: Result<Vec<_>, _> = (1..=8).map(|id| run_criterion(id, &tol)).collect();
    let detail = match (rerun, csv_files(&first, &[])) {
        (Ok(second), Ok(a)) => match csv_files(&second, &[]) {
            Ok(b) if a == b && first.len() == 8 => Ok(format!("{} CSV files byte-identical across runs", a.len())),
            Ok(b) => {
                let differing: Vec<&str> = a
                    .iter()
                    .zip(&b)
                    .filter(|(x, y)| x != y)
                    .map(|(x, _)| x.0.as_str())
                    .collect();
                Err(format!("differ: {}", differing.join(" ")))
            }
            Err(e) => Err(e.to_string()),
        },
        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
    };
    let (passed, text) = match detail {
        Ok(t) => (true, t),
        Err(t) => (false, t),
    };
    all &= line(9, passed, started.elapsed(), &text);

    for (name, oracle) in [
        (
            "hausdorff brute force",
            hausdorff_oracle as fn() -> Result<String, String>,
        ),
        ("fixed continua count", fixed_continua_oracle),
    ] {
        match oracle() {
            Ok(t) => println!("oracle {name}: PASS | {t}"),
            Err(t) => {
                all = false;
                println!("oracle {name}: FAIL | {t}");
            }
        }
    }

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
