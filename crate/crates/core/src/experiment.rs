//! Experiment configs and their dispatch. Every config deserializes with all
//! defaults filled in, so the effective config recorded in a report is complete.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circle::{circle_distance, CircleContinuum, MorseSmaleCircleMap};
use crate::dendrite::{
    build_c_sigma, fullcone_phi, fullcone_phi_inverse, fullcone_separation_floor, hausdorff_subtrees,
    verify_c_sigma_separation, words, FullConeCode, Subtree,
};
use crate::entropy::{
    code_against_table, coding_base_points, entropy_estimate, exact_separated_lower_bound_coding, orbit_table,
    ArcSystem, CircleSystem, CountMethod, EntropyReport, EntropySchedule, FullShift, Rotation, SeparatedRow,
    AMBIGUITY_BAND,
};
use crate::error::{Error, Result};
use crate::hyperspace::{hausdorff_continua, induced_2f_step, FiniteSubset};
use crate::recurrence::{
    build_orbit_closure, enumerate_fixed_continua, homoclinic_witness, wandering_certificate, CertificateStatus,
};
use crate::report::{Provenance, Table};
use crate::row;
use crate::shadowing::{
    audit_failures, build_spliced_pseudo_orbit, falsify_cf_shadowing, random_strand_pseudo_orbit, shadow_finite_2f,
    ShadowStatus, Verdict,
};
use crate::sphere::{
    audit_sphere_failures, build_homoclinic_witness, build_periodic_continuum, candidate_family, semicircle_detour,
    special_dendrite_conjugacy, sphere_nonshadowing_certificate, CombConjugacy,
};
use crate::symbolic::{
    check_finite_map_coding, cone_phi, phi_sq, phi_sq_preimage, random_cone, random_sq_set, sq_valid, FiniteMapCoding,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Recurrence(RecurrenceConfig),
    Shadow(ShadowConfig),
    Entropy(EntropyConfig),
    Coding(CodingConfig),
    Dendrite(DendriteConfig),
    Sphere(SphereConfig),
}

/// `(experiment, mode)` pairs accepted by [`ExperimentConfig`].
pub const EXPERIMENTS: &[(&str, &[&str])] = &[
    (
        "recurrence",
        &["orbit-closure", "homoclinic", "fixed-continua", "wandering"],
    ),
    ("shadow", &["falsify-cf", "shadow-2f", "verify"]),
    ("entropy", &["circle", "rotation", "arcs", "full-shift", "coding"]),
    ("coding", &["sq", "finite-map", "cone", "phi2f"]),
    ("dendrite", &["csigma", "fullcone", "conjugacy"]),
    ("sphere", &["periodic", "homoclinic", "conjugacy", "nonshadowing"]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrenceConstruction {
    OrbitClosure,
    Homoclinic,
    FixedContinua,
    Wandering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrenceConfig {
    pub construction: RecurrenceConstruction,
    pub pairs: u32,
    pub amplitude: f64,
    pub x: f64,
    pub stride: u32,
    pub truncation: u32,
    pub window: u32,
    /// Arc endpoints for the wandering certificate.
    pub target: [f64; 2],
    pub epsilon: f64,
    pub grid: f64,
    pub seed: u64,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        RecurrenceConfig {
            construction: RecurrenceConstruction::Homoclinic,
            pairs: 1,
            amplitude: 0.1,
            x: 0.3,
            stride: 1,
            truncation: 40,
            window: 60,
            target: [0.25, 0.6],
            epsilon: 0.05,
            grid: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMode {
    FalsifyCf,
    #[serde(rename = "shadow-2f")]
    Shadow2f,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowConfig {
    pub mode: ShadowMode,
    pub pairs: u32,
    pub amplitude: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub window: usize,
    pub grid: f64,
    pub strands: usize,
    pub trials: usize,
    pub audit_samples: usize,
    pub audit_eta: f64,
    /// Write one CSV row per falsification candidate.
    pub candidate_csv: bool,
    pub seed: u64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        ShadowConfig {
            mode: ShadowMode::FalsifyCf,
            pairs: 1,
            amplitude: 0.1,
            epsilon: 0.1,
            delta: 0.01,
            window: 60,
            grid: 1e-3,
            strands: 3,
            trials: 20,
            audit_samples: 100,
            audit_eta: 1e-4,
            candidate_csv: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum EntropySystem {
    Circle,
    Rotation,
    Arcs,
    FullShift,
    Coding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub system: EntropySystem,
    pub pairs: u32,
    pub amplitude: f64,
    pub angle: f64,
    pub symbols: u8,
    pub depth: usize,
    /// Base points of the exact coding family.
    pub r: usize,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub samples: usize,
    pub budget: Option<u64>,
    pub seed: u64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            system: EntropySystem::Arcs,
            pairs: 1,
            amplitude: 0.1,
            angle: 0.1 * std::f64::consts::SQRT_2,
            symbols: 3,
            depth: 16,
            r: 2,
            epsilons: vec![0.1, 0.05],
            ns: (1..=12).collect(),
            samples: 2000,
            budget: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum CodingConstruction {
    Sq,
    FiniteMap,
    Cone,
    Phi2f,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CodingConfig {
    pub construction: CodingConstruction,
    pub pairs: u32,
    pub amplitude: f64,
    pub r: u32,
    pub window: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CodingConfig {
    fn default() -> Self {
        CodingConfig {
            construction: CodingConstruction::Phi2f,
            pairs: 1,
            amplitude: 0.1,
            r: 3,
            window: 8,
            samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum DendriteMode {
    Csigma,
    Fullcone,
    Conjugacy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DendriteConfig {
    pub mode: DendriteMode,
    pub k: u32,
    pub n: usize,
    pub delta: Option<f64>,
    /// Leg families of the full cone.
    pub r: u32,
    /// Codes use nodes in `[-window, window]`.
    pub window: i64,
    pub samples: usize,
    pub pairwise_csv: bool,
    pub seed: u64,
}

impl Default for DendriteConfig {
    fn default() -> Self {
        DendriteConfig {
            mode: DendriteMode::Csigma,
            k: 2,
            n: 2,
            delta: None,
            r: 3,
            window: 6,
            samples: 1000,
            pairwise_csv: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum SphereMode {
    Periodic,
    Homoclinic,
    Conjugacy,
    Nonshadowing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SphereConfig {
    pub mode: SphereMode,
    pub period: u32,
    pub window: usize,
    pub x: f64,
    pub detour_vertices: usize,
    pub defect_tolerance: f64,
    pub beta_height: f64,
    pub decay_tolerance: f64,
    pub recurrence_floor: f64,
    pub mesh_points: usize,
    pub mesh_window: i64,
    pub residual_tolerance: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub theta: f64,
    pub audit_samples: usize,
    pub seed: u64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            mode: SphereMode::Periodic,
            period: 2,
            window: 20,
            x: 1.0,
            detour_vertices: 8,
            defect_tolerance: 1e-5,
            beta_height: 0.5,
            decay_tolerance: 1e-4,
            recurrence_floor: 0.1,
            mesh_points: 1000,
            mesh_window: 12,
            residual_tolerance: 1e-9,
            epsilon: 0.2,
            delta: 0.02,
            theta: PI / 4.0,
            audit_samples: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The verdict the experiment is designed to reach was reached.
    Expected,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub tables: Vec<Table>,
}

/// The JSON document written for one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub experiment: String,
    pub status: Status,
    pub result: Value,
}

/// JSON Schema of [`ExperimentConfig`].
pub fn config_schema() -> Value {
    serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schemas serialize")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Recurrence(c) => c.seed,
            ExperimentConfig::Shadow(c) => c.seed,
            ExperimentConfig::Entropy(c) => c.seed,
            ExperimentConfig::Coding(c) => c.seed,
            ExperimentConfig::Dendrite(c) => c.seed,
            ExperimentConfig::Sphere(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ExperimentConfig::Recurrence(c) => c.seed = seed,
            ExperimentConfig::Shadow(c) => c.seed = seed,
            ExperimentConfig::Entropy(c) => c.seed = seed,
            ExperimentConfig::Coding(c) => c.seed = seed,
            ExperimentConfig::Dendrite(c) => c.seed = seed,
            ExperimentConfig::Sphere(c) => c.seed = seed,
        }
        self
    }

    /// `<experiment>-<mode>`, used for output file names.
    pub fn name(&self) -> String {
        let value = serde_json::to_value(self).expect("configs serialize");
        let kind = value["experiment"].as_str().unwrap_or("experiment").to_string();
        let mode = ["construction", "mode", "system"]
            .iter()
            .find_map(|k| value[k].as_str());
        match mode {
            Some(m) => format!("{kind}-{m}"),
            None => kind,
        }
    }

    /// Range checks that do not need the computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.into()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match self {
            ExperimentConfig::Recurrence(c) => {
                if c.pairs == 0 || !positive(c.amplitude) || !positive(c.grid) || !positive(c.epsilon) {
                    return bad("pairs, amplitude, grid and epsilon must be positive");
                }
            }
            ExperimentConfig::Shadow(c) => {
                if c.pairs == 0 || !positive(c.epsilon) || !positive(c.delta) || !positive(c.grid) || c.window == 0 {
                    return bad("pairs, epsilon, delta, grid and window must be positive");
                }
            }
            ExperimentConfig::Entropy(c) => {
                if c.epsilons.iter().any(|&e| !positive(e)) || c.ns.contains(&0) || c.ns.is_empty() {
                    return bad("epsilons must be positive and ns a nonempty list of positive integers");
                }
                if c.ns.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("ns must be strictly increasing");
                }
                if c.samples == 0 {
                    return bad("samples must be positive");
                }
            }
            ExperimentConfig::Coding(c) => {
                if c.r == 0 || c.window == 0 {
                    return bad("r and window must be positive");
                }
            }
            ExperimentConfig::Dendrite(c) => {
                if c.delta.is_some_and(|d| !positive(d)) || c.window < 0 {
                    return bad("delta must be positive and window nonnegative");
                }
            }
            ExperimentConfig::Sphere(c) => {
                if !positive(c.x) || !positive(c.beta_height) || c.detour_vertices < 2 {
                    return bad("x and beta_height must be positive and the detour needs two vertices");
                }
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Outcome> {
        match self {
            ExperimentConfig::Recurrence(c) => run_recurrence(c),
            ExperimentConfig::Shadow(c) => run_shadow(c),
            ExperimentConfig::Entropy(c) => run_entropy(c),
            ExperimentConfig::Coding(c) => run_coding(c),
            ExperimentConfig::Dendrite(c) => run_dendrite(c),
            ExperimentConfig::Sphere(c) => run_sphere(c),
        }
    }

    pub fn report(&self, outcome: &Outcome) -> Result<RunReport> {
        Ok(RunReport {
            provenance: Provenance::of(self)?,
            experiment: self.name(),
            status: outcome.status,
            result: outcome.result.clone(),
        })
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn expected_if(ok: bool) -> Status {
    if ok {
        Status::Expected
    } else {
        Status::Inconclusive
    }
}

/// `(kind, a, b)` cells for a circle continuum.
pub fn continuum_cells(c: &CircleContinuum) -> [String; 3] {
    match *c {
        CircleContinuum::Point { p } => ["point".into(), p.coord().to_string(), p.coord().to_string()],
        CircleContinuum::Arc { a, b } => ["arc".into(), a.coord().to_string(), b.coord().to_string()],
        CircleContinuum::FullCircle => ["circle".into(), String::new(), String::new()],
    }
}

fn run_recurrence(c: &RecurrenceConfig) -> Result<Outcome> {
    let m = MorseSmaleCircleMap::preserving(c.pairs, c.amplitude)?;
    match c.construction {
        RecurrenceConstruction::OrbitClosure => {
            let mut t = Table::new("orbit_closure", &["truncation", "points", "defect"]);
            for k in 1..=c.truncation {
                let z = build_orbit_closure(&m, c.x, c.stride, k)?;
                t.push(row![k, z.points.len(), z.defect]);
            }
            let z = build_orbit_closure(&m, c.x, c.stride, c.truncation)?;
            Ok(Outcome {
                status: Status::Expected,
                result: to_value(&z),
                tables: vec![t],
            })
        }
        RecurrenceConstruction::Homoclinic => {
            let r = homoclinic_witness(&m, c.x, c.window)?;
            let mut t = Table::new("approximants", &["j", "approximant_gap", "return_gap"]);
            for a in &r.approximants {
                t.push(row![a.j, a.approximant_gap, a.return_gap]);
            }
            Ok(Outcome {
                status: expected_if(r.non_recurrent && r.identity_holds),
                result: to_value(&r),
                tables: vec![t],
            })
        }
        RecurrenceConstruction::FixedContinua => {
            let list = enumerate_fixed_continua(&m)?;
            let mut t = Table::new(
                "fixed_continua",
                &["kind", "continuum", "a", "b", "period", "invariance_gap"],
            );
            let mut exact = true;
            for p in &list {
                let gap = hausdorff_continua(&m.continuum_image(&p.continuum), &p.continuum).value;
                exact &= gap == 0.0;
                let [kind, a, b] = continuum_cells(&p.continuum);
                t.push(vec![
                    to_value(&p.kind).as_str().unwrap_or("").into(),
                    kind,
                    a,
                    b,
                    p.period.to_string(),
                    gap.to_string(),
                ]);
            }
            if !exact {
                return Err(Error::Invariant(
                    "an enumerated continuum is not exactly invariant".into(),
                ));
            }
            Ok(Outcome {
                status: Status::Expected,
                result: json!({ "count": list.len(), "continua": list }),
                tables: vec![t],
            })
        }
        RecurrenceConstruction::Wandering => {
            let target = CircleContinuum::arc(c.target[0], c.target[1])?;
            let r = wandering_certificate(&m, &target, c.epsilon, c.grid, c.window)?;
            let mut t = Table::new("wandering", &["radius", "neighbors", "min_return", "certified"]);
            for row in &r.rows {
                t.push(row![row.radius, row.neighbors, row.min_return, row.certified]);
            }
            Ok(Outcome {
                status: expected_if(r.status == CertificateStatus::Certified),
                result: to_value(&r),
                tables: vec![t],
            })
        }
    }
}

fn run_shadow(c: &ShadowConfig) -> Result<Outcome> {
    let m = MorseSmaleCircleMap::preserving(c.pairs, c.amplitude)?;
    match c.mode {
        ShadowMode::FalsifyCf => {
            let f = falsify_cf_shadowing(&m, c.epsilon, c.delta, c.window, c.grid)?;
            let audit = audit_failures(&m, c.delta, c.epsilon, &f.records, c.audit_samples, c.audit_eta, c.seed)?;
            let mut tables = vec![failure_histogram(f.records.iter().map(|r| r.failing_index))];
            if c.candidate_csv {
                let mut t = Table::new(
                    "candidates",
                    &["kind", "a", "b", "contains_repeller", "failing_index", "distance"],
                );
                for r in &f.records {
                    let [kind, a, b] = continuum_cells(&r.candidate);
                    let idx = r.failing_index.map_or(String::new(), |i| i.to_string());
                    t.push(vec![
                        kind,
                        a,
                        b,
                        r.contains_repeller.to_string(),
                        idx,
                        r.distance.to_string(),
                    ]);
                }
                tables.push(t);
            }
            let ok = f.report.verdict == Verdict::Falsified && audit.all_passed();
            Ok(Outcome {
                status: expected_if(ok),
                result: json!({ "report": f.report, "audit": audit }),
                tables,
            })
        }
        ShadowMode::Shadow2f => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut t = Table::new("shadow_2f", &["trial", "max_gap", "sup_distance", "status"]);
            let mut all = true;
            let mut worst: f64 = 0.0;
            for trial in 0..c.trials {
                let po = random_strand_pseudo_orbit(&m, c.strands, c.window, c.delta, &mut rng);
                let gaps = po.verify(&m);
                if !gaps.ok {
                    return Err(Error::Invariant(format!(
                        "trial {trial} is not a {}-pseudo-orbit",
                        c.delta
                    )));
                }
                let r = shadow_finite_2f(&m, &po, c.epsilon, c.grid)?;
                all &= r.status == ShadowStatus::Shadowed;
                worst = worst.max(r.sup_distance);
                t.push(row![
                    trial,
                    gaps.max_gap,
                    r.sup_distance,
                    to_value(&r.status).as_str().unwrap_or("")
                ]);
            }
            Ok(Outcome {
                status: expected_if(all),
                result: json!({ "trials": c.trials, "all_shadowed": all, "worst_sup_distance": worst }),
                tables: vec![t],
            })
        }
        ShadowMode::Verify => {
            let po = build_spliced_pseudo_orbit(&m, c.delta, c.window)?;
            let mut t = Table::new("gaps", &["i", "gap"]);
            let mut max_gap: f64 = 0.0;
            for i in po.orbit.indices().take(2 * c.window) {
                let gap = hausdorff_continua(&m.continuum_image(po.orbit.at(i)), po.orbit.at(i + 1)).value;
                max_gap = max_gap.max(gap);
                t.push(row![i, gap]);
            }
            let ok = max_gap <= c.delta;
            Ok(Outcome {
                status: expected_if(ok),
                result: json!({ "attractor": po.attractor, "repeller": po.repeller, "max_gap": max_gap, "delta": c.delta }),
                tables: vec![t],
            })
        }
    }
}

/// Candidate counts per failing index; an empty index means no failure.
pub fn failure_histogram(indices: impl Iterator<Item = Option<i64>>) -> Table {
    let mut counts = std::collections::BTreeMap::new();
    for i in indices {
        *counts.entry(i).or_insert(0usize) += 1;
    }
    let mut t = Table::new("failure_indices", &["failing_index", "candidates"]);
    for (i, n) in counts {
        t.push(vec![i.map_or(String::new(), |i| i.to_string()), n.to_string()]);
    }
    t
}

pub fn entropy_table(rows: &[SeparatedRow]) -> Table {
    let mut t = Table::new("entropy", &["n", "epsilon", "count", "method", "estimate"]);
    for r in rows {
        let method = match r.method {
            CountMethod::Greedy => "greedy",
            CountMethod::Exact => "exact",
        };
        t.push(row![r.n, r.epsilon, r.count, method, r.estimate]);
    }
    t
}

fn run_entropy(c: &EntropyConfig) -> Result<Outcome> {
    let schedule = EntropySchedule {
        epsilons: c.epsilons.clone(),
        ns: c.ns.clone(),
        samples: c.samples,
        budget: c.budget,
        seed: c.seed,
    };
    let m = || MorseSmaleCircleMap::preserving(c.pairs, c.amplitude);
    let report: EntropyReport = match c.system {
        EntropySystem::Circle => entropy_estimate(&CircleSystem(m()?), &schedule)?,
        EntropySystem::Rotation => entropy_estimate(&Rotation { angle: c.angle }, &schedule)?,
        EntropySystem::Arcs => entropy_estimate(&ArcSystem(m()?), &schedule)?,
        EntropySystem::FullShift => entropy_estimate(
            &FullShift {
                symbols: c.symbols,
                depth: c.depth,
            },
            &schedule,
        )?,
        EntropySystem::Coding => {
            let m = m()?;
            let mut rows = Vec::new();
            for &n in &c.ns {
                let f = exact_separated_lower_bound_coding(&m, c.r, n)?;
                rows.push(SeparatedRow {
                    n,
                    epsilon: f.delta,
                    count: f.count,
                    method: CountMethod::Exact,
                    estimate: f.estimate,
                });
            }
            let extrapolated = rows.last().map_or(0.0, |r| r.estimate);
            EntropyReport {
                rows,
                evaluations: 0,
                partial: false,
                extrapolated,
            }
        }
    };
    let t = entropy_table(&report.rows);
    Ok(Outcome {
        status: expected_if(!report.partial),
        result: to_value(&report),
        tables: vec![t],
    })
}

/// Pass counts for one identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IdentityCount {
    pub identity: String,
    pub checked: usize,
    pub passed: usize,
}

impl IdentityCount {
    fn new(identity: &str) -> Self {
        IdentityCount {
            identity: identity.into(),
            ..Default::default()
        }
    }

    fn record(&mut self, ok: bool) {
        self.checked += 1;
        self.passed += ok as usize;
    }

    pub fn holds(&self) -> bool {
        self.checked > 0 && self.passed == self.checked
    }
}

fn identity_outcome(counts: Vec<IdentityCount>) -> Result<Outcome> {
    let mut t = Table::new("identities", &["identity", "checked", "passed"]);
    for c in &counts {
        t.push(row![c.identity, c.checked, c.passed]);
    }
    if let Some(bad) = counts.iter().find(|c| !c.holds()) {
        return Err(Error::Invariant(format!(
            "{} failed on {} of {} inputs",
            bad.identity,
            bad.checked - bad.passed,
            bad.checked
        )));
    }
    Ok(Outcome {
        status: Status::Expected,
        result: json!({ "identities": counts }),
        tables: vec![t],
    })
}

/// `φ∘2^f = σ∘φ` for the coding against `r` base orbits, on random finite
/// sets drawn from the coded orbits and the fixed points.
pub fn check_phi_2f(
    m: &MorseSmaleCircleMap,
    r: usize,
    window: usize,
    samples: usize,
    seed: u64,
) -> Result<IdentityCount> {
    let base = coding_base_points(m, r)?;
    let table = orbit_table(m, &base, window)?;
    let fixed = m.fixed_coords();
    // images leave the table by one step, so the spacing is checked one step further out
    let mut pts: Vec<f64> = orbit_table(m, &base, window + 1)?.concat();
    pts.extend(&fixed);
    pts.sort_by(f64::total_cmp);
    let spacing = pts
        .iter()
        .zip(pts.iter().cycle().skip(1))
        .map(|(&a, &b)| circle_distance(a, b))
        .fold(f64::INFINITY, f64::min);
    if spacing < 10.0 * AMBIGUITY_BAND {
        return Err(Error::Precondition(format!(
            "orbit spacing {spacing:e} at window {window} is too tight to code"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = IdentityCount::new("phi_2f_equivariance");
    let w = window as i64;
    for _ in 0..samples {
        let mut coords: Vec<f64> = (0..rng.gen_range(1..=8))
            .map(|_| table[rng.gen_range(0..r)][rng.gen_range(0..=2 * window)])
            .collect();
        if rng.gen_bool(0.3) {
            coords.push(fixed[rng.gen_range(0..fixed.len())]);
        }
        let set = FiniteSubset::from_coords(&coords)?;
        let c = code_against_table(&table, &set, window)?;
        let img = code_against_table(&table, &induced_2f_step(m, &set), window)?;
        count.record((0..r).all(|k| (-w..w).all(|n| img.get(k, n + 1) == c.get(k, n))));
    }
    Ok(count)
}

pub fn check_sq(r: u32, window: usize, samples: usize, seed: u64) -> Vec<IdentityCount> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut equivariance = IdentityCount::new("phi_sq_equivariance");
    let mut validity = IdentityCount::new("sq_validity_preserved");
    let mut section = IdentityCount::new("phi_sq_section");
    for _ in 0..samples {
        let set = random_sq_set(&mut rng, window as i64, r);
        let image: Vec<_> = set.iter().map(|x| x.shift_step(1)).collect();
        let code = phi_sq(&set, r);
        equivariance.record(phi_sq(&image, r) == code.shift_step(1));
        validity.record(
            set.iter()
                .all(|x| sq_valid(x) && sq_valid(&x.shift_step(1)) && sq_valid(&x.shift_step(-1))),
        );
        section.record(phi_sq(&phi_sq_preimage(&code), r) == code);
    }
    vec![equivariance, validity, section]
}

pub fn check_cone(window: usize, samples: usize, seed: u64) -> IdentityCount {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = IdentityCount::new("cone_equivariance");
    for _ in 0..samples {
        let c = random_cone(&mut rng, window as i64);
        count.record(cone_phi(&c.step()) == cone_phi(&c).shift_step(-1));
    }
    count
}

fn random_fullcone(rng: &mut impl Rng, r: u32, window: i64) -> FullConeCode {
    FullConeCode::new(
        r,
        (0..rng.gen_range(0..8)).map(|_| (rng.gen_range(0..r), rng.gen_range(-window..=window))),
    )
    .expect("families drawn below r")
}

/// Full-cone conjugacy on random codes, plus bijectivity of the coding on
/// every code supported in a window of `span` nodes.
pub fn check_fullcone(r: u32, window: i64, samples: usize, seed: u64) -> Result<Vec<IdentityCount>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift = IdentityCount::new("fullcone_phi_shift");
    let mut geometry = IdentityCount::new("fullcone_decode_step");
    let mut inverse = IdentityCount::new("fullcone_phi_inverse");
    for _ in 0..samples {
        let c = random_fullcone(&mut rng, r, window);
        shift.record(fullcone_phi(&c.step()) == fullcone_phi(&c).shift_step(-1));
        geometry.record(c.step().decode() == c.decode().image(r as i64));
        inverse.record(fullcone_phi_inverse(r, &fullcone_phi(&c))? == c);
    }
    let span = (15 / r).max(1) as i64;
    let slots: Vec<(u32, i64)> = (0..span).flat_map(|n| (0..r).map(move |i| (i, n - span / 2))).collect();
    let mut bijective = IdentityCount::new("fullcone_phi_bijective");
    let mut seen = BTreeSet::new();
    for mask in 0..1u64 << slots.len() {
        let code = FullConeCode::new(
            r,
            slots
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &s)| s),
        )?;
        let seq = fullcone_phi(&code);
        let fresh = seen.insert(format!("{seq:?}"));
        bijective.record(fresh && fullcone_phi_inverse(r, &seq)? == code);
    }
    Ok(vec![shift, geometry, inverse, bijective])
}

fn run_coding(c: &CodingConfig) -> Result<Outcome> {
    let counts = match c.construction {
        CodingConstruction::Phi2f => {
            let m = MorseSmaleCircleMap::preserving(c.pairs, c.amplitude)?;
            vec![check_phi_2f(&m, c.r as usize, c.window, c.samples, c.seed)?]
        }
        CodingConstruction::Sq => check_sq(c.r, c.window, c.samples, c.seed),
        CodingConstruction::Cone => vec![check_cone(c.window, c.samples, c.seed)],
        CodingConstruction::FiniteMap => {
            let m = MorseSmaleCircleMap::preserving(c.pairs, c.amplitude)?;
            let coding = FiniteMapCoding::circle(&m, c.r as usize, c.window)?;
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let extra: Vec<f64> = (0..c.samples).map(|_| rng.gen_range(0.0..1.0)).collect();
            let check = check_finite_map_coding(&m, &coding, &extra);
            let mut injective = IdentityCount::new("finite_map_phi_injective");
            let mut seen = BTreeSet::new();
            for x in coding.domain() {
                injective.record(seen.insert(format!("{:?}", coding.phi(x))));
            }
            vec![
                IdentityCount {
                    identity: "finite_map_phi_step".into(),
                    checked: check.checked,
                    passed: check.passed,
                },
                injective,
            ]
        }
    };
    identity_outcome(counts)
}

fn c_sigma_pairwise(k: u32, n: usize) -> Result<Table> {
    let ws = words(k, n);
    let orbits: Vec<Vec<Subtree>> = ws
        .iter()
        .map(|w| build_c_sigma(k, w).map(|t| (0..n as i64).map(|j| t.image(-j)).collect()))
        .collect::<Result<_>>()?;
    let mut t = Table::new("pairwise", &["word_a", "word_b", "distance"]);
    let fmt = |w: &[u32]| w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("");
    for i in 0..ws.len() {
        for j in i + 1..ws.len() {
            let d = orbits[i]
                .iter()
                .zip(&orbits[j])
                .map(|(a, b)| hausdorff_subtrees(a, b))
                .fold(0.0, f64::max);
            t.push(row![fmt(&ws[i]), fmt(&ws[j]), d]);
        }
    }
    Ok(t)
}

fn run_dendrite(c: &DendriteConfig) -> Result<Outcome> {
    match c.mode {
        DendriteMode::Csigma => {
            let cert = verify_c_sigma_separation(c.k, c.n, c.delta)?;
            let mut t = Table::new(
                "separation",
                &["k", "n", "count", "pairs", "delta", "delta_star", "certified", "growth"],
            );
            t.push(row![
                cert.k,
                cert.n,
                cert.count,
                cert.pairs,
                cert.delta,
                cert.delta_star,
                cert.certified,
                cert.growth
            ]);
            let mut tables = vec![t];
            if c.pairwise_csv {
                tables.push(c_sigma_pairwise(c.k, c.n)?);
            }
            Ok(Outcome {
                status: expected_if(cert.certified),
                result: to_value(&cert),
                tables,
            })
        }
        DendriteMode::Fullcone => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let codes: Vec<FullConeCode> = (0..c.samples.min(200))
                .map(|_| random_fullcone(&mut rng, c.r, c.window))
                .collect();
            let reach = c.r as i64 * (c.window + 1);
            let floor = fullcone_separation_floor(-reach, reach);
            let mut t = Table::new("pairwise", &["a", "b", "distance"]);
            let mut min_distance = f64::INFINITY;
            for i in 0..codes.len() {
                for j in i + 1..codes.len() {
                    if codes[i] == codes[j] {
                        continue;
                    }
                    let d = hausdorff_subtrees(&codes[i].decode(), &codes[j].decode());
                    min_distance = min_distance.min(d);
                    if c.pairwise_csv {
                        t.push(row![i, j, d]);
                    }
                }
            }
            let ok = min_distance >= floor;
            let tables = if c.pairwise_csv { vec![t] } else { vec![] };
            Ok(Outcome {
                status: expected_if(ok),
                result: json!({ "codes": codes.len(), "floor": floor, "min_distance": min_distance, "separated": ok }),
                tables,
            })
        }
        DendriteMode::Conjugacy => identity_outcome(check_fullcone(c.r, c.window, c.samples, c.seed)?),
    }
}

fn run_sphere(c: &SphereConfig) -> Result<Outcome> {
    match c.mode {
        SphereMode::Periodic => {
            let detour = if c.detour_vertices == 2 {
                vec![(c.x, 0.0), (c.x * 0.5f64.powi(c.period as i32), 0.0)]
            } else {
                semicircle_detour(c.x, c.period, c.detour_vertices)
            };
            let mut t = Table::new("periodic", &["window", "defect", "error_bound", "double_defect"]);
            let mut last = None;
            for w in (1..=c.window).filter(|w| w % 5 == 0 || *w == c.window) {
                let r = build_periodic_continuum(c.period, &detour, w)?;
                t.push(row![w, r.defect.value, r.defect.error_bound, r.double_defect.value]);
                last = Some(r);
            }
            let r = last.ok_or_else(|| Error::Config("window must be positive".into()))?;
            let ok = r.defect.upper() <= c.defect_tolerance;
            let result = json!({
                "period": c.period, "window": c.window, "defect": r.defect, "double_defect": r.double_defect,
                "pieces": r.continuum.pieces.len(), "tolerance": c.defect_tolerance,
            });
            Ok(Outcome {
                status: expected_if(ok),
                result,
                tables: vec![t],
            })
        }
        SphereMode::Homoclinic => {
            let r = build_homoclinic_witness((c.x, 0.0), (c.x, c.beta_height), c.window)?;
            let mut t = Table::new("homoclinic", &["n", "to_spine", "approximant", "approximant_return"]);
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            for row in &r.rows {
                t.push(vec![
                    row.n.to_string(),
                    row.to_spine.to_string(),
                    opt(row.approximant),
                    opt(row.approximant_return),
                ]);
            }
            let w = c.window as i64;
            let end = |n: i64| r.rows.iter().find(|row| row.n == n).expect("window rows");
            let decays = [
                end(w).to_spine,
                end(-w).to_spine,
                end(w).approximant.unwrap_or(0.0),
                end(w).approximant_return.unwrap_or(0.0),
            ]
            .iter()
            .all(|&d| d < c.decay_tolerance);
            let ok = decays && r.recurrence_floor >= c.recurrence_floor;
            Ok(Outcome {
                status: expected_if(ok),
                result: to_value(&r),
                tables: vec![t],
            })
        }
        SphereMode::Conjugacy => {
            let h = CombConjugacy::new(c.x, c.beta_height)?;
            let r = special_dendrite_conjugacy(&h, c.mesh_points, c.mesh_window, c.seed)?;
            let mut t = Table::new("moduli", &["at", "radius", "modulus", "points"]);
            for m in &r.moduli {
                t.push(row![m.at, m.radius, m.modulus, m.points]);
            }
            Ok(Outcome {
                status: expected_if(r.residual <= c.residual_tolerance),
                result: to_value(&r),
                tables: vec![t],
            })
        }
        SphereMode::Nonshadowing => {
            let candidates = candidate_family();
            let f = sphere_nonshadowing_certificate(c.epsilon, c.delta, c.window, c.theta, &candidates)?;
            let audit = audit_sphere_failures(c.delta, c.epsilon, &candidates, &f.records, c.audit_samples, c.seed)?;
            let mut t = Table::new(
                "candidates",
                &["index", "family", "reason", "failing_index", "distance"],
            );
            for r in &f.records {
                let idx = r.failing_index.map_or(String::new(), |i| i.to_string());
                let family = to_value(&r.family);
                let reason = to_value(&r.reason);
                t.push(row![
                    r.index,
                    family.as_str().unwrap_or(""),
                    reason.as_str().unwrap_or(""),
                    idx,
                    r.distance
                ]);
            }
            let ok = f.report.verdict == Verdict::Falsified && audit.all_passed();
            let result = json!({
                "report": f.report, "theta": f.theta, "sweep_eta": f.sweep_eta, "max_gap": f.max_gap, "audit": audit,
            });
            Ok(Outcome {
                status: expected_if(ok),
                result,
                tables: vec![t],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in_and_unknown_fields_fail() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "shadow", "mode": "verify"}"#).unwrap();
        let ExperimentConfig::Shadow(s) = &c else { panic!() };
        assert_eq!(s.epsilon, 0.1);
        assert_eq!(c.name(), "shadow-verify");
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"experiment": "shadow", "mode": "verify", "epsilom": 0.1}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"experiment": "nope"}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"experiment": "entropy", "ns": [3, 2]}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn effective_config_round_trips() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "sphere", "mode": "conjugacy", "seed": 4}"#).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert_eq!(c.clone().with_seed(9).seed(), 9);
        assert_ne!(
            Provenance::of(&c).unwrap().config_sha256,
            Provenance::of(&c.with_seed(9)).unwrap().config_sha256
        );
    }

    #[test]
    fn every_listed_mode_parses() {
        for (kind, modes) in EXPERIMENTS {
            let key = match *kind {
                "recurrence" | "coding" => "construction",
                "entropy" => "system",
                _ => "mode",
            };
            for mode in *modes {
                let text = format!(r#"{{"experiment": "{kind}", "{key}": "{mode}"}}"#);
                let c = ExperimentConfig::from_json(&text).unwrap();
                assert_eq!(c.name(), format!("{kind}-{mode}"));
            }
        }
    }

    #[test]
    fn zero_budget_is_inconclusive() {
        let c =
            ExperimentConfig::from_json(r#"{"experiment": "entropy", "system": "circle", "budget": 0, "samples": 50}"#)
                .unwrap();
        let o = c.run().unwrap();
        assert_eq!(o.status, Status::Inconclusive);
        assert_eq!(o.result["partial"], true);
    }

    #[test]
    fn small_runs_reach_their_verdicts() {
        for text in [
            r#"{"experiment": "shadow", "mode": "verify"}"#,
            r#"{"experiment": "shadow", "mode": "falsify-cf", "grid": 0.02, "candidate_csv": false, "audit_samples": 10}"#,
            r#"{"experiment": "recurrence", "construction": "fixed-continua", "pairs": 2, "amplitude": 0.05}"#,
            r#"{"experiment": "coding", "construction": "sq", "samples": 50}"#,
            r#"{"experiment": "coding", "construction": "phi2f", "samples": 50}"#,
            r#"{"experiment": "dendrite", "mode": "conjugacy", "samples": 50, "r": 2}"#,
            r#"{"experiment": "dendrite", "mode": "csigma", "pairwise_csv": true}"#,
            r#"{"experiment": "sphere", "mode": "conjugacy", "mesh_points": 100}"#,
        ] {
            let o = ExperimentConfig::from_json(text).unwrap().run().unwrap();
            assert_eq!(o.status, Status::Expected, "{text}");
        }
    }

    #[test]
    fn histogram_counts_indices() {
        let t = failure_histogram([Some(0), Some(-2), Some(0), None].into_iter());
        assert_eq!(t.rows, vec![row!["", 1], row![-2, 1], row![0, 2]]);
    }
}
