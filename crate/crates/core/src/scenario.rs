//! Scenario configurations and the reports produced by running them.
//!
//! A scenario names a catalog geometry, a conformal field and a list of
//! suites. Running it samples the chart with a seeded generator, evaluates
//! every requested identity at each point and aggregates the residuals into a
//! [`Report`]. Identical scenarios give byte-identical reports.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{expected_lambda_for_field, get_entry, CatalogEntry, ENTRY_NAMES};
use crate::conformal::{conformality_residual, sigma_hessian_residual, split_frame, ConformalField};
use crate::error::Error;
use crate::hypersurface::UMBILIC_TOL;
use crate::jets::MAX_VARS;
use crate::semiriem::validate_conformal_matrix;
use crate::soliton::{
    concircular_fit, psi_density, stationary_scan, tashiro_classify, ConcircularFit, ConcircularSample, FieldFrame,
    StationaryEvidence, StationaryScan, Verdict, WarpProfile, CLASSIFY_TOL,
};

/// Probe pairs per point for the conformality check.
pub const CONFORMALITY_PROBES: usize = 8;

pub const MAX_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Conformality,
    Lemmas,
    Soliton,
    Concircular,
    Classify,
    Codazzi,
    Gauss,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Conformality,
        Suite::Lemmas,
        Suite::Soliton,
        Suite::Concircular,
        Suite::Classify,
        Suite::Codazzi,
        Suite::Gauss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Conformality => "conformality",
            Suite::Lemmas => "lemmas",
            Suite::Soliton => "soliton",
            Suite::Concircular => "concircular",
            Suite::Classify => "classify",
            Suite::Codazzi => "codazzi",
            Suite::Gauss => "gauss",
        }
    }

    pub fn checks(self) -> &'static [Check] {
        use Check::*;
        match self {
            Suite::Conformality => &[ConformalityField, ConformalitySigmaHessian],
            Suite::Lemmas => &[LemmaL31, LemmaL32, LemmaL33, LemmaL34],
            Suite::Soliton => &[SolitonResidual, SolitonLambda, SolitonSplit],
            Suite::Concircular => &[ConcircularFit, ConcircularK, ConcircularB, ConcircularBSpread],
            Suite::Classify => &[ClassifyUmbilicity, ClassifyVerdict],
            Suite::Codazzi => &[CodazziResidual],
            Suite::Gauss => &[GaussContracted, GaussScalar],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One residual reported inside a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    ConformalityField,
    ConformalitySigmaHessian,
    SolitonResidual,
    SolitonLambda,
    SolitonSplit,
    LemmaL31,
    LemmaL32,
    LemmaL33,
    LemmaL34,
    ConcircularFit,
    ConcircularK,
    ConcircularB,
    ConcircularBSpread,
    ClassifyUmbilicity,
    ClassifyVerdict,
    CodazziResidual,
    GaussContracted,
    GaussScalar,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::ConformalityField => "conformality.field",
            Check::ConformalitySigmaHessian => "conformality.sigma_hessian",
            Check::SolitonResidual => "soliton.residual",
            Check::SolitonLambda => "soliton.lambda",
            Check::SolitonSplit => "soliton.split",
            Check::LemmaL31 => "lemmas.l31",
            Check::LemmaL32 => "lemmas.l32",
            Check::LemmaL33 => "lemmas.l33",
            Check::LemmaL34 => "lemmas.l34",
            Check::ConcircularFit => "concircular.fit",
            Check::ConcircularK => "concircular.k",
            Check::ConcircularB => "concircular.b",
            Check::ConcircularBSpread => "concircular.b_spread",
            Check::ClassifyUmbilicity => "classify.umbilicity",
            Check::ClassifyVerdict => "classify.verdict",
            Check::CodazziResidual => "codazzi.residual",
            Check::GaussContracted => "gauss.contracted",
            Check::GaussScalar => "gauss.scalar",
        }
    }

    /// The identity the residual measures, written in plain ASCII.
    pub fn identity(self) -> &'static str {
        match self {
            Check::ConformalityField => "L_V gbar = 2 sigma gbar",
            Check::ConformalitySigmaHessian => "Hess sigma = -c sigma gbar",
            Check::SolitonResidual => "1/2 L_V g + Ric = lambda g",
            Check::SolitonLambda => "lambda = (S + div V)/n equals the closed form",
            Check::SolitonSplit => "Vbar = V + eps_N C N",
            Check::LemmaL31 => "L_V g = 2 sigma g + 2 eps_N C A",
            Check::LemmaL32 => "Ric=-psi g - eps_N C A",
            Check::LemmaL33 => "grad C = -(nablabar_N Vbar)^T - A V",
            Check::LemmaL34 => {
                "Hess C = -(c C + N sigma) g + sigma A + eps_N C A^2 - nabla_V A - (A nabla V + (A nabla V)^t)"
            }
            Check::ConcircularFit => "Hess C = (b - k C) g",
            Check::ConcircularK => "k = c + eps_N H^2",
            Check::ConcircularB => "b = -(N sigma + eps_N sigma H)",
            Check::ConcircularBSpread => "N sigma + eps_N sigma H is constant",
            Check::ClassifyUmbilicity => "A = eps_N H I",
            Check::ClassifyVerdict => "Tashiro case from (k, b) matches the declared case",
            Check::CodazziResidual => "(nabla_X A) Y = (nabla_Y A) X",
            Check::GaussContracted => "Ric = c (n-1) g + n H A - eps_N A^2",
            Check::GaussScalar => "S / (n (n-1)) = c + eps_N H^2",
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Check::ConformalityField | Check::ConformalitySigmaHessian => 1e-8,
            Check::SolitonResidual | Check::SolitonLambda => 1e-7,
            Check::SolitonSplit => 1e-10,
            Check::LemmaL31 | Check::LemmaL32 | Check::LemmaL33 | Check::LemmaL34 => 1e-6,
            Check::ConcircularFit | Check::ConcircularK | Check::ConcircularB => 1e-6,
            Check::ConcircularBSpread => 1e-8,
            Check::ClassifyUmbilicity => UMBILIC_TOL,
            Check::ClassifyVerdict => 0.0,
            Check::CodazziResidual | Check::GaussContracted | Check::GaussScalar => 1e-7,
        }
    }

    pub fn suite(self) -> Suite {
        Suite::ALL
            .into_iter()
            .find(|s| s.checks().contains(&self))
            .expect("every check belongs to a suite")
    }
}

/// Field coefficients as they appear in a configuration. Omitted parts are zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

impl FieldSpec {
    pub fn from_field(field: &ConformalField) -> Self {
        let b = field.b.matrix();
        Self {
            a: Some(field.a.clone()),
            beta: field.beta,
            b: Some(b.row_iter().map(|r| r.iter().copied().collect()).collect()),
            gamma: Some(field.gamma.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: String,
    pub n: usize,
    #[serde(default)]
    pub field: FieldSpec,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub tolerance_overrides: BTreeMap<String, f64>,
    pub suites: Vec<Suite>,
}

/// A validation problem located by its path inside the configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(Issue),
    #[error("invalid scenario: {}", .0.iter().map(Issue::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Issue>),
}

impl ScenarioError {
    pub fn issues(&self) -> Vec<Issue> {
        match self {
            ScenarioError::Parse(i) => vec![i.clone()],
            ScenarioError::Invalid(v) => v.clone(),
        }
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> Issue {
    Issue {
        path: path.into(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "(root)".to_string() } else { path };
            ScenarioError::Parse(issue(path, e.inner().to_string()))
        })
    }

    /// All suites on the canonical field of a catalog entry.
    pub fn demo(geometry: &str, n: usize, seed: u64, samples: usize) -> Result<Self, ScenarioError> {
        let entry = get_entry(geometry, n).map_err(|e| ScenarioError::Invalid(vec![issue("geometry", e.to_string())]))?;
        Ok(Self {
            geometry: entry.name.to_string(),
            n,
            field: FieldSpec::from_field(&entry.canonical_field),
            samples,
            seed,
            tolerance_overrides: BTreeMap::new(),
            suites: Suite::ALL.to_vec(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    /// Tolerance after overrides; a check name beats its suite name.
    pub fn tolerance(&self, check: Check) -> f64 {
        self.tolerance_overrides
            .get(check.name())
            .or_else(|| self.tolerance_overrides.get(check.suite().name()))
            .copied()
            .unwrap_or_else(|| check.default_tolerance())
    }

    pub fn wants(&self, suite: Suite) -> bool {
        self.suites.contains(&suite)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.prepare().map(|_| ())
    }

    fn prepare(&self) -> Result<(CatalogEntry, ConformalField), ScenarioError> {
        let mut issues = Vec::new();
        if !ENTRY_NAMES.contains(&self.geometry.as_str()) {
            issues.push(issue(
                "geometry",
                format!("unknown catalog entry `{}`, expected one of: {}", self.geometry, ENTRY_NAMES.join(", ")),
            ));
        }
        if !(2..=MAX_VARS).contains(&self.n) {
            issues.push(issue("n", format!("dimension must lie in 2..={MAX_VARS}, got {}", self.n)));
        }
        let needs_fit = self.wants(Suite::Concircular) || self.wants(Suite::Classify);
        if self.samples == 0 || self.samples > MAX_SAMPLES {
            issues.push(issue("samples", format!("must lie in 1..={MAX_SAMPLES}, got {}", self.samples)));
        } else if needs_fit && self.samples < 3 {
            issues.push(issue("samples", "the concircular fit needs at least 3 samples"));
        }
        if self.suites.is_empty() {
            issues.push(issue("suites", "at least one suite is required"));
        }
        for (i, s) in self.suites.iter().enumerate() {
            if self.suites[..i].contains(s) {
                issues.push(issue(format!("suites[{i}]"), format!("duplicate suite `{s}`")));
            }
        }
        let all_checks = Suite::ALL.iter().flat_map(|s| s.checks());
        for (key, value) in &self.tolerance_overrides {
            let path = format!("tolerance_overrides.{key}");
            let known = Suite::ALL.iter().any(|s| s.name() == key) || all_checks.clone().any(|c| c.name() == key);
            if !known {
                issues.push(issue(path, "not a suite or check name"));
            } else if !value.is_finite() || *value < 0.0 {
                issues.push(issue(path, format!("tolerance must be finite and non-negative, got {value}")));
            }
        }
        let entry = if issues.iter().any(|i| i.path == "geometry" || i.path == "n") {
            None
        } else {
            get_entry(&self.geometry, self.n).ok()
        };
        let Some(entry) = entry else {
            return Err(ScenarioError::Invalid(issues));
        };
        let ambient = entry.chart.ambient.clone();
        let m = ambient.container_dim();
        let vector = |name: &str, v: &Option<Vec<f64>>, issues: &mut Vec<Issue>| -> Vec<f64> {
            match v {
                None => vec![0.0; m],
                Some(v) if v.len() != m => {
                    issues.push(issue(format!("field.{name}"), format!("expected {m} entries, got {}", v.len())));
                    vec![0.0; m]
                }
                Some(v) => v.clone(),
            }
        };
        let a = vector("a", &self.field.a, &mut issues);
        let gamma = vector("gamma", &self.field.gamma, &mut issues);
        if ambient.is_quadric() {
            for (i, c) in a.iter().enumerate() {
                if *c != 0.0 {
                    issues.push(issue(format!("field.a[{i}]"), "must be zero on a quadric ambient"));
                }
            }
            if self.field.beta != 0.0 {
                issues.push(issue("field.beta", "must be zero on a quadric ambient"));
            }
        }
        let mut b = DMatrix::zeros(m, m);
        if let Some(rows) = &self.field.b {
            if rows.len() != m {
                issues.push(issue("field.B", format!("expected {m} rows, got {}", rows.len())));
            } else if let Some(i) = rows.iter().position(|r| r.len() != m) {
                issues.push(issue(
                    format!("field.B[{i}]"),
                    format!("expected {m} entries, got {}", rows[i].len()),
                ));
            } else {
                b = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
                let check = validate_conformal_matrix(&ambient.signature, &b).map_err(|e| {
                    ScenarioError::Invalid(vec![issue("field.B", e.to_string())])
                })?;
                for (j, k, r) in check.violations {
                    let message = if j == k {
                        format!("diagonal entries must vanish, got {}", b[(j, j)])
                    } else {
                        format!("eps_j b_jk + eps_k b_kj must vanish, got {r}")
                    };
                    issues.push(issue(format!("field.B[{j}][{k}]"), message));
                }
            }
        }
        if !issues.is_empty() {
            return Err(ScenarioError::Invalid(issues));
        }
        let field = ConformalField::new(ambient, a, self.field.beta, b, gamma)
            .map_err(|e| ScenarioError::Invalid(vec![issue("field", e.to_string())]))?;
        Ok((entry, field))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: &'static str,
    pub identity: &'static str,
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub status: Status,
    /// Points (or samples) that produced a residual.
    pub evaluated: usize,
    /// Points where evaluation raised a numerical error.
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub status: Status,
    pub checks: Vec<CheckReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                min: None,
                max: None,
                mean: None,
            };
        }
        Self {
            count: values.len(),
            min: Some(values.iter().copied().fold(f64::INFINITY, f64::min)),
            max: Some(values.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            mean: Some(values.iter().sum::<f64>() / values.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistics {
    pub lambda: Summary,
    pub psi: Summary,
    pub c: Summary,
    pub sigma: Summary,
    /// Fraction of points with `|ψ|` above the non-zero threshold.
    pub psi_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub umbilic: bool,
    pub fit: Option<ConcircularFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub label: Option<&'static str>,
    pub declared: Verdict,
    pub umbilic: bool,
    pub profile: WarpProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationaryScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub geometry: String,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub suites: Vec<Suite>,
    pub tolerance_overrides: BTreeMap<String, f64>,
    pub field: FieldSpec,
    /// Points where the frame itself could not be built.
    pub failed_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub run: RunInfo,
    pub suites: Vec<SuiteReport>,
    pub statistics: Statistics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concircular: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per check: `suite,max_residual,tolerance,pass`.
    pub fn to_csv_summary(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["suite", "max_residual", "tolerance", "pass"])
            .expect("write to memory");
        for s in &self.suites {
            for c in &s.checks {
                let pass = match c.status {
                    Status::Pass => "true",
                    Status::Fail => "false",
                    Status::NotApplicable => "n/a",
                };
                let max = c.max_residual.map(|v| format!("{v:e}")).unwrap_or_default();
                w.write_record([c.check, &max, &format!("{:e}", c.tolerance), pass])
                    .expect("write to memory");
            }
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
    }

    pub fn suite(&self, suite: Suite) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == suite)
    }

    pub fn check(&self, check: Check) -> Option<&CheckReport> {
        self.suite(check.suite())?.checks.iter().find(|c| c.check == check.name())
    }
}

#[derive(Debug, Default)]
struct PointEval {
    residuals: BTreeMap<Check, Result<f64, Error>>,
    frame_error: Option<Error>,
    lambda: Option<f64>,
    sigma: Option<f64>,
    c: Option<f64>,
    umbilic_deviation: Option<f64>,
    concircular: Option<Result<ConcircularSample, Error>>,
}

struct Context<'a> {
    scenario: &'a Scenario,
    entry: &'a CatalogEntry,
    field: &'a ConformalField,
}

impl Context<'_> {
    fn evaluate(&self, u: &[f64], probe_seed: u64) -> PointEval {
        let s = self.scenario;
        let chart = &self.entry.chart;
        let mut out = PointEval::default();
        if s.wants(Suite::Conformality) {
            let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
            let x = chart.point(u);
            out.residuals.insert(
                Check::ConformalityField,
                x.clone()
                    .and_then(|x| conformality_residual(self.field, &x, CONFORMALITY_PROBES, &mut rng)),
            );
            out.residuals.insert(
                Check::ConformalitySigmaHessian,
                x.and_then(|x| sigma_hessian_residual(self.field, &x)),
            );
        }
        if s.suites.iter().all(|x| *x == Suite::Conformality) {
            return out;
        }
        let ff = match FieldFrame::new(chart, self.field, u) {
            Ok(ff) => ff,
            Err(e) => {
                out.frame_error = Some(e);
                return out;
            }
        };
        let lambda = ff.lambda();
        out.lambda = lambda.as_ref().ok().copied();
        out.sigma = Some(ff.sigma());
        out.c = Some(ff.c());
        if s.wants(Suite::Soliton) {
            out.residuals.insert(
                Check::SolitonResidual,
                lambda.clone().and_then(|l| ff.soliton_residual(l)),
            );
            match expected_lambda_for_field(self.entry, self.field, u) {
                Ok(Some(expected)) => {
                    out.residuals
                        .insert(Check::SolitonLambda, lambda.clone().map(|l| (l - expected).abs()));
                }
                Ok(None) => {}
                Err(e) => {
                    out.residuals.insert(Check::SolitonLambda, Err(e));
                }
            }
            out.residuals
                .insert(Check::SolitonSplit, Ok(ff.split.sample(&ff.frame).reconstruction));
        }
        if s.wants(Suite::Lemmas) {
            out.residuals.insert(Check::LemmaL31, ff.lemma31());
            out.residuals
                .insert(Check::LemmaL32, lambda.clone().and_then(|l| ff.lemma32(l)));
            out.residuals.insert(Check::LemmaL33, ff.lemma33());
            out.residuals.insert(Check::LemmaL34, ff.lemma34());
        }
        if s.wants(Suite::Concircular) || s.wants(Suite::Classify) || s.wants(Suite::Gauss) {
            out.umbilic_deviation = Some(ff.frame.umbilicity().0);
        }
        if s.wants(Suite::Concircular) || s.wants(Suite::Classify) {
            out.concircular = Some(ff.concircular_sample());
        }
        if s.wants(Suite::Codazzi) {
            out.residuals.insert(Check::CodazziResidual, Ok(ff.frame.codazzi_residual()));
        }
        if s.wants(Suite::Gauss) {
            out.residuals.insert(Check::GaussContracted, Ok(ff.frame.gauss_residual()));
            out.residuals
                .insert(Check::GaussScalar, Ok(ff.frame.scalar_curvature_residual()));
        }
        out
    }
}

/// Stationary-scan resolution per chart dimension.
fn scan_cells(n: usize) -> usize {
    match n {
        2 => 12,
        3 => 6,
        _ => 4,
    }
}

fn status_for(max: Option<f64>, errors: usize, tolerance: f64) -> Status {
    match max {
        _ if errors > 0 => Status::Fail,
        None => Status::NotApplicable,
        Some(v) if v <= tolerance => Status::Pass,
        Some(_) => Status::Fail,
    }
}

fn point_check(scenario: &Scenario, check: Check, points: &[PointEval]) -> CheckReport {
    let mut max: Option<f64> = None;
    let mut evaluated = 0;
    let mut errors = 0;
    let mut first_error = None;
    for p in points {
        match (&p.frame_error, p.residuals.get(&check)) {
            (_, Some(Ok(v))) => {
                evaluated += 1;
                // NaN must not hide behind f64::max.
                max = Some(match max {
                    Some(m) if !v.is_nan() => m.max(*v),
                    Some(_) | None => *v,
                });
            }
            (_, Some(Err(e))) | (Some(e), None) => {
                errors += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
            (None, None) => {}
        }
    }
    let tolerance = scenario.tolerance(check);
    let max = max.map(|m| if m.is_nan() { f64::INFINITY } else { m });
    let status = match max {
        Some(m) if !m.is_finite() => Status::Fail,
        _ => status_for(max, errors, tolerance),
    };
    let note = first_error
        .map(|e| format!("first error: {e}"))
        .or_else(|| (check == Check::SolitonLambda && evaluated == 0).then(|| "no closed form covers this field".into()));
    CheckReport {
        check: check.name(),
        identity: check.identity(),
        max_residual: max.filter(|m| m.is_finite()),
        tolerance,
        status,
        evaluated,
        errors,
        note,
    }
}

fn single_check(scenario: &Scenario, check: Check, value: Option<f64>, evaluated: usize) -> CheckReport {
    let tolerance = scenario.tolerance(check);
    CheckReport {
        check: check.name(),
        identity: check.identity(),
        max_residual: value,
        tolerance,
        status: status_for(value, 0, tolerance),
        evaluated,
        errors: 0,
        note: None,
    }
}

fn not_applicable(mut report: CheckReport, note: impl Into<String>) -> CheckReport {
    report.status = Status::NotApplicable;
    report.note = Some(note.into());
    report
}

struct FitOutcome {
    umbilic: bool,
    max_deviation: Option<f64>,
    samples: usize,
    fit: Result<ConcircularFit, Error>,
}

fn fit_outcome(scenario: &Scenario, points: &[PointEval]) -> FitOutcome {
    let deviations: Vec<f64> = points.iter().filter_map(|p| p.umbilic_deviation).collect();
    let max_deviation = deviations.iter().copied().reduce(f64::max);
    let tol = scenario.tolerance(Check::ClassifyUmbilicity);
    let umbilic = !deviations.is_empty()
        && deviations.len() == points.len()
        && deviations.iter().all(|d| *d <= tol);
    let mut samples = Vec::with_capacity(points.len());
    let mut first_error = None;
    for p in points {
        match (&p.concircular, &p.frame_error) {
            (Some(Ok(s)), _) => samples.push(s.clone()),
            (Some(Err(e)), _) | (None, Some(e)) => {
                first_error.get_or_insert_with(|| e.clone());
            }
            (None, None) => {}
        }
    }
    let fit = match first_error {
        Some(e) => Err(e),
        None => concircular_fit(&samples),
    };
    FitOutcome {
        umbilic,
        max_deviation,
        samples: samples.len(),
        fit,
    }
}

fn concircular_checks(scenario: &Scenario, outcome: &FitOutcome) -> Vec<CheckReport> {
    let checks = Suite::Concircular.checks();
    let values: [Option<f64>; 4] = match &outcome.fit {
        Ok(f) => [
            Some(f.fit_residual),
            Some((f.k - f.k_expected).abs()),
            Some((f.b - f.b_expected).abs()),
            Some(f.b_spread),
        ],
        Err(_) => [None; 4],
    };
    checks
        .iter()
        .zip(values)
        .map(|(&check, value)| {
            let report = single_check(scenario, check, value, outcome.samples);
            match &outcome.fit {
                _ if !outcome.umbilic => not_applicable(report, "hypersurface is not umbilic"),
                Err(e @ Error::DegenerateFit { .. }) => not_applicable(report, e.to_string()),
                Err(e) => CheckReport {
                    status: Status::Fail,
                    note: Some(e.to_string()),
                    ..report
                },
                Ok(_) => report,
            }
        })
        .collect()
}

fn classify(
    entry: &CatalogEntry,
    field: &ConformalField,
    outcome: &FitOutcome,
) -> ClassificationReport {
    let mut report = ClassificationReport {
        verdict: Verdict::NotApplicable,
        label: None,
        declared: entry.classification,
        umbilic: outcome.umbilic,
        profile: entry.profile,
        stationary: None,
        note: None,
    };
    if !outcome.umbilic {
        report.note = Some("hypersurface is not umbilic".into());
        return report;
    }
    let fit = match &outcome.fit {
        Ok(f) => f,
        Err(e) => {
            report.note = Some(e.to_string());
            return report;
        }
    };
    let mut evidence = StationaryEvidence::None;
    if fit.k < -CLASSIFY_TOL {
        let chart = &entry.chart;
        let scan = stationary_scan(
            chart,
            |frame| Ok(split_frame(frame, field)?.c),
            scan_cells(entry.n),
            &chart.sample_box,
        );
        match scan {
            Ok(scan) => {
                evidence = scan.evidence;
                report.stationary = Some(scan);
            }
            Err(e) => {
                report.note = Some(format!("stationary scan failed: {e}"));
                evidence = StationaryEvidence::Unknown;
            }
        }
    }
    match tashiro_classify(fit.k, fit.b, evidence, entry.profile) {
        Ok(v) => {
            report.verdict = v;
            if let Verdict::Case(c) = v {
                report.label = Some(c.label());
            }
        }
        Err(e) => report.note = Some(e.to_string()),
    }
    report
}

fn classify_checks(scenario: &Scenario, outcome: &FitOutcome, class: &ClassificationReport) -> Vec<CheckReport> {
    let umbilicity = single_check(scenario, Check::ClassifyUmbilicity, outcome.max_deviation, outcome.samples);
    let umbilicity = if outcome.umbilic {
        umbilicity
    } else {
        not_applicable(umbilicity, "hypersurface is not umbilic and is excluded from the classification")
    };
    let mismatch = if class.verdict == class.declared { 0.0 } else { 1.0 };
    let verdict = single_check(scenario, Check::ClassifyVerdict, Some(mismatch), 1);
    let verdict = if class.verdict == Verdict::NotApplicable && class.declared == Verdict::NotApplicable {
        not_applicable(verdict, "classification does not apply")
    } else {
        verdict
    };
    vec![umbilicity, verdict]
}

fn suite_status(checks: &[CheckReport]) -> Status {
    if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else if checks.iter().any(|c| c.status == Status::Pass) {
        Status::Pass
    } else {
        Status::NotApplicable
    }
}

/// Validates and runs a scenario. Points are evaluated in parallel; the
/// report is assembled in a fixed order.
pub fn run_scenario(scenario: &Scenario) -> Result<Report, ScenarioError> {
    let (entry, field) = scenario.prepare()?;
    let chart = &entry.chart;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let points = chart.sample_points(&mut rng, scenario.samples);
    let probe_seeds: Vec<u64> = (0..points.len()).map(|_| rng.gen()).collect();
    let ctx = Context {
        scenario,
        entry: &entry,
        field: &field,
    };
    let evals: Vec<PointEval> = points
        .par_iter()
        .zip(probe_seeds.par_iter())
        .map(|(u, seed)| ctx.evaluate(u, *seed))
        .collect();

    let needs_fit = scenario.wants(Suite::Concircular) || scenario.wants(Suite::Classify);
    let outcome = needs_fit.then(|| fit_outcome(scenario, &evals));
    let classification = scenario
        .wants(Suite::Classify)
        .then(|| classify(&entry, &field, outcome.as_ref().expect("fit computed for classify")));
    let umbilic = evals
        .iter()
        .all(|p| p.umbilic_deviation.is_some_and(|d| d <= scenario.tolerance(Check::ClassifyUmbilicity)));

    let suites: Vec<SuiteReport> = scenario
        .suites
        .iter()
        .map(|&suite| {
            let checks = match suite {
                Suite::Concircular => concircular_checks(scenario, outcome.as_ref().expect("fit computed")),
                Suite::Classify => classify_checks(
                    scenario,
                    outcome.as_ref().expect("fit computed"),
                    classification.as_ref().expect("classification computed"),
                ),
                _ => suite
                    .checks()
                    .iter()
                    .map(|&c| {
                        let r = point_check(scenario, c, &evals);
                        if c == Check::GaussScalar && !umbilic {
                            not_applicable(r, "holds on umbilic hypersurfaces only")
                        } else {
                            r
                        }
                    })
                    .collect(),
            };
            SuiteReport {
                suite,
                status: suite_status(&checks),
                checks,
            }
        })
        .collect();

    let collect = |f: fn(&PointEval) -> Option<f64>| -> Vec<f64> { evals.iter().filter_map(f).collect() };
    let psis: Vec<f64> = evals
        .iter()
        .filter_map(|p| Some(p.sigma? - p.lambda?))
        .collect();
    let statistics = Statistics {
        lambda: Summary::of(&collect(|p| p.lambda)),
        psi: Summary::of(&psis),
        c: Summary::of(&collect(|p| p.c)),
        sigma: Summary::of(&collect(|p| p.sigma)),
        psi_density: (!psis.is_empty()).then(|| psi_density(&psis)),
    };
    let concircular = match (&outcome, scenario.wants(Suite::Concircular)) {
        (Some(o), true) => Some(FitReport {
            umbilic: o.umbilic,
            fit: o.fit.as_ref().ok().cloned(),
            error: o.fit.as_ref().err().map(|e| e.to_string()),
        }),
        _ => None,
    };
    let pass = suites.iter().all(|s| s.status != Status::Fail);
    Ok(Report {
        tool: "almost-soliton",
        version: env!("CARGO_PKG_VERSION"),
        run: RunInfo {
            geometry: entry.name.to_string(),
            n: scenario.n,
            seed: scenario.seed,
            samples: scenario.samples,
            suites: scenario.suites.clone(),
            tolerance_overrides: scenario.tolerance_overrides.clone(),
            field: FieldSpec::from_field(&field),
            failed_points: evals.iter().filter(|p| p.frame_error.is_some()).count(),
        },
        suites,
        statistics,
        concircular,
        classification,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_scenario() -> Scenario {
        Scenario::from_json(
            r#"{"geometry": "sphere", "n": 2, "field": {"gamma": [0, 0, 1]},
                "samples": 30, "seed": 42,
                "suites": ["conformality", "lemmas", "soliton", "concircular", "classify", "codazzi", "gauss"]}"#,
        )
        .unwrap()
    }

    #[test]
    fn sphere_runs_green_and_spherical() {
        let report = run_scenario(&sphere_scenario()).unwrap();
        for s in &report.suites {
            assert_eq!(s.status, Status::Pass, "{:?}", s);
        }
        let class = report.classification.as_ref().unwrap();
        assert_eq!(class.verdict, Verdict::Case(crate::soliton::TashiroCase::Spherical));
        assert!(report.pass);
    }

    #[test]
    fn report_is_deterministic() {
        let s = sphere_scenario();
        assert_eq!(run_scenario(&s).unwrap().to_json(), run_scenario(&s).unwrap().to_json());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = Scenario::from_json(
            r#"{"geometry": "sphere", "n": 2, "field": {"gama": [0,0,1]}, "samples": 3, "seed": 1, "suites": []}"#,
        )
        .unwrap_err();
        let issues = err.issues();
        assert!(issues[0].path.starts_with("field"), "{issues:?}");
        assert!(issues[0].message.contains("gama"));
    }

    #[test]
    fn bad_diagonal_names_the_entry() {
        let mut s = sphere_scenario();
        let mut b = vec![vec![0.0; 3]; 3];
        b[0][0] = 1.0;
        s.field.b = Some(b);
        let issues = run_scenario(&s).unwrap_err().issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].path, "field.B[0][0]");
    }

    #[test]
    fn other_validation_paths() {
        let mut s = sphere_scenario();
        s.samples = 2;
        s.tolerance_overrides.insert("lemma".into(), 1.0);
        s.field.gamma = Some(vec![1.0]);
        s.suites.push(Suite::Gauss);
        let paths: Vec<String> = s.validate().unwrap_err().issues().into_iter().map(|i| i.path).collect();
        assert_eq!(
            paths,
            ["samples", "suites[7]", "tolerance_overrides.lemma", "field.gamma"]
        );
        let mut q = Scenario::demo("latitude_sphere", 2, 1, 5).unwrap();
        q.field.beta = 1.0;
        assert_eq!(q.validate().unwrap_err().issues()[0].path, "field.beta");
        let mut g = sphere_scenario();
        g.geometry = "torus".into();
        assert_eq!(g.validate().unwrap_err().issues()[0].path, "geometry");
    }

    #[test]
    fn overrides_resolve_check_before_suite() {
        let mut s = sphere_scenario();
        s.tolerance_overrides.insert("lemmas".into(), 0.5);
        s.tolerance_overrides.insert("lemmas.l32".into(), 0.25);
        assert_eq!(s.tolerance(Check::LemmaL31), 0.5);
        assert_eq!(s.tolerance(Check::LemmaL32), 0.25);
        assert_eq!(s.tolerance(Check::CodazziResidual), 1e-7);
    }

    #[test]
    fn zero_tolerance_fails_lemmas_only() {
        let mut s = sphere_scenario();
        s.suites = vec![Suite::Codazzi, Suite::Lemmas];
        s.tolerance_overrides.insert("lemmas".into(), 0.0);
        let report = run_scenario(&s).unwrap();
        assert_eq!(report.suites[0].suite, Suite::Codazzi);
        assert_eq!(report.suites[1].status, Status::Fail);
        assert!(!report.pass);
    }

    #[test]
    fn saddle_is_excluded() {
        let mut s = Scenario::demo("saddle_graph", 2, 7, 20).unwrap();
        s.suites = vec![Suite::Concircular, Suite::Classify, Suite::Gauss];
        let report = run_scenario(&s).unwrap();
        let class = report.classification.as_ref().unwrap();
        assert_eq!(class.verdict, Verdict::NotApplicable);
        assert!(report.concircular.as_ref().unwrap().fit.is_some());
        for c in &report.suite(Suite::Concircular).unwrap().checks {
            assert_eq!(c.status, Status::NotApplicable);
        }
        assert_eq!(report.check(Check::GaussContracted).unwrap().status, Status::Pass);
        assert_eq!(report.check(Check::GaussScalar).unwrap().status, Status::NotApplicable);
        assert!(report.pass);
    }

    #[test]
    fn csv_summary_has_one_row_per_check() {
        let mut s = sphere_scenario();
        s.suites = vec![Suite::Gauss, Suite::Codazzi];
        let csv = run_scenario(&s).unwrap().to_csv_summary();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "suite,max_residual,tolerance,pass");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("gauss.contracted,"));
        assert!(lines[1].ends_with(",1e-7,true"));
    }

    #[test]
    fn every_check_has_a_suite() {
        for s in Suite::ALL {
            for c in s.checks() {
                assert_eq!(c.suite(), s);
                assert!(c.name().starts_with(s.name()));
            }
        }
        assert_eq!(Check::LemmaL32.identity(), "Ric=-psi g - eps_N C A");
    }
}
