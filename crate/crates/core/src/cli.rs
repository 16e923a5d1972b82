//! Job documents, validation and report generation for the `sflow` binary.
//!
//! Input and output are JSON. A job names a group, an optional action
//! (given by generator matrices keyed by element index), a path and its
//! tails, a command and options. Reports carry the result, the certified
//! partition and an `error` field that is `null` on success.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::cogredient::{self, CogredientError};
use crate::grouprep::{self, FiniteGroup, GroupData, GroupPreset, Irrep, OrthogonalAction, RealCharacterTable, VirtualRep};
use crate::linalg::{self, Mat};
use crate::maslov::{self, MaslovError};
use crate::operators::{FsComponent, OperatorError, OperatorPath, Tails, Tolerances};
use crate::sampling::{self, PathShape};
use crate::sflcore::{self, Axiom, CertifiedPartition, SflError, SflOptions, SflReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_NOT_INVERTIBLE: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;
pub const EXIT_EQUIVARIANCE: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Sfl,
    Maslov,
    Cogredient,
    Oracle,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default = "default_command")]
    pub command: Command,
    pub group: GroupSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    pub path: PathSpec,
    #[serde(default)]
    pub tail: Tails,
    #[serde(default)]
    pub options: JobOptions,
}

fn default_command() -> Command {
    Command::Sfl
}

/// Either `{"preset": ..., "n": ...}` or an explicit table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mult_table: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_table: Option<Vec<IrrepSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrrepSpec {
    pub name: String,
    pub degree: usize,
    pub schur: u32,
    pub values: Vec<f64>,
}

/// Generator images keyed by element index. Omitted elements follow from
/// the multiplication table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSpec {
    Affine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    PiecewiseLinear {
        knots: Vec<f64>,
        samples: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobOptions {
    pub tol_cluster: f64,
    pub tol_invert: f64,
    pub tol_equivariance: f64,
    pub max_depth: usize,
    pub margin_floor: f64,
    /// Extra forced bisections below each certified segment.
    pub refine: usize,
    /// Tail truncation for the Morse oracle.
    pub m: usize,
    pub seed: u64,
    /// Sample count for the cogredient parametrix.
    pub samples: usize,
    /// Random paths added to the job path by `verify`.
    pub random_paths: usize,
}

impl Default for JobOptions {
    fn default() -> Self {
        let tol = Tolerances::default();
        let sfl = SflOptions::default();
        Self {
            tol_cluster: tol.cluster,
            tol_invert: tol.invert,
            tol_equivariance: tol.equivariance,
            max_depth: sfl.max_depth,
            margin_floor: sfl.margin_floor,
            refine: 0,
            m: 0,
            seed: 0,
            samples: 64,
            random_paths: 19,
        }
    }
}

impl JobOptions {
    pub fn sfl_options(&self) -> SflOptions {
        SflOptions {
            tol: Tolerances { cluster: self.tol_cluster, invert: self.tol_invert, equivariance: self.tol_equivariance },
            max_depth: self.max_depth,
            margin_floor: self.margin_floor,
            refine: self.refine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dimension mismatch: {field} has dimension {got}, expected {expected}")]
    DimensionMismatch { field: String, expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A job with its group, action and path built and checked.
#[derive(Debug, Clone)]
pub struct Job {
    pub spec: JobSpec,
    pub data: Arc<GroupData>,
    pub action: OrthogonalAction,
    pub path: OperatorPath,
}

/// Parse and validate a job document.
pub fn parse_job(text: &str) -> Result<JobSpec, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let spec: JobSpec = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        if inner.is_data() {
            CliError::Schema(format!("{}: {}", e.path(), strip_position(&inner.to_string())))
        } else {
            CliError::Parse { line: inner.line(), column: inner.column(), message: strip_position(&inner.to_string()) }
        }
    })?;
    de.end().map_err(|e| CliError::Parse { line: e.line(), column: e.column(), message: strip_position(&e.to_string()) })?;
    build_job(&spec)?;
    Ok(spec)
}

fn strip_position(msg: &str) -> String {
    match msg.find(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Serialize a job document; `parse_job(&emit_job(j)) == Ok(j)`.
pub fn emit_job(spec: &JobSpec) -> String {
    serde_json::to_string_pretty(spec).expect("job documents always serialize")
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<Mat, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Schema(format!("{field} is not a square matrix")));
    }
    let m = linalg::from_rows(rows);
    let asym = (&m - m.transpose()).norm();
    if asym > 1e-10 * (1.0 + m.norm()) {
        return Err(CliError::Schema(format!("{field} is not symmetric")));
    }
    Ok(m)
}

fn build_group(spec: &GroupSpec) -> Result<GroupData, CliError> {
    fn rep(field: &'static str) -> impl Fn(grouprep::RepError) -> CliError {
        move |e| CliError::Schema(format!("{field}: {e}"))
    }
    if let Some(name) = &spec.preset {
        if spec.order.is_some() || spec.mult_table.is_some() || spec.classes.is_some() || spec.char_table.is_some() {
            return Err(CliError::Schema("group: preset groups take no explicit table".into()));
        }
        let need_n = || spec.n.ok_or_else(|| CliError::Schema(format!("group.n is required for preset {name}")));
        let preset = match name.as_str() {
            "trivial" => GroupPreset::Trivial,
            "cyclic" => GroupPreset::Cyclic(need_n()?),
            "dihedral" => GroupPreset::Dihedral(need_n()?),
            other => return Err(CliError::Schema(format!("group.preset: unknown preset {other:?}"))),
        };
        return GroupData::preset(preset).map_err(rep("group"));
    }
    let mult = spec.mult_table.clone().ok_or_else(|| CliError::Schema("group: need preset or mult_table".into()))?;
    if let Some(order) = spec.order {
        if order != mult.len() {
            return Err(CliError::Schema(format!("group.order is {order} but mult_table has {} rows", mult.len())));
        }
    }
    let group = FiniteGroup::from_table(mult, spec.classes.clone()).map_err(rep("group.mult_table"))?;
    let irreps = spec
        .char_table
        .as_ref()
        .ok_or_else(|| CliError::Schema("group.char_table is required for explicit groups".into()))?
        .iter()
        .map(|ir| Irrep { name: ir.name.clone(), degree: ir.degree, schur_norm: ir.schur, values: ir.values.clone() })
        .collect();
    let table = RealCharacterTable::new(&group, irreps).map_err(rep("group.char_table"))?;
    Ok(GroupData { group, table })
}

fn build_path(spec: &PathSpec, tails: Tails) -> Result<OperatorPath, CliError> {
    match spec {
        PathSpec::Affine { a, b } => {
            let a = matrix(a, "path.A")?;
            let b = matrix(b, "path.B")?;
            if a.nrows() != b.nrows() {
                return Err(CliError::DimensionMismatch { field: "path.B".into(), expected: a.nrows(), got: b.nrows() });
            }
            OperatorPath::affine(a, b, tails).map_err(|e| CliError::Schema(format!("path: {e}")))
        }
        PathSpec::PiecewiseLinear { knots, samples } => {
            let mats = samples
                .iter()
                .enumerate()
                .map(|(i, s)| matrix(s, &format!("path.samples[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = mats.first() {
                if let Some((i, m)) = mats.iter().enumerate().find(|(_, m)| m.nrows() != first.nrows()) {
                    return Err(CliError::DimensionMismatch {
                        field: format!("path.samples[{i}]"),
                        expected: first.nrows(),
                        got: m.nrows(),
                    });
                }
            }
            OperatorPath::piecewise_linear(knots.clone(), mats, tails).map_err(|e| CliError::Schema(format!("path: {e}")))
        }
    }
}

fn build_action(spec: Option<&ActionSpec>, data: Arc<GroupData>, dim: usize) -> Result<OrthogonalAction, CliError> {
    let Some(spec) = spec else {
        return Ok(OrthogonalAction::trivial(data, dim));
    };
    let mut generators = Vec::with_capacity(spec.matrices.len());
    for (i, (key, rows)) in spec.matrices.iter().enumerate() {
        let field = format!("action.generators[{i}]");
        let g: usize = key
            .parse()
            .map_err(|_| CliError::Schema(format!("action.matrices key {key:?} is not an element index")))?;
        if g >= data.group.order() {
            return Err(CliError::Schema(format!("action.matrices key {g} exceeds the group order")));
        }
        if rows.len() != dim {
            return Err(CliError::DimensionMismatch { field, expected: dim, got: rows.len() });
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(CliError::Schema(format!("{field} is not a square matrix")));
        }
        let m = linalg::from_rows(rows);
        if linalg::orthonormality_defect(&m) > grouprep::ORTHOGONALITY_TOL {
            return Err(CliError::Schema(format!("{field} not orthogonal")));
        }
        generators.push((g, m));
    }
    OrthogonalAction::from_generators(data, dim, &generators).map_err(|e| CliError::Schema(format!("action: {e}")))
}

/// Build group, action and path from a job document.
pub fn build_job(spec: &JobSpec) -> Result<Job, CliError> {
    let data = Arc::new(build_group(&spec.group)?);
    let path = build_path(&spec.path, spec.tail)?;
    let action = build_action(spec.action.as_ref(), data.clone(), path.dim())?;
    let o = &spec.options;
    if !(o.tol_cluster > 0.0 && o.tol_invert > 0.0 && o.tol_equivariance > 0.0 && o.margin_floor > 0.0) {
        return Err(CliError::Schema("options: tolerances must be positive".into()));
    }
    if spec.command == Command::Cogredient && o.samples < 2 {
        return Err(CliError::Schema("options.samples must be at least 2".into()));
    }
    Ok(Job { spec: spec.clone(), data, action, path })
}

/// A virtual representation rendered as an ordered `{irrep: multiplicity}`
/// map, in character-table order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap(pub Vec<(String, i64)>);

impl From<&VirtualRep> for ClassMap {
    fn from(v: &VirtualRep) -> Self {
        ClassMap(v.entries().map(|(n, c)| (n.to_string(), c)).collect())
    }
}

impl Serialize for ClassMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingOut {
    pub interval: [f64; 2],
    pub class: ClassMap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorOut {
    pub code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CogredientOut {
    /// `+1` or `-1` for a parametrix, absent for the pointwise section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<i8>,
    pub samples: usize,
    pub anchors: Vec<f64>,
    pub max_residual: f64,
    pub max_equivariance: f64,
    #[serde(rename = "transformed_sfl_G", skip_serializing_if = "Option::is_none")]
    pub transformed_sfl_g: Option<ClassMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomOut {
    pub axiom: Axiom,
    pub passed: usize,
    pub total: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub sfl: Option<i64>,
    #[serde(rename = "sfl_G")]
    pub sfl_g: Option<ClassMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<[i64; 2]>,
    pub partition: Option<CertifiedPartition>,
    pub crossings: Vec<CrossingOut>,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cogredient: Option<CogredientOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<Vec<AxiomOut>>,
    pub error: Option<ErrorOut>,
}

impl Report {
    fn empty(command: Option<Command>) -> Self {
        Self {
            command,
            sfl: None,
            sfl_g: None,
            phi: None,
            partition: None,
            crossings: Vec::new(),
            certified: false,
            cogredient: None,
            axioms: None,
            error: None,
        }
    }

    pub fn failure(command: Option<Command>, code: i32, message: String) -> Self {
        Self { error: Some(ErrorOut { code, message }), ..Self::empty(command) }
    }

    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(EXIT_OK, |e| e.code)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    fn fill_flow(&mut self, r: &SflReport, data: &GroupData) {
        self.sfl = Some(r.sfl);
        self.sfl_g = Some((&r.sfl_g).into());
        self.phi = grouprep::phi_z2(&r.sfl_g, data).ok().map(|(a, b)| [a, b]);
        self.partition = Some(r.partition.clone());
        self.crossings = r
            .crossings
            .iter()
            .map(|c| CrossingOut { interval: [c.interval.0, c.interval.1], class: (&c.class).into() })
            .collect();
        self.certified = r.certified;
    }
}

/// A failure during a run, with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub code: i32,
    pub message: String,
}

impl From<CliError> for RunError {
    fn from(e: CliError) -> Self {
        RunError { code: EXIT_INVALID_INPUT, message: e.to_string() }
    }
}

fn operator_code(e: &OperatorError) -> i32 {
    match e {
        OperatorError::NotInvertible { .. } => EXIT_NOT_INVERTIBLE,
        OperatorError::NotEquivariant { .. } => EXIT_EQUIVARIANCE,
        OperatorError::DimMismatch { .. } => EXIT_INVALID_INPUT,
        _ => EXIT_INTERNAL,
    }
}

impl From<SflError> for RunError {
    fn from(e: SflError) -> Self {
        let code = match &e {
            SflError::EndpointNotInvertible { .. } => EXIT_NOT_INVERTIBLE,
            SflError::CertificationFailed { .. } => EXIT_CERTIFICATION,
            SflError::NotEquivariant { .. } => EXIT_EQUIVARIANCE,
            SflError::DimMismatch { .. } => EXIT_INVALID_INPUT,
            SflError::Operator(op) => operator_code(op),
            _ => EXIT_INTERNAL,
        };
        RunError { code, message: e.to_string() }
    }
}

impl From<MaslovError> for RunError {
    fn from(e: MaslovError) -> Self {
        match e {
            MaslovError::Sfl(inner) => inner.into(),
            MaslovError::NotFiniteDim => RunError { code: EXIT_INVALID_INPUT, message: e.to_string() },
            MaslovError::Operator(ref op) => RunError { code: operator_code(op), message: e.to_string() },
            other => RunError { code: EXIT_INTERNAL, message: other.to_string() },
        }
    }
}

impl From<CogredientError> for RunError {
    fn from(e: CogredientError) -> Self {
        let code = match &e {
            CogredientError::CoverFailure(_) => EXIT_CERTIFICATION,
            CogredientError::NotFsPlus(_) | CogredientError::NotFsi(_) | CogredientError::TooFewSamples(_) => {
                EXIT_INVALID_INPUT
            }
            CogredientError::Operator(op) => operator_code(op),
            _ => EXIT_INTERNAL,
        };
        RunError { code, message: e.to_string() }
    }
}

fn internal(message: String) -> RunError {
    RunError { code: EXIT_INTERNAL, message }
}

/// Run a validated job. Errors are reported inside the returned report.
pub fn run(spec: &JobSpec) -> Report {
    let command = Some(spec.command);
    let outcome = build_job(spec).map_err(RunError::from).and_then(|job| execute(&job));
    match outcome {
        Ok(report) => report,
        Err(e) => {
            log::error!("{}", e.message);
            Report::failure(command, e.code, e.message)
        }
    }
}

/// Parse, apply overrides, run. Returns the report; its exit code is
/// [`Report::exit_code`].
pub fn run_text(text: &str, command: Option<Command>, seed: Option<u64>) -> Report {
    match parse_job(text) {
        Ok(mut spec) => {
            if let Some(c) = command {
                spec.command = c;
            }
            if let Some(s) = seed {
                spec.options.seed = s;
            }
            run(&spec)
        }
        Err(e) => {
            log::error!("{e}");
            Report::failure(command, EXIT_INVALID_INPUT, e.to_string())
        }
    }
}

fn execute(job: &Job) -> Result<Report, RunError> {
    let opts = job.spec.options.sfl_options();
    let mut report = Report::empty(Some(job.spec.command));
    log::info!("running {:?} on a path of dimension {}", job.spec.command, job.path.dim());
    match job.spec.command {
        Command::Sfl => {
            let r = sflcore::sfl_g(&job.path, &job.action, &opts)?;
            let classical = sflcore::sfl_classical(&job.path, &opts)?;
            if classical != r.sfl {
                return Err(internal(format!(
                    "forgetful image {} disagrees with the eigenvalue count {classical}",
                    r.sfl
                )));
            }
            report.fill_flow(&r, &job.data);
        }
        Command::Maslov => {
            let r = maslov::maslov_index_g(&job.path, &job.action, &opts)?;
            report.fill_flow(&r, &job.data);
        }
        Command::Oracle => {
            let v = sflcore::morse_oracle_sfl_g(&job.path, &job.action, job.spec.options.m, &opts.tol)?;
            report.sfl = Some(grouprep::forgetful(&v, &job.data.table));
            report.sfl_g = Some((&v).into());
            report.phi = grouprep::phi_z2(&v, &job.data).ok().map(|(a, b)| [a, b]);
        }
        Command::Cogredient => {
            let r = sflcore::sfl_g(&job.path, &job.action, &opts)?;
            report.fill_flow(&r, &job.data);
            report.cogredient = Some(run_cogredient(job, &opts, &r)?);
        }
        Command::Verify => {
            let r = sflcore::sfl_g(&job.path, &job.action, &opts)?;
            report.fill_flow(&r, &job.data);
            let (axioms, failure) = run_verify(job, &opts)?;
            report.axioms = Some(axioms);
            if let Some(msg) = failure {
                return Err(internal(msg));
            }
        }
    }
    Ok(report)
}

fn run_cogredient(job: &Job, opts: &SflOptions, original: &SflReport) -> Result<CogredientOut, RunError> {
    let samples = job.spec.options.samples;
    let equivariance_tol = job.spec.options.tol_equivariance;
    match job.path.component() {
        FsComponent::FsPlus | FsComponent::FsMinus => {
            let par = cogredient::parametrix(&job.path, samples)?;
            let mut max_equivariance = 0.0f64;
            for m in &par.m {
                max_equivariance = max_equivariance.max(job.action.commutator_norm(m).map_err(|e| internal(e.to_string()))?);
            }
            if max_equivariance > equivariance_tol {
                return Err(RunError {
                    code: EXIT_EQUIVARIANCE,
                    message: format!("parametrix commutator norm {max_equivariance:e} exceeds {equivariance_tol:e}"),
                });
            }
            let transformed = par.transformed_path(&job.path)?;
            let t = sflcore::sfl_g(&transformed, &job.action, opts)?;
            if t.sfl_g != original.sfl_g {
                return Err(internal(format!("transformed path has flow {} instead of {}", t.sfl_g, original.sfl_g)));
            }
            Ok(CogredientOut {
                sign: Some(par.sign),
                samples,
                anchors: par.anchors.clone(),
                max_residual: par.max_relative_residual(&job.path)?,
                max_equivariance,
                transformed_sfl_g: Some((&t.sfl_g).into()),
            })
        }
        FsComponent::FsIndefinite => {
            let mut max_residual = 0.0f64;
            let mut max_equivariance = 0.0f64;
            for i in 0..samples {
                let t = i as f64 / (samples - 1) as f64;
                let s = job.path.evaluate(t.min(1.0)).map_err(SflError::from)?;
                let sec = cogredient::pointwise_section(&s, &opts.tol)?;
                let rebuilt = &sec.m * sec.q.block() * sec.m.transpose() + &sec.k;
                let residual = linalg::spectral_norm(&(rebuilt - s.block())).map_err(|e| internal(e.to_string()))?;
                max_residual = max_residual.max(residual / s.scale());
                for x in [sec.q.block(), &sec.m, &sec.k] {
                    max_equivariance =
                        max_equivariance.max(job.action.commutator_norm(x).map_err(|e| internal(e.to_string()))?);
                }
            }
            if max_equivariance > equivariance_tol {
                return Err(RunError {
                    code: EXIT_EQUIVARIANCE,
                    message: format!("section commutator norm {max_equivariance:e} exceeds {equivariance_tol:e}"),
                });
            }
            Ok(CogredientOut {
                sign: None,
                samples,
                anchors: Vec::new(),
                max_residual,
                max_equivariance,
                transformed_sfl_g: None,
            })
        }
        FsComponent::FiniteDim => Err(RunError {
            code: EXIT_INVALID_INPUT,
            message: "cogredient needs a path with essential spectrum (set tail.plus and/or tail.minus)".into(),
        }),
    }
}

fn run_verify(job: &Job, opts: &SflOptions) -> Result<(Vec<AxiomOut>, Option<String>), RunError> {
    let seed = job.spec.options.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = vec![job.path.clone()];
    for i in 0..job.spec.options.random_paths {
        let shape = if i % 2 == 0 { PathShape::Affine } else { PathShape::PiecewiseLinear };
        let p = sampling::random_path(&job.action, job.path.tails(), shape, &mut rng).map_err(SflError::from)?;
        paths.push(p);
    }
    let report = sflcore::verify_axioms(&paths, &job.action, seed, opts);
    let axioms = [Axiom::Zero, Axiom::Concatenation, Axiom::Loop, Axiom::Additivity, Axiom::Homotopy, Axiom::Conjugation];
    let out: Vec<AxiomOut> = axioms
        .iter()
        .map(|&a| {
            let (passed, total) = report.count(a);
            let failures = report
                .failures()
                .filter(|c| c.axiom == a)
                .map(|c| format!("path {}: {}", c.path_index, c.witness.as_deref().unwrap_or("")))
                .collect();
            AxiomOut { axiom: a, passed, total, failures }
        })
        .collect();
    let failure = report
        .failures()
        .next()
        .map(|c| format!("axiom {:?} failed on path {}: {}", c.axiom, c.path_index, c.witness.as_deref().unwrap_or("")));
    Ok((out, failure))
}
