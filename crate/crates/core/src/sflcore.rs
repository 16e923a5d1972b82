//! Certified partitions, equivariant spectral flow and the Morse oracle.
//!
//! The partition search works for any [`SpectralModel`]: something that
//! can be sampled at a parameter value, has a known Lipschitz bound on its
//! sorted eigenvalues and (optionally) a level above which nothing may be
//! chosen. Operator paths and the Maslov window operator both fit.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouprep::{self, OrthogonalAction, RepError, VirtualRep};
use crate::linalg::{self, Mat};
use crate::operators::{self, Cluster, OperatorError, OperatorPath, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SflError {
    #[error("endpoint at lambda={t} is not invertible: eigenvalue {eigenvalue:e} (threshold {tol:e})")]
    EndpointNotInvertible { t: f64, eigenvalue: f64, tol: f64 },
    #[error("certification failed on [{left}, {right}] after {depth} bisections")]
    CertificationFailed { left: f64, right: f64, depth: usize },
    #[error("path is not equivariant at lambda={t}: commutator norm {norm:e} exceeds {tol:e}")]
    NotEquivariant { t: f64, norm: f64, tol: f64 },
    #[error("dimension mismatch: path has dimension {path}, action has dimension {action}")]
    DimMismatch { path: usize, action: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Rep(#[from] RepError),
}

impl From<linalg::LinalgError> for SflError {
    fn from(e: linalg::LinalgError) -> Self {
        SflError::Operator(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SflOptions {
    pub tol: Tolerances,
    pub max_depth: usize,
    pub margin_floor: f64,
    /// Extra bisections forced below every accepted segment.
    pub refine: usize,
}

impl Default for SflOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), max_depth: 40, margin_floor: 1e-7, refine: 0 }
    }
}

/// Clustered spectrum of a model at one parameter value.
#[derive(Debug, Clone)]
pub struct Sample {
    pub clusters: Vec<Cluster>,
    pub tol_cluster: f64,
    pub tol_invert: f64,
    /// `1 + ||block||`, used to scale absolute slack.
    pub scale: f64,
}

impl Sample {
    fn nearest_zero(&self) -> Option<f64> {
        self.clusters.iter().map(|c| c.value).min_by(|a, b| a.abs().total_cmp(&b.abs()))
    }

    fn count_in(&self, a: f64) -> usize {
        self.clusters.iter().filter(|c| c.value.abs() <= a).map(Cluster::multiplicity).sum()
    }

    /// Frame of the eigenvectors with eigenvalue in `[0, a]`. Clusters
    /// within `tol_cluster` of zero count as nonnegative.
    fn frame_nonneg_below(&self, a: f64, rows: usize) -> Mat {
        let picked: Vec<&Mat> = self
            .clusters
            .iter()
            .filter(|c| c.value >= -self.tol_cluster && c.value < a)
            .map(|c| &c.vectors)
            .collect();
        if picked.is_empty() {
            Mat::zeros(rows, 0)
        } else {
            linalg::hstack(&picked)
        }
    }
}

/// A one-parameter family of self-adjoint operators whose discrete
/// spectrum can be sampled.
pub trait SpectralModel {
    /// Bound on the Lipschitz constant of every sorted eigenvalue.
    fn lipschitz(&self) -> f64;
    /// Levels must stay strictly below this value (essential spectrum or a
    /// window edge).
    fn ceiling(&self) -> Option<f64>;
    /// Dimension of the space the sample frames live in.
    fn frame_dim(&self) -> usize;
    fn sample(&self, t: f64) -> Result<Sample, SflError>;
    /// Largest commutator norm with the action at `t`, and the allowed bound.
    fn equivariance_defect(&self, t: f64, action: &OrthogonalAction) -> Result<(f64, f64), SflError>;
}

/// An operator path viewed as a spectral model.
pub struct PathModel<'a> {
    pub path: &'a OperatorPath,
    pub tol: Tolerances,
}

impl SpectralModel for PathModel<'_> {
    fn lipschitz(&self) -> f64 {
        self.path.lipschitz()
    }

    fn ceiling(&self) -> Option<f64> {
        (self.path.tails().count() > 0).then_some(1.0)
    }

    fn frame_dim(&self) -> usize {
        self.path.dim()
    }

    fn sample(&self, t: f64) -> Result<Sample, SflError> {
        let op = self.path.evaluate(t)?;
        let spectrum = operators::block_spectrum(&op, &self.tol)?;
        Ok(Sample {
            clusters: spectrum.clusters,
            tol_cluster: spectrum.tol_cluster,
            tol_invert: self.tol.invert * op.scale(),
            scale: op.scale(),
        })
    }

    fn equivariance_defect(&self, t: f64, action: &OrthogonalAction) -> Result<(f64, f64), SflError> {
        let op = self.path.evaluate(t)?;
        let norm = operators::check_equivariance(&op, action)?;
        Ok((norm, self.tol.equivariance * op.scale()))
    }
}

/// Knots `0 = t_0 < ... < t_N = 1`, one level and one evidence margin per
/// segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedPartition {
    pub knots: Vec<f64>,
    pub levels: Vec<f64>,
    pub margins: Vec<f64>,
}

impl CertifiedPartition {
    pub fn segments(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub interval: (f64, f64),
    pub segment: usize,
    pub class: VirtualRep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SflReport {
    pub sfl: i64,
    pub sfl_g: VirtualRep,
    pub partition: CertifiedPartition,
    pub contributions: Vec<VirtualRep>,
    pub crossings: Vec<Crossing>,
    pub certified: bool,
}

// Fractions tried, in order, when splitting a segment. The first one whose
// knot spectrum stays clear of zero wins.
const SPLIT_FRACTIONS: [f64; 9] = [0.5, 0.382, 0.618, 0.3, 0.7, 0.45, 0.55, 0.4, 0.6];

/// Spectra sampled during a partition search, keyed by parameter value.
pub struct SampleCache<'m, M: SpectralModel + ?Sized> {
    model: &'m M,
    samples: RefCell<HashMap<u64, std::rc::Rc<Sample>>>,
}

impl<'m, M: SpectralModel + ?Sized> SampleCache<'m, M> {
    pub fn new(model: &'m M) -> Self {
        Self { model, samples: RefCell::new(HashMap::new()) }
    }

    pub fn get(&self, t: f64) -> Result<std::rc::Rc<Sample>, SflError> {
        if let Some(s) = self.samples.borrow().get(&t.to_bits()) {
            return Ok(s.clone());
        }
        let s = std::rc::Rc::new(self.model.sample(t)?);
        self.samples.borrow_mut().insert(t.to_bits(), s.clone());
        Ok(s)
    }
}

struct Certificate {
    level: f64,
    margin: f64,
}

// Weyl tubes around the midpoint spectrum, folded onto [0, inf).
fn folded_tubes(mid: &Sample, radius: f64) -> Vec<(f64, f64)> {
    let mut tubes: Vec<(f64, f64)> = mid
        .clusters
        .iter()
        .map(|c| {
            let lo = c.min() - radius;
            let hi = c.max() + radius;
            if lo <= 0.0 && hi >= 0.0 {
                (0.0, hi.max(-lo))
            } else {
                (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()))
            }
        })
        .collect();
    tubes.sort_by(|a, b| a.0.total_cmp(&b.0));
    tubes
}

// Certify one segment against its midpoint spectrum, or explain why not.
fn certify_segment<M: SpectralModel + ?Sized>(
    cache: &SampleCache<'_, M>,
    l: f64,
    r: f64,
    margin_floor: f64,
) -> Result<Option<Certificate>, SflError> {
    let c = 0.5 * (l + r);
    let mid = cache.get(c)?;
    let h = 0.5 * (r - l);
    let lip = cache.model.lipschitz();
    // slack for rounding in the eigensolver and the Lipschitz estimate
    let radius = lip * h * (1.0 + 1e-12) + 1e-12 * mid.scale;
    let tubes = folded_tubes(&mid, radius);
    let top = tubes.iter().fold(0.0f64, |acc, t| acc.max(t.1));
    let ceiling = cache.model.ceiling();
    let cap = ceiling.unwrap_or(2.0 * top + 1.0);

    // gaps of [0, cap] minus the tubes
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    let mut cursor = 0.0f64;
    for &(lo, hi) in &tubes {
        if lo > cursor {
            gaps.push((cursor, lo.min(cap)));
        }
        cursor = cursor.max(hi);
        if cursor >= cap {
            break;
        }
    }
    if cursor < cap {
        gaps.push((cursor, cap));
    }
    let best = gaps
        .iter()
        .filter(|g| g.1 > g.0)
        .fold(None::<(f64, f64)>, |best, &g| match best {
            Some(b) if b.1 - b.0 >= g.1 - g.0 => Some(b),
            _ => Some(g),
        });
    let Some((g0, g1)) = best else { return Ok(None) };
    let half = 0.5 * (g1 - g0);
    if half <= margin_floor {
        return Ok(None);
    }
    let level = g0 + half;

    // the rank of the spectral projection of [-a, a] must agree at both
    // ends and the middle
    let left = cache.get(l)?;
    let right = cache.get(r)?;
    let n_mid = mid.count_in(level);
    if left.count_in(level) != n_mid || right.count_in(level) != n_mid {
        return Ok(None);
    }
    // knots must be clear of both the level and zero, so that membership
    // in [0, a] is unambiguous there
    for s in [&left, &right] {
        let near = |x: f64| s.clusters.iter().any(|c| (c.value.abs() - x).abs() <= s.tol_cluster);
        if near(level) || near(0.0) {
            return Ok(None);
        }
    }

    let mut margin = tubes
        .iter()
        .map(|&(lo, hi)| if level < lo { lo - level } else { level - hi })
        .fold(f64::INFINITY, f64::min);
    if let Some(ceil) = ceiling {
        margin = margin.min(ceil - level);
    }
    if !margin.is_finite() {
        margin = level;
    }
    Ok(Some(Certificate { level, margin }))
}

fn split_point<M: SpectralModel + ?Sized>(cache: &SampleCache<'_, M>, l: f64, r: f64) -> Result<f64, SflError> {
    let mut best = (0.5 * (l + r), -1.0f64);
    for f in SPLIT_FRACTIONS {
        let t = l + f * (r - l);
        if t <= l || t >= r {
            continue;
        }
        let s = cache.get(t)?;
        let clearance = s.nearest_zero().map_or(f64::INFINITY, f64::abs);
        if clearance > 100.0 * s.tol_cluster {
            return Ok(t);
        }
        if clearance > best.1 {
            best = (t, clearance);
        }
    }
    Ok(best.0)
}

/// Require invertible endpoints.
pub fn check_endpoints<M: SpectralModel + ?Sized>(cache: &SampleCache<'_, M>) -> Result<(), SflError> {
    for t in [0.0, 1.0] {
        let s = cache.get(t)?;
        if let Some(e) = s.nearest_zero() {
            if e.abs() <= s.tol_invert {
                return Err(SflError::EndpointNotInvertible { t, eigenvalue: e, tol: s.tol_invert });
            }
        }
    }
    Ok(())
}

/// Recursive bisection search for a certified partition.
pub fn partition_model<M: SpectralModel + ?Sized>(
    cache: &SampleCache<'_, M>,
    opts: &SflOptions,
) -> Result<CertifiedPartition, SflError> {
    check_endpoints(cache)?;
    let mut out = CertifiedPartition { knots: vec![0.0], levels: Vec::new(), margins: Vec::new() };
    // (left, right, depth, forced extra bisections); processed left to right
    let mut stack = vec![(0.0f64, 1.0f64, 0usize, opts.refine)];
    while let Some((l, r, depth, extra)) = stack.pop() {
        let cert = certify_segment(cache, l, r, opts.margin_floor)?;
        let accept = cert.is_some() && extra == 0;
        if accept {
            let cert = cert.expect("checked");
            out.knots.push(r);
            out.levels.push(cert.level);
            out.margins.push(cert.margin);
            continue;
        }
        if depth >= opts.max_depth + opts.refine {
            return Err(SflError::CertificationFailed { left: l, right: r, depth });
        }
        let next_extra = if cert.is_some() { extra - 1 } else { extra };
        let m = split_point(cache, l, r)?;
        stack.push((m, r, depth + 1, next_extra));
        stack.push((l, m, depth + 1, next_extra));
    }
    log::debug!("certified partition with {} segments", out.segments());
    Ok(out)
}

/// Certified partition of an operator path.
pub fn find_partition(path: &OperatorPath, opts: &SflOptions) -> Result<CertifiedPartition, SflError> {
    let model = PathModel { path, tol: opts.tol };
    partition_model(&SampleCache::new(&model), opts)
}

/// Check a given partition against the model and return its margins.
pub fn verify_partition<M: SpectralModel + ?Sized>(
    model: &M,
    partition: &CertifiedPartition,
) -> Result<Vec<f64>, SflError> {
    let k = &partition.knots;
    if k.len() != partition.levels.len() + 1 || k.first() != Some(&0.0) || k.last() != Some(&1.0) {
        return Err(SflError::InvalidPartition("knots must run from 0 to 1 with one level per segment".into()));
    }
    let cache = SampleCache::new(model);
    let mut margins = Vec::with_capacity(partition.levels.len());
    for (i, &a) in partition.levels.iter().enumerate() {
        let (l, r) = (k[i], k[i + 1]);
        if l >= r || a <= 0.0 {
            return Err(SflError::InvalidPartition(format!("segment {i} is empty or has a nonpositive level")));
        }
        let mid = cache.get(0.5 * (l + r))?;
        let radius = model.lipschitz() * 0.5 * (r - l) * (1.0 + 1e-12) + 1e-12 * mid.scale;
        let mut margin = folded_tubes(&mid, radius)
            .iter()
            .map(|&(lo, hi)| if a < lo { lo - a } else if a > hi { a - hi } else { -1.0 })
            .fold(f64::INFINITY, f64::min);
        if let Some(ceil) = model.ceiling() {
            margin = margin.min(ceil - a);
        }
        if margin <= 0.0 {
            return Err(SflError::InvalidPartition(format!("level {a} on [{l}, {r}] is not certified")));
        }
        margins.push(if margin.is_finite() { margin } else { a });
    }
    Ok(margins)
}

/// RO(G)-valued spectral flow of a spectral model.
pub fn flow_model<M: SpectralModel + ?Sized>(
    model: &M,
    action: &OrthogonalAction,
    opts: &SflOptions,
) -> Result<SflReport, SflError> {
    if action.dim() != model.frame_dim() {
        return Err(SflError::DimMismatch { path: model.frame_dim(), action: action.dim() });
    }
    let cache = SampleCache::new(model);
    let partition = partition_model(&cache, opts)?;

    for (i, w) in partition.knots.windows(2).enumerate() {
        let mut ts = vec![w[0], 0.5 * (w[0] + w[1])];
        if i + 2 == partition.knots.len() {
            ts.push(w[1]);
        }
        for t in ts {
            let (norm, tol) = model.equivariance_defect(t, action)?;
            if norm > tol {
                return Err(SflError::NotEquivariant { t, norm, tol });
            }
        }
    }

    let table = action.table();
    let dim = model.frame_dim();
    let mut total = table.zero();
    let mut contributions = Vec::with_capacity(partition.segments());
    let mut crossings = Vec::new();
    for (i, &a) in partition.levels.iter().enumerate() {
        let (l, r) = (partition.knots[i], partition.knots[i + 1]);
        let at = |t: f64| -> Result<VirtualRep, SflError> {
            let frame = cache.get(t)?.frame_nonneg_below(a, dim);
            Ok(grouprep::class_of_subspace(action, &frame, grouprep::DEFAULT_TOL_INV)?)
        };
        let contribution = at(r)?.checked_sub(&at(l)?)?;
        if !contribution.is_zero() {
            crossings.push(Crossing { interval: (l, r), segment: i, class: contribution.clone() });
        }
        total = total.checked_add(&contribution)?;
        contributions.push(contribution);
    }
    let sfl = grouprep::forgetful(&total, table);
    Ok(SflReport { sfl, sfl_g: total, partition, contributions, crossings, certified: true })
}

/// Equivariant spectral flow of an operator path.
pub fn sfl_g(path: &OperatorPath, action: &OrthogonalAction, opts: &SflOptions) -> Result<SflReport, SflError> {
    flow_model(&PathModel { path, tol: opts.tol }, action, opts)
}

/// Classical spectral flow by counting eigenvalues on the certified
/// partition, with no group action involved.
pub fn sfl_classical(path: &OperatorPath, opts: &SflOptions) -> Result<i64, SflError> {
    let model = PathModel { path, tol: opts.tol };
    let cache = SampleCache::new(&model);
    let partition = partition_model(&cache, opts)?;
    let mut total = 0i64;
    for (i, &a) in partition.levels.iter().enumerate() {
        let count = |t: f64| -> Result<i64, SflError> {
            let s = cache.get(t)?;
            Ok(s.clusters
                .iter()
                .filter(|c| c.value >= -s.tol_cluster && c.value < a)
                .map(|c| c.multiplicity() as i64)
                .sum())
        };
        total += count(partition.knots[i + 1])? - count(partition.knots[i])?;
    }
    Ok(total)
}

/// `[E^-(L_0)] - [E^-(L_1)]` for the path compressed to `m` tail coordinates.
pub fn morse_oracle_sfl_g(
    path: &OperatorPath,
    action: &OrthogonalAction,
    m: usize,
    tol: &Tolerances,
) -> Result<VirtualRep, SflError> {
    if action.dim() != path.dim() {
        return Err(SflError::DimMismatch { path: path.dim(), action: action.dim() });
    }
    let compressed = path.compress(m);
    let extended = action.extend_trivial(compressed.dim() - path.dim());
    let class = |t: f64| -> Result<VirtualRep, SflError> {
        let op = compressed.evaluate(t)?;
        operators::morse_class(&op, &extended, tol).map_err(|e| match e {
            OperatorError::NotInvertible { eigenvalue, tol } => SflError::EndpointNotInvertible { t, eigenvalue, tol },
            other => other.into(),
        })
    };
    Ok(class(0.0)?.checked_sub(&class(1.0)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axiom {
    Zero,
    Concatenation,
    Loop,
    Additivity,
    Homotopy,
    Conjugation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub path_index: usize,
    pub passed: bool,
    /// Present on failure: the two sides that should agree, or the error.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn count(&self, axiom: Axiom) -> (usize, usize) {
        let of: Vec<&AxiomCheck> = self.checks.iter().filter(|c| c.axiom == axiom).collect();
        (of.iter().filter(|c| c.passed).count(), of.len())
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Run the axiom suite on each path. Randomness (reparametrizations and
/// conjugating unitaries) comes from `seed`.
pub fn verify_axioms(
    paths: &[OperatorPath],
    action: &OrthogonalAction,
    seed: u64,
    opts: &SflOptions,
) -> AxiomReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport::default();
    for (i, p) in paths.iter().enumerate() {
        for (axiom, outcome) in axioms_for_path(p, action, &mut rng, opts) {
            let (passed, witness) = match outcome {
                Ok(None) => (true, None),
                Ok(Some(w)) => (false, Some(w)),
                Err(e) => (false, Some(format!("error: {e}"))),
            };
            report.checks.push(AxiomCheck { axiom, path_index: i, passed, witness });
        }
    }
    report
}

type Outcome = Result<Option<String>, SflError>;

fn compare(lhs: &VirtualRep, rhs: &VirtualRep, what: &str) -> Option<String> {
    (lhs != rhs).then(|| format!("{what}: {lhs} != {rhs}"))
}

fn axioms_for_path(
    p: &OperatorPath,
    action: &OrthogonalAction,
    rng: &mut rand_chacha::ChaCha8Rng,
    opts: &SflOptions,
) -> Vec<(Axiom, Outcome)> {
    let flow = |q: &OperatorPath, act: &OrthogonalAction| sfl_g(q, act, opts).map(|r| r.sfl_g);
    let base = match flow(p, action) {
        Ok(v) => v,
        Err(e) => {
            let msg = format!("error on the input path: {e}");
            return [Axiom::Zero, Axiom::Concatenation, Axiom::Loop, Axiom::Additivity, Axiom::Homotopy, Axiom::Conjugation]
                .into_iter()
                .map(|a| (a, Ok(Some(msg.clone()))))
                .collect();
        }
    };
    let zero = action.table().zero();
    let mut out = Vec::new();

    // (Z) L_t = (1 + t) L_0 is invertible throughout
    out.push((Axiom::Zero, (|| -> Outcome {
        let start = p.evaluate(0.0)?;
        let q = OperatorPath::affine(start.block().clone(), start.block().clone(), p.tails())?;
        Ok(compare(&flow(&q, action)?, &zero, "flow of an invertible path"))
    })()));

    // (C) p followed by the straight line back to p(0)
    let closing = (|| -> Result<OperatorPath, SflError> {
        Ok(OperatorPath::segment(&p.evaluate(1.0)?, &p.evaluate(0.0)?)?)
    })();
    out.push((Axiom::Concatenation, (|| -> Outcome {
        let q = closing.clone()?;
        let joined = p.concatenate(&q)?;
        let sum = base.checked_add(&flow(&q, action)?)?;
        Ok(compare(&flow(&joined, action)?, &sum, "flow(p * q) vs flow(p) + flow(q)"))
    })()));

    out.push((Axiom::Loop, (|| -> Outcome {
        let lp = p.concatenate(&p.reverse())?;
        Ok(compare(&flow(&lp, action)?, &zero, "flow(p * reverse(p))"))
    })()));

    // (A) p (+) q with the doubled action
    out.push((Axiom::Additivity, (|| -> Outcome {
        let q = closing.clone()?;
        let both = p.direct_sum(&q)?;
        let doubled = action.direct_sum(action)?;
        let sum = base.checked_add(&flow(&q, action)?)?;
        Ok(compare(&flow(&both, &doubled)?, &sum, "flow(p + q) vs flow(p) + flow(q)"))
    })()));

    // (H) a random reparametrization and the midpoint of the straight
    // homotopy to it share the endpoints of p
    out.push((Axiom::Homotopy, (|| -> Outcome {
        let re = crate::sampling::reparametrize(p, rng)?;
        if let Some(w) = compare(&flow(&re, action)?, &base, "reparametrized path") {
            return Ok(Some(w));
        }
        let knots = operators::merge_knots(&p.knots(), &re.knots());
        let samples = knots
            .iter()
            .map(|&t| Ok((p.block_at(t)? + re.block_at(t)?) * 0.5))
            .collect::<Result<Vec<_>, SflError>>()?;
        let mid = OperatorPath::piecewise_linear(knots, samples, p.tails())?;
        Ok(compare(&flow(&mid, action)?, &base, "homotopy midpoint"))
    })()));

    // (O) conjugation by a random equivariant orthogonal map
    out.push((Axiom::Conjugation, (|| -> Outcome {
        let u = crate::sampling::random_equivariant_orthogonal(action, rng)?;
        let q = p.conjugate(&u)?;
        Ok(compare(&flow(&q, action)?, &base, "conjugated path"))
    })()));
    out
}
