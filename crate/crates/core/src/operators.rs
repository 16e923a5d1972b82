//! The operator model and paths of operators.
//!
//! A [`Cps`] is a symmetric finite block together with formal essential
//! spectrum tails at +1 and/or -1: the operator `block + (+I) + (-I)` on a
//! Hilbert space whose tail summands are infinite dimensional. Tails carry
//! the trivial group action.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouprep::{self, OrthogonalAction, RepError, VirtualRep};
use crate::linalg::{self, LinalgError, Mat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("parameter {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("interval [{a}, {b}] contains the essential spectrum value {tail}")]
    InfiniteRank { a: f64, b: f64, tail: f64 },
    #[error("eigenvalue {eigenvalue} lies within {tol:e} of the interval endpoint {endpoint}")]
    BoundaryHit { eigenvalue: f64, endpoint: f64, tol: f64 },
    #[error("operator is not invertible: eigenvalue {eigenvalue:e} (threshold {tol:e})")]
    NotInvertible { eigenvalue: f64, tol: f64 },
    #[error("operator has an infinite dimensional essential part")]
    NotFiniteDim,
    #[error("operator is not equivariant: commutator norm {norm:e} exceeds {tol:e}")]
    NotEquivariant { norm: f64, tol: f64 },
    #[error("path endpoints do not match (distance {0:e})")]
    EndpointMismatch(f64),
    #[error("tail flags do not match")]
    TailMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("eigensolver failure: {0}")]
    EigenFailure(#[from] LinalgError),
    #[error(transparent)]
    Rep(#[from] RepError),
}

/// Relative tolerances shared by the spectral computations. Every value is
/// scaled by `1 + ||block||` before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub cluster: f64,
    pub invert: f64,
    pub equivariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cluster: 1e-8, invert: 1e-10, equivariance: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tails {
    pub plus: bool,
    pub minus: bool,
}

impl Tails {
    pub const NONE: Tails = Tails { plus: false, minus: false };
    pub const BOTH: Tails = Tails { plus: true, minus: true };

    pub fn component(self) -> FsComponent {
        match (self.plus, self.minus) {
            (true, true) => FsComponent::FsIndefinite,
            (true, false) => FsComponent::FsPlus,
            (false, true) => FsComponent::FsMinus,
            (false, false) => FsComponent::FiniteDim,
        }
    }

    pub fn count(self) -> usize {
        self.plus as usize + self.minus as usize
    }

    pub fn union(self, other: Tails) -> Tails {
        Tails { plus: self.plus || other.plus, minus: self.minus || other.minus }
    }

    /// Tails of the negated operator.
    pub fn flipped(self) -> Tails {
        Tails { plus: self.minus, minus: self.plus }
    }

    /// Essential spectrum values.
    pub fn values(self) -> Vec<f64> {
        let mut v = Vec::new();
        if self.minus {
            v.push(-1.0);
        }
        if self.plus {
            v.push(1.0);
        }
        v
    }
}

/// Connected component of the model operator space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FsComponent {
    FsPlus,
    FsMinus,
    FsIndefinite,
    FiniteDim,
}

/// Symmetric block plus essential-spectrum tails.
#[derive(Debug, Clone, PartialEq)]
pub struct Cps {
    block: Mat,
    tails: Tails,
}

impl Cps {
    /// Symmetrizes `block`; panics if it is not square.
    pub fn new(block: Mat, tails: Tails) -> Self {
        assert!(block.is_square(), "block must be square");
        Self { block: linalg::symmetrize(&block), tails }
    }

    pub fn finite(block: Mat) -> Self {
        Self::new(block, Tails::NONE)
    }

    pub fn block(&self) -> &Mat {
        &self.block
    }
    pub fn tails(&self) -> Tails {
        self.tails
    }
    pub fn dim(&self) -> usize {
        self.block.nrows()
    }
    pub fn component(&self) -> FsComponent {
        self.tails.component()
    }

    /// Frobenius norm of the block, used to scale relative tolerances.
    pub fn scale(&self) -> f64 {
        1.0 + self.block.norm()
    }

    pub fn essential_spectrum(&self) -> Vec<f64> {
        self.tails.values()
    }

    pub fn negated(&self) -> Cps {
        Cps { block: -&self.block, tails: self.tails.flipped() }
    }

    /// Block-diagonal sum; tail flags are merged.
    pub fn direct_sum(&self, other: &Cps) -> Cps {
        Cps {
            block: linalg::block_diag(&[&self.block, &other.block]),
            tails: self.tails.union(other.tails),
        }
    }

    /// `U^T L U` on the block; tails untouched.
    pub fn conjugate(&self, u: &Mat) -> Cps {
        Cps::new(u.transpose() * &self.block * u, self.tails)
    }

    /// Truncate the tails to `m` coordinates each.
    pub fn compress(&self, m: usize) -> Cps {
        if self.tails.count() == 0 || m == 0 {
            return Cps::finite(self.block.clone());
        }
        let mut blocks = vec![self.block.clone()];
        if self.tails.plus {
            blocks.push(Mat::identity(m, m));
        }
        if self.tails.minus {
            blocks.push(-Mat::identity(m, m));
        }
        let refs: Vec<&Mat> = blocks.iter().collect();
        Cps::finite(linalg::block_diag(&refs))
    }
}

/// One eigenvalue cluster of a block: eigenvalues within `tol_cluster` of
/// their neighbours, and an orthonormal frame of the joint eigenspace.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub value: f64,
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.values.len()
    }
    pub fn min(&self) -> f64 {
        self.values[0]
    }
    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty cluster")
    }
}

/// Clustered spectral decomposition of a block.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub eigen: linalg::SymEigen,
    pub clusters: Vec<Cluster>,
    pub tol_cluster: f64,
}

impl BlockSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn min_abs(&self) -> Option<f64> {
        self.eigen.values.iter().map(|e| e.abs()).min_by(f64::total_cmp)
    }
}

/// Full eigendecomposition of `op`'s block, with residual check and greedy
/// clustering of the sorted eigenvalues.
pub fn block_spectrum(op: &Cps, tol: &Tolerances) -> Result<BlockSpectrum, OperatorError> {
    let eigen = linalg::sym_eigen(&op.block)?;
    let scale = op.scale();
    let res_tol = 1e-9 * scale;
    for (j, &e) in eigen.values.iter().enumerate() {
        let v = eigen.vectors.column(j);
        let r = (&op.block * v - v * e).norm();
        if r > res_tol {
            return Err(OperatorError::EigenFailure(LinalgError::EigenFailure { sweeps: 0, off: r }));
        }
    }
    let tol_cluster = tol.cluster * scale;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, &e) in eigen.values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if e - eigen.values[*g.last().expect("non-empty")] <= tol_cluster => g.push(j),
            _ => groups.push(vec![j]),
        }
    }
    let clusters = groups
        .into_iter()
        .map(|idx| {
            let values: Vec<f64> = idx.iter().map(|&j| eigen.values[j]).collect();
            let value = values.iter().sum::<f64>() / values.len() as f64;
            Cluster { value, values, vectors: linalg::columns(&eigen.vectors, &idx) }
        })
        .collect();
    Ok(BlockSpectrum { eigen, clusters, tol_cluster })
}

/// Orthonormal frame of the spectral subspace `E(op, [a, b])`.
pub fn spectral_interval_frame(
    spectrum: &BlockSpectrum,
    tails: Tails,
    a: f64,
    b: f64,
) -> Result<Mat, OperatorError> {
    if let Some(tail) = tails.values().into_iter().find(|&t| a <= t && t <= b) {
        return Err(OperatorError::InfiniteRank { a, b, tail });
    }
    let tol = spectrum.tol_cluster;
    let mut picked: Vec<&Mat> = Vec::new();
    for c in &spectrum.clusters {
        for endpoint in [a, b] {
            if c.min() - tol <= endpoint && endpoint <= c.max() + tol {
                return Err(OperatorError::BoundaryHit { eigenvalue: c.value, endpoint, tol });
            }
        }
        if a < c.value && c.value < b {
            picked.push(&c.vectors);
        }
    }
    let n = spectrum.eigen.vectors.nrows();
    if picked.is_empty() {
        return Ok(Mat::zeros(n, 0));
    }
    Ok(linalg::hstack(&picked))
}

/// Convenience wrapper computing the spectrum first.
pub fn interval_frame(op: &Cps, a: f64, b: f64, tol: &Tolerances) -> Result<Mat, OperatorError> {
    spectral_interval_frame(&block_spectrum(op, tol)?, op.tails, a, b)
}

/// Largest commutator norm `||rho(g) B - B rho(g)||_2` of the block.
pub fn check_equivariance(op: &Cps, action: &OrthogonalAction) -> Result<f64, OperatorError> {
    if action.dim() != op.dim() {
        return Err(OperatorError::DimMismatch { expected: op.dim(), got: action.dim() });
    }
    Ok(action.commutator_norm(&op.block)?)
}

/// Fail unless `op` is invertible with margin `tol.invert * scale`.
pub fn require_invertible(spectrum: &BlockSpectrum, op: &Cps, tol: &Tolerances) -> Result<(), OperatorError> {
    let thresh = tol.invert * op.scale();
    if let Some(&e) = spectrum.values().iter().min_by(|a, b| a.abs().total_cmp(&b.abs())) {
        if e.abs() <= thresh {
            return Err(OperatorError::NotInvertible { eigenvalue: e, tol: thresh });
        }
    }
    Ok(())
}

/// RO(G)-class of the negative spectral subspace of a finite operator.
pub fn morse_class(
    op: &Cps,
    action: &OrthogonalAction,
    tol: &Tolerances,
) -> Result<VirtualRep, OperatorError> {
    if op.tails.count() > 0 {
        return Err(OperatorError::NotFiniteDim);
    }
    let norm = check_equivariance(op, action)?;
    let etol = tol.equivariance * op.scale();
    if norm > etol {
        return Err(OperatorError::NotEquivariant { norm, tol: etol });
    }
    let spectrum = block_spectrum(op, tol)?;
    require_invertible(&spectrum, op, tol)?;
    let frame = spectrum.eigen.select(|e| e < 0.0);
    Ok(grouprep::class_of_subspace(action, &frame, grouprep::DEFAULT_TOL_INV)?)
}

/// A continuous path of model operators over the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPath {
    kind: PathKind,
    tails: Tails,
    lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathKind {
    /// `block(t) = a + t b`.
    Affine { a: Mat, b: Mat },
    /// Linear interpolation between samples at strictly increasing knots
    /// from 0 to 1.
    PiecewiseLinear { knots: Vec<f64>, samples: Vec<Mat> },
}

impl OperatorPath {
    pub fn affine(a: Mat, b: Mat, tails: Tails) -> Result<Self, OperatorError> {
        if !a.is_square() || a.shape() != b.shape() {
            return Err(OperatorError::InvalidPath(format!(
                "affine coefficients must be square of equal size, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let a = linalg::symmetrize(&a);
        let b = linalg::symmetrize(&b);
        let lipschitz = linalg::sym_norm(&b)?;
        Ok(Self { kind: PathKind::Affine { a, b }, tails, lipschitz })
    }

    pub fn piecewise_linear(knots: Vec<f64>, samples: Vec<Mat>, tails: Tails) -> Result<Self, OperatorError> {
        if knots.len() < 2 || knots.len() != samples.len() {
            return Err(OperatorError::InvalidPath(format!(
                "need at least two knots with one sample each, got {} knots and {} samples",
                knots.len(),
                samples.len()
            )));
        }
        if knots[0] != 0.0 || *knots.last().expect("non-empty") != 1.0 {
            return Err(OperatorError::InvalidPath("knots must start at 0 and end at 1".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) || knots.iter().any(|t| !t.is_finite()) {
            return Err(OperatorError::InvalidPath("knots must be strictly increasing".into()));
        }
        let d = samples[0].nrows();
        if samples.iter().any(|s| s.nrows() != d || s.ncols() != d) {
            return Err(OperatorError::InvalidPath("samples must share one square shape".into()));
        }
        let samples: Vec<Mat> = samples.iter().map(linalg::symmetrize).collect();
        let mut lipschitz = 0.0f64;
        for i in 0..samples.len() - 1 {
            let slope = linalg::sym_norm(&(&samples[i + 1] - &samples[i]))? / (knots[i + 1] - knots[i]);
            lipschitz = lipschitz.max(slope);
        }
        Ok(Self { kind: PathKind::PiecewiseLinear { knots, samples }, tails, lipschitz })
    }

    /// Constant path at `op`.
    pub fn constant(op: &Cps) -> Self {
        let d = op.dim();
        Self::affine(op.block.clone(), Mat::zeros(d, d), op.tails).expect("valid constant path")
    }

    /// Straight line from `from` to `to`.
    pub fn segment(from: &Cps, to: &Cps) -> Result<Self, OperatorError> {
        if from.tails != to.tails {
            return Err(OperatorError::TailMismatch);
        }
        Self::affine(from.block.clone(), to.block() - from.block(), from.tails)
    }

    pub fn kind(&self) -> &PathKind {
        &self.kind
    }
    pub fn tails(&self) -> Tails {
        self.tails
    }
    /// Certified bound on `||block(s) - block(t)||_2 / |s - t|`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    pub fn dim(&self) -> usize {
        match &self.kind {
            PathKind::Affine { a, .. } => a.nrows(),
            PathKind::PiecewiseLinear { samples, .. } => samples[0].nrows(),
        }
    }
    pub fn component(&self) -> FsComponent {
        self.tails.component()
    }

    /// Knots where the path may bend (0 and 1 for affine paths).
    pub fn knots(&self) -> Vec<f64> {
        match &self.kind {
            PathKind::Affine { .. } => vec![0.0, 1.0],
            PathKind::PiecewiseLinear { knots, .. } => knots.clone(),
        }
    }

    pub fn block_at(&self, t: f64) -> Result<Mat, OperatorError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(OperatorError::OutOfRange(t));
        }
        Ok(match &self.kind {
            PathKind::Affine { a, b } => {
                if t == 1.0 {
                    a + b
                } else {
                    a + b * t
                }
            }
            PathKind::PiecewiseLinear { knots, samples } => {
                let i = match knots.iter().position(|&k| k >= t) {
                    Some(0) => return Ok(samples[0].clone()),
                    Some(i) => i,
                    None => unreachable!("t <= 1 = last knot"),
                };
                if knots[i] == t {
                    return Ok(samples[i].clone());
                }
                let w = (t - knots[i - 1]) / (knots[i] - knots[i - 1]);
                &samples[i - 1] * (1.0 - w) + &samples[i] * w
            }
        })
    }

    pub fn evaluate(&self, t: f64) -> Result<Cps, OperatorError> {
        Ok(Cps { block: self.block_at(t)?, tails: self.tails })
    }

    /// Sample representation on the given knots (exact for knots that
    /// include every bend of the path).
    pub fn to_piecewise_linear(&self) -> Self {
        match &self.kind {
            PathKind::PiecewiseLinear { .. } => self.clone(),
            PathKind::Affine { a, b } => Self {
                kind: PathKind::PiecewiseLinear { knots: vec![0.0, 1.0], samples: vec![a.clone(), a + b] },
                tails: self.tails,
                lipschitz: self.lipschitz,
            },
        }
    }

    /// Resample on a knot set; exact when `knots` contains all bends.
    pub fn resample(&self, knots: Vec<f64>) -> Result<Self, OperatorError> {
        let samples = knots.iter().map(|&t| self.block_at(t)).collect::<Result<Vec<_>, _>>()?;
        Self::piecewise_linear(knots, samples, self.tails)
    }

    /// `t -> p(1 - t)`.
    pub fn reverse(&self) -> Self {
        match &self.kind {
            PathKind::Affine { a, b } => Self {
                kind: PathKind::Affine { a: a + b, b: -b },
                tails: self.tails,
                lipschitz: self.lipschitz,
            },
            PathKind::PiecewiseLinear { knots, samples } => {
                let knots = knots.iter().rev().map(|t| 1.0 - t).collect::<Vec<_>>();
                let mut knots = knots;
                knots[0] = 0.0;
                *knots.last_mut().expect("non-empty") = 1.0;
                Self {
                    kind: PathKind::PiecewiseLinear { knots, samples: samples.iter().rev().cloned().collect() },
                    tails: self.tails,
                    lipschitz: self.lipschitz,
                }
            }
        }
    }

    /// `-p`, with tails swapped.
    pub fn negated(&self) -> Self {
        let kind = match &self.kind {
            PathKind::Affine { a, b } => PathKind::Affine { a: -a, b: -b },
            PathKind::PiecewiseLinear { knots, samples } => PathKind::PiecewiseLinear {
                knots: knots.clone(),
                samples: samples.iter().map(|s| -s).collect(),
            },
        };
        Self { kind, tails: self.tails.flipped(), lipschitz: self.lipschitz }
    }

    /// Run `self` on [0, 1/2] and `other` on [1/2, 1].
    pub fn concatenate(&self, other: &OperatorPath) -> Result<Self, OperatorError> {
        if self.tails != other.tails {
            return Err(OperatorError::TailMismatch);
        }
        if self.dim() != other.dim() {
            return Err(OperatorError::DimMismatch { expected: self.dim(), got: other.dim() });
        }
        let end = self.block_at(1.0)?;
        let start = other.block_at(0.0)?;
        let gap = (&end - &start).norm();
        if gap > 1e-9 {
            return Err(OperatorError::EndpointMismatch(gap));
        }
        let first = self.knots();
        let second = other.knots();
        let mut knots: Vec<f64> = first.iter().map(|t| 0.5 * t).collect();
        let mut samples = first.iter().map(|&t| self.block_at(t)).collect::<Result<Vec<_>, _>>()?;
        for &t in &second[1..] {
            knots.push(0.5 + 0.5 * t);
            samples.push(other.block_at(t)?);
        }
        *knots.last_mut().expect("non-empty") = 1.0;
        Self::piecewise_linear(knots, samples, self.tails)
    }

    /// Pointwise block-diagonal sum; tail flags are merged.
    pub fn direct_sum(&self, other: &OperatorPath) -> Result<Self, OperatorError> {
        let tails = self.tails.union(other.tails);
        if let (PathKind::Affine { a: a1, b: b1 }, PathKind::Affine { a: a2, b: b2 }) = (&self.kind, &other.kind) {
            return Self::affine(linalg::block_diag(&[a1, a2]), linalg::block_diag(&[b1, b2]), tails);
        }
        let knots = merge_knots(&self.knots(), &other.knots());
        let samples = knots
            .iter()
            .map(|&t| Ok(linalg::block_diag(&[&self.block_at(t)?, &other.block_at(t)?])))
            .collect::<Result<Vec<_>, OperatorError>>()?;
        Self::piecewise_linear(knots, samples, tails)
    }

    /// Pointwise map of every sample/coefficient (linear maps only).
    pub fn map_linear(&self, f: impl Fn(&Mat) -> Mat, tails: Tails) -> Result<Self, OperatorError> {
        match &self.kind {
            PathKind::Affine { a, b } => Self::affine(f(a), f(b), tails),
            PathKind::PiecewiseLinear { knots, samples } => {
                Self::piecewise_linear(knots.clone(), samples.iter().map(f).collect(), tails)
            }
        }
    }

    /// `U^T p(t) U` for a fixed orthogonal `u`.
    pub fn conjugate(&self, u: &Mat) -> Result<Self, OperatorError> {
        let ut = u.transpose();
        self.map_linear(|m| &ut * m * u, self.tails)
    }

    /// Replace the tails by `m` explicit coordinates each.
    pub fn compress(&self, m: usize) -> Self {
        if self.tails.count() == 0 {
            return self.clone();
        }
        let pad = |block: &Mat, with_identity: bool| -> Mat {
            let mut blocks = vec![block.clone()];
            let id = if with_identity { Mat::identity(m, m) } else { Mat::zeros(m, m) };
            if self.tails.plus {
                blocks.push(id.clone());
            }
            if self.tails.minus {
                blocks.push(-id);
            }
            let refs: Vec<&Mat> = blocks.iter().collect();
            linalg::block_diag(&refs)
        };
        let kind = match &self.kind {
            PathKind::Affine { a, b } => PathKind::Affine { a: pad(a, true), b: pad(b, false) },
            PathKind::PiecewiseLinear { knots, samples } => PathKind::PiecewiseLinear {
                knots: knots.clone(),
                samples: samples.iter().map(|s| pad(s, true)).collect(),
            },
        };
        Self { kind, tails: Tails::NONE, lipschitz: self.lipschitz }
    }
}

/// Sorted union of two knot sets in [0, 1], merging near-duplicates.
pub fn merge_knots(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        if out.last().is_none_or(|&l| t - l > 1e-12) {
            out.push(t);
        }
    }
    *out.last_mut().expect("non-empty") = 1.0;
    out[0] = 0.0;
    out
}
