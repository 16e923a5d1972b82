//! Lagrangian graphs in `R^{2m}` and the equivariant Maslov index.
//!
//! The boundary value operator `A u = J u'` on [0, 1] with `u(0)` in the
//! graph of `L` and `u(1)` in `W = H x {0}` has eigenfunctions
//! `u(t) = (cos(mu t) v + sin(mu t) L v, cos(mu t) L v - sin(mu t) v)` for
//! `L v = tan(mu) v`. Its spectrum in the window `(-pi/2, pi/2)` is
//! therefore `arctan(spec L)`, which is what [`WindowModel`] samples.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use thiserror::Error;

use crate::grouprep::{self, GroupData, GroupPreset, OrthogonalAction, RepError, VirtualRep};
use crate::linalg::{self, LinalgError, Mat};
use crate::operators::{self, Cluster, OperatorError, OperatorPath, Tails, Tolerances};
use crate::sflcore::{self, Sample, SflError, SflOptions, SflReport, SpectralModel};

/// Orthonormality tolerance for frames.
pub const FRAME_TOL: f64 = 1e-10;
/// Bound on `||P J P||` for a Lagrangian projection.
pub const LAGRANGE_TOL: f64 = 1e-9;
/// Principal angles with `1 - cos(theta)` at most this count as intersection.
pub const INTERSECTION_TOL: f64 = 1e-8;
/// Symmetry tolerance for graph inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaslovError {
    #[error("matrix is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("frame columns are not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("frame has shape {rows}x{cols}, expected 2m x m")]
    BadShape { rows: usize, cols: usize },
    #[error("frame is not Lagrangian (||PJP|| = {0:e})")]
    NotLagrangian(f64),
    #[error("frames live in different spaces")]
    SpaceMismatch,
    #[error("graph paths must not carry essential spectrum")]
    NotFiniteDim,
    #[error("window route gives {window}, direct route gives {direct}")]
    ConsistencyFailure { window: String, direct: String },
    #[error(transparent)]
    Sfl(#[from] SflError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Rep(#[from] RepError),
}

impl From<LinalgError> for MaslovError {
    fn from(e: LinalgError) -> Self {
        MaslovError::Operator(e.into())
    }
}

/// The standard complex structure `[[0, -I], [I, 0]]` on `R^{2m}`.
pub fn symplectic_j(m: usize) -> Mat {
    let mut j = Mat::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = -1.0;
        j[(m + i, i)] = 1.0;
    }
    j
}

/// An `m`-dimensional Lagrangian subspace of `R^{2m}`, by an orthonormal
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    frame: Mat,
}

impl LagrangianFrame {
    pub fn new(frame: Mat) -> Result<Self, MaslovError> {
        if !is_lagrangian(&frame)? {
            let p = linalg::projector(&frame);
            let j = symplectic_j(frame.ncols());
            return Err(MaslovError::NotLagrangian(linalg::spectral_norm(&(&p * j * &p))?));
        }
        Ok(Self { frame })
    }

    /// `W = H x {0}`.
    pub fn horizontal(m: usize) -> Self {
        let mut frame = Mat::zeros(2 * m, m);
        frame.view_mut((0, 0), (m, m)).fill_with_identity();
        Self { frame }
    }

    pub fn frame(&self) -> &Mat {
        &self.frame
    }
    pub fn half_dim(&self) -> usize {
        self.frame.ncols()
    }
    pub fn projector(&self) -> Mat {
        linalg::projector(&self.frame)
    }
}

/// Orthonormal frame of `{(u, L u)}`: columns of `[I; L] (I + L^2)^{-1/2}`.
pub fn graph_lagrangian(l: &Mat) -> Result<LagrangianFrame, MaslovError> {
    if !l.is_square() {
        return Err(MaslovError::BadShape { rows: l.nrows(), cols: l.ncols() });
    }
    let defect = (l - l.transpose()).norm();
    if defect > SYMMETRY_TOL {
        return Err(MaslovError::NotSymmetric(defect));
    }
    let m = l.nrows();
    let eig = linalg::sym_eigen(l)?;
    let norm = eig.map(|e| 1.0 / (1.0 + e * e).sqrt());
    let mut frame = Mat::zeros(2 * m, m);
    frame.view_mut((0, 0), (m, m)).copy_from(&norm);
    frame.view_mut((m, 0), (m, m)).copy_from(&(l * &norm));
    LagrangianFrame::new(frame)
}

/// `P J P = 0` for the projection `P` onto the span of an orthonormal
/// `2m x m` frame.
pub fn is_lagrangian(frame: &Mat) -> Result<bool, MaslovError> {
    let (rows, cols) = frame.shape();
    if rows != 2 * cols {
        return Err(MaslovError::BadShape { rows, cols });
    }
    let defect = linalg::orthonormality_defect(frame);
    if defect > FRAME_TOL {
        return Err(MaslovError::NotOrthonormal(defect));
    }
    let p = linalg::projector(frame);
    let pjp = &p * symplectic_j(cols) * &p;
    Ok(linalg::spectral_norm(&pjp)? <= LAGRANGE_TOL)
}

/// Gap distance `||P_1 - P_2||_2`.
pub fn gap_distance(a: &LagrangianFrame, b: &LagrangianFrame) -> Result<f64, MaslovError> {
    if a.frame.shape() != b.frame.shape() {
        return Err(MaslovError::SpaceMismatch);
    }
    Ok(linalg::sym_norm(&(a.projector() - b.projector()))?.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FredholmPair {
    pub intersection: usize,
    pub codim_sum: usize,
}

/// Dimension of `F ∩ W` and codimension of `F + W`.
///
/// The Gram matrix of `[F | W]` has eigenvalues `1 ± cos(theta)` over the
/// principal angles; eigenvalues at most [`INTERSECTION_TOL`] are counted
/// as zero for both numbers.
pub fn fredholm_pair_dims(f: &LagrangianFrame, w: &LagrangianFrame) -> Result<FredholmPair, MaslovError> {
    if f.frame.nrows() != w.frame.nrows() {
        return Err(MaslovError::SpaceMismatch);
    }
    let both = linalg::hstack(&[&f.frame, &w.frame]);
    let gram = both.transpose() * &both;
    let eig = linalg::sym_eigen(&gram)?;
    let zero = eig.values.iter().filter(|&&e| e <= INTERSECTION_TOL).count();
    let rank = both.ncols() - zero;
    let ambient = f.frame.nrows();
    Ok(FredholmPair {
        intersection: f.frame.ncols() + w.frame.ncols() - rank,
        codim_sum: ambient - rank,
    })
}

/// One eigenvalue cluster of the window operator.
#[derive(Debug, Clone)]
pub struct WindowEigen {
    /// Eigenvalue in `(-pi/2, pi/2)`.
    pub mu: f64,
    pub multiplicity: usize,
    /// Orthonormal frame of the initial values `u(0)` in `R^{2m}`.
    pub initial: Mat,
    /// Orthonormal frame of the `L`-eigenspace of `tan(mu)`, the image of
    /// the initial values under projection onto `H x {0}`.
    pub eigenspace: Mat,
}

fn window_clusters(spectrum: &operators::BlockSpectrum) -> Vec<Cluster> {
    spectrum
        .clusters
        .iter()
        .map(|c| {
            let m = c.vectors.nrows();
            let mut frame = Mat::zeros(2 * m, c.vectors.ncols());
            for (j, &e) in c.values.iter().enumerate() {
                let s = 1.0 / (1.0 + e * e).sqrt();
                let v = c.vectors.column(j);
                frame.view_mut((0, j), (m, 1)).copy_from(&(v * s));
                frame.view_mut((m, j), (m, 1)).copy_from(&(v * (e * s)));
            }
            Cluster {
                value: c.value.atan(),
                values: c.values.iter().map(|e| e.atan()).collect(),
                vectors: frame,
            }
        })
        .collect()
}

/// Window spectrum of the boundary value operator for the graph of `l`.
pub fn maslov_operator_spectrum(l: &Mat, tol: &Tolerances) -> Result<Vec<WindowEigen>, MaslovError> {
    let defect = (l - l.transpose()).norm();
    if defect > SYMMETRY_TOL {
        return Err(MaslovError::NotSymmetric(defect));
    }
    let spectrum = operators::block_spectrum(&operators::Cps::finite(l.clone()), tol)?;
    Ok(window_clusters(&spectrum)
        .into_iter()
        .zip(&spectrum.clusters)
        .map(|(w, c)| WindowEigen {
            mu: w.value,
            multiplicity: w.multiplicity(),
            eigenspace: c.vectors.clone(),
            initial: w.vectors,
        })
        .collect())
}

/// The eigenfunction with initial value `(v, L v)` for `L v = tan(mu) v`.
pub fn eigenfunction(l: &Mat, mu: f64, v: &DVector<f64>, t: f64) -> DVector<f64> {
    let m = l.nrows();
    let lv = l * v;
    let (s, c) = (mu * t).sin_cos();
    let mut u = DVector::zeros(2 * m);
    u.rows_mut(0, m).copy_from(&(v * c + &lv * s));
    u.rows_mut(m, m).copy_from(&(&lv * c - v * s));
    u
}

/// Dimension of the kernel of the window operator: eigenvalues `mu` with
/// `1 - cos(mu) <= INTERSECTION_TOL`, matching [`fredholm_pair_dims`].
pub fn window_kernel_dim(spectrum: &[WindowEigen]) -> usize {
    spectrum
        .iter()
        .filter(|w| 2.0 * (0.5 * w.mu).sin().powi(2) <= INTERSECTION_TOL)
        .map(|w| w.multiplicity)
        .sum()
}

/// The window operator along a graph path, as a spectral model on
/// `R^{2m}` with the diagonal action.
pub struct WindowModel<'a> {
    pub path: &'a OperatorPath,
    pub tol: Tolerances,
}

impl SpectralModel for WindowModel<'_> {
    fn lipschitz(&self) -> f64 {
        // arctan is 1-Lipschitz
        self.path.lipschitz()
    }

    fn ceiling(&self) -> Option<f64> {
        Some(FRAC_PI_2)
    }

    fn frame_dim(&self) -> usize {
        2 * self.path.dim()
    }

    fn sample(&self, t: f64) -> Result<Sample, SflError> {
        let op = self.path.evaluate(t)?;
        let spectrum = operators::block_spectrum(&op, &self.tol)?;
        Ok(Sample {
            clusters: window_clusters(&spectrum),
            tol_cluster: spectrum.tol_cluster,
            tol_invert: self.tol.invert * op.scale(),
            scale: op.scale(),
        })
    }

    fn equivariance_defect(&self, t: f64, action: &OrthogonalAction) -> Result<(f64, f64), SflError> {
        let block = self.path.block_at(t)?;
        let doubled = linalg::block_diag(&[&block, &block]);
        let norm = action.commutator_norm(&doubled)?;
        Ok((norm, self.tol.equivariance * (1.0 + block.norm())))
    }
}

/// Equivariant Maslov index of the graph path of `path` against `W`,
/// computed through the window operator and checked against the spectral
/// flow of `path` itself.
pub fn maslov_index_g(
    path: &OperatorPath,
    action: &OrthogonalAction,
    opts: &SflOptions,
) -> Result<SflReport, MaslovError> {
    if path.tails() != Tails::NONE {
        return Err(MaslovError::NotFiniteDim);
    }
    let doubled = action.direct_sum(action)?;
    let window = sflcore::flow_model(&WindowModel { path, tol: opts.tol }, &doubled, opts)?;
    let direct = sflcore::sfl_g(path, action, opts)?;
    if window.sfl_g != direct.sfl_g {
        return Err(MaslovError::ConsistencyFailure {
            window: window.sfl_g.to_string(),
            direct: direct.sfl_g.to_string(),
        });
    }
    Ok(window)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Z2Report {
    pub sfl_l: i64,
    pub sfl_g: VirtualRep,
    pub phi: (i64, i64),
    pub expected: (i64, i64),
    pub report: SflReport,
}

/// `L = diag(M, -M)` with `Z_2` acting by `(u, v) -> (u, -v)`: the
/// classical flow of `L` vanishes while the fixed-point refinement
/// recovers the flow of `M`.
pub fn z2_example(m_path: &OperatorPath, opts: &SflOptions) -> Result<Z2Report, MaslovError> {
    if m_path.tails() != Tails::NONE {
        return Err(MaslovError::NotFiniteDim);
    }
    let (l_path, action) = z2_doubled(m_path)?;
    let report = maslov_index_g(&l_path, &action, opts)?;
    let phi = grouprep::phi_z2(&report.sfl_g, action.data())?;
    let sfl_m = sflcore::sfl_classical(m_path, opts)?;
    let expected = (0, sfl_m);
    if phi != expected || report.sfl != 0 {
        return Err(MaslovError::ConsistencyFailure {
            window: format!("phi = {phi:?}, sfl = {}", report.sfl),
            direct: format!("phi = {expected:?}, sfl = 0"),
        });
    }
    Ok(Z2Report { sfl_l: report.sfl, sfl_g: report.sfl_g.clone(), phi, expected, report })
}

/// The path `diag(M, -M)` and the action `diag(I, -I)` of `Z_2`.
pub fn z2_doubled(m_path: &OperatorPath) -> Result<(OperatorPath, OrthogonalAction), MaslovError> {
    let k = m_path.dim();
    let l_path = m_path.direct_sum(&m_path.negated())?;
    let data = std::sync::Arc::new(GroupData::preset(GroupPreset::Cyclic(2))?);
    let mut flip = Mat::identity(2 * k, 2 * k);
    for i in k..2 * k {
        flip[(i, i)] = -1.0;
    }
    let action = OrthogonalAction::new(data, vec![Mat::identity(2 * k, 2 * k), flip])?;
    Ok((l_path, action))
}
