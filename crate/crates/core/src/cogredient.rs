//! Cogredient normal forms.
//!
//! For a path in the positive component, [`parametrix`] builds invertible
//! `M_t` with `M_t^T L_t M_t = I + K_t`; the negative component is handled
//! through `-L`. [`pointwise_section`] writes a single indefinite operator
//! as `M Q M^T + K` with `Q` a symmetry.

use thiserror::Error;

use crate::linalg::{self, LinalgError, Mat};
use crate::operators::{self, Cps, FsComponent, OperatorError, OperatorPath, Tails, Tolerances};

/// Required positivity margin of `L_t - K` on a cover interval.
pub const COVER_MARGIN: f64 = 1e-8;
/// Residual bound, relative to `1 + ||L||`.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CogredientError {
    #[error("operator has essential spectrum {0:?}, expected only the +1 tail")]
    NotFsPlus(Tails),
    #[error("operator has essential spectrum {0:?}, expected both tails")]
    NotFsi(Tails),
    #[error("split part is not positive definite (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("no positive cover interval starts at lambda={0}; increase the sample count")]
    CoverFailure(f64),
    #[error("residual {residual:e} exceeds {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl From<LinalgError> for CogredientError {
    fn from(e: LinalgError) -> Self {
        CogredientError::Operator(e.into())
    }
}

/// `L = S + K` with `S = P+ L P+ + P0-` positive and
/// `K = P0- (L - I) P0-` of rank at most `dim im P0-`.
pub fn split_positive(op: &Cps) -> Result<(Cps, Cps), CogredientError> {
    split_above(op, 0.0)
}

// Same split with the spectral cut at `cut` instead of 0: `P+` projects
// onto eigenvalues above `cut`. With `cut = 1` the positive part has
// smallest eigenvalue at least 1.
fn split_above(op: &Cps, cut: f64) -> Result<(Cps, Cps), CogredientError> {
    if op.component() != FsComponent::FsPlus {
        return Err(CogredientError::NotFsPlus(op.tails()));
    }
    let eig = linalg::sym_eigen(op.block())?;
    let p_plus = linalg::projector(&eig.select(|e| e > cut));
    let d = op.dim();
    let p_rest = Mat::identity(d, d) - &p_plus;
    let s = linalg::symmetrize(&(&p_plus * op.block() * &p_plus + &p_rest));
    let k = linalg::symmetrize(&(&p_rest * (op.block() - Mat::identity(d, d)) * &p_rest));
    if d > 0 {
        let min = linalg::sym_eigen(&s)?.values[0];
        if min <= 0.0 {
            return Err(CogredientError::NotPositive(min));
        }
    }
    Ok((Cps::new(s, op.tails()), Cps::finite(k)))
}

/// Sampled cogredient parametrix: `M[i]^T L(ts[i]) M[i] = sign I + K[i]`.
/// `M` acts as the identity on the tails and `K` vanishes there.
#[derive(Debug, Clone, PartialEq)]
pub struct Parametrix {
    pub ts: Vec<f64>,
    pub m: Vec<Mat>,
    pub k: Vec<Mat>,
    pub sign: i8,
    /// Parameter values where the frozen splits were taken.
    pub anchors: Vec<f64>,
}

impl Parametrix {
    /// Largest `||M^T L M - (sign I + K)||_2 / (1 + ||L||)` over the samples.
    pub fn max_relative_residual(&self, path: &OperatorPath) -> Result<f64, CogredientError> {
        let mut worst = 0.0f64;
        for (i, &t) in self.ts.iter().enumerate() {
            let l = path.block_at(t)?;
            let d = l.nrows();
            let lhs = self.m[i].transpose() * &l * &self.m[i];
            let rhs = Mat::identity(d, d) * f64::from(self.sign) + &self.k[i];
            let r = linalg::spectral_norm(&(lhs - rhs))? / (1.0 + linalg::sym_norm(&l)?);
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// Piecewise-linear path through the samples of `M^T L M`.
    pub fn transformed_path(&self, path: &OperatorPath) -> Result<OperatorPath, CogredientError> {
        let samples = self
            .ts
            .iter()
            .zip(&self.m)
            .map(|(&t, m)| Ok(m.transpose() * path.block_at(t)? * m))
            .collect::<Result<Vec<_>, CogredientError>>()?;
        Ok(OperatorPath::piecewise_linear(self.ts.clone(), samples, path.tails())?)
    }
}

/// Parametrix for a path in the positive or negative component, sampled
/// at `samples` equally spaced points.
pub fn parametrix(path: &OperatorPath, samples: usize) -> Result<Parametrix, CogredientError> {
    match path.component() {
        FsComponent::FsPlus => parametrix_fs_plus(path, samples),
        FsComponent::FsMinus => {
            let mut p = parametrix_fs_plus(&path.negated(), samples)?;
            p.sign = -1;
            p.k.iter_mut().for_each(|k| *k = -&*k);
            Ok(p)
        }
        _ => Err(CogredientError::NotFsPlus(path.tails())),
    }
}

fn min_eigenvalue(a: &Mat) -> Result<f64, CogredientError> {
    Ok(if a.nrows() == 0 { f64::INFINITY } else { linalg::sym_eigen(a)?.values[0] })
}

/// Parametrix for a path with only the +1 tail.
///
/// Frozen splits `K(c)` are taken at anchor samples `c_0 = 0 < c_1 < ...`
/// chosen so that `L_t - K(c_j)` stays positive on `[c_{j-1}, c_{j+1}]`;
/// hat functions on the anchors blend the `K`s. The splits cut the
/// spectrum at 0 when that yields a cover, and at 1 otherwise (eigenvalues
/// just above 0 make the cut-at-0 cover arbitrarily short).
pub fn parametrix_fs_plus(path: &OperatorPath, samples: usize) -> Result<Parametrix, CogredientError> {
    if path.component() != FsComponent::FsPlus {
        return Err(CogredientError::NotFsPlus(path.tails()));
    }
    if samples < 2 {
        return Err(CogredientError::TooFewSamples(samples));
    }
    match parametrix_with_cut(path, samples, 0.0) {
        Err(CogredientError::CoverFailure(_)) => parametrix_with_cut(path, samples, 1.0),
        other => other,
    }
}

// Largest parameter step of the cover grid, measured by how far the block
// moves. Anchors cut at 1 stay positive for a movement below 1.
const GRID_VARIATION: f64 = 0.25;

// Sample points, path knots and enough points in between that each step
// moves the block by at most GRID_VARIATION. Each step lies inside one
// linear piece, where the smallest eigenvalue of `L_t - K` is concave in
// `t`, so positivity at grid points gives positivity in between.
fn cover_grid(path: &OperatorPath, ts: &[f64]) -> Result<Vec<f64>, CogredientError> {
    let mut coarse: Vec<f64> = ts.iter().copied().chain(path.knots()).collect();
    coarse.sort_by(f64::total_cmp);
    coarse.dedup();
    let mut grid = vec![coarse[0]];
    for w in coarse.windows(2) {
        let variation = linalg::spectral_norm(&(path.block_at(w[1])? - path.block_at(w[0])?))?;
        let pieces = (variation / GRID_VARIATION).ceil().max(1.0) as usize;
        for k in 1..pieces {
            grid.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
        }
        grid.push(w[1]);
    }
    Ok(grid)
}

fn parametrix_with_cut(path: &OperatorPath, n: usize, cut: f64) -> Result<Parametrix, CogredientError> {
    let ts: Vec<f64> = (0..n).map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 }).collect();
    let grid = cover_grid(path, &ts)?;
    let g = grid.len();
    let blocks = grid.iter().map(|&t| path.block_at(t)).collect::<Result<Vec<_>, _>>()?;
    let mut splits: Vec<Option<Mat>> = vec![None; g];
    let mut split_at = |j: usize| -> Result<Mat, CogredientError> {
        if splits[j].is_none() {
            let (_, k) = split_above(&Cps::new(blocks[j].clone(), path.tails()), cut)?;
            splits[j] = Some(k.block().clone());
        }
        Ok(splits[j].clone().expect("just filled"))
    };
    let positive_on = |k: &Mat, range: std::ops::RangeInclusive<usize>| -> Result<bool, CogredientError> {
        for i in range {
            if min_eigenvalue(&(&blocks[i] - k))? <= COVER_MARGIN {
                return Ok(false);
            }
        }
        Ok(true)
    };

    let mut anchors = vec![0usize];
    while *anchors.last().expect("non-empty") < g - 1 {
        let a = *anchors.last().expect("non-empty");
        let ka = split_at(a)?;
        let mut reach = a;
        while reach + 1 < g && positive_on(&ka, reach + 1..=reach + 1)? {
            reach += 1;
        }
        let mut next = None;
        for j in (a + 1..=reach).rev() {
            let kj = split_at(j)?;
            if positive_on(&kj, a..=j)? {
                next = Some(j);
                break;
            }
        }
        match next {
            Some(j) => anchors.push(j),
            None => return Err(CogredientError::CoverFailure(grid[a])),
        }
    }
    log::debug!("parametrix cover uses {} anchors on a grid of {g}", anchors.len());

    let mut m_out = Vec::with_capacity(n);
    let mut k_out = Vec::with_capacity(n);
    let mut seg = 0;
    for &t in &ts {
        while seg + 2 < anchors.len() && t > grid[anchors[seg + 1]] {
            seg += 1;
        }
        let (c0, c1) = (anchors[seg], anchors[seg + 1]);
        let w = ((t - grid[c0]) / (grid[c1] - grid[c0])).clamp(0.0, 1.0);
        let k_blend = split_at(c0)? * (1.0 - w) + split_at(c1)? * w;
        let block = path.block_at(t)?;
        let s = linalg::symmetrize(&(&block - &k_blend));
        let eig = linalg::sym_eigen(&s)?;
        if let Some(&min) = eig.values.first() {
            if min <= 0.0 {
                return Err(CogredientError::CoverFailure(t));
            }
        }
        let m = eig.map(|e| 1.0 / e.sqrt());
        let k = linalg::symmetrize(&(&m * &k_blend * &m));
        let d = s.nrows();
        let residual = linalg::spectral_norm(&(&m * &block * &m - Mat::identity(d, d) - &k))?;
        let tol = RESIDUAL_TOL * (1.0 + linalg::sym_norm(&block)?);
        if residual > tol {
            return Err(CogredientError::ResidualTooLarge { residual, tol });
        }
        m_out.push(m);
        k_out.push(k);
    }
    let anchors = anchors.iter().map(|&j| grid[j]).collect();
    Ok(Parametrix { ts, m: m_out, k: k_out, sign: 1, anchors })
}

/// `S = M Q M^T + K` for an operator with both tails.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// A symmetry: block squares to the identity, tails `±1`.
    pub q: Cps,
    /// Invertible block part of `M` (identity on the tails).
    pub m: Mat,
    /// Symmetric block part of `K` (zero on the tails).
    pub k: Mat,
}

/// Pointwise section: `K0` projects onto `ker S`, `V = S + K0`,
/// `Q = 2 P+(V) - I`, `M = |V|^{1/2}`, `K = S - M Q M^T`.
pub fn pointwise_section(s: &Cps, tol: &Tolerances) -> Result<Section, CogredientError> {
    if s.component() != FsComponent::FsIndefinite {
        return Err(CogredientError::NotFsi(s.tails()));
    }
    let spectrum = operators::block_spectrum(s, tol)?;
    let kernel = spectrum.eigen.select(|e| e.abs() <= spectrum.tol_cluster);
    let k0 = linalg::projector(&kernel);
    let v = s.block() + &k0;
    let veig = linalg::sym_eigen(&v)?;
    let q = veig.map(|e| if e > 0.0 { 1.0 } else { -1.0 });
    let m = veig.map(|e| e.abs().sqrt());
    let mqm = &m * &q * m.transpose();
    let residual = linalg::spectral_norm(&(&mqm - &v))?;
    let tol = RESIDUAL_TOL * s.scale();
    if residual > tol {
        return Err(CogredientError::ResidualTooLarge { residual, tol });
    }
    let k = linalg::symmetrize(&(s.block() - mqm));
    Ok(Section { q: Cps::new(q, s.tails()), m, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;

    const PLUS: Tails = Tails { plus: true, minus: false };

    #[test]
    fn split_examples() {
        let (s, k) = split_positive(&Cps::new(diag(&[3.0, -1.0]), PLUS)).unwrap();
        assert!((s.block() - diag(&[3.0, 1.0])).norm() < 1e-14);
        assert_eq!(s.tails(), PLUS);
        assert!((k.block() - diag(&[0.0, -2.0])).norm() < 1e-14);

        let pd = crate::linalg::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (s, k) = split_positive(&Cps::new(pd.clone(), PLUS)).unwrap();
        assert!((s.block() - pd).norm() < 1e-13);
        assert!(k.block().norm() < 1e-13);

        let (s, k) = split_positive(&Cps::new(diag(&[0.5]), PLUS)).unwrap();
        assert_eq!(s.block(), &diag(&[0.5]));
        assert_eq!(k.block(), &diag(&[0.0]));

        assert!(matches!(split_positive(&Cps::new(diag(&[1.0]), Tails::BOTH)), Err(CogredientError::NotFsPlus(_))));
    }

    #[test]
    fn constant_parametrix() {
        let p = OperatorPath::constant(&Cps::new(diag(&[3.0, -1.0]), PLUS));
        let par = parametrix(&p, 8).unwrap();
        assert_eq!(par.sign, 1);
        for (m, k) in par.m.iter().zip(&par.k) {
            assert!((m - diag(&[3f64.powf(-0.5), 1.0])).norm() < 1e-13);
            assert!((k - diag(&[0.0, -2.0])).norm() < 1e-13);
        }
        assert!(par.max_relative_residual(&p).unwrap() <= RESIDUAL_TOL);
    }

    #[test]
    fn steep_pieces_between_samples_are_covered() {
        // knots 1e-3 apart: the block swings by 10 between two samples
        let knots = vec![0.0, 0.5, 0.501, 1.0];
        let samples = vec![diag(&[2.0, -1.0]), diag(&[-4.0, 3.0]), diag(&[6.0, -5.0]), diag(&[1.0, 0.5])];
        let p = OperatorPath::piecewise_linear(knots, samples, PLUS).unwrap();
        let par = parametrix(&p, 8).unwrap();
        assert!(par.max_relative_residual(&p).unwrap() <= RESIDUAL_TOL);
        assert!(par.anchors.len() > 8);
    }

    #[test]
    fn positive_path_has_no_compact_part() {
        let p = OperatorPath::affine(diag(&[1.0, 2.0]), diag(&[1.0, -1.5]), PLUS).unwrap();
        let par = parametrix(&p, 5).unwrap();
        for (i, &t) in par.ts.iter().enumerate() {
            assert!(par.k[i].norm() < 1e-14);
            let l = p.block_at(t).unwrap();
            let expect = linalg::sym_eigen(&l).unwrap().map(|e| 1.0 / e.sqrt());
            assert!((&par.m[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn crossing_path_needs_several_anchors() {
        let p = OperatorPath::affine(diag(&[-1.0, 0.5]), diag(&[2.0, -1.0]), PLUS).unwrap();
        let par = parametrix(&p, 64).unwrap();
        assert!(par.anchors.len() >= 2);
        assert!(par.max_relative_residual(&p).unwrap() <= RESIDUAL_TOL);
        assert_eq!(par.transformed_path(&p).unwrap().block_at(0.0).unwrap().nrows(), 2);
    }

    #[test]
    fn negative_component_through_negation() {
        let p = OperatorPath::affine(diag(&[1.0, -0.5]), diag(&[-2.0, 1.0]), Tails { plus: false, minus: true }).unwrap();
        let par = parametrix(&p, 16).unwrap();
        assert_eq!(par.sign, -1);
        assert!(par.max_relative_residual(&p).unwrap() <= RESIDUAL_TOL);
        assert!(matches!(parametrix(&p.to_piecewise_linear().compress(1), 4), Err(CogredientError::NotFsPlus(_))));
    }

    #[test]
    fn too_few_samples() {
        let p = OperatorPath::constant(&Cps::new(diag(&[1.0]), PLUS));
        assert_eq!(parametrix(&p, 1).unwrap_err(), CogredientError::TooFewSamples(1));
    }

    #[test]
    fn section_examples() {
        let tol = Tolerances::default();
        let sec = pointwise_section(&Cps::new(diag(&[2.0, -3.0]), Tails::BOTH), &tol).unwrap();
        assert!((sec.q.block() - diag(&[1.0, -1.0])).norm() < 1e-15);
        assert!((&sec.m - diag(&[2f64.sqrt(), 3f64.sqrt()])).norm() < 1e-14);
        assert!(sec.k.norm() < 1e-14);

        let sym = Cps::new(diag(&[1.0, -1.0, 1.0]), Tails::BOTH);
        let sec = pointwise_section(&sym, &tol).unwrap();
        assert_eq!(sec.q.block(), sym.block());
        assert!((&sec.m - Mat::identity(3, 3)).norm() < 1e-15);

        let sec = pointwise_section(&Cps::new(diag(&[0.0, 1.0]), Tails::BOTH), &tol).unwrap();
        assert!((sec.q.block() - Mat::identity(2, 2)).norm() < 1e-15);
        assert!((&sec.k - diag(&[-1.0, 0.0])).norm() < 1e-15);

        assert!(matches!(
            pointwise_section(&Cps::new(diag(&[1.0]), PLUS), &tol),
            Err(CogredientError::NotFsi(_))
        ));
    }
}
