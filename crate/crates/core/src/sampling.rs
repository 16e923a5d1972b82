//! Seeded random generators for actions, equivariant operators and paths.
//!
//! Used by the axiom suite, the `verify` command and the test suites.
//! Everything is driven by a caller-supplied `ChaCha8Rng`, so a seed pins
//! the output exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::grouprep::{self, GroupData, GroupPreset, OrthogonalAction, RepError};
use crate::linalg::{self, Mat};
use crate::operators::{OperatorError, OperatorPath, Tails};

/// Smallest |eigenvalue| allowed at the endpoints of generated paths.
pub const ENDPOINT_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathShape {
    Affine,
    PiecewiseLinear,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| uniform(rng))
}

/// Haar-ish random orthogonal matrix from the QR factor of a random matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let qr = random_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn rotation(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    linalg::from_rows(&[vec![c, -s], vec![s, c]])
}

// One explicit representation per entry: the image of every group element.
fn building_blocks(data: &GroupData) -> Vec<Vec<Mat>> {
    let order = data.group.order();
    let scalar = |f: &dyn Fn(usize) -> f64| -> Vec<Mat> { (0..order).map(|g| Mat::from_element(1, 1, f(g))).collect() };
    let mut blocks = vec![scalar(&|_| 1.0)];
    match data.group.preset() {
        Some(GroupPreset::Trivial) | None => {}
        Some(GroupPreset::Cyclic(n)) => {
            if n % 2 == 0 {
                blocks.push(scalar(&|k| if k % 2 == 0 { 1.0 } else { -1.0 }));
            }
            for j in 1..n.div_ceil(2) {
                blocks.push((0..n).map(|k| rotation(2.0 * PI * (j * k) as f64 / n as f64)).collect());
            }
        }
        Some(GroupPreset::Dihedral(n)) => {
            let sign = |x: usize| if x.is_multiple_of(2) { 1.0 } else { -1.0 };
            blocks.push(scalar(&|g| sign(g / n)));
            if n % 2 == 0 {
                blocks.push(scalar(&|g| sign(g % n)));
                blocks.push(scalar(&|g| sign(g % n + g / n)));
            }
            let flip = linalg::diag(&[1.0, -1.0]);
            for j in 1..n.div_ceil(2) {
                blocks.push(
                    (0..2 * n)
                        .map(|g| {
                            let r = rotation(2.0 * PI * (j * (g % n)) as f64 / n as f64);
                            if g / n == 1 {
                                r * &flip
                            } else {
                                r
                            }
                        })
                        .collect(),
                );
            }
        }
    }
    // the regular representation contains every irreducible
    if order > 1 {
        blocks.push(
            (0..order)
                .map(|g| {
                    let mut p = Mat::zeros(order, order);
                    for h in 0..order {
                        p[(data.group.mul(g, h), h)] = 1.0;
                    }
                    p
                })
                .collect(),
        );
    }
    blocks
}

/// A random orthogonal action of dimension `dim`: a direct sum of small
/// explicit representations, conjugated by a random orthogonal matrix.
pub fn random_action(data: Arc<GroupData>, dim: usize, rng: &mut ChaCha8Rng) -> Result<OrthogonalAction, RepError> {
    let blocks = building_blocks(&data);
    let order = data.group.order();
    let mut chosen: Vec<&Vec<Mat>> = Vec::new();
    let mut filled = 0;
    while filled < dim {
        let fitting: Vec<&Vec<Mat>> = blocks.iter().filter(|b| filled + b[0].nrows() <= dim).collect();
        let b = fitting[rng.random_range(0..fitting.len())];
        filled += b[0].nrows();
        chosen.push(b);
    }
    let matrices: Vec<Mat> = (0..order)
        .map(|g| {
            let parts: Vec<&Mat> = chosen.iter().map(|b| &b[g]).collect();
            linalg::block_diag(&parts)
        })
        .map(|m| if dim == 0 { Mat::zeros(0, 0) } else { m })
        .collect();
    let q = random_orthogonal(dim, rng);
    let action = OrthogonalAction::new(data, matrices)?;
    Ok(action.conjugated(&q))
}

/// Random symmetric matrix commuting with the action.
pub fn random_equivariant_symmetric(action: &OrthogonalAction, scale: f64, rng: &mut ChaCha8Rng) -> Mat {
    let d = action.dim();
    let x = linalg::symmetrize(&random_matrix(d, d, rng)) * scale;
    linalg::symmetrize(&action.average(&x))
}

/// Shift `a` by a multiple of the identity (which commutes with any action)
/// until every eigenvalue is at least `gap` away from zero.
pub fn regularize(a: &Mat, gap: f64) -> Result<Mat, OperatorError> {
    let d = a.nrows();
    if d == 0 {
        return Ok(a.clone());
    }
    let values = linalg::sym_eigen(a)?.values;
    let clear = |shift: f64| values.iter().all(|e| (e + shift).abs() >= gap);
    let mut shift = 0.0;
    let mut step: usize = 0;
    while !clear(shift) {
        step += 1;
        // 0, +g, -g, +2g, -2g, ... always terminates
        let k = step.div_ceil(2) as f64 * gap;
        shift = if step % 2 == 1 { k } else { -k };
    }
    Ok(a + Mat::identity(d, d) * shift)
}

/// Random equivariant path with endpoints regularized to be invertible.
pub fn random_path(
    action: &OrthogonalAction,
    tails: Tails,
    shape: PathShape,
    rng: &mut ChaCha8Rng,
) -> Result<OperatorPath, OperatorError> {
    let scale = 2.0;
    let start = regularize(&random_equivariant_symmetric(action, scale, rng), ENDPOINT_GAP)?;
    let end = regularize(&random_equivariant_symmetric(action, scale, rng), ENDPOINT_GAP)?;
    match shape {
        PathShape::Affine => OperatorPath::affine(start.clone(), end - start, tails),
        PathShape::PiecewiseLinear => {
            let inner = rng.random_range(1..4);
            let mut knots: Vec<f64> = (0..inner).map(|_| rng.random_range(0.05..0.95)).collect();
            knots.sort_by(f64::total_cmp);
            knots.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let mut samples = vec![start];
            for _ in &knots {
                samples.push(random_equivariant_symmetric(action, scale, rng));
            }
            samples.push(end);
            knots.insert(0, 0.0);
            knots.push(1.0);
            OperatorPath::piecewise_linear(knots, samples, tails)
        }
    }
}

/// `p(phi(s))` sampled on a grid, for a random smooth increasing bijection
/// `phi` of [0, 1]. Endpoints are preserved exactly.
pub fn reparametrize(p: &OperatorPath, rng: &mut ChaCha8Rng) -> Result<OperatorPath, OperatorError> {
    let alpha = rng.random_range(-0.9..0.9);
    let phi = |s: f64| (s + alpha * (PI * s).sin() / PI).clamp(0.0, 1.0);
    let n = rng.random_range(4..12);
    let knots: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let samples = knots
        .iter()
        .map(|&s| {
            let t = if s == 0.0 || s == 1.0 { s } else { phi(s) };
            p.block_at(t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    OperatorPath::piecewise_linear(knots, samples, p.tails())
}

/// Random orthogonal matrix commuting with the action: random signs on
/// the isotypical components times the Cayley transform of a random
/// equivariant skew matrix.
pub fn random_equivariant_orthogonal(action: &OrthogonalAction, rng: &mut ChaCha8Rng) -> Result<Mat, RepError> {
    let d = action.dim();
    let mut signs = Mat::zeros(d, d);
    for nu in 0..action.table().len() {
        let p = grouprep::isotypical_projection(action, nu)?;
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        signs += p * s;
    }
    let x = random_matrix(d, d, rng);
    let k = action.average(&((&x - x.transpose()) * 0.5));
    let id = Mat::identity(d, d);
    let cayley = (&id + &k)
        .try_inverse()
        .map(|inv| (&id - &k) * inv)
        .ok_or_else(|| RepError::BadAction("Cayley transform is singular".into()))?;
    Ok(signs * cayley)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn groups() -> Vec<Arc<GroupData>> {
        [
            GroupPreset::Trivial,
            GroupPreset::Cyclic(2),
            GroupPreset::Cyclic(3),
            GroupPreset::Cyclic(4),
            GroupPreset::Dihedral(3),
            GroupPreset::Dihedral(4),
        ]
        .into_iter()
        .map(|p| Arc::new(GroupData::preset(p).unwrap()))
        .collect()
    }

    #[test]
    fn random_actions_are_valid_and_equivariant_matrices_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for data in groups() {
            for dim in [1, 3, 6] {
                let a = random_action(data.clone(), dim, &mut rng).unwrap();
                assert_eq!(a.dim(), dim);
                let s = random_equivariant_symmetric(&a, 1.0, &mut rng);
                assert!(a.commutator_norm(&s).unwrap() < 1e-12);
                let u = random_equivariant_orthogonal(&a, &mut rng).unwrap();
                assert!(linalg::orthonormality_defect(&u) < 1e-12);
                assert!(a.commutator_norm(&u).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn generated_paths_have_invertible_ends() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = groups()[4].clone();
        let a = random_action(data, 5, &mut rng).unwrap();
        for shape in [PathShape::Affine, PathShape::PiecewiseLinear] {
            let p = random_path(&a, Tails::BOTH, shape, &mut rng).unwrap();
            for t in [0.0, 1.0] {
                let e = linalg::sym_eigen(&p.block_at(t).unwrap()).unwrap();
                assert!(e.values.iter().all(|x| x.abs() >= ENDPOINT_GAP - 1e-12));
            }
        }
    }

    #[test]
    fn reparametrization_keeps_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_action(groups()[1].clone(), 4, &mut rng).unwrap();
        let p = random_path(&a, Tails::NONE, PathShape::PiecewiseLinear, &mut rng).unwrap();
        let q = reparametrize(&p, &mut rng).unwrap();
        for t in [0.0, 1.0] {
            assert_eq!(p.block_at(t).unwrap(), q.block_at(t).unwrap());
        }
    }

    #[test]
    fn same_seed_same_output() {
        let data = groups()[3].clone();
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let a = random_action(data.clone(), 4, &mut rng).unwrap();
            random_path(&a, Tails::NONE, PathShape::Affine, &mut rng).unwrap()
        };
        assert_eq!(make(), make());
    }
}
