//! Finite groups, real character tables and the real representation ring.
//!
//! A [`FiniteGroup`] is an explicit multiplication table with its conjugacy
//! classes. A [`RealCharacterTable`] lists the real irreducible characters
//! together with their Frobenius-Schur self-pairing (1 real, 2 complex,
//! 4 quaternionic type). [`VirtualRep`] is an integer multiplicity vector
//! over those irreducibles, i.e. an element of RO(G).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, LinalgError, Mat};

/// Absolute tolerance for character orthogonality.
pub const CHAR_ORTHO_TOL: f64 = 1e-9;
/// Largest admissible rounding residual for a multiplicity.
pub const MULTIPLICITY_TOL: f64 = 1e-6;
/// Default invariance tolerance for `character_of_subspace`.
pub const DEFAULT_TOL_INV: f64 = 1e-7;
/// Orthogonality tolerance for action matrices.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Homomorphism tolerance for action matrices.
pub const HOMOMORPHISM_TOL: f64 = 1e-9;
/// Tolerance for the isotypical projection checks.
pub const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepError {
    #[error("not a group: {0}")]
    NonGroup(String),
    #[error("bad character table: {0}")]
    BadCharacterTable(String),
    #[error("bad action: {0}")]
    BadAction(String),
    #[error("subspace is not invariant (commutator norm {norm:e} exceeds {tol:e})")]
    NotInvariant { norm: f64, tol: f64 },
    #[error("frame columns are not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("multiplicity of {irrep} is not integral (value {value}, residual {residual:e})")]
    NonIntegralMultiplicity { irrep: String, value: f64, residual: f64 },
    #[error("virtual representations belong to different character tables")]
    TableMismatch,
    #[error("operation requires the group Z2, got a group of order {0}")]
    WrongGroup(usize),
    #[error("isotypical projection residual {0:e} exceeds tolerance")]
    ProjectionResidual(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Named presets with built-in real character tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupPreset {
    Trivial,
    /// Cyclic group of order n; element k is the k-th power of the generator.
    Cyclic(usize),
    /// Dihedral group of order 2n; element `k + n*f` is `r^k s^f`.
    Dihedral(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup {
    order: usize,
    mult: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
    preset: Option<GroupPreset>,
}

impl FiniteGroup {
    /// Validate a multiplication table and conjugacy class partition.
    ///
    /// `classes` may be `None`, in which case classes are computed.
    pub fn from_table(
        mult: Vec<Vec<usize>>,
        classes: Option<Vec<Vec<usize>>>,
    ) -> Result<Self, RepError> {
        let order = mult.len();
        if order == 0 {
            return Err(RepError::NonGroup("empty multiplication table".into()));
        }
        for (i, row) in mult.iter().enumerate() {
            if row.len() != order {
                return Err(RepError::NonGroup(format!("row {i} has length {}", row.len())));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= order) {
                return Err(RepError::NonGroup(format!("entry {bad} in row {i} out of range")));
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|g| mult[e][g] == g && mult[g][e] == g))
            .ok_or_else(|| RepError::NonGroup("no identity element".into()))?;
        let mut inverse = vec![0; order];
        for g in 0..order {
            inverse[g] = (0..order)
                .find(|&h| mult[g][h] == identity && mult[h][g] == identity)
                .ok_or_else(|| RepError::NonGroup(format!("element {g} has no inverse")))?;
        }
        for a in 0..order {
            for b in 0..order {
                for c in 0..order {
                    if mult[mult[a][b]][c] != mult[a][mult[b][c]] {
                        return Err(RepError::NonGroup(format!(
                            "associativity fails for ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }

        let conj_class = |g: usize| -> Vec<usize> {
            let mut cls: Vec<usize> = (0..order).map(|h| mult[mult[h][g]][inverse[h]]).collect();
            cls.sort_unstable();
            cls.dedup();
            cls
        };

        let classes = match classes {
            Some(cls) => {
                let mut seen = vec![false; order];
                for c in &cls {
                    if c.is_empty() {
                        return Err(RepError::NonGroup("empty conjugacy class".into()));
                    }
                    for &g in c {
                        if g >= order || seen[g] {
                            return Err(RepError::NonGroup(format!(
                                "classes do not partition the group (element {g})"
                            )));
                        }
                        seen[g] = true;
                    }
                    let mut sorted = c.clone();
                    sorted.sort_unstable();
                    if sorted != conj_class(c[0]) {
                        return Err(RepError::NonGroup(format!(
                            "class containing {} is not a conjugacy class",
                            c[0]
                        )));
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err(RepError::NonGroup("classes do not cover the group".into()));
                }
                cls
            }
            None => {
                let mut seen = vec![false; order];
                let mut out = Vec::new();
                for g in 0..order {
                    if !seen[g] {
                        let c = conj_class(g);
                        for &h in &c {
                            seen[h] = true;
                        }
                        out.push(c);
                    }
                }
                out
            }
        };
        let mut class_of = vec![0; order];
        for (ci, c) in classes.iter().enumerate() {
            for &g in c {
                class_of[g] = ci;
            }
        }
        Ok(Self { order, mult, identity, inverse, classes, class_of, preset: None })
    }

    pub fn trivial() -> Self {
        let mut g = Self::from_table(vec![vec![0]], None).expect("trivial group");
        g.preset = Some(GroupPreset::Trivial);
        g
    }

    pub fn cyclic(n: usize) -> Result<Self, RepError> {
        if n == 0 {
            return Err(RepError::NonGroup("cyclic group needs n >= 1".into()));
        }
        let mult = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let classes = (0..n).map(|k| vec![k]).collect();
        let mut g = Self::from_table(mult, Some(classes))?;
        g.preset = Some(GroupPreset::Cyclic(n));
        Ok(g)
    }

    pub fn dihedral(n: usize) -> Result<Self, RepError> {
        if n == 0 {
            return Err(RepError::NonGroup("dihedral group needs n >= 1".into()));
        }
        let idx = |k: usize, f: usize| k + n * f;
        let mut mult = vec![vec![0; 2 * n]; 2 * n];
        for a in 0..n {
            for f in 0..2 {
                for b in 0..n {
                    for h in 0..2 {
                        // r^a s^f r^b s^h = r^(a + (-1)^f b) s^(f+h)
                        let k = if f == 0 { (a + b) % n } else { (a + n - b) % n };
                        mult[idx(a, f)][idx(b, h)] = idx(k, (f + h) % 2);
                    }
                }
            }
        }
        let mut classes = vec![vec![idx(0, 0)]];
        for k in 1..n {
            let partner = n - k;
            if k < partner {
                classes.push(vec![idx(k, 0), idx(partner, 0)]);
            } else if k == partner {
                classes.push(vec![idx(k, 0)]);
            }
        }
        if n % 2 == 1 {
            classes.push((0..n).map(|k| idx(k, 1)).collect());
        } else {
            classes.push((0..n).step_by(2).map(|k| idx(k, 1)).collect());
            classes.push((1..n).step_by(2).map(|k| idx(k, 1)).collect());
        }
        let mut g = Self::from_table(mult, Some(classes))?;
        g.preset = Some(GroupPreset::Dihedral(n));
        Ok(g)
    }

    pub fn order(&self) -> usize {
        self.order
    }
    pub fn identity(&self) -> usize {
        self.identity
    }
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a][b]
    }
    pub fn inverse(&self, g: usize) -> usize {
        self.inverse[g]
    }
    pub fn mult_table(&self) -> &[Vec<usize>] {
        &self.mult
    }
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }
    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }
    pub fn class_of(&self, g: usize) -> usize {
        self.class_of[g]
    }
    pub fn preset(&self) -> Option<GroupPreset> {
        self.preset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Irrep {
    pub name: String,
    pub degree: usize,
    /// Frobenius-Schur self-pairing: 1, 2 or 4.
    pub schur_norm: u32,
    /// One value per conjugacy class.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealCharacterTable {
    irreps: Vec<Irrep>,
    names: Arc<[String]>,
}

impl RealCharacterTable {
    /// Validate a table against a group: value count, degree at the identity,
    /// Schur norms and the orthogonality relations.
    pub fn new(group: &FiniteGroup, irreps: Vec<Irrep>) -> Result<Self, RepError> {
        if irreps.is_empty() {
            return Err(RepError::BadCharacterTable("no irreducibles".into()));
        }
        let nclass = group.classes().len();
        let sizes = group.class_sizes();
        let id_class = group.class_of(group.identity());
        for ir in &irreps {
            if ir.values.len() != nclass {
                return Err(RepError::BadCharacterTable(format!(
                    "{} has {} values for {} classes",
                    ir.name,
                    ir.values.len(),
                    nclass
                )));
            }
            if ![1, 2, 4].contains(&ir.schur_norm) {
                return Err(RepError::BadCharacterTable(format!(
                    "{} has schur norm {} (expected 1, 2 or 4)",
                    ir.name, ir.schur_norm
                )));
            }
            if ir.degree == 0 || (ir.values[id_class] - ir.degree as f64).abs() > CHAR_ORTHO_TOL {
                return Err(RepError::BadCharacterTable(format!(
                    "{}: value at identity {} does not match degree {}",
                    ir.name, ir.values[id_class], ir.degree
                )));
            }
        }
        for (i, a) in irreps.iter().enumerate() {
            if irreps[..i].iter().any(|b| b.name == a.name) {
                return Err(RepError::BadCharacterTable(format!("duplicate name {}", a.name)));
            }
            for (j, b) in irreps.iter().enumerate().skip(i) {
                let ip = class_inner(&sizes, group.order(), &a.values, &b.values);
                let expected = if i == j { a.schur_norm as f64 } else { 0.0 };
                if (ip - expected).abs() > CHAR_ORTHO_TOL {
                    return Err(RepError::BadCharacterTable(format!(
                        "<{}, {}> = {ip}, expected {expected}",
                        a.name, b.name
                    )));
                }
            }
        }
        let names: Arc<[String]> = irreps.iter().map(|ir| ir.name.clone()).collect();
        Ok(Self { irreps, names })
    }

    /// Built-in table for a preset group.
    pub fn for_preset(group: &FiniteGroup) -> Result<Self, RepError> {
        let preset = group
            .preset()
            .ok_or_else(|| RepError::BadCharacterTable("group has no built-in table".into()))?;
        let classes = group.classes();
        let mut irreps = Vec::new();
        match preset {
            GroupPreset::Trivial => irreps.push(Irrep {
                name: "trivial".into(),
                degree: 1,
                schur_norm: 1,
                values: vec![1.0],
            }),
            GroupPreset::Cyclic(n) => {
                let rep = |c: &Vec<usize>| c[0];
                irreps.push(constant_irrep("trivial", classes.len()));
                if n % 2 == 0 {
                    irreps.push(Irrep {
                        name: "sign".into(),
                        degree: 1,
                        schur_norm: 1,
                        values: classes.iter().map(|c| if rep(c) % 2 == 0 { 1.0 } else { -1.0 }).collect(),
                    });
                }
                for j in 1..n.div_ceil(2) {
                    if 2 * j == n {
                        continue;
                    }
                    irreps.push(Irrep {
                        name: format!("rot{j}"),
                        degree: 2,
                        schur_norm: 2,
                        values: classes
                            .iter()
                            .map(|c| 2.0 * (2.0 * PI * (j * rep(c)) as f64 / n as f64).cos())
                            .collect(),
                    });
                }
            }
            GroupPreset::Dihedral(n) => {
                let decode = |g: usize| (g % n, g / n);
                irreps.push(constant_irrep("trivial", classes.len()));
                let one_dim = |name: &str, f: &dyn Fn(usize, usize) -> f64| Irrep {
                    name: name.into(),
                    degree: 1,
                    schur_norm: 1,
                    values: classes
                        .iter()
                        .map(|c| {
                            let (k, s) = decode(c[0]);
                            f(k, s)
                        })
                        .collect(),
                };
                let parity = |x: usize| if x.is_multiple_of(2) { 1.0 } else { -1.0 };
                irreps.push(one_dim("sign", &|_, s| parity(s)));
                if n % 2 == 0 {
                    irreps.push(one_dim("alt", &|k, _| parity(k)));
                    irreps.push(one_dim("alt_sign", &|k, s| parity(k) * parity(s)));
                }
                for j in 1..n.div_ceil(2) {
                    if 2 * j == n {
                        continue;
                    }
                    irreps.push(Irrep {
                        name: format!("std{j}"),
                        degree: 2,
                        schur_norm: 1,
                        values: classes
                            .iter()
                            .map(|c| {
                                let (k, s) = decode(c[0]);
                                if s == 1 {
                                    0.0
                                } else {
                                    2.0 * (2.0 * PI * (j * k) as f64 / n as f64).cos()
                                }
                            })
                            .collect(),
                    });
                }
            }
        }
        Self::new(group, irreps)
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }
    pub fn len(&self) -> usize {
        self.irreps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.irreps.is_empty()
    }
    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.irreps.iter().position(|ir| ir.name == name)
    }
    pub fn zero(&self) -> VirtualRep {
        VirtualRep { coeffs: vec![0; self.len()], names: self.names.clone() }
    }
    /// The class `[irrep] * count`.
    pub fn basis(&self, irrep: usize, count: i64) -> VirtualRep {
        let mut v = self.zero();
        v.coeffs[irrep] = count;
        v
    }
    pub fn from_coeffs(&self, coeffs: Vec<i64>) -> Result<VirtualRep, RepError> {
        if coeffs.len() != self.len() {
            return Err(RepError::TableMismatch);
        }
        Ok(VirtualRep { coeffs, names: self.names.clone() })
    }
}

fn constant_irrep(name: &str, nclass: usize) -> Irrep {
    Irrep { name: name.into(), degree: 1, schur_norm: 1, values: vec![1.0; nclass] }
}

fn class_inner(sizes: &[usize], order: usize, a: &[f64], b: &[f64]) -> f64 {
    sizes.iter().zip(a).zip(b).map(|((&s, x), y)| s as f64 * x * y).sum::<f64>() / order as f64
}

/// A group together with its real character table.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupData {
    pub group: FiniteGroup,
    pub table: RealCharacterTable,
}

impl GroupData {
    pub fn preset(preset: GroupPreset) -> Result<Self, RepError> {
        let group = match preset {
            GroupPreset::Trivial => FiniteGroup::trivial(),
            GroupPreset::Cyclic(n) => FiniteGroup::cyclic(n)?,
            GroupPreset::Dihedral(n) => FiniteGroup::dihedral(n)?,
        };
        let table = RealCharacterTable::for_preset(&group)?;
        Ok(Self { group, table })
    }

    pub fn explicit(
        mult: Vec<Vec<usize>>,
        classes: Vec<Vec<usize>>,
        irreps: Vec<Irrep>,
    ) -> Result<Self, RepError> {
        let group = FiniteGroup::from_table(mult, Some(classes))?;
        let table = RealCharacterTable::new(&group, irreps)?;
        Ok(Self { group, table })
    }

    /// Character value of irrep `nu` at group element `g`.
    pub fn char_at(&self, nu: usize, g: usize) -> f64 {
        self.table.irreps[nu].values[self.group.class_of(g)]
    }
}

/// Orthogonal action of a finite group on R^d, one matrix per element.
#[derive(Debug, Clone)]
pub struct OrthogonalAction {
    data: Arc<GroupData>,
    dim: usize,
    matrices: Vec<Mat>,
}

impl OrthogonalAction {
    /// Build from a full list of element matrices.
    pub fn new(data: Arc<GroupData>, matrices: Vec<Mat>) -> Result<Self, RepError> {
        let order = data.group.order();
        if matrices.len() != order {
            return Err(RepError::BadAction(format!(
                "{} matrices for a group of order {order}",
                matrices.len()
            )));
        }
        let dim = matrices[0].nrows();
        for (g, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(RepError::BadAction(format!("matrix for element {g} is not {dim}x{dim}")));
            }
        }
        let action = Self { data, dim, matrices };
        action.validate()?;
        Ok(action)
    }

    /// Build from the images of a generating set, closing under products.
    pub fn from_generators(
        data: Arc<GroupData>,
        dim: usize,
        generators: &[(usize, Mat)],
    ) -> Result<Self, RepError> {
        let group = &data.group;
        let order = group.order();
        for (g, m) in generators {
            if *g >= order {
                return Err(RepError::BadAction(format!("element index {g} out of range")));
            }
            if m.nrows() != dim || m.ncols() != dim {
                return Err(RepError::BadAction(format!("matrix for element {g} is not {dim}x{dim}")));
            }
            check_orthogonal(*g, m)?;
        }
        let mut images: Vec<Option<Mat>> = vec![None; order];
        images[group.identity()] = Some(Mat::identity(dim, dim));
        let mut frontier = vec![group.identity()];
        while let Some(h) = frontier.pop() {
            for (s, ms) in generators {
                let prod = group.mul(h, *s);
                let m = images[h].as_ref().expect("visited") * ms;
                match &images[prod] {
                    Some(existing) => {
                        let err = (existing - &m).norm();
                        if err > HOMOMORPHISM_TOL * (1.0 + dim as f64) {
                            return Err(RepError::BadAction(format!(
                                "generator images are inconsistent at element {prod} (mismatch {err:e})"
                            )));
                        }
                    }
                    None => {
                        images[prod] = Some(m);
                        frontier.push(prod);
                    }
                }
            }
        }
        if let Some(missing) = images.iter().position(Option::is_none) {
            return Err(RepError::BadAction(format!(
                "generators do not generate the group (element {missing} unreachable)"
            )));
        }
        Self::new(data, images.into_iter().map(|m| m.expect("checked")).collect())
    }

    /// The action where every element acts as the identity.
    pub fn trivial(data: Arc<GroupData>, dim: usize) -> Self {
        let matrices = vec![Mat::identity(dim, dim); data.group.order()];
        Self { data, dim, matrices }
    }

    fn validate(&self) -> Result<(), RepError> {
        let group = &self.data.group;
        for (g, m) in self.matrices.iter().enumerate() {
            check_orthogonal(g, m)?;
        }
        let id = &self.matrices[group.identity()];
        if (id - Mat::identity(self.dim, self.dim)).norm() > HOMOMORPHISM_TOL {
            return Err(RepError::BadAction("identity does not act as the identity".into()));
        }
        for a in 0..group.order() {
            for b in 0..group.order() {
                let lhs = &self.matrices[group.mul(a, b)];
                let err = (lhs - &self.matrices[a] * &self.matrices[b]).norm();
                if err > HOMOMORPHISM_TOL {
                    return Err(RepError::BadAction(format!(
                        "not a homomorphism at ({a}, {b}): mismatch {err:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn data(&self) -> &Arc<GroupData> {
        &self.data
    }
    pub fn group(&self) -> &FiniteGroup {
        &self.data.group
    }
    pub fn table(&self) -> &RealCharacterTable {
        &self.data.table
    }
    pub fn matrix(&self, g: usize) -> &Mat {
        &self.matrices[g]
    }
    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    /// Direct sum with another action of the same group.
    pub fn direct_sum(&self, other: &OrthogonalAction) -> Result<Self, RepError> {
        if !Arc::ptr_eq(&self.data, &other.data) && self.data != other.data {
            return Err(RepError::TableMismatch);
        }
        let matrices = self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| linalg::block_diag(&[a, b]))
            .collect();
        Ok(Self { data: self.data.clone(), dim: self.dim + other.dim, matrices })
    }

    /// Extend by `extra` coordinates carrying the trivial action.
    pub fn extend_trivial(&self, extra: usize) -> Self {
        if extra == 0 {
            return self.clone();
        }
        let id = Mat::identity(extra, extra);
        let matrices = self.matrices.iter().map(|m| linalg::block_diag(&[m, &id])).collect();
        Self { data: self.data.clone(), dim: self.dim + extra, matrices }
    }

    /// Conjugate every matrix: `g -> q rho(g) q^T`.
    pub fn conjugated(&self, q: &Mat) -> Self {
        let qt = q.transpose();
        let matrices = self.matrices.iter().map(|m| q * m * &qt).collect();
        Self { data: self.data.clone(), dim: self.dim, matrices }
    }

    /// Largest `||rho(g) P - P rho(g)||_2` over all elements.
    pub fn commutator_norm(&self, op: &Mat) -> Result<f64, RepError> {
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(RepError::DimMismatch { expected: self.dim, got: op.nrows() });
        }
        let mut worst = 0.0f64;
        for m in &self.matrices {
            let c = m * op - op * m;
            worst = worst.max(linalg::spectral_norm(&c)?);
        }
        Ok(worst)
    }

    /// Average `(1/|G|) sum_g rho(g) X rho(g)^T`, an equivariant matrix.
    pub fn average(&self, x: &Mat) -> Mat {
        let mut acc = Mat::zeros(self.dim, self.dim);
        for m in &self.matrices {
            acc += m * x * m.transpose();
        }
        acc / self.matrices.len() as f64
    }
}

fn check_orthogonal(g: usize, m: &Mat) -> Result<(), RepError> {
    let n = m.nrows();
    let defect = (m.transpose() * m - Mat::identity(n, n)).norm();
    if defect > ORTHOGONALITY_TOL {
        return Err(RepError::BadAction(format!(
            "matrix for element {g} is not orthogonal (defect {defect:e})"
        )));
    }
    Ok(())
}

/// A class function: one value per conjugacy class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFunction(pub Vec<f64>);

/// Character of the invariant subspace spanned by an orthonormal frame.
pub fn character_of_subspace(
    action: &OrthogonalAction,
    basis: &Mat,
    tol_inv: f64,
) -> Result<ClassFunction, RepError> {
    let group = action.group();
    let nclass = group.classes().len();
    if basis.ncols() == 0 {
        return Ok(ClassFunction(vec![0.0; nclass]));
    }
    if basis.nrows() != action.dim() {
        return Err(RepError::DimMismatch { expected: action.dim(), got: basis.nrows() });
    }
    let defect = linalg::orthonormality_defect(basis);
    if defect > 1e-8 {
        return Err(RepError::NotOrthonormal(defect));
    }
    let proj = linalg::projector(basis);
    let norm = action.commutator_norm(&proj)?;
    if norm > tol_inv {
        return Err(RepError::NotInvariant { norm, tol: tol_inv });
    }
    let bt = basis.transpose();
    let values = group
        .classes()
        .iter()
        .map(|c| (&bt * action.matrix(c[0]) * basis).trace())
        .collect();
    Ok(ClassFunction(values))
}

/// Decompose a class function into multiplicities of the real irreducibles.
pub fn multiplicity_vector(
    chi: &ClassFunction,
    data: &GroupData,
) -> Result<VirtualRep, RepError> {
    let sizes = data.group.class_sizes();
    if chi.0.len() != sizes.len() {
        return Err(RepError::DimMismatch { expected: sizes.len(), got: chi.0.len() });
    }
    let mut coeffs = Vec::with_capacity(data.table.len());
    for ir in data.table.irreps() {
        let ip = class_inner(&sizes, data.group.order(), &chi.0, &ir.values);
        let value = ip / ir.schur_norm as f64;
        let rounded = value.round();
        let residual = (value - rounded).abs();
        if residual >= MULTIPLICITY_TOL {
            return Err(RepError::NonIntegralMultiplicity { irrep: ir.name.clone(), value, residual });
        }
        coeffs.push(rounded as i64);
    }
    data.table.from_coeffs(coeffs)
}

/// RO(G)-class of the invariant subspace spanned by `basis`.
pub fn class_of_subspace(
    action: &OrthogonalAction,
    basis: &Mat,
    tol_inv: f64,
) -> Result<VirtualRep, RepError> {
    let chi = character_of_subspace(action, basis, tol_inv)?;
    multiplicity_vector(&chi, action.data())
}

/// Orthogonal projection onto the isotypical component of irrep `nu`.
pub fn isotypical_projection(action: &OrthogonalAction, nu: usize) -> Result<Mat, RepError> {
    let data = action.data();
    let ir = &data.table.irreps()[nu];
    let d = action.dim();
    let mut acc = Mat::zeros(d, d);
    for g in 0..data.group.order() {
        acc += action.matrix(g) * data.char_at(nu, g);
    }
    let scale = ir.degree as f64 / (data.group.order() as f64 * ir.schur_norm as f64);
    let p = linalg::symmetrize(&(acc * scale));
    if projection_residual(&p) <= PROJECTION_TOL {
        return Ok(p);
    }
    // Fall back to the eigenvalue-1 eigenspace of the averaged operator.
    let eig = linalg::sym_eigen(&p)?;
    let frame = eig.select(|e| e > 0.5);
    let q = linalg::projector(&frame);
    let res = projection_residual(&q).max(action.commutator_norm(&q)?);
    if res > PROJECTION_TOL {
        return Err(RepError::ProjectionResidual(res));
    }
    Ok(q)
}

fn projection_residual(p: &Mat) -> f64 {
    (p * p - p).norm()
}

/// Element of RO(G): integer multiplicities over a character table.
#[derive(Clone, PartialEq, Eq)]
pub struct VirtualRep {
    coeffs: Vec<i64>,
    names: Arc<[String]>,
}

impl VirtualRep {
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }
    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
    pub fn get(&self, name: &str) -> Option<i64> {
        self.names.iter().position(|n| n == name).map(|i| self.coeffs[i])
    }

    fn same_table(&self, other: &VirtualRep) -> bool {
        Arc::ptr_eq(&self.names, &other.names) || self.names == other.names
    }

    pub fn checked_add(&self, other: &VirtualRep) -> Result<VirtualRep, RepError> {
        if !self.same_table(other) {
            return Err(RepError::TableMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(VirtualRep { coeffs, names: self.names.clone() })
    }

    pub fn checked_sub(&self, other: &VirtualRep) -> Result<VirtualRep, RepError> {
        self.checked_add(&other.neg())
    }

    pub fn neg(&self) -> VirtualRep {
        VirtualRep { coeffs: self.coeffs.iter().map(|c| -c).collect(), names: self.names.clone() }
    }

    /// Pairs `(irrep name, multiplicity)` in table order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, i64)> {
        self.names.iter().map(String::as_str).zip(self.coeffs.iter().copied())
    }
}

impl fmt::Debug for VirtualRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries()).finish()
    }
}

impl fmt::Display for VirtualRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries().map(|(n, c)| format!("{n}:{c}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// The forgetful map RO(G) -> Z, `[U] - [V] -> dim U - dim V`.
pub fn forgetful(v: &VirtualRep, table: &RealCharacterTable) -> i64 {
    v.coeffs.iter().zip(table.irreps()).map(|(c, ir)| c * ir.degree as i64).sum()
}

/// The isomorphism RO(Z2) -> Z + Z given by (dimension, fixed-point dimension).
pub fn phi_z2(v: &VirtualRep, data: &GroupData) -> Result<(i64, i64), RepError> {
    if data.group.order() != 2 || data.table.len() != 2 {
        return Err(RepError::WrongGroup(data.group.order()));
    }
    let triv = data
        .table
        .irreps()
        .iter()
        .position(|ir| ir.values.iter().all(|&x| (x - 1.0).abs() < CHAR_ORTHO_TOL))
        .ok_or(RepError::WrongGroup(2))?;
    let sign = 1 - triv;
    let (ct, cs) = (v.coeffs[triv], v.coeffs[sign]);
    Ok((ct + cs, ct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, from_rows};

    fn z2() -> Arc<GroupData> {
        Arc::new(GroupData::preset(GroupPreset::Cyclic(2)).unwrap())
    }

    fn z2_action(m: Mat) -> OrthogonalAction {
        let data = z2();
        let d = m.nrows();
        OrthogonalAction::new(data, vec![Mat::identity(d, d), m]).unwrap()
    }

    #[test]
    fn cyclic2_table() {
        let g = GroupData::preset(GroupPreset::Cyclic(2)).unwrap();
        let names: Vec<_> = g.table.irreps().iter().map(|i| (i.name.as_str(), i.degree, i.schur_norm)).collect();
        assert_eq!(names, vec![("trivial", 1, 1), ("sign", 1, 1)]);
    }

    #[test]
    fn cyclic3_table() {
        let g = GroupData::preset(GroupPreset::Cyclic(3)).unwrap();
        let irreps = g.table.irreps();
        assert_eq!(irreps.len(), 2);
        assert_eq!((irreps[1].degree, irreps[1].schur_norm), (2, 2));
        let v = &irreps[1].values;
        assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] + 1.0).abs() < 1e-12 && (v[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_table_is_integers() {
        let g = GroupData::preset(GroupPreset::Trivial).unwrap();
        assert_eq!(g.table.len(), 1);
        assert_eq!(forgetful(&g.table.basis(0, -3), &g.table), -3);
    }

    #[test]
    fn presets_validate() {
        for n in 1..=8 {
            let c = GroupData::preset(GroupPreset::Cyclic(n)).unwrap();
            let d = GroupData::preset(GroupPreset::Dihedral(n)).unwrap();
            // every irreducible of an abelian group is counted once per class pair
            assert_eq!(c.group.order(), n);
            assert_eq!(d.group.order(), 2 * n);
        }
        let d3 = GroupData::preset(GroupPreset::Dihedral(3)).unwrap();
        assert_eq!(d3.group.classes().len(), 3);
        assert_eq!(d3.table.len(), 3);
        let d4 = GroupData::preset(GroupPreset::Dihedral(4)).unwrap();
        assert_eq!(d4.group.classes().len(), 5);
        assert_eq!(d4.table.len(), 5);
    }

    #[test]
    fn non_group_is_rejected() {
        // not associative-with-inverses: constant table
        let err = FiniteGroup::from_table(vec![vec![0, 0], vec![0, 0]], None).unwrap_err();
        assert!(matches!(err, RepError::NonGroup(_)));
        let err = FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]], Some(vec![vec![0, 1]]))
            .unwrap_err();
        assert!(matches!(err, RepError::NonGroup(_)));
    }

    #[test]
    fn bad_table_is_rejected() {
        let g = FiniteGroup::cyclic(2).unwrap();
        let irreps = vec![
            Irrep { name: "a".into(), degree: 1, schur_norm: 1, values: vec![1.0, 1.0] },
            Irrep { name: "b".into(), degree: 1, schur_norm: 1, values: vec![1.0, 0.5] },
        ];
        assert!(matches!(RealCharacterTable::new(&g, irreps), Err(RepError::BadCharacterTable(_))));
    }

    #[test]
    fn character_examples() {
        let a = z2_action(diag(&[1.0, -1.0]));
        let e1 = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(character_of_subspace(&a, &e1, DEFAULT_TOL_INV).unwrap().0, vec![1.0, 1.0]);

        let swap = z2_action(from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
        let chi = character_of_subspace(&swap, &Mat::identity(2, 2), DEFAULT_TOL_INV).unwrap();
        assert_eq!(chi.0, vec![2.0, 0.0]);
        let m = multiplicity_vector(&chi, swap.data()).unwrap();
        assert_eq!(m.coeffs(), &[1, 1]);

        let empty = Mat::zeros(2, 0);
        assert_eq!(character_of_subspace(&swap, &empty, DEFAULT_TOL_INV).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn non_invariant_subspace_reports_norm() {
        let swap = z2_action(from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
        let e1 = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        match character_of_subspace(&swap, &e1, DEFAULT_TOL_INV) {
            Err(RepError::NotInvariant { norm, .. }) => assert!((norm - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multiplicities_z3() {
        let g = GroupData::preset(GroupPreset::Cyclic(3)).unwrap();
        let m = multiplicity_vector(&ClassFunction(vec![2.0, -1.0, -1.0]), &g).unwrap();
        assert_eq!(m.coeffs(), &[0, 1]);
        assert_eq!(forgetful(&m, &g.table), 2);
        let z = multiplicity_vector(&ClassFunction(vec![0.0; 3]), &g).unwrap();
        assert!(z.is_zero());
        let bad = multiplicity_vector(&ClassFunction(vec![1.0, 0.0, 0.0]), &g);
        assert!(matches!(bad, Err(RepError::NonIntegralMultiplicity { .. })));
    }

    #[test]
    fn virtual_rep_arithmetic() {
        let data = z2();
        let a = data.table.from_coeffs(vec![1, 0]).unwrap();
        let b = data.table.from_coeffs(vec![0, 1]).unwrap();
        assert_eq!(a.checked_add(&b).unwrap().coeffs(), &[1, 1]);
        let c = data.table.from_coeffs(vec![1, -1]).unwrap();
        assert_eq!(c.neg().coeffs(), &[-1, 1]);
        assert!(c.checked_add(&c.neg()).unwrap().is_zero());
        let other = GroupData::preset(GroupPreset::Cyclic(3)).unwrap();
        assert_eq!(a.checked_add(&other.table.zero()).unwrap_err(), RepError::TableMismatch);
    }

    #[test]
    fn forgetful_and_phi() {
        let data = z2();
        let v = data.table.from_coeffs(vec![1, -1]).unwrap();
        assert_eq!(forgetful(&v, &data.table), 0);
        assert_eq!(phi_z2(&v, &data).unwrap(), (0, 1));
        assert_eq!(phi_z2(&data.table.zero(), &data).unwrap(), (0, 0));
        let w = data.table.from_coeffs(vec![2, 1]).unwrap();
        assert_eq!(phi_z2(&w, &data).unwrap(), (3, 2));
        let z3 = GroupData::preset(GroupPreset::Cyclic(3)).unwrap();
        assert_eq!(phi_z2(&z3.table.zero(), &z3).unwrap_err(), RepError::WrongGroup(3));
    }

    #[test]
    fn isotypical_examples() {
        let a = z2_action(diag(&[1.0, -1.0]));
        assert!((isotypical_projection(&a, 0).unwrap() - diag(&[1.0, 0.0])).norm() < 1e-14);
        assert!((isotypical_projection(&a, 1).unwrap() - diag(&[0.0, 1.0])).norm() < 1e-14);

        let swap = z2_action(from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
        let p = isotypical_projection(&swap, 0).unwrap();
        assert!((p - Mat::from_element(2, 2, 0.5)).norm() < 1e-14);

        let triv = Arc::new(GroupData::preset(GroupPreset::Trivial).unwrap());
        let t = OrthogonalAction::trivial(triv, 3);
        assert!((isotypical_projection(&t, 0).unwrap() - Mat::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn generators_close_to_full_action() {
        let data = Arc::new(GroupData::preset(GroupPreset::Cyclic(4)).unwrap());
        let rot = from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let a = OrthogonalAction::from_generators(data.clone(), 2, &[(1, rot.clone())]).unwrap();
        assert!((a.matrix(2) - &rot * &rot).norm() < 1e-15);
        // element 2 alone does not generate Z4
        let err = OrthogonalAction::from_generators(data, 2, &[(2, -Mat::identity(2, 2))]).unwrap_err();
        assert!(matches!(err, RepError::BadAction(_)));
    }

    #[test]
    fn non_orthogonal_generator_rejected() {
        let data = z2();
        let err = OrthogonalAction::from_generators(data, 1, &[(1, diag(&[2.0]))]).unwrap_err();
        assert!(matches!(err, RepError::BadAction(msg) if msg.contains("not orthogonal")));
    }
}
