//! Eigendecomposition of complex-symmetric, non-Hermitian Hamiltonians into
//! biorthonormal left/right eigenpairs, E_l = ε_l - iγ_l.

mod schur;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::C64;

/// Symmetry tolerance on |H - H^T|.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Residual above which the transpose shortcut is abandoned for an explicit
/// inverse of the right eigenvector matrix.
const SHORTCUT_TOLERANCE: f64 = 1e-9;

/// Residual above which the matrix is treated as defective.
pub const DEFECT_TOLERANCE: f64 = 1e-6;

/// Relative eigenvalue distance under which pairs are treated as one cluster.
const CLUSTER_TOLERANCE: f64 = 1e-8;

/// Eigenvalue condition number (‖w_l‖ for unit ‖v_l‖, w_l v_l = 1) beyond
/// which eigenvectors are considered coalesced.
const CONDITION_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub epsilon: f64,
    pub gamma: f64,
}

impl Eigenvalue {
    pub fn from_complex(e: C64) -> Self {
        Eigenvalue { epsilon: e.re, gamma: -e.im }
    }

    pub fn to_complex(self) -> C64 {
        C64::new(self.epsilon, -self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    ByGammaAscending,
    ByEpsilonAscending,
    Unsorted,
}

/// How the left eigenvectors were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftMethod {
    /// ⟨Φ̃_l| = |Φ_l⟩^T with Φ_l^T Φ_l = 1.
    Transpose,
    /// Rows of the inverse of the right eigenvector matrix.
    Inverse,
}

/// Full set of eigenpairs of a non-Hermitian matrix.
///
/// Column `l` of [`Spectrum::right`] is |Φ_l⟩ and row `l` of
/// [`Spectrum::left`] is ⟨Φ̃_l|, so `left * right = 1` up to
/// [`Spectrum::biorthonormality_residual`].
#[derive(Clone, Debug)]
pub struct Spectrum {
    eigenvalues: Vec<Eigenvalue>,
    right: DMatrix<C64>,
    left: DMatrix<C64>,
    matrix: DMatrix<C64>,
    biorthonormality_residual: f64,
    completeness_residual: f64,
    sort_order: SortOrder,
    left_method: LeftMethod,
}

/// Residual diagnostics produced by [`Spectrum::verify`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub biorthonormality: f64,
    pub completeness: f64,
    pub reconstruction: f64,
    pub tolerance: f64,
    pub failures: Vec<&'static str>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn identity_residual(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    max_abs(&(m - DMatrix::<C64>::identity(n, n)))
}

/// Unconjugated bilinear product a^T b.
fn bilinear<'a>(
    a: impl Iterator<Item = &'a C64>,
    b: impl Iterator<Item = &'a C64>,
) -> C64 {
    a.zip(b).map(|(x, y)| x * y).sum()
}

/// Decompose a complex-symmetric matrix.
pub fn decompose(h: &DMatrix<C64>) -> Result<Spectrum> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::InvalidSize(format!(
            "expected a non-empty square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let asym = max_abs(&(h - h.transpose()));
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }

    let factor = schur::schur(h)?;
    let values = factor.eigenvalues();
    let mut right = factor.eigenvectors();

    let scale = max_abs(h).max(f64::MIN_POSITIVE);
    let clusters = clusters(&values, CLUSTER_TOLERANCE * scale);
    let shortcut = transpose_normalize(&mut right, &clusters);

    let (left, method) = match shortcut {
        Ok(()) => {
            let left = right.transpose();
            let bi = identity_residual(&(&left * &right));
            let comp = identity_residual(&(&right * &left));
            if bi.max(comp) <= SHORTCUT_TOLERANCE {
                (left, LeftMethod::Transpose)
            } else {
                inverse_left(&mut right, &values)?
            }
        }
        Err(_) => inverse_left(&mut right, &values)?,
    };

    let bi = identity_residual(&(&left * &right));
    let comp = identity_residual(&(&right * &left));
    if bi.max(comp) > DEFECT_TOLERANCE {
        let (first, second) = closest_pair(&values);
        return Err(Error::ExceptionalPoint {
            first,
            second,
            residual: bi.max(comp),
        });
    }

    Ok(Spectrum {
        eigenvalues: values.into_iter().map(Eigenvalue::from_complex).collect(),
        right,
        left,
        matrix: h.clone(),
        biorthonormality_residual: bi,
        completeness_residual: comp,
        sort_order: SortOrder::Unsorted,
        left_method: method,
    })
}

/// Groups of indices whose eigenvalues lie within `tol` of each other
/// (single-linkage).
fn clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

/// Scale each column so v^T v = 1, making near-degenerate clusters mutually
/// transpose-orthogonal first. Fails on quasi-null vectors (v^T v ≈ 0).
fn transpose_normalize(v: &mut DMatrix<C64>, clusters: &[Vec<usize>]) -> std::result::Result<(), usize> {
    for group in clusters {
        for (pos, &k) in group.iter().enumerate() {
            for &prev in &group[..pos] {
                let proj = bilinear(v.column(prev).iter(), v.column(k).iter());
                let prev_col = v.column(prev).clone_owned();
                let mut col = v.column_mut(k);
                col -= prev_col * proj;
            }
            let euclid = v.column(k).norm();
            let self_dot = bilinear(v.column(k).iter(), v.column(k).iter());
            if self_dot.norm() * CONDITION_LIMIT < euclid * euclid {
                return Err(k);
            }
            let root = self_dot.sqrt();
            v.column_mut(k).iter_mut().for_each(|z| *z /= root);
        }
    }
    Ok(())
}

fn inverse_left(right: &mut DMatrix<C64>, values: &[C64]) -> Result<(DMatrix<C64>, LeftMethod)> {
    for mut col in right.column_iter_mut() {
        let norm = col.norm();
        col.iter_mut().for_each(|z| *z /= norm);
    }
    match right.clone().try_inverse() {
        Some(inv) => {
            let worst = inv.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
            if worst > CONDITION_LIMIT {
                let (first, second) = closest_pair(values);
                return Err(Error::ExceptionalPoint {
                    first,
                    second,
                    residual: worst,
                });
            }
            Ok((inv, LeftMethod::Inverse))
        }
        None => {
            let (first, second) = closest_pair(values);
            Err(Error::ExceptionalPoint {
                first,
                second,
                residual: f64::INFINITY,
            })
        }
    }
}

fn closest_pair(values: &[C64]) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            let d = (values[i] - values[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

impl Spectrum {
    /// Spectrum of the diagonal matrix diag(values), with unit eigenvectors.
    pub fn diagonal(values: &[C64]) -> Spectrum {
        let n = values.len();
        let eye = DMatrix::<C64>::identity(n, n);
        Spectrum {
            eigenvalues: values.iter().copied().map(Eigenvalue::from_complex).collect(),
            right: eye.clone(),
            left: eye,
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)),
            biorthonormality_residual: 0.0,
            completeness_residual: 0.0,
            sort_order: SortOrder::Unsorted,
            left_method: LeftMethod::Transpose,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[Eigenvalue] {
        &self.eigenvalues
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.gamma).collect()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.epsilon).collect()
    }

    /// Column `l` is |Φ_l⟩.
    pub fn right(&self) -> &DMatrix<C64> {
        &self.right
    }

    /// Row `l` is ⟨Φ̃_l|.
    pub fn left(&self) -> &DMatrix<C64> {
        &self.left
    }

    /// The decomposed matrix.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn biorthonormality_residual(&self) -> f64 {
        self.biorthonormality_residual
    }

    pub fn completeness_residual(&self) -> f64 {
        self.completeness_residual
    }

    pub fn sort_order(&self) -> SortOrder {
        self.sort_order
    }

    pub fn left_method(&self) -> LeftMethod {
        self.left_method
    }

    fn permuted(mut self, order: &[usize], sort_order: SortOrder) -> Spectrum {
        let n = self.len();
        self.eigenvalues = order.iter().map(|&i| self.eigenvalues[i]).collect();
        self.right = DMatrix::from_fn(n, n, |k, l| self.right[(k, order[l])]);
        self.left = DMatrix::from_fn(n, n, |l, k| self.left[(order[l], k)]);
        self.sort_order = sort_order;
        self
    }

    /// Reorder by γ ascending; ties by ε ascending, then original position.
    pub fn sort_by_decay(self) -> Spectrum {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (self.eigenvalues[a], self.eigenvalues[b]);
            ea.gamma
                .total_cmp(&eb.gamma)
                .then(ea.epsilon.total_cmp(&eb.epsilon))
                .then(a.cmp(&b))
        });
        self.permuted(&order, SortOrder::ByGammaAscending)
    }

    pub fn sort_by_energy(self) -> Spectrum {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (self.eigenvalues[a], self.eigenvalues[b]);
            ea.epsilon
                .total_cmp(&eb.epsilon)
                .then(ea.gamma.total_cmp(&eb.gamma))
                .then(a.cmp(&b))
        });
        self.permuted(&order, SortOrder::ByEpsilonAscending)
    }

    /// Smallest decay rate. Errors if any γ_l is negative beyond roundoff.
    pub fn gamma_min(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for (index, e) in self.eigenvalues.iter().enumerate() {
            if e.gamma < -1e-12 {
                return Err(Error::SignConvention { index, value: e.gamma });
            }
            min = min.min(e.gamma);
        }
        Ok(min)
    }

    /// Recompute biorthonormality, completeness and ‖V E W - H‖_F / ‖H‖_F.
    pub fn verify(&self, tolerance: f64) -> VerifyReport {
        let biorthonormality = identity_residual(&(&self.left * &self.right));
        let completeness = identity_residual(&(&self.right * &self.left));
        let mut scaled = self.right.clone();
        for (l, e) in self.eigenvalues.iter().enumerate() {
            let z = e.to_complex();
            scaled.column_mut(l).iter_mut().for_each(|x| *x *= z);
        }
        let h_norm = self.matrix.norm().max(f64::MIN_POSITIVE);
        let reconstruction = (scaled * &self.left - &self.matrix).norm() / h_norm;

        let mut failures = Vec::new();
        for (name, value) in [
            ("biorthonormality", biorthonormality),
            ("completeness", completeness),
            ("reconstruction", reconstruction),
        ] {
            if !(value <= tolerance) {
                failures.push(name);
            }
        }
        VerifyReport {
            biorthonormality,
            completeness,
            reconstruction,
            tolerance,
            failures,
        }
    }

    #[cfg(test)]
    pub(crate) fn right_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.right
    }
}
