//! Complex Schur decomposition A = Z T Z^H by Householder reduction to upper
//! Hessenberg form followed by single-shift QR iteration, plus eigenvectors of
//! the triangular factor by back substitution.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::C64;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

pub(crate) struct Schur {
    pub t: DMatrix<C64>,
    pub z: DMatrix<C64>,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Right eigenvectors of the original matrix as columns, each of unit
    /// Euclidean norm.
    pub fn eigenvectors(&self) -> DMatrix<C64> {
        let t = &self.t;
        let n = t.nrows();
        let scale = t.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
        let small = f64::EPSILON * scale;
        let mut x = DMatrix::<C64>::zeros(n, n);
        for k in 0..n {
            let lambda = t[(k, k)];
            x[(k, k)] = C64::new(1.0, 0.0);
            for j in (0..k).rev() {
                let mut s = C64::new(0.0, 0.0);
                for i in (j + 1)..=k {
                    s += t[(j, i)] * x[(i, k)];
                }
                let mut d = t[(j, j)] - lambda;
                if d.norm() < small {
                    d = C64::new(small, 0.0);
                }
                x[(j, k)] = -s / d;
            }
        }
        let mut v = &self.z * x;
        for mut col in v.column_iter_mut() {
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col.iter_mut().for_each(|z| *z /= norm);
        }
        v
    }
}

pub(crate) fn schur(a: &DMatrix<C64>) -> Result<Schur> {
    let n = a.nrows();
    let mut h = a.clone();
    let mut z = DMatrix::<C64>::identity(n, n);
    hessenberg(&mut h, &mut z);
    qr_iterate(&mut h, &mut z)?;
    Ok(Schur { t: h, z })
}

fn hessenberg(a: &mut DMatrix<C64>, z: &mut DMatrix<C64>) {
    let n = a.nrows();
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<C64> = ((k + 1)..n).map(|i| a[(i, k)]).collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);

        // A <- (I - 2 v v^H) A
        for col in k..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(i, vi)| vi.conj() * a[(k + 1 + i, col)])
                .sum();
            for (i, vi) in v.iter().enumerate() {
                a[(k + 1 + i, col)] -= *vi * s * 2.0;
            }
        }
        // A <- A (I - 2 v v^H), Z <- Z (I - 2 v v^H)
        for m in [&mut *a, &mut *z] {
            for row in 0..n {
                let s: C64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, vi)| m[(row, k + 1 + i)] * vi)
                    .sum();
                for (i, vi) in v.iter().enumerate() {
                    m[(row, k + 1 + i)] -= s * vi.conj() * 2.0;
                }
            }
        }
        a[(k + 1, k)] = alpha;
        for i in (k + 2)..n {
            a[(i, k)] = C64::new(0.0, 0.0);
        }
    }
}

/// Rotation (c, s) with c real such that [[c, s], [-s*, c]] [x; y] = [r; 0].
fn givens(x: C64, y: C64) -> (f64, C64) {
    if y.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if x.norm() == 0.0 {
        return (0.0, y.conj() / y.norm());
    }
    let norm = x.norm().hypot(y.norm());
    let c = x.norm() / norm;
    let s = (x / x.norm()) * y.conj() / norm;
    (c, s)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let (l1, l2) = (half_tr + root, half_tr - root);
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_iterate(h: &mut DMatrix<C64>, z: &mut DMatrix<C64>) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let h_norm = h.iter().map(|x| x.norm()).fold(0.0_f64, f64::max);
    let mut hi = n - 1;
    let mut since_deflation = 0usize;
    let mut total = 0usize;
    let budget = MAX_SWEEPS_PER_EIGENVALUE * n;
    let mut rotations: Vec<(f64, C64)> = Vec::with_capacity(n);

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let mut s = h[(lo - 1, lo - 1)].l1_norm() + h[(lo, lo)].l1_norm();
            if s == 0.0 {
                s = h_norm;
            }
            if h[(lo, lo - 1)].l1_norm() <= f64::EPSILON * s {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        since_deflation += 1;
        total += 1;
        if total > budget {
            return Err(Error::NoConvergence(total));
        }
        let shift = if since_deflation.is_multiple_of(10) {
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        rotations.clear();
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            h[(k + 1, k)] = C64::new(0.0, 0.0);
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + offset;
            for i in 0..=(k + 1) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }
    Ok(())
}
