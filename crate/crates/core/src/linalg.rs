//! Dense Hermitian eigendecomposition with a deterministic output convention.
//!
//! Eigenpairs are sorted by ascending eigenvalue. Each eigenvector is rotated
//! by a global phase so that its first non-negligible component is real and
//! positive. Exactly degenerate subspaces can additionally be resolved against
//! a caller-supplied Hermitian operator, which makes labelling of states at
//! symmetric points (zero field, zero strain) reproducible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const PHASE_EPS: f64 = 1e-10;

/// Sorted eigenvalues and matching eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Diagonalize a Hermitian matrix.
pub fn eigh(h: &CMatrix) -> Eigensystem {
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        fix_phase(&mut v);
        vectors.set_column(k, &v);
    }
    Eigensystem { values, vectors }
}

/// Diagonalize, then split every degenerate block (eigenvalue spread below
/// `tol`) into eigenvectors of `op` projected onto that block.
pub fn eigh_resolved(h: &CMatrix, op: &CMatrix, tol: f64) -> Eigensystem {
    let mut sys = eigh(h);
    let n = sys.dim();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sys.values[end] - sys.values[start] < tol {
            end += 1;
        }
        if end - start > 1 {
            let block = sys.vectors.columns(start, end - start).into_owned();
            let projected = block.adjoint() * op * &block;
            let sub = eigh(&projected);
            let rotated = &block * &sub.vectors;
            let mean = sys.values[start..end].iter().sum::<f64>() / (end - start) as f64;
            for k in 0..(end - start) {
                let mut v = rotated.column(k).into_owned();
                fix_phase(&mut v);
                sys.vectors.set_column(start + k, &v);
                sys.values[start + k] = mean;
            }
        }
        start = end;
    }
    sys
}

fn fix_phase(v: &mut CVector) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    if let Some(c) = v.iter().find(|c| c.norm() > PHASE_EPS * norm) {
        let phase = c.conj() / c.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// `<a|op|b>`
pub fn matrix_element(a: &CVector, op: &CMatrix, b: &CVector) -> Complex64 {
    (a.adjoint() * op * b)[(0, 0)]
}

/// `<a|op|a>` (real part).
pub fn expectation(a: &CVector, op: &CMatrix) -> f64 {
    matrix_element(a, op, a).re
}

/// Spin-1 operators (Sx, Sy, Sz) in the basis m = +1, 0, -1.
pub fn spin1() -> [CMatrix; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    let sx = CMatrix::from_row_slice(
        3,
        3,
        &[z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z],
    );
    let sy = CMatrix::from_row_slice(
        3,
        3,
        &[z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z],
    );
    let sz = CMatrix::from_row_slice(3, 3, &[c(1.0, 0.0), z, z, z, z, z, z, z, c(-1.0, 0.0)]);
    [sx, sy, sz]
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_algebra() {
        let [sx, sy, sz] = spin1();
        let i = Complex64::new(0.0, 1.0);
        assert!((commutator(&sx, &sy) - sz.map(|x| x * i)).norm() < 1e-14);
        assert!((commutator(&sy, &sz) - sx.map(|x| x * i)).norm() < 1e-14);
        let s2 = &sx * &sx + &sy * &sy + &sz * &sz;
        assert!((s2 - identity(3).map(|x| x * 2.0)).norm() < 1e-14);
    }

    #[test]
    fn eigh_sorts_and_fixes_phase() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                real(2.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                real(2.0),
            ],
        );
        let sys = eigh(&m);
        assert!((sys.values[0] - 1.0).abs() < 1e-12);
        assert!((sys.values[1] - 3.0).abs() < 1e-12);
        for k in 0..2 {
            let v = sys.vector(k);
            assert!(v[0].im.abs() < 1e-12 && v[0].re > 0.0);
        }
    }

    #[test]
    fn degenerate_block_follows_operator() {
        // two-fold degenerate identity block; resolve against diag(1, -1)
        let h = identity(2);
        let op = CMatrix::from_diagonal(&CVector::from_vec(vec![real(1.0), real(-1.0)]));
        let sys = eigh_resolved(&h, &op, 1e-9);
        assert!((expectation(&sys.vector(0), &op) + 1.0).abs() < 1e-12);
        assert!((expectation(&sys.vector(1), &op) - 1.0).abs() < 1e-12);
    }
}
