//! Constant 14×14 operator matrices of the low-temperature NV⁻ model.
//!
//! Level order:
//!
//! | index | level |
//! |-------|-------|
//! | 0–2   | ³A₂, m_s = +1, 0, −1 |
//! | 3–5   | ³E orbital X, m_s = +1, 0, −1 |
//! | 6–8   | ³E orbital Y, m_s = +1, 0, −1 |
//! | 9     | ¹A₁ |
//! | 10–11 | ¹E (x, y) |
//! | 12–13 | ¹E′ (x, y) |
//!
//! Inside ³E the orbital doublet is the outer factor, so an operator written
//! `σ ⊗ S` acts with the 2×2 matrix `σ` on (X, Y) and `S` on the spin.
//! Singlets carry no spin and only appear on the diagonal.

use num_complex::Complex64;

use crate::linalg::{kron, spin1, CMatrix};

pub const DIM: usize = 14;
pub const GROUND: std::ops::Range<usize> = 0..3;
pub const EXCITED: std::ops::Range<usize> = 3..9;
pub const SINGLETS: std::ops::Range<usize> = 9..14;

/// Spin projection of triplet index `k` within its block.
pub fn ms_of(k: usize) -> i8 {
    [1, 0, -1][k % 3]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    /// `S_z² − 2/3` on ³A₂.
    pub ss_ground: CMatrix,
    /// `S_z² − 2/3` on ³E.
    pub ss_par: CMatrix,
    /// `σ_z ⊗ (S_y² − S_x²) − σ_x ⊗ {S_x, S_y}` on ³E.
    pub ss_perp: CMatrix,
    /// `−σ_y ⊗ S_z` on ³E.
    pub so_par: CMatrix,
    /// `σ_z ⊗ {S_x, S_z} − σ_x ⊗ {S_y, S_z}` on ³E.
    pub so_perp: CMatrix,
    /// Electron spin on both triplets.
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    /// Orbital operator of E_x symmetry: optical part (A₂ ↔ X) and in-doublet part (`σ_z`).
    pub o_ex_a: CMatrix,
    pub o_ex_b: CMatrix,
    /// Orbital operator of E_y symmetry: optical part (A₂ ↔ Y) and in-doublet part (`−σ_x`).
    pub o_ey_a: CMatrix,
    pub o_ey_b: CMatrix,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn zeros() -> CMatrix {
    CMatrix::zeros(DIM, DIM)
}

fn embed(block: &CMatrix, at: usize) -> CMatrix {
    let mut m = zeros();
    m.view_mut((at, at), (block.nrows(), block.ncols()))
        .copy_from(block);
    m
}

fn pauli() -> [CMatrix; 3] {
    let i = Complex64::i();
    [
        CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        CMatrix::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)]),
        CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
    ]
}

fn anti(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

impl Templates {
    pub fn standard() -> Self {
        let [sx, sy, sz] = spin1();
        let [px, py, pz] = pauli();
        let id2 = CMatrix::identity(2, 2);
        let id3 = CMatrix::identity(3, 3);
        let axial = &sz * &sz - id3.map(|x| x * (2.0 / 3.0));

        let ss_perp_e = kron(&pz, &(&sy * &sy - &sx * &sx)) - kron(&px, &anti(&sx, &sy));
        let so_par_e = -kron(&py, &sz);
        let so_perp_e = kron(&pz, &anti(&sx, &sz)) - kron(&px, &anti(&sy, &sz));

        let triplet = |s: &CMatrix| embed(s, 0) + embed(&kron(&id2, s), 3);

        let mut o_ex_a = zeros();
        let mut o_ey_a = zeros();
        for m in 0..3 {
            o_ex_a[(3 + m, m)] = c(1.0);
            o_ex_a[(m, 3 + m)] = c(1.0);
            o_ey_a[(6 + m, m)] = c(1.0);
            o_ey_a[(m, 6 + m)] = c(1.0);
        }

        Self {
            ss_ground: embed(&axial, 0),
            ss_par: embed(&kron(&id2, &axial), 3),
            ss_perp: embed(&ss_perp_e, 3),
            so_par: embed(&so_par_e, 3),
            so_perp: embed(&so_perp_e, 3),
            sx: triplet(&sx),
            sy: triplet(&sy),
            sz: triplet(&sz),
            o_ex_a,
            o_ex_b: embed(&kron(&pz, &id3), 3),
            o_ey_a,
            o_ey_b: embed(&kron(&(-px), &id3), 3),
        }
    }

    pub fn all(&self) -> [(&'static str, &CMatrix); 12] {
        [
            ("ss_ground", &self.ss_ground),
            ("ss_par", &self.ss_par),
            ("ss_perp", &self.ss_perp),
            ("so_par", &self.so_par),
            ("so_perp", &self.so_perp),
            ("sx", &self.sx),
            ("sy", &self.sy),
            ("sz", &self.sz),
            ("o_ex_a", &self.o_ex_a),
            ("o_ex_b", &self.o_ex_b),
            ("o_ey_a", &self.o_ey_a),
            ("o_ey_b", &self.o_ey_b),
        ]
    }

    /// Optical dipole operators set to zero (no transition carries strength).
    pub fn without_optical_operators(mut self) -> Self {
        self.o_ex_a = zeros();
        self.o_ey_a = zeros();
        self
    }
}

impl Default for Templates {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_defect;

    fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn all_hermitian() {
        for (name, m) in Templates::standard().all() {
            assert_eq!(m.shape(), (DIM, DIM), "{name}");
            assert!(hermiticity_defect(m) < 1e-15, "{name}");
        }
    }

    #[test]
    fn spin_algebra_on_triplets() {
        let t = Templates::standard();
        let i = Complex64::i();
        let lhs = comm(&t.sx, &t.sy);
        let rhs = t.sz.map(|x| x * i);
        assert!((lhs - rhs).norm() < 1e-14);
        let s2 = &t.sx * &t.sx + &t.sy * &t.sy + &t.sz * &t.sz;
        for k in 0..DIM {
            let want = if SINGLETS.contains(&k) { 0.0 } else { 2.0 };
            assert!((s2[(k, k)].re - want).abs() < 1e-14);
        }
    }

    #[test]
    fn axial_terms_conserve_sz() {
        let t = Templates::standard();
        for m in [
            &t.ss_ground,
            &t.ss_par,
            &t.so_par,
            &t.o_ex_a,
            &t.o_ey_a,
            &t.o_ex_b,
            &t.o_ey_b,
        ] {
            assert!(comm(m, &t.sz).norm() < 1e-14);
        }
        // transverse terms change m_s
        assert!(comm(&t.ss_perp, &t.sz).norm() > 1.0);
        assert!(comm(&t.so_perp, &t.sz).norm() > 1.0);
    }

    #[test]
    fn blocks_do_not_leak_into_singlets() {
        let t = Templates::standard();
        for (name, m) in t.all() {
            for r in SINGLETS {
                for col in 0..DIM {
                    assert_eq!(m[(r, col)], c(0.0), "{name}");
                }
            }
        }
    }

    #[test]
    fn traceless_fine_structure() {
        let t = Templates::standard();
        for m in [&t.ss_ground, &t.ss_par, &t.ss_perp, &t.so_par, &t.so_perp] {
            assert!(m.trace().norm() < 1e-14);
        }
    }
}
