//! Dense complex matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn zeros(dim: usize) -> CMatrix {
    CMatrix::zeros(dim, dim)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `U ρ U†`.
pub fn conjugate(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    u * rho * u.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == C64::new(0.0, 0.0)))
}

/// Relative Hermiticity defect `‖A − A†‖_F / ‖A‖_F` (absolute when `A = 0`).
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = frobenius(&(m - m.adjoint()));
    let n = frobenius(m);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Unitarity defect `‖U†U − 1‖_F / sqrt(dim)`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    frobenius(&(u.adjoint() * u - identity(n))) / (n as f64).sqrt()
}

/// Eigendecomposition of a Hermitian generator, reusable for `exp(-i H t)` at
/// many different `t`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    values: DVector<f64>,
    vectors: Option<CMatrix>,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        if is_diagonal(h) {
            let values = DVector::from_iterator(h.nrows(), (0..h.nrows()).map(|i| h[(i, i)].re));
            return Self {
                values,
                vectors: None,
            };
        }
        // Symmetrise so tiny anti-Hermitian rounding never leaks into the solver.
        let sym = (h + h.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(sym);
        Self {
            values: eig.eigenvalues,
            vectors: Some(eig.eigenvectors),
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn is_diagonal(&self) -> bool {
        self.vectors.is_none()
    }

    /// Diagonal phases `exp(-i λ_k t)`.
    pub fn phases(&self, t: f64) -> DVector<C64> {
        self.values.map(|l| C64::from_polar(1.0, -l * t))
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let phases = self.phases(t);
        match &self.vectors {
            None => CMatrix::from_diagonal(&phases),
            Some(v) => {
                let mut scaled = v.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= phases[j];
                }
                scaled * v.adjoint()
            }
        }
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianEigen::new(h).propagator(t)
}

/// `ρ ↦ D ρ D†` for diagonal `D = diag(d)`, done elementwise.
pub fn conjugate_diagonal(d: &DVector<C64>, rho: &CMatrix) -> CMatrix {
    let n = rho.nrows();
    CMatrix::from_fn(n, n, |r, c| d[r] * rho[(r, c)] * d[c].conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_expm(a: &CMatrix) -> CMatrix {
        // exp(A) via scaling and squaring of a long Taylor series.
        let n = a.nrows();
        let norm = frobenius(a);
        let mut s = 0;
        while norm / 2f64.powi(s) > 0.1 {
            s += 1;
        }
        let scaled = a.scale(1.0 / 2f64.powi(s));
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..30 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        // Small LCG keeps this test free of the rand dependency.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&m + m.adjoint()).scale(0.5)
    }

    #[test]
    fn eigen_propagator_matches_taylor_series() {
        for seed in 0..5 {
            let h = random_hermitian(6, seed);
            let u = expm_hermitian(&h, 1.7);
            let reference = taylor_expm(&(h.map(|z| z * C64::new(0.0, -1.7))));
            assert!(frobenius(&(u.clone() - reference)) < 1e-12);
            assert!(unitarity_defect(&u) < 1e-13);
        }
    }

    #[test]
    fn diagonal_fast_path() {
        let h = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-2.0, 0.0),
        ]));
        let eig = HermitianEigen::new(&h);
        assert!(eig.is_diagonal());
        let u = eig.propagator(0.5);
        assert!((u[(0, 0)] - C64::from_polar(1.0, -0.5)).norm() < 1e-15);
        assert!((u[(1, 1)] - C64::from_polar(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(u[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn trace_product_matches_full_product() {
        let a = random_hermitian(5, 11);
        let b = random_hermitian(5, 12);
        let full = (&a * &b).trace();
        assert!((trace_product(&a, &b) - full).norm() < 1e-14);
    }
}
