//! Spin-1/2 operator algebra on `M`-spin product spaces and coherence-order
//! bookkeeping.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMatrix, C64};

/// Largest supported cluster. A dense 2^12 × 2^12 complex matrix is 256 MiB.
pub const MAX_SPINS: usize = 12;

/// Spin count, Larmor offsets `ω_i` and secular dipolar couplings `D_ij`,
/// all angular frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    offsets: Vec<f64>,
    couplings: DMatrix<f64>,
}

impl SpinSystem {
    pub fn new(offsets: Vec<f64>, couplings: DMatrix<f64>) -> Result<Self> {
        let m = offsets.len();
        if m == 0 || m > MAX_SPINS {
            return Err(Error::InvalidSystem(format!(
                "spin count must be in 1..={MAX_SPINS}, got {m}"
            )));
        }
        if couplings.nrows() != m || couplings.ncols() != m {
            return Err(Error::InvalidSystem(format!(
                "coupling matrix is {}x{}, expected {m}x{m}",
                couplings.nrows(),
                couplings.ncols()
            )));
        }
        if offsets.iter().chain(couplings.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSystem("non-finite offset or coupling".into()));
        }
        for i in 0..m {
            if couplings[(i, i)] != 0.0 {
                return Err(Error::InvalidSystem(format!(
                    "coupling diagonal must be zero (D[{i}][{i}] = {})",
                    couplings[(i, i)]
                )));
            }
            for j in 0..i {
                if couplings[(i, j)] != couplings[(j, i)] {
                    return Err(Error::InvalidSystem(format!(
                        "couplings not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { offsets, couplings })
    }

    /// `m` spins on resonance with no couplings.
    pub fn uncoupled(m: usize) -> Result<Self> {
        Self::new(vec![0.0; m], DMatrix::zeros(m, m))
    }

    /// On-resonance spins with every pair coupled by the same `d`.
    pub fn uniform(m: usize, d: f64) -> Result<Self> {
        let couplings = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { d });
        Self::new(vec![0.0; m], couplings)
    }

    /// On-resonance spins with couplings drawn uniformly from `[-max, max]`
    /// by a seeded generator, so the same seed always yields the same cluster.
    pub fn random_couplings(m: usize, max: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut couplings = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let d = rng.random_range(-max..=max);
                couplings[(i, j)] = d;
                couplings[(j, i)] = d;
            }
        }
        Self::new(vec![0.0; m], couplings)
    }

    /// The reference test cluster: `m` on-resonance spins with couplings in
    /// `[-2π·1 kHz, 2π·1 kHz]` from a fixed seed.
    pub fn default_test(m: usize) -> Result<Self> {
        Self::random_couplings(m, 2.0 * std::f64::consts::PI * 1.0e3, 0x5EED)
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != self.n_spins() {
            return Err(Error::DimensionMismatch {
                expected: self.n_spins(),
                got: offsets.len(),
            });
        }
        self.offsets = offsets;
        Self::new(self.offsets, self.couplings)
    }

    pub fn n_spins(&self) -> usize {
        self.offsets.len()
    }

    /// Hilbert-space dimension `2^M`.
    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[(i, j)]
    }

    /// Total magnetic quantum number of basis state `index`.
    pub fn magnetization(&self, index: usize) -> f64 {
        self.n_spins() as f64 / 2.0 - index.count_ones() as f64
    }

    /// Coherence order of density-matrix element `(row, col)`: `m_row − m_col`.
    pub fn order_of(&self, row: usize, col: usize) -> i32 {
        col.count_ones() as i32 - row.count_ones() as i32
    }

    fn bit(&self, spin: usize) -> usize {
        1 << (self.n_spins() - 1 - spin)
    }

    fn check_spin(&self, spin: usize) -> Result<()> {
        if spin >= self.n_spins() {
            Err(Error::SpinIndex {
                index: spin,
                n_spins: self.n_spins(),
            })
        } else {
            Ok(())
        }
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::Plus => "+",
            Axis::Minus => "-",
        };
        f.write_str(s)
    }
}

/// A dense operator on the cluster Hilbert space plus a short provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub matrix: CMatrix,
    pub label: String,
}

impl Operator {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        crate::linalg::hermiticity_defect(&self.matrix) <= tol
    }
}

/// Traceless deviation density matrix. `scale` records the factor between
/// `rho` and the raw high-temperature deviation `Σ_i I_z^i` it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: CMatrix,
    pub scale: f64,
}

impl State {
    pub fn new(rho: CMatrix) -> Self {
        Self { rho, scale: 1.0 }
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.rho)
    }

    /// Normalized Hilbert–Schmidt overlap `Re Tr(ρ† σ) / (‖ρ‖ ‖σ‖)`.
    pub fn overlap(&self, other: &State) -> f64 {
        let num = self.rho.dotc(&other.rho).re;
        num / (self.norm() * other.norm())
    }
}

/// Intensity per coherence order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoherenceSpectrum {
    intensities: BTreeMap<i32, f64>,
}

impl CoherenceSpectrum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Negative intensities are clamped to zero.
    pub fn insert(&mut self, order: i32, intensity: f64) {
        self.intensities.insert(order, intensity.max(0.0));
    }

    pub fn intensity(&self, order: i32) -> f64 {
        self.intensities.get(&order).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.intensities.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.intensities.iter().map(|(&n, &w)| (n, w))
    }

    pub fn odd_weight(&self) -> f64 {
        self.iter().filter(|(n, _)| n % 2 != 0).map(|(_, w)| w).sum()
    }

    /// Largest `|n|` whose intensity exceeds `threshold × total`.
    pub fn max_order(&self, threshold: f64) -> i32 {
        let cut = threshold * self.total();
        self.iter()
            .filter(|&(_, w)| w > cut)
            .map(|(n, _)| n.abs())
            .max()
            .unwrap_or(0)
    }

    /// Combine `±n` into a single entry at `|n|`.
    pub fn folded(&self) -> CoherenceSpectrum {
        let mut out = CoherenceSpectrum::new();
        for (n, w) in self.iter() {
            *out.intensities.entry(n.abs()).or_insert(0.0) += w;
        }
        out
    }
}

/// Single-spin operator `I_axis` of spin `i`, embedded in the cluster space.
pub fn single_spin_op(sys: &SpinSystem, i: usize, axis: Axis) -> Result<Operator> {
    sys.check_spin(i)?;
    let dim = sys.dim();
    let bit = sys.bit(i);
    let mut m = CMatrix::zeros(dim, dim);
    let half = C64::new(0.5, 0.0);
    let ihalf = C64::new(0.0, 0.5);
    for col in 0..dim {
        let down = col & bit != 0;
        match axis {
            Axis::Z => m[(col, col)] = if down { -half } else { half },
            Axis::Plus if down => m[(col & !bit, col)] = C64::new(1.0, 0.0),
            Axis::Minus if !down => m[(col | bit, col)] = C64::new(1.0, 0.0),
            // I_x = (I_+ + I_-)/2, I_y = -i (I_+ - I_-)/2
            Axis::X => m[(col ^ bit, col)] = half,
            Axis::Y => m[(col ^ bit, col)] = if down { -ihalf } else { ihalf },
            _ => {}
        }
    }
    Ok(Operator::new(m, format!("I{axis}_{i}")))
}

/// Collective operator `Σ_i I_axis^i`.
pub fn total_op(sys: &SpinSystem, axis: Axis) -> Operator {
    let mut m = CMatrix::zeros(sys.dim(), sys.dim());
    for i in 0..sys.n_spins() {
        m += single_spin_op(sys, i, axis).expect("index in range").matrix;
    }
    Operator::new(m, format!("I{axis}_total"))
}

/// High-temperature equilibrium: `Σ_i I_z^i` scaled to unit Frobenius norm.
pub fn thermal_state(sys: &SpinSystem) -> State {
    let iz = total_op(sys, Axis::Z).matrix;
    let norm = frobenius(&iz);
    State {
        rho: iz / C64::new(norm, 0.0),
        scale: 1.0 / norm,
    }
}

/// Weight `‖ρ_n‖_F²` of every coherence order present in `rho`.
pub fn coherence_decompose(sys: &SpinSystem, rho: &State) -> Result<CoherenceSpectrum> {
    sys.check_dim(&rho.rho)?;
    let m = sys.n_spins() as i32;
    let mut weights = vec![0.0; (2 * m + 1) as usize];
    for r in 0..sys.dim() {
        for c in 0..sys.dim() {
            let n = sys.order_of(r, c);
            weights[(n + m) as usize] += rho.rho[(r, c)].norm_sqr();
        }
    }
    let mut spectrum = CoherenceSpectrum::new();
    for (k, w) in weights.into_iter().enumerate() {
        spectrum.insert(k as i32 - m, w);
    }
    Ok(spectrum)
}

/// The order-`n` block `ρ_n` of `rho`, as a full matrix with every other
/// element zeroed.
pub fn order_component(sys: &SpinSystem, rho: &CMatrix, n: i32) -> Result<CMatrix> {
    sys.check_dim(rho)?;
    let dim = sys.dim();
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        if sys.order_of(r, c) == n {
            rho[(r, c)]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// Collective pulse propagator `exp(-i θ (cos(φ₀+φ) I_x + sin(φ₀+φ) I_y))`
/// where `φ₀` is 0 for an x pulse and π/2 for a y pulse.
pub fn collective_rotation(sys: &SpinSystem, axis: Axis, angle: f64, phase: f64) -> Result<Operator> {
    let base = match axis {
        Axis::X => 0.0,
        Axis::Y => std::f64::consts::FRAC_PI_2,
        other => {
            return Err(Error::InvalidParameter(format!(
                "rotation axis must be x or y, got {other}"
            )))
        }
    };
    Ok(rotation(sys, angle, base + phase))
}

/// Collective rotation by `angle` about the transverse axis at `phase` from x.
///
/// Built as the M-fold Kronecker power of the one-spin rotation, which is exact
/// because the collective generator is a sum of commuting single-spin terms.
pub fn rotation(sys: &SpinSystem, angle: f64, phase: f64) -> Operator {
    let (s, c) = (angle / 2.0).sin_cos();
    let (sp, cp) = phase.sin_cos();
    // cos(θ/2) 1 − i sin(θ/2) (cos φ σ_x + sin φ σ_y)
    let one = [
        [C64::new(c, 0.0), C64::new(-s * sp, -s * cp)],
        [C64::new(s * sp, -s * cp), C64::new(c, 0.0)],
    ];
    let m = sys.n_spins();
    let dim = sys.dim();
    let u = CMatrix::from_fn(dim, dim, |r, col| {
        let mut acc = C64::new(1.0, 0.0);
        for k in 0..m {
            let shift = m - 1 - k;
            acc *= one[(r >> shift) & 1][(col >> shift) & 1];
        }
        acc
    });
    Operator::new(u, format!("R({angle:.4},{phase:.4})"))
}

/// `exp(-i φ I_z^tot)` as a diagonal vector.
pub fn z_rotation_diagonal(sys: &SpinSystem, phi: f64) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_fn(sys.dim(), |r, _| {
        C64::from_polar(1.0, -phi * sys.magnetization(r))
    })
}
