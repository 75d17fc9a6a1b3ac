//! Classical dephasing noise `Σ_i β_i(t) I_z^i`.
//!
//! Spectral-density convention used throughout the crate: `S(ω)` is the
//! two-sided density of the autocorrelation `C(τ) = ⟨β(t) β(t+τ)⟩`,
//!
//! ```text
//! C(τ) = ∫_{-∞}^{∞} S(ω) e^{-iωτ} dω,        ∫_0^∞ S(ω) dω = C(0)/2 = b²/2,
//! ```
//!
//! evaluated at `ω ≥ 0`. With it the Gaussian dephasing exponent of a
//! switching function `y(t)` is `χ = ∫_0^∞ S(ω) |Y(ω)|² dω`, see
//! [`crate::filter`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Number of random-phase cosines in a hard-cutoff sample path.
pub const HARD_CUTOFF_COMPONENTS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Quasi-static offsets, one Gaussian draw per trajectory.
    StaticGaussian,
    /// Gauss–Markov process with `C(τ) = b² exp(-|τ|/τ_c)`.
    OrnsteinUhlenbeck { tau_c: f64 },
    /// Flat spectrum on `[0, ω_c]`, zero above.
    HardCutoff { omega_cutoff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// RMS amplitude `b` in rad/s.
    pub rms: f64,
    pub seed: u64,
    /// One shared path for every spin instead of independent paths.
    pub correlated_across_spins: bool,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            rms: 0.0,
            seed: 0,
            correlated_across_spins: false,
        }
    }

    pub fn static_gaussian(rms: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::StaticGaussian,
            rms,
            seed,
            correlated_across_spins: false,
        }
    }

    pub fn ornstein_uhlenbeck(rms: f64, tau_c: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::OrnsteinUhlenbeck { tau_c },
            rms,
            seed,
            correlated_across_spins: false,
        }
    }

    pub fn hard_cutoff(rms: f64, omega_cutoff: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::HardCutoff { omega_cutoff },
            rms,
            seed,
            correlated_across_spins: false,
        }
    }

    pub fn correlated(mut self, yes: bool) -> Self {
        self.correlated_across_spins = yes;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, NoiseKind::None) || self.rms == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rms >= 0.0) || !self.rms.is_finite() {
            return Err(Error::InvalidParameter(format!("noise rms must be ≥ 0, got {}", self.rms)));
        }
        match self.kind {
            NoiseKind::OrnsteinUhlenbeck { tau_c } if !(tau_c > 0.0) => Err(
                Error::InvalidParameter(format!("correlation time must be > 0, got {tau_c:e}")),
            ),
            NoiseKind::HardCutoff { omega_cutoff } if !(omega_cutoff > 0.0) => Err(
                Error::InvalidParameter(format!("cutoff must be > 0, got {omega_cutoff:e}")),
            ),
            _ => Ok(()),
        }
    }

    /// Largest grid step that resolves this process.
    ///
    /// OU needs `dt ≤ τ_c/10`; the hard-cutoff path needs `ω_c dt ≤ π/4`.
    pub fn max_grid_step(&self) -> f64 {
        match self.kind {
            NoiseKind::OrnsteinUhlenbeck { tau_c } => tau_c / 10.0,
            NoiseKind::HardCutoff { omega_cutoff } => PI / (4.0 * omega_cutoff),
            _ => f64::INFINITY,
        }
    }

    pub fn check_grid(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step must be > 0, got {dt:e}")));
        }
        let max = self.max_grid_step();
        if dt > max * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse(format!(
                "dt = {dt:e} s exceeds {max:e} s for {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// RMS amplitude for which static Gaussian noise gives a free-evolution decay
/// `exp(-b² t²/2)` reaching `1/e` at `t_decay`.
pub fn static_rms_for_decay(t_decay: f64) -> f64 {
    2f64.sqrt() / t_decay
}

/// OU dephasing exponent for free evolution over `t`:
/// `χ = b² τ_c² (t/τ_c − 1 + e^{−t/τ_c})`.
pub fn ou_free_decay_exponent(rms: f64, tau_c: f64, t: f64) -> f64 {
    let x = t / tau_c;
    // x − 1 + e^{−x} loses all precision for small x; use the series there.
    let g = if x < 1e-3 {
        x * x / 2.0 - x.powi(3) / 6.0 + x.powi(4) / 24.0
    } else {
        x - 1.0 + (-x).exp()
    };
    rms * rms * tau_c * tau_c * g
}

/// RMS amplitude for which OU noise with correlation time `tau_c` gives a
/// free-evolution decay reaching `1/e` at `t_decay`.
pub fn ou_rms_for_decay(t_decay: f64, tau_c: f64) -> f64 {
    1.0 / ou_free_decay_exponent(1.0, tau_c, t_decay).sqrt()
}

/// Closed-form `S(ω)` under the module convention.
pub fn spectral_density(model: &NoiseModel, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::InvalidParameter(format!("ω must be ≥ 0, got {omega}")));
    }
    let b2 = model.rms * model.rms;
    Ok(match model.kind {
        NoiseKind::None => 0.0,
        NoiseKind::StaticGaussian => return Err(Error::StaticSpectrum),
        NoiseKind::OrnsteinUhlenbeck { tau_c } => {
            b2 * tau_c / (PI * (1.0 + (omega * tau_c).powi(2)))
        }
        NoiseKind::HardCutoff { omega_cutoff } => {
            if omega <= omega_cutoff {
                b2 / (2.0 * omega_cutoff)
            } else {
                0.0
            }
        }
    })
}

/// Piecewise-constant sample path `β_i(t)` for every spin on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory {
    dt: f64,
    n_spins: usize,
    n_cells: usize,
    values: Vec<f64>,
}

impl NoiseTrajectory {
    pub fn zero(n_spins: usize, total: f64, dt: f64) -> Self {
        let n_cells = cell_count(total, dt);
        Self {
            dt,
            n_spins,
            n_cells,
            values: vec![0.0; n_cells * n_spins],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// End of the covered window.
    pub fn duration(&self) -> f64 {
        self.n_cells as f64 * self.dt
    }

    /// Values of every spin in `cell`; cells past the end repeat the last one.
    pub fn row(&self, cell: usize) -> &[f64] {
        let c = cell.min(self.n_cells - 1);
        &self.values[c * self.n_spins..(c + 1) * self.n_spins]
    }

    pub fn value(&self, cell: usize, spin: usize) -> f64 {
        self.row(cell)[spin]
    }

    /// Path of one spin as a vector over cells.
    pub fn path(&self, spin: usize) -> Vec<f64> {
        (0..self.n_cells).map(|c| self.value(c, spin)).collect()
    }
}

fn cell_count(total: f64, dt: f64) -> usize {
    ((total / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Random source for trajectory `stream` of a model: the model seed selects
/// the key and `stream` the ChaCha stream, so every trajectory is independent
/// of evaluation order.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw one trajectory covering `[0, total]` for `n_spins` spins.
pub fn sample_trajectory(
    model: &NoiseModel,
    total: f64,
    dt: f64,
    n_spins: usize,
    stream: u64,
) -> Result<NoiseTrajectory> {
    model.validate()?;
    if !(total > 0.0) {
        return Err(Error::NonPositiveDuration(total));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step must be > 0, got {dt:e}")));
    }
    let mut traj = NoiseTrajectory::zero(n_spins, total, dt);
    if model.is_none() || n_spins == 0 {
        return Ok(traj);
    }
    let mut rng = trajectory_rng(model.seed, stream);
    let processes = if model.correlated_across_spins { 1 } else { n_spins };
    let n = traj.n_cells;
    let b = model.rms;
    for p in 0..processes {
        let path: Vec<f64> = match model.kind {
            NoiseKind::None => vec![0.0; n],
            NoiseKind::StaticGaussian => {
                let x: f64 = StandardNormal.sample(&mut rng);
                vec![b * x; n]
            }
            NoiseKind::OrnsteinUhlenbeck { tau_c } => {
                let rho = (-dt / tau_c).exp();
                let kick = b * (1.0 - rho * rho).sqrt();
                let x0: f64 = StandardNormal.sample(&mut rng);
                let mut x = b * x0;
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(x);
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    x = rho * x + kick * xi;
                }
                out
            }
            NoiseKind::HardCutoff { omega_cutoff } => {
                hard_cutoff_path(&mut rng, b, omega_cutoff, dt, n)
            }
        };
        let targets: Vec<usize> = if model.correlated_across_spins {
            (0..n_spins).collect()
        } else {
            vec![p]
        };
        for (cell, v) in path.into_iter().enumerate() {
            for &s in &targets {
                traj.values[cell * n_spins + s] = v;
            }
        }
    }
    Ok(traj)
}

/// Cell averages of `b √(2/K) Σ_k cos(ω_k t + φ_k)` with `ω_k ~ U(0, ω_c)`
/// and `φ_k ~ U(0, 2π)`; the ensemble spectrum is exactly flat on `[0, ω_c]`.
fn hard_cutoff_path(rng: &mut ChaCha8Rng, b: f64, omega_cutoff: f64, dt: f64, n: usize) -> Vec<f64> {
    let k = HARD_CUTOFF_COMPONENTS;
    let amp = b * (2.0 / k as f64).sqrt();
    let mut out = vec![0.0; n];
    for _ in 0..k {
        let w: f64 = rng.random_range(0.0..omega_cutoff);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let half = w * dt / 2.0;
        let sinc = if half.abs() < 1e-8 { 1.0 } else { half.sin() / half };
        // Phasor at the first cell midpoint, advanced by e^{iω dt} per cell.
        let (mut im, mut re) = (phi + half).sin_cos();
        let (sd, cd) = (w * dt).sin_cos();
        for v in out.iter_mut() {
            *v += amp * sinc * re;
            let nre = re * cd - im * sd;
            im = re * sd + im * cd;
            re = nre;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn zero_amplitude_gives_zero_path() {
        for model in [
            NoiseModel::static_gaussian(0.0, 1),
            NoiseModel::ornstein_uhlenbeck(0.0, 1e-5, 1),
            NoiseModel::hard_cutoff(0.0, 1e5, 1),
            NoiseModel::none(),
        ] {
            let t = sample_trajectory(&model, 1e-4, 1e-6, 3, 0).unwrap();
            assert!(t.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn static_variance_matches_b_squared() {
        let b = 3.0e4;
        let model = NoiseModel::static_gaussian(b, 42);
        let xs: Vec<f64> = (0..10_000)
            .map(|k| sample_trajectory(&model, 1e-5, 1e-5, 1, k).unwrap().value(0, 0))
            .collect();
        let (_, var) = mean_var(&xs);
        assert!((var / (b * b) - 1.0).abs() < 0.05, "var ratio {}", var / (b * b));
        let t = sample_trajectory(&model, 1e-4, 1e-6, 2, 3).unwrap();
        assert!(t.path(0).iter().all(|&v| v == t.value(0, 0)));
    }

    #[test]
    fn ou_autocorrelation_at_tau_c() {
        let (b, tau_c, dt) = (1.0, 1e-5, 1e-6);
        let model = NoiseModel::ornstein_uhlenbeck(b, tau_c, 7);
        let lag = (tau_c / dt).round() as usize;
        let mut acc = 0.0;
        let n = 10_000;
        for k in 0..n {
            let t = sample_trajectory(&model, 2.0 * tau_c, dt, 1, k).unwrap();
            acc += t.value(0, 0) * t.value(lag, 0);
        }
        let c = acc / n as f64;
        let expected = b * b / std::f64::consts::E;
        assert!((c / expected - 1.0).abs() < 0.05, "C(τ_c) = {c}, expected {expected}");
    }

    #[test]
    fn ou_correlation_exact_on_every_lag() {
        let (b, tau_c, dt) = (2.0, 4e-6, 1e-6);
        let model = NoiseModel::ornstein_uhlenbeck(b, tau_c, 9);
        let n = 20_000;
        let lags = 8;
        let mut acc = vec![0.0; lags];
        for k in 0..n {
            let t = sample_trajectory(&model, lags as f64 * dt, dt, 1, k).unwrap();
            for (l, a) in acc.iter_mut().enumerate() {
                *a += t.value(0, 0) * t.value(l, 0);
            }
        }
        for (l, a) in acc.iter().enumerate() {
            let c = a / n as f64;
            let expected = b * b * (-(l as f64) * dt / tau_c).exp();
            // Standard error of a product of unit-variance Gaussians is ≲ √2/√n.
            let se = b * b * (2.0f64).sqrt() / (n as f64).sqrt();
            assert!((c - expected).abs() < 4.0 * se, "lag {l}: {c} vs {expected}");
        }
    }

    #[test]
    fn hard_cutoff_variance_and_determinism() {
        let model = NoiseModel::hard_cutoff(5.0, 1e5, 3);
        let dt = 1e-7;
        let a = sample_trajectory(&model, 1e-5, dt, 2, 11).unwrap();
        let b = sample_trajectory(&model, 1e-5, dt, 2, 11).unwrap();
        assert_eq!(a, b);
        let samples: Vec<f64> = (0..4000)
            .map(|k| sample_trajectory(&model, dt, dt, 1, k).unwrap().value(0, 0))
            .collect();
        let (_, var) = mean_var(&samples);
        // Cell averaging shrinks the variance by at most sinc²(ω_c dt/2) ≈ 0.9996.
        assert!((var / 25.0 - 1.0).abs() < 0.06, "variance ratio {}", var / 25.0);
    }

    #[test]
    fn independent_spins_are_uncorrelated() {
        let model = NoiseModel::static_gaussian(1.0, 5);
        let n = 5000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let t = sample_trajectory(&model, 1e-6, 1e-6, 2, k).unwrap();
                (t.value(0, 0), t.value(0, 1))
            })
            .collect();
        let r = pairs.iter().map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(r.abs() < 3.0 / (n as f64).sqrt());
        let shared = sample_trajectory(&model.correlated(true), 1e-6, 1e-6, 3, 0).unwrap();
        assert_eq!(shared.value(0, 0), shared.value(0, 2));
    }

    #[test]
    fn spectral_density_examples() {
        let (b, tau_c) = (2.0, 3e-6);
        let ou = NoiseModel::ornstein_uhlenbeck(b, tau_c, 0);
        assert!((spectral_density(&ou, 0.0).unwrap() - b * b * tau_c / PI).abs() < 1e-18);
        // ∫_0^∞ S dω = b²/2 by the substitution ω = tan(u)/τ_c and the
        // midpoint rule on u ∈ (0, π/2).
        let n = 20_000;
        let h = (PI / 2.0) / n as f64;
        let f = |u: f64| {
            let w = u.tan() / tau_c;
            spectral_density(&ou, w).unwrap() / (tau_c * u.cos().powi(2))
        };
        let s: f64 = (0..n).map(|k| f((k as f64 + 0.5) * h)).sum();
        let integral = s * h;
        assert!((integral - b * b / 2.0).abs() < 1e-6 * b * b);

        let hc = NoiseModel::hard_cutoff(b, 1e5, 0);
        assert_eq!(spectral_density(&hc, 1.0001e5).unwrap(), 0.0);
        assert_eq!(spectral_density(&hc, 5e4).unwrap(), b * b / 2e5);
        assert_eq!(
            spectral_density(&NoiseModel::static_gaussian(1.0, 0), 1.0),
            Err(Error::StaticSpectrum)
        );
    }

    #[test]
    fn calibrations() {
        let t = 25e-6;
        assert!((static_rms_for_decay(t).powi(2) * t * t / 2.0 - 1.0).abs() < 1e-12);
        let b = ou_rms_for_decay(t, 50e-6);
        assert!((ou_free_decay_exponent(b, 50e-6, t) - 1.0).abs() < 1e-12);
        // Short-time limit is quasi-static.
        let tiny = ou_free_decay_exponent(1.0, 1.0, 1e-5);
        assert!((tiny / (0.5e-10) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn grid_checks() {
        let ou = NoiseModel::ornstein_uhlenbeck(1.0, 1e-5, 0);
        assert!(ou.check_grid(1e-6).is_ok());
        assert!(matches!(ou.check_grid(2e-6), Err(Error::GridTooCoarse(_))));
        assert!(NoiseModel::static_gaussian(1.0, 0).check_grid(1.0).is_ok());
        assert!(NoiseModel::ornstein_uhlenbeck(1.0, -1.0, 0).validate().is_err());
    }
}
