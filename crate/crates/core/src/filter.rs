//! Filter-function description of single-spin pure dephasing under a π-pulse
//! train, with the attenuation exponent `χ` for Gaussian noise.
//!
//! For switching times `t_0 = 0 < t_1 < … < t_N < t_{N+1} = T` (pulse centres)
//!
//! ```text
//! F(ω) = |Σ_k (−1)^k (e^{iω t_{k+1}} − e^{iω t_k})|² / 2
//! χ    = 2 ∫₀^∞ S(ω) F(ω) / ω² dω
//! ```
//!
//! with `S` the density of [`crate::noise::spectral_density`], so that the
//! signal of a Gaussian bath is `e^{−χ}`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{spectral_density, NoiseKind, NoiseModel};
use crate::quadrature::integrate;
use crate::sequence::{PulseSequence, SequenceEvent};

/// Points on the reported `F` grid.
pub const GRID_POINTS: usize = 400;

const REL_TOL: f64 = 1e-6;

/// Sign-switching times of a π-pulse sequence: `0`, every pulse centre, `T`.
pub fn switching_times(seq: &PulseSequence) -> Result<Vec<f64>> {
    for (index, e) in seq.events().iter().enumerate() {
        if let SequenceEvent::Pulse(p) = e {
            if (p.flip_angle - PI).abs() > 1e-12 {
                return Err(Error::NonPiPulse {
                    index,
                    angle: p.flip_angle,
                });
            }
        }
    }
    let mut t = vec![0.0];
    t.extend(seq.pulse_centers());
    t.push(seq.total_duration());
    Ok(t)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Y(ω)/(iω) = Σ_k (−1)^k ∫_{t_k}^{t_{k+1}} e^{iωt} dt`, finite at `ω = 0`.
fn response(times: &[f64], omega: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, w) in times.windows(2).enumerate() {
        let width = w[1] - w[0];
        let mid = 0.5 * (w[0] + w[1]);
        let term = Complex64::from_polar(width * sinc(0.5 * omega * width), omega * mid);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// `F(ω)/ω²`.
fn weight(times: &[f64], omega: f64) -> f64 {
    0.5 * response(times, omega).norm_sqr()
}

/// `F(ω)` for switching times from [`switching_times`].
pub fn filter_function_times(times: &[f64], omega: f64) -> f64 {
    omega * omega * weight(times, omega)
}

pub fn filter_function(seq: &PulseSequence, omega: f64) -> Result<f64> {
    Ok(filter_function_times(&switching_times(seq)?, omega))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub total_s: f64,
    pub chi: f64,
    pub predicted_signal: f64,
    /// `(ω, F(ω))` on a log grid over `[10⁻²/T, 10³/T]`.
    pub grid: Vec<(f64, f64)>,
}

impl FilterResult {
    pub fn filter_csv(&self) -> String {
        let mut out = String::from("omega_rad_s,F\n");
        for (w, f) in &self.grid {
            writeln!(out, "{w},{f}").expect("writing to a String");
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "T_s,chi,predicted_signal\n{},{},{}\n",
            self.total_s, self.chi, self.predicted_signal
        )
    }
}

pub fn log_grid(total: f64) -> Vec<f64> {
    let (lo, hi) = ((1e-2 / total).ln(), (1e3 / total).ln());
    (0..GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// `2 ∫ S F/ω² dω` over `[a, b]` split into panels no wider than `width`.
fn panels(s: &dyn Fn(f64) -> f64, times: &[f64], a: f64, b: f64, width: f64) -> Result<f64> {
    let n = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let f = |w: f64| 2.0 * s(w) * weight(times, w);
    // A first pass fixes the absolute scale for the per-panel tolerance.
    let rough: f64 = (0..n)
        .map(|i| crate::quadrature::kronrod15(&f, a + i as f64 * h, a + (i + 1) as f64 * h).0.abs())
        .sum();
    let tol = 0.1 * REL_TOL * rough / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == n { b } else { lo + h };
        total += integrate(f, lo, hi, tol, REL_TOL, 2000)?.value;
    }
    Ok(total)
}

/// Attenuation exponent of `seq` in the Gaussian bath `model`.
pub fn chi(seq: &PulseSequence, model: &NoiseModel) -> Result<FilterResult> {
    let times = switching_times(seq)?;
    let total = seq.total_duration();
    if !(total > 0.0) {
        return Err(Error::NonPositiveDuration(total));
    }
    let chi = chi_times(&times, model)?;
    let grid = log_grid(total)
        .into_iter()
        .map(|w| (w, filter_function_times(&times, w)))
        .collect();
    Ok(FilterResult {
        total_s: total,
        chi,
        predicted_signal: (-chi).exp(),
        grid,
    })
}

pub fn chi_times(times: &[f64], model: &NoiseModel) -> Result<f64> {
    model.validate()?;
    let total = *times.last().expect("at least [0, T]");
    let intervals = (times.len() - 1) as f64;
    let period = TAU / total;
    let s = |w: f64| spectral_density(model, w).expect("ω ≥ 0 and non-static model");
    match model.kind {
        NoiseKind::None => Ok(0.0),
        NoiseKind::StaticGaussian => Err(Error::StaticSpectrum),
        NoiseKind::HardCutoff { omega_cutoff } => panels(&s, times, 0.0, omega_cutoff, period),
        NoiseKind::OrnsteinUhlenbeck { tau_c } => {
            let cut = (40.0 / tau_c).max(40.0 * PI * intervals / total);
            let cut = cut.min(2e4 * period);
            let body = panels(&s, times, 0.0, cut, period)?;
            // ω = cut/u maps the tail onto (0, 1].
            let tail_f = |u: f64| {
                if u <= 0.0 {
                    0.0
                } else {
                    let w = cut / u;
                    2.0 * s(w) * weight(times, w) * cut / (u * u)
                }
            };
            let tail = integrate(tail_f, 0.0, 1.0, 0.1 * REL_TOL * body.abs(), REL_TOL, 20_000)?;
            Ok(body + tail.value)
        }
    }
}
