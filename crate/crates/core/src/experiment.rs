//! Multiple-quantum spin counting: two-quantum preparation, storage under a
//! decoupling block, phase-encoded evolution, time-reversed mixing, purge and
//! readout, followed by a cosine transform over the phase sweep.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{conjugate, identity, trace_product, zeros, CMatrix};
use crate::noise::{sample_trajectory, NoiseModel};
use crate::propagate::{map_trajectories, trajectory_for, Estimate, Evolver, PropagationConfig};
use crate::sequence::{gen_dd, gen_mqc_cycle, DDScheme, PulseSequence, SchemeKind, SequenceEvent, Timing};
use crate::spin::{order_component, rotation, thermal_state, total_op, Axis, CoherenceSpectrum, SpinSystem, State};

/// How residual coherences are removed before detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PurgeMode {
    /// Keep only the zero-quantum block.
    Projection,
    /// Average over `n_traj` draws of a collective static field of RMS
    /// `rms` acting for `t_r`, without any other interaction.
    Evolve {
        t_r: f64,
        rms: f64,
        n_traj: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqcConfig {
    /// Preparation (and mixing) cycles.
    pub m: usize,
    pub delta: f64,
    /// π/2 pulse width; `0` gives δ pulses.
    pub tau_pi2: f64,
    pub n_max: usize,
    /// Encoding frequency `Δω` in rad/s. `None` keeps `t₁ = 0` for every
    /// phase step.
    pub delta_omega: Option<f64>,
    /// Decoupling during storage. `None` means no storage period at all.
    pub storage: Option<DDScheme>,
    pub dd_after_t1: bool,
    pub purge: PurgeMode,
    pub propagation: PropagationConfig,
}

impl Default for MqcConfig {
    fn default() -> Self {
        Self {
            m: 5,
            delta: 2e-6,
            tau_pi2: 0.0,
            n_max: 64,
            delta_omega: Some(2.0 * PI * 200e3),
            storage: None,
            dd_after_t1: false,
            purge: PurgeMode::Projection,
            propagation: PropagationConfig::default(),
        }
    }
}

impl MqcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidParameter("m must be ≥ 1".into()));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be ≥ 1".into()));
        }
        if !(self.delta >= 0.0) || !(self.tau_pi2 >= 0.0) {
            return Err(Error::InvalidParameter("Δ and τ_π/2 must be ≥ 0".into()));
        }
        if let Some(w) = self.delta_omega {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("Δω must be positive, got {w}")));
            }
        }
        if let PurgeMode::Evolve { t_r, rms, n_traj, .. } = self.purge {
            if !(t_r > 0.0) || !(rms >= 0.0) || n_traj < 1 {
                return Err(Error::InvalidParameter("purge needs t_R > 0, rms ≥ 0, n_traj ≥ 1".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        2 * self.n_max
    }

    pub fn alpha(&self, k: usize) -> f64 {
        k as f64 * PI / self.n_max as f64
    }

    pub fn t1(&self, k: usize) -> f64 {
        self.delta_omega.map_or(0.0, |w| self.alpha(k) / w)
    }

    fn ideal(&self) -> bool {
        self.tau_pi2 == 0.0 || self.propagation.ideal_pulses
    }

    fn cycle(&self, alpha: f64) -> Result<PulseSequence> {
        let width = if self.propagation.ideal_pulses { 0.0 } else { self.tau_pi2 };
        gen_mqc_cycle(self.delta, width, alpha, self.m)
    }
}

/// Noise-free propagator of `m` excitation cycles with encoding phase `alpha`.
pub fn cycle_unitary(sys: &SpinSystem, cfg: &MqcConfig, alpha: f64) -> Result<CMatrix> {
    let evolver = Evolver::internal(sys, true, cfg.ideal());
    Ok(evolver.unitary(&cfg.cycle(alpha)?, 0.0, None))
}

/// Thermal state after the `m` preparation cycles.
pub fn prepare(sys: &SpinSystem, cfg: &MqcConfig) -> Result<State> {
    cfg.validate()?;
    let u = cycle_unitary(sys, cfg, 0.0)?;
    Ok(State::new(conjugate(&u, &thermal_state(sys).rho)))
}

fn purge_draws(sys: &SpinSystem, t_r: f64, rms: f64, n_traj: usize, seed: u64) -> Result<Vec<CMatrix>> {
    let model = NoiseModel::static_gaussian(rms, seed).correlated(true);
    let evolver = Evolver::new(sys, zeros(sys.dim()), true);
    let wait = PulseSequence::from_events(vec![SequenceEvent::Delay { duration: t_r }]);
    (0..n_traj)
        .map(|j| {
            let traj = sample_trajectory(&model, t_r, t_r, sys.n_spins(), j as u64)?;
            Ok(evolver.unitary(&wait, 0.0, Some(&traj)))
        })
        .collect()
}

/// Remove residual coherences according to `mode`.
pub fn purge(sys: &SpinSystem, rho: &State, mode: PurgeMode) -> Result<State> {
    let out = match mode {
        PurgeMode::Projection => order_component(sys, &rho.rho, 0)?,
        PurgeMode::Evolve { t_r, rms, n_traj, seed } => {
            if rho.rho.nrows() != sys.dim() {
                return Err(Error::DimensionMismatch {
                    expected: sys.dim(),
                    got: rho.rho.nrows(),
                });
            }
            let draws = purge_draws(sys, t_r, rms, n_traj, seed)?;
            let sum = draws
                .iter()
                .fold(zeros(sys.dim()), |acc, v| acc + conjugate(v, &rho.rho));
            sum / crate::C64::new(n_traj as f64, 0.0)
        }
    };
    Ok(State { rho: out, scale: rho.scale })
}

/// Adjoint of [`purge`] acting on an observable.
fn purge_adjoint(sys: &SpinSystem, obs: &CMatrix, mode: PurgeMode) -> Result<CMatrix> {
    match mode {
        PurgeMode::Projection => order_component(sys, obs, 0),
        PurgeMode::Evolve { t_r, rms, n_traj, seed } => {
            let draws = purge_draws(sys, t_r, rms, n_traj, seed)?;
            let sum = draws
                .iter()
                .fold(zeros(sys.dim()), |acc, v| acc + conjugate(&v.adjoint(), obs));
            Ok(sum / crate::C64::new(n_traj as f64, 0.0))
        }
    }
}

/// Detection observable: `(π/2)_y` then `I_x`, scaled so the thermal state
/// reads 1.
fn detection_operator(sys: &SpinSystem) -> CMatrix {
    let ry = rotation(sys, FRAC_PI_2, FRAC_PI_2).matrix;
    let obs = conjugate(&ry.adjoint(), &total_op(sys, Axis::X).matrix);
    let reference = trace_product(&thermal_state(sys).rho, &obs).re;
    obs / crate::C64::new(reference, 0.0)
}

/// Heisenberg-picture readout for every phase step: the signal of a state
/// `ρ` entering mixing at step `k` is `Re Tr(ρ W_k)`.
fn readout_operators(sys: &SpinSystem, cfg: &MqcConfig) -> Result<Vec<CMatrix>> {
    let purged = purge_adjoint(sys, &detection_operator(sys), cfg.purge)?;
    (0..cfg.steps())
        .map(|k| {
            let u = cycle_unitary(sys, cfg, FRAC_PI_2 + cfg.alpha(k))?;
            Ok(conjugate(&u.adjoint(), &purged))
        })
        .collect()
}

/// Cosine transform of a phase sweep over `2 n_max` equally spaced steps
/// after removing its mean: `A_n = (1/n_max) Σ_k (S_k − S̄) cos(n α_k)` for
/// `n = 0..=n_max`.
pub fn cosine_transform(signal: &[f64], n_max: usize) -> Vec<f64> {
    assert_eq!(signal.len(), 2 * n_max, "sweep length must be 2·n_max");
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    (0..=n_max)
        .map(|n| {
            signal
                .iter()
                .enumerate()
                .map(|(k, s)| (s - mean) * (PI * (n * k) as f64 / n_max as f64).cos())
                .sum::<f64>()
                / n_max as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqcResult {
    pub n_max: usize,
    pub alphas: Vec<f64>,
    pub t1: Vec<f64>,
    /// Ensemble signal per phase step.
    pub signal: Vec<Estimate>,
    /// Signed cosine amplitudes `A_n`, `n = 0..=n_max`.
    pub amplitudes: Vec<Estimate>,
    /// `A_n` of every trajectory, for paired comparisons between runs that
    /// share noise streams.
    pub per_trajectory: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl MqcResult {
    fn from_sweeps(cfg: &MqcConfig, sweeps: Vec<Vec<f64>>, warnings: Vec<String>) -> Self {
        let steps = cfg.steps();
        let signal = (0..steps)
            .map(|k| Estimate::from_samples(&sweeps.iter().map(|s| s[k]).collect::<Vec<_>>()))
            .collect();
        let per_trajectory: Vec<Vec<f64>> =
            sweeps.iter().map(|s| cosine_transform(s, cfg.n_max)).collect();
        let amplitudes = (0..=cfg.n_max)
            .map(|n| Estimate::from_samples(&per_trajectory.iter().map(|a| a[n]).collect::<Vec<_>>()))
            .collect();
        Self {
            n_max: cfg.n_max,
            alphas: (0..steps).map(|k| cfg.alpha(k)).collect(),
            t1: (0..steps).map(|k| cfg.t1(k)).collect(),
            signal,
            amplitudes,
            per_trajectory,
            warnings,
        }
    }

    /// `|A_n|`, or 0 outside `0..=n_max`.
    pub fn intensity(&self, order: i32) -> f64 {
        self.amplitudes
            .get(order.unsigned_abs() as usize)
            .map_or(0.0, |a| a.mean.abs())
    }

    pub fn stderr(&self, order: i32) -> f64 {
        self.amplitudes
            .get(order.unsigned_abs() as usize)
            .map_or(0.0, |a| a.stderr)
    }

    /// Folded spectrum, `n ≥ 0`.
    pub fn spectrum(&self) -> CoherenceSpectrum {
        let mut s = CoherenceSpectrum::new();
        for n in 0..=self.n_max as i32 {
            s.insert(n, self.intensity(n));
        }
        s
    }

    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("order,intensity,stderr\n");
        for (n, a) in self.amplitudes.iter().enumerate() {
            writeln!(out, "{n},{},{}", a.mean.abs(), a.stderr).expect("writing to a String");
        }
        out
    }

    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("k,alpha_rad,t1_s,signal\n");
        for (k, s) in self.signal.iter().enumerate() {
            writeln!(out, "{k},{},{},{}", self.alphas[k], self.t1[k], s.mean).expect("writing to a String");
        }
        out
    }
}

/// Paired estimate of `|A_n|(a) − |A_n|(b)` for runs with shared noise
/// streams and equal trajectory counts.
pub fn paired_intensity_difference(a: &MqcResult, b: &MqcResult, order: usize) -> Result<Estimate> {
    if a.per_trajectory.len() != b.per_trajectory.len() {
        return Err(Error::InvalidParameter("paired runs need equal trajectory counts".into()));
    }
    let sa = a.amplitudes[order].mean.signum();
    let sb = b.amplitudes[order].mean.signum();
    let diffs: Vec<f64> = a
        .per_trajectory
        .iter()
        .zip(&b.per_trajectory)
        .map(|(x, y)| sa * x[order] - sb * y[order])
        .collect();
    Ok(Estimate::from_samples(&diffs))
}

fn sweep(
    sys: &SpinSystem,
    cfg: &MqcConfig,
    noise: &NoiseModel,
    start: &CMatrix,
    readout: &[CMatrix],
) -> Result<Vec<Vec<f64>>> {
    let steps = cfg.steps();
    let t1: Vec<f64> = (0..steps).map(|k| cfg.t1(k)).collect();
    let dd = cfg.storage.as_ref().map(gen_dd).transpose()?;
    let t_dd = dd.as_ref().map_or(0.0, PulseSequence::total_duration);
    let ideal = cfg.propagation.ideal_pulses;
    let dd_evolver = Evolver::internal(sys, cfg.propagation.include_dipolar_during_dd, ideal);
    let free_evolver = Evolver::internal(sys, true, ideal);
    let delay = |d: f64| PulseSequence::from_events(vec![SequenceEvent::Delay { duration: d }]);
    let read = |rho: &CMatrix, k: usize| trace_product(rho, &readout[k]).re;
    let n = cfg.propagation.trajectories(noise);
    let total = t_dd + t1[steps - 1];

    let results: Vec<Result<Vec<f64>>> = map_trajectories(n, |j| {
        let traj = trajectory_for(noise, total, cfg.propagation.dt, sys.n_spins(), j as u64)?;
        let traj = traj.as_ref();
        let mut out = Vec::with_capacity(steps);
        if cfg.dd_after_t1 {
            let mut u_t1 = identity(sys.dim());
            for k in 0..steps {
                let prev = if k == 0 { 0.0 } else { t1[k - 1] };
                u_t1 = free_evolver.unitary(&delay(t1[k] - prev), prev, traj) * u_t1;
                let u = match &dd {
                    Some(seq) => dd_evolver.unitary(seq, t1[k], traj) * &u_t1,
                    None => u_t1.clone(),
                };
                out.push(read(&conjugate(&u, start), k));
            }
        } else {
            let mut rho = match &dd {
                Some(seq) => conjugate(&dd_evolver.unitary(seq, 0.0, traj), start),
                None => start.clone(),
            };
            for k in 0..steps {
                let prev = if k == 0 { 0.0 } else { t1[k - 1] };
                if t1[k] > prev {
                    rho = conjugate(&free_evolver.unitary(&delay(t1[k] - prev), t_dd + prev, traj), &rho);
                }
                out.push(read(&rho, k));
            }
        }
        Ok(out)
    });
    results.into_iter().collect()
}

fn aliasing_warnings(sys: &SpinSystem, cfg: &MqcConfig) -> Vec<String> {
    if sys.n_spins() > cfg.n_max {
        vec![format!(
            "n_max = {} is below the cluster size {}; orders above n_max alias",
            cfg.n_max,
            sys.n_spins()
        )]
    } else {
        Vec::new()
    }
}

/// The full spin-counting experiment.
///
/// For each `k < 2 n_max` the thermal state is prepared with `m` cycles,
/// stored (decoupling block, then free evolution for `t₁ = α_k/Δω`), mixed
/// with `m` cycles at phase `π/2 + α_k`, purged and read out. Noise acts
/// during storage only.
pub fn run_mqc(sys: &SpinSystem, cfg: &MqcConfig, noise: &NoiseModel) -> Result<MqcResult> {
    cfg.validate()?;
    if cfg.storage.is_some() || cfg.delta_omega.is_some() {
        cfg.propagation.validate(noise)?;
    }
    let prepared = prepare(sys, cfg)?;
    let readout = readout_operators(sys, cfg)?;
    let sweeps = sweep(sys, cfg, noise, &prepared.rho, &readout)?;
    Ok(MqcResult::from_sweeps(cfg, sweeps, aliasing_warnings(sys, cfg)))
}

/// Phase sweep of an arbitrary state entering the mixing period directly,
/// with no preparation, storage or noise.
pub fn encode_injected(sys: &SpinSystem, cfg: &MqcConfig, injected: &State) -> Result<MqcResult> {
    cfg.validate()?;
    if injected.rho.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: injected.rho.nrows(),
        });
    }
    let readout = readout_operators(sys, cfg)?;
    let sweep: Vec<f64> = readout
        .iter()
        .map(|w| trace_product(&injected.rho, w).re)
        .collect();
    Ok(MqcResult::from_sweeps(cfg, vec![sweep], aliasing_warnings(sys, cfg)))
}

/// Overlap with the thermal state after `m` preparation cycles followed
/// directly by `m` time-reversed cycles.
pub fn echo_fidelity(sys: &SpinSystem, cfg: &MqcConfig) -> Result<f64> {
    cfg.validate()?;
    let forward = cycle_unitary(sys, cfg, 0.0)?;
    let backward = cycle_unitary(sys, cfg, FRAC_PI_2)?;
    let rho0 = thermal_state(sys);
    let out = State::new(conjugate(&(backward * forward), &rho0.rho));
    Ok(out.overlap(&rho0))
}

/// Storage durations `T(N) = N(2τ + τ_π)` and spectra versus pulse count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub n_pulses: usize,
    pub duration_s: f64,
    pub outcome: Result<ScanPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub dd: MqcResult,
    /// No decoupling over the same storage time.
    pub free: MqcResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    /// Storage of zero length.
    pub reference: MqcResult,
    pub entries: Vec<ScanEntry>,
}

pub const SCAN_ORDERS: [i32; 4] = [2, 4, 6, 8];

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n_pulses,duration_s,order,intensity_dd,stderr_dd,intensity_free,stderr_free,intensity_ref\n",
        );
        for e in &self.entries {
            match &e.outcome {
                Ok(p) => {
                    for n in SCAN_ORDERS {
                        writeln!(
                            out,
                            "{},{},{n},{},{},{},{},{}",
                            e.n_pulses,
                            e.duration_s,
                            p.dd.intensity(n),
                            p.dd.stderr(n),
                            p.free.intensity(n),
                            p.free.stderr(n),
                            self.reference.intensity(n)
                        )
                        .expect("writing to a String");
                    }
                }
                Err(err) => {
                    writeln!(out, "# n_pulses {} failed: {err}", e.n_pulses).expect("writing to a String");
                }
            }
        }
        out
    }
}

/// Spectra for each pulse count in `n_list` using `kind` with half-gap `tau`
/// and width `tau_pi`, alongside free storage of the matched duration.
/// Failures are recorded per entry.
pub fn dd_on_mqc_scan(
    sys: &SpinSystem,
    cfg: &MqcConfig,
    noise: &NoiseModel,
    kind: SchemeKind,
    n_list: &[usize],
    tau: f64,
    tau_pi: f64,
) -> Result<ScanTable> {
    let zero = DDScheme::new(SchemeKind::None, 1, Timing::Total(0.0), tau_pi);
    let reference = run_mqc(sys, &MqcConfig { storage: Some(zero), ..cfg.clone() }, noise)?;
    let entries = n_list
        .iter()
        .map(|&n| {
            let duration = n as f64 * (2.0 * tau + tau_pi);
            let outcome = (|| {
                let scheme = DDScheme::new(kind, n, Timing::Total(duration), tau_pi);
                let dd = run_mqc(sys, &MqcConfig { storage: Some(scheme), ..cfg.clone() }, noise)?;
                let blank = DDScheme::new(SchemeKind::None, n, Timing::Total(duration), tau_pi);
                let free = run_mqc(sys, &MqcConfig { storage: Some(blank), ..cfg.clone() }, noise)?;
                Ok(ScanPoint { dd, free })
            })();
            ScanEntry {
                n_pulses: n,
                duration_s: duration,
                outcome,
            }
        })
        .collect();
    Ok(ScanTable { reference, entries })
}
