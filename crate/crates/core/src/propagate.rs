//! Time evolution through pulse sequences with piecewise-constant
//! Hamiltonians, single trajectories and noise ensembles.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{dipolar, zeeman};
use crate::linalg::{conjugate, identity, trace_product, CMatrix, HermitianEigen, C64};
use crate::noise::{sample_trajectory, NoiseModel, NoiseTrajectory};
use crate::sequence::{gen_dd_block, DDScheme, Pulse, PulseSequence, SequenceEvent};
use crate::spin::{rotation, thermal_state, total_op, Axis, SpinSystem, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    /// Noise trajectories per ensemble. Forced to 1 when there is no noise.
    pub n_traj: usize,
    /// Noise grid step in seconds.
    pub dt: f64,
    /// Replace every finite pulse by an instantaneous rotation at its centre.
    pub ideal_pulses: bool,
    /// Keep `H_D` on while a decoupling train runs.
    pub include_dipolar_during_dd: bool,
    /// Sum trajectory results in index order so output is bit-reproducible.
    pub deterministic: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            n_traj: 1,
            dt: 0.1e-6,
            ideal_pulses: false,
            include_dipolar_during_dd: true,
            deterministic: true,
        }
    }
}

impl PropagationConfig {
    pub fn trajectories(&self, noise: &NoiseModel) -> usize {
        if noise.is_none() {
            1
        } else {
            self.n_traj.max(1)
        }
    }

    pub fn validate(&self, noise: &NoiseModel) -> Result<()> {
        if self.n_traj < 1 {
            return Err(Error::InvalidParameter("n_traj must be ≥ 1".into()));
        }
        noise.validate()?;
        if !noise.is_none() {
            noise.check_grid(self.dt)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Drive {
    Free,
    Pulse { rate: f64, phase: f64 },
}

/// Builds propagators for one spin system and one static Hamiltonian `h0`.
pub struct Evolver<'a> {
    sys: &'a SpinSystem,
    h0: CMatrix,
    h0_eig: HermitianEigen,
    h0_diag: Option<DVector<f64>>,
    z_diag: Vec<DVector<f64>>,
    ix: CMatrix,
    iy: CMatrix,
    ideal_pulses: bool,
}

impl<'a> Evolver<'a> {
    pub fn new(sys: &'a SpinSystem, h0: CMatrix, ideal_pulses: bool) -> Self {
        let h0_eig = HermitianEigen::new(&h0);
        let h0_diag = h0_eig.is_diagonal().then(|| h0_eig.eigenvalues().clone());
        let m = sys.n_spins();
        let z_diag = (0..m)
            .map(|i| {
                DVector::from_fn(sys.dim(), |r, _| {
                    if (r >> (m - 1 - i)) & 1 == 0 {
                        0.5
                    } else {
                        -0.5
                    }
                })
            })
            .collect();
        Self {
            sys,
            h0,
            h0_eig,
            h0_diag,
            z_diag,
            ix: total_op(sys, Axis::X).matrix,
            iy: total_op(sys, Axis::Y).matrix,
            ideal_pulses,
        }
    }

    /// `H_Z`, plus `H_D` when `with_dipolar` and there are at least two spins.
    pub fn internal(sys: &'a SpinSystem, with_dipolar: bool, ideal_pulses: bool) -> Self {
        let mut h = zeeman(sys).matrix;
        if with_dipolar && sys.n_spins() >= 2 {
            h += dipolar(sys).expect("two or more spins").matrix;
        }
        Self::new(sys, h, ideal_pulses)
    }

    pub fn system(&self) -> &SpinSystem {
        self.sys
    }

    fn noise_diagonal(&self, beta: &[f64]) -> Option<DVector<f64>> {
        if beta.iter().all(|&b| b == 0.0) {
            return None;
        }
        let mut d = DVector::zeros(self.sys.dim());
        for (z, &b) in self.z_diag.iter().zip(beta) {
            if b != 0.0 {
                d.axpy(b, z, 1.0);
            }
        }
        Some(d)
    }

    fn piece(&self, tau: f64, drive: Drive, noise: Option<&DVector<f64>>) -> CMatrix {
        match (drive, noise, &self.h0_diag) {
            (Drive::Free, None, _) => self.h0_eig.propagator(tau),
            (Drive::Free, Some(nd), Some(h0)) => CMatrix::from_diagonal(
                &DVector::from_fn(h0.len(), |r, _| C64::from_polar(1.0, -(h0[r] + nd[r]) * tau)),
            ),
            _ => {
                let mut h = self.h0.clone();
                if let Some(nd) = noise {
                    for r in 0..h.nrows() {
                        h[(r, r)] += C64::new(nd[r], 0.0);
                    }
                }
                if let Drive::Pulse { rate, phase } = drive {
                    h += &self.ix * C64::new(rate * phase.cos(), 0.0);
                    h += &self.iy * C64::new(rate * phase.sin(), 0.0);
                }
                HermitianEigen::new(&h).propagator(tau)
            }
        }
    }

    /// Propagator of `[a, b]` under `drive`, split on the noise grid.
    fn interval(
        &self,
        a: f64,
        b: f64,
        drive: Drive,
        noise: Option<&NoiseTrajectory>,
        u: &mut CMatrix,
    ) {
        if b <= a {
            return;
        }
        let Some(traj) = noise else {
            *u = self.piece(b - a, drive, None) * &*u;
            return;
        };
        let dt = traj.dt();
        let eps = 1e-9 * dt;
        let mut t = a;
        while t < b - eps {
            let cell = ((t + eps) / dt).floor() as usize;
            let row = traj.row(cell);
            let mut next = cell + 1;
            let mut end = (next as f64 * dt).min(b);
            while end < b - eps && next < traj.n_cells() && traj.row(next) == row {
                next += 1;
                end = (next as f64 * dt).min(b);
            }
            if next >= traj.n_cells() {
                end = b;
            }
            let nd = self.noise_diagonal(row);
            *u = self.piece(end - t, drive, nd.as_ref()) * &*u;
            t = end;
        }
    }

    /// Propagator of `seq` starting at absolute time `t0` on the noise grid.
    pub fn unitary(&self, seq: &PulseSequence, t0: f64, noise: Option<&NoiseTrajectory>) -> CMatrix {
        let mut u = identity(self.sys.dim());
        let mut cache: HashMap<(u64, u64, u64), CMatrix> = HashMap::new();
        let mut t = t0;
        for event in seq.events() {
            match event {
                SequenceEvent::Delay { duration } if noise.is_none() => {
                    let piece = cache
                        .entry((duration.to_bits(), 0, u64::MAX))
                        .or_insert_with(|| self.piece(*duration, Drive::Free, None));
                    u = &*piece * u;
                }
                SequenceEvent::Delay { duration } => {
                    self.interval(t, t + duration, Drive::Free, noise, &mut u);
                }
                SequenceEvent::Pulse(p) if p.is_ideal() || self.ideal_pulses => {
                    let half = p.duration / 2.0;
                    self.interval(t, t + half, Drive::Free, noise, &mut u);
                    u = rotation(self.sys, p.flip_angle, p.phase).matrix * u;
                    self.interval(t + half, t + p.duration, Drive::Free, noise, &mut u);
                }
                SequenceEvent::Pulse(p) => {
                    let drive = Drive::Pulse {
                        rate: p.nutation_rate(),
                        phase: p.phase,
                    };
                    if noise.is_none() {
                        let key = (p.duration.to_bits(), p.phase.to_bits(), p.flip_angle.to_bits());
                        let piece = cache
                            .entry(key)
                            .or_insert_with(|| self.piece(p.duration, drive, None));
                        u = &*piece * u;
                    } else {
                        self.interval(t, t + p.duration, drive, noise, &mut u);
                    }
                }
            }
            t += event.duration();
        }
        u
    }
}

/// Evaluate `f` for every trajectory index, in parallel, returning results in
/// index order.
pub fn map_trajectories<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Ensemble mean of matrices, summed in index order when `deterministic`.
fn mean_matrix(items: Vec<CMatrix>, deterministic: bool) -> CMatrix {
    let n = items.len() as f64;
    let sum = if deterministic {
        let mut it = items.into_iter();
        let first = it.next().expect("at least one trajectory");
        it.fold(first, |acc, m| acc + m)
    } else {
        items
            .into_par_iter()
            .reduce_with(|a, b| a + b)
            .expect("at least one trajectory")
    };
    sum / C64::new(n, 0.0)
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

fn check_state(sys: &SpinSystem, rho: &State) -> Result<()> {
    if rho.rho.nrows() != sys.dim() || rho.rho.ncols() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho.rho.nrows(),
        });
    }
    Ok(())
}

/// Noise path for trajectory `stream` covering `total` seconds, or `None`
/// for a noiseless model.
pub fn trajectory_for(
    noise: &NoiseModel,
    total: f64,
    dt: f64,
    n_spins: usize,
    stream: u64,
) -> Result<Option<NoiseTrajectory>> {
    if noise.is_none() {
        return Ok(None);
    }
    sample_trajectory(noise, total.max(dt), dt, n_spins, stream).map(Some)
}

/// Ensemble-averaged `U ρ₀ U†` through `seq` under `H_Z (+ H_D) + noise`.
pub fn propagate(
    rho0: &State,
    seq: &PulseSequence,
    sys: &SpinSystem,
    noise: &NoiseModel,
    cfg: &PropagationConfig,
) -> Result<State> {
    check_state(sys, rho0)?;
    cfg.validate(noise)?;
    let evolver = Evolver::internal(sys, cfg.include_dipolar_during_dd, cfg.ideal_pulses);
    let n = cfg.trajectories(noise);
    let total = seq.total_duration();
    let results: Vec<Result<CMatrix>> = map_trajectories(n, |k| {
        let traj = trajectory_for(noise, total, cfg.dt, sys.n_spins(), k as u64)?;
        let u = evolver.unitary(seq, 0.0, traj.as_ref());
        Ok(conjugate(&u, &rho0.rho))
    });
    let mats = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(State {
        rho: mean_matrix(mats, cfg.deterministic),
        scale: rho0.scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalRow {
    pub time_s: f64,
    pub cycle_index: usize,
    /// `|⟨signal⟩|`, normalized to the value right after preparation.
    pub signal: f64,
    /// Signed ensemble mean, keeping the frame inversion of odd pulse counts.
    pub signed: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalTable {
    pub rows: Vec<SignalRow>,
}

impl SignalTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,cycle_index,signal,stderr\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.time_s, r.cycle_index, r.signal, r.stderr)
                .expect("writing to a String");
        }
        out
    }

    pub fn signals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.signal).collect()
    }
}

fn table_from_samples(times: &[f64], samples: &[Vec<f64>]) -> SignalTable {
    let rows = times
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let column: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            let est = Estimate::from_samples(&column);
            SignalRow {
                time_s: t,
                cycle_index: c,
                signal: est.mean.abs(),
                signed: est.mean,
                stderr: est.stderr,
            }
        })
        .collect();
    SignalTable { rows }
}

/// `(π/2)_y` applied to the thermal state, plus the detection operator and
/// its reference value.
fn sqc_start(sys: &SpinSystem) -> (CMatrix, CMatrix, f64) {
    let rho0 = thermal_state(sys).rho;
    let ry = rotation(sys, FRAC_PI_2, FRAC_PI_2).matrix;
    let start = conjugate(&ry, &rho0);
    let ix = total_op(sys, Axis::X).matrix;
    let reference = trace_product(&start, &ix).re;
    (start, ix, reference)
}

/// Single-quantum decoupling experiment: `(π/2)_y` on the thermal state, then
/// `scheme.cycles` decoupling blocks, reading `Tr(ρ I_x)` after each block.
///
/// [`crate::sequence::SchemeKind::None`] gives free evolution sampled at
/// multiples of the block duration.
pub fn sqc_dd_experiment(
    sys: &SpinSystem,
    scheme: &DDScheme,
    noise: &NoiseModel,
    cfg: &PropagationConfig,
) -> Result<SignalTable> {
    cfg.validate(noise)?;
    let block = gen_dd_block(scheme)?;
    let cycles = scheme.cycles.max(1);
    let period = block.total_duration();
    let (start, ix, reference) = sqc_start(sys);
    let evolver = Evolver::internal(sys, cfg.include_dipolar_during_dd, cfg.ideal_pulses);
    let noiseless_block = noise.is_none().then(|| evolver.unitary(&block, 0.0, None));
    let n = cfg.trajectories(noise);
    let samples: Vec<Result<Vec<f64>>> = map_trajectories(n, |k| {
        let traj = trajectory_for(noise, cycles as f64 * period, cfg.dt, sys.n_spins(), k as u64)?;
        let mut rho = start.clone();
        let mut out = Vec::with_capacity(cycles + 1);
        out.push(1.0);
        for c in 0..cycles {
            let u = match &noiseless_block {
                Some(u) => u.clone(),
                None => evolver.unitary(&block, c as f64 * period, traj.as_ref()),
            };
            rho = conjugate(&u, &rho);
            out.push(trace_product(&rho, &ix).re / reference);
        }
        Ok(out)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = (0..=cycles).map(|c| c as f64 * period).collect();
    Ok(table_from_samples(&times, &samples))
}

/// Free decay of the `(π/2)_y`-prepared state, read out at `times`.
pub fn sqc_free_decay(
    sys: &SpinSystem,
    noise: &NoiseModel,
    cfg: &PropagationConfig,
    times: &[f64],
) -> Result<SignalTable> {
    cfg.validate(noise)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("readout times must be non-negative and sorted".into()));
    }
    let (start, ix, reference) = sqc_start(sys);
    let evolver = Evolver::internal(sys, true, cfg.ideal_pulses);
    let end = times.last().copied().unwrap_or(0.0);
    let n = cfg.trajectories(noise);
    let samples: Vec<Result<Vec<f64>>> = map_trajectories(n, |k| {
        let traj = trajectory_for(noise, end, cfg.dt, sys.n_spins(), k as u64)?;
        let mut rho = start.clone();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &tr in times {
            let seg = PulseSequence::from_events(vec![SequenceEvent::Delay { duration: tr - t }]);
            rho = conjugate(&evolver.unitary(&seg, t, traj.as_ref()), &rho);
            t = tr;
            out.push(trace_product(&rho, &ix).re / reference);
        }
        Ok(out)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(table_from_samples(times, &samples))
}

/// Replace every pulse of `seq` by one of the same centre, phase and flip
/// angle but `factor` times the width.
pub fn rescale_pulse_widths(seq: &PulseSequence, factor: f64) -> PulseSequence {
    let mut events = Vec::with_capacity(seq.len());
    let mut pending = 0.0;
    for e in seq.events() {
        match e {
            SequenceEvent::Delay { duration } => pending += duration,
            SequenceEvent::Pulse(p) => {
                let slack = p.duration * (1.0 - factor) / 2.0;
                events.push(SequenceEvent::Delay { duration: pending + slack });
                let narrow = if p.is_ideal() {
                    *p
                } else {
                    Pulse::finite(p.duration * factor, p.phase, p.flip_angle)
                };
                events.push(SequenceEvent::Pulse(narrow));
                pending = slack;
            }
        }
    }
    events.push(SequenceEvent::Delay { duration: pending });
    PulseSequence::from_events(events)
}
