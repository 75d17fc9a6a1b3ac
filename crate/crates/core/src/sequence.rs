//! Pulse-sequence generators: CPMG, UDD and RUDD decoupling trains (with and
//! without phase alternation) and the 8-pulse two-quantum excitation cycle.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A rotation about a transverse axis. `flip_angle` is stored explicitly so
/// ideal (zero-width) pulses are representable; for finite pulses
/// `flip_angle = 2π · amplitude_hz · duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub duration: f64,
    pub phase: f64,
    pub amplitude_hz: f64,
    pub flip_angle: f64,
}

impl Pulse {
    pub fn finite(duration: f64, phase: f64, flip_angle: f64) -> Self {
        Self {
            duration,
            phase,
            amplitude_hz: flip_angle / (TAU * duration),
            flip_angle,
        }
    }

    /// A π pulse of width `duration` at amplitude `1/(2·duration)`.
    pub fn pi(duration: f64, phase: f64) -> Self {
        Self {
            duration,
            phase,
            amplitude_hz: 1.0 / (2.0 * duration),
            flip_angle: PI,
        }
    }

    /// A δ pulse: zero width, infinite amplitude.
    pub fn ideal(phase: f64, flip_angle: f64) -> Self {
        Self {
            duration: 0.0,
            phase,
            amplitude_hz: f64::INFINITY,
            flip_angle,
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.duration == 0.0
    }

    /// Nutation rate `2π a` in rad/s.
    pub fn nutation_rate(&self) -> f64 {
        self.flip_angle / self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceEvent {
    Delay { duration: f64 },
    Pulse(Pulse),
}

impl SequenceEvent {
    pub fn duration(&self) -> f64 {
        match self {
            SequenceEvent::Delay { duration } => *duration,
            SequenceEvent::Pulse(p) => p.duration,
        }
    }
}

/// Time-ordered list of events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    events: Vec<SequenceEvent>,
    total: f64,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl PulseSequence {
    pub fn from_events(events: Vec<SequenceEvent>) -> Self {
        let total = compensated_sum(events.iter().map(SequenceEvent::duration));
        Self { events, total }
    }

    pub fn events(&self) -> &[SequenceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.total
    }

    pub fn pulses(&self) -> impl Iterator<Item = &Pulse> {
        self.events.iter().filter_map(|e| match e {
            SequenceEvent::Pulse(p) => Some(p),
            _ => None,
        })
    }

    pub fn pulse_count(&self) -> usize {
        self.pulses().count()
    }

    /// Centre time of every pulse, in order.
    pub fn pulse_centers(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut centers = Vec::new();
        for e in &self.events {
            if let SequenceEvent::Pulse(p) = e {
                centers.push(t + p.duration / 2.0);
            }
            t += e.duration();
        }
        centers
    }

    /// Concatenation of `self` and `other`.
    pub fn then(&self, other: &PulseSequence) -> PulseSequence {
        let mut events = self.events.clone();
        events.extend_from_slice(&other.events);
        PulseSequence::from_events(events)
    }

    pub fn repeat(&self, times: usize) -> PulseSequence {
        let mut events = Vec::with_capacity(self.events.len() * times);
        for _ in 0..times {
            events.extend_from_slice(&self.events);
        }
        PulseSequence::from_events(events)
    }

    /// Line-oriented dump: `kind duration_s phase_rad amplitude_hz`, one event
    /// per line, with `#` comment lines for the header and totals.
    pub fn to_dump(&self) -> String {
        let mut out = String::from("# kind duration_s phase_rad amplitude_hz\n");
        for e in &self.events {
            match e {
                SequenceEvent::Delay { duration } => writeln!(out, "delay {duration} 0 0"),
                SequenceEvent::Pulse(p) => writeln!(
                    out,
                    "pulse {} {} {}",
                    p.duration, p.phase, p.amplitude_hz
                ),
            }
            .expect("writing to a String");
        }
        writeln!(out, "# events {} total_s {}", self.events.len(), self.total)
            .expect("writing to a String");
        out
    }

    pub fn from_dump(text: &str) -> Result<PulseSequence> {
        let mut events = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| Error::Dump {
                line: idx + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err("expected 4 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
            let (duration, phase, amplitude) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
            if !(duration >= 0.0) {
                return Err(err("negative duration"));
            }
            events.push(match fields[0] {
                "delay" => SequenceEvent::Delay { duration },
                "pulse" => {
                    let flip = if duration == 0.0 { PI } else { TAU * amplitude * duration };
                    SequenceEvent::Pulse(Pulse {
                        duration,
                        phase,
                        amplitude_hz: amplitude,
                        flip_angle: flip,
                    })
                }
                _ => return Err(err("unknown event kind")),
            });
        }
        Ok(PulseSequence::from_events(events))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    None,
    Cpmg,
    CpmgP,
    Udd,
    UddP,
    Rudd,
    RuddP,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::None,
        SchemeKind::Cpmg,
        SchemeKind::CpmgP,
        SchemeKind::Udd,
        SchemeKind::UddP,
        SchemeKind::Rudd,
        SchemeKind::RuddP,
    ];

    /// Phase-alternating (`p`) variant: pulses alternate +x, −x starting at +x.
    pub fn alternating(self) -> bool {
        matches!(self, SchemeKind::CpmgP | SchemeKind::UddP | SchemeKind::RuddP)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::None => "none",
            SchemeKind::Cpmg => "cpmg",
            SchemeKind::CpmgP => "cpmgp",
            SchemeKind::Udd => "udd",
            SchemeKind::UddP => "uddp",
            SchemeKind::Rudd => "rudd",
            SchemeKind::RuddP => "ruddp",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidScheme(s.to_string()))
    }
}

/// How a block's length is specified: CPMG half-gap `τ` (with
/// `T = N(2τ + τ_π)`) or the total block duration `T` directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    HalfGap(f64),
    Total(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DDScheme {
    pub kind: SchemeKind,
    pub n_pulses: usize,
    pub timing: Timing,
    /// Reference π-pulse width.
    pub tau_pi: f64,
    pub cycles: usize,
}

impl DDScheme {
    pub fn new(kind: SchemeKind, n_pulses: usize, timing: Timing, tau_pi: f64) -> Self {
        Self {
            kind,
            n_pulses,
            timing,
            tau_pi,
            cycles: 1,
        }
    }

    pub fn with_cycles(mut self, cycles: usize) -> Self {
        self.cycles = cycles;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses < 1 {
            return Err(Error::InvalidParameter("pulse count N must be ≥ 1".into()));
        }
        if !(self.tau_pi > 0.0) {
            return Err(Error::InvalidParameter("π-pulse width must be > 0".into()));
        }
        if self.cycles < 1 {
            return Err(Error::InvalidParameter("cycle count must be ≥ 1".into()));
        }
        match self.timing {
            Timing::HalfGap(t) if !(t >= 0.0) => {
                Err(Error::InvalidParameter(format!("half-gap τ must be ≥ 0, got {t:e}")))
            }
            Timing::Total(t) if !(t > 0.0) => Err(Error::NonPositiveDuration(t)),
            _ => Ok(()),
        }
    }

    /// Duration of one block.
    pub fn block_duration(&self) -> f64 {
        match self.timing {
            Timing::Total(t) => t,
            Timing::HalfGap(tau) => self.n_pulses as f64 * (2.0 * tau + self.tau_pi),
        }
    }

    fn phase(&self, j: usize) -> f64 {
        if self.kind.alternating() && j % 2 == 1 {
            PI
        } else {
            0.0
        }
    }
}

/// Any delay below this fraction of the block length is rounding noise.
const DELAY_SLACK: f64 = 1e-13;

fn checked_delay(index: usize, delay: f64, total: f64) -> Result<f64> {
    if delay >= 0.0 {
        Ok(delay)
    } else if delay > -DELAY_SLACK * total {
        Ok(0.0)
    } else {
        Err(Error::NegativeDelay {
            index,
            delay_s: delay,
        })
    }
}

/// CPMG / CPMGp: `N × [τ, π_φ, τ]`.
pub fn gen_cpmg(scheme: &DDScheme) -> Result<PulseSequence> {
    if !matches!(scheme.kind, SchemeKind::Cpmg | SchemeKind::CpmgP) {
        return Err(Error::InvalidScheme(format!("{} is not a CPMG scheme", scheme.kind)));
    }
    scheme.validate()?;
    let n = scheme.n_pulses;
    let total = scheme.block_duration();
    let tau = match scheme.timing {
        Timing::HalfGap(tau) => tau,
        Timing::Total(t) => checked_delay(1, (t / n as f64 - scheme.tau_pi) / 2.0, t)?,
    };
    let mut events = Vec::with_capacity(3 * n);
    for j in 0..n {
        events.push(SequenceEvent::Delay { duration: tau });
        events.push(SequenceEvent::Pulse(Pulse::pi(scheme.tau_pi, scheme.phase(j))));
        events.push(SequenceEvent::Delay { duration: tau });
    }
    let seq = PulseSequence::from_events(events);
    debug_assert!((seq.total_duration() - total).abs() <= 1e-12 * total);
    Ok(seq)
}

/// Uhrig instants `t_j = T sin²(π j / (2N + 2))`, `j = 1..N`.
///
/// The upper half is filled as `T − t_{N+1−j}` so the list is exactly
/// symmetric about `T/2`.
pub fn udd_instants(n: usize, total: f64) -> Vec<f64> {
    let raw = |j: usize| total * (PI * j as f64 / (2 * n + 2) as f64).sin().powi(2);
    let mut t = vec![0.0; n];
    for j in 1..=n {
        let mirror = n + 1 - j;
        t[j - 1] = if 2 * j <= n + 1 { raw(j) } else { total - raw(mirror) };
    }
    if n % 2 == 1 {
        t[n / 2] = total / 2.0;
    }
    t
}

/// UDD / UDDp with fixed pulse width `τ_π` centred on the Uhrig instants.
pub fn gen_udd(scheme: &DDScheme) -> Result<PulseSequence> {
    if !matches!(scheme.kind, SchemeKind::Udd | SchemeKind::UddP) {
        return Err(Error::InvalidScheme(format!("{} is not a UDD scheme", scheme.kind)));
    }
    scheme.validate()?;
    let n = scheme.n_pulses;
    let total = scheme.block_duration();
    let tp = scheme.tau_pi;
    let t = udd_instants(n, total);
    let edge = checked_delay(1, t[0] - tp / 2.0, total)?;
    let mut events = Vec::with_capacity(2 * n + 1);
    events.push(SequenceEvent::Delay { duration: edge });
    for j in 1..=n {
        events.push(SequenceEvent::Pulse(Pulse::pi(tp, scheme.phase(j - 1))));
        let gap = if j < n {
            checked_delay(j + 1, t[j] - t[j - 1] - tp, total)?
        } else {
            edge
        };
        events.push(SequenceEvent::Delay { duration: gap });
    }
    Ok(PulseSequence::from_events(events))
}

/// RUDD width parameter: `sin θ_p = τ_π / (T sin(π/(N+1)))`.
pub fn rudd_theta(n: usize, total: f64, tau_pi: f64) -> Result<f64> {
    if n < 1 || !(total > 0.0) || !(tau_pi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "RUDD needs N ≥ 1, T > 0, τ_π > 0 (got N={n}, T={total:e}, τ_π={tau_pi:e})"
        )));
    }
    let s = tau_pi / (total * (PI / (n + 1) as f64).sin());
    if s > 1.0 {
        return Err(Error::Unrealizable(format!(
            "sin θ_p = {s} exceeds 1: τ_π too long for N={n}, T={total:e} s"
        )));
    }
    Ok(s.asin())
}

/// RUDD pulse widths `τ_π^j = T sin(π j/(N+1)) sin θ_p`, with the outermost
/// pair pinned to `τ_π` and the profile mirrored so it is exactly symmetric.
pub fn rudd_widths(n: usize, total: f64, tau_pi: f64) -> Result<Vec<f64>> {
    let sin_theta = rudd_theta(n, total, tau_pi)?.sin();
    Ok((1..=n)
        .map(|j| {
            let k = j.min(n + 1 - j);
            if k == 1 {
                tau_pi
            } else {
                total * (PI * k as f64 / (n + 1) as f64).sin() * sin_theta
            }
        })
        .collect())
}

/// RUDD / RUDDp: Uhrig centres, widths from [`rudd_widths`], every amplitude
/// calibrated to a π flip.
pub fn gen_rudd(scheme: &DDScheme) -> Result<PulseSequence> {
    if !matches!(scheme.kind, SchemeKind::Rudd | SchemeKind::RuddP) {
        return Err(Error::InvalidScheme(format!("{} is not a RUDD scheme", scheme.kind)));
    }
    scheme.validate()?;
    let n = scheme.n_pulses;
    let total = scheme.block_duration();
    let widths = rudd_widths(n, total, scheme.tau_pi)?;
    let t = udd_instants(n, total);
    let edge = checked_delay(1, t[0] - scheme.tau_pi / 2.0, total)?;
    let mut events = Vec::with_capacity(2 * n + 1);
    events.push(SequenceEvent::Delay { duration: edge });
    for j in 1..=n {
        events.push(SequenceEvent::Pulse(Pulse::pi(widths[j - 1], scheme.phase(j - 1))));
        let gap = if j < n {
            checked_delay(
                j + 1,
                t[j] - t[j - 1] - widths[j] / 2.0 - widths[j - 1] / 2.0,
                total,
            )?
        } else {
            edge
        };
        events.push(SequenceEvent::Delay { duration: gap });
    }
    Ok(PulseSequence::from_events(events))
}

/// One decoupling block of `scheme` (a bare delay for [`SchemeKind::None`]).
pub fn gen_dd_block(scheme: &DDScheme) -> Result<PulseSequence> {
    match scheme.kind {
        SchemeKind::None => {
            let t = scheme.block_duration();
            if !(t >= 0.0) {
                return Err(Error::NonPositiveDuration(t));
            }
            Ok(PulseSequence::from_events(vec![SequenceEvent::Delay { duration: t }]))
        }
        SchemeKind::Cpmg | SchemeKind::CpmgP => gen_cpmg(scheme),
        SchemeKind::Udd | SchemeKind::UddP => gen_udd(scheme),
        SchemeKind::Rudd | SchemeKind::RuddP => gen_rudd(scheme),
    }
}

/// `scheme.cycles` concatenated blocks.
pub fn gen_dd(scheme: &DDScheme) -> Result<PulseSequence> {
    if scheme.cycles < 1 {
        return Err(Error::InvalidParameter("cycle count must be ≥ 1".into()));
    }
    Ok(gen_dd_block(scheme)?.repeat(scheme.cycles))
}

/// `m` repetitions of the 8-pulse two-quantum cycle
///
/// ```text
/// Δ/2 P Δ' P Δ P̄ Δ' P̄ Δ P̄ Δ' P̄ Δ P Δ' P Δ/2      Δ' = 2Δ + τ_{π/2}
/// ```
///
/// with `P` a π/2 pulse at phase `π/2 + α` and `P̄` at `3π/2 + α`. With ideal
/// pulses (`tau_pi2 = 0`) the zeroth-order average of the secular dipolar
/// Hamiltonian over one cycle is `Σ (D_ij/2)(I_+I_+ + I_-I_-)` rotated by
/// `exp(-iα I_z)`, so `α = π/2` gives its negative.
pub fn gen_mqc_cycle(delta: f64, tau_pi2: f64, alpha: f64, m: usize) -> Result<PulseSequence> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("Δ must be ≥ 0, got {delta:e}")));
    }
    if !(tau_pi2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("τ_π/2 must be ≥ 0, got {tau_pi2:e}")));
    }
    if m < 1 {
        return Err(Error::InvalidParameter("cycle count m must be ≥ 1".into()));
    }
    let phase = (FRAC_PI_2 + alpha).rem_euclid(TAU);
    let phase_bar = (FRAC_PI_2 + PI + alpha).rem_euclid(TAU);
    let pulse = |ph: f64| {
        SequenceEvent::Pulse(if tau_pi2 == 0.0 {
            Pulse::ideal(ph, FRAC_PI_2)
        } else {
            Pulse::finite(tau_pi2, ph, FRAC_PI_2)
        })
    };
    let delay = |d: f64| SequenceEvent::Delay { duration: d };
    let wide = 2.0 * delta + tau_pi2;
    let pattern = [phase, phase, phase_bar, phase_bar, phase_bar, phase_bar, phase, phase];
    let mut cycle = vec![delay(delta / 2.0)];
    for (k, &ph) in pattern.iter().enumerate() {
        cycle.push(pulse(ph));
        let gap = match k {
            7 => delta / 2.0,
            k if k % 2 == 0 => wide,
            _ => delta,
        };
        cycle.push(delay(gap));
    }
    Ok(PulseSequence::from_events(cycle).repeat(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: f64 = 1e-6;

    fn delays(seq: &PulseSequence) -> Vec<f64> {
        seq.events()
            .iter()
            .filter_map(|e| match e {
                SequenceEvent::Delay { duration } => Some(*duration),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn cpmg_examples() {
        let s = DDScheme::new(SchemeKind::Cpmg, 7, Timing::HalfGap(2.0 * US), 4.3 * US);
        let seq = gen_cpmg(&s).unwrap();
        assert!((seq.total_duration() - 58.1 * US).abs() < 1e-12 * 58.1 * US);
        assert_eq!(seq.pulse_count(), 7);

        let one = gen_cpmg(&DDScheme::new(SchemeKind::Cpmg, 1, Timing::HalfGap(2.0 * US), 4.3 * US))
            .unwrap();
        assert_eq!(one.len(), 3);
        assert!(matches!(one.events()[1], SequenceEvent::Pulse(p) if p.phase == 0.0));
        assert!((one.total_duration() - 8.3 * US).abs() < 1e-20);

        let alt = gen_cpmg(&DDScheme::new(SchemeKind::CpmgP, 4, Timing::HalfGap(2.0 * US), 4.3 * US))
            .unwrap();
        let phases: Vec<f64> = alt.pulses().map(|p| p.phase).collect();
        assert_eq!(phases, vec![0.0, PI, 0.0, PI]);
        assert!(alt.pulses().all(|p| p.flip_angle == PI && p.amplitude_hz == 1.0 / (2.0 * 4.3 * US)));
    }

    #[test]
    fn cpmg_total_timing_round_trips() {
        let by_tau = gen_cpmg(&DDScheme::new(SchemeKind::Cpmg, 7, Timing::HalfGap(2.0 * US), 4.3 * US))
            .unwrap();
        let by_total = gen_cpmg(&DDScheme::new(SchemeKind::Cpmg, 7, Timing::Total(by_tau.total_duration()), 4.3 * US))
            .unwrap();
        for (a, b) in by_tau.events().iter().zip(by_total.events()) {
            assert!((a.duration() - b.duration()).abs() < 1e-18);
        }
        let too_short = DDScheme::new(SchemeKind::Cpmg, 7, Timing::Total(20.0 * US), 4.3 * US);
        assert!(matches!(gen_cpmg(&too_short), Err(Error::NegativeDelay { .. })));
    }

    #[test]
    fn wrong_generator_is_rejected() {
        let s = DDScheme::new(SchemeKind::Udd, 3, Timing::Total(50.0 * US), 1.0 * US);
        assert!(matches!(gen_cpmg(&s), Err(Error::InvalidScheme(_))));
        assert!(matches!(gen_rudd(&s), Err(Error::InvalidScheme(_))));
        assert!("xy4".parse::<SchemeKind>().is_err());
        assert_eq!("RUDDp".parse::<SchemeKind>().unwrap(), SchemeKind::RuddP);
    }

    #[test]
    fn udd_instant_examples() {
        let t = 10.0;
        assert_eq!(udd_instants(1, t), vec![5.0]);
        let two = udd_instants(2, t);
        assert!((two[0] - 2.5).abs() < 1e-14 && (two[1] - 7.5).abs() < 1e-14);
        let seven = udd_instants(7, t);
        for j in 0..7 {
            assert!((seven[j] + seven[6 - j] - t).abs() < 1e-15);
            assert!(j == 0 || seven[j] > seven[j - 1]);
        }
    }

    #[test]
    fn udd_seven_pulse_regime() {
        let ok = DDScheme::new(SchemeKind::Udd, 7, Timing::Total(58.1 * US), 4.3 * US);
        let seq = gen_udd(&ok).unwrap();
        assert!(delays(&seq).iter().all(|&d| d >= 0.0));
        assert!((seq.total_duration() - 58.1 * US).abs() < 1e-15 * 58.1 * US);

        let eight = DDScheme::new(SchemeKind::Udd, 8, Timing::Total(8.0 * (4.0 + 4.3) * US), 4.3 * US);
        assert!(matches!(gen_udd(&eight), Err(Error::NegativeDelay { index: 1, .. })));
    }

    #[test]
    fn udd_gaps_approach_instant_differences() {
        let total = 1.0;
        let s = DDScheme::new(SchemeKind::Udd, 5, Timing::Total(total), 1e-12);
        let seq = gen_udd(&s).unwrap();
        let t = udd_instants(5, total);
        let d = delays(&seq);
        assert!((d[0] - t[0]).abs() < 1e-11);
        for j in 1..5 {
            assert!((d[j] - (t[j] - t[j - 1])).abs() < 1e-11);
        }
    }

    #[test]
    fn rudd_theta_examples() {
        let total = 58.1 * US;
        let tp = 4.3 * US;
        let theta = rudd_theta(7, total, tp).unwrap();
        assert!((theta.sin() - 0.1934).abs() < 5e-5);
        let boundary = total * (PI / 8.0).sin();
        assert_eq!(rudd_theta(7, total, boundary).unwrap(), FRAC_PI_2);
        assert!(matches!(rudd_theta(7, total, 1.01 * boundary), Err(Error::Unrealizable(_))));
    }

    #[test]
    fn rudd_seven_pulse_regime() {
        let s = DDScheme::new(SchemeKind::Rudd, 7, Timing::Total(58.1 * US), 4.3 * US);
        let seq = gen_rudd(&s).unwrap();
        let widths: Vec<f64> = seq.pulses().map(|p| p.duration).collect();
        assert_eq!(widths[0], 4.3 * US);
        assert_eq!(widths[6], 4.3 * US);
        assert!((widths[3] - 11.24 * US).abs() < 0.01 * US);
        for j in 0..7 {
            assert_eq!(widths[j], widths[6 - j]);
        }
        for p in seq.pulses() {
            assert_eq!(p.flip_angle, PI);
            assert!((TAU * p.amplitude_hz * p.duration - PI).abs() < 4.0 * f64::EPSILON);
        }
        assert!(delays(&seq).iter().all(|&d| d >= 0.0));
        let eight = DDScheme::new(SchemeKind::RuddP, 8, Timing::Total(8.0 * (4.0 + 4.3) * US), 4.3 * US);
        assert!(matches!(gen_rudd(&eight), Err(Error::NegativeDelay { .. })));
    }

    #[test]
    fn mqc_cycle_layout() {
        let one = gen_mqc_cycle(2.0 * US, 2.15 * US, 0.0, 1).unwrap();
        assert_eq!(one.pulse_count(), 8);
        assert!((one.total_duration() - 12.0 * (2.0 + 2.15) * US).abs() < 1e-18);
        let two = gen_mqc_cycle(2.0 * US, 2.15 * US, 0.0, 2).unwrap();
        assert!((two.total_duration() - 2.0 * one.total_duration()).abs() < 1e-18);
        let ideal = gen_mqc_cycle(2.0 * US, 0.0, 0.3, 1).unwrap();
        assert!(ideal.pulses().all(|p| p.is_ideal() && p.flip_angle == FRAC_PI_2));
        assert!((ideal.pulses().next().unwrap().phase - (FRAC_PI_2 + 0.3)).abs() < 1e-15);
        assert!(gen_mqc_cycle(-1.0, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let seq = gen_rudd(&DDScheme::new(SchemeKind::RuddP, 7, Timing::Total(58.1 * US), 4.3 * US))
            .unwrap();
        let text = seq.to_dump();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 15);
        let back = PulseSequence::from_dump(&text).unwrap();
        assert_eq!(back.len(), seq.len());
        for (a, b) in back.events().iter().zip(seq.events()) {
            assert_eq!(a.duration(), b.duration());
        }
        assert!(matches!(PulseSequence::from_dump("pulse 1 2"), Err(Error::Dump { line: 1, .. })));
    }
}
