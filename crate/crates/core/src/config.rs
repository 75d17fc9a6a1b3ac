//! Experiment configuration documents (TOML) and the runners behind each
//! command-line subcommand.
//!
//! Keys carry their unit as a suffix (`_us`, `_khz`, `_krad_s`); everything
//! is converted to seconds and rad/s here and nowhere else. `_khz` values are
//! cyclic frequencies, so `couplings_khz = 1` means `D = 2π × 1 kHz`.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiment::{run_mqc, MqcConfig, PurgeMode};
use crate::filter::chi;
use crate::noise::NoiseModel;
use crate::propagate::{sqc_dd_experiment, PropagationConfig};
use crate::sequence::{gen_dd, DDScheme, SchemeKind, Timing};
use crate::spin::SpinSystem;

const KHZ: f64 = TAU * 1e3;
const KRAD_S: f64 = 1e3;

/// Parse a duration such as `2us`, `58.1 µs`, `5ms`, `1e-6s` or `3ns`.
pub fn parse_duration(text: &str) -> Result<f64> {
    let t = text.trim();
    let (num, exponent) = [("ms", -3), ("us", -6), ("µs", -6), ("ns", -9), ("s", 0)]
        .iter()
        .find_map(|&(unit, e)| t.strip_suffix(unit).map(|n| (n, e)))
        .ok_or_else(|| Error::InvalidParameter(format!("duration '{text}' needs a unit (s, ms, us, ns)")))?;
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad number in duration '{text}'")))?;
    Ok(shift(value, exponent))
}

/// `x · 10^exponent`, rounded once, so `4.3` µs is bit-identical to `4.3e-6`.
fn shift(x: f64, exponent: i32) -> f64 {
    format!("{x}e{exponent}").parse().expect("decimal f64 text")
}

fn micro(x: f64) -> f64 {
    shift(x, -6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sqc,
    Mqc,
    Filter,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Sqc => "sqc",
            Command::Mqc => "mqc",
            Command::Filter => "filter",
        })
    }
}

/// A fully resolved configuration in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub system: SpinSystem,
    pub scheme: Option<DDScheme>,
    pub noise: NoiseModel,
    pub propagation: PropagationConfig,
    pub mqc: Option<MqcConfig>,
    pub seed: u64,
}

/// Collects every problem in a document before reporting.
struct Reader<'a> {
    root: &'a Table,
    errors: Vec<String>,
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: BTreeSet<&'static str>,
}

impl<'a> Reader<'a> {
    fn section(&mut self, name: &'static str, required: bool) -> Section<'a> {
        let table = match self.root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("[{name}]: expected a table"));
                None
            }
            None => {
                if required {
                    self.errors.push(format!("[{name}]: missing section"));
                }
                None
            }
        };
        Section {
            name,
            table,
            used: BTreeSet::new(),
        }
    }

    fn raw(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<&'a Value> {
        s.used.insert(key);
        s.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, s: &mut Section<'a>, key: &'static str, required: bool) -> Option<f64> {
        match self.raw(s, key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(x)) => Some(*x as f64),
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected a number", s.name));
                None
            }
            None => {
                if required && s.table.is_some() {
                    self.errors.push(format!("{}.{key}: missing required key", s.name));
                }
                None
            }
        }
    }

    fn positive(&mut self, s: &mut Section<'a>, key: &'static str, required: bool) -> Option<f64> {
        let v = self.float(s, key, required)?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.errors.push(format!("{}.{key}: must be positive, got {v}", s.name));
            None
        }
    }

    fn non_negative(&mut self, s: &mut Section<'a>, key: &'static str, required: bool) -> Option<f64> {
        let v = self.float(s, key, required)?;
        if v >= 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.errors.push(format!("{}.{key}: must be ≥ 0, got {v}", s.name));
            None
        }
    }

    fn uint(&mut self, s: &mut Section<'a>, key: &'static str, required: bool) -> Option<u64> {
        match self.raw(s, key) {
            Some(Value::Integer(x)) if *x >= 0 => Some(*x as u64),
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected a non-negative integer", s.name));
                None
            }
            None => {
                if required && s.table.is_some() {
                    self.errors.push(format!("{}.{key}: missing required key", s.name));
                }
                None
            }
        }
    }

    fn boolean(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<bool> {
        match self.raw(s, key) {
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected true or false", s.name));
                None
            }
            None => None,
        }
    }

    fn string(&mut self, s: &mut Section<'a>, key: &'static str, required: bool) -> Option<&'a str> {
        match self.raw(s, key) {
            Some(Value::String(x)) => Some(x.as_str()),
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected a string", s.name));
                None
            }
            None => {
                if required && s.table.is_some() {
                    self.errors.push(format!("{}.{key}: missing required key", s.name));
                }
                None
            }
        }
    }

    fn floats(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<Vec<f64>> {
        let arr = match self.raw(s, key)? {
            Value::Array(a) => a,
            _ => {
                self.errors.push(format!("{}.{key}: expected an array of numbers", s.name));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(x) => out.push(*x as f64),
                _ => {
                    self.errors.push(format!("{}.{key}: expected an array of numbers", s.name));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn matrix(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<Vec<Vec<f64>>> {
        let rows = match self.raw(s, key)? {
            Value::Array(a) => a,
            _ => {
                self.errors.push(format!("{}.{key}: expected an array of rows", s.name));
                return None;
            }
        };
        let mut out = Vec::new();
        for row in rows {
            let Value::Array(r) = row else {
                self.errors.push(format!("{}.{key}: expected an array of rows", s.name));
                return None;
            };
            let mut vals = Vec::new();
            for v in r {
                match v {
                    Value::Float(x) => vals.push(*x),
                    Value::Integer(x) => vals.push(*x as f64),
                    _ => {
                        self.errors.push(format!("{}.{key}: entries must be numbers", s.name));
                        return None;
                    }
                }
            }
            out.push(vals);
        }
        Some(out)
    }

    fn finish(&mut self, s: Section<'a>) {
        if let Some(t) = s.table {
            for key in t.keys() {
                if !s.used.contains(key.as_str()) {
                    self.errors.push(format!("{}.{key}: unknown key", s.name));
                }
            }
        }
    }
}

fn read_system(r: &mut Reader<'_>, required: bool) -> Option<SpinSystem> {
    let mut s = r.section("system", required);
    if s.table.is_none() {
        return if required { None } else { SpinSystem::uncoupled(1).ok() };
    }
    let n = r.uint(&mut s, "n_spins", true);
    let explicit = r.matrix(&mut s, "couplings_khz");
    let max = r.non_negative(&mut s, "coupling_max_khz", false);
    let cseed = r.uint(&mut s, "coupling_seed", false);
    let offsets = r.floats(&mut s, "offsets_khz");
    r.finish(s);
    let n = n? as usize;
    let built = match (explicit, max) {
        (Some(_), Some(_)) => {
            r.errors
                .push("system: give either couplings_khz or coupling_max_khz, not both".into());
            return None;
        }
        (Some(rows), None) => {
            if rows.len() != n || rows.iter().any(|row| row.len() != n) {
                r.errors.push(format!("system.couplings_khz: expected a {n}×{n} matrix"));
                return None;
            }
            let d = DMatrix::from_fn(n, n, |i, j| rows[i][j] * KHZ);
            SpinSystem::new(vec![0.0; n], d)
        }
        (None, Some(max)) => SpinSystem::random_couplings(n, max * KHZ, cseed.unwrap_or(0)),
        (None, None) => SpinSystem::default_test(n),
    };
    let built = match offsets {
        Some(o) => built.and_then(|sys| sys.with_offsets(o.iter().map(|x| x * KHZ).collect())),
        None => built,
    };
    built.map_err(|e| r.errors.push(format!("system: {e}"))).ok()
}

fn read_scheme(r: &mut Reader<'_>, required: bool) -> Option<Option<DDScheme>> {
    let mut s = r.section("dd", required);
    if s.table.is_none() {
        return if required { None } else { Some(None) };
    }
    let kind = r.string(&mut s, "scheme", true);
    let n = r.uint(&mut s, "n", true);
    let tau = r.non_negative(&mut s, "tau_us", false);
    let total = r.positive(&mut s, "t_us", false);
    let tau_pi = r.positive(&mut s, "tau_pi_us", true);
    let cycles = r.uint(&mut s, "cycles", false).unwrap_or(1);
    r.finish(s);
    let kind = match kind.map(SchemeKind::from_str) {
        Some(Ok(k)) => Some(k),
        Some(Err(_)) => {
            r.errors.push(format!(
                "dd.scheme: expected one of none, cpmg, cpmgp, udd, uddp, rudd, ruddp; got '{}'",
                kind.unwrap_or_default()
            ));
            None
        }
        None => None,
    };
    let timing = match (tau, total) {
        (Some(t), None) => Some(Timing::HalfGap(micro(t))),
        (None, Some(t)) => Some(Timing::Total(micro(t))),
        _ => {
            r.errors.push("dd: give exactly one of tau_us and t_us".into());
            None
        }
    };
    if cycles < 1 {
        r.errors.push("dd.cycles: must be ≥ 1".into());
    }
    Some(Some(
        DDScheme::new(kind?, n? as usize, timing?, micro(tau_pi?)).with_cycles(cycles as usize),
    ))
}

fn read_noise(r: &mut Reader<'_>, seed: u64) -> Option<NoiseModel> {
    let mut s = r.section("noise", true);
    let kind = r.string(&mut s, "kind", true);
    let rms = r.non_negative(&mut s, "rms_krad_s", !matches!(kind, Some("none")));
    let tau_c = r.positive(&mut s, "tau_c_us", matches!(kind, Some("ou")));
    let cutoff = r.positive(&mut s, "omega_cutoff_krad_s", matches!(kind, Some("hard_cutoff")));
    let correlated = r.boolean(&mut s, "correlated").unwrap_or(false);
    r.finish(s);
    let model = match kind? {
        "none" => NoiseModel::none(),
        "static" => NoiseModel::static_gaussian(rms? * KRAD_S, seed),
        "ou" => NoiseModel::ornstein_uhlenbeck(rms? * KRAD_S, micro(tau_c?), seed),
        "hard_cutoff" => NoiseModel::hard_cutoff(rms? * KRAD_S, cutoff? * KRAD_S, seed),
        other => {
            r.errors.push(format!(
                "noise.kind: expected none, static, ou or hard_cutoff; got '{other}'"
            ));
            return None;
        }
    };
    Some(model.correlated(correlated))
}

fn read_run(r: &mut Reader<'_>) -> (Option<u64>, Option<PropagationConfig>) {
    let mut s = r.section("run", true);
    let seed = r.uint(&mut s, "seed", true);
    let n_traj = r.uint(&mut s, "n_traj", false).unwrap_or(1);
    let dt = r.positive(&mut s, "dt_us", true);
    let ideal = r.boolean(&mut s, "ideal_pulses").unwrap_or(false);
    let dipolar = r.boolean(&mut s, "include_dipolar_during_dd").unwrap_or(true);
    r.finish(s);
    if n_traj < 1 {
        r.errors.push("run.n_traj: must be ≥ 1".into());
    }
    let cfg = dt.map(|dt| PropagationConfig {
        n_traj: n_traj as usize,
        dt: micro(dt),
        ideal_pulses: ideal,
        include_dipolar_during_dd: dipolar,
        deterministic: true,
    });
    (seed, cfg)
}

fn read_mqc(
    r: &mut Reader<'_>,
    storage: Option<DDScheme>,
    propagation: Option<PropagationConfig>,
) -> Option<MqcConfig> {
    let mut s = r.section("mqc", true);
    let m = r.uint(&mut s, "m", true);
    let delta = r.non_negative(&mut s, "delta_us", true);
    let tau_pi2 = r.non_negative(&mut s, "tau_pi2_us", false).unwrap_or(0.0);
    let n_max = r.uint(&mut s, "n_max", true);
    let delta_omega = r.positive(&mut s, "delta_omega_khz", false);
    let dd_after_t1 = r.boolean(&mut s, "dd_after_t1").unwrap_or(false);
    let purge = r.string(&mut s, "purge", false).unwrap_or("projection");
    let t_r = r.positive(&mut s, "t_r_us", purge == "evolve");
    let purge_rms = r.non_negative(&mut s, "purge_rms_krad_s", purge == "evolve");
    let purge_n = r.uint(&mut s, "purge_n_traj", false).unwrap_or(64);
    r.finish(s);
    let purge = match purge {
        "projection" => Some(PurgeMode::Projection),
        "evolve" => match (t_r, purge_rms) {
            (Some(t), Some(b)) => Some(PurgeMode::Evolve {
                t_r: micro(t),
                rms: b * KRAD_S,
                n_traj: purge_n as usize,
                seed: 0,
            }),
            _ => None,
        },
        other => {
            r.errors.push(format!("mqc.purge: expected projection or evolve, got '{other}'"));
            None
        }
    };
    if m == Some(0) {
        r.errors.push("mqc.m: must be ≥ 1".into());
    }
    if n_max == Some(0) {
        r.errors.push("mqc.n_max: must be ≥ 1".into());
    }
    Some(MqcConfig {
        m: m? as usize,
        delta: micro(delta?),
        tau_pi2: micro(tau_pi2),
        n_max: n_max? as usize,
        delta_omega: delta_omega.map(|w| w * KHZ),
        storage,
        dd_after_t1,
        purge: purge?,
        propagation: propagation?,
    })
}

/// Parse and validate a configuration for `command`. `seed_override`
/// replaces `run.seed`. Every problem found is reported in one
/// [`Error::Config`].
pub fn parse_config(text: &str, command: Command, seed_override: Option<u64>) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader {
        root: &root,
        errors: Vec::new(),
    };
    for key in root.keys() {
        if !["system", "dd", "noise", "run", "mqc"].contains(&key.as_str()) {
            r.errors.push(format!("[{key}]: unknown section"));
        }
    }
    let (seed, propagation) = read_run(&mut r);
    let seed = seed_override.or(seed);
    let system = read_system(&mut r, command != Command::Filter);
    let scheme = read_scheme(&mut r, command != Command::Mqc);
    let noise = read_noise(&mut r, seed.unwrap_or(0));
    let mqc = if command == Command::Mqc {
        read_mqc(&mut r, scheme.flatten(), propagation)
    } else {
        None
    };
    if let (Some(noise), Some(p)) = (&noise, &propagation) {
        if let Err(e) = noise.validate() {
            r.errors.push(format!("noise: {e}"));
        } else if !noise.is_none() {
            if let Err(e) = noise.check_grid(p.dt) {
                r.errors.push(format!("run.dt_us: {e}"));
            }
        }
    }
    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    let missing = || Error::Config(vec!["incomplete configuration".into()]);
    Ok(RunConfig {
        command,
        system: system.ok_or_else(missing)?,
        scheme: scheme.ok_or_else(missing)?,
        noise: noise.ok_or_else(missing)?,
        propagation: propagation.ok_or_else(missing)?,
        mqc,
        seed: seed.ok_or_else(missing)?,
    })
}

/// Files produced by a run, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub files: Vec<(String, String)>,
}

impl RunConfig {
    /// Every resolved parameter, one `key = value` per line.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("writing to a String");
        line("command", self.command.to_string());
        line("seed", self.seed.to_string());
        line("system.n_spins", self.system.n_spins().to_string());
        line("system.offsets_rad_s", format!("{:?}", self.system.offsets()));
        line(
            "system.couplings_rad_s",
            format!(
                "{:?}",
                self.system.couplings().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()
            ),
        );
        match &self.scheme {
            Some(s) => {
                line("dd.scheme", s.kind.to_string());
                line("dd.n", s.n_pulses.to_string());
                line("dd.block_s", s.block_duration().to_string());
                line("dd.tau_pi_s", s.tau_pi.to_string());
                line("dd.cycles", s.cycles.to_string());
            }
            None => line("dd.scheme", "absent".into()),
        }
        line("noise", format!("{:?}", self.noise.kind));
        line("noise.rms_rad_s", self.noise.rms.to_string());
        line("noise.correlated", self.noise.correlated_across_spins.to_string());
        let p = &self.propagation;
        line("run.n_traj", p.trajectories(&self.noise).to_string());
        line("run.dt_s", p.dt.to_string());
        line("run.ideal_pulses", p.ideal_pulses.to_string());
        line("run.include_dipolar_during_dd", p.include_dipolar_during_dd.to_string());
        if let Some(m) = &self.mqc {
            line("mqc.m", m.m.to_string());
            line("mqc.delta_s", m.delta.to_string());
            line("mqc.tau_pi2_s", m.tau_pi2.to_string());
            line("mqc.n_max", m.n_max.to_string());
            line("mqc.delta_omega_rad_s", format!("{:?}", m.delta_omega));
            line("mqc.dd_after_t1", m.dd_after_t1.to_string());
            line("mqc.purge", format!("{:?}", m.purge));
        }
        out
    }

    pub fn run(&self) -> Result<Output> {
        match self.command {
            Command::Sqc => self.run_sqc(),
            Command::Mqc => self.run_mqc(),
            Command::Filter => self.run_filter(),
        }
    }

    fn scheme(&self) -> Result<&DDScheme> {
        self.scheme
            .as_ref()
            .ok_or_else(|| Error::Config(vec!["[dd]: missing section".into()]))
    }

    fn run_sqc(&self) -> Result<Output> {
        let table = sqc_dd_experiment(&self.system, self.scheme()?, &self.noise, &self.propagation)?;
        Ok(Output {
            files: vec![("signal.csv".into(), table.to_csv())],
        })
    }

    fn run_mqc(&self) -> Result<Output> {
        let cfg = self
            .mqc
            .as_ref()
            .ok_or_else(|| Error::Config(vec!["[mqc]: missing section".into()]))?;
        let result = run_mqc(&self.system, cfg, &self.noise)?;
        Ok(Output {
            files: vec![
                ("spectrum.csv".into(), result.spectrum_csv()),
                ("alpha_sweep.csv".into(), result.sweep_csv()),
            ],
        })
    }

    fn run_filter(&self) -> Result<Output> {
        let seq = gen_dd(self.scheme()?)?;
        let result = chi(&seq, &self.noise)?;
        Ok(Output {
            files: vec![
                ("filter.csv".into(), result.filter_csv()),
                ("summary.csv".into(), result.summary_csv()),
            ],
        })
    }
}
