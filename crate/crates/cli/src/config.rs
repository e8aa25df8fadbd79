//! Experiment configuration: flat `key = value` text with dotted sections.
//!
//! ```text
//! # comments start with '#'
//! experiment = activation
//! seed = 42
//! device.qth_slope = 1e-14
//! activation.v_in = 0.5:2.0:16
//! ```
//!
//! Values are plain SI numbers without unit suffixes. Grids are either a comma
//! list (`0.5, 1.0, 1.5`) or `start:stop:count` for evenly spaced points.
//! Unknown keys and duplicate keys are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pfpwm_core::calibration::default_tau_grid;
use pfpwm_core::{
    ClockSpec, Nonlinearity, PfDeviceParams, SawtoothSpec, SigmoidPolarity, SimConfig,
};

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    IvSweep,
    Transient,
    Activation,
    CompareRef,
    Calibrate,
    Infer,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::IvSweep => "iv-sweep",
            ExperimentKind::Transient => "transient",
            ExperimentKind::Activation => "activation",
            ExperimentKind::CompareRef => "compare-ref",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Infer => "infer",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "iv-sweep" => ExperimentKind::IvSweep,
            "transient" => ExperimentKind::Transient,
            "activation" => ExperimentKind::Activation,
            "compare-ref" => ExperimentKind::CompareRef,
            "calibrate" => ExperimentKind::Calibrate,
            "infer" => ExperimentKind::Infer,
            other => {
                return Err(RunError::config(format!(
                    "unknown experiment '{other}' (expected iv-sweep, transient, activation, \
                     compare-ref, calibrate or infer)"
                )))
            }
        })
    }
}

/// Quasi-static gate-1 sweeps, one per gate-2 bias.
#[derive(Debug, Clone, PartialEq)]
pub struct IvBlock {
    pub v_g2: Vec<f64>,
    pub v_g1: Vec<f64>,
    /// Leak time for the DC latch condition. Falls back to a finite
    /// `device.tau_leak`, then to 1 ms.
    pub tau_leak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientBlock {
    /// One run per value.
    pub v_g2: Vec<f64>,
    /// When set, a single run with this piecewise-constant gate-2 input.
    pub segments: Option<Vec<(f64, f64)>>,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBlock {
    pub v_in: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareBlock {
    pub sawtooth: SawtoothSpec,
    pub v_in: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateBlock {
    /// Measured `v_in_V,t_on_s` file. Synthetic data is generated when absent.
    pub data: Option<PathBuf>,
    pub points: usize,
    pub v_min: f64,
    pub v_max: f64,
    /// Relative standard deviation of multiplicative Gaussian noise.
    pub noise: f64,
    /// Leak time used to synthesize data.
    pub tau_true: f64,
    pub tau_grid: Vec<f64>,
    /// Known injection current for resolving absolute threshold coefficients.
    pub i_dn: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferBlock {
    /// One conductance matrix CSV per layer. Random layers when empty.
    pub weights: Vec<PathBuf>,
    /// Layer widths for random layers, e.g. `4,4,2`.
    pub layers: Vec<usize>,
    pub g_max: f64,
    /// Network input volts. Random when absent.
    pub input: Option<Vec<f64>>,
    pub v_read: f64,
    pub nonlinearity: Nonlinearity,
    pub polarity: SigmoidPolarity,
    pub v_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub device: PfDeviceParams,
    pub clock: ClockSpec,
    pub sim: SimConfig,
    pub v_a: f64,
    pub v_c: f64,
    pub iv: IvBlock,
    pub transient: TransientBlock,
    pub activation: ActivationBlock,
    pub compare: CompareBlock,
    pub calibrate: CalibrateBlock,
    pub infer: InferBlock,
    /// Every key as written in the file, for echoing into summaries.
    pub echo: BTreeMap<String, String>,
}

struct Fields<'a> {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
    base_dir: &'a Path,
}

impl Fields<'_> {
    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_owned());
        self.map.get(key).cloned()
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            Some(v) => parse_value(key, &v),
            None => Ok(default),
        }
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|v| parse_value(key, &v)).transpose()
    }

    fn grid(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.raw(key) {
            Some(v) => parse_grid(key, &v),
            None => Ok(default),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let items = split_list(&v);
        if items.is_empty() {
            return Err(RunError::config(format!("{key}: empty list")));
        }
        items
            .iter()
            .map(|s| parse_value(key, s))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn path(&self, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn finish(self) -> Result<()> {
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(RunError::config(format!(
                "unknown keys: {}",
                unknown.join(", ")
            )))
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| RunError::config(format!("{key}: cannot parse '{raw}'")))
}

fn split_list(raw: &str) -> Vec<&str> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses `a, b, c` or `start:stop:count`.
pub fn parse_grid(key: &str, raw: &str) -> Result<Vec<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(RunError::config(format!("{key}: empty sweep grid")));
    }
    if raw.contains(':') {
        let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(RunError::config(format!(
                "{key}: range must be start:stop:count"
            )));
        };
        let start: f64 = parse_value(key, start)?;
        let stop: f64 = parse_value(key, stop)?;
        let count: usize = parse_value(key, count)?;
        return Ok(match count {
            0 => return Err(RunError::config(format!("{key}: empty sweep grid"))),
            1 => vec![start],
            n => (0..n)
                .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                .collect(),
        });
    }
    let items = split_list(raw);
    if items.is_empty() {
        return Err(RunError::config(format!("{key}: empty sweep grid")));
    }
    items.iter().map(|s| parse_value(key, s)).collect()
}

fn parse_polarity(key: &str, raw: &str) -> Result<SigmoidPolarity> {
    match raw.trim() {
        "ascending" => Ok(SigmoidPolarity::Ascending),
        "descending" => Ok(SigmoidPolarity::Descending),
        other => Err(RunError::config(format!(
            "{key}: expected ascending or descending, got '{other}'"
        ))),
    }
}

/// Splits text into `key -> value`, rejecting malformed and duplicate lines.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(RunError::config(format!(
                "line {}: expected key = value",
                lineno + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(RunError::config(format!("line {}: empty key", lineno + 1)));
        }
        if map
            .insert(key.to_owned(), value.trim().to_owned())
            .is_some()
        {
            return Err(RunError::config(format!("duplicate key '{key}'")));
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text. Relative file paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let echo = parse_pairs(text)?;
        let mut f = Fields {
            map: echo.clone(),
            used: BTreeSet::new(),
            base_dir,
        };

        let kind: ExperimentKind = f
            .raw("experiment")
            .ok_or_else(|| RunError::config("missing key 'experiment'"))?
            .parse()?;
        let seed = f.parse("seed", 0u64)?;

        let d = PfDeviceParams::default();
        let device = PfDeviceParams {
            qth_slope: f.parse("device.qth_slope", d.qth_slope)?,
            qth_offset: f.parse("device.qth_offset", d.qth_offset)?,
            vg2_valid: (
                f.parse("device.vg2_min", d.vg2_valid.0)?,
                f.parse("device.vg2_max", d.vg2_valid.1)?,
            ),
            inj_i0: f.parse("device.inj_i0", d.inj_i0)?,
            inj_vref: f.parse("device.inj_vref", d.inj_vref)?,
            inj_ss: f.parse("device.inj_ss", d.inj_ss)?,
            tau_leak: f.parse("device.tau_leak", d.tau_leak)?,
            i_off: f.parse("device.i_off", d.i_off)?,
            diode_is: f.parse("device.diode_is", d.diode_is)?,
            diode_n: f.parse("device.diode_n", d.diode_n)?,
            thermal_v: f.parse("device.thermal_v", d.thermal_v)?,
        };

        let c = ClockSpec::default();
        let clock = ClockSpec {
            f_clk: f.parse("clock.f_clk", c.f_clk)?,
            v_high: f.parse("clock.v_high", c.v_high)?,
            v_low: f.parse("clock.v_low", c.v_low)?,
            duty: f.parse("clock.duty", c.duty)?,
        };

        let s = SimConfig::default();
        let sim = SimConfig {
            dt: f.parse("sim.dt", s.dt)?,
            t_tol: f.parse("sim.t_tol", s.t_tol)?,
            sample_stride: f.parse("sim.sample_stride", s.sample_stride)?,
            i_compliance: f.parse("sim.i_compliance", s.i_compliance)?,
        };
        let v_a = f.parse("bias.v_a", 1.0)?;
        let v_c = f.parse("bias.v_c", 0.0)?;

        let iv = IvBlock {
            v_g2: f.grid("iv.v_g2", vec![0.5, 1.0, 1.5, 2.0])?,
            v_g1: f.grid("iv.v_g1", parse_grid("iv.v_g1", "0:0.6:121")?)?,
            tau_leak: f.opt("iv.tau_leak")?,
        };

        let segments = match f.raw("transient.v_g2_segments") {
            None => None,
            Some(raw) => Some(
                split_list(&raw)
                    .iter()
                    .map(|seg| {
                        let (t, v) = seg.split_once(':').ok_or_else(|| {
                            RunError::config(format!(
                                "transient.v_g2_segments: '{seg}' is not start:value"
                            ))
                        })?;
                        Ok((
                            parse_value("transient.v_g2_segments", t)?,
                            parse_value("transient.v_g2_segments", v)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let transient = TransientBlock {
            v_g2: f.grid("transient.v_g2", vec![0.5, 1.0, 1.5, 2.0])?,
            segments,
            cycles: f.parse("transient.cycles", 2usize)?,
        };

        let activation = ActivationBlock {
            v_in: f.grid(
                "activation.v_in",
                parse_grid("activation.v_in", "0.5:2.0:16")?,
            )?,
        };

        let st = SawtoothSpec::default();
        let compare = CompareBlock {
            sawtooth: SawtoothSpec {
                i_pullup: f.parse("compare.i_pullup", st.i_pullup)?,
                c_saw: f.parse("compare.c_saw", st.c_saw)?,
                v_dd: f.parse("compare.v_dd", st.v_dd)?,
                f_clk: clock.f_clk,
                duty: clock.duty,
            },
            v_in: f.grid(
                "compare.v_in",
                parse_grid("compare.v_in", "-0.25:1.25:151")?,
            )?,
        };

        let calibrate = CalibrateBlock {
            data: f.raw("calibrate.data").map(|p| f.path(&p)),
            points: f.parse("calibrate.points", 500usize)?,
            v_min: f.parse("calibrate.v_min", 0.5)?,
            v_max: f.parse("calibrate.v_max", 2.0)?,
            noise: f.parse("calibrate.noise", 0.0)?,
            tau_true: f.parse("calibrate.tau_true", f64::INFINITY)?,
            tau_grid: f.grid("calibrate.tau_grid", default_tau_grid())?,
            i_dn: f.opt("calibrate.i_dn")?,
        };

        let weights = f
            .raw("infer.weights")
            .map(|raw| split_list(&raw).iter().map(|p| f.path(p)).collect())
            .unwrap_or_default();
        let nonlinearity = match f.list::<f64>("infer.nonlinearity")? {
            None => Nonlinearity::None,
            Some(c) => Nonlinearity::Polynomial(c),
        };
        let polarity = match f.raw("infer.polarity") {
            None => SigmoidPolarity::Ascending,
            Some(raw) => parse_polarity("infer.polarity", &raw)?,
        };
        let v_range = match (f.opt::<f64>("infer.v_lo")?, f.opt::<f64>("infer.v_hi")?) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(RunError::config(
                    "infer.v_lo and infer.v_hi must be given together",
                ))
            }
        };
        let infer = InferBlock {
            weights,
            layers: f.list("infer.layers")?.unwrap_or_else(|| vec![4, 4, 2]),
            g_max: f.parse("infer.g_max", 5e-6)?,
            input: f.list("infer.input")?,
            v_read: f.parse("infer.v_read", 1.0)?,
            nonlinearity,
            polarity,
            v_range,
        };

        f.finish()?;

        let cfg = ExperimentConfig {
            kind,
            seed,
            device,
            clock,
            sim,
            v_a,
            v_c,
            iv,
            transient,
            activation,
            compare,
            calibrate,
            infer,
            echo,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Leak time used by the DC sweep.
    pub fn iv_tau_leak(&self) -> f64 {
        match self.iv.tau_leak {
            Some(t) => t,
            None if self.device.tau_leak.is_finite() => self.device.tau_leak,
            None => 1e-3,
        }
    }

    fn validate(&self) -> Result<()> {
        let wrap = |e: pfpwm_core::Error| RunError::config(e.to_string());
        self.device.validate().map_err(wrap)?;
        self.clock.validate().map_err(wrap)?;
        self.sim.validate(&self.clock).map_err(wrap)?;
        self.compare.sawtooth.validate().map_err(wrap)?;
        for (v, key) in [(self.v_a, "bias.v_a"), (self.v_c, "bias.v_c")] {
            if !v.is_finite() {
                return Err(RunError::config(format!("{key} must be finite")));
            }
        }
        if self
            .iv
            .tau_leak
            .is_some_and(|t| !(t > 0.0 && t.is_finite()))
        {
            return Err(RunError::config("iv.tau_leak must be finite and > 0"));
        }
        if self.transient.cycles == 0 {
            return Err(RunError::config("transient.cycles must be >= 1"));
        }
        let c = &self.calibrate;
        if c.data.is_none() && c.points < 2 {
            return Err(RunError::config("calibrate.points must be >= 2"));
        }
        if !(c.v_min < c.v_max) {
            return Err(RunError::config(
                "calibrate.v_min must be below calibrate.v_max",
            ));
        }
        if !(c.noise >= 0.0 && c.noise.is_finite()) {
            return Err(RunError::config("calibrate.noise must be finite and >= 0"));
        }
        if !(c.tau_true > 0.0) {
            return Err(RunError::config("calibrate.tau_true must be > 0"));
        }
        let inf = &self.infer;
        if inf.weights.is_empty() && (inf.layers.len() < 2 || inf.layers.contains(&0)) {
            return Err(RunError::config(
                "infer.layers needs at least two nonzero sizes (inputs, outputs)",
            ));
        }
        if !(inf.g_max > 0.0 && inf.g_max.is_finite()) {
            return Err(RunError::config("infer.g_max must be finite and > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("/cfg"))
    }

    #[test]
    fn defaults() {
        let c = parse("experiment = activation\n").unwrap();
        assert_eq!(c.kind, ExperimentKind::Activation);
        assert_eq!(c.seed, 0);
        assert_eq!(c.device, PfDeviceParams::default());
        assert_eq!(c.activation.v_in.len(), 16);
        assert_eq!(c.activation.v_in[0], 0.5);
        assert_eq!(c.activation.v_in[15], 2.0);
        assert_eq!(c.compare.v_in.len(), 151);
    }

    #[test]
    fn values_and_comments() {
        let c = parse(
            "# header\nexperiment = transient # trailing\nseed=9\n\ndevice.tau_leak = inf\n\
             device.qth_slope = 2e-14\ntransient.v_g2 = 1.0, 2.0\ntransient.v_g2_segments = 0:0.5, 1e-4:1.0\n\
             calibrate.data = data/ton.csv\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.device.tau_leak.is_infinite());
        assert_eq!(c.device.qth_slope, 2e-14);
        assert_eq!(c.transient.v_g2, vec![1.0, 2.0]);
        assert_eq!(c.transient.segments, Some(vec![(0.0, 0.5), (1e-4, 1.0)]));
        assert_eq!(c.calibrate.data, Some(PathBuf::from("/cfg/data/ton.csv")));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "",
            "experiment = nope",
            "experiment = activation\nbogus = 1",
            "experiment = activation\nseed = 1\nseed = 2",
            "experiment = activation\ndevice.qth_slope = 1fC",
            "experiment = activation\nactivation.v_in =",
            "experiment = activation\nactivation.v_in = 0:1:0",
            "experiment = activation\nnot a pair",
            "experiment = activation\ndevice.inj_ss = -1",
            "experiment = activation\nsim.dt = 1e-3",
            "experiment = infer\ninfer.v_lo = 0",
            "experiment = infer\ninfer.polarity = sideways",
        ] {
            let err = parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text:?}: {err}");
        }
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("k", "1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("k", "0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("k", "2:5:1").unwrap(), vec![2.0]);
        assert!(parse_grid("k", "0:1").is_err());
        assert!(parse_grid("k", " , ").is_err());
    }
}
