//! Flat `key = value` run configuration.
//!
//! Values come from three layers, later ones winning: a named preset, the
//! configuration file, and `--set key=value` overrides. Scalar values accept
//! constant expressions (`b = 1/sqrt(2)`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use heatctl_core::{BoundaryScheme, Complex, Expr, GainChoice};

use crate::error::CliError;

/// Keys that must be supplied by a preset, the file, or an override.
pub const REQUIRED: &[&str] = &["a", "b", "nx|ny|h", "mu", "dt", "t_end", "w0"];

/// Every accepted key with a one-line description (also used by `--help`).
pub const KEYS: &[(&str, &str)] = &[
    ("a", "domain width"),
    ("b", "domain height"),
    ("nx", "grid nodes along x (including both edges)"),
    ("ny", "grid nodes along y"),
    ("h", "grid spacing; sets nx and ny when they are absent"),
    ("scheme", "Neumann treatment: ghost (default) or one-sided"),
    ("mu", "reaction coefficient, > 0"),
    ("alpha", "actuator decay rate, > 0 (default 3)"),
    ("beta", "observer filter decay rate, > 0 (default 3)"),
    ("dt", "time step, > 0"),
    ("t_end", "horizon, >= dt"),
    ("w0", "initial state: expression in x, y or a field CSV path"),
    ("v0", "initial actuator/filter state on the Neumann edges (default 0)"),
    ("w_hat0", "initial observer state (default 0)"),
    ("v_hat0", "initial observer filter state (default 0)"),
    ("p", "actuator shape expression (default: constructed from the unstable modes)"),
    ("q", "sensor shape expression (default: constructed from the unstable modes)"),
    ("gains", "controller gain: auto | shift:SIGMA | fixed:L1,L2,.. | targets:T1,T2,.."),
    ("observer_gains", "observer gain, same forms as `gains`"),
    ("gain_file", "gain CSV written by `synthesize`; overrides gains and shapes"),
    ("mode", "open_loop | closed_loop (default) | observer"),
    ("companion_open_loop", "also run the uncontrolled plant in closed-loop mode (default false)"),
    ("input", "plant input in observer/open-loop mode: zero (default) | random | expression"),
    ("seed", "seed for random inputs and verification instances (default 0)"),
    ("snapshot_every", "write w every this many steps (default 0: first and last only)"),
    ("slice_y", "y of the w(x, y, t) slice output (default b/2)"),
    ("eig_count", "initial number of eigenpairs (default 6; grown as needed)"),
    ("decay_from", "start time of the decay-rate fit (default t_end/4)"),
    ("sweep_key", "key varied by `sweep`"),
    ("sweep_values", "comma-separated values for `sweep`"),
];

/// Named parameter sets.
pub fn preset(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    match name {
        "paper-fig4" => Some(&[
            ("a", "1"),
            ("b", "1"),
            ("h", "0.05"),
            ("mu", "6"),
            ("alpha", "3"),
            ("beta", "3"),
            ("gains", "fixed:15"),
            ("dt", "0.05"),
            ("t_end", "4"),
            ("w0", "x*sin(2*pi*y)"),
            ("p", "sin(x)*sin(y)"),
            ("mode", "closed_loop"),
            ("companion_open_loop", "true"),
            ("snapshot_every", "20"),
        ]),
        _ => None,
    }
}

pub const PRESETS: &[&str] = &["paper-fig4"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Preset(String),
    File(usize),
    Override(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Preset(n) => write!(f, "preset `{n}`"),
            Origin::File(l) => write!(f, "line {l}"),
            Origin::Override(0) => f.write_str("sweep value"),
            Origin::Override(k) => write!(f, "--set #{k}"),
        }
    }
}

/// Raw layered key/value pairs before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

fn split_assignment(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        None
    } else {
        Some((k, v))
    }
}

fn check_known(key: &str, origin: &Origin) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{origin}: unknown key `{key}`")))
    }
}

impl RawConfig {
    pub fn with_preset(mut self, name: &str) -> Result<Self, CliError> {
        let entries = preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}` (available: {})", PRESETS.join(", "))))?;
        for (k, v) in entries {
            self.entries.insert(k.to_string(), (v.to_string(), Origin::Preset(name.to_string())));
        }
        Ok(self)
    }

    /// Parses file text; `#` starts a comment. Duplicate keys within the file are rejected.
    pub fn with_text(mut self, text: &str) -> Result<Self, CliError> {
        let mut seen = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = split_assignment(body)
                .ok_or_else(|| CliError::Config(format!("line {n}: expected `key = value`, got `{body}`")))?;
            check_known(k, &Origin::File(n))?;
            if let Some(prev) = seen.insert(k.to_string(), n) {
                return Err(CliError::Config(format!("line {n}: duplicate key `{k}` (first set on line {prev})")));
            }
            self.entries.insert(k.to_string(), (v.to_string(), Origin::File(n)));
        }
        Ok(self)
    }

    pub fn with_overrides(mut self, overrides: &[String]) -> Result<Self, CliError> {
        for (i, o) in overrides.iter().enumerate() {
            let origin = Origin::Override(i + 1);
            let (k, v) = split_assignment(o)
                .ok_or_else(|| CliError::Usage(format!("{origin}: expected key=value, got `{o}`")))?;
            check_known(k, &origin).map_err(|e| CliError::Usage(e.to_string()))?;
            self.entries.insert(k.to_string(), (v.to_string(), origin));
        }
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), Origin::Override(0)));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn origin(&self, key: &str) -> String {
        self.entries.get(key).map_or_else(|| "default".to_string(), |(_, o)| o.to_string())
    }

    fn err(&self, key: &str, msg: impl fmt::Display) -> CliError {
        CliError::Config(format!("{}: `{key}` {msg}", self.origin(key)))
    }

    fn scalar(&self, key: &str) -> Result<Option<f64>, CliError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let e = Expr::parse(v).map_err(|e| self.err(key, format!("is not a number: {e}")))?;
        let x = e.eval(0.0, 0.0);
        if !x.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(Some(x))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, CliError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.parse::<usize>().map(Some).map_err(|_| self.err(key, format!("must be a non-negative integer, got `{v}`")))
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None | Some("false") | Some("no") | Some("0") => Ok(false),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some(other) => Err(self.err(key, format!("must be true or false, got `{other}`"))),
        }
    }

    fn expr(&self, key: &str) -> Result<Option<Expr>, CliError> {
        self.get(key).map(|v| Expr::parse(v).map_err(|e| self.err(key, e))).transpose()
    }

    fn gain(&self, key: &str) -> Result<GainChoice, CliError> {
        let Some(v) = self.get(key) else { return Ok(GainChoice::default()) };
        let list = |s: &str| -> Result<Vec<f64>, CliError> {
            s.split(',')
                .map(|t| {
                    Expr::parse(t).map(|e| e.eval(0.0, 0.0)).map_err(|e| self.err(key, format!("bad entry `{t}`: {e}")))
                })
                .collect()
        };
        if v == "auto" {
            Ok(GainChoice::default())
        } else if let Some(s) = v.strip_prefix("shift:") {
            let sigma = Expr::parse(s).map_err(|e| self.err(key, e))?.eval(0.0, 0.0);
            Ok(GainChoice::MirrorShift { sigma })
        } else if let Some(s) = v.strip_prefix("fixed:") {
            Ok(GainChoice::Fixed(list(s)?))
        } else if let Some(s) = v.strip_prefix("targets:") {
            Ok(GainChoice::Targets(list(s)?.into_iter().map(|t| Complex::new(t, 0.0)).collect()))
        } else {
            Err(self.err(key, format!("must be auto, shift:S, fixed:.. or targets:.., got `{v}`")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    OpenLoop,
    ClosedLoop,
    Observer,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OpenLoop => "open_loop",
            Mode::ClosedLoop => "closed_loop",
            Mode::Observer => "observer",
        }
    }
}

/// Initial data: an expression or a field CSV.
#[derive(Debug, Clone)]
pub enum FieldSource {
    Expr(Expr),
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub enum InputSpec {
    Zero,
    Random,
    Expr(Expr),
}

/// Fully typed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub ny: usize,
    pub scheme: BoundaryScheme,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub w0: FieldSource,
    pub v0: Expr,
    pub w_hat0: Expr,
    pub v_hat0: Expr,
    pub p: Option<Expr>,
    pub q: Option<Expr>,
    pub gains: GainChoice,
    pub observer_gains: GainChoice,
    pub gain_file: Option<PathBuf>,
    pub mode: Mode,
    pub companion_open_loop: bool,
    pub input: InputSpec,
    pub seed: u64,
    pub snapshot_every: usize,
    pub slice_y: f64,
    pub eig_count: usize,
    pub decay_from: f64,
    pub sweep_key: Option<String>,
    pub sweep_values: Vec<String>,
}

fn grid_count(len: f64, h: f64) -> Option<usize> {
    let n = (len / h).round();
    ((n * h - len).abs() <= 1e-9 * len && n >= 1.0).then_some(n as usize + 1)
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let missing: Vec<&str> = REQUIRED
            .iter()
            .copied()
            .filter(|k| {
                if *k == "nx|ny|h" {
                    raw.get("h").is_none() && (raw.get("nx").is_none() || raw.get("ny").is_none())
                } else {
                    raw.get(k).is_none()
                }
            })
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "missing required keys: {} (use --preset {} for a complete example)",
                missing.join(", "),
                PRESETS[0]
            )));
        }
        let req = |k: &str| raw.scalar(k).map(|v| v.expect("presence checked"));
        let positive = |k: &str, v: f64| if v > 0.0 { Ok(v) } else { Err(raw.err(k, format!("must be > 0, got {v}"))) };

        let a = positive("a", req("a")?)?;
        let b = positive("b", req("b")?)?;
        let h = raw.scalar("h")?.map(|h| positive("h", h)).transpose()?;
        let from_h = |k: &str, len: f64| -> Result<usize, CliError> {
            let h = h.expect("either nx/ny or h present");
            grid_count(len, h).ok_or_else(|| raw.err("h", format!("= {h} does not divide {k} = {len}")))
        };
        let nx = match raw.count("nx")? {
            Some(n) => n,
            None => from_h("a", a)?,
        };
        let ny = match raw.count("ny")? {
            Some(n) => n,
            None => from_h("b", b)?,
        };
        if nx < 2 || ny < 2 {
            return Err(CliError::Config(format!("grid needs at least 2 nodes per axis, got {nx}x{ny}")));
        }
        let scheme = match raw.get("scheme") {
            Some(s) => s.parse().map_err(|e| raw.err("scheme", e))?,
            None => BoundaryScheme::default(),
        };
        let mu = positive("mu", req("mu")?)?;
        let alpha = positive("alpha", raw.scalar("alpha")?.unwrap_or(3.0))?;
        let beta = positive("beta", raw.scalar("beta")?.unwrap_or(3.0))?;
        let dt = positive("dt", req("dt")?)?;
        let t_end = req("t_end")?;
        if t_end < dt * (1.0 - 1e-12) {
            return Err(raw.err("t_end", format!("must be >= dt = {dt}, got {t_end}")));
        }
        let w0_text = raw.get("w0").expect("presence checked");
        let w0 = if let Some(path) = w0_text.strip_prefix("csv:") {
            FieldSource::Csv(PathBuf::from(path.trim()))
        } else if w0_text.ends_with(".csv") {
            FieldSource::Csv(PathBuf::from(w0_text))
        } else {
            FieldSource::Expr(raw.expr("w0")?.expect("presence checked"))
        };
        let zero = || Expr::parse("0").expect("constant");
        let mode = match raw.get("mode") {
            None | Some("closed_loop") => Mode::ClosedLoop,
            Some("open_loop") => Mode::OpenLoop,
            Some("observer") => Mode::Observer,
            Some(other) => return Err(raw.err("mode", format!("must be open_loop, closed_loop or observer, got `{other}`"))),
        };
        let input = match raw.get("input") {
            None | Some("zero") => InputSpec::Zero,
            Some("random") => InputSpec::Random,
            Some(_) => InputSpec::Expr(raw.expr("input")?.expect("present")),
        };
        let seed = match raw.get("seed") {
            None => 0,
            Some(v) => v.parse().map_err(|_| raw.err("seed", format!("must be an unsigned integer, got `{v}`")))?,
        };
        let slice_y = raw.scalar("slice_y")?.unwrap_or(b / 2.0);
        if !(0.0..=b).contains(&slice_y) {
            return Err(raw.err("slice_y", format!("must lie in [0, {b}]")));
        }
        let eig_count = raw.count("eig_count")?.unwrap_or(6);
        if eig_count == 0 {
            return Err(raw.err("eig_count", "must be at least 1"));
        }
        let decay_from = raw.scalar("decay_from")?.unwrap_or(t_end / 4.0);
        let sweep_key = raw.get("sweep_key").map(str::to_string);
        if let Some(k) = &sweep_key {
            check_known(k, &Origin::Override(0)).map_err(|_| raw.err("sweep_key", format!("names unknown key `{k}`")))?;
        }
        let sweep_values = raw.get("sweep_values").map_or_else(Vec::new, |v| v.split(',').map(|s| s.trim().to_string()).collect());

        Ok(RunConfig {
            a,
            b,
            nx,
            ny,
            scheme,
            mu,
            alpha,
            beta,
            dt,
            t_end,
            w0,
            v0: raw.expr("v0")?.unwrap_or_else(zero),
            w_hat0: raw.expr("w_hat0")?.unwrap_or_else(zero),
            v_hat0: raw.expr("v_hat0")?.unwrap_or_else(zero),
            p: raw.expr("p")?,
            q: raw.expr("q")?,
            gains: raw.gain("gains")?,
            observer_gains: raw.gain("observer_gains")?,
            gain_file: raw.get("gain_file").map(PathBuf::from),
            mode,
            companion_open_loop: raw.flag("companion_open_loop")?,
            input,
            seed,
            snapshot_every: raw.count("snapshot_every")?.unwrap_or(0),
            slice_y,
            eig_count,
            decay_from,
            sweep_key,
            sweep_values,
        })
    }

    pub fn grid(&self) -> Result<heatctl_core::Grid, CliError> {
        heatctl_core::Grid::new(self.a, self.b, self.nx, self.ny).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn sim_config(&self) -> heatctl_core::SimConfig {
        heatctl_core::SimConfig {
            dt: self.dt,
            t_end: self.t_end,
            mu: self.mu,
            snapshot_every: Some(if self.snapshot_every == 0 { self.steps() } else { self.snapshot_every }),
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Preset, then file text, then overrides.
pub fn load(preset_name: Option<&str>, text: Option<&str>, overrides: &[String]) -> Result<(RawConfig, RunConfig), CliError> {
    let mut raw = RawConfig::default();
    if let Some(p) = preset_name {
        raw = raw.with_preset(p)?;
    }
    if let Some(t) = text {
        raw = raw.with_text(t)?;
    }
    raw = raw.with_overrides(overrides)?;
    let cfg = RunConfig::from_raw(&raw)?;
    Ok((raw, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_expands() {
        let (_, c) = load(Some("paper-fig4"), None, &[]).unwrap();
        assert_eq!((c.nx, c.ny), (21, 21));
        assert_eq!((c.mu, c.alpha, c.dt, c.t_end), (6.0, 3.0, 0.05, 4.0));
        assert_eq!(c.gains, GainChoice::Fixed(vec![15.0]));
        assert_eq!(c.mode, Mode::ClosedLoop);
        assert!(c.companion_open_loop);
        assert_eq!(c.p.as_ref().unwrap().source(), "sin(x)*sin(y)");
        match &c.w0 {
            FieldSource::Expr(e) => assert_eq!(e.source(), "x*sin(2*pi*y)"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = load(None, Some(""), &[]).unwrap_err().to_string();
        for k in ["a", "b", "mu", "dt", "t_end", "w0"] {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn overrides_win() {
        let (_, c) = load(Some("paper-fig4"), Some("mu = 4\n"), &["mu=1".into()]).unwrap();
        assert_eq!(c.mu, 1.0);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "a = 1\n# comment\nfoo = 2\n";
        let err = load(None, Some(text), &[]).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("foo"), "{err}");
        let err = load(None, Some("a 1\n"), &[]).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        let err = load(Some("paper-fig4"), Some("\n\nmu = -1\n"), &[]).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("mu") && err.contains("> 0"), "{err}");
        let err = load(Some("paper-fig4"), Some("mu = 2\nmu = 3\n"), &[]).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        assert!(load(Some("paper-fig4"), None, &["bogus=1".into()]).is_err());
        assert!(load(Some("nope"), None, &[]).is_err());
    }

    #[test]
    fn constant_expressions_and_spacing() {
        let text = "a = 1\nb = 1/sqrt(2)\nnx = 29\nny = 21\nmu = 50\ndt = 0.01\nt_end = 1\nw0 = x*y # inline\n";
        let (_, c) = load(None, Some(text), &[]).unwrap();
        assert!((c.b - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(load(None, Some("a=1\nb=1\nh=0.3\nmu=1\ndt=0.1\nt_end=1\nw0=0\n"), &[]).is_err());
        assert!(load(Some("paper-fig4"), None, &["t_end=0.01".into()]).is_err());
        assert!(load(Some("paper-fig4"), None, &["scheme=upwind".into()]).is_err());
    }

    #[test]
    fn gain_forms() {
        let g = |s: &str| load(Some("paper-fig4"), None, &[format!("gains={s}")]).map(|(_, c)| c.gains);
        assert_eq!(g("auto").unwrap(), GainChoice::default());
        assert_eq!(g("shift:2").unwrap(), GainChoice::MirrorShift { sigma: 2.0 });
        assert_eq!(g("targets:-2,-3").unwrap(), GainChoice::Targets(vec![Complex::new(-2.0, 0.0), Complex::new(-3.0, 0.0)]));
        assert!(g("magic").is_err());
    }
}
