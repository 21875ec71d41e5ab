//! Run configuration: `[section]` headers, `key = value` lines and `#`
//! comments. Every omitted key takes the benchmark default, so an empty file
//! reproduces the reference Van der Pol experiment.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gp::KernelHyperparams;
use crate::regulator::{
    build_chain_matrices, IdentifierKind, InternalModelConfig, ObserverConfig, RegulatorParams,
    TimerConfig,
};
use crate::sim::SimConfig;

/// Shape of the internal-model matrix `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum FSpec {
    /// Bidiagonal with the given diagonal value and ones above it.
    Jordan(f64),
    /// Row-major explicit matrix.
    Matrix(Vec<Vec<f64>>),
}

/// Shape of the internal-model input matrix `G`.
#[derive(Debug, Clone, PartialEq)]
pub enum GSpec {
    /// Input enters the last state.
    Last,
    Column(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // [plant]
    pub a: f64,
    pub rho: f64,
    // [init]
    pub w0: [f64; 2],
    pub chi0: [f64; 2],
    // [regulator]
    pub g: f64,
    pub h: Vec<f64>,
    pub poles: Vec<f64>,
    pub sat_level: f64,
    pub b_bar: f64,
    pub n_eta: usize,
    pub f_spec: FSpec,
    pub g_spec: GSpec,
    // [gp]
    pub sigma_p2: f64,
    pub sigma_n2: f64,
    pub sigma_thr2: f64,
    pub lengthscales: Vec<f64>,
    pub n: usize,
    pub n_values: Vec<usize>,
    // [timer]
    pub t_min: f64,
    pub t_max: f64,
    // [sim]
    pub sim: SimConfig,
    // [run]
    pub identifier: IdentifierKind,
    pub seed: u64,
    pub out_dir: Option<String>,
    // [bounds]
    pub delta: f64,
    /// Friend Lipschitz constant; estimated from the trajectory when absent.
    pub l_f: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            a: 2.0,
            rho: 2.0,
            w0: [1.0, 0.0],
            chi0: [0.0, 0.0],
            g: 20.0,
            h: vec![6.0, 11.0, 6.0],
            poles: vec![-1.0, -2.0],
            sat_level: 100.0,
            b_bar: 1.0,
            n_eta: 6,
            f_spec: FSpec::Jordan(-1.0),
            g_spec: GSpec::Last,
            sigma_p2: 1.0,
            sigma_n2: 0.01,
            sigma_thr2: 1.0,
            lengthscales: vec![7.7, 34.3, 19.9, 0.4, 133.6, 1.2],
            n: 200,
            n_values: vec![50, 100, 200],
            t_min: 0.1,
            t_max: 0.1,
            sim: SimConfig::default(),
            identifier: IdentifierKind::Gp,
            seed: 0,
            out_dir: None,
            delta: 0.01,
            l_f: None,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("plant", &["a", "rho"]),
    ("init", &["w0", "chi0"]),
    (
        "regulator",
        &["g", "h", "poles", "sat_level", "b_bar", "n_eta", "F_spec", "G_spec"],
    ),
    (
        "gp",
        &["sigma_p2", "sigma_n2", "sigma_thr2", "lengthscales", "N", "N_values"],
    ),
    ("timer", &["t_min", "t_max"]),
    ("sim", &["dt", "horizon", "ss_window", "log_stride"]),
    ("run", &["identifier", "seed", "out_dir"]),
    ("bounds", &["delta", "L_f"]),
];

struct Entry<'a> {
    line: usize,
    column: usize,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn real(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .map_err(|_| self.err(format!("expected a number, found {:?}", self.value)))
    }

    fn integer<T: std::str::FromStr>(&self) -> Result<T> {
        self.value
            .parse::<T>()
            .map_err(|_| self.err(format!("expected an integer, found {:?}", self.value)))
    }

    fn list<T: std::str::FromStr>(&self) -> Result<Vec<T>> {
        self.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| self.err(format!("bad list element {:?}", s.trim())))
            })
            .collect()
    }

    fn pair(&self) -> Result<[f64; 2]> {
        let v: Vec<f64> = self.list()?;
        <[f64; 2]>::try_from(v).map_err(|_| self.err("expected two comma-separated numbers"))
    }
}

fn parse_f_spec(entry: &Entry) -> Result<FSpec> {
    let v = entry.value;
    if let Some(rest) = v.strip_prefix("jordan") {
        let inner = rest.trim().trim_start_matches(['(', ':']).trim_end_matches(')').trim();
        let pole = if inner.is_empty() {
            -1.0
        } else {
            inner
                .parse::<f64>()
                .map_err(|_| entry.err(format!("bad jordan diagonal {inner:?}")))?
        };
        return Ok(FSpec::Jordan(pole));
    }
    let rows = v
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| entry.err(format!("bad matrix entry {:?}", s.trim())))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FSpec::Matrix(rows))
}

fn parse_g_spec(entry: &Entry) -> Result<GSpec> {
    if entry.value == "last" {
        Ok(GSpec::Last)
    } else {
        Ok(GSpec::Column(entry.list()?))
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = content.len() - content.trim_start().len() + 1;
            if let Some(name) = trimmed.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Parse {
                    line: line_no,
                    column: indent,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim();
                let known = KEYS.iter().find(|(s, _)| *s == name).ok_or(Error::Parse {
                    line: line_no,
                    column: indent + 1,
                    message: format!("unknown section [{name}]"),
                })?;
                section = Some(known.0);
                continue;
            }
            let eq = content.find('=').ok_or(Error::Parse {
                line: line_no,
                column: indent,
                message: "expected `key = value`".into(),
            })?;
            let key = content[..eq].trim();
            let value = content[eq + 1..].trim();
            let value_col = eq + 2 + (content[eq + 1..].len() - content[eq + 1..].trim_start().len());
            let sec = section.ok_or(Error::Parse {
                line: line_no,
                column: indent,
                message: format!("key {key:?} appears before any [section] header"),
            })?;
            let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(Error::Parse {
                    line: line_no,
                    column: indent,
                    message: format!("unknown key {key:?} in [{sec}]"),
                });
            }
            if value.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    column: value_col,
                    message: format!("missing value for {key:?}"),
                });
            }
            let e = Entry {
                line: line_no,
                column: value_col,
                value,
            };
            match (sec, key) {
                ("plant", "a") => cfg.a = e.real()?,
                ("plant", "rho") => cfg.rho = e.real()?,
                ("init", "w0") => cfg.w0 = e.pair()?,
                ("init", "chi0") => cfg.chi0 = e.pair()?,
                ("regulator", "g") => cfg.g = e.real()?,
                ("regulator", "h") => cfg.h = e.list()?,
                ("regulator", "poles") => cfg.poles = e.list()?,
                ("regulator", "sat_level") => cfg.sat_level = e.real()?,
                ("regulator", "b_bar") => cfg.b_bar = e.real()?,
                ("regulator", "n_eta") => cfg.n_eta = e.integer()?,
                ("regulator", "F_spec") => cfg.f_spec = parse_f_spec(&e)?,
                ("regulator", "G_spec") => cfg.g_spec = parse_g_spec(&e)?,
                ("gp", "sigma_p2") => cfg.sigma_p2 = e.real()?,
                ("gp", "sigma_n2") => cfg.sigma_n2 = e.real()?,
                ("gp", "sigma_thr2") => cfg.sigma_thr2 = e.real()?,
                ("gp", "lengthscales") => cfg.lengthscales = e.list()?,
                ("gp", "N") => cfg.n = e.integer()?,
                ("gp", "N_values") => cfg.n_values = e.list()?,
                ("timer", "t_min") => cfg.t_min = e.real()?,
                ("timer", "t_max") => cfg.t_max = e.real()?,
                ("sim", "dt") => cfg.sim.dt = e.real()?,
                ("sim", "horizon") => cfg.sim.horizon = e.real()?,
                ("sim", "ss_window") => cfg.sim.ss_window = e.real()?,
                ("sim", "log_stride") => cfg.sim.log_stride = e.integer()?,
                ("run", "identifier") => {
                    cfg.identifier = e.value.parse().map_err(|err: Error| e.err(err.to_string()))?
                }
                ("run", "seed") => cfg.seed = e.integer()?,
                ("run", "out_dir") => cfg.out_dir = Some(e.value.to_string()),
                ("bounds", "delta") => cfg.delta = e.real()?,
                ("bounds", "L_f") => cfg.l_f = Some(e.real()?),
                _ => unreachable!("key table and match arms disagree"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Checks every module invariant by building the module configs.
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {}", self.rho)));
        }
        if self.w0[0] == 0.0 && self.w0[1] == 0.0 {
            return Err(Error::Config("w0 must be nonzero".into()));
        }
        if self.n == 0 || self.n_values.contains(&0) {
            return Err(Error::Config("buffer sizes N must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(l) = self.l_f {
            if !(l >= 0.0) {
                return Err(Error::Config(format!("L_f must be >= 0, got {l}")));
            }
        }
        let params = self.regulator_params(self.identifier, self.n)?;
        self.sim.validate(params.timer.t_min)?;
        Ok(())
    }

    pub fn hyperparams(&self) -> Result<KernelHyperparams> {
        KernelHyperparams::new(self.sigma_p2, self.lengthscales.clone(), self.sigma_n2)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn internal_model(&self) -> Result<InternalModelConfig> {
        let n = self.n_eta;
        if n == 0 {
            return Err(Error::Config("n_eta must be positive".into()));
        }
        let f = match &self.f_spec {
            FSpec::Jordan(p) => {
                let mut f = DMatrix::zeros(n, n);
                for i in 0..n {
                    f[(i, i)] = *p;
                    if i + 1 < n {
                        f[(i, i + 1)] = 1.0;
                    }
                }
                f
            }
            FSpec::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("F_spec must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let g = match &self.g_spec {
            GSpec::Last => {
                let mut g = DMatrix::zeros(n, 1);
                g[(n - 1, 0)] = 1.0;
                g
            }
            GSpec::Column(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!("G_spec must have {n} entries")));
                }
                DMatrix::from_column_slice(n, 1, v)
            }
        };
        InternalModelConfig::new(f, g)
    }

    pub fn regulator_params(&self, identifier: IdentifierKind, capacity: usize) -> Result<RegulatorParams> {
        let r = self.h.len().checked_sub(1).filter(|r| *r >= 1).ok_or_else(|| {
            Error::Config("h needs at least two coefficients (r + 1 with r >= 1)".into())
        })?;
        if r != 2 {
            return Err(Error::Config(format!(
                "the Van der Pol error system has relative degree 2, h implies {r}"
            )));
        }
        let chain = build_chain_matrices(r, 1);
        let observer = ObserverConfig::new(
            self.g,
            self.h.clone(),
            DMatrix::from_element(1, 1, self.b_bar),
            self.sat_level,
        )?;
        let timer = TimerConfig::new(self.t_min, self.t_max, self.sigma_thr2)?;
        RegulatorParams::new(
            chain,
            self.internal_model()?,
            observer,
            &self.poles,
            timer,
            self.hyperparams()?,
            capacity,
            identifier,
        )
    }

    /// Canonical `key = value` rendering; parsing it gives back the same config.
    pub fn render(&self) -> String {
        fn list<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        let f_spec = match &self.f_spec {
            FSpec::Jordan(p) => format!("jordan({p})"),
            FSpec::Matrix(rows) => rows.iter().map(|r| list(r)).collect::<Vec<_>>().join("; "),
        };
        let g_spec = match &self.g_spec {
            GSpec::Last => "last".to_string(),
            GSpec::Column(v) => list(v),
        };
        let mut s = String::new();
        let _ = writeln!(s, "[plant]\na = {}\nrho = {}\n", self.a, self.rho);
        let _ = writeln!(s, "[init]\nw0 = {}\nchi0 = {}\n", list(&self.w0), list(&self.chi0));
        let _ = writeln!(
            s,
            "[regulator]\ng = {}\nh = {}\npoles = {}\nsat_level = {}\nb_bar = {}\nn_eta = {}\nF_spec = {}\nG_spec = {}\n",
            self.g,
            list(&self.h),
            list(&self.poles),
            self.sat_level,
            self.b_bar,
            self.n_eta,
            f_spec,
            g_spec
        );
        let _ = writeln!(
            s,
            "[gp]\nsigma_p2 = {}\nsigma_n2 = {}\nsigma_thr2 = {}\nlengthscales = {}\nN = {}\nN_values = {}\n",
            self.sigma_p2,
            self.sigma_n2,
            self.sigma_thr2,
            list(&self.lengthscales),
            self.n,
            list(&self.n_values)
        );
        let _ = writeln!(s, "[timer]\nt_min = {}\nt_max = {}\n", self.t_min, self.t_max);
        let _ = writeln!(
            s,
            "[sim]\ndt = {}\nhorizon = {}\nss_window = {}\nlog_stride = {}\n",
            self.sim.dt, self.sim.horizon, self.sim.ss_window, self.sim.log_stride
        );
        let _ = writeln!(s, "[run]\nidentifier = {}\nseed = {}", self.identifier.as_str(), self.seed);
        if let Some(dir) = &self.out_dir {
            let _ = writeln!(s, "out_dir = {dir}");
        }
        let _ = writeln!(s, "\n[bounds]\ndelta = {}", self.delta);
        if let Some(l) = self.l_f {
            let _ = writeln!(s, "L_f = {l}");
        }
        s
    }

    /// Short SHA-256 digest of the canonical rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_benchmark() {
        let cfg = RunConfig::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.lengthscales, vec![7.7, 34.3, 19.9, 0.4, 133.6, 1.2]);
        assert_eq!((cfg.a, cfg.rho, cfg.g), (2.0, 2.0, 20.0));
        assert_eq!(cfg.h, vec![6.0, 11.0, 6.0]);
        assert_eq!((cfg.t_min, cfg.t_max, cfg.sigma_thr2, cfg.sigma_p2, cfg.sigma_n2), (0.1, 0.1, 1.0, 1.0, 0.01));
    }

    #[test]
    fn threshold_below_floor_rejected() {
        let err = RunConfig::from_str("[gp]\nsigma_thr2 = 0.005\n").unwrap_err();
        assert!(err.to_string().contains("sigma_thr2"), "{err}");
    }

    #[test]
    fn dwell_order_rejected() {
        let err = RunConfig::from_str("[timer]\nt_min = 0.2\nt_max = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("t_min <= t_max"), "{err}");
    }

    #[test]
    fn unknown_key_reports_position() {
        match RunConfig::from_str("# comment\n[plant]\n  rh0 = 2\n").unwrap_err() {
            Error::Parse { line, column, message } => {
                assert_eq!((line, column), (3, 3));
                assert!(message.contains("rh0"));
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(RunConfig::from_str("[nope]\n").is_err());
        assert!(RunConfig::from_str("a = 1\n").is_err());
    }

    #[test]
    fn bad_value_reports_column() {
        match RunConfig::from_str("[sim]\ndt =  abc\n").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 7)),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn render_round_trips() {
        let text = "[regulator]\nF_spec = -2, 1; 0, -3\nn_eta = 2\nG_spec = 0.5, 1\n[gp]\nlengthscales = 1, 2\nN = 7\n[run]\nidentifier = ls\nout_dir = /tmp/x\n[bounds]\nL_f = 3.5\n";
        let cfg = RunConfig::from_str(text).unwrap();
        assert_eq!(RunConfig::from_str(&cfg.render()).unwrap(), cfg);
        assert_eq!(RunConfig::default().hash(), RunConfig::from_str("").unwrap().hash());
        assert_ne!(RunConfig::default().hash(), cfg.hash());
    }

    #[test]
    fn step_must_resolve_dwell_time() {
        assert!(RunConfig::from_str("[sim]\ndt = 0.02\n").is_err());
        assert!(RunConfig::from_str("[sim]\nss_window = 200\n").is_err());
    }
}
