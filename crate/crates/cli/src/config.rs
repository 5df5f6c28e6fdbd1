//! Flat key-value experiment configuration. The format is line-oriented
//! `key = value` text with `#` comments; `--print-config` emits the defaults
//! with documentation. Parsing then serializing then parsing is idempotent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use mixext::analysis::Theta;
use mixext::index::MultiIndex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`, got `{1}`")]
    BadLine(usize, String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}`: {1}")]
    BadValue(String, String),
    #[error("config violates a precondition: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub p: f64,
    pub theta: Theta,
    /// Spline orders; empty means the default m = l(α).
    pub m: Vec<i64>,
    pub truncation: i64,
    pub catalog: String,
    pub seed: u64,
    pub k_max: usize,
    pub xi_order: usize,
    pub lp_panels: usize,
    pub lp_order: usize,
    pub shift_grid: usize,
    pub sample_points: usize,
    pub sample_box: Option<(Vec<f64>, Vec<f64>)>,
    pub lambdas: Vec<Vec<i64>>,
    pub trials: usize,
    pub inject_class_violation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 1,
            alpha: vec![1.5],
            p: 2.0,
            theta: Theta::Finite(2.0),
            m: Vec::new(),
            truncation: 5,
            catalog: "sin2pi".into(),
            seed: 42,
            k_max: 6,
            xi_order: 4,
            lp_panels: 16,
            lp_order: 4,
            shift_grid: 9,
            sample_points: 65,
            sample_box: None,
            lambdas: Vec::new(),
            trials: 16,
            inject_class_violation: false,
        }
    }
}

impl ExperimentConfig {
    /// Effective spline order: configured m, or l(α) by default.
    pub fn spline_order(&self) -> Result<MultiIndex, ConfigError> {
        if self.m.is_empty() {
            mixext::analysis::l_of_alpha(&self.alpha)
                .map_err(|e| ConfigError::Invalid(e.to_string()))
        } else {
            if self.m.len() != self.d {
                return Err(ConfigError::Invalid(format!(
                    "m has {} entries for d = {}",
                    self.m.len(),
                    self.d
                )));
            }
            MultiIndex::new(self.m.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=4).contains(&self.d) {
            return Err(ConfigError::Invalid(format!("d = {} outside 1..=4", self.d)));
        }
        if self.alpha.len() != self.d {
            return Err(ConfigError::Invalid(format!(
                "alpha has {} entries for d = {}",
                self.alpha.len(),
                self.d
            )));
        }
        if self.alpha.iter().any(|&a| a.is_nan() || a <= 0.0) {
            return Err(ConfigError::Invalid("alpha must be positive".into()));
        }
        if !(1.0..f64::INFINITY).contains(&self.p) {
            return Err(ConfigError::Invalid(format!("p = {} outside [1, ∞)", self.p)));
        }
        if let Theta::Finite(t) = self.theta {
            if !(1.0..f64::INFINITY).contains(&t) {
                return Err(ConfigError::Invalid(format!("theta = {t} outside [1, ∞]")));
            }
        }
        if self.truncation < 0 {
            return Err(ConfigError::Invalid("truncation must be ≥ 0".into()));
        }
        let m = self.spline_order()?;
        let l = mixext::analysis::l_of_alpha(&self.alpha)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let need = l.map(|v| v - 1);
        if !need.le(&m) {
            return Err(ConfigError::Invalid(format!(
                "m = {m} must dominate l(α) - 𝔢 = {need}"
            )));
        }
        for lam in &self.lambdas {
            if lam.len() != self.d || lam.iter().any(|&v| v < 0) {
                return Err(ConfigError::Invalid(format!("bad lambda {lam:?}")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut saw_alpha = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::BadLine(lineno + 1, raw.to_string()))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: &str| ConfigError::BadValue(key.to_string(), msg.to_string());
            match key {
                "schema" => {
                    if value != "1" {
                        return Err(bad("only schema 1 is supported"));
                    }
                }
                "d" => cfg.d = value.parse().map_err(|_| bad("not an integer"))?,
                "alpha" => {
                    cfg.alpha = parse_f64_list(value).map_err(|m| bad(&m))?;
                    saw_alpha = true;
                }
                "p" => cfg.p = value.parse().map_err(|_| bad("not a number"))?,
                "theta" => {
                    cfg.theta = if value == "inf" {
                        Theta::Infinity
                    } else {
                        Theta::Finite(value.parse().map_err(|_| bad("not a number or inf"))?)
                    }
                }
                "m" => {
                    cfg.m = if value == "auto" {
                        Vec::new()
                    } else {
                        parse_i64_list(value).map_err(|m| bad(&m))?
                    }
                }
                "truncation" => {
                    cfg.truncation = value.parse().map_err(|_| bad("not an integer"))?
                }
                "catalog" => cfg.catalog = value.to_string(),
                "seed" => cfg.seed = value.parse().map_err(|_| bad("not an integer"))?,
                "k_max" => cfg.k_max = value.parse().map_err(|_| bad("not an integer"))?,
                "xi_order" => cfg.xi_order = value.parse().map_err(|_| bad("not an integer"))?,
                "lp_panels" => {
                    cfg.lp_panels = value.parse().map_err(|_| bad("not an integer"))?
                }
                "lp_order" => cfg.lp_order = value.parse().map_err(|_| bad("not an integer"))?,
                "shift_grid" => {
                    cfg.shift_grid = value.parse().map_err(|_| bad("not an integer"))?
                }
                "sample_points" => {
                    cfg.sample_points = value.parse().map_err(|_| bad("not an integer"))?
                }
                "sample_box" => {
                    cfg.sample_box = if value == "auto" {
                        None
                    } else {
                        let (lo, hi) = value
                            .split_once(':')
                            .ok_or_else(|| bad("expected lo,..:hi,.."))?;
                        Some((
                            parse_f64_list(lo).map_err(|m| bad(&m))?,
                            parse_f64_list(hi).map_err(|m| bad(&m))?,
                        ))
                    }
                }
                "lambdas" => {
                    cfg.lambdas = if value == "none" {
                        Vec::new()
                    } else {
                        value
                            .split(';')
                            .map(|part| parse_i64_list(part.trim()))
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|m| bad(&m))?
                    }
                }
                "trials" => cfg.trials = value.parse().map_err(|_| bad("not an integer"))?,
                "inject_class_violation" => {
                    cfg.inject_class_violation =
                        value.parse().map_err(|_| bad("not a boolean"))?
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if !saw_alpha && cfg.d > 1 {
            cfg.alpha = vec![1.5; cfg.d];
        }
        if saw_alpha && cfg.alpha.len() == 1 && cfg.d > 1 {
            cfg.alpha = vec![cfg.alpha[0]; cfg.d];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema = 1");
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "alpha = {}", join_f64(&self.alpha));
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(
            s,
            "theta = {}",
            match self.theta {
                Theta::Finite(t) => format!("{t}"),
                Theta::Infinity => "inf".into(),
            }
        );
        let _ = writeln!(
            s,
            "m = {}",
            if self.m.is_empty() {
                "auto".to_string()
            } else {
                join_i64(&self.m)
            }
        );
        let _ = writeln!(s, "truncation = {}", self.truncation);
        let _ = writeln!(s, "catalog = {}", self.catalog);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "k_max = {}", self.k_max);
        let _ = writeln!(s, "xi_order = {}", self.xi_order);
        let _ = writeln!(s, "lp_panels = {}", self.lp_panels);
        let _ = writeln!(s, "lp_order = {}", self.lp_order);
        let _ = writeln!(s, "shift_grid = {}", self.shift_grid);
        let _ = writeln!(s, "sample_points = {}", self.sample_points);
        let _ = writeln!(
            s,
            "sample_box = {}",
            match &self.sample_box {
                None => "auto".to_string(),
                Some((lo, hi)) => format!("{}:{}", join_f64(lo), join_f64(hi)),
            }
        );
        let _ = writeln!(
            s,
            "lambdas = {}",
            if self.lambdas.is_empty() {
                "none".to_string()
            } else {
                self.lambdas
                    .iter()
                    .map(|l| join_i64(l))
                    .collect::<Vec<_>>()
                    .join("; ")
            }
        );
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "inject_class_violation = {}", self.inject_class_violation);
        s
    }

    /// Defaults with documentation, for `--print-config`.
    pub fn documented_defaults() -> String {
        let doc: BTreeMap<&str, &str> = [
            ("schema", "config format version"),
            ("d", "dimension (1..=4; verification suites cover d <= 2)"),
            ("alpha", "smoothness vector, comma-separated per axis"),
            ("p", "integrability exponent, 1 <= p < inf"),
            ("theta", "Besov third index, number or `inf` (Nikolskii)"),
            ("m", "spline orders per axis, or `auto` for l(alpha)"),
            ("truncation", "extension truncation level K (levels kappa <= K)"),
            ("catalog", "catalog function name (see `verify` report for the list)"),
            ("seed", "seed fixing every randomized draw"),
            ("k_max", "dyadic t-levels in norm discretizations"),
            ("xi_order", "Gauss order of the shift average in the averaged modulus"),
            ("lp_panels", "composite-quadrature panels per axis for inner norms"),
            ("lp_order", "Gauss order per panel for inner norms"),
            ("shift_grid", "shifts per active axis in sup-moduli (odd, incl ±t)"),
            ("sample_points", "per-axis grid points for `extend` CSV output"),
            ("sample_box", "`auto` or lo,..:hi,.. sampling box for `extend`"),
            ("lambdas", "derivative orders for outputs, e.g. `1` or `1,0; 0,1`"),
            ("trials", "random draws per level in experiments"),
            ("inject_class_violation", "debug switch: corrupt one class element"),
        ]
        .into_iter()
        .collect();
        let body = Self::default().to_text();
        let mut out = String::from("# mixext experiment configuration (defaults)\n");
        for line in body.lines() {
            let key = line.split('=').next().unwrap_or("").trim();
            if let Some(d) = doc.get(key) {
                let _ = writeln!(out, "{line:<28}# {d}");
            } else {
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
        .collect()
}

fn parse_i64_list(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|_| format!("bad integer `{p}`")))
        .collect()
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_i64(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_text();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, parsed);
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn parse_overrides_and_rejects() {
        let cfg = ExperimentConfig::parse(
            "d = 2\nalpha = 1.5, 2.5\ntheta = inf\nm = 2,3\nlambdas = 1,0; 0,1\n",
        )
        .unwrap();
        assert_eq!(cfg.d, 2);
        assert_eq!(cfg.alpha, vec![1.5, 2.5]);
        assert_eq!(cfg.theta, Theta::Infinity);
        assert_eq!(cfg.lambdas.len(), 2);

        assert!(ExperimentConfig::parse("alpha = -1\n").is_err());
        assert!(ExperimentConfig::parse("p = inf\n").is_err());
        assert!(ExperimentConfig::parse("nonsense = 1\n").is_err());
        assert!(ExperimentConfig::parse("d = 1\nalpha = 2.5\nm = 1\n").is_err());
    }

    #[test]
    fn documented_defaults_parse_back() {
        let text = ExperimentConfig::documented_defaults();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(parsed, ExperimentConfig::default());
    }
}
