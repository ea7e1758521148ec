//! Settings file and flag merging.
//!
//! The file holds one `key = value` per line; `#` starts a comment. Keys
//! are the long flag names without dashes prefix, e.g.
//!
//! ```text
//! solver = bdmft
//! scheme = cts:5, fock:20
//! mu = 0.4
//! j-min = 0.1
//! j-max = 1.0
//! j-step = 0.1
//! lb = 2
//! ```
//!
//! Underscores and dashes in keys are interchangeable.

use std::collections::BTreeMap;
use std::fs;

use ctsboson::basis::TruncationScheme;
use ctsboson::bdmft::AlphaScheme;
use ctsboson::sweep::{j_grid, Overrides, SchemeSpec, Solver};

use crate::{CommonArgs, Failure};

const KEYS: &[&str] = &[
    "solver",
    "scheme",
    "alpha-scheme",
    "mu",
    "z",
    "lb",
    "max-iter",
    "mixing",
    "tol-phi",
    "tol-delta",
    "beta",
    "n-omega",
    "alpha-max",
    "j",
    "j-min",
    "j-max",
    "j-step",
    "workers",
    "cold-start",
    "j-lo",
    "j-hi",
    "tol-j",
    "repeats",
    "reference",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn bad(key: &str, value: &str) -> Failure {
    Failure::Invalid(format!("invalid value `{value}` for `{key}`"))
}

pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-").to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(Failure::Invalid(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        values.insert(key, v.trim().to_string());
    }
    Ok(values)
}

impl Settings {
    pub fn load(args: &CommonArgs) -> Result<Self, Failure> {
        let mut s = Settings::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
            s.values = parse_file(&text)?;
        }
        s.set_opt("solver", args.solver.clone());
        s.set_opt("alpha-scheme", args.alpha_scheme.clone());
        s.set_opt("z", args.z.clone());
        s.set_opt("lb", args.lb.clone());
        s.set_opt("max-iter", args.max_iter.clone());
        s.set_opt("mixing", args.mixing.clone());
        s.set_opt("tol-phi", args.tol_phi.clone());
        s.set_opt("tol-delta", args.tol_delta.clone());
        s.set_opt("beta", args.beta.clone());
        s.set_opt("n-omega", args.n_omega.clone());
        if !args.scheme.is_empty() {
            s.set("scheme", &args.scheme.join(","));
        }
        if !args.mu.is_empty() {
            s.set("mu", &args.mu.join(","));
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn set_opt(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn list(&self, key: &str) -> Vec<&str> {
        self.get(key)
            .map(|v| v.split(',').map(str::trim).filter(|x| !x.is_empty()).collect())
            .unwrap_or_default()
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, Failure> {
        self.get(key).map(|v| v.trim().parse::<f64>().map_err(|_| bad(key, v))).transpose()
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, Failure> {
        self.get(key).map(|v| v.trim().parse::<usize>().map_err(|_| bad(key, v))).transpose()
    }

    pub fn required_f64(&self, key: &str) -> Result<f64, Failure> {
        self.opt_f64(key)?.ok_or_else(|| Failure::Invalid(format!("missing `--{key}`")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, Failure> {
        match self.get(key) {
            None => Ok(false),
            Some(v) => match v.trim().to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(bad(key, v)),
            },
        }
    }

    pub fn solver(&self) -> Result<Solver, Failure> {
        match self.get("solver") {
            None => Err(Failure::Invalid("missing `--solver`".into())),
            Some(v) => Ok(v.parse()?),
        }
    }

    pub fn z(&self) -> Result<usize, Failure> {
        Ok(self.opt_usize("z")?.unwrap_or(6))
    }

    pub fn l_b(&self) -> Result<usize, Failure> {
        Ok(self.opt_usize("lb")?.unwrap_or(2))
    }

    /// Scheme list; `defaults` applies when none is configured.
    pub fn schemes(&self, defaults: &[&str]) -> Result<Vec<SchemeSpec<f64>>, Failure> {
        let alpha: AlphaScheme<f64> = match self.get("alpha-scheme") {
            Some(v) => v.parse()?,
            None => AlphaScheme::MinimizeEAim,
        };
        let mut names = self.list("scheme");
        if names.is_empty() {
            names = defaults.to_vec();
        }
        if names.is_empty() {
            return Err(Failure::Invalid("missing `--scheme`".into()));
        }
        names
            .iter()
            .map(|n| {
                let scheme: TruncationScheme<f64> = n.parse()?;
                Ok(SchemeSpec::new(scheme).with_alpha_scheme(alpha))
            })
            .collect()
    }

    pub fn mu_values(&self) -> Result<Vec<f64>, Failure> {
        let mus = self.list("mu");
        if mus.is_empty() {
            return Err(Failure::Invalid("missing `--mu`".into()));
        }
        mus.iter().map(|m| m.parse::<f64>().map_err(|_| bad("mu", m))).collect()
    }

    pub fn j_values(&self) -> Result<Vec<f64>, Failure> {
        if let Some(j) = self.opt_f64("j")? {
            return Ok(vec![j]);
        }
        let lo = self.opt_f64("j-min")?;
        let hi = self.opt_f64("j-max")?;
        match (lo, hi) {
            (Some(lo), Some(hi)) => {
                let step = self.opt_f64("j-step")?.unwrap_or(if hi > lo { f64::NAN } else { 0.0 });
                if step.is_nan() {
                    return Err(Failure::Invalid("missing `--j-step`".into()));
                }
                Ok(j_grid(lo, hi, step)?)
            }
            _ => Err(Failure::Invalid("give --j or both --j-min and --j-max".into())),
        }
    }

    pub fn overrides(&self) -> Result<Overrides<f64>, Failure> {
        Ok(Overrides {
            mixing: self.opt_f64("mixing")?,
            tol_phi: self.opt_f64("tol-phi")?,
            tol_delta: self.opt_f64("tol-delta")?,
            max_iter: self.opt_usize("max-iter")?,
            beta_fict: self.opt_f64("beta")?,
            n_omega: self.opt_usize("n-omega")?,
            alpha_max: self.opt_f64("alpha-max")?,
        })
    }
}
