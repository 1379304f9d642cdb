//! Typed view of a config's parameter map.

use serde_json::Value;

use super::config::{ExperimentConfig, Subcommand};
use crate::chaos::{FTag, FitRule, MIN_TRIALS};
use crate::circulant::SparseSpec;
use crate::error::{Error, Result};
use crate::weibull::AlphaLaw;

pub(crate) struct Params<'a> {
    config: &'a ExperimentConfig,
}

fn bad(key: &str, what: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {what}"))
}

impl<'a> Params<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Self {
        Self { config }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.config.parameters.get(key)
    }

    fn req(&self, key: &str) -> Result<&'a Value> {
        self.get(key).ok_or_else(|| bad(key, "missing"))
    }

    fn as_f64(key: &str, v: &Value) -> Result<f64> {
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(key, "expected a finite number"))
    }

    fn as_u64(key: &str, v: &Value) -> Result<u64> {
        v.as_u64()
            .ok_or_else(|| bad(key, "expected a nonnegative integer"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        Self::as_f64(key, self.req(key)?)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| Self::as_f64(key, v))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key).map_or(Ok(default), |v| Self::as_u64(key, v))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        Ok(Self::as_u64(key, self.req(key)?)? as usize)
    }

    pub fn positive(&self, key: &str) -> Result<usize> {
        let v = self.usize(key)?;
        if v == 0 {
            return Err(bad(key, "must be positive"));
        }
        Ok(v)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.get(key).map_or(Ok(default), |v| {
            v.as_bool()
                .ok_or_else(|| bad(key, "expected true or false"))
        })
    }

    pub fn str(&self, key: &str) -> Result<&'a str> {
        self.req(key)?
            .as_str()
            .ok_or_else(|| bad(key, "expected a string"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self
            .req(key)?
            .as_array()
            .ok_or_else(|| bad(key, "expected an array"))?;
        if arr.is_empty() {
            return Err(bad(key, "must be nonempty"));
        }
        arr.iter().map(|v| Self::as_f64(key, v)).collect()
    }

    pub fn increasing(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.f64_list(key)?;
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad(key, "must be strictly increasing"));
        }
        Ok(v)
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let arr = self
            .req(key)?
            .as_array()
            .ok_or_else(|| bad(key, "expected an array"))?;
        if arr.is_empty() {
            return Err(bad(key, "must be nonempty"));
        }
        arr.iter()
            .map(|v| Self::as_u64(key, v).map(|x| x as usize))
            .collect()
    }

    pub fn alpha(&self) -> Result<f64> {
        let a = self.f64("alpha")?;
        if !(a > 0.0 && a <= 1.0) {
            return Err(bad("alpha", "must lie in (0, 1]"));
        }
        Ok(a)
    }

    pub fn law(&self) -> Result<AlphaLaw> {
        let alpha = self.alpha()?;
        if self.bool_or("standardized", false)? {
            AlphaLaw::standardized(alpha)
        } else {
            AlphaLaw::raw(alpha)
        }
    }

    pub fn mc_trials(&self) -> Result<usize> {
        let t = self.usize("trials")?;
        if t < MIN_TRIALS {
            return Err(bad("trials", format!("must be at least {MIN_TRIALS}")));
        }
        Ok(t)
    }

    fn sparse(&self) -> Result<(SparseSpec, usize)> {
        let n = self.positive("n")?;
        let s = self.positive("s")?;
        let m = self.positive("m")?;
        if m > n {
            return Err(bad("m", "must not exceed n"));
        }
        Ok((SparseSpec::new(s, n).map_err(|e| bad("s", e))?, m))
    }

    /// Parse into a job, which validates every value.
    pub fn job(&self) -> Result<Job> {
        Ok(match self.config.subcommand {
            Subcommand::Sample => Job::Sample {
                law: self.law()?,
                count: self.positive("count")?,
            },
            Subcommand::Moments => {
                let p_grid = self.increasing("p_grid")?;
                if p_grid.iter().any(|&p| p < 1.0) {
                    return Err(bad("p_grid", "entries must be >= 1"));
                }
                Job::Moments {
                    law: self.law()?,
                    p_grid,
                    trials: self.mc_trials()?,
                }
            }
            Subcommand::Tails => {
                let statistic = match self.str("statistic")? {
                    "constant" => Statistic::Constant(self.f64_or("value", 0.0)?),
                    "abs" => Statistic::Abs(self.law()?),
                    "square_centered" => Statistic::SquareCentered(self.law()?),
                    other => {
                        return Err(bad(
                            "statistic",
                            format!("`{other}` is not one of constant, abs, square_centered"),
                        ))
                    }
                };
                Job::Tails {
                    statistic,
                    thresholds: self.increasing("thresholds")?,
                    trials: self.mc_trials()?,
                }
            }
            Subcommand::Chaos => {
                let (spec, m) = self.sparse()?;
                let fit_rule = match self.get("fit_rule").map(|v| v.as_str()) {
                    None => FitRule::Prefactor,
                    Some(Some("prefactor")) => FitRule::Prefactor,
                    Some(Some("shift")) => FitRule::Shift,
                    Some(_) => return Err(bad("fit_rule", "expected `prefactor` or `shift`")),
                };
                let min_survival = self.f64_or("min_survival", 1e-3)?;
                if !(min_survival > 0.0 && min_survival < 1.0) {
                    return Err(bad("min_survival", "must lie in (0, 1)"));
                }
                Job::Chaos {
                    alpha: self.alpha()?,
                    spec,
                    m,
                    members: self.positive("members")?,
                    thresholds: self.increasing("thresholds")?,
                    trials: self.mc_trials()?,
                    fit_rule,
                    min_survival,
                }
            }
            Subcommand::Decouple => {
                let f = match self.str("f_tag")? {
                    "abs" => FTag::Abs,
                    "square" => FTag::Square,
                    "power" => {
                        let p = self.f64("power")?;
                        if !(p >= 1.0) {
                            return Err(bad("power", "must be >= 1"));
                        }
                        FTag::Power(p)
                    }
                    other => {
                        return Err(bad(
                            "f_tag",
                            format!("`{other}` is not one of abs, square, power"),
                        ))
                    }
                };
                let c_grid = self.increasing("c_grid")?;
                if c_grid[0] <= 0.0 {
                    return Err(bad("c_grid", "entries must be positive"));
                }
                Job::Decouple {
                    alpha: self.alpha()?,
                    n: self.positive("n")?,
                    members: self.positive("members")?,
                    f,
                    c_grid,
                    trials: self.mc_trials()?,
                    replicates: self.u64_or("replicates", 1)?.max(1) as usize,
                }
            }
            Subcommand::Gamma => {
                let (spec, m) = self.sparse()?;
                Job::Gamma {
                    alpha: self.alpha()?,
                    spec,
                    m,
                    members: self.positive("members")?,
                }
            }
            Subcommand::Rip => {
                let n = self.positive("n")?;
                let s = self.positive("s")?;
                SparseSpec::new(s, n).map_err(|e| bad("s", e))?;
                let m_grid = self.usize_list("m_grid")?;
                if m_grid.iter().any(|&m| m == 0 || m > n) {
                    return Err(bad("m_grid", "entries must lie in [1, n]"));
                }
                let delta_target = self.f64("delta_target")?;
                if !(delta_target > 0.0) {
                    return Err(bad("delta_target", "must be positive"));
                }
                Job::Rip {
                    alpha: self.alpha()?,
                    n,
                    m_grid,
                    s,
                    delta_target,
                    trials: self.positive("trials")? as u64,
                }
            }
        })
    }

    pub fn check(&self) -> Result<()> {
        self.u64_or("seed", 0)?;
        self.job().map(|_| ())
    }
}

/// Tail statistics offered by the `tails` subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Constant(f64),
    /// `|xi|` for one draw of the law.
    Abs(AlphaLaw),
    /// `|xi^2 - E xi^2|`.
    SquareCentered(AlphaLaw),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Sample {
        law: AlphaLaw,
        count: usize,
    },
    Moments {
        law: AlphaLaw,
        p_grid: Vec<f64>,
        trials: usize,
    },
    Tails {
        statistic: Statistic,
        thresholds: Vec<f64>,
        trials: usize,
    },
    Chaos {
        alpha: f64,
        spec: SparseSpec,
        m: usize,
        members: usize,
        thresholds: Vec<f64>,
        trials: usize,
        fit_rule: FitRule,
        min_survival: f64,
    },
    Decouple {
        alpha: f64,
        n: usize,
        members: usize,
        f: FTag,
        c_grid: Vec<f64>,
        trials: usize,
        replicates: usize,
    },
    Gamma {
        alpha: f64,
        spec: SparseSpec,
        m: usize,
        members: usize,
    },
    Rip {
        alpha: f64,
        n: usize,
        m_grid: Vec<usize>,
        s: usize,
        delta_target: f64,
        trials: u64,
    },
}
