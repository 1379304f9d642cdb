//! Monte Carlo tail and moment curves.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{rng_from_seed, ChaCha8Rng};
use crate::stats::{clopper_pearson, CompensatedSum};

pub const MIN_TRIALS: usize = 100;
/// Two-sided level of every reported confidence interval.
pub const CI_LEVEL: f64 = 0.05;
const Z_975: f64 = 1.959_963_984_540_054;

/// Empirical (or theoretical) survival curve `P{X > t}` on a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub thresholds: Vec<f64>,
    pub survival: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Zero for a theoretical curve.
    pub n_trials: u64,
    pub seed: u64,
    /// Reference or bound values aligned with `thresholds`.
    pub bound: Option<Vec<f64>>,
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(invalid("thresholds", "must be nonempty"));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(invalid("thresholds", "must be finite"));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("thresholds", "must be strictly increasing"));
    }
    Ok(())
}

impl TailCurve {
    /// Curve from exceedance counts `#{X > t}` out of `n_trials`.
    pub fn from_counts(
        thresholds: Vec<f64>,
        counts: &[u64],
        n_trials: u64,
        seed: u64,
    ) -> Result<Self> {
        check_thresholds(&thresholds)?;
        if counts.len() != thresholds.len() {
            return Err(invalid("counts", "one count per threshold"));
        }
        if n_trials == 0 {
            return Err(invalid("n_trials", "must be positive"));
        }
        let n = n_trials as f64;
        let survival = counts.iter().map(|&k| k as f64 / n).collect();
        let (ci_low, ci_high) = counts
            .iter()
            .map(|&k| clopper_pearson(k, n_trials, CI_LEVEL))
            .unzip();
        Ok(Self {
            thresholds,
            survival,
            ci_low,
            ci_high,
            n_trials,
            seed,
            bound: None,
        })
    }

    pub fn from_samples(samples: &[f64], thresholds: Vec<f64>, seed: u64) -> Result<Self> {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self::from_sorted(&sorted, thresholds, seed)
    }

    pub fn from_sorted(sorted: &[f64], thresholds: Vec<f64>, seed: u64) -> Result<Self> {
        let counts: Vec<u64> = thresholds
            .iter()
            .map(|&t| (sorted.len() - sorted.partition_point(|&x| x <= t)) as u64)
            .collect();
        Self::from_counts(thresholds, &counts, sorted.len() as u64, seed)
    }

    /// A curve of exact values, e.g. a theoretical bound.
    pub fn theoretical(thresholds: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_thresholds(&thresholds)?;
        if values.len() != thresholds.len() {
            return Err(invalid("values", "one value per threshold"));
        }
        Ok(Self {
            thresholds,
            ci_low: values.clone(),
            ci_high: values.clone(),
            survival: values,
            n_trials: 0,
            seed: 0,
            bound: None,
        })
    }

    pub fn with_bound(mut self, bound: Vec<f64>) -> Result<Self> {
        if bound.len() != self.thresholds.len() {
            return Err(invalid("bound", "one value per threshold"));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Columns `threshold,estimate,ci_low,ci_high,n_trials,seed[,bound]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let with_bound = self.bound.is_some();
        write!(w, "threshold,estimate,ci_low,ci_high,n_trials,seed")?;
        writeln!(w, "{}", if with_bound { ",bound" } else { "" })?;
        for i in 0..self.len() {
            write!(
                w,
                "{:?},{:?},{:?},{:?},{},{}",
                self.thresholds[i],
                self.survival[i],
                self.ci_low[i],
                self.ci_high[i],
                self.n_trials,
                self.seed
            )?;
            match &self.bound {
                Some(b) => writeln!(w, ",{:?}", b[i])?,
                None => writeln!(w)?,
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let table = read_table(r)?;
        let col = |name: &str| table.column(name);
        let thresholds = col("threshold")?;
        let n_trials = col("n_trials")?.first().copied().unwrap_or(0.0) as u64;
        let seed_text = table.text_column("seed")?;
        let seed = seed_text
            .first()
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("seed: {e}")))
            })
            .transpose()?
            .unwrap_or(0);
        Ok(Self {
            survival: col("estimate")?,
            ci_low: col("ci_low")?,
            ci_high: col("ci_high")?,
            bound: table.has("bound").then(|| col("bound")).transpose()?,
            thresholds,
            n_trials,
            seed,
        })
    }
}

/// Minimal header-plus-rows CSV reader for the numeric files this crate writes.
pub(crate) struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[idx].clone()).collect())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        self.text_column(name)?
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{name}: `{t}`: {e}")))
            })
            .collect()
    }
}

pub(crate) fn read_table<R: BufRead>(r: R) -> Result<Table> {
    let mut lines = r.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h?.trim().split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Parse("empty file".into())),
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<String> = line
            .trim()
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Draw `n_trials` values of `statistic` from one seeded stream.
pub fn mc_samples<F>(mut statistic: F, n_trials: usize, seed: u64) -> Vec<f64>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    let mut rng = rng_from_seed(seed);
    (0..n_trials).map(|_| statistic(&mut rng)).collect()
}

pub fn mc_tail<F>(statistic: F, thresholds: &[f64], n_trials: usize, seed: u64) -> Result<TailCurve>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    check_thresholds(thresholds)?;
    if n_trials < MIN_TRIALS {
        return Err(invalid(
            "n_trials",
            format!("must be at least {MIN_TRIALS}"),
        ));
    }
    let samples = mc_samples(statistic, n_trials, seed);
    TailCurve::from_samples(&samples, thresholds.to_vec(), seed)
}

/// Plug-in `L_p` norms with delta-method standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub p_grid: Vec<f64>,
    pub lp_norms: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_trials: u64,
    pub seed: u64,
}

/// Mergeable power sums `sum |x|^p` and `sum |x|^(2p)` for a grid of `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSums {
    pub p_grid: Vec<f64>,
    first: Vec<CompensatedSum>,
    second: Vec<CompensatedSum>,
    count: u64,
}

impl PowerSums {
    pub fn new(p_grid: &[f64]) -> Self {
        Self {
            p_grid: p_grid.to_vec(),
            first: vec![CompensatedSum::new(); p_grid.len()],
            second: vec![CompensatedSum::new(); p_grid.len()],
            count: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let a = x.abs();
        for (k, &p) in self.p_grid.iter().enumerate() {
            let v = a.powf(p);
            self.first[k].add(v);
            self.second[k].add(v * v);
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &PowerSums) {
        for k in 0..self.p_grid.len() {
            self.first[k].merge(&other.first[k]);
            self.second[k].merge(&other.second[k]);
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `mean |x|^p` for grid entry `k`.
    pub fn mean_power(&self, k: usize) -> f64 {
        self.first[k].value() / self.count as f64
    }

    pub fn curve(&self, seed: u64) -> MomentCurve {
        let n = self.count as f64;
        let mut lp_norms = Vec::with_capacity(self.p_grid.len());
        let mut std_errors = Vec::with_capacity(self.p_grid.len());
        for (k, &p) in self.p_grid.iter().enumerate() {
            let m1 = self.first[k].value() / n;
            let m2 = self.second[k].value() / n;
            let lp = m1.powf(1.0 / p);
            let se_mean = ((m2 - m1 * m1).max(0.0) / n).sqrt();
            let se = if m1 > 0.0 {
                lp / (p * m1) * se_mean
            } else {
                0.0
            };
            lp_norms.push(lp);
            std_errors.push(se);
        }
        MomentCurve {
            p_grid: self.p_grid.clone(),
            lp_norms,
            std_errors,
            n_trials: self.count,
            seed,
        }
    }
}

fn check_p_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() || p_grid.iter().any(|p| !(*p >= 1.0) || !p.is_finite()) {
        return Err(invalid("p_grid", "entries must be finite and >= 1"));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("p_grid", "must be strictly increasing"));
    }
    Ok(())
}

impl MomentCurve {
    pub fn from_samples(samples: &[f64], p_grid: &[f64], seed: u64) -> Result<Self> {
        check_p_grid(p_grid)?;
        let mut sums = PowerSums::new(p_grid);
        for &x in samples {
            sums.push(x);
        }
        Ok(sums.curve(seed))
    }

    pub fn ci(&self, k: usize) -> (f64, f64) {
        let half = Z_975 * self.std_errors[k];
        ((self.lp_norms[k] - half).max(0.0), self.lp_norms[k] + half)
    }

    /// Columns `p,estimate,ci_low,ci_high,n_trials,seed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "p,estimate,ci_low,ci_high,n_trials,seed")?;
        for k in 0..self.p_grid.len() {
            let (lo, hi) = self.ci(k);
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{},{}",
                self.p_grid[k], self.lp_norms[k], lo, hi, self.n_trials, self.seed
            )?;
        }
        Ok(())
    }
}

pub fn mc_moments<F>(
    statistic: F,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<MomentCurve>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    check_p_grid(p_grid)?;
    if n_trials < MIN_TRIALS {
        return Err(invalid(
            "n_trials",
            format!("must be at least {MIN_TRIALS}"),
        ));
    }
    MomentCurve::from_samples(&mc_samples(statistic, n_trials, seed), p_grid, seed)
}
