//! Configuration-driven experiment runner.
//!
//! Work is split into tasks whose seeds come from [`derive_seed`]; tasks run
//! on a fixed-size rayon pool and results are collected in task order, so
//! every output byte depends only on the config and the master seed.

mod config;
mod params;
mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::{ExperimentConfig, Subcommand, SCHEMA_VERSION};
pub use params::{Job, Statistic};
pub use plot::{emit_plot_script, PlotKind};

use crate::chaining::{
    bound_terms, chaining_estimate, dsn_cover_bound, dsn_gamma_bound, BetaTag, DistanceMatrix,
    DistanceTag, MethodTag, NetSequence,
};
use crate::chaos::{
    centered_sup_into, decoupling_check, uniform_dominance_from_samples, MatrixFamily, PowerSums,
    TailCurve,
};
use crate::circulant::{random_vx_family, rip_experiment, write_rip_csv};
use crate::error::{Error, Result};
use crate::norms::DenseMatrix;
use crate::rng::{derive_seed, rng_from_seed, ChaCha8Rng};
use crate::weibull::{ks_distance, psi_alpha_estimate, sample_ws, ws_lp_norm, AlphaLaw};

/// Monte Carlo trials per task.
pub const TRIAL_CHUNK: usize = 4096;

/// Suffix of the run record written next to the results.
pub const RECORD_SUFFIX: &str = ".run.json";

pub const CODE_VERSION: &str = concat!("hwcert ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            workers: 1,
            seed: None,
        }
    }
}

/// Everything needed to reproduce a run's result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Effective config; its `seed` equals `master_seed`.
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub code_version: String,
    /// Result files relative to the output directory.
    pub result_files: Vec<String>,
}

impl RunRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let record: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        record.config.validate()?;
        Ok(record)
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Result files written so far, removed again if the run fails.
struct Sink {
    dir: PathBuf,
    stem: String,
    written: Vec<String>,
}

impl Sink {
    fn create(&mut self, ext: &str) -> Result<BufWriter<File>> {
        let rel = format!("{}.{ext}", self.stem);
        let path = self.dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = File::create(&path)?;
        self.written.push(rel);
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut w = self.create("json")?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn discard(&self) {
        for rel in &self.written {
            let _ = fs::remove_file(self.dir.join(rel));
        }
    }
}

/// Run `config`, write its result files and a [`RunRecord`] sidecar
/// `<stem>.run.json`. On failure every file written by the run is removed.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    config.validate()?;
    if opts.workers == 0 {
        return Err(Error::Config("workers must be positive".into()));
    }
    let master_seed = match opts.seed {
        Some(s) => s,
        None => config.seed()?,
    };
    let config = config.clone().with_seed(master_seed);
    let job = params::Params::new(&config).job()?;
    let started_unix_ms = now_ms();
    fs::create_dir_all(&opts.out_dir)?;
    let mut sink = Sink {
        dir: opts.out_dir.clone(),
        stem: config.output_stem(),
        written: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| execute(&job, master_seed, &mut sink));
    if let Err(e) = outcome {
        sink.discard();
        return Err(e);
    }
    let record = RunRecord {
        config,
        master_seed,
        started_unix_ms,
        finished_unix_ms: now_ms(),
        code_version: CODE_VERSION.to_string(),
        result_files: sink.written.clone(),
    };
    let record_path = opts.out_dir.join(format!("{}{RECORD_SUFFIX}", sink.stem));
    let written = (|| -> Result<()> {
        let mut w = BufWriter::new(File::create(&record_path)?);
        serde_json::to_writer_pretty(&mut w, &record)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = written {
        sink.discard();
        let _ = fs::remove_file(&record_path);
        return Err(e);
    }
    Ok(record)
}

/// Re-run the config stored in a run record with its master seed.
pub fn replay(record_path: &Path, out_dir: &Path, workers: usize) -> Result<RunRecord> {
    let record = RunRecord::read(record_path)?;
    run(
        &record.config,
        &RunOptions {
            out_dir: out_dir.to_path_buf(),
            workers,
            seed: Some(record.master_seed),
        },
    )
}

/// Split `n_trials` into chunks of [`TRIAL_CHUNK`] with seeds
/// `derive_seed(seed, chunk)` and run `f(rng, count)` on each, in parallel,
/// returning results in chunk order.
fn chunked<T, F>(n_trials: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = n_trials.div_ceil(TRIAL_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = TRIAL_CHUNK.min(n_trials - c * TRIAL_CHUNK);
            f(&mut rng_from_seed(derive_seed(seed, c as u64)), count)
        })
        .collect()
}

fn draws<F>(n_trials: usize, seed: u64, statistic: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    chunked(n_trials, seed, |rng, count| {
        (0..count).map(|_| statistic(rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

fn execute(job: &Job, seed: u64, sink: &mut Sink) -> Result<()> {
    match job {
        Job::Sample { law, count } => run_sample(law, *count, seed, sink),
        Job::Moments {
            law,
            p_grid,
            trials,
        } => run_moments(law, p_grid, *trials, seed, sink),
        Job::Tails {
            statistic,
            thresholds,
            trials,
        } => run_tails(statistic, thresholds, *trials, seed, sink),
        Job::Chaos { .. } => run_chaos(job, seed, sink),
        Job::Decouple { .. } => run_decouple(job, seed, sink),
        Job::Gamma {
            alpha,
            spec,
            m,
            members,
        } => run_gamma(*alpha, *spec, *m, *members, seed, sink),
        Job::Rip {
            alpha,
            n,
            m_grid,
            s,
            delta_target,
            trials,
        } => {
            let rows = rip_experiment(*alpha, *n, m_grid, *s, *delta_target, *trials, seed)?;
            let mut w = sink.create("csv")?;
            write_rip_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn run_sample(law: &AlphaLaw, count: usize, seed: u64, sink: &mut Sink) -> Result<()> {
    let batch = sample_ws(law, count, seed)?;
    let mut w = sink.create("csv")?;
    writeln!(w, "index,value")?;
    for (i, v) in batch.values.iter().enumerate() {
        writeln!(w, "{i},{v:?}")?;
    }
    w.flush()?;
    drop(w);
    sink.json(&json!({
        "alpha": law.alpha(),
        "standardized": law.is_standardized(),
        "count": count,
        "seed": seed,
        "ks_distance": ks_distance(&batch),
        "psi_alpha_estimate": psi_alpha_estimate(&batch),
        "psi_alpha_analytic": law.psi_scale(),
    }))
}

fn run_moments(
    law: &AlphaLaw,
    p_grid: &[f64],
    trials: usize,
    seed: u64,
    sink: &mut Sink,
) -> Result<()> {
    let parts = chunked(trials, seed, |rng, count| {
        let mut sums = PowerSums::new(p_grid);
        for _ in 0..count {
            sums.push(law.sample(rng));
        }
        sums
    });
    let mut total = PowerSums::new(p_grid);
    for part in &parts {
        total.merge(part);
    }
    let curve = total.curve(seed);
    let mut w = sink.create("csv")?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    let exact = p_grid
        .iter()
        .map(|&p| Ok(ws_lp_norm(law.alpha(), p)? * law.scale()))
        .collect::<Result<Vec<_>>>()?;
    sink.json(&json!({
        "alpha": law.alpha(),
        "standardized": law.is_standardized(),
        "p_grid": p_grid,
        "lp_norms": curve.lp_norms,
        "std_errors": curve.std_errors,
        "exact_lp_norms": exact,
    }))
}

/// `P(|xi^2 - v| > t)` for the law with `v = E xi^2`.
fn square_centered_survival(law: &AlphaLaw, t: f64) -> f64 {
    let v = law.output_variance();
    let upper = law.survival((v + t).sqrt());
    let lower = if t < v {
        1.0 - law.survival((v - t).sqrt())
    } else {
        0.0
    };
    (upper + lower).min(1.0)
}

fn run_tails(
    statistic: &Statistic,
    thresholds: &[f64],
    trials: usize,
    seed: u64,
    sink: &mut Sink,
) -> Result<()> {
    let samples = draws(trials, seed, |rng| match statistic {
        Statistic::Constant(c) => *c,
        Statistic::Abs(law) => law.sample(rng).abs(),
        Statistic::SquareCentered(law) => {
            let x = law.sample(rng);
            (x * x - law.output_variance()).abs()
        }
    });
    let mut curve = TailCurve::from_samples(&samples, thresholds.to_vec(), seed)?;
    match statistic {
        Statistic::Constant(_) => {}
        Statistic::Abs(law) => {
            curve = curve.with_bound(thresholds.iter().map(|&t| law.survival(t)).collect())?
        }
        Statistic::SquareCentered(law) => {
            curve = curve.with_bound(
                thresholds
                    .iter()
                    .map(|&t| square_centered_survival(law, t))
                    .collect(),
            )?
        }
    }
    let mut w = sink.create("csv")?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run_chaos(job: &Job, seed: u64, sink: &mut Sink) -> Result<()> {
    let Job::Chaos {
        alpha,
        spec,
        m,
        members,
        thresholds,
        trials,
        fit_rule,
        min_survival,
    } = job
    else {
        unreachable!()
    };
    let (omega, family) = random_vx_family(*spec, *m, *members, derive_seed(seed, 0))?;
    let law = AlphaLaw::standardized(*alpha)?;
    let estimate = chaining_estimate(
        &family,
        *alpha,
        BetaTag::Infinity,
        MethodTag::EntropyIntegral,
    )?;
    let terms = bound_terms(&family, &estimate)?;
    let variance = law.output_variance();
    let mc_seed = derive_seed(seed, 1);
    let samples: Vec<f64> = chunked(*trials, mc_seed, |rng, count| {
        let mut xi = vec![0.0; family.cols()];
        let mut buf = vec![0.0; family.rows()];
        (0..count)
            .map(|_| {
                law.fill(rng, &mut xi);
                centered_sup_into(&family, &xi, variance, &mut buf)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let report = uniform_dominance_from_samples(
        &family,
        &law,
        &terms,
        &samples,
        thresholds,
        mc_seed,
        *min_survival,
        *fit_rule,
    )?;
    let mut w = sink.create("csv")?;
    report.curve.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    sink.json(&json!({
        "alpha": alpha,
        "omega": omega,
        "psi_scale": law.psi_scale(),
        "family_norms": family.norms(),
        "estimate": estimate,
        "terms": crate::chaining::BoundTerms {
            fitted_c: report.fitted_c,
            fitted_c1: report.fitted_c1,
            ..terms
        },
        "fit_rule": fit_rule,
        "anchor_threshold": report.curve.thresholds[report.anchor],
        "checked": report.checked,
        "informative": report.informative,
        "violations": report.violations,
        "far_tail_slope": report.far_tail_slope,
    }))
}

/// `count` random `n x n` matrices with entries uniform on `[-1, 1]`.
pub fn random_square_family(n: usize, count: usize, seed: u64) -> Result<MatrixFamily> {
    let mut rng = rng_from_seed(seed);
    MatrixFamily::new(
        (0..count)
            .map(|_| DenseMatrix::random_uniform(n, n, &mut rng))
            .collect(),
    )
}

fn run_decouple(job: &Job, seed: u64, sink: &mut Sink) -> Result<()> {
    let Job::Decouple {
        alpha,
        n,
        members,
        f,
        c_grid,
        trials,
        replicates,
    } = job
    else {
        unreachable!()
    };
    let law = AlphaLaw::standardized(*alpha)?;
    let reports = (0..*replicates as u64)
        .into_par_iter()
        .map(|r| {
            let family = random_square_family(*n, *members, derive_seed(seed, 2 * r))?;
            decoupling_check(
                &family,
                &law,
                *f,
                c_grid,
                *trials,
                derive_seed(seed, 2 * r + 1),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = sink.create("csv")?;
    writeln!(
        w,
        "replicate,seed,lhs,lhs_se,rhs_base,rhs_base_se,smallest_c"
    )?;
    for (r, rep) in reports.iter().enumerate() {
        let c = rep.smallest_c.map(|c| format!("{c:?}")).unwrap_or_default();
        writeln!(
            w,
            "{r},{},{:?},{:?},{:?},{:?},{c}",
            rep.seed, rep.lhs, rep.lhs_se, rep.rhs_base, rep.rhs_base_se
        )?;
    }
    w.flush()?;
    Ok(())
}

fn run_gamma(
    alpha: f64,
    spec: crate::circulant::SparseSpec,
    m: usize,
    members: usize,
    seed: u64,
    sink: &mut Sink,
) -> Result<()> {
    let (omega, family) = random_vx_family(spec, m, members, derive_seed(seed, 0))?;
    let mut estimates = Vec::new();
    for method in [MethodTag::EntropyIntegral, MethodTag::GreedyPartition] {
        for beta in [BetaTag::Two, BetaTag::Infinity] {
            estimates.push(chaining_estimate(&family, alpha, beta, method)?);
        }
    }
    let terms = bound_terms(&family, &estimates[1])?;
    let nets = NetSequence::build(&DistanceMatrix::new(&family, DistanceTag::Spectral)?);
    let cover = nets
        .radii
        .iter()
        .zip(&nets.nets)
        .map(|(&u, net)| {
            let bound = if u > 0.0 { Some(dsn_cover_bound(spec.s, m, spec.n, u)?) } else { None };
            Ok(json!({"radius": u, "net_size": net.len(), "log_net_size": (net.len() as f64).ln(), "cover_bound": bound}))
        })
        .collect::<Result<Vec<_>>>()?;
    let (g2, ga) = dsn_gamma_bound(spec.s, m, spec.n, alpha)?;
    sink.json(&json!({
        "alpha": alpha,
        "n": spec.n,
        "m": m,
        "s": spec.s,
        "omega": omega,
        "family_norms": family.norms(),
        "estimates": estimates,
        "bound_terms": terms,
        "dsn_gamma_bound": {"gamma2": g2, "gamma_alpha": ga},
        "cover": cover,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_all_trials_in_order() {
        let out = chunked(TRIAL_CHUNK * 2 + 5, 1, |_, count| count);
        assert_eq!(out, vec![TRIAL_CHUNK, TRIAL_CHUNK, 5]);
    }

    #[test]
    fn square_centered_survival_edges() {
        let law = AlphaLaw::raw(1.0).unwrap();
        assert!((square_centered_survival(&law, 0.0) - 1.0).abs() < 1e-15);
        let t = 5.0;
        assert!((square_centered_survival(&law, t) - (-(7.0f64).sqrt()).exp()).abs() < 1e-15);
    }
}
