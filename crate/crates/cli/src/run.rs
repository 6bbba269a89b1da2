//! Independent restarts fanned out over a worker pool and reduced in a fixed order.

use adaclust_core::evaluation::{partition_inertia, per_sample_quasi_loglik};
use adaclust_core::hard::{fit_gmom, fit_kmeans, GmomConfig, KMeansConfig, MomentForm};
use adaclust_core::soft::{self, hard_assignments, PriorStrength};
use adaclust_core::{rng, Error, FamilySpec, MixtureParams, Mode, SoftConfig};
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Adacluster,
    BregmanSoft,
    Gmm,
    Kmeans,
    GmomHc,
    GmomLight,
}

/// What picks the winning restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Highest quasi-log-likelihood.
    QuasiLoglik,
    /// Lowest within-cluster squared Euclidean distance.
    Inertia,
    /// Lowest CUGMoM objective.
    Objective,
}

impl Selection {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Selection::QuasiLoglik => a > b,
            Selection::Inertia | Selection::Objective => a < b,
        }
    }
}

impl Algo {
    pub fn selection(self) -> Selection {
        match self {
            Algo::Adacluster | Algo::BregmanSoft | Algo::Gmm => Selection::QuasiLoglik,
            Algo::Kmeans => Selection::Inertia,
            Algo::GmomHc | Algo::GmomLight => Selection::Objective,
        }
    }

    pub fn is_soft(self) -> bool {
        self.selection() == Selection::QuasiLoglik
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: Algo,
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub mode: Mode,
    pub seed: u64,
    pub prior: PriorStrength,
    /// Pseudo-samples per seed for the GMoM variants in MAP mode.
    pub prior_weight: f64,
    pub moment_form: MomentForm,
    /// Worker threads; 0 uses every core. Never affects results.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algo::Adacluster,
            k: 2,
            restarts: 1000,
            max_iter: 1000,
            tol: 1e-8,
            mode: Mode::Map,
            seed: 0,
            prior: PriorStrength::default(),
            prior_weight: 1.0,
            moment_form: MomentForm::Centered,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.k == 0 {
            return Err(CliError::usage("--k must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(CliError::usage("--restarts must be at least 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(CliError::usage("--tol must be a finite non-negative number"));
        }
        let p = &self.prior;
        if [p.b_mu, p.a_kappa, p.b_kappa, self.prior_weight]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(CliError::usage("prior hyper-parameters must be finite and non-negative"));
        }
        Ok(())
    }

    fn soft(&self, seed: u64) -> SoftConfig {
        SoftConfig {
            mode: self.mode,
            homogeneous: self.algo == Algo::BregmanSoft,
            gaussian_only: self.algo == Algo::Gmm,
            max_iter: self.max_iter,
            tol: self.tol,
            seed,
            prior: self.prior,
            stop_on_stable_assignments: true,
        }
    }

    fn gmom(&self, seed: u64) -> GmomConfig {
        GmomConfig {
            max_iter: self.max_iter,
            seed,
            light: self.algo == Algo::GmomLight,
            form: self.moment_form,
            mode: self.mode,
            prior_weight: self.prior_weight,
            ..GmomConfig::default()
        }
    }
}

/// Result of one restart.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub restart: usize,
    pub assign: Vec<usize>,
    pub params: MixtureParams,
    pub responsibilities: Option<Array2<f64>>,
    /// L̂ under `params`; always set for the soft algorithms.
    pub quasi_loglik: Option<f64>,
    pub inertia: f64,
    /// CUGMoM objective for the GMoM variants.
    pub objective: Option<f64>,
    /// Value the selection criterion compares.
    pub score: f64,
    pub iterations: usize,
    pub stop: String,
}

/// Gaussian mixture read off a hard partition: centroids, proportions and the
/// pooled within-cluster variance per attribute.
fn partition_params(data: ArrayView2<f64>, assign: &[usize], centroids: Array2<f64>) -> MixtureParams {
    let (n, j) = data.dim();
    let k = centroids.nrows();
    let mut counts = vec![0usize; k];
    let mut ss = vec![0.0; j];
    for (x, &h) in data.outer_iter().zip(assign) {
        counts[h] += 1;
        for c in 0..j {
            let d = x[c] - centroids[[h, c]];
            ss[c] += d * d;
        }
    }
    MixtureParams {
        pi: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        mu: centroids,
        kappa: ss.iter().map(|s| (s / n as f64).max(soft::KAPPA_FLOOR)).collect(),
        alpha: vec![0.0; j],
        families: vec![FamilySpec::gaussian(); j],
    }
}

/// One fit with the restart's own seed.
pub fn fit_once(
    data: ArrayView2<f64>,
    families: &[FamilySpec],
    config: &RunConfig,
    restart: usize,
) -> adaclust_core::Result<Candidate> {
    let seed = rng::restart_seed(config.seed, restart as u64);
    let candidate = match config.algo {
        Algo::Adacluster | Algo::BregmanSoft | Algo::Gmm => {
            let fit = soft::fit(data, families, config.k, &config.soft(seed))?;
            let assign = hard_assignments(fit.responsibilities.view());
            Candidate {
                restart,
                inertia: partition_inertia(data, &assign)?,
                assign,
                quasi_loglik: Some(fit.quasi_loglik),
                score: fit.quasi_loglik,
                objective: None,
                iterations: fit.iterations,
                stop: serde_json::to_value(fit.stop)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                params: fit.params,
                responsibilities: Some(fit.responsibilities),
            }
        }
        Algo::Kmeans => {
            let fit = fit_kmeans(
                data,
                config.k,
                &KMeansConfig {
                    max_iter: config.max_iter,
                    seed,
                },
            )?;
            let converged = fit.iterations < config.max_iter;
            Candidate {
                restart,
                params: partition_params(data, &fit.assign, fit.centroids),
                assign: fit.assign,
                responsibilities: None,
                quasi_loglik: None,
                inertia: fit.inertia,
                objective: None,
                score: fit.inertia,
                iterations: fit.iterations,
                stop: if converged { "converged" } else { "max_iter" }.into(),
            }
        }
        Algo::GmomHc | Algo::GmomLight => {
            let fit = fit_gmom(data, families, config.k, &config.gmom(seed))?;
            Candidate {
                restart,
                assign: fit.assign,
                params: fit.params,
                responsibilities: None,
                quasi_loglik: None,
                inertia: fit.inertia,
                objective: Some(fit.objective),
                score: fit.objective,
                iterations: fit.iterations,
                stop: if fit.converged { "converged" } else { "max_iter" }.into(),
            }
        }
    };
    if !candidate.score.is_finite() {
        return Err(Error::NonFinite(format!("restart {restart} selection score")));
    }
    Ok(candidate)
}

#[derive(Debug)]
pub struct RestartOutcome {
    pub best: Candidate,
    /// Failed restarts in index order.
    pub failures: Vec<(usize, Error)>,
}

struct Tally {
    best: Option<Candidate>,
    failures: Vec<(usize, Error)>,
}

impl Tally {
    fn empty() -> Tally {
        Tally {
            best: None,
            failures: Vec::new(),
        }
    }

    fn one(restart: usize, result: adaclust_core::Result<Candidate>) -> Tally {
        match result {
            Ok(c) => Tally {
                best: Some(c),
                failures: Vec::new(),
            },
            Err(e) => Tally {
                best: None,
                failures: vec![(restart, e)],
            },
        }
    }

    // (score, restart index) is a total order, so the reduction tree shape
    // cannot change the winner.
    fn merge(mut self, other: Tally, selection: Selection) -> Tally {
        self.best = match (self.best, other.best) {
            (Some(a), Some(b)) => {
                let b_wins = selection.better(b.score, a.score) || (b.score == a.score && b.restart < a.restart);
                Some(if b_wins { b } else { a })
            }
            (a, b) => a.or(b),
        };
        self.failures.extend(other.failures);
        self
    }
}

/// Runs `config.restarts` fits and keeps the best by the algorithm's criterion.
/// Fails only when every restart fails, with the lowest-index error.
pub fn fit_restarts(
    data: ArrayView2<f64>,
    families: &[FamilySpec],
    config: &RunConfig,
) -> Result<RestartOutcome, CliError> {
    config.validate()?;
    if families.len() != data.ncols() {
        return Err(Error::LengthMismatch {
            left: families.len(),
            right: data.ncols(),
        }
        .into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let selection = config.algo.selection();
    let tally = pool.install(|| {
        (0..config.restarts)
            .into_par_iter()
            .map(|r| Tally::one(r, fit_once(data, families, config, r)))
            .reduce(Tally::empty, |a, b| a.merge(b, selection))
    });
    let mut failures = tally.failures;
    failures.sort_by_key(|(r, _)| *r);
    match tally.best {
        Some(mut best) => {
            if best.quasi_loglik.is_none() {
                best.quasi_loglik = per_sample_quasi_loglik(data, &best.params)
                    .ok()
                    .map(|v| v * data.nrows() as f64)
                    .filter(|v| v.is_finite());
            }
            Ok(RestartOutcome { best, failures })
        }
        None => Err(failures.into_iter().next().expect("at least one restart").1.into()),
    }
}

/// Cluster sizes of a partition with `k` labels.
pub fn cluster_sizes(assign: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &h in assign {
        sizes[h] += 1;
    }
    sizes
}

