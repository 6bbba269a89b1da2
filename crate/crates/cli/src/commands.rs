//! Subcommand bodies. Each returns the JSON document it prints.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use adaclust_core::data::{
    generate_heterogeneous, qq_quantiles, read_assignments, read_csv, read_model, sample_from_params, write_assignments,
    write_csv, write_model, CsvOptions, GeneratorSpec, ModelFile,
};
use adaclust_core::evaluation::nmi;
use adaclust_core::{rng, AttributeKind, Error, FamilyClass};
use serde::Serialize;

use crate::run::{cluster_sizes, fit_restarts, Algo, RunConfig, Selection};
use crate::CliError;

pub const MODEL_FILE: &str = "model.json";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_MODEL_FILE: &str = "truth_model.json";
pub const TRUTH_LABELS_FILE: &str = "truth_labels.csv";
pub const GENERATOR_FILE: &str = "generator.json";
pub const QQ_FILE: &str = "qq.csv";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

pub fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

#[derive(Debug, Serialize)]
pub struct ColumnReport {
    pub name: String,
    pub kind: AttributeKind,
    pub family: FamilyClass,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

#[derive(Debug, Serialize)]
pub struct DetectReport {
    pub rows: usize,
    pub columns: Vec<ColumnReport>,
}

pub fn detect(input: &Path, label_col: Option<&str>) -> Result<DetectReport, CliError> {
    let ds = read_csv(
        input,
        &CsvOptions {
            label_col: label_col.map(str::to_owned),
        },
    )?;
    let names = ds.names.clone().unwrap_or_default();
    let columns = ds
        .kinds
        .iter()
        .enumerate()
        .map(|(j, kind)| {
            let fam = adaclust_core::FamilySpec::for_kind(kind.modelled())?;
            Ok(ColumnReport {
                name: names.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
                kind: *kind,
                family: fam.class,
                alpha_lo: fam.alpha_lo,
                alpha_hi: fam.alpha_hi,
            })
        })
        .collect::<Result<_, Error>>()?;
    Ok(DetectReport {
        rows: ds.n_rows(),
        columns,
    })
}

/// Run summary; field order is the file layout.
#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub algo: Algo,
    pub k: usize,
    pub n: usize,
    pub j: usize,
    pub restarts: usize,
    pub failed_restarts: usize,
    pub seed: u64,
    pub selection: Selection,
    pub best_restart: usize,
    pub selection_score: f64,
    pub iterations: usize,
    pub stop: String,
    pub quasi_loglik: Option<f64>,
    pub per_sample_quasi_loglik: Option<f64>,
    pub inertia: f64,
    pub objective: Option<f64>,
    pub nmi: Option<f64>,
    pub cluster_sizes: Vec<usize>,
    pub alpha: Vec<f64>,
    pub kappa: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub threads: usize,
}

#[derive(Debug)]
pub struct FitOutput {
    pub summary: FitSummary,
    /// First failures, `(restart, message)`, for logging.
    pub failures: Vec<(usize, String)>,
    pub wall: Duration,
}

/// Fits with restarts and writes the model, assignments and summary to `out`.
pub fn fit(input: &Path, label_col: Option<&str>, config: &RunConfig, out: &Path) -> Result<FitOutput, CliError> {
    config.validate()?;
    let start = Instant::now();
    let ds = read_csv(
        input,
        &CsvOptions {
            label_col: label_col.map(str::to_owned),
        },
    )?;
    let (values, families) = ds.prepare()?;
    let outcome = fit_restarts(values.view(), &families, config)?;
    let best = &outcome.best;
    let n = values.nrows();

    ensure_dir(out)?;
    let config_value = serde_json::to_value(config).expect("config serializes");
    write_model(
        out.join(MODEL_FILE),
        &ModelFile::new(&best.params, best.quasi_loglik, config_value, config.seed),
    )?;
    write_assignments(out.join(ASSIGNMENTS_FILE), &best.assign, best.responsibilities.as_ref().map(|r| r.view()))?;
    let nmi = match &ds.labels {
        Some(truth) => Some(nmi(truth, &best.assign)?),
        None => None,
    };
    let summary = FitSummary {
        algo: config.algo,
        k: config.k,
        n,
        j: values.ncols(),
        restarts: config.restarts,
        failed_restarts: outcome.failures.len(),
        seed: config.seed,
        selection: config.algo.selection(),
        best_restart: best.restart,
        selection_score: best.score,
        iterations: best.iterations,
        stop: best.stop.clone(),
        quasi_loglik: best.quasi_loglik,
        per_sample_quasi_loglik: best.quasi_loglik.map(|l| l / n as f64),
        inertia: best.inertia,
        objective: best.objective,
        nmi,
        cluster_sizes: cluster_sizes(&best.assign, config.k),
        alpha: best.params.alpha.clone(),
        kappa: best.params.kappa.clone(),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    let wall = start.elapsed();
    write_json(
        &out.join(TIMING_FILE),
        &Timing {
            wall_seconds: wall.as_secs_f64(),
            threads: rayon_threads(config.threads),
        },
    )?;
    Ok(FitOutput {
        summary,
        failures: outcome
            .failures
            .iter()
            .take(10)
            .map(|(r, e)| (*r, e.to_string()))
            .collect(),
        wall,
    })
}

fn rayon_threads(requested: usize) -> usize {
    if requested == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        requested
    }
}

#[derive(Debug, Serialize)]
pub struct GenerateReport {
    pub n: usize,
    pub j: usize,
    pub k: usize,
    pub seed: u64,
    pub members: Vec<adaclust_core::data::Member>,
    pub kinds: Vec<AttributeKind>,
    pub files: Vec<PathBuf>,
}

/// Synthetic heterogeneous data from a generator spec (JSON; missing fields
/// take their defaults, no file means all defaults).
pub fn generate(spec_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<GenerateReport, CliError> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str::<GeneratorSpec>(&text).map_err(|e| Error::Parse {
                row: e.line(),
                column: String::new(),
                message: e.to_string(),
            })?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let g = generate_heterogeneous(&spec)?;
    ensure_dir(out)?;
    let files = [DATA_FILE, TRUTH_MODEL_FILE, TRUTH_LABELS_FILE, GENERATOR_FILE].map(|f| out.join(f));
    write_csv(&files[0], &g.dataset)?;
    let spec_value = serde_json::to_value(&spec).expect("spec serializes");
    write_model(&files[1], &ModelFile::new(&g.params, None, spec_value, spec.seed))?;
    write_assignments(&files[2], &g.labels, None)?;
    write_json(&files[3], &spec)?;
    Ok(GenerateReport {
        n: spec.n,
        j: spec.j,
        k: spec.k,
        seed: spec.seed,
        members: g.members,
        kinds: g.dataset.kinds,
        files: files.to_vec(),
    })
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub k_true: usize,
    pub k_pred: usize,
    pub nmi: f64,
}

/// NMI between the `cluster` column of an assignments file and the
/// `truth_col` column of `truth`.
pub fn eval(assignments: &Path, truth: &Path, truth_col: &str) -> Result<EvalReport, CliError> {
    let pred = read_assignments(assignments, "cluster")?;
    let truth = read_assignments(truth, truth_col)?;
    let distinct = |v: &[usize]| v.iter().collect::<std::collections::BTreeSet<_>>().len();
    Ok(EvalReport {
        n: pred.len(),
        k_true: distinct(&truth),
        k_pred: distinct(&pred),
        nmi: nmi(&truth, &pred)?,
    })
}

#[derive(Debug, Serialize)]
pub struct QqAttribute {
    pub name: String,
    pub max_abs_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct QqReport {
    pub quantiles: usize,
    pub samples: usize,
    pub attributes: Vec<QqAttribute>,
}

/// Quantiles of each data column against a sample drawn from the model.
/// Every model attribute must be one of the named generator members.
pub fn qq(
    data: &Path,
    model: &Path,
    label_col: Option<&str>,
    quantiles: usize,
    seed: u64,
    out: &Path,
) -> Result<QqReport, CliError> {
    let ds = read_csv(
        data,
        &CsvOptions {
            label_col: label_col.map(str::to_owned),
        },
    )?;
    let params = read_model(model)?.params()?;
    if params.n_attributes() != ds.n_cols() {
        return Err(Error::LengthMismatch {
            left: params.n_attributes(),
            right: ds.n_cols(),
        }
        .into());
    }
    let (values, _) = ds.prepare()?;
    let n = values.nrows();
    let (simulated, _) = sample_from_params(&params, n, &mut rng::from_seed(seed))?;
    let names = ds.names.clone().unwrap_or_default();
    let mut csv = String::from("attribute,index,p,data,model\n");
    let mut attributes = Vec::new();
    for j in 0..values.ncols() {
        let pairs = qq_quantiles(&values.column(j).to_vec(), &simulated.column(j).to_vec(), quantiles)?;
        let name = names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
        let mut worst: f64 = 0.0;
        for (i, (a, b)) in pairs.iter().enumerate() {
            let p = i as f64 / (quantiles - 1) as f64;
            csv.push_str(&format!("{name},{i},{p},{a},{b}\n"));
            worst = worst.max((a - b).abs());
        }
        attributes.push(QqAttribute {
            name,
            max_abs_deviation: worst,
        });
    }
    ensure_dir(out)?;
    let path = out.join(QQ_FILE);
    fs::write(&path, csv).map_err(|e| Error::Io { path, source: e })?;
    Ok(QqReport {
        quantiles,
        samples: n,
        attributes,
    })
}
