//! Excess-risk measurement: estimate OPT on the full point set, train on
//! random samples, and score the trained solutions on the full set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{self, DataFormat, LabelColumn, Normalization};
use crate::objectives::{Objective, PointSet, Solution};
use crate::reduction::random_in_ball;
use crate::rng::{stream_id, SeededRng};
use crate::seeding::{adaptive_subspace_seed, dz_seed, SUBSPACE_SEEDING};
use crate::solvers::{em_center, em_subspace, SolverOptions};
use crate::table::{write_risk_csv, RiskRow};

/// Name recorded in run metadata for the center initialiser.
pub const CENTER_SEEDING: &str = "d-z-sampling";

const RESTART_TAG: u64 = 1;
const SAMPLE_TAG: u64 = 2;
const MIXTURE_TAG: u64 = 3;

/// Where the points come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// `n` points around `components` random centers with Gaussian noise of
    /// scale `sigma`, kept inside the unit ball. Written `mixture:N:D:C:SIGMA`.
    Mixture {
        n: usize,
        d: usize,
        components: usize,
        sigma: f64,
    },
    File {
        path: PathBuf,
        format: DataFormat,
        label_col: LabelColumn,
    },
}

impl DatasetSpec {
    /// Parses `mixture:N:D:C:SIGMA`; anything else is a file path whose
    /// format is taken from `format` or guessed from the extension.
    pub fn parse(id: &str, format: Option<DataFormat>, label_col: LabelColumn) -> Result<Self> {
        if let Some(rest) = id.strip_prefix("mixture:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let bad = || Error::Config(format!("dataset {id:?} is not mixture:N:D:C:SIGMA"));
            if parts.len() != 4 {
                return Err(bad());
            }
            let n: usize = parts[0].parse().map_err(|_| bad())?;
            let d: usize = parts[1].parse().map_err(|_| bad())?;
            let components: usize = parts[2].parse().map_err(|_| bad())?;
            let sigma: f64 = parts[3].parse().map_err(|_| bad())?;
            if n == 0 || d == 0 || components == 0 || !(sigma >= 0.0) {
                return Err(bad());
            }
            return Ok(DatasetSpec::Mixture {
                n,
                d,
                components,
                sigma,
            });
        }
        let path = PathBuf::from(id);
        Ok(DatasetSpec::File {
            format: format.unwrap_or_else(|| DataFormat::from_path(&path)),
            path,
            label_col,
        })
    }
}

/// Gaussian blobs around `components` centers drawn uniformly from the ball
/// of radius 0.7; noisy points falling outside the unit ball are redrawn.
pub fn mixture_dataset(
    n: usize,
    d: usize,
    components: usize,
    sigma: f64,
    seed: u64,
) -> Result<PointSet> {
    if n == 0 || d == 0 || components == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = SeededRng::new(seed, stream_id(&[MIXTURE_TAG]));
    let centers: Vec<Vec<f64>> = (0..components)
        .map(|_| {
            random_in_ball(d, &mut rng)
                .into_iter()
                .map(|x| 0.7 * x)
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &centers[rng.random_range(0..components)];
        loop {
            let p: Vec<f64> = c
                .iter()
                .map(|x| x + sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                data.extend(p);
                break;
            }
        }
    }
    PointSet::new(
        format!("mixture-{n}x{d}-c{components}-s{sigma}"),
        n,
        d,
        data,
    )
}

/// Provenance of the points a run used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub id: String,
    pub n: usize,
    pub d: usize,
    pub sha256: String,
    pub normalization: Normalization,
}

/// Loads (or generates) the dataset and normalises it into the unit ball.
pub fn load_dataset(spec: &DatasetSpec, id: &str, seed: u64) -> Result<(PointSet, DatasetInfo)> {
    let (raw, name) = match spec {
        DatasetSpec::Mixture {
            n,
            d,
            components,
            sigma,
        } => {
            let p = mixture_dataset(*n, *d, *components, *sigma, seed)?;
            let name = p.name().to_string();
            let raw = ingest::RawDataset {
                n: p.len(),
                d: p.dim(),
                data: p.as_slice().to_vec(),
                labels: None,
                source: name.clone(),
                sha256: None,
            };
            (raw, name)
        }
        DatasetSpec::File {
            path,
            format,
            label_col,
        } => {
            let raw = ingest::load(path, *format, *label_col)?;
            let name = id.to_string();
            (raw, name)
        }
    };
    let sha256 = raw.sha256.clone().unwrap_or_else(|| {
        let bytes: Vec<u8> = raw.data.iter().flat_map(|x| x.to_le_bytes()).collect();
        ingest::sha256_hex(&bytes)
    });
    let (points, normalization) = ingest::normalize_to_unit_ball(&raw)?;
    let points = PointSet::new(name, points.len(), points.dim(), points.as_slice().to_vec())?;
    let info = DatasetInfo {
        id: id.to_string(),
        n: points.len(),
        d: points.dim(),
        sha256,
        normalization,
    };
    Ok((points, info))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub data_format: Option<DataFormat>,
    pub label_col: LabelColumn,
    pub objective: Objective,
    pub k_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    pub opt_restarts: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Draw samples with replacement instead of as index subsets.
    pub with_replacement: bool,
    /// Let every trained solution compete for the OPT estimate, which makes
    /// every excess non-negative.
    pub pool_trained_into_opt: bool,
}

impl ExperimentConfig {
    pub fn new(
        dataset: impl Into<String>,
        objective: Objective,
        k_grid: Vec<usize>,
        n_grid: Vec<usize>,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            data_format: None,
            label_col: LabelColumn::None,
            objective,
            k_grid,
            n_grid,
            repeats: 5,
            opt_restarts: 10,
            seed: 0,
            solver: SolverOptions::default(),
            with_replacement: false,
            pool_trained_into_opt: false,
        }
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        if self.k_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::Config("k and n grids must be nonempty".into()));
        }
        if self.repeats == 0 || self.opt_restarts == 0 {
            return Err(Error::Config(
                "repeats and opt_restarts must be positive".into(),
            ));
        }
        if self.objective.z() == 0 {
            return Err(Error::Config("z must be positive".into()));
        }
        if let Objective::Subspace { j, .. } = self.objective {
            if j == 0 {
                return Err(Error::Config("j must be positive".into()));
            }
        }
        self.solver.validate()?;
        let kmax = *self.k_grid.iter().max().expect("nonempty");
        for &n in &self.n_grid {
            if n > size && !self.with_replacement {
                return Err(Error::SampleTooLarge { n, size });
            }
            if n < kmax {
                return Err(Error::InvalidK { k: kmax, n });
            }
        }
        if self.k_grid.contains(&0) {
            return Err(Error::InvalidK { k: 0, n: size });
        }
        Ok(())
    }
}

/// Seeded initialisation followed by EM. Returns the solution and its total
/// cost on `points`.
pub fn solve<R: Rng + ?Sized>(
    points: &PointSet,
    objective: Objective,
    k: usize,
    rng: &mut R,
    opts: &SolverOptions,
) -> Result<(Solution, f64)> {
    match objective {
        Objective::Center { z } => {
            let init = dz_seed(points, k, z, rng)?;
            let (sol, trace) = em_center(points, &init, opts)?;
            Ok((Solution::Centers(sol), trace.final_cost()))
        }
        Objective::Subspace { j, z } => {
            let init = adaptive_subspace_seed(points, k, j, z, rng)?;
            let (sol, trace) = em_subspace(points, &init, opts)?;
            Ok((Solution::Subspaces(sol), trace.final_cost()))
        }
    }
}

fn restart_rng(seed: u64, k: usize, restart: usize) -> SeededRng {
    SeededRng::new(seed, stream_id(&[RESTART_TAG, k as u64, restart as u64]))
}

/// Best of `restarts` runs; restart `r` for a given `k` always uses the same
/// random stream, whatever point set it is applied to.
pub fn best_of_restarts(
    points: &PointSet,
    objective: Objective,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(Solution, Vec<f64>)> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be positive".into()));
    }
    let runs: Vec<(Solution, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| solve(points, objective, k, &mut restart_rng(seed, k, r), opts))
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(a.cmp(&b)))
        .expect("at least one restart");
    let sol = runs.into_iter().nth(best).expect("index in range").0;
    Ok((sol, totals))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptEstimate {
    pub k: usize,
    pub solution: Solution,
    /// Best per-point cost found.
    pub opt_value: f64,
    /// Per-point cost of every restart.
    pub restart_values: Vec<f64>,
}

/// Minimum per-point cost over `restarts` seeded runs on the full set.
pub fn estimate_opt_full(
    points: &PointSet,
    objective: Objective,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<OptEstimate> {
    let (solution, totals) = best_of_restarts(points, objective, k, restarts, seed, opts)?;
    let size = points.len() as f64;
    let restart_values: Vec<f64> = totals.iter().map(|t| t / size).collect();
    let opt_value = restart_values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(OptEstimate {
        k,
        solution,
        opt_value,
        restart_values,
    })
}

/// Sample of `n` indices out of `size`: distinct and sorted without
/// replacement, i.i.d. uniform with replacement.
pub fn draw_sample<R: Rng + ?Sized>(
    size: usize,
    n: usize,
    with_replacement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if with_replacement {
        return Ok((0..n).map(|_| rng.random_range(0..size)).collect());
    }
    if n > size {
        return Err(Error::SampleTooLarge { n, size });
    }
    let mut idx = index::sample(rng, size, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// One row per `(k, n, repeat)`: train on a sample, score on all of
/// `points`, subtract the OPT estimate for that `k`.
pub fn excess_risk_curve(
    points: &PointSet,
    config: &ExperimentConfig,
    opts: &[OptEstimate],
) -> Result<Vec<RiskRow>> {
    config.validate(points.len())?;
    let opt_for: BTreeMap<usize, f64> = opts.iter().map(|o| (o.k, o.opt_value)).collect();
    let mut cells = Vec::new();
    for &k in &config.k_grid {
        if !opt_for.contains_key(&k) {
            return Err(Error::Config(format!("no OPT estimate for k={k}")));
        }
        for &n in &config.n_grid {
            for repeat in 0..config.repeats {
                cells.push((k, n, repeat));
            }
        }
    }
    let size = points.len() as f64;
    let mut rows: Vec<RiskRow> = cells
        .into_par_iter()
        .map(|(k, n, repeat)| {
            let mut rng = SeededRng::new(
                config.seed,
                stream_id(&[SAMPLE_TAG, k as u64, n as u64, repeat as u64]),
            );
            let idx = draw_sample(points.len(), n, config.with_replacement, &mut rng)?;
            let sample = points.subset(&idx)?;
            let (sol, totals) = best_of_restarts(
                &sample,
                config.objective,
                k,
                config.opt_restarts,
                config.seed,
                &config.solver,
            )?;
            let sample_total = totals.iter().copied().fold(f64::INFINITY, f64::min);
            let (_, full_total) = sol.cost(points)?;
            let full_cost = full_total / size;
            Ok(RiskRow {
                dataset: points.name().to_string(),
                objective: config.objective.name().to_string(),
                z: config.objective.z(),
                j: config.objective.j(),
                k,
                n,
                repeat,
                seed: config.seed,
                sample_cost: sample_total / n as f64,
                full_cost,
                excess: full_cost - opt_for[&k],
            })
        })
        .collect::<Result<_>>()?;
    if config.pool_trained_into_opt {
        let mut pooled = opt_for.clone();
        for r in &rows {
            let v = pooled.get_mut(&r.k).expect("k present");
            *v = v.min(r.full_cost);
        }
        for r in &mut rows {
            r.excess = r.full_cost - pooled[&r.k];
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptSummary {
    pub k: usize,
    pub opt_value: f64,
    pub restart_values: Vec<f64>,
}

/// Sidecar metadata written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub tool_version: &'static str,
    pub dataset: DatasetInfo,
    pub config: ExperimentConfig,
    pub sampling: &'static str,
    pub center_seeding: &'static str,
    pub subspace_seeding: &'static str,
    pub excess_definition: &'static str,
    pub opt: Vec<OptSummary>,
    pub rows: usize,
    pub csv_sha256: String,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<RiskRow>,
    pub meta: RunMeta,
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
}

/// `<out>.meta.json`
pub fn meta_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Load, normalise, estimate OPT per `k`, measure the risk curve, then write
/// the CSV and its metadata sidecar.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let spec = DatasetSpec::parse(&config.dataset, config.data_format, config.label_col)?;
    let (points, info) = load_dataset(&spec, &config.dataset, config.seed)?;
    config.validate(points.len())?;
    let opts: Vec<OptEstimate> = config
        .k_grid
        .iter()
        .map(|&k| {
            estimate_opt_full(
                &points,
                config.objective,
                k,
                config.opt_restarts,
                config.seed,
                &config.solver,
            )
        })
        .collect::<Result<_>>()?;
    let rows = excess_risk_curve(&points, config, &opts)?;
    write_risk_csv(out, &rows)?;
    let csv_bytes = std::fs::read(out).map_err(|e| Error::io(out, e))?;
    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION"),
        dataset: info,
        config: config.clone(),
        sampling: if config.with_replacement {
            "uniform-with-replacement"
        } else {
            "uniform-without-replacement"
        },
        center_seeding: CENTER_SEEDING,
        subspace_seeding: SUBSPACE_SEEDING,
        excess_definition:
            "cost(P, trained solution)/|P| - min over restarts of cost(P, full-set solution)/|P|",
        opt: opts
            .iter()
            .map(|o| OptSummary {
                k: o.k,
                opt_value: o.opt_value,
                restart_values: o.restart_values.clone(),
            })
            .collect(),
        rows: rows.len(),
        csv_sha256: ingest::sha256_hex(&csv_bytes),
    };
    let meta_path = meta_path_for(out);
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;
    Ok(RunOutput {
        rows,
        meta,
        csv_path: out.to_path_buf(),
        meta_path,
    })
}
