//! Monte Carlo experiment runner: convergence curves, beampatterns, the
//! sum-SINR/sensing tradeoff and fronthaul load.
//!
//! Every experiment produces flat [`Row`]s (one CSV schema for all kinds)
//! and a [`Summary`] with the config echo, seeds, infeasible-trial counts and
//! per-group means. Trials run in parallel; rows come back in a fixed order
//! (Δ, method, trial, iteration), so output is byte-identical across runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::run_centralized_with;
use crate::error::{Error, Result};
use crate::metrics::{self, Method};
use crate::model::{Scenario, SystemConfig};
use crate::twostage::{run_two_stage_with, RunRecord, TwoStageOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Convergence,
    Beampattern,
    Tradeoff,
    Fronthaul,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] =
        [ExperimentKind::Convergence, ExperimentKind::Beampattern, ExperimentKind::Tradeoff, ExperimentKind::Fronthaul];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Beampattern => "beampattern",
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::Fronthaul => "fronthaul",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidExperiment(format!("unknown experiment `{s}`")))
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: SystemConfig,
    pub trials: usize,
    /// Index of the first trial; trial `t` always uses the same channel
    /// draw for a given seed, so a single trial can be re-run on its own.
    pub first_trial: u64,
    pub delta_list: Vec<f64>,
    /// Two-stage iterations (convergence: curve length; otherwise the
    /// design budget).
    pub iterations: usize,
    pub options: TwoStageOptions,
    /// MM iterations for the centralized reference.
    pub centralized_iterations: usize,
    /// Trial whose channel draw is shared by every Δ of the beampattern;
    /// `None` picks the first draw (from `first_trial`) feasible at every Δ.
    pub beampattern_trial: Option<u64>,
    pub grid_deg: Vec<f64>,
    pub ntx_list: Vec<usize>,
    /// `(M, K)` combinations for the fronthaul sweep.
    pub fronthaul_pairs: Vec<(usize, usize)>,
}

pub const DEFAULT_CENTRALIZED_ITERATIONS: usize = 300;

impl ExperimentSpec {
    /// Defaults for `kind` around `config`.
    pub fn new(kind: ExperimentKind, config: SystemConfig) -> ExperimentSpec {
        let (delta_list, iterations) = match kind {
            ExperimentKind::Convergence => (vec![30.0, 40.0], 10),
            ExperimentKind::Beampattern => (vec![40.0, 46.0], config.n_iter),
            ExperimentKind::Tradeoff => ((0..8).map(|i| 30.0 + 2.0 * i as f64).collect(), config.n_iter),
            ExperimentKind::Fronthaul => (vec![config.delta_db], config.n_iter),
        };
        ExperimentSpec {
            kind,
            trials: 100,
            first_trial: 0,
            delta_list,
            iterations,
            options: TwoStageOptions::default(),
            centralized_iterations: DEFAULT_CENTRALIZED_ITERATIONS,
            beampattern_trial: None,
            grid_deg: metrics::default_grid(),
            ntx_list: (3..=10).map(|p| 1usize << p).collect(),
            fronthaul_pairs: vec![(4, 2), (4, 8), (16, 2), (16, 8)],
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let bad = |msg: &str| Err(Error::InvalidExperiment(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.kind != ExperimentKind::Fronthaul && self.delta_list.is_empty() {
            return bad("delta list must not be empty");
        }
        if self.delta_list.iter().any(|d| !d.is_finite()) {
            return bad("delta values must be finite");
        }
        if self.kind == ExperimentKind::Beampattern && self.grid_deg.is_empty() {
            return bad("beampattern grid must not be empty");
        }
        if self.kind == ExperimentKind::Fronthaul {
            if self.ntx_list.is_empty() || self.fronthaul_pairs.is_empty() {
                return bad("fronthaul sweep needs at least one Ntx and one (M, K) pair");
            }
            if self.ntx_list.contains(&0) || self.fronthaul_pairs.iter().any(|&(m, k)| m == 0 || k == 0) {
                return bad("fronthaul sweep values must be positive");
            }
        }
        Ok(())
    }

    fn trial_indices(&self) -> impl Iterator<Item = u64> + Clone {
        self.first_trial..self.first_trial + self.trials as u64
    }
}

/// One CSV data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: ExperimentKind,
    pub method: Method,
    pub seed: u64,
    pub trial: u64,
    pub iteration: usize,
    #[serde(rename = "delta_dB")]
    pub delta_db: f64,
    /// `key=value` pairs separated by `;`, empty when unused.
    pub params: String,
    pub metric_name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleCount {
    pub method: Method,
    #[serde(rename = "delta_dB")]
    pub delta_db: f64,
    pub count: usize,
    pub trials: Vec<u64>,
}

/// Mean of the rows sharing `(method, Δ, iteration, params, metric)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanEntry {
    pub method: Method,
    #[serde(rename = "delta_dB")]
    pub delta_db: f64,
    pub iteration: usize,
    pub params: String,
    pub metric_name: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub trials: Vec<u64>,
    pub infeasible: Vec<InfeasibleCount>,
    pub means: Vec<MeanEntry>,
}

impl Summary {
    pub fn mean(&self, method: Method, delta_db: f64, iteration: usize, metric: &str) -> Option<&MeanEntry> {
        self.means.iter().find(|e| {
            e.method == method && e.delta_db == delta_db && e.iteration == iteration && e.metric_name == metric
        })
    }

    pub fn infeasible_count(&self, method: Method, delta_db: f64) -> usize {
        self.infeasible
            .iter()
            .find(|c| c.method == method && c.delta_db == delta_db)
            .map_or(0, |c| c.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub summary: Summary,
}

/// Per-trial result: rows, or the trial was globally infeasible.
type TrialRows = Option<Vec<Row>>;

struct RowFactory<'a> {
    spec: &'a ExperimentSpec,
    method: Method,
    trial: u64,
    delta_db: f64,
}

impl RowFactory<'_> {
    fn row(&self, iteration: usize, params: String, metric: &str, value: f64) -> Row {
        Row {
            experiment: self.spec.kind,
            method: self.method,
            seed: self.spec.config.seed,
            trial: self.trial,
            iteration,
            delta_db: self.delta_db,
            params,
            metric_name: metric.to_string(),
            value,
        }
    }
}

fn absorb_infeasible<T>(result: Result<T>) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::GlobalInfeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

fn record_rows(f: &RowFactory<'_>, record: &RunRecord, curve: bool) -> Vec<Row> {
    let mut rows = Vec::new();
    if curve {
        rows.push(f.row(0, String::new(), "sum_sinr", record.initial_sum_sinr));
        rows.push(f.row(0, String::new(), "objective", record.initial_objective));
        for it in &record.iterations {
            rows.push(f.row(it.iteration, String::new(), "sum_sinr", it.sum_sinr));
            rows.push(f.row(it.iteration, String::new(), "objective", it.objective));
            rows.push(f.row(it.iteration, String::new(), "ssnr", it.ssnr));
        }
    } else if let Some(last) = record.iterations.last() {
        rows.push(f.row(last.iteration, String::new(), "sum_sinr", last.sum_sinr));
        rows.push(f.row(last.iteration, String::new(), "ssnr", last.ssnr));
    } else {
        rows.push(f.row(0, String::new(), "sum_sinr", record.initial_sum_sinr));
    }
    let last = record.iterations.last().map_or(0, |it| it.iteration);
    rows.push(f.row(last, String::new(), "surrogate_infeasible", f64::from(u8::from(record.surrogate_infeasible()))));
    rows
}

fn convergence_trial(spec: &ExperimentSpec, scenario: &Scenario, delta_db: f64) -> Result<TrialRows> {
    let sc = scenario.with_delta_db(delta_db);
    let f = RowFactory { spec, method: Method::Tsdba, trial: sc.trial, delta_db };
    Ok(absorb_infeasible(run_two_stage_with(&sc, spec.iterations, spec.options))?
        .map(|(_, record)| record_rows(&f, &record, true)))
}

fn tradeoff_trial(spec: &ExperimentSpec, scenario: &Scenario, delta_db: f64, method: Method) -> Result<TrialRows> {
    let sc = scenario.with_delta_db(delta_db);
    let f = RowFactory { spec, method, trial: sc.trial, delta_db };
    let record = match method {
        Method::Tsdba => absorb_infeasible(run_two_stage_with(&sc, spec.iterations, spec.options))?.map(|r| r.1),
        Method::Centralized => absorb_infeasible(run_centralized_with(&sc, spec.centralized_iterations))?.map(|r| r.1),
    };
    Ok(record.map(|r| record_rows(&f, &r, false)))
}

fn beampattern_rows(spec: &ExperimentSpec, scenario: &Scenario, delta_db: f64) -> Result<TrialRows> {
    let sc = scenario.with_delta_db(delta_db);
    let f = RowFactory { spec, method: Method::Tsdba, trial: sc.trial, delta_db };
    let Some((state, record)) = absorb_infeasible(run_two_stage_with(&sc, spec.iterations, spec.options))? else {
        return Ok(None);
    };
    let precoders = state.precoders(&sc.projection);
    let spacing = sc.config.spacing_over_lambda;
    let iteration = record.iterations.len();
    let mut rows = record_rows(&f, &record, false);
    for (m, fm) in precoders.iter().enumerate() {
        let target = sc.config.theta_deg[m];
        let gain = metrics::beampattern(fm, &[target], spacing)[0];
        rows.push(f.row(iteration, format!("ap={};angle_deg={target}", m + 1), "target_gain_db", gain));
        for (angle, g) in spec.grid_deg.iter().zip(metrics::beampattern(fm, &spec.grid_deg, spacing)) {
            rows.push(f.row(iteration, format!("ap={};angle_deg={angle}", m + 1), "gain_db", g));
        }
    }
    Ok(Some(rows))
}

fn fronthaul_rows(spec: &ExperimentSpec) -> Vec<Row> {
    let mut rows = Vec::new();
    for &(m, k) in &spec.fronthaul_pairs {
        for method in [Method::Tsdba, Method::Centralized] {
            for &ntx in &spec.ntx_list {
                let f = RowFactory { spec, method, trial: spec.first_trial, delta_db: spec.config.delta_db };
                let load = metrics::fronthaul_load(method, m, k, ntx, spec.iterations);
                rows.push(f.row(spec.iterations, format!("Ntx={ntx};M={m};K={k}"), "fronthaul_scalars", load as f64));
            }
        }
    }
    rows
}

/// Draws searched when the beampattern trial is chosen automatically.
const BEAMPATTERN_SEARCH: u64 = 1000;

fn first_feasible_trial(spec: &ExperimentSpec) -> Result<u64> {
    for t in spec.first_trial..spec.first_trial + BEAMPATTERN_SEARCH {
        let scenario = Scenario::build(&spec.config, t)?;
        let mut feasible = true;
        for &delta in &spec.delta_list {
            let sc = scenario.with_delta_db(delta);
            if absorb_infeasible(run_two_stage_with(&sc, spec.iterations, spec.options))?.is_none() {
                feasible = false;
                break;
            }
        }
        if feasible {
            return Ok(t);
        }
    }
    Err(Error::GlobalInfeasible)
}

/// Runs the experiment; see the module docs for the output layout.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let cfg = &spec.config;
    let deltas = &spec.delta_list;

    // (method, Δ index, trial) jobs, each yielding rows or "infeasible".
    let outcomes: Vec<(Method, usize, u64, TrialRows)> = match spec.kind {
        ExperimentKind::Fronthaul => vec![(Method::Tsdba, 0, spec.first_trial, Some(fronthaul_rows(spec)))],
        ExperimentKind::Beampattern => {
            let trial = match spec.beampattern_trial {
                Some(t) => t,
                None => first_feasible_trial(spec)?,
            };
            let scenario = Scenario::build(cfg, trial)?;
            deltas
                .par_iter()
                .enumerate()
                .map(|(d, &delta)| Ok((Method::Tsdba, d, scenario.trial, beampattern_rows(spec, &scenario, delta)?)))
                .collect::<Result<_>>()?
        }
        ExperimentKind::Convergence | ExperimentKind::Tradeoff => {
            let methods: &[Method] = if spec.kind == ExperimentKind::Tradeoff {
                &[Method::Tsdba, Method::Centralized]
            } else {
                &[Method::Tsdba]
            };
            let scenarios: Vec<Scenario> =
                spec.trial_indices().collect::<Vec<_>>().into_par_iter().map(|t| Scenario::build(cfg, t)).collect::<Result<_>>()?;
            let mut jobs: Vec<(Method, usize, &Scenario)> = Vec::new();
            for d in 0..deltas.len() {
                for &m in methods {
                    jobs.extend(scenarios.iter().map(|s| (m, d, s)));
                }
            }
            jobs.into_par_iter()
                .map(|(method, d, sc)| {
                    let rows = match spec.kind {
                        ExperimentKind::Convergence => convergence_trial(spec, sc, deltas[d])?,
                        _ => tradeoff_trial(spec, sc, deltas[d], method)?,
                    };
                    Ok((method, d, sc.trial, rows))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut infeasible: Vec<InfeasibleCount> = Vec::new();
    let mut rows = Vec::new();
    for (method, d, trial, result) in outcomes {
        let delta_db = if spec.kind == ExperimentKind::Fronthaul { cfg.delta_db } else { deltas[d] };
        match result {
            Some(r) => rows.extend(r),
            None => match infeasible.iter_mut().find(|c| c.method == method && c.delta_db == delta_db) {
                Some(c) => {
                    c.count += 1;
                    c.trials.push(trial);
                }
                None => infeasible.push(InfeasibleCount { method, delta_db, count: 1, trials: vec![trial] }),
            },
        }
    }
    let summary = Summary {
        experiment: spec.kind,
        spec: spec.clone(),
        seed: cfg.seed,
        trials: match spec.kind {
            ExperimentKind::Beampattern => {
                rows.first().map(|r| vec![r.trial]).unwrap_or_else(|| spec.beampattern_trial.into_iter().collect())
            }
            ExperimentKind::Fronthaul => Vec::new(),
            _ => spec.trial_indices().collect(),
        },
        infeasible,
        means: group_means(&rows),
    };
    Ok(ExperimentOutput { rows, summary })
}

/// Arithmetic means per `(method, Δ, iteration, params, metric)`, in order
/// of first appearance.
pub fn group_means(rows: &[Row]) -> Vec<MeanEntry> {
    // Δ is keyed by its bit pattern
    type Key<'a> = (Method, u64, usize, &'a str, &'a str);
    let mut order: Vec<Key> = Vec::new();
    let mut acc: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.method, r.delta_db.to_bits(), r.iteration, r.params.as_str(), r.metric_name.as_str());
        let e = acc.entry(key).or_insert_with(|| {
            order.push(key);
            (0.0, 0)
        });
        e.0 += r.value;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|key| {
            let (sum, count) = acc[&key];
            MeanEntry {
                method: key.0,
                delta_db: f64::from_bits(key.1),
                iteration: key.2,
                params: key.3.to_string(),
                metric_name: key.4.to_string(),
                mean: sum / count as f64,
                count,
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[Row], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<kind>.csv` and `<kind>_summary.json` into `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let kind = output.summary.experiment.as_str();
    let csv_path = dir.join(format!("{kind}.csv"));
    let json_path = dir.join(format!("{kind}_summary.json"));
    write_csv(&output.rows, BufWriter::new(File::create(&csv_path)?))?;
    let mut json = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut json, &output.summary)?;
    json.write_all(b"\n")?;
    json.flush()?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_config;

    fn small(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(kind, default_config());
        spec.trials = 2;
        spec.iterations = 2;
        spec.centralized_iterations = 3;
        spec.options.inner_steps = 2;
        spec
    }

    #[test]
    fn kind_parses() {
        assert_eq!("Tradeoff".parse::<ExperimentKind>().unwrap(), ExperimentKind::Tradeoff);
        assert!("fig4".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn fronthaul_rows_hold_reference_counts() {
        let out = run_experiment(&small(ExperimentKind::Fronthaul)).unwrap();
        let find = |method: Method, params: &str| {
            out.rows.iter().find(|r| r.method == method && r.params == params).map(|r| r.value)
        };
        let spec = small(ExperimentKind::Fronthaul);
        assert_eq!(out.rows.len(), 2 * spec.ntx_list.len() * spec.fronthaul_pairs.len());
        // two iterations here; the reference uses three
        assert_eq!(find(Method::Tsdba, "Ntx=32;M=4;K=2"), Some(96.0));
        assert_eq!(find(Method::Centralized, "Ntx=32;M=4;K=2"), Some(512.0));
    }

    #[test]
    fn means_match_rows() {
        let mut spec = small(ExperimentKind::Convergence);
        spec.delta_list = vec![30.0];
        let out = run_experiment(&spec).unwrap();
        let vals: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.iteration == 2 && r.metric_name == "sum_sinr")
            .map(|r| r.value)
            .collect();
        assert_eq!(vals.len(), 2);
        let entry = out.summary.mean(Method::Tsdba, 30.0, 2, "sum_sinr").unwrap();
        assert_eq!(entry.count, 2);
        assert!((entry.mean - (vals[0] + vals[1]) / 2.0).abs() <= 1e-12 * entry.mean.abs());
    }

    #[test]
    fn infeasible_trials_are_counted_not_averaged() {
        let mut spec = small(ExperimentKind::Tradeoff);
        spec.delta_list = vec![60.0];
        let out = run_experiment(&spec).unwrap();
        assert!(out.rows.is_empty());
        assert_eq!(out.summary.infeasible_count(Method::Tsdba, 60.0), 2);
        assert_eq!(out.summary.infeasible_count(Method::Centralized, 60.0), 2);
    }

    #[test]
    fn single_trial_rerun_reproduces_rows() {
        let mut spec = small(ExperimentKind::Convergence);
        spec.delta_list = vec![30.0];
        let all = run_experiment(&spec).unwrap();
        spec.first_trial = 1;
        spec.trials = 1;
        let one = run_experiment(&spec).unwrap();
        let from_all: Vec<&Row> = all.rows.iter().filter(|r| r.trial == 1).collect();
        assert_eq!(from_all.len(), one.rows.len());
        assert!(from_all.iter().zip(&one.rows).all(|(a, b)| *a == b));
    }

    #[test]
    fn rejects_empty_spec() {
        let mut spec = small(ExperimentKind::Tradeoff);
        spec.trials = 0;
        assert!(matches!(run_experiment(&spec), Err(Error::InvalidExperiment(_))));
        let mut spec = small(ExperimentKind::Beampattern);
        spec.delta_list.clear();
        assert!(matches!(run_experiment(&spec), Err(Error::InvalidExperiment(_))));
    }
}
