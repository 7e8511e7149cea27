use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use scope_lab_core::env::{
    buffer_class_histogram, dataset_as_mdp, generate_dataset, make_binary_maze, make_sparse_chain, Dataset,
    Environment, Transition, DOG, RIGHT,
};
use scope_lab_core::losses::LossKind;
use scope_lab_core::nn::evaluate;
use scope_lab_core::trainer::{
    predict, save_checkpoint, train_a2c, train_ppo, train_supervised, write_metrics_csv, Algo, MetricsRow, RlOutput,
    TrainConfig,
};
use scope_lab_core::verify::{run_identity_suite, CheckResult};
use scope_lab_core::{Mlp, Tape};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::plot::{emit_plot, PlotError};
use crate::precision::{precision_report, PrecisionError, PrecisionReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("trial {loss} seed {seed}: {msg}")]
    Trial { loss: LossKind, seed: u64, msg: String },
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{0} trial(s) failed; results of the others were kept")]
    Partial(usize),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Io {
        path: path.to_owned(),
        source: io::Error::other(e),
    }
}

/// One completed `(loss, seed)` trial.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub loss: LossKind,
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    /// Named scalar results, in a fixed order per experiment.
    pub stats: Vec<(String, f64)>,
}

impl TrialRecord {
    pub fn stat(&self, name: &str) -> Option<f64> {
        self.stats.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

/// A row of `summary.csv`; `seed` is `None` for the across-seed median.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub loss: LossKind,
    pub seed: Option<u64>,
    pub statistic: String,
    pub value: f64,
}

pub const SUMMARY_HEADER: [&str; 4] = ["loss_kind", "seed", "statistic", "value"];

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub checks: Vec<CheckResult>,
}

impl RunReport {
    /// False only when identity checks ran and one of them failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn median(&self, loss: LossKind, statistic: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.loss == loss && r.seed.is_none() && r.statistic == statistic)
            .map(|r| r.value)
    }
}

/// Median; the mean of the middle pair for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean policy entropy over the first quarter of the rows (at least one row).
pub fn early_entropy(rows: &[MetricsRow]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let q = (rows.len() / 4).max(1);
    rows[..q].iter().map(|r| r.policy_entropy).sum::<f64>() / q as f64
}

/// Completed episodes of a transition stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub length: usize,
    pub ret: f64,
    pub last_action: usize,
    /// Ended in a terminal state rather than by truncation.
    pub reached_terminal: bool,
}

fn episodes(transitions: &[Transition], terminal: impl Fn(&Transition) -> bool) -> Vec<Episode> {
    let mut out = Vec::new();
    let (mut length, mut ret) = (0, 0.0);
    for t in transitions {
        length += 1;
        ret += t.reward;
        if t.done {
            out.push(Episode {
                length,
                ret,
                last_action: t.action,
                reached_terminal: terminal(t),
            });
            length = 0;
            ret = 0.0;
        }
    }
    out
}

fn write_episodes(path: &Path, eps: &[Episode]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["episode", "length", "return", "last_action", "reached_terminal"])
        .map_err(csv_err(path))?;
    for (k, e) in eps.iter().enumerate() {
        w.write_record([
            k.to_string(),
            e.length.to_string(),
            e.ret.to_string(),
            e.last_action.to_string(),
            (e.reached_terminal as u8).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_predictions(path: &Path, data: &Dataset, preds: &[usize]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["index", "label", "prediction"]).map_err(csv_err(path))?;
    for (&i, &p) in data.test.iter().zip(preds) {
        w.write_record([i.to_string(), data.labels[i].to_string(), p.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<(), ExperimentError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_metrics_csv(rows, BufWriter::new(f)).map_err(csv_err(path))
}

/// Stem shared by every per-trial file.
pub fn trial_stem(loss: LossKind, seed: u64) -> String {
    format!("{loss}_seed{seed}")
}

struct Trial<'a> {
    config: &'a ExperimentConfig,
    train: TrainConfig,
    dir: PathBuf,
}

impl Trial<'_> {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir
            .join(format!("{}{suffix}", trial_stem(self.train.loss_kind, self.train.seed)))
    }

    fn fail(&self, msg: impl ToString) -> ExperimentError {
        ExperimentError::Trial {
            loss: self.train.loss_kind,
            seed: self.train.seed,
            msg: msg.to_string(),
        }
    }

    fn train_rl<E: Environment>(&self, env: E) -> Result<RlOutput, ExperimentError> {
        let out = match self.train.algo {
            Algo::A2c => train_a2c(&self.train, env),
            Algo::Ppo => train_ppo(&self.train, env),
            Algo::Supervised => unreachable!("validated by the config"),
        };
        out.map_err(|e| self.fail(e))
    }

    fn finish(&self, metrics: &[MetricsRow], params: &Mlp) -> Result<(), ExperimentError> {
        write_rows(&self.path(".csv"), metrics)?;
        let ckpt = self.path(".ckpt");
        save_checkpoint(&ckpt, params, &self.train).map_err(|e| self.fail(e))
    }

    fn run(&self) -> Result<TrialRecord, ExperimentError> {
        let seed = self.train.seed;
        let mut stats: Vec<(String, f64)> = Vec::new();
        let metrics = match self.config.experiment {
            ExperimentKind::MazeImbalance => {
                let m = &self.config.maze;
                let env = make_binary_maze(m.reward_cat, m.reward_dog).map_err(|e| self.fail(e))?;
                let hist_env = env.clone();
                let out = self.train_rl(env)?;
                let hist = buffer_class_histogram(&out.transitions, &hist_env);
                let p_dog = evaluate(&out.params, &[1.0], &mut Tape::new())
                    .map_err(|e| self.fail(e))?
                    .probs[DOG];
                let last = out.metrics.last().ok_or_else(|| self.fail("no updates ran"))?;
                stats.push(("final_return".into(), last.episode_return_mean.unwrap_or(f64::NAN)));
                stats.push(("final_dog_prob".into(), p_dog));
                stats.push(("buffer_dog_fraction".into(), hist.fraction(DOG)));
                stats.push(("early_entropy".into(), early_entropy(&out.metrics)));
                write_episodes(&self.path("_episodes.csv"), &episodes(&out.transitions, |_| true))?;
                self.finish(&out.metrics, &out.params)?;
                out.metrics
            }
            ExperimentKind::SparseChain => {
                let c = &self.config.chain;
                let env = make_sparse_chain(c.length, c.step_penalty, c.goal_reward, c.max_steps)
                    .map_err(|e| self.fail(e))?;
                let n = c.length;
                let out = self.train_rl(env)?;
                let at_goal = |t: &Transition| t.action == RIGHT && t.state.observation[n - 2] == 1.0;
                let eps = episodes(&out.transitions, at_goal);
                let last = out.metrics.last().ok_or_else(|| self.fail("no updates ran"))?;
                stats.push(("final_return".into(), last.episode_return_mean.unwrap_or(f64::NAN)));
                stats.push(("goal_episodes".into(), eps.iter().filter(|e| e.reached_terminal).count() as f64));
                stats.push(("episodes".into(), eps.len() as f64));
                stats.push(("early_entropy".into(), early_entropy(&out.metrics)));
                write_episodes(&self.path("_episodes.csv"), &eps)?;
                self.finish(&out.metrics, &out.params)?;
                out.metrics
            }
            ExperimentKind::Classification => {
                let data = generate_dataset(&self.config.dataset.spec(seed)).map_err(|e| self.fail(e))?;
                let (metrics, params) = if self.train.algo == Algo::Supervised {
                    let out = train_supervised(&self.train, &data).map_err(|e| self.fail(e))?;
                    stats.push(("best_val_accuracy".into(), out.best_val_accuracy));
                    stats.push(("best_epoch".into(), out.best_epoch as f64));
                    (out.metrics, out.best_params)
                } else {
                    let env = dataset_as_mdp(Arc::new(data.clone()), seed).map_err(|e| self.fail(e))?;
                    let out = self.train_rl(env)?;
                    (out.metrics, out.params)
                };
                let preds = predict(&params, data.test.iter().map(|&i| data.features[i].as_slice()))
                    .map_err(|e| self.fail(e))?;
                let labels: Vec<usize> = data.test.iter().map(|&i| data.labels[i]).collect();
                let report: PrecisionReport =
                    precision_report(&preds, &labels, data.num_classes).map_err(|e: PrecisionError| self.fail(e))?;
                let hits = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
                stats.push(("test_accuracy".into(), hits as f64 / labels.len().max(1) as f64));
                stats.push(("mean_precision".into(), report.mean));
                stats.push(("std_precision".into(), report.std));
                for (k, p) in report.per_class_precision.iter().enumerate() {
                    stats.push((format!("precision_class{k}"), *p));
                }
                write_predictions(&self.path("_predictions.csv"), &data, &preds)?;
                self.finish(&metrics, &params)?;
                metrics
            }
            ExperimentKind::IdentitySuite => unreachable!("handled before trials"),
        };
        Ok(TrialRecord {
            loss: self.train.loss_kind,
            seed,
            metrics,
            stats,
        })
    }
}

/// Per-trial rows followed by one median row per `(loss, statistic)`.
pub fn summarize(trials: &[TrialRecord], losses: &[LossKind]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &loss in losses {
        let mine: Vec<&TrialRecord> = trials.iter().filter(|t| t.loss == loss).collect();
        for t in &mine {
            for (name, value) in &t.stats {
                rows.push(SummaryRow {
                    loss,
                    seed: Some(t.seed),
                    statistic: name.clone(),
                    value: *value,
                });
            }
        }
        let Some(first) = mine.first() else { continue };
        for (name, _) in &first.stats {
            let xs: Vec<f64> = mine.iter().filter_map(|t| t.stat(name)).collect();
            rows.push(SummaryRow {
                loss,
                seed: None,
                statistic: name.clone(),
                value: median(&xs),
            });
        }
    }
    rows
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.loss.to_string(),
            r.seed.map_or_else(|| "median".to_owned(), |s| s.to_string()),
            r.statistic.clone(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard deviation of precision (seed medians), one column per loss.
fn write_table(path: &Path, report: &RunReport, losses: &[LossKind]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["statistic".to_owned()];
    header.extend(losses.iter().map(|l| l.to_string()));
    w.write_record(&header).map_err(csv_err(path))?;
    for (label, stat) in [("Mean", "mean_precision"), ("Standard Deviation", "std_precision")] {
        let mut rec = vec![label.to_owned()];
        rec.extend(
            losses
                .iter()
                .map(|&l| report.median(l, stat).map_or_else(String::new, |v| format!("{v:.4}"))),
        );
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_checks<W: Write>(checks: &[(u64, CheckResult)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "check", "trials", "max_error", "tolerance", "passed"])?;
    for (seed, c) in checks {
        w.write_record([
            seed.to_string(),
            c.name.clone(),
            c.trials.to_string(),
            format!("{:e}", c.max_error),
            format!("{:e}", c.tolerance),
            c.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every `(loss, seed)` trial of `config` on up to `jobs` threads and
/// writes per-trial files, `metrics.csv`, `summary.csv` and any plots under
/// the output directory.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<RunReport, ExperimentError> {
    config.validate()?;
    let out = config.output_dir.clone();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut report = RunReport {
        out_dir: out.clone(),
        ..RunReport::default()
    };

    if config.experiment == ExperimentKind::IdentitySuite {
        let checks: Vec<(u64, CheckResult)> = config
            .seeds
            .iter()
            .flat_map(|&s| run_identity_suite(s).into_iter().map(move |c| (s, c)))
            .collect();
        let path = out.join("identity.csv");
        let f = File::create(&path).map_err(io_err(&path))?;
        write_checks(&checks, BufWriter::new(f)).map_err(csv_err(&path))?;
        report.checks = checks.into_iter().map(|(_, c)| c).collect();
        return Ok(report);
    }

    let trial_dir = out.join("trials");
    fs::create_dir_all(&trial_dir).map_err(io_err(&trial_dir))?;
    if config.experiment == ExperimentKind::Classification {
        let data_dir = out.join("datasets");
        fs::create_dir_all(&data_dir).map_err(io_err(&data_dir))?;
        for &seed in &config.seeds {
            let spec = config.dataset.spec(seed);
            let path = data_dir.join(format!("seed{}.csv", spec.seed));
            let data = generate_dataset(&spec).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            data.export_csv(&path).map_err(csv_err(&path))?;
        }
    }

    let mut trials = Vec::new();
    for &loss in &config.losses {
        for &seed in &config.seeds {
            trials.push(Trial {
                config,
                train: config.train_config(loss, seed)?,
                dir: trial_dir.clone(),
            });
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let results: Vec<Result<TrialRecord, ExperimentError>> = pool.install(|| trials.par_iter().map(Trial::run).collect());

    let mut failures = 0;
    for r in results {
        match r {
            Ok(t) => report.trials.push(t),
            Err(e) => {
                eprintln!("error: {e}");
                failures += 1;
            }
        }
    }

    let rows: Vec<MetricsRow> = report.trials.iter().flat_map(|t| t.metrics.iter().cloned()).collect();
    write_rows(&out.join("metrics.csv"), &rows)?;
    report.summary = summarize(&report.trials, &config.losses);
    let path = out.join("summary.csv");
    let f = File::create(&path).map_err(io_err(&path))?;
    write_summary(&report.summary, BufWriter::new(f)).map_err(csv_err(&path))?;
    if config.experiment == ExperimentKind::Classification {
        write_table(&out.join("table.csv"), &report, &config.losses)?;
    }
    if !config.plots.is_empty() {
        let plot_dir = out.join("plots");
        fs::create_dir_all(&plot_dir).map_err(io_err(&plot_dir))?;
        for column in &config.plots {
            emit_plot(&out.join("metrics.csv"), column, &plot_dir.join(format!("{column}.svg")))?;
        }
    }
    if failures > 0 {
        return Err(ExperimentError::Partial(failures));
    }
    Ok(report)
}
