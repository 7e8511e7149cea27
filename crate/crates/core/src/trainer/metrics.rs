use std::io::{Read, Write};

use crate::losses::LossKind;
use crate::scalar::PROB_FLOOR;
use crate::Real;

pub const METRICS_HEADER: [&str; 8] = [
    "step",
    "loss_kind",
    "seed",
    "episode_return_mean",
    "policy_entropy",
    "loss_value",
    "dog_fraction",
    "val_accuracy",
];

/// One row of a training curve. Cells that do not apply to a run are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    /// Environment steps so far (RL) or completed epochs (supervised).
    pub step: usize,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub episode_return_mean: Option<Real>,
    pub policy_entropy: Real,
    pub loss_value: Real,
    pub dog_fraction: Option<Real>,
    pub val_accuracy: Option<Real>,
    /// Outcome counts of this update's rollout (not serialized).
    pub outcome_histogram: Vec<usize>,
}

/// Mean over states of `−Σ_j p_j log p_j`.
pub fn policy_entropy_metric<P: AsRef<[Real]>>(probs: &[P]) -> Real {
    if probs.is_empty() {
        return 0.0;
    }
    let total: Real = probs
        .iter()
        .map(|p| {
            -p.as_ref()
                .iter()
                .map(|&x| {
                    let x = x.max(PROB_FLOOR);
                    x * x.ln()
                })
                .sum::<Real>()
        })
        .sum();
    (total / probs.len() as Real).max(0.0)
}

fn cell(x: Option<Real>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.loss_kind.to_string(),
            r.seed.to_string(),
            cell(r.episode_return_mean),
            r.policy_entropy.to_string(),
            r.loss_value.to_string(),
            cell(r.dog_fraction),
            cell(r.val_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(msg: String) -> csv::Error {
    csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

pub fn read_metrics_csv<R: Read>(input: R) -> csv::Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(parse_err(format!("unexpected metrics header {header:?}")));
    }
    let num = |s: &str| -> csv::Result<Real> {
        s.parse().map_err(|_| parse_err(format!("bad number `{s}`")))
    };
    let opt = |s: &str| -> csv::Result<Option<Real>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(MetricsRow {
            step: rec[0].parse().map_err(|_| parse_err(format!("bad step `{}`", &rec[0])))?,
            loss_kind: rec[1].parse().map_err(parse_err)?,
            seed: rec[2].parse().map_err(|_| parse_err(format!("bad seed `{}`", &rec[2])))?,
            episode_return_mean: opt(&rec[3])?,
            policy_entropy: num(&rec[4])?,
            loss_value: num(&rec[5])?,
            dog_fraction: opt(&rec[6])?,
            val_accuracy: opt(&rec[7])?,
            outcome_histogram: Vec::new(),
        });
    }
    Ok(rows)
}
