//! Aggregation and the CSV/JSON writers. Column sets depend only on the config, so
//! identical configs give byte-identical files.

use std::fmt::Write as _;

use serde_json::json;

use super::{
    path_top, Check, ExperimentConfig, ExperimentSummary, TrialResult, AGGREGATE_CSV, TRIALS_CSV,
};
use crate::error::Result;

/// Under-estimation hit radius, in unpadded bins per axis.
pub const UNDER_HIT_BINS: f64 = 2.0;
/// Over-estimation hit radius, in padded bins per axis.
pub const OVER_HIT_BINS: f64 = 1.0;
/// Relative tolerance on the extra component's squared amplitude.
pub const OVER_RHO2_TOL: f64 = 0.15;

/// Median of the finite values, `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn fraction(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

fn rmse(sq: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in sq {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct UnderAggregate {
    pub k: usize,
    pub hit_frac: Option<f64>,
    pub freq_rmse: Option<f64>,
}

/// Per-size summary of all trials.
#[derive(Debug, Clone)]
pub struct SizeAggregate {
    pub size_index: usize,
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    /// Trials that recorded at least one estimation failure.
    pub with_errors: usize,
    /// Count of trials selecting each order `0..q_max`.
    pub histogram: Vec<usize>,
    pub frac_selected_p: Option<f64>,
    pub frac_chi_decreasing: Option<f64>,
    pub freq_rmse: Option<f64>,
    pub amp_rmse: Option<f64>,
    pub under: Vec<UnderAggregate>,
    pub over_dist_frac: Option<f64>,
    pub over_rho2_frac: Option<f64>,
    pub median_sup: Option<f64>,
    /// Median `L_k` per order on the estimate path.
    pub median_loss: Vec<Option<f64>>,
    /// Large-sample limit `sigma^2 sum a^2 + sum_{i>k} rho_i^2 / 2` for `k = 0..=P`.
    pub loss_limit: Vec<f64>,
}

impl SizeAggregate {
    pub fn from_trials(
        config: &ExperimentConfig,
        size_index: usize,
        trials: &[&TrialResult],
    ) -> Result<Self> {
        // fixed summation order, whatever order the trials arrive in
        let mut sorted = trials.to_vec();
        sorted.sort_by_key(|t| t.trial_index);
        let trials = &sorted[..];
        let (rows, cols) = config.sizes[size_index];
        let p = config.truth.len();
        let n = trials.len();

        let sel: Vec<_> = trials.iter().filter_map(|t| t.selection.as_ref()).collect();
        let mut histogram = vec![
            0;
            if config.has(Check::Selection) {
                config.q_max
            } else {
                0
            }
        ];
        for s in &sel {
            histogram[s.selected] += 1;
        }
        let has_sel = config.has(Check::Selection);
        let frac_selected_p = has_sel
            .then(|| fraction(sel.iter().filter(|s| s.selected == p).count(), n))
            .flatten();
        let frac_chi_decreasing = has_sel
            .then(|| fraction(sel.iter().filter(|s| s.chi_decreasing).count(), n))
            .flatten();

        let fits: Vec<_> = trials
            .iter()
            .filter_map(|t| t.at_true_order.as_ref())
            .collect();
        let freq_rmse = rmse(fits.iter().flat_map(|f| f.freq_sq_err.iter().copied()));
        let amp_rmse = rmse(fits.iter().flat_map(|f| f.amp_sq_err.iter().copied()));

        let under = config
            .under_orders()
            .into_iter()
            .map(|k| {
                let hits: Vec<_> = trials
                    .iter()
                    .filter_map(|t| t.under.iter().find(|u| u.k == k))
                    .collect();
                UnderAggregate {
                    k,
                    hit_frac: fraction(
                        hits.iter()
                            .filter(|u| u.max_err_bins <= UNDER_HIT_BINS)
                            .count(),
                        n,
                    ),
                    freq_rmse: rmse(hits.iter().map(|u| u.freq_sq_err / k as f64)),
                }
            })
            .collect();

        let has_over = config.has(Check::OverEst);
        let over: Vec<_> = trials.iter().filter_map(|t| t.over.as_ref()).collect();
        let over_dist_frac = has_over
            .then(|| {
                fraction(
                    over.iter()
                        .filter(|o| o.dist_padded_bins <= OVER_HIT_BINS)
                        .count(),
                    n,
                )
            })
            .flatten();
        let over_rho2_frac = has_over
            .then(|| {
                fraction(
                    over.iter()
                        .filter(|o| (o.rho2_ratio - 1.0).abs() <= OVER_RHO2_TOL)
                        .count(),
                    n,
                )
            })
            .flatten();

        let sups: Vec<f64> = trials.iter().filter_map(|t| t.sup_stat).collect();
        let median_sup = median(&sups);

        let k_count = path_top(config).map_or(0, |k| k + 1);
        let median_loss = (0..k_count)
            .map(|k| {
                let v: Vec<f64> = trials
                    .iter()
                    .filter_map(|t| t.losses.get(k).copied().flatten())
                    .collect();
                median(&v)
            })
            .collect();

        let loss_limit = if config.has(Check::LossLimits) {
            let noise = config.noise_model()?;
            let floor = noise.noise_variance();
            let comps = config.truth.clone().canonical();
            (0..=p)
                .map(|k| {
                    floor
                        + comps.components()[k..]
                            .iter()
                            .map(|c| c.rho * c.rho / 2.0)
                            .sum::<f64>()
                })
                .collect()
        } else {
            Vec::new()
        };

        Ok(SizeAggregate {
            size_index,
            rows,
            cols,
            trials: n,
            with_errors: trials.iter().filter(|t| !t.errors.is_empty()).count(),
            histogram,
            frac_selected_p,
            frac_chi_decreasing,
            freq_rmse,
            amp_rmse,
            under,
            over_dist_frac,
            over_rho2_frac,
            median_sup,
            median_loss,
            loss_limit,
        })
    }
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        Some(x) if x < 0.0 => "-inf".into(),
        Some(_) => "inf".into(),
        None => String::new(),
    }
}

/// One row per `(size, trial)`, sorted by index.
pub fn trials_csv(config: &ExperimentConfig, trials: &[TrialResult]) -> String {
    let p = config.truth.len();
    let k_count = path_top(config).map_or(0, |k| k + 1);
    let sel = config.has(Check::Selection);
    let under = config.under_orders();
    let over = config.has(Check::OverEst);
    let sup = config.has(Check::SupDecay);

    let mut head = vec!["size_index", "rows", "cols", "trial", "seed"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    if sel {
        head.push("selected".into());
    }
    head.extend((0..k_count).map(|k| format!("loss_k{k}")));
    if sel {
        head.extend((0..config.q_max).map(|k| format!("chi_k{k}")));
        head.push("chi_decreasing".into());
    }
    if k_count > p && p > 0 {
        for i in 0..p {
            for f in ["rho", "omega", "upsilon", "phi"] {
                head.push(format!("est_{f}_{i}"));
            }
        }
    }
    for k in &under {
        head.push(format!("under{k}_err_bins"));
    }
    if over {
        head.push("over_dist_bins".into());
        head.push("over_rho2_ratio".into());
    }
    if sup {
        head.push("sup_stat".into());
    }
    head.push("errors".into());

    let mut out = head.join(",");
    out.push('\n');
    for t in trials {
        let mut row = vec![
            t.size_index.to_string(),
            t.rows.to_string(),
            t.cols.to_string(),
            t.trial_index.to_string(),
            t.seed.to_string(),
        ];
        if sel {
            row.push(
                t.selection
                    .as_ref()
                    .map(|s| s.selected.to_string())
                    .unwrap_or_default(),
            );
        }
        row.extend((0..k_count).map(|k| num(t.losses.get(k).copied().flatten())));
        if sel {
            let s = t.selection.as_ref();
            row.extend((0..config.q_max).map(|k| num(s.and_then(|s| s.chi[k]))));
            row.push(s.map(|s| s.chi_decreasing.to_string()).unwrap_or_default());
        }
        if k_count > p && p > 0 {
            let comps = t.at_true_order.as_ref().map(|f| f.params.components());
            for i in 0..p {
                match comps.and_then(|c| c.get(i)) {
                    Some(c) => row.extend([c.rho, c.omega, c.upsilon, c.phi].map(|x| num(Some(x)))),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
        }
        for k in &under {
            row.push(num(t
                .under
                .iter()
                .find(|u| u.k == *k)
                .map(|u| u.max_err_bins)));
        }
        if over {
            row.push(num(t.over.as_ref().map(|o| o.dist_padded_bins)));
            row.push(num(t.over.as_ref().map(|o| o.rho2_ratio)));
        }
        if sup {
            row.push(num(t.sup_stat));
        }
        row.push(format!("\"{}\"", t.errors.join("; ").replace('"', "'")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row per size.
pub fn aggregate_csv(config: &ExperimentConfig, aggs: &[SizeAggregate]) -> String {
    let p = config.truth.len();
    let k_count = path_top(config).map_or(0, |k| k + 1);
    let sel = config.has(Check::Selection);
    let over = config.has(Check::OverEst);
    let limits = config.has(Check::LossLimits);

    let mut head: Vec<String> = ["size_index", "rows", "cols", "trials", "trials_with_errors"]
        .into_iter()
        .map(String::from)
        .collect();
    if sel {
        head.extend((0..config.q_max).map(|k| format!("selected_k{k}")));
        head.push("frac_selected_p".into());
        head.push("frac_chi_decreasing".into());
    }
    if p > 0 && k_count > 0 {
        head.push("freq_rmse".into());
        head.push("amp_rmse".into());
    }
    for k in config.under_orders() {
        head.push(format!("under{k}_hit_frac"));
        head.push(format!("under{k}_freq_rmse"));
    }
    if over {
        head.push("over_dist_frac".into());
        head.push("over_rho2_frac".into());
    }
    if config.has(Check::SupDecay) {
        head.push("median_sup_stat".into());
    }
    head.extend((0..k_count).map(|k| format!("median_loss_k{k}")));
    if limits {
        head.extend((0..=p).map(|k| format!("loss_limit_k{k}")));
    }

    let mut out = head.join(",");
    out.push('\n');
    for a in aggs {
        let mut row = vec![
            a.size_index.to_string(),
            a.rows.to_string(),
            a.cols.to_string(),
            a.trials.to_string(),
            a.with_errors.to_string(),
        ];
        if sel {
            row.extend(a.histogram.iter().map(|c| c.to_string()));
            row.push(num(a.frac_selected_p));
            row.push(num(a.frac_chi_decreasing));
        }
        if p > 0 && k_count > 0 {
            row.push(num(a.freq_rmse));
            row.push(num(a.amp_rmse));
        }
        for u in &a.under {
            row.push(num(u.hit_frac));
            row.push(num(u.freq_rmse));
        }
        if over {
            row.push(num(a.over_dist_frac));
            row.push(num(a.over_rho2_frac));
        }
        if config.has(Check::SupDecay) {
            row.push(num(a.median_sup));
        }
        row.extend(a.median_loss.iter().map(|v| num(*v)));
        if limits {
            row.extend(a.loss_limit.iter().map(|v| num(Some(*v))));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Per-trial wall times, kept apart from `trials.csv` so that file stays reproducible.
pub fn timing_csv(trials: &[TrialResult]) -> String {
    let mut out = String::from("size_index,trial,wall_time_s\n");
    for t in trials {
        let _ = writeln!(
            out,
            "{},{},{:e}",
            t.size_index, t.trial_index, t.wall_time_s
        );
    }
    out
}

/// Run manifest with the config hash. Contains no timestamps.
pub fn manifest(config: &ExperimentConfig, summary: &ExperimentSummary) -> Result<String> {
    let doc = json!({
        "name": config.name,
        "config_hash": summary.config_hash,
        "config": config,
        "xi": config.xi_value()?,
        "innovation_sigma2": config.noise_model()?.sigma2(),
        "cells": summary.trials.len(),
        "files": [TRIALS_CSV, AGGREGATE_CSV, super::TIMING_CSV],
        "version": env!("CARGO_PKG_VERSION"),
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}
