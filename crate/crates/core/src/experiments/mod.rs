//! Seeded Monte Carlo harness.
//!
//! Every `(size, trial)` cell derives its own seed from the master seed, synthesizes
//! one observation and runs the checks enabled in the config. Cells share no state,
//! so they run in parallel and are aggregated after sorting by index.

mod config;
mod report;

use std::f64::consts::TAU;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{sigma2_for_snr, Check, ExperimentConfig, InnovationConfig, XiMode, MIN_SIDE};
pub use report::{
    aggregate_csv, median, trials_csv, SizeAggregate, UnderAggregate, OVER_HIT_BINS, OVER_RHO2_TOL,
    UNDER_HIT_BINS,
};

use crate::error::{Error, Result};
use crate::estimator::{LseResult, RefineOptions};
use crate::model::{angle_diff, mirror_freq, Field2D, ParamVector, SinusoidParams};
use crate::selector::{selection_path, SelectionResult};
use crate::spectrum::{periodogram, sup_statistic, top_peaks_in, PeakQuery};
use crate::synth::synthesize;

/// Seed of one cell, a pure function of the master seed and the cell indices.
pub fn trial_seed(master_seed: u64, size_index: usize, trial_index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((size_index as u64) << 32) | trial_index as u64);
    rng.next_u64()
}

/// Per-axis frequency error in units of the given bin widths, taking the mirror
/// representative that matches best. Returns `(max over axes in bins, euclidean
/// error in radians)`.
pub fn freq_error(est: (f64, f64), truth: (f64, f64), bins: (f64, f64)) -> (f64, f64) {
    let measure = |f: (f64, f64)| {
        let dw = angle_diff(f.0, truth.0);
        let dv = angle_diff(f.1, truth.1);
        ((dw / bins.0).max(dv / bins.1), dw.hypot(dv))
    };
    let a = measure(est);
    let b = measure(mirror_freq(est.0, est.1));
    if b.0 < a.0 {
        b
    } else {
        a
    }
}

/// Greedy nearest-frequency matching of truth components to estimates. Returns
/// `(truth_index, estimate_index)` pairs and the unmatched estimate indices.
fn match_components(
    truth: &[SinusoidParams],
    est: &[SinusoidParams],
) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut pairs = Vec::new();
    let mut free_t: Vec<usize> = (0..truth.len()).collect();
    let mut free_e: Vec<usize> = (0..est.len()).collect();
    while !free_t.is_empty() && !free_e.is_empty() {
        let mut best = (f64::INFINITY, 0, 0);
        for (ti, &t) in free_t.iter().enumerate() {
            for (ei, &e) in free_e.iter().enumerate() {
                let d = freq_error(est[e].freq(), truth[t].freq(), (1.0, 1.0)).0;
                if d < best.0 {
                    best = (d, ti, ei);
                }
            }
        }
        pairs.push((free_t.remove(best.1), free_e.remove(best.2)));
    }
    pairs.sort_unstable();
    (pairs, free_e)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionOutcome {
    pub selected: usize,
    pub losses: Vec<Option<f64>>,
    pub chi: Vec<Option<f64>>,
    pub failed: Vec<bool>,
    /// `chi` strictly decreasing on `k = 0..=P`.
    pub chi_decreasing: bool,
    /// `chi(k) > chi(P)` for every scored `k > P`.
    pub above_true_order: bool,
}

/// Fit at `k = P` compared with the truth.
#[derive(Debug, Clone, Serialize)]
pub struct TruthFit {
    /// Squared euclidean frequency errors per truth component.
    pub freq_sq_err: Vec<f64>,
    pub amp_sq_err: Vec<f64>,
    pub params: ParamVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnderOutcome {
    pub k: usize,
    /// Largest per-axis error, in unpadded bins, over the `k` dominant components.
    pub max_err_bins: f64,
    pub freq_sq_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverOutcome {
    /// Distance of the extra component from the noise periodogram argmax, in padded bins.
    pub dist_padded_bins: f64,
    /// `rho_extra^2 / ((2/NM) max I_w)`.
    pub rho2_ratio: f64,
}

/// Everything measured in one `(size, trial)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub size_index: usize,
    pub rows: usize,
    pub cols: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub selection: Option<SelectionOutcome>,
    pub at_true_order: Option<TruthFit>,
    pub under: Vec<UnderOutcome>,
    pub over: Option<OverOutcome>,
    pub sup_stat: Option<f64>,
    /// `L_k` for every order on the estimate path; `None` where the fit failed.
    pub losses: Vec<Option<f64>>,
    pub errors: Vec<String>,
    pub wall_time_s: f64,
}

/// Highest order on the estimate path a cell needs, or `None` when no check fits.
pub fn path_top(config: &ExperimentConfig) -> Option<usize> {
    let p = config.truth.len();
    let mut needed = config.under_orders();
    if config.has(Check::Selection) {
        needed.push(config.q_max - 1);
    }
    if config.has(Check::OverEst) {
        needed.push(p + 1);
    }
    if config.has(Check::LossLimits) || (p > 0 && !needed.is_empty()) {
        needed.push(p);
    }
    needed.into_iter().max()
}

/// Runs one cell. Estimation failures are recorded, not returned.
pub fn run_trial(
    config: &ExperimentConfig,
    size_index: usize,
    trial_index: usize,
) -> Result<TrialResult> {
    let &(rows, cols) = config
        .sizes
        .get(size_index)
        .ok_or_else(|| Error::InvalidArgument(format!("size index {size_index} out of range")))?;
    if trial_index >= config.trials {
        return Err(Error::InvalidArgument(format!(
            "trial index {trial_index} out of range"
        )));
    }
    let start = Instant::now();
    let seed = trial_seed(config.innovation.master_seed, size_index, trial_index);
    let ma = config.noise_model()?;
    let truth = config.truth.clone().canonical();
    let p = truth.len();
    let real = synthesize(
        &truth,
        &ma,
        config.innovation.distribution,
        seed,
        rows,
        cols,
    )?;
    let opts = RefineOptions {
        pad_factor: config.pad_factor,
        k_max: config.q_max.max(p + 2),
        ..Default::default()
    };

    let mut out = TrialResult {
        size_index,
        rows,
        cols,
        trial_index,
        seed,
        selection: None,
        at_true_order: None,
        under: Vec::new(),
        over: None,
        sup_stat: None,
        losses: Vec::new(),
        errors: Vec::new(),
        wall_time_s: 0.0,
    };

    if let Some(k_top) = path_top(config) {
        let (path, retried) = selection_path(&real.y, k_top, &opts);
        if let Some((k, e)) = &path.failure {
            out.errors.push(format!("order {k}: {e}"));
        }
        let stage = |k: usize| -> Option<&LseResult> { path.stages.get(k) };

        if config.has(Check::Selection) {
            let xi = config.xi_value()?;
            let sel = SelectionResult::from_path(real.y.len(), config.q_max, xi, &path, &retried);
            let chi_decreasing = p < config.q_max && sel.chi_strictly_decreasing(p);
            let above_true_order = match sel.chi.get(p).copied().flatten() {
                Some(cp) => sel.chi[p + 1..]
                    .iter()
                    .zip(&sel.failed[p + 1..])
                    .all(|(c, f)| *f || c.is_some_and(|c| c > cp)),
                None => false,
            };
            out.selection = Some(SelectionOutcome {
                selected: sel.selected,
                losses: sel.losses,
                chi: sel.chi,
                failed: sel.failed,
                chi_decreasing,
                above_true_order,
            });
        }

        if p > 0 {
            if let Some(st) = stage(p) {
                let est = st.params.components();
                let (pairs, _) = match_components(truth.components(), est);
                let mut freq_sq_err = Vec::new();
                let mut amp_sq_err = Vec::new();
                for (t, e) in pairs {
                    let (_, eu) =
                        freq_error(est[e].freq(), truth.components()[t].freq(), (1.0, 1.0));
                    freq_sq_err.push(eu * eu);
                    amp_sq_err.push((est[e].rho - truth.components()[t].rho).powi(2));
                }
                out.at_true_order = Some(TruthFit {
                    freq_sq_err,
                    amp_sq_err,
                    params: st.params.clone(),
                });
            }
        }

        let bins = (TAU / rows as f64, TAU / cols as f64);
        for k in config.under_orders() {
            if let Some(st) = stage(k) {
                let est = st.params.components();
                let dominant = &truth.components()[..k];
                let (pairs, _) = match_components(dominant, est);
                let mut max_err_bins: f64 = 0.0;
                let mut freq_sq_err = 0.0;
                for (t, e) in pairs {
                    let (b, eu) = freq_error(est[e].freq(), dominant[t].freq(), bins);
                    max_err_bins = max_err_bins.max(b);
                    freq_sq_err += eu * eu;
                }
                out.under.push(UnderOutcome {
                    k,
                    max_err_bins,
                    freq_sq_err,
                });
            }
        }

        if config.has(Check::OverEst) {
            if let Some(st) = stage(p + 1) {
                out.over = over_outcome(&real.noise, &truth, st, config.pad_factor)?;
                if out.over.is_none() {
                    out.errors
                        .push("noise periodogram has no admissible peak".into());
                }
            }
        }

        out.losses = (0..=k_top).map(|k| stage(k).map(|s| s.loss)).collect();
    }

    if config.has(Check::SupDecay) {
        out.sup_stat = Some(sup_statistic(&real.noise, config.pad_factor)?);
    }

    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn over_outcome(
    noise: &Field2D,
    truth: &ParamVector,
    stage: &LseResult,
    pad: usize,
) -> Result<Option<OverOutcome>> {
    let est = stage.params.components();
    let (_, extra) = match_components(truth.components(), est);
    let Some(&extra) = extra.first() else {
        return Ok(None);
    };
    let extra = est[extra];
    let (rows, cols) = (noise.rows(), noise.cols());
    let pg = periodogram(noise, pad)?;
    let query = PeakQuery {
        exclusions: &[],
        excl_radius: 0.0,
        edge_margin: (TAU / rows as f64, TAU / cols as f64),
    };
    let Some(peak) = top_peaks_in(&pg, 1, &query).into_iter().next() else {
        return Ok(None);
    };
    let padded_bins = (TAU / (pad * rows) as f64, TAU / (pad * cols) as f64);
    let (dist, _) = freq_error(extra.freq(), peak.freq(), padded_bins);
    let nm = (rows * cols) as f64;
    Ok(Some(OverOutcome {
        dist_padded_bins: dist,
        rho2_ratio: extra.rho * extra.rho / (2.0 / nm * peak.value),
    }))
}

/// Trial results and per-size aggregates of a whole run.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub trials: Vec<TrialResult>,
    pub aggregates: Vec<SizeAggregate>,
    pub config_hash: String,
}

/// Runs every cell without writing files.
pub fn run_cells(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.sizes.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let mut trials = cells
        .par_iter()
        .map(|&(s, t)| run_trial(config, s, t))
        .collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| (t.size_index, t.trial_index));
    let aggregates = (0..config.sizes.len())
        .map(|s| {
            let rows: Vec<&TrialResult> = trials.iter().filter(|t| t.size_index == s).collect();
            SizeAggregate::from_trials(config, s, &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary {
        trials,
        aggregates,
        config_hash: config.hash(),
    })
}

/// Output file names inside the run directory.
pub const TRIALS_CSV: &str = "trials.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const TIMING_CSV: &str = "timing.csv";

/// Runs the experiment and writes `trials.csv`, `aggregate.csv` and `manifest.json`
/// into `out_dir`. The directory is probed for writability before any computation.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let probe = out_dir.join(".write-probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(&probe)?;

    let summary = run_cells(config)?;
    std::fs::write(
        out_dir.join(TRIALS_CSV),
        report::trials_csv(config, &summary.trials),
    )?;
    std::fs::write(
        out_dir.join(AGGREGATE_CSV),
        report::aggregate_csv(config, &summary.aggregates),
    )?;
    std::fs::write(
        out_dir.join(TIMING_CSV),
        report::timing_csv(&summary.trials),
    )?;
    let manifest = report::manifest(config, &summary)?;
    std::fs::write(out_dir.join(MANIFEST_JSON), manifest)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_differ_per_cell() {
        let a = trial_seed(1, 0, 0);
        assert_eq!(a, trial_seed(1, 0, 0));
        assert_ne!(a, trial_seed(1, 0, 1));
        assert_ne!(a, trial_seed(1, 1, 0));
        assert_ne!(a, trial_seed(2, 0, 0));
    }

    #[test]
    fn freq_error_uses_mirror() {
        let (b, e) = freq_error((TAU - 1.0, TAU - 2.0), (1.0, 2.0), (0.1, 0.1));
        assert!(b < 1e-9 && e < 1e-9);
        let (b, _) = freq_error((1.2, 2.0), (1.0, 2.0), (0.1, 0.1));
        assert!((b - 2.0).abs() < 1e-9);
    }

    #[test]
    fn matching_leaves_extra_component() {
        let t = vec![SinusoidParams::new(1.0, 1.0, 1.0, 0.0).unwrap()];
        let e = vec![
            SinusoidParams::new(0.1, 3.0, 0.5, 0.0).unwrap(),
            SinusoidParams::new(1.0, 1.01, 0.99, 0.0).unwrap(),
        ];
        let (pairs, extra) = match_components(&t, &e);
        assert_eq!(pairs, vec![(0, 1)]);
        assert_eq!(extra, vec![0]);
    }
}
