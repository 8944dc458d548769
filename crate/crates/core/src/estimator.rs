//! Least-squares estimation of `k` sinusoids.
//!
//! For fixed frequencies the model `sum_i a_i cos(w_i n + v_i m) + b_i sin(w_i n + v_i m)`
//! is linear in the amplitudes, so the loss is minimized over frequencies only
//! (variable projection) with amplitudes solved in closed form at every step.
//!
//! The estimate for order `k` is built in stages. Stage `j` takes the refined
//! frequencies of stage `j - 1`, adds the highest admissible peak of the residual
//! periodogram, re-solves all amplitudes and then refines all `j` frequency pairs
//! jointly with a damped Gauss-Newton iteration. Each stage starts from a superset of
//! the previous regressors and refinement only accepts loss decreases, so the loss
//! along the path is nonincreasing in `k`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    freq_distance, min_freq_sep_for, Field2D, ParamVector, SinusoidParams, DEFAULT_MIN_FREQ_SEP,
};
use crate::spectrum::{periodogram, top_peaks_in, PeakQuery, DEFAULT_PAD_FACTOR};

/// Reciprocal condition number of the column-normalized Gram matrix below which the
/// amplitude solve is rejected.
pub const MIN_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    /// Periodogram refinement used for initialization.
    pub pad_factor: usize,
    /// Stop once a step lowers the loss by less than this fraction.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Step-halving budget of the line search.
    pub max_halvings: usize,
    /// Largest order accepted by [`lse_estimate`].
    pub k_max: usize,
    /// Minimum frequency separation; `None` ties it to the field size.
    pub min_freq_sep: Option<f64>,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            pad_factor: DEFAULT_PAD_FACTOR,
            rel_tol: 1e-10,
            max_iter: 100,
            max_halvings: 30,
            k_max: 16,
            min_freq_sep: None,
        }
    }
}

impl RefineOptions {
    pub fn min_sep_for(&self, y: &Field2D) -> f64 {
        self.min_freq_sep
            .unwrap_or_else(|| min_freq_sep_for(y.rows(), y.cols()))
    }
}

/// Outcome of a least-squares fit at a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LseResult {
    pub params: ParamVector,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `(1/NM) sum (y(n,m) - sum_i rho_i cos(w_i n + v_i m + phi_i))^2`
pub fn loss(y: &Field2D, params: &ParamVector) -> f64 {
    let mut acc = 0.0;
    for n in 0..y.rows() {
        for (m, &v) in y.row(n).iter().enumerate() {
            let r = v - params.eval(n, m);
            acc += r * r;
        }
    }
    acc / y.len() as f64
}

/// Cosine and sine regressors for a set of frequency pairs, one column each,
/// interleaved as `[cos_1, sin_1, cos_2, sin_2, ...]`.
struct Basis {
    cols: Vec<Vec<f64>>,
}

impl Basis {
    fn new(rows: usize, cols: usize, freqs: &[(f64, f64)]) -> Self {
        let mut out = Vec::with_capacity(2 * freqs.len());
        for &(w, v) in freqs {
            let mut c = Vec::with_capacity(rows * cols);
            let mut s = Vec::with_capacity(rows * cols);
            for n in 0..rows {
                let base = w * n as f64;
                for m in 0..cols {
                    let (sn, cs) = (base + v * m as f64).sin_cos();
                    c.push(cs);
                    s.push(sn);
                }
            }
            out.push(c);
            out.push(s);
        }
        Self { cols: out }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gram(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let p = cols.len();
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = dot(&cols[i], &cols[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Reciprocal 2-norm condition number of a symmetric positive semidefinite matrix.
/// No diagonal scaling: a nearly vanishing regressor, such as the sine at `(pi, pi)`,
/// must show up as ill conditioning.
fn rcond(g: &DMatrix<f64>) -> f64 {
    let eig = g.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.iter().copied().fold(f64::MAX, f64::min);
    (min / max).max(0.0)
}

/// Linear least-squares fit at fixed frequencies.
struct Fit {
    freqs: Vec<(f64, f64)>,
    basis: Basis,
    gram: DMatrix<f64>,
    /// `[a_1, b_1, a_2, b_2, ...]`
    coeffs: Vec<f64>,
    resid: Vec<f64>,
    loss: f64,
}

impl Fit {
    fn new(y: &Field2D, freqs: &[(f64, f64)]) -> Result<Self> {
        let basis = Basis::new(y.rows(), y.cols(), freqs);
        let g = gram(&basis.cols);
        let p = basis.cols.len();
        let coeffs = if p == 0 {
            Vec::new()
        } else {
            let rc = rcond(&g);
            if rc.is_nan() || rc < MIN_RCOND {
                return Err(Error::Conditioning { rcond: rc });
            }
            let rhs = DVector::from_iterator(p, basis.cols.iter().map(|c| dot(c, y.values())));
            let chol = g
                .clone()
                .cholesky()
                .ok_or(Error::Conditioning { rcond: rc })?;
            chol.solve(&rhs).iter().copied().collect()
        };
        let mut resid = y.values().to_vec();
        for (col, &c) in basis.cols.iter().zip(&coeffs) {
            for (r, &x) in resid.iter_mut().zip(col) {
                *r -= c * x;
            }
        }
        let loss = dot(&resid, &resid) / y.len() as f64;
        Ok(Self {
            freqs: freqs.to_vec(),
            basis,
            gram: g,
            coeffs,
            resid,
            loss,
        })
    }

    /// Columns `d(model)/d(omega_i)` and `d(model)/d(upsilon_i)` at the fitted amplitudes.
    fn freq_derivatives(&self, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.freqs.len());
        for i in 0..self.freqs.len() {
            let (a, b) = (self.coeffs[2 * i], self.coeffs[2 * i + 1]);
            let (cs, sn) = (&self.basis.cols[2 * i], &self.basis.cols[2 * i + 1]);
            let mut dw = Vec::with_capacity(rows * cols);
            let mut dv = Vec::with_capacity(rows * cols);
            for n in 0..rows {
                for m in 0..cols {
                    let idx = n * cols + m;
                    let g = -a * sn[idx] + b * cs[idx];
                    dw.push(n as f64 * g);
                    dv.push(m as f64 * g);
                }
            }
            out.push(dw);
            out.push(dv);
        }
        out
    }

    fn amplitudes(&self) -> Vec<(f64, f64)> {
        self.coeffs.chunks(2).map(|c| (c[0], c[1])).collect()
    }

    fn params(&self, min_sep: f64) -> Result<ParamVector> {
        let comps = self
            .freqs
            .iter()
            .zip(self.amplitudes())
            .map(|(&(w, v), (a, b))| {
                let (rho, phi) = amplitude_phase(a, b);
                SinusoidParams::new(rho, w, v, phi).map_err(|e| match e {
                    Error::InvalidModel(msg) => Error::RankDeficient(msg),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamVector::with_min_sep(comps, min_sep)?.canonical())
    }
}

/// `(a, b)` of `a cos x + b sin x` to `(rho, phi)` of `rho cos(x + phi)`.
pub fn amplitude_phase(a: f64, b: f64) -> (f64, f64) {
    (a.hypot(b), crate::model::wrap_angle((-b).atan2(a)))
}

/// Result of a linear amplitude solve at fixed frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// `(a_i, b_i)` of `a_i cos(.) + b_i sin(.)`, in the order of the input frequencies.
    pub coeffs: Vec<(f64, f64)>,
    pub loss: f64,
}

impl LinearFit {
    /// `(rho_i, phi_i)` for each component.
    pub fn amplitude_phase(&self) -> Vec<(f64, f64)> {
        self.coeffs
            .iter()
            .map(|&(a, b)| amplitude_phase(a, b))
            .collect()
    }
}

/// Exact linear least squares over the `2k` cosine/sine regressors.
pub fn linear_amplitudes(y: &Field2D, freqs: &[(f64, f64)]) -> Result<LinearFit> {
    check_distinct(freqs, DEFAULT_MIN_FREQ_SEP)?;
    let fit = Fit::new(y, freqs)?;
    Ok(LinearFit {
        coeffs: fit.amplitudes(),
        loss: fit.loss,
    })
}

fn check_distinct(freqs: &[(f64, f64)], min_sep: f64) -> Result<()> {
    for (i, &a) in freqs.iter().enumerate() {
        for &b in &freqs[i + 1..] {
            if freq_distance(a, b) < min_sep {
                return Err(Error::InvalidArgument(format!(
                    "frequencies {a:?} and {b:?} closer than {min_sep:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// Variable-projection objective: the minimal loss over amplitudes at fixed frequencies.
pub fn vp_objective(y: &Field2D, freqs: &[(f64, f64)]) -> Result<f64> {
    Ok(Fit::new(y, freqs)?.loss)
}

/// Objective and its gradient with respect to `[w_1, v_1, w_2, v_2, ...]`.
///
/// At the optimal amplitudes the residual is orthogonal to the regressors, so the
/// gradient reduces to `-(2/NM) D^T r` with `D` the model derivative at fixed
/// amplitudes.
pub fn vp_gradient(y: &Field2D, freqs: &[(f64, f64)]) -> Result<(f64, Vec<f64>)> {
    let fit = Fit::new(y, freqs)?;
    let d = fit.freq_derivatives(y.rows(), y.cols());
    let scale = -2.0 / y.len() as f64;
    let grad = d.iter().map(|col| scale * dot(col, &fit.resid)).collect();
    Ok((fit.loss, grad))
}

/// Admissible frequency box `[margin, 2pi - margin]` per axis, one unpadded bin wide.
fn box_margin(y: &Field2D) -> (f64, f64) {
    (TAU / y.rows() as f64, TAU / y.cols() as f64)
}

fn clip(x: f64, margin: f64) -> f64 {
    x.clamp(margin, TAU - margin)
}

/// Gauss-Newton direction on the projected problem, `(D^T P D) delta = D^T r` where
/// `P` projects onto the orthogonal complement of the regressors.
fn gauss_newton_direction(y: &Field2D, fit: &Fit) -> Option<Vec<f64>> {
    let d = fit.freq_derivatives(y.rows(), y.cols());
    let q = d.len();
    let p = fit.basis.cols.len();
    let dtd = gram(&d);
    let phitd = DMatrix::from_fn(p, q, |i, j| dot(&fit.basis.cols[i], &d[j]));
    let chol = fit.gram.clone().cholesky()?;
    let h = dtd - phitd.transpose() * chol.solve(&phitd);
    let g = DVector::from_iterator(q, d.iter().map(|col| dot(col, &fit.resid)));

    let max_diag = (0..q).map(|i| h[(i, i)]).fold(0.0, f64::max);
    if max_diag.is_nan() || max_diag <= 0.0 {
        return None;
    }
    let mut mu = 1e-12;
    while mu < 1e6 {
        let mut damped = h.clone();
        for i in 0..q {
            damped[(i, i)] += mu * max_diag;
        }
        if let Some(c) = damped.cholesky() {
            let step = c.solve(&g);
            if step.iter().all(|v| v.is_finite()) {
                return Some(step.iter().copied().collect());
            }
        }
        mu *= 100.0;
    }
    None
}

struct Refined {
    fit: Fit,
    iterations: usize,
    converged: bool,
}

/// Jointly refines all frequencies from `fit`. Every accepted step strictly lowers
/// the loss; steps leaving the admissible box are clipped and steps that bring two
/// components within `min_sep` are treated as failed and halved.
fn refine(y: &Field2D, mut fit: Fit, min_sep: f64, opts: &RefineOptions) -> Refined {
    let margin = box_margin(y);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if fit.loss == 0.0 {
            return Refined {
                fit,
                iterations,
                converged: true,
            };
        }
        let Some(step) = gauss_newton_direction(y, &fit) else {
            break;
        };
        iterations += 1;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<(f64, f64)> = fit
                .freqs
                .iter()
                .enumerate()
                .map(|(i, &(w, v))| {
                    (
                        clip(w + t * step[2 * i], margin.0),
                        clip(v + t * step[2 * i + 1], margin.1),
                    )
                })
                .collect();
            if check_distinct(&trial, min_sep).is_ok() {
                if let Ok(cand) = Fit::new(y, &trial) {
                    if cand.loss < fit.loss {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(cand) => {
                debug_assert!(cand.loss <= fit.loss);
                let gain = fit.loss - cand.loss;
                let small = gain <= opts.rel_tol * fit.loss;
                fit = cand;
                if small {
                    return Refined {
                        fit,
                        iterations,
                        converged: true,
                    };
                }
            }
            // no decrease along the direction: stationary to working precision
            None => {
                return Refined {
                    fit,
                    iterations,
                    converged: true,
                }
            }
        }
    }
    let converged = iterations < opts.max_iter;
    Refined {
        fit,
        iterations,
        converged,
    }
}

/// One stage of the order path: add the `skip`-th best admissible residual peak to
/// `prev`, re-solve amplitudes and refine jointly.
fn grow_stage(
    y: &Field2D,
    prev: &[(f64, f64)],
    skip: usize,
    min_sep: f64,
    opts: &RefineOptions,
) -> Result<LseResult> {
    let resid = if prev.is_empty() {
        y.clone()
    } else {
        let fit = Fit::new(y, prev)?;
        Field2D::new(y.rows(), y.cols(), fit.resid)?
    };
    let pg = periodogram(&resid, opts.pad_factor)?;
    let query = PeakQuery {
        exclusions: prev,
        excl_radius: min_sep,
        edge_margin: box_margin(y),
    };
    let peaks = top_peaks_in(&pg, skip + 1, &query);
    let peak = peaks.get(skip).ok_or_else(|| {
        Error::RankDeficient(format!(
            "residual periodogram has no admissible peak for component {}",
            prev.len() + 1
        ))
    })?;
    let mut freqs = prev.to_vec();
    freqs.push(peak.freq());
    let fit = Fit::new(y, &freqs)?;
    let refined = refine(y, fit, min_sep, opts);
    Ok(LseResult {
        params: refined.fit.params(min_sep)?,
        loss: refined.fit.loss,
        iterations: refined.iterations,
        converged: refined.converged,
    })
}

fn order_zero(y: &Field2D) -> LseResult {
    LseResult {
        params: ParamVector::empty(),
        loss: y.mean_square(),
        iterations: 0,
        converged: true,
    }
}

/// Estimates for orders `0..=k_top` along one greedy path, stopping at the first
/// failing order.
#[derive(Debug)]
pub struct LsePath {
    pub stages: Vec<LseResult>,
    /// Order at which the path stopped and why.
    pub failure: Option<(usize, Error)>,
}

pub fn lse_path(y: &Field2D, k_top: usize, opts: &RefineOptions) -> LsePath {
    lse_path_with(y, k_top, opts, |_, _| None)
}

/// Like [`lse_path`], but `retry(k, &stage)` may ask for stage `k` to be recomputed
/// from the `n`-th best residual peak instead of the best one; the retried stage is
/// accepted as is.
pub fn lse_path_with(
    y: &Field2D,
    k_top: usize,
    opts: &RefineOptions,
    mut retry: impl FnMut(usize, &[LseResult]) -> Option<usize>,
) -> LsePath {
    let min_sep = opts.min_sep_for(y);
    let mut stages = vec![order_zero(y)];
    for k in 1..=k_top {
        let prev = stages[k - 1].params.freqs();
        match grow_stage(y, &prev, 0, min_sep, opts) {
            Ok(stage) => {
                stages.push(stage);
                if let Some(skip) = retry(k, &stages) {
                    match grow_stage(y, &prev, skip, min_sep, opts) {
                        Ok(again) => stages[k] = again,
                        Err(e) => {
                            stages.pop();
                            return LsePath {
                                stages,
                                failure: Some((k, e)),
                            };
                        }
                    }
                }
            }
            Err(e) => {
                return LsePath {
                    stages,
                    failure: Some((k, e)),
                }
            }
        }
    }
    LsePath {
        stages,
        failure: None,
    }
}

/// Least-squares estimate at assumed order `k`.
pub fn lse_estimate(y: &Field2D, k: usize, opts: &RefineOptions) -> Result<LseResult> {
    if k > opts.k_max {
        return Err(Error::InvalidArgument(format!(
            "order {k} exceeds the configured maximum {}",
            opts.k_max
        )));
    }
    let mut path = lse_path(y, k, opts);
    match path.failure {
        Some((_, e)) => Err(e),
        None => Ok(path.stages.pop().expect("path holds order 0")),
    }
}

/// Refines the given starting frequencies jointly (no greedy growth).
pub fn lse_refine_from(
    y: &Field2D,
    init: &[(f64, f64)],
    opts: &RefineOptions,
) -> Result<LseResult> {
    if init.is_empty() {
        return Ok(order_zero(y));
    }
    let min_sep = opts.min_sep_for(y);
    check_distinct(init, min_sep)?;
    let fit = Fit::new(y, init)?;
    let refined = refine(y, fit, min_sep, opts);
    Ok(LseResult {
        params: refined.fit.params(min_sep)?,
        loss: refined.fit.loss,
        iterations: refined.iterations,
        converged: refined.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Distribution;
    use crate::model::MaCoefficients;
    use crate::synth::{compose, synthesize};
    use std::f64::consts::PI;

    fn single(rho: f64, w: f64, v: f64, phi: f64) -> ParamVector {
        ParamVector::new(vec![SinusoidParams::new(rho, w, v, phi).unwrap()]).unwrap()
    }

    fn noiseless(p: &ParamVector, rows: usize, cols: usize) -> Field2D {
        compose(p, &Field2D::zeros(rows, cols).unwrap()).unwrap()
    }

    #[test]
    fn loss_examples() {
        let p = single(1.0, TAU * 3.0 / 16.0, TAU * 5.0 / 16.0, 0.4);
        let y = noiseless(&p, 16, 16);
        assert!(loss(&y, &p) < 1e-24);
        assert!((loss(&y, &ParamVector::empty()) - y.mean_square()).abs() < 1e-15);
        let flipped = single(
            1.0,
            p.components()[0].omega,
            p.components()[0].upsilon,
            0.4 + PI,
        );
        assert!((loss(&y, &flipped) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_solve_recovers_single_component() {
        let p = single(1.3, 1.1, 2.3, 5.0);
        let y = noiseless(&p, 12, 10);
        let fit = linear_amplitudes(&y, &[(1.1, 2.3)]).unwrap();
        let (rho, phi) = fit.amplitude_phase()[0];
        assert!((rho - 1.3).abs() < 1e-9);
        assert!((phi - 5.0).abs() < 1e-9);
        assert!(fit.loss < 1e-20);
    }

    #[test]
    fn linear_solve_matches_normal_equations_oracle() {
        let ma = MaCoefficients::white(1.0).unwrap();
        let y = synthesize(&ParamVector::empty(), &ma, Distribution::Gaussian, 8, 8, 8)
            .unwrap()
            .y;
        let (w, v) = (1.3, 0.7);
        // 2x2 normal equations by hand
        let (mut scc, mut scs, mut sss, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for n in 0..8 {
            for m in 0..8 {
                let x = w * n as f64 + v * m as f64;
                let (c, s) = (x.cos(), x.sin());
                let yy = y.at(n, m);
                scc += c * c;
                scs += c * s;
                sss += s * s;
                syc += yy * c;
                sys += yy * s;
            }
        }
        let det = scc * sss - scs * scs;
        let a = (sss * syc - scs * sys) / det;
        let b = (scc * sys - scs * syc) / det;
        let fit = linear_amplitudes(&y, &[(w, v)]).unwrap();
        assert!((fit.coeffs[0].0 - a).abs() < 1e-10);
        assert!((fit.coeffs[0].1 - b).abs() < 1e-10);
        assert!(fit.loss <= y.mean_square());
    }

    #[test]
    fn coincident_frequencies_rejected() {
        let y = noiseless(&single(1.0, 1.0, 1.0, 0.0), 8, 8);
        assert!(linear_amplitudes(&y, &[(1.0, 1.0), (1.0, 1.0)]).is_err());
        // same regressor through the mirror
        assert!(linear_amplitudes(&y, &[(1.0, 1.0), (TAU - 1.0, TAU - 1.0)]).is_err());
        // pi/pi has a vanishing sine regressor
        assert!(matches!(
            linear_amplitudes(&y, &[(PI, PI)]),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn order_zero_and_bounds() {
        let y = noiseless(&single(1.0, 1.0, 2.0, 0.0), 16, 16);
        let r = lse_estimate(&y, 0, &RefineOptions::default()).unwrap();
        assert!(r.params.is_empty());
        assert_eq!(r.loss, y.mean_square());
        let opts = RefineOptions {
            k_max: 2,
            ..Default::default()
        };
        assert!(matches!(
            lse_estimate(&y, 3, &opts),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_field_is_rank_deficient() {
        let y = Field2D::zeros(16, 16).unwrap();
        assert!(matches!(
            lse_estimate(&y, 1, &RefineOptions::default()),
            Err(Error::RankDeficient(_))
        ));
        assert_eq!(
            lse_estimate(&y, 0, &RefineOptions::default()).unwrap().loss,
            0.0
        );
    }

    #[test]
    fn exact_on_grid_recovery() {
        let truth = single(1.5, TAU * 5.0 / 32.0, TAU * 9.0 / 32.0, 2.2);
        let y = noiseless(&truth, 32, 32);
        let r = lse_estimate(&y, 1, &RefineOptions::default()).unwrap();
        let (e, t) = (r.params.components()[0], truth.components()[0]);
        assert!((e.rho - t.rho).abs() < 1e-6);
        assert!((e.omega - t.omega).abs() < 1e-6);
        assert!((e.upsilon - t.upsilon).abs() < 1e-6);
        assert!((e.phi - t.phi).abs() < 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn off_grid_refinement_converges() {
        let truth = single(1.0, 1.234, 2.75, 0.5);
        let y = noiseless(&truth, 24, 20);
        let r = lse_estimate(&y, 1, &RefineOptions::default()).unwrap();
        let e = r.params.components()[0];
        assert!((e.omega - 1.234).abs() < 1e-7, "{e:?}");
        assert!((e.upsilon - 2.75).abs() < 1e-7, "{e:?}");
        assert!(r.loss < 1e-12);
    }

    #[test]
    fn refine_from_start_point() {
        let truth = single(1.0, 1.234, 2.75, 0.5);
        let y = noiseless(&truth, 24, 20);
        let r = lse_refine_from(&y, &[(1.25, 2.7)], &RefineOptions::default()).unwrap();
        assert!((r.params.components()[0].omega - 1.234).abs() < 1e-7);
        assert!(r.loss <= vp_objective(&y, &[(1.25, 2.7)]).unwrap());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let ma = MaCoefficients::white(0.3).unwrap();
        let truth = ParamVector::new(vec![
            SinusoidParams::new(1.0, 1.1, 2.0, 0.3).unwrap(),
            SinusoidParams::new(0.6, 2.5, 4.4, 1.0).unwrap(),
        ])
        .unwrap();
        let y = synthesize(&truth, &ma, Distribution::Gaussian, 3, 10, 12)
            .unwrap()
            .y;
        let at = [(1.13, 1.95), (2.47, 4.43)];
        let (_, grad) = vp_gradient(&y, &at).unwrap();
        let h = 1e-6;
        for (j, &g) in grad.iter().enumerate() {
            let mut plus = at;
            let mut minus = at;
            if j % 2 == 0 {
                plus[j / 2].0 += h;
                minus[j / 2].0 -= h;
            } else {
                plus[j / 2].1 += h;
                minus[j / 2].1 -= h;
            }
            let fd =
                (vp_objective(&y, &plus).unwrap() - vp_objective(&y, &minus).unwrap()) / (2.0 * h);
            assert!(
                (g - fd).abs() <= 1e-4 * g.abs().max(1e-3),
                "j={j} g={g} fd={fd}"
            );
        }
    }
}
