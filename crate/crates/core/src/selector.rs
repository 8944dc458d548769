//! Penalized order selection,
//! `chi(k) = NM ln L_k + xi k ln NM`, minimized over `k = 0..Q-1`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimator::{lse_path_with, LsePath, LseResult, RefineOptions};
use crate::model::{noise_constant_a, Field2D, MaCoefficients, SupportKind};

/// Slack allowed when checking that losses do not increase with the order.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Default relative margin above the strict penalty bound.
pub const DEFAULT_XI_MARGIN: f64 = 0.01;

/// Penalty weight `c A (1 + margin)` with `c = 14` for NSHP and `c = 8` for
/// quarter-plane supports.
pub fn xi_threshold(ma: &MaCoefficients, margin: f64) -> Result<f64> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "margin {margin} must be >= 0"
        )));
    }
    let c = match ma.support_kind() {
        SupportKind::Nshp => 14.0,
        SupportKind::QuarterPlane => 8.0,
    };
    Ok(c * noise_constant_a(ma)? * (1.0 + margin))
}

/// `NM ln(loss) + xi k ln(NM)`. A zero loss maps to `-inf`, which orders below every
/// finite value.
pub fn chi_statistic(nm: usize, loss_k: f64, k: usize, xi: f64) -> f64 {
    if loss_k == 0.0 {
        return f64::NEG_INFINITY;
    }
    let nm = nm as f64;
    nm * loss_k.ln() + xi * k as f64 * nm.ln()
}

fn ser_opt_f64<S: Serializer>(v: &[Option<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        match x {
            Some(f) if f.is_finite() => seq.serialize_element(f)?,
            Some(f) if *f < 0.0 => seq.serialize_element("-inf")?,
            Some(_) => seq.serialize_element("inf")?,
            None => seq.serialize_element(&None::<f64>)?,
        }
    }
    seq.end()
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub q_max: usize,
    pub xi: f64,
    pub nm: usize,
    /// `L_k` per order; `None` where the estimate failed.
    #[serde(serialize_with = "ser_opt_f64")]
    pub losses: Vec<Option<f64>>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub chi: Vec<Option<f64>>,
    pub failed: Vec<bool>,
    /// Orders recomputed from a perturbed start because their loss exceeded the
    /// previous order's.
    pub retried: Vec<bool>,
    pub selected: usize,
    #[serde(skip)]
    pub estimates: Vec<LseResult>,
    #[serde(skip)]
    pub failure: Option<String>,
}

impl SelectionResult {
    /// Smallest `k` attaining the minimum over non-failed orders.
    pub fn argmin(chi: &[Option<f64>]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in chi.iter().enumerate() {
            if let Some(c) = *c {
                if best.is_none_or(|(_, b)| c < b) {
                    best = Some((k, c));
                }
            }
        }
        best.map(|(k, _)| k)
    }

    /// Recomputes the statistic from stored losses with a different penalty.
    pub fn rechi(&self, xi: f64) -> Vec<Option<f64>> {
        self.losses
            .iter()
            .enumerate()
            .map(|(k, l)| l.map(|l| chi_statistic(self.nm, l, k, xi)))
            .collect()
    }

    /// Whether `chi` strictly decreases over `k = 0..=upto`.
    pub fn chi_strictly_decreasing(&self, upto: usize) -> bool {
        (1..=upto.min(self.chi.len().saturating_sub(1))).all(|k| {
            match (self.chi[k - 1], self.chi[k]) {
                (Some(a), Some(b)) => b < a,
                _ => false,
            }
        })
    }

    /// CSV with header `k,loss,chi,failed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,loss,chi,failed\n");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for k in 0..self.q_max {
            out.push_str(&format!(
                "{k},{},{},{}\n",
                fmt(self.losses[k]),
                fmt(self.chi[k]),
                self.failed[k]
            ));
        }
        out
    }
}

/// Builds the estimate path up to `k_top`, recomputing an order from the second-best
/// residual peak whenever its loss exceeds the previous order's. Returns the path and
/// which orders were recomputed.
pub fn selection_path(y: &Field2D, k_top: usize, opts: &RefineOptions) -> (LsePath, Vec<bool>) {
    let mut retried = vec![false; k_top + 1];
    let path = lse_path_with(y, k_top, opts, |k, stages| {
        if stages[k].loss > stages[k - 1].loss + MONOTONE_SLACK {
            retried[k] = true;
            Some(1)
        } else {
            None
        }
    });
    (path, retried)
}

impl SelectionResult {
    /// Scores the first `q_max` orders of an estimate path. Orders missing from the
    /// path are marked failed.
    pub fn from_path(
        nm: usize,
        q_max: usize,
        xi: f64,
        path: &LsePath,
        retried: &[bool],
    ) -> SelectionResult {
        let mut losses = vec![None; q_max];
        let mut chi = vec![None; q_max];
        let mut failed = vec![true; q_max];
        for (k, st) in path.stages.iter().take(q_max).enumerate() {
            losses[k] = Some(st.loss);
            chi[k] = Some(chi_statistic(nm, st.loss, k, xi));
            failed[k] = false;
        }
        let selected = SelectionResult::argmin(&chi).expect("order 0 never fails");
        let failure = path
            .failure
            .as_ref()
            .filter(|(k, _)| *k < q_max)
            .map(|(k, e)| format!("order {k}: {e}"));
        SelectionResult {
            q_max,
            xi,
            nm,
            losses,
            chi,
            failed,
            retried: (0..q_max)
                .map(|k| retried.get(k).copied().unwrap_or(false))
                .collect(),
            selected,
            estimates: path.stages.iter().take(q_max).cloned().collect(),
            failure,
        }
    }
}

/// Runs the estimator for `k = 0..q_max-1`, scores each order and returns the smallest
/// minimizer.
pub fn select_order(
    y: &Field2D,
    q_max: usize,
    xi: f64,
    opts: &RefineOptions,
) -> Result<SelectionResult> {
    if q_max == 0 {
        return Err(Error::InvalidArgument("q_max must be >= 1".into()));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "xi = {xi} must be positive"
        )));
    }
    if q_max - 1 > opts.k_max {
        return Err(Error::InvalidArgument(format!(
            "q_max {q_max} exceeds the configured maximum order {} + 1",
            opts.k_max
        )));
    }
    let (path, retried) = selection_path(y, q_max - 1, opts);
    Ok(SelectionResult::from_path(
        y.len(),
        q_max,
        xi,
        &path,
        &retried,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Distribution, ParamVector, SinusoidParams};
    use crate::synth::{compose, synthesize};

    #[test]
    fn threshold_examples() {
        let white = MaCoefficients::white(1.0).unwrap();
        assert_eq!(
            xi_threshold(&white.with_support(SupportKind::Nshp).unwrap(), 0.0).unwrap(),
            14.0
        );
        assert_eq!(xi_threshold(&white, 0.0).unwrap(), 8.0);
        let two = MaCoefficients::new(
            SupportKind::QuarterPlane,
            0,
            1,
            [(0, 0, 1.0), (0, 1, 0.5)],
            1.0,
        )
        .unwrap();
        assert!((xi_threshold(&two, 0.01).unwrap() - 14.544).abs() < 1e-12);
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_statistic(100, 1.0, 0, 14.0), 0.0);
        assert!((chi_statistic(100, std::f64::consts::E, 0, 14.0) - 100.0).abs() < 1e-12);
        let c = chi_statistic(100, std::f64::consts::E, 2, 14.0);
        assert!((c - (100.0 + 28.0 * 100f64.ln())).abs() < 1e-12);
        assert!((c - 228.94).abs() < 0.01);
        assert_eq!(chi_statistic(100, 0.0, 3, 14.0), f64::NEG_INFINITY);
    }

    #[test]
    fn argmin_prefers_smallest_order_on_ties() {
        let chi = [Some(3.0), Some(1.0), Some(1.0), None];
        assert_eq!(SelectionResult::argmin(&chi), Some(1));
        let chi = [Some(0.0), Some(f64::NEG_INFINITY), Some(f64::NEG_INFINITY)];
        assert_eq!(SelectionResult::argmin(&chi), Some(1));
    }

    #[test]
    fn rejects_bad_arguments() {
        let y = Field2D::zeros(16, 16).unwrap();
        let o = RefineOptions::default();
        assert!(select_order(&y, 0, 10.0, &o).is_err());
        assert!(select_order(&y, 2, 0.0, &o).is_err());
    }

    #[test]
    fn zero_field_marks_failed_orders() {
        let y = Field2D::zeros(16, 16).unwrap();
        let r = select_order(&y, 3, 8.0, &RefineOptions::default()).unwrap();
        assert_eq!(r.failed, vec![false, true, true]);
        assert_eq!(r.selected, 0);
        assert!(r.failure.is_some());
        assert!(r.to_csv().contains("1,,,true"));
    }

    #[test]
    fn noiseless_single_component_selects_one() {
        let p = ParamVector::new(vec![SinusoidParams::new(1.0, 1.0, 2.0, 0.3).unwrap()]).unwrap();
        let y = compose(&p, &Field2D::zeros(32, 32).unwrap()).unwrap();
        let r = select_order(&y, 3, 8.0, &RefineOptions::default()).unwrap();
        assert_eq!(r.selected, 1);
    }

    #[test]
    fn stored_chi_is_recomputable() {
        let ma = MaCoefficients::white(1.0).unwrap();
        let p = ParamVector::new(vec![SinusoidParams::new(1.0, 1.0, 2.0, 0.3).unwrap()]).unwrap();
        let y = synthesize(&p, &ma, Distribution::Gaussian, 5, 32, 32)
            .unwrap()
            .y;
        let r = select_order(&y, 3, 8.0, &RefineOptions::default()).unwrap();
        for (a, b) in r.rechi(r.xi).iter().zip(&r.chi) {
            assert!((a.unwrap() - b.unwrap()).abs() <= 1e-12 * b.unwrap().abs().max(1.0));
        }
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"selected\":1"));
    }
}
