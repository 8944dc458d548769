//! Library results checked against independent reference computations and frozen
//! closed-form values.

mod common;

use std::f64::consts::{PI, TAU};

use common::{gaussian, naive_periodogram, qp_ma, two_components};
use mixspec2d::estimator::vp_objective;
use mixspec2d::{
    compose, lse_estimate, noise_constant_a, periodogram, spectral_density, xi_threshold, Field2D,
    ParamVector, RefineOptions, SinusoidParams, SupportKind,
};

#[test]
fn noise_constant_of_default_filter() {
    let a = noise_constant_a(&qp_ma()).unwrap();
    assert!((a - 4.41 / 1.45).abs() < 1e-12);
    let nshp = qp_ma().with_support(SupportKind::Nshp).unwrap();
    assert!((xi_threshold(&nshp, 0.01).unwrap() - 14.0 * 1.01 * 4.41 / 1.45).abs() < 1e-10);
    assert!((xi_threshold(&qp_ma(), 0.01).unwrap() - 8.0 * 1.01 * 4.41 / 1.45).abs() < 1e-10);
}

#[test]
fn density_matches_autocovariance_series() {
    let ma = qp_ma().with_sigma2(0.7).unwrap();
    for &(w, v) in &[(0.0, 0.0), (0.3, 2.0), (PI, 1.0), (5.5, 4.4)] {
        let mut series = 0.0;
        for p in -2i64..=2 {
            for q in -2i64..=2 {
                series += ma.autocovariance(p, q) * (p as f64 * w + q as f64 * v).cos();
            }
        }
        let f = spectral_density(&ma, w, v);
        assert!((f - series).abs() < 1e-12, "({w}, {v}): {f} vs {series}");
    }
    // |1 + 0.5 + 0.4 + 0.2|^2 at the origin
    assert!((spectral_density(&qp_ma(), 0.0, 0.0) - 4.41).abs() < 1e-12);
}

#[test]
fn padded_periodogram_matches_textbook_dft() {
    let y = gaussian(6, 10, 3);
    let pg = periodogram(&y, 3).unwrap();
    let (pn, pm) = pg.dims();
    assert_eq!((pn, pm), (18, 30));
    for a in 0..pn {
        for b in 0..pm {
            let want = naive_periodogram(&y, TAU * a as f64 / 18.0, TAU * b as f64 / 30.0);
            assert!((pg.at(a, b) - want).abs() <= 1e-10 * want.max(1.0));
        }
    }
}

/// Brute-force minimum of the projected loss on a 200 x 200 lattice over the
/// admissible box; the estimator must reach it or do better.
#[test]
fn single_component_beats_lattice_search() {
    let truth = ParamVector::new(vec![SinusoidParams::new(1.0, 2.2, 4.0, 0.5).unwrap()]).unwrap();
    let noise = gaussian(8, 8, 11).scaled(0.5).unwrap();
    let y = compose(&truth, &noise).unwrap();
    let est = lse_estimate(&y, 1, &RefineOptions::default()).unwrap();

    let lo = TAU / 8.0;
    let step = (TAU - 2.0 * lo) / 199.0;
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for i in 0..200 {
        for j in 0..200 {
            let f = (lo + i as f64 * step, lo + j as f64 * step);
            if let Ok(l) = vp_objective(&y, &[f]) {
                if l < best.0 {
                    best = (l, f);
                }
            }
        }
    }
    assert!(
        est.loss <= best.0 + 1e-9,
        "estimate {} vs lattice {}",
        est.loss,
        best.0
    );
}

#[test]
fn two_component_loss_at_truth_is_noise_power() {
    let truth = two_components();
    let noise = gaussian(32, 32, 2);
    let y = compose(&truth, &noise).unwrap();
    let at_truth = mixspec2d::loss(&y, &truth);
    assert!((at_truth - noise.mean_square()).abs() < 1e-12);
    let est = lse_estimate(&y, 2, &RefineOptions::default()).unwrap();
    assert!(est.loss <= at_truth);
}

#[test]
fn on_grid_noiseless_recovery() {
    let (n, m) = (32, 32);
    let truth = ParamVector::new(vec![SinusoidParams::new(
        1.3,
        TAU * 5.0 / n as f64,
        TAU * 11.0 / m as f64,
        0.9,
    )
    .unwrap()])
    .unwrap();
    let y = compose(&truth, &Field2D::zeros(n, m).unwrap()).unwrap();
    let est = lse_estimate(&y, 1, &RefineOptions::default()).unwrap();
    let (t, e) = (truth.components()[0], est.params.components()[0]);
    for (a, b) in [
        (t.rho, e.rho),
        (t.omega, e.omega),
        (t.upsilon, e.upsilon),
        (t.phi, e.phi),
    ] {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
