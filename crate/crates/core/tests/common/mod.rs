#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use mixspec2d::experiments::ExperimentConfig;
use mixspec2d::{
    gen_innovations, Distribution, Field2D, InnovationSpec, MaCoefficients, ParamVector,
    SinusoidParams, SupportKind,
};

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(format!("{name}.json")))
        .unwrap_or_else(|e| panic!("config {name}: {e}"))
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Field2D {
    let spec = InnovationSpec::new(Distribution::Gaussian, 1.0, seed).unwrap();
    gen_innovations(&spec, rows, cols, (0, 0)).unwrap()
}

pub fn qp_ma() -> MaCoefficients {
    MaCoefficients::new(
        SupportKind::QuarterPlane,
        1,
        1,
        [(0, 0, 1.0), (0, 1, 0.5), (1, 0, 0.4), (1, 1, 0.2)],
        1.0,
    )
    .unwrap()
}

pub fn two_components() -> ParamVector {
    ParamVector::new(vec![
        SinusoidParams::new(2.0, 0.9 * PI, 0.4 * PI, 0.7).unwrap(),
        SinusoidParams::new(1.0, 0.45 * PI, 1.3 * PI, 2.1).unwrap(),
    ])
    .unwrap()
}

pub fn add(a: &Field2D, b: &Field2D) -> Field2D {
    Field2D::new(
        a.rows(),
        a.cols(),
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x + y)
            .collect(),
    )
    .unwrap()
}

/// Textbook `|sum y e^{-j(wn + vm)}|^2 (2 / NM)`, independent of the library.
pub fn naive_periodogram(y: &Field2D, w: f64, v: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for n in 0..y.rows() {
        for m in 0..y.cols() {
            let t = w * n as f64 + v * m as f64;
            re += y.at(n, m) * t.cos();
            im -= y.at(n, m) * t.sin();
        }
    }
    2.0 * (re * re + im * im) / y.len() as f64
}
