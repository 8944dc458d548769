//! Seed-reproducible synthesis of innovation, noise and observation fields.
//!
//! Innovations are site-addressed: the value at absolute lattice index `(n, m)` is a
//! pure function of `(master_seed, n, m)`. Each row is a ChaCha stream and each
//! column owns a fixed block of words inside it, so any window of the infinite
//! lattice can be generated independently and overlapping windows agree bit for bit.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    Distribution, Field2D, InnovationSpec, MaCoefficients, ParamVector, SupportKind,
};

/// 32-bit words reserved per lattice site.
const WORDS_PER_SITE: u128 = 4;
/// Shifts column indices so negative columns map to valid word positions.
const COL_OFFSET: i128 = 1 << 40;

/// Uniform in the open interval (0, 1) from 53 random bits.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn draw(dist: Distribution, sd: f64, x0: u64, x1: u64) -> f64 {
    match dist {
        Distribution::Gaussian => {
            // Box-Muller, cosine branch only so each site uses a fixed word budget
            let r = (-2.0 * open_unit(x0).ln()).sqrt();
            sd * r * (TAU * open_unit(x1)).cos()
        }
        Distribution::Uniform => {
            let half_width = sd * 3f64.sqrt();
            half_width * (2.0 * open_unit(x0) - 1.0)
        }
        Distribution::Laplace => {
            let b = sd / 2f64.sqrt();
            let p = open_unit(x0) - 0.5;
            -b * p.signum() * (1.0 - 2.0 * p.abs()).ln()
        }
    }
}

fn row_rng(seed: u64, row: i64, first_col: i64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng.set_word_pos((first_col as i128 + COL_OFFSET) as u128 * WORDS_PER_SITE);
    rng
}

/// Draws an i.i.d. innovation field covering rows `origin.0 .. origin.0 + rows` and
/// columns `origin.1 .. origin.1 + cols` of the lattice.
pub fn gen_innovations(
    spec: &InnovationSpec,
    rows: usize,
    cols: usize,
    origin: (i64, i64),
) -> Result<Field2D> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "innovation grid must be non-empty, got {rows}x{cols}"
        )));
    }
    if !(spec.sigma2 > 0.0 && spec.sigma2.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "innovation variance {} must be > 0",
            spec.sigma2
        )));
    }
    let sd = spec.sigma2.sqrt();
    let mut values = vec![0.0; rows * cols];
    values
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = row_rng(spec.master_seed, origin.0 + i as i64, origin.1);
            for v in row.iter_mut() {
                let x0 = rng.next_u64();
                let x1 = rng.next_u64();
                *v = draw(spec.distribution, sd, x0, x1);
            }
        });
    Field2D::with_origin(rows, cols, origin.0, origin.1, values)
}

/// Index window `(rows, cols)` of innovations needed to filter an `N x M` output.
pub fn required_input_window(
    ma: &MaCoefficients,
    out_rows: usize,
    out_cols: usize,
) -> ((i64, i64), (i64, i64)) {
    let k = ma.extent_k() as i64;
    let l = ma.extent_l() as i64;
    let (n, m) = (out_rows as i64, out_cols as i64);
    let cols = match ma.support_kind() {
        SupportKind::Nshp => (-l, m - 1 + l),
        SupportKind::QuarterPlane => (-l, m - 1),
    };
    ((-k, n - 1), cols)
}

/// Exact finite convolution `w(n,m) = sum a(r,s) u(n-r, m-s)` on the window
/// `0 <= n < out_rows`, `0 <= m < out_cols`.
pub fn ma_filter(
    u: &Field2D,
    ma: &MaCoefficients,
    out_rows: usize,
    out_cols: usize,
) -> Result<Field2D> {
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::InvalidArgument(
            "output window must be non-empty".into(),
        ));
    }
    let (need_r, need_c) = required_input_window(ma, out_rows, out_cols);
    let (r0, c0) = u.origin();
    let have_r = (r0, r0 + u.rows() as i64 - 1);
    let have_c = (c0, c0 + u.cols() as i64 - 1);
    if have_r.0 > need_r.0 || have_r.1 < need_r.1 || have_c.0 > need_c.0 || have_c.1 < need_c.1 {
        return Err(Error::Coverage {
            rows: need_r,
            cols: need_c,
        });
    }

    let taps: Vec<(i64, i64, f64)> = ma
        .coeffs()
        .filter(|&(_, a)| a != 0.0)
        .map(|((r, s), a)| (r, s, a))
        .collect();
    let in_cols = u.cols();
    let src = u.values();
    let mut out = vec![0.0; out_rows * out_cols];
    out.par_chunks_mut(out_cols)
        .enumerate()
        .for_each(|(n, row)| {
            for &(r, s, a) in &taps {
                let base = (n as i64 - r - r0) as usize * in_cols;
                let col_shift = -s - c0;
                for (m, o) in row.iter_mut().enumerate() {
                    *o += a * src[base + (m as i64 + col_shift) as usize];
                }
            }
        });
    Field2D::new(out_rows, out_cols, out)
}

/// `y(n,m) = sum_i rho_i cos(omega_i n + upsilon_i m + phi_i) + noise(n,m)`.
pub fn compose(params: &ParamVector, noise: &Field2D) -> Result<Field2D> {
    if noise.origin() != (0, 0) {
        return Err(Error::InvalidArgument(format!(
            "noise window must start at (0,0), got {:?}",
            noise.origin()
        )));
    }
    let (rows, cols) = (noise.rows(), noise.cols());
    let mut values = noise.values().to_vec();
    for c in params.components() {
        for n in 0..rows {
            let row = &mut values[n * cols..(n + 1) * cols];
            let base = c.omega * n as f64 + c.phi;
            for (m, v) in row.iter_mut().enumerate() {
                *v += c.rho * (base + c.upsilon * m as f64).cos();
            }
        }
    }
    Field2D::new(rows, cols, values)
}

/// A synthesized observation together with the noise field that produced it.
#[derive(Debug, Clone)]
pub struct Realization {
    pub y: Field2D,
    pub noise: Field2D,
}

/// Draws innovations on the extended grid, filters them and adds the sinusoids.
/// The innovation variance is taken from `ma`.
pub fn synthesize(
    params: &ParamVector,
    ma: &MaCoefficients,
    distribution: Distribution,
    seed: u64,
    rows: usize,
    cols: usize,
) -> Result<Realization> {
    let spec = InnovationSpec::new(distribution, ma.sigma2(), seed)?;
    let ((r_lo, r_hi), (c_lo, c_hi)) = required_input_window(ma, rows, cols);
    let u = gen_innovations(
        &spec,
        (r_hi - r_lo + 1) as usize,
        (c_hi - c_lo + 1) as usize,
        (r_lo, c_lo),
    )?;
    let noise = ma_filter(&u, ma, rows, cols)?;
    let y = compose(params, &noise)?;
    Ok(Realization { y, noise })
}
