//! Scaled 2-D periodogram, peak extraction and the sup statistic.
//!
//! The periodogram of an `N x M` field on a grid refined by `p` is
//!
//! ```text
//! I(a, b) = (2 / NM) |sum_{n,m} x(n,m) e^{-j(n w_a + m v_b)}|^2,
//! w_a = 2 pi a / (pN),  v_b = 2 pi b / (pM).
//! ```

use std::cell::RefCell;
use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{angle_diff, freq_distance, Field2D};

/// Refinement factor used for peak picking and sup statistics.
pub const DEFAULT_PAD_FACTOR: usize = 4;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    grid: Vec<f64>,
    pad_factor: usize,
    src_rows: usize,
    src_cols: usize,
}

impl Periodogram {
    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    pub fn src_dims(&self) -> (usize, usize) {
        (self.src_rows, self.src_cols)
    }

    /// Padded grid dimensions `(pN, pM)`.
    pub fn dims(&self) -> (usize, usize) {
        (
            self.pad_factor * self.src_rows,
            self.pad_factor * self.src_cols,
        )
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.grid[a * self.dims().1 + b]
    }

    pub fn omega(&self, a: usize) -> f64 {
        TAU * a as f64 / self.dims().0 as f64
    }

    pub fn upsilon(&self, b: usize) -> f64 {
        TAU * b as f64 / self.dims().1 as f64
    }

    /// Bin index of the conjugate mirror `(-a, -b)`.
    pub fn mirror_bin(&self, a: usize, b: usize) -> (usize, usize) {
        let (pn, pm) = self.dims();
        ((pn - a) % pn, (pm - b) % pm)
    }

    /// Largest grid value.
    pub fn max_value(&self) -> f64 {
        self.grid.iter().copied().fold(0.0, f64::max)
    }

    /// Canonical one of `{bin, mirror(bin)}`: `omega < pi` first, then `upsilon < pi`,
    /// then the lower bin index.
    fn representative(&self, a: usize, b: usize) -> (usize, usize) {
        let (pn, pm) = self.dims();
        let key = |(a, b): (usize, usize)| (2 * a >= pn, 2 * b >= pm, a, b);
        let m = self.mirror_bin(a, b);
        if key(m) < key((a, b)) {
            m
        } else {
            (a, b)
        }
    }
}

/// Periodogram on the `p`-times refined grid via a zero-padded FFT.
pub fn periodogram(field: &Field2D, pad_factor: usize) -> Result<Periodogram> {
    if pad_factor == 0 {
        return Err(Error::InvalidArgument("pad factor must be >= 1".into()));
    }
    let (n, m) = (field.rows(), field.cols());
    let (pn, pm) = (pad_factor * n, pad_factor * m);
    let mut spec = vec![Complex64::new(0.0, 0.0); pn * pm];

    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let row_fft = planner.plan_fft_forward(pm);
        // padded rows beyond N stay zero, so only the first N need a transform
        for r in 0..n {
            let dst = &mut spec[r * pm..(r + 1) * pm];
            for (d, &v) in dst.iter_mut().zip(field.row(r)) {
                *d = Complex64::new(v, 0.0);
            }
            row_fft.process(dst);
        }
        let col_fft = planner.plan_fft_forward(pn);
        let mut col = vec![Complex64::new(0.0, 0.0); pn];
        for b in 0..pm {
            for (a, c) in col.iter_mut().enumerate() {
                *c = if a < n {
                    spec[a * pm + b]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            col_fft.process(&mut col);
            for (a, c) in col.iter().enumerate() {
                spec[a * pm + b] = *c;
            }
        }
    });

    let scale = 2.0 / (n * m) as f64;
    Ok(Periodogram {
        grid: spec.iter().map(|c| scale * c.norm_sqr()).collect(),
        pad_factor,
        src_rows: n,
        src_cols: m,
    })
}

/// The same quantity as [`periodogram`] evaluated by the literal double sum at
/// arbitrary frequencies.
pub fn direct_dft_periodogram(field: &Field2D, freqs: &[(f64, f64)]) -> Vec<f64> {
    let scale = 2.0 / field.len() as f64;
    freqs
        .iter()
        .map(|&(w, v)| {
            let col: Vec<Complex64> = (0..field.cols())
                .map(|m| Complex64::from_polar(1.0, -v * m as f64))
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..field.rows() {
                let inner: Complex64 = field.row(n).iter().zip(&col).map(|(&x, e)| e * x).sum();
                acc += inner * Complex64::from_polar(1.0, -w * n as f64);
            }
            scale * acc.norm_sqr()
        })
        .collect()
}

/// Values at or below this fraction of the maximum are not reported as peaks.
pub const NUMERICAL_FLOOR: f64 = 1e-20;

/// A local maximum of the periodogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub upsilon: f64,
    pub value: f64,
    pub bin: (usize, usize),
}

impl Peak {
    pub fn freq(&self) -> (f64, f64) {
        (self.omega, self.upsilon)
    }
}

/// Peak search constraints beyond the count.
#[derive(Debug, Clone, Default)]
pub struct PeakQuery<'a> {
    /// Frequencies whose neighborhoods are suppressed.
    pub exclusions: &'a [(f64, f64)],
    /// Max-metric suppression radius around exclusions and accepted peaks.
    pub excl_radius: f64,
    /// Minimum distance of `(omega, upsilon)` from 0 (mod 2pi), per axis. Zero admits
    /// the axes; only the DC neighborhood is then removed.
    pub edge_margin: (f64, f64),
}

/// Up to `count` local maxima in descending order, one representative per
/// conjugate pair, skipping the DC neighborhood and anything within `excl_radius` of
/// an exclusion or an already accepted peak.
pub fn top_peaks(
    pg: &Periodogram,
    count: usize,
    exclusions: &[(f64, f64)],
    excl_radius: f64,
) -> Vec<Peak> {
    top_peaks_in(
        pg,
        count,
        &PeakQuery {
            exclusions,
            excl_radius,
            edge_margin: (0.0, 0.0),
        },
    )
}

pub fn top_peaks_in(pg: &Periodogram, count: usize, query: &PeakQuery<'_>) -> Vec<Peak> {
    let (pn, pm) = pg.dims();
    // rounding residue of exact zeros is not a peak
    let floor = NUMERICAL_FLOOR * pg.max_value();
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for a in 0..pn {
        for b in 0..pm {
            let v = pg.at(a, b);
            if v <= floor {
                continue;
            }
            let is_max = (-1i64..=1).all(|da| {
                (-1i64..=1).all(|db| {
                    let na = (a as i64 + da).rem_euclid(pn as i64) as usize;
                    let nb = (b as i64 + db).rem_euclid(pm as i64) as usize;
                    (na, nb) == (a, b) || pg.at(na, nb) <= v
                })
            });
            if is_max {
                candidates.push(pg.representative(a, b));
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    candidates.sort_by(|&x, &y| pg.at(y.0, y.1).total_cmp(&pg.at(x.0, x.1)).then(x.cmp(&y)));

    let dc_w = TAU / pg.src_rows as f64;
    let dc_v = TAU / pg.src_cols as f64;
    let tol = 1.0 + 1e-12;
    let mut out: Vec<Peak> = Vec::new();
    for (a, b) in candidates {
        if out.len() >= count {
            break;
        }
        let f = (pg.omega(a), pg.upsilon(b));
        let dw = angle_diff(f.0, 0.0);
        let dv = angle_diff(f.1, 0.0);
        if dw <= dc_w * tol && dv <= dc_v * tol {
            continue;
        }
        if dw * tol < query.edge_margin.0 || dv * tol < query.edge_margin.1 {
            continue;
        }
        let near = |g: &(f64, f64)| freq_distance(f, *g) <= query.excl_radius * tol;
        if query.exclusions.iter().any(near) || out.iter().map(Peak::freq).any(|g| near(&g)) {
            continue;
        }
        out.push(Peak {
            omega: f.0,
            upsilon: f.1,
            value: pg.at(a, b),
            bin: (a, b),
        });
    }
    out
}

/// `sup |(1/NM) sum x(n,m) e^{j(wn + vm)}|` over the padded grid, which equals
/// `sqrt(max I / (2 NM))`.
pub fn sup_statistic(field: &Field2D, pad_factor: usize) -> Result<f64> {
    let pg = periodogram(field, pad_factor)?;
    Ok((pg.max_value() / (2.0 * field.len() as f64)).sqrt())
}
