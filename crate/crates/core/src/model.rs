//! Domain types for the observation and noise models.
//!
//! An observation is a real field on an `N x M` lattice,
//!
//! ```text
//! y(n,m) = sum_i rho_i cos(omega_i n + upsilon_i m + phi_i) + w(n,m)
//! ```
//!
//! where `w` is a moving-average field driven by an i.i.d. innovation field `u`,
//! `w(n,m) = sum_{(r,s) in D} a(r,s) u(n-r, m-s)`. The support `D` is either a
//! finite non-symmetrical half-plane (NSHP) `D(k,l)` or a quarter-plane. Only finite
//! supports are representable; statements about the infinite-order model apply to
//! the limit of growing `(k,l)`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on sinusoid amplitudes.
pub const RHO_MAX: f64 = 1e6;

/// Minimum frequency separation used when no field size is available.
pub const DEFAULT_MIN_FREQ_SEP: f64 = 1e-3;

/// Minimum frequency separation tied to a field of the given size: four unpadded bins.
pub fn min_freq_sep_for(rows: usize, cols: usize) -> f64 {
    TAU * 4.0 / rows.max(cols) as f64
}

/// Maps an angle into `[0, 2pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest distance between two angles on the circle.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// The frequency pair describing the same real cosine with negated phase.
pub fn mirror_freq(omega: f64, upsilon: f64) -> (f64, f64) {
    (wrap_angle(TAU - omega), wrap_angle(TAU - upsilon))
}

/// Max-metric distance on the frequency torus, identifying each pair with its mirror.
///
/// `cos(wn + vm + p)` and `cos((2pi-w)n + (2pi-v)m - p)` are the same field, so two
/// regressors coincide whenever either representative matches.
pub fn freq_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let direct = angle_diff(a.0, b.0).max(angle_diff(a.1, b.1));
    let m = mirror_freq(b.0, b.1);
    let mirrored = angle_diff(a.0, m.0).max(angle_diff(a.1, m.1));
    direct.min(mirrored)
}

/// One real 2-D cosine component `rho cos(omega n + upsilon m + phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidParams {
    pub rho: f64,
    pub omega: f64,
    pub upsilon: f64,
    pub phi: f64,
}

impl SinusoidParams {
    /// Validates and normalizes a component. A negative amplitude is folded into the
    /// phase (`-rho cos(x + phi) = rho cos(x + phi + pi)`); the phase is wrapped into
    /// `[0, 2pi)`.
    pub fn new(rho: f64, omega: f64, upsilon: f64, phi: f64) -> Result<Self> {
        if ![rho, omega, upsilon, phi].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("non-finite sinusoid parameter".into()));
        }
        let (rho, phi) = if rho < 0.0 {
            (-rho, phi + PI)
        } else {
            (rho, phi)
        };
        if rho == 0.0 || rho > RHO_MAX {
            return Err(Error::InvalidModel(format!(
                "amplitude {rho} outside (0, {RHO_MAX}]"
            )));
        }
        for (name, f) in [("omega", omega), ("upsilon", upsilon)] {
            if !(f > 0.0 && f < TAU) {
                return Err(Error::InvalidModel(format!(
                    "{name} = {f} outside (0, 2pi)"
                )));
            }
        }
        Ok(Self {
            rho,
            omega,
            upsilon,
            phi: wrap_angle(phi),
        })
    }

    pub fn freq(&self) -> (f64, f64) {
        (self.omega, self.upsilon)
    }

    /// Value of the component at lattice site `(n, m)`.
    #[inline]
    pub fn eval(&self, n: f64, m: f64) -> f64 {
        self.rho * (self.omega * n + self.upsilon * m + self.phi).cos()
    }
}

impl<'de> Deserialize<'de> for SinusoidParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            rho: f64,
            omega: f64,
            upsilon: f64,
            phi: f64,
        }
        let r = Raw::deserialize(d)?;
        SinusoidParams::new(r.rho, r.omega, r.upsilon, r.phi).map_err(serde::de::Error::custom)
    }
}

/// An ordered list of sinusoid components with pairwise distinct frequencies.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ParamVectorDoc", into = "ParamVectorDoc")]
pub struct ParamVector {
    components: Vec<SinusoidParams>,
}

#[derive(Serialize, Deserialize)]
struct ParamVectorDoc {
    components: Vec<[f64; 4]>,
}

impl TryFrom<ParamVectorDoc> for ParamVector {
    type Error = Error;

    fn try_from(doc: ParamVectorDoc) -> Result<Self> {
        let comps = doc
            .components
            .iter()
            .map(|c| SinusoidParams::new(c[0], c[1], c[2], c[3]))
            .collect::<Result<Vec<_>>>()?;
        ParamVector::new(comps)
    }
}

impl From<ParamVector> for ParamVectorDoc {
    fn from(p: ParamVector) -> Self {
        ParamVectorDoc {
            components: p
                .components
                .iter()
                .map(|c| [c.rho, c.omega, c.upsilon, c.phi])
                .collect(),
        }
    }
}

impl ParamVector {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a vector, checking distinctness against [`DEFAULT_MIN_FREQ_SEP`].
    pub fn new(components: Vec<SinusoidParams>) -> Result<Self> {
        Self::with_min_sep(components, DEFAULT_MIN_FREQ_SEP)
    }

    /// Builds a vector whose frequency pairs are at least `min_sep` apart in the
    /// mirror-aware max metric.
    pub fn with_min_sep(components: Vec<SinusoidParams>, min_sep: f64) -> Result<Self> {
        for (i, a) in components.iter().enumerate() {
            for b in &components[i + 1..] {
                let d = freq_distance(a.freq(), b.freq());
                if d < min_sep {
                    return Err(Error::InvalidModel(format!(
                        "frequencies {:?} and {:?} are {d:.3e} apart, below {min_sep:.3e}",
                        a.freq(),
                        b.freq()
                    )));
                }
            }
        }
        Ok(Self { components })
    }

    /// Same components sorted by descending amplitude.
    pub fn canonical(mut self) -> Self {
        self.components
            .sort_by(|a, b| b.rho.total_cmp(&a.rho).then(a.omega.total_cmp(&b.omega)));
        self
    }

    pub fn is_canonical(&self) -> bool {
        self.components.windows(2).all(|w| w[0].rho >= w[1].rho)
    }

    pub fn components(&self) -> &[SinusoidParams] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn freqs(&self) -> Vec<(f64, f64)> {
        self.components.iter().map(|c| c.freq()).collect()
    }

    /// Sum of all components at `(n, m)`.
    pub fn eval(&self, n: usize, m: usize) -> f64 {
        let (n, m) = (n as f64, m as f64);
        self.components.iter().map(|c| c.eval(n, m)).sum()
    }
}

/// Shape of the finite moving-average support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    /// `{r = 0, 0 <= s <= l} u {0 < r <= k, -l <= s <= l}`
    Nshp,
    /// `{0 <= r <= k, 0 <= s <= l}`
    QuarterPlane,
}

impl SupportKind {
    pub fn contains(self, extent_k: usize, extent_l: usize, r: i64, s: i64) -> bool {
        let (k, l) = (extent_k as i64, extent_l as i64);
        match self {
            SupportKind::Nshp => {
                (r == 0 && (0..=l).contains(&s)) || (r > 0 && r <= k && (-l..=l).contains(&s))
            }
            SupportKind::QuarterPlane => (0..=k).contains(&r) && (0..=l).contains(&s),
        }
    }
}

/// Finite-support moving-average coefficients `a(r,s)` with innovation variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaDoc", into = "MaDoc")]
pub struct MaCoefficients {
    support_kind: SupportKind,
    extent_k: usize,
    extent_l: usize,
    coeffs: BTreeMap<(i64, i64), f64>,
    sigma2: f64,
}

#[derive(Serialize, Deserialize)]
struct MaDoc {
    support_kind: SupportKind,
    extent_k: usize,
    extent_l: usize,
    coeffs: Vec<(i64, i64, f64)>,
    sigma2: f64,
}

impl TryFrom<MaDoc> for MaCoefficients {
    type Error = Error;

    fn try_from(d: MaDoc) -> Result<Self> {
        MaCoefficients::new(d.support_kind, d.extent_k, d.extent_l, d.coeffs, d.sigma2)
    }
}

impl From<MaCoefficients> for MaDoc {
    fn from(ma: MaCoefficients) -> Self {
        MaDoc {
            support_kind: ma.support_kind,
            extent_k: ma.extent_k,
            extent_l: ma.extent_l,
            coeffs: ma.coeffs.iter().map(|(&(r, s), &v)| (r, s, v)).collect(),
            sigma2: ma.sigma2,
        }
    }
}

impl MaCoefficients {
    pub fn new(
        support_kind: SupportKind,
        extent_k: usize,
        extent_l: usize,
        coeffs: impl IntoIterator<Item = (i64, i64, f64)>,
        sigma2: f64,
    ) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "innovation variance {sigma2} must be > 0"
            )));
        }
        let mut map = BTreeMap::new();
        for (r, s, v) in coeffs {
            if !support_kind.contains(extent_k, extent_l, r, s) {
                return Err(Error::InvalidModel(format!(
                    "coefficient ({r},{s}) outside {support_kind:?} support ({extent_k},{extent_l})"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "coefficient ({r},{s}) is not finite"
                )));
            }
            if map.insert((r, s), v).is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate coefficient ({r},{s})"
                )));
            }
        }
        if map.values().all(|&v| v == 0.0) {
            return Err(Error::InvalidModel("all MA coefficients are zero".into()));
        }
        Ok(Self {
            support_kind,
            extent_k,
            extent_l,
            coeffs: map,
            sigma2,
        })
    }

    /// `a(0,0) = 1` on a quarter-plane support of extent zero.
    pub fn white(sigma2: f64) -> Result<Self> {
        Self::new(SupportKind::QuarterPlane, 0, 0, [(0, 0, 1.0)], sigma2)
    }

    pub fn support_kind(&self) -> SupportKind {
        self.support_kind
    }

    pub fn extent_k(&self) -> usize {
        self.extent_k
    }

    pub fn extent_l(&self) -> usize {
        self.extent_l
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn coeffs(&self) -> impl Iterator<Item = ((i64, i64), f64)> + '_ {
        self.coeffs.iter().map(|(&k, &v)| (k, v))
    }

    pub fn get(&self, r: i64, s: i64) -> f64 {
        self.coeffs.get(&(r, s)).copied().unwrap_or(0.0)
    }

    /// Same coefficients declared on a different support (must still contain them).
    pub fn with_support(&self, kind: SupportKind) -> Result<Self> {
        Self::new(
            kind,
            self.extent_k,
            self.extent_l,
            self.coeffs.iter().map(|(&(r, s), &v)| (r, s, v)),
            self.sigma2,
        )
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(
            self.support_kind,
            self.extent_k,
            self.extent_l,
            self.coeffs.iter().map(|(&(r, s), &v)| (r, s, v)),
            sigma2,
        )
    }

    /// `sum a(r,s)^2`
    pub fn sum_sq(&self) -> f64 {
        self.coeffs.values().map(|v| v * v).sum()
    }

    /// `sum |a(r,s)|`
    pub fn sum_abs(&self) -> f64 {
        self.coeffs.values().map(|v| v.abs()).sum()
    }

    /// Variance of the noise field, `sigma^2 sum a^2`.
    pub fn noise_variance(&self) -> f64 {
        self.sigma2 * self.sum_sq()
    }

    /// Theoretical covariance `sigma^2 sum a(r,s) a(r+p, s+q)` at lag `(p, q)`.
    pub fn autocovariance(&self, p: i64, q: i64) -> f64 {
        self.sigma2
            * self
                .coeffs
                .iter()
                .map(|(&(r, s), &v)| v * self.get(r + p, s + q))
                .sum::<f64>()
    }
}

/// Spectral density of the MA noise, `sigma^2 |sum a(r,s) e^{j(omega r + upsilon s)}|^2`.
pub fn spectral_density(ma: &MaCoefficients, omega: f64, upsilon: f64) -> f64 {
    let h: Complex64 = ma
        .coeffs()
        .map(|((r, s), a)| Complex64::from_polar(a, omega * r as f64 + upsilon * s as f64))
        .sum();
    ma.sigma2() * h.norm_sqr()
}

/// The penalty constant `(sum_{(r,s)} sum_{(q,t)} |a(r,s) a(q,t)|) / sum a^2`,
/// evaluated as `(sum |a|)^2 / sum a^2`.
pub fn noise_constant_a(ma: &MaCoefficients) -> Result<f64> {
    let sq = ma.sum_sq();
    if sq == 0.0 {
        return Err(Error::InvalidModel("all MA coefficients are zero".into()));
    }
    let abs = ma.sum_abs();
    Ok(abs * abs / sq)
}

/// Law of the i.i.d. innovation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Uniform,
    Laplace,
}

/// Innovation law, variance and seed. All supported laws have zero mean and finite
/// moments of every order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub distribution: Distribution,
    pub sigma2: f64,
    pub master_seed: u64,
}

impl InnovationSpec {
    pub fn new(distribution: Distribution, sigma2: f64, master_seed: u64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "innovation variance {sigma2} must be > 0"
            )));
        }
        Ok(Self {
            distribution,
            sigma2,
            master_seed,
        })
    }
}

/// A real field on an `n_rows x n_cols` lattice whose first site sits at
/// `(origin_row, origin_col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n_rows: usize,
    n_cols: usize,
    origin_row: i64,
    origin_col: i64,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_origin(n_rows, n_cols, 0, 0, values)
    }

    pub fn with_origin(
        n_rows: usize,
        n_cols: usize,
        origin_row: i64,
        origin_col: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "field dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {n_rows}x{n_cols} field",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "field contains non-finite values".into(),
            ));
        }
        Ok(Self {
            n_rows,
            n_cols,
            origin_row,
            origin_col,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::new(n_rows, n_cols, vec![0.0; n_rows * n_cols])
    }

    /// Builds a field from a function of the (zero-based) site index.
    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut v = Vec::with_capacity(n_rows * n_cols);
        for n in 0..n_rows {
            for m in 0..n_cols {
                v.push(f(n, m));
            }
        }
        Self::new(n_rows, n_cols, v)
    }

    pub fn rows(&self) -> usize {
        self.n_rows
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    /// `N * M`
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn origin(&self) -> (i64, i64) {
        (self.origin_row, self.origin_col)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Row slice by local (zero-based) index.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_cols..(n + 1) * self.n_cols]
    }

    /// Value at local index.
    #[inline]
    pub fn at(&self, n: usize, m: usize) -> f64 {
        self.values[n * self.n_cols + m]
    }

    /// Value at absolute lattice index, if covered.
    pub fn get(&self, n: i64, m: i64) -> Option<f64> {
        let (ln, lm) = (n - self.origin_row, m - self.origin_col);
        if ln < 0 || lm < 0 || ln >= self.n_rows as i64 || lm >= self.n_cols as i64 {
            return None;
        }
        Some(self.at(ln as usize, lm as usize))
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_origin(
            self.n_rows,
            self.n_cols,
            self.origin_row,
            self.origin_col,
            self.values.iter().map(|v| v * c).collect(),
        )
    }
}
