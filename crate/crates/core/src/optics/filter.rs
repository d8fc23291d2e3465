//! Chebyshev type II low-pass design and causal application.
//!
//! The design path is the classical one: analog prototype, low-pass frequency
//! scaling with prewarping at the stopband edge, bilinear transform, then
//! expansion to transfer-function coefficients. Type II filters are
//! parameterized by stopband quantities (edge + minimum attenuation); the
//! passband figures in [`FilterSpec`] are descriptive only and the achieved
//! passband droop is reported rather than designed for.
//!
//! Filtering is causal (forward-only, zero initial conditions) because the
//! downstream consumer is an online system; the group delay this induces in
//! the sub-0.1 Hz passband is accepted.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::HemoSeries;
use crate::error::{Error, Result};

/// Low-pass design parameters. Defaults to the pipeline's 3rd-order
/// Chebyshev II at 10 Hz: stopband edge 0.5 Hz, 50 dB minimum attenuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub stopband_hz: f64,
    pub stopband_attenuation_db: f64,
    /// Descriptive passband edge; not a design input.
    pub passband_hz: f64,
    /// Descriptive passband ripple; not a design input.
    pub passband_ripple_db: f64,
    pub sample_rate_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            order: 3,
            stopband_hz: 0.5,
            stopband_attenuation_db: 50.0,
            passband_hz: 0.1,
            passband_ripple_db: 0.1,
            sample_rate_hz: 10.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::Config(format!("filter order must be >= 1, got {}", self.order)));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.stopband_hz > 0.0 && self.stopband_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::Config(format!(
                "stopband edge {} Hz must lie in (0, {}) Hz",
                self.stopband_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        if !(self.passband_hz > 0.0 && self.passband_hz < self.stopband_hz) {
            return Err(Error::Config(format!(
                "passband edge {} Hz must lie in (0, stopband {} Hz)",
                self.passband_hz, self.stopband_hz
            )));
        }
        if !(self.stopband_attenuation_db > 0.0) {
            return Err(Error::Config(format!(
                "stopband attenuation must be positive, got {} dB",
                self.stopband_attenuation_db
            )));
        }
        Ok(())
    }
}

/// Discrete recursive filter in transfer-function form, `a[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRealization {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl FilterRealization {
    /// Complex frequency response at `f_hz` for sampling rate `fs_hz`.
    pub fn response_at(&self, f_hz: f64, fs_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / fs_hz;
        let z_inv = Complex64::new(0.0, -w).exp();
        let num = polyval(&self.b, z_inv);
        let den = polyval(&self.a, z_inv);
        num / den
    }

    pub fn magnitude_db_at(&self, f_hz: f64, fs_hz: f64) -> f64 {
        20.0 * self.response_at(f_hz, fs_hz).norm().log10()
    }

    /// Causal single-channel run, Direct Form II transposed, zero initial state.
    pub fn filter_channel(&self, x: &[f64]) -> Vec<f64> {
        let n = self.a.len().max(self.b.len());
        let mut b = self.b.clone();
        let mut a = self.a.clone();
        b.resize(n, 0.0);
        a.resize(n, 0.0);
        let mut state = vec![0.0; n.saturating_sub(1)];
        let mut y = Vec::with_capacity(x.len());
        for &xi in x {
            let yi = b[0] * xi + state.first().copied().unwrap_or(0.0);
            for k in 0..state.len() {
                let next = state.get(k + 1).copied().unwrap_or(0.0);
                state[k] = b[k + 1] * xi + next - a[k + 1] * yi;
            }
            y.push(yi);
        }
        y
    }
}

/// Horner evaluation of `c[0] + c[1] x + c[2] x^2 + ...`.
fn polyval(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

/// Designs the discrete Chebyshev type II low-pass from (order, stopband
/// edge, stopband attenuation). DC gain is normalized to exactly 1.
pub fn design_lowpass(spec: &FilterSpec) -> Result<FilterRealization> {
    spec.validate()?;
    let (z, p, k) = cheb2ap(spec.order, spec.stopband_attenuation_db);

    // Prewarp the stopband edge so the bilinear transform lands it exactly.
    let wn = spec.stopband_hz / (spec.sample_rate_hz / 2.0);
    let fs_internal = 2.0;
    let warped = 2.0 * fs_internal * (PI * wn / fs_internal).tan();

    let (z, p, k) = lp2lp_zpk(&z, &p, k, warped);
    let (z, p, k) = bilinear_zpk(&z, &p, k, fs_internal);

    if let Some(bad) = p.iter().find(|pole| pole.norm() >= 1.0) {
        return Err(Error::Numerical(format!(
            "designed filter is unstable: pole at |z| = {}",
            bad.norm()
        )));
    }

    let mut b = real_poly_from_roots(&z, k);
    let a = real_poly_from_roots(&p, 1.0);

    // Exact unity DC gain.
    let dc = b.iter().sum::<f64>() / a.iter().sum::<f64>();
    for c in &mut b {
        *c /= dc;
    }

    Ok(FilterRealization { b, a })
}

/// Analog Chebyshev type II prototype (unit stopband edge): zeros, poles, gain.
fn cheb2ap(order: usize, rs_db: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let n = order as f64;
    let de = 1.0 / (10f64.powf(0.1 * rs_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n;

    // Imaginary-axis zeros; odd orders skip the midpoint (zero at infinity).
    let mut zeros = Vec::new();
    let m_vals: Vec<i64> = if order % 2 == 1 {
        ((-(order as i64) + 1)..0)
            .step_by(2)
            .chain((2..order as i64).step_by(2))
            .collect()
    } else {
        ((-(order as i64) + 1)..order as i64).step_by(2).collect()
    };
    for &m in &m_vals {
        let s = (m as f64 * PI / (2.0 * n)).sin();
        zeros.push(-(Complex64::new(0.0, 1.0) / s).conj());
    }

    // Poles: reciprocal of the type-I pole pattern stretched by sinh/cosh(mu).
    let mut poles = Vec::new();
    let mut m = -(order as i64) + 1;
    while m < order as i64 {
        let theta = PI * m as f64 / (2.0 * n);
        let raw = -Complex64::new(0.0, theta).exp();
        let stretched = Complex64::new(mu.sinh() * raw.re, mu.cosh() * raw.im);
        poles.push(1.0 / stretched);
        m += 2;
    }

    let num: Complex64 = poles.iter().map(|p| -p).product();
    let den: Complex64 = zeros.iter().map(|z| -z).product();
    let k = (num / den).re;
    (zeros, poles, k)
}

/// Scales an analog prototype to cutoff `wo`.
fn lp2lp_zpk(
    z: &[Complex64],
    p: &[Complex64],
    k: f64,
    wo: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = p.len() - z.len();
    let z2: Vec<_> = z.iter().map(|v| v * wo).collect();
    let p2: Vec<_> = p.iter().map(|v| v * wo).collect();
    (z2, p2, k * wo.powi(degree as i32))
}

/// Bilinear transform of an analog (z, p, k) to the digital plane.
fn bilinear_zpk(
    z: &[Complex64],
    p: &[Complex64],
    k: f64,
    fs: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = p.len() - z.len();
    let fs2 = Complex64::new(2.0 * fs, 0.0);

    let mut z_d: Vec<_> = z.iter().map(|v| (fs2 + v) / (fs2 - v)).collect();
    let p_d: Vec<_> = p.iter().map(|v| (fs2 + v) / (fs2 - v)).collect();
    // Zeros at infinity map to the Nyquist point.
    z_d.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(degree));

    let num: Complex64 = z.iter().map(|v| fs2 - v).product();
    let den: Complex64 = p.iter().map(|v| fs2 - v).product();
    let k_d = k * (num / den).re;
    (z_d, p_d, k_d)
}

/// Expands `k * Π (x - r_i)` into real coefficients, highest order first.
/// Roots must form conjugate pairs (or be real); tiny imaginary residue from
/// rounding is dropped.
fn real_poly_from_roots(roots: &[Complex64], k: f64) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re * k).collect()
}

/// Causal per-channel filtering of the continuous concentration streams.
pub fn apply_filter(filter: &FilterRealization, series: &HemoSeries) -> Result<HemoSeries> {
    series.validate()?;
    if series.samples() == 0 {
        return Err(Error::InvalidInput("cannot filter an empty series".into()));
    }
    Ok(HemoSeries {
        sample_rate_hz: series.sample_rate_hz,
        hbo: filter_matrix(filter, &series.hbo),
        hbr: filter_matrix(filter, &series.hbr),
    })
}

/// Runs the filter along every row of a `(channels, samples)` matrix.
pub fn filter_matrix(filter: &FilterRealization, x: &ndarray::Array2<f64>) -> ndarray::Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let filtered = filter.filter_channel(row.as_slice().expect("row-major layout"));
        for (dst, src) in row.iter_mut().zip(filtered) {
            *dst = src;
        }
    }
    out
}
