//! Complex spherical harmonics, associated Legendre polynomials, and
//! spherical Hankel radial gains.
//!
//! Conventions used throughout the crate:
//! - Condon–Shortley phase `(-1)^m` is folded into `assoc_legendre`.
//! - `Y_{n,-m} = (-1)^m conj(Y_{n,m})`.
//! - Polar angle `theta` is measured from +z, azimuth `phi` from +x.
//! - Spherical Hankel functions are first kind (outgoing waves for the
//!   `e^{-i omega t}` time convention).

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Default speed of sound in m/s, configurable at the scene level.
pub const V_SOUND_DEFAULT: f64 = 343.0;

/// Harmonic order/degree pair with `|m| <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonicIndex {
    pub n: u32,
    pub m: i32,
}

impl HarmonicIndex {
    pub fn new(n: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > n {
            return Err(Error::Domain(format!("|m| = {} exceeds n = {n}", m.abs())));
        }
        Ok(Self { n, m })
    }

    /// Linear index `l = n^2 + n + m`, a bijection onto `0..(N+1)^2`.
    pub fn linear(&self) -> usize {
        (self.n * self.n) as usize + (self.n as i32 + self.m) as usize
    }

    /// Inverse of [`linear`](Self::linear).
    pub fn from_linear(l: usize) -> Self {
        let n = (l as f64).sqrt() as u32;
        let m = l as i32 - (n * n + n) as i32;
        Self { n, m }
    }

    /// All indices for orders `0..=order` in linear-index order.
    pub fn all_up_to(order: u32) -> Vec<Self> {
        (0..((order + 1) * (order + 1)) as usize)
            .map(Self::from_linear)
            .collect()
    }
}

/// Acoustic wavenumber in rad/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber {
    pub k: f64,
}

impl Wavenumber {
    /// `k = 2 pi f / v_sound`.
    pub fn from_frequency(freq_hz: f64, v_sound: f64) -> Self {
        Self {
            k: 2.0 * PI * freq_hz / v_sound,
        }
    }
}

/// Associated Legendre polynomial `P_nm(x)` with Condon–Shortley phase,
/// `0 <= m <= n`, `|x| <= 1`.
///
/// Recurrence is generic in `n`; only `n <= 2` is covered by the
/// validated surface.
pub fn assoc_legendre(n: u32, m: u32, x: f64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("m = {m} exceeds n = {n}")));
    }
    if x.abs() > 1.0 {
        return Err(Error::Domain(format!("|x| = {} exceeds 1", x.abs())));
    }
    // P_mm = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let sin_term = (1.0 - x * x).max(0.0).sqrt();
    let mut p_mm = 1.0;
    for i in 1..=m {
        p_mm *= -((2 * i - 1) as f64) * sin_term;
    }
    if n == m {
        return Ok(p_mm);
    }
    // P_{m+1,m} = x (2m+1) P_mm
    let mut p_prev = p_mm;
    let mut p_curr = x * (2 * m + 1) as f64 * p_mm;
    for nn in (m + 2)..=n {
        let (nf, mf) = (nn as f64, m as f64);
        let p_next = ((2.0 * nf - 1.0) * x * p_curr - (nf + mf - 1.0) * p_prev) / (nf - mf);
        p_prev = p_curr;
        p_curr = p_next;
    }
    Ok(p_curr)
}

/// Derivative `d/dtheta P_nm(cos theta)` (Condon–Shortley convention),
/// via the pole-safe two-term relation
/// `dP_nm/dtheta = (P_n^{m+1} - (n+m)(n-m+1) P_n^{m-1}) / 2`
/// with `P_n^{-1} = -P_n^1 / (n(n+1))`.
pub fn assoc_legendre_dtheta(n: u32, m: u32, cos_theta: f64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("m = {m} exceeds n = {n}")));
    }
    let upper = if m + 1 > n {
        0.0
    } else {
        assoc_legendre(n, m + 1, cos_theta)?
    };
    let lower = if m == 0 {
        if n == 0 {
            0.0
        } else {
            -assoc_legendre(n, 1, cos_theta)? / (n as f64 * (n as f64 + 1.0))
        }
    } else {
        assoc_legendre(n, m - 1, cos_theta)?
    };
    let (nf, mf) = (n as f64, m as f64);
    Ok(0.5 * (upper - (nf + mf) * (nf - mf + 1.0) * lower))
}

fn sph_norm(n: u32, m: u32) -> f64 {
    // sqrt((2n+1)/(4 pi) * (n-m)!/(n+m)!), factorial ratio in log space
    let mut log_ratio = 0.0;
    for k in (n - m + 1)..=(n + m) {
        log_ratio -= (k as f64).ln();
    }
    ((2 * n + 1) as f64 / (4.0 * PI) * log_ratio.exp()).sqrt()
}

/// Complex spherical harmonic `Y_nm(theta, phi)`.
pub fn sph_harmonic(idx: HarmonicIndex, theta: f64, phi: f64) -> Result<Complex64> {
    let m_abs = idx.m.unsigned_abs();
    let p = assoc_legendre(idx.n, m_abs, theta.cos())?;
    let norm = sph_norm(idx.n, m_abs);
    let y_pos = norm * p * Complex64::new(0.0, m_abs as f64 * phi).exp();
    if idx.m >= 0 {
        Ok(y_pos)
    } else {
        // Y_{n,-m} = (-1)^m conj(Y_{n,m})
        let sign = if m_abs % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * y_pos.conj())
    }
}

/// `d/dtheta Y_nm(theta, phi)`.
pub fn sph_harmonic_dtheta(idx: HarmonicIndex, theta: f64, phi: f64) -> Result<Complex64> {
    let m_abs = idx.m.unsigned_abs();
    let dp = assoc_legendre_dtheta(idx.n, m_abs, theta.cos())?;
    let norm = sph_norm(idx.n, m_abs);
    let dy_pos = norm * dp * Complex64::new(0.0, m_abs as f64 * phi).exp();
    if idx.m >= 0 {
        Ok(dy_pos)
    } else {
        let sign = if m_abs % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * dy_pos.conj())
    }
}

/// `d/dphi Y_nm = i m Y_nm` (holds for negative m as well).
pub fn sph_harmonic_dphi(idx: HarmonicIndex, theta: f64, phi: f64) -> Result<Complex64> {
    Ok(Complex64::new(0.0, idx.m as f64) * sph_harmonic(idx, theta, phi)?)
}

/// Spherical Hankel function of the first kind `h_n(z)`, `z > 0`.
///
/// Closed forms for n = 0, 1; upward recurrence
/// `h_{n+1} = (2n+1)/z h_n - h_{n-1}` beyond.
pub fn sph_hankel(n: u32, z: f64) -> Result<Complex64> {
    if z <= 0.0 {
        return Err(Error::Domain(format!("sph_hankel argument z = {z} <= 0")));
    }
    let eiz = Complex64::new(z.cos(), z.sin());
    let h0 = Complex64::new(0.0, -1.0) * eiz / z;
    if n == 0 {
        return Ok(h0);
    }
    let h1 = -Complex64::new(z, 1.0) * eiz / (z * z);
    if n == 1 {
        return Ok(h1);
    }
    let mut prev = h0;
    let mut curr = h1;
    for k in 1..n {
        let next = (2 * k + 1) as f64 / z * curr - prev;
        prev = curr;
        curr = next;
    }
    Ok(curr)
}

/// Derivative `h_n'(z) = h_{n-1}(z) - (n+1)/z * h_n(z)`, with `h_0' = -h_1`.
pub fn sph_hankel_deriv(n: u32, z: f64) -> Result<Complex64> {
    if n == 0 {
        return Ok(-sph_hankel(1, z)?);
    }
    Ok(sph_hankel(n - 1, z)? - (n as f64 + 1.0) / z * sph_hankel(n, z)?)
}

/// Radial propagation gain `h_n(k r) / h_n(k r_ref)`.
///
/// The DC bin (`k = 0`) returns exactly zero: Hankel functions are
/// undefined there and microphones carry no DC content.
pub fn radial_gain(n: u32, k: Wavenumber, r: f64, r_ref: f64) -> Result<Complex64> {
    if r < crate::error::R_MIN {
        return Err(Error::near_field(r, "radial_gain"));
    }
    if r_ref <= 0.0 {
        return Err(Error::Domain(format!("r_ref = {r_ref} must be positive")));
    }
    if k.k == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(sph_hankel(n, k.k * r)? / sph_hankel(n, k.k * r_ref)?)
}

/// `d/dr` of [`radial_gain`]: `k h_n'(k r) / h_n(k r_ref)`.
pub fn radial_gain_dr(n: u32, k: Wavenumber, r: f64, r_ref: f64) -> Result<Complex64> {
    if k.k == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(k.k * sph_hankel_deriv(n, k.k * r)? / sph_hankel(n, k.k * r_ref)?)
}
