//! Loss suite for inverse rendering: multiscale amplitude and
//! real/imaginary spectrogram terms, shift-l1 waveform alignment, and the
//! clip-level weight cross-entropy.
//!
//! Edge STFT frames (first and last of each scale) are excluded from the
//! spectral means to avoid windowing artifacts.

use crate::error::{Error, Result};
use crate::spectral::{scale_config, stft, MULTISCALE_WINDOWS};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Weights of the total loss. Defaults `(7, 3, 0.5, 1)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub amp: f64,
    pub ri: f64,
    pub shift_l1: f64,
    pub cts: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { amp: 7.0, ri: 3.0, shift_l1: 0.5, cts: 1.0 }
    }
}

/// Which primitives emit sound in the clip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipLabels {
    pub active: Vec<bool>,
}

impl ClipLabels {
    pub fn all_active(k: usize) -> Self {
        Self { active: vec![true; k] }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.active.iter().any(|&a| a) {
            return Err(Error::Config("clip labels mark no primitive active".into()));
        }
        Ok(())
    }
}

/// Default shift-l1 search range: +-16 samples at 48 kHz, about +-11 cm
/// of path error.
pub const MAX_SHIFT_DEFAULT: usize = 16;

/// Clamp bound for the weight cross-entropy.
pub const CTS_CLAMP: f64 = 1e-7;

/// Spectral-loss grid: multiscale window sizes (hop = window/4) and the
/// sample rate they are interpreted at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossGrid {
    pub windows: Vec<usize>,
    pub sample_rate: u32,
}

impl LossGrid {
    pub fn default_at(sample_rate: u32) -> Self {
        Self { windows: MULTISCALE_WINDOWS.to_vec(), sample_rate }
    }
}

/// Frame range with edge frames dropped when there are at least three.
pub(crate) fn interior_frames(n_frames: usize) -> std::ops::Range<usize> {
    if n_frames >= 3 {
        1..n_frames - 1
    } else {
        0..n_frames
    }
}

fn check_lengths(pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "loss: lengths {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Multiscale amplitude loss: mean over scales of the mean l1 distance
/// between magnitude spectrograms.
pub fn loss_amp(pred: &[f64], gt: &[f64], grid: &LossGrid) -> Result<f64> {
    check_lengths(pred, gt)?;
    let mut acc = 0.0;
    for &w in &grid.windows {
        let cfg = scale_config(w, grid.sample_rate);
        let sp = stft(pred, &cfg)?;
        let sg = stft(gt, &cfg)?;
        let range = interior_frames(sp.frames());
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in range {
            for f in 0..sp.bins() {
                sum += (sp.data[(f, t)].norm() - sg.data[(f, t)].norm()).abs();
                count += 1;
            }
        }
        acc += sum / count.max(1) as f64;
    }
    Ok(acc / grid.windows.len() as f64)
}

/// Multiscale real/imaginary loss: mean l1 over both parts of the complex
/// spectrograms.
pub fn loss_ri(pred: &[f64], gt: &[f64], grid: &LossGrid) -> Result<f64> {
    check_lengths(pred, gt)?;
    let mut acc = 0.0;
    for &w in &grid.windows {
        let cfg = scale_config(w, grid.sample_rate);
        let sp = stft(pred, &cfg)?;
        let sg = stft(gt, &cfg)?;
        let range = interior_frames(sp.frames());
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in range {
            for f in 0..sp.bins() {
                let d = sp.data[(f, t)] - sg.data[(f, t)];
                sum += d.re.abs() + d.im.abs();
                count += 2;
            }
        }
        acc += sum / count.max(1) as f64;
    }
    Ok(acc / grid.windows.len() as f64)
}

/// Mean |pred(t) - gt(t - shift)| over the overlap for one integer shift;
/// a prediction delayed by `d` samples scores zero at `shift = d`.
pub fn l1_at_shift(pred: &[f64], gt: &[f64], shift: isize) -> f64 {
    let len = pred.len() as isize;
    let lo = shift.max(0);
    let hi = len + shift.min(0);
    let count = (hi - lo).max(0) as f64;
    if count == 0.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    for t in lo..hi {
        sum += (pred[t as usize] - gt[(t - shift) as usize]).abs();
    }
    sum / count
}

/// Shift-l1 loss: minimum over integer shifts in `[-max_shift, max_shift]`
/// of the mean l1 waveform distance on the overlap.
pub fn loss_shift_l1(pred: &[f64], gt: &[f64], max_shift: usize) -> Result<f64> {
    Ok(loss_shift_l1_argmin(pred, gt, max_shift)?.0)
}

/// Same, returning the minimizing shift (used to freeze the subgradient).
pub fn loss_shift_l1_argmin(pred: &[f64], gt: &[f64], max_shift: usize) -> Result<(f64, isize)> {
    check_lengths(pred, gt)?;
    let m = max_shift as isize;
    let mut best = (f64::INFINITY, 0isize);
    for shift in -m..=m {
        let v = l1_at_shift(pred, gt, shift);
        if v < best.0 {
            best = (v, shift);
        }
    }
    Ok(best)
}

/// Clip-level cross-entropy: per primitive take the max softmax weight
/// over frames, clamp, and apply binary cross-entropy against the labels
/// (mean over primitives).
pub fn loss_cts(weights: &Array2<f64>, labels: &ClipLabels) -> Result<f64> {
    let k = weights.nrows();
    if labels.active.len() != k {
        return Err(Error::Dimension(format!(
            "{} labels for {k} primitives",
            labels.active.len()
        )));
    }
    let mut acc = 0.0;
    for (i, &active) in labels.active.iter().enumerate() {
        let w_max = weights
            .row(i)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(CTS_CLAMP, 1.0 - CTS_CLAMP);
        acc -= if active { w_max.ln() } else { (1.0 - w_max).ln() };
    }
    Ok(acc / k as f64)
}

/// Weighted total with per-term breakdown.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub amp: f64,
    pub ri: f64,
    pub shift_l1: f64,
    pub cts: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn weighted(amp: f64, ri: f64, shift_l1: f64, cts: f64, lw: &LossWeights) -> Self {
        Self {
            amp,
            ri,
            shift_l1,
            cts,
            total: lw.amp * amp + lw.ri * ri + lw.shift_l1 * shift_l1 + lw.cts * cts,
        }
    }
}

/// Full loss between a rendered and a reference waveform.
pub fn loss_total(
    pred: &[f64],
    gt: &[f64],
    weights: &Array2<f64>,
    labels: &ClipLabels,
    lw: &LossWeights,
    grid: &LossGrid,
    max_shift: usize,
) -> Result<LossBreakdown> {
    let amp = loss_amp(pred, gt, grid)?;
    let ri = loss_ri(pred, gt, grid)?;
    let sl1 = loss_shift_l1(pred, gt, max_shift)?;
    let cts = loss_cts(weights, labels)?;
    Ok(LossBreakdown::weighted(amp, ri, sl1, cts, lw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn grid() -> LossGrid {
        LossGrid::default_at(48_000)
    }

    #[test]
    fn amp_zero_and_scaling() {
        let x = noise(8192, 1);
        assert_eq!(loss_amp(&x, &x, &grid()).unwrap(), 0.0);
        let zero = vec![0.0; x.len()];
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = loss_amp(&zero, &x, &grid()).unwrap();
        let b = loss_amp(&doubled, &x, &grid()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert!(a > 0.0);
    }

    #[test]
    fn ri_zero_and_sign_flip() {
        let x = noise(8192, 2);
        assert_eq!(loss_ri(&x, &x, &grid()).unwrap(), 0.0);
        let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
        let zero = vec![0.0; x.len()];
        let a = loss_ri(&flipped, &x, &grid()).unwrap();
        let b = loss_ri(&zero, &x, &grid()).unwrap();
        assert_relative_eq!(a, 2.0 * b, max_relative = 1e-12);
    }

    /// Oracle: rebuild the ri loss from naive DFT spectrograms at one
    /// small scale.
    #[test]
    fn ri_matches_naive_dft() {
        let g = LossGrid { windows: vec![64], sample_rate: 48_000 };
        let a = noise(320, 3);
        let b = noise(320, 4);
        let got = loss_ri(&a, &b, &g).unwrap();

        let cfg = scale_config(64, 48_000);
        let w = cfg.window();
        let frames = cfg.frame_count(a.len()).unwrap();
        let naive = |x: &[f64], f: usize, t: usize| -> num_complex::Complex64 {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for n in 0..64 {
                let ang = -2.0 * std::f64::consts::PI * f as f64 * n as f64 / 64.0;
                acc += x[t * cfg.hop + n] * w[n] * num_complex::Complex64::new(ang.cos(), ang.sin());
            }
            acc
        };
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in interior_frames(frames) {
            for f in 0..cfg.bins() {
                let d = naive(&a, f, t) - naive(&b, f, t);
                sum += d.re.abs() + d.im.abs();
                count += 2;
            }
        }
        assert_relative_eq!(got, sum / count as f64, max_relative = 1e-9);
    }

    #[test]
    fn shift_l1_alignment() {
        let x = noise(4096, 5);
        assert_eq!(loss_shift_l1(&x, &x, 16).unwrap(), 0.0);
        // delayed by 5 within range: recovered exactly
        let delayed: Vec<f64> = (0..x.len())
            .map(|i| if i >= 5 { x[i - 5] } else { 0.0 })
            .collect();
        let (v, tau) = loss_shift_l1_argmin(&delayed, &x, 16).unwrap();
        assert_eq!(tau, 5);
        assert!(v < 1e-15);
    }

    /// Brute-force oracle over all 33 shifts for an out-of-range delay.
    #[test]
    fn shift_l1_out_of_range_matches_exhaustive_scan() {
        let x = noise(4096, 6);
        let delayed: Vec<f64> = (0..x.len())
            .map(|i| if i >= 40 { x[i - 40] } else { 0.0 })
            .collect();
        let got = loss_shift_l1(&delayed, &x, 16).unwrap();
        let best = (-16..=16isize)
            .map(|s| l1_at_shift(&delayed, &x, s))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(got, best);
        assert!(got > 0.0);
    }

    #[test]
    fn cts_values() {
        // perfect prediction after clamp
        let mut w = Array2::zeros((2, 4));
        w.row_mut(0).fill(1.0);
        let labels = ClipLabels { active: vec![true, false] };
        let loss = loss_cts(&w, &labels).unwrap();
        assert!(loss <= 2.0 * 1e-6);

        // uniform uncertainty
        let w = Array2::from_elem((2, 3), 0.5);
        let loss = loss_cts(&w, &labels).unwrap();
        assert_relative_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);

        // oracle: scalar recomputation on random weights
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut w = Array2::zeros((3, 5));
        w.mapv_inplace(|_: f64| rng.gen_range(0.01..0.99));
        let labels = ClipLabels { active: vec![true, false, true] };
        let got = loss_cts(&w, &labels).unwrap();
        let mut expect = 0.0;
        for i in 0..3 {
            let m = (0..5).map(|t| w[(i, t)]).fold(f64::NEG_INFINITY, f64::max);
            expect -= if labels.active[i] { m.ln() } else { (1.0 - m).ln() };
        }
        assert_relative_eq!(got, expect / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn total_is_weighted_sum() {
        let b = LossBreakdown::weighted(1.0, 1.0, 1.0, 1.0, &LossWeights::default());
        assert_relative_eq!(b.total, 11.5, epsilon = 1e-12);

        let x = noise(8192, 8);
        let y = noise(8192, 9);
        let w = Array2::from_elem((2, 4), 0.5);
        let labels = ClipLabels::all_active(2);
        let lw = LossWeights::default();
        let b = loss_total(&x, &y, &w, &labels, &lw, &grid(), 16).unwrap();
        assert_relative_eq!(
            b.total,
            lw.amp * b.amp + lw.ri * b.ri + lw.shift_l1 * b.shift_l1 + lw.cts * b.cts,
            epsilon = 1e-15
        );
        assert!(b.amp >= 0.0 && b.ri >= 0.0 && b.shift_l1 >= 0.0 && b.cts >= 0.0);

        // zero cts weight ignores the labels entirely
        let lw0 = LossWeights { cts: 0.0, ..lw };
        let b1 = loss_total(&x, &y, &w, &labels, &lw0, &grid(), 16).unwrap();
        let other = ClipLabels { active: vec![true, false] };
        let b2 = loss_total(&x, &y, &w, &other, &lw0, &grid(), 16).unwrap();
        assert_eq!(b1.total, b2.total);
    }
}
