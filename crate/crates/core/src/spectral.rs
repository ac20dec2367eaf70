//! STFT / ISTFT on the fixed analysis grid, the multiscale magnitude
//! transforms used by the losses, and the adjoint operators used by the
//! analytic gradient path.
//!
//! Framing: frame `t` covers samples `[t*hop, t*hop + window_len)` with no
//! centering or reflect padding; windows are periodic Hann; frames are
//! zero-padded symmetrically up to `fft_len` before the FFT.

use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// STFT grid parameters. The default matches the 48 kHz analysis setup:
/// Hann window 512, hop 128, FFT length 1022 (512 frequency bins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 128,
            fft_len: 1022,
            sample_rate: 48_000,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.hop == 0 || self.sample_rate == 0 {
            return Err(Error::Config(
                "window_len, hop and sample_rate must be positive".into(),
            ));
        }
        if self.fft_len < self.window_len {
            return Err(Error::Config(format!(
                "fft_len {} < window_len {}",
                self.fft_len, self.window_len
            )));
        }
        Ok(())
    }

    /// Number of one-sided frequency bins, `fft_len/2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Center frequency of bin `i` in Hz.
    pub fn bin_freq(&self, i: usize) -> f64 {
        i as f64 * self.sample_rate as f64 / self.fft_len as f64
    }

    /// Frame count for a signal of `len` samples: `(len - window)/hop + 1`.
    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len < self.window_len {
            return Err(Error::Config(format!(
                "signal length {len} shorter than window {}",
                self.window_len
            )));
        }
        Ok((len - self.window_len) / self.hop + 1)
    }

    /// Center time of frame `t` in seconds.
    pub fn frame_time(&self, t: usize) -> f64 {
        (t * self.hop + self.window_len / 2) as f64 / self.sample_rate as f64
    }

    /// Samples spanned by `n_frames` frames.
    pub fn span(&self, n_frames: usize) -> usize {
        (n_frames.max(1) - 1) * self.hop + self.window_len
    }

    /// Periodic Hann window of `window_len` samples.
    pub fn window(&self) -> Vec<f64> {
        hann(self.window_len)
    }
}

/// Periodic Hann window `w[n] = 0.5 (1 - cos(2 pi n / len))`.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Time-frequency grid of complex values, bins x frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn zeros(config: StftConfig, n_frames: usize) -> Self {
        Self {
            data: Array2::zeros((config.bins(), n_frames)),
            config,
        }
    }

    pub fn bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.frames()).map(|t| self.config.frame_time(t)).collect()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }
}

/// Forward STFT. One-sided spectrum on the config grid.
pub fn stft(signal: &[f64], cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let n_frames = cfg.frame_count(signal.len())?;
    let window = cfg.window();
    let pad = (cfg.fft_len - cfg.window_len) / 2;
    let bins = cfg.bins();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let mut out = Array2::zeros((bins, n_frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
    for t in 0..n_frames {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let start = t * cfg.hop;
        for n in 0..cfg.window_len {
            buf[pad + n] = Complex64::new(signal[start + n] * window[n], 0.0);
        }
        fft.process(&mut buf);
        for (i, value) in buf.iter().take(bins).enumerate() {
            out[(i, t)] = *value;
        }
    }
    Ok(Spectrogram { data: out, config: *cfg })
}

/// Per-sample overlap-add sum of the analysis window over the frame set;
/// the inverse-transform normalizer (2.0 in the interior of the default
/// grid).
fn window_ola_sum(cfg: &StftConfig, n_frames: usize) -> Vec<f64> {
    let window = cfg.window();
    let mut acc = vec![0.0; cfg.span(n_frames)];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for n in 0..cfg.window_len {
            acc[start + n] += window[n];
        }
    }
    acc
}

const OLA_FLOOR: f64 = 1e-12;

fn hermitian_expand(cfg: &StftConfig, column: &[Complex64], buf: &mut [Complex64]) {
    let bins = cfg.bins();
    buf[..bins].copy_from_slice(column);
    for i in 1..bins {
        let mirror = cfg.fft_len - i;
        if mirror >= bins {
            buf[mirror] = column[i].conj();
        }
    }
}

/// Inverse STFT by plain overlap-add of the full inverse-transform
/// buffers, normalized per sample by the analysis-window overlap sum;
/// trimmed or zero-padded to `out_len`.
///
/// No synthesis window is applied: rendered spectra carry propagation
/// phase ramps, and a synthesis window would attenuate time-shifted frame
/// content by the window autocorrelation. Plain overlap-add reconstructs
/// shifts exactly as long as they stay within the `(fft_len -
/// window_len)/2` zero-pad headroom per side.
pub fn istft(spec: &Spectrogram, cfg: &StftConfig, out_len: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if spec.config != *cfg {
        return Err(Error::Config("spectrogram config mismatch".into()));
    }
    if spec.bins() != cfg.bins() {
        return Err(Error::Dimension(format!(
            "{} bins but config wants {}",
            spec.bins(),
            cfg.bins()
        )));
    }
    let n_frames = spec.frames();
    let pad = (cfg.fft_len - cfg.window_len) / 2;
    let norm = window_ola_sum(cfg, n_frames);
    let span = cfg.span(n_frames);

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_len);
    let mut acc = vec![0.0; span];
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
    let mut col = vec![Complex64::new(0.0, 0.0); cfg.bins()];
    let scale = 1.0 / cfg.fft_len as f64;
    for t in 0..n_frames {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, c) in col.iter_mut().enumerate() {
            *c = spec.data[(i, t)];
        }
        hermitian_expand(cfg, &col, &mut buf);
        ifft.process(&mut buf);
        let base = (t * cfg.hop) as isize - pad as isize;
        for (n, value) in buf.iter().enumerate() {
            let s = base + n as isize;
            if s >= 0 && (s as usize) < span {
                acc[s as usize] += value.re * scale;
            }
        }
    }
    for (a, w) in acc.iter_mut().zip(&norm) {
        if *w > OLA_FLOOR {
            *a /= *w;
        } else {
            *a = 0.0;
        }
    }
    acc.resize(out_len, 0.0);
    Ok(acc)
}

/// Windows of the multiscale magnitude loss, largest first.
pub const MULTISCALE_WINDOWS: [usize; 4] = [2048, 1024, 512, 256];

/// Config for one scale of the multiscale set: `fft = window`,
/// `hop = window / 4`.
pub fn scale_config(window: usize, sample_rate: u32) -> StftConfig {
    StftConfig {
        window_len: window,
        hop: window / 4,
        fft_len: window,
        sample_rate,
    }
}

/// Magnitude spectrograms at the standard window sizes.
pub fn multiscale_stft(signal: &[f64], sample_rate: u32) -> Result<Vec<Array2<f64>>> {
    multiscale_stft_windows(signal, sample_rate, &MULTISCALE_WINDOWS)
}

/// Magnitude spectrograms at caller-provided window sizes.
pub fn multiscale_stft_windows(
    signal: &[f64],
    sample_rate: u32,
    windows: &[usize],
) -> Result<Vec<Array2<f64>>> {
    let largest = windows.iter().copied().max().unwrap_or(0);
    if signal.len() < largest {
        return Err(Error::Config(format!(
            "signal length {} shorter than largest window {largest}",
            signal.len()
        )));
    }
    windows
        .iter()
        .map(|&w| Ok(stft(signal, &scale_config(w, sample_rate))?.magnitude()))
        .collect()
}

/// Adjoint of [`stft`] as a real-linear map: pushes a spectrogram-domain
/// gradient (Wirtinger convention `dL/dRe + i dL/dIm`) back to the signal.
pub fn adjoint_stft(grad: &Array2<Complex64>, cfg: &StftConfig, signal_len: usize) -> Vec<f64> {
    let n_frames = grad.ncols();
    let window = cfg.window();
    let pad = (cfg.fft_len - cfg.window_len) / 2;
    let bins = cfg.bins();

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_len);
    let mut out = vec![0.0; signal_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
    for t in 0..n_frames {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for i in 0..bins {
            buf[i] = grad[(i, t)];
        }
        // adjoint of the forward DFT restricted to one-sided bins:
        // Re of the unnormalized inverse transform
        ifft.process(&mut buf);
        let start = t * cfg.hop;
        for n in 0..cfg.window_len {
            if start + n < signal_len {
                out[start + n] += buf[pad + n].re * window[n];
            }
        }
    }
    out
}

/// Adjoint of [`istft`]: pushes a waveform-domain gradient back to the
/// one-sided spectrogram bins (Wirtinger convention).
pub fn adjoint_istft(grad_wave: &[f64], cfg: &StftConfig, n_frames: usize) -> Array2<Complex64> {
    let pad = (cfg.fft_len - cfg.window_len) / 2;
    let bins = cfg.bins();
    let norm = window_ola_sum(cfg, n_frames);
    let span = cfg.span(n_frames);

    let mut g = vec![0.0; span];
    for (i, &v) in grad_wave.iter().enumerate().take(span) {
        if norm[i] > OLA_FLOOR {
            g[i] = v / norm[i];
        }
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let scale = 1.0 / cfg.fft_len as f64;
    let mut out = Array2::zeros((bins, n_frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
    for t in 0..n_frames {
        let base = (t * cfg.hop) as isize - pad as isize;
        for (n, value) in buf.iter_mut().enumerate() {
            let s = base + n as isize;
            *value = if s >= 0 && (s as usize) < span {
                Complex64::new(g[s as usize] * scale, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        // adjoint of hermitian expansion folds the mirrored bins back
        for i in 0..bins {
            let mut v = buf[i];
            if i > 0 {
                let mirror = cfg.fft_len - i;
                if mirror >= bins {
                    v += buf[mirror].conj();
                }
            }
            out[(i, t)] = v;
        }
    }
    out
}
