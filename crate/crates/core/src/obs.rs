//! Microphone-array observations on the analysis grid: one complex
//! spectrogram per channel. This is the currency the inverse problem
//! consumes; waveform recordings are its exact inverse transform.
//!
//! Fitting from re-analyzed waveforms instead (`stft` of the WAV) is
//! supported but biased: the per-bin model and the overlap-add transform
//! do not commute across propagation delays, which costs tens of dB of
//! held-out accuracy. Keep observations in the spectrogram domain
//! whenever they are available.

use crate::error::{Error, Result};
use crate::spectral::{istft, stft, Spectrogram, StftConfig};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Per-channel complex observations on a common STFT grid.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub stft: StftConfig,
    pub n_frames: usize,
    /// One `bins x frames` grid per microphone channel.
    pub channels: Vec<Array2<Complex64>>,
}

impl ObservationSet {
    pub fn new(stft_cfg: StftConfig, channels: Vec<Array2<Complex64>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Config("observation set needs at least one channel".into()));
        }
        let n_frames = channels[0].ncols();
        for (i, ch) in channels.iter().enumerate() {
            if ch.dim() != (stft_cfg.bins(), n_frames) {
                return Err(Error::Dimension(format!(
                    "channel {i}: grid {:?}, expected ({}, {n_frames})",
                    ch.dim(),
                    stft_cfg.bins()
                )));
            }
        }
        Ok(Self { stft: stft_cfg, n_frames, channels })
    }

    /// Analyze waveform recordings onto the grid (the lower-fidelity
    /// route; see the module docs).
    pub fn from_waveforms(signals: &[Vec<f64>], cfg: &StftConfig) -> Result<Self> {
        let channels = signals
            .iter()
            .map(|s| Ok(stft(s, cfg)?.data))
            .collect::<Result<Vec<_>>>()?;
        Self::new(*cfg, channels)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// The waveform each channel corresponds to (exact inverse).
    pub fn waveforms(&self) -> Result<Vec<Vec<f64>>> {
        let out_len = self.stft.span(self.n_frames);
        self.channels
            .iter()
            .map(|ch| {
                istft(
                    &Spectrogram { data: ch.clone(), config: self.stft },
                    &self.stft,
                    out_len,
                )
            })
            .collect()
    }

    /// Per-frequency mic-major rows for the least-squares solver:
    /// `rows[f]` is `M x T`, `None` where all channels are silent
    /// relative to the global peak.
    pub fn rows(&self) -> Vec<Option<Array2<Complex64>>> {
        let m = self.channels.len();
        let bins = self.stft.bins();
        let global_peak = self
            .channels
            .iter()
            .flat_map(|c| c.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let floor = global_peak * crate::lsq::SILENT_REL_THRESHOLD;
        (0..bins)
            .map(|f| {
                let peak = self
                    .channels
                    .iter()
                    .flat_map(|c| c.row(f).into_iter())
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                if peak <= floor || peak == 0.0 {
                    return None;
                }
                let mut row = Array2::zeros((m, self.n_frames));
                for (j, ch) in self.channels.iter().enumerate() {
                    for t in 0..self.n_frames {
                        row[(j, t)] = ch[(f, t)];
                    }
                }
                Some(row)
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let wire = ObservationFile::from_set(self);
        let file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, &wire).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        use std::io::Write;
        writeln!(w).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let wire: ObservationFile = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        wire.into_set()
    }
}

// Wire format mirrors the scene coefficient encoding: per channel, the
// tight nonzero band as `data[f - band.0][t] = [re, im]`.
#[derive(Serialize, Deserialize)]
struct ChannelFile {
    band: (usize, usize),
    data: Vec<Vec<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct ObservationFile {
    schema_version: u32,
    stft: StftConfig,
    n_frames: usize,
    channels: Vec<ChannelFile>,
}

impl ObservationFile {
    fn from_set(set: &ObservationSet) -> Self {
        let channels = set
            .channels
            .iter()
            .map(|ch| {
                let bins = ch.nrows();
                let mut lo = bins;
                let mut hi = 0;
                for f in 0..bins {
                    if ch.row(f).iter().any(|c| c.re != 0.0 || c.im != 0.0) {
                        lo = lo.min(f);
                        hi = hi.max(f + 1);
                    }
                }
                if lo >= hi {
                    lo = 0;
                    hi = 0;
                }
                ChannelFile {
                    band: (lo, hi),
                    data: (lo..hi)
                        .map(|f| (0..set.n_frames).map(|t| (ch[(f, t)].re, ch[(f, t)].im)).collect())
                        .collect(),
                }
            })
            .collect();
        ObservationFile {
            schema_version: crate::scene::SCENE_SCHEMA_VERSION,
            stft: set.stft,
            n_frames: set.n_frames,
            channels,
        }
    }

    fn into_set(self) -> Result<ObservationSet> {
        let bins = self.stft.bins();
        let channels = self
            .channels
            .into_iter()
            .enumerate()
            .map(|(i, ch)| {
                let (lo, hi) = ch.band;
                if hi > bins || ch.data.len() != hi - lo {
                    return Err(Error::Schema {
                        path: format!("channels[{i}]"),
                        message: format!("band {:?} inconsistent with {} rows", ch.band, ch.data.len()),
                    });
                }
                let mut grid = Array2::zeros((bins, self.n_frames));
                for (fi, row) in ch.data.iter().enumerate() {
                    if row.len() != self.n_frames {
                        return Err(Error::Schema {
                            path: format!("channels[{i}].data[{fi}]"),
                            message: format!("expected {} frames, got {}", self.n_frames, row.len()),
                        });
                    }
                    for (t, &(re, im)) in row.iter().enumerate() {
                        grid[(lo + fi, t)] = Complex64::new(re, im);
                    }
                }
                Ok(grid)
            })
            .collect::<Result<Vec<_>>>()?;
        ObservationSet::new(self.stft, channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small() -> ObservationSet {
        let cfg = StftConfig {
            window_len: 32,
            hop: 8,
            fft_len: 32,
            sample_rate: 48_000,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let channels = (0..3)
            .map(|_| {
                let mut g = Array2::zeros((cfg.bins(), 6));
                for f in 2..9 {
                    for t in 0..6 {
                        g[(f, t)] =
                            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
                g
            })
            .collect();
        ObservationSet::new(cfg, channels).unwrap()
    }

    #[test]
    fn json_roundtrip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.json");
        let set = small();
        set.save(&path).unwrap();
        let back = ObservationSet::load(&path).unwrap();
        assert_eq!(back.n_frames, set.n_frames);
        for (a, b) in back.channels.iter().zip(&set.channels) {
            assert_eq!(a, b);
        }
        // byte-identical on re-save
        let again = dir.path().join("obs2.json");
        back.save(&again).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }

    #[test]
    fn rows_are_mic_major() {
        let set = small();
        let rows = set.rows();
        assert!(rows[0].is_none());
        let row = rows[3].as_ref().unwrap();
        assert_eq!(row.dim(), (3, 6));
        assert_eq!(row[(1, 2)], set.channels[1][(3, 2)]);
    }

    #[test]
    fn waveform_inverse_matches_istft() {
        let set = small();
        let waves = set.waveforms().unwrap();
        assert_eq!(waves.len(), 3);
        let direct = istft(
            &Spectrogram { data: set.channels[0].clone(), config: set.stft },
            &set.stft,
            set.stft.span(set.n_frames),
        )
        .unwrap();
        assert_eq!(waves[0], direct);
    }
}
