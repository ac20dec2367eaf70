//! Evaluation metrics comparing rendered and reference signals:
//! signal-to-distortion ratio, amplitude-spectrogram error, and phase
//! angular error.

use crate::error::{Error, Result};
use crate::spectral::{stft, StftConfig};
use serde::Serialize;

/// SDR cap applied when the residual is numerically zero.
pub const SDR_CAP_DB: f64 = 120.0;

/// `10 log10(|gt|^2 / |gt - pred|^2)` in dB, capped at +120.
pub fn sdr(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "sdr: lengths {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    let ref_energy: f64 = gt.iter().map(|v| v * v).sum();
    if ref_energy == 0.0 {
        return Err(Error::Domain("sdr: reference signal is all zero".into()));
    }
    let residual: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g) * (p - g)).sum();
    if residual == 0.0 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * (ref_energy / residual).log10()).min(SDR_CAP_DB))
}

/// Mean over frames of the l2 distance between magnitude-spectrogram
/// columns, scaled by 1000.
pub fn amplitude_error(pred: &[f64], gt: &[f64], cfg: &StftConfig) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "amplitude_error: lengths {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    let sp = stft(pred, cfg)?;
    let sg = stft(gt, cfg)?;
    let frames = sp.frames();
    let mut acc = 0.0;
    for t in 0..frames {
        let mut sq = 0.0;
        for f in 0..sp.bins() {
            let d = sp.data[(f, t)].norm() - sg.data[(f, t)].norm();
            sq += d * d;
        }
        acc += sq.sqrt();
    }
    Ok(acc / frames as f64 * 1000.0)
}

/// Amplitude-weighted mean absolute wrapped phase difference in radians,
/// weights `|gt|`; the wrap is the principal angle of `pred * conj(gt)`.
pub fn phase_error(pred: &[f64], gt: &[f64], cfg: &StftConfig) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "phase_error: lengths {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    let sp = stft(pred, cfg)?;
    let sg = stft(gt, cfg)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, g) in sp.data.iter().zip(sg.data.iter()) {
        let w = g.norm();
        if w > 0.0 && p.norm() > 0.0 {
            num += w * (p * g.conj()).arg().abs();
        }
        den += w;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Per-channel metric rows plus summary means.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub per_mic: Vec<MicEval>,
    pub mean_sdr_db: f64,
    pub mean_amp_err: f64,
    pub mean_phase_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MicEval {
    pub mic: usize,
    pub held_out: bool,
    pub sdr_db: f64,
    pub amp_err: f64,
    pub phase_err: f64,
}

impl EvalReport {
    pub fn from_pairs(
        pairs: &[(Vec<f64>, Vec<f64>)],
        held_out: &[bool],
        cfg: &StftConfig,
    ) -> Result<Self> {
        let mut per_mic = Vec::with_capacity(pairs.len());
        for (i, (pred, gt)) in pairs.iter().enumerate() {
            per_mic.push(MicEval {
                mic: i,
                held_out: held_out.get(i).copied().unwrap_or(false),
                sdr_db: sdr(pred, gt)?,
                amp_err: amplitude_error(pred, gt, cfg)?,
                phase_err: phase_error(pred, gt, cfg)?,
            });
        }
        let n = per_mic.len().max(1) as f64;
        Ok(Self {
            mean_sdr_db: per_mic.iter().map(|m| m.sdr_db).sum::<f64>() / n,
            mean_amp_err: per_mic.iter().map(|m| m.amp_err).sum::<f64>() / n,
            mean_phase_err: per_mic.iter().map(|m| m.phase_err).sum::<f64>() / n,
            per_mic,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mic,held_out,sdr_db,amp_err_x1000,phase_err_rad\n");
        for m in &self.per_mic {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                m.mic, m.held_out, m.sdr_db, m.amp_err, m.phase_err
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
