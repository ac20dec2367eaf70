//! Single high-order exterior-domain soundfield baseline: encode a field
//! from microphone recordings around a boundary sphere, decode anywhere.
//!
//! The representation is valid only outside the boundary radius; decoding
//! inside it is allowed on purpose, as the demonstrated failure mode.

use crate::error::{Error, Result};
use crate::lsq::{observation_rows, RidgeFactor, REFINE_STEPS};
use crate::render::RadialKernel;
use crate::scene::MicArraySpec;
use crate::spectral::{istft, Spectrogram, StftConfig};
use crate::sphmath::{sph_harmonic, HarmonicIndex};
use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use num_complex::Complex64;

/// Exterior-domain field: coefficients of `h_n(k r) Y_nm` about a center.
#[derive(Debug, Clone)]
pub struct ExteriorField {
    /// `(bins, frames, (order+1)^2)` coefficient grid.
    pub coeffs: Array3<Complex64>,
    pub order: u32,
    pub center: [f64; 3],
    pub boundary_radius: f64,
    pub stft: StftConfig,
    pub v_sound: f64,
}

/// Solve quality surfaced to callers; encode never hard-fails on
/// conditioning alone.
#[derive(Debug, Clone, Default)]
pub struct EncodeDiagnostics {
    pub worst_condition: f64,
    pub solved_bins: usize,
    pub silent_bins: usize,
}

fn spherical_about(center: [f64; 3], p: [f64; 3]) -> (f64, f64, f64) {
    let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let theta = if r > 0.0 { (d[2] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
    let mut phi = d[1].atan2(d[0]);
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    (r, theta, phi)
}

/// Least-squares fit of exterior coefficients from mic recordings.
pub fn exterior_encode(
    mic_signals: &[Vec<f64>],
    array: &MicArraySpec,
    center: [f64; 3],
    order: u32,
    boundary_radius: f64,
    stft_cfg: &StftConfig,
    v_sound: f64,
    ridge_rel: f64,
) -> Result<(ExteriorField, EncodeDiagnostics)> {
    let (rows, n_frames) = observation_rows(mic_signals, stft_cfg)?;
    exterior_encode_rows(
        &rows,
        n_frames,
        array,
        center,
        order,
        boundary_radius,
        stft_cfg,
        v_sound,
        ridge_rel,
    )
}

/// Same fit on per-bin observation rows (`M x T` per frequency, `None` =
/// silent); the spectrogram-domain entry point.
#[allow(clippy::too_many_arguments)]
pub fn exterior_encode_rows(
    rows: &[Option<ndarray::Array2<Complex64>>],
    n_frames: usize,
    array: &MicArraySpec,
    center: [f64; 3],
    order: u32,
    boundary_radius: f64,
    stft_cfg: &StftConfig,
    v_sound: f64,
    ridge_rel: f64,
) -> Result<(ExteriorField, EncodeDiagnostics)> {
    array.validate()?;
    let n_comp = ((order + 1) * (order + 1)) as usize;
    let m = array.positions.len();
    if m < n_comp {
        return Err(Error::Underdetermined { unknowns: n_comp, equations: m });
    }
    let rel: Vec<(f64, f64, f64)> = array
        .positions
        .iter()
        .map(|&p| spherical_about(center, p))
        .collect();
    for (j, &(r, _, _)) in rel.iter().enumerate() {
        if r <= boundary_radius {
            return Err(Error::Config(format!(
                "microphone {j} at radius {r} m is inside the boundary sphere ({boundary_radius} m)"
            )));
        }
    }
    let bins = stft_cfg.bins();
    let kernel = RadialKernel::new(stft_cfg, v_sound, order, None);
    let indices = HarmonicIndex::all_up_to(order);
    // Per-mic angular factors and radial tables are frame-independent.
    let y: Vec<Vec<Complex64>> = rel
        .iter()
        .map(|&(_, theta, phi)| {
            indices
                .iter()
                .map(|&idx| sph_harmonic(idx, theta, phi))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let radial: Vec<ndarray::Array2<Complex64>> =
        rel.iter().map(|&(r, _, _)| kernel.gains(r)).collect();

    let mut coeffs = Array3::zeros((bins, n_frames, n_comp));
    let mut diag = EncodeDiagnostics::default();
    for f in 0..bins.min(rows.len()) {
        let Some(obs) = rows[f].as_ref() else {
            diag.silent_bins += 1;
            continue;
        };
        if kernel.ks[f] == 0.0 {
            // DC has no radial basis; the band stays zero.
            diag.silent_bins += 1;
            continue;
        }
        let a = DMatrix::from_fn(m, n_comp, |j, c| {
            radial[j][(indices[c].n as usize, f)] * y[j][c]
        });
        let factor = RidgeFactor::new(a, ridge_rel)?;
        diag.worst_condition = diag.worst_condition.max(factor.condition_estimate);
        diag.solved_bins += 1;
        for t in 0..n_frames {
            let b = DVector::from_fn(m, |j, _| obs[(j, t)]);
            let x = factor.solve(&b, REFINE_STEPS);
            for c in 0..n_comp {
                coeffs[(f, t, c)] = x[c];
            }
        }
    }
    Ok((
        ExteriorField {
            coeffs,
            order,
            center,
            boundary_radius,
            stft: *stft_cfg,
            v_sound,
        },
        diag,
    ))
}

/// Evaluate the exterior field at a position and return the waveform.
/// No radius precondition: decoding inside the boundary is the supported
/// failure-mode experiment.
pub fn exterior_decode(field: &ExteriorField, position: [f64; 3], out_len: usize) -> Result<Vec<f64>> {
    let spec = exterior_decode_spec(field, position)?;
    istft(&spec, &field.stft, out_len)
}

/// Spectrogram-domain decode used by [`exterior_decode`] and the tests.
pub fn exterior_decode_spec(field: &ExteriorField, position: [f64; 3]) -> Result<Spectrogram> {
    let (r, theta, phi) = spherical_about(field.center, position);
    if r <= 0.0 {
        return Err(Error::Domain("cannot decode at the expansion center".into()));
    }
    let (bins, n_frames, n_comp) = field.coeffs.dim();
    let kernel = RadialKernel::new(&field.stft, field.v_sound, field.order, None);
    let gains = kernel.gains(r);
    let indices = HarmonicIndex::all_up_to(field.order);
    let y: Vec<Complex64> = indices
        .iter()
        .map(|&idx| sph_harmonic(idx, theta, phi))
        .collect::<Result<_>>()?;
    let mut out = Spectrogram::zeros(field.stft, n_frames);
    for f in 0..bins {
        for t in 0..n_frames {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n_comp {
                acc += field.coeffs[(f, t, c)] * gains[(indices[c].n as usize, f)] * y[c];
            }
            out.data[(f, t)] = acc;
        }
    }
    Ok(out)
}
