//! Loss evaluation and analytic gradients through the renderer: chain
//! rule through the spherical harmonics (theta/phi partials), the radial
//! gains (Hankel derivative recurrence), the listener coordinate
//! transform, the tanh offset envelope, and the weight softmax.
//!
//! Complex gradients use the convention `g = dL/dRe + i dL/dIm`; for an
//! intermediate `y = alpha * z` with constant complex `alpha`, the pull
//! back is `g_z = g_y * conj(alpha)`.

use crate::error::{Error, Result};
use crate::loss::{
    interior_frames, l1_at_shift, loss_cts, loss_shift_l1_argmin, ClipLabels, LossBreakdown,
    LossGrid, LossWeights, CTS_CLAMP,
};
use crate::render::{render_primitive_into, RadialKernel};
use crate::scene::Scene;
use crate::spectral::{adjoint_istft, adjoint_stft, istft, scale_config, stft, Spectrogram};
use crate::sphmath::{sph_harmonic, sph_harmonic_dtheta, HarmonicIndex};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;

/// A fixed inverse-rendering problem: observations, geometry, labels,
/// and loss configuration. Ground-truth spectrograms are cached once.
pub struct FitProblem {
    pub mic_positions: Vec<[f64; 3]>,
    pub observations: Vec<Vec<f64>>,
    pub labels: ClipLabels,
    pub loss_weights: LossWeights,
    pub grid: LossGrid,
    pub max_shift: usize,
    gt_specs: Vec<Vec<Spectrogram>>, // [mic][scale]
}

impl FitProblem {
    pub fn new(
        mic_positions: Vec<[f64; 3]>,
        observations: Vec<Vec<f64>>,
        labels: ClipLabels,
        loss_weights: LossWeights,
        grid: LossGrid,
        max_shift: usize,
    ) -> Result<Self> {
        if mic_positions.len() != observations.len() {
            return Err(Error::Dimension(format!(
                "{} mic positions vs {} observations",
                mic_positions.len(),
                observations.len()
            )));
        }
        if observations.is_empty() {
            return Err(Error::Config("fit problem needs observations".into()));
        }
        labels.validate()?;
        let gt_specs = observations
            .iter()
            .map(|obs| {
                grid.windows
                    .iter()
                    .map(|&w| stft(obs, &scale_config(w, grid.sample_rate)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mic_positions,
            observations,
            labels,
            loss_weights,
            grid,
            max_shift,
            gt_specs,
        })
    }

    pub fn mic_count(&self) -> usize {
        self.observations.len()
    }
}

/// Gradients per parameter class. Coefficient grids are optional because
/// the alternating fit replaces them by least squares.
pub struct ParamGrads {
    pub coeffs: Option<Vec<Array3<Complex64>>>,
    pub offset_raw: Vec<[f64; 3]>,
    pub weight_logits: Array2<f64>,
}

struct MicForward {
    wave: Vec<f64>,
    /// Relative listener coordinates per primitive and frame.
    rel: Vec<Vec<(f64, f64, f64)>>,
}

fn forward_mic(
    scene: &Scene,
    positions: &[Vec<[f64; 3]>],
    weights: &Array2<f64>,
    kernel: &RadialKernel,
    mic: [f64; 3],
    out_len: usize,
) -> Result<MicForward> {
    let n_frames = scene.n_frames;
    let mut rel_all = Vec::with_capacity(scene.primitives.len());
    let mut sum = Array2::zeros((scene.stft.bins(), n_frames));
    for (k, prim) in scene.primitives.iter().enumerate() {
        let rel: Vec<(f64, f64, f64)> = (0..n_frames)
            .map(|t| crate::scene::to_listener_spherical(positions[k][t], mic))
            .collect::<Result<_>>()?;
        let w_row: Vec<f64> = (0..n_frames).map(|t| weights[(k, t)]).collect();
        render_primitive_into(prim, &w_row, &rel, kernel, &mut sum, 1.0)?;
        rel_all.push(rel);
    }
    let wave = istft(
        &Spectrogram { data: sum, config: scene.stft },
        &scene.stft,
        out_len,
    )?;
    Ok(MicForward { wave, rel: rel_all })
}

struct MicLoss {
    amp: f64,
    ri: f64,
    shift_l1: f64,
}

/// Per-mic data losses (no aggregation, no cts).
fn mic_losses(
    pred: &[f64],
    gt: &[f64],
    gt_specs: &[Spectrogram],
    problem: &FitProblem,
) -> Result<MicLoss> {
    let mut amp = 0.0;
    let mut ri = 0.0;
    for (scale_i, &w) in problem.grid.windows.iter().enumerate() {
        let cfg = scale_config(w, problem.grid.sample_rate);
        let sp = stft(pred, &cfg)?;
        let sg = &gt_specs[scale_i];
        let range = interior_frames(sp.frames());
        let mut amp_sum = 0.0;
        let mut ri_sum = 0.0;
        let mut count = 0usize;
        for t in range {
            for f in 0..sp.bins() {
                let p = sp.data[(f, t)];
                let g = sg.data[(f, t)];
                amp_sum += (p.norm() - g.norm()).abs();
                ri_sum += (p.re - g.re).abs() + (p.im - g.im).abs();
                count += 1;
            }
        }
        amp += amp_sum / count.max(1) as f64;
        ri += ri_sum / (2 * count.max(1)) as f64;
    }
    let scales = problem.grid.windows.len() as f64;
    let sl1 = loss_shift_l1_argmin(pred, gt, problem.max_shift)?.0;
    Ok(MicLoss { amp: amp / scales, ri: ri / scales, shift_l1: sl1 })
}

/// Data + label loss of a scene against the problem observations: data
/// terms are means over mics, the cross-entropy is computed once.
pub fn eval_loss(scene: &Scene, problem: &FitProblem) -> Result<LossBreakdown> {
    scene.validate()?;
    let frame_times = scene.frame_times();
    let positions = scene.positions_at_frames(&frame_times)?;
    let weights = scene.weights();
    let max_order = scene.primitives.iter().map(|p| p.order).max().unwrap_or(0);
    let kernel = RadialKernel::new(&scene.stft, scene.v_sound, max_order, Some(scene.r_ref));

    let per_mic: Vec<MicLoss> = (0..problem.mic_count())
        .into_par_iter()
        .map(|j| {
            let fwd = forward_mic(
                scene,
                &positions,
                &weights,
                &kernel,
                problem.mic_positions[j],
                problem.observations[j].len(),
            )?;
            mic_losses(&fwd.wave, &problem.observations[j], &problem.gt_specs[j], problem)
        })
        .collect::<Result<Vec<_>>>()?;

    let m = per_mic.len() as f64;
    let amp = per_mic.iter().map(|l| l.amp).sum::<f64>() / m;
    let ri = per_mic.iter().map(|l| l.ri).sum::<f64>() / m;
    let sl1 = per_mic.iter().map(|l| l.shift_l1).sum::<f64>() / m;
    let cts = loss_cts(&weights, &problem.labels)?;
    Ok(LossBreakdown::weighted(amp, ri, sl1, cts, &problem.loss_weights))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Waveform-domain gradient of the weighted data terms for one mic,
/// already scaled by `1/M`.
fn wave_grad(
    pred: &[f64],
    gt: &[f64],
    gt_specs: &[Spectrogram],
    problem: &FitProblem,
    mic_scale: f64,
) -> Result<(MicLoss, Vec<f64>)> {
    let lw = &problem.loss_weights;
    let scales = problem.grid.windows.len() as f64;
    let mut g_wave = vec![0.0; pred.len()];
    let mut amp_total = 0.0;
    let mut ri_total = 0.0;

    for (scale_i, &w) in problem.grid.windows.iter().enumerate() {
        let cfg = scale_config(w, problem.grid.sample_rate);
        let sp = stft(pred, &cfg)?;
        let sg = &gt_specs[scale_i];
        let range = interior_frames(sp.frames());
        let count = (range.len() * sp.bins()).max(1) as f64;
        let amp_factor = lw.amp * mic_scale / (scales * count);
        let ri_factor = lw.ri * mic_scale / (scales * 2.0 * count);

        let mut g_spec: Array2<Complex64> = Array2::zeros(sp.data.dim());
        let mut amp_sum = 0.0;
        let mut ri_sum = 0.0;
        for t in range {
            for f in 0..sp.bins() {
                let p = sp.data[(f, t)];
                let g = sg.data[(f, t)];
                let p_mag = p.norm();
                let dmag = p_mag - g.norm();
                amp_sum += dmag.abs();
                let dre = p.re - g.re;
                let dim = p.im - g.im;
                ri_sum += dre.abs() + dim.abs();

                let mut grad =
                    Complex64::new(ri_factor * sign(dre), ri_factor * sign(dim));
                if p_mag > 0.0 {
                    grad += amp_factor * sign(dmag) / p_mag * p;
                }
                g_spec[(f, t)] = grad;
            }
        }
        amp_total += amp_sum / count;
        ri_total += ri_sum / (2.0 * count);
        let back = adjoint_stft(&g_spec, &cfg, pred.len());
        for (acc, v) in g_wave.iter_mut().zip(&back) {
            *acc += v;
        }
    }

    // shift-l1 with the shift frozen at its current argmin
    let (sl1, tau) = loss_shift_l1_argmin(pred, gt, problem.max_shift)?;
    debug_assert_eq!(sl1, l1_at_shift(pred, gt, tau));
    let len = pred.len() as isize;
    let lo = tau.max(0);
    let hi = len + tau.min(0);
    let count = (hi - lo).max(1) as f64;
    let sl1_factor = lw.shift_l1 * mic_scale / count;
    for t in lo..hi {
        g_wave[t as usize] += sl1_factor * sign(pred[t as usize] - gt[(t - tau) as usize]);
    }

    Ok((
        MicLoss { amp: amp_total / scales, ri: ri_total / scales, shift_l1: sl1 },
        g_wave,
    ))
}

struct MicGrads {
    loss: MicLoss,
    coeffs: Option<Vec<Array3<Complex64>>>,
    offset_raw: Vec<[f64; 3]>,
    d_weight: Array2<f64>,
}

#[allow(clippy::too_many_arguments)]
fn backward_mic(
    scene: &Scene,
    problem: &FitProblem,
    positions: &[Vec<[f64; 3]>],
    weights: &Array2<f64>,
    kernel: &RadialKernel,
    j: usize,
    with_coeffs: bool,
    mic_scale: f64,
) -> Result<MicGrads> {
    let n_frames = scene.n_frames;
    let bins = scene.stft.bins();
    let fwd = forward_mic(
        scene,
        positions,
        weights,
        kernel,
        problem.mic_positions[j],
        problem.observations[j].len(),
    )?;
    let (loss, g_wave) = wave_grad(
        &fwd.wave,
        &problem.observations[j],
        &problem.gt_specs[j],
        problem,
        mic_scale,
    )?;
    let g_spec = adjoint_istft(&g_wave, &scene.stft, n_frames);

    let k_count = scene.primitives.len();
    let mut coeffs = with_coeffs.then(|| {
        scene
            .primitives
            .iter()
            .map(|p| Array3::zeros((bins, n_frames, p.components())))
            .collect::<Vec<Array3<Complex64>>>()
    });
    let mut offset_raw = vec![[0.0; 3]; k_count];
    let mut d_weight = Array2::zeros((k_count, n_frames));

    for (k, prim) in scene.primitives.iter().enumerate() {
        let indices = HarmonicIndex::all_up_to(prim.order);
        let n_comp = indices.len();
        let (band_lo, band_hi) = prim.nonzero_band();
        let sigma_prime = crate::scene::apply_offset_deriv(prim.offset_raw);
        let mut gains: Option<(f64, Array2<Complex64>, Array2<Complex64>)> = None;
        let mut y = vec![Complex64::default(); n_comp];
        let mut dy_dtheta = vec![Complex64::default(); n_comp];

        for t in 0..n_frames {
            let (r, theta, phi) = fwd.rel[k][t];
            let w = weights[(k, t)];
            let reuse = matches!(&gains, Some((cr, _, _)) if *cr == r);
            if !reuse {
                let (g, d) = kernel.gains_and_derivs(r);
                gains = Some((r, g, d));
            }
            let (_, g_tab, d_tab) = gains.as_ref().unwrap();
            for (c, idx) in indices.iter().enumerate() {
                y[c] = sph_harmonic(*idx, theta, phi)?;
                dy_dtheta[c] = sph_harmonic_dtheta(*idx, theta, phi)?;
            }

            // dL/dW needs the pre-weight value over the coefficient band;
            // coefficient gradients cover every bin with upstream signal.
            let mut dw = 0.0;
            let (mut acc_r, mut acc_theta, mut acc_phi) = (0.0, 0.0, 0.0);
            let f_range = if with_coeffs { 0..bins } else { band_lo..band_hi };
            for f in f_range {
                let gs = g_spec[(f, t)];
                if gs.re == 0.0 && gs.im == 0.0 {
                    continue;
                }
                let mut ds_dr = Complex64::default();
                let mut ds_dtheta = Complex64::default();
                let mut ds_dphi = Complex64::default();
                for (c, idx) in indices.iter().enumerate() {
                    let n = idx.n as usize;
                    let beta = g_tab[(n, f)] * y[c];
                    if let Some(gc) = coeffs.as_mut() {
                        gc[k][(f, t, c)] += gs * (w * beta).conj();
                    }
                    let coeff = prim.coeffs[(f, t, c)];
                    if coeff.re != 0.0 || coeff.im != 0.0 {
                        ds_dr += coeff * d_tab[(n, f)] * y[c];
                        ds_dtheta += coeff * g_tab[(n, f)] * dy_dtheta[c];
                        ds_dphi +=
                            coeff * g_tab[(n, f)] * y[c] * Complex64::new(0.0, idx.m as f64);
                        dw += (gs * (coeff * beta).conj()).re;
                    }
                }
                acc_r += (gs * (w * ds_dr).conj()).re;
                acc_theta += (gs * (w * ds_dtheta).conj()).re;
                acc_phi += (gs * (w * ds_dphi).conj()).re;
            }
            d_weight[(k, t)] += dw;

            // chain through the coordinate transform; d = L - p
            let d = crate::scene::spherical_to_cartesian(r, theta, phi);
            let s2 = d[0] * d[0] + d[1] * d[1];
            let mut dl_dd = [0.0; 3];
            for i in 0..3 {
                dl_dd[i] += acc_r * d[i] / r;
            }
            if s2 > 1e-24 {
                let s = s2.sqrt();
                let r2 = r * r;
                dl_dd[0] += acc_theta * d[0] * d[2] / (r2 * s) - acc_phi * d[1] / s2;
                dl_dd[1] += acc_theta * d[1] * d[2] / (r2 * s) + acc_phi * d[0] / s2;
                dl_dd[2] += acc_theta * (-s / r2);
            }
            for i in 0..3 {
                offset_raw[k][i] -= dl_dd[i] * sigma_prime[i];
            }
        }
    }
    Ok(MicGrads { loss, coeffs, offset_raw, d_weight })
}

/// Loss and analytic gradients for every parameter class; coefficient
/// grids only when `with_coeffs` (the alternating fit solves them in
/// closed form instead).
pub fn eval_loss_and_grads(
    scene: &Scene,
    problem: &FitProblem,
    with_coeffs: bool,
) -> Result<(LossBreakdown, ParamGrads)> {
    scene.validate()?;
    let frame_times = scene.frame_times();
    let positions = scene.positions_at_frames(&frame_times)?;
    let weights = scene.weights();
    let max_order = scene.primitives.iter().map(|p| p.order).max().unwrap_or(0);
    let kernel = RadialKernel::new(&scene.stft, scene.v_sound, max_order, Some(scene.r_ref));
    let m = problem.mic_count();
    let mic_scale = 1.0 / m as f64;
    let k_count = scene.primitives.len();
    let n_frames = scene.n_frames;

    let per_mic: Vec<MicGrads> = (0..m)
        .into_par_iter()
        .map(|j| {
            backward_mic(
                scene, problem, &positions, &weights, &kernel, j, with_coeffs, mic_scale,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    // deterministic reduction in mic order
    let mut coeffs = with_coeffs.then(|| {
        scene
            .primitives
            .iter()
            .map(|p| Array3::zeros((scene.stft.bins(), n_frames, p.components())))
            .collect::<Vec<Array3<Complex64>>>()
    });
    let mut offset_raw = vec![[0.0; 3]; k_count];
    let mut d_weight: Array2<f64> = Array2::zeros((k_count, n_frames));
    let (mut amp, mut ri, mut sl1) = (0.0, 0.0, 0.0);
    for mg in &per_mic {
        amp += mg.loss.amp;
        ri += mg.loss.ri;
        sl1 += mg.loss.shift_l1;
        for k in 0..k_count {
            for i in 0..3 {
                offset_raw[k][i] += mg.offset_raw[k][i];
            }
        }
        d_weight += &mg.d_weight;
        if let (Some(acc), Some(part)) = (coeffs.as_mut(), mg.coeffs.as_ref()) {
            for (a, p) in acc.iter_mut().zip(part.iter()) {
                *a += p;
            }
        }
    }
    amp *= mic_scale;
    ri *= mic_scale;
    sl1 *= mic_scale;

    // cross-entropy path: subgradient at the per-primitive argmax frame
    let cts = loss_cts(&weights, &problem.labels)?;
    let lw = &problem.loss_weights;
    for k in 0..k_count {
        let row = weights.row(k);
        let (t_star, &w_max) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("at least one frame");
        if w_max > CTS_CLAMP && w_max < 1.0 - CTS_CLAMP {
            let g = if problem.labels.active[k] {
                -1.0 / w_max
            } else {
                1.0 / (1.0 - w_max)
            };
            d_weight[(k, t_star)] += lw.cts * g / k_count as f64;
        }
    }

    // softmax chain per frame
    let mut weight_logits = Array2::zeros((k_count, n_frames));
    for t in 0..n_frames {
        let mut dot = 0.0;
        for k in 0..k_count {
            dot += d_weight[(k, t)] * weights[(k, t)];
        }
        for k in 0..k_count {
            weight_logits[(k, t)] = weights[(k, t)] * (d_weight[(k, t)] - dot);
        }
    }

    Ok((
        LossBreakdown::weighted(amp, ri, sl1, cts, lw),
        ParamGrads { coeffs, offset_raw, weight_logits },
    ))
}
