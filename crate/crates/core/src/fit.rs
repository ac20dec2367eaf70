//! Inverse rendering: alternate closed-form least squares on the
//! (linear) harmonic coefficients with backtracking gradient descent on
//! primitive offsets and weight logits.

use crate::error::{Error, Result};
use crate::grad::{eval_loss, eval_loss_and_grads, FitProblem, ParamGrads};
use crate::loss::{ClipLabels, LossBreakdown, LossGrid, LossWeights, MAX_SHIFT_DEFAULT};
use crate::lsq::{observation_rows, RidgeFactor, REFINE_STEPS, RIDGE_REL_DEFAULT};
use crate::render::RadialKernel;
use crate::scene::{MicArraySpec, Scene};
use crate::spectral::{Spectrogram, MULTISCALE_WINDOWS};
use crate::sphmath::{sph_harmonic, HarmonicIndex};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Armijo sufficient-decrease constant for the backtracking line search.
pub const ARMIJO_C: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Outer alternation iterations (LS solve + gradient block).
    pub max_iters: usize,
    /// Gradient steps on offsets/logits per outer iteration.
    pub inner_steps: usize,
    /// Initial step size for the backtracking line search.
    pub learning_rate: f64,
    /// Stop when the total loss improves by less than this between outer
    /// iterations.
    pub convergence_tol: f64,
    /// Shift-l1 search range in samples.
    pub max_shift: usize,
    /// Relative ridge weight for the coefficient solves.
    pub ridge_rel: f64,
    /// Conjugate-gradient iterations of the waveform-consistent
    /// coefficient refinement per outer iteration.
    pub coeff_refine_iters: usize,
    /// Reserved for randomized initialization; the default path is fully
    /// deterministic and does not consume it.
    pub rng_seed: u64,
    pub loss_weights: LossWeights,
    /// Multiscale loss windows.
    pub loss_windows: Vec<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            inner_steps: 12,
            learning_rate: 1.0,
            convergence_tol: 1e-7,
            max_shift: MAX_SHIFT_DEFAULT,
            ridge_rel: RIDGE_REL_DEFAULT,
            coeff_refine_iters: 12,
            rng_seed: 0,
            loss_weights: LossWeights::default(),
            loss_windows: MULTISCALE_WINDOWS.to_vec(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0
            || self.learning_rate <= 0.0
            || self.convergence_tol <= 0.0
            || self.ridge_rel <= 0.0
            || self.loss_windows.is_empty()
        {
            return Err(Error::Config(
                "fit config requires positive iterations, learning rate, tolerance and ridge"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LsDiagnostics {
    pub worst_condition: f64,
    pub solved_bins: usize,
    pub silent_bins: usize,
    /// Geometry and weights constant over frames, letting one
    /// factorization serve every frame of a frequency bin.
    pub static_geometry: bool,
    /// Whether the waveform-consistent refinement ran (static geometry).
    pub waveform_refined: bool,
    pub pcg_iterations: usize,
    pub pcg_relative_residual: f64,
}

/// Closed-form ridge solve of all primitive coefficient grids given the
/// scene geometry and weights, from waveform observations (their STFT is
/// the observation spectrogram).
pub fn solve_coefficients_ls(
    observations: &[Vec<f64>],
    mic_positions: &[[f64; 3]],
    scene: &Scene,
    ridge_rel: f64,
) -> Result<(Vec<Array3<Complex64>>, LsDiagnostics)> {
    let (rows, obs_frames) = observation_rows(observations, &scene.stft)?;
    if obs_frames < scene.n_frames {
        return Err(Error::Dimension(format!(
            "observations cover {obs_frames} frames, scene needs {}",
            scene.n_frames
        )));
    }
    solve_coefficients_ls_rows(&rows, mic_positions, scene, ridge_rel)
}

/// Same solve on per-bin observation rows (`M x T` per frequency,
/// `None` = silent); the spectrogram-domain entry point.
pub fn solve_coefficients_ls_rows(
    rows: &[Option<Array2<Complex64>>],
    mic_positions: &[[f64; 3]],
    scene: &Scene,
    ridge_rel: f64,
) -> Result<(Vec<Array3<Complex64>>, LsDiagnostics)> {
    scene.validate()?;
    let m = mic_positions.len();
    if let Some(row) = rows.iter().flatten().next() {
        if row.nrows() != m {
            return Err(Error::Dimension(format!(
                "observation rows carry {} mics, geometry has {m}",
                row.nrows()
            )));
        }
    }
    let k_count = scene.primitives.len();
    let n_frames = scene.n_frames;
    let bins = scene.stft.bins();

    let offsets: Vec<usize> = scene
        .primitives
        .iter()
        .scan(0usize, |acc, p| {
            let start = *acc;
            *acc += p.components();
            Some(start)
        })
        .collect();
    let unknowns = offsets.last().unwrap() + scene.primitives.last().unwrap().components();
    if m < unknowns && ridge_rel <= 0.0 {
        return Err(Error::Underdetermined { unknowns, equations: m });
    }

    let frame_times = scene.frame_times();
    let positions = scene.positions_at_frames(&frame_times)?;
    let weights = scene.weights();
    let max_order = scene.primitives.iter().map(|p| p.order).max().unwrap_or(0);
    let kernel = RadialKernel::new(&scene.stft, scene.v_sound, max_order, Some(scene.r_ref));

    // per (mic, primitive, frame) relative coordinates
    let rel: Vec<Vec<Vec<(f64, f64, f64)>>> = mic_positions
        .iter()
        .map(|&mic| {
            (0..k_count)
                .map(|k| {
                    (0..n_frames)
                        .map(|t| crate::scene::to_listener_spherical(positions[k][t], mic))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let static_geometry = (0..m).all(|j| {
        (0..k_count).all(|k| (1..n_frames).all(|t| rel[j][k][t] == rel[j][k][0]))
    }) && (0..k_count)
        .all(|k| (1..n_frames).all(|t| weights[(k, t)] == weights[(k, 0)]));

    // angular factors are frame-independent exactly when geometry is static
    let indices: Vec<Vec<HarmonicIndex>> = scene
        .primitives
        .iter()
        .map(|p| HarmonicIndex::all_up_to(p.order))
        .collect();

    struct BinResult {
        f: usize,
        /// frames x unknowns
        solution: Array2<Complex64>,
        condition: f64,
    }

    let active: Vec<usize> = (0..bins).filter(|&f| rows[f].is_some() && kernel.ks[f] != 0.0).collect();
    let results: Vec<BinResult> = active
        .par_iter()
        .map(|&f| -> Result<BinResult> {
            let obs = rows[f].as_ref().unwrap();
            let mut solution = Array2::zeros((n_frames, unknowns));
            let mut condition = 0.0f64;
            if static_geometry {
                let mut a = DMatrix::zeros(m, unknowns);
                for j in 0..m {
                    for k in 0..k_count {
                        let (r, theta, phi) = rel[j][k][0];
                        let gains = kernel.gains_at_bin(r, f);
                        let w = weights[(k, 0)];
                        for (c, idx) in indices[k].iter().enumerate() {
                            let y = sph_harmonic(*idx, theta, phi)?;
                            a[(j, offsets[k] + c)] = w * gains[idx.n as usize] * y;
                        }
                    }
                }
                let factor = RidgeFactor::new(a, ridge_rel)?;
                condition = factor.condition_estimate;
                for t in 0..n_frames {
                    let b = DVector::from_fn(m, |j, _| obs[(j, t)]);
                    let x = factor.solve(&b, REFINE_STEPS);
                    for u in 0..unknowns {
                        solution[(t, u)] = x[u];
                    }
                }
            } else {
                for t in 0..n_frames {
                    let mut a = DMatrix::zeros(m, unknowns);
                    for j in 0..m {
                        for k in 0..k_count {
                            let (r, theta, phi) = rel[j][k][t];
                            let gains = kernel.gains_at_bin(r, f);
                            let w = weights[(k, t)];
                            for (c, idx) in indices[k].iter().enumerate() {
                                let y = sph_harmonic(*idx, theta, phi)?;
                                a[(j, offsets[k] + c)] = w * gains[idx.n as usize] * y;
                            }
                        }
                    }
                    let factor = RidgeFactor::new(a, ridge_rel)?;
                    condition = condition.max(factor.condition_estimate);
                    let b = DVector::from_fn(m, |j, _| obs[(j, t)]);
                    let x = factor.solve(&b, REFINE_STEPS);
                    for u in 0..unknowns {
                        solution[(t, u)] = x[u];
                    }
                }
            }
            Ok(BinResult { f, solution, condition })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grids: Vec<Array3<Complex64>> = scene
        .primitives
        .iter()
        .map(|p| Array3::zeros((bins, n_frames, p.components())))
        .collect();
    let mut diag = LsDiagnostics {
        static_geometry,
        silent_bins: bins - active.len(),
        ..Default::default()
    };
    for r in &results {
        diag.solved_bins += 1;
        diag.worst_condition = diag.worst_condition.max(r.condition);
        for t in 0..n_frames {
            for (k, grid) in grids.iter_mut().enumerate() {
                for c in 0..scene.primitives[k].components() {
                    grid[(r.f, t, c)] = r.solution[(t, offsets[k] + c)];
                }
            }
        }
    }
    Ok((grids, diag))
}

/// Waveform-consistent coefficient solve: minimizes the l2 distance
/// between the *rendered waveforms* and the observations over the
/// (linear) coefficients, by preconditioned conjugate gradients with the
/// per-bin ridge factorizations as preconditioner. The per-bin solve
/// alone fits the re-analyzed spectrogram, which deviates from the bin
/// model by the window-misalignment of propagation delays; iterating
/// against the actual waveform residual removes that bias.
///
/// Requires static geometry (per-clip offsets, static tracks); weights
/// may vary per frame (solved in the weighted variable, divided out).
pub fn solve_coefficients_waveform(
    observations: &[Vec<f64>],
    mic_positions: &[[f64; 3]],
    scene: &Scene,
    ridge_rel: f64,
    max_pcg_iters: usize,
) -> Result<(Vec<Array3<Complex64>>, LsDiagnostics)> {
    scene.validate()?;
    let m = mic_positions.len();
    if observations.len() != m {
        return Err(Error::Dimension(format!(
            "{} observations vs {m} mic positions",
            observations.len()
        )));
    }
    let out_len = observations[0].len();
    let (rows, obs_frames) = observation_rows(observations, &scene.stft)?;
    if obs_frames < scene.n_frames {
        return Err(Error::Dimension(format!(
            "observations cover {obs_frames} frames, scene needs {}",
            scene.n_frames
        )));
    }
    let n_frames = scene.n_frames;
    let bins = scene.stft.bins();
    let k_count = scene.primitives.len();

    let frame_times = scene.frame_times();
    let positions = scene.positions_at_frames(&frame_times)?;
    let weights = scene.weights();
    let max_order = scene.primitives.iter().map(|p| p.order).max().unwrap_or(0);
    let kernel = RadialKernel::new(&scene.stft, scene.v_sound, max_order, Some(scene.r_ref));

    let static_geometry = (0..k_count).all(|k| {
        (1..n_frames).all(|t| positions[k][t] == positions[k][0])
    });
    if !static_geometry {
        // TODO: per-frame design matrices for moving tracks; until then
        // fall back to the per-bin solve for moving geometry.
        return solve_coefficients_ls_rows(&rows, mic_positions, scene, ridge_rel);
    }

    let offsets: Vec<usize> = scene
        .primitives
        .iter()
        .scan(0usize, |acc, p| {
            let start = *acc;
            *acc += p.components();
            Some(start)
        })
        .collect();
    let unknowns = offsets.last().unwrap() + scene.primitives.last().unwrap().components();

    let indices: Vec<Vec<HarmonicIndex>> = scene
        .primitives
        .iter()
        .map(|p| HarmonicIndex::all_up_to(p.order))
        .collect();
    let rel: Vec<Vec<(f64, f64, f64)>> = mic_positions
        .iter()
        .map(|&mic| {
            (0..k_count)
                .map(|k| crate::scene::to_listener_spherical(positions[k][0], mic))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // design matrix per active bin, unweighted (solved in the weighted
    // variable xi = W c)
    let active: Vec<usize> =
        (0..bins).filter(|&f| rows[f].is_some() && kernel.ks[f] != 0.0).collect();
    let factors: Vec<(usize, RidgeFactor)> = active
        .par_iter()
        .map(|&f| -> Result<(usize, RidgeFactor)> {
            let mut a = DMatrix::zeros(m, unknowns);
            for j in 0..m {
                for k in 0..k_count {
                    let (r, theta, phi) = rel[j][k];
                    let gains = kernel.gains_at_bin(r, f);
                    for (c, idx) in indices[k].iter().enumerate() {
                        let y = sph_harmonic(*idx, theta, phi)?;
                        a[(j, offsets[k] + c)] = gains[idx.n as usize] * y;
                    }
                }
            }
            Ok((f, RidgeFactor::new(a, ridge_rel)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut diag = LsDiagnostics {
        static_geometry,
        silent_bins: bins - active.len(),
        solved_bins: active.len(),
        waveform_refined: true,
        ..Default::default()
    };
    for (_, factor) in &factors {
        diag.worst_condition = diag.worst_condition.max(factor.condition_estimate);
    }

    type BinVecs = Vec<DMatrix<Complex64>>; // unknowns x frames per active bin

    let zeros_like = |factors: &[(usize, RidgeFactor)]| -> BinVecs {
        factors
            .iter()
            .map(|_| DMatrix::zeros(unknowns, n_frames))
            .collect()
    };
    let dot = |a: &BinVecs, b: &BinVecs| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                x.iter()
                    .zip(y.iter())
                    .map(|(p, q)| p.re * q.re + p.im * q.im)
                    .sum::<f64>()
            })
            .sum()
    };

    // forward: coefficients -> per-mic waveforms
    let apply_w = |x: &BinVecs| -> Result<Vec<Vec<f64>>> {
        let per_bin: Vec<DMatrix<Complex64>> = factors
            .par_iter()
            .zip(x.par_iter())
            .map(|((_, factor), xf)| factor.design() * xf)
            .collect();
        (0..m)
            .into_par_iter()
            .map(|j| {
                let mut spec = Spectrogram::zeros(scene.stft, n_frames);
                for (bi, &(f, _)) in factors.iter().enumerate() {
                    for t in 0..n_frames {
                        spec.data[(f, t)] = per_bin[bi][(j, t)];
                    }
                }
                crate::spectral::istft(&spec, &scene.stft, out_len)
            })
            .collect()
    };
    // adjoint: per-mic waveforms -> coefficient-space vector
    let apply_wh = |waves: &[Vec<f64>]| -> BinVecs {
        let specs: Vec<ndarray::Array2<Complex64>> = waves
            .par_iter()
            .map(|w| crate::spectral::adjoint_istft(w, &scene.stft, n_frames))
            .collect();
        factors
            .par_iter()
            .map(|(f, factor)| {
                let g = DMatrix::from_fn(m, n_frames, |j, t| specs[j][(*f, t)]);
                factor.design().ad_mul(&g)
            })
            .collect()
    };
    // The ridge must live at the waveform operator's scale, not the
    // spectrogram scale (the inverse transform shrinks the data term by
    // orders of magnitude); estimate that scale with one probe
    // application. Without it, near-null cross-frequency patterns that
    // cancel at the fit mics but not elsewhere overfit freely.
    let probe: BinVecs = factors
        .iter()
        .enumerate()
        .map(|(bi, _)| {
            DMatrix::from_fn(unknowns, n_frames, |u, t| {
                let h = (bi * 31 + u * 7 + t * 3) % 4;
                match h {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(-1.0, 0.0),
                    2 => Complex64::new(0.0, 1.0),
                    _ => Complex64::new(0.0, -1.0),
                }
            })
        })
        .collect();
    let wave_scale = {
        let wp = apply_wh(&apply_w(&probe)?);
        (dot(&wp, &probe) / dot(&probe, &probe)).max(1e-300)
    };
    let lambda_wave = ridge_rel * wave_scale;
    let apply_op = |x: &BinVecs| -> Result<BinVecs> {
        let waves = apply_w(x)?;
        let mut out = apply_wh(&waves);
        for (o, xf) in out.iter_mut().zip(x) {
            *o += xf * Complex64::new(lambda_wave, 0.0);
        }
        Ok(out)
    };
    let apply_precond = |r: &BinVecs| -> BinVecs {
        factors
            .par_iter()
            .zip(r.par_iter())
            .map(|((_, factor), rf)| factor.solve_normal(rf))
            .collect()
    };

    // PCG on (W^H W + lambda) xi = W^H obs
    let b = apply_wh(observations);
    let mut x = zeros_like(&factors);
    let mut r = b;
    let mut z = apply_precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz.max(1e-300);
    for _ in 0..max_pcg_iters {
        if rz / rz0 < 1e-18 {
            break;
        }
        let ap = apply_op(&p)?;
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            break;
        }
        let alpha = Complex64::new(rz / p_ap, 0.0);
        for (xf, pf) in x.iter_mut().zip(&p) {
            *xf += pf * alpha;
        }
        for (rf, apf) in r.iter_mut().zip(&ap) {
            *rf -= apf * alpha;
        }
        z = apply_precond(&r);
        let rz_new = dot(&r, &z);
        let beta = Complex64::new(rz_new / rz, 0.0);
        for (pf, zf) in p.iter_mut().zip(&z) {
            *pf = zf + &*pf * beta;
        }
        rz = rz_new;
        diag.pcg_iterations += 1;
    }
    diag.pcg_relative_residual = (rz / rz0).sqrt();

    // scatter xi back to per-primitive grids, dividing out the weights
    let mut grids: Vec<Array3<Complex64>> = scene
        .primitives
        .iter()
        .map(|p| Array3::zeros((bins, n_frames, p.components())))
        .collect();
    for (bi, &(f, _)) in factors.iter().enumerate() {
        for t in 0..n_frames {
            for (k, grid) in grids.iter_mut().enumerate() {
                let w = weights[(k, t)];
                for c in 0..scene.primitives[k].components() {
                    grid[(f, t, c)] = if w > 1e-6 {
                        x[bi][(offsets[k] + c, t)] / w
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
            }
        }
    }
    Ok((grids, diag))
}

fn with_coefficients(scene: &Scene, grids: &[Array3<Complex64>]) -> Scene {
    let mut out = scene.clone();
    for (p, g) in out.primitives.iter_mut().zip(grids) {
        p.coeffs = g.clone();
    }
    out
}

fn blend_coefficients(
    scene: &Scene,
    old: &[Array3<Complex64>],
    new: &[Array3<Complex64>],
    alpha: f64,
) -> Scene {
    let mut out = scene.clone();
    for ((p, o), n) in out.primitives.iter_mut().zip(old).zip(new) {
        p.coeffs = o * (1.0 - alpha) + n * alpha;
    }
    out
}

fn apply_param_step(scene: &Scene, grads: &ParamGrads, step: f64) -> Scene {
    let mut out = scene.clone();
    for (k, p) in out.primitives.iter_mut().enumerate() {
        for i in 0..3 {
            p.offset_raw[i] -= step * grads.offset_raw[k][i];
        }
        for (t, l) in p.weight_logits.iter_mut().enumerate() {
            *l -= step * grads.weight_logits[(k, t)];
        }
    }
    out
}

fn grad_norm_sq(grads: &ParamGrads) -> f64 {
    grads
        .offset_raw
        .iter()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        + grads.weight_logits.iter().map(|v| v * v).sum::<f64>()
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    #[serde(skip)]
    pub scene: Scene,
    /// Total-loss breakdown after each outer iteration; non-increasing.
    pub history: Vec<LossBreakdown>,
    pub converged: bool,
    pub outer_iters: usize,
    pub final_grad_norm: f64,
    pub ls_diagnostics: LsDiagnostics,
}

/// Alternating fit: closed-form coefficient solves given geometry and
/// weights, gradient descent with Armijo backtracking on offsets and
/// logits. Both phases only accept non-increasing total loss, so the
/// history is monotone. Non-convergence is reported, not raised.
pub fn fit_scene(
    observations: &[Vec<f64>],
    array: &MicArraySpec,
    init: &Scene,
    labels: &ClipLabels,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    init.validate()?;
    labels.validate()?;
    array.validate()?;
    if observations.len() != array.positions.len() {
        return Err(Error::Dimension(format!(
            "{} observations vs {} microphones",
            observations.len(),
            array.positions.len()
        )));
    }
    let problem = FitProblem::new(
        array.positions.clone(),
        observations.to_vec(),
        labels.clone(),
        cfg.loss_weights,
        LossGrid {
            windows: cfg.loss_windows.clone(),
            sample_rate: init.stft.sample_rate,
        },
        cfg.max_shift,
    )?;

    let mut scene = init.clone();
    let mut current = eval_loss(&scene, &problem)?;
    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    let mut final_grad_norm = f64::NAN;
    let mut ls_diagnostics = LsDiagnostics::default();
    let mut outer_done = 0;

    for outer in 0..cfg.max_iters {
        // (a) coefficients by least squares against the waveform
        // residual, guarded to stay monotone
        let (new_grids, diag) = solve_coefficients_waveform(
            observations,
            &array.positions,
            &scene,
            cfg.ridge_rel,
            cfg.coeff_refine_iters,
        )?;
        ls_diagnostics = diag;
        let candidate = with_coefficients(&scene, &new_grids);
        let cand_loss = eval_loss(&candidate, &problem)?;
        if cand_loss.total <= current.total {
            scene = candidate;
            current = cand_loss;
        } else {
            let old_grids: Vec<Array3<Complex64>> =
                scene.primitives.iter().map(|p| p.coeffs.clone()).collect();
            let mut alpha = 0.5;
            for _ in 0..10 {
                let blended = blend_coefficients(&scene, &old_grids, &new_grids, alpha);
                let loss = eval_loss(&blended, &problem)?;
                if loss.total <= current.total {
                    scene = blended;
                    current = loss;
                    break;
                }
                alpha *= 0.5;
            }
        }

        // (b) gradient descent on offsets and logits
        for _ in 0..cfg.inner_steps {
            let (loss, grads) = eval_loss_and_grads(&scene, &problem, false)?;
            let gnorm_sq = grad_norm_sq(&grads);
            final_grad_norm = gnorm_sq.sqrt();
            if final_grad_norm < 1e-12 {
                break;
            }
            let mut step = cfg.learning_rate;
            let mut accepted = false;
            for _ in 0..40 {
                let candidate = apply_param_step(&scene, &grads, step);
                match eval_loss(&candidate, &problem) {
                    Ok(l) if l.total <= loss.total - ARMIJO_C * step * gnorm_sq => {
                        scene = candidate;
                        current = l;
                        accepted = true;
                        break;
                    }
                    // near-field or worse loss: halve the step
                    _ => step *= 0.5,
                }
            }
            if !accepted {
                break;
            }
        }

        history.push(current);
        outer_done = outer + 1;
        if history.len() >= 2 {
            let prev = history[history.len() - 2].total;
            if (prev - current.total).abs() < cfg.convergence_tol {
                converged = true;
                break;
            }
        } else if current.total < cfg.convergence_tol {
            // already at numerical zero after the first pass
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        scene,
        history,
        converged,
        outer_iters: outer_done,
        final_grad_norm,
        ls_diagnostics,
    })
}
