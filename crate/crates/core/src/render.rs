//! Forward soundfield rendering: per-primitive spectrogram synthesis and
//! the scene-level sum, evaluated with spherical wave functions.

use crate::error::{Error, Result, R_MIN};
use crate::scene::{AcousticPrimitive, Scene};
use crate::spectral::{istft, Spectrogram, StftConfig};
use crate::sphmath::{sph_harmonic, HarmonicIndex};
use ndarray::Array2;
use num_complex::Complex64;

/// Listener position: fixed point or one position per STFT frame.
#[derive(Debug, Clone)]
pub enum Listener {
    Static([f64; 3]),
    Track(Vec<[f64; 3]>),
}

impl Listener {
    pub fn at_frame(&self, t: usize) -> [f64; 3] {
        match self {
            Listener::Static(p) => *p,
            Listener::Track(track) => track[t],
        }
    }

    fn check_frames(&self, n_frames: usize) -> Result<()> {
        if let Listener::Track(track) = self {
            if track.len() != n_frames {
                return Err(Error::Dimension(format!(
                    "listener track has {} frames, scene has {n_frames}",
                    track.len()
                )));
            }
        }
        Ok(())
    }
}

/// A render job: scene, listener, output length in samples.
#[derive(Debug, Clone)]
pub struct RenderRequest<'a> {
    pub scene: &'a Scene,
    pub listener: Listener,
    pub out_len: usize,
}

/// Largest listener-to-primitive distance whose propagation delay the
/// inverse transform reproduces exactly: the per-side zero-pad headroom
/// `(fft_len - window_len)/2` samples beyond the reference radius.
/// Renders past this radius time-alias within the frame.
pub fn delay_headroom_radius(cfg: &StftConfig, v_sound: f64, r_ref: f64) -> f64 {
    let pad = (cfg.fft_len - cfg.window_len) / 2;
    r_ref + pad as f64 * v_sound / cfg.sample_rate as f64
}

/// Evaluates `h_n(z)` for all `n = 0..=order` sharing one complex
/// exponential, then the upward recurrence.
pub(crate) fn hankel_all(order: u32, z: f64, out: &mut [Complex64]) {
    debug_assert!(z > 0.0);
    let eiz = Complex64::new(z.cos(), z.sin());
    out[0] = Complex64::new(0.0, -1.0) * eiz / z;
    if order == 0 {
        return;
    }
    out[1] = -Complex64::new(z, 1.0) * eiz / (z * z);
    for n in 1..order as usize {
        out[n + 1] = (2 * n + 1) as f64 / z * out[n] - out[n - 1];
    }
}

/// Radial kernel on a fixed frequency grid: wavenumbers per bin and,
/// when reference-normalized, the inverse reference Hankel values.
pub(crate) struct RadialKernel {
    pub ks: Vec<f64>,
    order: u32,
    /// `1 / h_n(k r_ref)` per (n, bin); `None` renders the bare
    /// exterior basis `h_n(k r)`.
    inv_ref: Option<Array2<Complex64>>,
}

impl RadialKernel {
    pub fn new(stft: &StftConfig, v_sound: f64, order: u32, r_ref: Option<f64>) -> Self {
        let bins = stft.bins();
        let ks: Vec<f64> = (0..bins)
            .map(|i| 2.0 * std::f64::consts::PI * stft.bin_freq(i) / v_sound)
            .collect();
        let inv_ref = r_ref.map(|r_ref| {
            let mut table = Array2::zeros(((order + 1) as usize, bins));
            let mut h = vec![Complex64::default(); (order + 1) as usize];
            for (i, &k) in ks.iter().enumerate() {
                if k == 0.0 {
                    continue; // DC column stays zero and is never used
                }
                hankel_all(order, k * r_ref, &mut h);
                for n in 0..=order as usize {
                    table[(n, i)] = 1.0 / h[n];
                }
            }
            table
        });
        Self { ks, order, inv_ref }
    }

    /// Gain table `(order+1) x bins` at radius `r`: either
    /// `h_n(k r)/h_n(k r_ref)` or the bare `h_n(k r)`. DC column is zero.
    pub fn gains(&self, r: f64) -> Array2<Complex64> {
        self.tables(r, false).0
    }

    /// Gain column for a single frequency bin at radius `r`, one entry
    /// per order `0..=order`; all zeros at the DC bin.
    pub fn gains_at_bin(&self, r: f64, f: usize) -> Vec<Complex64> {
        let rows = (self.order + 1) as usize;
        let mut out = vec![Complex64::default(); rows];
        let k = self.ks[f];
        if k == 0.0 {
            return out;
        }
        let mut h = vec![Complex64::default(); rows];
        hankel_all(self.order, k * r, &mut h);
        for n in 0..rows {
            out[n] = match &self.inv_ref {
                Some(inv) => h[n] * inv[(n, f)],
                None => h[n],
            };
        }
        out
    }

    /// Gains plus their radial derivatives `d/dr`, using
    /// `h_n'(z) = h_{n-1}(z) - (n+1)/z h_n(z)` (and `h_0' = -h_1`).
    pub fn gains_and_derivs(&self, r: f64) -> (Array2<Complex64>, Array2<Complex64>) {
        let (g, d) = self.tables(r, true);
        (g, d.expect("derivs requested"))
    }

    fn tables(&self, r: f64, with_deriv: bool) -> (Array2<Complex64>, Option<Array2<Complex64>>) {
        let bins = self.ks.len();
        let rows = (self.order + 1) as usize;
        let mut out = Array2::zeros((rows, bins));
        let mut der = if with_deriv { Some(Array2::zeros((rows, bins))) } else { None };
        // one extra order so n = order has its derivative neighbor
        let mut h = vec![Complex64::default(); rows + 1];
        for (i, &k) in self.ks.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            let z = k * r;
            hankel_all(self.order + 1, z, &mut h);
            let scale = |n: usize, v: Complex64| match &self.inv_ref {
                Some(inv) => v * inv[(n, i)],
                None => v,
            };
            for n in 0..rows {
                out[(n, i)] = scale(n, h[n]);
            }
            if let Some(der) = der.as_mut() {
                for n in 0..rows {
                    let hp = if n == 0 {
                        -h[1]
                    } else {
                        h[n - 1] - (n as f64 + 1.0) / z * h[n]
                    };
                    der[(n, i)] = scale(n, k * hp);
                }
            }
        }
        (out, der)
    }
}

/// Per-frame spectrogram of one primitive observed at `rel_pos`:
/// `W(t) * sum_nm c_nm(f,t) * gain_n(f, r(t)) * Y_nm(theta(t), phi(t))`.
pub fn render_primitive_spec(
    prim: &AcousticPrimitive,
    weights: &[f64],
    rel_pos: &[(f64, f64, f64)],
    stft: &StftConfig,
    r_ref: f64,
    v_sound: f64,
) -> Result<Spectrogram> {
    let (bins, n_frames, n_comp) = prim.coeffs.dim();
    if bins != stft.bins() {
        return Err(Error::Dimension(format!(
            "primitive grid has {bins} bins, config wants {}",
            stft.bins()
        )));
    }
    if weights.len() != n_frames || rel_pos.len() != n_frames {
        return Err(Error::Dimension(format!(
            "weights/positions must cover {n_frames} frames"
        )));
    }
    let kernel = RadialKernel::new(stft, v_sound, prim.order, Some(r_ref));
    let mut out = Spectrogram::zeros(*stft, n_frames);
    render_primitive_into(prim, weights, rel_pos, &kernel, &mut out.data, 1.0)?;
    Ok(out)
}

/// Accumulates one primitive's contribution into `out`, scaled by `scale`.
/// Gain tables are reused across frames with identical radii.
pub(crate) fn render_primitive_into(
    prim: &AcousticPrimitive,
    weights: &[f64],
    rel_pos: &[(f64, f64, f64)],
    kernel: &RadialKernel,
    out: &mut Array2<Complex64>,
    scale: f64,
) -> Result<()> {
    let (bins, n_frames, n_comp) = prim.coeffs.dim();
    let indices = HarmonicIndex::all_up_to(prim.order);
    debug_assert_eq!(indices.len(), n_comp);
    let (band_lo, band_hi) = prim.nonzero_band();
    if band_lo >= band_hi {
        return Ok(());
    }

    let mut gains: Option<(f64, Array2<Complex64>)> = None;
    let mut y = vec![Complex64::default(); n_comp];
    for t in 0..n_frames {
        let (r, theta, phi) = rel_pos[t];
        if r < R_MIN {
            return Err(Error::near_field(r, format!("frame {t}")));
        }
        let w = weights[t] * scale;
        if w == 0.0 {
            continue;
        }
        let reuse = matches!(&gains, Some((cached_r, _)) if *cached_r == r);
        if !reuse {
            gains = Some((r, kernel.gains(r)));
        }
        let g = &gains.as_ref().unwrap().1;
        for (c, idx) in indices.iter().enumerate() {
            y[c] = sph_harmonic(*idx, theta, phi)?;
        }
        for f in band_lo..band_hi.min(bins) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, idx) in indices.iter().enumerate() {
                acc += prim.coeffs[(f, t, c)] * g[(idx.n as usize, f)] * y[c];
            }
            out[(f, t)] += w * acc;
        }
    }
    Ok(())
}

/// Scene-level spectrogram at the listener: sum over primitives in
/// primitive order (deterministic reduction).
pub fn render_scene_spec(scene: &Scene, listener: &Listener) -> Result<Spectrogram> {
    scene.validate()?;
    listener.check_frames(scene.n_frames)?;
    let frame_times = scene.frame_times();
    let positions = scene.positions_at_frames(&frame_times)?;
    let weights = scene.weights();
    let max_order = scene.primitives.iter().map(|p| p.order).max().unwrap_or(0);
    let kernel = RadialKernel::new(&scene.stft, scene.v_sound, max_order, Some(scene.r_ref));

    let mut out = Spectrogram::zeros(scene.stft, scene.n_frames);
    for (k, prim) in scene.primitives.iter().enumerate() {
        let rel: Vec<(f64, f64, f64)> = (0..scene.n_frames)
            .map(|t| crate::scene::to_listener_spherical(positions[k][t], listener.at_frame(t)))
            .collect::<Result<_>>()?;
        let w_row: Vec<f64> = (0..scene.n_frames).map(|t| weights[(k, t)]).collect();
        render_primitive_into(prim, &w_row, &rel, &kernel, &mut out.data, 1.0)?;
    }
    Ok(out)
}

/// Render the waveform heard at the listener.
pub fn render_scene(req: &RenderRequest) -> Result<Vec<f64>> {
    let spec = render_scene_spec(req.scene, &req.listener)?;
    istft(&spec, &req.scene.stft, req.out_len)
}

/// Per-primitive waveform stems (same grid, same summation semantics).
pub fn render_stems(req: &RenderRequest) -> Result<Vec<Vec<f64>>> {
    let scene = req.scene;
    scene.validate()?;
    req.listener.check_frames(scene.n_frames)?;
    let frame_times = scene.frame_times();
    let positions = scene.positions_at_frames(&frame_times)?;
    let weights = scene.weights();
    let max_order = scene.primitives.iter().map(|p| p.order).max().unwrap_or(0);
    let kernel = RadialKernel::new(&scene.stft, scene.v_sound, max_order, Some(scene.r_ref));
    scene
        .primitives
        .iter()
        .enumerate()
        .map(|(k, prim)| {
            let rel: Vec<(f64, f64, f64)> = (0..scene.n_frames)
                .map(|t| {
                    crate::scene::to_listener_spherical(positions[k][t], req.listener.at_frame(t))
                })
                .collect::<Result<_>>()?;
            let w_row: Vec<f64> = (0..scene.n_frames).map(|t| weights[(k, t)]).collect();
            let mut spec = Spectrogram::zeros(scene.stft, scene.n_frames);
            render_primitive_into(prim, &w_row, &rel, &kernel, &mut spec.data, 1.0)?;
            istft(&spec, &scene.stft, req.out_len)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{JointTrack, MicArraySpec};
    use approx::assert_relative_eq;

    fn one_bin_scene(order: u32, r_listener: f64) -> (Scene, Listener) {
        let stft = StftConfig::default();
        let n_frames = 8;
        let mut prim = AcousticPrimitive::zeros("head", order, stft.bins(), n_frames);
        for t in 0..n_frames {
            prim.coeffs[(21, t, 0)] = Complex64::new(1.0, 0.0);
        }
        let scene = Scene {
            stft,
            r_ref: 0.5,
            v_sound: 343.0,
            pose_rate: 30.0,
            n_frames,
            tracks: vec![JointTrack {
                joint_id: "head".into(),
                positions: vec![[0.0; 3]; 40],
            }],
            primitives: vec![prim],
            mics: None,
        };
        (scene, Listener::Static([r_listener, 0.0, 0.0]))
    }

    #[test]
    fn monopole_bin_value_at_reference_radius() {
        let (scene, listener) = one_bin_scene(0, 0.5);
        let spec = render_scene_spec(&scene, &listener).unwrap();
        // gain is exactly 1 at r = r_ref, so the bin is Y_00
        for t in 0..scene.n_frames {
            assert_relative_eq!(spec.data[(21, t)].norm(), 0.2820948, epsilon = 1e-7);
        }
        // everything else zero
        let total: f64 = spec.data.iter().map(|c| c.norm()).sum();
        assert_relative_eq!(
            total,
            0.2820948 * scene.n_frames as f64,
            epsilon = 1e-5
        );
    }

    #[test]
    fn monopole_halves_at_double_radius() {
        let (scene, listener) = one_bin_scene(0, 1.0);
        let spec = render_scene_spec(&scene, &listener).unwrap();
        for t in 0..scene.n_frames {
            assert_relative_eq!(spec.data[(21, t)].norm(), 0.1410474, epsilon = 1e-7);
        }
    }

    #[test]
    fn zero_weight_zeroes_output() {
        let (mut scene, listener) = one_bin_scene(2, 0.8);
        // push logits so that this primitive's softmax weight ~ 1, then
        // weight the render by an explicit zero row instead
        let prim = scene.primitives[0].clone();
        let rel = vec![(0.8, 1.0, 2.0); scene.n_frames];
        let w = vec![0.0; scene.n_frames];
        let spec =
            render_primitive_spec(&prim, &w, &rel, &scene.stft, scene.r_ref, scene.v_sound)
                .unwrap();
        assert!(spec.data.iter().all(|c| c.norm() == 0.0));
        scene.primitives[0].coeffs.mapv_inplace(|_| Complex64::new(3.0, -1.0));
        let spec2 = render_primitive_spec(
            &scene.primitives[0],
            &w,
            &rel,
            &scene.stft,
            scene.r_ref,
            scene.v_sound,
        )
        .unwrap();
        assert!(spec2.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn two_colocated_half_weight_equal_one_full() {
        let (scene, listener) = one_bin_scene(0, 0.9);
        // K=2 identical primitives with equal logits -> softmax 0.5 each
        let mut scene2 = scene.clone();
        scene2.primitives.push(scene2.primitives[0].clone());
        let a = render_scene_spec(&scene, &listener).unwrap();
        let b = render_scene_spec(&scene2, &listener).unwrap();
        for (x, y) in a.data.iter().zip(b.data.iter()) {
            assert!((x - y).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn scene_render_is_istft_of_spec_sum() {
        let (scene, listener) = one_bin_scene(1, 0.7);
        let spec = render_scene_spec(&scene, &listener).unwrap();
        let out_len = scene.stft.span(scene.n_frames);
        let direct = istft(&spec, &scene.stft, out_len).unwrap();
        let via_req = render_scene(&RenderRequest {
            scene: &scene,
            listener: listener.clone(),
            out_len,
        })
        .unwrap();
        assert_eq!(direct, via_req);
    }

    #[test]
    fn linearity_in_coefficients_and_primitives() {
        let (mut scene_a, listener) = one_bin_scene(1, 1.1);
        scene_a.primitives[0].coeffs[(30, 2, 1)] = Complex64::new(0.5, 0.25);
        let mut scene_b = scene_a.clone();
        scene_b.primitives[0].coeffs[(30, 2, 1)] = Complex64::new(-1.0, 0.75);
        scene_b.primitives[0].coeffs[(21, 4, 0)] = Complex64::new(0.0, 2.0);

        // coefficient addition
        let mut scene_sum = scene_a.clone();
        ndarray::Zip::from(&mut scene_sum.primitives[0].coeffs)
            .and(&scene_b.primitives[0].coeffs)
            .for_each(|a, &b| *a += b);

        let sa = render_scene_spec(&scene_a, &listener).unwrap();
        let sb = render_scene_spec(&scene_b, &listener).unwrap();
        let ssum = render_scene_spec(&scene_sum, &listener).unwrap();
        for ((a, b), s) in sa.data.iter().zip(sb.data.iter()).zip(ssum.data.iter()) {
            assert!((a + b - s).norm() <= 1e-10 * s.norm().max(1.0));
        }
    }

    #[test]
    fn scaling_coefficients_scales_waveform() {
        let (scene, listener) = one_bin_scene(0, 0.6);
        let mut scaled = scene.clone();
        scaled.primitives[0].coeffs.mapv_inplace(|c| 3.25 * c);
        let out_len = scene.stft.span(scene.n_frames);
        let a = render_scene(&RenderRequest { scene: &scene, listener: listener.clone(), out_len })
            .unwrap();
        let b = render_scene(&RenderRequest { scene: &scaled, listener, out_len }).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(3.25 * x, *y, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn near_field_listener_rejected() {
        let (scene, _) = one_bin_scene(0, 0.5);
        let req = RenderRequest {
            scene: &scene,
            listener: Listener::Static([0.01, 0.0, 0.0]),
            out_len: 1000,
        };
        assert!(matches!(render_scene(&req), Err(Error::NearField { .. })));
    }

    #[test]
    fn moving_listener_track_length_checked() {
        let (scene, _) = one_bin_scene(0, 0.5);
        let req = RenderRequest {
            scene: &scene,
            listener: Listener::Track(vec![[1.0, 0.0, 0.0]; 3]),
            out_len: 1000,
        };
        assert!(render_scene(&req).is_err());
    }
}
