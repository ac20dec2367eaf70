//! Small deterministic scenes and problems for gradient checks and the
//! acceptance suite.

use crate::grad::FitProblem;
use crate::loss::{ClipLabels, LossGrid, LossWeights};
use crate::render::{render_scene, Listener, RenderRequest};
use crate::scene::{AcousticPrimitive, JointTrack, Scene};
use crate::spectral::StftConfig;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// 16-bin desk grid: window 30, hop 8, FFT 30 at 48 kHz.
pub fn desk_stft() -> StftConfig {
    StftConfig {
        window_len: 30,
        hop: 8,
        fft_len: 30,
        sample_rate: 48_000,
    }
}

/// K = 2, order 1 scene on the desk grid with random coefficients,
/// offsets, and logits.
pub fn desk_scene(seed: u64) -> Scene {
    let stft = desk_stft();
    let clip = 480usize;
    let n_frames = stft.frame_count(clip).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tracks = vec![
        JointTrack {
            joint_id: "a".into(),
            positions: vec![[0.1, 0.0, 1.5]; 2],
        },
        JointTrack {
            joint_id: "b".into(),
            positions: vec![[-0.3, 0.2, 0.9]; 2],
        },
    ];
    let primitives = ["a", "b"]
        .iter()
        .map(|joint| {
            let mut p = AcousticPrimitive::zeros(*joint, 1, stft.bins(), n_frames);
            // populate a mid band, leaving DC and the top bins silent
            for f in 2..12 {
                for t in 0..n_frames {
                    for c in 0..4 {
                        p.coeffs[(f, t, c)] =
                            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
            }
            p.offset_raw = [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ];
            p.weight_logits = (0..n_frames).map(|_| rng.gen_range(-1.0..1.0)).collect();
            p
        })
        .collect();
    Scene {
        stft,
        r_ref: 0.5,
        v_sound: 343.0,
        pose_rate: 30.0,
        n_frames,
        tracks,
        primitives,
        mics: None,
    }
}

/// Observations rendered from a perturbed twin of `desk_scene` at three
/// random mics, with the given loss weights.
pub fn desk_problem_with(scene: &Scene, seed: u64, loss_weights: LossWeights) -> FitProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let mic_positions: Vec<[f64; 3]> = (0..3)
        .map(|_| {
            let theta: f64 = rng.gen_range(0.4..2.7);
            let phi: f64 = rng.gen_range(0.0..6.28);
            let r = rng.gen_range(1.4..2.0);
            [
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                1.0 + r * theta.cos(),
            ]
        })
        .collect();
    let mut truth = desk_scene(seed ^ 0x5555);
    for p in &mut truth.primitives {
        p.offset_raw = [0.05, -0.02, 0.03];
    }
    let out_len = scene.stft.span(scene.n_frames);
    let observations: Vec<Vec<f64>> = mic_positions
        .iter()
        .map(|&m| {
            render_scene(&RenderRequest {
                scene: &truth,
                listener: Listener::Static(m),
                out_len,
            })
            .unwrap()
        })
        .collect();
    FitProblem::new(
        mic_positions,
        observations,
        ClipLabels { active: vec![true, false] },
        loss_weights,
        LossGrid { windows: vec![64, 32], sample_rate: 48_000 },
        4,
    )
    .unwrap()
}

/// [`desk_problem_with`] at the default loss weights.
pub fn desk_problem(scene: &Scene, seed: u64) -> FitProblem {
    desk_problem_with(scene, seed, LossWeights::default())
}
