use aprim::fit::*;
use aprim::loss::*;
use aprim::metrics::sdr;
use aprim::render::*;
use aprim::scene::*;
use aprim::simulate::*;

fn held_out_sdr(fitted: &Scene, array: &MicArraySpec, recs: &[Vec<f64>], _fit_m: usize) -> (f64, f64) {
    let out_len = fitted.stft.span(fitted.n_frames);
    let mut min_sdr = f64::INFINITY;
    let mut sum = 0.0;
    let mut n = 0.0;
    for j in (3..array.positions.len()).step_by(4) {
        let wave = render_scene(&RenderRequest {
            scene: fitted,
            listener: Listener::Static(array.positions[j]),
            out_len,
        }).unwrap();
        let s = sdr(&wave, &recs[j]).unwrap();
        min_sdr = min_sdr.min(s);
        sum += s; n += 1.0;
    }
    (sum / n, min_sdr)
}

#[test]
fn probe_fit_no_offsets() {
    // offsets known (zero): isolates the LS commutation mismatch
    let spec = SimSpec {
        k: 2, order: 1, clip_seconds: 0.3, mic_count: 32, mic_radius: 1.2,
        source: SourceSpec::Noise { lo_hz: 100.0, hi_hz: 600.0 },
        band_hz: (100.0, 600.0), offset_scale: 0.0, seed: 3,
        ..SimSpec::default()
    };
    let truth = make_scene(&spec).unwrap();
    let array = make_mic_array(32, 1.2);
    let recs = synthesize_recordings(&truth, &array, None, 1).unwrap();
    let fit_m = 24;
    let fit_idx: Vec<usize> = (0..array.positions.len()).filter(|j| j % 4 != 3).collect();
    let fit_array = MicArraySpec { positions: fit_idx.iter().map(|&j| array.positions[j]).collect(), sample_rate: 48_000 };
    let fit_recs: Vec<Vec<f64>> = fit_idx.iter().map(|&j| recs[j].clone()).collect();

    // LS-only from waveform observations, true geometry
    for (iters, ridge) in [(50usize, 1e-6f64), (50, 1e-4), (50, 1e-2), (150, 1e-4), (150, 1e-2), (400, 1e-2)] {
        let (grids, _) = solve_coefficients_waveform(&fit_recs, &fit_array.positions, &skeleton_of(&truth), ridge, iters).unwrap();
        let mut fitted = skeleton_of(&truth);
        for (p, g) in fitted.primitives.iter_mut().zip(&grids) { p.coeffs = g.clone(); }
        let (mean, min) = held_out_sdr(&fitted, &array, &recs, fit_m);
        println!("iters {iters} ridge {ridge:.0e}: held-out SDR mean {mean:.2} dB min {min:.2} dB");
    }
    let (grids, diag) = solve_coefficients_waveform(&fit_recs, &fit_array.positions, &skeleton_of(&truth), 1e-6, 25).unwrap();
    println!("pcg iters {} rel residual {:.3e}", diag.pcg_iterations, diag.pcg_relative_residual);
    let mut fitted = skeleton_of(&truth);
    for (p, g) in fitted.primitives.iter_mut().zip(&grids) { p.coeffs = g.clone(); }
    let (mean, min) = held_out_sdr(&fitted, &array, &recs, fit_m);
    println!("LS-only wav-domain: held-out SDR mean {mean:.2} dB min {min:.2} dB");

    // coefficient error vs truth
    let mut max_err = 0.0f64; let mut max_true = 0.0f64;
    for (k, p) in truth.primitives.iter().enumerate() {
        for (a, b) in grids[k].iter().zip(p.coeffs.iter()) {
            max_err = max_err.max((a - b).norm());
            max_true = max_true.max(b.norm());
        }
    }
    println!("coeff rel err (wav-domain LS): {:.3e}", max_err / max_true);
}

#[test]
fn probe_fit_offset_recovery() {
    let spec = SimSpec {
        k: 2, order: 1, clip_seconds: 0.3, mic_count: 32, mic_radius: 1.2,
        source: SourceSpec::Noise { lo_hz: 100.0, hi_hz: 600.0 },
        band_hz: (100.0, 600.0), offset_scale: 0.08, seed: 5,
        ..SimSpec::default()
    };
    let truth = make_scene(&spec).unwrap();
    let array = make_mic_array(32, 1.2);
    let recs = synthesize_recordings(&truth, &array, None, 1).unwrap();
    let fit_m = 24;
    let fit_array = MicArraySpec { positions: array.positions[..fit_m].to_vec(), sample_rate: 48_000 };

    let init = skeleton_of(&truth);
    let cfg = FitConfig {
        max_iters: 15, inner_steps: 8, learning_rate: 1.0,
        convergence_tol: 1e-8, loss_windows: vec![2048, 1024, 512, 256],
        ..FitConfig::default()
    };
    let labels = ClipLabels::all_active(2);
    let t0 = std::time::Instant::now();
    let result = fit_scene(&recs[..fit_m], &fit_array, &init, &labels, &cfg).unwrap();
    println!("fit took {:.1} s, {} outers, converged {}", t0.elapsed().as_secs_f64(), result.outer_iters, result.converged);
    for (k, p) in result.scene.primitives.iter().enumerate() {
        let fit_off = p.offset();
        let true_off = truth.primitives[k].offset();
        let err = ((fit_off[0]-true_off[0]).powi(2) + (fit_off[1]-true_off[1]).powi(2) + (fit_off[2]-true_off[2]).powi(2)).sqrt();
        println!("prim {k}: offset err {:.4} m (true {:?})", err, true_off);
    }
    let (mean, min) = held_out_sdr(&result.scene, &array, &recs, fit_m);
    println!("after fit: held-out SDR mean {mean:.2} dB min {min:.2} dB");
    println!("history: {:?}", result.history.iter().map(|h| h.total).collect::<Vec<_>>());
}
