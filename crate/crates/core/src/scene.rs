//! Scene data model: acoustic primitives, joint tracks, microphone
//! arrays, coordinate transforms, and JSON persistence.

use crate::error::{Error, Result, R_MIN};
use crate::spectral::StftConfig;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Scale of the offset envelope: effective offset is `0.2 * tanh(u)` per
/// component, so offsets stay within 20 cm of the joint.
pub const OFFSET_SIGMA: f64 = 0.2;

/// Default reference radius in meters.
pub const R_REF_DEFAULT: f64 = 0.5;

/// Default pose sampling rate in frames per second.
pub const POSE_RATE_DEFAULT: f64 = 30.0;

/// Effective offset `delta = sigma * tanh(u)` componentwise.
pub fn apply_offset(u: [f64; 3]) -> [f64; 3] {
    [
        OFFSET_SIGMA * u[0].tanh(),
        OFFSET_SIGMA * u[1].tanh(),
        OFFSET_SIGMA * u[2].tanh(),
    ]
}

/// Componentwise derivative `d delta / d u = sigma * (1 - tanh(u)^2)`.
pub fn apply_offset_deriv(u: [f64; 3]) -> [f64; 3] {
    [
        OFFSET_SIGMA * (1.0 - u[0].tanh().powi(2)),
        OFFSET_SIGMA * (1.0 - u[1].tanh().powi(2)),
        OFFSET_SIGMA * (1.0 - u[2].tanh().powi(2)),
    ]
}

/// Softmax across the primitive axis (rows) for each frame (column).
pub fn primitive_weights(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut col in out.columns_mut() {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in col.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Relative position of a listener with respect to a primitive:
/// `r = |L - P|`, polar angle from +z, azimuth from +x in `[0, 2 pi)`.
pub fn to_listener_spherical(primitive: [f64; 3], listener: [f64; 3]) -> Result<(f64, f64, f64)> {
    let d = [
        listener[0] - primitive[0],
        listener[1] - primitive[1],
        listener[2] - primitive[2],
    ];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r < R_MIN {
        return Err(Error::near_field(r, "to_listener_spherical"));
    }
    let theta = (d[2] / r).clamp(-1.0, 1.0).acos();
    let mut phi = d[1].atan2(d[0]);
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    Ok((r, theta, phi))
}

/// Inverse of [`to_listener_spherical`] (returns `L - P`).
pub fn spherical_to_cartesian(r: f64, theta: f64, phi: f64) -> [f64; 3] {
    [
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    ]
}

/// A body joint's 3D position track, sampled at the scene pose rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointTrack {
    pub joint_id: String,
    pub positions: Vec<[f64; 3]>,
}

impl JointTrack {
    /// Linear interpolation at time `t` seconds.
    pub fn position_at(&self, t: f64, pose_rate: f64) -> Result<[f64; 3]> {
        let max_t = (self.positions.len() - 1) as f64 / pose_rate;
        if t < -1e-9 || t > max_t + 1e-9 {
            return Err(Error::OutOfRange { t, max: max_t });
        }
        let x = (t * pose_rate).clamp(0.0, (self.positions.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.positions.len() - 1);
        let j = (i + 1).min(self.positions.len() - 1);
        let frac = x - i as f64;
        let (a, b) = (self.positions[i], self.positions[j]);
        Ok([
            a[0] + frac * (b[0] - a[0]),
            a[1] + frac * (b[1] - a[1]),
            a[2] + frac * (b[2] - a[2]),
        ])
    }
}

/// Listener/microphone layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MicArraySpec {
    pub positions: Vec<[f64; 3]>,
    pub sample_rate: u32,
}

impl MicArraySpec {
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Config("microphone array needs at least one position".into()));
        }
        for (i, a) in self.positions.iter().enumerate() {
            for b in self.positions.iter().skip(i + 1) {
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
                if d2 == 0.0 {
                    return Err(Error::Config("microphone positions must be distinct".into()));
                }
            }
        }
        Ok(())
    }
}

/// One low-order harmonic source attached to a joint.
///
/// Coefficient layout is `(bins, frames, (order+1)^2)` with harmonic
/// components in linear `n^2+n+m` order on the last axis.
#[derive(Debug, Clone)]
pub struct AcousticPrimitive {
    pub joint_id: String,
    pub offset_raw: [f64; 3],
    pub order: u32,
    pub coeffs: Array3<Complex64>,
    pub weight_logits: Vec<f64>,
}

impl AcousticPrimitive {
    pub fn zeros(joint_id: impl Into<String>, order: u32, bins: usize, n_frames: usize) -> Self {
        Self {
            joint_id: joint_id.into(),
            offset_raw: [0.0; 3],
            order,
            coeffs: Array3::zeros((bins, n_frames, ((order + 1) * (order + 1)) as usize)),
            weight_logits: vec![0.0; n_frames],
        }
    }

    pub fn components(&self) -> usize {
        ((self.order + 1) * (self.order + 1)) as usize
    }

    pub fn offset(&self) -> [f64; 3] {
        apply_offset(self.offset_raw)
    }

    /// Tight frequency-bin band `[lo, hi)` containing all nonzero
    /// coefficients; `(0, 0)` when silent.
    pub fn nonzero_band(&self) -> (usize, usize) {
        let bins = self.coeffs.dim().0;
        let mut lo = bins;
        let mut hi = 0;
        for f in 0..bins {
            let any = self
                .coeffs
                .index_axis(ndarray::Axis(0), f)
                .iter()
                .any(|c| c.re != 0.0 || c.im != 0.0);
            if any {
                lo = lo.min(f);
                hi = hi.max(f + 1);
            }
        }
        if lo >= hi {
            (0, 0)
        } else {
            (lo, hi)
        }
    }
}

/// K primitives plus the global parameters that fix the render grid.
#[derive(Debug, Clone)]
pub struct Scene {
    pub stft: StftConfig,
    pub r_ref: f64,
    pub v_sound: f64,
    pub pose_rate: f64,
    pub n_frames: usize,
    pub tracks: Vec<JointTrack>,
    pub primitives: Vec<AcousticPrimitive>,
    pub mics: Option<MicArraySpec>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if self.primitives.is_empty() {
            return Err(Error::Config("scene needs at least one primitive".into()));
        }
        if self.r_ref <= 0.0 || self.v_sound <= 0.0 || self.pose_rate <= 0.0 {
            return Err(Error::Config("r_ref, v_sound and pose_rate must be positive".into()));
        }
        let bins = self.stft.bins();
        for (i, p) in self.primitives.iter().enumerate() {
            let dim = p.coeffs.dim();
            if dim != (bins, self.n_frames, p.components()) {
                return Err(Error::Dimension(format!(
                    "primitive {i}: coefficient grid {dim:?}, expected ({bins}, {}, {})",
                    self.n_frames,
                    p.components()
                )));
            }
            if p.weight_logits.len() != self.n_frames {
                return Err(Error::Dimension(format!(
                    "primitive {i}: {} weight logits, expected {}",
                    p.weight_logits.len(),
                    self.n_frames
                )));
            }
            if self.track(&p.joint_id).is_none() {
                return Err(Error::Config(format!(
                    "primitive {i}: unknown joint `{}`",
                    p.joint_id
                )));
            }
        }
        for t in &self.tracks {
            if t.positions.is_empty() {
                return Err(Error::Config(format!("track `{}` is empty", t.joint_id)));
            }
            if t.positions.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "track `{}` contains non-finite coordinates",
                    t.joint_id
                )));
            }
        }
        if let Some(mics) = &self.mics {
            mics.validate()?;
        }
        Ok(())
    }

    pub fn track(&self, joint_id: &str) -> Option<&JointTrack> {
        self.tracks.iter().find(|t| t.joint_id == joint_id)
    }

    pub fn primitive_count(&self) -> usize {
        self.primitives.len()
    }

    /// Softmax weights across primitives, `K x n_frames`.
    pub fn weights(&self) -> Array2<f64> {
        let k = self.primitives.len();
        let mut logits = Array2::zeros((k, self.n_frames));
        for (i, p) in self.primitives.iter().enumerate() {
            for (t, &v) in p.weight_logits.iter().enumerate() {
                logits[(i, t)] = v;
            }
        }
        primitive_weights(&logits)
    }

    /// Per-primitive, per-frame positions: track interpolated to the STFT
    /// frame centers plus the effective offset, piecewise-constant within
    /// each frame.
    pub fn positions_at_frames(&self, frame_times: &[f64]) -> Result<Vec<Vec<[f64; 3]>>> {
        self.primitives
            .iter()
            .map(|p| {
                let track = self
                    .track(&p.joint_id)
                    .ok_or_else(|| Error::Config(format!("unknown joint `{}`", p.joint_id)))?;
                let delta = p.offset();
                frame_times
                    .iter()
                    .map(|&t| {
                        let base = track.position_at(t, self.pose_rate)?;
                        Ok([base[0] + delta[0], base[1] + delta[1], base[2] + delta[2]])
                    })
                    .collect()
            })
            .collect()
    }

    /// STFT frame center times for this scene's grid.
    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.n_frames).map(|t| self.stft.frame_time(t)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let wire = SceneFile::from_scene(self);
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
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
        Self::from_json(&text).map_err(|e| match e {
            Error::Schema { message, .. } => Error::Schema {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&SceneFile::from_scene(self)).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: SceneFile = serde_json::from_str(text).map_err(|e| Error::Schema {
            path: "<json>".into(),
            message: e.to_string(),
        })?;
        let scene = wire.into_scene()?;
        scene.validate()?;
        Ok(scene)
    }
}

pub const SCENE_SCHEMA_VERSION: u32 = 1;

// ---- wire format -----------------------------------------------------
//
// Coefficient grids are stored per primitive over the tight nonzero
// frequency band as `coeffs[nm][f - band.0][t] = [re, im]`; bins outside
// the band are implicitly zero. Everything round-trips bit-exactly.

#[derive(Serialize, Deserialize)]
struct PrimitiveFile {
    joint_id: String,
    offset_raw: [f64; 3],
    order: u32,
    weight_logits: Vec<f64>,
    band: (usize, usize),
    coeffs: Vec<Vec<Vec<(f64, f64)>>>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    schema_version: u32,
    stft: StftConfig,
    r_ref: f64,
    v_sound: f64,
    pose_rate: f64,
    n_frames: usize,
    mics: Option<MicArraySpec>,
    tracks: Vec<JointTrack>,
    primitives: Vec<PrimitiveFile>,
}

impl SceneFile {
    fn from_scene(scene: &Scene) -> Self {
        let primitives = scene
            .primitives
            .iter()
            .map(|p| {
                let band = p.nonzero_band();
                let coeffs = (0..p.components())
                    .map(|nm| {
                        (band.0..band.1)
                            .map(|f| {
                                (0..scene.n_frames)
                                    .map(|t| {
                                        let c = p.coeffs[(f, t, nm)];
                                        (c.re, c.im)
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                PrimitiveFile {
                    joint_id: p.joint_id.clone(),
                    offset_raw: p.offset_raw,
                    order: p.order,
                    weight_logits: p.weight_logits.clone(),
                    band,
                    coeffs,
                }
            })
            .collect();
        SceneFile {
            schema_version: SCENE_SCHEMA_VERSION,
            stft: scene.stft,
            r_ref: scene.r_ref,
            v_sound: scene.v_sound,
            pose_rate: scene.pose_rate,
            n_frames: scene.n_frames,
            mics: scene.mics.clone(),
            tracks: scene.tracks.clone(),
            primitives,
        }
    }

    fn into_scene(self) -> Result<Scene> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::Schema {
                path: "schema_version".into(),
                message: format!(
                    "unsupported schema version {} (expected {SCENE_SCHEMA_VERSION})",
                    self.schema_version
                ),
            });
        }
        let bins = self.stft.bins();
        let primitives = self
            .primitives
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let nm = ((p.order + 1) * (p.order + 1)) as usize;
                let (lo, hi) = p.band;
                if hi > bins || p.coeffs.len() != nm {
                    return Err(Error::Schema {
                        path: format!("primitives[{i}].coeffs"),
                        message: format!(
                            "band {:?} / {} components inconsistent with grid",
                            p.band,
                            p.coeffs.len()
                        ),
                    });
                }
                let mut grid = Array3::zeros((bins, self.n_frames, nm));
                for (c, rows) in p.coeffs.iter().enumerate() {
                    if rows.len() != hi - lo {
                        return Err(Error::Schema {
                            path: format!("primitives[{i}].coeffs[{c}]"),
                            message: format!("expected {} band rows, got {}", hi - lo, rows.len()),
                        });
                    }
                    for (fi, row) in rows.iter().enumerate() {
                        if row.len() != self.n_frames {
                            return Err(Error::Schema {
                                path: format!("primitives[{i}].coeffs[{c}][{fi}]"),
                                message: format!(
                                    "expected {} frames, got {}",
                                    self.n_frames,
                                    row.len()
                                ),
                            });
                        }
                        for (t, &(re, im)) in row.iter().enumerate() {
                            grid[(lo + fi, t, c)] = Complex64::new(re, im);
                        }
                    }
                }
                Ok(AcousticPrimitive {
                    joint_id: p.joint_id,
                    offset_raw: p.offset_raw,
                    order: p.order,
                    coeffs: grid,
                    weight_logits: p.weight_logits,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            stft: self.stft,
            r_ref: self.r_ref,
            v_sound: self.v_sound,
            pose_rate: self.pose_rate,
            n_frames: self.n_frames,
            mics: self.mics,
            tracks: self.tracks,
            primitives,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tiny_scene() -> Scene {
        let stft = StftConfig {
            window_len: 64,
            hop: 16,
            fft_len: 64,
            sample_rate: 48_000,
        };
        let n_frames = 5;
        let mut p = AcousticPrimitive::zeros("head", 1, stft.bins(), n_frames);
        p.coeffs[(3, 1, 0)] = Complex64::new(0.25, -1.5);
        p.coeffs[(7, 4, 2)] = Complex64::new(-0.125, 0.0625);
        p.offset_raw = [0.3, -0.7, 0.0];
        Scene {
            stft,
            r_ref: R_REF_DEFAULT,
            v_sound: 343.0,
            pose_rate: 30.0,
            n_frames,
            tracks: vec![JointTrack {
                joint_id: "head".into(),
                positions: vec![[0.0, 0.0, 1.6]; 4],
            }],
            primitives: vec![p],
            mics: Some(MicArraySpec {
                positions: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                sample_rate: 48_000,
            }),
        }
    }

    #[test]
    fn offset_envelope() {
        assert_eq!(apply_offset([0.0; 3]), [0.0; 3]);
        let big = apply_offset([1e9, 1e9, 1e9]);
        for v in big {
            assert_relative_eq!(v, 0.2, epsilon = 1e-12);
        }
        // oracle: 0.2 * tanh(1)
        let d = apply_offset([1.0, -1.0, 0.0]);
        let expect = 0.2 * 1.0_f64.tanh();
        assert_relative_eq!(d[0], expect, epsilon = 1e-12);
        assert_relative_eq!(d[1], -expect, epsilon = 1e-12);
        assert_eq!(d[2], 0.0);
        // strict bound wherever tanh has not saturated to 1.0 in f64
        // (|u| < 18; beyond that the rounded bound 0.2 is attained)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let u = [
                rng.gen_range(-18.0..18.0),
                rng.gen_range(-18.0..18.0),
                rng.gen_range(-18.0..18.0),
            ];
            for v in apply_offset(u) {
                assert!(v.abs() < 0.2);
            }
        }
    }

    #[test]
    fn weights_softmax() {
        let logits = Array2::zeros((4, 3));
        let w = primitive_weights(&logits);
        assert!(w.iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let logits = ndarray::arr2(&[[2.0_f64.ln()], [0.0]]);
        let w = primitive_weights(&logits);
        assert_relative_eq!(w[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(w[(1, 0)], 1.0 / 3.0, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut logits = Array2::zeros((5, 7));
        logits.mapv_inplace(|_: f64| rng.gen_range(-4.0..4.0));
        let w = primitive_weights(&logits);
        for col in w.columns() {
            assert_relative_eq!(col.sum(), 1.0, epsilon = 1e-9);
        }
        // invariant to adding a per-frame constant
        let mut shifted = logits.clone();
        for mut col in shifted.columns_mut() {
            col += 3.7;
        }
        let w2 = primitive_weights(&shifted);
        for (a, b) in w.iter().zip(w2.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn spherical_transform_axes() {
        let (r, theta, phi) = to_listener_spherical([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(r, 1.0);
        assert_relative_eq!(theta, 0.0);
        assert_relative_eq!(phi, 0.0);
        let (r, theta, phi) = to_listener_spherical([0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(r, 1.0);
        assert_relative_eq!(theta, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(phi, 0.0);
    }

    #[test]
    fn spherical_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let p = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let l = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            match to_listener_spherical(p, l) {
                Ok((r, theta, phi)) => {
                    let d = spherical_to_cartesian(r, theta, phi);
                    for i in 0..3 {
                        assert!((d[i] - (l[i] - p[i])).abs() < 1e-12);
                    }
                }
                Err(_) => {
                    let d2: f64 = (0..3).map(|i| (l[i] - p[i]).powi(2)).sum();
                    assert!(d2.sqrt() < R_MIN);
                }
            }
        }
    }

    #[test]
    fn near_field_transform_error() {
        assert!(matches!(
            to_listener_spherical([0.0; 3], [0.01, 0.0, 0.0]),
            Err(Error::NearField { .. })
        ));
    }

    #[test]
    fn positions_interpolation() {
        let mut scene = tiny_scene();
        scene.tracks[0].positions = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        scene.pose_rate = 1.0; // two samples spanning one second
        scene.primitives[0].offset_raw = [0.0; 3];
        let pos = scene.positions_at_frames(&[0.0, 0.5, 1.0]).unwrap();
        assert_relative_eq!(pos[0][0][0], 0.0);
        assert_relative_eq!(pos[0][1][0], 0.5);
        assert_relative_eq!(pos[0][2][0], 1.0);

        // static track stays constant, offset added
        let mut scene = tiny_scene();
        scene.primitives[0].offset_raw = [1.0, 0.0, 0.0];
        let pos = scene.positions_at_frames(&[0.0, 0.05]).unwrap();
        let expect = 0.2 * 1.0_f64.tanh();
        for frame in &pos[0] {
            assert_relative_eq!(frame[0], expect, epsilon = 1e-12);
            assert_relative_eq!(frame[2], 1.6);
        }

        // endpoint equals sample + offset
        let mut scene = tiny_scene();
        scene.tracks[0].positions = vec![[0.0; 3], [3.0, 6.0, 9.0], [4.0, 4.0, 4.0]];
        scene.primitives[0].offset_raw = [0.0; 3];
        let t1 = 1.0 / scene.pose_rate;
        let pos = scene.positions_at_frames(&[t1]).unwrap();
        assert_relative_eq!(pos[0][0][1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn positions_out_of_range() {
        let scene = tiny_scene();
        assert!(matches!(
            scene.positions_at_frames(&[99.0]),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn json_roundtrip_byte_identical() {
        let scene = tiny_scene();
        let a = scene.to_json();
        let loaded = Scene::from_json(&a).unwrap();
        let b = loaded.to_json();
        assert_eq!(a, b);
        // and the loaded grids match bit-exactly
        assert_eq!(loaded.primitives[0].coeffs, scene.primitives[0].coeffs);
    }

    #[test]
    fn missing_field_names_it() {
        let err = Scene::from_json("{\"schema_version\":1}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("stft") || msg.contains("missing field"), "{msg}");
        // drop r_ref specifically
        let mut v: serde_json::Value = serde_json::from_str(&tiny_scene().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("r_ref");
        let err = Scene::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("r_ref"), "{err}");
    }

    #[test]
    fn large_scene_dimensions_survive() {
        let stft = StftConfig {
            window_len: 32,
            hop: 8,
            fft_len: 32,
            sample_rate: 48_000,
        };
        let n_frames = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tracks = vec![JointTrack {
            joint_id: "j".into(),
            positions: vec![[0.0, 0.0, 1.0]; 2],
        }];
        let primitives: Vec<AcousticPrimitive> = (0..12)
            .map(|_| {
                let mut p = AcousticPrimitive::zeros("j", 2, stft.bins(), n_frames);
                p.coeffs.mapv_inplace(|_| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                p
            })
            .collect();
        let scene = Scene {
            stft,
            r_ref: 0.5,
            v_sound: 343.0,
            pose_rate: 30.0,
            n_frames,
            tracks,
            primitives,
            mics: None,
        };
        let loaded = Scene::from_json(&scene.to_json()).unwrap();
        assert_eq!(loaded.primitives.len(), 12);
        for p in &loaded.primitives {
            assert_eq!(p.components(), 9);
            assert_eq!(p.coeffs.dim(), (17, 3, 9));
        }
    }
}
