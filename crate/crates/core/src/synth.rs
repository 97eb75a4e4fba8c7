//! Seeded generators for the benchmark experiments, each exposing its
//! hidden ground truth next to the observations.
//!
//! Three families are provided:
//!
//! * a warped square: `z` uniform on `[0,2]²` observed through the
//!   nonlinear map `f(z) = [z₁² − z₂, z₁ + √z₂]`;
//! * coupled-pendulum movies: two spring-coupled pendulums obeying
//!   `ü₁ = −(g/L)u₁ + (k/m)(u₂ − u₁)`, `ü₂ = −(g/L)u₂ − (k/m)(u₂ − u₁)`
//!   with `u₁(0) = δ`, `u₂(0) = 0` and zero initial velocity, whose
//!   closed-form solution mixes the normal modes `ω₁ = √(g/L)` and
//!   `ω₂ = √(g/L + 2k/m)`; each pendulum is rastered into frames and
//!   compressed by a fixed random projection, optionally with an extra
//!   uncoupled nuisance pendulum per side at `ω₃ = ω₁/5` and `ω₄ = 4ω₁`;
//! * rotating-icon movies: four procedural glyphs spinning at 4, 6, 10,
//!   and 15 degrees per frame, composed into three movies that share the
//!   6°-per-frame glyph.
//!
//! All generators are pure functions of their parameters and seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::DataMatrix;

/// Observations plus the hidden variables that generated them.
#[derive(Debug, Clone)]
pub struct GeneratedExperiment {
    /// K row-aligned observation sets.
    pub sets: Vec<DataMatrix>,
    /// Ground-truth common variables, one row per sample.
    pub hidden_common: DataMatrix,
    /// Ground-truth set-specific variables (may be empty).
    pub hidden_specific: Vec<DataMatrix>,
    /// Frequencies, sampling interval, seed — everything needed to
    /// regenerate and to score recovered spectra.
    pub meta: BTreeMap<String, f64>,
}

/// Hidden variables uniform on `[0, 2]²` observed through
/// `f(z) = [z₁² − z₂, z₁ + √z₂]`; no set-specific variables.
pub fn gen_warped_square(n: usize, seed: u64) -> Result<GeneratedExperiment> {
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z_rows = Vec::with_capacity(n);
    let mut x_rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = rng.gen_range(0.0..2.0);
        let z2: f64 = rng.gen_range(0.0..2.0);
        z_rows.push(vec![z1, z2]);
        x_rows.push(vec![z1 * z1 - z2, z1 + z2.sqrt()]);
    }
    let mut meta = BTreeMap::new();
    meta.insert("n".into(), n as f64);
    meta.insert("seed".into(), seed as f64);
    Ok(GeneratedExperiment {
        sets: vec![DataMatrix::from_rows(&x_rows)?],
        hidden_common: DataMatrix::from_rows(&z_rows)?,
        hidden_specific: Vec::new(),
        meta,
    })
}

/// Physical constants of the spring-coupled pendulum pair.
#[derive(Debug, Clone, Copy)]
pub struct PendulumPhysics {
    /// Gravitational acceleration, m/s².
    pub g: f64,
    /// Pendulum length, m.
    pub length: f64,
    /// Spring constant, N/m.
    pub spring_k: f64,
    /// Bob mass, kg.
    pub mass: f64,
    /// Initial displacement of the first pendulum, m.
    pub delta: f64,
}

impl Default for PendulumPhysics {
    fn default() -> Self {
        Self {
            g: 9.81,
            length: 1.0,
            spring_k: 10.0,
            mass: 1.0,
            delta: 0.05,
        }
    }
}

impl PendulumPhysics {
    /// Slow normal-mode angular frequency `√(g/L)`.
    pub fn omega1(&self) -> f64 {
        (self.g / self.length).sqrt()
    }

    /// Fast normal-mode angular frequency `√(g/L + 2k/m)`.
    pub fn omega2(&self) -> f64 {
        (self.g / self.length + 2.0 * self.spring_k / self.mass).sqrt()
    }

    pub fn f1_hz(&self) -> f64 {
        self.omega1() / (2.0 * PI)
    }

    pub fn f2_hz(&self) -> f64 {
        self.omega2() / (2.0 * PI)
    }
}

/// Closed-form displacements of the coupled pair at time `t`:
/// `u₁ = (δ/2)(cos ω₁t + cos ω₂t)`, `u₂ = (δ/2)(cos ω₁t − cos ω₂t)`.
pub fn pendulum_solution(t: f64, physics: &PendulumPhysics) -> (f64, f64) {
    let half = physics.delta / 2.0;
    let c1 = (physics.omega1() * t).cos();
    let c2 = (physics.omega2() * t).cos();
    (half * (c1 + c2), half * (c1 - c2))
}

/// Which pendulum of the coupled pair a frame depicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendulumSide {
    Left,
    Right,
}

/// Frame raster height in pixels (rows).
pub const FRAME_HEIGHT: usize = 20;
/// Frame raster width in pixels (columns).
pub const FRAME_WIDTH: usize = 40;
/// Flattened frame length.
pub const FRAME_PIXELS: usize = FRAME_HEIGHT * FRAME_WIDTH;
/// Rendered swing angle per unit physical angle; amplifies the millimeter
/// physics into a visible on-screen swing.
pub const RENDER_ANGLE_GAIN: f64 = 8.0;
/// Rendered swing amplitude of the nuisance pendulums, radians.
pub const NOISE_ANGLE_AMPLITUDE: f64 = 0.4;

/// C¹ soft threshold: 1 well inside, 0 well outside, cubic in between.
fn smooth_coverage(signed_inside: f64, half_edge: f64) -> f64 {
    let s = ((signed_inside + half_edge) / (2.0 * half_edge)).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Distance from a point to the segment a→b.
fn segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let vx = bx - ax;
    let vy = by - ay;
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((px - ax) * vx + (py - ay) * vy) / len2
    } else {
        0.0
    };
    let t = t.clamp(0.0, 1.0);
    let cx = ax + t * vx;
    let cy = ay + t * vy;
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

struct PendulumSprite {
    pivot_x: f64,
    pivot_y: f64,
    rod_len: f64,
    bob_radius: f64,
    angle: f64,
}

impl PendulumSprite {
    fn intensity(&self, px: f64, py: f64) -> f64 {
        let bx = self.pivot_x + self.rod_len * self.angle.sin();
        let by = self.pivot_y + self.rod_len * self.angle.cos();
        let rod = smooth_coverage(
            0.7 - segment_distance(px, py, self.pivot_x, self.pivot_y, bx, by),
            0.5,
        );
        let d_bob = ((px - bx).powi(2) + (py - by).powi(2)).sqrt();
        let bob = smooth_coverage(self.bob_radius - d_bob, 0.5);
        rod.max(bob)
    }
}

/// Renders one movie frame: an anti-aliased rod-and-bob pendulum swinging
/// by `angle_main` around a top pivot, plus an optional second nuisance
/// pendulum beside it. The raster is 20 rows by 40 columns, column-stacked
/// into a length-800 vector with intensities in `[0, 1]`; the frame is a
/// smooth, injective function of the angles over the motion range.
pub fn render_pendulum_frame(
    angle_main: f64,
    angle_noise: Option<f64>,
    side: PendulumSide,
) -> DVector<f64> {
    let bob_radius = match side {
        PendulumSide::Left => 3.0,
        PendulumSide::Right => 2.5,
    };
    let main_pivot_x = if angle_noise.is_some() {
        10.5
    } else {
        (FRAME_WIDTH as f64 - 1.0) / 2.0
    };
    let main = PendulumSprite {
        pivot_x: main_pivot_x,
        pivot_y: 1.5,
        rod_len: 13.0,
        bob_radius,
        angle: angle_main,
    };
    let noise = angle_noise.map(|angle| PendulumSprite {
        pivot_x: 29.5,
        pivot_y: 1.5,
        rod_len: 12.0,
        bob_radius: 2.6,
        angle,
    });
    let mut frame = DVector::zeros(FRAME_PIXELS);
    for c in 0..FRAME_WIDTH {
        for r in 0..FRAME_HEIGHT {
            let px = c as f64;
            let py = r as f64;
            let mut v = main.intensity(px, py);
            if let Some(sprite) = &noise {
                v = v.max(sprite.intensity(px, py));
            }
            frame[c * FRAME_HEIGHT + r] = v;
        }
    }
    frame
}

/// A wide random projection with approximately orthonormal columns: the
/// transpose of the Q factor of a seeded Gaussian draw, scaled so columns
/// have unit norm on average.
fn orthonormal_projection(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(in_dim, out_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..out_dim {
        if r[(j, j)] < 0.0 {
            for i in 0..in_dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    (q * (in_dim as f64 / out_dim as f64).sqrt()).transpose()
}

/// Dimension of the projected pendulum observations.
pub const PENDULUM_OBS_DIM: usize = 200;

/// One rendered pendulum sample: the two projected frames followed by the
/// latent states behind them (u₁, u₂, and the two nuisance angles).
type PendulumFrame = (Vec<f64>, Vec<f64>, f64, f64, f64, f64);

/// Generates the coupled-pendulum movie pair: frames of each pendulum at
/// `t_i = i·ts`, rendered with an amplified swing angle and compressed by
/// per-movie random projections drawn once from the seed. In noisy mode
/// each movie also shows an uncoupled nuisance pendulum, at `ω₃ = ω₁/5`
/// beside the first pendulum and `ω₄ = 4ω₁` beside the second, with
/// seeded phases.
pub fn gen_pendulum(
    noisy: bool,
    n: usize,
    ts: f64,
    seed: u64,
    physics: &PendulumPhysics,
) -> Result<GeneratedExperiment> {
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: n,
        });
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(Error::DimensionMismatch(format!(
            "sampling interval must be positive: {ts}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = orthonormal_projection(&mut rng, PENDULUM_OBS_DIM, FRAME_PIXELS);
    let g = orthonormal_projection(&mut rng, PENDULUM_OBS_DIM, FRAME_PIXELS);
    let omega1 = physics.omega1();
    let omega3 = omega1 / 5.0;
    let omega4 = 4.0 * omega1;
    let (phase3, phase4) = if noisy {
        (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI))
    } else {
        (0.0, 0.0)
    };

    let per_frame: Vec<PendulumFrame> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * ts;
            let (u1, u2) = pendulum_solution(t, physics);
            let theta1 = RENDER_ANGLE_GAIN * u1 / physics.length;
            let theta2 = RENDER_ANGLE_GAIN * u2 / physics.length;
            let a3 = NOISE_ANGLE_AMPLITUDE * (omega3 * t + phase3).cos();
            let a4 = NOISE_ANGLE_AMPLITUDE * (omega4 * t + phase4).cos();
            let m1 = render_pendulum_frame(theta1, noisy.then_some(a3), PendulumSide::Left);
            let m2 = render_pendulum_frame(theta2, noisy.then_some(a4), PendulumSide::Right);
            let x = (&f * m1).iter().copied().collect();
            let y = (&g * m2).iter().copied().collect();
            (x, y, u1, u2, a3, a4)
        })
        .collect();

    let mut x_rows = Vec::with_capacity(n);
    let mut y_rows = Vec::with_capacity(n);
    let mut common = Vec::with_capacity(n);
    let mut spec_x = Vec::with_capacity(n);
    let mut spec_y = Vec::with_capacity(n);
    for (x, y, u1, u2, a3, a4) in per_frame {
        x_rows.push(x);
        y_rows.push(y);
        common.push(vec![u1, u2]);
        spec_x.push(vec![a3]);
        spec_y.push(vec![a4]);
    }

    let mut meta = BTreeMap::new();
    meta.insert("n".into(), n as f64);
    meta.insert("seed".into(), seed as f64);
    meta.insert("ts_s".into(), ts);
    meta.insert("f1_hz".into(), physics.f1_hz());
    meta.insert("f2_hz".into(), physics.f2_hz());
    meta.insert("render_angle_gain".into(), RENDER_ANGLE_GAIN);
    let hidden_specific = if noisy {
        meta.insert("f3_hz".into(), omega3 / (2.0 * PI));
        meta.insert("f4_hz".into(), omega4 / (2.0 * PI));
        meta.insert("phase3_rad".into(), phase3);
        meta.insert("phase4_rad".into(), phase4);
        meta.insert("noise_amplitude_rad".into(), NOISE_ANGLE_AMPLITUDE);
        vec![
            DataMatrix::from_rows(&spec_x)?,
            DataMatrix::from_rows(&spec_y)?,
        ]
    } else {
        Vec::new()
    };
    Ok(GeneratedExperiment {
        sets: vec![
            DataMatrix::from_rows(&x_rows)?,
            DataMatrix::from_rows(&y_rows)?,
        ],
        hidden_common: DataMatrix::from_rows(&common)?,
        hidden_specific,
        meta,
    })
}

/// How the three icon movies share their spinning glyphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IconLayout {
    /// Every movie shows the common glyph plus one glyph of its own.
    Disjoint,
    /// Every pair of movies shares two glyphs; only one glyph appears in
    /// all three.
    PairwiseShared,
}

/// Side length of one glyph cell in pixels.
pub const ICON_CELL: usize = 16;

/// Glyph angular speeds in integer degrees per frame: the common glyph
/// spins at 6°; the specific ones at 4°, 10°, and 15°.
pub const ICON_SPEEDS_DEG: [u32; 4] = [6, 4, 10, 15];

/// Sprite-like glyph: a filled region whose radius varies with angle
/// through six harmonics, shaded by an angular-radial texture.
///
/// The common glyph is drawn as a large detailed sprite — strong low-order
/// harmonics, visible texture, crisp edges — so a small rotation produces
/// a large pixel response spread over several well-resolved temporal
/// harmonics of its spin rate. The movie-specific glyphs are small,
/// soft, single-harmonic blobs: their rotation barely moves their pixels,
/// and a pure first harmonic gives local fits no higher-order structure to
/// latch onto. Local fits rank directions by in-window variance, so the
/// dominant, well-resolved motion in every movie is the glyph all movies
/// share.
struct GlyphShape {
    base_radius: f64,
    amplitudes: [f64; 6],
    phases: [f64; 6],
    /// Texture contrast (0 = flat shading).
    texture_amp: f64,
    /// Angular frequency of the texture pattern.
    texture_freq: f64,
    /// Radial frequency of the texture pattern.
    texture_radial: f64,
    texture_phase: f64,
    /// Edge transition width in pixels; small = crisp outline.
    edge: f64,
}

const GLYPHS: [GlyphShape; 4] = [
    // Common glyph, 6 deg/frame: large rich sprite. Its pixel signal
    // occupies temporal frequencies {6, 12, 18, 24}°/frame — all slow
    // enough to stay smooth across a short window — with the fundamental
    // clearly dominant (texture at angular frequency 1 reinforces it over
    // the whole interior) so that one-dimensional projections of the
    // glyph's pixel curve vary monotonically with small rotations instead
    // of repeating several times per turn.
    GlyphShape {
        base_radius: 5.2,
        amplitudes: [0.9, 0.5, 0.2, 0.12, 0.0, 0.0],
        phases: [0.7, 2.9, 4.4, 1.3, 0.0, 0.0],
        texture_amp: 0.4,
        texture_freq: 1.0,
        texture_radial: 1.9,
        texture_phase: 0.9,
        edge: 0.45,
    },
    // Specific glyphs (4, 10, 15 deg/frame): small soft blobs, first
    // harmonic only.
    GlyphShape {
        base_radius: 3.0,
        amplitudes: [0.4, 0.0, 0.0, 0.0, 0.0, 0.0],
        phases: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        texture_amp: 0.08,
        texture_freq: 1.0,
        texture_radial: 0.5,
        texture_phase: 2.1,
        edge: 1.1,
    },
    GlyphShape {
        base_radius: 2.8,
        amplitudes: [0.32, 0.0, 0.0, 0.0, 0.0, 0.0],
        phases: [1.9, 0.0, 0.0, 0.0, 0.0, 0.0],
        texture_amp: 0.07,
        texture_freq: 1.0,
        texture_radial: 0.7,
        texture_phase: 4.4,
        edge: 1.2,
    },
    GlyphShape {
        base_radius: 2.6,
        amplitudes: [0.26, 0.0, 0.0, 0.0, 0.0, 0.0],
        phases: [2.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        texture_amp: 0.06,
        texture_freq: 1.0,
        texture_radial: 0.4,
        texture_phase: 5.8,
        edge: 1.3,
    },
];

/// Renders one 16×16 glyph cell rotated by `angle` radians.
fn render_icon_cell(glyph: &GlyphShape, angle: f64) -> Vec<f64> {
    let center = (ICON_CELL as f64 - 1.0) / 2.0;
    let mut cell = vec![0.0; ICON_CELL * ICON_CELL];
    for r in 0..ICON_CELL {
        for c in 0..ICON_CELL {
            let dx = c as f64 - center;
            let dy = r as f64 - center;
            let rad = (dx * dx + dy * dy).sqrt();
            let phi = dy.atan2(dx) - angle;
            let mut rho = glyph.base_radius;
            for m in 0..6 {
                rho += glyph.amplitudes[m] * ((m as f64 + 1.0) * phi + glyph.phases[m]).cos();
            }
            let coverage = smooth_coverage(rho - rad, glyph.edge);
            let texture = 1.0 - glyph.texture_amp
                + glyph.texture_amp
                    * (glyph.texture_freq * phi + glyph.texture_radial * rad + glyph.texture_phase)
                        .cos();
            cell[r * ICON_CELL + c] = coverage * texture;
        }
    }
    cell
}

/// Generates the three icon movies. Four glyphs spin at 6°, 4°, 10°, and
/// 15° per frame from seeded integer initial angles; each frame
/// concatenates its movie's glyph cells side by side. The 6° glyph appears
/// in every movie and is the only variable common to all three.
pub fn gen_icons(n: usize, layout: IconLayout, seed: u64) -> Result<GeneratedExperiment> {
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: [u32; 4] = core::array::from_fn(|_| rng.gen_range(0..360u32));
    // Glyph indices per movie; index 0 is the common 6°/frame glyph.
    let movies: [&[usize]; 3] = match layout {
        IconLayout::Disjoint => [&[0, 1], &[0, 2], &[0, 3]],
        IconLayout::PairwiseShared => [&[0, 1, 2], &[0, 1, 3], &[0, 2, 3]],
    };

    let angle_deg = |glyph: usize, frame: usize| -> u32 {
        (offsets[glyph] + ICON_SPEEDS_DEG[glyph] * frame as u32) % 360
    };
    let angle_rad =
        |glyph: usize, frame: usize| -> f64 { f64::from(angle_deg(glyph, frame)).to_radians() };

    let mut sets = Vec::with_capacity(3);
    let mut hidden_specific = Vec::with_capacity(3);
    for glyph_ids in movies {
        let frames: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut frame = Vec::with_capacity(glyph_ids.len() * ICON_CELL * ICON_CELL);
                for &gid in glyph_ids {
                    frame.extend(render_icon_cell(&GLYPHS[gid], angle_rad(gid, i)));
                }
                frame
            })
            .collect();
        sets.push(DataMatrix::from_rows(&frames)?);
        let specifics: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                glyph_ids[1..]
                    .iter()
                    .map(|&gid| angle_rad(gid, i))
                    .collect()
            })
            .collect();
        hidden_specific.push(DataMatrix::from_rows(&specifics)?);
    }
    let common: Vec<Vec<f64>> = (0..n).map(|i| vec![angle_rad(0, i)]).collect();

    let mut meta = BTreeMap::new();
    meta.insert("n".into(), n as f64);
    meta.insert("seed".into(), seed as f64);
    meta.insert("f_common_cpf".into(), f64::from(ICON_SPEEDS_DEG[0]) / 360.0);
    meta.insert(
        "f_specific1_cpf".into(),
        f64::from(ICON_SPEEDS_DEG[1]) / 360.0,
    );
    meta.insert(
        "f_specific2_cpf".into(),
        f64::from(ICON_SPEEDS_DEG[2]) / 360.0,
    );
    meta.insert(
        "f_specific3_cpf".into(),
        f64::from(ICON_SPEEDS_DEG[3]) / 360.0,
    );
    for (g, off) in offsets.iter().enumerate() {
        meta.insert(format!("offset{g}_deg"), f64::from(*off));
    }
    Ok(GeneratedExperiment {
        sets,
        hidden_common: DataMatrix::from_rows(&common)?,
        hidden_specific,
        meta,
    })
}
