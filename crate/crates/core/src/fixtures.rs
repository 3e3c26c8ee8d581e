//! Synthetic media for demos and tests: voiced utterances, skeleton gestures
//! and facial feature streams, plus a writer that lays out a complete demo
//! directory (prototypes, models, attempts, a session script and a config).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::{
    longest_gesture, train_from_traces, trace_to_csv, Joint, SegmentConfig, SkeletonFrame, Vec3, BASIC_EMOTIONS,
};
use crate::emotionml::AVPoint;
use crate::face::{
    feature_csv, train_model, training_csv, FaceFeatureFrame, DEFAULT_LAMBDA, EXPRESSION_SLOTS, FEATURE_DIM, POSE_SLOT,
};
use crate::platform::vocabulary::{platform_label_for_basic, Vocabulary};
use crate::voice::{write_wav, AudioClip, DEFAULT_SAMPLE_RATE};

fn other(e: impl std::fmt::Display) -> io::Error {
    io::Error::other(e.to_string())
}

/// A voiced utterance: harmonic tone bursts with a linear pitch glide.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceSpec {
    pub f0_start_hz: f64,
    pub f0_end_hz: f64,
    pub amplitude: f64,
    /// Voiced runs as `(start_ms, duration_ms)`.
    pub voiced: Vec<(f64, f64)>,
    pub duration_ms: f64,
}

impl UtteranceSpec {
    /// Prosody derived from an arousal/valence point: higher arousal raises
    /// pitch, loudness and pitch movement; valence shifts the melody and the
    /// length of the opening phrase.
    pub fn for_point(p: AVPoint) -> UtteranceSpec {
        let onset = 260.0 + 140.0 * p.valence + 60.0 * p.arousal;
        let gap = 120.0 - 50.0 * p.arousal;
        let second = 300.0 + 120.0 * p.valence.abs();
        UtteranceSpec {
            f0_start_hz: 150.0 + 70.0 * p.arousal + 25.0 * p.valence,
            f0_end_hz: 150.0 + 70.0 * p.arousal + 25.0 * p.valence + 60.0 * p.arousal - 30.0 * p.valence,
            amplitude: 0.2 + 0.12 * p.arousal,
            voiced: vec![(50.0, onset), (50.0 + onset + gap, second)],
            duration_ms: 50.0 + onset + gap + second + 80.0,
        }
    }
}

/// Renders an utterance at 16 kHz; `seed` drives a faint noise floor.
pub fn synth_utterance(spec: &UtteranceSpec, seed: u64) -> AudioClip {
    let rate = DEFAULT_SAMPLE_RATE as f64;
    let n = (spec.duration_ms * rate / 1000.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = 0.0f64;
    let samples = (0..n)
        .map(|i| {
            let t_ms = i as f64 * 1000.0 / rate;
            let f0 = spec.f0_start_hz + (spec.f0_end_hz - spec.f0_start_hz) * t_ms / spec.duration_ms;
            phase += std::f64::consts::TAU * f0 / rate;
            let voiced = spec.voiced.iter().any(|&(s, d)| t_ms >= s && t_ms < s + d);
            let tone = if voiced {
                spec.amplitude * (phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin()) / 1.75
            } else {
                0.0
            };
            tone + rng.random_range(-0.002..0.002)
        })
        .collect();
    AudioClip::new(samples, DEFAULT_SAMPLE_RATE)
}

pub fn prototype_clip(label: &str, vocabulary: &Vocabulary) -> Option<AudioClip> {
    let idx = vocabulary.labels().position(|l| l == label)?;
    Some(synth_utterance(&UtteranceSpec::for_point(vocabulary.point(label)?), idx as u64))
}

fn rest_pose(t_ms: f64) -> SkeletonFrame {
    let mut f = SkeletonFrame::new(t_ms, [Vec3::zeros(); 11]);
    let pose = [
        (Joint::Head, [0.0, 1.65, 0.0]),
        (Joint::Neck, [0.0, 1.45, 0.0]),
        (Joint::LShoulder, [0.19, 1.4, 0.0]),
        (Joint::RShoulder, [-0.19, 1.4, 0.0]),
        (Joint::LElbow, [0.24, 1.15, 0.03]),
        (Joint::RElbow, [-0.24, 1.15, 0.03]),
        (Joint::LHand, [0.22, 0.92, 0.12]),
        (Joint::RHand, [-0.22, 0.92, 0.12]),
        (Joint::Torso, [0.0, 1.15, 0.0]),
        (Joint::LHip, [0.1, 0.88, 0.0]),
        (Joint::RHip, [-0.1, 0.88, 0.0]),
    ];
    for (j, [x, y, z]) in pose {
        f.set(j, Vec3::new(x, y, z));
    }
    f
}

fn nudge(f: &mut SkeletonFrame, j: Joint, d: Vec3) {
    let p = f.joint(j);
    f.set(j, p + d);
}

/// Leans the head and neck forward (positive) or back by `amount` meters.
fn lean(f: &mut SkeletonFrame, amount: f64) {
    nudge(f, Joint::Neck, Vec3::new(0.0, 0.0, amount));
    nudge(f, Joint::Head, Vec3::new(0.0, 0.0, 1.6 * amount));
}

/// A two-second stylized gesture for one of the six basic emotions, with
/// seeded variation in tempo, size and sensor noise. Unknown labels give
/// `None`.
pub fn synth_gesture(emotion: &str, seed: u64) -> Option<Vec<SkeletonFrame>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tempo = rng.random_range(0.9..1.1);
    let size = rng.random_range(0.9..1.1);
    let phase = rng.random_range(0.0..0.5);
    let tau = std::f64::consts::TAU;
    type Motion = Box<dyn Fn(&mut SkeletonFrame, f64)>;
    let motion: Motion = match emotion {
        "happiness" => Box::new(move |f, t| {
            // both arms waving high and wide, mirrored
            let w = 0.3 * size * (2.0 * tempo * tau * t + phase).sin();
            nudge(f, Joint::LHand, Vec3::new(0.25 + w, 0.75, 0.0));
            nudge(f, Joint::RHand, Vec3::new(-0.25 - w, 0.75, 0.0));
            nudge(f, Joint::LElbow, Vec3::new(0.15, 0.35, 0.0));
            nudge(f, Joint::RElbow, Vec3::new(-0.15, 0.35, 0.0));
        }),
        "anger" => Box::new(move |f, t| {
            // sharp forward strikes with the right hand, leaning in
            let c = (3.0 * tempo * tau * t + phase).sin();
            let strike = 0.35 * size * c.signum() * c.abs().powf(0.3);
            nudge(f, Joint::RHand, Vec3::new(0.1, 0.3, 0.25 + strike));
            nudge(f, Joint::RElbow, Vec3::new(0.0, 0.15, 0.1 + 0.5 * strike));
            lean(f, 0.12);
        }),
        "sadness" => Box::new(move |f, t| {
            // slumped forward, hands close together, barely moving
            let d = 0.03 * size * (0.5 * tempo * tau * t + phase).sin();
            nudge(f, Joint::LHand, Vec3::new(-0.15, -0.05 + d, 0.0));
            nudge(f, Joint::RHand, Vec3::new(0.15, -0.05 + d, 0.0));
            lean(f, 0.08);
            nudge(f, Joint::Head, Vec3::new(0.0, -0.08, 0.0));
        }),
        "fear" => Box::new(move |f, t| {
            // hands raised close to the face, trembling, leaning back
            let tremble = 0.015 * size * (7.0 * tempo * tau * t + phase).sin();
            nudge(f, Joint::LHand, Vec3::new(-0.12 + tremble, 0.6, 0.05));
            nudge(f, Joint::RHand, Vec3::new(0.12 + tremble, 0.6, 0.05));
            lean(f, -0.1);
        }),
        "surprise" => Box::new(move |f, t| {
            // arms fly open in the first 0.4 s, then hold
            let k = (t / (0.4 / tempo)).min(1.0);
            let open = 0.45 * size * (1.0 - (1.0 - k).powi(3));
            nudge(f, Joint::LHand, Vec3::new(open, 0.5 * open, 0.05));
            nudge(f, Joint::RHand, Vec3::new(-open, 0.5 * open, 0.05));
            lean(f, -0.05);
        }),
        "disgust" => Box::new(move |f, t| {
            // one hand pushing sideways while the torso turns away
            let push = 0.2 * size * (1.2 * tempo * tau * t + phase).sin();
            nudge(f, Joint::LHand, Vec3::new(0.25 + push, 0.2, 0.1));
            let sway = Vec3::new(0.04 * size * (1.2 * tempo * tau * t + phase).sin(), 0.0, 0.0);
            for j in [Joint::Torso, Joint::Neck, Joint::Head, Joint::LShoulder, Joint::RShoulder] {
                nudge(f, j, sway);
            }
            lean(f, -0.07);
        }),
        _ => return None,
    };
    let frames = (0..60)
        .map(|i| {
            let t_ms = i as f64 * 1000.0 / 30.0;
            let mut f = rest_pose(t_ms);
            motion(&mut f, t_ms / 1000.0);
            for p in f.joints.iter_mut() {
                *p += Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    * 0.001;
            }
            f
        })
        .collect();
    Some(frames)
}

/// The planted linear map behind the synthetic face data: weights for
/// `(valence, arousal)` on the expression slots only.
pub fn planted_face_weights(seed: u64) -> [[f64; FEATURE_DIM]; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [0; 2].map(|_| {
        let mut w = [0.0f64; FEATURE_DIM];
        for v in w.iter_mut().take(EXPRESSION_SLOTS) {
            *v = rng.random_range(-1.0..1.0);
        }
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        w.map(|v| 0.85 * v / l1)
    })
}

fn random_pose(rng: &mut ChaCha8Rng, x: &mut [f64; FEATURE_DIM]) {
    for v in &mut x[POSE_SLOT..POSE_SLOT + 3] {
        *v = rng.random_range(-0.2..0.2);
    }
}

/// Training rows `(features, [valence, arousal])` from the planted weights
/// plus a little target noise; targets stay inside [-1, 1].
pub fn face_training_data(seed: u64, n: usize) -> (Vec<[f64; FEATURE_DIM]>, Vec<[f64; 2]>) {
    let w = planted_face_weights(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = [0.0; FEATURE_DIM];
        for v in x.iter_mut().take(EXPRESSION_SLOTS) {
            *v = rng.random_range(-1.0..1.0);
        }
        random_pose(&mut rng, &mut x);
        let y = [0, 1].map(|o| {
            let clean: f64 = w[o].iter().zip(&x).map(|(a, b)| a * b).sum();
            (clean + rng.random_range(-0.02..0.02)).clamp(-1.0, 1.0)
        });
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

/// A feature stream whose planted-model output is `target` on every frame:
/// the minimum-norm expression vector for the two targets, plus small
/// noise in directions the model ignores.
pub fn face_stream_for(target: AVPoint, seed: u64, frames: usize) -> Vec<FaceFeatureFrame> {
    let w = planted_face_weights(seed);
    let dot = |a: &[f64; FEATURE_DIM], b: &[f64; FEATURE_DIM]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // solve (W Wᵀ) c = t for the 2×2 Gram system, then x = Wᵀ c
    let (g00, g01, g11) = (dot(&w[0], &w[0]), dot(&w[0], &w[1]), dot(&w[1], &w[1]));
    let det = g00 * g11 - g01 * g01;
    let t = [target.valence, target.arousal];
    let c = [(g11 * t[0] - g01 * t[1]) / det, (g00 * t[1] - g01 * t[0]) / det];
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(frames as u64));
    (0..frames)
        .map(|i| {
            let mut x = [0.0; FEATURE_DIM];
            for (k, v) in x.iter_mut().enumerate() {
                *v = c[0] * w[0][k] + c[1] * w[1][k];
            }
            random_pose(&mut rng, &mut x);
            FaceFeatureFrame::new(i as f64 * 40.0, x)
        })
        .collect()
}

pub const FACE_SEED: u64 = 2013;

/// Paths of a generated demo directory.
#[derive(Debug, Clone)]
pub struct DemoData {
    pub root: PathBuf,
    pub prototypes: PathBuf,
    pub body_model: PathBuf,
    pub face_model: PathBuf,
    pub config: PathBuf,
    pub script: PathBuf,
    pub survey: PathBuf,
}

/// The six scripted turns: `(target, modality, media file relative to the
/// script)`.
pub const DEMO_TURNS: [(&str, &str, &str); 6] = [
    ("happy", "voice", "attempts/voice/happy.wav"),
    ("angry", "body", "attempts/body/anger.csv"),
    ("sad", "face", "attempts/face/sad.csv"),
    ("afraid", "voice", "attempts/voice/afraid.wav"),
    ("surprised", "body", "attempts/body/surprise.csv"),
    ("proud", "face", "attempts/face/proud.csv"),
];

/// Writes a complete, self-consistent demo tree under `root`.
pub fn write_demo_data(root: &Path, seed: u64) -> io::Result<DemoData> {
    let vocab = Vocabulary::default();
    let prototypes = root.join("prototypes");
    for label in vocab.labels() {
        let dir = prototypes.join(label);
        fs::create_dir_all(&dir)?;
        let clip = prototype_clip(label, &vocab).expect("label from vocabulary");
        write_wav(&clip, &dir.join(crate::voice::REFERENCE_WAV)).map_err(other)?;
    }

    let attempts = root.join("attempts");
    for sub in ["voice", "body", "face"] {
        fs::create_dir_all(attempts.join(sub))?;
    }
    for label in vocab.labels() {
        fs::copy(prototypes.join(label).join(crate::voice::REFERENCE_WAV), attempts.join("voice").join(format!("{label}.wav")))?;
    }

    let mut training = Vec::new();
    for (i, emotion) in BASIC_EMOTIONS.iter().enumerate() {
        for k in 0..8u64 {
            let trace = synth_gesture(emotion, seed.wrapping_mul(1000) + 100 * i as u64 + k).expect("basic emotion");
            training.push((emotion.to_string(), longest_gesture(&trace, &SegmentConfig::default()).map_err(other)?));
        }
        let attempt = synth_gesture(emotion, seed.wrapping_mul(1000) + 100 * i as u64 + 50).expect("basic emotion");
        fs::write(attempts.join("body").join(format!("{emotion}.csv")), trace_to_csv(&attempt))?;
    }
    let body_model = root.join("body.model");
    train_from_traces(&training).map_err(other)?.save(&body_model).map_err(other)?;

    let (xs, ys) = face_training_data(FACE_SEED, 400);
    fs::write(root.join("face_training.csv"), training_csv(&xs, &ys))?;
    let face_model = root.join("face.model");
    train_model(&xs, &ys, DEFAULT_LAMBDA).map_err(other)?.save(&face_model).map_err(other)?;
    for label in vocab.labels() {
        let stream = face_stream_for(vocab.point(label).expect("known label"), FACE_SEED, 25);
        fs::write(attempts.join("face").join(format!("{label}.csv")), feature_csv(&stream))?;
    }

    let script = root.join("session.txt");
    let mut text = format!("# demo session\nseed: {seed}\nboard_len: 10\n");
    for (target, modality, media) in DEMO_TURNS {
        text.push_str(&format!("turn: {target} {modality} {media}\n"));
    }
    fs::write(&script, text)?;

    let survey = root.join("survey.csv");
    fs::write(&survey, "stimulus_id,correct,n,k\nhappy_face_01,60,60,6\nsad_voice_02,10,60,6\nangry_body_03,36,60,6\n")?;

    let config = root.join("affectplay.conf");
    fs::write(
        &config,
        format!(
            "# generated demo configuration\nvoice.prototypes: {}\nbody.model: {}\nface.model: {}\n",
            prototypes.display(),
            body_model.display(),
            face_model.display()
        ),
    )?;
    Ok(DemoData { root: root.to_path_buf(), prototypes, body_model, face_model, config, script, survey })
}

/// Platform label a body attempt file is expected to be recognized as.
pub fn expected_body_label(basic: &str) -> Option<&'static str> {
    platform_label_for_basic(basic)
}
