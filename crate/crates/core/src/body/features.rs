use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{validate_trace, BodyError, Joint, SkeletonFrame, Vec3};

pub const FEATURE_COUNT: usize = 10;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ke_hands",
    "ke_head",
    "ke_upper",
    "symmetry",
    "lean_angle",
    "directness",
    "impulsivity",
    "fluidity",
    "openness",
    "sway",
];

const HANDS: [Joint; 2] = [Joint::LHand, Joint::RHand];
const UPPER_BODY: [Joint; 9] = [
    Joint::Head,
    Joint::Neck,
    Joint::LShoulder,
    Joint::RShoulder,
    Joint::LElbow,
    Joint::RElbow,
    Joint::LHand,
    Joint::RHand,
    Joint::Torso,
];

/// Paths shorter than this count as no movement.
const MIN_PATH_M: f64 = 1e-3;
const MIN_SPAN_MS: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyFeatures {
    pub ke_hands: f64,
    pub ke_head: f64,
    pub ke_upper: f64,
    pub symmetry: f64,
    pub lean_angle: f64,
    pub directness: f64,
    pub impulsivity: f64,
    pub fluidity: f64,
    pub openness: f64,
    pub sway: f64,
}

impl BodyFeatures {
    pub fn to_vector(&self) -> [f64; FEATURE_COUNT] {
        [
            self.ke_hands,
            self.ke_head,
            self.ke_upper,
            self.symmetry,
            self.lean_angle,
            self.directness,
            self.impulsivity,
            self.fluidity,
            self.openness,
            self.sway,
        ]
    }

    pub fn from_vector(v: [f64; FEATURE_COUNT]) -> Self {
        BodyFeatures {
            ke_hands: v[0],
            ke_head: v[1],
            ke_upper: v[2],
            symmetry: v[3],
            lean_angle: v[4],
            directness: v[5],
            impulsivity: v[6],
            fluidity: v[7],
            openness: v[8],
            sway: v[9],
        }
    }
}

/// Central differences in the interior, one-sided at the ends; time in
/// seconds.
pub(crate) fn differentiate(values: &[Vec3], times_s: &[f64]) -> Vec<Vec3> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (values[b] - values[a]) / (times_s[b] - times_s[a])
        })
        .collect()
}

fn track(trace: &[SkeletonFrame], j: Joint) -> Vec<Vec3> {
    trace.iter().map(|f| f.joint(j)).collect()
}

fn times_s(trace: &[SkeletonFrame]) -> Vec<f64> {
    trace.iter().map(|f| f.timestamp_ms / 1000.0).collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn path_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn mean_kinetic_energy(velocities: &[Vec<Vec3>]) -> f64 {
    let frames = velocities.first().map_or(0, Vec::len);
    mean((0..frames).map(|i| velocities.iter().map(|v| 0.5 * v[i].norm_squared()).sum::<f64>()))
}

fn sway_amplitude(trace: &[SkeletonFrame]) -> f64 {
    let origin = trace[0].joint(Joint::Torso);
    let dx: Vec<f64> = trace.iter().map(|f| f.joint(Joint::Torso).x - origin.x).collect();
    let dz: Vec<f64> = trace.iter().map(|f| f.joint(Joint::Torso).z - origin.z).collect();
    let n = dx.len();
    let spectrum = |d: &[f64]| {
        let m = mean(d.iter().copied());
        let mut buf: Vec<Complex<f64>> = d.iter().map(|v| Complex::new(v - m, 0.0)).collect();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        buf
    };
    let (sx, sz) = (spectrum(&dx), spectrum(&dz));
    (1..=n / 2)
        .map(|k| 2.0 * (sx[k].norm_sqr() + sz[k].norm_sqr()).sqrt() / n as f64)
        .fold(0.0, f64::max)
}

/// Computes [`BodyFeatures`] for a trace of at least three frames spanning
/// 200 ms or more.
pub fn extract_features(trace: &[SkeletonFrame]) -> Result<BodyFeatures, BodyError> {
    validate_trace(trace)?;
    let span_ms = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => b.timestamp_ms - a.timestamp_ms,
        _ => 0.0,
    };
    if trace.len() < 3 || span_ms < MIN_SPAN_MS {
        return Err(BodyError::TooFewFrames { frames: trace.len(), span_ms });
    }
    let t = times_s(trace);
    let velocity = |j: Joint| differentiate(&track(trace, j), &t);

    let ke_hands = mean_kinetic_energy(&HANDS.map(velocity));
    let ke_head = mean_kinetic_energy(&[velocity(Joint::Head)]);
    let ke_upper = mean_kinetic_energy(&UPPER_BODY.map(velocity));

    let shoulder_width =
        mean(trace.iter().map(|f| (f.joint(Joint::LShoulder) - f.joint(Joint::RShoulder)).norm())).max(1e-6);

    // left hand against the right hand mirrored through the torso's sagittal plane
    let mirror_gap = mean(trace.iter().map(|f| {
        let r = f.joint(Joint::RHand);
        let mirrored = Vec3::new(2.0 * f.joint(Joint::Torso).x - r.x, r.y, r.z);
        (f.joint(Joint::LHand) - mirrored).norm()
    }));
    let symmetry = 1.0 - (mirror_gap / shoulder_width).min(1.0);

    let lean_angle = mean(trace.iter().map(|f| {
        let up = f.joint(Joint::Neck) - f.joint(Joint::Torso);
        up.z.atan2(up.y)
    }));

    let (left, right) = (track(trace, Joint::LHand), track(trace, Joint::RHand));
    let (len_l, len_r) = (path_length(&left), path_length(&right));
    let (hand, path) = if len_l > len_r { (left, len_l) } else { (right, len_r) };

    let directness = if path < MIN_PATH_M { 1.0 } else { ((hand[hand.len() - 1] - hand[0]).norm() / path).min(1.0) };

    let accel = differentiate(&differentiate(&hand, &t), &t);
    let accel_mag: Vec<f64> = accel.iter().map(|a| a.norm()).collect();
    let mean_accel = mean(accel_mag.iter().copied());
    let impulsivity = if path < MIN_PATH_M || mean_accel < 1e-9 {
        1.0
    } else {
        accel_mag.iter().copied().fold(0.0, f64::max) / mean_accel
    };

    let jerk = differentiate(&accel, &t);
    let duration_s = span_ms / 1000.0;
    let normalized_jerk =
        if path < MIN_PATH_M { 0.0 } else { mean(jerk.iter().map(|j| j.norm())) * duration_s.powi(3) / path };
    let fluidity = 1.0 / (1.0 + normalized_jerk);

    let openness = (mean(trace.iter().map(|f| {
        let torso = f.joint(Joint::Torso);
        0.5 * ((f.joint(Joint::LHand) - torso).norm() + (f.joint(Joint::RHand) - torso).norm())
    })) / shoulder_width
        / 3.0)
        .clamp(0.0, 1.0);

    Ok(BodyFeatures {
        ke_hands,
        ke_head,
        ke_upper,
        symmetry,
        lean_angle,
        directness,
        impulsivity,
        fluidity,
        openness,
        sway: sway_amplitude(trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral(t: f64) -> SkeletonFrame {
        let mut f = SkeletonFrame::new(t, [Vec3::zeros(); 11]);
        f.set(Joint::Head, Vec3::new(0.0, 1.7, 0.0));
        f.set(Joint::Neck, Vec3::new(0.0, 1.5, 0.0));
        f.set(Joint::LShoulder, Vec3::new(0.2, 1.45, 0.0));
        f.set(Joint::RShoulder, Vec3::new(-0.2, 1.45, 0.0));
        f.set(Joint::LElbow, Vec3::new(0.25, 1.2, 0.0));
        f.set(Joint::RElbow, Vec3::new(-0.25, 1.2, 0.0));
        f.set(Joint::LHand, Vec3::new(0.25, 0.95, 0.1));
        f.set(Joint::RHand, Vec3::new(-0.25, 0.95, 0.1));
        f.set(Joint::Torso, Vec3::new(0.0, 1.2, 0.0));
        f.set(Joint::LHip, Vec3::new(0.1, 0.9, 0.0));
        f.set(Joint::RHip, Vec3::new(-0.1, 0.9, 0.0));
        f
    }

    #[test]
    fn static_trace_limits() {
        let trace: Vec<_> = (0..30).map(|i| neutral(i as f64 * 33.0)).collect();
        let f = extract_features(&trace).unwrap();
        assert_eq!((f.ke_hands, f.ke_head, f.ke_upper), (0.0, 0.0, 0.0));
        assert_eq!(f.impulsivity, 1.0);
        assert_eq!(f.directness, 1.0);
        assert_eq!(f.sway, 0.0);
        assert_eq!(f.fluidity, 1.0);
        assert_eq!(f.symmetry, 1.0);
        assert_eq!(f.lean_angle, 0.0);
    }

    #[test]
    fn too_short() {
        let two = vec![neutral(0.0), neutral(300.0)];
        assert!(matches!(extract_features(&two), Err(BodyError::TooFewFrames { .. })));
        let brief: Vec<_> = (0..5).map(|i| neutral(i as f64 * 10.0)).collect();
        assert!(matches!(extract_features(&brief), Err(BodyError::TooFewFrames { .. })));
        let back = vec![neutral(0.0), neutral(200.0), neutral(100.0)];
        assert!(matches!(extract_features(&back), Err(BodyError::NonMonotoneTimestamps { index: 2 })));
    }

    #[test]
    fn forward_lean_is_positive() {
        let trace: Vec<_> = (0..10)
            .map(|i| {
                let mut f = neutral(i as f64 * 40.0);
                f.set(Joint::Neck, Vec3::new(0.0, 1.5, 0.3));
                f
            })
            .collect();
        let lean = extract_features(&trace).unwrap().lean_angle;
        assert!((lean - (0.3f64).atan2(0.3)).abs() < 1e-12);
    }
}
