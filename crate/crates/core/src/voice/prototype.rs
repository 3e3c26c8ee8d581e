use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_wav, summarize, VoiceError, VoiceParams, BAND_COUNT};
use crate::emotionml::AVPoint;
use crate::keyvalue::{join_vector, KeyValues};

/// Parameters shown on the gauges, with the fixed scale each distance is
/// divided by.
pub const COMPARED_PARAMS: [(&str, f64); 5] = [
    ("mean_rms", 0.1),
    ("f0_mean_hz", 100.0),
    ("f0_std_hz", 50.0),
    ("f0_onset_len_ms", 200.0),
    ("voiced_ratio", 0.5),
];

fn compared_values(p: &VoiceParams) -> [f64; 5] {
    [p.mean_rms, p.f0_mean_hz, p.f0_std_hz, p.f0_onset_len_ms, p.voiced_ratio]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Light {
    Green,
    Yellow,
    Red,
}

impl Light {
    /// Green up to 0.25, yellow up to 0.5, red beyond; upper bounds closed.
    pub fn from_distance(d: f64) -> Light {
        if d <= 0.25 {
            Light::Green
        } else if d <= 0.5 {
            Light::Yellow
        } else {
            Light::Red
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFeedback {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub distance: f64,
    pub light: Light,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficFeedback {
    pub params: Vec<ParamFeedback>,
    pub overall_distance: f64,
    pub overall_light: Light,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeEntry {
    pub label: String,
    pub params: VoiceParams,
    pub av: AVPoint,
    pub clip_path: PathBuf,
}

/// Per-parameter `|x − r| / s` and their mean.
pub fn compare_to_prototype(p: &VoiceParams, reference: &PrototypeEntry) -> TrafficFeedback {
    let (x, r) = (compared_values(p), compared_values(&reference.params));
    let params: Vec<ParamFeedback> = COMPARED_PARAMS
        .iter()
        .zip(x.iter().zip(r.iter()))
        .map(|(&(name, scale), (&value, &refv))| {
            let distance = (value - refv).abs() / scale;
            ParamFeedback { name: name.to_string(), value, reference: refv, distance, light: Light::from_distance(distance) }
        })
        .collect();
    let overall_distance = params.iter().map(|f| f.distance).sum::<f64>() / params.len() as f64;
    TrafficFeedback { params, overall_distance, overall_light: Light::from_distance(overall_distance) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceEstimate {
    pub label: String,
    pub av: AVPoint,
    pub distance: f64,
}

/// Nearest prototype by overall distance; ties go to the smallest label.
/// The returned point is the prototype's canonical point pulled toward the
/// origin by `min(D, 1)`.
pub fn estimate_emotion(p: &VoiceParams, library: &[PrototypeEntry]) -> Result<VoiceEstimate, VoiceError> {
    let (entry, distance) = library
        .iter()
        .map(|e| (e, compare_to_prototype(p, e).overall_distance))
        .min_by(|(a, da), (b, db)| da.total_cmp(db).then_with(|| a.label.cmp(&b.label)))
        .ok_or(VoiceError::EmptyLibrary)?;
    Ok(VoiceEstimate { label: entry.label.clone(), av: entry.av.scale(1.0 - distance.min(1.0)), distance })
}

pub(crate) fn params_to_keyvalues(p: &VoiceParams) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("mean_rms", p.mean_rms);
    kv.set("band_energies", join_vector(&p.band_energies));
    kv.set("f0_mean_hz", p.f0_mean_hz);
    kv.set("f0_std_hz", p.f0_std_hz);
    kv.set("f0_onset_len_ms", p.f0_onset_len_ms);
    kv.set("voiced_ratio", p.voiced_ratio);
    kv
}

pub(crate) fn params_from_keyvalues(kv: &KeyValues) -> Result<VoiceParams, VoiceError> {
    let bands = kv.vector("band_energies")?;
    let band_energies: [f64; BAND_COUNT] = bands
        .as_slice()
        .try_into()
        .map_err(|_| VoiceError::InvalidClip(format!("band_energies needs {BAND_COUNT} values, got {}", bands.len())))?;
    Ok(VoiceParams {
        mean_rms: kv.required("mean_rms")?,
        band_energies,
        f0_mean_hz: kv.required("f0_mean_hz")?,
        f0_std_hz: kv.required("f0_std_hz")?,
        f0_onset_len_ms: kv.required("f0_onset_len_ms")?,
        voiced_ratio: kv.required("voiced_ratio")?,
    })
}

/// Prototype utterances on disk: one directory per emotion holding
/// `reference.wav` and a `params` sidecar.
#[derive(Debug, Clone, Default)]
pub struct PrototypeLibrary {
    pub entries: Vec<PrototypeEntry>,
}

pub const REFERENCE_WAV: &str = "reference.wav";
pub const PARAMS_FILE: &str = "params";

impl PrototypeLibrary {
    pub fn get(&self, label: &str) -> Option<&PrototypeEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn push(&mut self, entry: PrototypeEntry) -> Result<(), VoiceError> {
        if self.get(&entry.label).is_some() {
            return Err(VoiceError::DuplicateLabel(entry.label));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Loads every emotion directory under `dir`. A missing `params` sidecar
    /// is recomputed from `reference.wav`. The sidecar may carry `arousal` and
    /// `valence`; otherwise `canonical` supplies the point.
    pub fn load(dir: &Path, canonical: impl Fn(&str) -> Option<AVPoint>) -> Result<Self, VoiceError> {
        let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir() && p.join(REFERENCE_WAV).exists())
            .collect();
        dirs.sort();
        let mut lib = PrototypeLibrary::default();
        for d in dirs {
            let label = d.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let clip_path = d.join(REFERENCE_WAV);
            let sidecar = d.join(PARAMS_FILE);
            let (params, kv) = if sidecar.exists() {
                let kv = KeyValues::load(&sidecar)?;
                (params_from_keyvalues(&kv)?, Some(kv))
            } else {
                (summarize(&read_wav(&clip_path)?)?, None)
            };
            let explicit = match &kv {
                Some(kv) => match (kv.parsed::<f64>("arousal")?, kv.parsed::<f64>("valence")?) {
                    (Some(a), Some(v)) => Some(AVPoint::new(a, v)),
                    _ => None,
                },
                None => None,
            };
            let av = explicit
                .or_else(|| canonical(&label))
                .filter(AVPoint::is_valid)
                .ok_or_else(|| VoiceError::UnknownEmotion(label.clone()))?;
            lib.push(PrototypeEntry { label, params, av, clip_path })?;
        }
        if lib.entries.is_empty() {
            return Err(VoiceError::EmptyLibrary);
        }
        Ok(lib)
    }

    /// Writes the `params` sidecar for an entry next to its reference clip.
    pub fn write_sidecar(entry: &PrototypeEntry) -> Result<(), VoiceError> {
        let dir = entry.clip_path.parent().ok_or_else(|| VoiceError::InvalidClip("clip path has no parent".into()))?;
        let mut kv = params_to_keyvalues(&entry.params);
        kv.set("arousal", entry.av.arousal);
        kv.set("valence", entry.av.valence);
        fs::write(dir.join(PARAMS_FILE), kv.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rms: f64, f0: f64, std: f64, onset: f64, voiced: f64) -> VoiceParams {
        VoiceParams {
            mean_rms: rms,
            band_energies: [0.0; BAND_COUNT],
            f0_mean_hz: f0,
            f0_std_hz: std,
            f0_onset_len_ms: onset,
            voiced_ratio: voiced,
        }
    }

    fn entry(label: &str, p: VoiceParams, av: AVPoint) -> PrototypeEntry {
        PrototypeEntry { label: label.into(), params: p, av, clip_path: PathBuf::new() }
    }

    #[test]
    fn self_comparison_all_green() {
        let e = entry("happy", params(0.2, 250.0, 30.0, 400.0, 0.8), AVPoint::new(0.5, 0.6));
        let fb = compare_to_prototype(&e.params, &e);
        assert!(fb.params.iter().all(|p| p.distance == 0.0 && p.light == Light::Green));
        assert_eq!(fb.overall_light, Light::Green);
    }

    #[test]
    fn one_scale_unit_is_red() {
        let e = entry("happy", params(0.2, 250.0, 30.0, 400.0, 0.8), AVPoint::new(0.5, 0.6));
        let fb = compare_to_prototype(&params(0.2, 350.0, 30.0, 400.0, 0.8), &e);
        assert_eq!(fb.params[1].distance, 1.0);
        assert_eq!(fb.params[1].light, Light::Red);
        assert!(fb.params.iter().enumerate().all(|(i, p)| i == 1 || p.light == Light::Green));
    }

    #[test]
    fn mean_distance_arithmetic() {
        // d = (0.2, 0.4, 0, 0, 0): rms off by 0.02, f0 off by 40 Hz
        let e = entry("x", params(0.1, 200.0, 10.0, 100.0, 0.5), AVPoint::new(0.1, 0.1));
        let fb = compare_to_prototype(&params(0.12, 240.0, 10.0, 100.0, 0.5), &e);
        assert!((fb.params[0].distance - 0.2).abs() < 1e-12);
        assert!((fb.params[1].distance - 0.4).abs() < 1e-12);
        assert!((fb.overall_distance - 0.12).abs() < 1e-12);
        assert_eq!(fb.overall_light, Light::Green);
    }

    #[test]
    fn light_boundaries() {
        assert_eq!(Light::from_distance(0.0), Light::Green);
        assert_eq!(Light::from_distance(0.25), Light::Green);
        assert_eq!(Light::from_distance(0.250_000_001), Light::Yellow);
        assert_eq!(Light::from_distance(0.5), Light::Yellow);
        assert_eq!(Light::from_distance(0.500_000_001), Light::Red);
    }

    #[test]
    fn estimate_cases() {
        let happy = entry("happy", params(0.3, 260.0, 40.0, 500.0, 0.9), AVPoint::new(0.5, 0.6));
        let sad = entry("sad", params(0.05, 150.0, 5.0, 200.0, 0.6), AVPoint::new(-0.5, -0.6));
        let lib = vec![sad.clone(), happy.clone()];
        let est = estimate_emotion(&happy.params, &lib).unwrap();
        assert_eq!((est.label.as_str(), est.av, est.distance), ("happy", happy.av, 0.0));

        let far = params(0.9, 590.0, 200.0, 3000.0, 0.0);
        let only = estimate_emotion(&far, std::slice::from_ref(&sad)).unwrap();
        assert_eq!(only.label, "sad");
        assert_eq!(only.av, AVPoint::new(-0.0, -0.0));

        assert!(matches!(estimate_emotion(&far, &[]), Err(VoiceError::EmptyLibrary)));
    }

    #[test]
    fn ties_go_to_smallest_label() {
        let p = params(0.1, 200.0, 10.0, 100.0, 0.5);
        let lib = vec![entry("zeta", p.clone(), AVPoint::new(0.1, 0.1)), entry("alpha", p.clone(), AVPoint::new(0.2, 0.2))];
        assert_eq!(estimate_emotion(&p, &lib).unwrap().label, "alpha");
    }

    #[test]
    fn sidecar_round_trip() {
        let p = params(0.123, 201.5, 12.25, 130.0, 0.75);
        let back = params_from_keyvalues(&KeyValues::parse(&params_to_keyvalues(&p).to_text()).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
