//! Analyzer services: each subscribes to its control queue, analyzes the
//! media it is pointed at and publishes EmotionML on the results topic.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use log::{info, warn};

use super::media::MediaServer;
use super::{SessionConfig, SessionError};
use crate::body::{classify, extract_features, longest_gesture, parse_trace_csv, EmotionCentroidModel, SegmentConfig};
use crate::emotionml::{from_internal, serialize_emotionml, EmotionAnnotation};
use crate::face::{fill_pose_variation, parse_feature_csv, FacePredictor, LinearAVModel};
use crate::platform::control::{
    HDR_COMMAND_ID, HDR_DETAIL, HDR_FEEDBACK, HDR_KIND, HDR_MEDIA_PATH, HDR_STATE, HDR_SUBSYSTEM, HDR_TARGET,
    HDR_TURN_ID, HDR_T_MS, KIND_RESULT, KIND_STATUS,
};
use crate::platform::{ControlCommand, ServiceState, Subsystem, Vocabulary};
use crate::stomp::{Client, Command, Destination, Frame};
use crate::voice::{compare_to_prototype, estimate_emotion, read_wav_bytes, summarize, PrototypeLibrary};

/// Media servers bind here; the bus address comes from the configuration.
pub const MEDIA_HOST: &str = "127.0.0.1";

const POLL: Duration = Duration::from_millis(200);

/// One analyzer with its loaded model.
pub enum Analyzer {
    Voice { library: PrototypeLibrary },
    Body { model: EmotionCentroidModel, segment: SegmentConfig, vocabulary: Vocabulary },
    Face { model: LinearAVModel, vocabulary: Vocabulary },
}

/// Result of analyzing one media file.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub annotations: Vec<EmotionAnnotation>,
    pub feedback: Option<serde_json::Value>,
    pub content_type: &'static str,
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a std::path::Path, SessionError> {
    p.as_deref().ok_or_else(|| SessionError::Config(format!("`{key}` is not set")))
}

impl Analyzer {
    pub fn load(subsystem: Subsystem, cfg: &SessionConfig) -> Result<Analyzer, SessionError> {
        Ok(match subsystem {
            Subsystem::Voice => {
                let dir = required(&cfg.voice_prototypes, "voice.prototypes")?;
                Analyzer::Voice { library: PrototypeLibrary::load(dir, |l| cfg.vocabulary.point(l))? }
            }
            Subsystem::Body => Analyzer::Body {
                model: EmotionCentroidModel::load(required(&cfg.body_model, "body.model")?)?,
                segment: cfg.segment,
                vocabulary: cfg.vocabulary.clone(),
            },
            Subsystem::Face => Analyzer::Face {
                model: LinearAVModel::load(required(&cfg.face_model, "face.model")?)?,
                vocabulary: cfg.vocabulary.clone(),
            },
        })
    }

    /// Analyzes raw media bytes. `target` selects the prototype the voice
    /// feedback compares against; `t_ms` stamps the annotations.
    pub fn analyze(&self, bytes: &[u8], target: Option<&str>, t_ms: u64) -> Result<Analysis, SessionError> {
        match self {
            Analyzer::Voice { library } => {
                let params = summarize(&read_wav_bytes(bytes)?)?;
                let estimate = estimate_emotion(&params, &library.entries)?;
                let feedback = target
                    .and_then(|t| library.get(t))
                    .map(|proto| serde_json::to_value(compare_to_prototype(&params, proto)))
                    .transpose()
                    .map_err(|e| SessionError::Media(e.to_string()))?;
                let confidence = 1.0 - estimate.distance.min(1.0);
                let ann = from_internal(estimate.av, crate::emotionml::Modality::Voice, Some(estimate.label), t_ms)
                    .with_confidence(confidence);
                Ok(Analysis { annotations: vec![ann], feedback, content_type: "audio/wav" })
            }
            Analyzer::Body { model, segment, vocabulary } => {
                let trace = parse_trace_csv(bytes)?;
                let gesture = longest_gesture(&trace, segment)?;
                let c = classify(&extract_features(&gesture)?, model, vocabulary)?;
                let ann = from_internal(c.av, crate::emotionml::Modality::Body, Some(c.platform_label), t_ms)
                    .with_confidence(c.confidence);
                Ok(Analysis { annotations: vec![ann], feedback: None, content_type: "text/csv" })
            }
            Analyzer::Face { model, vocabulary } => {
                let mut frames = parse_feature_csv(bytes)?;
                if frames.is_empty() {
                    return Err(SessionError::Media("feature stream has no frames".into()));
                }
                fill_pose_variation(&mut frames);
                let first = frames[0].timestamp_ms;
                let mut predictor = FacePredictor::new(model);
                let annotations = frames
                    .iter()
                    .map(|f| {
                        let p = predictor.predict(f)?;
                        let ts = t_ms + (f.timestamp_ms - first).round() as u64;
                        Ok(from_internal(p, crate::emotionml::Modality::Face, Some(vocabulary.nearest(&p).to_string()), ts))
                    })
                    .collect::<Result<Vec<_>, SessionError>>()?;
                Ok(Analysis { annotations, feedback: None, content_type: "text/csv" })
            }
        }
    }
}

struct Service<'a> {
    subsystem: Subsystem,
    analyzer: Analyzer,
    client: Client,
    media: &'a MediaServer,
    state: ServiceState,
}

impl Service<'_> {
    fn status(&mut self, command_id: Option<&str>, detail: Option<&str>) -> Result<(), SessionError> {
        let mut headers = vec![(HDR_KIND, KIND_STATUS), (HDR_SUBSYSTEM, self.subsystem.as_str()), (HDR_STATE, self.state.as_str())];
        if let Some(id) = command_id {
            headers.push((HDR_COMMAND_ID, id));
        }
        if let Some(d) = detail {
            headers.push((HDR_DETAIL, d));
        }
        self.client.send(&Destination::results(), b"", &headers)?;
        Ok(())
    }

    fn process(&mut self, frame: &Frame, path: &str) -> Result<(), SessionError> {
        let bytes = std::fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{path}: {e}")))?;
        let t_ms = frame.get(HDR_T_MS).and_then(|v| v.parse().ok()).unwrap_or(0);
        let analysis = self.analyzer.analyze(&bytes, frame.get(HDR_TARGET), t_ms)?;
        let doc = serialize_emotionml(&analysis.annotations).map_err(crate::platform::PlatformError::from)?;
        let feedback = analysis.feedback.map(|f| f.to_string());
        let mut headers = vec![(HDR_KIND, KIND_RESULT), (HDR_SUBSYSTEM, self.subsystem.as_str())];
        if let Some(turn) = frame.get(HDR_TURN_ID) {
            headers.push((HDR_TURN_ID, turn));
        }
        if let Some(f) = &feedback {
            headers.push((HDR_FEEDBACK, f));
        }
        self.media.set_latest(bytes, analysis.content_type);
        self.client.send(&Destination::results(), doc.as_bytes(), &headers)?;
        Ok(())
    }

    fn handle(&mut self, frame: &Frame) -> Result<(), SessionError> {
        let id = frame.get(HDR_COMMAND_ID);
        let cmd: ControlCommand = match frame.body_text().parse() {
            Ok(c) => c,
            Err(e) => return self.status(id, Some(&e.to_string())),
        };
        self.state = self.state.apply(cmd);
        let wants_analysis = cmd == ControlCommand::Analyze || (cmd == ControlCommand::Start && frame.get(HDR_MEDIA_PATH).is_some());
        let detail = match (wants_analysis, frame.get(HDR_MEDIA_PATH)) {
            (false, _) => None,
            (true, None) => Some("no media-path header".to_string()),
            (true, Some(_)) if self.state != ServiceState::Running => Some("service is not running".to_string()),
            (true, Some(path)) => self.process(frame, path).err().map(|e| {
                warn!("{} analysis of {path} failed: {e}", self.subsystem);
                e.to_string()
            }),
        };
        self.status(id, detail.as_deref())
    }
}

/// Runs one analyzer service until a shutdown command arrives or `stop` is
/// set.
pub fn run_service(subsystem: Subsystem, cfg: &SessionConfig, stop: &AtomicBool) -> Result<(), SessionError> {
    let analyzer = Analyzer::load(subsystem, cfg)?;
    let media = MediaServer::start(MEDIA_HOST, cfg.media_port(subsystem))?;
    let addr = cfg.broker_addr();
    let mut client =
        Client::connect(addr.as_str()).map_err(|e| SessionError::BrokerUnreachable { addr: addr.clone(), reason: e.to_string() })?;
    client.subscribe(&subsystem.control_queue(), "control")?;
    info!("{subsystem} service on {addr}, media at http://{}", media.addr());
    let mut service = Service { subsystem, analyzer, client, media: &media, state: ServiceState::Idle };
    while !stop.load(Ordering::SeqCst) {
        let Some(frame) = service.client.recv(POLL)? else { continue };
        if frame.command != Command::Message {
            continue;
        }
        service.handle(&frame)?;
        if service.state == ServiceState::Exiting {
            break;
        }
    }
    let _ = service.client.disconnect();
    media.stop();
    Ok(())
}
