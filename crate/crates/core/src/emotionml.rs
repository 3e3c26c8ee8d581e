//! EmotionML subset used as the bus payload.
//!
//! The emitted dialect:
//!
//! ```text
//! <emotionml xmlns="http://www.w3.org/2009/10/emotionml" version="1.0" dimension-set="#av-dimensions">
//!   <vocabulary type="dimension" id="av-dimensions"><item name="arousal"/><item name="valence"/></vocabulary>
//!   <emotion expressed-through="voice">
//!     <category name="happy"/>
//!     <dimension name="arousal" value="0.75" confidence="0.9"/>
//!     <dimension name="valence" value="0.25" confidence="0.9"/>
//!     <info timestamp-ms="1200"/>
//!   </emotion>
//! </emotionml>
//! ```
//!
//! Dimension values travel on the unit interval; [`to_internal`] and
//! [`from_internal`] are the only place the mapping to the signed
//! arousal/valence plane lives. Unknown elements and attributes are skipped.

use std::fmt;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EMOTIONML_NS: &str = "http://www.w3.org/2009/10/emotionml";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmotionMlError {
    #[error("malformed EmotionML document: {0}")]
    MalformedDocument(String),
    #[error("emotion element {index} lacks the {dimension} dimension")]
    MissingDimension { index: usize, dimension: &'static str },
    #[error("value {value} of {field} is outside [0, 1]")]
    ValueOutOfRange { field: String, value: String },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
}

pub type Result<T, E = EmotionMlError> = std::result::Result<T, E>;

/// Channel an annotation was expressed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Face,
    Voice,
    Body,
    Fused,
}

impl Modality {
    /// Token(s) used in the `expressed-through` attribute.
    pub fn wire_name(self) -> &'static str {
        match self {
            Modality::Face => "face",
            Modality::Voice => "voice",
            Modality::Body => "gesture",
            Modality::Fused => "face voice gesture",
        }
    }

    fn from_wire(value: &str) -> Option<Modality> {
        let tokens: Vec<&str> = value.split_whitespace().collect();
        match tokens.as_slice() {
            ["face"] => Some(Modality::Face),
            ["voice"] => Some(Modality::Voice),
            ["gesture"] | ["body"] => Some(Modality::Body),
            ["fused"] => Some(Modality::Fused),
            many if many.len() > 1
                && many.iter().all(|t| matches!(*t, "face" | "voice" | "gesture" | "body")) =>
            {
                Some(Modality::Fused)
            }
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Face => "face",
            Modality::Voice => "voice",
            Modality::Body => "body",
            Modality::Fused => "fused",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "face" => Ok(Modality::Face),
            "voice" => Ok(Modality::Voice),
            "body" | "gesture" => Ok(Modality::Body),
            "fused" => Ok(Modality::Fused),
            other => Err(format!("unknown modality `{other}`")),
        }
    }
}

/// A point in the signed arousal/valence plane, both coordinates in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AVPoint {
    pub arousal: f64,
    pub valence: f64,
}

impl AVPoint {
    pub const NEUTRAL: AVPoint = AVPoint { arousal: 0.0, valence: 0.0 };

    pub fn new(arousal: f64, valence: f64) -> Self {
        AVPoint { arousal, valence }
    }

    /// Builds a point after clamping both coordinates into [-1, 1].
    pub fn clamped(arousal: f64, valence: f64) -> Self {
        AVPoint { arousal: arousal.clamp(-1.0, 1.0), valence: valence.clamp(-1.0, 1.0) }
    }

    pub fn is_valid(&self) -> bool {
        [self.arousal, self.valence].iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v))
    }

    pub fn distance(&self, other: &AVPoint) -> f64 {
        (self.arousal - other.arousal).hypot(self.valence - other.valence)
    }

    pub fn scale(&self, factor: f64) -> AVPoint {
        AVPoint { arousal: self.arousal * factor, valence: self.valence * factor }
    }
}

/// One `<emotion>` element. Dimension values are on the wire scale [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionAnnotation {
    pub modality: Modality,
    pub arousal: f64,
    pub valence: f64,
    pub category: Option<String>,
    pub confidence: Option<f64>,
    pub timestamp_ms: u64,
}

fn in_unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

impl EmotionAnnotation {
    pub fn new(modality: Modality, arousal: f64, valence: f64, timestamp_ms: u64) -> Self {
        EmotionAnnotation { modality, arousal, valence, category: None, confidence: None, timestamp_ms }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("arousal", self.arousal), ("valence", self.valence)] {
            if !in_unit(v) {
                return Err(EmotionMlError::InvalidAnnotation(format!("{name} {v} outside [0, 1]")));
            }
        }
        if let Some(c) = self.confidence {
            if !in_unit(c) {
                return Err(EmotionMlError::InvalidAnnotation(format!("confidence {c} outside [0, 1]")));
            }
        }
        if let Some(cat) = &self.category {
            if cat.trim().is_empty() || cat.trim() != cat || cat.chars().any(char::is_control) {
                return Err(EmotionMlError::InvalidAnnotation(format!("bad category name {cat:?}")));
            }
        }
        Ok(())
    }
}

/// Wire [0, 1] to internal [-1, 1]: `2·wire − 1`.
pub fn to_internal(a: &EmotionAnnotation) -> AVPoint {
    AVPoint { arousal: 2.0 * a.arousal - 1.0, valence: 2.0 * a.valence - 1.0 }
}

/// Internal [-1, 1] to wire [0, 1]: `(internal + 1) / 2`.
pub fn from_internal(
    p: AVPoint,
    modality: Modality,
    category: Option<String>,
    timestamp_ms: u64,
) -> EmotionAnnotation {
    let wire = |v: f64| ((v.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0);
    EmotionAnnotation {
        modality,
        arousal: wire(p.arousal),
        valence: wire(p.valence),
        category,
        confidence: None,
        timestamp_ms,
    }
}

/// Serializes a non-empty annotation list into an EmotionML document.
pub fn serialize_emotionml(annotations: &[EmotionAnnotation]) -> Result<String> {
    if annotations.is_empty() {
        return Err(EmotionMlError::InvalidAnnotation("no annotations".into()));
    }
    let mut last_ts: Vec<(Modality, u64)> = Vec::new();
    for a in annotations {
        a.validate()?;
        match last_ts.iter_mut().find(|(m, _)| *m == a.modality) {
            Some((_, ts)) if *ts > a.timestamp_ms => {
                return Err(EmotionMlError::InvalidAnnotation(format!(
                    "{} timestamps go backwards ({} after {})",
                    a.modality, a.timestamp_ms, ts
                )))
            }
            Some((_, ts)) => *ts = a.timestamp_ms,
            None => last_ts.push((a.modality, a.timestamp_ms)),
        }
    }

    let mut out = String::with_capacity(256 + 256 * annotations.len());
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<emotionml xmlns=\"{EMOTIONML_NS}\" version=\"1.0\" dimension-set=\"#av-dimensions\">\n"
    ));
    out.push_str(
        "  <vocabulary type=\"dimension\" id=\"av-dimensions\"><item name=\"arousal\"/><item name=\"valence\"/></vocabulary>\n",
    );
    for a in annotations {
        out.push_str(&format!("  <emotion expressed-through=\"{}\">\n", a.modality.wire_name()));
        if let Some(cat) = &a.category {
            out.push_str(&format!("    <category name=\"{}\"/>\n", escape(cat.as_str())));
        }
        let confidence = a.confidence.map(|c| format!(" confidence=\"{c}\"")).unwrap_or_default();
        out.push_str(&format!("    <dimension name=\"arousal\" value=\"{}\"{confidence}/>\n", a.arousal));
        out.push_str(&format!("    <dimension name=\"valence\" value=\"{}\"{confidence}/>\n", a.valence));
        out.push_str(&format!("    <info timestamp-ms=\"{}\"/>\n", a.timestamp_ms));
        out.push_str("  </emotion>\n");
    }
    out.push_str("</emotionml>\n");
    Ok(out)
}

/// Like [`parse_emotionml`] but accepts arbitrary bytes.
pub fn parse_emotionml_bytes(bytes: &[u8]) -> Result<Vec<EmotionAnnotation>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| EmotionMlError::MalformedDocument(format!("not UTF-8: {e}")))?;
    parse_emotionml(text)
}

#[derive(Default)]
struct PartialEmotion {
    modality: Option<Modality>,
    arousal: Option<(f64, Option<f64>)>,
    valence: Option<(f64, Option<f64>)>,
    category: Option<String>,
    timestamp_ms: Option<u64>,
}

fn malformed(msg: impl fmt::Display) -> EmotionMlError {
    EmotionMlError::MalformedDocument(msg.to_string())
}

fn attrs(e: &BytesStart<'_>) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(malformed)?;
        let key = std::str::from_utf8(attr.key.local_name().as_ref().as_bytes())
            .map_err(malformed)?
            .to_string();
        let value = attr.normalized_value(XmlVersion::Implicit1_0).map_err(malformed)?.into_owned();
        out.push((key, value));
    }
    Ok(out)
}

fn attr<'a>(attrs: &'a [(String, String)], name: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

fn parse_unit(field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| malformed(format!("{field} value {raw:?} is not a number")))?;
    if !in_unit(v) {
        return Err(EmotionMlError::ValueOutOfRange { field: field.to_string(), value: raw.to_string() });
    }
    Ok(v)
}

fn local(e: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(e.local_name().as_ref().as_bytes()).into_owned()
}

/// Parses an EmotionML document into annotations, one per `<emotion>`, in
/// document order.
pub fn parse_emotionml(text: &str) -> Result<Vec<EmotionAnnotation>> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<String> = Vec::new();
    let mut saw_root = false;
    let mut current: Option<PartialEmotion> = None;
    let mut done: Vec<EmotionAnnotation> = Vec::new();

    loop {
        let event = reader.read_event().map_err(malformed)?;
        let (start, is_empty) = match event {
            Event::Start(e) => (Some(e), false),
            Event::Empty(e) => (Some(e), true),
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref().as_bytes()).into_owned();
                match stack.pop() {
                    Some(open) if open == name => {}
                    _ => return Err(malformed(format!("unexpected closing tag </{name}>"))),
                }
                if name == "emotion" && stack.len() == 1 {
                    let p = current.take().ok_or_else(|| malformed("dangling </emotion>"))?;
                    done.push(finish(p, done.len())?);
                }
                continue;
            }
            Event::Eof => break,
            Event::Text(t) => {
                if stack.is_empty() && !AsRef::<str>::as_ref(&t).chars().all(char::is_whitespace) {
                    return Err(malformed("text outside the root element"));
                }
                continue;
            }
            Event::CData(_) | Event::GeneralRef(_) if stack.is_empty() => {
                return Err(malformed("content outside the root element"));
            }
            _ => continue,
        };
        let e = start.expect("start event");
        let name = local(&e);

        if stack.is_empty() {
            if saw_root {
                return Err(malformed("multiple root elements"));
            }
            if name != "emotionml" {
                return Err(malformed(format!("root element is <{name}>, expected <emotionml>")));
            }
            saw_root = true;
        } else if stack.len() == 1 && name == "emotion" {
            let a = attrs(&e)?;
            let modality = match attr(&a, "expressed-through") {
                Some(v) => Some(
                    Modality::from_wire(v)
                        .ok_or_else(|| malformed(format!("unknown expressed-through {v:?}")))?,
                ),
                None => None,
            };
            current = Some(PartialEmotion { modality, ..Default::default() });
        } else if stack.len() == 2 && stack[1] == "emotion" {
            let p = current.as_mut().expect("inside emotion");
            let a = attrs(&e)?;
            match name.as_str() {
                "dimension" => {
                    let dim = attr(&a, "name").unwrap_or_default().to_string();
                    let slot = match dim.as_str() {
                        "arousal" => Some(&mut p.arousal),
                        "valence" => Some(&mut p.valence),
                        _ => None,
                    };
                    if let Some(slot @ None) = slot {
                        let raw = attr(&a, "value")
                            .ok_or_else(|| malformed(format!("dimension {dim} has no value")))?;
                        let value = parse_unit(&dim, raw)?;
                        let confidence = attr(&a, "confidence")
                            .map(|c| parse_unit("confidence", c))
                            .transpose()?;
                        *slot = Some((value, confidence));
                    }
                }
                "category" => {
                    if p.category.is_none() {
                        let cat = attr(&a, "name")
                            .ok_or_else(|| malformed("category without name"))?
                            .trim();
                        if cat.is_empty() || cat.chars().any(char::is_control) {
                            return Err(malformed(format!("bad category name {cat:?}")));
                        }
                        p.category = Some(cat.to_string());
                    }
                }
                "info" => {
                    if let Some(ts) = attr(&a, "timestamp-ms") {
                        let ts = ts
                            .trim()
                            .parse::<u64>()
                            .map_err(|_| malformed(format!("timestamp-ms {ts:?} is not a non-negative integer")))?;
                        p.timestamp_ms = Some(ts);
                    }
                }
                _ => {}
            }
        }

        if !is_empty {
            stack.push(name);
        } else if stack.len() == 1 && local(&e) == "emotion" {
            let p = current.take().expect("just opened");
            done.push(finish(p, done.len())?);
        }
    }

    if !stack.is_empty() {
        return Err(malformed(format!("unclosed element <{}>", stack.last().unwrap())));
    }
    if !saw_root {
        return Err(malformed("no root element"));
    }
    if done.is_empty() {
        return Err(malformed("document contains no emotion elements"));
    }
    Ok(done)
}

fn finish(p: PartialEmotion, index: usize) -> Result<EmotionAnnotation> {
    let modality = p.modality.ok_or_else(|| malformed(format!("emotion {index} lacks expressed-through")))?;
    let (arousal, conf_a) =
        p.arousal.ok_or(EmotionMlError::MissingDimension { index, dimension: "arousal" })?;
    let (valence, conf_v) =
        p.valence.ok_or(EmotionMlError::MissingDimension { index, dimension: "valence" })?;
    Ok(EmotionAnnotation {
        modality,
        arousal,
        valence,
        category: p.category,
        confidence: conf_a.or(conf_v),
        timestamp_ms: p.timestamp_ms.unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> String {
        format!("<emotionml xmlns=\"{EMOTIONML_NS}\">{body}</emotionml>")
    }

    #[test]
    fn reads_single_voice_emotion() {
        let d = doc(r#"<emotion expressed-through="voice"><dimension name="arousal" value="0.75"/><dimension name="valence" value="0.25"/></emotion>"#);
        let got = parse_emotionml(&d).unwrap();
        assert_eq!(got, vec![EmotionAnnotation::new(Modality::Voice, 0.75, 0.25, 0)]);
    }

    #[test]
    fn rejects_out_of_range_value() {
        let d = doc(r#"<emotion expressed-through="face"><dimension name="arousal" value="1.3"/><dimension name="valence" value="0.5"/></emotion>"#);
        assert!(matches!(parse_emotionml(&d), Err(EmotionMlError::ValueOutOfRange { .. })));
    }

    #[test]
    fn rejects_missing_valence() {
        let d = doc(r#"<emotion expressed-through="face"><dimension name="arousal" value="0.3"/></emotion>"#);
        assert_eq!(
            parse_emotionml(&d),
            Err(EmotionMlError::MissingDimension { index: 0, dimension: "valence" })
        );
    }

    #[test]
    fn ignores_unknown_markup() {
        let d = doc(r#"<meta foo="1"/><emotion expressed-through="gesture" extra="x"><appraisal name="novelty" value="0.9"/><dimension name="potency" value="7"/><dimension name="arousal" value="0.1"/><dimension name="valence" value="0.9"><trace freq="1Hz"/></dimension><info timestamp-ms="42" note="n"><more/></info></emotion>"#);
        let got = parse_emotionml(&d).unwrap();
        assert_eq!(got[0].modality, Modality::Body);
        assert_eq!(got[0].timestamp_ms, 42);
        assert_eq!((got[0].arousal, got[0].valence), (0.1, 0.9));
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "",
            "<emotionml>",
            "<other/>",
            "<emotionml></emotionml>",
            "<emotionml><emotion expressed-through=\"voice\"></emotionml>",
            "<emotionml/><emotionml/>",
        ] {
            assert!(matches!(parse_emotionml(bad), Err(EmotionMlError::MalformedDocument(_))), "{bad}");
        }
        assert!(matches!(parse_emotionml_bytes(&[0xff, 0xfe]), Err(EmotionMlError::MalformedDocument(_))));
    }

    #[test]
    fn serialize_shapes() {
        let one = EmotionAnnotation::new(Modality::Face, 0.5, 0.5, 0);
        let text = serialize_emotionml(std::slice::from_ref(&one)).unwrap();
        assert_eq!(text.matches("<emotion ").count(), 1);
        assert_eq!(text.matches("<dimension ").count(), 2);
        assert!(text.contains("<item name=\"arousal\"/>"));

        assert!(matches!(serialize_emotionml(&[]), Err(EmotionMlError::InvalidAnnotation(_))));

        let two = vec![
            EmotionAnnotation::new(Modality::Face, 0.1, 0.2, 5).with_category("sad"),
            EmotionAnnotation::new(Modality::Voice, 0.9, 0.8, 1).with_confidence(0.4),
        ];
        let back = parse_emotionml(&serialize_emotionml(&two).unwrap()).unwrap();
        assert_eq!(back, two);
    }

    #[test]
    fn serialize_rejects_invalid() {
        let bad = EmotionAnnotation::new(Modality::Face, 1.5, 0.5, 0);
        assert!(serialize_emotionml(&[bad]).is_err());
        let backwards = vec![
            EmotionAnnotation::new(Modality::Face, 0.5, 0.5, 10),
            EmotionAnnotation::new(Modality::Face, 0.5, 0.5, 9),
        ];
        assert!(serialize_emotionml(&backwards).is_err());
    }

    #[test]
    fn category_is_escaped() {
        let a = EmotionAnnotation::new(Modality::Fused, 0.5, 0.5, 3).with_category("a<b & \"c\"");
        let back = parse_emotionml(&serialize_emotionml(std::slice::from_ref(&a)).unwrap()).unwrap();
        assert_eq!(back[0], a);
    }

    #[test]
    fn scale_adapter() {
        let mid = EmotionAnnotation::new(Modality::Voice, 0.5, 0.5, 0);
        assert_eq!(to_internal(&mid), AVPoint::new(0.0, 0.0));
        let ends = EmotionAnnotation::new(Modality::Voice, 1.0, 0.0, 0);
        assert_eq!(to_internal(&ends), AVPoint::new(1.0, -1.0));
        let w = from_internal(AVPoint::new(0.0, 0.0), Modality::Voice, None, 0);
        assert_eq!((w.arousal, w.valence), (0.5, 0.5));
        let w = from_internal(AVPoint::new(-1.0, -1.0), Modality::Voice, None, 0);
        assert_eq!((w.arousal, w.valence), (0.0, 0.0));
    }
}
