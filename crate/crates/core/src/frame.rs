//! Detection frames: face/hand boxes with the sparse depth samples that fall
//! inside them, and the line-delimited JSON format they travel in.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Face,
    Hand,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Face => "face",
            Label::Hand => "hand",
        })
    }
}

/// Pixel location plus depth along the optical axis (meters).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthSample {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl DepthSample {
    pub const fn new(u: f64, v: f64, z: f64) -> Self {
        Self { u, v, z }
    }

    pub fn is_valid(&self) -> bool {
        self.z > 0.0 && self.z.is_finite() && self.u.is_finite() && self.v.is_finite()
    }
}

/// Axis-aligned detection box in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub label: Label,
    pub confidence: f64,
}

impl BoundingBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64, label: Label, confidence: f64) -> Result<Self> {
        let b = Self { u_min, v_min, u_max, v_max, label, confidence };
        b.validate()?;
        Ok(b)
    }

    pub fn from_center(cu: f64, cv: f64, width: f64, height: f64, label: Label, confidence: f64) -> Result<Self> {
        Self::new(cu - width / 2.0, cv - height / 2.0, cu + width / 2.0, cv + height / 2.0, label, confidence)
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.u_min, self.v_min, self.u_max, self.v_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBoundingBox(format!("non-finite coordinates {coords:?}")));
        }
        if !(self.u_min < self.u_max && self.v_min < self.v_max) {
            return Err(Error::InvalidBoundingBox(format!("empty extent {coords:?}")));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidBoundingBox(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    /// Clips the box to `[0, width] x [0, height]`. Returns `None` when
    /// nothing of the box remains inside the image.
    pub fn clamped(&self, width: u32, height: u32) -> Option<Self> {
        let (w, h) = (f64::from(width), f64::from(height));
        let b = Self {
            u_min: self.u_min.clamp(0.0, w),
            v_min: self.v_min.clamp(0.0, h),
            u_max: self.u_max.clamp(0.0, w),
            v_max: self.v_max.clamp(0.0, h),
            ..*self
        };
        (b.u_min < b.u_max && b.v_min < b.v_max).then_some(b)
    }
}

/// Depth samples belonging to one face or hand region.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiPointSet {
    pub label: Label,
    pub samples: Vec<DepthSample>,
    pub source_bbox: BoundingBox,
}

impl RoiPointSet {
    pub fn new(source_bbox: BoundingBox, samples: Vec<DepthSample>) -> Self {
        Self { label: source_bbox.label, samples, source_bbox }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every sample is valid and lies inside the source box.
    pub fn validate(&self) -> Result<()> {
        self.source_bbox.validate()?;
        for s in &self.samples {
            if !s.is_valid() {
                return Err(Error::InvalidSample(s.z));
            }
            if !self.source_bbox.contains(s.u, s.v) {
                return Err(Error::MalformedFrame(format!(
                    "{} sample ({}, {}) lies outside its box",
                    self.label, s.u, s.v
                )));
            }
        }
        Ok(())
    }

    /// Same samples re-homed in another box; samples falling outside are dropped.
    pub fn with_bbox(&self, bbox: BoundingBox) -> Self {
        let samples = self.samples.iter().copied().filter(|s| bbox.contains(s.u, s.v)).collect();
        Self { label: self.label, samples, source_bbox: bbox }
    }
}

/// One timestamped set of detections: the pipeline's input unit.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionFrame {
    pub timestamp: f64,
    pub face: Option<RoiPointSet>,
    pub hands: Vec<RoiPointSet>,
}

impl DetectionFrame {
    pub fn empty(timestamp: f64) -> Self {
        Self { timestamp, face: None, hands: Vec::new() }
    }

    pub fn sample_count(&self) -> usize {
        self.face.iter().chain(&self.hands).map(RoiPointSet::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() {
            return Err(Error::MalformedFrame(format!("non-finite timestamp {}", self.timestamp)));
        }
        if let Some(face) = &self.face {
            if face.label != Label::Face {
                return Err(Error::MalformedFrame("face slot holds a hand ROI".into()));
            }
            face.validate()?;
        }
        for hand in &self.hands {
            if hand.label != Label::Hand {
                return Err(Error::MalformedFrame("hands list holds a face ROI".into()));
            }
            hand.validate()?;
        }
        Ok(())
    }

    /// Parses and validates one line of the frame log.
    pub fn from_json_line(line: &str) -> Result<Self> {
        let record: FrameRecord = serde_json::from_str(line).map_err(|e| Error::MalformedFrame(e.to_string()))?;
        let frame = record.into_frame()?;
        frame.validate()?;
        Ok(frame)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&FrameRecord::from(self)).expect("frame serializes")
    }
}

/// Wire form of an ROI: `{bbox:[u0,v0,u1,v1], conf, samples:[[u,v,z],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiRecord {
    pub bbox: [f64; 4],
    pub conf: f64,
    pub samples: Vec<[f64; 3]>,
}

/// Wire form of a frame: `{t, face: RoiRecord|null, hands: [RoiRecord]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub t: f64,
    pub face: Option<RoiRecord>,
    pub hands: Vec<RoiRecord>,
}

impl RoiRecord {
    fn into_roi(self, label: Label) -> Result<RoiPointSet> {
        let [u0, v0, u1, v1] = self.bbox;
        let bbox = BoundingBox::new(u0, v0, u1, v1, label, self.conf)?;
        let samples = self.samples.into_iter().map(|[u, v, z]| DepthSample::new(u, v, z)).collect();
        Ok(RoiPointSet::new(bbox, samples))
    }
}

impl From<&RoiPointSet> for RoiRecord {
    fn from(roi: &RoiPointSet) -> Self {
        let b = &roi.source_bbox;
        Self {
            bbox: [b.u_min, b.v_min, b.u_max, b.v_max],
            conf: b.confidence,
            samples: roi.samples.iter().map(|s| [s.u, s.v, s.z]).collect(),
        }
    }
}

impl FrameRecord {
    pub fn into_frame(self) -> Result<DetectionFrame> {
        Ok(DetectionFrame {
            timestamp: self.t,
            face: self.face.map(|f| f.into_roi(Label::Face)).transpose()?,
            hands: self.hands.into_iter().map(|h| h.into_roi(Label::Hand)).collect::<Result<_>>()?,
        })
    }
}

impl From<&DetectionFrame> for FrameRecord {
    fn from(frame: &DetectionFrame) -> Self {
        Self {
            t: frame.timestamp,
            face: frame.face.as_ref().map(RoiRecord::from),
            hands: frame.hands.iter().map(RoiRecord::from).collect(),
        }
    }
}

/// Enforces strictly increasing timestamps over a frame stream.
#[derive(Debug, Default, Clone)]
pub struct StreamValidator {
    last: Option<f64>,
}

impl StreamValidator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts the frame if its timestamp follows the last accepted one.
    /// A rejected frame does not advance the stream.
    pub fn accept(&mut self, frame: &DetectionFrame) -> Result<()> {
        if let Some(previous) = self.last {
            if frame.timestamp.partial_cmp(&previous) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::NonMonotonicTimestamp { previous, current: frame.timestamp });
            }
        }
        self.last = Some(frame.timestamp);
        Ok(())
    }
}
