//! Dataset manifests, ground-truth tubes and prediction tubes.
//!
//! Boxes use half-open pixel coordinates `[min, max)`, so the area of a box
//! is `(x_max - x_min) * (y_max - y_min)` with no `+1` correction.
//!
//! Manifest JSON layout (field names are exact, unknown fields are rejected):
//!
//! ```json
//! {"dataset_id": "toy", "class_list": ["run"],
//!  "videos": [{"video_id": "v1", "width": 320, "height": 240, "frame_count": 3,
//!              "frame_source": "v1/%05d.png",
//!              "tubes": [{"tube_id": "t1", "class": "run",
//!                         "frames": {"0": [10, 10, 50, 90]}}]}]}
//! ```
//!
//! A prediction document has the same layout plus a `score` on every tube.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn from_array(coords: [f64; 4]) -> Self {
        Self::new(coords[0], coords[1], coords[2], coords[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Finite, non-negative and with positive extent on both axes.
    pub fn is_valid(&self) -> bool {
        let coords = self.to_array();
        coords.iter().all(|c| c.is_finite() && *c >= 0.0)
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn fits_in_frame(&self, width: u32, height: u32) -> bool {
        self.x_max <= f64::from(width) && self.y_max <= f64::from(height)
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }
}

/// Where in a document a validation problem was found.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Location {
    pub video_id: Option<String>,
    pub tube_id: Option<String>,
    pub frame_index: Option<u32>,
}

impl Location {
    fn video(video_id: &str) -> Self {
        Self {
            video_id: Some(video_id.to_string()),
            ..Self::default()
        }
    }

    fn tube(video_id: &str, tube_id: &str) -> Self {
        Self {
            video_id: Some(video_id.to_string()),
            tube_id: Some(tube_id.to_string()),
            frame_index: None,
        }
    }

    fn frame(video_id: &str, tube_id: &str, frame_index: u32) -> Self {
        Self {
            frame_index: Some(frame_index),
            ..Self::tube(video_id, tube_id)
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = &self.video_id {
            parts.push(format!("video {v}"));
        }
        if let Some(t) = &self.tube_id {
            parts.push(format!("tube {t}"));
        }
        if let Some(i) = self.frame_index {
            parts.push(format!("frame {i}"));
        }
        if parts.is_empty() {
            f.write_str("document")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed document: {0}")]
    Schema(String),
    #[error("invalid manifest at {location}: {reason}")]
    Validation { location: Location, reason: String },
    #[error("prediction references unknown video {0:?}")]
    UnknownVideo(String),
    #[error("tube {tube_id:?} in video {video_id:?} has unknown class {class:?}")]
    UnknownClass {
        video_id: String,
        tube_id: String,
        class: String,
    },
    #[error("tube {tube_id:?} in video {video_id:?} has score {score} outside [0, 1]")]
    ScoreOutOfRange {
        video_id: String,
        tube_id: String,
        score: f64,
    },
}

impl ModelError {
    fn invalid(location: Location, reason: impl Into<String>) -> Self {
        ModelError::Validation {
            location,
            reason: reason.into(),
        }
    }

    /// Short machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::Schema(_) => "SchemaError",
            ModelError::Validation { .. } => "ValidationError",
            ModelError::UnknownVideo(_) => "UnknownVideo",
            ModelError::UnknownClass { .. } => "UnknownClass",
            ModelError::ScoreOutOfRange { .. } => "ScoreOutOfRange",
        }
    }
}

/// A sequence of per-frame actor boxes carrying one action class.
///
/// Ground-truth tubes have no score; prediction tubes always do.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTube {
    tube_id: String,
    class_label: String,
    frames: BTreeMap<u32, BoundingBox>,
    score: Option<f64>,
}

impl ActionTube {
    fn build(
        tube_id: impl Into<String>,
        class_label: impl Into<String>,
        frames: impl IntoIterator<Item = (u32, BoundingBox)>,
        score: Option<f64>,
    ) -> Result<Self, ModelError> {
        let tube_id = tube_id.into();
        let mut map = BTreeMap::new();
        for (index, bbox) in frames {
            if !bbox.is_valid() {
                return Err(ModelError::invalid(
                    Location {
                        tube_id: Some(tube_id.clone()),
                        frame_index: Some(index),
                        ..Location::default()
                    },
                    format!("invalid box {:?}", bbox.to_array()),
                ));
            }
            if map.insert(index, bbox).is_some() {
                return Err(ModelError::invalid(
                    Location {
                        tube_id: Some(tube_id.clone()),
                        frame_index: Some(index),
                        ..Location::default()
                    },
                    "duplicate frame index",
                ));
            }
        }
        if map.is_empty() {
            return Err(ModelError::invalid(
                Location {
                    tube_id: Some(tube_id),
                    ..Location::default()
                },
                "tube has no frames",
            ));
        }
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(ModelError::ScoreOutOfRange {
                    video_id: String::new(),
                    tube_id,
                    score: s,
                });
            }
        }
        Ok(Self {
            tube_id,
            class_label: class_label.into(),
            frames: map,
            score,
        })
    }

    pub fn ground_truth(
        tube_id: impl Into<String>,
        class_label: impl Into<String>,
        frames: impl IntoIterator<Item = (u32, BoundingBox)>,
    ) -> Result<Self, ModelError> {
        Self::build(tube_id, class_label, frames, None)
    }

    pub fn prediction(
        tube_id: impl Into<String>,
        class_label: impl Into<String>,
        frames: impl IntoIterator<Item = (u32, BoundingBox)>,
        score: f64,
    ) -> Result<Self, ModelError> {
        Self::build(tube_id, class_label, frames, Some(score))
    }

    pub fn tube_id(&self) -> &str {
        &self.tube_id
    }

    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    pub fn frames(&self) -> &BTreeMap<u32, BoundingBox> {
        &self.frames
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn is_prediction(&self) -> bool {
        self.score.is_some()
    }

    pub fn first_frame(&self) -> u32 {
        *self.frames.keys().next().expect("tubes are non-empty")
    }

    pub fn last_frame(&self) -> u32 {
        *self.frames.keys().next_back().expect("tubes are non-empty")
    }

    /// Same boxes, relabelled as a prediction with the given score.
    pub fn with_score(&self, score: f64) -> Result<Self, ModelError> {
        Self::build(
            self.tube_id.clone(),
            self.class_label.clone(),
            self.frames.iter().map(|(i, b)| (*i, *b)),
            Some(score),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub frame_source: String,
    pub tubes: Vec<ActionTube>,
}

impl VideoRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 || self.height == 0 || self.frame_count == 0 {
            return Err(ModelError::invalid(
                Location::video(&self.video_id),
                "width, height and frame_count must be positive",
            ));
        }
        let mut ids = HashSet::new();
        for tube in &self.tubes {
            if !ids.insert(tube.tube_id()) {
                return Err(ModelError::invalid(
                    Location::tube(&self.video_id, tube.tube_id()),
                    "duplicate tube_id",
                ));
            }
            self.check_tube_extent(tube)?;
        }
        Ok(())
    }

    fn check_tube_extent(&self, tube: &ActionTube) -> Result<(), ModelError> {
        for (index, bbox) in tube.frames() {
            let at = || Location::frame(&self.video_id, tube.tube_id(), *index);
            if *index >= self.frame_count {
                return Err(ModelError::invalid(
                    at(),
                    format!("frame index beyond frame_count {}", self.frame_count),
                ));
            }
            if !bbox.fits_in_frame(self.width, self.height) {
                return Err(ModelError::invalid(
                    at(),
                    format!(
                        "box {:?} exceeds {}x{} frame",
                        bbox.to_array(),
                        self.width,
                        self.height
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Resolve the image path of one frame from the `frame_source` template.
    ///
    /// The template uses printf-style `%d` / `%0Nd` placeholders; indices
    /// are 0-based.
    pub fn frame_path(&self, index: u32) -> String {
        format_frame_template(&self.frame_source, index)
    }
}

fn format_frame_template(template: &str, index: u32) -> String {
    let mut out = String::with_capacity(template.len() + 8);
    let mut chars = template.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        if chars.peek() == Some(&'%') {
            chars.next();
            out.push('%');
            continue;
        }
        let mut spec = String::new();
        while let Some(d) = chars.peek().copied().filter(char::is_ascii_digit) {
            spec.push(d);
            chars.next();
        }
        if chars.peek() == Some(&'d') {
            chars.next();
            let width: usize = spec.parse().unwrap_or(0);
            if spec.starts_with('0') {
                out.push_str(&format!("{index:0width$}"));
            } else {
                out.push_str(&format!("{index:width$}"));
            }
        } else {
            out.push('%');
            out.push_str(&spec);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub class_list: Vec<String>,
    pub videos: Vec<VideoRecord>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), ModelError> {
        let classes: HashSet<&str> = self.class_list.iter().map(String::as_str).collect();
        let mut ids = HashSet::new();
        for video in &self.videos {
            if !ids.insert(video.video_id.as_str()) {
                return Err(ModelError::invalid(
                    Location::video(&video.video_id),
                    "duplicate video_id",
                ));
            }
            for tube in &video.tubes {
                if tube.is_prediction() {
                    return Err(ModelError::invalid(
                        Location::tube(&video.video_id, tube.tube_id()),
                        "ground-truth tubes must not carry a score",
                    ));
                }
                if !classes.contains(tube.class_label()) {
                    return Err(ModelError::invalid(
                        Location::tube(&video.video_id, tube.tube_id()),
                        format!("class {:?} not in class_list", tube.class_label()),
                    ));
                }
            }
            video.validate()?;
        }
        Ok(())
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn tube_count(&self) -> usize {
        self.videos.iter().map(|v| v.tubes.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let raw = RawDocument::from_videos(&self.dataset_id, &self.class_list, &self.videos);
        serde_json::to_string_pretty(&raw).expect("manifest serialization cannot fail")
    }
}

/// Prediction tubes keyed by video id.
pub type PredictionSet = BTreeMap<String, Vec<ActionTube>>;

/// Parse and validate a manifest document.
pub fn parse_manifest(document: &[u8]) -> Result<DatasetManifest, ModelError> {
    let raw: RawDocument =
        serde_json::from_slice(document).map_err(|e| ModelError::Schema(e.to_string()))?;
    let manifest = DatasetManifest {
        dataset_id: raw.dataset_id,
        class_list: raw.class_list,
        videos: raw
            .videos
            .into_iter()
            .map(RawVideo::into_record)
            .collect::<Result<_, _>>()?,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Parse a prediction document against a ground-truth manifest.
pub fn load_predictions(
    document: &[u8],
    manifest: &DatasetManifest,
) -> Result<PredictionSet, ModelError> {
    let raw: RawDocument =
        serde_json::from_slice(document).map_err(|e| ModelError::Schema(e.to_string()))?;
    let classes: HashSet<&str> = manifest.class_list.iter().map(String::as_str).collect();
    let mut grouped = PredictionSet::new();
    for raw_video in raw.videos {
        let Some(gt_video) = manifest.video(&raw_video.video_id) else {
            return Err(ModelError::UnknownVideo(raw_video.video_id));
        };
        if grouped.contains_key(&raw_video.video_id) {
            return Err(ModelError::invalid(
                Location::video(&raw_video.video_id),
                "video listed twice in predictions",
            ));
        }
        if (raw_video.width, raw_video.height, raw_video.frame_count)
            != (gt_video.width, gt_video.height, gt_video.frame_count)
        {
            return Err(ModelError::invalid(
                Location::video(&raw_video.video_id),
                "width/height/frame_count differ from the ground-truth manifest",
            ));
        }
        let video_id = raw_video.video_id.clone();
        let mut tubes = Vec::with_capacity(raw_video.tubes.len());
        for raw_tube in raw_video.tubes {
            let Some(score) = raw_tube.score else {
                return Err(ModelError::Schema(format!(
                    "prediction tube {:?} in video {video_id:?} has no score",
                    raw_tube.tube_id
                )));
            };
            if !(0.0..=1.0).contains(&score) {
                return Err(ModelError::ScoreOutOfRange {
                    video_id,
                    tube_id: raw_tube.tube_id,
                    score,
                });
            }
            if !classes.contains(raw_tube.class.as_str()) {
                return Err(ModelError::UnknownClass {
                    video_id,
                    tube_id: raw_tube.tube_id,
                    class: raw_tube.class,
                });
            }
            let tube = raw_tube.into_tube(&video_id)?;
            for index in tube.frames().keys() {
                if *index >= gt_video.frame_count {
                    return Err(ModelError::invalid(
                        Location::frame(&video_id, tube.tube_id(), *index),
                        "frame index beyond frame_count",
                    ));
                }
            }
            tubes.push(tube);
        }
        grouped.insert(video_id, tubes);
    }
    Ok(grouped)
}

/// Serialize predictions in the prediction-document layout, taking video
/// headers from `manifest`.
pub fn predictions_to_json(
    manifest: &DatasetManifest,
    predictions: &PredictionSet,
) -> Result<String, ModelError> {
    let mut videos = Vec::new();
    for (video_id, tubes) in predictions {
        let gt = manifest
            .video(video_id)
            .ok_or_else(|| ModelError::UnknownVideo(video_id.clone()))?;
        videos.push(VideoRecord {
            tubes: tubes.clone(),
            ..gt.clone()
        });
    }
    let raw = RawDocument::from_videos(&manifest.dataset_id, &manifest.class_list, &videos);
    Ok(serde_json::to_string_pretty(&raw).expect("prediction serialization cannot fail"))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    dataset_id: String,
    class_list: Vec<String>,
    videos: Vec<RawVideo>,
}

impl RawDocument {
    fn from_videos(dataset_id: &str, class_list: &[String], videos: &[VideoRecord]) -> Self {
        Self {
            dataset_id: dataset_id.to_string(),
            class_list: class_list.to_vec(),
            videos: videos
                .iter()
                .map(|v| RawVideo {
                    video_id: v.video_id.clone(),
                    width: v.width,
                    height: v.height,
                    frame_count: v.frame_count,
                    frame_source: v.frame_source.clone(),
                    tubes: v
                        .tubes
                        .iter()
                        .map(|t| RawTube {
                            tube_id: t.tube_id.clone(),
                            class: t.class_label.clone(),
                            score: t.score,
                            frames: t.frames.iter().map(|(i, b)| (*i, b.to_array())).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVideo {
    video_id: String,
    width: u32,
    height: u32,
    frame_count: u32,
    frame_source: String,
    tubes: Vec<RawTube>,
}

impl RawVideo {
    fn into_record(self) -> Result<VideoRecord, ModelError> {
        let video_id = self.video_id;
        let tubes = self
            .tubes
            .into_iter()
            .map(|t| t.into_tube(&video_id))
            .collect::<Result<_, _>>()?;
        Ok(VideoRecord {
            video_id,
            width: self.width,
            height: self.height,
            frame_count: self.frame_count,
            frame_source: self.frame_source,
            tubes,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTube {
    tube_id: String,
    class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    frames: BTreeMap<u32, [f64; 4]>,
}

impl RawTube {
    fn into_tube(self, video_id: &str) -> Result<ActionTube, ModelError> {
        ActionTube::build(
            self.tube_id,
            self.class,
            self.frames
                .into_iter()
                .map(|(i, c)| (i, BoundingBox::from_array(c))),
            self.score,
        )
        .map_err(|e| match e {
            ModelError::Validation {
                mut location,
                reason,
            } => {
                location.video_id = Some(video_id.to_string());
                ModelError::Validation { location, reason }
            }
            ModelError::ScoreOutOfRange { tube_id, score, .. } => ModelError::ScoreOutOfRange {
                video_id: video_id.to_string(),
                tube_id,
                score,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(videos: &str) -> String {
        format!(r#"{{"dataset_id":"toy","class_list":["run","jump"],"videos":[{videos}]}}"#)
    }

    const V1: &str = r#"{"video_id":"v1","width":40,"height":30,"frame_count":5,"frame_source":"v1/%05d.png",
        "tubes":[{"tube_id":"t1","class":"run","frames":{"0":[1,1,10,10],"1":[2,2,11,11],"2":[3,3,12,12]}}]}"#;

    #[test]
    fn minimal_manifest_parses() {
        let m = parse_manifest(doc(V1).as_bytes()).unwrap();
        assert_eq!(m.videos.len(), 1);
        assert_eq!(m.tube_count(), 1);
        assert_eq!(m.videos[0].tubes[0].frames().len(), 3);
    }

    #[test]
    fn box_beyond_width_is_located() {
        let bad = V1.replace("[3,3,12,12]", "[3,3,45,12]");
        let err = parse_manifest(doc(&bad).as_bytes()).unwrap_err();
        match err {
            ModelError::Validation { location, .. } => {
                assert_eq!(location.video_id.as_deref(), Some("v1"));
                assert_eq!(location.tube_id.as_deref(), Some("t1"));
                assert_eq!(location.frame_index, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_video_ids_rejected() {
        let err = parse_manifest(doc(&format!("{V1},{V1}")).as_bytes()).unwrap_err();
        assert!(matches!(err, ModelError::Validation { ref reason, .. } if reason.contains("duplicate video_id")));
    }

    #[test]
    fn unknown_fields_and_garbage_are_schema_errors() {
        let extra = doc(V1).replace(r#""dataset_id""#, r#""extra":1,"dataset_id""#);
        assert!(matches!(
            parse_manifest(extra.as_bytes()),
            Err(ModelError::Schema(_))
        ));
        assert!(matches!(parse_manifest(b"{"), Err(ModelError::Schema(_))));
        let bad_key = V1.replace(r#""0":"#, r#""zero":"#);
        assert!(matches!(
            parse_manifest(doc(&bad_key).as_bytes()),
            Err(ModelError::Schema(_))
        ));
    }

    #[test]
    fn gt_score_and_unknown_class_rejected() {
        let scored = V1.replace(r#""class":"run","#, r#""class":"run","score":0.5,"#);
        assert!(matches!(
            parse_manifest(doc(&scored).as_bytes()),
            Err(ModelError::Validation { .. })
        ));
        let unknown = V1.replace(r#""class":"run""#, r#""class":"swim""#);
        assert!(matches!(
            parse_manifest(doc(&unknown).as_bytes()),
            Err(ModelError::Validation { .. })
        ));
    }

    #[test]
    fn frame_index_beyond_count_rejected() {
        let bad = V1.replace(r#""2":[3,3,12,12]"#, r#""5":[3,3,12,12]"#);
        let err = parse_manifest(doc(&bad).as_bytes()).unwrap_err();
        assert!(
            matches!(err, ModelError::Validation { ref location, .. } if location.frame_index == Some(5))
        );
    }

    #[test]
    fn sparse_tubes_allowed() {
        let gap = V1.replace(r#""1":[2,2,11,11],"#, "");
        let m = parse_manifest(doc(&gap).as_bytes()).unwrap();
        let keys: Vec<u32> = m.videos[0].tubes[0].frames().keys().copied().collect();
        assert_eq!(keys, vec![0, 2]);
    }

    fn two_video_manifest() -> DatasetManifest {
        let v2 = V1.replace(r#""v1""#, r#""v2""#);
        parse_manifest(doc(&format!("{V1},{v2}")).as_bytes()).unwrap()
    }

    fn pred_video(id: &str, tubes: &[(&str, &str, f64)]) -> String {
        let tubes: Vec<String> = tubes
            .iter()
            .map(|(t, c, s)| {
                format!(r#"{{"tube_id":"{t}","class":"{c}","score":{s},"frames":{{"0":[1,1,10,10]}}}}"#)
            })
            .collect();
        format!(
            r#"{{"video_id":"{id}","width":40,"height":30,"frame_count":5,"frame_source":"x","tubes":[{}]}}"#,
            tubes.join(",")
        )
    }

    #[test]
    fn predictions_group_by_video() {
        let m = two_video_manifest();
        assert!(load_predictions(doc("").as_bytes(), &m).unwrap().is_empty());

        let body = format!(
            "{},{}",
            pred_video("v1", &[("p1", "run", 0.9), ("p2", "jump", 0.4)]),
            pred_video("v2", &[("p3", "run", 0.7)])
        );
        let grouped = load_predictions(doc(&body).as_bytes(), &m).unwrap();
        let mut sizes: Vec<usize> = grouped.values().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]);
        assert_eq!(grouped["v1"].len(), 2);
    }

    #[test]
    fn prediction_errors() {
        let m = two_video_manifest();
        let high = pred_video("v1", &[("p1", "run", 1.2)]);
        assert!(matches!(
            load_predictions(doc(&high).as_bytes(), &m),
            Err(ModelError::ScoreOutOfRange { score, .. }) if score == 1.2
        ));
        let unknown_video = pred_video("v9", &[("p1", "run", 0.5)]);
        assert!(matches!(
            load_predictions(doc(&unknown_video).as_bytes(), &m),
            Err(ModelError::UnknownVideo(_))
        ));
        let unknown_class = pred_video("v1", &[("p1", "swim", 0.5)]);
        assert!(matches!(
            load_predictions(doc(&unknown_class).as_bytes(), &m),
            Err(ModelError::UnknownClass { .. })
        ));
        let no_score = pred_video("v1", &[("p1", "run", 0.5)]).replace(r#""score":0.5,"#, "");
        assert!(matches!(
            load_predictions(doc(&no_score).as_bytes(), &m),
            Err(ModelError::Schema(_))
        ));
    }

    #[test]
    fn prediction_document_roundtrip() {
        let m = two_video_manifest();
        let mut preds = PredictionSet::new();
        for v in &m.videos {
            preds.insert(
                v.video_id.clone(),
                v.tubes.iter().map(|t| t.with_score(1.0).unwrap()).collect(),
            );
        }
        let json = predictions_to_json(&m, &preds).unwrap();
        assert_eq!(load_predictions(json.as_bytes(), &m).unwrap(), preds);
    }

    #[test]
    fn frame_template_formatting() {
        assert_eq!(format_frame_template("v/%05d.jpg", 7), "v/00007.jpg");
        assert_eq!(format_frame_template("f%d.png", 12), "f12.png");
        assert_eq!(format_frame_template("100%%/%3d", 4), "100%/  4");
        assert_eq!(format_frame_template("plain.png", 4), "plain.png");
    }
}
