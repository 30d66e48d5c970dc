//! Findings, the GeoJSON damage map and the detection / segmentation
//! metrics used to score upstream models.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, ClassMask, ClassSet};
use crate::signs::DetectionBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadDamage {
    Alligator,
    Transverse,
    Longitudinal,
    MissingMarking,
    Pothole,
}

impl RoadDamage {
    pub const ALL: [RoadDamage; 5] = [
        RoadDamage::Alligator,
        RoadDamage::Transverse,
        RoadDamage::Longitudinal,
        RoadDamage::MissingMarking,
        RoadDamage::Pothole,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoadDamage::Alligator => "alligator",
            RoadDamage::Transverse => "transverse",
            RoadDamage::Longitudinal => "longitudinal",
            RoadDamage::MissingMarking => "missing_marking",
            RoadDamage::Pothole => "pothole",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingKind {
    RoadDamage(RoadDamage),
    MarkingDamage,
    SignDamaged,
    SignSkewed,
    BarrierUnsafe,
}

impl FindingKind {
    pub fn name(self) -> &'static str {
        match self {
            FindingKind::RoadDamage(_) => "road_damage",
            FindingKind::MarkingDamage => "marking_damage",
            FindingKind::SignDamaged => "sign_damaged",
            FindingKind::SignSkewed => "sign_skewed",
            FindingKind::BarrierUnsafe => "barrier_unsafe",
        }
    }

    /// Detail keys every finding of this kind carries.
    pub fn required_detail(self) -> &'static [&'static str] {
        match self {
            FindingKind::BarrierUnsafe => &["solidity"],
            FindingKind::SignSkewed => &["theta_deg"],
            FindingKind::SignDamaged => &["similarity"],
            _ => &[],
        }
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FindingKind::RoadDamage(d) => write!(f, "road_damage:{}", d.name()),
            k => f.write_str(k.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub frame_id: u64,
    pub kind: FindingKind,
    /// Square pixels.
    pub extent: Option<f64>,
    pub score: Option<f64>,
    pub detail: BTreeMap<String, Value>,
}

impl Finding {
    pub fn new(frame_id: u64, kind: FindingKind) -> Self {
        Self {
            frame_id,
            kind,
            extent: None,
            score: None,
            detail: BTreeMap::new(),
        }
    }

    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = Some(extent);
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.detail.insert(key.to_owned(), value.into());
        self
    }

    /// Flat property map: detail first, then the fixed keys.
    pub fn properties(&self) -> Map<String, Value> {
        let mut props: Map<String, Value> = self
            .detail
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        props.insert("kind".into(), self.kind.name().into());
        if let FindingKind::RoadDamage(d) = self.kind {
            props.insert("damage_type".into(), d.name().into());
        }
        props.insert("frame_id".into(), self.frame_id.into());
        props.insert("extent".into(), json!(self.extent));
        props.insert("score".into(), json!(self.score));
        props
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoFinding {
    pub finding: Finding,
    pub lat: f64,
    pub lon: f64,
}

fn sort_key(f: &Finding) -> (u64, FindingKind) {
    (f.frame_id, f.kind)
}

/// FeatureCollection of Point features, sorted by frame then kind (stable).
pub fn to_geojson(findings: &[GeoFinding]) -> String {
    let mut sorted: Vec<&GeoFinding> = findings.iter().collect();
    sorted.sort_by_key(|g| sort_key(&g.finding));
    let features: Vec<Value> = sorted
        .into_iter()
        .map(|g| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [g.lon, g.lat]},
                "properties": Value::Object(g.finding.properties()),
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    text
}

/// Findings that could not be placed on the map, as a JSON document.
pub fn to_unlocated_json(findings: &[Finding]) -> String {
    let mut sorted: Vec<&Finding> = findings.iter().collect();
    sorted.sort_by_key(|f| sort_key(f));
    let items: Vec<Value> = sorted.into_iter().map(|f| Value::Object(f.properties())).collect();
    let mut text =
        serde_json::to_string_pretty(&json!({"unlocated": items})).expect("json values serialize");
    text.push('\n');
    text
}

/// Structural check of a GeoJSON FeatureCollection of Point features.
/// Returns one message per problem.
pub fn validate_geojson(doc: &Value) -> Vec<String> {
    let mut problems = Vec::new();
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        problems.push("root type is not FeatureCollection".to_owned());
    }
    let Some(features) = doc.get("features").and_then(Value::as_array) else {
        problems.push("features is not an array".to_owned());
        return problems;
    };
    for (i, f) in features.iter().enumerate() {
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            problems.push(format!("feature {i}: type is not Feature"));
        }
        if !f.get("properties").is_some_and(|p| p.is_object() || p.is_null()) {
            problems.push(format!("feature {i}: properties missing"));
        }
        let Some(geom) = f.get("geometry") else {
            problems.push(format!("feature {i}: geometry missing"));
            continue;
        };
        if geom.get("type").and_then(Value::as_str) != Some("Point") {
            problems.push(format!("feature {i}: geometry is not a Point"));
        }
        match geom.get("coordinates").and_then(Value::as_array) {
            Some(c) if c.len() == 2 && c.iter().all(Value::is_number) => {
                let lon = c[0].as_f64().unwrap_or(f64::NAN);
                let lat = c[1].as_f64().unwrap_or(f64::NAN);
                if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                    problems.push(format!("feature {i}: coordinates out of range"));
                }
            }
            _ => problems.push(format!("feature {i}: coordinates are not a [lon, lat] pair")),
        }
    }
    problems
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult {
    pub per_class: BTreeMap<u32, f64>,
    pub mean_ap: f64,
}

/// Area under the precision envelope of a ranked match list.
pub fn average_precision(matches: &[bool], n_truth: usize) -> f64 {
    if n_truth == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(matches.len());
    for (i, &m) in matches.iter().enumerate() {
        tp += m as usize;
        points.push((tp as f64 / n_truth as f64, tp as f64 / (i + 1) as f64));
    }
    // envelope: precision at recall r is the best precision at recall ≥ r
    for i in (0..points.len().saturating_sub(1)).rev() {
        points[i].1 = points[i].1.max(points[i + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in points {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap
}

/// Per-class AP over all frames and their mean over classes that have
/// ground truth. Predictions match the unmatched truth box of the same
/// frame and class with the highest IoU, if that IoU reaches the threshold.
pub fn detection_map(
    preds: &[DetectionBox],
    truth: &[DetectionBox],
    iou_threshold: f64,
) -> Result<MapResult> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::BadIouThreshold(iou_threshold));
    }
    let mut classes: BTreeMap<u32, usize> = BTreeMap::new();
    for t in truth {
        *classes.entry(t.class_id).or_default() += 1;
    }
    if classes.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    let mut per_class = BTreeMap::new();
    for (&class, &n_truth) in &classes {
        let gts: Vec<&DetectionBox> = truth.iter().filter(|t| t.class_id == class).collect();
        let mut used = vec![false; gts.len()];
        let mut ranked: Vec<&DetectionBox> = preds.iter().filter(|p| p.class_id == class).collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
        let matches: Vec<bool> = ranked
            .iter()
            .map(|p| {
                let best = gts
                    .iter()
                    .enumerate()
                    .filter(|(i, g)| !used[*i] && g.frame_id == p.frame_id)
                    .map(|(i, g)| (i, p.iou(g)))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match best {
                    Some((i, iou)) if iou >= iou_threshold => {
                        used[i] = true;
                        true
                    }
                    _ => false,
                }
            })
            .collect();
        per_class.insert(class, average_precision(&matches, n_truth));
    }
    let mean_ap = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(MapResult { per_class, mean_ap })
}

/// Mean over `classes` of per-class IoU; classes absent from both masks
/// are skipped.
pub fn mask_miou(pred: &ClassMask, truth: &ClassMask, classes: &ClassSet) -> Result<f64> {
    ensure_same_dims(pred.dims(), truth.dims())?;
    let mut ious = Vec::new();
    for c in classes.iter() {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
            let (a, b) = (p == c, t == c);
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union > 0 {
            ious.push(inter as f64 / union as f64);
        }
    }
    if ious.is_empty() {
        return Err(Error::NoClasses);
    }
    Ok(ious.iter().sum::<f64>() / ious.len() as f64)
}
