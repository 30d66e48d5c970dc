//! Manifest-driven orchestration: load every frame, run the analyzers,
//! geolocate and write the damage map.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::barriers::{assess_barriers, BarrierParams};
use crate::error::{Error, Result};
use crate::geotag::{geolocate, load_track, FrameClock, GpsTrack};
use crate::marking::{analyze_marking, MarkingParams};
use crate::raster::{ensure_same_dims, load_class_mask, load_image, save_gray, ClassMask, GrayImage};
use crate::report::{to_geojson, to_unlocated_json, Finding, FindingKind, RoadDamage};
use crate::signs::{classify_sign, load_detections, DetectionBox, ReferenceLibrary, SignParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub frame_id: u64,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections_path: Option<PathBuf>,
}

/// Mask class ids (`marking`, `pole`, `barrier`) and detector class ids
/// (`sign`, `road_damage`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassMap {
    pub marking: Vec<u8>,
    pub pole: Option<u8>,
    pub barrier: Vec<u8>,
    pub sign: Vec<u32>,
    pub road_damage: BTreeMap<RoadDamage, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// `marking_classes` is taken from the class map.
    pub marking: MarkingParams,
    /// `barrier_classes` is taken from the class map.
    pub barrier: BarrierParams,
    pub signs: SignParams,
    /// Use the detection box area as the extent of box-based findings.
    pub extent_from_box: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            marking: MarkingParams::default(),
            barrier: BarrierParams::default(),
            signs: SignParams::default(),
            extent_from_box: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub frames: Vec<FrameEntry>,
    pub class_map: ClassMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_path: Option<PathBuf>,
    pub clock: FrameClock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_library_path: Option<PathBuf>,
    #[serde(default)]
    pub params: PipelineParams,
}

impl SceneManifest {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ManifestInvalid(e.to_string()))
    }

    /// Parse the manifest and resolve relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ManifestInvalid(format!("{}: {e}", path.display())))?;
        let mut m = Self::parse(&text)?;
        m.resolve(path.parent().unwrap_or(Path::new("")));
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for f in &mut self.frames {
            fix(&mut f.image_path);
            fix(&mut f.mask_path);
            if let Some(d) = &mut f.detections_path {
                fix(d);
            }
        }
        if let Some(t) = &mut self.track_path {
            fix(t);
        }
        if let Some(r) = &mut self.reference_library_path {
            fix(r);
        }
    }

    /// Parameters with class ids filled in from the class map.
    pub fn effective_params(&self) -> PipelineParams {
        let mut p = self.params.clone();
        p.marking.marking_classes = self.class_map.marking.clone();
        p.barrier.barrier_classes = self.class_map.barrier.clone();
        p
    }

    /// Everything wrong with the manifest, one message per problem.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for f in &self.frames {
            if !seen.insert(f.frame_id) {
                out.push(format!("duplicate frame_id {}", f.frame_id));
            }
            let mut files = vec![&f.image_path, &f.mask_path];
            files.extend(&f.detections_path);
            for p in files {
                if !p.is_file() {
                    out.push(format!("frame {}: missing file {}", f.frame_id, p.display()));
                }
            }
        }
        if let Some(t) = &self.track_path {
            if !t.is_file() {
                out.push(format!("missing track file {}", t.display()));
            }
        }
        if let Some(r) = &self.reference_library_path {
            if !r.is_dir() {
                out.push(format!("missing reference library directory {}", r.display()));
            }
        }
        let cm = &self.class_map;
        if cm.marking.is_empty() {
            out.push("class_map.marking is empty".to_owned());
        }
        if cm.barrier.is_empty() {
            out.push("class_map.barrier is empty".to_owned());
        }
        if cm.pole.is_none() {
            out.push("class_map.pole is missing".to_owned());
        }
        if cm.sign.is_empty() {
            out.push("class_map.sign is empty".to_owned());
        }
        let mut detector_ids: BTreeSet<u32> = cm.sign.iter().copied().collect();
        for ids in cm.road_damage.values() {
            for &id in ids {
                if !detector_ids.insert(id) {
                    out.push(format!("class_map: detector class {id} is mapped twice"));
                }
            }
        }
        let p = &self.params;
        out.extend(p.marking.problems());
        out.extend(p.barrier.problems());
        out.extend(p.signs.problems());
        out.extend(self.clock.problems());
        out
    }
}

/// Problems with the manifest at `path`; empty when it is valid.
pub fn validate(path: impl AsRef<Path>) -> Vec<String> {
    match SceneManifest::load(path) {
        Ok(m) => m.problems(),
        Err(e) => vec![e.to_string()],
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output: PathBuf,
    pub debug_dir: Option<PathBuf>,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames_processed: usize,
    pub frames_failed: usize,
    pub counts: BTreeMap<String, usize>,
    pub unlocated: usize,
    pub diagnostics: Vec<String>,
}

impl RunSummary {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Immutable inputs shared by all frame workers.
pub struct Analyzers {
    pub class_map: ClassMap,
    pub params: PipelineParams,
    pub library: ReferenceLibrary,
    pub debug_dir: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct FrameOutcome {
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<String>,
    pub failed: bool,
}

fn box_detail(d: &DetectionBox) -> serde_json::Value {
    json!([d.x, d.y, d.w, d.h])
}

impl Analyzers {
    fn box_finding(&self, d: &DetectionBox, kind: FindingKind) -> Finding {
        let mut f = Finding::new(d.frame_id, kind)
            .with_score(d.score)
            .with_detail("class_id", d.class_id)
            .with_detail("bbox", box_detail(d));
        if self.params.extent_from_box {
            f = f.with_extent(d.area());
        }
        f
    }

    /// Analyze one decoded frame. Failures of individual analyzers become
    /// diagnostics.
    pub fn analyze(
        &self,
        frame_id: u64,
        gray: &GrayImage,
        mask: &ClassMask,
        detections: &[DetectionBox],
    ) -> Result<FrameOutcome> {
        ensure_same_dims(gray.dims(), mask.dims())?;
        let mut out = FrameOutcome::default();
        let cm = &self.class_map;
        let p = &self.params;

        for d in detections {
            if let Some((&kind, _)) = cm.road_damage.iter().find(|(_, ids)| ids.contains(&d.class_id)) {
                out.findings.push(self.box_finding(d, FindingKind::RoadDamage(kind)));
            }
        }

        match analyze_marking(gray, mask, &p.marking) {
            Ok(trace) => {
                for r in &trace.regions {
                    out.findings.push(
                        Finding::new(frame_id, FindingKind::MarkingDamage)
                            .with_extent(r.area as f64)
                            .with_score(r.mean_density)
                            .with_detail("mean_density", r.mean_density)
                            .with_detail("superpixels", r.superpixels.len())
                            .with_detail("bbox", json!([r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1])),
                    );
                }
                if let Some(dir) = &self.debug_dir {
                    for (name, m) in [("refined", &trace.refined), ("hot", &trace.hot), ("flagged", &trace.flagged)] {
                        save_gray(dir.join(format!("frame_{frame_id}_{name}.pgm")), &m.to_gray())?;
                    }
                }
            }
            Err(e) => out.diagnostics.push(format!("frame {frame_id}: marking analysis failed: {e}")),
        }

        if let Some(pole) = cm.pole {
            for d in detections.iter().filter(|d| cm.sign.contains(&d.class_id)) {
                match classify_sign(d, gray, mask, pole, &self.library, &p.signs) {
                    Ok(c) => {
                        for note in &c.notes {
                            out.diagnostics.push(format!("frame {frame_id}: sign class {}: {note}", d.class_id));
                        }
                        if c.status.is_damaged() {
                            let s = c.similarity.expect("damaged implies a similarity");
                            out.findings.push(
                                self.box_finding(d, FindingKind::SignDamaged)
                                    .with_detail("similarity", s)
                                    .with_detail("sim_threshold", p.signs.sim_threshold),
                            );
                        }
                        if c.status.is_skewed() {
                            let t = c.skew_deg.expect("skewed implies an angle");
                            out.findings.push(
                                self.box_finding(d, FindingKind::SignSkewed)
                                    .with_detail("theta_deg", t)
                                    .with_detail("skew_threshold", p.signs.skew_threshold),
                            );
                        }
                    }
                    Err(e) => out
                        .diagnostics
                        .push(format!("frame {frame_id}: sign class {} skipped: {e}", d.class_id)),
                }
            }
        }

        let (barriers, dropped) = assess_barriers(mask, gray.width(), &p.barrier);
        if dropped > 0 {
            out.diagnostics
                .push(format!("frame {frame_id}: {dropped} barrier contour(s) dropped with a degenerate hull"));
        }
        for b in barriers.iter().filter(|b| !b.safe) {
            out.findings.push(
                Finding::new(frame_id, FindingKind::BarrierUnsafe)
                    .with_extent(b.area)
                    .with_detail("solidity", b.solidity)
                    .with_detail("side", serde_json::to_value(b.side).expect("side serializes"))
                    .with_detail("threshold", p.barrier.threshold(b.side))
                    .with_detail("bbox", json!([b.bbox.x0, b.bbox.y0, b.bbox.x1, b.bbox.y1])),
            );
        }
        Ok(out)
    }

    fn process(&self, entry: &FrameEntry) -> FrameOutcome {
        let id = entry.frame_id;
        let loaded = (|| {
            let gray = load_image(&entry.image_path)?.into_gray();
            let mask = load_class_mask(&entry.mask_path)?;
            let mut dets = match &entry.detections_path {
                Some(p) => load_detections(p)?,
                None => Vec::new(),
            };
            dets.retain(|d| d.frame_id == id);
            self.analyze(id, &gray, &mask, &dets)
        })();
        loaded.unwrap_or_else(|e| FrameOutcome {
            findings: Vec::new(),
            diagnostics: vec![format!("frame {id}: skipped: {e}")],
            failed: true,
        })
    }
}

/// Run the whole manifest and write the report to `opts.output`.
///
/// Invalid manifests, unreadable tracks and reference libraries are
/// `ManifestInvalid`; a bad frame only adds a diagnostic. Errors writing
/// outputs are returned as `Io`.
pub fn run(manifest_path: impl AsRef<Path>, opts: &RunOptions) -> Result<RunSummary> {
    let manifest = SceneManifest::load(manifest_path)?;
    let problems = manifest.problems();
    if !problems.is_empty() {
        return Err(Error::ManifestInvalid(problems.join("; ")));
    }
    let invalid = |what: &str, e: Error| Error::ManifestInvalid(format!("{what}: {e}"));
    let track: Option<GpsTrack> = match &manifest.track_path {
        Some(p) => Some(load_track(p).map_err(|e| invalid("track", e))?),
        None => None,
    };
    let library = match &manifest.reference_library_path {
        Some(p) => ReferenceLibrary::load(p).map_err(|e| invalid("reference library", e))?,
        None => ReferenceLibrary::new(),
    };
    if let Some(dir) = &opts.debug_dir {
        fs::create_dir_all(dir)?;
    }
    let analyzers = Analyzers {
        class_map: manifest.class_map.clone(),
        params: manifest.effective_params(),
        library,
        debug_dir: opts.debug_dir.clone(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let outcomes: Vec<FrameOutcome> =
        pool.install(|| manifest.frames.par_iter().map(|f| analyzers.process(f)).collect());

    let mut summary = RunSummary::default();
    let mut findings = Vec::new();
    let mut order: Vec<(u64, FrameOutcome)> = manifest
        .frames
        .iter()
        .map(|f| f.frame_id)
        .zip(outcomes)
        .collect();
    order.sort_by_key(|(id, _)| *id);
    for (_, o) in order {
        if o.failed {
            summary.frames_failed += 1;
        } else {
            summary.frames_processed += 1;
        }
        summary.diagnostics.extend(o.diagnostics);
        findings.extend(o.findings);
    }
    for f in &findings {
        *summary.counts.entry(f.kind.name().to_owned()).or_default() += 1;
    }

    let geo = match &track {
        Some(t) => geolocate(findings, t, &manifest.clock),
        None => {
            summary.unlocated = findings.len();
            fs::write(unlocated_path(&opts.output), to_unlocated_json(&findings))?;
            Vec::new()
        }
    };
    fs::write(&opts.output, to_geojson(&geo))?;
    Ok(summary)
}

/// `<dir>/<stem>.unlocated.json` beside the GeoJSON output.
pub fn unlocated_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".to_owned());
    output.with_file_name(format!("{stem}.unlocated.json"))
}
