//! GPS track ingestion and per-frame position lookup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{Finding, GeoFinding};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
}

/// Fixes with strictly increasing timestamps; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsTrack {
    fixes: Vec<GpsFix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameClock {
    pub fps: f64,
    #[serde(default)]
    pub t0: f64,
}

impl FrameClock {
    pub fn time_of(&self, frame_id: u64) -> f64 {
        self.t0 + frame_id as f64 / self.fps
    }

    pub fn problems(&self) -> Vec<String> {
        if self.fps > 0.0 && self.fps.is_finite() && self.t0.is_finite() {
            Vec::new()
        } else {
            vec![format!(
                "clock.fps must be positive and t0 finite, got fps {} t0 {}",
                self.fps, self.t0
            )]
        }
    }
}

fn check_fix(row: usize, fix: &GpsFix) -> Result<()> {
    if !fix.t.is_finite() {
        return Err(Error::MalformedRow {
            row,
            reason: format!("timestamp {} is not finite", fix.t),
        });
    }
    if !(-90.0..=90.0).contains(&fix.lat) || !(-180.0..=180.0).contains(&fix.lon) {
        return Err(Error::OutOfRangeCoordinate {
            row,
            lat: fix.lat,
            lon: fix.lon,
        });
    }
    Ok(())
}

impl GpsTrack {
    /// Validate fixes as given; rows are numbered from 1.
    pub fn new(fixes: Vec<GpsFix>) -> Result<Self> {
        if fixes.is_empty() {
            return Err(Error::EmptyTrack);
        }
        for (i, fix) in fixes.iter().enumerate() {
            check_fix(i + 1, fix)?;
            if i > 0 {
                let prev = &fixes[i - 1];
                if fix.t <= prev.t {
                    return Err(Error::NonMonotoneTimestamps { row: i + 1 });
                }
                // spans across the antimeridian are not interpolable in raw degrees
                if (fix.lon - prev.lon).abs() > 180.0 {
                    return Err(Error::OutOfRangeCoordinate {
                        row: i + 1,
                        lat: fix.lat,
                        lon: fix.lon,
                    });
                }
            }
        }
        Ok(Self { fixes })
    }

    pub fn fixes(&self) -> &[GpsFix] {
        &self.fixes
    }

    /// Linear in latitude and longitude between the bracketing fixes;
    /// clamped to the first / last fix outside the track.
    pub fn interpolate(&self, t: f64) -> (f64, f64) {
        let f = &self.fixes;
        let first = f[0];
        let last = f[f.len() - 1];
        if t <= first.t {
            return (first.lat, first.lon);
        }
        if t >= last.t {
            return (last.lat, last.lon);
        }
        // first index with fix.t > t; 1 ≤ i < len
        let i = f.partition_point(|x| x.t <= t);
        let (a, b) = (f[i - 1], f[i]);
        if t == a.t {
            return (a.lat, a.lon);
        }
        let u = (t - a.t) / (b.t - a.t);
        (a.lat + u * (b.lat - a.lat), a.lon + u * (b.lon - a.lon))
    }
}

pub fn interpolate(track: &GpsTrack, t: f64) -> (f64, f64) {
    track.interpolate(t)
}

/// Parse CSV with header `t,lat,lon`.
pub fn parse_track(text: &str) -> Result<GpsTrack> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::MalformedRow {
        row: 0,
        reason: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["t", "lat", "lon"] {
        return Err(Error::MalformedRow {
            row: 0,
            reason: format!("expected header t,lat,lon, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut fixes = Vec::new();
    for (i, rec) in reader.deserialize::<GpsFix>().enumerate() {
        let fix = rec.map_err(|e| Error::MalformedRow {
            row: i + 1,
            reason: e.to_string(),
        })?;
        fixes.push(fix);
    }
    GpsTrack::new(fixes)
}

pub fn load_track(path: impl AsRef<Path>) -> Result<GpsTrack> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileMissing(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_track(&text)
}

/// Attach the interpolated position of each finding's frame; order and
/// count are preserved.
pub fn geolocate(findings: Vec<Finding>, track: &GpsTrack, clock: &FrameClock) -> Vec<GeoFinding> {
    findings
        .into_iter()
        .map(|finding| {
            let (lat, lon) = track.interpolate(clock.time_of(finding.frame_id));
            GeoFinding { finding, lat, lon }
        })
        .collect()
}
