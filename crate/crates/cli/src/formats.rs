//! Newline-delimited file formats for annotations and detections, plus the
//! JSON report and curve CSV writers.
//!
//! One image per line keeps the formats streamable over large sets. Boxes
//! are `[x1, y1, x2, y2]` floats matching the geometry convention. Floats
//! are serialized in shortest round-trip decimal form with stable key
//! order, so writing the same values always produces the same bytes and a
//! write/read cycle is lossless.
//!
//! Malformed records are rejected with the line number and offending
//! field; unknown fields are ignored but reported as warnings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crowdnms_core::evaluation::CurvePoint;
use crowdnms_core::{BoundingBox, Detection, GroundTruthObject};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate image_id \"{image_id}\"")]
    DuplicateImage {
        path: String,
        line: usize,
        image_id: String,
    },
}

/// A parsed value plus any non-fatal warnings gathered along the way.
#[derive(Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// One annotated object; `density` appears only in density-annotated dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedObject {
    pub bbox: BoundingBox,
    pub ignore: bool,
    pub density: Option<f64>,
}

impl AnnotatedObject {
    pub fn to_ground_truth(&self) -> GroundTruthObject {
        let mut gt = GroundTruthObject::new(self.bbox, self.ignore);
        gt.density = self.density.unwrap_or(0.0);
        gt
    }
}

/// One image's annotation record.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotation {
    pub width: f64,
    pub height: f64,
    pub objects: Vec<AnnotatedObject>,
}

/// All annotations of a file, keyed by image id (sorted iteration order).
pub type AnnotationSet = BTreeMap<String, ImageAnnotation>;

/// Detections per image, keyed by image id.
pub type DetectionSet = BTreeMap<String, Vec<Detection>>;

// on-disk record shapes

#[derive(Serialize, Deserialize)]
struct AnnotationRecord {
    image_id: String,
    width: f64,
    height: f64,
    objects: Vec<ObjectRecord>,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    ignore: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    image_id: String,
    detections: Vec<DetectionEntry>,
}

#[derive(Serialize, Deserialize)]
struct DetectionEntry {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<f64>,
}

/// Full evaluation report; self-describing via tool/version/config.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: Value,
    pub num_images: usize,
    pub num_gt: usize,
    pub mr2: f64,
    pub ap: f64,
    pub recall: f64,
    pub curve: Vec<CurveRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_mr2: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CurveRecord {
    pub fppi: f64,
    pub miss_rate: f64,
}

fn record_err(path: &str, line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Record {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &str, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.to_string(),
        source,
    }
}

fn parse_bbox(path: &str, line: usize, raw: [f64; 4]) -> Result<BoundingBox, FormatError> {
    BoundingBox::new(raw[0], raw[1], raw[2], raw[3])
        .map_err(|e| record_err(path, line, format!("invalid field \"box\": {e}")))
}

fn check_unit_interval(
    path: &str,
    line: usize,
    field: &str,
    value: f64,
) -> Result<(), FormatError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(record_err(
            path,
            line,
            format!("invalid field \"{field}\": {value} outside [0, 1]"),
        ))
    }
}

fn warn_unknown_keys(
    warnings: &mut Vec<String>,
    path: &str,
    line: usize,
    value: &Value,
    known: &[&str],
    context: &str,
) {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                warnings.push(format!(
                    "{path}:{line}: unknown {context} field \"{key}\" ignored"
                ));
            }
        }
    }
}

fn read_lines<T, F>(
    path: &str,
    reader: impl Read,
    mut parse: F,
) -> Result<Loaded<Vec<T>>, FormatError>
where
    F: FnMut(usize, &str, &mut Vec<String>) -> Result<T, FormatError>,
{
    let reader = BufReader::new(reader);
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        out.push(parse(idx + 1, trimmed, &mut warnings)?);
    }
    Ok(Loaded {
        value: out,
        warnings,
    })
}

/// Reads an annotation file (optionally density-annotated).
pub fn read_annotations_from(
    path: &str,
    reader: impl Read,
) -> Result<Loaded<AnnotationSet>, FormatError> {
    let records = read_lines(path, reader, |line, text, warnings| {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| record_err(path, line, format!("malformed JSON: {e}")))?;
        warn_unknown_keys(
            warnings,
            path,
            line,
            &value,
            &["image_id", "width", "height", "objects"],
            "record",
        );
        if let Some(objects) = value.get("objects").and_then(Value::as_array) {
            for obj in objects {
                warn_unknown_keys(
                    warnings,
                    path,
                    line,
                    obj,
                    &["box", "ignore", "density"],
                    "object",
                );
            }
        }
        let record: AnnotationRecord = serde_json::from_value(value)
            .map_err(|e| record_err(path, line, format!("malformed record: {e}")))?;
        if !(record.width > 0.0 && record.height > 0.0) {
            return Err(record_err(
                path,
                line,
                format!(
                    "invalid field \"width\"/\"height\": {}x{} not positive",
                    record.width, record.height
                ),
            ));
        }
        let mut objects = Vec::with_capacity(record.objects.len());
        for obj in record.objects {
            let bbox = parse_bbox(path, line, obj.bbox)?;
            if obj.ignore > 1 {
                return Err(record_err(
                    path,
                    line,
                    format!("invalid field \"ignore\": {} is not 0 or 1", obj.ignore),
                ));
            }
            if let Some(d) = obj.density {
                check_unit_interval(path, line, "density", d)?;
            }
            objects.push(AnnotatedObject {
                bbox,
                ignore: obj.ignore == 1,
                density: obj.density,
            });
        }
        Ok((
            line,
            record.image_id,
            ImageAnnotation {
                width: record.width,
                height: record.height,
                objects,
            },
        ))
    })?;

    let mut set = AnnotationSet::new();
    for (line, image_id, annotation) in records.value {
        if set.contains_key(&image_id) {
            return Err(FormatError::DuplicateImage {
                path: path.to_string(),
                line,
                image_id,
            });
        }
        set.insert(image_id, annotation);
    }
    Ok(Loaded {
        value: set,
        warnings: records.warnings,
    })
}

pub fn read_annotations(path: &Path) -> Result<Loaded<AnnotationSet>, FormatError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(&display, e))?;
    read_annotations_from(&display, file)
}

/// Reads a detection file. `source_index` is each detection's position in
/// its image's list.
pub fn read_detections_from(
    path: &str,
    reader: impl Read,
) -> Result<Loaded<DetectionSet>, FormatError> {
    let records = read_lines(path, reader, |line, text, warnings| {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| record_err(path, line, format!("malformed JSON: {e}")))?;
        warn_unknown_keys(
            warnings,
            path,
            line,
            &value,
            &["image_id", "detections"],
            "record",
        );
        if let Some(entries) = value.get("detections").and_then(Value::as_array) {
            for entry in entries {
                warn_unknown_keys(
                    warnings,
                    path,
                    line,
                    entry,
                    &["box", "score", "density"],
                    "detection",
                );
            }
        }
        let record: DetectionRecord = serde_json::from_value(value)
            .map_err(|e| record_err(path, line, format!("malformed record: {e}")))?;
        let mut dets = Vec::with_capacity(record.detections.len());
        for (i, entry) in record.detections.into_iter().enumerate() {
            let bbox = parse_bbox(path, line, entry.bbox)?;
            check_unit_interval(path, line, "score", entry.score)?;
            let mut det = Detection::new(bbox, entry.score, i)
                .map_err(|e| record_err(path, line, format!("invalid field \"score\": {e}")))?;
            if let Some(d) = entry.density {
                check_unit_interval(path, line, "density", d)?;
                det = det.with_density(d).expect("range checked");
            }
            dets.push(det);
        }
        Ok((line, record.image_id, dets))
    })?;

    let mut set = DetectionSet::new();
    for (line, image_id, dets) in records.value {
        if set.contains_key(&image_id) {
            return Err(FormatError::DuplicateImage {
                path: path.to_string(),
                line,
                image_id,
            });
        }
        set.insert(image_id, dets);
    }
    Ok(Loaded {
        value: set,
        warnings: records.warnings,
    })
}

pub fn read_detections(path: &Path) -> Result<Loaded<DetectionSet>, FormatError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(&display, e))?;
    read_detections_from(&display, file)
}

/// Writes annotations, sorted by image id, one record per line.
pub fn write_annotations_to(
    writer: &mut impl Write,
    annotations: &AnnotationSet,
) -> std::io::Result<()> {
    for (image_id, ann) in annotations {
        let record = AnnotationRecord {
            image_id: image_id.clone(),
            width: ann.width,
            height: ann.height,
            objects: ann
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    bbox: o.bbox.corners(),
                    ignore: o.ignore as u8,
                    density: o.density,
                })
                .collect(),
        };
        serde_json::to_writer(&mut *writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes detections, sorted by image id, one record per line.
pub fn write_detections_to(
    writer: &mut impl Write,
    detections: &DetectionSet,
) -> std::io::Result<()> {
    for (image_id, dets) in detections {
        let record = DetectionRecord {
            image_id: image_id.clone(),
            detections: dets
                .iter()
                .map(|d| DetectionEntry {
                    bbox: d.bbox.corners(),
                    score: d.score,
                    density: d.density,
                })
                .collect(),
        };
        serde_json::to_writer(&mut *writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_annotations(path: &Path, annotations: &AnnotationSet) -> Result<(), FormatError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| io_err(&display, e))?;
    let mut writer = BufWriter::new(file);
    write_annotations_to(&mut writer, annotations).map_err(|e| io_err(&display, e))?;
    writer.flush().map_err(|e| io_err(&display, e))
}

pub fn write_detections(path: &Path, detections: &DetectionSet) -> Result<(), FormatError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| io_err(&display, e))?;
    let mut writer = BufWriter::new(file);
    write_detections_to(&mut writer, detections).map_err(|e| io_err(&display, e))?;
    writer.flush().map_err(|e| io_err(&display, e))
}

/// Pretty-printed JSON report with a trailing newline.
pub fn write_report_to(writer: &mut impl Write, report: &Report) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *writer, report)?;
    writer.write_all(b"\n")
}

/// CSV with header `fppi,miss_rate`.
pub fn write_curve_csv_to(writer: &mut impl Write, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(writer, "fppi,miss_rate")?;
    for p in curve {
        writeln!(writer, "{},{}", p.fppi, p.miss_rate)?;
    }
    Ok(())
}
