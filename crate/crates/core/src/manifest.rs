//! On-disk dataset format: a JSON manifest plus one feature file per session.
//!
//! The manifest lists class vocabulary and one entry per feature file with
//! its acquisition metadata. Feature files come in two encodings:
//!
//! * CSV — header `seq,f0,...,f{d-1}`, one frame per row, decimal floats.
//! * Binary — magic `ICF1`, little-endian u32 n, u32 d, then n·d f32
//!   row-major; `seq` is implicit 0..n−1.
//!
//! Saving then loading reproduces the dataset bit-exactly in either encoding.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureDataset, FrameRecord, Split};
use crate::error::{Error, Result};

/// Magic bytes of the binary feature-file encoding.
pub const FEATURE_MAGIC: &[u8; 4] = b"ICF1";

/// Feature file encoding selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureEncoding {
    Csv,
    Bin,
}

impl std::str::FromStr for FeatureEncoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FeatureEncoding::Csv),
            "bin" => Ok(FeatureEncoding::Bin),
            other => Err(Error::invalid_argument(format!(
                "unknown encoding '{other}' (expected csv|bin)"
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    dim: usize,
    num_classes: usize,
    class_names: Vec<String>,
    categories: Vec<String>,
    files: Vec<ManifestFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    path: String,
    encoding: FeatureEncoding,
    day: u32,
    split: Split,
    variant: String,
    object: String,
    class_id: usize,
}

/// Load a dataset from its manifest. Deterministic and order-preserving:
/// frames appear in manifest file order, then in row order within a file.
pub fn load_dataset(manifest_path: &Path) -> Result<FeatureDataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        Error::invalid_data(format!(
            "manifest {} is not valid JSON: {e}",
            manifest_path.display()
        ))
    })?;
    if manifest.dim < 1 {
        return Err(Error::invalid_data(format!(
            "manifest {}: dim must be >= 1",
            manifest_path.display()
        )));
    }
    if manifest.class_names.len() != manifest.num_classes
        || manifest.categories.len() != manifest.num_classes
    {
        return Err(Error::invalid_data(format!(
            "manifest {}: class_names/categories must each have num_classes entries",
            manifest_path.display()
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut frames = Vec::new();
    for entry in &manifest.files {
        if entry.class_id >= manifest.num_classes {
            return Err(Error::invalid_data(format!(
                "manifest {}: file {} has class id {} out of range",
                manifest_path.display(),
                entry.path,
                entry.class_id
            )));
        }
        let path = base.join(&entry.path);
        let rows = match entry.encoding {
            FeatureEncoding::Csv => read_csv_features(&path, manifest.dim)?,
            FeatureEncoding::Bin => read_bin_features(&path, manifest.dim)?,
        };
        for (seq, features) in rows {
            frames.push(FrameRecord {
                features,
                class_id: entry.class_id,
                object_name: entry.object.clone(),
                category_name: manifest.categories[entry.class_id].clone(),
                day: entry.day,
                split: entry.split,
                session_seq: seq,
                variant: entry.variant.clone(),
            });
        }
    }
    let dataset = FeatureDataset {
        name: manifest.name,
        dim: manifest.dim,
        num_classes: manifest.num_classes,
        class_names: manifest.class_names,
        categories: manifest.categories,
        frames,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Save a dataset as manifest + per-session feature files under `dir`.
/// Returns the manifest path. Output is deterministic: one file per
/// contiguous session, named from its metadata, listed in dataset order.
pub fn save_dataset(
    dataset: &FeatureDataset,
    dir: &Path,
    encoding: FeatureEncoding,
) -> Result<PathBuf> {
    dataset.validate()?;
    let data_dir = dir.join("data");
    fs::create_dir_all(&data_dir).map_err(|e| Error::io(&data_dir, e))?;

    let mut files = Vec::new();
    let mut used_names: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (key, range) in dataset.session_ranges() {
        let first = &dataset.frames[range.start];
        let session = &dataset.frames[range.clone()];
        if encoding == FeatureEncoding::Bin {
            // The binary layout has no seq column; it can only represent
            // 0-based gap-free sessions.
            for (i, frame) in session.iter().enumerate() {
                if frame.session_seq as usize != i {
                    return Err(Error::invalid_argument(format!(
                        "session {key} has non-contiguous seq numbers; save it as csv instead"
                    )));
                }
            }
        }
        let stem = sanitize(&format!(
            "{}_day{}_{}_{}",
            first.split, first.day, first.variant, first.object_name
        ));
        let n = used_names.entry(stem.clone()).or_insert(0);
        *n += 1;
        let unique = if *n == 1 {
            stem
        } else {
            format!("{stem}_{n}")
        };
        let ext = match encoding {
            FeatureEncoding::Csv => "csv",
            FeatureEncoding::Bin => "bin",
        };
        let rel = format!("data/{unique}.{ext}");
        let path = dir.join(&rel);
        match encoding {
            FeatureEncoding::Csv => write_csv_features(&path, dataset.dim, session)?,
            FeatureEncoding::Bin => write_bin_features(&path, dataset.dim, session)?,
        }
        files.push(ManifestFile {
            path: rel,
            encoding,
            day: first.day,
            split: first.split,
            variant: first.variant.clone(),
            object: first.object_name.clone(),
            class_id: first.class_id,
        });
    }

    let manifest = Manifest {
        name: dataset.name.clone(),
        dim: dataset.dim,
        num_classes: dataset.num_classes,
        class_names: dataset.class_names.clone(),
        categories: dataset.categories.clone(),
        files,
    };
    let manifest_path = dir.join("manifest.json");
    let file = File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &manifest)
        .map_err(|e| Error::invalid_data(format!("manifest serialization failed: {e}")))?;
    w.write_all(b"\n").map_err(|e| Error::io(&manifest_path, e))?;
    w.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn read_csv_features(path: &Path, dim: usize) -> Result<Vec<(u32, Vec<f32>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => {
            return Err(Error::invalid_data(format!(
                "{}: empty feature file",
                path.display()
            )))
        }
    };
    let expected_fields = dim + 1;
    let header_fields = header.split(',').count();
    if !header.starts_with("seq,") || header_fields != expected_fields {
        return Err(Error::invalid_data(format!(
            "{}: bad csv header (expected seq,f0,...,f{})",
            path.display(),
            dim - 1
        )));
    }
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let seq: u32 = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| bad_row(path, line_no, "seq is not an integer"))?;
        let mut features = Vec::with_capacity(dim);
        for f in fields {
            let v: f32 = f
                .parse()
                .map_err(|_| bad_row(path, line_no, "feature is not a number"))?;
            if !v.is_finite() {
                return Err(bad_row(path, line_no, "non-finite feature value"));
            }
            features.push(v);
        }
        if features.len() != dim {
            return Err(bad_row(
                path,
                line_no,
                &format!("expected {dim} features, found {}", features.len()),
            ));
        }
        rows.push((seq, features));
    }
    if rows.is_empty() {
        return Err(Error::invalid_data(format!(
            "{}: feature file has no rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn bad_row(path: &Path, line_no: usize, what: &str) -> Error {
    Error::invalid_data(format!("{} row {}: {what}", path.display(), line_no + 1))
}

fn write_csv_features(path: &Path, dim: usize, frames: &[FrameRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = String::from("seq");
    for j in 0..dim {
        header.push_str(&format!(",f{j}"));
    }
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for frame in frames {
        let mut line = frame.session_seq.to_string();
        for &v in &frame.features {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_bin_features(path: &Path, dim: usize) -> Result<Vec<(u32, Vec<f32>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::invalid_data(format!(
            "{}: not a binary feature file (bad magic)",
            path.display()
        )));
    }
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let n = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let d = u32::from_le_bytes(buf) as usize;
    if d != dim {
        return Err(Error::invalid_data(format!(
            "{}: feature width {d} does not match manifest dim {dim}",
            path.display()
        )));
    }
    if n == 0 {
        return Err(Error::invalid_data(format!(
            "{}: feature file has no rows",
            path.display()
        )));
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut features = Vec::with_capacity(d);
        for _ in 0..d {
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            let v = f32::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(Error::invalid_data(format!(
                    "{} row {}: non-finite feature value",
                    path.display(),
                    i
                )));
            }
            features.push(v);
        }
        rows.push((i as u32, features));
    }
    Ok(rows)
}

fn write_bin_features(path: &Path, dim: usize, frames: &[FrameRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, b: &[u8]| -> Result<()> {
        w.write_all(b).map_err(|e| Error::io(path, e))
    };
    put(&mut w, FEATURE_MAGIC)?;
    put(&mut w, &(frames.len() as u32).to_le_bytes())?;
    put(&mut w, &(dim as u32).to_le_bytes())?;
    for frame in frames {
        for &v in &frame.features {
            put(&mut w, &v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
