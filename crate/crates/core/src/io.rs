//! Delimited-text and raw-binary interchange formats.
//!
//! Text files start with `# key=value` header lines followed by comma
//! separated data. Floats are written in Rust's shortest round-trip `{:e}`
//! form, so reading a file back reproduces the exact values and repeated
//! runs are byte-identical. Binary files are flat little-endian `f64` with a
//! `.hdr` sidecar holding the same header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::calibration::{AmplitudeMatrix, NormalizedData};
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;
use crate::image::AttenuationImage;
use crate::metrics::RegionMask;

pub const AMPLITUDE_KIND: &str = "amplitude-matrix";
pub const IMAGE_KIND: &str = "attenuation-image";
pub const MASK_KIND: &str = "region-mask";
pub const NORMALIZED_KIND: &str = "normalized-data";

/// Parsed `# key=value` header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        let mut h = Self::default();
        h.set("format", "uatomo");
        h.set("kind", kind);
        h
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }

    fn require<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("missing header field `{key}`"),
        })?;
        raw.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("bad value `{raw}` for header field `{key}`"),
        })
    }

    fn expect_kind(&self, kind: &str, path: &Path) -> Result<()> {
        match self.get("kind") {
            Some(k) if k == kind => Ok(()),
            other => Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("expected kind `{kind}`, found {other:?}"),
            }),
        }
    }
}

/// Header plus numbered data lines of a text file.
struct TextFile {
    header: Header,
    lines: Vec<(usize, String)>,
}

fn read_text(path: &Path) -> Result<TextFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text(&text)
}

fn parse_text(text: &str) -> Result<TextFile> {
    let mut header = Header::default();
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                header.set(k.trim(), v.trim());
            }
            continue;
        }
        lines.push((i + 1, line.to_string()));
    }
    Ok(TextFile { header, lines })
}

fn parse_float(path: &Path, line: usize, field: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("not a number: `{field}`"),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

fn write_binary(path: &Path, header: &Header, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, &bytes)?;
    let mut header = header.clone();
    header.set("encoding", "f64-le");
    header.set("values", values.len());
    write_file(&sidecar_path(path), header.render().as_bytes())
}

fn read_binary(path: &Path) -> Result<(Header, Vec<f64>)> {
    let header = read_text(&sidecar_path(path))?.header;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("{} bytes is not a whole number of f64 values", bytes.len()),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect::<Vec<_>>();
    let expected: usize = header.require("values", path)?;
    if expected != values.len() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!(
                "header declares {expected} values, file holds {}",
                values.len()
            ),
        });
    }
    Ok((header, values))
}

// ---------------------------------------------------------------- amplitudes

fn amplitude_header(m: &AmplitudeMatrix) -> Header {
    let mut h = Header::new(AMPLITUDE_KIND);
    h.set("n_elements", m.n_elements())
        .set("medium", &m.medium)
        .set("reflector_depth_m", format!("{:e}", m.reflector_depth))
        .set("units", "linear")
        .set("records", m.values().len());
    h
}

/// One `t,r,amplitude` record per transmit/receive pair.
pub fn write_amplitudes(path: &Path, m: &AmplitudeMatrix) -> Result<()> {
    let header = amplitude_header(m);
    if is_binary(path) {
        return write_binary(path, &header, m.values());
    }
    let n = m.n_elements();
    let mut out = header.render();
    out.push_str("t,r,amplitude\n");
    for (k, v) in m.values().iter().enumerate() {
        let _ = writeln!(out, "{},{},{v:e}", k / n, k % n);
    }
    write_file(path, out.as_bytes())
}

pub fn read_amplitudes(path: &Path) -> Result<AmplitudeMatrix> {
    let (header, values) = if is_binary(path) {
        read_binary(path)?
    } else {
        let file = read_text(path)?;
        let n: usize = file.header.require("n_elements", path)?;
        let mut values = vec![f64::NAN; n * n];
        let mut seen = 0usize;
        for (line, text) in &file.lines {
            if text.starts_with("t,") {
                continue;
            }
            let fields: Vec<&str> = text.split(',').collect();
            let bad = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                reason,
            };
            if fields.len() != 3 {
                return Err(bad(format!("expected `t,r,amplitude`, got `{text}`")));
            }
            let t: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| bad("bad tx index".into()))?;
            let r: usize = fields[1]
                .trim()
                .parse()
                .map_err(|_| bad("bad rx index".into()))?;
            if t >= n || r >= n {
                return Err(bad(format!("pair ({t},{r}) outside {n} elements")));
            }
            values[t * n + r] = parse_float(path, *line, fields[2])?;
            seen += 1;
        }
        if seen != n * n || values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("expected {} distinct records, found {seen}", n * n),
            });
        }
        (file.header, values)
    };
    header.expect_kind(AMPLITUDE_KIND, path)?;
    let n: usize = header.require("n_elements", path)?;
    let depth: f64 = header.require("reflector_depth_m", path)?;
    let medium = header.get("medium").unwrap_or("unknown").to_string();
    AmplitudeMatrix::new(n, values, medium, depth)
}

// ---------------------------------------------------------------- grids

fn grid_header(kind: &str, grid: &ImagingGrid, units: &str) -> Header {
    let mut h = Header::new(kind);
    h.set("n_axial", grid.n_axial())
        .set("n_lateral", grid.n_lateral())
        .set("width_m", format!("{:e}", grid.width()))
        .set("height_m", format!("{:e}", grid.height()))
        .set("units", units);
    h
}

fn write_rows(path: &Path, header: &Header, values: &[f64], cols: usize) -> Result<()> {
    if is_binary(path) {
        return write_binary(path, header, values);
    }
    let mut out = header.render();
    for row in values.chunks(cols) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

fn read_rows(path: &Path, rows: &str, cols: &str) -> Result<(Header, Vec<f64>)> {
    let (header, values) = if is_binary(path) {
        read_binary(path)?
    } else {
        let file = read_text(path)?;
        let n_cols: usize = file.header.require(cols, path)?;
        let mut values = Vec::new();
        for (line, text) in &file.lines {
            let start = values.len();
            for field in text.split(',') {
                values.push(parse_float(path, *line, field)?);
            }
            if values.len() - start != n_cols {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    reason: format!("expected {n_cols} columns, found {}", values.len() - start),
                });
            }
        }
        (file.header, values)
    };
    let n_rows: usize = header.require(rows, path)?;
    let n_cols: usize = header.require(cols, path)?;
    if values.len() != n_rows * n_cols {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("expected {n_rows}x{n_cols} values, found {}", values.len()),
        });
    }
    Ok((header, values))
}

fn grid_from_header(header: &Header, path: &Path) -> Result<ImagingGrid> {
    ImagingGrid::new(
        header.require("n_axial", path)?,
        header.require("n_lateral", path)?,
        header.require("width_m", path)?,
        header.require("height_m", path)?,
    )
}

/// Writes the image in dB/cm, one grid row (depth) per line.
pub fn write_image(path: &Path, image: &AttenuationImage) -> Result<()> {
    let header = grid_header(IMAGE_KIND, image.grid(), "dB/cm");
    write_rows(
        path,
        &header,
        &image.to_db_per_cm(),
        image.grid().n_lateral(),
    )
}

pub fn read_image(path: &Path) -> Result<AttenuationImage> {
    let (header, values) = read_rows(path, "n_axial", "n_lateral")?;
    header.expect_kind(IMAGE_KIND, path)?;
    AttenuationImage::from_db_per_cm(grid_from_header(&header, path)?, &values)
}

pub fn write_mask(path: &Path, mask: &RegionMask) -> Result<()> {
    let header = grid_header(MASK_KIND, mask.grid(), "mask");
    let values: Vec<f64> = mask
        .cells()
        .iter()
        .map(|&c| if c { 1.0 } else { 0.0 })
        .collect();
    write_rows(path, &header, &values, mask.grid().n_lateral())
}

pub fn read_mask(path: &Path) -> Result<RegionMask> {
    let (header, values) = read_rows(path, "n_axial", "n_lateral")?;
    header.expect_kind(MASK_KIND, path)?;
    RegionMask::new(
        grid_from_header(&header, path)?,
        values.iter().map(|&v| v != 0.0).collect(),
    )
}

/// `n × n` calibrated data, rows indexed by transmit element.
pub fn write_normalized(path: &Path, data: &NormalizedData) -> Result<()> {
    let g = &data.geometry;
    let mut header = Header::new(NORMALIZED_KIND);
    header
        .set("n_elements", g.n_elements())
        .set("pitch_m", format!("{:e}", g.pitch()))
        .set("reflector_depth_m", format!("{:e}", g.reflector_depth()))
        .set("absolute", data.absolute)
        .set("units", "Np");
    write_rows(path, &header, &data.values, g.n_elements().max(1))
}

pub fn read_normalized(path: &Path) -> Result<NormalizedData> {
    let (header, values) = read_rows(path, "n_elements", "n_elements")?;
    header.expect_kind(NORMALIZED_KIND, path)?;
    let geometry = crate::geometry::AcquisitionGeometry::new(
        header.require("n_elements", path)?,
        header.require("pitch_m", path)?,
        header.require("reflector_depth_m", path)?,
    )?;
    Ok(NormalizedData {
        values,
        geometry,
        absolute: header.require("absolute", path)?,
    })
}

/// 16-bit binary PGM, linear over `[low, high]` dB/cm, clamped.
pub fn write_pgm(path: &Path, image: &AttenuationImage, window: (f64, f64)) -> Result<()> {
    let (low, high) = window;
    if high.is_nan() || low.is_nan() || high <= low {
        return Err(Error::invalid("pgm window", format!("[{low}, {high}]")));
    }
    let grid = image.grid();
    let mut bytes = format!(
        "P5\n# dB/cm window [{low}, {high}]\n{} {}\n65535\n",
        grid.n_lateral(),
        grid.n_axial()
    )
    .into_bytes();
    for v in image.to_db_per_cm() {
        let level = ((v - low) / (high - low)).clamp(0.0, 1.0);
        let gray = (level * 65535.0).round() as u16;
        bytes.extend_from_slice(&gray.to_be_bytes());
    }
    write_file(path, &bytes)
}

/// Reads `key=value` lines (e.g. reports) into a sorted map.
pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}
