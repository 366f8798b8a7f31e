//! File formats: silhouette masks (PGM/PNG), smooth fields (16-bit PGM and a
//! raw float32 grid), point clouds (PLY/XYZ), OBJ meshes, camera rigs and
//! gradient blobs.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use image::{ExtendedColorType, ImageFormat};

use crate::camera::{Camera, CameraRecord, PointCloud};
use crate::grid::Grid;
use crate::silhouette::{SilhouetteImage, SmoothSilhouette};
use crate::{Error, Result, Vec3};

/// Pixels at or above this gray level are foreground.
pub const MASK_THRESHOLD: u8 = 128;

pub const SMOOTH_MAGIC: &[u8; 8] = b"DRWRSMTH";

/// Reads an 8-bit grayscale PGM (P2 or P5) or PNG mask.
pub fn read_mask(path: impl AsRef<Path>) -> Result<SilhouetteImage> {
    let img = image::open(path.as_ref())?.to_luma8();
    let (w, h) = img.dimensions();
    let cells = img
        .as_raw()
        .iter()
        .map(|&g| u8::from(g >= MASK_THRESHOLD))
        .collect();
    SilhouetteImage::new(w as usize, h as usize, cells)
}

fn mask_bytes(mask: &SilhouetteImage) -> Vec<u8> {
    mask.mask().data().iter().map(|&c| c * 255).collect()
}

/// Writes a mask as binary 8-bit PGM with levels 0 and 255.
pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &SilhouetteImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask_bytes(mask));
    fs::write(path, out)?;
    Ok(())
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &SilhouetteImage) -> Result<()> {
    image::save_buffer_with_format(
        path,
        &mask_bytes(mask),
        mask.width() as u32,
        mask.height() as u32,
        ExtendedColorType::L8,
        ImageFormat::Png,
    )?;
    Ok(())
}

/// 16-bit binary PGM with `round(field * 65535)`; samples are big-endian as
/// the PGM format requires.
pub fn smooth_pgm16_bytes(field: &SmoothSilhouette) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", field.width(), field.height()).into_bytes();
    for &v in field.field().data() {
        let level = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn write_smooth_pgm16(path: impl AsRef<Path>, field: &SmoothSilhouette) -> Result<()> {
    fs::write(path, smooth_pgm16_bytes(field))?;
    Ok(())
}

/// `DRWRSMTH`, u32 width, u32 height, then row-major little-endian f32.
pub fn smooth_raw_bytes(field: &SmoothSilhouette) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * field.field().data().len());
    out.extend_from_slice(SMOOTH_MAGIC);
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    for &v in field.field().data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_smooth_raw(path: impl AsRef<Path>, field: &SmoothSilhouette) -> Result<()> {
    fs::write(path, smooth_raw_bytes(field))?;
    Ok(())
}

/// Reads a raw float32 grid written by [`write_smooth_raw`].
pub fn read_grid_raw(bytes: &[u8]) -> Result<Grid<f32>> {
    if bytes.len() < 16 || &bytes[..8] != SMOOTH_MAGIC {
        return Err(Error::Parse("not a DRWRSMTH grid".into()));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != w * h * 4 {
        return Err(Error::Parse(format!(
            "grid body is {} bytes, expected {}",
            body.len(),
            w * h * 4
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Grid::from_vec(w, h, data))
}

/// Binary little-endian PLY with float32 vertex positions.
pub fn ply_bytes(cloud: &PointCloud) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\nend_header\n",
        cloud.len()
    )
    .into_bytes();
    for p in cloud.points() {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    fs::write(path, ply_bytes(cloud))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy)]
enum ScalarKind {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarKind {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

/// Reads the vertex positions of an ASCII or binary little-endian PLY file.
/// Only the vertex element is read; it must come first.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let perr = |m: &str| Error::Parse(format!("ply: {m}"));
    let mut reader = BufReader::new(bytes);
    let mut line = String::new();
    let mut header_len = 0;
    let mut next_line = |reader: &mut BufReader<&[u8]>, line: &mut String| -> Result<bool> {
        line.clear();
        let n = reader.read_line(line)?;
        header_len += n;
        Ok(n > 0)
    };
    if !next_line(&mut reader, &mut line)? || line.trim() != "ply" {
        return Err(perr("missing magic"));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut props: Vec<(String, ScalarKind)> = Vec::new();
    let mut in_vertex = false;
    let mut seen_element = false;
    loop {
        if !next_line(&mut reader, &mut line)? {
            return Err(perr("unterminated header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLe),
            ["format", other, ..] => return Err(perr(&format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    if seen_element {
                        return Err(perr("vertex element must come first"));
                    }
                    vertex_count =
                        Some(count.parse::<usize>().map_err(|_| perr("bad vertex count"))?);
                }
                seen_element = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(perr("list properties on vertices are not supported"))
            }
            ["property", kind, name] if in_vertex => {
                let kind =
                    ScalarKind::parse(kind).ok_or_else(|| perr(&format!("unknown type {kind}")))?;
                props.push((name.to_string(), kind));
            }
            ["property", ..] => {}
            [] => {}
            _ => return Err(perr(&format!("unexpected header line {:?}", line.trim()))),
        }
    }
    let format = format.ok_or_else(|| perr("missing format"))?;
    let count = vertex_count.ok_or_else(|| perr("missing vertex element"))?;
    let find = |axis: &str| {
        props
            .iter()
            .position(|(n, _)| n == axis)
            .ok_or_else(|| perr(&format!("missing property {axis}")))
    };
    let (ix, iy, iz) = (find("x")?, find("y")?, find("z")?);
    let mut points = Vec::with_capacity(count.min(1 << 24));
    match format {
        PlyFormat::Ascii => {
            let mut text = String::new();
            reader.read_to_string(&mut text).map_err(|_| perr("body is not utf-8"))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for _ in 0..count {
                let l = lines.next().ok_or_else(|| perr("truncated body"))?;
                let vals: Vec<f64> = l
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| perr("bad number")))
                    .collect::<Result<_>>()?;
                if vals.len() < props.len() {
                    return Err(perr("short vertex line"));
                }
                points.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
            }
        }
        PlyFormat::BinaryLe => {
            let stride: usize = props.iter().map(|(_, k)| k.size()).sum();
            let offsets: Vec<usize> = props
                .iter()
                .scan(0, |acc, (_, k)| {
                    let o = *acc;
                    *acc += k.size();
                    Some(o)
                })
                .collect();
            let body = &bytes[header_len..];
            if body.len() < stride * count {
                return Err(perr("truncated body"));
            }
            for rec in body.chunks_exact(stride).take(count) {
                let get = |i: usize| props[i].1.decode(&rec[offsets[i]..]);
                points.push(Vec3::new(get(ix), get(iy), get(iz)));
            }
        }
    }
    PointCloud::new(points)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_ply(&fs::read(path)?)
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("xyz line {}: bad number", i + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Parse(format!("xyz line {}: expected 3 values", i + 1)));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    PointCloud::new(points)
}

/// Reads `.ply` or `.xyz` by extension.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => read_ply(path),
        Some(e) if e.eq_ignore_ascii_case("xyz") => parse_xyz(&fs::read_to_string(path)?),
        _ => Err(Error::Parse(format!(
            "unknown point cloud extension: {}",
            path.display()
        ))),
    }
}

/// Triangle mesh loaded from OBJ.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Parses `v` and triangular `f` records of an OBJ file; everything else is
/// ignored. Face indices may be negative (relative) and carry `/vt/vn`.
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let perr = |m: &str| Error::Parse(format!("obj line {}: {m}", i + 1));
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let vals: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| perr("bad vertex")))
                    .collect::<Result<_>>()?;
                if vals.len() != 3 {
                    return Err(perr("vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let raw: i64 = head.parse().map_err(|_| perr("bad face index"))?;
                        let resolved = if raw < 0 {
                            vertices.len() as i64 + raw
                        } else {
                            raw - 1
                        };
                        if resolved < 0 || resolved as usize >= vertices.len() {
                            return Err(perr("face index out of range"));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(perr("only triangular faces are supported"));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    if triangles.is_empty() {
        return Err(Error::Parse("obj has no faces".into()));
    }
    Ok(TriMesh {
        vertices,
        triangles,
    })
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    parse_obj(&fs::read_to_string(path)?)
}

/// Camera rig file: JSON array of `{"matrix": [12 row-major], "width", "height"}`.
pub fn cameras_json(cams: &[Camera]) -> Result<String> {
    let recs: Vec<CameraRecord> = cams.iter().map(CameraRecord::from).collect();
    Ok(serde_json::to_string_pretty(&recs)?)
}

pub fn parse_cameras(text: &str) -> Result<Vec<Camera>> {
    let recs: Vec<CameraRecord> =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("cameras: {e}")))?;
    recs.into_iter().map(Camera::try_from).collect()
}

pub fn write_cameras(path: impl AsRef<Path>, cams: &[Camera]) -> Result<()> {
    fs::write(path, cameras_json(cams)?)?;
    Ok(())
}

pub fn read_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    parse_cameras(&fs::read_to_string(path)?)
}

/// Per-point gradients as a J x 3 little-endian float32 blob.
pub fn write_gradients(mut w: impl Write, grads: &[Vec3]) -> Result<()> {
    for g in grads {
        for v in [g.x, g.y, g.z] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}
